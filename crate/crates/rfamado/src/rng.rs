//! Deterministic pseudo-random numbers.
//!
//! Every random quantity in this crate is drawn from [`SplitMix64`], the
//! 64-bit-state generator of Steele, Lea and Flood (the `java.util.SplittableRandom`
//! update function). It is hand-rolled here, with the constants written out below,
//! so that byte-identical output streams are guaranteed across platforms and
//! dependency upgrades. Independent streams are derived with
//! [`derive_seed`]: `splitmix64(seed XOR fnv1a64(tag))`, where `tag` is a short
//! string naming the stream (e.g. `"shuffle/<point_id>"`).

use std::f64::consts::PI;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64: 64-bit state, period 2^64.
///
/// Update: `state += 0x9E3779B97F4A7C15`, output mixed with
/// `z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9; z = (z ^ (z >> 27)) * 0x94D049BB133111EB; z ^ (z >> 31)`.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform on [0, 1): the top 53 bits scaled by 2^-53.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on the open interval (0, 1); never returns 0 or 1,
    /// so logarithms of draws are always finite.
    pub fn next_open01(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard exponential via inversion.
    pub fn next_exp(&mut self) -> f64 {
        -self.next_open01().ln()
    }

    /// Uniform angle on (0, pi), for the positive-stable sampler.
    pub fn next_angle(&mut self) -> f64 {
        self.next_open01() * PI
    }

    /// Uniform integer in [0, bound). Uses the modulo reduction; the bias is
    /// below bound * 2^-64, irrelevant for the array sizes shuffled here.
    pub fn next_below(&mut self, bound: u64) -> u64 {
        debug_assert!(bound > 0);
        self.next_u64() % bound
    }

    /// In-place Fisher-Yates shuffle (downward pass).
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.next_below(i as u64 + 1) as usize;
            xs.swap(i, j);
        }
    }
}

/// FNV-1a 64-bit hash (offset basis 0xcbf29ce484222325, prime 0x100000001b3).
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// Derive an independent stream seed from a run seed and a stream tag.
///
/// `derive_seed(seed, tag) = splitmix64_output(seed XOR fnv1a64(tag))`.
pub fn derive_seed(seed: u64, tag: &str) -> u64 {
    SplitMix64::new(seed ^ fnv1a64(tag.as_bytes())).next_u64()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix_reference_values() {
        // First three outputs for seed 0; frozen so any change to the
        // constants or the mixing is caught.
        let mut r = SplitMix64::new(0);
        assert_eq!(r.next_u64(), 0xE220_A839_7B1D_CDAF);
        assert_eq!(r.next_u64(), 0x6E78_9E6A_A1B9_65F4);
        assert_eq!(r.next_u64(), 0x06C4_5D18_8009_454F);
    }

    #[test]
    fn same_seed_same_stream() {
        let mut a = SplitMix64::new(123);
        let mut b = SplitMix64::new(123);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn unit_interval_bounds() {
        let mut r = SplitMix64::new(7);
        for _ in 0..10_000 {
            let x = r.next_f64();
            assert!((0.0..1.0).contains(&x));
            let y = r.next_open01();
            assert!(y > 0.0 && y < 1.0);
        }
    }

    #[test]
    fn shuffle_preserves_multiset() {
        let mut r = SplitMix64::new(99);
        let mut xs: Vec<u32> = (0..57).collect();
        r.shuffle(&mut xs);
        let mut sorted = xs.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..57).collect::<Vec<_>>());
        assert_ne!(xs, (0..57).collect::<Vec<_>>());
    }

    #[test]
    fn derive_seed_separates_tags() {
        let a = derive_seed(1, "shuffle/p0");
        let b = derive_seed(1, "shuffle/p1");
        assert_ne!(a, b);
        assert_eq!(a, derive_seed(1, "shuffle/p0"));
    }

    #[test]
    fn fnv_reference_value() {
        // FNV-1a test vector: empty input hashes to the offset basis.
        assert_eq!(fnv1a64(b""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(fnv1a64(b"a"), 0xaf63_dc4c_8601_ec8c);
    }
}
