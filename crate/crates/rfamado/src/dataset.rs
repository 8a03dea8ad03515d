//! Grid-point annual-maxima series: ingestion, hemisphere split,
//! mean rescaling and the temporal shuffle used by the dependence ablation.
//!
//! The on-disk format is a long CSV with the exact header
//! `point_id,lat,lon,year,value`: one row per (point, year), decimal point
//! `.`, no thousands separators.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::rng::{derive_seed, SplitMix64};

pub const DATASET_HEADER: &str = "point_id,lat,lon,year,value";

/// One grid point: coordinates plus its annual-maxima series.
///
/// Values are strictly positive and finite; years strictly increasing and
/// paired with values by index.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSeries {
    pub point_id: String,
    pub lat: f64,
    pub lon: f64,
    pub values: Vec<f64>,
    pub years: Vec<i32>,
}

impl GridSeries {
    pub fn new(
        point_id: impl Into<String>,
        lat: f64,
        lon: f64,
        years: Vec<i32>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let point_id = point_id.into();
        let invalid = |reason: String| Error::InvalidSeries {
            point_id: point_id.clone(),
            reason,
        };
        if !(-90.0..=90.0).contains(&lat) || !lat.is_finite() {
            return Err(invalid(format!("latitude {lat} outside [-90, 90]")));
        }
        if !(-180.0..180.0).contains(&lon) || !lon.is_finite() {
            return Err(invalid(format!("longitude {lon} outside [-180, 180)")));
        }
        if values.len() != years.len() {
            return Err(invalid(format!(
                "{} values vs {} years",
                values.len(),
                years.len()
            )));
        }
        if values.is_empty() {
            return Err(invalid("empty series".into()));
        }
        for (&y, &v) in years.iter().zip(&values) {
            if !v.is_finite() {
                return Err(Error::NonFiniteValue {
                    point_id,
                    year: y,
                });
            }
            if v <= 0.0 {
                return Err(Error::NonPositiveValue {
                    point_id,
                    year: y,
                    value: v,
                });
            }
        }
        if years.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("time index not strictly increasing".into()));
        }
        Ok(Self {
            point_id,
            lat,
            lon,
            values,
            years,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// True when every observation equals the first one; such series have a
    /// one-atom empirical CDF and are flagged in dissimilarity output.
    pub fn is_degenerate(&self) -> bool {
        self.values.iter().all(|&v| v == self.values[0])
    }
}

/// A collection of grid points sharing one time index.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub points: Vec<GridSeries>,
    pub label: String,
}

impl Dataset {
    pub fn new(points: Vec<GridSeries>, label: impl Into<String>) -> Result<Self> {
        let label = label.into();
        if let Some(first) = points.first() {
            for p in &points[1..] {
                if p.len() != first.len() {
                    return Err(Error::RaggedSeries {
                        point_id: p.point_id.clone(),
                        expected: first.len(),
                        got: p.len(),
                    });
                }
                if p.years != first.years {
                    return Err(Error::MismatchedTimeIndex {
                        point_id: p.point_id.clone(),
                    });
                }
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for p in &points {
            if !seen.insert(p.point_id.as_str()) {
                return Err(Error::InvalidDataset(format!(
                    "duplicate point id `{}`",
                    p.point_id
                )));
            }
        }
        Ok(Self { points, label })
    }

    pub fn empty(label: impl Into<String>) -> Self {
        Self {
            points: Vec::new(),
            label: label.into(),
        }
    }

    /// Number of grid points.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Series length (0 for an empty dataset).
    pub fn n_years(&self) -> usize {
        self.points.first().map_or(0, GridSeries::len)
    }

    pub fn point_ids(&self) -> Vec<String> {
        self.points.iter().map(|p| p.point_id.clone()).collect()
    }
}

/// Read a dataset from the long-CSV format.
///
/// Points come out sorted by `point_id` and years ascending within each
/// point, so the in-memory layout does not depend on row order in the file.
/// Any malformed row aborts the load; nothing is dropped silently.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    read_dataset(file, &label)
}

/// Same as [`load_dataset`] but from any reader.
pub fn read_dataset(reader: impl Read, label: &str) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::Csv(e.to_string()))?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if header != DATASET_HEADER {
        return Err(Error::BadHeader {
            expected: DATASET_HEADER.into(),
            got: header,
        });
    }

    struct Acc {
        lat: f64,
        lon: f64,
        rows: BTreeMap<i32, f64>,
    }
    let mut by_point: BTreeMap<String, Acc> = BTreeMap::new();

    for record in rdr.records() {
        let record = record.map_err(|e| Error::Csv(e.to_string()))?;
        if record.len() != 5 {
            return Err(Error::Csv(format!(
                "expected 5 fields, got {} in row {:?}",
                record.len(),
                record
            )));
        }
        let point_id = record[0].to_string();
        let parse_f = |idx: usize, name: &str| -> Result<f64> {
            record[idx]
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::Csv(format!("bad {name} `{}` for `{point_id}`", &record[idx])))
        };
        let lat = parse_f(1, "lat")?;
        let lon = parse_f(2, "lon")?;
        let year: i32 = record[3]
            .trim()
            .parse()
            .map_err(|_| Error::Csv(format!("bad year `{}` for `{point_id}`", &record[3])))?;
        let value = parse_f(4, "value")?;
        if !value.is_finite() {
            return Err(Error::NonFiniteValue { point_id, year });
        }
        if value <= 0.0 {
            return Err(Error::NonPositiveValue {
                point_id,
                year,
                value,
            });
        }

        let acc = by_point.entry(point_id.clone()).or_insert_with(|| Acc {
            lat,
            lon,
            rows: BTreeMap::new(),
        });
        if acc.lat != lat || acc.lon != lon {
            return Err(Error::InvalidSeries {
                point_id,
                reason: "inconsistent coordinates across rows".into(),
            });
        }
        if acc.rows.insert(year, value).is_some() {
            return Err(Error::DuplicateObservation { point_id, year });
        }
    }

    let mut points = Vec::with_capacity(by_point.len());
    for (point_id, acc) in by_point {
        let years: Vec<i32> = acc.rows.keys().copied().collect();
        let values: Vec<f64> = acc.rows.values().copied().collect();
        points.push(GridSeries::new(point_id, acc.lat, acc.lon, years, values)?);
    }
    Dataset::new(points, label)
}

/// Write a dataset in the long-CSV format (points in stored order, years
/// ascending). Floats use the shortest round-trip decimal representation,
/// so save-then-load is the identity.
pub fn save_dataset(d: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::new();
    write_dataset(d, &mut out)?;
    std::fs::write(path, out).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_dataset(d: &Dataset, writer: &mut impl Write) -> Result<()> {
    let io_err = |e: std::io::Error| Error::Csv(e.to_string());
    writeln!(writer, "{DATASET_HEADER}").map_err(io_err)?;
    for p in &d.points {
        for (&year, &value) in p.years.iter().zip(&p.values) {
            writeln!(writer, "{},{},{},{},{}", p.point_id, p.lat, p.lon, year, value)
                .map_err(io_err)?;
        }
    }
    Ok(())
}

/// Split into (northern, southern) hemispheres. The equator (lat = 0)
/// goes north; the union is exactly the input.
pub fn split_hemispheres(d: &Dataset) -> (Dataset, Dataset) {
    let (north, south): (Vec<_>, Vec<_>) = d.points.iter().cloned().partition(|p| p.lat >= 0.0);
    (
        Dataset {
            points: north,
            label: d.label.clone(),
        },
        Dataset {
            points: south,
            label: d.label.clone(),
        },
    )
}

/// Divide a series by its empirical mean, giving a series with mean 1.
pub fn rescale_by_mean(s: &GridSeries) -> Result<GridSeries> {
    let mean = s.values.iter().sum::<f64>() / s.len() as f64;
    if !(mean.is_finite() && mean > 0.0) {
        return Err(Error::BadMean { mean });
    }
    let mut out = s.clone();
    for v in &mut out.values {
        *v /= mean;
    }
    Ok(out)
}

/// [`rescale_by_mean`] applied to every point.
pub fn rescale_dataset(d: &Dataset) -> Result<Dataset> {
    let points = d
        .points
        .iter()
        .map(rescale_by_mean)
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        points,
        label: d.label.clone(),
    })
}

/// Permute each point's values independently in time, leaving the years in
/// place. Stream per point: `splitmix64(derive_seed(seed, "shuffle/<point_id>"))`,
/// so the result is reproducible and independent of point order.
pub fn shuffle_in_time(d: &Dataset, seed: u64) -> Dataset {
    let points = d
        .points
        .iter()
        .map(|p| {
            let mut rng = SplitMix64::new(derive_seed(seed, &format!("shuffle/{}", p.point_id)));
            let mut out = p.clone();
            rng.shuffle(&mut out.values);
            out
        })
        .collect();
    Dataset {
        points,
        label: d.label.clone(),
    }
}
