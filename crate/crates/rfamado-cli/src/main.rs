//! `rfamado`: cluster extreme-value grid series by the rescaled F-madogram.
//!
//! Subcommands cover the full pipeline: `simulate` synthetic grids, `dissim`
//! pairwise dissimilarity matrices, `cluster` (PAM), `ensemble` central
//! partitions across models, `compare` two central partitions,
//! `shuffle-test` the dependence ablation, `theory-surface` the closed-form
//! reference surface, and `pipeline` for the end-to-end per-hemisphere run.
//!
//! Every invocation writes a JSON run-manifest beside its primary output
//! with the resolved configuration and SHA-256 hashes of all inputs and
//! outputs. Exit codes: 0 success, 2 usage, 3 data, 4 numeric.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use rfamado::cluster::{pam, save_partition, shuffle_ablation, silhouette, load_partition};
use rfamado::dataset::{load_dataset, save_dataset, split_hemispheres, Dataset};
use rfamado::ensemble::{
    central_partition, compare_central, load_central, save_central, write_changes_csv,
};
use rfamado::error::{Error, ErrorKind};
use rfamado::gevtheory::dissimilarity_surface;
use rfamado::madogram::{dissimilarity_matrix, CStarConfig, DissimilarityMatrix};
use rfamado::quad::QuadratureConfig;
use rfamado::simulate::{sample_grid, SimGridSpec};

#[derive(Parser)]
#[command(name = "rfamado", version, about = "RFA-madogram clustering of extreme-value series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Hemisphere {
    North,
    South,
    Both,
}

impl Hemisphere {
    fn as_str(self) -> &'static str {
        match self {
            Hemisphere::North => "north",
            Hemisphere::South => "south",
            Hemisphere::Both => "both",
        }
    }
}

/// Flags shared by every command that searches for c*.
#[derive(Args)]
struct CStarArgs {
    /// Number of points on the log-spaced c grid (odd).
    #[arg(long = "k-grid", default_value_t = 129)]
    k_grid: usize,
    #[arg(long = "c-min", default_value_t = 0.1)]
    c_min: f64,
    #[arg(long = "c-max", default_value_t = 10.0)]
    c_max: f64,
    /// Local refinement rounds around the grid argmin.
    #[arg(long, default_value_t = 3)]
    refine: usize,
    /// Skip the per-series division by the mean before the c* search.
    #[arg(long = "no-prescale", default_value_t = false)]
    no_prescale: bool,
    /// Use n+1 instead of n as the empirical-CDF denominator.
    #[arg(long = "cdf-plus-one", default_value_t = false)]
    cdf_plus_one: bool,
}

impl CStarArgs {
    fn config(&self) -> CStarConfig {
        CStarConfig {
            c_min: self.c_min,
            c_max: self.c_max,
            grid_points: self.k_grid,
            refine_rounds: self.refine,
            plus_one_correction: self.cdf_plus_one,
        }
    }

    fn manifest(&self) -> Value {
        json!({
            "k_grid": self.k_grid,
            "c_min": self.c_min,
            "c_max": self.c_max,
            "refine": self.refine,
            "prescale": !self.no_prescale,
            "cdf_plus_one": self.cdf_plus_one,
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Pairwise dissimilarity matrix of a dataset.
    Dissim {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Hemisphere::Both)]
        hemisphere: Hemisphere,
        #[command(flatten)]
        cstar: CStarArgs,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        output: PathBuf,
    },
    /// PAM clustering of a dissimilarity matrix.
    Cluster {
        /// Matrix CSV produced by `dissim`.
        #[arg(long)]
        dissim: PathBuf,
        /// Points sidecar CSV (defaults to `<dissim stem>.points.csv` when present).
        #[arg(long)]
        points: Option<PathBuf>,
        #[arg(long, default_value_t = 4)]
        k: usize,
        #[arg(long)]
        output: PathBuf,
    },
    /// Central partition of several model partitions.
    Ensemble {
        /// Comma-separated partition CSVs; processed in lexicographic path order.
        #[arg(long, value_delimiter = ',', required = true)]
        partitions: Vec<PathBuf>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Compare two central partitions (the second is aligned to the first).
    Compare {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Also emit point features (lat, lon, cluster, probability, changed).
        #[arg(long)]
        geojson: Option<PathBuf>,
        /// Points sidecar with coordinates; required with --geojson.
        #[arg(long)]
        points: Option<PathBuf>,
    },
    /// Cluster original and temporally shuffled data, compare medoid distances.
    ShuffleTest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Hemisphere::Both)]
        hemisphere: Hemisphere,
        #[arg(long, default_value_t = 4)]
        k: usize,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        cstar: CStarArgs,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Generate a synthetic clustered grid dataset.
    Simulate {
        /// JSON grid specification.
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
    },
    /// Minimal theoretical dissimilarity over (alpha, shape-ratio) cells.
    TheorySurface {
        /// Alpha grid as start:end:count.
        #[arg(long, default_value = "0.01:1:25")]
        alphas: String,
        /// Shape-ratio grid as start:end:count.
        #[arg(long, default_value = "1:10:25")]
        ratios: String,
        #[arg(long, default_value_t = 0.01)]
        xi2: f64,
        #[arg(long = "quad-tol", default_value_t = 1e-8)]
        quad_tol: f64,
        #[arg(long = "max-subdivisions", default_value_t = 200)]
        max_subdivisions: usize,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Load, split by hemisphere, build matrices and PAM partitions.
    Pipeline {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 4)]
        k: usize,
        #[command(flatten)]
        cstar: CStarArgs,
        #[arg(long)]
        threads: Option<usize>,
        /// Output prefix; files are written as `<prefix>_<hemisphere>_*.csv`.
        #[arg(long)]
        output: PathBuf,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli.command) {
        // single-line, machine-parsable
        let msg = e.to_string().replace('\n', " ");
        eprintln!("error: {msg}");
        let code = match e.kind() {
            ErrorKind::Usage => 2,
            ErrorKind::Data => 3,
            ErrorKind::Numeric => 4,
        };
        std::process::exit(code);
    }
}

fn stage(msg: &str) {
    eprintln!("stage: {msg}");
}

fn resolve_threads(flag: Option<usize>) -> Result<usize, Error> {
    let n = match flag {
        Some(n) => n,
        None => match std::env::var("RFAMADO_THREADS") {
            Ok(v) => v
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("bad RFAMADO_THREADS `{v}`")))?,
            Err(_) => std::thread::available_parallelism().map_or(1, |n| n.get()),
        },
    };
    if n == 0 {
        return Err(Error::InvalidConfig("threads must be at least 1".into()));
    }
    Ok(n)
}

fn require_input(path: &Path) -> Result<(), Error> {
    if !path.is_file() {
        return Err(Error::Io {
            path: path.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "no such file"),
        });
    }
    Ok(())
}

fn require_output_dir(path: &Path) -> Result<(), Error> {
    let parent = match path.parent() {
        None => Path::new("."),
        Some(p) if p.as_os_str().is_empty() => Path::new("."),
        Some(p) => p,
    };
    if !parent.is_dir() {
        return Err(Error::Io {
            path: path.to_path_buf(),
            source: std::io::Error::new(
                std::io::ErrorKind::NotFound,
                "output directory does not exist",
            ),
        });
    }
    Ok(())
}

fn sha256_hex(path: &Path) -> Result<String, Error> {
    use sha2::{Digest, Sha256};
    let bytes = std::fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

fn file_entry(path: &Path) -> Result<Value, Error> {
    Ok(json!({
        "path": path.to_string_lossy(),
        "sha256": sha256_hex(path)?,
    }))
}

/// Write `<primary>.manifest.json` next to the primary output.
fn write_manifest(
    primary: &Path,
    command: &str,
    config: Value,
    inputs: &[&Path],
    outputs: &[&Path],
    streams: Value,
) -> Result<(), Error> {
    let manifest = json!({
        "command": command,
        "config": config,
        "inputs": inputs.iter().map(|p| file_entry(p)).collect::<Result<Vec<_>, _>>()?,
        "outputs": outputs.iter().map(|p| file_entry(p)).collect::<Result<Vec<_>, _>>()?,
        "streams": streams,
    });
    let mut name = primary.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    let path = primary.with_file_name(name);
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::InvalidConfig(format!("manifest: {e}")))?;
    std::fs::write(&path, text + "\n").map_err(|source| Error::Io { path, source })
}

fn no_streams() -> Value {
    json!({})
}

fn seeded_streams(seed: u64, tags: &[&str]) -> Value {
    json!({
        "seed": seed,
        "scheme": "splitmix64(seed XOR fnv1a64(tag))",
        "tags": tags,
    })
}

fn select_hemisphere(d: Dataset, which: Hemisphere) -> Dataset {
    match which {
        Hemisphere::Both => d,
        _ => {
            let (north, south) = split_hemispheres(&d);
            let kept = match which {
                Hemisphere::North => north,
                Hemisphere::South => south,
                Hemisphere::Both => unreachable!(),
            };
            if kept.is_empty() {
                eprintln!("warning: {} hemisphere is empty", which.as_str());
            }
            kept
        }
    }
}

fn points_sidecar_path(matrix_csv: &Path) -> PathBuf {
    let stem = matrix_csv.file_stem().unwrap_or_default().to_os_string();
    let mut name = stem;
    name.push(".points.csv");
    matrix_csv.with_file_name(name)
}

fn parse_linspace(s: &str) -> Result<Vec<f64>, Error> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::InvalidConfig(format!(
            "range must be start:end:count, got `{s}`"
        )));
    }
    let start: f64 = parts[0]
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("bad range start `{}`", parts[0])))?;
    let end: f64 = parts[1]
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("bad range end `{}`", parts[1])))?;
    let count: usize = parts[2]
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("bad range count `{}`", parts[2])))?;
    if count == 0 {
        return Err(Error::InvalidConfig("range count must be at least 1".into()));
    }
    if count == 1 {
        return Ok(vec![start]);
    }
    Ok((0..count)
        .map(|i| {
            if i == count - 1 {
                end // pin the endpoint; the increment formula can round past it
            } else {
                start + (end - start) * i as f64 / (count - 1) as f64
            }
        })
        .collect())
}

fn run(cmd: Command) -> Result<(), Error> {
    match cmd {
        Command::Dissim {
            input,
            hemisphere,
            cstar,
            threads,
            output,
        } => {
            require_input(&input)?;
            require_output_dir(&output)?;
            let cfg = cstar.config();
            cfg.validate()?;
            let threads = resolve_threads(threads)?;

            let d = load_dataset(&input)?;
            stage(&format!("loaded {} points, {} years", d.len(), d.n_years()));
            let d = select_hemisphere(d, hemisphere);
            let m = dissimilarity_matrix(&d, &cfg, threads, !cstar.no_prescale)?;
            stage(&format!(
                "dissimilarity matrix over {} points ({} pairs)",
                m.p(),
                m.pairs().len()
            ));
            let points_path = points_sidecar_path(&output);
            m.save(&output)?;
            m.save_points(&points_path)?;

            let config = json!({
                "hemisphere": hemisphere.as_str(),
                "cstar": cstar.manifest(),
                "threads": threads,
            });
            write_manifest(
                &output,
                "dissim",
                config,
                &[&input],
                &[&output, &points_path],
                no_streams(),
            )
        }

        Command::Cluster {
            dissim,
            points,
            k,
            output,
        } => {
            require_input(&dissim)?;
            require_output_dir(&output)?;
            let default_points = points_sidecar_path(&dissim);
            let points_path = match points {
                Some(p) => {
                    require_input(&p)?;
                    Some(p)
                }
                None if default_points.is_file() => Some(default_points),
                None => None,
            };
            let m = DissimilarityMatrix::load(&dissim, points_path.as_deref())?;
            stage(&format!("loaded matrix over {} points", m.p()));
            let part = pam(&m, k)?;
            stage(&format!(
                "pam k={k}: cost {}",
                part.total_cost.unwrap_or(f64::NAN)
            ));
            let sil = if k >= 2 { Some(silhouette(&m, &part)?) } else { None };
            if let Some(s) = sil {
                stage(&format!("silhouette {s}"));
            }
            save_partition(&part, m.point_ids(), &output)?;

            let mut inputs: Vec<&Path> = vec![&dissim];
            if let Some(p) = points_path.as_deref() {
                inputs.push(p);
            }
            let config = json!({
                "k": k,
                "total_cost": part.total_cost,
                "silhouette": sil,
            });
            write_manifest(&output, "cluster", config, &inputs, &[&output], no_streams())
        }

        Command::Ensemble { partitions, output } => {
            let mut paths = partitions;
            paths.sort(); // fixed lexicographic model order
            for p in &paths {
                require_input(p)?;
            }
            require_output_dir(&output)?;

            let mut ids: Option<Vec<String>> = None;
            let mut parts = Vec::with_capacity(paths.len());
            for p in &paths {
                let (pids, part) = load_partition(p)?;
                match &ids {
                    None => ids = Some(pids),
                    Some(existing) if *existing != pids => {
                        return Err(Error::IncompatiblePartitions(format!(
                            "point ids in `{}` differ from earlier partitions",
                            p.display()
                        )));
                    }
                    _ => {}
                }
                parts.push(part);
            }
            // partitions may disagree on k when some cluster came out empty
            // in a model; reject rather than guess
            let k = parts.iter().map(|p| p.k).max().unwrap_or(0);
            if parts.iter().any(|p| p.k != k) {
                return Err(Error::IncompatiblePartitions(
                    "partitions disagree on the number of clusters".into(),
                ));
            }
            let central = central_partition(&parts)?;
            stage(&format!(
                "central partition over {} models, {} points",
                central.m,
                central.len()
            ));
            let ids = ids.expect("at least one partition");
            save_central(&central, &ids, &output)?;

            let inputs: Vec<&Path> = paths.iter().map(PathBuf::as_path).collect();
            let config = json!({
                "models": paths.iter().map(|p| p.to_string_lossy()).collect::<Vec<_>>(),
                "k": k,
            });
            write_manifest(&output, "ensemble", config, &inputs, &[&output], no_streams())
        }

        Command::Compare {
            a,
            b,
            output,
            geojson,
            points,
        } => {
            require_input(&a)?;
            require_input(&b)?;
            require_output_dir(&output)?;
            if geojson.is_some() && points.is_none() {
                return Err(Error::InvalidConfig(
                    "--geojson needs --points for coordinates".into(),
                ));
            }
            if let Some(geo_path) = &geojson {
                require_output_dir(geo_path)?;
            }
            if let Some(points_path) = &points {
                require_input(points_path)?;
            }

            let (ids_a, central_a) = load_central(&a)?;
            let (ids_b, mut central_b) = load_central(&b)?;
            if ids_a != ids_b {
                return Err(Error::IncompatiblePartitions(
                    "central partitions cover different point sets".into(),
                ));
            }
            // a missing top label on one side is allowed; harmonise k
            let k = central_a.k.max(central_b.k);
            let mut central_a = central_a;
            central_a.k = k;
            central_b.k = k;
            let report = compare_central(&central_a, &central_b)?;
            stage(&format!(
                "{} of {} points changed modal cluster",
                report.changed_count(),
                ids_a.len()
            ));
            let mut buf = Vec::new();
            write_changes_csv(&report, &ids_a, &mut buf)?;
            std::fs::write(&output, buf).map_err(|source| Error::Io {
                path: output.clone(),
                source,
            })?;

            let mut outputs: Vec<PathBuf> = vec![output.clone()];
            if let Some(geo_path) = &geojson {
                let points_path = points.as_ref().expect("checked above");
                let coords = read_points_coords(points_path, &ids_a)?;
                let aligned_modal: Vec<usize> = central_b
                    .modal
                    .iter()
                    .map(|&l| report.permutation[l])
                    .collect();
                let features: Vec<Value> = ids_a
                    .iter()
                    .enumerate()
                    .map(|(i, id)| {
                        json!({
                            "type": "Feature",
                            "geometry": {
                                "type": "Point",
                                "coordinates": [coords[i].1, coords[i].0],
                            },
                            "properties": {
                                "point_id": id,
                                "cluster": aligned_modal[i],
                                "probability": central_b.probability[i],
                                "changed": report.changed[i],
                            },
                        })
                    })
                    .collect();
                let collection = json!({"type": "FeatureCollection", "features": features});
                let text = serde_json::to_string_pretty(&collection)
                    .map_err(|e| Error::InvalidConfig(format!("geojson: {e}")))?;
                std::fs::write(geo_path, text + "\n").map_err(|source| Error::Io {
                    path: geo_path.clone(),
                    source,
                })?;
                outputs.push(geo_path.clone());
            }

            let mut inputs: Vec<&Path> = vec![&a, &b];
            if let Some(p) = points.as_deref() {
                inputs.push(p);
            }
            let config = json!({
                "changed": report.changed_count(),
                "permutation": report.permutation,
                "clusters": report.clusters.iter().map(|c| json!({
                    "cluster": c.cluster,
                    "gained": c.gained,
                    "lost": c.lost,
                    "mass_delta": c.mass_delta,
                })).collect::<Vec<_>>(),
            });
            let outputs_ref: Vec<&Path> = outputs.iter().map(PathBuf::as_path).collect();
            write_manifest(&output, "compare", config, &inputs, &outputs_ref, no_streams())
        }

        Command::ShuffleTest {
            input,
            hemisphere,
            k,
            seed,
            cstar,
            threads,
            output,
        } => {
            require_input(&input)?;
            require_output_dir(&output)?;
            let cfg = cstar.config();
            cfg.validate()?;
            let threads = resolve_threads(threads)?;

            let d = load_dataset(&input)?;
            let d = select_hemisphere(d, hemisphere);
            stage(&format!("ablation over {} points", d.len()));
            let report = shuffle_ablation(&d, k, seed, &cfg, threads, !cstar.no_prescale)?;
            stage(&format!(
                "original strictly lower at {} of points",
                report.fraction_original_lower
            ));

            let mut buf = String::from("point_id,d_original,d_shuffled,original_lower\n");
            for (i, p) in d.points.iter().enumerate() {
                buf.push_str(&format!(
                    "{},{},{},{}\n",
                    p.point_id,
                    report.d_original[i],
                    report.d_shuffled[i],
                    report.d_original[i] < report.d_shuffled[i]
                ));
            }
            std::fs::write(&output, buf).map_err(|source| Error::Io {
                path: output.clone(),
                source,
            })?;

            let config = json!({
                "hemisphere": hemisphere.as_str(),
                "k": k,
                "cstar": cstar.manifest(),
                "threads": threads,
                "fraction_original_lower": report.fraction_original_lower,
            });
            write_manifest(
                &output,
                "shuffle-test",
                config,
                &[&input],
                &[&output],
                seeded_streams(seed, &["shuffle/<point_id>"]),
            )
        }

        Command::Simulate { spec, seed, output } => {
            require_input(&spec)?;
            require_output_dir(&output)?;
            let text = std::fs::read_to_string(&spec).map_err(|source| Error::Io {
                path: spec.clone(),
                source,
            })?;
            let grid_spec = SimGridSpec::from_json(&text)?;
            let d = sample_grid(&grid_spec, seed)?;
            stage(&format!(
                "simulated {} points x {} years",
                d.len(),
                d.n_years()
            ));
            save_dataset(&d, &output)?;
            let config = json!({
                "label": grid_spec.label,
                "points": grid_spec.n_points(),
                "years": grid_spec.years,
            });
            write_manifest(
                &output,
                "simulate",
                config,
                &[&spec],
                &[&output],
                seeded_streams(seed, &["sim-cluster/<cluster_id>", "sim-point/<point_id>"]),
            )
        }

        Command::TheorySurface {
            alphas,
            ratios,
            xi2,
            quad_tol,
            max_subdivisions,
            threads,
            output,
        } => {
            require_output_dir(&output)?;
            let alpha_grid = parse_linspace(&alphas)?;
            let ratio_grid = parse_linspace(&ratios)?;
            let quad = QuadratureConfig {
                abs_tol: quad_tol,
                max_subdivisions,
            };
            quad.validate()?;
            let threads = resolve_threads(threads)?;
            let pool = rayon_pool(threads)?;
            let cells =
                pool.install(|| dissimilarity_surface(&alpha_grid, &ratio_grid, xi2, &quad))?;
            stage(&format!("surface of {} cells", cells.len()));

            let mut buf = String::from("alpha,ratio,d\n");
            for cell in &cells {
                buf.push_str(&format!("{},{},{}\n", cell.alpha, cell.ratio, cell.d));
            }
            std::fs::write(&output, buf).map_err(|source| Error::Io {
                path: output.clone(),
                source,
            })?;

            let config = json!({
                "alphas": alphas,
                "ratios": ratios,
                "xi2": xi2,
                "quad_tol": quad_tol,
                "max_subdivisions": max_subdivisions,
                "threads": threads,
            });
            write_manifest(&output, "theory-surface", config, &[], &[&output], no_streams())
        }

        Command::Pipeline {
            input,
            k,
            cstar,
            threads,
            output,
        } => {
            require_input(&input)?;
            require_output_dir(&output)?;
            let cfg = cstar.config();
            cfg.validate()?;
            let threads = resolve_threads(threads)?;

            let d = load_dataset(&input)?;
            stage(&format!("loaded {} points, {} years", d.len(), d.n_years()));
            let (north, south) = split_hemispheres(&d);

            let prefix = output.to_string_lossy().into_owned();
            let mut outputs: Vec<PathBuf> = Vec::new();
            let mut summary = Vec::new();
            for (name, hemi) in [("north", north), ("south", south)] {
                if hemi.is_empty() {
                    eprintln!("warning: {name} hemisphere is empty, skipped");
                    continue;
                }
                stage(&format!("{name}: {} points", hemi.len()));
                let m = dissimilarity_matrix(&hemi, &cfg, threads, !cstar.no_prescale)?;
                let part = pam(&m, k)?;
                let sil = if k >= 2 { Some(silhouette(&m, &part)?) } else { None };
                stage(&format!(
                    "{name}: pam k={k} cost {}{}",
                    part.total_cost.unwrap_or(f64::NAN),
                    sil.map(|s| format!(", silhouette {s}")).unwrap_or_default()
                ));

                let matrix_path = PathBuf::from(format!("{prefix}_{name}_dissim.csv"));
                let points_path = points_sidecar_path(&matrix_path);
                let part_path = PathBuf::from(format!("{prefix}_{name}_partition.csv"));
                m.save(&matrix_path)?;
                m.save_points(&points_path)?;
                save_partition(&part, m.point_ids(), &part_path)?;
                outputs.extend([matrix_path, points_path, part_path]);
                summary.push(json!({
                    "hemisphere": name,
                    "points": hemi.len(),
                    "total_cost": part.total_cost,
                    "silhouette": sil,
                }));
            }
            if outputs.is_empty() {
                return Err(Error::InvalidDataset("no points in either hemisphere".into()));
            }

            let manifest_anchor = PathBuf::from(format!("{prefix}_pipeline"));
            let config = json!({
                "k": k,
                "cstar": cstar.manifest(),
                "threads": threads,
                "hemispheres": summary,
            });
            let outputs_ref: Vec<&Path> = outputs.iter().map(PathBuf::as_path).collect();
            write_manifest(
                &manifest_anchor,
                "pipeline",
                config,
                &[&input],
                &outputs_ref,
                no_streams(),
            )
        }
    }
}

fn rayon_pool(threads: usize) -> Result<rayon::ThreadPool, Error> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))
}

/// (lat, lon) per point id, from a points sidecar, in the order of `ids`.
fn read_points_coords(path: &Path, ids: &[String]) -> Result<Vec<(f64, f64)>, Error> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut by_id = std::collections::BTreeMap::new();
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == rfamado::madogram::POINTS_HEADER => {}
        other => {
            return Err(Error::BadHeader {
                expected: rfamado::madogram::POINTS_HEADER.into(),
                got: other.unwrap_or("").into(),
            })
        }
    }
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::Csv(format!("expected 5 fields, got {}", fields.len())));
        }
        let lat: f64 = fields[2]
            .parse()
            .map_err(|_| Error::Csv(format!("bad lat `{}`", fields[2])))?;
        let lon: f64 = fields[3]
            .parse()
            .map_err(|_| Error::Csv(format!("bad lon `{}`", fields[3])))?;
        by_id.insert(fields[1].to_string(), (lat, lon));
    }
    ids.iter()
        .map(|id| {
            by_id.get(id).copied().ok_or_else(|| {
                Error::IncompatiblePartitions(format!("point `{id}` missing from points file"))
            })
        })
        .collect()
}
