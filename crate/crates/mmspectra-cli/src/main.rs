//! Command-line front end: file-in/file-out runs over mm-spaces with a
//! manifest echoing the resolved configuration for reproducibility.
//!
//! Exit codes: 0 success, 2 input error, 3 numerical error.

mod plot;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use mmspectra::inference::{
    bootstrap_test, confidence_bands, mean_spectrum, ScalingMode, SpectrumSample,
};
use mmspectra::mmspace::MassPolicy;
use mmspectra::signatures::{build_grid, classical_mds, pairwise_distances};
use mmspectra::spectrum::{eig, sweep};
use mmspectra::{io, AuxiliaryGraph, Error, MmSpace, SpectralCurve};

#[derive(Parser)]
#[command(
    name = "mmspectra",
    version,
    about = "Rho-Laplacian spectra of metric measure spaces: sweeps, signatures, harmonics, label propagation, inference"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, Default, ValueEnum)]
enum MassArg {
    /// Uniform masses summing to the total mass.
    #[default]
    Uniform,
    /// Mass proportional to the summed distance to graph neighbours.
    Degree,
}

impl MassArg {
    fn policy(self, total_mass: f64) -> MassPolicy {
        match self {
            MassArg::Uniform => MassPolicy::Uniform { total_mass },
            MassArg::Degree => MassPolicy::DegreeProportional { total_mass },
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Spectrum at a fixed rho, or the full sweep.
    Spectrum {
        /// Input space: .json (mm-space), .csv (point cloud) or edge list.
        input: PathBuf,
        /// Threshold for a single spectrum.
        #[arg(long, conflicts_with = "sweep")]
        rho: Option<f64>,
        /// Compute the full piecewise-constant curve instead.
        #[arg(long)]
        sweep: bool,
        #[arg(long)]
        out: PathBuf,
        /// Emit a step plot of the curve.
        #[arg(long)]
        svg: bool,
        #[arg(long, value_enum, default_value_t)]
        mass: MassArg,
        #[arg(long, default_value_t = 1.0)]
        total_mass: f64,
    },
    /// Pairwise spectral distances between spaces, with an MDS projection.
    Distance {
        /// Two or more input spaces.
        #[arg(required = true, num_args = 2..)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Quantile-grid size for the supremum over rho.
        #[arg(long, default_value_t = 200)]
        grid: usize,
        /// Number of smallest eigenvalues kept (default: smallest node count).
        #[arg(long)]
        kprime: Option<usize>,
        #[arg(long, default_value_t = 2)]
        mds_dims: usize,
        #[arg(long)]
        svg: bool,
        #[arg(long, value_enum, default_value_t)]
        mass: MassArg,
        #[arg(long, default_value_t = 1.0)]
        total_mass: f64,
    },
    /// Bootstrap two-sample test on mean spectra.
    Test {
        /// Directory of spaces for the first sample.
        sample_a: PathBuf,
        /// Directory of spaces for the second sample.
        sample_b: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Bootstrap replicates.
        #[arg(long = "B", default_value_t = 1000)]
        replicates: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        grid: usize,
        #[arg(long)]
        kprime: Option<usize>,
        /// Significance level echoed into the report.
        #[arg(long, default_value_t = 0.05)]
        level: f64,
        /// Compare the unscaled statistic, as the procedure reads literally.
        #[arg(long)]
        raw_statistic: bool,
        /// Use the (1 + #{theta >= T}) / (B + 1) p-value estimate.
        #[arg(long)]
        plus_one: bool,
        #[arg(long, value_enum, default_value_t)]
        mass: MassArg,
        #[arg(long, default_value_t = 1.0)]
        total_mass: f64,
    },
    /// Fiedler harmonic, spectral split and sign-change region.
    Harmonics {
        input: PathBuf,
        /// Threshold, or `auto` for the smallest connecting rho (evaluated
        /// at the midpoint above it).
        #[arg(long, default_value = "auto")]
        rho: String,
        /// Sign-change region fraction.
        #[arg(long, default_value_t = 0.05)]
        q: f64,
        #[arg(long)]
        out: PathBuf,
        /// Emit a node overlay (2-d point-cloud inputs only).
        #[arg(long)]
        svg: bool,
        #[arg(long, value_enum, default_value_t)]
        mass: MassArg,
        #[arg(long, default_value_t = 1.0)]
        total_mass: f64,
    },
    /// Mass-aware semi-supervised label propagation.
    Ssl {
        input: PathBuf,
        /// CSV of `node_index,label` seeds with labels in {+1, -1}.
        labels: PathBuf,
        #[arg(long)]
        rho: f64,
        #[arg(long, default_value_t = 1.0)]
        tau: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t)]
        mass: MassArg,
        #[arg(long, default_value_t = 1.0)]
        total_mass: f64,
    },
    /// Pointwise Student confidence bands for one eigenvalue coordinate.
    Bands {
        /// Directory of spaces forming the sample.
        sample_dir: PathBuf,
        /// `fiedler`, `largest`, or a 1-based eigenvalue index.
        #[arg(long, default_value = "fiedler")]
        which: String,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        #[arg(long, default_value_t = 200)]
        grid: usize,
        #[arg(long)]
        kprime: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        svg: bool,
        #[arg(long, value_enum, default_value_t)]
        mass: MassArg,
        #[arg(long, default_value_t = 1.0)]
        total_mass: f64,
    },
}

fn main() {
    if let Ok(threads) = std::env::var("MM_SPECTRA_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let cli = Cli::parse();
    if let Err(err) = run(cli.command) {
        eprintln!("error: {err}");
        std::process::exit(exit_code(&err));
    }
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::EigenFailed { .. }
        | Error::Disconnected { .. }
        | Error::NeverConnected { .. }
        | Error::LinearSolveFailed => 3,
        _ => 2,
    }
}

fn prepare_out(out: &Path) -> mmspectra::Result<()> {
    fs::create_dir_all(out)?;
    Ok(())
}

fn write_manifest(out: &Path, manifest: serde_json::Value) -> mmspectra::Result<()> {
    let mut manifest = manifest;
    manifest["version"] = json!(env!("CARGO_PKG_VERSION"));
    fs::write(
        out.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)? + "\n",
    )?;
    Ok(())
}

/// Reject spaces whose distance matrix breaks the basic rules (the triangle
/// inequality is deliberately not enforced).
fn validated(space: MmSpace, source: &Path) -> mmspectra::Result<MmSpace> {
    let violations = space.validate(false);
    if violations.is_empty() {
        return Ok(space);
    }
    let listed: Vec<String> = violations.iter().take(5).map(|v| v.to_string()).collect();
    Err(Error::Parse(format!(
        "{} is not a valid mm-space: {}{}",
        source.display(),
        listed.join("; "),
        if violations.len() > 5 { "; ..." } else { "" }
    )))
}

fn load_space(path: &Path, policy: &MassPolicy) -> mmspectra::Result<MmSpace> {
    validated(io::read_space(path, policy)?, path)
}

fn load_sample_dir(dir: &Path, policy: &MassPolicy) -> mmspectra::Result<Vec<(String, MmSpace)>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && matches!(
                    p.extension().and_then(|e| e.to_str()),
                    Some("json") | Some("csv") | Some("edges") | Some("edgelist") | Some("txt")
                )
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Parse(format!(
            "{} contains no space files (.json/.csv/.edges)",
            dir.display()
        )));
    }
    paths
        .iter()
        .map(|p| Ok((stem(p), load_space(p, policy)?)))
        .collect()
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn sweep_all(spaces: &[(String, MmSpace)]) -> mmspectra::Result<Vec<SpectralCurve>> {
    spaces.iter().map(|(_, s)| sweep(s, false)).collect()
}

fn default_kprime(spaces: &[(String, MmSpace)], kprime: Option<usize>) -> usize {
    kprime.unwrap_or_else(|| spaces.iter().map(|(_, s)| s.node_count()).min().unwrap_or(1))
}

fn run(command: Command) -> mmspectra::Result<()> {
    match command {
        Command::Spectrum {
            input,
            rho,
            sweep: do_sweep,
            out,
            svg,
            mass,
            total_mass,
        } => {
            if rho.is_none() && !do_sweep {
                return Err(Error::Parse(
                    "pass either --rho <value> or --sweep".to_string(),
                ));
            }
            prepare_out(&out)?;
            let space = load_space(&input, &mass.policy(total_mass))?;
            if do_sweep {
                let curve = sweep(&space, false)?;
                io::write_curve_json(&curve, out.join("curve.json"))?;
                io::write_curve_csv(&curve, out.join("curve.csv"))?;
                if svg {
                    fs::write(
                        out.join("curve.svg"),
                        plot::curve_svg(&curve, &format!("rho-spectrum of {}", stem(&input))),
                    )?;
                }
            } else {
                let rho = rho.expect("checked above");
                let graph = AuxiliaryGraph::build(&space, rho)?;
                let spec = eig(&graph.laplacian(), false)?;
                io::write_spectrum_csv(&spec, out.join("spectrum.csv"))?;
                io::write_spectrum_json(&spec, rho, out.join("spectrum.json"))?;
            }
            write_manifest(
                &out,
                json!({
                    "command": "spectrum",
                    "input": input,
                    "rho": rho,
                    "sweep": do_sweep,
                    "svg": svg,
                    "mass": format!("{mass:?}").to_lowercase(),
                    "total_mass": total_mass,
                    "out": out,
                }),
            )
        }
        Command::Distance {
            inputs,
            out,
            grid,
            kprime,
            mds_dims,
            svg,
            mass,
            total_mass,
        } => {
            prepare_out(&out)?;
            let policy = mass.policy(total_mass);
            let spaces: mmspectra::Result<Vec<(String, MmSpace)>> = inputs
                .iter()
                .map(|p| Ok((stem(p), load_space(p, &policy)?)))
                .collect();
            let spaces = spaces?;
            let k_prime = default_kprime(&spaces, kprime);
            let owned: Vec<MmSpace> = spaces.iter().map(|(_, s)| s.clone()).collect();
            let quantiles = build_grid(&owned, grid)?;
            let curves = sweep_all(&spaces)?;
            let matrix = pairwise_distances(&curves, &quantiles, k_prime)?;
            let names: Vec<String> = spaces.iter().map(|(n, _)| n.clone()).collect();
            io::write_distance_matrix_csv(&matrix, &names, out.join("distance_matrix.csv"))?;
            let mds = classical_mds(&matrix, mds_dims)?;
            io::write_mds_csv(&mds, &names, out.join("mds.csv"))?;
            if mds.positive < mds_dims {
                eprintln!(
                    "note: only {} positive MDS eigenvalues; remaining dimensions are zero",
                    mds.positive
                );
            }
            if svg {
                let pts: Vec<(f64, f64)> = (0..mds.coords.nrows())
                    .map(|i| {
                        (
                            mds.coords[(i, 0)],
                            if mds_dims > 1 { mds.coords[(i, 1)] } else { 0.0 },
                        )
                    })
                    .collect();
                let groups = vec![0usize; pts.len()];
                fs::write(
                    out.join("mds.svg"),
                    plot::scatter_svg(&pts, &groups, &names, "MDS of spectral distances"),
                )?;
            }
            write_manifest(
                &out,
                json!({
                    "command": "distance",
                    "inputs": inputs,
                    "grid": grid,
                    "kprime": k_prime,
                    "mds_dims": mds_dims,
                    "svg": svg,
                    "mass": format!("{mass:?}").to_lowercase(),
                    "total_mass": total_mass,
                    "out": out,
                }),
            )
        }
        Command::Test {
            sample_a,
            sample_b,
            out,
            replicates,
            seed,
            grid,
            kprime,
            level,
            raw_statistic,
            plus_one,
            mass,
            total_mass,
        } => {
            prepare_out(&out)?;
            let policy = mass.policy(total_mass);
            let a = load_sample_dir(&sample_a, &policy)?;
            let b = load_sample_dir(&sample_b, &policy)?;
            let mut pooled: Vec<MmSpace> = a.iter().map(|(_, s)| s.clone()).collect();
            pooled.extend(b.iter().map(|(_, s)| s.clone()));
            let quantiles = build_grid(&pooled, grid)?;
            let k_prime = kprime.unwrap_or_else(|| {
                pooled.iter().map(|s| s.node_count()).min().unwrap_or(1)
            });
            let curves_a = sweep_all(&a)?;
            let curves_b = sweep_all(&b)?;
            let s1 = SpectrumSample::new(&curves_a, quantiles.clone(), k_prime)?;
            let s2 = SpectrumSample::new(&curves_b, quantiles, k_prime)?;
            let scaling = if raw_statistic {
                ScalingMode::Raw
            } else {
                ScalingMode::Calibrated
            };
            let result = bootstrap_test(&s1, &s2, replicates, seed, scaling, plus_one)?;
            if let Some(w) = &result.warning {
                eprintln!("warning: {w}");
            }
            let report = json!({
                "statistic": result.statistic,
                "raw_statistic": result.raw_statistic,
                "p_value": result.p_value,
                "B": result.replicates,
                "seed": result.seed,
                "scaling_mode": result.scaling.name(),
                "plus_one": result.plus_one,
                "level": level,
                "reject": result.p_value < level,
                "n": curves_a.len(),
                "m": curves_b.len(),
                "kprime": k_prime,
                "warning": result.warning,
            });
            fs::write(
                out.join("test_report.json"),
                serde_json::to_string_pretty(&report)? + "\n",
            )?;
            println!(
                "T = {:.6} (raw {:.6}), p = {:.4} [{} scaling, B = {}]",
                result.statistic,
                result.raw_statistic,
                result.p_value,
                result.scaling.name(),
                result.replicates
            );
            write_manifest(
                &out,
                json!({
                    "command": "test",
                    "sample_a": sample_a,
                    "sample_b": sample_b,
                    "B": replicates,
                    "seed": seed,
                    "grid": grid,
                    "kprime": k_prime,
                    "level": level,
                    "raw_statistic": raw_statistic,
                    "plus_one": plus_one,
                    "mass": format!("{mass:?}").to_lowercase(),
                    "total_mass": total_mass,
                    "out": out,
                }),
            )
        }
        Command::Harmonics {
            input,
            rho,
            q,
            out,
            svg,
            mass,
            total_mass,
        } => {
            prepare_out(&out)?;
            let space = load_space(&input, &mass.policy(total_mass))?;
            let rho_value = if rho == "auto" {
                mmspectra::harmonics::connecting_rho(&space)?
            } else {
                rho.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad --rho value {rho:?}")))?
            };
            let report = mmspectra::harmonics::fiedler(&space, rho_value, q)?;
            let report_json = json!({
                "rho": report.rho,
                "fiedler_value": report.fiedler_value,
                "vector": report.fiedler_vector,
                "split": { "positive": report.positive, "negative": report.negative },
                "sign_region": report.sign_region,
                "multiplicity": report.multiplicity,
            });
            fs::write(
                out.join("harmonics.json"),
                serde_json::to_string_pretty(&report_json)? + "\n",
            )?;
            if svg {
                if let Ok((coords, _)) = io::read_points_csv(&input) {
                    if coords.ncols() == 2 {
                        let pts: Vec<(f64, f64)> = (0..coords.nrows())
                            .map(|i| (coords[(i, 0)], coords[(i, 1)]))
                            .collect();
                        fs::write(
                            out.join("harmonics.svg"),
                            plot::overlay_svg(
                                &pts,
                                &report.fiedler_vector,
                                &report.sign_region,
                                &format!("Fiedler harmonic at rho = {rho_value:.4}"),
                            ),
                        )?;
                    } else {
                        eprintln!("note: overlay needs a 2-d point cloud; skipping SVG");
                    }
                } else {
                    eprintln!("note: overlay needs a point-cloud input; skipping SVG");
                }
            }
            write_manifest(
                &out,
                json!({
                    "command": "harmonics",
                    "input": input,
                    "rho": rho,
                    "resolved_rho": rho_value,
                    "q": q,
                    "svg": svg,
                    "mass": format!("{mass:?}").to_lowercase(),
                    "total_mass": total_mass,
                    "out": out,
                }),
            )
        }
        Command::Ssl {
            input,
            labels,
            rho,
            tau,
            out,
            mass,
            total_mass,
        } => {
            prepare_out(&out)?;
            let space = load_space(&input, &mass.policy(total_mass))?;
            let seeds: BTreeMap<usize, i8> = io::read_labels_csv(&labels)?;
            let problem = mmspectra::ssl::SslProblem::new(&space, rho, tau, seeds)?;
            let solution = mmspectra::ssl::solve(&problem)?;
            if !solution.no_evidence.is_empty() {
                eprintln!(
                    "warning: {} isolated unlabelled node(s) have no evidence: {:?}",
                    solution.no_evidence.len(),
                    solution.no_evidence
                );
            }
            io::write_predictions_csv(&solution, out.join("predictions.csv"))?;
            write_manifest(
                &out,
                json!({
                    "command": "ssl",
                    "input": input,
                    "labels": labels,
                    "rho": rho,
                    "tau": tau,
                    "objective": solution.objective,
                    "no_evidence": solution.no_evidence,
                    "mass": format!("{mass:?}").to_lowercase(),
                    "total_mass": total_mass,
                    "out": out,
                }),
            )
        }
        Command::Bands {
            sample_dir,
            which,
            level,
            grid,
            kprime,
            out,
            svg,
            mass,
            total_mass,
        } => {
            prepare_out(&out)?;
            let sample = load_sample_dir(&sample_dir, &mass.policy(total_mass))?;
            let k_prime = default_kprime(&sample, kprime);
            let which_index = match which.as_str() {
                "fiedler" => 2,
                "largest" => k_prime,
                other => other
                    .parse::<usize>()
                    .map_err(|_| Error::Parse(format!("bad --which value {other:?}")))?,
            };
            let owned: Vec<MmSpace> = sample.iter().map(|(_, s)| s.clone()).collect();
            let quantiles = build_grid(&owned, grid)?;
            let curves = sweep_all(&sample)?;
            let spectra = SpectrumSample::new(&curves, quantiles, k_prime)?;
            let est = mean_spectrum(&spectra);
            let bands = confidence_bands(&est, level, which_index)?;
            io::write_bands_csv(&bands, out.join("bands.csv"))?;
            if svg {
                fs::write(
                    out.join("bands.svg"),
                    plot::bands_svg(
                        &bands,
                        &format!("{:.0}% band for eigenvalue {which_index}", level * 100.0),
                    ),
                )?;
            }
            write_manifest(
                &out,
                json!({
                    "command": "bands",
                    "sample_dir": sample_dir,
                    "which": which,
                    "which_index": which_index,
                    "level": level,
                    "grid": grid,
                    "kprime": k_prime,
                    "n": sample.len(),
                    "svg": svg,
                    "mass": format!("{mass:?}").to_lowercase(),
                    "total_mass": total_mass,
                    "out": out,
                }),
            )
        }
    }
}
