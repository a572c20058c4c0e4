//! `steerkit`: command-line frontend for the steering analysis toolkit.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use steerkit::criteria::{ensemble_points, ensemble_to_csv, n_povm, n_restricted_pvm};
use steerkit::expsim::{simulate_counts, simulate_steering};
use steerkit::qstate::{
    bloch_decompose, canonical_form, closest_werner, fidelity, state_from_json, state_to_json,
    werner_state, BlochForm, Party, WernerSpec,
};
use steerkit::steering_game::{
    platonic_settings, steering_bound, steering_parameter, SteeringData,
};
use steerkit::tomo::{mc_uncertainty, reconstruct, TomoInput, MC_DEFAULT_SAMPLES};
use steerkit::{Result, SteerError};

use steerkit_cli::io::write_atomic;
use steerkit_cli::pipeline::{figure3_rows, run_verdict};
use steerkit_cli::scenario::ScenarioConfig;
use steerkit_cli::svg::ensemble_svg;

#[derive(Parser)]
#[command(
    name = "steerkit",
    about = "Steering analysis for two-qubit states with loss",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Povm,
    Pvm,
}

#[derive(Clone, Copy, ValueEnum)]
enum PartyArg {
    Alice,
    Bob,
}

impl From<PartyArg> for Party {
    fn from(p: PartyArg) -> Party {
        match p {
            PartyArg::Alice => Party::Alice,
            PartyArg::Bob => Party::Bob,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SimKind {
    Tomo,
    Steering,
}

#[derive(Subcommand)]
enum Command {
    /// Write the Werner state with parameter mu.
    Werner {
        #[arg(long)]
        mu: f64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Bloch vectors and correlation matrix of a state file.
    Decompose { state: PathBuf },
    /// Canonical (diagonal-correlation) frame of a state file.
    Canonical { state: PathBuf },
    /// Uhlmann fidelity between two state files.
    Fidelity { a: PathBuf, b: PathBuf },
    /// Closest Werner state and the corresponding fidelity.
    ClosestWerner { state: PathBuf },
    /// Evaluate the nonsteerability criterion for a state file.
    CheckNonsteer {
        state: PathBuf,
        /// Heralding efficiency of the steering party.
        #[arg(long)]
        eps: f64,
        #[arg(long, value_enum, default_value = "povm")]
        variant: VariantArg,
        /// Which party is being tested as the steerer.
        #[arg(long, value_enum, default_value = "bob")]
        party: PartyArg,
        /// Optional uncertainty of the criterion value; fills the margin.
        #[arg(long)]
        delta_n: Option<f64>,
    },
    /// Cheating bound for the n-setting steering test.
    Bound {
        #[arg(long, default_value_t = 6)]
        n: usize,
        #[arg(long)]
        eps_a: f64,
    },
    /// Steering parameter of a counts CSV against the cheating bound.
    SteerTest {
        counts: PathBuf,
        #[arg(long)]
        eps_a: f64,
        /// Setting count used for the bound (platonic preset).
        #[arg(long, default_value_t = 6)]
        n: usize,
    },
    /// Simulate an acquisition described by a scenario file.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, value_enum, default_value = "tomo")]
        kind: SimKind,
    },
    /// Reconstruct a state from a tomography counts CSV.
    Tomo {
        counts: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Monte Carlo uncertainty of an estimator over tomography counts.
    Mc {
        counts: PathBuf,
        /// mu | fidelity | n-povm | s-pred
        #[arg(long)]
        estimator: String,
        #[arg(long, default_value_t = MC_DEFAULT_SAMPLES)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Heralding efficiency (required for the n-povm estimator).
        #[arg(long)]
        eps: Option<f64>,
    },
    /// Full one-way pipeline for a scenario file.
    Verdict {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run every scenario in a directory and emit the sweep panels.
    Figure3 {
        #[arg(long)]
        scenario_set: PathBuf,
        #[arg(short, long, default_value = ".")]
        output: PathBuf,
    },
    /// Criterion ensemble of a state: CSV plus an SVG with the bound curve.
    FigureS2 {
        state: PathBuf,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 625)]
        dirs: usize,
        /// Output prefix; writes <prefix>.csv and <prefix>.svg.
        #[arg(short, long, default_value = "figure_s2")]
        output: String,
    },
}

fn read_state(path: &Path) -> Result<steerkit::qstate::DensityMatrix4> {
    state_from_json(&std::fs::read_to_string(path)?)
}

fn bloch_json(bf: &BlochForm) -> serde_json::Value {
    let mat = |m: &nalgebra::Matrix3<f64>| {
        (0..3).map(|i| (0..3).map(|j| m[(i, j)]).collect::<Vec<_>>()).collect::<Vec<_>>()
    };
    json!({
        "a": [bf.a.x, bf.a.y, bf.a.z],
        "b": [bf.b.x, bf.b.y, bf.b.z],
        "t": mat(&bf.t),
        "canonical": bf.canonical,
        "rot_a": mat(&bf.rot_a),
        "rot_b": mat(&bf.rot_b),
    })
}

fn emit(text: String, output: Option<&Path>) -> Result<()> {
    match output {
        Some(path) => write_atomic(path, &text),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

/// Sidecar path convention: `counts.csv` ↦ `counts.meta.json`.
fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("meta.json")
}

fn cartesian_axes() -> Vec<[f64; 3]> {
    vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
}

fn load_tomo_input(counts: &Path) -> Result<TomoInput> {
    let csv_text = std::fs::read_to_string(counts)?;
    let side = sidecar_path(counts);
    let table = if side.exists() {
        steerkit::expsim::CountTable::from_csv_with_sidecar(
            &csv_text,
            &std::fs::read_to_string(&side)?,
        )?
    } else {
        steerkit::expsim::CountTable::from_csv(&csv_text, cartesian_axes(), cartesian_axes())?
    };
    TomoInput::new(table)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Werner { mu, output } => {
            let state = werner_state(WernerSpec::new(mu)?);
            emit(state_to_json(&state), output.as_deref())
        }
        Command::Decompose { state } => {
            let bf = bloch_decompose(&read_state(&state)?);
            emit(serde_json::to_string_pretty(&bloch_json(&bf))?, None)
        }
        Command::Canonical { state } => {
            let bf = canonical_form(&bloch_decompose(&read_state(&state)?));
            emit(serde_json::to_string_pretty(&bloch_json(&bf))?, None)
        }
        Command::Fidelity { a, b } => {
            let f = fidelity(&read_state(&a)?, &read_state(&b)?);
            emit(serde_json::to_string_pretty(&json!({ "fidelity": f }))?, None)
        }
        Command::ClosestWerner { state } => {
            let (mu_star, fid_star) = closest_werner(&read_state(&state)?);
            emit(
                serde_json::to_string_pretty(&json!({
                    "mu_star": mu_star,
                    "fid_star": fid_star,
                }))?,
                None,
            )
        }
        Command::CheckNonsteer { state, eps, variant, party, delta_n } => {
            let bf = canonical_form(&bloch_decompose(&read_state(&state)?));
            let mut report = match variant {
                VariantArg::Povm => n_povm(&bf, eps, party.into())?,
                VariantArg::Pvm => n_restricted_pvm(&bf, eps, party.into())?,
            };
            if let Some(dn) = delta_n {
                report = report.with_uncertainty(dn)?;
            }
            let mut value = serde_json::to_value(&report)?;
            value["nonsteerable"] = serde_json::Value::Bool(report.satisfied());
            emit(serde_json::to_string_pretty(&value)?, None)
        }
        Command::Bound { n, eps_a } => {
            let settings = platonic_settings(n)?;
            let result = steering_bound(&settings, eps_a)?;
            emit(serde_json::to_string_pretty(&result)?, None)
        }
        Command::SteerTest { counts, eps_a, n } => {
            let data = SteeringData::from_csv(&std::fs::read_to_string(&counts)?)?;
            let (s, delta_s) = steering_parameter(&data)?;
            let settings = platonic_settings(n)?;
            let bound = steering_bound(&settings, eps_a)?;
            let margin = if delta_s > 0.0 { (s - bound.bound) / delta_s } else { f64::INFINITY };
            emit(
                serde_json::to_string_pretty(&json!({
                    "s": s,
                    "delta_s": delta_s,
                    "eps_a": eps_a,
                    "bound": bound.bound,
                    "sd_margin": margin,
                    "steering_demonstrated": s > bound.bound,
                }))?,
                None,
            )
        }
        Command::Simulate { scenario, output, kind } => {
            let base = scenario.parent().unwrap_or(Path::new(".")).to_path_buf();
            let sc = ScenarioConfig::from_json(&std::fs::read_to_string(&scenario)?)?;
            let rho = sc.resolve_state(&base)?;
            match kind {
                SimKind::Tomo => {
                    let axes = platonic_settings(3)?;
                    let cfg = sc.source_config(sc.tomo_time, 2);
                    let table = simulate_counts(&rho, &axes, &axes, &cfg)?;
                    write_atomic(&output, &table.to_csv())?;
                    write_atomic(&sidecar_path(&output), &table.sidecar_json())?;
                }
                SimKind::Steering => {
                    let six = platonic_settings(6)?;
                    let cfg = sc.source_config(sc.steering_time, 1);
                    let run = simulate_steering(&rho, &six, &cfg)?;
                    write_atomic(&output, &run.data.to_csv())?;
                    write_atomic(&sidecar_path(&output), &serde_json::to_string_pretty(&run)?)?;
                }
            }
            Ok(())
        }
        Command::Tomo { counts, output } => {
            let input = load_tomo_input(&counts)?;
            let rho = reconstruct(&input)?;
            emit(state_to_json(&rho), output.as_deref())
        }
        Command::Mc { counts, estimator, samples, seed, eps } => {
            let input = load_tomo_input(&counts)?;
            let summary = match estimator.as_str() {
                "mu" => mc_uncertainty(
                    &input,
                    "mu",
                    |rho| Ok(closest_werner(rho).0),
                    samples,
                    seed,
                )?,
                "fidelity" => mc_uncertainty(
                    &input,
                    "fidelity",
                    |rho| Ok(closest_werner(rho).1),
                    samples,
                    seed,
                )?,
                "n-povm" => {
                    let eps = eps.ok_or_else(|| {
                        SteerError::Domain("--eps is required for the n-povm estimator".into())
                    })?;
                    mc_uncertainty(
                        &input,
                        "n-povm",
                        move |rho| {
                            n_povm(&canonical_form(&bloch_decompose(rho)), eps, Party::Bob)
                                .map(|r| r.n_value)
                        },
                        samples,
                        seed,
                    )?
                }
                "s-pred" => {
                    let six = platonic_settings(6)?;
                    mc_uncertainty(
                        &input,
                        "s-pred",
                        move |rho| {
                            let bf = bloch_decompose(rho);
                            let s: f64 = six
                                .dirs()
                                .iter()
                                .map(|u| -(u.transpose() * bf.t * u)[0])
                                .sum::<f64>()
                                / six.len() as f64;
                            Ok(s)
                        },
                        samples,
                        seed,
                    )?
                }
                other => {
                    return Err(SteerError::Domain(format!(
                        "unknown estimator `{other}`; use mu | fidelity | n-povm | s-pred"
                    )))
                }
            };
            emit(serde_json::to_string_pretty(&summary)?, None)
        }
        Command::Verdict { scenario, output } => {
            let base = scenario.parent().unwrap_or(Path::new(".")).to_path_buf();
            let sc = ScenarioConfig::from_json(&std::fs::read_to_string(&scenario)?)?;
            let result = run_verdict(&sc, &base)?;
            emit(serde_json::to_string_pretty(&result)?, output.as_deref())
        }
        Command::Figure3 { scenario_set, output } => {
            let mut paths: Vec<PathBuf> = std::fs::read_dir(&scenario_set)?
                .filter_map(|e| e.ok())
                .map(|e| e.path())
                .filter(|p| p.extension().is_some_and(|x| x == "json"))
                .collect();
            paths.sort();
            if paths.is_empty() {
                return Err(SteerError::InsufficientData(format!(
                    "no scenario files in {}",
                    scenario_set.display()
                )));
            }
            let mut results = Vec::new();
            for path in &paths {
                let sc = ScenarioConfig::from_json(&std::fs::read_to_string(path)?)?;
                results.push(run_verdict(&sc, &scenario_set)?);
            }
            let (steering, nonsteer) = figure3_rows(&results);
            std::fs::create_dir_all(&output)?;
            write_atomic(&output.join("figure3_steering.csv"), &steering)?;
            write_atomic(&output.join("figure3_nonsteer.csv"), &nonsteer)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&json!({
                    "scenarios": results.len(),
                    "conclusive": results.iter().filter(|r| r.verdict.conclusive).count(),
                    "steering_csv": output.join("figure3_steering.csv"),
                    "nonsteer_csv": output.join("figure3_nonsteer.csv"),
                }))?
            );
            Ok(())
        }
        Command::FigureS2 { state, eps, dirs, output } => {
            let bf = canonical_form(&bloch_decompose(&read_state(&state)?));
            let data = ensemble_points(&bf, eps, dirs, Party::Bob)?;
            let csv_path = PathBuf::from(format!("{output}.csv"));
            let svg_path = PathBuf::from(format!("{output}.svg"));
            write_atomic(&csv_path, &ensemble_to_csv(&data))?;
            write_atomic(&svg_path, &ensemble_svg(&data))?;
            println!(
                "{}",
                serde_json::to_string_pretty(&json!({
                    "n_value": data.n_value,
                    "epsilon": data.epsilon,
                    "points": data.points.len(),
                    "csv": csv_path,
                    "svg": svg_path,
                }))?
            );
            Ok(())
        }
    }
}

fn exit_code_for(err: &SteerError) -> u8 {
    match err {
        SteerError::Domain(_) | SteerError::Validation(_) | SteerError::Contract(_) => 2,
        // Malformed user-supplied files are validation failures too.
        SteerError::Json(_) | SteerError::Csv(_) => 2,
        SteerError::InsufficientData(_) => 3,
        SteerError::OutOfRegime(_) => 4,
        _ => 5,
    }
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("STEERKIT_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let envelope = json!({
                "error": {
                    "class": err.class(),
                    "message": err.to_string(),
                }
            });
            eprintln!("{envelope}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
