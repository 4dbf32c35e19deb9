//! Thin command-line front end; every subcommand wraps one library call.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gpip::diet::{build_model, compile, decode, load_catalog, PlanConfig};
use gpip::error::Error;
use gpip::exact::solve_exact;
use gpip::harness::{generate_synthetic, run_experiment, write_csv, ExperimentConfig, SizeClass};
use gpip::lp::{relax, write_lp_text};
use gpip::model::{normalize, BinarySolution, RawInstance};
use gpip::pessimistic::{solve_with, SolveMethod, SolveOptions, SolveResult};

#[derive(Parser)]
#[command(
    name = "gpip",
    about = "Generalized packing integer programs: LP relaxation, randomized and \
             derandomized rounding, meal planning, and experiments",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RoundingArgs {
    /// Scale divisor for the x block (requires --gamma).
    #[arg(long)]
    alpha: Option<f64>,
    /// Scale divisor for the y block (requires --alpha).
    #[arg(long)]
    gamma: Option<f64>,
    /// Search for certified parameters instead of passing them (default).
    #[arg(long, conflicts_with_all = ["alpha", "gamma"])]
    auto_calibrate: bool,
    /// Sample count for the randomized method and the fallback.
    #[arg(long, default_value_t = 64)]
    trials: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl RoundingArgs {
    fn manual_params(&self) -> Result<Option<(f64, f64)>, Error> {
        match (self.alpha, self.gamma) {
            (Some(a), Some(g)) => Ok(Some((a, g))),
            (None, None) => Ok(None),
            _ => Err(Error::Domain(
                "--alpha and --gamma must be given together".into(),
            )),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve a GPIP instance file.
    Solve {
        /// Instance JSON with keys A, B, U, V, u, v, c1, c2.
        instance: PathBuf,
        /// det = calibrated estimator rounding, rand = sample + repair,
        /// both = run the two and report both results.
        #[arg(long, default_value = "det")]
        method: String,
        #[command(flatten)]
        rounding: RoundingArgs,
        /// Fail with exit code 3 instead of sampling when no certificate
        /// exists.
        #[arg(long)]
        no_fallback: bool,
        /// Write the LP relaxation as plain text for cross-checking.
        #[arg(long)]
        dump_lp: Option<PathBuf>,
        /// Output JSON path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compile a catalog + plan config into GPIP form, solve, and decode a
    /// meal plan.
    Plan {
        catalog: PathBuf,
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 64)]
        trials: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact branch-and-bound solve of a small instance.
    Oracle {
        instance: PathBuf,
        #[arg(long, default_value_t = 1_000_000)]
        node_cap: u64,
    },
    /// Run the gap/runtime experiment grid and write a CSV.
    Experiment {
        /// Experiment config JSON (size_class, horizons, repetitions, seed,
        /// method).
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic catalog (small | medium | large).
    Gen {
        size: SizeClass,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Error> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

fn emit(out: &Option<PathBuf>, payload: &str) -> Result<(), Error> {
    match out {
        Some(path) => std::fs::write(path, payload).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        }),
        None => {
            println!("{payload}");
            Ok(())
        }
    }
}

fn solve_once(
    raw: &RawInstance,
    method: SolveMethod,
    rounding: &RoundingArgs,
    no_fallback: bool,
) -> Result<SolveResult, Error> {
    let opts = SolveOptions {
        method,
        trials: rounding.trials,
        seed: rounding.seed,
        manual_params: rounding.manual_params()?,
        allow_fallback: !no_fallback,
        ..Default::default()
    };
    solve_with(raw, &opts)
}

fn run() -> Result<(), Error> {
    match Cli::parse().command {
        Command::Solve {
            instance,
            method,
            rounding,
            no_fallback,
            dump_lp,
            out,
        } => {
            let raw: RawInstance = read_json(&instance)?;
            if let Some(path) = &dump_lp {
                let (normalized, _) = normalize(&raw)?;
                std::fs::write(path, write_lp_text(&relax(&normalized))).map_err(|source| {
                    Error::Io {
                        path: path.clone(),
                        source,
                    }
                })?;
            }
            let payload = match method.as_str() {
                "det" => {
                    let result = solve_once(&raw, SolveMethod::Deterministic, &rounding, no_fallback)?;
                    serde_json::to_string_pretty(&result).expect("result serializes")
                }
                "rand" => {
                    let result = solve_once(&raw, SolveMethod::Randomized, &rounding, no_fallback)?;
                    serde_json::to_string_pretty(&result).expect("result serializes")
                }
                "both" => {
                    let det = solve_once(&raw, SolveMethod::Deterministic, &rounding, no_fallback)?;
                    let rand = solve_once(&raw, SolveMethod::Randomized, &rounding, no_fallback)?;
                    let combined = serde_json::json!({
                        "deterministic": det,
                        "randomized": rand,
                    });
                    serde_json::to_string_pretty(&combined).expect("results serialize")
                }
                other => {
                    return Err(Error::Domain(format!(
                        "unknown method '{other}', expected det | rand | both"
                    )))
                }
            };
            emit(&out, &payload)
        }
        Command::Plan {
            catalog,
            config,
            seed,
            trials,
            out,
        } => {
            let catalog = load_catalog(&catalog)?;
            let config: PlanConfig = read_json(&config)?;
            let model = build_model(&catalog, &config)?;
            let compiled = compile(&model)?;
            let opts = SolveOptions {
                trials,
                seed,
                ..Default::default()
            };
            let result = gpip::pessimistic::solve_prepared(&compiled.instance, &opts)?;
            let solution = BinarySolution {
                x: result.x.clone(),
                y: result.y.clone(),
            };
            let plan = decode(&compiled.variable_map, &solution, &model)?;
            eprintln!(
                "method {:?}: objective {:.4} (LP bound {:.4}, gap {:.1}%), {:.0} prep minutes, {:.2} spent",
                result.method,
                plan.totals.objective,
                result.lp_bound * compiled.record.objective_scale,
                result.gap * 100.0,
                plan.totals.prep_minutes,
                plan.totals.money_spent,
            );
            emit(&out, &serde_json::to_string_pretty(&plan).expect("plan serializes"))
        }
        Command::Oracle { instance, node_cap } => {
            let raw: RawInstance = read_json(&instance)?;
            let (normalized, record) = normalize(&raw)?;
            let result = solve_exact(&normalized, node_cap);
            let expanded = record.expand_solution(&result.solution);
            let payload = serde_json::json!({
                "objective": result.objective * record.objective_scale,
                "x": expanded.x,
                "y": expanded.y,
                "nodes_explored": result.nodes_explored,
                "proven_optimal": result.proven_optimal,
            });
            emit(&None, &serde_json::to_string_pretty(&payload).expect("serializes"))
        }
        Command::Experiment { config, out } => {
            let config: ExperimentConfig = read_json(&config)?;
            let rows = run_experiment(&config)?;
            let csv = write_csv(&rows);
            std::fs::write(&out, &csv).map_err(|source| Error::Io {
                path: out.clone(),
                source,
            })?;
            print!("{csv}");
            Ok(())
        }
        Command::Gen { size, seed, out } => {
            let catalog = generate_synthetic(size, seed);
            emit(
                &out,
                &serde_json::to_string_pretty(&catalog).expect("catalog serializes"),
            )
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(Error::NoCertificate) => {
            eprintln!("error: {}", Error::NoCertificate);
            ExitCode::from(3)
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
    }
}
