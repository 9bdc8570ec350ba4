//! `robust-amp`: run pipeline stages or whole experiments from a TOML config.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;
use robust_amp::amp::{amp_run, state_evolution};
use robust_amp::ensembles::{corrupt_minor, sample_symmetric};
use robust_amp::error::Error;
use robust_amp::harness::{audit_seed, load_or_calibrate, run_experiment, validate_config, ExperimentConfig};
use robust_amp::lsth::{audit, build_constraint_system, integral_point, recover, solve_feasibility, PseudoExpectation, Verdict};
use robust_amp::matrix::SymmetricMatrix;

const EXIT_USAGE: u8 = 1;
const EXIT_UNSOLVED: u8 = 2;
const EXIT_RESOURCE: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "robust-amp", version, about = "Robust AMP via local-statistics SDP relaxations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for single-seed stages; replaces the seed list for `experiment`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides `output_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Solver feasibility tolerance.
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    /// Solver iteration limit.
    #[arg(long = "max-iters", global = true)]
    max_iters: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample the symmetric matrix X.
    Sample,
    /// Corrupt X into Y.
    Corrupt {
        /// Use this X instead of sampling one.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Run AMP and write its trace.
    Amp {
        /// Matrix to run on instead of a sampled X.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Monte Carlo state evolution of the configured denoisers.
    Se,
    /// Calibrate (or load from cache) the local statistics table.
    Calibrate,
    /// Build and solve the local-statistics system on Y.
    Solve {
        /// Corrupted matrix to use instead of sampling and corrupting.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Round a stored moment matrix to a vector.
    Round {
        /// Moment matrix; defaults to `<out>/moment.symmat`.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Corrupted matrix the moment matrix was solved against.
        #[arg(long)]
        matrix: Option<PathBuf>,
    },
    /// Run every seed of the configuration.
    Experiment {
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Recompute stored records from their artifacts and compare.
    Audit,
}

enum Failure {
    Usage(String),
    Unsolved(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Lib(e.into())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Lib(e.into())
    }
}

type CliResult = Result<(), Failure>;

fn load_config(cli: &Cli) -> Result<ExperimentConfig, Failure> {
    let path = cli.config.as_ref().ok_or_else(|| Failure::Usage("--config <file> is required".into()))?;
    let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = ExperimentConfig::from_toml(&text)?;
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if let Some(tol) = cli.tolerance {
        cfg.solver.tolerance = tol;
    }
    if let Some(it) = cli.max_iters {
        cfg.solver.max_iters = usize::try_from(it).map_err(|_| Failure::Usage("--max-iters too large".into()))?;
    }
    if let Some(seed) = cli.seed {
        cfg.seeds = vec![seed];
    }
    let violations = validate_config(&cfg);
    if let Some(v) = violations.iter().find(|v| v.resource) {
        return Err(Error::Resource(v.to_string()).into());
    }
    if !violations.is_empty() {
        let list: Vec<String> = violations.iter().map(ToString::to_string).collect();
        return Err(Error::Config(list.join("; ")).into());
    }
    Ok(cfg)
}

fn seed_of(cli: &Cli, cfg: &ExperimentConfig) -> u64 {
    cli.seed.unwrap_or(cfg.seeds[0])
}

fn read_matrix(path: &Path) -> Result<SymmetricMatrix, Failure> {
    Ok(SymmetricMatrix::from_symmat(&fs::read_to_string(path)?)?)
}

fn out_dir(cfg: &ExperimentConfig) -> Result<&Path, Failure> {
    fs::create_dir_all(&cfg.output_dir)?;
    Ok(&cfg.output_dir)
}

fn write(path: PathBuf, text: String) -> CliResult {
    fs::write(&path, text)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn corrupted(cfg: &ExperimentConfig, seed: u64, input: Option<&PathBuf>) -> Result<SymmetricMatrix, Failure> {
    match input {
        Some(p) => read_matrix(p),
        None => {
            let x = sample_symmetric(&cfg.ensemble, seed)?;
            Ok(corrupt_minor(&x, &cfg.corruption.spec(seed))?.corrupted)
        }
    }
}

fn run(cli: &Cli) -> CliResult {
    let cfg = load_config(cli)?;
    let seed = seed_of(cli, &cfg);
    match &cli.command {
        Command::Sample => {
            let x = sample_symmetric(&cfg.ensemble, seed)?;
            write(out_dir(&cfg)?.join("X.symmat"), x.to_symmat())
        }
        Command::Corrupt { input } => {
            let x = match input {
                Some(p) => read_matrix(p)?,
                None => sample_symmetric(&cfg.ensemble, seed)?,
            };
            let rec = corrupt_minor(&x, &cfg.corruption.spec(seed))?;
            let out = out_dir(&cfg)?;
            write(out.join("support.json"), serde_json::to_string(&rec.support)?)?;
            write(out.join("Y.symmat"), rec.corrupted.to_symmat())
        }
        Command::Amp { input } => {
            let x = match input {
                Some(p) => read_matrix(p)?,
                None => sample_symmetric(&cfg.ensemble, seed)?,
            };
            let trace = amp_run(&x, &cfg.family()?, cfg.t, None)?;
            write(out_dir(&cfg)?.join("trace.json"), serde_json::to_string(&trace)?)
        }
        Command::Se => {
            let se = state_evolution(&cfg.family()?, cfg.t, cfg.calibration.mc_samples, cfg.calibration.seed)?;
            write(out_dir(&cfg)?.join("se.json"), serde_json::to_string_pretty(&se)?)
        }
        Command::Calibrate => {
            let stats = load_or_calibrate(&cfg)?;
            write(out_dir(&cfg)?.join("stats.json"), serde_json::to_string(&stats)?)
        }
        Command::Solve { input } => {
            let y = corrupted(&cfg, seed, input.as_ref())?;
            let stats = load_or_calibrate(&cfg)?;
            let sys = build_constraint_system(&y, cfg.corruption.epsilon, &stats, &cfg.lsh)?;
            let warm = if cfg.lsh.robust {
                Some(integral_point(&sys.basis, &vec![0.0; y.n()], Some(&vec![1.0; y.n()]), Some(&y))?)
            } else {
                None
            };
            let mut solver = cfg.solver.clone();
            solver.seed = seed;
            let report = solve_feasibility(&sys, &solver, warm.as_deref())?;
            let out = out_dir(&cfg)?;
            if let Some(pe) = &report.pe {
                write(out.join("moment.symmat"), pe.moment.to_symmat())?;
            }
            write(out.join("solve.json"), serde_json::to_string_pretty(&report)?)?;
            match report.verdict {
                Verdict::Feasible => Ok(()),
                v => Err(Failure::Unsolved(format!("verdict {v:?} after {} iterations", report.iterations))),
            }
        }
        Command::Round { input, matrix } => {
            let out = out_dir(&cfg)?.to_path_buf();
            let moment = read_matrix(&input.clone().unwrap_or_else(|| out.join("moment.symmat")))?;
            let y = corrupted(&cfg, seed, matrix.as_ref())?;
            let stats = load_or_calibrate(&cfg)?;
            let sys = build_constraint_system(&y, cfg.corruption.epsilon, &stats, &cfg.lsh)?;
            let residuals = audit(&sys, &moment, cfg.solver.tolerance)?;
            if !residuals.pass {
                info!("moment matrix fails the residual audit; rounding anyway");
            }
            let x = sample_symmetric(&cfg.ensemble, seed)?;
            let reference = amp_run(&x, &cfg.family()?, cfg.t, Some(stats.normalization))?.v_amp();
            let pe = PseudoExpectation { basis: sys.basis, moment, residuals };
            let rec = recover(&pe, Some(&reference), 0)?;
            write(out.join("recovery.json"), serde_json::to_string_pretty(&rec)?)
        }
        Command::Experiment { workers } => {
            let records = run_experiment(&cfg, *workers)?;
            for r in &records {
                println!(
                    "seed {} {} corr_lsh={} corr_raw={}",
                    r.seed,
                    r.status,
                    r.corr_lsh.map_or("-".into(), |c| format!("{c:.4}")),
                    r.corr_raw.map_or("-".into(), |c| format!("{c:.4}")),
                );
            }
            Ok(())
        }
        Command::Audit => {
            let mut failed = Vec::new();
            for &s in &cfg.seeds {
                let report = audit_seed(&cfg, &cfg.output_dir, s, 1e-9)?;
                println!("seed {s}: {}", if report.pass { "ok".to_string() } else { report.mismatches.join(", ") });
                if !report.pass {
                    failed.push(s);
                }
            }
            if failed.is_empty() {
                Ok(())
            } else {
                Err(Failure::Unsolved(format!("audit mismatches on seeds {failed:?}")))
            }
        }
    }
}

fn exit_code(f: &Failure) -> u8 {
    match f {
        Failure::Usage(_) => EXIT_USAGE,
        Failure::Unsolved(_) => EXIT_UNSOLVED,
        Failure::Lib(Error::Resource(_)) => EXIT_RESOURCE,
        Failure::Lib(_) => EXIT_USAGE,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let code = exit_code(&f);
            match f {
                Failure::Usage(m) | Failure::Unsolved(m) => eprintln!("error: {m}"),
                Failure::Lib(e) => eprintln!("error: {e}"),
            }
            ExitCode::from(code)
        }
    }
}
