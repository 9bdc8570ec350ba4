//! End-to-end experiment runs with per-seed records and an audit.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use log::{info, warn};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{validate_config, ExperimentConfig};
use crate::amp::{amp_run, objective, round_to_feasible, AmpTrace, DenoiserFamily};
use crate::ensembles::{corrupt_minor, sample_symmetric, CorruptionRecord};
use crate::error::{Error, Result};
use crate::forest::{calibrate_statistics, reasonableness_report, ReasonablenessReport, StatisticsTable};
use crate::lsth::{
    audit, build_constraint_system, correlation, integral_point, recover, solve_feasibility, PseudoExpectation,
    SolveReport, Verdict,
};
use crate::matrix::SymmetricMatrix;

pub const SCHEMA_VERSION: u32 = 1;

/// CSV column order. Timings come last and are the only non-deterministic
/// columns.
pub const CSV_COLUMNS: &[&str] = &[
    "seed",
    "status",
    "failed_stage",
    "n",
    "t",
    "epsilon",
    "corrupted_rows",
    "amp_objective_x",
    "amp_objective_y",
    "corr_raw",
    "corr_lsh",
    "verdict",
    "solver_iterations",
    "max_violation",
    "lmi_violation",
    "witness_violation",
    "reasonable",
    "n_constraints",
    "n_dropped",
    "ms_sample",
    "ms_amp",
    "ms_calibrate",
    "ms_build",
    "ms_solve",
    "ms_round",
];

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReasonableFlags {
    pub concentration: bool,
    pub norm: bool,
    pub infinity: bool,
    pub operator_norm: bool,
    pub pass: bool,
}

impl From<&ReasonablenessReport> for ReasonableFlags {
    fn from(r: &ReasonablenessReport) -> Self {
        Self { concentration: r.concentration, norm: r.norm, infinity: r.infinity, operator_norm: r.operator_norm, pass: r.pass }
    }
}

/// Per-seed outcome. Deterministic given `(config, seed)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub schema_version: u32,
    pub seed: u64,
    pub status: String,
    pub failed_stage: Option<String>,
    pub error: Option<String>,
    pub n: usize,
    pub t: usize,
    pub epsilon: f64,
    pub corrupted_rows: usize,
    /// `v^⊤Xv` for the AMP output on `X` rounded into the feasible set.
    pub amp_objective_x: Option<f64>,
    /// The same for AMP run on the corrupted `Y`, evaluated on `Y`.
    pub amp_objective_y: Option<f64>,
    /// `corr(AMP(Y), v_AMP(X))`.
    pub corr_raw: Option<f64>,
    /// `corr(v_LStH(Y), v_AMP(X))`.
    pub corr_lsh: Option<f64>,
    pub verdict: Option<Verdict>,
    pub solver_iterations: Option<usize>,
    pub max_violation: Option<f64>,
    pub lmi_violation: Option<f64>,
    pub min_eigenvalue: Option<f64>,
    pub witness_violation: Option<f64>,
    pub reasonable: Option<ReasonableFlags>,
    pub n_constraints: Option<usize>,
    pub n_dropped: Option<usize>,
    pub top_eigenvalue: Option<f64>,
    pub trace: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub sample: f64,
    pub amp: f64,
    pub calibrate: f64,
    pub build: f64,
    pub solve: f64,
    pub round: f64,
}

fn ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

fn fmt_opt<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map_or(String::new(), |v| v.to_string())
}

impl ResultRecord {
    pub fn csv_row(&self, timings: &Timings) -> String {
        let verdict = self.verdict.map(|v| serde_json::to_value(v).expect("verdict").as_str().unwrap_or("").to_string());
        [
            self.seed.to_string(),
            self.status.clone(),
            self.failed_stage.clone().unwrap_or_default(),
            self.n.to_string(),
            self.t.to_string(),
            self.epsilon.to_string(),
            self.corrupted_rows.to_string(),
            fmt_opt(&self.amp_objective_x),
            fmt_opt(&self.amp_objective_y),
            fmt_opt(&self.corr_raw),
            fmt_opt(&self.corr_lsh),
            verdict.unwrap_or_default(),
            fmt_opt(&self.solver_iterations),
            fmt_opt(&self.max_violation),
            fmt_opt(&self.lmi_violation),
            fmt_opt(&self.witness_violation),
            fmt_opt(&self.reasonable.as_ref().map(|r| r.pass)),
            fmt_opt(&self.n_constraints),
            fmt_opt(&self.n_dropped),
            format!("{:.3}", timings.sample),
            format!("{:.3}", timings.amp),
            format!("{:.3}", timings.calibrate),
            format!("{:.3}", timings.build),
            format!("{:.3}", timings.solve),
            format!("{:.3}", timings.round),
        ]
        .join(",")
    }
}

/// Key of a cached statistics table.
#[derive(Serialize)]
struct CacheKey<'a> {
    ensemble: &'a crate::ensembles::EnsembleSpec,
    denoisers: &'a DenoiserFamily,
    t: usize,
    degree: usize,
    mc_samples: usize,
    seed: u64,
    eta: f64,
    options: crate::forest::CalibrationOptions,
}

fn cache_path(dir: &Path, key: &str) -> PathBuf {
    let digest = Sha256::digest(key.as_bytes());
    let hex: String = digest.iter().take(12).map(|b| format!("{b:02x}")).collect();
    dir.join(format!("stats_{hex}.json"))
}

#[derive(Serialize, Deserialize)]
struct CachedTable {
    key: String,
    table: StatisticsTable,
}

/// Calibrate, or load a table cached under the same key.
pub fn load_or_calibrate(cfg: &ExperimentConfig) -> Result<StatisticsTable> {
    let fam = cfg.family()?;
    let cal = &cfg.calibration;
    let key = serde_json::to_string(&CacheKey {
        ensemble: &cfg.ensemble,
        denoisers: &fam,
        t: cfg.t,
        degree: cal.degree,
        mc_samples: cal.mc_samples,
        seed: cal.seed,
        eta: cfg.eta,
        options: cal.options(),
    })?;
    let path = cal.cache_dir.as_ref().map(|d| cache_path(d, &key));
    if let Some(p) = &path {
        if let Ok(text) = fs::read_to_string(p) {
            match serde_json::from_str::<CachedTable>(&text) {
                Ok(c) if c.key == key => {
                    info!("statistics table loaded from {}", p.display());
                    return Ok(c.table);
                }
                _ => warn!("ignoring stale statistics cache {}", p.display()),
            }
        }
    }
    let table = calibrate_statistics(&fam, cfg.t, cal.degree, &cfg.problem, &cfg.ensemble, cal.mc_samples, cal.seed, cfg.eta, &cal.options())?;
    if let Some(p) = &path {
        if let Some(dir) = p.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(p, serde_json::to_string(&CachedTable { key, table: table.clone() })?)?;
    }
    Ok(table)
}

/// Everything computed for one seed, kept for artifacts and auditing.
pub struct SeedRun {
    pub record: ResultRecord,
    pub timings: Timings,
    pub x: Option<SymmetricMatrix>,
    pub corruption: Option<CorruptionRecord>,
    pub trace: Option<AmpTrace>,
    pub solve: Option<SolveReport>,
}

fn fail(mut record: ResultRecord, stage: &str, e: &Error) -> ResultRecord {
    warn!("seed {}: {stage} failed: {e}", record.seed);
    record.status = "failed".into();
    record.failed_stage = Some(stage.into());
    record.error = Some(e.to_string());
    record
}

fn rounded_objective(x: &SymmetricMatrix, it: &[f64], cfg: &ExperimentConfig) -> Result<f64> {
    objective(x, &round_to_feasible(it, &cfg.problem)?)
}

/// The full pipeline for one seed against a calibrated table.
pub fn run_seed(cfg: &ExperimentConfig, stats: &StatisticsTable, seed: u64) -> SeedRun {
    let mut record = ResultRecord {
        schema_version: SCHEMA_VERSION,
        seed,
        status: "ok".into(),
        n: cfg.ensemble.n,
        t: cfg.t,
        epsilon: cfg.corruption.epsilon,
        ..Default::default()
    };
    let mut timings = Timings::default();
    let mut out = SeedRun { record: record.clone(), timings: Timings::default(), x: None, corruption: None, trace: None, solve: None };
    macro_rules! stage {
        ($name:expr, $e:expr) => {
            match $e {
                Ok(v) => v,
                Err(e) => {
                    out.record = fail(record, $name, &e);
                    out.timings = timings;
                    return out;
                }
            }
        };
    }
    let fam = stage!("config", cfg.family());

    let t0 = Instant::now();
    let x = stage!("sample", sample_symmetric(&cfg.ensemble, seed));
    let corruption = stage!("corrupt", corrupt_minor(&x, &cfg.corruption.spec(seed)));
    timings.sample = ms(t0);
    record.corrupted_rows = corruption.support.len();
    let y = &corruption.corrupted;

    let t0 = Instant::now();
    let trace = stage!("amp", amp_run(&x, &fam, cfg.t, Some(stats.normalization)));
    let v_amp = trace.v_amp();
    record.amp_objective_x = Some(stage!("amp", rounded_objective(&x, trace.last(), cfg)));
    let raw = stage!("amp", amp_run(y, &fam, cfg.t, Some(stats.normalization)));
    record.amp_objective_y = Some(stage!("amp", rounded_objective(y, raw.last(), cfg)));
    record.corr_raw = correlation(&raw.v_amp(), &v_amp).ok();
    timings.amp = ms(t0);

    let report = stage!("reasonableness", reasonableness_report(&x, &v_amp, stats));
    record.reasonable = Some((&report).into());

    let t0 = Instant::now();
    let sys = stage!("build", build_constraint_system(y, cfg.corruption.epsilon, stats, &cfg.lsh));
    record.n_constraints = Some(sys.constraints.len());
    record.n_dropped = Some(sys.dropped.len());
    let mut clean = vec![1.0; x.n()];
    for &i in &corruption.support {
        clean[i] = 0.0;
    }
    let robust = cfg.lsh.robust;
    let witness = stage!("build", integral_point(&sys.basis, &v_amp, robust.then_some(&clean[..]), robust.then_some(&x)));
    let point = sys.check_point(&witness);
    record.witness_violation = Some(point.max_violation.max(point.lmi_violation));
    let warm = if robust {
        Some(stage!("build", integral_point(&sys.basis, &vec![0.0; x.n()], Some(&vec![1.0; x.n()]), Some(y))))
    } else {
        None
    };
    timings.build = ms(t0);

    let t0 = Instant::now();
    let mut solver = cfg.solver.clone();
    solver.seed = seed;
    let solve = stage!("solve", solve_feasibility(&sys, &solver, warm.as_deref()));
    timings.solve = ms(t0);
    record.verdict = Some(solve.verdict);
    record.solver_iterations = Some(solve.iterations);
    if let Some(pe) = &solve.pe {
        record.max_violation = Some(pe.residuals.max_violation);
        record.lmi_violation = Some(pe.residuals.lmi_violation);
        record.min_eigenvalue = pe.residuals.min_eigenvalue;
    }

    let t0 = Instant::now();
    if let (Verdict::Feasible, Some(pe)) = (solve.verdict, &solve.pe) {
        let rec = stage!("round", recover(pe, Some(&v_amp), solve.iterations));
        record.corr_lsh = rec.correlation;
        record.top_eigenvalue = Some(rec.top_eigenvalue);
        record.trace = Some(rec.trace);
    }
    timings.round = ms(t0);
    if solve.verdict != Verdict::Feasible {
        record.status = "failed".into();
        record.failed_stage = Some("solve".into());
        record.error = Some(format!("solver verdict {:?} after {} iterations", solve.verdict, solve.iterations));
    }

    out.record = record;
    out.timings = timings;
    out.x = Some(x);
    out.corruption = Some(corruption);
    out.trace = Some(trace);
    out.solve = Some(solve);
    out
}

fn seed_dir(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("seed_{seed}"))
}

/// Write the record, timings and intermediate artifacts of one seed.
pub fn write_seed(out: &Path, run: &SeedRun) -> Result<()> {
    let seed = run.record.seed;
    fs::write(out.join(format!("seed_{seed}.json")), serde_json::to_string_pretty(&run.record)?)?;
    fs::write(out.join(format!("seed_{seed}.timings.json")), serde_json::to_string_pretty(&run.timings)?)?;
    let dir = seed_dir(out, seed);
    fs::create_dir_all(&dir)?;
    if let Some(x) = &run.x {
        fs::write(dir.join("X.symmat"), x.to_symmat())?;
    }
    if let Some(c) = &run.corruption {
        fs::write(dir.join("Y.symmat"), c.corrupted.to_symmat())?;
        fs::write(dir.join("support.json"), serde_json::to_string(&c.support)?)?;
    }
    if let Some(t) = &run.trace {
        fs::write(dir.join("trace.json"), serde_json::to_string(t)?)?;
    }
    if let Some(pe) = run.solve.as_ref().and_then(|s| s.pe.as_ref()) {
        fs::write(dir.join("moment.symmat"), pe.moment.to_symmat())?;
        fs::write(dir.join("residuals.json"), serde_json::to_string_pretty(&pe.residuals)?)?;
    }
    Ok(())
}

/// Run every seed of `cfg`, writing per-seed files and `results.csv` under
/// `cfg.output_dir`. Seeds run on up to `workers` threads; records come
/// back in seed order.
pub fn run_experiment(cfg: &ExperimentConfig, workers: usize) -> Result<Vec<ResultRecord>> {
    let violations = validate_config(cfg);
    if let Some(v) = violations.iter().find(|v| v.resource) {
        return Err(Error::Resource(v.to_string()));
    }
    if !violations.is_empty() {
        let list: Vec<String> = violations.iter().map(ToString::to_string).collect();
        return Err(Error::Config(list.join("; ")));
    }
    let out = &cfg.output_dir;
    fs::create_dir_all(out)?;
    fs::write(out.join("config.toml"), cfg.to_toml()?)?;
    let stats = load_or_calibrate(cfg)?;
    fs::write(out.join("stats.json"), serde_json::to_string(&stats)?)?;

    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<(ResultRecord, Timings)>>> = Mutex::new(vec![None; cfg.seeds.len()]);
    let errors: Mutex<Vec<Error>> = Mutex::new(Vec::new());
    std::thread::scope(|scope| {
        for _ in 0..workers.clamp(1, cfg.seeds.len()) {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::SeqCst);
                let Some(&seed) = cfg.seeds.get(k) else { break };
                let run = run_seed(cfg, &stats, seed);
                if let Err(e) = write_seed(out, &run) {
                    errors.lock().expect("lock").push(e);
                }
                info!("seed {seed}: {}", run.record.status);
                slots.lock().expect("lock")[k] = Some((run.record, run.timings));
            });
        }
    });
    if let Some(e) = errors.into_inner().expect("lock").into_iter().next() {
        return Err(e);
    }
    let done: Vec<(ResultRecord, Timings)> = slots.into_inner().expect("lock").into_iter().map(|s| s.expect("every seed ran")).collect();
    let csv = out.join("results.csv");
    let fresh = !csv.exists();
    let mut file = OpenOptions::new().create(true).append(true).open(&csv)?;
    if fresh {
        writeln!(file, "{}", CSV_COLUMNS.join(","))?;
    }
    for (r, t) in &done {
        writeln!(file, "{}", r.csv_row(t))?;
    }
    Ok(done.into_iter().map(|(r, _)| r).collect())
}

/// Outcome of re-deriving a stored record from its artifacts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub seed: u64,
    /// `(field, stored, recomputed)` for every compared field.
    pub compared: Vec<(String, Option<f64>, Option<f64>)>,
    pub mismatches: Vec<String>,
    pub residuals_pass: Option<bool>,
    pub pass: bool,
}

fn close(a: Option<f64>, b: Option<f64>, tol: f64) -> bool {
    match (a, b) {
        (Some(a), Some(b)) => (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs())),
        (None, None) => true,
        _ => false,
    }
}

/// Recompute a stored record from the dumped matrices, trace, statistics
/// table and moment matrix, and compare.
pub fn audit_seed(cfg: &ExperimentConfig, out: &Path, seed: u64, tol: f64) -> Result<AuditReport> {
    let record: ResultRecord = serde_json::from_str(&fs::read_to_string(out.join(format!("seed_{seed}.json")))?)?;
    let stats: StatisticsTable = serde_json::from_str(&fs::read_to_string(out.join("stats.json"))?)?;
    let dir = seed_dir(out, seed);
    let x = SymmetricMatrix::from_symmat(&fs::read_to_string(dir.join("X.symmat"))?)?;
    let y = SymmetricMatrix::from_symmat(&fs::read_to_string(dir.join("Y.symmat"))?)?;
    let stored_trace: AmpTrace = serde_json::from_str(&fs::read_to_string(dir.join("trace.json"))?)?;
    let fam = cfg.family()?;
    let trace = amp_run(&x, &fam, cfg.t, Some(stats.normalization))?;
    let mut mismatches = Vec::new();
    if trace != stored_trace {
        mismatches.push("trace".to_string());
    }
    let v_amp = trace.v_amp();
    let raw = amp_run(&y, &fam, cfg.t, Some(stats.normalization))?;
    let mut compared = vec![
        ("amp_objective_x".to_string(), record.amp_objective_x, rounded_objective(&x, trace.last(), cfg).ok()),
        ("amp_objective_y".to_string(), record.amp_objective_y, rounded_objective(&y, raw.last(), cfg).ok()),
        ("corr_raw".to_string(), record.corr_raw, correlation(&raw.v_amp(), &v_amp).ok()),
    ];
    let mut residuals_pass = None;
    let moment_path = dir.join("moment.symmat");
    if moment_path.exists() {
        let moment = SymmetricMatrix::from_symmat(&fs::read_to_string(&moment_path)?)?;
        let sys = build_constraint_system(&y, cfg.corruption.epsilon, &stats, &cfg.lsh)?;
        let residuals = audit(&sys, &moment, cfg.solver.tolerance)?;
        residuals_pass = Some(residuals.pass);
        compared.push(("max_violation".into(), record.max_violation, Some(residuals.max_violation)));
        if record.verdict == Some(Verdict::Feasible) {
            let pe = PseudoExpectation { basis: sys.basis, moment, residuals };
            let rec = recover(&pe, Some(&v_amp), 0)?;
            compared.push(("corr_lsh".into(), record.corr_lsh, rec.correlation));
            compared.push(("top_eigenvalue".into(), record.top_eigenvalue, Some(rec.top_eigenvalue)));
        }
    }
    for (name, a, b) in &compared {
        // violations are re-derived from a moment matrix printed to 17 digits
        let t = if name == "max_violation" { tol.max(1e-9) } else { tol };
        if !close(*a, *b, t) {
            mismatches.push(name.clone());
        }
    }
    if record.verdict == Some(Verdict::Feasible) && residuals_pass == Some(false) {
        mismatches.push("residual audit".into());
    }
    Ok(AuditReport { seed, pass: mismatches.is_empty(), compared, mismatches, residuals_pass })
}
