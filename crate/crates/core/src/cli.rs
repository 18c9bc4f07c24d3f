//! Batch front end: JSON configs in, CSV and JSON reports out.
//!
//! Every run writes its primary output plus `<stem>.summary.json` and
//! `<stem>.manifest.json` next to it. Nothing is written unless the whole run
//! succeeds.

use std::fmt::Debug;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::cantor::{CantorMeasure, CantorSpec};
use crate::classify::geometric_indices;
use crate::density::{perturb, DensitySpec, PerturbConfig, StepDensity};
use crate::energy::{energy_trajectory, Kernel, Support};
use crate::kernels::{l11_statistic, KernelSpec};
use crate::montecarlo::{estimate_noncover, phase_scan, run_trial, Target, TrialConfig};
use crate::seq::{LengthSequence, Rule};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug)]
pub enum CliError {
    /// Malformed or invalid configuration. Exit code 2.
    Validation(String),
    /// A module returned an error. Exit code 3.
    Module { module: &'static str, detail: String },
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Module { .. } => 3,
            CliError::Io(_) => 1,
        }
    }

    fn module(module: &'static str, e: impl Debug) -> Self {
        CliError::Module { module, detail: format!("{e:?}") }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid config: {m}"),
            CliError::Module { module, detail } => write!(f, "{module} error: {detail}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

fn invalid(e: impl std::fmt::Display) -> CliError {
    CliError::Validation(e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CommandName {
    SeqReport,
    Simulate,
    Perturb,
    CantorBuild,
    Energy,
    KernelScan,
    PhaseScan,
}

/// One experiment: the command, its parameter object, the output path and a seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: CommandName,
    pub params: Value,
    pub output: PathBuf,
    #[serde(default)]
    pub seed: u64,
    /// Overrides the trial count of simulate, perturb and phase-scan.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
}

fn default_a() -> f64 {
    1.0
}

fn default_per_decade() -> u32 {
    20
}

fn default_one() -> u64 {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeqReportParams {
    pub sequence: Rule,
    pub horizon: u64,
    #[serde(default = "default_a")]
    pub a: f64,
    #[serde(default = "default_per_decade")]
    pub per_decade: u32,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateParams {
    pub density: DensitySpec,
    pub sequence: Rule,
    pub n: u64,
    pub target: Target,
    #[serde(default = "default_one")]
    pub trials: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbParams {
    pub density: DensitySpec,
    pub sequence: Rule,
    pub config: PerturbConfig,
    /// Monte Carlo trials for the marked points at N = n2 of the last block.
    #[serde(default)]
    pub trials: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CantorBuildParams {
    pub spec: CantorSpec,
    pub box_levels: (u32, u32),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SupportParams {
    Cantor(CantorSpec),
    Uniform,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelParams {
    PhiA { sequence: Rule, a: f64 },
    Riesz { s: f64 },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyParams {
    pub support: SupportParams,
    pub kernel: KernelParams,
    pub depths: Vec<u32>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelScanParams {
    pub sequence: Rule,
    pub density: DensitySpec,
    /// Radii r = ℓ_n for these indices.
    pub indices: Vec<u64>,
    pub points: Vec<f64>,
    #[serde(default)]
    pub l11_horizon: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyParams {
    pub c_min: f64,
    pub c_max: f64,
    pub step: f64,
    /// First index of ℓ_n = c/n, shared by every c.
    pub start: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseScanParams {
    pub density: DensitySpec,
    pub family: FamilyParams,
    pub n: u64,
    pub target: Target,
    pub trials: u64,
}

fn parse<T: DeserializeOwned>(v: &Value) -> Result<T, CliError> {
    serde_json::from_value(v.clone()).map_err(invalid)
}

fn sequence(rule: &Rule) -> Result<LengthSequence, CliError> {
    LengthSequence::new(rule.clone()).map_err(invalid)
}

fn density(spec: &DensitySpec) -> Result<StepDensity, CliError> {
    StepDensity::new(spec.clone()).map_err(invalid)
}

/// Files produced by a run, in memory until every step has succeeded.
struct Report {
    primary: Vec<u8>,
    summary: Value,
}

fn csv_bytes<R: Serialize>(rows: &[R]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Io(e.to_string()))?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

fn json_bytes(v: &impl Serialize) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(v).expect("serializable");
    out.push(b'\n');
    out
}

#[derive(Serialize)]
struct SeqRow {
    n: u64,
    ell: f64,
    #[serde(rename = "L")]
    l: f64,
    l_over_ln_n: f64,
    shepp_term: f64,
}

fn seq_report(p: SeqReportParams) -> Result<Report, CliError> {
    let seq = sequence(&p.sequence)?;
    let lo = seq.first().max(2);
    if p.horizon < lo.max(3) {
        return Err(invalid(format!("horizon {} is below the first usable index", p.horizon)));
    }
    if !(p.a > 0.0) {
        return Err(invalid(format!("a = {}", p.a)));
    }
    let hi = seq.last().map_or(p.horizon, |l| l.min(p.horizon));
    let rows: Vec<SeqRow> = geometric_indices(lo, hi, p.per_decade)
        .into_iter()
        .map(|n| {
            let l = seq.partial_sum(n);
            let ln = (n as f64).ln();
            SeqRow { n, ell: seq.term(n).unwrap(), l, l_over_ln_n: l / ln, shepp_term: (p.a * l - 2.0 * ln).exp() }
        })
        .collect();
    let hawkes = seq.hawkes_d(hi.max(3)).map_err(|e| CliError::module("seq", e))?;
    let series = if hi / 100 >= lo { Some(seq.shepp_series(p.a, hi).map_err(|e| CliError::module("seq", e))?) } else { None };
    let summary = json!({
        "first_index": seq.first(),
        "hawkes_d": hawkes.running_max,
        "shepp_log_partial_sum": series.as_ref().map(|s| s.log_partial_sum),
        "shepp_slope": series.as_ref().map(|s| s.slope),
        "classification": series.as_ref().map(|s| s.classification.as_str()),
    });
    Ok(Report { primary: csv_bytes(&rows)?, summary })
}

#[derive(Serialize)]
struct SimRow {
    seed: u64,
    #[serde(rename = "N")]
    n: u64,
    covered: bool,
    #[serde(rename = "firstCoverTime")]
    first_cover_time: Option<u64>,
    #[serde(rename = "uncoveredLength")]
    uncovered_length: f64,
    #[serde(rename = "uncoveredCount")]
    uncovered_count: usize,
}

fn simulate(p: SimulateParams, seed: u64, trials: Option<u64>) -> Result<Report, CliError> {
    let trials = trials.unwrap_or(p.trials);
    if trials == 0 {
        return Err(invalid("trials must be ≥ 1"));
    }
    let template = TrialConfig { density: density(&p.density)?, seq: sequence(&p.sequence)?, n: p.n, seed, target: p.target };
    template.validate().map_err(invalid)?;
    let mut rows = Vec::with_capacity(trials as usize);
    for i in 0..trials {
        let s = run_trial(&TrialConfig { seed: seed.wrapping_add(i), ..template.clone() }).map_err(|e| CliError::module("montecarlo", e))?;
        rows.push(SimRow {
            seed: s.seed,
            n: s.n,
            covered: s.covered,
            first_cover_time: s.first_cover_time,
            uncovered_length: s.uncovered_length,
            uncovered_count: s.uncovered_count,
        });
    }
    let misses = rows.iter().filter(|r| !r.covered).count() as u64;
    let b = crate::montecarlo::Binomial::new(misses, trials);
    let summary = json!({ "trials": trials, "noncover": b });
    Ok(Report { primary: csv_bytes(&rows)?, summary })
}

fn perturb_cmd(p: PerturbParams, seed: u64, trials: Option<u64>) -> Result<Report, CliError> {
    let f = density(&p.density)?;
    let seq = sequence(&p.sequence)?;
    let cert = perturb(&f, &seq, &p.config).map_err(|e| CliError::module("density", e))?;
    let violations = cert.validate(&f, &seq);
    let trials = trials.unwrap_or(p.trials);
    let last = cert.blocks.blocks.last().copied();
    let mut summary = json!({
        "valid": violations.is_empty(),
        "violations": violations,
        "changed_mass": cert.changed_mass,
        "md_warning": cert.md_warning,
    });
    if let (Some(block), true) = (last, trials > 0) {
        let cover = cert.cover(block.k);
        let bound = crate::density::noncover_bound(&cert.f0, &seq, &cover, block.n2);
        let cfg = TrialConfig { density: cert.f0.clone(), seq: seq.clone(), n: block.n2, seed, target: Target::Points(cert.marks.clone()) };
        let b = estimate_noncover(&cfg, trials).map_err(|e| CliError::module("montecarlo", e))?;
        summary["noncover_bound"] = json!(bound);
        summary["noncover"] = json!(b);
    }
    Ok(Report { primary: json_bytes(&cert), summary })
}

#[derive(Serialize)]
struct BoxRow {
    k: u32,
    delta: f64,
    estimate: f64,
}

fn cantor_build(p: CantorBuildParams) -> Result<Report, CliError> {
    let m = CantorMeasure::new(p.spec).map_err(invalid)?;
    let (lo, hi) = p.box_levels;
    let bd = m.box_dimension(lo..=hi).map_err(|e| CliError::module("cantor", e))?;
    let rows: Vec<BoxRow> = bd.trajectory.iter().map(|&(k, estimate)| BoxRow { k, delta: m.deltas()[k as usize], estimate }).collect();
    let windows = m.scale_windows().ok();
    let summary = json!({
        "depth": m.depth(),
        "box_lower": bd.lower,
        "box_upper": bd.upper,
        "scale_windows": windows,
    });
    Ok(Report { primary: csv_bytes(&rows)?, summary })
}

fn energy_cmd(p: EnergyParams) -> Result<Report, CliError> {
    let kernel = match p.kernel {
        KernelParams::PhiA { sequence: rule, a } => Kernel::PhiA { seq: sequence(&rule)?, a },
        KernelParams::Riesz { s } => Kernel::Riesz { s },
    };
    let measure;
    let support = match p.support {
        SupportParams::Cantor(spec) => {
            measure = CantorMeasure::new(spec).map_err(invalid)?;
            Support::Cantor(&measure)
        }
        SupportParams::Uniform => Support::Uniform,
    };
    let tr = energy_trajectory(support, &kernel, &p.depths).map_err(|e| CliError::module("energy", e))?;
    let summary = json!({
        "slope_exclude": tr.slope_exclude,
        "slope_lump": tr.slope_lump,
        "exclude": tr.exclude.as_str(),
        "lump": tr.lump.as_str(),
        "classification": tr.classification().as_str(),
    });
    Ok(Report { primary: csv_bytes(&tr.rows)?, summary })
}

#[derive(Serialize)]
struct KernelRow {
    n: u64,
    r: f64,
    s: f64,
    convolve: f64,
    density: f64,
    error: f64,
}

fn kernel_scan(p: KernelScanParams) -> Result<Report, CliError> {
    let seq = sequence(&p.sequence)?;
    let f = density(&p.density)?;
    if p.points.iter().any(|s| !(0.0..1.0).contains(s)) {
        return Err(invalid("points must lie in [0, 1)"));
    }
    let mut rows = Vec::new();
    let mut max_error = Vec::new();
    for &n in &p.indices {
        let r = seq.term(n).ok_or_else(|| invalid(format!("index {n} is not a term")))?;
        let k = KernelSpec::psi(&seq, r).map_err(|e| CliError::module("kernels", e))?;
        let mut worst = 0.0f64;
        for &s in &p.points {
            let c = k.convolve(&f, s);
            let v = f.value_at(s);
            worst = worst.max((c - v).abs());
            rows.push(KernelRow { n, r, s, convolve: c, density: v, error: (c - v).abs() });
        }
        max_error.push(json!({ "n": n, "r": r, "max_error": worst }));
    }
    let l11 = match p.l11_horizon {
        Some(h) => Some(l11_statistic(&seq, h).map_err(|e| CliError::module("kernels", e))?.tail_max),
        None => None,
    };
    let summary = json!({ "max_error": max_error, "l11_tail_max": l11 });
    Ok(Report { primary: csv_bytes(&rows)?, summary })
}

fn phase_scan_cmd(p: PhaseScanParams, seed: u64, trials: Option<u64>) -> Result<Report, CliError> {
    let f = density(&p.density)?;
    let fam = p.family;
    if !(fam.step > 0.0 && fam.c_min > 0.0 && fam.c_max >= fam.c_min) {
        return Err(invalid("family needs 0 < c_min ≤ c_max and step > 0"));
    }
    let count = ((fam.c_max - fam.c_min) / fam.step + 1e-9).floor() as usize + 1;
    let cs: Vec<f64> = (0..count).map(|i| fam.c_min + i as f64 * fam.step).collect();
    // Every member must be a valid sequence from the shared start.
    for &c in &cs {
        LengthSequence::harmonic_from(c, fam.start).map_err(invalid)?;
    }
    let trials = trials.unwrap_or(p.trials);
    let scan = phase_scan(&f, |c| LengthSequence::harmonic_from(c, fam.start), &cs, p.n, trials, &p.target, seed)
        .map_err(|e| match e {
            crate::montecarlo::MonteCarloError::InvalidConfig(m) => invalid(m),
            e => CliError::module("montecarlo", e),
        })?;
    let summary = json!({ "crossing": scan.crossing, "trials": trials, "n": p.n });
    Ok(Report { primary: csv_bytes(&scan.rows)?, summary })
}

fn execute(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let v = &cfg.params;
    match cfg.command {
        CommandName::SeqReport => seq_report(parse(v)?),
        CommandName::Simulate => simulate(parse(v)?, cfg.seed, cfg.trials),
        CommandName::Perturb => perturb_cmd(parse(v)?, cfg.seed, cfg.trials),
        CommandName::CantorBuild => cantor_build(parse(v)?),
        CommandName::Energy => energy_cmd(parse(v)?),
        CommandName::KernelScan => kernel_scan(parse(v)?),
        CommandName::PhaseScan => phase_scan_cmd(parse(v)?, cfg.seed, cfg.trials),
    }
}

fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "report".into());
    out.with_file_name(format!("{stem}.{suffix}"))
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub config: ExperimentConfig,
    pub config_sha256: String,
    pub seed: u64,
    pub threads: usize,
    pub wall_time_s: f64,
    /// (path, sha256) of every file written.
    pub outputs: Vec<(PathBuf, String)>,
}

/// Run an experiment and write its output, summary and manifest.
pub fn run(cfg: &ExperimentConfig) -> Result<Manifest, CliError> {
    let start = Instant::now();
    if cfg.output.file_name().is_none() {
        return Err(invalid("output must name a file"));
    }
    let report = execute(cfg)?;
    let files = [
        (cfg.output.clone(), report.primary),
        (sibling(&cfg.output, "summary.json"), json_bytes(&report.summary)),
    ];
    if let Some(dir) = cfg.output.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(e.to_string()))?;
    }
    let mut outputs = Vec::new();
    for (path, bytes) in &files {
        fs::write(path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        outputs.push((path.clone(), sha256_hex(bytes)));
    }
    let manifest = Manifest {
        version: VERSION.into(),
        config: cfg.clone(),
        config_sha256: sha256_hex(&serde_json::to_vec(cfg).expect("serializable")),
        seed: cfg.seed,
        threads: rayon::current_num_threads(),
        wall_time_s: start.elapsed().as_secs_f64(),
        outputs,
    };
    let path = sibling(&cfg.output, "manifest.json");
    fs::write(&path, json_bytes(&manifest)).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    log::info!("{:?} finished in {:.2}s", cfg.command, manifest.wall_time_s);
    Ok(manifest)
}

#[derive(Debug, Parser)]
#[command(name = "dvoretzky", version, about = "Random arc coverings of the circle")]
pub struct Cli {
    /// Worker threads; affects speed only.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON parameter object for the command.
    #[arg(long)]
    pub config: PathBuf,
    /// Primary output file.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub trials: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Partial sums, Hawkes ratio and Shepp series of a sequence.
    SeqReport(CommonArgs),
    /// Simulate covering trials.
    Simulate(CommonArgs),
    /// Build a perturbation certificate.
    Perturb(CommonArgs),
    /// Box-dimension trajectory and scale windows of a Cantor set.
    CantorBuild(CommonArgs),
    /// Discretized energy trajectory.
    Energy(CommonArgs),
    /// Convolution of a density with the approximate identity.
    KernelScan(CommonArgs),
    /// Covered fraction along ℓ_n = c/n.
    PhaseScan(CommonArgs),
    /// Run a full experiment config.
    Run { experiment: PathBuf },
}

fn read_json(path: &Path) -> Result<Value, CliError> {
    let text = fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

impl Cli {
    pub fn experiment(&self) -> Result<ExperimentConfig, CliError> {
        let (command, a) = match &self.command {
            CliCommand::Run { experiment } => return serde_json::from_value(read_json(experiment)?).map_err(invalid),
            CliCommand::SeqReport(a) => (CommandName::SeqReport, a),
            CliCommand::Simulate(a) => (CommandName::Simulate, a),
            CliCommand::Perturb(a) => (CommandName::Perturb, a),
            CliCommand::CantorBuild(a) => (CommandName::CantorBuild, a),
            CliCommand::Energy(a) => (CommandName::Energy, a),
            CliCommand::KernelScan(a) => (CommandName::KernelScan, a),
            CliCommand::PhaseScan(a) => (CommandName::PhaseScan, a),
        };
        Ok(ExperimentConfig { command, params: read_json(&a.config)?, output: a.out.clone(), seed: a.seed, trials: a.trials })
    }
}

/// Entry point of the binary. Returns the process exit code.
pub fn main_with_args(args: impl IntoIterator<Item = std::ffi::OsString>) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            log::warn!("thread pool already initialized: {e}");
        }
    }
    match cli.experiment().and_then(|cfg| run(&cfg)) {
        Ok(m) => {
            for (p, _) in &m.outputs {
                println!("{}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
