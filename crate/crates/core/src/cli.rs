//! File-driven batch front end. A run reads a TOML config, loads the measure
//! file it names, dispatches to one command and writes its artifacts plus a
//! `manifest.json` into the output directory.
//!
//! ```toml
//! command = "zeros"
//! measure = "golden.toml"   # relative to this file
//! out = "runs/golden"
//! seed = 7
//!
//! [zeros]
//! im_max = 20.0
//! ```
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 numerical error.

use crate::diophantine::diophantine_scan;
use crate::error::LabError;
use crate::measure::ProbabilityMeasure;
use crate::renewal::{green_engine, green_fourier, harmonic_check, stieltjes_with, symbol_u, t_lambda_apply, RenewalEngine};
use crate::speed::{class_from_fit, control_theta_check, profile_to_csv, speed_analysis, tail_grid, ProfilePoint};
use crate::testfn::TestFunction;
use crate::weights::{
    gamma_series, laplace_quadrature, omega_report, phi_bound_check, singularity_scan, ThetaSampler, WeightFn,
};
use crate::zeros::{count_zeros_with, scan_zeros_with, zero_set_stats, ComplexRect, ZeroFinderConfig, ZeroSet};
use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const THREADS_ENV: &str = "RENEWAL_LAB_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{path}{}: {message}", .line.map(|l| format!(":{l}")).unwrap_or_default())]
    Parse { path: String, line: Option<usize>, message: String },
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),
    #[error("numerical error: {0}")]
    Numerical(#[from] LabError),
    #[error("io: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numerical(_) => 2,
            _ => 1,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    Classify,
    Zeros,
    Renewal,
    Speed,
    Weights,
    IdentityCheck,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Classify => "classify",
            CommandKind::Zeros => "zeros",
            CommandKind::Renewal => "renewal",
            CommandKind::Speed => "speed",
            CommandKind::Weights => "weights",
            CommandKind::IdentityCheck => "identity-check",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifySection {
    pub big_b: f64,
    /// Rows of the criterion table on [1, B].
    pub rows: usize,
    pub ls: Vec<f64>,
}

impl Default for ClassifySection {
    fn default() -> Self {
        ClassifySection { big_b: 4096.0, rows: 512, ls: vec![1.0, 2.0, 3.0] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ZerosSection {
    /// Defaults to min(0.3, eta / 2).
    pub halfwidth: Option<f64>,
    pub im_max: f64,
    pub tolerance: f64,
    /// Exponent of the zero-free boundary Re = -C / (1 + |Im|^l).
    pub l: f64,
    /// Random sub-rectangles on which count_zeros is compared with the list.
    pub count_checks: usize,
}

impl Default for ZerosSection {
    fn default() -> Self {
        ZerosSection { halfwidth: None, im_max: 20.0, tolerance: 1e-11, l: 2.0, count_checks: 10 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenewalSection {
    /// Explicit points; otherwise `points` evenly spaced on [x_min, x_max].
    pub xs: Option<Vec<f64>>,
    pub x_min: f64,
    pub x_max: f64,
    pub points: usize,
    pub tolerance: f64,
    pub test_function: TestFunction,
    /// Damping for the Fourier route; omitted means series only.
    pub fourier_s: Option<f64>,
}

impl Default for RenewalSection {
    fn default() -> Self {
        RenewalSection {
            xs: None,
            x_min: 0.0,
            x_max: 20.0,
            points: 21,
            tolerance: 1e-10,
            test_function: TestFunction::gaussian(0.0, 1.0),
            fourier_s: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpeedSection {
    pub test_function: TestFunction,
    pub x_min: f64,
    pub x_max: f64,
    /// Points per tail.
    pub points: usize,
    pub tolerance: f64,
    pub big_b: f64,
}

impl Default for SpeedSection {
    fn default() -> Self {
        SpeedSection {
            test_function: TestFunction::bump(0.0, 1.0),
            x_min: 2.0,
            x_max: 1000.0,
            points: 48,
            tolerance: 1e-12,
            big_b: 4096.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightsSection {
    pub omega: WeightFn,
    pub deltas: Vec<f64>,
    /// Power l for the s^l L(omega)(s) scan; omitted skips the scan.
    pub l: Option<u32>,
    pub s_grid: Vec<f64>,
    /// [re, im] points for the Gamma-series comparison (power_exp only).
    pub series_points: Vec<[f64; 2]>,
    /// alpha for the |Phi(z)| <= C |1 + z|^alpha check; omitted skips it.
    pub phi_alpha: Option<f64>,
    /// Random admissible configurations for the control inequality.
    pub control_trials: usize,
    pub tolerance: f64,
}

impl Default for WeightsSection {
    fn default() -> Self {
        WeightsSection {
            omega: WeightFn::power_exp(1.0, 0.5),
            deltas: vec![0.5, 1.0, 2.0, 4.0],
            l: None,
            s_grid: vec![1e-1, 1e-2, 1e-3],
            series_points: vec![[1.0, 0.0], [0.01, 0.0], [0.5, 3.0], [0.01, 100.0], [10.0, -40.0]],
            phi_alpha: None,
            control_trials: 0,
            tolerance: 1e-10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdentitySection {
    pub test_function: TestFunction,
    pub xs: Vec<f64>,
    pub tolerance: f64,
    pub max_residual: f64,
    /// Check harmonic functions on the nonzero zeros with |Im| <= im_max.
    pub harmonic: bool,
    pub im_max: f64,
    pub halfwidth: Option<f64>,
}

impl Default for IdentitySection {
    fn default() -> Self {
        IdentitySection {
            test_function: TestFunction::gaussian(0.0, 1.0),
            xs: vec![-8.0, -3.0, 0.0, 3.0, 8.0],
            tolerance: 1e-10,
            max_residual: 1e-3,
            harmonic: true,
            im_max: 20.0,
            halfwidth: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub command: Option<CommandKind>,
    /// Measure file, relative to the config file.
    #[serde(default)]
    pub measure: Option<PathBuf>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub classify: ClassifySection,
    #[serde(default)]
    pub zeros: ZerosSection,
    #[serde(default)]
    pub renewal: RenewalSection,
    #[serde(default)]
    pub speed: SpeedSection,
    #[serde(default)]
    pub weights: WeightsSection,
    #[serde(default)]
    pub identity: IdentitySection,
    /// Directory of the config file; relative paths resolve against it.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn positive(v: &mut Vec<String>, name: &str, x: f64) {
    if !(x > 0.0) || !x.is_finite() {
        v.push(format!("{name} = {x} must be positive and finite"));
    }
}

impl RunConfig {
    /// All violations, empty when valid.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.command != Some(CommandKind::Weights) && self.measure.is_none() {
            v.push("measure: a measure file is required for this command".into());
        }
        let c = &self.classify;
        if !(c.big_b >= 256.0) {
            v.push(format!("classify.big_b = {} must be at least 256", c.big_b));
        }
        if c.rows == 0 {
            v.push("classify.rows must be positive".into());
        }
        for &l in &c.ls {
            if !(l >= 0.0) {
                v.push(format!("classify.ls entry {l} must be nonnegative"));
            }
        }
        let z = &self.zeros;
        if let Some(h) = z.halfwidth {
            positive(&mut v, "zeros.halfwidth", h);
        }
        positive(&mut v, "zeros.im_max", z.im_max);
        positive(&mut v, "zeros.tolerance", z.tolerance);
        if !(z.l >= 0.0) {
            v.push(format!("zeros.l = {} must be nonnegative", z.l));
        }
        let r = &self.renewal;
        positive(&mut v, "renewal.tolerance", r.tolerance);
        if r.xs.is_none() {
            if !(r.x_max > r.x_min) {
                v.push(format!("renewal.x_max = {} must exceed x_min = {}", r.x_max, r.x_min));
            }
            if r.points < 2 {
                v.push("renewal.points must be at least 2".into());
            }
        } else if r.xs.as_ref().is_some_and(|xs| xs.is_empty()) {
            v.push("renewal.xs is empty".into());
        }
        if let Some(s) = r.fourier_s {
            positive(&mut v, "renewal.fourier_s", s);
        }
        if let Err(e) = r.test_function.validate() {
            v.push(format!("renewal.test_function: {e}"));
        }
        let s = &self.speed;
        positive(&mut v, "speed.tolerance", s.tolerance);
        positive(&mut v, "speed.x_min", s.x_min);
        if !(s.x_max > s.x_min) {
            v.push(format!("speed.x_max = {} must exceed x_min = {}", s.x_max, s.x_min));
        }
        if s.points < 8 {
            v.push("speed.points must be at least 8 per tail".into());
        }
        if !(s.big_b >= 256.0) {
            v.push(format!("speed.big_b = {} must be at least 256", s.big_b));
        }
        if let Err(e) = s.test_function.validate() {
            v.push(format!("speed.test_function: {e}"));
        }
        let w = &self.weights;
        if let Err(e) = w.omega.validate() {
            v.push(format!("weights.omega: {e}"));
        }
        positive(&mut v, "weights.tolerance", w.tolerance);
        if w.deltas.is_empty() {
            v.push("weights.deltas is empty".into());
        }
        for &d in &w.deltas {
            positive(&mut v, "weights.deltas entry", d);
        }
        for &sv in &w.s_grid {
            positive(&mut v, "weights.s_grid entry", sv);
        }
        if w.s_grid.windows(2).any(|p| !(p[1] < p[0])) {
            v.push("weights.s_grid must be decreasing".into());
        }
        for p in &w.series_points {
            if !(p[0] > 0.0) {
                v.push(format!("weights.series_points entry {p:?} needs Re z > 0"));
            }
        }
        if let Some(a) = w.phi_alpha {
            positive(&mut v, "weights.phi_alpha", a);
        }
        let i = &self.identity;
        positive(&mut v, "identity.tolerance", i.tolerance);
        positive(&mut v, "identity.max_residual", i.max_residual);
        positive(&mut v, "identity.im_max", i.im_max);
        if let Some(h) = i.halfwidth {
            positive(&mut v, "identity.halfwidth", h);
        }
        if i.xs.is_empty() {
            v.push("identity.xs is empty".into());
        }
        if let Err(e) = i.test_function.validate() {
            v.push(format!("identity.test_function: {e}"));
        }
        v
    }

    pub fn measure_path(&self) -> Option<PathBuf> {
        self.measure.as_ref().map(|m| self.base_dir.join(m))
    }

    pub fn out_dir(&self) -> PathBuf {
        match &self.out {
            Some(o) => self.base_dir.join(o),
            None => self.base_dir.join("runs").join(self.command.map_or("run", |c| c.name())),
        }
    }
}

fn parse_value(text: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {text}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(text.to_string()))
}

fn apply_set(table: &mut toml::Table, assignment: &str) -> CliResult<()> {
    let (key, value) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got {assignment:?}")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Usage(format!("--set {key}: {p} is not a table")))?;
    }
    let value = parse_value(value.trim());
    if value.is_table() || value.is_array() {
        return Err(CliError::Usage(format!("--set only overrides scalars ({key})")));
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Parse and validate config text; `sets` are `key.path=value` overrides.
pub fn parse_config_str(text: &str, origin: &str, base_dir: &Path, sets: &[String]) -> CliResult<RunConfig> {
    let mut table: toml::Table = toml::from_str(text).map_err(|e| CliError::Parse {
        path: origin.to_string(),
        line: e.span().map(|s| line_of(text, s.start)),
        message: e.message().to_string(),
    })?;
    for s in sets {
        apply_set(&mut table, s)?;
    }
    let mut cfg: RunConfig = toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| CliError::Parse {
        path: origin.to_string(),
        line: None,
        message: e.message().to_string(),
    })?;
    cfg.base_dir = base_dir.to_path_buf();
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> CliResult<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let cfg = parse_config_str(&text, &path.display().to_string(), &base, &[])?;
    let v = cfg.violations();
    if !v.is_empty() {
        return Err(CliError::Validation(v));
    }
    Ok(cfg)
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    /// sha256 over tool version, config text and measure file.
    pub inputs_hash: String,
    pub config_sha256: String,
    pub measure_sha256: Option<String>,
    pub threads: usize,
    pub wall_time_s: f64,
    pub status: String,
    pub error: Option<String>,
    /// False when the run stopped early; the listed artifacts are then partial.
    pub complete: bool,
    pub artifacts: Vec<ArtifactEntry>,
}

/// Output directory with atomic writes (temp file + rename).
pub struct RunDir {
    dir: PathBuf,
    seed: u64,
    artifacts: Vec<ArtifactEntry>,
}

impl RunDir {
    pub fn create(dir: &Path, seed: u64) -> CliResult<RunDir> {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let probe = dir.join(".write-probe");
        fs::write(&probe, b"").map_err(|e| io_err(dir, e))?;
        let _ = fs::remove_file(&probe);
        Ok(RunDir { dir: dir.to_path_buf(), seed, artifacts: Vec::new() })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    fn write_raw(&mut self, name: &str, bytes: &[u8], record: bool) -> CliResult<()> {
        let target = self.dir.join(name);
        let tmp = self.dir.join(format!(".{name}.tmp"));
        fs::write(&tmp, bytes).map_err(|e| io_err(&tmp, e))?;
        fs::rename(&tmp, &target).map_err(|e| io_err(&target, e))?;
        if record {
            self.artifacts.push(ArtifactEntry { path: name.to_string(), sha256: sha256_hex(bytes), bytes: bytes.len() });
        }
        Ok(())
    }

    /// JSON artifact; the seed is added at the top level.
    pub fn json(&mut self, name: &str, value: serde_json::Value) -> CliResult<()> {
        let mut obj = serde_json::Map::new();
        obj.insert("seed".into(), json!(self.seed));
        match value {
            serde_json::Value::Object(m) => obj.extend(m),
            other => {
                obj.insert("data".into(), other);
            }
        }
        let mut text = serde_json::to_string_pretty(&serde_json::Value::Object(obj)).expect("json");
        text.push('\n');
        self.write_raw(name, text.as_bytes(), true)
    }

    /// Text artifact (CSV or plot data) behind a `# seed = N` comment line.
    pub fn text(&mut self, name: &str, body: &str) -> CliResult<()> {
        let text = format!("# seed = {}\n{body}", self.seed);
        self.write_raw(name, text.as_bytes(), true)
    }
}

#[derive(Parser, Debug)]
#[command(name = "renewal-lab", version, about = "Speed of convergence in the renewal theorem: batch runs from config files")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run the command named in the config file
    Run(RunArgs),
    /// Diophantine criteria and exponent fit
    Classify(RunArgs),
    /// Zeros of 1 - rho_hat in a strip
    Zeros(RunArgs),
    /// H, R, G*f and T_lambda f on a grid
    Renewal(RunArgs),
    /// Decay profile of (G - T_lambda)*f and its classification
    Speed(RunArgs),
    /// Laplace transforms of a weight and Theta estimates
    Weights(RunArgs),
    /// Stieltjes identity, symbol limit and harmonic functions
    IdentityCheck(RunArgs),
}

#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (overrides `out`)
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override a scalar, e.g. --set zeros.im_max=30
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

/// Loads, overrides and validates the config behind a subcommand.
pub fn prepare(requested: Option<CommandKind>, args: &RunArgs) -> CliResult<RunConfig> {
    let text = fs::read_to_string(&args.config).map_err(|e| io_err(&args.config, e))?;
    let base = args.config.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut cfg = parse_config_str(&text, &args.config.display().to_string(), &base, &args.set)?;
    match (requested, cfg.command) {
        (Some(r), Some(c)) if r != c => {
            return Err(CliError::Usage(format!("config is for {:?} but {:?} was requested", c.name(), r.name())))
        }
        (Some(r), _) => cfg.command = Some(r),
        (None, None) => return Err(CliError::Usage("config has no command; use a named subcommand".into())),
        (None, Some(_)) => {}
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.out = Some(std::env::current_dir().map_err(|e| CliError::Io(e.to_string()))?.join(out));
    }
    let v = cfg.violations();
    if !v.is_empty() {
        return Err(CliError::Validation(v));
    }
    Ok(cfg)
}

fn configure_threads() -> usize {
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    rayon::current_num_threads()
}

/// Entry point for the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let (kind, args) = match &cli.command {
        Command::Run(a) => (None, a),
        Command::Classify(a) => (Some(CommandKind::Classify), a),
        Command::Zeros(a) => (Some(CommandKind::Zeros), a),
        Command::Renewal(a) => (Some(CommandKind::Renewal), a),
        Command::Speed(a) => (Some(CommandKind::Speed), a),
        Command::Weights(a) => (Some(CommandKind::Weights), a),
        Command::IdentityCheck(a) => (Some(CommandKind::IdentityCheck), a),
    };
    let cfg = match prepare(kind, args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    match run(&cfg) {
        Ok(m) => {
            println!("{}: {} artifacts in {}", m.command, m.artifacts.len(), cfg.out_dir().display());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Runs a validated config and writes the manifest, also after a failure.
pub fn run(cfg: &RunConfig) -> CliResult<Manifest> {
    let start = Instant::now();
    let threads = configure_threads();
    let command = cfg.command.ok_or_else(|| CliError::Usage("no command".into()))?;
    let config_text = toml::to_string(cfg).map_err(|e| CliError::Io(e.to_string()))?;
    let (mu, measure_bytes) = match cfg.measure_path() {
        Some(p) => {
            let bytes = fs::read(&p).map_err(|e| io_err(&p, e))?;
            let mu = ProbabilityMeasure::load(&p).map_err(|e| CliError::Parse {
                path: p.display().to_string(),
                line: None,
                message: e.to_string(),
            })?;
            (Some(mu), Some(bytes))
        }
        None => (None, None),
    };
    let label = cfg
        .measure
        .as_ref()
        .and_then(|p| p.file_stem())
        .map_or("none".to_string(), |s| s.to_string_lossy().into_owned());
    let mut dir = RunDir::create(&cfg.out_dir(), cfg.seed)?;
    let outcome = match (command, &mu) {
        (CommandKind::Weights, _) => cmd_weights(cfg, &mut dir),
        (_, Some(mu)) => match command {
            CommandKind::Classify => cmd_classify(cfg, mu, &label, &mut dir),
            CommandKind::Zeros => cmd_zeros(cfg, mu, &mut dir),
            CommandKind::Renewal => cmd_renewal(cfg, mu, &mut dir),
            CommandKind::Speed => cmd_speed(cfg, mu, &label, &mut dir),
            CommandKind::IdentityCheck => cmd_identity(cfg, mu, &mut dir),
            CommandKind::Weights => unreachable!(),
        },
        (_, None) => Err(CliError::Validation(vec!["measure: a measure file is required for this command".into()])),
    };
    let mut hasher = Sha256::new();
    hasher.update(env!("CARGO_PKG_VERSION").as_bytes());
    hasher.update(config_text.as_bytes());
    if let Some(b) = &measure_bytes {
        hasher.update(b);
    }
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: command.name().to_string(),
        seed: cfg.seed,
        inputs_hash: hex::encode(hasher.finalize()),
        config_sha256: sha256_hex(config_text.as_bytes()),
        measure_sha256: measure_bytes.as_deref().map(sha256_hex),
        threads,
        wall_time_s: start.elapsed().as_secs_f64(),
        status: match &outcome {
            Ok(()) => "ok".into(),
            Err(CliError::Numerical(_)) => "numerical_error".into(),
            Err(_) => "error".into(),
        },
        error: outcome.as_ref().err().map(|e| e.to_string()),
        complete: outcome.is_ok(),
        artifacts: dir.artifacts.clone(),
    };
    let text = serde_json::to_string_pretty(&manifest).expect("json") + "\n";
    dir.write_raw("manifest.json", text.as_bytes(), false)?;
    outcome.map(|_| manifest)
}

fn cmd_classify(cfg: &RunConfig, mu: &ProbabilityMeasure, label: &str, dir: &mut RunDir) -> CliResult<()> {
    let c = &cfg.classify;
    let scan = diophantine_scan(mu, c.big_b, c.rows, &c.ls)?;
    dir.text("scan.csv", &scan.to_csv())?;
    let fit = scan.fit.as_ref().expect("B >= 256 runs the fit");
    let class = class_from_fit(mu, fit, c.big_b);
    dir.json(
        "classify.json",
        json!({
            "measure": label,
            "big_b": c.big_b,
            "diophantine_class": class,
            "exponent_fit": fit,
            "windows": scan.windows,
            "grid_step": scan.grid_step,
        }),
    )
}

fn default_halfwidth(mu: &ProbabilityMeasure, h: Option<f64>) -> f64 {
    h.unwrap_or_else(|| 0.3f64.min(0.5 * mu.eta()))
}

#[derive(Clone, Copy, Debug, Serialize)]
struct CountCheck {
    rect: ComplexRect,
    counted: usize,
    listed: usize,
    agree: bool,
}

fn random_rect(rng: &mut ChaCha8Rng, hw: f64, im_max: f64, zs: &ZeroSet) -> CliResult<ComplexRect> {
    for _ in 0..100 {
        let a = rng.gen_range(-hw..hw);
        let b = rng.gen_range(-hw..hw);
        let c = rng.gen_range(-im_max..im_max);
        let d = rng.gen_range(-im_max..im_max);
        let (re0, re1) = (a.min(b), a.max(b));
        let (im0, im1) = (c.min(d), c.max(d));
        if re1 - re0 < 0.05 * hw || im1 - im0 < 0.05 * im_max {
            continue;
        }
        let rect = ComplexRect::new(re0, re1, im0, im1)?;
        let margin = 1e-3 * (re1 - re0).min(im1 - im0);
        let near = zs.zeros.iter().any(|z| rect.contains(z.z, margin) && !rect.contains(z.z, -margin));
        if !near {
            return Ok(rect);
        }
    }
    Err(CliError::Numerical(LabError::NonConvergent("no sub-rectangle clear of zeros".into())))
}

fn cmd_zeros(cfg: &RunConfig, mu: &ProbabilityMeasure, dir: &mut RunDir) -> CliResult<()> {
    let z = &cfg.zeros;
    let hw = default_halfwidth(mu, z.halfwidth);
    let fcfg = ZeroFinderConfig { tolerance: z.tolerance, ..Default::default() };
    let zs = scan_zeros_with(mu, hw, z.im_max, &fcfg)?;
    let stats = zero_set_stats(&zs, z.l)?;
    dir.text("zeros.csv", &zs.to_csv())?;
    if let Ok(plot) = emit_plotdata(&PlotArtifact::Zeros { set: &zs, l: z.l }) {
        dir.text("zeros.dat", &plot)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut checks = Vec::new();
    for _ in 0..z.count_checks {
        let rect = random_rect(&mut rng, hw, z.im_max, &zs)?;
        let counted = count_zeros_with(mu, &rect, &fcfg)?;
        let listed = zs.zeros.iter().filter(|q| rect.contains(q.z, 0.0)).count();
        checks.push(CountCheck { rect, counted, listed, agree: counted == listed });
    }
    dir.json("zeros.json", json!({ "zero_set": zs, "stats": stats, "count_checks": checks }))?;
    if let Some(bad) = checks.iter().find(|c| !c.agree) {
        return Err(LabError::NonConvergent(format!(
            "count_zeros found {} zeros in {:?}, the scan lists {}",
            bad.counted, bad.rect, bad.listed
        ))
        .into());
    }
    Ok(())
}

fn cmd_renewal(cfg: &RunConfig, mu: &ProbabilityMeasure, dir: &mut RunDir) -> CliResult<()> {
    let r = &cfg.renewal;
    let xs: Vec<f64> = match &r.xs {
        Some(xs) => xs.clone(),
        None => (0..r.points).map(|i| r.x_min + (r.x_max - r.x_min) * i as f64 / (r.points - 1) as f64).collect(),
    };
    let f = &r.test_function;
    let m = mu.moments();
    m.require_drift()?;
    let hmax = xs.iter().cloned().fold(0.0, f64::max);
    let h_engine = RenewalEngine::new(mu, hmax, r.tolerance)?;
    let g_engine = green_engine(mu, f, &xs, r.tolerance)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["x", "H", "R", "G*f", "T_lambda*f", "residual"];
    if r.fourier_s.is_some() {
        header.push("G_s*f");
    }
    w.write_record(&header).expect("in-memory write");
    let mut max_h_bound: f64 = 0.0;
    let mut max_g_bound: f64 = 0.0;
    for &x in &xs {
        let h = h_engine.h(x)?;
        let rx = h_engine.r(x)?;
        let g = g_engine.green(f, x)?;
        let t = t_lambda_apply(f, x, m.lambda)?;
        let st = stieltjes_with(&g_engine, f, x, r.tolerance)?;
        max_h_bound = max_h_bound.max(h.error_bound());
        max_g_bound = max_g_bound.max(g.error_bound());
        let mut row = vec![x.to_string(), h.value.to_string(), rx.to_string(), g.value.to_string(), t.to_string(), st.residual.to_string()];
        if let Some(s) = r.fourier_s {
            row.push(green_fourier(mu, f, x, s, r.tolerance)?.value.to_string());
        }
        w.write_record(&row).expect("in-memory write");
    }
    let body = String::from_utf8(w.into_inner().expect("flush")).expect("utf8");
    dir.text("renewal.csv", &body)?;
    dir.json(
        "renewal.json",
        json!({
            "lambda": m.lambda,
            "lambda2": m.lambda2,
            "smith_constant": m.smith_constant(),
            "terms_h": h_engine.terms(),
            "terms_green": g_engine.terms(),
            "tail_bound_h": h_engine.tail_bound(),
            "tail_bound_green": g_engine.tail_bound(),
            "max_error_bound_h": max_h_bound,
            "max_error_bound_green": max_g_bound,
            "fourier_s": r.fourier_s,
            "tolerance": r.tolerance,
            "test_function": f,
        }),
    )
}

fn cmd_speed(cfg: &RunConfig, mu: &ProbabilityMeasure, label: &str, dir: &mut RunDir) -> CliResult<()> {
    let s = &cfg.speed;
    let xs = tail_grid(s.x_min, s.x_max, s.points);
    let (profile, fit, report) = speed_analysis(mu, &s.test_function, &xs, s.tolerance, s.big_b, label)?;
    dir.text("profile.csv", &profile_to_csv(&profile))?;
    dir.text("profile.dat", &emit_plotdata(&PlotArtifact::Profile(&profile))?)?;
    dir.json(
        "speed.json",
        json!({
            "measure": report.measure,
            "diophantine_class": report.diophantine_class,
            "fit": report.fit.as_ref().map(|f| json!({ "model": f.model.name(), "params": f.model, "r2": f.r2, "tail": f.tail })),
            "consistency": report.consistency,
            "verdict": report.verdict(),
            "exponent_diagnostic": report.exponent_diagnostic,
            "candidates": fit.as_ref().map(|f| &f.candidates),
            "noise_floor": fit.as_ref().map(|f| f.noise_floor),
            "test_function": s.test_function,
        }),
    )
}

#[derive(Clone, Copy, Debug, Serialize)]
struct SeriesRow {
    z: Complex64,
    series: Complex64,
    terms: usize,
    remainder_bound: f64,
    quadrature: Complex64,
    quadrature_error: f64,
    relative_difference: f64,
}

/// Random admissible configuration for the control inequality.
pub fn random_control_config(rng: &mut impl Rng) -> (Vec<Complex64>, Vec<Complex64>, f64, f64) {
    let eta = rng.gen_range(0.05..0.5);
    let delta = eta * rng.gen_range(1.2..4.0);
    let k = rng.gen_range(1..=6);
    let mut im = rng.gen_range(-20.0..0.0);
    let mut a = Vec::with_capacity(k);
    let mut u = Vec::with_capacity(k);
    for _ in 0..k {
        a.push(Complex64::new(-eta * rng.gen_range(0.02..0.98), im));
        u.push(Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        im += delta + rng.gen_range(0.0..3.0);
    }
    (a, u, eta, delta)
}

fn cmd_weights(cfg: &RunConfig, dir: &mut RunDir) -> CliResult<()> {
    let w = &cfg.weights;
    let sampler = ThetaSampler { tol: w.tolerance, ..Default::default() };
    let report = omega_report(&w.omega, &w.deltas, &sampler)?;
    let mut csv = String::from("delta,theta,argmax_re,argmax_im\n");
    for t in &report.theta {
        csv.push_str(&format!("{},{},{},{}\n", t.delta, t.sup_value, t.argmax_z.re, t.argmax_z.im));
    }
    dir.text("theta.csv", &csv)?;
    let mut series = Vec::new();
    if let (WeightFn::PowerExp { a, alpha }, true) = (&w.omega, report.member) {
        for p in &w.series_points {
            let z = Complex64::new(p[0], p[1]);
            let s = gamma_series(*a, *alpha, z, 1e-14)?;
            let q = laplace_quadrature(&w.omega, z, w.tolerance)?;
            series.push(SeriesRow {
                z,
                series: s.value,
                terms: s.terms,
                remainder_bound: s.remainder_bound,
                quadrature: q.value,
                quadrature_error: q.error,
                relative_difference: (s.value - q.value).norm() / s.value.norm(),
            });
        }
    }
    let singular = match (w.l, report.member) {
        (Some(l), true) => Some(singularity_scan(&w.omega, l, &w.s_grid)?),
        _ => None,
    };
    let phi = match (w.phi_alpha, w.omega.exponent()) {
        (Some(alpha), Some(e)) => Some(phi_bound_check(&e, alpha)?),
        _ => None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut control = Vec::new();
    if report.member {
        for trial in 0..w.control_trials {
            let (a, u, eta, delta) = random_control_config(&mut rng);
            let r = control_theta_check(&a, &u, &w.omega, eta, delta, 200.0, &sampler)?;
            control.push(json!({ "trial": trial, "eta": eta, "delta": delta, "a": a, "u": u, "result": r }));
        }
    }
    dir.json(
        "weights.json",
        json!({ "report": report, "series": series, "singularity": singular, "phi_bound": phi, "control": control }),
    )?;
    if control.iter().any(|c| c["result"]["holds"] == json!(false)) {
        return Err(LabError::NonConvergent("control inequality failed on a sampled configuration".into()).into());
    }
    Ok(())
}

fn cmd_identity(cfg: &RunConfig, mu: &ProbabilityMeasure, dir: &mut RunDir) -> CliResult<()> {
    let c = &cfg.identity;
    let f = &c.test_function;
    let m = mu.moments();
    m.require_drift()?;
    let engine = green_engine(mu, f, &c.xs, c.tolerance)?;
    let mut csv = String::from("x,series,tail_term,jump_term,remainder_term,residual\n");
    let mut worst: f64 = 0.0;
    for &x in &c.xs {
        let s = stieltjes_with(&engine, f, x, c.tolerance)?;
        worst = worst.max(s.residual);
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            s.x, s.series, s.tail_term, s.jump_term, s.remainder_term, s.residual
        ));
    }
    dir.text("identity.csv", &csv)?;
    let symbol: Vec<serde_json::Value> = [1e-4, 1e-6]
        .iter()
        .map(|&r| {
            let z = Complex64::new(r, 0.0);
            symbol_u(mu, z).map(|u| json!({ "z": z, "u": u, "smith_constant": m.smith_constant() }))
        })
        .collect::<Result<_, _>>()?;
    let mut harmonic = Vec::new();
    if c.harmonic {
        let hw = default_halfwidth(mu, c.halfwidth);
        let zs = scan_zeros_with(mu, hw, c.im_max, &ZeroFinderConfig::default())?;
        let grid: Vec<f64> = (0..50).map(|i| -5.0 + 10.0 * i as f64 / 49.0).collect();
        for z in zs.zeros.iter().filter(|z| z.z.norm() > 1e-8) {
            let dev = harmonic_check(mu, z.z, &grid, 1e-8)?;
            let scale = grid.iter().map(|&x| (z.z * x).exp().norm()).fold(0.0, f64::max);
            let bound = 10.0 * z.residual.max(f64::EPSILON) * scale;
            harmonic.push(json!({ "z": z.z, "residual": z.residual, "deviation": dev, "bound": bound, "within": dev <= bound }));
        }
    }
    let harmonic_ok = harmonic.iter().all(|h| h["within"] == json!(true));
    dir.json(
        "identity.json",
        json!({
            "stieltjes_max_residual": worst,
            "max_residual": c.max_residual,
            "symbol": symbol,
            "harmonic": harmonic,
            "test_function": f,
        }),
    )?;
    if worst > c.max_residual {
        return Err(LabError::NonConvergent(format!("Stieltjes residual {worst:.3e} above {:.3e}", c.max_residual)).into());
    }
    if !harmonic_ok {
        return Err(LabError::NonConvergent("harmonic deviation above 10 residual max|e^(zx)|".into()).into());
    }
    Ok(())
}

pub enum PlotArtifact<'a> {
    Zeros { set: &'a ZeroSet, l: f64 },
    Profile(&'a [ProfilePoint]),
}

/// Whitespace-separated columns with a tag: zeros plus the fitted boundary
/// Re = -C / (1 + |Im|^l), or a decay profile (x, |D|, bound).
pub fn emit_plotdata(artifact: &PlotArtifact) -> crate::Result<String> {
    match artifact {
        PlotArtifact::Zeros { set, l } => {
            if set.zeros.is_empty() {
                return Err(LabError::UnsupportedArtifact("empty zero set".into()));
            }
            let stats = zero_set_stats(set, *l)?;
            let mut s = String::from("# re im tag\n");
            for z in &set.zeros {
                s.push_str(&format!("{:.12e} {:.12e} zero\n", z.z.re, z.z.im));
            }
            match stats.zero_free_constant {
                Some(cst) if cst > 1e-9 => {
                    s.push_str(&format!("\n\n# boundary C = {cst:.6e}, l = {l}\n"));
                    for i in 0..=200 {
                        let im = -set.im_max + 2.0 * set.im_max * i as f64 / 200.0;
                        s.push_str(&format!("{:.12e} {:.12e} boundary\n", -cst / (1.0 + im.abs().powf(*l)), im));
                    }
                }
                Some(cst) => s.push_str(&format!("# boundary fit degenerate: C = {cst:.3e}\n")),
                None => s.push_str("# boundary fit degenerate: no nonzero zeros\n"),
            }
            Ok(s)
        }
        PlotArtifact::Profile(p) => {
            if p.is_empty() {
                return Err(LabError::UnsupportedArtifact("empty profile".into()));
            }
            let mut s = String::from("# x abs_d bound tag\n");
            for q in p.iter() {
                s.push_str(&format!("{:.12e} {:.12e} {:.6e} profile\n", q.x, q.d.abs(), q.bound));
            }
            Ok(s)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_and_violations() {
        let cfg = parse_config_str("command = \"zeros\"\nmeasure = \"m.toml\"\n", "t", Path::new("."), &[]).unwrap();
        assert!(cfg.violations().is_empty());
        assert_eq!(cfg.zeros.im_max, 20.0);
        let cfg = parse_config_str(
            "command = \"renewal\"\nmeasure = \"m.toml\"\n[renewal]\ntolerance = -1.0\npoints = 1\n",
            "t",
            Path::new("."),
            &[],
        )
        .unwrap();
        assert_eq!(cfg.violations().len(), 2);
        let err = parse_config_str("command = \"zeros\"\nbogus = 1\n", "t", Path::new("."), &[]).unwrap_err();
        assert!(matches!(err, CliError::Parse { .. }));
        let cfg = parse_config_str("command = \"zeros\"\n", "t", Path::new("."), &["zeros.im_max=31".into()]).unwrap();
        assert_eq!(cfg.zeros.im_max, 31.0);
    }

    #[test]
    fn plotdata_rejects_empty_profile() {
        assert!(matches!(emit_plotdata(&PlotArtifact::Profile(&[])), Err(LabError::UnsupportedArtifact(_))));
    }
}
