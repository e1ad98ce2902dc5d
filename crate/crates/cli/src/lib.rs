//! Configuration-driven experiment runner for `latwalk`.

pub mod config;
pub mod experiments;
pub mod output;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use latwalk::lattice::walk_power_kernel;
use latwalk::GridSpec;
use serde::Serialize;
use serde_json::Value;

pub use config::{ConfigError, ExperimentConfig, CONFIG_SCHEMA};
pub use experiments::{lookup, Experiment, RunError, REGISTRY};
pub use output::GateResult;

pub const REPORT_SCHEMA: &str = "latwalk-report/1";

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub workers: Option<usize>,
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub experiment: String,
    pub claim: String,
    pub config: ExperimentConfig,
    pub seed: u64,
    pub timestamp: u64,
    pub gates: Vec<GateResult>,
    pub pass: bool,
    pub results: Value,
    pub files: Vec<String>,
}

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Run(RunError),
    Io(String),
}

impl CliError {
    /// `1` for numerical failures, `2` for everything the user must fix.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Run(RunError::Numeric(_)) => 1,
            _ => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "{e}"),
            CliError::Run(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<RunError> for CliError {
    fn from(e: RunError) -> Self {
        CliError::Run(e)
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| io_err(path, e))
}

/// Loads, runs and writes one experiment; returns the report and its directory.
pub fn run(config: &Path, overrides: &Overrides) -> Result<(Report, PathBuf), CliError> {
    let mut cfg = ExperimentConfig::load(config)?;
    if let Some(s) = overrides.seed {
        cfg.seed = s;
    }
    if let Some(w) = overrides.workers {
        cfg.workers = Some(w);
    }
    let exp = lookup(&cfg.experiment)?;
    let out_dir = overrides
        .out_dir
        .clone()
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("runs").join(exp.name));
    run_config(&cfg, &out_dir).map(|r| (r, out_dir))
}

pub fn run_config(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Report, CliError> {
    cfg.validate()?;
    let exp = lookup(&cfg.experiment)?;
    let workers = cfg.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Io(format!("thread pool: {e}")))?;
    let outcome = pool.install(|| (exp.run)(cfg))?;

    fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    let mut files = Vec::new();
    for (name, bytes) in &outcome.files {
        write(&out_dir.join(name), bytes)?;
        files.push(name.clone());
    }
    if cfg.plots {
        for p in &outcome.plots {
            let name = format!("{}.svg", p.name);
            write(&out_dir.join(&name), p.to_svg().as_bytes())?;
            files.push(name);
        }
    }
    files.push("report.json".into());
    let pass = outcome.gates.iter().all(|g| g.pass);
    let report = Report {
        schema: REPORT_SCHEMA,
        experiment: exp.name.into(),
        claim: exp.claim.into(),
        config: cfg.clone(),
        seed: cfg.seed,
        timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        gates: outcome.gates,
        pass,
        results: outcome.results,
        files,
    };
    let json = serde_json::to_vec_pretty(&report).map_err(|e| CliError::Io(e.to_string()))?;
    write(&out_dir.join("report.json"), &json)?;
    Ok(report)
}

/// `name  aliases  claim`, one experiment per line.
pub fn list_experiments() -> String {
    let width = REGISTRY.iter().map(|e| e.name.len()).max().unwrap_or(0);
    REGISTRY
        .iter()
        .map(|e| {
            let aliases = if e.aliases.is_empty() { String::new() } else { format!(" [{}]", e.aliases.join(", ")) };
            format!("{:width$}  {}{}\n", e.name, e.claim, aliases)
        })
        .collect()
}

/// Writes the kernel of `A^k` on an `M^n` torus as CSV.
pub fn export_kernel(n: usize, m: usize, k: u32, out: &Path) -> Result<(), CliError> {
    let run = |e: latwalk::Error| CliError::Run(e.into());
    let grid = GridSpec::new(n, m).map_err(run)?;
    let kernel = walk_power_kernel::<f64>(grid, k).map_err(run)?;
    let file = fs::File::create(out).map_err(|e| io_err(out, e))?;
    kernel.write_csv(std::io::BufWriter::new(file), None).map_err(run)
}
