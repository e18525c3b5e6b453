//! `crossflow predict | search | sweep`.
//!
//! Exit codes: 0 on success, 1 when an engine stage fails, 2 on bad usage.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{parse_document, parse_strategy, ConfigDocument, ParallelismStrategy, ResolvedConfig};
use crate::error::Error;
use crate::graph::export;
use crate::perf::{predict_on, PredictOptions, DEFAULT_TILING_SAMPLES};
use crate::report::{to_json, write_atomic, ReportHeader};
use crate::search::{search_arch, search_joint, search_parallelism, Normalization, SearchConfig, SearchMode};
use crate::sweep::{run_sweep, to_csv, SweepAxis, SweepSpec};
use crate::{arch, presets};

pub const SEED_ENV: &str = "CROSSFLOW_SEED";

pub const EXIT_OK: i32 = 0;
pub const EXIT_ENGINE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "crossflow", version, about = "Performance prediction and design-space search for distributed training")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Predict the iteration time of one configuration.
    Predict(PredictArgs),
    /// Search budget fractions, parallelism strategies, or both.
    Search(SearchArgs),
    /// Predict across values of one technology axis and write a CSV table.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Architecture template; the built-in template when omitted.
    #[arg(long)]
    pub template: Option<PathBuf>,
    /// Ignore unknown configuration keys instead of rejecting them.
    #[arg(long)]
    pub lenient: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Tile candidates per memory level.
    #[arg(long, default_value_t = DEFAULT_TILING_SAMPLES)]
    pub tiling_samples: usize,
    /// Pipeline micro-batches; defaults to the model's setting, then the stage count.
    #[arg(long)]
    pub microbatches: Option<u64>,
    /// Make gradient all-reduces wait for all compute of the iteration.
    #[arg(long)]
    pub serialize_collectives: bool,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub tech: PathBuf,
    #[arg(long)]
    pub budget: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub system: PathBuf,
    /// e.g. RC-4-2-d3-p2 or CR-4-d2-p1.
    #[arg(long)]
    pub strategy: String,
    /// JSON report; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Schedule trace as CSV.
    #[arg(long)]
    pub trace_csv: Option<PathBuf>,
    /// Supergraph as DOT (`.dot`) or JSON.
    #[arg(long)]
    pub dump_supergraph: Option<PathBuf>,
    /// Device placement and link sharing as JSON.
    #[arg(long)]
    pub dump_mapping: Option<PathBuf>,
    #[command(flatten)]
    pub common: CommonArgs,
}

/// Config files for search and sweep; sections not given come from `--preset`.
#[derive(Debug, Args)]
pub struct InputArgs {
    #[arg(long)]
    pub tech: Option<PathBuf>,
    #[arg(long)]
    pub budget: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub system: Option<PathBuf>,
    /// Built-in defaults: `reference` (8 nodes, GEMM) or `case_study` (512 nodes, LM).
    #[arg(long, default_value = "reference")]
    pub preset: String,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    /// arch, parallelism or joint.
    #[arg(long)]
    pub mode: String,
    /// Required for `arch` mode.
    #[arg(long)]
    pub strategy: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 0.05)]
    pub eta: f64,
    #[arg(long, default_value_t = 0.1)]
    pub beta: f64,
    /// Maximum descent steps per restart.
    #[arg(long, default_value_t = 100)]
    pub steps: usize,
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
    /// Finite-difference step.
    #[arg(long, default_value_t = 1e-3)]
    pub h: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// none, parameter or gradient.
    #[arg(long, default_value = "none")]
    pub normalization: String,
    #[command(flatten)]
    pub inputs: InputArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// logic_node, hbm_bandwidth, network_bandwidth or nodes_per_package.
    #[arg(long)]
    pub axis: String,
    /// Comma-separated values or preset names.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    pub values: Vec<String>,
    /// Re-run the parallelism search at every point.
    #[arg(long)]
    pub resweep: bool,
    /// Fixed strategy; required unless `--resweep`.
    #[arg(long)]
    pub strategy: Option<String>,
    /// CSV table; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub inputs: InputArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(m: impl Into<String>) -> Self {
        CliError { code: EXIT_USAGE, message: m.into() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError { code: EXIT_ENGINE, message: e.to_string() }
    }
}

type CliResult<T> = Result<T, CliError>;

fn read(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::from(Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))))
}

fn load(path: &Path, strict: bool) -> CliResult<ConfigDocument> {
    parse_document(&read(path)?, strict)
        .map_err(|e| CliError::from(Error::Config(e)).with_context(path))
}

impl CliError {
    fn with_context(mut self, path: &Path) -> Self {
        self.message = format!("{}: {}", path.display(), self.message);
        self
    }
}

fn require(doc: &ConfigDocument, section: &str, path: &Path) -> CliResult<()> {
    let present = match section {
        "tech" => doc.tech.is_some(),
        "budgets" => doc.budgets.is_some(),
        "model" => doc.model.is_some(),
        "system" => doc.system.is_some(),
        "arch_template" => doc.arch_template.is_some(),
        _ => true,
    };
    if present {
        Ok(())
    } else {
        Err(CliError::from(Error::Config(crate::error::ConfigError::MissingField(section.into())))
            .with_context(path))
    }
}

fn preset_document(name: &str) -> CliResult<ConfigDocument> {
    let text = match name {
        "reference" => presets::REFERENCE_YAML,
        "case_study" => presets::CASE_STUDY_YAML,
        _ => return Err(CliError::usage(format!("unknown preset '{name}' (expected reference or case_study)"))),
    };
    Ok(parse_document(text, true).expect("shipped preset is valid"))
}

fn resolve(
    files: &[(Option<&PathBuf>, &str)],
    template: Option<&PathBuf>,
    preset: &str,
    strict: bool,
) -> CliResult<ResolvedConfig> {
    let mut doc = ConfigDocument::default();
    let mut all: Vec<(Option<&PathBuf>, &str)> = files.to_vec();
    all.push((template, "arch_template"));
    for (path, section) in all {
        if let Some(p) = path {
            let d = load(p, strict)?;
            require(&d, section, p)?;
            doc = doc.merge(d).map_err(|e| CliError::from(Error::Config(e)).with_context(p))?;
        }
    }
    let doc = doc.or(preset_document(preset)?);
    doc.validate().map_err(|e| CliError::from(Error::Config(e)))?;
    doc.resolve().map_err(|e| CliError::from(Error::Config(e)))
}

fn seed(cli_seed: u64) -> CliResult<u64> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::usage(format!("{SEED_ENV} must be an unsigned integer, got '{v}'"))),
        Err(_) => Ok(cli_seed),
    }
}

fn strategy(s: &str) -> CliResult<ParallelismStrategy> {
    parse_strategy(s).map_err(|e| CliError::usage(format!("--strategy: {e}")))
}

fn options(c: &CommonArgs) -> CliResult<PredictOptions> {
    if c.tiling_samples == 0 {
        return Err(CliError::usage("--tiling-samples must be >= 1"));
    }
    Ok(PredictOptions {
        tiling_samples: c.tiling_samples,
        seed: seed(c.seed)?,
        overlap_collectives: !c.serialize_collectives,
        microbatches: c.microbatches,
    })
}

fn emit(out: Option<&PathBuf>, contents: &str) -> CliResult<()> {
    match out {
        Some(p) => write_atomic(p, contents.as_bytes()).map_err(|e| {
            CliError::from(Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", p.display()))))
        }),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

fn cmd_predict(a: &PredictArgs) -> CliResult<()> {
    let s = strategy(&a.strategy)?;
    let opts = options(&a.common)?;
    let cfg = resolve(
        &[
            (Some(&a.tech), "tech"),
            (Some(&a.budget), "budgets"),
            (Some(&a.model), "model"),
            (Some(&a.system), "system"),
        ],
        a.common.template.as_ref(),
        "reference",
        !a.common.lenient,
    )?;
    let arch = arch::generate(&cfg.tech, &cfg.budgets, &cfg.arch_template).map_err(Error::from)?;
    let p = predict_on(&arch, &cfg.system, &cfg.model, &s, &opts)?;
    if let Some(path) = &a.dump_supergraph {
        let text = if path.extension().is_some_and(|e| e == "dot") {
            export::to_dot(&p.supergraph)
        } else {
            export::to_json(&p.supergraph)
        };
        emit(Some(path), &text)?;
    }
    if let Some(path) = &a.dump_mapping {
        emit(Some(path), &p.full_mapping.to_json())?;
    }
    if let Some(path) = &a.trace_csv {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["resource", "start_s", "end_s", "task"]).expect("in-memory write");
        for t in &p.timing.schedule_trace {
            w.write_record([t.resource.clone(), format!("{:e}", t.start), format!("{:e}", t.end), t.task.clone()])
                .expect("in-memory write");
        }
        let bytes = w.into_inner().expect("in-memory flush");
        emit(Some(path), &String::from_utf8(bytes).expect("csv is utf-8"))?;
    }
    let header = ReportHeader::new("predict", &cfg, opts.seed);
    emit(a.out.as_ref(), &to_json(&header, &p))
}

fn cmd_search(a: &SearchArgs) -> CliResult<()> {
    let mode: SearchMode = a.mode.parse().map_err(CliError::usage)?;
    let normalization = match a.normalization.as_str() {
        "none" => Normalization::None,
        "parameter" => Normalization::Parameter,
        "gradient" => Normalization::Gradient,
        other => return Err(CliError::usage(format!("unknown normalization '{other}'"))),
    };
    let opts = options(&a.common)?;
    let scfg = SearchConfig {
        eta: a.eta,
        beta: a.beta,
        steps: a.steps,
        restarts: a.restarts,
        h: a.h,
        seed: opts.seed,
        tol: a.tol,
        normalization,
    };
    scfg.validate().map_err(CliError::usage)?;
    let fixed = match (&a.strategy, mode) {
        (Some(s), _) => Some(strategy(s)?),
        (None, SearchMode::Arch) => return Err(CliError::usage("--mode arch needs --strategy")),
        (None, _) => None,
    };
    let cfg = resolve_inputs(&a.inputs, &a.common)?;
    let report = match mode {
        SearchMode::Parallelism => search_parallelism(&cfg, &opts)?,
        SearchMode::Arch => search_arch(&cfg, fixed.as_ref().expect("checked above"), &scfg, &opts)?,
        SearchMode::Joint => search_joint(&cfg, &scfg, &opts)?,
    };
    let header = ReportHeader::new(&format!("search --mode {mode}"), &cfg, opts.seed);
    emit(a.out.as_ref(), &to_json(&header, &report))
}

fn resolve_inputs(i: &InputArgs, c: &CommonArgs) -> CliResult<ResolvedConfig> {
    resolve(
        &[
            (i.tech.as_ref(), "tech"),
            (i.budget.as_ref(), "budgets"),
            (i.model.as_ref(), "model"),
            (i.system.as_ref(), "system"),
        ],
        c.template.as_ref(),
        &i.preset,
        !c.lenient,
    )
}

fn cmd_sweep(a: &SweepArgs) -> CliResult<()> {
    let axis: SweepAxis = a.axis.parse().map_err(CliError::usage)?;
    let spec = SweepSpec { axis, values: a.values.clone(), resweep: a.resweep };
    spec.resolve().map_err(CliError::usage)?;
    let s = match (&a.strategy, a.resweep) {
        (Some(s), _) => strategy(s)?,
        (None, true) => ParallelismStrategy::identity(),
        (None, false) => return Err(CliError::usage("sweep needs --strategy unless --resweep is set")),
    };
    let opts = options(&a.common)?;
    let cfg = resolve_inputs(&a.inputs, &a.common)?;
    let rows = run_sweep(&cfg, &s, &spec, &opts).map_err(CliError::usage)?;
    for r in rows.iter().filter_map(|r| r.detail.as_ref().map(|d| (r, d))) {
        eprintln!("crossflow: {} = {}: {}", r.0.axis, r.0.value, r.1);
    }
    emit(a.out.as_ref(), &to_csv(&rows))
}

pub fn execute(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Predict(a) => cmd_predict(a),
        Command::Search(a) => cmd_search(a),
        Command::Sweep(a) => cmd_sweep(a),
    }
}

/// Parse `args`, run, print diagnostics, and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("crossflow: {}", e.message);
            e.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_tech_is_usage_error() {
        let code = run(["crossflow", "predict", "--budget", "b", "--model", "m", "--system", "s", "--strategy", "RC-1-1-d1-p1"]);
        assert_eq!(code, EXIT_USAGE);
    }

    #[test]
    fn bad_strategy_is_usage_error() {
        let code = run([
            "crossflow", "sweep", "--axis", "hbm_bandwidth", "--values", "1,2", "--strategy", "RC-4-d3-p2",
        ]);
        assert_eq!(code, EXIT_USAGE);
    }

    #[test]
    fn empty_sweep_is_usage_error() {
        let code = run(["crossflow", "sweep", "--axis", "hbm_bandwidth", "--strategy", "RC-1-1-d1-p1"]);
        assert_eq!(code, EXIT_USAGE);
    }

    #[test]
    fn unreadable_file_is_engine_error() {
        let code = run([
            "crossflow", "predict", "--tech", "/nonexistent/t.yaml", "--budget", "b", "--model", "m",
            "--system", "s", "--strategy", "RC-1-1-d1-p1",
        ]);
        assert_eq!(code, EXIT_ENGINE);
    }
}
