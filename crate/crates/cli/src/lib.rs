//! Command-line front end: argument parsing, run configuration and the pipeline driver.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dip_core::attribution::{loco_dip, pairwise_dip, sage_dip};
use dip_core::data::{holdout_split, kfold_split, load_csv_with_categorical, Dataset, GroupSpec};
use dip_core::dip::decompose;
use dip_core::error::{DipError, ErrorClass};
use dip_core::forceplot::render_forceplot;
use dip_core::learners::LearnerConfig;
use dip_core::report::{verify_report, write_atomic, Report, ReportBody};
use dip_core::synthetic::{
    gen_digits, gen_gaussian, gen_quadratic_trio, gen_student, GaussianInteractionParams, StudentVariant,
};
use serde::{Deserialize, Serialize};

/// Environment variable holding the default number of worker threads.
pub const THREADS_ENV: &str = "DIP_THREADS";

#[derive(Debug, Parser)]
#[command(name = "dip", version, about = "Decompose predictive power into standalone, interaction and dependence parts")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decompose the joint value of two feature groups.
    Decompose {
        #[command(flatten)]
        source: SourceArgs,
        /// Features of the first group (names or column indices, comma separated).
        #[arg(long, value_delimiter = ',', required = true)]
        group_a: Vec<String>,
        /// Features of the second group; defaults to every other feature.
        #[arg(long, value_delimiter = ',')]
        group_b: Vec<String>,
        #[arg(long, default_value_t = 0.2)]
        test_fraction: f64,
        #[command(flatten)]
        learner: LearnerArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Leave-one-covariate-out scores of every feature with their decomposition, over k folds.
    Loco {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long, default_value_t = 10)]
        folds: usize,
        #[command(flatten)]
        learner: LearnerArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Shapley effects with their decomposition.
    Sage {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long, default_value_t = 100)]
        orderings: usize,
        /// Enumerate every coalition instead of sampling orderings (at most 12 features).
        #[arg(long)]
        exact: bool,
        #[arg(long, default_value_t = 0.2)]
        test_fraction: f64,
        #[command(flatten)]
        learner: LearnerArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Decompose one feature against every other feature, one pair at a time.
    Pairwise {
        #[command(flatten)]
        source: SourceArgs,
        /// Feature paired with every other one (name or column index).
        #[arg(long)]
        focus: String,
        #[arg(long, default_value_t = 0.2)]
        test_fraction: f64,
        #[command(flatten)]
        learner: LearnerArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Write samples of a built-in process to CSV.
    Example {
        #[command(flatten)]
        example: ExampleArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-check the identities and schema of a saved report.
    Verify {
        #[arg(long)]
        report: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExampleKind {
    Gaussian,
    StudentRedundancy,
    StudentEnhancement,
    StudentInteraction,
    Digits,
    Quadratic,
}

#[derive(Debug, Clone, Args)]
pub struct ExampleArgs {
    /// Built-in data generating process.
    #[arg(long, value_enum)]
    pub example: Option<ExampleKind>,
    /// Interaction coefficient of the Gaussian process.
    #[arg(long, default_value_t = 0.0)]
    pub c: f64,
    /// Feature correlation of the Gaussian process.
    #[arg(long, default_value_t = 0.0)]
    pub beta: f64,
    /// Which quadratic process (1, 2 or 3).
    #[arg(long, default_value_t = 1)]
    pub which: usize,
    #[arg(long, default_value_t = 100_000)]
    pub n: usize,
}

#[derive(Debug, Clone, Args)]
#[group(id = "source", required = true, multiple = false, args = ["data", "example"])]
pub struct SourceArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Target column of the CSV file.
    #[arg(long, requires = "data")]
    pub target: Option<String>,
    /// Columns to encode as category codes.
    #[arg(long, value_delimiter = ',', requires = "data")]
    pub categorical: Vec<String>,
    #[command(flatten)]
    pub example: ExampleArgs,
    /// Seed for sampling, splitting and orderings.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct LearnerArgs {
    #[arg(long)]
    pub rounds: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub max_depth: Option<usize>,
    #[arg(long)]
    pub min_leaf: Option<usize>,
    #[arg(long)]
    pub n_bins: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Report path; the report goes to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Forceplot path.
    #[arg(long)]
    pub svg: Option<PathBuf>,
    /// Report raw values instead of shares of Var(Y).
    #[arg(long)]
    pub raw: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    Csv { path: PathBuf, target: String, categorical: Vec<String> },
    Example { example: ExampleKind, n: usize, c: f64, beta: f64, which: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandKind {
    Decompose,
    Loco,
    Sage,
    Pairwise,
    Example,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Decompose => "decompose",
            Self::Loco => "loco",
            Self::Sage => "sage",
            Self::Pairwise => "pairwise",
            Self::Example => "example",
        }
    }
}

/// Everything a run depends on. Output paths are not part of the echoed configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: CommandKind,
    pub source: DataSource,
    pub group_a: Vec<String>,
    pub group_b: Vec<String>,
    pub focus: Option<String>,
    pub folds: usize,
    pub test_fraction: f64,
    pub orderings: usize,
    pub exact: bool,
    pub learner: LearnerConfig,
    pub seed: u64,
    pub normalize: bool,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[serde(skip)]
    pub svg: Option<PathBuf>,
}

/// Failure of a CLI invocation, mapped to an exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(DipError),
    Violations(Vec<String>),
}

impl From<DipError> for CliError {
    fn from(e: DipError) -> Self {
        Self::Core(e)
    }
}

impl CliError {
    /// 1 usage or configuration, 2 I/O or parse, 3 numerical.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) => 1,
            Self::Violations(_) => 3,
            Self::Core(e) => match e.class() {
                ErrorClass::Config => 1,
                ErrorClass::Io | ErrorClass::Parse => 2,
                ErrorClass::Numerical => 3,
            },
        }
    }

    /// One-line diagnostic tagged with the error class.
    pub fn diagnostic(&self) -> String {
        match self {
            Self::Usage(msg) => format!("dip: usage error: {msg}"),
            Self::Violations(v) => format!("dip: numerical error: {} identity violations: {}", v.len(), v.join("; ")),
            Self::Core(e) => {
                let class = match e.class() {
                    ErrorClass::Io => "I/O",
                    ErrorClass::Parse => "parse",
                    ErrorClass::Config => "config",
                    ErrorClass::Numerical => "numerical",
                };
                format!("dip: {class} error: {e}")
            }
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.diagnostic())
    }
}

impl std::error::Error for CliError {}

fn learner_config(args: &LearnerArgs, seed: u64) -> LearnerConfig {
    let d = LearnerConfig::default();
    LearnerConfig {
        rounds: args.rounds.unwrap_or(d.rounds),
        learning_rate: args.learning_rate.unwrap_or(d.learning_rate),
        max_depth: args.max_depth.unwrap_or(d.max_depth),
        min_leaf: args.min_leaf.unwrap_or(d.min_leaf),
        n_bins: args.n_bins.unwrap_or(d.n_bins),
        seed,
    }
}

fn data_source(args: &SourceArgs) -> Result<DataSource, CliError> {
    match (&args.data, args.example.example) {
        (Some(path), None) => {
            let target = args.target.clone().ok_or_else(|| CliError::Usage("--data needs --target".into()))?;
            Ok(DataSource::Csv { path: path.clone(), target, categorical: args.categorical.clone() })
        }
        (None, Some(kind)) => Ok(example_source(&args.example, kind)),
        _ => Err(CliError::Usage("give exactly one of --data or --example".into())),
    }
}

fn example_source(e: &ExampleArgs, kind: ExampleKind) -> DataSource {
    DataSource::Example { example: kind, n: e.n, c: e.c, beta: e.beta, which: e.which }
}

impl RunConfig {
    fn base(command: CommandKind, source: DataSource, seed: u64, learner: LearnerConfig) -> Self {
        Self {
            command,
            source,
            group_a: Vec::new(),
            group_b: Vec::new(),
            focus: None,
            folds: 10,
            test_fraction: 0.2,
            orderings: 100,
            exact: false,
            learner,
            seed,
            normalize: true,
            out: None,
            svg: None,
        }
    }

    fn with_output(mut self, output: &OutputArgs) -> Self {
        self.normalize = !output.raw;
        self.out = output.out.clone();
        self.svg = output.svg.clone();
        self
    }

    /// Build the run configuration of an analysis subcommand; `None` for `verify`.
    pub fn from_command(command: &Command) -> Result<Option<Self>, CliError> {
        let cfg = match command {
            Command::Decompose { source, group_a, group_b, test_fraction, learner, output } => {
                let mut cfg = Self::base(CommandKind::Decompose, data_source(source)?, source.seed, learner_config(learner, source.seed))
                    .with_output(output);
                cfg.group_a = group_a.clone();
                cfg.group_b = group_b.clone();
                cfg.test_fraction = *test_fraction;
                cfg
            }
            Command::Loco { source, folds, learner, output } => {
                let mut cfg = Self::base(CommandKind::Loco, data_source(source)?, source.seed, learner_config(learner, source.seed))
                    .with_output(output);
                cfg.folds = *folds;
                cfg
            }
            Command::Sage { source, orderings, exact, test_fraction, learner, output } => {
                let mut cfg = Self::base(CommandKind::Sage, data_source(source)?, source.seed, learner_config(learner, source.seed))
                    .with_output(output);
                cfg.orderings = *orderings;
                cfg.exact = *exact;
                cfg.test_fraction = *test_fraction;
                cfg
            }
            Command::Pairwise { source, focus, test_fraction, learner, output } => {
                let mut cfg = Self::base(CommandKind::Pairwise, data_source(source)?, source.seed, learner_config(learner, source.seed))
                    .with_output(output);
                cfg.focus = Some(focus.clone());
                cfg.test_fraction = *test_fraction;
                cfg
            }
            Command::Example { example, seed, out } => {
                let kind = example.example.ok_or_else(|| CliError::Usage("example needs --example".into()))?;
                let mut cfg = Self::base(CommandKind::Example, example_source(example, kind), *seed, LearnerConfig::default());
                cfg.out = Some(out.clone());
                cfg
            }
            Command::Verify { .. } => return Ok(None),
        };
        cfg.validate()?;
        Ok(Some(cfg))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if let Some(dup) = self.group_a.iter().find(|a| self.group_b.contains(a)) {
            return Err(CliError::Usage(format!("feature `{dup}` is in both groups")));
        }
        if self.command == CommandKind::Example && self.out.is_none() {
            return Err(CliError::Usage("example needs --out".into()));
        }
        Ok(())
    }

    /// Configuration echo stored in reports.
    pub fn echo(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("run configuration serializes")
    }
}

pub fn load_source(source: &DataSource, seed: u64) -> Result<Dataset<f64>, DipError> {
    match source {
        DataSource::Csv { path, target, categorical } => load_csv_with_categorical(path, target, categorical),
        DataSource::Example { example, n, c, beta, which } => match example {
            ExampleKind::Gaussian => gen_gaussian(GaussianInteractionParams::new(*c, *beta)?, *n, seed),
            ExampleKind::StudentRedundancy => gen_student(StudentVariant::Redundancy, *n, seed),
            ExampleKind::StudentEnhancement => gen_student(StudentVariant::Enhancement, *n, seed),
            ExampleKind::StudentInteraction => gen_student(StudentVariant::Interaction, *n, seed),
            ExampleKind::Digits => gen_digits(*n, seed),
            ExampleKind::Quadratic => gen_quadratic_trio(*which, *n, seed),
        },
    }
}

/// Feature index of a name, or of a bare column index.
fn resolve(data: &Dataset<f64>, token: &str) -> Result<usize, CliError> {
    if let Some(i) = data.feature_index(token) {
        return Ok(i);
    }
    match token.parse::<usize>() {
        Ok(i) if i < data.n_features() => Ok(i),
        _ => Err(CliError::Usage(format!("no feature named `{token}`"))),
    }
}

fn resolve_all(data: &Dataset<f64>, tokens: &[String]) -> Result<Vec<usize>, CliError> {
    tokens.iter().map(|t| resolve(data, t)).collect()
}

fn write_csv(data: &Dataset<f64>, path: &PathBuf) -> Result<(), DipError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| DipError::Csv(e.to_string());
    let mut header: Vec<&str> = data.feature_names().iter().map(String::as_str).collect();
    header.push(data.target_name());
    w.write_record(&header).map_err(csv_err)?;
    for i in 0..data.n_rows() {
        let mut row: Vec<String> = (0..data.n_features()).map(|j| data.column(j)[i].to_string()).collect();
        row.push(data.target()[i].to_string());
        w.write_record(&row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| DipError::Csv(e.to_string()))?;
    write_atomic(path, &bytes)
}

/// Execute an analysis run. Returns the report, or `None` for `example`, which writes a CSV.
pub fn run(cfg: &RunConfig) -> Result<Option<Report>, CliError> {
    cfg.validate()?;
    let data = load_source(&cfg.source, cfg.seed)?;
    let learner = &cfg.learner;
    let body = match cfg.command {
        CommandKind::Example => {
            let out = cfg.out.as_ref().ok_or_else(|| CliError::Usage("example needs --out".into()))?;
            write_csv(&data, out)?;
            return Ok(None);
        }
        CommandKind::Decompose => {
            let a = resolve_all(&data, &cfg.group_a)?;
            let (data, group) = if cfg.group_b.is_empty() {
                let group = GroupSpec::complement_of(a, data.n_features())?;
                (data, group)
            } else {
                let b = resolve_all(&data, &cfg.group_b)?;
                let keep: Vec<usize> = a.iter().chain(&b).copied().collect();
                let projected = data.project(&keep)?;
                let group = GroupSpec::new((0..a.len()).collect(), (a.len()..keep.len()).collect(), keep.len())?;
                (projected, group)
            };
            let split = holdout_split(data.n_rows(), cfg.test_fraction, cfg.seed)?;
            let result = decompose(&data, &split, &group, learner)?;
            ReportBody::Decompose { result: if cfg.normalize { result.normalize() } else { result } }
        }
        CommandKind::Loco => {
            let folds = kfold_split(data.n_rows(), cfg.folds, cfg.seed)?;
            let raw = loco_dip(&data, &folds, learner)?;
            let raw_folds = raw.folds.clone();
            ReportBody::Loco { report: if cfg.normalize { raw.normalized() } else { raw }, raw_folds }
        }
        CommandKind::Sage => {
            let split = holdout_split(data.n_rows(), cfg.test_fraction, cfg.seed)?;
            let raw = sage_dip(&data, &split, cfg.orderings, learner, cfg.exact)?;
            ReportBody::Sage { report: if cfg.normalize { raw.normalized() } else { raw } }
        }
        CommandKind::Pairwise => {
            let focus = cfg.focus.as_deref().ok_or_else(|| CliError::Usage("pairwise needs --focus".into()))?;
            let focus = resolve(&data, focus)?;
            let split = holdout_split(data.n_rows(), cfg.test_fraction, cfg.seed)?;
            let cells = pairwise_dip(&data, &split, focus, learner)?;
            let cells = if cfg.normalize {
                cells.into_iter().map(|mut c| { c.result = c.result.normalize(); c }).collect()
            } else {
                cells
            };
            ReportBody::Pairwise { cells }
        }
    };
    let report = Report::new(cfg.command.name(), cfg.echo(), cfg.normalize, body);
    let violations = verify_report(&report);
    if !violations.is_empty() {
        return Err(CliError::Violations(violations.iter().map(|v| format!("{}: {}", v.location, v.identity)).collect()));
    }
    if let Some(path) = &cfg.out {
        report.write(path)?;
    }
    if let Some(path) = &cfg.svg {
        render_forceplot(&report, path)?;
    }
    Ok(Some(report))
}

/// Size the global thread pool from `DIP_THREADS` when set.
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("{THREADS_ENV}={value:?} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot size thread pool: {e}")))
}

/// Run a parsed command line, printing the report to stdout when no `--out` is given.
pub fn execute(cli: Cli) -> Result<(), CliError> {
    if let Command::Verify { report } = &cli.command {
        let report = Report::read(report)?;
        let violations = verify_report(&report);
        if violations.is_empty() {
            println!("ok: {} report, schema {}", report.command, report.schema_version);
            return Ok(());
        }
        return Err(CliError::Violations(
            violations.iter().map(|v| format!("{}: {} (residual {:e})", v.location, v.identity, v.residual)).collect(),
        ));
    }
    let cfg = RunConfig::from_command(&cli.command)?.expect("analysis command");
    let report = run(&cfg)?;
    if let (Some(report), None) = (report, &cfg.out) {
        println!("{}", report.to_json());
    }
    Ok(())
}
