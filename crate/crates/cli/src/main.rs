use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use seqest::experiment::{
    self, Cell, EstimatorConfig, ExperimentConfig, ExperimentError, MemoryMode, ParsedTrace, ScoringMode, SeedRange,
    Table,
};
use seqest::memory::MemoryParams;
use seqest::stoptime::Scheme;
use seqest::{ModelConfig, ProcessModel, SamplePath, Symbol};

const OUT_DIR_ENV: &str = "SEQEST_OUT_DIR";

/// Universal prediction and memory inference for stationary ergodic sequences.
#[derive(Parser)]
#[command(name = "seqest", version)]
struct Cli {
    /// Directory for files written without an explicit --out.
    #[arg(long, global = true, env = OUT_DIR_ENV, default_value = ".")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a path and write it as a binary path file.
    Simulate {
        #[command(flatten)]
        source: ModelArg,
        #[arg(long)]
        length: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Defaults to `<out-dir>/path-<seed>.bin`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Backward estimate of P(X_0 = symbol | past) from a past of length t.
    PredictBackward {
        #[command(flatten)]
        source: ModelArg,
        #[arg(long)]
        t: usize,
        #[arg(long, default_value = "0..1")]
        seeds: SeedRange,
        #[arg(long, default_value_t = 1)]
        symbol: Symbol,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Sequential forward estimates along one path.
    PredictForward {
        #[command(flatten)]
        source: ModelArg,
        #[arg(long = "N")]
        n: usize,
        #[arg(long, value_enum, default_value_t = ForwardMode::Pointwise)]
        mode: ForwardMode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Emit every stride-th time (the last time is always emitted).
        #[arg(long, default_value_t = 1)]
        stride: usize,
        /// Fixed context depth instead of the growing schedule.
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long, default_value_t = 1)]
        symbol: Symbol,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Stopping-time estimates of P(X_{t+1} = 1 | X_0..X_t).
    Stoptime {
        #[arg(long)]
        scheme: Scheme,
        #[command(flatten)]
        source: ModelArg,
        #[arg(long)]
        length: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Add the entropy growth check with this slack.
        #[arg(long)]
        growth_eps: Option<f64>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Memory-word tests, memory length and conditional estimates.
    Memory {
        #[arg(long, value_enum)]
        mode: MemoryModeArg,
        #[command(flatten)]
        source: ModelArg,
        /// Time index; the path has n + 1 symbols.
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0.5)]
        gamma: f64,
        #[arg(long, default_value_t = 0.2)]
        beta: f64,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Word for ntest, written oldest first as digits separated by '-' (repeatable).
        #[arg(long = "word")]
        words: Vec<String>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Configured multi-replicate experiments.
    Experiment {
        #[command(subcommand)]
        action: ExperimentAction,
    },
}

#[derive(Subcommand)]
enum ExperimentAction {
    /// Run a JSON experiment config; writes `<trace>.csv` and `<trace>.csv.meta.json`.
    Run {
        config: PathBuf,
        /// Trace path; defaults to the config's output, then `<out-dir>/<name>.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarize a trace into per-index error quantiles, densities and pass rates.
    Summarize {
        trace: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.5,0.9")]
        quantiles: Vec<f64>,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Args)]
struct ModelArg {
    /// Model: a JSON file, inline JSON, or one of example-one, bernoulli:P, flip:P.
    #[arg(long)]
    model: String,
    /// Read the path from a binary path file instead of sampling it.
    #[arg(long)]
    path: Option<PathBuf>,
}

#[derive(Args)]
struct OutputArgs {
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ForwardMode {
    Pointwise,
    Cesaro,
}

#[derive(Clone, Copy, ValueEnum)]
enum MemoryModeArg {
    Ntest,
    Chi,
    Forward,
    Qhat,
    Fm,
    Ordest,
}

impl From<MemoryModeArg> for MemoryMode {
    fn from(m: MemoryModeArg) -> Self {
        match m {
            MemoryModeArg::Ntest => MemoryMode::Ntest,
            MemoryModeArg::Chi => MemoryMode::Chi,
            MemoryModeArg::Forward => MemoryMode::Forward,
            MemoryModeArg::Qhat => MemoryMode::Qhat,
            MemoryModeArg::Fm => MemoryMode::Fm,
            MemoryModeArg::Ordest => MemoryMode::Ordest,
        }
    }
}

fn config_err(msg: impl Into<String>) -> ExperimentError {
    ExperimentError::Config(msg.into())
}

fn parse_model(spec: &str) -> Result<ModelConfig, ExperimentError> {
    let spec = spec.trim();
    let prob = |text: &str| -> Result<f64, ExperimentError> {
        text.parse()
            .map_err(|_| config_err(format!("'{text}' is not a probability")))
    };
    let model = if spec == "example-one" {
        ProcessModel::example_one()
    } else if let Some(p) = spec.strip_prefix("bernoulli:") {
        ProcessModel::bernoulli(prob(p)?)?
    } else if let Some(p) = spec.strip_prefix("flip:") {
        ProcessModel::binary_flip(prob(p)?)?
    } else {
        let text = if spec.starts_with('{') {
            spec.to_owned()
        } else {
            fs::read_to_string(spec).map_err(|e| config_err(format!("cannot read model file {spec}: {e}")))?
        };
        let config: ModelConfig = serde_json::from_str(&text).map_err(|e| config_err(format!("invalid model: {e}")))?;
        ProcessModel::from_config(&config)?;
        return Ok(config);
    };
    Ok(model.to_config())
}

fn read_path(file: &Path, model: &ProcessModel) -> Result<Vec<Symbol>, ExperimentError> {
    let bytes = fs::read(file).map_err(|e| ExperimentError::Data(format!("cannot read {}: {e}", file.display())))?;
    let path = SamplePath::read_from(bytes.as_slice(), model.alphabet())
        .map_err(|e| ExperimentError::Data(format!("{}: {e}", file.display())))?;
    Ok(path.into_symbols())
}

fn emit(table: &Table, out: &Option<PathBuf>) -> Result<(), ExperimentError> {
    match out {
        Some(file) => table.write_csv(io::BufWriter::new(fs::File::create(file)?)),
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            table.write_csv(&mut lock)?;
            lock.flush()?;
            Ok(())
        }
    }
}

/// Runs `config` on each seed, or once on the path file, dropping the `replicate` column
/// and also `seed` unless `keep_seed`.
fn single_run(config: &ExperimentConfig, source: &ModelArg, keep_seed: bool) -> Result<Table, ExperimentError> {
    let model = config.validate()?;
    let all = experiment::columns(config);
    let skip = if keep_seed { 1 } else { 2 };
    let mut table = Table::new(&all[skip..]);
    let mut add = |seed: u64, rows: Vec<Vec<Cell>>| {
        for row in rows {
            let mut full = if keep_seed { vec![Cell::from(seed)] } else { vec![] };
            full.extend(row);
            table.push(full);
        }
    };
    match &source.path {
        Some(file) => {
            let x = read_path(file, &model)?;
            add(config.seeds.first, experiment::path_rows(config, &model, &x)?);
        }
        None => {
            let trace = experiment::run(config)?;
            for row in trace.table.rows {
                table.push(row[skip..].to_vec());
            }
        }
    }
    Ok(table)
}

fn parse_word(text: &str) -> Result<Vec<Symbol>, ExperimentError> {
    if text.is_empty() {
        return Ok(Vec::new());
    }
    text.split('-')
        .map(|s| {
            s.parse()
                .map_err(|_| config_err(format!("'{text}' is not a word of symbols")))
        })
        .collect()
}

fn execute(cli: Cli) -> Result<(), ExperimentError> {
    let out_dir = cli.out_dir;
    match cli.command {
        Command::Simulate {
            source,
            length,
            seed,
            out,
        } => {
            let model = ProcessModel::from_config(&parse_model(&source.model)?)?;
            if length == 0 {
                return Err(config_err("length must be positive"));
            }
            let path = seqest::process::sample_path(&model, length, seed)?;
            let file = out.unwrap_or_else(|| out_dir.join(format!("path-{seed}.bin")));
            if let Some(parent) = file.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            let mut writer = io::BufWriter::new(fs::File::create(&file)?);
            path.write_to(&mut writer)
                .map_err(|e| ExperimentError::Io(io::Error::other(e)))?;
            writer.flush()?;
        }
        Command::PredictBackward {
            source,
            t,
            seeds,
            symbol,
            output,
        } => {
            let config = ExperimentConfig {
                name: None,
                model: parse_model(&source.model)?,
                estimator: EstimatorConfig::Backward {
                    t_values: Some(vec![t]),
                    symbol,
                },
                length: t.max(2),
                seeds,
                scoring: ScoringMode::Pointwise,
                output: None,
            };
            emit(&single_run(&config, &source, true)?, &output.out)?;
        }
        Command::PredictForward {
            source,
            n,
            mode,
            seed,
            stride,
            depth,
            symbol,
            output,
        } => {
            let config = ExperimentConfig {
                name: None,
                model: parse_model(&source.model)?,
                estimator: EstimatorConfig::Forward { depth, stride, symbol },
                length: (n + 1).max(2),
                seeds: SeedRange {
                    first: seed,
                    end: seed + 1,
                },
                scoring: match mode {
                    ForwardMode::Pointwise => ScoringMode::Pointwise,
                    ForwardMode::Cesaro => ScoringMode::Cesaro,
                },
                output: None,
            };
            emit(&single_run(&config, &source, false)?, &output.out)?;
        }
        Command::Stoptime {
            scheme,
            source,
            length,
            seed,
            growth_eps,
            output,
        } => {
            let config = ExperimentConfig {
                name: None,
                model: parse_model(&source.model)?,
                estimator: EstimatorConfig::Stoptime { scheme, growth_eps },
                length,
                seeds: SeedRange {
                    first: seed,
                    end: seed + 1,
                },
                scoring: ScoringMode::Stoptime,
                output: None,
            };
            emit(&single_run(&config, &source, false)?, &output.out)?;
        }
        Command::Memory {
            mode,
            source,
            n,
            gamma,
            beta,
            eps,
            seed,
            words,
            output,
        } => {
            let params = MemoryParams::new(gamma, beta, eps).map_err(|e| config_err(e.to_string()))?;
            let words = if words.is_empty() {
                None
            } else {
                Some(words.iter().map(|w| parse_word(w)).collect::<Result<Vec<_>, _>>()?)
            };
            let times = match (mode, &source.path) {
                (_, Some(_)) => None,
                (MemoryModeArg::Forward | MemoryModeArg::Fm, None) => None,
                (_, None) => Some(vec![n]),
            };
            let config = ExperimentConfig {
                name: None,
                model: parse_model(&source.model)?,
                estimator: EstimatorConfig::Memory {
                    mode: mode.into(),
                    params,
                    times,
                    words,
                },
                length: (n + 1).max(2),
                seeds: SeedRange {
                    first: seed,
                    end: seed + 1,
                },
                scoring: ScoringMode::Memory,
                output: None,
            };
            emit(&single_run(&config, &source, false)?, &output.out)?;
        }
        Command::Experiment { action } => match action {
            ExperimentAction::Run { config, out } => {
                let text = fs::read_to_string(&config)
                    .map_err(|e| config_err(format!("cannot read {}: {e}", config.display())))?;
                let parsed = ExperimentConfig::from_json(&text)?;
                let file = out.or_else(|| parsed.output.clone()).unwrap_or_else(|| {
                    let stem = parsed.name.clone().unwrap_or_else(|| "trace".into());
                    PathBuf::from(format!("{stem}.csv"))
                });
                let file = if file.is_relative() { out_dir.join(file) } else { file };
                let trace = experiment::run(&parsed)?;
                if let Some(parent) = file.parent().filter(|p| !p.as_os_str().is_empty()) {
                    fs::create_dir_all(parent)?;
                }
                trace.table.write_csv(io::BufWriter::new(fs::File::create(&file)?))?;
                let mut meta = file.clone().into_os_string();
                meta.push(".meta.json");
                fs::write(meta, trace.meta_json())?;
            }
            ExperimentAction::Summarize {
                trace,
                quantiles,
                output,
            } => {
                let file = fs::File::open(&trace)
                    .map_err(|e| ExperimentError::Data(format!("cannot read {}: {e}", trace.display())))?;
                let parsed = ParsedTrace::read(io::BufReader::new(file))?;
                emit(&experiment::summarize(&parsed, &quantiles)?, &output.out)?;
            }
        },
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("seqest: {err}");
            match err {
                ExperimentError::Config(_) => ExitCode::from(2),
                ExperimentError::Data(_) => ExitCode::from(3),
                ExperimentError::Io(_) => ExitCode::from(1),
            }
        }
    }
}
