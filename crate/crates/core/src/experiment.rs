//! Seeded replicate runs, CSV traces and summaries.
//!
//! A run samples one path per seed, applies one estimator, scores it
//! against the model oracle and returns a [`Table`]. Replicates are computed
//! in parallel and merged in seed order, so the bytes of a trace depend on
//! the configuration only.

use std::fmt;
use std::io::{Read, Write};
use std::path::PathBuf;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backward::p_hat_of;
use crate::forward::{default_schedule, DepthSchedule, ForwardPredictor};
use crate::memory::{chi_backward, delta_hat, fm_scheme, forward_scheme_sweep, markov_qhat, ordest, MemoryParams};
use crate::process::{
    conditional_row, entropy_rate, memory_length_oracle, sample_path, ConditionalOracle, MemoryLength, ModelConfig,
    ModelError, ProcessModel, Symbol,
};
use crate::stoptime::{growth_report, run_scheme, Scheme};

#[derive(Debug, Error)]
pub enum ExperimentError {
    /// The configuration is malformed or violates an estimator constraint.
    #[error("configuration error: {0}")]
    Config(String),
    /// Input data (a trace or path file) is missing, malformed or empty.
    #[error("data error: {0}")]
    Data(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<ModelError> for ExperimentError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Io(msg) => ExperimentError::Data(msg),
            ModelError::EmptyPath | ModelError::SymbolOutOfRange { .. } | ModelError::ZeroProbabilityPast => {
                ExperimentError::Data(e.to_string())
            }
            other => ExperimentError::Config(other.to_string()),
        }
    }
}

/// Seeds `first..last` (half-open) or `first..=last`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedRange {
    pub first: u64,
    pub end: u64,
}

impl SeedRange {
    pub fn seeds(&self) -> impl Iterator<Item = u64> {
        self.first..self.end
    }

    pub fn len(&self) -> usize {
        (self.end - self.first) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.first
    }
}

impl FromStr for SeedRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("seed range '{s}' is not of the form a..b or a..=b");
        let (a, b, inclusive) = if let Some((a, b)) = s.split_once("..=") {
            (a, b, true)
        } else if let Some((a, b)) = s.split_once("..") {
            (a, b, false)
        } else {
            let single: u64 = s.trim().parse().map_err(|_| bad())?;
            return Ok(SeedRange {
                first: single,
                end: single + 1,
            });
        };
        let first: u64 = a.trim().parse().map_err(|_| bad())?;
        let last: u64 = b.trim().parse().map_err(|_| bad())?;
        let end = if inclusive {
            last.checked_add(1).ok_or_else(bad)?
        } else {
            last
        };
        let range = SeedRange { first, end };
        if range.is_empty() {
            return Err(format!("seed range '{s}' is empty"));
        }
        Ok(range)
    }
}

impl fmt::Display for SeedRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.first, self.end)
    }
}

impl Serialize for SeedRange {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for SeedRange {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoringMode {
    Pointwise,
    Cesaro,
    Stoptime,
    Memory,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MemoryMode {
    Ntest,
    Chi,
    Forward,
    Qhat,
    Fm,
    Ordest,
}

impl FromStr for MemoryMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        serde_json::from_value(serde_json::Value::String(s.to_owned()))
            .map_err(|_| format!("unknown memory mode '{s}'"))
    }
}

impl Serialize for Scheme {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Scheme {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

fn default_symbol() -> Symbol {
    1
}

fn default_stride() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum EstimatorConfig {
    /// Backward estimate at each `t` (default: 1, 2, 4, ... and the path length).
    Backward {
        #[serde(default)]
        t_values: Option<Vec<usize>>,
        #[serde(default = "default_symbol")]
        symbol: Symbol,
    },
    /// Forward estimate at every `stride`-th time; `depth` fixes `K_n`.
    Forward {
        #[serde(default)]
        depth: Option<usize>,
        #[serde(default = "default_stride")]
        stride: usize,
        #[serde(default = "default_symbol")]
        symbol: Symbol,
    },
    /// A stopping-time scheme; `growth_eps` adds the entropy growth check.
    Stoptime {
        scheme: Scheme,
        #[serde(default)]
        growth_eps: Option<f64>,
    },
    /// Memory inference; `times` defaults to the last index of the path.
    Memory {
        mode: MemoryMode,
        #[serde(default)]
        params: MemoryParams,
        #[serde(default)]
        times: Option<Vec<usize>>,
        #[serde(default)]
        words: Option<Vec<Vec<Symbol>>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub model: ModelConfig,
    pub estimator: EstimatorConfig,
    pub length: usize,
    pub seeds: SeedRange,
    pub scoring: ScoringMode,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        let config: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Checks the model, the estimator constraints and the scoring pairing.
    pub fn validate(&self) -> Result<ProcessModel, ExperimentError> {
        let model = ProcessModel::from_config(&self.model)?;
        let bad = |msg: String| Err(ExperimentError::Config(msg));
        if self.length < 2 {
            return bad(format!("length must be at least 2, got {}", self.length));
        }
        if self.seeds.is_empty() {
            return bad("seed range is empty".into());
        }
        let alphabet = model.alphabet().size();
        let scoring_ok = match &self.estimator {
            EstimatorConfig::Backward { t_values, symbol } => {
                check_symbol(*symbol, alphabet)?;
                if let Some(ts) = t_values {
                    if ts.iter().any(|&t| t == 0 || t > self.length) {
                        return bad(format!("t values must lie in 1..={}", self.length));
                    }
                }
                self.scoring == ScoringMode::Pointwise
            }
            EstimatorConfig::Forward { depth, stride, symbol } => {
                check_symbol(*symbol, alphabet)?;
                if *stride == 0 || *depth == Some(0) {
                    return bad("forward stride and depth must be positive".into());
                }
                matches!(self.scoring, ScoringMode::Pointwise | ScoringMode::Cesaro)
            }
            EstimatorConfig::Stoptime { growth_eps, .. } => {
                if let Some(eps) = growth_eps {
                    if eps.is_nan() || *eps <= 0.0 {
                        return bad(format!("growth_eps must be positive, got {eps}"));
                    }
                    entropy_rate(&model)?;
                }
                self.scoring == ScoringMode::Stoptime
            }
            EstimatorConfig::Memory {
                params, times, words, ..
            } => {
                params.validate().map_err(|e| ExperimentError::Config(e.to_string()))?;
                if let Some(ts) = times {
                    if ts.iter().any(|&t| t == 0 || t >= self.length) {
                        return bad(format!("memory times must lie in 1..{}", self.length));
                    }
                }
                for w in words.iter().flatten() {
                    for &s in w {
                        check_symbol(s, alphabet)?;
                    }
                }
                self.scoring == ScoringMode::Memory
            }
        };
        if !scoring_ok {
            return bad(format!(
                "scoring mode {:?} does not apply to this estimator",
                self.scoring
            ));
        }
        Ok(model)
    }
}

fn check_symbol(symbol: Symbol, alphabet: usize) -> Result<(), ExperimentError> {
    if (symbol as usize) < alphabet {
        Ok(())
    } else {
        Err(ExperimentError::Config(format!(
            "symbol {symbol} outside an alphabet of size {alphabet}"
        )))
    }
}

/// One CSV field.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(u64),
    Float(f64),
    Bool(bool),
    Text(String),
    Empty,
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Int(v) => write!(f, "{v}"),
            Cell::Float(v) => f.write_str(&format_float(*v)),
            Cell::Bool(v) => f.write_str(if *v { "1" } else { "0" }),
            Cell::Text(s) => f.write_str(s),
            Cell::Empty => Ok(()),
        }
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Empty, Into::into)
    }
}

/// `%.17g`: 17 significant digits, trailing zeros removed.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_owned()
        } else {
            s.to_owned()
        }
    };
    if !(-4..17).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim(mantissa), exp.abs())
    } else {
        trim(&format!("{:.*}", (16 - exp) as usize, x))
    }
}

/// Header plus rows; written as RFC 4180 CSV with `\n` terminators.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), ExperimentError> {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        let io = |e: csv::Error| ExperimentError::Io(std::io::Error::other(e));
        writer.write_record(&self.columns).map_err(io)?;
        for row in &self.rows {
            writer.write_record(row.iter().map(|c| c.to_string())).map_err(io)?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("csv output is utf-8")
    }
}

fn word_text(word: &[Symbol]) -> String {
    word.iter().map(|s| s.to_string()).collect::<Vec<_>>().join("-")
}

fn doubling_grid(max: usize) -> Vec<usize> {
    let mut grid: Vec<usize> = std::iter::successors(Some(1usize), |&t| t.checked_mul(2))
        .take_while(|&t| t < max)
        .collect();
    grid.push(max);
    grid
}

fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn memory_text(m: MemoryLength) -> Cell {
    match m {
        MemoryLength::Finite(k) => Cell::Int(k as u64),
        MemoryLength::Infinite => Cell::Text("inf".into()),
    }
}

/// Column layout of the rows produced for one replicate.
pub fn columns(config: &ExperimentConfig) -> Vec<&'static str> {
    let mut cols = vec!["replicate", "seed"];
    cols.extend(match &config.estimator {
        EstimatorConfig::Backward { .. } => vec!["t", "kappa_t", "p_hat", "oracle", "abs_err"],
        EstimatorConfig::Forward { .. } => match config.scoring {
            ScoringMode::Cesaro => vec!["n", "kappa", "lambda", "g", "oracle", "abs_err", "cesaro"],
            _ => vec!["n", "kappa", "lambda", "g", "oracle", "abs_err"],
        },
        EstimatorConfig::Stoptime { growth_eps: None, .. } => vec!["k", "time", "estimate", "oracle", "abs_err"],
        EstimatorConfig::Stoptime {
            growth_eps: Some(_), ..
        } => {
            vec!["k", "time", "estimate", "oracle", "abs_err", "within_bound"]
        }
        EstimatorConfig::Memory { mode, .. } => match mode {
            MemoryMode::Ntest => vec!["n", "word", "delta_hat", "threshold", "verdict"],
            MemoryMode::Chi => vec!["n", "chi", "oracle", "match"],
            MemoryMode::Forward => vec!["n", "in_n", "theta", "kappa", "rho", "oracle_rho", "qhat_err"],
            MemoryMode::Qhat => vec!["n", "order", "in_n", "qhat_err"],
            MemoryMode::Fm => vec!["n", "lambda", "kappa", "f", "oracle", "abs_err"],
            MemoryMode::Ordest => vec!["n", "order"],
        },
    });
    cols
}

/// Rows of one replicate, without the leading `replicate, seed` fields.
pub fn replicate_rows(
    config: &ExperimentConfig,
    model: &ProcessModel,
    seed: u64,
) -> Result<Vec<Vec<Cell>>, ExperimentError> {
    let path = sample_path(model, config.length, seed)?;
    path_rows(config, model, path.symbols())
}

/// Rows for a given path; `config.length` is ignored in favour of `x.len()`.
pub fn path_rows(
    config: &ExperimentConfig,
    model: &ProcessModel,
    x: &[Symbol],
) -> Result<Vec<Vec<Cell>>, ExperimentError> {
    if x.len() < 2 {
        return Err(ExperimentError::Data(format!(
            "path of length {} is too short",
            x.len()
        )));
    }
    let length = x.len();
    let alphabet = model.alphabet().size();
    let mut rows = Vec::new();
    match &config.estimator {
        EstimatorConfig::Backward { t_values, symbol } => {
            let oracle = conditional_row(model, x)?[*symbol as usize];
            let ts = t_values.clone().unwrap_or_else(|| doubling_grid(length));
            for t in ts {
                if t > length {
                    return Err(ExperimentError::Data(format!(
                        "t = {t} exceeds the past length {length}"
                    )));
                }
                let e = p_hat_of(x, t, *symbol);
                rows.push(vec![
                    t.into(),
                    e.kappa.into(),
                    e.p_hat.into(),
                    oracle.into(),
                    (e.p_hat - oracle).abs().into(),
                ]);
            }
        }
        EstimatorConfig::Forward { depth, stride, symbol } => {
            let schedule = depth.map_or(default_schedule(alphabet), |depth| DepthSchedule::Fixed { depth });
            let mut predictor = ForwardPredictor::new(x, alphabet, schedule);
            let mut oracle = ConditionalOracle::new(model);
            let mut total = 0.0;
            for (n, &s) in x.iter().enumerate() {
                oracle.push(s)?;
                let truth = oracle.row()?[*symbol as usize];
                let e = predictor.estimate(n);
                let err = (e.g(*symbol) - truth).abs();
                total += err;
                if n % stride == 0 || n + 1 == x.len() {
                    let mut row = vec![
                        n.into(),
                        e.kappa.into(),
                        e.lambda.into(),
                        e.g(*symbol).into(),
                        truth.into(),
                        err.into(),
                    ];
                    if config.scoring == ScoringMode::Cesaro {
                        row.push((total / (n + 1) as f64).into());
                    }
                    rows.push(row);
                }
            }
        }
        EstimatorConfig::Stoptime { scheme, growth_eps } => {
            let trace = run_scheme(*scheme, x);
            let truths = trace.oracle(model, x)?;
            let within = match growth_eps {
                Some(eps) => Some(growth_report(&trace, entropy_rate(model)?, *eps).within),
                None => None,
            };
            let first = if *scheme == Scheme::Morvai2000 { 2 } else { 1 };
            for k in first..trace.len() {
                let est = trace.estimates[k];
                let mut row = vec![
                    k.into(),
                    trace.times[k].into(),
                    est.into(),
                    truths[k].into(),
                    (est - truths[k]).abs().into(),
                ];
                if let Some(w) = &within {
                    row.push(w[k].into());
                }
                rows.push(row);
            }
        }
        EstimatorConfig::Memory {
            mode,
            params,
            times,
            words,
        } => {
            let times = times.clone().unwrap_or_else(|| vec![length - 1]);
            if let Some(&n) = times.iter().find(|&&n| n >= length) {
                return Err(ExperimentError::Data(format!(
                    "time {n} lies beyond the path of length {length}"
                )));
            }
            match mode {
                MemoryMode::Ntest => {
                    let words = words
                        .clone()
                        .unwrap_or_else(|| (0..alphabet).map(|s| vec![s as Symbol]).collect());
                    for &n in &times {
                        for w in &words {
                            let d = delta_hat(&x[..=n], n, w, params);
                            let cut = params.test_cut(n);
                            rows.push(vec![
                                n.into(),
                                Cell::Text(word_text(w)),
                                d.into(),
                                cut.into(),
                                (d <= cut).into(),
                            ]);
                        }
                    }
                }
                MemoryMode::Chi => {
                    for &n in &times {
                        let chi = chi_backward(&x[..=n], n, params);
                        let oracle = memory_length_oracle(model, &x[..=n])?;
                        let matched = oracle.finite() == Some(chi);
                        rows.push(vec![n.into(), chi.into(), memory_text(oracle), matched.into()]);
                    }
                }
                MemoryMode::Forward => {
                    let verdicts = forward_scheme_sweep(x, 1..length, alphabet, params);
                    for v in verdicts {
                        let (oracle_rho, qhat_err) = if v.in_n {
                            let past = &x[..=v.n];
                            let rho = memory_text(memory_length_oracle(model, past)?);
                            let err = match &v.qhat {
                                Some(q) => Cell::Float(sup_distance(q, &conditional_row(model, past)?)),
                                None => Cell::Empty,
                            };
                            (rho, err)
                        } else {
                            (Cell::Empty, Cell::Empty)
                        };
                        rows.push(vec![
                            v.n.into(),
                            v.in_n.into(),
                            v.theta.into(),
                            v.kappa.into(),
                            v.rho.into(),
                            oracle_rho,
                            qhat_err,
                        ]);
                    }
                }
                MemoryMode::Qhat => {
                    for &n in &times {
                        let q = markov_qhat(x, n, alphabet, params);
                        let err = match &q.row {
                            Some(row) => Cell::Float(sup_distance(row, &conditional_row(model, &x[..=n])?)),
                            None => Cell::Empty,
                        };
                        rows.push(vec![n.into(), q.order.into(), q.in_n.into(), err]);
                    }
                }
                MemoryMode::Fm => {
                    let trace = fm_scheme(x, params, |s| f64::from(s == 1));
                    let mut oracle = ConditionalOracle::new(model);
                    let mut fed = 0;
                    for step in &trace.steps[1..] {
                        while fed <= step.lambda {
                            oracle.push(x[fed])?;
                            fed += 1;
                        }
                        let truth = oracle.row()?.get(1).copied().unwrap_or(0.0);
                        rows.push(vec![
                            step.n.into(),
                            step.lambda.into(),
                            step.kappa.into(),
                            step.f.into(),
                            truth.into(),
                            (step.f - truth).abs().into(),
                        ]);
                    }
                }
                MemoryMode::Ordest => {
                    for &n in &times {
                        rows.push(vec![n.into(), ordest(x, n, params).into()]);
                    }
                }
            }
        }
    }
    Ok(rows)
}

/// Sidecar record written next to a trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub artifact: String,
    pub config: ExperimentConfig,
    pub columns: Vec<String>,
    pub replicates: Vec<ReplicateMeta>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicateMeta {
    pub replicate: usize,
    pub seed: u64,
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceFile {
    pub table: Table,
    pub meta: TraceMeta,
}

impl TraceFile {
    pub fn meta_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.meta).expect("metadata serializes");
        s.push('\n');
        s
    }
}

pub fn artifact_version() -> String {
    format!("seqest {}", env!("CARGO_PKG_VERSION"))
}

/// Runs every replicate of the experiment.
pub fn run(config: &ExperimentConfig) -> Result<TraceFile, ExperimentError> {
    let model = config.validate()?;
    let seeds: Vec<u64> = config.seeds.seeds().collect();
    let blocks: Vec<Vec<Vec<Cell>>> = seeds
        .par_iter()
        .map(|&seed| replicate_rows(config, &model, seed))
        .collect::<Result<_, _>>()?;
    let columns = columns(config);
    let mut table = Table::new(&columns);
    let mut replicates = Vec::with_capacity(seeds.len());
    for (replicate, (seed, rows)) in seeds.iter().zip(blocks).enumerate() {
        replicates.push(ReplicateMeta {
            replicate,
            seed: *seed,
            rows: rows.len(),
        });
        for row in rows {
            let mut full = vec![Cell::from(replicate), Cell::from(*seed)];
            full.extend(row);
            table.push(full);
        }
    }
    let meta = TraceMeta {
        artifact: artifact_version(),
        config: config.clone(),
        columns: table.columns.clone(),
        replicates,
    };
    Ok(TraceFile { table, meta })
}

/// A trace read back from CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedTrace {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl ParsedTrace {
    pub fn read<R: Read>(input: R) -> Result<Self, ExperimentError> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
        let data = |e: csv::Error| ExperimentError::Data(e.to_string());
        let columns: Vec<String> = reader.headers().map_err(data)?.iter().map(str::to_owned).collect();
        let rows = reader
            .records()
            .map(|r| r.map(|rec| rec.iter().map(str::to_owned).collect()))
            .collect::<Result<Vec<Vec<String>>, _>>()
            .map_err(data)?;
        Ok(ParsedTrace { columns, rows })
    }

    fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}

/// Order statistic `x_(ceil(q m))` of `m` sorted values (the minimum for `q = 0`).
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let m = sorted.len();
    let rank = ((q * m as f64).ceil() as usize).clamp(1, m);
    sorted[rank - 1]
}

/// Summary rows `(section, key, statistic, value)`:
/// * `error`: quantiles of `abs_err` (or `qhat_err`) across replicates at each index;
/// * `density`: fraction of `in_n` rows per replicate;
/// * `growth`: fraction of replicates within the growth bound at each `k`.
pub fn summarize(trace: &ParsedTrace, quantiles: &[f64]) -> Result<Table, ExperimentError> {
    if trace.rows.is_empty() {
        return Err(ExperimentError::Data("the trace has no rows to summarize".into()));
    }
    if quantiles.iter().any(|q| !(0.0..=1.0).contains(q)) {
        return Err(ExperimentError::Config("quantiles must lie in [0, 1]".into()));
    }
    let replicate = trace
        .column("replicate")
        .ok_or_else(|| ExperimentError::Data("trace lacks a replicate column".into()))?;
    let key = replicate + 2;
    if trace.columns.len() <= key {
        return Err(ExperimentError::Data("trace lacks an index column".into()));
    }
    let parse_int = |s: &str| -> Result<u64, ExperimentError> {
        s.parse()
            .map_err(|_| ExperimentError::Data(format!("'{s}' is not an integer")))
    };
    let mut out = Table::new(&["section", "key", "statistic", "value"]);

    let err_col = trace.column("abs_err").or_else(|| trace.column("qhat_err"));
    if let Some(col) = err_col {
        let mut groups: std::collections::BTreeMap<u64, Vec<f64>> = Default::default();
        for row in &trace.rows {
            if row[col].is_empty() {
                continue;
            }
            let v: f64 = row[col]
                .parse()
                .map_err(|_| ExperimentError::Data(format!("'{}' is not a number", row[col])))?;
            groups.entry(parse_int(&row[key])?).or_default().push(v);
        }
        for (k, mut values) in groups {
            values.sort_by(f64::total_cmp);
            out.push(vec![
                Cell::Text("error".into()),
                k.into(),
                Cell::Text("count".into()),
                values.len().into(),
            ]);
            for &q in quantiles {
                out.push(vec![
                    Cell::Text("error".into()),
                    k.into(),
                    Cell::Text(format!("q{q}")),
                    quantile(&values, q).into(),
                ]);
            }
        }
    }
    for (flag, section, group_col) in [("in_n", "density", replicate), ("within_bound", "growth", key)] {
        let Some(col) = trace.column(flag) else { continue };
        let mut groups: std::collections::BTreeMap<u64, (usize, usize)> = Default::default();
        for row in &trace.rows {
            let entry = groups.entry(parse_int(&row[group_col])?).or_default();
            entry.0 += usize::from(row[col] == "1");
            entry.1 += 1;
        }
        for (k, (hits, total)) in groups {
            out.push(vec![
                Cell::Text(section.into()),
                k.into(),
                Cell::Text("fraction".into()),
                (hits as f64 / total as f64).into(),
            ]);
        }
    }
    Ok(out)
}
