//! Generative process models with exact oracles.
//!
//! Four model classes are supported: i.i.d. rows, finite-order Markov chains,
//! indicator functions of a hidden first-order chain, and stationary binary
//! renewal processes. Every model can
//!
//! - draw stationary sample paths, reproducibly from `(seed, replicate)`,
//! - report the exact next-symbol law given any finite past,
//! - report the memory length of a past (for the classes where it is known),
//! - and, for i.i.d. and Markov models, its entropy rate.
//!
//! Hidden-function and renewal models are both handled as Markov chains with
//! a deterministic emission per state, so their conditional law is an exact
//! forward filter over the hidden state.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A symbol of a finite alphabet. Alphabets are capped at 256 symbols.
pub type Symbol = u8;

/// Largest supported alphabet.
pub const MAX_ALPHABET: usize = 256;

/// Largest number of contexts (`alphabet^order`) a Markov model may have.
pub const MAX_CONTEXTS: usize = 1 << 16;

const ROW_SUM_TOLERANCE: f64 = 1e-12;
const STATIONARY_TOLERANCE: f64 = 1e-10;
const POWER_ITERATION_CAP: usize = 2_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("alphabet size {0} is outside 1..=256")]
    InvalidAlphabet(usize),
    #[error("row {row}: {detail}")]
    InvalidRow { row: usize, detail: String },
    #[error("malformed model: {0}")]
    Malformed(String),
    #[error("transition matrix is not irreducible/aperiodic at tolerance (residual {residual:e})")]
    NotErgodic { residual: f64 },
    #[error("symbol {symbol} is out of range for alphabet of size {alphabet}")]
    SymbolOutOfRange { symbol: usize, alphabet: usize },
    #[error("the observed past has probability zero under the model")]
    ZeroProbabilityPast,
    #[error("{what} is not available for {model} models")]
    Unsupported { what: &'static str, model: &'static str },
    #[error("past of length {len} is too short to determine the memory length (order {order})")]
    PastTooShort { len: usize, order: usize },
    #[error("sample paths must contain at least one symbol")]
    EmptyPath,
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for ModelError {
    fn from(err: std::io::Error) -> Self {
        ModelError::Io(err.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct Alphabet(usize);

impl Alphabet {
    pub const BINARY: Alphabet = Alphabet(2);

    pub fn new(size: usize) -> Result<Self, ModelError> {
        if size == 0 || size > MAX_ALPHABET {
            return Err(ModelError::InvalidAlphabet(size));
        }
        Ok(Alphabet(size))
    }

    pub fn size(self) -> usize {
        self.0
    }

    pub fn check(self, symbol: Symbol) -> Result<(), ModelError> {
        if (symbol as usize) < self.0 {
            Ok(())
        } else {
            Err(ModelError::SymbolOutOfRange {
                symbol: symbol as usize,
                alphabet: self.0,
            })
        }
    }
}

impl TryFrom<usize> for Alphabet {
    type Error = ModelError;

    fn try_from(size: usize) -> Result<Self, Self::Error> {
        Alphabet::new(size)
    }
}

impl From<Alphabet> for usize {
    fn from(a: Alphabet) -> usize {
        a.0
    }
}

/// A finite one-sided realization `X_0, ..., X_n`.
///
/// Backward-indexed pasts use the convention `X_{-i} = symbols[len - i]`,
/// so the last stored symbol is `X_{-1}` when a path is read as a past.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamplePath {
    symbols: Vec<Symbol>,
    alphabet: Alphabet,
}

impl SamplePath {
    pub fn new(symbols: Vec<Symbol>, alphabet: Alphabet) -> Result<Self, ModelError> {
        if symbols.is_empty() {
            return Err(ModelError::EmptyPath);
        }
        for &s in &symbols {
            alphabet.check(s)?;
        }
        Ok(SamplePath { symbols, alphabet })
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    pub fn into_symbols(self) -> Vec<Symbol> {
        self.symbols
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Writes the path as an 8-byte little-endian length followed by one byte per symbol.
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<(), ModelError> {
        out.write_all(&(self.symbols.len() as u64).to_le_bytes())?;
        out.write_all(&self.symbols)?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut input: R, alphabet: Alphabet) -> Result<Self, ModelError> {
        let mut header = [0u8; 8];
        input.read_exact(&mut header)?;
        let len = u64::from_le_bytes(header) as usize;
        let mut symbols = vec![0u8; len];
        input.read_exact(&mut symbols)?;
        SamplePath::new(symbols, alphabet)
    }
}

fn validate_row(row: &[f64], index: usize, width: usize) -> Result<(), ModelError> {
    if row.len() != width {
        return Err(ModelError::InvalidRow {
            row: index,
            detail: format!("expected {width} entries, found {}", row.len()),
        });
    }
    if let Some(bad) = row.iter().find(|p| !p.is_finite() || **p < 0.0 || **p > 1.0) {
        return Err(ModelError::InvalidRow {
            row: index,
            detail: format!("entry {bad} is not a probability"),
        });
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
        return Err(ModelError::InvalidRow {
            row: index,
            detail: format!("sums to {sum}"),
        });
    }
    Ok(())
}

/// A finite-order Markov chain over a finite alphabet.
///
/// Contexts are words of length `order`, indexed in base `alphabet` with the
/// oldest symbol most significant.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovSpec {
    alphabet: Alphabet,
    order: usize,
    rows: Vec<f64>,
    stationary: Vec<f64>,
}

impl MarkovSpec {
    pub fn new(alphabet: Alphabet, order: usize, rows: Vec<Vec<f64>>) -> Result<Self, ModelError> {
        let a = alphabet.size();
        let contexts = context_count(a, order)?;
        if rows.len() != contexts {
            return Err(ModelError::Malformed(format!(
                "order-{order} chain over {a} symbols needs {contexts} rows, found {}",
                rows.len()
            )));
        }
        for (i, row) in rows.iter().enumerate() {
            validate_row(row, i, a)?;
        }
        let mut spec = MarkovSpec {
            alphabet,
            order,
            rows: rows.concat(),
            stationary: Vec::new(),
        };
        spec.stationary = stationary_distribution(&spec)?;
        Ok(spec)
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn context_count(&self) -> usize {
        self.rows.len() / self.alphabet.size()
    }

    pub fn row(&self, context: usize) -> &[f64] {
        let a = self.alphabet.size();
        &self.rows[context * a..(context + 1) * a]
    }

    /// Stationary law over contexts (over symbols for an order-0 chain).
    pub fn stationary(&self) -> &[f64] {
        &self.stationary
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.rows.chunks(self.alphabet.size()).map(<[f64]>::to_vec).collect()
    }

    fn successor(&self, context: usize, symbol: usize) -> usize {
        if self.order == 0 {
            0
        } else {
            (context * self.alphabet.size() + symbol) % self.context_count()
        }
    }

    /// Index of the context formed by the last `order` symbols of `word`.
    pub fn context_of(&self, word: &[Symbol]) -> usize {
        debug_assert!(word.len() >= self.order);
        let a = self.alphabet.size();
        word[word.len() - self.order..]
            .iter()
            .fold(0, |acc, &s| acc * a + s as usize)
    }
}

fn context_count(alphabet: usize, order: usize) -> Result<usize, ModelError> {
    let mut n: usize = 1;
    for _ in 0..order {
        n = n.checked_mul(alphabet).filter(|&n| n <= MAX_CONTEXTS).ok_or_else(|| {
            ModelError::Malformed(format!("{alphabet}^{order} contexts exceed the cap of {MAX_CONTEXTS}"))
        })?;
    }
    Ok(n)
}

/// Stationary law of a Markov chain.
///
/// For `order >= 1` this is the law of the context `(X_{t-order+1}, ..., X_t)`;
/// for an order-0 chain it is the symbol law itself. Solved by power
/// iteration on the lazy chain `(I + P) / 2`, which has the same fixed points
/// and converges for periodic chains too.
pub fn stationary_distribution(spec: &MarkovSpec) -> Result<Vec<f64>, ModelError> {
    if spec.order == 0 {
        return Ok(spec.row(0).to_vec());
    }
    let n = spec.context_count();
    let step = |pi: &[f64], out: &mut [f64]| {
        out.iter_mut().for_each(|x| *x = 0.0);
        for (c, &mass) in pi.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            for (y, &p) in spec.row(c).iter().enumerate() {
                if p > 0.0 {
                    out[spec.successor(c, y)] += mass * p;
                }
            }
        }
    };
    let mut pi = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for _ in 0..POWER_ITERATION_CAP {
        step(&pi, &mut next);
        residual = pi.iter().zip(&next).map(|(p, q)| (p - q).abs()).sum();
        for (p, q) in pi.iter_mut().zip(&next) {
            *p = 0.5 * (*p + q);
        }
        if residual < 1e-15 {
            break;
        }
    }
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|p| *p /= total);
    step(&pi, &mut next);
    residual = residual.min(pi.iter().zip(&next).map(|(p, q)| (p - q).abs()).sum());
    if residual > STATIONARY_TOLERANCE || !has_single_closed_class(spec, &pi) {
        return Err(ModelError::NotErgodic { residual });
    }
    // transient states keep a geometrically small residue; clear it
    let recurrent = reachable_from(spec, heaviest(&pi));
    for (p, keep) in pi.iter_mut().zip(&recurrent) {
        if !keep {
            *p = 0.0;
        }
    }
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|p| *p /= total);
    Ok(pi)
}

fn heaviest(pi: &[f64]) -> usize {
    pi.iter()
        .enumerate()
        .max_by(|x, y| x.1.total_cmp(y.1))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

fn reachable_from(spec: &MarkovSpec, start: usize) -> Vec<bool> {
    let mut seen = vec![false; spec.context_count()];
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(c) = stack.pop() {
        for (y, &p) in spec.row(c).iter().enumerate() {
            let next = spec.successor(c, y);
            if p > 0.0 && !seen[next] {
                seen[next] = true;
                stack.push(next);
            }
        }
    }
    seen
}

/// A finite chain has a unique stationary law iff some state is reachable
/// from every state; the heaviest stationary state is the only candidate
/// that needs checking.
fn has_single_closed_class(spec: &MarkovSpec, pi: &[f64]) -> bool {
    let n = spec.context_count();
    let a = spec.alphabet.size();
    let target = heaviest(pi);
    let mut predecessors: Vec<Vec<usize>> = vec![Vec::new(); n];
    for c in 0..n {
        for y in 0..a {
            if spec.row(c)[y] > 0.0 {
                predecessors[spec.successor(c, y)].push(c);
            }
        }
    }
    let mut seen = vec![false; n];
    let mut stack = vec![target];
    seen[target] = true;
    while let Some(s) = stack.pop() {
        for &p in &predecessors[s] {
            if !seen[p] {
                seen[p] = true;
                stack.push(p);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// `X_n = 1{M_n = s}` for a hidden first-order chain `M`.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenFunctionSpec {
    chain: MarkovSpec,
    distinguished: usize,
}

impl HiddenFunctionSpec {
    pub fn new(chain: MarkovSpec, distinguished: usize) -> Result<Self, ModelError> {
        if chain.order() != 1 {
            return Err(ModelError::Malformed("the hidden chain must have order 1".into()));
        }
        if distinguished >= chain.alphabet().size() {
            return Err(ModelError::Malformed(format!(
                "distinguished state {distinguished} does not exist"
            )));
        }
        if chain.stationary()[distinguished] <= 0.0 {
            return Err(ModelError::Malformed(format!(
                "distinguished state {distinguished} has zero stationary probability"
            )));
        }
        Ok(HiddenFunctionSpec { chain, distinguished })
    }

    pub fn chain(&self) -> &MarkovSpec {
        &self.chain
    }

    pub fn distinguished(&self) -> usize {
        self.distinguished
    }

    fn emission(&self, state: usize) -> Symbol {
        Symbol::from(state == self.distinguished)
    }
}

/// Stationary binary renewal process with interarrival law on `{1, ..., L}`.
///
/// Internally a chain on the age `a` (time since the last 1, `a = 0` on a 1):
/// from age `a` the next symbol is 1 with the hazard `h(a + 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RenewalSpec {
    pmf: Vec<f64>,
    survival: Vec<f64>,
    age_law: Vec<f64>,
}

impl RenewalSpec {
    /// `pmf[i]` is `P(T = i + 1)`.
    pub fn new(pmf: Vec<f64>) -> Result<Self, ModelError> {
        validate_row(&pmf, 0, pmf.len())?;
        let mut pmf = pmf;
        while pmf.last() == Some(&0.0) {
            pmf.pop();
        }
        if pmf.is_empty() {
            return Err(ModelError::Malformed("empty interarrival law".into()));
        }
        // survival[a] = P(T > a) for a = 0..L-1
        let mut survival = vec![0.0; pmf.len()];
        let mut tail = 0.0;
        for a in (0..pmf.len()).rev() {
            tail += pmf[a];
            survival[a] = tail;
        }
        let mean: f64 = survival.iter().sum();
        let age_law = survival.iter().map(|s| s / mean).collect();
        Ok(RenewalSpec { pmf, survival, age_law })
    }

    pub fn interarrival(&self) -> &[f64] {
        &self.pmf
    }

    pub fn mean_interarrival(&self) -> f64 {
        self.survival.iter().sum()
    }

    /// `h(k) = P(T = k) / P(T >= k)` for `k >= 1`.
    pub fn hazard(&self, k: usize) -> f64 {
        if k == 0 || k > self.pmf.len() {
            return 0.0;
        }
        self.pmf[k - 1] / self.survival[k - 1]
    }

    /// Stationary law of the age.
    pub fn age_law(&self) -> &[f64] {
        &self.age_law
    }
}

/// The supported model classes.
#[derive(Debug, Clone, PartialEq)]
pub enum ProcessModel {
    Iid { alphabet: Alphabet, probs: Vec<f64> },
    Markov(MarkovSpec),
    Hidden(HiddenFunctionSpec),
    Renewal(RenewalSpec),
}

impl ProcessModel {
    pub fn iid(probs: Vec<f64>) -> Result<Self, ModelError> {
        let alphabet = Alphabet::new(probs.len())?;
        validate_row(&probs, 0, probs.len())?;
        Ok(ProcessModel::Iid { alphabet, probs })
    }

    pub fn bernoulli(p: f64) -> Result<Self, ModelError> {
        ProcessModel::iid(vec![1.0 - p, p])
    }

    pub fn markov(alphabet: usize, order: usize, rows: Vec<Vec<f64>>) -> Result<Self, ModelError> {
        Ok(ProcessModel::Markov(MarkovSpec::new(
            Alphabet::new(alphabet)?,
            order,
            rows,
        )?))
    }

    /// Symmetric binary order-1 chain that flips with probability `p`.
    pub fn binary_flip(p: f64) -> Result<Self, ModelError> {
        ProcessModel::markov(2, 1, vec![vec![1.0 - p, p], vec![p, 1.0 - p]])
    }

    pub fn hidden(transitions: Vec<Vec<f64>>, distinguished: usize) -> Result<Self, ModelError> {
        let chain = MarkovSpec::new(Alphabet::new(transitions.len())?, 1, transitions)?;
        Ok(ProcessModel::Hidden(HiddenFunctionSpec::new(chain, distinguished)?))
    }

    pub fn renewal(pmf: Vec<f64>) -> Result<Self, ModelError> {
        Ok(ProcessModel::Renewal(RenewalSpec::new(pmf)?))
    }

    /// The three-state hidden chain `0 -> 1 -> 2 -> {0, 1}` observed through
    /// the indicator of state 0. Finitarily Markovian but not Markov of any order.
    pub fn example_one() -> Self {
        ProcessModel::hidden(vec![vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![0.5, 0.5, 0.0]], 0)
            .expect("built-in model is well formed")
    }

    pub fn alphabet(&self) -> Alphabet {
        match self {
            ProcessModel::Iid { alphabet, .. } => *alphabet,
            ProcessModel::Markov(spec) => spec.alphabet(),
            ProcessModel::Hidden(_) | ProcessModel::Renewal(_) => Alphabet::BINARY,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ProcessModel::Iid { .. } => "iid",
            ProcessModel::Markov(_) => "markov",
            ProcessModel::Hidden(_) => "hidden",
            ProcessModel::Renewal(_) => "renewal",
        }
    }

    pub fn from_config(config: &ModelConfig) -> Result<Self, ModelError> {
        let expect_alphabet = |declared: usize, actual: usize| {
            if declared == actual {
                Ok(())
            } else {
                Err(ModelError::Malformed(format!(
                    "declared alphabet {declared} but the model emits {actual} symbols"
                )))
            }
        };
        match config {
            ModelConfig::Iid { alphabet, probs } => {
                expect_alphabet(*alphabet, probs.len())?;
                ProcessModel::iid(probs.clone())
            }
            ModelConfig::Markov {
                alphabet,
                order,
                transitions,
            } => ProcessModel::markov(*alphabet, *order, transitions.clone()),
            ModelConfig::Hidden {
                alphabet,
                transitions,
                distinguished,
            } => {
                expect_alphabet(*alphabet, 2)?;
                ProcessModel::hidden(transitions.clone(), *distinguished)
            }
            ModelConfig::Renewal { alphabet, interarrival } => {
                expect_alphabet(*alphabet, 2)?;
                ProcessModel::renewal(interarrival.clone())
            }
        }
    }

    pub fn to_config(&self) -> ModelConfig {
        match self {
            ProcessModel::Iid { alphabet, probs } => ModelConfig::Iid {
                alphabet: alphabet.size(),
                probs: probs.clone(),
            },
            ProcessModel::Markov(spec) => ModelConfig::Markov {
                alphabet: spec.alphabet().size(),
                order: spec.order(),
                transitions: spec.rows(),
            },
            ProcessModel::Hidden(spec) => ModelConfig::Hidden {
                alphabet: 2,
                transitions: spec.chain().rows(),
                distinguished: spec.distinguished(),
            },
            ProcessModel::Renewal(spec) => ModelConfig::Renewal {
                alphabet: 2,
                interarrival: spec.interarrival().to_vec(),
            },
        }
    }
}

fn binary() -> usize {
    2
}

/// JSON form of a model: `{"type": "markov" | "hidden" | "renewal" | "iid", "alphabet": k, ...}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ModelConfig {
    Iid {
        alphabet: usize,
        probs: Vec<f64>,
    },
    Markov {
        alphabet: usize,
        order: usize,
        transitions: Vec<Vec<f64>>,
    },
    Hidden {
        #[serde(default = "binary")]
        alphabet: usize,
        transitions: Vec<Vec<f64>>,
        distinguished: usize,
    },
    Renewal {
        #[serde(default = "binary")]
        alphabet: usize,
        interarrival: Vec<f64>,
    },
}

fn draw(cumulative: &[f64], u: f64) -> usize {
    let i = cumulative.partition_point(|&c| c <= u);
    if i < cumulative.len() {
        return i;
    }
    // u landed past a total that rounded below 1: take the last symbol with mass
    let mut last = cumulative.len() - 1;
    while last > 0 && cumulative[last] == cumulative[last - 1] {
        last -= 1;
    }
    last
}

fn cumulative(row: &[f64]) -> Vec<f64> {
    row.iter()
        .scan(0.0, |acc, p| {
            *acc += p;
            Some(*acc)
        })
        .collect()
}

enum SamplerState {
    Iid {
        table: Vec<f64>,
    },
    Markov {
        tables: Vec<Vec<f64>>,
        context: usize,
        pending: Vec<Symbol>,
    },
    Hidden {
        tables: Vec<Vec<f64>>,
        state: Option<usize>,
    },
    Renewal {
        age: Option<usize>,
    },
}

/// Endless stationary sample stream; `sample_path` is a prefix of it.
pub struct PathSampler<'a> {
    model: &'a ProcessModel,
    rng: ChaCha8Rng,
    state: SamplerState,
}

impl<'a> PathSampler<'a> {
    pub fn new(model: &'a ProcessModel, seed: u64, replicate: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(replicate);
        let state = match model {
            ProcessModel::Iid { probs, .. } => SamplerState::Iid {
                table: cumulative(probs),
            },
            ProcessModel::Markov(spec) => {
                let tables = (0..spec.context_count()).map(|c| cumulative(spec.row(c))).collect();
                SamplerState::Markov {
                    tables,
                    context: usize::MAX,
                    pending: Vec::new(),
                }
            }
            ProcessModel::Hidden(spec) => {
                let chain = spec.chain();
                let tables = (0..chain.context_count()).map(|c| cumulative(chain.row(c))).collect();
                SamplerState::Hidden { tables, state: None }
            }
            ProcessModel::Renewal(_) => SamplerState::Renewal { age: None },
        };
        PathSampler { model, rng, state }
    }

    pub fn take_path(&mut self, length: usize) -> Result<SamplePath, ModelError> {
        let symbols: Vec<Symbol> = self.by_ref().take(length).collect();
        SamplePath::new(symbols, self.model.alphabet())
    }
}

impl Iterator for PathSampler<'_> {
    type Item = Symbol;

    fn next(&mut self) -> Option<Symbol> {
        let u: f64 = self.rng.gen();
        let symbol = match (&mut self.state, self.model) {
            (SamplerState::Iid { table }, _) => draw(table, u) as Symbol,
            (
                SamplerState::Markov {
                    tables,
                    context,
                    pending,
                },
                ProcessModel::Markov(spec),
            ) => {
                if *context == usize::MAX {
                    // stationary start: draw the whole initial context at once
                    let c = draw(&cumulative(spec.stationary()), u);
                    if spec.order() == 0 {
                        *context = 0;
                        return Some(c as Symbol);
                    }
                    *context = c;
                    let a = spec.alphabet().size();
                    let mut word = Vec::with_capacity(spec.order());
                    let mut rest = c;
                    for _ in 0..spec.order() {
                        word.push((rest % a) as Symbol);
                        rest /= a;
                    }
                    // word is newest-first; pending is popped from the back
                    *pending = word;
                    pending.pop().expect("order >= 1")
                } else if let Some(s) = pending.pop() {
                    return Some(s);
                } else {
                    let y = draw(&tables[*context], u);
                    *context = spec.successor(*context, y);
                    y as Symbol
                }
            }
            (SamplerState::Hidden { tables, state }, ProcessModel::Hidden(spec)) => {
                let next = match *state {
                    None => draw(&cumulative(spec.chain().stationary()), u),
                    Some(m) => draw(&tables[m], u),
                };
                *state = Some(next);
                spec.emission(next)
            }
            (SamplerState::Renewal { age }, ProcessModel::Renewal(spec)) => {
                let next = match *age {
                    None => draw(&cumulative(spec.age_law()), u),
                    Some(a) => {
                        if u < spec.hazard(a + 1) {
                            0
                        } else {
                            a + 1
                        }
                    }
                };
                *age = Some(next);
                Symbol::from(next == 0)
            }
            _ => unreachable!("sampler state always matches its model"),
        };
        Some(symbol)
    }
}

/// Draws a stationary path of `length` symbols; a pure function of its inputs.
pub fn sample_path(model: &ProcessModel, length: usize, seed: u64) -> Result<SamplePath, ModelError> {
    sample_replicate(model, length, seed, 0)
}

/// Like [`sample_path`] but on an independent stream per replicate index.
pub fn sample_replicate(
    model: &ProcessModel,
    length: usize,
    seed: u64,
    replicate: u64,
) -> Result<SamplePath, ModelError> {
    PathSampler::new(model, seed, replicate).take_path(length)
}

enum OracleState {
    Iid,
    Markov { context: usize, seen: usize },
    Filter { predictive: Vec<f64>, scratch: Vec<f64> },
}

/// Streaming exact predictor `P(X_{n+1} = . | X_0^n)`.
pub struct ConditionalOracle<'a> {
    model: &'a ProcessModel,
    state: OracleState,
}

impl<'a> ConditionalOracle<'a> {
    pub fn new(model: &'a ProcessModel) -> Self {
        let state = match model {
            ProcessModel::Iid { .. } => OracleState::Iid,
            ProcessModel::Markov(_) => OracleState::Markov { context: 0, seen: 0 },
            ProcessModel::Hidden(spec) => OracleState::Filter {
                predictive: spec.chain().stationary().to_vec(),
                scratch: vec![0.0; spec.chain().context_count()],
            },
            ProcessModel::Renewal(spec) => OracleState::Filter {
                predictive: spec.age_law().to_vec(),
                scratch: vec![0.0; spec.age_law().len()],
            },
        };
        ConditionalOracle { model, state }
    }

    pub fn push(&mut self, symbol: Symbol) -> Result<(), ModelError> {
        self.model.alphabet().check(symbol)?;
        match (&mut self.state, self.model) {
            (OracleState::Iid, _) => {}
            (OracleState::Markov { context, seen }, ProcessModel::Markov(spec)) => {
                if spec.order() > 0 {
                    *context = spec.successor(*context, symbol as usize);
                    *seen = (*seen + 1).min(spec.order());
                }
            }
            (OracleState::Filter { predictive, scratch }, ProcessModel::Hidden(spec)) => {
                let mut total = 0.0;
                for (m, p) in predictive.iter_mut().enumerate() {
                    if spec.emission(m) != symbol {
                        *p = 0.0;
                    }
                    total += *p;
                }
                if total <= 0.0 {
                    return Err(ModelError::ZeroProbabilityPast);
                }
                scratch.iter_mut().for_each(|x| *x = 0.0);
                let chain = spec.chain();
                for (m, &p) in predictive.iter().enumerate() {
                    if p > 0.0 {
                        for (next, &q) in chain.row(m).iter().enumerate() {
                            scratch[next] += p / total * q;
                        }
                    }
                }
                std::mem::swap(predictive, scratch);
            }
            (OracleState::Filter { predictive, scratch }, ProcessModel::Renewal(spec)) => {
                let mut total = 0.0;
                for (age, p) in predictive.iter_mut().enumerate() {
                    if Symbol::from(age == 0) != symbol {
                        *p = 0.0;
                    }
                    total += *p;
                }
                if total <= 0.0 {
                    return Err(ModelError::ZeroProbabilityPast);
                }
                scratch.iter_mut().for_each(|x| *x = 0.0);
                for (age, &p) in predictive.iter().enumerate() {
                    if p > 0.0 {
                        let h = spec.hazard(age + 1);
                        scratch[0] += p / total * h;
                        if age + 1 < scratch.len() {
                            scratch[age + 1] += p / total * (1.0 - h);
                        }
                    }
                }
                std::mem::swap(predictive, scratch);
            }
            _ => unreachable!("oracle state always matches its model"),
        }
        Ok(())
    }

    /// Next-symbol law given everything pushed so far; sums to 1.
    pub fn row(&self) -> Result<Vec<f64>, ModelError> {
        let mut row = match (&self.state, self.model) {
            (OracleState::Iid, ProcessModel::Iid { probs, .. }) => probs.clone(),
            (OracleState::Markov { context, seen }, ProcessModel::Markov(spec)) => {
                if *seen == spec.order() {
                    spec.row(*context).to_vec()
                } else {
                    marginal_row(spec, *context, *seen)?
                }
            }
            (OracleState::Filter { predictive, .. }, ProcessModel::Hidden(spec)) => {
                let mut row = vec![0.0; 2];
                for (m, &p) in predictive.iter().enumerate() {
                    row[spec.emission(m) as usize] += p;
                }
                row
            }
            (OracleState::Filter { predictive, .. }, ProcessModel::Renewal(_)) => {
                let one = predictive[0];
                let zero: f64 = predictive[1..].iter().sum();
                vec![zero, one]
            }
            _ => unreachable!("oracle state always matches its model"),
        };
        let total: f64 = row.iter().sum();
        if total <= 0.0 {
            return Err(ModelError::ZeroProbabilityPast);
        }
        row.iter_mut().for_each(|p| *p /= total);
        Ok(row)
    }
}

/// Next-symbol law when fewer than `order` symbols are known: average the
/// rows of all contexts ending in the known suffix, weighted by their
/// stationary mass.
fn marginal_row(spec: &MarkovSpec, context: usize, seen: usize) -> Result<Vec<f64>, ModelError> {
    let a = spec.alphabet().size();
    let modulus = a.pow(seen as u32);
    let suffix = context % modulus;
    let mut row = vec![0.0; a];
    let mut weight = 0.0;
    for c in 0..spec.context_count() {
        if c % modulus == suffix {
            let w = spec.stationary()[c];
            weight += w;
            for (r, p) in row.iter_mut().zip(spec.row(c)) {
                *r += w * p;
            }
        }
    }
    if weight <= 0.0 {
        return Err(ModelError::ZeroProbabilityPast);
    }
    row.iter_mut().for_each(|p| *p /= weight);
    Ok(row)
}

/// Next-symbol law given an observed past (oldest first).
pub fn conditional_row(model: &ProcessModel, past: &[Symbol]) -> Result<Vec<f64>, ModelError> {
    let mut oracle = ConditionalOracle::new(model);
    if let ProcessModel::Markov(spec) = model {
        // only the last `order` symbols matter
        let start = past.len().saturating_sub(spec.order());
        for &s in &past[..start] {
            model.alphabet().check(s)?;
        }
        for &s in &past[start..] {
            oracle.push(s)?;
        }
    } else {
        for &s in past {
            oracle.push(s)?;
        }
    }
    oracle.row()
}

/// `P(X_{n+1} = symbol | X_0^n = past)`; an empty past gives the stationary marginal.
pub fn true_conditional(model: &ProcessModel, past: &[Symbol], symbol: Symbol) -> Result<f64, ModelError> {
    model.alphabet().check(symbol)?;
    Ok(conditional_row(model, past)?[symbol as usize])
}

/// Stationary probability of observing `word` at any fixed position.
pub fn word_probability(model: &ProcessModel, word: &[Symbol]) -> Result<f64, ModelError> {
    let mut oracle = ConditionalOracle::new(model);
    let mut p = 1.0;
    for &s in word {
        p *= oracle.row()?[s as usize];
        if p == 0.0 {
            return Ok(0.0);
        }
        oracle.push(s)?;
    }
    Ok(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MemoryLength {
    Finite(usize),
    Infinite,
}

impl MemoryLength {
    pub fn finite(self) -> Option<usize> {
        match self {
            MemoryLength::Finite(k) => Some(k),
            MemoryLength::Infinite => None,
        }
    }
}

/// Memory length of a (positive-probability) past, oldest symbol first.
///
/// For hidden-indicator and renewal models the suffix back to the most recent
/// 1 pins the hidden state, so its length is returned; with no 1 in view the
/// answer is [`MemoryLength::Infinite`].
pub fn memory_length_oracle(model: &ProcessModel, past: &[Symbol]) -> Result<MemoryLength, ModelError> {
    for &s in past {
        model.alphabet().check(s)?;
    }
    match model {
        ProcessModel::Iid { .. } => Ok(MemoryLength::Finite(0)),
        ProcessModel::Markov(spec) => markov_memory_length(spec, past),
        ProcessModel::Hidden(_) | ProcessModel::Renewal(_) => Ok(match past.iter().rposition(|&s| s == 1) {
            Some(i) => MemoryLength::Finite(past.len() - i),
            None => MemoryLength::Infinite,
        }),
    }
}

fn markov_memory_length(spec: &MarkovSpec, past: &[Symbol]) -> Result<MemoryLength, ModelError> {
    let a = spec.alphabet().size();
    let order = spec.order();
    for j in 0..=order.min(past.len()) {
        if j == order {
            return Ok(MemoryLength::Finite(order));
        }
        let modulus = a.pow(j as u32);
        let suffix = past[past.len() - j..].iter().fold(0, |acc, &s| acc * a + s as usize);
        let mut reference: Option<&[f64]> = None;
        let mut memory_word = true;
        for c in (0..spec.context_count()).filter(|c| c % modulus == suffix) {
            if spec.stationary()[c] <= 0.0 {
                continue;
            }
            let row = spec.row(c);
            match reference {
                None => reference = Some(row),
                Some(r) => {
                    if r.iter().zip(row).any(|(x, y)| (x - y).abs() > ROW_SUM_TOLERANCE) {
                        memory_word = false;
                        break;
                    }
                }
            }
        }
        if memory_word {
            return Ok(MemoryLength::Finite(j));
        }
    }
    Err(ModelError::PastTooShort { len: past.len(), order })
}

fn row_entropy(row: &[f64]) -> f64 {
    row.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.log2()).sum()
}

/// Entropy rate in bits per symbol (i.i.d. and Markov models only).
pub fn entropy_rate(model: &ProcessModel) -> Result<f64, ModelError> {
    match model {
        ProcessModel::Iid { probs, .. } => Ok(row_entropy(probs)),
        ProcessModel::Markov(spec) if spec.order() == 0 => Ok(row_entropy(spec.row(0))),
        ProcessModel::Markov(spec) => Ok((0..spec.context_count())
            .map(|c| spec.stationary()[c] * row_entropy(spec.row(c)))
            .sum::<f64>()
            .max(0.0)),
        other => Err(ModelError::Unsupported {
            what: "entropy rate",
            model: other.kind(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn example_one_stationary_law() {
        let ProcessModel::Hidden(spec) = ProcessModel::example_one() else {
            unreachable!()
        };
        let pi = stationary_distribution(spec.chain()).unwrap();
        for (p, q) in pi.iter().zip([0.2, 0.4, 0.4]) {
            assert!(approx(*p, q, 1e-10), "{pi:?}");
        }
    }

    #[test]
    fn order_zero_stationary_is_the_row() {
        let spec = MarkovSpec::new(Alphabet::BINARY, 0, vec![vec![0.3, 0.7]]).unwrap();
        assert_eq!(stationary_distribution(&spec).unwrap(), vec![0.3, 0.7]);
    }

    #[test]
    fn flip_chain_is_uniform() {
        let ProcessModel::Markov(spec) = ProcessModel::binary_flip(0.1).unwrap() else {
            unreachable!()
        };
        assert!(approx(spec.stationary()[0], 0.5, 1e-12));
        assert!(approx(spec.stationary()[1], 0.5, 1e-12));
    }

    #[test]
    fn reducible_chain_is_rejected() {
        let err = ProcessModel::markov(2, 1, vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap_err();
        assert!(matches!(err, ModelError::NotErgodic { .. }), "{err}");
    }

    #[test]
    fn period_two_chain_is_accepted() {
        let m = ProcessModel::markov(2, 1, vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(entropy_rate(&m).unwrap(), 0.0);
    }

    #[test]
    fn malformed_rows_are_rejected() {
        assert!(ProcessModel::markov(2, 1, vec![vec![0.5, 0.4], vec![0.5, 0.5]]).is_err());
        assert!(ProcessModel::markov(2, 1, vec![vec![1.5, -0.5], vec![0.5, 0.5]]).is_err());
        assert!(ProcessModel::markov(2, 2, vec![vec![0.5, 0.5], vec![0.5, 0.5]]).is_err());
        assert!(ProcessModel::hidden(vec![vec![1.0, 0.0], vec![1.0, 0.0]], 1).is_err());
    }

    #[test]
    fn degenerate_bernoulli_path() {
        let m = ProcessModel::bernoulli(1.0).unwrap();
        assert_eq!(sample_path(&m, 5, 99).unwrap().symbols(), &[1, 1, 1, 1, 1]);
    }

    #[test]
    fn sampling_is_deterministic_and_prefix_stable() {
        let m = ProcessModel::example_one();
        let a = sample_path(&m, 500, 7).unwrap();
        let b = sample_path(&m, 500, 7).unwrap();
        assert_eq!(a, b);
        let c = sample_path(&m, 200, 7).unwrap();
        assert_eq!(&a.symbols()[..200], c.symbols());
        assert_ne!(a, sample_replicate(&m, 500, 7, 1).unwrap());
    }

    #[test]
    fn example_one_symbol_frequency() {
        let m = ProcessModel::example_one();
        let path = sample_path(&m, 100_000, 7).unwrap();
        let ones = path.symbols().iter().filter(|&&s| s == 1).count() as f64 / 1e5;
        assert!(approx(ones, 0.2, 0.01), "{ones}");
    }

    #[test]
    fn markov_initial_context_is_emitted_oldest_first() {
        // deterministic order-2 chain cycling 0,0,1: contexts (0,0)->1, (0,1)->0, (1,0)->0, (1,1) unused
        let m = ProcessModel::markov(
            2,
            2,
            vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 0.0], vec![1.0, 0.0]],
        )
        .unwrap();
        for seed in 0..20 {
            let p = sample_path(&m, 30, seed).unwrap();
            for w in p.symbols().windows(3) {
                assert_eq!(w.iter().filter(|&&s| s == 1).count(), 1, "{:?}", p.symbols());
            }
        }
    }

    #[test]
    fn example_one_conditionals() {
        let m = ProcessModel::example_one();
        assert_eq!(true_conditional(&m, &[0, 0, 1], 1).unwrap(), 0.0);
        assert_eq!(true_conditional(&m, &[1, 0], 1).unwrap(), 0.0);
        assert!(approx(true_conditional(&m, &[1, 0, 0], 1).unwrap(), 0.5, 1e-15));
        // stationary marginal for the empty past
        assert!(approx(true_conditional(&m, &[], 1).unwrap(), 0.2, 1e-12));
        // (1, 1) is impossible
        assert_eq!(conditional_row(&m, &[1, 1]), Err(ModelError::ZeroProbabilityPast));
    }

    #[test]
    fn example_one_depends_only_on_suffix_after_last_one() {
        let m = ProcessModel::example_one();
        let a = conditional_row(&m, &[0, 0, 0, 0, 1, 0, 0, 1, 0, 0, 0, 0]).unwrap();
        let b = conditional_row(&m, &[1, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn iid_conditional_ignores_past() {
        let m = ProcessModel::bernoulli(0.3).unwrap();
        assert_eq!(true_conditional(&m, &[1, 1, 0], 1).unwrap(), 0.3);
    }

    #[test]
    fn renewal_hazard_matches_enumeration() {
        // truncated geometric(q) on 1..=8
        let q: f64 = 0.35;
        let raw: Vec<f64> = (1..=8).map(|k| q * (1.0 - q).powi(k - 1)).collect();
        let total: f64 = raw.iter().sum();
        let pmf: Vec<f64> = raw.iter().map(|p| p / total).collect();
        let m = ProcessModel::renewal(pmf.clone()).unwrap();
        for k in 0..8usize {
            let mut past = vec![0, 1];
            past.extend(std::iter::repeat_n(0, k));
            let brute = pmf[k] / pmf[k..].iter().sum::<f64>();
            let got = true_conditional(&m, &past, 1).unwrap();
            assert!(approx(got, brute, 1e-12), "k={k}: {got} vs {brute}");
        }
    }

    #[test]
    fn renewal_all_zero_past_uses_age_posterior() {
        let pmf = vec![0.1, 0.2, 0.3, 0.4];
        let m = ProcessModel::renewal(pmf.clone()).unwrap();
        // two zeros and no 1 in view: age >= 2 at the last observation
        let survival = [1.0, 0.9, 0.7, 0.4];
        let num: f64 = (2..4).map(|a| pmf[a]).sum();
        let den: f64 = survival[2..].iter().sum();
        assert!(approx(true_conditional(&m, &[0, 0], 1).unwrap(), num / den, 1e-12));
    }

    #[test]
    fn markov_short_past_is_marginalized() {
        // order 2, binary; P(1 | ctx) depends on both symbols
        let rows = vec![vec![0.9, 0.1], vec![0.6, 0.4], vec![0.3, 0.7], vec![0.2, 0.8]];
        let m = ProcessModel::markov(2, 2, rows.clone()).unwrap();
        let ProcessModel::Markov(spec) = &m else { unreachable!() };
        let pi = spec.stationary();
        // past (1): contexts (0,1) = 1 and (1,1) = 3
        let expect = (pi[1] * 0.4 + pi[3] * 0.8) / (pi[1] + pi[3]);
        assert!(approx(true_conditional(&m, &[1], 1).unwrap(), expect, 1e-12));
        assert_eq!(true_conditional(&m, &[0, 1, 0], 1).unwrap(), 0.7);
    }

    #[test]
    fn out_of_alphabet_past_is_an_error() {
        let m = ProcessModel::bernoulli(0.5).unwrap();
        assert!(matches!(
            true_conditional(&m, &[0, 2], 1),
            Err(ModelError::SymbolOutOfRange { .. })
        ));
    }

    #[test]
    fn memory_lengths() {
        let iid = ProcessModel::bernoulli(0.4).unwrap();
        assert_eq!(memory_length_oracle(&iid, &[0, 1, 1]).unwrap(), MemoryLength::Finite(0));
        let ex = ProcessModel::example_one();
        assert_eq!(
            memory_length_oracle(&ex, &[0, 0, 1, 0, 0]).unwrap(),
            MemoryLength::Finite(3)
        );
        assert_eq!(memory_length_oracle(&ex, &[0, 0, 0]).unwrap(), MemoryLength::Infinite);
        let flip = ProcessModel::binary_flip(0.2).unwrap();
        assert_eq!(memory_length_oracle(&flip, &[1, 0]).unwrap(), MemoryLength::Finite(1));
        // order-2 rows that ignore the older symbol: memory 1
        let lazy = ProcessModel::markov(
            2,
            2,
            vec![vec![0.9, 0.1], vec![0.4, 0.6], vec![0.9, 0.1], vec![0.4, 0.6]],
        )
        .unwrap();
        assert_eq!(
            memory_length_oracle(&lazy, &[1, 1, 0]).unwrap(),
            MemoryLength::Finite(1)
        );
        assert!(matches!(
            memory_length_oracle(
                &ProcessModel::markov(
                    2,
                    2,
                    vec![vec![0.9, 0.1], vec![0.4, 0.6], vec![0.3, 0.7], vec![0.2, 0.8]]
                )
                .unwrap(),
                &[1]
            ),
            Err(ModelError::PastTooShort { .. })
        ));
    }

    #[test]
    fn entropy_rates() {
        assert!(approx(
            entropy_rate(&ProcessModel::bernoulli(0.5).unwrap()).unwrap(),
            1.0,
            1e-15
        ));
        let h = -0.3f64 * 0.3f64.log2() - 0.7 * 0.7f64.log2();
        assert!(approx(
            entropy_rate(&ProcessModel::bernoulli(0.3).unwrap()).unwrap(),
            h,
            1e-15
        ));
        assert!(approx(h, 0.881_290_899, 1e-9));
        assert!(entropy_rate(&ProcessModel::example_one()).is_err());
    }

    #[test]
    fn word_probabilities() {
        let ex = ProcessModel::example_one();
        assert!(approx(word_probability(&ex, &[1]).unwrap(), 0.2, 1e-12));
        assert!(approx(word_probability(&ex, &[1, 0, 0]).unwrap(), 0.2, 1e-12));
        assert!(approx(word_probability(&ex, &[1, 0, 0, 0, 0]).unwrap(), 0.1, 1e-12));
        assert_eq!(word_probability(&ex, &[1, 1]).unwrap(), 0.0);
    }

    #[test]
    fn path_file_round_trip() {
        let m = ProcessModel::example_one();
        let path = sample_path(&m, 77, 3).unwrap();
        let mut bytes = Vec::new();
        path.write_to(&mut bytes).unwrap();
        assert_eq!(&bytes[..8], &77u64.to_le_bytes());
        assert_eq!(SamplePath::read_from(&bytes[..], Alphabet::BINARY).unwrap(), path);
    }

    #[test]
    fn config_round_trip() {
        let json = r#"{"type":"hidden","alphabet":2,"transitions":[[0,1,0],[0,0,1],[0.5,0.5,0]],"distinguished":0}"#;
        let cfg: ModelConfig = serde_json::from_str(json).unwrap();
        let model = ProcessModel::from_config(&cfg).unwrap();
        assert_eq!(model, ProcessModel::example_one());
        assert_eq!(model.to_config(), cfg);
        let bad = r#"{"type":"iid","alphabet":3,"probs":[0.5,0.5]}"#;
        let cfg: ModelConfig = serde_json::from_str(bad).unwrap();
        assert!(ProcessModel::from_config(&cfg).is_err());
    }
}
