//! Memory-word tests and the estimators built on them.
//!
//! A word `w` is a memory word when the next-symbol law given any past
//! ending in `w` equals the law given `w` alone. [`delta_hat`] measures the
//! empirical failure of that property over frequent extensions, [`ntest`]
//! and [`ptest`] threshold it, and the submodules use the tests to estimate
//! memory lengths, Markov orders and conditional probabilities.

mod fm;
mod forward;
mod markov;

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pattern::{NodeId, WindowCounts, WordIndex};
use crate::process::Symbol;

pub use fm::{fm_scheme, FmStep, FmTrace};
pub use forward::{forward_scheme, forward_scheme_sweep, qhat, MemoryVerdict};
pub use markov::{markov_qhat, ordest, MarkovQhat};

/// Longest word the occurrence index resolves; deeper extensions are ignored.
pub const DEFAULT_MAX_WORD: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("gamma must lie in (0, 1), got {0}")]
    Gamma(f64),
    #[error("beta < (1 - gamma) / 2 violated: beta = {beta}, gamma = {gamma}")]
    Beta { beta: f64, gamma: f64 },
    #[error("epsilon must lie in (0, 1), got {0}")]
    Epsilon(f64),
    #[error("max_word must be at least 1")]
    MaxWord,
}

fn default_gamma() -> f64 {
    0.5
}

fn default_beta() -> f64 {
    0.2
}

fn default_epsilon() -> f64 {
    0.1
}

fn default_max_word() -> usize {
    DEFAULT_MAX_WORD
}

/// `gamma` sets the frequency cut `n^{1-gamma}`, `beta` the test cut
/// `n^{-beta}`, and `epsilon` the uncovered fraction allowed by the forward scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemoryParams {
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_max_word")]
    pub max_word: usize,
}

impl Default for MemoryParams {
    fn default() -> Self {
        MemoryParams {
            gamma: 0.5,
            beta: 0.2,
            epsilon: 0.1,
            max_word: DEFAULT_MAX_WORD,
        }
    }
}

impl MemoryParams {
    pub fn new(gamma: f64, beta: f64, epsilon: f64) -> Result<Self, ParamError> {
        let params = MemoryParams {
            gamma,
            beta,
            epsilon,
            max_word: DEFAULT_MAX_WORD,
        };
        params.validate()?;
        Ok(params)
    }

    /// Checks `0 < gamma < 1`, `0 < beta < (1 - gamma) / 2` (equivalently
    /// `2 beta + gamma < 1`) and `0 < epsilon < 1`.
    pub fn validate(&self) -> Result<(), ParamError> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(ParamError::Gamma(self.gamma));
        }
        if !(self.beta > 0.0 && 2.0 * self.beta + self.gamma < 1.0) {
            return Err(ParamError::Beta {
                beta: self.beta,
                gamma: self.gamma,
            });
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(ParamError::Epsilon(self.epsilon));
        }
        if self.max_word == 0 {
            return Err(ParamError::MaxWord);
        }
        Ok(())
    }

    /// Words must occur more than `n^{1-gamma}` times to count as frequent.
    pub fn frequency_cut(&self, n: usize) -> f64 {
        (n as f64).powf(1.0 - self.gamma)
    }

    /// A test passes when the discrepancy is at most `n^{-beta}`.
    pub fn test_cut(&self, n: usize) -> f64 {
        if n == 0 {
            f64::INFINITY
        } else {
            (n as f64).powf(-self.beta)
        }
    }

    /// Builds an index that resolves every word that is frequent for some
    /// window `[lo, m]` with `lo >= 0`: a word is expanded when its `j`-th
    /// occurrence ends at some `e` with `j > e^{1-gamma}`.
    pub(crate) fn index<'a>(&self, path: &'a [Symbol]) -> WordIndex<'a> {
        let exponent = 1.0 - self.gamma;
        WordIndex::build(path, self.max_word, |_, ends| {
            ends.iter()
                .enumerate()
                .any(|(j, &e)| (j + 1) as f64 > (e as f64).powf(exponent))
        })
    }
}

/// Position of a word in the enumeration by length, then lexicographically;
/// saturates at `u128::MAX`.
pub fn word_index(word: &[Symbol], alphabet: usize) -> u128 {
    level_offset(word.len(), alphabet).saturating_add(lex_rank(word, alphabet))
}

/// The word at position `index` of the enumeration.
pub fn word_at(mut index: u128, alphabet: usize) -> Vec<Symbol> {
    let a = alphabet as u128;
    let mut len = 0;
    let mut level = 1u128;
    while index >= level {
        index -= level;
        len += 1;
        level = level.saturating_mul(a);
    }
    let mut word = vec![0; len];
    for slot in word.iter_mut().rev() {
        *slot = (index % a) as Symbol;
        index /= a;
    }
    word
}

/// Number of words shorter than `len`.
pub(crate) fn level_offset(len: usize, alphabet: usize) -> u128 {
    let a = alphabet as u128;
    let mut total = 0u128;
    let mut level = 1u128;
    for _ in 0..len {
        total = total.saturating_add(level);
        level = level.saturating_mul(a);
    }
    total
}

pub(crate) fn lex_rank(word: &[Symbol], alphabet: usize) -> u128 {
    word.iter().fold(0u128, |acc, &s| {
        acc.saturating_mul(alphabet as u128).saturating_add(s as u128)
    })
}

/// Ratio of occurrences of `word · symbol` to occurrences of `word` followed
/// by a symbol, over the last `n + 1` symbols of `past`. `None` when `word`
/// never occurs with a successor there.
pub fn empirical_conditional(past: &[Symbol], n: usize, word: &[Symbol], symbol: Symbol) -> Option<f64> {
    let window = backward_window(past, n);
    let k = word.len();
    let (hits, total) = if k == 0 {
        // the empty word precedes every symbol of the window
        (window.iter().filter(|&&s| s == symbol).count(), window.len())
    } else {
        window
            .windows(k + 1)
            .filter(|w| &w[..k] == word)
            .fold((0, 0), |(h, t), w| (h + usize::from(w[k] == symbol), t + 1))
    };
    (total > 0).then(|| hits as f64 / total as f64)
}

/// The words of length `k + 1` occurring more than `n^{1-gamma}` times in
/// the last `n + 1` symbols of `past`, sorted.
pub fn frequent_words(past: &[Symbol], n: usize, k: usize, gamma: f64) -> Vec<Vec<Symbol>> {
    let window = backward_window(past, n);
    let cut = (n as f64).powf(1.0 - gamma);
    let mut counts: HashMap<&[Symbol], usize> = HashMap::new();
    if window.len() > k {
        for w in window.windows(k + 1) {
            *counts.entry(w).or_default() += 1;
        }
    }
    let mut out: Vec<Vec<Symbol>> = counts
        .into_iter()
        .filter(|&(_, c)| c as f64 > cut)
        .map(|(w, _)| w.to_vec())
        .collect();
    out.sort();
    out
}

/// The variant used by the finitarily Markovian scheme on `X_0^n`: words of
/// length `k + 1` occurring more than `n^{1-gamma}` times in the second half
/// `X_h^n`, `h = ceil(n / 2)`, and at least once in `X_0^{h-1}`.
pub fn frequent_words_split(path: &[Symbol], n: usize, k: usize, gamma: f64) -> Vec<Vec<Symbol>> {
    let h = n.div_ceil(2);
    let cut = (n as f64).powf(1.0 - gamma);
    let seen: HashSet<&[Symbol]> = if h > k {
        path[..h].windows(k + 1).collect()
    } else {
        HashSet::new()
    };
    let mut counts: HashMap<&[Symbol], usize> = HashMap::new();
    if n + 1 - h > k {
        for w in path[h..=n].windows(k + 1) {
            *counts.entry(w).or_default() += 1;
        }
    }
    let mut out: Vec<Vec<Symbol>> = counts
        .into_iter()
        .filter(|&(w, c)| c as f64 > cut && seen.contains(w))
        .map(|(w, _)| w.to_vec())
        .collect();
    out.sort();
    out
}

fn backward_window(past: &[Symbol], n: usize) -> &[Symbol] {
    &past[past.len().saturating_sub(n + 1)..]
}

/// Which extensions count as frequent inside the current window.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Scope {
    pub cut: f64,
    /// extensions must also end at or before this position
    pub first_half_end: Option<usize>,
}

impl Scope {
    fn admits(&self, counts: &mut WindowCounts<'_, '_>, node: NodeId) -> bool {
        if (counts.count(node) as f64) <= self.cut {
            return false;
        }
        match self.first_half_end {
            Some(h) => counts.index().first_end(node).is_some_and(|e| e <= h),
            None => true,
        }
    }
}

/// `max |p(x | w) - p(x | z w)|` over nonempty `z` with `z w x` admitted by
/// `scope`, using the counts of the current window; 0 over an empty set.
/// Returns as soon as the running maximum exceeds `stop_above`.
pub(crate) fn delta_hat_in(counts: &mut WindowCounts<'_, '_>, word: &[Symbol], scope: Scope, stop_above: f64) -> f64 {
    let index = counts.index();
    let Some(w) = index.find(word) else {
        return 0.0;
    };
    let den_w = counts.count_followed(w);
    let mut best = 0.0f64;
    let mut stack: Vec<(NodeId, NodeId)> = Vec::new();
    for &(x, _) in index.children(index.root()) {
        let Some(wx) = index.find_extended(word, x) else {
            continue;
        };
        let hits = counts.count(wx);
        if hits == 0 {
            continue;
        }
        let p_w = hits as f64 / den_w as f64;
        stack.push((wx, w));
        while let Some((zwx, zw)) = stack.pop() {
            for &(a, ext) in index.children(zwx) {
                if !scope.admits(counts, ext) {
                    continue;
                }
                let ctx = index
                    .child(zw, a)
                    .expect("an extension occurring in the window has its context indexed");
                let p = counts.count(ext) as f64 / counts.count_followed(ctx) as f64;
                best = best.max((p_w - p).abs());
                if best > stop_above {
                    return best;
                }
                stack.push((ext, ctx));
            }
        }
    }
    best
}

/// The empirical discrepancy of `word` over the last `n + 1` symbols of `past`.
pub fn delta_hat(past: &[Symbol], n: usize, word: &[Symbol], params: &MemoryParams) -> f64 {
    let window = backward_window(past, n);
    let n = window.len() - 1;
    let index = params.index(window);
    let mut counts = WindowCounts::new(&index, 0, n);
    let scope = Scope {
        cut: params.frequency_cut(n),
        first_half_end: None,
    };
    delta_hat_in(&mut counts, word, scope, f64::INFINITY)
}

/// `YES` (true) when the discrepancy over the last `n + 1` symbols of `past` is at most `n^{-beta}`.
pub fn ntest(past: &[Symbol], n: usize, word: &[Symbol], params: &MemoryParams) -> bool {
    let window = backward_window(past, n);
    let n = window.len() - 1;
    let index = params.index(window);
    let mut counts = WindowCounts::new(&index, 0, n);
    passes(&mut counts, n, word, params)
}

/// [`ntest`] on the forward window `X_0^n`, read with `X_n` in the role of `X_0`.
pub fn ptest(path: &[Symbol], n: usize, word: &[Symbol], params: &MemoryParams) -> bool {
    ntest(&path[..=n], n, word, params)
}

pub(crate) fn passes(counts: &mut WindowCounts<'_, '_>, n: usize, word: &[Symbol], params: &MemoryParams) -> bool {
    let cut = params.test_cut(n);
    let scope = Scope {
        cut: params.frequency_cut(n),
        first_half_end: None,
    };
    delta_hat_in(counts, word, scope, cut) <= cut
}

/// Smallest `k < n` whose suffix `X_{-k+1}^0` passes [`ntest`], else `n`; 0 for `n = 0`.
pub fn chi_backward(past: &[Symbol], n: usize, params: &MemoryParams) -> usize {
    let window = backward_window(past, n);
    let n = window.len() - 1;
    if n == 0 {
        return 0;
    }
    let index = params.index(window);
    let mut counts = WindowCounts::new(&index, 0, n);
    (0..n)
        .find(|&k| passes(&mut counts, n, &window[n + 1 - k..], params))
        .unwrap_or(n)
}
