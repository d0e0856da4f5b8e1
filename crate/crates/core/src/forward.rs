//! Forward estimation of `P(X_{n+1} = x | X_0, ..., X_n)`.
//!
//! At time `n` the scheme picks the longest block `X_{n-k+1}^n` with
//! `k <= K_n` that occurred at least `J_n` times before, and returns the
//! empirical law of the symbols that followed those occurrences.

use crate::pattern::{occurrence_chain, SuccessorCounts};
use crate::process::{ConditionalOracle, ModelError, ProcessModel, Symbol};
use crate::schedule::{count_j, depth_k};

/// The `K_n` and `J_n` schedules.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DepthSchedule {
    /// `K_n = max(1, floor(0.1 log_a n))`, `J_n = max(1, ceil(sqrt n))`.
    Default { alphabet: usize },
    /// Constant depth with the default `J_n`.
    Fixed { depth: usize },
}

pub fn default_schedule(alphabet: usize) -> DepthSchedule {
    DepthSchedule::Default { alphabet }
}

impl DepthSchedule {
    pub fn k(&self, n: usize) -> usize {
        match *self {
            DepthSchedule::Default { alphabet } => depth_k(alphabet, n),
            DepthSchedule::Fixed { depth } => depth.max(1),
        }
    }

    pub fn j(&self, n: usize) -> usize {
        count_j(n)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardEstimate {
    pub n: usize,
    pub kappa: usize,
    pub lambda: usize,
    /// successor frequencies; all zero when `kappa = 0`
    pub row: Vec<f64>,
}

impl ForwardEstimate {
    pub fn g(&self, symbol: Symbol) -> f64 {
        self.row.get(symbol as usize).copied().unwrap_or(0.0)
    }
}

/// `(kappa_n, lambda_n)` by direct rescans of the path.
pub fn choose_depth(path: &[Symbol], n: usize, schedule: &DepthSchedule) -> (usize, usize) {
    let j = schedule.j(n);
    let kappa = (1..=schedule.k(n))
        .rev()
        .find(|&k| occurrence_chain(path, n, k, j).len() >= j)
        .unwrap_or(0);
    let lambda = if kappa == 0 {
        0
    } else {
        occurrence_chain(path, n, kappa, usize::MAX).len()
    };
    (kappa, lambda)
}

/// `g_n` for one symbol by direct rescans.
pub fn g(path: &[Symbol], n: usize, schedule: &DepthSchedule, symbol: Symbol) -> f64 {
    let (kappa, lambda) = choose_depth(path, n, schedule);
    if kappa == 0 {
        return 0.0;
    }
    let hits = occurrence_chain(path, n, kappa, usize::MAX)
        .into_iter()
        .filter(|&t| path[n - t + 1] == symbol)
        .count();
    hits as f64 / lambda as f64
}

/// Sequential evaluation over increasing `n` with incremental block counts.
pub struct ForwardPredictor<'a> {
    counts: SuccessorCounts<'a>,
    schedule: DepthSchedule,
    alphabet: usize,
    last_n: Option<usize>,
}

impl<'a> ForwardPredictor<'a> {
    pub fn new(path: &'a [Symbol], alphabet: usize, schedule: DepthSchedule) -> Self {
        ForwardPredictor {
            counts: SuccessorCounts::new(path, alphabet),
            schedule,
            alphabet,
            last_n: None,
        }
    }

    /// Estimate at time `n`; calls must use nondecreasing `n`.
    pub fn estimate(&mut self, n: usize) -> ForwardEstimate {
        assert!(
            self.last_n.is_none_or(|m| m <= n),
            "forward predictor queried out of order"
        );
        self.last_n = Some(n);
        let j = self.schedule.j(n);
        let mut row = vec![0.0; self.alphabet];
        for k in (1..=self.schedule.k(n)).rev() {
            let (count, successors) = self.counts.lookup(n, k);
            if count as usize >= j {
                let successors = successors.expect("counted blocks have successor rows");
                for (r, &c) in row.iter_mut().zip(successors) {
                    *r = c as f64 / count as f64;
                }
                return ForwardEstimate {
                    n,
                    kappa: k,
                    lambda: count as usize,
                    row,
                };
            }
        }
        ForwardEstimate {
            n,
            kappa: 0,
            lambda: 0,
            row,
        }
    }
}

/// One estimate per `n < len` alongside the oracle probability of `symbol`.
pub fn forward_trace(
    path: &[Symbol],
    model: &ProcessModel,
    schedule: DepthSchedule,
    len: usize,
    symbol: Symbol,
) -> Result<Vec<(ForwardEstimate, f64)>, ModelError> {
    let len = len.min(path.len());
    let mut predictor = ForwardPredictor::new(path, model.alphabet().size(), schedule);
    let mut oracle = ConditionalOracle::new(model);
    let mut out = Vec::with_capacity(len);
    for (n, &s) in path[..len].iter().enumerate() {
        oracle.push(s)?;
        let truth = oracle.row()?[symbol as usize];
        out.push((predictor.estimate(n), truth));
    }
    Ok(out)
}

/// `(1/N) sum_{i<N} |g_i - P(X_{i+1} = 1 | X_0^i)|`.
pub fn cesaro_error(
    path: &[Symbol],
    model: &ProcessModel,
    schedule: DepthSchedule,
    n: usize,
) -> Result<f64, ModelError> {
    if n == 0 || n > path.len() {
        return Err(ModelError::Malformed(format!(
            "Cesaro horizon {n} outside a path of length {}",
            path.len()
        )));
    }
    let trace = forward_trace(path, model, schedule, n, 1)?;
    let total: f64 = trace.iter().map(|(e, truth)| (e.g(1) - truth).abs()).sum();
    Ok(total / n as f64)
}
