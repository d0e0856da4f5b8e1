//! Backward estimation of `P(X_0 = 1 | X_{-1}, X_{-2}, ...)`.
//!
//! Pasts are stored oldest first, so `X_{-i}` is `past[past.len() - i]`.
//! Starting from `lambda_0 = 1`, each step looks for the previous occurrence
//! of the last `lambda_{k-1}` symbols, shifted back by `tau_k`, and records
//! the symbol `X_{-tau_k}` that sat where `X_0` would be.

use thiserror::Error;

use crate::pattern::{last_occurrence_before, SearchError};
use crate::process::Symbol;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum BackwardError {
    #[error("P_{k} needs {k} picks but only {available} are available")]
    InsufficientState { k: usize, available: usize },
}

/// Recurrence lengths, shifts and picked symbols of the scheme.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BackwardState {
    lambdas: Vec<usize>,
    taus: Vec<usize>,
    picks: Vec<Symbol>,
    frozen: bool,
}

impl Default for BackwardState {
    fn default() -> Self {
        Self::new()
    }
}

impl BackwardState {
    pub fn new() -> Self {
        BackwardState {
            lambdas: vec![1],
            taus: Vec::new(),
            picks: Vec::new(),
            frozen: false,
        }
    }

    /// Runs [`extend`](Self::extend) until the finite past is exhausted.
    pub fn run(past: &[Symbol]) -> Self {
        let mut state = Self::new();
        while state.extend(past) {}
        state
    }

    /// Appends the next `(tau, lambda, pick)`; returns `false` and freezes
    /// once the pattern no longer recurs inside `past`.
    pub fn extend(&mut self, past: &[Symbol]) -> bool {
        if self.frozen {
            return false;
        }
        let lambda = *self.lambdas.last().expect("lambda_0 is always present");
        match last_occurrence_before(past, lambda, 1) {
            Ok(tau) => {
                self.taus.push(tau);
                self.lambdas.push(lambda + tau);
                self.picks.push(past[past.len() - tau]);
                true
            }
            Err(SearchError::NotFound | SearchError::InvalidBlock { .. }) => {
                self.frozen = true;
                false
            }
        }
    }

    pub fn lambdas(&self) -> &[usize] {
        &self.lambdas
    }

    pub fn taus(&self) -> &[usize] {
        &self.taus
    }

    pub fn picks(&self) -> &[Symbol] {
        &self.picks
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    /// Number of completed steps.
    pub fn steps(&self) -> usize {
        self.taus.len()
    }

    /// Largest `k` with `lambda_k <= t`.
    pub fn kappa(&self, t: usize) -> usize {
        self.lambdas.partition_point(|&l| l <= t).saturating_sub(1)
    }

    /// Fraction of the first `k` picks equal to `symbol`.
    pub fn p_k_of(&self, k: usize, symbol: Symbol) -> Result<f64, BackwardError> {
        if k == 0 || k > self.picks.len() {
            return Err(BackwardError::InsufficientState {
                k,
                available: self.picks.len(),
            });
        }
        let hits = self.picks[..k].iter().filter(|&&s| s == symbol).count();
        Ok(hits as f64 / k as f64)
    }

    /// `P_k`, the mean of the first `k` binary picks.
    pub fn p_k(&self, k: usize) -> Result<f64, BackwardError> {
        self.p_k_of(k, 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackwardEstimate {
    pub t: usize,
    pub kappa: usize,
    pub p_hat: f64,
}

/// `P_{kappa_t}` computed from the last `t` symbols of the past only; 0 when `kappa_t = 0`.
pub fn p_hat(past: &[Symbol], t: usize) -> BackwardEstimate {
    p_hat_of(past, t, 1)
}

pub fn p_hat_of(past: &[Symbol], t: usize, symbol: Symbol) -> BackwardEstimate {
    let visible = &past[past.len().saturating_sub(t)..];
    let state = BackwardState::run(visible);
    let kappa = state.kappa(t);
    let p_hat = if kappa == 0 {
        0.0
    } else {
        state.p_k_of(kappa, symbol).unwrap_or(0.0)
    };
    BackwardEstimate { t, kappa, p_hat }
}
