//! Prediction along self-selected stopping times.
//!
//! [`morvai2000`] waits for the whole observed prefix `X_0^{lambda}` to
//! recur and averages the symbols that followed earlier stopping times.
//! [`mw03`] only waits for a window of length `k` ending at the previous
//! stopping time, which keeps `zeta_k` growing like `2^{kH}`.

use std::fmt;

use thiserror::Error;

use crate::pattern::next_occurrence;
use crate::process::{ConditionalOracle, ModelError, ProcessModel, Symbol};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Morvai2000,
    Mw03,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Morvai2000 => "morvai2000",
            Scheme::Mw03 => "mw03",
        })
    }
}

impl std::str::FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "morvai2000" => Ok(Scheme::Morvai2000),
            "mw03" => Ok(Scheme::Mw03),
            other => Err(format!("unknown stopping-time scheme '{other}'")),
        }
    }
}

/// Stopping times `times[0] = 0 < times[1] < ...` with the estimate made at each.
///
/// `estimates[k]` is the estimate of `P(X_{times[k]+1} = 1 | X_0^{times[k]})`
/// and depends on `path[..=times[k]]` only. The empty averages at `k = 0`
/// (and `k = 1` for [`Scheme::Morvai2000`]) are reported as 0.
#[derive(Debug, Clone, PartialEq)]
pub struct StopTimeTrace {
    pub scheme: Scheme,
    pub times: Vec<usize>,
    pub estimates: Vec<f64>,
    /// set when the next pattern did not recur inside the path
    pub truncated: bool,
}

impl StopTimeTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// The increments `tau_k` (or `eta_k`) for `k >= 1`.
    pub fn increments(&self) -> Vec<usize> {
        self.times.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// `P(X_{times[k]+1} = 1 | X_0^{times[k]})` for every `k` whose successor is in range.
    pub fn oracle(&self, model: &ProcessModel, path: &[Symbol]) -> Result<Vec<f64>, ModelError> {
        let mut oracle = ConditionalOracle::new(model);
        let mut out = Vec::with_capacity(self.times.len());
        let mut fed = 0;
        for &t in &self.times {
            while fed <= t {
                oracle.push(path[fed])?;
                fed += 1;
            }
            out.push(oracle.row()?.get(1).copied().unwrap_or(0.0));
        }
        Ok(out)
    }
}

fn mean_successors(path: &[Symbol], times: &[usize]) -> f64 {
    if times.is_empty() {
        return 0.0;
    }
    times.iter().filter(|&&t| path[t + 1] == 1).count() as f64 / times.len() as f64
}

/// `lambda_k = lambda_{k-1} + tau_k`, where `tau_k` is the first recurrence
/// of the prefix `X_0^{lambda_{k-1}}`, and `P_k` averages `X_{lambda_j+1}`
/// over `1 <= j <= k-1`.
pub fn morvai2000(path: &[Symbol]) -> StopTimeTrace {
    let mut times = vec![0];
    while let Some(tau) = next_occurrence(path, 0, times[times.len() - 1]) {
        times.push(times[times.len() - 1] + tau);
    }
    let estimates = (0..times.len())
        .map(|k| {
            if k < 2 {
                0.0
            } else {
                mean_successors(path, &times[1..k])
            }
        })
        .collect();
    StopTimeTrace {
        scheme: Scheme::Morvai2000,
        times,
        estimates,
        truncated: true,
    }
}

/// `zeta_k = zeta_{k-1} + eta_k`, where `eta_k` is the first recurrence of
/// the length-`k` window ending at `zeta_{k-1}`, and `g_k` averages
/// `X_{zeta_j+1}` over `0 <= j <= k-1`.
pub fn mw03(path: &[Symbol]) -> StopTimeTrace {
    mw03_until(path, usize::MAX)
}

/// [`mw03`] stopped after `max_k` steps.
pub fn mw03_until(path: &[Symbol], max_k: usize) -> StopTimeTrace {
    let mut times = vec![0];
    let mut truncated = false;
    while times.len() <= max_k {
        let k = times.len();
        let last = times[k - 1];
        match next_occurrence(path, last + 1 - k, last) {
            Some(eta) => times.push(last + eta),
            None => {
                truncated = true;
                break;
            }
        }
    }
    let estimates = (0..times.len()).map(|k| mean_successors(path, &times[..k])).collect();
    StopTimeTrace {
        scheme: Scheme::Mw03,
        times,
        estimates,
        truncated,
    }
}

pub fn run_scheme(scheme: Scheme, path: &[Symbol]) -> StopTimeTrace {
    match scheme {
        Scheme::Morvai2000 => morvai2000(path),
        Scheme::Mw03 => mw03(path),
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProbeError {
    #[error("the tower probe needs H > eps > 0, got H = {entropy}, eps = {eps}")]
    Precondition { entropy: f64, eps: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthReport {
    /// `within[k]` is `zeta_k < 2^{k (H + eps)}`
    pub within: Vec<bool>,
    /// smallest `k` from which every observed `k' >= k` is within the bound
    pub settled_from: usize,
}

pub fn growth_report(trace: &StopTimeTrace, entropy: f64, eps: f64) -> GrowthReport {
    let rate = entropy + eps;
    let within: Vec<bool> = trace
        .times
        .iter()
        .enumerate()
        .map(|(k, &z)| (z as f64).log2() < k as f64 * rate || z == 0)
        .collect();
    let settled_from = within.iter().rposition(|&ok| !ok).map_or(0, |k| k + 1);
    GrowthReport { within, settled_from }
}

/// `log2(lambda_{k+1}) / lambda_k` for every `k >= 1` with a successor time.
pub fn tower_probe(trace: &StopTimeTrace, entropy: f64, eps: f64) -> Result<Vec<(usize, f64)>, ProbeError> {
    if !(entropy > eps && eps > 0.0) {
        return Err(ProbeError::Precondition { entropy, eps });
    }
    Ok(trace
        .times
        .windows(2)
        .enumerate()
        .skip(1)
        .map(|(k, w)| (k, (w[1] as f64).log2() / w[0] as f64))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn alternating(len: usize) -> Vec<Symbol> {
        (0..len).map(|i| (i % 2) as Symbol).collect()
    }

    #[test]
    fn morvai_all_ones() {
        let trace = morvai2000(&[1; 12]);
        assert_eq!(trace.times, (0..12).collect::<Vec<_>>());
        assert!(trace.estimates[2..].iter().all(|&p| p == 1.0));
        assert_eq!(trace.estimates[1], 0.0);
    }

    #[test]
    fn morvai_alternating() {
        let trace = morvai2000(&alternating(20));
        assert_eq!(&trace.times[..3], &[0, 2, 4]);
        assert!(trace.estimates[2..].iter().all(|&p| p == 1.0));
    }

    #[test]
    fn morvai_no_recurrence() {
        let trace = morvai2000(&[1, 0]);
        assert_eq!(trace.times, vec![0]);
        assert!(trace.truncated);
    }

    #[test]
    fn mw03_examples() {
        let trace = mw03(&alternating(20));
        assert_eq!(&trace.times[..3], &[0, 2, 4]);
        assert_eq!(trace.estimates[2], 1.0);
        let model = ProcessModel::markov(2, 1, vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let path = alternating(20);
        assert_eq!(trace.oracle(&model, &path).unwrap()[2], 1.0);
        let ones = mw03(&[1; 15]);
        assert_eq!(ones.times, (0..15).collect::<Vec<_>>());
        assert!(ones.estimates[1..].iter().all(|&g| g == 1.0));
        let zeros = mw03(&[0; 9]);
        assert!(zeros.estimates.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn growth_and_tower() {
        let trace = mw03(&[1; 30]);
        let report = growth_report(&trace, 0.0, 64.0);
        assert!(report.within.iter().all(|&b| b));
        assert_eq!(report.settled_from, 0);
        // H = 0: zeta_k = k, eventually below 2^{0.2 k}
        let strict = growth_report(&trace, 0.0, 0.2);
        assert!(!strict.within[5]);
        assert!(strict.within[29]);
        assert!(tower_probe(&trace, 0.0, 0.2).is_err());
        let ratios = tower_probe(&morvai2000(&[1; 30]), 1.0, 0.3).unwrap();
        assert!(ratios.last().unwrap().1 < 0.5);
    }
}
