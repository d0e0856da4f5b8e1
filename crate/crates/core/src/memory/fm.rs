//! Prediction along stopping times for finitarily Markovian processes.
//!
//! Auxiliary times `zeta_n` track recurrences of windows of slowly growing
//! length `l_n`; they define a backward sequence `X~` whose memory length
//! `chi_t` is estimated from the second half of `X_0^t`. The stopping times
//! `lambda_n` are the successive reappearances of the estimated memory word.

use serde::{Deserialize, Serialize};

use super::{delta_hat_in, MemoryParams, Scope};
use crate::pattern::{next_occurrence, WindowCounts};
use crate::process::Symbol;
use crate::schedule::window_l;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FmStep {
    pub n: usize,
    pub lambda: usize,
    /// `chi` at `lambda`, the memory-length estimate used at this step
    pub kappa: usize,
    /// running mean of `f(X_{lambda_j + 1})` over `j < n`; 0 at `n = 0`
    pub f: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FmTrace {
    pub zetas: Vec<usize>,
    /// `X~_0, X~_{-1}, ...` as far as the auxiliary times resolve it
    pub tilde: Vec<Symbol>,
    /// `chi_t` for every evaluated `t`, starting at `t = 0`
    pub chi: Vec<usize>,
    pub steps: Vec<FmStep>,
    /// the last stopping time could not be completed inside the path
    pub truncated: bool,
}

impl FmTrace {
    /// `J(i) = min { j >= 1 : l_{j+1} > i }`, if `zeta_{J(i)}` was observed.
    pub fn big_j(&self, i: usize) -> Option<usize> {
        (1..self.zetas.len()).find(|&j| window_l(j + 1) > i)
    }

    /// `X~_{-k+1} .. X~_0`, oldest first.
    pub fn tilde_word(&self, k: usize) -> Option<Vec<Symbol>> {
        (k <= self.tilde.len()).then(|| self.tilde[..k].iter().rev().copied().collect())
    }

    pub fn lambdas(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.lambda).collect()
    }
}

fn zeta_sequence(path: &[Symbol]) -> Vec<usize> {
    let mut zetas = vec![0];
    loop {
        let n = zetas.len();
        let last = zetas[n - 1];
        let l = window_l(n);
        match next_occurrence(path, last + 1 - l, last) {
            Some(t) => zetas.push(last + t),
            None => return zetas,
        }
    }
}

/// Runs the scheme over the whole path with the bounded function `f`.
pub fn fm_scheme(path: &[Symbol], params: &MemoryParams, f: impl Fn(Symbol) -> f64) -> FmTrace {
    let mut trace = FmTrace {
        zetas: zeta_sequence(path),
        tilde: Vec::new(),
        chi: vec![0],
        steps: vec![FmStep {
            n: 0,
            lambda: 0,
            kappa: 0,
            f: 0.0,
        }],
        truncated: false,
    };
    // J(i) is nondecreasing in i, so X~ is resolved up to the first unknown index
    let mut i = 0;
    while let Some(j) = trace.big_j(i) {
        trace.tilde.push(path[trace.zetas[j] - i]);
        i += 1;
    }
    if path.len() < 2 {
        trace.truncated = true;
        return trace;
    }

    let index = params.index(path);
    let mut counts = WindowCounts::new(&index, 0, 0);
    let mut chi_at = |trace: &mut FmTrace, t: usize| -> usize {
        while trace.chi.len() <= t {
            let s = trace.chi.len();
            let h = s.div_ceil(2);
            counts.advance(h, s);
            let scope = Scope {
                cut: params.frequency_cut(s),
                first_half_end: Some(h - 1),
            };
            let cut = params.test_cut(s);
            let chi = (0..s)
                .find(|&k| {
                    let gated = trace.big_j(k).is_some_and(|j| trace.zetas[j] < h);
                    if !gated {
                        return true;
                    }
                    let word = trace.tilde_word(k).expect("a gated word is resolved");
                    delta_hat_in(&mut counts, &word, scope, cut) <= cut
                })
                .unwrap_or(s);
            trace.chi.push(chi);
        }
        trace.chi[t]
    };

    let mut f_sum = 0.0;
    let mut j = 0;
    let mut lambda = 0;
    'steps: loop {
        while j + 1 < trace.zetas.len() && trace.zetas[j + 1] <= lambda {
            j += 1;
        }
        let zeta = trace.zetas[j];
        if lambda + 1 >= path.len() {
            trace.truncated = true;
            break;
        }
        f_sum += f(path[lambda + 1]);
        let mut t = lambda + 1;
        loop {
            if t >= path.len() {
                trace.truncated = true;
                break 'steps;
            }
            let c = chi_at(&mut trace, t);
            if c <= zeta + 1 && path[t + 1 - c..=t] == path[zeta + 1 - c..=zeta] {
                break;
            }
            t += 1;
        }
        lambda = t;
        let n = trace.steps.len();
        trace.steps.push(FmStep {
            n,
            lambda,
            kappa: trace.chi[t],
            f: f_sum / n as f64,
        });
    }
    trace
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_path() {
        let params = MemoryParams::default();
        let trace = fm_scheme(&[2; 300], &params, |s| f64::from(s == 2));
        assert_eq!(trace.zetas[..5], [0, 1, 2, 3, 4]);
        assert!(trace.steps[1..].iter().all(|s| s.f == 1.0));
        let lambdas = trace.lambdas();
        assert!(lambdas.windows(2).all(|w| w[1] == w[0] + 1));
        assert_eq!(*lambdas.last().unwrap(), 299);
    }

    #[test]
    fn alternating_path() {
        let params = MemoryParams::default();
        let path: Vec<Symbol> = (0..400).map(|i| (i % 2) as Symbol).collect();
        let trace = fm_scheme(&path, &params, f64::from);
        assert_eq!(trace.zetas[..3], [0, 2, 4]);
        assert_eq!(trace.tilde[..4], [0, 1, 0, 1]);
        // late steps land on the positions that follow X~_0 = 0
        let last = trace.steps.last().unwrap();
        assert!(trace.steps[trace.steps.len() - 20..]
            .iter()
            .all(|s| s.lambda % 2 == 0 && s.kappa == 1));
        assert!(last.f > 0.9);
    }

    #[test]
    fn tilde_index() {
        let trace = FmTrace {
            zetas: vec![0, 1, 2, 3],
            tilde: vec![],
            chi: vec![],
            steps: vec![],
            truncated: true,
        };
        assert_eq!(trace.big_j(0), Some(1));
        assert_eq!(trace.big_j(2), Some(2));
        assert_eq!(trace.big_j(3), Some(3));
        assert_eq!(trace.big_j(4), None);
    }
}
