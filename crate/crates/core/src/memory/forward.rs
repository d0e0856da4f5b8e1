//! The forward memory scheme: a density `1 - epsilon` set of times at which
//! the memory length of `X_{-inf}^n` is estimated from `X_0^n`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{level_offset, lex_rank, passes, MemoryParams};
use crate::pattern::{NodeId, WindowCounts};
use crate::process::Symbol;

/// Outcome of the forward scheme at time `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryVerdict {
    pub n: usize,
    pub in_n: bool,
    /// index of the last word needed for the coverage; `n` when out of reach
    pub theta: usize,
    /// index of the shortest passing suffix, when `n` is selected
    pub kappa: Option<usize>,
    /// its length, the memory-length estimate
    pub rho: Option<usize>,
    /// empirical law of the successors of the selected suffix
    pub qhat: Option<Vec<f64>>,
}

struct Evaluator<'c, 'i, 'a> {
    counts: &'c mut WindowCounts<'i, 'a>,
    params: &'c MemoryParams,
    n: usize,
    verdicts: HashMap<NodeId, bool>,
}

impl Evaluator<'_, '_, '_> {
    fn passes(&mut self, node: NodeId) -> bool {
        if let Some(&v) = self.verdicts.get(&node) {
            return v;
        }
        let word = self.counts.index().word(node);
        let v = passes(self.counts, self.n, word, self.params);
        self.verdicts.insert(node, v);
        v
    }
}

fn verdict(counts: &mut WindowCounts<'_, '_>, n: usize, alphabet: usize, params: &MemoryParams) -> MemoryVerdict {
    if n == 0 {
        return MemoryVerdict {
            n,
            in_n: false,
            theta: 0,
            kappa: None,
            rho: None,
            qhat: None,
        };
    }
    counts.advance(0, n);
    let index = counts.index();
    let path = index.path();
    let mut eval = Evaluator {
        counts,
        params,
        n,
        verdicts: HashMap::new(),
    };
    let root = index.root();
    let target = (1.0 - params.epsilon / 2.0) * (n + 1) as f64;
    let mut covered = 0usize;
    let mut theta: Option<usize> = None;

    // words are visited by length, then lexicographically; only words with
    // no passing proper suffix add new positions to the coverage
    let mut frontier: Vec<NodeId> = Vec::new();
    if eval.passes(root) {
        covered = n + 1;
        if covered as f64 >= target {
            theta = Some(0);
        }
    } else {
        frontier.push(root);
    }
    let mut depth = 0;
    while theta.is_none() && !frontier.is_empty() {
        depth += 1;
        let offset = level_offset(depth, alphabet);
        if offset >= n as u128 {
            break;
        }
        let mut level: Vec<NodeId> = Vec::new();
        for &node in &frontier {
            for &(_, child) in index.children(node) {
                if eval.counts.count(child) > 0 {
                    level.push(child);
                }
            }
        }
        level.sort_by(|&a, &b| index.word(a).cmp(index.word(b)));
        let mut next = Vec::new();
        for node in level {
            let position = offset.saturating_add(lex_rank(index.word(node), alphabet));
            if position >= n as u128 {
                next.clear();
                break;
            }
            if eval.passes(node) {
                covered += eval.counts.count(node);
                if covered as f64 >= target {
                    theta = Some(position as usize);
                    break;
                }
            } else {
                next.push(node);
            }
        }
        frontier = next;
    }

    let Some(theta) = theta else {
        return MemoryVerdict {
            n,
            in_n: false,
            theta: n,
            kappa: None,
            rho: None,
            qhat: None,
        };
    };
    let mut node = root;
    let mut rho = 0;
    loop {
        let word = &path[n + 1 - rho..=n];
        let position = level_offset(rho, alphabet).saturating_add(lex_rank(word, alphabet));
        if position > theta as u128 {
            break;
        }
        if eval.passes(node) {
            let qhat = successor_row(eval.counts, node, word, n, alphabet);
            return MemoryVerdict {
                n,
                in_n: true,
                theta,
                kappa: Some(position as usize),
                rho: Some(rho),
                qhat,
            };
        }
        if rho == n {
            break;
        }
        match index.child(node, path[n - rho]) {
            Some(next) => node = next,
            None => break,
        }
        rho += 1;
    }
    MemoryVerdict {
        n,
        in_n: false,
        theta,
        kappa: None,
        rho: None,
        qhat: None,
    }
}

fn successor_row(
    counts: &mut WindowCounts<'_, '_>,
    node: NodeId,
    word: &[Symbol],
    n: usize,
    alphabet: usize,
) -> Option<Vec<f64>> {
    let index = counts.index();
    if !index.is_expanded(node) {
        return qhat(&index.path()[..=n], n, word.len(), alphabet);
    }
    let total = counts.count_followed(node);
    if total == 0 {
        return None;
    }
    let mut row = vec![0.0; alphabet];
    for &(x, _) in index.children(index.root()) {
        if let Some(ext) = index.find_extended(word, x) {
            row[x as usize] = counts.count(ext) as f64 / total as f64;
        }
    }
    Some(row)
}

/// The forward scheme at a single time `n`, reading `path[..=n]` only.
pub fn forward_scheme(path: &[Symbol], n: usize, alphabet: usize, params: &MemoryParams) -> MemoryVerdict {
    let prefix = &path[..=n];
    let index = params.index(prefix);
    let mut counts = WindowCounts::new(&index, 0, 0);
    verdict(&mut counts, n, alphabet, params)
}

/// The forward scheme at every `n` in `times` (nondecreasing), sharing one index.
pub fn forward_scheme_sweep(
    path: &[Symbol],
    times: impl IntoIterator<Item = usize>,
    alphabet: usize,
    params: &MemoryParams,
) -> Vec<MemoryVerdict> {
    let index = params.index(path);
    let mut counts = WindowCounts::new(&index, 0, 0);
    times
        .into_iter()
        .map(|n| verdict(&mut counts, n, alphabet, params))
        .collect()
}

/// Empirical law of the symbols that followed the earlier occurrences of
/// `X_{n-rho+1}^n` (occurrences ending at `i` with `rho - 1 <= i < n`).
/// For `rho = 0` this is the symbol frequency in `X_0^n`. `None` when the
/// suffix has no earlier occurrence.
pub fn qhat(path: &[Symbol], n: usize, rho: usize, alphabet: usize) -> Option<Vec<f64>> {
    if rho > n + 1 {
        return None;
    }
    let mut row = vec![0.0; alphabet];
    let suffix = &path[n + 1 - rho..=n];
    let mut total = 0usize;
    for i in (rho.max(1) - 1)..n {
        if &path[i + 1 - rho..=i] == suffix {
            total += 1;
            row[path[i + 1] as usize] += 1.0;
        }
    }
    if rho == 0 {
        total += 1;
        row[path[0] as usize] += 1.0;
    }
    if total == 0 {
        return None;
    }
    row.iter_mut().for_each(|r| *r /= total as f64);
    Some(row)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qhat_examples() {
        let path = [0, 1, 0, 1, 0, 1, 0, 1, 0];
        assert_eq!(qhat(&path, 8, 1, 2), Some(vec![0.0, 1.0]));
        assert_eq!(qhat(&[2; 9], 8, 1, 3), Some(vec![0.0, 0.0, 1.0]));
        assert_eq!(qhat(&[0, 1, 1, 1], 3, 0, 2), Some(vec![0.25, 0.75]));
        assert_eq!(qhat(&[0, 0, 1], 2, 1, 2), None);
    }

    #[test]
    fn first_time_accepts_everything() {
        // at n = 1 the test cut is 1, which no discrepancy exceeds
        let params = MemoryParams::default();
        let v = forward_scheme(&[0, 1], 1, 2, &params);
        assert!(v.in_n);
        assert_eq!((v.theta, v.rho), (0, Some(0)));
    }

    #[test]
    fn constant_path_selects_the_empty_word() {
        let params = MemoryParams::default();
        let v = forward_scheme(&[1; 100], 99, 2, &params);
        assert!(v.in_n);
        assert_eq!((v.theta, v.kappa, v.rho), (0, Some(0), Some(0)));
        assert_eq!(v.qhat, Some(vec![0.0, 1.0]));
    }

    #[test]
    fn alternating_path_selects_one_symbol() {
        let params = MemoryParams::default();
        let path: Vec<Symbol> = (0..500).map(|i| (i % 2) as Symbol).collect();
        let v = forward_scheme(&path, 499, 2, &params);
        assert!(v.in_n);
        assert_eq!(v.rho, Some(1));
        assert_eq!(v.kappa, Some(2));
        assert_eq!(v.qhat, Some(vec![1.0, 0.0]));
        let sweep = forward_scheme_sweep(&path, [100, 499], 2, &params);
        assert_eq!(sweep[1], v);
        assert_eq!(sweep[0], forward_scheme(&path, 100, 2, &params));
    }
}
