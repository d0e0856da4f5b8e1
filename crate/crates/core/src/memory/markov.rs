//! Order estimation and conditional probabilities for finite-order chains.

use serde::{Deserialize, Serialize};

use super::{passes, qhat, MemoryParams};
use crate::pattern::{count_in_window, NodeId, Window, WindowCounts};
use crate::process::Symbol;

/// Smallest `k` such that every frequent word of length `k` in `X_0^n`
/// passes the memory-word test. The empty word stands for `k = 0`; a length
/// with no frequent word passes vacuously.
pub fn ordest(path: &[Symbol], n: usize, params: &MemoryParams) -> usize {
    let prefix = &path[..=n];
    let index = params.index(prefix);
    let mut counts = WindowCounts::new(&index, 0, n);
    let cut = params.frequency_cut(n);
    let mut level: Vec<NodeId> = vec![index.root()];
    for k in 0..params.max_word {
        if level
            .iter()
            .all(|&node| passes(&mut counts, n, index.word(node), params))
        {
            return k;
        }
        let mut next = Vec::new();
        for &node in &level {
            for &(_, child) in index.children(node) {
                if counts.count(child) as f64 > cut {
                    next.push(child);
                }
            }
        }
        level = next;
    }
    params.max_word
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovQhat {
    pub n: usize,
    pub order: usize,
    /// the suffix of length `order` occurs at least `n^{1-gamma}` times in `X_0^n`
    pub in_n: bool,
    pub row: Option<Vec<f64>>,
}

/// Successor frequencies of the suffix whose length is the estimated order.
pub fn markov_qhat(path: &[Symbol], n: usize, alphabet: usize, params: &MemoryParams) -> MarkovQhat {
    let order = ordest(path, n, params);
    let occurrences = if order == 0 {
        n + 1
    } else if order > n + 1 {
        0
    } else {
        let window = Window::new(0, n, path.len()).expect("n indexes the path");
        count_in_window(path, window, &path[n + 1 - order..=n]).count()
    };
    let in_n = occurrences as f64 >= params.frequency_cut(n);
    MarkovQhat {
        n,
        order,
        in_n,
        row: qhat(path, n, order, alphabet),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_path() {
        let params = MemoryParams::default();
        let q = markov_qhat(&[1; 200], 199, 2, &params);
        assert_eq!(q.order, 0);
        assert!(q.in_n);
        assert_eq!(q.row, Some(vec![0.0, 1.0]));
    }

    #[test]
    fn alternating_path_has_order_one() {
        let params = MemoryParams::default();
        let path: Vec<Symbol> = (0..300).map(|i| (i % 2) as Symbol).collect();
        assert_eq!(ordest(&path, 299, &params), 1);
        let q = markov_qhat(&path, 299, 2, &params);
        assert!(q.in_n);
        assert_eq!(q.row, Some(vec![1.0, 0.0]));
    }

    #[test]
    fn tiny_n_accepts_the_empty_word() {
        // with three symbols no extension is frequent, so order 0 passes
        let params = MemoryParams::default();
        for path in [[0, 1, 1], [1, 0, 1], [0, 0, 0]] {
            let q = markov_qhat(&path, 2, 2, &params);
            assert_eq!(q.order, 0);
            assert!(q.in_n);
        }
    }
}
