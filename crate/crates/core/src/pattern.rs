//! Recurrence and occurrence search over sample paths.
//!
//! The free functions are direct scans and serve as the reference behaviour.
//! [`SuccessorCounts`] and [`WordIndex`] are the accelerated structures the
//! estimators use when they sweep over every time index; both are tested for
//! agreement with the scans.

use std::collections::HashMap;

use thiserror::Error;

use crate::process::Symbol;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum SearchError {
    /// The pattern does not recur inside the available data.
    #[error("pattern does not recur within the available data")]
    NotFound,
    #[error("block of length {k} ending at {n} does not fit a path of length {len}")]
    InvalidBlock { n: usize, k: usize, len: usize },
}

/// Inclusive index range `[lo, hi]` of a path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    lo: usize,
    hi: usize,
}

impl Window {
    pub fn new(lo: usize, hi: usize, path_len: usize) -> Option<Self> {
        (lo <= hi && hi < path_len).then_some(Window { lo, hi })
    }

    pub fn lo(self) -> usize {
        self.lo
    }

    pub fn hi(self) -> usize {
        self.hi
    }
}

/// End positions of a word inside a window, strictly increasing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OccurrenceSet {
    pub word: Vec<Symbol>,
    pub positions: Vec<usize>,
}

impl OccurrenceSet {
    pub fn count(&self) -> usize {
        self.positions.len()
    }
}

fn check_block(path: &[Symbol], n: usize, k: usize) -> Result<(), SearchError> {
    if k == 0 || n >= path.len() || k > n + 1 {
        Err(SearchError::InvalidBlock { n, k, len: path.len() })
    } else {
        Ok(())
    }
}

/// Smallest `t > 0` with `path[n-k+1-t ..= n-t] == path[n-k+1 ..= n]`.
pub fn recurrence_time(path: &[Symbol], n: usize, k: usize) -> Result<usize, SearchError> {
    check_block(path, n, k)?;
    let start = n + 1 - k;
    let block = &path[start..=n];
    (1..=start)
        .find(|&t| &path[start - t..=n - t] == block)
        .ok_or(SearchError::NotFound)
}

/// `tau_1 < tau_2 < ...`: every earlier shift at which the block ending at
/// `n` reappears, up to `count_limit` of them.
pub fn occurrence_chain(path: &[Symbol], n: usize, k: usize, count_limit: usize) -> Vec<usize> {
    if check_block(path, n, k).is_err() {
        return Vec::new();
    }
    let start = n + 1 - k;
    let block = &path[start..=n];
    (1..=start)
        .filter(|&t| &path[start - t..=n - t] == block)
        .take(count_limit)
        .collect()
}

/// All end positions `t` in the window at which `word` occurs entirely inside it.
pub fn count_in_window(path: &[Symbol], window: Window, word: &[Symbol]) -> OccurrenceSet {
    let len = word.len();
    let positions = if len == 0 || window.hi + 1 < window.lo + len {
        Vec::new()
    } else {
        (window.lo + len - 1..=window.hi)
            .filter(|&t| &path[t + 1 - len..=t] == word)
            .collect()
    };
    OccurrenceSet {
        word: word.to_vec(),
        positions,
    }
}

/// Backward recurrence on a past stored oldest-first (`X_{-i} = past[len - i]`).
///
/// The pattern is `X_{-base-len+1} ..= X_{-base}`; the result is the
/// smallest `t > 0` with `X_{-base-len+1-t} ..= X_{-base-t}` equal to it.
pub fn last_occurrence_before(past: &[Symbol], pattern_len: usize, base: usize) -> Result<usize, SearchError> {
    if base == 0 || base > past.len() {
        return Err(SearchError::InvalidBlock {
            n: base,
            k: pattern_len,
            len: past.len(),
        });
    }
    recurrence_time(past, past.len() - base, pattern_len)
}

/// First `t >= 1` with `path[start+t ..= end+t] == path[start ..= end]`,
/// the recurrence searched forward in time.
pub fn next_occurrence(path: &[Symbol], start: usize, end: usize) -> Option<usize> {
    if start > end || end >= path.len() {
        return None;
    }
    let len = end - start + 1;
    let pattern = &path[start..=end];
    let first = pattern[0];
    (start + 1..=path.len() - len)
        .filter(|&s| path[s] == first)
        .find(|&s| &path[s..s + len] == pattern)
        .map(|s| s - start)
}

#[derive(Debug, Clone)]
struct SuccessorEntry {
    count: u32,
    successors: Vec<u32>,
}

/// Incremental counts of the earlier occurrences of short blocks and of the
/// symbols that followed them.
///
/// After `advance(n)`, every occurrence of a block of length `k` ending at
/// some `e <= n - 1` is counted, together with its successor `X_{e+1}`.
pub struct SuccessorCounts<'a> {
    path: &'a [Symbol],
    alphabet: usize,
    tables: Vec<HashMap<&'a [Symbol], SuccessorEntry>>,
    /// occurrences ending strictly before `horizon` are recorded
    horizon: usize,
}

impl<'a> SuccessorCounts<'a> {
    pub fn new(path: &'a [Symbol], alphabet: usize) -> Self {
        SuccessorCounts {
            path,
            alphabet,
            tables: Vec::new(),
            horizon: 0,
        }
    }

    fn record(&mut self, k: usize, end: usize) {
        if end + 1 < k || end >= self.path.len() {
            return;
        }
        let key = &self.path[end + 1 - k..=end];
        let alphabet = self.alphabet;
        let entry = self.tables[k - 1].entry(key).or_insert_with(|| SuccessorEntry {
            count: 0,
            successors: vec![0; alphabet],
        });
        entry.count += 1;
        entry.successors[self.path[end + 1] as usize] += 1;
    }

    /// Makes block lengths `1..=k` available, backfilling new tables.
    pub fn ensure_depth(&mut self, k: usize) {
        while self.tables.len() < k {
            self.tables.push(HashMap::new());
            let depth = self.tables.len();
            for end in 0..self.horizon {
                self.record(depth, end);
            }
        }
    }

    pub fn advance(&mut self, n: usize) {
        while self.horizon < n {
            for k in 1..=self.tables.len() {
                self.record(k, self.horizon);
            }
            self.horizon += 1;
        }
    }

    /// Earlier occurrences of the length-`k` block ending at `n` and their successor counts.
    pub fn lookup(&mut self, n: usize, k: usize) -> (u32, Option<&[u32]>) {
        self.ensure_depth(k);
        self.advance(n);
        if k > n + 1 {
            return (0, None);
        }
        match self.tables[k - 1].get(&self.path[n + 1 - k..=n]) {
            Some(e) => (e.count, Some(&e.successors)),
            None => (0, None),
        }
    }
}

pub type NodeId = u32;
const ROOT: NodeId = 0;

#[derive(Debug, Clone)]
struct TrieNode {
    depth: u32,
    /// sorted end positions of every occurrence of the word
    ends: Vec<u32>,
    children: Vec<(Symbol, NodeId)>,
    expanded: bool,
}

/// Trie of words keyed from their last symbol backwards.
///
/// The node of a word `v` has one child `a·v` per left extension, so the
/// ancestors of a node are exactly the suffixes of its word. Each node keeps
/// the sorted end positions of its occurrences. A node is expanded only when
/// `expand(depth, ends)` accepts it and `depth < max_depth`, which bounds the
/// size of the trie on long paths.
pub struct WordIndex<'a> {
    path: &'a [Symbol],
    nodes: Vec<TrieNode>,
    max_depth: usize,
}

impl<'a> WordIndex<'a> {
    pub fn build(path: &'a [Symbol], max_depth: usize, expand: impl Fn(usize, &[u32]) -> bool) -> Self {
        let root = TrieNode {
            depth: 0,
            ends: Vec::new(),
            children: Vec::new(),
            expanded: true,
        };
        let mut index = WordIndex {
            path,
            nodes: vec![root],
            max_depth,
        };
        // root children: single symbols
        let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); 256];
        for (e, &s) in path.iter().enumerate() {
            buckets[s as usize].push(e as u32);
        }
        let mut frontier = Vec::new();
        for (s, ends) in buckets.into_iter().enumerate() {
            if !ends.is_empty() {
                let id = index.push_child(ROOT, s as Symbol, ends);
                frontier.push(id);
            }
        }
        while let Some(id) = frontier.pop() {
            let depth = index.nodes[id as usize].depth as usize;
            if depth >= max_depth || !expand(depth, &index.nodes[id as usize].ends) {
                continue;
            }
            index.nodes[id as usize].expanded = true;
            let mut buckets: Vec<(Symbol, Vec<u32>)> = Vec::new();
            for &e in &index.nodes[id as usize].ends {
                let e = e as usize;
                if e >= depth {
                    let a = path[e - depth];
                    match buckets.iter_mut().find(|(s, _)| *s == a) {
                        Some((_, v)) => v.push(e as u32),
                        None => buckets.push((a, vec![e as u32])),
                    }
                }
            }
            buckets.sort_by_key(|(s, _)| *s);
            for (a, ends) in buckets {
                let child = index.push_child(id, a, ends);
                frontier.push(child);
            }
        }
        index
    }

    fn push_child(&mut self, parent: NodeId, symbol: Symbol, ends: Vec<u32>) -> NodeId {
        let id = self.nodes.len() as NodeId;
        let depth = self.nodes[parent as usize].depth + 1;
        self.nodes.push(TrieNode {
            depth,
            ends,
            children: Vec::new(),
            expanded: false,
        });
        let children = &mut self.nodes[parent as usize].children;
        let at = children.partition_point(|(s, _)| *s < symbol);
        children.insert(at, (symbol, id));
        id
    }

    pub fn path(&self) -> &'a [Symbol] {
        self.path
    }

    pub fn root(&self) -> NodeId {
        ROOT
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn depth(&self, node: NodeId) -> usize {
        self.nodes[node as usize].depth as usize
    }

    pub fn is_expanded(&self, node: NodeId) -> bool {
        self.nodes[node as usize].expanded
    }

    pub fn child(&self, node: NodeId, symbol: Symbol) -> Option<NodeId> {
        let children = &self.nodes[node as usize].children;
        children
            .binary_search_by_key(&symbol, |(s, _)| *s)
            .ok()
            .map(|i| children[i].1)
    }

    pub fn children(&self, node: NodeId) -> &[(Symbol, NodeId)] {
        &self.nodes[node as usize].children
    }

    /// Node of `word`, if it occurs and every proper suffix was expanded.
    pub fn find(&self, word: &[Symbol]) -> Option<NodeId> {
        word.iter().rev().try_fold(ROOT, |node, &s| self.child(node, s))
    }

    /// Node of `word · last`.
    pub fn find_extended(&self, word: &[Symbol], last: Symbol) -> Option<NodeId> {
        let first = self.child(ROOT, last)?;
        word.iter().rev().try_fold(first, |node, &s| self.child(node, s))
    }

    /// Earliest end position of the word, if any.
    pub fn first_end(&self, node: NodeId) -> Option<usize> {
        self.nodes[node as usize].ends.first().map(|&e| e as usize)
    }

    /// The word of a non-root node, oldest symbol first.
    pub fn word(&self, node: NodeId) -> &'a [Symbol] {
        let n = &self.nodes[node as usize];
        match n.ends.first() {
            Some(&e) => &self.path[e as usize + 1 - n.depth as usize..=e as usize],
            None => &[],
        }
    }

    pub fn ends(&self, node: NodeId) -> &[u32] {
        &self.nodes[node as usize].ends
    }
}

/// Occurrence counts restricted to a window `[lo, hi]` that only moves forward.
///
/// Counts are kept as two lazily advanced cursors per node into its sorted
/// end list, so a sweep over all windows costs amortized O(1) per query.
pub struct WindowCounts<'i, 'a> {
    index: &'i WordIndex<'a>,
    lo: usize,
    hi: usize,
    cursors: Vec<(u32, u32)>,
}

impl<'i, 'a> WindowCounts<'i, 'a> {
    pub fn new(index: &'i WordIndex<'a>, lo: usize, hi: usize) -> Self {
        assert!(
            lo <= hi && hi < index.path.len(),
            "window [{lo}, {hi}] outside the indexed path"
        );
        WindowCounts {
            index,
            lo,
            hi,
            cursors: vec![(0, 0); index.nodes.len()],
        }
    }

    pub fn index(&self) -> &'i WordIndex<'a> {
        self.index
    }

    pub fn lo(&self) -> usize {
        self.lo
    }

    pub fn hi(&self) -> usize {
        self.hi
    }

    /// Moves the window forward; neither bound may decrease.
    pub fn advance(&mut self, lo: usize, hi: usize) {
        assert!(lo >= self.lo && hi >= self.hi && lo <= hi && hi < self.index.path.len());
        self.lo = lo;
        self.hi = hi;
    }

    fn sync(&mut self, node: NodeId) -> (usize, usize) {
        let n = &self.index.nodes[node as usize];
        let depth = n.depth as usize;
        let min_end = self.lo + depth - 1;
        let (below, upto) = &mut self.cursors[node as usize];
        while (*below as usize) < n.ends.len() && (n.ends[*below as usize] as usize) < min_end {
            *below += 1;
        }
        while (*upto as usize) < n.ends.len() && (n.ends[*upto as usize] as usize) <= self.hi {
            *upto += 1;
        }
        (*below as usize, *upto as usize)
    }

    /// Occurrences lying entirely inside the window. The root (empty word)
    /// counts `hi - lo + 2` slots, one before each symbol plus the end.
    pub fn count(&mut self, node: NodeId) -> usize {
        if node == ROOT {
            return self.hi - self.lo + 2;
        }
        let (below, upto) = self.sync(node);
        upto.saturating_sub(below)
    }

    /// Occurrences inside the window that are followed by a symbol still in it.
    pub fn count_followed(&mut self, node: NodeId) -> usize {
        if node == ROOT {
            return self.hi - self.lo + 1;
        }
        let (below, upto) = self.sync(node);
        let ends = &self.index.nodes[node as usize].ends;
        let last_at_hi = upto > below && ends[upto - 1] as usize == self.hi;
        upto.saturating_sub(below) - usize::from(last_at_hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recurrence_examples() {
        assert_eq!(recurrence_time(&[0, 1, 0, 1, 0, 1], 5, 2), Ok(2));
        assert_eq!(recurrence_time(&[1, 1, 1, 1, 1], 4, 3), Ok(1));
        assert_eq!(recurrence_time(&[0, 0, 0, 1], 3, 1), Err(SearchError::NotFound));
        assert!(matches!(
            recurrence_time(&[0, 1], 1, 3),
            Err(SearchError::InvalidBlock { .. })
        ));
        assert!(matches!(
            recurrence_time(&[0, 1], 1, 0),
            Err(SearchError::InvalidBlock { .. })
        ));
    }

    #[test]
    fn chain_examples() {
        assert_eq!(occurrence_chain(&[1; 6], 5, 1, 3), vec![1, 2, 3]);
        assert_eq!(occurrence_chain(&[0, 1, 0, 1, 0, 1], 5, 2, 5), vec![2, 4]);
        assert!(occurrence_chain(&[0, 1, 0], 2, 4, 5).is_empty());
    }

    #[test]
    fn window_examples() {
        let path = [0, 1, 0, 1, 0];
        let w = Window::new(0, 4, 5).unwrap();
        assert_eq!(count_in_window(&path, w, &[0, 1]).positions, vec![1, 3]);
        assert_eq!(
            count_in_window(&path, Window::new(1, 2, 5).unwrap(), &[0, 1, 0]).count(),
            0
        );
        assert_eq!(count_in_window(&[2; 7], Window::new(0, 6, 7).unwrap(), &[2]).count(), 7);
        assert!(Window::new(3, 2, 5).is_none());
        assert!(Window::new(0, 5, 5).is_none());
    }

    #[test]
    fn backward_examples() {
        // X_{-i} = i mod 2, oldest first: X_{-6} .. X_{-1}
        let past = [0, 1, 0, 1, 0, 1];
        assert_eq!(last_occurrence_before(&past, 1, 1), Ok(2));
        assert_eq!(last_occurrence_before(&[1; 9], 4, 1), Ok(1));
        assert_eq!(last_occurrence_before(&[1, 0, 0, 0], 3, 1), Err(SearchError::NotFound));
    }

    #[test]
    fn forward_recurrence_examples() {
        assert_eq!(next_occurrence(&[0, 1, 0, 1, 0], 0, 1), Some(2));
        assert_eq!(next_occurrence(&[1, 0], 0, 0), None);
        assert_eq!(next_occurrence(&[1, 1, 1], 1, 2), None);
        assert_eq!(next_occurrence(&[1, 1, 1], 0, 1), Some(1));
    }

    #[test]
    fn successor_counts_follow_the_chain() {
        let path = [0u8, 1, 1, 0, 1, 1, 0, 1];
        let mut counts = SuccessorCounts::new(&path, 2);
        let (c, succ) = counts.lookup(7, 2);
        // block (0,1) earlier at ends 1 and 4, both followed by 1
        assert_eq!(c, 2);
        assert_eq!(succ.unwrap(), &[0, 2]);
        assert_eq!(occurrence_chain(&path, 7, 2, usize::MAX).len(), 2);
    }

    #[test]
    fn trie_counts_match_scans() {
        let path = [0u8, 1, 0, 0, 1, 0, 1, 1, 0, 0, 1, 0];
        let index = WordIndex::build(&path, 8, |_, _| true);
        let mut counts = WindowCounts::new(&index, 2, 9);
        for word in [&[0u8][..], &[1, 0], &[0, 1, 0], &[1, 1, 0, 0]] {
            let node = index.find(word).unwrap();
            let scan = count_in_window(&path, Window::new(2, 9, path.len()).unwrap(), word);
            assert_eq!(counts.count(node), scan.count(), "{word:?}");
            let followed = scan.positions.iter().filter(|&&t| t < 9).count();
            assert_eq!(counts.count_followed(node), followed, "{word:?}");
            assert_eq!(index.word(node), word);
        }
        assert!(index.find(&[1, 1, 1]).is_none());
    }
}
