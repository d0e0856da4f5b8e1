//! Rescan oracles for the pattern engine and a single-trial comparison.

use seqest::pattern::{
    count_in_window, last_occurrence_before, next_occurrence, occurrence_chain, recurrence_time, SuccessorCounts,
    Window, WindowCounts, WordIndex,
};
use seqest::Symbol;

pub fn naive_shifts(path: &[Symbol], n: usize, k: usize) -> Vec<usize> {
    let block = &path[n + 1 - k..=n];
    let mut out = Vec::new();
    for t in 1..=n {
        if n + 1 >= k + t && path[n + 1 - k - t..=n - t] == *block {
            out.push(t);
        }
    }
    out
}

pub fn naive_ends(path: &[Symbol], word: &[Symbol], lo: usize, hi: usize) -> Vec<usize> {
    let mut out = Vec::new();
    for e in lo..=hi {
        if e + 1 >= lo + word.len() && !word.is_empty() && path[e + 1 - word.len()..=e] == *word {
            out.push(e);
        }
    }
    out
}

pub fn naive_successors(path: &[Symbol], n: usize, k: usize, alphabet: usize) -> (u32, Vec<u32>) {
    let block = &path[n + 1 - k..=n];
    let mut succ = vec![0u32; alphabet];
    let mut count = 0;
    for e in k - 1..n {
        if path[e + 1 - k..=e] == *block {
            count += 1;
            succ[path[e + 1] as usize] += 1;
        }
    }
    (count, succ)
}

pub fn naive_next(path: &[Symbol], start: usize, end: usize) -> Option<usize> {
    let len = end - start + 1;
    (1..)
        .take_while(|t| start + t + len <= path.len())
        .find(|&t| path[start + t..start + t + len] == path[start..=end])
}

/// Every block `(n, k)` of `path`, sorted by `n`.
pub fn all_points(path: &[Symbol], max_k: usize) -> Vec<(usize, usize)> {
    (0..path.len())
        .flat_map(|n| (1..=(n + 1).min(max_k)).map(move |k| (n, k)))
        .collect()
}

/// Compares the pattern operations on `path` against the rescans above at
/// the blocks `points` (sorted by `n`, each with `1 <= k <= n + 1`), for
/// `word` (nonempty) and for the forward-moving `windows`.
pub fn check(
    path: &[Symbol],
    alphabet: usize,
    word: &[Symbol],
    points: &[(usize, usize)],
    windows: &[(usize, usize)],
) -> Result<(), String> {
    let len = path.len();
    let fail = |what: &str, detail: String| Err(format!("{what}: {detail} on {path:?}"));

    let mut succ = SuccessorCounts::new(path, alphabet);
    for &(n, k) in points {
        let shifts = naive_shifts(path, n, k);
        let got = recurrence_time(path, n, k).ok();
        if got != shifts.first().copied() {
            return fail(
                "recurrence_time",
                format!("n={n} k={k} got {got:?} want {:?}", shifts.first()),
            );
        }
        let chain = occurrence_chain(path, n, k, 3);
        if chain[..] != shifts[..shifts.len().min(3)] {
            return fail("occurrence_chain", format!("n={n} k={k}"));
        }
        let base = len - n;
        if last_occurrence_before(path, k, base).ok() != shifts.first().copied() {
            return fail("last_occurrence_before", format!("base={base} k={k}"));
        }
        if naive_next(path, n + 1 - k, n) != next_occurrence(path, n + 1 - k, n) {
            return fail("next_occurrence", format!("start={} end={n}", n + 1 - k));
        }
        let (count, row) = naive_successors(path, n, k, alphabet);
        let (got, got_row) = succ.lookup(n, k);
        let got_row = got_row.map(|r| r.to_vec());
        if got != count || (count > 0 && got_row.as_deref() != Some(&row[..])) {
            return fail(
                "successor_counts",
                format!("n={n} k={k} got {got} {got_row:?} want {count} {row:?}"),
            );
        }
    }

    let max_depth = points.iter().map(|p| p.1).max().unwrap_or(1).max(word.len());
    let index = WordIndex::build(path, max_depth, |_, _| true);
    let blocks = points.iter().map(|&(n, k)| &path[n + 1 - k..=n]);
    for w in blocks.chain(std::iter::once(word)) {
        let want = naive_ends(path, w, 0, len - 1);
        match index.find(w) {
            Some(node) => {
                let got: Vec<usize> = index.ends(node).iter().map(|&e| e as usize).collect();
                if got != want || index.word(node) != w || index.depth(node) != w.len() {
                    return fail("word_index", format!("word {w:?} got {got:?} want {want:?}"));
                }
            }
            None if !want.is_empty() => return fail("word_index", format!("word {w:?} missing")),
            None => {}
        }
    }

    let Some(&(lo0, hi0)) = windows.first() else {
        return Ok(());
    };
    let mut counts = WindowCounts::new(&index, lo0, hi0);
    for &(lo, hi) in windows {
        counts.advance(lo, hi);
        if counts.count(index.root()) != hi - lo + 2 || counts.count_followed(index.root()) != hi - lo + 1 {
            return fail("window_counts", "root".into());
        }
        let window = Window::new(lo, hi, len).expect("valid window");
        let listed = count_in_window(path, window, word);
        let want = naive_ends(path, word, lo, hi);
        if listed.positions != want {
            return fail("count_in_window", format!("[{lo}, {hi}] {word:?}"));
        }
        if let Some(node) = index.find(word) {
            let followed = want.iter().filter(|&&e| e < hi).count();
            if counts.count(node) != want.len() || counts.count_followed(node) != followed {
                return fail("window_counts", format!("[{lo}, {hi}] {word:?}"));
            }
        } else if !want.is_empty() {
            return fail("window_counts", format!("{word:?} occurs but is not indexed"));
        }
    }
    Ok(())
}
