//! Integer schedules shared by the estimators.

/// `max(1, floor(0.1 * log_a n))`, evaluated exactly as the largest `m` with `a^(10 m) <= n`.
pub fn depth_k(alphabet: usize, n: usize) -> usize {
    assert!(alphabet >= 2, "depth schedule needs at least two symbols");
    let step = (alphabet as u128).checked_pow(10);
    let mut m = 0;
    let mut power: u128 = 1;
    while let Some(next) = step.and_then(|s| power.checked_mul(s)) {
        if next > n as u128 {
            break;
        }
        power = next;
        m += 1;
    }
    m.max(1)
}

/// `max(1, ceil(sqrt n))`.
pub fn count_j(n: usize) -> usize {
    let r = n.isqrt();
    let r = if r * r == n { r } else { r + 1 };
    r.max(1)
}

/// `l_n = min(n, max(1, floor(10 log2 n)))`; `l_0 = 0`.
pub fn window_l(n: usize) -> usize {
    if n == 0 {
        return 0;
    }
    let f = (10.0 * (n as f64).log2()).floor() as usize;
    n.min(f.max(1))
}
