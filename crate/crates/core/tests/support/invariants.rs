//! Exact structural checks shared by the property tests and the acceptance run.

use seqest::forward::{DepthSchedule, ForwardPredictor};
use seqest::memory::{fm_scheme, MemoryParams};
use seqest::schedule::window_l;
use seqest::stoptime::{run_scheme, Scheme};
use seqest::Symbol;

fn strictly_increasing(v: &[usize]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

/// Stopping times increase and, when present, the `chi` gate holds.
pub fn check_fm(path: &[Symbol], params: &MemoryParams) -> Result<(), String> {
    let trace = fm_scheme(path, params, f64::from);
    if !strictly_increasing(&trace.zetas) {
        return Err(format!("zeta not increasing: {:?}", trace.zetas));
    }
    if !strictly_increasing(&trace.lambdas()) {
        return Err(format!("lambda not increasing: {:?}", trace.lambdas()));
    }
    for (s, &chi) in trace.chi.iter().enumerate().skip(1) {
        let h = s.div_ceil(2);
        let j = trace.zetas.partition_point(|&z| z < h) - 1;
        if j + 1 < trace.zetas.len() && chi > window_l(j + 1) {
            return Err(format!("chi_{s} = {chi} exceeds l_{} = {}", j + 1, window_l(j + 1)));
        }
    }
    for step in &trace.steps {
        if step.kappa != trace.chi[step.lambda] {
            return Err(format!("kappa at step {} is not chi at lambda", step.n));
        }
    }
    Ok(())
}

/// `kappa_n > 0` implies `lambda_n >= J_n`, and `g_n` is a probability row.
pub fn check_forward(path: &[Symbol], alphabet: usize, schedule: DepthSchedule) -> Result<(), String> {
    let mut predictor = ForwardPredictor::new(path, alphabet, schedule);
    let (mut last_k, mut last_j) = (1, 1);
    for n in 0..path.len() {
        let (k, j) = (schedule.k(n), schedule.j(n));
        if k < last_k.max(1) || j < last_j.max(1) {
            return Err(format!("schedule decreased at n = {n}"));
        }
        (last_k, last_j) = (k, j);
        let e = predictor.estimate(n);
        if e.kappa > 0 && e.lambda < j {
            return Err(format!(
                "kappa_{n} = {} but lambda_{n} = {} < J_n = {j}",
                e.kappa, e.lambda
            ));
        }
        if e.kappa > k {
            return Err(format!("kappa_{n} = {} exceeds K_n = {k}", e.kappa));
        }
        let total: f64 = e.row.iter().sum();
        if e.row.iter().any(|p| !(0.0..=1.0).contains(p)) || (e.kappa > 0 && (total - 1.0).abs() > 1e-12) {
            return Err(format!("row at n = {n} is not a distribution: {:?}", e.row));
        }
    }
    Ok(())
}

/// The trace on `path[..cut]` is an exact prefix of the trace on `path`.
pub fn check_extension(scheme: Scheme, path: &[Symbol], cut: usize) -> Result<(), String> {
    let short = run_scheme(scheme, &path[..cut]);
    let long = run_scheme(scheme, path);
    if !strictly_increasing(&long.times) {
        return Err(format!("{scheme}: times not increasing"));
    }
    let k = short.times.len();
    if long.times.len() < k || long.times[..k] != short.times[..] || long.estimates[..k] != short.estimates[..] {
        return Err(format!(
            "{scheme}: extension changed the first {k} steps (cut {cut} of {})",
            path.len()
        ));
    }
    Ok(())
}
