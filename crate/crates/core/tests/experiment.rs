use std::collections::BTreeMap;

use seqest::experiment::{run, summarize, ExperimentConfig, ParsedTrace};

const HIDDEN: &str = r#"{"type": "hidden", "transitions": [[0, 1, 0], [0, 0, 1], [0.5, 0.5, 0]], "distinguished": 0}"#;

fn config(estimator: &str, scoring: &str, length: usize, seeds: &str) -> ExperimentConfig {
    config_for(HIDDEN, estimator, scoring, length, seeds)
}

fn config_for(model: &str, estimator: &str, scoring: &str, length: usize, seeds: &str) -> ExperimentConfig {
    ExperimentConfig::from_json(&format!(
        r#"{{"model": {model},
            "estimator": {estimator}, "length": {length}, "seeds": "{seeds}", "scoring": "{scoring}"}}"#
    ))
    .unwrap()
}

fn parsed(cfg: &ExperimentConfig) -> ParsedTrace {
    let csv = run(cfg).unwrap().table.to_csv_string();
    ParsedTrace::read(csv.as_bytes()).unwrap()
}

fn lookup(summary: &str, section: &str, key: &str, stat: &str) -> Option<f64> {
    summary.lines().find_map(|l| {
        let f: Vec<&str> = l.split(',').collect();
        (f[0] == section && f[1] == key && f[2] == stat).then(|| f[3].parse().unwrap())
    })
}

#[test]
fn error_quantiles_match_a_direct_recomputation() {
    let cfg = config(r#"{"kind": "forward", "stride": 50}"#, "pointwise", 400, "0..9");
    let trace = parsed(&cfg);
    let qs = [0.0, 0.25, 0.5, 0.9, 1.0];
    let summary = summarize(&trace, &qs).unwrap().to_csv_string();
    let mut by_n: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for row in &trace.rows {
        by_n.entry(row[2].clone()).or_default().push(row[7].parse().unwrap());
    }
    assert_eq!(by_n.len(), 9);
    for (n, mut errs) in by_n {
        assert_eq!(errs.len(), 9);
        errs.sort_by(f64::total_cmp);
        for q in qs {
            let rank = ((q * 9.0).ceil() as usize).max(1);
            let got = lookup(&summary, "error", &n, &format!("q{q}")).unwrap();
            assert_eq!(got, errs[rank - 1], "n = {n}, q = {q}");
        }
    }
}

#[test]
fn density_and_growth_fractions_are_counts() {
    let cfg = config(r#"{"kind": "memory", "mode": "forward"}"#, "memory", 300, "0..3");
    let trace = parsed(&cfg);
    let summary = summarize(&trace, &[0.5]).unwrap().to_csv_string();
    for rep in 0..3 {
        let rows: Vec<_> = trace.rows.iter().filter(|r| r[0] == rep.to_string()).collect();
        let hits = rows.iter().filter(|r| r[3] == "1").count();
        let got = lookup(&summary, "density", &rep.to_string(), "fraction").unwrap();
        assert_eq!(got, hits as f64 / rows.len() as f64);
    }

    let cfg = config_for(
        r#"{"type": "iid", "alphabet": 2, "probs": [0.5, 0.5]}"#,
        r#"{"kind": "stoptime", "scheme": "mw03", "growth_eps": 0.3}"#,
        "stoptime",
        5000,
        "0..5",
    );
    let trace = parsed(&cfg);
    let summary = summarize(&trace, &[0.5]).unwrap().to_csv_string();
    let within = trace.columns.iter().position(|c| c == "within_bound").unwrap();
    let mut per_k: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for row in &trace.rows {
        let e = per_k.entry(row[2].clone()).or_default();
        e.0 += usize::from(row[within] == "1");
        e.1 += 1;
    }
    for (k, (hits, total)) in per_k {
        assert_eq!(
            lookup(&summary, "growth", &k, "fraction").unwrap(),
            hits as f64 / total as f64
        );
    }
}

#[test]
fn zero_errors_give_zero_quantiles() {
    let text = "replicate,seed,n,abs_err\n0,1,5,0\n1,2,5,0\n2,3,5,0\n";
    let summary = summarize(&ParsedTrace::read(text.as_bytes()).unwrap(), &[0.1, 0.5, 0.9])
        .unwrap()
        .to_csv_string();
    assert_eq!(
        summary,
        "section,key,statistic,value\nerror,5,count,3\nerror,5,q0.1,0\nerror,5,q0.5,0\nerror,5,q0.9,0\n"
    );
}

#[test]
fn every_estimator_kind_runs() {
    let cases = [
        (r#"{"kind": "backward", "t_values": [10, 100, 500]}"#, "pointwise"),
        (r#"{"kind": "forward", "depth": 2}"#, "cesaro"),
        (r#"{"kind": "stoptime", "scheme": "morvai2000"}"#, "stoptime"),
        (
            r#"{"kind": "memory", "mode": "ntest", "times": [100, 499], "words": [[1], [0, 0]]}"#,
            "memory",
        ),
        (r#"{"kind": "memory", "mode": "chi", "times": [499]}"#, "memory"),
        (r#"{"kind": "memory", "mode": "qhat"}"#, "memory"),
        (r#"{"kind": "memory", "mode": "fm"}"#, "memory"),
        (r#"{"kind": "memory", "mode": "ordest", "times": [50, 499]}"#, "memory"),
    ];
    for (estimator, scoring) in cases {
        let cfg = config(estimator, scoring, 500, "3..=4");
        let a = run(&cfg).unwrap();
        assert_eq!(a.meta.replicates.iter().map(|r| r.seed).collect::<Vec<_>>(), vec![3, 4]);
        assert!(!a.table.rows.is_empty(), "{estimator}");
        assert_eq!(a.table.to_csv_string(), run(&cfg).unwrap().table.to_csv_string());
    }
}
