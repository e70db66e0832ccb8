//! Acceptance criteria 1-15: one line per criterion, nonzero exit on any failure.
//!
//! Each criterion runs the registered experiment with its default config (the
//! defaults are the acceptance settings) and then checks the pinned numbers
//! directly on the result, so a drifting default cannot mask a failure.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::{Duration, Instant};

use mixpred_lab::{csv_export, find, registry, run, ExperimentConfig, ExperimentResult};

struct Line {
    pass: bool,
    detail: String,
}

fn default_run(id: &str) -> ExperimentResult {
    let cfg = ExperimentConfig::parse(find(id).unwrap().template).unwrap();
    run(&cfg).unwrap_or_else(|e| panic!("{id}: {e}"))
}

fn failed(r: &ExperimentResult) -> Vec<String> {
    r.verdicts.iter().filter(|c| !c.pass).map(|c| format!("{} ({} vs {})", c.id, c.lhs, c.rhs)).collect()
}

fn cell(r: &ExperimentResult, table: &str, row: usize, col: &str) -> String {
    let t = r.table(table).unwrap_or_else(|| panic!("{}: no table {table}", r.id));
    let j = t.header.iter().position(|h| h == col).unwrap_or_else(|| panic!("{table}: no column {col}"));
    t.rows[row][j].clone()
}

fn num(r: &ExperimentResult, table: &str, row: usize, col: &str) -> f64 {
    cell(r, table, row, col).parse().unwrap()
}

fn col(r: &ExperimentResult, table: &str, name: &str) -> Vec<String> {
    let t = r.table(table).unwrap();
    let j = t.header.iter().position(|h| h == name).unwrap();
    t.rows.iter().map(|row| row[j].clone()).collect()
}

fn all_pass(results: &[&ExperimentResult], extra: bool, detail: String) -> Line {
    let fails: Vec<String> = results.iter().flat_map(|r| failed(r)).collect();
    if fails.is_empty() && extra {
        Line { pass: true, detail }
    } else {
        Line { pass: false, detail: format!("{detail}; failing: {}", fails.join(", ")) }
    }
}

// ---------------------------------------------------------------------------
// Criteria
// ---------------------------------------------------------------------------

fn c1() -> Line {
    let r = default_run("mixture-bound");
    let p = &r.config.params;
    let shape = p["horizon"].as_integer() == Some(10)
        && p["samples"].as_integer() == Some(1000)
        && p["sample_horizon"].as_integer() == Some(1000)
        && r.verdicts.iter().all(|c| c.tolerance <= 1e-9);
    let worst = r.verdicts.iter().map(|c| c.lhs).fold(f64::NEG_INFINITY, f64::max);
    all_pass(&[&r], shape, format!("{} mixtures, max excess over -log2 w_k = {worst:e}", r.verdicts.len() / 2))
}

fn c2() -> Line {
    let r = default_run("disc-adversarial");
    let per_step: Vec<f64> = col(&r, "adversarial", "per_step").iter().map(|v| v.parse().unwrap()).collect();
    let n_max = col(&r, "adversarial", "n").iter().map(|v| v.parse::<usize>().unwrap()).max().unwrap();
    let min = per_step.iter().copied().fold(f64::INFINITY, f64::min);
    all_pass(&[&r], min >= 1.0 && n_max == 20, format!("min per-step loss {min} bits over n <= {n_max}"))
}

fn c3() -> Line {
    let r = default_run("nml-negative");
    let c = r.verdicts.iter().find(|c| c.id.starts_with("nml:signed-divergence=")).unwrap();
    let ok = (c.lhs - 0.75f64.log2()).abs() <= 1e-12 && c.tolerance == 1e-12;
    all_pass(&[&r], ok, format!("d = {} vs log2(3/4) = {}", c.lhs, 0.75f64.log2()))
}

fn c4() -> Line {
    let r = default_run("nml-bound");
    let rows = r.table("rho_c_bound").unwrap().rows.len();
    let mut detail = Vec::new();
    let mut ok = rows == 6;
    for i in 0..rows {
        let (loss, printed, derived) =
            (num(&r, "rho_c_bound", i, "per_step"), num(&r, "rho_c_bound", i, "printed"), num(&r, "rho_c_bound", i, "derived"));
        let n: f64 = num(&r, "rho_c_bound", i, "n");
        ok &= loss <= printed && num(&r, "rho_c_bound", i, "log_cn").exp2() <= n + 1.0;
        detail.push(format!("p={} n={n}: {loss:.4} <= {printed:.4} (derived {derived:.4})", cell(&r, "rho_c_bound", i, "p")));
    }
    all_pass(&[&r], ok, detail.join("; "))
}

fn c5() -> Line {
    let a = default_run("capacity-minimax");
    let gap = num(&a, "minimax", 0, "capacity_bits") - num(&a, "minimax", 0, "grid_minimax");
    let n = cell(&a, "minimax", 0, "n");
    let b = default_run("capacity-predictor");
    let horizons = b.table("rho_capacity").unwrap().rows.len();
    let members = b.config.measures["class"].entries().len();
    let ok = gap.abs() <= 1e-3 && n == "4" && horizons == 10 && members == 8;
    all_pass(
        &[&a, &b],
        ok,
        format!("n=4 solver - minimax = {gap:e}; rho_C printed bound holds for {members} chains at n <= {horizons}"),
    )
}

fn c6() -> Line {
    let r = default_run("cover-certify");
    let ns: Vec<String> = col(&r, "certificates", "n");
    let ok = ns.iter().any(|n| n == "8") && ns.iter().any(|n| n == "12");
    let worst = r
        .verdicts
        .iter()
        .filter(|c| c.id.contains("certificate"))
        .map(|c| c.lhs - c.rhs)
        .fold(f64::NEG_INFINITY, f64::max);
    all_pass(&[&r], ok, format!("{} certificates, max slack - bound = {worst:.4}", ns.len()))
}

fn c7() -> Line {
    let r = default_run("lb");
    let (n, regret, bound, w_s) =
        (num(&r, "lb", 0, "n"), num(&r, "lb", 0, "regret"), num(&r, "lb", 0, "bound"), num(&r, "lb", 0, "w_s"));
    let ok = n == 12.0 && cell(&r, "lb", 0, "prior") == "telescoping" && regret >= bound && bound > 0.0;
    all_pass(&[&r], ok, format!("W_s = {w_s}, regret {regret:.4} >= -log2(1-W_s) = {bound:.4}"))
}

fn c8() -> Line {
    let r = default_run("suboptimal-bayes");
    let p = &r.config.params;
    let h = num(&r, "losses", 0, "entropy");
    let shape = p["p"].as_float() == Some(0.3)
        && p["n"].as_integer() == Some(2000)
        && p["support"].as_integer() == Some(200)
        && p["seeds"].as_integer() == Some(50);
    let rows = r.table("losses").unwrap().rows.len();
    let mut ok = shape;
    let mut detail = Vec::new();
    for i in 0..rows {
        let name = format!("{}{}", cell(&r, "losses", i, "predictor"), if cell(&r, "losses", i, "smoothed") == "true" { "+s" } else { "" });
        let (mean, se) = (num(&r, "losses", i, "mean"), num(&r, "losses", i, "std_error"));
        if name == "tripartite" {
            ok &= mean <= 1.1 * h && se < 0.02;
        } else {
            ok &= mean >= 1.7 * h && (mean.is_infinite() || se < 0.02);
        }
        detail.push(format!("{name} {:.3}h", mean / h));
    }
    all_pass(&[&r], ok, format!("h = {h:.4}; {}", detail.join(", ")))
}

fn c9() -> Line {
    let r = default_run("stationary-plus");
    let ns: std::collections::BTreeSet<String> = col(&r, "chains", "n").into_iter().collect();
    let seqs: std::collections::BTreeSet<String> = col(&r, "chains", "sequence").into_iter().collect();
    let probe = col(&r, "chains", "probe_diff").iter().map(|v| v.parse::<f64>().unwrap()).fold(0.0, f64::max);
    let ok = seqs.len() == 5 && ns.len() == 4 && probe <= 1e-10;
    all_pass(&[&r], ok, format!("{} rows; truncation change under deeper J_max {probe:e}", seqs.len() * ns.len()))
}

fn c10() -> Line {
    let r = default_run("hidden-markov");
    let (v, t) = (num(&r, "hidden_chain", 0, "neg_log_mu"), num(&r, "hidden_chain", 0, "target"));
    let ok = num(&r, "hidden_chain", 0, "n") == 30.0 && (v - t).abs() <= 3.0;
    all_pass(&[&r], ok, format!("-log2 mu_t = {v:.4} vs 30 log2(3/2) = {t:.4}"))
}

fn c11() -> Line {
    let r = default_run("laplace-dominance");
    let ok = num(&r, "laplace_grid", 0, "horizon") == 12.0
        && num(&r, "laplace_grid", 0, "points") == 101.0
        && cell(&r, "laplace_grid", 0, "equality_at_ones") == "true";
    all_pass(&[&r], ok, format!("{} cells, min margin {}", cell(&r, "laplace_grid", 0, "cells"), cell(&r, "laplace_grid", 0, "min_margin")))
}

fn c12() -> Line {
    let r = default_run("pinsker-sweep");
    let steps: usize = col(&r, "pinsker", "steps").iter().map(|s| s.parse::<usize>().unwrap()).sum();
    let violations: usize = col(&r, "pinsker", "violations").iter().map(|s| s.parse::<usize>().unwrap()).sum();
    all_pass(&[&r], steps >= 10_000 && violations == 0, format!("{violations} violations in {steps} steps"))
}

fn c13() -> Line {
    let a = default_run("contamination-kl");
    let b = default_run("nosum-ad");
    let c = default_run("nosum-avad");
    let ks = b.table("nosum_ad").unwrap().rows.len();
    all_pass(
        &[&a, &b, &c],
        ks == 4,
        format!("{} + {} + {} verdicts", a.verdicts.len(), b.verdicts.len(), c.verdicts.len()),
    )
}

fn c14() -> Line {
    let r = default_run("weights-matter");
    let (g, q, b) =
        (num(&r, "weights", 0, "loss_geometric"), num(&r, "weights", 0, "loss_quadratic"), num(&r, "weights", 0, "bound_quadratic"));
    let ok = num(&r, "weights", 0, "n") == 100.0 && (g - 99.0).abs() <= 1e-9 && q <= b;
    all_pass(&[&r], ok, format!("geometric {g}, quadratic {q:.4} <= {b:.4}"))
}

fn export_bytes(r: &ExperimentResult) -> BTreeMap<String, Vec<u8>> {
    let dir = tempfile::tempdir().unwrap();
    csv_export(r, dir.path()).unwrap();
    let mut out = BTreeMap::new();
    for e in std::fs::read_dir(dir.path()).unwrap() {
        let p = e.unwrap().path();
        out.insert(p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap());
    }
    out
}

fn c15() -> Line {
    let mut checked = 0;
    let mut diffs = Vec::new();
    for e in registry() {
        let cfg = ExperimentConfig::parse(e.template).unwrap();
        let pool = |t| rayon::ThreadPoolBuilder::new().num_threads(t).build().unwrap();
        let a = pool(1).install(|| run(&cfg)).unwrap();
        let b = pool(4).install(|| run(&cfg)).unwrap();
        if export_bytes(&a) != export_bytes(&b) {
            diffs.push(e.id);
        }
        checked += 1;
    }
    let ok = diffs.is_empty() && checked >= 14;
    Line {
        pass: ok,
        detail: format!("{checked} experiments run twice (1 and 4 threads), differing: {diffs:?}"),
    }
}

// ---------------------------------------------------------------------------

fn main() {
    type Criterion = (&'static str, Duration, fn() -> Line);
    let criteria: [Criterion; 15] = [
        ("mixture regret bound", Duration::from_secs(10), c1),
        ("adversarial sequence", Duration::from_secs(1), c2),
        ("NML pathology", Duration::from_secs(1), c3),
        ("ML-plug-in bound", Duration::from_secs(30), c4),
        ("channel capacity", Duration::from_secs(60), c5),
        ("cover certificates", Duration::from_secs(60), c6),
        ("lower-bound mechanism", Duration::from_secs(10), c7),
        ("suboptimal Bayes gap", Duration::from_secs(300), c8),
        ("stationary chain", Duration::from_secs(30), c9),
        ("hidden Markov rate", Duration::from_secs(5), c10),
        ("Laplace dominance", Duration::from_secs(30), c11),
        ("Pinsker sweep", Duration::from_secs(5), c12),
        ("contamination table", Duration::from_secs(60), c13),
        ("weights matter", Duration::from_secs(1), c14),
        ("determinism", Duration::from_secs(300), c15),
    ];
    let suite = Instant::now();
    let mut out = std::io::stdout().lock();
    let mut failures = 0;
    for (i, (name, budget, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let line = f();
        let took = start.elapsed();
        let pass = line.pass && took <= *budget;
        failures += usize::from(!pass);
        writeln!(
            out,
            "criterion {:>2} {:<30} {}  {:>8.3}s / {:>3}s  {}",
            i + 1,
            name,
            if pass { "PASS" } else { "FAIL" },
            took.as_secs_f64(),
            budget.as_secs(),
            line.detail
        )
        .unwrap();
    }
    let total = suite.elapsed();
    writeln!(out, "acceptance suite {:.1}s (budget 300s), {failures} failing", total.as_secs_f64()).unwrap();
    if failures > 0 || total > Duration::from_secs(300) {
        std::process::exit(1);
    }
}
