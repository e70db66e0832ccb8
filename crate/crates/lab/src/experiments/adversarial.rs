//! Counterexamples, chain bounds, contamination and dominance.

use mixpred::adversarial::{
    chain_test_sequence, contamination_kl_check, dominance_check, dominance_consequence_check, hidden_chain_rate,
    laplace_grid, lb_mechanism, middle_case, nodom, nosum_ad, nosum_avad, stno_check, suboptimal_bayes,
    Coefficients, Consequence, DominanceMode, NotParams,
};
use mixpred::measures::replica_rng;
use mixpred::Check;

use super::scheme;
use crate::config::MethodName;
use crate::error::{LabError, LabResult};
use crate::row;
use crate::run::{Ctx, Outcome};
use crate::table::Table;

fn checks_table(name: &str) -> Table {
    Table::new(name, &["key", "value"])
}

// ---------------------------------------------------------------------------
// lb
// ---------------------------------------------------------------------------

pub fn lb(ctx: &Ctx) -> LabResult<Outcome> {
    let n: usize = ctx.param("n", 12)?;
    let prior: String = ctx.param("prior", "telescoping".to_string())?;
    ctx.check_cells(2, n)?;
    let r = lb_mechanism(n, &scheme(&prior)?)?;
    let mut t = Table::new("lb", &["n", "s", "prior", "w_s", "bound", "argmin", "log_nu_upper", "regret"]);
    t.push(row![r.n, r.s, r.prior, r.w_s, r.bound, r.argmin, r.log_nu_upper, r.regret]);
    Ok(Outcome { tables: vec![t], checks: r.checks })
}

// ---------------------------------------------------------------------------
// suboptimal-bayes
// ---------------------------------------------------------------------------

pub fn suboptimal(ctx: &Ctx) -> LabResult<Outcome> {
    let d = NotParams::default();
    let params = NotParams {
        p: ctx.param("p", d.p)?,
        n: ctx.param("n", d.n)?,
        support: ctx.param("support", d.support)?,
        seeds: ctx.param("seeds", d.seeds)?,
        seed: ctx.seed()?,
        t0: ctx.param("t0", d.t0)?,
        max_attempts: ctx.param("max_attempts", d.max_attempts)?,
    };
    let r = suboptimal_bayes(&params)?;
    let mut t = Table::new("losses", &["predictor", "smoothed", "mean", "std_error", "regret", "entropy"]);
    for b in r.bayes.iter().chain(std::iter::once(&r.tripartite)) {
        t.push(row![b.prior, b.smoothed, b.mean, b.std_error, b.regret, r.entropy]);
    }
    Ok(Outcome { tables: vec![t], checks: r.checks })
}

// ---------------------------------------------------------------------------
// Chains
// ---------------------------------------------------------------------------

pub fn stationary_plus(ctx: &Ctx) -> LabResult<Outcome> {
    let horizons = ctx.horizons(&[5, 10, 20, 30]);
    let sequences: usize = ctx.param("sequences", 5)?;
    let top = horizons.iter().copied().max().unwrap_or(1);
    let j_max = ctx.j_max(2 * top + 16);
    let extra: usize = ctx.param("truncation_probe", 64)?;
    let seed = ctx.seed()?;
    let mut t = Table::new("chains", &["sequence", "n", "x", "neg_log_mu", "bound", "tail_mass", "probe_diff"]);
    let mut checks = Vec::new();
    for i in 0..sequences as u64 {
        let x = chain_test_sequence(j_max, top, &mut replica_rng(seed, i));
        // The same sequence with a deeper truncation: the fill makes the extra start states contribute nothing.
        let mut deeper = x.clone();
        deeper.resize(x.len() + extra, x[x.len() - 1]);
        for &n in &horizons {
            let r = stno_check(&x, j_max, n)?;
            let probe = stno_check(&deeper, j_max + extra, n)?;
            let diff = (r.neg_log_mu - probe.neg_log_mu).abs();
            t.push(row![i, n, r.x, r.neg_log_mu, r.bound, r.tail_mass, diff]);
            checks.push(Check::le(format!("seq{i}:{}", r.check.id), r.check.lhs, r.check.rhs, r.check.tolerance));
            checks.push(Check::le(format!("seq{i}:truncation[n={n}]"), diff, 0.0, 1e-10));
        }
    }
    Ok(Outcome { tables: vec![t], checks })
}

pub fn hidden_markov(ctx: &Ctx) -> LabResult<Outcome> {
    let n: usize = ctx.param("n", 30)?;
    let tolerance: f64 = ctx.param("tolerance", 3.0)?;
    let j_max = ctx.j_max(64.max(n));
    let t = chain_test_sequence(j_max, n, &mut replica_rng(ctx.seed()?, 0));
    let r = hidden_chain_rate(&t, j_max, n, tolerance)?;
    let mut table = Table::new("hidden_chain", &["n", "t", "neg_log_mu", "target", "tail_mass"]);
    table.push(row![r.n, r.t, r.neg_log_mu, r.target, r.tail_mass]);
    Ok(Outcome { tables: vec![table], checks: vec![r.check] })
}

// ---------------------------------------------------------------------------
// Dominance
// ---------------------------------------------------------------------------

pub fn laplace_dominance(ctx: &Ctx) -> LabResult<Outcome> {
    let horizon: usize = ctx.param("horizon", 12)?;
    let points: usize = ctx.param("points", 101)?;
    if points < 2 {
        return Err(LabError::Config("params.points must be at least 2".into()));
    }
    ctx.check_cells(2, horizon)?;
    let g = laplace_grid(horizon, points)?;
    let mut t = Table::new("laplace_grid", &["horizon", "points", "cells", "min_margin", "equality_at_ones"]);
    t.push(row![g.horizon, g.points, g.cells, g.min_margin, g.equality_at_ones]);
    let checks = vec![
        Check::holds("laplace:rho>=mu/(n+1)", g.all_pass),
        Check::ge("laplace:min-margin", g.min_margin, 0.0, 1e-9),
        Check::holds("laplace:equality-at-1^n", g.equality_at_ones),
    ];
    Ok(Outcome { tables: vec![t], checks })
}

fn coefficients(ctx: &Ctx, alphabet: usize) -> LabResult<Coefficients> {
    let kind: String = ctx.param("coefficients", "laplace".to_string())?;
    Ok(match kind.as_str() {
        "laplace" => Coefficients::Laplace { alphabet },
        "sqrt-over-log" => Coefficients::SqrtOverLog,
        "constant" => Coefficients::Constant(ctx.param("coefficient_value", 0.5)?),
        "exponential" => Coefficients::Exponential(ctx.param("coefficient_value", 0.5)?),
        other => {
            return Err(LabError::Config(format!(
                "unknown coefficients `{other}` (laplace | sqrt-over-log | constant | exponential)"
            )))
        }
    })
}

pub fn dominance_consequence(ctx: &Ctx) -> LabResult<Outcome> {
    let rho = ctx.measure("rho", "laplace{2}")?;
    let mu = ctx.measure("mu", "bernoulli{0.3}")?;
    let coeff = coefficients(ctx, mu.alphabet().size())?;
    let horizon: usize = ctx.param("horizon", 12)?;
    ctx.check_cells(mu.alphabet().size(), horizon)?;
    let cert = dominance_check(rho.as_ref(), mu.as_ref(), &coeff, horizon, DominanceMode::Exhaustive)?;
    let kind: String = ctx.param("consequence", "expected-average".to_string())?;
    let consequence = match kind.as_str() {
        "expected-average" => Consequence::ExpectedAverage {
            n: ctx.param("n", 1024)?,
            method: ctx.method(MethodName::Binomial)?,
            eps: ctx.param("eps", 1e-6)?,
        },
        "pathwise-average" => Consequence::PathwiseAverage {
            horizons: ctx.horizons(&[100, 1000, 10000]),
            paths: ctx.param("paths", 50)?,
            seed: ctx.seed()?,
        },
        other => {
            return Err(LabError::Config(format!(
                "unknown consequence `{other}` (expected-average | pathwise-average)"
            )))
        }
    };
    let v = dominance_consequence_check(&cert, rho.as_ref(), mu.as_ref(), &consequence)?;
    let mut c = Table::new(
        "certificate",
        &["rho", "mu", "coefficients", "class", "horizon", "cells", "min_margin", "pass"],
    );
    c.push(row![
        cert.rho,
        cert.mu,
        cert.coefficients.describe(),
        cert.class.to_string(),
        cert.horizon,
        cert.cells,
        cert.min_margin,
        cert.pass
    ]);
    let mut s = Table::new("consequence", &["n", "value"]);
    for &(n, x) in &v.series {
        s.push(row![n, x]);
    }
    let mut checks = vec![
        Check::holds("dom:certificate", cert.pass),
        Check::holds(format!("dom:applicable[{}]", cert.class), v.applicable),
    ];
    checks.extend(v.checks);
    Ok(Outcome { tables: vec![c, s], checks })
}

// ---------------------------------------------------------------------------
// Contamination
// ---------------------------------------------------------------------------

pub fn contamination_kl(ctx: &Ctx) -> LabResult<Outcome> {
    let mu = ctx.measure("mu", "markov{1, [0.9, 0.1, 0.3, 0.7]}")?;
    let rho = ctx.measure("rho", "kt{2}")?;
    let chi = ctx.measure("chi", "climbing")?;
    let horizons = ctx.horizons(&[4, 8, 12]);
    let method = ctx.method(MethodName::Enumerate)?;
    let mut t = Table::new("contamination", &["n", "loss_rho_plus_one", "loss_mixed"]);
    let mut checks = Vec::new();
    for &n in &horizons {
        if matches!(method, mixpred::loss::Method::Enumerate) {
            ctx.check_cells(mu.alphabet().size(), n)?;
        }
        let c = contamination_kl_check(mu.as_ref(), rho.clone(), chi.clone(), n, &method)?;
        t.push(row![n, c.rhs, c.lhs]);
        checks.push(Check { id: format!("n={n}:{}", c.id), ..c });
    }
    Ok(Outcome { tables: vec![t], checks })
}

pub fn nosum_ad_exp(ctx: &Ctx) -> LabResult<Outcome> {
    let k_max: u32 = ctx.param("k_max", 4)?;
    let r = nosum_ad(k_max)?;
    let mut t = Table::new("nosum_ad", &["k", "n", "conditional", "closed_form", "rho_alone"]);
    for w in &r.rows {
        t.push(row![w.k, w.n, w.conditional, w.closed_form, w.rho_alone]);
    }
    Ok(Outcome { tables: vec![t], checks: r.checks })
}

pub fn nosum_avad_exp(ctx: &Ctx) -> LabResult<Outcome> {
    let horizon: usize = ctx.param("horizon", 4096)?;
    let paths: usize = ctx.param("paths", 20)?;
    let r = nosum_avad(horizon, paths, ctx.seed()?)?;
    let mut t = Table::new("nosum_avad", &["path_seed", "kill", "min_abar_after", "follows_chi", "abar_rho"]);
    for p in &r.paths {
        t.push(row![p.seed, p.kill, p.min_abar_after, p.follows_chi, r.abar_rho]);
    }
    Ok(Outcome { tables: vec![t], checks: r.checks })
}

// ---------------------------------------------------------------------------
// Weights, middle case, non-dominance
// ---------------------------------------------------------------------------

pub fn weights_matter_exp(ctx: &Ctx) -> LabResult<Outcome> {
    let n: usize = ctx.param("n", 100)?;
    let r = mixpred::adversarial::weights_matter(n)?;
    let mut t = Table::new("weights", &["n", "loss_quadratic", "bound_quadratic", "loss_geometric"]);
    t.push(row![r.n, r.loss_quadratic, r.bound_quadratic, r.loss_geometric]);
    Ok(Outcome { tables: vec![t], checks: r.checks })
}

pub fn middle_case_exp(ctx: &Ctx) -> LabResult<Outcome> {
    let n: usize = ctx.param("n", 16)?;
    let experts: usize = ctx.param("experts", 8)?;
    ctx.check_cells(2, n)?;
    let r = middle_case(n, ctx.seed()?, experts)?;
    let mut t = Table::new("middle_case", &["predictor", "argmin", "per_step"]);
    t.push(row!["gamma'(target)", r.target, r.gamma_per_step]);
    for c in &r.candidates {
        t.push(row![c.label, c.argmin, c.per_step]);
    }
    Ok(Outcome { tables: vec![t], checks: r.checks })
}

pub fn nodom_exp(ctx: &Ctx) -> LabResult<Outcome> {
    let k_max: u32 = ctx.param("k_max", 5)?;
    let horizon: usize = ctx.param("horizon", 12)?;
    ctx.check_cells(2, horizon)?;
    let r = nodom(k_max, horizon)?;
    let mut t = Table::new("spikes", &["n", "delta", "a"]);
    for &(n, d, a) in &r.spikes {
        t.push(row![n, d, a]);
    }
    let mut c = checks_table("certificate");
    c.push(row!["coefficients", r.cert.coefficients.describe()]);
    c.push(row!["class", r.cert.class.to_string()]);
    c.push(row!["min_margin", r.cert.min_margin]);
    c.push(row!["pass", r.cert.pass]);
    Ok(Outcome { tables: vec![t, c], checks: r.checks })
}
