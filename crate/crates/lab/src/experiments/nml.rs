//! NML pathology and the patched predictor.

use mixpred::nml::{bernoulli_rho_c_loss, four_measure_class, nml_conditional_pathology, nml_table, SupOracle};
use mixpred::{Alphabet, Check};
use rayon::prelude::*;

use crate::error::LabResult;
use crate::row;
use crate::run::{Ctx, Outcome};
use crate::table::Table;

pub fn nml_negative(ctx: &Ctx) -> LabResult<Outcome> {
    let n: usize = ctx.param("table_horizon", 2)?;
    let p = nml_conditional_pathology()?;
    let mut cond = Table::new("conditionals", &["symbol", "mu", "lambda"]);
    for (a, (m, l)) in p.mu_conditional.iter().zip(&p.lambda_conditional).enumerate() {
        cond.push(row![a, m, l]);
    }
    let table = nml_table(&SupOracle::Finite(four_measure_class()?), Alphabet::BINARY, n)?;
    let mut lam = Table::new("nml_table", &["x", "sup", "lambda"]);
    for (x, c, l) in table.rows() {
        lam.push(row![x, c, l]);
    }
    let sum: f64 = p.lambda_conditional.iter().sum();
    let checks = vec![
        Check::close("nml:signed-divergence=log2(3/4)", p.value, 0.75f64.log2(), 1e-12),
        Check::le("nml:signed-divergence<0", p.value, 0.0, 0.0),
        // The horizon-mixing conditionals of lambda are not a distribution.
        Check::ge("nml:conditional-mass>1", sum, 1.0, 0.0),
    ];
    Ok(Outcome { tables: vec![cond, lam], checks })
}

pub fn nml_bound(ctx: &Ctx) -> LabResult<Outcome> {
    let ps: Vec<f64> = ctx.param("ps", vec![0.1, 0.3, 0.5])?;
    let horizons = ctx.horizons(&[64, 256]);
    let factor: usize = ctx.param("component_factor", 2)?;
    let jobs: Vec<(f64, usize)> = ps.iter().flat_map(|&p| horizons.iter().map(move |&n| (p, n))).collect();
    let reports = jobs
        .par_iter()
        .map(|&(p, n)| bernoulli_rho_c_loss(p, n, factor.max(1) * n))
        .collect::<mixpred::Result<Vec<_>>>()?;
    let mut table =
        Table::new("rho_c_bound", &["p", "n", "per_step", "log_cn", "printed", "derived", "dropped_mass"]);
    let mut checks = Vec::new();
    for r in &reports {
        let (p, n) = (r.p, r.n);
        table.push(row![p, n, r.per_step, r.bound.log_cn, r.bound.printed, r.bound.derived, r.dropped_mass]);
        checks.push(Check::le(format!("ml[p={p},n={n}]:printed"), r.per_step, r.bound.printed, 0.0));
        checks.push(Check::le(format!("ml[p={p},n={n}]:derived"), r.per_step, r.bound.derived, 0.0));
        checks.push(Check::le(format!("ml[n={n}]:c_n<=n+1"), r.bound.log_cn.exp2(), (n + 1) as f64, 1e-9));
    }
    Ok(Outcome { tables: vec![table], checks })
}
