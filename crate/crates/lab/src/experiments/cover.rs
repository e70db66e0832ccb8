//! The greedy cover mixture and its certificates.

use mixpred::cover::{build_cover, certify_bound};
use mixpred::Check;

use crate::error::LabResult;
use crate::row;
use crate::run::{Ctx, Outcome};
use crate::table::Table;

pub const GRID_PLUS_DIRACS: &[&str] =
    &["bernoulli-grid{8}", "dirac{0}", "dirac{1}", "dirac{01}", "dirac{0010(110)}"];

pub fn cover_certify(ctx: &Ctx) -> LabResult<Outcome> {
    let class = ctx.class("class", GRID_PLUS_DIRACS)?;
    let rho = ctx.measure("rho", "bernoulli{0.5}")?;
    let horizons = ctx.horizons(&[8, 12]);
    for &n in &horizons {
        ctx.check_cells(class.alphabet().size(), n)?;
    }
    let result = build_cover(&class, rho, &horizons)?;

    let mut sel = Table::new("selections", &["n", "k", "band", "l", "member", "mass"]);
    let mut checks = Vec::new();
    for h in &result.horizons {
        for s in &h.selections {
            sel.push(row![s.n, s.k, s.band, s.l, s.member, s.mass]);
        }
        checks.extend(h.checks.iter().cloned());
    }
    let mut cert = Table::new(
        "certificates",
        &["member", "label", "n", "loss_nu", "loss_rho", "slack", "slack_raw", "bound", "verdict"],
    );
    for &n in &horizons {
        for j in 0..class.len() {
            let c = certify_bound(&result, j, n)?;
            let v = if c.pass { "pass" } else { "fail" };
            cert.push(row![j, class.get(j).label(), n, c.loss_nu, c.loss_rho, c.slack, c.slack_raw, c.bound, v]);
            checks.push(Check::le(format!("n={n}:certificate[{j}]"), c.slack_raw, c.bound, 0.0));
        }
        checks.push(result.pathwise_check(n)?);
    }
    Ok(Outcome { tables: vec![sel, cert], checks })
}
