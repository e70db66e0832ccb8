//! Channel capacity of classes restricted to `X^n`.

use mixpred::capacity::{
    bernoulli_grid_capacity, blahut_arimoto, build_rho_capacity, grid_minimax, rho_capacity_bound, CapacityResult,
    Channel, DEFAULT_MAX_ITERS,
};
use mixpred::loss::{worst_case_loss, Method};
use mixpred::Check;

use crate::error::LabResult;
use crate::row;
use crate::run::{Ctx, Outcome};
use crate::table::Table;

pub const FOUR_MEMBERS: &[&str] =
    &["bernoulli{0.1}", "bernoulli{0.4}", "bernoulli{0.8}", "markov{1, [0.9, 0.1, 0.2, 0.8]}"];

pub const EIGHT_CHAINS: &[&str] = &[
    "markov{1, [0.9, 0.1, 0.2, 0.8]}",
    "markov{1, [0.7, 0.3, 0.4, 0.6]}",
    "markov{1, [0.5, 0.5, 0.5, 0.5]}",
    "markov{1, [0.3, 0.7, 0.8, 0.2]}",
    "markov{1, [0.95, 0.05, 0.95, 0.05]}",
    "markov{1, [0.1, 0.9, 0.1, 0.9]}",
    "markov{1, [0.6, 0.4, 0.2, 0.8]}",
    "markov{1, [0.2, 0.8, 0.6, 0.4]}",
];

fn capacity_table(results: &[CapacityResult]) -> Table {
    let mut t = Table::new("capacity", &["n", "capacity_bits", "iterations", "gap"]);
    for r in results {
        t.push(row![r.n, r.capacity, r.iterations, r.gap]);
    }
    t
}

pub fn capacity(ctx: &Ctx) -> LabResult<Outcome> {
    let r: usize = ctx.param("r", 64)?;
    let tol: f64 = ctx.param("tol", 1e-9)?;
    let max_iters: usize = ctx.param("max_iters", DEFAULT_MAX_ITERS)?;
    let horizons = ctx.horizons(&[4, 16, 64]);
    let results = horizons
        .iter()
        .map(|&n| bernoulli_grid_capacity(r, n, tol, max_iters))
        .collect::<mixpred::Result<Vec<_>>>()?;
    let mut checks = Vec::new();
    let ceiling = ((r + 1) as f64).log2();
    for c in &results {
        checks.push(Check::le(format!("capacity[n={}]:gap", c.n), c.gap, tol, 0.0));
        checks.push(Check::le(format!("capacity[n={}]<=log2(r+1)", c.n), c.capacity, ceiling, 1e-9));
    }
    for w in results.windows(2) {
        if w[1].n > w[0].n {
            let (a, b) = (&w[0], &w[1]);
            checks.push(Check::ge(format!("capacity[n={}]>=capacity[n={}]", b.n, a.n), b.capacity, a.capacity, 2.0 * tol));
            checks.push(Check::le(
                format!("capacity/n[n={}]<=capacity/n[n={}]", b.n, a.n),
                b.capacity / b.n as f64,
                a.capacity / a.n as f64,
                2.0 * tol,
            ));
        }
    }
    Ok(Outcome { tables: vec![capacity_table(&results)], checks })
}

pub fn capacity_minimax(ctx: &Ctx) -> LabResult<Outcome> {
    let class = ctx.class("class", FOUR_MEMBERS)?;
    let horizons = ctx.horizons(&[4]);
    let steps: usize = ctx.param("grid_steps", 20)?;
    let rounds: usize = ctx.param("grid_rounds", 60)?;
    let tol: f64 = ctx.param("tol", 1e-9)?;
    let agreement: f64 = ctx.param("agreement", 1e-3)?;
    let mut results = Vec::new();
    let mut mm = Table::new("minimax", &["n", "capacity_bits", "upper", "grid_minimax", "grid_maximin", "evaluations"]);
    let mut checks = Vec::new();
    for &n in &horizons {
        ctx.check_cells(class.alphabet().size(), n)?;
        let ch = Channel::from_class(&class, n)?;
        let c = blahut_arimoto(&ch, tol, DEFAULT_MAX_ITERS);
        let g = grid_minimax(&ch, steps, rounds);
        mm.push(row![n, c.capacity, c.upper, g.minimax, g.maximin, g.evaluations]);
        checks.push(Check::close(format!("cc[n={n}]:solver=grid-minimax"), c.capacity, g.minimax, agreement));
        checks.push(Check::close(format!("cc[n={n}]:solver=grid-maximin"), c.capacity, g.maximin, agreement));
        checks.push(Check::ge(format!("cc[n={n}]:minimax>=maximin"), g.minimax, g.maximin, 1e-12));
        results.push(c);
    }
    Ok(Outcome { tables: vec![capacity_table(&results), mm], checks })
}

pub fn capacity_predictor(ctx: &Ctx) -> LabResult<Outcome> {
    let class = ctx.class("class", EIGHT_CHAINS)?;
    let max_n: usize = ctx.param("max_horizon", 10)?;
    let tol: f64 = ctx.param("tol", 1e-9)?;
    ctx.check_cells(class.alphabet().size(), max_n)?;
    let (rho, results) = build_rho_capacity(&class, max_n, tol)?;
    let mut t = Table::new("rho_capacity", &["n", "capacity_bits", "worst_per_step", "argmax", "printed", "derived"]);
    let mut checks = Vec::new();
    for r in &results {
        let n = r.n;
        let w = worst_case_loss(&class, &rho, n, &Method::Enumerate)?;
        let (printed, derived) = rho_capacity_bound(r.capacity, n);
        t.push(row![n, r.capacity, w.per_step, w.argmax, printed, derived]);
        checks.push(Check::le(format!("ccb[n={n}]:printed"), w.per_step, printed, 0.0));
        checks.push(Check::le(format!("ccb[n={n}]:derived"), w.per_step, derived, 0.0));
    }
    Ok(Outcome { tables: vec![capacity_table(&results), t], checks })
}
