//! Channel capacity of a finite class restricted to `X^n`.
//!
//! Rows of the channel are class members, columns are cells of `X^n`.
//! For a prior `P` with barycentre `q = sum_j P_j row_j`,
//!
//! ```text
//! D_j  = KL(row_j || q)
//! I(P) = sum_j P_j D_j  <=  C  <=  max_j D_j
//! ```
//!
//! Blahut-Arimoto updates `P_j <- P_j 2^{D_j} / Z` until the two sides meet.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::measures::{enumerate_logprobs, MeasureRef, Truncated};
use crate::mixture::{Mixture, ModelClass, WeightScheme};

/// Cell cap for capacity channels.
pub const CAPACITY_CELL_CAP: u128 = 1 << 20;

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_ITERS: usize = 2_000_000;

// ---------------------------------------------------------------------------
// Channels
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    rows: Vec<Vec<f64>>,
    /// Columns removed because every row gives them mass 0.
    pub dropped_columns: usize,
}

impl Channel {
    /// Rows are renormalized; all-zero rows are rejected.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let Some(width) = rows.first().map(Vec::len) else {
            return Err(Error::EmptyClass);
        };
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::InvalidParameter("ragged channel rows".into()));
        }
        let keep: Vec<usize> = (0..width).filter(|&c| rows.iter().any(|r| r[c] > 0.0)).collect();
        let mut out = Vec::with_capacity(rows.len());
        for (j, r) in rows.iter().enumerate() {
            if r.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::InvalidParameter(format!("row {j} has invalid entries")));
            }
            let z: f64 = r.iter().sum();
            if z <= 0.0 {
                return Err(Error::InvalidParameter(format!("row {j} gives every cell probability 0")));
            }
            out.push(keep.iter().map(|&c| r[c] / z).collect());
        }
        Ok(Self { rows: out, dropped_columns: width - keep.len() })
    }

    /// One row per member over `X^n`.
    pub fn from_class(class: &ModelClass, n: usize) -> Result<Self> {
        let rows: Vec<Vec<f64>> = class
            .measures()
            .par_iter()
            .map(|m| enumerate_logprobs(m.as_ref(), n, CAPACITY_CELL_CAP).map(|l| l.iter().map(|v| v.exp2()).collect()))
            .collect::<Result<_>>()?;
        Self::new(rows)
    }

    /// Binary i.i.d. members with `P(0) = p`, aggregated by number of ones.
    /// The count is sufficient, so the capacity equals that of the full channel.
    pub fn from_bernoulli_counts(ps: &[f64], n: usize) -> Result<Self> {
        let lnfact = |k: usize| ln_gamma(k as f64 + 1.0);
        let rows = ps
            .iter()
            .map(|&p| {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::InvalidParameter(format!("p = {p} outside [0, 1]")));
                }
                Ok((0..=n)
                    .map(|j| {
                        let zeros = n - j;
                        let mut l = lnfact(n) - lnfact(j) - lnfact(zeros);
                        if zeros > 0 {
                            l += zeros as f64 * p.ln();
                        }
                        if j > 0 {
                            l += j as f64 * (1.0 - p).ln();
                        }
                        l.exp()
                    })
                    .collect())
            })
            .collect::<Result<Vec<Vec<f64>>>>()?;
        Self::new(rows)
    }

    #[must_use]
    pub fn inputs(&self) -> usize {
        self.rows.len()
    }

    #[must_use]
    pub fn outputs(&self) -> usize {
        self.rows[0].len()
    }

    #[must_use]
    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// `q = sum_j P_j row_j`.
    #[must_use]
    pub fn barycentre(&self, prior: &[f64]) -> Vec<f64> {
        let mut q = vec![0.0; self.outputs()];
        for (row, &p) in self.rows.iter().zip(prior) {
            if p > 0.0 {
                for (qc, &v) in q.iter_mut().zip(row) {
                    *qc += p * v;
                }
            }
        }
        q
    }

    /// `KL(row_j || q)` in bits for every row.
    #[must_use]
    pub fn divergences(&self, q: &[f64]) -> Vec<f64> {
        let work = |row: &Vec<f64>| crate::loss::kl_div(row, q);
        if self.inputs() * self.outputs() > 1 << 16 {
            self.rows.par_iter().map(work).collect()
        } else {
            self.rows.iter().map(work).collect()
        }
    }

    /// `I(P) = sum_j P_j KL(row_j || q_P)`.
    #[must_use]
    pub fn mutual_information(&self, prior: &[f64]) -> f64 {
        let q = self.barycentre(prior);
        self.divergences(&q).iter().zip(prior).filter(|(_, &p)| p > 0.0).map(|(d, p)| p * d).sum()
    }

    /// `max_j KL(row_j || q_P)`: worst-case loss of the barycentre.
    #[must_use]
    pub fn worst_divergence(&self, prior: &[f64]) -> f64 {
        let q = self.barycentre(prior);
        self.divergences(&q).into_iter().fold(0.0, f64::max)
    }
}

// ---------------------------------------------------------------------------
// Solver
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityResult {
    pub n: usize,
    pub class_size: usize,
    /// `I(P)` at the returned prior, bits.
    pub capacity: f64,
    /// `max_j D_j`, an upper bound on the capacity.
    pub upper: f64,
    pub prior: Vec<f64>,
    pub barycentre: Vec<f64>,
    pub iterations: usize,
    pub gap: f64,
    pub converged: bool,
}

/// Blahut-Arimoto with the standard sandwich as stopping rule.
///
/// Once the gap is small, a Newton step on the current support is tried
/// every few hundred iterations; it is kept only if it certifies.
#[must_use]
pub fn blahut_arimoto(channel: &Channel, tol: f64, max_iters: usize) -> CapacityResult {
    let m = channel.inputs();
    let mut prior = vec![1.0 / m as f64; m];
    let mut iterations = 0;
    let finish = |prior: Vec<f64>, iterations: usize| {
        let q = channel.barycentre(&prior);
        let d = channel.divergences(&q);
        let lower: f64 = d.iter().zip(&prior).map(|(d, p)| p * d).sum();
        let upper = d.iter().copied().fold(0.0, f64::max);
        let gap = (upper - lower).max(0.0);
        CapacityResult {
            n: 0,
            class_size: m,
            capacity: lower.max(0.0),
            upper,
            prior,
            barycentre: q,
            iterations,
            gap,
            converged: gap <= tol,
        }
    };
    loop {
        let q = channel.barycentre(&prior);
        let d = channel.divergences(&q);
        let lower: f64 = d.iter().zip(&prior).map(|(d, p)| p * d).sum();
        let upper = d.iter().copied().fold(0.0, f64::max);
        let gap = (upper - lower).max(0.0);
        if gap <= tol || iterations >= max_iters {
            return finish(prior, iterations);
        }
        if gap < 1e-3 && iterations % POLISH_EVERY == 0 {
            if let Some(p) = newton_polish(channel, &prior, tol) {
                let r = finish(p, iterations);
                if r.converged {
                    return r;
                }
            }
        }
        // Shift by the max for stability.
        let mut next: Vec<f64> = prior.iter().zip(&d).map(|(p, d)| p * (d - upper).exp2()).collect();
        let z: f64 = next.iter().sum();
        for v in &mut next {
            *v /= z;
        }
        prior = next;
        iterations += 1;
    }
}

const POLISH_EVERY: usize = 200;

/// Active-set Newton solve of the capacity conditions.
///
/// On a support `S` the conditions are `D_j(q_P) = C` for `j` in `S` and
/// `sum P = 1`. Entries that go negative leave `S`; the input with the
/// largest `D_j` outside `S` joins it while `max_j D_j > C`.
fn newton_polish(channel: &Channel, prior: &[f64], tol: f64) -> Option<Vec<f64>> {
    let m = prior.len();
    let top = prior.iter().copied().fold(0.0, f64::max);
    let mut support: Vec<usize> = (0..m).filter(|&j| prior[j] > 1e-3 * top).collect();
    let mut init: Vec<f64> = support.iter().map(|&j| prior[j]).collect();
    for _ in 0..4 * m {
        let (kept, p) = newton_on_support(channel, support, init)?;
        let mut full = vec![0.0; m];
        for (&j, &v) in kept.iter().zip(&p) {
            full[j] = v;
        }
        let q = channel.barycentre(&full);
        let d = channel.divergences(&q);
        let c: f64 = d.iter().zip(&full).map(|(d, p)| d * p).sum();
        let (worst, dmax) = d
            .iter()
            .enumerate()
            .filter(|(j, _)| !kept.contains(j))
            .fold((usize::MAX, f64::NEG_INFINITY), |b, (j, &v)| if v > b.1 { (j, v) } else { b });
        let inner = kept.iter().map(|&j| d[j]).fold(0.0, f64::max);
        if inner.max(dmax) - c <= tol {
            return Some(full);
        }
        if worst == usize::MAX || dmax <= c {
            // Violation sits inside the support: the solve did not converge.
            return None;
        }
        support = kept;
        support.push(worst);
        init = p.iter().map(|v| v * 0.99).collect();
        init.push(0.01);
    }
    None
}

/// Newton iteration on a fixed support. Returns the surviving support and
/// the normalized weights on it.
fn newton_on_support(channel: &Channel, mut support: Vec<usize>, init: Vec<f64>) -> Option<(Vec<usize>, Vec<f64>)> {
    let rows = channel.rows();
    let mut p = init;
    let normalize = |p: &mut Vec<f64>| {
        let z: f64 = p.iter().sum();
        p.iter_mut().for_each(|v| *v /= z);
    };
    normalize(&mut p);
    let mut drops = 0;
    let mut iter = 0;
    while iter < 100 {
        iter += 1;
        let s = support.len();
        if s == 0 {
            return None;
        }
        let mut full = vec![0.0; rows.len()];
        for (&j, &v) in support.iter().zip(&p) {
            full[j] = v;
        }
        let q = channel.barycentre(&full);
        let d: Vec<f64> = support.iter().map(|&j| crate::loss::kl_div(&rows[j], &q)).collect();
        let c: f64 = d.iter().zip(&p).map(|(d, p)| d * p).sum();
        let residual = d.iter().map(|v| (v - c).abs()).fold(0.0, f64::max);
        if residual < 1e-14 {
            break;
        }
        // Unknowns (p_1..p_s, C); equations D_j - C = 0 and sum p - 1 = 0.
        let dim = s + 1;
        let w = dim + 1;
        let mut a = vec![0.0; dim * w];
        for (r, &j) in support.iter().enumerate() {
            for (k, &l) in support.iter().enumerate().skip(r) {
                let mut acc = 0.0;
                for ((&wj, &wl), &qy) in rows[j].iter().zip(&rows[l]).zip(&q) {
                    if qy > 0.0 {
                        acc += wj * wl / qy;
                    }
                }
                let v = -acc / std::f64::consts::LN_2;
                a[r * w + k] = v;
                a[k * w + r] = v;
            }
            a[r * w + s] = -1.0;
            a[r * w + dim] = -(d[r] - c);
            a[s * w + r] = 1.0;
        }
        a[s * w + dim] = -(p.iter().sum::<f64>() - 1.0);
        let step = solve_augmented(&mut a, dim)?;
        let mut t = 1.0;
        while p.iter().zip(&step).any(|(v, dv)| v + t * dv <= 0.0) {
            t *= 0.5;
            if t < 1e-2 {
                break;
            }
        }
        if t < 1e-2 {
            // Drop the entry heading furthest below zero and start over on the
            // smaller support.
            let worst = p
                .iter()
                .zip(&step)
                .enumerate()
                .map(|(i, (v, dv))| (i, v + dv))
                .fold((0, f64::INFINITY), |b, x| if x.1 < b.1 { x } else { b })
                .0;
            support.remove(worst);
            p.remove(worst);
            normalize(&mut p);
            drops += 1;
            if drops > rows.len() {
                return None;
            }
            iter = 0;
            continue;
        }
        for (v, dv) in p.iter_mut().zip(&step) {
            *v += t * dv;
        }
        normalize(&mut p);
    }
    Some((support, p))
}

/// Gaussian elimination with partial pivoting on a `dim x (dim + 1)` system.
fn solve_augmented(a: &mut [f64], dim: usize) -> Option<Vec<f64>> {
    let w = dim + 1;
    for col in 0..dim {
        let piv = (col..dim).max_by(|&x, &y| a[x * w + col].abs().total_cmp(&a[y * w + col].abs()))?;
        if a[piv * w + col].abs() < 1e-300 {
            return None;
        }
        if piv != col {
            for k in 0..w {
                a.swap(piv * w + k, col * w + k);
            }
        }
        for r in col + 1..dim {
            let f = a[r * w + col] / a[col * w + col];
            if f != 0.0 {
                for k in col..w {
                    a[r * w + k] -= f * a[col * w + k];
                }
            }
        }
    }
    let mut x = vec![0.0; dim];
    for r in (0..dim).rev() {
        let mut acc = a[r * w + dim];
        for k in r + 1..dim {
            acc -= a[r * w + k] * x[k];
        }
        x[r] = acc / a[r * w + r];
    }
    x.iter().all(|v| v.is_finite()).then(|| x[..dim - 1].to_vec())
}

/// Capacity of `class` restricted to `X^n`.
pub fn channel_capacity(class: &ModelClass, n: usize, tol: f64, max_iters: usize) -> Result<CapacityResult> {
    let channel = Channel::from_class(class, n)?;
    let mut r = blahut_arimoto(&channel, tol, max_iters);
    r.n = n;
    Ok(r)
}

/// Capacity of the binary i.i.d. grid `{P(0) = i/r}` at horizon `n`.
pub fn bernoulli_grid_capacity(r: usize, n: usize, tol: f64, max_iters: usize) -> Result<CapacityResult> {
    let ps: Vec<f64> = (0..=r).map(|i| i as f64 / r as f64).collect();
    let channel = Channel::from_bernoulli_counts(&ps, n)?;
    let mut res = blahut_arimoto(&channel, tol, max_iters);
    res.n = n;
    Ok(res)
}

/// Closed form for a channel with rows `(a, 1-a)` and `(b, 1-b)`, `a != b`.
#[must_use]
pub fn binary_channel_capacity(a: f64, b: f64) -> f64 {
    // Solve W c = -H(W_j) for the output potentials; C = log2 sum_y 2^{c_y}.
    let h = |p: f64| crate::measures::binary_entropy(p);
    let det = a * (1.0 - b) - b * (1.0 - a);
    if det.abs() < 1e-15 {
        return 0.0;
    }
    let (ha, hb) = (-h(a), -h(b));
    let c0 = ((1.0 - b) * ha - (1.0 - a) * hb) / det;
    let c1 = (a * hb - b * ha) / det;
    (c0.exp2() + c1.exp2()).log2()
}

// ---------------------------------------------------------------------------
// Brute-force minimax over priors
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMinimax {
    /// `min_P max_j D_j(q_P)` over the searched priors.
    pub minimax: f64,
    /// `max_P I(P)` over the searched priors.
    pub maximin: f64,
    pub minimax_prior: Vec<f64>,
    pub evaluations: usize,
}

fn simplex_points(dim: usize, steps: usize) -> Vec<Vec<usize>> {
    fn rec(dim: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() + 1 == dim {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for c in 0..=left {
            cur.push(c);
            rec(dim, left - c, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(dim, steps, &mut Vec::with_capacity(dim), &mut out);
    out
}

/// Coarse-to-fine grid search over the prior simplex.
///
/// Both objectives are convex/concave in `P`, so refining around the
/// incumbent converges; each of the `rounds` refinements shrinks the cell
/// width by a quarter.
#[must_use]
pub fn grid_minimax(channel: &Channel, steps: usize, rounds: usize) -> GridMinimax {
    let m = channel.inputs();
    let offsets = simplex_points(m, steps);
    let search = |objective: &(dyn Fn(&[f64]) -> f64 + Sync), minimize: bool| -> (f64, Vec<f64>, usize) {
        let mut centre = vec![1.0 / m as f64; m];
        let mut radius = 1.0;
        let mut best = (if minimize { f64::INFINITY } else { f64::NEG_INFINITY }, centre.clone());
        let mut evals = 0;
        for _ in 0..=rounds {
            let candidates: Vec<Vec<f64>> = offsets
                .iter()
                // centre + radius * (o / steps - uniform), clipped back to the simplex.
                .map(|o| {
                    let mut p: Vec<f64> = o
                        .iter()
                        .zip(&centre)
                        .map(|(&c, &z)| (z + radius * (c as f64 / steps as f64 - 1.0 / m as f64)).max(0.0))
                        .collect();
                    let t: f64 = p.iter().sum();
                    p.iter_mut().for_each(|v| *v /= t);
                    p
                })
                .collect();
            evals += candidates.len();
            let scored: Vec<(f64, Vec<f64>)> = candidates.into_par_iter().map(|p| (objective(&p), p)).collect();
            for (v, p) in scored {
                let better = if minimize { v < best.0 } else { v > best.0 };
                if better {
                    best = (v, p);
                }
            }
            centre = best.1.clone();
            radius *= 0.75;
        }
        (best.0, best.1, evals)
    };
    let (minimax, prior, e1) = search(&|p| channel.worst_divergence(p), true);
    let (maximin, _, e2) = search(&|p| channel.mutual_information(p), false);
    GridMinimax { minimax, maximin, minimax_prior: prior, evaluations: e1 + e2 }
}

// ---------------------------------------------------------------------------
// The capacity predictor
// ---------------------------------------------------------------------------

/// `rho_C = sum_n w_n rho_n` with `rho_n` the horizon-`n` optimal barycentre
/// continued with zeros and `w_n = (6/pi^2)/n^2`.
pub fn build_rho_capacity(
    class: &ModelClass,
    max_horizon: usize,
    tol: f64,
) -> Result<(Mixture, Vec<CapacityResult>)> {
    if max_horizon == 0 {
        return Err(Error::InvalidParameter("rho_C needs at least one horizon".into()));
    }
    let results: Vec<CapacityResult> =
        (1..=max_horizon).map(|n| channel_capacity(class, n, tol, DEFAULT_MAX_ITERS)).collect::<Result<_>>()?;
    let mut parts: Vec<MeasureRef> = Vec::with_capacity(max_horizon);
    for r in &results {
        let (members, weights): (Vec<MeasureRef>, Vec<f64>) = class
            .measures()
            .iter()
            .zip(&r.prior)
            .filter(|(_, &p)| p > 0.0)
            .map(|(m, &p)| (m.clone(), p))
            .unzip();
        let bary = Mixture::new(members, weights)?.with_label(format!("bary_{}", r.n));
        parts.push(Arc::new(Truncated::new(Arc::new(bary), r.n, 0)?));
    }
    let rho = Mixture::from_scheme(parts, &WeightScheme::Quadratic)?.with_label(format!("rho_C[{}]", class.label));
    Ok((rho, results))
}

/// `(C + 1 + 2 log2 n + log2 w) / n` as printed, and with `-log2 w`.
#[must_use]
pub fn rho_capacity_bound(capacity: f64, n: usize) -> (f64, f64) {
    let w: f64 = 6.0 / (std::f64::consts::PI * std::f64::consts::PI);
    let nf = n as f64;
    let base = capacity + 1.0 + 2.0 * nf.log2();
    ((base + w.log2()) / nf, (base - w.log2()) / nf)
}
