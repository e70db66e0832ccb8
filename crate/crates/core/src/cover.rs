//! Greedy covering mixture that tracks a reference predictor.
//!
//! For each horizon `n` and member `mu`, the sequences with
//! `mu(x) / rho(x) >= 1/n` are split into `k` bands by the per-symbol
//! log-ratio. Within a band, members are picked greedily by the
//! `rho`-mass of their not-yet-covered cells. The picked members, plus a
//! regularizer that keeps every class-positive sequence alive, form the
//! mixture `nu`, which is certified against
//!
//! ```text
//! L_n(mu, nu) - L_n(mu, rho) <= M n / k - log2 B_n + 4M - (2/n)(log2 w_n - 1) + 1/2
//! B_n = w^3 / (4 (M+1)^2 n^5 k^3 log2^2 n log2^2 k)
//! ```
//!
//! with `M = log2 |X|` and the main-theorem weights `w_j`.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::{expected_cumulative_kl, Method};
use crate::measures::{enumerate_logprobs, uniform, MeasureRef, ProcessMeasure};
use crate::mixture::{main_theorem_normalizer, Mixture, ModelClass, WeightScheme};
use crate::verdict::Check;

/// Cell cap per horizon.
pub const COVER_CELL_CAP: u128 = 1 << 20;

/// `ceil(n / log2 log2 n)`, and `n` itself for `n <= 3`.
#[must_use]
pub fn band_count(n: usize) -> usize {
    if n <= 3 {
        return n.max(1);
    }
    let nf = n as f64;
    (nf / nf.log2().log2()).ceil() as usize
}

fn floored_log2(x: f64) -> f64 {
    if x <= 2.0 {
        1.0
    } else {
        x.log2()
    }
}

/// `log2 B_n`; `log2 n` and `log2 k` are floored at 1.
#[must_use]
pub fn log_b_n(n: usize, k: usize, m_bits: f64) -> f64 {
    let w = main_theorem_normalizer();
    let (nf, kf) = (n as f64, k as f64);
    let ln = floored_log2(nf);
    let lk = floored_log2(kf);
    3.0 * w.log2() - (4.0 * (m_bits + 1.0).powi(2) * nf.powi(5) * kf.powi(3) * ln * ln * lk * lk).log2()
}

/// Right-hand side of the certified bound at horizon `n`.
#[must_use]
pub fn close_bound(n: usize, m_bits: f64) -> f64 {
    let k = band_count(n);
    let nf = n as f64;
    let w_n = WeightScheme::MainTheorem.weight(n);
    m_bits * nf / k as f64 - log_b_n(n, k, m_bits) + 4.0 * m_bits - (2.0 / nf) * (w_n.log2() - 1.0) + 0.5
}

/// Band `i` (1-based) of a per-symbol log-ratio inside `[-log2(n)/n, M + 1/n]`.
#[must_use]
pub fn band_of(ratio: f64, k: usize, m_bits: f64) -> usize {
    let raw = (ratio * k as f64 / m_bits).ceil();
    (raw.max(1.0) as usize).min(k)
}

/// `[lo, hi]` of band `i`; only band 1 is closed on the left.
#[must_use]
pub fn band_interval(i: usize, k: usize, n: usize, m_bits: f64) -> (f64, f64) {
    let nf = n as f64;
    let lo = if i == 1 { -nf.log2() / nf } else { (i - 1) as f64 * m_bits / k as f64 };
    let hi = if i == k { m_bits + 1.0 / nf } else { i as f64 * m_bits / k as f64 };
    (lo, hi)
}

// ---------------------------------------------------------------------------
// Results
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub n: usize,
    pub k: usize,
    pub band: usize,
    /// Greedy order, from 1.
    pub l: usize,
    pub member: usize,
    /// Residual `rho`-mass captured.
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonCover {
    pub n: usize,
    pub k: usize,
    pub selections: Vec<Selection>,
    /// `mu(X^n \ T_mu)` per member.
    pub outside_mass: Vec<f64>,
    /// Regularizer weight per member: share of class-positive sequences where it is the argmax.
    pub regularizer: Vec<f64>,
    pub checks: Vec<Check>,
}

#[derive(Debug, Clone)]
pub struct CoverResult {
    pub class: ModelClass,
    /// The reference predictor as given.
    pub rho: MeasureRef,
    /// The predictor actually compared against, `(rho + uniform)/2` when replaced.
    pub rho_used: MeasureRef,
    pub replaced: bool,
    /// Extra slack added to the bound because of the replacement.
    pub replacement_slack: f64,
    pub horizons: Vec<HorizonCover>,
    pub nu: Mixture,
    /// Raw weight of each member in `nu` (0 when unused).
    pub member_weights: Vec<f64>,
    pub prior_mass: f64,
}

impl CoverResult {
    #[must_use]
    pub fn horizon(&self, n: usize) -> Option<&HorizonCover> {
        self.horizons.iter().find(|h| h.n == n)
    }
}

// ---------------------------------------------------------------------------
// Construction
// ---------------------------------------------------------------------------

fn violates_boundedness(rho: &dyn ProcessMeasure, horizons: &[usize], m_bits: f64) -> Result<bool> {
    for &n in horizons {
        let logs = enumerate_logprobs(rho, n, COVER_CELL_CAP)?;
        let worst = logs.iter().copied().fold(f64::INFINITY, f64::min);
        if -worst > n as f64 * m_bits + 1.0 {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Builds `nu` at the given horizons; see the module docs.
pub fn build_cover(class: &ModelClass, rho: MeasureRef, horizons: &[usize]) -> Result<CoverResult> {
    if class.is_empty() {
        return Err(Error::EmptyClass);
    }
    let alphabet = class.alphabet();
    if rho.alphabet() != alphabet {
        return Err(Error::AlphabetMismatch(format!("{} vs {}", rho.label(), class.label)));
    }
    if horizons.is_empty() || horizons.contains(&0) {
        return Err(Error::InvalidParameter("horizons must be a nonempty list of positive integers".into()));
    }
    for &n in horizons {
        let cells = alphabet.cells(n);
        if cells > COVER_CELL_CAP {
            return Err(Error::EnumerationTooLarge { cells, cap: COVER_CELL_CAP });
        }
    }
    let m_bits = alphabet.bits();
    let replaced = violates_boundedness(rho.as_ref(), horizons, m_bits)?;
    let rho_used: MeasureRef = if replaced {
        Arc::new(Mixture::new(vec![rho.clone(), uniform(alphabet)], vec![0.5, 0.5])?.with_label(format!("({}+uniform)/2", rho.label())))
    } else {
        rho.clone()
    };

    let scheme = WeightScheme::MainTheorem;
    let mut member_weights = vec![0.0; class.len()];
    let mut covers = Vec::with_capacity(horizons.len());
    for &n in horizons {
        let cover = cover_horizon(class, rho_used.as_ref(), n, m_bits)?;
        let k = cover.k;
        let outer = 0.5 * scheme.weight(n) * scheme.weight(k) / k as f64;
        for s in &cover.selections {
            member_weights[s.member] += outer * scheme.weight(s.l);
        }
        for (j, &r) in cover.regularizer.iter().enumerate() {
            member_weights[j] += 0.5 * scheme.weight(n) * r;
        }
        covers.push(cover);
    }
    let (members, weights): (Vec<MeasureRef>, Vec<f64>) = class
        .measures()
        .iter()
        .zip(&member_weights)
        .filter(|(_, &w)| w > 0.0)
        .map(|(m, &w)| (m.clone(), w))
        .unzip();
    let prior_mass = weights.iter().sum();
    let nu = Mixture::new(members, weights)?.with_label(format!("cover[{}]", class.label));
    Ok(CoverResult {
        class: class.clone(),
        rho,
        rho_used,
        replaced,
        replacement_slack: if replaced { 1.0 } else { 0.0 },
        horizons: covers,
        nu,
        member_weights,
        prior_mass,
    })
}

fn cover_horizon(class: &ModelClass, rho: &dyn ProcessMeasure, n: usize, m_bits: f64) -> Result<HorizonCover> {
    let k = band_count(n);
    let nf = n as f64;
    let log_rho = enumerate_logprobs(rho, n, COVER_CELL_CAP)?;
    let rho_mass: Vec<f64> = log_rho.iter().map(|v| v.exp2()).collect();
    let logs: Vec<Vec<f64>> = class
        .measures()
        .par_iter()
        .map(|m| enumerate_logprobs(m.as_ref(), n, COVER_CELL_CAP))
        .collect::<Result<_>>()?;
    let cells = log_rho.len();
    let threshold = -nf.log2();
    let mut checks = Vec::new();

    // cells_of[j][i-1]: cells of T_{mu_j,k,i}.
    let mut cells_of: Vec<Vec<Vec<usize>>> = vec![vec![Vec::new(); k]; class.len()];
    let mut outside_mass = vec![0.0; class.len()];
    let mut bands_ok = true;
    for (j, lm) in logs.iter().enumerate() {
        for x in 0..cells {
            if lm[x] == f64::NEG_INFINITY {
                continue;
            }
            let ratio = lm[x] - log_rho[x];
            if ratio < threshold {
                outside_mass[j] += lm[x].exp2();
                continue;
            }
            let per = ratio / nf;
            let i = band_of(per, k, m_bits);
            let (lo, hi) = band_interval(i, k, n, m_bits);
            let inside = per >= lo - 1e-12 && per <= hi + 1e-12;
            bands_ok &= inside;
            cells_of[j][i - 1].push(x);
        }
    }
    checks.push(Check::holds(format!("n={n}:bands-partition"), bands_ok));
    let worst_outside = outside_mass.iter().copied().fold(0.0, f64::max);
    checks.push(Check::le(format!("n={n}:markov-tail"), worst_outside, 1.0 / nf, 1e-12));

    let mut selections = Vec::new();
    let mut greedy_ok = true;
    let mut counting_ok = true;
    for band in 1..=k {
        let mut covered = vec![false; cells];
        let mut last = f64::INFINITY;
        let mut l = 0;
        loop {
            let residual: Vec<f64> = cells_of
                .iter()
                .map(|c| c[band - 1].iter().filter(|&&x| !covered[x]).map(|&x| rho_mass[x]).sum())
                .collect();
            let mut best = 0;
            for (j, &r) in residual.iter().enumerate() {
                if r > residual[best] {
                    best = j;
                }
            }
            // rho(T_{mu,k,i} \ T_l) <= 1/l for every member once l >= 1.
            if l >= 1 {
                counting_ok &= residual.iter().all(|&r| r <= 1.0 / l as f64 + 1e-12);
            }
            let m = residual[best];
            if m <= 0.0 {
                break;
            }
            l += 1;
            greedy_ok &= m <= last + 1e-15;
            last = m;
            for &x in &cells_of[best][band - 1] {
                covered[x] = true;
            }
            selections.push(Selection { n, k, band, l, member: best, mass: m });
        }
    }
    checks.push(Check::holds(format!("n={n}:greedy-monotone"), greedy_ok));
    checks.push(Check::holds(format!("n={n}:residual-counting"), counting_ok));

    // Regularizer: argmax member on each class-positive sequence.
    let mut regularizer = vec![0.0; class.len()];
    let mut positive = 0usize;
    for x in 0..cells {
        let mut best: Option<usize> = None;
        for (j, lm) in logs.iter().enumerate() {
            if lm[x] > f64::NEG_INFINITY && best.is_none_or(|b| lm[x] > logs[b][x]) {
                best = Some(j);
            }
        }
        if let Some(b) = best {
            regularizer[b] += 1.0;
            positive += 1;
        }
    }
    for r in &mut regularizer {
        *r /= positive.max(1) as f64;
    }

    Ok(HorizonCover { n, k, selections, outside_mass, regularizer, checks })
}

// ---------------------------------------------------------------------------
// Certification
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub member: usize,
    pub n: usize,
    /// Loss of the delivered (normalized) `nu`.
    pub loss_nu: f64,
    pub loss_rho: f64,
    /// `L_n(mu, nu) - L_n(mu, rho)` against the original `rho`.
    pub slack: f64,
    /// The same slack for the raw sum `sum_j w_j mu_j`, which lies below `nu` by the mass deficit.
    pub slack_raw: f64,
    /// Analytic right-hand side plus the replacement slack.
    pub bound: f64,
    pub pass: bool,
}

/// Exact slack versus the analytic bound for one member at one certified horizon.
pub fn certify_bound(result: &CoverResult, member: usize, n: usize) -> Result<Certificate> {
    if result.horizon(n).is_none() {
        return Err(Error::UncertifiedHorizon(n));
    }
    if member >= result.class.len() {
        return Err(Error::InvalidParameter(format!("member {member} outside class of {}", result.class.len())));
    }
    let mu = result.class.get(member);
    let loss_nu = expected_cumulative_kl(mu.as_ref(), &result.nu, n, &Method::Enumerate)?.value;
    let loss_rho = expected_cumulative_kl(mu.as_ref(), result.rho.as_ref(), n, &Method::Enumerate)?.value;
    let slack = loss_nu - loss_rho;
    let slack_raw = slack + result.mass_deficit();
    let bound = close_bound(n, mu.alphabet().bits()) + result.replacement_slack;
    // The raw sum is what the analytic bound speaks about; passing it implies passing for nu.
    let pass = slack_raw <= bound;
    Ok(Certificate { member, n, loss_nu, loss_rho, slack, slack_raw, bound, pass })
}

impl CoverResult {
    /// `-log2` of the materialized prior mass: the gap between the
    /// normalized mixture `nu` and the raw sum `sum_j w_j mu_j`.
    #[must_use]
    pub fn mass_deficit(&self) -> f64 {
        -self.prior_mass.log2()
    }

    /// Pathwise check `log2(w_j mu_j(x)) <= log2 sum_l w_l mu_l(x)` over every member in `nu`
    /// and every sequence at horizon `n`.
    pub fn pathwise_check(&self, n: usize) -> Result<Check> {
        let log_nu = enumerate_logprobs(&self.nu, n, COVER_CELL_CAP)?;
        let log_w = self.prior_mass.log2();
        let mut worst = f64::NEG_INFINITY;
        for (j, &w) in self.member_weights.iter().enumerate().filter(|(_, &w)| w > 0.0) {
            let lm = enumerate_logprobs(self.class.get(j).as_ref(), n, COVER_CELL_CAP)?;
            for (x, &v) in lm.iter().enumerate() {
                if v > f64::NEG_INFINITY {
                    worst = worst.max((w.log2() + v) - (log_nu[x] + log_w));
                }
            }
        }
        Ok(Check::le(format!("n={n}:pathwise-nu"), worst, 0.0, 1e-9))
    }
}
