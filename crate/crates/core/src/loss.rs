//! Divergences between a data measure and a predictor.
//!
//! Per-step quantities along a path `x`:
//!
//! ```text
//! delta_t = sum_a mu(a|x_<t) log2( mu(a|x_<t) / rho(a|x_<t) )     (KL, bits)
//! a_t     = sum_a |mu(a|x_<t) - rho(a|x_<t)|                       (absolute)
//! ```
//!
//! and the expected cumulative loss `L_n = sum_{x in X^n} mu(x) log2(mu(x)/rho(x))`.
//! Pinsker reads `a_t^2 <= 2 ln2 delta_t` once `delta_t` is in bits.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::measures::{
    enumerate_from, enumerate_logprobs, render, replica_rng, Predictor, ProcessMeasure, Symbol,
    DEFAULT_CELL_CAP,
};
use crate::measures::Markov;
use crate::mixture::ModelClass;

const LN2: f64 = std::f64::consts::LN_2;

/// Node budget of [`Method::Support`].
pub const SUPPORT_NODE_BUDGET: u64 = 1 << 24;

// ---------------------------------------------------------------------------
// Elementary divergences
// ---------------------------------------------------------------------------

/// KL divergence in bits with `0 log(0/q) = 0` and `p log(p/0) = +inf`.
#[must_use]
pub fn kl_div(p: &[f64], q: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        if a <= 0.0 {
            continue;
        }
        if b <= 0.0 {
            return f64::INFINITY;
        }
        acc += a * (a / b).log2();
    }
    acc.max(0.0)
}

/// Signed KL-type sum, without clamping; `p` and `q` need not be normalized.
#[must_use]
pub fn signed_kl(p: &[f64], q: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        if a <= 0.0 {
            continue;
        }
        if b <= 0.0 {
            return f64::INFINITY;
        }
        acc += a * (a / b).log2();
    }
    acc
}

/// `sum_a |p_a - q_a|`.
#[must_use]
pub fn abs_dist(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum()
}

fn cursor_at<'a, M: ProcessMeasure + ?Sized>(m: &'a M, prefix: &[Symbol]) -> Result<(crate::measures::BoxPredictor<'a>, f64)> {
    let mut p = m.predictor();
    let mut logp = 0.0;
    for &s in prefix {
        let q = p.prob(s)?;
        if q <= 0.0 {
            return Ok((p, f64::NEG_INFINITY));
        }
        logp += q.log2();
        p.observe(s)?;
    }
    Ok((p, logp))
}

/// `delta_n` after `prefix`.
pub fn kl_step(mu: &dyn ProcessMeasure, rho: &dyn ProcessMeasure, prefix: &[Symbol]) -> Result<f64> {
    Ok(kl_div(&mu.cond_dist(prefix)?, &rho.cond_dist(prefix)?))
}

// ---------------------------------------------------------------------------
// Loss along a path
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepLoss {
    pub step: usize,
    pub delta: f64,
    pub a: f64,
    pub dbar: f64,
    pub abar: f64,
    /// `sum_{s<=t} log2 mu(x_s|x_<s) / rho(x_s|x_<s)`.
    pub cum_logloss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub mu: String,
    pub rho: String,
    pub method: String,
    pub seed: Option<u64>,
    pub steps: Vec<StepLoss>,
    /// Step at which `rho` gave the observed symbol probability 0; the series stops there.
    pub rho_vanished_at: Option<usize>,
}

impl LossReport {
    #[must_use]
    pub fn last(&self) -> Option<&StepLoss> {
        self.steps.last()
    }
}

/// Per-step divergences along `x`.
pub fn loss_series(mu: &dyn ProcessMeasure, rho: &dyn ProcessMeasure, x: &[Symbol]) -> Result<LossReport> {
    let size = mu.alphabet().size();
    let mut pm = mu.predictor();
    let mut pr = rho.predictor();
    let mut dm = vec![0.0; size];
    let mut dr = vec![0.0; size];
    let (mut sd, mut sa, mut cum) = (0.0, 0.0, 0.0);
    let mut steps = Vec::with_capacity(x.len());
    let mut vanished = None;
    for (t, &s) in x.iter().enumerate() {
        pm.predict_into(&mut dm)?;
        pr.predict_into(&mut dr)?;
        let delta = kl_div(&dm, &dr);
        let a = abs_dist(&dm, &dr);
        sd += delta;
        sa += a;
        cum += if dm[s] > 0.0 && dr[s] > 0.0 {
            (dm[s] / dr[s]).log2()
        } else if dr[s] <= 0.0 && dm[s] > 0.0 {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        };
        let n = (t + 1) as f64;
        steps.push(StepLoss { step: t + 1, delta, a, dbar: sd / n, abar: sa / n, cum_logloss: cum });
        if dm[s] <= 0.0 {
            return Err(Error::UndefinedConditional { label: mu.label(), position: t + 1 });
        }
        if dr[s] <= 0.0 {
            vanished = Some(t + 1);
            break;
        }
        pm.observe(s)?;
        pr.observe(s)?;
    }
    Ok(LossReport {
        mu: mu.label(),
        rho: rho.label(),
        method: "path".into(),
        seed: None,
        steps,
        rho_vanished_at: vanished,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PinskerVerdict {
    pub pass: bool,
    pub violations: usize,
    pub witness_step: Option<usize>,
}

/// Checks `a_t^2 <= 2 ln2 delta_t` and `abar^2 <= 2 ln2 dbar` at every step.
#[must_use]
pub fn pinsker_check(report: &LossReport) -> PinskerVerdict {
    let mut violations = 0;
    let mut witness = None;
    for s in &report.steps {
        let slack = 1e-12;
        let ok_step = s.a * s.a <= 2.0 * LN2 * s.delta + slack;
        let ok_avg = s.abar * s.abar <= 2.0 * LN2 * s.dbar + slack;
        if !(ok_step && ok_avg) {
            violations += 1;
            witness.get_or_insert(s.step);
        }
    }
    PinskerVerdict { pass: violations == 0, violations, witness_step: witness }
}

// ---------------------------------------------------------------------------
// Expected cumulative loss
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Sum over `X^n`; requires `|X|^n <= 2^24`.
    Enumerate,
    /// Sum over count classes; requires count-exchangeable measures.
    Binomial,
    /// Exact sum over the positive-probability tree of the data measure,
    /// for sparse data measures such as Diracs; at most 2^24 visited nodes.
    Support,
    MonteCarlo { replicas: usize, seed: u64 },
}

impl Method {
    #[must_use]
    pub fn monte_carlo(seed: u64) -> Self {
        Method::MonteCarlo { replicas: 100, seed }
    }

    #[must_use]
    pub fn name(&self) -> &'static str {
        match self {
            Method::Enumerate => "enumerate",
            Method::Binomial => "binomial",
            Method::Support => "support",
            Method::MonteCarlo { .. } => "monte_carlo",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    /// Present for Monte Carlo.
    pub std_error: Option<f64>,
    pub method: Method,
}

/// `E_data[ log2 a(x) - log2 b(x) ]` over `X^n`; `a = None` means `a = data`.
///
/// Returns `+inf` when `b` vanishes where `data` and `a` do not.
pub fn expected_log_ratio(
    data: &dyn ProcessMeasure,
    a: Option<&dyn ProcessMeasure>,
    b: &dyn ProcessMeasure,
    n: usize,
    method: &Method,
) -> Result<Estimate> {
    match method {
        Method::Enumerate => {
            let cells = data.alphabet().cells(n);
            if cells > DEFAULT_CELL_CAP {
                return Err(Error::MethodInapplicable(format!(
                    "enumerate needs |X|^n <= 2^24, got {cells} cells"
                )));
            }
            let value = ratio_walk(data, a, b, n, u64::MAX)?;
            Ok(Estimate { value, std_error: None, method: method.clone() })
        }
        Method::Support => {
            let value = ratio_walk(data, a, b, n, SUPPORT_NODE_BUDGET)?;
            Ok(Estimate { value, std_error: None, method: method.clone() })
        }
        Method::Binomial => {
            let value = ratio_binomial(data, a, b, n)?;
            Ok(Estimate { value, std_error: None, method: method.clone() })
        }
        Method::MonteCarlo { replicas, seed } => {
            if *replicas < 2 {
                return Err(Error::MethodInapplicable("Monte Carlo needs at least 2 replicas".into()));
            }
            let samples: Vec<f64> = (0..*replicas as u64)
                .into_par_iter()
                .map(|r| {
                    let mut rng = replica_rng(*seed, r);
                    sampled_ratio(data, a, b, n, &mut rng)
                })
                .collect::<Result<_>>()?;
            let (mean, se) = mean_and_se(&samples);
            Ok(Estimate { value: mean, std_error: Some(se), method: method.clone() })
        }
    }
}

/// Mean and standard error; infinities propagate.
#[must_use]
pub fn mean_and_se(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if !mean.is_finite() {
        return (mean, f64::INFINITY);
    }
    let var = samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

fn sampled_ratio(
    data: &dyn ProcessMeasure,
    a: Option<&dyn ProcessMeasure>,
    b: &dyn ProcessMeasure,
    n: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<f64> {
    let size = data.alphabet().size();
    let mut pd = data.predictor();
    let mut pa = a.map(|m| m.predictor());
    let mut pb = b.predictor();
    let mut buf = vec![0.0; size];
    let (mut la, mut lb) = (0.0, 0.0);
    for _ in 0..n {
        pd.predict_into(&mut buf)?;
        let s = crate::measures::draw(&buf, rng);
        let qa = match &pa {
            Some(p) => p.prob(s)?,
            None => buf[s],
        };
        la += qa.log2();
        if lb > f64::NEG_INFINITY {
            let qb = pb.prob(s)?;
            lb += qb.log2();
            if lb > f64::NEG_INFINITY {
                pb.observe(s)?;
            }
        }
        pd.observe(s)?;
        if let Some(p) = pa.as_mut() {
            p.observe(s)?;
        }
    }
    combine(la, lb)
}

fn combine(la: f64, lb: f64) -> Result<f64> {
    if la == f64::NEG_INFINITY && lb == f64::NEG_INFINITY {
        return Err(Error::UndefinedRegret("both predictors vanish on a data-positive sequence".into()));
    }
    Ok(la - lb)
}

fn ratio_walk(
    data: &dyn ProcessMeasure,
    a: Option<&dyn ProcessMeasure>,
    b: &dyn ProcessMeasure,
    n: usize,
    budget: u64,
) -> Result<f64> {
    const NEG: f64 = f64::NEG_INFINITY;
    struct Node<'p> {
        pd: crate::measures::BoxPredictor<'p>,
        // `None` when `a` is the data measure or has already vanished.
        pa: Option<crate::measures::BoxPredictor<'p>>,
        // `None` once `b` has vanished.
        pb: Option<crate::measures::BoxPredictor<'p>>,
        depth: usize,
        ld: f64,
        la: f64,
        lb: f64,
    }
    let size = data.alphabet().size();
    let separate_a = a.is_some();
    let mut stack = vec![Node {
        pd: data.predictor(),
        pa: a.map(|m| m.predictor()),
        pb: Some(b.predictor()),
        depth: 0,
        ld: 0.0,
        la: 0.0,
        lb: 0.0,
    }];
    let mut acc = 0.0;
    let mut nodes = 0u64;
    let mut dd = vec![0.0; size];
    let mut da = vec![0.0; size];
    let mut db = vec![0.0; size];
    while let Some(node) = stack.pop() {
        nodes += 1;
        if nodes > budget {
            return Err(Error::MethodInapplicable(format!(
                "support walk exceeded {budget} nodes; the data measure is not sparse enough"
            )));
        }
        if node.depth == n {
            if node.lb == NEG {
                return Err(Error::UndefinedRegret("both predictors vanish on a data-positive sequence".into()));
            }
            acc += node.ld.exp2() * (node.la - node.lb);
            continue;
        }
        node.pd.predict_into(&mut dd)?;
        if let Some(p) = &node.pa {
            p.predict_into(&mut da)?;
        }
        if let Some(p) = &node.pb {
            p.predict_into(&mut db)?;
        }
        let children: Vec<Symbol> = (0..size).filter(|&s| dd[s] > 0.0).collect();
        let mut node = Some(node);
        for (ci, &s) in children.iter().enumerate().rev() {
            // Children are pushed in reverse so symbol order is preserved; the
            // lowest symbol is visited last here and takes over the parent cursors.
            let parent = node.as_ref().expect("parent present");
            let nla = if separate_a {
                if parent.pa.is_some() { parent.la + da[s].log2() } else { NEG }
            } else {
                parent.ld + dd[s].log2()
            };
            let nlb = if parent.pb.is_some() { parent.lb + db[s].log2() } else { NEG };
            if nlb == NEG && nla > NEG {
                return Ok(f64::INFINITY);
            }
            let nld = parent.ld + dd[s].log2();
            let depth = parent.depth + 1;
            let (mut pd, mut pa, mut pb) = if ci == 0 {
                let p = node.take().expect("parent present");
                (p.pd, p.pa, p.pb)
            } else {
                (parent.pd.clone_box(), parent.pa.as_ref().map(|p| p.clone_box()), parent.pb.as_ref().map(|p| p.clone_box()))
            };
            pd.observe(s)?;
            if nla == NEG {
                pa = None;
            } else if let Some(p) = pa.as_mut() {
                p.observe(s)?;
            }
            if nlb == NEG {
                pb = None;
            } else if let Some(p) = pb.as_mut() {
                p.observe(s)?;
            }
            stack.push(Node { pd, pa, pb, depth, ld: nld, la: nla, lb: nlb });
        }
    }
    Ok(acc)
}

/// Calls `f(counts, log2 multinomial)` for every composition of `n` into `size` parts.
pub fn for_each_composition<F: FnMut(&[u64], f64) -> Result<()>>(size: usize, n: u64, mut f: F) -> Result<()> {
    fn rec<F: FnMut(&[u64], f64) -> Result<()>>(
        size: usize,
        left: u64,
        cur: &mut Vec<u64>,
        lnfact_n: f64,
        f: &mut F,
    ) -> Result<()> {
        if cur.len() + 1 == size {
            cur.push(left);
            let mut l = lnfact_n;
            for &c in cur.iter() {
                l -= ln_gamma(c as f64 + 1.0);
            }
            f(cur, l / LN2)?;
            cur.pop();
            return Ok(());
        }
        for c in 0..=left {
            cur.push(c);
            rec(size, left - c, cur, lnfact_n, f)?;
            cur.pop();
        }
        Ok(())
    }
    rec(size, n, &mut Vec::with_capacity(size), ln_gamma(n as f64 + 1.0), &mut f)
}

fn ratio_binomial(
    data: &dyn ProcessMeasure,
    a: Option<&dyn ProcessMeasure>,
    b: &dyn ProcessMeasure,
    n: usize,
) -> Result<f64> {
    let size = data.alphabet().size();
    let zero = vec![0u64; size];
    let declared = |m: &dyn ProcessMeasure| m.count_logprob(&zero).is_some();
    for (role, m) in [("data", Some(data)), ("expert", a), ("predictor", Some(b))] {
        if let Some(m) = m {
            if !declared(m) {
                return Err(Error::MethodInapplicable(format!(
                    "binomial sums need count-exchangeable measures; {role} `{}` is not",
                    m.label()
                )));
            }
        }
    }
    let mut acc = 0.0;
    let mut infinite = false;
    for_each_composition(size, n as u64, |counts, lmult| {
        let ld = data.count_logprob(counts).expect("declared");
        if ld == f64::NEG_INFINITY {
            return Ok(());
        }
        let la = match a {
            Some(m) => m.count_logprob(counts).expect("declared"),
            None => ld,
        };
        let lb = b.count_logprob(counts).expect("declared");
        if lb == f64::NEG_INFINITY {
            if la == f64::NEG_INFINITY {
                return Err(Error::UndefinedRegret("both predictors vanish on a data-positive sequence".into()));
            }
            infinite = true;
            return Ok(());
        }
        acc += (lmult + ld).exp2() * (la - lb);
        Ok(())
    })?;
    Ok(if infinite { f64::INFINITY } else { acc })
}

/// `L_n(mu, rho)`.
pub fn expected_cumulative_kl(
    mu: &dyn ProcessMeasure,
    rho: &dyn ProcessMeasure,
    n: usize,
    method: &Method,
) -> Result<Estimate> {
    if mu.alphabet() != rho.alphabet() {
        return Err(Error::AlphabetMismatch(format!("{} vs {}", mu.label(), rho.label())));
    }
    expected_log_ratio(mu, None, rho, n, method)
}

/// `L_n(mu, rho)` as `sum_{t<=n} E_mu delta_t`, by enumeration.
pub fn expected_cumulative_kl_stepwise(mu: &dyn ProcessMeasure, rho: &dyn ProcessMeasure, n: usize) -> Result<f64> {
    fn rec<'a>(
        pm: &dyn Predictor<'a>,
        pr: &dyn Predictor<'a>,
        depth: usize,
        n: usize,
        lm: f64,
        acc: &mut f64,
    ) -> Result<()> {
        if depth == n {
            return Ok(());
        }
        let dm = pm.predict()?;
        let dr = pr.predict()?;
        let d = kl_div(&dm, &dr);
        *acc += lm.exp2() * d;
        if d.is_infinite() {
            return Ok(());
        }
        for (s, &q) in dm.iter().enumerate() {
            if q <= 0.0 {
                continue;
            }
            let mut cm = pm.clone_box();
            cm.observe(s)?;
            let mut cr = pr.clone_box();
            cr.observe(s)?;
            rec(cm.as_ref(), cr.as_ref(), depth + 1, n, lm + q.log2(), acc)?;
        }
        Ok(())
    }
    let pm = mu.predictor();
    let pr = rho.predictor();
    let mut acc = 0.0;
    rec(pm.as_ref(), pr.as_ref(), 0, n, 0.0, &mut acc)?;
    Ok(acc)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstCase {
    /// `max_k (1/n) L_n(mu_k, rho)`.
    pub per_step: f64,
    pub argmax: usize,
    pub per_member: Vec<f64>,
    pub caveat: String,
}

/// Finite-class, finite-horizon surrogate of the minimax loss.
pub fn worst_case_loss(class: &ModelClass, rho: &dyn ProcessMeasure, n: usize, method: &Method) -> Result<WorstCase> {
    let per_member: Vec<f64> = class
        .measures()
        .par_iter()
        .map(|m| expected_cumulative_kl(m.as_ref(), rho, n, method).map(|e| e.value / n as f64))
        .collect::<Result<_>>()?;
    let mut argmax = 0;
    for (i, &v) in per_member.iter().enumerate() {
        if v > per_member[argmax] {
            argmax = i;
        }
    }
    Ok(WorstCase {
        per_step: per_member[argmax],
        argmax,
        per_member,
        caveat: "finite-class, finite-n".into(),
    })
}

/// `(1/n) (L_n(nu, rho) - L_n(nu, mu))`.
pub fn regret(
    nu: &dyn ProcessMeasure,
    mu: &dyn ProcessMeasure,
    rho: &dyn ProcessMeasure,
    n: usize,
    method: &Method,
) -> Result<Estimate> {
    let mut e = expected_log_ratio(nu, Some(mu), rho, n, method)?;
    e.value /= n as f64;
    e.std_error = e.std_error.map(|s| s / n as f64);
    Ok(e)
}

// ---------------------------------------------------------------------------
// Total variation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TvReport {
    pub m: usize,
    pub value: f64,
}

/// `(1/2) sum_{y in X^m} |mu(y|x) - rho(y|x)|`; 1 when either measure gives `x` probability 0.
pub fn tv_conditional(mu: &dyn ProcessMeasure, rho: &dyn ProcessMeasure, prefix: &[Symbol], m: usize) -> Result<TvReport> {
    let (pm, lm) = cursor_at(mu, prefix)?;
    let (pr, lr) = cursor_at(rho, prefix)?;
    if lm == f64::NEG_INFINITY || lr == f64::NEG_INFINITY {
        return Ok(TvReport { m, value: 1.0 });
    }
    let a = enumerate_from(pm.as_ref(), m, DEFAULT_CELL_CAP)?;
    let b = enumerate_from(pr.as_ref(), m, DEFAULT_CELL_CAP)?;
    let v: f64 = a.iter().zip(&b).map(|(x, y)| (x.exp2() - y.exp2()).abs()).sum::<f64>() * 0.5;
    Ok(TvReport { m, value: v.clamp(0.0, 1.0) })
}

/// Conditional TV at several horizons, with a flag for monotonicity in `m`.
pub fn tv_profile(
    mu: &dyn ProcessMeasure,
    rho: &dyn ProcessMeasure,
    prefix: &[Symbol],
    horizons: &[usize],
) -> Result<(Vec<TvReport>, bool)> {
    let reports: Vec<TvReport> = horizons.iter().map(|&m| tv_conditional(mu, rho, prefix, m)).collect::<Result<_>>()?;
    let mut sorted = reports.clone();
    sorted.sort_by_key(|r| r.m);
    let monotone = sorted.windows(2).all(|w| w[1].value + 1e-12 >= w[0].value);
    Ok((reports, monotone))
}

// ---------------------------------------------------------------------------
// d_inf
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DinfReport {
    pub n: usize,
    pub value: f64,
    pub witness: String,
    /// For infinite values: first prefix length at which exactly one measure vanishes.
    pub divergence_step: Option<usize>,
}

/// `max_{x in X^n} (1/n) |log2 mu1(x) / mu2(x)|` with `log 0/0 = 0`.
pub fn d_inf(mu1: &dyn ProcessMeasure, mu2: &dyn ProcessMeasure, n: usize) -> Result<DinfReport> {
    let alphabet = mu1.alphabet();
    let a = enumerate_logprobs(mu1, n, DEFAULT_CELL_CAP)?;
    let b = enumerate_logprobs(mu2, n, DEFAULT_CELL_CAP)?;
    let mut best = (0.0f64, 0usize);
    for (i, (&x, &y)) in a.iter().zip(&b).enumerate() {
        let v = match (x == f64::NEG_INFINITY, y == f64::NEG_INFINITY) {
            (true, true) => 0.0,
            (true, false) | (false, true) => f64::INFINITY,
            _ => (x - y).abs() / n as f64,
        };
        if v > best.0 {
            best = (v, i);
        }
    }
    let witness = crate::measures::decode_index(alphabet, n, best.1);
    let divergence_step = if best.0.is_infinite() {
        (1..=n).find(|&t| {
            let p = mu1.joint_logprob(&witness[..t]).is_zero();
            let q = mu2.joint_logprob(&witness[..t]).is_zero();
            p != q
        })
    } else {
        None
    };
    Ok(DinfReport { n, value: best.0, witness: render(&witness), divergence_step })
}

/// Context bounds on `d_inf` between two order-`k` chains over one alphabet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkovDinfBound {
    pub order: usize,
    /// `max_{x in X^(k+1)} |log2 mu1(x)/mu2(x)| / (k+1)`.
    pub literal: f64,
    /// Largest per-symbol log-ratio of the initial `k`-block laws.
    pub initial: f64,
    /// Largest `|log2 P1(a|ctx)/P2(a|ctx)|`.
    pub transition: f64,
    /// `max(initial, transition)`, a valid bound at every horizon `n >= k`.
    pub corrected: f64,
}

fn log_ratio_abs(p: f64, q: f64) -> f64 {
    match (p > 0.0, q > 0.0) {
        (false, false) => 0.0,
        (true, true) => (p / q).log2().abs(),
        _ => f64::INFINITY,
    }
}

/// The context quantities that control `d_inf` for order-`k` chains.
///
/// For `x in X^n`, `log mu1(x)/mu2(x)` splits into the initial `k`-block term and
/// `n - k` transition terms, so `d_inf <= max(initial, transition)`.
pub fn markov_dinf_bound(m1: &Markov, m2: &Markov) -> Result<MarkovDinfBound> {
    if m1.order() != m2.order() || m1.alphabet() != m2.alphabet() {
        return Err(Error::InvalidParameter("chains must share order and alphabet".into()));
    }
    let k = m1.order();
    let a = enumerate_logprobs(m1, k + 1, DEFAULT_CELL_CAP)?;
    let b = enumerate_logprobs(m2, k + 1, DEFAULT_CELL_CAP)?;
    let literal = a
        .iter()
        .zip(&b)
        .map(|(&x, &y)| log_ratio_abs(x.exp2(), y.exp2()) / (k + 1) as f64)
        .fold(0.0, f64::max);
    let initial = if k == 0 {
        0.0
    } else {
        m1.initial()
            .iter()
            .zip(m2.initial())
            .map(|(&p, &q)| log_ratio_abs(p, q) / k as f64)
            .fold(0.0, f64::max)
    };
    let transition = m1
        .table()
        .iter()
        .zip(m2.table())
        .map(|(&p, &q)| log_ratio_abs(p, q))
        .fold(0.0, f64::max);
    Ok(MarkovDinfBound { order: k, literal, initial, transition, corrected: initial.max(transition) })
}

// ---------------------------------------------------------------------------
// Adversarial sequences
// ---------------------------------------------------------------------------

/// Picks the least likely next symbol at every step (lowest index on ties).
/// Returns the sequence and `-log2 rho(x)`, which is at least `n log2 |X|`.
pub fn adversarial_sequence(rho: &dyn ProcessMeasure, n: usize) -> Result<(Vec<Symbol>, f64)> {
    let mut p = rho.predictor();
    let mut x = Vec::with_capacity(n);
    let mut loss = 0.0;
    for _ in 0..n {
        let d = p.predict()?;
        let mut best = 0;
        for (a, &q) in d.iter().enumerate() {
            if q < d[best] {
                best = a;
            }
        }
        loss -= d[best].log2();
        x.push(best);
        if d[best] == 0.0 {
            // rho already gives the path probability 0; remaining symbols are arbitrary.
            x.resize(n, 0);
            return Ok((x, f64::INFINITY));
        }
        p.observe(best)?;
    }
    Ok((x, loss))
}

/// Exhaustive minimum of `rho` over `X^n`: returns the argmin and `-log2 rho`.
pub fn exhaustive_min(rho: &dyn ProcessMeasure, n: usize) -> Result<(Vec<Symbol>, f64)> {
    let logs = enumerate_logprobs(rho, n, DEFAULT_CELL_CAP)?;
    let mut best = 0;
    for (i, &v) in logs.iter().enumerate() {
        if v < logs[best] {
            best = i;
        }
    }
    Ok((crate::measures::decode_index(rho.alphabet(), n, best), -logs[best]))
}

/// `-log2 rho(x)` for a fixed sequence.
#[must_use]
pub fn path_loss(rho: &dyn ProcessMeasure, x: &[Symbol]) -> f64 {
    -rho.joint_logprob(x).value()
}
