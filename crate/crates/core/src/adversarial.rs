//! Counterexample constructions and dominance certificates.
//!
//! Every scenario pairs concrete measures with the inequality they are built
//! to exhibit, evaluated at a finite horizon. The scenarios are:
//!
//! ```text
//! lb                Bayesian over the eventually-zero sequences, exact prior mass
//! suboptimal-bayes  support-restricted Bayes vs the tripartite predictor
//! stationary-plus   Dirac sequences approximated by a stationary chain
//! hidden-markov     ternary hidden chain with per-step loss log(3/2)
//! middle-case       gamma'_t and the adversarial lower bound
//! weights-matter    quadratic vs geometric weights on shifted Diracs
//! nosum-ad          contamination breaks per-step prediction
//! nosum-avad        contamination breaks average absolute prediction
//! nodom             dominance with vanishing coefficients, persistent per-step loss
//! ```

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::{
    exhaustive_min, expected_cumulative_kl, loss_series, mean_and_se, path_loss, Method,
};
use crate::measures::{
    binary_entropy, enumerate_logprobs, log_sum_exp2, render, replica_rng, sample, Alphabet, BoxPredictor,
    ChainMeasure, Dirac, Iid, Independent, Kt, Laplace, LogProb, MeasureRef, Predictor, ProcessMeasure, Symbol,
    DEFAULT_CELL_CAP,
};
use crate::mixture::{Mixture, WeightScheme};
use crate::verdict::Check;

const EXACT_TOL: f64 = 1e-9;

fn one_hot(out: &mut [f64], s: Symbol) {
    out.iter_mut().for_each(|v| *v = 0.0);
    out[s] = 1.0;
}

// ---------------------------------------------------------------------------
// Eventually-zero sequences and the fixed-prior Bayesian
// ---------------------------------------------------------------------------

/// Largest block materialized when summing prefix masses; later blocks are
/// bounded by their total prior mass.
const LB_MAX_BLOCK: u32 = 63;

/// Member `index >= 1` of the enumeration of binary sequences that are 0 from
/// some point on.
///
/// Index 1 is `0^inf`. Block `m >= 1` holds indices `2^(m-1)+1 ..= 2^m`: its
/// member `j` is the `(m-1)`-bit pattern `j` (most significant first), then
/// a 1 at position `m`, then zeros.
pub fn s_member(index: u64) -> Result<Dirac> {
    if index == 0 {
        return Err(Error::InvalidParameter("enumeration starts at 1".into()));
    }
    if index == 1 {
        return Dirac::new(Alphabet::BINARY, Vec::new(), vec![0]);
    }
    let m = 64 - (index - 1).leading_zeros();
    let j = index - (1u64 << (m - 1)) - 1;
    let mut head: Vec<Symbol> = (0..m - 1).rev().map(|b| ((j >> b) & 1) as Symbol).collect();
    head.push(1);
    Dirac::new(Alphabet::BINARY, head, vec![0])
}

/// First `count` members with their prior weights.
pub fn s_class(count: u64, prior: &WeightScheme) -> Result<Mixture> {
    let comps = (1..=count)
        .map(|i| s_member(i).map(|d| Arc::new(d) as MeasureRef))
        .collect::<Result<Vec<_>>>()?;
    let weights = (1..=count as usize).map(|k| prior.weight(k)).collect();
    Ok(Mixture::new(comps, weights)?.with_label(format!("s-enum[{count}]")))
}

/// Prior mass of indices `a..=b`, for schemes with an exact tail.
fn run_mass(prior: &WeightScheme, a: u128, b: u128) -> Result<f64> {
    match prior {
        WeightScheme::Telescoping => {
            let (af, bf) = (a as f64, (b + 1) as f64);
            Ok((b + 1 - a) as f64 / (af * bf))
        }
        WeightScheme::Geometric => {
            let len = (b + 1 - a) as f64;
            Ok((-((a - 1) as f64)).exp2() * (1.0 - (-len).exp2()))
        }
        other => Err(Error::InvalidParameter(format!(
            "prior `{}` has no exact run mass; use telescoping or geometric",
            other.name()
        ))),
    }
}

fn bits_value(x: &[Symbol]) -> u128 {
    x.iter().fold(0u128, |acc, &s| (acc << 1) | s as u128)
}

/// `log2 nu(x)` of the Bayesian over the whole enumeration, as a `(lower, upper)`
/// pair; blocks beyond the materialized range only enter the upper value.
pub fn lb_nu_logprob(x: &[Symbol], prior: &WeightScheme) -> Result<(f64, f64)> {
    let n = x.len();
    if n as u32 >= LB_MAX_BLOCK {
        return Err(Error::InvalidParameter(format!("prefix length {n} too long")));
    }
    if x.iter().any(|&s| s > 1) {
        return Err(Error::SymbolOutOfRange { symbol: *x.iter().max().unwrap_or(&0), size: 2 });
    }
    // Members whose last 1 falls inside the prefix: at most one matches.
    let last_one = x.iter().rposition(|&s| s == 1);
    let own = match last_one {
        None => 1u128,
        Some(pos) => (1u128 << pos) + 1 + bits_value(&x[..pos]),
    };
    let mut mass = run_mass(prior, own, own)?;
    // Members with the last 1 after position n: a contiguous run per block.
    let v = bits_value(x);
    for m in (n as u32 + 1)..=LB_MAX_BLOCK {
        let len = 1u128 << (m - 1 - n as u32);
        let a = (1u128 << (m - 1)) + 1 + v * len;
        mass += run_mass(prior, a, a + len - 1)?;
    }
    let rest = run_mass(prior, (1u128 << LB_MAX_BLOCK) + 1, u64::MAX as u128)?;
    Ok((mass.log2(), (mass + rest).log2()))
}

/// Prior mass `W_s` of the first `2^(s-1)` members.
pub fn lb_prior_mass(s: usize, prior: &WeightScheme) -> Result<f64> {
    Ok(1.0 - run_mass(prior, (1u128 << (s - 1)) + 1, u64::MAX as u128)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LbReport {
    pub n: usize,
    pub s: usize,
    pub prior: String,
    pub w_s: f64,
    /// `-log2(1 - W_s)`.
    pub bound: f64,
    /// Prefix minimizing `nu` among all of `X^n`; the data sequence is this
    /// prefix followed by `1 0 0 ...`.
    pub argmin: String,
    pub log_nu_upper: f64,
    /// `L_n(mu, nu) - L_n(mu, uniform)`.
    pub regret: f64,
    pub checks: Vec<Check>,
}

/// Exhaustive search over `X^n` for the prefix the Bayesian predicts worst.
pub fn lb_mechanism(n: usize, prior: &WeightScheme) -> Result<LbReport> {
    if !(2..=24).contains(&n) {
        return Err(Error::InvalidParameter(format!("horizon {n} outside 2..=24")));
    }
    let s = n;
    let (best_idx, best) = (0..1usize << n)
        .into_par_iter()
        .map(|idx| {
            let x: Vec<Symbol> = (0..n).rev().map(|b| (idx >> b) & 1).collect();
            lb_nu_logprob(&x, prior).map(|(_, up)| (idx, up))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold((0usize, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
    let x: Vec<Symbol> = (0..n).rev().map(|b| (best_idx >> b) & 1).collect();
    let w_s = lb_prior_mass(s, prior)?;
    let bound = -(1.0 - w_s).log2();
    let regret = -best - n as f64;
    let checks = vec![
        Check::le("lb-prefix-mass", best, -(n as f64) + (1.0 - w_s).log2(), 0.0),
        Check::ge("lb-regret", regret, bound, 0.0),
        Check::holds("lb-bound-positive", bound > 0.0),
    ];
    Ok(LbReport {
        n,
        s,
        prior: prior.name().into(),
        w_s,
        bound,
        argmin: render(&x),
        log_nu_upper: best,
        regret,
        checks,
    })
}

// ---------------------------------------------------------------------------
// Support-restricted Bayes and the tripartite predictor
// ---------------------------------------------------------------------------

/// Symbol emitted once a history leaves the support.
pub const ESCAPE: Symbol = 2;

/// Ternary law `int mu_y dW(y)`, where `mu_y` follows Bernoulli(`p`) on `{0,1}`
/// while the history agrees with `y` and emits [`ESCAPE`] forever once it does not.
///
/// After a binary history `x_{1..t}` the next law is
/// `((1-p) w, p w, 1 - w)` with `w = W(x_t | x_{<t})` (and `w = 1` at `t = 0`),
/// so `phi(x_{1..n}) = beta_p(x_{1..n}) W(x_{1..n-1})`.
#[derive(Debug, Clone)]
pub struct SupportBayes {
    p: f64,
    prior: MeasureRef,
    label: String,
}

impl SupportBayes {
    /// `p` is the probability of symbol 1; `prior` is a binary process law.
    pub fn new(p: f64, prior: MeasureRef) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!("p = {p} outside [0,1]")));
        }
        if prior.alphabet() != Alphabet::BINARY {
            return Err(Error::AlphabetMismatch("support prior must be binary".into()));
        }
        let label = format!("support-bayes({p},{})", prior.label());
        Ok(Self { p, prior, label })
    }

    fn beta(&self, s: Symbol) -> f64 {
        if s == 1 {
            self.p
        } else {
            1.0 - self.p
        }
    }

    fn log_beta(&self, x: &[Symbol]) -> f64 {
        x.iter().map(|&s| self.beta(s).log2()).sum()
    }
}

struct SupportCursor<'a> {
    m: &'a SupportBayes,
    prior: BoxPredictor<'a>,
    last: Option<Symbol>,
    escaped: bool,
    t: usize,
}

impl<'a> Predictor<'a> for SupportCursor<'a> {
    fn alphabet(&self) -> Alphabet {
        Alphabet::TERNARY
    }
    fn position(&self) -> usize {
        self.t
    }
    fn predict_into(&self, out: &mut [f64]) -> Result<()> {
        if self.escaped {
            one_hot(out, ESCAPE);
            return Ok(());
        }
        let w = match self.last {
            None => 1.0,
            Some(s) => self.prior.prob(s)?,
        };
        out[0] = (1.0 - self.m.p) * w;
        out[1] = self.m.p * w;
        out[2] = 1.0 - w;
        Ok(())
    }
    fn observe(&mut self, s: Symbol) -> Result<()> {
        Alphabet::TERNARY.check(s)?;
        self.t += 1;
        if self.escaped {
            return Ok(());
        }
        if s == ESCAPE {
            self.escaped = true;
            return Ok(());
        }
        if let Some(prev) = self.last {
            // A binary symbol after W lost its mass has probability 0; treat as escape.
            if self.prior.prob(prev)? <= 0.0 {
                self.escaped = true;
                return Ok(());
            }
            self.prior.observe(prev)?;
        }
        self.last = Some(s);
        Ok(())
    }
    fn clone_box(&self) -> BoxPredictor<'a> {
        Box::new(SupportCursor {
            m: self.m,
            prior: self.prior.clone_box(),
            last: self.last,
            escaped: self.escaped,
            t: self.t,
        })
    }
}

impl ProcessMeasure for SupportBayes {
    fn alphabet(&self) -> Alphabet {
        Alphabet::TERNARY
    }
    fn label(&self) -> String {
        self.label.clone()
    }
    fn cond_dist(&self, prefix: &[Symbol]) -> Result<Vec<f64>> {
        crate::measures::cond_via_predictor(self, prefix)
    }
    fn predictor(&self) -> BoxPredictor<'_> {
        Box::new(SupportCursor { m: self, prior: self.prior.predictor(), last: None, escaped: false, t: 0 })
    }
    fn joint_logprob(&self, x: &[Symbol]) -> LogProb {
        let r = x.iter().position(|&s| s == ESCAPE);
        if r.is_some_and(|r| x[r..].iter().any(|&s| s != ESCAPE)) {
            return LogProb::ZERO;
        }
        let binary = &x[..r.unwrap_or(x.len())];
        let lb = self.log_beta(binary);
        match r {
            None if x.is_empty() => LogProb::ONE,
            None => LogProb::new(lb + self.prior.joint_logprob(&x[..x.len() - 1]).value()),
            Some(0) => LogProb::ZERO,
            Some(r) => {
                // beta_p(x_<r) (W(x_{1..r-2}) - W(x_{1..r-1})).
                let hi = self.prior.joint_logprob(&x[..r - 1]).value();
                let lo = self.prior.joint_logprob(&x[..r]).value();
                if hi == f64::NEG_INFINITY {
                    return LogProb::ZERO;
                }
                let gap = 1.0 - (lo - hi).exp2();
                if gap <= 0.0 {
                    return LogProb::ZERO;
                }
                LogProb::new(lb + hi + gap.log2())
            }
        }
    }
}

/// Ternary mixture `sum_a w_a delta_{a 2 2 2 ...}` over all finite words `a`,
/// with `w_a = 3^-|a| / ((|a|+1)(|a|+2))`.
///
/// For `x` of length `t` ending in a run of `r` escape symbols,
/// `delta(x) = 3^-t/(t+1) + sum_{j=t-r}^{t-1} 3^-j / ((j+1)(j+2))`.
#[derive(Debug, Clone, Default)]
pub struct EscapeTail;

impl EscapeTail {
    fn log_mass(x: &[Symbol]) -> f64 {
        let t = x.len();
        let r = x.iter().rev().take_while(|&&s| s == ESCAPE).count();
        let l3 = 3f64.log2();
        let mut terms = Vec::with_capacity(r + 1);
        terms.push(-(t as f64) * l3 - ((t + 1) as f64).log2());
        for j in t - r..t {
            let jf = j as f64;
            terms.push(-jf * l3 - ((jf + 1.0) * (jf + 2.0)).log2());
        }
        log_sum_exp2(&terms)
    }
}

impl ProcessMeasure for EscapeTail {
    fn alphabet(&self) -> Alphabet {
        Alphabet::TERNARY
    }
    fn label(&self) -> String {
        "escape-tail".into()
    }
    fn cond_dist(&self, prefix: &[Symbol]) -> Result<Vec<f64>> {
        for &s in prefix {
            Alphabet::TERNARY.check(s)?;
        }
        let base = Self::log_mass(prefix);
        let mut ext = prefix.to_vec();
        ext.push(0);
        let mut out = vec![0.0; 3];
        for (a, o) in out.iter_mut().enumerate() {
            *ext.last_mut().expect("nonempty") = a;
            *o = (Self::log_mass(&ext) - base).exp2();
        }
        Ok(out)
    }
    fn joint_logprob(&self, x: &[Symbol]) -> LogProb {
        LogProb::new(Self::log_mass(x))
    }
}

/// Ternary Bernoulli(`p`) on `{0,1}` (p = probability of 1), never escaping.
pub fn beta_ternary(p: f64) -> Result<Iid> {
    Ok(Iid::new(Alphabet::TERNARY, vec![1.0 - p, p, 0.0])?.with_label(format!("beta({p})")))
}

/// `(1/3)(beta_p + uniform + escape-tail)`.
pub fn tripartite(p: f64) -> Result<Mixture> {
    let comps: Vec<MeasureRef> =
        vec![Arc::new(beta_ternary(p)?), Arc::new(Iid::uniform(Alphabet::TERNARY)), Arc::new(EscapeTail)];
    Ok(Mixture::uniform(comps)?.with_label(format!("tripartite({p})")))
}

/// `(1/2)(phi + uniform)`.
pub fn smoothed(phi: MeasureRef) -> Result<Mixture> {
    let label = format!("smoothed({})", phi.label());
    Ok(Mixture::uniform(vec![phi, Arc::new(Iid::uniform(Alphabet::TERNARY))])?.with_label(label))
}

/// Draws from Bernoulli(`p`) (p = probability of 1) conditioned on
/// `|freq_t - p| <= log2(t)/sqrt(t)` for every `t >= t0`, by rejection.
pub fn sample_typical<R: Rng + ?Sized>(p: f64, n: usize, t0: usize, max_attempts: usize, rng: &mut R) -> Result<Vec<Symbol>> {
    'attempt: for _ in 0..max_attempts {
        let mut x = Vec::with_capacity(n);
        let mut ones = 0usize;
        for t in 1..=n {
            let s = usize::from(rng.gen::<f64>() < p);
            ones += s;
            x.push(s);
            if t >= t0 {
                let tf = t as f64;
                if (ones as f64 / tf - p).abs() > tf.log2() / tf.sqrt() {
                    continue 'attempt;
                }
            }
        }
        return Ok(x);
    }
    Err(Error::InvalidParameter(format!("no typical sequence after {max_attempts} attempts")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NotParams {
    /// Probability of symbol 1, in `(0, 1/2)`.
    pub p: f64,
    pub n: usize,
    pub support: usize,
    pub seeds: usize,
    pub seed: u64,
    /// First time the typicality constraint applies.
    pub t0: usize,
    pub max_attempts: usize,
}

impl Default for NotParams {
    fn default() -> Self {
        Self { p: 0.3, n: 2000, support: 200, seeds: 50, seed: 2024, t0: 16, max_attempts: 10_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorLoss {
    pub prior: String,
    pub smoothed: bool,
    /// Mean of `-log2 phi(x)/n` over data draws.
    pub mean: f64,
    pub std_error: f64,
    /// Mean of `(-log2 phi(x) + log2 beta_p(x))/n`.
    pub regret: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NotReport {
    pub params: NotParams,
    pub entropy: f64,
    pub bayes: Vec<PriorLoss>,
    pub tripartite: PriorLoss,
    /// `max_x (-log2 rho(x) + log2 beta_p(x))` over the data draws.
    pub tripartite_excess: f64,
    pub checks: Vec<Check>,
}

/// Bayesian losses under several priors against the tripartite predictor,
/// on fresh typical sequences `x` (the data measure is `mu_x`).
pub fn suboptimal_bayes(params: &NotParams) -> Result<NotReport> {
    let p = params.p;
    if !(p > 0.0 && p < 0.5) || params.n < 2 || params.seeds < 2 || params.support == 0 {
        return Err(Error::InvalidParameter("need p in (0,1/2), n >= 2, seeds >= 2, support >= 1".into()));
    }
    let n = params.n;
    let h = binary_entropy(p);
    let beta = beta_ternary(p)?;

    let mut support_rng = replica_rng(params.seed, u64::MAX);
    let support: Vec<MeasureRef> = (0..params.support)
        .map(|_| {
            let y = sample_typical(p, n, params.t0, params.max_attempts, &mut support_rng)?;
            Ok(Arc::new(Dirac::new(Alphabet::BINARY, y, vec![0])?) as MeasureRef)
        })
        .collect::<Result<_>>()?;
    let priors: Vec<(String, MeasureRef, bool)> = vec![
        ("beta-p".into(), Arc::new(Iid::bernoulli(1.0 - p)?), false),
        ("uniform".into(), Arc::new(Iid::uniform(Alphabet::BINARY)), false),
        ("support-sample".into(), Arc::new(Mixture::uniform(support.clone())?), false),
        ("support-sample".into(), Arc::new(Mixture::uniform(support)?), true),
    ];
    let mut predictors: Vec<(String, bool, MeasureRef)> = Vec::new();
    for (name, w, smooth) in priors {
        let phi: MeasureRef = Arc::new(SupportBayes::new(p, w)?);
        let m: MeasureRef = if smooth { Arc::new(smoothed(phi)?) } else { phi };
        predictors.push((name, smooth, m));
    }
    let rho = tripartite(p)?;

    // Per draw: (-log beta, losses per predictor, tripartite loss).
    let draws = (0..params.seeds as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = replica_rng(params.seed, i);
            let y = sample_typical(p, n, params.t0, params.max_attempts, &mut rng)?;
            let lb = beta.joint_logprob(&y).value();
            let losses: Vec<f64> = predictors.iter().map(|(_, _, m)| path_loss(m.as_ref(), &y)).collect();
            Ok((lb, losses, path_loss(&rho, &y)))
        })
        .collect::<Result<Vec<_>>>()?;

    let nf = n as f64;
    let summarize = |name: String, smoothed: bool, vals: Vec<f64>, lbs: &[f64]| {
        let per: Vec<f64> = vals.iter().map(|v| v / nf).collect();
        let (mean, se) = if per.iter().any(|v| v.is_infinite()) { (f64::INFINITY, f64::NAN) } else { mean_and_se(&per) };
        let reg: Vec<f64> = vals.iter().zip(lbs).map(|(v, lb)| (v + lb) / nf).collect();
        let regret = reg.iter().sum::<f64>() / reg.len() as f64;
        PriorLoss { prior: name, smoothed, mean, std_error: se, regret }
    };
    let lbs: Vec<f64> = draws.iter().map(|d| d.0).collect();
    let bayes: Vec<PriorLoss> = predictors
        .iter()
        .enumerate()
        .map(|(k, (name, smooth, _))| summarize(name.clone(), *smooth, draws.iter().map(|d| d.1[k]).collect(), &lbs))
        .collect();
    let tri = summarize("tripartite".into(), false, draws.iter().map(|d| d.2).collect(), &lbs);
    let excess = draws.iter().map(|d| d.2 + d.0).fold(f64::NEG_INFINITY, f64::max);

    let mut checks = Vec::new();
    for b in &bayes {
        let tag = format!("not-bayes[{}{}]", b.prior, if b.smoothed { ",smoothed" } else { "" });
        checks.push(Check::ge(format!("{tag}-loss"), b.mean, 1.7 * h, 0.0));
        if b.mean.is_finite() {
            checks.push(Check::le(format!("{tag}-se"), b.std_error, 0.02, 0.0));
        }
    }
    checks.push(Check::le("not-tripartite-loss", tri.mean, 1.1 * h, 0.0));
    checks.push(Check::le("not-tripartite-se", tri.std_error, 0.02, 0.0));
    checks.push(Check::le("not-tripartite-excess", excess, 3f64.log2(), EXACT_TOL));
    Ok(NotReport { params: params.clone(), entropy: h, bayes, tripartite: tri, tripartite_excess: excess, checks })
}

// ---------------------------------------------------------------------------
// Chain constructions
// ---------------------------------------------------------------------------

/// Random bits at positions `1..=j_max`, then the complement of the first bit up to
/// `j_max + n + 1`. Start states beyond `j_max` then emit a symbol that differs
/// from `x_1`, so they contribute nothing to any prefix probability.
pub fn chain_test_sequence<R: Rng + ?Sized>(j_max: usize, n: usize, rng: &mut R) -> Vec<Symbol> {
    let mut x: Vec<Symbol> = (0..j_max).map(|_| rng.gen_range(0..2)).collect();
    let fill = 1 - x[0];
    x.resize(j_max + n + 1, fill);
    x
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainBoundRow {
    pub n: usize,
    pub x: String,
    /// `-log2 mu(x_{1..n})` of the untruncated chain.
    pub neg_log_mu: f64,
    pub bound: f64,
    /// Stationary mass of start states above `J_max`.
    pub tail_mass: f64,
    pub check: Check,
}

/// `-log2 mu_x(x_{1..n}) <= -log2 pi_1 + 2 log2(n+1)` for the stationary chain.
///
/// `x` must come from [`chain_test_sequence`]: with it the truncated forward
/// pass times the retained start mass is the exact untruncated value.
pub fn stno_check(x: &[Symbol], j_max: usize, n: usize) -> Result<ChainBoundRow> {
    check_tail_fill(x, j_max, x[0])?;
    let chain = ChainMeasure::stno(x, j_max)?;
    let neg_log_mu = -(chain.checked_joint_logprob(&x[..n])?.value() + (1.0 - chain.spec().eps_tail).log2());
    let bound = -chain.spec().pi_first().log2() + 2.0 * ((n + 1) as f64).log2();
    let check = Check::le(format!("stno[n={n}]"), neg_log_mu, bound, EXACT_TOL);
    Ok(ChainBoundRow { n, x: render(&x[..n]), neg_log_mu, bound, tail_mass: chain.spec().eps_tail, check })
}

fn check_tail_fill(x: &[Symbol], j_max: usize, first: Symbol) -> Result<()> {
    if x.len() <= j_max || x[j_max..].contains(&first) {
        return Err(Error::InvalidParameter(
            "positions beyond J_max must differ from the first symbol".into(),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HiddenChainReport {
    pub n: usize,
    pub t: String,
    pub neg_log_mu: f64,
    pub target: f64,
    pub tail_mass: f64,
    pub check: Check,
}

/// `-log2 mu_t(t_{1..n})` for the hidden climb-or-reset chain against `n log2(3/2)`.
pub fn hidden_chain_rate(t: &[Symbol], j_max: usize, n: usize, tolerance: f64) -> Result<HiddenChainReport> {
    check_tail_fill(t, j_max, t[0])?;
    let chain = ChainMeasure::stno1(t, j_max)?;
    let neg_log_mu = -(chain.checked_joint_logprob(&t[..n])?.value() + (1.0 - chain.spec().eps_tail).log2());
    let target = n as f64 * 1.5f64.log2();
    let check = Check::close(format!("stno1[n={n}]"), neg_log_mu, target, tolerance);
    Ok(HiddenChainReport { n, t: render(&t[..n]), neg_log_mu, target, tail_mass: chain.spec().eps_tail, check })
}

// ---------------------------------------------------------------------------
// Middle case
// ---------------------------------------------------------------------------

/// `gamma'_t`: on the path `t` the next symbol `t_n` gets `on_path`; off the
/// path both symbols get 1/2.
#[derive(Debug, Clone)]
pub struct GammaPrime {
    target: Dirac,
    on_path: f64,
}

impl GammaPrime {
    pub fn new(target: Dirac, on_path: f64) -> Result<Self> {
        if target.alphabet() != Alphabet::BINARY || !(0.0..=1.0).contains(&on_path) {
            return Err(Error::InvalidParameter("gamma' needs a binary target and on_path in [0,1]".into()));
        }
        Ok(Self { target, on_path })
    }

    fn law(&self, on: bool, t: usize, out: &mut [f64]) {
        if on {
            let s = self.target.symbol_at(t);
            out[s] = self.on_path;
            out[1 - s] = 1.0 - self.on_path;
        } else {
            out.iter_mut().for_each(|v| *v = 0.5);
        }
    }
}

#[derive(Clone)]
struct GammaCursor<'a> {
    m: &'a GammaPrime,
    on: bool,
    t: usize,
}

impl<'a> Predictor<'a> for GammaCursor<'a> {
    fn alphabet(&self) -> Alphabet {
        Alphabet::BINARY
    }
    fn position(&self) -> usize {
        self.t
    }
    fn predict_into(&self, out: &mut [f64]) -> Result<()> {
        self.m.law(self.on, self.t, out);
        Ok(())
    }
    fn observe(&mut self, s: Symbol) -> Result<()> {
        Alphabet::BINARY.check(s)?;
        self.on = self.on && self.m.target.symbol_at(self.t) == s;
        self.t += 1;
        Ok(())
    }
    fn clone_box(&self) -> BoxPredictor<'a> {
        Box::new(self.clone())
    }
}

impl ProcessMeasure for GammaPrime {
    fn alphabet(&self) -> Alphabet {
        Alphabet::BINARY
    }
    fn label(&self) -> String {
        format!("gamma'[{}]", self.target.label())
    }
    fn cond_dist(&self, prefix: &[Symbol]) -> Result<Vec<f64>> {
        crate::measures::cond_via_predictor(self, prefix)
    }
    fn predictor(&self) -> BoxPredictor<'_> {
        Box::new(GammaCursor { m: self, on: true, t: 0 })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateFloor {
    pub label: String,
    pub argmin: String,
    /// `min_x -log2 rho(x) / n`.
    pub per_step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiddleCaseReport {
    pub n: usize,
    pub target: String,
    /// `L_n(delta_t, gamma'_t)/n`.
    pub gamma_per_step: f64,
    pub candidates: Vec<CandidateFloor>,
    pub checks: Vec<Check>,
}

/// Expert loss `log2(3/2)` per step against the exhaustive floor of candidates.
pub fn middle_case(n: usize, seed: u64, experts: usize) -> Result<MiddleCaseReport> {
    if n > 20 {
        return Err(Error::InvalidParameter(format!("exhaustive horizon {n} above 20")));
    }
    let mut rng = replica_rng(seed, 0);
    let mut draw_target = || -> Result<Dirac> {
        let head: Vec<Symbol> = (0..n).map(|_| rng.gen_range(0..2)).collect();
        Dirac::new(Alphabet::BINARY, head, vec![0])
    };
    let target = draw_target()?;
    let gamma = GammaPrime::new(target.clone(), 2.0 / 3.0)?;
    let gamma_per_step = path_loss(&gamma, &target.prefix(n)) / n as f64;

    let mut pool: Vec<MeasureRef> = vec![Arc::new(gamma.clone())];
    for _ in 1..experts.max(1) {
        pool.push(Arc::new(GammaPrime::new(draw_target()?, 2.0 / 3.0)?));
    }
    let candidates: Vec<MeasureRef> = vec![
        Arc::new(Laplace::new(Alphabet::BINARY)),
        Arc::new(Kt::new(Alphabet::BINARY)),
        Arc::new(Mixture::uniform(pool)?.with_label(format!("gamma'-mixture[{experts}]"))),
    ];
    let mut rows = Vec::new();
    let mut checks = vec![Check::close("middle-expert-rate", gamma_per_step, 1.5f64.log2(), 1e-12)];
    for c in &candidates {
        let (x, loss) = exhaustive_min(c.as_ref(), n)?;
        let per_step = loss / n as f64;
        checks.push(Check::ge(format!("middle-floor[{}]", c.label()), per_step, 1.0, 1e-12));
        rows.push(CandidateFloor { label: c.label(), argmin: render(&x), per_step });
    }
    Ok(MiddleCaseReport { n, target: render(&target.prefix(n)), gamma_per_step, candidates: rows, checks })
}

// ---------------------------------------------------------------------------
// Weights matter
// ---------------------------------------------------------------------------

/// Mixture of `nu_k = 0^k 1^inf`, `k < n`, plus one component standing for all
/// `k >= n` (they agree on `X^n`) carrying their total weight.
pub fn shifted_dirac_mixture(n: usize, scheme: &WeightScheme) -> Result<Mixture> {
    let mut comps: Vec<MeasureRef> = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for k in 1..=n {
        comps.push(Arc::new(Dirac::new(Alphabet::BINARY, vec![0; k], vec![1])?));
        weights.push(if k < n { scheme.weight(k) } else { scheme.mass_from(n) });
    }
    Ok(Mixture::new(comps, weights)?.with_label(format!("shifted-diracs[{}]", scheme.name())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightsMatterReport {
    pub n: usize,
    pub loss_quadratic: f64,
    pub bound_quadratic: f64,
    pub loss_geometric: f64,
    pub checks: Vec<Check>,
}

pub fn weights_matter(n: usize) -> Result<WeightsMatterReport> {
    if n < 2 {
        return Err(Error::InvalidParameter("n must be at least 2".into()));
    }
    let zeros = vec![0; n];
    let q = shifted_dirac_mixture(n, &WeightScheme::Quadratic)?;
    let g = shifted_dirac_mixture(n, &WeightScheme::Geometric)?;
    let loss_quadratic = path_loss(&q, &zeros);
    let loss_geometric = path_loss(&g, &zeros);
    let bound_quadratic = 2.0 * (n as f64).log2() + 1.0;
    let checks = vec![
        Check::close("weights-geometric", loss_geometric, (n - 1) as f64, EXACT_TOL),
        Check::le("weights-quadratic", loss_quadratic, bound_quadratic, 0.0),
        Check::close(
            "weights-quadratic-tail",
            loss_quadratic,
            -WeightScheme::Quadratic.mass_from(n).log2(),
            EXACT_TOL,
        ),
    ];
    Ok(WeightsMatterReport { n, loss_quadratic, bound_quadratic, loss_geometric, checks })
}

// ---------------------------------------------------------------------------
// Contamination
// ---------------------------------------------------------------------------

/// `L_n(mu, (rho + chi)/2) <= L_n(mu, rho) + 1`.
pub fn contamination_kl_check(
    mu: &dyn ProcessMeasure,
    rho: MeasureRef,
    chi: MeasureRef,
    n: usize,
    method: &Method,
) -> Result<Check> {
    let id = format!("contaminate-kl[{}|{}+{}]", mu.label(), rho.label(), chi.label());
    let base = expected_cumulative_kl(mu, rho.as_ref(), n, method)?.value;
    let mix = Mixture::uniform(vec![rho, chi])?;
    let mixed = expected_cumulative_kl(mu, &mix, n, method)?.value;
    Ok(Check::le(id, mixed, base + 1.0, EXACT_TOL))
}

/// `rho(x_n = 1) = n/(n+1)`, independently.
#[must_use]
pub fn climbing_predictor() -> Independent {
    Independent::new(
        Alphabet::BINARY,
        "climbing",
        Arc::new(|t| {
            let t = t as f64;
            vec![1.0 / (t + 1.0), t / (t + 1.0)]
        }),
    )
}

/// `n_k = 2^(2^k)` for `k >= 1`; `nu(x_n = 1) = n_(k-1)/n_k` at `n = n_k`, else 1.
#[must_use]
pub fn doubly_exponential_spoiler() -> Independent {
    Independent::new(
        Alphabet::BINARY,
        "spoiler",
        Arc::new(|t| {
            let q = doubly_exponential_index(t).map_or(1.0, |k| 1.0 / ((1u64 << (1u64 << (k - 1))) as f64));
            vec![1.0 - q, q]
        }),
    )
}

fn doubly_exponential_index(t: usize) -> Option<u32> {
    (1..=5u32).find(|&k| 1usize.checked_shl(1 << k) == Some(t))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NosumAdRow {
    pub k: u32,
    pub n: usize,
    /// `(rho+chi)/2 (1 | 1^(n-1))`.
    pub conditional: f64,
    pub closed_form: f64,
    /// `rho(1 | 1^(n-1)) = n/(n+1)`.
    pub rho_alone: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NosumAdReport {
    pub rows: Vec<NosumAdRow>,
    pub checks: Vec<Check>,
}

pub fn nosum_ad(k_max: u32) -> Result<NosumAdReport> {
    if !(1..=4).contains(&k_max) {
        return Err(Error::InvalidParameter("k_max must be in 1..=4".into()));
    }
    let rho: MeasureRef = Arc::new(climbing_predictor());
    let chi: MeasureRef = Arc::new(doubly_exponential_spoiler());
    let mix = Mixture::uniform(vec![rho, chi])?;
    let mut p = mix.mixture_predictor();
    let mut rows = Vec::new();
    let mut t = 0usize;
    for k in 1..=k_max {
        let n = 1usize << (1 << k);
        while t + 1 < n {
            p.observe(1)?;
            t += 1;
        }
        let conditional = p.predict()?[1];
        let nf = n as f64;
        let closed_form = (1.0 / (nf + 1.0) + 2.0 / nf) / (1.0 / nf + 2.0 / nf.sqrt());
        rows.push(NosumAdRow { k, n, conditional, closed_form, rho_alone: nf / (nf + 1.0) });
    }
    let mut checks: Vec<Check> = rows
        .iter()
        .map(|r| Check::close(format!("nosum-ad-closed-form[k={}]", r.k), r.conditional, r.closed_form, 1e-12))
        .collect();
    let decreasing = rows.windows(2).all(|w| w[1].conditional < w[0].conditional);
    checks.push(Check::holds("nosum-ad-decreasing", decreasing));
    Ok(NosumAdReport { rows, checks })
}

/// `rho(x_n = 1) = 1/2` except `rho(x_n = 1) = 0` at `n = 2^k`.
#[must_use]
pub fn sparse_killer() -> Independent {
    Independent::new(
        Alphabet::BINARY,
        "sparse-killer",
        Arc::new(|t| if t >= 2 && t.is_power_of_two() { vec![1.0, 0.0] } else { vec![0.5, 0.5] }),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NosumAvadPath {
    pub seed: u64,
    /// First step at which the killer gave the observed symbol probability 0.
    pub kill: Option<usize>,
    /// Smallest `abar_n` over `n >= 4 kill`.
    pub min_abar_after: f64,
    pub follows_chi: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NosumAvadReport {
    pub horizon: usize,
    /// `abar_n` of the uncontaminated killer; its laws do not depend on the path.
    pub abar_rho: f64,
    pub paths: Vec<NosumAvadPath>,
    pub checks: Vec<Check>,
}

pub fn nosum_avad(horizon: usize, paths: usize, seed: u64) -> Result<NosumAvadReport> {
    let mu = Iid::uniform(Alphabet::BINARY);
    let rho: MeasureRef = Arc::new(sparse_killer());
    let chi: MeasureRef = Arc::new(Iid::bernoulli(2.0 / 3.0)?);
    let chi_law = [2.0 / 3.0, 1.0 / 3.0];
    let mix = Mixture::uniform(vec![rho.clone(), chi])?;
    let rows = (0..paths as u64)
        .into_par_iter()
        .map(|i| {
            let x = sample(&mu, horizon, &mut replica_rng(seed, i))?.into_symbols();
            let report = loss_series(&mu, &mix, &x)?;
            let kill = x.iter().enumerate().find(|&(t, &s)| t + 1 >= 2 && (t + 1).is_power_of_two() && s == 1);
            let kill = kill.map(|(t, _)| t + 1);
            let (mut min_abar_after, mut follows_chi) = (f64::INFINITY, true);
            if let Some(tau) = kill {
                let mut p = mix.mixture_predictor();
                for (t, &s) in x.iter().enumerate() {
                    if t >= tau {
                        let d = p.predict()?;
                        follows_chi &= d.iter().zip(&chi_law).all(|(a, b)| (a - b).abs() < 1e-12);
                    }
                    p.observe(s)?;
                }
                for st in report.steps.iter().filter(|s| s.step >= 4 * tau) {
                    min_abar_after = min_abar_after.min(st.abar);
                }
            }
            Ok(NosumAvadPath { seed: i, kill, min_abar_after, follows_chi })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut pr = rho.predictor();
    let mut abar_rho = 0.0;
    for _ in 0..horizon {
        abar_rho += crate::loss::abs_dist(&[0.5, 0.5], &pr.predict()?);
        pr.observe(0)?;
    }
    abar_rho /= horizon as f64;
    let relevant: Vec<&NosumAvadPath> = rows.iter().filter(|r| r.kill.is_some_and(|k| 4 * k <= horizon)).collect();
    let worst = relevant.iter().map(|r| r.min_abar_after).fold(f64::INFINITY, f64::min);
    let checks = vec![
        Check::holds("nosum-avad-paths", !relevant.is_empty()),
        Check::ge("nosum-avad-persistence", worst, 0.25, 0.0),
        Check::holds("nosum-avad-follows-chi", relevant.iter().all(|r| r.follows_chi)),
        Check::le("nosum-avad-rho-alone", abar_rho, (horizon as f64).log2().floor() / horizon as f64, EXACT_TOL),
    ];
    Ok(NosumAvadReport { horizon, abar_rho, paths: rows, checks })
}

// ---------------------------------------------------------------------------
// Dominance certificates
// ---------------------------------------------------------------------------

/// Growth class of `log c_n^-1`, ordered from weakest to strongest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConditionClass {
    /// Exponentially decaying coefficients; no prediction guarantee.
    Failing,
    /// `(1/n) log c_n^-1 -> 0`.
    Subexponential,
    /// `sum (log c_n^-1)^2 / n^2 < inf`.
    SquareSummable,
    /// `c_n >= c > 0`.
    BoundedBelow,
}

impl fmt::Display for ConditionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ConditionClass::Failing => "failing",
            ConditionClass::Subexponential => "subexponential",
            ConditionClass::SquareSummable => "square-summable",
            ConditionClass::BoundedBelow => "bounded-below",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Coefficients {
    Constant(f64),
    /// `n! (|X|-1)! / (n+|X|-1)!`, which is `1/(n+1)` for binary data.
    Laplace { alphabet: usize },
    /// `base^n`.
    Exponential(f64),
    /// `2^-l_n` with `l_n = max_{m<=n} sqrt(m)/log2(m+1)`.
    SqrtOverLog,
    /// `c_n = values[n-1]` with a declared class.
    Table { values: Vec<f64>, class: ConditionClass },
}

impl Coefficients {
    /// `log2 c_n`.
    #[must_use]
    pub fn log2_at(&self, n: usize) -> f64 {
        match self {
            Coefficients::Constant(c) => c.log2(),
            Coefficients::Laplace { alphabet } => (1..*alphabet)
                .map(|i| (i as f64).log2() - ((n + i) as f64).log2())
                .sum(),
            Coefficients::Exponential(b) => n as f64 * b.log2(),
            Coefficients::SqrtOverLog => -sqrt_over_log_level(n),
            Coefficients::Table { values, .. } => values.get(n - 1).map_or(f64::NEG_INFINITY, |v| v.log2()),
        }
    }

    #[must_use]
    pub fn class(&self) -> ConditionClass {
        match self {
            Coefficients::Constant(c) if *c > 0.0 => ConditionClass::BoundedBelow,
            Coefficients::Constant(_) => ConditionClass::Failing,
            Coefficients::Laplace { .. } | Coefficients::SqrtOverLog => ConditionClass::SquareSummable,
            Coefficients::Exponential(b) if *b >= 1.0 => ConditionClass::BoundedBelow,
            Coefficients::Exponential(_) => ConditionClass::Failing,
            Coefficients::Table { class, .. } => *class,
        }
    }

    #[must_use]
    pub fn describe(&self) -> String {
        match self {
            Coefficients::Constant(c) => format!("constant({c})"),
            Coefficients::Laplace { alphabet } => format!("laplace({alphabet})"),
            Coefficients::Exponential(b) => format!("exponential({b})"),
            Coefficients::SqrtOverLog => "sqrt-over-log".into(),
            Coefficients::Table { .. } => "table".into(),
        }
    }
}

/// `l_n = max_{m<=n} sqrt(m)/log2(m+1)`; nondecreasing, `l_0 = 0`.
#[must_use]
pub fn sqrt_over_log_level(n: usize) -> f64 {
    (1..=n).map(|m| (m as f64).sqrt() / ((m + 1) as f64).log2()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DominanceMode {
    Exhaustive,
    Sampled { paths: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceCert {
    pub rho: String,
    pub mu: String,
    pub coefficients: Coefficients,
    pub class: ConditionClass,
    pub horizon: usize,
    pub mode: DominanceMode,
    pub cells: u64,
    /// Smallest `log2 rho(x) - log2 mu(x) - log2 c_n` seen.
    pub min_margin: f64,
    /// Cells with margin below `1e-9`, as `(n, x)`; at most 16 kept.
    pub tight: Vec<(usize, String)>,
    pub violation: Option<(usize, String)>,
    pub pass: bool,
}

const TIGHT_TOL: f64 = 1e-9;

struct MarginTracker {
    cells: u64,
    min_margin: f64,
    tight: Vec<(usize, String)>,
    violation: Option<(usize, String)>,
}

impl MarginTracker {
    fn visit(&mut self, n: usize, x: &[Symbol], lr: f64, lm: f64, lc: f64) {
        if lm == f64::NEG_INFINITY {
            return;
        }
        self.cells += 1;
        let margin = lr - lm - lc;
        self.min_margin = self.min_margin.min(margin);
        if margin < -TIGHT_TOL {
            if self.violation.is_none() {
                self.violation = Some((n, render(x)));
            }
        } else if margin < TIGHT_TOL && self.tight.len() < 16 {
            self.tight.push((n, render(x)));
        }
    }
}

/// Checks `rho(x_{1..n}) >= c_n mu(x_{1..n})` for every `n <= horizon`.
pub fn dominance_check(
    rho: &dyn ProcessMeasure,
    mu: &dyn ProcessMeasure,
    coefficients: &Coefficients,
    horizon: usize,
    mode: DominanceMode,
) -> Result<DominanceCert> {
    if rho.alphabet() != mu.alphabet() {
        return Err(Error::AlphabetMismatch(format!("{} vs {}", rho.label(), mu.label())));
    }
    let mut tr = MarginTracker { cells: 0, min_margin: f64::INFINITY, tight: Vec::new(), violation: None };
    match mode {
        DominanceMode::Exhaustive => {
            let alphabet = mu.alphabet();
            for n in 1..=horizon {
                let lr = enumerate_logprobs(rho, n, DEFAULT_CELL_CAP)?;
                let lm = enumerate_logprobs(mu, n, DEFAULT_CELL_CAP)?;
                let lc = coefficients.log2_at(n);
                for (i, (&a, &b)) in lr.iter().zip(&lm).enumerate() {
                    if b > f64::NEG_INFINITY && a - b - lc < TIGHT_TOL {
                        let x = crate::measures::decode_index(alphabet, n, i);
                        tr.visit(n, &x, a, b, lc);
                    } else if b > f64::NEG_INFINITY {
                        tr.cells += 1;
                        tr.min_margin = tr.min_margin.min(a - b - lc);
                    }
                }
            }
        }
        DominanceMode::Sampled { paths, seed } => {
            for i in 0..paths as u64 {
                let x = sample(mu, horizon, &mut replica_rng(seed, i))?.into_symbols();
                let (mut pr, mut pm) = (rho.predictor(), mu.predictor());
                let (mut lr, mut lm) = (0.0, 0.0);
                for (t, &s) in x.iter().enumerate() {
                    let q = pr.prob(s)?;
                    lm += pm.prob(s)?.log2();
                    lr += if q > 0.0 { q.log2() } else { f64::NEG_INFINITY };
                    tr.visit(t + 1, &x[..=t], lr, lm, coefficients.log2_at(t + 1));
                    if lr == f64::NEG_INFINITY {
                        break;
                    }
                    pr.observe(s)?;
                    pm.observe(s)?;
                }
            }
        }
    }
    let pass = tr.violation.is_none();
    Ok(DominanceCert {
        rho: rho.label(),
        mu: mu.label(),
        coefficients: coefficients.clone(),
        class: coefficients.class(),
        horizon,
        mode,
        cells: tr.cells,
        min_margin: tr.min_margin,
        tight: tr.tight,
        violation: tr.violation,
        pass,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Consequence {
    /// `(1/n) L_n(mu, rho) <= (1/n) log2 c_n^-1 + eps`; needs a subexponential class.
    ExpectedAverage { n: usize, method: Method, eps: f64 },
    /// Median `dbar_n` over sampled paths decreases across horizons; needs a
    /// square-summable class.
    PathwiseAverage { horizons: Vec<usize>, paths: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsequenceVerdict {
    pub applicable: bool,
    pub class: ConditionClass,
    /// `(n, value)`: the loss per step, or the median `dbar_n`.
    pub series: Vec<(usize, f64)>,
    pub checks: Vec<Check>,
}

impl ConsequenceVerdict {
    /// Passing requires applicability.
    #[must_use]
    pub fn pass(&self) -> bool {
        self.applicable && crate::verdict::all_pass(&self.checks)
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Prediction guarantee implied by a passing certificate.
pub fn dominance_consequence_check(
    cert: &DominanceCert,
    rho: &dyn ProcessMeasure,
    mu: &dyn ProcessMeasure,
    consequence: &Consequence,
) -> Result<ConsequenceVerdict> {
    let needed = match consequence {
        Consequence::ExpectedAverage { .. } => ConditionClass::Subexponential,
        Consequence::PathwiseAverage { .. } => ConditionClass::SquareSummable,
    };
    if !cert.pass || cert.class < needed {
        return Ok(ConsequenceVerdict { applicable: false, class: cert.class, series: Vec::new(), checks: Vec::new() });
    }
    match consequence {
        Consequence::ExpectedAverage { n, method, eps } => {
            let nf = *n as f64;
            let lhs = expected_cumulative_kl(mu, rho, *n, method)?.value / nf;
            let rhs = -cert.coefficients.log2_at(*n) / nf;
            Ok(ConsequenceVerdict {
                applicable: true,
                class: cert.class,
                series: vec![(*n, lhs)],
                checks: vec![Check::le(format!("dominance-expected[n={n}]"), lhs, rhs, *eps)],
            })
        }
        Consequence::PathwiseAverage { horizons, paths, seed } => {
            let top = horizons.iter().copied().max().unwrap_or(0);
            let per_path = (0..*paths as u64)
                .into_par_iter()
                .map(|i| {
                    let x = sample(mu, top, &mut replica_rng(*seed, i))?.into_symbols();
                    let r = loss_series(mu, rho, &x)?;
                    Ok(horizons.iter().map(|&h| r.steps.get(h - 1).map_or(f64::INFINITY, |s| s.dbar)).collect())
                })
                .collect::<Result<Vec<Vec<f64>>>>()?;
            let series: Vec<(usize, f64)> = horizons
                .iter()
                .enumerate()
                .map(|(j, &h)| {
                    let mut col: Vec<f64> = per_path.iter().map(|v| v[j]).collect();
                    (h, median(&mut col))
                })
                .collect();
            let decreasing = series.windows(2).all(|w| w[1].1 < w[0].1);
            Ok(ConsequenceVerdict {
                applicable: true,
                class: cert.class,
                series,
                checks: vec![Check::holds("dominance-pathwise-decreasing", decreasing)],
            })
        }
    }
}

/// Contaminates `base` towards repeating the previous symbol so that
/// `rho(x_{1..n}) >= 2^-l_n base(x_{1..n})` with `l_n` from [`sqrt_over_log_level`].
///
/// At step `t` the law is `(1 - e_t) base + e_t [previous symbol]` with
/// `1 - e_t = 2^-(l_t - l_(t-1))`; symbol 0 stands in before the first step.
#[derive(Debug, Clone)]
pub struct StickyContamination {
    base: MeasureRef,
    /// `1 - e_t` for `t = 1..=levels.len()`; later steps are uncontaminated.
    keep: Arc<Vec<f64>>,
}

impl StickyContamination {
    #[must_use]
    pub fn new(base: MeasureRef, horizon: usize) -> Self {
        let mut keep = Vec::with_capacity(horizon);
        let mut prev = 0.0;
        let mut level = 0.0f64;
        for m in 1..=horizon {
            level = level.max((m as f64).sqrt() / ((m + 1) as f64).log2());
            keep.push((-(level - prev)).exp2());
            prev = level;
        }
        Self { base, keep: Arc::new(keep) }
    }
}

impl ProcessMeasure for StickyContamination {
    fn alphabet(&self) -> Alphabet {
        self.base.alphabet()
    }
    fn label(&self) -> String {
        format!("sticky({})", self.base.label())
    }
    fn cond_dist(&self, prefix: &[Symbol]) -> Result<Vec<f64>> {
        let mut d = self.base.cond_dist(prefix)?;
        let keep = self.keep.get(prefix.len()).copied().unwrap_or(1.0);
        d.iter_mut().for_each(|v| *v *= keep);
        d[prefix.last().copied().unwrap_or(0)] += 1.0 - keep;
        Ok(d)
    }
}

/// Laplace against Bernoulli measures on a grid of `points` values of `P(1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaplaceGrid {
    pub horizon: usize,
    pub points: usize,
    pub cells: u64,
    pub min_margin: f64,
    pub all_pass: bool,
    /// Equality at `P(1) = 1`, `x = 1^n`, for every `n <= horizon`.
    pub equality_at_ones: bool,
}

pub fn laplace_grid(horizon: usize, points: usize) -> Result<LaplaceGrid> {
    let rho = Laplace::new(Alphabet::BINARY);
    let coeff = Coefficients::Laplace { alphabet: 2 };
    let certs = (0..points)
        .into_par_iter()
        .map(|i| {
            let q = i as f64 / (points - 1) as f64;
            let mu = Iid::bernoulli(1.0 - q)?;
            dominance_check(&rho, &mu, &coeff, horizon, DominanceMode::Exhaustive)
        })
        .collect::<Result<Vec<_>>>()?;
    let ones = &certs[points - 1];
    let equality_at_ones = (1..=horizon).all(|n| ones.tight.contains(&(n, "1".repeat(n))));
    Ok(LaplaceGrid {
        horizon,
        points,
        cells: certs.iter().map(|c| c.cells).sum(),
        min_margin: certs.iter().map(|c| c.min_margin).fold(f64::INFINITY, f64::min),
        all_pass: certs.iter().all(|c| c.pass),
        equality_at_ones,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodomReport {
    pub cert: DominanceCert,
    /// `(n_k, delta, a)` at the sparse steps.
    pub spikes: Vec<(usize, f64, f64)>,
    pub checks: Vec<Check>,
}

/// `rho(x_n = 1) = 1/2` at `n = 2^k`, else 1; data `1^inf`.
pub fn nodom(k_max: u32, horizon: usize) -> Result<NodomReport> {
    let rho = Independent::new(
        Alphabet::BINARY,
        "sparse-halving",
        Arc::new(|t| if t >= 2 && t.is_power_of_two() { vec![0.5, 0.5] } else { vec![0.0, 1.0] }),
    );
    let mu = Dirac::new(Alphabet::BINARY, Vec::new(), vec![1])?;
    let top = horizon.max(1 << k_max);
    let values: Vec<f64> = (1..=top).map(|n| (-((n as f64).log2().floor())).exp2()).collect();
    let coeff = Coefficients::Table { values, class: ConditionClass::SquareSummable };
    let cert = dominance_check(&rho, &mu, &coeff, horizon, DominanceMode::Exhaustive)?;
    let series = loss_series(&mu, &rho, &vec![1; top])?;
    let spikes: Vec<(usize, f64, f64)> = (1..=k_max)
        .map(|k| {
            let s = &series.steps[(1 << k) - 1];
            (s.step, s.delta, s.a)
        })
        .collect();
    let mut checks = vec![Check::holds("nodom-dominance", cert.pass)];
    for &(n, d, a) in &spikes {
        checks.push(Check::close(format!("nodom-delta[n={n}]"), d, 1.0, 1e-12));
        checks.push(Check::close(format!("nodom-a[n={n}]"), a, 1.0, 1e-12));
    }
    Ok(NodomReport { cert, spikes, checks })
}

// ---------------------------------------------------------------------------
// Scenario registry
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioId {
    Lb,
    SuboptimalBayes,
    StationaryPlus,
    HiddenMarkov,
    MiddleCase,
    WeightsMatter,
    NosumAd,
    NosumAvad,
    Nodom,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 9] = [
        ScenarioId::Lb,
        ScenarioId::SuboptimalBayes,
        ScenarioId::StationaryPlus,
        ScenarioId::HiddenMarkov,
        ScenarioId::MiddleCase,
        ScenarioId::WeightsMatter,
        ScenarioId::NosumAd,
        ScenarioId::NosumAvad,
        ScenarioId::Nodom,
    ];

    #[must_use]
    pub fn id(self) -> &'static str {
        match self {
            ScenarioId::Lb => "lb",
            ScenarioId::SuboptimalBayes => "suboptimal-bayes",
            ScenarioId::StationaryPlus => "stationary-plus",
            ScenarioId::HiddenMarkov => "hidden-markov",
            ScenarioId::MiddleCase => "middle-case",
            ScenarioId::WeightsMatter => "weights-matter",
            ScenarioId::NosumAd => "nosum-ad",
            ScenarioId::NosumAvad => "nosum-avad",
            ScenarioId::Nodom => "nodom",
        }
    }

    #[must_use]
    pub fn anchor(self) -> &'static str {
        match self {
            ScenarioId::Lb => "th:lb",
            ScenarioId::SuboptimalBayes => "th:not",
            ScenarioId::StationaryPlus => "th:stno",
            ScenarioId::HiddenMarkov => "th:stno1",
            ScenarioId::MiddleCase => "th:comp",
            ScenarioId::WeightsMatter => "s:exvc0",
            ScenarioId::NosumAd => "th:nosumad",
            ScenarioId::NosumAvad => "th:nosumavad",
            ScenarioId::Nodom => "th:nodom",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|id| id.id() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown scenario `{s}`")))
    }
}

/// Desk-scale parameters shared by the scenarios; each reads what it needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioParams {
    pub n: Option<usize>,
    pub seed: u64,
    pub seeds: usize,
    pub not: NotParams,
    pub chain_horizons: Vec<usize>,
    pub chain_sequences: usize,
    pub k_max: u32,
    pub experts: usize,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            n: None,
            seed: 2024,
            seeds: 50,
            not: NotParams::default(),
            chain_horizons: vec![5, 10, 20, 30],
            chain_sequences: 5,
            k_max: 4,
            experts: 8,
        }
    }
}

/// A constructed scenario: its measures and the evaluated finite-horizon predicate.
#[derive(Debug, Clone)]
pub struct AdversarialScenario {
    pub id: ScenarioId,
    pub measures: Vec<MeasureRef>,
    pub method: String,
    pub checks: Vec<Check>,
}

impl AdversarialScenario {
    #[must_use]
    pub fn pass(&self) -> bool {
        crate::verdict::all_pass(&self.checks)
    }
}

pub fn build_scenario(id: ScenarioId, params: &ScenarioParams) -> Result<AdversarialScenario> {
    let (measures, method, checks): (Vec<MeasureRef>, &str, Vec<Check>) = match id {
        ScenarioId::Lb => {
            let n = params.n.unwrap_or(12);
            let r = lb_mechanism(n, &WeightScheme::Telescoping)?;
            (vec![Arc::new(s_class(64, &WeightScheme::Telescoping)?)], "exhaustive", r.checks)
        }
        ScenarioId::SuboptimalBayes => {
            let mut p = params.not.clone();
            if let Some(n) = params.n {
                p.n = n;
            }
            let r = suboptimal_bayes(&p)?;
            (vec![Arc::new(tripartite(p.p)?)], "monte_carlo", r.checks)
        }
        ScenarioId::StationaryPlus => {
            let mut checks = Vec::new();
            let mut measures: Vec<MeasureRef> = Vec::new();
            let top = params.chain_horizons.iter().copied().max().unwrap_or(30);
            let j_max = 2 * top + 16;
            for i in 0..params.chain_sequences as u64 {
                let x = chain_test_sequence(j_max, top, &mut replica_rng(params.seed, i));
                for &n in &params.chain_horizons {
                    checks.push(stno_check(&x, j_max, n)?.check);
                }
                measures.push(Arc::new(ChainMeasure::stno(&x, j_max)?));
            }
            (measures, "exact", checks)
        }
        ScenarioId::HiddenMarkov => {
            let n = params.n.unwrap_or(30);
            let j_max = 64.max(n);
            let t = chain_test_sequence(j_max, n, &mut replica_rng(params.seed, 0));
            let r = hidden_chain_rate(&t, j_max, n, 3.0)?;
            (vec![Arc::new(ChainMeasure::stno1(&t, j_max)?)], "exact", vec![r.check])
        }
        ScenarioId::MiddleCase => {
            let r = middle_case(params.n.unwrap_or(16), params.seed, params.experts)?;
            (Vec::new(), "exhaustive", r.checks)
        }
        ScenarioId::WeightsMatter => {
            let n = params.n.unwrap_or(100);
            let r = weights_matter(n)?;
            (vec![Arc::new(shifted_dirac_mixture(n, &WeightScheme::Quadratic)?)], "exact", r.checks)
        }
        ScenarioId::NosumAd => {
            let r = nosum_ad(params.k_max.min(4))?;
            (vec![Arc::new(climbing_predictor()), Arc::new(doubly_exponential_spoiler())], "exact", r.checks)
        }
        ScenarioId::NosumAvad => {
            let r = nosum_avad(params.n.unwrap_or(4096), params.seeds, params.seed)?;
            (vec![Arc::new(sparse_killer())], "sampled", r.checks)
        }
        ScenarioId::Nodom => {
            let r = nodom(5, params.n.unwrap_or(12))?;
            (Vec::new(), "exact", r.checks)
        }
    };
    Ok(AdversarialScenario { id, measures, method: method.into(), checks })
}
