//! Elementary measure families.

use std::fmt;
use std::sync::Arc;

use statrs::function::gamma::ln_gamma;

use super::{validate_dist, Alphabet, BoxPredictor, LogProb, MeasureRef, Predictor, ProcessMeasure, Symbol};
use crate::error::{Error, Result};

const LN2: f64 = std::f64::consts::LN_2;

fn one_hot(out: &mut [f64], s: Symbol) {
    out.iter_mut().for_each(|v| *v = 0.0);
    out[s] = 1.0;
}

fn fmt_num(x: f64) -> String {
    format!("{x}")
}

// ---------------------------------------------------------------------------
// i.i.d.
// ---------------------------------------------------------------------------

/// Independent identically distributed symbols.
#[derive(Debug, Clone)]
pub struct Iid {
    alphabet: Alphabet,
    probs: Vec<f64>,
    label: String,
}

impl Iid {
    pub fn new(alphabet: Alphabet, probs: Vec<f64>) -> Result<Self> {
        validate_dist(&probs, alphabet.size())?;
        let label = format!(
            "iid[{}]",
            probs.iter().map(|&p| fmt_num(p)).collect::<Vec<_>>().join(",")
        );
        Ok(Self { alphabet, probs, label })
    }

    /// `p` is the probability of symbol 0.
    pub fn bernoulli(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!("Bernoulli parameter {p} outside [0,1]")));
        }
        let mut m = Self::new(Alphabet::BINARY, vec![p, 1.0 - p])?;
        m.label = format!("bernoulli({})", fmt_num(p));
        Ok(m)
    }

    #[must_use]
    pub fn uniform(alphabet: Alphabet) -> Self {
        let s = alphabet.size();
        Self {
            alphabet,
            probs: vec![1.0 / s as f64; s],
            label: format!("uniform({s})"),
        }
    }

    #[must_use]
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    #[must_use]
    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }
}

#[derive(Clone)]
struct IidCursor<'a> {
    m: &'a Iid,
    t: usize,
}

impl<'a> Predictor<'a> for IidCursor<'a> {
    fn alphabet(&self) -> Alphabet {
        self.m.alphabet
    }
    fn position(&self) -> usize {
        self.t
    }
    fn predict_into(&self, out: &mut [f64]) -> Result<()> {
        out.copy_from_slice(&self.m.probs);
        Ok(())
    }
    fn prob(&self, s: Symbol) -> Result<f64> {
        Ok(self.m.probs[s])
    }
    fn observe(&mut self, s: Symbol) -> Result<()> {
        self.m.alphabet.check(s)?;
        self.t += 1;
        Ok(())
    }
    fn clone_box(&self) -> BoxPredictor<'a> {
        Box::new(self.clone())
    }
}

impl ProcessMeasure for Iid {
    fn alphabet(&self) -> Alphabet {
        self.alphabet
    }
    fn label(&self) -> String {
        self.label.clone()
    }
    fn cond_dist(&self, _prefix: &[Symbol]) -> Result<Vec<f64>> {
        Ok(self.probs.clone())
    }
    fn predictor(&self) -> BoxPredictor<'_> {
        Box::new(IidCursor { m: self, t: 0 })
    }
    fn count_logprob(&self, counts: &[u64]) -> Option<f64> {
        let mut acc = 0.0;
        for (&c, &p) in counts.iter().zip(&self.probs) {
            if c == 0 {
                continue;
            }
            if p == 0.0 {
                return Some(f64::NEG_INFINITY);
            }
            acc += c as f64 * p.log2();
        }
        Some(acc)
    }
}

// ---------------------------------------------------------------------------
// Laplace and Krichevsky–Trofimov
// ---------------------------------------------------------------------------

/// Add-`alpha` estimator: `P(a | x) = (k_a + alpha) / (n + alpha |X|)`.
#[derive(Debug, Clone)]
struct AddConstant {
    alphabet: Alphabet,
    alpha: f64,
}

impl AddConstant {
    fn dist(&self, counts: &[u64], n: u64, out: &mut [f64]) {
        let denom = n as f64 + self.alpha * self.alphabet.size() as f64;
        for (o, &c) in out.iter_mut().zip(counts) {
            *o = (c as f64 + self.alpha) / denom;
        }
    }

    fn count_logprob(&self, counts: &[u64]) -> f64 {
        let s = self.alphabet.size() as f64;
        let n: u64 = counts.iter().sum();
        let mut acc = ln_gamma(self.alpha * s) - ln_gamma(n as f64 + self.alpha * s);
        for &c in counts {
            acc += ln_gamma(c as f64 + self.alpha) - ln_gamma(self.alpha);
        }
        acc / LN2
    }
}

#[derive(Clone)]
struct CountCursor<'a> {
    rule: &'a AddConstant,
    counts: Vec<u64>,
    n: u64,
}

impl<'a> Predictor<'a> for CountCursor<'a> {
    fn alphabet(&self) -> Alphabet {
        self.rule.alphabet
    }
    fn position(&self) -> usize {
        self.n as usize
    }
    fn predict_into(&self, out: &mut [f64]) -> Result<()> {
        self.rule.dist(&self.counts, self.n, out);
        Ok(())
    }
    fn prob(&self, s: Symbol) -> Result<f64> {
        let denom = self.n as f64 + self.rule.alpha * self.rule.alphabet.size() as f64;
        Ok((self.counts[s] as f64 + self.rule.alpha) / denom)
    }
    fn observe(&mut self, s: Symbol) -> Result<()> {
        self.rule.alphabet.check(s)?;
        self.counts[s] += 1;
        self.n += 1;
        Ok(())
    }
    fn clone_box(&self) -> BoxPredictor<'a> {
        Box::new(self.clone())
    }
}

fn counts_of(prefix: &[Symbol], size: usize) -> Vec<u64> {
    let mut c = vec![0u64; size];
    for &s in prefix {
        c[s] += 1;
    }
    c
}

macro_rules! add_constant_family {
    ($name:ident, $alpha:expr, $label:expr) => {
        #[derive(Debug, Clone)]
        pub struct $name {
            rule: AddConstant,
        }

        impl $name {
            #[must_use]
            pub fn new(alphabet: Alphabet) -> Self {
                Self { rule: AddConstant { alphabet, alpha: $alpha } }
            }
        }

        impl ProcessMeasure for $name {
            fn alphabet(&self) -> Alphabet {
                self.rule.alphabet
            }
            fn label(&self) -> String {
                $label.to_string()
            }
            fn cond_dist(&self, prefix: &[Symbol]) -> Result<Vec<f64>> {
                let size = self.rule.alphabet.size();
                let c = counts_of(prefix, size);
                let mut out = vec![0.0; size];
                self.rule.dist(&c, prefix.len() as u64, &mut out);
                Ok(out)
            }
            fn predictor(&self) -> BoxPredictor<'_> {
                Box::new(CountCursor {
                    rule: &self.rule,
                    counts: vec![0; self.rule.alphabet.size()],
                    n: 0,
                })
            }
            fn count_logprob(&self, counts: &[u64]) -> Option<f64> {
                Some(self.rule.count_logprob(counts))
            }
        }
    };
}

add_constant_family!(Laplace, 1.0, "laplace");
add_constant_family!(Kt, 0.5, "kt");

// ---------------------------------------------------------------------------
// Dirac
// ---------------------------------------------------------------------------

/// Point mass on the eventually periodic sequence `head cycle cycle ...`.
#[derive(Debug, Clone)]
pub struct Dirac {
    alphabet: Alphabet,
    head: Vec<Symbol>,
    cycle: Vec<Symbol>,
}

impl Dirac {
    pub fn new(alphabet: Alphabet, head: Vec<Symbol>, cycle: Vec<Symbol>) -> Result<Self> {
        if cycle.is_empty() {
            return Err(Error::InvalidParameter("Dirac cycle must be nonempty".into()));
        }
        for &s in head.iter().chain(&cycle) {
            alphabet.check(s)?;
        }
        Ok(Self { alphabet, head, cycle })
    }

    /// `"01(10)"` is `01` followed by `10` repeated; without parentheses
    /// the whole pattern repeats.
    pub fn parse(alphabet: Alphabet, pattern: &str) -> Result<Self> {
        let digits = |s: &str| -> Result<Vec<Symbol>> {
            s.chars()
                .map(|c| {
                    c.to_digit(36)
                        .map(|d| d as usize)
                        .ok_or_else(|| Error::InvalidParameter(format!("bad Dirac pattern `{pattern}`")))
                })
                .collect()
        };
        match pattern.find('(') {
            Some(open) => {
                let close = pattern
                    .rfind(')')
                    .filter(|&c| c > open)
                    .ok_or_else(|| Error::InvalidParameter(format!("bad Dirac pattern `{pattern}`")))?;
                Self::new(alphabet, digits(&pattern[..open])?, digits(&pattern[open + 1..close])?)
            }
            None => Self::new(alphabet, Vec::new(), digits(pattern)?),
        }
    }

    #[must_use]
    pub fn symbol_at(&self, t: usize) -> Symbol {
        if t < self.head.len() {
            self.head[t]
        } else {
            self.cycle[(t - self.head.len()) % self.cycle.len()]
        }
    }

    #[must_use]
    pub fn prefix(&self, n: usize) -> Vec<Symbol> {
        (0..n).map(|t| self.symbol_at(t)).collect()
    }
}

#[derive(Clone)]
struct DiracCursor<'a> {
    m: &'a Dirac,
    t: usize,
    alive: bool,
}

impl<'a> Predictor<'a> for DiracCursor<'a> {
    fn alphabet(&self) -> Alphabet {
        self.m.alphabet
    }
    fn position(&self) -> usize {
        self.t
    }
    fn predict_into(&self, out: &mut [f64]) -> Result<()> {
        if !self.alive {
            return Err(Error::UndefinedConditional { label: self.m.label(), position: self.t });
        }
        one_hot(out, self.m.symbol_at(self.t));
        Ok(())
    }
    fn observe(&mut self, s: Symbol) -> Result<()> {
        self.m.alphabet.check(s)?;
        if s != self.m.symbol_at(self.t) {
            self.alive = false;
        }
        self.t += 1;
        Ok(())
    }
    fn clone_box(&self) -> BoxPredictor<'a> {
        Box::new(self.clone())
    }
}

impl ProcessMeasure for Dirac {
    fn alphabet(&self) -> Alphabet {
        self.alphabet
    }
    fn label(&self) -> String {
        format!("dirac({}({}))", super::render(&self.head), super::render(&self.cycle))
    }
    fn cond_dist(&self, prefix: &[Symbol]) -> Result<Vec<f64>> {
        if prefix.iter().enumerate().any(|(t, &s)| s != self.symbol_at(t)) {
            return Err(Error::UndefinedConditional { label: self.label(), position: prefix.len() });
        }
        let mut out = vec![0.0; self.alphabet.size()];
        one_hot(&mut out, self.symbol_at(prefix.len()));
        Ok(out)
    }
    fn predictor(&self) -> BoxPredictor<'_> {
        Box::new(DiracCursor { m: self, t: 0, alive: true })
    }
    fn joint_logprob(&self, x: &[Symbol]) -> LogProb {
        if x.iter().enumerate().all(|(t, &s)| s == self.symbol_at(t)) {
            LogProb::ONE
        } else {
            LogProb::ZERO
        }
    }
}

// ---------------------------------------------------------------------------
// Independent, non-identically distributed steps
// ---------------------------------------------------------------------------

pub type StepLaw = Arc<dyn Fn(usize) -> Vec<f64> + Send + Sync>;

/// Independent symbols whose law at step `t` (1-based) is `law(t)`.
#[derive(Clone)]
pub struct Independent {
    alphabet: Alphabet,
    label: String,
    law: StepLaw,
}

impl fmt::Debug for Independent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Independent").field("label", &self.label).finish()
    }
}

impl Independent {
    pub fn new(alphabet: Alphabet, label: impl Into<String>, law: StepLaw) -> Self {
        Self { alphabet, label: label.into(), law }
    }

    fn law_at(&self, t: usize) -> Result<Vec<f64>> {
        let d = (self.law)(t);
        validate_dist(&d, self.alphabet.size())?;
        Ok(d)
    }
}

#[derive(Clone)]
struct IndependentCursor<'a> {
    m: &'a Independent,
    t: usize,
}

impl<'a> Predictor<'a> for IndependentCursor<'a> {
    fn alphabet(&self) -> Alphabet {
        self.m.alphabet
    }
    fn position(&self) -> usize {
        self.t
    }
    fn predict_into(&self, out: &mut [f64]) -> Result<()> {
        out.copy_from_slice(&self.m.law_at(self.t + 1)?);
        Ok(())
    }
    fn observe(&mut self, s: Symbol) -> Result<()> {
        self.m.alphabet.check(s)?;
        self.t += 1;
        Ok(())
    }
    fn clone_box(&self) -> BoxPredictor<'a> {
        Box::new(self.clone())
    }
}

impl ProcessMeasure for Independent {
    fn alphabet(&self) -> Alphabet {
        self.alphabet
    }
    fn label(&self) -> String {
        self.label.clone()
    }
    fn cond_dist(&self, prefix: &[Symbol]) -> Result<Vec<f64>> {
        self.law_at(prefix.len() + 1)
    }
    fn predictor(&self) -> BoxPredictor<'_> {
        Box::new(IndependentCursor { m: self, t: 0 })
    }
}

// ---------------------------------------------------------------------------
// Horizon truncation with a constant continuation
// ---------------------------------------------------------------------------

/// Follows `inner` for the first `horizon` symbols, then emits `fill` forever.
#[derive(Debug, Clone)]
pub struct Truncated {
    inner: MeasureRef,
    horizon: usize,
    fill: Symbol,
}

impl Truncated {
    pub fn new(inner: MeasureRef, horizon: usize, fill: Symbol) -> Result<Self> {
        inner.alphabet().check(fill)?;
        Ok(Self { inner, horizon, fill })
    }
}

struct TruncatedCursor<'a> {
    m: &'a Truncated,
    inner: BoxPredictor<'a>,
    t: usize,
    alive: bool,
}

impl<'a> Predictor<'a> for TruncatedCursor<'a> {
    fn alphabet(&self) -> Alphabet {
        self.m.inner.alphabet()
    }
    fn position(&self) -> usize {
        self.t
    }
    fn predict_into(&self, out: &mut [f64]) -> Result<()> {
        if !self.alive {
            return Err(Error::UndefinedConditional { label: self.m.label(), position: self.t });
        }
        if self.t < self.m.horizon {
            self.inner.predict_into(out)
        } else {
            one_hot(out, self.m.fill);
            Ok(())
        }
    }
    fn prob(&self, s: Symbol) -> Result<f64> {
        if self.alive && self.t < self.m.horizon {
            self.inner.prob(s)
        } else {
            Ok(self.predict()?[s])
        }
    }
    fn observe(&mut self, s: Symbol) -> Result<()> {
        if self.t < self.m.horizon {
            self.inner.observe(s)?;
        } else if s != self.m.fill {
            self.alive = false;
        }
        self.t += 1;
        Ok(())
    }
    fn clone_box(&self) -> BoxPredictor<'a> {
        Box::new(TruncatedCursor { m: self.m, inner: self.inner.clone_box(), t: self.t, alive: self.alive })
    }
}

impl ProcessMeasure for Truncated {
    fn alphabet(&self) -> Alphabet {
        self.inner.alphabet()
    }
    fn label(&self) -> String {
        format!("truncated({}, {})", self.inner.label(), self.horizon)
    }
    fn cond_dist(&self, prefix: &[Symbol]) -> Result<Vec<f64>> {
        super::cond_via_predictor(self, prefix)
    }
    fn predictor(&self) -> BoxPredictor<'_> {
        Box::new(TruncatedCursor { m: self, inner: self.inner.predictor(), t: 0, alive: true })
    }
    fn joint_logprob(&self, x: &[Symbol]) -> LogProb {
        let h = self.horizon.min(x.len());
        if x[h..].iter().any(|&s| s != self.fill) {
            return LogProb::ZERO;
        }
        self.inner.joint_logprob(&x[..h])
    }
}

// ---------------------------------------------------------------------------
// A law on X^k extended by a constant continuation
// ---------------------------------------------------------------------------

/// A distribution on `X^k` used for the first `k` symbols, then `fill` forever.
#[derive(Debug, Clone)]
pub struct FiniteHorizonLaw {
    alphabet: Alphabet,
    label: String,
    fill: Symbol,
    /// `marginals[t][idx]` is the base-2 log mass of prefix `idx` of length `t`.
    marginals: Vec<Vec<f64>>,
}

impl FiniteHorizonLaw {
    /// `log_table` is indexed lexicographically over `X^k`.
    pub fn from_log_table(alphabet: Alphabet, log_table: Vec<f64>, fill: Symbol, label: impl Into<String>) -> Result<Self> {
        alphabet.check(fill)?;
        let s = alphabet.size();
        let mut k = 0;
        let mut len = 1usize;
        while len < log_table.len() {
            len *= s;
            k += 1;
        }
        if len != log_table.len() {
            return Err(Error::InvalidParameter(format!(
                "table of length {} is not a power of {s}",
                log_table.len()
            )));
        }
        let total = super::log_sum_exp2(&log_table);
        if total.abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!("table mass 2^{total} is not 1")));
        }
        let mut marginals = vec![Vec::new(); k + 1];
        marginals[k] = log_table;
        for t in (0..k).rev() {
            let next = &marginals[t + 1];
            let level: Vec<f64> = next.chunks(s).map(super::log_sum_exp2).collect();
            marginals[t] = level;
        }
        Ok(Self { alphabet, label: label.into(), fill, marginals })
    }

    #[must_use]
    pub fn horizon(&self) -> usize {
        self.marginals.len() - 1
    }
}

#[derive(Clone)]
struct HorizonCursor<'a> {
    m: &'a FiniteHorizonLaw,
    t: usize,
    idx: usize,
    alive: bool,
}

impl<'a> Predictor<'a> for HorizonCursor<'a> {
    fn alphabet(&self) -> Alphabet {
        self.m.alphabet
    }
    fn position(&self) -> usize {
        self.t
    }
    fn predict_into(&self, out: &mut [f64]) -> Result<()> {
        let k = self.m.horizon();
        let undefined = || Error::UndefinedConditional { label: self.m.label.clone(), position: self.t };
        if !self.alive {
            return Err(undefined());
        }
        if self.t >= k {
            one_hot(out, self.m.fill);
            return Ok(());
        }
        let here = self.m.marginals[self.t][self.idx];
        if here == f64::NEG_INFINITY {
            return Err(undefined());
        }
        let s = self.m.alphabet.size();
        let next = &self.m.marginals[self.t + 1][self.idx * s..(self.idx + 1) * s];
        for (o, &v) in out.iter_mut().zip(next) {
            *o = (v - here).exp2();
        }
        let z: f64 = out.iter().sum();
        out.iter_mut().for_each(|v| *v /= z);
        Ok(())
    }
    fn observe(&mut self, s: Symbol) -> Result<()> {
        self.m.alphabet.check(s)?;
        let k = self.m.horizon();
        if self.t < k {
            self.idx = self.idx * self.m.alphabet.size() + s;
            if self.m.marginals[self.t + 1][self.idx] == f64::NEG_INFINITY {
                self.alive = false;
            }
        } else if s != self.m.fill {
            self.alive = false;
        }
        self.t += 1;
        Ok(())
    }
    fn clone_box(&self) -> BoxPredictor<'a> {
        Box::new(self.clone())
    }
}

impl ProcessMeasure for FiniteHorizonLaw {
    fn alphabet(&self) -> Alphabet {
        self.alphabet
    }
    fn label(&self) -> String {
        self.label.clone()
    }
    fn cond_dist(&self, prefix: &[Symbol]) -> Result<Vec<f64>> {
        super::cond_via_predictor(self, prefix)
    }
    fn predictor(&self) -> BoxPredictor<'_> {
        Box::new(HorizonCursor { m: self, t: 0, idx: 0, alive: true })
    }
    fn joint_logprob(&self, x: &[Symbol]) -> LogProb {
        let k = self.horizon();
        let h = k.min(x.len());
        if x[h..].iter().any(|&s| s != self.fill) {
            return LogProb::ZERO;
        }
        let idx = x[..h].iter().fold(0usize, |acc, &s| acc * self.alphabet.size() + s);
        LogProb::new(self.marginals[h][idx])
    }
}
