//! Weight schemes, Bayesian mixtures and standard model classes.
//!
//! A mixture `nu = sum_k w_k mu_k` predicts with the posterior-weighted
//! average of its components:
//!
//! ```text
//! nu(a | x) = sum_k w_k mu_k(x) mu_k(a | x) / sum_k w_k mu_k(x)
//! ```
//!
//! so `-log nu(x) <= -log mu_k(x) - log w_k` for every component and every
//! sequence. Countable weight schemes are cut to a finite support; the cut
//! mass is reported and the kept weights are used as given.

use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{
    enumerate_logprobs, log_sum_exp2, Alphabet, BoxPredictor, Iid, LogProb, Markov, MeasureRef, Predictor,
    ProcessMeasure, Symbol, DEFAULT_CELL_CAP,
};

/// Default cap on the number of mixture components or class members.
pub const DEFAULT_CLASS_CAP: u128 = 10_000;

// ---------------------------------------------------------------------------
// Weight schemes
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightScheme {
    /// `w_1 = 1/2`, `w_k = w / (k log^2 k)` for `k >= 2`.
    MainTheorem,
    /// `w_k = (6 / pi^2) / k^2`.
    Quadratic,
    /// `w_k = 1 / (k (k + 1))`.
    Telescoping,
    /// `w_k = 2^-k`.
    Geometric,
    Custom(Vec<f64>),
}

/// Normalizer `w` of the main-theorem scheme: `sum_{k>=2} w / (k log2^2 k) = 1/2`.
#[must_use]
pub fn main_theorem_normalizer() -> f64 {
    static W: OnceLock<f64> = OnceLock::new();
    *W.get_or_init(|| {
        const K: usize = 1 << 22;
        let mut s = 0.0;
        for k in (2..=K).rev() {
            let k = k as f64;
            let l = k.log2();
            s += 1.0 / (k * l * l);
        }
        // Midpoint rule for the remainder: int_{K+1/2}^inf dx / (x log2^2 x) = ln 2 / log2(K + 1/2).
        s += std::f64::consts::LN_2 / (K as f64 + 0.5).log2();
        1.0 / (2.0 * s)
    })
}

const SIX_OVER_PI2: f64 = 6.0 / (std::f64::consts::PI * std::f64::consts::PI);

impl WeightScheme {
    /// Weight of index `k >= 1`.
    #[must_use]
    pub fn weight(&self, k: usize) -> f64 {
        assert!(k >= 1, "weights are indexed from 1");
        let kf = k as f64;
        match self {
            WeightScheme::MainTheorem => {
                if k == 1 {
                    0.5
                } else {
                    let l = kf.log2();
                    main_theorem_normalizer() / (kf * l * l)
                }
            }
            WeightScheme::Quadratic => SIX_OVER_PI2 / (kf * kf),
            WeightScheme::Telescoping => 1.0 / (kf * (kf + 1.0)),
            WeightScheme::Geometric => (-kf).exp2(),
            WeightScheme::Custom(v) => v.get(k - 1).copied().unwrap_or(0.0),
        }
    }

    #[must_use]
    pub fn log_weight(&self, k: usize) -> f64 {
        match self {
            WeightScheme::Geometric => -(k as f64),
            _ => self.weight(k).log2(),
        }
    }

    /// First `count` weights.
    #[must_use]
    pub fn weights(&self, count: usize) -> Vec<f64> {
        (1..=count).map(|k| self.weight(k)).collect()
    }

    /// Mass beyond index `count`.
    #[must_use]
    pub fn tail_mass(&self, count: usize) -> f64 {
        let k = count as f64;
        match self {
            WeightScheme::MainTheorem => {
                if count == 0 {
                    return 1.0;
                }
                // Midpoint-rule estimate of the remainder of sum w/(k log2^2 k).
                main_theorem_normalizer() * std::f64::consts::LN_2 / (k + 0.5).log2()
            }
            WeightScheme::Quadratic => {
                if count == 0 {
                    return 1.0;
                }
                // sum_{j>K} 1/j^2 = 1/K - 1/(2K^2) + 1/(6K^3) - 1/(30K^5) + ...
                SIX_OVER_PI2 * (1.0 / k - 1.0 / (2.0 * k * k) + 1.0 / (6.0 * k * k * k) - 1.0 / (30.0 * k.powi(5)))
            }
            WeightScheme::Telescoping => 1.0 / (k + 1.0),
            WeightScheme::Geometric => (-k).exp2(),
            WeightScheme::Custom(v) => v.iter().skip(count).sum(),
        }
    }

    /// `sum_{j >= k} w_j`, exact up to the tail formulas.
    #[must_use]
    pub fn mass_from(&self, k: usize) -> f64 {
        self.tail_mass(k - 1)
    }

    #[must_use]
    pub fn name(&self) -> &'static str {
        match self {
            WeightScheme::MainTheorem => "main-theorem",
            WeightScheme::Quadratic => "quadratic",
            WeightScheme::Telescoping => "telescoping",
            WeightScheme::Geometric => "geometric",
            WeightScheme::Custom(_) => "custom",
        }
    }
}

// ---------------------------------------------------------------------------
// Mixture
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct Mixture {
    alphabet: Alphabet,
    label: String,
    components: Vec<MeasureRef>,
    weights: Vec<f64>,
    log_weights: Vec<f64>,
    /// `log2 sum_k w_k` over the kept components.
    log_total: f64,
    tail_mass: f64,
}

impl Mixture {
    /// Weights must be positive with sum at most 1.
    pub fn new(components: Vec<MeasureRef>, weights: Vec<f64>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::EmptyClass);
        }
        if components.len() != weights.len() {
            return Err(Error::InvalidParameter(format!(
                "{} components but {} weights",
                components.len(),
                weights.len()
            )));
        }
        let alphabet = components[0].alphabet();
        if let Some(bad) = components.iter().find(|c| c.alphabet() != alphabet) {
            return Err(Error::AlphabetMismatch(format!("{} vs {}", bad.label(), components[0].label())));
        }
        if weights.iter().any(|&w| !(w.is_finite() && w > 0.0)) {
            return Err(Error::InvalidParameter("mixture weights must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        if total > 1.0 + 1e-9 {
            return Err(Error::InvalidParameter(format!("mixture weights sum to {total} > 1")));
        }
        let log_weights: Vec<f64> = weights.iter().map(|w| w.log2()).collect();
        let log_total = log_sum_exp2(&log_weights).min(0.0);
        let tail_mass = (1.0 - total).max(0.0);
        Ok(Self {
            alphabet,
            label: format!("mixture[{}]", components.len()),
            components,
            weights,
            log_weights,
            log_total,
            tail_mass,
        })
    }

    /// Components weighted by `scheme` at indices `1..=len`.
    pub fn from_scheme(components: Vec<MeasureRef>, scheme: &WeightScheme) -> Result<Self> {
        let n = components.len();
        let mut m = Self::new(components, scheme.weights(n))?;
        m.tail_mass = scheme.tail_mass(n);
        m.label = format!("mixture[{}, {}]", n, scheme.name());
        Ok(m)
    }

    /// Equal weights.
    pub fn uniform(components: Vec<MeasureRef>) -> Result<Self> {
        let n = components.len();
        Self::new(components, vec![1.0 / n as f64; n])
    }

    #[must_use]
    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    #[must_use]
    pub fn components(&self) -> &[MeasureRef] {
        &self.components
    }

    #[must_use]
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[must_use]
    pub fn len(&self) -> usize {
        self.components.len()
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Prior mass not carried by any kept component.
    #[must_use]
    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    #[must_use]
    pub fn mixture_predictor(&self) -> MixturePredictor<'_> {
        let slots = self
            .components
            .iter()
            .enumerate()
            .map(|(i, c)| Slot { index: i, lw: self.log_weights[i], cursor: c.predictor() })
            .collect();
        MixturePredictor { mix: self, slots, t: 0 }
    }

    /// Posterior after `prefix`, recomputed from joint probabilities.
    pub fn posterior_exact(&self, prefix: &[Symbol]) -> Result<Vec<f64>> {
        let logs: Vec<f64> = self
            .components
            .iter()
            .zip(&self.log_weights)
            .map(|(c, lw)| lw + c.joint_logprob(prefix).value())
            .collect();
        let z = log_sum_exp2(&logs);
        if z == f64::NEG_INFINITY {
            return Err(Error::MixtureAnnihilated { position: prefix.len() });
        }
        Ok(logs.iter().map(|l| (l - z).exp2()).collect())
    }

    /// `-log2 nu(x) + log2 mu_k(x)`, which never exceeds `-log2 w_k`.
    pub fn regret_vs_component(&self, k: usize, x: &[Symbol]) -> f64 {
        let r = -self.joint_logprob(x).value() + self.components[k].joint_logprob(x).value();
        debug_assert!(
            r.is_nan() || r <= -self.log_weights[k] + 1e-9,
            "mixture bound violated: {r} > {}",
            -self.log_weights[k]
        );
        r
    }

    /// Expands nested mixtures into one level with product weights.
    #[must_use]
    pub fn flatten(&self) -> Mixture {
        let mut comps = Vec::new();
        let mut weights = Vec::new();
        self.flatten_into(1.0, &mut comps, &mut weights);
        let mut m = Mixture::new(comps, weights).expect("flattening preserves validity");
        m.label = format!("{} (flattened)", self.label);
        m
    }

    fn flatten_into(&self, scale: f64, comps: &mut Vec<MeasureRef>, weights: &mut Vec<f64>) {
        let total = self.log_total.exp2();
        for (c, &w) in self.components.iter().zip(&self.weights) {
            let w = scale * w / total;
            match c.as_mixture() {
                Some(inner) => inner.flatten_into(w, comps, weights),
                None => {
                    comps.push(c.clone());
                    weights.push(w);
                }
            }
        }
    }
}

impl ProcessMeasure for Mixture {
    fn alphabet(&self) -> Alphabet {
        self.alphabet
    }
    fn label(&self) -> String {
        self.label.clone()
    }
    fn cond_dist(&self, prefix: &[Symbol]) -> Result<Vec<f64>> {
        let mut p = self.mixture_predictor();
        for &s in prefix {
            p.observe(s)?;
        }
        p.predict()
    }
    fn predictor(&self) -> BoxPredictor<'_> {
        Box::new(self.mixture_predictor())
    }
    fn joint_logprob(&self, x: &[Symbol]) -> LogProb {
        let logs: Vec<f64> = self
            .components
            .iter()
            .zip(&self.log_weights)
            .map(|(c, lw)| lw + c.joint_logprob(x).value())
            .collect();
        LogProb::new(log_sum_exp2(&logs) - self.log_total)
    }
    fn count_logprob(&self, counts: &[u64]) -> Option<f64> {
        let mut logs = Vec::with_capacity(self.components.len());
        for (c, lw) in self.components.iter().zip(&self.log_weights) {
            logs.push(lw + c.count_logprob(counts)?);
        }
        Some(log_sum_exp2(&logs) - self.log_total)
    }
    fn as_mixture(&self) -> Option<&Mixture> {
        Some(self)
    }
}

struct Slot<'a> {
    index: usize,
    /// Unnormalized posterior log-weight.
    lw: f64,
    cursor: BoxPredictor<'a>,
}

impl<'a> Clone for Slot<'a> {
    fn clone(&self) -> Self {
        Self { index: self.index, lw: self.lw, cursor: self.cursor.clone_box() }
    }
}

/// Sequential mixture with an incrementally updated posterior.
///
/// Components whose probability on the prefix is zero are dropped.
#[derive(Clone)]
pub struct MixturePredictor<'a> {
    mix: &'a Mixture,
    slots: Vec<Slot<'a>>,
    t: usize,
}

impl<'a> MixturePredictor<'a> {
    fn normalized(&self) -> Vec<f64> {
        let m = self.slots.iter().map(|s| s.lw).fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = self.slots.iter().map(|s| (s.lw - m).exp2()).collect();
        let z: f64 = w.iter().sum();
        w.into_iter().map(|v| v / z).collect()
    }

    /// Posterior over all components; dropped components get 0.
    #[must_use]
    pub fn posterior(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.mix.len()];
        for (slot, w) in self.slots.iter().zip(self.normalized()) {
            out[slot.index] = w;
        }
        out
    }

    /// Posterior log2-weights; dropped components get `-inf`.
    #[must_use]
    pub fn log_posterior(&self) -> Vec<f64> {
        let mut out = vec![f64::NEG_INFINITY; self.mix.len()];
        let lws: Vec<f64> = self.slots.iter().map(|s| s.lw).collect();
        let z = log_sum_exp2(&lws);
        for s in &self.slots {
            out[s.index] = s.lw - z;
        }
        out
    }

    /// Index of the largest posterior weight; ties go to the lowest index.
    #[must_use]
    pub fn argmax(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for s in &self.slots {
            match best {
                Some((_, b)) if s.lw <= b => {}
                _ => best = Some((s.index, s.lw)),
            }
        }
        best.map(|(i, _)| i)
    }

    /// Number of components still carrying mass.
    #[must_use]
    pub fn alive(&self) -> usize {
        self.slots.len()
    }
}

impl<'a> Predictor<'a> for MixturePredictor<'a> {
    fn alphabet(&self) -> Alphabet {
        self.mix.alphabet
    }

    fn position(&self) -> usize {
        self.t
    }

    fn predict_into(&self, out: &mut [f64]) -> Result<()> {
        if self.slots.is_empty() {
            return Err(Error::MixtureAnnihilated { position: self.t });
        }
        out.iter_mut().for_each(|v| *v = 0.0);
        let mut tmp = vec![0.0; out.len()];
        for (slot, w) in self.slots.iter().zip(self.normalized()) {
            slot.cursor.predict_into(&mut tmp)?;
            for (o, &p) in out.iter_mut().zip(&tmp) {
                *o += w * p;
            }
        }
        Ok(())
    }

    fn prob(&self, symbol: Symbol) -> Result<f64> {
        if self.slots.is_empty() {
            return Err(Error::MixtureAnnihilated { position: self.t });
        }
        let mut acc = 0.0;
        for (slot, w) in self.slots.iter().zip(self.normalized()) {
            acc += w * slot.cursor.prob(symbol)?;
        }
        Ok(acc)
    }

    fn observe(&mut self, symbol: Symbol) -> Result<()> {
        self.mix.alphabet.check(symbol)?;
        let mut kept = Vec::with_capacity(self.slots.len());
        for mut slot in self.slots.drain(..) {
            let q = slot.cursor.prob(symbol)?;
            if q > 0.0 {
                slot.lw += q.log2();
                slot.cursor.observe(symbol)?;
                kept.push(slot);
            }
        }
        let m = kept.iter().map(|s| s.lw).fold(f64::NEG_INFINITY, f64::max);
        if m.is_finite() {
            for s in &mut kept {
                s.lw -= m;
            }
        }
        self.slots = kept;
        self.t += 1;
        Ok(())
    }

    fn clone_box(&self) -> BoxPredictor<'a> {
        Box::new(self.clone())
    }
}

// ---------------------------------------------------------------------------
// Model classes
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ClassMeta {
    BernoulliGrid { r: usize },
    MarkovGrid { max_order: usize, r: usize, sizes: Vec<usize> },
    Explicit,
}

/// A finite indexed family of measures over one alphabet.
#[derive(Debug, Clone)]
pub struct ModelClass {
    pub label: String,
    pub meta: ClassMeta,
    alphabet: Alphabet,
    measures: Vec<MeasureRef>,
    weights: Vec<f64>,
}

impl ModelClass {
    /// Defaults to quadratic weights in index order when `weights` is `None`.
    pub fn explicit(label: impl Into<String>, measures: Vec<MeasureRef>, weights: Option<Vec<f64>>) -> Result<Self> {
        Self::with_meta(label, ClassMeta::Explicit, measures, weights)
    }

    fn with_meta(
        label: impl Into<String>,
        meta: ClassMeta,
        measures: Vec<MeasureRef>,
        weights: Option<Vec<f64>>,
    ) -> Result<Self> {
        if measures.is_empty() {
            return Err(Error::EmptyClass);
        }
        let alphabet = measures[0].alphabet();
        if let Some(bad) = measures.iter().find(|m| m.alphabet() != alphabet) {
            return Err(Error::AlphabetMismatch(bad.label()));
        }
        let weights = weights.unwrap_or_else(|| WeightScheme::Quadratic.weights(measures.len()));
        if weights.len() != measures.len() {
            return Err(Error::InvalidParameter("class weights do not match members".into()));
        }
        Ok(Self { label: label.into(), meta, alphabet, measures, weights })
    }

    #[must_use]
    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    #[must_use]
    pub fn measures(&self) -> &[MeasureRef] {
        &self.measures
    }

    #[must_use]
    pub fn get(&self, i: usize) -> &MeasureRef {
        &self.measures[i]
    }

    #[must_use]
    pub fn len(&self) -> usize {
        self.measures.len()
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.measures.is_empty()
    }

    #[must_use]
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Bayesian mixture with the intended weights.
    pub fn mixture(&self) -> Result<Mixture> {
        Ok(Mixture::new(self.measures.clone(), self.weights.clone())?.with_label(format!("bayes({})", self.label)))
    }

    /// Members at `indices`, keeping their weights.
    pub fn subset(&self, indices: &[usize]) -> Result<ModelClass> {
        let measures = indices.iter().map(|&i| self.measures[i].clone()).collect();
        let weights = indices.iter().map(|&i| self.weights[i]).collect();
        Self::explicit(format!("{}-subset", self.label), measures, Some(weights))
    }

    /// Appends members with the given weights.
    pub fn extended(&self, extra: Vec<MeasureRef>, extra_weights: Vec<f64>) -> Result<ModelClass> {
        let mut measures = self.measures.clone();
        measures.extend(extra);
        let mut weights = self.weights.clone();
        weights.extend(extra_weights);
        let total: f64 = weights.iter().sum();
        let weights = if total > 1.0 { weights.iter().map(|w| w / total).collect() } else { weights };
        Self::explicit(format!("{}+", self.label), measures, Some(weights))
    }
}

/// Bernoulli(i/r) for i = 0..r, quadratic weights in index order.
pub fn build_bernoulli_grid(r: usize) -> Result<ModelClass> {
    if r == 0 {
        return Err(Error::InvalidParameter("grid resolution must be at least 1".into()));
    }
    let measures: Vec<MeasureRef> = (0..=r)
        .map(|i| Iid::bernoulli(i as f64 / r as f64).map(|m| Arc::new(m) as MeasureRef))
        .collect::<Result<_>>()?;
    ModelClass::with_meta(format!("bernoulli-grid(r={r})"), ClassMeta::BernoulliGrid { r }, measures, None)
}

/// All distributions on the alphabet with probabilities in multiples of `1/r`.
fn grid_distributions(size: usize, r: usize) -> Vec<Vec<f64>> {
    fn rec(size: usize, left: usize, r: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        if cur.len() + 1 == size {
            cur.push(left);
            out.push(cur.iter().map(|&c| c as f64 / r as f64).collect());
            cur.pop();
            return;
        }
        for c in (0..=left).rev() {
            cur.push(c);
            rec(size, left - c, r, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(size, r, r, &mut Vec::new(), &mut out);
    out
}

/// Markov measures of order `0..=max_order` whose conditionals lie on the
/// `1/r` grid, each started from its stationary context law.
///
/// Order `k` gets total weight `w_{k+1}` (quadratic scheme), split evenly
/// over its tables.
pub fn build_markov_grid(alphabet: Alphabet, max_order: usize, r: usize, cap: u128) -> Result<ModelClass> {
    if r == 0 {
        return Err(Error::InvalidParameter("grid resolution must be at least 1".into()));
    }
    let dists = grid_distributions(alphabet.size(), r);
    let g = dists.len() as u128;
    let mut sizes = Vec::new();
    let mut total: u128 = 0;
    for k in 0..=max_order {
        let contexts = alphabet.cells(k);
        let mut size: u128 = 1;
        for _ in 0..contexts {
            size = size.saturating_mul(g);
        }
        total = total.saturating_add(size);
        sizes.push(size);
    }
    if total > cap {
        return Err(Error::ClassTooLarge { size: total, cap });
    }
    let mut measures: Vec<MeasureRef> = Vec::new();
    let mut weights = Vec::new();
    for (k, &size) in sizes.iter().enumerate() {
        let contexts = alphabet.cells(k) as usize;
        let w_order = WeightScheme::Quadratic.weight(k + 1) / size as f64;
        for code in 0..size as usize {
            let mut c = code;
            let mut table = Vec::with_capacity(contexts);
            let mut tag = Vec::with_capacity(contexts);
            for _ in 0..contexts {
                let d = c % dists.len();
                c /= dists.len();
                table.push(dists[d].clone());
                tag.push(format!("{}", dists[d][0]));
            }
            let m = Markov::stationary(alphabet, k, table)?.with_label(format!("markov{k}[{}]", tag.join(",")));
            measures.push(Arc::new(m));
            weights.push(w_order);
        }
    }
    ModelClass::with_meta(
        format!("markov-grid(K={max_order},r={r})"),
        ClassMeta::MarkovGrid { max_order, r, sizes: sizes.iter().map(|&s| s as usize).collect() },
        measures,
        Some(weights),
    )
}

// ---------------------------------------------------------------------------
// Entropy rates
// ---------------------------------------------------------------------------

fn block_entropy(m: &dyn ProcessMeasure, n: usize) -> Result<f64> {
    let logs = enumerate_logprobs(m, n, DEFAULT_CELL_CAP)?;
    Ok(logs.iter().filter(|l| l.is_finite()).map(|&l| -l.exp2() * l).sum())
}

/// `h_k = -E log2 mu(x_{k+1} | x_1..x_k)` under the stationary law.
pub fn entropy_rate(m: &Markov, k: usize) -> Result<f64> {
    let resid = m.stationarity_residual();
    if resid > 1e-9 {
        return Err(Error::NotStationary(format!("initial law moves by {resid} under one step")));
    }
    Ok(block_entropy(m, k + 1)? - block_entropy(m, k)?)
}

/// `h_0, ..., h_kmax`; the sequence is nonincreasing.
pub fn entropy_rates(m: &Markov, kmax: usize) -> Result<Vec<f64>> {
    let hs: Vec<f64> = (0..=kmax).map(|k| entropy_rate(m, k)).collect::<Result<_>>()?;
    for w in hs.windows(2) {
        debug_assert!(w[1] <= w[0] + 1e-9, "conditional entropies increased: {w:?}");
    }
    Ok(hs)
}
