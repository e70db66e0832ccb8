//! Functions of countable "climb or reset" Markov chains.
//!
//! From state `j` the chain moves to `j + 1` with probability `p_j` and
//! returns to the first state otherwise. The observed symbol is `g(state)`.
//! Two variants are provided:
//!
//! ```text
//! Stno : states 1, 2, ...   p_j = j^2 / (j+1)^2   pi_j = pi_1 / j^2,  pi_1 = 6 / pi^2
//! Stno1: states 0, 1, ...   p_j = 2/3             pi_j = (1/3) (2/3)^j
//! ```
//!
//! The stationary start is truncated to states `<= J_max`; the measure
//! exposed here is the chain conditioned on such a start, which is a proper
//! process. Its probabilities relate to the untruncated ones through
//! `mu(x) >= (1 - eps_tail) mu_J(x)`, see [`ChainMeasure::joint_lower_bound`].

use std::sync::Arc;

use super::{Alphabet, BoxPredictor, Predictor, ProcessMeasure, Symbol};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ChainVariant {
    Stno,
    Stno1,
}

#[derive(Debug, Clone)]
pub struct ChainSpec {
    pub variant: ChainVariant,
    pub j_max: usize,
    /// Stationary mass of states `first..=j_max`, not renormalized.
    pub pi: Vec<f64>,
    /// Mass of start states above `j_max`.
    pub eps_tail: f64,
    /// Width of the certified interval around the first-state mass.
    pub pi_first_error: f64,
}

/// Terms summed explicitly before the tail bound closes the return-time series.
const SERIES_TERMS: usize = 200_000;

impl ChainSpec {
    pub fn new(variant: ChainVariant, j_max: usize) -> Result<Self> {
        let first = first_state(variant);
        if j_max < first {
            return Err(Error::InvalidParameter(format!("J_max {j_max} below first state {first}")));
        }
        let (pi_first, pi_first_error) = match variant {
            ChainVariant::Stno => {
                let (sum, width) = mean_return_time_stno(SERIES_TERMS);
                (1.0 / sum, width / (sum * sum))
            }
            ChainVariant::Stno1 => (1.0 / 3.0, 0.0),
        };
        let mut pi = Vec::with_capacity(j_max - first + 1);
        let mut mass = pi_first;
        for j in first..=j_max {
            pi.push(mass);
            mass *= up_prob(variant, j);
        }
        let eps_tail = match variant {
            ChainVariant::Stno => {
                // pi_1 * sum_{j > J} 1/j^2 with the asymptotic expansion of the trigamma tail.
                let j = j_max as f64;
                if j_max >= 10 {
                    pi_first * (1.0 / j - 1.0 / (2.0 * j * j) + 1.0 / (6.0 * j * j * j))
                } else {
                    (1.0 - pi.iter().sum::<f64>()).max(0.0)
                }
            }
            ChainVariant::Stno1 => (2.0f64 / 3.0).powi(j_max as i32 + 1),
        };
        Ok(Self { variant, j_max, pi, eps_tail, pi_first_error })
    }

    #[must_use]
    pub fn first_state(&self) -> usize {
        first_state(self.variant)
    }

    #[must_use]
    pub fn up_prob(&self, j: usize) -> f64 {
        up_prob(self.variant, j)
    }

    /// Stationary mass of the first (reset) state.
    #[must_use]
    pub fn pi_first(&self) -> f64 {
        self.pi[0]
    }

    /// Probability that the chain started in the first state returns to it
    /// for the first time after exactly `n` steps.
    #[must_use]
    pub fn first_return(&self, n: usize) -> f64 {
        assert!(n >= 1);
        let s0 = self.first_state();
        let mut p = 1.0;
        for i in 0..n - 1 {
            p *= self.up_prob(s0 + i);
        }
        p * (1.0 - self.up_prob(s0 + n - 1))
    }

    /// Max deviation of `pi` from its image under the truncated operator,
    /// in which the top state always resets.
    #[must_use]
    pub fn fixed_point_residual(&self) -> f64 {
        let s0 = self.first_state();
        let len = self.pi.len();
        let mut next = vec![0.0; len];
        for (i, &m) in self.pi.iter().enumerate() {
            if i + 1 < len {
                let p = self.up_prob(s0 + i);
                next[i + 1] += m * p;
                next[0] += m * (1.0 - p);
            } else {
                next[0] += m;
            }
        }
        next.iter().zip(&self.pi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

fn first_state(v: ChainVariant) -> usize {
    match v {
        ChainVariant::Stno => 1,
        ChainVariant::Stno1 => 0,
    }
}

fn up_prob(v: ChainVariant, j: usize) -> f64 {
    match v {
        ChainVariant::Stno => {
            let r = j as f64 / (j as f64 + 1.0);
            r * r
        }
        ChainVariant::Stno1 => 2.0 / 3.0,
    }
}

/// `sum_n n f_n` for the Stno chain, with `n f_n = 1/n - 1/(n+1) + 1/(n+1)^2`.
/// Returns the midpoint estimate and the width of the tail sandwich.
fn mean_return_time_stno(terms: usize) -> (f64, f64) {
    let mut sum = 0.0;
    for n in (1..=terms).rev() {
        let n = n as f64;
        sum += (2.0 * n + 1.0) / (n * (n + 1.0) * (n + 1.0));
    }
    let big = terms as f64;
    let lo = 1.0 / (big + 1.0) + 1.0 / (big + 2.0);
    let hi = 2.0 / (big + 1.0);
    (sum + 0.5 * (lo + hi), hi - lo)
}

/// `g(state)` applied to the chain started from the truncated stationary law.
#[derive(Debug, Clone)]
pub struct ChainMeasure {
    spec: Arc<ChainSpec>,
    alphabet: Alphabet,
    /// `output[j - first_state]`.
    output: Arc<Vec<Symbol>>,
    label: String,
}

impl ChainMeasure {
    pub fn new(spec: ChainSpec, alphabet: Alphabet, output: Vec<Symbol>, label: impl Into<String>) -> Result<Self> {
        for &s in &output {
            alphabet.check(s)?;
        }
        if output.len() < spec.pi.len() {
            return Err(Error::ChainHorizonExceeded {
                required: spec.j_max,
                available: spec.first_state() + output.len().saturating_sub(1),
            });
        }
        Ok(Self { spec: Arc::new(spec), alphabet, output: Arc::new(output), label: label.into() })
    }

    /// The Stno measure built from `x`: state `j` emits `x_j`.
    pub fn stno(x: &[Symbol], j_max: usize) -> Result<Self> {
        let spec = ChainSpec::new(ChainVariant::Stno, j_max)?;
        Self::new(spec, Alphabet::BINARY, x.to_vec(), "stno-chain")
    }

    /// The Stno1 measure built from binary `t`: state 0 emits symbol 2, state `k` emits `t_k`.
    pub fn stno1(t: &[Symbol], j_max: usize) -> Result<Self> {
        let spec = ChainSpec::new(ChainVariant::Stno1, j_max)?;
        let mut out = Vec::with_capacity(t.len() + 1);
        out.push(2);
        out.extend_from_slice(t);
        Self::new(spec, Alphabet::TERNARY, out, "stno1-chain")
    }

    #[must_use]
    pub fn spec(&self) -> &ChainSpec {
        &self.spec
    }

    /// Longest prefix this measure can evaluate.
    #[must_use]
    pub fn max_horizon(&self) -> usize {
        self.output.len() - self.spec.pi.len()
    }

    /// `log2 mu_J(x)`, or an error when `x` outruns the output map.
    pub fn checked_joint_logprob(&self, x: &[Symbol]) -> Result<super::LogProb> {
        if x.len() > self.max_horizon() {
            return Err(Error::ChainHorizonExceeded {
                required: self.spec.j_max + x.len(),
                available: self.spec.first_state() + self.output.len() - 1,
            });
        }
        Ok(self.joint_logprob(x))
    }

    /// Certified lower bound on the untruncated `log2 mu(x)`.
    #[must_use]
    pub fn joint_lower_bound(&self, x: &[Symbol]) -> f64 {
        self.joint_logprob(x).value() + (1.0 - self.spec.eps_tail).log2()
    }

    /// Sums over every state path explicitly; exponential in `x.len()`.
    #[must_use]
    pub fn path_enumeration_prob(&self, x: &[Symbol]) -> f64 {
        let s0 = self.spec.first_state();
        let norm: f64 = self.spec.pi.iter().sum();
        let mut total = 0.0;
        for (i, &m) in self.spec.pi.iter().enumerate() {
            total += m / norm * self.paths_from(s0 + i, x);
        }
        total
    }

    fn paths_from(&self, state: usize, x: &[Symbol]) -> f64 {
        let s0 = self.spec.first_state();
        match x.split_first() {
            None => 1.0,
            Some((&a, rest)) => {
                if self.output[state - s0] != a {
                    return 0.0;
                }
                if rest.is_empty() {
                    return 1.0;
                }
                let p = self.spec.up_prob(state);
                p * self.paths_from(state + 1, rest) + (1.0 - p) * self.paths_from(s0, rest)
            }
        }
    }
}

#[derive(Clone)]
struct ChainCursor<'a> {
    m: &'a ChainMeasure,
    /// Filtered law of the current state, indexed from the first state.
    alpha: Vec<f64>,
    t: usize,
    alive: bool,
}

impl<'a> Predictor<'a> for ChainCursor<'a> {
    fn alphabet(&self) -> Alphabet {
        self.m.alphabet
    }
    fn position(&self) -> usize {
        self.t
    }
    fn predict_into(&self, out: &mut [f64]) -> Result<()> {
        if !self.alive {
            return Err(Error::UndefinedConditional { label: self.m.label.clone(), position: self.t });
        }
        out.iter_mut().for_each(|v| *v = 0.0);
        for (i, &w) in self.alpha.iter().enumerate() {
            out[self.m.output[i]] += w;
        }
        let z: f64 = out.iter().sum();
        out.iter_mut().for_each(|v| *v /= z);
        Ok(())
    }
    fn observe(&mut self, a: Symbol) -> Result<()> {
        self.m.alphabet.check(a)?;
        self.t += 1;
        if !self.alive {
            return Ok(());
        }
        for (i, w) in self.alpha.iter_mut().enumerate() {
            if self.m.output[i] != a {
                *w = 0.0;
            }
        }
        let z: f64 = self.alpha.iter().sum();
        if z == 0.0 {
            self.alive = false;
            return Ok(());
        }
        let s0 = self.m.spec.first_state();
        let len = self.alpha.len();
        if len + 1 > self.m.output.len() {
            return Err(Error::ChainHorizonExceeded {
                required: s0 + len,
                available: s0 + self.m.output.len() - 1,
            });
        }
        let mut next = vec![0.0; len + 1];
        for (i, &w) in self.alpha.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let w = w / z;
            let p = self.m.spec.up_prob(s0 + i);
            next[i + 1] += w * p;
            next[0] += w * (1.0 - p);
        }
        self.alpha = next;
        Ok(())
    }
    fn clone_box(&self) -> BoxPredictor<'a> {
        Box::new(self.clone())
    }
}

impl ProcessMeasure for ChainMeasure {
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
        let norm: f64 = self.spec.pi.iter().sum();
        let alpha = self.spec.pi.iter().map(|&m| m / norm).collect();
        Box::new(ChainCursor { m: self, alpha, t: 0, alive: true })
    }
}
