//! Order-`k` Markov measures.

use std::sync::Arc;

use super::{validate_dist, Alphabet, BoxPredictor, Predictor, ProcessMeasure, Symbol};
use crate::error::{Error, Result};

/// Order-`k` Markov measure with an explicit law for the first `k` symbols.
///
/// Contexts are the last `k` symbols read as a base-`|X|` number, oldest
/// symbol most significant.
#[derive(Debug, Clone)]
pub struct Markov {
    alphabet: Alphabet,
    order: usize,
    /// `table[ctx * |X| + a] = P(a | ctx)`.
    table: Arc<Vec<f64>>,
    /// Joint law of the first `k` symbols, lexicographic.
    initial: Arc<Vec<f64>>,
    /// `initial_marginals[t]`: law of the first `t` symbols, `t <= k`.
    initial_marginals: Arc<Vec<Vec<f64>>>,
    label: String,
}

impl Markov {
    /// `table[ctx]` is the next-symbol law given context `ctx`.
    pub fn new(alphabet: Alphabet, order: usize, table: Vec<Vec<f64>>, initial: Vec<f64>) -> Result<Self> {
        let s = alphabet.size();
        let contexts = alphabet.cells(order);
        if contexts > (1u128 << 24) {
            return Err(Error::InvalidParameter(format!("{contexts} contexts is too many")));
        }
        let contexts = contexts as usize;
        if table.len() != contexts {
            return Err(Error::InvalidParameter(format!(
                "order-{order} table needs {contexts} rows, got {}",
                table.len()
            )));
        }
        for row in &table {
            validate_dist(row, s)?;
        }
        if initial.len() != contexts {
            return Err(Error::InvalidParameter(format!(
                "initial law needs {contexts} entries, got {}",
                initial.len()
            )));
        }
        validate_dist_loose(&initial)?;
        let mut marginals = vec![Vec::new(); order + 1];
        marginals[order] = initial.clone();
        for t in (0..order).rev() {
            marginals[t] = marginals[t + 1].chunks(s).map(|c| c.iter().sum()).collect();
        }
        let flat: Vec<f64> = table.into_iter().flatten().collect();
        let label = format!("markov(k={order})");
        Ok(Self {
            alphabet,
            order,
            table: Arc::new(flat),
            initial: Arc::new(initial),
            initial_marginals: Arc::new(marginals),
            label,
        })
    }

    /// Same table, started from a stationary law of the context chain.
    pub fn stationary(alphabet: Alphabet, order: usize, table: Vec<Vec<f64>>) -> Result<Self> {
        let flat: Vec<f64> = table.iter().flatten().copied().collect();
        let init = stationary_context_law(alphabet, order, &flat)?;
        Self::new(alphabet, order, table, init)
    }

    /// Binary order-1 chain with `P(0|0) = a`, `P(0|1) = b`, stationary start.
    pub fn binary_order1(a: f64, b: f64) -> Result<Self> {
        Self::stationary(Alphabet::BINARY, 1, vec![vec![a, 1.0 - a], vec![b, 1.0 - b]])
            .map(|m| m.with_label(format!("markov1({a},{b})")))
    }

    #[must_use]
    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    #[must_use]
    pub fn order(&self) -> usize {
        self.order
    }

    #[must_use]
    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    #[must_use]
    pub fn table(&self) -> &[f64] {
        &self.table
    }

    #[must_use]
    pub fn transition(&self, ctx: usize, a: Symbol) -> f64 {
        self.table[ctx * self.alphabet.size() + a]
    }

    /// Largest deviation between the initial law and its image under one step.
    #[must_use]
    pub fn stationarity_residual(&self) -> f64 {
        let next = step_context_law(self.alphabet, self.order, &self.table, &self.initial);
        next.iter().zip(self.initial.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    fn context_modulus(&self) -> usize {
        self.alphabet.cells(self.order) as usize
    }
}

fn validate_dist_loose(d: &[f64]) -> Result<()> {
    if d.iter().any(|&p| p < 0.0 || p.is_nan()) {
        return Err(Error::InvalidParameter("negative initial probability".into()));
    }
    let s: f64 = d.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!("initial law sums to {s}")));
    }
    Ok(())
}

fn step_context_law(alphabet: Alphabet, order: usize, table: &[f64], law: &[f64]) -> Vec<f64> {
    let s = alphabet.size();
    let modulus = law.len();
    let mut next = vec![0.0; modulus];
    for (ctx, &p) in law.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        for a in 0..s {
            let nctx = if order == 0 { 0 } else { (ctx * s + a) % modulus };
            next[nctx] += p * table[ctx * s + a];
        }
    }
    next
}

/// Stationary law of the context chain by power iteration on the lazy chain
/// `(I + P) / 2`, started from uniform and run until the iterates stop moving
/// (at most `1e5` steps). The result must be a fixed point within `1e-12`.
pub fn stationary_context_law(alphabet: Alphabet, order: usize, table: &[f64]) -> Result<Vec<f64>> {
    let modulus = alphabet.cells(order) as usize;
    let mut law = vec![1.0 / modulus as f64; modulus];
    let residual = |law: &[f64]| {
        step_context_law(alphabet, order, table, law).iter().zip(law).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    };
    for _ in 0..100_000 {
        let stepped = step_context_law(alphabet, order, table, &law);
        let lazy: Vec<f64> = law.iter().zip(&stepped).map(|(a, b)| 0.5 * (a + b)).collect();
        let z: f64 = lazy.iter().sum();
        let lazy: Vec<f64> = lazy.into_iter().map(|v| v / z).collect();
        let diff = lazy.iter().zip(&law).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        law = lazy;
        if diff <= 4.0 * f64::EPSILON && residual(&law) <= 1e-12 {
            return Ok(law);
        }
    }
    if residual(&law) <= 1e-12 {
        return Ok(law);
    }
    Err(Error::NotStationary("power iteration did not converge in 1e5 steps".into()))
}

#[derive(Clone)]
struct MarkovCursor<'a> {
    m: &'a Markov,
    t: usize,
    ctx: usize,
}

impl<'a> Predictor<'a> for MarkovCursor<'a> {
    fn alphabet(&self) -> Alphabet {
        self.m.alphabet
    }
    fn position(&self) -> usize {
        self.t
    }
    fn predict_into(&self, out: &mut [f64]) -> Result<()> {
        let s = self.m.alphabet.size();
        if self.t >= self.m.order {
            out.copy_from_slice(&self.m.table[self.ctx * s..(self.ctx + 1) * s]);
            return Ok(());
        }
        let here = self.m.initial_marginals[self.t][self.ctx];
        if here <= 0.0 {
            return Err(Error::UndefinedConditional { label: self.m.label.clone(), position: self.t });
        }
        let next = &self.m.initial_marginals[self.t + 1][self.ctx * s..(self.ctx + 1) * s];
        for (o, &v) in out.iter_mut().zip(next) {
            *o = v / here;
        }
        Ok(())
    }
    fn prob(&self, a: Symbol) -> Result<f64> {
        if self.t >= self.m.order {
            Ok(self.m.transition(self.ctx, a))
        } else {
            Ok(self.predict()?[a])
        }
    }
    fn observe(&mut self, a: Symbol) -> Result<()> {
        self.m.alphabet.check(a)?;
        let s = self.m.alphabet.size();
        if self.m.order > 0 {
            self.ctx = if self.t < self.m.order {
                self.ctx * s + a
            } else {
                (self.ctx * s + a) % self.m.context_modulus()
            };
        }
        self.t += 1;
        Ok(())
    }
    fn clone_box(&self) -> BoxPredictor<'a> {
        Box::new(self.clone())
    }
}

impl ProcessMeasure for Markov {
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
        Box::new(MarkovCursor { m: self, t: 0, ctx: 0 })
    }
    fn count_logprob(&self, counts: &[u64]) -> Option<f64> {
        if self.order != 0 {
            return None;
        }
        let mut acc = 0.0;
        for (a, &c) in counts.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let p = self.table[a];
            if p == 0.0 {
                return Some(f64::NEG_INFINITY);
            }
            acc += c as f64 * p.log2();
        }
        Some(acc)
    }
}
