//! Finite alphabets, sequences, base-2 log-probabilities and process measures.
//!
//! A process measure is exposed through its next-symbol conditionals. The
//! joint probability of a prefix is the product of those conditionals, so
//! every family only has to say how it predicts one step ahead:
//!
//! ```text
//! log2 mu(x_1..x_n) = sum_t log2 mu(x_t | x_1..x_{t-1})
//! ```
//!
//! Sequential evaluation goes through [`Predictor`], a cursor that carries
//! whatever state the family needs (counts, context, posterior, chain
//! forward vector) so that walking a path of length `n` costs `O(n)` steps.

mod chain;
mod enumerate;
mod families;
mod markov;

pub use chain::{ChainMeasure, ChainSpec, ChainVariant};
pub use enumerate::{decode_index, enumerate_from, enumerate_logprobs, for_each_sequence, DEFAULT_CELL_CAP};
pub use families::{Dirac, FiniteHorizonLaw, Iid, Independent, Kt, Laplace, Truncated};
pub use markov::{stationary_context_law, Markov};

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Symbol = usize;
pub type MeasureRef = Arc<dyn ProcessMeasure>;
pub type BoxPredictor<'a> = Box<dyn Predictor<'a> + 'a>;

/// Relative tolerance on conditional normalization.
pub const NORMALIZATION_TOL: f64 = 1.0 / (1u64 << 40) as f64;

// ---------------------------------------------------------------------------
// Alphabet and sequences
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Alphabet {
    size: usize,
}

impl Alphabet {
    pub const BINARY: Alphabet = Alphabet { size: 2 };
    pub const TERNARY: Alphabet = Alphabet { size: 3 };

    pub fn new(size: usize) -> Result<Self> {
        if size < 2 {
            return Err(Error::InvalidAlphabet(size));
        }
        Ok(Self { size })
    }

    #[must_use]
    pub fn size(self) -> usize {
        self.size
    }

    /// `M = log2 |X|`.
    #[must_use]
    pub fn bits(self) -> f64 {
        (self.size as f64).log2()
    }

    /// Number of sequences of length `n`, saturating.
    #[must_use]
    pub fn cells(self, n: usize) -> u128 {
        let mut c: u128 = 1;
        for _ in 0..n {
            c = c.saturating_mul(self.size as u128);
        }
        c
    }

    pub fn check(self, symbol: Symbol) -> Result<()> {
        if symbol >= self.size {
            return Err(Error::SymbolOutOfRange { symbol, size: self.size });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Seq {
    alphabet: Alphabet,
    symbols: Vec<Symbol>,
}

impl Seq {
    pub fn new(alphabet: Alphabet, symbols: Vec<Symbol>) -> Result<Self> {
        for &s in &symbols {
            alphabet.check(s)?;
        }
        Ok(Self { alphabet, symbols })
    }

    /// Parses a string of digits, one symbol per character.
    pub fn parse(alphabet: Alphabet, text: &str) -> Result<Self> {
        let symbols = text
            .chars()
            .map(|c| {
                c.to_digit(36)
                    .map(|d| d as usize)
                    .ok_or_else(|| Error::InvalidParameter(format!("bad symbol `{c}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(alphabet, symbols)
    }

    #[must_use]
    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    #[must_use]
    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    #[must_use]
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    #[must_use]
    pub fn into_symbols(self) -> Vec<Symbol> {
        self.symbols
    }
}

impl fmt::Display for Seq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &s in &self.symbols {
            let c = std::char::from_digit(s as u32, 36).unwrap_or('?');
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

/// Renders symbols as a digit string.
#[must_use]
pub fn render(symbols: &[Symbol]) -> String {
    symbols
        .iter()
        .map(|&s| std::char::from_digit(s as u32, 36).unwrap_or('?'))
        .collect()
}

// ---------------------------------------------------------------------------
// Log-probabilities
// ---------------------------------------------------------------------------

/// Base-2 log of a probability, in `[-inf, 0]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct LogProb(f64);

impl LogProb {
    pub const ZERO: LogProb = LogProb(f64::NEG_INFINITY);
    pub const ONE: LogProb = LogProb(0.0);

    /// Wraps a base-2 log value. Rounding overshoot above 0 is clamped.
    #[must_use]
    pub fn new(value: f64) -> Self {
        debug_assert!(!value.is_nan(), "log-probability is NaN");
        debug_assert!(value <= 1e-9, "log-probability {value} above 0");
        Self(value.min(0.0))
    }

    #[must_use]
    pub fn from_prob(p: f64) -> Self {
        Self::new(p.log2())
    }

    #[must_use]
    pub fn value(self) -> f64 {
        self.0
    }

    #[must_use]
    pub fn prob(self) -> f64 {
        self.0.exp2()
    }

    #[must_use]
    pub fn is_zero(self) -> bool {
        self.0 == f64::NEG_INFINITY
    }
}

impl std::ops::Add for LogProb {
    type Output = LogProb;
    fn add(self, rhs: LogProb) -> LogProb {
        LogProb(self.0 + rhs.0)
    }
}

/// `log2 sum 2^v` with max extraction. Returns `-inf` for empty input.
#[must_use]
pub fn log_sum_exp2(values: &[f64]) -> f64 {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    if m == f64::INFINITY {
        return m;
    }
    let s: f64 = values.iter().map(|&v| (v - m).exp2()).sum();
    m + s.log2()
}

/// `log2(2^a + 2^b)`.
#[must_use]
pub fn log_add_exp2(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + (1.0 + (lo - hi).exp2()).log2()
}

// ---------------------------------------------------------------------------
// Process measures and predictors
// ---------------------------------------------------------------------------

/// Cursor over a measure: conditional law after the symbols observed so far.
pub trait Predictor<'a>: Send {
    fn alphabet(&self) -> Alphabet;

    /// Number of symbols observed.
    fn position(&self) -> usize;

    fn predict_into(&self, out: &mut [f64]) -> Result<()>;

    fn observe(&mut self, symbol: Symbol) -> Result<()>;

    fn clone_box(&self) -> BoxPredictor<'a>;

    fn predict(&self) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.alphabet().size()];
        self.predict_into(&mut out)?;
        Ok(out)
    }

    fn prob(&self, symbol: Symbol) -> Result<f64> {
        Ok(self.predict()?[symbol])
    }
}

pub trait ProcessMeasure: fmt::Debug + Send + Sync {
    fn alphabet(&self) -> Alphabet;

    fn label(&self) -> String;

    /// Next-symbol law after `prefix`.
    fn cond_dist(&self, prefix: &[Symbol]) -> Result<Vec<f64>>;

    fn predictor(&self) -> BoxPredictor<'_> {
        Box::new(PrefixPredictor { measure: self, prefix: Vec::new() })
    }

    /// Chain-rule joint log-probability; stops at the first zero factor.
    fn joint_logprob(&self, x: &[Symbol]) -> LogProb {
        let mut p = self.predictor();
        let mut acc = 0.0;
        for &s in x {
            match p.prob(s) {
                Ok(q) if q > 0.0 => acc += q.log2(),
                Ok(_) => return LogProb::ZERO,
                Err(e) => {
                    debug_assert!(false, "conditional failed on a positive prefix: {e}");
                    return LogProb::ZERO;
                }
            }
            if p.observe(s).is_err() {
                return LogProb::ZERO;
            }
        }
        LogProb::new(acc)
    }

    /// Joint log-probability of any sequence with these symbol counts, for
    /// families whose law depends on counts only. `None` means the family
    /// does not declare exchangeability.
    fn count_logprob(&self, _counts: &[u64]) -> Option<f64> {
        None
    }

    /// Lets mixtures be flattened.
    fn as_mixture(&self) -> Option<&crate::mixture::Mixture> {
        None
    }
}

/// Generic cursor that re-queries `cond_dist` with the full prefix.
struct PrefixPredictor<'a, M: ProcessMeasure + ?Sized> {
    measure: &'a M,
    prefix: Vec<Symbol>,
}

impl<'a, M: ProcessMeasure + ?Sized> Predictor<'a> for PrefixPredictor<'a, M> {
    fn alphabet(&self) -> Alphabet {
        self.measure.alphabet()
    }

    fn position(&self) -> usize {
        self.prefix.len()
    }

    fn predict_into(&self, out: &mut [f64]) -> Result<()> {
        let d = self.measure.cond_dist(&self.prefix)?;
        out.copy_from_slice(&d);
        Ok(())
    }

    fn observe(&mut self, symbol: Symbol) -> Result<()> {
        self.measure.alphabet().check(symbol)?;
        self.prefix.push(symbol);
        Ok(())
    }

    fn clone_box(&self) -> BoxPredictor<'a> {
        Box::new(PrefixPredictor { measure: self.measure, prefix: self.prefix.clone() })
    }
}

/// Drives a fresh predictor through `prefix` and returns the next law.
pub fn cond_via_predictor<M: ProcessMeasure + ?Sized>(m: &M, prefix: &[Symbol]) -> Result<Vec<f64>> {
    let mut p = m.predictor();
    for &s in prefix {
        p.observe(s)?;
    }
    p.predict()
}

/// Checks that `dist` is a probability vector.
pub fn validate_dist(dist: &[f64], size: usize) -> Result<()> {
    if dist.len() != size {
        return Err(Error::InvalidParameter(format!(
            "distribution has {} entries, alphabet has {size}",
            dist.len()
        )));
    }
    if dist.iter().any(|&p| !(0.0..=1.0).contains(&p) || p.is_nan()) {
        return Err(Error::InvalidParameter(format!("entries outside [0,1]: {dist:?}")));
    }
    let s: f64 = dist.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!("distribution sums to {s}")));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

/// Independent stream for replica `replica` of a run seeded with `master`.
#[must_use]
pub fn replica_rng(master: u64, replica: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(replica);
    rng
}

/// Draws an index from `dist`.
pub fn draw<R: Rng + ?Sized>(dist: &[f64], rng: &mut R) -> Symbol {
    let u: f64 = rng.gen::<f64>();
    let total: f64 = dist.iter().sum();
    let mut acc = 0.0;
    let mut last = 0;
    for (a, &p) in dist.iter().enumerate() {
        if p > 0.0 {
            acc += p / total;
            last = a;
            if u < acc {
                return a;
            }
        }
    }
    last
}

/// Samples `n` symbols from `m`.
pub fn sample<M: ProcessMeasure + ?Sized, R: Rng + ?Sized>(m: &M, n: usize, rng: &mut R) -> Result<Seq> {
    let mut p = m.predictor();
    let mut buf = vec![0.0; m.alphabet().size()];
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        p.predict_into(&mut buf)?;
        let s = draw(&buf, rng);
        p.observe(s)?;
        out.push(s);
    }
    Seq::new(m.alphabet(), out)
}

// ---------------------------------------------------------------------------
// Convenience constructors
// ---------------------------------------------------------------------------

/// Binary i.i.d. measure with `p` the probability of symbol 0.
pub fn bernoulli(p: f64) -> Result<MeasureRef> {
    Ok(Arc::new(Iid::bernoulli(p)?))
}

/// Uniform i.i.d. measure.
#[must_use]
pub fn uniform(alphabet: Alphabet) -> MeasureRef {
    Arc::new(Iid::uniform(alphabet))
}

#[must_use]
pub fn laplace(alphabet: Alphabet) -> MeasureRef {
    Arc::new(Laplace::new(alphabet))
}

/// Binary entropy `h(p)` in bits.
#[must_use]
pub fn binary_entropy(p: f64) -> f64 {
    let t = |q: f64| if q > 0.0 { -q * q.log2() } else { 0.0 };
    t(p) + t(1.0 - p)
}

/// `h(p,q) = p log(p/q) + (1-p) log((1-p)/(1-q))` in bits.
#[must_use]
pub fn binary_divergence(p: f64, q: f64) -> f64 {
    crate::loss::kl_div(&[p, 1.0 - p], &[q, 1.0 - q])
}
