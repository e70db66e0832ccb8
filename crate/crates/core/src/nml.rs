//! Normalized maximum likelihood over a class and the patched predictor built from it.
//!
//! For a class `C` and horizon `n`:
//!
//! ```text
//! c_x    = sup_{mu in C} mu(x)          x in X^n
//! c_n    = sum_x c_x
//! lambda = c_x / c_n
//! ```
//!
//! `lambda` is not consistent across horizons, so it is not a process.
//! [`build_rho_c`] sums the horizon-`k` tables, each continued with zeros,
//! under weights `(6/pi^2)/k^2`.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::loss::signed_kl;
use crate::measures::{
    enumerate_logprobs, for_each_sequence, log_sum_exp2, render, Alphabet, Dirac, FiniteHorizonLaw, Independent,
    MeasureRef, Symbol, DEFAULT_CELL_CAP,
};
use crate::mixture::{Mixture, ModelClass, WeightScheme};

const LN2: f64 = std::f64::consts::LN_2;

/// Where the per-sequence supremum comes from.
#[derive(Debug, Clone)]
pub enum SupOracle {
    /// Maximum over an explicit finite class, by enumeration.
    Finite(ModelClass),
    /// All i.i.d. laws on the alphabet: `prod_a (n_a/n)^{n_a}`.
    Bernoulli,
    /// All order-`k` Markov chains with a free initial law.
    MarkovK(usize),
}

impl SupOracle {
    #[must_use]
    pub fn label(&self) -> String {
        match self {
            SupOracle::Finite(c) => format!("finite({})", c.label),
            SupOracle::Bernoulli => "bernoulli".into(),
            SupOracle::MarkovK(k) => format!("markov-{k}"),
        }
    }
}

/// `log2 sup_p prod_a p_a^{n_a}` for counts `n_a`.
#[must_use]
pub fn log_ml_counts(counts: &[u64]) -> f64 {
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let nf = n as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let c = c as f64;
            c * (c / nf).log2()
        })
        .sum()
}

/// Binary-alphabet ML: `k` ones out of `n`.
#[must_use]
pub fn bernoulli_log_sup(ones: u64, n: u64) -> f64 {
    log_ml_counts(&[n - ones, ones])
}

fn log_binom(n: u64, k: u64) -> f64 {
    (ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)) / LN2
}

/// `log2 c_n` of the binary i.i.d. family, by the count sum.
#[must_use]
pub fn bernoulli_log_cn(n: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let terms: Vec<f64> = (0..=n).map(|j| log_binom(n, j) + bernoulli_log_sup(j, n)).collect();
    log_sum_exp2(&terms)
}

fn markov_log_sup(alphabet: Alphabet, order: usize, x: &[Symbol]) -> f64 {
    if x.len() <= order {
        return 0.0;
    }
    let s = alphabet.size();
    let contexts = s.pow(order as u32);
    let mut counts = vec![0u64; contexts * s];
    for t in order..x.len() {
        let ctx = x[t - order..t].iter().fold(0usize, |acc, &a| acc * s + a);
        counts[ctx * s + x[t]] += 1;
    }
    counts.chunks(s).map(log_ml_counts).sum()
}

// ---------------------------------------------------------------------------
// Tables
// ---------------------------------------------------------------------------

/// `c_x` for every `x in X^n` (log2, lexicographic) and the normalizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NmlTable {
    pub n: usize,
    pub alphabet: Alphabet,
    pub source: String,
    pub log_sup: Vec<f64>,
    pub log_cn: f64,
}

impl NmlTable {
    #[must_use]
    pub fn c_n(&self) -> f64 {
        self.log_cn.exp2()
    }

    /// `log2 lambda(x)` for every `x`.
    #[must_use]
    pub fn log_lambda(&self) -> Vec<f64> {
        self.log_sup.iter().map(|v| v - self.log_cn).collect()
    }

    #[must_use]
    pub fn lambda(&self, x: &[Symbol]) -> f64 {
        let s = self.alphabet.size();
        let idx = x.iter().fold(0usize, |acc, &a| acc * s + a);
        (self.log_sup[idx] - self.log_cn).exp2()
    }

    /// `(x, c_x, lambda(x))` rows for export.
    #[must_use]
    pub fn rows(&self) -> Vec<(String, f64, f64)> {
        let mut out = Vec::with_capacity(self.log_sup.len());
        let _ = for_each_sequence(self.alphabet, self.n, DEFAULT_CELL_CAP, |idx, x| {
            let c = self.log_sup[idx].exp2();
            out.push((render(x), c, c / self.c_n()));
        });
        out
    }
}

/// `lambda_C` at horizon `n`.
pub fn nml_table(oracle: &SupOracle, alphabet: Alphabet, n: usize) -> Result<NmlTable> {
    let cells = alphabet.cells(n);
    if cells > DEFAULT_CELL_CAP {
        return Err(Error::EnumerationTooLarge { cells, cap: DEFAULT_CELL_CAP });
    }
    let log_sup: Vec<f64> = match oracle {
        SupOracle::Finite(class) => {
            if class.alphabet() != alphabet {
                return Err(Error::AlphabetMismatch(class.label.clone()));
            }
            let tables: Vec<Vec<f64>> = class
                .measures()
                .par_iter()
                .map(|m| enumerate_logprobs(m.as_ref(), n, DEFAULT_CELL_CAP))
                .collect::<Result<_>>()?;
            (0..cells as usize)
                .into_par_iter()
                .map(|i| tables.iter().map(|t| t[i]).fold(f64::NEG_INFINITY, f64::max))
                .collect()
        }
        SupOracle::Bernoulli | SupOracle::MarkovK(_) => {
            let order = match oracle {
                SupOracle::MarkovK(k) => *k,
                _ => 0,
            };
            let s = alphabet.size();
            (0..cells as usize)
                .into_par_iter()
                .map(|idx| {
                    let x = crate::measures::decode_index(alphabet, n, idx);
                    if order == 0 {
                        let mut counts = vec![0u64; s];
                        for &a in &x {
                            counts[a] += 1;
                        }
                        log_ml_counts(&counts)
                    } else {
                        markov_log_sup(alphabet, order, &x)
                    }
                })
                .collect()
        }
    };
    let log_cn = log_sum_exp2(&log_sup);
    Ok(NmlTable { n, alphabet, source: oracle.label(), log_sup, log_cn })
}

/// `lambda(prefix a) / lambda(prefix)` for each `a`, mixing horizons `m+1` and `m`.
/// The result need not sum to 1.
pub fn nml_conditional(oracle: &SupOracle, alphabet: Alphabet, prefix: &[Symbol]) -> Result<Vec<f64>> {
    let here = nml_table(oracle, alphabet, prefix.len())?;
    let next = nml_table(oracle, alphabet, prefix.len() + 1)?;
    let denom = here.lambda(prefix);
    if denom <= 0.0 {
        return Err(Error::UndefinedConditional { label: format!("nml[{}]", oracle.label()), position: prefix.len() });
    }
    let mut y = prefix.to_vec();
    y.push(0);
    Ok((0..alphabet.size())
        .map(|a| {
            *y.last_mut().expect("non-empty") = a;
            next.lambda(&y) / denom
        })
        .collect())
}

// ---------------------------------------------------------------------------
// The pathology
// ---------------------------------------------------------------------------

/// The four measures on two steps: `mu1(00) = mu2(01) = mu4(11) = 1`,
/// `mu3(00) = mu3(01) = 1/2`.
pub fn four_measure_class() -> Result<ModelClass> {
    let b = Alphabet::BINARY;
    let mu1: MeasureRef = Arc::new(Dirac::parse(b, "0")?);
    let mu2: MeasureRef = Arc::new(Dirac::parse(b, "01(0)")?);
    let mu3: MeasureRef = Arc::new(Independent::new(
        b,
        "mu3",
        Arc::new(|t| if t == 2 { vec![0.5, 0.5] } else { vec![1.0, 0.0] }),
    ));
    let mu4: MeasureRef = Arc::new(Dirac::parse(b, "1")?);
    ModelClass::explicit("four-measure", vec![mu1, mu2, mu3, mu4], None)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NmlPathology {
    pub mu_conditional: Vec<f64>,
    pub lambda_conditional: Vec<f64>,
    /// `sum_a mu(a|0) log2 (mu(a|0) / lambda(a|0))`.
    pub value: f64,
}

/// Signed conditional divergence of `mu3(.|0)` from `lambda(.|0)` on the four-measure class.
pub fn nml_conditional_pathology() -> Result<NmlPathology> {
    let class = four_measure_class()?;
    let mu3 = class.get(2).clone();
    let lambda_conditional = nml_conditional(&SupOracle::Finite(class), Alphabet::BINARY, &[0])?;
    let mu_conditional = mu3.cond_dist(&[0])?;
    let value = signed_kl(&mu_conditional, &lambda_conditional);
    Ok(NmlPathology { mu_conditional, lambda_conditional, value })
}

// ---------------------------------------------------------------------------
// The patched predictor
// ---------------------------------------------------------------------------

/// `sum_{k=1}^N w_k mu_k`, where `mu_k` follows `lambda` at horizon `k` and emits 0 afterwards.
pub fn build_rho_c(oracle: &SupOracle, alphabet: Alphabet, max_horizon: usize) -> Result<Mixture> {
    if max_horizon == 0 {
        return Err(Error::InvalidParameter("rho_c needs at least one horizon".into()));
    }
    let components: Vec<MeasureRef> = (1..=max_horizon)
        .into_par_iter()
        .map(|k| {
            let table = nml_table(oracle, alphabet, k)?;
            let law = FiniteHorizonLaw::from_log_table(alphabet, table.log_lambda(), 0, format!("lambda_{k}"))?;
            Ok(Arc::new(law) as MeasureRef)
        })
        .collect::<Result<_>>()?;
    Ok(Mixture::from_scheme(components, &WeightScheme::Quadratic)?.with_label(format!("rho_c[{}]", oracle.label())))
}

/// Right-hand sides of the `rho_c` bound at horizon `n`, in bits per step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoCBound {
    pub n: usize,
    pub log_cn: f64,
    /// `(log2 c_n + 2 log2 n + log2 w) / n`, the form printed next to the proof.
    pub printed: f64,
    /// `(log2 c_n + 2 log2 n - log2 w) / n`, which is `log2(c_n / w_n) / n`.
    pub derived: f64,
}

#[must_use]
pub fn rho_c_bound(log_cn: f64, n: usize) -> RhoCBound {
    let w = 6.0 / (std::f64::consts::PI * std::f64::consts::PI);
    let nf = n as f64;
    RhoCBound {
        n,
        log_cn,
        printed: (log_cn + 2.0 * nf.log2() + w.log2()) / nf,
        derived: (log_cn + 2.0 * nf.log2() - w.log2()) / nf,
    }
}

/// Exact `(1/n) L_n(mu_p, rho_c)` for the binary i.i.d. family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BernoulliRhoCLoss {
    pub n: usize,
    pub p: f64,
    /// Upper bound on the per-step loss: components beyond `max_component` are dropped,
    /// which can only lower `rho_c`.
    pub per_step: f64,
    pub max_component: usize,
    pub dropped_mass: f64,
    pub bound: RhoCBound,
}

/// Per-step loss of `rho_c` (binary i.i.d. family) on `Bernoulli(p)` data, `p = P(0)`.
///
/// Sequences are grouped by number of ones `j` and trailing zeros `z`;
/// `rho_c` depends on `x` through `(j, z)` only.
pub fn bernoulli_rho_c_loss(p: f64, n: usize, max_component: usize) -> Result<BernoulliRhoCLoss> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("p = {p} outside [0, 1]")));
    }
    if n == 0 || max_component < n {
        return Err(Error::InvalidParameter("need 1 <= n <= max_component".into()));
    }
    let scheme = WeightScheme::Quadratic;
    let nu = n as u64;
    let log_cn: Vec<f64> = (0..=max_component as u64).map(bernoulli_log_cn).collect();
    let log_lambda = |ones: u64, k: u64| bernoulli_log_sup(ones, k) - log_cn[k as usize];
    let mut log_fact = vec![0.0f64; max_component + 1];
    for i in 1..=max_component {
        log_fact[i] = log_fact[i - 1] + (i as f64).log2();
    }
    let log_binom = |n: u64, k: u64| log_fact[n as usize] - log_fact[k as usize] - log_fact[(n - k) as usize];

    // A(j): components k >= n, marginal of lambda_k on a length-n prefix with j ones.
    let a_term: Vec<f64> = (0..=nu)
        .into_par_iter()
        .map(|j| {
            let terms: Vec<f64> = (nu..=max_component as u64)
                .map(|k| {
                    let extra = k - nu;
                    let inner: Vec<f64> = (0..=extra).map(|i| log_binom(extra, i) + log_lambda(j + i, k)).collect();
                    scheme.log_weight(k as usize) + log_sum_exp2(&inner)
                })
                .collect();
            log_sum_exp2(&terms)
        })
        .collect();

    let log_p0 = p.log2();
    let log_p1 = (1.0 - p).log2();
    let log_mu = |j: u64| {
        let zeros = nu - j;
        let mut v = 0.0;
        if zeros > 0 {
            v += zeros as f64 * log_p0;
        }
        if j > 0 {
            v += j as f64 * log_p1;
        }
        v
    };

    let mut total = 0.0;
    for j in 0..=nu {
        let lm = log_mu(j);
        if lm == f64::NEG_INFINITY {
            continue;
        }
        let zs: Vec<u64> = if j == 0 { vec![nu] } else { (0..=nu - j).collect() };
        for z in zs {
            let log_count = if j == 0 { 0.0 } else { log_binom(nu - z - 1, j - 1) };
            // B(j, z): components n - z <= k < n see x as lambda_k(prefix) followed by zeros.
            let mut terms = vec![a_term[j as usize]];
            let lo = (nu - z).max(1);
            for k in lo..nu {
                terms.push(scheme.log_weight(k as usize) + log_lambda(j, k));
            }
            let log_rho = log_sum_exp2(&terms);
            total += (log_count + lm).exp2() * (lm - log_rho);
        }
    }
    Ok(BernoulliRhoCLoss {
        n,
        p,
        per_step: total / n as f64,
        max_component,
        dropped_mass: scheme.tail_mass(max_component),
        bound: rho_c_bound(log_cn[n], n),
    })
}

// ---------------------------------------------------------------------------
// Stationary witnesses
// ---------------------------------------------------------------------------

/// Uniform mixture of the `n` rotations of `a^inf`: a stationary periodic process.
pub fn periodic_witness(alphabet: Alphabet, a: &[Symbol]) -> Result<Mixture> {
    let n = a.len();
    let rotations: Vec<MeasureRef> = (0..n)
        .map(|r| {
            let cycle: Vec<Symbol> = (0..n).map(|t| a[(t + r) % n]).collect();
            Dirac::new(alphabet, Vec::new(), cycle).map(|d| Arc::new(d) as MeasureRef)
        })
        .collect::<Result<_>>()?;
    Ok(Mixture::uniform(rotations)?.with_label(format!("periodic({})", render(a))))
}

/// `log2 c_n` over the class of periodic witnesses of period `n`.
pub fn stationary_witness_log_cn(alphabet: Alphabet, n: usize) -> Result<f64> {
    let mut members: Vec<MeasureRef> = Vec::new();
    for_each_sequence(alphabet, n, DEFAULT_CELL_CAP, |_, a| {
        if let Ok(m) = periodic_witness(alphabet, a) {
            members.push(Arc::new(m));
        }
    })?;
    let class = ModelClass::explicit(format!("periodic-{n}"), members, None)?;
    Ok(nml_table(&SupOracle::Finite(class), alphabet, n)?.log_cn)
}
