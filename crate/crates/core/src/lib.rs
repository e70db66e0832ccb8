//! Universal sequential probability forecasting over finite alphabets.
//!
//! The crate models stochastic processes by their next-symbol conditionals
//! ([`measures`]), combines them into Bayesian mixtures ([`mixture`]),
//! evaluates the log-loss and related divergences ([`loss`]), and builds the
//! classical universal predictors: normalized maximum likelihood ([`nml`]),
//! capacity-achieving barycentres ([`capacity`]) and the greedy cover
//! mixture ([`cover`]). [`adversarial`] holds the counterexample processes
//! and dominance certificates. All logarithms are base 2.

pub mod adversarial;
pub mod capacity;
pub mod cover;
pub mod error;
pub mod loss;
pub mod measures;
pub mod mixture;
pub mod nml;
pub mod verdict;

pub use error::{Error, Result};
pub use measures::{Alphabet, LogProb, MeasureRef, ProcessMeasure, Seq, Symbol};
pub use mixture::{Mixture, ModelClass, WeightScheme};
pub use verdict::Check;
