#![allow(dead_code)]

use mixpred::measures::{for_each_sequence, ProcessMeasure, Symbol};

/// Sum of `2^log mu(x)` over `X^n`, computed by the chain rule from `cond_dist`.
pub fn total_mass_via_conditionals(m: &dyn ProcessMeasure, n: usize) -> f64 {
    fn rec(m: &dyn ProcessMeasure, prefix: &mut Vec<Symbol>, n: usize, p: f64) -> f64 {
        if prefix.len() == n || p == 0.0 {
            return if prefix.len() == n { p } else { 0.0 };
        }
        let d = m.cond_dist(prefix).expect("conditional defined on positive prefixes");
        let mut acc = 0.0;
        for (a, &q) in d.iter().enumerate() {
            if q > 0.0 {
                prefix.push(a);
                acc += rec(m, prefix, n, p * q);
                prefix.pop();
            }
        }
        acc
    }
    rec(m, &mut Vec::new(), n, 1.0)
}

/// Sum of `2^joint_logprob(x)` over `X^n`.
pub fn total_mass_via_joint(m: &dyn ProcessMeasure, n: usize) -> f64 {
    let mut acc = 0.0;
    for_each_sequence(m.alphabet(), n, 1 << 24, |_, x| acc += m.joint_logprob(x).value().exp2()).unwrap();
    acc
}

/// `sum_t log2 cond(x_t | x_<t)` straight from `cond_dist`.
pub fn chain_rule_logprob(m: &dyn ProcessMeasure, x: &[Symbol]) -> f64 {
    let mut acc = 0.0;
    for t in 0..x.len() {
        let d = m.cond_dist(&x[..t]).unwrap();
        if d[x[t]] == 0.0 {
            return f64::NEG_INFINITY;
        }
        acc += d[x[t]].log2();
    }
    acc
}

/// Bits-per-symbol binary entropy, independent of the crate's helper.
pub fn h2(p: f64) -> f64 {
    let t = |q: f64| if q > 0.0 { -q * q.log2() } else { 0.0 };
    t(p) + t(1.0 - p)
}

pub fn parse(text: &str) -> Vec<Symbol> {
    text.chars().map(|c| c.to_digit(10).unwrap() as Symbol).collect()
}
