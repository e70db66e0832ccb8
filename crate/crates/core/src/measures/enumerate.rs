//! Exhaustive evaluation over `X^n`.
//!
//! Sequences are indexed lexicographically: `x_1` is the most significant
//! digit in base `|X|`. Subtrees of zero probability are pruned, so the cost
//! is proportional to the number of positive-probability prefixes.

use super::{Alphabet, Predictor, ProcessMeasure, Symbol};
use crate::error::{Error, Result};

/// Default cap on `|X|^n` for enumeration.
pub const DEFAULT_CELL_CAP: u128 = 1 << 24;

fn check_cap(alphabet: Alphabet, n: usize, cap: u128) -> Result<usize> {
    let cells = alphabet.cells(n);
    if cells > cap {
        return Err(Error::EnumerationTooLarge { cells, cap });
    }
    Ok(cells as usize)
}

/// `log2 m(x)` for every `x` in `X^n`.
pub fn enumerate_logprobs<M: ProcessMeasure + ?Sized>(m: &M, n: usize, cap: u128) -> Result<Vec<f64>> {
    let root = m.predictor();
    enumerate_from(root.as_ref(), n, cap)
}

fn walk<'a>(
    p: &dyn Predictor<'a>,
    depth: usize,
    n: usize,
    logp: f64,
    idx: usize,
    out: &mut [f64],
    buf: &mut Vec<f64>,
) -> Result<()> {
    let s = buf.len();
    p.predict_into(buf)?;
    let dist = buf.clone();
    for (a, &q) in dist.iter().enumerate() {
        if q <= 0.0 {
            continue;
        }
        let child_logp = logp + q.log2();
        let child_idx = idx * s + a;
        if depth + 1 == n {
            out[child_idx] = child_logp;
        } else {
            let mut c = p.clone_box();
            c.observe(a)?;
            walk(c.as_ref(), depth + 1, n, child_logp, child_idx, out, buf)?;
        }
    }
    Ok(())
}

/// `log2` of the conditional probability of every continuation in `X^n`,
/// starting from an already positioned predictor.
pub fn enumerate_from<'a>(p: &dyn Predictor<'a>, n: usize, cap: u128) -> Result<Vec<f64>> {
    let alphabet = p.alphabet();
    let cells = check_cap(alphabet, n, cap)?;
    let mut out = vec![f64::NEG_INFINITY; cells];
    if n == 0 {
        out[0] = 0.0;
        return Ok(out);
    }
    let mut buf = vec![0.0; alphabet.size()];
    walk(p, 0, n, 0.0, 0, &mut out, &mut buf)?;
    Ok(out)
}

/// Symbols of the sequence with lexicographic index `idx` in `X^n`.
#[must_use]
pub fn decode_index(alphabet: Alphabet, n: usize, mut idx: usize) -> Vec<Symbol> {
    let s = alphabet.size();
    let mut out = vec![0; n];
    for t in (0..n).rev() {
        out[t] = idx % s;
        idx /= s;
    }
    out
}

/// Calls `f(idx, x)` for every `x` in `X^n` in lexicographic order.
pub fn for_each_sequence<F: FnMut(usize, &[Symbol])>(alphabet: Alphabet, n: usize, cap: u128, mut f: F) -> Result<()> {
    let cells = check_cap(alphabet, n, cap)?;
    let s = alphabet.size();
    let mut x = vec![0; n];
    for idx in 0..cells {
        f(idx, &x);
        for t in (0..n).rev() {
            x[t] += 1;
            if x[t] < s {
                break;
            }
            x[t] = 0;
        }
    }
    Ok(())
}
