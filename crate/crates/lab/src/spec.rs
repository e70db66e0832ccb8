//! Text grammar for measures and classes.
//!
//! ```text
//! spec  := name [ '{' arg (',' arg)* '}' ]
//! arg   := spec | list | atom
//! list  := '[' [ arg (',' arg)* ] ']'
//! atom  := run of characters other than  { } [ ] , and whitespace
//! ```
//!
//! Measure families:
//!
//! ```text
//! bernoulli{p}              binary i.i.d., p = P(symbol 0)
//! iid{[q0, q1, ...]}        i.i.d. with the given symbol law
//! uniform{m} laplace{m} kt{m}
//! markov{k, [table]}        stationary order-k chain; table rows are contexts, row-major
//! markov{k, [table], [init]} the same with an explicit law of the first k symbols
//! dirac{pattern}            e.g. dirac{01(0)}; optional second arg: alphabet size
//! chain{stno, bits, J}      climb-or-reset chain emitting `bits`, start truncated at J
//! chain{stno1, bits, J}     ternary hidden variant
//! mix{a, b, ...}            uniform mixture
//! mix{[w...], a, b, ...}    weighted mixture
//! sticky{spec, horizon}     contamination toward repeating the last symbol
//! tripartite{p} climbing spoiler sparse-killer
//! ```
//!
//! Classes are either a list of measure specs or one of
//! `bernoulli-grid{r}` and `markov-grid{K, r}`.

use std::sync::Arc;

use mixpred::adversarial::{climbing_predictor, doubly_exponential_spoiler, sparse_killer, tripartite, StickyContamination};
use mixpred::measures::{ChainMeasure, Dirac, Iid, Kt, Laplace, Markov};
use mixpred::mixture::{build_bernoulli_grid, build_markov_grid};
use mixpred::{Alphabet, MeasureRef, Mixture, ModelClass};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, LabResult};

/// Parsed but uninterpreted spec tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Arg {
    Atom(String),
    List(Vec<Arg>),
    Call { name: String, args: Vec<Arg> },
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn fail<T>(&self, reason: &str) -> LabResult<T> {
        Err(LabError::spec(self.src, format!("{reason} at byte {}", self.pos)))
    }

    fn atom(&mut self) -> String {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_whitespace() || "{}[],".contains(c) {
                break;
            }
            self.pos += c.len_utf8();
        }
        self.src[start..self.pos].to_string()
    }

    fn args_until(&mut self, close: char) -> LabResult<Vec<Arg>> {
        let mut out = Vec::new();
        self.skip_ws();
        if self.peek() == Some(close) {
            self.pos += 1;
            return Ok(out);
        }
        loop {
            out.push(self.arg()?);
            self.skip_ws();
            match self.peek() {
                Some(',') => self.pos += 1,
                Some(c) if c == close => {
                    self.pos += 1;
                    return Ok(out);
                }
                _ => return self.fail(&format!("expected `,` or `{close}`")),
            }
        }
    }

    fn arg(&mut self) -> LabResult<Arg> {
        self.skip_ws();
        if self.peek() == Some('[') {
            self.pos += 1;
            return Ok(Arg::List(self.args_until(']')?));
        }
        let name = self.atom();
        if name.is_empty() {
            return self.fail("expected a value");
        }
        self.skip_ws();
        if self.peek() == Some('{') {
            self.pos += 1;
            let args = self.args_until('}')?;
            return Ok(Arg::Call { name, args });
        }
        Ok(Arg::Atom(name))
    }
}

/// Parses the tree without interpreting family names.
pub fn parse_tree(src: &str) -> LabResult<Arg> {
    let mut p = Parser { src, pos: 0 };
    let arg = p.arg()?;
    p.skip_ws();
    if p.pos != src.len() {
        return p.fail("trailing input");
    }
    Ok(arg)
}

// ---------------------------------------------------------------------------
// Interpretation
// ---------------------------------------------------------------------------

struct Args<'a> {
    src: &'a str,
    family: &'a str,
    args: &'a [Arg],
}

impl Args<'_> {
    fn err<T>(&self, reason: impl Into<String>) -> LabResult<T> {
        Err(LabError::spec(self.src, format!("{}: {}", self.family, reason.into())))
    }

    fn arity(&self, lo: usize, hi: usize) -> LabResult<()> {
        if self.args.len() < lo || self.args.len() > hi {
            return self.err(format!("takes {lo}..={hi} arguments, got {}", self.args.len()));
        }
        Ok(())
    }

    fn atom(&self, i: usize) -> LabResult<&str> {
        match self.args.get(i) {
            Some(Arg::Atom(s)) => Ok(s),
            _ => self.err(format!("argument {} must be a plain value", i + 1)),
        }
    }

    fn float(&self, i: usize) -> LabResult<f64> {
        let s = self.atom(i)?;
        s.parse().or_else(|_| self.err(format!("`{s}` is not a number")))
    }

    fn uint(&self, i: usize) -> LabResult<usize> {
        let s = self.atom(i)?;
        s.parse().or_else(|_| self.err(format!("`{s}` is not a nonnegative integer")))
    }

    fn uint_or(&self, i: usize, default: usize) -> LabResult<usize> {
        if i < self.args.len() {
            self.uint(i)
        } else {
            Ok(default)
        }
    }

    fn floats(&self, i: usize) -> LabResult<Vec<f64>> {
        match self.args.get(i) {
            Some(Arg::List(items)) => items
                .iter()
                .map(|a| match a {
                    Arg::Atom(s) => s.parse().or_else(|_| self.err(format!("`{s}` is not a number"))),
                    _ => self.err("lists hold numbers only"),
                })
                .collect(),
            _ => self.err(format!("argument {} must be a list", i + 1)),
        }
    }
}

fn alphabet(src: &str, m: usize) -> LabResult<Alphabet> {
    Alphabet::new(m).map_err(|e| LabError::spec(src, e.to_string()))
}

fn bits(src: &str, s: &str) -> LabResult<Vec<usize>> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            _ => Err(LabError::spec(src, format!("`{s}` is not a bit string"))),
        })
        .collect()
}

/// Alphabet size `m` with `m^(k+1) = len`.
fn infer_alphabet(len: usize, k: usize) -> Option<usize> {
    (2..=64).find(|&m| (m as u128).checked_pow(k as u32 + 1) == Some(len as u128))
}

fn build_markov(a: &Args<'_>) -> LabResult<Markov> {
    a.arity(2, 3)?;
    let k = a.uint(0)?;
    let flat = a.floats(1)?;
    let Some(size) = infer_alphabet(flat.len(), k) else {
        return a.err(format!("table of {} entries is not m^(k+1) for k = {k}", flat.len()));
    };
    let alph = alphabet(a.src, size)?;
    let table: Vec<Vec<f64>> = flat.chunks(size).map(<[f64]>::to_vec).collect();
    let m = if a.args.len() == 3 {
        Markov::new(alph, k, table, a.floats(2)?)?
    } else {
        Markov::stationary(alph, k, table)?
    };
    Ok(m)
}

fn build_mixture(a: &Args<'_>) -> LabResult<Mixture> {
    if a.args.is_empty() {
        return a.err("needs at least one component");
    }
    let (weights, rest) = match &a.args[0] {
        Arg::List(_) => (Some(a.floats(0)?), &a.args[1..]),
        _ => (None, a.args),
    };
    let comps = rest.iter().map(|c| build(a.src, c)).collect::<LabResult<Vec<_>>>()?;
    let m = match weights {
        Some(w) if w.len() != comps.len() => return a.err("one weight per component"),
        Some(w) => Mixture::new(comps, w)?,
        None => Mixture::uniform(comps)?,
    };
    Ok(m)
}

fn build(src: &str, arg: &Arg) -> LabResult<MeasureRef> {
    let Arg::Call { name, args } = arg else {
        return match arg {
            Arg::Atom(a) => build(src, &Arg::Call { name: a.clone(), args: Vec::new() }),
            _ => Err(LabError::spec(src, "expected a measure, found a list")),
        };
    };
    let a = Args { src, family: name, args };
    let m: MeasureRef = match name.as_str() {
        "bernoulli" => {
            a.arity(1, 1)?;
            Arc::new(Iid::bernoulli(a.float(0)?)?)
        }
        "iid" => {
            a.arity(1, 1)?;
            let probs = a.floats(0)?;
            Arc::new(Iid::new(alphabet(src, probs.len())?, probs)?)
        }
        "uniform" => {
            a.arity(0, 1)?;
            Arc::new(Iid::uniform(alphabet(src, a.uint_or(0, 2)?)?))
        }
        "laplace" => {
            a.arity(0, 1)?;
            Arc::new(Laplace::new(alphabet(src, a.uint_or(0, 2)?)?))
        }
        "kt" => {
            a.arity(0, 1)?;
            Arc::new(Kt::new(alphabet(src, a.uint_or(0, 2)?)?))
        }
        "markov" => Arc::new(build_markov(&a)?),
        "dirac" => {
            a.arity(1, 2)?;
            let alph = alphabet(src, a.uint_or(1, 2)?)?;
            Arc::new(Dirac::parse(alph, a.atom(0)?)?)
        }
        "chain" => {
            a.arity(3, 3)?;
            let x = bits(src, a.atom(1)?)?;
            let j_max = a.uint(2)?;
            match a.atom(0)? {
                "stno" => Arc::new(ChainMeasure::stno(&x, j_max)?),
                "stno1" => Arc::new(ChainMeasure::stno1(&x, j_max)?),
                other => return a.err(format!("unknown chain variant `{other}`")),
            }
        }
        "mix" => Arc::new(build_mixture(&a)?),
        "sticky" => {
            a.arity(2, 2)?;
            Arc::new(StickyContamination::new(build(src, &args[0])?, a.uint(1)?))
        }
        "tripartite" => {
            a.arity(1, 1)?;
            Arc::new(tripartite(a.float(0)?)?)
        }
        "climbing" => Arc::new(climbing_predictor()),
        "spoiler" => Arc::new(doubly_exponential_spoiler()),
        "sparse-killer" => Arc::new(sparse_killer()),
        other => return Err(LabError::spec(src, format!("unknown family `{other}`"))),
    };
    Ok(m)
}

/// Builds a measure from its spec string.
pub fn parse_measure(src: &str) -> LabResult<MeasureRef> {
    build(src, &parse_tree(src)?)
}

fn call<'a>(src: &'a str, tree: &'a Arg, family: &str) -> LabResult<Args<'a>> {
    match tree {
        Arg::Call { name, args } if name == family => Ok(Args { src, family: name, args }),
        _ => Err(LabError::spec(src, format!("expected {family}{{...}}"))),
    }
}

/// Parses a `mix{...}` spec into the concrete mixture.
pub fn parse_mixture(src: &str) -> LabResult<Mixture> {
    let tree = parse_tree(src)?;
    build_mixture(&call(src, &tree, "mix")?)
}

/// Parses a `markov{...}` spec into the concrete chain.
pub fn parse_markov(src: &str) -> LabResult<Markov> {
    let tree = parse_tree(src)?;
    build_markov(&call(src, &tree, "markov")?)
}

/// Family names the grammar understands.
pub const MEASURE_FAMILIES: &[&str] = &[
    "bernoulli",
    "iid",
    "uniform",
    "laplace",
    "kt",
    "markov",
    "dirac",
    "chain",
    "mix",
    "sticky",
    "tripartite",
    "climbing",
    "spoiler",
    "sparse-killer",
];

pub const CLASS_GENERATORS: &[&str] = &["bernoulli-grid", "markov-grid"];

/// Checks that every family named in `src` exists, without building anything.
pub fn check_families(src: &str) -> LabResult<()> {
    fn walk(src: &str, arg: &Arg, top: bool) -> LabResult<()> {
        match arg {
            Arg::Atom(_) => Ok(()),
            Arg::List(items) => items.iter().try_for_each(|a| walk(src, a, false)),
            Arg::Call { name, args } => {
                let known = MEASURE_FAMILIES.contains(&name.as_str())
                    || (top && CLASS_GENERATORS.contains(&name.as_str()));
                if !known {
                    return Err(LabError::spec(src, format!("unknown family `{name}`")));
                }
                args.iter().try_for_each(|a| walk(src, a, false))
            }
        }
    }
    let tree = parse_tree(src)?;
    if let Arg::Atom(name) = &tree {
        if !MEASURE_FAMILIES.contains(&name.as_str()) {
            return Err(LabError::spec(src, format!("unknown family `{name}`")));
        }
    }
    walk(src, &tree, true)
}

fn build_generator(src: &str, class_cap: usize) -> LabResult<Option<ModelClass>> {
    let tree = parse_tree(src)?;
    let Arg::Call { name, args } = &tree else {
        return Ok(None);
    };
    let a = Args { src, family: name, args };
    let class = match name.as_str() {
        "bernoulli-grid" => {
            a.arity(1, 1)?;
            build_bernoulli_grid(a.uint(0)?)?
        }
        "markov-grid" => {
            a.arity(2, 2)?;
            build_markov_grid(Alphabet::BINARY, a.uint(0)?, a.uint(1)?, class_cap as u128)?
        }
        _ => return Ok(None),
    };
    Ok(Some(class))
}

/// A class in a config: a grid generator or an explicit list of measure specs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ClassSpec {
    Generator(String),
    Members(Vec<String>),
}

impl ClassSpec {
    /// Builds the class. Grid generators inside a member list expand in place;
    /// members then get quadratic weights in index order.
    pub fn build(&self, class_cap: usize) -> LabResult<ModelClass> {
        let class = match self {
            ClassSpec::Generator(src) => match build_generator(src, class_cap)? {
                Some(c) => c,
                None => ModelClass::explicit(src.clone(), vec![parse_measure(src)?], None)?,
            },
            ClassSpec::Members(specs) => {
                let mut ms: Vec<MeasureRef> = Vec::new();
                for s in specs {
                    match build_generator(s, class_cap)? {
                        Some(c) => ms.extend(c.measures().iter().cloned()),
                        None => ms.push(parse_measure(s)?),
                    }
                    if ms.len() > class_cap {
                        break;
                    }
                }
                if ms.len() > class_cap {
                    return Err(LabError::Cap { cap: "class_size", needed: ms.len() as u128, limit: class_cap as u128 });
                }
                ModelClass::explicit(specs.join(" + "), ms, None)?
            }
        };
        if class.len() > class_cap {
            return Err(LabError::Cap { cap: "class_size", needed: class.len() as u128, limit: class_cap as u128 });
        }
        Ok(class)
    }

    /// The spec strings, one per entry.
    #[must_use]
    pub fn entries(&self) -> Vec<&str> {
        match self {
            ClassSpec::Generator(s) => vec![s.as_str()],
            ClassSpec::Members(v) => v.iter().map(String::as_str).collect(),
        }
    }
}
