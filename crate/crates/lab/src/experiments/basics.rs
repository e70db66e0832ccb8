//! Mixtures, loss series, divergences.

use std::f64::consts::LN_2;
use std::sync::Arc;

use mixpred::loss::{adversarial_sequence, d_inf, loss_series, markov_dinf_bound, pinsker_check, tv_profile};
use mixpred::measures::{for_each_sequence, render, replica_rng, sample, Iid, Laplace, Markov};
use mixpred::{Alphabet, Check, MeasureRef, Mixture, ProcessMeasure, Seq};
use rand::Rng;
use rayon::prelude::*;

use crate::error::{LabError, LabResult};
use crate::row;
use crate::run::{Ctx, Outcome};
use crate::spec::{parse_markov, parse_measure, parse_mixture, parse_tree, Arg, ClassSpec};
use crate::table::Table;

const EXACT: f64 = 1e-9;

// ---------------------------------------------------------------------------
// mixture-bound
// ---------------------------------------------------------------------------

pub const DEFAULT_MIXTURES: &[&str] = &[
    "bernoulli-grid{8}",
    "markov-grid{1, 4}",
    "mix{[0.5, 0.25, 0.125], laplace{2}, kt{2}, dirac{01(1)}}",
    "mix{bernoulli{0.2}, markov{1, [0.9, 0.1, 0.2, 0.8]}, uniform{2}}",
    "mix{[0.3, 0.7], uniform{3}, iid{[0.5, 0.3, 0.2]}}",
];

fn mixture_of(src: &str, class_cap: usize) -> LabResult<Mixture> {
    match parse_tree(src)? {
        Arg::Call { name, .. } if name == "mix" => parse_mixture(src),
        _ => Ok(ClassSpec::Generator(src.to_string()).build(class_cap)?.mixture()?),
    }
}

pub fn mixture_bound(ctx: &Ctx) -> LabResult<Outcome> {
    let specs = ctx.spec_list("mixtures", DEFAULT_MIXTURES);
    let horizon: usize = ctx.param("horizon", 10)?;
    let sample_horizon: usize = ctx.param("sample_horizon", 1000)?;
    let samples: usize = ctx.param("samples", 1000)?;
    let seed = ctx.seed()?;

    let mut table = Table::new(
        "mixture_bound",
        &["mixture", "component", "label", "weight", "bound", "max_exhaustive", "max_sampled"],
    );
    let mut checks = Vec::new();
    for (mi, src) in specs.iter().enumerate() {
        let mix = mixture_of(src, ctx.config().caps.class_size)?;
        let alphabet = mix.alphabet();
        ctx.check_cells(alphabet.size(), horizon)?;
        let total: f64 = mix.weights().iter().sum();
        let bounds: Vec<f64> = mix.weights().iter().map(|w| -(w / total).log2()).collect();
        let k = mix.len();

        let mut exhaustive = vec![f64::NEG_INFINITY; k];
        for n in 1..=horizon {
            for_each_sequence(alphabet, n, u128::from(ctx.config().caps.cells), |_, x| {
                let nu = mix.joint_logprob(x).value();
                for (j, c) in mix.components().iter().enumerate() {
                    let lm = c.joint_logprob(x).value();
                    if lm > f64::NEG_INFINITY {
                        exhaustive[j] = exhaustive[j].max(lm - nu);
                    }
                }
            })?;
        }

        let draws: Vec<(usize, f64)> = (0..samples as u64)
            .into_par_iter()
            .map(|i| {
                let j = i as usize % k;
                let comp = &mix.components()[j];
                let x = sample(comp.as_ref(), sample_horizon, &mut replica_rng(seed, i))?;
                let x = x.symbols();
                Ok((j, comp.joint_logprob(x).value() - mix.joint_logprob(x).value()))
            })
            .collect::<LabResult<_>>()?;
        let mut sampled = vec![f64::NEG_INFINITY; k];
        for (j, r) in draws {
            sampled[j] = sampled[j].max(r);
        }

        let excess = |v: &[f64]| v.iter().zip(&bounds).map(|(r, b)| r - b).fold(f64::NEG_INFINITY, f64::max);
        checks.push(Check::le(format!("mixture[{mi}]:exhaustive(n<={horizon})"), excess(&exhaustive), 0.0, EXACT));
        if samples > 0 {
            checks.push(Check::le(format!("mixture[{mi}]:sampled(n={sample_horizon})"), excess(&sampled), 0.0, EXACT));
        }
        for j in 0..k {
            table.push(row![
                mi,
                j,
                mix.components()[j].label(),
                mix.weights()[j] / total,
                bounds[j],
                exhaustive[j],
                sampled[j]
            ]);
        }
    }
    Ok(Outcome { tables: vec![table], checks })
}

// ---------------------------------------------------------------------------
// disc-adversarial
// ---------------------------------------------------------------------------

pub const DEFAULT_PREDICTORS: &[&str] = &[
    "laplace{2}",
    "kt{2}",
    "bernoulli{0.3}",
    "mix{bernoulli{0.2}, bernoulli{0.7}}",
    "markov{1, [0.9, 0.1, 0.2, 0.8]}",
    "climbing",
    "uniform{3}",
    "kt{4}",
];

pub fn disc_adversarial(ctx: &Ctx) -> LabResult<Outcome> {
    let specs = ctx.spec_list("predictors", DEFAULT_PREDICTORS);
    let max_n: usize = ctx.param("max_horizon", 20)?;
    let mut table = Table::new("adversarial", &["predictor", "n", "sequence", "loss", "per_step"]);
    let mut checks = Vec::new();
    for src in &specs {
        let rho = parse_measure(src)?;
        let bits = rho.alphabet().bits();
        let mut worst = f64::INFINITY;
        for n in 1..=max_n {
            let (x, loss) = adversarial_sequence(rho.as_ref(), n)?;
            worst = worst.min(loss / n as f64);
            table.push(row![src, n, render(&x), loss, loss / n as f64]);
        }
        // -log2 min_a rho(a|.) >= log2|X| >= 1 at every step.
        checks.push(Check::ge(format!("disc[{src}]:per-step>=log2|X|"), worst, bits, 1e-12));
    }
    Ok(Outcome { tables: vec![table], checks })
}

// ---------------------------------------------------------------------------
// loss-series
// ---------------------------------------------------------------------------

pub fn loss_series_exp(ctx: &Ctx) -> LabResult<Outcome> {
    let mu = ctx.measure("mu", "markov{1, [0.9, 0.1, 0.3, 0.7]}")?;
    let rho = ctx.measure("rho", "kt{2}")?;
    let n: usize = ctx.param("n", 256)?;
    let path: String = ctx.param("path", String::new())?;
    let x = if path.is_empty() {
        sample(mu.as_ref(), n, &mut replica_rng(ctx.seed()?, 0))?.into_symbols()
    } else {
        Seq::parse(mu.alphabet(), &path)?.into_symbols()
    };
    let report = loss_series(mu.as_ref(), rho.as_ref(), &x)?;

    let mut table = Table::new("loss_series", &["step", "delta", "a", "dbar", "abar", "cum_logloss"]);
    for s in &report.steps {
        table.push(row![s.step, s.delta, s.a, s.dbar, s.abar, s.cum_logloss]);
    }
    let pinsker = pinsker_check(&report);
    let mut checks = vec![Check::le("loss-series:pinsker-violations", pinsker.violations as f64, 0.0, 0.0)];
    if let Some(last) = report.last() {
        let ratio = mu.joint_logprob(&x[..last.step]).value() - rho.joint_logprob(&x[..last.step]).value();
        checks.push(Check::close("loss-series:cum-logloss=log-ratio", last.cum_logloss, ratio, EXACT));
        let min_d = report.steps.iter().map(|s| s.delta).fold(f64::INFINITY, f64::min);
        checks.push(Check::ge("loss-series:delta>=0", min_d, 0.0, 1e-12));
    }
    Ok(Outcome { tables: vec![table], checks })
}

// ---------------------------------------------------------------------------
// tv-profile
// ---------------------------------------------------------------------------

pub fn tv_profile_exp(ctx: &Ctx) -> LabResult<Outcome> {
    let mu = ctx.measure("mu", "bernoulli{0.5}")?;
    let rho = ctx.measure("rho", "bernoulli{0.1}")?;
    let prefixes: Vec<String> = ctx.param("prefixes", vec![String::new(), "0".into(), "0110".into(), "00000000".into()])?;
    let ms = ctx.horizons(&[1, 2, 4, 8]);
    let mut table = Table::new("tv_profile", &["prefix", "m", "tv"]);
    let mut checks = Vec::new();
    for p in &prefixes {
        let x = Seq::parse(mu.alphabet(), p)?.into_symbols();
        for &m in &ms {
            ctx.check_cells(mu.alphabet().size(), m)?;
        }
        let (reports, monotone) = tv_profile(mu.as_ref(), rho.as_ref(), &x, &ms)?;
        let mut lo: f64 = 1.0;
        let mut hi: f64 = 0.0;
        for r in &reports {
            lo = lo.min(r.value);
            hi = hi.max(r.value);
            table.push(row![p, r.m, r.value]);
        }
        checks.push(Check::holds(format!("tv[{p}]:nondecreasing-in-m"), monotone));
        checks.push(Check::ge(format!("tv[{p}]:>=0"), lo, 0.0, 0.0));
        checks.push(Check::le(format!("tv[{p}]:<=1"), hi, 1.0, 0.0));
    }
    Ok(Outcome { tables: vec![table], checks })
}

// ---------------------------------------------------------------------------
// dinf-markov
// ---------------------------------------------------------------------------

pub fn dinf_markov(ctx: &Ctx) -> LabResult<Outcome> {
    let m1: Markov = parse_markov(&ctx.measure_text("mu1", "markov{1, [0.9, 0.1, 0.2, 0.8]}")?)?;
    let m2: Markov = parse_markov(&ctx.measure_text("mu2", "markov{1, [0.6, 0.4, 0.5, 0.5]}")?)?;
    let horizons = ctx.horizons(&[1, 2, 3, 4, 6, 8, 10]);
    let b = markov_dinf_bound(&m1, &m2)?;
    let mut table = Table::new("dinf", &["n", "d_inf", "witness", "corrected_bound", "literal_context_value"]);
    let mut checks = Vec::new();
    for &n in &horizons {
        ctx.check_cells(m1.alphabet().size(), n)?;
        let d = d_inf(&m1, &m2, n)?;
        table.push(row![n, d.value, d.witness, b.corrected, b.literal]);
        if n >= b.order.max(1) {
            checks.push(Check::le(format!("dinf[n={n}]<=max(initial,transition)"), d.value, b.corrected, EXACT));
        }
    }
    Ok(Outcome { tables: vec![table], checks })
}

// ---------------------------------------------------------------------------
// pinsker-sweep
// ---------------------------------------------------------------------------

fn random_law<R: Rng>(size: usize, rng: &mut R) -> Vec<f64> {
    // Cubing spreads mass unevenly so near-zero conditionals occur.
    let raw: Vec<f64> = (0..size).map(|_| rng.gen::<f64>().powi(3) + 1e-6).collect();
    let z: f64 = raw.iter().sum();
    raw.iter().map(|v| v / z).collect()
}

fn random_measure<R: Rng>(alphabet: Alphabet, allow_laplace: bool, rng: &mut R) -> LabResult<MeasureRef> {
    let m = alphabet.size();
    let kind = rng.gen_range(0..if allow_laplace { 3 } else { 2 });
    Ok(match kind {
        0 => Arc::new(Iid::new(alphabet, random_law(m, rng))?),
        1 => {
            // Near-deterministic tables mix slowly, so start from the uniform law instead.
            let table = (0..m).map(|_| random_law(m, rng)).collect();
            Arc::new(Markov::new(alphabet, 1, table, vec![1.0 / m as f64; m])?)
        }
        _ => Arc::new(Laplace::new(alphabet)),
    })
}

pub fn pinsker_sweep(ctx: &Ctx) -> LabResult<Outcome> {
    let pairs: usize = ctx.param("pairs", 100)?;
    let steps: usize = ctx.param("steps", 100)?;
    let max_alphabet: usize = ctx.param("max_alphabet", 4)?;
    if max_alphabet < 2 {
        return Err(LabError::Config("params.max_alphabet must be at least 2".into()));
    }
    let seed = ctx.seed()?;
    let rows: Vec<(usize, String, String, usize, f64)> = (0..pairs as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = replica_rng(seed, i);
            let alphabet = Alphabet::new(rng.gen_range(2..=max_alphabet))?;
            let mu = random_measure(alphabet, false, &mut rng)?;
            let rho = random_measure(alphabet, true, &mut rng)?;
            let x = sample(mu.as_ref(), steps, &mut rng)?;
            let report = loss_series(mu.as_ref(), rho.as_ref(), x.symbols())?;
            let v = pinsker_check(&report);
            // Largest a^2 - 2 ln2 delta over steps and running averages.
            let margin = report
                .steps
                .iter()
                .map(|s| (s.a * s.a - 2.0 * LN_2 * s.delta).max(s.abar * s.abar - 2.0 * LN_2 * s.dbar))
                .fold(f64::NEG_INFINITY, f64::max);
            Ok((alphabet.size(), mu.label(), rho.label(), v.violations, margin))
        })
        .collect::<LabResult<_>>()?;
    let mut table = Table::new("pinsker", &["pair", "alphabet", "mu", "rho", "steps", "violations", "max_margin"]);
    let mut violations = 0;
    let mut margin = f64::NEG_INFINITY;
    for (i, (m, mu, rho, v, g)) in rows.into_iter().enumerate() {
        violations += v;
        margin = margin.max(g);
        table.push(row![i, m, mu, rho, steps, v, g]);
    }
    let checks = vec![
        Check::le(format!("pinsker:violations[{} steps]", pairs * steps), violations as f64, 0.0, 0.0),
        Check::le("pinsker:max(a^2-2ln2*delta)", margin, 0.0, 1e-12),
    ];
    Ok(Outcome { tables: vec![table], checks })
}
