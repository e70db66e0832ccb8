mod common;

use std::sync::Arc;

use approx::assert_abs_diff_eq;
use common::{h2, parse};
use mixpred::loss::*;
use mixpred::measures::*;
use mixpred::mixture::*;
use mixpred::Error;
use proptest::prelude::*;
use rand::Rng;

fn b(p: f64) -> MeasureRef {
    bernoulli(p).unwrap()
}

fn climbing() -> Independent {
    Independent::new(Alphabet::BINARY, "climb", Arc::new(|t| vec![1.0 / (t as f64 + 1.0), t as f64 / (t as f64 + 1.0)]))
}

// ---------------------------------------------------------------------------
// Per-step divergences
// ---------------------------------------------------------------------------

#[test]
fn kl_step_examples() {
    let l = Laplace::new(Alphabet::BINARY);
    assert_eq!(kl_step(&l, &l, &parse("0110")).unwrap(), 0.0);

    let ones = Dirac::parse(Alphabet::BINARY, "1").unwrap();
    let rho = climbing();
    for n in 1..30usize {
        let prefix = vec![1; n - 1];
        let d = kl_step(&ones, &rho, &prefix).unwrap();
        assert_abs_diff_eq!(d, ((n as f64 + 1.0) / n as f64).log2(), epsilon = 1e-12);
    }

    let d = kl_step(b(0.5).as_ref(), b(0.25).as_ref(), &[]).unwrap();
    assert_abs_diff_eq!(d, 0.5 + 0.5 * (2.0f64 / 3.0).log2(), epsilon = 1e-15);
    assert!((d - 0.2075).abs() < 1e-4);
}

#[test]
fn kl_conventions() {
    assert_eq!(kl_div(&[0.0, 1.0], &[0.5, 0.5]), 1.0);
    assert_eq!(kl_div(&[0.5, 0.5], &[1.0, 0.0]), f64::INFINITY);
    assert_eq!(abs_dist(&[1.0, 0.0], &[0.5, 0.5]), 1.0);
    assert!(signed_kl(&[0.5, 0.5], &[0.25, 0.75]) > 0.0);
}

#[test]
fn undefined_conditional_is_reported() {
    let d = Dirac::parse(Alphabet::BINARY, "0").unwrap();
    assert!(matches!(kl_step(&d, b(0.5).as_ref(), &[1]), Err(Error::UndefinedConditional { .. })));
}

// ---------------------------------------------------------------------------
// Expected cumulative loss
// ---------------------------------------------------------------------------

#[test]
fn self_loss_is_zero_for_every_method() {
    let l = Laplace::new(Alphabet::BINARY);
    for m in [Method::Enumerate, Method::Binomial, Method::monte_carlo(3)] {
        assert_abs_diff_eq!(expected_cumulative_kl(&l, &l, 10, &m).unwrap().value, 0.0, epsilon = 1e-12);
    }
}

#[test]
fn bernoulli_pair_is_n_times_divergence() {
    let (p, q): (f64, f64) = (0.3, 0.55);
    let oracle = p * (p / q).log2() + (1.0 - p) * ((1.0 - p) / (1.0f64 - q)).log2();
    for n in [1usize, 5, 12] {
        let e = expected_cumulative_kl(b(p).as_ref(), b(q).as_ref(), n, &Method::Enumerate).unwrap();
        assert_abs_diff_eq!(e.value, n as f64 * oracle, epsilon = 1e-10);
    }
    let e = expected_cumulative_kl(b(p).as_ref(), b(q).as_ref(), 5000, &Method::Binomial).unwrap();
    assert_abs_diff_eq!(e.value, 5000.0 * oracle, epsilon = 1e-7);
    // i.i.d. log-ratio has variance, so Monte Carlo agrees within a few standard errors.
    let e = expected_cumulative_kl(b(p).as_ref(), b(q).as_ref(), 200, &Method::monte_carlo(5)).unwrap();
    let se = e.std_error.unwrap();
    assert!(se > 0.0 && (e.value - 200.0 * oracle).abs() <= 4.0 * se);
}

#[test]
fn dirac_against_uniform_costs_one_bit_per_step() {
    let u = Iid::uniform(Alphabet::BINARY);
    for pattern in ["0", "1(0)", "0110(01)"] {
        let d = Dirac::parse(Alphabet::BINARY, pattern).unwrap();
        assert_eq!(expected_cumulative_kl(&d, &u, 12, &Method::Enumerate).unwrap().value, 12.0);
        assert_eq!(expected_cumulative_kl(&d, &u, 400, &Method::Support).unwrap().value, 400.0);
    }
}

#[test]
fn enumerate_and_binomial_agree() {
    let rhos: Vec<MeasureRef> = vec![
        laplace(Alphabet::BINARY),
        Arc::new(Kt::new(Alphabet::BINARY)),
        Arc::new(build_bernoulli_grid(7).unwrap().mixture().unwrap()),
        b(0.8),
    ];
    for p in [0.0, 0.15, 0.5, 0.9] {
        for rho in &rhos {
            for n in [1usize, 6, 13] {
                let e = expected_cumulative_kl(b(p).as_ref(), rho.as_ref(), n, &Method::Enumerate).unwrap().value;
                let c = expected_cumulative_kl(b(p).as_ref(), rho.as_ref(), n, &Method::Binomial).unwrap().value;
                assert!((e - c).abs() <= 1e-9, "p={p} {} n={n}: {e} vs {c}", rho.label());
            }
        }
    }
}

#[test]
fn inapplicable_methods_are_errors() {
    let m = Markov::binary_order1(0.9, 0.2).unwrap();
    assert!(matches!(
        expected_cumulative_kl(&m, b(0.5).as_ref(), 10, &Method::Binomial),
        Err(Error::MethodInapplicable(_))
    ));
    assert!(matches!(
        expected_cumulative_kl(b(0.5).as_ref(), b(0.5).as_ref(), 25, &Method::Enumerate),
        Err(Error::MethodInapplicable(_))
    ));
    assert!(expected_cumulative_kl(b(0.5).as_ref(), uniform(Alphabet::TERNARY).as_ref(), 3, &Method::Enumerate).is_err());
}

#[test]
fn infinite_loss_propagates() {
    let e = expected_cumulative_kl(b(0.5).as_ref(), b(1.0).as_ref(), 4, &Method::Enumerate).unwrap();
    assert_eq!(e.value, f64::INFINITY);
    let e = expected_cumulative_kl(b(0.5).as_ref(), b(1.0).as_ref(), 4, &Method::Binomial).unwrap();
    assert_eq!(e.value, f64::INFINITY);
}

#[test]
fn stepwise_form_equals_log_ratio_form() {
    let pairs: Vec<(MeasureRef, MeasureRef)> = vec![
        (Arc::new(Markov::binary_order1(0.9, 0.2).unwrap()), laplace(Alphabet::BINARY)),
        (b(0.3), Arc::new(Kt::new(Alphabet::BINARY))),
        (
            Arc::new(Iid::new(Alphabet::TERNARY, vec![0.2, 0.5, 0.3]).unwrap()),
            laplace(Alphabet::TERNARY),
        ),
        (Arc::new(climbing()), b(0.4)),
    ];
    for (mu, rho) in pairs {
        for n in 1..=7 {
            let a = expected_cumulative_kl(mu.as_ref(), rho.as_ref(), n, &Method::Enumerate).unwrap().value;
            let c = expected_cumulative_kl_stepwise(mu.as_ref(), rho.as_ref(), n).unwrap();
            assert!((a - c).abs() <= 1e-9, "{} vs {} n={n}", mu.label(), rho.label());
            assert!(a >= -1e-12);
        }
    }
}

#[test]
fn loss_vanishes_iff_measures_agree_on_the_horizon() {
    // Equal on X^3 but different afterwards.
    let a = Truncated::new(laplace(Alphabet::BINARY), 3, 0).unwrap();
    let c = Truncated::new(laplace(Alphabet::BINARY), 3, 1).unwrap();
    assert_abs_diff_eq!(expected_cumulative_kl(&a, &c, 3, &Method::Enumerate).unwrap().value, 0.0, epsilon = 1e-14);
    assert!(expected_cumulative_kl(&a, &c, 4, &Method::Enumerate).unwrap().value > 0.0);
}

// ---------------------------------------------------------------------------
// Worst case and regret
// ---------------------------------------------------------------------------

#[test]
fn worst_case_examples() {
    let l = laplace(Alphabet::BINARY);
    let single = ModelClass::explicit("one", vec![l.clone()], None).unwrap();
    let w = worst_case_loss(&single, l.as_ref(), 8, &Method::Enumerate).unwrap();
    assert_abs_diff_eq!(w.per_step, 0.0, epsilon = 1e-12);
    assert_eq!(w.caveat, "finite-class, finite-n");

    let n = 6;
    let mut diracs: Vec<MeasureRef> = Vec::new();
    for_each_sequence(Alphabet::BINARY, n, 1 << 10, |_, x| {
        diracs.push(Arc::new(Dirac::new(Alphabet::BINARY, x.to_vec(), vec![0]).unwrap()));
    })
    .unwrap();
    let all = ModelClass::explicit("all-diracs", diracs, None).unwrap();
    let w = worst_case_loss(&all, &Iid::uniform(Alphabet::BINARY), n, &Method::Enumerate).unwrap();
    assert_eq!(w.per_step, 1.0);
    assert!(w.per_member.iter().all(|&v| v == 1.0));
}

#[test]
fn typical_diracs_against_their_source() {
    let n = 5000;
    let src = Iid::bernoulli(1.0 / 3.0).unwrap();
    let diracs: Vec<MeasureRef> = (0..20u64)
        .map(|s| {
            let x = sample(&src, n, &mut replica_rng(77, s)).unwrap().into_symbols();
            Arc::new(Dirac::new(Alphabet::BINARY, x, vec![0]).unwrap()) as MeasureRef
        })
        .collect();
    let class = ModelClass::explicit("typical", diracs, None).unwrap();
    let w = worst_case_loss(&class, &src, n, &Method::Support).unwrap();
    assert!((w.per_step - h2(1.0 / 3.0)).abs() <= 0.03, "{}", w.per_step);
}

#[test]
fn regret_examples() {
    let nu = b(0.3);
    let l = laplace(Alphabet::BINARY);
    let r = regret(nu.as_ref(), l.as_ref(), l.as_ref(), 10, &Method::Enumerate).unwrap();
    assert_abs_diff_eq!(r.value, 0.0, epsilon = 1e-12);

    let comps = vec![b(0.2), l.clone(), b(0.9)];
    let mix = Mixture::from_scheme(comps, &WeightScheme::Telescoping).unwrap();
    for data in [b(0.05), b(0.5), Arc::new(Markov::binary_order1(0.9, 0.2).unwrap()) as MeasureRef] {
        for (k, mu) in mix.components().iter().enumerate() {
            let n = 12;
            let r = regret(data.as_ref(), mu.as_ref(), &mix, n, &Method::Enumerate).unwrap().value;
            assert!(r <= -mix.weights()[k].log2() / n as f64 + 1e-12);
        }
    }
}

// ---------------------------------------------------------------------------
// Total variation
// ---------------------------------------------------------------------------

#[test]
fn tv_examples() {
    let l = Laplace::new(Alphabet::BINARY);
    for m in 0..6 {
        assert_eq!(tv_conditional(&l, &l, &parse("01"), m).unwrap().value, 0.0);
    }
    let (reports, monotone) = tv_profile(b(0.5).as_ref(), b(0.1).as_ref(), &[], &[1, 5, 10, 15]).unwrap();
    assert!(monotone);
    let v: Vec<f64> = reports.iter().map(|r| r.value).collect();
    assert!(v.windows(2).all(|w| w[1] > w[0]), "{v:?}");
    assert_abs_diff_eq!(v[0], 0.4, epsilon = 1e-12);
    assert!(v[3] > 0.9 && v[3] <= 1.0);

    let d = Dirac::parse(Alphabet::BINARY, "0").unwrap();
    assert_eq!(tv_conditional(&d, b(0.5).as_ref(), &[1], 3).unwrap().value, 1.0);
}

#[test]
fn tv_shrinks_under_absolute_continuity() {
    let mu = b(0.3);
    let chi = b(0.8);
    let rho = Mixture::uniform(vec![mu.clone(), chi]).unwrap();
    let mut medians = Vec::new();
    for n in [10usize, 100, 1000] {
        let mut vals: Vec<f64> = (0..50u64)
            .map(|s| {
                let x = sample(mu.as_ref(), n, &mut replica_rng(31, s)).unwrap();
                tv_conditional(mu.as_ref(), &rho, x.symbols(), 8).unwrap().value
            })
            .collect();
        vals.sort_by(f64::total_cmp);
        medians.push(vals[25]);
    }
    assert!(medians.windows(2).all(|w| w[1] <= w[0]), "{medians:?}");
}

// ---------------------------------------------------------------------------
// d_inf
// ---------------------------------------------------------------------------

#[test]
fn d_inf_examples() {
    let m = Markov::binary_order1(0.9, 0.2).unwrap();
    assert_eq!(d_inf(&m, &m, 8).unwrap().value, 0.0);

    let a = Dirac::parse(Alphabet::BINARY, "0001(1)").unwrap();
    let c = Dirac::parse(Alphabet::BINARY, "0").unwrap();
    let r = d_inf(&a, &c, 6).unwrap();
    assert_eq!(r.value, f64::INFINITY);
    assert_eq!(r.divergence_step, Some(4));
}

#[test]
fn markov_context_bounds() {
    let pairs = [((0.9, 0.2), (0.7, 0.4)), ((0.5, 0.5), (0.6, 0.3)), ((0.99, 0.01), (0.9, 0.1))];
    for ((a1, b1), (a2, b2)) in pairs {
        let m1 = Markov::binary_order1(a1, b1).unwrap();
        let m2 = Markov::binary_order1(a2, b2).unwrap();
        let bound = markov_dinf_bound(&m1, &m2).unwrap();
        for n in 1..=12 {
            let v = d_inf(&m1, &m2, n).unwrap().value;
            assert!(v <= bound.corrected + 1e-12, "n={n}: {v} > {}", bound.corrected);
        }
        // Horizon k+1 is exactly the literal context quantity.
        assert_abs_diff_eq!(d_inf(&m1, &m2, 2).unwrap().value, bound.literal, epsilon = 1e-12);
    }
}

#[test]
fn literal_context_bound_can_fail_at_longer_horizons() {
    let m1 = Markov::binary_order1(0.9, 0.2).unwrap();
    let m2 = Markov::binary_order1(0.7, 0.4).unwrap();
    let bound = markov_dinf_bound(&m1, &m2).unwrap();
    assert!(d_inf(&m1, &m2, 6).unwrap().value > bound.literal);
}

#[test]
fn d_inf_is_symmetric_and_satisfies_the_triangle_inequality() {
    let mut rng = replica_rng(2, 0);
    for _ in 0..20 {
        let ms: Vec<Markov> = (0..3)
            .map(|_| Markov::binary_order1(rng.gen_range(0.05..0.95), rng.gen_range(0.05..0.95)).unwrap())
            .collect();
        let n = 7;
        let d = |i: usize, j: usize| d_inf(&ms[i], &ms[j], n).unwrap().value;
        assert_abs_diff_eq!(d(0, 1), d(1, 0), epsilon = 1e-12);
        assert!(d(0, 2) <= d(0, 1) + d(1, 2) + 1e-12);
    }
}

// ---------------------------------------------------------------------------
// Path series and Pinsker
// ---------------------------------------------------------------------------

#[test]
fn loss_series_running_averages() {
    let mu = Markov::binary_order1(0.9, 0.2).unwrap();
    let rho = Laplace::new(Alphabet::BINARY);
    let x = sample(&mu, 500, &mut replica_rng(6, 0)).unwrap();
    let r = loss_series(&mu, &rho, x.symbols()).unwrap();
    assert_eq!(r.steps.len(), 500);
    let mut sd = 0.0;
    let mut sa = 0.0;
    for s in &r.steps {
        sd += s.delta;
        sa += s.a;
        assert!((s.dbar - sd / s.step as f64).abs() <= 1e-12);
        assert!((s.abar - sa / s.step as f64).abs() <= 1e-12);
    }
    let cum = mu.joint_logprob(x.symbols()).value() - rho.joint_logprob(x.symbols()).value();
    assert_abs_diff_eq!(r.last().unwrap().cum_logloss, cum, epsilon = 1e-9);
    assert!(pinsker_check(&r).pass);
}

#[test]
fn pinsker_hand_cases() {
    let r = loss_series(b(1.0).as_ref(), b(0.5).as_ref(), &[0, 0, 0]).unwrap();
    let s = &r.steps[0];
    assert_eq!((s.a, s.delta), (1.0, 1.0));
    assert!(pinsker_check(&r).pass);
    let same = loss_series(b(0.4).as_ref(), b(0.4).as_ref(), &[0, 1]).unwrap();
    assert!(same.steps.iter().all(|s| s.delta == 0.0 && s.a == 0.0));
}

#[test]
fn pinsker_sweep_over_random_pairs() {
    let mut rng = replica_rng(1234, 0);
    let mut steps = 0;
    let mut violations = 0;
    while steps < 10_000 {
        let size = rng.gen_range(2..=4);
        let a = Alphabet::new(size).unwrap();
        let dist = |rng: &mut rand_chacha::ChaCha8Rng| {
            let v: Vec<f64> = (0..size).map(|_| rng.gen_range(0.001..1.0)).collect();
            let s: f64 = v.iter().sum();
            v.into_iter().map(|x| x / s).collect::<Vec<f64>>()
        };
        let mu = Iid::new(a, dist(&mut rng)).unwrap();
        let rho = Iid::new(a, dist(&mut rng)).unwrap();
        let x = sample(&mu, 100, &mut rng).unwrap();
        let r = loss_series(&mu, &rho, x.symbols()).unwrap();
        steps += r.steps.len();
        violations += pinsker_check(&r).violations;
    }
    assert_eq!(violations, 0);
}

// ---------------------------------------------------------------------------
// Contamination and adversarial sequences
// ---------------------------------------------------------------------------

#[test]
fn averaging_in_a_contaminant_costs_at_most_one_bit() {
    let mus: Vec<MeasureRef> = vec![b(0.3), Arc::new(Markov::binary_order1(0.9, 0.2).unwrap()), laplace(Alphabet::BINARY)];
    let rhos: Vec<MeasureRef> = vec![b(0.5), Arc::new(Kt::new(Alphabet::BINARY))];
    let chis: Vec<MeasureRef> = vec![b(0.0), b(0.99), Arc::new(Dirac::parse(Alphabet::BINARY, "01").unwrap())];
    for mu in &mus {
        for rho in &rhos {
            for chi in &chis {
                let mix = Mixture::uniform(vec![rho.clone(), chi.clone()]).unwrap();
                let n = 10;
                let a = expected_cumulative_kl(mu.as_ref(), &mix, n, &Method::Enumerate).unwrap().value;
                let c = expected_cumulative_kl(mu.as_ref(), rho.as_ref(), n, &Method::Enumerate).unwrap().value;
                assert!(a <= c + 1.0 + 1e-12);
            }
        }
    }
}

#[test]
fn adversarial_sequence_forces_one_bit_per_step() {
    let predictors: Vec<MeasureRef> = vec![
        laplace(Alphabet::BINARY),
        Arc::new(Kt::new(Alphabet::BINARY)),
        Arc::new(Markov::binary_order1(0.9, 0.2).unwrap()),
        Arc::new(build_bernoulli_grid(8).unwrap().mixture().unwrap()),
        b(0.5),
    ];
    for rho in &predictors {
        for n in 1..=20 {
            let (x, loss) = adversarial_sequence(rho.as_ref(), n).unwrap();
            assert_eq!(x.len(), n);
            assert!(loss >= n as f64 - 1e-9, "{} n={n}: {loss}", rho.label());
            assert_abs_diff_eq!(loss, path_loss(rho.as_ref(), &x), epsilon = 1e-9);
        }
        let (_, min_loss) = exhaustive_min(rho.as_ref(), 12).unwrap();
        assert!(min_loss >= 12.0 - 1e-9);
    }
}

// ---------------------------------------------------------------------------
// Properties
// ---------------------------------------------------------------------------

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn prop_pinsker_pointwise(p in prop::collection::vec(0.0f64..1.0, 3), q in prop::collection::vec(0.001f64..1.0, 3)) {
        let norm = |v: Vec<f64>| { let s: f64 = v.iter().sum(); if s == 0.0 { vec![1.0, 0.0, 0.0] } else { v.into_iter().map(|x| x / s).collect::<Vec<_>>() } };
        let (p, q) = (norm(p), norm(q));
        let a = abs_dist(&p, &q);
        let d = kl_div(&p, &q);
        prop_assert!(a * a <= 2.0 * std::f64::consts::LN_2 * d + 1e-12);
    }

    #[test]
    fn prop_expected_loss_nonnegative(p in 0.0f64..=1.0, q in 0.01f64..0.99, n in 1usize..=8) {
        let v = expected_cumulative_kl(b(p).as_ref(), b(q).as_ref(), n, &Method::Enumerate).unwrap().value;
        prop_assert!(v >= -1e-12);
        prop_assert!((v - n as f64 * binary_divergence(p, q)).abs() <= 1e-9);
    }
}
