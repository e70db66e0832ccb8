mod common;

use std::sync::Arc;

use approx::assert_abs_diff_eq;
use common::parse;
use mixpred::loss::*;
use mixpred::measures::*;
use mixpred::mixture::*;
use mixpred::nml::*;
use mixpred::Error;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn explicit(label: &str, ms: Vec<MeasureRef>) -> ModelClass {
    ModelClass::explicit(label, ms, None).unwrap()
}

fn dirac(p: &str) -> MeasureRef {
    Arc::new(Dirac::parse(Alphabet::BINARY, p).unwrap())
}

// ---------------------------------------------------------------------------
// Tables
// ---------------------------------------------------------------------------

#[test]
fn bernoulli_normalizers() {
    let t1 = nml_table(&SupOracle::Bernoulli, Alphabet::BINARY, 1).unwrap();
    assert_abs_diff_eq!(t1.c_n(), 2.0, epsilon = 1e-12);
    assert_abs_diff_eq!(t1.lambda(&[0]), 0.5, epsilon = 1e-12);
    let t2 = nml_table(&SupOracle::Bernoulli, Alphabet::BINARY, 2).unwrap();
    assert_abs_diff_eq!(t2.c_n(), 2.5, epsilon = 1e-12);
    assert_abs_diff_eq!(t2.lambda(&[0, 1]), 0.1, epsilon = 1e-12);

    // Closed form against a direct sum over ones-counts.
    for n in 1..=40u64 {
        let direct: f64 = (0..=n)
            .map(|k| {
                let (kf, nf) = (k as f64, n as f64);
                let sup = if k == 0 || k == n { 1.0 } else { (kf / nf).powf(kf) * (1.0 - kf / nf).powf(nf - kf) };
                statrs::function::factorial::binomial(n, k) * sup
            })
            .sum();
        assert!((bernoulli_log_cn(n) - direct.log2()).abs() < 1e-10, "n={n}");
        assert!(direct <= n as f64 + 1.0);
    }
}

#[test]
fn tables_normalize_and_rows_match() {
    for n in 1..=8 {
        for oracle in [SupOracle::Bernoulli, SupOracle::MarkovK(1)] {
            let t = nml_table(&oracle, Alphabet::BINARY, n).unwrap();
            let total: f64 = t.log_lambda().iter().map(|v| v.exp2()).sum();
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
            assert!(t.log_sup.iter().all(|&v| v <= 1e-12));
            assert!(t.c_n() >= 1.0);
            let rows = t.rows();
            assert_eq!(rows.len(), 1 << n);
            assert_abs_diff_eq!(rows.iter().map(|r| r.2).sum::<f64>(), 1.0, epsilon = 1e-12);
        }
    }
    let t = nml_table(&SupOracle::Bernoulli, Alphabet::TERNARY, 3).unwrap();
    assert_abs_diff_eq!(t.log_lambda().iter().map(|v| v.exp2()).sum::<f64>(), 1.0, epsilon = 1e-12);
}

#[test]
fn markov_sup_dominates_bernoulli_sup() {
    let b = nml_table(&SupOracle::Bernoulli, Alphabet::BINARY, 8).unwrap();
    let m = nml_table(&SupOracle::MarkovK(1), Alphabet::BINARY, 8).unwrap();
    for (x, y) in b.log_sup.iter().zip(&m.log_sup) {
        assert!(y + 1e-12 >= *x);
    }
}

#[test]
fn four_measure_example() {
    let class = four_measure_class().unwrap();
    let o = SupOracle::Finite(class);
    let t1 = nml_table(&o, Alphabet::BINARY, 1).unwrap();
    assert_abs_diff_eq!(t1.lambda(&[0]), 0.5, epsilon = 1e-12);
    assert_abs_diff_eq!(t1.lambda(&[1]), 0.5, epsilon = 1e-12);
    let t2 = nml_table(&o, Alphabet::BINARY, 2).unwrap();
    for x in ["00", "01", "11"] {
        assert_abs_diff_eq!(t2.lambda(&parse(x)), 1.0 / 3.0, epsilon = 1e-12);
    }
    assert_eq!(t2.lambda(&parse("10")), 0.0);
}

#[test]
fn conditional_pathology_is_log_three_quarters() {
    let p = nml_conditional_pathology().unwrap();
    assert_eq!(p.mu_conditional, vec![0.5, 0.5]);
    assert_abs_diff_eq!(p.lambda_conditional[0], 2.0 / 3.0, epsilon = 1e-12);
    assert_abs_diff_eq!(p.value, (0.75f64).log2(), epsilon = 1e-12);
    assert!(p.value < 0.0);
    // The conditionals of lambda do not sum to one.
    assert!(p.lambda_conditional.iter().sum::<f64>() > 1.0);
}

#[test]
fn singleton_class_reproduces_its_member() {
    let mu: MeasureRef = Arc::new(Markov::binary_order1(0.9, 0.2).unwrap());
    let o = SupOracle::Finite(explicit("one", vec![mu.clone()]));
    let t = nml_table(&o, Alphabet::BINARY, 6).unwrap();
    assert_abs_diff_eq!(t.log_cn, 0.0, epsilon = 1e-12);
    for_each_sequence(Alphabet::BINARY, 5, 1 << 10, |_, x| {
        if mu.joint_logprob(x).is_zero() {
            return;
        }
        let c = nml_conditional(&o, Alphabet::BINARY, x).unwrap();
        let m = mu.cond_dist(x).unwrap();
        assert!(signed_kl(&m, &c) >= -1e-12);
    })
    .unwrap();
}

#[test]
fn two_diracs_give_uniform_lambda() {
    let o = SupOracle::Finite(explicit("two", vec![dirac("0"), dirac("01(1)")]));
    let t = nml_table(&o, Alphabet::BINARY, 4).unwrap();
    assert_abs_diff_eq!(t.c_n(), 2.0, epsilon = 1e-12);
    assert_abs_diff_eq!(t.lambda(&parse("0000")), 0.5, epsilon = 1e-12);
    assert_abs_diff_eq!(t.lambda(&parse("0111")), 0.5, epsilon = 1e-12);
    for prefix in ["0", "00", "01", "011"] {
        let c = nml_conditional(&o, Alphabet::BINARY, &parse(prefix)).unwrap();
        for d in o_members(&o) {
            if let Ok(m) = d.cond_dist(&parse(prefix)) {
                if !d.joint_logprob(&parse(prefix)).is_zero() {
                    assert!(signed_kl(&m, &c) >= -1e-12);
                }
            }
        }
    }
}

fn o_members(o: &SupOracle) -> Vec<MeasureRef> {
    match o {
        SupOracle::Finite(c) => c.measures().to_vec(),
        _ => Vec::new(),
    }
}

#[test]
fn zero_probability_prefix_is_undefined() {
    let o = SupOracle::Finite(four_measure_class().unwrap());
    assert!(matches!(nml_conditional(&o, Alphabet::BINARY, &[1, 0]), Err(Error::UndefinedConditional { .. })));
}

#[test]
fn alphabet_mismatch_and_cap() {
    let o = SupOracle::Finite(four_measure_class().unwrap());
    assert!(nml_table(&o, Alphabet::TERNARY, 2).is_err());
    assert!(matches!(
        nml_table(&SupOracle::Bernoulli, Alphabet::BINARY, 30),
        Err(Error::EnumerationTooLarge { .. })
    ));
}

#[test]
fn normalizer_grows_under_inclusion() {
    let mut rng = replica_rng(404, 0);
    for _ in 0..10 {
        let pool: Vec<MeasureRef> = (0..8)
            .map(|_| match rng.gen_range(0..3) {
                0 => bernoulli(rng.gen_range(0.0..1.0)).unwrap(),
                1 => Arc::new(Markov::binary_order1(rng.gen_range(0.05..0.95), rng.gen_range(0.05..0.95)).unwrap()) as MeasureRef,
                _ => {
                    let head: Vec<Symbol> = (0..rng.gen_range(0..4)).map(|_| rng.gen_range(0..2)).collect();
                    Arc::new(Dirac::new(Alphabet::BINARY, head, vec![rng.gen_range(0..2)]).unwrap()) as MeasureRef
                }
            })
            .collect();
        let mut order: Vec<usize> = (0..pool.len()).collect();
        order.shuffle(&mut rng);
        let big = explicit("big", pool);
        let mut prev = 0.0;
        for size in 1..=8 {
            let sub = big.subset(&order[..size]).unwrap();
            let c = nml_table(&SupOracle::Finite(sub), Alphabet::BINARY, 7).unwrap().log_cn;
            assert!(c + 1e-12 >= prev);
            prev = c;
        }
    }
}

// ---------------------------------------------------------------------------
// The patched predictor
// ---------------------------------------------------------------------------

#[test]
fn rho_c_is_a_process_measure() {
    let rho = build_rho_c(&SupOracle::Bernoulli, Alphabet::BINARY, 10).unwrap();
    for n in [1, 5, 10, 12] {
        assert_abs_diff_eq!(common::total_mass_via_joint(&rho, n), 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(common::total_mass_via_conditionals(&rho, n), 1.0, epsilon = 1e-10);
    }
    assert!(build_rho_c(&SupOracle::Bernoulli, Alphabet::BINARY, 0).is_err());
}

#[test]
fn rho_c_bound_for_finite_classes() {
    let classes = vec![
        explicit("one", vec![Arc::new(Markov::binary_order1(0.9, 0.2).unwrap())]),
        four_measure_class().unwrap(),
        explicit(
            "mixed",
            vec![
                bernoulli(0.2).unwrap(),
                bernoulli(0.7).unwrap(),
                Arc::new(Markov::binary_order1(0.8, 0.3).unwrap()),
                dirac("01"),
            ],
        ),
    ];
    for class in classes {
        let o = SupOracle::Finite(class.clone());
        let rho = build_rho_c(&o, Alphabet::BINARY, 12).unwrap();
        for n in [2usize, 6, 12] {
            let log_cn = nml_table(&o, Alphabet::BINARY, n).unwrap().log_cn;
            let bound = rho_c_bound(log_cn, n);
            for mu in class.measures() {
                let loss = expected_cumulative_kl(mu.as_ref(), &rho, n, &Method::Enumerate).unwrap().value / n as f64;
                assert!(loss <= bound.derived + 1e-12, "{} n={n}: {loss} > {}", class.label, bound.derived);
            }
        }
    }
}

#[test]
fn singleton_bound_uses_unit_normalizer() {
    let b = rho_c_bound(0.0, 16);
    let w = 6.0 / (std::f64::consts::PI * std::f64::consts::PI);
    assert_abs_diff_eq!(b.derived, (8.0 - w.log2()) / 16.0, epsilon = 1e-12);
    assert_abs_diff_eq!(b.printed, (8.0 + w.log2()) / 16.0, epsilon = 1e-12);
}

#[test]
fn bernoulli_rho_c_matches_enumeration() {
    // Truncating at M components and renormalizing shifts the cumulative loss by log2 W_M.
    let m = 14;
    let rho = build_rho_c(&SupOracle::Bernoulli, Alphabet::BINARY, m).unwrap();
    let log_w = (1.0 - WeightScheme::Quadratic.tail_mass(m)).log2();
    for p in [0.3, 0.5, 0.95] {
        for n in [1usize, 4, 9] {
            let exact = expected_cumulative_kl(bernoulli(p).unwrap().as_ref(), &rho, n, &Method::Enumerate).unwrap().value;
            let fast = bernoulli_rho_c_loss(p, n, m).unwrap();
            assert_abs_diff_eq!(fast.per_step * n as f64 + log_w, exact, epsilon = 1e-9);
        }
    }
}

#[test]
fn bernoulli_rho_c_bound_up_to_256() {
    for n in [16usize, 64, 256] {
        for p in [0.3, 0.5, 0.9] {
            let r = bernoulli_rho_c_loss(p, n, 2 * n).unwrap();
            assert!(r.per_step <= r.bound.derived, "n={n} p={p}: {} > {}", r.per_step, r.bound.derived);
            assert!(r.dropped_mass > 0.0);
        }
    }
    assert!(bernoulli_rho_c_loss(0.5, 8, 4).is_err());
    assert!(bernoulli_rho_c_loss(1.5, 8, 8).is_err());
}

#[test]
fn all_diracs_make_the_bound_vacuous() {
    let n = 8;
    let mut diracs: Vec<MeasureRef> = Vec::new();
    for_each_sequence(Alphabet::BINARY, n, 1 << 10, |_, x| {
        diracs.push(Arc::new(Dirac::new(Alphabet::BINARY, x.to_vec(), vec![0]).unwrap()));
    })
    .unwrap();
    let t = nml_table(&SupOracle::Finite(explicit("all", diracs)), Alphabet::BINARY, n).unwrap();
    assert_abs_diff_eq!(t.log_cn, n as f64, epsilon = 1e-9);
    let b = rho_c_bound(t.log_cn, n);
    assert!(b.derived > 1.0 && b.printed > 1.0);
}

#[test]
fn periodic_witnesses() {
    let w = periodic_witness(Alphabet::BINARY, &parse("011")).unwrap();
    assert_abs_diff_eq!(common::total_mass_via_joint(&w, 5), 1.0, epsilon = 1e-12);
    // Stationary: the law of x_2.. equals the law of x_1..
    for_each_sequence(Alphabet::BINARY, 3, 16, |_, x| {
        let direct = w.joint_logprob(x).prob();
        let shifted: f64 = (0..2)
            .map(|a| {
                let mut y = vec![a];
                y.extend_from_slice(x);
                w.joint_logprob(&y).prob()
            })
            .sum();
        assert_abs_diff_eq!(direct, shifted, epsilon = 1e-12);
    })
    .unwrap();
    for n in [4usize, 6, 8] {
        let c = stationary_witness_log_cn(Alphabet::BINARY, n).unwrap();
        assert!(c >= n as f64 - (n as f64).log2() - 1e-9, "n={n}: {c}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn prop_log_ml_counts_matches_direct(counts in prop::collection::vec(0u64..20, 2..4)) {
        let n: u64 = counts.iter().sum();
        let direct: f64 = counts.iter().filter(|&&c| c > 0).map(|&c| c as f64 * (c as f64 / n as f64).log2()).sum();
        prop_assert!((log_ml_counts(&counts) - direct).abs() < 1e-9);
    }

    #[test]
    fn prop_bernoulli_sup_is_a_maximum(ones in 0u64..30, extra in 0u64..30, p in 0.0f64..=1.0) {
        let n = ones + extra;
        prop_assume!(n > 0);
        let at_p = if ones > 0 { ones as f64 * p.log2() } else { 0.0 } + if extra > 0 { extra as f64 * (1.0 - p).log2() } else { 0.0 };
        prop_assert!(bernoulli_log_sup(ones, n) + 1e-9 >= at_p);
    }
}
