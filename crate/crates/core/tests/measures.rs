mod common;

use std::sync::Arc;

use approx::assert_abs_diff_eq;
use common::{chain_rule_logprob, parse, total_mass_via_conditionals, total_mass_via_joint};
use mixpred::measures::*;
use mixpred::{Error, Mixture};
use proptest::prelude::*;

fn families() -> Vec<MeasureRef> {
    let b = Alphabet::BINARY;
    let t = Alphabet::TERNARY;
    vec![
        Arc::new(Iid::bernoulli(0.3).unwrap()),
        Arc::new(Iid::new(t, vec![0.2, 0.5, 0.3]).unwrap()),
        Arc::new(Laplace::new(b)),
        Arc::new(Laplace::new(t)),
        Arc::new(Kt::new(b)),
        Arc::new(Kt::new(t)),
        Arc::new(Markov::binary_order1(0.9, 0.2).unwrap()),
        Arc::new(
            Markov::stationary(t, 1, vec![vec![0.5, 0.25, 0.25], vec![0.1, 0.1, 0.8], vec![0.3, 0.3, 0.4]]).unwrap(),
        ),
        Arc::new(
            Markov::stationary(b, 2, vec![vec![0.9, 0.1], vec![0.4, 0.6], vec![0.5, 0.5], vec![0.2, 0.8]]).unwrap(),
        ),
        Arc::new(Independent::new(b, "ramp", Arc::new(|t| vec![1.0 / (t as f64 + 1.0), t as f64 / (t as f64 + 1.0)]))),
        Arc::new(Truncated::new(Arc::new(Laplace::new(b)), 3, 0).unwrap()),
        Arc::new(Mixture::uniform(vec![bernoulli(0.2).unwrap(), laplace(b), Arc::new(Kt::new(b))]).unwrap()),
    ]
}

// ---------------------------------------------------------------------------
// Alphabets, sequences, log-probabilities
// ---------------------------------------------------------------------------

#[test]
fn alphabet_bits_is_platform_log2() {
    for s in 2..10 {
        let a = Alphabet::new(s).unwrap();
        assert_eq!(a.bits(), (s as f64).log2());
        assert_eq!(a.size(), s);
    }
    assert!(matches!(Alphabet::new(1), Err(Error::InvalidAlphabet(1))));
}

#[test]
fn seq_rejects_symbols_outside_alphabet() {
    let b = Alphabet::BINARY;
    assert!(Seq::new(b, vec![0, 1, 2]).is_err());
    let s = Seq::parse(b, "0110").unwrap();
    assert_eq!(s.symbols(), &[0, 1, 1, 0]);
    assert_eq!(s.to_string(), "0110");
}

#[test]
fn logprob_encodes_zero_and_never_nan() {
    assert!(LogProb::from_prob(0.0).is_zero());
    assert_eq!(LogProb::from_prob(0.25).value(), -2.0);
    let z = LogProb::ZERO + LogProb::from_prob(0.5);
    assert!(z.is_zero());
    assert!(!z.value().is_nan());
    assert_eq!(log_sum_exp2(&[f64::NEG_INFINITY, f64::NEG_INFINITY]), f64::NEG_INFINITY);
    assert_abs_diff_eq!(log_sum_exp2(&[-1.0, -1.0]), 0.0, epsilon = 1e-15);
}

// ---------------------------------------------------------------------------
// Conditionals and joints
// ---------------------------------------------------------------------------

#[test]
fn laplace_conditional_after_011() {
    let d = Laplace::new(Alphabet::BINARY).cond_dist(&parse("011")).unwrap();
    assert_abs_diff_eq!(d[1], 3.0 / 5.0, epsilon = 1e-15);
    assert_abs_diff_eq!(d[0], 2.0 / 5.0, epsilon = 1e-15);
}

#[test]
fn bernoulli_conditional_ignores_prefix() {
    let m = Iid::bernoulli(0.3).unwrap();
    for prefix in ["", "0", "1111", "0101010"] {
        let d = m.cond_dist(&parse(prefix)).unwrap();
        assert_eq!(d, vec![0.3, 0.7]);
    }
}

#[test]
fn dirac_conditionals_and_undefined_continuation() {
    let m = Dirac::parse(Alphabet::BINARY, "0").unwrap();
    assert_eq!(m.cond_dist(&parse("0")).unwrap(), vec![1.0, 0.0]);
    assert!(matches!(m.cond_dist(&parse("01")), Err(Error::UndefinedConditional { .. })));
    let mut p = m.predictor();
    p.observe(1).unwrap();
    assert!(p.predict().is_err());
}

#[test]
fn joint_logprob_examples() {
    let u = Iid::uniform(Alphabet::BINARY);
    for x in ["000", "101", "111"] {
        assert_eq!(u.joint_logprob(&parse(x)).value(), -3.0);
    }
    let l = Laplace::new(Alphabet::BINARY);
    assert_abs_diff_eq!(l.joint_logprob(&parse("11")).value(), (1.0f64 / 3.0).log2(), epsilon = 1e-14);
    let b = Iid::bernoulli(0.3).unwrap();
    assert_abs_diff_eq!(b.joint_logprob(&parse("10")).value(), (0.7f64 * 0.3).log2(), epsilon = 1e-14);
}

#[test]
fn laplace_count_form_matches_sequential_product() {
    // P(x) = k! (n-k)! / (n+1)! for binary Laplace.
    let l = Laplace::new(Alphabet::BINARY);
    let x = parse("0110100111");
    let (n, k) = (10u32, 6u32);
    let fact = |m: u32| (1..=m).map(f64::from).product::<f64>();
    let closed = fact(k) * fact(n - k) / fact(n + 1);
    assert_abs_diff_eq!(l.joint_logprob(&x).value(), closed.log2(), epsilon = 1e-12);
    assert_abs_diff_eq!(l.count_logprob(&[4, 6]).unwrap(), closed.log2(), epsilon = 1e-12);
}

#[test]
fn every_family_obeys_the_chain_rule_and_normalizes() {
    for m in families() {
        let n = if m.alphabet().size() == 2 { 12 } else { 7 };
        let total = total_mass_via_joint(m.as_ref(), n);
        assert!((total - 1.0).abs() <= 1e-9, "{} sums to {total}", m.label());
        let via_cond = total_mass_via_conditionals(m.as_ref(), n.min(8));
        assert!((via_cond - 1.0).abs() <= 1e-9, "{} conditional mass {via_cond}", m.label());
        for_each_sequence(m.alphabet(), n.min(8), 1 << 20, |_, x| {
            let a = m.joint_logprob(x).value();
            let b = chain_rule_logprob(m.as_ref(), x);
            assert!(a == b || (a - b).abs() <= 1e-10, "{}: {a} vs {b} on {x:?}", m.label());
        })
        .unwrap();
    }
}

#[test]
fn conditionals_sum_to_one_within_relative_tolerance() {
    for m in families() {
        let mut p = m.predictor();
        for t in 0..20 {
            let d = p.predict().unwrap();
            let s: f64 = d.iter().sum();
            assert!((s - 1.0).abs() <= NORMALIZATION_TOL, "{} at {t}", m.label());
            let a = d.iter().enumerate().fold(0, |b, (i, &v)| if v > d[b] { i } else { b });
            p.observe(a).unwrap();
        }
    }
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

#[test]
fn sampling_examples() {
    let d = Dirac::parse(Alphabet::BINARY, "1(01)").unwrap();
    for seed in 0..5 {
        let s = sample(&d, 5, &mut replica_rng(seed, 0)).unwrap();
        assert_eq!(s.symbols(), d.prefix(5).as_slice());
    }
    let one = Iid::bernoulli(1.0).unwrap();
    assert_eq!(sample(&one, 4, &mut replica_rng(7, 0)).unwrap().symbols(), &[0, 0, 0, 0]);

    let fair = Iid::bernoulli(0.5).unwrap();
    let s = sample(&fair, 100_000, &mut replica_rng(20_240_101, 0)).unwrap();
    let zeros = s.symbols().iter().filter(|&&a| a == 0).count() as f64 / 1e5;
    assert!((0.49..=0.51).contains(&zeros), "frequency {zeros}");
}

#[test]
fn sampling_is_reproducible_per_stream() {
    let m = Laplace::new(Alphabet::TERNARY);
    let a = sample(&m, 200, &mut replica_rng(3, 9)).unwrap();
    let b = sample(&m, 200, &mut replica_rng(3, 9)).unwrap();
    let c = sample(&m, 200, &mut replica_rng(3, 10)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

// ---------------------------------------------------------------------------
// Markov
// ---------------------------------------------------------------------------

#[test]
fn order_zero_markov_is_bernoulli() {
    let m = Markov::new(Alphabet::BINARY, 0, vec![vec![0.3, 0.7]], vec![1.0]).unwrap();
    let b = Iid::bernoulli(0.3).unwrap();
    for_each_sequence(Alphabet::BINARY, 8, 1 << 10, |_, x| {
        assert_abs_diff_eq!(m.joint_logprob(x).value(), b.joint_logprob(x).value(), epsilon = 1e-12);
    })
    .unwrap();
}

#[test]
fn absorbing_markov_is_dirac_on_zeros() {
    let m = Markov::new(Alphabet::BINARY, 1, vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![1.0, 0.0]).unwrap();
    assert_eq!(m.joint_logprob(&[0; 20]).value(), 0.0);
    let mut x = vec![0; 20];
    x[13] = 1;
    assert!(m.joint_logprob(&x).is_zero());
}

#[test]
fn fair_markov_assigns_minus_n() {
    let m = Markov::new(Alphabet::BINARY, 2, vec![vec![0.5, 0.5]; 4], vec![0.25; 4]).unwrap();
    for_each_sequence(Alphabet::BINARY, 9, 1 << 10, |_, x| assert_eq!(m.joint_logprob(x).value(), -9.0)).unwrap();
}

#[test]
fn malformed_markov_tables_are_rejected() {
    let b = Alphabet::BINARY;
    assert!(Markov::new(b, 1, vec![vec![0.5, 0.5]], vec![0.5, 0.5]).is_err());
    assert!(Markov::new(b, 1, vec![vec![0.5, 0.6], vec![0.5, 0.5]], vec![0.5, 0.5]).is_err());
    assert!(Markov::new(b, 1, vec![vec![0.5, 0.5], vec![0.5, 0.5]], vec![1.0]).is_err());
}

#[test]
fn markov_conditional_depends_only_on_context() {
    let m = Markov::stationary(Alphabet::BINARY, 2, vec![vec![0.9, 0.1], vec![0.4, 0.6], vec![0.5, 0.5], vec![0.2, 0.8]])
        .unwrap();
    let a = m.cond_dist(&parse("0001")).unwrap();
    let b = m.cond_dist(&parse("1101")).unwrap();
    let c = m.cond_dist(&parse("01")).unwrap();
    assert_eq!(a, b);
    assert_eq!(a, c);
    assert_eq!(a, vec![0.4, 0.6]);
}

#[test]
fn stationary_markov_is_shift_invariant() {
    let t = Alphabet::TERNARY;
    let m = Markov::stationary(t, 1, vec![vec![0.5, 0.25, 0.25], vec![0.1, 0.1, 0.8], vec![0.3, 0.3, 0.4]]).unwrap();
    assert!(m.stationarity_residual() <= 1e-12);
    // P(x_{1..3} = a) against P(x_{1+k..3+k} = a) by marginalizing the first k symbols.
    for k in 1..=3 {
        for_each_sequence(t, 3, 1 << 10, |_, a| {
            let direct = m.joint_logprob(a).value().exp2();
            let mut shifted = 0.0;
            for_each_sequence(t, k, 1 << 10, |_, head| {
                let x: Vec<Symbol> = head.iter().chain(a).copied().collect();
                shifted += m.joint_logprob(&x).value().exp2();
            })
            .unwrap();
            assert!((direct - shifted).abs() <= 1e-9);
        })
        .unwrap();
    }
}

#[test]
fn stationary_law_solves_the_balance_equations() {
    // Binary order 1: pi_0 = b / (1 - a + b).
    let (a, b) = (0.9, 0.2);
    let m = Markov::binary_order1(a, b).unwrap();
    assert_abs_diff_eq!(m.initial()[0], b / (1.0 - a + b), epsilon = 1e-12);
}

// ---------------------------------------------------------------------------
// Chains
// ---------------------------------------------------------------------------

#[test]
fn stno_spec_invariants() {
    let spec = ChainSpec::new(ChainVariant::Stno, 10_000).unwrap();
    let total: f64 = spec.pi.iter().sum();
    assert!(total >= 1.0 - spec.eps_tail - 1e-12);
    assert!(spec.fixed_point_residual() <= 1e-12);
    for n in 1..50usize {
        let nf = n as f64;
        let closed = (1.0 - nf * nf / ((nf + 1.0) * (nf + 1.0))) / (nf * nf);
        assert_abs_diff_eq!(spec.first_return(n), closed, epsilon = 1e-15);
    }
}

#[test]
fn stno_first_state_mass_is_six_over_pi_squared() {
    // sum_n n f_n = sum_j 1/j^2 = pi^2/6; the series with its tail bound reaches 1e-10.
    let spec = ChainSpec::new(ChainVariant::Stno, 100).unwrap();
    let oracle = 6.0 / (std::f64::consts::PI * std::f64::consts::PI);
    assert!(spec.pi_first_error <= 1e-10);
    assert!((spec.pi_first() - oracle).abs() <= 1e-10, "{} vs {oracle}", spec.pi_first());
}

#[test]
fn stno1_stationary_law_is_geometric() {
    let spec = ChainSpec::new(ChainVariant::Stno1, 60).unwrap();
    for (j, &p) in spec.pi.iter().enumerate() {
        assert_abs_diff_eq!(p, (1.0 / 3.0) * (2.0f64 / 3.0).powi(j as i32), epsilon = 1e-15);
    }
    assert!(spec.fixed_point_residual() <= 1e-12);
}

#[test]
fn chain_dp_matches_path_enumeration() {
    let mut rng = replica_rng(11, 0);
    for j_max in 1..=6 {
        for n in 1..=6 {
            let out: Vec<Symbol> = (0..j_max + n + 1).map(|_| rand::Rng::gen_range(&mut rng, 0..2)).collect();
            let m = ChainMeasure::stno(&out, j_max).unwrap();
            for_each_sequence(Alphabet::BINARY, n, 1 << 10, |_, x| {
                let dp = m.joint_logprob(x).value().exp2();
                let brute = m.path_enumeration_prob(x);
                assert!((dp - brute).abs() <= 1e-12, "J={j_max} n={n} x={x:?}: {dp} vs {brute}");
            })
            .unwrap();
        }
    }
}

#[test]
fn stno_measure_bound_on_its_own_sequence() {
    let mut rng = replica_rng(5, 0);
    let pi1 = 6.0 / (std::f64::consts::PI * std::f64::consts::PI);
    for n in [5usize, 10, 20] {
        let x: Vec<Symbol> = (0..3 * n + 16).map(|_| rand::Rng::gen_range(&mut rng, 0..2)).collect();
        let m = ChainMeasure::stno(&x, 2 * n + 8).unwrap();
        // The measure emits x_j in state j, so any window x_{j..} is reachable.
        let lhs = -m.joint_lower_bound(&x[..n]);
        let rhs = -pi1.log2() + 2.0 * ((n + 1) as f64).log2();
        assert!(lhs <= rhs, "n={n}: {lhs} > {rhs}");
    }
}

#[test]
fn stno1_rate_on_its_own_sequence() {
    let mut rng = replica_rng(8, 0);
    let t: Vec<Symbol> = (0..128).map(|_| rand::Rng::gen_range(&mut rng, 0..2)).collect();
    let m = ChainMeasure::stno1(&t, 64).unwrap();
    let loss = -m.checked_joint_logprob(&t[..30]).unwrap().value();
    let target = 30.0 * 1.5f64.log2();
    assert!((loss - target).abs() <= 3.0, "{loss} vs {target}");
}

#[test]
fn chain_horizon_overflow_is_an_error() {
    let x = vec![0; 12];
    let m = ChainMeasure::stno(&x, 6).unwrap();
    assert_eq!(m.max_horizon(), 6);
    assert!(matches!(m.checked_joint_logprob(&[0; 7]), Err(Error::ChainHorizonExceeded { .. })));
    assert!(ChainMeasure::stno(&[0; 3], 6).is_err());
}

// ---------------------------------------------------------------------------
// Properties
// ---------------------------------------------------------------------------

fn arb_dist(size: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, size).prop_map(|v| {
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn prop_chain_rule_for_random_markov(
        size in 2usize..=3,
        seed in any::<u64>(),
        len in 0usize..=12,
    ) {
        let a = Alphabet::new(size).unwrap();
        let mut rng = replica_rng(seed, 0);
        let table: Vec<Vec<f64>> = (0..size)
            .map(|_| {
                let v: Vec<f64> = (0..size).map(|_| rand::Rng::gen_range(&mut rng, 0.05..1.0)).collect();
                let s: f64 = v.iter().sum();
                v.into_iter().map(|x| x / s).collect()
            })
            .collect();
        let m = Markov::stationary(a, 1, table).unwrap();
        let x: Vec<Symbol> = (0..len).map(|_| rand::Rng::gen_range(&mut rng, 0..size)).collect();
        let direct = m.joint_logprob(&x).value();
        let chained = chain_rule_logprob(&m, &x);
        prop_assert!((direct - chained).abs() <= 1e-10);
    }

    #[test]
    fn prop_iid_normalizes(probs in arb_dist(3), n in 0usize..=7) {
        let m = Iid::new(Alphabet::TERNARY, probs).unwrap();
        prop_assert!((total_mass_via_joint(&m, n) - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn prop_dirac_is_one_on_its_prefix(head in prop::collection::vec(0usize..3, 0..4),
                                      cycle in prop::collection::vec(0usize..3, 1..4), n in 0usize..12) {
        let d = Dirac::new(Alphabet::TERNARY, head, cycle).unwrap();
        prop_assert_eq!(d.joint_logprob(&d.prefix(n)).value(), 0.0);
        prop_assert!((total_mass_via_joint(&d, n.min(7)) - 1.0).abs() <= 1e-12);
    }
}
