use std::sync::Arc;

use approx::assert_abs_diff_eq;
use mixpred::cover::*;
use mixpred::measures::*;
use mixpred::mixture::*;
use mixpred::Error;
use proptest::prelude::*;

fn dirac(p: &str) -> MeasureRef {
    Arc::new(Dirac::parse(Alphabet::BINARY, p).unwrap())
}

fn grid_plus_diracs() -> ModelClass {
    let grid = build_bernoulli_grid(8).unwrap();
    grid.extended(vec![dirac("0"), dirac("1"), dirac("01"), dirac("0010(110)")], vec![1.0; 4]).unwrap()
}

fn fair() -> MeasureRef {
    bernoulli(0.5).unwrap()
}

// ---------------------------------------------------------------------------
// Bands
// ---------------------------------------------------------------------------

#[test]
fn band_counts() {
    assert_eq!(band_count(1), 1);
    assert_eq!(band_count(3), 3);
    assert_eq!(band_count(16), 8);
    assert_eq!(band_count(256), 86);
    for n in 4..200 {
        let lg = (n as f64).log2().log2();
        assert_eq!(band_count(n), (n as f64 / lg).ceil() as usize);
    }
}

#[test]
fn bands_tile_the_ratio_axis() {
    for n in 2..=12 {
        let k = band_count(n);
        for m_bits in [1.0, 3f64.log2()] {
            let (first, _) = band_interval(1, k, n, m_bits);
            let (_, last) = band_interval(k, k, n, m_bits);
            assert_abs_diff_eq!(first, -(n as f64).log2() / n as f64, epsilon = 1e-15);
            assert_abs_diff_eq!(last, m_bits + 1.0 / n as f64, epsilon = 1e-15);
            for i in 1..k {
                assert_abs_diff_eq!(band_interval(i, k, n, m_bits).1, band_interval(i + 1, k, n, m_bits).0, epsilon = 1e-15);
            }
        }
    }
}

proptest! {
    #[test]
    fn prop_band_of_lands_inside_its_interval(n in 2usize..=12, t in 0.0f64..=1.0) {
        let k = band_count(n);
        let (lo, hi) = (band_interval(1, k, n, 1.0).0, band_interval(k, k, n, 1.0).1);
        let ratio = lo + t * (hi - lo);
        let i = band_of(ratio, k, 1.0);
        let (a, b) = band_interval(i, k, n, 1.0);
        prop_assert!(ratio >= a - 1e-12 && ratio <= b + 1e-12);
    }
}

#[test]
fn bound_ingredients() {
    let n = 12;
    let k = band_count(n);
    let w = main_theorem_normalizer();
    let nf = n as f64;
    let direct = 3.0 * w.log2()
        - (4.0 * 4.0 * nf.powi(5) * (k as f64).powi(3) * nf.log2().powi(2) * (k as f64).log2().powi(2)).log2();
    assert_abs_diff_eq!(log_b_n(n, k, 1.0), direct, epsilon = 1e-9);
    let w_n = WeightScheme::MainTheorem.weight(n);
    let rhs = nf / k as f64 - direct + 4.0 - (2.0 / nf) * (w_n.log2() - 1.0) + 0.5;
    assert_abs_diff_eq!(close_bound(n, 1.0), rhs, epsilon = 1e-9);
}

// ---------------------------------------------------------------------------
// Construction
// ---------------------------------------------------------------------------

#[test]
fn singleton_class() {
    let mu: MeasureRef = Arc::new(Markov::binary_order1(0.9, 0.2).unwrap());
    let class = ModelClass::explicit("one", vec![mu], None).unwrap();
    let res = build_cover(&class, fair(), &[4, 8]).unwrap();
    assert_eq!(res.nu.len(), 1);
    for n in [4, 8] {
        let c = certify_bound(&res, 0, n).unwrap();
        assert!(c.pass);
        assert!(c.loss_nu <= -res.member_weights[0].log2() + 1e-12);
    }
}

#[test]
fn two_diracs_against_uniform() {
    let class = ModelClass::explicit("two", vec![dirac("0"), dirac("1")], None).unwrap();
    let res = build_cover(&class, uniform(Alphabet::BINARY), &[4]).unwrap();
    let h = res.horizon(4).unwrap();
    let k = h.k;
    let top: Vec<usize> = h.selections.iter().filter(|s| s.band == k).map(|s| s.member).collect();
    assert_eq!(top, vec![0, 1]);
    assert!(h.selections.iter().all(|s| s.band == k));
    for j in 0..2 {
        let c = certify_bound(&res, j, 4).unwrap();
        assert!(c.slack < 0.0 && c.pass, "{c:?}");
        assert_abs_diff_eq!(c.loss_rho, 4.0, epsilon = 1e-12);
    }
}

#[test]
fn grid_plus_diracs_certifies() {
    let class = grid_plus_diracs();
    let res = build_cover(&class, fair(), &[8, 12]).unwrap();
    assert!(!res.replaced);
    assert!(res.prior_mass > 0.0 && res.prior_mass <= 1.0);
    for n in [8, 12] {
        let h = res.horizon(n).unwrap();
        assert!(h.checks.iter().all(|c| c.pass), "{:?}", h.checks);
        for j in 0..class.len() {
            let c = certify_bound(&res, j, n).unwrap();
            assert!(c.pass, "{c:?}");
        }
        assert!(res.pathwise_check(n).unwrap().pass);
    }
}

#[test]
fn markov_tail_matches_independent_enumeration() {
    let class = grid_plus_diracs();
    let n = 10;
    let res = build_cover(&class, fair(), &[n]).unwrap();
    let h = res.horizon(n).unwrap();
    for (j, mu) in class.measures().iter().enumerate() {
        let mut outside = 0.0;
        for_each_sequence(Alphabet::BINARY, n, 1 << 12, |_, x| {
            let m = mu.joint_logprob(x).prob();
            if m > 0.0 && m < 2f64.powi(-(n as i32)) / n as f64 {
                outside += m;
            }
        })
        .unwrap();
        assert_abs_diff_eq!(h.outside_mass[j], outside, epsilon = 1e-12);
        assert!(outside <= 1.0 / n as f64);
    }
}

#[test]
fn greedy_masses_never_increase() {
    let class = grid_plus_diracs();
    let res = build_cover(&class, Arc::new(Laplace::new(Alphabet::BINARY)), &[6, 9]).unwrap();
    for h in &res.horizons {
        for band in 1..=h.k {
            let ms: Vec<&Selection> = h.selections.iter().filter(|s| s.band == band).collect();
            for (idx, s) in ms.iter().enumerate() {
                assert_eq!(s.l, idx + 1);
            }
            assert!(ms.windows(2).all(|w| w[1].mass <= w[0].mass + 1e-15));
        }
        assert!(h.regularizer.iter().sum::<f64>() > 0.999);
    }
}

#[test]
fn unbounded_reference_is_replaced() {
    let class = ModelClass::explicit("b", vec![bernoulli(0.5).unwrap(), bernoulli(0.9).unwrap()], None).unwrap();
    let res = build_cover(&class, bernoulli(0.01).unwrap(), &[6]).unwrap();
    assert!(res.replaced);
    assert_eq!(res.replacement_slack, 1.0);
    for j in 0..2 {
        assert!(certify_bound(&res, j, 6).unwrap().pass);
    }
}

#[test]
fn errors() {
    let class = grid_plus_diracs();
    let res = build_cover(&class, fair(), &[5]).unwrap();
    assert!(matches!(certify_bound(&res, 0, 6), Err(Error::UncertifiedHorizon(6))));
    assert!(certify_bound(&res, 99, 5).is_err());
    assert!(matches!(build_cover(&class, fair(), &[21]), Err(Error::EnumerationTooLarge { .. })));
    assert!(build_cover(&class, fair(), &[]).is_err());
    assert!(build_cover(&class, uniform(Alphabet::TERNARY), &[3]).is_err());
}
