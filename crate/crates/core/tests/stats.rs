mod support;

use argrid_core::stats::{adjust, differential_report, t_test, Correction, Tail, TTestVariant};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};

fn subset(a: &[bool], b: &[bool]) -> bool {
    a.iter().zip(b).all(|(&x, &y)| !x || y)
}

#[test]
fn rejection_sets_nest_on_211_cells() {
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cells = support::simulated_cells(&mut rng, 211, 100);
        let report = differential_report(&cells, TTestVariant::Welch, Tail::BGreater, 0.05).unwrap();
        assert_eq!(report.m, 211);
        let flags = |c: Correction| -> Vec<bool> { report.cells.iter().map(|t| t.reject[&c]).collect() };
        let (none, bonf, holm, hoch, bh) = (
            flags(Correction::None),
            flags(Correction::Bonferroni),
            flags(Correction::Holm),
            flags(Correction::Hochberg),
            flags(Correction::Bh),
        );
        assert!(subset(&bonf, &holm) && subset(&holm, &none));
        assert!(subset(&bonf, &bh) && subset(&bh, &none));
        assert!(subset(&holm, &hoch));
        let n = |c| report.rejection_count(c);
        assert!(n(Correction::Bonferroni) <= n(Correction::Bh));
        assert!(n(Correction::Bh) <= n(Correction::None));
        assert!(n(Correction::Bonferroni) > 0, "seed {seed}: no signal detected");
    }
}

#[test]
// The pooled test is exact for equal-variance normal samples, so its
// Bonferroni family-wise error stays at the nominal level.
fn bonferroni_controls_familywise_error_under_the_null() {
    let trials = 300;
    let mut any_rejection = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..trials {
        let cells = support::simulated_cells(&mut rng, 211, 0);
        let report = differential_report(&cells, TTestVariant::StudentPooled, Tail::BGreater, 0.05).unwrap();
        if report.rejection_count(Correction::Bonferroni) > 0 {
            any_rejection += 1;
        }
    }
    // nominal 5%; three binomial standard errors above
    assert!((any_rejection as f64) / (trials as f64) < 0.05 + 3.0 * (0.05f64 * 0.95 / trials as f64).sqrt());
}

#[test]
fn four_pvalue_example() {
    let p = [0.01, 0.02, 0.03, 0.04];
    let n = |c| adjust(&p, c, 0.05).unwrap().rejections();
    assert_eq!(
        [n(Correction::Bonferroni), n(Correction::Holm), n(Correction::Hochberg), n(Correction::Bh)],
        [1, 1, 4, 4]
    );
}

#[test]
fn identical_samples_give_zero_t() {
    let xs = [3.1, 2.7, 5.5, 4.0, 3.3];
    for variant in [TTestVariant::Welch, TTestVariant::StudentPooled] {
        let r = t_test(&xs, &xs, variant, Tail::TwoSided).unwrap();
        assert_eq!((r.t, r.p), (0.0, 1.0));
    }
}

#[test]
fn welch_example_matches_reference() {
    let a = [10.0, 11.0, 12.0, 13.0];
    let b = [14.0, 15.0, 16.0, 17.0];
    let r = t_test(&a, &b, TTestVariant::Welch, Tail::TwoSided).unwrap();
    // t = -4 / sqrt(5/12 + 5/12)
    assert!((r.t - -4.0 / (10.0f64 / 12.0).sqrt()).abs() < 1e-12);
    assert!((r.df - 6.0).abs() < 1e-12);
    let want = 2.0 * StudentsT::new(0.0, 1.0, 6.0).unwrap().cdf(r.t);
    assert!((r.p - want).abs() < 1e-12);
    assert!((r.p - 0.004659214943993928).abs() < 1e-10);
    let swapped = t_test(&b, &a, TTestVariant::Welch, Tail::TwoSided).unwrap();
    assert_eq!((swapped.t, swapped.p), (-r.t, r.p));
}

fn sample() -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-10.0f64..10.0, 2..30)
}

proptest! {
    #[test]
    fn t_test_p_values_agree_with_statrs(a in sample(), b in sample(), pooled in any::<bool>()) {
        let variant = if pooled { TTestVariant::StudentPooled } else { TTestVariant::Welch };
        let r = t_test(&a, &b, variant, Tail::TwoSided);
        prop_assume!(r.is_ok());
        let r = r.unwrap();
        let dist = StudentsT::new(0.0, 1.0, r.df).unwrap();
        let want = 2.0 * dist.cdf(-r.t.abs());
        prop_assert!((r.p - want).abs() < 1e-9, "p {} vs {}", r.p, want);
        let upper = t_test(&a, &b, variant, Tail::AGreater).unwrap();
        prop_assert!((upper.p - (1.0 - dist.cdf(r.t))).abs() < 1e-9);
    }

    #[test]
    fn adjusted_p_is_monotone_in_raw_p(ps in proptest::collection::vec(0.0f64..=1.0, 1..80)) {
        for method in Correction::ALL {
            let adj = adjust(&ps, method, 0.05).unwrap();
            for i in 0..ps.len() {
                prop_assert!(adj.p_adjusted[i] >= ps[i] - 1e-15);
                prop_assert!(adj.p_adjusted[i] <= 1.0);
                for j in 0..ps.len() {
                    if ps[i] < ps[j] {
                        prop_assert!(adj.p_adjusted[i] <= adj.p_adjusted[j]);
                    }
                }
            }
        }
        prop_assert_eq!(adjust(&ps, Correction::None, 0.05).unwrap().p_adjusted, ps);
    }

    #[test]
    fn permuting_cells_permutes_the_report(seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cells = support::simulated_cells(&mut rng, 40, 15);
        let mut shuffled = cells.clone();
        shuffled.shuffle(&mut rng);
        let a = differential_report(&cells, TTestVariant::Welch, Tail::BGreater, 0.05).unwrap();
        let b = differential_report(&shuffled, TTestVariant::Welch, Tail::BGreater, 0.05).unwrap();
        prop_assert_eq!(&a.rejections, &b.rejections);
        for t in &b.cells {
            let orig = a.cells.iter().find(|c| c.cell_id == t.cell_id).unwrap();
            prop_assert_eq!(orig, t);
        }
    }
}
