use boussinesq_core::laws::{
    bump, catalog, check_h0_values, estimate_constants, eval_clarke, mollify, PiecewiseLaw,
};
use proptest::prelude::*;

const SQRT8: f64 = 2.0 * std::f64::consts::SQRT_2;

#[test]
fn clarke_hand_intervals() {
    let i = eval_clarke(&catalog::abs(), 0.0);
    assert_eq!((i.lo, i.hi), (-1.0, 1.0));
    let i = eval_clarke(&catalog::abs(), 2.0);
    assert_eq!((i.lo, i.hi), (1.0, 1.0));
    let (mu_s, mu_k, s0) = (0.5, 0.3, 0.4);
    let law = catalog::stick_slip_jump(mu_s, mu_k, s0);
    let i = eval_clarke(&law, s0);
    assert_eq!((i.lo, i.hi), (mu_k, mu_s));
    let i = eval_clarke(&law, -s0);
    assert_eq!((i.lo, i.hi), (-mu_s, -mu_k));
    let i = eval_clarke(&law, 0.0);
    assert_eq!((i.lo, i.hi), (-mu_s, mu_s));
}

/// Direct convolution `int rho(t) j'(s - t/m) dt` by a fine midpoint rule.
fn convolution_oracle(law: &PiecewiseLaw, m: f64, s: f64) -> f64 {
    let n = 200_000;
    let h = 2.0 / n as f64;
    (0..n)
        .map(|i| {
            let t = -1.0 + (i as f64 + 0.5) * h;
            bump(t) * law.derivative(s - t / m) * h
        })
        .sum()
}

#[test]
fn mollified_abs_examples() {
    for m in [1, 4, 8, 32] {
        let law = mollify(&catalog::abs(), m).unwrap();
        assert_eq!(law.derivative(0.0), 0.0);
        let r = 1.0 / m as f64;
        for s in [r, r + 1e-3, r + 0.7, 5.0] {
            assert!((law.derivative(s) - 1.0).abs() <= 1e-10, "m={m} s={s}");
        }
    }
}

#[test]
fn mollified_quadratic_is_linear() {
    let law = mollify(&catalog::quadratic(), 8).unwrap();
    assert_eq!(law.derivative(0.0), 0.0);
    for s in [-3.0, -0.1, 0.05, 0.5, 2.0, 7.5] {
        let d = law.derivative(s);
        assert!((d - s).abs() <= 1e-8, "s={s} got {d}");
        assert!((d - convolution_oracle(&catalog::quadratic(), 8.0, s)).abs() <= 1e-8);
    }
}

#[test]
fn mollified_laws_match_direct_convolution() {
    for name in ["stick-slip-ramp", "slip-weakening", "nonmonotone-flux", "stick-slip-jump"] {
        let base = catalog::by_name(name).unwrap();
        let law = mollify(&base, 8).unwrap();
        for s in [-1.3, -0.2, -0.01, 0.0, 0.03, 0.21, 0.5, 0.61, 1.05, 2.0] {
            let d = law.derivative(s);
            let o = convolution_oracle(&base, 8.0, s);
            assert!((d - o).abs() <= 2e-6, "{name} s={s}: {d} vs {o}");
        }
    }
}

/// Clarke hull of `j'` over `[s - r, s + r]` by dense sampling.
fn window_hull(law: &PiecewiseLaw, s: f64, r: f64) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..=64 {
        let x = s - r + 2.0 * r * i as f64 / 64.0;
        let c = eval_clarke(law, x);
        lo = lo.min(c.lo);
        hi = hi.max(c.hi);
    }
    for k in law.kinks() {
        if (k - s).abs() <= r {
            let c = eval_clarke(law, k);
            lo = lo.min(c.lo);
            hi = hi.max(c.hi);
        }
    }
    (lo, hi)
}

#[test]
fn mollified_support_symmetry_and_growth() {
    let m = 8;
    let r = 1.0 / m as f64;
    for name in catalog::NAMES {
        let base = catalog::by_name(name).unwrap();
        let law = mollify(&base, m).unwrap();
        let c0 = estimate_constants(&base, 10.0, 2001).unwrap().growth;
        let n = 10_000;
        for i in 0..n {
            let s = -3.0 + 6.0 * i as f64 / (n - 1) as f64;
            let d = law.derivative(s);
            let (lo, hi) = window_hull(&base, s, r);
            assert!(d >= lo - 1e-12 && d <= hi + 1e-12, "{name} s={s}: {d} outside [{lo}, {hi}]");
            assert!(d.abs() <= c0 * (1.0 + s.abs() + r) + 1e-12, "{name} s={s}: growth");
            if base.odd {
                assert_eq!(law.derivative(-s), -d, "{name} s={s}: symmetry");
            }
        }
    }
}

fn smooth_deviation(base: &PiecewiseLaw, m: u32, samples: &[f64]) -> f64 {
    let law = mollify(base, m).unwrap();
    samples
        .iter()
        .map(|&s| (law.derivative(s) - base.derivative(s)).abs())
        .fold(0.0, f64::max)
}

#[test]
fn doubling_m_shrinks_smooth_region_deviation() {
    let levels = [4, 8, 16, 32];
    // every sample is at least 0.3 away from the kinks, beyond all radii
    let weakening = catalog::slip_weakening(0.5, 0.3, 2.0);
    let samples: Vec<f64> = (0..200).map(|i| 0.3 + 2.7 * i as f64 / 199.0).collect();
    let dev: Vec<f64> = levels.iter().map(|&m| smooth_deviation(&weakening, m, &samples)).collect();
    assert!(dev[0] > 0.0);
    for w in dev.windows(2) {
        assert!(w[1] < w[0], "deviation not decreasing: {dev:?}");
    }

    // piecewise-linear derivative: zero deviation away from the kinks
    let ramp = catalog::stick_slip_ramp(0.5, 0.3, 0.2, 0.6);
    let samples = [0.9, 1.5, 2.5, -1.0];
    for &m in &levels[1..] {
        assert!(smooth_deviation(&ramp, m, &samples) <= 1e-12);
    }
}

#[test]
fn constant_estimator_examples() {
    let c = estimate_constants(&catalog::abs(), 10.0, 2001).unwrap();
    assert!((c.growth - 1.0).abs() <= 1e-12);
    assert_eq!(c.relaxed_monotonicity, 0.0);

    let c = estimate_constants(&catalog::quadratic(), 10.0, 2001).unwrap();
    assert!((c.growth - 10.0 / 11.0).abs() <= 1e-12);
    assert_eq!(c.relaxed_monotonicity, 0.0);

    let c = estimate_constants(&catalog::stick_slip_jump(0.5, 0.3, 0.4), 10.0, 2001).unwrap();
    assert!(c.downward_jump);
    assert!(c.relaxed_monotonicity.is_infinite());

    // linear drop 0.2 over 0.4: descent slope 0.5
    let c = estimate_constants(&catalog::stick_slip_ramp(0.5, 0.3, 0.2, 0.6), 10.0, 2001).unwrap();
    assert!(!c.downward_jump);
    assert!((c.relaxed_monotonicity - 0.5).abs() <= 1e-12);
    assert!((c.growth - 0.5).abs() <= 1e-12);
}

#[test]
fn h0_arithmetic_examples() {
    let r = check_h0_values(1.0, 0.0, 0.0, 10.0, 1.0, 1.0, 1.0);
    assert!(r.velocity.pass);
    assert_eq!(r.velocity.margin(), 10.0 - SQRT8);

    let r = check_h0_values(0.0, 0.0, 1.0, 1.0, 0.1, 1.0, 1.0);
    assert!(!r.temperature.pass);
    assert!(!r.passes());
    assert_eq!(r.temperature.rhs, SQRT8);

    let c0 = 0.75;
    let gs_sq = 0.5;
    let r = check_h0_values(c0, 0.0, 0.0, SQRT8 * c0 * gs_sq, 1.0, gs_sq, 1.0);
    assert_eq!(r.velocity.lhs, r.velocity.rhs);
    assert!(!r.velocity.pass);
}

fn any_catalog_law() -> impl Strategy<Value = PiecewiseLaw> {
    prop::sample::select(catalog::NAMES.to_vec()).prop_map(|n| catalog::by_name(n).unwrap())
}

proptest! {
    #[test]
    fn clarke_interval_holds_one_sided_limits(law in any_catalog_law(), s in -5.0f64..5.0) {
        let i = eval_clarke(&law, s);
        prop_assert!(i.lo <= i.hi);
        let (l, r) = law.one_sided(s);
        prop_assert!(i.lo <= l && l <= i.hi);
        prop_assert!(i.lo <= r && r <= i.hi);
    }

    #[test]
    fn mollified_value_in_window_hull(law in any_catalog_law(), s in -3.0f64..3.0, m in 1u32..64) {
        let d = mollify(&law, m).unwrap().derivative(s);
        let (lo, hi) = window_hull(&law, s, 1.0 / m as f64);
        prop_assert!(d >= lo - 1e-12 && d <= hi + 1e-12);
    }

    #[test]
    fn h0_is_strict_and_monotone_in_viscosity(c0 in 0.0f64..5.0, m1 in 0.0f64..5.0, g in 0.01f64..2.0, bump_up in 1e-9f64..10.0) {
        let threshold = (SQRT8 * c0).max(m1) * g;
        prop_assert!(!check_h0_values(c0, m1, 0.0, threshold, 1.0, g, 1.0).velocity.pass);
        prop_assert!(check_h0_values(c0, m1, 0.0, threshold + bump_up, 1.0, g, 1.0).velocity.pass);
    }
}
