use fracheat::subordinator::{EtaMethod, SubordinatorDensity};
use proptest::prelude::*;
use statrs::function::gamma::gamma;

#[test]
fn laplace_identity_grid() {
    for &a in &[0.3, 0.5, 0.7] {
        let d = SubordinatorDensity::new(a, 1e-9).unwrap();
        for &t in &[0.5, 1.0, 2.0] {
            for &l in &[0.0, 0.5, 1.0, 4.0] {
                let r = d.laplace_check(t, l).unwrap();
                assert!(r <= 1e-6, "alpha={a} t={t} lambda={l}: residual {r:e}");
            }
        }
    }
}

#[test]
fn laplace_examples() {
    let d = SubordinatorDensity::new(0.5, 1e-9).unwrap();
    assert!(d.laplace_check(1.0, 0.0).unwrap() <= 1e-8);
    let v = d.laplace_transform(1.0, 1.0).unwrap();
    assert!((v - 0.367_879_441_171_442_3).abs() <= 1e-6);
    let d = SubordinatorDensity::new(0.3, 1e-9).unwrap();
    let v = d.laplace_transform(2.0, 1.0).unwrap();
    assert!((v - 0.135_335_283_236_612_7).abs() <= 1e-6);
}

// E[S^{-γ}] = Γ(1+γ/α)/Γ(1+γ) for the standard one-sided stable law.
fn moment_oracle(a: f64, g: f64) -> f64 {
    gamma(1.0 + g / a) / gamma(1.0 + g)
}

#[test]
fn negative_moments() {
    let d = SubordinatorDensity::new(0.5, 1e-9).unwrap();
    let m = d.moment(0.5).unwrap();
    assert!((m - 1.128_379_167_095_512_6).abs() < 1e-8, "{m}");
    assert!((d.moment(0.0).unwrap() - 1.0).abs() < 1e-9);
    let d7 = SubordinatorDensity::new(0.7, 1e-9).unwrap();
    let m = d7.moment(1.0).unwrap();
    assert!((m - moment_oracle(0.7, 1.0)).abs() < 1e-8 * m);
    assert!(d7.moment(-0.8).is_err());
}

#[test]
fn moments_are_log_convex() {
    let d = SubordinatorDensity::new(0.3, 1e-9).unwrap();
    let gs: Vec<f64> = (0..8).map(|i| 0.25 * i as f64).collect();
    let lm: Vec<f64> = gs.iter().map(|&g| d.moment(g).unwrap().ln()).collect();
    for w in lm.windows(3) {
        assert!(w[0] + w[2] - 2.0 * w[1] >= -1e-9);
    }
    for (g, l) in gs.iter().zip(&lm) {
        assert!((l - moment_oracle(0.3, *g).ln()).abs() < 1e-7);
    }
}

#[test]
fn nonnegative_on_log_grid() {
    for &a in &[0.3, 0.5, 0.7] {
        let d = SubordinatorDensity::new(a, 1e-9).unwrap();
        for i in 0..=120 {
            let s = 10f64.powf(-6.0 + 0.1 * i as f64);
            assert!(d.eta(1.0, s).unwrap() >= 0.0);
        }
    }
}

#[test]
fn tail_sandwich() {
    for &a in &[0.3, 0.5, 0.7] {
        let d = SubordinatorDensity::new(a, 1e-9).unwrap();
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for &t in &[0.5, 1.0, 2.0] {
            let s0 = f64::powf(t, 1.0 / a);
            for i in 0..40 {
                let s = s0 * 10f64.powf(0.1 * i as f64);
                let v = s.powf(1.0 + a) * d.eta(t, s).unwrap() / t;
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        assert!(lo > 0.0 && hi / lo <= 10.0, "alpha={a}: {lo} {hi}");
        // u^{1+α}η_1(u) → Γ(1+α)sin(πα)/π
        let u: f64 = 1e20;
        let r = u.powf(1.0 + a) * d.eta1(u).unwrap() / d.tail_constant();
        assert!((r - 1.0).abs() < 1e-3, "{r}");
    }
}

#[test]
fn closed_form_value_and_methods() {
    let d = SubordinatorDensity::new(0.5, 1e-9).unwrap();
    let v = d.eta(1.0, 1.0).unwrap();
    assert!((v - 0.5 / std::f64::consts::PI.sqrt() * (-0.25f64).exp()).abs() < 1e-15);
    let s = SubordinatorDensity::with_method(0.5, EtaMethod::ContourInversion, 1e-9).unwrap();
    assert!((s.eta(1.0, 1.0).unwrap() - v).abs() < 1e-12);
}

proptest! {
    #[test]
    fn scaling_identity(a in 0.2f64..0.85, t in 0.1f64..5.0, s in 0.01f64..50.0) {
        let d = SubordinatorDensity::new(a, 1e-9).unwrap();
        let tau = t.powf(1.0 / a);
        let lhs = d.eta(t, s).unwrap();
        let rhs = d.eta1(s / tau).unwrap() / tau;
        prop_assert!((lhs - rhs).abs() <= 1e-15 * rhs.abs());
    }

    #[test]
    fn density_nonnegative(a in 0.2f64..0.85, lu in -4.0f64..6.0) {
        let d = SubordinatorDensity::new(a, 1e-9).unwrap();
        prop_assert!(d.eta1(10f64.powf(lu)).unwrap() >= 0.0);
    }
}
