use fracheat::estimates::*;
use fracheat::frackernel::FracHeatOperator;
use fracheat::quad;
use fracheat::space::{HeatKernelModel, MetricMeasureSpace, QuadratureGrid};
use fracheat::Error;
use std::f64::consts::PI;

fn op(n: usize, alpha: f64, radius: f64, h: f64) -> FracHeatOperator {
    let sp = MetricMeasureSpace::euclidean(n).unwrap();
    let model = HeatKernelModel::exact_gaussian(&sp).unwrap();
    let grid = QuadratureGrid::new(&sp, radius, h).unwrap();
    FracHeatOperator::new(alpha, model, grid, 1e-10).unwrap()
}

fn h1_op(alpha: f64) -> FracHeatOperator {
    let sp = MetricMeasureSpace::heisenberg();
    let model = HeatKernelModel::model_gauss_gauge(&sp, 1.0).unwrap();
    let grid = QuadratureGrid::new(&sp, 1.0, 0.5).unwrap();
    FracHeatOperator::new(alpha, model, grid, 1e-10).unwrap()
}

#[test]
fn poisson_upper_envelope() {
    let o = op(1, 0.5, 1.0, 0.5);
    let r = verify_upper_envelope(&o, &EnvelopeGrid::default()).unwrap();
    assert!((r.sup - 2.0 / PI).abs() < 1e-3, "{}", r.sup);
    assert!(r.refine_delta <= 1e-3);
    let (t, d) = r.argmax;
    assert!((d / t - 1.0).abs() < 1e-2);
    for t in [0.1, 1.0, 7.0] {
        let ratio = o.profile(t, 0.0) * t.powi(2) / t;
        assert!((ratio - 1.0 / PI).abs() < 1e-9);
    }
}

#[test]
fn poisson_lower_envelope() {
    let o = op(1, 0.5, 1.0, 0.5);
    let r = verify_lower_envelope(&o, &EnvelopeGrid::default()).unwrap();
    assert!((r.inf - 1.0 / PI).abs() < 1e-3, "{}", r.inf);
    assert!(r.sup >= r.inf && r.inf > 0.0);
    assert!(r.refine_delta <= 1e-3);
}

#[test]
fn lower_envelope_needs_a4() {
    let mut o = op(1, 0.5, 1.0, 0.5);
    o.model.flags.a4 = false;
    assert!(matches!(verify_lower_envelope(&o, &EnvelopeGrid::default()), Err(Error::Precondition(_))));
    o.model.flags.a2 = false;
    assert!(matches!(verify_time_derivative_bound(&o, &EnvelopeGrid::default()), Err(Error::Precondition(_))));
}

#[test]
fn heisenberg_lower_envelope_positive() {
    let o = h1_op(0.5);
    let r = verify_lower_envelope(&o, &EnvelopeGrid::default()).unwrap();
    assert!(r.inf > 0.0 && r.sup >= r.inf);
    assert!(r.refine_delta < 0.1);
    let u = verify_upper_envelope(&o, &EnvelopeGrid::default()).unwrap();
    assert!(u.sup.is_finite() && u.refine_delta < 0.1);
}

#[test]
fn poisson_time_derivative_bound() {
    let o = op(1, 0.5, 1.0, 0.5);
    let r = verify_time_derivative_bound(&o, &EnvelopeGrid::default()).unwrap();
    // |x²−1|(1+x)²/(π(1+x²)²) in x = d/t, maximized independently.
    let g = |x: f64| (x * x - 1.0).abs() * (1.0 + x).powi(2) / (PI * (1.0 + x * x).powi(2));
    let (x, gmax) = quad::golden_max(g, 1.5, 20.0, 1e-12);
    assert!((gmax - 0.4132).abs() < 1e-3 && (x - 4.0).abs() < 0.5, "{gmax} at {x}");
    assert!((r.sup - gmax).abs() < 1e-6, "{} vs {gmax}", r.sup);
    assert!(r.refine_delta < 1e-3);
    // t → 0⁺ at d = 1.
    let t = 1e-4;
    let v = o.time_derivative_profile(t, 1.0).abs() * (t + 1.0).powi(2);
    assert!((v - 1.0 / PI).abs() < 1e-3);
    assert!(o.time_derivative_profile(1.0, 1.0).abs() < 1e-9);
}

#[test]
fn poisson_frac_derivative_bound() {
    let o = op(1, 0.5, 1.0, 0.5);
    let grid = EnvelopeGrid { nt: 3, nrho: 61, ..EnvelopeGrid::default() };
    let r = verify_frac_derivative_bound(&o, 1.0, &grid).unwrap();
    // Γ(2)/π · (t²+d²)^{−1} cos(2φ) · (t+d)²: 1/π at d = 0, same sup as |∂_tK|.
    let fp = o.frac_power(1.0).unwrap();
    for t in [0.1, 1.0, 10.0] {
        assert!((fp.profile(&o, t, 0.0) * t * t - 1.0 / PI).abs() < 1e-8);
    }
    let g = |x: f64| (x * x - 1.0).abs() * (1.0 + x).powi(2) / (PI * (1.0 + x * x).powi(2));
    let (_, gmax) = quad::golden_max(g, 1.5, 20.0, 1e-12);
    assert!((r.sup - gmax).abs() < 1e-6, "{}", r.sup);
    let r = verify_frac_derivative_bound(&o, 0.6, &grid).unwrap();
    assert!(r.sup.is_finite() && r.refine_delta < 0.1);
    assert!(matches!(verify_frac_derivative_bound(&o, 1.2, &grid), Err(Error::Input(_))));
}

#[test]
fn frac_bound_small_theta_approaches_kernel() {
    let o = op(1, 0.5, 1.0, 0.5);
    let grid = EnvelopeGrid { nt: 3, nrho: 61, ..EnvelopeGrid::default() };
    let r = verify_frac_derivative_bound(&o, 0.05, &grid).unwrap();
    // θ = 0: K·(t+d) = (1+x)/(π(1+x²)), max at x = √2 − 1.
    let (_, k0) = quad::golden_max(|x| (1.0 + x) / (PI * (1.0 + x * x)), 0.0, 2.0, 1e-12);
    assert!((r.sup / k0 - 1.0).abs() < 0.1, "{} vs {k0}", r.sup);
}

#[test]
fn young_identity_and_gaussian() {
    let n = 40;
    let w = vec![1.0; n];
    let id: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| f64::from(i == j)).collect()).collect();
    let r = verify_young(&id, &w, 1.0, 2.0, 2.0, 20, 1).unwrap();
    assert!((r.max_ratio - 1.0).abs() < 1e-12 && (r.bound - 1.0).abs() < 1e-12);

    let h = 0.1;
    let w = vec![h; n];
    let g: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| (-(((i as f64 - j as f64) * h).powi(2))).exp()).collect())
        .collect();
    let a = verify_young(&g, &w, 1.0, 2.0, 2.0, 50, 7).unwrap();
    let b = verify_young(&g, &w, 1.0, 2.0, 2.0, 50, 8).unwrap();
    let rowsum = g.iter().map(|r| r.iter().sum::<f64>() * h).fold(0.0, f64::max);
    assert!(a.max_ratio <= rowsum + 1e-12 && (a.bound - rowsum).abs() < 1e-12);
    assert!((a.max_ratio / b.max_ratio - 1.0).abs() < 0.1);
    assert!(verify_young(&g, &w, 1.0, 2.0, 3.0, 5, 1).is_err());
    assert!(verify_young(&g, &w, 2.0, 2.0, f64::INFINITY, 5, 1).is_ok());
}

fn narrow_bump(o: &FracHeatOperator) -> Vec<f64> {
    (0..o.grid.len()).map(|i| (-(o.grid.node(i)[0] / 0.01).powi(2)).exp()).collect()
}

#[test]
fn smoothing_slopes_poisson() {
    let o = op(1, 0.5, 40.0, 0.005);
    let phi = narrow_bump(&o);
    let f = verify_smoothing(&o, &phi, 1.0, f64::INFINITY, 0.0).unwrap();
    assert!((f.slope + 1.0).abs() <= 0.03, "{}", f.slope);
    assert_eq!(f.expected, -1.0);
    let f = verify_smoothing(&o, &phi, 1.0, f64::INFINITY, 1.0).unwrap();
    assert!((f.slope + 2.0).abs() <= 0.1, "{}", f.slope);
    for (r, p) in [(1.0, 2.0), (1.0, f64::INFINITY), (2.0, 4.0), (2.0, f64::INFINITY)] {
        let phi = scale_critical_data(&o, r, 0.01);
        let f = verify_smoothing(&o, &phi, r, p, 0.0).unwrap();
        assert!((f.slope / f.expected - 1.0).abs() <= 0.05, "({r},{p}): {} vs {}", f.slope, f.expected);
    }
    assert!(verify_smoothing(&o, &vec![0.0; o.grid.len()], 1.0, 2.0, 0.0).is_err());
    assert!(verify_smoothing(&o, &phi, 2.0, 1.0, 0.0).is_err());
}

#[test]
fn smoothing_contraction_flat_data() {
    let o = op(1, 0.5, 200.0, 0.05);
    let phi = vec![1.0; o.grid.len()];
    let f = verify_smoothing(&o, &phi, f64::INFINITY, f64::INFINITY, 0.0).unwrap();
    assert_eq!(f.expected, 0.0);
    assert!(f.slope.abs() < 0.01, "{}", f.slope);
    assert!(f.norms.iter().all(|&n| n <= 1.0 + 1e-9));
}
