use fracheat::capacity::{Atom, DiscreteMeasure};
use fracheat::frackernel::{FracHeatOperator, PanelSpec};
use fracheat::quad;
use fracheat::space::{HeatKernelModel, MetricMeasureSpace, QuadratureGrid};
use proptest::prelude::*;
use std::f64::consts::PI;
use std::time::Instant;

fn op(n: usize, alpha: f64, radius: f64, h: f64) -> FracHeatOperator {
    let sp = MetricMeasureSpace::euclidean(n).unwrap();
    let model = HeatKernelModel::exact_gaussian(&sp).unwrap();
    let grid = QuadratureGrid::new(&sp, radius, h).unwrap();
    FracHeatOperator::new(alpha, model, grid, 1e-10).unwrap()
}

fn poisson(n: usize, t: f64, d: f64) -> f64 {
    let c = if n == 1 { 1.0 / PI } else { 1.0 / (PI * PI) };
    c * t * (t * t + d * d).powf(-(n as f64 + 1.0) / 2.0)
}

// Fourier inversion (1/π)∫₀^∞ ξ^θ e^{−tξ} cos(ξd) dξ in closed form.
fn fourier_half(theta: f64, t: f64, d: f64) -> f64 {
    let rho = (t * t + d * d).sqrt();
    let phi = d.atan2(t);
    statrs::function::gamma::gamma(theta + 1.0) / PI * rho.powf(-(theta + 1.0)) * ((theta + 1.0) * phi).cos()
}

#[test]
fn poisson_oracle_1d_and_3d() {
    for n in [1usize, 3] {
        let o = op(n, 0.5, 1.0, 0.5);
        let start = Instant::now();
        let mut worst: f64 = 0.0;
        for i in 0..200 {
            let t = 0.1 * 100f64.powf((i % 20) as f64 / 19.0);
            let d = 10.0 * (i / 20) as f64 / 9.0;
            let k = o.profile(t, d);
            worst = worst.max((k - poisson(n, t, d)).abs() / poisson(n, t, d));
        }
        assert!(worst <= 1e-6, "n={n}: {worst:e}");
        assert!(start.elapsed().as_secs_f64() < 10.0);
    }
}

#[test]
fn kernel_examples() {
    let o = op(1, 0.5, 1.0, 0.5);
    assert!((o.frac_kernel(1.0, &[0.0], &[0.0]).unwrap() - 1.0 / PI).abs() < 1e-9);
    assert!((o.frac_kernel(2.0, &[0.3], &[1.3]).unwrap() - 0.4 / PI).abs() < 1e-9);
    assert!(o.frac_kernel(0.0, &[0.0], &[0.0]).is_err());
}

#[test]
fn unit_mass_on_grid() {
    let o = op(1, 0.5, 400.0, 0.05);
    let one = vec![1.0; o.grid.len()];
    let v = o.semigroup_apply(0.5, &one).unwrap();
    let mid = o.grid.nearest(&[0.0]);
    // Truncation of the Cauchy tail beyond |y| = 400.
    assert!((v[mid] - 1.0).abs() < 2e-3, "{}", v[mid]);
    let o = op(1, 0.7, 60.0, 0.05);
    let one = vec![1.0; o.grid.len()];
    let v = o.semigroup_apply(1.0, &one).unwrap();
    assert!((v[o.grid.nearest(&[0.0])] - 1.0).abs() < 2e-3);
}

#[test]
fn indicator_poisson_integral() {
    let o = op(1, 0.5, 20.0, 0.01);
    let f: Vec<f64> = (0..o.grid.len())
        .map(|i| {
            let x = o.grid.node(i)[0];
            if x.abs() < 1.0 - 1e-9 {
                1.0
            } else if (x.abs() - 1.0).abs() < 1e-9 {
                0.5
            } else {
                0.0
            }
        })
        .collect();
    let v = o.semigroup_apply(1.0, &f).unwrap();
    for &x in &[0.0, 0.5, 2.0] {
        let exact = (((1.0 - x) / 1.0f64).atan() + ((1.0 + x) / 1.0f64).atan()) / PI;
        let got = v[o.grid.nearest(&[x])];
        assert!((got - exact).abs() < 1e-5, "x={x}: {got} vs {exact}");
    }
    assert!((v[o.grid.nearest(&[0.0])] - 0.5).abs() < 1e-5);
}

#[test]
fn semigroup_in_time() {
    let o = op(1, 0.5, 200.0, 0.02);
    let f: Vec<f64> = (0..o.grid.len()).map(|i| (-o.grid.node(i)[0].powi(2)).exp()).collect();
    let a = o.semigroup_apply(0.3, &f).unwrap();
    let ab = o.semigroup_apply(0.7, &a).unwrap();
    let c = o.semigroup_apply(1.0, &f).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..o.grid.len() {
        if o.grid.node(i)[0].abs() <= 10.0 {
            worst = worst.max((ab[i] - c[i]).abs() / c[i]);
        }
    }
    assert!(worst < 1e-4, "{worst:e}");
}

#[test]
fn adjoint_examples() {
    let o = op(1, 0.5, 5.0, 0.25);
    let empty = DiscreteMeasure::default();
    assert!(o.adjoint_apply(&empty).unwrap().iter().all(|&v| v == 0.0));
    let one = DiscreteMeasure { atoms: vec![Atom { t: 1.0, x: vec![0.0], m: 1.0 }] };
    let v = o.adjoint_apply(&one).unwrap();
    assert!((v[o.grid.nearest(&[0.0])] - 1.0 / PI).abs() < 1e-9);
    let two = DiscreteMeasure { atoms: vec![one.atoms[0].clone(), one.atoms[0].clone()] };
    let w = o.adjoint_apply(&two).unwrap();
    for (a, b) in v.iter().zip(&w) {
        assert!((2.0 * a - b).abs() < 1e-15);
    }
    let bad = DiscreteMeasure { atoms: vec![Atom { t: 0.0, x: vec![0.0], m: 1.0 }] };
    assert!(o.adjoint_apply(&bad).is_err());
}

#[test]
fn time_derivative_matches_poisson() {
    let o = op(1, 0.5, 1.0, 0.5);
    let (v, err) = o.time_derivative_kernel(1.0, &[0.0], &[0.0]).unwrap();
    assert!((v + 1.0 / PI).abs() < 1e-8 && err < 1e-6, "{v} {err}");
    let (v, _) = o.time_derivative_kernel(1.0, &[0.0], &[1.0]).unwrap();
    assert!(v.abs() < 1e-8);
    for i in 0..30 {
        let t = 0.05 * 1.3f64.powi(i);
        let (v, _) = o.time_derivative_kernel(t, &[0.0], &[0.0]).unwrap();
        assert!(v < 0.0);
        let exact = -1.0 / (PI * t * t);
        assert!((v - exact).abs() < 1e-7 * exact.abs());
        let a = o.time_derivative_profile(t, 0.7);
        let e = (0.49 - t * t) / (PI * (t * t + 0.49).powi(2));
        assert!((a - e).abs() < 1e-8 * e.abs().max(1e-3), "t={t}: {a} vs {e}");
    }
}

#[test]
fn frac_derivative_generator_case() {
    let o = op(1, 0.5, 1.0, 0.5);
    let v = o.frac_derivative_kernel(1.0, 1.0, &[0.0], &[0.0]).unwrap();
    assert!((v - 1.0 / PI).abs() < 1e-8, "{v}");
    assert!(o.frac_derivative_kernel(1.5, 1.0, &[0.0], &[0.0]).is_err());
    assert!(o.frac_derivative_kernel(0.0, 1.0, &[0.0], &[0.0]).is_err());
}

#[test]
fn frac_derivative_fourier_oracle() {
    let o = op(1, 0.5, 1.0, 0.5);
    let fp = o.frac_power(0.6).unwrap();
    for &t in &[0.3, 1.0, 3.0] {
        for &d in &[0.0, 0.8, 4.0] {
            let oracle = fourier_half(0.6, t, d);
            let direct = o.frac_derivative_kernel(0.6, t, &[0.0], &[d]).unwrap();
            let tab = fp.profile(&o, t, d);
            let scale = fourier_half(0.6, t, 0.0);
            assert!((direct - oracle).abs() < 1e-4 * scale, "t={t} d={d}: {direct} vs {oracle}");
            assert!((tab - oracle).abs() < 1e-4 * scale, "t={t} d={d}: {tab} vs {oracle}");
        }
    }
}

#[test]
fn frac_derivative_fourier_oracle_general_alpha() {
    // (1/π)∫₀^∞ ξ^θ e^{−tξ^{2α}} cos(ξd) dξ by adaptive quadrature.
    let alpha = 0.7;
    let theta = 0.8;
    let o = op(1, alpha, 1.0, 0.5);
    let fp = o.frac_power(theta).map_err(|e| e.to_string()).unwrap();
    for &(t, d) in &[(0.5f64, 0.0f64), (1.0, 1.0), (2.0, 0.5)] {
        let xi_max = (40.0 / t).powf(0.5 / alpha);
        let oracle = quad::integrate(
            |xi: f64| xi.powf(theta) * (-t * xi.powf(2.0 * alpha)).exp() * (xi * d).cos(),
            0.0,
            xi_max,
            1e-13,
            1e-12,
            5000,
        )
        .unwrap()
        .value
            / PI;
        let tab = fp.profile(&o, t, d);
        let direct = o.frac_derivative_kernel(theta, t, &[0.0], &[d]).unwrap();
        assert!((tab - oracle).abs() < 1e-4 * oracle.abs().max(1e-2), "{tab} vs {oracle}");
        assert!((direct - oracle).abs() < 1e-4 * oracle.abs().max(1e-2), "{direct} vs {oracle}");
    }
}

#[test]
fn kernel_general_alpha_fourier() {
    let alpha = 0.3;
    let o = op(1, alpha, 1.0, 0.5);
    for &(t, d) in &[(0.5f64, 0.2f64), (1.0, 1.0), (2.0, 3.0)] {
        let xi_max = (60.0 / t).powf(0.5 / alpha);
        let oracle = quad::integrate(
            |xi: f64| (-t * xi.powf(2.0 * alpha)).exp() * (xi * d).cos(),
            0.0,
            xi_max,
            1e-14,
            1e-12,
            20000,
        )
        .unwrap()
        .value
            / PI;
        let k = o.profile(t, d);
        assert!((k - oracle).abs() < 1e-7 * oracle, "t={t} d={d}: {k} vs {oracle}");
    }
}

#[test]
fn panel_refinement_stable() {
    let coarse = op(1, 0.7, 1.0, 0.5);
    let sp = MetricMeasureSpace::euclidean(1).unwrap();
    let fine = FracHeatOperator::with_panels(
        0.7,
        HeatKernelModel::exact_gaussian(&sp).unwrap(),
        QuadratureGrid::new(&sp, 1.0, 0.5).unwrap(),
        1e-10,
        PanelSpec { panels_per_decade: 2, ..PanelSpec::default() },
    )
    .unwrap();
    for &t in &[0.1, 1.0, 10.0] {
        for &d in &[0.0, 1.0, 10.0] {
            let (a, b) = (coarse.profile(t, d), fine.profile(t, d));
            assert!((a - b).abs() < 1e-9 * b, "{a} {b}");
        }
    }
}

#[test]
fn heisenberg_table_matches_direct() {
    let sp = MetricMeasureSpace::heisenberg();
    let model = HeatKernelModel::model_gauss_gauge(&sp, 0.25).unwrap();
    let grid = QuadratureGrid::new(&sp, 1.0, 0.5).unwrap();
    let o = FracHeatOperator::new(0.5, model, grid, 1e-10).unwrap();
    let table = o.profile_table(0.3, 50.0);
    for i in 0..200 {
        let d = 0.25 * i as f64;
        let a = table.eval(d).unwrap();
        let b = o.profile(0.3, d);
        assert!((a - b).abs() <= 1e-8 * b, "d={d}: {a} {b}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn kernel_symmetric_nonnegative(t in 0.05f64..5.0, x in -3.0f64..3.0, y in -3.0f64..3.0) {
        let o = op(1, 0.6, 1.0, 0.5);
        let a = o.frac_kernel(t, &[x], &[y]).unwrap();
        let b = o.frac_kernel(t, &[y], &[x]).unwrap();
        prop_assert!(a >= 0.0);
        prop_assert!((a - b).abs() <= 1e-14 * a);
    }

    #[test]
    fn semigroup_linear_and_positive(a in -2.0f64..2.0, b in -2.0f64..2.0, c in -1.0f64..1.0) {
        let o = op(1, 0.5, 8.0, 0.25);
        let n = o.grid.len();
        let f: Vec<f64> = (0..n).map(|i| (-(o.grid.node(i)[0] - c).powi(2)).exp()).collect();
        let g: Vec<f64> = (0..n).map(|i| 1.0 / (1.0 + o.grid.node(i)[0].powi(2))).collect();
        let h: Vec<f64> = f.iter().zip(&g).map(|(p, q)| a * p + b * q).collect();
        let (pf, pg, ph) = (
            o.semigroup_apply(0.4, &f).unwrap(),
            o.semigroup_apply(0.4, &g).unwrap(),
            o.semigroup_apply(0.4, &h).unwrap(),
        );
        for i in 0..n {
            prop_assert!(pf[i] > 0.0 && pg[i] > 0.0);
            prop_assert!((a * pf[i] + b * pg[i] - ph[i]).abs() <= 1e-13 * (pf[i].abs() + pg[i].abs()) * 4.0);
        }
    }
}
