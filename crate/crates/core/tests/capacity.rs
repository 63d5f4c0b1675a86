use fracheat::capacity::*;
use fracheat::frackernel::FracHeatOperator;
use fracheat::sampling;
use fracheat::space::{HeatKernelModel, MetricMeasureSpace, QuadratureGrid};
use fracheat::Error;
use proptest::prelude::*;
use rand::Rng;

fn op1(radius: f64, h: f64) -> FracHeatOperator {
    let sp = MetricMeasureSpace::euclidean(1).unwrap();
    let model = HeatKernelModel::exact_gaussian(&sp).unwrap();
    let grid = QuadratureGrid::new(&sp, radius, h).unwrap();
    FracHeatOperator::new(0.5, model, grid, 1e-10).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

#[test]
fn single_constraint_closed_form() {
    for p in [1.5, 2.0, 3.0] {
        let a = 0.7;
        let prob = CapacityProblem::new(vec![vec![a]], vec![1.0], p).unwrap();
        let d = solve_dual(&prob, 1e-12).unwrap();
        let q = solve_primal(&prob, 1e-9).unwrap();
        assert!(rel(d.value, a.powf(-p)) < 1e-8, "{}", d.value);
        assert!(rel(q.value, a.powf(-p)) < 1e-8, "{}", q.value);
        assert!((q.f[0] - 1.0 / a).abs() < 1e-8);
        // Scaling A → λA gives λ^{−p}.
        let prob = CapacityProblem::new(vec![vec![3.0 * a]], vec![1.0], p).unwrap();
        assert!(rel(solve_dual(&prob, 1e-12).unwrap().value, (3.0 * a).powf(-p)) < 1e-8);
    }
}

#[test]
fn two_nodes_match_grid_oracle() {
    let (w, k) = ([0.5, 0.5], [0.8, 0.8]);
    let prob = CapacityProblem::new(vec![k.to_vec()], w.to_vec(), 2.0).unwrap();
    // Minimize on the active line w₁k₁f₁ + w₂k₂f₂ = 1 by exhaustive search.
    let n = 2_000_000;
    let top = 1.0 / (w[0] * k[0]);
    let mut best = f64::INFINITY;
    for i in 0..=n {
        let f1 = top * i as f64 / n as f64;
        let f2 = (1.0 - w[0] * k[0] * f1) / (w[1] * k[1]);
        best = best.min(w[0] * f1 * f1 + w[1] * f2 * f2);
    }
    let d = solve_dual(&prob, 1e-12).unwrap();
    let q = solve_primal(&prob, 1e-9).unwrap();
    assert!(rel(d.value, best) < 1e-6 && rel(q.value, best) < 1e-6, "{} {} {best}", d.value, q.value);
}

#[test]
fn empty_and_infeasible() {
    let prob = CapacityProblem::new(Vec::new(), vec![1.0; 4], 2.0).unwrap();
    assert_eq!(solve_dual(&prob, 1e-9).unwrap().value, 0.0);
    assert_eq!(solve_primal(&prob, 1e-9).unwrap().value, 0.0);
    assert!(matches!(CapacityProblem::new(vec![vec![0.0, 0.0]], vec![1.0; 2], 2.0), Err(Error::Infeasible(_))));
    assert!(matches!(CapacityProblem::new(vec![vec![1.0]], vec![1.0], 1.0), Err(Error::Input(_))));
}

fn random_instance(op: &FracHeatOperator, rng: &mut impl Rng, p: f64) -> (CapacityProblem, Vec<SpaceTimePoint>) {
    let m = rng.gen_range(1..=8);
    let pts: Vec<SpaceTimePoint> = (0..m)
        .map(|_| (rng.gen_range(0.2..2.0), vec![rng.gen_range(-2.0..2.0)]))
        .collect();
    (CapacityInstance::new(op, p, pts.clone()).problem().unwrap(), pts)
}

#[test]
fn duality_on_random_instances() {
    let op = op1(3.15, 0.1);
    assert_eq!(op.grid.len(), 64);
    let mut rng = sampling::rng(11);
    let ps = [1.5, 2.0, 3.0];
    for i in 0..20 {
        let p = ps[i % 3];
        let (prob, _) = random_instance(&op, &mut rng, p);
        let r = duality_check(&prob, 1e-7).unwrap();
        assert!(r.gap >= -1e-12 && r.gap <= 1e-4, "instance {i}: {r:?}");
        assert!(r.extremal_residual <= 1e-3, "instance {i}: {r:?}");
        assert!(r.identity_residual <= 1e-3, "instance {i}: {r:?}");
        assert!(r.slackness >= 0.99 && r.min_constraint >= 1.0 - 1e-7, "instance {i}: {r:?}");
        if p == 2.0 {
            let (v, nu) = active_set_oracle(&prob).unwrap();
            let d = solve_dual(&prob, 1e-13).unwrap();
            assert!(rel(d.value, v) <= 1e-8, "instance {i}: {} vs {v}", d.value);
            let l1: f64 = d.nu.iter().zip(&nu).map(|(a, b)| (a - b).abs()).sum();
            assert!(l1 <= 1e-6 * v.max(1.0));
        }
    }
}

#[test]
fn extremal_measure_lives_on_constraints() {
    let op = op1(3.15, 0.1);
    let pts = vec![(0.5, vec![0.0]), (0.5, vec![0.05]), (1.5, vec![1.0])];
    let inst = CapacityInstance::new(&op, 2.0, pts.clone());
    let r = capacity_dual(&inst, 1e-12).unwrap();
    let nu = r.measure(&pts);
    assert_eq!(nu.atoms.len(), 3);
    assert!(rel(nu.total_mass(), r.value) < 1e-9);
    assert!(r.f.iter().all(|v| *v >= 0.0) && r.gap >= 0.0 && r.gap < 1e-9);
}

#[test]
fn basic_properties() {
    let op = op1(3.15, 0.1);
    let pts: Vec<SpaceTimePoint> = (0..6).map(|k| (0.3 + 0.2 * k as f64, vec![-1.5 + 0.6 * k as f64])).collect();
    let prob = CapacityInstance::new(&op, 2.0, pts).problem().unwrap();
    let sets = vec![vec![0], vec![0, 1], vec![0, 1, 2, 3], vec![4], vec![5], vec![4, 5], vec![1, 3, 5]];
    let r = capacity_properties_check(&prob, &sets, 1e-11).unwrap();
    assert_eq!(r.empty, 0.0);
    assert!(r.monotone_excess <= 1e-9, "{r:?}");
    assert!(r.subadditive_excess <= 1e-6, "{r:?}");
}

#[test]
fn working_set_matches_direct_solve() {
    let op = op1(4.0, 0.1);
    let pts: Vec<SpaceTimePoint> = (0..60)
        .map(|k| (0.4 + 0.05 * (k % 6) as f64, vec![-1.0 + 0.2 * (k / 6) as f64]))
        .collect();
    for p in [1.5, 2.0, 3.0] {
        let prob = CapacityInstance::new(&op, p, pts.clone()).problem().unwrap();
        let ws = solve_dual(&prob, 1e-11).unwrap();
        let pr = solve_primal(&prob, 1e-8).unwrap();
        assert!(ws.gap < 1e-8, "{}", ws.gap);
        assert!(rel(ws.value, pr.value) < 1e-5, "{} vs {}", ws.value, pr.value);
        assert!(prob.apply(&ws.f).iter().all(|a| *a >= 1.0 - 1e-9));
    }
}

fn small_problem() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>, f64)> {
    (1usize..4, 2usize..6, prop::sample::select(vec![1.5, 2.0, 3.0])).prop_flat_map(|(m, n, p)| {
        (
            prop::collection::vec(prop::collection::vec(0.05f64..2.0, n), m),
            prop::collection::vec(0.2f64..1.5, n),
            Just(p),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]
    #[test]
    fn weak_duality_and_feasibility((k, w, p) in small_problem()) {
        let prob = CapacityProblem::new(k, w, p).unwrap();
        let d = solve_dual(&prob, 1e-11).unwrap();
        let q = solve_primal(&prob, 1e-8).unwrap();
        prop_assert!(d.value <= q.value * (1.0 + 1e-9));
        prop_assert!((q.value - d.value) / q.value <= 1e-4);
        prop_assert!(prob.apply(&q.f).iter().all(|a| *a >= 1.0 - 1e-12));
        // Any ν gives a lower bound.
        let any: Vec<f64> = (0..prob.constraints()).map(|k| 1.0 + k as f64).collect();
        prop_assert!(prob.lower_bound(&any) <= q.value * (1.0 + 1e-9));
    }
}

#[test]
fn spherical_capacity_linear_in_r() {
    let op = op1(32.0, 0.05);
    let rs: Vec<f64> = (0..6).map(|k| 2f64.powi(k - 3)).collect();
    let s = spherical_capacity_scan(&op, 2.0, &rs, T0Rule::Comparable, &[0.0], 4, 7).unwrap();
    assert!((0.85..=1.15).contains(&s.slope), "{}", s.slope);
    assert!(s.lower_constant > 0.0 && s.upper_constant.is_finite());
    // Translation invariance.
    let t = spherical_capacity_scan(&op, 2.0, &rs[..2], T0Rule::Comparable, &[1.0], 4, 7).unwrap();
    for (a, b) in s.samples.iter().zip(&t.samples) {
        assert!(rel(a.value, b.value) < 1e-3, "{} {}", a.value, b.value);
    }
    let big = spherical_capacity_scan(&op, 2.0, &rs[..2], T0Rule::Fixed(4.0), &[0.0], 4, 7).unwrap();
    assert!(big.samples.iter().zip(&s.samples).all(|(b, a)| b.value > a.value && b.upper_ratio.is_finite()));
}

#[test]
fn parabolic_ball_sample_inside() {
    let sp = MetricMeasureSpace::heisenberg();
    let ball = ParabolicBall { t0: 0.3, x0: vec![0.2, -0.1, 0.4], r: 0.5 };
    let pts = ball.sample(&sp, 0.6, 3, 5).unwrap();
    assert!(!pts.is_empty());
    assert!(pts.iter().all(|(t, x)| ball.contains(&sp, 0.6, *t, x)));
    assert!(!ball.contains(&sp, 0.6, 0.3, &[0.2, -0.1, 0.4]));
}

fn atoms(v: &[(f64, f64, f64)]) -> DiscreteMeasure {
    DiscreteMeasure { atoms: v.iter().map(|&(t, x, m)| Atom { t, x: vec![x], m }).collect() }
}

fn subset_capacity(op: &FracHeatOperator, nu: &DiscreteMeasure, idx: &[usize]) -> f64 {
    let pts: Vec<SpaceTimePoint> = idx.iter().map(|&k| (nu.atoms[k].t, nu.atoms[k].x.clone())).collect();
    capacity_dual(&CapacityInstance::new(op, 2.0, pts), 1e-10).unwrap().value
}

// Independent include/exclude recursion over atoms.
fn kappa_recursive(op: &FracHeatOperator, nu: &DiscreteMeasure, lambda: f64, i: usize, chosen: &mut Vec<usize>) -> f64 {
    if i == nu.atoms.len() {
        let mass: f64 = chosen.iter().map(|&k| nu.atoms[k].m).sum();
        return if !chosen.is_empty() && mass >= lambda { subset_capacity(op, nu, chosen) } else { f64::INFINITY };
    }
    let without = kappa_recursive(op, nu, lambda, i + 1, chosen);
    chosen.push(i);
    let with = kappa_recursive(op, nu, lambda, i + 1, chosen);
    chosen.pop();
    without.min(with)
}

#[test]
fn kappa_matches_recursive_enumerator() {
    let op = op1(6.0, 0.1);
    let nu = atoms(&[(0.5, -1.0, 0.3), (1.0, 0.5, 0.8), (1.5, 0.7, 0.4)]);
    let table = KappaTable::build(&op, 2.0, &nu).unwrap();
    assert!(!table.heuristic && table.entries.len() == 7);
    for lambda in [0.1, 0.3, 0.35, 0.7, 0.8, 1.1, 1.2, 1.5] {
        let want = kappa_recursive(&op, &nu, lambda, 0, &mut Vec::new());
        assert!(rel(table.kappa(lambda), want) < 1e-9, "{lambda}: {} vs {want}", table.kappa(lambda));
    }
    let mut prev = 0.0;
    for k in 1..=150 {
        let v = table.kappa(0.01 * k as f64);
        assert!(v >= prev);
        prev = v;
    }
    assert!(kappa(&nu, 2.0, &op, 2.0).is_err());
    // Single atom: the singleton capacity.
    let one = atoms(&[(1.0, 0.5, 0.8)]);
    let c = subset_capacity(&op, &one, &[0]);
    assert!(rel(kappa(&one, 0.5, &op, 2.0).unwrap(), c) < 1e-9);
    // More atoms, more candidate sets.
    let more = atoms(&[(0.5, -1.0, 0.3), (1.0, 0.5, 0.8), (1.5, 0.7, 0.4), (0.8, 2.0, 0.5)]);
    let t2 = KappaTable::build(&op, 2.0, &more).unwrap();
    for k in 1..=15 {
        let l = 0.1 * k as f64;
        assert!(t2.kappa(l) <= table.kappa(l) * (1.0 + 1e-9));
    }
}

#[test]
fn kappa_greedy_beyond_threshold() {
    let op = op1(4.0, 0.2);
    let mut rng = sampling::rng(3);
    let nu = sampling::random_measure(&mut rng, 1, 13, (0.3, 2.0), 2.0, (0.1, 1.0));
    let t = KappaTable::build(&op, 2.0, &nu).unwrap();
    assert!(t.heuristic && t.entries.len() == 13);
    assert!(t.kappa(nu.total_mass()).is_finite());
}

#[test]
fn upper_sector_integral() {
    let op = op1(6.0, 0.1);
    let (p, q) = (3.0, 2.0);
    let one = atoms(&[(1.0, 0.0, 0.7)]);
    let c = capacity_dual(&CapacityInstance::new(&op, p, one.points()), 1e-11).unwrap().value;
    let r = trace_upper_sector(&op, p, q, &one, 5, 1).unwrap();
    let want = c.powf(-q / (p - q)) * (p - q) / p * 0.7f64.powf(p / (p - q));
    assert!(r.finite && rel(r.integral, want) < 1e-9, "{} vs {want}", r.integral);
    let zero = DiscreteMeasure::default();
    assert_eq!(trace_upper_sector(&op, p, q, &zero, 5, 1).unwrap().integral, 0.0);
    let nu = atoms(&[(0.5, -1.0, 0.3), (1.0, 0.5, 0.8), (1.5, 0.7, 0.4)]);
    let a = kappa_integral(&KappaTable::build(&op, p, &nu).unwrap(), p, q);
    let b = kappa_integral(&KappaTable::build(&op, p, &nu.scaled(2.5)).unwrap(), p, q);
    assert!(rel(b / a, 2.5f64.powf(p / (p - q))) < 1e-9);
    assert!(trace_upper_sector(&op, 2.0, 3.0, &nu, 5, 1).is_err());
}

#[test]
fn lower_sector_reports() {
    let op = op1(6.0, 0.1);
    let (p, q) = (2.0, 4.0);
    let one = atoms(&[(1.0, 0.0, 0.7)]);
    let r = trace_lower_sector(&op, p, q, &one, 10, 2).unwrap();
    assert!(r.kappa_ratio.is_finite() && r.kappa_ratio > 0.0);
    // Single atom: the embedding norm is exactly (a)^{1/p}, attained by (K*ν)^{p′−1}.
    assert!(rel(r.embedding_ratio, r.kappa_ratio.powf(1.0 / p)) < 1e-6, "{r:?}");
    assert!(r.consistent);
    let mut rng = sampling::rng(5);
    for _ in 0..3 {
        let nu = sampling::random_measure(&mut rng, 1, 5, (0.3, 2.0), 2.0, (0.05, 0.5));
        let r = trace_lower_sector(&op, p, q, &nu, 30, 9).unwrap();
        assert!(r.consistent && r.embedding_ratio <= r.kappa_ratio.powf(1.0 / p) * 4.0, "{r:?}");
    }
}

#[test]
fn ball_condition_uniform_density() {
    // Uniform lattice measure on [1,3] × [−2,2]: ν(B_r) ≈ 2ρr² inside.
    let sp = MetricMeasureSpace::euclidean(1).unwrap();
    let h = 0.025;
    let m = 1e-3;
    let mut nu = DiscreteMeasure::default();
    for i in 0..80 {
        for j in 0..160 {
            nu.atoms.push(Atom { t: 1.0 + (i as f64 + 0.5) * h, x: vec![-2.0 + (j as f64 + 0.5) * h], m });
        }
    }
    let rho = m / (h * h);
    let radii = fracheat::quad::logspace(0.8, 1.6, 41);
    let anchors = vec![(2.0, vec![0.0]), (2.1, vec![0.2])];
    let b = ball_condition_scan(&sp, 0.5, &nu, 2.0, &radii, &anchors);
    assert!(rel(b, 2.0 * rho) < 0.1, "{b} vs {}", 2.0 * rho);
}

#[test]
fn strong_type_basics() {
    let op = op1(6.0, 0.1);
    let cells = LevelCells { times: fracheat::quad::logspace(0.05, 4.0, 8), stride: 2 };
    let zero = vec![0.0; op.grid.len()];
    let bump: Vec<f64> = (0..op.grid.len()).map(|i| (-(op.grid.node(i)[0] / 0.5).powi(2)).exp()).collect();
    let r = strong_type_check(&op, 2.0, &[zero, bump], &cells).unwrap();
    assert_eq!(r.samples[0].strong, 0.0);
    let s = &r.samples[1];
    assert!(s.weak <= s.strong && s.weak <= 1.0 + 1e-6 && s.strong.is_finite(), "{s:?}");
    assert!(s.levels.windows(2).all(|w| w[0].2 >= w[1].2 - 1e-9));
}
