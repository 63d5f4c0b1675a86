//! L^p capacities of finite space-time sets as convex programs, their
//! duals and extremal measures, and the capacity-based trace criteria.

use crate::error::{input, Error, Result};
use crate::estimates::lp_norm;
use crate::frackernel::FracHeatOperator;
use crate::quad;
use crate::sampling;
use crate::space::{h1_mul, MetricMeasureSpace, SpaceKind};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// A point (t, x) of the upper half space.
pub type SpaceTimePoint = (f64, Vec<f64>);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub t: f64,
    pub x: Vec<f64>,
    pub m: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    pub atoms: Vec<Atom>,
}

impl DiscreteMeasure {
    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.m).sum()
    }

    pub fn points(&self) -> Vec<SpaceTimePoint> {
        self.atoms.iter().map(|a| (a.t, a.x.clone())).collect()
    }

    pub fn scaled(&self, c: f64) -> Self {
        let atoms = self.atoms.iter().map(|a| Atom { m: a.m * c, ..a.clone() }).collect();
        DiscreteMeasure { atoms }
    }

    pub fn validate(&self, space: &MetricMeasureSpace) -> Result<()> {
        for a in &self.atoms {
            if !(a.t > 0.0 && a.t.is_finite()) {
                return input(format!("atom time must be positive, got {}", a.t));
            }
            if !(a.m >= 0.0 && a.m.is_finite()) {
                return input(format!("atom mass must be nonnegative, got {}", a.m));
            }
            space.distance(&a.x, &a.x)?;
        }
        Ok(())
    }

    /// ν(B) for a parabolic ball.
    pub fn ball_mass(&self, space: &MetricMeasureSpace, alpha: f64, ball: &ParabolicBall) -> f64 {
        self.atoms.iter().filter(|a| ball.contains(space, alpha, a.t, &a.x)).map(|a| a.m).sum()
    }
}

/// {(t, x): r^{2α} < t − t₀ < 2r^{2α}, d(x, x₀) < r}
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParabolicBall {
    pub t0: f64,
    pub x0: Vec<f64>,
    pub r: f64,
}

impl ParabolicBall {
    pub fn contains(&self, space: &MetricMeasureSpace, alpha: f64, t: f64, x: &[f64]) -> bool {
        let s = self.r.powf(2.0 * alpha);
        let dt = t - self.t0;
        dt > s && dt < 2.0 * s && space.dist(x, &self.x0) < self.r
    }

    /// Interior sample: `nt` cell-centred times times the points of an
    /// `ns`-per-axis cell-centred lattice of the unit ball, dilated by r and
    /// translated to x₀.
    pub fn sample(&self, space: &MetricMeasureSpace, alpha: f64, nt: usize, ns: usize) -> Result<Vec<SpaceTimePoint>> {
        if nt == 0 || ns == 0 {
            return input("ball sample needs at least one time and one spatial point");
        }
        if !(self.r > 0.0) {
            return input(format!("ball radius must be positive, got {}", self.r));
        }
        space.distance(&self.x0, &self.x0)?;
        let dim = space.dim();
        let origin = vec![0.0; dim];
        let axis: Vec<f64> = (0..ns).map(|j| -1.0 + (2 * j + 1) as f64 / ns as f64).collect();
        let mut unit = Vec::new();
        for code in 0..ns.pow(dim as u32) {
            let mut u = vec![0.0; dim];
            let mut c = code;
            for d in (0..dim).rev() {
                u[d] = axis[c % ns];
                c /= ns;
            }
            if space.dist(&u, &origin) < 1.0 {
                unit.push(u);
            }
        }
        let s = self.r.powf(2.0 * alpha);
        let mut out = Vec::with_capacity(nt * unit.len());
        for j in 0..nt {
            let t = self.t0 + s * (1.0 + (j as f64 + 0.5) / nt as f64);
            for u in &unit {
                let v = space.dilate(u, self.r);
                let x = match space.kind {
                    SpaceKind::HeisenbergH1 => h1_mul(&self.x0, &v).to_vec(),
                    _ => self.x0.iter().zip(&v).map(|(a, b)| a + b).collect(),
                };
                out.push((t, x));
            }
        }
        Ok(out)
    }
}

/// Discrete capacity program: minimize Σᵢ wᵢ fᵢ^p over f ≥ 0 subject to
/// Σᵢ wᵢ K_{ki} fᵢ ≥ 1 for every constraint k.
#[derive(Debug, Clone)]
pub struct CapacityProblem {
    /// Row k holds K_{α,t_k}(x_k, yᵢ) over the nodes yᵢ.
    pub kernel: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub p: f64,
}

impl CapacityProblem {
    pub fn new(kernel: Vec<Vec<f64>>, weights: Vec<f64>, p: f64) -> Result<Self> {
        if !(p > 1.0 && p.is_finite()) {
            return input(format!("capacity exponent p must lie in (1, inf), got {p}"));
        }
        if weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return input("node weights must be positive and finite");
        }
        for (k, row) in kernel.iter().enumerate() {
            if row.len() != weights.len() {
                return input(format!("constraint row {k} has {} entries, expected {}", row.len(), weights.len()));
            }
            if row.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                return input(format!("constraint row {k} has a negative or non-finite entry"));
            }
            if !row.iter().any(|v| *v > 0.0) {
                return Err(Error::Infeasible(format!("constraint row {k} vanishes on every node")));
            }
        }
        Ok(CapacityProblem { kernel, weights, p })
    }

    pub fn constraints(&self) -> usize {
        self.kernel.len()
    }

    pub fn nodes(&self) -> usize {
        self.weights.len()
    }

    pub fn conjugate(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    /// (Af)_k = Σᵢ wᵢ K_{ki} fᵢ
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let wf: Vec<f64> = f.iter().zip(&self.weights).map(|(a, b)| a * b).collect();
        self.kernel.iter().map(|row| row.iter().zip(&wf).map(|(a, b)| a * b).sum()).collect()
    }

    /// (K*ν)ᵢ = Σ_k ν_k K_{ki}
    pub fn adjoint(&self, nu: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.nodes()];
        for (row, &m) in self.kernel.iter().zip(nu) {
            if m != 0.0 {
                for (gi, k) in g.iter_mut().zip(row) {
                    *gi += m * k;
                }
            }
        }
        g
    }

    pub fn cost(&self, f: &[f64]) -> f64 {
        f.iter().zip(&self.weights).map(|(v, w)| w * v.powf(self.p)).sum()
    }

    /// (Σν)^p / ‖K*ν‖_{p′}^p, a lower bound for every ν ≥ 0.
    pub fn lower_bound(&self, nu: &[f64]) -> f64 {
        let mass: f64 = nu.iter().sum();
        if mass <= 0.0 {
            return 0.0;
        }
        let pp = self.conjugate();
        let g = self.adjoint(nu);
        let e: f64 = g.iter().zip(&self.weights).map(|(v, w)| w * v.powf(pp)).sum();
        mass.powf(self.p) / e.powf(self.p - 1.0)
    }

    /// Cost of f rescaled so that min_k (Af)_k = 1, an upper bound.
    pub fn feasible_cost(&self, f: &[f64]) -> (f64, Vec<f64>) {
        let af = self.apply(f);
        let lo = af.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(lo > 0.0) {
            return (f64::INFINITY, f.to_vec());
        }
        let g: Vec<f64> = f.iter().map(|v| v / lo).collect();
        (self.cost(&g), g)
    }

    pub fn restrict(&self, rows: &[usize]) -> CapacityProblem {
        CapacityProblem {
            kernel: rows.iter().map(|&k| self.kernel[k].clone()).collect(),
            weights: self.weights.clone(),
            p: self.p,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CapacityResult {
    pub value: f64,
    /// Minimizer on the grid.
    pub f: Vec<f64>,
    /// Masses of the extremal measure on the constraint points.
    pub nu: Vec<f64>,
    pub gap: f64,
    pub iterations: usize,
    pub flags: Vec<String>,
}

impl CapacityResult {
    fn empty(n: usize) -> Self {
        CapacityResult { value: 0.0, f: vec![0.0; n], nu: Vec::new(), gap: 0.0, iterations: 0, flags: Vec::new() }
    }

    pub fn measure(&self, constraints: &[SpaceTimePoint]) -> DiscreteMeasure {
        DiscreteMeasure {
            atoms: constraints
                .iter()
                .zip(&self.nu)
                .map(|((t, x), &m)| Atom { t: *t, x: x.clone(), m })
                .collect(),
        }
    }
}

const DIRECT_LIMIT: usize = 24;
const MAX_NEWTON: usize = 400;

/// Concave dual ψ(ν) = pΣν − (p−1)Σᵢ wᵢ (K*ν)ᵢ^{p′}. Returns ψ and K*ν.
fn dual_objective(prob: &CapacityProblem, nu: &[f64]) -> (f64, Vec<f64>) {
    let p = prob.p;
    let pp = prob.conjugate();
    let g = prob.adjoint(nu);
    let e: f64 = g.iter().zip(&prob.weights).map(|(v, w)| w * v.powf(pp)).sum();
    (p * nu.iter().sum::<f64>() - (p - 1.0) * e, g)
}

/// Projected Newton ascent on ψ over ν ≥ 0 with Armijo backtracking along
/// the projection arc; falls back to a scaled projected-gradient step when
/// the reduced Hessian is not usable. Returns (ν, iterations, converged).
fn dual_newton(prob: &CapacityProblem, mut nu: Vec<f64>, tol: f64) -> (Vec<f64>, usize, bool) {
    let m = prob.constraints();
    let p = prob.p;
    let pp = prob.conjugate();
    let (mut psi, mut g) = dual_objective(prob, &nu);
    for it in 0..MAX_NEWTON {
        let f: Vec<f64> = g.iter().map(|v| v.max(1e-300).powf(pp - 1.0)).collect();
        let af = prob.apply(&f);
        let grad: Vec<f64> = af.iter().map(|a| p * (1.0 - a)).collect();
        let pg = (0..m)
            .map(|k| if nu[k] > 0.0 { grad[k].abs() } else { grad[k].max(0.0) })
            .fold(0.0, f64::max);
        if pg <= tol * p {
            return (nu, it, true);
        }
        // Curvature matrix M = K W diag(g^{p′−2}) Kᵀ scaled by p(p′−1).
        let c = p * (pp - 1.0);
        let wg: Vec<f64> = g.iter().zip(&prob.weights).map(|(v, w)| w * v.max(1e-300).powf(pp - 2.0)).collect();
        let diag: Vec<f64> = prob
            .kernel
            .iter()
            .map(|row| c * row.iter().zip(&wg).map(|(k, w)| k * k * w).sum::<f64>())
            .collect();
        let numax = nu.iter().cloned().fold(0.0, f64::max);
        let scaled_step: f64 = (0..m)
            .map(|k| ((nu[k] + grad[k] / diag[k]).max(0.0) - nu[k]).abs())
            .fold(0.0, f64::max);
        let eps = (1e-3 * numax).min(scaled_step);
        let free: Vec<usize> = (0..m).filter(|&k| !(nu[k] <= eps && grad[k] < 0.0)).collect();
        let mut dir: Vec<f64> = (0..m).map(|k| grad[k] / diag[k]).collect();
        if !free.is_empty() {
            let nf = free.len();
            let mut h = DMatrix::<f64>::zeros(nf, nf);
            for a in 0..nf {
                let ra = &prob.kernel[free[a]];
                for b in a..nf {
                    let rb = &prob.kernel[free[b]];
                    let v = c * ra.iter().zip(rb).zip(&wg).map(|((x, y), w)| x * y * w).sum::<f64>();
                    h[(a, b)] = v;
                    h[(b, a)] = v;
                }
            }
            let dmax = (0..nf).map(|a| h[(a, a)]).fold(0.0, f64::max);
            for a in 0..nf {
                h[(a, a)] += 1e-13 * dmax;
            }
            let rhs = DVector::from_iterator(nf, free.iter().map(|&k| grad[k]));
            if let Some(ch) = h.cholesky() {
                let d = ch.solve(&rhs);
                if d.iter().all(|v| v.is_finite()) {
                    for (a, &k) in free.iter().enumerate() {
                        dir[k] = d[a];
                    }
                }
            }
        }
        let mut s = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<f64> = nu.iter().zip(&dir).map(|(v, d)| (v + s * d).max(0.0)).collect();
            let (tpsi, tg) = dual_objective(prob, &trial);
            let lin: f64 = trial.iter().zip(&nu).zip(&grad).map(|((a, b), g)| (a - b) * g).sum();
            if tpsi.is_finite() && tpsi >= psi + 1e-4 * lin && lin >= 0.0 {
                let stalled = tpsi - psi <= 1e-16 * psi.abs();
                nu = trial;
                psi = tpsi;
                g = tg;
                accepted = !stalled;
                break;
            }
            s *= 0.5;
        }
        if !accepted {
            // Objective at rounding level; accept if the scaled residual is small.
            return (nu, it + 1, pg <= 1e-7 * p);
        }
    }
    (nu, MAX_NEWTON, false)
}

/// Newton on the dual can stall at rounding level on badly scaled problems
/// (g^{p′−2} blows up where g is small). The primal solver does not share
/// that failure mode, so use it instead and keep the dual error if it fails too.
fn primal_fallback(prob: &CapacityProblem, tol: f64, err: Error) -> Result<CapacityResult> {
    match solve_primal(prob, tol.max(1e-9)) {
        Ok(mut r) if r.gap <= 1e-6 => {
            r.flags.push("dual stalled; primal fallback".into());
            Ok(r)
        }
        _ => Err(err),
    }
}

fn finish_dual(prob: &CapacityProblem, nu: Vec<f64>, iterations: usize, flags: Vec<String>) -> CapacityResult {
    let pp = prob.conjugate();
    let value = prob.lower_bound(&nu);
    let g = prob.adjoint(&nu);
    let f: Vec<f64> = g.iter().map(|v| v.powf(pp - 1.0)).collect();
    let (upper, _) = prob.feasible_cost(&f);
    let gap = if upper.is_finite() && upper > 0.0 { ((upper - value) / upper).max(0.0) } else { f64::INFINITY };
    CapacityResult { value, f, nu, gap, iterations, flags }
}

fn initial_dual(prob: &CapacityProblem, rows: &[usize]) -> Vec<f64> {
    let pp = prob.conjugate();
    let mut ones = vec![0.0; prob.constraints()];
    for &k in rows {
        ones[k] = 1.0;
    }
    let g = prob.adjoint(&ones);
    let s: f64 = g.iter().zip(&prob.weights).map(|(v, w)| w * v.powf(pp)).sum();
    let c = (rows.len() as f64 / s).powf(prob.p - 1.0);
    ones.iter().map(|v| v * c).collect()
}

/// Maximizes the dual program over ν ≥ 0 on the constraint points. Large
/// constraint sets are handled by a working set grown from the most
/// violated constraints; the result is exact for the full set.
pub fn solve_dual(prob: &CapacityProblem, tol: f64) -> Result<CapacityResult> {
    if !(tol > 0.0) {
        return input("solver tolerance must be positive");
    }
    let m = prob.constraints();
    if m == 0 {
        return Ok(CapacityResult::empty(prob.nodes()));
    }
    if m <= DIRECT_LIMIT {
        let nu0 = initial_dual(prob, &(0..m).collect::<Vec<_>>());
        let (nu, it, ok) = dual_newton(prob, nu0, tol);
        if !ok {
            let best = prob.lower_bound(&nu);
            return primal_fallback(prob, tol, Error::NonConvergence { iterations: it, best_objective: best, best_iterate: nu });
        }
        return Ok(finish_dual(prob, nu, it, Vec::new()));
    }
    // Start from the single hardest constraint.
    let pp = prob.conjugate();
    let single = |k: usize| -> f64 {
        let e: f64 = prob.kernel[k].iter().zip(&prob.weights).map(|(v, w)| w * v.powf(pp)).sum();
        e.powf(1.0 - prob.p)
    };
    let first = (0..m).max_by(|&a, &b| single(a).total_cmp(&single(b)).then(b.cmp(&a))).unwrap_or(0);
    let mut work = vec![first];
    let mut nu_w = initial_dual(&prob.restrict(&work), &[0]);
    let mut total_it = 0;
    for _ in 0..m {
        let sub = prob.restrict(&work);
        let (nu, it, ok) = dual_newton(&sub, nu_w, tol);
        total_it += it;
        if !ok {
            let best = sub.lower_bound(&nu);
            return primal_fallback(prob, tol, Error::NonConvergence { iterations: total_it, best_objective: best, best_iterate: nu });
        }
        let g = sub.adjoint(&nu);
        let f: Vec<f64> = g.iter().map(|v| v.powf(pp - 1.0)).collect();
        let af = prob.apply(&f);
        let mut viol: Vec<(f64, usize)> = (0..m)
            .filter(|k| !work.contains(k) && af[*k] < 1.0 - tol)
            .map(|k| (af[k], k))
            .collect();
        if viol.is_empty() {
            let mut full = vec![0.0; m];
            for (&k, &v) in work.iter().zip(&nu) {
                full[k] = v;
            }
            return Ok(finish_dual(prob, full, total_it, Vec::new()));
        }
        viol.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        // Drop constraints that left the support, then add the worst ones.
        let mut keep = Vec::new();
        let mut kept_nu = Vec::new();
        for (&k, &v) in work.iter().zip(&nu) {
            if v > 0.0 {
                keep.push(k);
                kept_nu.push(v);
            }
        }
        for &(_, k) in viol.iter().take(8) {
            keep.push(k);
            kept_nu.push(0.0);
        }
        work = keep;
        nu_w = kept_nu;
    }
    Err(Error::NonConvergence { iterations: total_it, best_objective: 0.0, best_iterate: Vec::new() })
}

/// Minimizes Σ wᵢ fᵢ^p over f ≥ 0 with Af ≥ 1 by an augmented Lagrangian
/// whose inner problems are solved by projected gradient (Barzilai–Borwein
/// steps, nonmonotone Armijo backtracking, projection onto f ≥ 0).
pub fn solve_primal(prob: &CapacityProblem, tol: f64) -> Result<CapacityResult> {
    if !(tol > 0.0) {
        return input("solver tolerance must be positive");
    }
    let m = prob.constraints();
    let n = prob.nodes();
    if m == 0 {
        return Ok(CapacityResult::empty(n));
    }
    let p = prob.p;
    let w = &prob.weights;
    let a1 = prob.apply(&vec![1.0; n]);
    let lo = a1.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut f = vec![1.0 / lo; n];
    let c0 = prob.cost(&f);
    let mut rho = 10.0 * c0;
    let mut mu = vec![0.0; m];
    let mut prev_viol = f64::INFINITY;
    let mut prev_obj = f64::INFINITY;
    let mut total = 0usize;
    let max_total = 2_000_000 / (m + 1) + 200_000;
    let mut inner_tol = 1e-4;

    let phi = |f: &[f64], mu: &[f64], rho: f64| -> (f64, Vec<f64>, Vec<f64>) {
        let af = prob.apply(f);
        let lam: Vec<f64> = mu.iter().zip(&af).map(|(u, a)| (u + rho * (1.0 - a)).max(0.0)).collect();
        let val = prob.cost(f) + lam.iter().zip(mu).map(|(l, u)| l * l - u * u).sum::<f64>() / (2.0 * rho);
        let kl = prob.adjoint(&lam);
        // Gradient in the w-weighted inner product.
        let grad = f.iter().zip(&kl).map(|(v, k)| p * v.powf(p - 1.0) - k).collect();
        (val, grad, lam)
    };

    for _ in 0..200 {
        let (mut val, mut grad, mut lam) = phi(&f, &mu, rho);
        let mut step = 1.0 / (p * (p - 1.0) * f.iter().cloned().fold(0.0, f64::max).max(1e-300).powf(p - 2.0) + rho * 1.0);
        let mut history = vec![val];
        let mut inner = 0usize;
        let mut stall = 0usize;
        loop {
            let fmax = f.iter().cloned().fold(0.0, f64::max);
            let scale = p * fmax.powf(p - 1.0);
            let pgn = f
                .iter()
                .zip(&grad)
                .map(|(v, g)| (v - (v - g).max(0.0)).abs())
                .fold(0.0, f64::max);
            if pgn <= inner_tol * scale || total >= max_total || inner >= 50_000 || stall >= 30 {
                break;
            }
            total += 1;
            inner += 1;
            let reference = history.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut s = step;
            let mut next = None;
            for _ in 0..60 {
                let trial: Vec<f64> = f.iter().zip(&grad).map(|(v, g)| (v - s * g).max(0.0)).collect();
                let (tv, tg, tl) = phi(&trial, &mu, rho);
                let lin: f64 = trial.iter().zip(&f).zip(&grad).zip(w).map(|(((a, b), g), wi)| wi * (a - b) * g).sum();
                if tv <= reference + 1e-4 * lin {
                    next = Some((trial, tv, tg, tl));
                    break;
                }
                s *= 0.5;
            }
            let Some((nf, nv, ng, nl)) = next else { break };
            let sy: f64 = nf.iter().zip(&f).zip(ng.iter().zip(&grad)).zip(w).map(|(((a, b), (c, d)), wi)| wi * (a - b) * (c - d)).sum();
            let ss: f64 = nf.iter().zip(&f).zip(w).map(|((a, b), wi)| wi * (a - b) * (a - b)).sum();
            step = if sy > 0.0 { (ss / sy).clamp(1e-14, 1e14) } else { s * 2.0 };
            stall = if (val - nv).abs() <= 1e-15 * val.abs() { stall + 1 } else { 0 };
            f = nf;
            val = nv;
            grad = ng;
            lam = nl;
            history.push(val);
            if history.len() > 10 {
                history.remove(0);
            }
        }
        let af = prob.apply(&f);
        let viol = af.iter().map(|a| (1.0 - a).max(0.0)).fold(0.0, f64::max);
        mu = lam;
        let obj = prob.cost(&f);
        let change = ((obj - prev_obj) / obj).abs();
        prev_obj = obj;
        if viol <= 0.1 * tol && change <= tol && inner_tol <= tol * 1e-2 {
            let nu: Vec<f64> = mu.iter().map(|u| u / p).collect();
            let (upper, fs) = prob.feasible_cost(&f);
            let lower = prob.lower_bound(&nu);
            let gap = ((upper - lower) / upper).max(0.0);
            return Ok(CapacityResult { value: upper, f: fs, nu, gap, iterations: total, flags: Vec::new() });
        }
        if total >= max_total {
            break;
        }
        if viol > 0.25 * prev_viol && viol > 0.1 * tol {
            rho *= 10.0;
        }
        prev_viol = viol;
        inner_tol = (inner_tol * 0.1).max(tol * 1e-2);
    }
    let (upper, fs) = prob.feasible_cost(&f);
    Err(Error::NonConvergence { iterations: total, best_objective: upper, best_iterate: fs })
}

/// Exhaustive active-set solution of the p = 2 program: for each subset S
/// solve G_SS ν_S = 1 with G = K W Kᵀ and keep the cheapest KKT point.
pub fn active_set_oracle(prob: &CapacityProblem) -> Result<(f64, Vec<f64>)> {
    if prob.p != 2.0 {
        return input("active-set oracle requires p = 2");
    }
    let m = prob.constraints();
    if m > 16 {
        return input("active-set oracle supports at most 16 constraints");
    }
    if m == 0 {
        return Ok((0.0, Vec::new()));
    }
    let mut gram = DMatrix::<f64>::zeros(m, m);
    for a in 0..m {
        for b in 0..m {
            gram[(a, b)] = prob.kernel[a]
                .iter()
                .zip(&prob.kernel[b])
                .zip(&prob.weights)
                .map(|((x, y), w)| x * y * w)
                .sum();
        }
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u32..(1 << m) {
        let s: Vec<usize> = (0..m).filter(|k| mask >> k & 1 == 1).collect();
        let sub = DMatrix::from_fn(s.len(), s.len(), |i, j| gram[(s[i], s[j])]);
        let Some(sol) = sub.lu().solve(&DVector::from_element(s.len(), 1.0)) else { continue };
        if sol.iter().any(|v| !(*v >= 0.0)) {
            continue;
        }
        let mut nu = vec![0.0; m];
        for (i, &k) in s.iter().enumerate() {
            nu[k] = sol[i];
        }
        let feasible = (0..m).all(|k| (0..m).map(|l| gram[(k, l)] * nu[l]).sum::<f64>() >= 1.0 - 1e-10);
        if !feasible {
            continue;
        }
        let value: f64 = nu.iter().sum();
        if best.as_ref().map_or(true, |(v, _)| value < *v) {
            best = Some((value, nu));
        }
    }
    best.ok_or_else(|| Error::Infeasible("no admissible active set".into()))
}

/// An operator, an exponent and a finite set of constraint points.
pub struct CapacityInstance<'a> {
    pub op: &'a FracHeatOperator,
    pub p: f64,
    pub constraints: Vec<SpaceTimePoint>,
}

impl<'a> CapacityInstance<'a> {
    pub fn new(op: &'a FracHeatOperator, p: f64, constraints: Vec<SpaceTimePoint>) -> Self {
        CapacityInstance { op, p, constraints }
    }

    pub fn problem(&self) -> Result<CapacityProblem> {
        let rows = if self.constraints.is_empty() { Vec::new() } else { self.op.kernel_rows(&self.constraints)? };
        CapacityProblem::new(rows, self.op.grid.weights.clone(), self.p)
    }
}

pub fn capacity_primal(inst: &CapacityInstance, tol: f64) -> Result<CapacityResult> {
    solve_primal(&inst.problem()?, tol)
}

pub fn capacity_dual(inst: &CapacityInstance, tol: f64) -> Result<CapacityResult> {
    solve_dual(&inst.problem()?, tol)
}

#[derive(Debug, Clone, Serialize)]
pub struct DualityReport {
    pub primal: f64,
    pub dual: f64,
    /// (primal − dual)/primal
    pub gap: f64,
    /// sup |f_primal − (K*ν)^{p′−1}| / sup (K*ν)^{p′−1}
    pub extremal_residual: f64,
    /// Largest relative deviation among ν(K), ‖K*ν‖_{p′}^{p′},
    /// ∫ e^{−t𝓛^α}(K*ν)^{p′−1} dν and the capacity.
    pub identity_residual: f64,
    /// Fraction of ν-mass on constraints with (Af)_k ≤ 1 + 10·tol.
    pub slackness: f64,
    pub min_constraint: f64,
    pub primal_iterations: usize,
    pub dual_iterations: usize,
}

pub fn duality_check(prob: &CapacityProblem, tol: f64) -> Result<DualityReport> {
    let primal = solve_primal(prob, tol)?;
    let dual = solve_dual(prob, tol * 1e-4)?;
    let pp = prob.conjugate();
    let g = prob.adjoint(&dual.nu);
    let fk: Vec<f64> = g.iter().map(|v| v.powf(pp - 1.0)).collect();
    let top = fk.iter().cloned().fold(0.0, f64::max);
    let extremal_residual = primal.f.iter().zip(&fk).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / top;
    let c = dual.value;
    let mass: f64 = dual.nu.iter().sum();
    let energy: f64 = g.iter().zip(&prob.weights).map(|(v, w)| w * v.powf(pp)).sum();
    let afk = prob.apply(&fk);
    let pairing: f64 = dual.nu.iter().zip(&afk).map(|(a, b)| a * b).sum();
    let identity_residual = [mass, energy, pairing].iter().map(|v| (v - c).abs() / c).fold(0.0, f64::max);
    let af = prob.apply(&primal.f);
    let on: f64 = dual.nu.iter().zip(&af).filter(|(_, a)| **a <= 1.0 + 10.0 * tol).map(|(n, _)| n).sum();
    Ok(DualityReport {
        primal: primal.value,
        dual: dual.value,
        gap: (primal.value - dual.value) / primal.value,
        extremal_residual,
        identity_residual,
        slackness: if mass > 0.0 { on / mass } else { 1.0 },
        min_constraint: af.iter().cloned().fold(f64::INFINITY, f64::min),
        primal_iterations: primal.iterations,
        dual_iterations: dual.iterations,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PropertiesReport {
    pub empty: f64,
    /// Largest C(K₁) − C(K₂) over pairs with K₁ ⊆ K₂ (≤ 0 when monotone).
    pub monotone_excess: f64,
    /// Largest C(K₁ ∪ K₂) − C(K₁) − C(K₂) over pairs (≤ 0 when subadditive).
    pub subadditive_excess: f64,
    pub values: Vec<f64>,
}

fn subset_of(a: &[usize], b: &[usize]) -> bool {
    a.iter().all(|k| b.contains(k))
}

/// Checks C(∅) = 0, monotonicity and finite subadditivity over sets given
/// as row-index lists into a common problem.
pub fn capacity_properties_check(prob: &CapacityProblem, sets: &[Vec<usize>], tol: f64) -> Result<PropertiesReport> {
    let cap = |rows: &[usize]| -> Result<f64> {
        let mut r = rows.to_vec();
        r.sort_unstable();
        r.dedup();
        Ok(solve_dual(&prob.restrict(&r), tol)?.value)
    };
    let empty = cap(&[])?;
    let values: Vec<f64> = sets.iter().map(|s| cap(s)).collect::<Result<_>>()?;
    let mut monotone_excess = f64::NEG_INFINITY;
    let mut subadditive_excess = f64::NEG_INFINITY;
    for i in 0..sets.len() {
        for j in 0..sets.len() {
            if i != j && subset_of(&sets[i], &sets[j]) {
                monotone_excess = monotone_excess.max(values[i] - values[j]);
            }
            if i < j {
                let union: Vec<usize> = sets[i].iter().chain(&sets[j]).cloned().collect();
                subadditive_excess = subadditive_excess.max(cap(&union)? - values[i] - values[j]);
            }
        }
    }
    Ok(PropertiesReport { empty, monotone_excess, subadditive_excess, values })
}

/// How the base time of the parabolic ball depends on r.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum T0Rule {
    /// t₀ = r^{2α}
    Comparable,
    Fixed(f64),
}

#[derive(Debug, Clone, Serialize)]
pub struct SphericalSample {
    pub r: f64,
    pub t0: f64,
    pub value: f64,
    /// C / r^{β*}
    pub lower_ratio: f64,
    /// C / (t₀^{1/2α} + r)^β
    pub upper_ratio: f64,
    pub constraints: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SphericalScan {
    pub samples: Vec<SphericalSample>,
    pub slope: f64,
    /// min over r of C / r^{β*}
    pub lower_constant: f64,
    /// max over r of C / (t₀^{1/2α} + r)^β
    pub upper_constant: f64,
}

/// Capacities of discretized parabolic balls B_r(t₀, x₀) over `r_list`
/// (nt times by ns points per axis), with the log-log slope and both
/// envelope ratios.
pub fn spherical_capacity_scan(
    op: &FracHeatOperator,
    p: f64,
    r_list: &[f64],
    rule: T0Rule,
    x0: &[f64],
    nt: usize,
    ns: usize,
) -> Result<SphericalScan> {
    if r_list.len() < 2 {
        return input("spherical scan needs at least two radii");
    }
    let sp = &op.space;
    let a = op.alpha;
    let samples: Vec<SphericalSample> = r_list
        .par_iter()
        .map(|&r| {
            let t0 = match rule {
                T0Rule::Comparable => r.powf(2.0 * a),
                T0Rule::Fixed(t) => t,
            };
            let ball = ParabolicBall { t0, x0: x0.to_vec(), r };
            let pts = ball.sample(sp, a, nt, ns)?;
            let n = pts.len();
            let res = capacity_dual(&CapacityInstance::new(op, p, pts), 1e-10)?;
            Ok(SphericalSample {
                r,
                t0,
                value: res.value,
                lower_ratio: res.value / r.powf(sp.beta_star),
                upper_ratio: res.value / (t0.powf(1.0 / (2.0 * a)) + r).powf(sp.beta),
                constraints: n,
            })
        })
        .collect::<Result<_>>()?;
    let lx: Vec<f64> = samples.iter().map(|s| s.r.ln()).collect();
    let ly: Vec<f64> = samples.iter().map(|s| s.value.ln()).collect();
    let (slope, _) = quad::linear_fit(&lx, &ly);
    Ok(SphericalScan {
        lower_constant: samples.iter().map(|s| s.lower_ratio).fold(f64::INFINITY, f64::min),
        upper_constant: samples.iter().map(|s| s.upper_ratio).fold(0.0, f64::max),
        slope,
        samples,
    })
}

/// Space-time cells on which level sets are taken: every `stride`-th grid
/// node (per axis) at each of `times`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelCells {
    pub times: Vec<f64>,
    pub stride: usize,
}

impl LevelCells {
    pub fn points(&self, op: &FracHeatOperator) -> Vec<SpaceTimePoint> {
        let g = &op.grid;
        let s = self.stride.max(1);
        let mut out = Vec::new();
        for &t in &self.times {
            for i in 0..g.len() {
                if g.index(i).iter().all(|j| j % s == 0) {
                    out.push((t, g.node(i).to_vec()));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StrongTypeSample {
    /// Σⱼ 2^{jp} C(E_{2^j}) / ‖f‖_p^p
    pub strong: f64,
    /// sup_j 2^{jp} C(E_{2^j}) / ‖f‖_p^p
    pub weak: f64,
    /// (j, cells in E_{2^j}, capacity)
    pub levels: Vec<(i32, usize, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StrongTypeReport {
    pub max_ratio: f64,
    pub max_weak: f64,
    pub samples: Vec<StrongTypeSample>,
}

/// Dyadic capacitary sum for one f ≥ 0, given the kernel rows of the cells.
pub fn strong_type_sum(prob_cells: &CapacityProblem, f: &[f64]) -> Result<StrongTypeSample> {
    if f.len() != prob_cells.nodes() || f.iter().any(|v| !(*v >= 0.0)) {
        return input("f must be a nonnegative grid function");
    }
    let p = prob_cells.p;
    let norm = lp_norm(&prob_cells.weights, f, p).powf(p);
    if norm == 0.0 {
        return Ok(StrongTypeSample { strong: 0.0, weak: 0.0, levels: Vec::new() });
    }
    let u = prob_cells.apply(f);
    let max = u.iter().cloned().fold(0.0, f64::max);
    let min = u.iter().cloned().filter(|v| *v > 0.0).fold(f64::INFINITY, f64::min);
    let (jlo, jhi) = (min.log2().floor() as i32, max.log2().ceil() as i32);
    let mut levels = Vec::new();
    let mut sum = 0.0;
    let mut weak: f64 = 0.0;
    let mut last: Option<(Vec<usize>, f64)> = None;
    for j in jlo..=jhi {
        let lam = 2f64.powi(j);
        let rows: Vec<usize> = (0..u.len()).filter(|&k| u[k] >= lam).collect();
        if rows.is_empty() {
            continue;
        }
        let c = match &last {
            Some((r, c)) if *r == rows => *c,
            _ => solve_dual(&prob_cells.restrict(&rows), 1e-9)?.value,
        };
        let term = lam.powf(p) * c;
        sum += term;
        weak = weak.max(term);
        levels.push((j, rows.len(), c));
        last = Some((rows, c));
    }
    Ok(StrongTypeSample { strong: sum / norm, weak: weak / norm, levels })
}

pub fn strong_type_check(op: &FracHeatOperator, p: f64, f_samples: &[Vec<f64>], cells: &LevelCells) -> Result<StrongTypeReport> {
    let pts = cells.points(op);
    if pts.is_empty() {
        return input("no level-set cells");
    }
    let prob = CapacityProblem::new(op.kernel_rows(&pts)?, op.grid.weights.clone(), p)?;
    let samples: Vec<StrongTypeSample> = f_samples.par_iter().map(|f| strong_type_sum(&prob, f)).collect::<Result<_>>()?;
    Ok(StrongTypeReport {
        max_ratio: samples.iter().map(|s| s.strong).fold(0.0, f64::max),
        max_weak: samples.iter().map(|s| s.weak).fold(0.0, f64::max),
        samples,
    })
}

/// Capacities of atom subsets of a discrete measure; κ(ν; λ) is the least
/// capacity among recorded subsets of mass ≥ λ.
#[derive(Debug, Clone, Serialize)]
pub struct KappaTable {
    /// (subset mass, capacity) pairs.
    pub entries: Vec<(f64, f64)>,
    pub total_mass: f64,
    /// Set when the greedy chain replaced exhaustive enumeration.
    pub heuristic: bool,
}

pub const KAPPA_EXACT_ATOMS: usize = 12;

impl KappaTable {
    pub fn build(op: &FracHeatOperator, p: f64, nu: &DiscreteMeasure) -> Result<Self> {
        nu.validate(&op.space)?;
        let atoms: Vec<&Atom> = nu.atoms.iter().filter(|a| a.m > 0.0).collect();
        let total_mass = atoms.iter().map(|a| a.m).sum();
        if atoms.is_empty() {
            return Ok(KappaTable { entries: Vec::new(), total_mass, heuristic: false });
        }
        let pts: Vec<SpaceTimePoint> = atoms.iter().map(|a| (a.t, a.x.clone())).collect();
        let prob = CapacityProblem::new(op.kernel_rows(&pts)?, op.grid.weights.clone(), p)?;
        Self::from_problem(&prob, &atoms.iter().map(|a| a.m).collect::<Vec<_>>())
    }

    /// Same as `build` for atoms whose kernel rows are the rows of `prob`.
    pub fn from_problem(prob: &CapacityProblem, masses: &[f64]) -> Result<Self> {
        let n = masses.len();
        let total_mass = masses.iter().sum();
        if n <= KAPPA_EXACT_ATOMS {
            let entries = (1u32..(1 << n))
                .into_par_iter()
                .map(|mask| {
                    let rows: Vec<usize> = (0..n).filter(|k| mask >> k & 1 == 1).collect();
                    let mass = rows.iter().map(|&k| masses[k]).sum::<f64>();
                    Ok((mass, solve_dual(&prob.restrict(&rows), 1e-10)?.value))
                })
                .collect::<Result<Vec<_>>>()?;
            return Ok(KappaTable { entries, total_mass, heuristic: false });
        }
        // Greedy chain by smallest marginal capacity.
        let mut chosen: Vec<usize> = Vec::new();
        let mut current = 0.0;
        let mut entries = Vec::new();
        while chosen.len() < n {
            let mut best: Option<(f64, usize)> = None;
            for k in (0..n).filter(|k| !chosen.contains(k)) {
                let mut rows = chosen.clone();
                rows.push(k);
                let c = solve_dual(&prob.restrict(&rows), 1e-10)?.value;
                if best.map_or(true, |(b, _)| c - current < b) {
                    best = Some((c - current, k));
                }
            }
            let (dc, k) = best.unwrap();
            chosen.push(k);
            current += dc;
            entries.push((chosen.iter().map(|&i| masses[i]).sum(), current));
        }
        Ok(KappaTable { entries, total_mass, heuristic: true })
    }

    /// κ(ν; λ); +∞ when λ exceeds the total mass, 0 for λ ≤ 0.
    pub fn kappa(&self, lambda: f64) -> f64 {
        if lambda <= 0.0 {
            return 0.0;
        }
        self.entries
            .iter()
            .filter(|(m, _)| *m >= lambda * (1.0 - 1e-12))
            .map(|(_, c)| *c)
            .fold(f64::INFINITY, f64::min)
    }

    /// Breakpoints b₁ < b₂ < … of λ ↦ κ(ν; λ) with the value on (b_{j−1}, b_j].
    pub fn plateaus(&self) -> Vec<(f64, f64)> {
        let mut masses: Vec<f64> = self.entries.iter().map(|e| e.0).collect();
        masses.sort_by(f64::total_cmp);
        masses.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
        let mut out: Vec<(f64, f64)> = Vec::new();
        for m in masses {
            let k = self.kappa(m);
            match out.last_mut() {
                Some(last) if last.1 == k => last.0 = m,
                _ => out.push((m, k)),
            }
        }
        out
    }
}

pub fn kappa(nu: &DiscreteMeasure, lambda: f64, op: &FracHeatOperator, p: f64) -> Result<f64> {
    if lambda > nu.total_mass() * (1.0 + 1e-12) {
        return input(format!("lambda = {lambda} exceeds the total mass {}", nu.total_mass()));
    }
    Ok(KappaTable::build(op, p, nu)?.kappa(lambda))
}

/// sup_λ λ^{p/q}/κ(ν;λ), attained at a plateau right end.
pub fn kappa_sup_ratio(table: &KappaTable, p: f64, q: f64) -> f64 {
    table.plateaus().iter().map(|(b, k)| b.powf(p / q) / k).fold(0.0, f64::max)
}

/// ∫₀^∞ (λ^{p/q}/κ(ν;λ))^{q/(p−q)} dλ/λ summed exactly over the plateaus of κ.
pub fn kappa_integral(table: &KappaTable, p: f64, q: f64) -> f64 {
    let e = p / (p - q);
    let mut lo = 0.0f64;
    let mut total = 0.0;
    for (b, k) in table.plateaus() {
        total += k.powf(-q / (p - q)) * (b.powf(e) - lo.powf(e)) / e;
        lo = b;
    }
    total
}

/// Sampled sup of ‖e^{−t𝓛^α}f‖_{L^q(ν)}/‖f‖_p over nonnegative bump sums
/// and the candidate f = (K*ν)^{p′−1}.
pub fn embedding_ratio(op: &FracHeatOperator, p: f64, q: f64, nu: &DiscreteMeasure, trials: usize, seed: u64) -> Result<f64> {
    let atoms: Vec<&Atom> = nu.atoms.iter().filter(|a| a.m > 0.0).collect();
    if atoms.is_empty() {
        return Ok(0.0);
    }
    let pts: Vec<SpaceTimePoint> = atoms.iter().map(|a| (a.t, a.x.clone())).collect();
    let prob = CapacityProblem::new(op.kernel_rows(&pts)?, op.grid.weights.clone(), p)?;
    let ratio = |f: &[f64]| -> f64 {
        let u = prob.apply(f);
        let lq = atoms.iter().zip(&u).map(|(a, v)| a.m * v.abs().powf(q)).sum::<f64>().powf(1.0 / q);
        let lp = lp_norm(&prob.weights, f, p);
        if lp > 0.0 {
            lq / lp
        } else {
            0.0
        }
    };
    let pp = p / (p - 1.0);
    let g = prob.adjoint(&atoms.iter().map(|a| a.m).collect::<Vec<_>>());
    let mut best = ratio(&g.iter().map(|v| v.powf(pp - 1.0)).collect::<Vec<_>>());
    let mut rng = sampling::rng(seed);
    let c = op.grid.radius * 0.5;
    let widths = (op.grid.spacing * 2.0, (op.grid.radius * 0.25).max(op.grid.spacing * 2.0));
    for _ in 0..trials {
        let bumps = sampling::random_bumps(&mut rng, op.space.dim(), 4, c, widths, false);
        best = best.max(ratio(&sampling::bumps_on_grid(&bumps, &op.space, &op.grid)));
    }
    Ok(best)
}

#[derive(Debug, Clone, Serialize)]
pub struct LowerSectorReport {
    /// sup_λ λ^{p/q}/κ(ν;λ)
    pub kappa_ratio: f64,
    /// sup over sampled balls of ν(B_r(t₀,x₀))/r^{qβ/p}
    pub ball_ratio: f64,
    pub embedding_ratio: f64,
    /// embedding_ratio ≤ 100 · kappa_ratio^{1/p} whenever kappa_ratio ≤ 10.
    pub consistent: bool,
    pub heuristic: bool,
}

/// Ball scan over parabolic balls B_r(t₀, x) with (t, x) an anchor, t
/// placed mid-ball (t₀ = t − 1.5r^{2α}) and 0 < t₀ ≤ r^{2α}.
pub fn ball_condition_scan(
    space: &MetricMeasureSpace,
    alpha: f64,
    nu: &DiscreteMeasure,
    exponent: f64,
    radii: &[f64],
    anchors: &[SpaceTimePoint],
) -> f64 {
    let mut best: f64 = 0.0;
    for (t, x) in anchors {
        for &r in radii {
            let s = r.powf(2.0 * alpha);
            let t0 = t - 1.5 * s;
            if !(t0 > 0.0 && t0 <= s) {
                continue;
            }
            let ball = ParabolicBall { t0, x0: x.clone(), r };
            best = best.max(nu.ball_mass(space, alpha, &ball) / r.powf(exponent));
        }
    }
    best
}

pub fn trace_lower_sector(op: &FracHeatOperator, p: f64, q: f64, nu: &DiscreteMeasure, trials: usize, seed: u64) -> Result<LowerSectorReport> {
    if !(p > 1.0 && q >= p && q.is_finite()) {
        return input(format!("lower sector needs 1 < p <= q < inf, got p={p}, q={q}"));
    }
    let table = KappaTable::build(op, p, nu)?;
    let kappa_ratio = kappa_sup_ratio(&table, p, q);
    let radii = quad::logspace(1e-2, 1e2, 161);
    let ball_ratio = ball_condition_scan(&op.space, op.alpha, nu, q * op.space.beta / p, &radii, &nu.points());
    let embedding = embedding_ratio(op, p, q, nu, trials, seed)?;
    let consistent = kappa_ratio > 10.0 || embedding <= 100.0 * kappa_ratio.powf(1.0 / p);
    Ok(LowerSectorReport { kappa_ratio, ball_ratio, embedding_ratio: embedding, consistent, heuristic: table.heuristic })
}

#[derive(Debug, Clone, Serialize)]
pub struct UpperSectorReport {
    pub integral: f64,
    pub finite: bool,
    pub embedding_ratio: f64,
    pub heuristic: bool,
}

pub fn trace_upper_sector(op: &FracHeatOperator, p: f64, q: f64, nu: &DiscreteMeasure, trials: usize, seed: u64) -> Result<UpperSectorReport> {
    if !(q > 1.0 && p > q && p.is_finite()) {
        return input(format!("upper sector needs 1 < q < p < inf, got p={p}, q={q}"));
    }
    let table = KappaTable::build(op, p, nu)?;
    let integral = kappa_integral(&table, p, q);
    Ok(UpperSectorReport {
        integral,
        finite: integral.is_finite(),
        embedding_ratio: embedding_ratio(op, p, q, nu, trials, seed)?,
        heuristic: table.heuristic,
    })
}
