//! Christ dyadic cubes on finite clouds, α-dyadic space-time cubes,
//! Hedberg–Wolff potentials and parabolic maximal functions of discrete
//! measures.

use crate::capacity::{self, DiscreteMeasure, KappaTable};
use crate::error::{input, Result};
use crate::estimates::lp_norm;
use crate::frackernel::FracHeatOperator;
use crate::quad;
use crate::space::MetricMeasureSpace;
use rayon::prelude::*;
use serde::Serialize;

/// Time-slab width convention for α-dyadic cubes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SlabRule {
    /// Width δ^{2αk} at spatial scale k.
    Scaled,
    /// Width δ^{2α} at every scale.
    Literal,
}

#[derive(Debug, Clone, Serialize)]
pub struct DyadicTree {
    pub delta: f64,
    pub k_min: i32,
    pub k_max: i32,
    pub a0: f64,
    /// `centers[s]`: cloud indices of the net at scale k_min + s.
    pub centers: Vec<Vec<usize>>,
    /// `parents[s][γ]`: index into `centers[s − 1]`; empty at s = 0.
    pub parents: Vec<Vec<usize>>,
    /// `cube_of[s][i]`: cube index at scale k_min + s of cloud point i.
    pub cube_of: Vec<Vec<usize>>,
    #[serde(skip)]
    points: Vec<Vec<f64>>,
    #[serde(skip)]
    space: MetricMeasureSpace,
}

/// a₀ = (1 − δ)/4
pub fn default_a0(delta: f64) -> f64 {
    (1.0 - delta) / 4.0
}

fn nearest(space: &MetricMeasureSpace, points: &[Vec<f64>], centers: &[usize], x: &[f64]) -> usize {
    let mut best = 0;
    let mut bd = f64::INFINITY;
    for (g, &c) in centers.iter().enumerate() {
        let d = space.dist(x, &points[c]);
        if d < bd {
            bd = d;
            best = g;
        }
    }
    best
}

pub fn build_christ_tree(points: &[Vec<f64>], space: &MetricMeasureSpace, delta: f64, k_min: i32, k_max: i32) -> Result<DyadicTree> {
    if !(delta > 0.0 && delta < 1.0) {
        return input(format!("delta must lie in (0, 1), got {delta}"));
    }
    if points.is_empty() {
        return input("empty cloud");
    }
    if k_max < k_min {
        return input("k_max must be at least k_min");
    }
    for x in points {
        space.distance(x, x)?;
    }
    let scales = (k_max - k_min + 1) as usize;
    let mut centers = Vec::with_capacity(scales);
    for s in 0..scales {
        let r = delta.powi(k_min + s as i32);
        let mut net: Vec<usize> = Vec::new();
        for (i, x) in points.iter().enumerate() {
            if net.iter().all(|&c| space.dist(x, &points[c]) >= r) {
                net.push(i);
            }
        }
        centers.push(net);
    }
    let mut parents = vec![Vec::new()];
    for s in 1..scales {
        let half = 0.5 * delta.powi(k_min + s as i32 - 1);
        let up = &centers[s - 1];
        let par = centers[s]
            .iter()
            .map(|&c| {
                let z = &points[c];
                up.iter()
                    .position(|&u| space.dist(z, &points[u]) < half)
                    .unwrap_or_else(|| nearest(space, points, up, z))
            })
            .collect();
        parents.push(par);
    }
    let leaf: Vec<usize> = points.iter().map(|x| nearest(space, points, &centers[scales - 1], x)).collect();
    let mut cube_of = vec![Vec::new(); scales];
    cube_of[scales - 1] = leaf;
    for s in (0..scales - 1).rev() {
        cube_of[s] = cube_of[s + 1].iter().map(|&g| parents[s + 1][g]).collect();
    }
    Ok(DyadicTree {
        delta,
        k_min,
        k_max,
        a0: default_a0(delta),
        centers,
        parents,
        cube_of,
        points: points.to_vec(),
        space: space.clone(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ChristReport {
    /// Scale-k cubes partition the cloud.
    pub partition: bool,
    /// Cubes at different scales are nested or disjoint.
    pub nested: bool,
    /// Every cube lies in exactly one cube of the coarser scale.
    pub unique_parent: bool,
    /// max diam(Q^k_γ)/δ^k
    pub diameter_constant: f64,
    pub diameter_ok: bool,
    /// Every cube holds the cloud points of B(z^k_γ, a₀δ^k).
    pub contains_ball: bool,
    pub nets_separated: bool,
    pub nets_maximal: bool,
    pub parent_distance: bool,
    /// Fitted C₂, η in boundary fraction ≈ C₂ t^η.
    pub boundary_c2: f64,
    pub boundary_eta: f64,
}

impl ChristReport {
    pub fn exact_pass(&self) -> bool {
        self.partition
            && self.nested
            && self.unique_parent
            && self.diameter_ok
            && self.contains_ball
            && self.nets_separated
            && self.nets_maximal
            && self.parent_distance
    }
}

impl DyadicTree {
    pub fn scales(&self) -> usize {
        self.centers.len()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn scale(&self, s: usize) -> i32 {
        self.k_min + s as i32
    }

    /// Cloud indices of cube γ at scale index s.
    pub fn cube(&self, s: usize, g: usize) -> Vec<usize> {
        (0..self.points.len()).filter(|&i| self.cube_of[s][i] == g).collect()
    }

    /// Cube chain of an arbitrary point: nearest finest center, then parents.
    pub fn locate(&self, x: &[f64]) -> Vec<usize> {
        let n = self.scales();
        let mut out = vec![0; n];
        out[n - 1] = nearest(&self.space, &self.points, &self.centers[n - 1], x);
        for s in (0..n - 1).rev() {
            out[s] = self.parents[s + 1][out[s + 1]];
        }
        out
    }

    pub fn slab_width(&self, s: usize, alpha: f64, rule: SlabRule) -> f64 {
        match rule {
            SlabRule::Scaled => self.delta.powf(2.0 * alpha * self.scale(s) as f64),
            SlabRule::Literal => self.delta.powf(2.0 * alpha),
        }
    }

    /// Exact checks of the cube properties on the cloud plus the statistical
    /// boundary-layer fit.
    pub fn verify(&self) -> ChristReport {
        let n = self.points.len();
        let sp = &self.space;
        let nsc = self.scales();
        let mut partition = true;
        let mut members: Vec<Vec<Vec<usize>>> = Vec::with_capacity(nsc);
        for s in 0..nsc {
            let mut m = vec![Vec::new(); self.centers[s].len()];
            for i in 0..n {
                match m.get_mut(self.cube_of[s][i]) {
                    Some(v) => v.push(i),
                    None => partition = false,
                }
            }
            partition &= m.iter().map(|v| v.len()).sum::<usize>() == n && m.iter().all(|v| !v.is_empty());
            members.push(m);
        }
        let mut unique_parent = true;
        for s in 1..nsc {
            for cube in members[s].iter().filter(|c| !c.is_empty()) {
                let first = self.cube_of[s - 1][cube[0]];
                unique_parent &= cube.iter().all(|&i| self.cube_of[s - 1][i] == first);
            }
        }
        // Nested-or-disjoint across any two scales follows from per-point
        // chains; check it directly on pairs of scales.
        let mut nested = true;
        for s in 0..nsc {
            for l in s + 1..nsc {
                for cube in members[l].iter().filter(|c| !c.is_empty()) {
                    let g = self.cube_of[s][cube[0]];
                    nested &= cube.iter().all(|&i| self.cube_of[s][i] == g);
                }
            }
        }
        let mut diameter_constant: f64 = 0.0;
        let mut contains_ball = true;
        let mut nets_separated = true;
        let mut nets_maximal = true;
        let mut parent_distance = true;
        for s in 0..nsc {
            let r = self.delta.powi(self.scale(s));
            let cs = &self.centers[s];
            for (a, &ca) in cs.iter().enumerate() {
                for &cb in &cs[a + 1..] {
                    nets_separated &= sp.dist(&self.points[ca], &self.points[cb]) >= r;
                }
            }
            nets_maximal &= self.points.iter().all(|x| cs.iter().any(|&c| sp.dist(x, &self.points[c]) < r));
            if s > 0 {
                let up = r / self.delta;
                for (g, &c) in cs.iter().enumerate() {
                    let pz = &self.points[self.centers[s - 1][self.parents[s][g]]];
                    let d = sp.dist(&self.points[c], pz);
                    parent_distance &= d < up;
                    // Parent rule: a coarse center within δ^{k−1}/2 is the parent.
                    for (b, &u) in self.centers[s - 1].iter().enumerate() {
                        if sp.dist(&self.points[c], &self.points[u]) < 0.5 * up {
                            parent_distance &= self.parents[s][g] == b;
                        }
                    }
                }
            }
            for (g, cube) in members[s].iter().enumerate() {
                let mut diam: f64 = 0.0;
                for (a, &i) in cube.iter().enumerate() {
                    for &j in &cube[a + 1..] {
                        diam = diam.max(sp.dist(&self.points[i], &self.points[j]));
                    }
                }
                diameter_constant = diameter_constant.max(diam / r);
                let z = &self.points[cs[g]];
                let ball = self.a0 * r;
                contains_ball &= (0..n).all(|i| sp.dist(&self.points[i], z) >= ball || self.cube_of[s][i] == g);
            }
        }
        let diameter_ok = diameter_constant <= 4.0 / (1.0 - self.delta);
        let (boundary_c2, boundary_eta) = self.boundary_fit(&members);
        ChristReport {
            partition,
            nested,
            unique_parent,
            diameter_constant,
            diameter_ok,
            contains_ball,
            nets_separated,
            nets_maximal,
            parent_distance,
            boundary_c2,
            boundary_eta,
        }
    }

    /// Fraction of cube points within tδ^k of the rest of the cloud,
    /// averaged over cubes with at least two points and at least one
    /// outside point, fitted as C₂ t^η over t ∈ [1/16, 1].
    fn boundary_fit(&self, members: &[Vec<Vec<usize>>]) -> (f64, f64) {
        let n = self.points.len();
        let ts = quad::logspace(1.0 / 16.0, 1.0, 5);
        let mut sums = vec![0.0; ts.len()];
        let mut count = 0usize;
        for (s, cubes) in members.iter().enumerate() {
            let r = self.delta.powi(self.scale(s));
            for (g, cube) in cubes.iter().enumerate() {
                if cube.len() < 2 || cube.len() == n {
                    continue;
                }
                let dist_out: Vec<f64> = cube
                    .iter()
                    .map(|&i| {
                        (0..n)
                            .filter(|&j| self.cube_of[s][j] != g)
                            .map(|j| self.space.dist(&self.points[i], &self.points[j]))
                            .fold(f64::INFINITY, f64::min)
                    })
                    .collect();
                for (k, t) in ts.iter().enumerate() {
                    sums[k] += dist_out.iter().filter(|d| **d <= t * r).count() as f64 / cube.len() as f64;
                }
                count += 1;
            }
        }
        if count == 0 {
            return (0.0, 0.0);
        }
        let pts: Vec<(f64, f64)> = ts
            .iter()
            .zip(&sums)
            .filter(|(_, v)| **v > 0.0)
            .map(|(t, v)| (t.ln(), (v / count as f64).ln()))
            .collect();
        if pts.len() < 2 {
            return (0.0, 0.0);
        }
        let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        let (eta, c) = quad::linear_fit(&x, &y);
        (c.exp(), eta)
    }
}

/// One piece of ν(B_r(t,x)) as a function of r: `mass` on (lo, hi).
fn membership_intervals(space: &MetricMeasureSpace, nu: &DiscreteMeasure, alpha: f64, t: f64, x: &[f64]) -> Vec<(f64, f64, f64)> {
    let e = 1.0 / (2.0 * alpha);
    nu.atoms
        .iter()
        .filter(|a| a.t > t && a.m > 0.0)
        .filter_map(|a| {
            let lo = space.dist(x, &a.x).max(((a.t - t) / 2.0).powf(e));
            let hi = (a.t - t).powf(e);
            (lo < hi).then_some((lo, hi, a.m))
        })
        .collect()
}

/// ∫ c^{p′−1} r^{−Q(p′−1)−1} dr over step pieces of r ↦ ν(B_r).
fn integrate_steps(pieces: &[(f64, f64, f64)], p: f64, q_dim: f64) -> f64 {
    if pieces.is_empty() {
        return 0.0;
    }
    let pp = p / (p - 1.0);
    let c = q_dim * (pp - 1.0);
    let mut cuts: Vec<f64> = pieces.iter().flat_map(|&(a, b, _)| [a, b]).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (r1, r2) = (w[0], w[1]);
        let mid = 0.5 * (r1 + r2);
        let mass: f64 = pieces.iter().filter(|(a, b, _)| *a < mid && mid < *b).map(|x| x.2).sum();
        if mass > 0.0 {
            total += mass.powf(pp - 1.0) * (r1.powf(-c) - r2.powf(-c)) / c;
        }
    }
    total
}

/// P_{αp}ν(t,x) = ∫₀^∞ (ν(B_r(t,x))/r^Q)^{p′−1} dr/r, evaluated exactly.
pub fn wolff_potential(space: &MetricMeasureSpace, nu: &DiscreteMeasure, alpha: f64, p: f64, q_dim: f64, t: f64, x: &[f64]) -> Result<f64> {
    if !(p > 1.0 && p.is_finite()) {
        return input(format!("p must lie in (1, inf), got {p}"));
    }
    if !(alpha > 0.0 && alpha < 1.0) || !(q_dim > 0.0) {
        return input("alpha must lie in (0,1) and Q must be positive");
    }
    space.distance(x, x)?;
    Ok(integrate_steps(&membership_intervals(space, nu, alpha, t, x), p, q_dim))
}

/// M_αν(x) = sup_r r^{−Q} ν(B_r(r^{2α}, x)), exact over membership
/// breakpoints; the sup on each open piece is its left-end limit.
pub fn parabolic_maximal(space: &MetricMeasureSpace, nu: &DiscreteMeasure, alpha: f64, q_dim: f64, x: &[f64]) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) || !(q_dim > 0.0) {
        return input("alpha must lie in (0,1) and Q must be positive");
    }
    space.distance(x, x)?;
    let e = 1.0 / (2.0 * alpha);
    let pieces: Vec<(f64, f64, f64)> = nu
        .atoms
        .iter()
        .filter(|a| a.m > 0.0)
        .filter_map(|a| {
            let lo = space.dist(x, &a.x).max((a.t / 3.0).powf(e));
            let hi = (a.t / 2.0).powf(e);
            (lo < hi).then_some((lo, hi, a.m))
        })
        .collect();
    let mut best: f64 = 0.0;
    for &(r, _, _) in &pieces {
        // Pieces open at r: all intervals (a, b) with a ≤ r < b.
        let mass: f64 = pieces.iter().filter(|(a, b, _)| *a <= r && r < *b).map(|x| x.2).sum();
        best = best.max(mass * r.powf(-q_dim));
    }
    Ok(best)
}

/// α-dyadic cube key: (scale index, slab index, spatial cube).
type CubeKey = (usize, i64, usize);

fn cube_keys(tree: &DyadicTree, alpha: f64, rule: SlabRule, t: f64, x: &[f64]) -> Vec<CubeKey> {
    let chain = tree.locate(x);
    (0..tree.scales())
        .map(|s| (s, (t / tree.slab_width(s, alpha, rule)).floor() as i64, chain[s]))
        .collect()
}

/// ν-masses of all α-dyadic cubes met by the atoms.
fn cube_masses(tree: &DyadicTree, nu: &DiscreteMeasure, alpha: f64, rule: SlabRule) -> std::collections::HashMap<CubeKey, f64> {
    let mut out = std::collections::HashMap::new();
    for a in &nu.atoms {
        for k in cube_keys(tree, alpha, rule, a.t, &a.x) {
            *out.entry(k).or_insert(0.0) += a.m;
        }
    }
    out
}

/// P^d_{αp}ν(t,x) = Σ_{Q ∋ (t,x)} (ν(Q)/δ^{kQ})^{p′−1} over the tree's scales.
pub fn wolff_potential_dyadic(
    tree: &DyadicTree,
    nu: &DiscreteMeasure,
    alpha: f64,
    p: f64,
    q_dim: f64,
    rule: SlabRule,
    t: f64,
    x: &[f64],
) -> Result<f64> {
    if !(p > 1.0 && p.is_finite()) {
        return input(format!("p must lie in (1, inf), got {p}"));
    }
    let masses = cube_masses(tree, nu, alpha, rule);
    let pp = p / (p - 1.0);
    Ok(cube_keys(tree, alpha, rule, t, x)
        .iter()
        .map(|k| {
            let m = masses.get(k).copied().unwrap_or(0.0);
            let vol = tree.delta.powf(tree.scale(k.0) as f64 * q_dim);
            (m / vol).powf(pp - 1.0)
        })
        .sum())
}

/// M^d_ν h at each atom: sup over α-dyadic cubes containing the atom of the
/// ν-average of |h|.
pub fn dyadic_maximal(tree: &DyadicTree, nu: &DiscreteMeasure, alpha: f64, rule: SlabRule, h: &[f64]) -> Result<Vec<f64>> {
    if h.len() != nu.atoms.len() {
        return input("h must have one value per atom");
    }
    let keys: Vec<Vec<CubeKey>> = nu.atoms.iter().map(|a| cube_keys(tree, alpha, rule, a.t, &a.x)).collect();
    let mut sums: std::collections::HashMap<CubeKey, (f64, f64)> = std::collections::HashMap::new();
    for ((a, ks), v) in nu.atoms.iter().zip(&keys).zip(h) {
        for k in ks {
            let e = sums.entry(*k).or_insert((0.0, 0.0));
            e.0 += a.m;
            e.1 += a.m * v.abs();
        }
    }
    Ok(keys
        .iter()
        .map(|ks| {
            ks.iter()
                .filter_map(|k| sums.get(k).filter(|(m, _)| *m > 0.0).map(|(m, s)| s / m))
                .fold(0.0, f64::max)
        })
        .collect())
}

/// ∫ P_{αp}ν dν = Σ_k m_k P_{αp}ν(t_k, x_k).
pub fn wolff_energy(space: &MetricMeasureSpace, nu: &DiscreteMeasure, alpha: f64, p: f64, q_dim: f64) -> Result<f64> {
    let vals: Vec<f64> = nu
        .atoms
        .par_iter()
        .map(|a| wolff_potential(space, nu, alpha, p, q_dim, a.t, &a.x))
        .collect::<Result<_>>()?;
    Ok(nu.atoms.iter().zip(&vals).map(|(a, v)| a.m * v).sum())
}

#[derive(Debug, Clone, Serialize)]
pub struct EquivalenceBand {
    pub ratios: Vec<f64>,
    pub min: f64,
    pub max: f64,
    /// max/min
    pub band: f64,
}

impl EquivalenceBand {
    fn from(ratios: Vec<f64>) -> Self {
        let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = ratios.iter().cloned().fold(0.0, f64::max);
        EquivalenceBand { band: max / min, ratios, min, max }
    }
}

fn q_of(op: &FracHeatOperator) -> f64 {
    op.space.q_dim.unwrap_or(op.space.beta)
}

/// ‖(e^{−t𝓛^α})*ν‖_{p′}^{p′} / ∫ P_{αp}ν dν over the samples.
pub fn verify_wolff_equivalence(op: &FracHeatOperator, nu_samples: &[DiscreteMeasure], p: f64) -> Result<EquivalenceBand> {
    let pp = p / (p - 1.0);
    let q = q_of(op);
    let ratios = nu_samples
        .iter()
        .map(|nu| {
            let g = op.adjoint_apply(nu)?;
            let lhs = lp_norm(&op.grid.weights, &g, pp).powf(pp);
            let rhs = wolff_energy(&op.space, nu, op.alpha, p, q)?;
            Ok(lhs / rhs)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EquivalenceBand::from(ratios))
}

/// ‖(e^{−t𝓛^α})*ν‖_p / ‖M_αν‖_p on the operator grid.
pub fn verify_maximal_equivalence(op: &FracHeatOperator, nu_samples: &[DiscreteMeasure], p: f64) -> Result<EquivalenceBand> {
    let q = q_of(op);
    let ratios = nu_samples
        .iter()
        .map(|nu| {
            let g = op.adjoint_apply(nu)?;
            let m: Vec<f64> = (0..op.grid.len())
                .into_par_iter()
                .map(|i| parabolic_maximal(&op.space, nu, op.alpha, q, op.grid.node(i)))
                .collect::<Result<_>>()?;
            Ok(lp_norm(&op.grid.weights, &g, p) / lp_norm(&op.grid.weights, &m, p))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EquivalenceBand::from(ratios))
}

#[derive(Debug, Clone, Serialize)]
pub struct WolffTraceReport {
    /// ∫ (P_{αp}ν)^{q(p−1)/(p−q)} dν
    pub integral: f64,
    pub finite: bool,
    pub embedding_ratio: f64,
    /// κ-based I_{p,q}(ν).
    pub kappa_integral: f64,
    pub kappa_finite: bool,
    pub heuristic: bool,
}

pub fn wolff_trace_integral(space: &MetricMeasureSpace, nu: &DiscreteMeasure, alpha: f64, p: f64, q: f64, q_dim: f64) -> Result<f64> {
    if !(q > 1.0 && p > q && p.is_finite()) {
        return input(format!("Wolff trace condition needs 1 < q < p < inf, got p={p}, q={q}"));
    }
    let s = q * (p - 1.0) / (p - q);
    let mut total = 0.0;
    for a in &nu.atoms {
        total += a.m * wolff_potential(space, nu, alpha, p, q_dim, a.t, &a.x)?.powf(s);
    }
    Ok(total)
}

pub fn trace_condition_wolff(op: &FracHeatOperator, p: f64, q: f64, nu: &DiscreteMeasure, trials: usize, seed: u64) -> Result<WolffTraceReport> {
    nu.validate(&op.space)?;
    let integral = wolff_trace_integral(&op.space, nu, op.alpha, p, q, q_of(op))?;
    let table = KappaTable::build(op, p, nu)?;
    let ki = capacity::kappa_integral(&table, p, q);
    Ok(WolffTraceReport {
        integral,
        finite: integral.is_finite(),
        embedding_ratio: capacity::embedding_ratio(op, p, q, nu, trials, seed)?,
        kappa_integral: ki,
        kappa_finite: ki.is_finite(),
        heuristic: table.heuristic,
    })
}
