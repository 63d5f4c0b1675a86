//! Empirical constants for the pointwise kernel envelopes and the
//! smoothing/Young inequalities.
//!
//! Every kernel here is self-similar, so scans run over t and the reduced
//! distance ρ = d / t^{1/2α}.

use crate::error::{input, Error, Result};
use crate::frackernel::FracHeatOperator;
use crate::quad;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

/// Scan layout: t log-spaced in [t_min, t_max], ρ = 0 plus log-spaced in
/// [rho_min, rho_max].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnvelopeGrid {
    pub t_min: f64,
    pub t_max: f64,
    pub nt: usize,
    pub rho_min: f64,
    pub rho_max: f64,
    pub nrho: usize,
}

impl Default for EnvelopeGrid {
    fn default() -> Self {
        EnvelopeGrid { t_min: 0.1, t_max: 10.0, nt: 9, rho_min: 1e-3, rho_max: 1e3, nrho: 241 }
    }
}

impl EnvelopeGrid {
    /// Nested grid with halved spacing.
    pub fn refined(&self) -> Self {
        EnvelopeGrid { nt: 2 * self.nt - 1, nrho: 2 * self.nrho - 1, ..*self }
    }

    fn rhos(&self) -> Vec<f64> {
        let mut r = vec![0.0];
        r.extend(quad::logspace(self.rho_min, self.rho_max, self.nrho));
        r
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EnvelopeReport {
    pub name: String,
    pub grid: EnvelopeGrid,
    pub sup: f64,
    pub argmax: (f64, f64),
    pub inf: f64,
    pub argmin: (f64, f64),
    /// Change of sup and inf on the refined grid, relative to the sup.
    pub refine_delta: f64,
}

struct Scan {
    sup: f64,
    argmax: (f64, f64),
    inf: f64,
    argmin: (f64, f64),
}

fn scan(grid: &EnvelopeGrid, ell: &(dyn Fn(f64) -> f64 + Sync), ratio: &(dyn Fn(f64, f64) -> f64 + Sync)) -> Scan {
    let ts = quad::logspace(grid.t_min, grid.t_max, grid.nt);
    let rhos = grid.rhos();
    let pts: Vec<(f64, f64, f64)> = ts.iter().flat_map(|&t| rhos.iter().map(move |&r| (t, r, 0.0))).collect();
    let vals: Vec<(f64, f64, f64)> = pts
        .par_iter()
        .map(|&(t, r, _)| (t, r, ratio(t, r * ell(t))))
        .collect();
    let nr = rhos.len();
    let mut imax = 0;
    let mut imin = 0;
    for (i, v) in vals.iter().enumerate() {
        if v.2 > vals[imax].2 {
            imax = i;
        }
        if v.2 < vals[imin].2 {
            imin = i;
        }
    }
    // Golden refinement in ln ρ between the neighbouring grid points.
    let polish = |i: usize, sign: f64| -> (f64, f64, f64) {
        let (t, _, v) = vals[i];
        let k = i % nr;
        if k < 2 || k + 1 >= nr {
            return (t, vals[i].1, v);
        }
        let (a, b) = (rhos[k - 1].ln(), rhos[k + 1].ln());
        let l = ell(t);
        let (x, fx) = quad::golden_max(|x| sign * ratio(t, x.exp() * l), a, b, 1e-10);
        if sign * fx > sign * v {
            (t, x.exp(), sign * fx)
        } else {
            (t, vals[i].1, v)
        }
    };
    let (tmax, rmax, sup) = polish(imax, 1.0);
    let (tmin, rmin, inf) = polish(imin, -1.0);
    Scan { sup, argmax: (tmax, rmax * ell(tmax)), inf, argmin: (tmin, rmin * ell(tmin)) }
}

fn report(
    name: &str,
    grid: &EnvelopeGrid,
    ell: &(dyn Fn(f64) -> f64 + Sync),
    ratio: &(dyn Fn(f64, f64) -> f64 + Sync),
) -> EnvelopeReport {
    let a = scan(grid, ell, ratio);
    let b = scan(&grid.refined(), ell, ratio);
    let scale = a.sup.abs().max(b.sup.abs());
    let rel = |x: f64, y: f64| if x == y { 0.0 } else { (x - y).abs() / scale };
    EnvelopeReport {
        name: name.to_string(),
        grid: *grid,
        sup: a.sup,
        argmax: a.argmax,
        inf: a.inf,
        argmin: a.argmin,
        refine_delta: rel(a.sup, b.sup).max(rel(a.inf, b.inf)),
    }
}

/// K_{α,t}(d) · (t^{1/2α}+d)^{β*+2α} / t.
pub fn verify_upper_envelope(op: &FracHeatOperator, grid: &EnvelopeGrid) -> Result<EnvelopeReport> {
    let e = op.space.beta_star + 2.0 * op.alpha;
    let ell = |t: f64| op.natural_length(t);
    let ratio = |t: f64, d: f64| op.profile(t, d) * (op.natural_length(t) + d).powf(e) / t;
    Ok(report("upper", grid, &ell, &ratio))
}

/// K_{α,t}(d) · (t^{1/2α}+d)^{β+2α} / t; needs A4.
pub fn verify_lower_envelope(op: &FracHeatOperator, grid: &EnvelopeGrid) -> Result<EnvelopeReport> {
    if !op.model.flags.a4 {
        return Err(Error::Precondition("lower envelope needs assumption A4".into()));
    }
    let e = op.space.beta + 2.0 * op.alpha;
    let ell = |t: f64| op.natural_length(t);
    let ratio = |t: f64, d: f64| op.profile(t, d) * (op.natural_length(t) + d).powf(e) / t;
    Ok(report("lower", grid, &ell, &ratio))
}

/// |∂_tK_{α,t}(d)| · (t^{1/2α}+d)^{β*+2α}; needs A1 and A2.
pub fn verify_time_derivative_bound(op: &FracHeatOperator, grid: &EnvelopeGrid) -> Result<EnvelopeReport> {
    if !(op.model.flags.a1 && op.model.flags.a2) {
        return Err(Error::Precondition("time derivative bound needs A1 and A2".into()));
    }
    let e = op.space.beta_star + 2.0 * op.alpha;
    let ell = |t: f64| op.natural_length(t);
    let ratio = |t: f64, d: f64| op.time_derivative_profile(t, d).abs() * (op.natural_length(t) + d).powf(e);
    Ok(report("time_derivative", grid, &ell, &ratio))
}

/// |𝓛^{θ/2}K_{α,t}(d)| · (t^{1/2α}+d)^{β*+θ}; needs A1, A2 and 0 < θ/2α ≤ 1.
pub fn verify_frac_derivative_bound(op: &FracHeatOperator, theta: f64, grid: &EnvelopeGrid) -> Result<EnvelopeReport> {
    let fp = op.frac_power(theta)?;
    if !(op.model.flags.a1 && op.model.flags.a2) {
        return Err(Error::Precondition("fractional derivative bound needs A1 and A2".into()));
    }
    let e = op.space.beta_star + theta;
    let ell = |t: f64| op.natural_length(t);
    let ratio = |t: f64, d: f64| fp.profile(op, t, d).abs() * (op.natural_length(t) + d).powf(e);
    Ok(report(&format!("frac_derivative_{theta}"), grid, &ell, &ratio))
}

/// Weighted discrete L^p norm; p = ∞ gives the max.
pub fn lp_norm(weights: &[f64], f: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        return f.iter().fold(0.0, |m, v| m.max(v.abs()));
    }
    f.iter().zip(weights).map(|(v, w)| w * v.abs().powf(p)).sum::<f64>().powf(1.0 / p)
}

fn inv(p: f64) -> f64 {
    if p.is_infinite() {
        0.0
    } else {
        1.0 / p
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct YoungReport {
    pub max_ratio: f64,
    /// max of the largest row and column L^q norms.
    pub bound: f64,
    pub ratios: Vec<f64>,
}

/// ‖Kf‖_p / ‖f‖_r for random f ≥ 0, where (Kf)_i = Σ_j w_j K_ij f_j.
pub fn verify_young(
    kernel: &[Vec<f64>],
    weights: &[f64],
    q: f64,
    r: f64,
    p: f64,
    trials: usize,
    seed: u64,
) -> Result<YoungReport> {
    for (name, e) in [("q", q), ("r", r), ("p", p)] {
        if !(e >= 1.0) {
            return input(format!("exponent {name}={e} must be at least 1"));
        }
    }
    if ((inv(q) + inv(r)) - (inv(p) + 1.0)).abs() > 1e-12 {
        return input(format!("1/q + 1/r = 1/p + 1 fails for q={q}, r={r}, p={p}"));
    }
    let n = weights.len();
    if kernel.len() != n || kernel.iter().any(|row| row.len() != n) {
        return input("kernel matrix must be square with one row per weight");
    }
    let row_max = kernel.iter().map(|row| lp_norm(weights, row, q)).fold(0.0, f64::max);
    let col_max = (0..n)
        .map(|j| lp_norm(weights, &kernel.iter().map(|row| row[j]).collect::<Vec<_>>(), q))
        .fold(0.0, f64::max);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ratios = Vec::with_capacity(trials);
    for _ in 0..trials {
        let f: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let kf: Vec<f64> = kernel
            .iter()
            .map(|row| row.iter().zip(weights).zip(&f).map(|((k, w), v)| k * w * v).sum())
            .collect();
        ratios.push(lp_norm(weights, &kf, p) / lp_norm(weights, &f, r));
    }
    let max_ratio = ratios.iter().cloned().fold(0.0, f64::max);
    Ok(YoungReport { max_ratio, bound: row_max.max(col_max), ratios })
}

/// Data realizing the L^r → L^p rate: |x|^{−β*/r} clamped at `width`
/// for r > 1, a Gaussian bump of that width for r = 1.
///
/// Fixed bounded data decays at the L¹ rate for large t, so the sharp
/// exponent needs data with no intrinsic scale.
pub fn scale_critical_data(op: &FracHeatOperator, r: f64, width: f64) -> Vec<f64> {
    let origin = vec![0.0; op.grid.dim];
    (0..op.grid.len())
        .map(|i| {
            let d = op.space.dist(op.grid.node(i), &origin);
            if r == 1.0 {
                (-(d / width).powi(2)).exp()
            } else {
                d.max(width).powf(-op.space.beta_star / r)
            }
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct SmoothingFit {
    pub slope: f64,
    pub expected: f64,
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
}

/// Fits log‖𝓛^{θ/2} e^{−t𝓛^α}φ‖_p against log t on 25 points in [0.1, 10].
///
/// Expected slope −β*(1/r − 1/p)/2α − θ/2α.
pub fn verify_smoothing(op: &FracHeatOperator, phi: &[f64], r: f64, p: f64, theta: f64) -> Result<SmoothingFit> {
    if !(r >= 1.0 && p >= r) {
        return input(format!("need 1 <= r <= p, got r={r}, p={p}"));
    }
    if phi.len() != op.grid.len() {
        return input("phi does not match the grid");
    }
    let w = &op.grid.weights;
    if phi.iter().any(|v| !v.is_finite()) || !(lp_norm(w, phi, r) > 0.0) {
        return input("phi must be finite with positive L^r norm");
    }
    let fp = if theta > 0.0 { Some(op.frac_power(theta)?) } else { None };
    let times = quad::logspace(0.1, 10.0, 25);
    let mut norms = Vec::with_capacity(times.len());
    for &t in &times {
        let u = match &fp {
            None => op.semigroup_apply(t, phi)?,
            Some(fp) => op.apply_radial(&|d| fp.profile(op, t, d), phi)?,
        };
        norms.push(lp_norm(w, &u, p));
    }
    let lx: Vec<f64> = times.iter().map(|t| t.ln()).collect();
    let ly: Vec<f64> = norms.iter().map(|n| n.ln()).collect();
    let (slope, _) = quad::linear_fit(&lx, &ly);
    let expected = -(op.space.beta_star * (inv(r) - inv(p)) + theta) / (2.0 * op.alpha);
    Ok(SmoothingFit { slope, expected, times, norms })
}
