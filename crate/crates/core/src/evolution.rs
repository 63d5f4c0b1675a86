//! The Cauchy problem ∂_t u + 𝓛^α u = f, u(0) = φ, solved as
//! u = e^{−t𝓛^α}φ + G(f) with G(f)(t) = ∫₀^t e^{−(t−τ)𝓛^α} f(τ) dτ,
//! together with space-time norms and checks of the associated estimates.

use crate::error::{input, Error, Result};
use crate::estimates::lp_norm;
use crate::frackernel::{FracHeatOperator, SpaceTimeField};
use crate::quad;
use crate::sampling;
use crate::space::{HeatModelKind, SpaceKind};
use rustfft::{num_complex::Complex, FftPlanner};
use serde::Serialize;

fn inv(p: f64) -> f64 {
    if p.is_infinite() {
        0.0
    } else {
        1.0 / p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdmissibleTriplet {
    pub q: f64,
    pub p: f64,
    pub r: f64,
    pub generalized: bool,
}

impl AdmissibleTriplet {
    /// Triplet with q fixed by 1/q = β*(1/r − 1/p)/2α.
    pub fn from_rp(r: f64, p: f64, alpha: f64, beta_star: f64, generalized: bool) -> Self {
        let iq = beta_star * (inv(r) - inv(p)) / (2.0 * alpha);
        let q = if iq == 0.0 { f64::INFINITY } else { 1.0 / iq };
        AdmissibleTriplet { q, p, r, generalized }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Admissibility {
    pub admissible: bool,
    pub scaling: bool,
    pub range: bool,
    pub diagnostics: Vec<String>,
}

/// Checks 1/q = β*(1/r − 1/p)/2α and 1 < r ≤ p < p_max, where
/// p_max = β*r/(β* − 2α) (plain) or β*r/(β* − 2αr) (generalized) when
/// β* > 2rα and ∞ otherwise.
pub fn is_admissible(q: f64, p: f64, r: f64, alpha: f64, beta_star: f64, generalized: bool) -> Admissibility {
    let mut diagnostics = Vec::new();
    for (name, e) in [("q", q), ("p", p), ("r", r)] {
        if !(e > 1.0) {
            diagnostics.push(format!("{name}={e} is not in (1, inf]"));
        }
    }
    let lhs = inv(q);
    let rhs = beta_star * (inv(r) - inv(p)) / (2.0 * alpha);
    let scaling = (lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs());
    if !scaling {
        diagnostics.push(format!("scaling: 1/q = {lhs} but beta*(1/r - 1/p)/(2 alpha) = {rhs}"));
    }
    let p_max = if beta_star > 2.0 * r * alpha {
        if generalized {
            beta_star * r / (beta_star - 2.0 * alpha * r)
        } else {
            beta_star * r / (beta_star - 2.0 * alpha)
        }
    } else {
        f64::INFINITY
    };
    let mut range = true;
    if !(r > 1.0 && r <= p) {
        range = false;
        diagnostics.push(format!("range: need 1 < r <= p, got r={r}, p={p}"));
    }
    if !(p < p_max) {
        range = false;
        diagnostics.push(format!("range: need p < {p_max}, got p={p}"));
    }
    let exps_ok = q > 1.0 && p > 1.0 && r > 1.0;
    Admissibility { admissible: scaling && range && exps_ok, scaling, range, diagnostics }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    LqLp,
    CqLp,
    CqDotLp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightedNorm {
    pub kind: NormKind,
    pub q: f64,
    pub p: f64,
}

/// Trapezoid weights over the given times.
pub fn trapezoid_weights(times: &[f64]) -> Vec<f64> {
    let n = times.len();
    let mut w = vec![0.0; n];
    for k in 1..n {
        let h = 0.5 * (times[k] - times[k - 1]);
        w[k - 1] += h;
        w[k] += h;
    }
    w
}

/// Gauss–Legendre times and weights on [0, T].
pub fn gauss_times(horizon: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    quad::gauss_legendre_on(n, 0.0, horizon)
}

/// L^q(I; L^p) uses `time_weights` as the rule in t; C_q is
/// sup_t t^{1/q}‖u(t)‖_p, and Ċ_q also requires the weighted value at the
/// smallest time to be below 1% of the sup.
pub fn spacetime_norm(
    field: &SpaceTimeField,
    space_weights: &[f64],
    time_weights: &[f64],
    norm: &WeightedNorm,
) -> Result<f64> {
    if !(norm.q >= 1.0 && norm.p >= 1.0) {
        return input(format!("norm exponents must be at least 1, got q={}, p={}", norm.q, norm.p));
    }
    if field.values.iter().flatten().any(|v| !v.is_finite()) {
        return input("field has non-finite entries");
    }
    if time_weights.len() != field.times.len() {
        return input("one time weight per slice required");
    }
    let slices: Vec<f64> = field.values.iter().map(|v| lp_norm(space_weights, v, norm.p)).collect();
    match norm.kind {
        NormKind::LqLp => {
            if norm.q.is_infinite() {
                return Ok(slices.iter().cloned().fold(0.0, f64::max));
            }
            let s: f64 = slices.iter().zip(time_weights).map(|(v, w)| w * v.powf(norm.q)).sum();
            Ok(s.powf(1.0 / norm.q))
        }
        NormKind::CqLp | NormKind::CqDotLp => {
            let weighted: Vec<f64> =
                slices.iter().zip(&field.times).map(|(v, t)| t.powf(inv(norm.q)) * v).collect();
            let sup = weighted.iter().cloned().fold(0.0, f64::max);
            if norm.kind == NormKind::CqDotLp && weighted.first().is_some_and(|&w0| w0 > 1e-2 * sup) {
                return Err(Error::Precondition(format!(
                    "weighted norm {} at t={} does not vanish relative to sup {sup}",
                    weighted[0], field.times[0]
                )));
            }
            Ok(sup)
        }
    }
}

/// A source f(t, ·) sampled on the operator's grid.
pub trait SourceTerm: Sync {
    fn slice(&self, t: f64, op: &FracHeatOperator) -> Vec<f64>;
}

/// Source given pointwise by a closure (t, x) ↦ f(t, x).
pub struct PointSource<F>(pub F);

impl<F: Fn(f64, &[f64]) -> f64 + Sync> SourceTerm for PointSource<F> {
    fn slice(&self, t: f64, op: &FracHeatOperator) -> Vec<f64> {
        (0..op.grid.len()).map(|i| (self.0)(t, op.grid.node(i))).collect()
    }
}

impl SourceTerm for SpaceTimeField {
    fn slice(&self, t: f64, _op: &FracHeatOperator) -> Vec<f64> {
        self.slice_at(t)
    }
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return input("time grid is empty");
    }
    if times.windows(2).any(|w| w[1] <= w[0]) || times.iter().any(|&t| !(t > 0.0)) {
        return input("times must be positive and increasing");
    }
    Ok(())
}

/// u(t) = e^{−t𝓛^α}φ at each time.
pub fn homogeneous_solve(op: &FracHeatOperator, phi: &[f64], times: &[f64]) -> Result<SpaceTimeField> {
    check_times(times)?;
    let values = times.iter().map(|&t| op.semigroup_apply(t, phi)).collect::<Result<Vec<_>>>()?;
    SpaceTimeField::new(times.to_vec(), values)
}

const DUHAMEL_PANELS: usize = 16;

// Lags below s_c are not resolved by the grid: e^{−s𝓛^α} for s < s_c is
// replaced by its midpoint value e^{−(s_c/2)𝓛^α}, for which t^{1/2α}
// equals 1.5 grid spacings.
fn lag_floor(op: &FracHeatOperator) -> f64 {
    2.0 * (1.5 * op.grid.spacing).powf(2.0 * op.alpha)
}

fn axpy(acc: &mut [f64], a: f64, x: &[f64]) {
    for (o, v) in acc.iter_mut().zip(x) {
        *o += a * v;
    }
}

/// G(f)(t) on the grid.
pub fn duhamel_at(op: &FracHeatOperator, f: &dyn SourceTerm, t: f64) -> Result<Vec<f64>> {
    if !(t > 0.0) {
        return input(format!("time must be positive, got {t}"));
    }
    let n = op.grid.len();
    let sc = lag_floor(op);
    let sn = sc.min(t);
    let (gx, gw) = quad::gauss_legendre_on(4, 0.0, sn);
    let mut near = vec![0.0; n];
    for (s, w) in gx.iter().zip(&gw) {
        let v = f.slice(t - s, op);
        if v.len() != n {
            return input("source slice does not match the grid");
        }
        axpy(&mut near, *w, &v);
    }
    let mut out = if sn == sc { op.semigroup_apply(0.5 * sc, &near)? } else { near };
    if t > sc {
        // Lags graded towards s_c: s_k = s_c + (t − s_c)(k/N)².
        let (x4, w4) = quad::gauss_legendre(4);
        for k in 0..DUHAMEL_PANELS {
            let a = sc + (t - sc) * (k as f64 / DUHAMEL_PANELS as f64).powi(2);
            let b = sc + (t - sc) * ((k + 1) as f64 / DUHAMEL_PANELS as f64).powi(2);
            for (xi, wi) in x4.iter().zip(&w4) {
                let s = 0.5 * (a + b) + 0.5 * (b - a) * xi;
                let v = f.slice(t - s, op);
                axpy(&mut out, 0.5 * (b - a) * wi, &op.semigroup_apply(s, &v)?);
            }
        }
    }
    Ok(out)
}

pub fn duhamel_solve(op: &FracHeatOperator, f: &dyn SourceTerm, times: &[f64]) -> Result<SpaceTimeField> {
    check_times(times)?;
    let values = times.iter().map(|&t| duhamel_at(op, f, t)).collect::<Result<Vec<_>>>()?;
    SpaceTimeField::new(times.to_vec(), values)
}

/// 𝓛^α g on a 1-D grid via the symbol |ξ|^{2α}, zero-padded.
pub fn fourier_generator(op: &FracHeatOperator, g: &[f64]) -> Result<Vec<f64>> {
    if op.grid.dim != 1 || !matches!(op.space.kind, SpaceKind::Euclidean { .. }) {
        return Err(Error::Precondition("Fourier generator needs a 1-D euclidean grid".into()));
    }
    let m = g.len();
    let size = (2 * m).next_power_of_two();
    let h = op.grid.spacing;
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(size);
    let bwd = planner.plan_fft_inverse(size);
    let mut buf: Vec<Complex<f64>> =
        (0..size).map(|i| Complex::new(if i < m { g[i] } else { 0.0 }, 0.0)).collect();
    fwd.process(&mut buf);
    for (k, c) in buf.iter_mut().enumerate() {
        let kk = if k <= size / 2 { k as f64 } else { k as f64 - size as f64 };
        let xi = 2.0 * std::f64::consts::PI * kk / (size as f64 * h);
        *c *= xi.abs().powf(2.0 * op.alpha);
    }
    bwd.process(&mut buf);
    Ok(buf[..m].iter().map(|c| c.re / size as f64).collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    pub times: Vec<f64>,
    /// max |∂_t u + 𝓛^α u − f| per time over the interior nodes.
    pub residuals: Vec<f64>,
    /// max of |∂_t u| and |f| over the same nodes.
    pub scale: f64,
    pub relative: f64,
}

/// Residual of u = e^{−t𝓛^α}φ + G(f) on the exact 1-D model, with ∂_t by
/// Richardson-extrapolated central differences and 𝓛^α by its Fourier
/// symbol; nodes with |x| > `interior` are ignored.
pub fn duhamel_residual(
    op: &FracHeatOperator,
    phi: Option<&[f64]>,
    f: &dyn SourceTerm,
    times: &[f64],
    interior: f64,
) -> Result<ResidualReport> {
    check_times(times)?;
    if op.model.kind != HeatModelKind::ExactGaussian || op.grid.dim != 1 {
        return Err(Error::Precondition("residual check needs the exact 1-D model".into()));
    }
    let u = |t: f64| -> Result<Vec<f64>> {
        let mut g = duhamel_at(op, f, t)?;
        if let Some(phi) = phi {
            axpy(&mut g, 1.0, &op.semigroup_apply(t, phi)?);
        }
        Ok(g)
    };
    let nodes: Vec<usize> = (0..op.grid.len()).filter(|&i| op.grid.node(i)[0].abs() <= interior).collect();
    let mut residuals = Vec::with_capacity(times.len());
    let mut scale: f64 = 0.0;
    for &t in times {
        let dt = 0.01 * t.min(1.0);
        let cd = |h: f64| -> Result<Vec<f64>> {
            let (a, b) = (u(t + h)?, u(t - h)?);
            Ok(a.iter().zip(&b).map(|(x, y)| (x - y) / (2.0 * h)).collect())
        };
        let (d1, d2) = (cd(dt)?, cd(0.5 * dt)?);
        let ut: Vec<f64> = d1.iter().zip(&d2).map(|(a, b)| (4.0 * b - a) / 3.0).collect();
        let lu = fourier_generator(op, &u(t)?)?;
        let ft = f.slice(t, op);
        let mut worst: f64 = 0.0;
        for &i in &nodes {
            worst = worst.max((ut[i] + lu[i] - ft[i]).abs());
            scale = scale.max(ut[i].abs()).max(ft[i].abs());
        }
        residuals.push(worst);
    }
    let max = residuals.iter().cloned().fold(0.0, f64::max);
    let relative = if scale > 0.0 { max / scale } else { max };
    Ok(ResidualReport { times: times.to_vec(), residuals, scale, relative })
}

#[derive(Debug, Clone, Serialize)]
pub struct RatioReport {
    pub max_ratio: f64,
    pub ratios: Vec<f64>,
}

fn random_phi(op: &FracHeatOperator, rng: &mut rand_chacha::ChaCha8Rng) -> Vec<f64> {
    let c = op.grid.radius / 3.0;
    let bumps = sampling::random_bumps(rng, op.grid.dim, 5, c, (0.2, 1.0), true);
    sampling::bumps_on_grid(&bumps, &op.space, &op.grid)
}

/// max over random φ of ‖e^{−t𝓛^α}φ‖_{L^q(0,T;L^p)}/‖φ‖_r, or of the C_q
/// norm for generalized triplets.
pub fn verify_homogeneous_estimate(
    op: &FracHeatOperator,
    triplet: &AdmissibleTriplet,
    horizon: f64,
    trials: usize,
    seed: u64,
) -> Result<RatioReport> {
    let adm = is_admissible(triplet.q, triplet.p, triplet.r, op.alpha, op.space.beta_star, triplet.generalized);
    if !adm.admissible {
        return input(format!("triplet not admissible: {}", adm.diagnostics.join("; ")));
    }
    // Log-spaced times; the head [0, t₀] is charged at u(t₀).
    let times = quad::logspace(1e-3 * horizon, horizon, 40);
    let mut tw: Vec<f64> = Vec::with_capacity(times.len());
    let lt: Vec<f64> = times.iter().map(|t| t.ln()).collect();
    let lw = trapezoid_weights(&lt);
    for (k, t) in times.iter().enumerate() {
        tw.push(lw[k] * t + if k == 0 { times[0] } else { 0.0 });
    }
    let kind = if triplet.generalized { NormKind::CqLp } else { NormKind::LqLp };
    let norm = WeightedNorm { kind, q: triplet.q, p: triplet.p };
    let mut rng = sampling::rng(seed);
    let mut ratios = Vec::with_capacity(trials);
    for _ in 0..trials {
        let phi = random_phi(op, &mut rng);
        let field = homogeneous_solve(op, &phi, &times)?;
        let v = spacetime_norm(&field, &op.grid.weights, &tw, &norm)?;
        ratios.push(v / lp_norm(&op.grid.weights, &phi, triplet.r));
    }
    Ok(RatioReport { max_ratio: ratios.iter().cloned().fold(0.0, f64::max), ratios })
}

#[derive(Debug, Clone, Serialize)]
pub struct InhomogeneousReport {
    pub horizons: Vec<f64>,
    pub g_norms: Vec<f64>,
    pub f_norms: Vec<f64>,
    /// None when f vanishes.
    pub slope: Option<f64>,
    pub expected: f64,
}

/// For f_T(t, x) = f₁(t/T, δ_{T^{−1/2α}} x) on [0, T), fits
/// log(‖G(f_T)‖ / ‖f_T‖) against log T, with G in L^q(L^p) and f in
/// L^{q/(b+1)}(L^{p/(b+1)}) (C-norms for generalized triplets).
/// Expected slope 1 − β*b/(2rα).
pub fn verify_inhomogeneous_estimate(
    op: &FracHeatOperator,
    triplet: &AdmissibleTriplet,
    b: f64,
    horizons: &[f64],
    profile: &(dyn Fn(f64, &[f64]) -> f64 + Sync),
) -> Result<InhomogeneousReport> {
    let (q, p, r) = (triplet.q, triplet.p, triplet.r);
    let adm = is_admissible(q, p, r, op.alpha, op.space.beta_star, triplet.generalized);
    if !adm.admissible {
        return input(format!("triplet not admissible: {}", adm.diagnostics.join("; ")));
    }
    let r0 = op.space.beta_star * b / (2.0 * op.alpha);
    if !(b > 0.0 && p > b + 1.0 && r >= r0 * (1.0 - 1e-12)) {
        return input(format!("need b > 0, p > b + 1 and r >= r0 = {r0}; got b={b}, p={p}, r={r}"));
    }
    if horizons.len() < 2 || horizons.iter().any(|&t| !(t > 0.0)) {
        return input("need at least two positive horizons");
    }
    let kind = if triplet.generalized { NormKind::CqLp } else { NormKind::LqLp };
    let gnorm = WeightedNorm { kind, q, p };
    let fnorm = WeightedNorm { kind, q: q / (b + 1.0), p: p / (b + 1.0) };
    let mut g_norms = Vec::new();
    let mut f_norms = Vec::new();
    for &big_t in horizons {
        let lam = big_t.powf(0.5 / op.alpha);
        let src = PointSource(|t: f64, x: &[f64]| profile(t / big_t, &op.space.dilate(x, 1.0 / lam)));
        let (times, tw) = gauss_times(big_t, 12);
        let g = duhamel_solve(op, &src, &times)?;
        let fvals: Vec<Vec<f64>> = times.iter().map(|&t| src.slice(t, op)).collect();
        let ff = SpaceTimeField::new(times.clone(), fvals)?;
        g_norms.push(spacetime_norm(&g, &op.grid.weights, &tw, &gnorm)?);
        f_norms.push(spacetime_norm(&ff, &op.grid.weights, &tw, &fnorm)?);
    }
    let expected = 1.0 - op.space.beta_star * b / (2.0 * r * op.alpha);
    let slope = if f_norms.iter().all(|&v| v > 0.0) && g_norms.iter().all(|&v| v > 0.0) {
        let lx: Vec<f64> = horizons.iter().map(|t| t.ln()).collect();
        let ly: Vec<f64> = g_norms.iter().zip(&f_norms).map(|(g, f)| (g / f).ln()).collect();
        Some(quad::linear_fit(&lx, &ly).0)
    } else {
        None
    };
    Ok(InhomogeneousReport { horizons: horizons.to_vec(), g_norms, f_norms, slope, expected })
}

/// max over random F of ‖G(F)‖_{L^q̃ L^p̃} / ‖F‖_{L^q L^p} on (0, T), where
/// (1/q − 1/q̃) + β*(1/p − 1/p̃)/2α = 1.
#[allow(clippy::too_many_arguments)]
pub fn verify_strichartz(
    op: &FracHeatOperator,
    q: f64,
    p: f64,
    qt: f64,
    pt: f64,
    horizon: f64,
    trials: usize,
    seed: u64,
) -> Result<RatioReport> {
    if !(1.0 <= p && p < pt) || !(1.0 < q && q < qt && qt.is_finite()) {
        return input(format!("need 1 <= p < p~ <= inf and 1 < q < q~ < inf; got p={p}, p~={pt}, q={q}, q~={qt}"));
    }
    let rel = (inv(q) - inv(qt)) + op.space.beta_star * (inv(p) - inv(pt)) / (2.0 * op.alpha);
    if (rel - 1.0).abs() > 1e-9 {
        return input(format!("(1/q - 1/q~) + beta*(1/p - 1/p~)/(2 alpha) = {rel}, must equal 1"));
    }
    let (times, tw) = gauss_times(horizon, 16);
    let mut rng = sampling::rng(seed);
    let mut ratios = Vec::with_capacity(trials);
    for _ in 0..trials {
        let c = op.grid.radius / 3.0;
        let bumps = sampling::random_bumps(&mut rng, op.grid.dim, 3, c, (0.2, 1.0), true);
        let pulses: Vec<(f64, f64)> = bumps
            .iter()
            .map(|_| {
                use rand::Rng;
                (rng.gen_range(0.15..0.35) * horizon, rng.gen_range(0.05..0.1) * horizon)
            })
            .collect();
        let space = &op.space;
        let src = PointSource(|t: f64, x: &[f64]| {
            bumps.iter().zip(&pulses).map(|(b, (c, w))| b.eval(space, x) * (-((t - c) / w).powi(2)).exp()).sum()
        });
        let g = duhamel_solve(op, &src, &times)?;
        let ff = SpaceTimeField::new(times.clone(), times.iter().map(|&t| src.slice(t, op)).collect())?;
        let gn = spacetime_norm(&g, &op.grid.weights, &tw, &WeightedNorm { kind: NormKind::LqLp, q: qt, p: pt })?;
        let fnm = spacetime_norm(&ff, &op.grid.weights, &tw, &WeightedNorm { kind: NormKind::LqLp, q, p })?;
        ratios.push(if fnm > 0.0 { gn / fnm } else { 0.0 });
    }
    Ok(RatioReport { max_ratio: ratios.iter().cloned().fold(0.0, f64::max), ratios })
}

#[derive(Debug, Clone, Serialize)]
pub struct ExpIntegrability {
    /// Smallest C (to 1% relative) with ball average ≤ 10; 0 when F ≡ 0.
    pub constant: f64,
    pub source_norm: f64,
    pub average: f64,
}

/// Average over the parabolic ball {2t₀ < t < 3t₀, d(x, x₀) < t₀^{1/2α}} of
/// exp((|G(F)|/(C‖F‖_{L^q L^p}))^{q/(q−1)}), where β*/p + 2α/q = 2α and F
/// lives on [0, T].
#[allow(clippy::too_many_arguments)]
pub fn verify_exponential_integrability(
    op: &FracHeatOperator,
    f: &dyn SourceTerm,
    p: f64,
    q: f64,
    t0: f64,
    x0: &[f64],
    horizon: f64,
) -> Result<ExpIntegrability> {
    if !(p >= 1.0 && p.is_finite() && q > 1.0 && q.is_finite()) {
        return input(format!("need p in [1, inf) and q in (1, inf); got p={p}, q={q}"));
    }
    let rel = op.space.beta_star / p + 2.0 * op.alpha / q;
    if (rel - 2.0 * op.alpha).abs() > 1e-9 {
        return input(format!("beta*/p + 2 alpha/q = {rel}, must equal 2 alpha"));
    }
    if !(t0 > 0.0) {
        return input("t0 must be positive");
    }
    let (times, tw) = gauss_times(horizon, 16);
    let fvals: Vec<Vec<f64>> = times.iter().map(|&t| f.slice(t, op)).collect();
    let ff = SpaceTimeField::new(times, fvals)?;
    let source_norm = spacetime_norm(&ff, &op.grid.weights, &tw, &WeightedNorm { kind: NormKind::LqLp, q, p })?;
    if source_norm == 0.0 {
        return Ok(ExpIntegrability { constant: 0.0, source_norm, average: 1.0 });
    }
    let r0 = t0.powf(0.5 / op.alpha);
    let ball: Vec<usize> = (0..op.grid.len()).filter(|&i| op.space.dist(op.grid.node(i), x0) < r0).collect();
    if ball.is_empty() {
        return input("parabolic ball contains no grid nodes");
    }
    let (bt, bw) = quad::gauss_legendre_on(8, 2.0 * t0, 3.0 * t0);
    let mut samples = Vec::new();
    let mut total = 0.0;
    for (t, w) in bt.iter().zip(&bw) {
        let g = duhamel_at(op, f, *t)?;
        for &i in &ball {
            let m = w * op.grid.weights[i];
            samples.push((g[i].abs() / source_norm, m));
            total += m;
        }
    }
    let e = q / (q - 1.0);
    let average = |c: f64| samples.iter().map(|(g, m)| m * (g / c).powf(e).exp()).sum::<f64>() / total;
    let mut hi = 1.0;
    while average(hi) > 10.0 {
        hi *= 2.0;
    }
    let mut lo = hi / 2.0;
    while average(lo) <= 10.0 && lo > 1e-300 {
        hi = lo;
        lo /= 2.0;
    }
    while hi / lo - 1.0 > 1e-3 {
        let mid = (lo * hi).sqrt();
        if average(mid) > 10.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(ExpIntegrability { constant: hi, source_norm, average: average(hi) })
}

#[derive(Debug, Clone, Serialize)]
pub struct HolderFit {
    pub spatial: f64,
    pub temporal: f64,
    pub claimed_spatial: f64,
    pub claimed_temporal: f64,
    pub degenerate: bool,
}

/// Claimed exponents 2α(q−1)/q − β*/p in space and
/// min{2 − 1/2α − 1/q − β*/2αp, 1 − 1/q − β*/2αp} in time.
pub fn claimed_holder_exponents(alpha: f64, beta_star: f64, p: f64, q: f64) -> (f64, f64) {
    let s = 2.0 * alpha * (q - 1.0) / q - beta_star / p;
    let c = 1.0 / q + beta_star / (2.0 * alpha * p);
    (s, (2.0 - 0.5 / alpha - c).min(1.0 - c))
}

/// Log-log secant fits of |G(F)(t₀, x) − G(F)(t₀, x₀)| against d(x, x₀)
/// along the first axis and of |G(F)(t, x₀) − G(F)(t₀, x₀)| against |t − t₀|.
pub fn estimate_holder_exponents(
    op: &FracHeatOperator,
    f: &dyn SourceTerm,
    p: f64,
    q: f64,
    t0: f64,
    x0: &[f64],
) -> Result<HolderFit> {
    if !(p >= 1.0 && p.is_finite() && q > 1.0 && q.is_finite()) {
        return input(format!("need p in [1, inf) and q in (1, inf); got p={p}, q={q}"));
    }
    if !(op.space.beta_star / p + 2.0 * op.alpha / q < 2.0 * op.alpha) {
        return input("need beta*/p + 2 alpha/q < 2 alpha");
    }
    let (claimed_spatial, claimed_temporal) = claimed_holder_exponents(op.alpha, op.space.beta_star, p, q);
    let g0 = duhamel_at(op, f, t0)?;
    let i0 = op.grid.nearest(x0);
    let base = op.grid.index(i0);
    let m = op.grid.per_axis;
    let mut dx = Vec::new();
    let mut dg = Vec::new();
    for k in 0..6 {
        let step = 1usize << k;
        if base[0] + step >= m {
            break;
        }
        let mut idx = base.clone();
        idx[0] += step;
        let j = idx.iter().fold(0, |acc, &v| acc * m + v);
        dx.push(op.space.dist(op.grid.node(j), op.grid.node(i0)));
        dg.push((g0[j] - g0[i0]).abs());
    }
    let mut dts = Vec::new();
    let mut dgt = Vec::new();
    for k in 0..6 {
        let d = 0.05 * t0 / f64::powi(2.0, k);
        dts.push(d);
        dgt.push((duhamel_at(op, f, t0 + d)?[i0] - g0[i0]).abs());
    }
    let tiny = |v: &[f64]| v.iter().all(|&x| x <= 1e-300);
    if dg.len() < 2 || tiny(&dg) || tiny(&dgt) {
        return Ok(HolderFit { spatial: f64::NAN, temporal: f64::NAN, claimed_spatial, claimed_temporal, degenerate: true });
    }
    let fit = |x: &[f64], y: &[f64]| {
        let pairs: Vec<(f64, f64)> = x.iter().zip(y).filter(|(_, &v)| v > 0.0).map(|(a, b)| (a.ln(), b.ln())).collect();
        let (lx, ly): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        quad::linear_fit(&lx, &ly).0
    };
    Ok(HolderFit {
        spatial: fit(&dx, &dg),
        temporal: fit(&dts, &dgt),
        claimed_spatial,
        claimed_temporal,
        degenerate: false,
    })
}
