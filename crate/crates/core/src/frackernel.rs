//! The subordinated kernel K_{α,t}(x,y) = ∫ η^α_t(s) p_s(x,y) ds and the
//! operators built from it.
//!
//! With s = u t^{1/α} the integral becomes ∫ η^α_1(u) p_{uτ}(d) du, τ = t^{1/α},
//! so one table of η^α_1 on fixed log-panel nodes serves every t.

use crate::capacity::DiscreteMeasure;
use crate::error::{input, Result};
use crate::quad;
use crate::space::{HeatKernelModel, HeatModelKind, MetricMeasureSpace, QuadratureGrid, SpaceKind};
use crate::subordinator::{SubordinationRule, SubordinatorDensity};
use rustfft::{num_complex::Complex, FftPlanner};
use serde::Serialize;
use statrs::function::erf::erf;
use statrs::function::gamma::gamma;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};


/// Log-panel layout of the u-quadrature.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PanelSpec {
    pub panels_per_decade: usize,
    pub order: usize,
    pub u_hi: f64,
}

impl Default for PanelSpec {
    fn default() -> Self {
        PanelSpec { panels_per_decade: 1, order: 20, u_hi: 1e16 }
    }
}

pub struct FracHeatOperator {
    pub alpha: f64,
    pub space: MetricMeasureSpace,
    pub model: HeatKernelModel,
    pub grid: QuadratureGrid,
    pub sub: SubordinatorDensity,
    pub panels: PanelSpec,
    rule: SubordinationRule,
    // W_j u_j^{−Q/2} and 1/u_j
    a: Vec<f64>,
    inv_u: Vec<f64>,
    norm: f64,
    half_q: f64,
    decay: f64,
    // Per-t offset kernels (euclidean) and profile tables (other spaces).
    kernels: Mutex<HashMap<u64, Arc<Vec<f64>>>>,
    tables: Mutex<HashMap<u64, Arc<ProfileTable>>>,
}

/// Values of a field at grid nodes for a list of times.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpaceTimeField {
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl SpaceTimeField {
    pub fn new(times: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if times.len() != values.len() {
            return input("field: one slice per time required");
        }
        if times.windows(2).any(|w| w[1] <= w[0]) || times.iter().any(|&t| !(t > 0.0)) {
            return input("field times must be positive and increasing");
        }
        if let Some(n) = values.first().map(|v| v.len()) {
            if values.iter().any(|v| v.len() != n) {
                return input("field slices differ in length");
            }
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return input("field has non-finite entries");
        }
        Ok(SpaceTimeField { times, values })
    }

    pub fn zeros(times: Vec<f64>, nodes: usize) -> Self {
        let values = vec![vec![0.0; nodes]; times.len()];
        SpaceTimeField { times, values }
    }

    /// Linear interpolation in time, constant extension outside.
    pub fn slice_at(&self, t: f64) -> Vec<f64> {
        let n = self.times.len();
        if t <= self.times[0] {
            return self.values[0].clone();
        }
        if t >= self.times[n - 1] {
            return self.values[n - 1].clone();
        }
        let k = self.times.partition_point(|&s| s <= t) - 1;
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        let th = (t - t0) / (t1 - t0);
        self.values[k]
            .iter()
            .zip(&self.values[k + 1])
            .map(|(a, b)| a + th * (b - a))
            .collect()
    }
}

/// Cubic Hermite table of d ↦ K_{α,t}(d) in v = ln(1 + d/ℓ), ℓ = t^{1/2α}.
#[derive(Debug, Clone)]
pub struct ProfileTable {
    pub t: f64,
    ell: f64,
    dv: f64,
    d_max: f64,
    vals: Vec<f64>,
    ders: Vec<f64>,
}

impl ProfileTable {
    #[inline]
    pub fn eval(&self, d: f64) -> Option<f64> {
        if d > self.d_max {
            return None;
        }
        let v = (d / self.ell).ln_1p();
        let x = v / self.dv;
        let k = (x as usize).min(self.vals.len() - 2);
        let s = x - k as f64;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        Some(
            h00 * self.vals[k]
                + h10 * self.dv * self.ders[k]
                + h01 * self.vals[k + 1]
                + h11 * self.dv * self.ders[k + 1],
        )
    }
}

impl FracHeatOperator {
    pub fn new(alpha: f64, model: HeatKernelModel, grid: QuadratureGrid, tol: f64) -> Result<Self> {
        Self::with_panels(alpha, model, grid, tol, PanelSpec::default())
    }

    pub fn with_panels(
        alpha: f64,
        model: HeatKernelModel,
        grid: QuadratureGrid,
        tol: f64,
        panels: PanelSpec,
    ) -> Result<Self> {
        let sub = SubordinatorDensity::new(alpha, tol)?;
        let space = model.space().clone();
        if grid.dim != space.dim() {
            return input("grid dimension does not match the space");
        }
        let rule = sub.rule(panels.u_hi, panels.panels_per_decade, panels.order)?;
        let (norm, half_q, decay) = model.profile_params();
        let a = rule.u.iter().zip(&rule.w_eta).map(|(u, w)| w * u.powf(-half_q)).collect();
        let inv_u = rule.u.iter().map(|u| 1.0 / u).collect();
        Ok(FracHeatOperator {
            alpha,
            space,
            model,
            grid,
            sub,
            panels,
            rule,
            a,
            inv_u,
            norm,
            half_q,
            decay,
            kernels: Mutex::new(HashMap::new()),
            tables: Mutex::new(HashMap::new()),
        })
    }

    /// Exponent β* + 2α of the upper envelope.
    pub fn natural_length(&self, t: f64) -> f64 {
        t.powf(0.5 / self.alpha)
    }

    /// K_{α,t} at distance d, with dK/dd and ∂_τK (τ = t^{1/α}).
    #[inline]
    fn profile_parts(&self, t: f64, d: f64) -> (f64, f64, f64) {
        let tau = t.powf(1.0 / self.alpha);
        let c = self.decay * d * d / tau;
        let mut k = 0.0;
        let mut kd = 0.0;
        let mut kt = 0.0;
        for (a, iu) in self.a.iter().zip(&self.inv_u) {
            let e = c * iu;
            if e > 745.0 {
                continue;
            }
            let v = a * (-e).exp();
            k += v;
            kd += v * iu;
            kt += v * (e - self.half_q);
        }
        let scale = tau.powf(-self.half_q) / self.norm;
        // Tail beyond u_hi, p ∝ u^{−Q/2}.
        let s_hi = self.rule.u_hi * tau;
        let p_hi = (-self.decay * d * d / s_hi).exp() / (self.norm * s_hi.powf(self.half_q));
        let tail = self.rule.power_tail(p_hi, self.half_q);
        let kval = k * scale + tail;
        let dk = -2.0 * self.decay * d / tau * kd * scale;
        let dtau = kt * scale / tau - self.half_q * tail / tau;
        (kval, dk, dtau)
    }

    /// K_{α,t} as a function of the distance.
    #[inline]
    pub fn profile(&self, t: f64, d: f64) -> f64 {
        self.profile_parts(t, d).0
    }

    /// ∂_t K_{α,t}(d) by differentiating p under the u-integral.
    pub fn time_derivative_profile(&self, t: f64, d: f64) -> f64 {
        let tau = t.powf(1.0 / self.alpha);
        self.profile_parts(t, d).2 * tau / (self.alpha * t)
    }

    pub fn frac_kernel(&self, t: f64, x: &[f64], y: &[f64]) -> Result<f64> {
        if !(t > 0.0) {
            return input(format!("kernel time must be positive, got {t}"));
        }
        let d = self.space.distance(x, y)?;
        Ok(self.profile(t, d))
    }

    pub fn profile_table(&self, t: f64, d_max: f64) -> ProfileTable {
        let ell = self.natural_length(t);
        let v_max = (d_max / ell).ln_1p();
        let dv = 0.006;
        let n = ((v_max / dv).ceil() as usize).max(2) + 1;
        let mut vals = Vec::with_capacity(n);
        let mut ders = Vec::with_capacity(n);
        for k in 0..n {
            let v = k as f64 * dv;
            let d = ell * v.exp_m1();
            let (kv, dk, _) = self.profile_parts(t, d);
            vals.push(kv);
            ders.push(dk * ell * v.exp());
        }
        ProfileTable { t, ell, dv, d_max: ell * ((n - 1) as f64 * dv).exp_m1(), vals, ders }
    }

    fn check_len(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.grid.len() {
            return input(format!("function has {} values, grid has {} nodes", f.len(), self.grid.len()));
        }
        Ok(())
    }

    /// (e^{−t𝓛^α} f)(x_i) = Σ_j w_j K_{α,t}(x_i, x_j) f_j.
    pub fn semigroup_apply(&self, t: f64, f: &[f64]) -> Result<Vec<f64>> {
        if !(t > 0.0) {
            return input(format!("semigroup time must be positive, got {t}"));
        }
        self.check_len(f)?;
        let wf: Vec<f64> = f.iter().zip(&self.grid.weights).map(|(a, b)| a * b).collect();
        let key = t.to_bits();
        match self.space.kind {
            SpaceKind::Euclidean { .. } => {
                let cached = self.kernels.lock().unwrap().get(&key).cloned();
                let kern = match cached {
                    Some(k) => k,
                    None => {
                        let k = if self.grid.dim == 1 && self.model.kind == HeatModelKind::ExactGaussian {
                            Arc::new(self.hat_kernel_1d(t))
                        } else {
                            Arc::new(self.offset_kernel(&|d| self.profile(t, d)))
                        };
                        let mut c = self.kernels.lock().unwrap();
                        if c.len() >= self.cache_limit() {
                            c.clear();
                        }
                        c.insert(key, k.clone());
                        k
                    }
                };
                Ok(self.apply_offsets(&kern, &wf))
            }
            _ => {
                let cached = self.tables.lock().unwrap().get(&key).cloned();
                let table = match cached {
                    Some(tb) => tb,
                    None => {
                        let tb = Arc::new(self.profile_table(t, self.grid_diameter()));
                        let mut c = self.tables.lock().unwrap();
                        if c.len() >= self.cache_limit() {
                            c.clear();
                        }
                        c.insert(key, tb.clone());
                        tb
                    }
                };
                let g = &self.grid;
                Ok((0..g.len())
                    .map(|i| {
                        let x = g.node(i);
                        let mut s = 0.0;
                        for j in 0..g.len() {
                            if wf[j] != 0.0 {
                                let d = self.space.dist(x, g.node(j));
                                s += wf[j] * table.eval(d).unwrap_or_else(|| self.profile(t, d));
                            }
                        }
                        s
                    })
                    .collect())
            }
        }
    }

    /// Σ_j w_j k(d(x_i, x_j)) f_j for a radial profile k.
    pub fn apply_radial(&self, prof: &dyn Fn(f64) -> f64, f: &[f64]) -> Result<Vec<f64>> {
        self.check_len(f)?;
        let wf: Vec<f64> = f.iter().zip(&self.grid.weights).map(|(a, b)| a * b).collect();
        if let SpaceKind::Euclidean { .. } = self.space.kind {
            return Ok(self.apply_offsets(&self.offset_kernel(prof), &wf));
        }
        let g = &self.grid;
        Ok((0..g.len())
            .map(|i| {
                let x = g.node(i);
                (0..g.len())
                    .filter(|&j| wf[j] != 0.0)
                    .map(|j| wf[j] * prof(self.space.dist(x, g.node(j))))
                    .sum()
            })
            .collect())
    }

    // About 64 MB of cached kernels.
    fn cache_limit(&self) -> usize {
        ((1usize << 23) / self.grid.len().max(1)).clamp(64, 8192)
    }

    fn grid_diameter(&self) -> f64 {
        let r = self.grid.radius;
        match self.space.kind {
            SpaceKind::HeisenbergH1 => {
                // |x⁻¹y| over the box: a,b differences ≤ 2R, c difference ≤ 2R + 4R².
                let ab = 2.0 * r;
                let c = 2.0 * r + 4.0 * r * r;
                ((2.0 * ab * ab).powi(2) + c * c).powf(0.25) * 1.01
            }
            _ => 2.0 * r * (self.grid.dim as f64).sqrt() * 1.01,
        }
    }

    // Euclidean grids: the kernel depends only on the integer offset, indexed
    // by k in 1-D and by the squared offset length otherwise.
    fn offset_kernel(&self, prof: &dyn Fn(f64) -> f64) -> Vec<f64> {
        let g = &self.grid;
        let m = g.per_axis;
        let h = g.spacing;
        if g.dim == 1 {
            return (0..m).map(|k| prof(k as f64 * h)).collect();
        }
        let mut memo = vec![f64::NAN; g.dim * (m - 1) * (m - 1) + 1];
        let mut idx = vec![0usize; g.dim];
        loop {
            let sq: usize = idx.iter().map(|o| o * o).sum();
            if memo[sq].is_nan() {
                memo[sq] = prof(h * (sq as f64).sqrt());
            }
            let mut k = 0;
            loop {
                if k == g.dim {
                    return memo;
                }
                idx[k] += 1;
                if idx[k] < m {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    }

    // 1-D exact model: Gaussian components narrower than two grid spacings
    // are integrated exactly against the hat functions of the grid, i.e.
    // the semigroup acts on the piecewise-linear interpolant. This keeps
    // the discrete operator an approximate identity as t → 0.
    fn hat_kernel_1d(&self, t: f64) -> Vec<f64> {
        let m = self.grid.per_axis;
        let h = self.grid.spacing;
        let tau = t.powf(1.0 / self.alpha);
        let mut kern = vec![0.0; m];
        for (&u, &we) in self.rule.u.iter().zip(&self.rule.w_eta) {
            let s = u * tau;
            let rs = s.sqrt();
            if rs < 2.0 * h {
                // G₂'' = g_s with G₂(x) = x erf(x/2√s)/2 + √(s/π) e^{−x²/4s}.
                let g2 = |x: f64| 0.5 * x * erf(x / (2.0 * rs)) + (s / PI).sqrt() * (-x * x / (4.0 * s)).exp();
                let kmax = ((40.0 * rs / h).ceil() as usize + 1).min(m - 1);
                for (k, o) in kern.iter_mut().enumerate().take(kmax + 1) {
                    let x = k as f64 * h;
                    *o += we * (g2(x + h) - 2.0 * g2(x) + g2(x - h)) / (h * h);
                }
            } else {
                let c = 0.25 / s;
                let nrm = 1.0 / (4.0 * PI * s).sqrt();
                for (k, o) in kern.iter_mut().enumerate() {
                    let e = c * (k as f64 * h).powi(2);
                    if e > 745.0 {
                        break;
                    }
                    *o += we * nrm * (-e).exp();
                }
            }
        }
        let s_hi = self.rule.u_hi * tau;
        for (k, o) in kern.iter_mut().enumerate() {
            let d = k as f64 * h;
            let p_hi = (-self.decay * d * d / s_hi).exp() / (self.norm * s_hi.powf(self.half_q));
            *o += self.rule.power_tail(p_hi, self.half_q);
        }
        kern
    }

    fn apply_offsets(&self, kern: &[f64], wf: &[f64]) -> Vec<f64> {
        let g = &self.grid;
        if g.dim == 1 {
            return convolve_symmetric(kern, wf);
        }
        let idx: Vec<Vec<usize>> = (0..g.len()).map(|i| g.index(i)).collect();
        (0..g.len())
            .map(|i| {
                let mut s = 0.0;
                for j in 0..g.len() {
                    if wf[j] == 0.0 {
                        continue;
                    }
                    let sq: usize = idx[i]
                        .iter()
                        .zip(&idx[j])
                        .map(|(a, b)| {
                            let o = a.abs_diff(*b);
                            o * o
                        })
                        .sum();
                    s += wf[j] * kern[sq];
                }
                s
            })
            .collect()
    }

    /// Kernel rows K_{α,t_k}(x_k, x_i) over all grid nodes for each point.
    pub fn kernel_rows(&self, points: &[(f64, Vec<f64>)]) -> Result<Vec<Vec<f64>>> {
        let g = &self.grid;
        for (t, x) in points {
            if !(*t > 0.0) {
                return input(format!("kernel row time must be positive, got {t}"));
            }
            if x.len() != self.space.dim() {
                return input("kernel row point has wrong dimension");
            }
        }
        let mut tables: HashMap<u64, ProfileTable> = HashMap::new();
        let reach = self.grid_diameter() + points.iter().map(|(_, x)| self.space.dist(x, &vec![0.0; x.len()])).fold(0.0, f64::max) * 2.0;
        let mut counts: HashMap<u64, usize> = HashMap::new();
        for (t, _) in points {
            *counts.entry(t.to_bits()).or_default() += 1;
        }
        let mut rows = Vec::with_capacity(points.len());
        for (t, x) in points {
            let key = t.to_bits();
            let use_table = counts[&key] * g.len() > 20_000;
            if use_table && !tables.contains_key(&key) {
                tables.insert(key, self.profile_table(*t, reach));
            }
            let table = tables.get(&key);
            let row = (0..g.len())
                .map(|i| {
                    let d = self.space.dist(x, g.node(i));
                    table.and_then(|tb| tb.eval(d)).unwrap_or_else(|| self.profile(*t, d))
                })
                .collect();
            rows.push(row);
        }
        Ok(rows)
    }

    /// (e^{−t𝓛^α})*ν at the grid nodes: Σ_k m_k K_{α,t_k}(y_k, x_i).
    pub fn adjoint_apply(&self, nu: &DiscreteMeasure) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.grid.len()];
        if nu.atoms.is_empty() {
            return Ok(out);
        }
        for a in &nu.atoms {
            if !(a.t > 0.0) {
                return input(format!("atom time must be positive, got {}", a.t));
            }
            if !(a.m >= 0.0) {
                return input("atom mass must be nonnegative");
            }
        }
        let pts: Vec<(f64, Vec<f64>)> = nu.atoms.iter().map(|a| (a.t, a.x.clone())).collect();
        let rows = self.kernel_rows(&pts)?;
        for (a, row) in nu.atoms.iter().zip(&rows) {
            for (o, k) in out.iter_mut().zip(row) {
                *o += a.m * k;
            }
        }
        Ok(out)
    }

    /// ∂_t K_{α,t}(x,y) by central differences with two Richardson levels.
    /// Returns (value, error estimate).
    pub fn time_derivative_kernel(&self, t: f64, x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
        if !(t > 0.0) {
            return input(format!("time must be positive, got {t}"));
        }
        let d = self.space.distance(x, y)?;
        Ok(self.fd_time_derivative(t, d))
    }

    fn fd_time_derivative(&self, t: f64, d: f64) -> (f64, f64) {
        let h = t * 1e-3;
        let cd = |h: f64| (self.profile(t + h, d) - self.profile(t - h, d)) / (2.0 * h);
        let (d1, d2, d3) = (cd(h), cd(h / 2.0), cd(h / 4.0));
        let r1 = (4.0 * d2 - d1) / 3.0;
        let r2 = (4.0 * d3 - d2) / 3.0;
        let r = (16.0 * r2 - r1) / 15.0;
        (r, (r - r2).abs())
    }

    fn sigma(&self, theta: f64) -> Result<f64> {
        let sigma = theta / (2.0 * self.alpha);
        if !(theta > 0.0) || sigma > 1.0 {
            return input(format!(
                "theta={theta} gives sigma={sigma}; need 0 < theta/(2 alpha) <= 1"
            ));
        }
        Ok(sigma)
    }

    /// 𝓛^{θ/2} K_{α,t}(x,y) = Γ(−σ)⁻¹ ∫₀^∞ [K_{t+s} − K_t] s^{−1−σ} ds, ασ = θ/2.
    ///
    /// σ = 1 is the generator itself and returns −∂_tK.
    pub fn frac_derivative_kernel(&self, theta: f64, t: f64, x: &[f64], y: &[f64]) -> Result<f64> {
        let sigma = self.sigma(theta)?;
        if !(t > 0.0) {
            return input(format!("time must be positive, got {t}"));
        }
        let d = self.space.distance(x, y)?;
        if sigma == 1.0 {
            return Ok(-self.fd_time_derivative(t, d).0);
        }
        let eps = 1e-4 * t;
        let k0 = self.profile(t, d);
        let (k1, _) = self.fd_time_derivative(t, d);
        let hh = 1e-3 * t;
        let k2 = (self.profile(t + hh, d) - 2.0 * k0 + self.profile(t - hh, d)) / (hh * hh);
        let near = k1 * eps.powf(1.0 - sigma) / (1.0 - sigma) + 0.5 * k2 * eps.powf(2.0 - sigma) / (2.0 - sigma);
        // ∫_ε^∞ K_{t+s} s^{−1−σ} ds in v = ln s.
        let far = log_tail_integral(|s| self.profile(t + s, d), eps, t, sigma)?;
        Ok((near + far - k0 * eps.powf(-sigma) / sigma) / gamma(-sigma))
    }

    /// Tabulated 𝓛^{θ/2}K for batch evaluation.
    pub fn frac_power(&self, theta: f64) -> Result<FracPowerKernel> {
        let sigma = self.sigma(theta)?;
        let mut dens = Vec::with_capacity(self.rule.u.len());
        if sigma < 1.0 {
            for (&u, &w) in self.rule.u.iter().zip(&self.rule.w) {
                dens.push(w * self.frac_density(u, sigma)? * u.powf(-self.half_q));
            }
        }
        Ok(FracPowerKernel { theta, sigma, dens })
    }

    // D_1(u) = Γ(−σ)⁻¹ ∫₀^∞ [η_{1+s}(u) − η_1(u)] s^{−1−σ} ds.
    fn frac_density(&self, u: f64, sigma: f64) -> Result<f64> {
        let a = self.alpha;
        let eta_t = |t: f64| -> Result<f64> {
            let tau = t.powf(1.0 / a);
            Ok(self.sub.eta1(u / tau)? / tau)
        };
        let e0 = eta_t(1.0)?;
        let h = 1e-3;
        let cd = |h: f64| -> Result<f64> { Ok((eta_t(1.0 + h)? - eta_t(1.0 - h)?) / (2.0 * h)) };
        let (d1, d2, d3) = (cd(h)?, cd(h / 2.0)?, cd(h / 4.0)?);
        let e1 = (16.0 * (4.0 * d3 - d2) / 3.0 - (4.0 * d2 - d1) / 3.0) / 15.0;
        let e2 = (eta_t(1.0 + h)? - 2.0 * e0 + eta_t(1.0 - h)?) / (h * h);
        let eps: f64 = 1e-4;
        let near = e1 * eps.powf(1.0 - sigma) / (1.0 - sigma) + 0.5 * e2 * eps.powf(2.0 - sigma) / (2.0 - sigma);
        // η_{1+s}(u) vanishes once u(1+s)^{−1/α} drops below the lower cut.
        let s_max = (u / self.sub.lower_cut()).powf(a) - 1.0;
        let far = if s_max > eps {
            let f = |v: f64| -> f64 {
                let s = v.exp();
                eta_t(1.0 + s).unwrap_or(f64::NAN) * s.powf(-sigma)
            };
            let scale = e0.abs() * eps.powf(-sigma) / sigma;
            let mut total = 0.0;
            let (lo, hi) = (eps.ln(), s_max.ln());
            let n = ((hi - lo) / 1.0).ceil().max(1.0) as usize;
            for k in 0..n {
                let a0 = lo + (hi - lo) * k as f64 / n as f64;
                let b0 = lo + (hi - lo) * (k + 1) as f64 / n as f64;
                total += quad::integrate(f, a0, b0, 1e-13 * scale, 1e-10, 1000)?.value;
            }
            total
        } else {
            0.0
        };
        Ok((near + far - e0 * eps.powf(-sigma) / sigma) / gamma(-sigma))
    }

    /// Subordination rule in use.
    pub fn rule(&self) -> &SubordinationRule {
        &self.rule
    }
}

// ∫_ε^∞ g(s) s^{−1−σ} ds for g decaying algebraically, integrated in ln s.
fn log_tail_integral<F: Fn(f64) -> f64>(g: F, eps: f64, t: f64, sigma: f64) -> Result<f64> {
    let lo = eps.ln();
    let hi = (t * 1e12).ln();
    let f = |v: f64| {
        let s = v.exp();
        g(s) * s.powf(-sigma)
    };
    let n = ((hi - lo) / 2.0).ceil() as usize;
    let mut total = 0.0;
    for k in 0..n {
        let a = lo + (hi - lo) * k as f64 / n as f64;
        let b = lo + (hi - lo) * (k + 1) as f64 / n as f64;
        total += quad::integrate(&f, a, b, 0.0, 1e-11, 400)?.value;
    }
    // Beyond t·1e12 the integrand is below 1e−12σ of the head.
    Ok(total)
}

/// 𝓛^{θ/2}K_{α,t}(d) = t^{−σ} ∫ D_1(u) p_{uτ}(d) du with D_1 tabulated on the
/// subordination nodes.
#[derive(Debug, Clone)]
pub struct FracPowerKernel {
    pub theta: f64,
    pub sigma: f64,
    dens: Vec<f64>,
}

impl FracPowerKernel {
    pub fn profile(&self, op: &FracHeatOperator, t: f64, d: f64) -> f64 {
        if self.sigma == 1.0 {
            return -op.time_derivative_profile(t, d);
        }
        let tau = t.powf(1.0 / op.alpha);
        let c = op.decay * d * d / tau;
        let mut s = 0.0;
        for (dn, iu) in self.dens.iter().zip(&op.inv_u) {
            let e = c * iu;
            if e <= 745.0 {
                s += dn * (-e).exp();
            }
        }
        s * tau.powf(-op.half_q) / op.norm * t.powf(-self.sigma)
    }
}

// out_i = Σ_j k[|i−j|] x_j, by FFT when large.
fn convolve_symmetric(k: &[f64], x: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n <= 1024 {
        return (0..n)
            .map(|i| {
                let mut s = 0.0;
                for (j, &xj) in x.iter().enumerate() {
                    if xj != 0.0 {
                        s += k[i.abs_diff(j)] * xj;
                    }
                }
                s
            })
            .collect();
    }
    let size = (2 * n).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let mut kb = vec![Complex::new(0.0, 0.0); size];
    for (i, &v) in k.iter().enumerate().take(n) {
        kb[i].re = v;
        if i > 0 {
            kb[size - i].re = v;
        }
    }
    let mut xb: Vec<Complex<f64>> = (0..size)
        .map(|i| Complex::new(if i < n { x[i] } else { 0.0 }, 0.0))
        .collect();
    fwd.process(&mut kb);
    fwd.process(&mut xb);
    for (a, b) in xb.iter_mut().zip(&kb) {
        *a *= b;
    }
    inv.process(&mut xb);
    let scale = 1.0 / size as f64;
    xb.iter().take(n).map(|c| c.re * scale).collect()
}

