//! One-sided α-stable subordinator densities η^α_t with Laplace transform
//! exp(−tλ^α).
//!
//! Everything is computed through η^α_1 and the scaling
//! η^α_t(s) = t^{−1/α} η^α_1(s t^{−1/α}).

use crate::error::{input, Error, Result};
use crate::quad::{self, LogPanelRule};
use serde::Serialize;
use statrs::function::gamma::{gamma, ln_gamma};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EtaMethod {
    /// Lévy density (2√π)⁻¹u^{−3/2}e^{−1/(4u)}; α = 1/2 only.
    ClosedFormHalf,
    /// Pollard's series only; fails when cancellation is too severe.
    PollardSeries,
    /// Zolotarev–Kanter integral representation only.
    ContourInversion,
    /// Series with fallback to the integral representation.
    Auto,
}

#[derive(Debug, Clone, Serialize)]
pub struct SubordinatorDensity {
    pub alpha: f64,
    pub method: EtaMethod,
    pub series_terms: usize,
    pub tol: f64,
}

/// Digits lost to cancellation before the series is abandoned.
const MAX_LOST_DIGITS: f64 = 6.0;

struct SeriesValue {
    sum: f64,
    lost_digits: f64,
    converged: bool,
}

impl SubordinatorDensity {
    pub fn new(alpha: f64, tol: f64) -> Result<Self> {
        let method = if alpha == 0.5 { EtaMethod::ClosedFormHalf } else { EtaMethod::Auto };
        Self::with_method(alpha, method, tol)
    }

    pub fn with_method(alpha: f64, method: EtaMethod, tol: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return input(format!("alpha must lie in (0,1), got {alpha}"));
        }
        if method == EtaMethod::ClosedFormHalf && alpha != 0.5 {
            return input("closed form is only available for alpha = 1/2");
        }
        if !(tol > 0.0) {
            return input("tolerance must be positive");
        }
        Ok(SubordinatorDensity { alpha, method, series_terms: 600, tol })
    }

    /// η^α_1(u).
    pub fn eta1(&self, u: f64) -> Result<f64> {
        if !(u > 0.0) {
            return input(format!("subordinator argument must be positive, got {u}"));
        }
        match self.method {
            EtaMethod::ClosedFormHalf => Ok(eta_half(u)),
            EtaMethod::ContourInversion => self.kanter(u),
            EtaMethod::PollardSeries => {
                let s = self.series(u);
                if s.converged && s.lost_digits < MAX_LOST_DIGITS && s.sum >= 0.0 {
                    Ok(s.sum)
                } else {
                    Err(Error::Accuracy {
                        context: format!("Pollard series at u={u:e}"),
                        achieved_digits: (15.6 - s.lost_digits).max(0.0),
                    })
                }
            }
            EtaMethod::Auto => {
                if u < self.lower_cut() {
                    return Ok(0.0);
                }
                let s = self.series(u);
                if s.converged && s.lost_digits < MAX_LOST_DIGITS && s.sum >= 0.0 {
                    Ok(s.sum)
                } else {
                    self.kanter(u)
                }
            }
        }
    }

    /// η^α_t(s) via the scaling identity.
    pub fn eta(&self, t: f64, s: f64) -> Result<f64> {
        if !(t > 0.0 && s > 0.0) {
            return input(format!("eta needs t > 0 and s > 0, got t={t}, s={s}"));
        }
        let tau = t.powf(1.0 / self.alpha);
        Ok(self.eta1(s / tau)? / tau)
    }

    /// Limit of u^{1+α}η^α_1(u) as u → ∞ (the first Pollard term).
    pub fn tail_constant(&self) -> f64 {
        gamma(1.0 + self.alpha) * (PI * self.alpha).sin() / PI
    }

    /// Below this u, η^α_1(u) < exp(−100) times its algebraic prefactor.
    pub fn lower_cut(&self) -> f64 {
        let a = self.alpha;
        let a0 = (1.0 - a) * a.powf(a / (1.0 - a));
        (a0 / 100.0).powf((1.0 - a) / a)
    }

    fn series(&self, u: f64) -> SeriesValue {
        let a = self.alpha;
        let lu = u.ln();
        let mut sum = 0.0;
        let mut comp = 0.0;
        let mut max_term: f64 = 0.0;
        let mut prev_mag = f64::INFINITY;
        let mut converged = false;
        for k in 1..=self.series_terms {
            let kf = k as f64;
            let ln_mag = ln_gamma(a * kf + 1.0) - ln_gamma(kf + 1.0) - (a * kf + 1.0) * lu;
            let sn = (PI * ((kf * a) % 2.0)).sin();
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            let term = sign * sn * ln_mag.exp() / PI;
            max_term = max_term.max(term.abs());
            // Neumaier summation
            let t = sum + term;
            if sum.abs() >= term.abs() {
                comp += (sum - t) + term;
            } else {
                comp += (term - t) + sum;
            }
            sum = t;
            let mag = ln_mag.exp() / PI;
            if mag < prev_mag && mag <= 1e-17 * (sum + comp).abs().max(1e-300) && k > 2 {
                converged = true;
                break;
            }
            prev_mag = mag;
        }
        let total = sum + comp;
        let lost = if total.abs() > 0.0 {
            (max_term / total.abs()).log10().max(0.0)
        } else {
            f64::INFINITY
        };
        SeriesValue { sum: total, lost_digits: lost, converged }
    }

    /// Kanter's representation
    /// η(x) = α/(1−α) x^{−1/(1−α)} (1/π)∫₀^π A(φ) exp(−x^{−α/(1−α)}A(φ)) dφ.
    fn kanter(&self, x: f64) -> Result<f64> {
        let a = self.alpha;
        let b = 1.0 - a;
        let big_x = x.powf(-a / b);
        let ln_a = |phi: f64| -> f64 {
            ((a * phi).sin().ln() - phi.sin().ln()) / b + (b * phi).sin().ln() - (a * phi).sin().ln()
        };
        let a0 = b * a.powf(a / b);
        // Integrand scaled by exp(X·A₀) to keep it O(1) near the peak.
        let f = |phi: f64| -> f64 {
            if phi <= 0.0 || phi >= PI {
                return 0.0;
            }
            let la = ln_a(phi);
            let av = la.exp();
            (la - big_x * (av - a0)).exp()
        };
        // The peak at φ = 0 has width about X^{−1/2}; split there.
        let w = (1.0 / big_x.max(1e-300)).sqrt().min(1.0);
        let mut total = 0.0;
        let mut err = 0.0;
        let mut cuts = vec![0.0];
        let mut c = w;
        while c < PI {
            cuts.push(c);
            c *= 4.0;
        }
        cuts.push(PI);
        for seg in cuts.windows(2) {
            let r = quad::integrate(&f, seg[0], seg[1], 0.0, 1e-13, 2000)?;
            total += r.value;
            err += r.error;
        }
        let pref = a / b * x.powf(-1.0 / b) / PI * (-big_x * a0).exp();
        let val = pref * total;
        if err > 1e-9 * total.abs() && val > 1e-300 {
            return Err(Error::Accuracy {
                context: format!("contour integral at u={x:e}"),
                achieved_digits: (total.abs() / err).log10(),
            });
        }
        Ok(val)
    }

    /// P(S₁ > u) from the integrated Pollard series; accurate for large u.
    pub fn survival(&self, u: f64) -> f64 {
        let a = self.alpha;
        let mut sum = 0.0;
        for k in 1..200 {
            let kf = k as f64;
            let ln_mag = ln_gamma(a * kf) - ln_gamma(kf + 1.0) - a * kf * u.ln();
            let sn = (PI * ((kf * a) % 2.0)).sin();
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            let term = sign * sn * ln_mag.exp() / PI;
            sum += term;
            if ln_mag.exp() < 1e-18 * sum.abs() {
                break;
            }
        }
        sum
    }

    /// Tabulated quadrature in the scaled variable u = s/t^{1/α}.
    pub fn rule(&self, u_hi: f64, panels_per_decade: usize, order: usize) -> Result<SubordinationRule> {
        let lo = self.lower_cut();
        let panels = LogPanelRule::new(lo, u_hi, panels_per_decade, order);
        let mut w_eta = Vec::with_capacity(panels.nodes.len());
        for (&u, &w) in panels.nodes.iter().zip(&panels.weights) {
            w_eta.push(w * self.eta1(u)?);
        }
        Ok(SubordinationRule {
            alpha: self.alpha,
            u: panels.nodes,
            w: panels.weights,
            w_eta,
            u_hi,
            eta_hi: self.eta1(u_hi)?,
            survival_hi: self.survival(u_hi),
        })
    }

    /// ∫₀^∞ e^{−λs} η^α_t(s) ds.
    pub fn laplace_transform(&self, t: f64, lambda: f64) -> Result<f64> {
        if !(t > 0.0 && lambda >= 0.0) {
            return input("laplace transform needs t > 0 and lambda >= 0");
        }
        let tau = t.powf(1.0 / self.alpha);
        let rate = lambda * tau;
        let u_hi = if rate > 0.0 { (60.0 / rate).min(1e16) } else { 1e16 };
        let u_hi = u_hi.max(10.0 * self.lower_cut());
        let eval = |ppd: usize| -> Result<f64> {
            let r = LogPanelRule::new(self.lower_cut(), u_hi, ppd, 20);
            let mut s = 0.0;
            for (&u, &w) in r.nodes.iter().zip(&r.weights) {
                s += w * self.eta1(u)? * (-rate * u).exp();
            }
            Ok(s + (-rate * u_hi).exp() * self.survival(u_hi))
        };
        let coarse = eval(1)?;
        let fine = eval(2)?;
        if (fine - coarse).abs() > self.tol.max(1e-13) {
            return Err(Error::Accuracy {
                context: format!("laplace transform at t={t}, lambda={lambda}"),
                achieved_digits: -((fine - coarse).abs().log10()),
            });
        }
        Ok(fine)
    }

    /// |∫ e^{−λs}η_t(s) ds − e^{−tλ^α}|.
    pub fn laplace_check(&self, t: f64, lambda: f64) -> Result<f64> {
        let v = self.laplace_transform(t, lambda)?;
        Ok((v - (-t * lambda.powf(self.alpha)).exp()).abs())
    }

    /// ∫₀^∞ u^{−γ} η^α_1(u) du, finite for γ > −α.
    pub fn moment(&self, g: f64) -> Result<f64> {
        let a = self.alpha;
        if g <= -a {
            return Err(Error::Accuracy {
                context: format!("moment of order {} diverges (tail u^(-1-alpha))", -g),
                achieved_digits: 0.0,
            });
        }
        let u_hi = 1e16;
        let r = LogPanelRule::new(self.lower_cut(), u_hi, 2, 20);
        let mut s = 0.0;
        for (&u, &w) in r.nodes.iter().zip(&r.weights) {
            s += w * self.eta1(u)? * u.powf(-g);
        }
        // Termwise tail ∫_U^∞ u^{−γ} c_k u^{−αk−1} du.
        let mut tail = 0.0;
        for k in 1..60 {
            let kf = k as f64;
            let ln_mag = ln_gamma(a * kf + 1.0) - ln_gamma(kf + 1.0) - (a * kf + g) * u_hi.ln();
            let sn = (PI * ((kf * a) % 2.0)).sin();
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            tail += sign * sn * ln_mag.exp() / (PI * (a * kf + g));
        }
        let v = s + tail;
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::Accuracy { context: format!("moment of order {g}"), achieved_digits: 0.0 });
        }
        Ok(v)
    }
}

/// η^{1/2}_1 in closed form.
pub fn eta_half(u: f64) -> f64 {
    (-0.25 / u).exp() * u.powf(-1.5) / (2.0 * PI.sqrt())
}

/// Nodes u_j and weights w_j η_1(u_j) so that
/// ∫₀^∞ η_1(u) g(u) du ≈ Σ w_j η_1(u_j) g(u_j) + tail beyond `u_hi`.
#[derive(Debug, Clone)]
pub struct SubordinationRule {
    pub alpha: f64,
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    pub w_eta: Vec<f64>,
    pub u_hi: f64,
    pub eta_hi: f64,
    pub survival_hi: f64,
}

impl SubordinationRule {
    /// ∫_U^∞ η_1(u) g(u) du for g(u) ≈ g(U)(u/U)^{−m}, using η_1(u) ≈ η_1(U)(u/U)^{−1−α}.
    pub fn power_tail(&self, g_hi: f64, m: f64) -> f64 {
        self.eta_hi * self.u_hi * g_hi / (self.alpha + m)
    }
}
