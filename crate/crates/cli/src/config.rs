//! Run configuration read from TOML.

use fracheat::frackernel::FracHeatOperator;
use fracheat::space::{HeatKernelModel, MetricMeasureSpace, QuadratureGrid};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("config error: {0}")]
    Parse(String),
    #[error("config error: key `{key}`: {msg}")]
    Invalid { key: &'static str, msg: String },
}

fn invalid(key: &'static str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key, msg: msg.into() }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub space: SpaceConfig,
    pub operator: OperatorConfig,
    #[serde(default)]
    pub kernel: KernelConfig,
    #[serde(default)]
    pub bounds: BoundsConfig,
    #[serde(default)]
    pub solve: SolveConfig,
    #[serde(default)]
    pub capacity: CapacityConfig,
    #[serde(default)]
    pub trace: TraceConfig,
    #[serde(default)]
    pub dyadic: DyadicConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceKindConfig {
    Euclidean,
    Weighted,
    Heisenberg,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceConfig {
    pub kind: SpaceKindConfig,
    #[serde(default = "one")]
    pub n: usize,
    #[serde(default)]
    pub gamma: f64,
}

impl Default for SpaceConfig {
    fn default() -> Self {
        SpaceConfig { kind: SpaceKindConfig::Euclidean, n: 1, gamma: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelConfig {
    Exact,
    GaussGauge,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorConfig {
    pub alpha: f64,
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default = "default_spacing")]
    pub spacing: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_model")]
    pub model: ModelConfig,
    #[serde(default = "one_f")]
    pub gauge_c: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelConfig {
    pub t_min: f64,
    pub t_max: f64,
    pub nt: usize,
    pub d_max: f64,
    pub nd: usize,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig { t_min: 0.1, t_max: 10.0, nt: 20, d_max: 10.0, nd: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundsConfig {
    pub theta: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub nt: usize,
    pub rho_min: f64,
    pub rho_max: f64,
    pub nrho: usize,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        BoundsConfig { theta: 1.0, t_min: 0.1, t_max: 10.0, nt: 9, rho_min: 1e-3, rho_max: 1e3, nrho: 241 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveConfig {
    /// Output times of u = e^{−t𝓛^α}φ + G(f).
    pub times: Vec<f64>,
    /// Width of the Gaussian initial datum φ (0 for φ = 0).
    pub phi_width: f64,
    /// Source f(t,x) = (1 + a·sin t)·exp(−|x|²/w²).
    pub source_amp: f64,
    pub source_width: f64,
    /// Residual check (exact 1-D model only) over |x| ≤ interior.
    pub interior: f64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig { times: vec![0.5, 1.0, 2.0], phi_width: 1.0, source_amp: 0.5, source_width: 1.0, interior: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct CapacityConfig {
    pub p: f64,
    /// Constraint points as [t, x₁, …]; random ones are drawn when empty.
    pub points: Vec<Vec<f64>>,
    pub random_points: usize,
    pub t_range: [f64; 2],
    pub x_radius: f64,
    pub tol: f64,
}

impl Default for CapacityConfig {
    fn default() -> Self {
        CapacityConfig { p: 2.0, points: Vec::new(), random_points: 6, t_range: [0.2, 2.0], x_radius: 1.0, tol: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct TraceConfig {
    pub p: f64,
    pub q: f64,
    pub atoms: usize,
    pub t_range: [f64; 2],
    pub x_radius: f64,
    pub mass_range: [f64; 2],
    pub trials: usize,
}

impl Default for TraceConfig {
    fn default() -> Self {
        TraceConfig { p: 3.0, q: 2.0, atoms: 5, t_range: [0.3, 1.5], x_radius: 0.5, mass_range: [0.5, 1.5], trials: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct DyadicConfig {
    pub points: usize,
    pub cloud_radius: f64,
    pub delta: f64,
    pub k_min: i32,
    pub k_max: i32,
    pub p: f64,
    pub atoms: usize,
    pub queries: usize,
    /// Literal δ^{2α} time slabs instead of δ^{2αk}.
    pub literal_slabs: bool,
}

impl Default for DyadicConfig {
    fn default() -> Self {
        DyadicConfig {
            points: 500,
            cloud_radius: 1.0,
            delta: 0.2,
            k_min: -1,
            k_max: 3,
            p: 2.0,
            atoms: 20,
            queries: 20,
            literal_slabs: false,
        }
    }
}

fn one() -> usize {
    1
}
fn one_f() -> f64 {
    1.0
}
fn default_radius() -> f64 {
    8.0
}
fn default_spacing() -> f64 {
    0.1
}
fn default_tol() -> f64 {
    1e-10
}
fn default_model() -> ModelConfig {
    ModelConfig::Exact
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_toml(&text)
    }

    /// All keys are checked here, before any computation.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let o = &self.operator;
        if !(o.alpha > 0.0 && o.alpha < 1.0) {
            return Err(invalid("operator.alpha", format!("must lie in (0, 1), got {}", o.alpha)));
        }
        if !(o.radius > 0.0 && o.radius.is_finite()) {
            return Err(invalid("operator.radius", "must be positive"));
        }
        if !(o.spacing > 0.0 && o.spacing < o.radius) {
            return Err(invalid("operator.spacing", "must be positive and below the radius"));
        }
        if !(o.tol > 0.0 && o.tol < 1.0) {
            return Err(invalid("operator.tol", "must lie in (0, 1)"));
        }
        if !(o.gauge_c > 0.0) {
            return Err(invalid("operator.gauge_c", "must be positive"));
        }
        if self.space.kind != SpaceKindConfig::Heisenberg && !(1..=3).contains(&self.space.n) {
            return Err(invalid("space.n", "must be 1, 2 or 3"));
        }
        if self.space.kind == SpaceKindConfig::Weighted && !(self.space.gamma > -(self.space.n as f64)) {
            return Err(invalid("space.gamma", "must exceed -n"));
        }
        let k = &self.kernel;
        if !(k.t_min > 0.0 && k.t_max >= k.t_min) || k.nt == 0 {
            return Err(invalid("kernel.t_min", "need 0 < t_min <= t_max and nt >= 1"));
        }
        if !(k.d_max >= 0.0) || k.nd == 0 {
            return Err(invalid("kernel.d_max", "need d_max >= 0 and nd >= 1"));
        }
        let b = &self.bounds;
        if !(b.theta >= 0.0) {
            return Err(invalid("bounds.theta", "must be nonnegative"));
        }
        if !(b.t_min > 0.0 && b.t_max >= b.t_min && b.rho_min > 0.0 && b.rho_max > b.rho_min) || b.nt < 2 || b.nrho < 3 {
            return Err(invalid("bounds.t_min", "invalid scan grid"));
        }
        let s = &self.solve;
        if s.times.is_empty() || s.times.iter().any(|t| !(*t > 0.0)) {
            return Err(invalid("solve.times", "need at least one positive time"));
        }
        if !(s.phi_width >= 0.0) || !(s.source_width > 0.0) {
            return Err(invalid("solve.source_width", "widths must be positive"));
        }
        let c = &self.capacity;
        if !(c.p > 1.0 && c.p.is_finite()) {
            return Err(invalid("capacity.p", "must lie in (1, inf)"));
        }
        let dim = self.space_dim();
        if c.points.iter().any(|v| v.len() != dim + 1 || !(v[0] > 0.0)) {
            return Err(invalid("capacity.points", format!("each point is [t > 0, {dim} coordinates]")));
        }
        if !(c.t_range[0] > 0.0 && c.t_range[1] >= c.t_range[0]) {
            return Err(invalid("capacity.t_range", "need 0 < lo <= hi"));
        }
        if !(c.tol > 0.0) {
            return Err(invalid("capacity.tol", "must be positive"));
        }
        let t = &self.trace;
        if !(t.p > 1.0 && t.q > 1.0 && t.p.is_finite() && t.q.is_finite()) || t.p == t.q {
            return Err(invalid("trace.q", "need p, q in (1, inf) with p != q"));
        }
        if t.atoms == 0 || !(t.t_range[0] > 0.0 && t.t_range[1] >= t.t_range[0]) {
            return Err(invalid("trace.atoms", "need at least one atom with positive times"));
        }
        if !(t.mass_range[0] > 0.0 && t.mass_range[1] >= t.mass_range[0]) {
            return Err(invalid("trace.mass_range", "need 0 < lo <= hi"));
        }
        let d = &self.dyadic;
        if !(d.delta > 0.0 && d.delta < 1.0) {
            return Err(invalid("dyadic.delta", "must lie in (0, 1)"));
        }
        if d.points == 0 || d.k_max < d.k_min {
            return Err(invalid("dyadic.points", "need a nonempty cloud and k_min <= k_max"));
        }
        if !(d.p > 1.0 && d.p.is_finite()) {
            return Err(invalid("dyadic.p", "must lie in (1, inf)"));
        }
        Ok(())
    }

    pub fn space_dim(&self) -> usize {
        match self.space.kind {
            SpaceKindConfig::Heisenberg => 3,
            _ => self.space.n,
        }
    }

    pub fn build_space(&self) -> fracheat::Result<MetricMeasureSpace> {
        match self.space.kind {
            SpaceKindConfig::Euclidean => MetricMeasureSpace::euclidean(self.space.n),
            SpaceKindConfig::Weighted => MetricMeasureSpace::weighted_euclidean(self.space.n, self.space.gamma),
            SpaceKindConfig::Heisenberg => Ok(MetricMeasureSpace::heisenberg()),
        }
    }

    /// The operator on the configured grid; `refine` halves the spacing.
    pub fn build_operator(&self, refine: bool) -> fracheat::Result<FracHeatOperator> {
        let sp = self.build_space()?;
        let o = &self.operator;
        let model = match o.model {
            ModelConfig::Exact => HeatKernelModel::exact_gaussian(&sp)?,
            ModelConfig::GaussGauge => HeatKernelModel::model_gauss_gauge(&sp, o.gauge_c)?,
        };
        let h = if refine { o.spacing / 2.0 } else { o.spacing };
        let grid = QuadratureGrid::new(&sp, o.radius, h)?;
        FracHeatOperator::new(o.alpha, model, grid, o.tol)
    }
}
