//! Subcommands. Each one returns its output files in memory; `write_all`
//! puts them under the output directory.

use crate::acceptance;
use crate::config::{ConfigError, RunConfig};
use fracheat::capacity::{self, CapacityInstance, SpaceTimePoint};
use fracheat::dyadic::{self, SlabRule};
use fracheat::estimates::{self, EnvelopeGrid, EnvelopeReport};
use fracheat::evolution::{self, PointSource};
use fracheat::sampling;
use fracheat::quad;
use rand::Rng;
use serde::Serialize;
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum CommandError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Compute(#[from] fracheat::Error),
    #[error("output error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl CommandError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CommandError::Config(_) => 2,
            _ => 3,
        }
    }
}

pub type CmdResult<T> = Result<T, CommandError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Kernel,
    Bounds,
    Solve,
    Capacity,
    Trace,
    Dyadic,
    Report,
}

impl Command {
    pub const COMPUTE: [Command; 6] =
        [Command::Kernel, Command::Bounds, Command::Solve, Command::Capacity, Command::Trace, Command::Dyadic];

    pub fn name(self) -> &'static str {
        match self {
            Command::Kernel => "kernel",
            Command::Bounds => "bounds",
            Command::Solve => "solve",
            Command::Capacity => "capacity",
            Command::Trace => "trace",
            Command::Dyadic => "dyadic",
            Command::Report => "report",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub seed: u64,
    pub refine: bool,
}

/// One output file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

/// Outcome of a run: files plus whether every acceptance row passed.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub artifacts: Vec<Artifact>,
    pub passed: bool,
}

/// Full-precision number cell.
pub fn num(v: f64) -> String {
    format!("{v:.11e}")
}

/// Seven significant digits, used for the kernel table.
pub fn num7(v: f64) -> String {
    format!("{v:.6e}")
}

fn csv_artifact(name: &str, header: &[String], rows: &[Vec<String>]) -> CmdResult<Artifact> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
    Ok(Artifact { name: name.to_string(), bytes })
}

fn json_artifact<T: Serialize>(name: &str, value: &T) -> CmdResult<Artifact> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(Artifact { name: name.to_string(), bytes })
}

fn coord_header(prefix: &[&str], dim: usize, suffix: &[&str]) -> Vec<String> {
    let mut h: Vec<String> = prefix.iter().map(|s| s.to_string()).collect();
    h.extend((1..=dim).map(|k| format!("x{k}")));
    h.extend(suffix.iter().map(|s| s.to_string()));
    h
}

/// Solver summary written by `capacity` and `trace`.
#[derive(Debug, Clone, Serialize)]
pub struct SolverSummary<R: Serialize> {
    pub value: f64,
    pub gap: f64,
    pub iterations: usize,
    pub flags: Vec<String>,
    pub report: R,
}

pub fn run(cmd: Command, cfg: &RunConfig, opts: RunOptions) -> CmdResult<RunOutput> {
    let artifacts = match cmd {
        Command::Kernel => kernel(cfg, opts)?,
        Command::Bounds => bounds(cfg, opts)?,
        Command::Solve => solve(cfg, opts)?,
        Command::Capacity => capacity_cmd(cfg, opts)?,
        Command::Trace => trace(cfg, opts)?,
        Command::Dyadic => dyadic_cmd(cfg, opts)?,
        Command::Report => {
            let summary = acceptance::run_all(opts.seed);
            let passed = summary.passed;
            return Ok(RunOutput { artifacts: vec![json_artifact("summary.json", &summary)?], passed });
        }
    };
    Ok(RunOutput { artifacts, passed: true })
}

/// Writes each artifact as `out/<name>`; names never contain separators.
pub fn write_all(out: &Path, artifacts: &[Artifact]) -> CmdResult<()> {
    std::fs::create_dir_all(out)?;
    for a in artifacts {
        debug_assert!(!a.name.contains('/') && !a.name.contains('\\'));
        std::fs::write(out.join(&a.name), &a.bytes)?;
    }
    Ok(())
}

fn kernel(cfg: &RunConfig, opts: RunOptions) -> CmdResult<Vec<Artifact>> {
    let op = cfg.build_operator(false)?;
    let k = &cfg.kernel;
    let (nt, nd) = if opts.refine { (2 * k.nt, 2 * k.nd) } else { (k.nt, k.nd) };
    let ts = quad::logspace(k.t_min, k.t_max, nt);
    let e = op.space.beta_star + 2.0 * op.alpha;
    let mut rows = Vec::with_capacity(nt * nd);
    for &t in &ts {
        for j in 0..nd {
            let d = if nd == 1 { 0.0 } else { k.d_max * j as f64 / (nd - 1) as f64 };
            let kv = op.profile(t, d);
            let env = t / (op.natural_length(t) + d).powf(e);
            rows.push(vec![num7(op.alpha), num7(t), num7(d), num7(kv), num7(env), num7(kv / env)]);
        }
    }
    let header: Vec<String> = ["alpha", "t", "d", "K", "envelope", "ratio"].iter().map(|s| s.to_string()).collect();
    Ok(vec![csv_artifact("kernel.csv", &header, &rows)?])
}

fn bounds(cfg: &RunConfig, opts: RunOptions) -> CmdResult<Vec<Artifact>> {
    let op = cfg.build_operator(false)?;
    let b = &cfg.bounds;
    let mut grid = EnvelopeGrid { t_min: b.t_min, t_max: b.t_max, nt: b.nt, rho_min: b.rho_min, rho_max: b.rho_max, nrho: b.nrho };
    if opts.refine {
        grid = grid.refined();
    }
    let runs: Vec<(&str, fracheat::Result<EnvelopeReport>)> = vec![
        ("upper", estimates::verify_upper_envelope(&op, &grid)),
        ("lower", estimates::verify_lower_envelope(&op, &grid)),
        ("time_derivative", estimates::verify_time_derivative_bound(&op, &grid)),
        ("frac_derivative", estimates::verify_frac_derivative_bound(&op, b.theta, &grid)),
    ];
    let mut rows = Vec::new();
    for (name, r) in runs {
        match r {
            Ok(r) => rows.push(vec![r.name.clone(), num(r.sup), num(r.inf), num(r.argmax.0), num(r.argmax.1), num(r.refine_delta)]),
            // Envelopes whose assumptions fail on this model are skipped.
            Err(fracheat::Error::Precondition(msg)) => eprintln!("bounds: skipping {name}: {msg}"),
            Err(e) => return Err(e.into()),
        }
    }
    let header: Vec<String> =
        ["envelope_name", "sup", "inf", "argmax_t", "argmax_d", "refine_delta"].iter().map(|s| s.to_string()).collect();
    Ok(vec![csv_artifact("bounds.csv", &header, &rows)?])
}

fn solve(cfg: &RunConfig, opts: RunOptions) -> CmdResult<Vec<Artifact>> {
    let op = cfg.build_operator(opts.refine)?;
    let s = &cfg.solve;
    let origin = vec![0.0; op.grid.dim];
    let sp = op.space.clone();
    let gauss = move |w: f64, x: &[f64]| -> f64 {
        let d = sp.distance(x, &origin).unwrap_or(f64::INFINITY);
        (-(d / w).powi(2)).exp()
    };
    let phi: Option<Vec<f64>> =
        (s.phi_width > 0.0).then(|| (0..op.grid.len()).map(|i| gauss(s.phi_width, op.grid.node(i))).collect());
    let (amp, width) = (s.source_amp, s.source_width);
    let src = PointSource(|t: f64, x: &[f64]| (1.0 + amp * t.sin()) * gauss(width, x));
    let mut times = s.times.clone();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let g = evolution::duhamel_solve(&op, &src, &times)?;
    let mut rows = Vec::new();
    for (k, &t) in times.iter().enumerate() {
        let h = match &phi {
            Some(phi) => op.semigroup_apply(t, phi)?,
            None => vec![0.0; op.grid.len()],
        };
        for i in 0..op.grid.len() {
            let mut r = vec![num(t)];
            r.extend(op.grid.node(i).iter().map(|v| num(*v)));
            r.push(num(g.values[k][i] + h[i]));
            rows.push(r);
        }
    }
    let mut out = vec![csv_artifact("solution.csv", &coord_header(&["t"], op.grid.dim, &["u"]), &rows)?];
    match evolution::duhamel_residual(&op, phi.as_deref(), &src, &times, s.interior) {
        Ok(r) => out.push(json_artifact("residual.json", &r)?),
        Err(fracheat::Error::Precondition(msg)) => eprintln!("solve: no residual check: {msg}"),
        Err(e) => return Err(e.into()),
    }
    Ok(out)
}

fn random_points(cfg: &RunConfig, seed: u64) -> Vec<SpaceTimePoint> {
    let c = &cfg.capacity;
    if !c.points.is_empty() {
        return c.points.iter().map(|v| (v[0], v[1..].to_vec())).collect();
    }
    let mut rng = sampling::rng(seed);
    let dim = cfg.space_dim();
    (0..c.random_points)
        .map(|_| {
            let t = rng.gen_range(c.t_range[0]..=c.t_range[1]);
            (t, (0..dim).map(|_| rng.gen_range(-c.x_radius..=c.x_radius)).collect())
        })
        .collect()
}

fn capacity_cmd(cfg: &RunConfig, opts: RunOptions) -> CmdResult<Vec<Artifact>> {
    let op = cfg.build_operator(opts.refine)?;
    let pts = random_points(cfg, opts.seed);
    let inst = CapacityInstance::new(&op, cfg.capacity.p, pts.clone());
    let r = capacity::capacity_dual(&inst, cfg.capacity.tol)?;
    let nu = r.measure(&pts);
    let rows: Vec<Vec<String>> = nu
        .atoms
        .iter()
        .map(|a| {
            let mut row = vec![num(a.t)];
            row.extend(a.x.iter().map(|v| num(*v)));
            row.push(num(a.m));
            row
        })
        .collect();
    let summary = SolverSummary {
        value: r.value,
        gap: r.gap,
        iterations: r.iterations,
        flags: r.flags.clone(),
        report: serde_json::json!({ "p": cfg.capacity.p, "constraints": pts.len() }),
    };
    Ok(vec![
        json_artifact("capacity.json", &summary)?,
        csv_artifact("measure.csv", &coord_header(&["t"], cfg.space_dim(), &["mass"]), &rows)?,
    ])
}

fn trace_measure(cfg: &RunConfig, seed: u64) -> capacity::DiscreteMeasure {
    let t = &cfg.trace;
    let mut rng = sampling::rng(seed);
    sampling::random_measure(&mut rng, cfg.space_dim(), t.atoms, (t.t_range[0], t.t_range[1]), t.x_radius, (t.mass_range[0], t.mass_range[1]))
}

fn trace(cfg: &RunConfig, opts: RunOptions) -> CmdResult<Vec<Artifact>> {
    let op = cfg.build_operator(opts.refine)?;
    let t = &cfg.trace;
    let nu = trace_measure(cfg, opts.seed);
    let rows: Vec<Vec<String>> = nu
        .atoms
        .iter()
        .map(|a| {
            let mut row = vec![num(a.t)];
            row.extend(a.x.iter().map(|v| num(*v)));
            row.push(num(a.m));
            row
        })
        .collect();
    let measure = csv_artifact("measure.csv", &coord_header(&["t"], cfg.space_dim(), &["mass"]), &rows)?;
    let subsets = |n: usize| if n <= capacity::KAPPA_EXACT_ATOMS { (1usize << n) - 1 } else { n * (n + 1) / 2 };
    let summary = if t.q < t.p {
        let r = dyadic::trace_condition_wolff(&op, t.p, t.q, &nu, t.trials, opts.seed)?;
        let mut flags = vec!["upper_sector".to_string()];
        if r.heuristic {
            flags.push("heuristic".into());
        }
        flags.push(if r.kappa_finite { "finite".into() } else { "infinite".into() });
        if r.finite == r.kappa_finite {
            flags.push("wolff_agrees".into());
        }
        json_artifact(
            "trace.json",
            &SolverSummary { value: r.kappa_integral, gap: 0.0, iterations: subsets(nu.atoms.len()), flags, report: r },
        )?
    } else {
        let r = capacity::trace_lower_sector(&op, t.p, t.q, &nu, t.trials, opts.seed)?;
        let mut flags = vec!["lower_sector".to_string()];
        if r.heuristic {
            flags.push("heuristic".into());
        }
        if r.consistent {
            flags.push("consistent".into());
        }
        json_artifact(
            "trace.json",
            &SolverSummary { value: r.kappa_ratio, gap: 0.0, iterations: subsets(nu.atoms.len()), flags, report: r },
        )?
    };
    Ok(vec![summary, measure])
}

#[derive(Serialize)]
struct TreeExport<'a> {
    delta: f64,
    scales: Vec<i32>,
    centers: &'a [Vec<usize>],
    parents: &'a [Vec<usize>],
}

fn dyadic_cmd(cfg: &RunConfig, opts: RunOptions) -> CmdResult<Vec<Artifact>> {
    let d = &cfg.dyadic;
    let sp = cfg.build_space()?;
    let dim = cfg.space_dim();
    let mut rng = sampling::rng(opts.seed);
    let n = if opts.refine { 2 * d.points } else { d.points };
    let cloud = sampling::random_cloud(&mut rng, dim, n, d.cloud_radius);
    let tree = dyadic::build_christ_tree(&cloud, &sp, d.delta, d.k_min, d.k_max)?;
    let report = tree.verify();
    let export = TreeExport {
        delta: tree.delta,
        scales: (0..tree.scales()).map(|s| tree.scale(s)).collect(),
        centers: &tree.centers,
        parents: &tree.parents,
    };
    let alpha = cfg.operator.alpha;
    let q = sp.q_dim.unwrap_or(sp.beta);
    let rule = if d.literal_slabs { SlabRule::Literal } else { SlabRule::Scaled };
    let nu = sampling::random_measure(&mut rng, dim, d.atoms, (0.2, 2.0), d.cloud_radius, (0.1, 1.0));
    let mut rows = Vec::new();
    for _ in 0..d.queries {
        let t = rng.gen_range(0.0..0.2);
        let x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-d.cloud_radius..=d.cloud_radius)).collect();
        let w = dyadic::wolff_potential(&sp, &nu, alpha, d.p, q, t, &x)?;
        let wd = dyadic::wolff_potential_dyadic(&tree, &nu, alpha, d.p, q, rule, t, &x)?;
        let m = dyadic::parabolic_maximal(&sp, &nu, alpha, q, &x)?;
        let mut row = vec![num(t)];
        row.extend(x.iter().map(|v| num(*v)));
        row.extend([num(w), num(wd), num(m)]);
        rows.push(row);
    }
    Ok(vec![
        json_artifact("tree.json", &export)?,
        json_artifact("christ.json", &report)?,
        csv_artifact("potentials.csv", &coord_header(&["t"], dim, &["wolff", "wolff_dyadic", "maximal"]), &rows)?,
    ])
}
