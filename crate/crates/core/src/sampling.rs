//! Seeded random families: bump sums, point clouds and discrete measures.

use crate::capacity::{Atom, DiscreteMeasure};
use crate::space::{MetricMeasureSpace, QuadratureGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// amp · exp(−(d(x, center)/width)²)
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bump {
    pub center: Vec<f64>,
    pub width: f64,
    pub amp: f64,
}

impl Bump {
    pub fn eval(&self, space: &MetricMeasureSpace, x: &[f64]) -> f64 {
        let d = space.dist(x, &self.center);
        self.amp * (-(d / self.width).powi(2)).exp()
    }
}

/// Between 1 and `max_count` bumps, centers uniform in [−c, c]^n, widths
/// uniform in `widths`, amplitudes in [0.5, 1.5] with random sign when
/// `signed`.
pub fn random_bumps(
    rng: &mut ChaCha8Rng,
    dim: usize,
    max_count: usize,
    center_radius: f64,
    widths: (f64, f64),
    signed: bool,
) -> Vec<Bump> {
    let count = rng.gen_range(1..=max_count.max(1));
    (0..count)
        .map(|_| {
            let center = (0..dim).map(|_| rng.gen_range(-center_radius..=center_radius)).collect();
            let width = rng.gen_range(widths.0..=widths.1);
            let mut amp = rng.gen_range(0.5..=1.5);
            if signed && rng.gen_bool(0.5) {
                amp = -amp;
            }
            Bump { center, width, amp }
        })
        .collect()
}

pub fn bumps_on_grid(bumps: &[Bump], space: &MetricMeasureSpace, grid: &QuadratureGrid) -> Vec<f64> {
    (0..grid.len())
        .map(|i| bumps.iter().map(|b| b.eval(space, grid.node(i))).sum())
        .collect()
}

/// Uniform points in [−c, c]^n.
pub fn random_cloud(rng: &mut ChaCha8Rng, dim: usize, count: usize, c: f64) -> Vec<Vec<f64>> {
    (0..count).map(|_| (0..dim).map(|_| rng.gen_range(-c..=c)).collect()).collect()
}

/// Atoms with times in `times`, positions in [−c, c]^n and masses in `masses`.
pub fn random_measure(
    rng: &mut ChaCha8Rng,
    dim: usize,
    atoms: usize,
    times: (f64, f64),
    c: f64,
    masses: (f64, f64),
) -> DiscreteMeasure {
    DiscreteMeasure {
        atoms: (0..atoms)
            .map(|_| Atom {
                t: rng.gen_range(times.0..=times.1),
                x: (0..dim).map(|_| rng.gen_range(-c..=c)).collect(),
                m: rng.gen_range(masses.0..=masses.1),
            })
            .collect(),
    }
}

/// Lattice sample of a random smooth space-time density: atoms at the
/// centres of a `per_axis`-per-axis grid on [−c, c]^n at each of `times`,
/// with mass ρ(t, x)·h^n·dt where ρ is a sum of one to three positive
/// Gaussian bumps over a small constant floor.
pub fn diffuse_measure(rng: &mut ChaCha8Rng, dim: usize, per_axis: usize, c: f64, times: &[f64], dt: f64) -> DiscreteMeasure {
    let count = rng.gen_range(1..=3);
    let (t_lo, t_hi) = (times[0], times[times.len() - 1]);
    let bumps: Vec<(f64, Vec<f64>, f64, f64)> = (0..count)
        .map(|_| {
            let tc = rng.gen_range(t_lo..=t_hi);
            let xc = (0..dim).map(|_| rng.gen_range(-c..=c)).collect();
            let w = rng.gen_range(0.5 * c..=1.5 * c);
            let amp = rng.gen_range(0.5..=1.5);
            (tc, xc, w, amp)
        })
        .collect();
    let h = 2.0 * c / per_axis as f64;
    let cell = h.powi(dim as i32) * dt;
    let mut atoms = Vec::new();
    for &t in times {
        for code in 0..per_axis.pow(dim as u32) {
            let mut x = vec![0.0; dim];
            let mut r = code;
            for d in (0..dim).rev() {
                x[d] = -c + (r % per_axis) as f64 * h + 0.5 * h;
                r /= per_axis;
            }
            let rho: f64 = 0.05 + bumps
                .iter()
                .map(|(tc, xc, w, amp)| {
                    let d2: f64 = x.iter().zip(xc).map(|(a, b)| (a - b) * (a - b)).sum();
                    amp * (-(d2 + (t - tc) * (t - tc)) / (w * w)).exp()
                })
                .sum::<f64>();
            atoms.push(Atom { t, x, m: rho * cell });
        }
    }
    DiscreteMeasure { atoms }
}
