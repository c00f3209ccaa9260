//! Random dyadic martingale sets and deterministic fixtures.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::grid::MassGrid;

/// Name recorded with generated grids.
pub const RNG_NAME: &str = "chacha8 (rand_chacha 0.3): key from seed_from_u64(seed), stream = level, one u32 word per parent cube";

/// How the per-level increment bound `ε̂_k` is chosen.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IncrementRule {
    /// `scale · ratio^k`.
    Geometric { scale: f64, ratio: f64 },
    /// `min(cap, scale / sqrt(k))`.
    InverseSqrt { scale: f64, cap: f64 },
    /// The same bound at every level.
    Constant { value: f64 },
    /// `values[k-1]` for level `k`.
    Explicit { values: Vec<f64> },
}

impl Default for IncrementRule {
    fn default() -> Self {
        IncrementRule::Geometric { scale: 0.3, ratio: 0.7 }
    }
}

impl IncrementRule {
    pub fn bound(&self, k: u32) -> f64 {
        match self {
            IncrementRule::Geometric { scale, ratio } => scale * ratio.powi(k as i32),
            IncrementRule::InverseSqrt { scale, cap } => cap.min(scale / (k as f64).sqrt()),
            IncrementRule::Constant { value } => *value,
            IncrementRule::Explicit { values } => {
                values.get(k as usize - 1).or(values.last()).copied().unwrap_or(0.0)
            }
        }
    }
}

/// Parameters of a martingale set.
///
/// Each level refines every cube into children whose densities average to the
/// parent's. The offsets are a smoothing prediction from the neighbouring
/// cubes (optional) plus a random zero-sum part, and never exceed `ε̂_k` in
/// absolute value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MartingaleSchedule {
    pub rule: IncrementRule,
    pub levels: u32,
    pub seed: u64,
    pub start_density: f64,
    /// Use the neighbour-averaging prediction.
    pub predictor: bool,
    /// Largest random offset as a fraction of `ε̂_k`.
    pub random_share: f64,
}

impl MartingaleSchedule {
    /// The default schedule: `ε̂_k = 0.3·0.7^k`, prediction on, random share 0.3.
    pub fn new(levels: u32, seed: u64) -> Self {
        MartingaleSchedule {
            rule: IncrementRule::default(),
            levels,
            seed,
            start_density: 0.5,
            predictor: true,
            random_share: 0.3,
        }
    }

    /// Purely random `±ε` increments with `ε = min(ε̂_k, d, 1-d)`.
    pub fn plain(rule: IncrementRule, levels: u32, seed: u64) -> Self {
        MartingaleSchedule {
            rule,
            levels,
            seed,
            start_density: 0.5,
            predictor: false,
            random_share: 1.0,
        }
    }

    pub fn with_rule(mut self, rule: IncrementRule) -> Self {
        self.rule = rule;
        self
    }

    pub fn with_start(mut self, d: f64) -> Self {
        self.start_density = d;
        self
    }

    /// `ε̂_k` for `k = 1..=levels`.
    pub fn increments(&self) -> Vec<f64> {
        (1..=self.levels).map(|k| self.rule.bound(k)).collect()
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        let max = match dim {
            1 => 20,
            2 => 13,
            _ => return Err(crate::error::Error::Dimension(dim)),
        };
        if self.levels > max {
            return Err(crate::error::Error::Resolution { dim, level: self.levels, max });
        }
        if !(self.start_density > 0.0 && self.start_density < 1.0) {
            return Err(invalid("start density must lie in (0,1)"));
        }
        if !(0.0..=1.0).contains(&self.random_share) {
            return Err(invalid("random share must lie in [0,1]"));
        }
        let eps = self.increments();
        if eps.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
            return Err(invalid("increment bounds must be finite and non-negative"));
        }
        if eps.windows(2).any(|w| w[1] > w[0]) {
            return Err(invalid("increment bounds must be non-increasing"));
        }
        Ok(())
    }
}

/// 1-D prediction weights for the left and right child.
const LEFT: [f64; 3] = [0.125, 1.0, -0.125];
const RIGHT: [f64; 3] = [-0.125, 1.0, 0.125];

/// The six ways to give two of four quadrants `+r` and two `-r`.
const SPLITS: [[f64; 4]; 6] = [
    [1.0, 1.0, -1.0, -1.0],
    [1.0, -1.0, 1.0, -1.0],
    [1.0, -1.0, -1.0, 1.0],
    [-1.0, 1.0, 1.0, -1.0],
    [-1.0, 1.0, -1.0, 1.0],
    [-1.0, -1.0, 1.0, 1.0],
];

/// Generates a martingale set in dimension `dim`.
///
/// Deterministic in the schedule; the random word for a parent cube depends
/// only on the seed, the level and the cube index.
pub fn generate_martingale_set(sched: &MartingaleSchedule, dim: usize) -> Result<MassGrid> {
    sched.validate(dim)?;
    let mut dens = vec![sched.start_density];
    for k in 1..=sched.levels {
        let eps = sched.rule.bound(k);
        dens = match dim {
            1 => refine_1d(&dens, k, eps, sched),
            _ => refine_2d(&dens, k, eps, sched),
        };
    }
    MassGrid::new(dim, sched.levels, dens)
}

fn level_rng(seed: u64, level: u32, word: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(level as u64);
    rng.set_word_pos(word as u128);
    rng
}

/// Scales `dev` so that `|dev| <= eps` and `d + dev` stays in `[0,1]`.
fn fit_prediction(d: f64, dev: &mut [f64], eps: f64) {
    let mut theta: f64 = 1.0;
    for &v in dev.iter() {
        if v > 0.0 {
            theta = theta.min(eps / v).min((1.0 - d) / v);
        } else if v < 0.0 {
            theta = theta.min(eps / -v).min(d / -v);
        }
    }
    let theta = theta.max(0.0);
    for v in dev.iter_mut() {
        *v *= theta;
    }
}

/// Adds `sign·r` to `dev`, with `r` as large as the envelope and range allow.
fn add_random(d: f64, dev: &mut [f64], signs: &[f64], eps: f64, share: f64) {
    let peak = dev.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut r = (share * eps).min(eps - peak);
    for (v, s) in dev.iter().zip(signs) {
        let room = if *s > 0.0 { 1.0 - (d + v) } else { d + v };
        r = r.min(room);
    }
    let r = r.max(0.0);
    for (v, s) in dev.iter_mut().zip(signs) {
        *v += s * r;
    }
}

const CHUNK_1D: usize = 4096;

fn refine_1d(parent: &[f64], k: u32, eps: f64, sched: &MartingaleSchedule) -> Vec<f64> {
    let n = parent.len();
    let mut child = vec![0.0; 2 * n];
    child.par_chunks_mut(2 * CHUNK_1D).enumerate().for_each(|(c, out)| {
        let start = c * CHUNK_1D;
        let mut rng = level_rng(sched.seed, k, start as u64);
        for (off, pair) in out.chunks_exact_mut(2).enumerate() {
            let p = start + off;
            let d = parent[p];
            let word = rng.next_u32();
            let mut dev = [0.0; 2];
            if sched.predictor {
                let l = parent[p.saturating_sub(1)];
                let r = parent[(p + 1).min(n - 1)];
                let nb = [l, d, r];
                dev[0] = dot(&LEFT, &nb) - d;
                dev[1] = dot(&RIGHT, &nb) - d;
                fit_prediction(d, &mut dev, eps);
            }
            let signs = if word & 1 == 0 { [1.0, -1.0] } else { [-1.0, 1.0] };
            add_random(d, &mut dev, &signs, eps, sched.random_share);
            pair[0] = (d + dev[0]).clamp(0.0, 1.0);
            pair[1] = (d + dev[1]).clamp(0.0, 1.0);
        }
    });
    child
}

fn refine_2d(parent: &[f64], k: u32, eps: f64, sched: &MartingaleSchedule) -> Vec<f64> {
    let n = (parent.len() as f64).sqrt() as usize;
    let m = 2 * n;
    let mut child = vec![0.0; m * m];
    child.par_chunks_mut(2 * m).enumerate().for_each(|(py, rows)| {
        let mut rng = level_rng(sched.seed, k, (py * n) as u64);
        let (top, bottom) = rows.split_at_mut(m);
        let ys = [py.saturating_sub(1), py, (py + 1).min(n - 1)];
        for px in 0..n {
            let d = parent[py * n + px];
            let word = rng.next_u32();
            let mut dev = [0.0; 4];
            if sched.predictor {
                let xs = [px.saturating_sub(1), px, (px + 1).min(n - 1)];
                let mut nb = [[0.0; 3]; 3];
                for (j, &y) in ys.iter().enumerate() {
                    for (i, &x) in xs.iter().enumerate() {
                        nb[j][i] = parent[y * n + x];
                    }
                }
                for (c, v) in dev.iter_mut().enumerate() {
                    let wx = if c & 1 == 0 { &LEFT } else { &RIGHT };
                    let wy = if c & 2 == 0 { &LEFT } else { &RIGHT };
                    let mut s = 0.0;
                    for j in 0..3 {
                        s += wy[j] * dot(wx, &nb[j]);
                    }
                    *v = s - d;
                }
                fit_prediction(d, &mut dev, eps);
            }
            let pick = ((word as u64 * 6) >> 32) as usize;
            add_random(d, &mut dev, &SPLITS[pick], eps, sched.random_share);
            top[2 * px] = (d + dev[0]).clamp(0.0, 1.0);
            top[2 * px + 1] = (d + dev[1]).clamp(0.0, 1.0);
            bottom[2 * px] = (d + dev[2]).clamp(0.0, 1.0);
            bottom[2 * px + 1] = (d + dev[3]).clamp(0.0, 1.0);
        }
    });
    child
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Volume of the cells whose density lies strictly between 0.25 and 0.75.
pub fn undecided_mass(grid: &MassGrid) -> f64 {
    let count = grid.cells().iter().filter(|&&v| v > 0.25 && v < 0.75).count();
    count as f64 * grid.cell_volume()
}

/// Deterministic test sets.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Fixture {
    Empty,
    Full,
    /// `{x_1 <= c}`.
    Halfspace { c: f64 },
    /// Alternating blocks of side `2^-m`, starting with a full block at the origin.
    Checkerboard { m: u32 },
    /// Every cell at density `d`.
    Constant { d: f64 },
}

pub fn fixture(f: Fixture, dim: usize, level: u32) -> Result<MassGrid> {
    let n = 1usize << level;
    match f {
        Fixture::Empty => MassGrid::from_fn(dim, level, |_| 0.0),
        Fixture::Full => MassGrid::from_fn(dim, level, |_| 1.0),
        Fixture::Halfspace { c } => {
            if !(0.0..=1.0).contains(&c) {
                return Err(invalid(format!("halfspace offset {c} outside [0,1]")));
            }
            let nf = n as f64;
            MassGrid::from_fn(dim, level, |i| (c * nf - i[0] as f64).clamp(0.0, 1.0))
        }
        Fixture::Checkerboard { m } => {
            if m > level {
                return Err(invalid(format!("checkerboard block level {m} finer than {level}")));
            }
            let shift = level - m;
            MassGrid::from_fn(dim, level, |i| {
                let parity: usize = i.iter().map(|v| v >> shift).sum();
                if parity % 2 == 0 {
                    1.0
                } else {
                    0.0
                }
            })
        }
        Fixture::Constant { d } => {
            if !(0.0..=1.0).contains(&d) {
                return Err(invalid(format!("density {d} outside [0,1]")));
            }
            MassGrid::from_fn(dim, level, |_| d)
        }
    }
}
