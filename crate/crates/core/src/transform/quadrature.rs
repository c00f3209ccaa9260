//! Stratified sampling of densities over images of boxes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::maps::SmoothMap;
use crate::cube::AxisBox;
use crate::error::{Error, Result};
use crate::grid::MassGrid;

/// Default number of samples per region.
pub const DEFAULT_SAMPLES: usize = 4096;

/// Tolerance for points that land a rounding error outside the unit cube.
const EDGE_TOL: f64 = 1e-12;

/// What to do with sample points mapped outside `[0,1]^n`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClipPolicy {
    /// Fail with [`Error::RegionEscapes`].
    #[default]
    Reject,
    /// Drop them from both mass and volume.
    Clip,
}

/// How samples in the parameter box are weighted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// By `|Jφ|`: mass and volume of the image `φ(Q)`.
    #[default]
    Jacobian,
    /// Uniformly: the fraction of `Q` that `φ` sends into the set.
    Parameter,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureOptions {
    pub samples: usize,
    pub seed: u64,
    pub clip: ClipPolicy,
    pub weighting: Weighting,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        QuadratureOptions {
            samples: DEFAULT_SAMPLES,
            seed: 0,
            clip: ClipPolicy::Reject,
            weighting: Weighting::Jacobian,
        }
    }
}

impl QuadratureOptions {
    pub fn with_samples(mut self, samples: usize) -> Self {
        self.samples = samples;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_clip(mut self, clip: ClipPolicy) -> Self {
        self.clip = clip;
        self
    }

    pub fn with_weighting(mut self, weighting: Weighting) -> Self {
        self.weighting = weighting;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct QuadratureResult {
    pub mass: f64,
    pub volume: f64,
    pub density: f64,
    /// Standard error of `density`.
    pub stderr: f64,
    pub mass_stderr: f64,
    pub volume_stderr: f64,
    /// `|Jφ|·|Q|` when the Jacobian is constant.
    pub exact_volume: Option<f64>,
    pub samples: usize,
}

/// Key for the sampling stream of a cube at a scale.
pub fn region_key(level: u32, index: &[i64]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64 ^ level as u64;
    for &i in index {
        h = (h ^ i as u64).wrapping_mul(0x0000_0100_0000_01b3);
        h ^= h >> 29;
    }
    h
}

/// Strata per axis and total sample count actually used for `n` requested.
pub fn strata(dim: usize, n: usize) -> (usize, usize) {
    let n = n.max(2);
    match dim {
        1 => {
            let m = n.next_power_of_two();
            (m, m)
        }
        _ => {
            let m = ((n as f64).sqrt().ceil() as usize).next_power_of_two();
            (m, m * m)
        }
    }
}

/// Samples `φ(Q)` against the grid: one jittered point per stratum of `Q`.
///
/// Sums are pairwise, so constant integrands are reproduced exactly.
pub fn region_quadrature(
    grid: &MassGrid,
    domain: &AxisBox,
    map: &dyn SmoothMap,
    opts: &QuadratureOptions,
    key: u64,
) -> Result<QuadratureResult> {
    if opts.samples < 64 {
        return Err(crate::error::invalid("at least 64 samples required"));
    }
    let dim = grid.dim();
    if domain.dim() != dim {
        return Err(Error::Dimension(domain.dim()));
    }
    let (m, total) = strata(dim, opts.samples);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(key);
    let corner = domain.corner();
    let h = domain.side() / m as f64;
    let mut ys = Vec::with_capacity(total);
    let mut vs = Vec::with_capacity(total);
    for s in 0..total {
        let (ix, iy) = if dim == 1 { (s, 0) } else { (s % m, s / m) };
        let jx: f64 = rng.gen();
        let jy: f64 = if dim == 1 { 0.0 } else { rng.gen() };
        let u = [
            corner[0] + (ix as f64 + jx) * h,
            if dim == 1 { 0.0 } else { corner[1] + (iy as f64 + jy) * h },
        ];
        let mut x = map.forward(u);
        let weight = match opts.weighting {
            Weighting::Jacobian if dim == 1 => map.derivative(u)[0][0].abs(),
            Weighting::Jacobian => map.jacobian(u).abs(),
            Weighting::Parameter => 1.0,
        };
        let inside = snap(&mut x[..dim]);
        match (inside, opts.clip) {
            (true, _) => {
                let f = grid.density_at(&x[..dim]).expect("inside");
                ys.push(f * weight);
                vs.push(weight);
            }
            (false, ClipPolicy::Clip) => {
                ys.push(0.0);
                vs.push(0.0);
            }
            (false, ClipPolicy::Reject) => return Err(Error::RegionEscapes),
        }
    }
    let vol_q = domain.volume();
    let mean_y = pairwise_sum(&ys) / total as f64;
    let mean_v = pairwise_sum(&vs) / total as f64;
    let density = if mean_v > 0.0 { (mean_y / mean_v).clamp(0.0, 1.0) } else { 0.0 };
    let stderr = if mean_v > 0.0 {
        let z = |i: usize| (ys[i] - density * vs[i]) / mean_v;
        let ss: f64 = (0..total / 2).map(|p| (z(2 * p) - z(2 * p + 1)).powi(2)).sum();
        ss.sqrt() / total as f64
    } else {
        0.0
    };
    let pair_err = |v: &[f64]| {
        let ss: f64 = (0..total / 2).map(|p| (v[2 * p] - v[2 * p + 1]).powi(2)).sum();
        ss.sqrt() / total as f64 * vol_q
    };
    let exact_volume = match (opts.weighting, map.constant_jacobian()) {
        (Weighting::Jacobian, Some(j)) if dim == 2 => Some(j.abs() * vol_q),
        _ => None,
    };
    Ok(QuadratureResult {
        mass: mean_y * vol_q,
        volume: mean_v * vol_q,
        density,
        stderr,
        mass_stderr: pair_err(&ys),
        volume_stderr: pair_err(&vs),
        exact_volume,
        samples: total,
    })
}

/// Pulls points within rounding distance back into the unit cube.
fn snap(x: &mut [f64]) -> bool {
    for v in x.iter_mut() {
        if *v < 0.0 {
            if *v < -EDGE_TOL {
                return false;
            }
            *v = 0.0;
        } else if *v > 1.0 {
            if *v > 1.0 + EDGE_TOL {
                return false;
            }
            *v = 1.0;
        }
    }
    true
}

pub(crate) fn pairwise_sum(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        n => {
            let mid = n.next_power_of_two() / 2;
            pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
        }
    }
}
