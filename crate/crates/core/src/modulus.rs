//! Empirical smoothness modulus `ω(t)`.
//!
//! `ω(2^-j)` is estimated as the largest density gap over consecutive pairs
//! of side `2^-j` drawn from a finite family: the dyadic grid, a finer
//! lattice of corners, or a rotated copy of such a lattice. Every estimate is
//! a lower bound for the continuum supremum.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cube::{dyadic_step, AxisBox, ConsecutivePair, PairLattice, MAX_DIM};
use crate::error::{invalid, Error, Result};
use crate::grid::MassGrid;
use crate::transform::maps::MapSpec;
use crate::transform::quadrature::{region_key, region_quadrature, QuadratureOptions};

/// Family of consecutive pairs used for the estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PairMode {
    Dyadic,
    /// Corners on the `2^-stride` lattice; `None` means `min(K, j + 4)`.
    Lattice { stride: Option<u32> },
    /// A lattice rotated by `angle` about the centre of the square, with
    /// densities by quadrature. `None` stride means the rotated dyadic grid.
    Rotated { angle: f64, stride: Option<u32>, samples: usize },
}

impl PairMode {
    pub fn lattice() -> Self {
        PairMode::Lattice { stride: None }
    }

    pub fn name(&self) -> String {
        match self {
            PairMode::Dyadic => "dyadic".into(),
            PairMode::Lattice { .. } => "lattice".into(),
            PairMode::Rotated { angle, .. } => format!("rotated({angle})"),
        }
    }
}

/// The maximising pair of a sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    /// For rotated modes the pair lives in the unrotated lattice.
    pub pair: ConsecutivePair,
    pub densities: [f64; 2],
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ModulusSample {
    pub level: u32,
    pub t: f64,
    pub omega: f64,
    pub pair_count: u64,
    pub stride: u32,
    pub witness: Option<Witness>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModulusProfile {
    pub mode: PairMode,
    /// Sorted by decreasing `t`.
    pub samples: Vec<ModulusSample>,
}

impl ModulusProfile {
    pub fn omega_at(&self, level: u32) -> Option<f64> {
        self.samples.iter().find(|s| s.level == level).map(|s| s.omega)
    }

    /// Running maximum over measured scales at or finer than `level`.
    pub fn envelope_at(&self, level: u32) -> Option<f64> {
        self.samples
            .iter()
            .filter(|s| s.level >= level)
            .map(|s| s.omega)
            .reduce(f64::max)
    }

    /// The envelope at every sampled scale.
    pub fn envelope(&self) -> Vec<f64> {
        self.samples.iter().map(|s| self.envelope_at(s.level).unwrap_or(0.0)).collect()
    }

    pub fn finest_level(&self) -> Option<u32> {
        self.samples.last().map(|s| s.level)
    }

    pub fn trend(&self) -> Trend {
        Trend::of(&self.samples.iter().map(|s| s.omega).collect::<Vec<_>>())
    }
}

/// Coarse behaviour of a series over decreasing scales.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trend {
    /// Identically zero.
    Vanishing,
    /// Finest value strictly below the coarsest.
    Decaying,
    /// No decrease across the window.
    Persistent,
}

impl Trend {
    pub fn of(values: &[f64]) -> Trend {
        if values.iter().all(|&v| v == 0.0) {
            Trend::Vanishing
        } else if values.len() >= 2 && values[values.len() - 1] < values[0] {
            Trend::Decaying
        } else {
            Trend::Persistent
        }
    }

    pub fn tends_to_zero(&self) -> bool {
        !matches!(self, Trend::Persistent)
    }
}

/// Estimates `ω(2^-j)` for each `j` in `scales`.
pub fn estimate_modulus(grid: &MassGrid, scales: &[u32], mode: PairMode) -> Result<ModulusProfile> {
    if scales.is_empty() {
        return Err(Error::EmptyScales);
    }
    let mut levels = scales.to_vec();
    levels.sort_unstable();
    levels.dedup();
    let samples = levels
        .iter()
        .map(|&j| match mode {
            PairMode::Dyadic => lattice_sample(grid, j, j),
            PairMode::Lattice { stride } => {
                lattice_sample(grid, j, stride.unwrap_or((j + 4).min(grid.level())))
            }
            PairMode::Rotated { angle, stride, samples } => {
                rotated_sample(grid, j, stride.unwrap_or(j), angle, samples)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ModulusProfile { mode, samples })
}

/// Densities of every cube of side `2^-level` with corner on the `2^-stride`
/// lattice inside the unit cube, first coordinate fastest.
pub(crate) fn lattice_densities(grid: &MassGrid, level: u32, stride: u32) -> (usize, Vec<f64>) {
    let dim = grid.dim();
    let k = grid.level();
    let step = 1usize << (k - stride);
    let side = (1usize << (k - level)) as f64;
    let s = 1usize << (stride - level);
    let m = (1usize << stride) - s + 1;
    let dyadic = grid.level_masses(level);
    let per = grid.cells_per_cube(level);
    let n_level = 1usize << level;
    let density = |p: [usize; MAX_DIM]| -> f64 {
        if p[..dim].iter().all(|v| v % s == 0) {
            let flat = if dim == 1 { p[0] / s } else { p[0] / s + n_level * (p[1] / s) };
            dyadic[flat] / per
        } else {
            let mut lo = [0.0; MAX_DIM];
            let mut hi = [0.0; MAX_DIM];
            let mut vol = 1.0;
            for i in 0..dim {
                lo[i] = (p[i] * step) as f64;
                hi[i] = lo[i] + side;
                vol *= side;
            }
            (grid.mass_cells(&lo, &hi) / vol).clamp(0.0, 1.0)
        }
    };
    let out = match dim {
        1 => (0..m).into_par_iter().map(|x| density([x, 0])).collect(),
        _ => (0..m * m).into_par_iter().map(|f| density([f % m, f / m])).collect(),
    };
    (m, out)
}

/// Largest `|a[p] - a[p + offset]|` over valid positions along each axis,
/// with its position; ties go to the first axis, then the smallest index.
pub(crate) fn max_gap(dim: usize, m: usize, values: &[f64], offset: usize) -> Option<(f64, usize, usize)> {
    if offset >= m {
        return None;
    }
    let best = |a: (f64, usize, usize), b: (f64, usize, usize)| {
        if b.0 > a.0 || (b.0 == a.0 && (b.2, b.1) < (a.2, a.1)) {
            b
        } else {
            a
        }
    };
    (0..dim)
        .map(|axis| {
            let stride = if axis == 0 { 1 } else { m };
            let len = values.len();
            (0..len)
                .into_par_iter()
                .filter(|&f| {
                    let coord = if axis == 0 { f % m } else { f / m };
                    coord + offset < m
                })
                .map(|f| ((values[f] - values[f + offset * stride]).abs(), f, axis))
                .reduce(|| (-1.0, usize::MAX, usize::MAX), best)
        })
        .filter(|r| r.0 >= 0.0)
        .reduce(best)
}

fn lattice_sample(grid: &MassGrid, level: u32, stride: u32) -> Result<ModulusSample> {
    let k = grid.level();
    if level > k || stride > k || stride < level {
        return Err(invalid(format!(
            "scale {level} with stride {stride} needs {level} <= stride <= K = {k}"
        )));
    }
    let dim = grid.dim();
    let lattice = PairLattice::new(dim, level, stride)?;
    let (m, dens) = lattice_densities(grid, level, stride);
    let s = 1usize << (stride - level);
    let found = max_gap(dim, m, &dens, s);
    let witness = found.map(|(_, f, axis)| {
        let p = if dim == 1 { [f as u64, 0] } else { [(f % m) as u64, (f / m) as u64] };
        let stride_off = if axis == 0 { 1 } else { m };
        Witness {
            pair: lattice.pair_at(axis, &p[..dim]),
            densities: [dens[f], dens[f + s * stride_off]],
        }
    });
    Ok(ModulusSample {
        level,
        t: dyadic_step(level),
        omega: found.map_or(0.0, |r| r.0),
        pair_count: lattice.count(),
        stride,
        witness,
    })
}

/// The rotated square for lattice corner `p` (in `2^-stride` units), if it
/// lies inside the unit square.
fn rotated_cube(p: [i64; 2], level: u32, stride: u32, map: &MapSpec) -> Option<AxisBox> {
    use crate::transform::maps::SmoothMap;
    let step = dyadic_step(stride);
    let h = dyadic_step(level);
    let corner = [p[0] as f64 * step, p[1] as f64 * step];
    let inside = [[0.0, 0.0], [h, 0.0], [0.0, h], [h, h]].iter().all(|d| {
        let x = map.forward([corner[0] + d[0], corner[1] + d[1]]);
        x.iter().all(|v| (-1e-12..=1.0 + 1e-12).contains(v))
    });
    inside.then(|| AxisBox::new(&corner, h).expect("positive side"))
}

/// Density of a rotated lattice cube; the sampling stream is keyed by the
/// cube so that witnesses reproduce exactly.
pub fn rotated_density(
    grid: &MassGrid,
    cube: &AxisBox,
    level: u32,
    stride: u32,
    angle: f64,
    samples: usize,
) -> Result<f64> {
    let map = MapSpec::rotation(angle);
    let step = dyadic_step(stride);
    let p = [(cube.corner()[0] / step).round() as i64, (cube.corner()[1] / step).round() as i64];
    let opts = QuadratureOptions::default().with_samples(samples);
    let key = region_key(level * 64 + stride, &p);
    Ok(region_quadrature(grid, cube, &map, &opts, key)?.density)
}

fn rotated_sample(
    grid: &MassGrid,
    level: u32,
    stride: u32,
    angle: f64,
    samples: usize,
) -> Result<ModulusSample> {
    if grid.dim() != 2 {
        return Err(Error::Dimension(grid.dim()));
    }
    if level + 2 > grid.level() || stride < level || stride > grid.level() {
        return Err(invalid(format!(
            "rotated scale {level} with stride {stride} needs level <= K-2 and level <= stride <= K"
        )));
    }
    let map = MapSpec::rotation(angle);
    let s = 1i64 << (stride - level);
    let full = 1i64 << stride;
    let lo = -full / 4 - s;
    let hi = full + full / 4;
    let width = (hi - lo + 1) as usize;
    let cubes: Vec<Option<f64>> = (0..width * width)
        .into_par_iter()
        .map(|f| {
            let p = [lo + (f % width) as i64, lo + (f / width) as i64];
            match rotated_cube(p, level, stride, &map) {
                Some(b) => rotated_density(grid, &b, level, stride, angle, samples).map(Some),
                None => Ok(None),
            }
        })
        .collect::<Result<_>>()?;
    let mut best: Option<(f64, usize, usize)> = None;
    let mut count = 0u64;
    for axis in 0..2 {
        let off = if axis == 0 { s as usize } else { s as usize * width };
        for f in 0..cubes.len() {
            let coord = if axis == 0 { f % width } else { f / width };
            if coord + (s as usize) >= width {
                continue;
            }
            if let (Some(a), Some(b)) = (cubes[f], cubes[f + off]) {
                count += 1;
                let g = (a - b).abs();
                if best.map_or(true, |(v, _, _)| g > v) {
                    best = Some((g, f, axis));
                }
            }
        }
    }
    let witness = best.map(|(_, f, axis)| {
        let p = [lo + (f % width) as i64, lo + (f / width) as i64];
        let step = dyadic_step(stride);
        let first =
            AxisBox::new(&[p[0] as f64 * step, p[1] as f64 * step], dyadic_step(level)).expect("side");
        let off = if axis == 0 { s as usize } else { s as usize * width };
        Witness {
            pair: ConsecutivePair::along(first, axis),
            densities: [cubes[f].expect("valid"), cubes[f + off].expect("valid")],
        }
    });
    Ok(ModulusSample {
        level,
        t: dyadic_step(level),
        omega: best.map_or(0.0, |b| b.0),
        pair_count: count,
        stride,
        witness,
    })
}

/// Re-evaluates a witness pair on the grid.
pub fn witness_gap(grid: &MassGrid, mode: &PairMode, sample: &ModulusSample) -> Result<Option<f64>> {
    let Some(w) = sample.witness else {
        return Ok(None);
    };
    let (a, b) = match mode {
        PairMode::Rotated { angle, samples, .. } => (
            rotated_density(grid, &w.pair.first, sample.level, sample.stride, *angle, *samples)?,
            rotated_density(grid, &w.pair.second, sample.level, sample.stride, *angle, *samples)?,
        ),
        _ => (grid.box_density(&w.pair.first)?, grid.box_density(&w.pair.second)?),
    };
    Ok(Some((a - b).abs()))
}

/// Largest parent–child density gap at `level` against `n·ω`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StepCheck {
    pub level: u32,
    pub measured: f64,
    /// `n` times the dyadic modulus envelope at the parent scale.
    pub bound: f64,
    pub pass: bool,
}

/// Compares every level-`j` cube with its children.
pub fn dyadic_step_check(grid: &MassGrid, level: u32) -> Result<StepCheck> {
    if level >= grid.level() {
        return Err(invalid(format!("level {level} must be below K = {}", grid.level())));
    }
    let dim = grid.dim();
    let parents = grid.level_densities(level);
    let children = grid.level_densities(level + 1);
    let n = 1usize << level;
    let measured = (0..children.len())
        .into_par_iter()
        .map(|c| {
            let parent = if dim == 1 {
                c / 2
            } else {
                let m = 2 * n;
                (c % m) / 2 + n * ((c / m) / 2)
            };
            (children[c] - parents[parent]).abs()
        })
        .reduce(|| 0.0, f64::max);
    let profile = estimate_modulus(grid, &[level, level + 1], PairMode::Dyadic)?;
    let bound = dim as f64 * profile.envelope_at(level).unwrap_or(0.0);
    Ok(StepCheck { level, measured, bound, pass: measured <= bound + 1e-12 })
}

/// The three definitions of smoothness side by side.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GridComparison {
    pub dyadic: ModulusProfile,
    pub lattice: ModulusProfile,
    pub rotated: Vec<ModulusProfile>,
    /// Largest `ω_lattice / ω_dyadic` over scales with `ω_dyadic > 0`.
    pub max_lattice_ratio: Option<f64>,
    /// Largest `ω_rotated / ω_dyadic` per angle.
    pub max_rotated_ratio: Vec<Option<f64>>,
    pub trends: Vec<Trend>,
    /// All profiles tend to zero, or none does.
    pub consistent: bool,
}

pub fn compare_grid_definitions(
    grid: &MassGrid,
    scales: &[u32],
    stride: Option<u32>,
    angles: &[f64],
    samples: usize,
) -> Result<GridComparison> {
    let dyadic = estimate_modulus(grid, scales, PairMode::Dyadic)?;
    let lattice = estimate_modulus(grid, scales, PairMode::Lattice { stride })?;
    let rotated = angles
        .iter()
        .map(|&angle| estimate_modulus(grid, scales, PairMode::Rotated { angle, stride: None, samples }))
        .collect::<Result<Vec<_>>>()?;
    let ratio = |p: &ModulusProfile| {
        dyadic
            .samples
            .iter()
            .zip(&p.samples)
            .filter(|(d, _)| d.omega > 0.0)
            .map(|(d, o)| o.omega / d.omega)
            .reduce(f64::max)
    };
    let max_lattice_ratio = ratio(&lattice);
    let max_rotated_ratio = rotated.iter().map(ratio).collect();
    let trends: Vec<Trend> =
        std::iter::once(&dyadic).chain(Some(&lattice)).chain(&rotated).map(|p| p.trend()).collect();
    let zero = trends.iter().filter(|t| t.tends_to_zero()).count();
    let consistent = zero == 0 || zero == trends.len();
    Ok(GridComparison {
        dyadic,
        lattice,
        rotated,
        max_lattice_ratio,
        max_rotated_ratio,
        trends,
        consistent,
    })
}
