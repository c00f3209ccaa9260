//! Dilations along one axis, checked slab by slab.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::window::forward_extrema;
use crate::cube::MAX_DIM;
use crate::error::{invalid, Error, Result};
use crate::grid::MassGrid;
use crate::modulus::ModulusProfile;

/// A half-open interval `[start, start + width)` in units of the cube side.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Slab {
    pub start: f64,
    pub width: f64,
    /// `0` for unit slabs, `k` for a slab of width `2^-k`.
    pub order: u32,
}

/// `[0, λ)` cut into unit slabs followed by maximal dyadic slabs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SlabDecomposition {
    pub lambda: f64,
    pub integer_slabs: Vec<Slab>,
    pub dyadic_slabs: Vec<Slab>,
}

impl SlabDecomposition {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda >= 1.0 && lambda.is_finite()) {
            return Err(invalid(format!("slab decomposition needs λ >= 1, got {lambda}")));
        }
        let whole = lambda.floor();
        let integer_slabs =
            (0..whole as u64).map(|i| Slab { start: i as f64, width: 1.0, order: 0 }).collect();
        let mut dyadic_slabs = Vec::new();
        let mut start = whole;
        let mut rest = lambda - whole;
        let mut k = 1;
        while rest > 0.0 && k <= 60 {
            let w = f64::powi(2.0, -(k as i32));
            if rest >= w {
                dyadic_slabs.push(Slab { start, width: w, order: k });
                start += w;
                rest -= w;
            }
            k += 1;
        }
        Ok(SlabDecomposition { lambda, integer_slabs, dyadic_slabs })
    }

    pub fn slabs(&self) -> impl Iterator<Item = &Slab> {
        self.integer_slabs.iter().chain(&self.dyadic_slabs)
    }

    pub fn total_width(&self) -> f64 {
        self.slabs().map(|s| s.width).sum()
    }
}

/// `λ + 1 + 3/λ`.
pub fn dilation_coefficient(lambda: f64) -> f64 {
    lambda + 1.0 + 3.0 / lambda
}

/// `4(λ + 1/λ)`.
pub fn dilation_envelope(lambda: f64) -> f64 {
    4.0 * (lambda + 1.0 / lambda)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DilationRow {
    pub level: u32,
    pub lambda: f64,
    /// Stretch factor actually applied (`λ` or `1/λ`) and its axis.
    pub stretch: f64,
    pub axis: usize,
    pub boxes: usize,
    /// Largest `|D(stretched box) − D(cube inside it)|`.
    pub measured: f64,
    pub omega: f64,
    pub bound: f64,
    pub envelope_bound: f64,
    /// Largest slab gap over its own per-slab bound.
    pub slab_ratio: f64,
    /// Largest `|D(box) − Σ width·D(slab)/λ|`.
    pub decomposition_error: f64,
    pub pass: bool,
}

/// Compares each stretched box `φ^-1(Q)` with the cubes of the same side
/// inside it, at every lattice position used by `profile`.
///
/// For `λ < 1` in the plane the preimage of a cube of side `h` is a cube of
/// side `λh` stretched by `1/λ` along the other axis, and is checked as such.
pub fn verify_dilation_bound(
    grid: &MassGrid,
    lambda: f64,
    axis: usize,
    scales: &[u32],
    profile: &ModulusProfile,
) -> Result<Vec<DilationRow>> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(invalid(format!("dilation factor {lambda} must be positive")));
    }
    let dim = grid.dim();
    if axis >= dim {
        return Err(Error::Dimension(axis + 1));
    }
    if scales.is_empty() {
        return Err(Error::EmptyScales);
    }
    let k = grid.level();
    scales
        .iter()
        .map(|&level| {
            let sample = profile
                .samples
                .iter()
                .find(|s| s.level == level)
                .ok_or_else(|| invalid(format!("profile has no scale {level}")))?;
            let omega = profile.envelope_at(level).unwrap_or(0.0);
            let h = (1u64 << (k - level)) as f64;
            let step = 1usize << (k - sample.stride);
            let (stretch, axis, side) = if lambda >= 1.0 {
                (lambda, axis, h)
            } else if dim == 1 {
                (1.0, axis, lambda * h)
            } else {
                (1.0 / lambda, 1 - axis, lambda * h)
            };
            let row = stretched_gap(grid, side, stretch, axis, step)?;
            let bound = dilation_coefficient(stretch) * omega;
            let envelope_bound = dilation_envelope(stretch) * omega;
            let slack = 1e-12;
            Ok(DilationRow {
                level,
                lambda,
                stretch,
                axis,
                boxes: row.boxes,
                measured: row.gap,
                omega,
                bound,
                envelope_bound,
                slab_ratio: if omega > 0.0 { row.slab_gap_ratio / omega } else if row.slab_gap_ratio > 0.0 { f64::INFINITY } else { 0.0 },
                decomposition_error: row.decomposition_error,
                pass: row.gap <= bound + slack && row.gap <= envelope_bound + slack,
            })
        })
        .collect()
}

struct StretchedGap {
    boxes: usize,
    gap: f64,
    /// Largest slab gap divided by its coefficient; to be divided by `ω`.
    slab_gap_ratio: f64,
    decomposition_error: f64,
}

/// Boxes `side·stretch × side` (stretched along `axis`) with corners on the
/// lattice of `step` cells, compared with every lattice cube of side `side`
/// they contain.
fn stretched_gap(grid: &MassGrid, side: f64, stretch: f64, axis: usize, step: usize) -> Result<StretchedGap> {
    let dim = grid.dim();
    let n = grid.side_cells();
    let long = side * stretch;
    if long > n as f64 + 1e-9 {
        return Err(invalid("stretched box does not fit in the unit cube"));
    }
    let fit = |len: f64| ((n as f64 - len) / step as f64 + 1e-9).floor() as usize + 1;
    let cubes_per_axis = fit(side);
    let boxes_along = fit(long);
    let other = if dim == 1 { 1 } else { cubes_per_axis };
    let offsets = (((long - side) / step as f64) + 1e-9).floor() as usize + 1;
    let slabs = SlabDecomposition::new(stretch)?;
    let rect = |lo: [f64; MAX_DIM], hi: [f64; MAX_DIM]| -> f64 {
        let vol: f64 = (0..dim).map(|i| hi[i] - lo[i]).product();
        (grid.mass_cells(&lo, &hi) / vol).clamp(0.0, 1.0)
    };
    let corner = |along: usize, across: usize| -> [f64; MAX_DIM] {
        let mut c = [0.0; MAX_DIM];
        c[axis] = (along * step) as f64;
        if dim == 2 {
            c[1 - axis] = (across * step) as f64;
        }
        c
    };
    let extent = |c: [f64; MAX_DIM], along_len: f64| -> [f64; MAX_DIM] {
        let mut hi = c;
        hi[axis] += along_len;
        if dim == 2 {
            hi[1 - axis] += side;
        }
        hi
    };
    let lines: Vec<(f64, usize, f64, f64)> = (0..other)
        .into_par_iter()
        .map(|across| {
            let cubes: Vec<f64> = (0..cubes_per_axis)
                .map(|along| {
                    let c = corner(along, across);
                    rect(c, extent(c, side))
                })
                .collect();
            let (hi, lo) = forward_extrema(&cubes, offsets);
            let mut gap: f64 = 0.0;
            let mut slab_ratio: f64 = 0.0;
            let mut decomposition: f64 = 0.0;
            for along in 0..boxes_along {
                let c = corner(along, across);
                let d = rect(c, extent(c, long));
                gap = gap.max((d - hi[along]).abs()).max((d - lo[along]).abs());
                let base = cubes[along];
                let mut acc = 0.0;
                for s in slabs.slabs() {
                    let mut sc = c;
                    sc[axis] += s.start * side;
                    let ds = rect(sc, extent(sc, s.width * side));
                    acc += s.width * ds;
                    if s.width * side >= 1.0 {
                        let coef = if s.order == 0 { stretch } else { stretch + 1.0 + s.order as f64 };
                        slab_ratio = slab_ratio.max((ds - base).abs() / coef);
                    }
                }
                decomposition = decomposition.max((acc / stretch - d).abs());
            }
            (gap, boxes_along, slab_ratio, decomposition)
        })
        .collect();
    Ok(StretchedGap {
        boxes: lines.iter().map(|l| l.1).sum(),
        gap: lines.iter().map(|l| l.0).fold(0.0, f64::max),
        slab_gap_ratio: lines.iter().map(|l| l.2).fold(0.0, f64::max),
        decomposition_error: lines.iter().map(|l| l.3).fold(0.0, f64::max),
    })
}
