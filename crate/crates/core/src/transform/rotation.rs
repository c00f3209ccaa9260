//! Rotated squares as unions of axis-parallel squares.
//!
//! A unit square rotated by `α` about its centre contains the axis-parallel
//! square of side `1/(cos α + sin α)`. What is left is eight right triangles
//! with axis-parallel legs; each one contains a maximal axis-parallel square
//! in its right-angle corner, leaving two smaller similar triangles, and so on.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_6};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::linear::{apply, rotation};
use super::maps::MapSpec;
use super::quadrature::{region_key, region_quadrature, QuadratureOptions};
use crate::cube::{dyadic_step, AxisBox};
use crate::error::{invalid, Error, Result};
use crate::grid::MassGrid;
use crate::modulus::ModulusProfile;

/// Deepest family [`rot_decompose`] builds.
pub const MAX_DEPTH: u32 = 12;

/// An axis-parallel square, in coordinates centred on the rotated square.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Square {
    pub corner: [f64; 2],
    pub side: f64,
}

impl Square {
    pub fn area(&self) -> f64 {
        self.side * self.side
    }
}

/// A right triangle with legs along the axes; `legs` are signed lengths
/// measured from the right-angle vertex.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RightTriangle {
    pub vertex: [f64; 2],
    pub legs: [f64; 2],
}

impl RightTriangle {
    pub fn area(&self) -> f64 {
        0.5 * (self.legs[0] * self.legs[1]).abs()
    }

    /// The largest inscribed axis-parallel square and the two triangles left.
    pub fn split(&self) -> (Square, [RightTriangle; 2]) {
        let [a, b] = self.legs;
        let s = a.abs() * b.abs() / (a.abs() + b.abs());
        let (sa, sb) = (s * a.signum(), s * b.signum());
        let v = self.vertex;
        let corner = [v[0].min(v[0] + sa), v[1].min(v[1] + sb)];
        let along_a = RightTriangle { vertex: [v[0] + sa, v[1]], legs: [a - sa, sb] };
        let along_b = RightTriangle { vertex: [v[0], v[1] + sb], legs: [sa, b - sb] };
        (Square { corner, side: s }, [along_a, along_b])
    }
}

/// Squares of a rotated unit square, grouped by generation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotDecomposition {
    pub angle: f64,
    /// Area of the central square.
    pub c: f64,
    /// `families[0]` is the central square.
    pub families: Vec<Vec<Square>>,
    /// Triangles not yet covered after the deepest family.
    pub residual: Vec<RightTriangle>,
    /// Uncovered area after each family.
    pub residual_areas: Vec<f64>,
}

impl RotDecomposition {
    pub fn family_area(&self, k: usize) -> f64 {
        self.families[k].iter().map(Square::area).sum()
    }

    /// `Σ k·area(family k)`, the weight the triangle inequality puts on `ω`.
    pub fn weighted_series(&self) -> f64 {
        self.families.iter().enumerate().map(|(k, f)| k as f64 * f.iter().map(Square::area).sum::<f64>()).sum()
    }

    /// Whether `p` (centred coordinates) lies in the closed rotated square.
    pub fn contains(&self, p: [f64; 2], tol: f64) -> bool {
        let q = apply(&rotation(-self.angle), p);
        q[0].abs() <= 0.5 + tol && q[1].abs() <= 0.5 + tol
    }
}

/// Closed-form area of the central square.
pub fn central_fraction(angle: f64) -> f64 {
    1.0 / (1.0 + (2.0 * angle).sin())
}

/// Decomposes the unit square rotated by `angle ∈ [π/6, π/4]`.
pub fn rot_decompose(angle: f64, depth: u32) -> Result<RotDecomposition> {
    let tol = 1e-12;
    if !(FRAC_PI_6 - tol..=FRAC_PI_4 + tol).contains(&angle) {
        return Err(invalid(format!("angle {angle} outside [π/6, π/4]; reduce it first")));
    }
    if depth > MAX_DEPTH {
        return Err(invalid(format!("depth {depth} above {MAX_DEPTH}")));
    }
    let (sin, cos) = angle.sin_cos();
    let half = 0.5 / (cos + sin);
    let central = Square { corner: [-half, -half], side: 2.0 * half };
    let r = rotation(angle);
    let mut triangles = Vec::with_capacity(8);
    for v in [[0.5, 0.5], [-0.5, 0.5], [-0.5, -0.5], [0.5, -0.5]] {
        let p = apply(&r, v);
        if p[1].abs() > p[0].abs() {
            let fy = half * p[1].signum();
            for cx in [-half, half] {
                triangles.push(RightTriangle { vertex: [p[0], fy], legs: [cx - p[0], p[1] - fy] });
            }
        } else {
            let fx = half * p[0].signum();
            for cy in [-half, half] {
                triangles.push(RightTriangle { vertex: [fx, p[1]], legs: [p[0] - fx, cy - p[1]] });
            }
        }
    }
    let mut families = vec![vec![central]];
    let mut residual_areas = vec![1.0 - central.area()];
    for _ in 0..depth {
        let mut squares = Vec::with_capacity(triangles.len());
        let mut next = Vec::with_capacity(2 * triangles.len());
        for t in &triangles {
            let (sq, kids) = t.split();
            squares.push(sq);
            next.extend(kids);
        }
        families.push(squares);
        residual_areas.push(next.iter().map(RightTriangle::area).sum());
        triangles = next;
    }
    Ok(RotDecomposition {
        angle,
        c: central_fraction(angle),
        families,
        residual: triangles,
        residual_areas,
    })
}

/// An angle written as quarter turns, an optional reflection, and pieces in
/// `[π/6, π/4]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RotationReduction {
    pub quarter_turns: i64,
    /// Whether the pieces rotate the other way.
    pub reflected: bool,
    pub pieces: Vec<f64>,
}

impl RotationReduction {
    /// The angle the pieces and quarter turns add up to.
    pub fn total(&self) -> f64 {
        let s: f64 = self.pieces.iter().sum();
        let s = if self.reflected { -s } else { s };
        s + self.quarter_turns as f64 * FRAC_PI_2
    }
}

/// Splits a rotation into grid symmetries and in-range rotations.
pub fn reduce_rotation(angle: f64) -> RotationReduction {
    let tol = 1e-12;
    let mut turns = (angle / FRAC_PI_2).floor() as i64;
    let mut rest = angle - turns as f64 * FRAC_PI_2;
    if rest.abs() < tol || (FRAC_PI_2 - rest).abs() < tol {
        if (FRAC_PI_2 - rest).abs() < tol {
            turns += 1;
        }
        return RotationReduction { quarter_turns: turns, reflected: false, pieces: vec![] };
    }
    let mut reflected = false;
    if rest > FRAC_PI_4 {
        // α = π/2 − (π/2 − α)
        turns += 1;
        rest = FRAC_PI_2 - rest;
        reflected = true;
    }
    let pieces = if rest >= FRAC_PI_6 - tol {
        vec![rest.max(FRAC_PI_6)]
    } else {
        // α = (α + π/2) − π/2 with (α + π/2)/3 ∈ [π/6, π/4].
        turns += if reflected { 1 } else { -1 };
        vec![(rest + FRAC_PI_2) / 3.0; 3]
    };
    RotationReduction { quarter_turns: turns, reflected, pieces }
}

/// One scale of [`verify_rotation_bound`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RotationRow {
    pub level: u32,
    pub cubes: usize,
    /// Largest `|D(rotated cube) − D(cube)|`.
    pub gap: f64,
    pub stderr: f64,
    pub omega: f64,
    /// `gap / ω`, when `ω > 0`.
    pub ratio: Option<f64>,
    /// `(1−C)²C⁻¹ Σ k Cᵏ` from the computed squares; equals one in the limit.
    pub series: f64,
    /// Largest gap between a cube and its neighbour along a rotated edge.
    pub translation_gap: f64,
    /// `3n³ω`.
    pub translation_bound: f64,
    pub translation_pass: bool,
    /// Whether the grid looks discontinuous here (`ω = 1`).
    pub non_smooth: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotationReport {
    pub angle: f64,
    pub reduction: RotationReduction,
    pub rows: Vec<RotationRow>,
}

/// Compares densities of rotated squares with their axis-parallel
/// counterparts at each scale, for cubes on the `2^-(j+1)` lattice.
pub fn verify_rotation_bound(
    grid: &MassGrid,
    angle: f64,
    scales: &[u32],
    profile: &ModulusProfile,
    opts: &QuadratureOptions,
) -> Result<RotationReport> {
    if grid.dim() != 2 {
        return Err(Error::Dimension(grid.dim()));
    }
    if scales.is_empty() {
        return Err(Error::EmptyScales);
    }
    let reduction = reduce_rotation(angle);
    let piece = reduction.pieces.first().copied().unwrap_or(FRAC_PI_4);
    let dec = rot_decompose(piece, MAX_DEPTH)?;
    let series = dec.weighted_series();
    let (sin, cos) = angle.sin_cos();
    let mut rows = Vec::with_capacity(scales.len());
    for &level in scales {
        let stride = level + 1;
        if stride > grid.level() {
            return Err(invalid(format!("scale {level} too fine for K = {}", grid.level())));
        }
        let omega = profile
            .envelope_at(level)
            .ok_or_else(|| invalid(format!("profile has no scale at or below {level}")))?;
        let h = dyadic_step(level);
        let step = dyadic_step(stride);
        let reach = 0.5 * h * (cos.abs() + sin.abs());
        let n = 1i64 << stride;
        let found: Vec<(f64, f64, f64)> = (0..=n)
            .into_par_iter()
            .flat_map_iter(|iy| (0..=n).map(move |ix| [ix, iy]))
            .filter_map(|p| {
                let centre = [p[0] as f64 * step, p[1] as f64 * step];
                let inside = centre.iter().all(|&x| x - reach >= 0.0 && x + reach <= 1.0);
                inside.then_some((p, centre))
            })
            .map(|(p, centre)| {
                let cube = AxisBox::centered(&centre, h)?;
                let map = MapSpec::Rotation { angle, center: centre };
                let q = region_quadrature(grid, &cube, &map, opts, region_key(level * 64 + stride, &p))?;
                let base = grid.box_density(&cube)?;
                // Neighbour one side-length along a rotated edge direction.
                let mut trans: f64 = 0.0;
                for d in [[cos, sin], [-sin, cos]] {
                    let other = [centre[0] + h * d[0], centre[1] + h * d[1]];
                    if other.iter().all(|&x| x - h / 2.0 >= 0.0 && x + h / 2.0 <= 1.0) {
                        let b = grid.box_density(&AxisBox::centered(&other, h)?)?;
                        trans = trans.max((b - base).abs());
                    }
                }
                Ok(((q.density - base).abs(), q.stderr, trans))
            })
            .collect::<Result<_>>()?;
        let (gap, stderr) = found
            .iter()
            .fold((0.0f64, 0.0f64), |acc, r| if r.0 > acc.0 { (r.0, r.1) } else { acc });
        let translation_gap = found.iter().map(|r| r.2).fold(0.0, f64::max);
        let translation_bound = 24.0 * omega;
        rows.push(RotationRow {
            level,
            cubes: found.len(),
            gap,
            stderr,
            omega,
            ratio: (omega > 0.0).then(|| gap / omega),
            series,
            translation_gap,
            translation_bound,
            translation_pass: translation_gap <= translation_bound + 1e-12,
            non_smooth: omega >= 1.0,
        });
    }
    Ok(RotationReport { angle, reduction, rows })
}
