//! Bilipschitz maps of the plane with derivative data.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::linear::{apply, det, mul, rotation, svd2, Mat2, IDENTITY};
use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// A bilipschitz `C¹` map with uniformly continuous derivative.
///
/// Points are planar; one-dimensional callers use the first coordinate only.
pub trait SmoothMap: Sync {
    fn forward(&self, x: Point) -> Point;
    fn inverse(&self, y: Point) -> Point;
    /// `Dφ(x)`, rows indexed by output coordinate.
    fn derivative(&self, x: Point) -> Mat2;
    /// Declared bilipschitz constant `M`.
    fn lipschitz(&self) -> f64;
    /// Declared bound on `‖Dφ(x) − Dφ(y)‖` for `‖x − y‖ <= delta`.
    fn derivative_modulus(&self, delta: f64) -> f64;

    /// `Jφ(x)`.
    fn jacobian(&self, x: Point) -> f64 {
        det(&self.derivative(x))
    }

    /// `Some(J)` when the Jacobian determinant is the same everywhere.
    fn constant_jacobian(&self) -> Option<f64> {
        None
    }

    /// Whether the map is affine, so images of boxes are parallelograms.
    fn is_affine(&self) -> bool {
        false
    }
}

/// `T(x) = φ(z) + Dφ(z)(x − z)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    pub base: Point,
    pub image: Point,
    pub linear: Mat2,
}

impl AffineMap {
    pub fn tangent(map: &dyn SmoothMap, z: Point) -> Self {
        AffineMap { base: z, image: map.forward(z), linear: map.derivative(z) }
    }
}

impl SmoothMap for AffineMap {
    fn forward(&self, x: Point) -> Point {
        let d = apply(&self.linear, [x[0] - self.base[0], x[1] - self.base[1]]);
        [self.image[0] + d[0], self.image[1] + d[1]]
    }

    fn inverse(&self, y: Point) -> Point {
        let j = det(&self.linear);
        let l = &self.linear;
        let inv = [[l[1][1] / j, -l[0][1] / j], [-l[1][0] / j, l[0][0] / j]];
        let d = apply(&inv, [y[0] - self.image[0], y[1] - self.image[1]]);
        [self.base[0] + d[0], self.base[1] + d[1]]
    }

    fn derivative(&self, _x: Point) -> Mat2 {
        self.linear
    }

    fn lipschitz(&self) -> f64 {
        let f = svd2(&self.linear);
        if f.invertible() {
            f.op_norm().max(1.0 / f.co_norm())
        } else {
            f64::INFINITY
        }
    }

    fn derivative_modulus(&self, _delta: f64) -> f64 {
        0.0
    }

    fn constant_jacobian(&self) -> Option<f64> {
        Some(det(&self.linear))
    }

    fn is_affine(&self) -> bool {
        true
    }
}

/// The built-in map family, as read from configuration files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MapSpec {
    Identity,
    /// `(x, y) ↦ (y, x)`.
    Swap,
    /// Rotation by `angle` about `center` (default the middle of the square).
    Rotation {
        angle: f64,
        #[serde(default = "mid")]
        center: Point,
    },
    /// Multiplies coordinate `axis` by `lambda`.
    Dilation { lambda: f64, axis: usize },
    /// `(x + a sin(2π f y), y)`.
    Shear { amplitude: f64, frequency: f64 },
    /// `(x + a sin(2π f x), y)`; needs `|2π f a| < 1`.
    Warp { amplitude: f64, frequency: f64 },
    Linear { matrix: Mat2 },
    /// `maps[0]` first, then `maps[1]`, ...
    Composition { maps: Vec<MapSpec> },
}

fn mid() -> Point {
    [0.5, 0.5]
}

impl MapSpec {
    pub fn rotation(angle: f64) -> Self {
        MapSpec::Rotation { angle, center: mid() }
    }

    pub fn shear(amplitude: f64, frequency: f64) -> Self {
        MapSpec::Shear { amplitude, frequency }
    }

    /// Rejects parameters for which the formula is not bilipschitz.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::MapRejected(m));
        match self {
            MapSpec::Rotation { angle, center } => {
                if !angle.is_finite() || !center.iter().all(|c| c.is_finite()) {
                    return bad("non-finite rotation".into());
                }
            }
            MapSpec::Dilation { lambda, axis } => {
                if !(*lambda > 0.0 && lambda.is_finite()) {
                    return bad(format!("dilation factor {lambda} must be positive"));
                }
                if *axis > 1 {
                    return bad(format!("dilation axis {axis} out of range"));
                }
            }
            MapSpec::Shear { amplitude, frequency } => {
                if !(amplitude.is_finite() && frequency.is_finite()) {
                    return bad("non-finite shear".into());
                }
            }
            MapSpec::Warp { amplitude, frequency } => {
                if !((TAU * frequency * amplitude).abs() < 1.0) {
                    return bad(format!("warp slope {} must be below 1", TAU * frequency * amplitude));
                }
            }
            MapSpec::Linear { matrix } => {
                if !svd2(matrix).invertible() {
                    return bad("singular linear map".into());
                }
            }
            MapSpec::Composition { maps } => {
                for m in maps {
                    m.validate()?;
                }
            }
            MapSpec::Identity | MapSpec::Swap => {}
        }
        Ok(())
    }
}

fn warp_inverse(a: f64, f: f64, y: f64) -> f64 {
    // x + a sin(2π f x) is increasing; bracket and refine.
    let mut lo = y - a.abs();
    let mut hi = y + a.abs();
    let mut x = y;
    for _ in 0..100 {
        let g = x + a * (TAU * f * x).sin() - y;
        if g.abs() < 1e-15 {
            break;
        }
        if g > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let dg = 1.0 + a * TAU * f * (TAU * f * x).cos();
        let next = x - g / dg;
        x = if next > lo && next < hi { next } else { 0.5 * (lo + hi) };
    }
    x
}

impl SmoothMap for MapSpec {
    fn forward(&self, p: Point) -> Point {
        match self {
            MapSpec::Identity => p,
            MapSpec::Swap => [p[1], p[0]],
            MapSpec::Rotation { angle, center } => {
                let d = apply(&rotation(*angle), [p[0] - center[0], p[1] - center[1]]);
                [center[0] + d[0], center[1] + d[1]]
            }
            MapSpec::Dilation { lambda, axis } => {
                let mut q = p;
                q[*axis] *= lambda;
                q
            }
            MapSpec::Shear { amplitude, frequency } => {
                [p[0] + amplitude * (TAU * frequency * p[1]).sin(), p[1]]
            }
            MapSpec::Warp { amplitude, frequency } => {
                [p[0] + amplitude * (TAU * frequency * p[0]).sin(), p[1]]
            }
            MapSpec::Linear { matrix } => apply(matrix, p),
            MapSpec::Composition { maps } => maps.iter().fold(p, |q, m| m.forward(q)),
        }
    }

    fn inverse(&self, q: Point) -> Point {
        match self {
            MapSpec::Identity => q,
            MapSpec::Swap => [q[1], q[0]],
            MapSpec::Rotation { angle, center } => {
                let d = apply(&rotation(-angle), [q[0] - center[0], q[1] - center[1]]);
                [center[0] + d[0], center[1] + d[1]]
            }
            MapSpec::Dilation { lambda, axis } => {
                let mut p = q;
                p[*axis] /= lambda;
                p
            }
            MapSpec::Shear { amplitude, frequency } => {
                [q[0] - amplitude * (TAU * frequency * q[1]).sin(), q[1]]
            }
            MapSpec::Warp { amplitude, frequency } => {
                [warp_inverse(*amplitude, *frequency, q[0]), q[1]]
            }
            MapSpec::Linear { matrix } => {
                let j = det(matrix);
                let m = matrix;
                apply(&[[m[1][1] / j, -m[0][1] / j], [-m[1][0] / j, m[0][0] / j]], q)
            }
            MapSpec::Composition { maps } => maps.iter().rev().fold(q, |p, m| m.inverse(p)),
        }
    }

    fn derivative(&self, p: Point) -> Mat2 {
        match self {
            MapSpec::Identity => IDENTITY,
            MapSpec::Swap => [[0.0, 1.0], [1.0, 0.0]],
            MapSpec::Rotation { angle, .. } => rotation(*angle),
            MapSpec::Dilation { lambda, axis } => {
                let mut m = IDENTITY;
                m[*axis][*axis] = *lambda;
                m
            }
            MapSpec::Shear { amplitude, frequency } => {
                [[1.0, amplitude * TAU * frequency * (TAU * frequency * p[1]).cos()], [0.0, 1.0]]
            }
            MapSpec::Warp { amplitude, frequency } => {
                [[1.0 + amplitude * TAU * frequency * (TAU * frequency * p[0]).cos(), 0.0], [0.0, 1.0]]
            }
            MapSpec::Linear { matrix } => *matrix,
            MapSpec::Composition { maps } => {
                let mut q = p;
                let mut d = IDENTITY;
                for m in maps {
                    d = mul(&m.derivative(q), &d);
                    q = m.forward(q);
                }
                d
            }
        }
    }

    fn lipschitz(&self) -> f64 {
        match self {
            MapSpec::Identity | MapSpec::Swap | MapSpec::Rotation { .. } => 1.0,
            MapSpec::Dilation { lambda, .. } => lambda.max(1.0 / lambda),
            MapSpec::Shear { amplitude, frequency } => {
                let s = (TAU * frequency * amplitude).abs();
                (s + (s * s + 4.0).sqrt()) / 2.0
            }
            MapSpec::Warp { amplitude, frequency } => {
                1.0 / (1.0 - (TAU * frequency * amplitude).abs())
            }
            MapSpec::Linear { matrix } => {
                let f = svd2(matrix);
                f.op_norm().max(1.0 / f.co_norm())
            }
            MapSpec::Composition { maps } => maps.iter().map(|m| m.lipschitz()).product(),
        }
    }

    fn derivative_modulus(&self, delta: f64) -> f64 {
        match self {
            MapSpec::Shear { amplitude, frequency } | MapSpec::Warp { amplitude, frequency } => {
                amplitude.abs() * (TAU * frequency).powi(2) * delta
            }
            MapSpec::Composition { maps } => {
                // ‖D(g∘f)(x) − D(g∘f)(y)‖ ≤ ω_g(M_f δ)·M_f + M_g·ω_f(δ)
                let mut lip = 1.0;
                let mut modulus = 0.0;
                for m in maps {
                    let ml = m.lipschitz();
                    modulus = m.derivative_modulus(lip * delta) * lip + ml * modulus;
                    lip *= ml;
                }
                modulus
            }
            _ => 0.0,
        }
    }

    fn constant_jacobian(&self) -> Option<f64> {
        match self {
            MapSpec::Identity | MapSpec::Rotation { .. } | MapSpec::Shear { .. } => Some(1.0),
            MapSpec::Swap => Some(-1.0),
            MapSpec::Dilation { lambda, .. } => Some(*lambda),
            MapSpec::Warp { .. } => None,
            MapSpec::Linear { matrix } => Some(det(matrix)),
            MapSpec::Composition { maps } => {
                maps.iter().try_fold(1.0, |acc, m| m.constant_jacobian().map(|j| acc * j))
            }
        }
    }

    fn is_affine(&self) -> bool {
        match self {
            MapSpec::Shear { amplitude, .. } | MapSpec::Warp { amplitude, .. } => *amplitude == 0.0,
            MapSpec::Composition { maps } => maps.iter().all(|m| m.is_affine()),
            _ => true,
        }
    }
}

/// What sampling found when checking a map's declared constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MapCheck {
    pub lipschitz: f64,
    /// Largest observed `‖φ(x)−φ(y)‖/‖x−y‖` and `‖x−y‖/‖φ(x)−φ(y)‖`.
    pub observed_expansion: f64,
    pub observed_contraction: f64,
    pub jacobian_range: (f64, f64),
    /// Largest observed ratio of derivative change to the declared modulus.
    pub continuity_ratio: f64,
    pub roundtrip_error: f64,
}

/// Spot-checks the declared constants of `map` on `pairs` random pairs in
/// the unit square, and the derivative modulus on pairs at most `2^-8` apart.
pub fn verify_map(map: &dyn SmoothMap, pairs: usize, seed: u64) -> Result<MapCheck> {
    let m = map.lipschitz();
    if !(m.is_finite() && m >= 1.0) {
        return Err(Error::MapRejected(format!("bilipschitz constant {m} invalid")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut check = MapCheck {
        lipschitz: m,
        observed_expansion: 0.0,
        observed_contraction: 0.0,
        jacobian_range: (f64::INFINITY, 0.0),
        continuity_ratio: 0.0,
        roundtrip_error: 0.0,
    };
    let tol = 1e-9;
    for _ in 0..pairs {
        let x: Point = [rng.gen(), rng.gen()];
        let y: Point = [rng.gen(), rng.gen()];
        let dxy = dist(x, y);
        if dxy > 0.0 {
            let dphi = dist(map.forward(x), map.forward(y));
            check.observed_expansion = check.observed_expansion.max(dphi / dxy);
            check.observed_contraction = check.observed_contraction.max(dxy / dphi);
        }
        let j = map.jacobian(x).abs();
        check.jacobian_range.0 = check.jacobian_range.0.min(j);
        check.jacobian_range.1 = check.jacobian_range.1.max(j);
        check.roundtrip_error = check.roundtrip_error.max(dist(map.inverse(map.forward(x)), x));

        let r = rng.gen::<f64>() * f64::powi(2.0, -8);
        let theta = rng.gen::<f64>() * TAU;
        let z = [x[0] + r * theta.cos(), x[1] + r * theta.sin()];
        let change = frobenius_diff(&map.derivative(x), &map.derivative(z));
        let allowed = map.derivative_modulus(dist(x, z));
        if change > allowed + 1e-12 {
            return Err(Error::MapRejected(format!(
                "derivative changes by {change} over {}, declared {allowed}",
                dist(x, z)
            )));
        }
        if allowed > 0.0 {
            check.continuity_ratio = check.continuity_ratio.max(change / allowed);
        }
    }
    if check.observed_expansion > m * (1.0 + tol) || check.observed_contraction > m * (1.0 + tol) {
        return Err(Error::MapRejected(format!(
            "observed distortion {} exceeds declared {m}",
            check.observed_expansion.max(check.observed_contraction)
        )));
    }
    let (jlo, jhi) = check.jacobian_range;
    if jlo < 1.0 / (m * m) * (1.0 - tol) || jhi > m * m * (1.0 + tol) {
        return Err(Error::MapRejected(format!("Jacobian range [{jlo}, {jhi}] outside M^±2")));
    }
    if check.roundtrip_error > 1e-9 {
        return Err(Error::MapRejected(format!(
            "inverse disagrees with forward by {}",
            check.roundtrip_error
        )));
    }
    Ok(check)
}

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn frobenius_diff(a: &Mat2, b: &Mat2) -> f64 {
    let mut s = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            s += (a[i][j] - b[i][j]).powi(2);
        }
    }
    s.sqrt()
}
