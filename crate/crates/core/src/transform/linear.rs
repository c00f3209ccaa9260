//! Singular value decomposition of 2×2 matrices.

use serde::{Deserialize, Serialize};

pub type Mat2 = [[f64; 2]; 2];

pub const IDENTITY: Mat2 = [[1.0, 0.0], [0.0, 1.0]];

pub fn mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

pub fn apply(a: &Mat2, x: [f64; 2]) -> [f64; 2] {
    [a[0][0] * x[0] + a[0][1] * x[1], a[1][0] * x[0] + a[1][1] * x[1]]
}

pub fn transpose(a: &Mat2) -> Mat2 {
    [[a[0][0], a[1][0]], [a[0][1], a[1][1]]]
}

pub fn det(a: &Mat2) -> f64 {
    a[0][0] * a[1][1] - a[0][1] * a[1][0]
}

/// Largest absolute entry of `a - b`.
pub fn max_diff(a: &Mat2, b: &Mat2) -> f64 {
    let mut m: f64 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            m = m.max((a[i][j] - b[i][j]).abs());
        }
    }
    m
}

pub fn rotation(angle: f64) -> Mat2 {
    let (s, c) = angle.sin_cos();
    [[c, -s], [s, c]]
}

/// A linear map of the plane with its factorisation `m = V Σ W`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearMap2 {
    pub matrix: Mat2,
    pub v: Mat2,
    pub sigma: [f64; 2],
    pub w: Mat2,
}

impl LinearMap2 {
    /// Singular values, largest first.
    pub fn singular_values(&self) -> (f64, f64) {
        (self.sigma[0], self.sigma[1])
    }

    /// Operator norm `‖m‖`.
    pub fn op_norm(&self) -> f64 {
        self.sigma[0]
    }

    /// `‖m^-1‖^-1`, zero for singular maps.
    pub fn co_norm(&self) -> f64 {
        self.sigma[1]
    }

    pub fn invertible(&self) -> bool {
        self.sigma[1] > 0.0
    }

    /// `V Σ W`.
    pub fn reconstruct(&self) -> Mat2 {
        let s = [[self.sigma[0], 0.0], [0.0, self.sigma[1]]];
        mul(&mul(&self.v, &s), &self.w)
    }
}

/// Factors `m = V Σ W` with `V`, `W` orthogonal and `Σ` diagonal, non-negative,
/// sorted descending.
pub fn svd2(m: &Mat2) -> LinearMap2 {
    // Diagonalise mᵀm with one Jacobi rotation.
    let a = m[0][0] * m[0][0] + m[1][0] * m[1][0];
    let b = m[0][0] * m[0][1] + m[1][0] * m[1][1];
    let d = m[0][1] * m[0][1] + m[1][1] * m[1][1];
    let theta = 0.5 * (2.0 * b).atan2(a - d);
    let (s, c) = theta.sin_cos();
    // Columns of `right` are the right singular vectors, largest first.
    let right: Mat2 = [[c, -s], [s, c]];
    let u0 = apply(m, [c, s]);
    let u1 = apply(m, [-s, c]);
    let n0 = u0[0].hypot(u0[1]);
    let n1 = u1[0].hypot(u1[1]);
    let (first, second, s0, s1, swap) =
        if n0 >= n1 { (u0, u1, n0, n1, false) } else { (u1, u0, n1, n0, true) };
    let right = if swap { [[right[0][1], right[0][0]], [right[1][1], right[1][0]]] } else { right };
    let e0 = if s0 > 0.0 { [first[0] / s0, first[1] / s0] } else { [1.0, 0.0] };
    let e1 = if s1 > s0 * 1e-15 && s1 > 0.0 {
        [second[0] / s1, second[1] / s1]
    } else {
        // Rank deficient: complete the basis.
        let sign = if det(m) < 0.0 { -1.0 } else { 1.0 };
        [-e0[1] * sign, e0[0] * sign]
    };
    let s1 = if s1 > s0 * 1e-15 { s1 } else { 0.0 };
    let v: Mat2 = [[e0[0], e1[0]], [e0[1], e1[1]]];
    LinearMap2 { matrix: *m, v, sigma: [s0, s1], w: transpose(&right) }
}
