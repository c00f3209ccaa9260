//! Dyadic cubes, axis-parallel boxes and consecutive pairs.
//!
//! All cubes are half-open: `[a, a + h)` in every coordinate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported ambient dimension.
pub const MAX_DIM: usize = 2;

/// `2^-k` as an exact float.
#[inline]
pub fn dyadic_step(k: u32) -> f64 {
    f64::powi(2.0, -(k as i32))
}

fn check_dim(dim: usize) {
    assert!((1..=MAX_DIM).contains(&dim), "dimension {dim} not supported");
}

/// A dyadic cube `prod [m_i 2^-k, (m_i + 1) 2^-k)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DyadicCube {
    level: u32,
    index: [i64; MAX_DIM],
    dim: u8,
}

impl DyadicCube {
    /// Builds a cube from its level and the first `dim` entries of `index`.
    ///
    /// # Panics
    ///
    /// If `dim` is not 1 or 2, or `index` is shorter than `dim`.
    pub fn new(dim: usize, level: u32, index: &[i64]) -> Self {
        check_dim(dim);
        let mut idx = [0; MAX_DIM];
        idx[..dim].copy_from_slice(&index[..dim]);
        DyadicCube { level, index: idx, dim: dim as u8 }
    }

    /// The unit cube `[0,1)^n`.
    pub fn unit(dim: usize) -> Self {
        Self::new(dim, 0, &[0, 0])
    }

    /// The level-`k` cube containing `x`.
    pub fn containing(x: &[f64], level: u32) -> Self {
        let dim = x.len();
        check_dim(dim);
        let scale = f64::powi(2.0, level as i32);
        let mut idx = [0i64; MAX_DIM];
        for (i, v) in x.iter().enumerate() {
            idx[i] = (v * scale).floor() as i64;
        }
        DyadicCube { level, index: idx, dim: dim as u8 }
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn index(&self) -> &[i64] {
        &self.index[..self.dim()]
    }

    pub fn side(&self) -> f64 {
        dyadic_step(self.level)
    }

    pub fn volume(&self) -> f64 {
        f64::powi(self.side(), self.dim() as i32)
    }

    pub fn corner(&self) -> [f64; MAX_DIM] {
        let h = self.side();
        let mut c = [0.0; MAX_DIM];
        for i in 0..self.dim() {
            c[i] = self.index[i] as f64 * h;
        }
        c
    }

    pub fn center(&self) -> [f64; MAX_DIM] {
        let h = self.side();
        let mut c = self.corner();
        for v in c.iter_mut().take(self.dim()) {
            *v += h / 2.0;
        }
        c
    }

    /// Whether the cube lies inside `[0,1)^n`.
    pub fn in_unit(&self) -> bool {
        let n = 1i64 << self.level.min(62);
        self.index().iter().all(|&m| (0..n).contains(&m))
    }

    /// The `2^n` children, first coordinate varying fastest.
    pub fn children(&self) -> impl Iterator<Item = DyadicCube> + '_ {
        let dim = self.dim();
        (0..1usize << dim).map(move |c| {
            let mut idx = [0; MAX_DIM];
            for (i, slot) in idx.iter_mut().enumerate().take(dim) {
                *slot = 2 * self.index[i] + ((c >> i) & 1) as i64;
            }
            DyadicCube { level: self.level + 1, index: idx, dim: self.dim }
        })
    }

    pub fn parent(&self) -> Option<DyadicCube> {
        self.ancestor(self.level.checked_sub(1)?)
    }

    /// The containing cube at a coarser `level`.
    pub fn ancestor(&self, level: u32) -> Option<DyadicCube> {
        if level > self.level {
            return None;
        }
        let shift = self.level - level;
        let mut idx = [0; MAX_DIM];
        for i in 0..self.dim() {
            idx[i] = self.index[i] >> shift;
        }
        Some(DyadicCube { level, index: idx, dim: self.dim })
    }

    /// Whether `other` is contained in `self` (a cube contains itself).
    pub fn contains(&self, other: &DyadicCube) -> bool {
        other.dim == self.dim && other.ancestor(self.level).is_some_and(|a| a == *self)
    }

    pub fn to_box(&self) -> AxisBox {
        AxisBox { corner: self.corner(), side: self.side(), dim: self.dim }
    }

    /// Flat index inside level `k`, first coordinate fastest.
    ///
    /// Only meaningful for cubes inside the unit cube.
    pub fn flat_index(&self) -> usize {
        let n = 1usize << self.level;
        match self.dim() {
            1 => self.index[0] as usize,
            _ => self.index[0] as usize + n * self.index[1] as usize,
        }
    }

    /// Inverse of [`flat_index`](Self::flat_index).
    pub fn from_flat(dim: usize, level: u32, flat: usize) -> Self {
        let n = 1usize << level;
        match dim {
            1 => Self::new(1, level, &[flat as i64]),
            _ => Self::new(2, level, &[(flat % n) as i64, (flat / n) as i64]),
        }
    }
}

/// An axis-parallel cube with arbitrary real corner.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisBox {
    corner: [f64; MAX_DIM],
    side: f64,
    dim: u8,
}

impl AxisBox {
    pub fn new(corner: &[f64], side: f64) -> Result<Self> {
        let dim = corner.len();
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::Dimension(dim));
        }
        if !(side > 0.0 && side.is_finite()) {
            return Err(Error::EmptyBox(side));
        }
        let mut c = [0.0; MAX_DIM];
        c[..dim].copy_from_slice(corner);
        Ok(AxisBox { corner: c, side, dim: dim as u8 })
    }

    /// `Q(x, h)`: the cube of side `h` centred at `x`.
    pub fn centered(x: &[f64], h: f64) -> Result<Self> {
        let mut c = [0.0; MAX_DIM];
        for (i, v) in x.iter().enumerate().take(MAX_DIM) {
            c[i] = v - h / 2.0;
        }
        Self::new(&c[..x.len()], h)
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn corner(&self) -> &[f64] {
        &self.corner[..self.dim()]
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn volume(&self) -> f64 {
        f64::powi(self.side, self.dim() as i32)
    }

    pub fn center(&self) -> [f64; MAX_DIM] {
        let mut c = self.corner;
        for v in c.iter_mut().take(self.dim()) {
            *v += self.side / 2.0;
        }
        c
    }

    /// The concentric cube `tQ`.
    pub fn scaled(&self, t: f64) -> Result<Self> {
        let c = self.center();
        Self::centered(&c[..self.dim()], t * self.side)
    }

    /// The same cube moved by `delta` along `axis`.
    pub fn shifted(&self, axis: usize, delta: f64) -> Self {
        let mut b = *self;
        b.corner[axis] += delta;
        b
    }

    /// Whether the closed box lies in `[0,1]^n`.
    pub fn inside_unit(&self) -> bool {
        self.corner().iter().all(|&c| c >= 0.0 && c + self.side <= 1.0)
    }

    /// Intersection with `[0,1]^n` as `(lo, hi)` per axis, or `None` if it has
    /// no volume.
    pub fn clip_unit(&self) -> Option<([f64; MAX_DIM], [f64; MAX_DIM])> {
        let mut lo = [0.0; MAX_DIM];
        let mut hi = [0.0; MAX_DIM];
        for i in 0..self.dim() {
            lo[i] = self.corner[i].max(0.0);
            hi[i] = (self.corner[i] + self.side).min(1.0);
            if hi[i] <= lo[i] {
                return None;
            }
        }
        Some((lo, hi))
    }

    /// The dyadic cube equal to this box, if any.
    pub fn as_dyadic(&self) -> Option<DyadicCube> {
        let j = -self.side.log2();
        if !(0.0..=1000.0).contains(&j) || j.fract() != 0.0 {
            return None;
        }
        let level = j as u32;
        if dyadic_step(level) != self.side {
            return None;
        }
        let scale = f64::powi(2.0, level as i32);
        let mut idx = [0i64; MAX_DIM];
        for i in 0..self.dim() {
            let m = self.corner[i] * scale;
            if m.fract() != 0.0 || m.abs() > 9.0e15 {
                return None;
            }
            idx[i] = m as i64;
        }
        Some(DyadicCube { level, index: idx, dim: self.dim })
    }
}

/// Two equal cubes whose closures meet in a full face.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsecutivePair {
    pub first: AxisBox,
    pub second: AxisBox,
    /// Axis normal to the shared face; `second` is `first` moved by one side
    /// length along it.
    pub axis: usize,
}

impl ConsecutivePair {
    pub fn along(first: AxisBox, axis: usize) -> Self {
        ConsecutivePair { first, second: first.shifted(axis, first.side()), axis }
    }
}

/// Consecutive pairs of side `2^-level` with corners on the `2^-stride`
/// lattice, both cubes inside `[0,1]^n`.
///
/// `stride == level` gives the dyadic grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PairLattice {
    pub dim: usize,
    pub level: u32,
    pub stride: u32,
}

impl PairLattice {
    pub fn new(dim: usize, level: u32, stride: u32) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::Dimension(dim));
        }
        if stride < level || stride > 30 {
            return Err(crate::error::invalid(format!(
                "stride {stride} must lie in [{level}, 30]"
            )));
        }
        Ok(PairLattice { dim, level, stride })
    }

    pub fn dyadic(dim: usize, level: u32) -> Result<Self> {
        Self::new(dim, level, level)
    }

    /// Cube side in lattice units.
    pub fn cube_steps(&self) -> u64 {
        1 << (self.stride - self.level)
    }

    /// Number of admissible corner positions per axis for a single cube.
    pub fn positions(&self) -> u64 {
        (1u64 << self.stride) - self.cube_steps() + 1
    }

    pub fn count(&self) -> u64 {
        let s = self.cube_steps();
        let total = 1u64 << self.stride;
        if total < 2 * s {
            return 0;
        }
        let along = total - 2 * s + 1;
        let across = self.positions().pow(self.dim as u32 - 1);
        self.dim as u64 * along * across
    }

    /// The pair along `axis` whose first cube has corner `p` in lattice units.
    pub fn pair_at(&self, axis: usize, p: &[u64]) -> ConsecutivePair {
        let step = dyadic_step(self.stride);
        let corner: Vec<f64> = p.iter().map(|&v| v as f64 * step).collect();
        let first = AxisBox::new(&corner, dyadic_step(self.level)).expect("positive side");
        ConsecutivePair::along(first, axis)
    }

    /// Streams every pair, axis by axis, first coordinate fastest.
    pub fn pairs(&self) -> impl Iterator<Item = ConsecutivePair> + '_ {
        let s = self.cube_steps();
        let total = 1u64 << self.stride;
        let dim = self.dim;
        (0..dim).flat_map(move |axis| {
            let extent: Vec<u64> = (0..dim)
                .map(|i| {
                    let span = if i == axis { 2 * s } else { s };
                    (total + 1).saturating_sub(span)
                })
                .collect();
            let n: u64 = extent.iter().product();
            (0..n).map(move |flat| {
                let mut p = [0u64; MAX_DIM];
                let mut rest = flat;
                for i in 0..dim {
                    p[i] = rest % extent[i];
                    rest /= extent[i];
                }
                self.pair_at(axis, &p[..dim])
            })
        })
    }
}
