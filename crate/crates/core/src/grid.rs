//! Fractional-occupancy grids with constant-time box masses.

use crate::cube::{dyadic_step, AxisBox, DyadicCube, MAX_DIM};
use crate::error::{Error, Result};

/// Finest resolution accepted per dimension.
pub fn max_level(dim: usize) -> u32 {
    match dim {
        1 => 26,
        _ => 13,
    }
}

/// A set `A ⊂ [0,1]^n` stored as the occupied fraction of each of the
/// `2^{nK}` resolution cells.
///
/// Inside a cell the set is treated as spread uniformly, so masses of boxes
/// that cut cells are proportional to the overlap. Cell-aligned boxes are
/// answered from a summed-area table and dyadic cubes from a pyramid of
/// per-level sums.
#[derive(Clone, Debug, PartialEq)]
pub struct MassGrid {
    dim: usize,
    level: u32,
    cells: Vec<f64>,
    /// Zero-bordered cumulative sums, `(N+1)^n` entries.
    prefix: Vec<f64>,
    /// `pyramid[k]` holds masses of the level-`k` cubes in cell units, `k < K`.
    pyramid: Vec<Vec<f64>>,
}

impl MassGrid {
    /// Wraps `cells` (row-major, first coordinate fastest).
    pub fn new(dim: usize, level: u32, cells: Vec<f64>) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::Dimension(dim));
        }
        let max = max_level(dim);
        if level > max {
            return Err(Error::Resolution { dim, level, max });
        }
        let expected = 1usize << (dim as u32 * level);
        if cells.len() != expected {
            return Err(crate::error::invalid(format!(
                "expected {expected} cells, got {}",
                cells.len()
            )));
        }
        if let Some((index, &value)) =
            cells.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::MassOutOfRange { index, value });
        }
        let prefix = build_prefix(dim, level, &cells);
        let pyramid = build_pyramid(dim, level, &cells);
        Ok(MassGrid { dim, level, cells, prefix, pyramid })
    }

    /// Builds a grid from a function of the cell index.
    pub fn from_fn(dim: usize, level: u32, f: impl Fn(&[usize]) -> f64) -> Result<Self> {
        let n = 1usize << level;
        let len = 1usize << (dim as u32 * level);
        let cells = (0..len)
            .map(|i| match dim {
                1 => f(&[i]),
                _ => f(&[i % n, i / n]),
            })
            .collect();
        Self::new(dim, level, cells)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The resolution `K`.
    pub fn level(&self) -> u32 {
        self.level
    }

    /// Cells per axis, `2^K`.
    pub fn side_cells(&self) -> usize {
        1 << self.level
    }

    pub fn cells(&self) -> &[f64] {
        &self.cells
    }

    pub fn into_cells(self) -> Vec<f64> {
        self.cells
    }

    pub fn cell_volume(&self) -> f64 {
        f64::powi(dyadic_step(self.level), self.dim as i32)
    }

    /// `|A ∩ [0,1]^n|`.
    pub fn total_mass(&self) -> f64 {
        self.level_masses(0)[0] * self.cell_volume()
    }

    /// Masses of all level-`k` cubes in cell units, flat-indexed.
    ///
    /// # Panics
    ///
    /// If `k > K`.
    pub fn level_masses(&self, k: u32) -> &[f64] {
        assert!(k <= self.level, "level {k} finer than resolution {}", self.level);
        if k == self.level {
            &self.cells
        } else {
            &self.pyramid[k as usize]
        }
    }

    /// Number of cells in a level-`k` cube.
    pub fn cells_per_cube(&self, k: u32) -> f64 {
        f64::powi(2.0, (self.dim as u32 * (self.level - k)) as i32)
    }

    /// Densities of all level-`k` cubes, flat-indexed.
    pub fn level_densities(&self, k: u32) -> Vec<f64> {
        let w = self.cells_per_cube(k);
        self.level_masses(k).iter().map(|m| m / w).collect()
    }

    /// `D(Q)` for a dyadic cube.
    ///
    /// Cubes finer than the resolution take the density of their cell.
    ///
    /// # Panics
    ///
    /// If the cube lies outside `[0,1)^n` or has the wrong dimension.
    pub fn dyadic_density(&self, q: &DyadicCube) -> f64 {
        assert_eq!(q.dim(), self.dim, "dimension mismatch");
        assert!(q.in_unit(), "cube {q:?} outside the unit cube");
        if q.level() > self.level {
            let cell = q.ancestor(self.level).expect("coarser level");
            return self.cells[cell.flat_index()];
        }
        self.level_masses(q.level())[q.flat_index()] / self.cells_per_cube(q.level())
    }

    /// `|A ∩ Q|` for a dyadic cube.
    pub fn dyadic_mass(&self, q: &DyadicCube) -> f64 {
        self.dyadic_density(q) * q.volume()
    }

    /// Density of the resolution cell containing `x`; points outside the
    /// unit cube get `None`.
    #[inline]
    pub fn density_at(&self, x: &[f64]) -> Option<f64> {
        let n = self.side_cells();
        let nf = n as f64;
        let mut flat = 0usize;
        let mut stride = 1usize;
        for &v in x.iter().take(self.dim) {
            if !(0.0..=1.0).contains(&v) {
                return None;
            }
            let i = ((v * nf) as usize).min(n - 1);
            flat += i * stride;
            stride *= n;
        }
        Some(self.cells[flat])
    }

    /// `|A ∩ b|`, with `b` clipped to `[0,1]^n`.
    pub fn box_mass(&self, b: &AxisBox) -> Result<f64> {
        Ok(self.box_mass_volume(b)?.0)
    }

    /// `D(b) = |A ∩ b| / |b|` over the clipped box.
    pub fn box_density(&self, b: &AxisBox) -> Result<f64> {
        if b.dim() == self.dim {
            if let Some(q) = b.as_dyadic().filter(DyadicCube::in_unit) {
                return Ok(self.dyadic_density(&q));
            }
        }
        let (mass, vol) = self.box_mass_volume(b)?;
        if vol == 0.0 {
            return Err(Error::OutsideDomain);
        }
        Ok((mass / vol).clamp(0.0, 1.0))
    }

    fn box_mass_volume(&self, b: &AxisBox) -> Result<(f64, f64)> {
        if b.dim() != self.dim {
            return Err(Error::Dimension(b.dim()));
        }
        if !(b.side() > 0.0 && b.side().is_finite()) {
            return Err(Error::EmptyBox(b.side()));
        }
        if let Some(q) = b.as_dyadic() {
            if q.in_unit() {
                return Ok((self.dyadic_mass(&q), q.volume()));
            }
        }
        let Some((lo, hi)) = b.clip_unit() else {
            return Ok((0.0, 0.0));
        };
        let nf = self.side_cells() as f64;
        let mut clo = [0.0; MAX_DIM];
        let mut chi = [0.0; MAX_DIM];
        let mut vol = 1.0;
        for i in 0..self.dim {
            clo[i] = lo[i] * nf;
            chi[i] = hi[i] * nf;
            vol *= hi[i] - lo[i];
        }
        Ok((self.mass_cells(&clo, &chi) * self.cell_volume(), vol))
    }

    /// Mass in cell units of the box `[lo, hi)` given in cell coordinates
    /// inside `[0, 2^K]^n`.
    pub(crate) fn mass_cells(&self, lo: &[f64; MAX_DIM], hi: &[f64; MAX_DIM]) -> f64 {
        match self.dim {
            1 => self.cumulative_1d(hi[0]) - self.cumulative_1d(lo[0]),
            _ => {
                let a = self.cumulative_2d(hi[0], hi[1]);
                let b = self.cumulative_2d(lo[0], hi[1]);
                let c = self.cumulative_2d(hi[0], lo[1]);
                let d = self.cumulative_2d(lo[0], lo[1]);
                (a - b) - (c - d)
            }
        }
    }

    #[inline]
    fn cumulative_1d(&self, x: f64) -> f64 {
        let (i, fx) = split(x, self.side_cells());
        if fx == 0.0 {
            self.prefix[i]
        } else {
            self.prefix[i] + fx * self.cells[i]
        }
    }

    #[inline]
    fn cumulative_2d(&self, x: f64, y: f64) -> f64 {
        let n = self.side_cells();
        let w = n + 1;
        let (i, fx) = split(x, n);
        let (j, fy) = split(y, n);
        let p = &self.prefix;
        let p00 = p[j * w + i];
        match (fx == 0.0, fy == 0.0) {
            (true, true) => p00,
            (false, true) => p00 + fx * (p[j * w + i + 1] - p00),
            (true, false) => p00 + fy * (p[(j + 1) * w + i] - p00),
            (false, false) => {
                let p10 = p[j * w + i + 1];
                let p01 = p[(j + 1) * w + i];
                let p11 = p[(j + 1) * w + i + 1];
                p00 + fx * (p10 - p00) + fy * (p01 - p00) + fx * fy * ((p11 - p10) - (p01 - p00))
            }
        }
    }
}

/// Integer part and fraction of a cell coordinate in `[0, n]`.
#[inline]
fn split(x: f64, n: usize) -> (usize, f64) {
    let x = x.clamp(0.0, n as f64);
    let i = x.floor() as usize;
    if i >= n {
        (n, 0.0)
    } else {
        (i, x - i as f64)
    }
}

fn build_prefix(dim: usize, level: u32, cells: &[f64]) -> Vec<f64> {
    let n = 1usize << level;
    let w = n + 1;
    match dim {
        1 => {
            let mut p = Vec::with_capacity(w);
            p.push(0.0);
            let mut acc = 0.0;
            for &c in cells {
                acc += c;
                p.push(acc);
            }
            p
        }
        _ => {
            let mut p = vec![0.0; w * w];
            for y in 0..n {
                let mut row = 0.0;
                for x in 0..n {
                    row += cells[y * n + x];
                    p[(y + 1) * w + x + 1] = p[y * w + x + 1] + row;
                }
            }
            p
        }
    }
}

fn build_pyramid(dim: usize, level: u32, cells: &[f64]) -> Vec<Vec<f64>> {
    let mut levels: Vec<Vec<f64>> = Vec::with_capacity(level as usize);
    for k in (0..level).rev() {
        let finer: &[f64] = levels.last().map_or(cells, |v| v.as_slice());
        let n = 1usize << k;
        let coarse = match dim {
            1 => (0..n).map(|i| finer[2 * i] + finer[2 * i + 1]).collect(),
            _ => {
                let m = 2 * n;
                let mut out = vec![0.0; n * n];
                for y in 0..n {
                    for x in 0..n {
                        let a = finer[2 * y * m + 2 * x] + finer[2 * y * m + 2 * x + 1];
                        let b = finer[(2 * y + 1) * m + 2 * x] + finer[(2 * y + 1) * m + 2 * x + 1];
                        out[y * n + x] = a + b;
                    }
                }
                out
            }
        };
        levels.push(coarse);
    }
    levels.reverse();
    levels
}
