//! Images and preimages of a set under smooth bilipschitz maps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::maps::{verify_map, AffineMap, MapCheck, SmoothMap};
use super::quadrature::{
    region_key, region_quadrature, ClipPolicy, QuadratureOptions, QuadratureResult, Weighting,
};
use crate::cube::DyadicCube;
use crate::error::{Error, Result};
use crate::grid::{max_level, MassGrid};
use crate::modulus::Trend;

/// Pairs sampled when checking a map's declared constants.
pub const MAP_CHECK_PAIRS: usize = 10_000;

/// Maxima over consecutive dyadic pairs at one scale.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ImageRow {
    pub level: u32,
    /// Cubes whose image stays in the unit square.
    pub cubes: usize,
    pub pairs: usize,
    /// `max |(|φ(Q)| − |φ(Q')|)| / |Q|`.
    pub volume_gap: f64,
    pub volume_stderr: f64,
    /// `max |(|A∩φ(Q)| − |A∩φ(Q')|)| / |Q|`.
    pub mass_gap: f64,
    pub mass_stderr: f64,
    /// `max ||A∩φ(Q)| − |A∩T(Q)|| / |Q|` with `T` the tangent map at the centre.
    pub tangent_residual: f64,
    pub tangent_stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ImageReport {
    pub map_check: MapCheck,
    pub constant_jacobian: Option<f64>,
    pub rows: Vec<ImageRow>,
}

impl ImageReport {
    fn series(&self, f: impl Fn(&ImageRow) -> (f64, f64)) -> Trend {
        let values: Vec<(f64, f64)> = self.rows.iter().map(f).collect();
        match (values.first(), values.last()) {
            _ if values.iter().all(|v| v.0 <= 1e-12) => Trend::Vanishing,
            (Some(first), Some(last)) if values.len() >= 2 && last.0 + 3.0 * last.1 < first.0 - 3.0 * first.1 => {
                Trend::Decaying
            }
            _ => Trend::Persistent,
        }
    }

    pub fn volume_trend(&self) -> Trend {
        self.series(|r| (r.volume_gap, r.volume_stderr))
    }

    pub fn mass_trend(&self) -> Trend {
        self.series(|r| (r.mass_gap, r.mass_stderr))
    }

    pub fn tangent_trend(&self) -> Trend {
        self.series(|r| (r.tangent_residual, r.tangent_stderr))
    }

    /// Every series vanishes or decays beyond three standard errors.
    pub fn trends_hold(&self) -> bool {
        [self.volume_trend(), self.mass_trend(), self.tangent_trend()]
            .iter()
            .all(Trend::tends_to_zero)
    }
}

struct CubeImage {
    image: QuadratureResult,
    tangent: Option<QuadratureResult>,
}

/// Measures how images of dyadic cubes under `map` compare between
/// neighbours, and against the tangent map, at each scale.
pub fn theorem3_checks(
    grid: &MassGrid,
    map: &dyn SmoothMap,
    scales: &[u32],
    opts: &QuadratureOptions,
) -> Result<ImageReport> {
    if grid.dim() != 2 {
        return Err(Error::Dimension(grid.dim()));
    }
    if scales.is_empty() {
        return Err(Error::EmptyScales);
    }
    let map_check = verify_map(map, MAP_CHECK_PAIRS, opts.seed)?;
    let opts = opts.with_clip(ClipPolicy::Reject).with_weighting(Weighting::Jacobian);
    let rows = scales
        .iter()
        .map(|&level| image_row(grid, map, level, &opts))
        .collect::<Result<_>>()?;
    Ok(ImageReport { map_check, constant_jacobian: map.constant_jacobian(), rows })
}

fn escaped<T>(r: Result<T>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::RegionEscapes) => Ok(None),
        Err(e) => Err(e),
    }
}

fn image_row(grid: &MassGrid, map: &dyn SmoothMap, level: u32, opts: &QuadratureOptions) -> Result<ImageRow> {
    let n = 1usize << level;
    let images: Vec<Option<CubeImage>> = (0..n * n)
        .into_par_iter()
        .map(|f| {
            let q = DyadicCube::from_flat(2, level, f);
            let b = q.to_box();
            let key = region_key(level * 64 + level, q.index());
            let Some(image) = escaped(region_quadrature(grid, &b, map, opts, key))? else {
                return Ok(None);
            };
            let c = q.center();
            let t = AffineMap::tangent(map, [c[0], c[1]]);
            let tangent = escaped(region_quadrature(grid, &b, &t, opts, key))?;
            Ok(Some(CubeImage { image, tangent }))
        })
        .collect::<Result<_>>()?;
    let vol_q = f64::powi(2.0, -2 * level as i32);
    let volume = |r: &QuadratureResult| r.exact_volume.unwrap_or(r.volume);
    let mut row = ImageRow {
        level,
        cubes: images.iter().flatten().count(),
        pairs: 0,
        volume_gap: 0.0,
        volume_stderr: 0.0,
        mass_gap: 0.0,
        mass_stderr: 0.0,
        tangent_residual: 0.0,
        tangent_stderr: 0.0,
    };
    for (f, cube) in images.iter().enumerate() {
        let Some(a) = cube else { continue };
        if let Some(t) = &a.tangent {
            let r = (a.image.mass - t.mass).abs() / vol_q;
            if r > row.tangent_residual {
                row.tangent_residual = r;
                row.tangent_stderr = a.image.mass_stderr.hypot(t.mass_stderr) / vol_q;
            }
        }
        let (x, y) = (f % n, f / n);
        let neighbours = [(x + 1 < n).then(|| f + 1), (y + 1 < n).then(|| f + n)];
        for g in neighbours.into_iter().flatten() {
            let Some(b) = &images[g] else { continue };
            row.pairs += 1;
            let (ia, ib) = (&a.image, &b.image);
            let dv = (volume(ia) - volume(ib)).abs() / vol_q;
            if dv > row.volume_gap {
                row.volume_gap = dv;
                row.volume_stderr = match (ia.exact_volume, ib.exact_volume) {
                    (Some(_), Some(_)) => 0.0,
                    _ => ia.volume_stderr.hypot(ib.volume_stderr) / vol_q,
                };
            }
            let dm = (ia.mass - ib.mass).abs() / vol_q;
            if dm > row.mass_gap {
                row.mass_gap = dm;
                row.mass_stderr = ia.mass_stderr.hypot(ib.mass_stderr) / vol_q;
            }
        }
    }
    Ok(row)
}

/// `φ^-1(A)` on a grid of `2^level` cells per axis.
#[derive(Clone, Debug, PartialEq)]
pub struct Pullback {
    pub grid: MassGrid,
    /// Largest per-cell standard error.
    pub max_stderr: f64,
    /// Root mean square of the per-cell standard errors.
    pub rms_stderr: f64,
    /// Cells partly sent outside the unit cube.
    pub clipped_cells: usize,
}

/// Each new cell gets the fraction of it that `map` sends into the set.
///
/// Parts of a cell mapped outside the unit cube are ignored; a cell mapped
/// entirely outside gets density zero.
pub fn pullback_set(
    grid: &MassGrid,
    map: &dyn SmoothMap,
    level: u32,
    opts: &QuadratureOptions,
) -> Result<Pullback> {
    let dim = grid.dim();
    let opts = opts.with_clip(ClipPolicy::Clip).with_weighting(Weighting::Parameter);
    let max = max_level(dim);
    if level > max {
        return Err(Error::Resolution { dim, level, max });
    }
    let cells = 1usize << (level as usize * dim);
    let results: Vec<QuadratureResult> = (0..cells)
        .into_par_iter()
        .map(|f| {
            let q = DyadicCube::from_flat(dim, level, f);
            let key = region_key(level * 64 + level, q.index());
            region_quadrature(grid, &q.to_box(), map, &opts, key)
        })
        .collect::<Result<_>>()?;
    let full = f64::powi(2.0, -(level as i32) * dim as i32);
    let clipped_cells = results.iter().filter(|r| r.volume < full).count();
    let max_stderr = results.iter().map(|r| r.stderr).fold(0.0, f64::max);
    let rms_stderr = (results.iter().map(|r| r.stderr * r.stderr).sum::<f64>() / cells as f64).sqrt();
    let out = MassGrid::new(dim, level, results.iter().map(|r| r.density).collect())?;
    Ok(Pullback { grid: out, max_stderr, rms_stderr, clipped_cells })
}
