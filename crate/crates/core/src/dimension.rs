//! Box-counting dimension estimates.
//!
//! Box counting bounds Hausdorff dimension from above, so a slope close to
//! `n` is consistent with a full-dimensional set but does not prove it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::MassGrid;
use crate::scaffold::{lemma1_bound, occupancy_counts, Scaffold};

/// Which cubes count at each level.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountMode {
    /// Level-`j` cubes whose own density lies in the band.
    #[default]
    DensityBand,
    /// Level-`j` cubes containing a resolution cell whose density lies in
    /// the band.
    Support,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitFlag {
    /// Nothing was counted at any scale.
    EmptyTarget,
    /// Fewer than two scales with a positive count.
    Degenerate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BoxCountFit {
    pub scales: Vec<u32>,
    pub counts: Vec<u64>,
    /// Least-squares slope of `log2 N` against `j` over positive counts.
    pub slope: f64,
    pub intercept: f64,
    pub rsq: f64,
    pub flags: Vec<FitFlag>,
}

impl BoxCountFit {
    pub fn from_counts(scales: Vec<u32>, counts: Vec<u64>) -> Result<Self> {
        if scales.is_empty() {
            return Err(Error::EmptyScales);
        }
        if scales.len() != counts.len() {
            return Err(invalid("one count per scale required"));
        }
        let points: Vec<(f64, f64)> = scales
            .iter()
            .zip(&counts)
            .filter(|(_, &c)| c > 0)
            .map(|(&j, &c)| (j as f64, (c as f64).log2()))
            .collect();
        let mut flags = Vec::new();
        if points.is_empty() {
            flags.push(FitFlag::EmptyTarget);
        }
        if points.len() < 2 {
            flags.push(FitFlag::Degenerate);
            let intercept = points.first().map_or(0.0, |p| p.1);
            return Ok(BoxCountFit { scales, counts, slope: 0.0, intercept, rsq: 0.0, flags });
        }
        let (slope, intercept, rsq) = least_squares(&points);
        Ok(BoxCountFit { scales, counts, slope, intercept, rsq, flags })
    }

    pub fn is_flagged(&self, flag: FitFlag) -> bool {
        self.flags.contains(&flag)
    }

    /// `(j, N, log2 N)` rows.
    pub fn rows(&self) -> Vec<(u32, u64, f64)> {
        self.scales
            .iter()
            .zip(&self.counts)
            .map(|(&j, &c)| (j, c, if c > 0 { (c as f64).log2() } else { f64::NEG_INFINITY }))
            .collect()
    }
}

fn least_squares(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rsq = if syy > 0.0 { (sxy * sxy) / (sxx * syy) } else { 1.0 };
    (slope, intercept, rsq)
}

/// Levels `2..=K-2`, dropping the two coarsest and two finest.
pub fn default_window(level: u32) -> Vec<u32> {
    (2..=level.saturating_sub(2)).collect()
}

/// Counts cubes meeting the density band `[lo, hi]` at each scale and fits
/// the growth rate.
pub fn box_count(grid: &MassGrid, band: (f64, f64), scales: &[u32], mode: CountMode) -> Result<BoxCountFit> {
    let (lo, hi) = band;
    if !(0.0 <= lo && lo < hi && hi <= 1.0) {
        return Err(invalid(format!("band [{lo}, {hi}] must satisfy 0 <= lo < hi <= 1")));
    }
    if scales.is_empty() {
        return Err(Error::EmptyScales);
    }
    let k = grid.level();
    if let Some(&j) = scales.iter().find(|&&j| j > k) {
        return Err(invalid(format!("scale {j} finer than resolution {k}")));
    }
    let inside = |d: f64| lo <= d && d <= hi;
    let counts = match mode {
        CountMode::DensityBand => scales
            .par_iter()
            .map(|&j| grid.level_densities(j).into_iter().filter(|&d| inside(d)).count() as u64)
            .collect(),
        CountMode::Support => {
            let cells: Vec<usize> =
                grid.cells().iter().enumerate().filter(|(_, &d)| inside(d)).map(|(f, _)| f).collect();
            let all = occupancy_counts(grid.dim(), k, &cells);
            scales.iter().map(|&j| all[j as usize]).collect()
        }
    };
    BoxCountFit::from_counts(scales.to_vec(), counts)
}

/// Box count of the last generation of a scaffold next to the bound from its
/// measured constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScaffoldDimension {
    pub fit: BoxCountFit,
    pub lemma1: Option<f64>,
}

/// Counts level-`j` cubes meeting the union of the last generation, from the
/// seed level to the finest member level.
pub fn scaffold_box_dim(s: &Scaffold) -> Result<ScaffoldDimension> {
    let dim = s.dim;
    let last = s.last();
    let seed_level = s.generations.first().and_then(|g| g.first()).map_or(0, |m| m.level);
    let finest = last.iter().map(|m| m.level).max().unwrap_or(seed_level);
    let scales: Vec<u32> = (seed_level..=finest).collect();
    let counts = scales
        .iter()
        .map(|&j| {
            let mut coarse: u64 = 0;
            let mut ancestors: Vec<_> = Vec::new();
            for m in last {
                if m.level < j {
                    coarse += 1u64 << (dim as u32 * (j - m.level));
                } else {
                    ancestors.push(m.cube(dim).ancestor(j).expect("coarser level"));
                }
            }
            ancestors.sort_unstable();
            ancestors.dedup();
            coarse + ancestors.len() as u64
        })
        .collect();
    let mut fit = BoxCountFit::from_counts(scales, counts)?;
    if s.generations.len() < 3 && !fit.is_flagged(FitFlag::Degenerate) {
        fit.flags.push(FitFlag::Degenerate);
    }
    let lemma1 = s.measured_pc().and_then(|(p, c)| lemma1_bound(p, c, dim).ok());
    Ok(ScaffoldDimension { fit, lemma1 })
}
