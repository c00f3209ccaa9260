//! Density gaps between overlapping and concentric cubes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::window::grid_extrema;
use crate::cube::{dyadic_step, AxisBox};
use crate::error::{invalid, Error, Result};
use crate::grid::MassGrid;
use crate::modulus::{lattice_densities, ModulusProfile, ModulusSample};

/// `tQ` as `Q` plus shells `R_m = Q_m \ Q_{m-1}`, one per binary digit of `t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AnnulusDecomposition {
    pub t: f64,
    pub dim: usize,
    /// `t = 1 + Σ digits[k-1]·2^-k`.
    pub digits: Vec<u8>,
    /// Side of `Q_m` relative to `Q`, `m = 0, 1, ...`.
    pub sides: Vec<f64>,
    /// `|R_m| / |Q|` with `R_0 = Q`.
    pub shells: Vec<f64>,
}

const DIGITS: usize = 60;

impl AnnulusDecomposition {
    pub fn new(t: f64, dim: usize) -> Result<Self> {
        if !(1.0..=2.0).contains(&t) {
            return Err(invalid(format!("t = {t} outside [1, 2]")));
        }
        let mut digits = Vec::with_capacity(DIGITS);
        let mut rest = t - 1.0;
        for k in 1..=DIGITS {
            let w = f64::powi(2.0, -(k as i32));
            // t = 2 is 1.111... in binary.
            let bit = rest >= w || (t == 2.0);
            if bit {
                rest -= w;
            }
            digits.push(bit as u8);
        }
        let mut sides = vec![1.0];
        let mut shells = vec![1.0];
        for (k, &d) in digits.iter().enumerate() {
            let prev = *sides.last().expect("non-empty");
            let side = prev + d as f64 * f64::powi(2.0, -(k as i32 + 1));
            sides.push(side);
            shells.push(side.powi(dim as i32) - prev.powi(dim as i32));
        }
        Ok(AnnulusDecomposition { t, dim, digits, sides, shells })
    }

    /// `Σ_m (|R_m|/|tQ|)(n(m+1)+1)`.
    pub fn coefficient(&self) -> f64 {
        let n = self.dim as f64;
        let total = self.t.powi(self.dim as i32);
        self.shells
            .iter()
            .enumerate()
            .map(|(m, r)| r / total * (n * (m as f64 + 1.0) + 1.0))
            .sum()
    }

    /// Indices `m ≥ 1` with a non-empty shell.
    pub fn nonempty(&self) -> Vec<usize> {
        (1..self.shells.len()).filter(|&m| self.shells[m] > 0.0).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct OverlapRow {
    pub level: u32,
    pub omega: f64,
    /// Largest gap over intersecting lattice cubes.
    pub measured: f64,
    /// `3n²ω`.
    pub bound: f64,
    pub pass: bool,
    /// Largest gap over cubes shifted along one axis by less than a side.
    pub shift_measured: f64,
    /// `3nω`.
    pub shift_bound: f64,
    pub shift_pass: bool,
    pub non_smooth: bool,
}

fn sample_at(profile: &ModulusProfile, level: u32) -> Result<&ModulusSample> {
    profile
        .samples
        .iter()
        .find(|s| s.level == level)
        .ok_or_else(|| invalid(format!("profile has no scale {level}")))
}

/// Equal cubes on the profile's lattice that overlap, at each scale.
pub fn lemma3a_check(grid: &MassGrid, scales: &[u32], profile: &ModulusProfile) -> Result<Vec<OverlapRow>> {
    if scales.is_empty() {
        return Err(Error::EmptyScales);
    }
    let dim = grid.dim();
    let n = dim as f64;
    scales
        .iter()
        .map(|&level| {
            let sample = sample_at(profile, level)?;
            let omega = profile.envelope_at(level).unwrap_or(0.0);
            let (m, dens) = lattice_densities(grid, level, sample.stride);
            let r = (1usize << (sample.stride - level)) - 1;
            let spread = |axes: &[usize]| {
                let (hi, lo) = grid_extrema(&dens, m, dim, r, axes);
                dens.par_iter()
                    .zip(hi.par_iter().zip(lo.par_iter()))
                    .map(|(d, (h, l))| (h - d).max(d - l))
                    .reduce(|| 0.0, f64::max)
            };
            let all: Vec<usize> = (0..dim).collect();
            let measured = spread(&all);
            let shift_measured = (0..dim).map(|a| spread(&[a])).fold(0.0, f64::max);
            let bound = 3.0 * n * n * omega;
            let shift_bound = 3.0 * n * omega;
            Ok(OverlapRow {
                level,
                omega,
                measured,
                bound,
                pass: measured <= bound + 1e-12,
                shift_measured,
                shift_bound,
                shift_pass: shift_measured <= shift_bound + 1e-12,
                non_smooth: omega >= 1.0,
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ConcentricRow {
    pub level: u32,
    pub t: f64,
    pub cubes: usize,
    pub omega: f64,
    pub measured: f64,
    pub coefficient: f64,
    pub bound: f64,
    pub pass: bool,
    pub non_smooth: bool,
}

/// `|D(Q) − D(tQ)|` over lattice cubes `Q` whose enlargement stays inside.
pub fn lemma3b_check(
    grid: &MassGrid,
    t: f64,
    scales: &[u32],
    profile: &ModulusProfile,
) -> Result<Vec<ConcentricRow>> {
    if scales.is_empty() {
        return Err(Error::EmptyScales);
    }
    let dim = grid.dim();
    let annuli = AnnulusDecomposition::new(t, dim)?;
    let coefficient = annuli.coefficient();
    scales
        .iter()
        .map(|&level| {
            let sample = sample_at(profile, level)?;
            let omega = profile.envelope_at(level).unwrap_or(0.0);
            let (m, dens) = lattice_densities(grid, level, sample.stride);
            let step = dyadic_step(sample.stride);
            let h = dyadic_step(level);
            let gaps: Vec<Option<f64>> = (0..dens.len())
                .into_par_iter()
                .map(|f| {
                    let corner = if dim == 1 {
                        vec![f as f64 * step]
                    } else {
                        vec![(f % m) as f64 * step, (f / m) as f64 * step]
                    };
                    let q = AxisBox::new(&corner, h)?;
                    let big = q.scaled(t)?;
                    if !big.inside_unit() {
                        return Ok(None);
                    }
                    Ok(Some((grid.box_density(&big)? - dens[f]).abs()))
                })
                .collect::<Result<_>>()?;
            let valid: Vec<f64> = gaps.into_iter().flatten().collect();
            if valid.is_empty() {
                return Err(Error::RegionEscapes);
            }
            let measured = valid.iter().copied().fold(0.0, f64::max);
            let bound = coefficient * omega;
            Ok(ConcentricRow {
                level,
                t,
                cubes: valid.len(),
                omega,
                measured,
                coefficient,
                bound,
                pass: measured <= bound + 1e-12,
                non_smooth: omega >= 1.0,
            })
        })
        .collect()
}
