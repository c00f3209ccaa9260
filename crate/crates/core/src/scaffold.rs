//! Stopping-time families and the nested Cantor scaffold they build.
//!
//! Starting from a cube whose density is close to `α`, every generation
//! descends until the density moves by `ε_k`, then descends again until it
//! crosses back over `α`. The cubes reached this way form the next
//! generation. At a finite resolution some descents never stop; the volume
//! they leave behind is carried through every bound as undecided volume.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cube::{AxisBox, DyadicCube};
use crate::error::{invalid, Error, Result};
use crate::grid::MassGrid;
use crate::modulus::ModulusProfile;
use crate::transform::lemma3::AnnulusDecomposition;

/// A stopped cube and its density.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stopped {
    pub cube: DyadicCube,
    pub density: f64,
}

/// Maximal dyadic subcubes whose density differs from the parent's by at
/// least `eps`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StoppedFamily {
    pub parent: DyadicCube,
    pub parent_density: f64,
    pub eps: f64,
    /// The modulus value the admissibility window was checked against.
    pub omega: f64,
    pub plus: Vec<Stopped>,
    pub minus: Vec<Stopped>,
    /// Resolution cells reached without stopping.
    pub undecided_cells: u64,
    pub undecided_volume: f64,
    /// `Σ (D(c) − D(parent))|c|` over undecided cells.
    pub undecided_excess: f64,
}

impl StoppedFamily {
    pub fn members(&self) -> impl Iterator<Item = &Stopped> {
        self.plus.iter().chain(&self.minus)
    }

    pub fn plus_volume(&self) -> f64 {
        self.plus.iter().map(|s| s.cube.volume()).sum()
    }

    pub fn minus_volume(&self) -> f64 {
        self.minus.iter().map(|s| s.cube.volume()).sum()
    }

    /// `Σ (D(Q_k) − D(Q))|Q_k|` plus the undecided excess; zero up to rounding.
    pub fn partition_residual(&self) -> f64 {
        let stopped: f64 =
            self.members().map(|s| (s.density - self.parent_density) * s.cube.volume()).sum();
        stopped + self.undecided_excess
    }

    /// `Σ|Q_k| + undecided − |parent|`.
    pub fn volume_residual(&self) -> f64 {
        self.plus_volume() + self.minus_volume() + self.undecided_volume - self.parent.volume()
    }
}

/// Descends breadth first from `parent`, stopping at the first cubes whose
/// density differs from the parent's by at least `eps`.
///
/// `omega` is the modulus at the parent's scale; `eps` must lie strictly
/// between `n·omega` and `min(D, 1 − D)`.
pub fn stop_family(grid: &MassGrid, parent: DyadicCube, eps: f64, omega: f64) -> Result<StoppedFamily> {
    let dim = grid.dim();
    if parent.dim() != dim {
        return Err(Error::Dimension(parent.dim()));
    }
    if !parent.in_unit() || parent.level() >= grid.level() {
        return Err(invalid(format!(
            "parent at level {} must lie in the unit cube above resolution {}",
            parent.level(),
            grid.level()
        )));
    }
    let d = grid.dyadic_density(&parent);
    let lo = dim as f64 * omega;
    let hi = d.min(1.0 - d);
    if !(eps > lo && eps < hi) {
        return Err(Error::EpsilonWindow { eps, lo, hi });
    }
    let mut family = StoppedFamily {
        parent,
        parent_density: d,
        eps,
        omega,
        plus: Vec::new(),
        minus: Vec::new(),
        undecided_cells: 0,
        undecided_volume: 0.0,
        undecided_excess: 0.0,
    };
    let k = grid.level();
    let mut frontier: Vec<DyadicCube> = parent.children().collect();
    while !frontier.is_empty() {
        let mut next = Vec::with_capacity(frontier.len() * (1 << dim));
        for q in frontier {
            let dq = grid.dyadic_density(&q);
            if dq - d >= eps {
                family.plus.push(Stopped { cube: q, density: dq });
            } else if d - dq >= eps {
                family.minus.push(Stopped { cube: q, density: dq });
            } else if q.level() == k {
                family.undecided_cells += 1;
                family.undecided_excess += (dq - d) * q.volume();
            } else {
                next.extend(q.children());
            }
        }
        frontier = next;
    }
    family.undecided_volume = family.undecided_cells as f64 * grid.cell_volume();
    Ok(family)
}

/// Outcome of checking a stopped family against the two estimates it should
/// satisfy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FamilyCheck {
    pub omega: f64,
    /// Largest `|Q_k|/|Q|`.
    pub max_volume_ratio: f64,
    /// `2^(−ε/ω)`.
    pub volume_bound: f64,
    pub volume_pass: bool,
    pub plus_volume: f64,
    pub minus_volume: f64,
    /// `|Q|/4 − undecided`.
    pub required: f64,
    pub plus_pass: bool,
    pub minus_pass: bool,
    /// Undecided volume alone is at least `|Q|/4`.
    pub vacuous: bool,
    pub partition_residual: f64,
}

impl FamilyCheck {
    pub fn pass(&self) -> bool {
        self.volume_pass && self.plus_pass && self.minus_pass
    }
}

/// Checks member volumes against `2^(−ε/ω)|Q|` and each side's total volume
/// against `|Q|/4` less the undecided volume, with `ω` the profile envelope
/// at the parent's scale.
pub fn verify_lemma2(fam: &StoppedFamily, profile: &ModulusProfile) -> FamilyCheck {
    let omega = envelope_or_finest(profile, fam.parent.level());
    let q = fam.parent.volume();
    let max_volume_ratio = fam.members().map(|s| s.cube.volume() / q).fold(0.0, f64::max);
    let volume_bound = if omega > 0.0 { f64::powf(2.0, -fam.eps / omega) } else { 0.0 };
    let required = q / 4.0 - fam.undecided_volume;
    let tol = 1e-12;
    let plus_volume = fam.plus_volume();
    let minus_volume = fam.minus_volume();
    FamilyCheck {
        omega,
        max_volume_ratio,
        volume_bound,
        volume_pass: fam.members().next().is_none() || max_volume_ratio <= volume_bound * (1.0 + tol),
        plus_volume,
        minus_volume,
        required,
        plus_pass: plus_volume >= required - tol,
        minus_pass: minus_volume >= required - tol,
        vacuous: required <= 0.0,
        partition_residual: fam.partition_residual(),
    }
}

/// Envelope at `level`, or at the finest measured scale for finer levels.
fn envelope_or_finest(profile: &ModulusProfile, level: u32) -> f64 {
    profile
        .envelope_at(level)
        .or_else(|| profile.samples.last().map(|s| s.omega))
        .unwrap_or(0.0)
}

/// `c_k = base + slope·k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CRule {
    pub base: f64,
    pub slope: f64,
}

impl CRule {
    /// `c_k = 2n + k`.
    pub fn standard(dim: usize) -> Self {
        CRule { base: 2.0 * dim as f64, slope: 1.0 }
    }

    pub fn value(&self, k: u32) -> f64 {
        self.base + self.slope * k as f64
    }
}

/// Target density, start level and thresholds of a scaffold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScheduleParams {
    pub alpha: f64,
    pub k0: u32,
    pub c_rule: CRule,
    /// `c_k` for `k = 1, 2, ...`.
    pub c_seq: Vec<f64>,
    /// `ε_k = c_k·ω(2^(−k−k0))`.
    pub eps_seq: Vec<f64>,
    /// Modulus envelope per level `0..=K`, extended past the finest sample.
    pub envelope: Vec<f64>,
}

impl ScheduleParams {
    /// Picks the smallest `k0` with `ω(2^-k0) < m/20` and `ε_k < m/10` for
    /// `k = 1..=generations + 1`, where `m = min(α, 1 − α)`.
    pub fn from_profile(
        alpha: f64,
        profile: &ModulusProfile,
        level: u32,
        rule: CRule,
        generations: u32,
    ) -> Result<Self> {
        Self::build(alpha, profile, level, rule, generations, None)
    }

    /// As [`ScheduleParams::from_profile`] with a fixed start level.
    pub fn with_k0(
        alpha: f64,
        profile: &ModulusProfile,
        level: u32,
        rule: CRule,
        generations: u32,
        k0: u32,
    ) -> Result<Self> {
        Self::build(alpha, profile, level, rule, generations, Some(k0))
    }

    fn build(
        alpha: f64,
        profile: &ModulusProfile,
        level: u32,
        rule: CRule,
        generations: u32,
        k0: Option<u32>,
    ) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(invalid(format!("alpha = {alpha} outside (0, 1)")));
        }
        if profile.samples.is_empty() {
            return Err(Error::EmptyScales);
        }
        let envelope: Vec<f64> = (0..=level).map(|l| envelope_or_finest(profile, l)).collect();
        let m = alpha.min(1.0 - alpha);
        let count = generations + 1;
        let c_seq: Vec<f64> = (1..=count).map(|k| rule.value(k)).collect();
        let eps_for = |k0: u32| -> Vec<f64> {
            (1..=count)
                .map(|k| {
                    let l = (k + k0).min(level);
                    rule.value(k) * envelope[l as usize]
                })
                .collect()
        };
        let admissible = |k0: u32| envelope[k0 as usize] < m / 20.0 && eps_for(k0).iter().all(|&e| e < m / 10.0);
        let k0 = match k0 {
            Some(k) if k >= level => return Err(Error::NoStartLevel(format!("k0 = {k} not below K = {level}"))),
            Some(k) if !admissible(k) => {
                return Err(Error::NoStartLevel(format!("k0 = {k} violates the modulus conditions")))
            }
            Some(k) => k,
            None => (0..level).find(|&k| admissible(k)).ok_or_else(|| {
                Error::NoStartLevel(format!(
                    "modulus never drops below min(α, 1−α)/20 = {} above level {level}",
                    m / 20.0
                ))
            })?,
        };
        Ok(ScheduleParams { alpha, k0, c_rule: rule, c_seq, eps_seq: eps_for(k0), envelope })
    }

    /// `ε_k` for `k ≥ 1`.
    pub fn eps(&self, k: u32) -> f64 {
        self.eps_seq[(k - 1) as usize]
    }

    pub fn c(&self, k: u32) -> f64 {
        self.c_seq[(k - 1) as usize]
    }

    fn omega(&self, level: u32) -> f64 {
        self.envelope[(level as usize).min(self.envelope.len() - 1)]
    }
}

/// A scaffold member as exported.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Member {
    pub level: u32,
    pub index: [i64; 2],
    pub density: f64,
}

impl Member {
    pub fn cube(&self, dim: usize) -> DyadicCube {
        DyadicCube::new(dim, self.level, &self.index[..dim])
    }
}

/// Violations found while building one generation from the previous one.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GenerationCheck {
    pub generation: u32,
    /// Members or intermediate stops larger than `2^(−c_k)|Q|`.
    pub volume_violations: usize,
    /// Cubes between consecutive generations with `|D − α| > 6ε_k`.
    pub sandwich_violations: usize,
    pub sandwich_cubes: usize,
    /// Largest `|D − α|/ε_k` among those cubes.
    pub max_sandwich_ratio: f64,
    /// Parents retaining less than `|Q|/4` minus undecided volume.
    pub retention_violations: usize,
    /// New members with `|D − α| ≥ ε_(k+1)/2`.
    pub postcondition_violations: usize,
    pub nesting_violations: usize,
    /// Descents skipped because `ε` fell outside its window.
    pub window_failures: usize,
}

impl GenerationCheck {
    pub fn violations(&self) -> usize {
        self.volume_violations
            + self.sandwich_violations
            + self.retention_violations
            + self.postcondition_violations
            + self.nesting_violations
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Scaffold {
    pub dim: usize,
    pub params: ScheduleParams,
    pub generations: Vec<Vec<Member>>,
    /// Largest child/parent volume ratio for each transition.
    pub per_gen_p: Vec<f64>,
    /// Smallest retained volume fraction for each transition.
    pub per_gen_c: Vec<f64>,
    /// The same with the parent's undecided volume counted as retained.
    pub per_gen_c_adjusted: Vec<f64>,
    /// `n(1 − log_P C)` from the running maximum of `P` and minimum of `C`.
    pub dim_bound: Vec<Option<f64>>,
    /// Undecided volume per transition.
    pub undecided: Vec<f64>,
    pub checks: Vec<GenerationCheck>,
    /// Zero modulus: nothing ever stops.
    pub no_oscillation: bool,
    /// Some descent ran into the resolution.
    pub truncated: bool,
}

impl Scaffold {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serialisable")
    }

    pub fn last(&self) -> &[Member] {
        self.generations.last().map_or(&[], Vec::as_slice)
    }

    /// Smallest `P` and largest `C` over all transitions, for the bound.
    pub fn measured_pc(&self) -> Option<(f64, f64)> {
        let p = self.per_gen_p.iter().copied().reduce(f64::max)?;
        let c = self.per_gen_c.iter().copied().reduce(f64::min)?;
        Some((p, c))
    }
}

/// `n(1 − ln C / ln P)` for `0 < P < C < 1`.
pub fn lemma1_bound(p: f64, c: f64, dim: usize) -> Result<f64> {
    if !(p > 0.0 && c < 1.0 && p < c) {
        return Err(invalid(format!("need 0 < P < C < 1, got P = {p}, C = {c}")));
    }
    Ok(dim as f64 * (1.0 - c.ln() / p.ln()))
}

/// First cube at levels `k0+1..=K`, breadth first and by index, whose density
/// is within `ε_1/2` of `α` (equal to `α` when `ε_1 = 0`).
pub fn find_seed(grid: &MassGrid, params: &ScheduleParams) -> Result<Member> {
    let eps = params.eps(1);
    for level in params.k0 + 1..=grid.level() {
        let dens = grid.level_densities(level);
        let hit = dens.iter().position(|&d| {
            let dev = (d - params.alpha).abs();
            if eps > 0.0 { dev < eps / 2.0 } else { dev == 0.0 }
        });
        if let Some(f) = hit {
            let q = DyadicCube::from_flat(grid.dim(), level, f);
            return Ok(member(&q, dens[f]));
        }
    }
    Err(Error::NoSeed)
}

fn member(q: &DyadicCube, density: f64) -> Member {
    let mut index = [0; 2];
    index[..q.dim()].copy_from_slice(q.index());
    Member { level: q.level(), index, density }
}

struct Descent {
    members: Vec<Member>,
    stops: Vec<DyadicCube>,
    retained: f64,
    undecided: f64,
    window_failures: usize,
    reached_resolution: bool,
}

fn descend(grid: &MassGrid, params: &ScheduleParams, parent: &DyadicCube, k: u32) -> Result<Descent> {
    let eps = params.eps(k);
    let mut out = Descent {
        members: Vec::new(),
        stops: Vec::new(),
        retained: 0.0,
        undecided: 0.0,
        window_failures: 0,
        reached_resolution: false,
    };
    if parent.level() >= grid.level() {
        out.reached_resolution = true;
        out.undecided = parent.volume();
        return Ok(out);
    }
    let outer = match stop_family(grid, *parent, eps, params.omega(parent.level())) {
        Ok(f) => f,
        Err(Error::EpsilonWindow { .. }) => {
            out.window_failures += 1;
            return Ok(out);
        }
        Err(e) => return Err(e),
    };
    out.undecided += outer.undecided_volume;
    out.reached_resolution |= outer.undecided_cells > 0;
    for r in outer.members() {
        out.stops.push(r.cube);
        if r.cube.level() >= grid.level() {
            out.reached_resolution = true;
            out.undecided += r.cube.volume();
            continue;
        }
        let gap = (r.density - params.alpha).abs();
        let inner = match stop_family(grid, r.cube, gap, params.omega(r.cube.level())) {
            Ok(f) => f,
            Err(Error::EpsilonWindow { .. }) => {
                out.window_failures += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        out.undecided += inner.undecided_volume;
        out.reached_resolution |= inner.undecided_cells > 0;
        // Head back towards α; ties go to the upper side.
        let side = if r.density > params.alpha { &inner.minus } else { &inner.plus };
        for s in side {
            out.retained += s.cube.volume();
            out.members.push(member(&s.cube, s.density));
        }
    }
    Ok(out)
}

/// Builds up to `max_gen` generations after the seed.
pub fn build_generations(grid: &MassGrid, params: &ScheduleParams, max_gen: u32) -> Result<Scaffold> {
    let dim = grid.dim();
    if params.eps_seq.len() < max_gen as usize + 1 {
        return Err(invalid(format!(
            "schedule covers {} generations, {max_gen} requested",
            params.eps_seq.len().saturating_sub(1)
        )));
    }
    let seed = find_seed(grid, params)?;
    let mut scaffold = Scaffold {
        dim,
        params: params.clone(),
        generations: vec![vec![seed]],
        per_gen_p: Vec::new(),
        per_gen_c: Vec::new(),
        per_gen_c_adjusted: Vec::new(),
        dim_bound: Vec::new(),
        undecided: Vec::new(),
        checks: Vec::new(),
        no_oscillation: params.eps(1) == 0.0,
        truncated: false,
    };
    if scaffold.no_oscillation {
        return Ok(scaffold);
    }
    for k in 1..=max_gen {
        let current = scaffold.generations.last().expect("seeded");
        let descents: Vec<Descent> = current
            .par_iter()
            .map(|m| descend(grid, params, &m.cube(dim), k))
            .collect::<Result<_>>()?;
        let mut check = GenerationCheck { generation: k, ..Default::default() };
        let mut next = Vec::new();
        let mut p: f64 = 0.0;
        let mut c = f64::INFINITY;
        let mut c_adj = f64::INFINITY;
        let mut undecided = 0.0;
        let eps = params.eps(k);
        let next_eps = params.eps(k + 1);
        let size_bound = f64::powf(2.0, -params.c(k));
        for (parent, d) in current.iter().zip(&descents) {
            let q = parent.cube(dim);
            let vq = q.volume();
            scaffold.truncated |= d.reached_resolution;
            check.window_failures += d.window_failures;
            undecided += d.undecided;
            let frac = d.retained / vq;
            c = c.min(frac);
            c_adj = c_adj.min(frac + d.undecided / vq);
            if d.retained < vq / 4.0 - d.undecided - 1e-12 {
                check.retention_violations += 1;
            }
            for s in &d.stops {
                if s.volume() > size_bound * vq * (1.0 + 1e-12) {
                    check.volume_violations += 1;
                }
            }
            let mut seen = HashSet::new();
            for m in &d.members {
                let mc = m.cube(dim);
                p = p.max(mc.volume() / vq);
                if mc.volume() > size_bound * vq * (1.0 + 1e-12) {
                    check.volume_violations += 1;
                }
                if !q.contains(&mc) {
                    check.nesting_violations += 1;
                }
                if (m.density - params.alpha).abs() >= next_eps / 2.0 {
                    check.postcondition_violations += 1;
                }
                let mut a = Some(mc);
                while let Some(cube) = a.filter(|a| a.level() >= q.level()) {
                    if !seen.insert(cube) {
                        break;
                    }
                    check.sandwich_cubes += 1;
                    let dev = (grid.dyadic_density(&cube) - params.alpha).abs();
                    check.max_sandwich_ratio = check.max_sandwich_ratio.max(dev / eps);
                    if dev > 6.0 * eps {
                        check.sandwich_violations += 1;
                    }
                    a = cube.parent();
                }
            }
            next.extend_from_slice(&d.members);
        }
        scaffold.per_gen_p.push(p);
        scaffold.per_gen_c.push(c);
        scaffold.per_gen_c_adjusted.push(c_adj);
        scaffold.undecided.push(undecided);
        scaffold.checks.push(check);
        let bound = scaffold.measured_pc().and_then(|(p, c)| lemma1_bound(p, c, dim).ok());
        scaffold.dim_bound.push(bound);
        if next.is_empty() {
            break;
        }
        scaffold.generations.push(next);
    }
    Ok(scaffold)
}

/// Resolution cells whose dyadic densities stay within `tau` of `alpha` at
/// every level from `settle` to `K`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ESetEstimate {
    pub alpha: f64,
    pub tau: f64,
    pub settle_level: u32,
    /// Flat indices of member cells.
    pub members: Vec<usize>,
    pub member_volume: f64,
    /// Level-`j` cubes containing a member, `j = 0..=K`.
    pub box_counts: Vec<u64>,
}

pub fn estimate_eset(grid: &MassGrid, alpha: f64, tau: f64, settle: u32) -> Result<ESetEstimate> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("alpha = {alpha} outside (0, 1)")));
    }
    if !(tau >= 0.0) {
        return Err(invalid(format!("tolerance {tau} must be non-negative")));
    }
    let k = grid.level();
    if settle > k {
        return Err(invalid(format!("settle level {settle} above K = {k}")));
    }
    let dim = grid.dim();
    let within = |d: f64| (d - alpha).abs() <= tau;
    let mut ok: Vec<bool> = grid.level_densities(settle).into_iter().map(within).collect();
    for level in settle + 1..=k {
        let dens = grid.level_densities(level);
        let n = 1usize << level;
        ok = (0..dens.len())
            .into_par_iter()
            .map(|f| {
                let parent = if dim == 1 { f / 2 } else { (f % n) / 2 + (n / 2) * ((f / n) / 2) };
                ok[parent] && within(dens[f])
            })
            .collect();
    }
    let members: Vec<usize> = ok.iter().enumerate().filter(|(_, &b)| b).map(|(f, _)| f).collect();
    let box_counts = occupancy_counts(dim, k, &members);
    Ok(ESetEstimate {
        alpha,
        tau,
        settle_level: settle,
        member_volume: members.len() as f64 * grid.cell_volume(),
        members,
        box_counts,
    })
}

/// Number of level-`j` cubes containing at least one of the given level-`K`
/// cells, for `j = 0..=K`.
pub(crate) fn occupancy_counts(dim: usize, level: u32, cells: &[usize]) -> Vec<u64> {
    let mut counts = vec![0u64; level as usize + 1];
    let mut current: Vec<usize> = cells.to_vec();
    for j in (0..=level).rev() {
        current.sort_unstable();
        current.dedup();
        counts[j as usize] = current.len() as u64;
        let n = 1usize << j;
        for f in current.iter_mut() {
            *f = if dim == 1 { *f / 2 } else { (*f % n) / 2 + (n / 2) * ((*f / n) / 2) };
        }
    }
    counts
}

/// Whether the densities of the ancestors of `cube` at levels
/// `from..=cube.level()` all lie within `tau` of `alpha`.
pub fn cube_settles(grid: &MassGrid, cube: &DyadicCube, alpha: f64, tau: f64, from: u32) -> bool {
    (from..=cube.level()).all(|l| {
        let a = cube.ancestor(l).expect("coarser level");
        (grid.dyadic_density(&a) - alpha).abs() <= tau
    })
}

/// `D(Q(x, h))` against the dyadic cube of the matching level.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BridgeRow {
    pub h: f64,
    /// `2^-k <= h < 2^(-k+1)`.
    pub level: u32,
    pub gap: f64,
    /// Envelope at `2^(-k+1)`.
    pub omega: f64,
    /// `c(n, h·2^k)` for the concentric step.
    pub concentric: f64,
    /// `(3n² + c)·ω`.
    pub bound: f64,
    pub pass: bool,
}

pub fn nondyadic_bridge_check(
    grid: &MassGrid,
    x: &[f64],
    scales: &[f64],
    profile: &ModulusProfile,
) -> Result<Vec<BridgeRow>> {
    let dim = grid.dim();
    if x.len() != dim {
        return Err(Error::Dimension(x.len()));
    }
    if scales.is_empty() {
        return Err(Error::EmptyScales);
    }
    let n = dim as f64;
    scales
        .iter()
        .map(|&h| {
            if !(h > 0.0 && h <= 1.0) {
                return Err(invalid(format!("scale {h} outside (0, 1]")));
            }
            let b = AxisBox::centered(x, h)?;
            if !b.inside_unit() {
                return Err(Error::RegionEscapes);
            }
            let level = (-h.log2()).ceil() as u32;
            let level = if f64::powi(2.0, -(level as i32)) > h { level + 1 } else { level };
            let level = level.min(grid.level());
            let q = DyadicCube::containing(x, level);
            let gap = (grid.box_density(&b)? - grid.dyadic_density(&q)).abs();
            let omega = envelope_or_finest(profile, level.saturating_sub(1));
            let t = (h * f64::powi(2.0, level as i32)).clamp(1.0, 2.0);
            let concentric = AnnulusDecomposition::new(t, dim)?.coefficient();
            let bound = (3.0 * n * n + concentric) * omega;
            Ok(BridgeRow { h, level, gap, omega, concentric, bound, pass: gap <= bound + 1e-12 })
        })
        .collect()
}
