//! One line per acceptance criterion. Criteria listed in `KNOWN_RED` are
//! printed as failures with their reason but do not fail the run; every
//! other criterion must pass.

use std::f64::consts::{FRAC_PI_4, FRAC_PI_6};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smoothset::scaffold::{verify_lemma2, CRule};
use smoothset::transform::dilation::{dilation_coefficient, dilation_envelope};
use smoothset::transform::*;
use smoothset::*;

const KNOWN_RED: &[(&str, &str)] = &[
    (
        "AC3",
        "no generation below the seed can form: the admissible start level is 12 of 16, and from there the \
         remaining increments sum to less than the c_1 omega deviation a stop needs",
    ),
    ("AC5", "same cause as AC3: there are no intermediate cubes to check"),
    ("AC10", "the scaffold clause needs a measured (P, C), which needs at least one generation below the seed"),
];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn martingale(dim: usize, levels: u32, seed: u64) -> MassGrid {
    generate_martingale_set(&MartingaleSchedule::new(levels, seed), dim).unwrap()
}

struct FamilyRuns {
    runs: usize,
    worst_residual: f64,
    admissible: usize,
    retention_failures: usize,
}

fn family_runs() -> FamilyRuns {
    let grids = [
        (martingale(1, 14, 101), martingale(1, 14, 102)),
        (martingale(2, 11, 201), martingale(2, 11, 202)),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut out = FamilyRuns { runs: 0, worst_residual: 0.0, admissible: 0, retention_failures: 0 };
    for (a, b) in &grids {
        for g in [a, b] {
            let dim = g.dim();
            let k = g.level();
            let profile = estimate_modulus(g, &(1..=k).collect::<Vec<_>>(), PairMode::Dyadic).unwrap();
            for _ in 0..50 {
                let level = rng.gen_range(0..4u32);
                let parent = DyadicCube::from_flat(dim, level, rng.gen_range(0..1usize << (dim as u32 * level)));
                let d = g.dyadic_density(&parent);
                let hi = d.min(1.0 - d);
                let omega = profile.envelope_at(level.max(1)).unwrap();
                let lo = dim as f64 * omega;
                let admissible = lo < hi;
                let (eps, omega) = if admissible {
                    (rng.gen_range(lo..hi).max(lo + f64::EPSILON), omega)
                } else {
                    (rng.gen_range(0.0..hi), 0.0)
                };
                let fam = stop_family(g, parent, eps, omega).unwrap();
                out.runs += 1;
                out.worst_residual = out.worst_residual.max(fam.partition_residual().abs());
                if admissible {
                    out.admissible += 1;
                    let check = verify_lemma2(&fam, &profile);
                    if !(check.plus_pass && check.minus_pass) {
                        out.retention_failures += 1;
                    }
                }
            }
        }
    }
    out
}

fn ac1() -> Outcome {
    let r = family_runs();
    outcome(
        r.runs == 200 && r.worst_residual <= 1e-9,
        format!("{} runs, largest partition residual {:.2e}", r.runs, r.worst_residual),
    )
}

fn ac2() -> Outcome {
    let r = family_runs();
    outcome(
        r.admissible > 0 && r.retention_failures == 0,
        format!("{} admissible runs, {} below |Q|/4 - undecided", r.admissible, r.retention_failures),
    )
}

fn one_dimensional_scaffold() -> (MassGrid, Scaffold) {
    let g = martingale(1, 16, 7);
    let profile = estimate_modulus(&g, &(1..=16).collect::<Vec<_>>(), PairMode::Dyadic).unwrap();
    let params = ScheduleParams::from_profile(0.5, &profile, 16, CRule::standard(1), 4).unwrap();
    let s = build_generations(&g, &params, 4).unwrap();
    (g, s)
}

fn built(s: &Scaffold) -> String {
    format!(
        "k0 = {}, generations built {} of 4, members {:?}, truncated {}",
        s.params.k0,
        s.generations.len() - 1,
        s.generations.iter().map(Vec::len).collect::<Vec<_>>(),
        s.truncated
    )
}

/// Pairs each member of generation `k` with its parent in generation `k - 1`.
fn parents(s: &Scaffold, k: usize) -> Vec<(DyadicCube, DyadicCube)> {
    let dim = s.dim;
    s.generations[k]
        .iter()
        .map(|m| {
            let c = m.cube(dim);
            let p = s.generations[k - 1].iter().map(|p| p.cube(dim)).find(|p| p.contains(&c)).expect("nested");
            (p, c)
        })
        .collect()
}

fn ac3() -> Outcome {
    let (_, s) = one_dimensional_scaffold();
    let mut members = 0;
    let mut violations = 0;
    for k in 1..s.generations.len() {
        let bound = f64::powf(2.0, -s.params.c(k as u32));
        for (p, c) in parents(&s, k) {
            members += 1;
            if c.volume() > bound * p.volume() * (1.0 + 1e-12) {
                violations += 1;
            }
        }
    }
    let reached = s.generations.len() > 4;
    assert_eq!(violations, 0, "member larger than 2^-c_k |Q|");
    outcome(reached, format!("{violations} violations over {members} members; {}", built(&s)))
}

fn ac4() -> Outcome {
    let exact = lemma1_bound(f64::powi(2.0, -8), 0.25, 2).unwrap();
    let mut monotone = true;
    let ps: Vec<f64> = (0..20).map(|i| f64::powf(2.0, -(3.0 + i as f64 * 0.5))).collect();
    let cs: Vec<f64> = (0..20).map(|i| 0.15 + i as f64 * 0.04).collect();
    for (i, &p) in ps.iter().enumerate() {
        for (j, &c) in cs.iter().enumerate() {
            let b = lemma1_bound(p, c, 2).unwrap();
            if j > 0 && b <= lemma1_bound(p, cs[j - 1], 2).unwrap() {
                monotone = false;
            }
            if i > 0 && b <= lemma1_bound(ps[i - 1], c, 2).unwrap() {
                monotone = false;
            }
        }
    }
    outcome(exact == 1.5 && monotone, format!("bound(2^-8, 1/4, 2) = {exact}, 20x20 sweep monotone: {monotone}"))
}

fn ac5() -> Outcome {
    let (g, s) = one_dimensional_scaffold();
    let alpha = s.params.alpha;
    let mut cubes = 0;
    let mut violations = 0;
    let mut worst: f64 = 0.0;
    for k in 1..s.generations.len() {
        let eps = s.params.eps(k as u32);
        for (p, c) in parents(&s, k) {
            for level in p.level()..=c.level() {
                let q = c.ancestor(level).unwrap();
                let dev = (g.dyadic_density(&q) - alpha).abs();
                cubes += 1;
                worst = worst.max(dev / eps);
                if dev > 6.0 * eps {
                    violations += 1;
                }
            }
        }
    }
    assert_eq!(violations, 0, "intermediate cube outside the 6 eps band");
    outcome(
        s.generations.len() > 4,
        format!("{violations} violations over {cubes} cubes (worst |D-a|/eps {worst:.3}); {}", built(&s)),
    )
}

fn ac6() -> Outcome {
    let mut ok = true;
    let mut worst_area: f64 = 0.0;
    let mut worst_ratio: f64 = 0.0;
    for angle in [FRAC_PI_6, 0.6, FRAC_PI_4] {
        let d = rot_decompose(angle, 8).unwrap();
        ok &= (d.c - 1.0 / (1.0 + (2.0 * angle).sin())).abs() <= 1e-12;
        let side = d.families[0][0].side;
        ok &= (side * side - d.c).abs() <= 1e-12;
        for k in 1..=8 {
            ok &= d.families[k].len() == 1 << (k + 2);
            let err = (d.family_area(k) - d.c.powi(k as i32 - 1) * (1.0 - d.c).powi(2)).abs();
            worst_area = worst_area.max(err);
            let ratio = d.residual_areas[k] / d.residual_areas[k - 1];
            worst_ratio = worst_ratio.max(ratio - d.c);
        }
        let covered: f64 = (0..=8).map(|k| d.family_area(k)).sum();
        ok &= (covered + d.residual_areas[8] - 1.0).abs() <= 1e-12;
    }
    ok &= worst_area <= 1e-6 && worst_ratio <= 1e-6;
    outcome(ok, format!("largest area error {worst_area:.1e}, largest residual ratio - C {worst_ratio:.1e}"))
}

fn ac7() -> Outcome {
    let g = martingale(2, 11, 7);
    let scales = [3, 4, 5, 6, 7];
    let profile = estimate_modulus(&g, &scales, PairMode::lattice()).unwrap();
    let mut violations = 0;
    let mut worst: f64 = 0.0;
    for lambda in [1.0, 1.5, 2.0, 3.0] {
        for axis in [0, 1] {
            for row in verify_dilation_bound(&g, lambda, axis, &scales, &profile).unwrap() {
                let coef = dilation_coefficient(lambda) * row.omega;
                let env = dilation_envelope(lambda) * row.omega;
                if row.measured > coef + 1e-12 || row.measured > env + 1e-12 || !row.pass {
                    violations += 1;
                }
                if row.omega > 0.0 {
                    worst = worst.max(row.measured / row.omega);
                }
            }
        }
    }
    outcome(violations == 0, format!("{violations} violations, largest measured/omega {worst:.3}"))
}

fn ac8() -> Outcome {
    let mut violations = 0;
    let mut rows = 0;
    let grids = [
        martingale(1, 14, 7),
        martingale(2, 11, 7),
        fixture(Fixture::Constant { d: 0.4 }, 2, 9).unwrap(),
        fixture(Fixture::Empty, 1, 12).unwrap(),
    ];
    for g in &grids {
        let scales: Vec<u32> = (3..=7).collect();
        let profile = estimate_modulus(g, &scales, PairMode::lattice()).unwrap();
        for r in lemma3a_check(g, &scales, &profile).unwrap() {
            rows += 1;
            violations += (!r.pass || !r.shift_pass) as usize;
        }
        for t in [1.0, 1.25, 1.75] {
            for r in lemma3b_check(g, t, &scales, &profile).unwrap() {
                rows += 1;
                violations += (!r.pass) as usize;
            }
        }
    }
    let half = fixture(Fixture::Halfspace { c: 0.5 }, 2, 9).unwrap();
    let scales: Vec<u32> = (1..=7).collect();
    let profile = estimate_modulus(&half, &scales, PairMode::lattice()).unwrap();
    let exact_one = profile.samples.iter().all(|s| s.omega == 1.0);
    let flagged = lemma3a_check(&half, &scales, &profile).unwrap().iter().all(|r| r.non_smooth)
        && lemma3b_check(&half, 1.25, &scales, &profile).unwrap().iter().all(|r| r.non_smooth);
    outcome(
        violations == 0 && exact_one && flagged,
        format!("{violations} violations over {rows} rows; halfspace omega = 1 everywhere: {exact_one}, flagged: {flagged}"),
    )
}

fn ac9() -> Outcome {
    let g = martingale(2, 12, 7);
    let scales = [3, 4, 5, 6, 7];
    let opts = QuadratureOptions::default();
    let shear = theorem3_checks(&g, &MapSpec::shear(0.1, 1.0), &scales, &opts).unwrap();
    let volume_zero = shear.rows.iter().all(|r| r.volume_gap <= 1e-12);
    let (first, last) = (&shear.rows[0], shear.rows.last().unwrap());
    let mass_drops = last.mass_gap + 3.0 * last.mass_stderr < first.mass_gap - 3.0 * first.mass_stderr;
    let warped = MapSpec::Composition {
        maps: vec![MapSpec::Warp { amplitude: 0.05, frequency: 1.0 }, MapSpec::Dilation { lambda: 1.3, axis: 0 }],
    };
    let report = theorem3_checks(&g, &warped, &scales, &opts).unwrap();
    let vols: Vec<f64> = report.rows.iter().map(|r| r.volume_gap).collect();
    let (vf, vl) = (&report.rows[0], report.rows.last().unwrap());
    let volume_drops = vl.volume_gap + 3.0 * vl.volume_stderr < vf.volume_gap - 3.0 * vf.volume_stderr;
    outcome(
        volume_zero && mass_drops && volume_drops,
        format!(
            "shear: volume gap 0 {volume_zero}, mass gap {:.4} -> {:.4}; warp+dilation volume gaps {:?}",
            first.mass_gap,
            last.mass_gap,
            vols.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>()
        ),
    )
}

fn ac10() -> Outcome {
    let start = Instant::now();
    let g1 = martingale(1, 16, 7);
    let s1: Vec<u32> = (4..=12).collect();
    let fit1 = box_count(&g1, (0.25, 0.75), &s1, CountMode::DensityBand).unwrap();
    let t1 = start.elapsed();
    let start = Instant::now();
    let g2 = martingale(2, 12, 7);
    let fit2 = box_count(&g2, (0.25, 0.75), &dimension::default_window(12), CountMode::DensityBand).unwrap();
    let t2 = start.elapsed();
    assert!(fit1.slope >= 0.9, "1-D slope {}", fit1.slope);
    assert!(fit2.slope >= 1.6, "2-D slope {}", fit2.slope);
    assert!(t1 < Duration::from_secs(120) && t2 < Duration::from_secs(120));

    let (_, s) = one_dimensional_scaffold();
    let dim = scaffold_box_dim(&s).unwrap();
    let scaffold_ok = match dim.lemma1 {
        Some(bound) => !dim.fit.is_flagged(dimension::FitFlag::Degenerate) && dim.fit.slope >= bound - 0.15,
        None => false,
    };
    outcome(
        scaffold_ok,
        format!(
            "slope 1-D {:.3}, 2-D {:.3}; scaffold slope {:.3} vs bound {:?} ({})",
            fit1.slope,
            fit2.slope,
            dim.fit.slope,
            dim.lemma1,
            built(&s)
        ),
    )
}

/// Mass by visiting every cell.
fn brute_mass(grid: &MassGrid, lo: &[f64], side: f64) -> f64 {
    let n = grid.side_cells();
    let h = 1.0 / n as f64;
    let w = |i: usize, a: f64| ((i as f64 * h + h).min(a + side) - (i as f64 * h).max(a)).max(0.0);
    let c = grid.cells();
    (0..n * n).map(|f| c[f] * w(f % n, lo[0]) * w(f / n, lo[1])).sum()
}

fn ac11() -> Outcome {
    let g = martingale(2, 7, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let side: f64 = rng.gen_range(1e-3..1.0);
        let corner = [rng.gen_range(0.0..1.0 - side), rng.gen_range(0.0..1.0 - side)];
        let got = g.box_mass(&AxisBox::new(&corner, side).unwrap()).unwrap();
        worst = worst.max((got - brute_mass(&g, &corner, side)).abs());
    }
    let opts = QuadratureOptions::default().with_samples(256);
    let id = pullback_set(&g, &MapSpec::Identity, 7, &opts).unwrap();
    let rms_err = (id.grid.cells().iter().zip(g.cells()).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
        / g.cells().len() as f64)
        .sqrt();
    let swap = pullback_set(&g, &MapSpec::Swap, 7, &opts).unwrap();
    let n = g.side_cells();
    let transposed = (0..n * n).all(|f| swap.grid.cells()[f] == g.cells()[(f % n) * n + f / n]);
    outcome(
        worst <= 1e-9 && rms_err <= 3.0 * id.rms_stderr + 1e-12 && transposed,
        format!(
            "prefix vs brute {worst:.1e}; identity rms error {rms_err:.2e} vs 3 rms stderr {:.2e}; swap exact {transposed}",
            3.0 * id.rms_stderr
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, Option<u64>); 11] = [
        ("AC1", ac1, Some(30)),
        ("AC2", ac2, None),
        ("AC3", ac3, None),
        ("AC4", ac4, None),
        ("AC5", ac5, Some(60)),
        ("AC6", ac6, Some(5)),
        ("AC7", ac7, None),
        ("AC8", ac8, None),
        ("AC9", ac9, None),
        ("AC10", ac10, None),
        ("AC11", ac11, None),
    ];
    let mut unexpected = Vec::new();
    for (name, run, limit) in criteria {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(run));
        let elapsed = start.elapsed();
        let mut o = result.unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        if let Some(secs) = limit {
            if elapsed > Duration::from_secs(secs) {
                o.pass = false;
                o.detail.push_str(&format!("; over the {secs} s limit"));
            }
        }
        let red = KNOWN_RED.iter().find(|(n, _)| *n == name);
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        let note = match (o.pass, red) {
            (false, Some((_, why))) => format!(" [known red: {why}]"),
            _ => String::new(),
        };
        println!("{name} {verdict} ({:.1} s) {}{note}", elapsed.as_secs_f64(), o.detail);
        if !o.pass && red.is_none() {
            unexpected.push(name);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
