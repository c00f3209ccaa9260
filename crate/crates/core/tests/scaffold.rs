use proptest::prelude::*;
use smoothset::scaffold::{
    cube_settles, estimate_eset, find_seed, nondyadic_bridge_check, verify_lemma2, CRule,
};
use smoothset::{
    build_generations, estimate_modulus, fixture, generate_martingale_set, lemma1_bound, stop_family,
    DyadicCube, Error, Fixture, IncrementRule, MartingaleSchedule, MassGrid, PairMode, ScheduleParams,
};

/// Density of a dyadic cube by summing its cells.
fn cell_density(grid: &MassGrid, q: &DyadicCube) -> f64 {
    let k = grid.level();
    let n = grid.side_cells();
    let b = 1usize << (k - q.level());
    let idx = q.index();
    let cells = grid.cells();
    let mut s = 0.0;
    match grid.dim() {
        1 => {
            for x in 0..b {
                s += cells[idx[0] as usize * b + x];
            }
            s / b as f64
        }
        _ => {
            for y in 0..b {
                for x in 0..b {
                    s += cells[(idx[1] as usize * b + y) * n + idx[0] as usize * b + x];
                }
            }
            s / (b * b) as f64
        }
    }
}

/// Every dyadic subcube strictly below `parent` whose density differs from the
/// parent's by at least `eps` while none of its proper ancestors below the
/// parent does. Returns `(plus, minus)` sorted.
fn maximal_stops(grid: &MassGrid, parent: DyadicCube, eps: f64) -> (Vec<DyadicCube>, Vec<DyadicCube>) {
    let d = cell_density(grid, &parent);
    let stops = |q: &DyadicCube| (cell_density(grid, q) - d).abs() >= eps;
    let (mut plus, mut minus) = (Vec::new(), Vec::new());
    for level in parent.level() + 1..=grid.level() {
        let count = 1usize << (grid.dim() as u32 * level);
        for f in 0..count {
            let q = DyadicCube::from_flat(grid.dim(), level, f);
            if !parent.contains(&q) || !stops(&q) {
                continue;
            }
            let shadowed = (parent.level() + 1..level).any(|l| stops(&q.ancestor(l).unwrap()));
            if shadowed {
                continue;
            }
            if cell_density(grid, &q) > d {
                plus.push(q);
            } else {
                minus.push(q);
            }
        }
    }
    plus.sort();
    minus.sort();
    (plus, minus)
}

fn sorted(v: impl Iterator<Item = DyadicCube>) -> Vec<DyadicCube> {
    let mut v: Vec<_> = v.collect();
    v.sort();
    v
}

#[test]
fn checkerboard_family() {
    let g = fixture(Fixture::Checkerboard { m: 3 }, 1, 3).unwrap();
    let fam = stop_family(&g, DyadicCube::unit(1), 0.3, 0.0).unwrap();
    let (plus, minus) = maximal_stops(&g, DyadicCube::unit(1), 0.3);
    assert_eq!(plus.len(), 4);
    assert_eq!(minus.len(), 4);
    assert!(plus.iter().all(|q| cell_density(&g, q) == 1.0));
    assert!(minus.iter().all(|q| cell_density(&g, q) == 0.0));
    assert_eq!(sorted(fam.plus.iter().map(|s| s.cube)), plus);
    assert_eq!(sorted(fam.minus.iter().map(|s| s.cube)), minus);
    assert_eq!(fam.plus_volume(), 0.5);
    assert_eq!(fam.minus_volume(), 0.5);
    assert_eq!(fam.undecided_cells, 0);

    let profile = estimate_modulus(&g, &[1, 2, 3], PairMode::Dyadic).unwrap();
    let check = verify_lemma2(&fam, &profile);
    assert_eq!(check.omega, 1.0);
    assert!(check.pass(), "{check:?}");
    assert_eq!(check.required, 0.25);
    assert!(!check.vacuous);
}

#[test]
fn full_set_has_empty_window() {
    let g = fixture(Fixture::Full, 2, 4).unwrap();
    for eps in [0.01, 0.3, 0.9] {
        let r = stop_family(&g, DyadicCube::unit(2), eps, 0.0);
        assert!(matches!(r, Err(Error::EpsilonWindow { .. })));
    }
}

#[test]
fn eps_below_n_omega_is_rejected() {
    let g = fixture(Fixture::Constant { d: 0.5 }, 2, 4).unwrap();
    assert!(matches!(stop_family(&g, DyadicCube::unit(2), 0.1, 0.05), Err(Error::EpsilonWindow { .. })));
    assert!(stop_family(&g, DyadicCube::unit(2), 0.11, 0.05).is_ok());
}

#[test]
fn constant_set_is_vacuous_at_resolution() {
    let sched = MartingaleSchedule::plain(IncrementRule::Constant { value: 0.0 }, 6, 1);
    let g = generate_martingale_set(&sched, 1).unwrap();
    let fam = stop_family(&g, DyadicCube::unit(1), 0.2, 0.0).unwrap();
    assert_eq!(fam.members().count(), 0);
    assert_eq!(fam.undecided_volume, 1.0);
    let profile = estimate_modulus(&g, &[1, 2, 3], PairMode::Dyadic).unwrap();
    let check = verify_lemma2(&fam, &profile);
    assert!(check.vacuous);
    assert!(check.pass());
}

#[test]
fn martingale_family_matches_exhaustive_descent() {
    let g = generate_martingale_set(&MartingaleSchedule::new(12, 7), 1).unwrap();
    let profile = estimate_modulus(&g, &(1..=12).collect::<Vec<_>>(), PairMode::Dyadic).unwrap();
    let omega = profile.envelope_at(1).unwrap();
    let fam = stop_family(&g, DyadicCube::unit(1), 0.15, omega).unwrap();
    let (plus, minus) = maximal_stops(&g, DyadicCube::unit(1), 0.15);
    assert_eq!(sorted(fam.plus.iter().map(|s| s.cube)), plus);
    assert_eq!(sorted(fam.minus.iter().map(|s| s.cube)), minus);
    let check = verify_lemma2(&fam, &profile);
    assert!(check.pass(), "{check:?}");
    assert!(fam.partition_residual().abs() < 1e-12);
}

#[test]
fn lemma1_examples() {
    assert!((lemma1_bound(f64::powi(2.0, -8), 0.25, 2).unwrap() - 1.5).abs() < 1e-12);
    assert!((lemma1_bound(1.0 / 16.0, 0.25, 1).unwrap() - 0.5).abs() < 1e-12);
    assert!(lemma1_bound(0.25, 0.25, 1).is_err());
    assert!(lemma1_bound(0.0, 0.25, 1).is_err());
    assert!(lemma1_bound(0.1, 1.0, 1).is_err());
}

#[test]
fn lemma1_monotone_in_both_arguments() {
    let c = 0.25;
    let mut last = f64::NEG_INFINITY;
    for k in 3..40 {
        let p = f64::powi(2.0, -k);
        let b = lemma1_bound(p, c, 2).unwrap();
        assert!(b > last && b < 2.0);
        last = b;
    }
    let p = 1e-4;
    let mut last = f64::NEG_INFINITY;
    for i in 1..50 {
        let c = 0.01 + i as f64 * 0.019;
        let b = lemma1_bound(p, c, 1).unwrap();
        assert!(b > last);
        last = b;
    }
}

#[test]
fn constant_set_has_no_oscillation() {
    let g = fixture(Fixture::Constant { d: 0.5 }, 1, 10).unwrap();
    let profile = estimate_modulus(&g, &(1..=10).collect::<Vec<_>>(), PairMode::lattice()).unwrap();
    let params = ScheduleParams::from_profile(0.5, &profile, 10, CRule::standard(1), 4).unwrap();
    assert_eq!(params.k0, 0);
    let s = build_generations(&g, &params, 4).unwrap();
    assert!(s.no_oscillation);
    assert_eq!(s.generations.len(), 1);
    let dim = smoothset::scaffold_box_dim(&s).unwrap();
    assert!(dim.fit.is_flagged(smoothset::dimension::FitFlag::Degenerate));
}

#[test]
fn seed_density_is_close_to_alpha() {
    let g = generate_martingale_set(&MartingaleSchedule::new(16, 7), 1).unwrap();
    let profile = estimate_modulus(&g, &(1..=16).collect::<Vec<_>>(), PairMode::lattice()).unwrap();
    let params = ScheduleParams::from_profile(0.5, &profile, 16, CRule::standard(1), 4).unwrap();
    let m = params.alpha.min(1.0 - params.alpha);
    assert!(params.envelope[params.k0 as usize] < m / 20.0);
    assert!(params.eps_seq.iter().all(|&e| e < m / 10.0));
    if params.k0 > 0 {
        let earlier = ScheduleParams::with_k0(0.5, &profile, 16, CRule::standard(1), 4, params.k0 - 1);
        assert!(matches!(earlier, Err(Error::NoStartLevel(_))));
    }
    let seed = find_seed(&g, &params).unwrap();
    assert!(seed.level > params.k0);
    assert!((cell_density(&g, &seed.cube(1)) - 0.5).abs() < params.eps(1) / 2.0);
}

/// Checks the invariants of a built scaffold from scratch.
fn audit(g: &MassGrid, s: &smoothset::Scaffold) {
    let dim = g.dim();
    for k in 1..s.generations.len() {
        let parents = &s.generations[k - 1];
        let eps = s.params.eps(k as u32);
        let mut retained = vec![0.0; parents.len()];
        for m in &s.generations[k] {
            let mc = m.cube(dim);
            let owners: Vec<usize> =
                (0..parents.len()).filter(|&i| parents[i].cube(dim).contains(&mc)).collect();
            assert_eq!(owners.len(), 1, "member must sit in exactly one parent");
            let p = parents[owners[0]].cube(dim);
            assert!(mc.level() > p.level());
            retained[owners[0]] += mc.volume();
            assert!((cell_density(g, &mc) - m.density).abs() < 1e-12);
            assert!((m.density - s.params.alpha).abs() < s.params.eps(k as u32 + 1) / 2.0);
            assert!(cube_settles(g, &mc, s.params.alpha, 6.0 * eps, p.level()));
        }
        for (i, p) in parents.iter().enumerate() {
            let q = p.cube(dim).volume();
            let frac = retained[i] / q;
            assert!(frac >= s.per_gen_c[k - 1] - 1e-12);
            assert!(frac + s.undecided[k - 1] / q >= 0.25 - 1e-12 || s.truncated);
        }
    }
    assert!(s.per_gen_c_adjusted.iter().all(|&c| c >= 0.25 - 1e-12));
}

#[test]
fn one_dimensional_scaffold() {
    let g = generate_martingale_set(&MartingaleSchedule::new(16, 7), 1).unwrap();
    let profile = estimate_modulus(&g, &(1..=16).collect::<Vec<_>>(), PairMode::lattice()).unwrap();
    let params = ScheduleParams::from_profile(0.5, &profile, 16, CRule { base: 2.0, slope: 1.0 }, 4).unwrap();
    let s = build_generations(&g, &params, 4).unwrap();
    audit(&g, &s);
    for check in &s.checks {
        assert_eq!(check.nesting_violations, 0);
        assert_eq!(check.postcondition_violations, 0);
        assert_eq!(check.sandwich_violations, 0);
    }
}

#[test]
fn default_two_dimensional_set_has_no_start_level() {
    let g = generate_martingale_set(&MartingaleSchedule::new(12, 7), 2).unwrap();
    let profile = estimate_modulus(&g, &(1..=12).collect::<Vec<_>>(), PairMode::lattice()).unwrap();
    let r = ScheduleParams::from_profile(0.5, &profile, 12, CRule::standard(2), 3);
    assert!(matches!(r, Err(Error::NoStartLevel(_))));
}

#[test]
fn eset_examples() {
    let c = fixture(Fixture::Constant { d: 0.3 }, 2, 5).unwrap();
    let e = estimate_eset(&c, 0.3, 0.0, 0).unwrap();
    assert_eq!(e.members.len(), 1024);
    assert_eq!(e.member_volume, 1.0);
    assert_eq!(e.box_counts[3], 64);

    let board = fixture(Fixture::Checkerboard { m: 2 }, 1, 3).unwrap();
    let e = estimate_eset(&board, 0.5, 0.1, 3).unwrap();
    assert!(e.members.is_empty());
    assert!(e.box_counts.iter().all(|&n| n == 0));
}

#[test]
fn eset_matches_trajectory_check() {
    let g = generate_martingale_set(&MartingaleSchedule::new(10, 3), 1).unwrap();
    let (alpha, tau, settle) = (0.5, 0.08, 4);
    let e = estimate_eset(&g, alpha, tau, settle).unwrap();
    let want: Vec<usize> = (0..1024)
        .filter(|&f| {
            let cell = DyadicCube::from_flat(1, 10, f);
            (settle..=10).all(|l| (cell_density(&g, &cell.ancestor(l).unwrap()) - alpha).abs() <= tau)
        })
        .collect();
    assert_eq!(e.members, want);
    let mut parents: Vec<usize> = want.iter().map(|f| f >> 4).collect();
    parents.dedup();
    assert_eq!(e.box_counts[6] as usize, parents.len());
}

#[test]
fn bridge_on_constant_set() {
    let g = fixture(Fixture::Constant { d: 0.7 }, 2, 10).unwrap();
    let profile = estimate_modulus(&g, &(1..=10).collect::<Vec<_>>(), PairMode::lattice()).unwrap();
    let scales: Vec<f64> = (3..=9).map(|k| f64::powi(2.0, -k)).collect();
    let rows = nondyadic_bridge_check(&g, &[0.4, 0.6], &scales, &profile).unwrap();
    assert!(rows.iter().all(|r| r.gap < 1e-9 && r.pass), "{rows:?}");
}

#[test]
fn bridge_on_martingale_set() {
    let g = generate_martingale_set(&MartingaleSchedule::new(12, 7), 1).unwrap();
    let profile = estimate_modulus(&g, &(1..=12).collect::<Vec<_>>(), PairMode::lattice()).unwrap();
    let (peak, _) = g
        .cells()
        .iter()
        .enumerate()
        .filter(|(f, _)| (400..3700).contains(f))
        .fold((0, f64::MIN), |a, (f, &v)| if v > a.1 { (f, v) } else { a });
    let x = [(peak as f64 + 0.5) / 4096.0];
    let scales: Vec<f64> = (3..=9).map(|k| f64::powi(2.0, -k)).collect();
    let rows = nondyadic_bridge_check(&g, &x, &scales, &profile).unwrap();
    assert!(rows.iter().all(|r| r.pass), "{rows:?}");
    assert!(rows.last().unwrap().gap < rows[0].gap);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn stopped_family_partitions_parent(seed in any::<u64>(), dim in 1usize..=2, pick in 0usize..64, frac in 0.05f64..0.95) {
        let levels = if dim == 1 { 12 } else { 7 };
        let g = generate_martingale_set(&MartingaleSchedule::new(levels, seed), dim).unwrap();
        let level = 1 + (pick % 2) as u32;
        let parent = DyadicCube::from_flat(dim, level, pick % (1usize << (dim as u32 * level)));
        let d = cell_density(&g, &parent);
        let hi = d.min(1.0 - d);
        let eps = frac * hi;
        let fam = stop_family(&g, parent, eps, 0.0).unwrap();
        prop_assert!(fam.partition_residual().abs() < 1e-12);
        prop_assert!(fam.volume_residual().abs() < 1e-12);
        for s in fam.members() {
            prop_assert!(parent.contains(&s.cube) && s.cube != parent);
            prop_assert!((s.density - d).abs() >= eps);
        }
        for s in &fam.plus {
            prop_assert!(s.density > d);
        }
        for s in &fam.minus {
            prop_assert!(s.density < d);
        }
    }
}
