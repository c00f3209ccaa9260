use proptest::prelude::*;
use smoothset::dimension::{default_window, FitFlag};
use smoothset::{box_count, fixture, generate_martingale_set, CountMode, Fixture, MartingaleSchedule, MassGrid};

/// Level-`j` cubes whose own density lies in `[lo, hi]`, by averaging cells.
fn listed_count(grid: &MassGrid, j: u32, lo: f64, hi: f64) -> u64 {
    let n = grid.side_cells();
    let m = 1usize << j;
    let b = n / m;
    let cells = grid.cells();
    let cubes = if grid.dim() == 1 { m } else { m * m };
    (0..cubes)
        .filter(|&q| {
            let (qx, qy) = (q % m, q / m);
            let mut s = 0.0;
            if grid.dim() == 1 {
                s = cells[q * b..(q + 1) * b].iter().sum::<f64>() / b as f64;
            } else {
                for y in qy * b..(qy + 1) * b {
                    for x in qx * b..(qx + 1) * b {
                        s += cells[y * n + x];
                    }
                }
                s /= (b * b) as f64;
            }
            lo <= s && s <= hi
        })
        .count() as u64
}

/// Least-squares slope computed directly.
fn slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (sx, sy): (f64, f64) = points.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (mx, my) = (sx / n, sy / n);
    let num: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let den: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    num / den
}

#[test]
fn full_set_has_no_boundary() {
    let g = fixture(Fixture::Full, 2, 8).unwrap();
    let fit = box_count(&g, (0.25, 0.75), &[1, 2, 3, 4, 5], CountMode::DensityBand).unwrap();
    assert!(fit.counts.iter().all(|&c| c == 0));
    assert_eq!(fit.slope, 0.0);
    assert!(fit.is_flagged(FitFlag::EmptyTarget));
}

#[test]
fn checkerboard_is_degenerate() {
    let g = fixture(Fixture::Checkerboard { m: 1 }, 1, 3).unwrap();
    let fit = box_count(&g, (0.25, 0.75), &[0, 1, 2, 3], CountMode::DensityBand).unwrap();
    assert_eq!(fit.counts, vec![1, 0, 0, 0]);
    assert!(fit.is_flagged(FitFlag::Degenerate));
    assert!(!fit.is_flagged(FitFlag::EmptyTarget));
}

#[test]
fn full_support_has_full_slope() {
    for dim in [1, 2] {
        let g = fixture(Fixture::Full, dim, 8).unwrap();
        let fit = box_count(&g, (0.5, 1.0), &default_window(8), CountMode::Support).unwrap();
        assert!((fit.slope - dim as f64).abs() < 1e-12);
        assert!((fit.rsq - 1.0).abs() < 1e-12);
    }
}

#[test]
fn counts_and_slope_match_listing() {
    let g = generate_martingale_set(&MartingaleSchedule::new(8, 21), 2).unwrap();
    let scales = default_window(8);
    let fit = box_count(&g, (0.25, 0.75), &scales, CountMode::DensityBand).unwrap();
    let want: Vec<u64> = scales.iter().map(|&j| listed_count(&g, j, 0.25, 0.75)).collect();
    assert_eq!(fit.counts, want);
    let points: Vec<(f64, f64)> =
        scales.iter().zip(&want).filter(|(_, &c)| c > 0).map(|(&j, &c)| (j as f64, (c as f64).log2())).collect();
    assert!((fit.slope - slope(&points)).abs() < 1e-12);
}

#[test]
fn bad_arguments() {
    let g = fixture(Fixture::Full, 1, 4).unwrap();
    assert!(box_count(&g, (0.8, 0.2), &[1], CountMode::DensityBand).is_err());
    assert!(box_count(&g, (0.2, 0.8), &[], CountMode::DensityBand).is_err());
    assert!(box_count(&g, (0.2, 0.8), &[5], CountMode::DensityBand).is_err());
    assert_eq!(default_window(16), (2..=14).collect::<Vec<_>>());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn support_counts_grow_and_slope_is_bounded(seed in any::<u64>(), dim in 1usize..=2, lo in 0.0f64..0.5, width in 0.05f64..0.5) {
        let levels = if dim == 1 { 12 } else { 7 };
        let g = generate_martingale_set(&MartingaleSchedule::new(levels, seed), dim).unwrap();
        let scales: Vec<u32> = (0..=levels).collect();
        let band = (lo, lo + width);
        let support = box_count(&g, band, &scales, CountMode::Support).unwrap();
        prop_assert!(support.counts.windows(2).all(|w| w[0] <= w[1] && w[1] <= w[0] << dim));
        prop_assert!(support.slope >= 0.0 && support.slope <= dim as f64 + 0.01);
        let band_fit = box_count(&g, band, &scales, CountMode::DensityBand).unwrap();
        for fit in [&support, &band_fit] {
            for (j, &c) in fit.counts.iter().enumerate() {
                prop_assert!(c <= 1u64 << (dim * j));
            }
        }
    }
}
