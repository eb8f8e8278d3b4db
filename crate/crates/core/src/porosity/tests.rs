use proptest::prelude::*;

use super::*;

fn segment(depth: u32, y: f64) -> DyadicOccupancy {
    let n = 1usize << depth;
    let pts: Vec<[f64; 2]> = (0..n).map(|k| [k as f64 / n as f64, y]).collect();
    build_occupancy(&pts, 2, depth).unwrap()
}

fn full_square(depth: u32) -> DyadicOccupancy {
    let side = 1u32 << depth;
    DyadicOccupancy::from_cells(2, depth, (0..side).flat_map(|i| (0..side).map(move |j| vec![i, j]))).unwrap()
}

/// Left endpoints of the level-`k` middle-thirds intervals.
fn cantor_endpoints(k: u32) -> Vec<f64> {
    let mut pts = vec![0.0];
    let mut len = 1.0;
    for _ in 0..k {
        len /= 3.0;
        pts = pts.iter().flat_map(|&x| [x, x + 2.0 * len]).collect();
    }
    pts
}

#[test]
fn segment_is_mean_porous_at_every_scale() {
    let occ = segment(10, 0.0);
    let pts = sample_points(&occ, 64);
    let res = mean_porosity_scan(&occ, &pts, 0.125, 6).unwrap();
    assert!(res.feasible);
    for p in &res.per_point {
        assert_eq!(p.good_scales, (1..=6).collect::<Vec<_>>());
        assert_eq!(p.density, 1.0);
    }
    assert_eq!(res.p1_hat, 1.0);
}

#[test]
fn full_square_has_no_holes() {
    let occ = full_square(7);
    let pts = sample_points(&occ, 50);
    let res = mean_porosity_scan(&occ, &pts, 0.125, 3).unwrap();
    assert!(!res.feasible);
    assert!(res.per_point.iter().all(|p| p.good_scales.is_empty() && p.density == 0.0));
    let boxes = box_porosity_detect(&occ, &pts, 2, 5).unwrap();
    assert!(!boxes.feasible);
}

#[test]
fn cantor_dust_on_a_line_has_density_one() {
    let depth = 16;
    let xs = cantor_endpoints(10);
    let y = 0.5;
    let pts: Vec<[f64; 2]> = xs.iter().map(|&x| [x, y]).collect();
    let occ = build_occupancy(&pts, 2, depth).unwrap();
    let test: Vec<[f64; 2]> = xs.iter().step_by(17).map(|&x| [x, y]).collect();
    let res = mean_porosity_scan(&occ, &test, 1.0 / 16.0, 10).unwrap();
    // oracle: the point half a scale above z is r/2 from the line,
    // and the line holds the whole set
    for (p, z) in res.per_point.iter().zip(&test) {
        for n in 1..=10u32 {
            let r = 0.5f64.powi(n as i32);
            let above = z[1] + r / 2.0;
            assert!(above + r / 16.0 <= 1.0 && r / 2.0 > r / 16.0);
        }
        assert_eq!(p.density, 1.0, "point {z:?}");
    }
}

#[test]
fn cantor_dust_on_the_bottom_edge() {
    let depth = 14;
    let xs = cantor_endpoints(9);
    let mut cells: Vec<Vec<u32>> = Vec::new();
    let side = 1u32 << depth;
    for &x in &xs {
        cells.push(vec![(x * side as f64) as u32, 0]);
    }
    let occ = DyadicOccupancy::from_cells(2, depth, cells).unwrap();
    // direct gap enumeration: largest gap of the Cantor set within distance
    // r of x has length at least r/3 for r <= 1/3
    for &x in xs.iter().step_by(23) {
        for n in 2..=7u32 {
            let r = 0.5f64.powi(n as i32);
            let gap = xs
                .windows(2)
                .filter(|w| (w[0] - x).abs() <= r && (w[1] - x).abs() <= r + r)
                .map(|w| w[1] - w[0])
                .fold(0.0, f64::max);
            assert!(gap >= r / 9.0, "x = {x}, n = {n}, gap = {gap}");
        }
    }
    let pts: Vec<Vec<f64>> = sample_points(&occ, 40);
    let res = mean_porosity_scan(&occ, &pts, 1.0 / 16.0, 7).unwrap();
    assert!(res.feasible);
}

#[test]
fn segment_directional_at_quarter() {
    let occ = segment(11, 0.0);
    let pts = sample_points(&occ, 12);
    let res = directional_scan(&occ, &pts, 0.25, 5).unwrap();
    let beta = res.beta_hat.expect("segment passes");
    assert!(beta >= 1.0 / 32.0, "beta_hat = {beta}");
    for p in &res.per_point {
        assert_eq!(p.good_scales, (1..=5).collect::<Vec<_>>());
    }
}

#[test]
fn empty_set_directional_beta_is_half_alpha() {
    let occ = DyadicOccupancy::empty(2, 10).unwrap();
    let alpha = 0.25;
    for z in [[0.5, 0.5], [0.3, 0.61], [0.71, 0.42]] {
        for n in 1..=4 {
            assert!(directional_good(&occ, &z, n, alpha, alpha / 2.0), "z = {z:?}, n = {n}");
        }
    }
    let res = directional_scan(&occ, &[[0.5, 0.5]], alpha, 4).unwrap();
    assert_eq!(res.beta_hat, Some(alpha / 2.0));
}

#[test]
fn filled_half_square_is_mean_but_not_directionally_porous() {
    // boundary points see the empty upper half, but sub-balls centred
    // below the boundary are solid
    let depth = 8;
    let side = 1u32 << depth;
    let occ = DyadicOccupancy::from_cells(2, depth, (0..side).flat_map(|i| (0..side / 2).map(move |j| vec![i, j])))
        .unwrap();
    let z = [0.5, 0.5 - 0.25 / side as f64];
    for n in 1..=4 {
        assert!(mean_good(&occ, &z, n, 1.0 / 16.0));
        assert!(!directional_good(&occ, &z, n, 0.25, 1.0 / 64.0));
    }
}

#[test]
fn grid_aligned_segment_box_porous_with_unit_ratio() {
    let occ = segment(10, 0.0);
    let pts = sample_points(&occ, 64);
    let res = box_porosity_detect(&occ, &pts, 1, 8).unwrap();
    assert!(res.feasible);
    assert_eq!(res.p_hat, 1.0);
    assert!(res.per_point_densities.iter().all(|&d| d == 1.0));
}

#[test]
fn preconditions_are_enforced() {
    let occ = segment(8, 0.0);
    let pts = sample_points(&occ, 4);
    assert!(mean_porosity_scan(&occ, &pts, 0.125, 6).is_err());
    assert!(box_porosity_detect(&occ, &pts, 3, 6).is_err());
    assert!(directional_scan(&occ, &pts, 0.75, 3).is_err());
    assert!(matches!(
        mean_porosity_scan(&occ, &[[1.5, 0.0]], 0.125, 3),
        Err(Error::OutsideUnitBox { index: 0, .. })
    ));
}

#[test]
fn scans_are_deterministic() {
    let pts: Vec<[f64; 2]> = (0..300).map(|k| [(k as f64 * 0.618).fract(), (k as f64 * 0.377).fract()]).collect();
    let occ = build_occupancy(&pts, 2, 12).unwrap();
    let a = serde_json::to_string(&mean_porosity_scan(&occ, &pts[..40], 0.1, 6).unwrap()).unwrap();
    let b = serde_json::to_string(&mean_porosity_scan(&occ, &pts[..40], 0.1, 6).unwrap()).unwrap();
    assert_eq!(a, b);
}

fn random_occupancy() -> impl Strategy<Value = (DyadicOccupancy, Vec<Vec<f64>>)> {
    (prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..120), 0.0f64..0.45).prop_map(|(raw, squash)| {
        // squash part of the points into a thin band so both dense and
        // sparse regions occur
        let pts: Vec<Vec<f64>> = raw
            .iter()
            .enumerate()
            .map(|(k, &(x, y))| if k % 2 == 0 { vec![x, 0.5 + (y - 0.5) * squash] } else { vec![x, y] })
            .collect();
        (build_occupancy(&pts, 2, 9).unwrap(), pts)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn occupancy_is_upward_closed((occ, _) in random_occupancy()) {
        prop_assert!(occ.check_upward_closed());
        prop_assert_eq!(occ.count(0), 1);
    }

    #[test]
    fn box_goodness_is_monotone_in_n((occ, pts) in random_occupancy(), big_n in 1u32..4) {
        for z in pts.iter().take(20) {
            for n in 1..=(9 - big_n - 1) {
                if box_good(&occ, z, n, big_n) {
                    prop_assert!(box_good(&occ, z, n, big_n + 1));
                }
            }
        }
    }

    #[test]
    fn box_goodness_implies_mean_goodness((occ, pts) in random_occupancy(), big_n in 1u32..4) {
        let p2 = 0.5f64.powi(big_n as i32 + 2);
        for z in pts.iter().take(20) {
            for n in 1..=(9 - big_n) {
                if box_good(&occ, z, n, big_n) {
                    prop_assert!(mean_good(&occ, z, n, p2), "z = {:?}, n = {}", z, n);
                }
            }
        }
    }

    #[test]
    fn directional_goodness_implies_mean_goodness((occ, pts) in random_occupancy(), k in 1u32..3) {
        let alpha = 0.25;
        let beta = alpha * 0.5f64.powi(k as i32);
        for z in pts.iter().take(6) {
            for n in 1..=4 {
                if directional_good(&occ, z, n, alpha, beta) {
                    prop_assert!(mean_good(&occ, z, n, beta));
                }
            }
        }
    }

    #[test]
    fn densities_are_fractions((occ, pts) in random_occupancy()) {
        let res = mean_porosity_scan(&occ, &pts, 0.125, 5).unwrap();
        for p in &res.per_point {
            prop_assert!((0.0..=1.0).contains(&p.density));
            prop_assert!(p.good_scales.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(res.p1_hat >= p.ratio());
        }
    }
}
