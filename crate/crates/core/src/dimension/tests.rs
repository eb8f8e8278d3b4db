use num_rational::BigRational;
use num_traits::One;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::porosity::build_occupancy;

fn segment(count: usize) -> Vec<[f64; 2]> {
    (0..count).map(|i| [(i as f64 + 0.5) / count as f64, 0.3]).collect()
}

fn cantor(level: u32) -> Vec<f64> {
    let mut xs = vec![0.0];
    for i in 1..=level {
        let step = 2.0 / 3f64.powi(i as i32);
        xs = xs.iter().flat_map(|&x| [x, x + step]).collect();
    }
    xs
}

fn random_tree(d: u32, depth: u32, seed: u64) -> BoxTree {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = vec![(0, None)];
    let mut frontier = vec![0];
    for level in 1..=depth {
        let mut next = Vec::new();
        for &p in &frontier {
            for _ in 0..rng.gen_range(1..=1u32 << d) {
                next.push(entries.len());
                entries.push((level, Some(p)));
            }
        }
        frontier = next;
    }
    BoxTree::from_parents(d, &entries).unwrap()
}

#[test]
fn box_counts_of_simple_sets() {
    let point = build_occupancy(&[[0.3, 0.7]], 2, 10).unwrap();
    let line = build_occupancy(&segment(1 << 12), 2, 10).unwrap();
    let grid: Vec<[f64; 2]> = (0..64 * 64).map(|i| [((i % 64) as f64 + 0.5) / 64.0, ((i / 64) as f64 + 0.5) / 64.0]).collect();
    let square = build_occupancy(&grid, 2, 6).unwrap();
    for n in 0..=10 {
        assert_eq!(box_count(&point, n).unwrap(), 1);
        assert_eq!(box_count(&line, n).unwrap(), 1 << n);
    }
    for n in 0..=6 {
        assert_eq!(box_count(&square, n).unwrap(), 1 << (2 * n));
    }
    assert!(box_count(&square, 7).is_err());
}

#[test]
fn fits_recover_known_dimensions() {
    let line = build_occupancy(&segment(1 << 12), 2, 10).unwrap();
    assert!((minkowski_fit(&line, 2, 10).unwrap().slope - 1.0).abs() < 1e-12);

    let xs = cantor(9);
    let dust: Vec<[f64; 2]> = xs.iter().flat_map(|&x| xs.iter().map(move |&y| [x, y])).collect();
    let occ = build_occupancy(&dust, 2, 12).unwrap();
    let fit = minkowski_fit(&occ, 3, 12).unwrap();
    let dim = 2.0 * 2f64.ln() / 3f64.ln();
    assert!((fit.slope - dim).abs() < 0.08, "dust slope {}", fit.slope);

    let thin: Vec<[f64; 2]> = xs.iter().map(|&x| [x, 0.0]).collect();
    let occ = build_occupancy(&thin, 2, 12).unwrap();
    let fit = minkowski_fit(&occ, 3, 12).unwrap();
    assert!((fit.slope - dim / 2.0).abs() < 0.05, "cantor slope {}", fit.slope);

    let point = build_occupancy(&[[0.5, 0.5]], 2, 8).unwrap();
    let fit = minkowski_fit(&point, 1, 8).unwrap();
    assert_eq!(fit.slope, 0.0);
    assert!(fit.notice.is_some());
}

#[test]
fn porosity_bound_closed_forms() {
    let (alpha, md) = porosity_bound(1, 1, 1.0).unwrap();
    assert!(alpha.abs() < 1e-15 && md.abs() < 1e-15);
    let (alpha, md) = porosity_bound(2, 1, 2.0).unwrap();
    let expect = 1.0 - (1.0 - 3f64.ln() / 4f64.ln()) / 2.0;
    assert!((alpha - expect).abs() < 1e-15);
    assert!((md - 2.0 * expect).abs() < 1e-15);
    assert!(porosity_bound(1, 1, 0.5).is_err());
    assert!(porosity_bound(0, 1, 2.0).is_err());
}

proptest! {
    #[test]
    fn alpha_below_one_and_increasing_in_p(d in 1u32..4, big_n in 1u32..6, p in 1.0f64..50.0, dp in 0.0f64..10.0) {
        let (a1, _) = porosity_bound(d, big_n, p).unwrap();
        let (a2, _) = porosity_bound(d, big_n, p + dp).unwrap();
        prop_assert!((0.0..1.0).contains(&a1));
        prop_assert!(a2 >= a1);
    }

    #[test]
    fn every_walk_measure_is_a_probability(d in 1u32..3, depth in 1u32..6, big_n in 1u32..4, seed in any::<u64>()) {
        let tree = random_tree(d, depth, seed);
        let n = depth / big_n * big_n;
        for (total, masses) in tree.rams_masses(big_n, n) {
            prop_assert!(total.is_one());
            prop_assert_eq!(masses.len(), tree.count(n));
        }
    }
}

#[test]
fn tree_properties_on_standard_trees() {
    let full = BoxTree::full(1, 3).unwrap();
    let r = verify_tree_properties(&full, 1, 2.0).unwrap();
    assert!(r.holds_i && !r.holds_ii);
    assert_eq!(r.max_n_children, 2);

    let path = BoxTree::path(1, 6).unwrap();
    let r = verify_tree_properties(&path, 1, 1.0).unwrap();
    assert!(r.holds_i && r.holds_ii);

    let line = build_occupancy(&segment(1 << 12), 2, 8).unwrap();
    let tree = BoxTree::from_occupancy(&line, 8).unwrap();
    assert_eq!(tree.count(8), 256);
    let r = verify_tree_properties(&tree, 1, 1.0).unwrap();
    assert!(r.holds_i && r.holds_ii);
    let rams = rams_bound(&tree, 1, 1.0, 8).unwrap();
    assert!(rams.mass_conserved);
    assert!(rams.bound >= rams.actual);
}

#[test]
fn rams_on_a_path() {
    let path = BoxTree::path(2, 8).unwrap();
    for big_n in [1, 2, 4] {
        let r = rams_bound(&path, big_n, 2.0, 8).unwrap();
        assert_eq!(r.actual, 1);
        assert!(r.bound >= 1);
        assert_eq!(r.min_max_mass, "1");
    }
    assert!(rams_bound(&path, 3, 2.0, 8).is_err());
    // the last N levels cannot count towards (ii)
    assert!(rams_bound(&path, 2, 1.0, 8).is_err());
    assert!(matches!(rams_bound(&BoxTree::full(1, 3).unwrap(), 1, 2.0, 3), Err(Error::TreeProperties(_))));
}

#[test]
fn shape_enumeration_sizes() {
    // subtrees of depth l: s_l = sum over sizes 1..=K of multisets of s_{l-1}
    let sizes: Vec<usize> = (0..=3).map(|depth| enumerate_trees(1, depth).unwrap().len()).collect();
    assert_eq!(sizes, [1, 2, 5, 20]);
    assert_eq!(enumerate_trees(2, 2).unwrap().len(), 69);
}

#[test]
fn dp_matches_enumeration() {
    for (d, max_depth) in [(1, 4), (2, 2)] {
        for depth in 1..=max_depth {
            let trees = enumerate_trees(d, depth).unwrap();
            for p in [1.0, 1.5, 2.0, 3.0] {
                let brute = trees
                    .iter()
                    .filter(|t| {
                        let r = verify_tree_properties(t, 1, p).unwrap();
                        r.holds_i && r.holds_ii
                    })
                    .map(|t| t.count(depth) as u64)
                    .max()
                    .unwrap_or(0);
                assert_eq!(max_count_dp(d, p, depth), brute, "d {d} depth {depth} P {p}");
            }
        }
    }
}

#[test]
fn dp_growth_against_formula() {
    for n in 1..=30 {
        assert_eq!(max_count_dp(1, 1.0, n), 1);
        assert_eq!(max_count_dp(2, 1.0, n.min(12)), 3u64.pow(n.min(12)));
        let best = max_count_dp(1, 2.0, n) as f64;
        assert!(best <= 2.0 * tree_formula(1, 1, 2.0, n), "n {n}: {best}");
    }
}

#[test]
fn rams_bound_dominates_every_admissible_tree() {
    let mut checked = 0;
    for (d, depth) in [(1, 4), (2, 2)] {
        for tree in enumerate_trees(d, depth).unwrap() {
            for p in [1.5, 2.0, 4.0] {
                let Ok(r) = rams_bound(&tree, 1, p, depth) else { continue };
                assert!(r.mass_conserved);
                assert!(r.bound >= r.actual, "{}", tree.to_text());
                checked += 1;
            }
        }
    }
    assert!(checked > 50, "{checked}");
}

#[test]
fn masses_are_exact() {
    // root with two children, one of which has two children
    let tree = BoxTree::from_parents(1, &[(0, None), (1, Some(0)), (1, Some(0)), (2, Some(1)), (2, Some(1)), (2, Some(2))]).unwrap();
    let masses = tree.rams_masses(1, 2);
    let half = BigRational::new(1.into(), 2.into());
    let quarter = BigRational::new(1.into(), 4.into());
    assert_eq!(masses[0].1, vec![quarter.clone(), quarter, half]);
}

#[test]
fn text_round_trip() {
    let tree = random_tree(2, 4, 7);
    let again = BoxTree::parse(&tree.to_text(), 2).unwrap();
    assert_eq!(tree, again);
    let parsed = BoxTree::parse("# tree\n0 -1\n1 0\n1 0\n\n2 2\n", 1).unwrap();
    assert_eq!(parsed.count(1), 2);
    assert_eq!(parsed.children(2), &[3]);
    assert!(matches!(BoxTree::parse("0 -\n1 x\n", 1), Err(Error::Parse { line: 2, .. })));
    assert!(BoxTree::parse("0 -\n2 0\n", 1).is_err());
    assert!(BoxTree::parse("0 -\n1 0\n1 0\n1 0\n", 1).is_err());
}

#[test]
fn admissible_enumeration_is_the_filtered_enumeration() {
    for (d, max_depth) in [(1, 4), (2, 2)] {
        for depth in 1..=max_depth {
            let all = enumerate_trees(d, depth).unwrap();
            for p in [1.0, 1.5, 2.0, 3.0] {
                let mut want: Vec<String> = all
                    .iter()
                    .filter(|t| verify_tree_properties(t, 1, p).unwrap().holds_ii)
                    .map(|t| t.to_text())
                    .collect();
                let mut got: Vec<String> = enumerate_admissible(d, p, depth).unwrap().iter().map(|t| t.to_text()).collect();
                want.sort();
                got.sort();
                assert_eq!(got, want, "d {d} depth {depth} P {p}");
            }
        }
    }
}
