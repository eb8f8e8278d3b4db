use proptest::prelude::*;

use super::*;
use crate::dynamics::forward_orbit;
use crate::julia::{julia_occupancy, julia_orbit, julia_points, JuliaMethod};
use crate::sphere::chordal_finite;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn chebyshev() -> RationalMap {
    RationalMap::quadratic(c(-2.0, 0.0))
}

#[test]
fn schedule_radii() {
    let sched = ShrinkingSchedule::default();
    let two_over_pi = 2.0 / std::f64::consts::PI;
    assert!(sched.product_floor <= two_over_pi && sched.product_floor > two_over_pi - 1e-5);
    assert_eq!(shrinking_radius(0.05, 0, &sched), 0.1);
    let radii = sched.radii(0.05, 500);
    for (s, w) in radii.windows(2).enumerate() {
        assert!(w[1] < w[0] && w[1] > 0.05);
        assert_eq!(w[1], shrinking_radius(0.05, s + 1, &sched));
    }
    assert!((radii[500] - 0.2 / std::f64::consts::PI).abs() < 1e-4);
}

#[test]
fn schedule_with_small_product_is_rejected() {
    assert!(ShrinkingSchedule::new(0.9, 1.1).is_err());
    assert!(ShrinkingSchedule::new(0.25, 1.0).is_err());
}

#[test]
fn square_root_branch_around_one() {
    let f = RationalMap::quadratic(c(0.0, 0.0));
    let orbit = forward_orbit(&f, SpherePoint::finite(1.0, 0.0), 1);
    let sched = ShrinkingSchedule::default();
    let frames = pull_back_disc(&f, &orbit, 1, 0.05, &sched, 128).unwrap();
    assert_eq!(frames.len(), 1);
    let fr = &frames[0];
    assert_eq!(fr.status, FrameStatus::Resolved);
    assert_eq!(fr.cumulative_criticality, 0);
    assert!(fr.crit_inside.is_empty());
    // oracle: principal square roots of the circle, whose chordal diameter is
    // brute-forced over the images of a finer circle
    let circle = crate::sphere::chordal_circle(c(1.0, 0.0), fr.radius_bs, 2048);
    let roots: Vec<C64> = circle.iter().map(|z| z.sqrt()).collect();
    for p in &fr.boundary {
        let z = p.as_finite().unwrap();
        assert!(z.re > 0.0);
        let nearest = roots.iter().map(|r| (r - z).norm()).fold(f64::INFINITY, f64::min);
        assert!(nearest < 1e-3);
    }
    let mut diam: f64 = 0.0;
    for a in roots.iter().step_by(8) {
        for b in roots.iter().step_by(8) {
            diam = diam.max(chordal_finite(*a, *b));
        }
    }
    assert!((fr.diam_ws - diam).abs() < 1e-4 * diam, "{} vs {diam}", fr.diam_ws);
}

#[test]
fn disc_about_the_fixed_critical_point() {
    let f = RationalMap::quadratic(c(0.0, 0.0));
    let orbit = forward_orbit(&f, SpherePoint::finite(0.0, 0.0), 6);
    let frames = pull_back_disc(&f, &orbit, 6, 0.05, &ShrinkingSchedule::default(), 64).unwrap();
    assert_eq!(frames.len(), 6);
    for fr in &frames {
        assert_eq!(fr.status, FrameStatus::Resolved);
        assert_eq!(fr.crit_inside.len(), 1);
        assert_eq!(fr.cumulative_criticality, 2 * fr.s as u32);
        // W_s is the disc of radius rho^{1/2^s}
        let rho = crate::sphere::chordal_circle(c(0.0, 0.0), fr.radius_bs, 1)[0].norm();
        let want = rho.powf(0.5f64.powi(fr.s as i32));
        for p in &fr.boundary {
            assert!((p.as_finite().unwrap().norm() - want).abs() < 1e-9);
        }
    }
}

#[test]
fn boundary_vertices_map_onto_the_circle() {
    let f = RationalMap::quadratic(c(0.0, 1.0));
    let orbit = julia_orbit(&f, 12, 3).unwrap();
    let sched = ShrinkingSchedule::default();
    let frames = pull_back_disc(&f, &orbit, 12, 0.05, &sched, 64).unwrap();
    let y = orbit.points[12];
    for fr in &frames {
        assert_eq!(fr.status, FrameStatus::Resolved);
        assert_eq!(fr.radius_bs, shrinking_radius(0.05, fr.s, &sched));
        for p in &fr.boundary {
            let img = (0..fr.s).fold(*p, |q, _| f.eval(q));
            let err = (chordal_dist(img, y) - fr.radius_bs).abs();
            assert!(err <= 1e-6 * fr.radius_bs, "s = {}, err = {err}", fr.s);
        }
        assert!(fr.inradius > 0.0 && fr.inradius <= fr.diam_ws);
    }
}

#[test]
fn chebyshev_good_times_are_dense() {
    let f = chebyshev();
    let orbit = julia_orbit(&f, 200, 17).unwrap();
    let rec = good_times(&f, &orbit, &GoodTimeConfig::new(0.05, 4, 200)).unwrap();
    assert_eq!(rec.criticality_at_n[0], Some(0));
    assert_eq!(rec.good_times[0], 0);
    assert!(rec.density >= 0.9, "density {}", rec.density);
    assert!(rec.lower_density <= rec.density + 1e-12 || rec.lower_density >= 0.9);
    for n in 0..=200 {
        assert_eq!(rec.good_times.contains(&n), matches!(rec.criticality_at_n[n], Some(v) if v <= 4));
    }
}

#[test]
fn fast_criticality_matches_the_full_frames() {
    // z^2 + i has a strictly preperiodic critical orbit in J, so discs near
    // the cycle meet the critical point
    let f = RationalMap::quadratic(c(0.0, 1.0));
    let orbit = julia_orbit(&f, 30, 5).unwrap();
    let sched = ShrinkingSchedule::default();
    let rec = good_times(&f, &orbit, &GoodTimeConfig::new(0.1, 6, 30)).unwrap();
    let mut critical = 0;
    for n in 1..=30 {
        let frames = pull_back_disc(&f, &orbit, n, 0.1, &sched, 64).unwrap();
        let last = frames.last().unwrap();
        if last.status == FrameStatus::Resolved && frames.len() == n {
            if let Some(v) = rec.criticality_at_n[n] {
                assert_eq!(v, last.cumulative_criticality, "n = {n}");
                critical += (v > 0) as usize;
            }
        }
    }
    assert!(critical > 0);
}

#[test]
fn good_times_are_monotone_in_d() {
    let f = RationalMap::quadratic(c(0.0, 1.0));
    let orbit = julia_orbit(&f, 80, 2).unwrap();
    let rec = good_times(&f, &orbit, &GoodTimeConfig::new(0.1, 4, 80)).unwrap();
    assert_eq!(rec.good_for(4), rec.good_times);
    for d in 0..10 {
        let a = rec.good_for(d);
        let b = rec.good_for(d + 1);
        assert!(a.iter().all(|n| b.contains(n)));
    }
}

fn toy_record(diams: &[f64]) -> GoodTimeRecord {
    let n = diams.len() - 1;
    GoodTimeRecord {
        x: SpherePoint::finite(0.0, 0.0),
        delta: 0.05,
        d: 0,
        good_times: (0..=n).collect(),
        criticality_at_n: vec![Some(0); n + 1],
        unknown: Vec::new(),
        diam_wn: diams.iter().map(|&d| Some(d)).collect(),
        inradius_wn: vec![None; n + 1],
        density: 1.0,
        lower_density: 1.0,
        orbit: vec![c(0.0, 0.0); n + 1],
        sched: ShrinkingSchedule::default(),
        boundary_samples: 64,
    }
}

#[test]
fn geometric_toy_diameters_halve() {
    let rec = toy_record(&(0..10).map(|j| 0.25f64.powi(j)).collect::<Vec<_>>());
    let steps = halving_check(&rec, 1);
    assert_eq!(steps.len(), 9);
    assert!(steps.iter().all(|s| s.ok && (s.ratio - 0.25).abs() < 1e-15));
    let steps = halving_check(&rec, 3);
    assert_eq!(steps.iter().map(|s| s.k_j).collect::<Vec<_>>(), vec![0, 3, 6]);
    assert!(halving_check(&toy_record(&[1.0]), 1).is_empty());
}

#[test]
fn chebyshev_diameters_halve_above_the_lipschitz_floor() {
    let f = chebyshev();
    let orbit = julia_orbit(&f, 60, 8).unwrap();
    let cfg = GoodTimeConfig { diam_n_max: 60, ..GoodTimeConfig::new(0.05, 4, 60) };
    let rec = good_times(&f, &orbit, &cfg).unwrap();
    let big_n = find_halving_n(&rec, 1..=20, 2).expect("some N halves");
    assert!(halving_check(&rec, big_n).iter().all(|s| s.ratio < 0.5));
    let l = lipschitz_exponent(&f, 0.05);
    assert!(lipschitz_violations(&rec, l).is_empty());
    // the spherical derivative at the fixed point 2 is |f'(2)| = 4
    assert!(sup_spherical_derivative(&f) >= 4.0);
}

#[test]
fn zero_time_hole_is_the_hole_itself() {
    let f = chebyshev();
    let orbit = julia_orbit(&f, 0, 1).unwrap();
    let cfg = GoodTimeConfig { diam_n_max: 0, ..GoodTimeConfig::new(0.1, 4, 0) };
    let rec = good_times(&f, &orbit, &cfg).unwrap();
    let sample = julia_points(&f, JuliaMethod::InverseIteration, 20_000, 1).unwrap();
    let occ = julia_occupancy(&sample, 10).unwrap();
    let holes = hole_pullback(&f, &rec, &occ, 0.1, 1).unwrap();
    assert_eq!(holes.witnesses.len(), 1);
    let w = &holes.witnesses[0];
    let x = rec.orbit[0];
    let (hc, hr) = w.hole;
    assert_eq!(w.offset, hc - x);
    let polygon_factor = (std::f64::consts::PI / 64.0).cos();
    let want = hr * 2.0 / (1.0 + x.norm_sqr());
    assert!(w.radius <= want && w.radius >= want * polygon_factor * (1.0 - 1e-12));
}

#[test]
fn chebyshev_witnesses_scale_with_the_components() {
    let f = chebyshev();
    let orbit = julia_orbit(&f, 40, 4).unwrap();
    let cfg = GoodTimeConfig { diam_n_max: 40, ..GoodTimeConfig::new(0.1, 4, 40) };
    let rec = good_times(&f, &orbit, &cfg).unwrap();
    let sample = julia_points(&f, JuliaMethod::InverseIteration, 40_000, 2).unwrap();
    let occ = julia_occupancy(&sample, 11).unwrap();
    let holes = hole_pullback(&f, &rec, &occ, 0.1, 2).unwrap();
    assert!(holes.unresolved.is_empty());
    assert_eq!(holes.witnesses.len(), selected_times(&rec, 2).len());
    for w in &holes.witnesses {
        assert!(w.dist_to_x <= w.diam_w, "k = {}", w.k);
        assert!(w.radius > 0.0 && w.radius < w.diam_w);
    }
    assert!(holes.c4_hat > 1e-3, "c4 = {}", holes.c4_hat);
}

#[test]
fn subdisc_ratio_shrinks_with_tau() {
    let f = RationalMap::quadratic(c(0.0, 1.0));
    let orbit = julia_orbit(&f, 20, 6).unwrap();
    let cfg = GoodTimeConfig { diam_n_max: 20, ..GoodTimeConfig::new(0.1, 6, 20) };
    let rec = good_times(&f, &orbit, &cfg).unwrap();
    let k = *rec.good_times.iter().rev().find(|&&n| rec.diam_wn[n].is_some()).unwrap();
    let ratios = subdisc_ratios(&f, &rec, k, &[0.5, 0.25, 0.125, 0.0625]).unwrap();
    let vals: Vec<f64> = ratios.iter().map(|r| r.1.unwrap()).collect();
    assert!(vals.windows(2).all(|w| w[1] < w[0]), "{vals:?}");
    assert!(vals[0] < 1.0);
}

#[test]
fn derivative_bound_covers_every_frame() {
    let f = RationalMap::quadratic(c(0.0, 1.0));
    let orbit = julia_orbit(&f, 25, 9).unwrap();
    let sched = ShrinkingSchedule::default();
    let fit = derivative_bound(&f, &orbit, 25, 0.05, &sched, 6, 64).unwrap();
    assert!(!fit.samples.is_empty());
    assert!(fit.c1 > 0.0 && fit.c1.is_finite() && fit.c2 >= 0.0);
    for s in &fit.samples {
        assert!(s.ratio <= fit.c1 * s.b_next.powf(-fit.c2) * (1.0 + 1e-12));
    }
}

#[test]
fn identity_blaschke_factor_in_closed_form() {
    for t in [0.5, 0.9, 0.99] {
        let u = c(t * 0.999, 0.0);
        let closed = ((1.0 + u.re) / (1.0 - u.re)).ln();
        assert!((rho(c(0.0, 0.0), u) - closed).abs() < 1e-12);
        assert!(closed <= hyperbolic_bound(1, t));
    }
    let rep = blaschke_distortion_oracle(1, 0.5, 1, 0.01, 0).unwrap();
    // only the zero at the origin: G is the disc of radius t
    assert!(rep.violations.is_empty());
    assert!((1.0 - rep.min_gap - 0.5).abs() <= 0.01 * std::f64::consts::SQRT_2);
    let want = (3.0f64).ln() - hyperbolic_bound(1, 0.5);
    assert!(rep.worst_excess <= want + 1e-12 && rep.worst_excess > want - 0.05);
}

#[test]
fn blaschke_oracle_finds_no_counterexample() {
    let rep = blaschke_distortion_oracle(5, 0.5, 300, 0.02, 7).unwrap();
    assert!(rep.violations.is_empty());
    assert!(rep.points_checked > 0 && rep.worst_excess < 0.0);
    let again = blaschke_distortion_oracle(5, 0.5, 300, 0.02, 7).unwrap();
    assert_eq!(rep.points_checked, again.points_checked);
    let reports: Vec<BlaschkeReport> =
        [0.5, 0.9, 0.99].iter().map(|&t| blaschke_distortion_oracle(4, t, 100, 0.02, 1).unwrap()).collect();
    let (c1, c2) = fit_containment(&reports).unwrap();
    for r in &reports {
        assert!(r.min_gap >= c1 * (1.0 - r.t).powf(c2) * (1.0 - 1e-12));
    }
}

#[test]
fn shifted_bound_produces_witnesses() {
    let rep = blaschke_oracle_shifted(3, 0.9, 50, 0.02, 3, 5.0).unwrap();
    assert!(!rep.violations.is_empty());
    for v in &rep.violations {
        assert!(v.min_rho > v.bound);
        assert!((v.bound - (hyperbolic_bound(v.zeros.len(), 0.9) - 5.0)).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn small_product_forces_a_small_factor(
        zeros in prop::collection::vec((0.0f64..0.95, 0.0f64..6.3), 0..5),
        u in (0.0f64..0.99, 0.0f64..6.3),
        t in 0.5f64..0.99,
    ) {
        let mut a = vec![c(0.0, 0.0)];
        a.extend(zeros.iter().map(|&(r, th)| C64::from_polar(r, th)));
        let u = C64::from_polar(u.0, u.1);
        let factors: Vec<f64> = a.iter().map(|&z| mobius(z, u).norm()).collect();
        let h: f64 = factors.iter().product();
        if h < t {
            let d = a.len() as f64;
            prop_assert!(factors.iter().any(|&m| m < t.powf(1.0 / d)));
            let best = a.iter().map(|&z| rho(z, u)).fold(f64::INFINITY, f64::min);
            prop_assert!(best <= hyperbolic_bound(a.len(), t) + 1e-12);
        }
    }

    #[test]
    fn radii_decrease_and_stay_above_delta(a in 0.01f64..0.3, p in 1.5f64..3.0, delta in 0.001f64..0.2) {
        if let Ok(sched) = ShrinkingSchedule::new(a, p) {
            let radii = sched.radii(delta, 300);
            prop_assert_eq!(radii[0], 2.0 * delta);
            for w in radii.windows(2) {
                prop_assert!(w[1] < w[0]);
                prop_assert!(w[1] > delta);
                prop_assert!(w[1] >= 2.0 * delta * sched.product_floor);
            }
        }
    }
}
