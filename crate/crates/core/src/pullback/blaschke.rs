//! Monte Carlo check of the hyperbolic-distance bound for finite Blaschke
//! products vanishing at the origin.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize)]
pub struct BlaschkeViolation {
    pub trial: usize,
    pub zeros: Vec<Complex64>,
    pub u: Complex64,
    pub min_rho: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BlaschkeReport {
    pub max_degree: usize,
    pub t: f64,
    pub trials: usize,
    pub grid_step: f64,
    pub seed: u64,
    /// Amount subtracted from the bound; nonzero only for negative controls.
    pub bound_shift: f64,
    /// Grid points with `|h(u)| < t`, over all trials.
    pub points_checked: u64,
    pub violations: Vec<BlaschkeViolation>,
    /// Largest `min_n rho(u, a_n) - bound` seen; negative when the bound
    /// holds with room to spare.
    pub worst_excess: f64,
    /// Smallest `1 - |u|` over the sublevel sets.
    pub min_gap: f64,
}

/// Disc automorphism `(u - a) / (1 - conj(a) u)`.
pub fn mobius(a: Complex64, u: Complex64) -> Complex64 {
    (u - a) / (Complex64::new(1.0, 0.0) - a.conj() * u)
}

/// Hyperbolic distance `log((1 + |T_a(u)|) / (1 - |T_a(u)|))`.
pub fn rho(a: Complex64, u: Complex64) -> f64 {
    rho_of(mobius(a, u).norm())
}

fn rho_of(m: f64) -> f64 {
    ((1.0 + m) / (1.0 - m)).ln()
}

pub fn hyperbolic_bound(degree: usize, t: f64) -> f64 {
    (2.0 * degree as f64).ln() + (1.0 / (1.0 - t)).ln()
}

fn random_zeros(rng: &mut ChaCha8Rng, degree: usize) -> Vec<Complex64> {
    let mut zeros = vec![Complex64::new(0.0, 0.0)];
    while zeros.len() < degree {
        let r = rng.gen::<f64>().sqrt();
        let theta = rng.gen::<f64>() * std::f64::consts::TAU;
        zeros.push(Complex64::from_polar(r, theta));
    }
    zeros
}

struct Trial {
    checked: u64,
    worst: f64,
    gap: f64,
    violation: Option<BlaschkeViolation>,
}

fn scan(trial: usize, zeros: Vec<Complex64>, t: f64, shift: f64, grid: &[Complex64]) -> Trial {
    let bound = hyperbolic_bound(zeros.len(), t) - shift;
    let mut out = Trial { checked: 0, worst: f64::NEG_INFINITY, gap: f64::INFINITY, violation: None };
    for &u in grid {
        let mut h = 1.0;
        let mut closest = f64::INFINITY;
        for &a in &zeros {
            let m = mobius(a, u).norm();
            h *= m;
            closest = closest.min(m);
        }
        if h >= t {
            continue;
        }
        out.checked += 1;
        out.gap = out.gap.min(1.0 - u.norm());
        // rho is increasing in |T|, so the nearest zero is the smallest factor
        let min_rho = rho_of(closest);
        out.worst = out.worst.max(min_rho - bound);
        if min_rho > bound + 1e-12 && out.violation.is_none() {
            out.violation = Some(BlaschkeViolation { trial, zeros: zeros.clone(), u, min_rho, bound });
        }
    }
    out
}

/// Samples `trials` products of degree `1..=max_degree` with one zero at the
/// origin and the others uniform in the disc, and scans `{|h| < t}` on a
/// square grid.
pub fn blaschke_distortion_oracle(
    max_degree: usize,
    t: f64,
    trials: usize,
    grid_step: f64,
    seed: u64,
) -> Result<BlaschkeReport> {
    blaschke_oracle_shifted(max_degree, t, trials, grid_step, seed, 0.0)
}

/// [`blaschke_distortion_oracle`] against `bound - bound_shift`.
pub fn blaschke_oracle_shifted(
    max_degree: usize,
    t: f64,
    trials: usize,
    grid_step: f64,
    seed: u64,
    bound_shift: f64,
) -> Result<BlaschkeReport> {
    if max_degree == 0 || trials == 0 || !(0.0..1.0).contains(&t) || !(grid_step > 0.0 && grid_step < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "need degree >= 1, trials >= 1, t in [0,1) and a grid step in (0,1); got {max_degree}, {trials}, {t}, {grid_step}"
        )));
    }
    let m = (1.0 / grid_step).floor() as i64;
    let grid: Vec<Complex64> = (-m..=m)
        .flat_map(|i| (-m..=m).map(move |j| Complex64::new(i as f64 * grid_step, j as f64 * grid_step)))
        .filter(|u| u.norm() < 1.0)
        .collect();
    let results: Vec<Trial> = (0..trials)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let degree = rng.gen_range(1..=max_degree);
            scan(k, random_zeros(&mut rng, degree), t, bound_shift, &grid)
        })
        .collect();
    let mut report = BlaschkeReport {
        max_degree,
        t,
        trials,
        grid_step,
        seed,
        bound_shift,
        points_checked: 0,
        violations: Vec::new(),
        worst_excess: f64::NEG_INFINITY,
        min_gap: f64::INFINITY,
    };
    for r in results {
        report.points_checked += r.checked;
        report.worst_excess = report.worst_excess.max(r.worst);
        report.min_gap = report.min_gap.min(r.gap);
        report.violations.extend(r.violation);
    }
    Ok(report)
}

/// Fits `1 - |u| >= C1' (1 - t)^{C2'}` over reports at several `t`: `C2'`
/// is the least-squares slope of `log gap` against `log(1 - t)` (at least
/// the slope through the data), `C1'` the largest constant that keeps every
/// report above the curve.
pub fn fit_containment(reports: &[BlaschkeReport]) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> = reports
        .iter()
        .filter(|r| r.min_gap.is_finite() && r.min_gap > 0.0)
        .map(|r| ((1.0 - r.t).ln(), r.min_gap.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let c2 = if sxx > 0.0 { (sxy / sxx).max(0.0) } else { 0.0 };
    let c1 = pts.iter().map(|&(x, y)| (y - c2 * x).exp()).fold(f64::INFINITY, f64::min);
    Some((c1, c2))
}
