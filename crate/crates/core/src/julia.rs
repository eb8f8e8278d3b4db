//! Julia set samples and planar geometry on their occupancy grids.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::OrbitRecord;
use crate::error::{Error, Result};
use crate::poly::Poly;
use crate::porosity::{build_planar, DyadicOccupancy, PlanarFrame};
use crate::sphere::{RationalMap, SpherePoint};

pub const BURN_IN: usize = 50;
const WALK_LEN: usize = 4096;
const ESCAPE_ITERS: usize = 1000;
/// Frame padding around a sample, as a fraction of its extent.
pub const FRAME_MARGIN: f64 = 0.125;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JuliaMethod {
    InverseIteration,
    EscapeBoundary,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JuliaSample {
    pub points: Vec<SpherePoint>,
    pub method: JuliaMethod,
    pub resolution_hint: f64,
    pub seed: u64,
}

impl JuliaSample {
    pub fn finite_points(&self) -> Vec<Complex64> {
        self.points.iter().filter_map(|p| p.as_finite()).collect()
    }
}

/// Escape radius `1 + max(1, sum |a_k / a_d|)` of a polynomial.
pub fn escape_radius(f: &RationalMap) -> Result<f64> {
    if !f.is_polynomial() {
        return Err(Error::InvalidArgument("escape radius needs a polynomial map".into()));
    }
    let p = f.numer();
    let lead = p.leading() / f.denom().coeffs()[0];
    let sum: f64 = p.coeffs().iter().map(|c| (c / f.denom().coeffs()[0] / lead).norm()).sum();
    Ok(1.0 + sum.max(1.0))
}

fn fixed_points_with_multiplier(f: &RationalMap) -> Result<Vec<(Complex64, f64)>> {
    let z = Poly::new(vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]);
    let eq = f.numer().sub(&f.denom().mul(&z)).trimmed(1e-14);
    Ok(eq.roots()?.into_iter().map(|p| (p, f.deriv(p).norm())).filter(|(_, m)| m.is_finite()).collect())
}

/// The most repelling finite fixed point, or failing that a point of a
/// repelling 2-cycle.
pub fn repelling_seed(f: &RationalMap) -> Result<Complex64> {
    let best = |cands: Vec<(Complex64, f64)>| {
        cands
            .into_iter()
            .filter(|&(_, m)| m > 1.0 + 1e-9)
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(Ordering::Equal))
            .map(|(p, _)| p)
    };
    if let Some(p) = best(fixed_points_with_multiplier(f)?) {
        return Ok(p);
    }
    let f2 = f.compose(f)?;
    best(fixed_points_with_multiplier(&f2)?).ok_or(Error::NoRepellingSeed)
}

fn step_back(f: &RationalMap, z: SpherePoint, rng: &mut ChaCha8Rng) -> Result<SpherePoint> {
    let mut pre: Vec<SpherePoint> = match z {
        SpherePoint::Finite(w) => f.preimages_c(w)?.into_iter().map(SpherePoint::Finite).collect(),
        SpherePoint::Infinity => f.preimages(z)?,
    };
    while pre.len() < f.degree() {
        pre.push(SpherePoint::Infinity);
    }
    Ok(pre[rng.gen_range(0..pre.len())])
}

/// Random backward orbit `w_0 = start`, `f(w_{k+1}) = w_k`, of `len + 1`
/// points.
pub fn backward_walk(f: &RationalMap, start: SpherePoint, len: usize, seed: u64) -> Result<Vec<SpherePoint>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(len + 1);
    out.push(start);
    for _ in 0..len {
        let next = step_back(f, *out.last().unwrap(), &mut rng)?;
        out.push(next);
    }
    Ok(out)
}

/// A point of `J` together with `n` forward iterates, read off a reversed
/// backward walk so that no forward rounding error accumulates.
pub fn julia_orbit(f: &RationalMap, n: usize, seed: u64) -> Result<OrbitRecord> {
    let start = SpherePoint::Finite(repelling_seed(f)?);
    let mut walk = backward_walk(f, start, BURN_IN + n, seed)?;
    walk.reverse();
    walk.truncate(n + 1);
    Ok(OrbitRecord::from_points(f, walk))
}

pub fn julia_points(f: &RationalMap, method: JuliaMethod, count: usize, seed: u64) -> Result<JuliaSample> {
    if count == 0 {
        return Err(Error::InvalidArgument("count must be at least 1".into()));
    }
    match method {
        JuliaMethod::InverseIteration => inverse_iteration(f, count, seed),
        JuliaMethod::EscapeBoundary => escape_boundary(f, count, seed),
    }
}

fn inverse_iteration(f: &RationalMap, count: usize, seed: u64) -> Result<JuliaSample> {
    let start = SpherePoint::Finite(repelling_seed(f)?);
    let walks = count.div_ceil(WALK_LEN);
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let seeds: Vec<u64> = (0..walks).map(|_| master.gen()).collect();
    let chunks: Vec<Vec<SpherePoint>> = seeds
        .par_iter()
        .enumerate()
        .map(|(w, &s)| {
            let len = WALK_LEN.min(count - w * WALK_LEN);
            let walk = backward_walk(f, start, BURN_IN + len, s)?;
            Ok(walk[BURN_IN + 1..].to_vec())
        })
        .collect::<Result<_>>()?;
    Ok(JuliaSample {
        points: chunks.concat(),
        method: JuliaMethod::InverseIteration,
        resolution_hint: 1e-9,
        seed,
    })
}

/// Escape time and distance estimate `|z_n| ln|z_n| / |(f^n)'|`; `None`
/// when the orbit stays bounded.
fn escape_estimate(f: &RationalMap, z: Complex64, radius: f64) -> Option<(usize, f64)> {
    let mut w = z;
    let mut dw = Complex64::new(1.0, 0.0);
    for n in 0..ESCAPE_ITERS {
        let r = w.norm();
        if r > radius {
            return Some((n, r * r.ln() / dw.norm()));
        }
        dw *= f.deriv(w);
        w = match f.eval_c(w) {
            SpherePoint::Finite(v) => v,
            SpherePoint::Infinity => return Some((n + 1, 0.0)),
        };
    }
    None
}

fn escape_boundary(f: &RationalMap, count: usize, seed: u64) -> Result<JuliaSample> {
    let radius = escape_radius(f)?;
    let g = (count / 2).next_power_of_two().clamp(64, 2048);
    let h = 2.0 * radius / g as f64;
    let center = |i: usize, j: usize| Complex64::new(-radius + (i as f64 + 0.5) * h, -radius + (j as f64 + 0.5) * h);
    let diag = h * std::f64::consts::SQRT_2;
    // (escaped, near by distance estimate) per cell, row-major in j
    let cells: Vec<(bool, bool)> = (0..g * g)
        .into_par_iter()
        .map(|k| match escape_estimate(f, center(k % g, k / g), radius) {
            Some((_, est)) => (true, est < diag),
            None => (false, false),
        })
        .collect();
    let mut pts = Vec::new();
    for j in 0..g {
        for i in 0..g {
            let (escaped, near) = cells[j * g + i];
            let boundary = if escaped {
                near
            } else {
                let nb = [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)];
                nb.iter().any(|&(di, dj)| {
                    let (a, b) = (i as i64 + di, j as i64 + dj);
                    a < 0 || b < 0 || a >= g as i64 || b >= g as i64 || cells[b as usize * g + a as usize].0
                })
            };
            if boundary {
                pts.push(SpherePoint::Finite(center(i, j)));
            }
        }
    }
    if pts.is_empty() {
        return Err(Error::InvalidArgument("escape grid found no boundary cells".into()));
    }
    if pts.len() > count {
        let stride = pts.len() as f64 / count as f64;
        pts = (0..count).map(|k| pts[(k as f64 * stride) as usize]).collect();
    }
    Ok(JuliaSample { points: pts, method: JuliaMethod::EscapeBoundary, resolution_hint: 2.0 * diag, seed })
}

/// Occupancy of the finite sample points in a square frame around them.
pub fn julia_occupancy(sample: &JuliaSample, depth: u32) -> Result<DyadicOccupancy> {
    let pts = sample.finite_points();
    if pts.is_empty() {
        return Err(Error::InvalidArgument("sample has no finite points".into()));
    }
    let frame = PlanarFrame::fit(&pts, FRAME_MARGIN);
    build_planar(&pts, frame, depth)
}

/// World-space side of a cell at `level`.
pub fn cell_size(occ: &DyadicOccupancy, level: u32) -> f64 {
    occ.frame.scale * 0.5f64.powi(level as i32)
}

fn box_bounds(occ: &DyadicOccupancy, level: u32, c: &[u32]) -> (Complex64, Complex64) {
    let s = cell_size(occ, level);
    let lo = occ.frame.to_world([0.0, 0.0]) + Complex64::new(c[0] as f64 * s, c[1] as f64 * s);
    (lo, lo + Complex64::new(s, s))
}

fn dist_to_box(z: Complex64, lo: Complex64, hi: Complex64) -> f64 {
    let dx = (lo.re - z.re).max(0.0).max(z.re - hi.re);
    let dy = (lo.im - z.im).max(0.0).max(z.im - hi.im);
    dx.hypot(dy)
}

struct Entry {
    key: f64,
    level: u32,
    coords: [u32; 2],
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key
    }
}
impl Eq for Entry {}
impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on key
        other.key.total_cmp(&self.key)
    }
}

/// Distance from `z` to the nearest occupied finest-cell centre, by
/// best-first descent of the box tree.
fn nearest_center_dist(occ: &DyadicOccupancy, z: Complex64) -> f64 {
    if occ.count(0) == 0 {
        return f64::INFINITY;
    }
    let mut heap = BinaryHeap::new();
    let (lo, hi) = box_bounds(occ, 0, &[0, 0]);
    heap.push(Entry { key: dist_to_box(z, lo, hi), level: 0, coords: [0, 0] });
    while let Some(e) = heap.pop() {
        if e.level == occ.depth() {
            return e.key;
        }
        for k in 0..4u32 {
            let c = [2 * e.coords[0] + (k & 1), 2 * e.coords[1] + (k >> 1)];
            let level = e.level + 1;
            if !occ.is_occupied(level, &c) {
                continue;
            }
            let (lo, hi) = box_bounds(occ, level, &c);
            let key = if level == occ.depth() { (z - (lo + hi) / 2.0).norm() } else { dist_to_box(z, lo, hi) };
            heap.push(Entry { key, level, coords: c });
        }
    }
    f64::INFINITY
}

/// Lower bound for `dist(z, J)`: nearest occupied cell centre minus the
/// cell half-diagonal, clamped at zero.
pub fn dist_to_julia(occ: &DyadicOccupancy, z: SpherePoint) -> f64 {
    let Some(z) = z.as_finite() else {
        return f64::INFINITY;
    };
    let half_diag = cell_size(occ, occ.depth()) * std::f64::consts::FRAC_1_SQRT_2;
    (nearest_center_dist(occ, z) - half_diag).max(0.0)
}

/// Largest disc inside `B(y, half_delta)` meeting no occupied cell, with
/// centres on the cell centres of a level whose cells are at most
/// `half_delta / 16`. Returns `None` when nothing beats one cell.
pub fn complement_hole(occ: &DyadicOccupancy, y: Complex64, half_delta: f64) -> Option<(Complex64, f64)> {
    let want = (occ.frame.scale * 16.0 / half_delta).log2().ceil().max(0.0) as u32;
    let level = want.min(occ.depth());
    let s = cell_size(occ, level);
    let origin = occ.frame.to_world([0.0, 0.0]);
    let idx = |v: f64, o: f64| ((v - o) / s).floor() as i64;
    let span = |r: f64| (idx(y.re - r, origin.re), idx(y.re + r, origin.re), idx(y.im - r, origin.im), idx(y.im + r, origin.im));
    // occupied cells that can touch a disc inside B(y, half_delta)
    let (x0, x1, y0, y1) = span(half_delta);
    let top = 1i64 << level;
    let mut blocked: Vec<(Complex64, Complex64)> = Vec::new();
    for j in y0.max(0)..=y1.min(top - 1) {
        for i in x0.max(0)..=x1.min(top - 1) {
            if occ.is_occupied(level, &[i as u32, j as u32]) {
                blocked.push(box_bounds(occ, level, &[i as u32, j as u32]));
            }
        }
    }
    if blocked.is_empty() {
        return Some((y, half_delta));
    }
    let mut best: Option<(Complex64, f64)> = None;
    for j in y0..=y1 {
        for i in x0..=x1 {
            let w = origin + Complex64::new((i as f64 + 0.5) * s, (j as f64 + 0.5) * s);
            let room = half_delta - (w - y).norm();
            if room <= s {
                continue;
            }
            let clear = blocked.iter().map(|&(lo, hi)| dist_to_box(w, lo, hi)).fold(f64::INFINITY, f64::min);
            let r = room.min(clear);
            // ties go to the centre nearest y
            let better = best.map_or(true, |(bw, b)| r > b + 1e-12 || (r > b - 1e-12 && (w - y).norm() < (bw - y).norm()));
            if r > s && better {
                best = Some((w, r));
            }
        }
    }
    best
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HolderSample {
    pub z: Complex64,
    pub n: usize,
    pub dist: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HolderDiagnostic {
    pub omega_radius: f64,
    pub samples: Vec<HolderSample>,
    pub xi_hat: f64,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub violation_fraction: f64,
    pub seed: u64,
}

/// Fraction of samples with `dist >= xi^(n - 1)`.
pub fn holder_violations(samples: &[HolderSample], xi: f64) -> f64 {
    let bad = samples.iter().filter(|s| s.dist >= xi.powi(s.n as i32 - 1)).count();
    bad as f64 / samples.len() as f64
}

/// Lower-envelope quantile used for the fitted `xi`.
pub const HOLDER_QUANTILE: f64 = 0.01;

pub fn holder_diagnostic(f: &RationalMap, occ: &DyadicOccupancy, sample_count: usize, seed: u64) -> Result<HolderDiagnostic> {
    let radius = escape_radius(f)?;
    let leaves = occ.leaf_centers();
    if leaves.is_empty() {
        return Err(Error::InvalidArgument("empty Julia occupancy".into()));
    }
    let cell = cell_size(occ, occ.depth());
    let (near, far) = ((4.0 * cell).ln(), 0.5f64.ln());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<Complex64> = (0..sample_count)
        .map(|_| {
            let leaf = &leaves[rng.gen_range(0..leaves.len())];
            let base = occ.frame.to_world([leaf[0], leaf[1]]);
            let r = rng.gen_range(near..far).exp();
            base + Complex64::from_polar(r, rng.gen_range(0.0..std::f64::consts::TAU))
        })
        .collect();
    let samples: Vec<HolderSample> = raw
        .par_iter()
        .filter_map(|&z| {
            let (n, _) = escape_estimate(f, z, radius)?;
            let dist = dist_to_julia(occ, SpherePoint::Finite(z));
            (n >= 1 && dist > cell).then_some(HolderSample { z, n, dist })
        })
        .collect();
    if samples.len() < 10 {
        return Err(Error::TooFewSamples { got: samples.len(), need: 10 });
    }
    // log(1/xi) bounded by log(1/d) / (n - 1) for every sample with n >= 2
    let mut ratios: Vec<f64> = samples.iter().filter(|s| s.n >= 2).map(|s| (1.0 / s.dist).ln() / (s.n - 1) as f64).collect();
    if ratios.len() < 10 {
        return Err(Error::TooFewSamples { got: ratios.len(), need: 10 });
    }
    ratios.sort_by(f64::total_cmp);
    let q = ratios[((ratios.len() as f64 * HOLDER_QUANTILE) as usize).min(ratios.len() - 1)];
    // the strict inequality fails at the quantile sample itself, so step
    // just below it
    let xi_hat = (-q).exp() * (1.0 + 1e-12);
    let (slope, intercept, r_squared) = least_squares(
        &samples.iter().map(|s| (s.n - 1) as f64).collect::<Vec<_>>(),
        &samples.iter().map(|s| (1.0 / s.dist).ln()).collect::<Vec<_>>(),
    );
    Ok(HolderDiagnostic {
        omega_radius: radius,
        violation_fraction: holder_violations(&samples, xi_hat),
        samples,
        xi_hat,
        slope,
        intercept,
        r_squared,
        seed,
    })
}

/// Ordinary least squares `y = slope x + intercept` with `r^2`.
pub fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 {
        return (0.0, my, 0.0);
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, my - slope * mx, r2)
}
