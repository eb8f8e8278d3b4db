//! Porosity scanners over dyadic occupancy grids.
//!
//! All verdicts are about the sampled set at the grid depth: a hole is a
//! Euclidean ball whose every meeting box at a fine level is unoccupied.
//! Holes must lie inside the unit cube, which is the window the grid sees.
//!
//! The mean and directional scans draw hole centres from the same lattice
//! (spacing half the hole radius, aligned to the origin) and certify them
//! with the same test, so a directional pass at `beta` is a mean pass at
//! `p2 = beta` by construction.

mod occupancy;

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use occupancy::{
    build_occupancy, build_planar, pack, unpack, BoxKey, DyadicOccupancy, PlanarFrame, MAX_DEPTH,
    MAX_DIM,
};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointPorosity {
    pub index: usize,
    pub good_scales: Vec<u32>,
    pub density: f64,
}

impl PointPorosity {
    fn new(index: usize, good_scales: Vec<u32>, n_max: u32) -> Self {
        let density = good_scales.len() as f64 / n_max as f64;
        PointPorosity { index, good_scales, density }
    }

    /// Smallest `P` with `n_j <= P j` for the good scales in order.
    pub fn ratio(&self) -> f64 {
        scale_ratio(&self.good_scales)
    }
}

fn scale_ratio(good: &[u32]) -> f64 {
    if good.is_empty() {
        return f64::INFINITY;
    }
    good.iter()
        .enumerate()
        .map(|(j, &n)| n as f64 / (j + 1) as f64)
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PorosityScanResult {
    pub per_point: Vec<PointPorosity>,
    /// Max over points of `n_j / j`; infinite when some point has no good
    /// scale.
    pub p1_hat: f64,
    pub p2: f64,
    pub n_max: u32,
    pub depth: u32,
    pub sample_count: usize,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionalResult {
    pub alpha: f64,
    /// Largest dyadic `beta` for which every point has a good scale; `None`
    /// when the resolution floor was reached first.
    pub beta_hat: Option<f64>,
    pub beta_floor: f64,
    pub p_hat: f64,
    pub per_point: Vec<PointPorosity>,
    pub resolution_limited: bool,
    pub n_max: u32,
    pub depth: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxPorosityResult {
    pub n: u32,
    pub p_hat: f64,
    pub per_point: Vec<PointPorosity>,
    pub per_point_densities: Vec<f64>,
    pub feasible: bool,
    pub n_max: u32,
    pub depth: u32,
}

/// Level whose boxes have side at most half of `radius_factor * 2^-n`.
fn probe_level(occ: &DyadicOccupancy, n: u32, radius_factor: f64) -> u32 {
    let extra = (2.0 / radius_factor).log2().ceil().max(0.0) as u32;
    (n + extra).min(occ.depth())
}

/// True when the closed ball lies in the unit cube and meets no occupied
/// box of `level`.
pub fn ball_is_empty(occ: &DyadicOccupancy, level: u32, center: &[f64], radius: f64) -> bool {
    if center.iter().any(|&c| c - radius < 0.0 || c + radius > 1.0) {
        return false;
    }
    let side = (1u64 << level) as f64;
    let top = (1i64 << level) - 1;
    let lo: Vec<i64> = center.iter().map(|&c| (((c - radius) * side).floor() as i64).max(0)).collect();
    let hi: Vec<i64> = center.iter().map(|&c| (((c + radius) * side).floor() as i64).min(top)).collect();
    let r2 = radius * radius;
    let mut hit = false;
    let mut cell = vec![0u32; center.len()];
    for_each_index(&lo, &hi, |idx| {
        // squared distance from the centre to the box
        let mut d2 = 0.0;
        for (a, &i) in idx.iter().enumerate() {
            let b0 = i as f64 / side;
            let b1 = (i + 1) as f64 / side;
            let g = if center[a] < b0 {
                b0 - center[a]
            } else if center[a] > b1 {
                center[a] - b1
            } else {
                0.0
            };
            d2 += g * g;
            cell[a] = i as u32;
        }
        if d2 <= r2 && occ.is_occupied(level, &cell) {
            hit = true;
        }
        hit
    });
    !hit
}

/// Visits every integer point of the box `lo..=hi` until `f` returns true.
fn for_each_index(lo: &[i64], hi: &[i64], mut f: impl FnMut(&[i64]) -> bool) -> bool {
    if lo.iter().zip(hi).any(|(l, h)| l > h) {
        return false;
    }
    let mut idx = lo.to_vec();
    loop {
        if f(&idx) {
            return true;
        }
        let mut a = 0;
        loop {
            if a == idx.len() {
                return false;
            }
            if idx[a] < hi[a] {
                idx[a] += 1;
                break;
            }
            idx[a] = lo[a];
            a += 1;
        }
    }
}

/// Hole-centre lattice for radius `rho`: multiples of `rho / 2`.
struct HoleLattice<'a> {
    occ: &'a DyadicOccupancy,
    level: u32,
    rho: f64,
    h: f64,
}

impl<'a> HoleLattice<'a> {
    fn new(occ: &'a DyadicOccupancy, n: u32, factor: f64) -> Self {
        let r = 0.5f64.powi(n as i32);
        let rho = factor * r;
        HoleLattice { occ, level: probe_level(occ, n, factor), rho, h: rho / 2.0 }
    }

    fn point(&self, idx: &[i64]) -> Vec<f64> {
        idx.iter().map(|&i| i as f64 * self.h).collect()
    }

    fn empty_at(&self, idx: &[i64]) -> bool {
        ball_is_empty(self.occ, self.level, &self.point(idx), self.rho)
    }
}

fn check_points<P: AsRef<[f64]>>(occ: &DyadicOccupancy, points: &[P]) -> Result<()> {
    for (index, p) in points.iter().enumerate() {
        let p = p.as_ref();
        if p.len() != occ.dim() || p.iter().any(|&x| !(0.0..1.0).contains(&x)) {
            return Err(Error::OutsideUnitBox { index, coords: p.to_vec() });
        }
    }
    Ok(())
}

/// Scale `n` is good for `z` when some lattice ball of radius `p2 2^-n`,
/// centred within max-norm distance `2^-n` of `z`, is empty.
pub fn mean_porosity_scan<P: AsRef<[f64]> + Sync>(
    occ: &DyadicOccupancy,
    points: &[P],
    p2: f64,
    n_max: u32,
) -> Result<PorosityScanResult> {
    if !(p2 > 0.0 && p2 < 1.0) {
        return Err(Error::InvalidArgument(format!("p2 = {p2} outside (0, 1)")));
    }
    let need = (1.0 / p2).log2().ceil() as u32 + 1;
    if n_max == 0 || n_max + need > occ.depth() {
        return Err(Error::InvalidArgument(format!(
            "n_max = {n_max} needs depth at least {} (have {})",
            n_max + need,
            occ.depth()
        )));
    }
    check_points(occ, points)?;
    let per_point: Vec<PointPorosity> = points
        .par_iter()
        .enumerate()
        .map(|(index, z)| {
            let z = z.as_ref();
            let good = (1..=n_max).filter(|&n| mean_good(occ, z, n, p2)).collect();
            PointPorosity::new(index, good, n_max)
        })
        .collect();
    let p1_hat = per_point.iter().map(PointPorosity::ratio).fold(0.0, f64::max);
    Ok(PorosityScanResult {
        feasible: per_point.iter().all(|p| !p.good_scales.is_empty()),
        per_point,
        p1_hat,
        p2,
        n_max,
        depth: occ.depth(),
        sample_count: occ.sample_count,
    })
}

/// Mean-porosity test at a single point and scale.
pub fn mean_good(occ: &DyadicOccupancy, z: &[f64], n: u32, p2: f64) -> bool {
    let r = 0.5f64.powi(n as i32);
    let lat = HoleLattice::new(occ, n, p2);
    let lo: Vec<i64> = z.iter().map(|&c| ((c - r) / lat.h).ceil() as i64).collect();
    let hi: Vec<i64> = z.iter().map(|&c| ((c + r) / lat.h).floor() as i64).collect();
    for_each_index(&lo, &hi, |idx| lat.empty_at(idx))
}

/// Directional test: every admissible sub-ball `B(z', alpha 2^-n)` of
/// `B(z, 2^-n)`, with `z'` on a mesh of spacing `alpha 2^-n / 2`, contains an
/// empty lattice ball of radius `beta 2^-n`. Scales with no admissible
/// sub-ball inside the unit cube are not good.
pub fn directional_good(occ: &DyadicOccupancy, z: &[f64], n: u32, alpha: f64, beta: f64) -> bool {
    let r = 0.5f64.powi(n as i32);
    let lat = HoleLattice::new(occ, n, beta);
    let step = alpha * r / 2.0;
    let reach = ((1.0 - alpha) / (alpha / 2.0)).floor() as i64;
    let lo = vec![-reach; z.len()];
    let hi = vec![reach; z.len()];
    let mut memo: HashMap<Vec<i64>, bool> = HashMap::new();
    let mut admissible = 0usize;
    let mut failed = false;
    for_each_index(&lo, &hi, |off| {
        let norm2: f64 = off.iter().map(|&o| (o as f64 * step).powi(2)).sum();
        if norm2 > ((1.0 - alpha) * r).powi(2) {
            return false;
        }
        let zp: Vec<f64> = z.iter().zip(off).map(|(&c, &o)| c + o as f64 * step).collect();
        if zp.iter().any(|&c| c - alpha * r < 0.0 || c + alpha * r > 1.0) {
            return false;
        }
        admissible += 1;
        let reach_w = (alpha - beta) * r;
        let wlo: Vec<i64> = zp.iter().map(|&c| ((c - reach_w) / lat.h).ceil() as i64).collect();
        let whi: Vec<i64> = zp.iter().map(|&c| ((c + reach_w) / lat.h).floor() as i64).collect();
        let found = for_each_index(&wlo, &whi, |w| {
            let wp = lat.point(w);
            let d2: f64 = wp.iter().zip(&zp).map(|(a, b)| (a - b).powi(2)).sum();
            if d2 > reach_w * reach_w {
                return false;
            }
            *memo.entry(w.to_vec()).or_insert_with(|| lat.empty_at(w))
        });
        failed = !found;
        failed
    });
    admissible > 0 && !failed
}

/// Searches `beta = alpha/2, alpha/4, ...` for the largest value at which
/// every point has at least one good scale.
pub fn directional_scan<P: AsRef<[f64]> + Sync>(
    occ: &DyadicOccupancy,
    points: &[P],
    alpha: f64,
    n_max: u32,
) -> Result<DirectionalResult> {
    if !(alpha > 0.0 && alpha <= 0.5) {
        return Err(Error::InvalidArgument(format!("alpha = {alpha} outside (0, 1/2]")));
    }
    if n_max == 0 || n_max >= occ.depth() {
        return Err(Error::InvalidArgument(format!("n_max = {n_max} must lie in 1..depth")));
    }
    check_points(occ, points)?;
    // smallest beta whose probe level at n_max is still on the grid
    let mut beta_floor = alpha / 2.0;
    while n_max + (2.0 / (beta_floor / 2.0)).log2().ceil() as u32 <= occ.depth() {
        beta_floor /= 2.0;
    }
    let mut beta = alpha / 2.0;
    let mut last = Vec::new();
    while beta >= beta_floor {
        let per_point: Vec<PointPorosity> = points
            .par_iter()
            .enumerate()
            .map(|(index, z)| {
                let z = z.as_ref();
                let good = (1..=n_max).filter(|&n| directional_good(occ, z, n, alpha, beta)).collect();
                PointPorosity::new(index, good, n_max)
            })
            .collect();
        if per_point.iter().all(|p| !p.good_scales.is_empty()) {
            let p_hat = per_point.iter().map(PointPorosity::ratio).fold(0.0, f64::max);
            return Ok(DirectionalResult {
                alpha,
                beta_hat: Some(beta),
                beta_floor,
                p_hat,
                per_point,
                resolution_limited: false,
                n_max,
                depth: occ.depth(),
            });
        }
        last = per_point;
        beta /= 2.0;
    }
    Ok(DirectionalResult {
        alpha,
        beta_hat: None,
        beta_floor,
        p_hat: f64::INFINITY,
        per_point: last,
        resolution_limited: true,
        n_max,
        depth: occ.depth(),
    })
}

/// Box test: `Q(z, n)` has an unoccupied level-`(n + N)` descendant.
pub fn box_good(occ: &DyadicOccupancy, z: &[f64], n: u32, big_n: u32) -> bool {
    let q = DyadicOccupancy::box_of(z, n);
    let total = 1usize << (occ.dim() as u32 * big_n);
    occ.occupied_descendants(n, &q, big_n) < total
}

pub fn box_porosity_detect<P: AsRef<[f64]> + Sync>(
    occ: &DyadicOccupancy,
    points: &[P],
    big_n: u32,
    n_max: u32,
) -> Result<BoxPorosityResult> {
    if big_n == 0 || n_max == 0 || n_max + big_n > occ.depth() {
        return Err(Error::InvalidArgument(format!(
            "need N >= 1, n_max >= 1 and n_max + N <= depth (N = {big_n}, n_max = {n_max}, depth = {})",
            occ.depth()
        )));
    }
    check_points(occ, points)?;
    let per_point: Vec<PointPorosity> = points
        .par_iter()
        .enumerate()
        .map(|(index, z)| {
            let z = z.as_ref();
            let good = (1..=n_max).filter(|&n| box_good(occ, z, n, big_n)).collect();
            PointPorosity::new(index, good, n_max)
        })
        .collect();
    let p_hat = per_point.iter().map(PointPorosity::ratio).fold(0.0, f64::max);
    Ok(BoxPorosityResult {
        n: big_n,
        p_hat,
        per_point_densities: per_point.iter().map(|p| p.density).collect(),
        feasible: p_hat.is_finite(),
        per_point,
        n_max,
        depth: occ.depth(),
    })
}

/// Up to `max` occupied finest-level cell centres, evenly strided through
/// the sorted cell list.
pub fn sample_points(occ: &DyadicOccupancy, max: usize) -> Vec<Vec<f64>> {
    let all = occ.leaf_centers();
    if all.len() <= max || max == 0 {
        return all;
    }
    let stride = all.len() as f64 / max as f64;
    (0..max).map(|k| all[(k as f64 * stride) as usize].clone()).collect()
}

#[cfg(test)]
mod tests;
