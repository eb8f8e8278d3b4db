//! Shrinking-neighbourhood pullbacks along orbits: components `W_s`,
//! criticality counts, good times, diameter halving and the pullback of
//! holes from scale `delta` down to the scale of `W_n(x)`.

mod blaschke;
pub mod engine;
#[cfg(test)]
mod tests;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

pub use blaschke::{
    blaschke_distortion_oracle, blaschke_oracle_shifted, fit_containment, hyperbolic_bound, mobius, rho, BlaschkeReport, BlaschkeViolation,
};
use engine::{
    chordal_diameter, circle_offsets, dist_to_polygon, euclid_circle, euclid_inner_radius, lift_path, run_chain,
    winding_number, ChainRun, LocalMap, MAX_VERTICES,
};

use crate::dynamics::OrbitRecord;
use crate::error::{Error, Result};
use crate::julia::complement_hole;
use crate::porosity::DyadicOccupancy;
use crate::sphere::{chordal_dist, RationalMap, SpherePoint};

type C64 = Complex64;

const CRIT_CLUSTER_TOL: f64 = 1e-6;

/// `b_j = a / j^p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShrinkingSchedule {
    pub a: f64,
    pub p: f64,
    /// Lower bound for the infinite product of `1 - b_j`.
    pub product_floor: f64,
}

impl ShrinkingSchedule {
    pub fn new(a: f64, p: f64) -> Result<Self> {
        if !(a > 0.0 && a < 1.0 && p > 1.0) {
            return Err(Error::InvalidArgument(format!("schedule needs 0 < a < 1 and p > 1, got a = {a}, p = {p}")));
        }
        const M: usize = 100_000;
        let log_partial: f64 = (1..=M).map(|j| (1.0 - a / (j as f64).powf(p)).ln()).sum();
        let tail = a * (M as f64).powf(1.0 - p) / (p - 1.0);
        let product_floor = log_partial.exp() * (1.0 - tail);
        if product_floor <= 0.5 {
            return Err(Error::InvalidArgument(format!("product of 1 - b_j is only {product_floor}")));
        }
        Ok(ShrinkingSchedule { a, p, product_floor })
    }

    pub fn b(&self, j: usize) -> f64 {
        self.a / (j as f64).powf(self.p)
    }

    /// `radii[s] = shrinking_radius(delta, s)` for `s = 0..=n`.
    pub fn radii(&self, delta: f64, n: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(n + 1);
        let mut r = 2.0 * delta;
        out.push(r);
        for j in 1..=n {
            r *= 1.0 - self.b(j);
            out.push(r);
        }
        out
    }
}

impl Default for ShrinkingSchedule {
    fn default() -> Self {
        ShrinkingSchedule::new(0.25, 2.0).expect("default schedule")
    }
}

pub fn shrinking_radius(delta: f64, s: usize, sched: &ShrinkingSchedule) -> f64 {
    (1..=s).fold(2.0 * delta, |r, j| r * (1.0 - sched.b(j)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameStatus {
    Resolved,
    Unresolved,
}

#[derive(Debug, Clone, Serialize)]
pub struct PullbackFrame {
    pub s: usize,
    pub radius_bs: f64,
    pub boundary: Vec<SpherePoint>,
    pub center_preimage: SpherePoint,
    pub crit_inside: Vec<(SpherePoint, u32)>,
    pub cumulative_criticality: u32,
    pub diam_ws: f64,
    /// Distance from the centre preimage to the boundary polygon, scaled by
    /// the chordal density at the centre.
    pub inradius: f64,
    pub status: FrameStatus,
}

fn finite_orbit(orbit: &OrbitRecord, n: usize) -> Result<Vec<C64>> {
    if orbit.len() < n {
        return Err(Error::InvalidArgument(format!("orbit has {} steps, need {n}", orbit.len())));
    }
    orbit.points[..=n]
        .iter()
        .map(|p| p.as_finite().ok_or_else(|| Error::InvalidPoint("orbit passes through infinity".into())))
        .collect()
}

/// Centres of the chain ending at time `n`: `centers[k] = x_{n-k}`.
fn chain_centers(xs: &[C64], n: usize) -> Vec<C64> {
    xs[..=n].iter().rev().copied().collect()
}

fn finite_critical(f: &RationalMap) -> Result<Vec<(C64, u32)>> {
    Ok(f.critical_points(CRIT_CLUSTER_TOL)?.into_iter().filter_map(|(p, m)| p.as_finite().map(|z| (z, m))).collect())
}

fn iterate(f: &RationalMap, z: C64, s: usize) -> SpherePoint {
    (0..s).fold(SpherePoint::Finite(z), |p, _| f.eval(p))
}

fn local_factor(z: C64) -> f64 {
    2.0 / (1.0 + z.norm_sqr())
}

fn disc_chain(f: &RationalMap, centers: &[C64], depth: usize, r: f64, samples: usize) -> Result<ChainRun> {
    let zeros = vec![C64::new(0.0, 0.0); depth + 1];
    let y = centers[0];
    run_chain(f, centers, &zeros, depth, samples, |v| circle_offsets(y, r, v))
}

fn contains(run: &ChainRun, level: usize, centers: &[C64], c: C64) -> bool {
    winding_number(&run.levels[level], c - centers[level]) != 0
}

/// Frames `1..=n` of the shrinking-neighbourhood pullback of
/// `B(f^n(x), 2 delta)`. Stops after the first unresolved frame.
pub fn pull_back_disc(
    f: &RationalMap,
    orbit: &OrbitRecord,
    n: usize,
    delta: f64,
    sched: &ShrinkingSchedule,
    boundary_samples: usize,
) -> Result<Vec<PullbackFrame>> {
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument(format!("delta must be positive, got {delta}")));
    }
    let xs = finite_orbit(orbit, n)?;
    let centers = chain_centers(&xs, n);
    let crit = finite_critical(f)?;
    let radii = sched.radii(delta, n);
    let y = SpherePoint::Finite(centers[0]);
    let mut frames = Vec::with_capacity(n);
    let mut cumulative = 0;
    for s in 1..=n {
        let run = disc_chain(f, &centers, s, radii[s], boundary_samples)?;
        let c = centers[s];
        let mut frame = PullbackFrame {
            s,
            radius_bs: radii[s],
            boundary: Vec::new(),
            center_preimage: SpherePoint::Finite(c),
            crit_inside: Vec::new(),
            cumulative_criticality: cumulative,
            diam_ws: f64::NAN,
            inradius: f64::NAN,
            status: FrameStatus::Unresolved,
        };
        if !run.complete {
            frames.push(frame);
            break;
        }
        let poly = &run.levels[s];
        let mut consistent = true;
        for &(z, m) in &crit {
            if contains(&run, s, &centers, z) {
                consistent &= chordal_dist(iterate(f, z, s), y) < radii[s];
                frame.crit_inside.push((SpherePoint::Finite(z), m));
            }
        }
        cumulative += frame.crit_inside.iter().map(|p| p.1).sum::<u32>();
        frame.cumulative_criticality = cumulative;
        frame.boundary = poly.iter().map(|&o| SpherePoint::Finite(c + o)).collect();
        frame.diam_ws = chordal_diameter(c, poly);
        frame.inradius = dist_to_polygon(poly, C64::new(0.0, 0.0)) * local_factor(c);
        let done = !consistent;
        if consistent {
            frame.status = FrameStatus::Resolved;
        }
        frames.push(frame);
        if done {
            break;
        }
    }
    Ok(frames)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct GoodTimeConfig {
    pub delta: f64,
    pub d: u32,
    pub n_max: usize,
    /// Diameters of `W_n(x)` are computed at good times `n <= diam_n_max`.
    pub diam_n_max: usize,
    pub sched: ShrinkingSchedule,
    pub boundary_samples: usize,
}

impl GoodTimeConfig {
    pub fn new(delta: f64, d: u32, n_max: usize) -> Self {
        GoodTimeConfig {
            delta,
            d,
            n_max,
            diam_n_max: 0,
            sched: ShrinkingSchedule::default(),
            boundary_samples: engine::START_VERTICES,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GoodTimeRecord {
    pub x: SpherePoint,
    pub delta: f64,
    pub d: u32,
    pub good_times: Vec<usize>,
    /// `None` where some needed frame was unresolved.
    pub criticality_at_n: Vec<Option<u32>>,
    pub unknown: Vec<usize>,
    /// Chordal diameter of the component of `f^{-n}(B(f^n x, delta/2))`
    /// containing `x`, at good times up to the diameter horizon.
    pub diam_wn: Vec<Option<f64>>,
    /// `dist(x, boundary)` of the same component, chordal.
    pub inradius_wn: Vec<Option<f64>>,
    /// Good times over resolved times in `0..=n_max`.
    pub density: f64,
    /// Minimum of the running density over `m` in `[n_max/4, n_max]`.
    pub lower_density: f64,
    pub orbit: Vec<C64>,
    pub sched: ShrinkingSchedule,
    pub boundary_samples: usize,
}

impl GoodTimeRecord {
    /// Good times for a different bound `d`, from the same criticality counts.
    pub fn good_for(&self, d: u32) -> Vec<usize> {
        self.criticality_at_n.iter().enumerate().filter(|(_, c)| matches!(c, Some(v) if *v <= d)).map(|(n, _)| n).collect()
    }

    pub fn n_max(&self) -> usize {
        self.criticality_at_n.len() - 1
    }
}

fn densities(crit: &[Option<u32>], d: u32) -> (f64, f64) {
    let mut good = 0usize;
    let mut known = 0usize;
    let n_max = crit.len() - 1;
    let mut lower = f64::INFINITY;
    for (n, c) in crit.iter().enumerate() {
        if let Some(v) = c {
            known += 1;
            if *v <= d {
                good += 1;
            }
        }
        if n >= n_max / 4 && known > 0 {
            lower = lower.min(good as f64 / known as f64);
        }
    }
    let density = if known > 0 { good as f64 / known as f64 } else { 0.0 };
    (density, if lower.is_finite() { lower } else { density })
}

/// Total criticality of the frames of time `n`.
///
/// A critical point `c` can only lie in frame `s` when `f^s(c)` lies in
/// `B_s`, which is inside `B(y, 2 delta)`. Candidates are first tested
/// against the pullback of the largest disc `2 delta` and then of the
/// smallest disc `r_n`; components grow with the disc, so only points
/// between the two need the exact frame.
fn criticality_at(
    f: &RationalMap,
    xs: &[C64],
    n: usize,
    crit: &[(C64, u32)],
    crit_orbits: &[Vec<SpherePoint>],
    radii: &[f64],
    samples: usize,
) -> Result<Option<u32>> {
    if n == 0 {
        return Ok(Some(0));
    }
    let y = SpherePoint::Finite(xs[n]);
    let mut cands: Vec<(usize, usize)> = Vec::new();
    for s in 1..=n {
        for (ci, orb) in crit_orbits.iter().enumerate() {
            if chordal_dist(orb[s], y) < radii[0] {
                cands.push((s, ci));
            }
        }
    }
    if cands.is_empty() {
        return Ok(Some(0));
    }
    let centers = chain_centers(xs, n);
    let s_max = cands.iter().map(|c| c.0).max().unwrap();
    let sup = disc_chain(f, &centers, s_max, radii[0], samples)?;
    let mut undecided = Vec::new();
    for &(s, ci) in &cands {
        if s > sup.reached || contains(&sup, s, &centers, crit[ci].0) {
            undecided.push((s, ci));
        }
    }
    if undecided.is_empty() {
        return Ok(Some(0));
    }
    let r_min = radii[n];
    let s_max = undecided.iter().map(|c| c.0).max().unwrap();
    let sub = disc_chain(f, &centers, s_max, r_min, samples)?;
    let mut total = 0;
    for (s, ci) in undecided {
        let (z, m) = crit[ci];
        let inside = if s <= sub.reached && contains(&sub, s, &centers, z) {
            true
        } else {
            let exact = disc_chain(f, &centers, s, radii[s], samples)?;
            if !exact.complete {
                return Ok(None);
            }
            contains(&exact, s, &centers, z)
        };
        if inside {
            if chordal_dist(crit_orbits[ci][s], y) >= radii[s] {
                return Ok(None);
            }
            total += m;
        }
    }
    Ok(Some(total))
}

/// Diameter and inradius of `W_n(x)`, the component of
/// `f^{-n}(B(f^n x, delta/2))` containing `x`.
fn component_size(f: &RationalMap, xs: &[C64], n: usize, delta: f64, samples: usize) -> Result<Option<(f64, f64)>> {
    let centers = chain_centers(xs, n);
    let run = disc_chain(f, &centers, n, delta / 2.0, samples)?;
    if !run.complete {
        return Ok(None);
    }
    let poly = &run.levels[n];
    let x = centers[n];
    Ok(Some((chordal_diameter(x, poly), dist_to_polygon(poly, C64::new(0.0, 0.0)) * local_factor(x))))
}

pub fn good_times(f: &RationalMap, orbit: &OrbitRecord, cfg: &GoodTimeConfig) -> Result<GoodTimeRecord> {
    if !(cfg.delta > 0.0 && cfg.delta < 1.0) {
        return Err(Error::InvalidArgument(format!("delta must lie in (0, 1), got {}", cfg.delta)));
    }
    let n_max = cfg.n_max;
    let xs = finite_orbit(orbit, n_max)?;
    let crit = finite_critical(f)?;
    let crit_orbits: Vec<Vec<SpherePoint>> = crit
        .iter()
        .map(|&(c, _)| {
            let mut orb = vec![SpherePoint::Finite(c)];
            for _ in 0..n_max {
                orb.push(f.eval(*orb.last().unwrap()));
            }
            orb
        })
        .collect();
    let radii = cfg.sched.radii(cfg.delta, n_max);
    let criticality: Vec<Option<u32>> = (0..=n_max)
        .into_par_iter()
        .map(|n| criticality_at(f, &xs, n, &crit, &crit_orbits, &radii, cfg.boundary_samples))
        .collect::<Result<_>>()?;
    let good: Vec<usize> =
        criticality.iter().enumerate().filter(|(_, c)| matches!(c, Some(v) if *v <= cfg.d)).map(|(n, _)| n).collect();
    let unknown = criticality.iter().enumerate().filter(|(_, c)| c.is_none()).map(|(n, _)| n).collect();
    let sizes: Vec<(usize, Option<(f64, f64)>)> = good
        .par_iter()
        .filter(|&&n| n <= cfg.diam_n_max)
        .map(|&n| component_size(f, &xs, n, cfg.delta, cfg.boundary_samples).map(|s| (n, s)))
        .collect::<Result<_>>()?;
    let mut diam_wn = vec![None; n_max + 1];
    let mut inradius_wn = vec![None; n_max + 1];
    for (n, s) in sizes {
        if let Some((d, r)) = s {
            diam_wn[n] = Some(d);
            inradius_wn[n] = Some(r);
        }
    }
    let (density, lower_density) = densities(&criticality, cfg.d);
    Ok(GoodTimeRecord {
        x: orbit.points[0],
        delta: cfg.delta,
        d: cfg.d,
        good_times: good,
        criticality_at_n: criticality,
        unknown,
        diam_wn,
        inradius_wn,
        density,
        lower_density,
        orbit: xs,
        sched: cfg.sched,
        boundary_samples: cfg.boundary_samples,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HalvingStep {
    pub j: usize,
    pub k_j: usize,
    pub k_next: usize,
    pub ratio: f64,
    pub ok: bool,
}

/// `k_j` is the `(N j)`-th good time (counting `0` as the zeroth) for as
/// long as its diameter is known.
pub fn selected_times(record: &GoodTimeRecord, big_n: usize) -> Vec<usize> {
    assert!(big_n >= 1);
    record.good_times.iter().step_by(big_n).copied().take_while(|&k| record.diam_wn[k].is_some()).collect()
}

pub fn halving_check(record: &GoodTimeRecord, big_n: usize) -> Vec<HalvingStep> {
    let ks = selected_times(record, big_n);
    ks.windows(2)
        .enumerate()
        .map(|(j, w)| {
            let ratio = record.diam_wn[w[1]].unwrap() / record.diam_wn[w[0]].unwrap();
            HalvingStep { j, k_j: w[0], k_next: w[1], ratio, ok: ratio < 0.5 }
        })
        .collect()
}

/// Smallest `N` in the range for which every ratio is below one half,
/// with at least `min_steps` ratios available.
pub fn find_halving_n(record: &GoodTimeRecord, range: std::ops::RangeInclusive<usize>, min_steps: usize) -> Option<usize> {
    range.into_iter().find(|&n| {
        let steps = halving_check(record, n);
        steps.len() >= min_steps && steps.iter().all(|s| s.ok)
    })
}

/// Supremum of the spherical derivative over the sphere, on a grid in both
/// charts, times a 5% margin.
pub fn sup_spherical_derivative(f: &RationalMap) -> f64 {
    const M: i32 = 200;
    let mut best: f64 = 0.0;
    for i in -M..=M {
        for j in -M..=M {
            let w = C64::new(i as f64 / M as f64, j as f64 / M as f64);
            if w.norm() > 1.0 {
                continue;
            }
            best = best.max(f.spherical_deriv(SpherePoint::Finite(w)));
            best = best.max(f.spherical_deriv(SpherePoint::from_complex(w.inv())));
        }
    }
    best * 1.05
}

/// `L` with `diam W_n(x) > 2^{-nL}` for `n >= 1`. A disc of radius
/// `delta / (2 sup^n)` about `x` maps into `B(f^n x, delta/2)`, so
/// `log2 sup + log2(1/delta) + 1` suffices.
pub fn lipschitz_exponent(f: &RationalMap, delta: f64) -> f64 {
    sup_spherical_derivative(f).log2() + (1.0 / delta).log2() + 1.0
}

/// Times `n >= 1` whose recorded diameter is not above `2^{-nL}`.
pub fn lipschitz_violations(record: &GoodTimeRecord, l: f64) -> Vec<usize> {
    record
        .diam_wn
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(n, d)| matches!(d, Some(v) if *v <= (-(*n as f64) * l).exp2()))
        .map(|(n, _)| n)
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct HoleWitness {
    pub k: usize,
    pub n_j: i32,
    pub center: SpherePoint,
    /// `z_j - x`, kept separately since it may be far below the spacing of
    /// doubles around `x`.
    pub offset: C64,
    /// Chordal radius of the certified disc about `z_j`.
    pub radius: f64,
    pub diam_w: f64,
    pub dist_to_x: f64,
    /// `radius / 2^{-n_j}`.
    pub ratio: f64,
    /// The hole `U` at level zero, centre and Euclidean radius.
    pub hole: (C64, f64),
}

#[derive(Debug, Clone, Serialize)]
pub struct HolePullback {
    pub big_n: usize,
    pub tau: f64,
    pub witnesses: Vec<HoleWitness>,
    pub unresolved: Vec<usize>,
    /// Smallest `radius / 2^{-n_j}` over the witnesses.
    pub c4_hat: f64,
}

/// Lifts the segment from `centers[0]` to `centers[0] + target` through
/// `depth` levels, returning the endpoint offsets per level.
fn lift_anchor(f: &RationalMap, centers: &[C64], depth: usize, target: C64) -> Result<Option<Vec<C64>>> {
    let locals: Vec<LocalMap> = (1..=depth).map(|k| LocalMap::new(f, centers[k])).collect::<Result<_>>()?;
    let mut m = 64;
    'outer: while m <= MAX_VERTICES {
        let mut path: Vec<C64> = (0..=m).map(|j| target * (j as f64 / m as f64)).collect();
        let mut anchors = vec![target];
        for local in &locals {
            match lift_path(local, &path, C64::new(0.0, 0.0))? {
                Some(p) => path = p,
                None => {
                    m *= 2;
                    continue 'outer;
                }
            }
            anchors.push(*path.last().unwrap());
        }
        return Ok(Some(anchors));
    }
    Ok(None)
}

/// Pulls a disc `U = B(w, r)` given in offsets from `centers[0]` back
/// through `depth` levels, returning the lifted centre and the distance from
/// it to the boundary of the component, both as offsets from
/// `centers[depth]`.
fn pull_back_hole(
    f: &RationalMap,
    centers: &[C64],
    depth: usize,
    w: C64,
    r: f64,
    samples: usize,
) -> Result<Option<(C64, f64)>> {
    let Some(anchors) = lift_anchor(f, centers, depth, w)? else {
        return Ok(None);
    };
    let run = run_chain(f, centers, &anchors, depth, samples, |v| euclid_circle(C64::new(0.0, 0.0), w, r, v))?;
    if !run.complete {
        return Ok(None);
    }
    let poly = &run.levels[depth];
    let z = anchors[depth];
    if winding_number(poly, z) == 0 {
        return Ok(None);
    }
    Ok(Some((z, dist_to_polygon(poly, z))))
}

/// Porosity witnesses at the selected good times `k_j`: a hole `U` of
/// radius at least `tau` times the Euclidean size of `B(f^{k_j} x, delta/2)`
/// is pulled back into `W_{k_j}(x)` and the disc inscribed in its pullback
/// is reported.
pub fn hole_pullback(
    f: &RationalMap,
    record: &GoodTimeRecord,
    julia: &DyadicOccupancy,
    tau: f64,
    big_n: usize,
) -> Result<HolePullback> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::InvalidArgument(format!("tau must lie in (0, 1], got {tau}")));
    }
    let ks = selected_times(record, big_n);
    let results: Vec<(usize, Option<HoleWitness>)> = ks
        .par_iter()
        .map(|&k| {
            let centers = chain_centers(&record.orbit, k);
            let y = centers[0];
            let rho = euclid_inner_radius(y, record.delta / 2.0);
            let (w, r) = match complement_hole(julia, y, rho) {
                Some(h) if h.1 >= tau * rho => h,
                _ => return Err(Error::NoHole { half_delta: record.delta / 2.0 }),
            };
            let Some((offset, dist)) = pull_back_hole(f, &centers, k, w - y, r, record.boundary_samples)? else {
                return Ok((k, None));
            };
            let x = centers[k];
            let diam_w = record.diam_wn[k].unwrap();
            let n_j = (-diam_w.log2()).floor() as i32;
            let radius = dist * local_factor(x);
            let dist_to_x = 2.0 * offset.norm() / ((1.0 + x.norm_sqr()) * (1.0 + (x + offset).norm_sqr())).sqrt();
            Ok((
                k,
                Some(HoleWitness {
                    k,
                    n_j,
                    center: SpherePoint::Finite(x + offset),
                    offset,
                    radius,
                    diam_w,
                    dist_to_x,
                    ratio: radius * (n_j as f64).exp2(),
                    hole: (w, r),
                }),
            ))
        })
        .collect::<Result<_>>()?;
    let mut out = HolePullback { big_n, tau, witnesses: Vec::new(), unresolved: Vec::new(), c4_hat: f64::INFINITY };
    for (k, w) in results {
        match w {
            Some(w) => {
                out.c4_hat = out.c4_hat.min(w.ratio);
                out.witnesses.push(w);
            }
            None => out.unresolved.push(k),
        }
    }
    Ok(out)
}

/// `diam(W'') / diam(W_k(x))` where `W''` is the pullback of the concentric
/// disc `B(f^k x, tau delta / 2)`, for each `tau`.
pub fn subdisc_ratios(f: &RationalMap, record: &GoodTimeRecord, k: usize, taus: &[f64]) -> Result<Vec<(f64, Option<f64>)>> {
    let Some(full) = record.diam_wn.get(k).copied().flatten() else {
        return Err(Error::InvalidArgument(format!("no diameter recorded at time {k}")));
    };
    let centers = chain_centers(&record.orbit, k);
    taus.iter()
        .map(|&tau| {
            let run = disc_chain(f, &centers, k, tau * record.delta / 2.0, record.boundary_samples)?;
            Ok((tau, run.complete.then(|| chordal_diameter(centers[k], &run.levels[k]) / full)))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DerivativeSample {
    pub s: usize,
    pub b_next: f64,
    /// `|(f^s)'(x_{n-s})|_sigma diam(W'_s) / delta`.
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DerivativeFit {
    pub samples: Vec<DerivativeSample>,
    pub c1: f64,
    pub c2: f64,
    /// Frames skipped because their criticality exceeded `d` or the
    /// pullback was unresolved.
    pub skipped: Vec<usize>,
}

/// Checks `|(f^s)'| diam(W'_s) <= C1 b_{s+1}^{-C2} delta` along the frames
/// of time `n`, `W'_s` being the component of `f^{-s}(B_{s+1})`. `C2` is
/// the least-squares slope of `log ratio` against `log(1/b)`, clipped at
/// zero, and `C1` the smallest constant covering every sample.
pub fn derivative_bound(
    f: &RationalMap,
    orbit: &OrbitRecord,
    n: usize,
    delta: f64,
    sched: &ShrinkingSchedule,
    d: u32,
    samples: usize,
) -> Result<DerivativeFit> {
    let frames = pull_back_disc(f, orbit, n, delta, sched, samples)?;
    let xs = finite_orbit(orbit, n)?;
    let centers = chain_centers(&xs, n);
    let radii = sched.radii(delta, n + 1);
    let mut fit = DerivativeFit { samples: Vec::new(), c1: 0.0, c2: 0.0, skipped: Vec::new() };
    for s in 1..=n {
        let ok = frames.get(s - 1).is_some_and(|fr| fr.status == FrameStatus::Resolved && fr.cumulative_criticality <= d);
        let run = if ok { Some(disc_chain(f, &centers, s, radii[s + 1], samples)?) } else { None };
        match run {
            Some(run) if run.complete => {
                let deriv: f64 = (n - s..n).map(|i| f.spherical_deriv(SpherePoint::Finite(xs[i]))).product();
                let diam = chordal_diameter(centers[s], &run.levels[s]);
                fit.samples.push(DerivativeSample { s, b_next: sched.b(s + 1), ratio: deriv * diam / delta });
            }
            _ => fit.skipped.push(s),
        }
    }
    let pts: Vec<(f64, f64)> = fit.samples.iter().map(|p| ((1.0 / p.b_next).ln(), p.ratio.ln())).collect();
    if pts.len() >= 2 {
        let m = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        fit.c2 = if sxx > 0.0 { (sxy / sxx).max(0.0) } else { 0.0 };
    }
    fit.c1 = pts.iter().map(|&(x, y)| (y - fit.c2 * x).exp()).fold(0.0, f64::max);
    Ok(fit)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DistortionConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub epsilon: f64,
    pub c_of_d: f64,
    pub l: f64,
}

impl DistortionConstants {
    /// `c3` is the largest sub-disc ratio observed, `epsilon` the smallest
    /// hole radius used.
    pub fn assemble(fit: &DerivativeFit, sub: &[(f64, Option<f64>)], holes: &HolePullback, d: u32, l: f64) -> Self {
        DistortionConstants {
            c1: fit.c1,
            c2: fit.c2,
            c3: sub.iter().filter_map(|s| s.1).fold(0.0, f64::max),
            c4: holes.c4_hat,
            epsilon: holes.witnesses.iter().map(|w| w.hole.1).fold(f64::INFINITY, f64::min),
            c_of_d: (2.0 * d as f64).ln(),
            l,
        }
    }
}
