//! Forward orbits, Collet-Eckmann growth constants and the shadow
//! construction that yields a dense set of candidate good times.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::sphere::{chordal_dist, CriticalSet, RationalMap, SpherePoint};

/// Safety factor applied to the empirical average-distance constant.
pub const CF_SAFETY: f64 = 1.1;

/// Chordal distance below which an orbit point is taken to hit a critical point.
pub const COLLISION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Serialize)]
pub struct OrbitRecord {
    pub base: SpherePoint,
    /// `x, f(x), ..., f^n(x)`.
    pub points: Vec<SpherePoint>,
    /// Entry `k` is `log |(f^(k+1))'(x)|` in the spherical metric, so the
    /// vector has length `n` and is empty for `n = 0`.
    pub log_deriv: Vec<f64>,
    /// First index `j` with `points[j]` exactly critical, if any. From
    /// there on `log_deriv` is `-inf`.
    pub critical_hit: Option<usize>,
}

impl OrbitRecord {
    /// Builds a record from an explicit orbit, e.g. one reconstructed from a
    /// backward walk, computing the derivative prefix from the points.
    pub fn from_points(f: &RationalMap, points: Vec<SpherePoint>) -> Self {
        let n = points.len().saturating_sub(1);
        let mut log_deriv = Vec::with_capacity(n);
        let mut acc = 0.0;
        let mut critical_hit = None;
        for (j, &p) in points.iter().take(n).enumerate() {
            let d = f.spherical_deriv(p);
            if d == 0.0 && critical_hit.is_none() {
                critical_hit = Some(j);
            }
            acc += d.ln();
            log_deriv.push(acc);
        }
        OrbitRecord { base: points[0], points, log_deriv, critical_hit }
    }

    pub fn len(&self) -> usize {
        self.points.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn forward_orbit(f: &RationalMap, x: SpherePoint, n: usize) -> OrbitRecord {
    let mut points = Vec::with_capacity(n + 1);
    points.push(x);
    for k in 0..n {
        points.push(f.eval(points[k]));
    }
    OrbitRecord::from_points(f, points)
}

#[derive(Debug, Clone, Serialize)]
pub struct CEEstimate {
    pub critical_point: SpherePoint,
    pub lambda_hat: f64,
    pub log_c_hat: f64,
    pub n_used: usize,
    /// `log |(f^k)'(f(c))|` for `k = 0..=n_used`.
    pub per_n_log_deriv: Vec<f64>,
}

impl CEEstimate {
    /// Whether the estimate shows exponential growth at all.
    pub fn is_ce(&self) -> bool {
        self.lambda_hat > 1.0
    }
}

/// Estimates `(C, lambda)` in `|(f^n)'(f(c))| >= C lambda^n`.
///
/// The rate is the slope of the lower convex hull of `(k, log|(f^k)'(f(c))|)`
/// over `k` in `[n_max/4, n_max]`, taken on the hull edge above the window
/// midpoint so that bounded periodic oscillation at the window ends does not
/// bias it. The intercept is the largest one keeping the line below every
/// `k` in `0..=n_max`.
///
/// A return of the orbit to `c` itself (a superattracting cycle) yields
/// `lambda_hat = 0`. Meeting a different critical point, or `f(c)` being
/// critical, is an error.
pub fn ce_estimate(
    f: &RationalMap,
    critical_points: &[SpherePoint],
    c: SpherePoint,
    n_max: usize,
) -> Result<CEEstimate> {
    if n_max < 4 {
        return Err(Error::InvalidArgument(format!("n_max = {n_max} is too short for a CE fit")));
    }
    let mut z = f.eval(c);
    let mut logs = Vec::with_capacity(n_max + 1);
    logs.push(0.0);
    let mut acc = 0.0;
    for k in 0..n_max {
        if let Some(hit) = critical_points
            .iter()
            .find(|&&cp| chordal_dist(cp, z) < COLLISION_TOL)
        {
            if k == 0 || chordal_dist(*hit, c) >= COLLISION_TOL {
                return Err(Error::CriticalCollision { time: k });
            }
            // periodic critical point: derivative vanishes from here on
            logs.resize(n_max + 1, f64::NEG_INFINITY);
            return Ok(CEEstimate {
                critical_point: c,
                lambda_hat: 0.0,
                log_c_hat: f64::NEG_INFINITY,
                n_used: n_max,
                per_n_log_deriv: logs,
            });
        }
        acc += f.spherical_deriv(z).ln();
        logs.push(acc);
        z = f.eval(z);
    }

    let lo = (n_max / 4).max(1);
    let slope = midpoint_hull_slope(&logs, lo, n_max);
    let log_c_hat = logs
        .iter()
        .enumerate()
        .map(|(k, &l)| l - k as f64 * slope)
        .fold(f64::INFINITY, f64::min);
    Ok(CEEstimate {
        critical_point: c,
        lambda_hat: slope.exp(),
        log_c_hat,
        n_used: n_max,
        per_n_log_deriv: logs,
    })
}

/// Slope of the lower-hull edge of `(k, y[k])`, `k in lo..=hi`, spanning the
/// midpoint of the window.
fn midpoint_hull_slope(y: &[f64], lo: usize, hi: usize) -> f64 {
    let mut hull: Vec<usize> = Vec::new();
    for k in lo..=hi {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            // drop b if it lies on or above the chord a-k
            let cross = (b - a) as f64 * (y[k] - y[a]) - (k - a) as f64 * (y[b] - y[a]);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(k);
    }
    let mid = (lo + hi) as f64 / 2.0;
    let idx = hull
        .windows(2)
        .position(|w| (w[0] as f64) <= mid && mid < w[1] as f64)
        .unwrap_or(hull.len().saturating_sub(2));
    let (a, b) = (hull[idx], hull[idx + 1]);
    (y[b] - y[a]) / (b - a) as f64
}

/// `phi(j) = max(0, -log dist(f^j(x), Crit(f, J)))`, `+inf` on an exact hit.
pub fn phi_series(f: &RationalMap, x: SpherePoint, n: usize, crit: &CriticalSet) -> Result<Vec<f64>> {
    phi_from_orbit(&forward_orbit(f, x, n), crit)
}

pub fn phi_from_orbit(orbit: &OrbitRecord, crit: &CriticalSet) -> Result<Vec<f64>> {
    let targets: Vec<SpherePoint> = crit.in_julia().map(|c| c.point).collect();
    if targets.is_empty() {
        return Err(Error::InvalidArgument("no critical point in the Julia set".into()));
    }
    Ok(orbit
        .points
        .iter()
        .map(|&p| {
            let d = targets
                .iter()
                .map(|&c| chordal_dist(p, c))
                .fold(f64::INFINITY, f64::min);
            (-d.ln()).max(0.0)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
struct Ordered(f64);

impl Eq for Ordered {}

impl Ord for Ordered {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// The average-distance constant: the maximum over prefix lengths `n` of the
/// prefix sum of `phi` with its `exclude` largest terms dropped, divided by
/// `n`, times [`CF_SAFETY`].
pub fn dpu_cf(phi: &[f64], exclude: usize) -> Result<f64> {
    let infinite = phi.iter().filter(|v| v.is_infinite()).count();
    if infinite > exclude {
        return Err(Error::TooManyInfinite { count: infinite, exclude });
    }
    // min-heap holding the `exclude` largest values seen so far
    let mut top: BinaryHeap<Reverse<Ordered>> = BinaryHeap::with_capacity(exclude + 1);
    let mut kept_sum = 0.0;
    let mut best: f64 = 0.0;
    for (i, &v) in phi.iter().enumerate() {
        if exclude == 0 {
            kept_sum += v;
        } else {
            top.push(Reverse(Ordered(v)));
            if top.len() > exclude {
                let Reverse(Ordered(small)) = top.pop().unwrap();
                kept_sum += small;
            }
        }
        best = best.max(kept_sum / (i + 1) as f64);
    }
    Ok(best * CF_SAFETY)
}

/// `2 nu / log(lambda)`.
pub fn shadow_scale(nu: u32, lambda_hat: f64) -> Result<f64> {
    if !(lambda_hat > 1.0) {
        return Err(Error::InvalidArgument(format!(
            "shadow scale needs lambda > 1, got {lambda_hat}"
        )));
    }
    Ok(2.0 * nu as f64 / lambda_hat.ln())
}

#[derive(Debug, Clone, Serialize)]
pub struct ShadowCover {
    pub phi: Vec<f64>,
    pub k_f: f64,
    pub c_f: f64,
    pub n_f: usize,
    /// For each index `j`, the number of shadows `S_n` containing `j`.
    pub shadow_count: Vec<u32>,
    pub a_flags: Vec<bool>,
}

/// Marks every integer `j` in `(n, n + phi(n) K_f]` as shadowed by `n`.
pub fn shadow_cover(phi: &[f64], k_f: f64, c_f: f64, crit_count: usize) -> Result<ShadowCover> {
    if !(k_f > 0.0) {
        return Err(Error::InvalidArgument(format!("K_f must be positive, got {k_f}")));
    }
    let n_f = (2.0 * (crit_count as f64 + c_f * k_f)).ceil() as usize;
    let len = phi.len();
    let mut diff = vec![0i64; len + 1];
    for (n, &p) in phi.iter().enumerate() {
        if n + 1 >= len || p <= 0.0 {
            continue;
        }
        let end = if p.is_infinite() {
            len - 1
        } else {
            ((n as f64 + p * k_f).floor() as usize).min(len - 1)
        };
        if end > n {
            diff[n + 1] += 1;
            diff[end + 1] -= 1;
        }
    }
    let mut run = 0i64;
    let shadow_count: Vec<u32> = diff[..len]
        .iter()
        .map(|d| {
            run += d;
            run as u32
        })
        .collect();
    let a_flags = shadow_count.iter().map(|&c| c as usize <= n_f).collect();
    Ok(ShadowCover { phi: phi.to_vec(), k_f, c_f, n_f, shadow_count, a_flags })
}

/// Fraction of `1..=n` flagged in `A`.
pub fn shadow_density(cover: &ShadowCover, n: usize) -> Result<f64> {
    if n == 0 || n >= cover.a_flags.len() {
        return Err(Error::InvalidArgument(format!(
            "density window {n} outside 1..{}",
            cover.a_flags.len()
        )));
    }
    Ok(cover.a_flags[1..=n].iter().filter(|&&a| a).count() as f64 / n as f64)
}

/// Inputs shared by every base point of one map.
#[derive(Debug, Clone, Serialize)]
pub struct ShadowConstants {
    pub lambda_hat: f64,
    pub nu: u32,
    pub k_f: f64,
    pub crit_count: usize,
}

impl ShadowConstants {
    pub fn new(crit: &CriticalSet, lambda_hat: f64) -> Result<Self> {
        Ok(ShadowConstants {
            lambda_hat,
            nu: crit.nu,
            k_f: shadow_scale(crit.nu, lambda_hat)?,
            crit_count: crit.julia_count(),
        })
    }
}

/// phi, C_f and the shadow cover for one orbit.
pub fn shadow_analysis(orbit: &OrbitRecord, crit: &CriticalSet, consts: &ShadowConstants) -> Result<ShadowCover> {
    let phi = phi_from_orbit(orbit, crit)?;
    let c_f = dpu_cf(&phi, consts.crit_count)?;
    shadow_cover(&phi, consts.k_f, c_f, consts.crit_count)
}

/// Smallest `lambda_hat` over the in-Julia critical points.
pub fn map_lambda(f: &RationalMap, crit: &CriticalSet, n_max: usize) -> Result<f64> {
    let all: Vec<SpherePoint> = crit.points.iter().map(|c| c.point).collect();
    let mut lambda = f64::INFINITY;
    for c in crit.in_julia() {
        lambda = lambda.min(ce_estimate(f, &all, c.point, n_max)?.lambda_hat);
    }
    if lambda.is_infinite() {
        return Err(Error::InvalidArgument("no critical point in the Julia set".into()));
    }
    Ok(lambda)
}
