//! Polygon pullback along an orbit chain.
//!
//! A chain is a list of centres `c_0, c_1, ...` with `f(c_k) = c_{k-1}`.
//! Regions at level `k` are polygons stored as offsets from `c_k`, so that
//! components far smaller than the spacing of doubles around `c_k` keep
//! full relative precision. The numerical orbit is treated as an exact
//! orbit; its rounding defect is never added to the offsets.
//!
//! Each vertex is lifted by solving `f(c_k + h) - f(c_k) = zeta` in `h`,
//! picking the root nearest the lift of the previous vertex. When that
//! choice is not clear-cut the whole chain is restarted from a circle with
//! twice the vertices, so every vertex stays an exact lift of a point of the
//! level-0 circle.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::poly::{quadratic_roots, Poly};
use crate::sphere::RationalMap;

pub type C64 = Complex64;

pub const START_VERTICES: usize = 64;
pub const MAX_VERTICES: usize = 4096;
const RADIAL_STEPS: usize = 8;
/// Nearest root must be at most this fraction of the distance to the
/// runner-up.
const AMBIGUITY: f64 = 0.25;

/// Taylor coefficients of `p(c + h)` in `h`, padded to `len`.
fn taylor(p: &Poly, c: C64, len: usize) -> Vec<C64> {
    let mut a: Vec<C64> = p.coeffs().to_vec();
    let n = a.len();
    // repeated synthetic division by (z - c)
    for k in 0..n {
        for j in (k..n - 1).rev() {
            let t = a[j + 1] * c;
            a[j] += t;
        }
    }
    a.resize(len.max(n), C64::new(0.0, 0.0));
    a
}

/// `f(c + h) - f(c) = zeta` as a polynomial equation in `h`:
/// `sum_k (base_k - zeta qq_k) h^k = 0`.
pub struct LocalMap {
    base: Vec<C64>,
    qq: Vec<C64>,
}

impl LocalMap {
    pub fn new(f: &RationalMap, c: C64) -> Result<Self> {
        let d = f.degree() + 1;
        let p = taylor(f.numer(), c, d);
        let q = taylor(f.denom(), c, d);
        if q[0].norm() == 0.0 {
            return Err(Error::InvalidPoint(format!("chain centre {c} is a pole")));
        }
        let base = (0..d).map(|k| p[k] * q[0] - p[0] * q[k]).collect();
        let qq = (0..d).map(|k| q[0] * q[k]).collect();
        Ok(LocalMap { base, qq })
    }

    pub fn roots(&self, zeta: C64) -> Result<Roots> {
        if self.base.len() == 3 {
            let a2 = self.base[2] - zeta * self.qq[2];
            let a1 = self.base[1] - zeta * self.qq[1];
            if a2.norm() > 1e-15 * a1.norm().max(1.0) {
                return Ok(Roots::Two(quadratic_roots(-zeta * self.qq[0], a1, a2)));
            }
        }
        let coeffs: Vec<C64> = self.base.iter().zip(&self.qq).map(|(&b, &q)| b - zeta * q).collect();
        let p = Poly::new(coeffs).trimmed(1e-15);
        if p.degree() == 2 {
            let c = p.coeffs();
            return Ok(Roots::Two(quadratic_roots(c[0], c[1], c[2])));
        }
        p.roots().map(Roots::Many)
    }

    /// Value of `f(c + h) - f(c)`.
    pub fn image(&self, h: C64) -> C64 {
        let num = self.base.iter().rev().fold(C64::new(0.0, 0.0), |acc, &b| acc * h + b);
        let den = self.qq.iter().rev().fold(C64::new(0.0, 0.0), |acc, &b| acc * h + b);
        num / den
    }
}

/// Preimages of one point; quadratics avoid the allocation.
pub enum Roots {
    Two([C64; 2]),
    Many(Vec<C64>),
}

impl std::ops::Deref for Roots {
    type Target = [C64];

    fn deref(&self) -> &[C64] {
        match self {
            Roots::Two(r) => r,
            Roots::Many(r) => r,
        }
    }
}

/// Root nearest `prev`, or `None` when the runner-up is too close.
fn continue_branch(roots: &[C64], prev: C64) -> Option<C64> {
    let (mut d1, mut d2) = (f64::INFINITY, f64::INFINITY);
    let mut best = None;
    for &r in roots {
        let d = (r - prev).norm_sqr();
        if d < d1 {
            d2 = d1;
            d1 = d;
            best = Some(r);
        } else if d < d2 {
            d2 = d;
        }
    }
    best.filter(|_| d2.is_infinite() || d1 <= AMBIGUITY * AMBIGUITY * d2)
}

/// Lifts an open path whose first point lifts to `start`.
///
/// The first step takes the nearest root without the ambiguity test: when
/// `start` is critical, all preimages of a point close to its image lie in
/// one small neighbourhood of `start` and any of them will do.
pub fn lift_path(local: &LocalMap, path: &[C64], start: C64) -> Result<Option<Vec<C64>>> {
    let mut out = Vec::with_capacity(path.len());
    out.push(start);
    for (i, &z) in path[1..].iter().enumerate() {
        let roots = local.roots(z)?;
        let prev = *out.last().unwrap();
        let next = if i == 0 { Some(roots[nearest(&roots, prev)]) } else { continue_branch(&roots, prev) };
        match next {
            Some(w) => out.push(w),
            None => return Ok(None),
        }
    }
    Ok(Some(out))
}

fn radial(from: C64, to: C64) -> Vec<C64> {
    (0..=RADIAL_STEPS).map(|j| from + (to - from) * (j as f64 / RADIAL_STEPS as f64)).collect()
}

/// Lifts a closed polygon at level `k-1` to the component containing the
/// lift of `anchor`. Loops around until the lift closes, so the result
/// traces the boundary of the component once and has `m` times the
/// vertices, `m` being the degree on the component.
pub fn lift_polygon(
    local: &LocalMap,
    poly: &[C64],
    anchor: C64,
    anchor_lift: C64,
    max_loops: usize,
) -> Result<Option<(Vec<C64>, usize)>> {
    let n = poly.len();
    let start = (0..n)
        .min_by(|&a, &b| (poly[a] - anchor).norm().total_cmp(&(poly[b] - anchor).norm()))
        .unwrap();
    let Some(ray) = lift_path(local, &radial(anchor, poly[start]), anchor_lift)? else {
        return Ok(None);
    };
    let first = *ray.last().unwrap();
    let start_roots = local.roots(poly[start])?;
    let first_idx = nearest(&start_roots, first);
    let mut out = vec![first];
    for loops in 1..=max_loops {
        for step in 1..=n {
            let z = poly[(start + step) % n];
            let Some(w) = continue_branch(&local.roots(z)?, *out.last().unwrap()) else {
                return Ok(None);
            };
            if step == n {
                if nearest(&start_roots, w) == first_idx {
                    return Ok(Some((out, loops)));
                }
            }
            out.push(w);
        }
    }
    // more loops than the degree allows: the continuation went wrong
    Ok(None)
}

fn nearest(roots: &[C64], w: C64) -> usize {
    (0..roots.len()).min_by(|&a, &b| (roots[a] - w).norm().total_cmp(&(roots[b] - w).norm())).unwrap()
}

/// Thins an oversampled polygon so consecutive kept vertices are at least
/// `perimeter / target` apart.
fn decimate(poly: Vec<C64>, target: usize) -> Vec<C64> {
    if 2 * poly.len() <= 3 * target {
        return poly;
    }
    let perimeter: f64 = (0..poly.len()).map(|i| (poly[(i + 1) % poly.len()] - poly[i]).norm()).sum();
    let spacing = perimeter / target as f64;
    let mut out = vec![poly[0]];
    for &p in &poly[1..] {
        if (p - *out.last().unwrap()).norm() >= spacing {
            out.push(p);
        }
    }
    out
}

/// Level-by-level polygons of a pulled-back region. `levels[k]` is in
/// offsets from `centers[k]`.
#[derive(Debug, Clone)]
pub struct ChainRun {
    pub levels: Vec<Vec<C64>>,
    pub wraps: Vec<usize>,
    pub vertices: usize,
    /// Levels `0..=reached` are valid; `reached < requested` means the
    /// continuation stayed ambiguous at `reached + 1` even at the vertex cap.
    pub reached: usize,
    pub complete: bool,
}

/// Pulls back the polygon `circle(v)` (offsets from `centers[0]`) through
/// `depth` levels. `anchors[k]` is a point known to lie in the level-`k`
/// component.
pub fn run_chain(
    f: &RationalMap,
    centers: &[C64],
    anchors: &[C64],
    depth: usize,
    start: usize,
    circle: impl Fn(usize) -> Vec<C64>,
) -> Result<ChainRun> {
    assert!(centers.len() > depth && anchors.len() > depth);
    let locals: Vec<LocalMap> = (1..=depth).map(|k| LocalMap::new(f, centers[k])).collect::<Result<_>>()?;
    let mut v = start.clamp(8, MAX_VERTICES);
    let mut best: Option<ChainRun> = None;
    while v <= MAX_VERTICES {
        let mut levels = vec![circle(v)];
        let mut wraps = vec![1];
        let mut ok = true;
        for k in 1..=depth {
            let prev = levels.last().unwrap();
            match lift_polygon(&locals[k - 1], prev, anchors[k - 1], anchors[k], f.degree())? {
                Some((poly, m)) if poly.len() <= MAX_VERTICES => {
                    levels.push(decimate(poly, v));
                    wraps.push(m);
                }
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        let reached = levels.len() - 1;
        let run = ChainRun { levels, wraps, vertices: v, reached, complete: ok };
        if ok {
            return Ok(run);
        }
        if best.as_ref().map_or(true, |b| run.reached > b.reached) {
            best = Some(run);
        }
        v *= 2;
    }
    Ok(best.expect("at least one attempt"))
}

/// Offsets of a chordal circle of radius `r` about `center`, relative to
/// `center`.
pub fn circle_offsets(center: C64, r: f64, count: usize) -> Vec<C64> {
    crate::sphere::chordal_circle(center, r, count).into_iter().map(|p| p - center).collect()
}

/// Offsets of a Euclidean circle of radius `r` about `center`, relative to
/// `origin`.
pub fn euclid_circle(origin: C64, center: C64, r: f64, count: usize) -> Vec<C64> {
    (0..count)
        .map(|k| center - origin + C64::from_polar(r, std::f64::consts::TAU * k as f64 / count as f64))
        .collect()
}

/// Winding number of a closed polygon around `p`.
pub fn winding_number(poly: &[C64], p: C64) -> i32 {
    let n = poly.len();
    let mut w = 0;
    for i in 0..n {
        let a = poly[i] - p;
        let b = poly[(i + 1) % n] - p;
        let cross = a.re * b.im - a.im * b.re;
        if a.im <= 0.0 {
            if b.im > 0.0 && cross > 0.0 {
                w += 1;
            }
        } else if b.im <= 0.0 && cross < 0.0 {
            w -= 1;
        }
    }
    w
}

/// Euclidean distance from `p` to the polygon's edges.
pub fn dist_to_polygon(poly: &[C64], p: C64) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let a = poly[i];
            let b = poly[(i + 1) % n];
            let ab = b - a;
            let t = if ab.norm_sqr() > 0.0 { ((p - a) * ab.conj()).re / ab.norm_sqr() } else { 0.0 };
            (a + ab * t.clamp(0.0, 1.0) - p).norm()
        })
        .fold(f64::INFINITY, f64::min)
}

fn convex_hull(points: &[C64]) -> Vec<C64> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: C64, a: C64, b: C64| (a.re - o.re) * (b.im - o.im) - (a.im - o.im) * (b.re - o.re);
    let mut lower: Vec<C64> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<C64> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Chordal diameter of the vertex set `center + poly`.
pub fn chordal_diameter(center: C64, poly: &[C64]) -> f64 {
    let hull = convex_hull(poly);
    let sq: Vec<f64> = hull.iter().map(|&o| 1.0 + (center + o).norm_sqr()).collect();
    let mut best: f64 = 0.0;
    for i in 0..hull.len() {
        for j in i + 1..hull.len() {
            best = best.max(2.0 * (hull[i] - hull[j]).norm() / (sq[i] * sq[j]).sqrt());
        }
    }
    best
}

/// Largest Euclidean radius `rho` with `B(y, rho)` inside the chordal ball
/// `B_chi(y, r)`.
pub fn euclid_inner_radius(y: C64, r: f64) -> f64 {
    let ny = y.norm();
    let worst = |rho: f64| {
        let m = (ny - rho).max(0.0);
        2.0 * rho / ((1.0 + ny * ny) * (1.0 + m * m)).sqrt()
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    while worst(hi) < r && hi < 1e12 {
        hi *= 2.0;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if worst(mid) < r {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn taylor_shift_matches_direct_expansion() {
        // (z)^3 about 2: 8 + 12h + 6h^2 + h^3
        let p = Poly::from_real(&[0.0, 0.0, 0.0, 1.0]);
        let t = taylor(&p, c(2.0, 0.0), 4);
        assert_eq!(t, vec![c(8.0, 0.0), c(12.0, 0.0), c(6.0, 0.0), c(1.0, 0.0)]);
    }

    #[test]
    fn local_roots_solve_the_offset_equation() {
        let f = RationalMap::new(vec![c(1.0, 0.5), c(0.0, 0.0), c(2.0, 0.0)], vec![c(1.0, 0.0), c(0.0, 1.0)]).unwrap();
        let center = c(0.3, -0.4);
        let local = LocalMap::new(&f, center).unwrap();
        let fc = f.eval_c(center).as_finite().unwrap();
        let zeta = c(1e-3, 2e-3);
        for &h in local.roots(zeta).unwrap().iter() {
            let v = f.eval_c(center + h).as_finite().unwrap() - fc;
            assert!((v - zeta).norm() < 1e-9, "h = {h}");
            assert!((local.image(h) - zeta).norm() < 1e-12);
        }
    }

    #[test]
    fn tiny_offsets_keep_relative_precision() {
        let f = RationalMap::quadratic(c(0.0, 1.0));
        let center = c(0.7, 0.2);
        let local = LocalMap::new(&f, center).unwrap();
        let zeta = c(3e-40, -1e-40);
        let h = continue_branch(&local.roots(zeta).unwrap(), c(0.0, 0.0)).unwrap();
        let expect = zeta / (2.0 * center);
        assert!((h - expect).norm() <= 1e-12 * expect.norm());
    }

    #[test]
    fn winding_and_distance_on_a_square() {
        let sq = vec![c(0.0, 0.0), c(1.0, 0.0), c(1.0, 1.0), c(0.0, 1.0)];
        assert_eq!(winding_number(&sq, c(0.5, 0.5)), 1);
        assert_eq!(winding_number(&sq, c(1.5, 0.5)), 0);
        assert!((dist_to_polygon(&sq, c(0.5, 0.25)) - 0.25).abs() < 1e-15);
        let diam = chordal_diameter(c(0.0, 0.0), &sq);
        let want = crate::sphere::chordal_finite(c(1.0, 0.0), c(0.0, 1.0))
            .max(crate::sphere::chordal_finite(c(0.0, 0.0), c(1.0, 1.0)));
        assert!((diam - want).abs() < 1e-15);
    }

    #[test]
    fn inner_radius_fits_inside_the_chordal_ball() {
        for y in [c(0.0, 0.0), c(2.0, 0.0), c(-0.5, 1.5)] {
            let rho = euclid_inner_radius(y, 0.05);
            let worst = (0..360)
                .map(|k| crate::sphere::chordal_finite(y, y + C64::from_polar(rho, k as f64 * 0.01745)))
                .fold(0.0, f64::max);
            assert!(worst <= 0.05 + 1e-12 && worst > 0.0499);
        }
    }
}
