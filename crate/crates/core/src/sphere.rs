//! Points and rational maps on the Riemann sphere.
//!
//! Distances are chordal: `chi(z, w) = 2|z - w| / sqrt((1 + |z|^2)(1 + |w|^2))`,
//! so the sphere has diameter 2. Maps are evaluated in homogeneous
//! coordinates with two affine charts (around 0 and around infinity), which
//! makes poles and the point at infinity ordinary cases.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{cluster_roots, Poly, C64};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SpherePoint {
    Finite(Complex64),
    Infinity,
}

impl SpherePoint {
    /// Rejects NaN. Non-finite magnitudes collapse to the single infinity.
    pub fn new(z: Complex64) -> Result<Self> {
        if z.re.is_nan() || z.im.is_nan() {
            return Err(Error::InvalidPoint(format!("{z} has a NaN component")));
        }
        Ok(Self::from_complex(z))
    }

    /// Like [`SpherePoint::new`] but maps NaN to infinity; used on arithmetic
    /// results where NaN can only come from inf/inf.
    pub fn from_complex(z: Complex64) -> Self {
        if z.is_finite() {
            SpherePoint::Finite(z)
        } else {
            SpherePoint::Infinity
        }
    }

    pub fn finite(re: f64, im: f64) -> Self {
        Self::from_complex(Complex64::new(re, im))
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, SpherePoint::Infinity)
    }

    pub fn as_finite(&self) -> Option<Complex64> {
        match *self {
            SpherePoint::Finite(z) => Some(z),
            SpherePoint::Infinity => None,
        }
    }
}

impl From<Complex64> for SpherePoint {
    fn from(z: Complex64) -> Self {
        Self::from_complex(z)
    }
}

impl fmt::Display for SpherePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpherePoint::Finite(z) => write!(f, "{}{:+}i", z.re, z.im),
            SpherePoint::Infinity => write!(f, "inf"),
        }
    }
}

pub fn chordal_dist(a: SpherePoint, b: SpherePoint) -> f64 {
    match (a, b) {
        (SpherePoint::Infinity, SpherePoint::Infinity) => 0.0,
        (SpherePoint::Finite(z), SpherePoint::Infinity) | (SpherePoint::Infinity, SpherePoint::Finite(z)) => {
            2.0 / (1.0 + z.norm_sqr()).sqrt()
        }
        (SpherePoint::Finite(z), SpherePoint::Finite(w)) => chordal_finite(z, w),
    }
}

#[inline]
pub fn chordal_finite(z: C64, w: C64) -> f64 {
    // for huge arguments pass through the inverted chart to avoid overflow
    if z.norm_sqr() > 1e150 || w.norm_sqr() > 1e150 {
        let (zi, wi) = (inv_or_zero(z), inv_or_zero(w));
        return 2.0 * (zi - wi).norm() / ((1.0 + zi.norm_sqr()) * (1.0 + wi.norm_sqr())).sqrt();
    }
    2.0 * (z - w).norm() / ((1.0 + z.norm_sqr()) * (1.0 + w.norm_sqr())).sqrt()
}

fn inv_or_zero(z: C64) -> C64 {
    if z == C64::new(0.0, 0.0) {
        C64::new(f64::INFINITY, 0.0)
    } else {
        z.inv()
    }
}

/// `count` points on the chordal circle of radius `r` around the finite
/// point `center`, obtained by rotating a circle about 0 with the isometry
/// `w -> (w + c) / (1 - conj(c) w)`.
pub fn chordal_circle(center: C64, r: f64, count: usize) -> Vec<C64> {
    let r = r.min(1.999_999);
    let rho = r / (4.0 - r * r).sqrt();
    (0..count)
        .map(|k| {
            let w = C64::from_polar(rho, 2.0 * std::f64::consts::PI * k as f64 / count as f64);
            (w + center) / (C64::new(1.0, 0.0) - center.conj() * w)
        })
        .collect()
}

/// A rational map `P / Q` of degree at least two.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalMap {
    numer: Poly,
    denom: Poly,
    degree: usize,
    // homogeneous forms in the chart t = 1/z, padded to degree
    numer_inf: Poly,
    denom_inf: Poly,
}

/// Which affine chart a point is evaluated in.
#[derive(Debug, Clone, Copy)]
enum Chart {
    Zero(C64),
    Inf(C64),
}

impl RationalMap {
    pub fn new(numer: Vec<C64>, denom: Vec<C64>) -> Result<Self> {
        let numer = Poly::new(numer);
        let denom = Poly::new(denom);
        if numer.is_zero() || denom.is_zero() {
            return Err(Error::InvalidMap("numerator and denominator must be nonzero".into()));
        }
        let degree = numer.degree().max(denom.degree());
        if degree < 2 {
            return Err(Error::InvalidMap(format!("degree {degree} < 2")));
        }
        let map = RationalMap {
            numer_inf: reversed_padded(&numer, degree),
            denom_inf: reversed_padded(&denom, degree),
            numer,
            denom,
            degree,
        };
        map.check_coprime()?;
        Ok(map)
    }

    pub fn polynomial(coeffs: Vec<C64>) -> Result<Self> {
        Self::new(coeffs, vec![C64::new(1.0, 0.0)])
    }

    /// `z^2 + c`.
    pub fn quadratic(c: C64) -> Self {
        Self::polynomial(vec![c, C64::new(0.0, 0.0), C64::new(1.0, 0.0)])
            .expect("z^2 + c is a valid degree-2 map")
    }

    fn check_coprime(&self) -> Result<()> {
        let (small, other) = if self.numer.degree() <= self.denom.degree() {
            (&self.numer, &self.denom)
        } else {
            (&self.denom, &self.numer)
        };
        if small.degree() == 0 {
            return Ok(());
        }
        let scale = other.coeffs().iter().map(|c| c.norm()).sum::<f64>();
        for r in small.roots()? {
            let v = other.eval(r).norm();
            let size = (1.0 + r.norm()).powi(other.degree() as i32);
            if v <= 1e-9 * scale * size {
                return Err(Error::InvalidMap(format!(
                    "numerator and denominator share the root {r}"
                )));
            }
        }
        Ok(())
    }

    pub fn numer(&self) -> &Poly {
        &self.numer
    }

    pub fn denom(&self) -> &Poly {
        &self.denom
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn is_polynomial(&self) -> bool {
        self.denom.degree() == 0
    }

    fn chart(z: SpherePoint) -> Chart {
        match z {
            SpherePoint::Infinity => Chart::Inf(C64::new(0.0, 0.0)),
            SpherePoint::Finite(w) if w.norm_sqr() <= 1.0 => Chart::Zero(w),
            SpherePoint::Finite(w) => Chart::Inf(w.inv()),
        }
    }

    /// Homogeneous values (A, B) and their derivatives in the chart variable.
    #[inline]
    fn chart_values(&self, chart: Chart) -> (C64, C64, C64, C64, C64) {
        let (t, a, b) = match chart {
            Chart::Zero(t) => (t, &self.numer, &self.denom),
            Chart::Inf(t) => (t, &self.numer_inf, &self.denom_inf),
        };
        let (av, ad) = a.eval_with_deriv(t);
        let (bv, bd) = b.eval_with_deriv(t);
        (t, av, ad, bv, bd)
    }

    pub fn eval(&self, z: SpherePoint) -> SpherePoint {
        let (_, a, _, b, _) = self.chart_values(Self::chart(z));
        if b == C64::new(0.0, 0.0) {
            return SpherePoint::Infinity;
        }
        SpherePoint::from_complex(a / b)
    }

    /// Evaluation on a finite point, for hot loops.
    #[inline]
    pub fn eval_c(&self, z: C64) -> SpherePoint {
        self.eval(SpherePoint::Finite(z))
    }

    /// `|f'(z)| (1 + |z|^2) / (1 + |f(z)|^2)`, valid at poles and infinity.
    pub fn spherical_deriv(&self, z: SpherePoint) -> f64 {
        let (t, a, ad, b, bd) = self.chart_values(Self::chart(z));
        let w = ad * b - a * bd;
        let denom = a.norm_sqr() + b.norm_sqr();
        w.norm() * (1.0 + t.norm_sqr()) / denom
    }

    /// Euclidean derivative at a finite non-pole point.
    pub fn deriv(&self, z: C64) -> C64 {
        let (p, dp) = self.numer.eval_with_deriv(z);
        let (q, dq) = self.denom.eval_with_deriv(z);
        (dp * q - p * dq) / (q * q)
    }

    /// Preimages of `zeta`, with multiplicity; `deg` points in total when
    /// infinity is among them.
    pub fn preimages(&self, zeta: SpherePoint) -> Result<Vec<SpherePoint>> {
        let eq = match zeta {
            SpherePoint::Infinity => self.denom.clone(),
            SpherePoint::Finite(v) => {
                let scaled = Poly::new(self.denom.coeffs().iter().map(|c| c * v).collect());
                self.numer.sub(&scaled)
            }
        };
        let eq = eq.trimmed(1e-14);
        let mut out: Vec<SpherePoint> = eq.roots()?.into_iter().map(SpherePoint::from).collect();
        while out.len() < self.degree {
            out.push(SpherePoint::Infinity);
        }
        Ok(out)
    }

    /// Finite preimages of a finite value; the fast path used by the
    /// pullback engine. Degree-two maps use the closed form.
    pub fn preimages_c(&self, zeta: C64) -> Result<Vec<C64>> {
        let p = self.numer.coeffs();
        let q = self.denom.coeffs();
        if self.degree == 2 {
            let get = |v: &[C64], k: usize| v.get(k).copied().unwrap_or_default();
            let a = get(p, 0) - zeta * get(q, 0);
            let b = get(p, 1) - zeta * get(q, 1);
            let c = get(p, 2) - zeta * get(q, 2);
            let scale = a.norm() + b.norm() + c.norm();
            if c.norm() > 1e-14 * scale {
                return Ok(crate::poly::quadratic_roots(a, b, c).to_vec());
            }
        }
        Ok(self
            .preimages(SpherePoint::Finite(zeta))?
            .into_iter()
            .filter_map(|w| w.as_finite())
            .collect())
    }

    /// The Wronskian `P'Q - PQ'`, whose roots are the finite critical points.
    pub fn wronskian(&self) -> Poly {
        self.numer
            .derivative()
            .mul(&self.denom)
            .sub(&self.numer.mul(&self.denom.derivative()))
            .trimmed(1e-13)
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &RationalMap) -> Result<RationalMap> {
        let d = self.degree;
        let p = &inner.numer;
        let q = &inner.denom;
        let homog = |coeffs: &[C64]| -> Poly {
            let mut acc = Poly::new(vec![C64::new(0.0, 0.0)]);
            for (k, &a) in coeffs.iter().enumerate() {
                let mut term = Poly::new(vec![a]);
                for _ in 0..k {
                    term = term.mul(p);
                }
                for _ in k..d {
                    term = term.mul(q);
                }
                acc = acc.sub(&Poly::new(term.coeffs().iter().map(|c| -c).collect()));
            }
            acc
        };
        RationalMap::new(
            homog(self.numer.coeffs()).coeffs().to_vec(),
            homog(self.denom.coeffs()).coeffs().to_vec(),
        )
    }

    pub fn critical_points(&self, cluster_tol: f64) -> Result<Vec<(SpherePoint, u32)>> {
        let w = self.wronskian();
        let mut out: Vec<(SpherePoint, u32)> = if w.degree() == 0 {
            Vec::new()
        } else {
            cluster_roots(&w.roots()?, cluster_tol)
                .into_iter()
                .map(|(z, m)| (SpherePoint::Finite(z), m as u32 + 1))
                .collect()
        };
        let at_inf = (2 * self.degree - 2).saturating_sub(w.degree());
        if at_inf > 0 {
            out.push((SpherePoint::Infinity, at_inf as u32 + 1));
        }
        let total: u32 = out.iter().map(|(_, d)| d - 1).sum();
        if total as usize != 2 * self.degree - 2 {
            return Err(Error::RootFinder {
                coeffs: w.coeffs().to_vec(),
                reason: format!(
                    "critical multiplicities sum to {total}, expected {}",
                    2 * self.degree - 2
                ),
            });
        }
        Ok(out)
    }
}

fn reversed_padded(p: &Poly, degree: usize) -> Poly {
    let mut c = vec![C64::new(0.0, 0.0); degree + 1];
    for (k, &a) in p.coeffs().iter().enumerate() {
        c[degree - k] = a;
    }
    Poly::new(c)
}

#[derive(Debug, Clone, Serialize)]
pub struct CriticalPoint {
    pub point: SpherePoint,
    pub local_degree: u32,
    pub in_julia: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CriticalSet {
    pub points: Vec<CriticalPoint>,
    pub nu: u32,
}

impl CriticalSet {
    pub fn in_julia(&self) -> impl Iterator<Item = &CriticalPoint> {
        self.points.iter().filter(|c| c.in_julia)
    }

    pub fn julia_count(&self) -> usize {
        self.in_julia().count()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CriticalConfig {
    /// Multiplicity clustering tolerance for Wronskian roots.
    pub cluster_tol: f64,
    /// Chordal distance to the Julia sample below which a point counts as near J.
    pub julia_tol: f64,
    /// Iterates before looking for an attracting cycle.
    pub attraction_iters: usize,
    /// Orbit length scanned for critical collisions when computing nu.
    pub nu_steps: usize,
    /// Chordal tolerance for a numerical critical collision.
    pub collision_tol: f64,
}

impl Default for CriticalConfig {
    fn default() -> Self {
        CriticalConfig {
            cluster_tol: 1e-6,
            julia_tol: 1e-3,
            attraction_iters: 200,
            nu_steps: 200,
            collision_tol: 1e-9,
        }
    }
}

/// Critical points with local degrees, their Julia-set membership and nu.
pub fn critical_set(
    f: &RationalMap,
    julia_sample: &[SpherePoint],
    cfg: &CriticalConfig,
) -> Result<CriticalSet> {
    if julia_sample.is_empty() {
        return Err(Error::InvalidArgument("empty Julia sample".into()));
    }
    let crit = f.critical_points(cfg.cluster_tol)?;
    let mut points = Vec::with_capacity(crit.len());
    for &(c, d) in &crit {
        let near = julia_sample
            .iter()
            .any(|&p| chordal_dist(p, c) < cfg.julia_tol);
        let in_julia = near && attracting_cycle(f, c, cfg.attraction_iters).is_none();
        points.push(CriticalPoint { point: c, local_degree: d, in_julia });
    }

    let max_local = points.iter().map(|c| c.local_degree).max().unwrap_or(1);
    let mut nu = max_local;
    for (i, c) in points.iter().enumerate().filter(|(_, c)| c.in_julia) {
        let mut visited = vec![false; points.len()];
        visited[i] = true;
        let mut product = c.local_degree;
        let mut z = c.point;
        for _ in 0..cfg.nu_steps {
            z = f.eval(z);
            let hit = points
                .iter()
                .position(|other| chordal_dist(other.point, z) < cfg.collision_tol);
            if let Some(j) = hit {
                if visited[j] {
                    break;
                }
                visited[j] = true;
                product = product.saturating_mul(points[j].local_degree);
            }
        }
        nu = nu.max(product);
    }
    Ok(CriticalSet { points, nu })
}

/// If the orbit of `z` settles on an attracting cycle within `iters`
/// iterates, returns its period and |multiplier|.
pub fn attracting_cycle(f: &RationalMap, z: SpherePoint, iters: usize) -> Option<(usize, f64)> {
    let mut w = z;
    for _ in 0..iters {
        w = f.eval(w);
    }
    let mut v = w;
    let mut multiplier = 1.0;
    for p in 1..=64 {
        multiplier *= f.spherical_deriv(v);
        v = f.eval(v);
        if chordal_dist(v, w) < 1e-6 {
            return (multiplier < 1.0).then_some((p, multiplier));
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn pt(re: f64, im: f64) -> SpherePoint {
        SpherePoint::finite(re, im)
    }

    #[test]
    fn chordal_examples() {
        assert!((chordal_dist(pt(0.0, 0.0), SpherePoint::Infinity) - 2.0).abs() < 1e-15);
        assert_eq!(chordal_dist(pt(0.0, 0.0), pt(0.0, 0.0)), 0.0);
        assert!((chordal_dist(pt(1.0, 0.0), pt(-1.0, 0.0)) - 2.0).abs() < 1e-15);
        assert_eq!(chordal_dist(SpherePoint::Infinity, SpherePoint::Infinity), 0.0);
    }

    #[test]
    fn nan_rejected_and_infinity_canonical() {
        assert!(SpherePoint::new(c(f64::NAN, 0.0)).is_err());
        assert_eq!(SpherePoint::from_complex(c(f64::INFINITY, 1.0)), SpherePoint::Infinity);
        assert_eq!(SpherePoint::from_complex(c(0.0, f64::NEG_INFINITY)), SpherePoint::Infinity);
    }

    #[test]
    fn eval_examples() {
        let f = RationalMap::quadratic(c(-2.0, 0.0));
        assert_eq!(f.eval(pt(0.0, 0.0)), pt(-2.0, 0.0));
        assert_eq!(f.eval(SpherePoint::Infinity), SpherePoint::Infinity);
        let g = RationalMap::new(vec![c(1.0, 0.0)], vec![c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert_eq!(g.eval(pt(0.0, 0.0)), SpherePoint::Infinity);
        assert_eq!(g.eval(SpherePoint::Infinity), pt(0.0, 0.0));
        // evaluation through the inverted chart
        let big = g.eval(pt(10.0, 0.0)).as_finite().unwrap();
        assert!((big - c(0.01, 0.0)).norm() < 1e-16);
    }

    #[test]
    fn spherical_deriv_examples() {
        // degree-1 maps are rejected, so the identity is not constructible
        assert!(RationalMap::new(vec![c(0.0, 0.0), c(1.0, 0.0)], vec![c(1.0, 0.0)]).is_err());
        let f = RationalMap::quadratic(c(-2.0, 0.0));
        assert!((f.spherical_deriv(pt(-2.0, 0.0)) - 4.0).abs() < 1e-14);
        let sq = RationalMap::quadratic(c(0.0, 0.0));
        assert_eq!(sq.spherical_deriv(pt(0.0, 0.0)), 0.0);
        assert_eq!(sq.spherical_deriv(SpherePoint::Infinity), 0.0);
        // on the unit circle z^2 is a chordal isometry times 2
        assert!((sq.spherical_deriv(pt(0.6, 0.8)) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn invalid_maps() {
        assert!(RationalMap::polynomial(vec![c(1.0, 0.0), c(1.0, 0.0)]).is_err());
        // (z - 1)(z + 1) / (z - 1)
        let err = RationalMap::new(
            vec![c(-1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)],
            vec![c(-1.0, 0.0), c(1.0, 0.0)],
        );
        assert!(matches!(err, Err(Error::InvalidMap(_))));
    }

    #[test]
    fn critical_points_quadratic_family() {
        let f = RationalMap::quadratic(c(0.3, -0.2));
        let cps = f.critical_points(1e-6).unwrap();
        assert_eq!(cps.len(), 2);
        assert!(cps.contains(&(pt(0.0, 0.0), 2)));
        assert!(cps.contains(&(SpherePoint::Infinity, 2)));
    }

    #[test]
    fn critical_points_of_pole_map() {
        let g = RationalMap::new(vec![c(1.0, 0.0)], vec![c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        let cps = g.critical_points(1e-6).unwrap();
        assert_eq!(cps.len(), 2);
        assert!(cps.iter().all(|(_, d)| *d == 2));
    }

    #[test]
    fn riemann_hurwitz_cubic_with_double_critical() {
        // z^3 + 0.5: critical point 0 of local degree 3, infinity of local degree 3
        let f = RationalMap::polynomial(vec![c(0.5, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        let cps = f.critical_points(1e-6).unwrap();
        let total: u32 = cps.iter().map(|(_, d)| d - 1).sum();
        assert_eq!(total, 4);
        assert!(cps.iter().any(|(p, d)| *p == pt(0.0, 0.0) && *d == 3));
    }

    #[test]
    fn critical_set_chebyshev() {
        let f = RationalMap::quadratic(c(-2.0, 0.0));
        let sample: Vec<SpherePoint> = (0..=4000).map(|k| pt(-2.0 + k as f64 * 1e-3, 0.0)).collect();
        let cs = critical_set(&f, &sample, &CriticalConfig::default()).unwrap();
        let zero = cs.points.iter().find(|p| p.point == pt(0.0, 0.0)).unwrap();
        let inf = cs.points.iter().find(|p| p.point.is_infinite()).unwrap();
        assert!(zero.in_julia);
        assert!(!inf.in_julia);
        assert_eq!(cs.nu, 2);
        assert_eq!(cs.julia_count(), 1);
    }

    #[test]
    fn basilica_critical_point_is_attracted() {
        let f = RationalMap::quadratic(c(-1.0, 0.0));
        let sample = vec![pt(0.0, 0.0)];
        let cs = critical_set(&f, &sample, &CriticalConfig::default()).unwrap();
        assert!(cs.points.iter().all(|p| !p.in_julia));
        assert_eq!(attracting_cycle(&f, pt(0.0, 0.0), 200).unwrap().0, 2);
    }

    #[test]
    fn preimages_cover_degree() {
        let f = RationalMap::new(
            vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(2.0, 0.0)],
            vec![c(0.0, 1.0), c(1.0, 0.0)],
        )
        .unwrap();
        let pre = f.preimages(pt(0.3, 0.4)).unwrap();
        assert_eq!(pre.len(), 3);
        for w in pre {
            assert!(chordal_dist(f.eval(w), pt(0.3, 0.4)) < 1e-12);
        }
    }

    #[test]
    fn chordal_circle_radius() {
        let center = c(0.7, -1.3);
        for z in chordal_circle(center, 0.1, 16) {
            assert!((chordal_finite(z, center) - 0.1).abs() < 1e-13);
        }
    }

    fn arb_point() -> impl Strategy<Value = SpherePoint> {
        prop_oneof![
            9 => (-5.0..5.0f64, -5.0..5.0f64).prop_map(|(a, b)| pt(a, b)),
            1 => Just(SpherePoint::Infinity),
        ]
    }

    fn arb_quadratic() -> impl Strategy<Value = RationalMap> {
        proptest::collection::vec((-2.0..2.0f64, -2.0..2.0f64), 6).prop_filter_map("valid map", |v| {
            let cs: Vec<C64> = v.iter().map(|&(a, b)| c(a, b)).collect();
            RationalMap::new(cs[..3].to_vec(), cs[3..].to_vec()).ok()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]
        #[test]
        fn chordal_triangle_inequality(a in arb_point(), b in arb_point(), x in arb_point()) {
            let ab = chordal_dist(a, b);
            prop_assert!(ab <= chordal_dist(a, x) + chordal_dist(x, b) + 1e-12);
            prop_assert!((ab - chordal_dist(b, a)).abs() < 1e-15);
            prop_assert!(ab <= 2.0 + 1e-15);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]
        #[test]
        fn spherical_chain_rule(f in arb_quadratic(), g in arb_quadratic(), z in arb_point()) {
            let fg = f.compose(&g).unwrap();
            let lhs = fg.spherical_deriv(z);
            let rhs = f.spherical_deriv(g.eval(z)) * g.spherical_deriv(z);
            prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs.max(1e-12), "lhs {} rhs {}", lhs, rhs);
        }

        #[test]
        fn mobius_factor_bounded(
            m in proptest::collection::vec((-2.0..2.0f64, -2.0..2.0f64), 4),
            z in arb_point(),
        ) {
            // f = M(z^2): the spherical derivative of M is the quotient and must lie in
            // [s_min / s_max, s_max / s_min] for the singular values of M
            let [a, b, cc, d] = [c(m[0].0, m[0].1), c(m[1].0, m[1].1), c(m[2].0, m[2].1), c(m[3].0, m[3].1)];
            let det = a * d - b * cc;
            prop_assume!(det.norm() > 0.1);
            let zero = c(0.0, 0.0);
            let f = RationalMap::new(vec![b, zero, a], vec![d, zero, cc]).unwrap();
            let sq = RationalMap::quadratic(zero);
            let s_sq = sq.spherical_deriv(z);
            prop_assume!(s_sq > 1e-6);
            let ratio = f.spherical_deriv(z) / s_sq;
            let fro = a.norm_sqr() + b.norm_sqr() + cc.norm_sqr() + d.norm_sqr();
            let dn = det.norm();
            let disc = (fro * fro - 4.0 * dn * dn).max(0.0).sqrt();
            let smax2 = (fro + disc) / 2.0;
            let smin2 = dn * dn / smax2;
            let lo = (smin2 / smax2).sqrt();
            prop_assert!(ratio >= lo * (1.0 - 1e-9) && ratio <= (1.0 + 1e-9) / lo, "ratio {} lo {}", ratio, lo);
        }
    }
}
