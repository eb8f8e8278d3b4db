//! Dense complex polynomials and a simultaneous-iteration root finder.
//!
//! Coefficients are stored in ascending degree. The solver is the
//! Aberth-Ehrlich method with Cauchy-bound initial guesses, followed by a
//! Newton polish; degrees in this crate are tiny so the O(n^2) step is fine.

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

const MAX_ITER: usize = 500;

#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    coeffs: Vec<C64>,
}

impl Poly {
    /// Builds a polynomial and strips exact trailing zeros.
    pub fn new(mut coeffs: Vec<C64>) -> Self {
        while coeffs.len() > 1 && coeffs.last().map_or(false, |c| *c == C64::new(0.0, 0.0)) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(C64::new(0.0, 0.0));
        }
        Poly { coeffs }
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        Poly::new(coeffs.iter().map(|&c| C64::new(c, 0.0)).collect())
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0] == C64::new(0.0, 0.0)
    }

    pub fn leading(&self) -> C64 {
        *self.coeffs.last().unwrap()
    }

    pub fn eval(&self, z: C64) -> C64 {
        self.coeffs.iter().rev().fold(C64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    /// Value and first derivative by Horner.
    pub fn eval_with_deriv(&self, z: C64) -> (C64, C64) {
        let mut p = C64::new(0.0, 0.0);
        let mut dp = C64::new(0.0, 0.0);
        for &c in self.coeffs.iter().rev() {
            dp = dp * z + p;
            p = p * z + c;
        }
        (p, dp)
    }

    pub fn derivative(&self) -> Poly {
        if self.coeffs.len() <= 1 {
            return Poly::new(vec![C64::new(0.0, 0.0)]);
        }
        Poly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| c * k as f64)
                .collect(),
        )
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = vec![C64::new(0.0, 0.0); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        let n = self.coeffs.len().max(other.coeffs.len());
        let out = (0..n)
            .map(|k| {
                self.coeffs.get(k).copied().unwrap_or_default()
                    - other.coeffs.get(k).copied().unwrap_or_default()
            })
            .collect();
        Poly::new(out)
    }

    /// Drops trailing coefficients that are negligible relative to the
    /// largest one. Used before root finding on polynomials assembled from
    /// floating point arithmetic.
    pub fn trimmed(&self, rel_tol: f64) -> Poly {
        let scale = self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let mut c = self.coeffs.clone();
        while c.len() > 1 && c.last().unwrap().norm() <= rel_tol * scale {
            c.pop();
        }
        Poly::new(c)
    }

    /// All complex roots with multiplicity.
    pub fn roots(&self) -> Result<Vec<C64>> {
        let n = self.degree();
        if self.is_zero() {
            return Err(Error::RootFinder {
                coeffs: self.coeffs.clone(),
                reason: "zero polynomial".into(),
            });
        }
        match n {
            0 => Ok(Vec::new()),
            1 => Ok(vec![-self.coeffs[0] / self.coeffs[1]]),
            2 => Ok(quadratic_roots(self.coeffs[0], self.coeffs[1], self.coeffs[2]).to_vec()),
            _ => aberth(self),
        }
    }
}

/// Roots of a + b z + c z^2 using the cancellation-free form.
pub fn quadratic_roots(a: C64, b: C64, c: C64) -> [C64; 2] {
    let disc = fast_sqrt(b * b - 4.0 * a * c);
    // pick the sign that avoids cancellation in -b -/+ disc
    let q = if (b.conj() * disc).re >= 0.0 {
        -0.5 * (b + disc)
    } else {
        -0.5 * (b - disc)
    };
    if q == C64::new(0.0, 0.0) {
        // b = 0 and a = 0: double root at the origin
        return [C64::new(0.0, 0.0); 2];
    }
    [q / c, a / q]
}

/// Principal square root without the polar round trip.
fn fast_sqrt(z: C64) -> C64 {
    if z.im == 0.0 {
        return if z.re >= 0.0 { C64::new(z.re.sqrt(), 0.0) } else { C64::new(0.0, (-z.re).sqrt()) };
    }
    let t = (0.5 * (z.norm() + z.re.abs())).sqrt();
    if z.re >= 0.0 {
        C64::new(t, z.im / (2.0 * t))
    } else {
        C64::new(z.im.abs() / (2.0 * t), t.copysign(z.im))
    }
}

fn aberth(p: &Poly) -> Result<Vec<C64>> {
    let n = p.degree();
    let lead = p.leading();
    let monic: Vec<C64> = p.coeffs.iter().map(|c| c / lead).collect();
    let monic = Poly { coeffs: monic };
    // Cauchy upper bound on root moduli
    let bound = 1.0
        + monic.coeffs[..n]
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max);
    let radius = bound.min(1e6) * 0.5;
    let mut z: Vec<C64> = (0..n)
        .map(|k| {
            let theta = 2.0 * std::f64::consts::PI * (k as f64 + 0.25) / n as f64 + 0.4;
            C64::from_polar(radius, theta)
        })
        .collect();

    let scale = monic.coeffs.iter().map(|c| c.norm()).sum::<f64>();
    let mut converged = false;
    for _ in 0..MAX_ITER {
        let mut max_step: f64 = 0.0;
        for i in 0..n {
            let (pv, dpv) = monic.eval_with_deriv(z[i]);
            if pv.norm() <= f64::EPSILON * scale * (1.0 + z[i].norm()).powi(n as i32) {
                continue;
            }
            let ratio = pv / dpv;
            let sum: C64 = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let d = z[i] - z[j];
                    if d == C64::new(0.0, 0.0) {
                        C64::new(0.0, 0.0)
                    } else {
                        d.inv()
                    }
                })
                .sum();
            let denom = C64::new(1.0, 0.0) - ratio * sum;
            let step = if denom.norm() > 0.0 && denom.is_finite() {
                ratio / denom
            } else {
                ratio
            };
            if step.is_finite() {
                z[i] -= step;
                max_step = max_step.max(step.norm() / (1.0 + z[i].norm()));
            }
        }
        if max_step < 1e-15 {
            converged = true;
            break;
        }
    }
    if z.iter().any(|r| !r.is_finite()) {
        return Err(Error::RootFinder {
            coeffs: p.coeffs.clone(),
            reason: "non-finite iterate".into(),
        });
    }
    if !converged {
        // multiple roots converge linearly; accept if residuals are small
        let ok = z.iter().all(|&r| {
            monic.eval(r).norm() <= 1e-8 * scale * (1.0 + r.norm()).powi(n as i32)
        });
        if !ok {
            return Err(Error::RootFinder {
                coeffs: p.coeffs.clone(),
                reason: format!("no convergence after {MAX_ITER} Aberth sweeps"),
            });
        }
    }
    Ok(z)
}

/// Groups roots closer than `tol` (relative to 1 + |root|) and returns each
/// cluster's mean with its size.
pub fn cluster_roots(roots: &[C64], tol: f64) -> Vec<(C64, usize)> {
    let mut used = vec![false; roots.len()];
    let mut out = Vec::new();
    for i in 0..roots.len() {
        if used[i] {
            continue;
        }
        used[i] = true;
        let mut members = vec![roots[i]];
        // transitive closure so that a chain of near-equal roots is one cluster
        let mut k = 0;
        while k < members.len() {
            let m = members[k];
            for j in 0..roots.len() {
                if !used[j] && (roots[j] - m).norm() <= tol * (1.0 + m.norm()) {
                    used[j] = true;
                    members.push(roots[j]);
                }
            }
            k += 1;
        }
        let mean = members.iter().sum::<C64>() / members.len() as f64;
        out.push((mean, members.len()));
    }
    out
}
