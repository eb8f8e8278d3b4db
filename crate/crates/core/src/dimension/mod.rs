//! Box counting, the dimension bound for box mean porous sets and the tree
//! argument behind it: properties (i) and (ii) of the box tree and the
//! measure walk that bounds the number of boxes.

mod tree;
#[cfg(test)]
mod tests;

use serde::Serialize;

pub use tree::{enumerate_admissible, enumerate_trees, max_count_dp, BoxTree};

use crate::error::{Error, Result};
use crate::porosity::DyadicOccupancy;

pub fn box_count(occ: &DyadicOccupancy, n: u32) -> Result<usize> {
    if n > occ.depth() {
        return Err(Error::InvalidArgument(format!("level {n} exceeds depth {}", occ.depth())));
    }
    Ok(occ.count(n))
}

#[derive(Debug, Clone, Serialize)]
pub struct DimensionFit {
    pub counts: Vec<(u32, usize)>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub range: (u32, u32),
    pub notice: Option<String>,
}

/// Least-squares slope of `log2 #B_n` against `n` over `n_min..=n_max`.
pub fn minkowski_fit(occ: &DyadicOccupancy, n_min: u32, n_max: u32) -> Result<DimensionFit> {
    if n_min >= n_max || n_max > occ.depth() {
        return Err(Error::InvalidArgument(format!(
            "need n_min < n_max <= depth {}, got {n_min}..{n_max}",
            occ.depth()
        )));
    }
    let counts: Vec<(u32, usize)> = (n_min..=n_max).map(|n| (n, occ.count(n))).collect();
    if counts.iter().any(|c| c.1 == 0) {
        return Err(Error::InvalidArgument("empty occupancy".into()));
    }
    let xs: Vec<f64> = counts.iter().map(|c| c.0 as f64).collect();
    let ys: Vec<f64> = counts.iter().map(|c| (c.1 as f64).log2()).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if syy == 0.0 {
        return Ok(DimensionFit {
            counts,
            slope: 0.0,
            intercept: my,
            r_squared: 1.0,
            range: (n_min, n_max),
            notice: Some("box counts are constant over the range".into()),
        });
    }
    let slope = sxy / sxx;
    Ok(DimensionFit {
        counts,
        slope,
        intercept: my - slope * mx,
        r_squared: sxy * sxy / (sxx * syy),
        range: (n_min, n_max),
        notice: None,
    })
}

/// `K = 2^{dN}` as a float.
pub fn big_k(d: u32, big_n: u32) -> f64 {
    (2.0f64).powi((d * big_n) as i32)
}

/// `alpha = 1 - (1 - log(K-1)/log K) / P` and the bound `alpha d` on the
/// Minkowski dimension.
pub fn porosity_bound(d: u32, big_n: u32, p: f64) -> Result<(f64, f64)> {
    if d < 1 || big_n < 1 || !(p >= 1.0) || d * big_n > 60 {
        return Err(Error::InvalidArgument(format!("need d, N >= 1, dN <= 60 and P >= 1, got {d}, {big_n}, {p}")));
    }
    let k = big_k(d, big_n);
    let alpha = 1.0 - (1.0 - (k - 1.0).ln() / k.ln()) / p;
    Ok((alpha, alpha * d as f64))
}

/// `(K-1)^{n/(PN)} K^{n/N - n/(PN)}`, the box-count bound without its
/// constant.
pub fn tree_formula(d: u32, big_n: u32, p: f64, n: u32) -> f64 {
    let k = big_k(d, big_n);
    let a = n as f64 / (p * big_n as f64);
    (k - 1.0).powf(a) * k.powf(n as f64 / big_n as f64 - a)
}

#[derive(Debug, Clone, Serialize)]
pub struct TreeViolation {
    pub vertex: usize,
    pub level: u32,
    pub count: usize,
    pub needed: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TreeReport {
    pub big_n: u32,
    pub p: f64,
    pub k: u64,
    pub max_n_children: usize,
    /// Vertices with more than `K` N-children.
    pub violations_i: Vec<usize>,
    /// Vertices with fewer than `level / P` sparse ancestors.
    pub violations_ii: Vec<TreeViolation>,
    pub holds_i: bool,
    pub holds_ii: bool,
}

/// Checks (i) every vertex has at most `K` N-children and (ii) every vertex
/// at level `n` has at least `n / P` ancestors with at most `K - 1`
/// N-children. Ancestors include the vertex and the root; only vertices at
/// least `N` levels above the bottom of the tree are eligible, since below
/// that their N-children are cut off.
pub fn verify_tree_properties(tree: &BoxTree, big_n: u32, p: f64) -> Result<TreeReport> {
    if big_n < 1 || !(p >= 1.0) || tree.d() * big_n > 60 {
        return Err(Error::InvalidArgument(format!("need N >= 1, P >= 1, dN <= 60; got {big_n}, {p}")));
    }
    let k = 1u64 << (tree.d() * big_n);
    let bottom = tree.depth();
    let counts: Vec<usize> = (0..tree.len()).map(|v| tree.k_children(v, big_n)).collect();
    let mut report = TreeReport {
        big_n,
        p,
        k,
        max_n_children: counts.iter().copied().max().unwrap_or(0),
        violations_i: (0..tree.len()).filter(|&v| counts[v] as u64 > k).collect(),
        violations_ii: Vec::new(),
        holds_i: true,
        holds_ii: true,
    };
    // depth-first with the number of sparse ancestors above each vertex
    let mut stack = vec![(0usize, 0usize)];
    while let Some((v, above)) = stack.pop() {
        let level = tree.level(v);
        let sparse = level + big_n <= bottom && (counts[v] as u64) < k;
        let count = above + sparse as usize;
        let needed = level as f64 / p;
        if (count as f64) < needed {
            report.violations_ii.push(TreeViolation { vertex: v, level, count, needed });
        }
        for &c in tree.children(v) {
            stack.push((c, count));
        }
    }
    report.violations_ii.sort_by_key(|t| t.vertex);
    report.holds_i = report.violations_i.is_empty();
    report.holds_ii = report.violations_ii.is_empty();
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct RamsReport {
    pub n: u32,
    pub big_n: u32,
    pub p: f64,
    pub k: u64,
    /// `#B_n`.
    pub actual: u64,
    /// `floor(N / m)` with `m = min_v max_b mu_b(v)`; `sum_v mu(v) = 1`
    /// and `mu(v) >= m / N` give `#B_n <= N / m`.
    pub bound: u64,
    pub min_max_mass: String,
    pub min_max_mass_f64: f64,
    /// Every `mu_b` sums to exactly one over `B_n`.
    pub mass_conserved: bool,
    /// `(K-1)^{n/(PN)} K^{n/N - n/(PN)}`.
    pub formula: f64,
    /// The reciprocal of the printed lower bound for `mu_b(v)`, whose
    /// exponents as printed make it exceed one.
    pub reciprocal_floor: f64,
    pub reciprocal_floor_holds: bool,
}

/// Runs the measure walk on the boxes of `tree` at levels `0..=n`. Vertices
/// without descendants at level `n` carry no mass and are left out.
pub fn rams_bound(tree: &BoxTree, big_n: u32, p: f64, n: u32) -> Result<RamsReport> {
    if big_n < 1 || n % big_n != 0 || n > tree.depth() {
        return Err(Error::InvalidArgument(format!(
            "n = {n} must be a multiple of N = {big_n} and at most the depth {}",
            tree.depth()
        )));
    }
    let report = verify_tree_properties(tree, big_n, p)?;
    if !report.holds_i || !report.holds_ii {
        return Err(Error::TreeProperties(format!(
            "{} vertices break (i), {} break (ii)",
            report.violations_i.len(),
            report.violations_ii.len()
        )));
    }
    let masses = tree.rams_masses(big_n, n);
    let mut min_max: Option<num_rational::BigRational> = None;
    let leaves = tree.vertices(n);
    for (i, _) in leaves.iter().enumerate() {
        let best = masses.iter().map(|mb| &mb.1[i]).max().unwrap().clone();
        if min_max.as_ref().map_or(true, |m| best < *m) {
            min_max = Some(best);
        }
    }
    let m = min_max.expect("level n is nonempty");
    use num_traits::{One, ToPrimitive};
    let bound_q = num_rational::BigRational::from_integer(big_n.into()) / &m;
    let bound = bound_q.floor().to_integer().to_u64().unwrap_or(u64::MAX);
    let k = report.k;
    let kf = k as f64;
    let a = n as f64 / (p * big_n as f64);
    let m_f64 = m.to_f64().unwrap_or(0.0);
    let reciprocal_floor = (kf - 1.0).powf(big_n as f64 - a) * kf.powf(a - n as f64 / big_n as f64 - big_n as f64);
    Ok(RamsReport {
        n,
        big_n,
        p,
        k,
        actual: leaves.len() as u64,
        bound,
        min_max_mass: m.to_string(),
        min_max_mass_f64: m_f64,
        mass_conserved: masses.iter().all(|mb| mb.0.is_one()),
        formula: tree_formula(tree.d(), big_n, p, n),
        reciprocal_floor,
        reciprocal_floor_holds: m_f64 >= reciprocal_floor,
    })
}

/// `C = max_n count(n) / formula(n)` over the given counts.
pub fn fit_tree_constant(d: u32, big_n: u32, p: f64, counts: &[(u32, u64)]) -> f64 {
    counts.iter().map(|&(n, c)| c as f64 / tree_formula(d, big_n, p, n)).fold(0.0, f64::max)
}
