use std::collections::HashSet;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_DEPTH: u32 = 24;
pub const MAX_DIM: usize = 4;

/// Packed integer box coordinates, 32 bits per axis.
pub type BoxKey = u128;

pub fn pack(coords: &[u32]) -> BoxKey {
    coords
        .iter()
        .enumerate()
        .fold(0u128, |acc, (i, &c)| acc | (c as u128) << (32 * i))
}

pub fn unpack(key: BoxKey, dim: usize) -> Vec<u32> {
    (0..dim).map(|i| (key >> (32 * i)) as u32).collect()
}

/// Affine map from world coordinates to the unit square, same scale on
/// both axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanarFrame {
    pub origin: [f64; 2],
    pub scale: f64,
}

impl Default for PlanarFrame {
    fn default() -> Self {
        PlanarFrame { origin: [0.0, 0.0], scale: 1.0 }
    }
}

impl PlanarFrame {
    /// Square frame around the bounding box of `points`, padded by `margin`
    /// times the larger extent on every side.
    pub fn fit(points: &[Complex64], margin: f64) -> Self {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for z in points {
            lo[0] = lo[0].min(z.re);
            lo[1] = lo[1].min(z.im);
            hi[0] = hi[0].max(z.re);
            hi[1] = hi[1].max(z.im);
        }
        if points.is_empty() {
            return PlanarFrame::default();
        }
        let extent = (hi[0] - lo[0]).max(hi[1] - lo[1]);
        let extent = if extent > 0.0 { extent } else { 1.0 };
        let scale = extent * (1.0 + 2.0 * margin);
        let center = [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0];
        PlanarFrame { origin: [center[0] - scale / 2.0, center[1] - scale / 2.0], scale }
    }

    pub fn to_unit(&self, z: Complex64) -> [f64; 2] {
        [(z.re - self.origin[0]) / self.scale, (z.im - self.origin[1]) / self.scale]
    }

    pub fn to_world(&self, u: [f64; 2]) -> Complex64 {
        Complex64::new(u[0] * self.scale + self.origin[0], u[1] * self.scale + self.origin[1])
    }
}

/// Occupied dyadic boxes of a set `E` in `[0,1)^d` at every level up to
/// `depth`. Level `n` boxes are `[p 2^-n, (p+1) 2^-n)` per axis.
#[derive(Debug, Clone)]
pub struct DyadicOccupancy {
    dim: usize,
    depth: u32,
    levels: Vec<HashSet<BoxKey>>,
    /// World-to-unit map for planar sets; identity for abstract sets.
    pub frame: PlanarFrame,
    pub sample_count: usize,
}

impl DyadicOccupancy {
    pub fn empty(dim: usize, depth: u32) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::InvalidArgument(format!("dimension {dim} outside 1..={MAX_DIM}")));
        }
        if depth > MAX_DEPTH {
            return Err(Error::InvalidArgument(format!("depth {depth} exceeds {MAX_DEPTH}")));
        }
        Ok(DyadicOccupancy {
            dim,
            depth,
            levels: vec![HashSet::new(); depth as usize + 1],
            frame: PlanarFrame::default(),
            sample_count: 0,
        })
    }

    /// Marks the finest-level cells and closes upward.
    pub fn from_cells(dim: usize, depth: u32, cells: impl IntoIterator<Item = Vec<u32>>) -> Result<Self> {
        let mut occ = Self::empty(dim, depth)?;
        let side = 1u64 << depth;
        for cell in cells {
            if cell.len() != dim || cell.iter().any(|&c| c as u64 >= side) {
                return Err(Error::InvalidArgument(format!("cell {cell:?} outside the level-{depth} grid")));
            }
            occ.insert_cell(&cell);
            occ.sample_count += 1;
        }
        Ok(occ)
    }

    fn insert_cell(&mut self, cell: &[u32]) {
        let mut c = cell.to_vec();
        for level in (0..=self.depth as usize).rev() {
            if !self.levels[level].insert(pack(&c)) {
                // ancestors are already present
                break;
            }
            c.iter_mut().for_each(|v| *v >>= 1);
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn count(&self, level: u32) -> usize {
        self.levels[level as usize].len()
    }

    pub fn is_occupied(&self, level: u32, coords: &[u32]) -> bool {
        self.levels[level as usize].contains(&pack(coords))
    }

    pub fn is_occupied_key(&self, level: u32, key: BoxKey) -> bool {
        self.levels[level as usize].contains(&key)
    }

    /// Occupied boxes of a level in lexicographic order of packed keys.
    pub fn boxes(&self, level: u32) -> Vec<Vec<u32>> {
        let mut keys: Vec<BoxKey> = self.levels[level as usize].iter().copied().collect();
        keys.sort_unstable();
        keys.into_iter().map(|k| unpack(k, self.dim)).collect()
    }

    /// Box of `point` (unit coordinates) at `level`.
    pub fn box_of(point: &[f64], level: u32) -> Vec<u32> {
        let side = (1u64 << level) as f64;
        point
            .iter()
            .map(|&x| ((x * side).floor().max(0.0) as u64).min((1u64 << level) - 1) as u32)
            .collect()
    }

    /// Number of occupied level-`(level + k)` descendants of a level box.
    pub fn occupied_descendants(&self, level: u32, coords: &[u32], k: u32) -> usize {
        let target = level + k;
        let per_axis = 1u32 << k;
        let total = (per_axis as usize).pow(self.dim as u32);
        let mut n = 0;
        let mut child = vec![0u32; self.dim];
        for idx in 0..total {
            let mut rest = idx;
            for (a, c) in child.iter_mut().enumerate() {
                *c = (coords[a] << k) + (rest % per_axis as usize) as u32;
                rest /= per_axis as usize;
            }
            if self.is_occupied(target, &child) {
                n += 1;
            }
        }
        n
    }

    /// Checks the upward-closure invariant.
    pub fn check_upward_closed(&self) -> bool {
        (1..=self.depth).all(|level| {
            self.levels[level as usize].iter().all(|&k| {
                let parent: Vec<u32> = unpack(k, self.dim).iter().map(|c| c >> 1).collect();
                self.is_occupied(level - 1, &parent)
            })
        })
    }

    /// Centers (unit coordinates) of the occupied finest-level cells.
    pub fn leaf_centers(&self) -> Vec<Vec<f64>> {
        let side = (1u64 << self.depth) as f64;
        self.boxes(self.depth)
            .into_iter()
            .map(|c| c.iter().map(|&v| (v as f64 + 0.5) / side).collect())
            .collect()
    }
}

/// Occupancy of a finite point set in `[0,1)^d`.
pub fn build_occupancy<P: AsRef<[f64]>>(points: &[P], dim: usize, depth: u32) -> Result<DyadicOccupancy> {
    let mut occ = DyadicOccupancy::empty(dim, depth)?;
    for (index, p) in points.iter().enumerate() {
        let p = p.as_ref();
        if p.len() != dim || p.iter().any(|&x| !(0.0..1.0).contains(&x)) {
            return Err(Error::OutsideUnitBox { index, coords: p.to_vec() });
        }
        let cell = DyadicOccupancy::box_of(p, depth);
        occ.insert_cell(&cell);
    }
    occ.sample_count = points.len();
    Ok(occ)
}

/// Planar occupancy of world points under a frame.
pub fn build_planar(points: &[Complex64], frame: PlanarFrame, depth: u32) -> Result<DyadicOccupancy> {
    let unit: Vec<[f64; 2]> = points.iter().map(|&z| frame.to_unit(z)).collect();
    let mut occ = build_occupancy(&unit, 2, depth)?;
    occ.frame = frame;
    Ok(occ)
}
