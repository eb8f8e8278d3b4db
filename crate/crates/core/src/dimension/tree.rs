use std::collections::HashMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::porosity::{pack, BoxKey, DyadicOccupancy};

/// Rooted tree of boxes; vertex 0 is the root at level 0 and every edge
/// joins consecutive levels.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxTree {
    d: u32,
    level: Vec<u32>,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    by_level: Vec<Vec<usize>>,
}

impl BoxTree {
    /// Builds a tree from `(level, parent)` pairs. Parents may appear after
    /// their children; the root must be the only entry without a parent.
    pub fn from_parents(d: u32, entries: &[(u32, Option<usize>)]) -> Result<Self> {
        if d == 0 || d > 16 {
            return Err(Error::InvalidArgument(format!("dimension {d} out of range")));
        }
        let roots: Vec<usize> = (0..entries.len()).filter(|&i| entries[i].1.is_none()).collect();
        if roots != [0] || entries[0].0 != 0 {
            return Err(Error::InvalidArgument("vertex 0 must be the only root and sit at level 0".into()));
        }
        let mut children = vec![Vec::new(); entries.len()];
        for (v, &(level, parent)) in entries.iter().enumerate().skip(1) {
            let p = parent.unwrap();
            if p >= entries.len() || entries[p].0 + 1 != level {
                return Err(Error::InvalidArgument(format!("vertex {v} at level {level} has invalid parent {p}")));
            }
            children[p].push(v);
        }
        if let Some(v) = children.iter().position(|c| c.len() > 1 << d) {
            return Err(Error::InvalidArgument(format!("vertex {v} has more than 2^{d} children")));
        }
        let depth = entries.iter().map(|e| e.0).max().unwrap();
        let mut by_level = vec![Vec::new(); depth as usize + 1];
        for (v, e) in entries.iter().enumerate() {
            by_level[e.0 as usize].push(v);
        }
        // every vertex must hang below the root
        let mut seen = vec![false; entries.len()];
        let mut stack = vec![0];
        while let Some(v) = stack.pop() {
            seen[v] = true;
            stack.extend(&children[v]);
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidArgument("parent links contain a cycle".into()));
        }
        Ok(BoxTree {
            d,
            level: entries.iter().map(|e| e.0).collect(),
            parent: entries.iter().map(|e| e.1).collect(),
            children,
            by_level,
        })
    }

    /// Occupied boxes of levels `0..=max_level`.
    pub fn from_occupancy(occ: &DyadicOccupancy, max_level: u32) -> Result<Self> {
        if max_level > occ.depth() {
            return Err(Error::InvalidArgument(format!("level {max_level} exceeds depth {}", occ.depth())));
        }
        let mut entries = Vec::new();
        let mut index: HashMap<(u32, BoxKey), usize> = HashMap::new();
        for level in 0..=max_level {
            for b in occ.boxes(level) {
                let parent = (level > 0).then(|| {
                    let up: Vec<u32> = b.iter().map(|c| c >> 1).collect();
                    index[&(level - 1, pack(&up))]
                });
                index.insert((level, pack(&b)), entries.len());
                entries.push((level, parent));
            }
        }
        BoxTree::from_parents(occ.dim() as u32, &entries)
    }

    /// Every vertex above `depth` has all `2^d` children.
    pub fn full(d: u32, depth: u32) -> Result<Self> {
        let mut entries = vec![(0, None)];
        let mut frontier = vec![0];
        for level in 1..=depth {
            let mut next = Vec::new();
            for &p in &frontier {
                for _ in 0..1u32 << d {
                    next.push(entries.len());
                    entries.push((level, Some(p)));
                }
            }
            frontier = next;
        }
        BoxTree::from_parents(d, &entries)
    }

    pub fn path(d: u32, depth: u32) -> Result<Self> {
        let entries: Vec<(u32, Option<usize>)> = (0..=depth).map(|l| (l, l.checked_sub(1).map(|p| p as usize))).collect();
        BoxTree::from_parents(d, &entries)
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn len(&self) -> usize {
        self.level.len()
    }

    pub fn is_empty(&self) -> bool {
        self.level.is_empty()
    }

    pub fn depth(&self) -> u32 {
        self.by_level.len() as u32 - 1
    }

    pub fn level(&self, v: usize) -> u32 {
        self.level[v]
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        self.parent[v]
    }

    pub fn children(&self, v: usize) -> &[usize] {
        &self.children[v]
    }

    pub fn vertices(&self, level: u32) -> &[usize] {
        self.by_level.get(level as usize).map_or(&[], |v| v.as_slice())
    }

    pub fn count(&self, level: u32) -> usize {
        self.vertices(level).len()
    }

    /// Descendants exactly `k` levels below `v`.
    pub fn descendants(&self, v: usize, k: u32) -> Vec<usize> {
        let mut cur = vec![v];
        for _ in 0..k {
            cur = cur.iter().flat_map(|&u| self.children[u].iter().copied()).collect();
        }
        cur
    }

    pub fn k_children(&self, v: usize, k: u32) -> usize {
        if k == 0 {
            return 1;
        }
        self.children[v].iter().map(|&c| self.k_children(c, k - 1)).sum()
    }

    /// For each offset `b <= n` below `N`: the total mass of `mu_b` on level
    /// `n` and its values on `vertices(n)`.
    pub(super) fn rams_masses(&self, big_n: u32, n: u32) -> Vec<(BigRational, Vec<BigRational>)> {
        // vertices with a descendant at level n
        let mut live = vec![false; self.len()];
        for &v in self.vertices(n) {
            let mut u = Some(v);
            while let Some(w) = u {
                if live[w] {
                    break;
                }
                live[w] = true;
                u = self.parent[w];
            }
        }
        (0..big_n.min(n + 1))
            .map(|b| {
                let mut mass = vec![BigRational::zero(); self.len()];
                let start: Vec<usize> = self.vertices(b).iter().copied().filter(|&v| live[v]).collect();
                let share = BigRational::new(BigInt::from(1), BigInt::from(start.len()));
                for &v in &start {
                    mass[v] = share.clone();
                }
                let mut level = b;
                let mut frontier = start;
                while level < n {
                    let step = big_n.min(n - level);
                    let mut next = Vec::new();
                    for &v in &frontier {
                        let ch: Vec<usize> = self.descendants(v, step).into_iter().filter(|&c| live[c]).collect();
                        let share = &mass[v] / BigRational::from_integer(BigInt::from(ch.len()));
                        for &c in &ch {
                            mass[c] = share.clone();
                        }
                        next.extend(ch);
                    }
                    frontier = next;
                    level += step;
                }
                let at_n: Vec<BigRational> = self.vertices(n).iter().map(|&v| mass[v].clone()).collect();
                let total = at_n.iter().fold(BigRational::zero(), |acc, m| acc + m);
                (total, at_n)
            })
            .collect()
    }

    /// Text form, one `level parent` line per vertex, `-` for the root.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for v in 0..self.len() {
            match self.parent[v] {
                Some(p) => out.push_str(&format!("{} {p}\n", self.level[v])),
                None => out.push_str(&format!("{} -\n", self.level[v])),
            }
        }
        out
    }

    /// Parses the text form; `-` or `-1` marks the root, `#` starts a
    /// comment.
    pub fn parse(text: &str, d: u32) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: &str| Error::Parse { line: i + 1, msg: msg.to_string() };
            let mut parts = line.split_whitespace();
            let level: u32 = parts.next().unwrap().parse().map_err(|_| err("level is not an integer"))?;
            let parent = match parts.next().ok_or_else(|| err("missing parent index"))? {
                "-" | "-1" => None,
                s => Some(s.parse::<usize>().map_err(|_| err("parent is not an index"))?),
            };
            if parts.next().is_some() {
                return Err(err("expected two fields"));
            }
            entries.push((level, parent));
        }
        if entries.is_empty() {
            return Err(Error::Parse { line: 0, msg: "no vertices".into() });
        }
        BoxTree::from_parents(d, &entries)
    }
}

/// All trees of the given depth in which every vertex above the bottom has
/// between 1 and `2^d` children, up to reordering of children.
pub fn enumerate_trees(d: u32, depth: u32) -> Result<Vec<BoxTree>> {
    enumerate_admissible(d, f64::INFINITY, depth)
}

/// The trees of [`enumerate_trees`] that satisfy (ii) with `N = 1`, built
/// directly: a subtree is generated only under a state (level, sparse
/// ancestors above) from which it is admissible. (i) holds for every tree
/// when `N = 1`.
pub fn enumerate_admissible(d: u32, p: f64, depth: u32) -> Result<Vec<BoxTree>> {
    if d == 0 || d > 4 || !(p >= 1.0) {
        return Err(Error::InvalidArgument(format!("need d in 1..=4 and P >= 1, got {d}, {p}")));
    }
    let mut table = ShapeTable { k: 1 << d, depth, p, shapes: HashMap::new() };
    let count = table.build(0, 0);
    (0..count)
        .map(|i| {
            let mut entries = Vec::new();
            table.materialize((0, 0), i, None, &mut entries);
            BoxTree::from_parents(d, &entries)
        })
        .collect()
}

struct ShapeTable {
    k: usize,
    depth: u32,
    p: f64,
    /// For a state `(m, c)`: each shape as the multiset of child shapes,
    /// indices into the table of the child state.
    shapes: HashMap<(u32, u32), Vec<Vec<usize>>>,
}

impl ShapeTable {
    fn build(&mut self, m: u32, c: u32) -> usize {
        if let Some(s) = self.shapes.get(&(m, c)) {
            return s.len();
        }
        let mut list = Vec::new();
        if m == self.depth {
            if c as f64 >= self.depth as f64 / self.p {
                list.push(Vec::new());
            }
        } else {
            for kids in 1..=self.k {
                let c2 = c + (kids < self.k) as u32;
                if (c2 as f64) < m as f64 / self.p {
                    continue;
                }
                let below = self.build(m + 1, c2);
                multisets(below, kids, &mut Vec::new(), &mut list);
            }
        }
        let n = list.len();
        self.shapes.insert((m, c), list);
        n
    }

    fn materialize(&self, state: (u32, u32), shape: usize, parent: Option<usize>, entries: &mut Vec<(u32, Option<usize>)>) {
        let me = entries.len();
        entries.push((state.0, parent));
        let kids = &self.shapes[&state][shape];
        let c2 = state.1 + (kids.len() < self.k) as u32;
        for &s in kids {
            self.materialize((state.0 + 1, c2), s, Some(me), entries);
        }
    }
}

fn multisets(n: usize, size: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if cur.len() == size {
        out.push(cur.clone());
        return;
    }
    let from = cur.last().copied().unwrap_or(0);
    for i in from..n {
        cur.push(i);
        multisets(n, size, cur, out);
        cur.pop();
    }
}

/// Largest `#B_depth` over trees with `N = 1` that satisfy (i) and (ii) and
/// whose vertices above the bottom all have children. A vertex at level
/// `m` with `c` sparse ancestors above it picks `k` children; the best tree
/// repeats the best subtree under each child.
pub fn max_count_dp(d: u32, p: f64, depth: u32) -> u64 {
    let k = 1u64 << d;
    let mut memo: HashMap<(u32, u32), Option<u64>> = HashMap::new();
    fn go(m: u32, c: u32, depth: u32, k: u64, p: f64, memo: &mut HashMap<(u32, u32), Option<u64>>) -> Option<u64> {
        if let Some(&v) = memo.get(&(m, c)) {
            return v;
        }
        let res = if m == depth {
            (c as f64 >= depth as f64 / p).then_some(1)
        } else {
            (1..=k)
                .filter_map(|kids| {
                    let c2 = c + (kids < k) as u32;
                    if (c2 as f64) < m as f64 / p {
                        return None;
                    }
                    go(m + 1, c2, depth, k, p, memo).map(|f| kids * f)
                })
                .max()
        };
        memo.insert((m, c), res);
        res
    }
    go(0, 0, depth, k, p, &mut memo).unwrap_or(0)
}
