use std::hash::BuildHasher;

use foldhash::fast::FixedState;
use hashbrown::HashTable;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::basis::{self, pack, unpack, NodeId};
use super::domain::Domain;
use crate::error::{Error, Result};

const HASH_SEED: u64 = 0x5eed_9a1d;

#[derive(Debug, Clone, Copy)]
struct ChildLink {
    dim: u32,
    node: u32,
}

/// Adaptive hierarchical sparse grid with piecewise multilinear basis and
/// `num_outputs` surpluses per node.
///
/// Node levels and positions are stored packed, one `u32` per node and
/// dimension. A child table (rebuilt after every structural change) drives
/// the depth-first evaluation, which only touches nodes whose basis function
/// is nonzero at the query point.
#[derive(Clone)]
pub struct HierarchicalGrid {
    dim: usize,
    num_outputs: usize,
    domain: Domain,
    codes: Vec<u32>,
    surpluses: Vec<f64>,
    values: Vec<f64>,
    table: HashTable<u32>,
    child_start: Vec<u32>,
    child_links: Vec<ChildLink>,
}

impl std::fmt::Debug for HierarchicalGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HierarchicalGrid")
            .field("dim", &self.dim)
            .field("num_outputs", &self.num_outputs)
            .field("num_points", &self.num_points())
            .finish()
    }
}

#[inline]
fn hash_codes(codes: &[u32]) -> u64 {
    FixedState::with_seed(HASH_SEED).hash_one(codes)
}

/// Number of nodes of the regular grid `{ l : |l|_1 <= depth }`, saturating.
pub fn regular_point_count(dim: usize, depth: usize) -> u128 {
    let per_level: Vec<u128> = (0..=depth)
        .map(|l| basis::nodes_on_level(l.min(127) as u8) as u128)
        .collect();
    let mut poly = vec![0u128; depth + 1];
    poly[0] = 1;
    for _ in 0..dim {
        let mut next = vec![0u128; depth + 1];
        for (s, &a) in poly.iter().enumerate() {
            if a == 0 {
                continue;
            }
            for (l, &b) in per_level.iter().enumerate().take(depth + 1 - s) {
                next[s + l] = next[s + l].saturating_add(a.saturating_mul(b));
            }
        }
        poly = next;
    }
    poly.iter().fold(0u128, |acc, &c| acc.saturating_add(c))
}

impl HierarchicalGrid {
    /// Regular sparse grid holding every node with level sum at most `depth`.
    pub fn make_regular(dim: usize, depth: usize, num_outputs: usize, domain: Domain) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("grid dimension must be at least 1".into()));
        }
        if num_outputs == 0 {
            return Err(Error::InvalidArgument("grid needs at least one output".into()));
        }
        if domain.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: domain.dim(),
            });
        }
        if depth > basis::MAX_LEVEL as usize {
            return Err(Error::InvalidArgument(format!(
                "depth {depth} exceeds the maximum level {}",
                basis::MAX_LEVEL
            )));
        }
        let count = regular_point_count(dim, depth);
        if count > u32::MAX as u128 / 2 {
            return Err(Error::InvalidArgument(format!(
                "regular grid of dimension {dim} and depth {depth} has {count} points"
            )));
        }
        let mut codes = Vec::with_capacity(count as usize * dim);
        let mut levels = vec![0u8; dim];
        for sum in 0..=depth {
            for_each_composition(&mut levels, 0, sum, &mut |levels| {
                push_positions(levels, 0, &mut vec![0u32; dim], &mut codes);
            });
        }
        let mut grid = Self::from_codes(dim, num_outputs, domain, codes);
        grid.relink();
        Ok(grid)
    }

    fn from_codes(dim: usize, num_outputs: usize, domain: Domain, codes: Vec<u32>) -> Self {
        let n = codes.len() / dim;
        let mut table = HashTable::with_capacity(n);
        for p in 0..n {
            let key = &codes[p * dim..(p + 1) * dim];
            table.insert_unique(hash_codes(key), p as u32, |&q| {
                hash_codes(&codes[q as usize * dim..(q as usize + 1) * dim])
            });
        }
        Self {
            dim,
            num_outputs,
            domain,
            codes,
            surpluses: vec![0.0; n * num_outputs],
            values: vec![0.0; n * num_outputs],
            table,
            child_start: Vec::new(),
            child_links: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_outputs(&self) -> usize {
        self.num_outputs
    }

    pub fn num_points(&self) -> usize {
        self.codes.len() / self.dim
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn surpluses(&self) -> &[f64] {
        &self.surpluses
    }

    /// Nodal values supplied at the last hierarchization (zero for nodes
    /// added by refinement since).
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn node(&self, p: usize) -> NodeId {
        let (level, index) = self.codes[p * self.dim..(p + 1) * self.dim]
            .iter()
            .map(|&c| unpack(c))
            .unzip();
        NodeId { level, index }
    }

    pub fn nodes(&self) -> Vec<NodeId> {
        (0..self.num_points()).map(|p| self.node(p)).collect()
    }

    pub fn max_level_sum(&self) -> usize {
        self.codes
            .chunks(self.dim)
            .map(|c| c.iter().map(|&x| (x & 31) as usize).sum())
            .max()
            .unwrap_or(0)
    }

    pub fn find(&self, node: &NodeId) -> Option<usize> {
        if node.dim() != self.dim {
            return None;
        }
        let key: Vec<u32> = node
            .level
            .iter()
            .zip(&node.index)
            .map(|(&l, &i)| pack(l, i))
            .collect();
        self.find_codes(&key)
    }

    fn find_codes(&self, key: &[u32]) -> Option<usize> {
        let dim = self.dim;
        self.table
            .find(hash_codes(key), |&q| {
                &self.codes[q as usize * dim..(q as usize + 1) * dim] == key
            })
            .map(|&q| q as usize)
    }

    /// Unit-cube coordinates of node `p`.
    pub fn unit_point(&self, p: usize) -> Vec<f64> {
        self.codes[p * self.dim..(p + 1) * self.dim]
            .iter()
            .map(|&c| {
                let (l, i) = unpack(c);
                basis::coordinate(l, i)
            })
            .collect()
    }

    /// Domain coordinates of node `p`.
    pub fn point(&self, p: usize) -> Vec<f64> {
        self.domain.from_unit(&self.unit_point(p))
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.num_points()).map(|p| self.point(p)).collect()
    }

    fn relink(&mut self) {
        let dim = self.dim;
        let n = self.num_points();
        let mut links: Vec<(u32, u32, u32)> = Vec::with_capacity(n * 2);
        let mut key = vec![0u32; dim];
        for p in 0..n {
            key.copy_from_slice(&self.codes[p * dim..(p + 1) * dim]);
            for j in 0..dim {
                let (l, i) = unpack(key[j]);
                if let Some((pl, pi)) = basis::parent(l, i) {
                    let saved = key[j];
                    key[j] = pack(pl, pi);
                    let q = self
                        .find_codes(&key)
                        .expect("ancestor closure violated: missing parent");
                    links.push((q as u32, j as u32, p as u32));
                    key[j] = saved;
                }
            }
        }
        links.sort_unstable();
        let mut start = vec![0u32; n + 1];
        for &(q, _, _) in &links {
            start[q as usize + 1] += 1;
        }
        for p in 0..n {
            start[p + 1] += start[p];
        }
        self.child_links = links
            .into_iter()
            .map(|(_, dim, node)| ChildLink { dim, node })
            .collect();
        self.child_start = start;
    }

    #[inline]
    fn children_of(&self, p: usize) -> &[ChildLink] {
        &self.child_links[self.child_start[p] as usize..self.child_start[p + 1] as usize]
    }

    /// Compute surpluses from nodal values (row-major, `num_points x num_outputs`).
    ///
    /// Works one dimension at a time: along dimension `j` every node with
    /// level >= 2 subtracts the mean of its two coarser neighbours and every
    /// boundary node subtracts the center value. Nodes are processed from the
    /// finest level down so the neighbours still hold values nodal in `j`.
    pub fn hierarchize(&mut self, values: &[f64]) -> Result<()> {
        let n = self.num_points();
        let m = self.num_outputs;
        if values.len() != n * m {
            return Err(Error::MissingValues {
                expected: n * m,
                got: values.len(),
            });
        }
        self.values.clear();
        self.values.extend_from_slice(values);
        let mut alpha = values.to_vec();
        let dim = self.dim;
        let mut key = vec![0u32; dim];
        let mut buckets: Vec<Vec<u32>> = Vec::new();
        for j in 0..dim {
            for b in buckets.iter_mut() {
                b.clear();
            }
            for p in 0..n {
                let l = (self.codes[p * dim + j] & 31) as usize;
                if l == 0 {
                    continue;
                }
                if buckets.len() <= l {
                    buckets.resize_with(l + 1, Vec::new);
                }
                buckets[l].push(p as u32);
            }
            for l in (1..buckets.len()).rev() {
                for &p in &buckets[l] {
                    let p = p as usize;
                    key.copy_from_slice(&self.codes[p * dim..(p + 1) * dim]);
                    let (level, index) = unpack(key[j]);
                    if level == 1 {
                        key[j] = pack(0, 0);
                        let c = self.find_codes(&key).expect("ancestor closure violated");
                        for o in 0..m {
                            alpha[p * m + o] -= alpha[c * m + o];
                        }
                    } else {
                        let [a, b] = basis::neighbors(level, index);
                        key[j] = pack(a.0, a.1);
                        let left = self.find_codes(&key).expect("ancestor closure violated");
                        key[j] = pack(b.0, b.1);
                        let right = self.find_codes(&key).expect("ancestor closure violated");
                        for o in 0..m {
                            alpha[p * m + o] -= 0.5 * (alpha[left * m + o] + alpha[right * m + o]);
                        }
                    }
                }
            }
        }
        self.surpluses = alpha;
        Ok(())
    }

    /// Fit the grid to `f` by sampling it at every node and hierarchizing.
    pub fn fit<F>(&mut self, f: F) -> Result<()>
    where
        F: Fn(&[f64]) -> Vec<f64>,
    {
        let mut values = Vec::with_capacity(self.num_points() * self.num_outputs);
        for p in 0..self.num_points() {
            let v = f(&self.point(p));
            if v.len() != self.num_outputs {
                return Err(Error::DimensionMismatch {
                    expected: self.num_outputs,
                    got: v.len(),
                });
            }
            values.extend(v);
        }
        self.hierarchize(&values)
    }

    pub fn interpolate(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.num_outputs];
        self.interpolate_into(x, &mut out)?;
        Ok(out)
    }

    /// Evaluate the interpolant at a domain point; points outside the box are
    /// rejected.
    pub fn interpolate_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let mut stack = [0.0; 32];
        let mut heap = Vec::new();
        let u = if self.dim <= stack.len() {
            &mut stack[..self.dim]
        } else {
            heap.resize(self.dim, 0.0);
            &mut heap[..]
        };
        self.domain.to_unit(x, u)?;
        self.interpolate_unit_into(u, out);
        Ok(())
    }

    /// Evaluate at a unit-cube point already known to be inside `[0,1]^d`.
    pub fn interpolate_unit_into(&self, u: &[f64], out: &mut [f64]) {
        debug_assert_eq!(u.len(), self.dim);
        out.iter_mut().for_each(|v| *v = 0.0);
        if self.num_points() > 0 {
            self.visit(0, 0, 1.0, u, out);
        }
    }

    fn visit(&self, p: usize, start: usize, weight: f64, u: &[f64], out: &mut [f64]) {
        let m = self.num_outputs;
        for (o, a) in out.iter_mut().zip(&self.surpluses[p * m..(p + 1) * m]) {
            *o += a * weight;
        }
        let dim = self.dim;
        for link in self.children_of(p) {
            let j = link.dim as usize;
            if j < start {
                continue;
            }
            let mut c = link.node as usize;
            loop {
                let (l, i) = unpack(self.codes[c * dim + j]);
                let phi = basis::hat(l, i, u[j]);
                if phi <= 0.0 {
                    break;
                }
                self.visit(c, j + 1, weight * phi, u, out);
                match self.child_containing(c, j, u[j]) {
                    Some(next) => c = next,
                    None => break,
                }
            }
        }
    }

    #[inline]
    fn child_containing(&self, p: usize, j: usize, x: f64) -> Option<usize> {
        let dim = self.dim;
        self.children_of(p)
            .iter()
            .filter(|link| link.dim as usize == j)
            .map(|link| link.node as usize)
            .find(|&c| {
                let (l, i) = unpack(self.codes[c * dim + j]);
                basis::hat(l, i, x) > 0.0
            })
    }

    /// Integral of the interpolant over the domain box.
    pub fn integrate(&self) -> Vec<f64> {
        let m = self.num_outputs;
        let mut total = vec![0.0; m];
        for (p, node) in self.codes.chunks(self.dim).enumerate() {
            let w: f64 = node.iter().map(|&c| basis::basis_integral((c & 31) as u8)).product();
            for o in 0..m {
                total[o] += self.surpluses[p * m + o] * w;
            }
        }
        let vol = self.domain.volume();
        total.iter_mut().for_each(|t| *t *= vol);
        total
    }

    /// Per-output scale for refinement: the largest absolute nodal value, or 1
    /// when an output is identically zero.
    pub fn default_refinement_scale(&self) -> Vec<f64> {
        let m = self.num_outputs;
        (0..m)
            .map(|o| {
                let s = self
                    .values
                    .iter()
                    .skip(o)
                    .step_by(m)
                    .fold(0.0f64, |acc, v| acc.max(v.abs()));
                if s > 0.0 {
                    s
                } else {
                    1.0
                }
            })
            .collect()
    }

    /// Add every 1D child, in every dimension, of each node whose scaled
    /// surplus exceeds `threshold`, then close the set under ancestors.
    ///
    /// New nodes are appended with zero surpluses and values; the caller must
    /// supply values for them and hierarchize again. Returns the number of
    /// added nodes.
    pub fn refine(&mut self, threshold: f64, scale: &[f64]) -> Result<usize> {
        if !(threshold >= 0.0) {
            return Err(Error::InvalidArgument("refinement threshold must be >= 0".into()));
        }
        let m = self.num_outputs;
        if scale.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: scale.len(),
            });
        }
        let n0 = self.num_points();
        let dim = self.dim;
        let marked: Vec<usize> = (0..n0)
            .filter(|&p| {
                let crit = (0..m)
                    .map(|o| {
                        let s = if scale[o] > 0.0 { scale[o] } else { 1.0 };
                        self.surpluses[p * m + o].abs() / s
                    })
                    .fold(0.0f64, f64::max);
                crit > threshold
            })
            .collect();
        let mut key = vec![0u32; dim];
        for p in marked {
            for j in 0..dim {
                key.copy_from_slice(&self.codes[p * dim..(p + 1) * dim]);
                let (l, i) = unpack(key[j]);
                for (cl, ci) in basis::children(l, i).into_iter().flatten() {
                    key[j] = pack(cl, ci);
                    self.insert_closed(&key);
                }
            }
        }
        let added = self.num_points() - n0;
        if added > 0 {
            self.surpluses.resize(self.num_points() * m, 0.0);
            self.values.resize(self.num_points() * m, 0.0);
            self.relink();
        }
        Ok(added)
    }

    fn insert_closed(&mut self, key: &[u32]) {
        if self.find_codes(key).is_some() {
            return;
        }
        let mut parent_key = key.to_vec();
        for j in 0..self.dim {
            let (l, i) = unpack(key[j]);
            if let Some((pl, pi)) = basis::parent(l, i) {
                parent_key[j] = pack(pl, pi);
                self.insert_closed(&parent_key);
                parent_key[j] = key[j];
            }
        }
        let dim = self.dim;
        let p = self.num_points() as u32;
        self.codes.extend_from_slice(key);
        let codes = &self.codes;
        self.table.insert_unique(hash_codes(key), p, |&q| {
            hash_codes(&codes[q as usize * dim..(q as usize + 1) * dim])
        });
    }

    /// True when every node's 1D parent in every dimension is present.
    pub fn is_ancestor_closed(&self) -> bool {
        let dim = self.dim;
        let mut key = vec![0u32; dim];
        (0..self.num_points()).all(|p| {
            key.copy_from_slice(&self.codes[p * dim..(p + 1) * dim]);
            (0..dim).all(|j| {
                let (l, i) = unpack(key[j]);
                match basis::parent(l, i) {
                    None => true,
                    Some((pl, pi)) => {
                        let saved = key[j];
                        key[j] = pack(pl, pi);
                        let ok = self.find_codes(&key).is_some();
                        key[j] = saved;
                        ok
                    }
                }
            })
        })
    }

    fn from_doc(doc: GridDoc) -> Result<Self> {
        let GridDoc {
            dim,
            num_outputs,
            domain,
            nodes,
            surpluses,
        } = doc;
        let domain = Domain::new(domain.lower, domain.upper)?;
        if domain.dim() != dim || dim == 0 || num_outputs == 0 {
            return Err(Error::InvalidArgument("inconsistent grid header".into()));
        }
        if surpluses.len() != nodes.len() {
            return Err(Error::MissingValues {
                expected: nodes.len(),
                got: surpluses.len(),
            });
        }
        let mut codes = Vec::with_capacity(nodes.len() * dim);
        for (level, index) in nodes {
            let id = NodeId::new(level, index)?;
            if id.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: id.dim(),
                });
            }
            codes.extend(id.level.iter().zip(&id.index).map(|(&l, &i)| pack(l, i)));
        }
        let mut flat = Vec::with_capacity(surpluses.len() * num_outputs);
        for row in surpluses {
            if row.len() != num_outputs {
                return Err(Error::DimensionMismatch {
                    expected: num_outputs,
                    got: row.len(),
                });
            }
            flat.extend(row);
        }
        let n = codes.len() / dim;
        let mut grid = Self::from_codes(dim, num_outputs, domain, codes);
        if grid.table.len() != n {
            return Err(Error::InvalidArgument("duplicate grid nodes".into()));
        }
        if !grid.is_ancestor_closed() {
            return Err(Error::InvalidArgument("grid nodes are not ancestor-closed".into()));
        }
        grid.relink();
        grid.surpluses = flat;
        let mut values = vec![0.0; n * num_outputs];
        for p in 0..n {
            let u = grid.unit_point(p);
            grid.interpolate_unit_into(&u, &mut values[p * num_outputs..(p + 1) * num_outputs]);
        }
        grid.values = values;
        Ok(grid)
    }
}

fn for_each_composition(levels: &mut [u8], j: usize, remaining: usize, f: &mut dyn FnMut(&[u8])) {
    if j + 1 == levels.len() {
        levels[j] = remaining as u8;
        f(levels);
        return;
    }
    for l in (0..=remaining).rev() {
        levels[j] = l as u8;
        for_each_composition(levels, j + 1, remaining - l, f);
    }
    levels[j] = 0;
}

fn push_positions(levels: &[u8], j: usize, key: &mut Vec<u32>, out: &mut Vec<u32>) {
    if j == levels.len() {
        out.extend_from_slice(key);
        return;
    }
    let l = levels[j];
    match l {
        0 => {
            key[j] = pack(0, 0);
            push_positions(levels, j + 1, key, out);
        }
        1 => {
            for i in 0..2 {
                key[j] = pack(1, i);
                push_positions(levels, j + 1, key, out);
            }
        }
        _ => {
            for i in (1..(1u32 << l)).step_by(2) {
                key[j] = pack(l, i);
                push_positions(levels, j + 1, key, out);
            }
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridDoc {
    dim: usize,
    num_outputs: usize,
    domain: Domain,
    nodes: Vec<(Vec<u8>, Vec<u32>)>,
    surpluses: Vec<Vec<f64>>,
}

impl Serialize for HierarchicalGrid {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let m = self.num_outputs;
        let doc = GridDoc {
            dim: self.dim,
            num_outputs: m,
            domain: self.domain.clone(),
            nodes: self.nodes().into_iter().map(|n| (n.level, n.index)).collect(),
            surpluses: self.surpluses.chunks(m).map(<[f64]>::to_vec).collect(),
        };
        doc.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for HierarchicalGrid {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let doc = GridDoc::deserialize(deserializer)?;
        Self::from_doc(doc).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(d: usize) -> Domain {
        Domain::unit(d)
    }

    #[test]
    fn published_point_counts() {
        for (d, l, n) in [(4, 3, 137), (4, 5, 1105), (4, 7, 7537), (8, 3, 849), (16, 3, 6049)] {
            let g = HierarchicalGrid::make_regular(d, l, 1, unit(d)).unwrap();
            assert_eq!(g.num_points(), n, "d={d} l={l}");
            assert_eq!(regular_point_count(d, l), n as u128);
        }
    }

    #[test]
    fn depth_zero_is_the_center() {
        let g = HierarchicalGrid::make_regular(1, 0, 1, unit(1)).unwrap();
        assert_eq!(g.num_points(), 1);
        assert_eq!(g.point(0), vec![0.5]);
    }

    #[test]
    fn constant_function_has_single_surplus() {
        let mut g = HierarchicalGrid::make_regular(3, 3, 1, unit(3)).unwrap();
        g.fit(|_| vec![2.5]).unwrap();
        assert_eq!(g.surpluses()[0], 2.5);
        assert!(g.surpluses()[1..].iter().all(|&a| a == 0.0));
    }

    #[test]
    fn linear_1d_surpluses() {
        let mut g = HierarchicalGrid::make_regular(1, 1, 1, unit(1)).unwrap();
        g.fit(|x| vec![x[0]]).unwrap();
        let root = g.find(&NodeId::root(1)).unwrap();
        let left = g.find(&NodeId::new(vec![1], vec![0]).unwrap()).unwrap();
        let right = g.find(&NodeId::new(vec![1], vec![1]).unwrap()).unwrap();
        assert_eq!(g.surpluses()[root], 0.5);
        assert_eq!(g.surpluses()[left], -0.5);
        assert_eq!(g.surpluses()[right], 0.5);
        assert_eq!(g.integrate(), vec![0.5]);
    }

    #[test]
    fn outside_point_is_an_error() {
        let mut g = HierarchicalGrid::make_regular(2, 2, 1, unit(2)).unwrap();
        g.fit(|x| vec![x[0]]).unwrap();
        assert!(matches!(g.interpolate(&[1.5, 0.5]), Err(Error::OutOfDomain { .. })));
        assert!(matches!(g.interpolate(&[0.5]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn hierarchize_rejects_short_values() {
        let mut g = HierarchicalGrid::make_regular(2, 2, 2, unit(2)).unwrap();
        assert!(matches!(g.hierarchize(&[1.0; 3]), Err(Error::MissingValues { .. })));
    }

    #[test]
    fn refine_below_threshold_is_noop() {
        let mut g = HierarchicalGrid::make_regular(2, 2, 1, unit(2)).unwrap();
        g.fit(|x| vec![x[0] + x[1]]).unwrap();
        let before = g.num_points();
        assert_eq!(g.refine(10.0, &[1.0]).unwrap(), 0);
        assert_eq!(g.num_points(), before);
    }

    #[test]
    fn refine_root_adds_boundaries() {
        let mut g = HierarchicalGrid::make_regular(1, 0, 1, unit(1)).unwrap();
        g.hierarchize(&[1.0]).unwrap();
        assert_eq!(g.refine(0.5, &[1.0]).unwrap(), 2);
        let pts: Vec<f64> = g.points().into_iter().map(|p| p[0]).collect();
        assert_eq!(pts, vec![0.5, 0.0, 1.0]);
    }

    #[test]
    fn refinement_keeps_ancestor_closure() {
        let mut g = HierarchicalGrid::make_regular(2, 1, 1, unit(2)).unwrap();
        let f = |x: &[f64]| vec![((x[0] - 0.3).abs() + (x[1] - 0.7).abs()).sqrt()];
        for _ in 0..4 {
            g.fit(f).unwrap();
            g.refine(1e-3, &[1.0]).unwrap();
            assert!(g.is_ancestor_closed());
        }
        g.fit(f).unwrap();
        for p in 0..g.num_points() {
            let x = g.point(p);
            let v = g.interpolate(&x).unwrap()[0];
            assert!((v - f(&x)[0]).abs() <= 1e-12 * (1.0 + f(&x)[0].abs()));
        }
    }

    #[test]
    fn json_round_trip_is_bit_stable() {
        let dom = Domain::new(vec![-0.16, 0.8], vec![0.16, 1.2]).unwrap();
        let mut g = HierarchicalGrid::make_regular(2, 3, 2, dom).unwrap();
        g.fit(|x| vec![x[0].sin() + x[1].exp(), (x[0] * x[1]).cos()]).unwrap();
        let text = serde_json::to_string(&g).unwrap();
        let back: HierarchicalGrid = serde_json::from_str(&text).unwrap();
        assert_eq!(back.surpluses(), g.surpluses());
        assert_eq!(back.nodes(), g.nodes());
        let x = [0.0123, 0.97];
        assert_eq!(back.interpolate(&x).unwrap(), g.interpolate(&x).unwrap());
        assert_eq!(serde_json::to_string(&back).unwrap(), text);
    }

    #[test]
    fn json_rejects_open_node_sets() {
        let text = r#"{"dim":1,"num_outputs":1,"domain":{"lower":[0.0],"upper":[1.0]},
            "nodes":[[[0],[0]],[[2],[1]]],"surpluses":[[1.0],[2.0]]}"#;
        assert!(serde_json::from_str::<HierarchicalGrid>(text).is_err());
    }
}
