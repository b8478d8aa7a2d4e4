//! Sample connection graph: an edge joins two samples whose inner product
//! exceeds a threshold in absolute value.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::model::SampleSet;

/// Default edge threshold.
pub const DEFAULT_TAU: f64 = 0.5;

/// Fixed-capacity bit set over `0..len`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BitSet {
    words: Vec<u64>,
    len: usize,
}

impl BitSet {
    pub fn new(len: usize) -> Self {
        Self {
            words: vec![0; words_for(len)],
            len,
        }
    }

    pub fn from_words(words: Vec<u64>, len: usize) -> Self {
        debug_assert_eq!(words.len(), words_for(len));
        Self { words, len }
    }

    pub fn from_indices(len: usize, idx: impl IntoIterator<Item = usize>) -> Self {
        let mut s = Self::new(len);
        for i in idx {
            s.insert(i);
        }
        s
    }

    pub fn capacity(&self) -> usize {
        self.len
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn words_mut(&mut self) -> &mut [u64] {
        &mut self.words
    }

    #[inline]
    pub fn insert(&mut self, i: usize) {
        self.words[i / 64] |= 1 << (i % 64);
    }

    #[inline]
    pub fn contains(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn and_count(&self, other: &[u64]) -> usize {
        and_count(&self.words, other)
    }

    pub fn is_subset(&self, other: &BitSet) -> bool {
        self.words
            .iter()
            .zip(&other.words)
            .all(|(a, b)| a & !b == 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        iter_bits(&self.words)
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.iter().collect()
    }
}

#[inline]
pub(crate) fn words_for(len: usize) -> usize {
    len.div_ceil(64)
}

#[inline]
pub(crate) fn and_count(a: &[u64], b: &[u64]) -> usize {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x & y).count_ones() as usize)
        .sum()
}

pub(crate) fn iter_bits(words: &[u64]) -> impl Iterator<Item = usize> + '_ {
    words.iter().enumerate().flat_map(|(wi, &w)| {
        let mut w = w;
        std::iter::from_fn(move || {
            if w == 0 {
                return None;
            }
            let b = w.trailing_zeros() as usize;
            w &= w - 1;
            Some(wi * 64 + b)
        })
    })
}

/// True iff `|<a, b>| > tau`.
pub fn edge_test(a: &[f64], b: &[f64], tau: f64) -> Result<bool> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(dot(a, b).abs() > tau)
}

/// Symmetric, irreflexive adjacency over `p` samples stored as one bitset row
/// per node.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectionGraph {
    p: usize,
    tau: f64,
    stride: usize,
    rows: Vec<u64>,
    degrees: Vec<usize>,
}

impl ConnectionGraph {
    /// Graph from an explicit undirected edge list (self loops rejected).
    pub fn from_edges(p: usize, tau: f64, edges: &[(usize, usize)]) -> Result<Self> {
        let stride = words_for(p);
        let mut rows = vec![0u64; stride * p];
        for &(i, j) in edges {
            if i >= p || j >= p || i == j {
                return Err(Error::InvalidNodes(format!("edge ({i}, {j}) with p={p}")));
            }
            rows[i * stride + j / 64] |= 1 << (j % 64);
            rows[j * stride + i / 64] |= 1 << (i % 64);
        }
        Ok(Self::finish(p, tau, stride, rows))
    }

    fn finish(p: usize, tau: f64, stride: usize, rows: Vec<u64>) -> Self {
        let degrees = if stride == 0 {
            vec![0; p]
        } else {
            rows.chunks(stride)
                .map(|r| r.iter().map(|w| w.count_ones() as usize).sum())
                .collect()
        };
        Self {
            p,
            tau,
            stride,
            rows,
            degrees,
        }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Neighbourhood bitset words of node `i`.
    #[inline]
    pub fn row(&self, i: usize) -> &[u64] {
        &self.rows[i * self.stride..(i + 1) * self.stride]
    }

    #[inline]
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.row(i)[j / 64] >> (j % 64) & 1 == 1
    }

    pub fn degree(&self, i: usize) -> usize {
        self.degrees[i]
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn edge_count(&self) -> usize {
        self.degrees.iter().sum::<usize>() / 2
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        iter_bits(self.row(i))
    }

    /// Edges `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.p).flat_map(move |i| {
            self.neighbors(i)
                .filter(move |&j| j > i)
                .map(move |j| (i, j))
        })
    }

    fn check_nodes(&self, nodes: &[usize]) -> Result<()> {
        if nodes.is_empty() {
            return Err(Error::InvalidNodes("empty node list".into()));
        }
        for (a, &u) in nodes.iter().enumerate() {
            if u >= self.p {
                return Err(Error::InvalidNodes(format!(
                    "node {u} out of range (p={})",
                    self.p
                )));
            }
            if nodes[..a].contains(&u) {
                return Err(Error::InvalidNodes(format!("node {u} repeated")));
            }
        }
        Ok(())
    }

    /// Bitset of nodes adjacent to every node in `nodes`.
    pub fn common_neighbors(&self, nodes: &[usize]) -> Result<BitSet> {
        self.check_nodes(nodes)?;
        let mut acc = self.row(nodes[0]).to_vec();
        for &u in &nodes[1..] {
            for (a, b) in acc.iter_mut().zip(self.row(u)) {
                *a &= b;
            }
        }
        Ok(BitSet::from_words(acc, self.p))
    }
}

impl ConnectionGraph {
    /// Nodes `w` with `|base ∩ N(w)| >= t`, for a node set `base` given as
    /// bitset words.
    ///
    /// By symmetry the count for `w` is the number of rows of `base` members
    /// that contain `w`; for small `base` these rows are summed with
    /// bit-sliced counters instead of intersecting every row with `base`.
    pub fn nodes_with_common_at_least(&self, base: &[u64], t: usize) -> BitSet {
        let p = self.p;
        let size: usize = base.iter().map(|w| w.count_ones() as usize).sum();
        if t == 0 {
            return BitSet::from_indices(p, 0..p);
        }
        let mut out = BitSet::new(p);
        if size < t {
            return out;
        }
        if 4 * size >= p {
            for w in 0..p {
                if and_count(base, self.row(w)) >= t {
                    out.insert(w);
                }
            }
            return out;
        }
        let bits = usize::BITS as usize - size.leading_zeros() as usize;
        let stride = self.stride;
        let mut planes = vec![0u64; bits * stride];
        for x in iter_bits(base) {
            for (wi, &word) in self.row(x).iter().enumerate() {
                let mut carry = word;
                let mut b = 0;
                while carry != 0 {
                    let plane = &mut planes[b * stride + wi];
                    let next = *plane & carry;
                    *plane ^= carry;
                    carry = next;
                    b += 1;
                }
            }
        }
        // per word: mask of counters >= t, comparing bit planes from the top
        let tb = usize::BITS as usize - t.leading_zeros() as usize;
        if tb > bits {
            return out;
        }
        for (wi, o) in out.words_mut().iter_mut().enumerate() {
            let (mut gt, mut eq) = (0u64, !0u64);
            for b in (0..bits).rev() {
                let plane = planes[b * stride + wi];
                if t >> b & 1 == 1 {
                    eq &= plane;
                } else {
                    gt |= eq & plane;
                    eq &= !plane;
                }
            }
            *o = gt | eq;
        }
        if p % 64 != 0 {
            if let Some(last) = out.words_mut().last_mut() {
                *last &= (1u64 << (p % 64)) - 1;
            }
        }
        out
    }
}

/// Test all `p(p-1)/2` pairs. Rows are filled in parallel (upper triangle) and
/// then mirrored, so the result does not depend on the thread count.
pub fn build_graph(set: &SampleSet, tau: f64) -> ConnectionGraph {
    let p = set.p();
    let stride = words_for(p);
    let mut rows = vec![0u64; stride * p];
    if stride > 0 {
        // blocks of rows share each streamed sample j, keeping the block in cache
        const BLOCK: usize = 32;
        rows.par_chunks_mut(stride * BLOCK)
            .enumerate()
            .for_each(|(bi, block)| {
                let i0 = bi * BLOCK;
                let i1 = (i0 + BLOCK).min(p);
                for j in i0 + 1..p {
                    let yj = set.sample(j);
                    for i in i0..i1.min(j) {
                        if dot(set.sample(i), yj).abs() > tau {
                            block[(i - i0) * stride + j / 64] |= 1 << (j % 64);
                        }
                    }
                }
            });
        for i in 0..p {
            let upper: Vec<usize> = iter_bits(&rows[i * stride..(i + 1) * stride]).collect();
            for j in upper {
                rows[j * stride + i / 64] |= 1 << (i % 64);
            }
        }
    }
    ConnectionGraph::finish(p, tau, stride, rows)
}

/// Size of the intersection of the neighbourhoods of all given nodes.
pub fn common_neighbor_count(graph: &ConnectionGraph, nodes: &[usize]) -> Result<usize> {
    Ok(graph.common_neighbors(nodes)?.count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit(n: usize, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        v
    }

    fn set_of(rows: &[Vec<f64>]) -> SampleSet {
        let n = rows[0].len();
        SampleSet::new(n, rows.concat(), None).unwrap()
    }

    #[test]
    fn edge_test_basics() {
        assert!(!edge_test(&unit(3, 0), &unit(3, 1), DEFAULT_TAU).unwrap());
        assert!(edge_test(&unit(3, 0), &unit(3, 0), DEFAULT_TAU).unwrap());
        assert!(edge_test(&unit(3, 0), &unit(2, 0), DEFAULT_TAU).is_err());
        assert_eq!(DEFAULT_TAU, 0.5);
    }

    #[test]
    fn orthogonal_samples_give_empty_graph() {
        let g = build_graph(&set_of(&[unit(3, 0), unit(3, 1), unit(3, 2)]), 0.5);
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn repeated_sample_gives_single_edge() {
        let g = build_graph(&set_of(&[unit(2, 0), unit(2, 0), unit(2, 1)]), 0.5);
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 1)]);
    }

    #[test]
    fn common_neighbors_small_graphs() {
        let empty = ConnectionGraph::from_edges(5, 0.5, &[]).unwrap();
        assert_eq!(common_neighbor_count(&empty, &[0, 1, 2]).unwrap(), 0);
        let mut all = Vec::new();
        for i in 0..5 {
            for j in i + 1..5 {
                all.push((i, j));
            }
        }
        let k5 = ConnectionGraph::from_edges(5, 0.5, &all).unwrap();
        assert_eq!(common_neighbor_count(&k5, &[0, 2, 4]).unwrap(), 2);
        assert!(common_neighbor_count(&k5, &[0, 0, 1]).is_err());
        assert!(common_neighbor_count(&k5, &[0, 5]).is_err());
        assert!(common_neighbor_count(&k5, &[]).is_err());
    }

    #[test]
    fn bitset_ops() {
        let a = BitSet::from_indices(130, [0, 64, 129]);
        let b = BitSet::from_indices(130, [0, 1, 64, 100, 129]);
        assert_eq!(a.count(), 3);
        assert!(a.is_subset(&b) && !b.is_subset(&a));
        assert_eq!(a.to_vec(), vec![0, 64, 129]);
        assert_eq!(a.and_count(b.words()), 3);
    }

    proptest! {
        #[test]
        fn built_graph_is_symmetric_and_matches_pair_test(
            p in 2usize..70, n in 1usize..6, seed in any::<u64>(), tau in 0.0f64..1.5
        ) {
            use rand::Rng;
            let mut r = crate::rng::stream(seed, "prop", 0);
            let data: Vec<f64> = (0..n * p).map(|_| r.random_range(-1.0..1.0)).collect();
            let set = SampleSet::new(n, data, None).unwrap();
            let g = build_graph(&set, tau);
            for i in 0..p {
                prop_assert!(!g.has_edge(i, i));
                for j in 0..p {
                    prop_assert_eq!(g.has_edge(i, j), g.has_edge(j, i));
                    if i != j {
                        prop_assert_eq!(g.has_edge(i, j), dot(set.sample(i), set.sample(j)).abs() > tau);
                    }
                }
            }
        }

        #[test]
        fn threshold_sets_match_direct_counts(
            p in 3usize..200, density in 0.0f64..0.6, seed in any::<u64>(), base_frac in 0.0f64..0.5, t in 0usize..12
        ) {
            use rand::Rng;
            let mut r = crate::rng::stream(seed, "prop", 2);
            let mut edges = Vec::new();
            for i in 0..p {
                for j in i + 1..p {
                    if r.random::<f64>() < density {
                        edges.push((i, j));
                    }
                }
            }
            let g = ConnectionGraph::from_edges(p, 0.5, &edges).unwrap();
            let base = BitSet::from_indices(p, (0..p).filter(|_| r.random::<f64>() < base_frac));
            let fast = g.nodes_with_common_at_least(base.words(), t);
            let naive: Vec<usize> = (0..p).filter(|&w| base.and_count(g.row(w)) >= t).collect();
            prop_assert_eq!(fast.to_vec(), naive);
        }

        #[test]
        fn common_count_matches_adjacency_lists(
            p in 3usize..80, density in 0.0f64..1.0, seed in any::<u64>(), ell in 1usize..5
        ) {
            use rand::Rng;
            let mut r = crate::rng::stream(seed, "prop", 1);
            let mut edges = Vec::new();
            for i in 0..p {
                for j in i + 1..p {
                    if r.random::<f64>() < density {
                        edges.push((i, j));
                    }
                }
            }
            let g = ConnectionGraph::from_edges(p, 0.5, &edges).unwrap();
            let ell = ell.min(p);
            let nodes = rand::seq::index::sample(&mut r, p, ell).into_vec();
            let lists: Vec<Vec<usize>> = nodes
                .iter()
                .map(|&u| edges.iter().filter_map(|&(a, b)| if a == u { Some(b) } else if b == u { Some(a) } else { None }).collect())
                .collect();
            let naive = (0..p).filter(|w| lists.iter().all(|l| l.contains(w))).count();
            prop_assert_eq!(common_neighbor_count(&g, &nodes).unwrap(), naive);
        }
    }
}
