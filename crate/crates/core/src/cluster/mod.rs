//! Overlapping clustering of the connection graph.
//!
//! Each round proposes a candidate set from a random pair or tuple of
//! adjacent samples; afterwards candidates whose generating tuple sits inside
//! a strictly smaller retained candidate are deleted together with
//! duplicates. What survives is one set per dictionary coordinate.

mod triplet;
mod tuple;

use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conngraph::{BitSet, ConnectionGraph};
use crate::error::{Error, Result};
use crate::model::{SampleSet, SparseCode};
use crate::registry::{Named, Registry};

pub use triplet::{pair_candidate_set, TripletCluster};
pub use tuple::TupleCluster;

/// Where a cluster came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    /// Generating node tuple (a pair for the triplet algorithm).
    Tuple(Vec<usize>),
    /// Ground-truth coordinate (oracle clusterings).
    Coordinate(usize),
}

/// A family of sample-index sets, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OverlapClustering {
    pub clusters: Vec<Vec<usize>>,
    pub provenance: Vec<Provenance>,
}

impl OverlapClustering {
    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    /// Clusters as a set of sorted vectors, for order-free comparison.
    pub fn as_sorted_sets(&self) -> Vec<Vec<usize>> {
        let mut v = self.clusters.clone();
        v.sort();
        v
    }

    /// Same clusters, ignoring order and provenance.
    pub fn same_sets(&self, other: &OverlapClustering) -> bool {
        self.as_sorted_sets() == other.as_sorted_sets()
    }

    /// Survivor condition: all sets distinct and no generating tuple inside a
    /// strictly smaller set of the family.
    pub fn satisfies_survivor_condition(&self) -> bool {
        let sets = self.as_sorted_sets();
        if sets.windows(2).any(|w| w[0] == w[1]) {
            return false;
        }
        self.clusters
            .iter()
            .zip(&self.provenance)
            .all(|(c, prov)| match prov {
                Provenance::Coordinate(_) => true,
                Provenance::Tuple(t) => !self
                    .clusters
                    .iter()
                    .any(|o| o.len() < c.len() && t.iter().all(|x| o.binary_search(x).is_ok())),
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterParams {
    /// Common-neighbour threshold T.
    pub t: usize,
    /// Number of random draws.
    pub rounds: usize,
    /// Tuple order; 3 selects the triplet test.
    pub ell: usize,
    /// Keep only candidates with at least T neighbours inside the candidate set.
    pub trimming: bool,
}

impl ClusterParams {
    pub fn validate(&self) -> Result<()> {
        if self.t == 0 || self.rounds == 0 || self.ell < 3 {
            return Err(Error::InvalidParameter(format!(
                "T={}, rounds={}, ell={} (need T >= 1, rounds >= 1, ell >= 3)",
                self.t, self.rounds, self.ell
            )));
        }
        Ok(())
    }
}

/// Constants in the default threshold and round count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterConstants {
    /// T = floor(p k / (t_divisor m)) for ell = 3, divided further by 2^ell above.
    pub t_divisor: f64,
    /// rounds = ceil(rounds_factor * k^(ell-2) * m * ln(m)^2), without the k factor for ell = 3.
    pub rounds_factor: f64,
}

impl Default for ClusterConstants {
    fn default() -> Self {
        Self {
            t_divisor: 10.0,
            rounds_factor: 10.0,
        }
    }
}

/// Threshold and round count from the problem size with the default constants.
pub fn default_params(p: usize, k: usize, m: usize, ell: usize) -> Result<ClusterParams> {
    params_with(p, k, m, ell, &ClusterConstants::default())
}

pub fn params_with(
    p: usize,
    k: usize,
    m: usize,
    ell: usize,
    c: &ClusterConstants,
) -> Result<ClusterParams> {
    if p == 0 || k == 0 || m == 0 || ell < 3 {
        return Err(Error::InvalidParameter(format!(
            "p={p}, k={k}, m={m}, ell={ell}"
        )));
    }
    let (pf, kf, mf) = (p as f64, k as f64, m as f64);
    let ln2 = mf.ln().powi(2);
    let (t, rounds) = if ell == 3 {
        (
            (pf * kf / (c.t_divisor * mf)).floor(),
            (c.rounds_factor * mf * ln2).ceil(),
        )
    } else {
        let scale = 2f64.powi(ell as i32);
        (
            (pf * kf / (c.t_divisor * mf * scale)).floor(),
            (c.rounds_factor * kf.powi(ell as i32 - 2) * mf * ln2).ceil(),
        )
    };
    if t < 1.0 {
        return Err(Error::ThresholdUnderflow { p, k, m, ell });
    }
    Ok(ClusterParams {
        t: t as usize,
        rounds: (rounds as usize).max(1),
        ell,
        trimming: false,
    })
}

/// `{w in s_prime : |N(w) ∩ s_prime| >= t}`.
pub fn trim_candidate_set(
    graph: &ConnectionGraph,
    s_prime: &[usize],
    t: usize,
) -> Result<Vec<usize>> {
    if let Some(&bad) = s_prime.iter().find(|&&w| w >= graph.p()) {
        return Err(Error::InvalidNodes(format!(
            "node {bad} out of range (p={})",
            graph.p()
        )));
    }
    let set = BitSet::from_indices(graph.p(), s_prime.iter().copied());
    Ok(trim_bits(graph, &set, t).to_vec())
}

pub(crate) fn trim_bits(graph: &ConnectionGraph, set: &BitSet, t: usize) -> BitSet {
    let mut out = graph.nodes_with_common_at_least(set.words(), t);
    for (o, s) in out.words_mut().iter_mut().zip(set.words()) {
        *o &= s;
    }
    out
}

/// Ground-truth clusters `{j : i in supp X_j}`, one per coordinate that occurs.
pub fn oracle_clustering(set: &SampleSet) -> Result<OverlapClustering> {
    Ok(oracle_from_codes(set.truth()?))
}

/// [`oracle_clustering`] from the codes alone.
pub fn oracle_from_codes(codes: &[SparseCode]) -> OverlapClustering {
    let m = codes
        .iter()
        .flat_map(|c| c.support.iter())
        .max()
        .map_or(0, |&x| x + 1);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); m];
    for (j, c) in codes.iter().enumerate() {
        for &i in &c.support {
            members[i].push(j);
        }
    }
    let mut out = OverlapClustering::default();
    for (i, mem) in members.into_iter().enumerate() {
        if !mem.is_empty() {
            out.clusters.push(mem);
            out.provenance.push(Provenance::Coordinate(i));
        }
    }
    out
}

/// Result of one random round.
pub(crate) enum Round {
    /// No valid tuple could be drawn.
    Skipped,
    /// The tuple failed the common-neighbour test.
    Rejected,
    Candidate {
        set: BitSet,
        tuple: Vec<usize>,
    },
}

struct Candidates {
    sets: Vec<BitSet>,
    tuples: Vec<Vec<Vec<usize>>>,
    skipped: usize,
}

const ROUND_CHUNK: usize = 512;

/// Run `rounds` independent rounds in parallel, merging distinct candidate
/// sets in round order.
fn collect_rounds<F>(rounds: usize, f: F) -> Candidates
where
    F: Fn(usize) -> Round + Sync,
{
    let mut index: HashMap<BitSet, usize> = HashMap::new();
    let mut out = Candidates {
        sets: Vec::new(),
        tuples: Vec::new(),
        skipped: 0,
    };
    let mut start = 0;
    while start < rounds {
        let end = (start + ROUND_CHUNK).min(rounds);
        let batch: Vec<Round> = (start..end).into_par_iter().map(&f).collect();
        for r in batch {
            match r {
                Round::Skipped => out.skipped += 1,
                Round::Rejected => {}
                Round::Candidate { set, tuple } => match index.get(&set) {
                    Some(&i) => out.tuples[i].push(tuple),
                    None => {
                        index.insert(set.clone(), out.sets.len());
                        out.sets.push(set);
                        out.tuples.push(vec![tuple]);
                    }
                },
            }
        }
        start = end;
    }
    out
}

/// Minimal-set deletion. Candidates are visited by ascending size; a set is
/// kept if at least one of its generating tuples lies in no strictly smaller
/// retained set.
fn select_minimal(p: usize, cands: Candidates) -> OverlapClustering {
    let sizes: Vec<usize> = cands.sets.iter().map(BitSet::count).collect();
    let mut order: Vec<usize> = (0..cands.sets.len()).collect();
    order.sort_by_key(|&i| (sizes[i], i));

    let mut by_node: Vec<Vec<usize>> = vec![Vec::new(); p];
    let mut out = OverlapClustering::default();
    for c in order {
        let size = sizes[c];
        let inside_smaller = |tuple: &Vec<usize>| {
            by_node[tuple[0]]
                .iter()
                .any(|&r| sizes[r] < size && tuple[1..].iter().all(|&x| cands.sets[r].contains(x)))
        };
        let mut tuples = cands.tuples[c].clone();
        tuples.sort();
        tuples.dedup();
        if let Some(free) = tuples.iter().find(|t| !inside_smaller(t)) {
            let free = free.clone();
            let members = cands.sets[c].to_vec();
            for &w in &members {
                by_node[w].push(c);
            }
            out.clusters.push(members);
            out.provenance.push(Provenance::Tuple(free));
        }
    }
    out
}

/// Overlapping-clustering algorithm selectable by name.
pub trait ClusterStrategy: Named + Send + Sync {
    fn cluster(
        &self,
        graph: &ConnectionGraph,
        params: &ClusterParams,
        seed: u64,
    ) -> Result<OverlapClustering>;
}

/// Registry with the built-in strategies: `triplet` and `tuple`.
pub fn cluster_registry() -> Registry<dyn ClusterStrategy> {
    let mut r: Registry<dyn ClusterStrategy> = Registry::new();
    r.register(Arc::new(TripletCluster));
    r.register(Arc::new(TupleCluster));
    r
}

/// Triplet-test clustering (random edges).
pub fn overlapping_cluster(
    graph: &ConnectionGraph,
    params: &ClusterParams,
    seed: u64,
) -> Result<OverlapClustering> {
    TripletCluster.cluster(graph, params, seed)
}

/// Tuple-test clustering of order `params.ell`.
pub fn overlapping_cluster_l(
    graph: &ConnectionGraph,
    params: &ClusterParams,
    seed: u64,
) -> Result<OverlapClustering> {
    TupleCluster.cluster(graph, params, seed)
}

/// Index of the `k`-th set bit (0-based) in `words`.
pub(crate) fn select_bit(words: &[u64], mut k: usize) -> usize {
    for (wi, &w) in words.iter().enumerate() {
        let c = w.count_ones() as usize;
        if k < c {
            let mut w = w;
            for _ in 0..k {
                w &= w - 1;
            }
            return wi * 64 + w.trailing_zeros() as usize;
        }
        k -= c;
    }
    unreachable!("select_bit past the last set bit")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SparseCode;
    use proptest::prelude::*;

    #[test]
    fn default_params_examples() {
        let d = default_params(1000, 5, 100, 3).unwrap();
        assert_eq!(d.t, 5);
        assert_eq!(
            d.rounds,
            (10.0 * 100.0 * 100f64.ln().powi(2)).ceil() as usize
        );
        assert!(matches!(
            default_params(10, 1, 100, 3),
            Err(Error::ThresholdUnderflow { .. })
        ));
        // 2048*4 / (10*64*16) = 0.8
        assert!(matches!(
            default_params(2048, 4, 64, 4),
            Err(Error::ThresholdUnderflow { .. })
        ));
        let d = default_params(20480, 4, 64, 4).unwrap();
        assert_eq!(d.t, 8);
        assert_eq!(
            d.rounds,
            (10.0 * 16.0 * 64.0 * 64f64.ln().powi(2)).ceil() as usize
        );
    }

    #[test]
    fn trim_examples() {
        // clique on {0,1,2,3} plus isolated node 4
        let mut edges = Vec::new();
        for i in 0..4 {
            for j in i + 1..4 {
                edges.push((i, j));
            }
        }
        let g = ConnectionGraph::from_edges(5, 0.5, &edges).unwrap();
        assert_eq!(
            trim_candidate_set(&g, &[0, 1, 2, 3], 3).unwrap(),
            vec![0, 1, 2, 3]
        );
        assert_eq!(
            trim_candidate_set(&g, &[0, 1, 2, 3, 4], 3).unwrap(),
            vec![0, 1, 2, 3]
        );
    }

    #[test]
    fn oracle_examples() {
        let one = SampleSet::new(
            1,
            vec![0.0],
            Some(vec![SparseCode {
                support: vec![2, 5],
                values: vec![1.0, 1.0],
            }]),
        )
        .unwrap();
        let o = oracle_clustering(&one).unwrap();
        assert_eq!(o.clusters, vec![vec![0], vec![0]]);
        assert_eq!(
            o.provenance,
            vec![Provenance::Coordinate(2), Provenance::Coordinate(5)]
        );

        let none = SampleSet::new(1, vec![], Some(vec![])).unwrap();
        assert!(oracle_clustering(&none).unwrap().is_empty());

        let bare = SampleSet::new(1, vec![0.0], None).unwrap();
        assert!(matches!(
            oracle_clustering(&bare),
            Err(Error::NoGroundTruth)
        ));
    }

    #[test]
    fn select_minimal_drops_supersets_and_duplicates() {
        let p = 10;
        let mk = |v: &[usize]| BitSet::from_indices(p, v.iter().copied());
        let cands = Candidates {
            sets: vec![mk(&[0, 1, 2, 3, 4, 5]), mk(&[0, 1, 2]), mk(&[3, 4, 5])],
            tuples: vec![
                vec![vec![0, 1], vec![0, 1]],
                vec![vec![0, 1]],
                vec![vec![3, 4], vec![3, 5]],
            ],
            skipped: 0,
        };
        let out = select_minimal(p, cands);
        assert_eq!(out.as_sorted_sets(), vec![vec![0, 1, 2], vec![3, 4, 5]]);
        assert!(out.satisfies_survivor_condition());
    }

    #[test]
    fn superset_with_one_free_tuple_survives() {
        let p = 10;
        let mk = |v: &[usize]| BitSet::from_indices(p, v.iter().copied());
        let cands = Candidates {
            sets: vec![mk(&[0, 1, 2, 6, 7]), mk(&[0, 1, 2])],
            tuples: vec![vec![vec![0, 1], vec![6, 7]], vec![vec![1, 2]]],
            skipped: 0,
        };
        let out = select_minimal(p, cands);
        assert_eq!(out.len(), 2);
        assert_eq!(out.provenance[1], Provenance::Tuple(vec![6, 7]));
    }

    #[test]
    fn registry_lists_both_strategies() {
        let r = cluster_registry();
        assert_eq!(r.names(), vec!["triplet", "tuple"]);
        assert!(matches!(r.get("nope"), Err(Error::UnknownStrategy { .. })));
    }

    proptest! {
        #[test]
        fn select_bit_matches_iteration(words in proptest::collection::vec(any::<u64>(), 1..5), k in 0usize..320) {
            let bits: Vec<usize> = crate::conngraph::iter_bits(&words).collect();
            prop_assume!(k < bits.len());
            prop_assert_eq!(select_bit(&words, k), bits[k]);
        }

        #[test]
        fn select_minimal_output_satisfies_survivor_condition(
            raw in proptest::collection::vec((proptest::collection::btree_set(0usize..20, 2..8), 0usize..6, 0usize..6), 1..25)
        ) {
            let p = 20;
            let mut index: HashMap<BitSet, usize> = HashMap::new();
            let mut cands = Candidates { sets: vec![], tuples: vec![], skipped: 0 };
            for (members, a, b) in raw {
                let v: Vec<usize> = members.into_iter().collect();
                let (a, b) = (v[a % v.len()], v[b % v.len()]);
                if a == b { continue; }
                let tuple = vec![a.min(b), a.max(b)];
                let set = BitSet::from_indices(p, v);
                match index.get(&set) {
                    Some(&i) => cands.tuples[i].push(tuple),
                    None => {
                        index.insert(set.clone(), cands.sets.len());
                        cands.sets.push(set);
                        cands.tuples.push(vec![tuple]);
                    }
                }
            }
            let out = select_minimal(p, cands);
            prop_assert!(out.satisfies_survivor_condition());
        }
    }
}
