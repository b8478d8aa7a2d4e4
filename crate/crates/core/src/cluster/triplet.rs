use rand::Rng;

use super::{
    collect_rounds, select_bit, select_minimal, trim_bits, ClusterParams, ClusterStrategy,
    OverlapClustering, Round,
};
use crate::conngraph::{and_count, BitSet, ConnectionGraph};
use crate::error::{Error, Result};
use crate::registry::Named;
use crate::rng;

/// Random-edge triplet test.
pub struct TripletCluster;

impl Named for TripletCluster {
    fn name(&self) -> &'static str {
        "triplet"
    }
}

/// Untrimmed candidate set `{w : |N(u) ∩ N(v) ∩ N(w)| >= t} ∪ {u, v}`.
pub fn pair_candidate_set(graph: &ConnectionGraph, u: usize, v: usize, t: usize) -> BitSet {
    let common: Vec<u64> = graph
        .row(u)
        .iter()
        .zip(graph.row(v))
        .map(|(a, b)| a & b)
        .collect();
    let mut set = graph.nodes_with_common_at_least(&common, t);
    set.insert(u);
    set.insert(v);
    set
}

impl ClusterStrategy for TripletCluster {
    fn cluster(
        &self,
        graph: &ConnectionGraph,
        params: &ClusterParams,
        seed: u64,
    ) -> Result<OverlapClustering> {
        params.validate()?;
        if params.ell != 3 {
            return Err(Error::InvalidParameter(format!(
                "the triplet test needs ell = 3, got {}",
                params.ell
            )));
        }
        if graph.edge_count() == 0 {
            return Err(Error::EmptyGraph);
        }
        // cumulative degrees: a uniform draw below 2|E| picks an edge endpoint
        // with probability proportional to degree, then a uniform neighbour
        let mut cum = Vec::with_capacity(graph.p() + 1);
        cum.push(0usize);
        for &d in graph.degrees() {
            cum.push(cum.last().unwrap() + d);
        }
        let total = *cum.last().unwrap();

        let cands = collect_rounds(params.rounds, |r| {
            let mut rng = rng::stream(seed, "cluster-round", r as u64);
            let x = rng.random_range(0..total);
            let u = cum.partition_point(|&c| c <= x) - 1;
            let v = select_bit(graph.row(u), x - cum[u]);
            // with fewer than T common neighbours no w can pass, leaving {u, v}
            if and_count(graph.row(u), graph.row(v)) < params.t {
                return Round::Rejected;
            }
            let mut set = pair_candidate_set(graph, u, v, params.t);
            if params.trimming {
                set = trim_bits(graph, &set, params.t);
            }
            Round::Candidate {
                set,
                tuple: vec![u.min(v), u.max(v)],
            }
        });
        Ok(select_minimal(graph.p(), cands))
    }
}
