use rand::seq::index;
use rand::Rng;

use super::{
    collect_rounds, select_bit, select_minimal, trim_bits, ClusterParams, ClusterStrategy,
    OverlapClustering, Round,
};
use crate::conngraph::{and_count, ConnectionGraph};
use crate::error::{Error, Result};
use crate::registry::Named;
use crate::rng;

/// Random-node ell-tuple test.
pub struct TupleCluster;

impl Named for TupleCluster {
    fn name(&self) -> &'static str {
        "tuple"
    }
}

impl ClusterStrategy for TupleCluster {
    fn cluster(
        &self,
        graph: &ConnectionGraph,
        params: &ClusterParams,
        seed: u64,
    ) -> Result<OverlapClustering> {
        params.validate()?;
        let p = graph.p();
        if p == 0 {
            return Err(Error::EmptyGraph);
        }
        let need = params.ell - 1;
        let t = params.t;
        let cands = collect_rounds(params.rounds, |r| {
            let mut rng = rng::stream(seed, "cluster-round", r as u64);
            let u = rng.random_range(0..p);
            let d = graph.degree(u);
            if d < need {
                return Round::Skipped;
            }
            let nbrs: Vec<usize> = index::sample(&mut rng, d, need)
                .iter()
                .map(|k| select_bit(graph.row(u), k))
                .collect();
            // base = N(u) ∩ N(u_1) ∩ .. ∩ N(u_{ell-2})
            let mut base = graph.row(u).to_vec();
            for &x in &nbrs[..need - 1] {
                base.iter_mut().zip(graph.row(x)).for_each(|(a, b)| *a &= b);
            }
            if and_count(&base, graph.row(nbrs[need - 1])) < t {
                return Round::Rejected;
            }
            let mut set = graph.nodes_with_common_at_least(&base, t);
            for &x in &nbrs {
                set.insert(x);
            }
            if params.trimming {
                set = trim_bits(graph, &set, t);
            }
            let mut tuple = nbrs;
            tuple.sort_unstable();
            Round::Candidate { set, tuple }
        });
        if cands.skipped == params.rounds {
            return Err(Error::AllRoundsSkipped(params.rounds));
        }
        Ok(select_minimal(p, cands))
    }
}
