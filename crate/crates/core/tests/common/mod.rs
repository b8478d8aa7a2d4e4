#![allow(dead_code)]

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use sparsedict::cluster::{
    oracle_clustering, overlapping_cluster, ClusterParams, OverlapClustering,
};
use sparsedict::conngraph::{build_graph, ConnectionGraph};
use sparsedict::eval::clustering_score;
use sparsedict::rng::derive_seed;
use sparsedict::{
    gen_random_dictionary, generate_samples, DictOptions, Dictionary, GenConfig, SampleSet,
    SparseCode,
};

/// A planted dictionary together with samples drawn from it.
pub struct Instance {
    pub dict: Dictionary,
    pub samples: SampleSet,
}

impl Instance {
    pub fn new(cfg: &GenConfig, opts: &DictOptions, p: usize) -> Self {
        let dict = gen_random_dictionary(cfg.n, cfg.m, opts, cfg.seed).expect("dictionary");
        let samples = generate_samples(&dict, cfg, p).expect("samples");
        Self { dict, samples }
    }

    pub fn codes(&self) -> &[SparseCode] {
        self.samples.truth().expect("ground truth")
    }

    pub fn oracle(&self) -> OverlapClustering {
        oracle_clustering(&self.samples).expect("oracle")
    }

    pub fn graph(&self, tau: f64) -> ConnectionGraph {
        build_graph(&self.samples, tau)
    }
}

pub fn gen_config(n: usize, m: usize, k: usize, seed: u64) -> GenConfig {
    GenConfig {
        n,
        m,
        k,
        seed,
        ..Default::default()
    }
}

/// Triplet clustering with the seed derivation the pipeline uses.
pub fn cluster(
    graph: &ConnectionGraph,
    params: &ClusterParams,
    seed: u64,
) -> sparsedict::Result<OverlapClustering> {
    overlapping_cluster(graph, params, derive_seed(seed, "cluster", 0))
}

pub fn is_exact(oracle: &OverlapClustering, found: &OverlapClustering) -> bool {
    clustering_score(oracle, found).exact_match()
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Verdict of one criterion.
pub struct Outcome {
    pub pass: bool,
    pub detail: String,
}

impl Outcome {
    pub fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

pub type Check = (&'static str, fn() -> Outcome);

/// Runs the checks named on the command line (all when none are), prints a
/// `PASS`/`FAIL` line for each and exits nonzero if any failed.
pub fn run_checks(checks: &[Check]) {
    let filters: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = Vec::new();
    let mut ran = 0;
    for (name, f) in checks {
        if !filters.is_empty() && !filters.iter().any(|flt| name.contains(flt.as_str())) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Outcome::new(false, format!("panicked: {msg}"))
        });
        let tag = if outcome.pass { "PASS" } else { "FAIL" };
        println!(
            "{tag} {name} [{:.1}s] {}",
            start.elapsed().as_secs_f64(),
            outcome.detail
        );
        if !outcome.pass {
            failed.push(*name);
        }
    }
    println!("{} of {ran} checks passed", ran - failed.len());
    if !failed.is_empty() {
        println!("failed: {}", failed.join(", "));
        std::process::exit(1);
    }
}
