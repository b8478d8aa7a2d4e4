//! End-to-end runs at n=512, where the connection graph is reliable for
//! m=100, k=3. T uses divisor 2.5 instead of the library default 10.

use sparsedict::experiment::{run_pipeline, ExperimentConfig, PipelineReport};

fn run(seed: u64, sigma: f64, extra: &[(&str, &str)]) -> PipelineReport {
    let mut cfg = ExperimentConfig::default();
    for (k, v) in [
        ("n", "512"),
        ("m", "100"),
        ("k", "3"),
        ("t_divisor", "2.5"),
        ("refine_rounds", "6"),
        ("preset", "theorem1"),
    ]
    .iter()
    .chain(extra)
    {
        cfg.set(k, v).unwrap();
    }
    cfg.set("seed", &seed.to_string()).unwrap();
    cfg.set("noise_sigma", &sigma.to_string()).unwrap();
    run_pipeline(&cfg)
}

fn recover_err(r: &PipelineReport, method: &str) -> f64 {
    r.recover
        .iter()
        .find(|x| x.method == method)
        .unwrap()
        .max_err
}

#[test]
fn noiseless_pipeline_is_exact_over_seeds() {
    for seed in 0..3 {
        let r = run(seed, 0.0, &[]);
        assert!(r.ok(), "seed {seed}: {:?}", r.failure);
        let cl = r.cluster.as_ref().unwrap();
        assert!(cl.exact_match, "seed {seed}: {cl:?}");
        let avg = r.recover.iter().find(|x| x.method == "average").unwrap();
        assert_eq!(avg.sign_accuracy, Some(1.0), "seed {seed}");
        assert!(avg.max_err < 0.3, "seed {seed}: average {}", avg.max_err);
        assert!(recover_err(&r, "svd") < 0.3, "seed {seed}");
        let fin = r.refine.as_ref().unwrap().final_max_err.unwrap();
        assert!(fin < 1e-6, "seed {seed}: refined {fin}");
    }
}

#[test]
fn noisy_pipeline_clusters_exactly_and_refines() {
    for seed in 0..2 {
        // Fresh noisy batches leave round changes at a sampling floor near 0.04.
        let r = run(seed, 0.01, &[("refine_divergence_floor", "0.1")]);
        assert!(r.ok(), "seed {seed}: {:?}", r.failure);
        assert!(r.cluster.as_ref().unwrap().exact_match, "seed {seed}");
        let start = recover_err(&r, "average");
        assert!(start < 0.3, "seed {seed}: average {start}");
        let fin = r.refine.as_ref().unwrap().final_max_err.unwrap();
        assert!(fin < start / 4.0, "seed {seed}: refined {fin} from {start}");
    }
}
