//! End-to-end experiment runner used by the command line driver.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::Serialize;

use crate::cluster::{
    cluster_registry, oracle_clustering, params_with, ClusterConstants, ClusterParams,
    OverlapClustering,
};
use crate::conngraph::{build_graph, DEFAULT_TAU};
use crate::error::{Error, Result};
use crate::eval::{align_partial, clustering_score, sign_accuracy};
use crate::io;
use crate::model::{
    gen_random_dictionary, generate_samples, max_pairwise_support_overlap, DictOptions, Dictionary,
    GenConfig, SupportDist,
};
use crate::recover::{recover_registry, zeta, RecoverConfig, Recovery};
use crate::refine::{refine, GeneratorSource, RefineConfig, RefineTrace};
use crate::rng;

/// Last stage a pipeline run executes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Gen,
    Graph,
    Cluster,
    Recover,
    Refine,
    Eval,
}

impl Stage {
    pub fn as_str(&self) -> &'static str {
        match self {
            Stage::Gen => "gen",
            Stage::Graph => "graph",
            Stage::Cluster => "cluster",
            Stage::Recover => "recover",
            Stage::Refine => "refine",
            Stage::Eval => "eval",
        }
    }
}

impl std::str::FromStr for Stage {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "gen" => Stage::Gen,
            "graph" => Stage::Graph,
            "cluster" => Stage::Cluster,
            "recover" => Stage::Recover,
            "refine" => Stage::Refine,
            "eval" | "all" => Stage::Eval,
            _ => return Err(Error::Parse(format!("unknown stage '{s}'"))),
        })
    }
}

/// Everything needed to reproduce one run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub gen: GenConfig,
    pub p: usize,
    pub target_mu: Option<f64>,
    pub orthonormalize: bool,
    /// Connection-graph threshold.
    pub tau: f64,
    /// Clustering strategy name.
    pub cluster: String,
    pub ell: usize,
    pub t: Option<usize>,
    pub cluster_rounds: Option<usize>,
    pub constants: ClusterConstants,
    /// Defaults to on for correlated supports.
    pub trimming: Option<bool>,
    /// Recovery strategies to run, in order.
    pub recover: Vec<String>,
    pub label_cap: usize,
    pub power_tol: f64,
    pub power_max_iter: usize,
    /// Recovery whose estimate seeds refinement.
    pub refine_from: String,
    pub refine_rounds: usize,
    pub refine_batch: Option<usize>,
    pub refine_tau: f64,
    pub target_error: Option<f64>,
    /// Round changes below this never count as growth.
    pub refine_divergence_floor: f64,
    pub stage: Stage,
    pub out_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            gen: GenConfig::default(),
            p: 5000,
            target_mu: None,
            orthonormalize: false,
            tau: DEFAULT_TAU,
            cluster: "triplet".into(),
            ell: 3,
            t: None,
            cluster_rounds: None,
            constants: ClusterConstants::default(),
            trimming: None,
            recover: vec!["average".into(), "svd".into()],
            label_cap: 500,
            power_tol: 1e-10,
            power_max_iter: 10_000,
            refine_from: "average".into(),
            refine_rounds: 10,
            refine_batch: None,
            refine_tau: 0.5,
            target_error: None,
            refine_divergence_floor: RefineConfig::default().divergence_floor,
            stage: Stage::Eval,
            out_dir: None,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Parse(format!("bad value '{v}' for {key}")))
}

fn parse_opt<T: std::str::FromStr>(key: &str, v: &str) -> Result<Option<T>> {
    if v.is_empty() || v == "none" {
        Ok(None)
    } else {
        parse(key, v).map(Some)
    }
}

fn opt_str<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "none".into(), T::to_string)
}

impl ExperimentConfig {
    /// Samples for the size preset `ceil((m/k)^2 ln m)`.
    pub fn theorem1_p(m: usize, k: usize) -> usize {
        let (m, k) = (m as f64, k as f64);
        ((m * m / (k * k)) * m.ln()).ceil() as usize
    }

    /// Apply one `key=value` setting.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "n" => self.gen.n = parse(key, v)?,
            "m" => self.gen.m = parse(key, v)?,
            "k" => self.gen.k = parse(key, v)?,
            "c" | "c_max" => self.gen.c_max = parse(key, v)?,
            "value_dist" => self.gen.value_dist = v.parse()?,
            "support_dist" => self.gen.support_dist = v.parse()?,
            "block_size" => self.gen.block_size = parse(key, v)?,
            "inflation" => self.gen.inflation = parse(key, v)?,
            "noise_sigma" | "sigma" => self.gen.noise_sigma = parse(key, v)?,
            "seed" => self.gen.seed = parse(key, v)?,
            "p" => self.p = parse(key, v)?,
            "preset" => match v {
                "theorem1" => self.p = Self::theorem1_p(self.gen.m, self.gen.k),
                _ => return Err(Error::Parse(format!("unknown preset '{v}'"))),
            },
            "target_mu" => self.target_mu = parse_opt(key, v)?,
            "orthonormalize" => self.orthonormalize = parse(key, v)?,
            "tau" => self.tau = parse(key, v)?,
            "cluster" => self.cluster = v.to_string(),
            "ell" => self.ell = parse(key, v)?,
            "t" | "T" => self.t = parse_opt(key, v)?,
            "cluster_rounds" => self.cluster_rounds = parse_opt(key, v)?,
            "t_divisor" => self.constants.t_divisor = parse(key, v)?,
            "rounds_factor" => self.constants.rounds_factor = parse(key, v)?,
            "trimming" => self.trimming = parse_opt(key, v)?,
            "recover" => {
                self.recover = v
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(String::from)
                    .collect()
            }
            "label_cap" => self.label_cap = parse(key, v)?,
            "power_tol" => self.power_tol = parse(key, v)?,
            "power_max_iter" => self.power_max_iter = parse(key, v)?,
            "refine_from" => self.refine_from = v.to_string(),
            "refine_rounds" => self.refine_rounds = parse(key, v)?,
            "refine_batch" => self.refine_batch = parse_opt(key, v)?,
            "refine_tau" => self.refine_tau = parse(key, v)?,
            "target_error" => self.target_error = parse_opt(key, v)?,
            "refine_divergence_floor" => self.refine_divergence_floor = parse(key, v)?,
            "stage" => self.stage = v.parse()?,
            "out_dir" => self.out_dir = parse_opt(key, v)?,
            _ => return Err(Error::Parse(format!("unknown config key '{key}'"))),
        }
        Ok(())
    }

    /// Parse a flat `key=value` text on top of the defaults.
    pub fn from_kv_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (k, v) in io::parse_key_values(text)? {
            cfg.set(&k, &v)?;
        }
        Ok(cfg)
    }

    /// All settings as ordered `key=value` pairs; `from_kv_text` of the
    /// rendering reproduces the config.
    pub fn to_map(&self) -> BTreeMap<&'static str, String> {
        let g = &self.gen;
        BTreeMap::from([
            ("n", g.n.to_string()),
            ("m", g.m.to_string()),
            ("k", g.k.to_string()),
            ("c_max", g.c_max.to_string()),
            ("value_dist", g.value_dist.as_str().into()),
            ("support_dist", g.support_dist.as_str().into()),
            ("block_size", g.block_size.to_string()),
            ("inflation", g.inflation.to_string()),
            ("noise_sigma", g.noise_sigma.to_string()),
            ("seed", g.seed.to_string()),
            ("p", self.p.to_string()),
            ("target_mu", opt_str(&self.target_mu)),
            ("orthonormalize", self.orthonormalize.to_string()),
            ("tau", self.tau.to_string()),
            ("cluster", self.cluster.clone()),
            ("ell", self.ell.to_string()),
            ("t", opt_str(&self.t)),
            ("cluster_rounds", opt_str(&self.cluster_rounds)),
            ("t_divisor", self.constants.t_divisor.to_string()),
            ("rounds_factor", self.constants.rounds_factor.to_string()),
            ("trimming", opt_str(&self.trimming)),
            ("recover", self.recover.join(",")),
            ("label_cap", self.label_cap.to_string()),
            ("power_tol", self.power_tol.to_string()),
            ("power_max_iter", self.power_max_iter.to_string()),
            ("refine_from", self.refine_from.clone()),
            ("refine_rounds", self.refine_rounds.to_string()),
            ("refine_batch", opt_str(&self.refine_batch)),
            ("refine_tau", self.refine_tau.to_string()),
            ("target_error", opt_str(&self.target_error)),
            (
                "refine_divergence_floor",
                self.refine_divergence_floor.to_string(),
            ),
            ("stage", self.stage.as_str().into()),
            (
                "out_dir",
                opt_str(&self.out_dir.as_ref().map(|p| p.display().to_string())),
            ),
        ])
    }

    pub fn to_kv_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.to_map() {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }

    pub fn dict_options(&self) -> DictOptions {
        DictOptions {
            target_mu: self.target_mu,
            orthonormalize: self.orthonormalize,
            ..Default::default()
        }
    }

    /// Clustering parameters after applying overrides.
    pub fn cluster_params(&self) -> Result<ClusterParams> {
        let g = &self.gen;
        let base = match params_with(self.p, g.k, g.m, self.ell, &self.constants) {
            Ok(p) => Some(p),
            Err(Error::ThresholdUnderflow { .. }) if self.t.is_some() => None,
            Err(e) => return Err(e),
        };
        let rounds = self
            .cluster_rounds
            .or(base.map(|b| b.rounds))
            .ok_or_else(|| Error::InvalidParameter("cluster_rounds unset".into()))?;
        let params = ClusterParams {
            t: self.t.or(base.map(|b| b.t)).unwrap_or(0),
            rounds,
            ell: self.ell,
            trimming: self
                .trimming
                .unwrap_or(g.support_dist == SupportDist::CorrelatedBlocks),
        };
        params.validate()?;
        Ok(params)
    }

    pub fn refine_config(&self) -> RefineConfig {
        let m = self.gen.m as f64;
        RefineConfig {
            tau: self.refine_tau,
            batch_size: self
                .refine_batch
                .unwrap_or_else(|| (10.0 * m * m.ln().powi(2)).ceil() as usize),
            rounds: self.refine_rounds,
            target_error: self.target_error,
            divergence_floor: self.refine_divergence_floor,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct GraphSummary {
    pub tau: f64,
    pub edges: usize,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ClusterSummary {
    pub params: Option<ClusterParams>,
    pub found: usize,
    pub oracle: usize,
    pub exact: usize,
    pub missed: usize,
    pub spurious: usize,
    pub exact_match: bool,
    pub min_jaccard: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct RecoverSummary {
    pub method: String,
    pub columns: usize,
    pub max_err: f64,
    pub mean_err: f64,
    pub sign_accuracy: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct RefineSummary {
    pub rounds: usize,
    pub final_max_err: Option<f64>,
    pub trace: RefineTrace,
}

#[derive(Debug, Clone, Serialize)]
pub struct StageFailure {
    pub stage: &'static str,
    pub message: String,
}

/// Machine-readable summary of a pipeline run.
#[derive(Debug, Clone, Default, Serialize)]
pub struct PipelineReport {
    pub config: BTreeMap<&'static str, String>,
    pub seed: u64,
    pub mu: Option<f64>,
    pub zeta: Option<f64>,
    pub max_support_overlap: Option<usize>,
    pub graph: Option<GraphSummary>,
    pub cluster: Option<ClusterSummary>,
    pub recover: Vec<RecoverSummary>,
    pub refine: Option<RefineSummary>,
    pub failure: Option<StageFailure>,
}

impl PipelineReport {
    pub fn ok(&self) -> bool {
        self.failure.is_none()
    }

    fn recover_err(&self, method: &str) -> Option<f64> {
        self.recover
            .iter()
            .find(|r| r.method == method)
            .map(|r| r.max_err)
    }
}

pub const CSV_HEADER: &str =
    "axis,value,seed,status,mu,edges,clusters,exact_match,missed,spurious,average_max_err,svd_max_err,refine_max_err,error";

fn cell<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

/// One CSV row (without trailing newline) matching [`CSV_HEADER`].
pub fn csv_row(axis: &str, value: &str, r: &PipelineReport) -> String {
    let cl = r.cluster.as_ref();
    let err = r
        .failure
        .as_ref()
        .map(|f| format!("{}: {}", f.stage, f.message).replace([',', '\n'], ";"))
        .unwrap_or_default();
    [
        axis.to_string(),
        value.to_string(),
        r.seed.to_string(),
        if r.ok() { "ok".into() } else { "failed".into() },
        cell(r.mu),
        cell(r.graph.as_ref().map(|g| g.edges)),
        cell(cl.map(|c| c.found)),
        cell(cl.map(|c| c.exact_match)),
        cell(cl.map(|c| c.missed)),
        cell(cl.map(|c| c.spurious)),
        cell(r.recover_err("average")),
        cell(r.recover_err("svd")),
        cell(r.refine.as_ref().and_then(|f| f.final_max_err)),
        err,
    ]
    .join(",")
}

fn out_file(cfg: &ExperimentConfig, name: &str) -> Option<PathBuf> {
    cfg.out_dir.as_ref().map(|d| d.join(name))
}

fn recovery_summary(
    method: &str,
    rec: &Recovery,
    truth: &Dictionary,
    codes: &[crate::model::SparseCode],
) -> Result<RecoverSummary> {
    let al = align_partial(truth, &rec.dictionary)?;
    Ok(RecoverSummary {
        method: method.to_string(),
        columns: rec.dictionary.m(),
        max_err: al.max_err,
        mean_err: al.mean_err(),
        sign_accuracy: rec.signed.as_ref().map(|s| sign_accuracy(codes, s)),
    })
}

/// Run the configured stages. Failures are recorded in the report with the
/// stage name; later stages are then skipped.
pub fn run_pipeline(cfg: &ExperimentConfig) -> PipelineReport {
    let mut report = PipelineReport {
        config: cfg.to_map(),
        seed: cfg.gen.seed,
        ..Default::default()
    };
    if let Err((stage, e)) = run_stages(cfg, &mut report) {
        report.failure = Some(StageFailure {
            stage,
            message: e.to_string(),
        });
    }
    if let Some(path) = out_file(cfg, "report.json") {
        let _ = std::fs::write(
            path,
            serde_json::to_string_pretty(&report).unwrap_or_default(),
        );
    }
    report
}

type StageResult<T> = std::result::Result<T, (&'static str, Error)>;

fn tag<T>(stage: &'static str, r: Result<T>) -> StageResult<T> {
    r.map_err(|e| (stage, e))
}

fn run_stages(cfg: &ExperimentConfig, report: &mut PipelineReport) -> StageResult<()> {
    let g = &cfg.gen;
    let seed = g.seed;
    if let Some(dir) = &cfg.out_dir {
        tag("gen", std::fs::create_dir_all(dir).map_err(Error::from))?;
    }

    // gen
    let truth = tag(
        "gen",
        gen_random_dictionary(g.n, g.m, &cfg.dict_options(), seed),
    )?;
    let samples = tag("gen", generate_samples(&truth, g, cfg.p))?;
    report.mu = Some(truth.mu());
    report.zeta = Some(zeta(truth.mu(), g.k, g.n, g.m));
    report.max_support_overlap = Some(tag("gen", max_pairwise_support_overlap(&samples))?);
    if let Some(dir) = &cfg.out_dir {
        tag("gen", write_gen_files(dir, cfg, &truth, &samples))?;
    }
    if cfg.stage == Stage::Gen {
        return Ok(());
    }

    // graph
    let graph = build_graph(&samples, cfg.tau);
    report.graph = Some(GraphSummary {
        tau: cfg.tau,
        edges: graph.edge_count(),
    });
    if let Some(path) = out_file(cfg, "graph.txt") {
        tag("graph", io::write_graph(&path, &graph))?;
    }
    if cfg.stage == Stage::Graph {
        return Ok(());
    }

    // cluster
    let params = tag("cluster", cfg.cluster_params())?;
    let strategy = tag("cluster", cluster_registry().get(&cfg.cluster))?;
    let clustering: OverlapClustering = tag(
        "cluster",
        strategy.cluster(&graph, &params, rng::derive_seed(seed, "cluster", 0)),
    )?;
    let oracle = tag("cluster", oracle_clustering(&samples))?;
    let score = clustering_score(&oracle, &clustering);
    report.cluster = Some(ClusterSummary {
        params: Some(params),
        found: clustering.len(),
        oracle: oracle.len(),
        exact: score.exact,
        missed: score.missed,
        spurious: score.spurious,
        exact_match: score.exact_match(),
        min_jaccard: score.jaccard.iter().copied().fold(1.0, f64::min),
    });
    if let Some(path) = out_file(cfg, "clusters.txt") {
        tag("cluster", io::write_clustering(&path, &clustering))?;
    }
    if cfg.stage == Stage::Cluster {
        return Ok(());
    }

    // recover
    let registry = recover_registry();
    let rcfg = RecoverConfig {
        tol: cfg.power_tol,
        max_iter: cfg.power_max_iter,
        seed: rng::derive_seed(seed, "recover", 0),
        zeta: report.zeta,
        label_cap: cfg.label_cap,
    };
    let codes = tag("recover", samples.truth())?;
    let mut estimates: Vec<(String, Dictionary)> = Vec::new();
    for method in &cfg.recover {
        let strategy = tag("recover", registry.get(method))?;
        let rec = tag("recover", strategy.recover(&samples, &clustering, &rcfg))?;
        report
            .recover
            .push(tag("eval", recovery_summary(method, &rec, &truth, codes))?);
        if let Some(dir) = &cfg.out_dir {
            tag(
                "recover",
                io::write_dictionary(&dir.join(format!("estimate_{method}.bin")), &rec.dictionary),
            )?;
            tag(
                "recover",
                io::write_jsonl(
                    &dir.join(format!("diagnostics_{method}.jsonl")),
                    &rec.columns,
                ),
            )?;
        }
        estimates.push((method.clone(), rec.dictionary));
    }
    if cfg.stage == Stage::Recover {
        return Ok(());
    }

    // refine
    let b0 = estimates
        .iter()
        .find(|(m, _)| *m == cfg.refine_from)
        .map(|(_, d)| d.clone())
        .ok_or_else(|| {
            (
                "refine",
                Error::InvalidParameter(format!(
                    "refine_from '{}' was not recovered",
                    cfg.refine_from
                )),
            )
        })?;
    let mut source = GeneratorSource::new(
        truth.clone(),
        GenConfig {
            seed: rng::derive_seed(seed, "refine", 0),
            ..g.clone()
        },
    );
    let (refined, trace) = tag(
        "refine",
        refine(&b0, &mut source, &cfg.refine_config(), Some(&truth)),
    )?;
    if let Some(dir) = &cfg.out_dir {
        tag(
            "refine",
            io::write_dictionary(&dir.join("refined.bin"), &refined),
        )?;
        tag(
            "refine",
            io::write_jsonl(&dir.join("refine_trace.jsonl"), &trace.rounds),
        )?;
    }
    let final_max_err = match trace.rounds.last() {
        Some(r) => r.max_err,
        None => Some(tag("eval", align_partial(&truth, &refined))?.max_err),
    };
    report.refine = Some(RefineSummary {
        rounds: trace.rounds.len(),
        final_max_err,
        trace,
    });
    Ok(())
}

/// Dictionary, samples, codes and the config used to draw them.
pub fn write_gen_files(
    dir: &std::path::Path,
    cfg: &ExperimentConfig,
    truth: &Dictionary,
    samples: &crate::model::SampleSet,
) -> Result<()> {
    io::write_dictionary(&dir.join("dictionary.bin"), truth)?;
    io::write_samples(&dir.join("samples.bin"), samples)?;
    io::write_codes(&dir.join("codes.txt"), samples.truth()?)?;
    std::fs::write(dir.join("config.txt"), cfg.to_kv_text())?;
    Ok(())
}

/// Axes a sweep may vary.
pub const SWEEP_AXES: [&str; 6] = ["k", "p", "sigma", "tau", "T", "ell"];

/// Run one pipeline per value of `axis`; returns the CSV text. Cell `i` uses
/// seed `seed + i` and, with an output directory, its own subdirectory.
pub fn sweep(
    base: &ExperimentConfig,
    axis: &str,
    values: &[String],
    workers: Option<usize>,
) -> Result<String> {
    if !SWEEP_AXES.contains(&axis) {
        return Err(Error::InvalidParameter(format!(
            "sweep axis '{axis}' is not one of {}",
            SWEEP_AXES.join(", ")
        )));
    }
    let cells: Vec<(String, Result<ExperimentConfig>)> = values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let mut cfg = base.clone();
            cfg.gen.seed = base.gen.seed.wrapping_add(i as u64);
            cfg.out_dir = base
                .out_dir
                .as_ref()
                .map(|d| d.join(format!("cell_{i:03}")));
            (v.clone(), cfg.set(axis, v).map(|_| cfg))
        })
        .collect();
    let run = || -> Vec<String> {
        cells
            .par_iter()
            .map(|(v, cfg)| match cfg {
                Ok(cfg) => csv_row(axis, v, &run_pipeline(cfg)),
                Err(e) => {
                    let r = PipelineReport {
                        seed: base.gen.seed,
                        failure: Some(StageFailure {
                            stage: "config",
                            message: e.to_string(),
                        }),
                        ..Default::default()
                    };
                    csv_row(axis, v, &r)
                }
            })
            .collect()
    };
    let rows = match workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| Error::InvalidParameter(e.to_string()))?
            .install(run),
        None => run(),
    };
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r);
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        let mut c = ExperimentConfig::default();
        for (k, v) in [("n", "4"), ("m", "4"), ("k", "1"), ("p", "10")] {
            c.set(k, v).unwrap();
        }
        c
    }

    #[test]
    fn kv_roundtrip() {
        let mut c = small();
        c.set("trimming", "true").unwrap();
        c.set("t", "7").unwrap();
        c.set("recover", "svd").unwrap();
        let back = ExperimentConfig::from_kv_text(&c.to_kv_text()).unwrap();
        assert_eq!(back, c);
        assert!(c.clone().set("bogus", "1").is_err());
    }

    #[test]
    fn theorem1_preset() {
        let mut c = ExperimentConfig::default();
        c.set("preset", "theorem1").unwrap();
        assert_eq!(c.p, ((10000.0 / 9.0) * 100f64.ln()).ceil() as usize);
    }

    #[test]
    fn gen_only_run_reports_mu() {
        let mut c = small();
        c.stage = Stage::Gen;
        let r = run_pipeline(&c);
        assert!(r.ok());
        assert!(r.mu.is_some() && r.graph.is_none());
    }

    #[test]
    fn underflowing_threshold_fails_in_cluster_stage() {
        let r = run_pipeline(&small());
        assert_eq!(r.failure.as_ref().map(|f| f.stage), Some("cluster"));
        assert!(r.graph.is_some());
    }

    #[test]
    fn sweep_shapes() {
        let mut c = small();
        c.stage = Stage::Graph;
        let empty = sweep(&c, "tau", &[], Some(1)).unwrap();
        assert_eq!(empty, format!("{CSV_HEADER}\n"));
        let one = sweep(&c, "tau", &["0.4".into()], Some(1)).unwrap();
        assert_eq!(one.lines().count(), 2);
        assert!(sweep(&c, "n", &[], None).is_err());
    }
}
