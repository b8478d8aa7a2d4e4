use std::fmt;
use std::path::{Path, PathBuf};

use sparsedict::cluster::{cluster_registry, oracle_from_codes, OverlapClustering};
use sparsedict::conngraph::build_graph;
use sparsedict::eval::{align_partial, clustering_score, sign_accuracy};
use sparsedict::experiment::{self, run_pipeline, ExperimentConfig, PipelineReport};
use sparsedict::recover::{recover_registry, zeta, RecoverConfig};
use sparsedict::refine::{refine as refine_dictionary, GeneratorSource, PoolSource, SampleSource};
use sparsedict::{io, rng, Dictionary, GenConfig, SparseCode};

use crate::config_args::ConfigArgs;

/// A failure tagged with the stage it happened in.
#[derive(Debug)]
pub struct StageError {
    stage: &'static str,
    message: String,
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.stage, self.message)
    }
}

impl std::error::Error for StageError {}

type CmdResult<T = ()> = Result<T, StageError>;

trait Tag<T> {
    fn tag(self, stage: &'static str) -> CmdResult<T>;
}

impl<T, E: fmt::Display> Tag<T> for Result<T, E> {
    fn tag(self, stage: &'static str) -> CmdResult<T> {
        self.map_err(|e| StageError {
            stage,
            message: e.to_string(),
        })
    }
}

fn fail<T>(stage: &'static str, message: impl Into<String>) -> CmdResult<T> {
    Err(StageError {
        stage,
        message: message.into(),
    })
}

/// Explicit path, else `<out_dir>/<name>`.
fn locate(
    stage: &'static str,
    explicit: Option<PathBuf>,
    cfg: &ExperimentConfig,
    name: &str,
) -> CmdResult<PathBuf> {
    match (explicit, &cfg.out_dir) {
        (Some(p), _) => Ok(p),
        (None, Some(d)) => Ok(d.join(name)),
        (None, None) => fail(
            stage,
            format!("no path given for {name} and no out_dir set"),
        ),
    }
}

/// Like [`locate`] but `None` when the default file is absent.
fn locate_optional(
    explicit: Option<PathBuf>,
    cfg: &ExperimentConfig,
    name: &str,
) -> Option<PathBuf> {
    explicit.or_else(|| {
        cfg.out_dir
            .as_ref()
            .map(|d| d.join(name))
            .filter(|p| p.is_file())
    })
}

fn ensure_parent(path: &Path) -> std::io::Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => std::fs::create_dir_all(p),
        _ => Ok(()),
    }
}

fn read_codes_opt(path: Option<PathBuf>) -> CmdResult<Option<Vec<SparseCode>>> {
    path.map(|p| io::read_codes(&p)).transpose().tag("io")
}

pub fn gen(args: &ConfigArgs) -> CmdResult {
    let cfg = args.resolve().tag("config")?;
    let Some(dir) = cfg.out_dir.clone() else {
        return fail("config", "gen needs --out_dir");
    };
    std::fs::create_dir_all(&dir).tag("gen")?;
    let g = &cfg.gen;
    let truth =
        sparsedict::gen_random_dictionary(g.n, g.m, &cfg.dict_options(), g.seed).tag("gen")?;
    let samples = sparsedict::generate_samples(&truth, g, cfg.p).tag("gen")?;
    let q = sparsedict::max_pairwise_support_overlap(&samples).tag("gen")?;
    experiment::write_gen_files(&dir, &cfg, &truth, &samples).tag("gen")?;
    println!("n={} m={} k={} p={} seed={}", g.n, g.m, g.k, cfg.p, g.seed);
    println!("mu = {:.6}", truth.mu());
    println!("max pairwise support overlap Q = {q}");
    println!("wrote {}", dir.display());
    Ok(())
}

pub fn graph(args: &ConfigArgs, samples: Option<PathBuf>, out: Option<PathBuf>) -> CmdResult {
    let cfg = args.resolve().tag("config")?;
    let input = locate("graph", samples, &cfg, "samples.bin")?;
    let out = locate("graph", out, &cfg, "graph.txt")?;
    let set = io::read_samples(&input, None).tag("graph")?;
    let g = build_graph(&set, cfg.tau);
    ensure_parent(&out).tag("graph")?;
    io::write_graph(&out, &g).tag("graph")?;
    println!("p={} tau={} edges={}", g.p(), g.tau(), g.edge_count());
    println!("wrote {}", out.display());
    Ok(())
}

pub fn cluster(
    args: &ConfigArgs,
    graph: Option<PathBuf>,
    codes: Option<PathBuf>,
    out: Option<PathBuf>,
) -> CmdResult {
    let mut cfg = args.resolve().tag("config")?;
    let gpath = locate("cluster", graph, &cfg, "graph.txt")?;
    let out = locate("cluster", out, &cfg, "clusters.txt")?;
    let codes = read_codes_opt(locate_optional(codes, &cfg, "codes.txt"))?;
    let g = io::read_graph(&gpath).tag("cluster")?;
    cfg.p = g.p();
    let params = cfg.cluster_params().tag("cluster")?;
    let strategy = cluster_registry().get(&cfg.cluster).tag("cluster")?;
    let clustering = strategy
        .cluster(&g, &params, rng::derive_seed(cfg.gen.seed, "cluster", 0))
        .tag("cluster")?;
    ensure_parent(&out).tag("cluster")?;
    io::write_clustering(&out, &clustering).tag("cluster")?;
    println!(
        "strategy={} T={} rounds={} ell={} trimming={} clusters={}",
        cfg.cluster,
        params.t,
        params.rounds,
        params.ell,
        params.trimming,
        clustering.len()
    );
    if let Some(codes) = codes {
        print_cluster_score(&codes, &clustering);
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn print_cluster_score(codes: &[SparseCode], found: &OverlapClustering) {
    let oracle = oracle_from_codes(codes);
    let s = clustering_score(&oracle, found);
    println!(
        "oracle={} exact={} missed={} spurious={} exact_match={}",
        oracle.len(),
        s.exact,
        s.missed,
        s.spurious,
        s.exact_match()
    );
}

pub fn recover(
    args: &ConfigArgs,
    samples: Option<PathBuf>,
    clusters: Option<PathBuf>,
    codes: Option<PathBuf>,
    reference: Option<PathBuf>,
) -> CmdResult {
    let cfg = args.resolve().tag("config")?;
    let spath = locate("recover", samples, &cfg, "samples.bin")?;
    let cpath = locate("recover", clusters, &cfg, "clusters.txt")?;
    let codes = read_codes_opt(locate_optional(codes, &cfg, "codes.txt"))?;
    let reference = locate_optional(reference, &cfg, "dictionary.bin")
        .map(|p| io::read_dictionary(&p))
        .transpose()
        .tag("io")?;
    let set = io::read_samples(&spath, None).tag("recover")?;
    let clustering = io::read_clustering(&cpath).tag("recover")?;
    let rcfg = RecoverConfig {
        tol: cfg.power_tol,
        max_iter: cfg.power_max_iter,
        seed: rng::derive_seed(cfg.gen.seed, "recover", 0),
        zeta: reference
            .as_ref()
            .map(|a| zeta(a.mu(), cfg.gen.k, a.n(), a.m())),
        label_cap: cfg.label_cap,
    };
    let out_dir = cpath.parent().map(Path::to_path_buf).unwrap_or_default();
    let out_dir = cfg.out_dir.clone().unwrap_or(out_dir);
    let registry = recover_registry();
    for method in &cfg.recover {
        let rec = registry
            .get(method)
            .and_then(|s| s.recover(&set, &clustering, &rcfg))
            .tag("recover")?;
        let est = out_dir.join(format!("estimate_{method}.bin"));
        io::write_dictionary(&est, &rec.dictionary).tag("recover")?;
        io::write_jsonl(
            &out_dir.join(format!("diagnostics_{method}.jsonl")),
            &rec.columns,
        )
        .tag("recover")?;
        let mut line = format!("{method}: columns={}", rec.dictionary.m());
        if let (Some(codes), Some(signed)) = (&codes, &rec.signed) {
            line += &format!(" sign_accuracy={:.6}", sign_accuracy(codes, signed));
        }
        if let Some(a) = &reference {
            let al = align_partial(a, &rec.dictionary).tag("eval")?;
            line += &format!(" max_err={:.6} mean_err={:.6}", al.max_err, al.mean_err());
        }
        println!("{line}");
        println!("wrote {}", est.display());
    }
    Ok(())
}

pub fn refine(
    args: &ConfigArgs,
    init: Option<PathBuf>,
    pool: Option<PathBuf>,
    reference: Option<PathBuf>,
    out: Option<PathBuf>,
) -> CmdResult {
    let cfg = args.resolve().tag("config")?;
    let init = locate(
        "refine",
        init,
        &cfg,
        &format!("estimate_{}.bin", cfg.refine_from),
    )?;
    let out = locate("refine", out, &cfg, "refined.bin")?;
    let b0 = io::read_dictionary(&init).tag("refine")?;
    let planted: Option<Dictionary> = locate_optional(reference, &cfg, "dictionary.bin")
        .map(|p| io::read_dictionary(&p))
        .transpose()
        .tag("io")?;
    let mut source: Box<dyn SampleSource> = match pool {
        Some(p) => Box::new(PoolSource::new(io::read_samples(&p, None).tag("refine")?)),
        None => {
            let Some(a) = planted.clone() else {
                return fail(
                    "refine",
                    "without --pool the planted dictionary is needed to draw batches",
                );
            };
            Box::new(GeneratorSource::new(
                a,
                GenConfig {
                    seed: rng::derive_seed(cfg.gen.seed, "refine", 0),
                    ..cfg.gen.clone()
                },
            ))
        }
    };
    let (refined, trace) =
        refine_dictionary(&b0, source.as_mut(), &cfg.refine_config(), planted.as_ref())
            .tag("refine")?;
    ensure_parent(&out).tag("refine")?;
    io::write_dictionary(&out, &refined).tag("refine")?;
    let trace_path = out.with_file_name("refine_trace.jsonl");
    io::write_jsonl(&trace_path, &trace.rounds).tag("refine")?;
    for r in &trace.rounds {
        match r.max_err {
            Some(e) => println!(
                "round {:>3}: max_err={e:.3e} change={:.3e}",
                r.round, r.changed_norm
            ),
            None => println!("round {:>3}: change={:.3e}", r.round, r.changed_norm),
        }
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn print_report(r: &PipelineReport) {
    if let Some(mu) = r.mu {
        print!("mu={mu:.4}");
        if let Some(q) = r.max_support_overlap {
            print!(" Q={q}");
        }
        if let Some(z) = r.zeta {
            print!(" zeta={z:.4}");
        }
        println!();
    }
    if let Some(g) = &r.graph {
        println!("graph: tau={} edges={}", g.tau, g.edges);
    }
    if let Some(c) = &r.cluster {
        println!(
            "cluster: found={} oracle={} exact={} missed={} spurious={} exact_match={}",
            c.found, c.oracle, c.exact, c.missed, c.spurious, c.exact_match
        );
    }
    for rec in &r.recover {
        let signs = rec
            .sign_accuracy
            .map(|s| format!(" sign_accuracy={s:.4}"))
            .unwrap_or_default();
        println!(
            "recover {}: max_err={:.4e} mean_err={:.4e}{signs}",
            rec.method, rec.max_err, rec.mean_err
        );
    }
    if let Some(f) = &r.refine {
        let e = f
            .final_max_err
            .map(|e| format!("{e:.4e}"))
            .unwrap_or_else(|| "n/a".into());
        println!("refine: rounds={} final_max_err={e}", f.rounds);
    }
}

pub fn pipeline(args: &ConfigArgs) -> CmdResult {
    let cfg = args.resolve().tag("config")?;
    let report = run_pipeline(&cfg);
    print_report(&report);
    if let Some(d) = &cfg.out_dir {
        println!("wrote {}", d.display());
    }
    match report.failure {
        Some(f) => Err(StageError {
            stage: f.stage,
            message: f.message,
        }),
        None => Ok(()),
    }
}

pub fn sweep(
    args: &ConfigArgs,
    axis: &str,
    values: &str,
    csv: Option<PathBuf>,
    workers: Option<usize>,
) -> CmdResult {
    let cfg = args.resolve().tag("config")?;
    let values: Vec<String> = values
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(String::from)
        .collect();
    let text = experiment::sweep(&cfg, axis, &values, workers).tag("sweep")?;
    match csv {
        Some(p) => {
            ensure_parent(&p).tag("sweep")?;
            std::fs::write(&p, text).tag("sweep")?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

pub fn eval(
    args: &ConfigArgs,
    reference: Option<PathBuf>,
    estimates: Vec<PathBuf>,
    clusters: Option<PathBuf>,
    codes: Option<PathBuf>,
) -> CmdResult {
    let cfg = args.resolve().tag("config")?;
    let estimates = if estimates.is_empty() {
        ["estimate_average.bin", "estimate_svd.bin", "refined.bin"]
            .iter()
            .filter_map(|n| locate_optional(None, &cfg, n))
            .collect()
    } else {
        estimates
    };
    if !estimates.is_empty() {
        let rpath = locate("eval", reference, &cfg, "dictionary.bin")?;
        let a = io::read_dictionary(&rpath).tag("eval")?;
        for path in &estimates {
            let b = io::read_dictionary(path).tag("eval")?;
            let al = align_partial(&a, &b).tag("eval")?;
            let line = serde_json::json!({
                "estimate": path.display().to_string(),
                "columns": b.m(),
                "max_err": al.max_err,
                "mean_err": al.mean_err(),
                "perm": al.perm,
                "signs": al.signs,
            });
            println!("{line}");
        }
    }
    let clusters = locate_optional(clusters, &cfg, "clusters.txt");
    let codes = read_codes_opt(locate_optional(codes, &cfg, "codes.txt"))?;
    if let (Some(c), Some(codes)) = (clusters, codes) {
        let found = io::read_clustering(&c).tag("eval")?;
        print_cluster_score(&codes, &found);
    }
    Ok(())
}
