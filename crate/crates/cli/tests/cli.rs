use std::path::Path;
use std::process::{Command, Output};

const HEADER_BYTES: u64 = 8 + 16;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_sparsedict"));
    c.env_remove("DLEARN_WORKERS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn sparsedict")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn dir_arg(d: &Path) -> String {
    d.to_str().unwrap().to_string()
}

/// Small instance on which every stage succeeds.
const VALID: &[&str] = &[
    "--n",
    "256",
    "--m",
    "20",
    "--k",
    "2",
    "--preset",
    "theorem1",
    "--t_divisor",
    "3",
    "--refine_rounds",
    "3",
];

#[test]
fn gen_minimal_writes_files_and_prints_mu() {
    let tmp = tempfile::tempdir().unwrap();
    let d = dir_arg(tmp.path());
    let o = run(&[
        "gen",
        "--n",
        "4",
        "--m",
        "4",
        "--k",
        "1",
        "--p",
        "10",
        "--out_dir",
        &d,
    ]);
    assert!(o.status.success(), "{o:?}");
    let out = stdout(&o);
    assert!(out.contains("mu = "), "{out}");
    assert!(out.contains("Q = "), "{out}");
    for f in ["dictionary.bin", "samples.bin", "codes.txt"] {
        assert!(tmp.path().join(f).is_file(), "{f} missing");
    }
    let codes = std::fs::read_to_string(tmp.path().join("codes.txt")).unwrap();
    assert_eq!(codes.lines().count(), 10);
}

#[test]
fn gen_rerun_is_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = run(&[
            "gen",
            "--n",
            "16",
            "--m",
            "24",
            "--k",
            "2",
            "--p",
            "300",
            "--seed",
            "9",
            "--out_dir",
            &dir_arg(d.path()),
        ]);
        assert!(o.status.success());
    }
    for f in ["dictionary.bin", "samples.bin", "codes.txt"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert_eq!(x, y, "{f} differs");
    }
}

#[test]
fn gen_file_sizes_match_header_arithmetic() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&[
        "gen",
        "--n",
        "64",
        "--m",
        "100",
        "--k",
        "3",
        "--p",
        "5000",
        "--out_dir",
        &dir_arg(tmp.path()),
    ]);
    assert!(o.status.success());
    let len = |f: &str| std::fs::metadata(tmp.path().join(f)).unwrap().len();
    assert_eq!(len("dictionary.bin"), HEADER_BYTES + 8 * 64 * 100);
    assert_eq!(len("samples.bin"), HEADER_BYTES + 8 * 5000 * 64);
}

#[test]
fn graph_stage_only_writes_edges() {
    let tmp = tempfile::tempdir().unwrap();
    let mut args = vec!["pipeline", "--stage", "graph", "--out_dir"];
    let d = dir_arg(tmp.path());
    args.push(&d);
    args.extend_from_slice(VALID);
    let o = run(&args);
    assert!(o.status.success(), "{o:?}");
    assert!(tmp.path().join("graph.txt").is_file());
    assert!(!tmp.path().join("clusters.txt").exists());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("report.json")).unwrap())
            .unwrap();
    assert!(report["cluster"].is_null());
    assert!(report["graph"]["edges"].as_u64().unwrap() > 0);
}

#[test]
fn full_pipeline_succeeds_and_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let d = dir_arg(tmp.path());
    let mut args = vec!["pipeline", "--out_dir", &d];
    args.extend_from_slice(VALID);
    let o = run(&args);
    assert!(o.status.success(), "{o:?}");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("report.json")).unwrap())
            .unwrap();
    assert_eq!(report["cluster"]["exact_match"], true);
    assert_eq!(report["seed"], 0);
    assert_eq!(report["config"]["n"], "256");
    let trace = std::fs::read_to_string(tmp.path().join("refine_trace.jsonl")).unwrap();
    assert_eq!(trace.lines().count(), 3);
}

#[test]
fn failing_stage_gives_nonzero_exit_with_tag() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&[
        "pipeline",
        "--n",
        "4",
        "--m",
        "4",
        "--k",
        "1",
        "--p",
        "10",
        "--out_dir",
        &dir_arg(tmp.path()),
    ]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("[cluster]"));
}

#[test]
fn stage_commands_reproduce_pipeline_files() {
    let whole = tempfile::tempdir().unwrap();
    let staged = tempfile::tempdir().unwrap();
    let w = dir_arg(whole.path());
    let s = dir_arg(staged.path());
    let mut args = vec!["pipeline", "--out_dir", &w];
    args.extend_from_slice(VALID);
    assert!(run(&args).status.success());

    let mut gen = vec!["gen", "--out_dir", &s];
    gen.extend_from_slice(VALID);
    assert!(run(&gen).status.success());
    // Later stages pick the config up from the directory.
    for cmd in ["graph", "cluster", "recover", "refine"] {
        let o = run(&[cmd, "--out_dir", &s]);
        assert!(o.status.success(), "{cmd}: {o:?}");
    }
    for f in [
        "graph.txt",
        "clusters.txt",
        "estimate_average.bin",
        "estimate_svd.bin",
        "refined.bin",
        "refine_trace.jsonl",
    ] {
        let x = std::fs::read(whole.path().join(f)).unwrap();
        let y = std::fs::read(staged.path().join(f)).unwrap();
        assert_eq!(x, y, "{f} differs");
    }

    let o = run(&["eval", "--out_dir", &s]);
    assert!(o.status.success());
    let out = stdout(&o);
    let lines: Vec<serde_json::Value> = out
        .lines()
        .filter(|l| l.starts_with('{'))
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 3);
    assert!(out.contains("exact_match=true"), "{out}");
}

#[test]
fn sweep_empty_and_single_value() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("empty.csv");
    let o = run(&[
        "sweep",
        "--axis",
        "tau",
        "--values",
        "",
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("axis,value,seed"));

    let mut args = vec![
        "sweep", "--axis", "tau", "--values", "0.5", "--stage", "graph",
    ];
    args.extend_from_slice(VALID);
    let o = run(&args);
    assert!(o.status.success());
    let out = stdout(&o);
    let rows: Vec<&str> = out.lines().collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[1].starts_with("tau,0.5,0,ok,"), "{}", rows[1]);
}

#[test]
fn sweep_rejects_unknown_axis() {
    let o = run(&["sweep", "--axis", "n", "--values", "4"]);
    assert!(!o.status.success());
}

#[test]
fn sweep_is_independent_of_worker_count() {
    let mut args = vec![
        "sweep", "--axis", "T", "--values", "3,5,8", "--stage", "cluster",
    ];
    args.extend_from_slice(VALID);
    let one = bin()
        .args(&args)
        .env("DLEARN_WORKERS", "1")
        .output()
        .unwrap();
    let many = bin()
        .args(&args)
        .arg("--workers")
        .arg("3")
        .output()
        .unwrap();
    assert!(one.status.success() && many.status.success());
    assert_eq!(one.stdout, many.stdout);
    assert_eq!(stdout(&one).lines().count(), 4);
}

#[test]
fn config_file_with_flag_override() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.cfg");
    std::fs::write(&cfg, "# tiny\nn=8\nm=8\nk=1\np=20\nseed=3\n").unwrap();
    let out = tmp.path().join("o");
    let o = run(&[
        "gen",
        "--config",
        cfg.to_str().unwrap(),
        "--p",
        "30",
        "--out_dir",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).contains("p=30 seed=3"));
    let written = std::fs::read_to_string(out.join("config.txt")).unwrap();
    assert!(written.lines().any(|l| l == "n=8"));
    assert!(written.lines().any(|l| l == "p=30"));
}

#[test]
fn unknown_config_key_in_file_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.cfg");
    std::fs::write(&cfg, "bogus=1\n").unwrap();
    let o = run(&[
        "gen",
        "--config",
        cfg.to_str().unwrap(),
        "--out_dir",
        tmp.path().to_str().unwrap(),
    ]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("[config]"));
}
