use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn rdrot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rdrot"))
        .args(args)
        .env_remove("OT_THREADS")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn generate(dir: &Path, kind: &str, m: usize, n: usize) -> PathBuf {
    let out = dir.join(kind);
    let res = rdrot(&[
        "--deterministic",
        "generate",
        kind,
        "--m",
        &m.to_string(),
        "--n",
        &n.to_string(),
        "--seed",
        "3",
        "--out-dir",
        s(&out),
    ]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    out
}

fn solve_args<'a>(g: &'a Path, extra: &[&'a str]) -> Vec<String> {
    let mut args: Vec<String> = vec!["--deterministic".into(), "solve".into()];
    for (flag, file) in [("--cost", "cost.csv"), ("--p", "p.csv"), ("--q", "q.csv")] {
        args.push(flag.into());
        args.push(g.join(file).display().to_string());
    }
    args.extend(extra.iter().map(|a| a.to_string()));
    args
}

fn run_strings(args: &[String]) -> Output {
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    rdrot(&refs)
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(code(&rdrot(&["--help"])), 0);
    assert_eq!(code(&rdrot(&["--version"])), 0);
    assert_eq!(code(&rdrot(&["solve", "--help"])), 0);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&rdrot(&[])), 1);
    assert_eq!(code(&rdrot(&["solve", "--no-such-flag"])), 1);
    assert_eq!(code(&rdrot(&["frobnicate"])), 1);
}

#[test]
fn solve_writes_plan_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let g = generate(dir.path(), "gaussian", 20, 30);
    let plan = dir.path().join("plan.csv");
    let out = run_strings(&solve_args(&g, &["--reg", "quad:alpha=0.1", "--tol", "1e-8", "--out", s(&plan)]));
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("termination=converged"));

    let text = std::fs::read_to_string(&plan).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 20);
    assert!(rows.iter().all(|r| r.len() == 30 && r.iter().all(|&v| v >= 0.0)));
    let total: f64 = rows.iter().flatten().sum();
    assert!((total - 1.0).abs() < 1e-7);

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("plan.manifest")).unwrap()).unwrap();
    assert_eq!(manifest["termination"], "converged");
    assert!(manifest["wall_clock_ms"].is_null());
    assert_eq!(manifest["inputs"].as_object().unwrap().len(), 3);
    let digest = manifest["outputs"][s(&plan)].as_str().unwrap();
    assert_eq!(digest.len(), 64);
}

#[test]
fn invalid_regularizer_names_the_flag() {
    let dir = tempfile::tempdir().unwrap();
    let g = generate(dir.path(), "gaussian", 4, 5);
    let plan = dir.path().join("plan.csv");
    for spec in ["quad:alpha=-1", "quad:beta=1", "l2", "gl:lambda=1"] {
        let out = run_strings(&solve_args(&g, &["--reg", spec, "--out", s(&plan)]));
        assert_eq!(code(&out), 1, "{spec}");
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains("--reg"), "{spec}: {err}");
    }
    assert!(!plan.exists());
}

#[test]
fn missing_input_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let g = generate(dir.path(), "gaussian", 4, 5);
    std::fs::remove_file(g.join("q.csv")).unwrap();
    let out = run_strings(&solve_args(&g, &["--out", s(&dir.path().join("plan.csv"))]));
    assert_eq!(code(&out), 1);
}

#[test]
fn iteration_cap_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let g = generate(dir.path(), "gaussian", 10, 12);
    let plan = dir.path().join("plan.bin");
    let out = run_strings(&solve_args(&g, &["--max-iter", "3", "--tol", "1e-12", "--out", s(&plan)]));
    assert_eq!(code(&out), 2);
    let bytes = std::fs::read(&plan).unwrap();
    assert_eq!(&bytes[..4], b"OTPB");
    assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 10);
    assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 12);
    assert_eq!(bytes.len(), 16 + 8 * 120);
}

#[test]
fn binary_cost_input_matches_csv() {
    let dir = tempfile::tempdir().unwrap();
    let g = generate(dir.path(), "gaussian", 6, 7);
    let from_csv = dir.path().join("from_csv.bin");
    assert_eq!(code(&run_strings(&solve_args(&g, &["--max-iter", "1", "--out", s(&from_csv)]))), 2);

    let text = std::fs::read_to_string(g.join("cost.csv")).unwrap();
    let mut bytes = b"OTPB".to_vec();
    bytes.extend(6u32.to_le_bytes());
    bytes.extend(7u32.to_le_bytes());
    bytes.extend([0u8; 4]);
    for v in text.lines().flat_map(|l| l.split(',')) {
        bytes.extend(v.parse::<f64>().unwrap().to_le_bytes());
    }
    let cost_bin = dir.path().join("cost.bin");
    std::fs::write(&cost_bin, bytes).unwrap();
    let (p, q) = (g.join("p.csv"), g.join("q.csv"));
    let from_bin = dir.path().join("from_bin.bin");
    let args = [
        "--deterministic", "solve", "--cost", s(&cost_bin), "--p", s(&p), "--q", s(&q), "--max-iter", "1", "--out",
        s(&from_bin),
    ];
    assert_eq!(code(&rdrot(&args)), 2);
    assert_eq!(std::fs::read(&from_csv).unwrap(), std::fs::read(&from_bin).unwrap());
}

#[test]
fn replay_reproduces_outputs_and_detects_changes() {
    let dir = tempfile::tempdir().unwrap();
    let g = generate(dir.path(), "gaussian", 15, 12);
    let plan = dir.path().join("plan.csv");
    let trace = dir.path().join("trace.csv");
    let out = run_strings(&solve_args(
        &g,
        &["--reg", "quad:alpha=0.5", "--out", s(&plan), "--trace", s(&trace)],
    ));
    assert_eq!(code(&out), 0);
    let manifest = dir.path().join("plan.manifest");
    assert_eq!(code(&rdrot(&["replay", s(&manifest)])), 0);

    // A recorded output that no longer matches fails the replay.
    let mut recorded: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&manifest).unwrap()).unwrap();
    recorded["outputs"][s(&plan)] = serde_json::Value::String("0".repeat(64));
    let tampered = dir.path().join("tampered.json");
    std::fs::write(&tampered, recorded.to_string()).unwrap();
    let out = rdrot(&["replay", s(&tampered)]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stdout).contains("differ"));
}

#[test]
fn deterministic_runs_are_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let g = generate(dir.path(), "gaussian", 40, 50);
    let mut outputs = Vec::new();
    for threads in ["1", "4"] {
        let plan = dir.path().join(format!("plan{threads}.csv"));
        let mut args = vec!["--threads".to_string(), threads.to_string()];
        args.extend(solve_args(&g, &["--reg", "quad:alpha=0.05", "--out", s(&plan)]));
        assert_eq!(code(&run_strings(&args)), 0);
        outputs.push(std::fs::read(&plan).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn regularizers_with_side_files() {
    let dir = tempfile::tempdir().unwrap();
    let g = generate(dir.path(), "adapt", 8, 6);
    let plan = dir.path().join("plan.csv");
    let groups = g.join("groups.txt");
    let out = run_strings(&solve_args(
        &g,
        &["--reg", "gl:lambda=1e-3", "--groups", s(&groups), "--out", s(&plan)],
    ));
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let forbidden = dir.path().join("forbidden.txt");
    std::fs::write(&forbidden, "0,0\n1,1\n").unwrap();
    let out = run_strings(&solve_args(
        &g,
        &["--reg", "forbid", "--forbidden", s(&forbidden), "--tol", "1e-8", "--out", s(&plan)],
    ));
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&plan).unwrap();
    let first: Vec<f64> = text.lines().next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(first[0], 0.0);

    for spec in ["wl1:w=0.01", "hypent:beta=1"] {
        let out = run_strings(&solve_args(&g, &["--reg", spec, "--out", s(&plan)]));
        assert_eq!(code(&out), 0, "{spec}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn sinkhorn_solver_runs() {
    let dir = tempfile::tempdir().unwrap();
    let g = generate(dir.path(), "gaussian", 10, 10);
    let plan = dir.path().join("plan.csv");
    let out = run_strings(&solve_args(&g, &["--solver", "sinkhorn", "--eps", "0.01", "--log-domain", "--out", s(&plan)]));
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let out = run_strings(&solve_args(
        &g,
        &["--solver", "sinkhorn", "--reg", "quad:alpha=1", "--out", s(&plan)],
    ));
    assert_eq!(code(&out), 1);
}

#[test]
fn bench_rows_converge_or_say_why() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bench.csv");
    let out = rdrot(&[
        "--deterministic", "bench", "--sizes", "20x30,10x10", "--seeds", "2", "--alphas", "0.01,0.2",
        "--compare", "sinkhorn", "--eps", "0.001,0.1", "--out", s(&csv),
    ]);
    assert!(matches!(code(&out), 0 | 2));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "method,m,n,reg,seed,iters,elapsed_ms,final_residual,objective,termination"
    );
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2 * 2 * 4);
    for row in rows {
        assert_eq!(row.len(), 10);
        assert_eq!(row[6], "");
        if row[9] == "converged" {
            assert!(row[7].parse::<f64>().unwrap() <= 1e-4);
        }
    }
}

#[test]
fn trace_reports_support_identification() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("trace.csv");
    let out = rdrot(&["--deterministic", "trace", "--gaussian", "20x25", "--seed", "1", "--out", s(&csv)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("support stable from iteration"));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("iter,r_primal,gap,dual_residual,support,elapsed_ms\n"));
    assert!(text.lines().nth(1).unwrap().ends_with(','));
}

#[test]
fn adapt_needs_source_labels_and_scores_labeled_targets() {
    let dir = tempfile::tempdir().unwrap();
    let a = generate(dir.path(), "adapt", 30, 20);
    let adapted = dir.path().join("adapted.csv");
    let out = rdrot(&[
        "adapt", "--source", s(&a.join("source.csv")), "--target", s(&a.join("target.csv")), "--out", s(&adapted),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("class_w2_score="));
    let text = std::fs::read_to_string(&adapted).unwrap();
    assert!(text.starts_with("x0,x1,label\n"));
    assert_eq!(text.lines().count(), 31);

    let g = generate(dir.path(), "gaussian", 5, 5);
    let out = rdrot(&[
        "adapt", "--source", s(&g.join("source.csv")), "--target", s(&g.join("target.csv")), "--out", s(&adapted),
    ]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("--source"));
}
