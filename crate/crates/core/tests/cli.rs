use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = "node_count = 4\n\n[dataset]\nframes = 120\nframes_per_topology = 40\n\n\
                     [ddpm]\nsteps = 20\nhidden = [16]\ntime_dim = 4\n\n[train]\nepochs = 1\nlearning_rate = 1e-3\n";

fn wncs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wncs-alloc")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn small_config(dir: &Path, node_count: usize) -> std::path::PathBuf {
    let path = dir.join(format!("n{node_count}.toml"));
    std::fs::write(&path, SMALL.replace("node_count = 4", &format!("node_count = {node_count}"))).unwrap();
    path
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&wncs(&[])), 2);
    assert_eq!(code(&wncs(&["gen-dataset", "--out", "x.csv", "--bogus"])), 2);
    assert_eq!(code(&wncs(&["frobnicate"])), 2);
    let tmp = tempfile::tempdir().unwrap();
    let out = wncs(&["eval", "--policies", "solver,oracle", "--n", "2", "--out", p(tmp.path())]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn version_and_help_exit_0() {
    let v = wncs(&["--version"]);
    assert_eq!(code(&v), 0);
    assert!(String::from_utf8_lossy(&v.stdout).contains("checkpoint"));
    assert_eq!(code(&wncs(&["--help"])), 0);
}

#[test]
fn missing_input_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    let out = wncs(&["solve", "--gains", p(&tmp.path().join("absent.csv")), "--out", p(&tmp.path().join("s.csv"))]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.csv"));
}

#[test]
fn bad_config_value_exits_1_and_names_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, "mati_confidence = 1.5\n").unwrap();
    let out = wncs(&["--config", p(&cfg), "gen-dataset", "--out", p(&tmp.path().join("d.csv"))]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("mati_confidence"));
}

#[test]
fn full_pipeline_through_the_binary() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cfg = small_config(dir, 4);
    let data = dir.join("data.csv");
    let ckpt = dir.join("model.json");

    let run = |args: &[&str]| {
        let mut full = vec!["--config", p(&cfg), "--seed", "3", "--threads", "1"];
        full.extend_from_slice(args);
        let out = wncs(&full);
        assert_eq!(code(&out), 0, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    };
    run(&["gen-dataset", "--out", p(&data)]);
    assert!(dir.join("data.meta.json").exists());
    assert!(dir.join("gen-dataset.manifest.json").exists());

    let solved = dir.join("solved.csv");
    run(&["solve", "--gains", p(&data), "--out", p(&solved)]);
    let text = std::fs::read_to_string(&solved).unwrap();
    assert!(text.starts_with("frame,node,m,k,"));
    assert_eq!(text.lines().filter(|l| l.ends_with(",ok")).count(), 120 * 4);

    run(&["train", "--dataset", p(&data), "--out", p(&ckpt)]);
    let inferred = dir.join("infer.csv");
    run(&["infer", "--ckpt", p(&ckpt), "--gains", p(&data), "--project-feasible", "--out", p(&inferred)]);
    let text = std::fs::read_to_string(&inferred).unwrap();
    let header = text.lines().next().unwrap();
    assert_eq!(header, "frame,m_1,m_2,m_3,m_4,projected_m_1,projected_m_2,projected_m_3,projected_m_4,total_avg_power_w,violations");
    assert_eq!(text.lines().count(), 121);

    let results = dir.join("eval");
    run(&["eval", "--ckpt", p(&ckpt), "--seeds", "2", "--episodes", "5", "--n", "4", "--out", p(&results)]);
    for f in ["results.json", "summary.json", "avg_power_vs_n.csv", "eval.manifest.json"] {
        assert!(results.join(f).exists(), "{f}");
    }
    let report = dir.join("report");
    run(&["report", "--results", p(&results.join("results.json")), "--out", p(&report)]);
    assert_eq!(
        std::fs::read(results.join("avg_power_vs_n.csv")).unwrap(),
        std::fs::read(report.join("avg_power_vs_n.csv")).unwrap()
    );
}

#[test]
fn node_count_mismatch_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cfg4 = small_config(dir, 4);
    let cfg3 = small_config(dir, 3);
    let data = dir.join("data.csv");
    let ckpt = dir.join("model.json");
    assert_eq!(code(&wncs(&["--config", p(&cfg4), "gen-dataset", "--out", p(&data)])), 0);
    assert_eq!(code(&wncs(&["--config", p(&cfg4), "train", "--dataset", p(&data), "--out", p(&ckpt)])), 0);

    let out = wncs(&["--config", p(&cfg3), "infer", "--ckpt", p(&ckpt), "--gains", "simulate", "--out", p(&dir.join("i.csv"))]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("N = 4"));

    let out = wncs(&["--config", p(&cfg3), "solve", "--gains", p(&data), "--out", p(&dir.join("s.csv"))]);
    assert_eq!(code(&out), 1);
    assert!(!dir.join("s.csv").exists());
}
