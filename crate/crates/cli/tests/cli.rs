use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn acbo(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_acbo"))
        .args(args)
        .current_dir(cwd)
        .env_remove("ACBO_API_KEY")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    fs::write(dir.join(name), body).unwrap();
    name.to_string()
}

#[test]
fn gen_writes_one_file_per_depth_reproducibly() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let o = acbo(&["gen", "--depths", "3..5", "--per-depth", "12", "--seed", "4", "--out", "a", "--dev", "3", "--test", "3"], p);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for d in ["d03.jsonl", "d04.jsonl", "d05.jsonl"] {
        assert_eq!(fs::read_to_string(p.join("a").join(d)).unwrap().lines().count(), 12);
    }
    let manifest = fs::read_to_string(p.join("a/manifest.csv")).unwrap();
    assert_eq!(manifest.lines().next().unwrap(), "d,n_samples,n_train,n_dev,n_test,tokens_per_premise,pct_positive,vocab");
    assert_eq!(manifest.lines().count(), 4);
    assert!(manifest.lines().nth(1).unwrap().starts_with("3,12,6,3,3,"));

    acbo(&["gen", "--depths", "3..5", "--per-depth", "12", "--seed", "4", "--out", "b", "--dev", "3", "--test", "3"], p);
    for f in ["d03.jsonl", "d05.jsonl", "manifest.csv"] {
        assert_eq!(fs::read(p.join("a").join(f)).unwrap(), fs::read(p.join("b").join(f)).unwrap());
    }

    acbo(&["gen", "--depths", "7", "--per-depth", "2", "--out", "c"], p);
    assert_eq!(fs::read_to_string(p.join("c/manifest.csv")).unwrap().lines().count(), 2);

    let o = acbo(&["gen", "--depths", "3", "--per-depth", "2", "--out", "d", "--dev", "5"], p);
    assert_eq!(code(&o), 4);
}

#[test]
fn kernel_sweep_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = acbo(&["kernel", "--d-range", "3..6"], dir.path());
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "d,L,delta,margin_bound,required_b,rho");
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0][0], 3.0);
    for w in rows.windows(2) {
        assert!(w[1][2] < w[0][2]);
        assert!(w[1][4] > w[0][4]);
        assert_eq!(w[1][5], w[0][5]);
    }
    let o = acbo(&["kernel", "--d-range", "3..4", "--out", "k.csv"], dir.path());
    assert_eq!(code(&o), 0);
    assert_eq!(fs::read_to_string(dir.path().join("k.csv")).unwrap().lines().count(), 3);
    assert_eq!(code(&acbo(&["kernel", "--d-range", "8..3"], dir.path())), 2);
}

#[test]
fn run_report_and_resume() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    acbo(&["gen", "--depths", "3..4", "--per-depth", "10", "--seed", "2", "--out", "data"], p);
    fs::write(
        p.join("all.jsonl"),
        fs::read_to_string(p.join("data/d03.jsonl")).unwrap() + &fs::read_to_string(p.join("data/d04.jsonl")).unwrap(),
    )
    .unwrap();
    let cfg = write_config(
        p,
        "cfg.json",
        r#"{"dataset": "all.jsonl", "generate": null, "seed": 9, "output_dir": "out",
            "acbo": {"eta": 0.0, "candidates_n": 64}, "oracle": {"eta": 0.0, "mode": "simulated"},
            "gold": "structural"}"#,
    );
    let o = acbo(&["run", "--config", &cfg], p);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("accuracy=100.00"));
    for f in ["results.jsonl", "trajectories.jsonl", "report.json"] {
        assert!(p.join("out").join(f).exists(), "{f}");
    }

    let o = acbo(&["report", "--results", "out/results.jsonl", "--gold", "structural"], p);
    assert_eq!(code(&o), 0);
    assert_eq!(o.stdout, fs::read(p.join("out/report.json")).unwrap());

    // truncate the checkpoint and resume into the same directory
    let full = fs::read(p.join("out/results.jsonl")).unwrap();
    let text = String::from_utf8(full.clone()).unwrap();
    let head: Vec<&str> = text.lines().take(7).collect();
    fs::write(p.join("out/results.jsonl"), head.join("\n") + "\n").unwrap();
    let report = fs::read(p.join("out/report.json")).unwrap();
    assert_eq!(code(&acbo(&["run", "--config", &cfg, "--resume"], p)), 0);
    assert_eq!(fs::read(p.join("out/results.jsonl")).unwrap(), full);
    assert_eq!(fs::read(p.join("out/report.json")).unwrap(), report);

    assert_eq!(code(&acbo(&["run", "--config", &cfg, "--output-dir", "again"], p)), 0);
    assert_eq!(fs::read(p.join("again/report.json")).unwrap(), report);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert_eq!(code(&acbo(&["run", "--config", "missing.json"], p)), 2);
    let bad = write_config(p, "bad.json", r#"{"oracle": {"eta": 0.7}}"#);
    assert_eq!(code(&acbo(&["run", "--config", &bad], p)), 2);
    let even = write_config(p, "even.json", r#"{"oracle": {"votes_m": 2}, "acbo": {"votes_m": 2}}"#);
    assert_eq!(code(&acbo(&["run", "--config", &even], p)), 2);
    assert_eq!(code(&acbo(&["frobnicate"], p)), 2);

    fs::write(p.join("broken.jsonl"), "{\"id\": 3}\nnot json\n").unwrap();
    let data = write_config(p, "data.json", r#"{"dataset": "broken.jsonl", "generate": null, "output_dir": "o"}"#);
    let o = acbo(&["run", "--config", &data], p);
    assert_eq!(code(&o), 4);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 1"));

    let down = write_config(
        p,
        "down.json",
        r#"{"generate": {"depths": [3], "per_depth": 10}, "output_dir": "down",
            "oracle": {"mode": "llm", "llm": {"base_url": "http://127.0.0.1:9/v1", "retries": 0, "timeout_secs": 2}}}"#,
    );
    assert_eq!(code(&acbo(&["run", "--config", &down], p)), 3);

    fs::write(p.join("empty.jsonl"), "").unwrap();
    let replay = write_config(p, "replay.json", r#"{"generate": {"depths": [4], "per_depth": 10}, "output_dir": "r"}"#);
    assert_eq!(code(&acbo(&["replay", "--config", &replay, "--transcript", "empty.jsonl"], p)), 3);
    assert_eq!(code(&acbo(&["replay", "--config", &replay, "--transcript", "nowhere.jsonl"], p)), 2);
}

#[test]
fn convergence_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let o = acbo(&["convergence", "--grid", "8:0.1,4:0.0", "--trials", "30", "--seed", "3", "--out", "conv"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary = fs::read_to_string(dir.path().join("conv/summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
    let noiseless = summary.lines().nth(2).unwrap();
    assert!(noiseless.starts_with("4,0.0,1,1.0,"), "{noiseless}");
    assert_eq!(fs::read_to_string(dir.path().join("conv/trials.csv")).unwrap().lines().count(), 61);
    assert_eq!(fs::read_to_string(dir.path().join("conv/trajectory.csv")).unwrap().lines().count(), 41);
    assert_eq!(code(&acbo(&["convergence", "--grid", "8", "--out", "x"], dir.path())), 2);
    assert_eq!(code(&acbo(&["convergence", "--grid", "1:0.1", "--out", "x"], dir.path())), 2);
}
