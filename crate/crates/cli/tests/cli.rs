use std::path::Path;
use std::process::{Command, Output};

fn adaptrain(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adaptrain"))
        .args(args)
        .env_remove("MATAGENT_SEED")
        .output()
        .expect("binary runs")
}

fn decisions(dir: &Path) -> Vec<serde_json::Value> {
    std::fs::read_to_string(dir.join("decisions.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn train(dir: &Path, extra: &[&str]) -> Output {
    let out = dir.to_str().unwrap();
    let mut args = vec!["train", "--out", out];
    args.extend_from_slice(extra);
    adaptrain(&args)
}

#[test]
fn train_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let o = train(dir, &["--seed", "42", "--episodes", "2"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for file in ["decisions.jsonl", "trajectory.csv", "frequency.csv", "conditional.csv", "summary.json"] {
        assert_eq!(std::fs::read(a.join(file)).unwrap(), std::fs::read(b.join(file)).unwrap(), "{file}");
    }
}

#[test]
fn seed_from_environment_matches_flag() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(train(&a, &["--seed", "9", "--steps", "4"]).status.success());
    let o = Command::new(env!("CARGO_BIN_EXE_adaptrain"))
        .args(["train", "--out", b.to_str().unwrap(), "--steps", "4"])
        .env("MATAGENT_SEED", "9")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_eq!(
        std::fs::read(a.join("decisions.jsonl")).unwrap(),
        std::fs::read(b.join("decisions.jsonl")).unwrap()
    );
}

#[test]
fn single_step_run() {
    let tmp = tempfile::tempdir().unwrap();
    let o = train(tmp.path(), &["--steps", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let log = decisions(tmp.path());
    assert_eq!(log.len(), 1);
    assert_eq!(log[0]["step"], 0);
}

#[test]
fn masked_agent_holds_its_default() {
    let tmp = tempfile::tempdir().unwrap();
    let o = train(tmp.path(), &["--mask", "no-aug", "--seed", "3"]);
    assert!(o.status.success());
    let log = decisions(tmp.path());
    assert_eq!(log.len(), 30);
    assert!(log.iter().all(|d| d["config"]["aug"] == "Basic"));
    let opts: std::collections::BTreeSet<String> = log.iter().map(|d| d["config"]["opt"].as_str().unwrap().to_string()).collect();
    assert!(opts.len() > 1, "active agents still explore");
}

#[test]
fn report_rebuilds_frequencies() {
    let tmp = tempfile::tempdir().unwrap();
    let run = tmp.path().join("run");
    assert!(train(&run, &["--seed", "5"]).status.success());
    let out = tmp.path().join("report");
    let o = adaptrain(&["report", "--run", run.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(
        std::fs::read(run.join("frequency.csv")).unwrap(),
        std::fs::read(out.join("frequency.csv")).unwrap()
    );
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("# frequency v1\n"));
}

#[test]
fn ablate_writes_one_row_per_variant() {
    let tmp = tempfile::tempdir().unwrap();
    let o = adaptrain(&[
        "ablate",
        "--variants",
        "full,no-aug,no-coordination",
        "--seeds",
        "2",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(tmp.path().join("ablation.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "# ablation v1");
    assert_eq!(lines.len(), 5);
    assert!(lines[4].starts_with("no-coordination,2,"));
}

#[test]
fn sweep_rows_follow_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let o = adaptrain(&[
        "sweep",
        "--param",
        "w_stab",
        "--values",
        "0.5,1,2",
        "--seeds",
        "2",
        "--workers",
        "2",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(tmp.path().join("sweep.csv")).unwrap();
    let values: Vec<&str> = csv.lines().skip(2).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(values, ["0.5", "1", "2"]);
}

#[test]
fn usage_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(train(tmp.path(), &["--mask", "no-everything"]).status.code(), Some(2));
    assert_eq!(train(tmp.path(), &["--env", "nonexistent"]).status.code(), Some(2));
    assert_eq!(train(tmp.path(), &["--steps", "0"]).status.code(), Some(2));
    assert_eq!(adaptrain(&["sweep", "--param", "w_bogus", "--values", "1"]).status.code(), Some(2));
    assert_eq!(adaptrain(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn serve_replays_golden_transcript_over_stdio() {
    use std::io::{BufRead, BufReader, Write};
    use std::process::Stdio;

    let text = include_str!("../../core/data/bridge_golden.jsonl");
    let mut lines = text.lines();
    let header: serde_json::Value = serde_json::from_str(lines.next().unwrap()).unwrap();
    let mut child = Command::new(env!("CARGO_BIN_EXE_adaptrain"))
        .args(["serve", "--seed", &header["seed"].to_string(), "--steps", &header["steps"].to_string()])
        .env_remove("MATAGENT_SEED")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut stdin = child.stdin.take().unwrap();
    let mut stdout = BufReader::new(child.stdout.take().unwrap());
    for raw in lines {
        let entry: serde_json::Value = serde_json::from_str(raw).unwrap();
        let line = entry["line"].as_str().unwrap();
        if entry["from"] == "trainer" {
            writeln!(stdin, "{line}").unwrap();
        } else {
            let mut got = String::new();
            stdout.read_line(&mut got).unwrap();
            assert_eq!(got.trim_end(), line);
        }
    }
    drop(stdin);
    assert!(child.wait().unwrap().success());
}
