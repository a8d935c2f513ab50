use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn birthrace(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_birthrace"))
        .args(args)
        .output()
        .expect("spawn birthrace")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn out_arg(dir: &Path) -> String {
    dir.to_str().unwrap().to_string()
}

#[test]
fn help_documents_the_feedback_grammar() {
    let o = birthrace(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for needle in ["power:P", "const:C", "table:V0,V1", "tail=R", "unimodal-fuzz"] {
        assert!(text.contains(needle), "{needle} missing from help");
    }
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(birthrace(&["bogus"]).status.code(), Some(2));
    assert_eq!(birthrace(&["coverage", "--nope"]).status.code(), Some(2));
    assert_eq!(birthrace(&[]).status.code(), Some(2));
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(dir.path());
    // Missing feedback and steps.
    let o = birthrace(&["coverage", "--agents", "3", "--out", &out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error:"));
    let o = birthrace(&[
        "urn",
        "--feedback",
        "power:x",
        "--agents",
        "2",
        "--steps",
        "3",
        "--out",
        &out,
    ]);
    assert_eq!(o.status.code(), Some(2));
    let o = birthrace(&["petrov", "--samples", "10", "--out", &out]);
    assert_eq!(o.status.code(), Some(2));
    let o = birthrace(&["coverage", "--agents", "2", "--initial", "1,1,1", "--out", &out]);
    assert_eq!(o.status.code(), Some(2));

    let cfg = dir.path().join("regime.toml");
    fs::write(&cfg, "kind = \"regime\"\nfeedback = \"power:1\"\n").unwrap();
    let o = birthrace(&["coverage", "--config", cfg.to_str().unwrap(), "--out", &out]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn regime_reports_convergence_above_one_half() {
    let dir = tempfile::tempdir().unwrap();
    let o = birthrace(&["regime", "--feedback", "power:0.6", "--out", &out_arg(dir.path())]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("verdict: converges"));
    let o = birthrace(&[
        "regime",
        "--feedback",
        "power:0.3",
        "--check",
        "--out",
        &out_arg(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("verdict: diverges"));
}

#[test]
fn coverage_writes_reproducible_results() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let o = birthrace(&[
        "coverage",
        "--agents",
        "3",
        "--feedback",
        "power:0.4",
        "--steps",
        "2000",
        "--replicates",
        "12",
        "--seed",
        "7",
        "--workers",
        "1",
        "--out",
        &out_arg(&first),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for name in [
        "config.toml",
        "results.jsonl",
        "results.csv",
        "summary.json",
        "summary.txt",
    ] {
        assert!(first.join(name).exists(), "{name}");
    }
    let jsonl = fs::read_to_string(first.join("results.jsonl")).unwrap();
    assert_eq!(jsonl.lines().count(), 1 + 12 + 1);
    assert!(jsonl.contains("\"first_hits\""));

    let second = dir.path().join("second");
    let o = birthrace(&[
        "coverage",
        "--config",
        first.join("config.toml").to_str().unwrap(),
        "--workers",
        "3",
        "--out",
        &out_arg(&second),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(
        fs::read(first.join("results.jsonl")).unwrap(),
        fs::read(second.join("results.jsonl")).unwrap()
    );
    assert_eq!(
        fs::read(first.join("config.toml")).unwrap(),
        fs::read(second.join("config.toml")).unwrap()
    );
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "initial = [1, 1]\nfeedback = \"power:1\"\nsteps = 5\nseed = 1\n").unwrap();
    let out = dir.path().join("u");
    let o = birthrace(&[
        "urn",
        "--config",
        cfg.to_str().unwrap(),
        "--steps",
        "8",
        "--out",
        &out_arg(&out),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let echoed = fs::read_to_string(out.join("config.toml")).unwrap();
    assert!(echoed.contains("steps = 8"));
    assert!(echoed.contains("seed = 1"));
    let csv = fs::read_to_string(out.join("urn.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("step,c0,c1"));
    assert_eq!(csv.lines().count(), 1 + 8);
}

#[test]
fn xi_check_passes_for_two_agents_at_time_fifty() {
    let dir = tempfile::tempdir().unwrap();
    let o = birthrace(&[
        "xi",
        "--agents",
        "2",
        "--t",
        "50",
        "--replicates",
        "10000",
        "--check",
        "--out",
        &out_arg(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("PASS"));
}

#[test]
fn xi_check_fails_with_exit_one_when_shifts_bias_the_ranking() {
    let dir = tempfile::tempdir().unwrap();
    let o = birthrace(&[
        "xi",
        "--agents",
        "2",
        "--t",
        "5",
        "--shifts",
        "0,5",
        "--replicates",
        "2000",
        "--check",
        "--out",
        &out_arg(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
}

#[test]
fn couple_and_fuzz_checks_pass() {
    let dir = tempfile::tempdir().unwrap();
    let o = birthrace(&[
        "couple",
        "--feedback",
        "power:1",
        "--initial",
        "1,1",
        "--k",
        "2",
        "--replicates",
        "20000",
        "--check",
        "--out",
        &out_arg(&dir.path().join("c")),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("3/10"));

    let o = birthrace(&[
        "unimodal-fuzz",
        "--trials",
        "300",
        "--check",
        "--out",
        &out_arg(&dir.path().join("f")),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let json = fs::read_to_string(dir.path().join("f/fuzz.json")).unwrap();
    assert!(json.contains("\"violations\": 0"));
}

#[test]
fn race_dumps_csv_events() {
    let dir = tempfile::tempdir().unwrap();
    let o = birthrace(&[
        "race",
        "--agents",
        "2",
        "--events",
        "10",
        "--format",
        "csv",
        "--seed",
        "4",
        "--out",
        &out_arg(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("time,agent,v0,v1"));
    assert_eq!(csv.lines().count(), 11);
    let last: Vec<u64> = csv
        .lines()
        .last()
        .unwrap()
        .split(',')
        .skip(2)
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(last.iter().sum::<u64>(), 10);
}

#[test]
fn petrov_writes_a_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = birthrace(&["petrov", "--n", "10,100", "--out", &out_arg(dir.path())]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("results.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("replicate,n,q_hat,d_sum,product"));
    assert_eq!(csv.lines().count(), 3);
}
