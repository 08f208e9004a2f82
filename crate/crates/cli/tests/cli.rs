use std::path::Path;
use std::process::{Command, Output};

use ethicup_core::replay::play_log_header;

const CONFIG: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs");

fn ethicup(args: &[&str], out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ethicup"));
    cmd.args(["--config-dir", CONFIG]).args(args);
    if let Some(p) = out {
        cmd.arg(p);
    }
    cmd.env_remove("ETHICUP_SEED").env_remove("ETHICUP_REGRET").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn combined_share(dir: &Path) -> f64 {
    let text = std::fs::read_to_string(dir.join("condition_summary.csv")).unwrap();
    let row = text.lines().find(|l| l.starts_with("combined,")).unwrap();
    row.split(',').nth(2).unwrap().parse().unwrap()
}

#[test]
fn validate_accepts_shipped_configs() {
    let o = ethicup(&["validate"], None);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("ok:"));
}

#[test]
fn broken_predicate_exits_nonzero_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let rules = dir.path().join("rules.yml");
    std::fs::write(
        &rules,
        "rules:\n  - id: R1\n    description: d\n    predicate: \"price <\"\n    severity: 1\n",
    )
    .unwrap();
    let o = ethicup(&["--rules", rules.to_str().unwrap(), "validate"], None);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.starts_with("error: "), "{err}");
    assert!(err.contains("position 7"), "{err}");
}

#[test]
fn missing_config_dir_fails() {
    let o = Command::new(env!("CARGO_BIN_EXE_ethicup"))
        .args(["--config-dir", "/nonexistent", "validate"])
        .output()
        .unwrap();
    assert!(!o.status.success());
    assert!(stderr(&o).contains("error"));
}

#[test]
fn run_writes_outputs_and_prints_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = ethicup(&["run", "--seed", "42", "--out"], Some(dir.path()));
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["coffee_scenarios.csv", "options_scored.csv", "condition_summary.csv", "policy_trace_text.csv"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let table = stdout(&o);
    for c in ["none", "kantian", "utilitarian", "combined"] {
        assert!(table.lines().any(|l| l.starts_with(c)), "{table}");
    }
}

#[test]
fn zero_regret_never_beats_a_looser_bound() {
    let (tight, loose) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for seed in ["1", "2", "3", "42"] {
        assert!(ethicup(&["run", "--seed", seed, "--regret", "0", "--out"], Some(tight.path())).status.success());
        assert!(ethicup(&["run", "--seed", seed, "--regret", "0.2", "--out"], Some(loose.path())).status.success());
        assert!(combined_share(tight.path()) <= combined_share(loose.path()), "seed {seed}");
    }
}

#[test]
fn alt_weights_change_scores() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert!(ethicup(&["run", "--out"], Some(a.path())).status.success());
    assert!(ethicup(&["run", "--alt-weights", "--out"], Some(b.path())).status.success());
    let read = |d: &Path| std::fs::read(d.join("options_scored.csv")).unwrap();
    assert_ne!(read(a.path()), read(b.path()));
    let scenarios = |d: &Path| std::fs::read(d.join("coffee_scenarios.csv")).unwrap();
    assert_eq!(scenarios(a.path()), scenarios(b.path()));
}

#[test]
fn run_from_saved_scenarios_matches() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let pool = a.path().join("pool.csv");
    assert!(ethicup(&["generate", "--seed", "9", "--out"], Some(&pool)).status.success());
    assert!(ethicup(&["run", "--seed", "9", "--out"], Some(a.path())).status.success());
    let o = ethicup(&["run", "--scenarios", pool.to_str().unwrap(), "--out"], Some(b.path()));
    assert!(o.status.success(), "{}", stderr(&o));
    let read = |d: &Path| std::fs::read(d.join("options_scored.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
}

#[test]
fn replay_of_empty_log_prints_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("play_log.csv");
    std::fs::write(&log, play_log_header()).unwrap();
    let o = ethicup(&["replay", "--play-log"], Some(&log));
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 1);
    let o = ethicup(&["replay", "--json", "--play-log"], Some(&log));
    let parsed: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(parsed, serde_json::json!([]));
}

#[test]
fn corrupt_log_row_is_reported_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("play_log.csv");
    std::fs::write(&log, format!("{}garbage,row\n", play_log_header())).unwrap();
    let o = ethicup(&["replay", "--play-log"], Some(&log));
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}
