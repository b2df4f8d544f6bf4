use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use edgecollab_harness::{load_rows, Phase};

const TINY: &str = r#"
name = "tiny"
algorithms = ["hc-mappo-l", "greedy"]
seeds = [0]
iterations = 2
eval_episodes = 1

[system]
episode_slots = 10
deploy_interval = 5

[train]
num_envs = 1
hidden = 8
epochs = 1
minibatches = 1
"#;

fn edgecollab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_edgecollab"))
        .args(args)
        .env("EDGECOLLAB_OUT", out)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn write_plan(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.display().to_string()
}

#[test]
fn train_writes_metrics_under_the_output_root() {
    let dir = tempfile::tempdir().unwrap();
    let plan = write_plan(dir.path(), "tiny.toml", TINY);
    let out = dir.path().join("out");
    let o = edgecollab(&["train", "--config", &plan, "--quiet"], &out);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = load_rows(out.join("tiny/metrics.csv")).unwrap();
    assert_eq!(rows.len(), 2 + 1 + 1);

    let run_dir = out.join("tiny/runs/hc-mappo-l_s0");
    let o = edgecollab(&["eval", "--run-dir", run_dir.to_str().unwrap()], &out);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let evaluated = load_rows_from(&o.stdout);
    let stored = rows.iter().find(|r| r.run_id == "hc-mappo-l_s0" && r.phase == Phase::Eval).unwrap();
    assert_eq!(&evaluated[0], stored);

    let trace = dir.path().join("trace.csv");
    let o = edgecollab(
        &["eval", "--run-dir", run_dir.to_str().unwrap(), "--trace", trace.to_str().unwrap(), "--max-delay", "0"],
        &out,
    );
    assert_eq!(code(&o), 4);
    assert_eq!(fs::read_to_string(&trace).unwrap().lines().count(), 1 + 10 * 8);

    let heat = dir.path().join("heat.csv");
    let metrics = out.join("tiny/metrics.csv");
    let o = edgecollab(
        &["export-heatmap", "--metrics", metrics.to_str().unwrap(), "--output", heat.to_str().unwrap()],
        &out,
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read_to_string(&heat).unwrap().lines().count(), 1 + 2 * 8);
}

fn load_rows_from(bytes: &[u8]) -> Vec<edgecollab_harness::MetricsRow> {
    csv::Reader::from_reader(bytes).deserialize().collect::<Result<_, _>>().unwrap()
}

#[test]
fn overrides_and_delay_checks() {
    let dir = tempfile::tempdir().unwrap();
    let plan = write_plan(dir.path(), "tiny.toml", TINY);
    let out = dir.path().join("out");
    let explicit = dir.path().join("explicit");
    let o = edgecollab(
        &[
            "train",
            "--config",
            &plan,
            "--algorithm",
            "edge-only",
            "--seeds",
            "1,2",
            "--out",
            explicit.to_str().unwrap(),
            "--max-delay",
            "1000",
            "--sequential",
            "-q",
        ],
        &out,
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!out.exists());
    let rows = load_rows(explicit.join("tiny/metrics.csv")).unwrap();
    let ids: Vec<&str> = rows.iter().map(|r| r.run_id.as_str()).collect();
    assert_eq!(ids, ["edge-only_s1", "edge-only_s2"]);

    let o = edgecollab(&["train", "--config", &plan, "--algorithm", "greedy", "--max-delay", "0", "-q"], &out);
    assert_eq!(code(&o), 4);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let good = write_plan(dir.path(), "tiny.toml", TINY);
    let bad = write_plan(dir.path(), "bad.toml", "name = \"bad\"\nalgorithms = [\"greedy\"]\n[system]\nnum_users = 0\n");
    let missing = dir.path().join("missing.toml").display().to_string();

    let o = edgecollab(&["validate-config", "--plan", &good], &out);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("\"name\": \"tiny\""));
    assert_eq!(code(&edgecollab(&["validate-config", "--plan", &bad], &out)), 2);
    assert_eq!(code(&edgecollab(&["validate-config", "--plan", &missing], &out)), 2);
    assert_eq!(code(&edgecollab(&["train", "--config", &bad], &out)), 2);
    assert_eq!(code(&edgecollab(&["sweep", "--config", &good], &out)), 2);
    assert_eq!(code(&edgecollab(&["train", "--config", &good, "--algorithm", "nope"], &out)), 2);
    assert_eq!(code(&edgecollab(&["train", "--config", &good, "--iterations", "2", "--seeds", ""], &out)), 2);

    let system = write_plan(dir.path(), "system.toml", "num_users = 4\n[weights]\ntau_bar = 2.0\n");
    let o = edgecollab(&["validate-config", "--config", &system], &out);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("num_users = 4"));
    assert!(text.contains("tau_bar = 2.0"));
    let broken = write_plan(dir.path(), "broken.toml", "num_users = \"four\"\n");
    assert_eq!(code(&edgecollab(&["validate-config", "--config", &broken], &out)), 2);
    assert!(!out.exists());
}

#[test]
fn runtime_errors_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = edgecollab(&["eval", "--run-dir", dir.path().join("nothing").to_str().unwrap()], &out);
    assert_eq!(code(&o), 3);
    let blocked = dir.path().join("file");
    fs::write(&blocked, "").unwrap();
    let plan = write_plan(dir.path(), "tiny.toml", TINY);
    let o = edgecollab(&["train", "--config", &plan, "--out", blocked.to_str().unwrap(), "-q"], &out);
    assert_eq!(code(&o), 3);
}
