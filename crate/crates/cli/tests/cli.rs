use std::path::Path;
use std::process::{Command, Output};

fn qrc(args: &[&str], env_out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qrc"))
        .args(args)
        .env("QRC_OUT", env_out)
        .env("RUST_LOG", "warn")
        .output()
        .expect("qrc runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL: &str = r#"
experiment = "task-nmse"
[learner]
n_w = 6
[sweep]
values = [3, 6]
readouts = ["exact", 200]
[task]
n_train = 30
n_test = 20
"#;

#[test]
fn validate_lists_defaulted_fields() {
    let dir = tempfile::tempdir().unwrap();
    let o = qrc(&["validate", "--experiment", "capacity-vs-nw"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("defaulted fields"));
    assert!(text.contains("  seed = 0"));
    assert!(text.contains("learner.n_w = 31"));
}

#[test]
fn validate_rejects_oversized_readout() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "experiment = \"capacity-vs-nw\"\n[learner]\nn_w = 32\n").unwrap();
    let o = qrc(&["validate", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("learner.n_w"), "{}", stderr(&o));
}

#[test]
fn unknown_experiment_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = qrc(&["validate", "--experiment", "capacity-vs-everything"], dir.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("unknown experiment"));
}

#[test]
fn run_then_rerun_from_manifest_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, SMALL).unwrap();
    let a = dir.path().join("a");
    let o = qrc(&["run", "--config", cfg.to_str().unwrap(), "--out", a.to_str().unwrap(), "--seed", "3"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let task = std::fs::read_to_string(a.join("task.csv")).unwrap();
    assert!(task.starts_with("n_w,n_s_or_exact,nmse_train,nmse_test,seed\n"));
    assert_eq!(task.lines().count(), 5);
    assert!(a.join("task.schema.json").exists());

    let m = qrc(&["manifest", a.to_str().unwrap()], dir.path());
    assert!(m.status.success(), "{}", stderr(&m));
    assert!(stdout(&m).contains("seed = 3"));
    let resolved = dir.path().join("resolved.toml");
    std::fs::write(&resolved, stdout(&m)).unwrap();
    let b = dir.path().join("b");
    let o = qrc(
        &["run", "--config", resolved.to_str().unwrap(), "--out", b.to_str().unwrap(), "--threads", "1"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(task, std::fs::read_to_string(b.join("task.csv")).unwrap());
}

#[test]
fn output_root_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, SMALL).unwrap();
    let o = qrc(&["run", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("task-nmse-seed0").join("manifest.toml").exists());
}

#[test]
fn run_refuses_a_directory_of_another_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, SMALL).unwrap();
    let out = dir.path().join("x");
    let args = |seed: &'static str| {
        ["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", seed].map(String::from)
    };
    let first = args("1");
    let o = qrc(&first.iter().map(String::as_str).collect::<Vec<_>>(), dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let second = args("2");
    let o = qrc(&second.iter().map(String::as_str).collect::<Vec<_>>(), dir.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("different configuration"));
}
