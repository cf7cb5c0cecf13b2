use std::collections::BTreeMap;
use std::path::Path;

use qrc_core::experiment::{run, validate_document};

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect()
}

fn run_with_threads(doc: &str, threads: usize, dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut cfg = validate_document(doc).unwrap().config;
    cfg.threads = threads;
    run(&cfg, dir).unwrap();
    let mut f = files(dir);
    // The manifest records the thread count; everything else must match.
    f.remove("manifest.toml");
    f
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let doc = r#"
experiment = "capacity-vs-ns"
seed = 4
[learner]
n_w = 6
[sweep]
values = [100, 1000]
[capacity]
n_labellings = 6
eps_p = 45.0
"#;
    let dir = tempfile::tempdir().unwrap();
    let one = run_with_threads(doc, 1, &dir.path().join("one"));
    let four = run_with_threads(doc, 4, &dir.path().join("four"));
    assert!(one.contains_key("summary.csv"));
    assert_eq!(one, four);
}

#[test]
fn task_datasets_and_quantum_targets_are_reproducible() {
    let doc = r#"
experiment = "task-nmse"
[learner]
n_w = 5
[sweep]
values = [5]
readouts = ["exact"]
[task]
kind = "quantum_operator"
n_train = 12
n_test = 8
"#;
    let dir = tempfile::tempdir().unwrap();
    let a = run_with_threads(doc, 1, &dir.path().join("a"));
    let b = run_with_threads(doc, 3, &dir.path().join("b"));
    assert_eq!(a, b);
    let task = String::from_utf8(a["task.csv"].clone()).unwrap();
    assert_eq!(task.lines().count(), 2);
}
