use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use deem::dataset::{load_data_dir, TRUTH_FILE};
use deem::harness::{evaluate_predictions, read_report, PREDICTIONS_FILE, REPORT_JSON, REPORT_TEXT, TIMING_FILE};
use deem::router::read_predictions;

fn deem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_deem"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = deem(args);
    assert!(
        out.status.success(),
        "deem {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let file = dir.join(name);
    fs::write(&file, text).unwrap();
    file
}

/// Every file under `dir`, relative path and contents, sorted.
fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().unwrap() != TIMING_FILE {
                files.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    files.sort();
    files
}

const SMALL: &str = "[generator]\ntrain_per_group = 42\ntest_per_group = 14\n\n[ablation]\nseeds = 2\n";

#[test]
fn gen_data_summary_and_reproducibility() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let text = ok(&["gen-data", "--out", path(&a)]);
    assert!(text.contains("7 classes, 3 groups"), "{text}");
    ok(&["gen-data", "--out", path(&b)]);
    assert_eq!(snapshot(&a), snapshot(&b));

    let flat = write_config(tmp.path(), "flat.toml", "[generator]\nshift_scale = 0.0\n");
    let text = ok(&["gen-data", "--config", path(&flat), "--out", path(&tmp.path().join("c"))]);
    assert!(text.contains("identically distributed"), "{text}");
}

#[test]
fn run_is_deterministic_and_infer_reproduces_its_accuracy() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "small.toml", SMALL);
    let data = tmp.path().join("data");
    ok(&["gen-data", "--config", path(&config), "--out", path(&data)]);

    let (a, b) = (tmp.path().join("run_a"), tmp.path().join("run_b"));
    let text = ok(&["run", "--config", path(&config), "--data", path(&data), "--out", path(&a)]);
    ok(&["run", "--config", path(&config), "--data", path(&data), "--out", path(&b)]);
    assert_eq!(snapshot(&a), snapshot(&b));
    for file in [REPORT_JSON, REPORT_TEXT, PREDICTIONS_FILE, TIMING_FILE, "model/model.json"] {
        assert!(a.join(file).is_file(), "{file}");
    }
    assert!(a.join("audit/synth0001/round_0001.jsonl").is_file());

    let report = read_report(&a).unwrap();
    assert_eq!(report.groups.len(), 3);
    assert!(text.lines().any(|l| l.starts_with("Average")), "{text}");
    assert_eq!(ok(&["report", "--out", path(&a)]), text);

    let predicted = tmp.path().join("inferred.jsonl");
    let msg = ok(&["infer", "--model", path(&a.join("model")), "--data", path(&data), "--out", path(&predicted)]);
    assert!(msg.contains("42 predictions"), "{msg}");
    let inferred = read_predictions(&predicted).unwrap();
    assert_eq!(inferred, read_predictions(&a.join(PREDICTIONS_FILE)).unwrap());
    let (dataset, truth) = load_data_dir(&data).unwrap();
    let evaluation = evaluate_predictions(&inferred, &truth.unwrap(), &dataset.classes).unwrap();
    assert_eq!(Some(evaluation), report.evaluation);
}

#[test]
fn run_without_sidecar_omits_accuracy() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "small.toml", SMALL);
    let data = tmp.path().join("data");
    ok(&["gen-data", "--config", path(&config), "--out", path(&data)]);
    fs::remove_file(data.join(TRUTH_FILE)).unwrap();
    let out = tmp.path().join("run");
    ok(&["run", "--config", path(&config), "--data", path(&data), "--out", path(&out)]);
    let report = read_report(&out).unwrap();
    assert!(report.evaluation.is_none());
    assert!(report.groups.iter().all(|g| g.pseudo_label_accuracy.is_none() && g.model_accuracy.is_none()));
    assert_eq!(report.groups.iter().map(|g| g.test).sum::<usize>(), 42);
}

#[test]
fn ablation_tables_have_the_expected_shape() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "small.toml", SMALL);
    for (verb, rows) in [("ablate-split", 2), ("ablate-progressive", 2), ("ablate-experts", 5)] {
        let out = tmp.path().join(verb);
        ok(&[verb, "--config", path(&config), "--out", path(&out)]);
        let report = read_report(&out).unwrap();
        let table = &report.tables[0];
        assert_eq!(table.rows.len(), rows, "{verb}");
        assert_eq!(table.columns, vec!["synth0001", "synth0002", "synth0003"]);
        for row in &table.rows {
            let mean = row.cells.iter().sum::<f64>() / row.cells.len() as f64;
            assert!((row.average - mean).abs() < 1e-12, "{verb}");
        }
        assert_eq!(report.comparisons.len(), rows - 1);
        assert!(report.comparisons.iter().all(|c| c.per_seed.len() == 2));
    }
    let experts = read_report(&tmp.path().join("ablate-experts")).unwrap();
    let labels: Vec<_> = experts.tables[0].rows.iter().map(|r| r.label.as_str()).collect();
    assert_eq!(labels, ["1", "2", "3", "4", "5"]);
}

#[test]
fn seed_flag_changes_the_report() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "small.toml", SMALL);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(&["ablate-split", "--config", path(&config), "--out", path(&a)]);
    ok(&["ablate-split", "--config", path(&config), "--seed", "9", "--out", path(&b)]);
    let (ra, rb) = (read_report(&a).unwrap(), read_report(&b).unwrap());
    assert_eq!(rb.seed, 9);
    assert_ne!(ra.config_digest, rb.config_digest);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = path(tmp.path()).to_string();

    let bad = write_config(tmp.path(), "bad.toml", "[pipeline]\ntop_k = 0\n");
    assert_eq!(deem(&["gen-data", "--config", path(&bad), "--out", &out]).status.code(), Some(2));
    let unknown = write_config(tmp.path(), "unknown.toml", "[generator]\ncolour = 1\n");
    assert_eq!(deem(&["gen-data", "--config", path(&unknown), "--out", &out]).status.code(), Some(2));

    let missing = tmp.path().join("nope");
    assert_eq!(deem(&["run", "--data", path(&missing), "--out", &out]).status.code(), Some(3));

    // A model trained on three dates cannot route a fourth.
    let small = write_config(tmp.path(), "small.toml", SMALL);
    let data = tmp.path().join("data");
    ok(&["gen-data", "--config", path(&small), "--out", path(&data)]);
    let run = tmp.path().join("run");
    ok(&["run", "--config", path(&small), "--data", path(&data), "--out", path(&run)]);
    let four = write_config(tmp.path(), "four.toml", "[generator]\nnum_groups = 4\n");
    let data4 = tmp.path().join("data4");
    ok(&["gen-data", "--config", path(&four), "--out", path(&data4)]);
    let failed = deem(&["infer", "--model", path(&run.join("model")), "--data", path(&data4), "--out", &out]);
    assert_eq!(failed.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&failed.stderr).contains("synth0004"));

    let capped = write_config(
        tmp.path(),
        "capped.toml",
        "[generator]\nclass_sep = 0.2\n\n[pipeline]\nmax_rounds = 1\nfallback = \"disabled\"\n",
    );
    let hard = tmp.path().join("hard");
    ok(&["gen-data", "--config", path(&capped), "--out", path(&hard)]);
    let capped_run = deem(&["run", "--config", path(&capped), "--data", path(&hard), "--out", &out]);
    assert_eq!(capped_run.status.code(), Some(5), "{}", String::from_utf8_lossy(&capped_run.stderr));
}
