use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use widthsearch::search::{read_log, LogRow};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_widthsearch")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const TINY: &str = r#"{
    "spec": "fixture:toy-3conv",
    "base_width": 4,
    "dataset": {"source": "synthetic", "seed": 2, "count": 150, "classes": 3, "dims": [8, 8, 3]},
    "holdout": 30,
    "verbosity": 0,
    "search": {"seed": 5, "p1": 3, "p2": 4, "k": 2, "child_epochs": 1, "init_epochs": 1, "max_generations": 4},
    "train": {"batch_size": 32, "epochs": 1}
}"#;

fn tiny_config(dir: &Path) -> String {
    let p = dir.join("tiny.json");
    fs::write(&p, TINY).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn schedule_reports_published_params() {
    let o = bin(&["schedule", "--spec", "fixture:resnet18", "--schedule", "published:resnet18-modified-2", "--json"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let params = v["params"].as_f64().unwrap();
    assert!((params / 9.94e6 - 1.0).abs() < 0.03, "{params}");

    let o = bin(&["schedule", "--spec", "fixture:plain-cnn", "--uniform", "32"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("params"));
}

#[test]
fn schedule_rejects_bad_input() {
    let o = bin(&["schedule", "--spec", "fixture:nonesuch", "--uniform", "8"]);
    assert_eq!(o.status.code(), Some(2));
    let o = bin(&["schedule", "--spec", "fixture:plain-cnn", "--uniform", "7"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn widen_check_exit_codes() {
    let o = bin(&["widen-check", "--spec", "fixture:toy-3conv", "--trials", "10"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).contains("preserved"));
    let o = bin(&["widen-check", "--spec", "fixture:toy-3conv", "--trials", "0", "--json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["deviations"].as_array().unwrap().is_empty());
    let o = bin(&["widen-check", "--spec", "fixture:toy-3conv", "--trials", "3", "--delta", "0.05"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("exceeds"));
}

#[test]
fn search_is_reproducible_and_self_contained() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let mut logs: Vec<Vec<LogRow>> = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let o = bin(&["search", "--config", &cfg, "--output", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        for f in ["header.json", "log.csv", "best_schedule.json", "best.ckpt", "summary.json"] {
            assert!(out.join(f).is_file(), "{f} missing");
        }
        assert!(!out.join("run.lock").exists());
        logs.push(read_log(fs::File::open(out.join("log.csv")).unwrap()).unwrap());
    }
    assert_eq!(logs[0].len(), 3 + 4);
    assert!(logs[0].iter().zip(&logs[1]).all(|(a, b)| a.same_event(b)));

    let header: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("a/header.json")).unwrap()).unwrap();
    assert_eq!(header["seed"], 5);
    assert_eq!(header["normalization"]["means"].as_array().unwrap().len(), 3);

    let best = dir.path().join("a/best_schedule.json");
    let ckpt = dir.path().join("a/best.ckpt");
    let o = bin(&[
        "eval", "--config", &cfg, "--schedule", best.to_str().unwrap(),
        "--checkpoint", ckpt.to_str().unwrap(), "--epochs", "0",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("validation accuracy"));

    let o = bin(&["eval", "--config", &cfg, "--schedule", "[4, 4]", "--checkpoint", ckpt.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let wrong = dir.path().join("wrong.json");
    fs::write(&wrong, "[6, 6, 6]").unwrap();
    let o = bin(&["eval", "--config", &cfg, "--schedule", wrong.to_str().unwrap(), "--checkpoint", ckpt.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn missing_dataset_is_a_user_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("cifar.json");
    fs::write(
        &p,
        r#"{"spec": "fixture:resnet18", "dataset": {"source": "binary", "paths": ["missing/data_batch_1.bin"], "classes": 10}}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = bin(&["search", "--config", p.to_str().unwrap(), "--output", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("does not exist"));
}

#[test]
fn locked_directory_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let out = dir.path().join("run");
    fs::create_dir_all(&out).unwrap();
    fs::write(out.join("run.lock"), "1").unwrap();
    let o = bin(&["search", "--config", &cfg, "--output", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn shipped_configs_and_specs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for entry in fs::read_dir(&root).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            let cfg = widthsearch::cli::RunConfig::load(&path).unwrap();
            cfg.spec().unwrap();
            cfg.search.validate().unwrap();
        }
    }
    for name in ["plain-cnn", "resnet18", "vgg16"] {
        let path = root.join("specs").join(format!("{name}.json"));
        let spec = widthsearch::cli::load_spec(path.to_str().unwrap()).unwrap();
        assert_eq!(spec, widthsearch::arch::fixtures::by_name(name).unwrap());
    }
}
