use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use panos_cli::commands::{cmd_collect, cmd_compare, cmd_pca_report, cmd_train, REPORT_FILE};
use panos_cli::settings::{train_from_config, CollectSettings, CompareSettings};
use panos_core::config::KeyedConfig;
use panos_core::simworld::TerrainClass;

fn panos(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_panos"))
        .args(args)
        .current_dir(dir)
        .env("SOURCE_DATE_EPOCH", "1700000000")
        .output()
        .expect("spawn panos")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn small_collect() -> CollectSettings {
    CollectSettings {
        terrains: vec![TerrainClass::Gravel, TerrainClass::Concrete],
        payloads: vec![1.0],
        rollouts: 1,
        duration: 8.0,
        ..CollectSettings::default()
    }
}

#[test]
fn zero_duration_fails_and_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.cfg"), "collect.duration = 0\n").unwrap();
    let out = panos(
        dir.path(),
        &["collect", "--config", "bad.cfg", "--out", "c"],
    );
    assert!(!out.status.success());
    assert!(
        stderr(&out).contains("collect.duration"),
        "{}",
        stderr(&out)
    );
    assert!(!dir.path().join("c").exists());
}

#[test]
fn unknown_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("typo.cfg"),
        "# comment\ncollect.rollout = 3\n",
    )
    .unwrap();
    let out = panos(dir.path(), &["collect", "--config", "typo.cfg"]);
    assert!(!out.status.success());
    let msg = stderr(&out);
    assert!(
        msg.contains("collect.rollout") && msg.contains("line 2"),
        "{msg}"
    );
}

#[test]
fn missing_dataset_and_bad_flags_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let out = panos(dir.path(), &["train", "nope.pnsd"]);
    assert!(!out.status.success());
    assert!(stderr(&out).starts_with("error:"));
    let out = panos(dir.path(), &["collect", "--bogus"]);
    assert!(!out.status.success());
}

#[test]
fn compare_without_checkpoint_names_the_cell() {
    let dir = tempfile::tempdir().unwrap();
    let out = panos(dir.path(), &["compare", "--checkpoint", "missing.pnsw"]);
    assert!(!out.status.success());
    let msg = stderr(&out);
    assert!(msg.contains("cell panos/grass/1.0kg/seed 1"), "{msg}");
}

#[test]
fn pca_report_needs_two_groups() {
    let dir = tempfile::tempdir().unwrap();
    let c = cmd_collect(&small_collect(), &dir.path().join("c")).unwrap();
    let err =
        cmd_pca_report(std::slice::from_ref(&c.dataset), &dir.path().join("pca")).unwrap_err();
    assert!(err.to_string().contains("at least 2 groups"), "{err}");
}

#[test]
fn pca_report_writes_one_column_per_group() {
    let dir = tempfile::tempdir().unwrap();
    // the covariance needs more windows than proprio dimensions
    let light = CollectSettings {
        duration: 40.0,
        ..small_collect()
    };
    let a = cmd_collect(&light, &dir.path().join("a")).unwrap();
    let heavy = CollectSettings {
        payloads: vec![6.8],
        ..light
    };
    let b = cmd_collect(&heavy, &dir.path().join("b")).unwrap();
    let out = cmd_pca_report(&[a.dataset, b.dataset], &dir.path().join("pca")).unwrap();
    assert_eq!(out.groups.len(), 2);
    for (_, f) in &out.groups {
        assert!((f.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
    let csv = fs::read_to_string(dir.path().join("pca/pca.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap().split(',').count(), 3);
    assert!(dir.path().join("pca/pca.svg").exists());
}

#[test]
fn train_curve_has_one_row_per_epoch_and_compare_fills_the_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let c = cmd_collect(&small_collect(), &dir.path().join("c")).unwrap();
    assert_eq!(c.sequences.len(), 16);

    let cfg = KeyedConfig::parse(
        "train.epochs = 3\ntrain.checkpoint_interval = 2\ntrain.batch_size = 8\n",
    )
    .unwrap();
    let t = cmd_train(
        &c.dataset,
        &train_from_config(cfg).unwrap(),
        &dir.path().join("t"),
    )
    .unwrap();
    let curve = fs::read_to_string(dir.path().join("t/curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 1 + 3);
    assert_eq!(t.curve.len(), 3);
    for name in [
        "checkpoint_epoch_0002.pnsw",
        "checkpoint_epoch_0003.pnsw",
        "model.pnsw",
    ] {
        assert!(dir.path().join("t").join(name).exists(), "{name}");
    }

    let settings = CompareSettings {
        duration: 2.0,
        ..CompareSettings::default()
    };
    let cmp = cmd_compare(&settings, Some(&t.model), &dir.path().join("cmp")).unwrap();
    assert_eq!(cmp.reports.len(), 36);
    let csv = fs::read_to_string(dir.path().join("cmp").join(REPORT_FILE)).unwrap();
    assert_eq!(csv.lines().count(), 37);
    assert!(csv.lines().next().unwrap().ends_with("improvement_pct"));
    assert!(cmp
        .reports
        .iter()
        .filter(|r| r.controller == "fixed")
        .all(|r| r.improvement == Some(0.0)));
    // every output appears in the manifest exactly once
    let mut paths: Vec<&str> = cmp
        .manifest
        .outputs
        .iter()
        .map(|o| o.path.as_str())
        .collect();
    paths.sort_unstable();
    assert_eq!(paths, ["cost.svg", "jerk.svg", "report.csv"]);
}

#[test]
fn collect_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("c.cfg"),
        "collect.terrains = grass\ncollect.payloads = 1.0\ncollect.rollouts = 1\ncollect.duration = 6\ncollect.write_runlogs = true\n",
    )
    .unwrap();
    for out in ["r1", "r2"] {
        let o = panos(dir.path(), &["collect", "--config", "c.cfg", "--out", out]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for name in [
        "dataset.pnsd",
        "manifest.json",
        "runlogs/grass_1.0kg_0.jsonl",
        "runlogs/grass_1.0kg_0.jsonl.frames.bin",
    ] {
        let a = fs::read(dir.path().join("r1").join(name)).unwrap();
        let b = fs::read(dir.path().join("r2").join(name)).unwrap();
        assert!(a == b, "{name} differs");
    }
}

#[test]
fn seed_flag_changes_the_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let a = cmd_collect(&small_collect(), &dir.path().join("a")).unwrap();
    let b = cmd_collect(
        &CollectSettings {
            seed: 2,
            ..small_collect()
        },
        &dir.path().join("b"),
    )
    .unwrap();
    assert_ne!(fs::read(a.dataset).unwrap(), fs::read(b.dataset).unwrap());
}

#[test]
fn eval_writes_a_runlog_and_report() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("e.cfg"),
        "eval.controller = reactive\neval.terrain = gravel\neval.duration = 3\n",
    )
    .unwrap();
    let o = panos(dir.path(), &["eval", "--config", "e.cfg", "--out", "e"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = fs::read_to_string(dir.path().join("e/report.csv")).unwrap();
    assert_eq!(report.lines().count(), 2);
    assert!(report
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("reactive,gravel,"));
    let log = panos_core::simworld::read_runlog(&dir.path().join("e/runlog.jsonl")).unwrap();
    assert_eq!(log.steps.len(), 300);
}
