use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_seizeval"))
}

fn run(args: &[&str]) -> Output {
    let out = bin().args(args).output().unwrap();
    assert!(
        out.status.success(),
        "{args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn write_csv(path: &Path, rows: &[(&str, &str, f64, f64)]) {
    let mut s = String::from("subject,file,start_s,end_s,label\n");
    for (sub, file, a, b) in rows {
        s += &format!("{sub},{file},{a},{b},1\n");
    }
    fs::write(path, s).unwrap();
}

fn score(
    dir: &Path,
    reference: &[(&str, &str, f64, f64)],
    hyp: &[(&str, &str, f64, f64)],
) -> Value {
    let r = dir.join("ref.csv");
    let h = dir.join("hyp.csv");
    write_csv(&r, reference);
    write_csv(&h, hyp);
    let out = run(&[
        "score",
        "--reference",
        r.to_str().unwrap(),
        "--hypothesis",
        h.to_str().unwrap(),
        "--duration",
        "3600",
        "--fs",
        "16",
    ]);
    serde_json::from_slice(&out.stdout).unwrap()
}

fn num(v: &Value, key: &str) -> f64 {
    v["report"][key].as_f64().unwrap()
}

#[test]
fn identical_annotations_score_perfectly() {
    let d = tempfile::tempdir().unwrap();
    let rows = [("s1", "f1", 100.0, 160.0), ("s1", "f1", 900.0, 950.0)];
    let v = score(d.path(), &rows, &rows);
    for k in [
        "sensitivity_ep",
        "precision_ep",
        "f1_ep",
        "sensitivity_dur",
        "precision_dur",
        "f1_dur",
        "f1_de",
    ] {
        assert_eq!(num(&v, k), 1.0, "{k}");
    }
    assert_eq!(num(&v, "far_per_day"), 0.0);
}

#[test]
fn disjoint_hypothesis_has_zero_sensitivity() {
    let d = tempfile::tempdir().unwrap();
    let v = score(
        d.path(),
        &[("s1", "f1", 100.0, 160.0)],
        &[("s1", "f1", 400.0, 460.0)],
    );
    assert_eq!(num(&v, "sensitivity_ep"), 0.0);
    assert_eq!(num(&v, "sensitivity_dur"), 0.0);
    // One false alarm in one hour.
    assert!((num(&v, "far_per_day") - 24.0).abs() < 1e-9);
}

#[test]
fn one_hit_one_miss_one_false_alarm() {
    let d = tempfile::tempdir().unwrap();
    let v = score(
        d.path(),
        &[("s1", "f1", 100.0, 200.0), ("s1", "f1", 1000.0, 1100.0)],
        &[("s1", "f1", 120.0, 180.0), ("s1", "f1", 2000.0, 2060.0)],
    );
    assert_eq!(num(&v, "sensitivity_ep"), 0.5);
    assert_eq!(num(&v, "precision_ep"), 0.5);
    assert_eq!(num(&v, "f1_ep"), 0.5);
    // 60 s hit of 200 s reference; 60 of 120 s predicted are correct.
    assert!((num(&v, "sensitivity_dur") - 0.3).abs() < 1e-9);
    assert!((num(&v, "precision_dur") - 0.5).abs() < 1e-9);
}

#[test]
fn csv_format_is_versioned() {
    let d = tempfile::tempdir().unwrap();
    let rows = [("s1", "f1", 10.0, 20.0)];
    write_csv(&d.path().join("a.csv"), &rows);
    let a = d.path().join("a.csv");
    let out = run(&[
        "score",
        "--reference",
        a.to_str().unwrap(),
        "--hypothesis",
        a.to_str().unwrap(),
        "--duration",
        "60",
        "--format",
        "csv",
    ]);
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("report_csv_version,sensitivity_ep,"));
    assert_eq!(lines[0].split(',').count(), lines[1].split(',').count());
}

#[test]
fn label_length_mismatch_is_rejected() {
    let d = tempfile::tempdir().unwrap();
    let r = d.path().join("r.csv");
    let l = d.path().join("h.txt");
    write_csv(&r, &[("s1", "f1", 10.0, 20.0)]);
    fs::write(&l, "0 0 1 1 0\n").unwrap();
    let out = bin()
        .args([
            "score",
            "--reference",
            r.to_str().unwrap(),
            "--labels",
            l.to_str().unwrap(),
            "--subject",
            "s1",
            "--file",
            "f1",
            "--duration",
            "60",
            "--fs",
            "16",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn bad_config_key_fails_cleanly() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("c.toml");
    fs::write(&cfg, "no_such_key = 3\n").unwrap();
    let out = bin()
        .args(["run", "--config", cfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no_such_key"));
}

const TINY: &str = r#"
n_trees = 8
synth_n_subjects = 2
synth_hours_per_subject = 3.0
synth_file_hours = 1.0
synth_fs = 128.0
synth_n_channels = 2
synth_seizures_mean = 3.0
synth_seizures_sd = 0.0
"#;

#[test]
fn run_writes_reports_and_is_reproducible() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("tiny.toml");
    fs::write(&cfg, TINY).unwrap();
    let outs: Vec<_> = ["a", "b"]
        .iter()
        .map(|n| {
            let o = d.path().join(n);
            run(&[
                "run",
                "--config",
                cfg.to_str().unwrap(),
                "--seed",
                "3",
                "--out",
                o.to_str().unwrap(),
            ]);
            o
        })
        .collect();
    let cfg_text = |o: &Path| -> String {
        fs::read_to_string(o.join("config.toml"))
            .unwrap()
            .lines()
            .filter(|l| !l.starts_with("out = "))
            .collect()
    };
    assert_eq!(cfg_text(&outs[0]), cfg_text(&outs[1]));
    for f in [
        "fold_plan.json",
        "folds.csv",
        "subjects.csv",
        "report.json",
        "panel.svg",
        "timeline.svg",
    ] {
        let a = fs::read(outs[0].join(f)).unwrap();
        let b = fs::read(outs[1].join(f)).unwrap();
        assert_eq!(a, b, "{f} differs between identical runs");
    }
    assert!(!outs[0].join("INCOMPLETE").exists());

    let report: Value =
        serde_json::from_slice(&fs::read(outs[0].join("report.json")).unwrap()).unwrap();
    let f1 = report["average"]["f1_ep"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&f1));

    let svg = d.path().join("cmp.svg");
    run(&[
        "plot",
        "--report",
        outs[0].join("report.json").to_str().unwrap(),
        "--label",
        "seed 3",
        "--out",
        svg.to_str().unwrap(),
    ]);
    assert!(fs::read_to_string(svg).unwrap().starts_with("<svg"));
}
