use seizeval::experiment::{
    fp_decisions, permutation_baseline, run_to_dir, run_with, Dataset, ExperimentConfig,
    FeatureCache, ReportFile, INCOMPLETE_MARKER,
};

fn small(seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        seed,
        n_trees: 20,
        synth_n_subjects: 2,
        synth_hours_per_subject: 3.0,
        synth_n_channels: 4,
        ..ExperimentConfig::default()
    }
}

#[test]
fn threshold_baseline_finds_every_default_seizure() {
    let cfg = ExperimentConfig {
        predictor: "threshold_baseline".into(),
        ..ExperimentConfig::default()
    };
    let data = Dataset::load(&cfg).unwrap();
    let r = run_with(&cfg, &data, &FeatureCache::new()).unwrap();
    assert_eq!(r.average.sensitivity_ep, 1.0, "{:?}", r.average);
}

#[test]
fn config_written_with_a_run_replays_it() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small(5);
    cfg.out = tmp.path().join("first");
    let data = Dataset::load(&cfg).unwrap();
    let first = run_to_dir(&cfg, &data, &FeatureCache::new()).unwrap();
    assert!(!cfg.out.join(INCOMPLETE_MARKER).exists());

    let mut replay = ExperimentConfig::load(&cfg.out.join("config.toml")).unwrap();
    replay.out = tmp.path().join("second");
    let data = Dataset::load(&replay).unwrap();
    let second = run_to_dir(&replay, &data, &FeatureCache::new()).unwrap();
    assert_eq!(first.average, second.average);
    assert_eq!(first.plans, second.plans);
    assert_eq!(
        ReportFile::load(&tmp.path().join("first/report.json")).unwrap(),
        ReportFile::load(&tmp.path().join("second/report.json")).unwrap()
    );
}

#[test]
fn failed_run_leaves_marker() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small(1);
    // Far more background than three hours can supply around each seizure.
    cfg.arrangement = "Fact1000".into();
    cfg.out = tmp.path().to_path_buf();
    let data = Dataset::load(&cfg).unwrap();
    let e = run_to_dir(&cfg, &data, &FeatureCache::new()).unwrap_err();
    let marker = std::fs::read_to_string(tmp.path().join(INCOMPLETE_MARKER)).unwrap();
    assert_eq!(marker, format!("run failed: {e}\n"));
    assert!(!tmp.path().join("report.json").exists());
}

#[test]
fn feature_cache_is_reused_across_runs() {
    let cfg = small(2);
    let data = Dataset::load(&cfg).unwrap();
    let cache = FeatureCache::new();
    let a = run_with(&cfg, &data, &cache).unwrap();
    let n = cache.len();
    assert!(n > 0);
    let tscv = ExperimentConfig {
        cv: "tscv".into(),
        ..cfg.clone()
    };
    run_with(&tscv, &data, &cache).unwrap();
    assert_eq!(
        cache.len(),
        n,
        "same arrangement and windowing must hit the cache"
    );
    let b = run_with(&cfg, &data, &cache).unwrap();
    assert_eq!(a.folds, b.folds);
}

#[test]
fn fold_reports_cover_every_test_file_once() {
    let cfg = small(3);
    let data = Dataset::load(&cfg).unwrap();
    let r = run_with(&cfg, &data, &FeatureCache::new()).unwrap();
    let mut tested: Vec<&str> = r
        .folds
        .iter()
        .flat_map(|f| f.test.iter().map(String::as_str))
        .collect();
    let n = tested.len();
    tested.sort();
    tested.dedup();
    assert_eq!(tested.len(), n, "L1O tests each file once");
    let files: usize = r.plans.iter().map(|p| p.folds.len()).sum();
    assert_eq!(files, n);
    for f in &r.folds {
        for file in &f.files {
            assert_eq!(file.reference.len(), file.hypothesis.len());
            assert_eq!(file.raw.len(), file.reference.len());
        }
    }
}

#[test]
fn fp_decisions_shrink_with_coarser_steps() {
    // Fewer windows means fewer decisions of any kind.
    let cfg = small(4);
    let data = Dataset::load(&cfg).unwrap();
    let cache = FeatureCache::new();
    let fine = run_with(&cfg, &data, &cache).unwrap();
    let coarse = run_with(
        &ExperimentConfig {
            step_s: cfg.step_s * 4.0,
            ..cfg.clone()
        },
        &data,
        &cache,
    )
    .unwrap();
    let windows = |r: &seizeval::experiment::ExperimentResult| -> usize {
        r.folds
            .iter()
            .flat_map(|f| &f.files)
            .map(|f| f.windows.len())
            .sum()
    };
    assert!(windows(&coarse) * 3 < windows(&fine));
    assert!(fp_decisions(&fine) <= windows(&fine));
    assert!(fp_decisions(&coarse) <= windows(&coarse));
}

#[test]
fn permutation_baseline_is_seeded() {
    let cfg = small(6);
    let data = Dataset::load(&cfg).unwrap();
    let r = run_with(&cfg, &data, &FeatureCache::new()).unwrap();
    let a = permutation_baseline(&r, 5, 9).unwrap();
    let b = permutation_baseline(&r, 5, 9).unwrap();
    let c = permutation_baseline(&r, 5, 10).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), 5);
    assert_ne!(a, c);
}
