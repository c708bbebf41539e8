//! End-to-end experiments: arrange, extract, fit and predict per fold,
//! post-process, score and aggregate, then write reports.

pub mod config;
pub mod plot;

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::edf::CHB_MIT_COMMON_CHANNELS;
use crate::error::{err, Error, Result};
use crate::features::{
    extract_features, file_sample_labels, project_to_samples, window_labels, FeatureConfig,
    FeatureMatrix,
};
use crate::metrics::{
    aggregate_folds, average_rates, finalize_report, fold_counts, score_taes, Aggregation,
    CountUnit, FoldOutput, MetricCounts, ScoreReport, ScoredFile, REPORT_CSV_COLUMNS,
    REPORT_CSV_VERSION,
};
use crate::partition::{
    arrange, file_subjects, make_folds_generalized, make_folds_l1o, make_folds_tscv, subject_files,
    DataFile, FoldPlan, Scheme, Scope,
};
use crate::postprocess::postprocess_series;
use crate::predictor::fit;
use crate::recording::{open_reader, scan_edf_directory, RecordingSet, SignalReader};
use crate::seed::hash_str;
use crate::synth::generate;
use crate::timeline::{
    events_to_labels, labels_to_events, read_annotations_file, AnnotationRow, LabelSeries, SEIZURE,
};

pub use config::{ExperimentConfig, SourceKind};

const MODULE: &str = "experiment";

/// Marker present in an output directory while a run is in progress or
/// after it failed.
pub const INCOMPLETE_MARKER: &str = "INCOMPLETE";

/// A recording set with a reader for its samples.
#[derive(Clone)]
pub struct Dataset {
    pub set: RecordingSet,
    pub reader: Arc<dyn SignalReader>,
    fingerprint: u64,
}

impl Dataset {
    pub fn new(set: RecordingSet, reader: Arc<dyn SignalReader>) -> Result<Self> {
        set.validate()?;
        let fingerprint = hash_str(&serde_json::to_string(&set)?);
        Ok(Self {
            set,
            reader,
            fingerprint,
        })
    }

    pub fn open(set: RecordingSet) -> Result<Self> {
        let reader = open_reader(&set)?;
        Self::new(set, reader)
    }

    /// Loads the data source named by `cfg`.
    pub fn load(cfg: &ExperimentConfig) -> Result<Self> {
        if let Some(p) = &cfg.recordings {
            return Self::open(RecordingSet::load_json(p)?);
        }
        match cfg.source {
            SourceKind::Synthetic => {
                let d = generate(&cfg.synth_config())?;
                Self::new(d.set, Arc::new(d.reader))
            }
            SourceKind::Edf => {
                let dir = cfg
                    .data_dir
                    .as_ref()
                    .ok_or_else(|| err!(Validation, MODULE, "source = edf needs data_dir"))?;
                let ann_path = cfg
                    .annotations
                    .clone()
                    .unwrap_or_else(|| dir.join("annotations.csv"));
                let ann = read_annotations_file(&ann_path)?;
                let channels: Vec<String> = if cfg.channels.is_empty() {
                    CHB_MIT_COMMON_CHANNELS
                        .iter()
                        .map(|c| c.to_string())
                        .collect()
                } else {
                    cfg.channels.clone()
                };
                let set = scan_edf_directory(dir, &ann, &channels, cfg.duplicate_channels)?;
                Self::open(set)
            }
        }
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }
}

/// Feature matrices keyed by data source, file layout and feature settings,
/// shared between experiments on the same data.
#[derive(Default)]
pub struct FeatureCache {
    map: Mutex<HashMap<String, Arc<FeatureMatrix>>>,
}

impl FeatureCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.map.lock().expect("feature cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn clear(&self) {
        self.map.lock().expect("feature cache poisoned").clear();
    }

    fn key(data: &Dataset, file: &DataFile, cfg: &FeatureConfig) -> String {
        format!(
            "{:016x}|{}|{:?}|{:?}",
            data.fingerprint, file.meta.file_id, file.segments, cfg
        )
    }

    pub fn get_or_extract(
        &self,
        data: &Dataset,
        file: &DataFile,
        cfg: &FeatureConfig,
    ) -> Result<Arc<FeatureMatrix>> {
        let key = Self::key(data, file, cfg);
        if let Some(m) = self.map.lock().expect("feature cache poisoned").get(&key) {
            return Ok(m.clone());
        }
        let m = Arc::new(extract_features(
            file,
            data.reader.as_ref(),
            &data.set.channels,
            cfg,
        )?);
        self.map
            .lock()
            .expect("feature cache poisoned")
            .insert(key, m.clone());
        Ok(m)
    }
}

/// Predictions for one test file, all at the sampling rate.
#[derive(Debug, Clone, PartialEq)]
pub struct FileResult {
    pub file_id: String,
    /// One predicted label per feature window.
    pub windows: Vec<u8>,
    pub reference: LabelSeries,
    /// Window predictions projected to samples, before post-processing.
    pub raw: LabelSeries,
    pub hypothesis: LabelSeries,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldResult {
    pub subject: String,
    pub index: usize,
    pub train: Vec<String>,
    pub test: Vec<String>,
    pub files: Vec<FileResult>,
    pub report: ScoreReport,
}

impl FoldResult {
    pub fn output(&self) -> FoldOutput {
        FoldOutput {
            files: self
                .files
                .iter()
                .map(|f| ScoredFile {
                    reference: f.reference.clone(),
                    hypothesis: f.hypothesis.clone(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub plans: Vec<FoldPlan>,
    pub folds: Vec<FoldResult>,
    /// Per-subject reports in subject order.
    pub subjects: Vec<(String, ScoreReport)>,
    /// Rates averaged over subjects; counts, duration and FAR pooled.
    pub average: ScoreReport,
    pub dataset_fingerprint: u64,
}

/// Fold plans for every subject (personalized) or one leave-one-subject-out
/// plan (generalized).
pub fn plan_folds(files: &[DataFile], scheme: Scheme, scope: Scope) -> Result<Vec<FoldPlan>> {
    let plans = match scope {
        Scope::Generalized => vec![make_folds_generalized(files)?],
        Scope::Personalized => file_subjects(files)
            .iter()
            .map(|s| {
                let own: Vec<DataFile> = subject_files(files, s).into_iter().cloned().collect();
                match scheme {
                    Scheme::L1O => make_folds_l1o(&own),
                    Scheme::TSCV => make_folds_tscv(&own),
                }
                .map_err(|e| err!(Precondition, MODULE, "subject {s}: {e}"))
            })
            .collect::<Result<Vec<_>>>()?,
    };
    for p in &plans {
        p.validate(files)?;
    }
    Ok(plans)
}

struct FoldTask<'a> {
    subject: String,
    index: usize,
    train: &'a [String],
    test: &'a [String],
}

/// Runs `cfg` on `data`, reusing features from `cache`.
pub fn run_with(
    cfg: &ExperimentConfig,
    data: &Dataset,
    cache: &FeatureCache,
) -> Result<ExperimentResult> {
    cfg.validate()?;
    let arrangement = cfg.arrangement()?;
    let scope = cfg.scope()?;
    let feature_cfg = cfg.feature_config();
    let predictor_cfg = cfg.predictor_config()?;
    let post = cfg.postprocess();

    let files = arrange(&data.set, &arrangement, cfg.seed)?;
    let plans = plan_folds(&files, cfg.scheme()?, scope)?;
    let by_id: BTreeMap<&str, &DataFile> =
        files.iter().map(|f| (f.meta.file_id.as_str(), f)).collect();

    let features: BTreeMap<&str, Arc<FeatureMatrix>> = files
        .par_iter()
        .map(|f| {
            Ok((
                f.meta.file_id.as_str(),
                cache.get_or_extract(data, f, &feature_cfg)?,
            ))
        })
        .collect::<Result<_>>()?;

    let mut tasks = Vec::new();
    for p in &plans {
        for (k, fold) in p.folds.iter().enumerate() {
            let subject = match &p.subject {
                Some(s) => s.clone(),
                None => by_id[fold.test[0].as_str()].meta.subject_id.clone(),
            };
            tasks.push(FoldTask {
                subject,
                index: k,
                train: &fold.train,
                test: &fold.test,
            });
        }
    }

    let window = feature_cfg.windowing.window_samples(data.set.fs);
    let step = feature_cfg.windowing.step_samples(data.set.fs);
    let folds: Vec<FoldResult> = tasks
        .par_iter()
        .map(|t| {
            let parts: Vec<&FeatureMatrix> = t
                .train
                .iter()
                .map(|id| features[id.as_str()].as_ref())
                .collect();
            let train = FeatureMatrix::concat(&parts)?;
            let model = fit(&train, &predictor_cfg).map_err(|e| {
                err!(
                    Training,
                    MODULE,
                    "subject {} fold {}: {e}",
                    t.subject,
                    t.index
                )
            })?;
            drop(train);
            let mut out = Vec::with_capacity(t.test.len());
            for id in t.test {
                let file = by_id[id.as_str()];
                let fs = file.meta.fs;
                let n = file.n_samples();
                let windows = model.predict(&features[id.as_str()])?;
                let raw = LabelSeries::new(project_to_samples(&windows, n, window, step), fs, 0.0)?;
                let hypothesis = postprocess_series(&raw, &post)?;
                let reference = LabelSeries::new(file_sample_labels(file)?, fs, 0.0)?;
                out.push(FileResult {
                    file_id: id.clone(),
                    windows,
                    reference,
                    raw,
                    hypothesis,
                });
            }
            let mut fold = FoldResult {
                subject: t.subject.clone(),
                index: t.index,
                train: t.train.to_vec(),
                test: t.test.to_vec(),
                files: out,
                report: finalize_report(
                    MetricCounts::zero(CountUnit::Samples),
                    MetricCounts::zero(CountUnit::Events),
                    0.0,
                ),
            };
            let (d, e, s) = fold_counts(&fold.output())?;
            fold.report = finalize_report(d, e, s);
            Ok(fold)
        })
        .collect::<Result<_>>()?;

    let mut subjects = Vec::new();
    let mut all = Vec::new();
    for s in file_subjects(&files) {
        let outs: Vec<FoldOutput> = folds
            .iter()
            .filter(|f| f.subject == s)
            .map(FoldResult::output)
            .collect();
        if outs.is_empty() {
            continue;
        }
        subjects.push((s, aggregate_folds(&outs, cfg.aggregation)?));
        all.extend(outs);
    }
    let pooled = aggregate_folds(&all, Aggregation::Pooled)?;
    let reports: Vec<ScoreReport> = subjects.iter().map(|(_, r)| r.clone()).collect();
    let average = average_rates(&reports, pooled);
    Ok(ExperimentResult {
        config: cfg.clone(),
        plans,
        folds,
        subjects,
        average,
        dataset_fingerprint: data.fingerprint,
    })
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let data = Dataset::load(cfg)?;
    run_with(cfg, &data, &FeatureCache::new())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMetadata {
    pub tool: String,
    pub version: String,
    pub report_csv_version: u32,
    pub seed: u64,
    pub dataset_fingerprint: String,
    pub arrangement: String,
    pub scheme: String,
    pub scope: String,
    pub aggregation: Aggregation,
    pub n_folds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub report_csv_version: u32,
    pub aggregation: Aggregation,
    pub average: ScoreReport,
    pub subjects: BTreeMap<String, ScoreReport>,
}

impl ReportFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn report_csv<'a>(
    path: &Path,
    lead: &[&str],
    rows: impl Iterator<Item = (Vec<String>, &'a ScoreReport)>,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = vec!["report_csv_version".into()];
    header.extend(lead.iter().map(|s| s.to_string()));
    header.extend(REPORT_CSV_COLUMNS.iter().map(|s| s.to_string()));
    w.write_record(&header)?;
    for (mut row, r) in rows {
        row.insert(0, REPORT_CSV_VERSION.to_string());
        row.extend(r.csv_row());
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes every artifact of `result` into `dir`.
///
/// Files: `config.toml`, `run.json`, `fold_plan.json`, `folds.csv`,
/// `subjects.csv`, `report.json`, `panel.svg`, `timeline.svg`.
pub fn write_outputs(result: &ExperimentResult, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let cfg = &result.config;
    write(&dir.join("config.toml"), cfg.to_toml_string()?)?;
    let meta = RunMetadata {
        tool: "seizeval".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        report_csv_version: REPORT_CSV_VERSION,
        seed: cfg.seed,
        dataset_fingerprint: format!("{:016x}", result.dataset_fingerprint),
        arrangement: cfg.arrangement()?.to_string(),
        scheme: cfg.scheme()?.to_string(),
        scope: cfg.scope()?.to_string(),
        aggregation: cfg.aggregation,
        n_folds: result.folds.len(),
    };
    write(&dir.join("run.json"), serde_json::to_string_pretty(&meta)?)?;
    write(
        &dir.join("fold_plan.json"),
        serde_json::to_string_pretty(&result.plans)?,
    )?;
    report_csv(
        &dir.join("folds.csv"),
        &["subject", "fold", "test_files", "n_train_files"],
        result.folds.iter().map(|f| {
            (
                vec![
                    f.subject.clone(),
                    f.index.to_string(),
                    f.test.join(";"),
                    f.train.len().to_string(),
                ],
                &f.report,
            )
        }),
    )?;
    report_csv(
        &dir.join("subjects.csv"),
        &["subject"],
        result
            .subjects
            .iter()
            .map(|(s, r)| (vec![s.clone()], r))
            .chain(std::iter::once((
                vec!["average".to_string()],
                &result.average,
            ))),
    )?;
    let report = ReportFile {
        report_csv_version: REPORT_CSV_VERSION,
        aggregation: cfg.aggregation,
        average: result.average.clone(),
        subjects: result.subjects.iter().cloned().collect(),
    };
    write(
        &dir.join("report.json"),
        serde_json::to_string_pretty(&report)?,
    )?;

    let mut series: Vec<(String, ScoreReport)> = vec![("average".into(), result.average.clone())];
    series.extend(result.subjects.iter().cloned());
    let title = format!(
        "{} / {} / {}",
        cfg.arrangement()?,
        cfg.scheme()?,
        cfg.scope()?
    );
    write(&dir.join("panel.svg"), plot::panel_svg(&title, &series))?;
    if let Some(first) = result.folds.first() {
        let files: Vec<&FileResult> = result
            .folds
            .iter()
            .filter(|f| f.subject == first.subject)
            .flat_map(|f| &f.files)
            .collect();
        let join = |pick: fn(&FileResult) -> &LabelSeries| -> Result<LabelSeries> {
            let labels: Vec<u8> = files
                .iter()
                .flat_map(|f| pick(f).labels().iter().copied())
                .collect();
            LabelSeries::new(labels, files[0].reference.fs(), 0.0)
        };
        let lanes = vec![
            ("reference".to_string(), join(|f| &f.reference)?),
            ("raw".to_string(), join(|f| &f.raw)?),
            ("post-processed".to_string(), join(|f| &f.hypothesis)?),
        ];
        write(
            &dir.join("timeline.svg"),
            plot::timeline_svg(
                &format!("{} test files, concatenated", first.subject),
                &lanes,
            ),
        )?;
    }
    Ok(())
}

/// Runs `cfg` and writes its outputs to `cfg.out`. The output directory
/// carries an `INCOMPLETE` marker until every file has been written.
pub fn run_to_dir(
    cfg: &ExperimentConfig,
    data: &Dataset,
    cache: &FeatureCache,
) -> Result<ExperimentResult> {
    let dir = &cfg.out;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let marker = dir.join(INCOMPLETE_MARKER);
    write(
        &marker,
        "run started; outputs in this directory are partial\n",
    )?;
    let result = run_with(cfg, data, cache);
    let result = match result {
        Ok(r) => r,
        Err(e) => {
            write(&marker, format!("run failed: {e}\n"))?;
            return Err(e);
        }
    };
    if let Err(e) = write_outputs(&result, dir) {
        let _ = write(&marker, format!("writing outputs failed: {e}\n"));
        return Err(e);
    }
    std::fs::remove_file(&marker).map_err(|e| Error::io(&marker, e))?;
    Ok(result)
}

/// Null distribution of the averaged report: window predictions are
/// shuffled within each test file, then projected, post-processed and
/// scored exactly like the real predictions. Each permutation yields one
/// averaged report.
pub fn permutation_baseline(
    result: &ExperimentResult,
    n_perm: usize,
    seed: u64,
) -> Result<Vec<ScoreReport>> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;

    let cfg = &result.config;
    let post = cfg.postprocess();
    let windowing = cfg.windowing();
    (0..n_perm)
        .into_par_iter()
        .map(|p| {
            let mut rng =
                rand_chacha::ChaCha8Rng::seed_from_u64(crate::seed::mix(&[seed, 11, p as u64]));
            let mut outs: Vec<(String, FoldOutput)> = Vec::new();
            for fold in &result.folds {
                let mut files = Vec::with_capacity(fold.files.len());
                for f in &fold.files {
                    let fs = f.reference.fs();
                    let mut w = f.windows.clone();
                    w.shuffle(&mut rng);
                    let raw = LabelSeries::new(
                        project_to_samples(
                            &w,
                            f.reference.len(),
                            windowing.window_samples(fs),
                            windowing.step_samples(fs),
                        ),
                        fs,
                        0.0,
                    )?;
                    files.push(ScoredFile {
                        reference: f.reference.clone(),
                        hypothesis: postprocess_series(&raw, &post)?,
                    });
                }
                outs.push((fold.subject.clone(), FoldOutput { files }));
            }
            let mut reports = Vec::new();
            for (s, _) in &result.subjects {
                let mine: Vec<FoldOutput> = outs
                    .iter()
                    .filter(|(o, _)| o == s)
                    .map(|(_, f)| f.clone())
                    .collect();
                reports.push(aggregate_folds(&mine, cfg.aggregation)?);
            }
            let all: Vec<FoldOutput> = outs.into_iter().map(|(_, f)| f).collect();
            Ok(average_rates(
                &reports,
                aggregate_folds(&all, Aggregation::Pooled)?,
            ))
        })
        .collect()
}

/// False-positive decisions at the label rate: windows whose majority
/// reference label is background while the post-processed hypothesis at the
/// window's last sample is seizure. Summed over all test files.
pub fn fp_decisions(result: &ExperimentResult) -> usize {
    let windowing = result.config.windowing();
    result
        .folds
        .iter()
        .flat_map(|f| &f.files)
        .map(|f| {
            let fs = f.reference.fs();
            let (w, st) = (windowing.window_samples(fs), windowing.step_samples(fs));
            let hyp = f.hypothesis.labels();
            window_labels(f.reference.labels(), w, st)
                .iter()
                .enumerate()
                .filter(|&(j, &r)| r == 0 && hyp[j * st + w - 1] == SEIZURE)
                .count()
        })
        .sum()
}

/// Hypothesis input of [`score_only`].
#[derive(Debug, Clone)]
pub enum Hypothesis {
    Events(Vec<AnnotationRow>),
    /// Per-sample labels of one file at the scoring rate.
    Labels {
        subject: String,
        file: String,
        labels: Vec<u8>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreOnly {
    pub report: ScoreReport,
    pub taes: MetricCounts,
}

/// Scores a hypothesis against reference annotations without training.
///
/// `spans` gives `(subject, file) -> duration_s` for every scored file;
/// every annotation of either input must fall inside a listed file.
pub fn score_only(
    reference: &[AnnotationRow],
    hypothesis: &Hypothesis,
    spans: &BTreeMap<(String, String), f64>,
    fs: f64,
) -> Result<ScoreOnly> {
    if spans.is_empty() {
        return Err(err!(Validation, MODULE, "no files to score"));
    }
    let group = |rows: &[AnnotationRow],
                 what: &str|
     -> Result<BTreeMap<(String, String), Vec<crate::timeline::Event>>> {
        let mut m: BTreeMap<(String, String), Vec<_>> = BTreeMap::new();
        for r in rows {
            let key = (r.subject.clone(), r.file.clone());
            if !spans.contains_key(&key) {
                return Err(err!(
                    Alignment,
                    MODULE,
                    "{what} annotation for {}/{} has no matching file span",
                    r.subject,
                    r.file
                ));
            }
            m.entry(key).or_default().push(r.event()?);
        }
        Ok(m)
    };
    let refs = group(reference, "reference")?;
    let hyps = match hypothesis {
        Hypothesis::Events(rows) => Some(group(rows, "hypothesis")?),
        Hypothesis::Labels { .. } => None,
    };
    let mut folds = Vec::new();
    let mut taes = MetricCounts::zero(CountUnit::Events);
    for (key, &duration) in spans {
        let mut r_events = refs.get(key).cloned().unwrap_or_default();
        r_events.retain(|e| e.label == SEIZURE);
        let reference = events_to_labels(&r_events, fs, duration, 0.0)?;
        let hyp = match (hypothesis, &hyps) {
            (_, Some(h)) => {
                let mut ev = h.get(key).cloned().unwrap_or_default();
                ev.retain(|e| e.label == SEIZURE);
                events_to_labels(&ev, fs, duration, 0.0)?
            }
            (
                Hypothesis::Labels {
                    subject,
                    file,
                    labels,
                },
                None,
            ) => {
                if (subject, file) != (&key.0, &key.1) {
                    return Err(err!(
                        Alignment,
                        MODULE,
                        "label file covers {subject}/{file} but the span is for {}/{}",
                        key.0,
                        key.1
                    ));
                }
                if labels.len() != reference.len() {
                    return Err(err!(
                        Alignment,
                        MODULE,
                        "hypothesis has {} samples but the reference spans {} ({duration} s at {fs} Hz)",
                        labels.len(),
                        reference.len()
                    ));
                }
                LabelSeries::new(labels.clone(), fs, 0.0)?
            }
            _ => unreachable!(),
        };
        taes.add(&score_taes(
            &labels_to_events(&reference, SEIZURE),
            &labels_to_events(&hyp, SEIZURE),
        )?);
        folds.push(ScoredFile {
            reference,
            hypothesis: hyp,
        });
    }
    let report = aggregate_folds(&[FoldOutput { files: folds }], Aggregation::Pooled)?;
    Ok(ScoreOnly { report, taes })
}
