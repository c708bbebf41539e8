//! Duration-level (EPOCH), episode-level (OVLP) and overlap-weighted (TAES)
//! scoring, false alarm rate, and aggregation over cross-validation folds.
//!
//! Rates use these conventions when a denominator is zero:
//!
//! * sensitivity with no reference positives is 1 if the hypothesis is also
//!   empty (a perfect negative), otherwise 0;
//! * precision with no hypothesis positives is 1 if the reference is also
//!   empty, otherwise 0;
//! * F1 is 0 when both rates are 0.
//!
//! This keeps long seizure-free test files scoreable without NaN.
//!
//! The two aggregation modes are called [`Aggregation::FoldAverage`] and
//! [`Aggregation::Pooled`]. Some of the seizure-detection literature calls
//! these "micro-averaging" and "macro-averaging" respectively, which is the
//! reverse of the usual machine-learning meaning; both spellings are accepted
//! when parsing.
//!
//! The false alarm rate counts post-processed false-positive *episodes*, not
//! false-positive samples.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{err, Error, Result};
use crate::timeline::{labels_to_events, validate_event_list, Event, LabelSeries, SEIZURE};

const MODULE: &str = "metrics";

pub const SECONDS_PER_DAY: f64 = 86_400.0;

/// Unit in which a [`MetricCounts`] was tallied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountUnit {
    Samples,
    Events,
}

/// Confusion counts. Reals rather than integers because TAES produces
/// fractional credit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricCounts {
    pub tp: f64,
    pub fp: f64,
    #[serde(rename = "fn")]
    pub fn_: f64,
    pub tn: f64,
    pub unit: CountUnit,
}

impl MetricCounts {
    pub fn zero(unit: CountUnit) -> Self {
        Self {
            tp: 0.0,
            fp: 0.0,
            fn_: 0.0,
            tn: 0.0,
            unit,
        }
    }

    pub fn total(&self) -> f64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// True positive rate, with the zero-denominator convention above.
    pub fn sensitivity(&self) -> f64 {
        let denom = self.tp + self.fn_;
        if denom > 0.0 {
            self.tp / denom
        } else if self.fp == 0.0 {
            1.0
        } else {
            0.0
        }
    }

    /// Positive predictive value, with the zero-denominator convention above.
    pub fn precision(&self) -> f64 {
        let denom = self.tp + self.fp;
        if denom > 0.0 {
            self.tp / denom
        } else if self.fn_ == 0.0 {
            1.0
        } else {
            0.0
        }
    }

    pub fn f1(&self) -> f64 {
        f1_from_rates(self.sensitivity(), self.precision())
    }

    pub fn add(&mut self, other: &MetricCounts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
        self.tn += other.tn;
    }
}

pub fn f1_from_rates(sensitivity: f64, precision: f64) -> f64 {
    let s = sensitivity + precision;
    if s > 0.0 {
        2.0 * sensitivity * precision / s
    } else {
        0.0
    }
}

/// Sample-by-sample confusion counts (epoch duration of one sample).
pub fn score_duration(reference: &LabelSeries, hypothesis: &LabelSeries) -> Result<MetricCounts> {
    if reference.len() != hypothesis.len() {
        return Err(err!(
            Alignment,
            MODULE,
            "reference has {} samples but hypothesis has {}",
            reference.len(),
            hypothesis.len()
        ));
    }
    if reference.fs() != hypothesis.fs() || reference.origin() != hypothesis.origin() {
        return Err(err!(
            Alignment,
            MODULE,
            "reference (fs={}, origin={}) and hypothesis (fs={}, origin={}) are on different grids",
            reference.fs(),
            reference.origin(),
            hypothesis.fs(),
            hypothesis.origin()
        ));
    }
    // Index by (ref, hyp) pair: 0 = tn, 1 = fp, 2 = fn, 3 = tp.
    let mut tally = [0u64; 4];
    for (&r, &h) in reference.labels().iter().zip(hypothesis.labels()) {
        tally[((r << 1) | h) as usize] += 1;
    }
    Ok(MetricCounts {
        tn: tally[0] as f64,
        fp: tally[1] as f64,
        fn_: tally[2] as f64,
        tp: tally[3] as f64,
        unit: CountUnit::Samples,
    })
}

/// For every event in `a`, the total overlap with the (non-overlapping,
/// sorted) events of `b`. Linear two-pointer sweep.
fn overlap_per_event(a: &[Event], b: &[Event]) -> Vec<f64> {
    let mut out = vec![0.0; a.len()];
    let mut j0 = 0;
    for (i, ea) in a.iter().enumerate() {
        while j0 < b.len() && b[j0].end <= ea.start {
            j0 += 1;
        }
        let mut j = j0;
        let mut total = 0.0;
        while j < b.len() && b[j].start < ea.end {
            total += ea.overlap(&b[j]);
            j += 1;
        }
        out[i] = total;
    }
    out
}

fn check_inputs(reference: &[Event], hypothesis: &[Event]) -> Result<()> {
    validate_event_list(reference, MODULE)?;
    validate_event_list(hypothesis, MODULE)
}

/// Any-overlap (OVLP) episode scoring.
///
/// A reference event touched by at least one hypothesis event is one TP,
/// otherwise one FN. A hypothesis event touching no reference event is one
/// FP. `tn` is always 0.
pub fn score_episode(reference: &[Event], hypothesis: &[Event]) -> Result<MetricCounts> {
    check_inputs(reference, hypothesis)?;
    let mut c = MetricCounts::zero(CountUnit::Events);
    for ov in overlap_per_event(reference, hypothesis) {
        if ov > 0.0 {
            c.tp += 1.0;
        } else {
            c.fn_ += 1.0;
        }
    }
    c.fp = overlap_per_event(hypothesis, reference)
        .into_iter()
        .filter(|&ov| ov <= 0.0)
        .count() as f64;
    Ok(c)
}

/// Time-aligned event scoring with fractional credit.
///
/// Each reference event earns `overlap / duration` of a TP and the rest as
/// FN; each hypothesis event contributes the fraction of its duration lying
/// outside every reference event as FP.
pub fn score_taes(reference: &[Event], hypothesis: &[Event]) -> Result<MetricCounts> {
    check_inputs(reference, hypothesis)?;
    let mut c = MetricCounts::zero(CountUnit::Events);
    for (r, ov) in reference
        .iter()
        .zip(overlap_per_event(reference, hypothesis))
    {
        let frac = (ov / r.duration()).clamp(0.0, 1.0);
        c.tp += frac;
        c.fn_ += 1.0 - frac;
    }
    for (h, ov) in hypothesis
        .iter()
        .zip(overlap_per_event(hypothesis, reference))
    {
        c.fp += (1.0 - ov / h.duration()).clamp(0.0, 1.0);
    }
    Ok(c)
}

/// False positives scaled linearly to a per-day rate.
pub fn far_per_day(counts_ep: &MetricCounts, test_duration_s: f64) -> Result<f64> {
    if !(test_duration_s > 0.0) {
        return Err(err!(
            Domain,
            MODULE,
            "test duration must be > 0 s to scale a false alarm rate, got {test_duration_s}"
        ));
    }
    Ok(counts_ep.fp * SECONDS_PER_DAY / test_duration_s)
}

/// Episode- and duration-level panel plus false alarm rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub sensitivity_ep: f64,
    pub precision_ep: f64,
    pub f1_ep: f64,
    pub sensitivity_dur: f64,
    pub precision_dur: f64,
    pub f1_dur: f64,
    pub f1_de: f64,
    pub far_per_day: f64,
    pub counts_ep: MetricCounts,
    pub counts_dur: MetricCounts,
    pub test_duration_s: f64,
}

/// Version of the flat CSV layout produced by [`ScoreReport::csv_row`].
pub const REPORT_CSV_VERSION: u32 = 1;

/// Column order of the flat report CSV (version [`REPORT_CSV_VERSION`]).
pub const REPORT_CSV_COLUMNS: [&str; 17] = [
    "sensitivity_ep",
    "precision_ep",
    "f1_ep",
    "sensitivity_dur",
    "precision_dur",
    "f1_dur",
    "f1_de",
    "far_per_day",
    "ep_tp",
    "ep_fp",
    "ep_fn",
    "ep_tn",
    "dur_tp",
    "dur_fp",
    "dur_fn",
    "dur_tn",
    "test_duration_s",
];

impl ScoreReport {
    pub fn csv_row(&self) -> Vec<String> {
        [
            self.sensitivity_ep,
            self.precision_ep,
            self.f1_ep,
            self.sensitivity_dur,
            self.precision_dur,
            self.f1_dur,
            self.f1_de,
            self.far_per_day,
            self.counts_ep.tp,
            self.counts_ep.fp,
            self.counts_ep.fn_,
            self.counts_ep.tn,
            self.counts_dur.tp,
            self.counts_dur.fp,
            self.counts_dur.fn_,
            self.counts_dur.tn,
            self.test_duration_s,
        ]
        .iter()
        .map(|v| v.to_string())
        .collect()
    }

    /// `(name, value)` pairs of the seven headline rates.
    pub fn panel(&self) -> [(&'static str, f64); 7] {
        [
            ("TPR ep", self.sensitivity_ep),
            ("PPV ep", self.precision_ep),
            ("F1 ep", self.f1_ep),
            ("TPR dur", self.sensitivity_dur),
            ("PPV dur", self.precision_dur),
            ("F1 dur", self.f1_dur),
            ("F1 DE", self.f1_de),
        ]
    }
}

pub fn finalize_report(
    counts_dur: MetricCounts,
    counts_ep: MetricCounts,
    test_duration_s: f64,
) -> ScoreReport {
    let f1_ep = counts_ep.f1();
    let f1_dur = counts_dur.f1();
    let far = if test_duration_s > 0.0 {
        counts_ep.fp * SECONDS_PER_DAY / test_duration_s
    } else {
        0.0
    };
    ScoreReport {
        sensitivity_ep: counts_ep.sensitivity(),
        precision_ep: counts_ep.precision(),
        f1_ep,
        sensitivity_dur: counts_dur.sensitivity(),
        precision_dur: counts_dur.precision(),
        f1_dur,
        f1_de: (f1_ep + f1_dur) / 2.0,
        far_per_day: far,
        counts_ep,
        counts_dur,
        test_duration_s,
    }
}

/// How per-fold results are combined into one report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Score each fold, then take the unweighted mean of each rate.
    #[serde(alias = "micro")]
    FoldAverage,
    /// Append all test predictions in temporal order and score once.
    #[default]
    #[serde(alias = "macro")]
    Pooled,
}

impl FromStr for Aggregation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fold_average" | "micro" => Ok(Aggregation::FoldAverage),
            "pooled" | "macro" => Ok(Aggregation::Pooled),
            other => Err(Error::Config(format!(
                "unknown aggregation `{other}` (expected fold_average or pooled)"
            ))),
        }
    }
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggregation::FoldAverage => "fold_average",
            Aggregation::Pooled => "pooled",
        })
    }
}

/// Reference and hypothesis for one test file.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredFile {
    pub reference: LabelSeries,
    pub hypothesis: LabelSeries,
}

/// All test files of one fold, in temporal order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FoldOutput {
    pub files: Vec<ScoredFile>,
}

impl From<(LabelSeries, LabelSeries)> for FoldOutput {
    fn from((reference, hypothesis): (LabelSeries, LabelSeries)) -> Self {
        FoldOutput {
            files: vec![ScoredFile {
                reference,
                hypothesis,
            }],
        }
    }
}

/// Duration counts, episode counts and duration in seconds of one fold.
/// Events are extracted per file, so episodes never span file boundaries.
pub fn fold_counts(fold: &FoldOutput) -> Result<(MetricCounts, MetricCounts, f64)> {
    let mut dur = MetricCounts::zero(CountUnit::Samples);
    let mut ep = MetricCounts::zero(CountUnit::Events);
    let mut seconds = 0.0;
    for f in &fold.files {
        dur.add(&score_duration(&f.reference, &f.hypothesis)?);
        let r = labels_to_events(&f.reference, SEIZURE);
        let h = labels_to_events(&f.hypothesis, SEIZURE);
        ep.add(&score_episode(&r, &h)?);
        seconds += f.reference.duration_s();
    }
    Ok((dur, ep, seconds))
}

/// Combines folds into one report.
///
/// In both modes the reported counts, test duration and false alarm rate come
/// from the pooled counts; per-fold FAR scaling is degenerate for short folds.
pub fn aggregate_folds(folds: &[FoldOutput], mode: Aggregation) -> Result<ScoreReport> {
    if folds.is_empty() {
        return Err(err!(
            Domain,
            MODULE,
            "cannot aggregate an empty list of folds"
        ));
    }
    let per_fold = folds.iter().map(fold_counts).collect::<Result<Vec<_>>>()?;
    let mut dur = MetricCounts::zero(CountUnit::Samples);
    let mut ep = MetricCounts::zero(CountUnit::Events);
    let mut seconds = 0.0;
    for (d, e, s) in &per_fold {
        dur.add(d);
        ep.add(e);
        seconds += s;
    }
    let pooled = finalize_report(dur, ep, seconds);
    match mode {
        Aggregation::Pooled => Ok(pooled),
        Aggregation::FoldAverage => {
            let reports: Vec<ScoreReport> = per_fold
                .into_iter()
                .map(|(d, e, s)| finalize_report(d, e, s))
                .collect();
            Ok(average_rates(&reports, pooled))
        }
    }
}

/// Replaces the rates of `base` with the unweighted means over `reports`.
/// Counts, duration and FAR of `base` are kept.
pub fn average_rates(reports: &[ScoreReport], base: ScoreReport) -> ScoreReport {
    let n = reports.len() as f64;
    let mean = |f: fn(&ScoreReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
    let f1_ep = mean(|r| r.f1_ep);
    let f1_dur = mean(|r| r.f1_dur);
    ScoreReport {
        sensitivity_ep: mean(|r| r.sensitivity_ep),
        precision_ep: mean(|r| r.precision_ep),
        f1_ep,
        sensitivity_dur: mean(|r| r.sensitivity_dur),
        precision_dur: mean(|r| r.precision_dur),
        f1_dur,
        f1_de: (f1_ep + f1_dur) / 2.0,
        ..base
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timeline::events_to_labels;

    fn ev(s: f64, e: f64) -> Event {
        Event::seizure(s, e).unwrap()
    }

    fn series(l: &[u8]) -> LabelSeries {
        LabelSeries::new(l.to_vec(), 1.0, 0.0).unwrap()
    }

    fn counts(tp: f64, fp: f64, fn_: f64) -> MetricCounts {
        MetricCounts {
            tp,
            fp,
            fn_,
            tn: 0.0,
            unit: CountUnit::Events,
        }
    }

    #[test]
    fn duration_counts_direct() {
        let c = score_duration(&series(&[1, 1, 0, 0]), &series(&[1, 0, 1, 0])).unwrap();
        assert_eq!((c.tp, c.fn_, c.fp, c.tn), (1.0, 1.0, 1.0, 1.0));
        assert_eq!(c.sensitivity(), 0.5);
        assert_eq!(c.precision(), 0.5);
        assert_eq!(c.f1(), 0.5);
    }

    #[test]
    fn duration_identity_has_no_errors() {
        let s = series(&[0, 1, 1, 0, 1, 0, 0, 1]);
        let c = score_duration(&s, &s).unwrap();
        assert_eq!((c.fp, c.fn_), (0.0, 0.0));
    }

    #[test]
    fn duration_misalignment() {
        let e = score_duration(&series(&[1, 0]), &series(&[1])).unwrap_err();
        assert!(matches!(e, Error::Alignment { .. }));
        let other_fs = LabelSeries::new(vec![1, 0], 2.0, 0.0).unwrap();
        assert!(score_duration(&series(&[1, 0]), &other_fs).is_err());
    }

    #[test]
    fn episode_eight_of_ten() {
        let reference: Vec<Event> = (0..10)
            .map(|i| ev(i as f64 * 100.0, i as f64 * 100.0 + 30.0))
            .collect();
        let hypothesis: Vec<Event> = reference[..8]
            .iter()
            .map(|r| ev(r.start + 5.0, r.end + 5.0))
            .collect();
        let c = score_episode(&reference, &hypothesis).unwrap();
        assert_eq!((c.tp, c.fn_, c.fp), (8.0, 2.0, 0.0));
        assert_eq!(c.sensitivity(), 0.8);
    }

    #[test]
    fn episode_any_overlap_counts() {
        let c = score_episode(&[ev(10.0, 20.0)], &[ev(19.0, 25.0)]).unwrap();
        assert_eq!((c.tp, c.fn_, c.fp), (1.0, 0.0, 0.0));
        // Adjacent is not overlapping.
        let c = score_episode(&[ev(10.0, 20.0)], &[ev(20.0, 25.0)]).unwrap();
        assert_eq!((c.tp, c.fn_, c.fp), (0.0, 1.0, 1.0));
    }

    #[test]
    fn episode_mixed() {
        let c = score_episode(
            &[ev(10.0, 20.0), ev(40.0, 50.0)],
            &[ev(12.0, 18.0), ev(25.0, 30.0)],
        )
        .unwrap();
        assert_eq!((c.tp, c.fn_, c.fp, c.tn), (1.0, 1.0, 1.0, 0.0));
    }

    #[test]
    fn episode_one_tp_per_reference() {
        let c = score_episode(
            &[ev(0.0, 100.0)],
            &[ev(1.0, 2.0), ev(3.0, 4.0), ev(5.0, 6.0)],
        )
        .unwrap();
        assert_eq!((c.tp, c.fn_, c.fp), (1.0, 0.0, 0.0));
    }

    #[test]
    fn episode_rejects_unsorted() {
        let e = score_episode(&[ev(10.0, 20.0), ev(0.0, 5.0)], &[]).unwrap_err();
        assert!(matches!(e, Error::Validation { .. }));
        assert!(score_taes(&[], &[ev(0.0, 5.0), ev(4.0, 6.0)]).is_err());
    }

    #[test]
    fn taes_examples() {
        let c = score_taes(&[ev(0.0, 10.0)], &[ev(0.0, 10.0)]).unwrap();
        assert_eq!((c.tp, c.fn_, c.fp), (1.0, 0.0, 0.0));
        let c = score_taes(&[ev(0.0, 10.0)], &[ev(0.0, 5.0)]).unwrap();
        assert_eq!((c.tp, c.fn_, c.fp), (0.5, 0.5, 0.0));
        let c = score_taes(&[ev(0.0, 10.0)], &[ev(5.0, 15.0)]).unwrap();
        assert_eq!((c.tp, c.fn_, c.fp), (0.5, 0.5, 0.5));
    }

    #[test]
    fn far_examples() {
        assert_eq!(far_per_day(&counts(0.0, 2.0, 0.0), 43_200.0).unwrap(), 4.0);
        assert_eq!(far_per_day(&counts(0.0, 0.0, 0.0), 43_200.0).unwrap(), 0.0);
        assert_eq!(far_per_day(&counts(0.0, 7.0, 0.0), 604_800.0).unwrap(), 1.0);
        assert!(matches!(
            far_per_day(&counts(0.0, 1.0, 0.0), 0.0),
            Err(Error::Domain { .. })
        ));
        assert!(far_per_day(&counts(0.0, 1.0, 0.0), -5.0).is_err());
    }

    #[test]
    fn finalize_arithmetic() {
        let dur = MetricCounts {
            unit: CountUnit::Samples,
            ..counts(1.0, 1.0, 1.0)
        };
        let r = finalize_report(dur, counts(1.0, 0.0, 0.0), 3600.0);
        assert_eq!(r.f1_dur, 0.5);
        assert_eq!(r.f1_ep, 1.0);
        assert_eq!(r.f1_de, 0.75);
    }

    #[test]
    fn zero_denominator_conventions() {
        // Perfect negative.
        let r = finalize_report(
            MetricCounts::zero(CountUnit::Samples),
            MetricCounts::zero(CountUnit::Events),
            10.0,
        );
        assert_eq!((r.sensitivity_ep, r.precision_ep, r.f1_ep), (1.0, 1.0, 1.0));
        assert_eq!(r.far_per_day, 0.0);
        // Only false positives.
        let c = counts(0.0, 3.0, 0.0);
        assert_eq!(c.sensitivity(), 0.0);
        assert_eq!(c.precision(), 0.0);
        assert_eq!(c.f1(), 0.0);
        // Only misses.
        let c = counts(0.0, 0.0, 2.0);
        assert_eq!(c.sensitivity(), 0.0);
        assert_eq!(c.precision(), 0.0);
    }

    fn fold_with(tp: usize, fp: usize) -> FoldOutput {
        // Duration-level fold: tp samples hit, fp samples spuriously flagged.
        let n = tp + fp + 10;
        let mut r = vec![0u8; n];
        let mut h = vec![0u8; n];
        r[..tp].fill(1);
        h[..tp + fp].fill(1);
        (series(&r), series(&h)).into()
    }

    #[test]
    fn aggregation_modes_diverge() {
        let folds = [fold_with(90, 10), fold_with(1, 9)];
        let avg = aggregate_folds(&folds, Aggregation::FoldAverage).unwrap();
        let pooled = aggregate_folds(&folds, Aggregation::Pooled).unwrap();
        assert!((avg.precision_dur - 0.5).abs() < 1e-12);
        assert!((pooled.precision_dur - 91.0 / 110.0).abs() < 1e-12);
        assert_eq!(avg.far_per_day, pooled.far_per_day);
        assert_eq!(avg.counts_dur, pooled.counts_dur);
    }

    #[test]
    fn aggregation_single_and_identical_folds_agree() {
        let one = [fold_with(5, 3)];
        assert_eq!(
            aggregate_folds(&one, Aggregation::FoldAverage).unwrap(),
            aggregate_folds(&one, Aggregation::Pooled).unwrap()
        );
        let ten: Vec<_> = (0..10).map(|_| fold_with(7, 2)).collect();
        let a = aggregate_folds(&ten, Aggregation::FoldAverage).unwrap();
        let p = aggregate_folds(&ten, Aggregation::Pooled).unwrap();
        for ((_, x), (_, y)) in a.panel().iter().zip(p.panel().iter()) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!(aggregate_folds(&[], Aggregation::Pooled).is_err());
    }

    #[test]
    fn pooled_events_do_not_merge_across_files() {
        // Reference event ends exactly where the next file's event begins.
        let a = events_to_labels(&[ev(5.0, 10.0)], 1.0, 10.0, 0.0).unwrap();
        let b = events_to_labels(&[ev(0.0, 3.0)], 1.0, 10.0, 0.0).unwrap();
        let fold = FoldOutput {
            files: vec![
                ScoredFile {
                    reference: a.clone(),
                    hypothesis: a,
                },
                ScoredFile {
                    reference: b.clone(),
                    hypothesis: b,
                },
            ],
        };
        let (_, ep, secs) = fold_counts(&fold).unwrap();
        assert_eq!(ep.tp, 2.0);
        assert_eq!(secs, 20.0);
    }

    #[test]
    fn aggregation_aliases_parse() {
        assert_eq!(
            "micro".parse::<Aggregation>().unwrap(),
            Aggregation::FoldAverage
        );
        assert_eq!("macro".parse::<Aggregation>().unwrap(), Aggregation::Pooled);
        assert!("mean".parse::<Aggregation>().is_err());
    }

    #[test]
    fn report_json_field_names() {
        let r = finalize_report(
            MetricCounts::zero(CountUnit::Samples),
            counts(1.0, 1.0, 0.0),
            100.0,
        );
        let v = serde_json::to_value(&r).unwrap();
        for k in [
            "sensitivity_ep",
            "precision_ep",
            "f1_ep",
            "sensitivity_dur",
            "precision_dur",
            "f1_dur",
            "f1_de",
            "far_per_day",
            "counts_ep",
            "counts_dur",
            "test_duration_s",
        ] {
            assert!(v.get(k).is_some(), "missing {k}");
        }
        assert!(v["counts_ep"].get("fn").is_some());
        assert_eq!(r.csv_row().len(), REPORT_CSV_COLUMNS.len());
    }
}
