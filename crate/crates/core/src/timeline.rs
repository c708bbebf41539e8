//! Sample-level label series and event-level episodes.
//!
//! All intervals are half-open `[start, end)` in seconds. A [`LabelSeries`]
//! stores one binary label per sample; an [`Event`] is a maximal run of one
//! label expressed in real time so that series recorded at different rates
//! are only ever compared after explicit resampling.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{err, Error, Result};

const MODULE: &str = "timeline";

/// Sample label meaning "seizure".
pub const SEIZURE: u8 = 1;
/// Sample label meaning "background".
pub const BACKGROUND: u8 = 0;

/// Fraction of a sample period tolerated when snapping event boundaries onto
/// the sample grid. Sub-sample boundaries are not representable.
const SAMPLE_TOL: f64 = 1e-6;

/// Per-sample binary annotation of one recording (or one file of it).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelSeries {
    labels: Vec<u8>,
    fs: f64,
    origin: f64,
}

impl LabelSeries {
    pub fn new(labels: Vec<u8>, fs: f64, origin: f64) -> Result<Self> {
        if !(fs.is_finite() && fs > 0.0) {
            return Err(err!(
                Validation,
                MODULE,
                "sampling frequency must be > 0, got {fs}"
            ));
        }
        if !origin.is_finite() {
            return Err(err!(Validation, MODULE, "origin must be finite"));
        }
        if let Some(pos) = labels.iter().position(|&l| l > 1) {
            return Err(err!(
                Validation,
                MODULE,
                "label at sample {pos} is {}, only 0 and 1 are allowed",
                labels[pos]
            ));
        }
        Ok(Self { labels, fs, origin })
    }

    /// An all-background series of `n` samples.
    pub fn zeros(n: usize, fs: f64, origin: f64) -> Result<Self> {
        Self::new(vec![BACKGROUND; n], fs, origin)
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn into_labels(self) -> Vec<u8> {
        self.labels
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.labels.len() as f64 / self.fs
    }

    /// Time in seconds of sample `i`.
    pub fn time_of(&self, i: usize) -> f64 {
        self.origin + i as f64 / self.fs
    }

    pub fn count_positive(&self) -> usize {
        self.labels.iter().filter(|&&l| l == SEIZURE).count()
    }
}

/// One episode of a single class, `[start, end)` in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub start: f64,
    pub end: f64,
    pub label: u8,
}

impl Event {
    pub fn new(start: f64, end: f64, label: u8) -> Result<Self> {
        if !(start.is_finite() && end.is_finite()) {
            return Err(err!(Validation, MODULE, "event bounds must be finite"));
        }
        if start >= end {
            return Err(err!(
                Validation,
                MODULE,
                "event must have start < end, got [{start}, {end})"
            ));
        }
        if label > 1 {
            return Err(err!(
                Validation,
                MODULE,
                "event label must be 0 or 1, got {label}"
            ));
        }
        Ok(Self { start, end, label })
    }

    /// Seizure event shorthand.
    pub fn seizure(start: f64, end: f64) -> Result<Self> {
        Self::new(start, end, SEIZURE)
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }

    /// Length of the intersection with `other` (0 when disjoint or adjacent).
    pub fn overlap(&self, other: &Event) -> f64 {
        (self.end.min(other.end) - self.start.max(other.start)).max(0.0)
    }

    pub fn shifted(&self, dt: f64) -> Event {
        Event {
            start: self.start + dt,
            end: self.end + dt,
            label: self.label,
        }
    }
}

/// Checks that `events` are sorted by start time and pairwise non-overlapping.
pub fn validate_event_list(events: &[Event], module: &'static str) -> Result<()> {
    for (i, e) in events.iter().enumerate() {
        if !(e.start < e.end) {
            return Err(Error::Validation {
                module,
                msg: format!("event {i} has start >= end: [{}, {})", e.start, e.end),
            });
        }
    }
    for (i, w) in events.windows(2).enumerate() {
        if w[1].start < w[0].end {
            return Err(Error::Validation {
                module,
                msg: format!(
                    "events {i} and {} are unsorted or overlapping: [{}, {}) then [{}, {})",
                    i + 1,
                    w[0].start,
                    w[0].end,
                    w[1].start,
                    w[1].end
                ),
            });
        }
    }
    Ok(())
}

/// Provenance and ordering metadata of one recording file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordingMeta {
    pub subject_id: String,
    pub file_id: String,
    pub duration_s: f64,
    pub n_channels: usize,
    pub fs: f64,
    /// Temporal order of this file within its subject.
    pub seq_index: usize,
}

impl RecordingMeta {
    pub fn n_samples(&self) -> usize {
        (self.duration_s * self.fs).round() as usize
    }
}

/// Checks that `seq_index` values are unique and contiguous (0..n) per subject.
pub fn validate_seq_indices(metas: &[&RecordingMeta]) -> Result<()> {
    let mut by_subject: std::collections::BTreeMap<&str, Vec<usize>> = Default::default();
    for m in metas {
        if !(m.duration_s > 0.0) {
            return Err(err!(
                Validation,
                MODULE,
                "recording {} has non-positive duration {}",
                m.file_id,
                m.duration_s
            ));
        }
        by_subject
            .entry(&m.subject_id)
            .or_default()
            .push(m.seq_index);
    }
    for (subject, mut idx) in by_subject {
        idx.sort_unstable();
        if idx.iter().enumerate().any(|(i, &s)| i != s) {
            return Err(err!(
                Validation,
                MODULE,
                "subject {subject}: seq_index values {idx:?} are not unique and contiguous from 0"
            ));
        }
    }
    Ok(())
}

/// Maximal runs of `target` in `series` as events, in time order.
pub fn labels_to_events(series: &LabelSeries, target: u8) -> Vec<Event> {
    let mut events = Vec::new();
    let mut run_start: Option<usize> = None;
    for (i, &l) in series.labels.iter().enumerate() {
        match (l == target, run_start) {
            (true, None) => run_start = Some(i),
            (false, Some(s)) => {
                events.push(run_event(series, s, i, target));
                run_start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = run_start {
        events.push(run_event(series, s, series.len(), target));
    }
    events
}

fn run_event(series: &LabelSeries, first: usize, end_exclusive: usize, label: u8) -> Event {
    Event {
        start: series.time_of(first),
        end: series.time_of(end_exclusive),
        label,
    }
}

/// Index of the first sample whose timestamp is `>= t`.
fn first_sample_at_or_after(t: f64, fs: f64, origin: f64) -> f64 {
    ((t - origin) * fs - SAMPLE_TOL).ceil()
}

/// Grid index of the first sample at or after `t` seconds from the start.
pub fn sample_index(t: f64, fs: f64) -> usize {
    first_sample_at_or_after(t, fs, 0.0).max(0.0) as usize
}

/// Rasterizes `events` onto a sample grid: sample `i` is 1 iff its timestamp
/// `origin + i/fs` lies in some event.
pub fn events_to_labels(
    events: &[Event],
    fs: f64,
    duration_s: f64,
    origin: f64,
) -> Result<LabelSeries> {
    if !(duration_s >= 0.0) {
        return Err(err!(
            Validation,
            MODULE,
            "duration must be >= 0, got {duration_s}"
        ));
    }
    let n = (duration_s * fs).round() as usize;
    let mut labels = vec![BACKGROUND; n];
    let span_end = origin + duration_s;
    let tol = SAMPLE_TOL / fs;
    for e in events {
        if e.start < origin - tol || e.end > span_end + tol {
            return Err(err!(
                Boundary,
                MODULE,
                "event [{}, {}) lies outside the recording span [{origin}, {span_end})",
                e.start,
                e.end
            ));
        }
        let lo = first_sample_at_or_after(e.start, fs, origin).max(0.0) as usize;
        let hi = (first_sample_at_or_after(e.end, fs, origin).max(0.0) as usize).min(n);
        if lo < hi {
            labels[lo..hi].fill(e.label);
        }
    }
    LabelSeries::new(labels, fs, origin)
}

/// One row of the annotation CSV: `subject,file,start_s,end_s,label`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRow {
    pub subject: String,
    pub file: String,
    pub start_s: f64,
    pub end_s: f64,
    pub label: u8,
}

impl AnnotationRow {
    pub fn event(&self) -> Result<Event> {
        Event::new(self.start_s, self.end_s, self.label)
    }
}

pub const ANNOTATION_HEADER: [&str; 5] = ["subject", "file", "start_s", "end_s", "label"];

pub fn read_annotations<R: Read>(reader: R) -> Result<Vec<AnnotationRow>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ANNOTATION_HEADER {
        return Err(err!(
            Schema,
            MODULE,
            "annotation header must be `{}`, got `{}`",
            ANNOTATION_HEADER.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        ));
    }
    let mut rows = Vec::new();
    for row in rdr.deserialize() {
        let row: AnnotationRow = row?;
        row.event()?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn read_annotations_file(path: &Path) -> Result<Vec<AnnotationRow>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_annotations(std::io::BufReader::new(f))
}

pub fn write_annotations<W: Write>(writer: W, rows: &[AnnotationRow]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    // An empty file still needs its header.
    if rows.is_empty() {
        wtr.write_record(ANNOTATION_HEADER)?;
    }
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush().map_err(|e| Error::io("<annotations>", e))?;
    Ok(())
}

pub fn write_annotations_file(path: &Path, rows: &[AnnotationRow]) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_annotations(std::io::BufWriter::new(f), rows)
}
