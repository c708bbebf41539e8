//! Data arrangements (which stretches of signal form a training/testing
//! "file") and cross-validation fold plans over those files.
//!
//! A subject's recordings are treated as one continuous timeline in
//! `seq_index` order. All arithmetic is in whole samples; an arranged file is
//! a list of [`Segment`]s pointing back into the source recordings.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{err, Error, Result};
use crate::recording::RecordingSet;
use crate::seed::{hash_str, mix};
use crate::timeline::{sample_index, Event, RecordingMeta};

const MODULE: &str = "partition";

/// Minimum distance between Fact-k background blocks and any seizure.
pub const FACT_GUARD_S: f64 = 60.0;

/// A contiguous sample range `[start, end)` of one source recording.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub recording: usize,
    pub start: usize,
    pub end: usize,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataFile {
    pub meta: RecordingMeta,
    /// Seizures in seconds from the start of this file.
    pub events: Vec<Event>,
    /// Where the samples come from, concatenated in order.
    pub segments: Vec<Segment>,
}

impl DataFile {
    pub fn n_samples(&self) -> usize {
        self.segments.iter().map(Segment::len).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Arrangement {
    /// One file per seizure with `k` times its length of background.
    Fact { k: u32 },
    /// Seizure-to-seizure files.
    Stos,
    /// Fixed-length windows after a longer first file.
    Window {
        hours: f64,
        first_min_h: f64,
        first_min_seizures: usize,
    },
}

impl Arrangement {
    pub fn window(hours: f64) -> Self {
        Arrangement::Window {
            hours,
            first_min_h: 5.0,
            first_min_seizures: 1,
        }
    }

    fn tag(&self) -> String {
        match self {
            Arrangement::Fact { k } => format!("fact{k}"),
            Arrangement::Stos => "stos".into(),
            Arrangement::Window { hours, .. } => format!("win{hours}h"),
        }
    }

    /// Whether every produced file holds exactly one seizure.
    pub fn one_seizure_per_file(&self) -> bool {
        !matches!(self, Arrangement::Window { .. })
    }
}

impl fmt::Display for Arrangement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arrangement::Fact { k } => write!(f, "Fact{k}"),
            Arrangement::Stos => write!(f, "StoS"),
            Arrangement::Window { hours, .. } => write!(f, "Win{hours}h"),
        }
    }
}

impl FromStr for Arrangement {
    type Err = Error;

    /// Accepts `Fact1`, `Fact10`, `StoS`, `Win1h`, `Win4h` (any case).
    fn from_str(s: &str) -> Result<Self> {
        let l = s.trim().to_ascii_lowercase();
        let bad = || {
            err!(
                Validation,
                MODULE,
                "unknown arrangement '{s}' (expected FactK, StoS or WinXh)"
            )
        };
        if l == "stos" {
            return Ok(Arrangement::Stos);
        }
        if let Some(k) = l.strip_prefix("fact") {
            let k: u32 = k.parse().map_err(|_| bad())?;
            if k == 0 {
                return Err(bad());
            }
            return Ok(Arrangement::Fact { k });
        }
        if let Some(h) = l.strip_prefix("win").and_then(|r| r.strip_suffix('h')) {
            let h: f64 = h.parse().map_err(|_| bad())?;
            if !(h > 0.0 && h.is_finite()) {
                return Err(bad());
            }
            return Ok(Arrangement::window(h));
        }
        Err(bad())
    }
}

/// One subject's recordings laid end to end.
struct Timeline<'a> {
    set: &'a RecordingSet,
    subject: String,
    recordings: Vec<usize>,
    /// Global start sample of each recording in `recordings`.
    offsets: Vec<usize>,
    total: usize,
    /// Seizures as global sample ranges, in time order.
    seizures: Vec<(usize, usize)>,
}

impl<'a> Timeline<'a> {
    fn new(set: &'a RecordingSet, subject: &str) -> Self {
        let recordings = set.subject_recordings(subject);
        let mut offsets = Vec::with_capacity(recordings.len());
        let mut seizures = Vec::new();
        let mut t = 0;
        for &r in &recordings {
            offsets.push(t);
            let rec = &set.recordings[r];
            let n = rec.meta.n_samples();
            for e in &rec.events {
                let s = sample_index(e.start, set.fs).min(n);
                let en = sample_index(e.end, set.fs).min(n);
                if en > s {
                    seizures.push((t + s, t + en));
                }
            }
            t += n;
        }
        Self {
            set,
            subject: subject.to_string(),
            recordings,
            offsets,
            total: t,
            seizures,
        }
    }

    fn fs(&self) -> f64 {
        self.set.fs
    }

    /// Splits the global range `[a, b)` at recording boundaries.
    fn segments(&self, a: usize, b: usize) -> Vec<Segment> {
        let mut out = Vec::new();
        for (i, &r) in self.recordings.iter().enumerate() {
            let lo = self.offsets[i];
            let hi = lo + self.set.recordings[r].meta.n_samples();
            let s = a.max(lo);
            let e = b.min(hi);
            if s < e {
                out.push(Segment {
                    recording: r,
                    start: s - lo,
                    end: e - lo,
                });
            }
        }
        out
    }

    /// Seizures intersecting `[a, b)`, clipped and shifted to file time.
    fn events_in(&self, a: usize, b: usize) -> Result<Vec<Event>> {
        let fs = self.fs();
        self.seizures
            .iter()
            .filter(|&&(s, e)| e > a && s < b)
            .map(|&(s, e)| Event::seizure((s.max(a) - a) as f64 / fs, (e.min(b) - a) as f64 / fs))
            .collect()
    }

    fn file(&self, tag: &str, seq: usize, segments: Vec<Segment>, events: Vec<Event>) -> DataFile {
        let n: usize = segments.iter().map(Segment::len).sum();
        DataFile {
            meta: RecordingMeta {
                subject_id: self.subject.clone(),
                file_id: format!("{}_{}_{:03}", self.subject, tag, seq + 1),
                duration_s: n as f64 / self.fs(),
                n_channels: self.set.channels.len(),
                fs: self.fs(),
                seq_index: seq,
            },
            events,
            segments,
        }
    }

    fn range_file(&self, tag: &str, seq: usize, a: usize, b: usize) -> Result<DataFile> {
        Ok(self.file(tag, seq, self.segments(a, b), self.events_in(a, b)?))
    }
}

fn subject_or_error(set: &RecordingSet) -> Result<Vec<String>> {
    set.validate()?;
    let subjects = set.subjects();
    if subjects.is_empty() {
        return Err(err!(Domain, MODULE, "recording set is empty"));
    }
    Ok(subjects)
}

/// Free sample ranges that never cross a recording boundary.
fn background_pool(tl: &Timeline, guard: usize) -> Vec<(usize, usize)> {
    let mut pool = Vec::new();
    for (i, &r) in tl.recordings.iter().enumerate() {
        let lo = tl.offsets[i];
        let hi = lo + tl.set.recordings[r].meta.n_samples();
        let mut cur = lo;
        for &(s, e) in &tl.seizures {
            let bs = s.saturating_sub(guard);
            let be = e + guard;
            if be <= cur || bs >= hi {
                continue;
            }
            if bs > cur {
                pool.push((cur, bs.min(hi)));
            }
            cur = cur.max(be);
        }
        if cur < hi {
            pool.push((cur, hi));
        }
    }
    pool
}

/// Draws a block of `m` samples uniformly among all placements that fit in
/// the pool, and removes it from the pool.
fn take_block<R: Rng>(pool: &mut Vec<(usize, usize)>, m: usize, rng: &mut R) -> Option<usize> {
    let fits: u64 = pool
        .iter()
        .map(|&(a, b)| (b - a).checked_sub(m).map_or(0, |d| d as u64 + 1))
        .sum();
    if fits == 0 {
        return None;
    }
    let mut r = rng.random_range(0..fits);
    for i in 0..pool.len() {
        let (a, b) = pool[i];
        let Some(d) = (b - a).checked_sub(m) else {
            continue;
        };
        let slots = d as u64 + 1;
        if r < slots {
            let start = a + r as usize;
            let end = start + m;
            let mut replacement = Vec::new();
            if start > a {
                replacement.push((a, start));
            }
            if end < b {
                replacement.push((end, b));
            }
            pool.splice(i..=i, replacement);
            return Some(start);
        }
        r -= slots;
    }
    None
}

/// One file per seizure: a background block of `floor(k*L/2)` samples, the
/// seizure (`L` samples), and a background block of the remaining
/// `k*L - floor(k*L/2)` samples. Blocks are contiguous, drawn anywhere in
/// the subject's seizure-free signal at least [`FACT_GUARD_S`] from any
/// seizure, never cross a recording boundary, and never overlap each other.
pub fn build_fact_subset(
    set: &RecordingSet,
    factor_k: u32,
    rng_seed: u64,
) -> Result<Vec<DataFile>> {
    if factor_k == 0 {
        return Err(err!(
            Validation,
            MODULE,
            "factor k must be a positive integer"
        ));
    }
    let mut out = Vec::new();
    for subject in subject_or_error(set)? {
        let tl = Timeline::new(set, &subject);
        if tl.seizures.is_empty() {
            return Err(err!(Domain, MODULE, "subject {subject} has no seizures"));
        }
        let guard = (FACT_GUARD_S * tl.fs()).round() as usize;
        let mut pool = background_pool(&tl, guard);
        let mut rng =
            ChaCha8Rng::seed_from_u64(mix(&[rng_seed, hash_str(&subject), u64::from(factor_k)]));
        let tag = Arrangement::Fact { k: factor_k }.tag();
        for (j, &(s, e)) in tl.seizures.iter().enumerate() {
            let len = e - s;
            let context = factor_k as usize * len;
            let left = context / 2;
            let right = context - left;
            let mut draw = |m: usize| {
                take_block(&mut pool, m, &mut rng).ok_or_else(|| {
                    err!(
                        Capacity,
                        MODULE,
                        "subject {subject}: not enough seizure-free signal for Fact{factor_k} around seizure {} ({} s of background needed in one block)",
                        j + 1,
                        m as f64 / tl.fs()
                    )
                })
            };
            let a = draw(left)?;
            let b = draw(right)?;
            let mut segments = tl.segments(a, a + left);
            segments.extend(tl.segments(s, e));
            segments.extend(tl.segments(b, b + right));
            segments.retain(|g| !g.is_empty());
            let fs = tl.fs();
            let event = Event::seizure(left as f64 / fs, (left + len) as f64 / fs)?;
            out.push(tl.file(&tag, j, segments, vec![event]));
        }
    }
    Ok(out)
}

/// File `j` runs from the end of seizure `j-1` to the end of seizure `j`.
/// The stretch after the last seizure is appended to the last file so the
/// files cover the whole timeline.
pub fn build_seizure_to_seizure(set: &RecordingSet) -> Result<Vec<DataFile>> {
    let mut out = Vec::new();
    let tag = Arrangement::Stos.tag();
    for subject in subject_or_error(set)? {
        let tl = Timeline::new(set, &subject);
        if tl.seizures.is_empty() {
            return Err(err!(Domain, MODULE, "subject {subject} has no seizures"));
        }
        let n = tl.seizures.len();
        let mut a = 0;
        for (j, &(_, e)) in tl.seizures.iter().enumerate() {
            let b = if j + 1 == n { tl.total } else { e };
            out.push(tl.range_file(&tag, j, a, b)?);
            a = b;
        }
    }
    Ok(out)
}

/// The first file spans `first_min_h` plus as many whole windows as needed
/// to contain `first_min_seizures` complete seizures; the rest are
/// `window_h` slices, with a shorter final file kept.
pub fn build_fixed_windows(
    set: &RecordingSet,
    window_h: f64,
    first_min_h: f64,
    first_min_seizures: usize,
) -> Result<Vec<DataFile>> {
    if !(window_h > 0.0 && window_h.is_finite()) {
        return Err(err!(
            Validation,
            MODULE,
            "window_h must be positive, got {window_h}"
        ));
    }
    if !(first_min_h >= 0.0) {
        return Err(err!(
            Validation,
            MODULE,
            "first_min_h must be >= 0, got {first_min_h}"
        ));
    }
    let tag = Arrangement::Window {
        hours: window_h,
        first_min_h,
        first_min_seizures,
    }
    .tag();
    let mut out = Vec::new();
    for subject in subject_or_error(set)? {
        let tl = Timeline::new(set, &subject);
        let fs = tl.fs();
        let w = ((window_h * 3600.0 * fs).round() as usize).max(1);
        let min_first = (first_min_h * 3600.0 * fs).round() as usize;
        if tl.total < min_first {
            return Err(err!(
                Capacity,
                MODULE,
                "subject {subject}: {} h of data is shorter than the {first_min_h} h first file",
                tl.total as f64 / fs / 3600.0
            ));
        }
        let needed_end = if first_min_seizures == 0 {
            0
        } else {
            match tl.seizures.get(first_min_seizures - 1) {
                Some(&(_, e)) => e,
                None => {
                    return Err(err!(
                        Capacity,
                        MODULE,
                        "subject {subject}: first file needs {first_min_seizures} seizures but only {} exist",
                        tl.seizures.len()
                    ))
                }
            }
        };
        let extra = needed_end.saturating_sub(min_first).div_ceil(w);
        let first_end = (min_first + extra * w).min(tl.total);
        let mut bounds = vec![0, first_end];
        while *bounds.last().unwrap() < tl.total {
            let next = (bounds.last().unwrap() + w).min(tl.total);
            bounds.push(next);
        }
        // A zero-length first file only happens when first_min_h is 0 and no seizure is required.
        if bounds[1] == 0 {
            bounds.remove(0);
        }
        for (j, pair) in bounds.windows(2).enumerate() {
            out.push(tl.range_file(&tag, j, pair[0], pair[1])?);
        }
    }
    Ok(out)
}

pub fn arrange(
    set: &RecordingSet,
    arrangement: &Arrangement,
    rng_seed: u64,
) -> Result<Vec<DataFile>> {
    match *arrangement {
        Arrangement::Fact { k } => build_fact_subset(set, k, rng_seed),
        Arrangement::Stos => build_seizure_to_seizure(set),
        Arrangement::Window {
            hours,
            first_min_h,
            first_min_seizures,
        } => build_fixed_windows(set, hours, first_min_h, first_min_seizures),
    }
}

/// Files of one subject, in `seq_index` order.
pub fn subject_files<'a>(files: &'a [DataFile], subject: &str) -> Vec<&'a DataFile> {
    let mut v: Vec<&DataFile> = files
        .iter()
        .filter(|f| f.meta.subject_id == subject)
        .collect();
    v.sort_by_key(|f| f.meta.seq_index);
    v
}

/// Distinct subject ids in sorted order.
pub fn file_subjects(files: &[DataFile]) -> Vec<String> {
    let mut s: Vec<String> = files.iter().map(|f| f.meta.subject_id.clone()).collect();
    s.sort();
    s.dedup();
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    L1O,
    TSCV,
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1o" | "loo" => Ok(Scheme::L1O),
            "tscv" => Ok(Scheme::TSCV),
            _ => Err(err!(
                Validation,
                MODULE,
                "unknown scheme '{s}' (expected L1O or TSCV)"
            )),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::L1O => "L1O",
            Scheme::TSCV => "TSCV",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    Personalized,
    Generalized,
}

impl FromStr for Scope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "personalized" | "personal" => Ok(Scope::Personalized),
            "generalized" | "general" => Ok(Scope::Generalized),
            _ => Err(err!(Validation, MODULE, "unknown scope '{s}'")),
        }
    }
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scope::Personalized => "personalized",
            Scope::Generalized => "generalized",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<String>,
    pub test: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub scheme: Scheme,
    pub scope: Scope,
    /// The subject for a personalized plan.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject: Option<String>,
    pub folds: Vec<Fold>,
}

fn ids(files: &[&DataFile]) -> Vec<String> {
    files.iter().map(|f| f.meta.file_id.clone()).collect()
}

fn single_subject(files: &[DataFile]) -> Option<String> {
    let s = file_subjects(files);
    (s.len() == 1).then(|| s[0].clone())
}

/// Leave-one-out over files: fold `i` tests file `i` and trains on all
/// others, earlier and later.
pub fn make_folds_l1o(files: &[DataFile]) -> Result<FoldPlan> {
    if let Some(f) = files.iter().find(|f| f.events.len() != 1) {
        return Err(err!(
            Precondition,
            MODULE,
            "leave-one-out needs one seizure per file; {} has {}",
            f.meta.file_id,
            f.events.len()
        ));
    }
    if files.len() < 2 {
        return Err(err!(
            Domain,
            MODULE,
            "leave-one-out needs at least 2 files, got {}",
            files.len()
        ));
    }
    let all: Vec<&DataFile> = files.iter().collect();
    let folds = (0..files.len())
        .map(|i| Fold {
            train: ids(&all
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, f)| *f)
                .collect::<Vec<_>>()),
            test: vec![files[i].meta.file_id.clone()],
        })
        .collect();
    Ok(FoldPlan {
        scheme: Scheme::L1O,
        scope: Scope::Personalized,
        subject: single_subject(files),
        folds,
    })
}

/// Time-series CV: fold `i` trains on files `1..=i` and tests file `i+1`.
/// Files are taken in `seq_index` order.
pub fn make_folds_tscv(files: &[DataFile]) -> Result<FoldPlan> {
    if files.len() < 2 {
        return Err(err!(
            Domain,
            MODULE,
            "time-series CV needs at least 2 files, got {}",
            files.len()
        ));
    }
    if file_subjects(files).len() > 1 {
        return Err(err!(
            Precondition,
            MODULE,
            "time-series CV runs on one subject's files at a time"
        ));
    }
    let mut ordered: Vec<&DataFile> = files.iter().collect();
    ordered.sort_by_key(|f| f.meta.seq_index);
    let folds = (1..ordered.len())
        .map(|i| Fold {
            train: ids(&ordered[..i]),
            test: vec![ordered[i].meta.file_id.clone()],
        })
        .collect();
    Ok(FoldPlan {
        scheme: Scheme::TSCV,
        scope: Scope::Personalized,
        subject: single_subject(files),
        folds,
    })
}

/// Leave-one-subject-out: one fold per subject, testing all of that
/// subject's files and training on every other subject's files.
pub fn make_folds_generalized(files: &[DataFile]) -> Result<FoldPlan> {
    let subjects = file_subjects(files);
    if subjects.len() < 2 {
        return Err(err!(
            Domain,
            MODULE,
            "generalized models need at least 2 subjects, got {}",
            subjects.len()
        ));
    }
    let folds = subjects
        .iter()
        .map(|s| generalized_fold(files, s))
        .collect::<Result<Vec<_>>>()?;
    Ok(FoldPlan {
        scheme: Scheme::L1O,
        scope: Scope::Generalized,
        subject: None,
        folds,
    })
}

/// The single generalized fold that tests `test_subject`.
pub fn make_scope_generalized(files: &[DataFile], test_subject: &str) -> Result<FoldPlan> {
    let subjects = file_subjects(files);
    if subjects.len() < 2 {
        return Err(err!(
            Domain,
            MODULE,
            "generalized models need at least 2 subjects, got {}",
            subjects.len()
        ));
    }
    Ok(FoldPlan {
        scheme: Scheme::L1O,
        scope: Scope::Generalized,
        subject: Some(test_subject.to_string()),
        folds: vec![generalized_fold(files, test_subject)?],
    })
}

fn generalized_fold(files: &[DataFile], subject: &str) -> Result<Fold> {
    let test = subject_files(files, subject);
    if test.is_empty() {
        return Err(err!(Lookup, MODULE, "no files for subject {subject}"));
    }
    let mut train: Vec<&DataFile> = files
        .iter()
        .filter(|f| f.meta.subject_id != subject)
        .collect();
    train.sort_by(|a, b| {
        (&a.meta.subject_id, a.meta.seq_index).cmp(&(&b.meta.subject_id, b.meta.seq_index))
    });
    Ok(Fold {
        train: ids(&train),
        test: ids(&test),
    })
}

impl FoldPlan {
    /// Checks disjointness, temporal precedence (TSCV) and subject
    /// separation (generalized) against the files the plan refers to.
    pub fn validate(&self, files: &[DataFile]) -> Result<()> {
        let lookup = |id: &str| {
            files
                .iter()
                .find(|f| f.meta.file_id == id)
                .ok_or_else(|| err!(Lookup, MODULE, "fold plan refers to unknown file {id}"))
        };
        for (k, fold) in self.folds.iter().enumerate() {
            if fold.test.is_empty() || fold.train.is_empty() {
                return Err(err!(
                    Validation,
                    MODULE,
                    "fold {k} has an empty train or test set"
                ));
            }
            if let Some(id) = fold.train.iter().find(|id| fold.test.contains(id)) {
                return Err(err!(
                    Validation,
                    MODULE,
                    "fold {k}: {id} is in both train and test"
                ));
            }
            let train = fold
                .train
                .iter()
                .map(|i| lookup(i))
                .collect::<Result<Vec<_>>>()?;
            let test = fold
                .test
                .iter()
                .map(|i| lookup(i))
                .collect::<Result<Vec<_>>>()?;
            if self.scheme == Scheme::TSCV {
                for a in &train {
                    for b in test
                        .iter()
                        .filter(|b| b.meta.subject_id == a.meta.subject_id)
                    {
                        if a.meta.seq_index >= b.meta.seq_index {
                            return Err(err!(
                                Validation,
                                MODULE,
                                "fold {k}: training file {} does not precede test file {}",
                                a.meta.file_id,
                                b.meta.file_id
                            ));
                        }
                    }
                }
            }
            if self.scope == Scope::Generalized {
                for a in &train {
                    if test.iter().any(|b| b.meta.subject_id == a.meta.subject_id) {
                        return Err(err!(
                            Validation,
                            MODULE,
                            "fold {k}: subject {} appears in both train and test",
                            a.meta.subject_id
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recording::{Recording, SourceSpec};
    use crate::synth::SynthConfig;

    /// One subject, recordings of the given lengths (s), seizures in global seconds.
    fn set_with(lengths: &[f64], seizures: &[(f64, f64)]) -> RecordingSet {
        let mut recordings = Vec::new();
        let mut t0 = 0.0;
        for (i, &len) in lengths.iter().enumerate() {
            let events = seizures
                .iter()
                .filter(|&&(s, _)| s >= t0 && s < t0 + len)
                .map(|&(s, e)| Event::seizure(s - t0, e - t0).unwrap())
                .collect();
            recordings.push(Recording {
                meta: RecordingMeta {
                    subject_id: "p1".into(),
                    file_id: format!("p1_{i}"),
                    duration_s: len,
                    n_channels: 1,
                    fs: 1.0,
                    seq_index: i,
                },
                events,
                path: None,
            });
            t0 += len;
        }
        RecordingSet {
            channels: vec!["C".into()],
            fs: 1.0,
            recordings,
            source: SourceSpec::Synthetic {
                config: SynthConfig::default(),
            },
        }
    }

    fn file_with(subject: &str, seq: usize, n_events: usize) -> DataFile {
        DataFile {
            meta: RecordingMeta {
                subject_id: subject.into(),
                file_id: format!("{subject}_{seq}"),
                duration_s: 100.0,
                n_channels: 1,
                fs: 1.0,
                seq_index: seq,
            },
            events: (0..n_events)
                .map(|i| Event::seizure(10.0 * i as f64, 10.0 * i as f64 + 5.0).unwrap())
                .collect(),
            segments: vec![],
        }
    }

    #[test]
    fn fact_file_geometry() {
        let set = set_with(&[3600.0], &[(1000.0, 1060.0)]);
        let f1 = build_fact_subset(&set, 1, 3).unwrap();
        assert_eq!(f1.len(), 1);
        assert_eq!(f1[0].n_samples(), 120);
        assert_eq!((f1[0].events[0].start, f1[0].events[0].end), (30.0, 90.0));
        let f10 = build_fact_subset(&set, 10, 3).unwrap();
        assert_eq!(f10[0].n_samples(), 660);
        assert_eq!(
            (f10[0].events[0].start, f10[0].events[0].end),
            (300.0, 360.0)
        );
        // The seizure segment points back at the source seizure.
        assert!(f10[0].segments.contains(&Segment {
            recording: 0,
            start: 1000,
            end: 1060
        }));
    }

    #[test]
    fn fact_blocks_respect_guard_and_do_not_overlap() {
        let sz = [(500.0, 540.0), (1500.0, 1600.0), (2500.0, 2530.0)];
        let set = set_with(&[1800.0, 1800.0], &sz);
        let files = build_fact_subset(&set, 3, 11).unwrap();
        assert_eq!(files.len(), 3);
        let mut used: Vec<(usize, usize)> = Vec::new();
        for f in &files {
            for g in &f.segments {
                let global = g.recording * 1800;
                let (a, b) = (global + g.start, global + g.end);
                let is_seizure = sz.iter().any(|&(s, e)| a == s as usize && b == e as usize);
                if !is_seizure {
                    for &(s, e) in &sz {
                        assert!(
                            b + 60 <= s as usize || a >= e as usize + 60,
                            "block {a}..{b} too close"
                        );
                    }
                    for &(c, d) in &used {
                        assert!(b <= c || a >= d);
                    }
                    used.push((a, b));
                }
            }
        }
    }

    #[test]
    fn fact_is_seed_reproducible() {
        let set = set_with(&[7200.0], &[(1000.0, 1060.0), (5000.0, 5090.0)]);
        assert_eq!(
            build_fact_subset(&set, 2, 5).unwrap(),
            build_fact_subset(&set, 2, 5).unwrap()
        );
        let a = build_fact_subset(&set, 2, 5).unwrap();
        let b = build_fact_subset(&set, 2, 6).unwrap();
        assert_ne!(a, b);
        // Only background selection changes.
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.events, y.events);
            assert_eq!(x.n_samples(), y.n_samples());
        }
    }

    #[test]
    fn fact_capacity_error_names_subject() {
        let set = set_with(&[300.0], &[(100.0, 200.0)]);
        let e = build_fact_subset(&set, 10, 0).unwrap_err();
        assert!(matches!(e, Error::Capacity { .. }));
        assert!(e.to_string().contains("p1"));
    }

    #[test]
    fn stos_example() {
        let set = set_with(&[6000.0], &[(950.0, 1000.0), (4940.0, 5000.0)]);
        let files = build_seizure_to_seizure(&set).unwrap();
        assert_eq!(files.len(), 2);
        assert_eq!(
            files[0].segments,
            vec![Segment {
                recording: 0,
                start: 0,
                end: 1000
            }]
        );
        assert_eq!(
            files[1].segments,
            vec![Segment {
                recording: 0,
                start: 1000,
                end: 6000
            }]
        );
        assert_eq!(
            (files[1].events[0].start, files[1].events[0].end),
            (3940.0, 4000.0)
        );
    }

    #[test]
    fn stos_single_seizure_and_zero() {
        let set = set_with(&[3000.0], &[(100.0, 160.0)]);
        let files = build_seizure_to_seizure(&set).unwrap();
        assert_eq!(files.len(), 1);
        assert_eq!(files[0].n_samples(), 3000);
        let none = set_with(&[3000.0], &[]);
        assert!(matches!(
            build_seizure_to_seizure(&none),
            Err(Error::Domain { .. })
        ));
    }

    fn hours(files: &[DataFile]) -> Vec<f64> {
        files.iter().map(|f| f.meta.duration_s / 3600.0).collect()
    }

    #[test]
    fn window_examples() {
        let h = 3600.0;
        let early = set_with(&[10.0 * h], &[(2.0 * h, 2.0 * h + 60.0)]);
        assert_eq!(
            hours(&build_fixed_windows(&early, 1.0, 5.0, 1).unwrap()),
            vec![5.0, 1.0, 1.0, 1.0, 1.0, 1.0]
        );
        let late = set_with(&[10.0 * h], &[(6.5 * h, 6.5 * h + 60.0)]);
        assert_eq!(
            hours(&build_fixed_windows(&late, 1.0, 5.0, 1).unwrap())[0],
            7.0
        );
        let twelve = set_with(&[12.0 * h], &[(1.0 * h, 1.0 * h + 60.0)]);
        assert_eq!(
            hours(&build_fixed_windows(&twelve, 4.0, 5.0, 1).unwrap()),
            vec![5.0, 4.0, 3.0]
        );
    }

    #[test]
    fn window_errors() {
        let h = 3600.0;
        let short = set_with(&[4.0 * h], &[(100.0, 160.0)]);
        assert!(matches!(
            build_fixed_windows(&short, 1.0, 5.0, 1),
            Err(Error::Capacity { .. })
        ));
        let none = set_with(&[8.0 * h], &[]);
        assert!(matches!(
            build_fixed_windows(&none, 1.0, 5.0, 1),
            Err(Error::Capacity { .. })
        ));
        assert!(build_fixed_windows(&short, 0.0, 5.0, 1).is_err());
    }

    #[test]
    fn windows_split_at_recording_boundaries() {
        let h = 3600.0;
        let set = set_with(&[2.5 * h, 2.5 * h, 2.0 * h], &[(100.0, 200.0)]);
        let files = build_fixed_windows(&set, 1.0, 5.0, 1).unwrap();
        assert_eq!(files[0].segments.len(), 2);
        assert_eq!(
            files[1].segments,
            vec![Segment {
                recording: 2,
                start: 0,
                end: 3600
            }]
        );
    }

    #[test]
    fn l1o_folds() {
        let files: Vec<DataFile> = (0..7).map(|i| file_with("a", i, 1)).collect();
        let plan = make_folds_l1o(&files).unwrap();
        assert_eq!(plan.folds.len(), 7);
        for (i, f) in plan.folds.iter().enumerate() {
            assert_eq!(f.train.len(), 6);
            assert!(!f.train.contains(&files[i].meta.file_id));
        }
        plan.validate(&files).unwrap();
        let two: Vec<DataFile> = (0..2).map(|i| file_with("a", i, 1)).collect();
        assert!(make_folds_l1o(&two)
            .unwrap()
            .folds
            .iter()
            .all(|f| f.train.len() == 1));
        let bad = vec![file_with("a", 0, 1), file_with("a", 1, 2)];
        assert!(matches!(
            make_folds_l1o(&bad),
            Err(Error::Precondition { .. })
        ));
    }

    #[test]
    fn tscv_folds() {
        let files: Vec<DataFile> = (0..4).map(|i| file_with("a", i, 0)).collect();
        let plan = make_folds_tscv(&files).unwrap();
        let expect = [
            (vec!["a_0"], "a_1"),
            (vec!["a_0", "a_1"], "a_2"),
            (vec!["a_0", "a_1", "a_2"], "a_3"),
        ];
        assert_eq!(plan.folds.len(), 3);
        for (f, (train, test)) in plan.folds.iter().zip(expect) {
            assert_eq!(f.train, train);
            assert_eq!(f.test, vec![test]);
        }
        plan.validate(&files).unwrap();
        assert_eq!(make_folds_tscv(&files[..2]).unwrap().folds.len(), 1);
        assert!(matches!(
            make_folds_tscv(&files[..1]),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn validate_catches_broken_plans() {
        let files: Vec<DataFile> = (0..3).map(|i| file_with("a", i, 1)).collect();
        let mut plan = make_folds_tscv(&files).unwrap();
        plan.folds[0] = Fold {
            train: vec!["a_2".into()],
            test: vec!["a_1".into()],
        };
        assert!(plan.validate(&files).is_err());
        let mut plan = make_folds_l1o(&files).unwrap();
        plan.folds[0].train.push("a_0".into());
        assert!(plan.validate(&files).is_err());
    }

    #[test]
    fn generalized_folds() {
        let mut files = Vec::new();
        for s in ["a", "b", "c"] {
            for i in 0..3 {
                files.push(file_with(s, i, 1));
            }
        }
        let plan = make_folds_generalized(&files).unwrap();
        assert_eq!(plan.folds.len(), 3);
        plan.validate(&files).unwrap();
        for f in &plan.folds {
            assert_eq!(f.test.len(), 3);
            assert_eq!(f.train.len(), 6);
        }
        let one = make_scope_generalized(&files, "b").unwrap();
        assert_eq!(one.folds[0].test, vec!["b_0", "b_1", "b_2"]);
        let two: Vec<DataFile> = files
            .iter()
            .filter(|f| f.meta.subject_id != "c")
            .cloned()
            .collect();
        let p2 = make_folds_generalized(&two).unwrap();
        for f in &p2.folds {
            let test_subject = &f.test[0][..1];
            assert!(f.train.iter().all(|id| &id[..1] != test_subject));
        }
        let single: Vec<DataFile> = files
            .iter()
            .filter(|f| f.meta.subject_id == "a")
            .cloned()
            .collect();
        assert!(matches!(
            make_folds_generalized(&single),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn arrangement_names() {
        for s in ["Fact1", "Fact10", "StoS", "Win1h", "Win4h"] {
            assert_eq!(s.parse::<Arrangement>().unwrap().to_string(), s);
        }
        assert!("Fact0".parse::<Arrangement>().is_err());
        assert!("Win0h".parse::<Arrangement>().is_err());
    }

    #[test]
    fn fold_plan_json_round_trip() {
        let files: Vec<DataFile> = (0..3).map(|i| file_with("a", i, 1)).collect();
        let plan = make_folds_tscv(&files).unwrap();
        let s = serde_json::to_string(&plan).unwrap();
        assert!(s.contains("\"TSCV\""));
        assert_eq!(serde_json::from_str::<FoldPlan>(&s).unwrap(), plan);
    }
}
