//! Recording sets and random access to their signals.
//!
//! A [`RecordingSet`] is plain, serializable metadata: which recordings exist,
//! who they belong to, their seizure annotations, and where the samples come
//! from. Samples are pulled through a [`SignalReader`] one channel range at a
//! time, so arbitrarily long recordings never need to be resident at once.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::edf::{self, DuplicatePolicy};
use crate::error::{err, Error, Result};
use crate::synth::{SynthConfig, SynthReader};
use crate::timeline::{
    validate_event_list, validate_seq_indices, AnnotationRow, Event, RecordingMeta, SEIZURE,
};

const MODULE: &str = "recording";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recording {
    pub meta: RecordingMeta,
    /// Seizure events in seconds from the start of this recording.
    pub events: Vec<Event>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

/// Where the samples of a [`RecordingSet`] come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceSpec {
    Synthetic { config: SynthConfig },
    Edf { duplicate_policy: DuplicatePolicy },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordingSet {
    pub channels: Vec<String>,
    pub fs: f64,
    pub recordings: Vec<Recording>,
    pub source: SourceSpec,
}

impl RecordingSet {
    pub fn validate(&self) -> Result<()> {
        if self.channels.is_empty() {
            return Err(err!(Validation, MODULE, "recording set has no channels"));
        }
        validate_seq_indices(&self.recordings.iter().map(|r| &r.meta).collect::<Vec<_>>())?;
        for r in &self.recordings {
            if r.meta.fs != self.fs {
                return Err(err!(
                    Validation,
                    MODULE,
                    "recording {} is sampled at {} Hz but the set uses {} Hz",
                    r.meta.file_id,
                    r.meta.fs,
                    self.fs
                ));
            }
            validate_event_list(&r.events, MODULE)?;
            if let Some(e) = r
                .events
                .iter()
                .find(|e| e.start < 0.0 || e.end > r.meta.duration_s)
            {
                return Err(err!(
                    Boundary,
                    MODULE,
                    "event [{}, {}) lies outside recording {} of {} s",
                    e.start,
                    e.end,
                    r.meta.file_id,
                    r.meta.duration_s
                ));
            }
        }
        Ok(())
    }

    /// Subject ids in sorted order.
    pub fn subjects(&self) -> Vec<String> {
        let mut s: Vec<String> = self
            .recordings
            .iter()
            .map(|r| r.meta.subject_id.clone())
            .collect();
        s.sort();
        s.dedup();
        s
    }

    /// Indices into `recordings` for one subject, in temporal order.
    pub fn subject_recordings(&self, subject: &str) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.recordings.len())
            .filter(|&i| self.recordings[i].meta.subject_id == subject)
            .collect();
        idx.sort_by_key(|&i| self.recordings[i].meta.seq_index);
        idx
    }

    /// All seizure annotations as CSV rows.
    pub fn annotations(&self) -> Vec<AnnotationRow> {
        let mut rows = Vec::new();
        for s in self.subjects() {
            for i in self.subject_recordings(&s) {
                let r = &self.recordings[i];
                rows.extend(r.events.iter().map(|e| AnnotationRow {
                    subject: r.meta.subject_id.clone(),
                    file: r.meta.file_id.clone(),
                    start_s: e.start,
                    end_s: e.end,
                    label: e.label,
                }));
            }
        }
        rows
    }

    pub fn total_duration_s(&self) -> f64 {
        self.recordings.iter().map(|r| r.meta.duration_s).sum()
    }

    pub fn seizure_fraction(&self) -> f64 {
        let ictal: f64 = self
            .recordings
            .iter()
            .flat_map(|r| r.events.iter())
            .filter(|e| e.label == SEIZURE)
            .map(Event::duration)
            .sum();
        ictal / self.total_duration_s()
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let set: RecordingSet = serde_json::from_str(&text)?;
        set.validate()?;
        Ok(set)
    }
}

/// Random access to one channel of one recording.
pub trait SignalReader: Send + Sync {
    /// Samples `start..end` of `channel` in recording `recording` (an index
    /// into [`RecordingSet::recordings`]).
    fn read(&self, recording: usize, channel: usize, start: usize, end: usize) -> Result<Vec<f32>>;
}

pub fn open_reader(set: &RecordingSet) -> Result<Arc<dyn SignalReader>> {
    match &set.source {
        SourceSpec::Synthetic { config } => Ok(Arc::new(SynthReader::new(config)?)),
        SourceSpec::Edf { duplicate_policy } => {
            Ok(Arc::new(EdfReader::new(set, *duplicate_policy)))
        }
    }
}

/// Decoded recording: selected channels as digital values plus scaling.
struct Decoded {
    digital: Vec<Vec<i16>>,
    gain_offset: Vec<(f64, f64)>,
}

/// Reads EDF recordings on demand. Each recording is decoded once (selected
/// channels only, 2 bytes per sample) and kept for the lifetime of the
/// reader.
pub struct EdfReader {
    paths: Vec<Option<PathBuf>>,
    channels: Vec<String>,
    policy: DuplicatePolicy,
    cache: Mutex<HashMap<usize, Arc<Decoded>>>,
}

impl EdfReader {
    pub fn new(set: &RecordingSet, policy: DuplicatePolicy) -> Self {
        Self {
            paths: set.recordings.iter().map(|r| r.path.clone()).collect(),
            channels: set.channels.clone(),
            policy,
            cache: Mutex::new(HashMap::new()),
        }
    }

    fn decoded(&self, recording: usize) -> Result<Arc<Decoded>> {
        if let Some(d) = self
            .cache
            .lock()
            .expect("edf cache poisoned")
            .get(&recording)
        {
            return Ok(d.clone());
        }
        let path = self
            .paths
            .get(recording)
            .and_then(|p| p.as_ref())
            .ok_or_else(|| err!(Lookup, MODULE, "recording {recording} has no file path"))?;
        let file = edf::read_edf_file(path)?;
        let idx = edf::channel_indices(&file, &self.channels, self.policy)?;
        let gain_offset = idx
            .iter()
            .map(|&i| file.header.signals[i].gain_offset())
            .collect();
        let mut digital = file.digital;
        let digital = idx
            .iter()
            .map(|&i| std::mem::take(&mut digital[i]))
            .collect();
        let d = Arc::new(Decoded {
            digital,
            gain_offset,
        });
        self.cache
            .lock()
            .expect("edf cache poisoned")
            .insert(recording, d.clone());
        Ok(d)
    }
}

impl SignalReader for EdfReader {
    fn read(&self, recording: usize, channel: usize, start: usize, end: usize) -> Result<Vec<f32>> {
        let d = self.decoded(recording)?;
        let samples = d
            .digital
            .get(channel)
            .ok_or_else(|| err!(Lookup, MODULE, "channel index {channel} out of range"))?;
        if start > end || end > samples.len() {
            return Err(err!(
                Boundary,
                MODULE,
                "sample range {start}..{end} outside recording of {} samples",
                samples.len()
            ));
        }
        let (gain, offset) = d.gain_offset[channel];
        Ok(samples[start..end]
            .iter()
            .map(|&v| (gain * f64::from(v) + offset) as f32)
            .collect())
    }
}

/// Builds a recording set from EDF files and an annotation CSV.
///
/// Files inside a sub-directory belong to the subject named after it; files
/// at the top level belong to the subject given by the part of the file stem
/// before the first `_` (so `chb01_03.edf` is subject `chb01`). Within a
/// subject, files are ordered by name.
pub fn scan_edf_directory(
    dir: &Path,
    annotations: &[AnnotationRow],
    channels: &[String],
    policy: DuplicatePolicy,
) -> Result<RecordingSet> {
    let mut found: Vec<(String, String, PathBuf)> = Vec::new();
    collect_edf(dir, None, &mut found)?;
    if found.is_empty() {
        return Err(err!(
            Lookup,
            MODULE,
            "no .edf files under {}",
            dir.display()
        ));
    }
    found.sort();

    let mut by_file: BTreeMap<(&str, &str), Vec<Event>> = BTreeMap::new();
    for a in annotations {
        by_file
            .entry((a.subject.as_str(), a.file.as_str()))
            .or_default()
            .push(a.event()?);
    }

    let mut recordings = Vec::new();
    let mut seq: BTreeMap<String, usize> = BTreeMap::new();
    let mut fs_set: Option<f64> = None;
    for (subject, file_id, path) in &found {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let file = edf::parse_edf(&bytes)?;
        let idx = edf::channel_indices(&file, channels, policy)
            .map_err(|e| err!(Lookup, MODULE, "{}: {e}", path.display()))?;
        let fs = file.header.fs(idx[0]);
        match fs_set {
            None => fs_set = Some(fs),
            Some(f) if f != fs => {
                return Err(err!(
                    Validation,
                    MODULE,
                    "{} is sampled at {fs} Hz, other files at {f} Hz",
                    path.display()
                ))
            }
            _ => {}
        }
        let mut events = by_file
            .remove(&(subject.as_str(), file_id.as_str()))
            .unwrap_or_default();
        events.retain(|e| e.label == SEIZURE);
        events.sort_by(|a, b| a.start.total_cmp(&b.start));
        let seq_index = seq.entry(subject.clone()).or_insert(0);
        recordings.push(Recording {
            meta: RecordingMeta {
                subject_id: subject.clone(),
                file_id: file_id.clone(),
                duration_s: file.header.duration_s(),
                n_channels: channels.len(),
                fs,
                seq_index: *seq_index,
            },
            events,
            path: Some(path.clone()),
        });
        *seq_index += 1;
    }
    if let Some(((s, f), _)) = by_file.into_iter().next() {
        return Err(err!(
            Lookup,
            MODULE,
            "annotation for {s}/{f} has no matching EDF file"
        ));
    }
    let set = RecordingSet {
        channels: channels.to_vec(),
        fs: fs_set.unwrap_or(0.0),
        recordings,
        source: SourceSpec::Edf {
            duplicate_policy: policy,
        },
    };
    set.validate()?;
    Ok(set)
}

fn collect_edf(
    dir: &Path,
    subject: Option<&str>,
    out: &mut Vec<(String, String, PathBuf)>,
) -> Result<()> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths: Vec<PathBuf> = entries
        .map(|e| e.map(|e| e.path()).map_err(|e| Error::io(dir, e)))
        .collect::<Result<_>>()?;
    paths.sort();
    for p in paths {
        if p.is_dir() {
            if subject.is_none() {
                let name = p
                    .file_name()
                    .and_then(|n| n.to_str())
                    .unwrap_or_default()
                    .to_string();
                collect_edf(&p, Some(&name), out)?;
            }
            continue;
        }
        let is_edf = p
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("edf"));
        if !is_edf {
            continue;
        }
        let stem = p
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or_default()
            .to_string();
        let subj = match subject {
            Some(s) => s.to_string(),
            None => stem.split('_').next().unwrap_or(&stem).to_string(),
        };
        out.push((subj, stem, p));
    }
    Ok(())
}
