//! Deterministic synthetic long-term recordings with planted seizures.
//!
//! Background activity is band-limited Gaussian noise. A seizure adds a
//! rhythmic component (fundamental plus second harmonic) with raised-cosine
//! onset and offset ramps, scaled so that the seizure segment's RMS is
//! `seizure_gain` times the background RMS. With `seizure_gain = 1` nothing
//! is added and the two classes are indistinguishable.
//!
//! Each subject gets its own background amplitude and seizure frequency
//! (spread controlled by `subject_variability`). Short high-amplitude
//! artifacts are sprinkled through the background: broadband bursts, and
//! rhythmic bursts near the subject's seizure frequency that can mimic a
//! seizure.
//!
//! Every sample is a pure function of `(seed, subject, file, channel, index)`:
//! noise is drawn in fixed-size blocks from per-block ChaCha streams, so any
//! range of any channel can be produced without generating what precedes it.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::edf::{self, EdfFile, CHB_MIT_COMMON_CHANNELS};
use crate::error::{err, Error, Result};
use crate::recording::{Recording, RecordingSet, SignalReader, SourceSpec};
use crate::seed::mix;
use crate::timeline::{write_annotations_file, AnnotationRow, Event, RecordingMeta};

const MODULE: &str = "synth";

const NOISE_BLOCK: usize = 4096;
const FIR_TAPS: usize = 33;
const BACKGROUND_CUTOFF_HZ: f64 = 30.0;
const SEIZURE_SEPARATION_S: f64 = 120.0;
const FILE_EDGE_MARGIN_S: f64 = 10.0;
const ARTIFACT_SEIZURE_CLEARANCE_S: f64 = 30.0;
const HARMONIC_RATIO: f64 = 0.4;
const MAX_PLACEMENT_ATTEMPTS: usize = 20_000;
/// EDF export range: 0.1 uV per digital step.
const EDF_PHYSICAL_RANGE: (f64, f64) = (-3276.8, 3276.7);

/// Mean, standard deviation and lower bound of a truncated Gaussian draw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
}

impl MeanSd {
    fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        if self.sd <= 0.0 {
            return self.mean.max(self.min);
        }
        for _ in 0..1000 {
            let z: f64 = rng.sample(StandardNormal);
            let v = self.mean + self.sd * z;
            if v >= self.min {
                return v;
            }
        }
        self.min
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_subjects: usize,
    pub hours_per_subject: f64,
    /// Length of each recording file; the last file of a subject may be shorter.
    pub file_hours: f64,
    pub fs: f64,
    pub n_channels: usize,
    pub seizures_per_subject: MeanSd,
    pub seizure_len_s: MeanSd,
    /// Base rhythmic burst frequency; each subject deviates from it.
    pub seizure_freq_hz: f64,
    /// Seizure RMS relative to background RMS.
    pub seizure_gain: f64,
    /// Log-scale spread of per-subject background amplitude and seizure
    /// frequency. 0 makes all subjects statistically identical.
    pub subject_variability: f64,
    /// Log-scale spread of amplitude and frequency between seizures of one
    /// subject.
    pub seizure_jitter: f64,
    pub background_uv: f64,
    pub artifact_rate_per_h: f64,
    /// Artifact RMS relative to background RMS.
    pub artifact_gain: f64,
    /// Share of artifacts that are rhythmic bursts at a random frequency
    /// rather than broadband noise.
    pub rhythmic_artifact_fraction: f64,
    /// Artifact lengths are drawn uniformly from 2 s to this many seconds.
    pub artifact_max_s: f64,
    /// Log-scale spread of rhythmic artifact frequencies around the
    /// subject's seizure frequency.
    pub artifact_freq_spread: f64,
    pub rng_seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_subjects: 3,
            hours_per_subject: 8.0,
            file_hours: 1.0,
            fs: 256.0,
            n_channels: 18,
            seizures_per_subject: MeanSd {
                mean: 7.6,
                sd: 5.8,
                min: 2.0,
            },
            seizure_len_s: MeanSd {
                mean: 58.6,
                sd: 65.0,
                min: 10.0,
            },
            seizure_freq_hz: 4.0,
            seizure_gain: 4.0,
            subject_variability: 1.0,
            seizure_jitter: 0.25,
            background_uv: 20.0,
            artifact_rate_per_h: 20.0,
            artifact_gain: 4.0,
            rhythmic_artifact_fraction: 0.5,
            artifact_max_s: 20.0,
            artifact_freq_spread: 0.5,
            rng_seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("n_subjects", self.n_subjects as f64),
            ("hours_per_subject", self.hours_per_subject),
            ("file_hours", self.file_hours),
            ("fs", self.fs),
            ("n_channels", self.n_channels as f64),
            ("seizure_freq_hz", self.seizure_freq_hz),
            ("background_uv", self.background_uv),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(err!(Validation, MODULE, "{name} must be positive, got {v}"));
            }
        }
        if self.seizures_per_subject.min < 1.0 {
            return Err(err!(
                Validation,
                MODULE,
                "every subject needs at least one seizure"
            ));
        }
        if self.seizure_len_s.min < 2.0 / self.fs {
            return Err(err!(
                Validation,
                MODULE,
                "minimum seizure length must be at least two samples"
            ));
        }
        if self.seizure_gain < 1.0 || self.artifact_gain < 1.0 {
            return Err(err!(Validation, MODULE, "gains must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.rhythmic_artifact_fraction) || !(self.artifact_max_s >= 2.0)
        {
            return Err(err!(
                Validation,
                MODULE,
                "need 0 <= rhythmic_artifact_fraction <= 1 and artifact_max_s >= 2"
            ));
        }
        if self.artifact_rate_per_h < 0.0
            || self.subject_variability < 0.0
            || !(self.seizure_jitter >= 0.0)
            || !(self.artifact_freq_spread >= 0.0)
        {
            return Err(err!(Validation, MODULE, "rates and spreads must be >= 0"));
        }
        if self.seizure_freq_hz * (1.0 + HARMONIC_RATIO) >= self.fs / 2.0 {
            return Err(err!(
                Validation,
                MODULE,
                "seizure frequency must be below Nyquist"
            ));
        }
        Ok(())
    }

    pub fn channel_names(&self) -> Vec<String> {
        (0..self.n_channels)
            .map(|c| match CHB_MIT_COMMON_CHANNELS.get(c) {
                Some(name) => name.to_string(),
                None => format!("CH{:02}", c + 1),
            })
            .collect()
    }

    fn file_durations_s(&self) -> Vec<f64> {
        let total = (self.hours_per_subject * 3600.0).round();
        let per = (self.file_hours * 3600.0).round().max(1.0);
        let mut out = Vec::new();
        let mut t = 0.0;
        while t < total {
            let d = per.min(total - t);
            out.push(d);
            t += d;
        }
        out
    }
}

#[derive(Debug, Clone)]
struct FileModel {
    duration_s: f64,
    seizures: Vec<Event>,
    /// Per seizure: (amplitude factor, frequency factor).
    seizure_mods: Vec<(f64, f64)>,
    artifacts: Vec<Artifact>,
}

#[derive(Debug, Clone, Copy)]
struct Artifact {
    event: Event,
    /// `None` for a broadband burst.
    freq_hz: Option<f64>,
}

#[derive(Debug, Clone)]
struct SubjectModel {
    subject_id: String,
    bg_scale: f64,
    seizure_freq_hz: f64,
    channel_gain: Vec<f64>,
    channel_phase: Vec<f64>,
    files: Vec<FileModel>,
}

/// Draws a non-overlapping placement inside one of `durations`, keeping
/// `clearance` seconds away from every event in `taken` of the same file.
fn place<R: Rng>(
    rng: &mut R,
    durations: &[f64],
    taken: &[Vec<Event>],
    len: f64,
    clearance: f64,
    edge: f64,
) -> Option<(usize, f64)> {
    let total: f64 = durations.iter().sum();
    for _ in 0..MAX_PLACEMENT_ATTEMPTS {
        let mut t = rng.random_range(0.0..total);
        let mut file = 0;
        while file + 1 < durations.len() && t >= durations[file] {
            t -= durations[file];
            file += 1;
        }
        let start = t.floor();
        let end = start + len;
        if start < edge || end > durations[file] - edge {
            continue;
        }
        let clear = taken[file]
            .iter()
            .all(|e| end + clearance <= e.start || start >= e.end + clearance);
        if clear {
            return Some((file, start));
        }
    }
    None
}

fn subject_model(cfg: &SynthConfig, s: usize) -> Result<SubjectModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(&[cfg.rng_seed, 1, s as u64]));
    let n = cfg.n_subjects as f64;
    let u_scale = (s as f64 + rng.random::<f64>()) / n;
    let u_freq = ((cfg.n_subjects - 1 - s) as f64 + rng.random::<f64>()) / n;
    let bg_scale = (cfg.subject_variability * (2.0 * u_scale - 1.0)).exp();
    let seizure_freq_hz =
        cfg.seizure_freq_hz * (cfg.subject_variability * (2.0 * u_freq - 1.0)).exp();
    let channel_gain = (0..cfg.n_channels)
        .map(|_| rng.random_range(0.8..1.2))
        .collect();
    let channel_phase = (0..cfg.n_channels)
        .map(|_| rng.random_range(0.0..2.0 * PI))
        .collect();

    let subject_id = format!("syn{:02}", s + 1);
    let durations = cfg.file_durations_s();
    let n_seizures = cfg.seizures_per_subject.draw(&mut rng).round().max(1.0) as usize;
    let mut seizures: Vec<Vec<Event>> = vec![Vec::new(); durations.len()];
    let mut mods: Vec<Vec<(f64, f64)>> = vec![Vec::new(); durations.len()];
    for k in 0..n_seizures {
        let len = cfg
            .seizure_len_s
            .draw(&mut rng)
            .round()
            .max(cfg.seizure_len_s.min.ceil());
        let (file, start) = place(&mut rng, &durations, &seizures, len, SEIZURE_SEPARATION_S, FILE_EDGE_MARGIN_S)
            .ok_or_else(|| {
                err!(
                    Capacity,
                    MODULE,
                    "subject {subject_id}: cannot place seizure {} of {len} s ({n_seizures} requested) in {} h of recording",
                    k + 1,
                    cfg.hours_per_subject
                )
            })?;
        seizures[file].push(Event::seizure(start, start + len)?);
        let gain_z: f64 = rng.sample(StandardNormal);
        let freq_z: f64 = rng.sample(StandardNormal);
        let j = cfg.seizure_jitter;
        mods[file].push((
            (j * gain_z.clamp(-2.0, 2.0)).exp(),
            (0.5 * j * freq_z.clamp(-2.0, 2.0)).exp(),
        ));
    }

    let mut artifacts: Vec<Vec<Artifact>> = vec![Vec::new(); durations.len()];
    for (f, d) in durations.iter().enumerate() {
        let lambda = cfg.artifact_rate_per_h * d / 3600.0;
        let count = if lambda > 0.0 {
            Poisson::new(lambda)
                .map(|p| p.sample(&mut rng) as usize)
                .unwrap_or(0)
        } else {
            0
        };
        for _ in 0..count {
            let len = rng.random_range(2.0..=cfg.artifact_max_s).round();
            let mut blocked = seizures.clone();
            for (b, a) in blocked.iter_mut().zip(&artifacts) {
                b.extend(a.iter().map(|a| a.event));
            }
            // Artifacts are best effort: skip one that does not fit.
            let single = [*d];
            let taken = [blocked[f].clone()];
            if let Some((_, start)) = place(
                &mut rng,
                &single,
                &taken,
                len,
                ARTIFACT_SEIZURE_CLEARANCE_S,
                1.0,
            ) {
                let freq_hz = (rng.random::<f64>() < cfg.rhythmic_artifact_fraction).then(|| {
                    let u = 2.0 * rng.random::<f64>() - 1.0;
                    seizure_freq_hz * (cfg.artifact_freq_spread * u).exp()
                });
                artifacts[f].push(Artifact {
                    event: Event::new(start, start + len, 0)?,
                    freq_hz,
                });
            }
        }
    }

    let files = durations
        .iter()
        .zip(seizures.into_iter().zip(mods))
        .zip(artifacts)
        .map(|((&duration_s, (seizures, mods)), mut artifacts)| {
            let mut paired: Vec<(Event, (f64, f64))> = seizures.into_iter().zip(mods).collect();
            paired.sort_by(|a, b| a.0.start.total_cmp(&b.0.start));
            let (seizures, seizure_mods) = paired.into_iter().unzip();
            artifacts.sort_by(|a, b| a.event.start.total_cmp(&b.event.start));
            FileModel {
                duration_s,
                seizures,
                seizure_mods,
                artifacts,
            }
        })
        .collect();
    Ok(SubjectModel {
        subject_id,
        bg_scale,
        seizure_freq_hz,
        channel_gain,
        channel_phase,
        files,
    })
}

fn lowpass_taps(fs: f64) -> Vec<f64> {
    let fc = (BACKGROUND_CUTOFF_HZ / fs).min(0.45);
    let mid = (FIR_TAPS - 1) as f64 / 2.0;
    let mut h: Vec<f64> = (0..FIR_TAPS)
        .map(|k| {
            let x = k as f64 - mid;
            let sinc = if x == 0.0 {
                2.0 * fc
            } else {
                (2.0 * PI * fc * x).sin() / (PI * x)
            };
            let hamming = 0.54 - 0.46 * (2.0 * PI * k as f64 / (FIR_TAPS - 1) as f64).cos();
            sinc * hamming
        })
        .collect();
    // Unit output variance for unit-variance white input.
    let norm = h.iter().map(|v| v * v).sum::<f64>().sqrt();
    h.iter_mut().for_each(|v| *v /= norm);
    h
}

fn white_block(key: u64, block: i64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(&[key, block as u64]));
    (0..NOISE_BLOCK)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Unit-variance white noise at absolute indices `start..start+len`.
fn white(key: u64, start: i64, len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    let b = NOISE_BLOCK as i64;
    let mut i = start;
    let end = start + len as i64;
    while i < end {
        let block = i.div_euclid(b);
        let data = white_block(key, block);
        let from = (i - block * b) as usize;
        let to = ((end - block * b) as usize).min(NOISE_BLOCK);
        out.extend_from_slice(&data[from..to]);
        i = block * b + to as i64;
    }
    out
}

/// Low-pass filtered noise at `start..start+len`; causal FIR so sample `i`
/// depends only on white samples `i-taps+1..=i`.
fn band_noise(key: u64, taps: &[f64], start: usize, len: usize) -> Vec<f64> {
    let history = taps.len() - 1;
    let w = white(key, start as i64 - history as i64, len + history);
    (0..len)
        .map(|i| {
            let window = &w[i..i + taps.len()];
            window
                .iter()
                .zip(taps.iter().rev())
                .map(|(a, b)| a * b)
                .sum()
        })
        .collect()
}

/// Raised-cosine envelope of an event at time `t`.
fn envelope(e: &Event, t: f64) -> f64 {
    if t < e.start || t >= e.end {
        return 0.0;
    }
    let ramp = (e.duration() / 4.0).min(3.0);
    let rise = (t - e.start) / ramp;
    let fall = (e.end - t) / ramp;
    let x = rise.min(fall).min(1.0);
    0.5 * (1.0 - (PI * x).cos())
}

/// Produces samples for a synthetic [`RecordingSet`].
pub struct SynthReader {
    cfg: SynthConfig,
    subjects: Vec<SubjectModel>,
    /// Recording index -> (subject, file).
    index: Vec<(usize, usize)>,
    taps: Vec<f64>,
}

impl SynthReader {
    pub fn new(cfg: &SynthConfig) -> Result<Self> {
        cfg.validate()?;
        let subjects = (0..cfg.n_subjects)
            .map(|s| subject_model(cfg, s))
            .collect::<Result<Vec<_>>>()?;
        let index = subjects
            .iter()
            .enumerate()
            .flat_map(|(s, m)| (0..m.files.len()).map(move |f| (s, f)))
            .collect();
        Ok(Self {
            cfg: cfg.clone(),
            subjects,
            index,
            taps: lowpass_taps(cfg.fs),
        })
    }

    /// Per-subject seizure frequency actually planted.
    pub fn seizure_frequencies(&self) -> Vec<f64> {
        self.subjects.iter().map(|s| s.seizure_freq_hz).collect()
    }

    fn recording_set(&self) -> Result<RecordingSet> {
        let mut recordings = Vec::new();
        for m in &self.subjects {
            for (f, file) in m.files.iter().enumerate() {
                recordings.push(Recording {
                    meta: RecordingMeta {
                        subject_id: m.subject_id.clone(),
                        file_id: format!("{}_{:02}", m.subject_id, f + 1),
                        duration_s: file.duration_s,
                        n_channels: self.cfg.n_channels,
                        fs: self.cfg.fs,
                        seq_index: f,
                    },
                    events: file.seizures.clone(),
                    path: None,
                });
            }
        }
        let set = RecordingSet {
            channels: self.cfg.channel_names(),
            fs: self.cfg.fs,
            recordings,
            source: SourceSpec::Synthetic {
                config: self.cfg.clone(),
            },
        };
        set.validate()?;
        Ok(set)
    }

    /// Artifact intervals of one recording (ground truth for diagnostics).
    pub fn artifacts(&self, recording: usize) -> Vec<Event> {
        let (s, f) = self.index[recording];
        self.subjects[s].files[f]
            .artifacts
            .iter()
            .map(|a| a.event)
            .collect()
    }
}

impl SignalReader for SynthReader {
    fn read(&self, recording: usize, channel: usize, start: usize, end: usize) -> Result<Vec<f32>> {
        let &(s, f) = self
            .index
            .get(recording)
            .ok_or_else(|| err!(Lookup, MODULE, "recording index {recording} out of range"))?;
        let m = &self.subjects[s];
        let file = &m.files[f];
        let n = (file.duration_s * self.cfg.fs).round() as usize;
        if channel >= self.cfg.n_channels {
            return Err(err!(Lookup, MODULE, "channel index {channel} out of range"));
        }
        if start > end || end > n {
            return Err(err!(
                Boundary,
                MODULE,
                "sample range {start}..{end} outside recording of {n} samples"
            ));
        }
        let len = end - start;
        let fs = self.cfg.fs;
        let sigma = self.cfg.background_uv * m.bg_scale * m.channel_gain[channel];
        let seed = self.cfg.rng_seed;
        let bg_key = mix(&[seed, 2, s as u64, f as u64, channel as u64]);
        let mut x = band_noise(bg_key, &self.taps, start, len);
        x.iter_mut().for_each(|v| *v *= sigma);

        let t0 = start as f64 / fs;
        let t1 = end as f64 / fs;
        let g = self.cfg.seizure_gain;
        let amp = sigma * (2.0 * (g * g - 1.0) / (1.0 + HARMONIC_RATIO * HARMONIC_RATIO)).sqrt();
        let phase = m.channel_phase[channel];
        for (e, &(gm, fm)) in file.seizures.iter().zip(&file.seizure_mods) {
            if e.end <= t0 || e.start >= t1 {
                continue;
            }
            let w = 2.0 * PI * m.seizure_freq_hz * fm;
            let lo = ((e.start * fs).ceil() as usize).max(start);
            let hi = ((e.end * fs).ceil() as usize).min(end);
            for i in lo..hi {
                let t = i as f64 / fs;
                let theta = w * t + phase;
                x[i - start] += gm
                    * amp
                    * envelope(e, t)
                    * (theta.sin() + HARMONIC_RATIO * (2.0 * theta).sin());
            }
        }

        let ga = self.cfg.artifact_gain;
        let art_amp = sigma * (ga * ga - 1.0).sqrt();
        let rhythm_amp =
            sigma * (2.0 * (ga * ga - 1.0) / (1.0 + HARMONIC_RATIO * HARMONIC_RATIO)).sqrt();
        // Broadband artifacts share one waveform across channels (a movement-like burst).
        let art_key = mix(&[seed, 3, s as u64, f as u64]);
        for a in file
            .artifacts
            .iter()
            .filter(|a| a.event.end > t0 && a.event.start < t1)
        {
            let e = &a.event;
            let lo = ((e.start * fs).ceil() as usize).max(start);
            let hi = ((e.end * fs).ceil() as usize).min(end);
            if lo >= hi {
                continue;
            }
            match a.freq_hz {
                Some(fa) => {
                    let wa = 2.0 * PI * fa;
                    for i in lo..hi {
                        let t = i as f64 / fs;
                        let theta = wa * t + phase;
                        x[i - start] += rhythm_amp
                            * envelope(e, t)
                            * (theta.sin() + HARMONIC_RATIO * (2.0 * theta).sin());
                    }
                }
                None => {
                    let burst = band_noise(art_key, &self.taps, lo, hi - lo);
                    for (i, b) in (lo..hi).zip(burst) {
                        x[i - start] += art_amp * envelope(e, i as f64 / fs) * b;
                    }
                }
            }
        }
        Ok(x.into_iter().map(|v| v as f32).collect())
    }
}

/// A generated recording set together with its ground-truth annotations.
pub struct SyntheticDataset {
    pub set: RecordingSet,
    pub annotations: Vec<AnnotationRow>,
    pub reader: SynthReader,
}

pub fn generate(cfg: &SynthConfig) -> Result<SyntheticDataset> {
    let reader = SynthReader::new(cfg)?;
    let set = reader.recording_set()?;
    let annotations = set.annotations();
    Ok(SyntheticDataset {
        set,
        annotations,
        reader,
    })
}

/// Writes every recording as `<dir>/<subject>/<file>.edf` plus
/// `<dir>/annotations.csv`, and returns the equivalent EDF-backed set.
pub fn export_edf(dataset: &SyntheticDataset, dir: &Path) -> Result<RecordingSet> {
    let set = &dataset.set;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = set.clone();
    out.source = SourceSpec::Edf {
        duplicate_policy: Default::default(),
    };
    for (i, rec) in out.recordings.iter_mut().enumerate() {
        let sub = dir.join(&rec.meta.subject_id);
        std::fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
        let mut header = edf::uniform_header(&set.channels, set.fs, 1.0, EDF_PHYSICAL_RANGE, "uV")?;
        header.patient_id = format!("{} X X X", rec.meta.subject_id);
        let n = rec.meta.n_samples();
        let digital = (0..set.channels.len())
            .map(|c| {
                let x = dataset.reader.read(i, c, 0, n)?;
                let sig = &header.signals[c];
                Ok(x.iter().map(|&v| sig.to_digital(f64::from(v))).collect())
            })
            .collect::<Result<Vec<Vec<i16>>>>()?;
        let path = sub.join(format!("{}.edf", rec.meta.file_id));
        edf::write_edf_file(&path, &EdfFile { header, digital })?;
        rec.path = Some(path);
    }
    write_annotations_file(&dir.join("annotations.csv"), &dataset.annotations)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        SynthConfig {
            n_subjects: 2,
            hours_per_subject: 2.0,
            n_channels: 3,
            seizures_per_subject: MeanSd {
                mean: 3.0,
                sd: 1.0,
                min: 2.0,
            },
            ..SynthConfig::default()
        }
    }

    #[test]
    fn default_config_places_valid_seizures() {
        let d = generate(&SynthConfig::default()).unwrap();
        for s in d.set.subjects() {
            let recs = d.set.subject_recordings(&s);
            let n: usize = recs.iter().map(|&i| d.set.recordings[i].events.len()).sum();
            assert!(n >= 2, "subject {s} has {n} seizures");
            for &i in &recs {
                let r = &d.set.recordings[i];
                for e in &r.events {
                    assert!(e.start >= 0.0 && e.end <= r.meta.duration_s);
                    assert!(e.duration() >= 10.0);
                }
                for w in r.events.windows(2) {
                    assert!(w[1].start - w[0].end >= SEIZURE_SEPARATION_S);
                }
            }
        }
        assert_eq!(d.set.recordings.len(), 3 * 8);
        assert_eq!(d.set.channels.len(), 18);
        assert_eq!(
            d.annotations.len(),
            d.set
                .recordings
                .iter()
                .map(|r| r.events.len())
                .sum::<usize>()
        );
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let a = generate(&small()).unwrap();
        let b = generate(&small()).unwrap();
        assert_eq!(a.set, b.set);
        let xa = a.reader.read(1, 2, 1000, 5000).unwrap();
        let xb = b.reader.read(1, 2, 1000, 5000).unwrap();
        assert_eq!(xa, xb);
        let other = generate(&SynthConfig {
            rng_seed: 9,
            ..small()
        })
        .unwrap();
        assert_ne!(other.reader.read(1, 2, 1000, 5000).unwrap(), xa);
    }

    #[test]
    fn random_access_matches_contiguous_read() {
        let d = generate(&small()).unwrap();
        let whole = d.reader.read(0, 1, 0, 20_000).unwrap();
        let part = d.reader.read(0, 1, 12_345, 17_000).unwrap();
        assert_eq!(&whole[12_345..17_000], part.as_slice());
    }

    #[test]
    fn seizures_raise_amplitude_by_gain() {
        let cfg = SynthConfig {
            seizure_jitter: 0.0,
            artifact_rate_per_h: 0.0,
            ..small()
        };
        let d = generate(&cfg).unwrap();
        let (i, e) = d
            .set
            .recordings
            .iter()
            .enumerate()
            .find_map(|(i, r)| r.events.first().map(|e| (i, *e)))
            .unwrap();
        let fs = d.set.fs;
        let rms = |a: usize, b: usize| {
            let x = d.reader.read(i, 0, a, b).unwrap();
            (x.iter().map(|v| f64::from(*v).powi(2)).sum::<f64>() / x.len() as f64).sqrt()
        };
        // Interior of the seizure, away from the ramps.
        let s_in = ((e.start + 3.0) * fs) as usize;
        let s_out = ((e.end - 3.0) * fs) as usize;
        let inside = rms(s_in, s_out);
        let lo = if e.start > 200.0 {
            ((e.start - 150.0) * fs) as usize
        } else {
            ((e.end + 60.0) * fs) as usize
        };
        let outside = rms(lo, lo + (60.0 * fs) as usize);
        let ratio = inside / outside;
        let g = cfg.seizure_gain;
        assert!(ratio > 0.75 * g && ratio < 1.25 * g, "ratio {ratio}");
    }

    #[test]
    fn unit_gain_adds_nothing() {
        let cfg = SynthConfig {
            seizure_gain: 1.0,
            artifact_rate_per_h: 0.0,
            ..small()
        };
        let d = generate(&cfg).unwrap();
        let plain = SynthReader::new(&cfg).unwrap();
        let r = d
            .set
            .recordings
            .iter()
            .position(|r| !r.events.is_empty())
            .unwrap();
        let e = d.set.recordings[r].events[0];
        let a = ((e.start - 5.0) * 256.0) as usize;
        let b = ((e.end + 5.0) * 256.0) as usize;
        let x = d.reader.read(r, 0, a, b).unwrap();
        // Background alone, with the seizure list removed.
        let mut bare = plain;
        bare.subjects
            .iter_mut()
            .for_each(|m| m.files.iter_mut().for_each(|f| f.seizures.clear()));
        assert_eq!(x, bare.read(r, 0, a, b).unwrap());
    }

    #[test]
    fn impossible_request_is_a_capacity_error() {
        let cfg = SynthConfig {
            hours_per_subject: 0.1,
            file_hours: 0.1,
            seizures_per_subject: MeanSd {
                mean: 20.0,
                sd: 0.0,
                min: 20.0,
            },
            ..small()
        };
        assert!(matches!(generate(&cfg), Err(Error::Capacity { .. })));
    }

    #[test]
    fn subjects_differ_in_seizure_frequency() {
        let r = SynthReader::new(&SynthConfig::default()).unwrap();
        let f = r.seizure_frequencies();
        assert!(f.windows(2).all(|w| (w[0] - w[1]).abs() > 0.3), "{f:?}");
    }

    #[test]
    fn edf_export_round_trip() {
        let cfg = SynthConfig {
            n_subjects: 1,
            hours_per_subject: 0.1,
            file_hours: 0.05,
            n_channels: 2,
            seizures_per_subject: MeanSd {
                mean: 1.0,
                sd: 0.0,
                min: 1.0,
            },
            seizure_len_s: MeanSd {
                mean: 20.0,
                sd: 0.0,
                min: 10.0,
            },
            ..SynthConfig::default()
        };
        let d = generate(&cfg).unwrap();
        let tmp = tempfile::tempdir().unwrap();
        let set = export_edf(&d, tmp.path()).unwrap();
        assert_eq!(set.recordings.len(), 2);
        let edf_reader = crate::recording::open_reader(&set).unwrap();
        let a = d.reader.read(0, 1, 0, 1000).unwrap();
        let b = edf_reader.read(0, 1, 0, 1000).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 0.05 + 1e-4, "{x} vs {y}");
        }
        let ann =
            crate::timeline::read_annotations_file(&tmp.path().join("annotations.csv")).unwrap();
        assert_eq!(ann, d.annotations);
    }
}
