//! Sliding-window feature extraction.
//!
//! Each channel is band-pass filtered, cut into windows of `window_s` every
//! `step_s`, and summarized by 19 values: mean amplitude, line length,
//! absolute and relative power in 7 bands, total power, normalized spectral
//! entropy over the 7 bands, and the peak frequency of the periodogram.
//!
//! Channels are processed independently (in parallel) and written into a
//! row-major matrix in channel order, so results do not depend on the
//! number of threads.

pub mod filter;
pub mod spectral;

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{err, Error, Result};
use crate::partition::DataFile;
use crate::recording::SignalReader;
use crate::timeline::events_to_labels;

pub use filter::{bandpass_filter, butter_bandpass, Sos};
pub use spectral::{band_powers, line_length, mean_amplitude, BandPowers, Periodogram};

const MODULE: &str = "features";

pub const FEATURES_PER_CHANNEL: usize = 19;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowingConfig {
    pub window_s: f64,
    pub step_s: f64,
}

impl Default for WindowingConfig {
    fn default() -> Self {
        Self {
            window_s: 4.0,
            step_s: 0.5,
        }
    }
}

impl WindowingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_s > 0.0 && self.step_s <= self.window_s && self.window_s.is_finite()) {
            return Err(err!(
                Validation,
                MODULE,
                "windowing needs 0 < step_s <= window_s, got window {} s, step {} s",
                self.window_s,
                self.step_s
            ));
        }
        Ok(())
    }

    pub fn window_samples(&self, fs: f64) -> usize {
        (self.window_s * fs).round() as usize
    }

    pub fn step_samples(&self, fs: f64) -> usize {
        ((self.step_s * fs).round() as usize).max(1)
    }

    /// Number of full windows in `n` samples.
    pub fn n_windows(&self, n: usize, fs: f64) -> usize {
        let w = self.window_samples(fs);
        if n < w || w == 0 {
            0
        } else {
            (n - w) / self.step_samples(fs) + 1
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub lo_hz: f64,
    pub hi_hz: f64,
    pub order: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            lo_hz: 1.0,
            hi_hz: 20.0,
            order: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct FeatureConfig {
    pub windowing: WindowingConfig,
    /// `None` skips the band-pass.
    pub filter: Option<FilterConfig>,
}

impl FeatureConfig {
    pub fn with_windowing(windowing: WindowingConfig) -> Self {
        Self {
            windowing,
            filter: Some(FilterConfig::default()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandDefinition {
    pub name: String,
    pub lo_hz: f64,
    pub hi_hz: f64,
}

impl BandDefinition {
    pub fn new(name: &str, lo_hz: f64, hi_hz: f64) -> Self {
        Self {
            name: name.to_string(),
            lo_hz,
            hi_hz,
        }
    }

    pub fn validate(&self, fs: f64) -> Result<()> {
        if !(self.lo_hz >= 0.0 && self.lo_hz < self.hi_hz && self.hi_hz <= fs / 2.0) {
            return Err(err!(
                Validation,
                MODULE,
                "band {} [{}, {}) must satisfy 0 <= lo < hi <= fs/2 = {}",
                self.name,
                self.lo_hz,
                self.hi_hz,
                fs / 2.0
            ));
        }
        Ok(())
    }
}

pub fn default_bands() -> Vec<BandDefinition> {
    vec![
        BandDefinition::new("delta", 0.5, 4.0),
        BandDefinition::new("theta", 4.0, 8.0),
        BandDefinition::new("alpha", 8.0, 12.0),
        BandDefinition::new("beta", 12.0, 30.0),
        BandDefinition::new("gamma", 30.0, 45.0),
        BandDefinition::new("low_a", 0.0, 0.5),
        BandDefinition::new("low_b", 0.1, 0.5),
    ]
}

/// Per-channel feature names in column order.
pub fn feature_names() -> Vec<String> {
    let bands = default_bands();
    let mut v = vec!["mean_amp".to_string(), "line_length".to_string()];
    v.extend(bands.iter().map(|b| format!("abs_{}", b.name)));
    v.extend(bands.iter().map(|b| format!("rel_{}", b.name)));
    v.extend(["total_power", "spectral_entropy", "peak_freq"].map(String::from));
    debug_assert_eq!(v.len(), FEATURES_PER_CHANNEL);
    v
}

pub fn column_names(channels: &[String]) -> Vec<String> {
    let feats = feature_names();
    channels
        .iter()
        .flat_map(|c| feats.iter().map(move |f| format!("{c}_{f}")))
        .collect()
}

/// Windows x features, row-major, with per-window start time and label.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub columns: Vec<String>,
    pub window_times: Vec<f64>,
    pub labels: Vec<u8>,
    data: Vec<f32>,
}

impl FeatureMatrix {
    pub fn new(
        columns: Vec<String>,
        window_times: Vec<f64>,
        labels: Vec<u8>,
        data: Vec<f32>,
    ) -> Result<Self> {
        if window_times.len() != labels.len() || data.len() != labels.len() * columns.len() {
            return Err(err!(
                Schema,
                MODULE,
                "matrix shape mismatch: {} times, {} labels, {} values for {} columns",
                window_times.len(),
                labels.len(),
                data.len(),
                columns.len()
            ));
        }
        Ok(Self {
            columns,
            window_times,
            labels,
            data,
        })
    }

    pub fn empty(columns: Vec<String>) -> Self {
        Self {
            columns,
            window_times: Vec::new(),
            labels: Vec::new(),
            data: Vec::new(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        let c = self.n_cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn value(&self, row: usize, col: usize) -> f32 {
        self.data[row * self.n_cols() + col]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn check_columns(&self, expected: &[String]) -> Result<()> {
        if self.columns != expected {
            let first = self
                .columns
                .iter()
                .zip(expected)
                .position(|(a, b)| a != b)
                .unwrap_or(self.columns.len().min(expected.len()));
            return Err(err!(
                Schema,
                MODULE,
                "feature columns differ: expected {} columns, got {} (first difference at column {first})",
                expected.len(),
                self.columns.len()
            ));
        }
        Ok(())
    }

    /// Stacks matrices with identical columns.
    pub fn concat(parts: &[&FeatureMatrix]) -> Result<FeatureMatrix> {
        let Some(first) = parts.first() else {
            return Err(err!(Schema, MODULE, "nothing to concatenate"));
        };
        let mut out = FeatureMatrix::empty(first.columns.clone());
        let rows: usize = parts.iter().map(|p| p.n_rows()).sum();
        out.data.reserve(rows * first.n_cols());
        for p in parts {
            p.check_columns(&first.columns)?;
            out.window_times.extend_from_slice(&p.window_times);
            out.labels.extend_from_slice(&p.labels);
            out.data.extend_from_slice(&p.data);
        }
        Ok(out)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["t_start".to_string(), "label".to_string()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header)?;
        for i in 0..self.n_rows() {
            let mut rec = vec![self.window_times[i].to_string(), self.labels[i].to_string()];
            rec.extend(self.row(i).iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()
            .map_err(|e| Error::Config(format!("csv flush failed: {e}")))?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    pub fn read_csv<R: std::io::Read>(reader: R) -> Result<FeatureMatrix> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers()?.clone();
        if header.len() < 2 || &header[0] != "t_start" || &header[1] != "label" {
            return Err(err!(
                Schema,
                MODULE,
                "feature CSV must start with t_start,label"
            ));
        }
        let columns: Vec<String> = header.iter().skip(2).map(String::from).collect();
        let mut m = FeatureMatrix::empty(columns);
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let bad = |what: &str| err!(Schema, MODULE, "feature CSV row {}: bad {what}", line + 1);
            m.window_times
                .push(rec[0].parse().map_err(|_| bad("t_start"))?);
            let label: u8 = rec[1].parse().map_err(|_| bad("label"))?;
            if label > 1 {
                return Err(bad("label"));
            }
            m.labels.push(label);
            for v in rec.iter().skip(2) {
                m.data.push(v.parse().map_err(|_| bad("value"))?);
            }
        }
        FeatureMatrix::new(m.columns, m.window_times, m.labels, m.data)
    }

    pub fn read_csv_file(path: &Path) -> Result<FeatureMatrix> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(f))
    }
}

/// Window label by strict majority of its sample labels.
pub fn window_labels(sample_labels: &[u8], window: usize, step: usize) -> Vec<u8> {
    if window == 0 || sample_labels.len() < window {
        return Vec::new();
    }
    let mut prefix = Vec::with_capacity(sample_labels.len() + 1);
    prefix.push(0usize);
    for &l in sample_labels {
        prefix.push(prefix.last().unwrap() + usize::from(l));
    }
    let n = (sample_labels.len() - window) / step + 1;
    (0..n)
        .map(|j| {
            let a = j * step;
            u8::from(2 * (prefix[a + window] - prefix[a]) > window)
        })
        .collect()
}

/// Spreads window labels back onto samples: window 0 labels its full span,
/// window `j` labels the `step` samples it adds beyond window `j-1`, and
/// samples after the last window take the last window's label.
pub fn project_to_samples(labels: &[u8], n_samples: usize, window: usize, step: usize) -> Vec<u8> {
    let mut out = vec![0u8; n_samples];
    let Some(&last) = labels.last() else {
        return out;
    };
    let mut filled = 0;
    for (j, &l) in labels.iter().enumerate() {
        let end = (j * step + window).min(n_samples);
        out[filled..end].fill(l);
        filled = end;
    }
    out[filled..].fill(last);
    out
}

struct ChannelPlan<'a> {
    fs: f64,
    window: usize,
    step: usize,
    rows: usize,
    bins: &'a [Vec<usize>],
    filter: Option<&'a Sos>,
}

/// Features of one channel, `rows x 19` row-major.
fn channel_features(signal: Vec<f64>, plan: &ChannelPlan) -> Result<Vec<f32>> {
    let x = match plan.filter {
        Some(sos) => sos.filtfilt(&signal),
        None => signal,
    };
    let mut pg = Periodogram::new(plan.window, plan.fs);
    let df = pg.bin_width();
    let mut out = Vec::with_capacity(plan.rows * FEATURES_PER_CHANNEL);
    for j in 0..plan.rows {
        let w = &x[j * plan.step..j * plan.step + plan.window];
        out.push(mean_amplitude(w) as f32);
        out.push(line_length(w)? as f32);
        let psd = pg.compute(w);
        let bp = spectral::powers_from_psd(psd, df, plan.bins);
        let total: f64 = psd.iter().sum::<f64>() * df;
        let peak = psd
            .iter()
            .enumerate()
            .skip(1)
            .fold(
                (0usize, 0.0f64),
                |best, (k, &p)| if p > best.1 { (k, p) } else { best },
            )
            .0;
        out.extend(bp.absolute.iter().map(|&v| v as f32));
        out.extend(bp.relative.iter().map(|&v| v as f32));
        out.push(total as f32);
        out.push(spectral::spectral_entropy(&bp.relative) as f32);
        out.push((peak as f64 * df) as f32);
    }
    Ok(out)
}

/// Extracts features from channels produced on demand by `load`.
/// `sample_labels` gives the ground truth per sample and fixes the length.
pub fn extract_with<F>(
    channels: &[String],
    load: F,
    fs: f64,
    sample_labels: &[u8],
    cfg: &FeatureConfig,
) -> Result<FeatureMatrix>
where
    F: Fn(usize) -> Result<Vec<f64>> + Sync,
{
    cfg.windowing.validate()?;
    let n = sample_labels.len();
    let window = cfg.windowing.window_samples(fs);
    let step = cfg.windowing.step_samples(fs);
    if window < 2 {
        return Err(err!(
            Validation,
            MODULE,
            "window must span at least 2 samples"
        ));
    }
    if n < window {
        return Err(err!(
            Capacity,
            MODULE,
            "file of {} s is shorter than the {} s window",
            n as f64 / fs,
            cfg.windowing.window_s
        ));
    }
    let bands = default_bands();
    for b in &bands {
        b.validate(fs)?;
    }
    let sos = cfg
        .filter
        .map(|f| butter_bandpass(f.order, f.lo_hz, f.hi_hz, fs))
        .transpose()?;
    let freqs: Vec<f64> = (0..=window / 2)
        .map(|k| k as f64 * fs / window as f64)
        .collect();
    let bins = spectral::band_bins(&freqs, &bands);
    let rows = cfg.windowing.n_windows(n, fs);
    let plan = ChannelPlan {
        fs,
        window,
        step,
        rows,
        bins: &bins,
        filter: sos.as_ref(),
    };

    let per_channel: Vec<Vec<f32>> = (0..channels.len())
        .into_par_iter()
        .map(|c| {
            let x = load(c)?;
            if x.len() != n {
                return Err(err!(
                    Alignment,
                    MODULE,
                    "channel {} has {} samples but the labels cover {n}",
                    channels[c],
                    x.len()
                ));
            }
            channel_features(x, &plan)
        })
        .collect::<Result<_>>()?;

    let n_cols = channels.len() * FEATURES_PER_CHANNEL;
    let mut data = vec![0f32; rows * n_cols];
    for (c, feats) in per_channel.iter().enumerate() {
        for j in 0..rows {
            let dst = j * n_cols + c * FEATURES_PER_CHANNEL;
            data[dst..dst + FEATURES_PER_CHANNEL]
                .copy_from_slice(&feats[j * FEATURES_PER_CHANNEL..(j + 1) * FEATURES_PER_CHANNEL]);
        }
    }
    let times = (0..rows).map(|j| (j * step) as f64 / fs).collect();
    FeatureMatrix::new(
        column_names(channels),
        times,
        window_labels(sample_labels, window, step),
        data,
    )
}

/// Ground-truth sample labels of an arranged file.
pub fn file_sample_labels(file: &DataFile) -> Result<Vec<u8>> {
    let n = file.n_samples();
    let mut labels =
        events_to_labels(&file.events, file.meta.fs, file.meta.duration_s, 0.0)?.into_labels();
    labels.resize(n, 0);
    Ok(labels)
}

/// Reads one channel of an arranged file by concatenating its segments.
pub fn read_file_channel(
    file: &DataFile,
    reader: &dyn SignalReader,
    channel: usize,
) -> Result<Vec<f64>> {
    let mut x = Vec::with_capacity(file.n_samples());
    for s in &file.segments {
        x.extend(
            reader
                .read(s.recording, channel, s.start, s.end)?
                .into_iter()
                .map(f64::from),
        );
    }
    Ok(x)
}

pub fn extract_features(
    file: &DataFile,
    reader: &dyn SignalReader,
    channels: &[String],
    cfg: &FeatureConfig,
) -> Result<FeatureMatrix> {
    let labels = file_sample_labels(file)?;
    extract_with(
        channels,
        |c| read_file_channel(file, reader, c),
        file.meta.fs,
        &labels,
        cfg,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn window_counts() {
        let fs = 256.0;
        let c = WindowingConfig::default();
        assert_eq!(c.n_windows((60.0 * fs) as usize, fs), 113);
        assert_eq!(c.n_windows((4.0 * fs) as usize, fs), 1);
        assert_eq!(c.n_windows((3.9 * fs) as usize, fs), 0);
        let nonoverlap = WindowingConfig {
            window_s: 4.0,
            step_s: 4.0,
        };
        assert_eq!(nonoverlap.n_windows((60.0 * fs) as usize, fs), 15);
        assert!(WindowingConfig {
            window_s: 4.0,
            step_s: 5.0
        }
        .validate()
        .is_err());
    }

    #[test]
    fn names_and_count() {
        assert_eq!(feature_names().len(), FEATURES_PER_CHANNEL);
        let cols = column_names(&["A".into(), "B".into()]);
        assert_eq!(cols.len(), 38);
        assert_eq!(cols[0], "A_mean_amp");
        assert_eq!(cols[19], "B_mean_amp");
    }

    #[test]
    fn majority_labels_and_projection() {
        let l = [0, 0, 1, 1, 1, 1, 0, 0];
        assert_eq!(window_labels(&l, 4, 2), vec![0, 1, 0]);
        assert_eq!(window_labels(&l, 4, 1), vec![0, 1, 1, 1, 0]);
        assert_eq!(
            project_to_samples(&[1, 0, 1], 9, 4, 2),
            vec![1, 1, 1, 1, 0, 0, 1, 1, 1]
        );
        assert_eq!(project_to_samples(&[], 3, 4, 2), vec![0, 0, 0]);
    }

    fn sine_channels(fs: f64, secs: f64) -> (Vec<String>, Vec<Vec<f64>>) {
        let n = (fs * secs) as usize;
        let names = vec!["X".to_string(), "Y".to_string(), "Z".to_string()];
        let sig = (0..3)
            .map(|c| {
                (0..n)
                    .map(|i| {
                        let t = i as f64 / fs;
                        (2.0 * std::f64::consts::PI * (3.0 + 2.0 * c as f64) * t).sin()
                            * (1.0 + c as f64)
                            + 0.1 * ((i * 7919 + c * 104_729) % 1000) as f64 / 1000.0
                    })
                    .collect()
            })
            .collect();
        (names, sig)
    }

    #[test]
    fn extraction_shape_finite_and_channel_order_invariant() {
        let fs = 128.0;
        let (names, sig) = sine_channels(fs, 30.0);
        let labels = vec![0u8; sig[0].len()];
        let cfg = FeatureConfig::with_windowing(WindowingConfig::default());
        let m = extract_with(&names, |c| Ok(sig[c].clone()), fs, &labels, &cfg).unwrap();
        assert_eq!(m.n_rows(), 53);
        assert_eq!(m.n_cols(), 3 * FEATURES_PER_CHANNEL);
        assert!(m.data().iter().all(|v| v.is_finite()));
        // Relative powers per channel sum to one.
        for r in 0..m.n_rows() {
            for c in 0..3 {
                let base = c * FEATURES_PER_CHANNEL + 9;
                let s: f32 = (0..7).map(|k| m.value(r, base + k)).sum();
                assert!((s - 1.0).abs() < 1e-5);
            }
        }
        // Reversing channel order permutes column blocks and nothing else.
        let rev: Vec<String> = names.iter().rev().cloned().collect();
        let m2 = extract_with(&rev, |c| Ok(sig[2 - c].clone()), fs, &labels, &cfg).unwrap();
        for r in 0..m.n_rows() {
            for c in 0..3 {
                let a = &m.row(r)[c * 19..(c + 1) * 19];
                let b = &m2.row(r)[(2 - c) * 19..(3 - c) * 19];
                assert_eq!(a, b);
            }
        }
        // Peak frequency of channel Z is its 7 Hz tone.
        assert!((m.value(10, 2 * 19 + 18) - 7.0).abs() < 0.3);
    }

    #[test]
    fn too_short_is_capacity_error() {
        let cfg = FeatureConfig::default();
        let r = extract_with(
            &["A".into()],
            |_| Ok(vec![0.0; 100]),
            256.0,
            &[0; 100],
            &cfg,
        );
        assert!(matches!(r, Err(Error::Capacity { .. })));
    }

    #[test]
    fn csv_round_trip() {
        let fs = 128.0;
        let (names, sig) = sine_channels(fs, 10.0);
        let mut labels = vec![0u8; sig[0].len()];
        labels[200..1000].fill(1);
        let m = extract_with(
            &names,
            |c| Ok(sig[c].clone()),
            fs,
            &labels,
            &FeatureConfig::default(),
        )
        .unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t_start,label,X_mean_amp,X_line_length"));
        assert_eq!(FeatureMatrix::read_csv(buf.as_slice()).unwrap(), m);
        assert!(m.labels.contains(&1));
    }

    #[test]
    fn concat_checks_schema() {
        let a = FeatureMatrix::new(vec!["a".into()], vec![0.0], vec![0], vec![1.0]).unwrap();
        let b = FeatureMatrix::new(vec!["b".into()], vec![0.0], vec![1], vec![2.0]).unwrap();
        assert!(matches!(
            FeatureMatrix::concat(&[&a, &b]),
            Err(Error::Schema { .. })
        ));
        let c = FeatureMatrix::concat(&[&a, &a]).unwrap();
        assert_eq!(c.n_rows(), 2);
    }

    proptest! {
        #[test]
        fn window_count_formula(dur_steps in 0usize..400, ws in 1usize..40, wss_frac in 1usize..=8) {
            // Durations and windows on a 0.125 s grid at 64 Hz.
            let fs = 64.0;
            let window_s = ws as f64 * 0.125;
            let step_s = (window_s * wss_frac as f64 / 8.0 / 0.125).ceil().max(1.0) * 0.125;
            prop_assume!(step_s <= window_s);
            let cfg = WindowingConfig { window_s, step_s };
            let dur = dur_steps as f64 * 0.125;
            let n = (dur * fs).round() as usize;
            let expect = if dur < window_s { 0 } else { ((dur - window_s) / step_s + 1e-9).floor() as usize + 1 };
            prop_assert_eq!(cfg.n_windows(n, fs), expect);
        }

        #[test]
        fn projection_is_consistent(labels in proptest::collection::vec(0u8..=1, 1..50), w in 1usize..10, s in 1usize..10, extra in 0usize..10) {
            prop_assume!(s <= w);
            let n = w + (labels.len() - 1) * s + extra;
            let out = project_to_samples(&labels, n, w, s);
            prop_assert_eq!(out.len(), n);
            // The last sample of window j's span carries label j.
            for (j, &l) in labels.iter().enumerate() {
                prop_assert_eq!(out[j * s + w - 1], l);
            }
        }
    }
}
