//! Flat key/value experiment configuration (TOML).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::edf::DuplicatePolicy;
use crate::error::{err, Error, Result};
use crate::features::{FeatureConfig, FilterConfig, WindowingConfig};
use crate::metrics::Aggregation;
use crate::partition::{Arrangement, Scheme, Scope};
use crate::postprocess::PostprocessConfig;
use crate::predictor::{PredictorConfig, PredictorKind};
use crate::synth::{MeanSd, SynthConfig};

const MODULE: &str = "experiment";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    #[default]
    Synthetic,
    Edf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub source: SourceKind,
    /// A saved recording set (from `synth` or `ingest`); overrides the
    /// synthetic generator and directory scan when set.
    pub recordings: Option<PathBuf>,
    pub data_dir: Option<PathBuf>,
    /// Defaults to `<data_dir>/annotations.csv`.
    pub annotations: Option<PathBuf>,
    pub duplicate_channels: DuplicatePolicy,
    /// Channels read from EDF files; empty selects the 18 common CHB-MIT
    /// bipolar channels.
    pub channels: Vec<String>,

    /// `FactK`, `StoS` or `WinXh`.
    pub arrangement: String,
    pub first_min_h: f64,
    pub first_min_seizures: usize,
    /// `l1o` or `tscv`; ignored for generalized scope.
    pub cv: String,
    pub scope: String,

    pub window_s: f64,
    pub step_s: f64,
    pub filter: bool,
    pub filter_lo_hz: f64,
    pub filter_hi_hz: f64,
    pub filter_order: usize,

    pub smooth_window_s: f64,
    pub merge_gap_s: f64,
    pub min_event_s: f64,

    pub predictor: String,
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub max_bins: usize,
    pub min_samples_leaf: usize,
    pub threshold_feature: String,
    pub threshold_value: Option<f64>,

    pub aggregation: Aggregation,
    pub out: PathBuf,
    pub seed: u64,

    pub synth_seed: Option<u64>,
    pub synth_n_subjects: usize,
    pub synth_hours_per_subject: f64,
    pub synth_file_hours: f64,
    pub synth_fs: f64,
    pub synth_n_channels: usize,
    pub synth_seizures_mean: f64,
    pub synth_seizures_sd: f64,
    pub synth_seizures_min: f64,
    pub synth_seizure_len_mean: f64,
    pub synth_seizure_len_sd: f64,
    pub synth_seizure_len_min: f64,
    pub synth_seizure_freq_hz: f64,
    pub synth_seizure_gain: f64,
    pub synth_subject_variability: f64,
    pub synth_background_uv: f64,
    pub synth_artifact_rate_per_h: f64,
    pub synth_artifact_gain: f64,
    pub synth_rhythmic_artifact_fraction: f64,
    pub synth_artifact_max_s: f64,
    pub synth_artifact_freq_spread: f64,
    pub synth_seizure_jitter: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let s = SynthConfig::default();
        let w = WindowingConfig::default();
        let f = FilterConfig::default();
        let p = PostprocessConfig::default();
        let m = PredictorConfig::default();
        Self {
            source: SourceKind::Synthetic,
            recordings: None,
            data_dir: None,
            annotations: None,
            duplicate_channels: DuplicatePolicy::default(),
            channels: Vec::new(),
            arrangement: "Fact1".into(),
            first_min_h: 5.0,
            first_min_seizures: 1,
            cv: "l1o".into(),
            scope: "personalized".into(),
            window_s: w.window_s,
            step_s: w.step_s,
            filter: true,
            filter_lo_hz: f.lo_hz,
            filter_hi_hz: f.hi_hz,
            filter_order: f.order,
            smooth_window_s: p.smooth_window_s,
            merge_gap_s: p.merge_gap_s,
            min_event_s: p.min_event_s,
            predictor: "tree_ensemble".into(),
            n_trees: m.n_trees,
            max_depth: m.max_depth,
            max_bins: m.max_bins,
            min_samples_leaf: m.min_samples_leaf,
            threshold_feature: m.threshold_feature,
            threshold_value: m.threshold_value,
            aggregation: Aggregation::default(),
            out: PathBuf::from("runs/experiment"),
            seed: 0,
            synth_seed: None,
            synth_n_subjects: s.n_subjects,
            synth_hours_per_subject: s.hours_per_subject,
            synth_file_hours: s.file_hours,
            synth_fs: s.fs,
            synth_n_channels: s.n_channels,
            synth_seizures_mean: s.seizures_per_subject.mean,
            synth_seizures_sd: s.seizures_per_subject.sd,
            synth_seizures_min: s.seizures_per_subject.min,
            synth_seizure_len_mean: s.seizure_len_s.mean,
            synth_seizure_len_sd: s.seizure_len_s.sd,
            synth_seizure_len_min: s.seizure_len_s.min,
            synth_seizure_freq_hz: s.seizure_freq_hz,
            synth_seizure_gain: s.seizure_gain,
            synth_subject_variability: s.subject_variability,
            synth_background_uv: s.background_uv,
            synth_artifact_rate_per_h: s.artifact_rate_per_h,
            synth_artifact_gain: s.artifact_gain,
            synth_rhythmic_artifact_fraction: s.rhythmic_artifact_fraction,
            synth_artifact_max_s: s.artifact_max_s,
            synth_artifact_freq_spread: s.artifact_freq_spread,
            synth_seizure_jitter: s.seizure_jitter,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg = Self::parse_toml(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses without checking cross-field invariants; call
    /// [`validate`](Self::validate) before use.
    pub fn parse_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn arrangement(&self) -> Result<Arrangement> {
        let a: Arrangement = self.arrangement.parse()?;
        Ok(match a {
            Arrangement::Window { hours, .. } => Arrangement::Window {
                hours,
                first_min_h: self.first_min_h,
                first_min_seizures: self.first_min_seizures,
            },
            other => other,
        })
    }

    pub fn scheme(&self) -> Result<Scheme> {
        self.cv.parse()
    }

    pub fn scope(&self) -> Result<Scope> {
        self.scope.parse()
    }

    pub fn windowing(&self) -> WindowingConfig {
        WindowingConfig {
            window_s: self.window_s,
            step_s: self.step_s,
        }
    }

    pub fn feature_config(&self) -> FeatureConfig {
        FeatureConfig {
            windowing: self.windowing(),
            filter: self.filter.then_some(FilterConfig {
                lo_hz: self.filter_lo_hz,
                hi_hz: self.filter_hi_hz,
                order: self.filter_order,
            }),
        }
    }

    pub fn postprocess(&self) -> PostprocessConfig {
        PostprocessConfig {
            smooth_window_s: self.smooth_window_s,
            merge_gap_s: self.merge_gap_s,
            min_event_s: self.min_event_s,
        }
    }

    pub fn predictor_config(&self) -> Result<PredictorConfig> {
        let kind: PredictorKind = self.predictor.parse()?;
        Ok(PredictorConfig {
            kind,
            n_trees: self.n_trees,
            max_depth: self.max_depth,
            rng_seed: self.seed,
            max_bins: self.max_bins,
            min_samples_leaf: self.min_samples_leaf,
            threshold_feature: self.threshold_feature.clone(),
            threshold_value: self.threshold_value,
        })
    }

    pub fn synth_config(&self) -> SynthConfig {
        SynthConfig {
            n_subjects: self.synth_n_subjects,
            hours_per_subject: self.synth_hours_per_subject,
            file_hours: self.synth_file_hours,
            fs: self.synth_fs,
            n_channels: self.synth_n_channels,
            seizures_per_subject: MeanSd {
                mean: self.synth_seizures_mean,
                sd: self.synth_seizures_sd,
                min: self.synth_seizures_min,
            },
            seizure_len_s: MeanSd {
                mean: self.synth_seizure_len_mean,
                sd: self.synth_seizure_len_sd,
                min: self.synth_seizure_len_min,
            },
            seizure_freq_hz: self.synth_seizure_freq_hz,
            seizure_gain: self.synth_seizure_gain,
            subject_variability: self.synth_subject_variability,
            background_uv: self.synth_background_uv,
            artifact_rate_per_h: self.synth_artifact_rate_per_h,
            artifact_gain: self.synth_artifact_gain,
            rhythmic_artifact_fraction: self.synth_rhythmic_artifact_fraction,
            artifact_max_s: self.synth_artifact_max_s,
            artifact_freq_spread: self.synth_artifact_freq_spread,
            seizure_jitter: self.synth_seizure_jitter,
            rng_seed: self.synth_seed.unwrap_or(self.seed),
        }
    }

    /// Copies generator settings from `s` into the flat fields.
    pub fn set_synth(&mut self, s: &SynthConfig) {
        self.synth_seed = Some(s.rng_seed);
        self.synth_n_subjects = s.n_subjects;
        self.synth_hours_per_subject = s.hours_per_subject;
        self.synth_file_hours = s.file_hours;
        self.synth_fs = s.fs;
        self.synth_n_channels = s.n_channels;
        self.synth_seizures_mean = s.seizures_per_subject.mean;
        self.synth_seizures_sd = s.seizures_per_subject.sd;
        self.synth_seizures_min = s.seizures_per_subject.min;
        self.synth_seizure_len_mean = s.seizure_len_s.mean;
        self.synth_seizure_len_sd = s.seizure_len_s.sd;
        self.synth_seizure_len_min = s.seizure_len_s.min;
        self.synth_seizure_freq_hz = s.seizure_freq_hz;
        self.synth_seizure_gain = s.seizure_gain;
        self.synth_subject_variability = s.subject_variability;
        self.synth_background_uv = s.background_uv;
        self.synth_artifact_rate_per_h = s.artifact_rate_per_h;
        self.synth_artifact_gain = s.artifact_gain;
        self.synth_rhythmic_artifact_fraction = s.rhythmic_artifact_fraction;
        self.synth_artifact_max_s = s.artifact_max_s;
        self.synth_artifact_freq_spread = s.artifact_freq_spread;
        self.synth_seizure_jitter = s.seizure_jitter;
    }

    pub fn validate(&self) -> Result<()> {
        let arrangement = self.arrangement()?;
        let scope = self.scope()?;
        let scheme = self.scheme()?;
        if scope == Scope::Personalized
            && scheme == Scheme::L1O
            && !arrangement.one_seizure_per_file()
        {
            return Err(err!(
                Validation,
                MODULE,
                "leave-one-out needs one seizure per file; arrangement {arrangement} does not guarantee that (use FactK or StoS, or cv = tscv)"
            ));
        }
        self.windowing().validate()?;
        self.postprocess().validate()?;
        self.predictor_config()?.validate()?;
        if self.source == SourceKind::Edf && self.recordings.is_none() && self.data_dir.is_none() {
            return Err(err!(
                Validation,
                MODULE,
                "source = edf needs data_dir or recordings"
            ));
        }
        if self.source == SourceKind::Synthetic && self.recordings.is_none() {
            self.synth_config().validate()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = ExperimentConfig::default();
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn partial_file_fills_defaults() {
        let cfg = ExperimentConfig::from_toml_str(
            "arrangement = \"Win4h\"\ncv = \"tscv\"\nstep_s = 1.0\naggregation = \"macro\"\n",
        )
        .unwrap();
        assert_eq!(
            cfg.arrangement().unwrap(),
            Arrangement::Window {
                hours: 4.0,
                first_min_h: 5.0,
                first_min_seizures: 1
            }
        );
        assert_eq!(cfg.aggregation, Aggregation::Pooled);
        assert_eq!(cfg.windowing().step_s, 1.0);
    }

    #[test]
    fn invalid_combinations() {
        assert!(
            ExperimentConfig::from_toml_str("arrangement = \"Win1h\"\ncv = \"l1o\"\n").is_err()
        );
        assert!(ExperimentConfig::from_toml_str(
            "arrangement = \"Win1h\"\ncv = \"l1o\"\nscope = \"generalized\"\n"
        )
        .is_ok());
        assert!(ExperimentConfig::from_toml_str("bogus_key = 1\n").is_err());
        assert!(ExperimentConfig::from_toml_str("step_s = 8.0\n").is_err());
        assert!(ExperimentConfig::from_toml_str("source = \"edf\"\n").is_err());
    }
}
