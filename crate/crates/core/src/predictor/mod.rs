//! Window classifiers: a random forest and a single-feature threshold rule.

pub mod forest;

use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{err, Error, Result};
use crate::features::FeatureMatrix;

pub use forest::{Forest, ForestParams, Node, Tree};

const MODULE: &str = "predictor";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictorKind {
    TreeEnsemble,
    ThresholdBaseline,
}

impl FromStr for PredictorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tree_ensemble" | "forest" => Ok(Self::TreeEnsemble),
            "threshold_baseline" | "threshold" => Ok(Self::ThresholdBaseline),
            _ => Err(err!(Validation, MODULE, "unknown predictor kind '{s}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictorConfig {
    pub kind: PredictorKind,
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub rng_seed: u64,
    /// Split-search resolution per feature.
    pub max_bins: usize,
    pub min_samples_leaf: usize,
    /// An exact column name, or a per-channel feature name (e.g.
    /// `line_length`) that is averaged over channels.
    pub threshold_feature: String,
    /// `None` picks the value maximizing window-level F1 on the training set.
    pub threshold_value: Option<f64>,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        Self {
            kind: PredictorKind::TreeEnsemble,
            n_trees: 100,
            max_depth: None,
            rng_seed: 0,
            max_bins: 64,
            min_samples_leaf: 1,
            threshold_feature: "line_length".into(),
            threshold_value: None,
        }
    }
}

impl PredictorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.kind == PredictorKind::TreeEnsemble && self.n_trees == 0 {
            return Err(err!(Validation, MODULE, "n_trees must be >= 1"));
        }
        if self.min_samples_leaf == 0 || self.max_bins < 2 || self.max_bins > 256 {
            return Err(err!(
                Validation,
                MODULE,
                "need min_samples_leaf >= 1 and 2 <= max_bins <= 256"
            ));
        }
        if self.threshold_value.is_some_and(|v| !v.is_finite()) {
            return Err(err!(Validation, MODULE, "threshold_value must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelBody {
    Forest(Forest),
    Threshold { columns: Vec<usize>, value: f64 },
}

/// A fitted model with the config and column schema it was trained with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub config: PredictorConfig,
    pub columns: Vec<String>,
    pub body: ModelBody,
}

fn threshold_columns(columns: &[String], feature: &str) -> Result<Vec<usize>> {
    if let Some(i) = columns.iter().position(|c| c == feature) {
        return Ok(vec![i]);
    }
    let suffix = format!("_{feature}");
    let hits: Vec<usize> = (0..columns.len())
        .filter(|&i| columns[i].ends_with(&suffix))
        .collect();
    if hits.is_empty() {
        return Err(err!(
            Lookup,
            MODULE,
            "no column named '{feature}' or ending in '{suffix}'"
        ));
    }
    Ok(hits)
}

fn threshold_score(m: &FeatureMatrix, cols: &[usize]) -> Vec<f64> {
    (0..m.n_rows())
        .map(|r| cols.iter().map(|&c| f64::from(m.value(r, c))).sum::<f64>() / cols.len() as f64)
        .collect()
}

/// Threshold maximizing window-level F1 (predict 1 iff score > threshold);
/// ties go to the lowest threshold.
fn best_threshold(score: &[f64], labels: &[u8]) -> f64 {
    let mut order: Vec<usize> = (0..score.len()).collect();
    order.sort_by(|&a, &b| score[a].total_cmp(&score[b]));
    let pos = labels.iter().filter(|&&l| l == 1).count() as f64;
    // Threshold below everything: all predicted positive.
    let mut tp = pos;
    let mut fp = labels.len() as f64 - pos;
    let f1 = |tp: f64, fp: f64| {
        if tp == 0.0 {
            0.0
        } else {
            2.0 * tp / (2.0 * tp + fp + (pos - tp))
        }
    };
    let mut best = (f1(tp, fp), score[order[0]] - 1.0);
    let mut k = 0;
    while k < order.len() {
        let v = score[order[k]];
        while k < order.len() && score[order[k]] == v {
            if labels[order[k]] == 1 {
                tp -= 1.0;
            } else {
                fp -= 1.0;
            }
            k += 1;
        }
        let next = order.get(k).map(|&i| score[i]);
        let cut = next.map_or(v + 1.0, |n| v + (n - v) / 2.0);
        let s = f1(tp, fp);
        if s > best.0 {
            best = (s, cut);
        }
    }
    best.1
}

pub fn fit(train: &FeatureMatrix, cfg: &PredictorConfig) -> Result<Model> {
    cfg.validate()?;
    let positives = train.labels.iter().filter(|&&l| l == 1).count();
    let single_class = positives == 0 || positives == train.n_rows();
    let body = match cfg.kind {
        PredictorKind::TreeEnsemble => {
            if train.n_rows() == 0 || single_class {
                return Err(err!(
                    Training,
                    MODULE,
                    "training set of {} windows has {} seizure windows; a tree ensemble needs both classes, use kind = threshold_baseline with an explicit threshold_value",
                    train.n_rows(),
                    positives
                ));
            }
            ModelBody::Forest(Forest::fit(
                train,
                ForestParams {
                    n_trees: cfg.n_trees,
                    max_depth: cfg.max_depth,
                    max_bins: cfg.max_bins,
                    min_samples_leaf: cfg.min_samples_leaf,
                    seed: cfg.rng_seed,
                },
            ))
        }
        PredictorKind::ThresholdBaseline => {
            let columns = threshold_columns(&train.columns, &cfg.threshold_feature)?;
            let value = match cfg.threshold_value {
                Some(v) => v,
                None if train.n_rows() == 0 || single_class => {
                    return Err(err!(
                        Training,
                        MODULE,
                        "cannot choose a threshold from single-class training data; set threshold_value"
                    ))
                }
                None => best_threshold(&threshold_score(train, &columns), &train.labels),
            };
            ModelBody::Threshold { columns, value }
        }
    };
    Ok(Model {
        config: cfg.clone(),
        columns: train.columns.clone(),
        body,
    })
}

impl Model {
    /// One label per window of `test`.
    pub fn predict(&self, test: &FeatureMatrix) -> Result<Vec<u8>> {
        test.check_columns(&self.columns)?;
        Ok(match &self.body {
            ModelBody::Forest(f) => f.predict(test),
            ModelBody::Threshold { columns, value } => threshold_score(test, columns)
                .into_iter()
                .map(|s| u8::from(s > *value))
                .collect(),
        })
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}
