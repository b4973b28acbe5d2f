//! Gradient-boosted regression trees under squared-error loss.
//!
//! Stagewise additive ensemble: each round fits one tree to the current
//! residuals with exact greedy variance-reduction splits and L2-regularized
//! mean leaves, scaled by the learning rate at prediction time. Fully
//! deterministic for a given config and seed.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::alignment::SupervisedDataset;
use crate::error::{Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbtConfig {
    pub n_rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_samples_leaf: usize,
    pub subsample: f64,
    pub l2_leaf_reg: f64,
    pub seed: u64,
}

impl Default for GbtConfig {
    fn default() -> Self {
        Self {
            n_rounds: 200,
            max_depth: 4,
            learning_rate: 0.1,
            min_samples_leaf: 1,
            subsample: 1.0,
            l2_leaf_reg: 1.0,
            seed: 0,
        }
    }
}

impl GbtConfig {
    pub fn validate(&self) -> Result<()> {
        let err = |field: &str, message: &str| Error::Config {
            field: field.into(),
            message: message.into(),
        };
        if self.n_rounds == 0 {
            return Err(err("n_rounds", "must be >= 1"));
        }
        if self.max_depth == 0 {
            return Err(err("max_depth", "must be >= 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(err("learning_rate", "must be in (0, 1]"));
        }
        if self.min_samples_leaf == 0 {
            return Err(err("min_samples_leaf", "must be >= 1"));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return Err(err("subsample", "must be in (0, 1]"));
        }
        if self.l2_leaf_reg < 0.0 {
            return Err(err("l2_leaf_reg", "must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// Binary regression tree stored as a node arena, root at index 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    /// Walk the tree; `x[feature] < threshold` descends left.
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    idx = if x[*feature] < *threshold { *left } else { *right };
                }
            }
        }
    }
}

/// Trained additive ensemble.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GbtModel {
    pub format_version: u32,
    pub feature_schema: Vec<String>,
    pub config: GbtConfig,
    pub base_prediction: f64,
    pub trees: Vec<Tree>,
    /// Training MSE after each boosting round.
    pub training_mse: Vec<f64>,
}

impl GbtModel {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<GbtModel> {
        let model: GbtModel = serde_json::from_str(text)?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Schema(format!(
                "unsupported model format version {} (expected {MODEL_FORMAT_VERSION})",
                model.format_version
            )));
        }
        Ok(model)
    }

    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<GbtModel> {
        GbtModel::from_json(&std::fs::read_to_string(path)?)
    }
}

struct SplitChoice {
    gain: f64,
    feature: usize,
    threshold: f64,
}

fn build_node(
    x: &[Vec<f64>],
    residuals: &[f64],
    indices: &[usize],
    depth: usize,
    cfg: &GbtConfig,
    nodes: &mut Vec<Node>,
) -> usize {
    let n = indices.len();
    let sum: f64 = indices.iter().map(|&i| residuals[i]).sum();
    let leaf_value = sum / (n as f64 + cfg.l2_leaf_reg);
    if depth >= cfg.max_depth || n < 2 * cfg.min_samples_leaf {
        nodes.push(Node::Leaf { value: leaf_value });
        return nodes.len() - 1;
    }

    let n_features = x[indices[0]].len();
    let parent_score = sum * sum / (n as f64 + cfg.l2_leaf_reg);
    let mut best: Option<SplitChoice> = None;
    let mut sorted = indices.to_vec();
    for feature in 0..n_features {
        sorted.sort_by(|&a, &b| x[a][feature].partial_cmp(&x[b][feature]).unwrap());
        let mut left_sum = 0.0;
        for i in 0..n - 1 {
            left_sum += residuals[sorted[i]];
            let n_left = i + 1;
            let n_right = n - n_left;
            if n_left < cfg.min_samples_leaf || n_right < cfg.min_samples_leaf {
                continue;
            }
            let lo = x[sorted[i]][feature];
            let hi = x[sorted[i + 1]][feature];
            if !(lo < hi) {
                continue;
            }
            let right_sum = sum - left_sum;
            let gain = left_sum * left_sum / (n_left as f64 + cfg.l2_leaf_reg)
                + right_sum * right_sum / (n_right as f64 + cfg.l2_leaf_reg)
                - parent_score;
            // strict improvement keeps the first (lowest feature, lowest
            // threshold) candidate on ties
            if gain > best.as_ref().map_or(1e-12, |b| b.gain) {
                best = Some(SplitChoice {
                    gain,
                    feature,
                    threshold: 0.5 * (lo + hi),
                });
            }
        }
    }

    let Some(split) = best else {
        nodes.push(Node::Leaf { value: leaf_value });
        return nodes.len() - 1;
    };
    let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = indices
        .iter()
        .partition(|&&i| x[i][split.feature] < split.threshold);
    let node_idx = nodes.len();
    nodes.push(Node::Leaf { value: 0.0 }); // placeholder
    let left = build_node(x, residuals, &left_idx, depth + 1, cfg, nodes);
    let right = build_node(x, residuals, &right_idx, depth + 1, cfg, nodes);
    nodes[node_idx] = Node::Split {
        feature: split.feature,
        threshold: split.threshold,
        left,
        right,
    };
    node_idx
}

/// Fit a boosted ensemble to the dataset.
pub fn fit(dataset: &SupervisedDataset, config: &GbtConfig) -> Result<GbtModel> {
    config.validate()?;
    if dataset.rows.is_empty() {
        return Err(Error::Domain("cannot fit on an empty dataset".into()));
    }
    let dim = dataset.feature_schema.len();
    let mut x: Vec<Vec<f64>> = Vec::with_capacity(dataset.rows.len());
    let mut y: Vec<f64> = Vec::with_capacity(dataset.rows.len());
    for (i, row) in dataset.rows.iter().enumerate() {
        if row.features.len() != dim {
            return Err(Error::Schema(format!(
                "row {i} has {} features, schema expects {dim}",
                row.features.len()
            )));
        }
        if row.features.iter().any(|v| !v.is_finite()) || !row.target_mbps.is_finite() {
            return Err(Error::Data(format!("non-finite value in row {i}")));
        }
        x.push(row.features.clone());
        y.push(row.target_mbps);
    }

    let n = y.len();
    let base = y.iter().sum::<f64>() / n as f64;
    let mut predictions = vec![base; n];
    let mut residuals: Vec<f64> = y.iter().zip(&predictions).map(|(t, p)| t - p).collect();
    let mut trees = Vec::with_capacity(config.n_rounds);
    let mut training_mse = Vec::with_capacity(config.n_rounds);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    for _ in 0..config.n_rounds {
        let indices: Vec<usize> = if config.subsample < 1.0 {
            let k = ((config.subsample * n as f64).round() as usize).clamp(1, n);
            let mut all: Vec<usize> = (0..n).collect();
            all.shuffle(&mut rng);
            let mut picked = all[..k].to_vec();
            picked.sort_unstable();
            picked
        } else {
            (0..n).collect()
        };
        let mut nodes = Vec::new();
        build_node(&x, &residuals, &indices, 0, config, &mut nodes);
        let tree = Tree { nodes };
        for i in 0..n {
            predictions[i] += config.learning_rate * tree.predict(&x[i]);
            residuals[i] = y[i] - predictions[i];
        }
        training_mse.push(residuals.iter().map(|r| r * r).sum::<f64>() / n as f64);
        trees.push(tree);
    }

    Ok(GbtModel {
        format_version: MODEL_FORMAT_VERSION,
        feature_schema: dataset.feature_schema.clone(),
        config: config.clone(),
        base_prediction: base,
        trees,
        training_mse,
    })
}

/// Predict one feature vector.
pub fn predict(model: &GbtModel, features: &[f64]) -> Result<f64> {
    if features.len() != model.feature_schema.len() {
        return Err(Error::Schema(format!(
            "feature vector length {} does not match schema length {}",
            features.len(),
            model.feature_schema.len()
        )));
    }
    Ok(model.base_prediction
        + model
            .trees
            .iter()
            .map(|t| model.config.learning_rate * t.predict(features))
            .sum::<f64>())
}
