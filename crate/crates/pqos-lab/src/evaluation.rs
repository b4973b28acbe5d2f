//! Relative-error metric, the feature-set x vehicle-pair experiment grid,
//! and permutation feature importance.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::alignment::{build_dataset, FeatureSetKind, SupervisedDataset};
use crate::error::{Error, Result};
use crate::gbt::{fit, predict, GbtConfig, GbtModel};
use crate::trace::{resample, VehicleTrace};

pub const DEFAULT_CLAMP_MBPS: f64 = 1.0;

/// Sum of absolute errors normalized by the sum of clamped true values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MrpeResult {
    pub mrpe_percent: f64,
    pub n_rows: usize,
    pub clamp_mbps: f64,
}

/// 100 * sum |pred - target| / sum max(target, clamp).
pub fn mrpe(predictions: &[f64], targets: &[f64], clamp_mbps: f64) -> Result<MrpeResult> {
    if predictions.is_empty() {
        return Err(Error::Domain("mrpe of empty vectors is undefined".into()));
    }
    if predictions.len() != targets.len() {
        return Err(Error::Domain(format!(
            "mrpe length mismatch: {} predictions vs {} targets",
            predictions.len(),
            targets.len()
        )));
    }
    let abs_err: f64 = predictions
        .iter()
        .zip(targets)
        .map(|(p, t)| (p - t).abs())
        .sum();
    let denom: f64 = targets.iter().map(|t| t.max(clamp_mbps)).sum();
    Ok(MrpeResult {
        mrpe_percent: 100.0 * abs_err / denom,
        n_rows: predictions.len(),
        clamp_mbps,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceEntry {
    pub feature: String,
    /// Mean MRPE increase in percentage points when the column is shuffled.
    pub importance_pp: f64,
}

/// Model-agnostic permutation importance against held-out data.
pub fn permutation_importance(
    model: &GbtModel,
    dataset: &SupervisedDataset,
    n_repeats: usize,
    seed: u64,
) -> Result<Vec<ImportanceEntry>> {
    if n_repeats == 0 {
        return Err(Error::Domain("n_repeats must be >= 1".into()));
    }
    if dataset.rows.is_empty() {
        return Err(Error::Domain("importance on empty dataset".into()));
    }
    if dataset.feature_schema != model.feature_schema {
        return Err(Error::Schema(format!(
            "dataset schema {:?} does not match model schema {:?}",
            dataset.feature_schema, model.feature_schema
        )));
    }
    let targets: Vec<f64> = dataset.rows.iter().map(|r| r.target_mbps).collect();
    let base_preds = dataset
        .rows
        .iter()
        .map(|r| predict(model, &r.features))
        .collect::<Result<Vec<f64>>>()?;
    let base = mrpe(&base_preds, &targets, DEFAULT_CLAMP_MBPS)?.mrpe_percent;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = dataset.rows.len();
    let mut entries = Vec::with_capacity(dataset.feature_schema.len());
    for (j, name) in dataset.feature_schema.iter().enumerate() {
        let mut delta_sum = 0.0;
        for _ in 0..n_repeats {
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            let preds = dataset
                .rows
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    let mut x = r.features.clone();
                    x[j] = dataset.rows[perm[i]].features[j];
                    predict(model, &x)
                })
                .collect::<Result<Vec<f64>>>()?;
            delta_sum += mrpe(&preds, &targets, DEFAULT_CLAMP_MBPS)?.mrpe_percent - base;
        }
        entries.push(ImportanceEntry {
            feature: name.clone(),
            importance_pp: delta_sum / n_repeats as f64,
        });
    }
    entries.sort_by(|a, b| b.importance_pp.partial_cmp(&a.importance_pp).unwrap());
    Ok(entries)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Vehicle whose future throughput is predicted.
    pub self_id: String,
    /// Leading vehicles, one dataset per entry.
    pub next_ids: Vec<String>,
    /// Road length used to assign samples to rounds.
    pub road_length_m: f64,
    pub period_s: f64,
    pub gbt: GbtConfig,
    pub clamp_mbps: f64,
    pub importance_repeats: usize,
    /// Minimum held-out rows for a round to qualify as the test round.
    pub min_test_rows: usize,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            self_id: "4".into(),
            next_ids: vec!["1".into(), "3".into()],
            road_length_m: 18_000.0,
            period_s: 1.0,
            gbt: GbtConfig::default(),
            clamp_mbps: DEFAULT_CLAMP_MBPS,
            importance_repeats: 5,
            min_test_rows: 30,
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config {
            field: "experiment config".into(),
            message: e.to_string(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedPrediction {
    pub target_mbps: f64,
    pub predicted_mbps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CellOutcome {
    Success {
        mrpe: MrpeResult,
        n_train: usize,
        n_test: usize,
        test_round: usize,
        drops: crate::alignment::DropCounts,
        importance: Vec<ImportanceEntry>,
        predictions: Vec<PairedPrediction>,
    },
    Failed {
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub self_id: String,
    pub next_id: String,
    pub feature_set: FeatureSetKind,
    pub outcome: CellOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub generated_at_unix_s: u64,
    pub seed: u64,
    pub split: String,
    pub cells: Vec<CellReport>,
}

impl ExperimentReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<ExperimentReport> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn success_count(&self) -> usize {
        self.cells
            .iter()
            .filter(|c| matches!(c.outcome, CellOutcome::Success { .. }))
            .count()
    }
}

fn find_trace<'a>(traces: &'a [VehicleTrace], id: &str) -> Result<&'a VehicleTrace> {
    traces
        .iter()
        .find(|t| t.vehicle_id == id)
        .ok_or_else(|| Error::Data(format!("no trace for vehicle {id}")))
}

fn run_cell(
    self_rs: &VehicleTrace,
    next_rs: &VehicleTrace,
    kind: FeatureSetKind,
    cfg: &ExperimentConfig,
) -> Result<CellOutcome> {
    let dataset = build_dataset(self_rs, next_rs, kind, cfg.period_s)?;

    // assign each row to the self vehicle's round at feature time t
    let rounds: Vec<usize> = dataset
        .rows
        .iter()
        .map(|row| {
            let s = self_rs
                .nearest_sample(row.t_s, 0.5 * cfg.period_s)
                .expect("row timestamps come from the self trace");
            (s.position_m / cfg.road_length_m + 1e-9).floor() as usize
        })
        .collect();
    let max_round = *rounds.iter().max().unwrap();
    let test_round = (1..=max_round)
        .rev()
        .find(|r| rounds.iter().filter(|&&x| x == *r).count() >= cfg.min_test_rows)
        .ok_or_else(|| {
            Error::Domain(format!(
                "no round after the first has >= {} rows to hold out",
                cfg.min_test_rows
            ))
        })?;

    let split = |keep: &dyn Fn(usize) -> bool| SupervisedDataset {
        rows: dataset
            .rows
            .iter()
            .zip(&rounds)
            .filter(|(_, &r)| keep(r))
            .map(|(row, _)| row.clone())
            .collect(),
        feature_schema: dataset.feature_schema.clone(),
        self_id: dataset.self_id.clone(),
        next_id: dataset.next_id.clone(),
        drops: dataset.drops,
    };
    let train = split(&|r| r < test_round);
    let test = split(&|r| r == test_round);
    if train.rows.is_empty() {
        return Err(Error::Domain("no training rows before the test round".into()));
    }

    let gbt_cfg = GbtConfig {
        seed: cfg.seed ^ cfg.gbt.seed,
        ..cfg.gbt.clone()
    };
    let model = fit(&train, &gbt_cfg)?;
    let targets: Vec<f64> = test.rows.iter().map(|r| r.target_mbps).collect();
    let preds = test
        .rows
        .iter()
        .map(|r| predict(&model, &r.features))
        .collect::<Result<Vec<f64>>>()?;
    let metric = mrpe(&preds, &targets, cfg.clamp_mbps)?;
    let importance = permutation_importance(&model, &test, cfg.importance_repeats, cfg.seed)?;
    let predictions = targets
        .iter()
        .zip(&preds)
        .map(|(&t, &p)| PairedPrediction {
            target_mbps: t,
            predicted_mbps: p,
        })
        .collect();
    Ok(CellOutcome::Success {
        mrpe: metric,
        n_train: train.rows.len(),
        n_test: test.rows.len(),
        test_round,
        drops: dataset.drops,
        importance,
        predictions,
    })
}

/// Run the full grid: every configured (self, next) pair times the five
/// feature sets. A failing grid cell is recorded and the run continues.
pub fn run_experiment(
    traces: &[VehicleTrace],
    cfg: &ExperimentConfig,
) -> Result<ExperimentReport> {
    let self_rs = resample(find_trace(traces, &cfg.self_id)?, cfg.period_s)?;
    let mut cells = Vec::new();
    for next_id in &cfg.next_ids {
        let next_rs = resample(find_trace(traces, next_id)?, cfg.period_s)?;
        for kind in FeatureSetKind::ALL {
            let outcome = match run_cell(&self_rs, &next_rs, kind, cfg) {
                Ok(outcome) => outcome,
                Err(e) => CellOutcome::Failed {
                    reason: e.to_string(),
                },
            };
            cells.push(CellReport {
                self_id: cfg.self_id.clone(),
                next_id: next_id.clone(),
                feature_set: kind,
                outcome,
            });
        }
    }
    let generated_at_unix_s = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    Ok(ExperimentReport {
        generated_at_unix_s,
        seed: cfg.seed,
        split: "train on self-vehicle rounds before the held-out round, test on that round"
            .into(),
        cells,
    })
}
