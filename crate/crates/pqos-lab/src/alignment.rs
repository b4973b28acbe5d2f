//! Look-ahead dataset construction: per-sample delay between self and next
//! vehicle, look-ahead target matching and feature assembly for the five
//! feature sets.

use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::{TraceSample, VehicleTrace};

/// Speed guard for the look-ahead delay quotient; rows at or below this
/// speed are dropped as near-standstill.
pub const MIN_SPEED_MPS: f64 = 1.0;

/// The five supported feature sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureSetKind {
    #[serde(rename = "baseline")]
    Baseline,
    #[serde(rename = "phy")]
    Phy,
    #[serde(rename = "phy-cell")]
    PhyAndCell,
    #[serde(rename = "next-phy")]
    NextPhy,
    #[serde(rename = "next-phy-cell")]
    NextPhyAndCell,
}

impl FeatureSetKind {
    pub const ALL: [FeatureSetKind; 5] = [
        FeatureSetKind::Baseline,
        FeatureSetKind::Phy,
        FeatureSetKind::PhyAndCell,
        FeatureSetKind::NextPhy,
        FeatureSetKind::NextPhyAndCell,
    ];

    pub fn cli_name(self) -> &'static str {
        match self {
            FeatureSetKind::Baseline => "baseline",
            FeatureSetKind::Phy => "phy",
            FeatureSetKind::PhyAndCell => "phy-cell",
            FeatureSetKind::NextPhy => "next-phy",
            FeatureSetKind::NextPhyAndCell => "next-phy-cell",
        }
    }

    /// Ordered feature names of this set.
    pub fn schema(self) -> Vec<String> {
        let phy = |prefix: &str| {
            vec![
                format!("{prefix}_snr"),
                format!("{prefix}_rsrp"),
                format!("{prefix}_rsrq"),
                format!("{prefix}_rssi"),
            ]
        };
        let cell = || vec!["self_cell_load".to_string(), "self_connected_devices".to_string()];
        match self {
            FeatureSetKind::Baseline => vec!["self_throughput".to_string()],
            FeatureSetKind::Phy => phy("self"),
            FeatureSetKind::PhyAndCell => {
                let mut s = phy("self");
                s.extend(cell());
                s
            }
            FeatureSetKind::NextPhy => phy("next"),
            FeatureSetKind::NextPhyAndCell => {
                let mut s = phy("next");
                s.extend(cell());
                s
            }
        }
    }
}

impl FromStr for FeatureSetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FeatureSetKind::ALL
            .into_iter()
            .find(|k| k.cli_name() == s)
            .ok_or_else(|| {
                Error::Domain(format!(
                    "unknown feature set `{s}` (expected baseline|phy|phy-cell|next-phy|next-phy-cell)"
                ))
            })
    }
}

impl std::fmt::Display for FeatureSetKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.cli_name())
    }
}

/// Per-reason counts of samples that produced no dataset row.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DropCounts {
    /// No next-vehicle sample near this timestamp.
    pub outside_span: usize,
    /// Next vehicle behind the self vehicle (negative implied delay).
    pub next_behind: usize,
    /// Self speed at or below [`MIN_SPEED_MPS`].
    pub low_speed: usize,
    /// No self sample near the look-ahead timestamp.
    pub no_target: usize,
}

impl DropCounts {
    pub fn total(&self) -> usize {
        self.outside_span + self.next_behind + self.low_speed + self.no_target
    }
}

/// One supervised row: features at time `t`, target at `t + tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedRow {
    pub t_s: f64,
    pub features: Vec<f64>,
    pub target_mbps: f64,
    pub tau_s: f64,
    pub d_sn_m: f64,
}

/// Feature matrix plus look-ahead target built from a (self, next) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SupervisedDataset {
    pub rows: Vec<AlignedRow>,
    pub feature_schema: Vec<String>,
    pub self_id: String,
    pub next_id: String,
    pub drops: DropCounts,
}

/// Distance along the road between the vehicles at time `t_s`, using the
/// next vehicle's nearest sample within `tol_s`. `None` when either trace
/// has no sample near `t_s`.
pub fn pair_distance(
    self_trace: &VehicleTrace,
    next_trace: &VehicleTrace,
    t_s: f64,
    tol_s: f64,
) -> Option<f64> {
    let s = self_trace.nearest_sample(t_s, tol_s)?;
    let n = next_trace.nearest_sample(t_s, tol_s)?;
    Some((n.position_m - s.position_m).abs())
}

/// Look-ahead delay `d / v`. `None` when the self vehicle is effectively
/// standing still.
pub fn lookahead_delay(d_sn_m: f64, v_s_mps: f64) -> Option<f64> {
    if v_s_mps <= MIN_SPEED_MPS {
        return None;
    }
    Some(d_sn_m / v_s_mps)
}

fn features_at(kind: FeatureSetKind, s: &TraceSample, n: &TraceSample) -> Vec<f64> {
    let phy = |x: &TraceSample| vec![x.phy.snr_db, x.phy.rsrp_dbm, x.phy.rsrq_db, x.phy.rssi_dbm];
    let cell = || vec![s.cell.load, s.cell.connected_devices as f64];
    match kind {
        FeatureSetKind::Baseline => vec![s.throughput_mbps],
        FeatureSetKind::Phy => phy(s),
        FeatureSetKind::PhyAndCell => {
            let mut f = phy(s);
            f.extend(cell());
            f
        }
        FeatureSetKind::NextPhy => phy(n),
        FeatureSetKind::NextPhyAndCell => {
            let mut f = phy(n);
            f.extend(cell());
            f
        }
    }
}

/// Build a supervised dataset from a (self, next) trace pair.
///
/// Both traces must be resampled to `period_s`. For each self sample at
/// time `t`, the look-ahead delay is the pair distance divided by the self
/// speed, and the target is the self throughput at the grid point nearest
/// `t + tau` (within half a period). Rows where the next vehicle is behind,
/// the self vehicle is near standstill, or no target sample exists are
/// dropped and counted.
pub fn build_dataset(
    self_trace: &VehicleTrace,
    next_trace: &VehicleTrace,
    kind: FeatureSetKind,
    period_s: f64,
) -> Result<SupervisedDataset> {
    if !(period_s > 0.0) {
        return Err(Error::Domain("period_s must be > 0".into()));
    }
    let tol = 0.5 * period_s;
    let mut rows = Vec::new();
    let mut drops = DropCounts::default();
    for s in &self_trace.samples {
        let Some(next) = next_trace.nearest_sample(s.t_s, tol) else {
            drops.outside_span += 1;
            continue;
        };
        let signed_d = next.position_m - s.position_m;
        if signed_d < 0.0 {
            drops.next_behind += 1;
            continue;
        }
        let Some(tau) = lookahead_delay(signed_d, s.speed_mps) else {
            drops.low_speed += 1;
            continue;
        };
        let Some(target) = self_trace.nearest_sample(s.t_s + tau, tol) else {
            drops.no_target += 1;
            continue;
        };
        rows.push(AlignedRow {
            t_s: s.t_s,
            features: features_at(kind, s, next),
            target_mbps: target.throughput_mbps,
            tau_s: tau,
            d_sn_m: signed_d,
        });
    }
    if rows.is_empty() {
        return Err(Error::Domain(format!(
            "empty dataset for pair ({}, {}): dropped {} rows \
             (outside_span={}, next_behind={}, low_speed={}, no_target={})",
            self_trace.vehicle_id,
            next_trace.vehicle_id,
            drops.total(),
            drops.outside_span,
            drops.next_behind,
            drops.low_speed,
            drops.no_target
        )));
    }
    Ok(SupervisedDataset {
        rows,
        feature_schema: kind.schema(),
        self_id: self_trace.vehicle_id.clone(),
        next_id: next_trace.vehicle_id.clone(),
        drops,
    })
}

/// Write a dataset as CSV: `t_s, tau_s, d_sn_m, <features...>, target_mbps`.
pub fn write_dataset_csv<P: AsRef<Path>>(dataset: &SupervisedDataset, path: P) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    let mut header = vec!["t_s".to_string(), "tau_s".to_string(), "d_sn_m".to_string()];
    header.extend(dataset.feature_schema.iter().cloned());
    header.push("target_mbps".to_string());
    w.write_record(&header)?;
    for row in &dataset.rows {
        let mut record = vec![
            format!("{:.6}", row.t_s),
            format!("{:.6}", row.tau_s),
            format!("{:.6}", row.d_sn_m),
        ];
        record.extend(row.features.iter().map(|v| format!("{v:.6}")));
        record.push(format!("{:.6}", row.target_mbps));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// Read a dataset written by [`write_dataset_csv`].
pub fn read_dataset_csv<P: AsRef<Path>>(path: P) -> Result<SupervisedDataset> {
    let mut r = csv::Reader::from_path(path.as_ref())
        .map_err(|e| Error::Data(format!("cannot read {}: {e}", path.as_ref().display())))?;
    let headers: Vec<String> = r
        .headers()
        .map_err(|e| Error::Data(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if headers.len() < 5
        || headers[..3] != ["t_s", "tau_s", "d_sn_m"]
        || headers.last().map(String::as_str) != Some("target_mbps")
    {
        return Err(Error::Schema(format!(
            "dataset CSV must start with t_s,tau_s,d_sn_m and end with target_mbps; got {headers:?}"
        )));
    }
    let feature_schema: Vec<String> = headers[3..headers.len() - 1].to_vec();
    let mut rows = Vec::new();
    for record in r.records() {
        let record = record.map_err(|e| Error::Data(e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        let num = |i: usize| -> Result<f64> {
            record
                .get(i)
                .ok_or_else(|| Error::Parse {
                    line,
                    message: format!("missing field {i}"),
                })?
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse {
                    line,
                    message: format!("column `{}`: {e}", headers[i]),
                })
        };
        let features = (3..headers.len() - 1).map(num).collect::<Result<Vec<f64>>>()?;
        rows.push(AlignedRow {
            t_s: num(0)?,
            tau_s: num(1)?,
            d_sn_m: num(2)?,
            features,
            target_mbps: num(headers.len() - 1)?,
        });
    }
    if rows.is_empty() {
        return Err(Error::Data(format!(
            "dataset {} contains no rows",
            path.as_ref().display()
        )));
    }
    Ok(SupervisedDataset {
        rows,
        feature_schema,
        self_id: String::new(),
        next_id: String::new(),
        drops: DropCounts::default(),
    })
}

/// Stable split of dataset rows by an arbitrary key of the row index.
pub fn partition_rows<F: Fn(usize) -> bool>(
    dataset: &SupervisedDataset,
    keep: F,
) -> SupervisedDataset {
    let rows = dataset
        .rows
        .iter()
        .enumerate()
        .filter(|(i, _)| keep(*i))
        .map(|(_, r)| r.clone())
        .collect();
    SupervisedDataset {
        rows,
        feature_schema: dataset.feature_schema.clone(),
        self_id: dataset.self_id.clone(),
        next_id: dataset.next_id.clone(),
        drops: dataset.drops,
    }
}
