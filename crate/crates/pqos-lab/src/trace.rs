//! Canonical trace data model, CSV persistence and resampling to a fixed
//! sample grid.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type CellId = u32;

/// PHY-layer KPIs observed by a UE at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhyMeasurement {
    pub rsrp_dbm: f64,
    pub rsrq_db: f64,
    pub rssi_dbm: f64,
    pub snr_db: f64,
    pub serving_cell_id: CellId,
}

/// Serving-cell state at one instant, shared by all UEs camped on the cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellState {
    pub cell_id: CellId,
    /// Resource utilization in [0, 1].
    pub load: f64,
    pub connected_devices: u32,
}

/// One row of a drive-test trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceSample {
    /// Seconds since campaign start.
    pub t_s: f64,
    /// Cumulative distance along the route. Keeps increasing over multiple
    /// rounds; the radio model wraps it modulo the road length internally.
    pub position_m: f64,
    pub speed_mps: f64,
    pub phy: PhyMeasurement,
    pub cell: CellState,
    pub throughput_mbps: f64,
}

/// Time-ordered measurement series of a single vehicle.
#[derive(Debug, Clone, PartialEq)]
pub struct VehicleTrace {
    pub vehicle_id: String,
    pub samples: Vec<TraceSample>,
}

impl VehicleTrace {
    pub fn span(&self) -> Option<(f64, f64)> {
        match (self.samples.first(), self.samples.last()) {
            (Some(first), Some(last)) => Some((first.t_s, last.t_s)),
            _ => None,
        }
    }

    /// Sample whose timestamp is nearest to `t_s`, if within `tol_s`.
    /// Ties between two equidistant neighbors resolve to the earlier one.
    pub fn nearest_sample(&self, t_s: f64, tol_s: f64) -> Option<&TraceSample> {
        if self.samples.is_empty() {
            return None;
        }
        let idx = self.samples.partition_point(|s| s.t_s < t_s);
        let mut best: Option<&TraceSample> = None;
        for cand in [idx.checked_sub(1), Some(idx)].into_iter().flatten() {
            if let Some(s) = self.samples.get(cand) {
                let dist = (s.t_s - t_s).abs();
                if dist <= tol_s + 1e-9 {
                    match best {
                        Some(b) if (b.t_s - t_s).abs() <= dist => {}
                        _ => best = Some(s),
                    }
                }
            }
        }
        best
    }
}

/// Most frequent value; count ties resolve to the value seen earliest.
fn mode_u32<I: IntoIterator<Item = CellId>>(values: I) -> Option<CellId> {
    let mut counts: HashMap<CellId, usize> = HashMap::new();
    let mut order: Vec<CellId> = Vec::new();
    for v in values {
        let c = counts.entry(v).or_insert(0);
        if *c == 0 {
            order.push(v);
        }
        *c += 1;
    }
    let mut best: Option<(CellId, usize)> = None;
    for &v in &order {
        let c = counts[&v];
        if best.map_or(true, |(_, bc)| c > bc) {
            best = Some((v, c));
        }
    }
    best.map(|(v, _)| v)
}

/// Aggregate a trace onto a fixed grid of `period_s` bins.
///
/// Each output row at `k * period_s` is the aggregate of input samples with
/// timestamps in `[k*period, (k+1)*period)`: numeric fields by mean,
/// identifier fields by mode (ties to the earliest sample's value). Empty
/// bins produce no output.
pub fn resample(trace: &VehicleTrace, period_s: f64) -> Result<VehicleTrace> {
    if period_s <= 0.0 {
        return Err(Error::Domain(format!(
            "resample period must be > 0, got {period_s}"
        )));
    }
    if trace.samples.is_empty() {
        return Err(Error::Domain(format!(
            "cannot resample empty trace for vehicle {}",
            trace.vehicle_id
        )));
    }
    let mut bins: BTreeMap<i64, Vec<&TraceSample>> = BTreeMap::new();
    for s in &trace.samples {
        let bin = (s.t_s / period_s + 1e-9).floor() as i64;
        bins.entry(bin).or_default().push(s);
    }
    let mut samples = Vec::with_capacity(bins.len());
    for (bin, group) in bins {
        let n = group.len() as f64;
        let mean = |f: &dyn Fn(&TraceSample) -> f64| group.iter().map(|s| f(s)).sum::<f64>() / n;
        let serving = mode_u32(group.iter().map(|s| s.phy.serving_cell_id)).unwrap();
        let cell_id = mode_u32(group.iter().map(|s| s.cell.cell_id)).unwrap();
        samples.push(TraceSample {
            t_s: bin as f64 * period_s,
            position_m: mean(&|s| s.position_m),
            speed_mps: mean(&|s| s.speed_mps),
            phy: PhyMeasurement {
                rsrp_dbm: mean(&|s| s.phy.rsrp_dbm),
                rsrq_db: mean(&|s| s.phy.rsrq_db),
                rssi_dbm: mean(&|s| s.phy.rssi_dbm),
                snr_db: mean(&|s| s.phy.snr_db),
                serving_cell_id: serving,
            },
            cell: CellState {
                cell_id,
                load: mean(&|s| s.cell.load),
                connected_devices: mean(&|s| s.cell.connected_devices as f64).round() as u32,
            },
            throughput_mbps: mean(&|s| s.throughput_mbps),
        });
    }
    Ok(VehicleTrace {
        vehicle_id: trace.vehicle_id.clone(),
        samples,
    })
}

/// Fixed CSV column order used when writing traces.
pub const CSV_COLUMNS: [&str; 12] = [
    "vehicle_id",
    "t_s",
    "position_m",
    "speed_mps",
    "rsrp_dbm",
    "rsrq_db",
    "rssi_dbm",
    "snr_db",
    "serving_cell_id",
    "cell_load",
    "connected_devices",
    "throughput_mbps",
];

/// Write traces to one CSV file. Numeric fields are rounded to 6 decimals.
pub fn store_csv<P: AsRef<Path>>(traces: &[VehicleTrace], path: P) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    w.write_record(CSV_COLUMNS)?;
    for trace in traces {
        for s in &trace.samples {
            w.write_record([
                trace.vehicle_id.clone(),
                format!("{:.6}", s.t_s),
                format!("{:.6}", s.position_m),
                format!("{:.6}", s.speed_mps),
                format!("{:.6}", s.phy.rsrp_dbm),
                format!("{:.6}", s.phy.rsrq_db),
                format!("{:.6}", s.phy.rssi_dbm),
                format!("{:.6}", s.phy.snr_db),
                s.phy.serving_cell_id.to_string(),
                format!("{:.6}", s.cell.load),
                s.cell.connected_devices.to_string(),
                format!("{:.6}", s.throughput_mbps),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn map_csv_err(e: csv::Error) -> Error {
    match e.position() {
        Some(pos) => Error::Parse {
            line: pos.line(),
            message: e.to_string(),
        },
        None => Error::Data(e.to_string()),
    }
}

/// Read traces written by [`store_csv`]. Columns are keyed by header name,
/// so column order is free; a missing column is a schema error.
pub fn load_csv<P: AsRef<Path>>(path: P) -> Result<Vec<VehicleTrace>> {
    let mut r = csv::Reader::from_path(path.as_ref())?;
    let headers = r.headers().map_err(map_csv_err)?.clone();
    let mut col = HashMap::new();
    for (i, h) in headers.iter().enumerate() {
        col.insert(h.to_string(), i);
    }
    for name in CSV_COLUMNS {
        if !col.contains_key(name) {
            return Err(Error::Schema(format!("missing column `{name}`")));
        }
    }
    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, Vec<TraceSample>> = HashMap::new();
    for record in r.records() {
        let record = record.map_err(map_csv_err)?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |name: &str| -> Result<&str> {
            record.get(col[name]).ok_or_else(|| Error::Parse {
                line,
                message: format!("missing value for column `{name}`"),
            })
        };
        let num = |name: &str| -> Result<f64> {
            field(name)?.trim().parse::<f64>().map_err(|e| Error::Parse {
                line,
                message: format!("column `{name}`: {e}"),
            })
        };
        let int = |name: &str| -> Result<u32> {
            field(name)?.trim().parse::<u32>().map_err(|e| Error::Parse {
                line,
                message: format!("column `{name}`: {e}"),
            })
        };
        let vehicle_id = field("vehicle_id")?.to_string();
        let serving = int("serving_cell_id")?;
        let sample = TraceSample {
            t_s: num("t_s")?,
            position_m: num("position_m")?,
            speed_mps: num("speed_mps")?,
            phy: PhyMeasurement {
                rsrp_dbm: num("rsrp_dbm")?,
                rsrq_db: num("rsrq_db")?,
                rssi_dbm: num("rssi_dbm")?,
                snr_db: num("snr_db")?,
                serving_cell_id: serving,
            },
            cell: CellState {
                cell_id: serving,
                load: num("cell_load")?,
                connected_devices: int("connected_devices")?,
            },
            throughput_mbps: num("throughput_mbps")?,
        };
        if !groups.contains_key(&vehicle_id) {
            order.push(vehicle_id.clone());
        }
        groups.entry(vehicle_id).or_default().push(sample);
    }
    let mut traces = Vec::with_capacity(order.len());
    for id in order {
        let samples = groups.remove(&id).unwrap();
        for pair in samples.windows(2) {
            if pair[1].t_s <= pair[0].t_s {
                return Err(Error::Data(format!(
                    "vehicle {id}: timestamps not strictly increasing at t = {}",
                    pair[1].t_s
                )));
            }
        }
        traces.push(VehicleTrace {
            vehicle_id: id,
            samples,
        });
    }
    Ok(traces)
}

/// Load every `*.csv` file in a directory and merge the traces.
pub fn load_csv_dir<P: AsRef<Path>>(dir: P) -> Result<Vec<VehicleTrace>> {
    let mut paths: Vec<_> = std::fs::read_dir(dir.as_ref())?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    paths.sort();
    let mut traces = Vec::new();
    for p in paths {
        traces.extend(load_csv(&p)?);
    }
    if traces.is_empty() {
        return Err(Error::Data(format!(
            "no trace CSV files found in {}",
            dir.as_ref().display()
        )));
    }
    Ok(traces)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(t: f64, value: f64) -> TraceSample {
        TraceSample {
            t_s: t,
            position_m: value,
            speed_mps: value,
            phy: PhyMeasurement {
                rsrp_dbm: value,
                rsrq_db: value,
                rssi_dbm: value,
                snr_db: value,
                serving_cell_id: 0,
            },
            cell: CellState {
                cell_id: 0,
                load: 0.0,
                connected_devices: 3,
            },
            throughput_mbps: value,
        }
    }

    fn trace(samples: Vec<TraceSample>) -> VehicleTrace {
        VehicleTrace {
            vehicle_id: "1".into(),
            samples,
        }
    }

    #[test]
    fn resample_constant_10hz_keeps_values() {
        let samples: Vec<_> = (0..100).map(|i| sample(i as f64 * 0.1, 7.5)).collect();
        let out = resample(&trace(samples), 1.0).unwrap();
        assert_eq!(out.samples.len(), 10);
        for (i, s) in out.samples.iter().enumerate() {
            assert_eq!(s.t_s, i as f64);
            assert!((s.throughput_mbps - 7.5).abs() < 1e-12);
            assert!((s.position_m - 7.5).abs() < 1e-12);
        }
    }

    #[test]
    fn resample_hand_enumeration() {
        let t = trace(vec![sample(0.2, 1.0), sample(0.7, 3.0), sample(1.4, 10.0)]);
        let out = resample(&t, 1.0).unwrap();
        assert_eq!(out.samples.len(), 2);
        assert_eq!(out.samples[0].t_s, 0.0);
        assert!((out.samples[0].throughput_mbps - 2.0).abs() < 1e-12);
        assert_eq!(out.samples[1].t_s, 1.0);
        assert!((out.samples[1].throughput_mbps - 10.0).abs() < 1e-12);
    }

    #[test]
    fn resample_drops_empty_bins() {
        let mut samples: Vec<_> = (0..3).map(|i| sample(i as f64, 1.0)).collect();
        samples.extend((8..10).map(|i| sample(i as f64, 1.0)));
        let out = resample(&trace(samples), 1.0).unwrap();
        let ts: Vec<f64> = out.samples.iter().map(|s| s.t_s).collect();
        assert_eq!(ts, vec![0.0, 1.0, 2.0, 8.0, 9.0]);
    }

    #[test]
    fn resample_empty_trace_is_domain_error() {
        assert!(matches!(
            resample(&trace(vec![]), 1.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn resample_mode_tie_takes_earliest() {
        let mut a = sample(0.1, 1.0);
        a.phy.serving_cell_id = 5;
        let mut b = sample(0.6, 1.0);
        b.phy.serving_cell_id = 2;
        let out = resample(&trace(vec![a, b]), 1.0).unwrap();
        assert_eq!(out.samples[0].phy.serving_cell_id, 5);
    }

    #[test]
    fn nearest_sample_respects_tolerance() {
        let t = trace(vec![sample(0.0, 0.0), sample(1.0, 1.0)]);
        assert!(t.nearest_sample(0.4, 0.5).is_some());
        assert_eq!(t.nearest_sample(0.4, 0.5).unwrap().t_s, 0.0);
        assert!(t.nearest_sample(3.0, 0.5).is_none());
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let traces = vec![
            trace(vec![sample(0.0, 1.25), sample(1.0, -3.5)]),
            VehicleTrace {
                vehicle_id: "2".into(),
                samples: vec![sample(180.0, 42.0)],
            },
        ];
        store_csv(&traces, &path).unwrap();
        let loaded = load_csv(&path).unwrap();
        assert_eq!(loaded.len(), 2);
        assert_eq!(loaded[0].samples.len(), 2);
        for (a, b) in traces[0].samples.iter().zip(&loaded[0].samples) {
            assert!((a.t_s - b.t_s).abs() < 1e-6);
            assert!((a.phy.rsrp_dbm - b.phy.rsrp_dbm).abs() < 1e-6);
            assert!((a.throughput_mbps - b.throughput_mbps).abs() < 1e-6);
        }
    }

    #[test]
    fn csv_shuffled_columns_parse_identically() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let traces = vec![trace(vec![sample(0.0, 1.0), sample(1.0, 2.0)])];
        store_csv(&traces, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().unwrap().split(',').collect();
        let mut shuffled = String::new();
        let perm: Vec<usize> = (0..header.len()).rev().collect();
        shuffled.push_str(
            &perm
                .iter()
                .map(|&i| header[i])
                .collect::<Vec<_>>()
                .join(","),
        );
        shuffled.push('\n');
        for line in lines {
            let fields: Vec<&str> = line.split(',').collect();
            shuffled.push_str(
                &perm
                    .iter()
                    .map(|&i| fields[i])
                    .collect::<Vec<_>>()
                    .join(","),
            );
            shuffled.push('\n');
        }
        let path2 = dir.path().join("shuffled.csv");
        std::fs::write(&path2, shuffled).unwrap();
        assert_eq!(load_csv(&path).unwrap(), load_csv(&path2).unwrap());
    }

    #[test]
    fn csv_missing_column_is_schema_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        std::fs::write(&path, "vehicle_id,t_s\n1,0.0\n").unwrap();
        match load_csv(&path) {
            Err(Error::Schema(msg)) => assert!(msg.contains("position_m"), "{msg}"),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn csv_malformed_row_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let traces = vec![trace(vec![sample(0.0, 1.0)])];
        store_csv(&traces, &path).unwrap();
        let mut text = std::fs::read_to_string(&path).unwrap();
        text.push_str("1,not-a-number,0,0,0,0,0,0,0,0,0,0\n");
        std::fs::write(&path, text).unwrap();
        match load_csv(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn resample_idempotent(ts in proptest::collection::vec((0.0f64..100.0, -50.0f64..50.0), 1..40)) {
            let mut ts = ts;
            ts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            ts.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-6);
            let t = trace(ts.into_iter().map(|(t, v)| sample(t, v)).collect());
            let once = resample(&t, 1.0).unwrap();
            let twice = resample(&once, 1.0).unwrap();
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn resample_stays_near_input_span(ts in proptest::collection::vec((0.0f64..100.0, -5.0f64..5.0), 1..40), period in 0.5f64..5.0) {
            let mut ts = ts;
            ts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            ts.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-6);
            let t = trace(ts.into_iter().map(|(t, v)| sample(t, v)).collect());
            let (first, last) = t.span().unwrap();
            let out = resample(&t, period).unwrap();
            prop_assert!(!out.samples.is_empty());
            // output rows sit at bin starts, so at most one period before the
            // first input timestamp and never past the last one
            prop_assert!(out.samples.first().unwrap().t_s >= first - period);
            prop_assert!(out.samples.last().unwrap().t_s <= last);
        }
    }
}
