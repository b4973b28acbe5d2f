//! Lagged Pearson cross-correlation between two KPI time series and
//! peak-lag detection.

use std::collections::HashMap;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::trace::VehicleTrace;

/// Minimum overlapping sample count for a lag to have a defined coefficient.
pub const MIN_OVERLAP: usize = 30;

/// KPI selector for extracting a scalar series from a trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kpi {
    Snr,
    Rsrp,
    Rsrq,
    Rssi,
    Throughput,
    CellLoad,
}

impl FromStr for Kpi {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "snr" => Ok(Kpi::Snr),
            "rsrp" => Ok(Kpi::Rsrp),
            "rsrq" => Ok(Kpi::Rsrq),
            "rssi" => Ok(Kpi::Rssi),
            "throughput" => Ok(Kpi::Throughput),
            "cell-load" => Ok(Kpi::CellLoad),
            other => Err(Error::Domain(format!(
                "unknown KPI `{other}` (expected snr|rsrp|rsrq|rssi|throughput|cell-load)"
            ))),
        }
    }
}

/// Extract `(t, value)` pairs for one KPI.
pub fn kpi_series(trace: &VehicleTrace, kpi: Kpi) -> Vec<(f64, f64)> {
    trace
        .samples
        .iter()
        .map(|s| {
            let v = match kpi {
                Kpi::Snr => s.phy.snr_db,
                Kpi::Rsrp => s.phy.rsrp_dbm,
                Kpi::Rsrq => s.phy.rsrq_db,
                Kpi::Rssi => s.phy.rssi_dbm,
                Kpi::Throughput => s.throughput_mbps,
                Kpi::CellLoad => s.cell.load,
            };
            (s.t_s, v)
        })
        .collect()
}

/// Pearson correlation as a function of signed lag.
///
/// `r[i]` is `None` where the coefficient is undefined: fewer than
/// [`MIN_OVERLAP`] overlapping samples, or zero variance in the overlap.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationCurve {
    pub lags_s: Vec<f64>,
    pub r: Vec<Option<f64>>,
    pub n_per_lag: Vec<usize>,
}

/// Correlate `(a(t), b(t + lag))` pairs over overlapping timestamps for
/// every lag in `[-max_lag_s, max_lag_s]` on a `step_s` grid. Timestamps
/// are matched after quantization to the step grid.
pub fn cross_correlation(
    a: &[(f64, f64)],
    b: &[(f64, f64)],
    max_lag_s: f64,
    step_s: f64,
) -> Result<CorrelationCurve> {
    if !(max_lag_s > 0.0) {
        return Err(Error::Domain("max_lag_s must be > 0".into()));
    }
    if !(step_s > 0.0) {
        return Err(Error::Domain("step_s must be > 0".into()));
    }
    let key = |t: f64| (t / step_s).round() as i64;
    let mut b_map: HashMap<i64, f64> = HashMap::with_capacity(b.len());
    for &(t, v) in b {
        b_map.entry(key(t)).or_insert(v);
    }
    let a_keyed: Vec<(i64, f64)> = a.iter().map(|&(t, v)| (key(t), v)).collect();

    let max_steps = (max_lag_s / step_s).floor() as i64;
    let mut lags_s = Vec::new();
    let mut r = Vec::new();
    let mut n_per_lag = Vec::new();
    for li in -max_steps..=max_steps {
        let (mut n, mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0usize, 0.0, 0.0, 0.0, 0.0, 0.0);
        for &(k, x) in &a_keyed {
            if let Some(&y) = b_map.get(&(k + li)) {
                n += 1;
                sx += x;
                sy += y;
                sxx += x * x;
                syy += y * y;
                sxy += x * y;
            }
        }
        lags_s.push(li as f64 * step_s);
        n_per_lag.push(n);
        if n < MIN_OVERLAP {
            r.push(None);
            continue;
        }
        let nf = n as f64;
        let vx = sxx - sx * sx / nf;
        let vy = syy - sy * sy / nf;
        if vx <= 1e-12 * sxx.abs().max(1.0) || vy <= 1e-12 * syy.abs().max(1.0) {
            r.push(None);
            continue;
        }
        let cov = sxy - sx * sy / nf;
        let mut coeff = (cov / (vx.sqrt() * vy.sqrt())).clamp(-1.0, 1.0);
        // snap out the last ulp of rounding noise so perfect correlation
        // reports exactly +-1
        if 1.0 - coeff.abs() < 1e-12 {
            coeff = coeff.signum();
        }
        r.push(Some(coeff));
    }
    Ok(CorrelationCurve { lags_s, r, n_per_lag })
}

/// Lag maximizing the correlation coefficient. Ties break toward the
/// smallest absolute lag, then toward the negative one.
pub fn peak_lag(curve: &CorrelationCurve) -> Result<f64> {
    let mut best: Option<(f64, f64)> = None;
    for (lag, r) in curve.lags_s.iter().zip(&curve.r) {
        let Some(r) = *r else { continue };
        let better = match best {
            None => true,
            Some((blag, br)) => {
                r > br
                    || (r == br
                        && (lag.abs() < blag.abs() || (lag.abs() == blag.abs() && *lag < blag)))
            }
        };
        if better {
            best = Some((*lag, r));
        }
    }
    best.map(|(lag, _)| lag)
        .ok_or_else(|| Error::Domain("correlation curve has no defined lag".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn wave(n: usize, offset_s: f64) -> Vec<(f64, f64)> {
        (0..n)
            .map(|i| {
                let t = i as f64 + offset_s;
                (t, (t * 0.05).sin() + (t * 0.013).cos() * 0.5)
            })
            .collect()
    }

    #[test]
    fn self_correlation_is_one_at_zero_lag() {
        let a = wave(200, 0.0);
        let curve = cross_correlation(&a, &a, 50.0, 1.0).unwrap();
        let idx = curve.lags_s.iter().position(|&l| l == 0.0).unwrap();
        assert_eq!(curve.r[idx], Some(1.0));
    }

    #[test]
    fn constructed_shift_recovers_lag() {
        // b(t) = a(t - 120) so the argmax lag is +120
        let a = wave(600, 0.0);
        let b: Vec<(f64, f64)> = a.iter().map(|&(t, v)| (t + 120.0, v)).collect();
        let curve = cross_correlation(&a, &b, 300.0, 1.0).unwrap();
        assert_eq!(peak_lag(&curve).unwrap(), 120.0);
    }

    #[test]
    fn independent_noise_stays_near_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let a: Vec<(f64, f64)> = (0..10_000).map(|i| (i as f64, rng.gen::<f64>())).collect();
        let b: Vec<(f64, f64)> = (0..10_000).map(|i| (i as f64, rng.gen::<f64>())).collect();
        let curve = cross_correlation(&a, &b, 50.0, 1.0).unwrap();
        let max_abs = curve
            .r
            .iter()
            .flatten()
            .fold(0.0f64, |m, r| m.max(r.abs()));
        assert!(max_abs < 0.05, "max |r| = {max_abs}");
    }

    #[test]
    fn zero_variance_overlap_is_undefined() {
        let a: Vec<(f64, f64)> = (0..100).map(|i| (i as f64, 5.0)).collect();
        let b = wave(100, 0.0);
        let curve = cross_correlation(&a, &b, 10.0, 1.0).unwrap();
        assert!(curve.r.iter().all(|r| r.is_none()));
        assert!(curve.n_per_lag.iter().any(|&n| n >= MIN_OVERLAP));
    }

    #[test]
    fn short_overlap_is_undefined() {
        let a = wave(20, 0.0);
        let curve = cross_correlation(&a, &a, 5.0, 1.0).unwrap();
        assert!(curve.r.iter().all(|r| r.is_none()));
        assert!(matches!(peak_lag(&curve), Err(Error::Domain(_))));
    }

    #[test]
    fn peak_lag_single_maximum() {
        let curve = CorrelationCurve {
            lags_s: vec![-60.0, -30.0, 0.0],
            r: vec![Some(0.2), Some(0.9), Some(0.5)],
            n_per_lag: vec![50, 50, 50],
        };
        assert_eq!(peak_lag(&curve).unwrap(), -30.0);
    }

    #[test]
    fn peak_lag_tie_prefers_negative() {
        let curve = CorrelationCurve {
            lags_s: vec![-60.0, 0.0, 60.0],
            r: vec![Some(0.8), Some(0.1), Some(0.8)],
            n_per_lag: vec![50, 50, 50],
        };
        assert_eq!(peak_lag(&curve).unwrap(), -60.0);
    }

    proptest! {
        #[test]
        fn symmetry_under_argument_swap(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a: Vec<(f64, f64)> = (0..120).map(|i| (i as f64, rng.gen::<f64>())).collect();
            let b: Vec<(f64, f64)> = (0..120).map(|i| (i as f64, rng.gen::<f64>())).collect();
            let ab = cross_correlation(&a, &b, 20.0, 1.0).unwrap();
            let ba = cross_correlation(&b, &a, 20.0, 1.0).unwrap();
            for (i, &lag) in ab.lags_s.iter().enumerate() {
                let j = ba.lags_s.iter().position(|&l| l == -lag).unwrap();
                match (ab.r[i], ba.r[j]) {
                    (Some(x), Some(y)) => prop_assert!((x - y).abs() < 1e-9),
                    (x, y) => prop_assert_eq!(x.is_none(), y.is_none()),
                }
            }
        }

        #[test]
        fn affine_invariance_of_curve(scale in 0.1f64..10.0, shift in -100.0f64..100.0, seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a: Vec<(f64, f64)> = (0..150).map(|i| (i as f64, rng.gen::<f64>())).collect();
            let b: Vec<(f64, f64)> = (0..150).map(|i| (i as f64, rng.gen::<f64>())).collect();
            let b2: Vec<(f64, f64)> = b.iter().map(|&(t, v)| (t, scale * v + shift)).collect();
            let base = cross_correlation(&a, &b, 20.0, 1.0).unwrap();
            let mapped = cross_correlation(&a, &b2, 20.0, 1.0).unwrap();
            for (x, y) in base.r.iter().zip(&mapped.r) {
                match (x, y) {
                    (Some(x), Some(y)) => prop_assert!((x - y).abs() < 1e-9),
                    (x, y) => prop_assert_eq!(x.is_none(), y.is_none()),
                }
            }
        }
    }
}
