//! Deterministic synthetic highway radio environment and multi-vehicle
//! campaign generator.
//!
//! The channel is log-distance path loss plus exponentially correlated
//! log-normal shadowing. Shadowing is a function of position only and is
//! frozen per (cell, campaign), so vehicles passing the same spot later see
//! the same large-scale fading. Cell load evolves as a mean-reverting
//! process in time, shared by every vehicle camped on the cell.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::{CellId, CellState, PhyMeasurement, TraceSample, VehicleTrace};

/// Handover margin a candidate cell must exceed over the serving cell.
pub const HANDOVER_HYSTERESIS_DB: f64 = 3.0;

/// Correlation time of the speed jitter process.
const JITTER_CORR_TIME_S: f64 = 30.0;

/// Connected-device count at full cell load.
const DEVICES_PER_FULL_LOAD: f64 = 40.0;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoadProcess {
    /// Long-run mean cell load in [0, 1].
    pub mean_load: f64,
    /// Mean-reversion time constant.
    pub correlation_time_s: f64,
    /// Stationary standard deviation of the load fluctuations.
    pub load_std: f64,
}

impl Default for LoadProcess {
    fn default() -> Self {
        Self {
            mean_load: 0.3,
            correlation_time_s: 120.0,
            load_std: 0.15,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvironmentConfig {
    pub road_length_m: f64,
    /// Site positions along the road; each site hosts `cells_per_site` cells.
    pub cell_positions_m: Vec<f64>,
    pub cells_per_site: usize,
    pub tx_power_dbm: f64,
    pub pathloss_exponent: f64,
    /// Reference path loss at 1 m.
    pub pathloss_ref_db: f64,
    pub shadowing_sigma_db: f64,
    pub shadowing_corr_length_m: f64,
    pub effective_bandwidth_mhz: f64,
    pub load_process: LoadProcess,
    pub noise_floor_dbm: f64,
    /// Relative std of the multiplicative throughput noise; 0 disables it.
    pub throughput_noise_std: f64,
}

impl Default for EnvironmentConfig {
    fn default() -> Self {
        Self {
            road_length_m: 18_000.0,
            cell_positions_m: vec![3_000.0, 9_000.0, 15_000.0],
            cells_per_site: 2,
            tx_power_dbm: 43.0,
            pathloss_exponent: 3.0,
            pathloss_ref_db: 38.5,
            shadowing_sigma_db: 6.0,
            shadowing_corr_length_m: 200.0,
            effective_bandwidth_mhz: 20.0,
            load_process: LoadProcess::default(),
            noise_floor_dbm: -95.0,
            throughput_noise_std: 0.05,
        }
    }
}

impl EnvironmentConfig {
    pub fn n_cells(&self) -> usize {
        self.cell_positions_m.len() * self.cells_per_site
    }

    pub fn cell_position(&self, cell: CellId) -> f64 {
        self.cell_positions_m[cell as usize / self.cells_per_site]
    }

    fn site_of(&self, cell: CellId) -> usize {
        cell as usize / self.cells_per_site
    }

    pub fn validate(&self) -> Result<()> {
        let err = |field: &str, message: String| Error::Config {
            field: field.into(),
            message,
        };
        if !(self.road_length_m > 0.0) {
            return Err(err("road_length_m", "must be > 0".into()));
        }
        if self.cell_positions_m.is_empty() {
            return Err(err("cell_positions_m", "at least one site required".into()));
        }
        for &p in &self.cell_positions_m {
            if !(0.0..=self.road_length_m).contains(&p) {
                return Err(err(
                    "cell_positions_m",
                    format!("site position {p} outside [0, {}]", self.road_length_m),
                ));
            }
        }
        if self.cells_per_site == 0 {
            return Err(err("cells_per_site", "must be >= 1".into()));
        }
        if self.pathloss_exponent < 2.0 {
            return Err(err("pathloss_exponent", "must be >= 2".into()));
        }
        if self.shadowing_sigma_db < 0.0 {
            return Err(err("shadowing_sigma_db", "must be >= 0".into()));
        }
        if self.shadowing_sigma_db > 0.0 && self.shadowing_corr_length_m <= 0.0 {
            return Err(err(
                "shadowing_corr_length_m",
                "must be > 0 when shadowing is enabled".into(),
            ));
        }
        if self.effective_bandwidth_mhz <= 0.0 {
            return Err(err("effective_bandwidth_mhz", "must be > 0".into()));
        }
        if !(0.0..=1.0).contains(&self.load_process.mean_load) {
            return Err(err("load_process.mean_load", "must be in [0, 1]".into()));
        }
        if self.load_process.load_std < 0.0 {
            return Err(err("load_process.load_std", "must be >= 0".into()));
        }
        if self.load_process.correlation_time_s <= 0.0 {
            return Err(err("load_process.correlation_time_s", "must be > 0".into()));
        }
        if self.throughput_noise_std < 0.0 {
            return Err(err("throughput_noise_std", "must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignConfig {
    pub n_vehicles: usize,
    /// Launch gap between consecutive vehicles.
    pub start_gap_s: f64,
    pub nominal_speed_mps: f64,
    /// Relative std of the smooth speed jitter.
    pub speed_jitter: f64,
    pub n_rounds: usize,
    pub sample_period_s: f64,
    pub seed: u64,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            n_vehicles: 4,
            start_gap_s: 180.0,
            nominal_speed_mps: 30.0,
            speed_jitter: 0.05,
            n_rounds: 3,
            sample_period_s: 1.0,
            seed: 0,
        }
    }
}

impl CampaignConfig {
    pub fn validate(&self) -> Result<()> {
        let err = |field: &str, message: &str| Error::Config {
            field: field.into(),
            message: message.into(),
        };
        if self.n_vehicles < 2 {
            return Err(err("n_vehicles", "must be >= 2"));
        }
        if !(self.start_gap_s > 0.0) {
            return Err(err("start_gap_s", "must be > 0"));
        }
        if !(self.nominal_speed_mps > 0.0) {
            return Err(err("nominal_speed_mps", "must be > 0"));
        }
        if self.speed_jitter < 0.0 {
            return Err(err("speed_jitter", "must be >= 0"));
        }
        if self.n_rounds == 0 {
            return Err(err("n_rounds", "must be >= 1"));
        }
        if !(self.sample_period_s > 0.0) {
            return Err(err("sample_period_s", "must be > 0"));
        }
        Ok(())
    }
}

/// Top-level simulation config as stored in a JSON document.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub environment: EnvironmentConfig,
    pub campaign: CampaignConfig,
}

impl SimConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: SimConfig = serde_json::from_str(text).map_err(|e| Error::Config {
            field: "simulation config".into(),
            message: e.to_string(),
        })?;
        cfg.environment.validate()?;
        cfg.campaign.validate()?;
        Ok(cfg)
    }
}

/// Correlated log-normal shadowing field over road position, one per cell.
#[derive(Debug, Clone)]
pub struct ShadowField {
    spacing_m: f64,
    values: Vec<f64>,
}

impl ShadowField {
    /// First-order autoregressive field with autocorrelation
    /// exp(-distance / corr_length) and stationary std `sigma_db`.
    pub fn generate<R: Rng>(
        road_length_m: f64,
        sigma_db: f64,
        corr_length_m: f64,
        rng: &mut R,
    ) -> ShadowField {
        if sigma_db == 0.0 {
            return ShadowField {
                spacing_m: road_length_m.max(1.0),
                values: vec![0.0, 0.0],
            };
        }
        let spacing = (corr_length_m / 10.0).clamp(0.5, 50.0);
        let n = (road_length_m / spacing).ceil() as usize + 1;
        let rho = (-spacing / corr_length_m).exp();
        let innovation = sigma_db * (1.0 - rho * rho).sqrt();
        let mut values = Vec::with_capacity(n);
        let e0: f64 = rng.sample(StandardNormal);
        values.push(sigma_db * e0);
        for i in 1..n {
            let e: f64 = rng.sample(StandardNormal);
            values.push(rho * values[i - 1] + innovation * e);
        }
        ShadowField {
            spacing_m: spacing,
            values,
        }
    }

    /// Shadowing in dB at a road position (nearest grid point).
    pub fn at(&self, position_m: f64) -> f64 {
        let idx = (position_m / self.spacing_m).round() as isize;
        let idx = idx.clamp(0, self.values.len() as isize - 1) as usize;
        self.values[idx]
    }
}

fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

/// Received power from one cell at a road position.
fn received_power_dbm(
    env: &EnvironmentConfig,
    cell: CellId,
    position_m: f64,
    shadows: &[ShadowField],
) -> f64 {
    let d = (position_m - env.cell_position(cell)).abs().max(1.0);
    env.tx_power_dbm
        - (env.pathloss_ref_db + 10.0 * env.pathloss_exponent * d.log10())
        - shadows[cell as usize].at(position_m)
}

/// PHY KPIs at one road position.
///
/// Serving-cell selection is argmax received power with a
/// [`HANDOVER_HYSTERESIS_DB`] margin against the previous serving cell;
/// power ties break toward the lower cell id. Cells of the same site use
/// orthogonal resources and do not interfere with each other; interference
/// is the aggregate power of all other sites.
pub fn link_quality(
    env: &EnvironmentConfig,
    position_m: f64,
    shadows: &[ShadowField],
    prev_serving: Option<CellId>,
) -> Result<PhyMeasurement> {
    if !(0.0..=env.road_length_m).contains(&position_m) {
        return Err(Error::Domain(format!(
            "position {position_m} m outside road [0, {}]",
            env.road_length_m
        )));
    }
    let n_cells = env.n_cells();
    let powers: Vec<f64> = (0..n_cells)
        .map(|c| received_power_dbm(env, c as CellId, position_m, shadows))
        .collect();
    let mut best = 0usize;
    for (c, &p) in powers.iter().enumerate() {
        if p > powers[best] {
            best = c;
        }
    }
    let serving = match prev_serving {
        Some(prev) if (prev as usize) < n_cells => {
            if powers[best] > powers[prev as usize] + HANDOVER_HYSTERESIS_DB {
                best
            } else {
                prev as usize
            }
        }
        _ => best,
    };
    let noise_mw = dbm_to_mw(env.noise_floor_dbm);
    let total_mw: f64 = powers.iter().map(|&p| dbm_to_mw(p)).sum::<f64>() + noise_mw;
    let serving_site = env.site_of(serving as CellId);
    let interference_mw: f64 = powers
        .iter()
        .enumerate()
        .filter(|&(c, _)| env.site_of(c as CellId) != serving_site)
        .map(|(_, &p)| dbm_to_mw(p))
        .sum();
    let rsrp = powers[serving];
    let rssi = mw_to_dbm(total_mw);
    Ok(PhyMeasurement {
        rsrp_dbm: rsrp,
        rsrq_db: rsrp - rssi,
        rssi_dbm: rssi,
        snr_db: rsrp - mw_to_dbm(interference_mw + noise_mw),
        serving_cell_id: serving as CellId,
    })
}

/// Realized downlink throughput in Mbps.
///
/// Shannon capacity over the effective bandwidth, scaled by the free cell
/// capacity and a small multiplicative noise term, floored at zero.
pub fn throughput_sample<R: Rng>(
    env: &EnvironmentConfig,
    phy: &PhyMeasurement,
    cell: &CellState,
    rng: &mut R,
) -> f64 {
    let snr_lin = 10f64.powf(phy.snr_db / 10.0);
    let capacity = env.effective_bandwidth_mhz * (1.0 + snr_lin).log2();
    let noise = if env.throughput_noise_std > 0.0 {
        let e: f64 = rng.sample(StandardNormal);
        1.0 + env.throughput_noise_std * e
    } else {
        1.0
    };
    (capacity * (1.0 - cell.load) * noise).max(0.0)
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

struct VehicleState {
    start_t: f64,
    position_m: f64,
    jitter: f64,
    serving: Option<CellId>,
    done: bool,
    jitter_rng: ChaCha8Rng,
    noise_rng: ChaCha8Rng,
    samples: Vec<TraceSample>,
}

/// Run a full campaign. Vehicle `k` (0-based) starts at `k * start_gap_s`
/// and drives `n_rounds` passes of the road. Identical configs and seed
/// produce bit-identical traces.
pub fn simulate_campaign(
    env: &EnvironmentConfig,
    campaign: &CampaignConfig,
) -> Result<Vec<VehicleTrace>> {
    env.validate()?;
    campaign.validate()?;

    let seed = campaign.seed;
    let shadows: Vec<ShadowField> = (0..env.n_cells())
        .map(|c| {
            let mut rng = stream_rng(seed, 1_000 + c as u64);
            ShadowField::generate(
                env.road_length_m,
                env.shadowing_sigma_db,
                env.shadowing_corr_length_m,
                &mut rng,
            )
        })
        .collect();

    let dt = campaign.sample_period_s;
    let lp = &env.load_process;
    let mut load_rng = stream_rng(seed, 2_000);
    let mut loads = vec![lp.mean_load; env.n_cells()];
    let mut devices = vec![(lp.mean_load * DEVICES_PER_FULL_LOAD).round() as u32; env.n_cells()];

    let mut vehicles: Vec<VehicleState> = (0..campaign.n_vehicles)
        .map(|k| VehicleState {
            start_t: k as f64 * campaign.start_gap_s,
            position_m: 0.0,
            jitter: 0.0,
            serving: None,
            done: false,
            jitter_rng: stream_rng(seed, 3_000 + k as u64),
            noise_rng: stream_rng(seed, 4_000 + k as u64),
            samples: Vec::new(),
        })
        .collect();

    let total_distance = campaign.n_rounds as f64 * env.road_length_m;
    let min_speed = 0.1 * campaign.nominal_speed_mps;
    let max_ticks = (((campaign.n_vehicles as f64 - 1.0) * campaign.start_gap_s
        + total_distance / min_speed)
        / dt)
        .ceil() as u64
        + 16;
    let load_alpha = (-dt / lp.correlation_time_s).exp();
    let load_innovation = lp.load_std * (1.0 - load_alpha * load_alpha).sqrt();
    let jitter_alpha = (-dt / JITTER_CORR_TIME_S).exp();
    let jitter_innovation = campaign.speed_jitter * (1.0 - jitter_alpha * jitter_alpha).sqrt();
    let jitter_bound = (3.0 * campaign.speed_jitter).min(0.8);

    for tick in 0..max_ticks {
        let t = tick as f64 * dt;
        for vehicle in vehicles.iter_mut() {
            if vehicle.done || t + 1e-9 < vehicle.start_t {
                continue;
            }
            let road_pos = vehicle.position_m % env.road_length_m;
            let phy = link_quality(env, road_pos, &shadows, vehicle.serving)?;
            vehicle.serving = Some(phy.serving_cell_id);
            let cell = CellState {
                cell_id: phy.serving_cell_id,
                load: loads[phy.serving_cell_id as usize],
                connected_devices: devices[phy.serving_cell_id as usize],
            };
            let throughput = throughput_sample(env, &phy, &cell, &mut vehicle.noise_rng);
            // one-sided slowdown keeps nominal speed an upper bound, so a
            // round never takes less than road_length / nominal_speed
            let speed = (campaign.nominal_speed_mps * (1.0 - vehicle.jitter.abs())).max(min_speed);
            vehicle.samples.push(TraceSample {
                t_s: t,
                position_m: vehicle.position_m,
                speed_mps: speed,
                phy,
                cell,
                throughput_mbps: throughput,
            });
            vehicle.position_m += speed * dt;
            let e: f64 = vehicle.jitter_rng.sample(StandardNormal);
            vehicle.jitter = (jitter_alpha * vehicle.jitter + jitter_innovation * e)
                .clamp(-jitter_bound, jitter_bound);
            if vehicle.position_m >= total_distance {
                vehicle.done = true;
            }
        }
        // cell load and device counts advance on the global clock
        for c in 0..loads.len() {
            let e: f64 = load_rng.sample(StandardNormal);
            loads[c] = (lp.mean_load + load_alpha * (loads[c] - lp.mean_load)
                + load_innovation * e)
                .clamp(0.0, 1.0);
            let de: f64 = load_rng.sample(StandardNormal);
            devices[c] = (loads[c] * DEVICES_PER_FULL_LOAD + 1.5 * de)
                .round()
                .clamp(0.0, 500.0) as u32;
        }
        if vehicles.iter().all(|v| v.done) {
            break;
        }
    }
    if !vehicles.iter().all(|v| v.done) {
        return Err(Error::Data(
            "campaign did not finish within the tick budget".into(),
        ));
    }

    Ok(vehicles
        .into_iter()
        .enumerate()
        .map(|(k, v)| VehicleTrace {
            vehicle_id: (k + 1).to_string(),
            samples: v.samples,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quiet_env() -> EnvironmentConfig {
        EnvironmentConfig {
            load_process: LoadProcess {
                mean_load: 0.0,
                correlation_time_s: 120.0,
                load_std: 0.0,
            },
            throughput_noise_std: 0.0,
            ..EnvironmentConfig::default()
        }
    }

    #[test]
    fn determinism_same_seed_identical_traces() {
        let env = EnvironmentConfig::default();
        let campaign = CampaignConfig {
            seed: 7,
            n_rounds: 1,
            ..CampaignConfig::default()
        };
        let a = simulate_campaign(&env, &campaign).unwrap();
        let b = simulate_campaign(&env, &campaign).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn start_gap_offsets_first_timestamps() {
        let env = EnvironmentConfig::default();
        let campaign = CampaignConfig {
            n_vehicles: 4,
            start_gap_s: 180.0,
            n_rounds: 1,
            ..CampaignConfig::default()
        };
        let traces = simulate_campaign(&env, &campaign).unwrap();
        let first = |i: usize| traces[i].samples.first().unwrap().t_s;
        assert_eq!(first(3) - first(0), 540.0);
    }

    #[test]
    fn trace_spans_at_least_kinematic_duration() {
        // kinematics oracle: covering the road at nominal speed takes d / v
        let env = EnvironmentConfig::default();
        let campaign = CampaignConfig {
            n_rounds: 1,
            ..CampaignConfig::default()
        };
        let expected_s = env.road_length_m / campaign.nominal_speed_mps;
        let traces = simulate_campaign(&env, &campaign).unwrap();
        for t in &traces {
            let (first, last) = t.span().unwrap();
            assert!(
                last - first + campaign.sample_period_s >= expected_s,
                "vehicle {} span {} < {expected_s}",
                t.vehicle_id,
                last - first
            );
        }
    }

    #[test]
    fn equidistant_cells_tie_breaks_to_lower_id() {
        let env = EnvironmentConfig {
            cell_positions_m: vec![0.0, 10_000.0],
            cells_per_site: 1,
            shadowing_sigma_db: 0.0,
            ..EnvironmentConfig::default()
        };
        let shadows: Vec<ShadowField> = (0..2)
            .map(|_| ShadowField::generate(env.road_length_m, 0.0, 1.0, &mut rand::thread_rng()))
            .collect();
        let p0 = received_power_dbm(&env, 0, 5_000.0, &shadows);
        let p1 = received_power_dbm(&env, 1, 5_000.0, &shadows);
        assert!((p0 - p1).abs() < 1e-12);
        let phy = link_quality(&env, 5_000.0, &shadows, None).unwrap();
        assert_eq!(phy.serving_cell_id, 0);
    }

    #[test]
    fn rsrp_decreases_away_from_single_cell() {
        let env = EnvironmentConfig {
            cell_positions_m: vec![0.0],
            cells_per_site: 1,
            shadowing_sigma_db: 0.0,
            ..EnvironmentConfig::default()
        };
        let shadows =
            vec![ShadowField::generate(env.road_length_m, 0.0, 1.0, &mut rand::thread_rng())];
        let mut prev = f64::INFINITY;
        for pos in [10.0, 100.0, 1_000.0, 5_000.0, 15_000.0] {
            let phy = link_quality(&env, pos, &shadows, None).unwrap();
            assert!(phy.rsrp_dbm < prev);
            prev = phy.rsrp_dbm;
        }
    }

    #[test]
    fn position_outside_road_is_domain_error() {
        let env = EnvironmentConfig::default();
        let shadows: Vec<ShadowField> = (0..env.n_cells())
            .map(|_| ShadowField::generate(env.road_length_m, 0.0, 1.0, &mut rand::thread_rng()))
            .collect();
        assert!(matches!(
            link_quality(&env, -1.0, &shadows, None),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            link_quality(&env, env.road_length_m + 1.0, &shadows, None),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn rsrp_never_exceeds_rssi() {
        let env = EnvironmentConfig::default();
        let shadows: Vec<ShadowField> = (0..env.n_cells())
            .map(|c| {
                let mut rng = stream_rng(3, c as u64);
                ShadowField::generate(env.road_length_m, 6.0, 200.0, &mut rng)
            })
            .collect();
        for i in 0..200 {
            let pos = i as f64 * 90.0;
            let phy = link_quality(&env, pos, &shadows, None).unwrap();
            assert!(phy.rsrp_dbm <= phy.rssi_dbm);
            assert!(phy.rsrq_db <= 0.0);
        }
    }

    #[test]
    fn shadowing_std_matches_configured_sigma() {
        // Monte-Carlo oracle: empirical std over 1e5 positions of a long field
        let mut rng = stream_rng(11, 0);
        let road = 200_000.0;
        let field = ShadowField::generate(road, 6.0, 50.0, &mut rng);
        let n = 100_000;
        let values: Vec<f64> = (0..n)
            .map(|i| field.at(i as f64 * road / n as f64))
            .collect();
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let std = var.sqrt();
        assert!((std - 6.0).abs() < 0.5, "std = {std}");
    }

    #[test]
    fn shadowing_autocorrelation_decays_with_distance() {
        let mut rng = stream_rng(5, 0);
        let corr_len = 100.0;
        let field = ShadowField::generate(100_000.0, 6.0, corr_len, &mut rng);
        let autocorr = |delta: f64| {
            let n = 20_000;
            let mut sum = 0.0;
            let mut sq = 0.0;
            for i in 0..n {
                let x = i as f64 * 4.0;
                sum += field.at(x) * field.at(x + delta);
                sq += field.at(x) * field.at(x);
            }
            sum / sq
        };
        let near = autocorr(0.2 * corr_len);
        let far = autocorr(corr_len);
        assert!(far < near, "far={far} near={near}");
        assert!(far > 0.2 && near > 0.6);
    }

    #[test]
    fn throughput_full_load_is_zero() {
        let env = quiet_env();
        let phy = PhyMeasurement {
            rsrp_dbm: -80.0,
            rsrq_db: -5.0,
            rssi_dbm: -75.0,
            snr_db: 20.0,
            serving_cell_id: 0,
        };
        let cell = CellState {
            cell_id: 0,
            load: 1.0,
            connected_devices: 40,
        };
        let thr = throughput_sample(&env, &phy, &cell, &mut rand::thread_rng());
        assert_eq!(thr, 0.0);
    }

    #[test]
    fn throughput_zero_db_snr_matches_capacity() {
        let env = EnvironmentConfig {
            effective_bandwidth_mhz: 10.0,
            throughput_noise_std: 0.0,
            ..quiet_env()
        };
        let phy = PhyMeasurement {
            rsrp_dbm: -90.0,
            rsrq_db: -5.0,
            rssi_dbm: -85.0,
            snr_db: 0.0,
            serving_cell_id: 0,
        };
        let cell = CellState {
            cell_id: 0,
            load: 0.0,
            connected_devices: 0,
        };
        let thr = throughput_sample(&env, &phy, &cell, &mut rand::thread_rng());
        assert!((thr - 10.0).abs() < 1e-9, "thr = {thr}");
    }

    #[test]
    fn throughput_deep_fade_is_negligible() {
        let env = EnvironmentConfig {
            throughput_noise_std: 0.0,
            ..quiet_env()
        };
        let phy = PhyMeasurement {
            rsrp_dbm: -130.0,
            rsrq_db: -20.0,
            rssi_dbm: -90.0,
            snr_db: -40.0,
            serving_cell_id: 0,
        };
        let cell = CellState {
            cell_id: 0,
            load: 0.0,
            connected_devices: 0,
        };
        let thr = throughput_sample(&env, &phy, &cell, &mut rand::thread_rng());
        assert!(thr < 0.002 * env.effective_bandwidth_mhz, "thr = {thr}");
    }

    #[test]
    fn handovers_occur_over_a_round() {
        let env = EnvironmentConfig::default();
        let campaign = CampaignConfig {
            n_rounds: 1,
            seed: 2,
            ..CampaignConfig::default()
        };
        let traces = simulate_campaign(&env, &campaign).unwrap();
        let mut cells: Vec<CellId> = traces[0]
            .samples
            .iter()
            .map(|s| s.phy.serving_cell_id)
            .collect();
        cells.sort_unstable();
        cells.dedup();
        assert!(cells.len() >= 2, "serving cells seen: {cells:?}");
    }

    #[test]
    fn vehicles_see_identical_phy_at_same_position() {
        // load and noise disabled, no jitter: the follower repeats the
        // leader's samples with a pure time shift
        let env = quiet_env();
        let campaign = CampaignConfig {
            n_vehicles: 2,
            start_gap_s: 180.0,
            speed_jitter: 0.0,
            n_rounds: 1,
            seed: 9,
            ..CampaignConfig::default()
        };
        let traces = simulate_campaign(&env, &campaign).unwrap();
        let lead = &traces[0].samples;
        let follow = &traces[1].samples;
        let n = lead.len().min(follow.len());
        for i in 0..n {
            assert_eq!(follow[i].t_s, lead[i].t_s + 180.0);
            assert!((follow[i].position_m - lead[i].position_m).abs() < 1e-9);
            assert_eq!(follow[i].phy, lead[i].phy);
        }
    }

    #[test]
    fn invalid_config_names_field() {
        let env = EnvironmentConfig {
            pathloss_exponent: 1.5,
            ..EnvironmentConfig::default()
        };
        match simulate_campaign(&env, &CampaignConfig::default()) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "pathloss_exponent"),
            other => panic!("expected config error, got {other:?}"),
        }
        let campaign = CampaignConfig {
            n_vehicles: 1,
            ..CampaignConfig::default()
        };
        match simulate_campaign(&EnvironmentConfig::default(), &campaign) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "n_vehicles"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn sim_config_rejects_unknown_keys() {
        let text = r#"{"environment": {"road_length_m": 1000.0, "no_such_key": 1}}"#;
        match SimConfig::from_json(text) {
            Err(Error::Config { message, .. }) => {
                assert!(message.contains("no_such_key"), "{message}")
            }
            other => panic!("expected config error, got {other:?}"),
        }
    }
}
