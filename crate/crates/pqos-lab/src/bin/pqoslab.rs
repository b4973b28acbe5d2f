//! Command-line front end chaining
//! simulate -> analyze -> build-dataset -> train -> evaluate -> report.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pqos_lab::alignment::{build_dataset, read_dataset_csv, write_dataset_csv, FeatureSetKind};
use pqos_lab::correlation::{cross_correlation, kpi_series, peak_lag, Kpi};
use pqos_lab::evaluation::{run_experiment, CellOutcome, ExperimentConfig, ExperimentReport};
use pqos_lab::gbt::{fit, GbtConfig};
use pqos_lab::radio_sim::{simulate_campaign, SimConfig};
use pqos_lab::trace::{load_csv_dir, resample, store_csv, VehicleTrace};
use pqos_lab::{svg, Error, Result};

#[derive(Parser)]
#[command(
    name = "pqoslab",
    version,
    about = "Synthetic highway drive-test lab for look-ahead throughput prediction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a multi-vehicle campaign and write one trace CSV per vehicle
    Simulate {
        /// JSON file with `environment` and `campaign` sections
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the campaign seed
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for trace CSVs
        #[arg(long)]
        out: PathBuf,
    },
    /// Lagged cross-correlation between two vehicles' KPI series
    Analyze {
        /// Directory of trace CSVs
        #[arg(long)]
        traces: PathBuf,
        /// Self (trailing) vehicle id
        #[arg(long = "self")]
        self_id: String,
        /// Next (leading) vehicle id
        #[arg(long = "next")]
        next_id: String,
        /// KPI to correlate: snr|rsrp|rsrq|rssi|throughput|cell-load
        #[arg(long, default_value = "snr")]
        kpi: String,
        #[arg(long = "max-lag-s", default_value_t = 600.0)]
        max_lag_s: f64,
        #[arg(long = "step-s", default_value_t = 1.0)]
        step_s: f64,
        /// Output directory for correlation.csv and correlation.svg
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a supervised look-ahead dataset from a (self, next) pair
    BuildDataset {
        #[arg(long)]
        traces: PathBuf,
        #[arg(long = "self")]
        self_id: String,
        #[arg(long = "next")]
        next_id: String,
        /// baseline|phy|phy-cell|next-phy|next-phy-cell
        #[arg(long = "feature-set")]
        feature_set: String,
        #[arg(long = "period-s", default_value_t = 1.0)]
        period_s: f64,
        /// Output dataset CSV file
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a gradient-boosted tree model on a dataset CSV
    Train {
        #[arg(long)]
        dataset: PathBuf,
        /// Output model JSON file
        #[arg(long)]
        model: PathBuf,
        /// Optional GBT hyperparameter JSON
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the training seed
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the full feature-set x vehicle-pair experiment grid
    Evaluate {
        #[arg(long)]
        traces: PathBuf,
        /// Optional experiment config JSON
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output report JSON file
        #[arg(long)]
        out: PathBuf,
    },
    /// Emit bar/scatter/importance artifacts from an experiment report
    Report {
        #[arg(long)]
        experiment: PathBuf,
        /// Output directory for CSV/SVG artifacts
        #[arg(long)]
        out: PathBuf,
    },
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))
}

fn find_trace(traces: &[VehicleTrace], id: &str) -> Result<VehicleTrace> {
    traces
        .iter()
        .find(|t| t.vehicle_id == id)
        .cloned()
        .ok_or_else(|| Error::Data(format!("no trace for vehicle {id}")))
}

fn cmd_simulate(config: Option<PathBuf>, seed: Option<u64>, out: PathBuf) -> Result<()> {
    let mut cfg = match config {
        Some(path) => SimConfig::from_json(&read_file(&path)?)?,
        None => SimConfig::default(),
    };
    if let Some(seed) = seed {
        cfg.campaign.seed = seed;
    }
    let traces = simulate_campaign(&cfg.environment, &cfg.campaign)?;
    std::fs::create_dir_all(&out)?;
    for trace in &traces {
        let path = out.join(format!("vehicle_{}.csv", trace.vehicle_id));
        store_csv(std::slice::from_ref(trace), &path)?;
        eprintln!(
            "wrote {} ({} samples)",
            path.display(),
            trace.samples.len()
        );
    }
    Ok(())
}

fn cmd_analyze(
    traces_dir: PathBuf,
    self_id: String,
    next_id: String,
    kpi: String,
    max_lag_s: f64,
    step_s: f64,
    out: PathBuf,
) -> Result<()> {
    let kpi: Kpi = kpi.parse()?;
    let traces = load_csv_dir(&traces_dir)?;
    let next = resample(&find_trace(&traces, &next_id)?, step_s)?;
    let own = resample(&find_trace(&traces, &self_id)?, step_s)?;
    // leader first: the peak lag then reads as the follower's time behind
    let curve = cross_correlation(
        &kpi_series(&next, kpi),
        &kpi_series(&own, kpi),
        max_lag_s,
        step_s,
    )?;
    std::fs::create_dir_all(&out)?;
    let mut w = csv::Writer::from_path(out.join("correlation.csv"))?;
    w.write_record(["lag_s", "r", "n"])?;
    for i in 0..curve.lags_s.len() {
        w.write_record([
            format!("{:.3}", curve.lags_s[i]),
            curve.r[i].map_or(String::new(), |r| format!("{r:.6}")),
            curve.n_per_lag[i].to_string(),
        ])?;
    }
    w.flush()?;
    let points: Vec<(f64, Option<f64>)> = curve
        .lags_s
        .iter()
        .zip(&curve.r)
        .map(|(&l, &r)| (l, r))
        .collect();
    let chart = svg::line_chart(
        &format!("Cross-correlation of vehicle {self_id} with vehicle {next_id}"),
        "lag [s]",
        "Pearson r",
        &[(format!("vehicle {next_id}"), points)],
    );
    std::fs::write(out.join("correlation.svg"), chart)?;
    match peak_lag(&curve) {
        Ok(lag) => println!("peak lag: {lag} s"),
        Err(e) => println!("peak lag: undefined ({e})"),
    }
    Ok(())
}

fn cmd_build_dataset(
    traces_dir: PathBuf,
    self_id: String,
    next_id: String,
    feature_set: String,
    period_s: f64,
    out: PathBuf,
) -> Result<()> {
    let kind: FeatureSetKind = feature_set.parse()?;
    let traces = load_csv_dir(&traces_dir)?;
    let own = resample(&find_trace(&traces, &self_id)?, period_s)?;
    let next = resample(&find_trace(&traces, &next_id)?, period_s)?;
    let dataset = build_dataset(&own, &next, kind, period_s)?;
    write_dataset_csv(&dataset, &out)?;
    eprintln!(
        "wrote {} ({} rows, {} dropped)",
        out.display(),
        dataset.rows.len(),
        dataset.drops.total()
    );
    Ok(())
}

fn cmd_train(
    dataset: PathBuf,
    model_path: PathBuf,
    config: Option<PathBuf>,
    seed: Option<u64>,
) -> Result<()> {
    let data = read_dataset_csv(&dataset)?;
    let mut cfg = match config {
        Some(path) => serde_json::from_str::<GbtConfig>(&read_file(&path)?).map_err(|e| {
            Error::Config {
                field: "gbt config".into(),
                message: e.to_string(),
            }
        })?,
        None => GbtConfig::default(),
    };
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let model = fit(&data, &cfg)?;
    model.save(&model_path)?;
    eprintln!(
        "wrote {} (final training MSE {:.6})",
        model_path.display(),
        model.training_mse.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

fn cmd_evaluate(
    traces_dir: PathBuf,
    config: Option<PathBuf>,
    seed: Option<u64>,
    out: PathBuf,
) -> Result<()> {
    let traces = load_csv_dir(&traces_dir)?;
    let mut cfg = match config {
        Some(path) => ExperimentConfig::from_json(&read_file(&path)?)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let report = run_experiment(&traces, &cfg)?;
    std::fs::write(&out, report.to_json()?)?;
    eprintln!(
        "wrote {} ({}/{} grid cells succeeded)",
        out.display(),
        report.success_count(),
        report.cells.len()
    );
    Ok(())
}

fn cmd_report(experiment: PathBuf, out: PathBuf) -> Result<()> {
    let report = ExperimentReport::from_json(&read_file(&experiment)?)?;
    std::fs::create_dir_all(&out)?;

    // MRPE bars
    let mut bars_csv = csv::Writer::from_path(out.join("mrpe_bars.csv"))?;
    bars_csv.write_record(["self_id", "next_id", "feature_set", "mrpe_percent", "n_test"])?;
    let mut groups: Vec<(String, Vec<(String, f64)>)> = Vec::new();
    for cell in &report.cells {
        if let CellOutcome::Success { mrpe, n_test, .. } = &cell.outcome {
            bars_csv.write_record([
                cell.self_id.clone(),
                cell.next_id.clone(),
                cell.feature_set.to_string(),
                format!("{:.4}", mrpe.mrpe_percent),
                n_test.to_string(),
            ])?;
            let label = format!("next {}", cell.next_id);
            let entry = (cell.feature_set.to_string(), mrpe.mrpe_percent);
            match groups.iter_mut().find(|(l, _)| *l == label) {
                Some((_, bars)) => bars.push(entry),
                None => groups.push((label, vec![entry])),
            }
        }
    }
    bars_csv.flush()?;
    std::fs::write(
        out.join("mrpe_bars.svg"),
        svg::bar_chart("Held-out MRPE per feature set", "MRPE [%]", &groups),
    )?;

    // real vs predicted scatter, self PHY against next PHY & cell
    let mut scatter_csv = csv::Writer::from_path(out.join("scatter.csv"))?;
    scatter_csv.write_record([
        "self_id",
        "next_id",
        "feature_set",
        "target_mbps",
        "predicted_mbps",
    ])?;
    let mut pairs: Vec<String> = Vec::new();
    for cell in &report.cells {
        if let CellOutcome::Success { predictions, .. } = &cell.outcome {
            for p in predictions {
                scatter_csv.write_record([
                    cell.self_id.clone(),
                    cell.next_id.clone(),
                    cell.feature_set.to_string(),
                    format!("{:.4}", p.target_mbps),
                    format!("{:.4}", p.predicted_mbps),
                ])?;
            }
            if !pairs.contains(&cell.next_id) {
                pairs.push(cell.next_id.clone());
            }
        }
    }
    scatter_csv.flush()?;
    for next_id in &pairs {
        let mut series = Vec::new();
        for cell in &report.cells {
            if cell.next_id != *next_id {
                continue;
            }
            let shown = matches!(
                cell.feature_set,
                FeatureSetKind::Phy | FeatureSetKind::NextPhyAndCell
            );
            if let (true, CellOutcome::Success { predictions, .. }) = (shown, &cell.outcome) {
                series.push((
                    cell.feature_set.to_string(),
                    predictions
                        .iter()
                        .map(|p| (p.target_mbps, p.predicted_mbps))
                        .collect::<Vec<_>>(),
                ));
            }
        }
        if !series.is_empty() {
            std::fs::write(
                out.join(format!("scatter_next_{next_id}.svg")),
                svg::scatter_chart(
                    &format!("Real vs predicted throughput (next vehicle {next_id})"),
                    "real [Mbps]",
                    "predicted [Mbps]",
                    &series,
                    true,
                ),
            )?;
        }
    }

    // permutation importance table
    let mut imp_csv = csv::Writer::from_path(out.join("importance.csv"))?;
    imp_csv.write_record(["self_id", "next_id", "feature_set", "feature", "importance_pp"])?;
    for cell in &report.cells {
        if let CellOutcome::Success { importance, .. } = &cell.outcome {
            for entry in importance {
                imp_csv.write_record([
                    cell.self_id.clone(),
                    cell.next_id.clone(),
                    cell.feature_set.to_string(),
                    entry.feature.clone(),
                    format!("{:.4}", entry.importance_pp),
                ])?;
            }
        }
    }
    imp_csv.flush()?;
    eprintln!("wrote report artifacts to {}", out.display());
    Ok(())
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate { config, seed, out } => cmd_simulate(config, seed, out),
        Command::Analyze {
            traces,
            self_id,
            next_id,
            kpi,
            max_lag_s,
            step_s,
            out,
        } => cmd_analyze(traces, self_id, next_id, kpi, max_lag_s, step_s, out),
        Command::BuildDataset {
            traces,
            self_id,
            next_id,
            feature_set,
            period_s,
            out,
        } => cmd_build_dataset(traces, self_id, next_id, feature_set, period_s, out),
        Command::Train {
            dataset,
            model,
            config,
            seed,
        } => cmd_train(dataset, model, config, seed),
        Command::Evaluate {
            traces,
            config,
            seed,
            out,
        } => cmd_evaluate(traces, config, seed, out),
        Command::Report { experiment, out } => cmd_report(experiment, out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
