//! Command-line interface.
//!
//! Subcommands: `ingest` (validate + ingest report), `analyze` (behavior,
//! anomalies, correlations), `train` (forecast tuning diagnostics),
//! `simulate` (full pipeline), `report` (re-render saved results). Exit
//! codes: 0 success, 1 data errors, 2 config errors.

use std::fs;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::behavior::{
    anomalies_to_csv, build_profiles_fleet, correlation_report, detect_anomalies_fleet,
    profiles_to_csv,
};
use crate::error::{Error, Result};
use crate::forecast::{bayes_optimize, loss_curve_csv, train};
use crate::scenario::report::{parse_report_json, render, write_outputs, ReportFormat};
use crate::scenario::{derive_fleet_series, run_scenario, ScenarioConfig};
use crate::seeds::derive_seed;
use crate::telemetry::{parse_telemetry, validate_stream, TelemetryRecord};

#[derive(Parser)]
#[command(
    name = "nevsim",
    version,
    about = "Fleet telemetry analytics and urban-ecology scenario simulation for new energy vehicles"
)]
struct Cli {
    /// Scenario config file (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory override.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Output format: json, csv, or table.
    #[arg(long, global = true, default_value = "table")]
    format: String,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate telemetry, printing the ingest report.
    Ingest {
        /// CSV files; defaults to the config's telemetry list.
        files: Vec<PathBuf>,
    },
    /// Mine behavior: profiles, anomalies, correlations.
    Analyze {
        /// CSV files; defaults to the config's telemetry list.
        files: Vec<PathBuf>,
    },
    /// Tune and train the forecast models, writing models and loss curves.
    Train,
    /// Run the full scenario pipeline and write the output tree.
    Simulate,
    /// Re-render a saved report from the output directory.
    Report,
}

/// Entry point; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return 2;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            if err.is_config() {
                2
            } else {
                1
            }
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    let format: ReportFormat = cli.format.parse()?;
    let config = load_config(&cli)?;
    match cli.command {
        Command::Ingest { files } => ingest_command(&config, &files, format),
        Command::Analyze { files } => analyze_command(&config, &files, format),
        Command::Train => train_command(&config),
        Command::Simulate => simulate_command(&config, format),
        Command::Report => report_command(&config, format),
    }
}

/// Loads the config when given, otherwise starts from defaults. Relative
/// telemetry paths resolve against the config file's directory.
fn load_config(cli: &Cli) -> Result<ScenarioConfig> {
    let mut config = match &cli.config {
        Some(path) => {
            let mut config = ScenarioConfig::load(path)?;
            if let Some(dir) = path.parent() {
                config.telemetry = config
                    .telemetry
                    .iter()
                    .map(|p| if p.is_relative() { dir.join(p) } else { p.clone() })
                    .collect();
            }
            config
        }
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.out_dir = out.clone();
    }
    Ok(config)
}

fn telemetry_paths(config: &ScenarioConfig, files: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let paths = if files.is_empty() {
        config.telemetry.clone()
    } else {
        files.to_vec()
    };
    if paths.is_empty() {
        return Err(Error::Config(
            "no telemetry files given (positional arguments or config `telemetry`)".into(),
        ));
    }
    Ok(paths)
}

type FileReports = Vec<(String, crate::telemetry::IngestReport)>;

fn read_records(paths: &[PathBuf]) -> Result<(Vec<TelemetryRecord>, FileReports)> {
    let mut records = Vec::new();
    let mut reports = Vec::new();
    for path in paths {
        let file = fs::File::open(path)
            .map_err(|err| Error::bad_input(format!("cannot open `{}`: {err}", path.display())))?;
        let (mut parsed, report) = parse_telemetry(file)?;
        records.append(&mut parsed);
        reports.push((path.display().to_string(), report));
    }
    records.sort_by(|a, b| {
        a.vehicle_id
            .cmp(&b.vehicle_id)
            .then(a.timestamp.cmp(&b.timestamp))
    });
    Ok((records, reports))
}

fn ingest_command(config: &ScenarioConfig, files: &[PathBuf], format: ReportFormat) -> Result<()> {
    let paths = telemetry_paths(config, files)?;
    let (records, reports) = read_records(&paths)?;
    let violations = validate_stream(&records);
    match format {
        ReportFormat::Json => {
            let value = serde_json::json!({
                "files": reports.iter().map(|(path, report)| {
                    serde_json::json!({ "path": path, "report": report })
                }).collect::<Vec<_>>(),
                "records": records.len(),
                "stream_violations": violations.len(),
            });
            println!("{}", serde_json::to_string_pretty(&value).expect("serializable"));
        }
        _ => {
            for (path, report) in &reports {
                println!(
                    "{path}: accepted {} rejected {}",
                    report.accepted, report.rejected
                );
                for (row, reason) in &report.rejections {
                    println!("  row {row}: {reason}");
                }
            }
            println!("stream violations: {}", violations.len());
        }
    }
    Ok(())
}

fn analyze_command(config: &ScenarioConfig, files: &[PathBuf], format: ReportFormat) -> Result<()> {
    let paths = telemetry_paths(config, files)?;
    let (records, _) = read_records(&paths)?;
    if records.is_empty() {
        return Err(Error::EmptyStream);
    }
    let anomalies = detect_anomalies_fleet(&records, &config.anomaly);
    let profiles = build_profiles_fleet(&records, &config.profile)?;
    let correlations = correlation_report(&records)?;

    fs::create_dir_all(&config.out_dir)?;
    fs::write(config.out_dir.join("anomalies.csv"), anomalies_to_csv(&anomalies))?;
    fs::write(config.out_dir.join("profiles.csv"), profiles_to_csv(&profiles))?;
    fs::write(
        config.out_dir.join("correlations.json"),
        serde_json::to_string_pretty(&correlations).expect("serializable") + "\n",
    )?;

    match format {
        ReportFormat::Json => {
            let value = serde_json::json!({
                "anomalies": anomalies,
                "profiles": profiles,
                "correlations": correlations,
            });
            println!("{}", serde_json::to_string_pretty(&value).expect("serializable"));
        }
        _ => {
            println!("vehicles: {}", profiles.len());
            println!("anomalies: {}", anomalies.len());
            for anomaly in &anomalies {
                println!(
                    "  {} {} at {} ({})",
                    anomaly.vehicle_id, anomaly.class, anomaly.at, anomaly.detail
                );
            }
            for pair in &correlations.pairs {
                println!("r({}, {}) = {:+.4} (n={})", pair.a, pair.b, pair.r, pair.samples);
            }
        }
    }
    println!("wrote {}", config.out_dir.display());
    Ok(())
}

fn train_command(config: &ScenarioConfig) -> Result<()> {
    let paths = telemetry_paths(config, &[])?;
    let (records, _) = read_records(&paths)?;
    let series = derive_fleet_series(&records, &config.profile, config.bucket_s)?;
    let models_dir = config.out_dir.join("models");
    let loss_dir = config.out_dir.join("loss_curves");
    fs::create_dir_all(&models_dir)?;
    fs::create_dir_all(&loss_dir)?;
    for (name, values) in &series {
        let seed = derive_seed(config.seed, &format!("forecast:{name}"));
        let tuning = bayes_optimize(
            values,
            &config.forecast.space,
            config.forecast.budget,
            config.split,
            seed,
        )?;
        let (model, diagnostics) = train(values, &tuning.best, config.split)?;
        fs::write(
            models_dir.join(format!("{name}.json")),
            serde_json::to_string_pretty(&model).expect("serializable") + "\n",
        )?;
        fs::write(
            loss_dir.join(format!("{name}.csv")),
            loss_curve_csv(&diagnostics.loss_curve),
        )?;
        println!(
            "{name}: hidden {} lr {:.5} window {} epochs {} | val mse {:.6} r2_test {}",
            tuning.best.hidden_size,
            tuning.best.learning_rate,
            tuning.best.window,
            tuning.best.epochs,
            tuning.best_validation_mse,
            diagnostics
                .r2_test
                .map_or("n/a".to_string(), |v| format!("{v:.6}")),
        );
    }
    println!("wrote {}", config.out_dir.display());
    Ok(())
}

fn simulate_command(config: &ScenarioConfig, format: ReportFormat) -> Result<()> {
    let result = run_scenario(config)?;
    write_outputs(&result, &config.out_dir)?;
    print!("{}", render(&result, format)?);
    println!("wrote {}", config.out_dir.display());
    Ok(())
}

fn report_command(config: &ScenarioConfig, format: ReportFormat) -> Result<()> {
    let path = config.out_dir.join("report.json");
    let text = fs::read_to_string(&path).map_err(|err| {
        Error::bad_input(format!("cannot read report `{}`: {err}", path.display()))
    })?;
    let result = parse_report_json(&text)?;
    print!("{}", render(&result, format)?);
    Ok(())
}

