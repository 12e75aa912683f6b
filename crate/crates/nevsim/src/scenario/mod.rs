//! End-to-end scenario orchestration.
//!
//! Pipeline order is fixed: (1) ingest and validate telemetry, (2) behavior
//! profiles, anomalies, and correlations, (3) per-series model tuning and
//! recursive extension over the configured horizon, (4) entropy weights from
//! the extended indicator matrix, (5) "before" (observed end) and "after"
//! (extension end) indicator evaluation, (6) efficiency and standardized
//! deltas. The whole run is a pure function of the input files, the config,
//! and the master seed; per-stage seeds fan out through
//! [`crate::seeds::derive_seed`], so resizing one stage's workload never
//! perturbs another's draws.

pub mod plots;
pub mod report;
pub mod synthetic;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::behavior::{
    build_profiles_fleet, correlation_report, detect_anomalies_fleet, Anomaly, AnomalyConfig,
    BehaviorProfile, CorrelationReport, ProfileConfig,
};
use crate::ecomodel::{
    electricity_to_co2, evaluate_indicators, nev_efficiency, standardize, CoefficientSet,
    EcoNoise, IndicatorInputs, IndicatorVector,
};
use crate::error::{Error, Result};
use crate::forecast::{
    bayes_optimize, extend_series, test_predictions, train, FitDiagnostics, ForecastModel,
    ForecastSearchSpace, HyperParams,
};
use crate::seeds::derive_seed;
use crate::telemetry::{
    group_by_vehicle, parse_telemetry, validate_stream, IngestReport, TelemetryRecord,
    VehicleState,
};
use crate::weighting::{weights_for, Direction, IndicatorMatrix, WeightVector};

/// Conversion applied when a forecast series feeds an indicator input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesConversion {
    /// Feed the value through unchanged.
    Direct,
    /// Treat the value as kWh drawn from the grid: convert to kg CO2 with
    /// the grid factor, then to a concentration with the dispersion
    /// coefficient.
    Co2Dispersion,
}

/// Maps one derived series onto one indicator input field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeriesMapEntry {
    pub series: String,
    pub input: String,
    #[serde(default = "default_conversion")]
    pub convert: SeriesConversion,
}

fn default_conversion() -> SeriesConversion {
    SeriesConversion::Direct
}

/// Tuning budget and bounds for stage 3.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForecastConfig {
    pub budget: usize,
    pub space: ForecastSearchSpace,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        ForecastConfig {
            budget: 25,
            space: ForecastSearchSpace::default(),
        }
    }
}

/// Static indicator drivers for the two snapshots. Fields mapped from
/// forecast series are overwritten by the pipeline.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InputsConfig {
    pub before: IndicatorInputs,
    pub after: IndicatorInputs,
}

/// Full scenario configuration (JSON on disk).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub telemetry: Vec<PathBuf>,
    pub out_dir: PathBuf,
    /// Master seed; every randomized stage derives its own from it.
    pub seed: u64,
    /// Extension steps beyond the observed series end.
    pub horizon: usize,
    /// Bucket width for deriving fleet series from telemetry, seconds.
    pub bucket_s: i64,
    /// Chronological train fraction for stage 3.
    pub split: f64,
    /// NEV penetration share (the "before" NEVI value).
    pub nev_population: f64,
    /// Per-scenario NEV population delta.
    pub delta_nev_population: f64,
    /// Grid emission factor, kg CO2 per kWh. Placeholder default; calibrate
    /// per deployment.
    pub grid_factor_kg_per_kwh: f64,
    /// Concentration added per kg CO2 emitted, mg/m3 per kg.
    pub dispersion_mg_m3_per_kg: f64,
    pub anomaly: AnomalyConfig,
    pub profile: ProfileConfig,
    pub forecast: ForecastConfig,
    pub series_map: Vec<SeriesMapEntry>,
    pub inputs: InputsConfig,
    pub coefficients: CoefficientSet,
    /// Efficiency weights override; `null` derives them by entropy
    /// weighting over the extended indicator matrix.
    pub weights: Option<[f64; 7]>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            telemetry: Vec::new(),
            out_dir: PathBuf::from("out"),
            seed: 42,
            horizon: 24,
            bucket_s: 3600,
            split: 0.8,
            nev_population: 0.316,
            delta_nev_population: 0.001321,
            grid_factor_kg_per_kwh: 0.5,
            dispersion_mg_m3_per_kg: 1e-6,
            anomaly: AnomalyConfig::default(),
            profile: ProfileConfig::default(),
            forecast: ForecastConfig::default(),
            series_map: default_series_map(),
            inputs: InputsConfig::default(),
            coefficients: CoefficientSet::default(),
            weights: None,
        }
    }
}

/// The standard wiring: battery stress drives charging behavior, the
/// high-speed fraction drives the speed index, and grid energy becomes a
/// traffic-pollution concentration via carbon conversion.
pub fn default_series_map() -> Vec<SeriesMapEntry> {
    vec![
        SeriesMapEntry {
            series: "soc_stress".to_string(),
            input: "charging_behavior".to_string(),
            convert: SeriesConversion::Direct,
        },
        SeriesMapEntry {
            series: "high_speed_fraction".to_string(),
            input: "driving_speed".to_string(),
            convert: SeriesConversion::Direct,
        },
        SeriesMapEntry {
            series: "energy_kwh".to_string(),
            input: "c_traffic".to_string(),
            convert: SeriesConversion::Co2Dispersion,
        },
    ]
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|err| {
            Error::Config(format!("cannot read config `{}`: {err}", path.display()))
        })?;
        let config: ScenarioConfig = serde_json::from_str(&text).map_err(|err| {
            Error::Config(format!("invalid config `{}`: {err}", path.display()))
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.nev_population) {
            return Err(Error::Config("nev_population must lie in [0, 1]".into()));
        }
        if !(self.split > 0.0 && self.split < 1.0) {
            return Err(Error::Config("split must lie in (0, 1)".into()));
        }
        if self.bucket_s <= 0 {
            return Err(Error::Config("bucket_s must be positive".into()));
        }
        if self.grid_factor_kg_per_kwh < 0.0 || self.dispersion_mg_m3_per_kg < 0.0 {
            return Err(Error::Config("conversion factors must be nonnegative".into()));
        }
        self.inputs
            .before
            .validate()
            .map_err(|e| Error::Config(format!("inputs.before: {e}")))?;
        self.inputs
            .after
            .validate()
            .map_err(|e| Error::Config(format!("inputs.after: {e}")))?;
        self.coefficients
            .validate()
            .map_err(|e| Error::Config(format!("coefficients: {e}")))?;
        if let Some(w) = &self.weights {
            if w.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config("weights override must be finite".into()));
            }
        }
        for entry in &self.series_map {
            set_input_field(&mut IndicatorInputs::default(), &entry.input, 0.0)
                .map_err(|e| Error::Config(format!("series_map: {e}")))?;
        }
        Ok(())
    }
}

/// Ingest totals per source file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub files: BTreeMap<String, IngestReport>,
    pub accepted: usize,
    pub rejected: usize,
    pub stream_violations: usize,
}

/// Anomaly counts by class.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AnomalySummary {
    pub temporal: usize,
    pub state: usize,
    pub mode: usize,
    pub total: usize,
}

/// Tuning and fit results for one extended series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesForecast {
    pub hyperparams: HyperParams,
    pub validation_mse: f64,
    pub diagnostics: FitDiagnostics,
}

/// The numeric series a forecast ran on, with its extension and the
/// held-out one-step predictions (for plotting).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesData {
    pub observed: Vec<f64>,
    /// The `horizon` values appended beyond the observed end.
    pub extension: Vec<f64>,
    pub test_actual: Vec<f64>,
    pub test_predicted: Vec<f64>,
}

/// Everything a scenario run produces. Serializes losslessly to JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub ingest: IngestSummary,
    pub anomalies: Vec<Anomaly>,
    pub anomaly_summary: AnomalySummary,
    pub profiles: Vec<BehaviorProfile>,
    pub correlations: CorrelationReport,
    pub forecast: BTreeMap<String, SeriesForecast>,
    pub series: BTreeMap<String, SeriesData>,
    pub models: BTreeMap<String, ForecastModel>,
    /// Entropy weights derived from the extended indicator matrix, when the
    /// matrix was non-degenerate.
    pub ewm: Option<WeightVector>,
    /// The weights actually applied to the efficiency aggregate.
    pub weights_used: [f64; 7],
    pub before: IndicatorVector,
    pub after: IndicatorVector,
    pub nevi_before: f64,
    pub nevi_after: f64,
    pub efficiency_before: f64,
    pub efficiency_after: f64,
    pub delta_nev_population: f64,
    pub delta_nev_efficiency: f64,
    pub standardized_growth: Option<f64>,
    pub standardized_efficiency: Option<f64>,
    pub notes: Vec<String>,
}

/// Writes a value into an indicator-input field by name.
fn set_input_field(inputs: &mut IndicatorInputs, field: &str, value: f64) -> Result<()> {
    let slot = match field {
        "pop" => &mut inputs.pop,
        "t_r" => &mut inputs.t_r,
        "alpha" => &mut inputs.alpha,
        "area" => &mut inputs.area,
        "c_industrial" => &mut inputs.c_industrial,
        "c_traffic" => &mut inputs.c_traffic,
        "c_waste" => &mut inputs.c_waste,
        "rad" => &mut inputs.rad,
        "d_temperature" => &mut inputs.d_temperature,
        "d_precipitation" => &mut inputs.d_precipitation,
        "vfc" => &mut inputs.vfc,
        "di" => &mut inputs.di,
        "r_recovery" => &mut inputs.r_recovery,
        "p_policy" => &mut inputs.p_policy,
        "charging_behavior" => &mut inputs.charging_behavior,
        "temperature_stress" => &mut inputs.temperature_stress,
        "driving_speed" => &mut inputs.driving_speed,
        "nevi" => &mut inputs.nevi,
        other => {
            return Err(Error::bad_input(format!(
                "unknown indicator input `{other}`"
            )))
        }
    };
    *slot = value;
    Ok(())
}

/// Field-wise linear interpolation between the two snapshots.
fn interpolate_inputs(before: &IndicatorInputs, after: &IndicatorInputs, frac: f64) -> IndicatorInputs {
    let mix = |a: f64, b: f64| a + (b - a) * frac;
    IndicatorInputs {
        pop: mix(before.pop, after.pop),
        t_r: mix(before.t_r, after.t_r),
        alpha: mix(before.alpha, after.alpha),
        area: mix(before.area, after.area),
        c_industrial: mix(before.c_industrial, after.c_industrial),
        c_traffic: mix(before.c_traffic, after.c_traffic),
        c_waste: mix(before.c_waste, after.c_waste),
        rad: mix(before.rad, after.rad),
        d_temperature: mix(before.d_temperature, after.d_temperature),
        d_precipitation: mix(before.d_precipitation, after.d_precipitation),
        vfc: mix(before.vfc, after.vfc),
        di: mix(before.di, after.di),
        r_recovery: mix(before.r_recovery, after.r_recovery),
        p_policy: mix(before.p_policy, after.p_policy),
        charging_behavior: mix(before.charging_behavior, after.charging_behavior),
        temperature_stress: mix(before.temperature_stress, after.temperature_stress),
        driving_speed: mix(before.driving_speed, after.driving_speed),
        nevi: mix(before.nevi, after.nevi),
    }
}

/// Stage 1: parse every telemetry file and merge into one sorted stream.
fn ingest(config: &ScenarioConfig) -> Result<(Vec<TelemetryRecord>, IngestSummary)> {
    if config.telemetry.is_empty() {
        return Err(Error::Config("no telemetry paths configured".into()));
    }
    let mut all_records = Vec::new();
    let mut files = BTreeMap::new();
    let mut accepted = 0;
    let mut rejected = 0;
    for path in &config.telemetry {
        let file = fs::File::open(path)
            .map_err(|err| Error::bad_input(format!("cannot open `{}`: {err}", path.display())))?;
        let (records, report) = parse_telemetry(file)?;
        accepted += report.accepted;
        rejected += report.rejected;
        files.insert(path.display().to_string(), report);
        all_records.extend(records);
    }
    all_records.sort_by(|a, b| {
        a.vehicle_id
            .cmp(&b.vehicle_id)
            .then(a.timestamp.cmp(&b.timestamp))
    });
    let stream_violations = validate_stream(&all_records).len();
    Ok((
        all_records,
        IngestSummary {
            files,
            accepted,
            rejected,
            stream_violations,
        },
    ))
}

/// Stage-3 input: fleet-level time series bucketed from the record stream.
///
/// `soc_stress` blends the per-bucket shares of records at or beyond the
/// high/low SOC cutoffs; `high_speed_fraction` is the share of running
/// records at or beyond the speed cutoff; `energy_kwh` sums grid energy
/// drawn while charging. Stock series carry the previous value through
/// empty buckets; the energy flow is zero there.
pub fn derive_fleet_series(
    records: &[TelemetryRecord],
    profile: &ProfileConfig,
    bucket_s: i64,
) -> Result<BTreeMap<String, Vec<f64>>> {
    if records.is_empty() {
        return Err(Error::EmptyStream);
    }
    let t0 = records.iter().map(|r| r.timestamp).min().expect("nonempty");
    let t1 = records.iter().map(|r| r.timestamp).max().expect("nonempty");
    let buckets = ((t1 - t0) / bucket_s) as usize + 1;

    #[derive(Default, Clone)]
    struct Accumulator {
        records: usize,
        high_soc: usize,
        low_soc: usize,
        running: usize,
        fast: usize,
        kwh: f64,
    }
    let mut acc = vec![Accumulator::default(); buckets];

    for (_, slice) in group_by_vehicle(records) {
        let dwells = crate::behavior::record_dwells(slice);
        for (record, dwell) in slice.iter().zip(&dwells) {
            let b = ((record.timestamp - t0) / bucket_s) as usize;
            let a = &mut acc[b];
            a.records += 1;
            if record.soc >= profile.high_soc {
                a.high_soc += 1;
            }
            if record.soc <= profile.low_soc {
                a.low_soc += 1;
            }
            if record.vehicle_state == VehicleState::Running {
                a.running += 1;
                if record.speed >= profile.high_speed_kmh {
                    a.fast += 1;
                }
            }
            if record.charging_status.is_charging() {
                a.kwh += (-record.power).max(0.0) * dwell / 3600.0;
            }
        }
    }

    let mut soc_stress = Vec::with_capacity(buckets);
    let mut high_speed = Vec::with_capacity(buckets);
    let mut energy = Vec::with_capacity(buckets);
    for a in &acc {
        let stress = if a.records > 0 {
            0.5 * a.high_soc as f64 / a.records as f64 + 0.5 * a.low_soc as f64 / a.records as f64
        } else {
            soc_stress.last().copied().unwrap_or(0.0)
        };
        soc_stress.push(stress);
        let fast = if a.running > 0 {
            a.fast as f64 / a.running as f64
        } else {
            high_speed.last().copied().unwrap_or(0.0)
        };
        high_speed.push(fast);
        energy.push(a.kwh);
    }

    let mut series = BTreeMap::new();
    series.insert("soc_stress".to_string(), soc_stress);
    series.insert("high_speed_fraction".to_string(), high_speed);
    series.insert("energy_kwh".to_string(), energy);
    Ok(series)
}

struct ForecastStage {
    forecast: BTreeMap<String, SeriesForecast>,
    series: BTreeMap<String, SeriesData>,
    models: BTreeMap<String, ForecastModel>,
}

/// Stage 3: tune, train, and extend every derived series.
fn run_forecast_stage(
    observed: &BTreeMap<String, Vec<f64>>,
    config: &ScenarioConfig,
) -> Result<ForecastStage> {
    let mut forecast = BTreeMap::new();
    let mut series_data = BTreeMap::new();
    let mut models = BTreeMap::new();
    for (name, values) in observed {
        let seed = derive_seed(config.seed, &format!("forecast:{name}"));
        let tuning = bayes_optimize(
            values,
            &config.forecast.space,
            config.forecast.budget,
            config.split,
            seed,
        )?;
        let (model, diagnostics) = train(values, &tuning.best, config.split)?;
        let extended = extend_series(&model, values, config.horizon)?;
        let (test_actual, test_predicted) = test_predictions(&model, values, config.split)?;
        forecast.insert(
            name.clone(),
            SeriesForecast {
                hyperparams: tuning.best.clone(),
                validation_mse: tuning.best_validation_mse,
                diagnostics,
            },
        );
        series_data.insert(
            name.clone(),
            SeriesData {
                observed: values.clone(),
                extension: extended[values.len()..].to_vec(),
                test_actual,
                test_predicted,
            },
        );
        models.insert(name.clone(), model);
    }
    Ok(ForecastStage {
        forecast,
        series: series_data,
        models,
    })
}

/// Value of a mapped series at extension step `s` (0 = observed end).
fn series_value_at(data: &SeriesData, step: usize) -> f64 {
    if step == 0 {
        *data.observed.last().expect("nonempty observed series")
    } else {
        data.extension[step - 1]
    }
}

/// Applies the series map onto an input snapshot for one extension step.
fn apply_series_map(
    inputs: &mut IndicatorInputs,
    config: &ScenarioConfig,
    series: &BTreeMap<String, SeriesData>,
    step: usize,
) -> Result<()> {
    for entry in &config.series_map {
        let data = series.get(&entry.series).ok_or_else(|| {
            Error::bad_input(format!("series_map names unknown series `{}`", entry.series))
        })?;
        let raw = series_value_at(data, step);
        let value = match entry.convert {
            SeriesConversion::Direct => raw,
            SeriesConversion::Co2Dispersion => {
                let kg = electricity_to_co2(raw.max(0.0), config.grid_factor_kg_per_kwh)?;
                kg * config.dispersion_mg_m3_per_kg
            }
        };
        set_input_field(inputs, &entry.input, value)?;
    }
    Ok(())
}

/// Inputs for extension step `s`: static drivers interpolate between the
/// configured snapshots, mapped drivers take the forecast values, and NEVI
/// sweeps from the population share to share + delta.
fn inputs_at_step(
    config: &ScenarioConfig,
    series: &BTreeMap<String, SeriesData>,
    step: usize,
) -> Result<IndicatorInputs> {
    let frac = if config.horizon == 0 {
        0.0
    } else {
        step as f64 / config.horizon as f64
    };
    let mut inputs = interpolate_inputs(&config.inputs.before, &config.inputs.after, frac);
    apply_series_map(&mut inputs, config, series, step)?;
    inputs.nevi = config.nev_population + frac * config.delta_nev_population;
    Ok(inputs)
}

/// Stage 4: entropy weights over the indicator matrix of the extension
/// window (one row per step, zero-noise evaluation).
fn derive_weights(
    config: &ScenarioConfig,
    series: &BTreeMap<String, SeriesData>,
) -> Result<(Option<WeightVector>, [f64; 7], Vec<String>)> {
    let mut notes = Vec::new();
    let mut quiet_coeffs = config.coefficients.clone();
    quiet_coeffs.noise = Default::default();
    let mut noise = EcoNoise::new(0);

    let ewm = if config.horizon >= 1 {
        let mut rows = Vec::with_capacity(config.horizon + 1);
        for step in 0..=config.horizon {
            let inputs = inputs_at_step(config, series, step)?;
            let v = evaluate_indicators(&inputs, &quiet_coeffs, &mut noise)?;
            rows.push(vec![v.ld, v.pc, v.cci, v.fr, v.wtr, inputs.nevi, v.lsbct]);
        }
        let names = ["ld", "pc", "cci", "fr", "wtr", "nevi", "lsbct"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let matrix = IndicatorMatrix::new(names, vec![Direction::Benefit; 7], rows)?;
        Some(weights_for(&matrix)?)
    } else {
        notes.push("horizon 0: indicator matrix degenerate, entropy weights unavailable".into());
        None
    };

    let weights_used: [f64; 7] = if let Some(w) = &config.weights {
        *w
    } else if let Some(ewm) = &ewm {
        let mut w = [0.0; 7];
        w.copy_from_slice(&ewm.weights);
        if !ewm.degenerate_columns.is_empty() {
            notes.push(format!(
                "entropy weighting flagged degenerate indicator columns {:?}",
                ewm.degenerate_columns
            ));
        }
        w
    } else {
        notes.push("falling back to uniform efficiency weights".into());
        [1.0 / 7.0; 7]
    };

    Ok((ewm, weights_used, notes))
}

/// Runs the whole pipeline. Deterministic given config + seed; any stage
/// error aborts with a stage-tagged diagnostic and nothing is written.
pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioResult> {
    config.validate()?;

    // Stage 1: ingest + validate.
    let (records, ingest_summary) = ingest(config).map_err(|e| e.at_stage("ingest"))?;
    if records.is_empty() {
        return Err(Error::EmptyStream.at_stage("ingest"));
    }

    // Stage 2: behavior mining.
    let anomalies = detect_anomalies_fleet(&records, &config.anomaly);
    let mut anomaly_summary = AnomalySummary::default();
    for anomaly in &anomalies {
        anomaly_summary.total += 1;
        match anomaly.class {
            crate::behavior::AnomalyClass::Temporal => anomaly_summary.temporal += 1,
            crate::behavior::AnomalyClass::State => anomaly_summary.state += 1,
            crate::behavior::AnomalyClass::Mode => anomaly_summary.mode += 1,
        }
    }
    let profiles =
        build_profiles_fleet(&records, &config.profile).map_err(|e| e.at_stage("behavior"))?;
    let correlations = correlation_report(&records).map_err(|e| e.at_stage("behavior"))?;

    // Stage 3: tune + extend the fleet series.
    let observed = derive_fleet_series(&records, &config.profile, config.bucket_s)
        .map_err(|e| e.at_stage("forecast"))?;
    let stage3 = run_forecast_stage(&observed, config).map_err(|e| e.at_stage("forecast"))?;

    // Stage 4: weights.
    let (ewm, weights_used, mut notes) =
        derive_weights(config, &stage3.series).map_err(|e| e.at_stage("weighting"))?;

    // Stage 5: before/after snapshots.
    let mut eco_noise = EcoNoise::new(derive_seed(config.seed, "ecomodel"));
    let mut inputs_before = config.inputs.before.clone();
    apply_series_map(&mut inputs_before, config, &stage3.series, 0)
        .map_err(|e| e.at_stage("ecomodel"))?;
    inputs_before.nevi = config.nev_population;
    let mut inputs_after = config.inputs.after.clone();
    apply_series_map(&mut inputs_after, config, &stage3.series, config.horizon)
        .map_err(|e| e.at_stage("ecomodel"))?;
    inputs_after.nevi = config.nev_population + config.delta_nev_population;

    let before = evaluate_indicators(&inputs_before, &config.coefficients, &mut eco_noise)
        .map_err(|e| e.at_stage("ecomodel"))?;
    let after = evaluate_indicators(&inputs_after, &config.coefficients, &mut eco_noise)
        .map_err(|e| e.at_stage("ecomodel"))?;

    // Stage 6: efficiency + standardization.
    let eps_before = eco_noise.draw(config.coefficients.noise.efficiency);
    let eps_after = eco_noise.draw(config.coefficients.noise.efficiency);
    let efficiency_before = nev_efficiency(&before, inputs_before.nevi, &weights_used, eps_before)
        .map_err(|e| e.at_stage("ecomodel"))?;
    let efficiency_after = nev_efficiency(&after, inputs_after.nevi, &weights_used, eps_after)
        .map_err(|e| e.at_stage("ecomodel"))?;
    let delta_nev_efficiency = efficiency_after - efficiency_before;

    let (standardized_growth, standardized_efficiency) =
        match standardize(config.delta_nev_population, config.delta_nev_population) {
            Ok(growth) => (
                Some(growth),
                Some(
                    standardize(delta_nev_efficiency, config.delta_nev_population)
                        .expect("nonzero denominator"),
                ),
            ),
            Err(Error::DegenerateDenominator) => {
                notes.push(
                    "delta NEV population is zero: standardization degenerate, values omitted"
                        .into(),
                );
                (None, None)
            }
            Err(other) => return Err(other.at_stage("ecomodel")),
        };

    Ok(ScenarioResult {
        ingest: ingest_summary,
        anomalies,
        anomaly_summary,
        profiles,
        correlations,
        forecast: stage3.forecast,
        series: stage3.series,
        models: stage3.models,
        ewm,
        weights_used,
        before,
        after,
        nevi_before: inputs_before.nevi,
        nevi_after: inputs_after.nevi,
        efficiency_before,
        efficiency_after,
        delta_nev_population: config.delta_nev_population,
        delta_nev_efficiency,
        standardized_growth,
        standardized_efficiency,
        notes,
    })
}
