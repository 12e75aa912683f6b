//! Driver-behavior mining over the canonical record stream.
//!
//! Works per vehicle on `(vehicle_id, timestamp)`-sorted slices: state
//! transitions, charging sessions, operation-mode distribution and
//! switching, three anomaly classes (temporal, state, mode), Pearson
//! correlations between SOC and its companion signals, and the per-vehicle
//! [`BehaviorProfile`] that feeds the ecology model.
//!
//! All operations are pure over immutable slices; fleet-level wrappers merge
//! per-vehicle results in vehicle-id order so output is deterministic.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::telemetry::{
    group_by_vehicle, ChargingStatus, OperationMode, TelemetryRecord, VehicleState,
};

/// One change of `vehicle_state` between adjacent records.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateTransition {
    pub vehicle_id: String,
    pub from_state: VehicleState,
    pub to_state: VehicleState,
    /// Epoch second of the record where the new state first appears.
    pub at: i64,
    /// Seconds the prior state lasted.
    pub dwell: i64,
}

/// Charging session kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChargingKind {
    Parked,
    WhileDriving,
}

/// A maximal run of records with one charging kind. Requires at least two
/// records so `end > start`; single-record charging blips carry no duration
/// and are skipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChargingSession {
    pub vehicle_id: String,
    pub kind: ChargingKind,
    pub start: i64,
    pub end: i64,
    pub soc_start: f64,
    pub soc_end: f64,
    /// Mean of the `power` field over the session; negative while energy
    /// flows into the battery under the sign convention of the schema.
    pub mean_power: f64,
}

/// Anomaly taxonomy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnomalyClass {
    Temporal,
    State,
    Mode,
}

impl fmt::Display for AnomalyClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let text = match self {
            AnomalyClass::Temporal => "temporal",
            AnomalyClass::State => "state",
            AnomalyClass::Mode => "mode",
        };
        f.write_str(text)
    }
}

/// Reason codes, partitioned by class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnomalyDetail {
    // Temporal
    NonMonotoneTimestamp,
    DuplicateTimestamp,
    GapTooLarge,
    // State
    ImmediateShutdown,
    SocDropWhileParkedCharging,
    // Mode
    FuelWhileCharging,
    ShortModeDwell,
}

impl AnomalyDetail {
    pub fn class(self) -> AnomalyClass {
        match self {
            AnomalyDetail::NonMonotoneTimestamp
            | AnomalyDetail::DuplicateTimestamp
            | AnomalyDetail::GapTooLarge => AnomalyClass::Temporal,
            AnomalyDetail::ImmediateShutdown | AnomalyDetail::SocDropWhileParkedCharging => {
                AnomalyClass::State
            }
            AnomalyDetail::FuelWhileCharging | AnomalyDetail::ShortModeDwell => AnomalyClass::Mode,
        }
    }
}

impl fmt::Display for AnomalyDetail {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let text = match self {
            AnomalyDetail::NonMonotoneTimestamp => "non_monotone_timestamp",
            AnomalyDetail::DuplicateTimestamp => "duplicate_timestamp",
            AnomalyDetail::GapTooLarge => "gap_too_large",
            AnomalyDetail::ImmediateShutdown => "immediate_shutdown",
            AnomalyDetail::SocDropWhileParkedCharging => "soc_drop_while_parked_charging",
            AnomalyDetail::FuelWhileCharging => "fuel_while_charging",
            AnomalyDetail::ShortModeDwell => "short_mode_dwell",
        };
        f.write_str(text)
    }
}

/// One detected irregularity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Anomaly {
    pub class: AnomalyClass,
    pub vehicle_id: String,
    pub at: i64,
    pub detail: AnomalyDetail,
}

/// Thresholds for anomaly detection (seconds).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnomalyConfig {
    /// A timestamp gap beyond this is a temporal anomaly.
    pub max_gap_s: i64,
    /// Startup followed by Shutdown within this span is an immediate
    /// shutdown.
    pub min_session_s: i64,
    /// A mode entered by a switch and left again within this span is a
    /// short-dwell mode anomaly.
    pub min_mode_dwell_s: i64,
}

impl Default for AnomalyConfig {
    fn default() -> Self {
        AnomalyConfig {
            max_gap_s: 3600,
            min_session_s: 60,
            min_mode_dwell_s: 60,
        }
    }
}

/// Thresholds for behavior profiling. The source material names the
/// behaviors (overcharge, low-battery driving, excessive speed) without
/// quantifying them; these cutoffs are configuration, not constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProfileConfig {
    /// SOC at or above this at session end counts as an overcharge (%).
    pub high_soc: f64,
    /// SOC at or below this while driving counts as deep discharge (%).
    pub low_soc: f64,
    /// Speed at or above this counts as high-speed driving (km/h).
    pub high_speed_kmh: f64,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        ProfileConfig {
            high_soc: 95.0,
            low_soc: 20.0,
            high_speed_kmh: 100.0,
        }
    }
}

/// Per-vehicle derived behavior features; every fraction lies in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorProfile {
    pub vehicle_id: String,
    /// Fraction of charging sessions ending at or above the high-SOC cutoff.
    pub overcharge_rate: f64,
    /// Fraction of driving time spent at or below the low-SOC cutoff.
    pub deep_discharge_rate: f64,
    /// Fraction of driving time spent at or above the speed cutoff.
    pub high_speed_fraction: f64,
    pub mode_switch_count: usize,
    /// Fraction of running time spent in pure-electric mode.
    pub pure_electric_share: f64,
    /// Fraction of charging time spent in while-driving sessions.
    pub charge_while_driving_share: f64,
}

/// A mode switch event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeSwitch {
    pub at: i64,
    pub from: OperationMode,
    pub to: OperationMode,
}

/// Pearson correlation for one variable pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCorrelation {
    pub a: String,
    pub b: String,
    pub r: f64,
    pub samples: usize,
}

/// A pair omitted from the report, with the reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmittedPair {
    pub a: String,
    pub b: String,
    pub reason: String,
}

/// Correlations between SOC and its companion signals.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub pairs: Vec<PairCorrelation>,
    pub omitted: Vec<OmittedPair>,
}

impl CorrelationReport {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        self.pairs
            .iter()
            .find(|p| p.a == a && p.b == b)
            .map(|p| p.r)
    }
}

/// Emits one transition per adjacent record pair whose `vehicle_state`
/// differs; `dwell` is the time the prior state lasted.
pub fn detect_state_changes(records: &[TelemetryRecord]) -> Vec<StateTransition> {
    let mut transitions = Vec::new();
    if records.is_empty() {
        return transitions;
    }
    let mut state_since = records[0].timestamp;
    for pair in records.windows(2) {
        let (prev, cur) = (&pair[0], &pair[1]);
        if prev.vehicle_state != cur.vehicle_state {
            transitions.push(StateTransition {
                vehicle_id: cur.vehicle_id.clone(),
                from_state: prev.vehicle_state,
                to_state: cur.vehicle_state,
                at: cur.timestamp,
                dwell: cur.timestamp - state_since,
            });
            state_since = cur.timestamp;
        }
    }
    transitions
}

/// Scans one vehicle's sorted stream for the three anomaly classes.
///
/// Temporal: non-monotone or duplicate timestamps, gaps wider than
/// `max_gap_s`. State: entering Shutdown within `min_session_s` of entering
/// Startup, and SOC dropping between consecutive parked-charging records.
/// Mode: fuel mode while charging, and a switched-into mode abandoned within
/// `min_mode_dwell_s`.
pub fn detect_anomalies(records: &[TelemetryRecord], config: &AnomalyConfig) -> Vec<Anomaly> {
    let mut anomalies = Vec::new();
    if records.is_empty() {
        return anomalies;
    }

    let mut push = |detail: AnomalyDetail, at: i64, vehicle_id: &str| {
        anomalies.push(Anomaly {
            class: detail.class(),
            vehicle_id: vehicle_id.to_string(),
            at,
            detail,
        });
    };

    // Single-record checks.
    for record in records {
        if record.operation_mode == OperationMode::Fuel && record.charging_status.is_charging() {
            push(
                AnomalyDetail::FuelWhileCharging,
                record.timestamp,
                &record.vehicle_id,
            );
        }
    }

    // Span trackers: when the current Startup span and mode began, and
    // whether the running mode was entered by an observed switch.
    let first = &records[0];
    let mut startup_since = (first.vehicle_state == VehicleState::Startup)
        .then_some(first.timestamp);
    let mut mode_since = first.timestamp;
    let mut mode_was_switched_into = false;

    for pair in records.windows(2) {
        let (prev, cur) = (&pair[0], &pair[1]);
        let id = cur.vehicle_id.as_str();
        let gap = cur.timestamp - prev.timestamp;

        if gap < 0 {
            push(AnomalyDetail::NonMonotoneTimestamp, cur.timestamp, id);
        } else if gap == 0 {
            push(AnomalyDetail::DuplicateTimestamp, cur.timestamp, id);
        } else if gap > config.max_gap_s {
            push(AnomalyDetail::GapTooLarge, cur.timestamp, id);
        }

        if prev.vehicle_state != cur.vehicle_state {
            match cur.vehicle_state {
                VehicleState::Startup => startup_since = Some(cur.timestamp),
                VehicleState::Shutdown => {
                    if let Some(since) = startup_since.take() {
                        if cur.timestamp - since < config.min_session_s {
                            push(AnomalyDetail::ImmediateShutdown, cur.timestamp, id);
                        }
                    }
                }
                VehicleState::Running => {}
            }
        }

        if prev.charging_status == ChargingStatus::ParkedCharging
            && cur.charging_status == ChargingStatus::ParkedCharging
            && cur.soc < prev.soc
        {
            push(AnomalyDetail::SocDropWhileParkedCharging, cur.timestamp, id);
        }

        if prev.operation_mode != cur.operation_mode {
            if mode_was_switched_into && cur.timestamp - mode_since < config.min_mode_dwell_s {
                push(AnomalyDetail::ShortModeDwell, cur.timestamp, id);
            }
            mode_since = cur.timestamp;
            mode_was_switched_into = true;
        }
    }

    anomalies.sort_by_key(|a| (a.at, a.class, a.detail));
    anomalies
}

/// Runs [`detect_anomalies`] per vehicle and merges in vehicle-id order.
pub fn detect_anomalies_fleet(
    records: &[TelemetryRecord],
    config: &AnomalyConfig,
) -> Vec<Anomaly> {
    group_by_vehicle(records)
        .into_iter()
        .flat_map(|(_, slice)| detect_anomalies(slice, config))
        .collect()
}

/// Collects maximal runs of charging records into sessions. A kind change
/// (parked vs while-driving) splits the run; `charging_complete` and
/// `not_charging` terminate it.
pub fn extract_charging_sessions(records: &[TelemetryRecord]) -> Vec<ChargingSession> {
    let mut sessions = Vec::new();
    let mut run: Vec<&TelemetryRecord> = Vec::new();
    let mut run_kind: Option<ChargingKind> = None;

    let mut flush = |run: &mut Vec<&TelemetryRecord>, kind: &mut Option<ChargingKind>| {
        if let Some(k) = *kind {
            if run.len() >= 2 {
                let first = run[0];
                let last = run[run.len() - 1];
                // Duplicate-timestamp runs carry no duration; skip them
                // like single-record blips.
                if last.timestamp > first.timestamp {
                    let mean_power =
                        run.iter().map(|r| r.power).sum::<f64>() / run.len() as f64;
                    sessions.push(ChargingSession {
                        vehicle_id: first.vehicle_id.clone(),
                        kind: k,
                        start: first.timestamp,
                        end: last.timestamp,
                        soc_start: first.soc,
                        soc_end: last.soc,
                        mean_power,
                    });
                }
            }
        }
        run.clear();
        *kind = None;
    };

    for record in records {
        let kind = match record.charging_status {
            ChargingStatus::ParkedCharging => Some(ChargingKind::Parked),
            ChargingStatus::DrivingCharging => Some(ChargingKind::WhileDriving),
            ChargingStatus::NotCharging | ChargingStatus::ChargingComplete => None,
        };
        match kind {
            Some(k) if run_kind == Some(k) => run.push(record),
            Some(k) => {
                flush(&mut run, &mut run_kind);
                run_kind = Some(k);
                run.push(record);
            }
            None => flush(&mut run, &mut run_kind),
        }
    }
    flush(&mut run, &mut run_kind);
    sessions
}

/// Per-record dwell times. Each record owns the interval to its successor;
/// the final record gets the median inter-record gap so it is not
/// zero-weighted and no sampling rate has to be invented. A single-record
/// stream gets a unit dwell.
pub fn record_dwells(records: &[TelemetryRecord]) -> Vec<f64> {
    let n = records.len();
    if n == 0 {
        return Vec::new();
    }
    if n == 1 {
        return vec![1.0];
    }
    let mut gaps: Vec<f64> = records
        .windows(2)
        .map(|w| (w[1].timestamp - w[0].timestamp) as f64)
        .collect();
    let mut dwells = gaps.clone();
    gaps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = if gaps.len() % 2 == 1 {
        gaps[gaps.len() / 2]
    } else {
        (gaps[gaps.len() / 2 - 1] + gaps[gaps.len() / 2]) / 2.0
    };
    dwells.push(median);
    dwells
}

/// Time share per operation mode plus the switch events.
///
/// Shares sum to 1 for any nonempty stream; when every dwell is zero
/// (all-duplicate timestamps) the fallback weights records uniformly.
pub fn mode_statistics(
    records: &[TelemetryRecord],
) -> Result<(BTreeMap<OperationMode, f64>, Vec<ModeSwitch>)> {
    if records.is_empty() {
        return Err(Error::EmptyStream);
    }

    let dwells = record_dwells(records);
    let total: f64 = dwells.iter().sum();
    let mut shares: BTreeMap<OperationMode, f64> = BTreeMap::new();
    if total > 0.0 {
        for (record, dwell) in records.iter().zip(&dwells) {
            *shares.entry(record.operation_mode).or_insert(0.0) += dwell / total;
        }
    } else {
        let weight = 1.0 / records.len() as f64;
        for record in records {
            *shares.entry(record.operation_mode).or_insert(0.0) += weight;
        }
    }

    let switches = records
        .windows(2)
        .filter(|w| w[0].operation_mode != w[1].operation_mode)
        .map(|w| ModeSwitch {
            at: w[1].timestamp,
            from: w[0].operation_mode,
            to: w[1].operation_mode,
        })
        .collect();

    Ok((shares, switches))
}

/// Sample Pearson correlation coefficient, clamped into [-1, 1].
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::bad_input("series lengths differ"));
    }
    if a.len() < 2 {
        return Err(Error::bad_input("need at least two samples"));
    }
    let n = a.len() as f64;
    let mean_a = a.iter().sum::<f64>() / n;
    let mean_b = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for (x, y) in a.iter().zip(b) {
        let da = x - mean_a;
        let db = y - mean_b;
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    if var_a == 0.0 || var_b == 0.0 {
        return Err(Error::DegenerateSeries(
            "zero variance in correlation input".to_string(),
        ));
    }
    Ok((cov / (var_a.sqrt() * var_b.sqrt())).clamp(-1.0, 1.0))
}

/// A Startup→Shutdown span with its odometer delta.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trip {
    pub vehicle_id: String,
    pub start: i64,
    pub end: i64,
    /// `sum_mileage` delta over the span, km.
    pub distance_km: f64,
    /// SOC at the end of the trip.
    pub soc_end: f64,
}

/// Cuts one vehicle's stream into trips: a trip opens when the state enters
/// Startup (or the stream begins in Startup/Running) and closes when it
/// enters Shutdown.
pub fn extract_trips(records: &[TelemetryRecord]) -> Vec<Trip> {
    let mut trips = Vec::new();
    let mut open: Option<&TelemetryRecord> = None;
    for (idx, record) in records.iter().enumerate() {
        let entered = idx == 0
            || records[idx - 1].vehicle_state != record.vehicle_state;
        match record.vehicle_state {
            VehicleState::Startup if entered => open = Some(record),
            VehicleState::Running if open.is_none() => open = Some(record),
            VehicleState::Shutdown if entered => {
                if let Some(start) = open.take() {
                    trips.push(Trip {
                        vehicle_id: start.vehicle_id.clone(),
                        start: start.timestamp,
                        end: record.timestamp,
                        distance_km: record.sum_mileage - start.sum_mileage,
                        soc_end: record.soc,
                    });
                }
            }
            _ => {}
        }
    }
    trips
}

/// Fleet-level correlation report for the six SOC pairs.
///
/// Record-level pairs use every record; the speed pair is restricted to
/// records in the Running state so parked zeros do not wash out the driving
/// relation; the trip-distance pair uses one sample per completed trip,
/// pairing distance with end-of-trip SOC. Degenerate pairs are omitted and
/// noted.
pub fn correlation_report(records: &[TelemetryRecord]) -> Result<CorrelationReport> {
    if records.len() < 2 {
        return Err(Error::bad_input("need at least two records"));
    }
    let mut report = CorrelationReport::default();
    let mut add = |a: &str, b: &str, xs: Vec<f64>, ys: Vec<f64>| match pearson(&xs, &ys) {
        Ok(r) => report.pairs.push(PairCorrelation {
            a: a.to_string(),
            b: b.to_string(),
            r,
            samples: xs.len(),
        }),
        Err(err) => report.omitted.push(OmittedPair {
            a: a.to_string(),
            b: b.to_string(),
            reason: err.to_string(),
        }),
    };

    let soc: Vec<f64> = records.iter().map(|r| r.soc).collect();
    for (name, values) in [
        (
            "sum_mileage",
            records.iter().map(|r| r.sum_mileage).collect::<Vec<_>>(),
        ),
        (
            "sum_voltage",
            records.iter().map(|r| r.sum_voltage).collect(),
        ),
        (
            "sum_current",
            records.iter().map(|r| r.sum_current).collect(),
        ),
        ("power", records.iter().map(|r| r.power).collect()),
    ] {
        add("soc", name, soc.clone(), values);
    }

    let driving: Vec<&TelemetryRecord> = records
        .iter()
        .filter(|r| r.vehicle_state == VehicleState::Running)
        .collect();
    add(
        "soc",
        "speed",
        driving.iter().map(|r| r.soc).collect(),
        driving.iter().map(|r| r.speed).collect(),
    );

    let trips: Vec<Trip> = group_by_vehicle(records)
        .into_iter()
        .flat_map(|(_, slice)| extract_trips(slice))
        .collect();
    add(
        "soc",
        "trip_distance",
        trips.iter().map(|t| t.soc_end).collect(),
        trips.iter().map(|t| t.distance_km).collect(),
    );

    Ok(report)
}

/// Builds one vehicle's behavior profile. Deterministic given records and
/// thresholds, and invariant under uniform time translation.
pub fn build_profile(
    records: &[TelemetryRecord],
    thresholds: &ProfileConfig,
) -> Result<BehaviorProfile> {
    if records.is_empty() {
        return Err(Error::EmptyStream);
    }
    let vehicle_id = records[0].vehicle_id.clone();
    let dwells = record_dwells(records);

    let sessions = extract_charging_sessions(records);
    let overcharge_rate = fraction(
        sessions
            .iter()
            .filter(|s| s.soc_end >= thresholds.high_soc)
            .count() as f64,
        sessions.len() as f64,
    );

    let mut driving_time = 0.0;
    let mut deep_discharge_time = 0.0;
    let mut high_speed_time = 0.0;
    let mut pure_electric_time = 0.0;
    for (record, dwell) in records.iter().zip(&dwells) {
        if record.vehicle_state != VehicleState::Running {
            continue;
        }
        driving_time += dwell;
        if record.soc <= thresholds.low_soc {
            deep_discharge_time += dwell;
        }
        if record.speed >= thresholds.high_speed_kmh {
            high_speed_time += dwell;
        }
        if record.operation_mode == OperationMode::PureElectric {
            pure_electric_time += dwell;
        }
    }

    let mode_switch_count = records
        .windows(2)
        .filter(|w| w[0].operation_mode != w[1].operation_mode)
        .count();

    let charging_total: f64 = sessions.iter().map(|s| (s.end - s.start) as f64).sum();
    let charging_while_driving: f64 = sessions
        .iter()
        .filter(|s| s.kind == ChargingKind::WhileDriving)
        .map(|s| (s.end - s.start) as f64)
        .sum();

    Ok(BehaviorProfile {
        vehicle_id,
        overcharge_rate,
        deep_discharge_rate: fraction(deep_discharge_time, driving_time),
        high_speed_fraction: fraction(high_speed_time, driving_time),
        mode_switch_count,
        pure_electric_share: fraction(pure_electric_time, driving_time),
        charge_while_driving_share: fraction(charging_while_driving, charging_total),
    })
}

/// Builds profiles for every vehicle in a sorted fleet stream.
pub fn build_profiles_fleet(
    records: &[TelemetryRecord],
    thresholds: &ProfileConfig,
) -> Result<Vec<BehaviorProfile>> {
    group_by_vehicle(records)
        .into_iter()
        .map(|(_, slice)| build_profile(slice, thresholds))
        .collect()
}

fn fraction(numerator: f64, denominator: f64) -> f64 {
    if denominator > 0.0 {
        (numerator / denominator).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

/// One CSV row per anomaly: `vehicle_id,class,at,detail`.
pub fn anomalies_to_csv(anomalies: &[Anomaly]) -> String {
    let mut out = String::from("vehicle_id,class,at,detail\n");
    for a in anomalies {
        out.push_str(&format!(
            "{},{},{},{}\n",
            a.vehicle_id, a.class, a.at, a.detail
        ));
    }
    out
}

/// One CSV row per profile.
pub fn profiles_to_csv(profiles: &[BehaviorProfile]) -> String {
    let mut out = String::from(
        "vehicle_id,overcharge_rate,deep_discharge_rate,high_speed_fraction,mode_switch_count,pure_electric_share,charge_while_driving_share\n",
    );
    for p in profiles {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            p.vehicle_id,
            p.overcharge_rate,
            p.deep_discharge_rate,
            p.high_speed_fraction,
            p.mode_switch_count,
            p.pure_electric_share,
            p.charge_while_driving_share,
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(t: i64, state: VehicleState, charge: ChargingStatus, mode: OperationMode) -> TelemetryRecord {
        TelemetryRecord {
            timestamp: t,
            vehicle_id: "v1".to_string(),
            vehicle_state: state,
            charging_status: charge,
            operation_mode: mode,
            soc: 50.0,
            sum_mileage: 100.0,
            sum_voltage: 360.0,
            sum_current: 20.0,
            speed: 40.0,
            power: 7.2,
        }
    }

    fn driving(t: i64) -> TelemetryRecord {
        rec(
            t,
            VehicleState::Running,
            ChargingStatus::NotCharging,
            OperationMode::PureElectric,
        )
    }

    #[test]
    fn constant_state_has_no_transitions() {
        let records = vec![driving(0), driving(10), driving(20)];
        assert!(detect_state_changes(&records).is_empty());
    }

    #[test]
    fn transition_dwell_is_time_in_prior_state() {
        let mut a = driving(0);
        a.vehicle_state = VehicleState::Startup;
        let b = driving(10);
        let transitions = detect_state_changes(&[a, b]);
        assert_eq!(transitions.len(), 1);
        assert_eq!(transitions[0].from_state, VehicleState::Startup);
        assert_eq!(transitions[0].to_state, VehicleState::Running);
        assert_eq!(transitions[0].at, 10);
        assert_eq!(transitions[0].dwell, 10);
    }

    #[test]
    fn startup_then_shutdown_is_one_transition() {
        let mut a = driving(0);
        a.vehicle_state = VehicleState::Startup;
        let mut b = driving(1);
        b.vehicle_state = VehicleState::Shutdown;
        let transitions = detect_state_changes(&[a, b]);
        assert_eq!(transitions.len(), 1);
        assert_eq!(transitions[0].dwell, 1);
    }

    #[test]
    fn clean_stream_has_no_anomalies() {
        let records = vec![driving(0), driving(60), driving(120)];
        assert!(detect_anomalies(&records, &AnomalyConfig::default()).is_empty());
    }

    #[test]
    fn immediate_shutdown_flagged() {
        let mut a = driving(0);
        a.vehicle_state = VehicleState::Startup;
        let mut b = driving(1);
        b.vehicle_state = VehicleState::Shutdown;
        let anomalies = detect_anomalies(&[a, b], &AnomalyConfig::default());
        assert_eq!(anomalies.len(), 1);
        assert_eq!(anomalies[0].class, AnomalyClass::State);
        assert_eq!(anomalies[0].detail, AnomalyDetail::ImmediateShutdown);
        assert_eq!(anomalies[0].at, 1);
    }

    #[test]
    fn fuel_while_charging_flagged() {
        let record = rec(
            0,
            VehicleState::Shutdown,
            ChargingStatus::ParkedCharging,
            OperationMode::Fuel,
        );
        let anomalies = detect_anomalies(&[record], &AnomalyConfig::default());
        assert_eq!(anomalies.len(), 1);
        assert_eq!(anomalies[0].class, AnomalyClass::Mode);
        assert_eq!(anomalies[0].detail, AnomalyDetail::FuelWhileCharging);
    }

    #[test]
    fn temporal_anomalies_flagged() {
        let config = AnomalyConfig {
            max_gap_s: 100,
            ..Default::default()
        };
        let records = vec![driving(0), driving(0), driving(500)];
        let anomalies = detect_anomalies(&records, &config);
        let details: Vec<AnomalyDetail> = anomalies.iter().map(|a| a.detail).collect();
        assert_eq!(
            details,
            vec![AnomalyDetail::DuplicateTimestamp, AnomalyDetail::GapTooLarge]
        );
    }

    #[test]
    fn soc_drop_while_parked_charging_flagged() {
        let mut a = rec(
            0,
            VehicleState::Shutdown,
            ChargingStatus::ParkedCharging,
            OperationMode::PureElectric,
        );
        a.soc = 50.0;
        let mut b = a.clone();
        b.timestamp = 60;
        b.soc = 45.0;
        let anomalies = detect_anomalies(&[a, b], &AnomalyConfig::default());
        assert_eq!(anomalies.len(), 1);
        assert_eq!(anomalies[0].detail, AnomalyDetail::SocDropWhileParkedCharging);
    }

    #[test]
    fn short_mode_dwell_flagged_only_for_switched_modes() {
        let mut records = vec![driving(0), driving(300)];
        let mut c = driving(360);
        c.operation_mode = OperationMode::Hybrid;
        let mut d = driving(370);
        d.operation_mode = OperationMode::PureElectric;
        records.push(c);
        records.push(d);
        let anomalies = detect_anomalies(&records, &AnomalyConfig::default());
        assert_eq!(anomalies.len(), 1);
        assert_eq!(anomalies[0].detail, AnomalyDetail::ShortModeDwell);
        assert_eq!(anomalies[0].at, 370);

        // The first observed mode has unknown onset; leaving it quickly is
        // not an anomaly.
        let mut early = driving(0);
        early.operation_mode = OperationMode::Hybrid;
        let late = driving(10);
        assert!(detect_anomalies(&[early, late], &AnomalyConfig::default()).is_empty());
    }

    /// Immediate-shutdown detection is monotone in the threshold.
    #[test]
    fn immediate_shutdown_threshold_monotone() {
        let mut records = Vec::new();
        for (start, end) in [(0, 30), (1000, 1090), (5000, 5400)] {
            let mut up = driving(start);
            up.vehicle_state = VehicleState::Startup;
            let mid = driving((start + end) / 2);
            let mut down = driving(end);
            down.vehicle_state = VehicleState::Shutdown;
            records.extend([up, mid, down]);
        }
        let at_threshold = |s: i64| -> Vec<i64> {
            detect_anomalies(
                &records,
                &AnomalyConfig {
                    min_session_s: s,
                    max_gap_s: 10_000,
                    ..Default::default()
                },
            )
            .into_iter()
            .filter(|a| a.detail == AnomalyDetail::ImmediateShutdown)
            .map(|a| a.at)
            .collect()
        };
        let mut previous: Vec<i64> = Vec::new();
        for s in [10, 40, 100, 500, 10_000] {
            let current = at_threshold(s);
            assert!(
                previous.iter().all(|at| current.contains(at)),
                "threshold {s} dropped anomalies {previous:?} -> {current:?}"
            );
            previous = current;
        }
    }

    #[test]
    fn no_charging_records_no_sessions() {
        let records = vec![driving(0), driving(60)];
        assert!(extract_charging_sessions(&records).is_empty());
    }

    #[test]
    fn parked_session_tracks_soc() {
        let mut records = Vec::new();
        for (t, soc) in [(0, 20.0), (60, 40.0), (120, 60.0)] {
            let mut r = rec(
                t,
                VehicleState::Shutdown,
                ChargingStatus::ParkedCharging,
                OperationMode::PureElectric,
            );
            r.soc = soc;
            records.push(r);
        }
        let sessions = extract_charging_sessions(&records);
        assert_eq!(sessions.len(), 1);
        let s = &sessions[0];
        assert_eq!(s.kind, ChargingKind::Parked);
        assert_eq!((s.start, s.end), (0, 120));
        assert_eq!((s.soc_start, s.soc_end), (20.0, 60.0));
    }

    #[test]
    fn kind_split_produces_two_sessions() {
        let mut records = Vec::new();
        for t in [0, 60] {
            records.push(rec(
                t,
                VehicleState::Shutdown,
                ChargingStatus::ParkedCharging,
                OperationMode::PureElectric,
            ));
        }
        records.push(driving(120));
        for t in [180, 240] {
            records.push(rec(
                t,
                VehicleState::Running,
                ChargingStatus::DrivingCharging,
                OperationMode::Hybrid,
            ));
        }
        let sessions = extract_charging_sessions(&records);
        assert_eq!(sessions.len(), 2);
        assert_eq!(sessions[0].kind, ChargingKind::Parked);
        assert_eq!(sessions[1].kind, ChargingKind::WhileDriving);
    }

    #[test]
    fn mode_statistics_single_mode() {
        let records = vec![driving(0), driving(60)];
        let (shares, switches) = mode_statistics(&records).unwrap();
        assert_eq!(shares.len(), 1);
        assert!((shares[&OperationMode::PureElectric] - 1.0).abs() < 1e-12);
        assert!(switches.is_empty());
    }

    #[test]
    fn mode_statistics_even_split() {
        let mut records = vec![driving(0), driving(60)];
        records[1].operation_mode = OperationMode::Hybrid;
        // Equal dwells: gap 60 for the first record, median gap 60 for the
        // last.
        let (shares, switches) = mode_statistics(&records).unwrap();
        assert!((shares[&OperationMode::PureElectric] - 0.5).abs() < 1e-12);
        assert!((shares[&OperationMode::Hybrid] - 0.5).abs() < 1e-12);
        assert_eq!(switches.len(), 1);
    }

    #[test]
    fn mode_statistics_counts_switches() {
        let modes = [
            OperationMode::PureElectric,
            OperationMode::Hybrid,
            OperationMode::PureElectric,
            OperationMode::Hybrid,
        ];
        let records: Vec<TelemetryRecord> = modes
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let mut r = driving(i as i64 * 60);
                r.operation_mode = *m;
                r
            })
            .collect();
        let (_, switches) = mode_statistics(&records).unwrap();
        assert_eq!(switches.len(), 3);
    }

    #[test]
    fn mode_statistics_rejects_empty() {
        assert!(matches!(mode_statistics(&[]), Err(Error::EmptyStream)));
    }

    #[test]
    fn pearson_exact_cases() {
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-12);
    }

    /// Direct evaluation of the covariance/sigma formula as the oracle.
    fn pearson_oracle(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let sa: f64 = a.iter().map(|x| (x - ma).powi(2)).sum::<f64>().sqrt();
        let sb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum::<f64>().sqrt();
        cov / (sa * sb)
    }

    #[test]
    fn pearson_matches_formula_oracle() {
        let a = [1.0, 2.0, 3.0];
        let b = [1.0, 3.0, 2.0];
        let expected = pearson_oracle(&a, &b);
        assert!((expected - 0.5).abs() < 1e-12);
        assert!((pearson(&a, &b).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn pearson_error_paths() {
        assert!(matches!(
            pearson(&[1.0, 2.0], &[1.0]),
            Err(Error::BadInput(_))
        ));
        assert!(matches!(pearson(&[1.0], &[1.0]), Err(Error::BadInput(_))));
        assert!(matches!(
            pearson(&[1.0, 1.0], &[1.0, 2.0]),
            Err(Error::DegenerateSeries(_))
        ));
    }

    #[test]
    fn correlation_report_signs_by_construction() {
        let mut records = Vec::new();
        for i in 0..50 {
            let mut r = driving(i * 60);
            r.soc = 90.0 - i as f64;
            r.sum_voltage = 300.0 + r.soc;
            r.speed = 120.0 - r.soc;
            records.push(r);
        }
        let report = correlation_report(&records).unwrap();
        assert!(report.get("soc", "sum_voltage").unwrap() > 0.0);
        assert!(report.get("soc", "speed").unwrap() < 0.0);
    }

    #[test]
    fn correlation_report_omits_degenerate_pairs() {
        // Two complete trips with every signal constant: all six pairs
        // degenerate, including the per-trip pair.
        let mut records = Vec::new();
        for trip in 0..2 {
            for (offset, state) in [
                (0, VehicleState::Startup),
                (60, VehicleState::Running),
                (120, VehicleState::Shutdown),
            ] {
                let mut r = driving(trip * 300 + offset);
                r.vehicle_state = state;
                records.push(r);
            }
        }
        let report = correlation_report(&records).unwrap();
        assert!(report.pairs.is_empty());
        assert_eq!(report.omitted.len(), 6);
        assert!(report.omitted.iter().all(|o| o.reason.contains("degenerate")));
    }

    fn profile_fixture() -> Vec<TelemetryRecord> {
        let mut records = Vec::new();
        // Trip: startup, four driving records, shutdown.
        let mut up = driving(0);
        up.vehicle_state = VehicleState::Startup;
        up.speed = 0.0;
        records.push(up);
        for (i, speed) in [120.0, 120.0, 40.0, 40.0].iter().enumerate() {
            let mut r = driving(60 + i as i64 * 60);
            r.speed = *speed;
            records.push(r);
        }
        let mut down = driving(300);
        down.vehicle_state = VehicleState::Shutdown;
        down.speed = 0.0;
        records.push(down);
        // Parked charge ending at 100%.
        for (t, soc) in [(360, 60.0), (420, 80.0), (480, 100.0)] {
            let mut r = rec(
                t,
                VehicleState::Shutdown,
                ChargingStatus::ParkedCharging,
                OperationMode::PureElectric,
            );
            r.soc = soc;
            records.push(r);
        }
        records
    }

    #[test]
    fn quiet_vehicle_profile_is_all_zero() {
        let records = vec![driving(0), driving(60), driving(120)];
        let p = build_profile(&records, &ProfileConfig::default()).unwrap();
        assert_eq!(p.overcharge_rate, 0.0);
        assert_eq!(p.deep_discharge_rate, 0.0);
        assert_eq!(p.high_speed_fraction, 0.0);
        assert_eq!(p.mode_switch_count, 0);
        assert_eq!(p.charge_while_driving_share, 0.0);
    }

    #[test]
    fn all_sessions_at_full_soc_gives_unit_overcharge() {
        let p = build_profile(&profile_fixture(), &ProfileConfig::default()).unwrap();
        assert_eq!(p.overcharge_rate, 1.0);
    }

    #[test]
    fn half_driving_time_fast_gives_half_fraction() {
        let p = build_profile(&profile_fixture(), &ProfileConfig::default()).unwrap();
        // Four driving records with equal dwell, two at 120 km/h.
        assert!((p.high_speed_fraction - 0.5).abs() < 1e-12);
    }

    #[test]
    fn profile_invariant_under_time_translation() {
        let records = profile_fixture();
        let shifted: Vec<TelemetryRecord> = records
            .iter()
            .map(|r| {
                let mut r = r.clone();
                r.timestamp += 86_400;
                r
            })
            .collect();
        let config = ProfileConfig::default();
        assert_eq!(
            build_profile(&records, &config).unwrap(),
            build_profile(&shifted, &config).unwrap()
        );
    }

    #[test]
    fn build_profile_rejects_empty() {
        assert!(matches!(
            build_profile(&[], &ProfileConfig::default()),
            Err(Error::EmptyStream)
        ));
    }

    proptest! {
        /// pearson is symmetric and detects exact affine dependence.
        #[test]
        fn pearson_symmetry_and_affine(
            values in proptest::collection::vec(-100.0f64..100.0, 3..30),
            alpha in prop_oneof![-10.0f64..-0.1, 0.1f64..10.0],
            beta in -50.0f64..50.0,
        ) {
            let spread = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                - values.iter().cloned().fold(f64::INFINITY, f64::min);
            prop_assume!(spread > 1e-6);
            let with_noise: Vec<f64> = values.iter().enumerate()
                .map(|(i, v)| v + (i as f64 * 0.37).sin())
                .collect();
            if let (Ok(ab), Ok(ba)) = (pearson(&values, &with_noise), pearson(&with_noise, &values)) {
                prop_assert!((ab - ba).abs() < 1e-12);
            }
            let affine: Vec<f64> = values.iter().map(|v| alpha * v + beta).collect();
            let r = pearson(&values, &affine).unwrap();
            prop_assert!((r - alpha.signum()).abs() < 1e-9);
        }

        /// Sessions from arbitrary sorted streams honor their invariants,
        /// and every profile fraction stays in [0, 1].
        #[test]
        fn sessions_and_profiles_hold_invariants(
            choices in proptest::collection::vec((0u8..4, 0u8..3, 0i64..3, 0.0f64..100.0, 0.0f64..160.0), 2..60),
        ) {
            let mut t = 0;
            let records: Vec<TelemetryRecord> = choices.iter().map(|(c, m, gap, soc, speed)| {
                let mut r = driving(t);
                r.charging_status = match c {
                    0 => ChargingStatus::ParkedCharging,
                    1 => ChargingStatus::DrivingCharging,
                    2 => ChargingStatus::NotCharging,
                    _ => ChargingStatus::ChargingComplete,
                };
                r.vehicle_state = match m {
                    0 => VehicleState::Startup,
                    1 => VehicleState::Running,
                    _ => VehicleState::Shutdown,
                };
                r.soc = *soc;
                r.speed = *speed;
                t += gap;
                r
            }).collect();

            for session in extract_charging_sessions(&records) {
                prop_assert!(session.end > session.start);
                prop_assert!(session.mean_power.is_finite());
            }
            let profile = build_profile(&records, &ProfileConfig::default()).unwrap();
            for fraction in [
                profile.overcharge_rate,
                profile.deep_discharge_rate,
                profile.high_speed_fraction,
                profile.pure_electric_share,
                profile.charge_while_driving_share,
            ] {
                prop_assert!((0.0..=1.0).contains(&fraction), "fraction {fraction}");
            }
        }

        /// Mode shares always sum to 1 for nonempty streams.
        #[test]
        fn mode_shares_sum_to_one(
            modes in proptest::collection::vec(0u8..3, 1..40),
            gaps in proptest::collection::vec(0i64..400, 40),
        ) {
            let mut t = 0;
            let records: Vec<TelemetryRecord> = modes.iter().zip(&gaps).map(|(m, g)| {
                let mut r = driving(t);
                r.operation_mode = match m {
                    0 => OperationMode::PureElectric,
                    1 => OperationMode::Hybrid,
                    _ => OperationMode::Fuel,
                };
                t += g;
                r
            }).collect();
            let (shares, _) = mode_statistics(&records).unwrap();
            let total: f64 = shares.values().sum();
            prop_assert!((total - 1.0).abs() < 1e-9);
        }
    }
}
