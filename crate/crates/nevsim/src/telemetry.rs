//! Ingestion of raw fleet telemetry.
//!
//! Parses the canonical CSV interchange format into validated
//! [`TelemetryRecord`]s, normalizes datetimes to UTC epoch seconds, and
//! checks stream-level consistency (mileage monotonicity, duplicate
//! timestamps). Out-of-range rows are quarantined in the [`IngestReport`]
//! rather than clamped, so downstream behavior statistics are never
//! silently distorted.
//!
//! CSV schema (header mandatory, `.` decimal separator):
//!
//! ```text
//! datetime,vehicle_id,vehicle_state,charging_status,operation_mode,
//! soc,sum_mileage,sum_voltage,sum_current,speed[,power]
//! ```
//!
//! `datetime` is `YYYY-MM-DD hh:mm:ss`, interpreted as UTC — the source
//! fleets publish no timezone, so a single convention keeps every analysis
//! reproducible. `power` (kW) is optional; when the column is absent it is
//! derived as `sum_voltage * sum_current / 1000`.

use std::collections::HashMap;
use std::fmt;
use std::io::Read;

use chrono::{DateTime, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Powertrain state reported by the vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VehicleState {
    Startup,
    Running,
    Shutdown,
}

/// Charging state reported by the vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChargingStatus {
    ParkedCharging,
    DrivingCharging,
    NotCharging,
    ChargingComplete,
}

impl ChargingStatus {
    /// True while energy is actively flowing into the battery.
    pub fn is_charging(self) -> bool {
        matches!(
            self,
            ChargingStatus::ParkedCharging | ChargingStatus::DrivingCharging
        )
    }
}

/// Drive mode reported by the vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperationMode {
    PureElectric,
    Hybrid,
    Fuel,
}

macro_rules! enum_text {
    ($ty:ty, $field:expr, [$(($variant:path, $text:expr)),+ $(,)?]) => {
        impl $ty {
            pub fn as_str(self) -> &'static str {
                match self {
                    $($variant => $text),+
                }
            }

            pub fn parse_field(text: &str) -> Result<Self> {
                match text {
                    $($text => Ok($variant),)+
                    other => Err(Error::Parse {
                        field: $field.to_string(),
                        message: format!("unknown value `{other}`"),
                    }),
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

enum_text!(
    VehicleState,
    "vehicle_state",
    [
        (VehicleState::Startup, "startup"),
        (VehicleState::Running, "running"),
        (VehicleState::Shutdown, "shutdown"),
    ]
);

enum_text!(
    ChargingStatus,
    "charging_status",
    [
        (ChargingStatus::ParkedCharging, "parked_charging"),
        (ChargingStatus::DrivingCharging, "driving_charging"),
        (ChargingStatus::NotCharging, "not_charging"),
        (ChargingStatus::ChargingComplete, "charging_complete"),
    ]
);

enum_text!(
    OperationMode,
    "operation_mode",
    [
        (OperationMode::PureElectric, "pure_electric"),
        (OperationMode::Hybrid, "hybrid"),
        (OperationMode::Fuel, "fuel"),
    ]
);

/// One timestamped fleet observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetryRecord {
    /// Seconds since the Unix epoch, UTC.
    pub timestamp: i64,
    pub vehicle_id: String,
    pub vehicle_state: VehicleState,
    pub charging_status: ChargingStatus,
    pub operation_mode: OperationMode,
    /// Battery state of charge, percent in [0, 100].
    pub soc: f64,
    /// Cumulative odometer, km.
    pub sum_mileage: f64,
    /// Pack voltage, V.
    pub sum_voltage: f64,
    /// Pack current, A; negative while charging.
    pub sum_current: f64,
    /// Vehicle speed, km/h.
    pub speed: f64,
    /// Electrical power, kW; derived from voltage and current when absent.
    pub power: f64,
}

/// Why a CSV row was quarantined.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum RejectReason {
    BadDatetime,
    BadEnum { field: String },
    BadNumber { field: String },
    MissingField { field: String },
    SocOutOfRange,
    NegativeSpeed,
    NegativeMileage,
    NegativeVoltage,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectReason::BadDatetime => write!(f, "malformed datetime"),
            RejectReason::BadEnum { field } => write!(f, "bad enum value in {field}"),
            RejectReason::BadNumber { field } => write!(f, "bad numeric value in {field}"),
            RejectReason::MissingField { field } => write!(f, "missing value in {field}"),
            RejectReason::SocOutOfRange => write!(f, "soc out of range"),
            RejectReason::NegativeSpeed => write!(f, "negative speed"),
            RejectReason::NegativeMileage => write!(f, "negative mileage"),
            RejectReason::NegativeVoltage => write!(f, "negative voltage"),
        }
    }
}

/// Outcome of one ingestion pass. `accepted + rejected` always equals the
/// number of data rows in the source.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub accepted: usize,
    pub rejected: usize,
    /// (1-based data row number, reason) for every quarantined row.
    pub rejections: Vec<(usize, RejectReason)>,
}

/// Stream-level consistency violations found by [`validate_stream`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StreamViolation {
    /// `sum_mileage` decreased between consecutive records of one vehicle.
    MileageDecrease,
    /// Two records of one vehicle share a timestamp.
    DuplicateTimestamp,
}

const MANDATORY_COLUMNS: [&str; 10] = [
    "datetime",
    "vehicle_id",
    "vehicle_state",
    "charging_status",
    "operation_mode",
    "soc",
    "sum_mileage",
    "sum_voltage",
    "sum_current",
    "speed",
];

/// Converts `YYYY-MM-DD hh:mm:ss` (UTC) into epoch seconds.
pub fn normalize_timestamp(datetime_text: &str) -> Result<i64> {
    let parsed = NaiveDateTime::parse_from_str(datetime_text, "%Y-%m-%d %H:%M:%S").map_err(
        |err| Error::Parse {
            field: "datetime".to_string(),
            message: format!("`{datetime_text}`: {err}"),
        },
    )?;
    Ok(parsed.and_utc().timestamp())
}

/// Inverse of [`normalize_timestamp`]; round-trips every valid datetime.
pub fn format_timestamp(epoch_seconds: i64) -> String {
    DateTime::from_timestamp(epoch_seconds, 0)
        .expect("epoch seconds within chrono range")
        .format("%Y-%m-%d %H:%M:%S")
        .to_string()
}

/// Parses the canonical CSV schema into a record stream plus an ingest
/// report. Malformed rows are quarantined with a reason, never dropped
/// silently, and the accepted records come back sorted by
/// `(vehicle_id, timestamp)` with input order preserved on ties.
pub fn parse_telemetry<R: Read>(source: R) -> Result<(Vec<TelemetryRecord>, IngestReport)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);

    let headers = reader.headers().map_err(csv_to_io)?.clone();
    let mut column_index: HashMap<&str, usize> = HashMap::new();
    for (idx, name) in headers.iter().enumerate() {
        column_index.insert(name, idx);
    }
    for column in MANDATORY_COLUMNS {
        if !column_index.contains_key(column) {
            return Err(Error::MissingColumn {
                column: column.to_string(),
            });
        }
    }
    let power_index = column_index.get("power").copied();
    let index_of = |name: &str| column_index[name];

    let mut records = Vec::new();
    let mut report = IngestReport::default();

    for (row_idx, row) in reader.records().enumerate() {
        let row_number = row_idx + 1;
        let row = row.map_err(csv_to_io)?;
        match parse_row(&row, &index_of, power_index) {
            Ok(record) => {
                report.accepted += 1;
                records.push(record);
            }
            Err(reason) => {
                report.rejected += 1;
                report.rejections.push((row_number, reason));
            }
        }
    }

    records.sort_by(|a, b| {
        a.vehicle_id
            .cmp(&b.vehicle_id)
            .then(a.timestamp.cmp(&b.timestamp))
    });

    Ok((records, report))
}

fn csv_to_io(err: csv::Error) -> Error {
    match err.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            format!("csv structure error: {other:?}"),
        )),
    }
}

fn parse_row(
    row: &csv::StringRecord,
    index_of: &dyn Fn(&str) -> usize,
    power_index: Option<usize>,
) -> std::result::Result<TelemetryRecord, RejectReason> {
    let field = |name: &str| -> std::result::Result<&str, RejectReason> {
        row.get(index_of(name))
            .filter(|v| !v.is_empty())
            .ok_or_else(|| RejectReason::MissingField {
                field: name.to_string(),
            })
    };
    let number = |name: &str| -> std::result::Result<f64, RejectReason> {
        let text = field(name)?;
        let value: f64 = text.parse().map_err(|_| RejectReason::BadNumber {
            field: name.to_string(),
        })?;
        if value.is_finite() {
            Ok(value)
        } else {
            Err(RejectReason::BadNumber {
                field: name.to_string(),
            })
        }
    };

    let timestamp =
        normalize_timestamp(field("datetime")?).map_err(|_| RejectReason::BadDatetime)?;
    let vehicle_id = field("vehicle_id")?.to_string();
    let vehicle_state =
        VehicleState::parse_field(field("vehicle_state")?).map_err(|_| RejectReason::BadEnum {
            field: "vehicle_state".to_string(),
        })?;
    let charging_status = ChargingStatus::parse_field(field("charging_status")?).map_err(|_| {
        RejectReason::BadEnum {
            field: "charging_status".to_string(),
        }
    })?;
    let operation_mode =
        OperationMode::parse_field(field("operation_mode")?).map_err(|_| RejectReason::BadEnum {
            field: "operation_mode".to_string(),
        })?;

    let soc = number("soc")?;
    if !(0.0..=100.0).contains(&soc) {
        return Err(RejectReason::SocOutOfRange);
    }
    let sum_mileage = number("sum_mileage")?;
    if sum_mileage < 0.0 {
        return Err(RejectReason::NegativeMileage);
    }
    let sum_voltage = number("sum_voltage")?;
    if sum_voltage < 0.0 {
        return Err(RejectReason::NegativeVoltage);
    }
    let sum_current = number("sum_current")?;
    let speed = number("speed")?;
    if speed < 0.0 {
        return Err(RejectReason::NegativeSpeed);
    }

    let power = match power_index {
        Some(idx) => match row.get(idx).filter(|v| !v.is_empty()) {
            Some(text) => text.parse().map_err(|_| RejectReason::BadNumber {
                field: "power".to_string(),
            })?,
            None => derived_power(sum_voltage, sum_current),
        },
        None => derived_power(sum_voltage, sum_current),
    };

    Ok(TelemetryRecord {
        timestamp,
        vehicle_id,
        vehicle_state,
        charging_status,
        operation_mode,
        soc,
        sum_mileage,
        sum_voltage,
        sum_current,
        speed,
        power,
    })
}

fn derived_power(sum_voltage: f64, sum_current: f64) -> f64 {
    sum_voltage * sum_current / 1000.0
}

/// Flags per-vehicle mileage decreases and duplicate timestamps in a stream
/// already sorted by `(vehicle_id, timestamp)`. Violations are data, not
/// failures: a clean stream yields an empty list.
pub fn validate_stream(records: &[TelemetryRecord]) -> Vec<(usize, StreamViolation)> {
    let mut violations = Vec::new();
    for idx in 1..records.len() {
        let (prev, cur) = (&records[idx - 1], &records[idx]);
        if prev.vehicle_id != cur.vehicle_id {
            continue;
        }
        if cur.timestamp == prev.timestamp {
            violations.push((idx, StreamViolation::DuplicateTimestamp));
        }
        if cur.sum_mileage < prev.sum_mileage {
            violations.push((idx, StreamViolation::MileageDecrease));
        }
    }
    violations
}

/// Groups a `(vehicle_id, timestamp)`-sorted stream into per-vehicle slices,
/// in vehicle-id order.
pub fn group_by_vehicle(records: &[TelemetryRecord]) -> Vec<(&str, &[TelemetryRecord])> {
    let mut groups = Vec::new();
    let mut start = 0;
    while start < records.len() {
        let id = records[start].vehicle_id.as_str();
        let mut end = start + 1;
        while end < records.len() && records[end].vehicle_id == id {
            end += 1;
        }
        groups.push((id, &records[start..end]));
        start = end;
    }
    groups
}

/// Serializes records back into the canonical CSV schema (with the optional
/// `power` column included).
pub fn records_to_csv(records: &[TelemetryRecord]) -> String {
    let mut out = String::from(
        "datetime,vehicle_id,vehicle_state,charging_status,operation_mode,soc,sum_mileage,sum_voltage,sum_current,speed,power\n",
    );
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            format_timestamp(r.timestamp),
            r.vehicle_id,
            r.vehicle_state,
            r.charging_status,
            r.operation_mode,
            r.soc,
            r.sum_mileage,
            r.sum_voltage,
            r.sum_current,
            r.speed,
            r.power,
        ));
    }
    out
}
