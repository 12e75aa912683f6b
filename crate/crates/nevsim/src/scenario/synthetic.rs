//! Deterministic synthetic fleet generator.
//!
//! Stands in for real fleet telemetry in tests and the bundled fixture. The
//! simulated physics embeds the qualitative record-level relations the
//! analyses should recover: voltage rises with SOC, discharge current and
//! power fall with SOC, driving speed falls with SOC, and longer trips end
//! at lower SOC. The base fleet is anomaly-free under the default detection
//! thresholds; known quantities of immediate-shutdown and fuel-while-charging
//! events can be injected on demand, with the ground truth returned alongside
//! the records.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::seeds::derive_seed;
use crate::telemetry::{ChargingStatus, OperationMode, TelemetryRecord, VehicleState};

/// Generator knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub vehicles: usize,
    pub records_per_vehicle: usize,
    /// Epoch second of the first record.
    pub start: i64,
    /// Sampling interval, seconds.
    pub dt_s: i64,
    /// Fraction of the fleet that is hybrid (the rest is pure electric).
    pub hybrid_share: f64,
    pub seed: u64,
    /// Count of immediate-shutdown events to splice in.
    pub inject_immediate_shutdown: usize,
    /// Count of fuel-while-charging records to splice in.
    pub inject_fuel_while_charging: usize,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            vehicles: 4,
            records_per_vehicle: 720,
            start: 1_704_067_200, // 2024-01-01 00:00:00
            dt_s: 180,
            hybrid_share: 0.5,
            seed: 42,
            inject_immediate_shutdown: 0,
            inject_fuel_while_charging: 0,
        }
    }
}

/// Generated fleet plus the injection ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticFleet {
    /// Sorted by `(vehicle_id, timestamp)`.
    pub records: Vec<TelemetryRecord>,
    /// `(vehicle_id, shutdown timestamp)` per injected immediate shutdown.
    pub injected_immediate_shutdowns: Vec<(String, i64)>,
    /// `(vehicle_id, timestamp)` per injected fuel-while-charging record.
    pub injected_fuel_while_charging: Vec<(String, i64)>,
}

#[derive(Clone, Copy, PartialEq)]
enum Phase {
    Trip { remaining: usize },
    Charging { target_soc: f64 },
}

struct VehicleSim {
    id: String,
    hybrid: bool,
    rng: ChaCha12Rng,
    t: i64,
    dt: i64,
    soc: f64,
    mileage: f64,
    mode: OperationMode,
    phase: Phase,
    trip_step: usize,
    regen_remaining: usize,
}

impl VehicleSim {
    fn new(id: String, hybrid: bool, start: i64, dt: i64, seed: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let soc = rng.gen_range(60.0..95.0);
        let trip_len = rng.gen_range(8..=45);
        let mileage = rng.gen_range(1000.0..30_000.0);
        VehicleSim {
            id,
            hybrid,
            rng,
            t: start,
            dt,
            soc,
            mileage,
            mode: OperationMode::PureElectric,
            phase: Phase::Trip { remaining: trip_len },
            trip_step: 0,
            regen_remaining: 0,
        }
    }

    fn pick_trip_mode(&mut self) -> OperationMode {
        if !self.hybrid {
            return OperationMode::PureElectric;
        }
        if self.soc >= 50.0 {
            OperationMode::PureElectric
        } else if self.soc >= 25.0 && self.rng.gen_bool(0.5) {
            OperationMode::Fuel
        } else {
            OperationMode::Hybrid
        }
    }

    fn record(
        &mut self,
        state: VehicleState,
        charging: ChargingStatus,
        speed: f64,
        current: f64,
    ) -> TelemetryRecord {
        let voltage = 330.0 + 0.7 * self.soc + self.rng.gen_range(-2.0..2.0);
        let record = TelemetryRecord {
            timestamp: self.t,
            vehicle_id: self.id.clone(),
            vehicle_state: state,
            charging_status: charging,
            operation_mode: self.mode,
            soc: self.soc,
            sum_mileage: self.mileage,
            sum_voltage: voltage,
            sum_current: current,
            speed,
            power: voltage * current / 1000.0,
        };
        self.t += self.dt;
        record
    }

    fn step(&mut self) -> TelemetryRecord {
        match self.phase {
            Phase::Trip { remaining } => {
                if self.trip_step == 0 {
                    self.mode = self.pick_trip_mode();
                    self.trip_step = 1;
                    let idle = 2.0 + self.rng.gen_range(-0.5..0.5);
                    self.record(VehicleState::Startup, ChargingStatus::NotCharging, 0.0, idle)
                } else if remaining == 0 {
                    let idle = 1.0 + self.rng.gen_range(-0.5..0.5);
                    let record = self.record(
                        VehicleState::Shutdown,
                        ChargingStatus::NotCharging,
                        0.0,
                        idle,
                    );
                    self.finish_trip();
                    record
                } else {
                    let record = self.drive(remaining);
                    self.phase = Phase::Trip {
                        remaining: remaining - 1,
                    };
                    self.trip_step += 1;
                    record
                }
            }
            Phase::Charging { target_soc } => {
                self.soc = (self.soc + 2.2).min(100.0);
                let current = -(35.0 + self.rng.gen_range(-2.0..2.0));
                let record = self.record(
                    VehicleState::Shutdown,
                    ChargingStatus::ParkedCharging,
                    0.0,
                    current,
                );
                if self.soc >= target_soc {
                    let trip_len = self.rng.gen_range(8..=45);
                    self.phase = Phase::Trip {
                        remaining: trip_len,
                    };
                    self.trip_step = 0;
                }
                record
            }
        }
    }

    fn drive(&mut self, remaining: usize) -> TelemetryRecord {
        // Crossing below half charge pushes pure-electric hybrids into
        // hybrid mode.
        if self.hybrid
            && self.mode == OperationMode::PureElectric
            && self.soc < 45.0
            && self.trip_step > 2
        {
            self.mode = OperationMode::Hybrid;
        }
        let speed = (30.0 + 0.5 * (100.0 - self.soc) + self.rng.gen_range(-6.0..6.0)).max(2.0);
        let regen = if self.regen_remaining > 0 {
            self.regen_remaining -= 1;
            true
        } else if self.mode != OperationMode::Fuel && remaining > 6 && self.rng.gen_bool(0.05) {
            self.regen_remaining = self.rng.gen_range(3..6);
            false
        } else {
            false
        };
        self.mileage += speed * self.dt as f64 / 3600.0;
        if regen {
            self.soc = (self.soc + 0.4).min(100.0);
            let current = -(10.0 + self.rng.gen_range(-1.5..1.5));
            self.record(
                VehicleState::Running,
                ChargingStatus::DrivingCharging,
                speed,
                current,
            )
        } else {
            self.soc = (self.soc - (0.25 + 0.018 * speed)).max(5.0);
            let current = 8.0 + 1.6 * (100.0 - self.soc) + self.rng.gen_range(-4.0..4.0);
            self.record(
                VehicleState::Running,
                ChargingStatus::NotCharging,
                speed,
                current,
            )
        }
    }

    fn finish_trip(&mut self) {
        self.trip_step = 0;
        let threshold = 35.0 + self.rng.gen_range(0.0..10.0);
        if self.soc < threshold {
            if self.mode == OperationMode::Fuel {
                self.mode = OperationMode::PureElectric;
            }
            self.phase = Phase::Charging {
                target_soc: 88.0 + self.rng.gen_range(0.0..12.0),
            };
        } else {
            let trip_len = self.rng.gen_range(8..=45);
            self.phase = Phase::Trip {
                remaining: trip_len,
            };
        }
    }
}

/// Generates the fleet. Records come back sorted by
/// `(vehicle_id, timestamp)` and the base stream is clean under the default
/// anomaly thresholds.
pub fn generate_fleet(config: &SyntheticConfig) -> SyntheticFleet {
    let mut records = Vec::with_capacity(config.vehicles * config.records_per_vehicle);
    let hybrids = (config.vehicles as f64 * config.hybrid_share).round() as usize;

    for v in 0..config.vehicles {
        let id = format!("veh-{v:03}");
        let mut sim = VehicleSim::new(
            id,
            v < hybrids,
            config.start,
            config.dt_s,
            derive_seed(config.seed, &format!("vehicle-{v}")),
        );
        for _ in 0..config.records_per_vehicle {
            records.push(sim.step());
        }
    }

    let injected_immediate_shutdowns =
        inject_immediate_shutdowns(&mut records, config.inject_immediate_shutdown);
    let injected_fuel_while_charging =
        inject_fuel_while_charging(&mut records, config.inject_fuel_while_charging);

    records.sort_by(|a, b| {
        a.vehicle_id
            .cmp(&b.vehicle_id)
            .then(a.timestamp.cmp(&b.timestamp))
    });

    SyntheticFleet {
        records,
        injected_immediate_shutdowns,
        injected_fuel_while_charging,
    }
}

/// Indices of parked-charging records with a same-status successor and a
/// same-status predecessor, i.e. safely inside a charging run.
fn interior_charging_indices(records: &[TelemetryRecord]) -> Vec<usize> {
    (1..records.len().saturating_sub(1))
        .filter(|&i| {
            let (prev, cur, next) = (&records[i - 1], &records[i], &records[i + 1]);
            prev.vehicle_id == cur.vehicle_id
                && next.vehicle_id == cur.vehicle_id
                && prev.charging_status == ChargingStatus::ParkedCharging
                && cur.charging_status == ChargingStatus::ParkedCharging
                && next.charging_status == ChargingStatus::ParkedCharging
        })
        .collect()
}

/// Picks `count` well-separated slots from `candidates`.
fn spread(candidates: &[usize], count: usize) -> Vec<usize> {
    if count == 0 || candidates.is_empty() {
        return Vec::new();
    }
    let stride = (candidates.len() / count).max(1);
    candidates
        .iter()
        .step_by(stride)
        .take(count)
        .copied()
        .collect()
}

fn inject_immediate_shutdowns(
    records: &mut Vec<TelemetryRecord>,
    count: usize,
) -> Vec<(String, i64)> {
    let slots = spread(&interior_charging_indices(records), count);
    assert!(
        slots.len() == count,
        "fleet too small for {count} immediate-shutdown injections"
    );
    let mut injected = Vec::with_capacity(count);
    // Insert back-to-front so earlier indices stay valid.
    for &idx in slots.iter().rev() {
        let base = records[idx].clone();
        let mut startup = base.clone();
        startup.timestamp = base.timestamp + 60;
        startup.vehicle_state = VehicleState::Startup;
        startup.charging_status = ChargingStatus::NotCharging;
        startup.speed = 0.0;
        let mut shutdown = startup.clone();
        shutdown.timestamp = base.timestamp + 90;
        shutdown.vehicle_state = VehicleState::Shutdown;
        injected.push((base.vehicle_id.clone(), shutdown.timestamp));
        records.splice(idx + 1..idx + 1, [startup, shutdown]);
    }
    injected.reverse();
    injected
}

fn inject_fuel_while_charging(
    records: &mut [TelemetryRecord],
    count: usize,
) -> Vec<(String, i64)> {
    // Rebuild candidates after any prior splicing, and keep the flipped
    // records three apart so mode dwells stay above detection thresholds.
    let candidates: Vec<usize> = interior_charging_indices(records)
        .into_iter()
        .filter(|&i| {
            records[i - 1].operation_mode != OperationMode::Fuel
                && records[i + 1].operation_mode != OperationMode::Fuel
        })
        .collect();
    let slots = spread(&candidates, count);
    assert!(
        slots.len() == count,
        "fleet too small for {count} fuel-while-charging injections"
    );
    let mut injected = Vec::with_capacity(count);
    for &idx in &slots {
        records[idx].operation_mode = OperationMode::Fuel;
        injected.push((records[idx].vehicle_id.clone(), records[idx].timestamp));
    }
    injected
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::behavior::{correlation_report, detect_anomalies_fleet, AnomalyConfig};
    use crate::telemetry::validate_stream;

    fn test_anomaly_config() -> AnomalyConfig {
        AnomalyConfig {
            max_gap_s: 3600,
            min_session_s: 60,
            min_mode_dwell_s: 120,
        }
    }

    #[test]
    fn base_fleet_is_clean() {
        let fleet = generate_fleet(&SyntheticConfig::default());
        assert_eq!(fleet.records.len(), 4 * 720);
        assert!(validate_stream(&fleet.records).is_empty());
        let anomalies = detect_anomalies_fleet(&fleet.records, &test_anomaly_config());
        assert!(
            anomalies.is_empty(),
            "clean fleet produced anomalies: {:?}",
            &anomalies[..anomalies.len().min(5)]
        );
    }

    #[test]
    fn generation_is_deterministic() {
        let config = SyntheticConfig::default();
        assert_eq!(generate_fleet(&config), generate_fleet(&config));
        let reseeded = SyntheticConfig {
            seed: 7,
            ..config
        };
        assert_ne!(generate_fleet(&reseeded), generate_fleet(&SyntheticConfig::default()));
    }

    #[test]
    fn embedded_correlation_signs() {
        let fleet = generate_fleet(&SyntheticConfig::default());
        let report = correlation_report(&fleet.records).unwrap();
        for (pair, expect_positive) in [
            (("soc", "sum_voltage"), true),
            (("soc", "sum_current"), false),
            (("soc", "power"), false),
            (("soc", "speed"), false),
            (("soc", "trip_distance"), false),
        ] {
            let r = report
                .get(pair.0, pair.1)
                .unwrap_or_else(|| panic!("missing pair {pair:?}"));
            assert_eq!(r > 0.0, expect_positive, "{pair:?} r = {r}");
            assert!(r.abs() >= 0.3, "{pair:?} too weak: {r}");
        }
    }

    #[test]
    fn injections_are_exact() {
        let config = SyntheticConfig {
            inject_immediate_shutdown: 5,
            inject_fuel_while_charging: 4,
            ..Default::default()
        };
        let fleet = generate_fleet(&config);
        let anomalies = detect_anomalies_fleet(&fleet.records, &test_anomaly_config());
        assert_eq!(anomalies.len(), 9, "expected exactly 9: {anomalies:?}");

        use crate::behavior::AnomalyDetail;
        let shutdowns: Vec<(String, i64)> = anomalies
            .iter()
            .filter(|a| a.detail == AnomalyDetail::ImmediateShutdown)
            .map(|a| (a.vehicle_id.clone(), a.at))
            .collect();
        let fuels: Vec<(String, i64)> = anomalies
            .iter()
            .filter(|a| a.detail == AnomalyDetail::FuelWhileCharging)
            .map(|a| (a.vehicle_id.clone(), a.at))
            .collect();
        let mut expected_shutdowns = fleet.injected_immediate_shutdowns.clone();
        expected_shutdowns.sort();
        let mut actual_shutdowns = shutdowns.clone();
        actual_shutdowns.sort();
        assert_eq!(actual_shutdowns, expected_shutdowns);

        let mut expected_fuels = fleet.injected_fuel_while_charging.clone();
        expected_fuels.sort();
        let mut actual_fuels = fuels;
        actual_fuels.sort();
        assert_eq!(actual_fuels, expected_fuels);
    }
}
