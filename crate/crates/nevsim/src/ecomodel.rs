//! Urban-ecology indicator model.
//!
//! Six linear indicator equations (land degradation, pollutant
//! concentration, climate-change impact, forest restoration, waste-treatment
//! rate, battery chemical toxicity), the weighted NEV-efficiency aggregate,
//! grid-electricity carbon conversion, and delta standardization against the
//! NEV-population delta.
//!
//! Every equation carries an additive zero-mean Gaussian error term whose
//! per-equation sigma defaults to 0, so results are deterministic unless
//! noise is explicitly configured. The draws come from a seeded generator
//! passed in explicitly; the arithmetic itself is pure.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::behavior::BehaviorProfile;
use crate::error::{Error, Result};

/// Raw drivers of the indicator equations.
///
/// Units: `pop` persons/km²; `t_r` °C/yr; `area` km²; concentrations mg/m³;
/// `d_temperature` °C; `d_precipitation` mm; `vfc`, `r_recovery`, `nevi`
/// fractions in [0, 1]; the rest are dimensionless indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IndicatorInputs {
    pub pop: f64,
    pub t_r: f64,
    pub alpha: f64,
    pub area: f64,
    pub c_industrial: f64,
    pub c_traffic: f64,
    pub c_waste: f64,
    pub rad: f64,
    pub d_temperature: f64,
    pub d_precipitation: f64,
    pub vfc: f64,
    pub di: f64,
    pub r_recovery: f64,
    pub p_policy: f64,
    pub charging_behavior: f64,
    pub temperature_stress: f64,
    pub driving_speed: f64,
    pub nevi: f64,
}

impl Default for IndicatorInputs {
    fn default() -> Self {
        IndicatorInputs {
            pop: 0.0,
            t_r: 0.0,
            alpha: 0.0,
            area: 0.0,
            c_industrial: 0.0,
            c_traffic: 0.0,
            c_waste: 0.0,
            rad: 0.0,
            d_temperature: 0.0,
            d_precipitation: 0.0,
            vfc: 0.0,
            di: 0.0,
            r_recovery: 0.0,
            p_policy: 0.0,
            charging_behavior: 0.0,
            temperature_stress: 0.0,
            driving_speed: 0.0,
            nevi: 0.0,
        }
    }
}

impl IndicatorInputs {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            self.pop,
            self.t_r,
            self.alpha,
            self.area,
            self.c_industrial,
            self.c_traffic,
            self.c_waste,
            self.rad,
            self.d_temperature,
            self.d_precipitation,
            self.vfc,
            self.di,
            self.r_recovery,
            self.p_policy,
            self.charging_behavior,
            self.temperature_stress,
            self.driving_speed,
            self.nevi,
        ];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(Error::bad_input("non-finite indicator input"));
        }
        for (name, value) in [("vfc", self.vfc), ("r_recovery", self.r_recovery), ("nevi", self.nevi)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::bad_input(format!("{name} must lie in [0, 1]")));
            }
        }
        for (name, value) in [
            ("c_industrial", self.c_industrial),
            ("c_traffic", self.c_traffic),
            ("c_waste", self.c_waste),
        ] {
            if value < 0.0 {
                return Err(Error::bad_input(format!("{name} must be nonnegative")));
            }
        }
        Ok(())
    }
}

/// Per-equation standard deviations of the additive error terms.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseSigmas {
    pub ld: f64,
    pub pc: f64,
    pub cci: f64,
    pub fr: f64,
    pub wtr: f64,
    pub lsbct: f64,
    pub efficiency: f64,
}

impl NoiseSigmas {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.ld,
            self.pc,
            self.cci,
            self.fr,
            self.wtr,
            self.lsbct,
            self.efficiency,
        ];
        if all.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(Error::bad_input("noise sigmas must be finite and nonnegative"));
        }
        Ok(())
    }
}

/// Coefficients of the indicator equations.
///
/// The pollutant and toxicity equations both use a `g` family in the source
/// formulation; they are stored as the disjoint groups `g_pc` and `g_lsbct`.
/// `cb_overcharge` / `cb_deep_discharge` blend the behavior-profile rates
/// into the composite charging-behavior driver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CoefficientSet {
    pub l: [f64; 4],
    pub g_pc: [f64; 4],
    pub c: [f64; 2],
    pub d: [f64; 3],
    pub e: [f64; 2],
    pub g_lsbct: [f64; 3],
    pub w: [f64; 7],
    pub cb_overcharge: f64,
    pub cb_deep_discharge: f64,
    pub noise: NoiseSigmas,
}

impl Default for CoefficientSet {
    fn default() -> Self {
        CoefficientSet {
            l: [1.0; 4],
            g_pc: [1.0; 4],
            c: [1.0; 2],
            d: [1.0; 3],
            e: [1.0; 2],
            g_lsbct: [1.0; 3],
            w: [1.0 / 7.0; 7],
            cb_overcharge: 0.5,
            cb_deep_discharge: 0.5,
            noise: NoiseSigmas::default(),
        }
    }
}

impl CoefficientSet {
    pub fn validate(&self) -> Result<()> {
        let all = self
            .l
            .iter()
            .chain(&self.g_pc)
            .chain(&self.c)
            .chain(&self.d)
            .chain(&self.e)
            .chain(&self.g_lsbct)
            .chain(&self.w)
            .chain([&self.cb_overcharge, &self.cb_deep_discharge]);
        for value in all {
            if !value.is_finite() {
                return Err(Error::bad_input("non-finite coefficient"));
            }
        }
        self.noise.validate()
    }
}

/// Computed indicator values; units follow the impact report (LD index,
/// PC mg/m³, CCI °C, FR %, WTR %, LSBCT index).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndicatorVector {
    pub ld: f64,
    pub pc: f64,
    pub cci: f64,
    pub fr: f64,
    pub wtr: f64,
    pub lsbct: f64,
}

/// Seeded source of the per-equation error draws. The only stateful piece
/// of the model; confine one instance to one scenario run.
pub struct EcoNoise {
    rng: ChaCha12Rng,
    standard: Normal<f64>,
}

impl EcoNoise {
    pub fn new(seed: u64) -> Self {
        EcoNoise {
            rng: ChaCha12Rng::seed_from_u64(seed),
            standard: Normal::new(0.0, 1.0).expect("unit normal"),
        }
    }

    /// One draw from N(0, sigma); exactly 0 when sigma is 0.
    pub fn draw(&mut self, sigma: f64) -> f64 {
        sigma * self.standard.sample(&mut self.rng)
    }
}

fn check(value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::bad_input("non-finite indicator result"))
    }
}

/// Land degradation: `l1*pop + l2*t_r + l3*alpha + l4*area + eps`.
pub fn land_degradation(inputs: &IndicatorInputs, coeffs: &CoefficientSet, eps: f64) -> Result<f64> {
    let [l1, l2, l3, l4] = coeffs.l;
    check(l1 * inputs.pop + l2 * inputs.t_r + l3 * inputs.alpha + l4 * inputs.area + eps)
}

/// Pollutant concentration:
/// `g1*c_industrial + g2*c_traffic + g3*c_waste + g4*rad + eps`.
pub fn pollutant_concentration(
    inputs: &IndicatorInputs,
    coeffs: &CoefficientSet,
    eps: f64,
) -> Result<f64> {
    let [g1, g2, g3, g4] = coeffs.g_pc;
    check(
        g1 * inputs.c_industrial + g2 * inputs.c_traffic + g3 * inputs.c_waste + g4 * inputs.rad
            + eps,
    )
}

/// Climate-change impact: `c1*d_temperature + c2*d_precipitation + eps`.
pub fn climate_change_impact(
    inputs: &IndicatorInputs,
    coeffs: &CoefficientSet,
    eps: f64,
) -> Result<f64> {
    let [c1, c2] = coeffs.c;
    check(c1 * inputs.d_temperature + c2 * inputs.d_precipitation + eps)
}

/// Forest restoration: `d1*vfc + d2*di + d3*r_recovery + eps`.
pub fn forest_restoration(
    inputs: &IndicatorInputs,
    coeffs: &CoefficientSet,
    eps: f64,
) -> Result<f64> {
    let [d1, d2, d3] = coeffs.d;
    check(d1 * inputs.vfc + d2 * inputs.di + d3 * inputs.r_recovery + eps)
}

/// Waste-treatment rate: `e1*c_waste + e2*p_policy + eps`.
pub fn waste_treatment_rate(
    inputs: &IndicatorInputs,
    coeffs: &CoefficientSet,
    eps: f64,
) -> Result<f64> {
    let [e1, e2] = coeffs.e;
    check(e1 * inputs.c_waste + e2 * inputs.p_policy + eps)
}

/// Battery chemical toxicity:
/// `g1*charging_behavior + g2*temperature_stress + g3*driving_speed + eps`.
/// Monotone non-decreasing in each driver whenever the coefficients are
/// nonnegative.
pub fn lsbct(inputs: &IndicatorInputs, coeffs: &CoefficientSet, eps: f64) -> Result<f64> {
    lsbct_with_response(inputs, coeffs, eps, |_, value| value)
}

/// The toxicity drivers, for [`lsbct_with_response`] shaping.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ToxicityDriver {
    ChargingBehavior,
    TemperatureStress,
    DrivingSpeed,
}

/// [`lsbct`] with a caller-supplied response curve applied to each driver
/// before weighting; the identity response recovers the linear form.
pub fn lsbct_with_response(
    inputs: &IndicatorInputs,
    coeffs: &CoefficientSet,
    eps: f64,
    response: impl Fn(ToxicityDriver, f64) -> f64,
) -> Result<f64> {
    let [g1, g2, g3] = coeffs.g_lsbct;
    check(
        g1 * response(ToxicityDriver::ChargingBehavior, inputs.charging_behavior)
            + g2 * response(ToxicityDriver::TemperatureStress, inputs.temperature_stress)
            + g3 * response(ToxicityDriver::DrivingSpeed, inputs.driving_speed)
            + eps,
    )
}

/// Blends profile rates into the composite charging-behavior driver.
pub fn charging_behavior_from_profile(profile: &BehaviorProfile, coeffs: &CoefficientSet) -> f64 {
    coeffs.cb_overcharge * profile.overcharge_rate
        + coeffs.cb_deep_discharge * profile.deep_discharge_rate
}

/// Evaluates all six indicators, drawing one error per equation in fixed
/// order (LD, PC, CCI, FR, WTR, LSBCT).
pub fn evaluate_indicators(
    inputs: &IndicatorInputs,
    coeffs: &CoefficientSet,
    noise: &mut EcoNoise,
) -> Result<IndicatorVector> {
    inputs.validate()?;
    coeffs.validate()?;
    Ok(IndicatorVector {
        ld: land_degradation(inputs, coeffs, noise.draw(coeffs.noise.ld))?,
        pc: pollutant_concentration(inputs, coeffs, noise.draw(coeffs.noise.pc))?,
        cci: climate_change_impact(inputs, coeffs, noise.draw(coeffs.noise.cci))?,
        fr: forest_restoration(inputs, coeffs, noise.draw(coeffs.noise.fr))?,
        wtr: waste_treatment_rate(inputs, coeffs, noise.draw(coeffs.noise.wtr))?,
        lsbct: lsbct(inputs, coeffs, noise.draw(coeffs.noise.lsbct))?,
    })
}

/// NEV efficiency: the weighted sum of the six indicators plus the
/// penetration index,
/// `w1*LD + w2*PC + w3*CCI + w4*FR + w5*WTR + w6*NEVI + w7*LSBCT + eps`.
pub fn nev_efficiency(
    indicators: &IndicatorVector,
    nevi: f64,
    weights: &[f64; 7],
    eps: f64,
) -> Result<f64> {
    if weights.iter().any(|w| !w.is_finite()) || !nevi.is_finite() {
        return Err(Error::bad_input("non-finite efficiency input"));
    }
    let [w1, w2, w3, w4, w5, w6, w7] = *weights;
    check(
        w1 * indicators.ld
            + w2 * indicators.pc
            + w3 * indicators.cci
            + w4 * indicators.fr
            + w5 * indicators.wtr
            + w6 * nevi
            + w7 * indicators.lsbct
            + eps,
    )
}

/// Converts grid electricity into carbon mass: `kWh * kg-CO2/kWh`.
pub fn electricity_to_co2(energy_kwh: f64, grid_factor_kg_per_kwh: f64) -> Result<f64> {
    if !energy_kwh.is_finite() || !grid_factor_kg_per_kwh.is_finite() {
        return Err(Error::bad_input("non-finite carbon-conversion input"));
    }
    if energy_kwh < 0.0 || grid_factor_kg_per_kwh < 0.0 {
        return Err(Error::bad_input("carbon conversion requires nonnegative inputs"));
    }
    Ok(energy_kwh * grid_factor_kg_per_kwh)
}

/// Standardizes an indicator delta against the NEV-population delta, so the
/// growth row itself maps to exactly 1.
pub fn standardize(delta_value: f64, delta_nev_population: f64) -> Result<f64> {
    if delta_nev_population == 0.0 {
        return Err(Error::DegenerateDenominator);
    }
    Ok(delta_value / delta_nev_population)
}

/// A calibrated before/after scenario with known expected outputs, used as
/// the golden fixture for report rendering and wiring tests. The
/// coefficients are calibration constants, not measurements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceScenario {
    pub inputs_before: IndicatorInputs,
    pub inputs_after: IndicatorInputs,
    pub coefficients: CoefficientSet,
    pub nevi_before: f64,
    pub delta_nev_population: f64,
}

/// The bundled reference scenario. With zero noise it evaluates to
/// LD 3.22→3.53, PC 0.04→0.07 mg/m³, CCI 0.21→0.32 °C, FR 0.32%→0.26%,
/// WTR 20.3%→15.5%, LSBCT 4→4, and a NEV-efficiency delta of -0.004252
/// against a population delta of 0.001321.
pub fn reference_scenario() -> ReferenceScenario {
    let coefficients = CoefficientSet {
        l: [0.0002, 2.0, 1.0, 0.00005],
        g_pc: [1.0, 1.0, 1.0, 1.0],
        c: [1.0, 0.002],
        d: [1.0, -0.5, 2.0],
        e: [-50.0, 23.0],
        g_lsbct: [1.0, 1.0, 1.0],
        w: [0.05, 0.1, 0.1, 0.1, 0.006056875, 1.0, 0.05],
        ..CoefficientSet::default()
    };
    let inputs_before = IndicatorInputs {
        pop: 5000.0,
        t_r: 0.03,
        alpha: 2.0,
        area: 3200.0,
        c_industrial: 0.015,
        c_traffic: 0.012,
        c_waste: 0.008,
        rad: 0.005,
        d_temperature: 0.15,
        d_precipitation: 30.0,
        vfc: 0.30,
        di: 0.16,
        r_recovery: 0.05,
        p_policy: 0.9,
        charging_behavior: 1.0,
        temperature_stress: 2.0,
        driving_speed: 1.0,
        nevi: 0.316,
    };
    let inputs_after = IndicatorInputs {
        pop: 5500.0,
        t_r: 0.05,
        alpha: 2.16,
        area: 3400.0,
        c_industrial: 0.02,
        c_traffic: 0.03,
        c_waste: 0.012,
        rad: 0.008,
        d_temperature: 0.24,
        d_precipitation: 40.0,
        vfc: 0.28,
        di: 0.20,
        r_recovery: 0.04,
        p_policy: 0.7,
        charging_behavior: 0.9,
        temperature_stress: 2.2,
        driving_speed: 0.9,
        nevi: 0.317321,
    };
    ReferenceScenario {
        inputs_before,
        inputs_after,
        coefficients,
        nevi_before: 0.316,
        delta_nev_population: 0.001321,
    }
}
