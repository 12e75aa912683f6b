//! Life-cycle series extension.
//!
//! A from-scratch single-layer LSTM ([`lstm`]) is trained by full-batch
//! gradient descent with adaptive per-parameter moments, its hyperparameters
//! are chosen by Gaussian-process Bayesian optimization ([`bayes`]), and the
//! fitted model extends a series recursively: each prediction is appended
//! and fed back as input for the next step.
//!
//! Everything is double precision and deterministic given
//! `(series, hyperparameters, seed)`.

pub mod bayes;
pub mod lstm;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeds::derive_seed;

pub use bayes::{minimize, Evaluation, GpSurrogate, MinimizeOutcome, ParamSpec, SearchSpace};
pub use lstm::{lstm_backward, lstm_forward, lstm_loss, LstmCaches, LstmParams};

/// Training knobs for one LSTM fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub hidden_size: usize,
    pub learning_rate: f64,
    pub window: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl HyperParams {
    pub fn validate(&self, series_len: usize) -> Result<()> {
        if self.hidden_size == 0 || self.window == 0 || self.epochs == 0 {
            return Err(Error::bad_input("hyperparameters must be positive"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::bad_input("learning rate must be finite and nonnegative"));
        }
        if series_len <= self.window + 2 {
            return Err(Error::bad_input(
                "series must be longer than window + 2",
            ));
        }
        Ok(())
    }
}

/// Affine [0, 1] normalization fit on the training span. A constant span is
/// widened by half a unit on each side so the map stays invertible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub min: f64,
    pub max: f64,
}

impl Scaler {
    pub fn fit(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::bad_input("scaler needs at least one value"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::bad_input("scaler input must be finite"));
        }
        let mut min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if max - min < 1e-12 {
            min -= 0.5;
            max += 0.5;
        }
        Ok(Scaler { min, max })
    }

    pub fn forward(&self, x: f64) -> f64 {
        (x - self.min) / (self.max - self.min)
    }

    pub fn inverse(&self, y: f64) -> f64 {
        self.min + y * (self.max - self.min)
    }
}

/// A trained model: parameters, input scaling, and the hyperparameters that
/// produced it. Serializes to a self-describing JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastModel {
    pub params: LstmParams,
    pub scaler: Scaler,
    pub hyperparams: HyperParams,
}

/// Fit quality on the chronological train/test split.
///
/// `loss_curve` is the scaled training MSE re-evaluated after each epoch's
/// update, so its last entry equals `mse_train_scaled`. Raw-unit and scaled
/// errors are both reported because the units of a downstream consumer are
/// unknown. Option fields are `None` when the corresponding span has zero
/// variance (e.g. a constant series).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub loss_curve: Vec<f64>,
    pub r2_train: Option<f64>,
    pub r2_test: Option<f64>,
    pub mse_train: f64,
    pub mse_test: f64,
    pub mse_train_scaled: f64,
    pub mse_test_scaled: f64,
    /// `mse_test / mse_train`; the overfitting indicator. `None` when the
    /// training error is exactly zero.
    pub test_train_mse_ratio: Option<f64>,
}

/// Coefficient of determination, `1 - SS_res / SS_tot`.
pub fn r2(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    if actual.len() != predicted.len() || actual.is_empty() {
        return Err(Error::bad_input("r2 needs equal nonzero lengths"));
    }
    let n = actual.len() as f64;
    let mean = actual.iter().sum::<f64>() / n;
    let ss_tot: f64 = actual.iter().map(|a| (a - mean).powi(2)).sum();
    // Rounding in the mean leaves a constant series with ss_tot ~ ulp^2.
    if ss_tot <= f64::EPSILON * n * mean.powi(2).max(1.0) {
        return Err(Error::DegenerateSeries(
            "zero variance in r2 reference".to_string(),
        ));
    }
    let ss_res: f64 = actual
        .iter()
        .zip(predicted)
        .map(|(a, p)| (a - p).powi(2))
        .sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Mean squared error.
pub fn mse(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    if actual.len() != predicted.len() || actual.is_empty() {
        return Err(Error::bad_input("mse needs equal nonzero lengths"));
    }
    Ok(actual
        .iter()
        .zip(predicted)
        .map(|(a, p)| (a - p).powi(2))
        .sum::<f64>()
        / actual.len() as f64)
}

/// (window, target) sample indices for one-step-ahead supervision.
struct SampleSplit {
    train: Vec<usize>,
    test: Vec<usize>,
}

fn split_samples(series_len: usize, window: usize, split: f64) -> Result<SampleSplit> {
    if !(split > 0.0 && split < 1.0) {
        return Err(Error::bad_input("split fraction must lie in (0, 1)"));
    }
    let n_train = (series_len as f64 * split).floor() as usize;
    let train: Vec<usize> = (window..n_train).collect();
    let test: Vec<usize> = (n_train.max(window)..series_len).collect();
    if train.is_empty() || test.is_empty() {
        return Err(Error::bad_input(
            "split leaves no training or test windows",
        ));
    }
    Ok(SampleSplit { train, test })
}

fn batch_gradient(
    params: &LstmParams,
    scaled: &[f64],
    targets: &[usize],
    window: usize,
) -> Result<Vec<f64>> {
    let mut grad = vec![0.0; params.theta().len()];
    for &t in targets {
        let (_, caches) = lstm_forward(params, &scaled[t - window..t])?;
        let sample = lstm_backward(params, &caches, scaled[t]);
        for (g, s) in grad.iter_mut().zip(&sample) {
            *g += s;
        }
    }
    let n = targets.len() as f64;
    for g in grad.iter_mut() {
        *g /= n;
    }
    Ok(grad)
}

fn batch_loss(params: &LstmParams, scaled: &[f64], targets: &[usize], window: usize) -> Result<f64> {
    let mut acc = 0.0;
    for &t in targets {
        acc += lstm_loss(params, &scaled[t - window..t], scaled[t])?;
    }
    Ok(acc / targets.len() as f64)
}

fn predictions(
    params: &LstmParams,
    scaled: &[f64],
    targets: &[usize],
    window: usize,
) -> Result<Vec<f64>> {
    targets
        .iter()
        .map(|&t| lstm_forward(params, &scaled[t - window..t]).map(|(p, _)| p))
        .collect()
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Trains a model on a chronological train/test split of `series`.
///
/// Per epoch: one full-batch gradient step with bias-corrected first/second
/// moments, then a re-evaluation of the training loss that becomes the
/// epoch's loss-curve entry. Reproducible bit-for-bit from the seed.
pub fn train(
    series: &[f64],
    hp: &HyperParams,
    split: f64,
) -> Result<(ForecastModel, FitDiagnostics)> {
    hp.validate(series.len())?;
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::bad_input("series must be finite"));
    }
    let samples = split_samples(series.len(), hp.window, split)?;

    let n_train_points = (series.len() as f64 * split).floor() as usize;
    let scaler = Scaler::fit(&series[..n_train_points])?;
    let scaled: Vec<f64> = series.iter().map(|v| scaler.forward(*v)).collect();

    let mut params = initial_params(hp);
    let mut first_moment = vec![0.0; params.theta().len()];
    let mut second_moment = vec![0.0; params.theta().len()];
    let mut loss_curve = Vec::with_capacity(hp.epochs);

    for epoch in 0..hp.epochs {
        let grad = batch_gradient(&params, &scaled, &samples.train, hp.window)?;
        let t = (epoch + 1) as f64;
        let bias1 = 1.0 - ADAM_BETA1.powf(t);
        let bias2 = 1.0 - ADAM_BETA2.powf(t);
        for (idx, g) in grad.iter().enumerate() {
            first_moment[idx] = ADAM_BETA1 * first_moment[idx] + (1.0 - ADAM_BETA1) * g;
            second_moment[idx] = ADAM_BETA2 * second_moment[idx] + (1.0 - ADAM_BETA2) * g * g;
            let m_hat = first_moment[idx] / bias1;
            let v_hat = second_moment[idx] / bias2;
            params.theta_mut()[idx] -= hp.learning_rate * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }

        let loss = batch_loss(&params, &scaled, &samples.train, hp.window)
            .map_err(|_| Error::TrainingDiverged { epoch })?;
        if !loss.is_finite() {
            return Err(Error::TrainingDiverged { epoch });
        }
        loss_curve.push(loss);
    }

    let diagnostics = diagnostics(&params, &scaler, &scaled, series, &samples, hp.window, loss_curve)?;
    Ok((
        ForecastModel {
            params,
            scaler,
            hyperparams: hp.clone(),
        },
        diagnostics,
    ))
}

fn initial_params(hp: &HyperParams) -> LstmParams {
    let mut params = LstmParams::zeros(hp.hidden_size);
    let mut rng = ChaCha12Rng::seed_from_u64(hp.seed);
    let limit = 1.0 / (hp.hidden_size as f64).sqrt();
    for value in params.theta_mut() {
        *value = rng.gen_range(-limit..limit);
    }
    // Zero gate biases, forget gate seeded to 1 to keep early memory open.
    let h = hp.hidden_size;
    let bias_block = 4 * h + 4 * h * h;
    for idx in bias_block..bias_block + 4 * h {
        params.theta_mut()[idx] = 0.0;
    }
    for idx in LstmParams::forget_bias_range(h) {
        params.theta_mut()[idx] = 1.0;
    }
    params
}

#[allow(clippy::too_many_arguments)]
fn diagnostics(
    params: &LstmParams,
    scaler: &Scaler,
    scaled: &[f64],
    series: &[f64],
    samples: &SampleSplit,
    window: usize,
    loss_curve: Vec<f64>,
) -> Result<FitDiagnostics> {
    let eval = |targets: &[usize]| -> Result<(f64, f64, Option<f64>)> {
        let scaled_pred = predictions(params, scaled, targets, window)?;
        let scaled_actual: Vec<f64> = targets.iter().map(|&t| scaled[t]).collect();
        let raw_pred: Vec<f64> = scaled_pred.iter().map(|p| scaler.inverse(*p)).collect();
        let raw_actual: Vec<f64> = targets.iter().map(|&t| series[t]).collect();
        let mse_scaled = mse(&scaled_actual, &scaled_pred)?;
        let mse_raw = mse(&raw_actual, &raw_pred)?;
        let r2_raw = match r2(&raw_actual, &raw_pred) {
            Ok(v) => Some(v),
            Err(Error::DegenerateSeries(_)) => None,
            Err(e) => return Err(e),
        };
        Ok((mse_raw, mse_scaled, r2_raw))
    };

    let (mse_train, mse_train_scaled, r2_train) = eval(&samples.train)?;
    let (mse_test, mse_test_scaled, r2_test) = eval(&samples.test)?;

    Ok(FitDiagnostics {
        loss_curve,
        r2_train,
        r2_test,
        mse_train,
        mse_test,
        mse_train_scaled,
        mse_test_scaled,
        test_train_mse_ratio: (mse_train > 0.0).then(|| mse_test / mse_train),
    })
}

/// Extends `series` by `horizon` recursive one-step predictions. The
/// original prefix is returned unchanged; every prediction is clamped into
/// the scaler's inverse range, so extensions are always finite.
pub fn extend_series(model: &ForecastModel, series: &[f64], horizon: usize) -> Result<Vec<f64>> {
    let window = model.hyperparams.window;
    if series.len() < window {
        return Err(Error::bad_input("series shorter than the model window"));
    }
    let mut extended = series.to_vec();
    if horizon == 0 {
        return Ok(extended);
    }
    let mut buffer: Vec<f64> = series[series.len() - window..]
        .iter()
        .map(|v| model.scaler.forward(*v).clamp(0.0, 1.0))
        .collect();
    for _ in 0..horizon {
        let (prediction, _) = lstm_forward(&model.params, &buffer)?;
        let clamped = prediction.clamp(0.0, 1.0);
        extended.push(model.scaler.inverse(clamped));
        buffer.remove(0);
        buffer.push(clamped);
    }
    Ok(extended)
}

/// One-step-ahead predictions over the held-out span of the split the model
/// was trained with. Returns `(actual, predicted)` in raw units.
pub fn test_predictions(
    model: &ForecastModel,
    series: &[f64],
    split: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let window = model.hyperparams.window;
    let samples = split_samples(series.len(), window, split)?;
    let scaled: Vec<f64> = series.iter().map(|v| model.scaler.forward(*v)).collect();
    let predicted: Vec<f64> = predictions(&model.params, &scaled, &samples.test, window)?
        .into_iter()
        .map(|p| model.scaler.inverse(p))
        .collect();
    let actual: Vec<f64> = samples.test.iter().map(|&t| series[t]).collect();
    Ok((actual, predicted))
}

/// Box bounds for the hyperparameter search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForecastSearchSpace {
    pub hidden: (usize, usize),
    pub learning_rate: (f64, f64),
    pub window: (usize, usize),
    pub epochs: (usize, usize),
}

impl Default for ForecastSearchSpace {
    fn default() -> Self {
        ForecastSearchSpace {
            hidden: (4, 64),
            learning_rate: (1e-4, 1e-1),
            window: (4, 32),
            epochs: (50, 500),
        }
    }
}

impl ForecastSearchSpace {
    fn to_search_space(&self) -> Result<SearchSpace> {
        SearchSpace::new(vec![
            ParamSpec::integer("hidden_size", self.hidden.0, self.hidden.1),
            ParamSpec::log("learning_rate", self.learning_rate.0, self.learning_rate.1),
            ParamSpec::integer("window", self.window.0, self.window.1),
            ParamSpec::integer("epochs", self.epochs.0, self.epochs.1),
        ])
    }

    fn decode(&self, x: &[f64], seed: u64) -> HyperParams {
        HyperParams {
            hidden_size: x[0].round() as usize,
            learning_rate: x[1],
            window: x[2].round() as usize,
            epochs: x[3].round() as usize,
            seed,
        }
    }
}

/// One tuning trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningEvaluation {
    pub hyperparams: HyperParams,
    pub validation_mse: f64,
    pub failed: bool,
}

/// Result of a hyperparameter search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningOutcome {
    pub best: HyperParams,
    pub best_validation_mse: f64,
    pub evaluations: Vec<TuningEvaluation>,
}

/// Tunes hyperparameters for `series` by Bayesian minimization of the
/// validation MSE on the chronological split. Deterministic given the seed:
/// every candidate trains from the same derived initialization seed, so the
/// objective is a pure function of the candidate.
pub fn bayes_optimize(
    series: &[f64],
    space: &ForecastSearchSpace,
    budget: usize,
    split: f64,
    seed: u64,
) -> Result<TuningOutcome> {
    let search_space = space.to_search_space()?;
    let max_window = space.window.1;
    if series.len() <= max_window + 2 {
        return Err(Error::bad_input(
            "series too short for the window upper bound",
        ));
    }
    let train_seed = derive_seed(seed, "train-init");

    let objective = |x: &[f64]| -> f64 {
        let hp = space.decode(x, train_seed);
        match train(series, &hp, split) {
            Ok((_, diag)) => diag.mse_test,
            Err(_) => f64::INFINITY,
        }
    };

    let outcome = minimize(objective, &search_space, budget, seed)?;
    let evaluations = outcome
        .evaluations
        .iter()
        .map(|e| TuningEvaluation {
            hyperparams: space.decode(&e.x, train_seed),
            validation_mse: e.y,
            failed: e.failed,
        })
        .collect();
    Ok(TuningOutcome {
        best: space.decode(&outcome.best_x, train_seed),
        best_validation_mse: outcome.best_y,
        evaluations,
    })
}

/// Two-column CSV export of a loss curve.
pub fn loss_curve_csv(loss_curve: &[f64]) -> String {
    let mut out = String::from("epoch,mse\n");
    for (epoch, value) in loss_curve.iter().enumerate() {
        out.push_str(&format!("{epoch},{value}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick_hp(seed: u64) -> HyperParams {
        HyperParams {
            hidden_size: 6,
            learning_rate: 0.05,
            window: 4,
            epochs: 150,
            seed,
        }
    }

    #[test]
    fn metrics_reference_values() {
        let actual = [1.0, 2.0, 3.0];
        assert_eq!(r2(&actual, &actual).unwrap(), 1.0);
        assert_eq!(mse(&actual, &actual).unwrap(), 0.0);

        let mean = [2.0, 2.0, 2.0];
        assert!((r2(&actual, &mean).unwrap()).abs() < 1e-12);

        let predicted = [1.0, 2.0, 4.0];
        assert!((mse(&actual, &predicted).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert!((r2(&actual, &predicted).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn metrics_error_paths() {
        assert!(matches!(r2(&[1.0], &[1.0, 2.0]), Err(Error::BadInput(_))));
        assert!(matches!(mse(&[], &[]), Err(Error::BadInput(_))));
        assert!(matches!(
            r2(&[2.0, 2.0], &[1.0, 3.0]),
            Err(Error::DegenerateSeries(_))
        ));
    }

    #[test]
    fn scaler_round_trip_and_widening() {
        let scaler = Scaler::fit(&[2.0, 6.0, 4.0]).unwrap();
        for x in [2.0, 3.3, 6.0] {
            assert!((scaler.inverse(scaler.forward(x)) - x).abs() < 1e-12);
        }
        let constant = Scaler::fit(&[5.0, 5.0]).unwrap();
        assert!(constant.max > constant.min);
        assert!((constant.forward(5.0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn constant_series_is_learned_exactly() {
        let series = vec![3.7; 40];
        let (_, diag) = train(&series, &quick_hp(1), 0.8).unwrap();
        assert!(
            diag.mse_train < 1e-6,
            "constant series not learned: {}",
            diag.mse_train
        );
        assert!(diag.r2_train.is_none());
    }

    #[test]
    fn zero_learning_rate_is_a_no_op() {
        let series: Vec<f64> = (0..40).map(|i| (i as f64 * 0.3).sin()).collect();
        let hp = HyperParams {
            learning_rate: 0.0,
            epochs: 5,
            ..quick_hp(2)
        };
        let (model, diag) = train(&series, &hp, 0.8).unwrap();
        assert_eq!(model.params, initial_params(&hp));
        let first = diag.loss_curve[0];
        assert!(diag.loss_curve.iter().all(|l| (l - first).abs() < 1e-15));
    }

    #[test]
    fn training_is_bit_reproducible() {
        let series: Vec<f64> = (0..60).map(|i| (i as f64 * 0.2).sin() + 0.01 * i as f64).collect();
        let hp = quick_hp(7);
        let (a, da) = train(&series, &hp, 0.8).unwrap();
        let (b, db) = train(&series, &hp, 0.8).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(da.loss_curve, db.loss_curve);
    }

    #[test]
    fn short_series_rejected() {
        let hp = quick_hp(3);
        assert!(matches!(
            train(&[1.0, 2.0, 3.0], &hp, 0.8),
            Err(Error::BadInput(_))
        ));
    }

    #[test]
    fn loss_curve_is_reevaluated_training_mse() {
        let series: Vec<f64> = (0..50).map(|i| (i as f64 * 0.25).cos()).collect();
        let hp = HyperParams { epochs: 30, ..quick_hp(4) };
        let (model, diag) = train(&series, &hp, 0.8).unwrap();
        assert_eq!(diag.loss_curve.len(), 30);
        assert!(diag.loss_curve.iter().all(|l| l.is_finite() && *l >= 0.0));
        // Final entry equals the training MSE of the returned parameters.
        assert!((diag.loss_curve.last().unwrap() - diag.mse_train_scaled).abs() < 1e-15);
        let _ = model;
    }

    #[test]
    fn extend_identity_at_zero_horizon() {
        let series: Vec<f64> = (0..40).map(|i| i as f64).collect();
        let (model, _) = train(&series, &quick_hp(5), 0.8).unwrap();
        assert_eq!(extend_series(&model, &series, 0).unwrap(), series);
    }

    #[test]
    fn constant_series_is_a_fixed_point_of_extension() {
        let c = 42.0;
        let series = vec![c; 40];
        let (model, _) = train(&series, &quick_hp(6), 0.8).unwrap();
        let extended = extend_series(&model, &series, 10).unwrap();
        assert_eq!(extended.len(), 50);
        for value in &extended[40..] {
            assert!(
                (value - c).abs() <= c.abs() * 1e-3 + 1e-3,
                "extension {value} drifted from {c}"
            );
        }
    }

    #[test]
    fn extensions_stay_in_scaler_range() {
        let series: Vec<f64> = (0..60).map(|i| (i as f64 * 0.4).sin() * 5.0).collect();
        let (model, _) = train(&series, &quick_hp(8), 0.8).unwrap();
        let extended = extend_series(&model, &series, 25).unwrap();
        for value in &extended[60..] {
            assert!(value.is_finite());
            assert!(*value >= model.scaler.min - 1e-12);
            assert!(*value <= model.scaler.max + 1e-12);
        }
    }

    #[test]
    fn tuning_is_deterministic_and_respects_budget() {
        let series: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).sin()).collect();
        let space = ForecastSearchSpace {
            hidden: (2, 6),
            learning_rate: (1e-3, 1e-1),
            window: (3, 6),
            epochs: (10, 30),
        };
        let a = bayes_optimize(&series, &space, 5, 0.8, 42).unwrap();
        let b = bayes_optimize(&series, &space, 5, 0.8, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.evaluations.len(), 5);
        assert!(a.best_validation_mse.is_finite());
    }

    #[test]
    fn tuning_rejects_short_series() {
        let space = ForecastSearchSpace {
            window: (4, 32),
            ..Default::default()
        };
        let short = vec![1.0; 20];
        assert!(matches!(
            bayes_optimize(&short, &space, 4, 0.8, 1),
            Err(Error::BadInput(_))
        ));
    }

    #[test]
    fn model_json_round_trip() {
        let series: Vec<f64> = (0..40).map(|i| (i as f64 * 0.3).sin()).collect();
        let (model, _) = train(&series, &quick_hp(9), 0.8).unwrap();
        let json = serde_json::to_string_pretty(&model).unwrap();
        let back: ForecastModel = serde_json::from_str(&json).unwrap();
        assert_eq!(model, back);
    }

    #[test]
    fn loss_csv_layout() {
        let csv = loss_curve_csv(&[0.5, 0.25]);
        assert_eq!(csv, "epoch,mse\n0,0.5\n1,0.25\n");
    }
}
