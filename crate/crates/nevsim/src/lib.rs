//! Simulation and analytics toolkit for new-energy-vehicle fleets.
//!
//! The pipeline ingests raw fleet telemetry, mines driver-behavior features
//! and anomalies, extends the derived time series over the remaining vehicle
//! life with an LSTM tuned by Bayesian optimization, weights an
//! urban-ecology indicator model by information entropy, and reports
//! before/after environmental impact and NEV efficiency.
//!
//! Modules follow the pipeline stages:
//!
//! - [`telemetry`]: CSV ingestion, timestamp normalization, stream checks
//! - [`behavior`]: transitions, charging sessions, anomalies, correlations,
//!   per-vehicle profiles
//! - [`forecast`]: from-scratch LSTM, Adam training, GP Bayesian tuning,
//!   recursive extension
//! - [`weighting`]: entropy weight method over indicator matrices
//! - [`ecomodel`]: the indicator equations, carbon conversion, and delta
//!   standardization
//! - [`scenario`]: end-to-end orchestration, reports, SVG plots, and the
//!   synthetic fleet generator
//! - [`cli`]: the `nevsim` command-line tool

pub mod behavior;
pub mod cli;
pub mod ecomodel;
pub mod error;
pub mod forecast;
pub mod scenario;
pub mod seeds;
pub mod telemetry;
pub mod weighting;

pub use error::{Error, Result};
