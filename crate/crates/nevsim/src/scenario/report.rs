//! Report rendering: JSON, CSV, and fixed-width text tables.
//!
//! The text format mirrors the two summary tables of the impact model:
//! `Indicator / Before Simulation / After Simulation` for the six
//! environmental indicators, and `Indicator / Values / Standardization` for
//! the efficiency rows. Cell formats are pinned per indicator (two decimals
//! for LD/PC/CCI/FR, one for WTR, integer for LSBCT) so reports are
//! byte-stable across runs.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::ScenarioResult;

/// Output encodings the toolkit can emit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Json,
    Csv,
    Table,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "table" => Ok(ReportFormat::Table),
            other => Err(Error::Config(format!(
                "unknown format `{other}` (expected json, csv, or table)"
            ))),
        }
    }
}

/// One impact-table row: label plus formatted before/after cells.
fn impact_rows(result: &ScenarioResult) -> Vec<(&'static str, String, String)> {
    vec![
        (
            "Land Degradation (LD)",
            format!("{:.2}", result.before.ld),
            format!("{:.2}", result.after.ld),
        ),
        (
            "Pollutant Concentration (PC) - SO2",
            format!("{:.2} mg/m³", result.before.pc),
            format!("{:.2} mg/m³", result.after.pc),
        ),
        (
            "Climate Change Impact (CCI)",
            format!("{:.2} °C", result.before.cci),
            format!("{:.2} °C", result.after.cci),
        ),
        (
            "Forest Restoration (FR)",
            format!("{:.2}%", result.before.fr),
            format!("{:.2}%", result.after.fr),
        ),
        (
            "Waste Treatment Rate (WTR)",
            format!("{:.1}%", result.before.wtr),
            format!("{:.1}%", result.after.wtr),
        ),
        (
            "Lithium Sulfur Battery Chemical Toxicity (LSBCT)",
            format!("{:.0}", result.before.lsbct),
            format!("{:.0}", result.after.lsbct),
        ),
    ]
}

/// Standardized values render as integers when they are whole (the growth
/// row normalizes to exactly 1), five decimals otherwise.
fn format_standardized(value: Option<f64>) -> String {
    match value {
        None => "n/a".to_string(),
        Some(v) if (v - v.round()).abs() < 1e-9 => format!("{:.0}", v),
        Some(v) => format!("{v:.5}"),
    }
}

fn efficiency_rows(result: &ScenarioResult) -> Vec<(&'static str, String, String)> {
    vec![
        (
            "NEV Growth (Δ NEV Population)",
            format!("{:.6}", result.delta_nev_population),
            format_standardized(result.standardized_growth),
        ),
        (
            "Δ NEV Efficiency",
            format!("{:.6}", result.delta_nev_efficiency),
            format_standardized(result.standardized_efficiency),
        ),
    ]
}

fn render_table(title: &str, headers: [&str; 3], rows: &[(&'static str, String, String)]) -> String {
    let width0 = rows
        .iter()
        .map(|r| r.0.chars().count())
        .chain([headers[0].chars().count()])
        .max()
        .unwrap_or(0);
    let width1 = rows
        .iter()
        .map(|r| r.1.chars().count())
        .chain([headers[1].chars().count()])
        .max()
        .unwrap_or(0);
    let pad = |text: &str, width: usize| {
        let mut cell = text.to_string();
        for _ in text.chars().count()..width {
            cell.push(' ');
        }
        cell
    };
    let mut out = format!("{title}\n");
    out.push_str(&format!(
        "{}  {}  {}\n",
        pad(headers[0], width0),
        pad(headers[1], width1),
        headers[2]
    ));
    for (label, a, b) in rows {
        out.push_str(&format!(
            "{}  {}  {}\n",
            pad(label, width0),
            pad(a, width1),
            b
        ));
    }
    out
}

/// The two text tables plus any run notes.
pub fn report_text(result: &ScenarioResult) -> String {
    let mut out = render_table(
        "Environmental Impact",
        ["Indicator", "Before Simulation", "After Simulation"],
        &impact_rows(result),
    );
    out.push('\n');
    out.push_str(&render_table(
        "NEV Efficiency",
        ["Indicator", "Values", "Standardization"],
        &efficiency_rows(result),
    ));
    if !result.notes.is_empty() {
        out.push('\n');
        for note in &result.notes {
            out.push_str(&format!("note: {note}\n"));
        }
    }
    out
}

/// CSV with one row per indicator: six impact rows, then the efficiency
/// rows (whose columns hold value and standardization).
pub fn report_csv(result: &ScenarioResult) -> String {
    let mut out = String::from("section,indicator,before,after\n");
    for (label, a, b) in impact_rows(result) {
        out.push_str(&format!("impact,\"{label}\",{a},{b}\n"));
    }
    for (label, a, b) in efficiency_rows(result) {
        out.push_str(&format!("efficiency,\"{label}\",{a},{b}\n"));
    }
    out
}

/// Lossless JSON encoding of the full result.
pub fn report_json(result: &ScenarioResult) -> Result<String> {
    let mut text = serde_json::to_string_pretty(result)
        .map_err(|err| Error::bad_input(format!("result not serializable: {err}")))?;
    text.push('\n');
    Ok(text)
}

/// Parses a report back; inverse of [`report_json`].
pub fn parse_report_json(text: &str) -> Result<ScenarioResult> {
    serde_json::from_str(text).map_err(|err| Error::bad_input(format!("invalid report: {err}")))
}

/// Renders one format to a string.
pub fn render(result: &ScenarioResult, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Json => report_json(result),
        ReportFormat::Csv => Ok(report_csv(result)),
        ReportFormat::Table => Ok(report_text(result)),
    }
}

/// Writes the canonical output tree:
/// `report.{json,csv,txt}`, `anomalies.csv`, `profiles.csv`,
/// `models/*.json`, `plots/*.svg`. Everything is rendered in memory first
/// so a failed run leaves no partial tree.
pub fn write_outputs(result: &ScenarioResult, out_dir: &Path) -> Result<()> {
    let mut files: Vec<(std::path::PathBuf, String)> = vec![
        (out_dir.join("report.json"), report_json(result)?),
        (out_dir.join("report.csv"), report_csv(result)),
        (out_dir.join("report.txt"), report_text(result)),
        (
            out_dir.join("anomalies.csv"),
            crate::behavior::anomalies_to_csv(&result.anomalies),
        ),
        (
            out_dir.join("profiles.csv"),
            crate::behavior::profiles_to_csv(&result.profiles),
        ),
    ];
    for (name, model) in &result.models {
        let text = serde_json::to_string_pretty(model)
            .map_err(|err| Error::bad_input(format!("model not serializable: {err}")))?;
        files.push((out_dir.join("models").join(format!("{name}.json")), text + "\n"));
    }
    let plots = crate::scenario::plots::emit_plots(result);
    for plot in plots.files {
        files.push((out_dir.join("plots").join(plot.0), plot.1));
    }

    for (path, content) in files {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(path, content)?;
    }
    Ok(())
}
