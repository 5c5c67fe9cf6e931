//! `qbd fit`: the two asymptotic intercepts of a survival table.

use std::io::Read;

use serde::{Deserialize, Serialize};

use qbd_core::survival::{estimate_bath_parameters, FitResiduals, FitWindows, SurvivalCurve};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FitReport {
    pub tau_beta: f64,
    pub tau_r: f64,
    pub gamma_hat: f64,
    pub temperature_hat: f64,
    pub windows: FitWindows,
    pub residuals: FitResiduals,
}

/// Reads the `t` and `S` columns; rows with a non-finite `S` are dropped.
pub fn read_curve(input: impl Read) -> Result<SurvivalCurve, CliError> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr
        .headers()
        .map_err(|e| CliError::Validation(format!("csv header: {e}")))?
        .clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| CliError::Validation(format!("csv: missing column `{name}`")))
    };
    let (it, is) = (col("t")?, col("S")?);
    let (mut times, mut values) = (Vec::new(), Vec::new());
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Validation(format!("csv: {e}")))?;
        let field = |i: usize| -> Result<f64, CliError> {
            let raw = rec.get(i).unwrap_or("").trim();
            raw.parse()
                .map_err(|_| CliError::Validation(format!("csv row {}: `{raw}` is not a number", line + 2)))
        };
        let (t, s) = (field(it)?, field(is)?);
        if s.is_finite() {
            times.push(t);
            values.push(s);
        }
    }
    SurvivalCurve::new(times, values, "csv").map_err(|e| CliError::Validation(format!("csv: {e}")))
}

pub fn run_fit(input: impl Read, hbar: f64) -> Result<FitReport, CliError> {
    let curve = read_curve(input)?;
    let est = estimate_bath_parameters(&curve, hbar)?;
    Ok(FitReport {
        tau_beta: est.tau_beta,
        tau_r: est.tau_r,
        gamma_hat: est.gamma_hat,
        temperature_hat: est.temperature_hat,
        windows: est.windows,
        residuals: est.residuals,
    })
}
