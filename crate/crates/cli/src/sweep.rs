//! `qbd sweep`: the survival table with its regime predictions.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use qbd_core::gaussian::position_variance;
use qbd_core::propagator::{free_expansion_coefficients, propagate_state, scaling_factor};
use qbd_core::survival::{
    asymptote_intermediate, asymptote_overdamped, asymptote_overdamped_state, decoherence_time,
    mixture_survival_sweep, regime_classify, short_time_prediction, survival_sweep,
};
use qbd_core::{BathParams, GaussianMixtureState, Result as CoreResult};

use crate::config::ScenarioConfig;
use crate::error::CliError;

pub const HEADER: [&str; 8] = ["t", "S", "S_short", "S_mid", "S_late", "b", "var", "regime"];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub t: f64,
    pub s: f64,
    pub s_short: f64,
    pub s_mid: f64,
    pub s_late: f64,
    pub b: f64,
    pub var: f64,
    pub regime: String,
}

#[derive(Debug, Clone)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    /// Rows whose closed form or propagation failed, with the reason.
    pub failures: Vec<(f64, String)>,
    pub tau_d: Option<f64>,
}

/// Shortest round-trip scientific notation; `nan` for failed entries.
pub fn format_number(v: f64) -> String {
    if v.is_nan() {
        "nan".to_owned()
    } else {
        format!("{v:e}")
    }
}

fn or_nan(v: CoreResult<f64>) -> f64 {
    v.unwrap_or(f64::NAN)
}

pub fn run_sweep(cfg: &ScenarioConfig) -> Result<SweepTable, CliError> {
    let bath = cfg.bath.params()?;
    let state = cfg.state.build(bath.hbar, bath.mass)?;
    let times = cfg.sweep.times();
    let tau_d = decoherence_time(&state, &bath).ok();
    let ac = cfg.state.centered_ac(bath.hbar, bath.mass);

    let survival = match ac {
        Some((a, c)) => survival_sweep(a, c, &bath, &times),
        None => mixture_survival_sweep(&state, &bath, &times),
    };
    let var0 = position_variance(&state)?;
    let spread: Vec<CoreResult<(f64, f64)>> = times
        .par_iter()
        .map(|&t| spread_at(&state, ac, &bath, t, var0))
        .collect();

    let mut rows = Vec::with_capacity(times.len());
    let mut failures = Vec::new();
    for ((&t, s), spread) in times.iter().zip(survival).zip(spread) {
        if let Err(e) = &s {
            failures.push((t, e.to_string()));
        }
        if let Err(e) = &spread {
            failures.push((t, e.to_string()));
        }
        let (b, var) = spread.unwrap_or((f64::NAN, f64::NAN));
        let s_late = match ac {
            Some((a, c)) => or_nan(asymptote_overdamped(a, c, &bath, t)),
            None => or_nan(asymptote_overdamped_state(&state, &bath, t)),
        };
        rows.push(SweepRow {
            t,
            s: or_nan(s),
            s_short: tau_d.map_or(f64::NAN, |td| short_time_prediction(td, t)),
            s_mid: if bath.d > 0.0 { asymptote_intermediate(&bath, t) } else { f64::NAN },
            s_late,
            b,
            var,
            regime: tau_d.map_or_else(
                || "undefined".to_owned(),
                |td| regime_classify(t, td, bath.tau_r()).to_string(),
            ),
        });
    }
    Ok(SweepTable { rows, failures, tau_d })
}

/// `(b, Δx²)`: the scaling factor and variance of the evolved state.
fn spread_at(
    state: &GaussianMixtureState,
    ac: Option<(f64, f64)>,
    bath: &BathParams,
    t: f64,
    var0: f64,
) -> CoreResult<(f64, f64)> {
    let co = free_expansion_coefficients(bath, t)?;
    match ac {
        Some((a, c)) => {
            let b = scaling_factor(a, c, &co, bath);
            Ok((b, b * b / (2.0 * (a - c))))
        }
        None => {
            let var = position_variance(&propagate_state(state, &co, bath)?)?;
            Ok(((var / var0).sqrt(), var))
        }
    }
}

/// Writes the table; with `in_tau_d` the `t` column is in units of `τ_D`.
pub fn write_csv(table: &SweepTable, out: impl Write, in_tau_d: bool) -> Result<(), CliError> {
    let scale = if in_tau_d {
        table
            .tau_d
            .ok_or_else(|| CliError::Validation("--in-tau-d needs a bath with gamma > 0 and D > 0".into()))?
    } else {
        1.0
    };
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| CliError::Io(e.into());
    w.write_record(HEADER).map_err(io)?;
    for r in &table.rows {
        w.write_record([
            format_number(r.t / scale),
            format_number(r.s),
            format_number(r.s_short),
            format_number(r.s_mid),
            format_number(r.s_late),
            format_number(r.b),
            format_number(r.var),
            r.regime.clone(),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// A gnuplot script drawing the table next to it in log-log axes.
pub fn gnuplot_snippet(csv_path: &Path, in_tau_d: bool) -> String {
    let name = csv_path.file_name().map_or_else(|| "out.csv".into(), |n| n.to_string_lossy());
    let xlabel = if in_tau_d { "t / tau_D" } else { "t" };
    format!(
        "set datafile separator ','\n\
         set logscale xy\n\
         set format y '10^{{%L}}'\n\
         set xlabel '{xlabel}'\n\
         set ylabel 'S(t)'\n\
         set yrange [1e-12:2]\n\
         set key bottom left\n\
         plot '{name}' using 1:2 skip 1 with lines lw 2 title 'S(t)', \\\n\
         \x20    '' using 1:3 skip 1 with lines dt 2 title '1 - t/tau_D', \\\n\
         \x20    '' using 1:4 skip 1 with lines dt 3 title 'intermediate', \\\n\
         \x20    '' using 1:5 skip 1 with lines dt 4 title 'overdamped'\n"
    )
}
