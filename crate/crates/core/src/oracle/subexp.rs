//! Numerical check that a decay is slower than any exponential.

use serde::{Deserialize, Serialize};

use crate::error::{QbdError, Result};
use crate::survival::SurvivalCurve;

pub const MIN_POINTS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SubexpReport {
    /// `−ln S(t)/t` is non-increasing and ends strictly below its start.
    pub ratio_decreasing: bool,
    /// Exponent of the best fit `−ln S ≈ A·t^q + B`.
    pub q_estimate: f64,
    pub points: usize,
}

/// Tests `−ln S(t)/t` for monotone decrease on `[t_start, t_max]` and fits `q`.
pub fn subexponential_check(curve: &SurvivalCurve, t_start: f64) -> Result<SubexpReport> {
    let (t, y): (Vec<f64>, Vec<f64>) = curve
        .times
        .iter()
        .zip(&curve.values)
        .filter(|(t, _)| **t >= t_start)
        .map(|(t, s)| (*t, -s.ln()))
        .unzip();
    if t.len() < MIN_POINTS {
        return Err(QbdError::InsufficientRange(format!(
            "{} points at t >= {t_start}, need {MIN_POINTS}",
            t.len()
        )));
    }
    let ratio: Vec<f64> = t.iter().zip(&y).map(|(t, y)| y / t).collect();
    let scale = ratio.iter().map(|r| r.abs()).fold(0.0, f64::max);
    let monotone = ratio.windows(2).all(|w| w[1] <= w[0] + 1e-12 * scale);
    let first = ratio[0];
    let last = ratio[ratio.len() - 1];
    let ratio_decreasing = monotone && last < first - 1e-9 * scale;
    Ok(SubexpReport {
        ratio_decreasing,
        q_estimate: fit_exponent(&t, &y),
        points: t.len(),
    })
}

/// Residual of the linear least-squares fit `y ≈ A·φ_q(τ) + B` with the
/// Box–Cox basis `φ_q(τ) = (τ^q − 1)/q`, which tends to `ln τ` at `q = 0`.
fn residual(tau: &[f64], y: &[f64], q: f64) -> f64 {
    let phi: Vec<f64> = tau
        .iter()
        .map(|&s| {
            let l = s.ln();
            if (q * l).abs() < 1e-8 {
                l * (1.0 + 0.5 * q * l)
            } else {
                (q * l).exp_m1() / q
            }
        })
        .collect();
    let n = phi.len() as f64;
    let mp = phi.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let spp: f64 = phi.iter().map(|p| (p - mp).powi(2)).sum();
    let spy: f64 = phi.iter().zip(y).map(|(p, v)| (p - mp) * (v - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    if spp <= 0.0 {
        return syy;
    }
    (syy - spy * spy / spp).max(0.0)
}

/// Variable projection over `q ∈ [−1, 2]`: coarse scan, then golden section.
fn fit_exponent(t: &[f64], y: &[f64]) -> f64 {
    let tau: Vec<f64> = t.iter().map(|v| v / t[0]).collect();
    let f = |q: f64| residual(&tau, y, q);
    let (lo, hi, steps) = (-1.0, 2.0, 300);
    let h = (hi - lo) / steps as f64;
    let best = (0..=steps)
        .map(|i| lo + i as f64 * h)
        .min_by(|a, b| f(*a).total_cmp(&f(*b)))
        .unwrap_or(0.0);
    let (mut a, mut b) = ((best - h).max(lo), (best + h).min(hi));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    for _ in 0..80 {
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - g * (b - a);
        d = a + g * (b - a);
    }
    0.5 * (a + b)
}
