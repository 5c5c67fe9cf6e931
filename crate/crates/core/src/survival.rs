//! Survival probability, decoherence times and regime asymptotes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{QbdError, Result};
use crate::gaussian::{
    hs_overlap, modified_momentum_variance, modified_position_variance, purity, BranchTracker,
    ComplexSym2, GaussianMixtureState, C64,
};
use crate::propagator::{
    free_expansion_coefficients, influence_form, propagate_state, with_time, BathParams,
    PropagatorCoefficients,
};

const RESIDUE_LIMIT: f64 = 1e-9;

fn closed_form(
    a: f64,
    c: f64,
    bath: &BathParams,
    coeffs: &PropagatorCoefficients,
    branches: Option<&mut SweepBranches>,
) -> Result<f64> {
    if !(a > c.abs()) {
        return Err(QbdError::NonNormalizable {
            context: format!("survival needs a > |c|, got a = {a}, c = {c}"),
        });
    }
    if coeffs.t == 0.0 {
        return Ok(1.0);
    }
    let m0 = ComplexSym2::real(a, -c, a).xy_to_rq();
    let form = influence_form(coeffs, bath)?;
    // Q: integration over the initial coordinates; M: the overlap ∫∫ρ₀(x,y)ρₜ(y,x).
    let q = form.zz + m0;
    q.check_normalizable("propagator integral")?;
    let mt = form.xx - form.x0.congruence(&q.inverse()?);
    let m = mt.q_reflected() + m0;
    m.check_normalizable("overlap integral")?;
    let (dq, dm) = (q.det(), m.det());
    let (rq, rm) = match branches {
        Some(b) => (b.q.sqrt(dq), b.m.sqrt(dm)),
        None => (dq.sqrt(), dm.sqrt()),
    };
    let value = 2.0 * bath.mass * (a * a - c * c).sqrt()
        / (bath.hbar * coeffs.g2.abs() * rq * rm);
    check_residue("survival probability", value)
}

fn check_residue(quantity: &'static str, value: C64) -> Result<f64> {
    let limit = RESIDUE_LIMIT * value.re.abs().max(1e-300);
    if value.im.abs() > limit && value.im.abs() > 1e-300 {
        return Err(QbdError::ImaginaryResidue {
            quantity,
            residue: value.im.abs(),
            limit,
        });
    }
    Ok(value.re)
}

/// `S(t) = tr[ρ₀ρₜ]/tr[ρ₀²]` for the centered `(a, c)` Gaussian, in closed form.
pub fn survival_probability(
    a: f64,
    c: f64,
    bath: &BathParams,
    coeffs: &PropagatorCoefficients,
) -> Result<f64> {
    closed_form(a, c, bath, coeffs, None).map_err(|e| with_time(e, coeffs.t))
}

/// Determinant roots carried along one monotone sweep.
#[derive(Debug, Clone, Copy, Default)]
pub struct SweepBranches {
    q: BranchTracker,
    m: BranchTracker,
}

/// As [`survival_probability`], choosing each square root continuous with the
/// previous call on the same tracker.
pub fn survival_probability_tracked(
    a: f64,
    c: f64,
    bath: &BathParams,
    coeffs: &PropagatorCoefficients,
    branches: &mut SweepBranches,
) -> Result<f64> {
    closed_form(a, c, bath, coeffs, Some(branches)).map_err(|e| with_time(e, coeffs.t))
}

/// `tr[ρ₀ρₜ]/tr[ρ₀²]` for arbitrary mixtures.
pub fn relative_purity(initial: &GaussianMixtureState, evolved: &GaussianMixtureState) -> Result<f64> {
    let overlap = hs_overlap(initial, evolved)?;
    let p0 = purity(initial)?;
    check_residue("relative purity", overlap / p0)
}

/// Survival of a mixture through the generic propagate-and-overlap path.
pub fn mixture_survival(
    state: &GaussianMixtureState,
    bath: &BathParams,
    coeffs: &PropagatorCoefficients,
) -> Result<f64> {
    let evolved = propagate_state(state, coeffs, bath)?;
    relative_purity(state, &evolved).map_err(|e| with_time(e, coeffs.t))
}

/// `τ_D = λ_β² tr ρ²/(2γ Δ̃x²)`, the inverse initial decay rate.
pub fn decoherence_time(state: &GaussianMixtureState, bath: &BathParams) -> Result<f64> {
    bath.require_dissipative()?;
    let p = purity(state)?;
    let dx2 = modified_position_variance(state)?;
    Ok(bath.thermal_wavelength_sq() * p / (2.0 * bath.gamma * dx2))
}

/// Pure-state form `τ_D = λ_β²/(2γΔx²)`.
pub fn decoherence_time_pure(position_variance: f64, bath: &BathParams) -> Result<f64> {
    bath.require_dissipative()?;
    Ok(bath.thermal_wavelength_sq() / (2.0 * bath.gamma * position_variance))
}

/// `τ_D⁻¹` including the momentum-diffusion correction of the minimally
/// invasive Lindblad operator:
/// `(γ/tr ρ²)·{2Δ̃x²/λ_β² + (λ_β²/2ħ²)Δ̃p² + tr ρ²}`.
pub fn decoherence_rate_lindblad_corrected(state: &GaussianMixtureState, bath: &BathParams) -> Result<f64> {
    bath.require_dissipative()?;
    let p = purity(state)?;
    let dx2 = modified_position_variance(state)?;
    let dp2 = modified_momentum_variance(state, bath.hbar)?;
    let l2 = bath.thermal_wavelength_sq();
    let h2 = bath.hbar * bath.hbar;
    Ok(bath.gamma / p * (2.0 * dx2 / l2 + l2 / (2.0 * h2) * dp2 + p))
}

/// `1 − t/τ_D`, unclamped.
pub fn short_time_prediction(tau_d: f64, t: f64) -> f64 {
    1.0 - t / tau_d
}

/// `√3·m/(Dħt²)`, independent of the initial state.
pub fn asymptote_intermediate(bath: &BathParams, t: f64) -> f64 {
    3f64.sqrt() * bath.mass / (bath.d * bath.hbar * t * t)
}

/// `√((a+c)/(a−c))·√(4m²γ⁴/(ħ²D(D + (a+c)γ)))·(γt)^{−1/2}`.
pub fn asymptote_overdamped(a: f64, c: f64, bath: &BathParams, t: f64) -> Result<f64> {
    if bath.gamma == 0.0 {
        return Err(QbdError::DegenerateBath("late-time asymptote needs gamma > 0".into()));
    }
    Ok(overdamped_law(((a + c) / (a - c)).sqrt(), a + c, bath, t))
}

/// The same law for a mixture, with `1/tr ρ²` as the state factor and
/// `tr ρ²/(2Δ̃x²)` in place of `a + c`; both reduce to the Gaussian values.
pub fn asymptote_overdamped_state(state: &GaussianMixtureState, bath: &BathParams, t: f64) -> Result<f64> {
    if bath.gamma == 0.0 {
        return Err(QbdError::DegenerateBath("late-time asymptote needs gamma > 0".into()));
    }
    let p = purity(state)?;
    let kappa = p / (2.0 * modified_position_variance(state)?);
    Ok(overdamped_law(1.0 / p, kappa, bath, t))
}

fn overdamped_law(state_factor: f64, kappa: f64, bath: &BathParams, t: f64) -> f64 {
    let (m, g, d) = (bath.mass, bath.gamma, bath.d);
    let amp = (4.0 * m * m * g.powi(4) / (bath.hbar * bath.hbar * d * (d + kappa * g))).sqrt();
    state_factor * amp / (g * t).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    ZenoLinear,
    Intermediate,
    Overdamped,
    Crossover,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::ZenoLinear => "zeno-linear",
            Regime::Intermediate => "intermediate",
            Regime::Overdamped => "overdamped",
            Regime::Crossover => "crossover",
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn regime_classify(t: f64, tau_d: f64, tau_r: f64) -> Regime {
    if t < tau_d / 10.0 {
        Regime::ZenoLinear
    } else if t > 10.0 * tau_d && t < tau_r / 10.0 {
        Regime::Intermediate
    } else if t > 10.0 * tau_r {
        Regime::Overdamped
    } else {
        Regime::Crossover
    }
}

/// `n` log-spaced points from `t_min` to `t_max` inclusive.
pub fn log_spaced(t_min: f64, t_max: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![t_min],
        _ => {
            let (l0, l1) = (t_min.ln(), t_max.ln());
            (0..n)
                .map(|i| {
                    if i == 0 {
                        t_min
                    } else if i == n - 1 {
                        t_max
                    } else {
                        (l0 + (l1 - l0) * i as f64 / (n - 1) as f64).exp()
                    }
                })
                .collect()
        }
    }
}

pub fn linear_spaced(t_min: f64, t_max: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![t_min],
        _ => (0..n)
            .map(|i| t_min + (t_max - t_min) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Evaluates `f` on contiguous chunks in parallel; each chunk runs in time
/// order with its own branch trackers.
fn chunked_sweep<T: Send>(
    times: &[f64],
    workers: usize,
    f: impl Fn(f64, &mut SweepBranches) -> T + Sync,
) -> Vec<T> {
    let chunk = times.len().div_ceil(workers.max(1)).max(1);
    times
        .par_chunks(chunk)
        .flat_map_iter(|ts| {
            let mut branches = SweepBranches::default();
            ts.iter().map(|&t| f(t, &mut branches)).collect::<Vec<_>>()
        })
        .collect()
}

/// Closed-form `S(t)` of the free damped particle at every time.
pub fn survival_sweep(a: f64, c: f64, bath: &BathParams, times: &[f64]) -> Vec<Result<f64>> {
    chunked_sweep(times, rayon::current_num_threads(), |t, br| {
        let co = free_expansion_coefficients(bath, t)?;
        survival_probability_tracked(a, c, bath, &co, br)
    })
}

/// `S(t)` of an arbitrary mixture under free damped evolution.
pub fn mixture_survival_sweep(
    state: &GaussianMixtureState,
    bath: &BathParams,
    times: &[f64],
) -> Vec<Result<f64>> {
    chunked_sweep(times, rayon::current_num_threads(), |t, _| {
        let co = free_expansion_coefficients(bath, t)?;
        mixture_survival(state, bath, &co)
    })
}

/// Sampled survival probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalCurve {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// Known bath, when the curve was generated rather than measured.
    pub bath: Option<BathParams>,
    /// Known decoherence time, used to place the fit windows.
    pub tau_d: Option<f64>,
    pub state_label: String,
}

impl SurvivalCurve {
    pub fn new(times: Vec<f64>, values: Vec<f64>, state_label: impl Into<String>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(QbdError::InvalidParameter(format!(
                "{} times but {} values",
                times.len(),
                values.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) || times.first().is_some_and(|&t| !(t > 0.0)) {
            return Err(QbdError::InvalidParameter("times must be positive and strictly increasing".into()));
        }
        if values.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(QbdError::InvalidParameter("survival values must be positive and finite".into()));
        }
        if values.first().is_some_and(|&v| v > 1.0 + 1e-9) {
            return Err(QbdError::InvalidParameter("survival probability exceeds 1".into()));
        }
        Ok(Self {
            times,
            values,
            bath: None,
            tau_d: None,
            state_label: state_label.into(),
        })
    }

    /// Closed-form curve of the `(a, c)` Gaussian, with the bath and `τ_D` attached.
    pub fn closed_form(a: f64, c: f64, bath: &BathParams, times: Vec<f64>) -> Result<Self> {
        let values = survival_sweep(a, c, bath, &times)
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        let mut curve = Self::new(times, values, format!("gaussian_ac(a={a}, c={c})"))?;
        curve.bath = Some(*bath);
        curve.tau_d = (bath.d > 0.0).then(|| (a + c) / bath.d);
        Ok(curve)
    }
}

/// Result of fitting the two asymptotic power laws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RegimeEstimate {
    pub tau_d: Option<f64>,
    pub tau_r: f64,
    pub tau_beta: f64,
    pub intercept_mid: f64,
    pub intercept_late: f64,
    pub gamma_hat: f64,
    pub temperature_hat: f64,
    pub windows: FitWindows,
    pub residuals: FitResiduals,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Window {
    pub t_start: f64,
    pub t_end: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitWindows {
    pub mid: Window,
    pub late: Window,
}

/// RMS residuals in `ln S`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResiduals {
    pub mid: f64,
    pub late: f64,
}

pub const SLOPE_TOLERANCE: f64 = 0.1;
pub const MIN_WINDOW_POINTS: usize = 8;
pub const MAX_FIT_RMS: f64 = 0.1;
const SLOPE_STENCIL: usize = 9;

/// Least-squares slope of `ln S` against `ln t` over a centered stencil at each point.
pub fn local_slopes(times: &[f64], values: &[f64]) -> Vec<f64> {
    let n = times.len();
    let half = SLOPE_STENCIL / 2;
    let lx: Vec<f64> = times.iter().map(|t| t.ln()).collect();
    let ly: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            slope_fit(&lx[lo..hi], &ly[lo..hi]).unwrap_or(f64::NAN)
        })
        .collect()
}

fn slope_fit(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    if x.len() < 2 {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Maximal index runs `[start, end)` where `accept` holds.
fn runs(slopes: &[f64], accept: impl Fn(f64) -> bool) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, &s) in slopes.iter().enumerate() {
        match (accept(s), start) {
            (true, None) => start = Some(i),
            (false, Some(s0)) => {
                out.push((s0, i));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s0) = start {
        out.push((s0, slopes.len()));
    }
    out
}

/// Intercept `c` of `ln S = c + slope·ln t` and its RMS residual.
pub fn fit_intercept(times: &[f64], values: &[f64], slope: f64) -> (f64, f64) {
    let r: Vec<f64> = times
        .iter()
        .zip(values)
        .map(|(t, v)| v.ln() - slope * t.ln())
        .collect();
    let n = r.len() as f64;
    let c = r.iter().sum::<f64>() / n;
    let rms = (r.iter().map(|x| (x - c).powi(2)).sum::<f64>() / n).sqrt();
    (c, rms)
}

/// Locates the `t⁻²` and `t^{−1/2}` plateaus by sliding-slope detection and
/// inverts their intercepts for `τ_R` and `τ_β`.
///
/// When the curve carries `τ_D` and a bath, detection is restricted to
/// `[10τ_D, 0.1τ_R]` and `[10τ_R, ∞)`. The late law is taken in its pure-state,
/// `D ≫ (a+c)γ` form `τ_β/√(τ_R t)`; the mid law is `√3 m/(Dħt²) = (√3/2)τ_βτ_R/t²`.
pub fn estimate_bath_parameters(curve: &SurvivalCurve, hbar: f64) -> Result<RegimeEstimate> {
    let (times, values) = (&curve.times, &curve.values);
    if times.len() < 2 * MIN_WINDOW_POINTS {
        return Err(QbdError::InsufficientRange(format!(
            "{} points cannot hold two windows of {MIN_WINDOW_POINTS}",
            times.len()
        )));
    }
    let slopes = local_slopes(times, values);
    let known = curve.bath.filter(|b| b.gamma > 0.0);
    let in_mid = |i: usize| match (known, curve.tau_d) {
        (Some(b), Some(td)) => times[i] >= 10.0 * td && times[i] <= 0.1 * b.tau_r(),
        (Some(b), None) => times[i] <= 0.1 * b.tau_r(),
        _ => true,
    };
    let in_late = |i: usize| known.map_or(true, |b| times[i] >= 10.0 * b.tau_r());

    let mid_runs: Vec<_> = runs(&slopes, |s| (s + 2.0).abs() <= SLOPE_TOLERANCE)
        .into_iter()
        .map(|(s, e)| restrict(s, e, &in_mid))
        .filter(|&(s, e)| e - s >= MIN_WINDOW_POINTS)
        .collect();
    let mid = mid_runs
        .iter()
        .copied()
        .max_by_key(|&(s, e)| e - s)
        .ok_or_else(|| {
            QbdError::InsufficientRange(format!(
                "no run of {MIN_WINDOW_POINTS} points with local slope -2 ± {SLOPE_TOLERANCE}; slopes span [{:.3}, {:.3}]",
                slopes.iter().copied().fold(f64::INFINITY, f64::min),
                slopes.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            ))
        })?;
    let late = runs(&slopes, |s| (s + 0.5).abs() <= SLOPE_TOLERANCE)
        .into_iter()
        .map(|(s, e)| restrict(s, e, &in_late))
        .filter(|&(s, e)| s >= mid.1 && e - s >= MIN_WINDOW_POINTS)
        .next_back()
        .ok_or_else(|| {
            QbdError::InsufficientRange(format!(
                "no run of {MIN_WINDOW_POINTS} points with local slope -0.5 ± {SLOPE_TOLERANCE} after t = {:e}",
                times[mid.1 - 1]
            ))
        })?;

    let (c_mid, rms_mid) = fit_intercept(&times[mid.0..mid.1], &values[mid.0..mid.1], -2.0);
    if rms_mid > MAX_FIT_RMS {
        return Err(QbdError::BadFit {
            window: "mid".into(),
            rms: rms_mid,
            limit: MAX_FIT_RMS,
        });
    }
    let (c_late, rms_late) = fit_intercept(&times[late.0..late.1], &values[late.0..late.1], -0.5);
    if rms_late > MAX_FIT_RMS {
        return Err(QbdError::BadFit {
            window: "late".into(),
            rms: rms_late,
            limit: MAX_FIT_RMS,
        });
    }
    let (a_mid, a_late) = (c_mid.exp(), c_late.exp());
    let tau_r = (2.0 * a_mid / (3f64.sqrt() * a_late)).powf(2.0 / 3.0);
    let tau_beta = a_late * tau_r.sqrt();
    let window = |(s, e): (usize, usize)| Window {
        t_start: times[s],
        t_end: times[e - 1],
        points: e - s,
    };
    Ok(RegimeEstimate {
        tau_d: curve.tau_d.or_else(|| estimate_tau_d(times, values)),
        tau_r,
        tau_beta,
        intercept_mid: c_mid,
        intercept_late: c_late,
        gamma_hat: 1.0 / tau_r,
        temperature_hat: hbar / tau_beta,
        windows: FitWindows {
            mid: window(mid),
            late: window(late),
        },
        residuals: FitResiduals {
            mid: rms_mid,
            late: rms_late,
        },
    })
}

fn restrict(start: usize, end: usize, keep: &impl Fn(usize) -> bool) -> (usize, usize) {
    let s = (start..end).find(|&i| keep(i)).unwrap_or(end);
    let e = (s..end).rev().find(|&i| keep(i)).map_or(s, |i| i + 1);
    (s, e)
}

/// `t/(1 − S)` at the earliest sample, if it is still in the linear regime.
fn estimate_tau_d(times: &[f64], values: &[f64]) -> Option<f64> {
    let (t, s) = (times[0], values[0]);
    (s > 0.99 && s < 1.0).then(|| t / (1.0 - s))
}
