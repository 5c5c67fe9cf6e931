//! Influence-functional coefficients and the exact Caldeira–Leggett propagator
//! acting on Gaussian mixtures.
//!
//! The kernel is written in `q = x − y`, `r = (x + y)/2` (and likewise for the
//! initial coordinates):
//!
//! ```text
//! J = m/(2πħ|G₂|) · exp(iΘ − Γ)
//! Θ = (m/ħG₂)(Ġ₂ q − q₀)(r − G₁ r₀) + (m/ħ) Ġ₁ q r₀
//! Γ = D (α q₀² + β q² + 2η q q₀)
//! ```
//!
//! with `G₁, G₂` the fundamental solutions of `ẍ + 2γẋ + ω(t)²x = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{QbdError, Result};
use crate::gaussian::{
    log_gaussian_integral_2d, ComplexSym2, GaussianKernel, GaussianMixtureState, Mat2, C64,
};
use crate::ode::{self, OdeOptions};
use crate::quadrature::integrate_vec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BathParams {
    pub gamma: f64,
    #[serde(rename = "D")]
    pub d: f64,
    pub hbar: f64,
    pub mass: f64,
}

impl BathParams {
    /// Natural units, `ħ = m = 1`.
    pub fn new(gamma: f64, d: f64) -> Result<Self> {
        Self::with_units(gamma, d, 1.0, 1.0)
    }

    pub fn with_units(gamma: f64, d: f64, hbar: f64, mass: f64) -> Result<Self> {
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(QbdError::InvalidParameter(format!("gamma = {gamma} must be >= 0")));
        }
        if !(d >= 0.0 && d.is_finite()) {
            return Err(QbdError::InvalidParameter(format!("D = {d} must be >= 0")));
        }
        if !(hbar > 0.0 && mass > 0.0) {
            return Err(QbdError::InvalidParameter(format!(
                "hbar = {hbar} and mass = {mass} must be positive"
            )));
        }
        Ok(Self {
            gamma,
            d,
            hbar,
            mass,
        })
    }

    /// Bath specified by its temperature `k_B T` instead of `D = 2mγkT/ħ²`.
    pub fn from_temperature(gamma: f64, kt: f64, hbar: f64, mass: f64) -> Result<Self> {
        if !(kt >= 0.0 && kt.is_finite()) {
            return Err(QbdError::InvalidParameter(format!("temperature = {kt} must be >= 0")));
        }
        Self::with_units(gamma, 2.0 * mass * gamma * kt / (hbar * hbar), hbar, mass)
    }

    /// `k_B T = ħ²D/(2mγ)`; infinite without damping.
    pub fn temperature(&self) -> f64 {
        self.hbar * self.hbar * self.d / (2.0 * self.mass * self.gamma)
    }

    /// `λ_β² = ħ²/(2m k_B T) = γ/D`.
    pub fn thermal_wavelength_sq(&self) -> f64 {
        self.gamma / self.d
    }

    /// `τ_β = ħ/k_B T`.
    pub fn tau_beta(&self) -> f64 {
        self.hbar / self.temperature()
    }

    /// `τ_R = 1/γ`.
    pub fn tau_r(&self) -> f64 {
        1.0 / self.gamma
    }

    pub fn require_dissipative(&self) -> Result<()> {
        if self.gamma > 0.0 && self.d > 0.0 {
            Ok(())
        } else {
            Err(QbdError::DegenerateBath(format!(
                "gamma = {} and D = {} must both be positive",
                self.gamma, self.d
            )))
        }
    }
}

/// Everything the influence functional needs at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagatorCoefficients {
    pub t: f64,
    pub g1: f64,
    pub dg1: f64,
    pub g2: f64,
    pub dg2: f64,
    pub alpha: f64,
    pub beta: f64,
    pub eta: f64,
    /// 0 without damping, 1 otherwise.
    pub epsilon: u8,
}

impl PropagatorCoefficients {
    pub fn identity() -> Self {
        Self {
            t: 0.0,
            g1: 1.0,
            dg1: 0.0,
            g2: 0.0,
            dg2: 1.0,
            alpha: 0.0,
            beta: 0.0,
            eta: 0.0,
            epsilon: 0,
        }
    }
}

fn epsilon(gamma: f64) -> u8 {
    u8::from(gamma != 0.0)
}

/// `G₂` of the free damped particle, `(1 − e^{−2γτ})/(2γ)`.
pub fn free_g2(gamma: f64, tau: f64) -> f64 {
    if gamma == 0.0 {
        tau
    } else {
        -(-2.0 * gamma * tau).exp_m1() / (2.0 * gamma)
    }
}

/// `Σ_{n≥3} c(n) xⁿ/n!`, summed until terms stop contributing.
fn tail_series(x: f64, c: impl Fn(i32) -> f64) -> f64 {
    let mut sum = 0.0;
    let mut pow = x * x * x / 6.0;
    for n in 3..80 {
        let term = c(n) * pow;
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
        pow *= x / f64::from(n + 1);
    }
    sum
}

/// `α = I/G₂²` for the free particle, from `16γ³ I = 4x − 3 + 4e^{−2x} − e^{−4x}` with `x = γt`.
fn free_alpha(gamma: f64, t: f64) -> f64 {
    let x = gamma * t;
    if gamma == 0.0 {
        return t / 3.0;
    }
    let f = if x < 1.0 {
        tail_series(x, |n| 4.0 * (-2f64).powi(n) - (-4f64).powi(n))
    } else {
        4.0 * x - 3.0 + 4.0 * (-2.0 * x).exp() - (-4.0 * x).exp()
    };
    let one_minus = -(-2.0 * x).exp_m1();
    f / (4.0 * gamma * one_minus * one_minus)
}

/// `β` for the free particle, from `16γ³ G₂² β = 1 − 4e^{−2x} + (4x + 3)e^{−4x}`.
fn free_beta(gamma: f64, t: f64) -> f64 {
    let x = gamma * t;
    if gamma == 0.0 {
        return t / 3.0;
    }
    let g = if x < 1.0 {
        tail_series(x, |n| {
            let n_f = f64::from(n);
            -4.0 * (-2f64).powi(n) + 3.0 * (-4f64).powi(n) + 4.0 * n_f * (-4f64).powi(n - 1)
        })
    } else {
        1.0 - 4.0 * (-2.0 * x).exp() + (4.0 * x + 3.0) * (-4.0 * x).exp()
    };
    let one_minus = -(-2.0 * x).exp_m1();
    g / (4.0 * gamma * one_minus * one_minus)
}

/// Coefficients of the free (`ω = 0`) damped particle.
///
/// `α` and `β` are closed forms; `η` always comes from its defining integral.
pub fn free_expansion_coefficients(bath: &BathParams, t: f64) -> Result<PropagatorCoefficients> {
    if !(t >= 0.0) {
        return Err(QbdError::InvalidParameter(format!("t = {t} must be >= 0")));
    }
    if t == 0.0 {
        return Ok(PropagatorCoefficients::identity());
    }
    let gamma = bath.gamma;
    let g2 = free_g2(gamma, t);
    let dg2 = (-2.0 * gamma * t).exp();
    // With σ = t − s: u = G₂(σ) and G₂w − Ġ₂u = e^{−2γσ} G₂(s), free of cancellation.
    let [eta] = integrate_vec(
        |s| {
            let sigma = t - s;
            let u = free_g2(gamma, sigma);
            let mixed = (-2.0 * gamma * sigma).exp() * free_g2(gamma, s);
            [u * mixed / (g2 * g2)]
        },
        0.0,
        t,
        1e-13 * t,
        1e-12,
    )?;
    Ok(PropagatorCoefficients {
        t,
        g1: 1.0,
        dg1: 0.0,
        g2,
        dg2,
        alpha: free_alpha(gamma, t),
        beta: free_beta(gamma, t),
        eta,
        epsilon: epsilon(gamma),
    })
}

/// `(G₁, Ġ₁, G₂, Ġ₂)` at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FundamentalSolutions {
    pub g1: f64,
    pub dg1: f64,
    pub g2: f64,
    pub dg2: f64,
}

/// Both fundamental solutions of `ẍ + 2γẋ + ω(t)²x = 0` on `[0, t]` as one
/// dense-output trajectory of `(G₁, Ġ₁, G₂, Ġ₂)`.
pub fn fundamental_trajectory(
    omega: &(impl Fn(f64) -> f64 + ?Sized),
    gamma: f64,
    t: f64,
) -> Result<ode::Trajectory<4>> {
    let opts = OdeOptions::default();
    let traj = ode::solve(
        |s, y| {
            let w2 = omega(s).powi(2);
            [
                y[1],
                -2.0 * gamma * y[1] - w2 * y[0],
                y[3],
                -2.0 * gamma * y[3] - w2 * y[2],
            ]
        },
        0.0,
        [1.0, 0.0, 0.0, 1.0],
        t,
        &opts,
    )?;
    let [g1, dg1, g2, dg2] = traj.final_state();
    // Abel: the Wronskian G₁Ġ₂ − Ġ₁G₂ decays as e^{−2γt}.
    let wronskian = g1 * dg2 - dg1 * g2;
    let expected = (-2.0 * gamma * t).exp();
    let scale = (g1 * dg2).abs().max((dg1 * g2).abs()).max(expected);
    if (wronskian - expected).abs() > 1e-8 * scale {
        return Err(QbdError::IntegrationFailure {
            t,
            reason: format!("Wronskian {wronskian} deviates from {expected}"),
        });
    }
    Ok(traj)
}

pub fn classical_fundamental_solutions(
    omega: &(impl Fn(f64) -> f64 + ?Sized),
    gamma: f64,
    t: f64,
) -> Result<FundamentalSolutions> {
    let [g1, dg1, g2, dg2] = fundamental_trajectory(omega, gamma, t)?.final_state();
    Ok(FundamentalSolutions { g1, dg1, g2, dg2 })
}

/// `(α, β, η)` from the two-time Green function.
///
/// `green(s)` returns `(G₂(t,s), ∂ₜG₂(t,s))`, the response at `t` to a unit
/// kick at `s`; `g2`, `dg2` are `G₂(t)`, `Ġ₂(t)`. The integrals are
/// `α = ∫u²/G₂²`, `β = ∫(G₂w − Ġ₂u)²/G₂²`, `η = ∫u(G₂w − Ġ₂u)/G₂²`.
pub fn decoherence_coefficients_quadrature(
    green: impl Fn(f64) -> (f64, f64),
    g2: f64,
    dg2: f64,
    t: f64,
) -> Result<(f64, f64, f64)> {
    if t == 0.0 {
        return Ok((0.0, 0.0, 0.0));
    }
    if g2 == 0.0 {
        return Err(QbdError::SingularForm {
            det: 0.0,
            at_time: Some(t),
        });
    }
    let inv = 1.0 / (g2 * g2);
    let [alpha, beta, eta] = integrate_vec(
        |s| {
            let (u, w) = green(s);
            let mixed = g2 * w - dg2 * u;
            [u * u * inv, mixed * mixed * inv, u * mixed * inv]
        },
        0.0,
        t,
        1e-10 * t,
        1e-12,
    )?;
    Ok((alpha, beta, eta))
}

/// Coefficients for an arbitrary frequency protocol `ω(t)`, via the ODE and the
/// two-time Green function `G₂(t,s) = e^{2γs}[G₁(s)G₂(t) − G₂(s)G₁(t)]`.
pub fn time_dependent_coefficients(
    bath: &BathParams,
    omega: &(impl Fn(f64) -> f64 + ?Sized),
    t: f64,
) -> Result<PropagatorCoefficients> {
    if t == 0.0 {
        return Ok(PropagatorCoefficients::identity());
    }
    let gamma = bath.gamma;
    let traj = fundamental_trajectory(omega, gamma, t)?;
    let [g1, dg1, g2, dg2] = traj.final_state();
    let (alpha, beta, eta) = decoherence_coefficients_quadrature(
        |s| {
            let [a1, _, a2, _] = traj.eval(s);
            let e = (2.0 * gamma * s).exp();
            (e * (a1 * g2 - a2 * g1), e * (a1 * dg2 - a2 * dg1))
        },
        g2,
        dg2,
        t,
    )?;
    Ok(PropagatorCoefficients {
        t,
        g1,
        dg1,
        g2,
        dg2,
        alpha,
        beta,
        eta,
        epsilon: epsilon(gamma),
    })
}

/// Constant-frequency oscillator; `omega0 = 0` takes the closed free path.
pub fn harmonic_coefficients(bath: &BathParams, omega0: f64, t: f64) -> Result<PropagatorCoefficients> {
    if omega0 == 0.0 {
        free_expansion_coefficients(bath, t)
    } else {
        time_dependent_coefficients(bath, &|_| omega0, t)
    }
}

/// The propagator as `exp(l − ½ ZᵀAZ)` with `Z = (x, y, x₀, y₀)`.
#[derive(Debug, Clone, Copy)]
pub struct InfluenceForm {
    pub log_prefactor: f64,
    /// Final-final block.
    pub xx: ComplexSym2,
    /// Final-initial block.
    pub x0: Mat2,
    /// Initial-initial block.
    pub zz: ComplexSym2,
}

pub fn influence_form(coeffs: &PropagatorCoefficients, bath: &BathParams) -> Result<InfluenceForm> {
    let PropagatorCoefficients {
        g1,
        dg1,
        g2,
        dg2,
        alpha,
        beta,
        eta,
        t,
        ..
    } = *coeffs;
    if g2 == 0.0 {
        return Err(QbdError::SingularForm {
            det: 0.0,
            at_time: Some(t),
        });
    }
    let (m, hbar, d) = (bath.mass, bath.hbar, bath.d);
    let kappa = m / (hbar * g2);
    let i = C64::new(0.0, 1.0);
    let z = C64::default();
    // Coordinates (r, q) = ((x+y)/2, x−y); Θ is bilinear in them, Γ only involves q.
    let xx = ComplexSym2::new(z, -i * kappa * dg2, C64::from(2.0 * d * beta));
    let zz = ComplexSym2::new(z, -i * kappa * g1, C64::from(2.0 * d * alpha));
    let x0 = Mat2([
        [z, i * kappa],
        [-i * (m / hbar * dg1 - kappa * dg2 * g1), C64::from(2.0 * d * eta)],
    ]);
    Ok(InfluenceForm {
        log_prefactor: (m / (2.0 * std::f64::consts::PI * hbar * g2.abs())).ln(),
        xx,
        x0,
        zz,
    })
}

/// Applies the propagator to one kernel.
pub fn propagate_kernel(kernel: &GaussianKernel, form: &InfluenceForm) -> Result<GaussianKernel> {
    let q = form.zz + kernel.quad_form;
    let log_int = log_gaussian_integral_2d(&q, kernel.linear)?;
    let qinv = q.inverse()?;
    let quad = form.xx - form.x0.congruence(&qinv);
    let w = form.x0.apply(qinv.apply(kernel.linear));
    Ok(GaussianKernel::new(
        kernel.log_prefactor + form.log_prefactor + log_int,
        quad,
        [-w[0], -w[1]],
    ))
}

/// `ρ(t) = ∫∫ J ρ(0)`, term by term.
pub fn propagate_state(
    state: &GaussianMixtureState,
    coeffs: &PropagatorCoefficients,
    bath: &BathParams,
) -> Result<GaussianMixtureState> {
    if !(coeffs.t >= 0.0) {
        return Err(QbdError::InvalidParameter(format!("t = {} must be >= 0", coeffs.t)));
    }
    if coeffs.t == 0.0 {
        return Ok(state.clone());
    }
    let form = influence_form(coeffs, bath).map_err(|e| with_time(e, coeffs.t))?;
    let terms = state
        .terms()
        .iter()
        .map(|k| propagate_kernel(k, &form))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| with_time(e, coeffs.t))?;
    Ok(GaussianMixtureState::new(terms))
}

pub(crate) fn with_time(err: QbdError, t: f64) -> QbdError {
    match err {
        QbdError::SingularForm { det, at_time: None } => QbdError::SingularForm {
            det,
            at_time: Some(t),
        },
        other => other,
    }
}

/// `b(t) = √(G₁² + (a²−c²)(ħ/m)² G₂² (1 + 4Dα/(a+c)))`.
pub fn scaling_factor(a: f64, c: f64, coeffs: &PropagatorCoefficients, bath: &BathParams) -> f64 {
    let hm = bath.hbar / bath.mass;
    let g2 = coeffs.g2;
    let b2 = coeffs.g1 * coeffs.g1
        + (a * a - c * c) * hm * hm * g2 * g2 * (1.0 + 4.0 * bath.d * coeffs.alpha / (a + c));
    b2.max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{evaluate_kernel, position_variance, trace_norm};
    use crate::quadrature::integrate;
    use std::f64::consts::PI;

    fn reference_bath() -> BathParams {
        BathParams::new(1e-3, 100.0).unwrap()
    }

    fn pure(sigma: f64) -> GaussianMixtureState {
        let a = 1.0 / (sigma * sigma);
        GaussianMixtureState::single(GaussianKernel::from_xy(
            C64::from((a / PI).sqrt().ln()),
            ComplexSym2::real(a, 0.0, a),
            [C64::from(0.0); 2],
        ))
    }

    #[test]
    fn derived_bath_quantities() {
        let b = reference_bath();
        assert!((b.temperature() - 5e4).abs() < 1e-9);
        assert!((b.thermal_wavelength_sq() * b.d - b.gamma).abs() < 1e-18);
        assert!((b.tau_beta() - 2e-5).abs() < 1e-18);
        assert!((b.tau_r() - 1e3).abs() < 1e-9);
        let c = BathParams::from_temperature(1e-3, 5e4, 1.0, 1.0).unwrap();
        assert!((c.d - 100.0).abs() < 1e-9);
    }

    #[test]
    fn undamped_free_limits() {
        let bath = BathParams::new(0.0, 1.0).unwrap();
        for &t in &[1e-4, 0.3, 7.0] {
            let c = free_expansion_coefficients(&bath, t).unwrap();
            assert_eq!(c.epsilon, 0);
            assert!((c.g2 - t).abs() < 1e-15 * t);
            assert!((c.alpha - t / 3.0).abs() < 1e-12 * t);
            assert!((c.beta - t / 3.0).abs() < 1e-12 * t);
            assert!((c.eta - t / 6.0).abs() < 1e-10 * t);
        }
    }

    #[test]
    fn small_gamma_t_series_matches_limits() {
        let bath = reference_bath();
        let t = 1e-5;
        let c = free_expansion_coefficients(&bath, t).unwrap();
        assert_eq!(c.epsilon, 1);
        assert!((c.alpha / (t / 3.0) - 1.0).abs() < 1e-6);
        assert!((c.beta / (t / 3.0) - 1.0).abs() < 1e-6);
        assert!((c.eta / (t / 6.0) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn series_and_closed_forms_agree_at_switch() {
        let bath = BathParams::new(1.0, 1.0).unwrap();
        let lo = free_expansion_coefficients(&bath, 1.0 - 1e-12).unwrap();
        let hi = free_expansion_coefficients(&bath, 1.0 + 1e-12).unwrap();
        assert!((lo.alpha / hi.alpha - 1.0).abs() < 1e-10);
        assert!((lo.beta / hi.beta - 1.0).abs() < 1e-10);
    }

    #[test]
    fn closed_forms_match_quadrature() {
        let bath = BathParams::new(0.7, 1.0).unwrap();
        for &t in &[0.05, 0.9, 1.3, 6.0] {
            let c = free_expansion_coefficients(&bath, t).unwrap();
            let (alpha, beta, eta) = decoherence_coefficients_quadrature(
                |s| (free_g2(0.7, t - s), (-1.4 * (t - s)).exp()),
                c.g2,
                c.dg2,
                t,
            )
            .unwrap();
            assert!((alpha / c.alpha - 1.0).abs() < 1e-10, "t={t}");
            assert!((beta / c.beta - 1.0).abs() < 1e-10, "t={t}");
            assert!((eta / c.eta - 1.0).abs() < 1e-10, "t={t}");
        }
    }

    #[test]
    fn long_time_limits() {
        let gamma = 1e-3;
        let bath = BathParams::new(gamma, 100.0).unwrap();
        let t = 5.0 / gamma;
        let c = free_expansion_coefficients(&bath, t).unwrap();
        let within = |v: f64, lim: f64| (v / lim - 1.0).abs() < 0.02;
        assert!(within(c.g2, 0.5 / gamma));
        assert!(within(c.beta, 0.25 / gamma));
        assert!(within(c.eta, 0.25 / gamma));
        // α → t with an O(1/γ) offset: check the slope instead.
        let c2 = free_expansion_coefficients(&bath, 2.0 * t).unwrap();
        assert!(within(c2.alpha - c.alpha, t));
    }

    #[test]
    fn ode_fundamental_solutions() {
        let free = classical_fundamental_solutions(&|_| 0.0, 0.0, 2.5).unwrap();
        assert!((free.g1 - 1.0).abs() < 1e-12 && (free.g2 - 2.5).abs() < 1e-10);
        let w0 = 1.7;
        let t = 2.3;
        let ho = classical_fundamental_solutions(&|_| w0, 0.0, t).unwrap();
        assert!((ho.g1 - (w0 * t).cos()).abs() < 1e-8);
        assert!((ho.g2 - (w0 * t).sin() / w0).abs() < 1e-8);
        let damped = classical_fundamental_solutions(&|_| 0.0, 0.4, t).unwrap();
        assert!((damped.g2 - free_g2(0.4, t)).abs() < 1e-9);
        assert!((damped.dg2 - (-0.8 * t).exp()).abs() < 1e-9);
    }

    #[test]
    fn time_dependent_path_reduces_to_free() {
        let bath = BathParams::new(0.3, 2.0).unwrap();
        let t = 1.7;
        let a = free_expansion_coefficients(&bath, t).unwrap();
        let b = time_dependent_coefficients(&bath, &|_| 0.0, t).unwrap();
        for (x, y) in [(a.g2, b.g2), (a.alpha, b.alpha), (a.beta, b.beta), (a.eta, b.eta)] {
            assert!((x / y - 1.0).abs() < 1e-8, "{x} vs {y}");
        }
    }

    #[test]
    fn identity_at_zero_time() {
        let s = pure(1.3);
        let out = propagate_state(&s, &PropagatorCoefficients::identity(), &reference_bath()).unwrap();
        assert_eq!(out, s);
    }

    #[test]
    fn unitary_scaling_solution() {
        // D = γ = 0: ρ(x,y;t) = b⁻¹ e^{i(mḃ/2ħb)(x²−y²)} ψ(x/b) ψ*(y/b), b = √(1 + t²/σ⁴).
        let bath = BathParams::new(0.0, 0.0).unwrap();
        let sigma = 1.0;
        let t = 0.8;
        let c = free_expansion_coefficients(&bath, t).unwrap();
        let out = propagate_state(&pure(sigma), &c, &bath).unwrap();
        let b = (1.0 + t * t).sqrt();
        let db = t / b;
        let psi = |x: f64| (PI).powf(-0.25) * (-x * x / 2.0).exp();
        for &(x, y) in &[(0.0, 0.0), (0.4, -0.3), (1.2, 0.7), (-0.9, 1.5)] {
            let phase = C64::new(0.0, db / (2.0 * b) * (x * x - y * y)).exp();
            let expected = phase * psi(x / b) * psi(y / b) / b;
            let got = evaluate_kernel(&out, x, y);
            assert!((got - expected).norm() < 1e-12, "({x},{y}) {got} vs {expected}");
        }
    }

    #[test]
    fn trace_and_variance_follow_scaling_factor() {
        let bath = reference_bath();
        let (a, c) = (2.0, 0.5);
        let state = GaussianMixtureState::single(GaussianKernel::from_xy(
            C64::from(((a - c) / PI).sqrt().ln()),
            ComplexSym2::real(a, -c, a),
            [C64::from(0.0); 2],
        ));
        for &t in &[1e-3, 0.1, 3.0, 300.0] {
            let co = free_expansion_coefficients(&bath, t).unwrap();
            let out = propagate_state(&state, &co, &bath).unwrap();
            assert!((trace_norm(&out).unwrap() - 1.0).abs() < 1e-9);
            let b = scaling_factor(a, c, &co, &bath);
            let var = position_variance(&out).unwrap();
            assert!((var / (b * b / (2.0 * (a - c))) - 1.0).abs() < 1e-9, "t={t}");
        }
    }

    #[test]
    fn scaling_factor_limits() {
        let t = 0.6;
        let unitary = BathParams::new(0.0, 0.0).unwrap();
        let c = free_expansion_coefficients(&unitary, t).unwrap();
        assert!((scaling_factor(1.0, 0.0, &c, &unitary) - (1.0 + t * t).sqrt()).abs() < 1e-14);
        let dephasing = BathParams::new(0.0, 5.0).unwrap();
        let c = free_expansion_coefficients(&dephasing, t).unwrap();
        let tau_d = 1.0 / dephasing.d;
        let expected = (1.0 + t * t * (1.0 + 4.0 * t / (3.0 * tau_d))).sqrt();
        assert!((scaling_factor(1.0, 0.0, &c, &dephasing) - expected).abs() < 1e-12);
    }

    #[test]
    fn harmonic_propagation_preserves_ground_state() {
        // Without a bath the oscillator ground state is stationary.
        let bath = BathParams::new(0.0, 0.0).unwrap();
        let w0 = 1.0;
        let state = pure(1.0);
        let co = harmonic_coefficients(&bath, w0, 1.1).unwrap();
        let out = propagate_state(&state, &co, &bath).unwrap();
        for &(x, y) in &[(0.0, 0.0), (0.5, -0.2), (1.1, 0.9)] {
            let d = evaluate_kernel(&out, x, y) - evaluate_kernel(&state, x, y);
            assert!(d.norm() < 1e-7, "({x},{y}) {d}");
        }
    }

    #[test]
    fn pure_dephasing_kernel_by_quadrature() {
        // With γ = 0 the propagator is a convolution; check one point by direct 2-D quadrature.
        let bath = BathParams::new(0.0, 0.7).unwrap();
        let t = 0.4;
        let co = free_expansion_coefficients(&bath, t).unwrap();
        let state = pure(1.0);
        let out = propagate_state(&state, &co, &bath).unwrap();
        let (x, y) = (0.3, -0.5);
        let k0 = state.terms()[0];
        let (m, hbar, d) = (bath.mass, bath.hbar, bath.d);
        let kappa = m / (hbar * co.g2);
        let (r, q) = ((x + y) / 2.0, x - y);
        let integrand = |x0: f64, y0: f64| {
            let (r0, q0) = ((x0 + y0) / 2.0, x0 - y0);
            let theta = kappa * (co.dg2 * q - q0) * (r - co.g1 * r0) + m / hbar * co.dg1 * q * r0;
            let gamma = d * (co.alpha * q0 * q0 + co.beta * q * q + 2.0 * co.eta * q * q0);
            let j = m / (2.0 * PI * hbar * co.g2.abs()) * C64::new(-gamma, theta).exp();
            j * k0.eval(x0, y0)
        };
        let re = integrate(
            |x0| integrate(|y0| integrand(x0, y0).re, -9.0, 9.0, 1e-13, 1e-11).unwrap(),
            -9.0,
            9.0,
            1e-12,
            1e-10,
        )
        .unwrap();
        let im = integrate(
            |x0| integrate(|y0| integrand(x0, y0).im, -9.0, 9.0, 1e-13, 1e-11).unwrap(),
            -9.0,
            9.0,
            1e-12,
            1e-10,
        )
        .unwrap();
        let got = evaluate_kernel(&out, x, y);
        assert!((got - C64::new(re, im)).norm() < 1e-8, "{got} vs {re}+{im}i");
    }
}
