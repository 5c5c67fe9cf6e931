//! Initial states as Gaussian mixtures.

use std::f64::consts::PI;

use crate::error::{QbdError, Result};
use crate::gaussian::{ComplexSym2, GaussianKernel, GaussianMixtureState, C64};

/// Kernels whose forms agree to this tolerance are merged.
pub const MERGE_TOLERANCE: f64 = 1e-12;

fn check_ac(a: f64, c: f64) -> Result<()> {
    if a > c.abs() && a.is_finite() && c.is_finite() {
        Ok(())
    } else {
        Err(QbdError::NonNormalizable {
            context: format!("Gaussian state needs a > |c|, got a = {a}, c = {c}"),
        })
    }
}

fn ac_form(a: f64, c: f64) -> ComplexSym2 {
    ComplexSym2::real(a, -c, a)
}

/// `√(1/πσ²) exp[−(x² + y²)/2σ²]`.
pub fn make_gaussian(sigma: f64) -> Result<GaussianMixtureState> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(QbdError::InvalidParameter(format!("sigma = {sigma} must be positive")));
    }
    make_gaussian_ac(1.0 / (sigma * sigma), 0.0)
}

/// `N₀ exp[−½(a x² + a y² − 2c x y)]` with `N₀ = √((a−c)/π)`.
///
/// Only `0 ≤ c < a` gives a positive operator; `−a < c < 0` is accepted as a
/// normalizable Hermitian kernel but its "purity" exceeds one.
pub fn make_gaussian_ac(a: f64, c: f64) -> Result<GaussianMixtureState> {
    make_displaced_gaussian(a, c, 0.0)
}

/// The `(a, c)` Gaussian translated to mean position `b`.
pub fn make_displaced_gaussian(a: f64, c: f64, b: f64) -> Result<GaussianMixtureState> {
    check_ac(a, c)?;
    let log_norm = ((a - c) / PI).sqrt().ln();
    let shift = (a - c) * b;
    Ok(GaussianMixtureState::single(GaussianKernel::from_xy(
        C64::from(log_norm - (a - c) * b * b),
        ac_form(a, c),
        [C64::from(shift), C64::from(shift)],
    )))
}

/// Stationary state with position spread `σ_x` and momentum spread `σ_p`:
/// `a = σ_p²/ħ² + 1/4σ_x²`, `c = σ_p²/ħ² − 1/4σ_x²`.
pub fn make_stationary_state(sigma_x: f64, sigma_p: f64, hbar: f64) -> Result<GaussianMixtureState> {
    let p = sigma_p * sigma_p / (hbar * hbar);
    let q = 0.25 / (sigma_x * sigma_x);
    make_gaussian_ac(p + q, p - q)
}

/// `ψ(x) ∝ e^{−(x−r)²/2σ²} + e^{−(x+r)²/2σ²}`; four kernels, merged when `r = 0`.
pub fn make_cat_state(sigma: f64, r: f64) -> Result<GaussianMixtureState> {
    if !(sigma > 0.0 && r >= 0.0 && r.is_finite()) {
        return Err(QbdError::InvalidParameter(format!(
            "cat state needs sigma > 0 and r >= 0, got sigma = {sigma}, r = {r}"
        )));
    }
    let s2 = sigma * sigma;
    let ratio = r * r / s2;
    let log_n2 = -(2.0 * (PI * s2).sqrt() * (1.0 + (-ratio).exp())).ln();
    let a = 1.0 / s2;
    let mut terms = Vec::with_capacity(4);
    for sx in [1.0, -1.0] {
        for sy in [1.0, -1.0] {
            terms.push(GaussianKernel::from_xy(
                C64::from(log_n2 - ratio),
                ac_form(a, 0.0),
                [C64::from(sx * r / s2), C64::from(sy * r / s2)],
            ));
        }
    }
    Ok(GaussianMixtureState::new(terms).merged(MERGE_TOLERANCE))
}

/// `Δx²` of the cat state, `σ²/2 + r²/(1 + e^{−r²/σ²})`.
pub fn cat_state_variance(sigma: f64, r: f64) -> f64 {
    0.5 * sigma * sigma + r * r / (1.0 + (-(r * r) / (sigma * sigma)).exp())
}

/// `(a, c)` of the Mehler kernel `Σ uⁿ ψₙ(x)ψₙ(y)` of an oscillator with
/// length `ξ₀ = √(ħ/mω₀)`.
pub fn mehler_coefficients(u: f64, omega0: f64, hbar: f64, mass: f64) -> (f64, f64) {
    let inv_xi2 = mass * omega0 / hbar;
    let denom = 1.0 - u * u;
    (inv_xi2 * (1.0 + u * u) / denom, inv_xi2 * 2.0 * u / denom)
}

/// Mehler kernel; with `u = e^{−βħω₀}` the canonical thermal state. Unnormalized,
/// its trace is the partition function `1/(1 − u)`.
pub fn make_mehler_thermal(
    u: f64,
    omega0: f64,
    hbar: f64,
    mass: f64,
    normalized: bool,
) -> Result<GaussianMixtureState> {
    if !((0.0..1.0).contains(&u) && omega0 > 0.0) {
        return Err(QbdError::InvalidParameter(format!(
            "Mehler kernel needs 0 <= u < 1 and omega0 > 0, got u = {u}, omega0 = {omega0}"
        )));
    }
    let (a, c) = mehler_coefficients(u, omega0, hbar, mass);
    let state = make_gaussian_ac(a, c)?;
    if normalized {
        Ok(state)
    } else {
        Ok(state.scaled(C64::from(1.0 / (1.0 - u))))
    }
}

/// `u = e^{−βħω₀}` for inverse temperature `β`.
pub fn thermal_u(beta: f64, hbar: f64, omega0: f64) -> f64 {
    (-beta * hbar * omega0).exp()
}
