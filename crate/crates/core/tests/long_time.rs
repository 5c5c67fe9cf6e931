use qbd_core::gaussian::momentum_variance;
use qbd_core::states::{make_cat_state, make_gaussian};
use qbd_core::survival::{asymptote_intermediate, asymptote_overdamped, asymptote_overdamped_state, mixture_survival};
use qbd_core::{evaluate_kernel, free_expansion_coefficients, propagate_state, survival_probability, BathParams};

fn reference_bath() -> BathParams {
    BathParams::new(1e-3, 100.0).unwrap()
}

fn closed_form(t: f64) -> f64 {
    let bath = reference_bath();
    survival_probability(1.0, 0.0, &bath, &free_expansion_coefficients(&bath, t).unwrap()).unwrap()
}

#[test]
fn intermediate_asymptote_at_ten() {
    let t = 10.0;
    let ratio = closed_form(t) / asymptote_intermediate(&reference_bath(), t);
    assert!((ratio - 1.0).abs() < 0.15, "{ratio}");
}

#[test]
fn overdamped_asymptote_at_late_time() {
    let t = 1e6;
    let ratio = closed_form(t) / asymptote_overdamped(1.0, 0.0, &reference_bath(), t).unwrap();
    assert!((ratio - 1.0).abs() < 0.10, "{ratio}");
}

#[test]
fn cat_state_shares_the_late_asymptote() {
    let bath = reference_bath();
    let gauss = make_gaussian(1.0).unwrap();
    let cat = make_cat_state(1.0, 7.0).unwrap();
    for t in [1e6, 1e7] {
        let co = free_expansion_coefficients(&bath, t).unwrap();
        let s_cat = mixture_survival(&cat, &bath, &co).unwrap();
        let reference = asymptote_overdamped_state(&gauss, &bath, t).unwrap();
        assert!((s_cat / reference - 1.0).abs() < 0.10, "t = {t}: {s_cat} vs {reference}");
    }
}

/// The momentum distribution thermalizes to `⟨p²⟩ = m kT`, which fixes the
/// coherence length: `ρ(x₀+δ, x₀−δ) ∝ exp(−⟨p²⟩(2δ)²/2ħ²) = exp(−δ²/λ_β²)`.
#[test]
fn off_diagonal_width_thermalizes() {
    let bath = reference_bath();
    let t = 50.0 * bath.tau_r();
    let evolved = propagate_state(&make_gaussian(1.0).unwrap(), &free_expansion_coefficients(&bath, t).unwrap(), &bath)
        .unwrap();
    let kt = bath.temperature();
    let p2 = momentum_variance(&evolved, bath.hbar).unwrap();
    assert!((p2 / (bath.mass * kt) - 1.0).abs() < 0.05, "{p2} vs {}", bath.mass * kt);

    let x0 = 3.0;
    let log_abs = |delta: f64| evaluate_kernel(&evolved, x0 + delta, x0 - delta).norm().ln();
    let delta = 0.5 * bath.thermal_wavelength_sq().sqrt();
    let decay = (log_abs(0.0) - log_abs(delta)) / (delta * delta);
    let expected = 1.0 / bath.thermal_wavelength_sq();
    assert!((decay / expected - 1.0).abs() < 0.05, "{decay} vs {expected}");
}
