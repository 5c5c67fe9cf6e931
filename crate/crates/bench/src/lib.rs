//! Shared fixtures for the benchmarks.

use qbd_core::{states::make_gaussian, survival::log_spaced, BathParams, GaussianMixtureState};

/// γ = 1e−3, D = 100 in units ħ = m = σ = 1.
pub fn reference_bath() -> BathParams {
    BathParams::new(1e-3, 100.0).expect("valid bath")
}

pub fn reference_state() -> GaussianMixtureState {
    make_gaussian(1.0).expect("valid width")
}

/// The figure sweep: 200 log-spaced times over ten decades.
pub fn reference_times() -> Vec<f64> {
    log_spaced(1e-3, 1e7, 200)
}
