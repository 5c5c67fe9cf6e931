//! Exact dynamics of Gaussian-class states under the Caldeira–Leggett master
//! equation: the influence-functional propagator acting on Gaussian mixtures,
//! closed-form survival probabilities, decoherence times, regime asymptotes and
//! bath-parameter fits, plus independent oracles to check them.

pub mod error;
pub mod gaussian;
pub mod ode;
pub mod oracle;
pub mod propagator;
pub mod quadrature;
pub mod states;
pub mod survival;

pub use error::{QbdError, Result};
pub use gaussian::{
    evaluate_kernel, gaussian_integral_2d, hs_overlap, position_variance, purity, trace_norm,
    BranchTracker, ComplexSym2, GaussianKernel, GaussianMixtureState, C64,
};
pub use propagator::{
    free_expansion_coefficients, propagate_state, scaling_factor, BathParams,
    PropagatorCoefficients,
};
pub use survival::{
    decoherence_time, estimate_bath_parameters, regime_classify, survival_probability, Regime,
    RegimeEstimate, SurvivalCurve,
};
