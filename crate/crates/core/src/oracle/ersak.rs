//! Memory term of the composition law `S(t) = S(t−t′)S(t′) + M(t,t′)`, built
//! from the Hilbert–Schmidt projector `P₀A = (tr[ρ₀A]/tr[ρ₀²])ρ₀` rather than
//! from the law itself.

use crate::error::{QbdError, Result};
use crate::gaussian::{hs_overlap, purity, GaussianMixtureState, C64};
use crate::propagator::{free_expansion_coefficients, propagate_state, BathParams};
use crate::survival::relative_purity;

/// `M(t,t′) = Tr{P₀ V(t−t′)[Q₀ V(t′)ρ₀]}` under free damped evolution, with
/// `Q₀ = 1 − P₀` applied as a two-branch mixture `ρ′ − S(t′)ρ₀`.
pub fn ersak_memory_term(
    state0: &GaussianMixtureState,
    bath: &BathParams,
    t: f64,
    t_prime: f64,
) -> Result<f64> {
    if !(0.0 <= t_prime && t_prime <= t) {
        return Err(QbdError::InvalidParameter(format!(
            "need 0 <= t' <= t, got t = {t}, t' = {t_prime}"
        )));
    }
    let evolved = propagate_state(state0, &free_expansion_coefficients(bath, t_prime)?, bath)?;
    let s_prime = relative_purity(state0, &evolved)?;
    let remainder = evolved.plus(&state0.scaled(C64::from(-s_prime)));
    let carried = propagate_state(&remainder, &free_expansion_coefficients(bath, t - t_prime)?, bath)?;
    let projected = hs_overlap(state0, &carried)? / purity(state0)?;
    Ok(projected.re)
}
