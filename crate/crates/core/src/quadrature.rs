//! Adaptive Gauss–Kronrod (G7/K15) quadrature for vector-valued integrands.
//!
//! All components share one subdivision; an interval is split until every
//! component's error estimate fits the budget.

use crate::error::{QbdError, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];

// Gauss weights for the odd-indexed Kronrod nodes 1, 3, 5, 7.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_INTERVALS: usize = 2000;

#[derive(Debug, Clone, Copy)]
struct Segment<const N: usize> {
    a: f64,
    b: f64,
    value: [f64; N],
    error: [f64; N],
}

fn gk15<const N: usize>(f: &mut impl FnMut(f64) -> [f64; N], a: f64, b: f64) -> Segment<N> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = [0.0; N];
    let mut gauss = [0.0; N];
    for k in 0..N {
        kronrod[k] = WGK[7] * fc[k];
        gauss[k] = WG[3] * fc[k];
    }
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        for k in 0..N {
            let s = f1[k] + f2[k];
            kronrod[k] += WGK[j] * s;
            if j % 2 == 1 {
                gauss[k] += WG[j / 2] * s;
            }
        }
    }
    let mut value = [0.0; N];
    let mut error = [0.0; N];
    for k in 0..N {
        value[k] = kronrod[k] * half;
        error[k] = ((kronrod[k] - gauss[k]) * half).abs();
    }
    Segment { a, b, value, error }
}

/// `∫ₐᵇ f` componentwise to `|err_k| ≤ max(abs_tol, rel_tol·|I_k|)`.
pub fn integrate_vec<const N: usize>(
    mut f: impl FnMut(f64) -> [f64; N],
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<[f64; N]> {
    if a == b {
        return Ok([0.0; N]);
    }
    let mut segments = vec![gk15(&mut f, a, b)];
    loop {
        let mut total = [0.0; N];
        let mut err = [0.0; N];
        for s in &segments {
            for k in 0..N {
                total[k] += s.value[k];
                err[k] += s.error[k];
            }
        }
        let done = (0..N).all(|k| err[k] <= abs_tol.max(rel_tol * total[k].abs()));
        if done {
            return Ok(total);
        }
        if segments.len() >= MAX_INTERVALS {
            return Err(QbdError::IntegrationFailure {
                t: b,
                reason: format!("quadrature did not converge on [{a}, {b}]; error {err:?}"),
            });
        }
        // Split the segment with the worst error relative to the per-component budget.
        let worst = segments
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let score = (0..N)
                    .map(|k| s.error[k] / abs_tol.max(rel_tol * total[k].abs()))
                    .fold(0.0, f64::max);
                (i, score)
            })
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let s = segments.swap_remove(worst);
        let mid = 0.5 * (s.a + s.b);
        segments.push(gk15(&mut f, s.a, mid));
        segments.push(gk15(&mut f, mid, s.b));
    }
}

pub fn integrate(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<f64> {
    integrate_vec(|x| [f(x)], a, b, abs_tol, rel_tol).map(|[v]| v)
}
