//! Dormand–Prince 5(4) with step-size control and the standard fourth-order
//! continuous extension, so solutions can be sampled anywhere on the span.

use crate::error::{QbdError, Result};

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];

const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const DENSE: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Upper bound on the step; useful when the right-hand side has kinks.
    pub max_step: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-14,
            max_steps: 1_000_000,
            max_step: f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone)]
struct Step<const N: usize> {
    t0: f64,
    h: f64,
    coeffs: [[f64; N]; 5],
}

impl<const N: usize> Step<N> {
    fn eval(&self, t: f64) -> [f64; N] {
        let theta = (t - self.t0) / self.h;
        let theta1 = 1.0 - theta;
        let r = &self.coeffs;
        std::array::from_fn(|i| {
            r[0][i] + theta * (r[1][i] + theta1 * (r[2][i] + theta * (r[3][i] + theta1 * r[4][i])))
        })
    }
}

/// Accepted steps of one integration, each with its interpolant.
#[derive(Debug, Clone)]
pub struct Trajectory<const N: usize> {
    t0: f64,
    y0: [f64; N],
    steps: Vec<Step<N>>,
    t_end: f64,
    y_end: [f64; N],
}

impl<const N: usize> Trajectory<N> {
    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn final_state(&self) -> [f64; N] {
        self.y_end
    }

    pub fn steps(&self) -> usize {
        self.steps.len()
    }

    /// Dense-output value at `t`, clamped to the integrated span.
    pub fn eval(&self, t: f64) -> [f64; N] {
        if self.steps.is_empty() || t <= self.t0 {
            return self.y0;
        }
        if t >= self.t_end {
            return self.y_end;
        }
        let idx = self
            .steps
            .partition_point(|s| s.t0 + s.h <= t)
            .min(self.steps.len() - 1);
        self.steps[idx].eval(t)
    }
}

fn error_norm<const N: usize>(err: &[f64; N], y0: &[f64; N], y1: &[f64; N], o: &OdeOptions) -> f64 {
    let sum: f64 = (0..N)
        .map(|i| {
            let sc = o.atol + o.rtol * y0[i].abs().max(y1[i].abs());
            (err[i] / sc).powi(2)
        })
        .sum();
    (sum / N as f64).sqrt()
}

/// Integrates `y' = f(t, y)` from `t0` to `t_end > t0`.
pub fn solve<const N: usize>(
    mut f: impl FnMut(f64, &[f64; N]) -> [f64; N],
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    opts: &OdeOptions,
) -> Result<Trajectory<N>> {
    let mut traj = Trajectory {
        t0,
        y0,
        steps: Vec::new(),
        t_end: t0,
        y_end: y0,
    };
    if t_end <= t0 {
        return Ok(traj);
    }
    let span = t_end - t0;
    let mut t = t0;
    let mut y = y0;
    let mut k: [[f64; N]; 7] = [[0.0; N]; 7];
    k[0] = f(t, &y);
    let mut h = (1e-3 * span).min(opts.max_step);
    let mut fac_old: f64 = 1e-4;
    for _ in 0..opts.max_steps {
        if t >= t_end {
            traj.t_end = t_end;
            traj.y_end = y;
            return Ok(traj);
        }
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }
        for s in 1..7 {
            let ys: [f64; N] = std::array::from_fn(|i| {
                y[i] + h * (0..s).map(|j| A[s][j] * k[j][i]).sum::<f64>()
            });
            k[s] = f(t + C[s] * h, &ys);
        }
        // Row 6 of A holds the fifth-order weights (FSAL).
        let y1: [f64; N] = std::array::from_fn(|i| {
            y[i] + h * (0..6).map(|j| A[6][j] * k[j][i]).sum::<f64>()
        });
        let err: [f64; N] = std::array::from_fn(|i| h * (0..7).map(|j| E[j] * k[j][i]).sum::<f64>());
        let en = error_norm(&err, &y, &y1, opts);
        if !en.is_finite() {
            return Err(QbdError::IntegrationFailure {
                t,
                reason: "non-finite error estimate".into(),
            });
        }
        // PI step-size controller.
        let fac = en.powf(0.17) / fac_old.powf(0.04) / 0.9;
        if en <= 1.0 {
            let dense: [f64; N] = std::array::from_fn(|i| h * (0..7).map(|j| DENSE[j] * k[j][i]).sum::<f64>());
            let r1: [f64; N] = std::array::from_fn(|i| y1[i] - y[i]);
            let r2: [f64; N] = std::array::from_fn(|i| h * k[0][i] - r1[i]);
            k[0] = f(t + h, &y1);
            let r3: [f64; N] = std::array::from_fn(|i| r1[i] - h * k[0][i] - r2[i]);
            traj.steps.push(Step {
                t0: t,
                h,
                coeffs: [y, r1, r2, r3, dense],
            });
            fac_old = en.max(1e-4);
            t = if last { t_end } else { t + h };
            y = y1;
            h = (h / fac.clamp(0.1, 5.0)).min(opts.max_step);
        } else {
            h /= (en.powf(0.2) / 0.9).min(10.0);
        }
        if h < 1e-14 * span.max(t.abs()) {
            return Err(QbdError::IntegrationFailure {
                t,
                reason: format!("step size underflow (h = {h:e})"),
            });
        }
    }
    Err(QbdError::IntegrationFailure {
        t,
        reason: format!("exceeded {} steps", opts.max_steps),
    })
}
