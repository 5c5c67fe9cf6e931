//! Direct integration of the master equation on a periodic `N × N` grid in
//! `(x, y)`, independent of the propagator algebra.
//!
//! One Strang step of length `h`:
//! half-step of decoherence and potential (pointwise), kinetic rotation
//! `exp(−i(ħ/2m)(k_x² − k_y²)h)` in Fourier space, an explicit damping update
//! `ρ −= hγ(x−y)(∂_x − ∂_y)ρ` with spectral derivatives, then the second half-step.

use std::io::{Read, Write};
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{QbdError, Result};
use crate::gaussian::{
    evaluate_kernel, momentum_variance, position_variance, GaussianMixtureState, C64,
};
use crate::propagator::{free_expansion_coefficients, propagate_state, BathParams};

/// `ρ(x_i, y_j)` at `x_i = −L + i·2L/N`, row-major in `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridState {
    pub n: usize,
    pub l: f64,
    pub t: f64,
    pub values: Vec<C64>,
}

impl GridState {
    pub fn zeros(n: usize, l: f64) -> Result<Self> {
        if !n.is_power_of_two() || n < 4 {
            return Err(QbdError::InvalidParameter(format!("grid size {n} must be a power of two >= 4")));
        }
        if !(l > 0.0) {
            return Err(QbdError::InvalidParameter(format!("half-width {l} must be positive")));
        }
        Ok(Self {
            n,
            l,
            t: 0.0,
            values: vec![C64::default(); n * n],
        })
    }

    pub fn from_state(state: &GaussianMixtureState, n: usize, l: f64) -> Result<Self> {
        let mut g = Self::zeros(n, l)?;
        let xs = g.coordinates();
        g.values
            .par_chunks_mut(n)
            .zip(xs.par_iter())
            .for_each(|(row, &x)| {
                for (v, &y) in row.iter_mut().zip(&xs) {
                    *v = evaluate_kernel(state, x, y);
                }
            });
        Ok(g)
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.l / self.n as f64
    }

    pub fn coordinates(&self) -> Vec<f64> {
        let dx = self.dx();
        (0..self.n).map(|i| -self.l + i as f64 * dx).collect()
    }

    pub fn at(&self, i: usize, j: usize) -> C64 {
        self.values[i * self.n + j]
    }

    /// `Δx Σᵢ ρ(xᵢ, xᵢ)`.
    pub fn trace(&self) -> C64 {
        (0..self.n).map(|i| self.at(i, i)).sum::<C64>() * self.dx()
    }

    /// `Δx² Σᵢⱼ A(xᵢ, yⱼ) B(yⱼ, xᵢ)`.
    pub fn hs_overlap(&self, other: &GridState) -> Result<C64> {
        if self.n != other.n || self.l != other.l {
            return Err(QbdError::InvalidParameter("grids differ in size or extent".into()));
        }
        let n = self.n;
        let sum: C64 = (0..n)
            .into_par_iter()
            .map(|i| (0..n).map(|j| self.at(i, j) * other.at(j, i)).sum::<C64>())
            .sum();
        Ok(sum * self.dx() * self.dx())
    }

    /// `max |ρ(x,y) − ρ(y,x)*|` relative to `max |ρ|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.n;
        let peak = self.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.at(i, j) - self.at(j, i).conj()).norm());
            }
        }
        worst / peak.max(1e-300)
    }

    /// Diagonal mass within the outermost `n/32` points on each side.
    pub fn edge_mass(&self) -> f64 {
        let band = (self.n / 32).max(1);
        let dx = self.dx();
        (0..band)
            .chain(self.n - band..self.n)
            .map(|i| self.at(i, i).norm() * dx)
            .sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt() * self.dx()
    }

    /// Writes the little-endian snapshot: magic `QBDG`, version, `N`, `L`, `t`,
    /// then `N²` pairs `(re, im)`.
    pub fn write_snapshot(&self, mut w: impl Write) -> std::io::Result<()> {
        let mut buf = Vec::with_capacity(28 + 16 * self.values.len());
        buf.extend_from_slice(SNAPSHOT_MAGIC);
        buf.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.n as u32).to_le_bytes());
        buf.extend_from_slice(&self.l.to_le_bytes());
        buf.extend_from_slice(&self.t.to_le_bytes());
        for v in &self.values {
            buf.extend_from_slice(&v.re.to_le_bytes());
            buf.extend_from_slice(&v.im.to_le_bytes());
        }
        w.write_all(&buf)
    }

    pub fn read_snapshot(mut r: impl Read) -> Result<Self> {
        let io = |e: std::io::Error| QbdError::Snapshot(e.to_string());
        let mut head = [0u8; 28];
        r.read_exact(&mut head).map_err(io)?;
        if &head[0..4] != SNAPSHOT_MAGIC {
            return Err(QbdError::Snapshot("bad magic".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(head[o..o + 4].try_into().expect("4 bytes"));
        let f64_at = |o: usize| f64::from_le_bytes(head[o..o + 8].try_into().expect("8 bytes"));
        let version = u32_at(4);
        if version != SNAPSHOT_VERSION {
            return Err(QbdError::Snapshot(format!("unsupported version {version}")));
        }
        let n = u32_at(8) as usize;
        let mut g = Self::zeros(n, f64_at(12)).map_err(|e| QbdError::Snapshot(e.to_string()))?;
        g.t = f64_at(20);
        let mut body = vec![0u8; 16 * n * n];
        r.read_exact(&mut body).map_err(io)?;
        for (v, chunk) in g.values.iter_mut().zip(body.chunks_exact(16)) {
            let re = f64::from_le_bytes(chunk[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(chunk[8..].try_into().expect("8 bytes"));
            *v = C64::new(re, im);
        }
        Ok(g)
    }
}

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"QBDG";
pub const SNAPSHOT_VERSION: u32 = 1;

/// Domain and step for a run up to `t_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    pub n: usize,
    pub l: f64,
    pub dt: f64,
    /// Largest tolerated [`GridState::edge_mass`].
    pub leak_threshold: f64,
}

pub const DEFAULT_LEAK_THRESHOLD: f64 = 1e-5;

impl GridConfig {
    /// Sizes the domain so that position and momentum spreads, at the larger of
    /// `t = 0` and `t = t_max`, are covered by the same number of standard
    /// deviations: `L = √(πNΔx/(2Δp))`.
    pub fn auto(state: &GaussianMixtureState, bath: &BathParams, t_max: f64, n: usize) -> Result<Self> {
        let end = propagate_state(state, &free_expansion_coefficients(bath, t_max)?, bath)?;
        let dx_max = position_variance(state)?.max(position_variance(&end)?).sqrt();
        let dp_max = momentum_variance(state, bath.hbar)?
            .max(momentum_variance(&end, bath.hbar)?)
            .sqrt();
        let l = (std::f64::consts::PI * n as f64 * dx_max / (2.0 * dp_max)).sqrt();
        let spacing = 2.0 * l / n as f64;
        let mut dt = 0.25 * bath.mass * spacing * spacing / bath.hbar;
        if bath.gamma > 0.0 {
            dt = dt.min(0.01 / bath.gamma);
        }
        if bath.d > 0.0 {
            // A twentieth of the pure-state decoherence time of the initial spread.
            let tau = 1.0 / (2.0 * bath.d * position_variance(state)?);
            dt = dt.min(0.05 * tau);
        }
        Ok(Self {
            n,
            l,
            dt,
            leak_threshold: DEFAULT_LEAK_THRESHOLD,
        })
    }
}

fn fft2(data: &mut [C64], n: usize, fft: &Arc<dyn Fft<f64>>, scratch_t: &mut Vec<C64>) {
    data.par_chunks_mut(n).for_each(|row| fft.process(row));
    transpose(data, n, scratch_t);
    data.par_chunks_mut(n).for_each(|row| fft.process(row));
    transpose(data, n, scratch_t);
}

fn transpose(data: &mut [C64], n: usize, scratch: &mut Vec<C64>) {
    scratch.resize(n * n, C64::default());
    scratch.par_chunks_mut(n).enumerate().for_each(|(j, row)| {
        for (i, v) in row.iter_mut().enumerate() {
            *v = data[i * n + j];
        }
    });
    data.copy_from_slice(scratch);
}

/// Owns a grid state and advances it in time.
pub struct GridEvolution<'a> {
    state: GridState,
    bath: BathParams,
    omega: &'a (dyn Fn(f64) -> f64 + Sync),
    config: GridConfig,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    k: Vec<f64>,
    xs: Vec<f64>,
    kinetic_h: f64,
    kinetic: Vec<C64>,
    spectral: Vec<C64>,
    scratch: Vec<C64>,
}

impl<'a> GridEvolution<'a> {
    pub fn new(
        initial: GridState,
        bath: BathParams,
        omega: &'a (dyn Fn(f64) -> f64 + Sync),
        config: GridConfig,
    ) -> Result<Self> {
        if initial.n != config.n || initial.l != config.l {
            return Err(QbdError::InvalidParameter("grid state does not match its configuration".into()));
        }
        if !(config.dt > 0.0) {
            return Err(QbdError::InvalidParameter(format!("dt = {} must be positive", config.dt)));
        }
        let n = initial.n;
        let mut planner = FftPlanner::new();
        let dk = std::f64::consts::PI / initial.l;
        let k = (0..n)
            .map(|i| if i < n / 2 { i as f64 } else { i as f64 - n as f64 } * dk)
            .collect();
        let xs = initial.coordinates();
        Ok(Self {
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            state: initial,
            bath,
            omega,
            config,
            k,
            xs,
            kinetic_h: f64::NAN,
            kinetic: Vec::new(),
            spectral: Vec::new(),
            scratch: Vec::new(),
        })
    }

    pub fn state(&self) -> &GridState {
        &self.state
    }

    pub fn into_state(self) -> GridState {
        self.state
    }

    fn pointwise_half(&mut self, t: f64, h: f64) {
        let n = self.state.n;
        let xs = &self.xs;
        let d = self.bath.d;
        let w2 = (self.omega)(t).powi(2);
        let pot = self.bath.mass * w2 / (2.0 * self.bath.hbar);
        self.state
            .values
            .par_chunks_mut(n)
            .zip(xs.par_iter())
            .for_each(|(row, &x)| {
                for (v, &y) in row.iter_mut().zip(xs) {
                    let q = x - y;
                    let re = -d * q * q * 0.5 * h;
                    let im = -pot * (x * x - y * y) * 0.5 * h;
                    *v *= C64::new(re, im).exp();
                }
            });
    }

    fn ensure_kinetic(&mut self, h: f64) {
        if self.kinetic_h == h {
            return;
        }
        let n = self.state.n;
        let c = self.bath.hbar / (2.0 * self.bath.mass) * h;
        let k = &self.k;
        self.kinetic = (0..n * n)
            .map(|idx| {
                let (kx, ky) = (k[idx / n], k[idx % n]);
                C64::new(0.0, -c * (kx * kx - ky * ky)).exp()
            })
            .collect();
        self.kinetic_h = h;
    }

    fn step(&mut self, h: f64) -> Result<()> {
        let n = self.state.n;
        let t = self.state.t;
        let before = self.state.frobenius_norm();
        self.ensure_kinetic(h);
        self.pointwise_half(t, h);

        let norm = 1.0 / (n * n) as f64;
        fft2(&mut self.state.values, n, &self.forward, &mut self.scratch);
        let kin = &self.kinetic;
        self.state
            .values
            .par_iter_mut()
            .zip(kin.par_iter())
            .for_each(|(v, k)| *v *= k * norm);
        if self.bath.gamma > 0.0 {
            let k = &self.k;
            self.spectral.clear();
            self.spectral.extend(self.state.values.iter().enumerate().map(|(idx, v)| {
                let (kx, ky) = (k[idx / n], k[idx % n]);
                v * C64::new(0.0, kx - ky)
            }));
            fft2(&mut self.spectral, n, &self.inverse, &mut self.scratch);
        }
        fft2(&mut self.state.values, n, &self.inverse, &mut self.scratch);
        if self.bath.gamma > 0.0 {
            let g = self.bath.gamma * h;
            let xs = &self.xs;
            let spectral = &self.spectral;
            self.state
                .values
                .par_chunks_mut(n)
                .enumerate()
                .for_each(|(i, row)| {
                    for (j, v) in row.iter_mut().enumerate() {
                        *v -= g * (xs[i] - xs[j]) * spectral[i * n + j];
                    }
                });
        }
        self.pointwise_half(t + 0.5 * h, h);
        self.state.t = t + h;

        let after = self.state.frobenius_norm();
        if !(after.is_finite() && after <= 2.0 * before) {
            return Err(QbdError::UnstableStep {
                t: self.state.t,
                growth: after / before,
            });
        }
        Ok(())
    }

    /// Steps to exactly `t_target` with the largest uniform step not above `dt`.
    pub fn advance_to(&mut self, t_target: f64) -> Result<()> {
        let span = t_target - self.state.t;
        if span <= 0.0 {
            return Ok(());
        }
        let steps = (span / self.config.dt).ceil().max(1.0) as usize;
        let h = span / steps as f64;
        for _ in 0..steps {
            self.step(h)?;
        }
        self.state.t = t_target;
        let mass = self.state.edge_mass();
        if mass > self.config.leak_threshold {
            return Err(QbdError::BoundaryLeak {
                t: t_target,
                mass,
                threshold: self.config.leak_threshold,
            });
        }
        Ok(())
    }
}

/// Evolves `initial` to time `t` with step at most `dt`.
pub fn grid_evolve_master_equation(
    initial: &GridState,
    bath: &BathParams,
    omega: &(dyn Fn(f64) -> f64 + Sync),
    t: f64,
    dt: f64,
) -> Result<GridState> {
    let config = GridConfig {
        n: initial.n,
        l: initial.l,
        dt,
        leak_threshold: DEFAULT_LEAK_THRESHOLD,
    };
    let mut evo = GridEvolution::new(initial.clone(), *bath, omega, config)?;
    evo.advance_to(initial.t + t)?;
    Ok(evo.into_state())
}

/// `tr[ρ₀ρ(t)]/tr[ρ₀²]` from the grid at each requested time.
pub fn grid_survival(
    state: &GaussianMixtureState,
    bath: &BathParams,
    config: GridConfig,
    times: &[f64],
) -> Result<Vec<f64>> {
    let initial = GridState::from_state(state, config.n, config.l)?;
    let p0 = initial.hs_overlap(&initial)?.re;
    let free = |_: f64| 0.0;
    let mut evo = GridEvolution::new(initial.clone(), *bath, &free, config)?;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        evo.advance_to(t)?;
        out.push(initial.hs_overlap(evo.state())?.re / p0);
    }
    Ok(out)
}
