//! Algebra of complex Gaussian kernels for a density matrix ρ(x, y).
//!
//! A kernel is `exp(l − ½⟨Z, M Z⟩ + ⟨v, Z⟩)` in the centre/difference
//! coordinates `Z = (r, q)`, `r = (x + y)/2`, `q = x − y`. At late times the
//! curvature along the diagonal is many orders of magnitude below the one
//! across it; in `(x, y)` it would only survive as a cancellation between large
//! entries. The change of variables has unit Jacobian, so integrals and
//! determinants are the same in either basis.
//!
//! All bilinear forms are transpose products `ZᵀY`; nothing here conjugates
//! implicitly. Amplitudes are carried as complex logarithms and only
//! exponentiated when a number leaves the module.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{QbdError, Result};

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Roundoff allowance on the smallest eigenvalue of `Re(Q)`, relative to its trace.
pub const POSITIVITY_TOLERANCE: f64 = 1e-12;

/// Determinants below this magnitude are treated as singular.
pub const SINGULAR_DET: f64 = 1e-300;

/// Complex symmetric 2×2 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexSym2 {
    pub m11: C64,
    pub m12: C64,
    pub m22: C64,
}

impl ComplexSym2 {
    pub const fn new(m11: C64, m12: C64, m22: C64) -> Self {
        Self { m11, m12, m22 }
    }

    pub fn real(m11: f64, m12: f64, m22: f64) -> Self {
        Self::new(m11.into(), m12.into(), m22.into())
    }

    pub fn zero() -> Self {
        Self::new(ZERO, ZERO, ZERO)
    }

    pub fn identity() -> Self {
        Self::real(1.0, 0.0, 1.0)
    }

    pub fn det(&self) -> C64 {
        self.m11 * self.m22 - self.m12 * self.m12
    }

    pub fn trace(&self) -> C64 {
        self.m11 + self.m22
    }

    pub fn inverse(&self) -> Result<Self> {
        let det = self.det();
        if det.norm() < SINGULAR_DET {
            return Err(QbdError::SingularForm {
                det: det.norm(),
                at_time: None,
            });
        }
        let inv = det.inv();
        Ok(Self::new(self.m22 * inv, -self.m12 * inv, self.m11 * inv))
    }

    pub fn apply(&self, v: [C64; 2]) -> [C64; 2] {
        [
            self.m11 * v[0] + self.m12 * v[1],
            self.m12 * v[0] + self.m22 * v[1],
        ]
    }

    /// `uᵀ M v`.
    pub fn bilinear(&self, u: [C64; 2], v: [C64; 2]) -> C64 {
        let mv = self.apply(v);
        u[0] * mv[0] + u[1] * mv[1]
    }

    /// The `(r, q)` form of `K(y, x)` given that of `K(x, y)`: `q → −q`.
    pub fn q_reflected(&self) -> Self {
        Self::new(self.m11, -self.m12, self.m22)
    }

    /// `TᵀMT` for `(x, y) = T(r, q)`: the `(r, q)` form of an `(x, y)` form.
    pub fn xy_to_rq(&self) -> Self {
        let (a, b, d) = (self.m11, self.m12, self.m22);
        Self::new(a + 2.0 * b + d, 0.5 * (a - d), 0.25 * (a - 2.0 * b + d))
    }

    /// Inverse of [`Self::xy_to_rq`].
    pub fn rq_to_xy(&self) -> Self {
        let (rr, rq, qq) = (self.m11, self.m12, self.m22);
        Self::new(0.25 * rr + rq + qq, 0.25 * rr - qq, 0.25 * rr - rq + qq)
    }

    pub fn conj(&self) -> Self {
        Self::new(self.m11.conj(), self.m12.conj(), self.m22.conj())
    }

    /// Eigenvalues of the real part, ascending.
    pub fn real_part_eigenvalues(&self) -> (f64, f64) {
        let (a, b, d) = (self.m11.re, self.m12.re, self.m22.re);
        let mean = 0.5 * (a + d);
        let radius = (0.25 * (a - d) * (a - d) + b * b).sqrt();
        (mean - radius, mean + radius)
    }

    /// `Re(M)` positive (semi)definite up to roundoff.
    pub fn check_normalizable(&self, context: &str) -> Result<()> {
        let (lo, hi) = self.real_part_eigenvalues();
        let trace = self.m11.re + self.m22.re;
        let ok = lo.is_finite()
            && hi.is_finite()
            && trace > 0.0
            && lo >= -POSITIVITY_TOLERANCE * trace;
        if ok {
            Ok(())
        } else {
            Err(QbdError::NonNormalizable {
                context: format!("{context}: eigenvalues of Re(Q) = ({lo:e}, {hi:e})"),
            })
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.m11.norm().max(self.m12.norm()).max(self.m22.norm())
    }
}

impl Add for ComplexSym2 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.m11 + o.m11, self.m12 + o.m12, self.m22 + o.m22)
    }
}

impl Sub for ComplexSym2 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.m11 - o.m11, self.m12 - o.m12, self.m22 - o.m22)
    }
}

impl Mul<C64> for ComplexSym2 {
    type Output = Self;
    fn mul(self, s: C64) -> Self {
        Self::new(self.m11 * s, self.m12 * s, self.m22 * s)
    }
}

impl Mul<f64> for ComplexSym2 {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        self * C64::from(s)
    }
}

/// General complex 2×2 matrix, row-major. Used for the coupling block between
/// final and initial coordinates of a propagator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2(pub [[C64; 2]; 2]);

impl Mat2 {
    pub fn apply(&self, v: [C64; 2]) -> [C64; 2] {
        let m = &self.0;
        [
            m[0][0] * v[0] + m[0][1] * v[1],
            m[1][0] * v[0] + m[1][1] * v[1],
        ]
    }

    /// `A S Aᵀ` for symmetric `S`; the result is symmetric.
    pub fn congruence(&self, s: &ComplexSym2) -> ComplexSym2 {
        let a = &self.0;
        let row = |i: usize| s.apply([a[i][0], a[i][1]]);
        let r0 = row(0);
        let r1 = row(1);
        ComplexSym2::new(
            a[0][0] * r0[0] + a[0][1] * r0[1],
            a[1][0] * r0[0] + a[1][1] * r0[1],
            a[1][0] * r1[0] + a[1][1] * r1[1],
        )
    }
}

/// Principal-branch sqrt of `det` unless a previous value is supplied, in which
/// case the sign closest to it is returned.
pub fn sqrt_continuous(det: C64, previous: Option<C64>) -> C64 {
    let root = det.sqrt();
    match previous {
        Some(prev) if (root - prev).norm() > (root + prev).norm() => -root,
        _ => root,
    }
}

/// Carries the last square root of a determinant along a monotone time sweep.
#[derive(Debug, Clone, Copy, Default)]
pub struct BranchTracker {
    previous: Option<C64>,
}

impl BranchTracker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn sqrt(&mut self, det: C64) -> C64 {
        let root = sqrt_continuous(det, self.previous);
        self.previous = Some(root);
        root
    }

    pub fn previous(&self) -> Option<C64> {
        self.previous
    }
}

/// `log ∫∫ exp(−½⟨X,QX⟩ + ⟨V,X⟩) dx dy = log(2π) − ½ log det Q + ½⟨V, Q⁻¹V⟩`.
///
/// Principal logarithm of the determinant: with `Re(Q) ≻ 0` both eigenvalues of
/// `Q` lie in the open right half-plane, so the principal root is the analytic
/// continuation of the real positive-definite case.
pub fn log_gaussian_integral_2d(q: &ComplexSym2, v: [C64; 2]) -> Result<C64> {
    q.check_normalizable("2-D Gaussian integral")?;
    let det = q.det();
    if det.norm() < SINGULAR_DET {
        return Err(QbdError::SingularForm {
            det: det.norm(),
            at_time: None,
        });
    }
    let qinv = q.inverse()?;
    Ok(C64::from((2.0 * PI).ln()) - 0.5 * det.ln() + 0.5 * qinv.bilinear(v, v))
}

pub fn gaussian_integral_2d(q: &ComplexSym2, v: [C64; 2]) -> Result<C64> {
    log_gaussian_integral_2d(q, v).map(|l| l.exp())
}

/// Same integral with the root of `det Q` chosen continuous with `previous_sqrt_det`.
/// Returns the value and the root used.
pub fn gaussian_integral_2d_tracked(
    q: &ComplexSym2,
    v: [C64; 2],
    previous_sqrt_det: Option<C64>,
) -> Result<(C64, C64)> {
    q.check_normalizable("2-D Gaussian integral")?;
    let det = q.det();
    if det.norm() < SINGULAR_DET {
        return Err(QbdError::SingularForm {
            det: det.norm(),
            at_time: None,
        });
    }
    let root = sqrt_continuous(det, previous_sqrt_det);
    let qinv = q.inverse()?;
    let value = 2.0 * PI / root * (0.5 * qinv.bilinear(v, v)).exp();
    Ok((value, root))
}

/// `log ∫ exp(−½ s x² + w x) dx`.
pub fn log_gaussian_integral_1d(s: C64, w: C64) -> Result<C64> {
    if !(s.re >= -POSITIVITY_TOLERANCE * s.norm()) || s.norm() < SINGULAR_DET {
        return Err(QbdError::NonNormalizable {
            context: format!("1-D Gaussian integral with s = {s}"),
        });
    }
    Ok(C64::from((2.0 * PI).ln()) * 0.5 - 0.5 * s.ln() + 0.5 * w * w / s)
}

/// Normalization, mean and second moments of a 1-D Gaussian weight.
#[derive(Debug, Clone, Copy)]
pub struct Moments1 {
    pub log_norm: C64,
    pub mean: C64,
    /// `E[x²]` under the normalized weight.
    pub second: C64,
}

pub fn moments_1d(s: C64, w: C64) -> Result<Moments1> {
    let log_norm = log_gaussian_integral_1d(s, w)?;
    let mean = w / s;
    Ok(Moments1 {
        log_norm,
        mean,
        second: s.inv() + mean * mean,
    })
}

/// Normalization, mean and second-moment matrix of a 2-D Gaussian weight.
#[derive(Debug, Clone, Copy)]
pub struct Moments2 {
    pub log_norm: C64,
    pub mean: [C64; 2],
    /// `E[X Xᵀ]` under the normalized weight.
    pub second: ComplexSym2,
}

pub fn moments_2d(q: &ComplexSym2, v: [C64; 2]) -> Result<Moments2> {
    let log_norm = log_gaussian_integral_2d(q, v)?;
    let cov = q.inverse()?;
    let mean = cov.apply(v);
    let second = cov + ComplexSym2::new(mean[0] * mean[0], mean[0] * mean[1], mean[1] * mean[1]);
    Ok(Moments2 {
        log_norm,
        mean,
        second,
    })
}

impl Moments2 {
    /// `E[(c0 + c·X)(d0 + d·X)]`.
    pub fn affine_product(&self, c0: C64, c: [C64; 2], d0: C64, d: [C64; 2]) -> C64 {
        let cm = c[0] * self.mean[0] + c[1] * self.mean[1];
        let dm = d[0] * self.mean[0] + d[1] * self.mean[1];
        c0 * d0 + c0 * dm + d0 * cm + self.second.bilinear(c, d)
    }
}

/// `exp(log_prefactor − ½⟨Z, quad_form Z⟩ + ⟨linear, Z⟩)` with `Z = (r, q)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianKernel {
    pub log_prefactor: C64,
    pub quad_form: ComplexSym2,
    pub linear: [C64; 2],
}

impl GaussianKernel {
    pub fn new(log_prefactor: C64, quad_form: ComplexSym2, linear: [C64; 2]) -> Self {
        Self {
            log_prefactor,
            quad_form,
            linear,
        }
    }

    pub fn centered(log_prefactor: C64, quad_form: ComplexSym2) -> Self {
        Self::new(log_prefactor, quad_form, [ZERO; 2])
    }

    /// Kernel given by its `(x, y)` form `exp(l − ½⟨X, M X⟩ + ⟨v, X⟩)`.
    pub fn from_xy(log_prefactor: C64, quad_form_xy: ComplexSym2, linear_xy: [C64; 2]) -> Self {
        let [v1, v2] = linear_xy;
        Self::new(log_prefactor, quad_form_xy.xy_to_rq(), [v1 + v2, 0.5 * (v1 - v2)])
    }

    /// `(M, v)` in the `(x, y)` basis.
    pub fn xy_form(&self) -> (ComplexSym2, [C64; 2]) {
        let [vr, vq] = self.linear;
        (self.quad_form.rq_to_xy(), [0.5 * vr + vq, 0.5 * vr - vq])
    }

    pub fn log_eval(&self, x: f64, y: f64) -> C64 {
        let (r, q) = (0.5 * (x + y), x - y);
        let z = [C64::from(r), C64::from(q)];
        self.log_prefactor - 0.5 * self.quad_form.bilinear(z, z)
            + self.linear[0] * r
            + self.linear[1] * q
    }

    pub fn eval(&self, x: f64, y: f64) -> C64 {
        self.log_eval(x, y).exp()
    }

    /// `K(y, x)`.
    pub fn transpose(&self) -> Self {
        Self::new(
            self.log_prefactor,
            self.quad_form.q_reflected(),
            [self.linear[0], -self.linear[1]],
        )
    }

    /// `K(x, y)*`.
    pub fn conj(&self) -> Self {
        Self::new(
            self.log_prefactor.conj(),
            self.quad_form.conj(),
            [self.linear[0].conj(), self.linear[1].conj()],
        )
    }

    /// `K(y, x)*`: the kernel's Hermitian partner.
    pub fn adjoint(&self) -> Self {
        self.transpose().conj()
    }

    pub fn product(&self, other: &Self) -> Self {
        Self::new(
            self.log_prefactor + other.log_prefactor,
            self.quad_form + other.quad_form,
            [self.linear[0] + other.linear[0], self.linear[1] + other.linear[1]],
        )
    }

    pub fn scaled(&self, log_factor: C64) -> Self {
        Self {
            log_prefactor: self.log_prefactor + log_factor,
            ..*self
        }
    }

    /// Restriction to `x = y`: `(s, w)` with `K(x, x) = exp(l − ½ s x² + w x)`.
    pub fn diagonal(&self) -> (C64, C64) {
        (self.quad_form.m11, self.linear[0])
    }

    /// `log ∫∫ K`.
    pub fn log_integral(&self) -> Result<C64> {
        Ok(self.log_prefactor + log_gaussian_integral_2d(&self.quad_form, self.linear)?)
    }

    fn same_shape(&self, other: &Self, tol: f64) -> bool {
        let scale = self.quad_form.max_abs().max(1.0);
        (self.quad_form - other.quad_form).max_abs() <= tol * scale
            && (0..2).all(|i| (self.linear[i] - other.linear[i]).norm() <= tol * scale)
    }
}

/// Sums complex numbers given by their logarithms without overflow.
#[derive(Debug, Default, Clone)]
pub(crate) struct LogSum {
    logs: Vec<C64>,
}

impl LogSum {
    pub(crate) fn push(&mut self, log_value: C64) {
        self.logs.push(log_value);
    }

    /// Returns `(sum, Σ|term|)`.
    pub(crate) fn total(&self) -> (C64, f64) {
        let Some(shift) = self
            .logs
            .iter()
            .map(|l| l.re)
            .filter(|r| r.is_finite())
            .reduce(f64::max)
        else {
            return (ZERO, 0.0);
        };
        let mut sum = ZERO;
        let mut abs = 0.0;
        for l in &self.logs {
            let term = (l - shift).exp();
            sum += term;
            abs += term.norm();
        }
        let scale = shift.exp();
        (sum * scale, abs * scale)
    }
}

/// Weighted sum of Gaussian kernels representing ρ(x, y).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GaussianMixtureState {
    terms: Vec<GaussianKernel>,
}

impl GaussianMixtureState {
    pub fn new(terms: Vec<GaussianKernel>) -> Self {
        Self { terms }
    }

    pub fn single(kernel: GaussianKernel) -> Self {
        Self::new(vec![kernel])
    }

    pub fn terms(&self) -> &[GaussianKernel] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn push(&mut self, kernel: GaussianKernel) {
        self.terms.push(kernel);
    }

    /// Multiplies every term by `factor` (which may be negative or complex).
    pub fn scaled(&self, factor: C64) -> Self {
        let log_factor = factor.ln();
        Self::new(self.terms.iter().map(|k| k.scaled(log_factor)).collect())
    }

    /// Linear combination `self + other`.
    pub fn plus(&self, other: &Self) -> Self {
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&other.terms);
        Self::new(terms)
    }

    pub fn normalized(&self) -> Result<Self> {
        let tr = trace_norm(self)?;
        if !(tr > 0.0) {
            return Err(QbdError::NonNormalizable {
                context: format!("trace {tr} is not positive"),
            });
        }
        Ok(self.scaled(C64::from(1.0 / tr)))
    }

    /// Merges terms whose quadratic and linear parts agree to `tol` by adding
    /// their prefactors.
    pub fn merged(&self, tol: f64) -> Self {
        let mut out: Vec<GaussianKernel> = Vec::with_capacity(self.terms.len());
        for k in &self.terms {
            if let Some(existing) = out.iter_mut().find(|e| e.same_shape(k, tol)) {
                let a = existing.log_prefactor;
                let b = k.log_prefactor;
                let shift = if a.re > b.re { a } else { b };
                existing.log_prefactor = shift + ((a - shift).exp() + (b - shift).exp()).ln();
            } else {
                out.push(*k);
            }
        }
        Self::new(out)
    }

    /// Checks `ρ(x, y) = ρ(y, x)*` at the given points.
    pub fn hermiticity_defect(&self, points: &[(f64, f64)]) -> f64 {
        points
            .iter()
            .map(|&(x, y)| {
                let a = evaluate_kernel(self, x, y);
                let b = evaluate_kernel(self, y, x).conj();
                (a - b).norm() / a.norm().max(b.norm()).max(1e-300)
            })
            .fold(0.0, f64::max)
    }

    /// `(a, c)` if this is a single centered real kernel of the symmetric form
    /// `exp(−½(a x² + a y² − 2c x y))`.
    pub fn as_centered_ac(&self) -> Option<(f64, f64)> {
        let [k] = self.terms.as_slice() else {
            return None;
        };
        let q = &k.quad_form;
        let tiny = 1e-14 * q.max_abs();
        let real = q.m11.im.abs() <= tiny && q.m12.im.abs() <= tiny && q.m22.im.abs() <= tiny;
        let symmetric = q.m12.re.abs() <= tiny;
        let centered = k.linear.iter().all(|v| v.norm() == 0.0);
        let (rr, qq) = (q.m11.re, q.m22.re);
        (real && symmetric && centered).then_some((0.25 * rr + qq, qq - 0.25 * rr))
    }
}

/// Point evaluation of ρ(x, y).
pub fn evaluate_kernel(state: &GaussianMixtureState, x: f64, y: f64) -> C64 {
    state.terms.iter().map(|k| k.eval(x, y)).sum()
}

fn ensure_real(quantity: &'static str, value: C64, scale: f64) -> Result<f64> {
    let limit = 1e-12 * scale.max(1.0);
    if value.im.abs() > limit {
        return Err(QbdError::ImaginaryResidue {
            quantity,
            residue: value.im.abs(),
            limit,
        });
    }
    Ok(value.re)
}

/// `tr ρ = ∫ ρ(x, x) dx`.
pub fn trace_norm(state: &GaussianMixtureState) -> Result<f64> {
    let mut sum = LogSum::default();
    for k in &state.terms {
        let (s, w) = k.diagonal();
        sum.push(k.log_prefactor + log_gaussian_integral_1d(s, w)?);
    }
    let (total, abs) = sum.total();
    ensure_real("trace", total, abs)
}

/// `∫∫ A(x, y) B(y, x) dx dy = tr[A B]`.
pub fn hs_overlap(a: &GaussianMixtureState, b: &GaussianMixtureState) -> Result<C64> {
    let mut sum = LogSum::default();
    for ka in &a.terms {
        for kb in &b.terms {
            sum.push(ka.product(&kb.transpose()).log_integral()?);
        }
    }
    Ok(sum.total().0)
}

/// `tr ρ²`.
pub fn purity(state: &GaussianMixtureState) -> Result<f64> {
    let mut sum = LogSum::default();
    for ka in &state.terms {
        for kb in &state.terms {
            sum.push(ka.product(&kb.transpose()).log_integral()?);
        }
    }
    let (total, abs) = sum.total();
    ensure_real("purity", total, abs)
}

/// Accumulates `Σ_k ∫ poly_k(x) K_k(x, x) dx` for the diagonal moments.
fn diagonal_moments(state: &GaussianMixtureState) -> Result<(f64, f64, f64)> {
    let mut zeroth = LogSum::default();
    let mut first = C64::default();
    let mut second = C64::default();
    let mut terms = Vec::with_capacity(state.terms.len());
    for k in &state.terms {
        let (s, w) = k.diagonal();
        let m = moments_1d(s, w)?;
        let log_weight = k.log_prefactor + m.log_norm;
        zeroth.push(log_weight);
        terms.push((log_weight, m));
    }
    let (norm, abs) = zeroth.total();
    let norm = ensure_real("trace", norm, abs)?;
    for (log_weight, m) in terms {
        let w = log_weight.exp();
        first += w * m.mean;
        second += w * m.second;
    }
    Ok((norm, first.re / norm, second.re / norm))
}

/// `⟨x⟩` of a (not necessarily normalized) state.
pub fn position_mean(state: &GaussianMixtureState) -> Result<f64> {
    Ok(diagonal_moments(state)?.1)
}

/// `Δx² = ⟨x²⟩ − ⟨x⟩²`.
pub fn position_variance(state: &GaussianMixtureState) -> Result<f64> {
    let (_, mean, second) = diagonal_moments(state)?;
    Ok((second - mean * mean).max(0.0))
}

/// `Δp² = ⟨p²⟩ − ⟨p⟩²` from `⟨p⟩ = −iħ∫∂ₓρ|_{y=x}` and `⟨p²⟩ = ħ²∫∂ₓ∂ᵧρ|_{y=x}`.
pub fn momentum_variance(state: &GaussianMixtureState, hbar: f64) -> Result<f64> {
    let mut norm = C64::default();
    let mut first = C64::default();
    let mut second = C64::default();
    for k in &state.terms {
        let q = &k.quad_form;
        let (s, w) = k.diagonal();
        let m = moments_1d(s, w)?;
        let weight = (k.log_prefactor + m.log_norm).exp();
        // ∂ₓ = ½∂ᵣ + ∂_q and ∂ᵧ = ½∂ᵣ − ∂_q, evaluated at q = 0.
        let [vr, vq] = k.linear;
        let (c0, c1) = (0.5 * vr + vq, -(0.5 * q.m11 + q.m12));
        let (d0, d1) = (0.5 * vr - vq, -(0.5 * q.m11 - q.m12));
        norm += weight;
        first += weight * (c0 + c1 * m.mean);
        second += weight * (q.m22 - 0.25 * q.m11 + c0 * d0 + (c0 * d1 + c1 * d0) * m.mean + c1 * d1 * m.second);
    }
    let mean_p = (C64::new(0.0, -hbar) * first / norm).re;
    let mean_p2 = (hbar * hbar * second / norm).re;
    Ok((mean_p2 - mean_p * mean_p).max(0.0))
}

/// `Δ̃x² = tr[x²ρ²] − tr[(xρ)²] = ½∫∫ (x−y)² ρ(x,y) ρ(y,x)`.
pub fn modified_position_variance(state: &GaussianMixtureState) -> Result<f64> {
    let diff = [ZERO, C64::from(1.0)];
    let mut total = C64::default();
    for ka in &state.terms {
        for kb in &state.terms {
            let k = ka.product(&kb.transpose());
            let m = moments_2d(&k.quad_form, k.linear)?;
            let weight = (k.log_prefactor + m.log_norm).exp();
            total += weight * m.affine_product(ZERO, diff, ZERO, diff);
        }
    }
    Ok(0.5 * total.re)
}

/// `Δ̃p² = tr[p²ρ²] − tr[(pρ)²] = ½ħ²∫∫ |(∂ₓ+∂ᵧ)ρ(x,y)|²`.
pub fn modified_momentum_variance(state: &GaussianMixtureState, hbar: f64) -> Result<f64> {
    let mut total = C64::default();
    for ka in &state.terms {
        for kb in &state.terms {
            let kbc = kb.conj();
            let k = ka.product(&kbc);
            let m = moments_2d(&k.quad_form, k.linear)?;
            let weight = (k.log_prefactor + m.log_norm).exp();
            // ∂ₓ + ∂ᵧ = ∂ᵣ.
            let grad = |g: &GaussianKernel| (g.linear[0], [-g.quad_form.m11, -g.quad_form.m12]);
            let (c0, c) = grad(ka);
            let (d0, d) = grad(&kbc);
            total += weight * m.affine_product(c0, c, d0, d);
        }
    }
    Ok(0.5 * hbar * hbar * total.re)
}
