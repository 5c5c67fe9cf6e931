//! Acceptance criteria, one test each. Every test prints a single
//! `criterion N: PASS|FAIL ...` line before asserting.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use qbd_cli::config::ScenarioConfig;
use qbd_cli::{fit, sweep};
use qbd_core::gaussian::{
    evaluate_kernel, gaussian_integral_2d, hs_overlap, position_variance, purity, trace_norm,
    ComplexSym2, C64,
};
use qbd_core::oracle::{ersak_memory_term, grid_survival, subexponential_check, GridConfig};
use qbd_core::propagator::{free_expansion_coefficients, propagate_state, scaling_factor, BathParams};
use qbd_core::quadrature::integrate;
use qbd_core::states::{
    make_cat_state, make_displaced_gaussian, make_gaussian, make_gaussian_ac, make_mehler_thermal,
};
use qbd_core::survival::{
    asymptote_intermediate, asymptote_overdamped, decoherence_time, decoherence_time_pure,
    log_spaced, survival_probability, SurvivalCurve,
};

fn reference_bath() -> BathParams {
    BathParams::new(1e-3, 100.0).unwrap()
}

fn s_at(a: f64, c: f64, bath: &BathParams, t: f64) -> f64 {
    survival_probability(a, c, bath, &free_expansion_coefficients(bath, t).unwrap()).unwrap()
}

fn report(n: u32, ok: bool, detail: &str) {
    println!("criterion {n}: {} {detail}", if ok { "PASS" } else { "FAIL" });
}

/// Ordinary least-squares slope and intercept of `y` on `x`.
fn line_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

fn loglog_slope(times: &[f64], values: &[f64]) -> f64 {
    let lx: Vec<f64> = times.iter().map(|t| t.ln()).collect();
    let ly: Vec<f64> = values.iter().map(|s| s.ln()).collect();
    line_fit(&lx, &ly).0
}

#[test]
fn criterion_1_regime_slopes() {
    let start = Instant::now();
    let bath = reference_bath();
    let tau_d = 0.01;
    let tau_r = bath.tau_r();
    let curve = SurvivalCurve::closed_form(1.0, 0.0, &bath, log_spaced(1e-3, 1e7, 200)).unwrap();
    let select = |lo: f64, hi: f64| -> (Vec<f64>, Vec<f64>) {
        curve
            .times
            .iter()
            .zip(&curve.values)
            .filter(|(t, _)| **t >= lo * (1.0 - 1e-12) && **t <= hi * (1.0 + 1e-12))
            .map(|(t, s)| (*t, *s))
            .unzip()
    };
    let (tm, sm) = select(10.0 * tau_d, 0.1 * tau_r);
    let (tl, sl) = select(10.0 * tau_r, 1e4 * tau_r);
    let mid_slope = loglog_slope(&tm, &sm);
    let late_slope = loglog_slope(&tl, &sl);
    let mid_dev = tm
        .iter()
        .zip(&sm)
        .map(|(&t, &s)| (asymptote_intermediate(&bath, t) / s - 1.0).abs())
        .fold(0.0, f64::max);
    let late_dev = tl
        .iter()
        .zip(&sl)
        .map(|(&t, &s)| (asymptote_overdamped(1.0, 0.0, &bath, t).unwrap() / s - 1.0).abs())
        .fold(0.0, f64::max);
    let elapsed = start.elapsed().as_secs_f64();
    let checks = [
        (mid_slope + 2.0).abs() <= 0.05,
        (late_slope + 0.5).abs() <= 0.05,
        mid_dev <= 0.15,
        late_dev <= 0.15,
        elapsed < 10.0,
    ];
    let ok = checks.iter().all(|&c| c);
    report(
        1,
        ok,
        &format!(
            "mid slope {mid_slope:.4} ({} pts), late slope {late_slope:.4} ({} pts), \
             max mid-asymptote deviation {mid_dev:.3}, max late-asymptote deviation {late_dev:.3}, {elapsed:.2} s",
            tm.len(),
            tl.len()
        ),
    );
    assert!(ok, "{checks:?}");
}

#[test]
fn criterion_2_short_time_law() {
    let bath = reference_bath();
    let tau_d = 1.0 / bath.d;
    let worst = log_spaced(1e-9, 1e-3 * tau_d, 25)
        .into_iter()
        .map(|t| (s_at(1.0, 0.0, &bath, t) - (1.0 - t / tau_d)).abs())
        .fold(0.0, f64::max);
    let ok = worst < 1e-5;
    report(2, ok, &format!("max |S - (1 - t/tau_D)| = {worst:.3e} for t <= 1e-3 tau_D"));
    assert!(ok);
}

#[test]
fn criterion_3_grid_oracle() {
    let start = Instant::now();
    let bath = reference_bath();
    let tau_d = 0.01;
    let state = make_gaussian(1.0).unwrap();
    let times = log_spaced(0.1 * tau_d, 50.0 * tau_d, 10);
    let config = GridConfig::auto(&state, &bath, 50.0 * tau_d, 512).unwrap();
    let grid = grid_survival(&state, &bath, config, &times).unwrap();
    let worst = times
        .iter()
        .zip(&grid)
        .map(|(&t, g)| (g / s_at(1.0, 0.0, &bath, t) - 1.0).abs())
        .fold(0.0, f64::max);
    let elapsed = start.elapsed().as_secs_f64();
    let ok = worst < 1e-3 && elapsed < 300.0;
    report(
        3,
        ok,
        &format!("max relative error {worst:.3e} at N = 512, L = {:.3}, {elapsed:.1} s", config.l),
    );
    assert!(ok);
}

#[test]
fn criterion_4_composition_law() {
    let bath = reference_bath();
    let state = make_gaussian(1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let t = 10f64.powf(rng.random_range(-3.0..6.0));
        let tp = t * rng.random_range(0.0..1.0);
        let m = ersak_memory_term(&state, &bath, t, tp).unwrap();
        let lhs = s_at(1.0, 0.0, &bath, t);
        let rhs = s_at(1.0, 0.0, &bath, t - tp) * s_at(1.0, 0.0, &bath, tp) + m;
        worst = worst.max((lhs - rhs).abs());
    }
    let smallest_memory = log_spaced(10.0 * 0.01, 0.1 * bath.tau_r(), 6)
        .into_iter()
        .map(|t| ersak_memory_term(&state, &bath, t, 0.5 * t).unwrap().abs())
        .fold(f64::INFINITY, f64::min);
    let ok = worst < 1e-8 && smallest_memory > 1e-6;
    report(
        4,
        ok,
        &format!("max identity defect {worst:.3e}; min |M(t, t/2)| in the intermediate regime {smallest_memory:.3e}"),
    );
    assert!(ok);
}

#[test]
fn criterion_5_decoherence_time_consistency() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let a = rng.random_range(0.2..5.0);
        let c = a * rng.random_range(0.0..0.9);
        let gamma = 10f64.powf(rng.random_range(-5.0..-1.0));
        let d = (a + c) * gamma * 10f64.powf(rng.random_range(2.0..5.0));
        let bath = BathParams::new(gamma, d).unwrap();

        // Mixed Gaussian: general formula, (a+c)/D and the decay time of the closed form.
        let general = decoherence_time(&make_gaussian_ac(a, c).unwrap(), &bath).unwrap();
        let simple = (a + c) / d;
        // Well inside the linear regime: the unitary t² term (coefficient ~a²) must stay negligible.
        let t = 1e-4 * simple.min(1.0 / (a * a * simple));
        let observed = t / (1.0 - s_at(a, c, &bath, t));

        // Pure member of the same family: the pure-state formula with Δx² = 1/2a.
        let pure_state = make_gaussian_ac(a, 0.0).unwrap();
        let eq18 = decoherence_time_pure(position_variance(&pure_state).unwrap(), &bath).unwrap();
        let pure_general = decoherence_time(&pure_state, &bath).unwrap();
        let pure_simple = a / d;

        for (x, y) in [
            (general, simple),
            (general, observed),
            (eq18, pure_general),
            (eq18, pure_simple),
        ] {
            worst = worst.max((x / y - 1.0).abs());
        }
    }
    let bath = reference_bath();
    let r = 10.0;
    let cat = make_cat_state(1.0, r).unwrap();
    let zurek = decoherence_time(&cat, &bath).unwrap() / (bath.thermal_wavelength_sq() / (2.0 * bath.gamma * r * r));
    let ok = worst < 0.01 && (0.98..=1.02).contains(&zurek);
    report(
        5,
        ok,
        &format!("max relative disagreement {worst:.3e} over 50 draws; cat r = 10 sigma ratio {zurek:.5}"),
    );
    assert!(ok);
}

#[test]
fn criterion_6_fit_round_trip() {
    let cfg = ScenarioConfig::default();
    let table = sweep::run_sweep(&cfg).unwrap();
    let mut csv = Vec::new();
    sweep::write_csv(&table, &mut csv, false).unwrap();
    let clean = fit::run_fit(csv.as_slice(), 1.0).unwrap();
    let (gamma, kt) = (1e-3, 5e4);
    let clean_err = ((clean.gamma_hat / gamma - 1.0).abs(), (clean.temperature_hat / kt - 1.0).abs());

    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let noise = Normal::new(0.0, 0.01).unwrap();
    let mut noisy = String::from("t,S\n");
    for row in &table.rows {
        let s = row.s * (1.0 + noise.sample(&mut rng));
        noisy.push_str(&format!("{},{}\n", sweep::format_number(row.t), sweep::format_number(s)));
    }
    let rough = fit::run_fit(noisy.as_bytes(), 1.0).unwrap();
    let noisy_err = ((rough.gamma_hat / gamma - 1.0).abs(), (rough.temperature_hat / kt - 1.0).abs());

    let ok = clean_err.0 < 0.05 && clean_err.1 < 0.05 && noisy_err.0 < 0.10 && noisy_err.1 < 0.10;
    report(
        6,
        ok,
        &format!(
            "noiseless: gamma {:.2}%, kT {:.2}%; 1% noise (seed 42): gamma {:.2}%, kT {:.2}%",
            100.0 * clean_err.0,
            100.0 * clean_err.1,
            100.0 * noisy_err.0,
            100.0 * noisy_err.1
        ),
    );
    assert!(ok);
}

/// Least squares for `S(t) − 1 = Σ_{k=1..4} c_k t^k` in the scaled variable `u = t/t_max`.
fn small_time_polynomial(times: &[f64], values: &[f64]) -> [f64; 4] {
    let scale = times.iter().copied().fold(0.0, f64::max);
    let mut ata = [[0.0; 4]; 4];
    let mut atb = [0.0; 4];
    for (&t, &s) in times.iter().zip(values) {
        let u = t / scale;
        let basis = [u, u * u, u.powi(3), u.powi(4)];
        for i in 0..4 {
            atb[i] += basis[i] * (s - 1.0);
            for j in 0..4 {
                ata[i][j] += basis[i] * basis[j];
            }
        }
    }
    // Gaussian elimination with partial pivoting.
    for col in 0..4 {
        let piv = (col..4).max_by(|&i, &j| ata[i][col].abs().total_cmp(&ata[j][col].abs())).unwrap();
        ata.swap(col, piv);
        atb.swap(col, piv);
        for row in col + 1..4 {
            let f = ata[row][col] / ata[col][col];
            for k in col..4 {
                ata[row][k] -= f * ata[col][k];
            }
            atb[row] -= f * atb[col];
        }
    }
    let mut x = [0.0; 4];
    for i in (0..4).rev() {
        let tail: f64 = (i + 1..4).map(|k| ata[i][k] * x[k]).sum();
        x[i] = (atb[i] - tail) / ata[i][i];
    }
    std::array::from_fn(|k| x[k] / scale.powi(k as i32 + 1))
}

#[test]
fn criterion_7_unitary_limit() {
    let bath = BathParams::new(0.0, 0.0).unwrap();
    let times: Vec<f64> = (1..=40).map(|i| 0.05 * i as f64 / 40.0).collect();
    let values: Vec<f64> = times.iter().map(|&t| s_at(1.0, 0.0, &bath, t)).collect();
    let c = small_time_polynomial(&times, &values);
    // Free Gaussian σ = 1, ħ = m = 1: Δp² = 1/2 and ΔH² = (Δp²)²/(2m²) = 1/8.
    let dp2 = 0.5;
    let dh2 = dp2 * dp2 / 2.0;
    let quad_err = (-c[1] / dh2 - 1.0).abs();
    let ok = c[0].abs() < 1e-9 && quad_err < 0.01;
    report(
        7,
        ok,
        &format!("linear coefficient {:.3e}, quadratic {:.8} vs -dH^2 = {:.8}", c[0], c[1], -dh2),
    );
    assert!(ok);
}

fn random_state(rng: &mut ChaCha8Rng) -> qbd_core::GaussianMixtureState {
    match rng.random_range(0..4) {
        0 => {
            let a = rng.random_range(0.3..4.0);
            make_gaussian_ac(a, a * rng.random_range(0.0..0.9)).unwrap()
        }
        1 => {
            let a = rng.random_range(0.3..4.0);
            make_displaced_gaussian(a, a * rng.random_range(0.0..0.9), rng.random_range(-2.0..2.0)).unwrap()
        }
        2 => make_cat_state(rng.random_range(0.5..2.0), rng.random_range(0.0..4.0)).unwrap(),
        _ => make_mehler_thermal(rng.random_range(0.0..0.9), rng.random_range(0.5..2.0), 1.0, 1.0, true).unwrap(),
    }
}

fn random_bath(rng: &mut ChaCha8Rng) -> BathParams {
    BathParams::new(10f64.powf(rng.random_range(-4.0..-1.0)), 10f64.powf(rng.random_range(-1.0..2.0))).unwrap()
}

/// Adaptive quadrature over `[a, b]` started from `pieces` panels, so that a narrow
/// peak cannot slip between the nodes of a single initial rule.
fn integrate_split(f: impl Fn(f64) -> f64, a: f64, b: f64, pieces: usize, abs: f64, rel: f64) -> f64 {
    let h = (b - a) / pieces as f64;
    (0..pieces)
        .map(|k| integrate(&f, a + k as f64 * h, a + (k + 1) as f64 * h, abs / pieces as f64, rel).unwrap())
        .sum()
}

fn integral_by_quadrature(q: &ComplexSym2, v: [C64; 2]) -> C64 {
    // |integrand| ≤ exp(−½λ_min|z|² + |V||z|): integrate out to 12 widths past the shifted peak.
    let (l1, l2) = q.real_part_eigenvalues();
    let lmin = l1.min(l2);
    let vn = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
    let r = 12.0 / lmin.sqrt() + 2.0 * vn / lmin;
    let pieces = (2.0 * r * l1.max(l2).sqrt()).ceil() as usize;
    let f = |x: f64, y: f64| {
        let z = [C64::from(x), C64::from(y)];
        (-0.5 * q.bilinear(z, z) + v[0] * x + v[1] * y).exp()
    };
    let part = |pick: fn(C64) -> f64| {
        integrate_split(|x| integrate_split(|y| pick(f(x, y)), -r, r, pieces, 1e-14, 1e-12), -r, r, pieces, 1e-13, 1e-11)
    };
    C64::new(part(|z| z.re), part(|z| z.im))
}

#[test]
fn criterion_8_property_suites() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut failures: Vec<String> = Vec::new();
    let mut fail = |suite: &str, case: usize, what: String| failures.push(format!("{suite}#{case}: {what}"));

    for case in 0..100 {
        // Gaussian integral against tensor quadrature.
        let m11 = C64::new(rng.random_range(0.5..3.0), rng.random_range(-1.0..1.0));
        let m22 = C64::new(rng.random_range(0.5..3.0), rng.random_range(-1.0..1.0));
        let bound = 0.9 * (m11.re * m22.re).sqrt();
        let m12 = C64::new(rng.random_range(-bound..bound), rng.random_range(-1.0..1.0));
        let q = ComplexSym2::new(m11, m12, m22);
        let mut v = [C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)); 2];
        v[1] = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let norm = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
        if norm > 2.0 {
            v = [v[0] * (2.0 / norm), v[1] * (2.0 / norm)];
        }
        if q.check_normalizable("property").is_ok() {
            let exact = gaussian_integral_2d(&q, v).unwrap();
            let quad = integral_by_quadrature(&q, v);
            if (exact - quad).norm() > 1e-8 * exact.norm() {
                fail("integral", case, format!("{exact} vs {quad} for Q = {q:?}, V = {v:?}"));
            }
        }

        // Purity bounds and overlap symmetry.
        let state = random_state(&mut rng);
        let p = purity(&state).unwrap();
        let self_overlap = hs_overlap(&state, &state).unwrap();
        if !(p > 0.0 && p <= 1.0 + 1e-9) || (self_overlap.re - p).abs() > 1e-12 || self_overlap.im.abs() > 1e-12 {
            fail("purity", case, format!("purity {p}, overlap {self_overlap}"));
        }

        // Trace and Hermiticity under propagation.
        let bath = random_bath(&mut rng);
        let t = 10f64.powf(rng.random_range(-3.0..4.0));
        let out = propagate_state(&state, &free_expansion_coefficients(&bath, t).unwrap(), &bath).unwrap();
        let tr = trace_norm(&out).unwrap();
        if (tr - 1.0).abs() > 1e-9 {
            fail("trace", case, format!("trace {tr} at t = {t}"));
        }
        let sd = position_variance(&out).unwrap().sqrt();
        let pts: Vec<(f64, f64)> = (0..6)
            .map(|_| (sd * rng.random_range(-2.0..2.0), sd * rng.random_range(-2.0..2.0)))
            .collect();
        let scale = pts.iter().map(|&(x, y)| evaluate_kernel(&out, x, y).norm()).fold(0.0, f64::max);
        for &(x, y) in &pts {
            let d = (evaluate_kernel(&out, x, y) - evaluate_kernel(&out, y, x).conj()).norm();
            if d > 1e-10 * scale.max(1e-300) {
                fail("hermiticity", case, format!("defect {d:e} at ({x}, {y})"));
            }
        }

        // Variance asymptotes of the free Gaussian. The printed laws 4Dt³/3 (τ_D ≪ t ≪ τ_R)
        // and 2kTt/(mγ) (t ≫ τ_R) describe b²/(a−c); the sampled variance is half of it.
        let gamma = 10f64.powf(rng.random_range(-6.0..-4.0));
        let d = 10f64.powf(rng.random_range(1.5..3.0));
        let bath = BathParams::new(gamma, d).unwrap();
        let sigma = rng.random_range(0.5..2.0);
        let g = make_gaussian(sigma).unwrap();
        let a = 1.0 / (sigma * sigma);
        let spread = |t: f64| {
            let co = free_expansion_coefficients(&bath, t).unwrap();
            let b = scaling_factor(a, 0.0, &co, &bath);
            let var = position_variance(&propagate_state(&g, &co, &bath).unwrap()).unwrap();
            (b * b / a, 2.0 * var)
        };
        let t_mid = (1e3 / d).min(1e-3 / gamma);
        let t_late = 1e4 / gamma;
        let mid_law = 4.0 * d * t_mid.powi(3) / 3.0;
        let late_law = 2.0 * bath.temperature() * t_late / (bath.mass * gamma);
        let (b_mid, v_mid) = spread(t_mid);
        let (b_late, v_late) = spread(t_late);
        for (what, ratio) in [
            ("b^2/a mid", b_mid / mid_law),
            ("2 var mid", v_mid / mid_law),
            ("b^2/a late", b_late / late_law),
            ("2 var late", v_late / late_law),
        ] {
            if (ratio - 1.0).abs() > 0.02 {
                fail("variance", case, format!("{what}: ratio {ratio}"));
            }
        }

        // Subexponential ratio on the late closed-form curve.
        let times = log_spaced(10.0 / gamma, 1e4 / gamma, 24);
        let values: Vec<f64> = times.iter().map(|&t| s_at(1.0, 0.0, &bath, t)).collect();
        let curve = SurvivalCurve::new(times, values, "property").unwrap();
        let rep = subexponential_check(&curve, 10.0 / gamma).unwrap();
        if !rep.ratio_decreasing {
            fail("subexponential", case, format!("{rep:?}"));
        }
    }
    let ok = failures.is_empty();
    report(
        8,
        ok,
        &format!(
            "{} failures over 100 cases of integral, purity, trace, hermiticity, variance and subexponential suites{}",
            failures.len(),
            failures.first().map_or(String::new(), |f| format!("; first: {f}"))
        ),
    );
    assert!(ok, "{failures:#?}");
}
