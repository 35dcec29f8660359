//! Self-test suites run by `relaxns check`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::diagnostics::{check_identity, EnergyOptions, Recorder, ReferenceSample};
use crate::error::Result;
use crate::initial_data::taylor_green;
use crate::linalg::CMat;
use crate::ns::{run_ns, NsOptions};
use crate::relax::propagator::{generator, linear_propagator};
use crate::relax::{run_relax, RelaxParams, RelaxState, RunOptions};
use crate::spectral::norms::{check_interpolation, grad_sq, l2_sq, lp_norm, Lp};
use crate::spectral::ops::{curl, divergence, gradient};
use crate::spectral::random::band_limited;
use crate::spectral::{Field, Grid, Rank};

#[derive(Clone, Debug, Serialize)]
pub struct SuiteResult {
    pub name: String,
    pub cases: usize,
    /// Largest error measure over the cases.
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckReport {
    pub suites: Vec<SuiteResult>,
    pub passed: bool,
}

fn suite(name: &str, errors: &[f64], tolerance: f64) -> SuiteResult {
    let worst = if errors.iter().all(|e| e.is_finite()) {
        errors.iter().copied().fold(0.0, f64::max)
    } else {
        f64::NAN
    };
    SuiteResult {
        name: name.to_string(),
        cases: errors.len(),
        worst,
        tolerance,
        passed: worst <= tolerance,
    }
}

/// Single-mode derivatives against closed forms.
pub fn derivative_suite() -> Result<SuiteResult> {
    let mut errs = Vec::new();
    for dim in [2, 3] {
        let g = Grid::new(dim, 16)?;
        for k in [[1i64, 0, 0], [2, -3, 1], [0, 4, -2], [5, 5, 5]] {
            let kx = |x: [f64; 3]| 2.0 * PI * (0..dim).map(|i| k[i] as f64 * x[i]).sum::<f64>();
            let f = Field::from_fn(&g, Rank::Scalar, |_, x| kx(x).cos());
            let grad = gradient(&f)?.to_physical();
            let scale = 2.0 * PI * (0..dim).map(|i| (k[i] * k[i]) as f64).sum::<f64>().sqrt();
            let mut worst = 0.0f64;
            for i in 0..dim {
                for idx in 0..g.len() {
                    let exact = -2.0 * PI * k[i] as f64 * kx(g.point(idx)).sin();
                    worst = worst.max((grad[i * g.len() + idx] - exact).abs());
                }
            }
            errs.push(worst / scale);
        }
    }
    Ok(suite("derivatives", &errs, 1e-12))
}

/// `||grad v||^2 = ||div v||^2 + ||curl v||^2` on random band-limited fields.
pub fn hodge_suite(count: u64) -> Result<SuiteResult> {
    let mut errs = Vec::new();
    for dim in [2, 3] {
        let g = Grid::new(dim, 16)?;
        for seed in 0..count {
            let v = band_limited(&g, Rank::Vector, 5, 1.0, seed);
            let lhs = grad_sq(&v);
            let rhs = l2_sq(&divergence(&v)?) + l2_sq(&curl(&v)?);
            errs.push((lhs - rhs).abs() / lhs);
        }
    }
    Ok(suite("hodge", &errs, 1e-10))
}

/// Coefficient-space `L^2` norm against collocation quadrature.
pub fn parseval_suite(count: u64) -> Result<SuiteResult> {
    let mut errs = Vec::new();
    for dim in [2, 3] {
        let g = Grid::new(dim, 16)?;
        for seed in 0..count {
            for rank in [Rank::Scalar, Rank::Vector, Rank::Tensor] {
                let w = band_limited(&g, rank, 7, 0.5, 1000 + seed);
                let spectral = l2_sq(&w);
                let quad = lp_norm(&w, Lp::P2).powi(2);
                errs.push((spectral - quad).abs() / spectral);
            }
        }
    }
    Ok(suite("parseval", &errs, 1e-12))
}

/// Classical RK4 for `y' = L y` applied to the identity, with `h ||L||_1 <= 2e-3`.
pub fn rk4_exponential(l: &CMat, t: f64) -> CMat {
    let m = l.rows();
    let rho = l.norm1().max(1e-300);
    let steps = ((t * rho / 2e-3).ceil() as usize).max(1);
    let h = t / steps as f64;
    let mut cols: Vec<Vec<Complex64>> = (0..m)
        .map(|j| {
            (0..m)
                .map(|i| Complex64::new(if i == j { 1.0 } else { 0.0 }, 0.0))
                .collect()
        })
        .collect();
    let axpy = |y: &[Complex64], a: f64, k: &[Complex64]| -> Vec<Complex64> {
        y.iter().zip(k).map(|(y, k)| y + k * a).collect()
    };
    for _ in 0..steps {
        for y in cols.iter_mut() {
            let k1 = l.matvec(y);
            let k2 = l.matvec(&axpy(y, h / 2.0, &k1));
            let k3 = l.matvec(&axpy(y, h / 2.0, &k2));
            let k4 = l.matvec(&axpy(y, h, &k3));
            for i in 0..m {
                y[i] += (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) * (h / 6.0);
            }
        }
    }
    let mut data = vec![Complex64::new(0.0, 0.0); m * m];
    for (j, col) in cols.iter().enumerate() {
        for (i, x) in col.iter().enumerate() {
            data[i * m + j] = *x;
        }
    }
    CMat::from_rows(m, m, data)
}

/// `D M D^-1` with `D = diag(sqrt(eps), 1, .., sqrt(delta), ..)`, the scaling
/// in which the mode energy is the Euclidean norm.
pub fn balance_mode_matrix(m: &CMat, dim: usize, params: &RelaxParams) -> CMat {
    let d: Vec<f64> = (0..m.rows())
        .map(|i| match i {
            0 => params.epsilon.sqrt(),
            i if i <= dim => 1.0,
            _ => params.delta.sqrt(),
        })
        .collect();
    let mut out = m.clone();
    for r in 0..m.rows() {
        for c in 0..m.cols() {
            out[(r, c)] = m[(r, c)] * (d[r] / d[c]);
        }
    }
    out
}

/// Per-mode matrix exponential against RK4 integration of the mode ODE,
/// compared in the energy-balanced variables.
pub fn propagator_suite() -> Result<SuiteResult> {
    let mut errs = Vec::new();
    for (eps, delta) in [(1e-2, 1e-1), (1e-4, 1e-2)] {
        let params = RelaxParams::new(eps, delta)?;
        for k in [
            vec![2.0 * PI, 0.0],
            vec![2.0 * PI, -4.0 * PI],
            vec![2.0 * PI, 4.0 * PI, -2.0 * PI],
        ] {
            let dim = k.len();
            let lb = balance_mode_matrix(&generator(&k, &params), dim, &params);
            for dt in [delta / 10.0, delta, 10.0 * delta] {
                let exact = balance_mode_matrix(&linear_propagator(&k, &params, dt)?, dim, &params);
                let rk = rk4_exponential(&lb, dt);
                let diff = exact
                    .data()
                    .iter()
                    .zip(rk.data())
                    .map(|(a, b)| (a - b).norm())
                    .fold(0.0, f64::max);
                errs.push(diff);
            }
        }
    }
    Ok(suite("propagator", &errs, 1e-10))
}

/// Constant-one interpolation inequality on random fields, equality on single modes.
pub fn interpolation_suite(count: u64) -> Result<SuiteResult> {
    let mut errs = Vec::new();
    for dim in [2, 3] {
        let g = Grid::new(dim, 16)?;
        for seed in 0..count {
            let w = band_limited(&g, Rank::Vector, 6, 0.5, 2000 + seed);
            let r = check_interpolation(&w)?;
            errs.push((r.ratio_grad - 1.0).max(0.0));
        }
        let single = Field::from_fn(&g, Rank::Scalar, |_, x| (2.0 * PI * (3.0 * x[0] - 2.0 * x[1])).sin());
        errs.push((check_interpolation(&single)?.ratio_grad - 1.0).abs());
    }
    Ok(suite("interpolation", &errs, 1e-9))
}

/// Balance-law residual and mean drift on a short smooth 2D run.
pub fn identity_suite() -> Result<(SuiteResult, SuiteResult)> {
    let g = Grid::new(2, 16)?;
    let params = RelaxParams::new(1e-3, 0.02)?;
    let u0 = taylor_green(&g, 1.0).add(&band_limited(&g, Rank::Vector, 3, 1.0, 2).scale(0.2))?;
    let reference = run_ns(
        &u0,
        0.05,
        &NsOptions {
            dt: 5e-4,
            ..NsOptions::default()
        },
    )?;
    let r0 = ReferenceSample::from_velocity(reference.samples[0].u.clone(), 0.0)?;
    let init = RelaxState::new(r0.p.clone(), r0.u.clone(), r0.stress.clone(), 0.0)?;
    let opts = RunOptions {
        layer_sampling: false,
        ..RunOptions::default()
    };
    let mut rec = Recorder::new(&params, &reference, EnergyOptions::default(), true, true);
    let summary = run_relax(&init, &params, 0.05, 5e-4, &opts, |s, _| rec.observe(s))?;
    let report = check_identity(&rec.identity)?;
    let drift = summary.mean_drift_u.max(summary.mean_drift_p);
    Ok((
        suite("identity", &[report.max], 1e-2),
        suite("mean_drift", &[drift], 1e-12),
    ))
}

/// Runs every suite.
pub fn run_checks() -> Result<CheckReport> {
    let (identity, drift) = identity_suite()?;
    let suites = vec![
        derivative_suite()?,
        hodge_suite(50)?,
        parseval_suite(10)?,
        propagator_suite()?,
        interpolation_suite(50)?,
        identity,
        drift,
    ];
    let passed = suites.iter().all(|s| s.passed);
    Ok(CheckReport { suites, passed })
}
