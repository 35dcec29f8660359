//! Numerical check of the vorticity energy balances along a sampled run.
//!
//! With `A_r = curl div (u ⊗ u)` of the relaxation velocity, `w_t = -curl div U`
//! and reference vorticity `w0` with source `A0`:
//!
//! ```text
//! d/dt Fbar/2 = -(delta ||w_t||^2 + ||grad w||^2) - <w + 2 delta w_t, A_r>
//! d/dt F/2    = T_I + T_II - ||grad (w - w0)||^2 - delta ||w_t||^2
//! T_I  = delta <w_t, A0 - lap w0 - 2 A_r>
//! T_II = -<w - w0, A_r - A0>
//! ```

use serde::Serialize;

use super::energy::energy_fbar;
use super::residuals::ReferenceSample;
use super::vorticity::{source_direct, vorticity_rate};
use crate::error::{Error, Result};
use crate::relax::state::flux;
use crate::relax::{RelaxParams, RelaxState};
use crate::spectral::norms::{grad_sq, l2_sq};
use crate::spectral::ops::{curl, divergence, laplacian};
use crate::spectral::Field;

/// Absolute floor of the relative residual denominator.
pub const RESIDUAL_FLOOR: f64 = 1e-14;

/// Energies and the right-hand sides of their balance laws at one sample.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct IdentityTerms {
    pub t: f64,
    pub fbar: f64,
    pub rhs_fbar: f64,
    pub f: Option<f64>,
    pub rhs_f: Option<f64>,
    pub t_i: Option<f64>,
    pub t_ii: Option<f64>,
}

/// Evaluates the balance terms. `nonlinear = false` takes `A_r = 0`, matching
/// runs without the quadratic source.
pub fn identity_terms(
    relax: &RelaxState,
    params: &RelaxParams,
    reference: Option<&ReferenceSample>,
    nonlinear: bool,
) -> Result<IdentityTerms> {
    let delta = params.delta;
    let omega = curl(&relax.u)?;
    let rate = vorticity_rate(&relax.stress)?;
    let source = if nonlinear {
        curl(&divergence(&flux(&relax.u)?.0)?)?
    } else {
        Field::zeros(relax.grid(), omega.rank())
    };
    let dissipation = delta * l2_sq(&rate) + grad_sq(&omega);
    let rhs_fbar = -dissipation - omega.axpy(2.0 * delta, &rate)?.inner(&source)?;
    let fbar = energy_fbar(relax, params)?;
    let mut out = IdentityTerms {
        t: relax.t,
        fbar,
        rhs_fbar,
        f: None,
        rhs_f: None,
        t_i: None,
        t_ii: None,
    };
    if let Some(r) = reference {
        let omega0 = curl(&r.u)?;
        let source0 = source_direct(&r.u)?;
        let diff = omega.sub(&omega0)?;
        let forcing = source0.sub(&laplacian(&omega0))?.axpy(-2.0, &source)?;
        let t_i = delta * rate.inner(&forcing)?;
        let t_ii = -diff.inner(&source.sub(&source0)?)?;
        let dw = rate.scale(delta);
        let f = l2_sq(&diff.add(&dw)?) + l2_sq(&dw) + 2.0 * delta * grad_sq(&omega);
        out.f = Some(f);
        out.rhs_f = Some(t_i + t_ii - grad_sq(&diff) - delta * l2_sq(&rate));
        out.t_i = Some(t_i);
        out.t_ii = Some(t_ii);
    }
    Ok(out)
}

/// Relative residuals of the balance laws at interior samples.
#[derive(Clone, Debug, Serialize)]
pub struct IdentityReport {
    pub t: Vec<f64>,
    pub fbar_residual: Vec<f64>,
    pub max: f64,
    pub mean: f64,
    pub f_residual: Option<Vec<f64>>,
    pub f_max: Option<f64>,
    pub f_mean: Option<f64>,
    pub t_i: Option<Vec<f64>>,
    pub t_ii: Option<Vec<f64>>,
}

/// Second-order derivative at the middle of three possibly unequal samples.
fn centered(t: [f64; 3], y: [f64; 3]) -> f64 {
    let (h1, h2) = (t[1] - t[0], t[2] - t[1]);
    -h2 / (h1 * (h1 + h2)) * y[0] + (h2 - h1) / (h1 * h2) * y[1] + h1 / (h2 * (h1 + h2)) * y[2]
}

fn relative(lhs: f64, rhs: f64) -> f64 {
    (lhs - rhs).abs() / (rhs.abs() + RESIDUAL_FLOOR)
}

fn stats(r: &[f64]) -> (f64, f64) {
    let max = r.iter().copied().fold(0.0, f64::max);
    (max, r.iter().sum::<f64>() / r.len() as f64)
}

/// Compares centered differences of the sampled energies with the balance
/// right-hand sides. Samples must be in increasing time order.
pub fn check_identity(terms: &[IdentityTerms]) -> Result<IdentityReport> {
    if terms.len() < 3 {
        return Err(Error::InsufficientPoints(format!(
            "identity check needs at least 3 samples, got {}",
            terms.len()
        )));
    }
    let with_f = terms.iter().all(|x| x.f.is_some());
    let mut t = Vec::new();
    let mut res = Vec::new();
    let mut res_f = Vec::new();
    for w in terms.windows(3) {
        let times = [w[0].t, w[1].t, w[2].t];
        if !(times[1] > times[0] && times[2] > times[1]) {
            return Err(Error::InvalidArgument(format!(
                "samples not strictly increasing in time near t = {:e}",
                times[1]
            )));
        }
        t.push(times[1]);
        let d = centered(times, [w[0].fbar, w[1].fbar, w[2].fbar]) / 2.0;
        res.push(relative(d, w[1].rhs_fbar));
        if with_f {
            let f = |i: usize| w[i].f.expect("checked");
            let d = centered(times, [f(0), f(1), f(2)]) / 2.0;
            res_f.push(relative(d, w[1].rhs_f.expect("set with f")));
        }
    }
    let (max, mean) = stats(&res);
    let interior = &terms[1..terms.len() - 1];
    let (f_residual, f_max, f_mean, t_i, t_ii) = if with_f {
        let (m, a) = stats(&res_f);
        (
            Some(res_f),
            Some(m),
            Some(a),
            Some(interior.iter().map(|x| x.t_i.unwrap_or(0.0)).collect()),
            Some(interior.iter().map(|x| x.t_ii.unwrap_or(0.0)).collect()),
        )
    } else {
        (None, None, None, None, None)
    };
    Ok(IdentityReport {
        t,
        fbar_residual: res,
        max,
        mean,
        f_residual,
        f_max,
        f_mean,
        t_i,
        t_ii,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ns::{run_ns, NsOptions};
    use crate::relax::{run_relax, RunOptions, StepOptions};
    use crate::spectral::random::band_limited;
    use crate::spectral::{Grid, Rank};
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn taylor_green(g: &Arc<Grid>, a: f64) -> Field {
        let tp = 2.0 * PI;
        Field::from_fn(g, Rank::Vector, |c, x| {
            if c == 0 {
                a * (tp * x[0]).sin() * (tp * x[1]).cos()
            } else {
                -a * (tp * x[0]).cos() * (tp * x[1]).sin()
            }
        })
    }

    fn collect(
        init: &RelaxState,
        params: &RelaxParams,
        t_end: f64,
        dt: f64,
        nonlinear: bool,
        reference: Option<&crate::ns::NsTrajectory>,
    ) -> Vec<IdentityTerms> {
        let opts = RunOptions {
            step: StepOptions {
                nonlinear,
                ..StepOptions::default()
            },
            layer_sampling: false,
            ..RunOptions::default()
        };
        let mut terms = Vec::new();
        run_relax(init, params, t_end, dt, &opts, |s, _| {
            let r = match reference {
                Some(tr) => Some(ReferenceSample::from_trajectory(tr, s.t)?),
                None => None,
            };
            terms.push(identity_terms(s, params, r.as_ref(), nonlinear)?);
            Ok(())
        })
        .unwrap();
        terms
    }

    #[test]
    fn zero_trajectory_has_zero_residual() {
        let g = Grid::new(2, 8).unwrap();
        let p = RelaxParams::new(0.1, 0.1).unwrap();
        let terms = collect(&RelaxState::zeros(&g), &p, 0.05, 0.01, true, None);
        let rep = check_identity(&terms).unwrap();
        assert_eq!(rep.max, 0.0);
        assert!(check_identity(&terms[..2]).is_err());
    }

    #[test]
    fn linear_regime_converges_at_second_order() {
        let g = Grid::new(2, 16).unwrap();
        let p = RelaxParams::new(0.02, 0.05).unwrap();
        let mut init = RelaxState::zeros(&g);
        init.u = band_limited(&g, Rank::Vector, 2, 1.0, 11);
        init.stress = band_limited(&g, Rank::Tensor, 2, 1.0, 12);
        let mut errs = Vec::new();
        for dt in [4e-3, 2e-3, 1e-3] {
            let rep = check_identity(&collect(&init, &p, 0.04, dt, false, None)).unwrap();
            errs.push(rep.max);
        }
        assert!(errs[2] < 1e-3, "{errs:?}");
        for w in errs.windows(2) {
            let slope = (w[0] / w[1]).log2();
            assert!((slope - 2.0).abs() < 0.2, "{errs:?}");
        }
    }

    #[test]
    fn nonlinear_run_with_reference_balances() {
        let g = Grid::new(2, 16).unwrap();
        let p = RelaxParams::new(1e-3, 0.02).unwrap();
        let u0 = taylor_green(&g, 1.0)
            .add(&band_limited(&g, Rank::Vector, 3, 1.0, 2).scale(0.2))
            .unwrap();
        let reference = run_ns(
            &u0,
            0.05,
            &NsOptions {
                dt: 5e-4,
                ..NsOptions::default()
            },
        )
        .unwrap();
        let u = reference.samples[0].u.clone();
        let r0 = ReferenceSample::from_velocity(u.clone(), 0.0).unwrap();
        let init = RelaxState::new(r0.p.clone(), u, r0.stress.clone(), 0.0).unwrap();
        let terms = collect(&init, &p, 0.05, 5e-4, true, Some(&reference));
        let rep = check_identity(&terms).unwrap();
        assert!(rep.max < 1e-2, "fbar residual {}", rep.max);
        assert!(rep.f_max.unwrap() < 5e-2, "f residual {}", rep.f_max.unwrap());
        assert_eq!(rep.t_i.as_ref().unwrap().len(), rep.t.len());
    }

    #[test]
    fn centered_difference_is_exact_on_quadratics() {
        let t = [0.0, 0.1, 0.35];
        let y = t.map(|s| 3.0 * s * s - s + 2.0);
        assert!((centered(t, y) - (6.0 * 0.1 - 1.0)).abs() < 1e-12);
    }
}
