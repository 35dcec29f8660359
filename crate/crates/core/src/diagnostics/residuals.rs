//! Rescaled differences between a relaxation state and the limit solution.

use crate::error::{Error, Result};
use crate::ns::{pressure_from_velocity, stress_tensor, NsTrajectory};
use crate::relax::state::Rates;
use crate::relax::{RelaxParams, RelaxState};
use crate::spectral::Field;

/// Limit state `(p, u, U)` at one time, with `p` and `U` derived from `u`.
#[derive(Clone, Debug)]
pub struct ReferenceSample {
    pub t: f64,
    pub u: Field,
    pub p: Field,
    pub stress: Field,
    /// Bound on the time-interpolation error of `u` (zero at stored samples).
    pub interp_error: f64,
}

impl ReferenceSample {
    pub fn from_velocity(u: Field, t: f64) -> Result<ReferenceSample> {
        Ok(ReferenceSample {
            t,
            p: pressure_from_velocity(&u)?,
            stress: stress_tensor(&u)?,
            u,
            interp_error: 0.0,
        })
    }

    /// Hermite-interpolated reference at `t`; fails outside the trajectory.
    pub fn from_trajectory(reference: &NsTrajectory, t: f64) -> Result<ReferenceSample> {
        let at = reference.at(t)?;
        let mut s = ReferenceSample::from_velocity(at.u, t)?;
        s.interp_error = at.error_bound;
        Ok(s)
    }
}

/// Initial values used by the initial-layer corrections.
#[derive(Clone, Debug)]
pub struct InitialLayer {
    pub t0: f64,
    /// `V(t0)`.
    pub stress0: Field,
    /// `dU/dt (t0)` from the stress equation.
    pub rate0: Field,
}

impl InitialLayer {
    pub fn new(initial: &RelaxState, reference: &ReferenceSample, params: &RelaxParams) -> Result<InitialLayer> {
        check_time(initial, reference)?;
        let rates = initial.rates(params)?;
        Ok(InitialLayer {
            t0: initial.t,
            stress0: initial.stress.sub(&reference.stress)?.scale(params.delta.sqrt()),
            rate0: rates.dstress,
        })
    }

    fn factor(&self, t: f64, delta: f64) -> f64 {
        (-(t - self.t0) / delta).exp()
    }
}

/// `q = sqrt(eps)(p - p_ref)`, `v = u - u_ref`, `V = sqrt(delta)(U - U_ref)`,
/// and the layer-corrected `V1` and `U1`.
#[derive(Clone, Debug)]
pub struct ResidualSet {
    pub t: f64,
    pub q: Field,
    pub v: Field,
    pub stress: Field,
    pub stress_corrected: Field,
    pub rate_corrected: Field,
    pub interp_error: f64,
}

fn check_time(relax: &RelaxState, reference: &ReferenceSample) -> Result<()> {
    let slack = 1e-12 * relax.t.abs().max(1.0);
    if (relax.t - reference.t).abs() > slack {
        return Err(Error::TimeWindow {
            t: relax.t,
            start: reference.t,
            end: reference.t,
        });
    }
    relax.p.check_grid(&reference.u)
}

/// Residuals with precomputed rates of `relax`.
pub fn residuals_with_rates(
    relax: &RelaxState,
    rates: &Rates,
    reference: &ReferenceSample,
    params: &RelaxParams,
    layer: &InitialLayer,
) -> Result<ResidualSet> {
    check_time(relax, reference)?;
    let q = relax.p.sub(&reference.p)?.scale(params.epsilon.sqrt());
    let v = relax.u.sub(&reference.u)?;
    let stress = relax.stress.sub(&reference.stress)?.scale(params.delta.sqrt());
    let f = layer.factor(relax.t, params.delta);
    let stress_corrected = stress.axpy(-f, &layer.stress0)?;
    let rate_corrected = rates.dstress.axpy(-f, &layer.rate0)?;
    Ok(ResidualSet {
        t: relax.t,
        q,
        v,
        stress,
        stress_corrected,
        rate_corrected,
        interp_error: reference.interp_error,
    })
}

pub fn residuals(
    relax: &RelaxState,
    reference: &ReferenceSample,
    params: &RelaxParams,
    layer: &InitialLayer,
) -> Result<ResidualSet> {
    let rates = relax.rates(params)?;
    residuals_with_rates(relax, &rates, reference, params, layer)
}
