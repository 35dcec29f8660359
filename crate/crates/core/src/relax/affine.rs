//! Forcing sources for the affine system.

use std::sync::Arc;

use super::state::flux;
use super::step::Forcing;
use crate::error::{Error, Result};
use crate::ns::NsTrajectory;
use crate::spectral::{Field, Grid, Rank};

/// Flux `u ⊗ u` of a reference trajectory, interpolated in time.
pub struct ReferenceForcing<'a> {
    pub reference: &'a NsTrajectory,
}

impl Forcing for ReferenceForcing<'_> {
    fn flux_at(&self, t: f64) -> Result<Field> {
        let at = self.reference.at(t).map_err(|e| match e {
            Error::TimeWindow { t, .. } => Error::ForcingGap(t),
            other => other,
        })?;
        Ok(flux(&at.u)?.0)
    }
}

/// Identically zero flux.
pub struct ZeroForcing {
    pub grid: Arc<Grid>,
}

impl Forcing for ZeroForcing {
    fn flux_at(&self, _t: f64) -> Result<Field> {
        Ok(Field::zeros(&self.grid, Rank::Tensor))
    }
}

/// Flux given by a closure.
pub struct FnForcing<F: Fn(f64) -> Result<Field>>(pub F);

impl<F: Fn(f64) -> Result<Field>> Forcing for FnForcing<F> {
    fn flux_at(&self, t: f64) -> Result<Field> {
        (self.0)(t)
    }
}
