//! Residuals, vorticity sources, energy functionals and balance checks.

pub mod energy;
pub mod identity;
pub mod residuals;
pub mod vorticity;

pub use energy::{bootstrap_energies, energy_f, energy_fbar, EnergyOptions, EnergyRecord, NormTable};
pub use identity::{check_identity, identity_terms, IdentityReport, IdentityTerms};
pub use residuals::{residuals, InitialLayer, ReferenceSample, ResidualSet};
pub use vorticity::{vorticity_sources, VorticitySources};

use crate::error::Result;
use crate::ns::NsTrajectory;
use crate::relax::{RelaxParams, RelaxState};

/// Accumulates energy records (and optionally balance terms) for the samples
/// of one run against a reference trajectory.
pub struct Recorder<'a> {
    params: RelaxParams,
    reference: &'a NsTrajectory,
    opts: EnergyOptions,
    nonlinear: bool,
    track_identity: bool,
    layer: Option<InitialLayer>,
    pub energies: Vec<EnergyRecord>,
    pub identity: Vec<IdentityTerms>,
}

impl<'a> Recorder<'a> {
    pub fn new(
        params: &RelaxParams,
        reference: &'a NsTrajectory,
        opts: EnergyOptions,
        nonlinear: bool,
        track_identity: bool,
    ) -> Recorder<'a> {
        Recorder {
            params: *params,
            reference,
            opts,
            nonlinear,
            track_identity,
            layer: None,
            energies: Vec::new(),
            identity: Vec::new(),
        }
    }

    /// Records one sample; the first sample fixes the initial-layer data.
    pub fn observe(&mut self, s: &RelaxState) -> Result<()> {
        let r = ReferenceSample::from_trajectory(self.reference, s.t)?;
        if self.layer.is_none() {
            self.layer = Some(InitialLayer::new(s, &r, &self.params)?);
        }
        let layer = self.layer.as_ref().expect("set above");
        self.energies
            .push(bootstrap_energies(s, &r, &self.params, layer, &self.opts)?);
        if self.track_identity {
            self.identity
                .push(identity_terms(s, &self.params, Some(&r), self.nonlinear)?);
        }
        Ok(())
    }
}
