//! Two-parameter hyperbolic relaxation system and the affine system.

pub mod affine;
pub mod params;
pub mod propagator;
pub mod state;
pub mod step;

pub use params::{RelaxParams, ScalingLaw};
pub use state::RelaxState;
pub use step::{relax_step, run_affine, run_relax, RunOptions, RunSummary, StepOptions, Stepper};
