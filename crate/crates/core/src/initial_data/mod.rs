//! Base flows, single-mode perturbations and regime-saturating initial data.

pub mod preset;
pub mod regime;

pub use preset::{BaseFlow, Preparation, RegimePreset, Theorem};
pub use regime::{build_regime, Certificate, CertificateEntry};

use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{Field, Grid, Rank};

/// Taylor-Green vortex of amplitude `a`; divergence-free by construction.
pub fn taylor_green(grid: &Arc<Grid>, amplitude: f64) -> Field {
    let tp = 2.0 * PI;
    let d = grid.dim();
    Field::from_fn(grid, Rank::Vector, |c, x| {
        let z = if d == 3 { (tp * x[2]).cos() } else { 1.0 };
        match c {
            0 => amplitude * (tp * x[0]).sin() * (tp * x[1]).cos() * z,
            1 => -amplitude * (tp * x[0]).cos() * (tp * x[1]).sin() * z,
            _ => 0.0,
        }
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationKind {
    Solenoidal,
    Gradient,
}

/// Direction data of a single-mode perturbation: the mode varies along
/// `axis`; a solenoidal mode points along `polarization != axis`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Orientation {
    pub axis: usize,
    pub polarization: usize,
    pub sign: i8,
}

impl Default for Orientation {
    fn default() -> Self {
        Orientation {
            axis: 0,
            polarization: 1,
            sign: 1,
        }
    }
}

/// Single-frequency perturbation with `||v||_{L^2} = amplitude` at wavenumber
/// `kp`: solenoidal `sqrt 2 cos(2 pi kp x_axis) e_pol` or gradient
/// `sqrt 2 sin(2 pi kp x_axis) e_axis`.
pub fn oriented_mode(
    grid: &Arc<Grid>,
    amplitude: f64,
    kp: usize,
    kind: PerturbationKind,
    o: Orientation,
) -> Result<Field> {
    let d = grid.dim();
    if kp == 0 || kp > grid.dealias_cutoff() {
        return Err(Error::InvalidArgument(format!(
            "perturbation wavenumber {kp} not in 1..={} on an n = {} grid; use a larger n",
            grid.dealias_cutoff(),
            grid.n()
        )));
    }
    if o.axis >= d || o.polarization >= d || (kind == PerturbationKind::Solenoidal && o.axis == o.polarization) {
        return Err(Error::InvalidArgument(format!("invalid orientation {o:?} in {d}D")));
    }
    let amp = amplitude * SQRT_2 * f64::from(o.sign.signum());
    let kk = 2.0 * PI * kp as f64;
    Ok(Field::from_fn(grid, Rank::Vector, |c, x| match kind {
        PerturbationKind::Solenoidal if c == o.polarization => amp * (kk * x[o.axis]).cos(),
        PerturbationKind::Gradient if c == o.axis => amp * (kk * x[o.axis]).sin(),
        _ => 0.0,
    }))
}

/// [`oriented_mode`] along the first axis.
pub fn perturbation_mode(grid: &Arc<Grid>, amplitude: f64, kp: usize, kind: PerturbationKind) -> Result<Field> {
    oriented_mode(grid, amplitude, kp, kind, Orientation::default())
}
