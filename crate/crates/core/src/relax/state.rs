use std::sync::Arc;

use num_complex::Complex64;

use super::params::RelaxParams;
use crate::error::{Error, Result};
use crate::spectral::ops::{components_physical, dealias_in_place, divergence, gradient};
use crate::spectral::{Field, Grid, Rank};

/// State `(p, u, U)` of the relaxation system (also used for the affine system).
#[derive(Clone, Debug)]
pub struct RelaxState {
    pub p: Field,
    pub u: Field,
    /// Stress-like tensor `U`.
    pub stress: Field,
    pub t: f64,
}

impl RelaxState {
    pub fn new(p: Field, u: Field, stress: Field, t: f64) -> Result<RelaxState> {
        p.expect_rank(Rank::Scalar)?;
        u.expect_rank(Rank::Vector)?;
        stress.expect_rank(Rank::Tensor)?;
        p.check_grid(&u)?;
        p.check_grid(&stress)?;
        Ok(RelaxState { p, u, stress, t })
    }

    pub fn zeros(grid: &Arc<Grid>) -> RelaxState {
        RelaxState {
            p: Field::zeros(grid, Rank::Scalar),
            u: Field::zeros(grid, Rank::Vector),
            stress: Field::zeros(grid, Rank::Tensor),
            t: 0.0,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.p.grid()
    }

    /// Component-major coefficients `(p, u_1..u_d, U_11..U_dd)`.
    pub fn pack(&self) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.p.coeffs().len() + self.u.coeffs().len() + self.stress.coeffs().len());
        out.extend_from_slice(self.p.coeffs());
        out.extend_from_slice(self.u.coeffs());
        out.extend_from_slice(self.stress.coeffs());
        out
    }

    pub fn unpack(grid: &Arc<Grid>, mut buf: Vec<Complex64>, t: f64) -> Result<RelaxState> {
        let len = grid.len();
        let d = grid.dim();
        if buf.len() != len * (1 + d + d * d) {
            return Err(Error::InvalidArgument("packed state has wrong length".into()));
        }
        let stress = buf.split_off(len * (1 + d));
        let u = buf.split_off(len);
        Ok(RelaxState {
            p: Field::from_coeffs(grid, Rank::Scalar, buf)?,
            u: Field::from_coeffs(grid, Rank::Vector, u)?,
            stress: Field::from_coeffs(grid, Rank::Tensor, stress)?,
            t,
        })
    }

    pub fn is_finite(&self) -> bool {
        self.p.is_finite() && self.u.is_finite() && self.stress.is_finite()
    }

    /// `self + a * other` (time taken from `self`).
    pub fn axpy(&self, a: f64, other: &RelaxState) -> Result<RelaxState> {
        Ok(RelaxState {
            p: self.p.axpy(a, &other.p)?,
            u: self.u.axpy(a, &other.u)?,
            stress: self.stress.axpy(a, &other.stress)?,
            t: self.t,
        })
    }

    pub fn scale(&self, a: f64) -> RelaxState {
        RelaxState {
            p: self.p.scale(a),
            u: self.u.scale(a),
            stress: self.stress.scale(a),
            t: self.t,
        }
    }

    /// Time derivatives from the right-hand sides of the system with
    /// momentum flux `w` in the stress equation.
    pub fn rates_with_flux(&self, params: &RelaxParams, w: &Field) -> Result<Rates> {
        let dp = divergence(&self.u)?.scale(-1.0 / params.epsilon);
        let du = divergence(&self.stress)?.add(&gradient(&self.p)?)?.scale(-1.0);
        let dstress = w.sub(&self.stress)?.sub(&gradient(&self.u)?)?.scale(1.0 / params.delta);
        Ok(Rates { dp, du, dstress })
    }

    /// Time derivatives of the relaxation system (dealiased `u ⊗ u`).
    pub fn rates(&self, params: &RelaxParams) -> Result<Rates> {
        let (w, _) = flux(&self.u)?;
        self.rates_with_flux(params, &w)
    }
}

/// `(dp/dt, du/dt, dU/dt)` evaluated from the equations.
#[derive(Clone, Debug)]
pub struct Rates {
    pub dp: Field,
    pub du: Field,
    pub dstress: Field,
}

/// Dealiased `u ⊗ u` and the grid maximum of `|u|`.
pub fn flux(u: &Field) -> Result<(Field, f64)> {
    u.expect_rank(Rank::Vector)?;
    let d = u.dim();
    let len = u.grid().len();
    let pu = components_physical(u);
    let mut umax2: f64 = 0.0;
    for x in 0..len {
        let m: f64 = (0..d).map(|i| pu[i][x] * pu[i][x]).sum();
        umax2 = umax2.max(m);
    }
    if !umax2.is_finite() {
        umax2 = f64::INFINITY;
    }
    let mut flat = vec![0.0; d * d * len];
    for i in 0..d {
        for j in i..d {
            for x in 0..len {
                let v = pu[i][x] * pu[j][x];
                flat[(i * d + j) * len + x] = v;
                flat[(j * d + i) * len + x] = v;
            }
        }
    }
    let mut w = Field::from_physical(u.grid(), Rank::Tensor, &flat)?;
    dealias_in_place(&mut w);
    Ok((w, umax2.sqrt()))
}
