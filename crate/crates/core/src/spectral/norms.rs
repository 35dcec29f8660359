//! Sobolev and Lebesgue norms, and the interpolation-inequality checker.

use serde::Serialize;

use super::field::Field;
use super::ops::gradient;
use crate::error::{Error, Result};

/// Squared `H^s` norm: `sum (1 + |2 pi k|^2)^s |c(k)|^2` over all components.
pub fn sobolev_sq(w: &Field, s: u32) -> Result<f64> {
    if s > 3 {
        return Err(Error::Unsupported(format!("Sobolev index s = {s}; use 0..=3")));
    }
    Ok(weighted_sq(w, |k2| (1.0 + k2).powi(s as i32)))
}

pub fn sobolev_norm(w: &Field, s: u32) -> Result<f64> {
    Ok(sobolev_sq(w, s)?.sqrt())
}

pub fn l2_sq(w: &Field) -> f64 {
    w.energy()
}

pub fn l2_norm(w: &Field) -> f64 {
    w.energy().sqrt()
}

pub fn h1_sq(w: &Field) -> f64 {
    weighted_sq(w, |k2| 1.0 + k2)
}

pub fn h1_norm(w: &Field) -> f64 {
    h1_sq(w).sqrt()
}

/// `||grad w||^2 = sum |2 pi k|^2 |c|^2`.
pub fn grad_sq(w: &Field) -> f64 {
    weighted_sq(w, |k2| k2)
}

/// `||grad^2 w||^2 = sum |2 pi k|^4 |c|^2` (all second derivatives).
pub fn hess_sq(w: &Field) -> f64 {
    weighted_sq(w, |k2| k2 * k2)
}

/// `||grad^3 w||^2 = sum |2 pi k|^6 |c|^2`.
pub fn grad3_sq(w: &Field) -> f64 {
    weighted_sq(w, |k2| k2 * k2 * k2)
}

/// `sum m(|2 pi k|^2) |c(k)|^2` over all components.
pub fn weighted_sq(w: &Field, m: impl Fn(f64) -> f64) -> f64 {
    let g = w.grid();
    let len = g.len();
    let weights: Vec<f64> = (0..len).map(|idx| m(g.wavenumber_sq(idx))).collect();
    let mut acc = 0.0;
    for c in 0..w.n_components() {
        for (x, wt) in w.component(c).iter().zip(&weights) {
            acc += wt * x.norm_sqr();
        }
    }
    acc
}

/// Lebesgue exponent accepted by [`lp_norm`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Lp {
    P2,
    P3,
    P4,
    P6,
    Inf,
}

impl Lp {
    pub fn from_f64(p: f64) -> Result<Lp> {
        match p {
            2.0 => Ok(Lp::P2),
            3.0 => Ok(Lp::P3),
            4.0 => Ok(Lp::P4),
            6.0 => Ok(Lp::P6),
            x if x.is_infinite() && x > 0.0 => Ok(Lp::Inf),
            _ => Err(Error::Unsupported(format!("L^p exponent {p}; use 2, 3, 4, 6 or inf"))),
        }
    }
}

/// Collocation `L^p` norm of the pointwise Euclidean magnitude. `Inf` is the
/// grid maximum, a lower bound of the true supremum.
pub fn lp_norm(w: &Field, p: Lp) -> f64 {
    let len = w.grid().len();
    let vals = w.to_physical();
    let mut mag2 = vec![0.0; len];
    for block in vals.chunks(len) {
        for (m, v) in mag2.iter_mut().zip(block) {
            *m += v * v;
        }
    }
    let mean_pow = |e: f64| mag2.iter().map(|m| m.powf(e / 2.0)).sum::<f64>() / len as f64;
    match p {
        Lp::P2 => (mag2.iter().sum::<f64>() / len as f64).sqrt(),
        Lp::P3 => mean_pow(3.0).cbrt(),
        Lp::P4 => mean_pow(4.0).powf(0.25),
        Lp::P6 => mean_pow(6.0).powf(1.0 / 6.0),
        Lp::Inf => mag2.iter().fold(0.0f64, |a, &m| a.max(m)).sqrt(),
    }
}

pub fn linf_norm(w: &Field) -> f64 {
    lp_norm(w, Lp::Inf)
}

/// Both sides of `||grad w|| <= ||w||^(1/2) ||grad^2 w||^(1/2)` and raw ratios
/// for the inequalities whose constants are domain dependent.
#[derive(Clone, Debug, Serialize)]
pub struct InterpolationReport {
    pub grad_l2: f64,
    pub rhs_grad_l2: f64,
    /// `lhs / rhs` of the constant-one inequality.
    pub ratio_grad: f64,
    pub pass_grad: bool,
    /// `||w||_L3 / (||w||^(1/2) ||w||_H1^(1/2))`.
    pub ratio_l3: f64,
    /// `||w||_L4 / (||w||^(1/4) ||w||_H1^(3/4))`.
    pub ratio_l4: f64,
    /// `||w||_Linf / (||w||_H1^(1/2) ||w||_H2^(1/2))`.
    pub ratio_linf: f64,
    /// `||grad w||_L4^2 / (||w||_Linf ||grad^2 w||)`; NaN when the denominator vanishes.
    pub ratio_grad_l4: f64,
}

pub const INTERPOLATION_TOL: f64 = 1e-9;

pub fn check_interpolation(w: &Field) -> Result<InterpolationReport> {
    let l2 = l2_norm(w);
    if l2 == 0.0 {
        return Err(Error::InvalidArgument(
            "interpolation check needs a nonzero field".into(),
        ));
    }
    let grad_l2 = grad_sq(w).sqrt();
    let hess = hess_sq(w).sqrt();
    let rhs = (l2 * hess).sqrt();
    let ratio_grad = if rhs > 0.0 { grad_l2 / rhs } else { 0.0 };
    let h1 = h1_norm(w);
    let h2 = sobolev_norm(w, 2)?;
    let grad = gradient(w)?;
    let linf = linf_norm(w);
    let gl4 = lp_norm(&grad, Lp::P4);
    let denom_e = linf * hess;
    Ok(InterpolationReport {
        grad_l2,
        rhs_grad_l2: rhs,
        ratio_grad,
        pass_grad: grad_l2 <= rhs * (1.0 + INTERPOLATION_TOL),
        ratio_l3: lp_norm(w, Lp::P3) / (l2.sqrt() * h1.sqrt()),
        ratio_l4: lp_norm(w, Lp::P4) / (l2.powf(0.25) * h1.powf(0.75)),
        ratio_linf: linf / (h1 * h2).sqrt(),
        ratio_grad_l4: if denom_e > 0.0 { gl4 * gl4 / denom_e } else { f64::NAN },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::field::Rank;
    use crate::spectral::grid::Grid;
    use std::f64::consts::PI;

    fn sin2pix(n: usize) -> Field {
        let g = Grid::new(2, n).unwrap();
        Field::from_fn(&g, Rank::Scalar, |_, x| (2.0 * PI * x[0]).sin())
    }

    #[test]
    fn sobolev_values() {
        let w = sin2pix(16);
        assert!((sobolev_norm(&w, 0).unwrap() - 0.5f64.sqrt()).abs() < 1e-14);
        let h1 = ((1.0 + 4.0 * PI * PI) / 2.0).sqrt();
        assert!((sobolev_norm(&w, 1).unwrap() - h1).abs() < 1e-12);
        assert!(sobolev_norm(&w, 4).is_err());
        let z = Field::zeros(w.grid(), Rank::Scalar);
        for s in 0..=3 {
            assert_eq!(sobolev_norm(&z, s).unwrap(), 0.0);
        }
    }

    #[test]
    fn lebesgue_values() {
        let w = sin2pix(64);
        assert!((lp_norm(&w, Lp::P4) - 0.375f64.powf(0.25)).abs() < 1e-14);
        assert!((lp_norm(&w, Lp::Inf) - 1.0).abs() < 1e-3);
        assert!((lp_norm(&w, Lp::P2) - l2_norm(&w)).abs() < 1e-14);
        let c = Field::from_fn(w.grid(), Rank::Scalar, |_, _| -2.5);
        for p in [Lp::P2, Lp::P3, Lp::P4, Lp::P6, Lp::Inf] {
            assert!((lp_norm(&c, p) - 2.5).abs() < 1e-13);
        }
        assert!(Lp::from_f64(5.0).is_err());
        assert_eq!(Lp::from_f64(f64::INFINITY).unwrap(), Lp::Inf);
    }

    #[test]
    fn interpolation_single_and_double_mode() {
        let w = sin2pix(32);
        let r = check_interpolation(&w).unwrap();
        assert!((r.grad_l2 - 2.0 * PI * 0.5f64.sqrt()).abs() < 1e-12);
        assert!((r.ratio_grad - 1.0).abs() < 1e-9);
        assert!(r.pass_grad);
        let two = Field::from_fn(w.grid(), Rank::Scalar, |_, x| {
            (2.0 * PI * x[0]).sin() + (6.0 * PI * x[0]).sin()
        });
        let r2 = check_interpolation(&two).unwrap();
        assert!(r2.ratio_grad < 1.0 - 1e-3);
        assert!(check_interpolation(&Field::zeros(w.grid(), Rank::Scalar)).is_err());
    }
}
