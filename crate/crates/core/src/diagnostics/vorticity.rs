//! Vorticity and the vorticity source of the momentum flux, assembled two ways.

use crate::error::{Error, Result};
use crate::spectral::ops::{advect, cross2, curl, divergence, gradient, scalar_mul, self_outer};
use crate::spectral::{Field, Rank};

/// Vorticity of `u` and the source `curl div (u ⊗ u)` computed directly and
/// from the expanded product formula.
#[derive(Clone, Debug)]
pub struct VorticitySources {
    pub omega: Field,
    pub direct: Field,
    pub expanded: Field,
}

/// `curl div (u ⊗ u)` with the product dealiased.
pub fn source_direct(u: &Field) -> Result<Field> {
    curl(&divergence(&self_outer(u)?)?)
}

/// Expanded form of `curl div (u ⊗ u)`, every product dealiased:
/// 2D `u.grad w - u x grad(div u) + 2 (div u) w`,
/// 3D `curl(u div u) + u.grad w - w.grad u + w div u`.
pub fn source_expanded(u: &Field) -> Result<Field> {
    u.expect_rank(Rank::Vector)?;
    let omega = curl(u)?;
    let div = divergence(u)?;
    match u.dim() {
        2 => {
            let mut a = advect(u, &omega)?;
            a.axpy_in_place(-1.0, &cross2(u, &gradient(&div)?)?)?;
            a.axpy_in_place(2.0, &scalar_mul(&div, &omega)?)?;
            Ok(a)
        }
        3 => {
            let mut a = curl(&scalar_mul(&div, u)?)?;
            a.axpy_in_place(1.0, &advect(u, &omega)?)?;
            a.axpy_in_place(-1.0, &advect(&omega, u)?)?;
            a.axpy_in_place(1.0, &scalar_mul(&div, &omega)?)?;
            Ok(a)
        }
        d => Err(Error::DimensionMismatch(format!(
            "vorticity sources need d = 2 or 3, got {d}"
        ))),
    }
}

pub fn vorticity_sources(u: &Field) -> Result<VorticitySources> {
    Ok(VorticitySources {
        omega: curl(u)?,
        direct: source_direct(u)?,
        expanded: source_expanded(u)?,
    })
}

/// `d omega / dt = -curl div U` from the momentum equation.
pub fn vorticity_rate(stress: &Field) -> Result<Field> {
    Ok(curl(&divergence(stress)?)?.scale(-1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::norms::l2_norm;
    use crate::spectral::ops::project;
    use crate::spectral::random::band_limited;
    use crate::spectral::Grid;
    use std::f64::consts::PI;

    fn rel(a: &Field, b: &Field) -> f64 {
        l2_norm(&a.sub(b).unwrap()) / l2_norm(b).max(1e-300)
    }

    #[test]
    fn zero_velocity() {
        for d in [2, 3] {
            let g = Grid::new(d, 8).unwrap();
            let s = vorticity_sources(&Field::zeros(&g, Rank::Vector)).unwrap();
            assert_eq!(s.omega.max_abs_coeff(), 0.0);
            assert_eq!(s.direct.max_abs_coeff(), 0.0);
            assert_eq!(s.expanded.max_abs_coeff(), 0.0);
        }
    }

    #[test]
    fn assemblies_agree_on_compressible_fields() {
        for (d, n) in [(2usize, 24usize), (3, 12)] {
            let g = Grid::new(d, n).unwrap();
            for seed in 0..5 {
                let u = band_limited(&g, Rank::Vector, g.dealias_cutoff(), 1.0, seed);
                let s = vorticity_sources(&u).unwrap();
                assert!(rel(&s.expanded, &s.direct) < 1e-12, "d {d} seed {seed}");
            }
        }
    }

    #[test]
    fn divergence_free_reduces_to_incompressible_form() {
        // curl div(u ⊗ u) = u.grad w - w.grad u when div u = 0
        let g = Grid::new(3, 12).unwrap();
        let u = project(&band_limited(&g, Rank::Vector, 3, 1.0, 7)).unwrap();
        let omega = curl(&u).unwrap();
        let incompressible = advect(&u, &omega).unwrap().sub(&advect(&omega, &u).unwrap()).unwrap();
        let s = vorticity_sources(&u).unwrap();
        assert!(rel(&incompressible, &s.expanded) < 1e-10);
        assert!(rel(&incompressible, &s.direct) < 1e-10);
    }

    #[test]
    fn taylor_green_source_vanishes_in_2d() {
        // the 2D Taylor-Green vortex is a steady Euler flow: u.grad w = 0
        let g = Grid::new(2, 16).unwrap();
        let tp = 2.0 * PI;
        let u = Field::from_fn(&g, Rank::Vector, |c, x| {
            if c == 0 {
                (tp * x[0]).sin() * (tp * x[1]).cos()
            } else {
                -(tp * x[0]).cos() * (tp * x[1]).sin()
            }
        });
        let s = vorticity_sources(&u).unwrap();
        assert!(s.direct.max_abs_coeff() < 1e-12);
        assert!(s.expanded.max_abs_coeff() < 1e-12);
    }
}
