//! Exact spectral differential operators, Leray projection, dealiasing and
//! dealiased pointwise products.

use std::sync::Arc;

use num_complex::Complex64;

use super::field::{Field, Rank};
use super::grid::Grid;
use crate::error::{Error, Result};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Gradient: scalar to vector, vector to tensor with `(grad u)_ij = d_j u_i`.
pub fn gradient(f: &Field) -> Result<Field> {
    let g = f.grid().clone();
    let d = g.dim();
    let out_rank = match f.rank() {
        Rank::Scalar => Rank::Vector,
        Rank::Vector => Rank::Tensor,
        Rank::Tensor => {
            return Err(Error::RankMismatch {
                expected: "scalar or vector",
                found: "tensor",
            })
        }
    };
    let mut out = Field::zeros(&g, out_rank);
    for i in 0..f.n_components() {
        let src = f.component(i);
        for j in 0..d {
            let dst = out.component_mut(i * d + j);
            for idx in 0..g.len() {
                dst[idx] = I * g.wavevector(idx)[j] * src[idx];
            }
        }
    }
    Ok(out)
}

/// Divergence: vector to scalar, tensor to vector with `(div U)_i = sum_j d_j U_ij`.
pub fn divergence(w: &Field) -> Result<Field> {
    let g = w.grid().clone();
    let d = g.dim();
    let (out_rank, rows) = match w.rank() {
        Rank::Vector => (Rank::Scalar, 1),
        Rank::Tensor => (Rank::Vector, d),
        Rank::Scalar => {
            return Err(Error::RankMismatch {
                expected: "vector or tensor",
                found: "scalar",
            })
        }
    };
    let mut out = Field::zeros(&g, out_rank);
    for i in 0..rows {
        let dst = out.component_mut(i);
        for j in 0..d {
            let src = w.component(i * d + j);
            for idx in 0..g.len() {
                dst[idx] += I * g.wavevector(idx)[j] * src[idx];
            }
        }
    }
    Ok(out)
}

/// Curl of a vector field: the scalar `d1 u2 - d2 u1` in 2D, the usual vector in 3D.
pub fn curl(w: &Field) -> Result<Field> {
    w.expect_rank(Rank::Vector)?;
    let g = w.grid().clone();
    if g.dim() == 2 {
        let mut out = Field::zeros(&g, Rank::Scalar);
        let (u1, u2) = (w.component(0), w.component(1));
        let dst = out.component_mut(0);
        for idx in 0..g.len() {
            let k = g.wavevector(idx);
            dst[idx] = I * (k[0] * u2[idx] - k[1] * u1[idx]);
        }
        Ok(out)
    } else {
        let mut out = Field::zeros(&g, Rank::Vector);
        for c in 0..3 {
            let (a, b) = ((c + 1) % 3, (c + 2) % 3);
            let (ua, ub) = (w.component(a).to_vec(), w.component(b).to_vec());
            let dst = out.component_mut(c);
            for idx in 0..g.len() {
                let k = g.wavevector(idx);
                dst[idx] = I * (k[a] * ub[idx] - k[b] * ua[idx]);
            }
        }
        Ok(out)
    }
}

/// Rank of the vorticity in the given dimension.
pub fn vorticity_rank(dim: usize) -> Rank {
    if dim == 2 {
        Rank::Scalar
    } else {
        Rank::Vector
    }
}

/// Component-wise Laplacian.
pub fn laplacian(f: &Field) -> Field {
    let g = f.grid().clone();
    let mut out = f.clone();
    for c in 0..f.n_components() {
        let dst = out.component_mut(c);
        for (idx, x) in dst.iter_mut().enumerate() {
            *x *= -g.wavenumber_sq(idx);
        }
    }
    out
}

/// Mean-zero solution of `lap phi = f` (modes with zero wavenumber set to 0).
pub fn inverse_laplacian(f: &Field) -> Field {
    let g = f.grid().clone();
    let mut out = f.clone();
    for c in 0..f.n_components() {
        let dst = out.component_mut(c);
        for (idx, x) in dst.iter_mut().enumerate() {
            let k2 = g.wavenumber_sq(idx);
            *x = if k2 > 0.0 { -*x / k2 } else { Complex64::new(0.0, 0.0) };
        }
    }
    out
}

/// Hodge split `w = div_free + grad_part`. Modes with zero derivative
/// wavenumber (mean and Nyquist-only) go to the divergence-free part.
pub fn leray_project(w: &Field) -> Result<(Field, Field)> {
    w.expect_rank(Rank::Vector)?;
    let g = w.grid().clone();
    let d = g.dim();
    let mut grad = Field::zeros(&g, Rank::Vector);
    for idx in 0..g.len() {
        let k = g.wavevector(idx);
        let k2 = g.wavenumber_sq(idx);
        if k2 == 0.0 {
            continue;
        }
        let mut kw = Complex64::new(0.0, 0.0);
        for j in 0..d {
            kw += k[j] * w.component(j)[idx];
        }
        for j in 0..d {
            grad.component_mut(j)[idx] = kw * (k[j] / k2);
        }
    }
    let free = w.sub(&grad)?;
    Ok((free, grad))
}

/// Divergence-free part only.
pub fn project(w: &Field) -> Result<Field> {
    Ok(leray_project(w)?.0)
}

/// Zeroes every mode with some `|k_i| >= n/3`.
pub fn dealias(w: &Field) -> Field {
    let mut out = w.clone();
    dealias_in_place(&mut out);
    out
}

pub fn dealias_in_place(w: &mut Field) {
    let g = w.grid().clone();
    let mask: Vec<bool> = (0..g.len()).map(|idx| g.keeps(idx)).collect();
    for c in 0..w.n_components() {
        for (x, &keep) in w.component_mut(c).iter_mut().zip(&mask) {
            if !keep {
                *x = Complex64::new(0.0, 0.0);
            }
        }
    }
}

/// Physical values of each component.
pub fn components_physical(f: &Field) -> Vec<Vec<f64>> {
    let len = f.grid().len();
    f.to_physical().chunks(len).map(|c| c.to_vec()).collect()
}

/// Builds a field from per-component physical values and dealiases it.
pub fn from_components_dealiased(grid: &Arc<Grid>, rank: Rank, comps: Vec<Vec<f64>>) -> Field {
    let flat: Vec<f64> = comps.into_iter().flatten().collect();
    let mut f = Field::from_physical(grid, rank, &flat).expect("component count matches rank");
    dealias_in_place(&mut f);
    f
}

/// Dealiased outer product `(a ⊗ b)_ij = a_i b_j` of two vector fields.
pub fn outer(a: &Field, b: &Field) -> Result<Field> {
    a.expect_rank(Rank::Vector)?;
    b.expect_rank(Rank::Vector)?;
    a.check_grid(b)?;
    let d = a.dim();
    let pa = components_physical(a);
    let pb = if std::ptr::eq(a, b) {
        pa.clone()
    } else {
        components_physical(b)
    };
    let mut comps = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..d {
            comps.push(pa[i].iter().zip(&pb[j]).map(|(x, y)| x * y).collect());
        }
    }
    Ok(from_components_dealiased(a.grid(), Rank::Tensor, comps))
}

/// Dealiased `u ⊗ u`, exploiting symmetry.
pub fn self_outer(u: &Field) -> Result<Field> {
    u.expect_rank(Rank::Vector)?;
    let d = u.dim();
    let len = u.grid().len();
    let pu = components_physical(u);
    let mut comps = vec![Vec::new(); d * d];
    for i in 0..d {
        for j in i..d {
            let prod: Vec<f64> = (0..len).map(|x| pu[i][x] * pu[j][x]).collect();
            if i != j {
                comps[j * d + i] = prod.clone();
            }
            comps[i * d + j] = prod;
        }
    }
    Ok(from_components_dealiased(u.grid(), Rank::Tensor, comps))
}

/// Dealiased product of a scalar field with a field of any rank.
pub fn scalar_mul(s: &Field, w: &Field) -> Result<Field> {
    s.expect_rank(Rank::Scalar)?;
    s.check_grid(w)?;
    let ps = s.to_physical();
    let comps = components_physical(w)
        .into_iter()
        .map(|c| c.iter().zip(&ps).map(|(x, y)| x * y).collect())
        .collect();
    Ok(from_components_dealiased(w.grid(), w.rank(), comps))
}

/// Dealiased `(u . grad) w` for `w` scalar or vector.
pub fn advect(u: &Field, w: &Field) -> Result<Field> {
    u.expect_rank(Rank::Vector)?;
    u.check_grid(w)?;
    let d = u.dim();
    let len = u.grid().len();
    let pu = components_physical(u);
    let grad = components_physical(&gradient(w)?);
    let mut comps = Vec::with_capacity(w.n_components());
    for i in 0..w.n_components() {
        let mut acc = vec![0.0; len];
        for j in 0..d {
            for x in 0..len {
                acc[x] += pu[j][x] * grad[i * d + j][x];
            }
        }
        comps.push(acc);
    }
    Ok(from_components_dealiased(u.grid(), w.rank(), comps))
}

/// Dealiased 2D cross product `a1 b2 - a2 b1` of two vector fields.
pub fn cross2(a: &Field, b: &Field) -> Result<Field> {
    a.expect_rank(Rank::Vector)?;
    b.expect_rank(Rank::Vector)?;
    a.check_grid(b)?;
    if a.dim() != 2 {
        return Err(Error::DimensionMismatch("cross2 needs a 2D grid".into()));
    }
    let pa = components_physical(a);
    let pb = components_physical(b);
    let comp: Vec<f64> = (0..a.grid().len())
        .map(|x| pa[0][x] * pb[1][x] - pa[1][x] * pb[0][x])
        .collect();
    Ok(from_components_dealiased(a.grid(), Rank::Scalar, vec![comp]))
}
