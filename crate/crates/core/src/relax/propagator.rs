//! Per-mode linear propagators of the relaxation system.
//!
//! Component order per Fourier mode is `(p, u_1..u_d, U_11, U_12, .., U_dd)`
//! with the tensor row-major, `m = 1 + d + d^2` entries. For derivative
//! wavevector `k` (entries `2 pi k_j`, Nyquist zeroed) the generator is
//!
//! ```text
//! dp/dt    = -(i/eps) sum_j k_j u_j
//! du_i/dt  = -i sum_j k_j U_ij - i k_i p
//! dU_ij/dt = -(i k_j u_i + U_ij) / delta
//! ```
//!
//! Matrix functions are evaluated in the balanced variables
//! `(sqrt(eps) p, u, sqrt(delta) U)`, where the generator is skew-Hermitian
//! plus damping on the stress block, and mapped back.

use std::sync::Arc;

use num_complex::Complex64;

use super::params::RelaxParams;
use crate::error::{Error, Result};
use crate::linalg::{expm, CMat};
use crate::spectral::Grid;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

pub fn n_components(dim: usize) -> usize {
    1 + dim + dim * dim
}

#[inline]
pub fn idx_u(i: usize) -> usize {
    1 + i
}

#[inline]
pub fn idx_stress(dim: usize, i: usize, j: usize) -> usize {
    1 + dim + i * dim + j
}

fn balance(dim: usize, params: &RelaxParams) -> Vec<f64> {
    let mut d = vec![1.0; n_components(dim)];
    d[0] = params.epsilon.sqrt();
    for x in d.iter_mut().skip(1 + dim) {
        *x = params.delta.sqrt();
    }
    d
}

fn balanced_generator(k: &[f64], params: &RelaxParams) -> CMat {
    let dim = k.len();
    let m = n_components(dim);
    let se = params.epsilon.sqrt();
    let sd = params.delta.sqrt();
    let mi = |x: f64| Complex64::new(0.0, -x);
    let mut l = CMat::zeros(m, m);
    for i in 0..dim {
        l[(0, idx_u(i))] = mi(k[i] / se);
        l[(idx_u(i), 0)] = mi(k[i] / se);
        for j in 0..dim {
            let s = idx_stress(dim, i, j);
            l[(idx_u(i), s)] = mi(k[j] / sd);
            l[(s, idx_u(i))] = mi(k[j] / sd);
            l[(s, s)] = Complex64::new(-1.0 / params.delta, 0.0);
        }
    }
    l
}

/// Generator `L_k` in the original variables; `k` has `dim` entries.
pub fn generator(k: &[f64], params: &RelaxParams) -> CMat {
    let d = balance(k.len(), params);
    let lb = balanced_generator(k, params);
    let m = lb.rows();
    let mut l = CMat::zeros(m, m);
    for r in 0..m {
        for c in 0..m {
            l[(r, c)] = lb[(r, c)] * (d[c] / d[r]);
        }
    }
    l
}

fn unbalance(mat: &CMat, d: &[f64], right: Option<&[f64]>) -> CMat {
    let mut out = mat.clone();
    for r in 0..mat.rows() {
        for c in 0..mat.cols() {
            let rc = right.map_or(1.0, |rd| rd[c]);
            out[(r, c)] = mat[(r, c)] * (rc / d[r]);
        }
    }
    out
}

fn check_finite(m: &CMat, what: &str) -> Result<()> {
    if m.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite {
            t: 0.0,
            detail: format!("{what} has non-finite entries"),
        })
    }
}

/// `exp(dt L_k)` in the original variables.
pub fn linear_propagator(k: &[f64], params: &RelaxParams, dt: f64) -> Result<CMat> {
    let d = balance(k.len(), params);
    Ok(unbalance(&balanced_propagator(k, params, dt)?, &d, Some(&d)))
}

/// `exp(dt L_k)` in the balanced variables, where its 2-norm is at most 1.
pub fn balanced_propagator(k: &[f64], params: &RelaxParams, dt: f64) -> Result<CMat> {
    if !(dt >= 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be nonnegative, got {dt}")));
    }
    let e = expm(&balanced_generator(k, params).scale_real(dt))?;
    check_finite(&e, "linear propagator")?;
    Ok(e)
}

/// Exponential-integrator matrices for `y' = L y + S w`, where `S` injects a
/// tensor source `w` (row-major, `d^2` entries) into the stress rows with
/// factor `1/delta`: `e = exp(hL)`, `p1 = h phi1(hL) S`, `p2 = h phi2(hL) S`.
#[derive(Clone, Debug)]
pub struct EtdMatrices {
    pub e: CMat,
    pub p1: CMat,
    pub p2: CMat,
}

pub fn etd_matrices(k: &[f64], params: &RelaxParams, h: f64) -> Result<EtdMatrices> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {h}")));
    }
    let dim = k.len();
    let m = n_components(dim);
    let r = dim * dim;
    let lb = balanced_generator(k, params);
    let mut aug = CMat::zeros(m + 2 * r, m + 2 * r);
    aug.set_block(0, 0, &lb.scale_real(h));
    let src = h / params.delta.sqrt();
    for q in 0..r {
        aug[(1 + dim + q, m + q)] = Complex64::new(src, 0.0);
        aug[(m + q, m + r + q)] = Complex64::new(1.0, 0.0);
    }
    let x = expm(&aug)?;
    check_finite(&x, "exponential integrator matrices")?;
    let d = balance(dim, params);
    let ones = vec![1.0; r];
    Ok(EtdMatrices {
        e: unbalance(&x.block(0, 0, m, m), &d, Some(&d)),
        p1: unbalance(&x.block(0, m, m, r), &d, Some(&ones)),
        p2: unbalance(&x.block(0, m + r, m, r), &d, Some(&ones)),
    })
}

/// Nonzero entries of a small matrix.
#[derive(Clone, Debug, Default)]
struct Sparse {
    entries: Vec<(u8, u8, Complex64)>,
}

impl Sparse {
    fn from_dense(m: &CMat) -> Sparse {
        let mut entries = Vec::new();
        for r in 0..m.rows() {
            for c in 0..m.cols() {
                if m[(r, c)] != ZERO {
                    entries.push((r as u8, c as u8, m[(r, c)]));
                }
            }
        }
        Sparse { entries }
    }

    #[inline]
    fn mul_add(&self, x: &[Complex64], out: &mut [Complex64]) {
        for &(r, c, v) in &self.entries {
            out[r as usize] += v * x[c as usize];
        }
    }
}

#[derive(Clone, Debug)]
struct ShellOps {
    e: Sparse,
    p1: Sparse,
    p2: Sparse,
}

/// Which source matrix multiplies the tensor input in [`PropagatorCache::apply`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Source {
    P1,
    P2,
}

/// Exponential-integrator matrices for one grid, parameter pair and step,
/// computed once per integer shell `|k|^2` in a frame aligned with `k`.
pub struct PropagatorCache {
    grid: Arc<Grid>,
    params: RelaxParams,
    h: f64,
    shells: Vec<Option<ShellOps>>,
}

/// Orthonormal frame with first column along `k` (identity for `k = 0`).
/// Entry `[i][a]` is component `i` of column `a`.
pub fn aligned_frame(k: [f64; 3], dim: usize) -> [[f64; 3]; 3] {
    let mut q = [[0.0; 3]; 3];
    let norm = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt();
    if norm == 0.0 {
        for (i, row) in q.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        return q;
    }
    let kh = [k[0] / norm, k[1] / norm, k[2] / norm];
    if dim == 2 {
        q[0][0] = kh[0];
        q[1][0] = kh[1];
        q[0][1] = -kh[1];
        q[1][1] = kh[0];
        q[2][2] = 1.0;
        return q;
    }
    let axis = (0..3)
        .min_by(|&a, &b| kh[a].abs().total_cmp(&kh[b].abs()))
        .expect("three axes");
    let mut v = [0.0; 3];
    v[axis] = 1.0;
    let dot = kh[axis];
    for i in 0..3 {
        v[i] -= dot * kh[i];
    }
    let vn = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    for x in v.iter_mut() {
        *x /= vn;
    }
    let w = [
        kh[1] * v[2] - kh[2] * v[1],
        kh[2] * v[0] - kh[0] * v[2],
        kh[0] * v[1] - kh[1] * v[0],
    ];
    for i in 0..3 {
        q[i][0] = kh[i];
        q[i][1] = v[i];
        q[i][2] = w[i];
    }
    q
}

/// `x' = Q^T x` for the vector part and `X' = Q^T X Q` for the tensor part of a
/// mode vector laid out as `(p, u, U)`; `inverse` applies the transpose map.
fn rotate_state(y: &mut [Complex64], q: &[[f64; 3]; 3], dim: usize, inverse: bool) {
    let mut tmp = [ZERO; 3];
    for a in 0..dim {
        tmp[a] = (0..dim)
            .map(|i| y[1 + i] * if inverse { q[a][i] } else { q[i][a] })
            .sum();
    }
    y[1..1 + dim].copy_from_slice(&tmp[..dim]);
    rotate_tensor(&mut y[1 + dim..], q, dim, inverse);
}

fn rotate_tensor(t: &mut [Complex64], q: &[[f64; 3]; 3], dim: usize, inverse: bool) {
    let qq = |i: usize, a: usize| if inverse { q[a][i] } else { q[i][a] };
    let mut half = [ZERO; 9];
    for a in 0..dim {
        for j in 0..dim {
            half[a * dim + j] = (0..dim).map(|i| t[i * dim + j] * qq(i, a)).sum();
        }
    }
    for a in 0..dim {
        for b in 0..dim {
            t[a * dim + b] = (0..dim).map(|j| half[a * dim + j] * qq(j, b)).sum();
        }
    }
}

impl PropagatorCache {
    pub fn new(grid: &Arc<Grid>, params: &RelaxParams, h: f64) -> Result<PropagatorCache> {
        params.validate()?;
        if !(h > 0.0) {
            return Err(Error::InvalidArgument(format!("step must be positive, got {h}")));
        }
        let max_shell = (0..grid.len()).map(|i| grid.shell(i)).max().unwrap_or(0) as usize;
        let mut present = vec![false; max_shell + 1];
        for i in 0..grid.len() {
            present[grid.shell(i) as usize] = true;
        }
        let dim = grid.dim();
        let base = 2.0 * std::f64::consts::PI;
        let mut shells = Vec::with_capacity(max_shell + 1);
        for (s, &here) in present.iter().enumerate() {
            if !here {
                shells.push(None);
                continue;
            }
            let mut k = vec![0.0; dim];
            k[0] = base * (s as f64).sqrt();
            let m = etd_matrices(&k, params, h)?;
            shells.push(Some(ShellOps {
                e: Sparse::from_dense(&m.e),
                p1: Sparse::from_dense(&m.p1),
                p2: Sparse::from_dense(&m.p2),
            }));
        }
        Ok(PropagatorCache {
            grid: grid.clone(),
            params: *params,
            h,
            shells,
        })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn params(&self) -> &RelaxParams {
        &self.params
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// Mode-wise `out = (E y or y) + P w` over packed component-major buffers:
    /// `y` holds `m` blocks, `w` (if any) `d^2` blocks of one grid each.
    pub fn apply(&self, y: &[Complex64], propagate: bool, w: Option<(&[Complex64], Source)>) -> Vec<Complex64> {
        let g = &self.grid;
        let dim = g.dim();
        let m = n_components(dim);
        let r = dim * dim;
        let len = g.len();
        debug_assert_eq!(y.len(), m * len);
        let mut out = vec![ZERO; m * len];
        let mut ym = [ZERO; 13];
        let mut wm = [ZERO; 9];
        let mut zm = [ZERO; 13];
        for idx in 0..len {
            let ops = self.shells[g.shell(idx) as usize]
                .as_ref()
                .expect("every shell on the grid is cached");
            let k = g.wavevector(idx);
            let rotate = k[1] != 0.0 || k[2] != 0.0 || k[0] < 0.0;
            let q = if rotate { aligned_frame(k, dim) } else { [[0.0; 3]; 3] };
            for c in 0..m {
                ym[c] = y[c * len + idx];
            }
            if rotate {
                rotate_state(&mut ym[..m], &q, dim, false);
            }
            if propagate {
                zm[..m].iter_mut().for_each(|z| *z = ZERO);
                ops.e.mul_add(&ym[..m], &mut zm[..m]);
            } else {
                zm[..m].copy_from_slice(&ym[..m]);
            }
            if let Some((wbuf, which)) = w {
                for c in 0..r {
                    wm[c] = wbuf[c * len + idx];
                }
                if rotate {
                    rotate_tensor(&mut wm[..r], &q, dim, false);
                }
                let p = match which {
                    Source::P1 => &ops.p1,
                    Source::P2 => &ops.p2,
                };
                p.mul_add(&wm[..r], &mut zm[..m]);
            }
            if rotate {
                rotate_state(&mut zm[..m], &q, dim, true);
            }
            for c in 0..m {
                out[c * len + idx] = zm[c];
            }
        }
        out
    }
}
