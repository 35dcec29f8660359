use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use super::grid::Grid;
use crate::error::{Error, Result};

/// Tensor rank of a field; fixes the number of components for a given dimension.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Rank {
    Scalar,
    Vector,
    Tensor,
}

impl Rank {
    pub fn components(self, dim: usize) -> usize {
        match self {
            Rank::Scalar => 1,
            Rank::Vector => dim,
            Rank::Tensor => dim * dim,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Rank::Scalar => "scalar",
            Rank::Vector => "vector",
            Rank::Tensor => "tensor",
        }
    }
}

/// Real field on the torus stored as spectral coefficients.
///
/// Components are stored one block after another (component-major). Tensor
/// component `(i, j)` lives at block `i * dim + j`. Coefficients are normalized
/// so that the zero mode is the spatial mean and `sum |c|^2` is the squared L2
/// norm.
#[derive(Clone)]
pub struct Field {
    grid: Arc<Grid>,
    rank: Rank,
    coeffs: Vec<Complex64>,
}

impl Field {
    pub fn zeros(grid: &Arc<Grid>, rank: Rank) -> Field {
        let len = grid.len() * rank.components(grid.dim());
        Field {
            grid: grid.clone(),
            rank,
            coeffs: vec![Complex64::new(0.0, 0.0); len],
        }
    }

    /// Wraps raw coefficients (component-major).
    pub fn from_coeffs(grid: &Arc<Grid>, rank: Rank, coeffs: Vec<Complex64>) -> Result<Field> {
        let want = grid.len() * rank.components(grid.dim());
        if coeffs.len() != want {
            return Err(Error::InvalidArgument(format!(
                "{} field needs {want} coefficients, got {}",
                rank.name(),
                coeffs.len()
            )));
        }
        Ok(Field {
            grid: grid.clone(),
            rank,
            coeffs,
        })
    }

    /// Builds a field from physical values (component-major, row-major points).
    pub fn from_physical(grid: &Arc<Grid>, rank: Rank, values: &[f64]) -> Result<Field> {
        let want = grid.len() * rank.components(grid.dim());
        if values.len() != want {
            return Err(Error::InvalidArgument(format!(
                "{} field needs {want} values, got {}",
                rank.name(),
                values.len()
            )));
        }
        let mut coeffs: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        for block in coeffs.chunks_mut(grid.len()) {
            grid.forward(block);
        }
        Ok(Field {
            grid: grid.clone(),
            rank,
            coeffs,
        })
    }

    /// Samples `f(component, x)` at the collocation points.
    pub fn from_fn(grid: &Arc<Grid>, rank: Rank, f: impl Fn(usize, [f64; 3]) -> f64) -> Field {
        let len = grid.len();
        let nc = rank.components(grid.dim());
        let mut values = Vec::with_capacity(len * nc);
        for c in 0..nc {
            for idx in 0..len {
                values.push(f(c, grid.point(idx)));
            }
        }
        Field::from_physical(grid, rank, &values).expect("length is consistent by construction")
    }

    /// Stacks scalar fields into a vector (d parts) or tensor (d*d parts).
    pub fn stack(parts: &[Field]) -> Result<Field> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidArgument("no components to stack".into()))?;
        let grid = first.grid.clone();
        let d = grid.dim();
        let rank = if parts.len() == d {
            Rank::Vector
        } else if parts.len() == d * d {
            Rank::Tensor
        } else {
            return Err(Error::DimensionMismatch(format!(
                "cannot stack {} components in dimension {d}",
                parts.len()
            )));
        };
        let mut coeffs = Vec::with_capacity(grid.len() * parts.len());
        for p in parts {
            p.expect_rank(Rank::Scalar)?;
            first.check_grid(p)?;
            coeffs.extend_from_slice(&p.coeffs);
        }
        Ok(Field { grid, rank, coeffs })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn rank(&self) -> Rank {
        self.rank
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn n_components(&self) -> usize {
        self.rank.components(self.grid.dim())
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    pub fn component(&self, c: usize) -> &[Complex64] {
        let len = self.grid.len();
        &self.coeffs[c * len..(c + 1) * len]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [Complex64] {
        let len = self.grid.len();
        &mut self.coeffs[c * len..(c + 1) * len]
    }

    /// Copies one component out as a scalar field.
    pub fn extract(&self, c: usize) -> Field {
        Field {
            grid: self.grid.clone(),
            rank: Rank::Scalar,
            coeffs: self.component(c).to_vec(),
        }
    }

    /// Physical values, component-major.
    pub fn to_physical(&self) -> Vec<f64> {
        let len = self.grid.len();
        let mut out = Vec::with_capacity(self.coeffs.len());
        let mut buf = vec![Complex64::new(0.0, 0.0); len];
        for block in self.coeffs.chunks(len) {
            buf.copy_from_slice(block);
            self.grid.inverse(&mut buf);
            out.extend(buf.iter().map(|c| c.re));
        }
        out
    }

    /// Spatial mean of one component.
    pub fn mean(&self, c: usize) -> f64 {
        self.component(c)[0].re
    }

    pub fn means(&self) -> Vec<f64> {
        (0..self.n_components()).map(|c| self.mean(c)).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Largest violation of `c(-k) = conj(c(k))`, relative to the largest coefficient.
    pub fn hermitian_defect(&self) -> f64 {
        let g = &self.grid;
        let scale = self.max_abs_coeff();
        if scale == 0.0 {
            return 0.0;
        }
        let n = g.n();
        let mut worst: f64 = 0.0;
        for c in 0..self.n_components() {
            let block = self.component(c);
            for idx in 0..g.len() {
                let a = g.axes(idx);
                let mut m = [0usize; 3];
                for d in 0..g.dim() {
                    m[d] = (n - a[d]) % n;
                }
                let mirror = g.index(m);
                worst = worst.max((block[idx] - block[mirror].conj()).norm());
            }
        }
        worst / scale
    }

    pub fn check_grid(&self, other: &Field) -> Result<()> {
        if self.grid.same_as(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "dim {} n {} vs dim {} n {}",
                self.grid.dim(),
                self.grid.n(),
                other.grid.dim(),
                other.grid.n()
            )))
        }
    }

    pub fn expect_rank(&self, rank: Rank) -> Result<()> {
        if self.rank == rank {
            Ok(())
        } else {
            Err(Error::RankMismatch {
                expected: rank.name(),
                found: self.rank.name(),
            })
        }
    }

    fn check_compatible(&self, other: &Field) -> Result<()> {
        self.check_grid(other)?;
        other.expect_rank(self.rank)
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &Field) -> Result<Field> {
        let mut out = self.clone();
        out.axpy_in_place(a, other)?;
        Ok(out)
    }

    pub fn axpy_in_place(&mut self, a: f64, other: &Field) -> Result<()> {
        self.check_compatible(other)?;
        for (x, y) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *x += y * a;
        }
        Ok(())
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.axpy(-1.0, other)
    }

    pub fn scale(&self, a: f64) -> Field {
        let mut out = self.clone();
        out.scale_in_place(a);
        out
    }

    pub fn scale_in_place(&mut self, a: f64) {
        for x in self.coeffs.iter_mut() {
            *x *= a;
        }
    }

    /// `sum |c|^2` over all components: the squared L2 norm.
    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    /// L2 inner product of two real fields of the same shape.
    pub fn inner(&self, other: &Field) -> Result<f64> {
        self.check_compatible(other)?;
        Ok(self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a * b.conj()).re)
            .sum())
    }

    /// Transpose of a tensor field.
    pub fn transpose(&self) -> Result<Field> {
        self.expect_rank(Rank::Tensor)?;
        let d = self.dim();
        let mut out = Field::zeros(&self.grid, Rank::Tensor);
        for i in 0..d {
            for j in 0..d {
                out.component_mut(j * d + i).copy_from_slice(self.component(i * d + j));
            }
        }
        Ok(out)
    }
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Field")
            .field("dim", &self.grid.dim())
            .field("n", &self.grid.n())
            .field("rank", &self.rank)
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn roundtrip_and_mean() {
        let g = Grid::new(2, 16).unwrap();
        let f = Field::from_fn(&g, Rank::Vector, |c, x| {
            1.5 + c as f64 + (2.0 * PI * x[0]).sin() * (4.0 * PI * x[1]).cos()
        });
        assert!((f.mean(0) - 1.5).abs() < 1e-14);
        assert!((f.mean(1) - 2.5).abs() < 1e-14);
        let back = Field::from_physical(&g, Rank::Vector, &f.to_physical()).unwrap();
        for (a, b) in f.coeffs().iter().zip(back.coeffs()) {
            assert!((a - b).norm() < 1e-13);
        }
        assert!(f.hermitian_defect() < 1e-13);
    }

    #[test]
    fn stack_and_extract() {
        let g = Grid::new(3, 8).unwrap();
        let parts: Vec<Field> = (0..3).map(|c| Field::from_fn(&g, Rank::Scalar, |_, x| x[c])).collect();
        let v = Field::stack(&parts).unwrap();
        assert_eq!(v.rank(), Rank::Vector);
        assert_eq!(v.extract(2).coeffs(), parts[2].coeffs());
        assert!(Field::stack(&parts[..2]).is_err());
    }

    #[test]
    fn arithmetic_checks_shape() {
        let g = Grid::new(2, 8).unwrap();
        let h = Grid::new(2, 16).unwrap();
        let a = Field::zeros(&g, Rank::Scalar);
        assert!(a.add(&Field::zeros(&h, Rank::Scalar)).is_err());
        assert!(a.add(&Field::zeros(&g, Rank::Vector)).is_err());
        let b = Field::from_fn(&g, Rank::Scalar, |_, x| (2.0 * PI * x[0]).sin());
        assert!((b.energy() - 0.5).abs() < 1e-14);
        assert!((b.scale(2.0).energy() - 2.0).abs() < 1e-14);
        assert!((b.inner(&b).unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn transpose_swaps_components() {
        let g = Grid::new(2, 8).unwrap();
        let t = Field::from_fn(&g, Rank::Tensor, |c, _| c as f64);
        let tt = t.transpose().unwrap();
        assert!((tt.mean(1) - 2.0).abs() < 1e-14);
        assert!((tt.mean(2) - 1.0).abs() < 1e-14);
    }
}
