use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Uniform collocation grid on the unit torus `[0,1)^dim`.
///
/// Linear indices are row-major with axis 0 (x) slowest. Integer frequencies
/// follow the FFT ordering `0, 1, .., n/2, -n/2+1, .., -1`; the Nyquist entry
/// `n/2` is kept for norms and dealiasing but its derivative factor is zero.
pub struct Grid {
    dim: usize,
    n: usize,
    len: usize,
    freq: Vec<i64>,
    deriv: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Grid {
    pub fn new(dim: usize, n: usize) -> Result<Arc<Grid>> {
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidGrid(format!("dim must be 2 or 3, got {dim}")));
        }
        if n < 8 || !n.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!("n must be even and >= 8, got {n}")));
        }
        let half = (n / 2) as i64;
        let freq: Vec<i64> = (0..n as i64)
            .map(|i| if i <= half { i } else { i - n as i64 })
            .collect();
        let deriv = freq
            .iter()
            .map(|&k| if k == half { 0.0 } else { 2.0 * PI * k as f64 })
            .collect();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        Ok(Arc::new(Grid {
            dim,
            n,
            len: n.pow(dim as u32),
            freq,
            deriv,
            fwd,
            inv,
        }))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of collocation points (and spectral modes) per component.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn same_as(&self, other: &Grid) -> bool {
        self.dim == other.dim && self.n == other.n
    }

    /// Per-axis indices of a linear index (unused trailing axes are 0).
    #[inline]
    pub fn axes(&self, idx: usize) -> [usize; 3] {
        let n = self.n;
        if self.dim == 2 {
            [idx / n, idx % n, 0]
        } else {
            [idx / (n * n), (idx / n) % n, idx % n]
        }
    }

    #[inline]
    pub fn index(&self, axes: [usize; 3]) -> usize {
        let n = self.n;
        if self.dim == 2 {
            axes[0] * n + axes[1]
        } else {
            (axes[0] * n + axes[1]) * n + axes[2]
        }
    }

    /// Integer frequency vector of a mode.
    #[inline]
    pub fn freq(&self, idx: usize) -> [i64; 3] {
        let a = self.axes(idx);
        let mut k = [0i64; 3];
        for d in 0..self.dim {
            k[d] = self.freq[a[d]];
        }
        k
    }

    /// Physical derivative factors `2 pi k` of a mode, Nyquist set to zero.
    #[inline]
    pub fn wavevector(&self, idx: usize) -> [f64; 3] {
        let a = self.axes(idx);
        let mut k = [0.0; 3];
        for d in 0..self.dim {
            k[d] = self.deriv[a[d]];
        }
        k
    }

    /// `|2 pi k|^2` with the Nyquist convention of [`Grid::wavevector`].
    #[inline]
    pub fn wavenumber_sq(&self, idx: usize) -> f64 {
        let k = self.wavevector(idx);
        k[0] * k[0] + k[1] * k[1] + k[2] * k[2]
    }

    /// Integer `|k|^2` after the Nyquist convention; the key for radial caches.
    #[inline]
    pub fn shell(&self, idx: usize) -> i64 {
        let a = self.axes(idx);
        let half = (self.n / 2) as i64;
        let mut s = 0;
        for d in 0..self.dim {
            let k = self.freq[a[d]];
            if k != half {
                s += k * k;
            }
        }
        s
    }

    /// Whether a mode survives the 2/3 rule (every `3 |k_i| < n`, so that
    /// quadratic products of retained modes never alias onto retained modes).
    #[inline]
    pub fn keeps(&self, idx: usize) -> bool {
        let k = self.freq(idx);
        let n = self.n as i64;
        (0..self.dim).all(|d| 3 * k[d].abs() < n)
    }

    /// Largest integer frequency retained by the 2/3 rule.
    pub fn dealias_cutoff(&self) -> usize {
        (self.n - 1) / 3
    }

    /// Physical coordinates of a collocation point.
    pub fn point(&self, idx: usize) -> [f64; 3] {
        let a = self.axes(idx);
        let h = self.spacing();
        [a[0] as f64 * h, a[1] as f64 * h, a[2] as f64 * h]
    }

    /// Linear index of an integer frequency, if representable on this grid.
    pub fn mode_index(&self, k: [i64; 3]) -> Option<usize> {
        let n = self.n as i64;
        let mut a = [0usize; 3];
        for d in 0..self.dim {
            if k[d] <= -n / 2 || k[d] > n / 2 {
                return None;
            }
            a[d] = k[d].rem_euclid(n) as usize;
        }
        Some(self.index(a))
    }

    /// In-place forward transform of one component: physical values to
    /// coefficients `c(k) = n^-d sum_x f(x) exp(-2 pi i k.x)`.
    pub fn forward(&self, buf: &mut [Complex64]) {
        self.transform(buf, &self.fwd);
        let scale = 1.0 / self.len as f64;
        for c in buf.iter_mut() {
            *c *= scale;
        }
    }

    /// In-place inverse transform of one component (coefficients to values).
    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.transform(buf, &self.inv);
    }

    fn transform(&self, buf: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        debug_assert_eq!(buf.len(), self.len);
        let n = self.n;
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        // last axis is contiguous
        plan.process_with_scratch(buf, &mut scratch);
        let mut lines = Vec::new();
        for axis in (0..self.dim - 1).rev() {
            let stride = n.pow((self.dim - 1 - axis) as u32);
            let block = stride * n;
            lines.resize(block, Complex64::new(0.0, 0.0));
            for chunk in buf.chunks_mut(block) {
                for j in 0..stride {
                    for i in 0..n {
                        lines[j * n + i] = chunk[i * stride + j];
                    }
                }
                plan.process_with_scratch(&mut lines, &mut scratch);
                for j in 0..stride {
                    for i in 0..n {
                        chunk[i * stride + j] = lines[j * n + i];
                    }
                }
            }
        }
    }
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("dim", &self.dim)
            .field("n", &self.n)
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_sizes() {
        assert!(Grid::new(4, 16).is_err());
        assert!(Grid::new(2, 6).is_err());
        assert!(Grid::new(3, 15).is_err());
        assert!(Grid::new(2, 8).is_ok());
    }

    #[test]
    fn frequencies_and_nyquist() {
        let g = Grid::new(2, 8).unwrap();
        let idx = g.mode_index([4, -3, 0]).unwrap();
        assert_eq!(g.freq(idx), [4, -3, 0]);
        assert_eq!(g.wavevector(idx)[0], 0.0);
        assert!((g.wavevector(idx)[1] + 6.0 * PI).abs() < 1e-14);
        assert_eq!(g.shell(idx), 9);
        assert!(g.mode_index([-4, 0, 0]).is_none());
    }

    #[test]
    fn forward_inverse_roundtrip() {
        let g = Grid::new(3, 8).unwrap();
        let orig: Vec<Complex64> = (0..g.len())
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), 0.0))
            .collect();
        let mut buf = orig.clone();
        g.forward(&mut buf);
        g.inverse(&mut buf);
        for (a, b) in orig.iter().zip(&buf) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn single_mode_coefficient() {
        let g = Grid::new(2, 16).unwrap();
        let mut buf: Vec<Complex64> = (0..g.len())
            .map(|i| {
                let x = g.point(i);
                Complex64::new((2.0 * PI * (2.0 * x[0] - x[1])).cos(), 0.0)
            })
            .collect();
        g.forward(&mut buf);
        let a = g.mode_index([2, -1, 0]).unwrap();
        let b = g.mode_index([-2, 1, 0]).unwrap();
        assert!((buf[a].re - 0.5).abs() < 1e-14);
        assert!((buf[b].re - 0.5).abs() < 1e-14);
        let total: f64 = buf.iter().map(|c| c.norm_sqr()).sum();
        assert!((total - 0.5).abs() < 1e-14);
    }
}
