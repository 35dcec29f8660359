use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::field::{Field, Rank};
use super::grid::Grid;

/// Random real field with modes `|k_i| <= kmax` (zero mean), amplitudes
/// decaying like `(1 + |k|^2)^(-decay/2)`. Deterministic in `seed`.
pub fn band_limited(grid: &Arc<Grid>, rank: Rank, kmax: usize, decay: f64, seed: u64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nc = rank.components(grid.dim());
    let len = grid.len();
    let kmax = kmax.min(grid.n() / 2 - 1) as i64;
    let mut coeffs = vec![Complex64::new(0.0, 0.0); len * nc];
    for c in 0..nc {
        for idx in 0..len {
            let k = grid.freq(idx);
            if k.iter().any(|v| v.abs() > kmax) || k == [0, 0, 0] {
                continue;
            }
            let k2 = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64;
            let amp = (1.0 + k2).powf(-decay / 2.0);
            coeffs[c * len + idx] = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * amp;
        }
    }
    // keep the real part to enforce Hermitian symmetry
    for block in coeffs.chunks_mut(len) {
        grid.inverse(block);
        for x in block.iter_mut() {
            *x = Complex64::new(x.re, 0.0);
        }
        grid.forward(block);
    }
    Field::from_coeffs(grid, rank, coeffs).expect("sized by construction")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_real() {
        let g = Grid::new(2, 16).unwrap();
        let a = band_limited(&g, Rank::Vector, 4, 1.0, 7);
        let b = band_limited(&g, Rank::Vector, 4, 1.0, 7);
        let c = band_limited(&g, Rank::Vector, 4, 1.0, 8);
        assert_eq!(a.coeffs(), b.coeffs());
        assert_ne!(a.coeffs(), c.coeffs());
        assert!(a.hermitian_defect() < 1e-14);
        assert!(a.mean(0).abs() < 1e-15);
        let far = g.mode_index([5, 0, 0]).unwrap();
        assert!(a.component(0)[far].norm() < 1e-15);
    }
}
