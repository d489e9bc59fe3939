//! Complex matrix aliases and small helpers shared across the crate.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Dense complex matrix used throughout the simulator.
pub type CMat = DMatrix<Complex64>;
/// Dense complex column vector.
pub type CVec = DVector<Complex64>;

/// Unitary DFT matrix of size `m`, entries `exp(-j 2π mn / M) / sqrt(M)`.
pub fn dft_matrix(m: usize) -> CMat {
    let scale = 1.0 / (m as f64).sqrt();
    CMat::from_fn(m, m, |r, c| {
        let phase = -2.0 * std::f64::consts::PI * (r as f64) * (c as f64) / (m as f64);
        Complex64::from_polar(scale, phase)
    })
}

/// Columns of the unitary DFT matrix selected by `indices`.
pub fn dft_columns(m: usize, indices: &[usize]) -> CMat {
    let scale = 1.0 / (m as f64).sqrt();
    CMat::from_fn(m, indices.len(), |r, c| {
        let n = indices[c] as f64;
        let phase = -2.0 * std::f64::consts::PI * (r as f64) * n / (m as f64);
        Complex64::from_polar(scale, phase)
    })
}

/// Frobenius norm of a complex matrix.
pub fn fro_norm(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Max absolute deviation of `b^H b` from the identity.
pub fn orthonormality_defect(b: &CMat) -> f64 {
    let g = b.adjoint() * b;
    let r = g.ncols();
    let mut worst = 0.0f64;
    for i in 0..r {
        for j in 0..r {
            let target = if i == j {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            };
            worst = worst.max((g[(i, j)] - target).norm());
        }
    }
    worst
}
