//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

/// `L` with `L Lᵀ ≈ Z`, keeping eigenpairs with eigenvalue above `rel_tol · λ_max`.
/// Columns are ordered by decreasing eigenvalue.
pub fn psd_factor(z: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let n = z.nrows();
    let eig = SymmetricEigen::new((z + z.transpose()) * 0.5);
    let max = eig.eigenvalues.max().max(0.0);
    let mut idx: Vec<usize> = (0..n)
        .filter(|&i| max > 0.0 && eig.eigenvalues[i] > rel_tol * max)
        .collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut out = DMatrix::zeros(n, idx.len());
    for (c, &i) in idx.iter().enumerate() {
        let s = eig.eigenvalues[i].sqrt();
        out.set_column(c, &(eig.eigenvectors.column(i) * s));
    }
    out
}

pub fn min_eigenvalue(z: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new((z + z.transpose()) * 0.5).eigenvalues.min()
}

/// Largest eigenvalue of a Hermitian matrix, via its real symmetric embedding.
pub fn hermitian_max_eigenvalue(h: &DMatrix<Complex64>) -> f64 {
    let n = h.nrows();
    let mut e = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = (h[(i, j)] + h[(j, i)].conj()) * 0.5;
            e[(i, j)] = z.re;
            e[(i + n, j + n)] = z.re;
            e[(i, j + n)] = -z.im;
            e[(i + n, j)] = z.im;
        }
    }
    SymmetricEigen::new(e).eigenvalues.max()
}

pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    m.clone().svd(false, false).singular_values.iter().copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_reconstructs_low_rank() {
        let a = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, -1.0]);
        let z = &a * a.transpose();
        let f = psd_factor(&z, 1e-10);
        assert_eq!(f.ncols(), 1);
        assert!((&f * f.transpose() - z).amax() < 1e-12);
    }

    #[test]
    fn hermitian_eigenvalue() {
        let h = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(2.0, 0.0),
                Complex64::new(0.0, 1.0),
                Complex64::new(0.0, -1.0),
                Complex64::new(2.0, 0.0),
            ],
        );
        assert!((hermitian_max_eigenvalue(&h) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn singular_values_of_rank_one() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 0.0]);
        let s = singular_values(&m);
        assert!((s.iter().cloned().fold(0.0, f64::max) - 2f64.sqrt()).abs() < 1e-12);
    }
}
