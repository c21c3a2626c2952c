//! Small dense linear-algebra helpers shared by the set types and the
//! program builders.

use crate::error::{Error, Result};
use crate::{Mat, Vec64};

/// Smallest eigenvalue of a symmetric matrix (the input is symmetrized first).
pub fn min_eigenvalue(m: &Mat) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    let sym = symmetrize(m);
    sym.symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |a, &b| a.min(b))
}

/// Largest eigenvalue of a symmetric matrix.
pub fn max_eigenvalue(m: &Mat) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    let sym = symmetrize(m);
    sym.symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(f64::NEG_INFINITY, |a, &b| a.max(b))
}

/// `(M + Mᵀ)/2`.
pub fn symmetrize(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

/// Symmetric PSD square root with negative eigenvalues clipped at zero, so
/// numerical noise on a nominally PSD input cannot abort construction.
pub fn psd_sqrt(m: &Mat) -> Mat {
    let eig = symmetrize(m).symmetric_eigen();
    let vals = eig.eigenvalues.map(|v| if v > 0.0 { v.sqrt() } else { 0.0 });
    &eig.eigenvectors * Mat::from_diagonal(&vals) * eig.eigenvectors.transpose()
}

/// Moore-Penrose pseudoinverse of a symmetric PSD matrix, eigenvalues below
/// `tol * λ_max` treated as zero.
pub fn psd_pinv(m: &Mat, tol: f64) -> Mat {
    let eig = symmetrize(m).symmetric_eigen();
    let lmax = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let cut = tol * lmax.max(1e-300);
    let inv = eig.eigenvalues.map(|v| if v > cut { 1.0 / v } else { 0.0 });
    &eig.eigenvectors * Mat::from_diagonal(&inv) * eig.eigenvectors.transpose()
}

/// Numerical rank with threshold `1e-9 * σ_max`.
pub fn numerical_rank(m: &Mat) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0f64, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > 1e-9 * smax).count()
}

/// Spectral norm (largest singular value).
pub fn spectral_norm(m: &Mat) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    sv.iter().cloned().fold(0.0f64, f64::max)
}

/// Check that a matrix is symmetric up to `tol` (absolute, entrywise).
pub fn is_symmetric(m: &Mat, tol: f64) -> bool {
    if m.nrows() != m.ncols() {
        return false;
    }
    for j in 0..m.ncols() {
        for i in 0..j {
            if (m[(i, j)] - m[(j, i)]).abs() > tol {
                return false;
            }
        }
    }
    true
}

/// Dense row-major nested arrays -> matrix, with ragged-input checking.
pub fn mat_from_rows(rows: &[Vec<f64>]) -> Result<Mat> {
    let nr = rows.len();
    if nr == 0 {
        return Ok(Mat::zeros(0, 0));
    }
    let nc = rows[0].len();
    for (i, r) in rows.iter().enumerate() {
        if r.len() != nc {
            return Err(Error::Config(format!(
                "ragged matrix: row 0 has {nc} entries, row {i} has {}",
                r.len()
            )));
        }
    }
    Ok(Mat::from_fn(nr, nc, |i, j| rows[i][j]))
}

/// Matrix -> dense row-major nested arrays.
pub fn mat_to_rows(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

pub fn vec_from_slice(v: &[f64]) -> Vec64 {
    Vec64::from_column_slice(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn psd_sqrt_squares_back() {
        let m = Mat::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let r = psd_sqrt(&m);
        assert_abs_diff_eq!((&r * &r - &m).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn psd_sqrt_clips_negative_noise() {
        let m = Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1e-14]);
        let r = psd_sqrt(&m);
        assert!(r[(1, 1)] >= 0.0);
        assert_abs_diff_eq!(r[(0, 0)], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn rank_thresholding() {
        let m = Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1e-12]);
        assert_eq!(numerical_rank(&m), 1);
        assert_eq!(numerical_rank(&Mat::identity(3, 3)), 3);
        assert_eq!(numerical_rank(&Mat::zeros(3, 3)), 0);
    }

    #[test]
    fn rows_round_trip() {
        let m = Mat::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let rows = mat_to_rows(&m);
        assert_eq!(rows[1][2], 6.0);
        let back = mat_from_rows(&rows).unwrap();
        assert_eq!(back, m);
    }
}
