//! Small dense helpers on top of nalgebra used by the concrete manifolds.

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};

use crate::error::RetractionError;

/// Symmetric part `(M + Mᵀ)/2`.
pub fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Applies a scalar function to the spectrum of a symmetric matrix.
pub fn sym_fn(m: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(sym(m));
    let mapped = eig.eigenvalues.map(f);
    let q = &eig.eigenvectors;
    let scaled = DMatrix::from_fn(q.nrows(), q.ncols(), |i, j| q[(i, j)] * mapped[j]);
    sym(&(scaled * q.transpose()))
}

pub fn is_positive_definite(m: &DMatrix<f64>) -> bool {
    m.iter().all(|x| x.is_finite()) && Cholesky::new(m.clone()).is_some()
}

/// Orthogonal factor of the thin QR decomposition with strictly positive
/// triangular diagonal.
pub fn qf(m: &DMatrix<f64>) -> Result<DMatrix<f64>, RetractionError> {
    qr_positive(m).map(|(q, _)| q)
}

/// Thin Householder QR normalised so that `diag(R) > 0`.
pub fn qr_positive(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>), RetractionError> {
    if !m.iter().all(|x| x.is_finite()) {
        return Err(RetractionError::DegenerateFactor);
    }
    let qr = m.clone().qr();
    let mut q = qr.q();
    let mut r = qr.r();
    for j in 0..r.nrows().min(r.ncols()) {
        let d = r[(j, j)];
        if d.abs() < 1e-12 {
            return Err(RetractionError::DegenerateFactor);
        }
        if d < 0.0 {
            q.column_mut(j).neg_mut();
            r.row_mut(j).neg_mut();
        }
    }
    Ok((q, r))
}

/// Compact QR by twice-iterated modified Gram–Schmidt that tolerates
/// (numerically) zero columns: such a column yields a zero column of `Q` and
/// a zero row of `R` instead of an arbitrary normalised direction.
///
/// `against` columns (assumed orthonormal) are projected out first, so the
/// returned `Q` is orthogonal to them.
pub fn compact_qr_tolerant(
    m: &DMatrix<f64>,
    against: Option<&DMatrix<f64>>,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let (rows, cols) = m.shape();
    let mut q = DMatrix::<f64>::zeros(rows, cols);
    let mut r = DMatrix::<f64>::zeros(cols, cols);
    let scale = m.norm().max(f64::MIN_POSITIVE);
    for j in 0..cols {
        let mut w = m.column(j).into_owned();
        for _ in 0..2 {
            if let Some(basis) = against {
                let c = basis.transpose() * &w;
                w -= basis * c;
            }
            for i in 0..j {
                let qi = q.column(i);
                let c = qi.dot(&w);
                r[(i, j)] += c;
                w.axpy(-c, &qi.into_owned(), 1.0);
            }
        }
        let nrm = w.norm();
        if nrm > 1e-13 * scale {
            r[(j, j)] = nrm;
            q.set_column(j, &(w / nrm));
        }
    }
    (q, r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qf_has_positive_diagonal_and_orthonormal_columns() {
        let m = DMatrix::from_row_slice(3, 2, &[-1.0, 2.0, 0.5, -3.0, 2.0, 1.0]);
        let (q, r) = qr_positive(&m).unwrap();
        assert!((q.transpose() * &q - DMatrix::identity(2, 2)).amax() < 1e-14);
        assert!(r[(0, 0)] > 0.0 && r[(1, 1)] > 0.0);
        assert!((q * r - m).amax() < 1e-14);
    }

    #[test]
    fn qf_rejects_rank_deficiency() {
        let m = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
        assert_eq!(qf(&m), Err(RetractionError::DegenerateFactor));
    }

    #[test]
    fn tolerant_qr_zeroes_dependent_columns() {
        let m = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 0.0, 0.0, 0.0, 0.0]);
        let (q, r) = compact_qr_tolerant(&m, None);
        assert_eq!(q.column(1).norm(), 0.0);
        assert!((q * r - m).amax() < 1e-15);
    }

    #[test]
    fn sym_fn_recovers_square_root() {
        let a = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let s = sym_fn(&a, f64::sqrt);
        assert!((&s * &s - a).amax() < 1e-13);
    }
}
