//! Dense SVD and symmetric eigendecomposition, backed by faer and exchanged
//! as nalgebra matrices.

use faer::{Mat, MatRef, Side};
use nalgebra::DMatrix;

fn to_faer(a: &DMatrix<f64>) -> Mat<f64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

fn from_faer(a: MatRef<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

/// Full SVD: singular values descending, `U` (m × m) and `V` (n × n).
pub(crate) struct FullSvd {
    pub values: Vec<f64>,
    pub u: DMatrix<f64>,
    pub v: DMatrix<f64>,
}

pub(crate) fn svd(a: &DMatrix<f64>) -> FullSvd {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return FullSvd { values: Vec::new(), u: DMatrix::identity(m, m), v: DMatrix::identity(n, n) };
    }
    let s = to_faer(a).svd().expect("svd did not converge");
    let values = s.S().column_vector().iter().copied().collect();
    FullSvd { values, u: from_faer(s.U()), v: from_faer(s.V()) }
}

/// Singular values, descending.
pub(crate) fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    if a.is_empty() {
        return Vec::new();
    }
    to_faer(a).singular_values().expect("svd did not converge")
}

/// Eigenpairs of a symmetric matrix, eigenvalues ascending.
pub(crate) fn symmetric_eigen(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    if n == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    let e = to_faer(a).self_adjoint_eigen(Side::Lower).expect("eigensolver did not converge");
    let values = e.S().column_vector().iter().copied().collect();
    (values, from_faer(e.U()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svd_reconstructs() {
        let a = DMatrix::from_fn(7, 4, |i, j| ((i * 3 + j * 5) % 7) as f64 - 3.0);
        let s = svd(&a);
        let mut sigma = DMatrix::zeros(7, 4);
        for (i, &v) in s.values.iter().enumerate() {
            sigma[(i, i)] = v;
        }
        assert!((&s.u * sigma * s.v.transpose() - &a).amax() < 1e-13);
        assert!(s.values.windows(2).all(|w| w[0] >= w[1]));
        assert_eq!(singular_values(&a).len(), 4);
    }

    #[test]
    fn eigen_of_diagonal() {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, -1.0, 2.0]));
        let (v, _) = symmetric_eigen(&a);
        assert_eq!(v, vec![-1.0, 2.0, 3.0]);
    }
}
