//! Orthonormal bases of kernels and images, and principal angles between
//! subspaces. Everything here works in mass-orthonormal coordinates, where
//! the cochain inner product is Euclidean.

use nalgebra::DMatrix;

use crate::dense;
use crate::spectral::{decide_cut, Cut, KernelPolicy};

/// SVD with singular values sorted ascending: `values`, matching left
/// vectors `u` (first `min(m, n)` only) and right vectors `v`. For a wide
/// matrix the extra right vectors come first, with value zero.
struct SortedSvd {
    values: Vec<f64>,
    u: DMatrix<f64>,
    v: DMatrix<f64>,
}

fn sorted_svd(a: &DMatrix<f64>) -> SortedSvd {
    let (m, n) = a.shape();
    let s = dense::svd(a);
    let k = m.min(n);
    let mut values: Vec<f64> = vec![0.0; n - k];
    values.extend(s.values.iter().rev());
    let u = DMatrix::from_fn(m, k, |r, c| s.u[(r, k - 1 - c)]);
    let v = DMatrix::from_fn(n, n, |r, c| s.v[(r, n - 1 - c)]);
    SortedSvd { values, u, v }
}

/// Orthonormal basis of `Ker a` (columns) and the rank decision used.
pub fn null_space(a: &DMatrix<f64>, policy: &KernelPolicy) -> (DMatrix<f64>, Cut) {
    let n = a.ncols();
    if a.nrows() == 0 || n == 0 {
        let cut = Cut { below: n, threshold: 0.0, gap_ratio: f64::INFINITY, ambiguous: false };
        return (DMatrix::identity(n, n), cut);
    }
    let svd = sorted_svd(a);
    let norm = svd.values.last().copied().unwrap_or(0.0);
    let cut = decide_cut(&svd.values, norm, policy);
    (svd.v.columns(0, cut.below).into_owned(), cut)
}

/// Right singular vectors of the `count` smallest singular values.
pub fn smallest_right_singular_vectors(a: &DMatrix<f64>, count: usize) -> DMatrix<f64> {
    sorted_svd(a).v.columns(0, count).into_owned()
}

/// Orthonormal basis of `Im a` (columns) and the rank decision used.
pub fn column_space(a: &DMatrix<f64>, policy: &KernelPolicy) -> (DMatrix<f64>, Cut) {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        let cut = Cut { below: 0, threshold: 0.0, gap_ratio: f64::INFINITY, ambiguous: false };
        return (DMatrix::zeros(m, 0), cut);
    }
    // left singular vectors of a are the right ones of a^T
    let svd = if m >= n { sorted_svd(a) } else { sorted_svd(&a.transpose()) };
    let norm = svd.values.last().copied().unwrap_or(0.0);
    let cut = decide_cut(&svd.values, norm, policy);
    let k = svd.values.len();
    let rank = k - cut.below;
    let basis = if m >= n { svd.u.columns(k - rank, rank).into_owned() } else { svd.v.columns(k - rank, rank).into_owned() };
    (basis, cut)
}

/// Numerical rank of `a` under the policy.
pub fn rank(a: &DMatrix<f64>, policy: &KernelPolicy) -> usize {
    column_space(a, policy).0.ncols()
}

/// Sines of the principal angles from the orthonormal columns of `a` to
/// those of `b`, descending.
fn angle_sines(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
    if b.ncols() == 0 {
        return Vec::new();
    }
    let residual = b - a * (a.transpose() * b);
    let mut s = dense::singular_values(&residual);
    s.sort_by(|x, y| y.total_cmp(x));
    s.truncate(b.ncols());
    s
}

/// Principal angles between two subspaces with orthonormal bases of equal
/// dimension, descending. Sine-based, so tiny angles are resolved to
/// machine precision.
pub fn principal_angles(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
    angle_sines(a, b).into_iter().map(|s| s.min(1.0).asin()).collect()
}

/// Largest principal angle; `π/2` when the dimensions differ.
pub fn max_principal_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    if a.ncols() != b.ncols() {
        return std::f64::consts::FRAC_PI_2;
    }
    let ab = principal_angles(a, b).first().copied().unwrap_or(0.0);
    let ba = principal_angles(b, a).first().copied().unwrap_or(0.0);
    ab.max(ba)
}

/// Orthonormal basis for the span of the columns of `a`.
pub fn orthonormalize(a: &DMatrix<f64>, policy: &KernelPolicy) -> DMatrix<f64> {
    column_space(a, policy).0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_space_of_wide_matrix() {
        let a = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 0.0]);
        let (k, cut) = null_space(&a, &KernelPolicy::default());
        assert_eq!(k.ncols(), 2);
        assert_eq!(cut.below, 2);
        assert!((&a * &k).amax() < 1e-14);
        assert!((k.transpose() * &k - DMatrix::identity(2, 2)).amax() < 1e-14);
    }

    #[test]
    fn column_space_of_tall_and_wide() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 0.0, 0.0]);
        let (c, _) = column_space(&a, &KernelPolicy::default());
        assert_eq!(c.ncols(), 1);
        let (c, _) = column_space(&a.transpose(), &KernelPolicy::default());
        assert_eq!(c.ncols(), 1);
        assert_eq!(c.nrows(), 2);
    }

    #[test]
    fn angles_between_planes() {
        let e = DMatrix::from_row_slice(3, 1, &[1.0, 0.0, 0.0]);
        let t = 1e-9_f64;
        let f = DMatrix::from_row_slice(3, 1, &[t.cos(), t.sin(), 0.0]);
        let ang = max_principal_angle(&e, &f);
        assert!((ang - t).abs() < 1e-20 + 1e-6 * t);
        let g = DMatrix::from_row_slice(3, 1, &[0.0, 0.0, 1.0]);
        assert!((max_principal_angle(&e, &g) - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        let two = DMatrix::identity(3, 2);
        assert_eq!(max_principal_angle(&e, &two), std::f64::consts::FRAC_PI_2);
    }
}
