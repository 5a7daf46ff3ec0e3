//! Sparse linear maps between cochain spaces, carrying the diagonal mass
//! weights that define the inner products on their domain and codomain.

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::{CooMatrix, CsrMatrix};

use crate::error::{Error, Result};

/// A sparse real matrix `A: C_dom -> C_cod` together with the diagonal mass
/// weights of both spaces. The inner product on a space with mass `m` is
/// `<a, b> = sum_i m_i a_i b_i`.
#[derive(Debug, Clone)]
pub struct LinearMap {
    matrix: CsrMatrix<f64>,
    domain_mass: DVector<f64>,
    codomain_mass: DVector<f64>,
}

impl LinearMap {
    pub fn new(
        matrix: CsrMatrix<f64>,
        domain_mass: DVector<f64>,
        codomain_mass: DVector<f64>,
    ) -> Result<Self> {
        if matrix.ncols() != domain_mass.len() || matrix.nrows() != codomain_mass.len() {
            return Err(Error::DimensionMismatch(format!(
                "matrix is {}x{} but masses have lengths {} (domain) and {} (codomain)",
                matrix.nrows(),
                matrix.ncols(),
                domain_mass.len(),
                codomain_mass.len()
            )));
        }
        let positive = |m: &DVector<f64>| m.iter().all(|&w| w > 0.0 && w.is_finite());
        if !positive(&domain_mass) || !positive(&codomain_mass) {
            return Err(Error::DimensionMismatch(
                "mass weights must be strictly positive and finite".into(),
            ));
        }
        Ok(Self { matrix, domain_mass, codomain_mass })
    }

    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(
        triplets: &[(usize, usize, f64)],
        domain_mass: DVector<f64>,
        codomain_mass: DVector<f64>,
    ) -> Result<Self> {
        let mut coo = CooMatrix::new(codomain_mass.len(), domain_mass.len());
        for &(r, c, v) in triplets {
            coo.push(r, c, v);
        }
        Self::new(CsrMatrix::from(&coo), domain_mass, codomain_mass)
    }

    pub fn diagonal(
        entries: &DVector<f64>,
        domain_mass: DVector<f64>,
        codomain_mass: DVector<f64>,
    ) -> Result<Self> {
        let triplets: Vec<_> = entries.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
        Self::from_triplets(&triplets, domain_mass, codomain_mass)
    }

    pub fn identity(mass: DVector<f64>) -> Self {
        let ones = DVector::from_element(mass.len(), 1.0);
        Self::diagonal(&ones, mass.clone(), mass).expect("identity on a valid mass")
    }

    pub fn zero(domain_mass: DVector<f64>, codomain_mass: DVector<f64>) -> Result<Self> {
        Self::from_triplets(&[], domain_mass, codomain_mass)
    }

    pub fn nrows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.nrows() == self.ncols()
    }

    pub fn matrix(&self) -> &CsrMatrix<f64> {
        &self.matrix
    }

    pub fn domain_mass(&self) -> &DVector<f64> {
        &self.domain_mass
    }

    pub fn codomain_mass(&self) -> &DVector<f64> {
        &self.codomain_mass
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        assert_eq!(x.len(), self.ncols(), "vector length does not match map domain");
        let mut y = DVector::zeros(self.nrows());
        for (i, row) in self.matrix.row_iter().enumerate() {
            y[i] = row.col_indices().iter().zip(row.values()).map(|(&j, &a)| a * x[j]).sum();
        }
        y
    }

    /// Mass-weighted adjoint `M_dom^{-1} A^T M_cod`, so that
    /// `<A a, b>_cod = <a, A* b>_dom`.
    pub fn adjoint(&self) -> LinearMap {
        let mut t = self.matrix.transpose();
        let (dm, cm) = (&self.domain_mass, &self.codomain_mass);
        let offsets: Vec<usize> = t.row_offsets().to_vec();
        let cols: Vec<usize> = t.col_indices().to_vec();
        for (r, window) in offsets.windows(2).enumerate() {
            for idx in window[0]..window[1] {
                t.values_mut()[idx] *= cm[cols[idx]] / dm[r];
            }
        }
        LinearMap {
            matrix: t,
            domain_mass: self.codomain_mass.clone(),
            codomain_mass: self.domain_mass.clone(),
        }
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &LinearMap) -> Result<LinearMap> {
        if inner.nrows() != self.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "cannot compose {}x{} after {}x{}",
                self.nrows(),
                self.ncols(),
                inner.nrows(),
                inner.ncols()
            )));
        }
        Ok(LinearMap {
            matrix: &self.matrix * &inner.matrix,
            domain_mass: inner.domain_mass.clone(),
            codomain_mass: self.codomain_mass.clone(),
        })
    }

    pub fn add(&self, other: &LinearMap) -> Result<LinearMap> {
        if self.nrows() != other.nrows() || self.ncols() != other.ncols() {
            return Err(Error::DimensionMismatch("cannot add maps of different shapes".into()));
        }
        Ok(LinearMap {
            matrix: &self.matrix + &other.matrix,
            domain_mass: self.domain_mass.clone(),
            codomain_mass: self.codomain_mass.clone(),
        })
    }

    pub fn scaled(&self, factor: f64) -> LinearMap {
        let mut out = self.clone();
        out.matrix.values_mut().iter_mut().for_each(|v| *v *= factor);
        out
    }

    /// `diag(left) · A · diag(right)`, masses unchanged.
    pub fn scale_rows_cols(&self, left: &DVector<f64>, right: &DVector<f64>) -> LinearMap {
        assert_eq!(left.len(), self.nrows());
        assert_eq!(right.len(), self.ncols());
        let mut out = self.clone();
        let offsets: Vec<usize> = out.matrix.row_offsets().to_vec();
        let cols: Vec<usize> = out.matrix.col_indices().to_vec();
        for (r, window) in offsets.windows(2).enumerate() {
            for idx in window[0]..window[1] {
                out.matrix.values_mut()[idx] *= left[r] * right[cols[idx]];
            }
        }
        out
    }

    /// Drops explicitly stored zeros.
    pub fn pruned(&self) -> LinearMap {
        let mut coo = CooMatrix::new(self.nrows(), self.ncols());
        for (r, c, &v) in self.matrix.triplet_iter() {
            if v != 0.0 {
                coo.push(r, c, v);
            }
        }
        LinearMap {
            matrix: CsrMatrix::from(&coo),
            domain_mass: self.domain_mass.clone(),
            codomain_mass: self.codomain_mass.clone(),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows(), self.ncols());
        for (r, c, &v) in self.matrix.triplet_iter() {
            m[(r, c)] += v;
        }
        m
    }

    /// The matrix in mass-orthonormal coordinates:
    /// `sqrt(M_cod) · A · sqrt(M_dom)^{-1}`.
    pub fn orthonormal_dense(&self) -> DMatrix<f64> {
        let mut m = self.to_dense();
        for r in 0..m.nrows() {
            let left = self.codomain_mass[r].sqrt();
            for c in 0..m.ncols() {
                m[(r, c)] *= left / self.domain_mass[c].sqrt();
            }
        }
        m
    }

    pub fn max_abs(&self) -> f64 {
        self.matrix.values().iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    /// Frobenius norm of the orthonormal-coordinate matrix.
    pub fn frobenius_norm(&self) -> f64 {
        self.matrix
            .triplet_iter()
            .map(|(r, c, &v)| {
                let w = v * (self.codomain_mass[r] / self.domain_mass[c]).sqrt();
                w * w
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Infinity norm (max absolute row sum) of the orthonormal-coordinate
    /// matrix; an upper bound on the spectral radius for endomorphisms.
    pub fn inf_norm(&self) -> f64 {
        self.matrix
            .row_iter()
            .enumerate()
            .map(|(r, row)| {
                row.col_indices()
                    .iter()
                    .zip(row.values())
                    .map(|(&c, v)| (v * (self.codomain_mass[r] / self.domain_mass[c]).sqrt()).abs())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    /// Relative asymmetry of an endomorphism in its mass inner product,
    /// `max |S - S^T| / max |S|` with `S` the orthonormal-coordinate matrix.
    pub fn mass_asymmetry(&self) -> f64 {
        let s = self.orthonormal_dense();
        let scale = s.amax();
        if scale == 0.0 {
            return 0.0;
        }
        (&s - s.transpose()).amax() / scale
    }

    /// Orthonormal-coordinate matrix `sqrt(M_cod) A sqrt(M_dom)^{-1}`, sparse.
    pub fn orthonormal_sparse(&self) -> CsrMatrix<f64> {
        let left = self.codomain_mass.map(f64::sqrt);
        let right = self.domain_mass.map(|m| 1.0 / m.sqrt());
        self.scale_rows_cols(&left, &right).matrix
    }

    /// Same as [`LinearMap::mass_asymmetry`] without densifying.
    pub fn mass_asymmetry_sparse(&self) -> f64 {
        let s = self.orthonormal_sparse();
        let scale = s.values().iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        let diff = &s - &s.transpose();
        diff.values().iter().fold(0.0_f64, |a, v| a.max(v.abs())) / scale
    }

    pub fn nnz(&self) -> usize {
        self.matrix.nnz()
    }
}
