//! Block shift-invert Krylov solver for the lowest eigenpairs of a large
//! sparse symmetric positive semidefinite operator.
//!
//! The Krylov space of `(S + σI)^{-1}` is grown from a seeded random block,
//! with each solve done by conjugate gradients, and the lowest eigenpairs of
//! `S` itself are extracted by Rayleigh–Ritz on that space.

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::CsrMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::Eigenpairs;
use crate::error::{Error, Result};
use crate::linear_map::LinearMap;

#[derive(Debug, Clone, Copy)]
pub struct KrylovOptions {
    /// Shift `σ = shift_rel · ‖S‖`.
    pub shift_rel: f64,
    /// Extra block columns beyond the requested count.
    pub oversample: usize,
    /// Convergence: residual `‖S x - λ x‖ ≤ tol_rel · ‖S‖`.
    pub tol_rel: f64,
    pub cg_tol: f64,
    pub max_blocks: usize,
    pub seed: u64,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        Self {
            shift_rel: 1e-3,
            oversample: 6,
            tol_rel: 1e-10,
            cg_tol: 1e-14,
            max_blocks: 40,
            seed: 0x5eed,
        }
    }
}

fn spmv(a: &CsrMatrix<f64>, x: &DVector<f64>) -> DVector<f64> {
    let mut y = DVector::zeros(a.nrows());
    for (i, row) in a.row_iter().enumerate() {
        y[i] = row.col_indices().iter().zip(row.values()).map(|(&j, &v)| v * x[j]).sum();
    }
    y
}

/// Solves `(S + σI) x = b` by conjugate gradients.
fn cg_solve(s: &CsrMatrix<f64>, shift: f64, b: &DVector<f64>, tol: f64) -> Result<DVector<f64>> {
    let n = b.len();
    let mut x = DVector::zeros(n);
    let mut r = b.clone();
    let mut p = r.clone();
    let mut rr = r.dot(&r);
    let target = (tol * b.norm()).powi(2);
    let max_iter = 20 * n + 100;
    for _ in 0..max_iter {
        if rr <= target {
            return Ok(x);
        }
        let ap = spmv(s, &p) + &p * shift;
        let alpha = rr / p.dot(&ap);
        x.axpy(alpha, &p, 1.0);
        r.axpy(-alpha, &ap, 1.0);
        let rr_new = r.dot(&r);
        p = &r + &p * (rr_new / rr);
        rr = rr_new;
    }
    Err(Error::NoConvergence { iterations: max_iter, residual: rr.sqrt() / b.norm() })
}

/// Orthonormalizes `v` against the columns in `basis` (twice) and returns it
/// if anything significant is left.
fn orthonormalize_against(basis: &[DVector<f64>], mut v: DVector<f64>) -> Option<DVector<f64>> {
    let start = v.norm();
    if start == 0.0 {
        return None;
    }
    for _ in 0..2 {
        for q in basis {
            let c = q.dot(&v);
            v.axpy(-c, q, 1.0);
        }
    }
    let n = v.norm();
    (n > 1e-10 * start).then(|| v / n)
}

/// Lowest `m` eigenpairs of the mass-symmetric operator `op`, eigenvectors
/// in orthonormal coordinates.
pub fn shift_invert_lowest(op: &LinearMap, m: usize, opts: &KrylovOptions) -> Result<Eigenpairs> {
    let n = op.nrows();
    let raw = op.orthonormal_sparse();
    let s = (&raw + &raw.transpose()) * 0.5;
    let norm = op.inf_norm();
    if norm == 0.0 {
        return Ok(Eigenpairs {
            values: vec![0.0; m],
            vectors: DMatrix::identity(n, m),
            complete: m == n,
        });
    }
    let shift = opts.shift_rel * norm;
    let block = (m + opts.oversample).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut frontier: Vec<DVector<f64>> = Vec::new();
    for _ in 0..block {
        let v = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        if let Some(q) = orthonormalize_against(&basis, v) {
            basis.push(q.clone());
            frontier.push(q);
        }
    }

    let mut worst = f64::INFINITY;
    for _ in 0..opts.max_blocks {
        let mut next = Vec::with_capacity(frontier.len());
        for q in &frontier {
            let w = cg_solve(&s, shift, q, opts.cg_tol)?;
            if let Some(v) = orthonormalize_against(&basis, w) {
                basis.push(v.clone());
                next.push(v);
            }
            if basis.len() >= n {
                break;
            }
        }
        // refill a collapsed block with fresh random directions
        while next.len() < frontier.len() && basis.len() < n {
            let v = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
            if let Some(q) = orthonormalize_against(&basis, v) {
                basis.push(q.clone());
                next.push(q);
            }
        }
        frontier = next;

        let v = DMatrix::from_columns(&basis);
        let sv = DMatrix::from_columns(&basis.iter().map(|b| spmv(&s, b)).collect::<Vec<_>>());
        let h = v.transpose() * &sv;
        let h = (&h + h.transpose()) * 0.5;
        let pairs = super::dense_eigenpairs(h);
        let take = m.min(pairs.values.len());
        let ritz = &v * pairs.vectors.columns(0, take);
        worst = 0.0;
        for i in 0..take {
            let x = ritz.column(i).into_owned();
            let r = spmv(&s, &x) - &x * pairs.values[i];
            worst = worst.max(r.norm());
        }
        if take == m && worst <= opts.tol_rel * norm {
            return Ok(Eigenpairs {
                values: pairs.values[..m].to_vec(),
                vectors: ritz,
                complete: m == n,
            });
        }
        if basis.len() >= n || frontier.is_empty() {
            break;
        }
    }
    Err(Error::NoConvergence { iterations: opts.max_blocks, residual: worst / norm })
}
