//! Residual checks shared by the command line and the test suites.

use nalgebra::DVector;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::leaf_complex::{Cochain, CochainComplex};
use crate::linear_map::LinearMap;

/// `‖d^{k+1} d^k‖` against `‖d^{k+1}‖ ‖d^k‖` (max-entry and inf norms in
/// orthonormal coordinates).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComplexResidual {
    pub degree: usize,
    pub norm: f64,
    pub scale: f64,
}

impl ComplexResidual {
    pub fn relative(&self) -> f64 {
        if self.scale == 0.0 {
            self.norm
        } else {
            self.norm / self.scale
        }
    }
}

pub fn complex_residual<C: CochainComplex + ?Sized>(complex: &C, k: usize) -> Result<ComplexResidual> {
    let p = complex.grid().dim_p();
    if k + 2 > p {
        return Err(Error::DegreeOutOfRange { degree: k, dim_p: p });
    }
    let a = complex.differential(k)?;
    let b = complex.differential(k + 1)?;
    let norm = b.compose(&a)?.orthonormal_sparse().values().iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    Ok(ComplexResidual { degree: k, norm, scale: a.inf_norm() * b.inf_norm() })
}

pub fn random_cochain<R: Rng>(complex: &(impl CochainComplex + ?Sized), k: usize, rng: &mut R) -> Cochain {
    let n = complex.grid().cell_count(k);
    Cochain::new(k, DVector::from_fn(n, |_, _| rng.gen_range(-1.0..=1.0)))
}

fn weighted(a: &DVector<f64>, b: &DVector<f64>, m: &DVector<f64>) -> f64 {
    a.iter().zip(b.iter()).zip(m.iter()).map(|((x, y), w)| x * y * w).sum()
}

fn weighted_norm(a: &DVector<f64>, m: &DVector<f64>) -> f64 {
    weighted(a, a, m).sqrt()
}

/// Largest `|<d a, b> - <a, d* b>| / (‖d a‖ ‖b‖ + ‖a‖ ‖d* b‖)` over `pairs`
/// random pairs.
pub fn adjointness_residual<C: CochainComplex + ?Sized, R: Rng>(
    complex: &C,
    k: usize,
    pairs: usize,
    rng: &mut R,
) -> Result<f64> {
    let d = complex.differential(k)?;
    let adj = complex.adjoint_differential(k)?;
    pair_residual(&d, &adj, pairs, rng)
}

/// Same residual for an explicit map and a candidate adjoint.
pub fn pair_residual<R: Rng>(d: &LinearMap, adj: &LinearMap, pairs: usize, rng: &mut R) -> Result<f64> {
    if adj.nrows() != d.ncols() || adj.ncols() != d.nrows() {
        return Err(Error::DimensionMismatch("adjoint has the wrong shape".into()));
    }
    let (m_dom, m_cod) = (d.domain_mass(), d.codomain_mass());
    let mut worst = 0.0_f64;
    for _ in 0..pairs {
        let a = DVector::from_fn(d.ncols(), |_, _| rng.gen_range(-1.0..=1.0));
        let b = DVector::from_fn(d.nrows(), |_, _| rng.gen_range(-1.0..=1.0));
        let da = d.apply(&a);
        let sb = adj.apply(&b);
        let lhs = weighted(&da, &b, m_cod);
        let rhs = weighted(&a, &sb, m_dom);
        let scale = weighted_norm(&da, m_cod) * weighted_norm(&b, m_cod)
            + weighted_norm(&a, m_dom) * weighted_norm(&sb, m_dom);
        if scale > 0.0 {
            worst = worst.max((lhs - rhs).abs() / scale);
        }
    }
    Ok(worst)
}

/// A complex whose `d^k` has one entry perturbed; used to exercise failure
/// paths.
pub struct Corrupted<'a, C: ?Sized> {
    pub inner: &'a C,
    pub degree: usize,
    pub amount: f64,
}

impl<C: CochainComplex + ?Sized> CochainComplex for Corrupted<'_, C> {
    fn grid(&self) -> &crate::leaf_complex::LeafGrid {
        self.inner.grid()
    }

    fn differential(&self, k: usize) -> Result<LinearMap> {
        let d = self.inner.differential(k)?;
        if k != self.degree {
            return Ok(d);
        }
        let bump = LinearMap::from_triplets(
            &[(0, 0, self.amount * d.max_abs())],
            d.domain_mass().clone(),
            d.codomain_mass().clone(),
        )?;
        d.add(&bump)
    }
}
