//! Hodge decomposition, harmonic bases and Betti numbers for the plain and
//! the deformed leaf complex, plus the numerical checks of the transport
//! identities and the block-triangular form of the conjugation operator.
//!
//! Bases are kept in mass-orthonormal coordinates internally and converted
//! to cochains at the boundary.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::dense;
use crate::error::{Error, Result};
use crate::leaf_complex::{Cochain, CochainComplex};
use crate::linear_map::LinearMap;
use crate::spectral::{self, KernelPolicy, SpectrumReport};
use crate::subspace::{
    column_space, max_principal_angle, null_space, orthonormalize, rank, smallest_right_singular_vectors,
};
use crate::witten::DeformationContext;

/// Harmonic space of `Δ^k` with the report that decided its dimension.
#[derive(Debug, Clone)]
pub struct HarmonicSpace {
    pub report: SpectrumReport,
    /// orthonormal coordinates, one column per basis vector
    basis: DMatrix<f64>,
    mass: DVector<f64>,
}

impl HarmonicSpace {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn orthonormal_basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// Mass-orthonormal basis in cochain coordinates (columns).
    pub fn cochain_basis(&self) -> DMatrix<f64> {
        spectral::from_orthonormal(&self.basis, &self.mass)
    }

    pub fn cochains(&self, k: usize) -> Vec<Cochain> {
        let b = self.cochain_basis();
        b.column_iter().map(|c| Cochain::new(k, c.into_owned())).collect()
    }
}

pub fn harmonic_space<C: CochainComplex + ?Sized>(
    complex: &C,
    k: usize,
    policy: &KernelPolicy,
) -> Result<HarmonicSpace> {
    complex.grid().require_periodic()?;
    let lap = complex.laplacian(k)?;
    let kc = spectral::kernel_computation(&lap, policy)?;
    if kc.report.ambiguous {
        return Err(Error::AmbiguousKernel(Box::new(kc.report)));
    }
    let n = lap.nrows();
    let dim = kc.report.kernel_dim;
    let basis = if dim > 0 && n <= policy.dense_limit {
        // The spectrum of Δ fixes the dimension. The vectors come from the
        // stacked operator [d^k; (d^{k-1})*], whose singular values are the
        // square roots of the eigenvalues of Δ, so a small spectral gap costs
        // half as many digits.
        smallest_right_singular_vectors(&stacked_differentials(complex, k)?, dim)
    } else {
        kc.kernel_vectors
    };
    Ok(HarmonicSpace { report: kc.report, basis, mass: complex.grid().mass(k) })
}

/// `[d^k; (d^{k-1})*]` in orthonormal coordinates; its Gram matrix is `Δ^k`.
fn stacked_differentials<C: CochainComplex + ?Sized>(complex: &C, k: usize) -> Result<DMatrix<f64>> {
    let grid = complex.grid();
    let n = grid.cell_count(k);
    let down = if k < grid.dim_p() { complex.differential(k)?.orthonormal_dense() } else { DMatrix::zeros(0, n) };
    let up = if k > 0 { complex.adjoint_differential(k - 1)?.orthonormal_dense() } else { DMatrix::zeros(0, n) };
    let mut out = DMatrix::zeros(down.nrows() + up.nrows(), n);
    out.rows_mut(0, down.nrows()).copy_from(&down);
    out.rows_mut(down.nrows(), up.nrows()).copy_from(&up);
    Ok(out)
}

/// Mass-orthonormal basis of the numerical kernel of `Δ^k` (or `Δ_ε^k`).
pub fn harmonic_basis<C: CochainComplex + ?Sized>(
    complex: &C,
    k: usize,
    policy: &KernelPolicy,
) -> Result<Vec<Cochain>> {
    Ok(harmonic_space(complex, k, policy)?.cochains(k))
}

/// Result of splitting one cochain.
#[derive(Debug, Clone)]
pub struct HodgeSplit {
    pub harmonic: Cochain,
    pub exact: Cochain,
    pub coexact: Cochain,
    /// `‖ω - (h + e + c)‖ / ‖ω‖`
    pub residual: f64,
    /// Largest `|<x, y>| / ‖ω‖²` over the three pairs.
    pub max_orthogonality: f64,
}

/// Precomputed projectors onto the three Hodge summands at one degree.
#[derive(Debug, Clone)]
pub struct HodgeProjector {
    degree: usize,
    mass: DVector<f64>,
    harmonic: HarmonicSpace,
    exact: DMatrix<f64>,
    coexact: DMatrix<f64>,
}

impl HodgeProjector {
    pub fn new<C: CochainComplex + ?Sized>(complex: &C, k: usize, policy: &KernelPolicy) -> Result<Self> {
        let grid = complex.grid();
        let p = grid.dim_p();
        let n = grid.cell_count(k);
        let harmonic = harmonic_space(complex, k, policy)?;
        let exact = if k > 0 {
            column_space(&complex.differential(k - 1)?.orthonormal_dense(), policy).0
        } else {
            DMatrix::zeros(n, 0)
        };
        let coexact = if k < p {
            column_space(&complex.adjoint_differential(k)?.orthonormal_dense(), policy).0
        } else {
            DMatrix::zeros(n, 0)
        };
        Ok(Self { degree: k, mass: grid.mass(k), harmonic, exact, coexact })
    }

    pub fn harmonic(&self) -> &HarmonicSpace {
        &self.harmonic
    }

    pub fn exact_dim(&self) -> usize {
        self.exact.ncols()
    }

    pub fn coexact_dim(&self) -> usize {
        self.coexact.ncols()
    }

    pub fn decompose(&self, omega: &Cochain) -> Result<HodgeSplit> {
        if omega.degree != self.degree {
            return Err(Error::DegreeMismatch { expected: self.degree, got: omega.degree });
        }
        if omega.len() != self.mass.len() {
            return Err(Error::DimensionMismatch("cochain length does not match grid".into()));
        }
        let sqrt_m = self.mass.map(f64::sqrt);
        let w = omega.values.component_mul(&sqrt_m);
        let project = |basis: &DMatrix<f64>| -> DVector<f64> {
            if basis.ncols() == 0 {
                DVector::zeros(w.len())
            } else {
                basis * (basis.transpose() * &w)
            }
        };
        let h = project(self.harmonic.orthonormal_basis());
        let e = project(&self.exact);
        let c = project(&self.coexact);
        let norm2 = w.norm_squared();
        let residual = if norm2 == 0.0 { 0.0 } else { (&w - &h - &e - &c).norm() / norm2.sqrt() };
        let max_orthogonality = if norm2 == 0.0 {
            0.0
        } else {
            [h.dot(&e), h.dot(&c), e.dot(&c)].iter().fold(0.0_f64, |a, v| a.max(v.abs())) / norm2
        };
        let back = |v: DVector<f64>| Cochain::new(self.degree, v.component_div(&sqrt_m));
        Ok(HodgeSplit { harmonic: back(h), exact: back(e), coexact: back(c), residual, max_orthogonality })
    }
}

pub fn hodge_decompose<C: CochainComplex + ?Sized>(
    complex: &C,
    k: usize,
    omega: &Cochain,
    policy: &KernelPolicy,
) -> Result<HodgeSplit> {
    HodgeProjector::new(complex, k, policy)?.decompose(omega)
}

/// `β_k = dim Ker Δ^k` for `k = 0..=p`. Ambiguous degrees abort.
pub fn betti_numbers<C: CochainComplex + ?Sized>(complex: &C, policy: &KernelPolicy) -> Result<Vec<usize>> {
    complex.grid().require_periodic()?;
    (0..=complex.grid().dim_p())
        .map(|k| {
            let r = spectral::kernel_dimension(&complex.laplacian(k)?, policy)?;
            if r.ambiguous {
                Err(Error::AmbiguousKernel(Box::new(r)))
            } else {
                Ok(r.kernel_dim)
            }
        })
        .collect()
}

/// Both sides of the rank–nullity form of the Euler characteristic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EulerCheck {
    /// `Σ (-1)^k β_k`
    pub from_betti: i64,
    /// `Σ (-1)^k (dim C^k - rank d^k - rank d^{k-1})`
    pub from_ranks: i64,
}

pub fn euler_check<C: CochainComplex + ?Sized>(complex: &C, policy: &KernelPolicy) -> Result<EulerCheck> {
    let betti = betti_numbers(complex, policy)?;
    let p = complex.grid().dim_p();
    let ranks: Vec<usize> = (0..p)
        .map(|k| Ok(rank(&complex.differential(k)?.orthonormal_dense(), policy)))
        .collect::<Result<_>>()?;
    let sign = |k: usize| if k.is_multiple_of(2) { 1 } else { -1 };
    let from_betti = betti.iter().enumerate().map(|(k, &b)| sign(k) * b as i64).sum();
    let from_ranks = (0..=p)
        .map(|k| {
            let dim = complex.grid().cell_count(k) as i64;
            let out = if k < p { ranks[k] as i64 } else { 0 };
            let inc = if k > 0 { ranks[k - 1] as i64 } else { 0 };
            sign(k) * (dim - out - inc)
        })
        .sum();
    Ok(EulerCheck { from_betti, from_ranks })
}

/// Largest principal angles for the transport identities at degree `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransportAngles {
    pub degree: usize,
    /// between `T^k (Ker d^k)` and `Ker d_ε^k`
    pub kernel_angle: f64,
    /// between `T^{k+1} (Im d^k)` and `Im d_ε^k`
    pub image_angle: f64,
    pub kernel_dims: (usize, usize),
    pub image_dims: (usize, usize),
}

fn scale_rows(m: &DMatrix<f64>, diag: &DVector<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for (i, mut row) in out.row_iter_mut().enumerate() {
        row *= diag[i];
    }
    out
}

/// Compares `T(Ker d)` with `Ker d_ε` and `T(Im d)` with `Im d_ε` at
/// degree `k < p`. All subspaces are computed independently from the two
/// differentials.
pub fn verify_transport_identities(
    ctx: &DeformationContext<'_>,
    k: usize,
    policy: &KernelPolicy,
) -> Result<TransportAngles> {
    let grid = ctx.grid_ref();
    if k >= grid.dim_p() {
        return Err(Error::DegreeOutOfRange { degree: k, dim_p: grid.dim_p() });
    }
    let d = grid.exterior_derivative(k)?.orthonormal_dense();
    let d_eps = ctx.deformed_differential(k)?.orthonormal_dense();
    // T is diagonal and commutes with the diagonal mass scaling
    let t_k = ctx.conjugator_diagonal(k)?;
    let t_k1 = ctx.conjugator_diagonal(k + 1)?;

    let ker = null_space(&d, policy).0;
    let ker_eps = null_space(&d_eps, policy).0;
    let moved_ker = orthonormalize(&scale_rows(&ker, t_k), policy);

    let im = column_space(&d, policy).0;
    let im_eps = column_space(&d_eps, policy).0;
    let moved_im = orthonormalize(&scale_rows(&im, t_k1), policy);

    Ok(TransportAngles {
        degree: k,
        kernel_angle: max_principal_angle(&moved_ker, &ker_eps),
        image_angle: max_principal_angle(&moved_im, &im_eps),
        kernel_dims: (moved_ker.ncols(), ker_eps.ncols()),
        image_dims: (moved_im.ncols(), im_eps.ncols()),
    })
}

/// Blocks of `T^k` in the decompositions `H ⊕ Im d^{k-1}` (source) and
/// `H_ε ⊕ Im d_ε^{k-1}` (target).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockReport {
    pub degree: usize,
    /// `‖Q_ε^harm T P^exact‖₂`
    pub zero_block_norm: f64,
    /// `‖T‖₂ = max e^{-εφ}`
    pub conjugator_norm: f64,
    pub u_singular_values: Vec<f64>,
    pub u_min_singular: Option<f64>,
    pub b_min_singular: Option<f64>,
    /// Smallest singular value of `Δ_ε^k` restricted to `Im d^{k-1}`.
    pub laplacian_on_exact_min_singular: Option<f64>,
    /// `(dim harmonic, dim exact)` of the undeformed complex
    pub dims: (usize, usize),
    /// same for the deformed complex
    pub deformed_dims: (usize, usize),
}

fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    dense::singular_values(m).first().copied().unwrap_or(0.0)
}

pub fn verify_block_structure(
    ctx: &DeformationContext<'_>,
    k: usize,
    policy: &KernelPolicy,
) -> Result<BlockReport> {
    let grid = ctx.grid_ref();
    let plain = HodgeProjector::new(grid, k, policy)?;
    let deformed = HodgeProjector::new(ctx, k, policy)?;
    let dims = (plain.harmonic.dim(), plain.exact_dim());
    let deformed_dims = (deformed.harmonic.dim(), deformed.exact_dim());
    if dims.0 != deformed_dims.0 {
        return Err(Error::KernelDimensionMismatch { undeformed: dims.0, deformed: deformed_dims.0 });
    }
    if dims.1 != deformed_dims.1 {
        return Err(Error::DimensionMismatch(format!(
            "exact subspaces differ in dimension ({} vs {})",
            dims.1, deformed_dims.1
        )));
    }
    let t = ctx.conjugator_diagonal(k)?;
    let h = plain.harmonic.orthonormal_basis();
    let h_eps = deformed.harmonic.orthonormal_basis();
    let th = scale_rows(h, t);
    let te = scale_rows(&plain.exact, t);

    let u = h_eps.transpose() * &th;
    let zero = h_eps.transpose() * &te;
    let b = deformed.exact.transpose() * &te;

    let u_singular_values = dense::singular_values(&u);
    let u_min_singular = u_singular_values.last().copied();
    let b_min_singular = dense::singular_values(&b).last().copied();
    let laplacian_on_exact_min_singular = if plain.exact_dim() > 0 {
        let lap = ctx.witten_laplacian(k)?.orthonormal_dense();
        dense::singular_values(&(lap * &plain.exact)).last().copied()
    } else {
        None
    };

    Ok(BlockReport {
        degree: k,
        zero_block_norm: spectral_norm(&zero),
        conjugator_norm: t.max(),
        u_singular_values,
        u_min_singular,
        b_min_singular,
        laplacian_on_exact_min_singular,
        dims,
        deformed_dims,
    })
}

/// Kernel transport `U^k` built from freshly computed harmonic spaces.
pub fn transport_between_harmonics(
    ctx: &DeformationContext<'_>,
    k: usize,
    policy: &KernelPolicy,
) -> Result<crate::witten::KernelTransport> {
    let plain = harmonic_space(ctx.grid_ref(), k, policy)?;
    let deformed = harmonic_space(ctx, k, policy)?;
    crate::witten::kernel_transport(ctx, k, &plain.cochain_basis(), &deformed.cochain_basis())
}

/// Dense map of an operator restricted to the columns of `basis`; used by
/// tests that corrupt a differential.
pub fn restrict(op: &LinearMap, basis: &DMatrix<f64>) -> DMatrix<f64> {
    op.orthonormal_dense() * basis
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::leaf_complex::LeafGrid;
    use crate::potential::{Factor, LeafEmbedding, LeafPotential, TrigPotential};
    use rand::{Rng, SeedableRng};

    const FLAT: LeafEmbedding = LeafEmbedding::Product { transverse: Vec::new() };

    fn cosine() -> TrigPotential {
        TrigPotential::periodic(1, 0, &[(1.0, &[Factor::Cos(1)])]).unwrap()
    }

    #[test]
    fn circle_constants_are_harmonic() {
        let g = LeafGrid::circle(16).unwrap();
        let b = harmonic_basis(&g, 0, &KernelPolicy::default()).unwrap();
        assert_eq!(b.len(), 1);
        let v = &b[0].values;
        let expect = 1.0 / (16.0 * g.volume()).sqrt();
        assert!(v.iter().all(|x| (x.abs() - expect).abs() < 1e-12));
    }

    #[test]
    fn deformed_circle_harmonic_is_ground_state() {
        let g = LeafGrid::circle(32).unwrap();
        let f = cosine();
        let ctx = DeformationContext::new(&g, LeafPotential { potential: &f, embedding: &FLAT }, 1.0).unwrap();
        let b = harmonic_basis(&ctx, 0, &KernelPolicy::default()).unwrap();
        assert_eq!(b.len(), 1);
        let ground = ctx.ground_state();
        let m = g.volume();
        let overlap = (b[0].values.dot(&ground) * m).abs() / (ground.norm_squared() * m).sqrt();
        assert!(overlap >= 1.0 - 1e-8, "overlap {overlap}");
    }

    #[test]
    fn torus_one_forms() {
        let g = LeafGrid::torus(6, 5).unwrap();
        let b = harmonic_basis(&g, 1, &KernelPolicy::default()).unwrap();
        assert_eq!(b.len(), 2);
        // spanned by constant dx and dy fields
        let nx = 30;
        let dx = DVector::from_fn(60, |i, _| if i < nx { 1.0 } else { 0.0 });
        let dy = DVector::from_fn(60, |i, _| if i >= nx { 1.0 } else { 0.0 });
        for c in &b {
            let resid = &c.values - &dx * (c.values.dot(&dx) / 30.0) - &dy * (c.values.dot(&dy) / 30.0);
            assert!(resid.amax() < 1e-10);
        }
    }

    #[test]
    fn decompositions() {
        let g = LeafGrid::circle(16).unwrap();
        let policy = KernelPolicy::default();
        let c = g.constant_cochain(0, 2.0);
        let s = hodge_decompose(&g, 0, &c, &policy).unwrap();
        assert!((&s.harmonic.values - &c.values).amax() < 1e-12);
        assert!(s.exact.values.amax() < 1e-12 && s.coexact.values.amax() < 1e-12);

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let f = DVector::from_fn(16, |_, _| rng.gen_range(-1.0..1.0));
        let w = Cochain::new(1, g.exterior_derivative(0).unwrap().apply(&f));
        let s = hodge_decompose(&g, 1, &w, &policy).unwrap();
        assert!((&s.exact.values - &w.values).amax() <= 1e-10 * w.values.amax());

        let t = LeafGrid::torus(5, 4).unwrap();
        let proj = HodgeProjector::new(&t, 1, &policy).unwrap();
        let w = Cochain::new(1, DVector::from_fn(40, |_, _| rng.gen_range(-1.0..1.0)));
        let s = proj.decompose(&w).unwrap();
        assert!(s.residual <= 1e-10);
        assert!(s.max_orthogonality <= 1e-10);
        assert!(proj.decompose(&Cochain::new(0, DVector::zeros(20))).is_err());
    }

    #[test]
    fn betti_of_circle_and_torus() {
        let policy = KernelPolicy::default();
        assert_eq!(betti_numbers(&LeafGrid::circle(12).unwrap(), &policy).unwrap(), vec![1, 1]);
        let t = LeafGrid::torus(6, 6).unwrap();
        assert_eq!(betti_numbers(&t, &policy).unwrap(), vec![1, 2, 1]);
        let e = euler_check(&t, &policy).unwrap();
        assert_eq!(e, EulerCheck { from_betti: 0, from_ranks: 0 });
    }

    #[test]
    fn transport_trivial_at_zero_epsilon() {
        let g = LeafGrid::circle(16).unwrap();
        let f = cosine();
        let ctx = DeformationContext::new(&g, LeafPotential { potential: &f, embedding: &FLAT }, 0.0).unwrap();
        let a = verify_transport_identities(&ctx, 0, &KernelPolicy::default()).unwrap();
        assert!(a.kernel_angle < 1e-14 && a.image_angle < 1e-14);
        let b = verify_block_structure(&ctx, 0, &KernelPolicy::default()).unwrap();
        assert_eq!(b.zero_block_norm, 0.0);
        assert!((b.u_min_singular.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(b.b_min_singular, None);
    }

    #[test]
    fn circle_transport_and_blocks() {
        let g = LeafGrid::circle(32).unwrap();
        let f = cosine();
        let ctx = DeformationContext::new(&g, LeafPotential { potential: &f, embedding: &FLAT }, 1.0).unwrap();
        let policy = KernelPolicy::default();
        let a = verify_transport_identities(&ctx, 0, &policy).unwrap();
        assert!(a.kernel_angle <= 1e-8 && a.image_angle <= 1e-8, "{a:?}");
        let b = verify_block_structure(&ctx, 1, &policy).unwrap();
        assert!(b.zero_block_norm <= 1e-10 * b.conjugator_norm);
        assert!(b.u_min_singular.unwrap() > 0.0 && b.b_min_singular.unwrap() > 0.0);
        let u = transport_between_harmonics(&ctx, 0, &policy).unwrap();
        assert_eq!(u.matrix.shape(), (1, 1));
        assert!(u.min_singular > 0.0);
    }
}
