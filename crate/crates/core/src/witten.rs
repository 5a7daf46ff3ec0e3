//! Witten deformation of the leafwise complex by a potential `φ`:
//! `d_ε = e^{-εφ} d (e^{εφ} ·) = T^{k+1} d^k (T^k)^{-1}` with `T^k` the
//! diagonal multiplication by `e^{-εφ}` at the `k`-cell barycenters.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::leaf_complex::{CochainComplex, LeafGrid};
use crate::linear_map::LinearMap;
use crate::potential::LeafPotential;

pub const DEFAULT_OVERFLOW_BUDGET: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeformationOptions {
    /// Maximum allowed `ε · (max φ - min φ)`.
    pub overflow_budget: f64,
    /// Replace `φ` by `φ - mean(φ)` (mean over vertices) before
    /// exponentiating.
    pub center: bool,
}

impl Default for DeformationOptions {
    fn default() -> Self {
        Self { overflow_budget: DEFAULT_OVERFLOW_BUDGET, center: true }
    }
}

/// Deformed complex on one leaf for a fixed `(φ, ε)`.
#[derive(Debug, Clone)]
pub struct DeformationContext<'g> {
    grid: &'g LeafGrid,
    epsilon: f64,
    /// `φ` (possibly centered) at the barycenters of each degree
    phi: Vec<DVector<f64>>,
    conjugators: Vec<DVector<f64>>,
}

impl<'g> DeformationContext<'g> {
    pub fn new(grid: &'g LeafGrid, potential: LeafPotential<'_>, epsilon: f64) -> Result<Self> {
        Self::with_options(grid, potential, epsilon, DeformationOptions::default())
    }

    pub fn with_options(
        grid: &'g LeafGrid,
        potential: LeafPotential<'_>,
        epsilon: f64,
        options: DeformationOptions,
    ) -> Result<Self> {
        if potential.potential.leaf_dim() != grid.dim_p() {
            return Err(Error::DimensionMismatch(format!(
                "potential has {} leaf coordinates, grid has dimension {}",
                potential.potential.leaf_dim(),
                grid.dim_p()
            )));
        }
        let mut phi = Vec::with_capacity(grid.dim_p() + 1);
        for k in 0..=grid.dim_p() {
            let vals = grid
                .barycenters(k)
                .iter()
                .map(|s| potential.value(s))
                .collect::<Result<Vec<f64>>>()?;
            phi.push(DVector::from_vec(vals));
        }
        Self::from_samples(grid, phi, epsilon, options)
    }

    /// Builds from precomputed potential samples, one vector per degree.
    pub fn from_samples(
        grid: &'g LeafGrid,
        mut phi: Vec<DVector<f64>>,
        epsilon: f64,
        options: DeformationOptions,
    ) -> Result<Self> {
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidEpsilon(epsilon));
        }
        grid.require_periodic()?;
        if phi.len() != grid.dim_p() + 1
            || phi.iter().enumerate().any(|(k, v)| v.len() != grid.cell_count(k))
        {
            return Err(Error::DimensionMismatch("potential samples do not match the grid".into()));
        }
        if options.center {
            let mean = phi[0].mean();
            for v in &mut phi {
                v.add_scalar_mut(-mean);
            }
        }
        let (lo, hi) = phi.iter().flat_map(|v| v.iter()).fold(
            (f64::INFINITY, f64::NEG_INFINITY),
            |(lo, hi), &x| (lo.min(x), hi.max(x)),
        );
        let product = epsilon * (hi - lo);
        if product > options.overflow_budget {
            return Err(Error::OverflowBudget { product, budget: options.overflow_budget });
        }
        let conjugators: Vec<DVector<f64>> =
            phi.iter().map(|v| v.map(|x| (-epsilon * x).exp())).collect();
        if conjugators.iter().flat_map(|v| v.iter()).any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::OverflowBudget { product, budget: options.overflow_budget });
        }
        Ok(Self { grid, epsilon, phi, conjugators })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn grid_ref(&self) -> &'g LeafGrid {
        self.grid
    }

    /// Potential samples (after centering) at the `k`-cell barycenters.
    pub fn phi(&self, k: usize) -> &DVector<f64> {
        &self.phi[k]
    }

    fn check(&self, k: usize) -> Result<()> {
        if k > self.grid.dim_p() {
            Err(Error::DegreeOutOfRange { degree: k, dim_p: self.grid.dim_p() })
        } else {
            Ok(())
        }
    }

    /// Diagonal of `T^k`.
    pub fn conjugator_diagonal(&self, k: usize) -> Result<&DVector<f64>> {
        self.check(k)?;
        Ok(&self.conjugators[k])
    }

    /// `T^k`: multiplication by `e^{-εφ}`.
    pub fn conjugation_operator(&self, k: usize) -> Result<LinearMap> {
        self.check(k)?;
        let m = self.grid.mass(k);
        LinearMap::diagonal(&self.conjugators[k], m.clone(), m)
    }

    /// `d_ε^k = T^{k+1} d^k (T^k)^{-1}`.
    pub fn deformed_differential(&self, k: usize) -> Result<LinearMap> {
        let d = self.grid.exterior_derivative(k)?;
        let inv = self.conjugators[k].map(|t| 1.0 / t);
        Ok(d.scale_rows_cols(&self.conjugators[k + 1], &inv))
    }

    /// `d_ε^k` evaluated cell by cell as `e^{-εφ(c)} · (d (e^{εφ} ω))(c)`,
    /// with the exponentials computed directly from the potential samples.
    /// Independent of the conjugator diagonals.
    pub fn deformed_differential_pointwise(&self, k: usize) -> Result<LinearMap> {
        let d = self.grid.exterior_derivative(k)?;
        let eps = self.epsilon;
        let (src, dst) = (&self.phi[k], &self.phi[k + 1]);
        let mut triplets = Vec::with_capacity(d.nnz());
        for (r, c, &v) in d.matrix().triplet_iter() {
            let lifted = v * (eps * src[c]).exp();
            triplets.push((r, c, (-eps * dst[r]).exp() * lifted));
        }
        LinearMap::from_triplets(&triplets, d.domain_mass().clone(), d.codomain_mass().clone())
    }

    /// Mass-adjoint of `d_ε^k`, equal to `(T^k)^{-1} δ^k T^{k+1}`.
    pub fn deformed_adjoint(&self, k: usize) -> Result<LinearMap> {
        Ok(self.deformed_differential(k)?.adjoint())
    }

    /// `Δ_ε^k = d_ε* d_ε + d_ε d_ε*`.
    pub fn witten_laplacian(&self, k: usize) -> Result<LinearMap> {
        CochainComplex::laplacian(self, k)
    }

    /// `e^{-εφ}` sampled on vertices; spans `Ker d_ε^0`.
    pub fn ground_state(&self) -> DVector<f64> {
        self.conjugators[0].clone()
    }
}

impl CochainComplex for DeformationContext<'_> {
    fn grid(&self) -> &LeafGrid {
        self.grid
    }

    fn differential(&self, k: usize) -> Result<LinearMap> {
        self.deformed_differential(k)
    }
}

pub fn conjugation_operator(ctx: &DeformationContext<'_>, k: usize) -> Result<LinearMap> {
    ctx.conjugation_operator(k)
}

pub fn deformed_differential(ctx: &DeformationContext<'_>, k: usize) -> Result<LinearMap> {
    ctx.deformed_differential(k)
}

pub fn deformed_adjoint(ctx: &DeformationContext<'_>, k: usize) -> Result<LinearMap> {
    ctx.deformed_adjoint(k)
}

pub fn witten_laplacian(ctx: &DeformationContext<'_>, k: usize) -> Result<LinearMap> {
    ctx.witten_laplacian(k)
}

/// Matrix of `U^k = Q_ε T^k Q` between the two harmonic spaces.
#[derive(Debug, Clone)]
pub struct KernelTransport {
    /// `dim Ker Δ_ε^k × dim Ker Δ^k`, in the given orthonormal bases.
    pub matrix: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub min_singular: f64,
}

impl KernelTransport {
    pub fn as_linear_map(&self) -> LinearMap {
        let (r, c) = self.matrix.shape();
        let triplets: Vec<_> = (0..r)
            .flat_map(|i| (0..c).map(move |j| (i, j)))
            .map(|(i, j)| (i, j, self.matrix[(i, j)]))
            .collect();
        LinearMap::from_triplets(
            &triplets,
            DVector::from_element(c, 1.0),
            DVector::from_element(r, 1.0),
        )
        .expect("unit masses")
    }
}

/// Expresses `Q_ε T^k Q` restricted to `Ker Δ^k` in the two mass-orthonormal
/// harmonic bases (columns of the matrices, in cochain coordinates).
pub fn kernel_transport(
    ctx: &DeformationContext<'_>,
    k: usize,
    harmonic_basis: &DMatrix<f64>,
    deformed_harmonic_basis: &DMatrix<f64>,
) -> Result<KernelTransport> {
    if harmonic_basis.ncols() != deformed_harmonic_basis.ncols() {
        return Err(Error::KernelDimensionMismatch {
            undeformed: harmonic_basis.ncols(),
            deformed: deformed_harmonic_basis.ncols(),
        });
    }
    let t = ctx.conjugator_diagonal(k)?;
    let mass = ctx.grid().mass(k);
    let n = mass.len();
    if harmonic_basis.nrows() != n || deformed_harmonic_basis.nrows() != n {
        return Err(Error::DimensionMismatch("basis length does not match the grid".into()));
    }
    let mut transported = harmonic_basis.clone();
    for (i, mut row) in transported.row_iter_mut().enumerate() {
        row *= t[i] * mass[i];
    }
    let matrix = deformed_harmonic_basis.transpose() * transported;
    let singular_values = crate::dense::singular_values(&matrix);
    let min_singular = singular_values.last().copied().unwrap_or(f64::INFINITY);
    Ok(KernelTransport { matrix, singular_values, min_singular })
}
