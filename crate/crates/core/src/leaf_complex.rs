//! Discrete leafwise de Rham complex on a structured grid.
//!
//! A leaf is a `p`-dimensional grid (`p` is 1 or 2) with uniform spacings.
//! Cochain values are point values of form components at cell barycenters,
//! so the exterior derivative is the signed incidence matrix scaled by
//! `1/h` along each axis, and every degree carries the same mass weight,
//! the cell volume `prod h_i`. The Hodge star is the usual diagonal star of
//! discrete exterior calculus acting on integrated values.
//!
//! Cell ordering: a `k`-cell is an anchor multi-index together with the set
//! of `k` axes it spans. Cells of one degree are grouped by axis set in
//! lexicographic order (`{}`; `{0}`, `{1}`; `{0,1}`), and within a group by
//! anchor index with axis 0 running fastest.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linear_map::LinearMap;

/// One block of cells sharing the same spanned axes.
#[derive(Debug, Clone)]
struct CellBlock {
    axes: Vec<usize>,
    /// positions per axis
    counts: Vec<usize>,
    offset: usize,
}

impl CellBlock {
    fn len(&self) -> usize {
        self.counts.iter().product()
    }

    fn index_of(&self, anchor: &[usize]) -> usize {
        let mut idx = 0;
        let mut stride = 1;
        for (a, &n) in anchor.iter().zip(&self.counts) {
            idx += a * stride;
            stride *= n;
        }
        self.offset + idx
    }

    fn anchor_of(&self, mut local: usize) -> Vec<usize> {
        self.counts
            .iter()
            .map(|&n| {
                let a = local % n;
                local /= n;
                a
            })
            .collect()
    }
}

/// A discretized compact leaf.
#[derive(Debug, Clone)]
pub struct LeafGrid {
    dim_p: usize,
    sizes: Vec<usize>,
    spacings: Vec<f64>,
    periodic: Vec<bool>,
    blocks: Vec<Vec<CellBlock>>,
    barycenters: Vec<Vec<Vec<f64>>>,
}

pub fn build_leaf_grid(
    dim_p: usize,
    sizes: &[usize],
    spacings: &[f64],
    periodic: &[bool],
) -> Result<LeafGrid> {
    LeafGrid::new(dim_p, sizes, spacings, periodic)
}

impl LeafGrid {
    pub fn new(dim_p: usize, sizes: &[usize], spacings: &[f64], periodic: &[bool]) -> Result<Self> {
        if !(1..=2).contains(&dim_p) {
            return Err(Error::InvalidGrid(format!("leaf dimension must be 1 or 2, got {dim_p}")));
        }
        if sizes.len() != dim_p || spacings.len() != dim_p || periodic.len() != dim_p {
            return Err(Error::InvalidGrid(format!(
                "expected {dim_p} sizes, spacings and periodic flags"
            )));
        }
        if let Some(&n) = sizes.iter().find(|&&n| n < 3) {
            return Err(Error::InvalidGrid(format!("axis size {n} below minimum 3")));
        }
        if let Some(&h) = spacings.iter().find(|&&h| !(h > 0.0 && h.is_finite())) {
            return Err(Error::InvalidGrid(format!("spacing {h} must be positive and finite")));
        }

        let mut blocks = Vec::with_capacity(dim_p + 1);
        let mut barycenters = Vec::with_capacity(dim_p + 1);
        for k in 0..=dim_p {
            let mut offset = 0;
            let mut degree_blocks = Vec::new();
            let mut centers = Vec::new();
            for axes in axis_subsets(dim_p, k) {
                let counts: Vec<usize> = (0..dim_p)
                    .map(|i| {
                        if axes.contains(&i) || periodic[i] {
                            sizes[i]
                        } else {
                            sizes[i] + 1
                        }
                    })
                    .collect();
                let block = CellBlock { axes, counts, offset };
                for local in 0..block.len() {
                    let anchor = block.anchor_of(local);
                    centers.push(
                        (0..dim_p)
                            .map(|i| {
                                let half = if block.axes.contains(&i) { 0.5 } else { 0.0 };
                                (anchor[i] as f64 + half) * spacings[i]
                            })
                            .collect(),
                    );
                }
                offset += block.len();
                degree_blocks.push(block);
            }
            blocks.push(degree_blocks);
            barycenters.push(centers);
        }

        Ok(Self {
            dim_p,
            sizes: sizes.to_vec(),
            spacings: spacings.to_vec(),
            periodic: periodic.to_vec(),
            blocks,
            barycenters,
        })
    }

    /// Periodic circle with `n` cells of spacing `1/n`.
    pub fn circle(n: usize) -> Result<Self> {
        Self::new(1, &[n], &[1.0 / n as f64], &[true])
    }

    /// Periodic unit 2-torus with `nx × ny` cells.
    pub fn torus(nx: usize, ny: usize) -> Result<Self> {
        Self::new(2, &[nx, ny], &[1.0 / nx as f64, 1.0 / ny as f64], &[true, true])
    }

    pub fn dim_p(&self) -> usize {
        self.dim_p
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn spacings(&self) -> &[f64] {
        &self.spacings
    }

    pub fn periodic(&self) -> &[bool] {
        &self.periodic
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic.iter().all(|&p| p)
    }

    pub fn require_periodic(&self) -> Result<()> {
        if self.is_periodic() {
            Ok(())
        } else {
            Err(Error::NonPeriodic)
        }
    }

    pub fn cell_count(&self, k: usize) -> usize {
        self.blocks.get(k).map_or(0, |b| b.iter().map(CellBlock::len).sum())
    }

    /// Barycenters of the `k`-cells in chart coordinates, in cell order.
    pub fn barycenters(&self, k: usize) -> &[Vec<f64>] {
        &self.barycenters[k]
    }

    /// Axes spanned by each `k`-cell, in cell order.
    pub fn cell_axes(&self, k: usize) -> Vec<&[usize]> {
        self.blocks[k]
            .iter()
            .flat_map(|b| std::iter::repeat_n(b.axes.as_slice(), b.len()))
            .collect()
    }

    /// Total extent `N_i h_i` of each axis.
    pub fn extent(&self) -> Vec<f64> {
        self.sizes.iter().zip(&self.spacings).map(|(&n, &h)| n as f64 * h).collect()
    }

    pub fn volume(&self) -> f64 {
        self.spacings.iter().product()
    }

    fn check_degree(&self, k: usize, max: usize) -> Result<()> {
        if k > max {
            Err(Error::DegreeOutOfRange { degree: k, dim_p: self.dim_p })
        } else {
            Ok(())
        }
    }

    /// Mass weights of the `k`-cochain inner product.
    pub fn mass(&self, k: usize) -> DVector<f64> {
        DVector::from_element(self.cell_count(k), self.volume())
    }

    /// Primal measure of each `k`-cell (product of spacings it spans).
    pub fn primal_volumes(&self, k: usize) -> DVector<f64> {
        let vals: Vec<f64> = self
            .cell_axes(k)
            .into_iter()
            .map(|axes| axes.iter().map(|&a| self.spacings[a]).product())
            .collect();
        DVector::from_vec(vals)
    }

    /// Measure of the dual cell of each `k`-cell.
    pub fn dual_volumes(&self, k: usize) -> DVector<f64> {
        let vals: Vec<f64> = self
            .cell_axes(k)
            .into_iter()
            .map(|axes| {
                (0..self.dim_p).filter(|i| !axes.contains(i)).map(|i| self.spacings[i]).product()
            })
            .collect();
        DVector::from_vec(vals)
    }

    pub fn zero_cochain(&self, k: usize) -> Cochain {
        Cochain::new(k, DVector::zeros(self.cell_count(k)))
    }

    pub fn constant_cochain(&self, k: usize, c: f64) -> Cochain {
        Cochain::new(k, DVector::from_element(self.cell_count(k), c))
    }

    /// Samples `f` at the barycenters of the `k`-cells.
    pub fn sample(&self, k: usize, f: impl Fn(&[f64]) -> f64) -> Cochain {
        let vals: Vec<f64> = self.barycenters[k].iter().map(|x| f(x)).collect();
        Cochain::new(k, DVector::from_vec(vals))
    }

    fn shifted(&self, anchor: &[usize], axis: usize) -> Vec<usize> {
        let mut a = anchor.to_vec();
        a[axis] += 1;
        if self.periodic[axis] {
            a[axis] %= self.sizes[axis];
        }
        a
    }

    fn block_with_axes(&self, k: usize, axes: &[usize]) -> &CellBlock {
        self.blocks[k].iter().find(|b| b.axes == axes).expect("axis block exists")
    }

    /// Exterior derivative `d^k: C^k -> C^{k+1}`.
    pub fn exterior_derivative(&self, k: usize) -> Result<LinearMap> {
        if k >= self.dim_p {
            return Err(Error::DegreeOutOfRange { degree: k, dim_p: self.dim_p });
        }
        let mut triplets = Vec::new();
        for block in &self.blocks[k + 1] {
            for local in 0..block.len() {
                let anchor = block.anchor_of(local);
                let row = block.offset + local;
                for (s, &b) in block.axes.iter().enumerate() {
                    let face_axes: Vec<usize> =
                        block.axes.iter().copied().filter(|&a| a != b).collect();
                    let face = self.block_with_axes(k, &face_axes);
                    let sign = if s % 2 == 0 { 1.0 } else { -1.0 };
                    let inv_h = 1.0 / self.spacings[b];
                    let far = face.index_of(&self.shifted(&anchor, b));
                    let near = face.index_of(&anchor);
                    triplets.push((row, far, sign * inv_h));
                    triplets.push((row, near, -sign * inv_h));
                }
            }
        }
        LinearMap::from_triplets(&triplets, self.mass(k), self.mass(k + 1))
    }

    /// Diagonal Hodge star on integrated `k`-cochain values: entry
    /// `|dual cell| / |primal cell|`. The dual `(p-k)`-cell of a primal cell
    /// shares its index. Domain mass is the star itself, codomain mass its
    /// inverse, so the star is an isometry onto the dual cochains.
    pub fn hodge_star(&self, k: usize) -> Result<LinearMap> {
        self.check_degree(k, self.dim_p)?;
        let star = self.dual_volumes(k).component_div(&self.primal_volumes(k));
        let inv = star.map(|s| 1.0 / s);
        LinearMap::diagonal(&star, star.clone(), inv)
    }

    /// Codifferential `δ^k: C^{k+1} -> C^k`, the mass-adjoint of `d^k`.
    pub fn codifferential(&self, k: usize) -> Result<LinearMap> {
        Ok(self.exterior_derivative(k)?.adjoint())
    }

    /// Hodge Laplacian `Δ^k = δ^k d^k + d^{k-1} δ^{k-1}`.
    pub fn laplacian(&self, k: usize) -> Result<LinearMap> {
        CochainComplex::laplacian(self, k)
    }

    pub fn inner_product(&self, k: usize, a: &Cochain, b: &Cochain) -> Result<f64> {
        for c in [a, b] {
            if c.degree != k {
                return Err(Error::DegreeMismatch { expected: k, got: c.degree });
            }
            if c.values.len() != self.cell_count(k) {
                return Err(Error::DimensionMismatch(format!(
                    "cochain has {} values, grid has {} {k}-cells",
                    c.values.len(),
                    self.cell_count(k)
                )));
            }
        }
        Ok(weighted_dot(&self.mass(k), &a.values, &b.values))
    }

    /// Evaluates `±(*^{-1} d_dual *)` on integrated `(k+1)`-cochains with
    /// unit sign, where the dual derivative on dual `(p-j)`-cochains is
    /// `(-1)^j (D^{j-1})^T` and the inverse star on dual `(p-j)`-cochains is
    /// `(-1)^{j(p-j)} S_j^{-1}`. Returned in point-value coordinates.
    pub fn star_formula_codifferential(&self, k: usize) -> Result<LinearMap> {
        let d = self.exterior_derivative(k)?;
        let p = self.dim_p;
        // integrated incidence D^k = R_{k+1} d^k R_k^{-1}
        let r_k = self.primal_volumes(k);
        let r_k1 = self.primal_volumes(k + 1);
        let incidence = d.scale_rows_cols(&r_k1, &r_k.map(|v| 1.0 / v));
        let star_k = self.dual_volumes(k).component_div(&r_k);
        let star_k1 = self.dual_volumes(k + 1).component_div(&r_k1);
        let j = k + 1;
        let dual_sign = if j.is_multiple_of(2) { 1.0 } else { -1.0 };
        let inv_star_sign = if (k * (p - k)).is_multiple_of(2) { 1.0 } else { -1.0 };
        // *^{-1} d_dual * in integrated coordinates, then back to point values:
        // R_k^{-1} (...) R_{k+1}
        let transposed = LinearMap::new(
            incidence.matrix().transpose(),
            d.codomain_mass().clone(),
            d.domain_mass().clone(),
        )?;
        let left = star_k.map(|s| dual_sign * inv_star_sign / s).component_div(&r_k);
        let right = star_k1.component_mul(&r_k1);
        Ok(transposed.scale_rows_cols(&left, &right))
    }

    /// Compares the mass-adjoint codifferential with the star formula and
    /// reports which global sign reproduces it.
    pub fn star_sign_check(&self, k: usize) -> Result<StarSignCheck> {
        let delta = self.codifferential(k)?.to_dense();
        let star = self.star_formula_codifferential(k)?.to_dense();
        let scale = delta.amax().max(f64::MIN_POSITIVE);
        let plus = (&delta - &star).amax() / scale;
        let minus = (&delta + &star).amax() / scale;
        let (empirical_sign, residual) = if plus <= minus { (1, plus) } else { (-1, minus) };
        let p = self.dim_p;
        let quoted_sign = if (p * (k + 1)).is_multiple_of(2) { 1 } else { -1 };
        Ok(StarSignCheck {
            dim_p: p,
            degree: k,
            empirical_sign,
            residual,
            quoted_sign,
            quoted_matches: quoted_sign == empirical_sign,
        })
    }
}

/// Outcome of comparing `δ^k` with `s · (* d *)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct StarSignCheck {
    pub dim_p: usize,
    pub degree: usize,
    /// Sign `s` with `δ^k = s · (* d *)`.
    pub empirical_sign: i32,
    pub residual: f64,
    /// `(-1)^{p(k+1)}`
    pub quoted_sign: i32,
    pub quoted_matches: bool,
}

fn axis_subsets(p: usize, k: usize) -> Vec<Vec<usize>> {
    match (p, k) {
        (_, 0) => vec![vec![]],
        (1, 1) => vec![vec![0]],
        (2, 1) => vec![vec![0], vec![1]],
        (2, 2) => vec![vec![0, 1]],
        _ => unreachable!("leaf dimension is 1 or 2"),
    }
}

pub(crate) fn weighted_dot(mass: &DVector<f64>, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    mass.iter().zip(a.iter()).zip(b.iter()).map(|((m, x), y)| m * x * y).sum()
}

/// A discrete `k`-form: one value per `k`-cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Cochain {
    pub degree: usize,
    pub values: DVector<f64>,
}

impl Cochain {
    pub fn new(degree: usize, values: DVector<f64>) -> Self {
        Self { degree, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn exterior_derivative(grid: &LeafGrid, k: usize) -> Result<LinearMap> {
    grid.exterior_derivative(k)
}

pub fn hodge_star(grid: &LeafGrid, k: usize) -> Result<LinearMap> {
    grid.hodge_star(k)
}

pub fn codifferential(grid: &LeafGrid, k: usize) -> Result<LinearMap> {
    grid.codifferential(k)
}

pub fn laplacian(grid: &LeafGrid, k: usize) -> Result<LinearMap> {
    grid.laplacian(k)
}

pub fn inner_product(grid: &LeafGrid, k: usize, a: &Cochain, b: &Cochain) -> Result<f64> {
    grid.inner_product(k, a, b)
}

/// A cochain complex over a leaf grid: either the plain leafwise de Rham
/// complex or its Witten deformation. All spaces use the grid masses.
pub trait CochainComplex {
    fn grid(&self) -> &LeafGrid;

    /// `d^k: C^k -> C^{k+1}` for `0 <= k < p`.
    fn differential(&self, k: usize) -> Result<LinearMap>;

    /// Mass-adjoint of `d^k`.
    fn adjoint_differential(&self, k: usize) -> Result<LinearMap> {
        Ok(self.differential(k)?.adjoint())
    }

    fn laplacian(&self, k: usize) -> Result<LinearMap> {
        let grid = self.grid();
        let p = grid.dim_p();
        if k > p {
            return Err(Error::DegreeOutOfRange { degree: k, dim_p: p });
        }
        let mut lap = LinearMap::zero(grid.mass(k), grid.mass(k))?;
        if k < p {
            let d = self.differential(k)?;
            lap = lap.add(&self.adjoint_differential(k)?.compose(&d)?)?;
        }
        if k > 0 {
            let d = self.differential(k - 1)?;
            lap = lap.add(&d.compose(&self.adjoint_differential(k - 1)?)?)?;
        }
        Ok(lap)
    }
}

impl CochainComplex for LeafGrid {
    fn grid(&self) -> &LeafGrid {
        self
    }

    fn differential(&self, k: usize) -> Result<LinearMap> {
        self.exterior_derivative(k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn circle_counts() {
        let g = build_leaf_grid(1, &[8], &[0.125], &[true]).unwrap();
        assert_eq!(g.cell_count(0), 8);
        assert_eq!(g.cell_count(1), 8);
    }

    #[test]
    fn torus_counts() {
        let g = build_leaf_grid(2, &[4, 4], &[0.25, 0.25], &[true, true]).unwrap();
        assert_eq!((g.cell_count(0), g.cell_count(1), g.cell_count(2)), (16, 32, 16));
    }

    #[test]
    fn open_axis_counts() {
        let g = build_leaf_grid(2, &[4, 3], &[0.25, 0.5], &[false, true]).unwrap();
        assert_eq!(g.cell_count(0), 5 * 3);
        assert_eq!(g.cell_count(1), 4 * 3 + 5 * 3);
        assert_eq!(g.cell_count(2), 12);
        assert!(g.require_periodic().is_err());
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(build_leaf_grid(1, &[2], &[0.5], &[true]).is_err());
        assert!(build_leaf_grid(3, &[4, 4, 4], &[1.0; 3], &[true; 3]).is_err());
        assert!(build_leaf_grid(0, &[], &[], &[]).is_err());
        assert!(build_leaf_grid(1, &[4], &[0.0], &[true]).is_err());
    }

    #[test]
    fn barycenters_distinct_and_inside() {
        let g = LeafGrid::torus(4, 5).unwrap();
        let ext = g.extent();
        for k in 0..=2 {
            let bs = g.barycenters(k);
            for (i, b) in bs.iter().enumerate() {
                assert!(b.iter().zip(&ext).all(|(&x, &e)| (0.0..e).contains(&x)));
                for c in &bs[..i] {
                    assert!(b != c);
                }
            }
        }
    }

    #[test]
    fn d0_kills_constants() {
        let g = LeafGrid::circle(8).unwrap();
        let d = g.exterior_derivative(0).unwrap();
        assert!(d.apply(&g.constant_cochain(0, 1.0).values).amax() == 0.0);
    }

    #[test]
    fn d0_is_forward_difference() {
        let g = LeafGrid::circle(8).unwrap();
        let d = g.exterior_derivative(0).unwrap();
        let f = DVector::from_fn(8, |j, _| (2.0 * PI * j as f64 / 8.0).sin());
        let df = d.apply(&f);
        for j in 0..8 {
            let expect = ((2.0 * PI * (j + 1) as f64 / 8.0).sin() - f[j]) * 8.0;
            assert!((df[j] - expect).abs() < 1e-13);
        }
    }

    #[test]
    fn d_squared_is_exactly_zero() {
        for g in [LeafGrid::torus(4, 4).unwrap(), LeafGrid::new(2, &[3, 5], &[0.3, 0.7], &[true, false]).unwrap()] {
            let dd = g.exterior_derivative(1).unwrap().compose(&g.exterior_derivative(0).unwrap()).unwrap();
            assert!(dd.matrix().values().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn degree_range_errors() {
        let g = LeafGrid::circle(8).unwrap();
        assert!(g.exterior_derivative(1).is_err());
        assert!(g.hodge_star(2).is_err());
        assert!(g.codifferential(1).is_err());
        assert!(g.laplacian(2).is_err());
    }

    #[test]
    fn star_entries() {
        let g = LeafGrid::circle(8).unwrap();
        let s0 = g.hodge_star(0).unwrap().to_dense();
        assert!((s0 - nalgebra::DMatrix::identity(8, 8) * 0.125).amax() < 1e-15);

        let g = LeafGrid::new(2, &[4, 3], &[0.5, 0.2], &[true, true]).unwrap();
        let s1 = g.hodge_star(1).unwrap().to_dense();
        // x-edges come first
        for i in 0..12 {
            assert!((s1[(i, i)] - 0.2 / 0.5).abs() < 1e-15);
            assert!((s1[(12 + i, 12 + i)] - 0.5 / 0.2).abs() < 1e-15);
        }
        let s0 = g.hodge_star(0).unwrap();
        let s2 = g.hodge_star(2).unwrap();
        // star_2 ∘ star_0 on integrated values is the identity
        let both = s0.to_dense().component_mul(&s2.to_dense());
        for i in 0..12 {
            assert!(s0.to_dense()[(i, i)] > 0.0);
            assert!((both[(i, i)] - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn delta_of_exact_constant_is_zero() {
        let g = LeafGrid::circle(8).unwrap();
        let d = g.exterior_derivative(0).unwrap();
        let delta = g.codifferential(0).unwrap();
        let c = g.constant_cochain(0, 3.0);
        assert_eq!(delta.apply(&d.apply(&c.values)).amax(), 0.0);
        // δ^0 on the circle is the negative backward difference scaled by 1/h
        let dense = delta.to_dense();
        assert_eq!(dense[(0, 0)], -8.0);
        assert_eq!(dense[(0, 7)], 8.0);
    }

    #[test]
    fn inner_product_rules() {
        let g = LeafGrid::circle(8).unwrap();
        let one = g.constant_cochain(0, 1.0);
        assert!((inner_product(&g, 0, &one, &one).unwrap() - 1.0).abs() < 1e-15);
        let z = g.zero_cochain(0);
        assert_eq!(inner_product(&g, 0, &z, &z).unwrap(), 0.0);
        let e = g.constant_cochain(1, 1.0);
        assert!(matches!(inner_product(&g, 0, &one, &e), Err(Error::DegreeMismatch { .. })));
        let s = g.sample(0, |x| (2.0 * PI * x[0]).sin());
        let c = g.sample(0, |x| (2.0 * PI * x[0]).cos());
        assert!(inner_product(&g, 0, &s, &c).unwrap().abs() < 1e-14);
    }

    #[test]
    fn star_formula_signs() {
        for g in [LeafGrid::circle(6).unwrap(), LeafGrid::new(2, &[4, 3], &[0.25, 0.4], &[true, true]).unwrap()] {
            for k in 0..g.dim_p() {
                let check = g.star_sign_check(k).unwrap();
                assert!(check.residual < 1e-14, "{check:?}");
                let p = g.dim_p();
                let conventional = if (p * k + 1) % 2 == 0 { 1 } else { -1 };
                assert_eq!(check.empirical_sign, conventional);
                assert_eq!(check.quoted_matches, p % 2 == 1);
            }
        }
    }
}
