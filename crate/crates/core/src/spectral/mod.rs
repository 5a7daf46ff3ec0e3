//! Symmetric eigenvalue computation and the numerical kernel-dimension
//! policy.
//!
//! Operators are symmetric in their mass inner product. They are brought to
//! orthonormal coordinates by the similarity `sqrt(M) A sqrt(M)^{-1}`,
//! symmetrized, and solved densely below `dense_limit` rows or with a seeded
//! block shift-invert Krylov method above it.

mod krylov;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::leaf_complex::LeafGrid;
use crate::linear_map::LinearMap;
use crate::potential::LeafPotential;
use crate::witten::{DeformationContext, DeformationOptions};

pub use krylov::{shift_invert_lowest, KrylovOptions};

/// Relative asymmetry accepted before symmetrizing.
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelPolicy {
    /// Eigenvalues at or below `floor_rel · ‖op‖` always count as kernel.
    pub floor_rel: f64,
    /// A cut is accepted once the ratio across it reaches this value.
    pub gap_ratio: f64,
    /// Number of lowest eigenvalues kept in reports and scanned for the
    /// low-lying cluster.
    pub window: usize,
    /// Largest dimension solved densely.
    pub dense_limit: usize,
    /// Seed for iterative starting blocks.
    pub seed: u64,
}

impl Default for KernelPolicy {
    fn default() -> Self {
        Self { floor_rel: 1e-10, gap_ratio: 1e3, window: 16, dense_limit: 2000, seed: 0x5eed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumReport {
    pub eigenvalues: Vec<f64>,
    pub kernel_dim: usize,
    pub threshold: f64,
    /// First above-cut eigenvalue over last below-cut eigenvalue. With an
    /// empty kernel the floor stands in for the denominator; with nothing
    /// above the cut it is `+inf`.
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub gap_ratio: f64,
    pub ambiguous: bool,
    pub operator_norm: f64,
}

/// Outcome of the cut decision on an ascending list.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cut {
    pub below: usize,
    pub threshold: f64,
    pub gap_ratio: f64,
    pub ambiguous: bool,
}

/// Ratio across a cut placed after `j` values.
fn ratio_at(values: &[f64], j: usize, floor: f64, norm: f64) -> f64 {
    if j >= values.len() {
        return f64::INFINITY;
    }
    let lower = if j == 0 { floor } else { values[j - 1].max(norm * f64::EPSILON) };
    if lower <= 0.0 {
        return f64::INFINITY;
    }
    values[j] / lower
}

/// Chooses how many of the ascending `values` lie in the numerical kernel:
/// everything at or below the floor, then the first cut whose ratio reaches
/// the policy's gap requirement. Without a qualifying cut the largest ratio
/// wins and the result is flagged ambiguous.
pub fn decide_cut(values: &[f64], norm: f64, policy: &KernelPolicy) -> Cut {
    let floor = policy.floor_rel * norm;
    let n_floor = values.iter().take_while(|&&v| v <= floor).count();
    // a cut after every value is only possible when all of them sit below the floor
    let last = values.len().saturating_sub(1).max(n_floor);
    let mut best = (n_floor, 0.0_f64);
    let mut chosen = None;
    for j in n_floor..=last {
        let r = ratio_at(values, j, floor, norm);
        if r >= policy.gap_ratio {
            chosen = Some((j, r));
            break;
        }
        if r > best.1 {
            best = (j, r);
        }
    }
    let (below, gap_ratio) = chosen.unwrap_or(best);
    let threshold = if below == 0 || below >= values.len() {
        floor.max(values.get(below.wrapping_sub(1)).copied().unwrap_or(floor))
    } else {
        let lo = values[below - 1].max(norm * f64::EPSILON);
        floor.max((lo * values[below]).sqrt())
    };
    Cut { below, threshold, gap_ratio, ambiguous: gap_ratio < policy.gap_ratio }
}

/// Size of the low-lying cluster: the position of the largest relative gap
/// among the first `window` values (at least one value below the cut).
pub fn low_lying_cluster(values: &[f64], norm: f64, window: usize) -> (usize, f64) {
    let w = window.min(values.len());
    let mut best = (w, f64::INFINITY);
    let mut best_ratio = 0.0;
    for j in 1..w {
        let r = ratio_at(values, j, 0.0, norm);
        if r > best_ratio {
            best_ratio = r;
            best = (j, r);
        }
    }
    best
}

/// Symmetric matrix of `op` in mass-orthonormal coordinates.
pub fn symmetric_dense(op: &LinearMap) -> Result<DMatrix<f64>> {
    if !op.is_square() {
        return Err(Error::DimensionMismatch("eigenproblem needs a square operator".into()));
    }
    let s = op.orthonormal_dense();
    let scale = s.amax();
    if scale > 0.0 {
        let asym = (&s - s.transpose()).amax() / scale;
        if asym > SYMMETRY_TOLERANCE {
            return Err(Error::Asymmetric(asym));
        }
    }
    Ok((&s + s.transpose()) * 0.5)
}

/// Eigenpairs sorted ascending, eigenvectors in orthonormal coordinates.
#[derive(Debug, Clone)]
pub struct Eigenpairs {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
    /// Whether `values` covers the whole spectrum.
    pub complete: bool,
}

pub fn dense_eigenpairs(sym: DMatrix<f64>) -> Eigenpairs {
    let (values, vectors) = crate::dense::symmetric_eigen(&sym);
    Eigenpairs { values, vectors, complete: true }
}

/// The `m` lowest eigenpairs of `op`.
pub fn lowest_eigenpairs(op: &LinearMap, m: usize, policy: &KernelPolicy) -> Result<Eigenpairs> {
    let n = op.nrows();
    if m == 0 || m > n {
        return Err(Error::DimensionMismatch(format!("requested {m} eigenvalues of a {n}-dim operator")));
    }
    if n <= policy.dense_limit {
        let mut all = dense_eigenpairs(symmetric_dense(op)?);
        all.values.truncate(m);
        all.vectors = all.vectors.columns(0, m).into_owned();
        all.complete = m == n;
        return Ok(all);
    }
    if op.mass_asymmetry_sparse() > SYMMETRY_TOLERANCE {
        return Err(Error::Asymmetric(op.mass_asymmetry_sparse()));
    }
    let opts = KrylovOptions { seed: policy.seed, ..KrylovOptions::default() };
    shift_invert_lowest(op, m, &opts)
}

pub fn lowest_eigenvalues(op: &LinearMap, m: usize, policy: &KernelPolicy) -> Result<Vec<f64>> {
    Ok(lowest_eigenpairs(op, m, policy)?.values)
}

/// Spectrum report plus the kernel eigenvectors (orthonormal coordinates).
#[derive(Debug, Clone)]
pub struct KernelComputation {
    pub report: SpectrumReport,
    pub kernel_vectors: DMatrix<f64>,
}

pub fn kernel_computation(op: &LinearMap, policy: &KernelPolicy) -> Result<KernelComputation> {
    let n = op.nrows();
    let norm = op.inf_norm();
    let mut m = if n <= policy.dense_limit { n } else { policy.window.clamp(1, n) };
    loop {
        let pairs = lowest_eigenpairs(op, m, policy)?;
        let cut = decide_cut(&pairs.values, norm, policy);
        let settled = pairs.complete || (cut.below + 1 < pairs.values.len() && !cut.ambiguous);
        if settled || m == n {
            let keep = policy.window.max(cut.below + 1).min(pairs.values.len());
            let report = SpectrumReport {
                eigenvalues: pairs.values[..keep].to_vec(),
                kernel_dim: cut.below,
                threshold: cut.threshold,
                gap_ratio: cut.gap_ratio,
                ambiguous: cut.ambiguous,
                operator_norm: norm,
            };
            let kernel_vectors = pairs.vectors.columns(0, cut.below).into_owned();
            return Ok(KernelComputation { report, kernel_vectors });
        }
        m = (2 * m).min(n);
    }
}

pub fn kernel_dimension(op: &LinearMap, policy: &KernelPolicy) -> Result<SpectrumReport> {
    Ok(kernel_computation(op, policy)?.report)
}

/// One row of a spectral sweep over `ε`.
#[derive(Debug, Clone, Serialize)]
pub struct FlowRow {
    pub epsilon: f64,
    pub degree: usize,
    pub report: Option<SpectrumReport>,
    pub cluster_count: Option<usize>,
    #[serde(serialize_with = "crate::report::ser_opt_f64")]
    pub cluster_gap_ratio: Option<f64>,
    pub error: Option<String>,
}

/// Kernel reports of `Δ_ε^k` along an ascending list of `ε`. Failures are
/// recorded per row.
pub fn spectral_flow(
    grid: &LeafGrid,
    potential: LeafPotential<'_>,
    epsilons: &[f64],
    k: usize,
    policy: &KernelPolicy,
    options: DeformationOptions,
) -> Vec<FlowRow> {
    epsilons
        .par_iter()
        .map(|&epsilon| {
            let run = || -> Result<(SpectrumReport, usize, f64)> {
                let ctx = DeformationContext::with_options(grid, potential, epsilon, options)?;
                let lap = ctx.witten_laplacian(k)?;
                let report = kernel_dimension(&lap, policy)?;
                let (count, ratio) =
                    low_lying_cluster(&report.eigenvalues, report.operator_norm, policy.window);
                Ok((report, count, ratio))
            };
            match run() {
                Ok((report, count, ratio)) => FlowRow {
                    epsilon,
                    degree: k,
                    report: Some(report),
                    cluster_count: Some(count),
                    cluster_gap_ratio: Some(ratio),
                    error: None,
                },
                Err(e) => FlowRow {
                    epsilon,
                    degree: k,
                    report: None,
                    cluster_count: None,
                    cluster_gap_ratio: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect()
}

/// Converts orthonormal-coordinate vectors back to cochain coordinates.
pub fn from_orthonormal(vectors: &DMatrix<f64>, mass: &DVector<f64>) -> DMatrix<f64> {
    let mut out = vectors.clone();
    for (i, mut row) in out.row_iter_mut().enumerate() {
        row /= mass[i].sqrt();
    }
    out
}
