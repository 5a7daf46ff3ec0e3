//! Measured foliation models: product foliations, suspensions of rational
//! rotations, scan-only chart windows and the global tangential complex of a
//! Kronecker flow. The transverse measure is a finite set of positive
//! weights on sampled leaves.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::leaf_complex::LeafGrid;
use crate::potential::{LeafEmbedding, LeafPotential, TrigPotential};
use crate::spectral::{kernel_dimension, KernelPolicy, SpectrumReport};
use crate::witten::{DeformationContext, DeformationOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum LeafSpec {
    Circle { n: usize },
    Torus { nx: usize, ny: usize },
}

impl LeafSpec {
    pub fn build(&self) -> Result<LeafGrid> {
        match *self {
            LeafSpec::Circle { n } => LeafGrid::circle(n),
            LeafSpec::Torus { nx, ny } => LeafGrid::torus(nx, ny),
        }
    }

    pub fn dim_p(&self) -> usize {
        match self {
            LeafSpec::Circle { .. } => 1,
            LeafSpec::Torus { .. } => 2,
        }
    }
}

/// A real number given either exactly as `num/den` or as a float.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Slope {
    Rational { num: i64, den: u64 },
    Real(f64),
}

impl Slope {
    pub fn value(&self) -> f64 {
        match *self {
            Slope::Rational { num, den } => num as f64 / den as f64,
            Slope::Real(x) => x,
        }
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelKind {
    /// Identical leaves at `v = j / samples` (one transverse coordinate).
    Product { leaf: LeafSpec, samples: usize },
    /// Suspension of the circle rotation by `rotation`; every leaf is a
    /// closed circle winding `den` times around the base.
    Suspension { rotation: Slope, fiber_resolution: usize, samples: usize },
    /// Non-periodic chart for Morse scans only: `bounds` for `(h, v)` and
    /// explicit transverse samples.
    ChartWindow { bounds: Vec<(f64, f64)>, samples: Vec<Vec<f64>> },
    /// Linear flow of slope `alpha` on the `resolution × resolution` torus.
    Kronecker { alpha: Slope, resolution: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoliationSpec {
    pub kind: ModelKind,
    /// Transverse measure; uniform when absent.
    pub weights: Option<Vec<f64>>,
}

impl FoliationSpec {
    pub fn new(kind: ModelKind) -> Self {
        Self { kind, weights: None }
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Self {
        self.weights = Some(weights);
        self
    }

    pub fn leaf_dim(&self) -> usize {
        match &self.kind {
            ModelKind::Product { leaf, .. } => leaf.dim_p(),
            ModelKind::Suspension { .. } | ModelKind::Kronecker { .. } => 1,
            ModelKind::ChartWindow { bounds, samples } => {
                bounds.len() - samples.first().map_or(0, Vec::len)
            }
        }
    }

    /// Transverse coordinates of the sampled leaves (the base point for
    /// suspensions).
    pub fn transversal_samples(&self) -> Result<Vec<Vec<f64>>> {
        match &self.kind {
            ModelKind::Product { samples, .. } => {
                check_count(*samples)?;
                Ok((0..*samples).map(|j| vec![j as f64 / *samples as f64]).collect())
            }
            ModelKind::Suspension { rotation, samples, .. } => {
                check_count(*samples)?;
                let (_, den) = rational(rotation)?;
                let width = 1.0 / den as f64;
                Ok((0..*samples).map(|j| vec![width * j as f64 / *samples as f64]).collect())
            }
            ModelKind::ChartWindow { samples, .. } => {
                if samples.is_empty() {
                    return Err(Error::InvalidModel("chart window needs transverse samples".into()));
                }
                Ok(samples.clone())
            }
            ModelKind::Kronecker { .. } => {
                Err(Error::InvalidModel("the Kronecker model has no sampled leaves".into()))
            }
        }
    }

    /// Normalized weights for `count` leaves.
    fn measure(&self, count: usize) -> Result<Vec<f64>> {
        match &self.weights {
            None => Ok(vec![1.0 / count as f64; count]),
            Some(w) => {
                if w.len() != count {
                    return Err(Error::InvalidModel(format!("{} weights for {count} leaves", w.len())));
                }
                if w.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
                    return Err(Error::InvalidModel("weights must be strictly positive".into()));
                }
                let total: f64 = w.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidModel(format!("weights sum to {total}, expected 1")));
                }
                Ok(w.clone())
            }
        }
    }
}

fn check_count(samples: usize) -> Result<()> {
    if samples == 0 {
        Err(Error::InvalidModel("need at least one transversal sample".into()))
    } else {
        Ok(())
    }
}

/// Reduced `(num, den)` of a suspension rotation.
fn rational(rotation: &Slope) -> Result<(i64, u64)> {
    match *rotation {
        Slope::Rational { num, den } => {
            if den == 0 {
                return Err(Error::InvalidModel("rotation denominator is zero".into()));
            }
            let g = gcd(num.unsigned_abs(), den).max(1);
            Ok((num / g as i64, den / g))
        }
        Slope::Real(x) => Err(Error::InvalidModel(format!(
            "suspension rotation {x} is not given as an exact fraction; only rational rotations \
             have compact leaves here, use the kronecker model for irrational slopes"
        ))),
    }
}

#[derive(Debug, Clone)]
pub struct FieldLeaf {
    pub grid: LeafGrid,
    pub embedding: LeafEmbedding,
    pub weight: f64,
}

/// Sampled leaves with their weights.
#[derive(Debug, Clone)]
pub struct LeafField {
    pub leaves: Vec<FieldLeaf>,
    pub spec: FoliationSpec,
}

impl LeafField {
    pub fn dim_p(&self) -> usize {
        self.leaves[0].grid.dim_p()
    }

    pub fn potential_on<'a>(&'a self, leaf: usize, f: &'a TrigPotential) -> LeafPotential<'a> {
        LeafPotential { potential: f, embedding: &self.leaves[leaf].embedding }
    }
}

pub fn instantiate_model(spec: &FoliationSpec) -> Result<LeafField> {
    let samples = spec.transversal_samples()?;
    let weights = spec.measure(samples.len())?;
    let leaves = match &spec.kind {
        ModelKind::Product { leaf, .. } => {
            let grid = leaf.build()?;
            samples
                .into_iter()
                .zip(weights)
                .map(|(v, weight)| FieldLeaf {
                    grid: grid.clone(),
                    embedding: LeafEmbedding::Product { transverse: v },
                    weight,
                })
                .collect()
        }
        ModelKind::Suspension { rotation, fiber_resolution, .. } => {
            let (num, den) = rational(rotation)?;
            let n = den as usize * fiber_resolution;
            let grid = LeafGrid::new(1, &[n], &[1.0 / *fiber_resolution as f64], &[true])?;
            samples
                .into_iter()
                .zip(weights)
                .map(|(v, weight)| FieldLeaf {
                    grid: grid.clone(),
                    embedding: LeafEmbedding::Linear { base: v[0], slope: num as f64 / den as f64 },
                    weight,
                })
                .collect()
        }
        ModelKind::ChartWindow { .. } => {
            return Err(Error::InvalidModel("chart windows are for Morse scans only".into()))
        }
        ModelKind::Kronecker { .. } => unreachable!("rejected by transversal_samples"),
    };
    Ok(LeafField { leaves, spec: spec.clone() })
}

#[derive(Debug, Clone, Serialize)]
pub struct LambdaDimension {
    pub degree: usize,
    pub epsilon: f64,
    pub value: f64,
    pub per_leaf: Vec<SpectrumReport>,
}

/// `Σ_j w_j dim Ker Δ_ε^k(L_j)`. Leaves are solved in parallel and summed
/// in leaf order.
pub fn lambda_dimension(
    field: &LeafField,
    k: usize,
    epsilon: f64,
    f: &TrigPotential,
    policy: &KernelPolicy,
    options: DeformationOptions,
) -> Result<LambdaDimension> {
    let per_leaf = (0..field.leaves.len())
        .into_par_iter()
        .map(|j| {
            let leaf = &field.leaves[j];
            let ctx = DeformationContext::with_options(&leaf.grid, field.potential_on(j, f), epsilon, options)?;
            kernel_dimension(&ctx.witten_laplacian(k)?, policy)
        })
        .collect::<Result<Vec<_>>>()?;
    if let Some(leaf) = per_leaf.iter().position(|r| r.ambiguous) {
        return Err(Error::AmbiguousLeaf { leaf, report: Box::new(per_leaf[leaf].clone()) });
    }
    let value = field.leaves.iter().zip(&per_leaf).map(|(l, r)| l.weight * r.kernel_dim as f64).sum();
    Ok(LambdaDimension { degree: k, epsilon, value, per_leaf })
}

pub fn lambda_euler_characteristic(
    field: &LeafField,
    epsilon: f64,
    f: &TrigPotential,
    policy: &KernelPolicy,
    options: DeformationOptions,
) -> Result<f64> {
    let mut chi = 0.0;
    for k in 0..=field.dim_p() {
        let d = lambda_dimension(field, k, epsilon, f, policy, options)?.value;
        chi += if k % 2 == 0 { d } else { -d };
    }
    Ok(chi)
}

/// Tangential `d: C^0 -> C^1` of the Kronecker flow, diagonal on Fourier
/// modes.
#[derive(Debug, Clone, Serialize)]
pub struct KroneckerComplex {
    pub alpha: f64,
    pub resolution: usize,
    pub kernel_dim: usize,
    pub cokernel_dim: usize,
    /// `min |m + αn|` over modes outside the kernel.
    pub smallest_divisor: f64,
    /// `((m, n), 2πi(m + αn))` per mode
    #[serde(skip)]
    pub symbols: Vec<((i64, i64), Complex64)>,
}

pub const KRONECKER_ZERO: f64 = 1e-12;

pub fn kronecker_tangential_complex(alpha: Slope, n: usize) -> Result<KroneckerComplex> {
    if n < 8 {
        return Err(Error::InvalidModel(format!("torus resolution {n} < 8")));
    }
    if let Slope::Rational { den: 0, .. } = alpha {
        return Err(Error::InvalidModel("slope denominator is zero".into()));
    }
    if !alpha.value().is_finite() {
        return Err(Error::InvalidModel("slope must be finite".into()));
    }
    let n_i = n as i64;
    let hi = n_i / 2;
    let lo = hi - n_i + 1;
    let a = alpha.value();
    let mut symbols = Vec::with_capacity(n * n);
    let mut kernel_dim = 0;
    let mut smallest = f64::INFINITY;
    for m in lo..=hi {
        for k in lo..=hi {
            let divisor = m as f64 + a * k as f64;
            let zero = match alpha {
                Slope::Rational { num, den } => m * den as i64 + num * k == 0,
                Slope::Real(_) => divisor.abs() <= KRONECKER_ZERO,
            };
            if zero {
                kernel_dim += 1;
            } else {
                smallest = smallest.min(divisor.abs());
            }
            symbols.push(((m, k), Complex64::new(0.0, 2.0 * std::f64::consts::PI * divisor)));
        }
    }
    Ok(KroneckerComplex {
        alpha: a,
        resolution: n,
        kernel_dim,
        cokernel_dim: kernel_dim,
        smallest_divisor: smallest,
        symbols,
    })
}
