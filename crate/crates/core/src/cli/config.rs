//! Strict JSON run configuration.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::foliation::{FoliationSpec, ModelKind};
use crate::morse;
use crate::potential::{Chart, Term, TrigPotential};
use crate::spectral::KernelPolicy;
use crate::witten::{DeformationOptions, DEFAULT_OVERFLOW_BUDGET};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialConfig {
    /// Explicit terms; one factor per chart coordinate `(h, v)`.
    Terms(Vec<Term>),
    /// Seeded random trigonometric polynomial.
    Random { terms: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeformationConfig {
    pub overflow_budget: f64,
    pub center: bool,
}

impl Default for DeformationConfig {
    fn default() -> Self {
        Self { overflow_budget: DEFAULT_OVERFLOW_BUDGET, center: true }
    }
}

impl From<DeformationConfig> for DeformationOptions {
    fn from(c: DeformationConfig) -> Self {
        DeformationOptions { overflow_budget: c.overflow_budget, center: c.center }
    }
}

/// Every tolerance used by the commands; reports echo this table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToleranceTable {
    pub kernel: KernelPolicy,
    pub morse: morse::Tolerances,
    pub deformation: DeformationConfig,
    /// `‖d d‖ ≤ complex · ‖d‖ ‖d‖`
    pub complex: f64,
    pub adjointness: f64,
    pub hodge_residual: f64,
    pub orthogonality: f64,
    pub principal_angle: f64,
    /// `‖Q_harm T P_exact‖ ≤ zero_block · ‖T‖`
    pub zero_block: f64,
    /// Random cochains (and cochain pairs) per Hodge check instance.
    pub random_cochains: usize,
}

impl Default for ToleranceTable {
    fn default() -> Self {
        Self {
            kernel: KernelPolicy::default(),
            morse: morse::Tolerances::default(),
            deformation: DeformationConfig::default(),
            complex: 1e-12,
            adjointness: 1e-10,
            hodge_residual: 1e-10,
            orthogonality: 1e-10,
            principal_angle: 1e-8,
            zero_block: 1e-10,
            random_cochains: 20,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TestHooks {
    /// Perturb one entry of the undeformed `d^0` in the Hodge check.
    pub corrupt_differential: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<PotentialConfig>,
    #[serde(default)]
    pub epsilons: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degrees: Option<Vec<usize>>,
    #[serde(default)]
    pub tolerances: ToleranceTable,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub test_hooks: TestHooks,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn foliation(&self) -> FoliationSpec {
        FoliationSpec { kind: self.model.clone(), weights: self.weights.clone() }
    }

    pub fn leaf_dim(&self) -> usize {
        self.foliation().leaf_dim()
    }

    /// Degrees to report, validated against the leaf dimension.
    pub fn degrees(&self) -> Result<Vec<usize>> {
        let p = self.leaf_dim();
        let degrees = self.degrees.clone().unwrap_or_else(|| (0..=p).collect());
        if degrees.is_empty() {
            return Err(Error::Config("empty degree list".into()));
        }
        if let Some(&k) = degrees.iter().find(|&&k| k > p) {
            return Err(Error::Config(format!("degree {k} exceeds leaf dimension {p}")));
        }
        if degrees.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("degrees must be strictly ascending".into()));
        }
        Ok(degrees)
    }

    pub fn epsilons(&self) -> Result<&[f64]> {
        if self.epsilons.is_empty() {
            return Err(Error::Config("empty epsilon list".into()));
        }
        if self.epsilons.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
            return Err(Error::Config("epsilons must be finite and non-negative".into()));
        }
        if self.epsilons.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("epsilons must be strictly ascending".into()));
        }
        Ok(&self.epsilons)
    }

    /// The potential on the model's chart: periodic for sampled models, the
    /// window for chart windows.
    pub fn potential(&self) -> Result<TrigPotential> {
        let cfg = self.potential.as_ref().ok_or_else(|| Error::Config("missing potential".into()))?;
        let p = self.leaf_dim();
        let (q, chart) = match &self.model {
            ModelKind::ChartWindow { bounds, samples } => {
                let q = samples.first().map_or(0, Vec::len);
                (q, Chart::Window { bounds: bounds.clone() })
            }
            _ => (1, Chart::Periodic),
        };
        match cfg {
            PotentialConfig::Terms(terms) => TrigPotential::new(p, q, terms.clone(), chart),
            PotentialConfig::Random { terms } => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                TrigPotential::random(p, q, *terms, &mut rng).with_chart(chart)
            }
        }
    }

    pub fn kernel_policy(&self) -> KernelPolicy {
        self.tolerances.kernel
    }
}
