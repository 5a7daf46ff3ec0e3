//! Leafwise Hodge theory and the Witten deformation on discretized measured
//! foliations, with tangential Morse scans of analytic potentials.

mod dense;
pub mod checks;
pub mod cli;
pub mod error;
pub mod foliation;
pub mod hodge;
pub mod leaf_complex;
pub mod linear_map;
pub mod morse;
pub mod potential;
pub mod report;
pub mod spectral;
pub mod subspace;
pub mod witten;

pub use error::{Error, Result};
pub use leaf_complex::{Cochain, CochainComplex, LeafGrid};
pub use linear_map::LinearMap;
pub use potential::{Chart, Factor, LeafEmbedding, LeafPotential, Term, TrigPotential};
pub use spectral::{KernelPolicy, SpectrumReport};
pub use witten::{DeformationContext, DeformationOptions};
