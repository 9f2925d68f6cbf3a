//! Numerical laboratory for gauge identities, Lichnerowicz spectra and
//! linearized Ricci flow on discretized model manifolds.

pub mod cli;
pub mod config;
pub mod diff;
pub mod error;
pub mod field;
pub mod flow;
pub mod fourier;
pub mod gauge;
pub mod geometry;
pub mod grid;
pub mod operators;
pub mod random;
pub mod reduce;
pub mod spectral;
pub mod verifier;

pub use config::{ModelConfig, ModelKind, ParamValue};
pub use error::{Error, Result};
pub use field::{Field, TensorField, Valence};
pub use geometry::{make_model, ConventionPin, CurvatureBundle, ManifoldContext};
pub use grid::{ChartKind, ChartSpec, DerivativeBackend};
pub use operators::{LichnerowiczVariant, OperatorId, OperatorName};
