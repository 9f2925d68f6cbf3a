//! Model configuration and its text format.
//!
//! ```toml
//! model = "bumpy_torus"
//! dim = 3
//! resolution = 17
//! stencil_order = 6
//! interior_margin = 0.0
//! params.amplitude = 0.1
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ChartKind, ChartSpec, DerivativeBackend};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    FlatTorus,
    BumpyTorus,
    SphereStereo,
    HyperbolicBall,
    HyperbolicHalf,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::FlatTorus,
        ModelKind::BumpyTorus,
        ModelKind::SphereStereo,
        ModelKind::HyperbolicBall,
        ModelKind::HyperbolicHalf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::FlatTorus => "flat_torus",
            ModelKind::BumpyTorus => "bumpy_torus",
            ModelKind::SphereStereo => "sphere_stereo",
            ModelKind::HyperbolicBall => "hyperbolic_ball",
            ModelKind::HyperbolicHalf => "hyperbolic_half",
        }
    }

    pub fn chart_kind(self) -> ChartKind {
        match self {
            ModelKind::FlatTorus | ModelKind::BumpyTorus => ChartKind::PeriodicTorus,
            ModelKind::SphereStereo | ModelKind::HyperbolicBall => ChartKind::OpenBallChart,
            ModelKind::HyperbolicHalf => ChartKind::HalfSpaceChart,
        }
    }

    pub fn is_torus(self) -> bool {
        self.chart_kind().is_periodic()
    }

    pub fn default_backend(self) -> DerivativeBackend {
        match self {
            ModelKind::FlatTorus => DerivativeBackend::Spectral,
            _ => DerivativeBackend::FiniteDifference,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .iter()
            .copied()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown model '{s}' (expected one of flat_torus, bumpy_torus, sphere_stereo, hyperbolic_ball, hyperbolic_half)"
                ))
            })
    }
}

/// Scalar, vector or matrix parameter value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Scalar(f64),
    Array(Vec<f64>),
    Matrix(Vec<Vec<f64>>),
}

impl ParamValue {
    pub fn as_scalar(&self) -> Option<f64> {
        match self {
            ParamValue::Scalar(v) => Some(*v),
            _ => None,
        }
    }
}

pub const DEFAULT_STENCIL_ORDER: usize = 6;
pub const DEFAULT_INTERIOR_MARGIN: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub model: ModelKind,
    pub dim: usize,
    pub resolution: usize,
    pub stencil_order: usize,
    pub interior_margin: f64,
    pub backend: DerivativeBackend,
    #[serde(default)]
    pub params: BTreeMap<String, ParamValue>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    model: String,
    dim: usize,
    resolution: usize,
    stencil_order: Option<usize>,
    interior_margin: Option<f64>,
    backend: Option<DerivativeBackend>,
    #[serde(default)]
    params: BTreeMap<String, ParamValue>,
}

impl ModelConfig {
    /// Configuration with the model's defaults.
    pub fn new(model: ModelKind, dim: usize, resolution: usize) -> Self {
        ModelConfig {
            model,
            dim,
            resolution,
            stencil_order: DEFAULT_STENCIL_ORDER,
            interior_margin: if model.is_torus() {
                0.0
            } else {
                DEFAULT_INTERIOR_MARGIN
            },
            backend: model.default_backend(),
            params: BTreeMap::new(),
        }
    }

    pub fn with_order(mut self, order: usize) -> Self {
        self.stencil_order = order;
        self
    }

    pub fn with_backend(mut self, backend: DerivativeBackend) -> Self {
        self.backend = backend;
        self
    }

    pub fn with_resolution(mut self, resolution: usize) -> Self {
        self.resolution = resolution;
        self
    }

    pub fn with_param(mut self, key: &str, value: ParamValue) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    pub fn param_scalar(&self, key: &str, default: f64) -> Result<f64> {
        match self.params.get(key) {
            None => Ok(default),
            Some(v) => v
                .as_scalar()
                .ok_or_else(|| Error::Config(format!("params.{key} must be a scalar"))),
        }
    }

    pub fn chart_spec(&self) -> ChartSpec {
        ChartSpec {
            kind: self.model.chart_kind(),
            dim: self.dim,
            resolution: self.resolution,
            interior_margin: self.interior_margin,
            stencil_order: self.stencil_order,
            backend: self.backend,
        }
    }

    /// Parses the `key = value` text format.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))?;
        let model: ModelKind = raw.model.parse()?;
        let mut cfg = ModelConfig::new(model, raw.dim, raw.resolution);
        if let Some(p) = raw.stencil_order {
            cfg.stencil_order = p;
        }
        if let Some(m) = raw.interior_margin {
            cfg.interior_margin = m;
        }
        if let Some(b) = raw.backend {
            cfg.backend = b;
        }
        cfg.params = raw.params;
        cfg.chart_spec().validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        let mut s = format!(
            "model = \"{}\"\ndim = {}\nresolution = {}\nstencil_order = {}\ninterior_margin = {}\nbackend = \"{}\"\n",
            self.model,
            self.dim,
            self.resolution,
            self.stencil_order,
            self.interior_margin,
            match self.backend {
                DerivativeBackend::Spectral => "spectral",
                DerivativeBackend::FiniteDifference => "finite_difference",
            }
        );
        for (k, v) in &self.params {
            let rendered = match v {
                ParamValue::Scalar(x) => format!("{x:?}"),
                ParamValue::Array(a) => format!("{a:?}"),
                ParamValue::Matrix(m) => format!("{m:?}"),
            };
            s.push_str(&format!("params.{k} = {rendered}\n"));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_config() {
        let cfg = ModelConfig::from_toml_str(
            "model = \"bumpy_torus\"\ndim = 3\nresolution = 17\nstencil_order = 4\ninterior_margin = 0.0\nparams.amplitude = 0.05\n",
        )
        .unwrap();
        assert_eq!(cfg.model, ModelKind::BumpyTorus);
        assert_eq!(cfg.stencil_order, 4);
        assert_eq!(cfg.params["amplitude"], ParamValue::Scalar(0.05));
        assert_eq!(cfg.backend, DerivativeBackend::FiniteDifference);
    }

    #[test]
    fn matrix_param_and_round_trip() {
        let cfg = ModelConfig::from_toml_str(
            "model = \"flat_torus\"\ndim = 2\nresolution = 9\nparams.g = [[1.0, 0.0], [0.0, 4.0]]\n",
        )
        .unwrap();
        assert!(matches!(cfg.params["g"], ParamValue::Matrix(_)));
        let again = ModelConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn rejects_unknown_keys_and_models() {
        assert!(ModelConfig::from_toml_str("model = \"flat_torus\"\ndim = 2\nresolution = 17\nfoo = 1\n").is_err());
        assert!(ModelConfig::from_toml_str("model = \"klein\"\ndim = 2\nresolution = 17\n").is_err());
        let err = ModelConfig::from_toml_str("model = \"sphere_stereo\"\ndim = 3\nresolution = 5\n").unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }
}
