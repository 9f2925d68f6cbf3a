//! Closed-form model metrics.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use super::ManifoldContext;
use crate::config::{ModelConfig, ModelKind, ParamValue};
use crate::error::{Error, Result};
use crate::field::{sym_pairs, Field};
use crate::grid::Grid;

/// Chart box and curvature data of an open model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGeometry {
    pub center: Vec<f64>,
    pub half_width: f64,
}

/// Fixed symmetric perturbation direction of the bumpy torus: ones on the
/// diagonal, one half elsewhere.
pub fn bump_matrix(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.5 })
}

fn flat_metric(cfg: &ModelConfig) -> Result<DMatrix<f64>> {
    let n = cfg.dim;
    let g = match cfg.params.get("g") {
        None => DMatrix::identity(n, n),
        Some(ParamValue::Matrix(rows)) => {
            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                return Err(Error::Config(format!("params.g must be {n}x{n}")));
            }
            DMatrix::from_fn(n, n, |i, j| rows[i][j])
        }
        Some(ParamValue::Array(v)) if v.len() == n => DMatrix::from_diagonal(&nalgebra::DVector::from_vec(v.clone())),
        Some(ParamValue::Array(v)) if v.len() == n * n => DMatrix::from_row_slice(n, n, v),
        Some(_) => {
            return Err(Error::Config(format!(
                "params.g must be an {n}x{n} matrix, a length-{} row-major array or a length-{n} diagonal",
                n * n
            )))
        }
    };
    if (&g - g.transpose()).abs().max() > 0.0 {
        return Err(Error::Config("params.g must be symmetric".into()));
    }
    Ok(g)
}

/// Builds a model manifold from its configuration.
pub fn make_model(cfg: &ModelConfig) -> Result<ManifoldContext> {
    let spec = cfg.chart_spec();
    spec.validate()?;
    let n = cfg.dim;
    let pairs = sym_pairs(n);
    let nc = pairs.len();
    let scale = cfg.param_scalar("scale", 1.0)?;
    if cfg.model != ModelKind::FlatTorus && cfg.model != ModelKind::BumpyTorus && scale <= 0.0 {
        return Err(Error::Config("params.scale must be positive".into()));
    }
    let nf = (n - 1) as f64;
    match cfg.model {
        ModelKind::FlatTorus => {
            let gm = flat_metric(cfg)?;
            let grid = Grid::torus(spec)?;
            let g = Field::from_points(grid.npts(), nc, |_, o| {
                for (k, &(i, j)) in pairs.iter().enumerate() {
                    o[k] = gm[(i, j)];
                }
            });
            ManifoldContext::from_metric(cfg.clone(), grid, g, Some(0.0), true)
        }
        ModelKind::BumpyTorus => {
            let a = cfg.param_scalar("amplitude", 0.1)?;
            let freq = cfg.param_scalar("frequency", 1.0)?;
            if freq.fract() != 0.0 {
                return Err(Error::Config("params.frequency must be an integer (periodicity)".into()));
            }
            let b = bump_matrix(n);
            let grid = Grid::torus(spec)?;
            let g = Field::from_points(grid.npts(), nc, |p, o| {
                let x = grid.coords(p);
                let bump = a * (2.0 * PI * freq * x[0]).sin() * (2.0 * PI * freq * x[1]).cos();
                for (k, &(i, j)) in pairs.iter().enumerate() {
                    o[k] = if i == j { 1.0 } else { 0.0 } + bump * b[(i, j)];
                }
            });
            let flat = a == 0.0;
            ManifoldContext::from_metric(cfg.clone(), grid, g, if flat { Some(0.0) } else { None }, flat)
        }
        ModelKind::SphereStereo | ModelKind::HyperbolicBall | ModelKind::HyperbolicHalf => {
            let geo = chart_geometry(cfg.model, n, scale);
            let grid = Grid::open_chart(spec, geo.center.clone(), geo.half_width)?;
            let model = cfg.model;
            let mut g = Field::zeros(grid.npts(), nc);
            for p in 0..grid.npts() {
                let x = grid.coords(p);
                let r2: f64 = x.iter().map(|v| v * v).sum::<f64>() / (scale * scale);
                let conf = match model {
                    ModelKind::SphereStereo => 4.0 / (1.0 + r2).powi(2),
                    ModelKind::HyperbolicBall => {
                        if r2 >= 1.0 {
                            return Err(Error::Domain(format!(
                                "sample {p} at {x:?} lies outside the hyperbolic ball"
                            )));
                        }
                        4.0 / (1.0 - r2).powi(2)
                    }
                    _ => {
                        let y = x[n - 1];
                        if y <= 0.0 {
                            return Err(Error::Domain(format!(
                                "sample {p} at {x:?} lies outside the upper half-space"
                            )));
                        }
                        scale * scale / (y * y)
                    }
                };
                let o = g.at_mut(p);
                for (k, &(i, j)) in pairs.iter().enumerate() {
                    o[k] = if i == j { conf } else { 0.0 };
                }
            }
            let k_sect = if model == ModelKind::SphereStereo { 1.0 } else { -1.0 } / (scale * scale);
            ManifoldContext::from_metric(cfg.clone(), grid, g, Some(nf * k_sect), false)
        }
    }
}

/// Chart box of each open model. The box plus its ghost halo (at most three
/// half-widths from the center) stays inside the model's domain.
pub fn chart_geometry(model: ModelKind, n: usize, scale: f64) -> ModelGeometry {
    match model {
        ModelKind::SphereStereo => ModelGeometry {
            center: vec![0.0; n],
            half_width: 0.5 * scale,
        },
        ModelKind::HyperbolicBall => ModelGeometry {
            center: vec![0.0; n],
            half_width: 0.15 * scale,
        },
        ModelKind::HyperbolicHalf => {
            let mut center = vec![0.0; n];
            center[n - 1] = scale;
            ModelGeometry {
                center,
                half_width: 0.25 * scale,
            }
        }
        _ => ModelGeometry {
            center: vec![0.5; n],
            half_width: 0.5,
        },
    }
}
