//! Sample grids for periodic tori and open coordinate charts.
//!
//! Tori cover the unit cell `[0, 1)^n` with `resolution` samples per axis.
//! Open charts cover the box `center ± half_width` with `resolution` samples
//! per axis and carry a ghost halo of `2 * stencil_order` extra samples on
//! each side. The halo is evaluated from the closed-form metric so that
//! nested central stencils stay defined over the whole measurement box.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChartKind {
    PeriodicTorus,
    OpenBallChart,
    HalfSpaceChart,
}

impl ChartKind {
    pub fn is_periodic(self) -> bool {
        matches!(self, ChartKind::PeriodicTorus)
    }
}

/// How partial derivatives are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeBackend {
    /// Exact Fourier differentiation (periodic tori only).
    Spectral,
    /// Central finite differences of the chart's stencil order.
    FiniteDifference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartSpec {
    pub kind: ChartKind,
    pub dim: usize,
    pub resolution: usize,
    pub interior_margin: f64,
    pub stencil_order: usize,
    pub backend: DerivativeBackend,
}

pub const SUPPORTED_ORDERS: [usize; 4] = [2, 4, 6, 8];

impl ChartSpec {
    pub fn validate(&self) -> Result<()> {
        if !(2..=4).contains(&self.dim) {
            return Err(Error::Config(format!(
                "dim must be in [2, 4], got {}",
                self.dim
            )));
        }
        if !SUPPORTED_ORDERS.contains(&self.stencil_order) {
            return Err(Error::Config(format!(
                "stencil_order must be one of {:?}, got {}",
                SUPPORTED_ORDERS, self.stencil_order
            )));
        }
        let min_res = match self.backend {
            DerivativeBackend::Spectral => 5,
            _ => 2 * self.stencil_order + 1,
        };
        if self.resolution < min_res {
            return Err(Error::Config(format!(
                "resolution {} is below the minimum {} for the {:?} backend (order {})",
                self.resolution, min_res, self.backend, self.stencil_order
            )));
        }
        if self.resolution.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "resolution must be odd, got {}",
                self.resolution
            )));
        }
        if self.kind.is_periodic() {
            if self.interior_margin != 0.0 {
                return Err(Error::Config(
                    "periodic charts require interior_margin = 0".into(),
                ));
            }
        } else {
            if !(self.interior_margin > 0.0 && self.interior_margin < 0.5) {
                return Err(Error::Config(format!(
                    "open charts require 0 < interior_margin < 0.5, got {}",
                    self.interior_margin
                )));
            }
            if self.backend == DerivativeBackend::Spectral {
                return Err(Error::Unsupported(
                    "spectral differentiation requires a periodic chart".into(),
                ));
            }
        }
        Ok(())
    }

    /// Ghost samples added on each side of an open chart.
    pub fn halo(&self) -> usize {
        if self.kind.is_periodic() {
            0
        } else {
            2 * self.stencil_order
        }
    }
}

/// Concrete sample layout. Linear indices are row-major with the last axis
/// varying fastest.
#[derive(Debug, Clone)]
pub struct Grid {
    pub spec: ChartSpec,
    pub shape: Vec<usize>,
    pub strides: Vec<usize>,
    pub spacing: f64,
    pub origin: Vec<f64>,
    pub center: Vec<f64>,
    pub half_width: f64,
    interior: Vec<usize>,
}

impl Grid {
    /// Torus grid on the unit cell.
    pub fn torus(spec: ChartSpec) -> Result<Self> {
        spec.validate()?;
        let n = spec.dim;
        let res = spec.resolution;
        Ok(Self::build(
            spec,
            vec![res; n],
            1.0 / res as f64,
            vec![0.0; n],
            vec![0.5; n],
            0.5,
        ))
    }

    /// Open chart grid on `center ± half_width` plus the ghost halo.
    pub fn open_chart(spec: ChartSpec, center: Vec<f64>, half_width: f64) -> Result<Self> {
        spec.validate()?;
        let n = spec.dim;
        if center.len() != n {
            return Err(Error::Config("chart center has wrong dimension".into()));
        }
        let halo = spec.halo();
        let res = spec.resolution;
        let spacing = 2.0 * half_width / (res - 1) as f64;
        let origin = center
            .iter()
            .map(|c| c - half_width - halo as f64 * spacing)
            .collect();
        Ok(Self::build(
            spec,
            vec![res + 2 * halo; n],
            spacing,
            origin,
            center,
            half_width,
        ))
    }

    fn build(
        spec: ChartSpec,
        shape: Vec<usize>,
        spacing: f64,
        origin: Vec<f64>,
        center: Vec<f64>,
        half_width: f64,
    ) -> Self {
        let n = shape.len();
        let mut strides = vec![1; n];
        for a in (0..n.saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * shape[a + 1];
        }
        let mut grid = Grid {
            spec,
            shape,
            strides,
            spacing,
            origin,
            center,
            half_width,
            interior: Vec::new(),
        };
        grid.interior = (0..grid.npts()).filter(|&p| grid.in_interior(p)).collect();
        grid
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn npts(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_periodic(&self) -> bool {
        self.spec.kind.is_periodic()
    }

    pub fn multi_index(&self, p: usize) -> Vec<usize> {
        self.strides
            .iter()
            .zip(&self.shape)
            .map(|(s, m)| (p / s) % m)
            .collect()
    }

    pub fn linear_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn coords(&self, p: usize) -> Vec<f64> {
        self.multi_index(p)
            .iter()
            .zip(&self.origin)
            .map(|(&i, o)| o + i as f64 * self.spacing)
            .collect()
    }

    fn in_interior(&self, p: usize) -> bool {
        if self.is_periodic() {
            return true;
        }
        let halo = self.spec.halo();
        let res = self.spec.resolution;
        let limit = (1.0 - self.spec.interior_margin) * self.half_width + 1e-12;
        self.multi_index(p).iter().enumerate().all(|(a, &i)| {
            if i < halo || i >= halo + res {
                return false;
            }
            let x = self.origin[a] + i as f64 * self.spacing;
            (x - self.center[a]).abs() <= limit
        })
    }

    /// Samples at which identities are measured (all samples on a torus).
    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    pub fn is_interior(&self, p: usize) -> bool {
        p < self.npts() && self.interior.binary_search(&p).is_ok()
    }

    /// Sample closest to the chart center.
    pub fn center_index(&self) -> usize {
        let idx: Vec<usize> = (0..self.dim())
            .map(|a| ((self.center[a] - self.origin[a]) / self.spacing).round() as usize)
            .collect();
        self.linear_index(&idx)
    }

    /// Volume of one grid cell.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim() as i32)
    }
}
