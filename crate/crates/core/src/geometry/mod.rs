//! Model manifolds and metric-derived geometry.

mod curvature;
mod models;
mod pin;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::OnceLock;

use nalgebra::DMatrix;

pub use curvature::{Connection, CurvatureBundle};
pub use models::{bump_matrix, make_model, ModelGeometry};
pub use pin::{convention_pin, resolve_pin, ConventionPin, PinEvidence, CODIFFERENTIAL_CONVENTION};

use crate::config::{ModelConfig, ModelKind};
use crate::diff::Differentiator;
use crate::error::{Error, Result};
use crate::field::{sym_index, sym_pairs, Field, TensorField, Valence};
use crate::grid::{ChartSpec, DerivativeBackend, Grid};
use crate::reduce;

static NEXT_CONTEXT_ID: AtomicU64 = AtomicU64::new(1);

/// Metric, its pointwise inverse and volume density.
#[derive(Debug, Clone)]
pub struct MetricField {
    pub g: TensorField,
    pub g_inv: TensorField,
    pub sqrt_det: TensorField,
}

impl MetricField {
    /// Inverts a sampled metric. Samples holding NaN are skipped; any finite
    /// sample that is not positive-definite is an error.
    pub fn from_samples(grid: &Grid, g: Field, context_id: u64) -> Result<Self> {
        let n = grid.dim();
        let nc = n * (n + 1) / 2;
        let npts = grid.npts();
        let mut inv = Field::zeros(npts, nc);
        let mut sd = Field::zeros(npts, 1);
        for p in 0..npts {
            let s = g.at(p);
            if s.iter().any(|v| !v.is_finite()) {
                inv.at_mut(p).iter_mut().for_each(|v| *v = f64::NAN);
                sd.at_mut(p)[0] = f64::NAN;
                continue;
            }
            let m = DMatrix::from_fn(n, n, |i, j| s[sym_index(n, i, j)]);
            let chol = match m.clone().cholesky() {
                Some(c) => c,
                None => {
                    let min_eigenvalue = m.symmetric_eigenvalues().min();
                    return Err(Error::NotPositiveDefinite {
                        index: p,
                        coords: grid.coords(p),
                        min_eigenvalue,
                    });
                }
            };
            let det: f64 = chol.l().diagonal().iter().map(|d| d * d).product();
            let mi = chol.inverse();
            let o = inv.at_mut(p);
            for (k, &(i, j)) in sym_pairs(n).iter().enumerate() {
                o[k] = 0.5 * (mi[(i, j)] + mi[(j, i)]);
            }
            sd.at_mut(p)[0] = det.sqrt();
        }
        Ok(MetricField {
            g: TensorField::new(Valence::Sym2, n, context_id, g),
            g_inv: TensorField::new(Valence::Sym2, n, context_id, inv),
            sqrt_det: TensorField::new(Valence::Scalar, n, context_id, sd),
        })
    }
}

/// A discretized model manifold. Immutable once built; derived geometry is
/// computed on first use and cached.
#[derive(Debug)]
pub struct ManifoldContext {
    id: u64,
    pub model_name: String,
    pub config: ModelConfig,
    pub chart: ChartSpec,
    pub grid: Grid,
    pub metric: MetricField,
    /// Cell volume times `sqrt(det g)`; tori only.
    pub quadrature_weights: Option<Vec<f64>>,
    pub(crate) diff: Differentiator,
    /// Closed-form Einstein constant when the model is known to be Einstein.
    pub exact_einstein: Option<f64>,
    /// Constant metric on a torus (translation-invariant operators).
    pub flat: bool,
    connection: OnceLock<Connection>,
    curvature: OnceLock<CurvatureBundle>,
}

impl ManifoldContext {
    pub(crate) fn from_metric(
        config: ModelConfig,
        grid: Grid,
        g: Field,
        exact_einstein: Option<f64>,
        flat: bool,
    ) -> Result<Self> {
        let id = NEXT_CONTEXT_ID.fetch_add(1, Ordering::Relaxed);
        let metric = MetricField::from_samples(&grid, g, id)?;
        let quadrature_weights = if grid.is_periodic() {
            let cell = grid.cell_volume();
            Some(metric.sqrt_det.values.data.iter().map(|s| s * cell).collect())
        } else {
            None
        };
        let diff = Differentiator::new(&grid);
        Ok(ManifoldContext {
            id,
            model_name: config.model.name().to_string(),
            chart: grid.spec.clone(),
            config,
            grid,
            metric,
            quadrature_weights,
            diff,
            exact_einstein,
            flat,
            connection: OnceLock::new(),
            curvature: OnceLock::new(),
        })
    }

    /// Same grid and derivative engine with a different sampled metric.
    pub fn with_metric(&self, g: Field) -> Result<Self> {
        Self::from_metric(self.config.clone(), self.grid.clone(), g, None, false)
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn npts(&self) -> usize {
        self.grid.npts()
    }

    pub fn model(&self) -> ModelKind {
        self.config.model
    }

    pub fn is_torus(&self) -> bool {
        self.grid.is_periodic()
    }

    pub fn is_spectral(&self) -> bool {
        self.diff.backend() == DerivativeBackend::Spectral
    }

    pub fn interior(&self) -> &[usize] {
        self.grid.interior()
    }

    pub fn spacing(&self) -> f64 {
        self.grid.spacing
    }

    /// Size of the discretization error expected from one derivative.
    pub fn diff_tolerance(&self) -> f64 {
        if self.is_spectral() {
            1e-10
        } else {
            let kh = 2.0 * std::f64::consts::PI * self.grid.spacing;
            kh.powi(self.chart.stencil_order as i32).max(1e-10)
        }
    }

    pub fn connection(&self) -> &Connection {
        self.connection.get_or_init(|| Connection::compute(self))
    }

    /// Curvature under the process-wide convention pin.
    pub fn curvature(&self) -> Result<&CurvatureBundle> {
        if let Some(c) = self.curvature.get() {
            return Ok(c);
        }
        let pin = convention_pin()?;
        let bundle = CurvatureBundle::compute(self, pin.riemann_sign);
        Ok(self.curvature.get_or_init(|| bundle))
    }

    pub fn check(&self, f: &TensorField, valence: Valence) -> Result<()> {
        if f.context_id != self.id {
            return Err(Error::ForeignField {
                field: f.context_id,
                expected: self.id,
            });
        }
        if f.valence != valence {
            return Err(Error::Precondition(format!(
                "expected a {valence:?} field, got {:?}",
                f.valence
            )));
        }
        Ok(())
    }

    pub fn scalar_from_fn<F: Fn(&[f64]) -> f64 + Sync>(&self, f: F) -> TensorField {
        let values = Field::from_points(self.npts(), 1, |p, o| o[0] = f(&self.grid.coords(p)));
        TensorField::new(Valence::Scalar, self.dim(), self.id, values)
    }

    pub fn one_form_from_fn<F: Fn(&[f64], &mut [f64]) + Sync>(&self, f: F) -> TensorField {
        let values = Field::from_points(self.npts(), self.dim(), |p, o| f(&self.grid.coords(p), o));
        TensorField::new(Valence::OneForm, self.dim(), self.id, values)
    }

    /// `f(x, m)` fills the full `n x n` row-major matrix `m`; it is symmetrized.
    pub fn sym2_from_fn<F: Fn(&[f64], &mut [f64]) + Sync>(&self, f: F) -> TensorField {
        let n = self.dim();
        let pairs = sym_pairs(n);
        let values = Field::from_points(self.npts(), pairs.len(), |p, o| {
            let mut m = vec![0.0; n * n];
            f(&self.grid.coords(p), &mut m);
            for (k, &(i, j)) in pairs.iter().enumerate() {
                o[k] = 0.5 * (m[i * n + j] + m[j * n + i]);
            }
        });
        TensorField::new(Valence::Sym2, n, self.id, values)
    }

    pub fn zeros(&self, valence: Valence) -> TensorField {
        TensorField::zeros(valence, self.dim(), self.id, self.npts())
    }

    /// Adopts raw values as a field of this context.
    pub fn field(&self, valence: Valence, values: Field) -> TensorField {
        TensorField::new(valence, self.dim(), self.id, values)
    }

    /// Pointwise metric inner product of two fields of equal valence.
    pub fn inner_at(&self, a: &TensorField, b: &TensorField, p: usize) -> f64 {
        let n = self.dim();
        let gi = self.metric.g_inv.at(p);
        let x = a.at(p);
        let y = b.at(p);
        match a.valence {
            Valence::Scalar => x[0] * y[0],
            Valence::OneForm => {
                let mut s = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        s += gi[sym_index(n, i, j)] * x[i] * y[j];
                    }
                }
                s
            }
            Valence::Sym2 => {
                // <a, b> = g^{ik} g^{jl} a_ij b_kl
                let mut s = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        let aij = x[sym_index(n, i, j)];
                        if aij == 0.0 {
                            continue;
                        }
                        for k in 0..n {
                            let gik = gi[sym_index(n, i, k)];
                            for l in 0..n {
                                s += aij * gik * gi[sym_index(n, j, l)] * y[sym_index(n, k, l)];
                            }
                        }
                    }
                }
                s
            }
        }
    }

    /// Discrete L² inner product `sum_p w_p <a, b>_p` (tori only).
    pub fn l2_inner(&self, a: &TensorField, b: &TensorField) -> Result<f64> {
        let w = self.quadrature_weights.as_ref().ok_or_else(|| {
            Error::Unsupported("global integrals need a compact (torus) backend".into())
        })?;
        let terms: Vec<f64> = (0..self.npts()).map(|p| w[p] * self.inner_at(a, b, p)).collect();
        Ok(reduce::pairwise_sum(&terms))
    }

    pub fn l2_norm(&self, a: &TensorField) -> Result<f64> {
        Ok(self.l2_inner(a, a)?.max(0.0).sqrt())
    }

    pub fn integrate(&self, f: &TensorField) -> Result<f64> {
        let w = self.quadrature_weights.as_ref().ok_or_else(|| {
            Error::Unsupported("global integrals need a compact (torus) backend".into())
        })?;
        let terms: Vec<f64> = (0..self.npts()).map(|p| w[p] * f.at(p)[0]).collect();
        Ok(reduce::pairwise_sum(&terms))
    }

    pub fn volume(&self) -> Result<f64> {
        let w = self.quadrature_weights.as_ref().ok_or_else(|| {
            Error::Unsupported("global integrals need a compact (torus) backend".into())
        })?;
        Ok(reduce::pairwise_sum(w))
    }

    /// Sup-norm of the components over measurement samples.
    pub fn sup(&self, f: &TensorField) -> f64 {
        f.sup_over(self.interior())
    }

    /// Sup of the pointwise metric norm over measurement samples.
    pub fn sup_norm(&self, f: &TensorField) -> f64 {
        reduce::sup_abs(self.interior().iter().map(|&p| self.inner_at(f, f, p).max(0.0).sqrt()))
    }

    /// Components of `f` at a measurement sample.
    pub fn value_at<'a>(&self, f: &'a TensorField, p: usize) -> Result<&'a [f64]> {
        if !self.grid.is_interior(p) {
            return Err(Error::Domain(format!(
                "sample {p} lies outside the interior of the {} chart",
                self.model_name
            )));
        }
        let v = f.at(p);
        if v.iter().any(|x| x.is_nan()) {
            return Err(Error::Domain(format!("field undefined at sample {p}")));
        }
        Ok(v)
    }

    /// Componentwise partial derivative along `axis`.
    pub fn differentiate(&self, f: &TensorField, axis: usize) -> Result<TensorField> {
        self.check(f, f.valence)?;
        if axis >= self.dim() {
            return Err(Error::Precondition(format!(
                "axis {axis} out of range for dim {}",
                self.dim()
            )));
        }
        Ok(f.with_values(self.diff.diff(&f.values, axis)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ParamValue;

    #[test]
    fn flat_identity_metric() {
        let ctx = make_model(&ModelConfig::new(ModelKind::FlatTorus, 2, 33)).unwrap();
        for p in 0..ctx.npts() {
            assert_eq!(ctx.metric.g.at(p), &[1.0, 0.0, 1.0]);
            assert!((ctx.metric.sqrt_det.at(p)[0] - 1.0).abs() < 1e-15);
        }
        assert!((ctx.volume().unwrap() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn hyperbolic_ball_origin() {
        let ctx = make_model(&ModelConfig::new(ModelKind::HyperbolicBall, 3, 33)).unwrap();
        let c = ctx.grid.center_index();
        let m = ctx.metric.g.matrix_at(c);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 4.0 } else { 0.0 };
                assert!((m[i][j] - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn bumpy_is_positive_definite_with_bound() {
        // pointwise eigenvalue scan
        let cfg = ModelConfig::new(ModelKind::BumpyTorus, 3, 33).with_param("amplitude", ParamValue::Scalar(0.1));
        let ctx = make_model(&cfg).unwrap();
        let bnorm = bump_matrix(3).symmetric_eigenvalues().abs().max();
        let mut min_eig = f64::INFINITY;
        for p in 0..ctx.npts() {
            let m = ctx.metric.g.matrix_at(p);
            let dm = DMatrix::from_fn(3, 3, |i, j| m[i][j]);
            min_eig = min_eig.min(dm.symmetric_eigenvalues().min());
        }
        assert!(min_eig > 0.0);
        assert!(min_eig >= 1.0 - 0.1 * bnorm - 1e-12, "{min_eig}");
    }

    #[test]
    fn non_positive_metric_is_rejected() {
        let cfg = ModelConfig::new(ModelKind::FlatTorus, 2, 17)
            .with_param("g", ParamValue::Matrix(vec![vec![1.0, 2.0], vec![2.0, 1.0]]));
        match make_model(&cfg) {
            Err(Error::NotPositiveDefinite { index, .. }) => assert_eq!(index, 0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn foreign_fields_are_rejected() {
        let a = make_model(&ModelConfig::new(ModelKind::FlatTorus, 2, 17)).unwrap();
        let b = make_model(&ModelConfig::new(ModelKind::FlatTorus, 2, 17)).unwrap();
        let f = b.scalar_from_fn(|x| x[0]);
        assert!(matches!(a.differentiate(&f, 0), Err(Error::ForeignField { .. })));
        assert!(matches!(a.differentiate(&a.zeros(Valence::Scalar), 2), Err(Error::Precondition(_))));
    }

    #[test]
    fn open_chart_point_queries_respect_margin() {
        let ctx = make_model(&ModelConfig::new(ModelKind::SphereStereo, 2, 17)).unwrap();
        let f = ctx.scalar_from_fn(|x| x[0] * x[1]);
        let df = ctx.differentiate(&f, 0).unwrap();
        assert!(matches!(ctx.value_at(&df, 0), Err(Error::Domain(_))));
        let c = ctx.grid.center_index();
        assert!(ctx.value_at(&df, c).unwrap()[0].abs() < 1e-12);
        assert!(matches!(ctx.integrate(&f), Err(Error::Unsupported(_))));
    }
}
