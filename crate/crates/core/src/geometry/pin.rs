//! Boot-time pin of the Riemann sign convention.
//!
//! The Lichnerowicz Laplacian is evaluated twice: once through the Ricci
//! identity (commutator of covariant second derivatives, which needs no sign
//! choice) and once through the Einstein-reduced form `∇*∇ - 2R̊ + 2λ̂` with
//! each candidate sign of `R̊`. The sign whose residual converges under
//! refinement is kept.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::{make_model, CurvatureBundle};
use crate::config::{ModelConfig, ModelKind};
use crate::error::{Error, Result};
use crate::operators::{lichnerowicz_with, rough_laplacian, LichnerowiczVariant};
use crate::reduce;

/// Sign convention of the codifferential on 1-forms.
pub const CODIFFERENTIAL_CONVENTION: &str = "δω = -∇^i ω_i";

const PIN_RESOLUTIONS: [usize; 3] = [17, 25, 33];
const PIN_ORDER: usize = 6;

/// Residual history of one candidate sign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignCandidate {
    pub sign: f64,
    pub residuals: Vec<f64>,
    pub slope: f64,
    pub converges: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PinEvidence {
    pub model: String,
    pub dim: usize,
    pub stencil_order: usize,
    pub resolutions: Vec<usize>,
    pub spacings: Vec<f64>,
    pub lambda_hat: f64,
    pub candidates: Vec<SignCandidate>,
}

impl PinEvidence {
    /// The unique converging sign, if there is exactly one.
    pub fn winner(&self) -> Option<f64> {
        let mut it = self.candidates.iter().filter(|c| c.converges);
        match (it.next(), it.next()) {
            (Some(c), None) => Some(c.sign),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConventionPin {
    /// Factor relating the stored `R_{ikjl}` to `g(R(∂_i, ∂_k) ∂_j, ∂_l)`.
    pub riemann_sign: f64,
    pub codifferential: String,
    pub evidence: Option<PinEvidence>,
}

impl ConventionPin {
    /// A pin with a given sign and no evidence; used to inject conventions in tests.
    pub fn fixed(riemann_sign: f64) -> Self {
        ConventionPin {
            riemann_sign,
            codifferential: CODIFFERENTIAL_CONVENTION.to_string(),
            evidence: None,
        }
    }
}

/// Smooth test tensor with every component active.
fn probe_tensor(x: &[f64], m: &mut [f64]) {
    let n = x.len();
    for i in 0..n {
        for j in 0..n {
            let a = 1.0 + 0.5 * (i + 2 * j) as f64;
            let b = 0.7 + 0.3 * (j + 2 * i) as f64;
            let phase: f64 = x.iter().enumerate().map(|(k, v)| (1.0 + k as f64) * v).sum();
            m[i * n + j] = (a * x[i] + b * x[j] + 0.3 * phase).cos() + 0.1 * (i * n + j) as f64;
        }
    }
}

/// Runs the pin experiment on an Einstein chart model.
pub fn resolve_pin(model: ModelKind, dim: usize, resolutions: &[usize], order: usize) -> Result<PinEvidence> {
    if resolutions.len() < 2 {
        return Err(Error::Config("the pin needs at least two resolutions".into()));
    }
    let mut spacings = Vec::new();
    let mut res_plus = Vec::new();
    let mut res_minus = Vec::new();
    let mut lambda_hat = 0.0;
    for &r in resolutions {
        let cfg = ModelConfig::new(model, dim, r).with_order(order);
        let ctx = make_model(&cfg)?;
        if ctx.exact_einstein.is_none() {
            return Err(Error::Precondition(format!("{model} is not an Einstein model")));
        }
        let curv = CurvatureBundle::compute(&ctx, 1.0);
        lambda_hat = curv.lambda_hat;
        let h = ctx.sym2_from_fn(probe_tensor);
        let reference = lichnerowicz_with(&ctx, &curv, &h, LichnerowiczVariant::RicciIdentity)?;
        let rough = rough_laplacian(&ctx, &h)?;
        let rk = curv.second_kind_apply(&ctx, &h)?;
        let base = reference.sub(&rough).axpy(-2.0 * curv.lambda_hat, &h);
        let scale = ctx.sup(&reference).max(1.0);
        // reference - (rough - 2σR̊h + 2λ̂h) = base + 2σR̊h
        res_plus.push(ctx.sup(&base.axpy(2.0, &rk)) / scale);
        res_minus.push(ctx.sup(&base.axpy(-2.0, &rk)) / scale);
        spacings.push(ctx.spacing());
    }
    let candidate = |sign: f64, residuals: Vec<f64>| {
        let (slope, _) = slope_of(&spacings, &residuals);
        let floor = residuals.iter().all(|&r| r <= 1e-11);
        SignCandidate {
            sign,
            converges: floor || slope >= order as f64 - 0.5,
            slope,
            residuals,
        }
    };
    Ok(PinEvidence {
        model: model.name().to_string(),
        dim,
        stencil_order: order,
        resolutions: resolutions.to_vec(),
        spacings: spacings.clone(),
        lambda_hat,
        candidates: vec![candidate(1.0, res_plus), candidate(-1.0, res_minus)],
    })
}

fn slope_of(spacings: &[f64], residuals: &[f64]) -> (f64, f64) {
    let xs: Vec<f64> = spacings.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = residuals.iter().map(|r| r.max(1e-300).ln()).collect();
    reduce::ls_slope(&xs, &ys)
}

static PIN: OnceLock<std::result::Result<ConventionPin, Error>> = OnceLock::new();

/// Process-wide pin, computed on first use on the 2-dimensional sphere chart.
pub fn convention_pin() -> Result<&'static ConventionPin> {
    PIN.get_or_init(|| {
        let evidence = resolve_pin(ModelKind::SphereStereo, 2, &PIN_RESOLUTIONS, PIN_ORDER)?;
        if !(evidence.lambda_hat > 0.0) {
            return Err(Error::Internal(format!(
                "sphere chart has non-positive curvature estimate {}",
                evidence.lambda_hat
            )));
        }
        let sign = evidence.winner().ok_or_else(|| {
            Error::Internal(format!("Riemann sign pin is ambiguous: {:?}", evidence.candidates))
        })?;
        Ok(ConventionPin {
            riemann_sign: sign,
            codifferential: CODIFFERENTIAL_CONVENTION.to_string(),
            evidence: Some(evidence),
        })
    })
    .as_ref()
    .map_err(Clone::clone)
}
