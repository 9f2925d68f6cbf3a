//! The versioned JSON report.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Adjudication, CaseKind, CaseResult, SkippedCase, Verdict};
use crate::config::ModelConfig;
use crate::error::Result;
use crate::flow::{DecayFit, FlowTrajectory, Integrator, DecayCheckReport};
use crate::geometry::{convention_pin, ConventionPin, ManifoldContext};
use crate::grid::DerivativeBackend;
use crate::spectral::{SpectralBackend, SpectralWindowReport, SpectrumRow};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDescriptor {
    pub model: String,
    pub dim: usize,
    pub backend: DerivativeBackend,
    pub stencil_order: usize,
    pub resolutions: Vec<usize>,
    pub spacings: Vec<f64>,
    pub exact_einstein: Option<f64>,
    /// Mean of `s/n` over measurement samples, per resolution.
    pub lambda_hat: Vec<f64>,
    pub lambda_max_deviation: Vec<f64>,
    pub einstein_residual_sup: Vec<f64>,
}

impl ModelDescriptor {
    pub fn new(cfg: &ModelConfig, resolutions: &[usize]) -> Self {
        ModelDescriptor {
            model: cfg.model.name().to_string(),
            dim: cfg.dim,
            backend: cfg.backend,
            stencil_order: cfg.stencil_order,
            resolutions: resolutions.to_vec(),
            spacings: Vec::new(),
            exact_einstein: None,
            lambda_hat: Vec::new(),
            lambda_max_deviation: Vec::new(),
            einstein_residual_sup: Vec::new(),
        }
    }

    /// Appends the curvature summary of one resolution.
    pub fn push(&mut self, ctx: &ManifoldContext) -> Result<()> {
        let curv = ctx.curvature()?;
        self.exact_einstein = ctx.exact_einstein;
        self.spacings.push(ctx.spacing());
        self.lambda_hat.push(curv.lambda_hat);
        self.lambda_max_deviation.push(curv.lambda_max_deviation);
        self.einstein_residual_sup.push(curv.einstein_residual_sup);
        Ok(())
    }

    pub fn single(ctx: &ManifoldContext) -> Result<Self> {
        let mut d = ModelDescriptor::new(&ctx.config, &[ctx.config.resolution]);
        d.push(ctx)?;
        Ok(d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSection {
    pub operator: String,
    pub backend: SpectralBackend,
    pub target: f64,
    pub rows: Vec<SpectrumRow>,
    pub window: SpectralWindowReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSection {
    pub integrator: Integrator,
    pub dt: Option<f64>,
    pub label: Option<String>,
    pub times: Vec<f64>,
    pub l2_norms: Vec<f64>,
    pub cn_residual_norms: Vec<f64>,
    pub mean_traces: Vec<f64>,
    pub fit: Option<DecayFit>,
    pub decay_check: Option<DecayCheckReport>,
}

impl FlowSection {
    pub fn from_trajectory(traj: &FlowTrajectory, fit: Option<DecayFit>) -> Self {
        FlowSection {
            integrator: traj.integrator,
            dt: traj.dt,
            label: traj.label.clone(),
            times: traj.times.clone(),
            l2_norms: traj.l2_norms.clone(),
            cn_residual_norms: traj.cn_residual_norms.clone(),
            mean_traces: traj.mean_traces.clone(),
            fit,
            decay_check: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub schema_version: u32,
    pub suite_id: String,
    pub config: ModelConfig,
    pub model: ModelDescriptor,
    pub convention_pin: ConventionPin,
    pub cases: Vec<CaseResult>,
    #[serde(default)]
    pub skipped: Vec<SkippedCase>,
    pub adjudications: Vec<Adjudication>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectra: Option<SpectrumSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flow: Option<FlowSection>,
    /// Wall-clock seconds per step; `null` for reproducible output.
    pub timings: Option<BTreeMap<String, f64>>,
    /// Seconds since the Unix epoch; `null` for reproducible output.
    pub timestamp: Option<u64>,
}

impl ResidualReport {
    pub fn new(suite_id: &str, cfg: &ModelConfig, model: ModelDescriptor) -> Result<Self> {
        Ok(ResidualReport {
            schema_version: SCHEMA_VERSION,
            suite_id: suite_id.to_string(),
            config: cfg.clone(),
            model,
            convention_pin: convention_pin()?.clone(),
            cases: Vec::new(),
            skipped: Vec::new(),
            adjudications: Vec::new(),
            spectra: None,
            flow: None,
            timings: None,
            timestamp: None,
        })
    }

    pub fn set_timings(&mut self, timings: BTreeMap<String, f64>) {
        self.timings = Some(timings);
    }

    pub fn stamp(&mut self) {
        self.timestamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .ok()
            .map(|d| d.as_secs());
    }

    /// Drops wall-clock data so identical runs serialize identically.
    pub fn strip_volatile(&mut self) {
        self.timings = None;
        self.timestamp = None;
    }

    /// Every asserted case passed and every adjudication was conclusive.
    pub fn passed(&self) -> bool {
        self.cases
            .iter()
            .all(|c| c.kind != CaseKind::Asserted || c.verdict == Verdict::Pass)
            && self.adjudications.iter().all(|a| a.conclusive)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// One row per case and resolution: `case,resolution,spacing,residual,slope,verdict`.
    pub fn cases_csv(&self) -> String {
        let mut s = String::from("case,resolution,spacing,residual,slope,verdict\n");
        for c in &self.cases {
            let conv = &c.convergence;
            for i in 0..conv.resolutions.len() {
                s.push_str(&format!(
                    "{},{},{:.17e},{:.17e},{:.6},{}\n",
                    c.id,
                    conv.resolutions[i],
                    conv.spacings[i],
                    conv.residuals[i],
                    conv.slope,
                    serde_json::to_value(c.verdict).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
                ));
            }
        }
        s
    }
}
