//! Identity suites, convergence studies and adjudications, with their JSON report.

mod adjudicate;
mod cases;
mod report;

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use adjudicate::{
    adjudicate_bochner_koiso, adjudicate_commutation, adjudicate_commutation_with_pin, adjudicate_second_kind_sign,
    Adjudication, CommutationCandidate, CommutationSample,
};
pub use cases::{case, catalog, Applicability, CaseId, CaseKind, IdentityCase, NormKind, GATEAUX_EPS};
pub use report::{FlowSection, ModelDescriptor, ResidualReport, SpectrumSection, SCHEMA_VERSION};

use crate::config::ModelConfig;
use crate::error::{Error, Result};
use crate::geometry::{make_model, ManifoldContext};
use crate::reduce;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Reported,
}

/// Residual history of one case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRecord {
    pub resolutions: Vec<usize>,
    pub spacings: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Least-squares slope of `log residual` against `log Δx`.
    pub slope: f64,
    pub expected_order: Option<usize>,
    /// Every residual at or below `floor_threshold`.
    pub floor_limited: bool,
    pub floor_threshold: f64,
}

impl ConvergenceRecord {
    pub fn converges(&self) -> bool {
        self.floor_limited || self.expected_order.is_some_and(|p| self.slope >= p as f64 - 0.5)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseResult {
    pub id: CaseId,
    pub statement: String,
    pub anchor: String,
    pub kind: CaseKind,
    pub norm: NormKind,
    pub convergence: ConvergenceRecord,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedCase {
    pub id: CaseId,
    pub unmet: Vec<Applicability>,
}

#[derive(Debug, Clone)]
pub struct SuiteOptions {
    /// At least three, strictly increasing.
    pub resolutions: Vec<usize>,
    pub seed: u64,
    /// `None` runs every applicable case; explicitly listed cases must apply.
    pub cases: Option<Vec<CaseId>>,
    /// Overrides the floor threshold of the backend.
    pub floor: Option<f64>,
    pub timings: bool,
}

impl SuiteOptions {
    /// `{r, r + 8, r + 16}`.
    pub fn new(resolution: usize, seed: u64) -> Self {
        SuiteOptions {
            resolutions: vec![resolution, resolution + 8, resolution + 16],
            seed,
            cases: None,
            floor: None,
            timings: false,
        }
    }
}

/// Residual level treated as exact: roundoff of the spectral backend or of
/// algebraically exact finite-difference identities.
pub fn default_floor(ctx: &ManifoldContext) -> f64 {
    if ctx.is_spectral() {
        1e-9
    } else {
        1e-11
    }
}

pub fn check_resolutions(resolutions: &[usize]) -> Result<()> {
    if resolutions.len() < 3 {
        return Err(Error::Config(format!(
            "a convergence study needs at least 3 resolutions, got {}",
            resolutions.len()
        )));
    }
    if resolutions.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("resolutions must increase strictly".into()));
    }
    Ok(())
}

pub(crate) fn log_slope(spacings: &[f64], residuals: &[f64]) -> f64 {
    let xs: Vec<f64> = spacings.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = residuals.iter().map(|r| r.max(1e-300).ln()).collect();
    reduce::ls_slope(&xs, &ys).0
}

fn record(
    resolutions: &[usize],
    spacings: &[f64],
    residuals: Vec<f64>,
    order: Option<usize>,
    floor: f64,
) -> ConvergenceRecord {
    ConvergenceRecord {
        resolutions: resolutions.to_vec(),
        spacings: spacings.to_vec(),
        slope: log_slope(spacings, &residuals),
        expected_order: order,
        floor_limited: residuals.iter().all(|&r| r <= floor),
        floor_threshold: floor,
        residuals,
    }
}

fn stencil_order(ctx: &ManifoldContext) -> Option<usize> {
    if ctx.is_spectral() {
        None
    } else {
        Some(ctx.chart.stencil_order)
    }
}

struct SuiteRun {
    descriptor: ModelDescriptor,
    selected: Vec<IdentityCase>,
    skipped: Vec<SkippedCase>,
    residuals: Vec<Vec<f64>>,
    floor: f64,
    order: Option<usize>,
    timings: BTreeMap<String, f64>,
    adjudications: Vec<Adjudication>,
}

fn select(ctx: &ManifoldContext, requested: &Option<Vec<CaseId>>) -> Result<(Vec<IdentityCase>, Vec<SkippedCase>)> {
    let mut selected = Vec::new();
    let mut skipped = Vec::new();
    for c in catalog() {
        let unmet: Vec<Applicability> = c.applicability.iter().copied().filter(|a| !a.holds(ctx)).collect();
        match requested {
            Some(ids) if !ids.contains(&c.id) => continue,
            Some(_) if !unmet.is_empty() => {
                return Err(Error::Config(format!(
                    "case {} does not apply to {}: unmet predicates {:?}",
                    c.id, ctx.model_name, unmet
                )));
            }
            _ if !unmet.is_empty() => skipped.push(SkippedCase { id: c.id, unmet }),
            _ => selected.push(c),
        }
    }
    Ok((selected, skipped))
}

fn run(cfg: &ModelConfig, opts: &SuiteOptions) -> Result<SuiteRun> {
    check_resolutions(&opts.resolutions)?;
    let mut descriptor = ModelDescriptor::new(cfg, &opts.resolutions);
    let mut selected = Vec::new();
    let mut skipped = Vec::new();
    let mut residuals: Vec<Vec<f64>> = Vec::new();
    let mut floor = 0.0;
    let mut order = None;
    let mut timings = BTreeMap::new();
    let mut adjudications = Vec::new();
    for (ri, &r) in opts.resolutions.iter().enumerate() {
        let ctx = make_model(&cfg.clone().with_resolution(r))?;
        if ri == 0 {
            let (s, k) = select(&ctx, &opts.cases)?;
            selected = s;
            skipped = k;
            residuals = vec![Vec::new(); selected.len()];
            floor = opts.floor.unwrap_or_else(|| default_floor(&ctx));
            order = stencil_order(&ctx);
            if let Some(a) = adjudicate_second_kind_sign(&ctx)? {
                adjudications.push(a);
            }
        }
        let start = Instant::now();
        descriptor.push(&ctx)?;
        timings.insert(format!("curvature@{r}"), start.elapsed().as_secs_f64());
        for (ci, c) in selected.iter().enumerate() {
            let start = Instant::now();
            let pairs = cases::evaluate(&ctx, c.id, opts.seed)?;
            residuals[ci].push(cases::residual(&ctx, &pairs));
            timings.insert(format!("{}@{r}", c.id), start.elapsed().as_secs_f64());
        }
    }
    Ok(SuiteRun {
        descriptor,
        selected,
        skipped,
        residuals,
        floor,
        order,
        timings,
        adjudications,
    })
}

/// Runs the identity catalog over `opts.resolutions` and grades every
/// asserted case by its convergence slope or its roundoff floor.
pub fn run_identity_suite(cfg: &ModelConfig, opts: &SuiteOptions) -> Result<ResidualReport> {
    let started = Instant::now();
    let run = run(cfg, opts)?;
    let cases = run
        .selected
        .iter()
        .zip(run.residuals)
        .map(|(c, res)| {
            let conv = record(&opts.resolutions, &run.descriptor.spacings, res, run.order, run.floor);
            let verdict = match c.kind {
                CaseKind::Adjudicated => Verdict::Reported,
                CaseKind::Asserted if conv.converges() => Verdict::Pass,
                CaseKind::Asserted => Verdict::Fail,
            };
            CaseResult {
                id: c.id,
                statement: c.statement.clone(),
                anchor: c.anchor.clone(),
                kind: c.kind,
                norm: c.norm,
                convergence: conv,
                verdict,
            }
        })
        .collect();
    let mut report = ResidualReport::new("identities", cfg, run.descriptor)?;
    report.cases = cases;
    report.skipped = run.skipped;
    report.adjudications = run.adjudications;
    if opts.timings {
        let mut t = run.timings;
        t.insert("total".into(), started.elapsed().as_secs_f64());
        report.set_timings(t);
    }
    Ok(report)
}

/// Residuals of one case across resolutions.
pub fn convergence_study(id: CaseId, cfg: &ModelConfig, resolutions: &[usize], seed: u64) -> Result<ConvergenceRecord> {
    let opts = SuiteOptions {
        resolutions: resolutions.to_vec(),
        seed,
        cases: Some(vec![id]),
        floor: None,
        timings: false,
    };
    let run = run(cfg, &opts)?;
    let res = run.residuals.into_iter().next().expect("one selected case");
    Ok(record(resolutions, &run.descriptor.spacings, res, run.order, run.floor))
}
