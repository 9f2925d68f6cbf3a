//! The identity catalog.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::TensorField;
use crate::gauge::{coupling_residual, cn_residual, synthesize_cn_torus};
use crate::geometry::ManifoldContext;
use crate::operators::{
    divergence, exterior_d, hodge_1form, lichnerowicz, linearized_ricci_formula, linearized_ricci_gateaux,
    scalar_laplacian, scalar_times_metric, trace, LichnerowiczVariant,
};
use crate::random::BandLimited;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CaseId {
    I1,
    I2,
    I3,
    I4,
    I5,
    I6,
    I7,
    I8,
    I9,
}

impl CaseId {
    pub const ALL: [CaseId; 9] = [
        CaseId::I1,
        CaseId::I2,
        CaseId::I3,
        CaseId::I4,
        CaseId::I5,
        CaseId::I6,
        CaseId::I7,
        CaseId::I8,
        CaseId::I9,
    ];
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for CaseId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CaseId::ALL
            .iter()
            .find(|c| c.to_string().eq_ignore_ascii_case(s.trim()))
            .copied()
            .ok_or_else(|| Error::Config(format!("unknown identity case '{s}' (expected I1..I9)")))
    }
}

/// Model predicate a case needs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Applicability {
    Any,
    TorusRequired,
    EinsteinRequired,
    RicciFlatRequired,
}

impl Applicability {
    pub fn holds(self, ctx: &ManifoldContext) -> bool {
        match self {
            Applicability::Any => true,
            Applicability::TorusRequired => ctx.is_torus(),
            Applicability::EinsteinRequired => ctx.exact_einstein.is_some(),
            Applicability::RicciFlatRequired => ctx.exact_einstein == Some(0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    SupPointwise,
    L2Global,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseKind {
    Asserted,
    Adjudicated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityCase {
    pub id: CaseId,
    pub statement: String,
    /// Short name of the identity, stable across releases.
    pub anchor: String,
    pub applicability: Vec<Applicability>,
    pub norm: NormKind,
    pub kind: CaseKind,
}

impl IdentityCase {
    pub fn applicable(&self, ctx: &ManifoldContext) -> bool {
        self.applicability.iter().all(|a| a.holds(ctx))
    }
}

/// Step of the Gateaux quotient used by I8; the two-step Richardson
/// combination removes its `O(ε²)` term.
pub const GATEAUX_EPS: f64 = 1e-3;

pub fn catalog() -> Vec<IdentityCase> {
    let case = |id, statement: &str, anchor: &str, applicability: Vec<Applicability>| IdentityCase {
        id,
        statement: statement.to_string(),
        anchor: anchor.to_string(),
        applicability,
        norm: NormKind::SupPointwise,
        kind: CaseKind::Asserted,
    };
    use Applicability::*;
    vec![
        case(CaseId::I1, "δ(f g) = -df", "divergence of a conformal tensor", vec![Any]),
        case(
            CaseId::I2,
            "δh₀ + ((n-2)/2n) d(tr h) = δh + ½d(tr h) for h = h₀ + (tr h/n) g",
            "trace-split gauge coupling",
            vec![Any],
        ),
        case(CaseId::I3, "δRic = -½ds", "contracted second Bianchi identity", vec![Any]),
        case(CaseId::I4, "Δ_H df = d(Δf)", "Hodge Laplacian commutes with d", vec![Any]),
        case(
            CaseId::I5,
            "Δ_L h = ∇*∇h - 2R̊h + 2λh",
            "Einstein Weitzenböck form of the Lichnerowicz Laplacian",
            vec![EinsteinRequired],
        ),
        case(
            CaseId::I6,
            "tr(Δ_L h) = Δ(tr h)",
            "trace commutes with the Lichnerowicz Laplacian",
            vec![EinsteinRequired],
        ),
        case(
            CaseId::I7,
            "Ric'(h) = ½Δ_L h for δh + ½d(tr h) = 0",
            "gauge cancellation for gauge-fixed tensors",
            vec![Any],
        ),
        case(
            CaseId::I8,
            "d/dε Ric(g + εh) = ½(Δ_L h - 2δ*δh - ∇d tr h)",
            "linearized Ricci tensor",
            vec![Any],
        ),
        case(
            CaseId::I9,
            "Ric = 0 gives δRic = 0 and tr Ric = 0",
            "Ricci tensor is transverse-traceless when Ricci-flat",
            vec![RicciFlatRequired],
        ),
    ]
}

pub fn case(id: CaseId) -> IdentityCase {
    catalog().into_iter().find(|c| c.id == id).expect("catalog covers every id")
}

/// Band-limited inputs sized for the grid.
pub(crate) fn inputs(ctx: &ManifoldContext, seed: u64) -> BandLimited {
    let bw = (ctx.config.resolution / 4).clamp(1, 2);
    BandLimited::new(seed).with_bandwidth(bw)
}

/// `(lhs, rhs)` pairs whose sup-gap is the case residual.
pub(crate) fn evaluate(ctx: &ManifoldContext, id: CaseId, seed: u64) -> Result<Vec<(TensorField, TensorField)>> {
    let rnd = inputs(ctx, seed);
    Ok(match id {
        CaseId::I1 => {
            let f = rnd.scalar(ctx);
            let lhs = divergence(ctx, &scalar_times_metric(ctx, &f)?)?;
            vec![(lhs, exterior_d(ctx, &f)?.scaled(-1.0))]
        }
        CaseId::I2 => {
            let h = rnd.sym2(ctx);
            vec![(coupling_residual(ctx, &h)?, cn_residual(ctx, &h)?)]
        }
        CaseId::I3 => {
            let curv = ctx.curvature()?;
            let lhs = divergence(ctx, &curv.ricci)?;
            vec![(lhs, exterior_d(ctx, &curv.scalar)?.scaled(-0.5))]
        }
        CaseId::I4 => {
            let f = rnd.scalar(ctx);
            let lhs = hodge_1form(ctx, &exterior_d(ctx, &f)?)?;
            vec![(lhs, exterior_d(ctx, &scalar_laplacian(ctx, &f)?)?)]
        }
        CaseId::I5 => {
            let h = rnd.sym2(ctx);
            vec![(
                lichnerowicz(ctx, &h, LichnerowiczVariant::RicciIdentity)?,
                lichnerowicz(ctx, &h, LichnerowiczVariant::EinsteinReduced)?,
            )]
        }
        CaseId::I6 => {
            let h = rnd.sym2(ctx);
            let lhs = trace(ctx, &lichnerowicz(ctx, &h, LichnerowiczVariant::General)?)?;
            vec![(lhs, scalar_laplacian(ctx, &trace(ctx, &h)?)?)]
        }
        CaseId::I7 => {
            let h = gauge_fixed_input(ctx, seed)?;
            let lhs = linearized_ricci_formula(ctx, &h)?;
            vec![(lhs, lichnerowicz(ctx, &h, LichnerowiczVariant::General)?.scaled(0.5))]
        }
        CaseId::I8 => {
            let h = rnd.with_amplitude(0.1).sym2(ctx);
            let coarse = linearized_ricci_gateaux(ctx, &h, GATEAUX_EPS)?;
            let fine = linearized_ricci_gateaux(ctx, &h, 0.5 * GATEAUX_EPS)?;
            let extrapolated = fine.scaled(4.0 / 3.0).axpy(-1.0 / 3.0, &coarse);
            vec![(extrapolated, linearized_ricci_formula(ctx, &h)?)]
        }
        CaseId::I9 => {
            let ric = &ctx.curvature()?.ricci;
            let div = divergence(ctx, ric)?;
            let tr = trace(ctx, ric)?;
            vec![(div.clone(), div.scaled(0.0)), (tr.clone(), tr.scaled(0.0))]
        }
    })
}

/// A tensor with vanishing gauge residual: synthesized on flat tori, `Ric`
/// (gauge-fixed by the Bianchi identity) elsewhere.
pub(crate) fn gauge_fixed_input(ctx: &ManifoldContext, seed: u64) -> Result<TensorField> {
    if ctx.is_torus() && ctx.flat {
        let u = inputs(ctx, seed).scalar(ctx);
        synthesize_cn_torus(ctx, &u, Some((seed.wrapping_add(1), 2)))
    } else {
        Ok(ctx.curvature()?.ricci.clone())
    }
}

/// `sup|lhs - rhs| / max(1, sup|lhs|, sup|rhs|)`, maximized over pairs.
pub(crate) fn residual(ctx: &ManifoldContext, pairs: &[(TensorField, TensorField)]) -> f64 {
    pairs
        .iter()
        .map(|(a, b)| {
            let scale = ctx.sup_norm(a).max(ctx.sup_norm(b)).max(1.0);
            ctx.sup_norm(&a.sub(b)) / scale
        })
        .fold(0.0, f64::max)
}
