//! The scalar step of the rigidity argument: `Δu + a u = C` forces `u = C/a`
//! when `a > 0`.

use serde::{Deserialize, Serialize};

use super::{assemble, bicgstab, BlockSymbol};
use crate::error::{Error, Result};
use crate::field::TensorField;
use crate::geometry::ManifoldContext;
use crate::operators::{scalar_laplacian, OperatorId, OperatorName};

#[derive(Debug, Clone)]
pub struct RigiditySolution {
    pub u: TensorField,
    pub summary: RigiditySummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigiditySummary {
    pub a: f64,
    pub c: f64,
    /// `C / a`
    pub expected: f64,
    /// `sup |u - C/a|`
    pub deviation: f64,
    /// `sup u - inf u`
    pub oscillation: f64,
    pub method: String,
}

/// Solves `Δu + a u = C` on a torus; Fourier blocks on flat tori, BiCGSTAB otherwise.
pub fn rigidity_solve(ctx: &ManifoldContext, a: f64, c: f64) -> Result<RigiditySolution> {
    if !(a > 0.0) {
        return Err(Error::Precondition(format!(
            "a = {a} is outside the regime a > 0 where Δ + a is invertible"
        )));
    }
    if !ctx.is_torus() {
        return Err(Error::Unsupported("the rigidity solve needs a torus backend".into()));
    }
    let rhs = ctx.scalar_from_fn(|_| c);
    let (u, method) = if ctx.flat {
        let handle = assemble(ctx, OperatorId::new(OperatorName::ScalarLaplacian))?;
        let sym = BlockSymbol::new(&handle)?;
        let y = sym.apply_function(&handle.from_field(&rhs), |l| 1.0 / (l + a));
        (handle.to_field(&y), "fourier_block")
    } else {
        let (x, stats) = bicgstab(
            |v| {
                let f = ctx.field(crate::field::Valence::Scalar, crate::field::Field { ncomp: 1, data: v.to_vec() });
                Ok(scalar_laplacian(ctx, &f)?.axpy(a, &f).values.data)
            },
            &rhs.values.data,
            1e-14,
            2000,
        )?;
        if !stats.converged && stats.relative_residual > 1e-10 {
            return Err(Error::NonConvergence {
                iterations: stats.iterations,
                worst_residual: stats.relative_residual,
            });
        }
        (ctx.field(crate::field::Valence::Scalar, crate::field::Field { ncomp: 1, data: x }), "bicgstab")
    };
    let expected = c / a;
    let vals = &u.values.data;
    let deviation = crate::reduce::sup_abs(vals.iter().map(|v| v - expected));
    let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(RigiditySolution {
        u,
        summary: RigiditySummary {
            a,
            c,
            expected,
            deviation,
            oscillation: max - min,
            method: method.to_string(),
        },
    })
}
