//! Regularization by truncating the singular expansion of the projector.

use anyhow::Result;
use nalgebra::DVector;
use oblique_pursuit::{ObliqueProjector, SplittingProblem};

#[derive(Debug, Clone)]
pub struct BaselineOutcome {
    pub approximation: DVector<f64>,
    /// Kept terms.
    pub q: usize,
    /// `‖P_W f − P_{W̃_Q} f‖`.
    pub residual: f64,
}

/// `‖P_W f − P_{W̃_Q} f‖` for every `Q = 1..=N`, `W̃_Q = span{ξ_1..ξ_Q}`.
pub fn truncation_residuals(
    f: &DVector<f64>,
    projector: &ObliqueProjector,
    problem: &SplittingProblem,
) -> Result<Vec<f64>> {
    let space = problem.space();
    let target = problem.project_w(f)?;
    let coeffs = projector.xi_coefficients(f)?;
    let xi = projector.xi();
    let mut partial = DVector::zeros(f.len());
    let mut out = Vec::with_capacity(projector.rank());
    for n in 0..projector.rank() {
        partial.axpy(coeffs[n], &DVector::from_column_slice(xi.atom(n)), 1.0);
        let r = &target - &partial;
        out.push(space.norm_of(r.as_slice()));
    }
    Ok(out)
}

/// Signal-dependent truncation: the smallest `Q` attaining the minimal residual.
pub fn signal_dependent_q(residuals: &[f64]) -> usize {
    let mut best = 0;
    for (i, &r) in residuals.iter().enumerate() {
        if r < residuals[best] {
            best = i;
        }
    }
    best + 1
}

/// `fixed_q = None` selects `Q` from the signal.
pub fn truncated_svd_baseline(
    f: &DVector<f64>,
    projector: &ObliqueProjector,
    problem: &SplittingProblem,
    fixed_q: Option<usize>,
) -> Result<BaselineOutcome> {
    let residuals = truncation_residuals(f, projector, problem)?;
    let q = match fixed_q {
        Some(q) => q,
        None => signal_dependent_q(&residuals),
    };
    let approximation = projector.truncate(q)?.apply(f)?;
    Ok(BaselineOutcome {
        approximation,
        q,
        residual: residuals[q - 1],
    })
}
