//! Covariance-structure estimation by maximum likelihood.

pub mod discrepancy;
pub mod fit;
pub mod implied;
pub mod indices;
pub mod optimizer;
pub mod residuals;
pub mod structure;

pub use discrepancy::fml_discrepancy;
pub use fit::{
    fit_model, fit_model_from, FitOptions, ParameterEstimate, PathEstimate, SemSolution,
};
pub use implied::implied_covariance;
pub use indices::{fit_indices, FitIndices};
pub use residuals::{residual_pockets, ResidualPocket};
pub use structure::{MethodPart, ParamKind, SemStructure, METHOD_LATENT};

use crate::error::Result;
use crate::ingest::MomentSummary;

/// Fits the independence model (Λ = 0, Θ diagonal) on the same moments.
pub fn fit_null_model(moments: &MomentSummary, item_names: &[String]) -> Result<SemSolution> {
    fit_model(
        moments,
        &SemStructure::independence(item_names),
        &FitOptions {
            standard_errors: false,
            ..Default::default()
        },
    )
}
