//! Global fit indices relative to the independence model.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{FamfError, Result};
use crate::ingest::MomentSummary;
use crate::sem::fit::SemSolution;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitIndices {
    pub chi_square: f64,
    pub df: i64,
    pub baseline_chi_square: f64,
    pub baseline_df: i64,
    pub cfi: f64,
    /// NaN when the model has zero degrees of freedom.
    pub tli: f64,
    pub rmsea: f64,
    pub srmr: f64,
}

/// χ² and df of the independence model, whose ML solution is Σ = diag(S).
pub fn independence_chi_square(moments: &MomentSummary) -> (f64, i64) {
    let s = &moments.cov;
    let k = s.nrows();
    let log_det_diag: f64 = (0..k).map(|i| s[(i, i)].ln()).sum();
    let log_det_s = crate::linalg::cholesky(s)
        .map(|c| crate::linalg::log_det(&c))
        .unwrap_or(f64::NAN);
    let f = (log_det_diag - log_det_s).max(0.0);
    ((moments.n as f64 - 1.0) * f, (k * (k - 1) / 2) as i64)
}

/// Root mean square of the strictly lower triangle.
pub fn srmr(residual_cor: &DMatrix<f64>) -> f64 {
    let k = residual_cor.nrows();
    let mut ss = 0.0;
    let mut count = 0usize;
    for i in 0..k {
        for j in 0..i {
            ss += residual_cor[(i, j)].powi(2);
            count += 1;
        }
    }
    if count == 0 {
        0.0
    } else {
        (ss / count as f64).sqrt()
    }
}

pub fn compute(
    chi_m: f64,
    df_m: i64,
    chi_b: f64,
    df_b: i64,
    n: usize,
    residual_cor: &DMatrix<f64>,
) -> Result<FitIndices> {
    if df_b == 0 {
        return Err(FamfError::Input(
            "independence model has zero degrees of freedom".into(),
        ));
    }
    let (dm, db) = (df_m as f64, df_b as f64);
    let excess_m = (chi_m - dm).max(0.0);
    let denom = (chi_b - db).max(chi_m - dm).max(0.0);
    let cfi = if denom > 0.0 {
        1.0 - excess_m / denom
    } else {
        1.0
    };
    let tli = if df_m > 0 {
        (chi_b / db - chi_m / dm) / (chi_b / db - 1.0)
    } else {
        f64::NAN
    };
    let rmsea = if df_m > 0 {
        (excess_m / (dm * (n as f64 - 1.0))).sqrt()
    } else {
        0.0
    };
    Ok(FitIndices {
        chi_square: chi_m,
        df: df_m,
        baseline_chi_square: chi_b,
        baseline_df: df_b,
        cfi,
        tli,
        rmsea,
        srmr: srmr(residual_cor),
    })
}

/// Fit indices of `model` against an explicitly fitted independence solution.
pub fn fit_indices(model: &SemSolution, null: &SemSolution) -> Result<FitIndices> {
    compute(
        model.chi_square,
        model.df,
        null.chi_square,
        null.df,
        model.n,
        &model.residual_cor,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_fit_limit() {
        let r = DMatrix::zeros(3, 3);
        let f = compute(10.0, 10, 500.0, 45, 300, &r).unwrap();
        assert_eq!(f.rmsea, 0.0);
        assert_eq!(f.cfi, 1.0);
    }

    #[test]
    fn null_model_has_zero_cfi() {
        let r = DMatrix::zeros(3, 3);
        let f = compute(500.0, 45, 500.0, 45, 300, &r).unwrap();
        assert_eq!(f.cfi, 0.0);
        assert!(f.tli.abs() < 1e-12);
    }

    #[test]
    fn srmr_hand_value() {
        let r = DMatrix::from_row_slice(3, 3, &[0.0, 0.1, -0.3, 0.1, 0.0, 0.2, -0.3, 0.2, 0.0]);
        let want = ((0.01 + 0.09 + 0.04) / 3.0f64).sqrt();
        assert!((srmr(&r) - want).abs() < 1e-15);
        assert!((want - 0.216).abs() < 5e-4);
    }

    #[test]
    fn zero_baseline_df_is_an_error() {
        assert!(compute(0.0, 0, 0.0, 0, 10, &DMatrix::zeros(1, 1)).is_err());
    }

    #[test]
    fn rmsea_formula() {
        let f = compute(150.0, 50, 2000.0, 66, 401, &DMatrix::zeros(2, 2)).unwrap();
        assert!((f.rmsea - (100.0f64 / (50.0 * 400.0)).sqrt()).abs() < 1e-15);
        let tli = (2000.0 / 66.0 - 3.0) / (2000.0 / 66.0 - 1.0);
        assert!((f.tli - tli).abs() < 1e-15);
    }
}
