//! Normal-theory maximum-likelihood discrepancy
//! F = ln|Σ| + tr(SΣ⁻¹) − ln|S| − k.

use nalgebra::DMatrix;

use crate::error::{FamfError, Result};
use crate::linalg;

pub fn fml_discrepancy(s: &DMatrix<f64>, sigma: &DMatrix<f64>) -> Result<f64> {
    if s.shape() != sigma.shape() || s.nrows() != s.ncols() {
        return Err(FamfError::Input(
            "S and Σ must be square and the same size".into(),
        ));
    }
    let chol_s = linalg::cholesky(s).ok_or_else(|| FamfError::NotPositiveDefinite("S".into()))?;
    let log_det_s = linalg::log_det(&chol_s);
    Discrepancy::new(s.clone(), log_det_s)
        .value(sigma)
        .ok_or_else(|| FamfError::NotPositiveDefinite("Σ".into()))
}

/// F_ML against a fixed S, with ln|S| cached.
#[derive(Debug, Clone)]
pub struct Discrepancy {
    pub s: DMatrix<f64>,
    log_det_s: f64,
}

impl Discrepancy {
    pub fn new(s: DMatrix<f64>, log_det_s: f64) -> Self {
        Self { s, log_det_s }
    }

    pub fn from_cov(s: &DMatrix<f64>) -> Result<Self> {
        let chol = linalg::cholesky(s).ok_or_else(|| FamfError::NotPositiveDefinite("S".into()))?;
        Ok(Self::new(s.clone(), linalg::log_det(&chol)))
    }

    /// `None` when Σ is not positive definite.
    pub fn value(&self, sigma: &DMatrix<f64>) -> Option<f64> {
        self.value_and_weight(sigma, false).map(|(f, _)| f)
    }

    /// F and, optionally, G = Σ⁻¹(Σ − S)Σ⁻¹ so that dF = tr(G dΣ).
    pub fn value_and_weight(
        &self,
        sigma: &DMatrix<f64>,
        with_weight: bool,
    ) -> Option<(f64, Option<DMatrix<f64>>)> {
        let chol = linalg::cholesky(sigma)?;
        let k = sigma.nrows() as f64;
        let sigma_inv = chol.inverse();
        let s_sigma_inv = &self.s * &sigma_inv;
        let f = linalg::log_det(&chol) + s_sigma_inv.trace() - self.log_det_s - k;
        if !f.is_finite() {
            return None;
        }
        let weight = with_weight.then(|| {
            let mut g = &sigma_inv - &sigma_inv * &s_sigma_inv;
            linalg::symmetrize(&mut g);
            g
        });
        Some((f, weight))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_at_saturation() {
        let s = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        assert!(fml_discrepancy(&s, &s).unwrap().abs() < 1e-15);
    }

    #[test]
    fn hand_value_and_asymmetry() {
        let i2 = DMatrix::identity(2, 2);
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 1.0]));
        let f = fml_discrepancy(&i2, &d).unwrap();
        assert!((f - (std::f64::consts::LN_2 - 0.5)).abs() < 1e-12);
        let g = fml_discrepancy(&d, &i2).unwrap();
        assert!((g - (0.5f64.ln() + 1.0)).abs() < 1e-12);
        assert!((f - g).abs() > 0.1);
    }

    #[test]
    fn non_pd_rejected() {
        let s = DMatrix::identity(2, 2);
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            fml_discrepancy(&s, &bad),
            Err(FamfError::NotPositiveDefinite(_))
        ));
    }
}
