//! Σ(θ) = Λ(I−B)⁻¹Ψ(I−B)⁻ᵀΛᵀ + Θ and its first derivatives.

use nalgebra::{DMatrix, DVector};

use crate::error::{FamfError, Result};
use crate::sem::structure::{Block, ModelMatrices, SemStructure};

/// Intermediate products reused by the gradient and the information matrix.
#[derive(Debug, Clone)]
pub struct ImpliedParts {
    pub sigma: DMatrix<f64>,
    /// (I−B)⁻¹
    pub a: DMatrix<f64>,
    /// Latent covariance AΨAᵀ.
    pub latent_cov: DMatrix<f64>,
    /// ΛA
    pub la: DMatrix<f64>,
    /// Λ·latent_cov
    pub lc: DMatrix<f64>,
}

pub fn implied_parts(mm: &ModelMatrices) -> Result<ImpliedParts> {
    let m = mm.beta.nrows();
    let a = (DMatrix::identity(m, m) - &mm.beta)
        .try_inverse()
        .ok_or_else(|| FamfError::Singular("I − B is not invertible".into()))?;
    let latent_cov = &a * &mm.psi * a.transpose();
    let la = &mm.lambda * &a;
    let lc = &mm.lambda * &latent_cov;
    let mut sigma = &lc * mm.lambda.transpose() + &mm.theta;
    crate::linalg::symmetrize(&mut sigma);
    Ok(ImpliedParts {
        sigma,
        a,
        latent_cov,
        la,
        lc,
    })
}

/// Model-implied covariance of the items.
pub fn implied_covariance(theta: &DVector<f64>, structure: &SemStructure) -> Result<DMatrix<f64>> {
    Ok(implied_parts(&structure.matrices(theta))?.sigma)
}

/// ∂Σ/∂θ_p for every free parameter, as dense k×k matrices.
pub fn sigma_derivatives(structure: &SemStructure, parts: &ImpliedParts) -> Vec<DMatrix<f64>> {
    let k = structure.k();
    structure
        .params
        .iter()
        .map(|p| {
            let mut d = DMatrix::zeros(k, k);
            for c in &p.cells {
                match c.block {
                    Block::Lambda => {
                        let col = parts.lc.column(c.col);
                        for j in 0..k {
                            d[(c.row, j)] += c.coef * col[j];
                            d[(j, c.row)] += c.coef * col[j];
                        }
                    }
                    Block::Theta => d[(c.row, c.col)] += c.coef,
                    Block::Psi => {
                        let u = parts.la.column(c.row);
                        let v = parts.la.column(c.col);
                        d += c.coef * (u * v.transpose());
                    }
                    Block::Beta => {
                        let u = parts.la.column(c.row);
                        let v = parts.lc.column(c.col);
                        let outer = u * v.transpose();
                        d += c.coef * (&outer + outer.transpose());
                    }
                }
            }
            d
        })
        .collect()
}

/// Contracts a symmetric k×k weight matrix `g` against every ∂Σ/∂θ_p: Σ_ij g_ij ∂Σ_ij/∂θ_p.
pub fn contract(structure: &SemStructure, parts: &ImpliedParts, g: &DMatrix<f64>) -> DVector<f64> {
    let glc = g * &parts.lc;
    let la_g = parts.la.transpose() * g;
    let la_g_la = &la_g * &parts.la;
    let la_g_lc = &la_g * &parts.lc;
    DVector::from_iterator(
        structure.params.len(),
        structure.params.iter().map(|p| {
            p.cells
                .iter()
                .map(|c| {
                    c.coef
                        * match c.block {
                            Block::Lambda => 2.0 * glc[(c.row, c.col)],
                            Block::Theta => g[(c.row, c.col)],
                            Block::Psi => la_g_la[(c.row, c.col)],
                            Block::Beta => 2.0 * la_g_lc[(c.row, c.col)],
                        }
                })
                .sum::<f64>()
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::ModelSpec;

    fn one_factor() -> SemStructure {
        let spec: ModelSpec =
            serde_json::from_str(r#"{"traits": {"F": ["y1","y2","y3"]}}"#).unwrap();
        SemStructure::from_model(&spec, &["y1", "y2", "y3"].map(String::from)).unwrap()
    }

    #[test]
    fn hand_derived_one_factor() {
        let s = one_factor();
        let theta = DVector::from_vec(vec![0.6, 0.7, 0.8, 0.64, 0.51, 0.36]);
        let sigma = implied_covariance(&theta, &s).unwrap();
        for i in 0..3 {
            assert!((sigma[(i, i)] - 1.0).abs() < 1e-15);
        }
        assert_eq!(sigma[(0, 1)], 0.6 * 0.7);
        assert_eq!(sigma[(0, 2)], 0.6 * 0.8);
        assert_eq!(sigma[(1, 2)], 0.7 * 0.8);
    }

    #[test]
    fn zero_loadings_give_theta() {
        let s = one_factor();
        let theta = DVector::from_vec(vec![0.0, 0.0, 0.0, 0.3, 0.4, 0.5]);
        let sigma = implied_covariance(&theta, &s).unwrap();
        assert_eq!(
            sigma,
            DMatrix::from_diagonal(&DVector::from_vec(vec![0.3, 0.4, 0.5]))
        );
    }

    #[test]
    fn method_only_is_ww_plus_identity() {
        let s = SemStructure::independence(&["a", "b"].map(String::from))
            .with_fixed_method(&[1.0, 1.0])
            .unwrap();
        let sigma = implied_covariance(&DVector::from_vec(vec![1.0, 1.0]), &s).unwrap();
        assert_eq!(sigma, DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]));
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let spec: ModelSpec = serde_json::from_str(
            r#"{"traits": {"A": ["a1","a2","a3"], "B": ["b1","b2","b3"]},
                "regressions": [{"outcome": "B", "predictors": ["A"]}],
                "residual_covariances": [["a1","b1"]]}"#,
        )
        .unwrap();
        let items = ["a1", "a2", "a3", "b1", "b2", "b3"].map(String::from);
        let s = SemStructure::from_model(&spec, &items)
            .unwrap()
            .with_scaled_method(&[1.0, -0.5, 0.2, 0.3, -1.0, 0.7], "M")
            .unwrap();
        let theta = DVector::from_fn(s.n_free(), |i, _| 0.3 + 0.05 * i as f64);
        let parts = implied_parts(&s.matrices(&theta)).unwrap();
        let ds = sigma_derivatives(&s, &parts);
        for p in 0..s.n_free() {
            let h = 1e-6;
            let mut up = theta.clone();
            up[p] += h;
            let mut dn = theta.clone();
            dn[p] -= h;
            let fd = (implied_covariance(&up, &s).unwrap() - implied_covariance(&dn, &s).unwrap())
                / (2.0 * h);
            assert!((fd - &ds[p]).amax() < 1e-8, "param {}", s.params[p].label);
        }
        // contract() agrees with the dense derivatives.
        let g = DMatrix::from_fn(6, 6, |i, j| ((i + 1) * (j + 1)) as f64 / 10.0);
        let c = contract(&s, &parts, &g);
        for p in 0..s.n_free() {
            let dense: f64 = g.component_mul(&ds[p]).sum();
            assert!((dense - c[p]).abs() < 1e-10);
        }
    }
}
