//! Maximum-likelihood fitting, standard errors, and standardized paths.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{FamfError, Result};
use crate::ingest::MomentSummary;
use crate::linalg;
use crate::sem::discrepancy::Discrepancy;
use crate::sem::implied::{contract, implied_parts, sigma_derivatives};
use crate::sem::indices::{self, FitIndices};
use crate::sem::optimizer::{self, BfgsOptions, Objective, Termination};
use crate::sem::structure::{Block, ParamKind, SemStructure};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitOptions {
    pub max_iter: usize,
    pub grad_tol: f64,
    /// Lower bound applied to uniqueness variances; unconstrained when `None`.
    pub bound_uniqueness: Option<f64>,
    pub standard_errors: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iter: 2000,
            grad_tol: 1e-6,
            bound_uniqueness: None,
            standard_errors: true,
        }
    }
}

/// The ML objective for one structure and one S.
pub struct SemObjective<'a> {
    pub structure: &'a SemStructure,
    pub discrepancy: Discrepancy,
    bound: Option<(Vec<usize>, f64)>,
}

impl<'a> SemObjective<'a> {
    pub fn new(structure: &'a SemStructure, cov: &DMatrix<f64>) -> Result<Self> {
        if cov.nrows() != structure.k() {
            return Err(FamfError::Input(format!(
                "covariance is {}×{} but the structure has {} items",
                cov.nrows(),
                cov.ncols(),
                structure.k()
            )));
        }
        Ok(Self {
            structure,
            discrepancy: Discrepancy::from_cov(cov)?,
            bound: None,
        })
    }

    pub fn with_uniqueness_bound(mut self, bound: Option<f64>) -> Self {
        self.bound = bound.map(|b| (self.structure.params_of(ParamKind::Uniqueness).collect(), b));
        self
    }

    pub fn gradient(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        self.value_gradient(x).map(|(_, g)| g)
    }

    /// Expected-information approximation to the Hessian of F: tr(Σ⁻¹ D_a Σ⁻¹ D_b).
    pub fn information(&self, x: &DVector<f64>) -> Option<DMatrix<f64>> {
        let parts = implied_parts(&self.structure.matrices(x)).ok()?;
        let sigma_inv = linalg::spd_inverse(&parts.sigma)?;
        let ds = sigma_derivatives(self.structure, &parts);
        let w: Vec<DMatrix<f64>> = ds.iter().map(|d| &sigma_inv * d).collect();
        let p = ds.len();
        let mut info = DMatrix::zeros(p, p);
        for a in 0..p {
            for b in a..p {
                // tr(W_a W_b) without forming the product.
                let v = w[a].component_mul(&w[b].transpose()).sum();
                info[(a, b)] = v;
                info[(b, a)] = v;
            }
        }
        Some(info)
    }
}

impl Objective for SemObjective<'_> {
    fn value(&self, x: &DVector<f64>) -> Option<f64> {
        let parts = implied_parts(&self.structure.matrices(x)).ok()?;
        self.discrepancy.value(&parts.sigma)
    }

    fn value_gradient(&self, x: &DVector<f64>) -> Option<(f64, DVector<f64>)> {
        let parts = implied_parts(&self.structure.matrices(x)).ok()?;
        let (f, g) = self.discrepancy.value_and_weight(&parts.sigma, true)?;
        Some((f, contract(self.structure, &parts, &g?)))
    }

    fn initial_inverse_hessian(&self, x: &DVector<f64>) -> Option<DMatrix<f64>> {
        let info = self.information(x)?;
        linalg::spd_inverse(&info)
    }

    fn project(&self, x: &mut DVector<f64>) {
        if let Some((idx, b)) = &self.bound {
            for &i in idx {
                if x[i] < *b {
                    x[i] = *b;
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParameterEstimate {
    pub label: String,
    pub kind: ParamKind,
    pub estimate: f64,
    pub se: f64,
}

/// A standardized structural coefficient or latent correlation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathEstimate {
    pub label: String,
    pub estimate: f64,
    pub se: f64,
}

impl PathEstimate {
    pub fn wald_ci(&self, z: f64) -> (f64, f64) {
        (self.estimate - z * self.se, self.estimate + z * self.se)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SemSolution {
    pub structure: SemStructure,
    #[serde(skip)]
    pub theta: DVector<f64>,
    pub params: Vec<ParameterEstimate>,
    pub f_min: f64,
    pub chi_square: f64,
    pub df: i64,
    pub n: usize,
    pub fit: FitIndices,
    #[serde(skip)]
    pub implied: DMatrix<f64>,
    /// cor(S) − cor(Σ̂), zero diagonal.
    #[serde(skip)]
    pub residual_cor: DMatrix<f64>,
    /// Asymptotic covariance of θ̂: (2/(n−1))·H⁻¹.
    #[serde(skip)]
    pub acov: Option<DMatrix<f64>>,
    pub converged: bool,
    pub iterations: usize,
    pub warnings: Vec<String>,
}

impl SemSolution {
    pub fn estimate(&self, label: &str) -> Option<&ParameterEstimate> {
        self.params.iter().find(|p| p.label == label)
    }

    /// Standardized key paths: structural coefficients when the model has any,
    /// otherwise trait correlations.
    pub fn key_paths(&self) -> Vec<PathEstimate> {
        key_paths(&self.structure, &self.theta, self.acov.as_ref())
    }

    /// Standardized trait loadings, k × n_traits.
    pub fn standardized_loadings(&self) -> DMatrix<f64> {
        let mm = self.structure.matrices(&self.theta);
        let parts = implied_parts(&mm).expect("solution matrices are valid");
        let q = self.structure.n_traits;
        DMatrix::from_fn(self.structure.k(), q, |i, f| {
            mm.lambda[(i, f)] * parts.latent_cov[(f, f)].sqrt() / parts.sigma[(i, i)].sqrt()
        })
    }

    /// Value of the method-loading scale parameter, if the structure has one.
    pub fn method_scale(&self) -> Option<f64> {
        self.params
            .iter()
            .find(|p| p.kind == ParamKind::MethodScale)
            .map(|p| p.estimate.abs())
    }
}

/// Labels for [`key_paths`], in output order.
pub fn key_path_labels(structure: &SemStructure) -> Vec<String> {
    let regressions: Vec<String> = structure
        .params_of(ParamKind::Regression)
        .map(|i| structure.params[i].label.clone())
        .collect();
    if !regressions.is_empty() {
        return regressions;
    }
    let names = &structure.latent_names;
    let q = structure.n_traits;
    let mut out = Vec::new();
    for a in 0..q {
        for b in (a + 1)..q {
            out.push(format!("cor({},{})", names[a], names[b]));
        }
    }
    out
}

fn key_path_values(structure: &SemStructure, theta: &DVector<f64>) -> Option<Vec<f64>> {
    let mm = structure.matrices(theta);
    let parts = implied_parts(&mm).ok()?;
    let c = &parts.latent_cov;
    let regressions: Vec<usize> = structure.params_of(ParamKind::Regression).collect();
    if !regressions.is_empty() {
        return Some(
            regressions
                .iter()
                .map(|&i| {
                    let cell = structure.params[i].cells[0];
                    debug_assert_eq!(cell.block, Block::Beta);
                    let (o, p) = (cell.row, cell.col);
                    mm.beta[(o, p)] * (c[(p, p)] / c[(o, o)]).sqrt()
                })
                .collect(),
        );
    }
    let q = structure.n_traits;
    let mut out = Vec::new();
    for a in 0..q {
        for b in (a + 1)..q {
            out.push(c[(a, b)] / (c[(a, a)] * c[(b, b)]).sqrt());
        }
    }
    Some(out)
}

/// Standardized paths with delta-method standard errors.
pub fn key_paths(
    structure: &SemStructure,
    theta: &DVector<f64>,
    acov: Option<&DMatrix<f64>>,
) -> Vec<PathEstimate> {
    let labels = key_path_labels(structure);
    let Some(values) = key_path_values(structure, theta) else {
        return labels
            .into_iter()
            .map(|label| PathEstimate {
                label,
                estimate: f64::NAN,
                se: f64::NAN,
            })
            .collect();
    };
    let ses: Vec<f64> = match acov {
        Some(acov) => {
            let p = theta.len();
            let mut jac = DMatrix::zeros(values.len(), p);
            for j in 0..p {
                let h = 1e-6 * theta[j].abs().max(1.0);
                let mut up = theta.clone();
                up[j] += h;
                let mut dn = theta.clone();
                dn[j] -= h;
                match (
                    key_path_values(structure, &up),
                    key_path_values(structure, &dn),
                ) {
                    (Some(a), Some(b)) => {
                        for r in 0..values.len() {
                            jac[(r, j)] = (a[r] - b[r]) / (2.0 * h);
                        }
                    }
                    _ => jac.column_mut(j).fill(f64::NAN),
                }
            }
            let v = &jac * acov * jac.transpose();
            (0..values.len())
                .map(|r| v[(r, r)].max(0.0).sqrt())
                .collect()
        }
        None => vec![f64::NAN; values.len()],
    };
    labels
        .into_iter()
        .zip(values)
        .zip(ses)
        .map(|((label, estimate), se)| PathEstimate {
            label,
            estimate,
            se,
        })
        .collect()
}

/// Central-difference Hessian of F from the analytic gradient.
pub fn numerical_hessian(obj: &SemObjective<'_>, x: &DVector<f64>) -> Option<DMatrix<f64>> {
    let p = x.len();
    let mut h = DMatrix::zeros(p, p);
    for j in 0..p {
        let step = 1e-5 * x[j].abs().max(1.0);
        let mut up = x.clone();
        up[j] += step;
        let mut dn = x.clone();
        dn[j] -= step;
        let gu = obj.gradient(&up)?;
        let gd = obj.gradient(&dn)?;
        h.set_column(j, &((gu - gd) / (2.0 * step)));
    }
    linalg::symmetrize(&mut h);
    Some(h)
}

/// Fits `structure` to the sample moments by minimizing F_ML.
pub fn fit_model(
    moments: &MomentSummary,
    structure: &SemStructure,
    options: &FitOptions,
) -> Result<SemSolution> {
    fit_model_from(moments, structure, options, None)
}

/// [`fit_model`] with explicit start values (e.g. a full-sample solution when bootstrapping).
pub fn fit_model_from(
    moments: &MomentSummary,
    structure: &SemStructure,
    options: &FitOptions,
    start: Option<&DVector<f64>>,
) -> Result<SemSolution> {
    let df = structure.df();
    if df < 0 {
        return Err(FamfError::Identification(format!(
            "{} free parameters for {} distinct moments (df = {df})",
            structure.n_free(),
            structure.k() * (structure.k() + 1) / 2
        )));
    }
    if moments.n < 2 {
        return Err(FamfError::Input("need n ≥ 2".into()));
    }
    let obj =
        SemObjective::new(structure, &moments.cov)?.with_uniqueness_bound(options.bound_uniqueness);
    let x0 = match start {
        Some(x) if x.len() == structure.n_free() && obj.value(x).is_some() => x.clone(),
        _ => structure.start_values(&moments.cov),
    };
    let x0 = feasible_start(&obj, x0).ok_or_else(|| {
        FamfError::NotPositiveDefinite("implied covariance at start values".into())
    })?;
    let bfgs = BfgsOptions {
        max_iter: options.max_iter,
        grad_tol: options.grad_tol,
        ..Default::default()
    };
    let result = optimizer::minimize(&obj, x0, &bfgs).ok_or_else(|| {
        FamfError::NotPositiveDefinite("implied covariance at start values".into())
    })?;
    let mut warnings = Vec::new();
    match result.termination {
        Termination::Converged => {}
        Termination::MaxIterations => warnings.push(format!(
            "iteration limit {} reached (max |gradient| = {:.2e})",
            options.max_iter,
            result.gradient.amax()
        )),
        Termination::LineSearchFailed { infeasible: true } => {
            return Err(FamfError::NonConvergence(
                "implied covariance not positive definite and step halving exhausted".into(),
            ))
        }
        Termination::LineSearchFailed { infeasible: false } => warnings.push(format!(
            "line search failed to decrease F (max |gradient| = {:.2e})",
            result.gradient.amax()
        )),
    }
    let converged = result.converged();
    finish(
        moments,
        structure,
        &obj,
        result.x,
        result.value,
        result.iterations,
        converged,
        warnings,
        options,
    )
}

fn feasible_start(obj: &SemObjective<'_>, mut x: DVector<f64>) -> Option<DVector<f64>> {
    for _ in 0..20 {
        if obj.value(&x).is_some() {
            return Some(x);
        }
        // Inflate uniquenesses until Σ is PD.
        for i in obj.structure.params_of(ParamKind::Uniqueness) {
            x[i] *= 2.0;
        }
    }
    None
}

#[allow(clippy::too_many_arguments)]
fn finish(
    moments: &MomentSummary,
    structure: &SemStructure,
    obj: &SemObjective<'_>,
    theta: DVector<f64>,
    f_min: f64,
    iterations: usize,
    converged: bool,
    mut warnings: Vec<String>,
    options: &FitOptions,
) -> Result<SemSolution> {
    let n = moments.n;
    let implied = implied_parts(&structure.matrices(&theta))?.sigma;
    let mut residual_cor = linalg::cov_to_cor(&moments.cov) - linalg::cov_to_cor(&implied);
    linalg::symmetrize(&mut residual_cor);
    residual_cor.fill_diagonal(0.0);

    for i in structure.params_of(ParamKind::Uniqueness) {
        if theta[i] < 0.0 {
            warnings.push(format!(
                "Heywood case: {} = {:.4} < 0",
                structure.params[i].label, theta[i]
            ));
        }
    }

    let acov = if options.standard_errors {
        match numerical_hessian(obj, &theta).and_then(|h| linalg::spd_inverse(&h)) {
            Some(h_inv) => Some(h_inv * (2.0 / (n as f64 - 1.0))),
            None => {
                warnings.push("Hessian not positive definite; standard errors unavailable".into());
                None
            }
        }
    } else {
        None
    };
    let params = structure
        .params
        .iter()
        .enumerate()
        .map(|(i, p)| ParameterEstimate {
            label: p.label.clone(),
            kind: p.kind,
            estimate: theta[i],
            se: acov
                .as_ref()
                .map_or(f64::NAN, |a| a[(i, i)].max(0.0).sqrt()),
        })
        .collect();

    let f_min = f_min.max(0.0);
    let chi_square = (n as f64 - 1.0) * f_min;
    let df = structure.df();
    let (null_chi, null_df) = indices::independence_chi_square(moments);
    let fit = indices::compute(chi_square, df, null_chi, null_df, n, &residual_cor)?;

    Ok(SemSolution {
        structure: structure.clone(),
        theta,
        params,
        f_min,
        chi_square,
        df,
        n,
        fit,
        implied,
        residual_cor,
        acov,
        converged,
        iterations,
        warnings,
    })
}
