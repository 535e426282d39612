//! Calibration of fixed method loadings from the residual correlation pattern.
//!
//! m_i = mean |r_res(i, l)| over l ≠ i, ridge-regressed on the encoded
//! metadata Z; fitted values Zγ̂ are centered, scaled to Σw² = k, and oriented.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{FamfError, Result};
use crate::features::FeatureMatrix;
use crate::linalg;

pub const DEFAULT_GRID: [f64; 5] = [0.0, 0.5, 1.0, 2.0, 5.0];
pub const DEFAULT_BOOTSTRAP: usize = 2000;

/// Item residual signal. With `cross_scale_only`, averages only over items on other scales.
pub fn residual_signal(
    residual_cor: &DMatrix<f64>,
    scales: &[&str],
    cross_scale_only: bool,
) -> Result<DVector<f64>> {
    let k = residual_cor.nrows();
    if residual_cor.ncols() != k || scales.len() != k {
        return Err(FamfError::Input(format!(
            "residual matrix is {}×{} with {} scale labels",
            k,
            residual_cor.ncols(),
            scales.len()
        )));
    }
    if k < 2 {
        return Err(FamfError::Input("need at least two items".into()));
    }
    let mut m = DVector::zeros(k);
    for i in 0..k {
        let mut sum = 0.0;
        let mut count = 0usize;
        for l in 0..k {
            if l == i || (cross_scale_only && scales[l] == scales[i]) {
                continue;
            }
            sum += residual_cor[(i, l)].abs();
            count += 1;
        }
        if count == 0 {
            return Err(FamfError::NoCrossScalePairs(format!(
                "item {} has no partner on another scale",
                i + 1
            )));
        }
        m[i] = sum / count as f64;
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RidgeFit {
    pub gamma: DVector<f64>,
    pub fitted: DVector<f64>,
    /// Pearson r(m, m̂); 0 when m̂ is constant.
    pub r: f64,
    /// r².
    pub r2: f64,
    /// 1 − SSE/SST, which can be negative under shrinkage.
    pub explained: f64,
}

fn solve_ridge(z: &DMatrix<f64>, m: &DVector<f64>, lambda: f64) -> Result<DVector<f64>> {
    let p = z.ncols();
    let a = z.transpose() * z + DMatrix::identity(p, p) * lambda;
    let eig = SymmetricEigen::new(a.clone());
    let max = eig.eigenvalues.amax();
    let min = eig.eigenvalues.min();
    if !(min > 1e-10 * max.max(1e-300)) {
        return Err(FamfError::Singular(format!(
            "ZᵀZ + λI is singular at λ = {lambda}; use λ > 0"
        )));
    }
    let rhs = z.transpose() * m;
    linalg::cholesky(&a).map(|c| c.solve(&rhs)).ok_or_else(|| {
        FamfError::Singular(format!("ZᵀZ + λI is singular at λ = {lambda}; use λ > 0"))
    })
}

/// Closed-form ridge γ̂ = (ZᵀZ + λI)⁻¹Zᵀm and fit diagnostics.
pub fn ridge_fit(z: &DMatrix<f64>, m: &DVector<f64>, lambda: f64) -> Result<RidgeFit> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(FamfError::Input(format!(
            "λ must be finite and ≥ 0, got {lambda}"
        )));
    }
    if z.ncols() == 0 {
        return Err(FamfError::Input("feature matrix has no columns".into()));
    }
    if z.nrows() != m.len() {
        return Err(FamfError::Input(format!(
            "Z has {} rows but m has {} entries",
            z.nrows(),
            m.len()
        )));
    }
    let gamma = solve_ridge(z, m, lambda)?;
    let fitted = z * &gamma;
    let r = linalg::pearson(m, &fitted).unwrap_or(0.0);
    let mean = m.mean();
    let sst: f64 = m.iter().map(|v| (v - mean).powi(2)).sum();
    // m̂ has mean zero (Z centered), so compare against m shifted to its mean.
    let sse_centered: f64 = m
        .iter()
        .zip(fitted.iter())
        .map(|(a, b)| (a - mean - b).powi(2))
        .sum();
    let explained = if sst > 0.0 {
        1.0 - sse_centered / sst
    } else {
        0.0
    };
    Ok(RidgeFit {
        gamma,
        fitted,
        r,
        r2: r * r,
        explained,
    })
}

/// How the arbitrary sign of the method factor is fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// corr(w, m) ≥ 0.
    #[default]
    Signal,
    /// γ of the feature at this column index is made positive.
    Feature(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FinalWeights {
    pub weights: DVector<f64>,
    /// γ after orientation (negated when `flipped`).
    pub gamma: DVector<f64>,
    pub flipped: bool,
}

/// Centers Zγ̂, scales to Σw² = k, and orients the sign.
pub fn finalize_weights(
    z: &DMatrix<f64>,
    gamma: &DVector<f64>,
    m: &DVector<f64>,
    orientation: Orientation,
) -> Result<FinalWeights> {
    let k = z.nrows();
    if k < 2 {
        return Err(FamfError::Input("need at least two items".into()));
    }
    if gamma.iter().any(|g| !g.is_finite()) {
        return Err(FamfError::Input("γ̂ is not finite".into()));
    }
    let raw = z * gamma;
    let mean = raw.mean();
    let centered = raw.map(|v| v - mean);
    let ss = centered.norm_squared();
    let spread = raw.amax().max(1e-300);
    if ss <= (1e-12 * spread).powi(2) * k as f64 || ss == 0.0 {
        return Err(FamfError::DegenerateWeights(
            "raw weights are equal across items".into(),
        ));
    }
    let mut weights = centered * (k as f64 / ss).sqrt();
    // Exact centering after scaling.
    let drift = weights.mean();
    weights.iter_mut().for_each(|w| *w -= drift);
    let flipped = match orientation {
        Orientation::Signal => {
            let r = linalg::pearson(&weights, m).ok_or_else(|| {
                FamfError::DegenerateWeights(
                    "residual signal has zero variance; orientation undefined".into(),
                )
            })?;
            r < 0.0
        }
        Orientation::Feature(c) => {
            if c >= gamma.len() {
                return Err(FamfError::Input(format!(
                    "orientation feature index {c} out of range"
                )));
            }
            gamma[c] < 0.0
        }
    };
    let (weights, gamma) = if flipped {
        (-weights, -gamma.clone())
    } else {
        (weights, gamma.clone())
    };
    Ok(FinalWeights {
        weights,
        gamma,
        flipped,
    })
}

/// Thresholds for the λ plateau rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlateauRule {
    /// Allowed |ΔR²| as a fraction of max(R²(first feasible λ), 0.01).
    pub r2_relative: f64,
    /// Allowed max_i |Δw_i| between neighbouring grid points.
    pub max_weight_change: f64,
}

impl Default for PlateauRule {
    fn default() -> Self {
        Self {
            r2_relative: 0.02,
            max_weight_change: 0.05,
        }
    }
}

/// First index j ≥ 1 at which both R² and the weight profile have stopped moving.
pub fn plateau_index(r2: &[f64], weights: &[&DVector<f64>], rule: &PlateauRule) -> Option<usize> {
    let first = *r2.first()?;
    let tol = rule.r2_relative * first.max(0.01);
    (1..r2.len()).find(|&j| {
        let dw = (weights[j] - weights[j - 1]).amax();
        (r2[j] - r2[j - 1]).abs() < tol && dw < rule.max_weight_change
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SweepStatus {
    Ok {
        r2: f64,
        r: f64,
        explained: f64,
        max_weight: f64,
        #[serde(skip)]
        gamma: DVector<f64>,
        #[serde(skip)]
        weights: DVector<f64>,
    },
    Infeasible {
        reason: String,
    },
    Degenerate {
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub lambda: f64,
    #[serde(flatten)]
    pub status: SweepStatus,
}

impl SweepPoint {
    pub fn weights(&self) -> Option<&DVector<f64>> {
        match &self.status {
            SweepStatus::Ok { weights, .. } => Some(weights),
            _ => None,
        }
    }

    pub fn r2(&self) -> Option<f64> {
        match &self.status {
            SweepStatus::Ok { r2, .. } => Some(*r2),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaSelection {
    pub lambda: f64,
    pub sweep: Vec<SweepPoint>,
    pub warnings: Vec<String>,
}

fn sweep_point(
    z: &DMatrix<f64>,
    m: &DVector<f64>,
    lambda: f64,
    orientation: Orientation,
) -> SweepPoint {
    let status = match ridge_fit(z, m, lambda) {
        Err(e) => SweepStatus::Infeasible {
            reason: e.to_string(),
        },
        Ok(fit) => match finalize_weights(z, &fit.gamma, m, orientation) {
            Err(e) => SweepStatus::Degenerate {
                reason: e.to_string(),
            },
            Ok(fw) => SweepStatus::Ok {
                r2: fit.r2,
                r: fit.r,
                explained: fit.explained,
                max_weight: fw.weights.amax(),
                gamma: fw.gamma,
                weights: fw.weights,
            },
        },
    };
    SweepPoint { lambda, status }
}

/// Evaluates the grid and picks the first λ where R² and w have plateaued.
pub fn select_lambda(
    z: &DMatrix<f64>,
    m: &DVector<f64>,
    grid: &[f64],
    rule: &PlateauRule,
    orientation: Orientation,
) -> Result<LambdaSelection> {
    if grid.len() < 2 {
        return Err(FamfError::Input("λ grid needs at least two values".into()));
    }
    if grid.iter().any(|l| !(*l >= 0.0)) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(FamfError::Input(
            "λ grid must be ascending and non-negative".into(),
        ));
    }
    let sweep: Vec<SweepPoint> = grid
        .iter()
        .map(|&l| sweep_point(z, m, l, orientation))
        .collect();
    let mut warnings = Vec::new();
    let feasible: Vec<&SweepPoint> = sweep.iter().filter(|p| p.weights().is_some()).collect();
    if feasible.is_empty() {
        let reason = sweep
            .iter()
            .find_map(|p| match &p.status {
                SweepStatus::Degenerate { reason } => Some(reason.clone()),
                _ => None,
            })
            .unwrap_or_else(|| "no grid point is feasible".into());
        return Err(FamfError::DegenerateWeights(reason));
    }
    if feasible[0].lambda != grid[0] {
        warnings.push(format!(
            "sweep starts at first feasible λ = {}",
            feasible[0].lambda
        ));
    }
    let r2: Vec<f64> = feasible.iter().map(|p| p.r2().unwrap()).collect();
    let ws: Vec<&DVector<f64>> = feasible.iter().map(|p| p.weights().unwrap()).collect();
    let lambda = match plateau_index(&r2, &ws, rule) {
        Some(j) => feasible[j].lambda,
        None => {
            warnings.push("no plateau on the λ grid; using λ = 1".into());
            1.0
        }
    };
    Ok(LambdaSelection {
        lambda,
        sweep,
        warnings,
    })
}

/// Percentile intervals for γ from resampling items with replacement.
///
/// Replicate `b` draws from its own ChaCha stream, so results do not depend
/// on scheduling.
pub fn bootstrap_gamma(
    z: &DMatrix<f64>,
    m: &DVector<f64>,
    lambda: f64,
    replicates: usize,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    if replicates < 100 {
        return Err(FamfError::Input(format!(
            "bootstrap needs at least 100 replicates, got {replicates}"
        )));
    }
    let k = z.nrows();
    let p = z.ncols();
    let draws: Vec<Result<DVector<f64>>> = (0..replicates)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let mut last = None;
            for _ in 0..=10 {
                let idx: Vec<usize> = (0..k).map(|_| rng.random_range(0..k)).collect();
                let mut zb = DMatrix::from_fn(k, p, |r, c| z[(idx[r], c)]);
                for mut col in zb.column_iter_mut() {
                    let mean = col.mean();
                    col.iter_mut().for_each(|v| *v -= mean);
                }
                let mb = DVector::from_fn(k, |r, _| m[idx[r]]);
                match solve_ridge(&zb, &mb, lambda) {
                    Ok(g) => return Ok(g),
                    Err(e) => last = Some(e),
                }
            }
            Err(last.expect("at least one attempt"))
        })
        .collect();
    let draws: Vec<DVector<f64>> = draws.into_iter().collect::<Result<_>>()?;
    Ok((0..p)
        .map(|c| {
            let vals: Vec<f64> = draws.iter().map(|g| g[c]).collect();
            (
                linalg::quantile(&vals, 0.025),
                linalg::quantile(&vals, 0.975),
            )
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationOptions {
    pub grid: Vec<f64>,
    /// Fixed λ; skips selection (the sweep is still traced).
    pub lambda: Option<f64>,
    pub cross_scale_only: bool,
    /// Item-bootstrap replicates for γ intervals; `None` disables.
    pub bootstrap: Option<usize>,
    pub seed: u64,
    pub orient_feature: Option<String>,
    pub rule: PlateauRule,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            grid: DEFAULT_GRID.to_vec(),
            lambda: None,
            cross_scale_only: false,
            bootstrap: Some(DEFAULT_BOOTSTRAP),
            seed: 42,
            orient_feature: None,
            rule: PlateauRule::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationResult {
    pub item_names: Vec<String>,
    pub feature_names: Vec<String>,
    pub m: DVector<f64>,
    pub gamma: DVector<f64>,
    pub gamma_ci: Option<Vec<(f64, f64)>>,
    pub m_hat: DVector<f64>,
    pub r: f64,
    pub r2: f64,
    pub weights: DVector<f64>,
    pub lambda: f64,
    pub sweep: Vec<SweepPoint>,
    pub cross_scale_only: bool,
    pub flipped: bool,
    pub warnings: Vec<String>,
}

/// Full calibration: residual signal → λ selection → ridge → final weights → γ intervals.
pub fn calibrate(
    residual_cor: &DMatrix<f64>,
    item_names: &[String],
    scales: &[&str],
    features: &FeatureMatrix,
    options: &CalibrationOptions,
) -> Result<CalibrationResult> {
    let m = residual_signal(residual_cor, scales, options.cross_scale_only)?;
    calibrate_signal(m, item_names, features, options)
}

/// Calibration from an already computed residual signal.
pub fn calibrate_signal(
    m: DVector<f64>,
    item_names: &[String],
    features: &FeatureMatrix,
    options: &CalibrationOptions,
) -> Result<CalibrationResult> {
    let z = &features.z;
    let k = z.nrows();
    let p = z.ncols();
    let orientation = match &options.orient_feature {
        None => Orientation::Signal,
        Some(name) => Orientation::Feature(features.column_index(name).ok_or_else(|| {
            FamfError::Input(format!("orientation feature {name:?} is not in Z"))
        })?),
    };
    let mut warnings = features.warnings.clone();
    let selection = select_lambda(z, &m, &options.grid, &options.rule, orientation);
    let (lambda, sweep) = match (options.lambda, selection) {
        (Some(l), Ok(sel)) => (l, sel.sweep),
        (Some(l), Err(_)) => (
            l,
            options
                .grid
                .iter()
                .map(|&g| sweep_point(z, &m, g, orientation))
                .collect(),
        ),
        (None, Ok(sel)) => {
            warnings.extend(sel.warnings);
            (sel.lambda, sel.sweep)
        }
        (None, Err(e)) => return Err(e),
    };
    let fit = ridge_fit(z, &m, lambda)?;
    let fw = finalize_weights(z, &fit.gamma, &m, orientation)?;
    let gamma_ci = match options.bootstrap {
        Some(b) => {
            if k < p + 2 {
                warnings.push(format!("item bootstrap with k = {k} < p + 2 = {}", p + 2));
            }
            let ci = bootstrap_gamma(z, &m, lambda, b, options.seed)?;
            Some(if fw.flipped {
                ci.into_iter().map(|(lo, hi)| (-hi, -lo)).collect()
            } else {
                ci
            })
        }
        None => None,
    };
    let m_hat = if fw.flipped {
        -fit.fitted.clone()
    } else {
        fit.fitted.clone()
    };
    Ok(CalibrationResult {
        item_names: item_names.to_vec(),
        feature_names: features.feature_names.clone(),
        m,
        gamma: fw.gamma,
        gamma_ci,
        m_hat,
        r: fit.r,
        r2: fit.r2,
        weights: fw.weights,
        lambda,
        sweep,
        cross_scale_only: options.cross_scale_only,
        flipped: fw.flipped,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r3() -> DMatrix<f64> {
        DMatrix::from_row_slice(3, 3, &[0.0, 0.1, -0.3, 0.1, 0.0, 0.2, -0.3, 0.2, 0.0])
    }

    #[test]
    fn signal_hand_values() {
        let m = residual_signal(&r3(), &["A", "A", "A"], false).unwrap();
        let want = [0.2, 0.15, 0.25];
        for (g, w) in m.iter().zip(want) {
            assert!((g - w).abs() < 1e-12);
        }
        let zero = residual_signal(&DMatrix::zeros(3, 3), &["A", "A", "A"], false).unwrap();
        assert_eq!(zero, DVector::zeros(3));
    }

    #[test]
    fn cross_scale_signal() {
        let r = DMatrix::from_fn(4, 4, |i, j| if i == j { 0.0 } else { 0.1 * (i + j) as f64 });
        let m = residual_signal(&r, &["A", "A", "B", "B"], true).unwrap();
        assert!((m[0] - (r[(0, 2)] + r[(0, 3)]) / 2.0).abs() < 1e-15);
        let err = residual_signal(&r, &["A"; 4], true).unwrap_err();
        assert!(matches!(err, FamfError::NoCrossScalePairs(_)));
    }

    #[test]
    fn ridge_one_by_one() {
        let z = DMatrix::from_row_slice(2, 1, &[1.0, -1.0]);
        let m = DVector::from_vec(vec![0.4, 0.2]);
        let fit = ridge_fit(&z, &m, 0.0).unwrap();
        assert!((fit.gamma[0] - 0.1).abs() < 1e-15);
        assert!((fit.fitted[0] - 0.1).abs() < 1e-15 && (fit.fitted[1] + 0.1).abs() < 1e-15);
        let fit2 = ridge_fit(&z, &m, 2.0).unwrap();
        assert!((fit2.gamma[0] - 0.05).abs() < 1e-15);
        let big = ridge_fit(&z, &m, 1e12).unwrap();
        assert!(big.gamma[0].abs() < 1e-12);
    }

    #[test]
    fn collinear_z_needs_penalty() {
        let z = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 0.0, 0.0, -1.0, -2.0]);
        let m = DVector::from_vec(vec![0.3, 0.1, 0.2]);
        assert!(matches!(
            ridge_fit(&z, &m, 0.0),
            Err(FamfError::Singular(_))
        ));
        assert!(ridge_fit(&z, &m, 0.5).is_ok());
    }

    #[test]
    fn weights_hand_values() {
        let z = DMatrix::from_row_slice(2, 1, &[0.3, 0.1]);
        let m = DVector::from_vec(vec![0.5, 0.1]);
        let fw =
            finalize_weights(&z, &DVector::from_element(1, 1.0), &m, Orientation::Signal).unwrap();
        assert!((fw.weights[0] - 1.0).abs() < 1e-12 && (fw.weights[1] + 1.0).abs() < 1e-12);
        assert!(!fw.flipped);
    }

    #[test]
    fn equal_raw_weights_are_degenerate() {
        let z = DMatrix::from_row_slice(2, 1, &[0.7, 0.7]);
        let m = DVector::from_vec(vec![0.5, 0.1]);
        let err = finalize_weights(&z, &DVector::from_element(1, 1.0), &m, Orientation::Signal)
            .unwrap_err();
        assert!(matches!(err, FamfError::DegenerateWeights(_)));
    }

    #[test]
    fn negative_correlation_flips() {
        let z = DMatrix::from_row_slice(4, 1, &[1.0, 0.5, -0.5, -1.0]);
        let m = DVector::from_vec(vec![0.0, 0.2, 0.3, 0.35]);
        let before = linalg::pearson(&(&z * DVector::from_element(1, 1.0)), &m).unwrap();
        assert!(before < 0.0);
        let fw =
            finalize_weights(&z, &DVector::from_element(1, 1.0), &m, Orientation::Signal).unwrap();
        assert!(fw.flipped);
        assert_eq!(fw.gamma[0], -1.0);
        let after = linalg::pearson(&fw.weights, &m).unwrap();
        assert!((after + before).abs() < 1e-12);
    }

    #[test]
    fn feature_orientation_override() {
        let z = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, -1.0, -1.0]);
        let m = DVector::from_vec(vec![0.1, 0.2, 0.3]);
        let g = DVector::from_vec(vec![-0.5, 0.2]);
        let fw = finalize_weights(&z, &g, &m, Orientation::Feature(0)).unwrap();
        assert!(fw.flipped && fw.gamma[0] > 0.0);
    }

    #[test]
    fn plateau_rule_on_synthetic_trace() {
        let r2 = [0.40, 0.39, 0.388, 0.387];
        let w0 = DVector::from_vec(vec![1.0, -1.0]);
        let w1 = DVector::from_vec(vec![0.9, -0.9]);
        let w2 = DVector::from_vec(vec![0.89, -0.89]);
        let w3 = DVector::from_vec(vec![0.885, -0.885]);
        let idx = plateau_index(&r2, &[&w0, &w1, &w2, &w3], &PlateauRule::default());
        assert_eq!(idx, Some(2));
    }

    #[test]
    fn single_feature_plateaus_immediately() {
        let z = DMatrix::from_row_slice(4, 1, &[-1.5, -0.5, 0.5, 1.5]);
        let m = DVector::from_vec(vec![0.1, 0.3, 0.2, 0.4]);
        let sel = select_lambda(
            &z,
            &m,
            &DEFAULT_GRID,
            &PlateauRule::default(),
            Orientation::Signal,
        )
        .unwrap();
        assert_eq!(sel.lambda, DEFAULT_GRID[1]);
        assert_eq!(sel.sweep.len(), 5);
    }

    #[test]
    fn infeasible_lambda_zero_is_skipped() {
        let z = DMatrix::from_row_slice(4, 2, &[1.0, 2.0, -1.0, -2.0, 0.5, 1.0, -0.5, -1.0]);
        let m = DVector::from_vec(vec![0.3, 0.1, 0.25, 0.12]);
        let sel = select_lambda(
            &z,
            &m,
            &DEFAULT_GRID,
            &PlateauRule::default(),
            Orientation::Signal,
        )
        .unwrap();
        assert!(matches!(
            sel.sweep[0].status,
            SweepStatus::Infeasible { .. }
        ));
        assert!(sel.warnings.iter().any(|w| w.contains("first feasible")));
        assert!(sel.lambda > 0.0);
    }

    #[test]
    fn bootstrap_is_seeded_and_collapses_without_noise() {
        let z = DMatrix::from_fn(30, 2, |r, c| ((r * (c + 3)) % 7) as f64 - 3.0);
        let mut z = z;
        for mut col in z.column_iter_mut() {
            let mean = col.mean();
            col.iter_mut().for_each(|v| *v -= mean);
        }
        let gamma = DVector::from_vec(vec![0.02, -0.01]);
        let m = &z * &gamma;
        let ci = bootstrap_gamma(&z, &m, 0.0, 200, 7).unwrap();
        for (c, (lo, hi)) in ci.iter().enumerate() {
            assert!(hi - lo < 1e-6);
            assert!((lo - gamma[c]).abs() < 1e-6);
        }
        let noisy =
            m.map(|v| v + 0.01) + DVector::from_fn(30, |r, _| 0.003 * ((r * 13) % 5) as f64);
        let a = bootstrap_gamma(&z, &noisy, 0.5, 150, 11).unwrap();
        let b = bootstrap_gamma(&z, &noisy, 0.5, 150, 11).unwrap();
        assert_eq!(a, b);
        assert!(bootstrap_gamma(&z, &noisy, 0.5, 50, 11).is_err());
    }
}
