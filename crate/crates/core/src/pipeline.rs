//! Baseline → calibration → FAMF refit, comparators, and stability panels.

use std::collections::BTreeSet;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::calibrate::{self, CalibrationOptions, CalibrationResult};
use crate::error::{FamfError, Result};
use crate::features::{self, ExpansionSpec, FeatureMatrix};
use crate::ingest::{self, ItemKey, ModelSpec, MomentSummary, ResponseMatrix, ValidationReport};
use crate::linalg;
use crate::sem::fit::key_path_labels;
use crate::sem::{
    fit_model, fit_model_from, residual_pockets, FitOptions, ParamKind, ResidualPocket,
    SemSolution, SemStructure,
};

/// Label of the shared CLF loading.
pub const CLF_LABEL: &str = "M=~c";
/// Label of the free FAMF scale under [`MethodScale::Free`].
pub const FAMF_SCALE_LABEL: &str = "M=~scale";

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VariantSpec {
    Baseline,
    Famf {
        weights: Vec<f64>,
    },
    Clf,
    /// 0-based item index pairs whose residual covariances are freed.
    Cu {
        pairs: Vec<(usize, usize)>,
    },
    FamfCu {
        weights: Vec<f64>,
        pairs: Vec<(usize, usize)>,
    },
}

impl VariantSpec {
    pub fn name(&self) -> &'static str {
        match self {
            VariantSpec::Baseline => "baseline",
            VariantSpec::Famf { .. } => "famf",
            VariantSpec::Clf => "clf",
            VariantSpec::Cu { .. } => "cu",
            VariantSpec::FamfCu { .. } => "famf_cu",
        }
    }
}

/// How FAMF weights enter the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodScale {
    /// Loadings fixed to w exactly; no extra parameter.
    #[default]
    Fixed,
    /// Loadings s·w with one free scale s.
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct VariantOptions {
    pub fit: FitOptions,
    pub method_scale: MethodScale,
}

pub fn build_structure(
    model: &ModelSpec,
    item_names: &[String],
    variant: &VariantSpec,
    method_scale: MethodScale,
) -> Result<SemStructure> {
    let base = SemStructure::from_model(model, item_names)?;
    let with_pairs = |mut s: SemStructure, pairs: &[(usize, usize)]| -> Result<SemStructure> {
        for &(i, j) in pairs {
            s = s.free_residual_covariance(i, j)?;
        }
        Ok(s)
    };
    let famf = |s: &SemStructure, w: &[f64]| match method_scale {
        MethodScale::Fixed => s.with_fixed_method(w),
        MethodScale::Free => s.with_scaled_method(w, FAMF_SCALE_LABEL),
    };
    match variant {
        VariantSpec::Baseline => Ok(base),
        VariantSpec::Famf { weights } => famf(&base, weights),
        VariantSpec::Clf => base.with_scaled_method(&vec![1.0; item_names.len()], CLF_LABEL),
        VariantSpec::Cu { pairs } => with_pairs(base, pairs),
        VariantSpec::FamfCu { weights, pairs } => famf(&with_pairs(base, pairs)?, weights),
    }
}

/// Fits one model variant on the given moments.
pub fn fit_variant(
    moments: &MomentSummary,
    model: &ModelSpec,
    item_names: &[String],
    variant: &VariantSpec,
    options: &VariantOptions,
) -> Result<SemSolution> {
    let structure = build_structure(model, item_names, variant, options.method_scale)?;
    let mut sol = fit_model(moments, &structure, &options.fit)?;
    orient_method_scale(&mut sol);
    if matches!(variant, VariantSpec::Clf) && sol.method_scale().is_some_and(|c| c < 1e-3) {
        sol.warnings.push("no common variance detected".into());
    }
    Ok(sol)
}

/// The likelihood is symmetric in the sign of a method scale; report it as non-negative.
fn orient_method_scale(sol: &mut SemSolution) {
    let Some(i) = sol.structure.params_of(ParamKind::MethodScale).next() else {
        return;
    };
    if sol.theta[i] >= 0.0 {
        return;
    }
    sol.theta[i] = -sol.theta[i];
    sol.params[i].estimate = sol.theta[i];
    if let Some(acov) = sol.acov.as_mut() {
        let p = acov.nrows();
        for j in 0..p {
            if j != i {
                acov[(i, j)] = -acov[(i, j)];
                acov[(j, i)] = -acov[(j, i)];
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaBetaRow {
    pub path: String,
    pub beta_before: f64,
    pub beta_after: f64,
    pub delta: f64,
    /// Bootstrap percentile interval for Δβ; absent without bootstrap.
    pub ci_lo: Option<f64>,
    pub ci_hi: Option<f64>,
    pub se_before: f64,
    pub se_after: f64,
    pub wald_before: (f64, f64),
    pub wald_after: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaBetaPanel {
    /// "beta" for structural coefficients, "latent correlation" otherwise.
    pub quantity: String,
    pub before: String,
    pub after: String,
    pub rows: Vec<DeltaBetaRow>,
    pub replicates: usize,
    pub failures: usize,
    pub seed: u64,
    /// More than 10% of bootstrap refits failed.
    pub unreliable: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityOptions {
    /// Respondent-bootstrap replicates; `None` gives Wald intervals only.
    pub bootstrap: Option<usize>,
    pub seed: u64,
    pub fit: FitOptions,
}

pub const DEFAULT_STABILITY_BOOTSTRAP: usize = 500;

impl Default for StabilityOptions {
    fn default() -> Self {
        Self {
            bootstrap: Some(DEFAULT_STABILITY_BOOTSTRAP),
            seed: 42,
            fit: FitOptions::default(),
        }
    }
}

fn variant_label(sol: &SemSolution) -> String {
    match &sol.structure.method {
        crate::sem::MethodPart::None => "traits only".into(),
        crate::sem::MethodPart::Fixed { .. } => "fixed method factor".into(),
        crate::sem::MethodPart::Scaled { .. } => "scaled method factor".into(),
    }
}

/// Δβ between two fits of the same data; bootstrap refits both structures per resample.
pub fn effect_stability(
    before: &SemSolution,
    after: &SemSolution,
    data: &ResponseMatrix,
    options: &StabilityOptions,
) -> Result<DeltaBetaPanel> {
    let labels = key_path_labels(&before.structure);
    if labels != key_path_labels(&after.structure) {
        return Err(FamfError::Input(
            "before and after solutions have different structural paths".into(),
        ));
    }
    if data.item_names != before.structure.item_names {
        return Err(FamfError::Input(
            "data columns do not match the fitted items".into(),
        ));
    }
    let quantity = if before
        .structure
        .params_of(ParamKind::Regression)
        .next()
        .is_some()
    {
        "beta"
    } else {
        "latent correlation"
    };
    let kb = before.key_paths();
    let ka = after.key_paths();

    let mut failures = 0;
    let mut replicates = 0;
    let mut intervals: Vec<Option<(f64, f64)>> = vec![None; labels.len()];
    if let Some(b) = options.bootstrap {
        if b == 0 {
            return Err(FamfError::Input(
                "bootstrap needs at least one replicate".into(),
            ));
        }
        replicates = b;
        let fit = FitOptions {
            standard_errors: false,
            ..options.fit
        };
        let draws: Vec<Option<Vec<f64>>> = (0..b)
            .into_par_iter()
            .map(|r| {
                let rows = resample_rows(data.n(), options.seed, r as u64);
                let moments = ingest::sample_moments(&data.select_rows(&rows)).ok()?;
                let refit = |sol: &SemSolution| -> Option<Vec<f64>> {
                    let s =
                        fit_model_from(&moments, &sol.structure, &fit, Some(&sol.theta)).ok()?;
                    s.converged
                        .then(|| s.key_paths().iter().map(|p| p.estimate).collect())
                };
                let bb = refit(before)?;
                let ba = refit(after)?;
                Some(ba.iter().zip(&bb).map(|(a, b)| a - b).collect())
            })
            .collect();
        let ok: Vec<&Vec<f64>> = draws.iter().flatten().collect();
        failures = b - ok.len();
        if !ok.is_empty() {
            for (j, slot) in intervals.iter_mut().enumerate() {
                let vals: Vec<f64> = ok.iter().map(|d| d[j]).collect();
                *slot = Some((
                    linalg::quantile(&vals, 0.025),
                    linalg::quantile(&vals, 0.975),
                ));
            }
        }
    }
    let rows = labels
        .into_iter()
        .enumerate()
        .map(|(j, path)| DeltaBetaRow {
            path,
            beta_before: kb[j].estimate,
            beta_after: ka[j].estimate,
            delta: ka[j].estimate - kb[j].estimate,
            ci_lo: intervals[j].map(|c| c.0),
            ci_hi: intervals[j].map(|c| c.1),
            se_before: kb[j].se,
            se_after: ka[j].se,
            wald_before: kb[j].wald_ci(Z_95),
            wald_after: ka[j].wald_ci(Z_95),
        })
        .collect();
    Ok(DeltaBetaPanel {
        quantity: quantity.into(),
        before: variant_label(before),
        after: variant_label(after),
        rows,
        replicates,
        failures,
        seed: options.seed,
        unreliable: replicates > 0 && failures as f64 > 0.1 * replicates as f64,
    })
}

/// Row indices for respondent-bootstrap replicate `r`, from its own ChaCha stream.
pub fn resample_rows(n: usize, seed: u64, r: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(r);
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

/// One cell of a robustness panel.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustnessCell {
    /// Key paths in the order of [`RobustnessReport::path_labels`].
    pub betas: Option<Vec<f64>>,
    pub weights: Option<Vec<f64>>,
    pub r2: Option<f64>,
    pub lambda: Option<f64>,
    pub method_scale: Option<f64>,
    pub error: Option<String>,
    pub warnings: Vec<String>,
}

impl RobustnessCell {
    fn failed(e: &FamfError) -> Self {
        Self {
            betas: None,
            weights: None,
            r2: None,
            lambda: None,
            method_scale: None,
            error: Some(e.to_string()),
            warnings: Vec::new(),
        }
    }

    fn from_fit(sol: &SemSolution, cal: Option<&CalibrationResult>) -> Self {
        let mut warnings = sol.warnings.clone();
        if !sol.converged {
            warnings.push("did not converge".into());
        }
        Self {
            betas: Some(sol.key_paths().iter().map(|p| p.estimate).collect()),
            weights: cal.map(|c| c.weights.iter().copied().collect()),
            r2: cal.map(|c| c.r2),
            lambda: cal.map(|c| c.lambda),
            method_scale: sol.method_scale(),
            error: None,
            warnings,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaRow {
    pub lambda: f64,
    pub cell: RobustnessCell,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LofoRow {
    pub omitted: String,
    pub cell: RobustnessCell,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CrossScalePanel {
    NotApplicable { reason: String },
    Ran { cell: RobustnessCell },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CuRow {
    pub variant: String,
    pub pairs: Vec<(String, String)>,
    pub cell: RobustnessCell,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustnessReport {
    pub path_labels: Vec<String>,
    pub lambda_profile: Vec<LambdaRow>,
    pub lofo: Vec<LofoRow>,
    pub clf: RobustnessCell,
    pub cross_scale: CrossScalePanel,
    pub cu: Vec<CuRow>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct RobustnessOptions {
    pub calibration: CalibrationOptions,
    pub variant: VariantOptions,
    pub cu_pairs: Vec<(usize, usize)>,
}

/// Base features whose columns (including derived ones) can be left out together.
pub fn lofo_groups(features: &FeatureMatrix) -> Vec<(String, FeatureMatrix)> {
    let bases: Vec<&String> = features
        .feature_names
        .iter()
        .filter(|n| !n.contains(':') && !n.contains('^'))
        .collect();
    bases
        .into_iter()
        .map(|base| {
            let mut reduced = features.clone();
            let involved: Vec<String> = features
                .feature_names
                .iter()
                .filter(|n| {
                    *n == base
                        || n.split(':').any(|part| part == base)
                        || n.split('^').next() == Some(base.as_str()) && n.contains('^')
                })
                .cloned()
                .collect();
            for name in involved {
                reduced = reduced.without(&name).expect("column present");
            }
            (base.clone(), reduced)
        })
        .collect()
}

fn famf_cell(
    moments: &MomentSummary,
    model: &ModelSpec,
    item_names: &[String],
    cal: Result<CalibrationResult>,
    options: &VariantOptions,
) -> RobustnessCell {
    let cal = match cal {
        Ok(c) => c,
        Err(e) => return RobustnessCell::failed(&e),
    };
    let variant = VariantSpec::Famf {
        weights: cal.weights.iter().copied().collect(),
    };
    match fit_variant(moments, model, item_names, &variant, options) {
        Ok(sol) => {
            let mut cell = RobustnessCell::from_fit(&sol, Some(&cal));
            cell.warnings.extend(cal.warnings.iter().cloned());
            cell
        }
        Err(e) => RobustnessCell::failed(&e),
    }
}

fn recalibrate(
    m: &DVector<f64>,
    item_names: &[String],
    features: &FeatureMatrix,
    options: &CalibrationOptions,
) -> Result<CalibrationResult> {
    if features.p() == 0 {
        return Err(FamfError::DegenerateWeights("no features left in Z".into()));
    }
    calibrate::calibrate_signal(m.clone(), item_names, features, options)
}

/// λ profile, leave-one-feature-out, CLF, cross-scale, and correlated-uniqueness refits.
pub fn robustness_suite(
    moments: &MomentSummary,
    model: &ModelSpec,
    key: &ItemKey,
    baseline: &SemSolution,
    features: &FeatureMatrix,
    calibration: &CalibrationResult,
    options: &RobustnessOptions,
) -> Result<RobustnessReport> {
    let item_names = key.names();
    let scales = key.scales();
    let cal_opts = CalibrationOptions {
        bootstrap: None,
        ..options.calibration.clone()
    };
    let m = &calibration.m;

    let lambda_profile: Vec<LambdaRow> = cal_opts
        .grid
        .par_iter()
        .map(|&lambda| {
            let opts = CalibrationOptions {
                lambda: Some(lambda),
                ..cal_opts.clone()
            };
            LambdaRow {
                lambda,
                cell: famf_cell(
                    moments,
                    model,
                    &item_names,
                    recalibrate(m, &item_names, features, &opts),
                    &options.variant,
                ),
            }
        })
        .collect();

    let lofo: Vec<LofoRow> = lofo_groups(features)
        .into_par_iter()
        .map(|(omitted, reduced)| {
            let opts = CalibrationOptions {
                orient_feature: cal_opts
                    .orient_feature
                    .clone()
                    .filter(|f| reduced.column_index(f).is_some()),
                ..cal_opts.clone()
            };
            LofoRow {
                cell: famf_cell(
                    moments,
                    model,
                    &item_names,
                    recalibrate(m, &item_names, &reduced, &opts),
                    &options.variant,
                ),
                omitted,
            }
        })
        .collect();

    let clf = match fit_variant(
        moments,
        model,
        &item_names,
        &VariantSpec::Clf,
        &options.variant,
    ) {
        Ok(sol) => RobustnessCell::from_fit(&sol, None),
        Err(e) => RobustnessCell::failed(&e),
    };

    let distinct: BTreeSet<&str> = scales.iter().copied().collect();
    let cross_scale = if distinct.len() < 2 {
        CrossScalePanel::NotApplicable {
            reason: "only one scale in the item key".into(),
        }
    } else {
        let opts = CalibrationOptions {
            cross_scale_only: true,
            ..cal_opts.clone()
        };
        let cal = calibrate::calibrate(
            &baseline.residual_cor,
            &item_names,
            &scales,
            features,
            &opts,
        );
        CrossScalePanel::Ran {
            cell: famf_cell(moments, model, &item_names, cal, &options.variant),
        }
    };

    let mut cu = Vec::new();
    if !options.cu_pairs.is_empty() {
        let named: Vec<(String, String)> = options
            .cu_pairs
            .iter()
            .map(|&(i, j)| (item_names[i].clone(), item_names[j].clone()))
            .collect();
        let variants = [
            VariantSpec::Cu {
                pairs: options.cu_pairs.clone(),
            },
            VariantSpec::FamfCu {
                weights: calibration.weights.iter().copied().collect(),
                pairs: options.cu_pairs.clone(),
            },
        ];
        for v in variants {
            let cell = match fit_variant(moments, model, &item_names, &v, &options.variant) {
                Ok(sol) => RobustnessCell::from_fit(&sol, None),
                Err(e) => RobustnessCell::failed(&e),
            };
            cu.push(CuRow {
                variant: v.name().into(),
                pairs: named.clone(),
                cell,
            });
        }
    }

    Ok(RobustnessReport {
        path_labels: key_path_labels(&baseline.structure),
        lambda_profile,
        lofo,
        clf,
        cross_scale,
        cu,
    })
}

/// Parses `i:j[,i:j...]` with 1-based item positions or item names.
pub fn parse_cu_pairs(text: &str, item_names: &[String]) -> Result<Vec<(usize, usize)>> {
    let resolve = |tok: &str| -> Result<usize> {
        let tok = tok.trim();
        if let Some(i) = item_names.iter().position(|n| n == tok) {
            return Ok(i);
        }
        match tok.parse::<usize>() {
            Ok(i) if (1..=item_names.len()).contains(&i) => Ok(i - 1),
            _ => Err(FamfError::UnknownItem(tok.to_string())),
        }
    };
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|pair| {
            let (a, b) = pair
                .split_once(':')
                .ok_or_else(|| FamfError::Input(format!("pair {pair:?} is not i:j")))?;
            Ok((resolve(a)?, resolve(b)?))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisOptions {
    /// Base features to encode, in order.
    pub features: Vec<String>,
    pub expansion: ExpansionSpec,
    pub calibration: CalibrationOptions,
    pub variant: VariantOptions,
    pub stability: StabilityOptions,
    pub cu_pairs: Vec<(usize, usize)>,
    pub robustness: bool,
    pub pockets: usize,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            features: features::BASE_FEATURES
                .iter()
                .map(|s| s.to_string())
                .collect(),
            expansion: ExpansionSpec::default(),
            calibration: CalibrationOptions::default(),
            variant: VariantOptions::default(),
            stability: StabilityOptions::default(),
            cu_pairs: Vec::new(),
            robustness: true,
            pockets: 10,
        }
    }
}

/// SHA-256 of one input file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputDigest {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub inputs: Vec<InputDigest>,
    /// Seconds since the Unix epoch; written to provenance.json only.
    pub started_unix: u64,
    pub finished_unix: u64,
}

impl Provenance {
    pub fn new(seed: u64, inputs: Vec<InputDigest>) -> Self {
        let now = unix_now();
        Self {
            tool: "famf".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed,
            inputs,
            started_unix: now,
            finished_unix: now,
        }
    }
}

pub fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Everything one analysis produced.
#[derive(Debug, Clone)]
pub struct AnalysisBundle {
    pub item_names: Vec<String>,
    pub key: ItemKey,
    pub model: ModelSpec,
    pub validation: ValidationReport,
    pub baseline: SemSolution,
    pub features: FeatureMatrix,
    pub calibration: CalibrationResult,
    pub famf: SemSolution,
    pub stability: DeltaBetaPanel,
    pub robustness: Option<RobustnessReport>,
    pub pockets: Vec<ResidualPocket>,
    pub options: AnalysisOptions,
    pub provenance: Provenance,
}

/// Baseline fit that must converge before anything downstream is trusted.
pub fn fit_baseline(
    moments: &MomentSummary,
    model: &ModelSpec,
    item_names: &[String],
    options: &VariantOptions,
) -> Result<SemSolution> {
    let sol = fit_variant(moments, model, item_names, &VariantSpec::Baseline, options)?;
    if !sol.converged {
        return Err(FamfError::NonConvergence(format!(
            "baseline CFA: {}",
            sol.warnings.join("; ")
        )));
    }
    Ok(sol)
}

pub fn encode(key: &ItemKey, options: &AnalysisOptions) -> Result<FeatureMatrix> {
    let names: Vec<&str> = options.features.iter().map(String::as_str).collect();
    let base = features::encode_selected(key, &names)?;
    if options.expansion.is_empty() {
        Ok(base)
    } else {
        features::expand_features(&base, &options.expansion)
    }
}

/// Calibration of the baseline residual pattern against the encoded item key.
pub fn calibrate_baseline(
    baseline: &SemSolution,
    key: &ItemKey,
    features: &FeatureMatrix,
    options: &CalibrationOptions,
) -> Result<CalibrationResult> {
    calibrate::calibrate(
        &baseline.residual_cor,
        &key.names(),
        &key.scales(),
        features,
        options,
    )
}

/// The full analysis on aligned inputs.
pub fn run_analysis(
    responses: &ResponseMatrix,
    key: &ItemKey,
    model: &ModelSpec,
    options: &AnalysisOptions,
    mut provenance: Provenance,
) -> Result<AnalysisBundle> {
    let validation = ingest::validate_inputs(responses, key, model);
    if validation.has_errors() {
        let msgs: Vec<&str> = validation
            .issues
            .iter()
            .filter(|i| i.severity == ingest::Severity::Error)
            .map(|i| i.message.as_str())
            .collect();
        return Err(FamfError::Input(msgs.join("; ")));
    }
    let item_names = key.names();
    let moments = ingest::sample_moments(responses)?;
    let baseline = fit_baseline(&moments, model, &item_names, &options.variant)?;
    let features = encode(key, options)?;
    let calibration = calibrate_baseline(&baseline, key, &features, &options.calibration)?;
    let famf = fit_variant(
        &moments,
        model,
        &item_names,
        &VariantSpec::Famf {
            weights: calibration.weights.iter().copied().collect(),
        },
        &options.variant,
    )?;
    if !famf.converged {
        return Err(FamfError::NonConvergence(format!(
            "FAMF refit: {}",
            famf.warnings.join("; ")
        )));
    }
    let stability = effect_stability(&baseline, &famf, responses, &options.stability)?;
    let robustness = if options.robustness {
        Some(robustness_suite(
            &moments,
            model,
            key,
            &baseline,
            &features,
            &calibration,
            &RobustnessOptions {
                calibration: options.calibration.clone(),
                variant: options.variant,
                cu_pairs: options.cu_pairs.clone(),
            },
        )?)
    } else {
        None
    };
    let pockets = residual_pockets(&baseline.residual_cor, options.pockets.max(1));
    provenance.finished_unix = unix_now();
    Ok(AnalysisBundle {
        item_names,
        key: key.clone(),
        model: model.clone(),
        validation,
        baseline,
        features,
        calibration,
        famf,
        stability,
        robustness,
        pockets,
        options: options.clone(),
        provenance,
    })
}
