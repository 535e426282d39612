//! Monte Carlo study of metadata-driven method variance.

use std::path::Path;

use indexmap::IndexMap;
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution, Normal, StandardNormal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibrate::{CalibrationOptions, DEFAULT_GRID};
use crate::error::{FamfError, Result};
use crate::features;
use crate::ingest::{
    self, ItemKey, ItemMeta, ModelSpec, MomentSummary, Regression, ResponseMatrix,
};
use crate::linalg;
use crate::pipeline::{self, MethodScale, VariantOptions, VariantSpec, Z_95};
use crate::sem::{FitOptions, SemSolution};

pub const ITEMS_PER_TRAIT: usize = 12;
pub const TRAITS: [&str; 2] = ["T1", "T2"];
/// Uniqueness floor; draws below it are redrawn.
pub const MIN_UNIQUENESS: f64 = 0.05;
pub const MAX_ATTEMPTS: usize = 20;
pub const CROSS_LOADING: f64 = 0.3;

/// Method-loading intercept before rescaling.
pub const A0: f64 = 1.0;
/// True γ on the encoded base features (reversed, page, order, scale_width, polarity, length).
pub const GAMMA_TRUE: [f64; 6] = [0.3, -0.15, 0.0, 0.0, 0.0, -0.15];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CmvStrength {
    None,
    Low,
    Med,
    High,
}

impl CmvStrength {
    /// Mean method-variance share of unit item variance.
    pub fn share(self) -> f64 {
        match self {
            CmvStrength::None => 0.0,
            CmvStrength::Low => 0.05,
            CmvStrength::Med => 0.10,
            CmvStrength::High => 0.20,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CmvStrength::None => "none",
            CmvStrength::Low => "low",
            CmvStrength::Med => "med",
            CmvStrength::High => "high",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZInformative {
    #[default]
    Aligned,
    Misaligned,
}

impl ZInformative {
    pub fn as_str(self) -> &'static str {
        match self {
            ZInformative::Aligned => "aligned",
            ZInformative::Misaligned => "misaligned",
        }
    }
}

fn default_n() -> usize {
    500
}
fn default_beta() -> f64 {
    0.3
}
fn default_reps() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimCondition {
    #[serde(default)]
    pub name: Option<String>,
    pub cmv_strength: CmvStrength,
    #[serde(default)]
    pub z_informative: ZInformative,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_beta")]
    pub beta_true: f64,
    #[serde(default)]
    pub misspecified: bool,
    #[serde(default = "default_reps")]
    pub reps: usize,
    /// Overrides the study's master seed for this condition.
    #[serde(default)]
    pub seed: Option<u64>,
}

impl SimCondition {
    pub fn new(
        cmv_strength: CmvStrength,
        z_informative: ZInformative,
        n: usize,
        beta_true: f64,
        reps: usize,
    ) -> Self {
        Self {
            name: None,
            cmv_strength,
            z_informative,
            n,
            beta_true,
            misspecified: false,
            reps,
            seed: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let share = self.cmv_strength.share();
        if !(0.0..0.95).contains(&share) {
            return Err(FamfError::Input(format!(
                "method share {share} outside [0, 0.95)"
            )));
        }
        if self.reps == 0 {
            return Err(FamfError::Input("reps must be at least 1".into()));
        }
        let k = TRAITS.len() * ITEMS_PER_TRAIT;
        if self.n < k + 2 {
            return Err(FamfError::Input(format!(
                "n = {} is too small for {k} items",
                self.n
            )));
        }
        if !(self.beta_true.abs() < 1.0) {
            return Err(FamfError::Input("beta_true must lie in (−1, 1)".into()));
        }
        Ok(())
    }

    pub fn label(&self, index: usize) -> String {
        self.name.clone().unwrap_or_else(|| {
            format!(
                "c{index}:{}/{}/n{}/b{}{}",
                self.cmv_strength.as_str(),
                self.z_informative.as_str(),
                self.n,
                self.beta_true,
                if self.misspecified { "/misspec" } else { "" }
            )
        })
    }
}

/// Data-generating values for one replicate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruthRecord {
    pub lambda: Vec<f64>,
    pub w: Vec<f64>,
    pub gamma: Vec<f64>,
    pub a0: f64,
    /// Multiplier applied to a0 + Zγ to reach the target share.
    pub rescale: f64,
    pub psi: [[f64; 2]; 2],
    pub beta: f64,
    pub theta: Vec<f64>,
    /// (item index, trait index, loading) when a cross-loading was generated.
    pub cross_loading: Option<(usize, usize, f64)>,
    /// Item key used for generation (the calibrator may see a permutation).
    pub metadata: ItemKey,
    pub attempts: usize,
}

impl TruthRecord {
    /// Λ (k×2, including any cross-loading).
    pub fn lambda_matrix(&self) -> DMatrix<f64> {
        let k = self.lambda.len();
        let mut l = DMatrix::zeros(k, 2);
        for i in 0..k {
            l[(i, trait_of(i))] = self.lambda[i];
        }
        if let Some((i, t, v)) = self.cross_loading {
            l[(i, t)] = v;
        }
        l
    }

    /// ΛΨΛᵀ + wwᵀ + Θ.
    pub fn population_covariance(&self) -> DMatrix<f64> {
        let l = self.lambda_matrix();
        let psi = DMatrix::from_row_slice(
            2,
            2,
            &[
                self.psi[0][0],
                self.psi[0][1],
                self.psi[1][0],
                self.psi[1][1],
            ],
        );
        let w = DVector::from_vec(self.w.clone());
        let mut s = &l * psi * l.transpose() + &w * w.transpose();
        for i in 0..s.nrows() {
            s[(i, i)] += self.theta[i];
        }
        s
    }
}

/// Items alternate between traits: order 1 is T1, order 2 is T2, and so on.
pub fn trait_of(index: usize) -> usize {
    index % TRAITS.len()
}

pub fn item_name(index: usize) -> String {
    format!("t{}_{:02}", trait_of(index) + 1, index / TRAITS.len() + 1)
}

pub fn study_model() -> ModelSpec {
    let k = TRAITS.len() * ITEMS_PER_TRAIT;
    let mut traits = IndexMap::new();
    for (t, name) in TRAITS.iter().enumerate() {
        traits.insert(
            name.to_string(),
            (0..k)
                .filter(|&i| trait_of(i) == t)
                .map(item_name)
                .collect(),
        );
    }
    ModelSpec {
        traits,
        regressions: vec![Regression {
            outcome: TRAITS[1].into(),
            predictors: vec![TRAITS[0].into()],
        }],
        residual_covariances: Vec::new(),
        identification: Default::default(),
    }
}

pub fn draw_metadata(rng: &mut ChaCha8Rng) -> ItemKey {
    let k = TRAITS.len() * ITEMS_PER_TRAIT;
    let rev = Bernoulli::new(1.0 / 3.0).expect("valid probability");
    let len = Normal::<f64>::new(12.0, 3.0).expect("valid normal");
    let items = (0..k)
        .map(|i| {
            let reversed = rev.sample(rng);
            let order = i as u32 + 1;
            ItemMeta {
                item: item_name(i),
                scale: TRAITS[trait_of(i)].into(),
                reversed: reversed as u8,
                page: order.div_ceil(6),
                order,
                scale_width: if trait_of(i) == 0 { 5 } else { 7 },
                polarity: if reversed { -1 } else { 1 },
                length: len.sample(rng).round().clamp(5.0, 25.0) as u32,
            }
        })
        .collect();
    ItemKey::new(items).expect("generated key is valid")
}

/// Item key with metadata rows shuffled across items (names and scales stay put).
pub fn permute_metadata(key: &ItemKey, rng: &mut ChaCha8Rng) -> ItemKey {
    let mut perm: Vec<usize> = (0..key.len()).collect();
    perm.shuffle(rng);
    let items = key
        .items
        .iter()
        .zip(&perm)
        .map(|(own, &p)| {
            let src = &key.items[p];
            ItemMeta {
                item: own.item.clone(),
                scale: own.scale.clone(),
                ..src.clone()
            }
        })
        .collect();
    ItemKey::new(items).expect("permuted key is valid")
}

/// Raw method loadings a0 + Zγ on the standard encoding of `key`.
pub fn raw_method_loadings(key: &ItemKey) -> DVector<f64> {
    let z = features::encode_features(key).expect("generated metadata varies");
    let gamma: Vec<f64> = features::BASE_FEATURES
        .iter()
        .zip(GAMMA_TRUE)
        .filter(|(name, _)| z.column_index(name).is_some())
        .map(|(_, g)| g)
        .collect();
    let mut raw = &z.z * DVector::from_vec(gamma);
    raw.add_scalar_mut(A0);
    raw
}

/// Draws one dataset; `rng` is the replicate's own stream.
pub fn generate_with_rng(
    cond: &SimCondition,
    rng: &mut ChaCha8Rng,
) -> Result<(ResponseMatrix, ItemKey, ModelSpec, TruthRecord)> {
    cond.validate()?;
    let k = TRAITS.len() * ITEMS_PER_TRAIT;
    let beta = cond.beta_true;
    let share = cond.cmv_strength.share();
    let lambda_dist = Uniform::new(0.6, 0.8).expect("valid range");
    for attempt in 1..=MAX_ATTEMPTS {
        let key = draw_metadata(rng);
        let lambda: Vec<f64> = (0..k).map(|_| lambda_dist.sample(rng)).collect();
        let raw = raw_method_loadings(&key);
        let rescale = if share > 0.0 {
            (share / (raw.norm_squared() / k as f64)).sqrt()
        } else {
            0.0
        };
        let w: Vec<f64> = raw.iter().map(|v| v * rescale).collect();
        let cross = cond
            .misspecified
            .then_some((2 * (ITEMS_PER_TRAIT - 1), 1usize, CROSS_LOADING));
        let mut truth = TruthRecord {
            lambda,
            w,
            gamma: GAMMA_TRUE.to_vec(),
            a0: A0,
            rescale,
            psi: [[1.0, beta], [beta, 1.0]],
            beta,
            theta: vec![0.0; k],
            cross_loading: cross,
            metadata: key.clone(),
            attempts: attempt,
        };
        let common = truth.population_covariance();
        let theta: Vec<f64> = (0..k).map(|i| 1.0 - common[(i, i)]).collect();
        if theta.iter().any(|&t| t < MIN_UNIQUENESS) {
            continue;
        }
        truth.theta = theta;
        let sigma = truth.population_covariance();
        let chol = linalg::cholesky(&sigma)
            .ok_or_else(|| FamfError::NotPositiveDefinite("population covariance".into()))?;
        let l = chol.l();
        let noise = DMatrix::from_fn(cond.n, k, |_, _| rng.sample::<f64, _>(StandardNormal));
        let values = noise * l.transpose();
        let names: Vec<String> = (0..k).map(item_name).collect();
        let responses = ResponseMatrix::new(values, names)?;
        let shown = match cond.z_informative {
            ZInformative::Aligned => key,
            ZInformative::Misaligned => permute_metadata(&key, rng),
        };
        return Ok((responses, shown, study_model(), truth));
    }
    Err(FamfError::Input(format!(
        "no admissible draw in {MAX_ATTEMPTS} attempts (uniqueness below {MIN_UNIQUENESS})"
    )))
}

fn rep_rng(master: u64, condition: usize, rep: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(((condition as u64) << 32) | rep as u64);
    rng
}

/// Replicate `rep` of condition `index` under the given master seed.
pub fn generate_dataset(
    cond: &SimCondition,
    index: usize,
    rep: usize,
    master_seed: u64,
) -> Result<(ResponseMatrix, ItemKey, ModelSpec, TruthRecord)> {
    let mut rng = rep_rng(cond.seed.unwrap_or(master_seed), index, rep);
    generate_with_rng(cond, &mut rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Baseline,
    Clf,
    Famf,
    Oracle,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Baseline, Method::Clf, Method::Famf, Method::Oracle];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Baseline => "baseline",
            Method::Clf => "clf",
            Method::Famf => "famf",
            Method::Oracle => "oracle",
        }
    }
}

/// One method's estimate of the structural path on one replicate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimate {
    pub beta: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepRecord {
    pub rep: usize,
    /// Indexed like [`Method::ALL`]; `None` when the fit failed or did not converge.
    pub estimates: [Option<Estimate>; 4],
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyOptions {
    pub method_scale: MethodScale,
    pub grid: Vec<f64>,
    pub fit: FitOptions,
}

impl Default for StudyOptions {
    fn default() -> Self {
        Self {
            method_scale: MethodScale::Fixed,
            grid: DEFAULT_GRID.to_vec(),
            fit: FitOptions::default(),
        }
    }
}

fn path_estimate(sol: &SemSolution) -> Option<Estimate> {
    if !sol.converged {
        return None;
    }
    let p = sol.key_paths().into_iter().next()?;
    p.estimate.is_finite().then_some(Estimate {
        beta: p.estimate,
        se: p.se,
    })
}

fn fit_slot(
    record: &mut RepRecord,
    moments: &MomentSummary,
    model: &ModelSpec,
    names: &[String],
    slot: usize,
    variant: &VariantSpec,
    opts: &VariantOptions,
) -> Option<SemSolution> {
    let method = Method::ALL[slot].as_str();
    match pipeline::fit_variant(moments, model, names, variant, opts) {
        Ok(sol) => {
            record.estimates[slot] = path_estimate(&sol);
            if record.estimates[slot].is_none() {
                record.errors.push(format!("{method}: not converged"));
            }
            Some(sol)
        }
        Err(e) => {
            record.errors.push(format!("{method}: {e}"));
            None
        }
    }
}

/// Generates one replicate and fits all four methods.
pub fn run_rep(
    cond: &SimCondition,
    index: usize,
    rep: usize,
    master_seed: u64,
    options: &StudyOptions,
) -> RepRecord {
    let mut record = RepRecord {
        rep,
        estimates: [None, None, None, None],
        errors: Vec::new(),
    };
    let (data, key, model, truth) = match generate_dataset(cond, index, rep, master_seed) {
        Ok(d) => d,
        Err(e) => {
            record.errors.push(format!("generate: {e}"));
            return record;
        }
    };
    let moments = match ingest::sample_moments(&data) {
        Ok(m) => m,
        Err(e) => {
            record.errors.push(format!("moments: {e}"));
            return record;
        }
    };
    let names = key.names();
    let vopts = VariantOptions {
        fit: options.fit,
        method_scale: options.method_scale,
    };
    let baseline = fit_slot(
        &mut record,
        &moments,
        &model,
        &names,
        0,
        &VariantSpec::Baseline,
        &vopts,
    );
    fit_slot(
        &mut record,
        &moments,
        &model,
        &names,
        1,
        &VariantSpec::Clf,
        &vopts,
    );
    match baseline.filter(|b| b.converged) {
        Some(base) => {
            let cal = features::encode_features(&key).and_then(|z| {
                pipeline::calibrate_baseline(
                    &base,
                    &key,
                    &z,
                    &CalibrationOptions {
                        grid: options.grid.clone(),
                        bootstrap: None,
                        ..Default::default()
                    },
                )
            });
            match cal {
                Ok(cal) => {
                    let famf = VariantSpec::Famf {
                        weights: cal.weights.iter().copied().collect(),
                    };
                    fit_slot(&mut record, &moments, &model, &names, 2, &famf, &vopts);
                }
                Err(e) => record.errors.push(format!("famf: {e}")),
            }
        }
        None => record
            .errors
            .push("famf: baseline unavailable for calibration".into()),
    }
    let oracle_opts = VariantOptions {
        method_scale: MethodScale::Fixed,
        ..vopts
    };
    let oracle = VariantSpec::Famf {
        weights: truth.w.clone(),
    };
    fit_slot(
        &mut record,
        &moments,
        &model,
        &names,
        3,
        &oracle,
        &oracle_opts,
    );
    record
}

/// Aggregate for one condition × method.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodSummary {
    pub condition: usize,
    pub label: String,
    pub cmv_strength: CmvStrength,
    pub z_informative: ZInformative,
    pub n: usize,
    pub beta_true: f64,
    pub misspecified: bool,
    pub method: Method,
    pub reps: usize,
    pub converged: usize,
    pub nonconvergence: usize,
    pub mean_estimate: f64,
    pub bias: f64,
    pub mse: f64,
    pub rejection_rate: f64,
    pub coverage: f64,
    pub mean_se: f64,
    /// At most 20% of replicates failed.
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionResult {
    pub condition: SimCondition,
    pub records: Vec<RepRecord>,
    pub summaries: Vec<MethodSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyReport {
    pub master_seed: u64,
    pub options: StudyOptions,
    pub conditions: Vec<ConditionResult>,
}

pub fn summarize(cond: &SimCondition, index: usize, records: &[RepRecord]) -> Vec<MethodSummary> {
    Method::ALL
        .iter()
        .enumerate()
        .map(|(slot, &method)| {
            let ests: Vec<&Estimate> = records
                .iter()
                .filter_map(|r| r.estimates[slot].as_ref())
                .collect();
            let ok = ests.len();
            let nan_if_empty = |v: f64| if ok == 0 { f64::NAN } else { v };
            let mean = nan_if_empty(ests.iter().map(|e| e.beta).sum::<f64>() / ok as f64);
            let mse = nan_if_empty(
                ests.iter()
                    .map(|e| (e.beta - cond.beta_true).powi(2))
                    .sum::<f64>()
                    / ok as f64,
            );
            let with_se: Vec<&&Estimate> = ests
                .iter()
                .filter(|e| e.se.is_finite() && e.se > 0.0)
                .collect();
            let m = with_se.len();
            let rate = |f: &dyn Fn(&Estimate) -> bool| {
                if m == 0 {
                    f64::NAN
                } else {
                    with_se.iter().filter(|e| f(e)).count() as f64 / m as f64
                }
            };
            let rejection_rate = rate(&|e| (e.beta / e.se).abs() > Z_95);
            let coverage = rate(&|e| (e.beta - cond.beta_true).abs() <= Z_95 * e.se);
            let mean_se = if m == 0 {
                f64::NAN
            } else {
                with_se.iter().map(|e| e.se).sum::<f64>() / m as f64
            };
            MethodSummary {
                condition: index,
                label: cond.label(index),
                cmv_strength: cond.cmv_strength,
                z_informative: cond.z_informative,
                n: cond.n,
                beta_true: cond.beta_true,
                misspecified: cond.misspecified,
                method,
                reps: records.len(),
                converged: ok,
                nonconvergence: records.len() - ok,
                mean_estimate: mean,
                bias: mean - cond.beta_true,
                mse,
                rejection_rate,
                coverage,
                mean_se,
                valid: (records.len() - ok) as f64 <= 0.2 * records.len() as f64,
            }
        })
        .collect()
}

pub fn run_condition(
    cond: &SimCondition,
    index: usize,
    master_seed: u64,
    options: &StudyOptions,
) -> Result<ConditionResult> {
    cond.validate()?;
    let records: Vec<RepRecord> = (0..cond.reps)
        .into_par_iter()
        .map(|rep| run_rep(cond, index, rep, master_seed, options))
        .collect();
    Ok(ConditionResult {
        condition: cond.clone(),
        summaries: summarize(cond, index, &records),
        records,
    })
}

pub fn run_study(
    design: &[SimCondition],
    master_seed: u64,
    options: &StudyOptions,
) -> Result<StudyReport> {
    for c in design {
        c.validate()?;
    }
    let conditions = design
        .iter()
        .enumerate()
        .map(|(i, c)| run_condition(c, i, master_seed, options))
        .collect::<Result<_>>()?;
    Ok(StudyReport {
        master_seed,
        options: options.clone(),
        conditions,
    })
}

pub fn read_design(path: &Path) -> Result<Vec<SimCondition>> {
    let text = std::fs::read_to_string(path).map_err(|source| FamfError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let design: Vec<SimCondition> =
        serde_json::from_str(&text).map_err(|source| FamfError::Json {
            path: path.to_path_buf(),
            source,
        })?;
    if design.is_empty() {
        return Err(FamfError::Input("study design has no conditions".into()));
    }
    for c in &design {
        c.validate()?;
    }
    Ok(design)
}

pub const RESULTS_HEADER: [&str; 18] = [
    "condition",
    "label",
    "cmv_strength",
    "z_informative",
    "n",
    "beta_true",
    "misspecified",
    "method",
    "reps",
    "converged",
    "nonconvergence",
    "mean_estimate",
    "bias",
    "mse",
    "rejection_rate",
    "coverage",
    "mean_se",
    "valid",
];

impl StudyReport {
    pub fn summaries(&self) -> impl Iterator<Item = &MethodSummary> {
        self.conditions.iter().flat_map(|c| c.summaries.iter())
    }

    pub fn summary(&self, condition: usize, method: Method) -> Option<&MethodSummary> {
        self.conditions
            .get(condition)?
            .summaries
            .iter()
            .find(|s| s.method == method)
    }

    /// results.csv content: one row per condition × method.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| FamfError::Input(format!("csv: {e}"));
        w.write_record(RESULTS_HEADER).map_err(csv_err)?;
        let f = |v: f64| format!("{v:.6}");
        for s in self.summaries() {
            w.write_record([
                s.condition.to_string(),
                s.label.clone(),
                s.cmv_strength.as_str().into(),
                s.z_informative.as_str().into(),
                s.n.to_string(),
                f(s.beta_true),
                s.misspecified.to_string(),
                s.method.as_str().into(),
                s.reps.to_string(),
                s.converged.to_string(),
                s.nonconvergence.to_string(),
                f(s.mean_estimate),
                f(s.bias),
                f(s.mse),
                f(s.rejection_rate),
                f(s.coverage),
                f(s.mean_se),
                s.valid.to_string(),
            ])
            .map_err(csv_err)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| FamfError::Input(format!("csv: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }
}

/// Moments of a generated dataset, for checks against the population covariance.
pub fn moments_of(data: &ResponseMatrix) -> Result<MomentSummary> {
    ingest::sample_moments(data)
}
