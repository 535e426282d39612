use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use famf::calibrate::{CalibrationOptions, DEFAULT_BOOTSTRAP, DEFAULT_GRID};
use famf::error::{FamfError, Result};
use famf::export;
use famf::features::{ExpansionSpec, BASE_FEATURES};
use famf::ingest::{self, ItemKey, ModelSpec, ResponseMatrix};
use famf::pipeline::{
    self, AnalysisBundle, AnalysisOptions, InputDigest, MethodScale, Provenance, StabilityOptions,
    VariantOptions, VariantSpec, DEFAULT_STABILITY_BOOTSTRAP,
};
use famf::sem::FitOptions;
use famf::simulate::{self, StudyOptions};

#[derive(Debug, Parser)]
#[command(
    name = "famf",
    version,
    about = "Metadata-calibrated method factor for CFA/SEM"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit the traits-only CFA/SEM and write its solution and residuals.
    FitBaseline(BaseArgs),
    /// Calibrate method weights from item metadata (calibration.json, weights.csv).
    Calibrate(CalibrateArgs),
    /// Refit with the fixed method factor and compute the Δβ panel.
    Fit(AnalysisArgs),
    /// λ profile, leave-one-feature-out, CLF, cross-scale and CU comparators.
    Robustness(AnalysisArgs),
    /// Full analysis with every artifact and report.md.
    Report(AnalysisArgs),
    /// Write weights.csv, lisrel_fragment.txt and amos_checklist.txt.
    Export(ExportArgs),
    /// Monte Carlo study over a design file.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ScaleArg {
    Fixed,
    Free,
}

#[derive(Debug, Args)]
struct BaseArgs {
    /// Respondent × item CSV with a header row of item names.
    #[arg(long)]
    responses: PathBuf,
    /// Item metadata CSV.
    #[arg(long)]
    itemkey: PathBuf,
    /// Model JSON: traits, regressions, residual covariances.
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Clamp uniqueness variances at this lower bound.
    #[arg(long)]
    bound_uniqueness: Option<f64>,
}

#[derive(Debug, Args)]
struct CalibrationArgs {
    /// Use this λ instead of the plateau rule.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, alias = "grid", value_delimiter = ',')]
    lambda_grid: Option<Vec<f64>>,
    /// Build m from cross-scale residual pairs only.
    #[arg(long)]
    cross_scale_only: bool,
    /// Item-bootstrap replicates for γ intervals.
    #[arg(long, default_value_t = DEFAULT_BOOTSTRAP)]
    item_bootstrap: usize,
    /// Skip every bootstrap; Wald intervals only.
    #[arg(long)]
    no_bootstrap: bool,
    /// Orient weights so this feature's γ is positive.
    #[arg(long)]
    orient_feature: Option<String>,
    /// Comma-separated subset of base features, in order.
    #[arg(long, value_delimiter = ',')]
    features: Option<Vec<String>>,
    /// Interaction column a:b (repeatable).
    #[arg(long)]
    interact: Vec<String>,
    /// Polynomial term feature:degree (repeatable).
    #[arg(long)]
    poly: Vec<String>,
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    #[command(flatten)]
    base: BaseArgs,
    #[command(flatten)]
    cal: CalibrationArgs,
}

#[derive(Debug, Args)]
struct AnalysisArgs {
    #[command(flatten)]
    base: BaseArgs,
    #[command(flatten)]
    cal: CalibrationArgs,
    /// Respondent-bootstrap replicates for Δβ intervals.
    #[arg(long, default_value_t = DEFAULT_STABILITY_BOOTSTRAP)]
    bootstrap: usize,
    /// Also fit the common latent factor comparator.
    #[arg(long)]
    clf: bool,
    /// Freed residual covariances i:j[,i:j...] (1-based positions or item names).
    #[arg(long)]
    cu: Option<String>,
    #[arg(long, value_enum, default_value = "fixed")]
    method_scale: ScaleArg,
}

#[derive(Debug, Args)]
struct ExportArgs {
    #[command(flatten)]
    base: BaseArgs,
    #[command(flatten)]
    cal: CalibrationArgs,
    /// Export an existing weights.csv instead of recalibrating.
    #[arg(long)]
    weights: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// JSON array of simulation conditions.
    #[arg(long)]
    design: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Override the replicate count of every condition.
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long, alias = "grid", value_delimiter = ',')]
    lambda_grid: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value = "fixed")]
    method_scale: ScaleArg,
}

impl From<ScaleArg> for MethodScale {
    fn from(s: ScaleArg) -> Self {
        match s {
            ScaleArg::Fixed => MethodScale::Fixed,
            ScaleArg::Free => MethodScale::Free,
        }
    }
}

struct Inputs {
    responses: ResponseMatrix,
    key: ItemKey,
    model: ModelSpec,
    digests: Vec<InputDigest>,
}

fn load(base: &BaseArgs) -> Result<Inputs> {
    let (responses, key, model) = ingest::load_inputs(&base.responses, &base.itemkey, &base.model)?;
    let digests = vec![
        export::digest("responses", &base.responses)?,
        export::digest("itemkey", &base.itemkey)?,
        export::digest("model", &base.model)?,
    ];
    Ok(Inputs {
        responses,
        key,
        model,
        digests,
    })
}

fn fit_options(base: &BaseArgs) -> FitOptions {
    FitOptions {
        bound_uniqueness: base.bound_uniqueness,
        ..FitOptions::default()
    }
}

fn expansion(cal: &CalibrationArgs) -> Result<ExpansionSpec> {
    let mut spec = ExpansionSpec::default();
    for term in &cal.interact {
        let (a, b) = term
            .split_once(':')
            .ok_or_else(|| FamfError::Input(format!("--interact {term:?} is not a:b")))?;
        spec.interactions.push((a.to_string(), b.to_string()));
    }
    let mut poly = BTreeMap::new();
    for term in &cal.poly {
        let (f, d) = term
            .split_once(':')
            .ok_or_else(|| FamfError::Input(format!("--poly {term:?} is not feature:degree")))?;
        let d: u32 = d
            .parse()
            .map_err(|_| FamfError::Input(format!("--poly degree {d:?} is not an integer")))?;
        poly.insert(f.to_string(), d);
    }
    spec.polynomial = poly;
    Ok(spec)
}

fn calibration_options(cal: &CalibrationArgs, seed: u64) -> CalibrationOptions {
    CalibrationOptions {
        grid: cal
            .lambda_grid
            .clone()
            .unwrap_or_else(|| DEFAULT_GRID.to_vec()),
        lambda: cal.lambda,
        cross_scale_only: cal.cross_scale_only,
        bootstrap: (!cal.no_bootstrap && cal.item_bootstrap > 0).then_some(cal.item_bootstrap),
        seed,
        orient_feature: cal.orient_feature.clone(),
        ..CalibrationOptions::default()
    }
}

fn analysis_options(
    base: &BaseArgs,
    cal: &CalibrationArgs,
    bootstrap: usize,
    method_scale: MethodScale,
    cu_pairs: Vec<(usize, usize)>,
    robustness: bool,
) -> Result<AnalysisOptions> {
    let fit = fit_options(base);
    Ok(AnalysisOptions {
        features: cal
            .features
            .clone()
            .unwrap_or_else(|| BASE_FEATURES.iter().map(|s| s.to_string()).collect()),
        expansion: expansion(cal)?,
        calibration: calibration_options(cal, base.seed),
        variant: VariantOptions { fit, method_scale },
        stability: StabilityOptions {
            bootstrap: (!cal.no_bootstrap && bootstrap > 0).then_some(bootstrap),
            seed: base.seed,
            fit,
        },
        cu_pairs,
        robustness,
        ..AnalysisOptions::default()
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    export::write_atomic(path, text.as_bytes())
}

fn provenance_done(mut p: Provenance, out: &Path) -> Result<()> {
    p.finished_unix = pipeline::unix_now();
    export::write_provenance(&p, out)
}

fn fit_baseline_cmd(args: &BaseArgs) -> Result<()> {
    let inputs = load(args)?;
    let provenance = Provenance::new(args.seed, inputs.digests.clone());
    let moments = ingest::sample_moments(&inputs.responses)?;
    let names = inputs.key.names();
    let opts = VariantOptions {
        fit: fit_options(args),
        method_scale: MethodScale::Fixed,
    };
    let sol = pipeline::fit_baseline(&moments, &inputs.model, &names, &opts)?;
    export::write_solution_files(&sol, "baseline", &args.out)?;
    provenance_done(provenance, &args.out)?;
    println!(
        "baseline: chi2 = {:.3}, df = {}, CFI = {:.3}, RMSEA = {:.3}",
        sol.chi_square, sol.df, sol.fit.cfi, sol.fit.rmsea
    );
    Ok(())
}

fn calibrate_inputs(
    base: &BaseArgs,
    cal: &CalibrationArgs,
    inputs: &Inputs,
) -> Result<famf::calibrate::CalibrationResult> {
    let opts = analysis_options(base, cal, 0, MethodScale::Fixed, Vec::new(), false)?;
    let moments = ingest::sample_moments(&inputs.responses)?;
    let names = inputs.key.names();
    let baseline = pipeline::fit_baseline(&moments, &inputs.model, &names, &opts.variant)?;
    let features = pipeline::encode(&inputs.key, &opts)?;
    pipeline::calibrate_baseline(&baseline, &inputs.key, &features, &opts.calibration)
}

fn calibrate_cmd(args: &CalibrateArgs) -> Result<()> {
    let inputs = load(&args.base)?;
    let provenance = Provenance::new(args.base.seed, inputs.digests.clone());
    let cal = calibrate_inputs(&args.base, &args.cal, &inputs)?;
    let out = &args.base.out;
    export::ensure_dir(out)?;
    let w: Vec<f64> = cal.weights.iter().copied().collect();
    write_text(
        &out.join("weights.csv"),
        &export::weights_csv(&cal.item_names, &w),
    )?;
    write_text(
        &out.join("calibration.json"),
        &export::to_json_pretty(&export::calibration_json(&cal))?,
    )?;
    provenance_done(provenance, out)?;
    println!(
        "calibration: lambda = {}, R2 = {:.3}, r = {:.3}",
        cal.lambda, cal.r2, cal.r
    );
    for w in &cal.warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}

fn run_bundle(args: &AnalysisArgs, robustness: bool) -> Result<AnalysisBundle> {
    let inputs = load(&args.base)?;
    let names = inputs.key.names();
    let cu_pairs = match &args.cu {
        Some(text) => pipeline::parse_cu_pairs(text, &names)?,
        None => Vec::new(),
    };
    let opts = analysis_options(
        &args.base,
        &args.cal,
        args.bootstrap,
        args.method_scale.into(),
        cu_pairs,
        robustness,
    )?;
    let provenance = Provenance::new(args.base.seed, inputs.digests.clone());
    pipeline::run_analysis(
        &inputs.responses,
        &inputs.key,
        &inputs.model,
        &opts,
        provenance,
    )
}

fn print_panel(bundle: &AnalysisBundle) {
    for row in &bundle.stability.rows {
        let ci = match (row.ci_lo, row.ci_hi) {
            (Some(lo), Some(hi)) => format!("[{lo:.3}, {hi:.3}]"),
            _ => "-".into(),
        };
        println!(
            "{}: before {:.3}, after {:.3}, delta {:.3} {ci}",
            row.path, row.beta_before, row.beta_after, row.delta
        );
    }
    if bundle.stability.unreliable {
        eprintln!("warning: more than 10% of bootstrap refits failed");
    }
}

fn extra_variants(args: &AnalysisArgs, bundle: &AnalysisBundle) -> Result<()> {
    let mut variants = Vec::new();
    if args.clf {
        variants.push(VariantSpec::Clf);
    }
    if !bundle.options.cu_pairs.is_empty() {
        variants.push(VariantSpec::Cu {
            pairs: bundle.options.cu_pairs.clone(),
        });
        variants.push(VariantSpec::FamfCu {
            weights: bundle.calibration.weights.iter().copied().collect(),
            pairs: bundle.options.cu_pairs.clone(),
        });
    }
    if variants.is_empty() {
        return Ok(());
    }
    let inputs = load(&args.base)?;
    let moments = ingest::sample_moments(&inputs.responses)?;
    for v in variants {
        let sol = pipeline::fit_variant(
            &moments,
            &bundle.model,
            &bundle.item_names,
            &v,
            &bundle.options.variant,
        )?;
        export::write_solution_files(&sol, v.name(), &args.base.out)?;
        let paths: Vec<String> = sol
            .key_paths()
            .iter()
            .map(|p| format!("{} = {:.3}", p.label, p.estimate))
            .collect();
        println!("{}: {}", v.name(), paths.join(", "));
        for w in &sol.warnings {
            eprintln!("warning ({}): {w}", v.name());
        }
    }
    Ok(())
}

fn fit_cmd(args: &AnalysisArgs) -> Result<()> {
    let bundle = run_bundle(args, false)?;
    let out = &args.base.out;
    let (traits, assign) = (
        bundle.model.trait_names(),
        bundle.model.item_traits(&bundle.item_names)?,
    );
    export::write_calibration_files(&bundle.calibration, &traits, &assign, out)?;
    export::write_solution_files(&bundle.baseline, "baseline", out)?;
    export::write_solution_files(&bundle.famf, "famf", out)?;
    write_text(
        &out.join("stability.csv"),
        &export::stability_csv(&bundle.baseline, &bundle.stability, None),
    )?;
    extra_variants(args, &bundle)?;
    export::write_provenance(&bundle.provenance, out)?;
    print_panel(&bundle);
    Ok(())
}

fn robustness_cmd(args: &AnalysisArgs) -> Result<()> {
    let bundle = run_bundle(args, true)?;
    let out = &args.base.out;
    export::ensure_dir(out)?;
    let rob = bundle.robustness.as_ref().expect("robustness requested");
    write_text(&out.join("robustness.json"), &export::to_json_pretty(rob)?)?;
    write_text(
        &out.join("stability.csv"),
        &export::stability_csv(&bundle.baseline, &bundle.stability, Some(rob)),
    )?;
    extra_variants(args, &bundle)?;
    export::write_provenance(&bundle.provenance, out)?;
    print_panel(&bundle);
    Ok(())
}

fn report_cmd(args: &AnalysisArgs) -> Result<()> {
    let bundle = run_bundle(args, true)?;
    let files = export::write_all(&bundle, &args.base.out)?;
    extra_variants(args, &bundle)?;
    for f in files {
        println!("{}", f.display());
    }
    Ok(())
}

fn export_cmd(args: &ExportArgs) -> Result<()> {
    let inputs = load(&args.base)?;
    let mut provenance = Provenance::new(args.base.seed, inputs.digests.clone());
    let names = inputs.key.names();
    let weights: Vec<f64> = match &args.weights {
        Some(path) => {
            provenance.inputs.push(export::digest("weights", path)?);
            let parsed = export::read_weights_csv(path)?;
            let lookup: BTreeMap<&str, f64> =
                parsed.iter().map(|(n, w)| (n.as_str(), *w)).collect();
            if parsed.len() != names.len() {
                return Err(FamfError::Input(format!(
                    "weights file has {} rows for {} items",
                    parsed.len(),
                    names.len()
                )));
            }
            names
                .iter()
                .map(|n| {
                    lookup
                        .get(n.as_str())
                        .copied()
                        .ok_or_else(|| FamfError::UnknownItem(n.clone()))
                })
                .collect::<Result<_>>()?
        }
        None => calibrate_inputs(&args.base, &args.cal, &inputs)?
            .weights
            .iter()
            .copied()
            .collect(),
    };
    let traits = inputs.model.trait_names();
    let assign = inputs.model.item_traits(&names)?;
    let out = &args.base.out;
    export::ensure_dir(out)?;
    write_text(
        &out.join("weights.csv"),
        &export::weights_csv(&names, &weights),
    )?;
    write_text(
        &out.join("lisrel_fragment.txt"),
        &export::lisrel_fragment(&names, &traits, &assign, &weights),
    )?;
    write_text(
        &out.join("amos_checklist.txt"),
        &export::amos_checklist(&names, &traits, &weights),
    )?;
    provenance_done(provenance, out)?;
    Ok(())
}

fn simulate_cmd(args: &SimulateArgs) -> Result<()> {
    let mut design = simulate::read_design(&args.design)?;
    if let Some(r) = args.reps {
        for c in &mut design {
            c.reps = r;
        }
    }
    let provenance = Provenance::new(args.seed, vec![export::digest("design", &args.design)?]);
    let opts = StudyOptions {
        method_scale: args.method_scale.into(),
        grid: args
            .lambda_grid
            .clone()
            .unwrap_or_else(|| DEFAULT_GRID.to_vec()),
        ..StudyOptions::default()
    };
    let report = simulate::run_study(&design, args.seed, &opts)?;
    export::ensure_dir(&args.out)?;
    write_text(&args.out.join("results.csv"), &report.to_csv()?)?;
    provenance_done(provenance, &args.out)?;
    for s in report.summaries() {
        println!(
            "{:<32} {:<8} bias {:+.4}  mse {:.5}  rej {:.3}  cov {:.3}  ({}/{})",
            s.label,
            s.method.as_str(),
            s.bias,
            s.mse,
            s.rejection_rate,
            s.coverage,
            s.converged,
            s.reps
        );
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::FitBaseline(a) => fit_baseline_cmd(a),
        Command::Calibrate(a) => calibrate_cmd(a),
        Command::Fit(a) => fit_cmd(a),
        Command::Robustness(a) => robustness_cmd(a),
        Command::Report(a) => report_cmd(a),
        Command::Export(a) => export_cmd(a),
        Command::Simulate(a) => simulate_cmd(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("famf: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
