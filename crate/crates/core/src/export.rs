//! File artifacts: weights, interop fragments, JSON/CSV panels, provenance.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::calibrate::{CalibrationResult, SweepStatus};
use crate::error::{FamfError, Result};
use crate::pipeline::{
    AnalysisBundle, DeltaBetaPanel, InputDigest, RobustnessCell, RobustnessReport,
};
use crate::sem::SemSolution;

pub const WEIGHTS_HEADER: &str = "item,final_weight";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> FamfError + '_ {
    move |source| FamfError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `contents` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| FamfError::Input(format!("not a file path: {}", path.display())))?
        .to_string_lossy();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
    f.write_all(contents).map_err(io_err(&tmp))?;
    f.sync_all().map_err(io_err(&tmp))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        io_err(path)(e)
    })
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    Ok(Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

pub fn digest(role: &str, path: &Path) -> Result<InputDigest> {
    Ok(InputDigest {
        role: role.into(),
        path: path.display().to_string(),
        sha256: sha256_file(path)?,
    })
}

/// `item,final_weight` with six decimals.
pub fn weights_csv(item_names: &[String], weights: &[f64]) -> String {
    let mut out = String::from(WEIGHTS_HEADER);
    out.push('\n');
    for (item, w) in item_names.iter().zip(weights) {
        out.push_str(&format!("{item},{w:.6}\n"));
    }
    out
}

pub fn parse_weights_csv(text: &str) -> Result<Vec<(String, f64)>> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| FamfError::Input(format!("weights file: {e}")))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ["item", "final_weight"] {
        return Err(FamfError::Input(format!(
            "weights header must be {WEIGHTS_HEADER:?}"
        )));
    }
    rdr.records()
        .map(|r| {
            let r = r.map_err(|e| FamfError::Input(format!("weights file: {e}")))?;
            let w: f64 = r[1]
                .trim()
                .parse()
                .map_err(|_| FamfError::Input(format!("weight {:?} is not numeric", &r[1])))?;
            Ok((r[0].to_string(), w))
        })
        .collect()
}

pub fn read_weights_csv(path: &Path) -> Result<Vec<(String, f64)>> {
    parse_weights_csv(&fs::read_to_string(path).map_err(io_err(path))?)
}

/// Trait indicator pattern: `assign[i]` is the trait column of item i.
pub fn lisrel_fragment(
    item_names: &[String],
    trait_names: &[String],
    assign: &[usize],
    weights: &[f64],
) -> String {
    let k = item_names.len();
    let q = trait_names.len();
    let etas: Vec<String> = (1..=q).map(|t| format!("ETA{t}")).collect();
    let name_w = item_names.iter().map(|n| n.len()).max().unwrap_or(1).max(4);
    let mut out = String::new();
    out.push_str(&format!(
        "! FAMF method factor: k = {k} items, q = {q} traits\n"
    ));
    for (eta, name) in etas.iter().zip(trait_names) {
        out.push_str(&format!("! {eta} = {name}\n"));
    }
    out.push_str(&format!(
        "MO NY={k} NE={} LY=FU,FI TE=SY PS=SY PH=SY\n",
        q + 1
    ));
    out.push_str(&format!("LA {} M\n", etas.join(" ")));
    out.push_str("LY\n");
    for i in 0..k {
        let mut row = format!("{:<name_w$}", item_names[i]);
        for t in 0..q {
            row.push_str(if assign[i] == t { "  1" } else { "  0" });
        }
        row.push_str(&format!("  {:>7.3}", weights[i]));
        if i == 0 {
            row.push_str("  ! Method column fixed");
        }
        out.push_str(row.trim_end());
        out.push('\n');
    }
    out.push_str("PH\n");
    let label_w = etas.iter().map(|e| e.len()).max().unwrap_or(1).max(4);
    for eta in &etas {
        let mut row = format!("{eta:<label_w$}");
        for u in 0..=q {
            row.push_str(if u == q { "  0" } else { "  *" });
        }
        out.push_str(&row);
        out.push('\n');
    }
    let mut row = format!("{:<label_w$}", "M");
    for u in 0..=q {
        row.push_str(if u == q { "  1" } else { "  0" });
    }
    out.push_str(&row);
    out.push('\n');
    out.push_str("OU ND=3 RS MI\n");
    out
}

pub fn amos_checklist(item_names: &[String], trait_names: &[String], weights: &[f64]) -> String {
    let k = item_names.len();
    let name_w = item_names.iter().map(|n| n.len()).max().unwrap_or(1);
    let mut out = String::from("AMOS steps for the fixed method factor\n\n");
    out.push_str("1. Add a latent variable named M.\n");
    out.push_str(&format!(
        "2. Draw a single-headed path from M to every observed indicator ({k} paths).\n"
    ));
    out.push_str("3. Fix each M loading to its Final_Weight:\n");
    for (item, w) in item_names.iter().zip(weights) {
        out.push_str(&format!("     {item:<name_w$}  {w:>10.6}\n"));
    }
    out.push_str("4. Double-click M and set Variance = 1.\n");
    out.push_str(&format!(
        "5. Fix Cov(M, trait) = 0 for every trait: {}.\n",
        trait_names.join(", ")
    ));
    out.push_str("6. Re-estimate, then export the standardized solution and the residuals.\n");
    out
}

fn num(v: f64) -> serde_json::Value {
    if v.is_finite() {
        json!(v)
    } else {
        serde_json::Value::Null
    }
}

pub fn calibration_json(cal: &CalibrationResult) -> serde_json::Value {
    let gamma: Vec<serde_json::Value> = cal
        .feature_names
        .iter()
        .enumerate()
        .map(|(j, f)| {
            let ci = cal.gamma_ci.as_ref().map(|c| c[j]);
            json!({
                "feature": f,
                "estimate": num(cal.gamma[j]),
                "ci_lo": ci.map_or(serde_json::Value::Null, |c| num(c.0)),
                "ci_hi": ci.map_or(serde_json::Value::Null, |c| num(c.1)),
            })
        })
        .collect();
    let weights: Vec<serde_json::Value> = cal
        .item_names
        .iter()
        .zip(cal.weights.iter())
        .map(|(item, w)| json!({"item": item, "final_weight": num(*w)}))
        .collect();
    let sweep: Vec<serde_json::Value> = cal
        .sweep
        .iter()
        .map(|p| match &p.status {
            SweepStatus::Ok {
                r2,
                r,
                explained,
                max_weight,
                ..
            } => json!({
                "lambda": p.lambda, "status": "ok", "R2": num(*r2), "r": num(*r),
                "explained": num(*explained), "max_weight": num(*max_weight),
            }),
            SweepStatus::Infeasible { reason } => {
                json!({"lambda": p.lambda, "status": "infeasible", "reason": reason})
            }
            SweepStatus::Degenerate { reason } => {
                json!({"lambda": p.lambda, "status": "degenerate", "reason": reason})
            }
        })
        .collect();
    json!({
        "lambda": cal.lambda,
        "gamma": gamma,
        "R2": num(cal.r2),
        "r": num(cal.r),
        "m": cal.m.iter().map(|v| num(*v)).collect::<Vec<_>>(),
        "m_hat": cal.m_hat.iter().map(|v| num(*v)).collect::<Vec<_>>(),
        "weights": weights,
        "sweep": sweep,
        "flags": {
            "cross_scale_only": cal.cross_scale_only,
            "flipped": cal.flipped,
            "bootstrap": cal.gamma_ci.is_some(),
            "warnings": cal.warnings,
        },
    })
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| FamfError::Input(format!("serialization: {e}")))?;
    s.push('\n');
    Ok(s)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.filter(|x| x.is_finite())
        .map_or(String::new(), |x| format!("{x:.6}"))
}

/// stability.csv: the main Δβ panel followed by one row per robustness cell and path.
pub fn stability_csv(
    baseline: &SemSolution,
    panel: &DeltaBetaPanel,
    robustness: Option<&RobustnessReport>,
) -> String {
    let mut out =
        String::from("panel,path,beta_before,beta_after,delta,ci_lo,ci_hi,se_before,se_after\n");
    for r in &panel.rows {
        out.push_str(&format!(
            "famf,{},{},{},{},{},{},{},{}\n",
            r.path,
            fmt_opt(Some(r.beta_before)),
            fmt_opt(Some(r.beta_after)),
            fmt_opt(Some(r.delta)),
            fmt_opt(r.ci_lo),
            fmt_opt(r.ci_hi),
            fmt_opt(Some(r.se_before)),
            fmt_opt(Some(r.se_after)),
        ));
    }
    if let Some(rob) = robustness {
        let before: Vec<f64> = baseline.key_paths().iter().map(|p| p.estimate).collect();
        let mut cell_rows = |panel: String, cell: &RobustnessCell| {
            for (j, path) in rob.path_labels.iter().enumerate() {
                let after = cell.betas.as_ref().map(|b| b[j]);
                out.push_str(&format!(
                    "{panel},{path},{},{},{},,,,\n",
                    fmt_opt(Some(before[j])),
                    fmt_opt(after),
                    fmt_opt(after.map(|a| a - before[j])),
                ));
            }
        };
        for row in &rob.lambda_profile {
            cell_rows(format!("lambda={}", row.lambda), &row.cell);
        }
        for row in &rob.lofo {
            cell_rows(format!("lofo:{}", row.omitted), &row.cell);
        }
        cell_rows("clf".into(), &rob.clf);
        if let crate::pipeline::CrossScalePanel::Ran { cell } = &rob.cross_scale {
            cell_rows("cross_scale".into(), cell);
        }
        for row in &rob.cu {
            cell_rows(row.variant.clone(), &row.cell);
        }
    }
    out
}

/// Flat `key = value` listing of estimates, SEs and fit indices.
pub fn solution_text(sol: &SemSolution) -> String {
    let f = |v: f64| {
        if v.is_finite() {
            format!("{v:.6}")
        } else {
            "NA".into()
        }
    };
    let mut out = String::new();
    let mut kv = |k: &str, v: String| out.push_str(&format!("{k} = {v}\n"));
    kv("converged", sol.converged.to_string());
    kv("iterations", sol.iterations.to_string());
    kv("n", sol.n.to_string());
    kv("f_min", f(sol.f_min));
    kv("chi_square", f(sol.chi_square));
    kv("df", sol.df.to_string());
    kv("cfi", f(sol.fit.cfi));
    kv("tli", f(sol.fit.tli));
    kv("rmsea", f(sol.fit.rmsea));
    kv("srmr", f(sol.fit.srmr));
    for p in &sol.params {
        kv(&format!("est[{}]", p.label), f(p.estimate));
        kv(&format!("se[{}]", p.label), f(p.se));
    }
    for p in sol.key_paths() {
        kv(&format!("std[{}]", p.label), f(p.estimate));
        kv(&format!("std_se[{}]", p.label), f(p.se));
    }
    for w in &sol.warnings {
        kv("warning", w.clone());
    }
    out
}

/// Square matrix as CSV with item names on both margins.
pub fn matrix_csv(names: &[String], m: &DMatrix<f64>) -> String {
    let mut out = String::from("item");
    for n in names {
        out.push(',');
        out.push_str(n);
    }
    out.push('\n');
    for (i, n) in names.iter().enumerate() {
        out.push_str(n);
        for j in 0..m.ncols() {
            out.push_str(&format!(",{:.6}", m[(i, j)]));
        }
        out.push('\n');
    }
    out
}

fn trait_layout(bundle: &AnalysisBundle) -> (Vec<String>, Vec<usize>) {
    let traits = bundle.model.trait_names();
    let assign = bundle
        .model
        .item_traits(&bundle.item_names)
        .expect("model was checked against the items");
    (traits, assign)
}

/// weights.csv, lisrel_fragment.txt, amos_checklist.txt and calibration.json.
pub fn export_artifacts(bundle: &AnalysisBundle, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let (traits, assign) = trait_layout(bundle);
    write_calibration_files(&bundle.calibration, &traits, &assign, out_dir)?;
    Ok([
        "weights.csv",
        "lisrel_fragment.txt",
        "amos_checklist.txt",
        "calibration.json",
    ]
    .iter()
    .map(|f| out_dir.join(f))
    .collect())
}

pub fn write_calibration_files(
    cal: &CalibrationResult,
    trait_names: &[String],
    assign: &[usize],
    out_dir: &Path,
) -> Result<()> {
    ensure_dir(out_dir)?;
    let w: Vec<f64> = cal.weights.iter().copied().collect();
    write_atomic(
        &out_dir.join("weights.csv"),
        weights_csv(&cal.item_names, &w).as_bytes(),
    )?;
    write_atomic(
        &out_dir.join("lisrel_fragment.txt"),
        lisrel_fragment(&cal.item_names, trait_names, assign, &w).as_bytes(),
    )?;
    write_atomic(
        &out_dir.join("amos_checklist.txt"),
        amos_checklist(&cal.item_names, trait_names, &w).as_bytes(),
    )?;
    write_atomic(
        &out_dir.join("calibration.json"),
        to_json_pretty(&calibration_json(cal))?.as_bytes(),
    )
}

pub fn write_solution_files(sol: &SemSolution, prefix: &str, out_dir: &Path) -> Result<()> {
    ensure_dir(out_dir)?;
    write_atomic(
        &out_dir.join(format!("{prefix}_solution.txt")),
        solution_text(sol).as_bytes(),
    )?;
    write_atomic(
        &out_dir.join(format!("{prefix}_residuals.csv")),
        matrix_csv(&sol.structure.item_names, &sol.residual_cor).as_bytes(),
    )
}

pub fn write_provenance(
    bundle_provenance: &crate::pipeline::Provenance,
    out_dir: &Path,
) -> Result<()> {
    write_atomic(
        &out_dir.join("provenance.json"),
        to_json_pretty(bundle_provenance)?.as_bytes(),
    )
}

/// Every artifact of a full analysis, including the report.
pub fn write_all(bundle: &AnalysisBundle, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = export_artifacts(bundle, out_dir)?;
    write_solution_files(&bundle.baseline, "baseline", out_dir)?;
    write_solution_files(&bundle.famf, "famf", out_dir)?;
    write_atomic(
        &out_dir.join("stability.csv"),
        stability_csv(
            &bundle.baseline,
            &bundle.stability,
            bundle.robustness.as_ref(),
        )
        .as_bytes(),
    )?;
    if let Some(rob) = &bundle.robustness {
        write_atomic(
            &out_dir.join("robustness.json"),
            to_json_pretty(rob)?.as_bytes(),
        )?;
        files.push(out_dir.join("robustness.json"));
    }
    write_atomic(
        &out_dir.join("report.md"),
        crate::report::render_report(bundle).as_bytes(),
    )?;
    write_provenance(&bundle.provenance, out_dir)?;
    for f in [
        "baseline_solution.txt",
        "baseline_residuals.csv",
        "famf_solution.txt",
        "famf_residuals.csv",
        "stability.csv",
        "report.md",
        "provenance.json",
    ] {
        files.push(out_dir.join(f));
    }
    files.sort();
    Ok(files)
}
