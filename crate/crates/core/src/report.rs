//! Plain-text (markdown-compatible) analysis report.

use std::fmt::Write;

use crate::pipeline::{AnalysisBundle, CrossScalePanel, MethodScale, RobustnessCell};

const DASH: &str = "—";

fn f3(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.3}")
    } else {
        "NA".into()
    }
}

fn f6(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.6}")
    } else {
        "NA".into()
    }
}

fn table(out: &mut String, header: &[&str], rows: &[Vec<String>]) {
    let _ = writeln!(out, "| {} |", header.join(" | "));
    let _ = writeln!(
        out,
        "|{}|",
        header.iter().map(|_| "---").collect::<Vec<_>>().join("|")
    );
    for r in rows {
        let _ = writeln!(out, "| {} |", r.join(" | "));
    }
}

fn sign(v: f64) -> &'static str {
    if v > 0.0 {
        "+"
    } else if v < 0.0 {
        "−"
    } else {
        "0"
    }
}

fn cell_betas(cell: &RobustnessCell, n: usize) -> Vec<String> {
    match &cell.betas {
        Some(b) => b.iter().map(|v| f3(*v)).collect(),
        None => vec![DASH.to_string(); n],
    }
}

fn cell_note(cell: &RobustnessCell) -> String {
    match &cell.error {
        Some(e) => format!("failed: {e}"),
        None => cell.warnings.join("; "),
    }
}

/// Renders the five report sections. Output depends only on bundle contents.
pub fn render_report(b: &AnalysisBundle) -> String {
    let mut out = String::new();
    let cal = &b.calibration;
    let k = b.item_names.len();
    let q = b.model.trait_names().len();
    let _ = writeln!(out, "# FAMF-SEM analysis\n");
    let _ = writeln!(
        out,
        "n = {}, k = {k} items, q = {q} traits, seed = {}\n",
        b.baseline.n, b.provenance.seed
    );
    for d in &b.provenance.inputs {
        let _ = writeln!(out, "- input {}: sha256 {}", d.role, d.sha256);
    }
    if !b.provenance.inputs.is_empty() {
        out.push('\n');
    }

    let _ = writeln!(out, "## Method\n");
    let scale_note = match b.options.variant.method_scale {
        MethodScale::Fixed => "fixed at the calibrated weights".to_string(),
        MethodScale::Free => format!(
            "the calibrated weights times one free scale (estimate {})",
            b.famf.method_scale().map_or("NA".into(), f3)
        ),
    };
    let _ = writeln!(
        out,
        "Method loadings were obtained by ridge regression of the item residual signal m on the encoded item metadata ({}). \
         The fitted values were centered and scaled to sum of squares k = {k}. \
         A method factor M with Var(M) = 1, orthogonal to all traits, was added with loadings {scale_note}. \
         Ridge penalty λ = {}{}.\n",
        cal.feature_names.join(", "),
        f3(cal.lambda),
        if cal.cross_scale_only { "; m restricted to cross-scale pairs" } else { "" },
    );
    let warnings: Vec<&str> = b
        .validation
        .warnings()
        .chain(cal.warnings.iter().map(String::as_str))
        .collect();
    if !warnings.is_empty() {
        let _ = writeln!(out, "Warnings:\n");
        for w in warnings {
            let _ = writeln!(out, "- {w}");
        }
        out.push('\n');
    }

    let _ = writeln!(out, "## Diagnostics\n");
    let _ = writeln!(
        out,
        "Method pattern: R² = {}, r(m, m̂) = {}.\n",
        f3(cal.r2),
        f3(cal.r)
    );
    let fit_row = |name: &str, s: &crate::sem::SemSolution| {
        vec![
            name.to_string(),
            f3(s.chi_square),
            s.df.to_string(),
            f3(s.fit.cfi),
            f3(s.fit.tli),
            f3(s.fit.rmsea),
            f3(s.fit.srmr),
        ]
    };
    table(
        &mut out,
        &["model", "χ²", "df", "CFI", "TLI", "RMSEA", "SRMR"],
        &[fit_row("baseline", &b.baseline), fit_row("FAMF", &b.famf)],
    );
    out.push('\n');
    for (name, s) in [("baseline", &b.baseline), ("FAMF", &b.famf)] {
        for w in &s.warnings {
            let _ = writeln!(out, "- {name}: {w}");
        }
    }
    if !b.pockets.is_empty() {
        let _ = writeln!(out, "\nLargest baseline residual correlations:\n");
        let rows: Vec<Vec<String>> = b
            .pockets
            .iter()
            .map(|p| {
                vec![
                    b.item_names[p.first].clone(),
                    b.item_names[p.second].clone(),
                    f3(p.residual),
                ]
            })
            .collect();
        table(&mut out, &["item", "item", "r_res"], &rows);
    }
    out.push('\n');

    let _ = writeln!(out, "## Results\n");
    let panel = &b.stability;
    let boot = panel.replicates > 0;
    let rows: Vec<Vec<String>> = panel
        .rows
        .iter()
        .map(|r| {
            let ci = match (r.ci_lo, r.ci_hi) {
                (Some(lo), Some(hi)) => format!("[{}, {}]", f3(lo), f3(hi)),
                _ => DASH.into(),
            };
            vec![
                r.path.clone(),
                format!("{} ({})", f3(r.beta_before), f3(r.se_before)),
                format!("{} ({})", f3(r.beta_after), f3(r.se_after)),
                f3(r.delta),
                ci,
                format!("[{}, {}]", f3(r.wald_after.0), f3(r.wald_after.1)),
            ]
        })
        .collect();
    let quantity = if panel.quantity == "beta" {
        "β"
    } else {
        "latent correlation"
    };
    let _ = writeln!(
        out,
        "Standardized {quantity}, baseline vs FAMF (SE in parentheses).\n"
    );
    table(
        &mut out,
        &[
            "path",
            "before",
            "after",
            "Δ",
            "95% CI Δ",
            "95% Wald CI after",
        ],
        &rows,
    );
    if boot {
        let _ = writeln!(
            out,
            "\nΔ intervals: respondent bootstrap, {} replicates, {} failed refits{}.",
            panel.replicates,
            panel.failures,
            if panel.unreliable {
                "; UNRELIABLE (over 10% failures)"
            } else {
                ""
            }
        );
    } else {
        let _ = writeln!(out, "\nΔ intervals not computed (bootstrap disabled).");
    }
    out.push('\n');

    let _ = writeln!(out, "## Attribution\n");
    let has_ci = cal.gamma_ci.is_some();
    let rows: Vec<Vec<String>> = cal
        .feature_names
        .iter()
        .enumerate()
        .map(|(j, f)| {
            let (lo, hi) = match &cal.gamma_ci {
                Some(ci) => (f3(ci[j].0), f3(ci[j].1)),
                None => (format!("{DASH}¹"), format!("{DASH}¹")),
            };
            vec![
                f.clone(),
                f3(cal.gamma[j]),
                lo,
                hi,
                sign(cal.gamma[j]).into(),
            ]
        })
        .collect();
    table(&mut out, &["feature", "γ̂", "2.5%", "97.5%", "sign"], &rows);
    if !has_ci {
        let _ = writeln!(out, "\n¹ item bootstrap not run.");
    }
    let _ = writeln!(out, "\nFinal weights:\n");
    let rows: Vec<Vec<String>> = cal
        .item_names
        .iter()
        .zip(cal.weights.iter())
        .zip(cal.m.iter())
        .map(|((i, w), m)| vec![i.clone(), f6(*w), f3(*m)])
        .collect();
    table(&mut out, &["item", "final_weight", "m"], &rows);
    out.push('\n');

    let _ = writeln!(out, "## Robustness\n");
    match &b.robustness {
        None => {
            let _ = writeln!(out, "not run");
        }
        Some(rob) => {
            let np = rob.path_labels.len();
            let mut header: Vec<&str> = vec!["setting"];
            header.extend(rob.path_labels.iter().map(String::as_str));
            header.push("R²");
            header.push("note");
            let base: Vec<String> = b
                .baseline
                .key_paths()
                .iter()
                .map(|p| f3(p.estimate))
                .collect();
            let mut rows = vec![{
                let mut r = vec!["baseline".to_string()];
                r.extend(base);
                r.push(DASH.into());
                r.push(String::new());
                r
            }];
            for row in &rob.lambda_profile {
                let mut r = vec![format!("λ = {}", row.lambda)];
                r.extend(cell_betas(&row.cell, np));
                r.push(row.cell.r2.map_or(DASH.into(), f3));
                r.push(cell_note(&row.cell));
                rows.push(r);
            }
            let _ = writeln!(out, "λ profile:\n");
            table(&mut out, &header, &rows);

            let mut rows = Vec::new();
            for row in &rob.lofo {
                let mut r = vec![format!("without {}", row.omitted)];
                r.extend(cell_betas(&row.cell, np));
                r.push(row.cell.r2.map_or(DASH.into(), f3));
                r.push(cell_note(&row.cell));
                rows.push(r);
            }
            let _ = writeln!(out, "\nLeave-one-feature-out:\n");
            table(&mut out, &header, &rows);

            let mut rows = Vec::new();
            let mut r = vec!["CLF".to_string()];
            r.extend(cell_betas(&rob.clf, np));
            r.push(DASH.into());
            let mut note = cell_note(&rob.clf);
            if let Some(c) = rob.clf.method_scale {
                note = if note.is_empty() {
                    format!("c = {}", f3(c))
                } else {
                    format!("c = {}; {note}", f3(c))
                };
            }
            r.push(note);
            rows.push(r);
            match &rob.cross_scale {
                CrossScalePanel::Ran { cell } => {
                    let mut r = vec!["cross-scale m".to_string()];
                    r.extend(cell_betas(cell, np));
                    r.push(cell.r2.map_or(DASH.into(), f3));
                    r.push(cell_note(cell));
                    rows.push(r);
                }
                CrossScalePanel::NotApplicable { reason } => {
                    let mut r = vec!["cross-scale m".to_string()];
                    r.extend(vec![DASH.to_string(); np]);
                    r.push(DASH.into());
                    r.push(format!("not applicable: {reason}"));
                    rows.push(r);
                }
            }
            for cu in &rob.cu {
                let pairs: Vec<String> =
                    cu.pairs.iter().map(|(a, c)| format!("{a}~~{c}")).collect();
                let mut r = vec![format!("{} ({})", cu.variant, pairs.join(", "))];
                r.extend(cell_betas(&cu.cell, np));
                r.push(DASH.into());
                r.push(cell_note(&cu.cell));
                rows.push(r);
            }
            let _ = writeln!(out, "\nComparators:\n");
            table(&mut out, &header, &rows);
            if rob.cu.is_empty() {
                let _ = writeln!(out, "\nNo correlated uniquenesses requested.");
            }
        }
    }
    out
}
