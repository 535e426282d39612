//! Encoding of item metadata into the design matrix used for calibration.
//!
//! Binary indicators (reversed, polarity) are mean-centered; numeric features
//! are z-scored with divisor k−1. There is no intercept column.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{FamfError, Result};
use crate::ingest::{ItemKey, ItemMeta};

/// Base features in their fixed column order.
pub const BASE_FEATURES: [&str; 6] = [
    "reversed",
    "page",
    "order",
    "scale_width",
    "polarity",
    "length",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncodingKind {
    /// 0/1 or ±1 indicator, centered only.
    Binary,
    /// Numeric feature, centered and scaled.
    Numeric,
    /// Built from already-encoded columns, then re-standardized.
    Derived,
}

/// How one column was produced; enough to re-apply the transform to new rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodingStep {
    pub feature: String,
    pub kind: EncodingKind,
    pub center: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub z: DMatrix<f64>,
    pub feature_names: Vec<String>,
    pub encoding_log: Vec<EncodingStep>,
    pub warnings: Vec<String>,
}

impl FeatureMatrix {
    pub fn k(&self) -> usize {
        self.z.nrows()
    }

    pub fn p(&self) -> usize {
        self.z.ncols()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    /// Copy without one feature column (leave-one-feature-out).
    pub fn without(&self, name: &str) -> Option<FeatureMatrix> {
        let drop = self.column_index(name)?;
        let z = self.z.clone().remove_column(drop);
        let mut names = self.feature_names.clone();
        names.remove(drop);
        let mut log = self.encoding_log.clone();
        log.remove(drop);
        Some(FeatureMatrix {
            z,
            feature_names: names,
            encoding_log: log,
            warnings: self.warnings.clone(),
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExpansionSpec {
    pub interactions: Vec<(String, String)>,
    pub polynomial: BTreeMap<String, u32>,
}

impl ExpansionSpec {
    pub fn is_empty(&self) -> bool {
        self.interactions.is_empty() && self.polynomial.is_empty()
    }
}

fn raw_value(meta: &ItemMeta, feature: &str) -> f64 {
    match feature {
        "reversed" => meta.reversed as f64,
        "page" => meta.page as f64,
        "order" => meta.order as f64,
        "scale_width" => meta.scale_width as f64,
        "polarity" => meta.polarity as f64,
        "length" => meta.length as f64,
        _ => unreachable!("unknown base feature {feature}"),
    }
}

fn kind_of(feature: &str) -> EncodingKind {
    match feature {
        "reversed" | "polarity" => EncodingKind::Binary,
        _ => EncodingKind::Numeric,
    }
}

fn mean_sd(col: &[f64]) -> (f64, f64) {
    let k = col.len() as f64;
    let mean = col.iter().sum::<f64>() / k;
    let ss: f64 = col.iter().map(|v| (v - mean) * (v - mean)).sum();
    let sd = if col.len() > 1 {
        (ss / (k - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, sd)
}

/// Relative spread below which a column counts as constant.
const CONSTANT_TOL: f64 = 1e-12;

fn is_constant(col: &[f64]) -> bool {
    let (mean, sd) = mean_sd(col);
    sd <= CONSTANT_TOL * mean.abs().max(1.0)
}

/// Encodes all six base features in the fixed order.
pub fn encode_features(key: &ItemKey) -> Result<FeatureMatrix> {
    encode_selected(key, &BASE_FEATURES)
}

/// Encodes a subset (or reordering) of the base features.
pub fn encode_selected(key: &ItemKey, features: &[&str]) -> Result<FeatureMatrix> {
    if key.len() < 2 {
        return Err(FamfError::Input(
            "need at least two items to encode features".into(),
        ));
    }
    let mut columns = Vec::new();
    let mut names = Vec::new();
    let mut log = Vec::new();
    let mut warnings = Vec::new();
    for &feature in features {
        if !BASE_FEATURES.contains(&feature) {
            return Err(FamfError::Input(format!("unknown feature {feature:?}")));
        }
        if names.iter().any(|n| n == feature) {
            return Err(FamfError::Input(format!(
                "feature {feature:?} listed twice"
            )));
        }
        let raw: Vec<f64> = key.items.iter().map(|m| raw_value(m, feature)).collect();
        if is_constant(&raw) {
            warnings.push(format!("zero-variance feature dropped: {feature}"));
            continue;
        }
        let kind = kind_of(feature);
        let (center, sd) = mean_sd(&raw);
        let scale = match kind {
            EncodingKind::Binary => 1.0,
            _ => sd,
        };
        columns.push(raw.iter().map(|v| (v - center) / scale).collect::<Vec<_>>());
        names.push(feature.to_string());
        log.push(EncodingStep {
            feature: feature.to_string(),
            kind,
            center,
            scale,
        });
    }
    if columns.is_empty() {
        return Err(FamfError::MetadataUninformative(
            "every metadata feature is constant across items".into(),
        ));
    }
    Ok(FeatureMatrix {
        z: to_matrix(key.len(), &columns),
        feature_names: names,
        encoding_log: log,
        warnings,
    })
}

/// Re-applies a recorded base-feature transform to a (possibly different) item key.
///
/// Only base-feature steps are supported; derived columns must be rebuilt
/// with [`expand_features`].
pub fn encode_frozen(key: &ItemKey, log: &[EncodingStep]) -> Result<DMatrix<f64>> {
    let mut columns = Vec::new();
    for step in log {
        if step.kind == EncodingKind::Derived {
            return Err(FamfError::Input(format!(
                "frozen encoding cannot replay derived column {:?}",
                step.feature
            )));
        }
        columns.push(
            key.items
                .iter()
                .map(|m| (raw_value(m, &step.feature) - step.center) / step.scale)
                .collect::<Vec<_>>(),
        );
    }
    Ok(to_matrix(key.len(), &columns))
}

fn to_matrix(k: usize, columns: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(k, columns.len(), |r, c| columns[c][r])
}

fn standardize(col: &[f64]) -> Option<(Vec<f64>, f64, f64)> {
    if is_constant(col) {
        return None;
    }
    let (mean, sd) = mean_sd(col);
    Some((col.iter().map(|v| (v - mean) / sd).collect(), mean, sd))
}

/// Index of an existing column perfectly collinear with `col`.
fn duplicates(existing: &DMatrix<f64>, col: &[f64]) -> Option<usize> {
    (0..existing.ncols()).find(|&c| {
        let a = existing.column(c);
        let (ma, _) = mean_sd(a.as_slice());
        let (mb, _) = mean_sd(col);
        let mut sab = 0.0;
        let mut saa = 0.0;
        let mut sbb = 0.0;
        for (x, y) in a.iter().zip(col) {
            sab += (x - ma) * (y - mb);
            saa += (x - ma) * (x - ma);
            sbb += (y - mb) * (y - mb);
        }
        saa > 0.0 && sbb > 0.0 && (sab.abs() / (saa * sbb).sqrt() - 1.0).abs() < 1e-10
    })
}

/// Appends interaction and polynomial columns built from encoded parents.
pub fn expand_features(base: &FeatureMatrix, spec: &ExpansionSpec) -> Result<FeatureMatrix> {
    let mut out = base.clone();
    let parent = |name: &str| -> Result<Vec<f64>> {
        base.column_index(name)
            .map(|c| base.z.column(c).iter().copied().collect())
            .ok_or_else(|| {
                FamfError::Input(format!("expansion references unknown feature {name:?}"))
            })
    };
    let mut candidates: Vec<(String, Vec<f64>)> = Vec::new();
    for (a, b) in &spec.interactions {
        let ca = parent(a)?;
        let cb = parent(b)?;
        if a == b {
            out.warnings.push(format!(
                "interaction {a}:{b} rejected as a polynomial duplicate; use a polynomial term"
            ));
            continue;
        }
        candidates.push((
            format!("{a}:{b}"),
            ca.iter().zip(&cb).map(|(x, y)| x * y).collect(),
        ));
    }
    for (name, &degree) in &spec.polynomial {
        if degree < 2 {
            return Err(FamfError::Input(format!(
                "polynomial degree for {name:?} must be at least 2"
            )));
        }
        let c = parent(name)?;
        for d in 2..=degree {
            candidates.push((
                format!("{name}^{d}"),
                c.iter().map(|v| v.powi(d as i32)).collect(),
            ));
        }
    }
    for (name, col) in candidates {
        if out.feature_names.contains(&name) {
            out.warnings.push(format!(
                "expansion {name} duplicates an existing column; dropped"
            ));
            continue;
        }
        let Some((std_col, center, scale)) = standardize(&col) else {
            out.warnings
                .push(format!("expansion {name} has zero variance; dropped"));
            continue;
        };
        if let Some(dup) = duplicates(&out.z, &std_col) {
            out.warnings.push(format!(
                "expansion {name} duplicates column {}; dropped",
                out.feature_names[dup]
            ));
            continue;
        }
        let k = out.k();
        out.z = out.z.clone().insert_column(out.p(), 0.0);
        let last = out.p() - 1;
        for r in 0..k {
            out.z[(r, last)] = std_col[r];
        }
        out.feature_names.push(name.clone());
        out.encoding_log.push(EncodingStep {
            feature: name,
            kind: EncodingKind::Derived,
            center,
            scale,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key(rows: &[(u8, u32, u32, u32, u32)]) -> ItemKey {
        ItemKey::new(
            rows.iter()
                .enumerate()
                .map(|(i, &(rev, page, order, width, len))| ItemMeta {
                    item: format!("q{}", i + 1),
                    scale: "A".into(),
                    reversed: rev,
                    page,
                    order,
                    scale_width: width,
                    polarity: if rev == 1 { -1 } else { 1 },
                    length: len,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn reversed_is_centered_only() {
        let k = key(&[
            (1, 1, 1, 7, 10),
            (0, 1, 2, 7, 12),
            (0, 2, 3, 7, 9),
            (1, 2, 4, 7, 14),
        ]);
        let f = encode_features(&k).unwrap();
        let c = f.column_index("reversed").unwrap();
        assert_eq!(f.z.column(c).as_slice(), &[0.5, -0.5, -0.5, 0.5]);
    }

    #[test]
    fn order_is_z_scored_with_k_minus_one() {
        let k = key(&[(1, 1, 1, 5, 10), (0, 1, 2, 7, 12), (0, 2, 3, 7, 9)]);
        let f = encode_features(&k).unwrap();
        let c = f.column_index("order").unwrap();
        let col: Vec<f64> = f.z.column(c).iter().copied().collect();
        for (got, want) in col.iter().zip([-1.0, 0.0, 1.0]) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn constant_feature_is_dropped_with_warning() {
        let k = key(&[
            (1, 1, 1, 7, 10),
            (0, 1, 2, 7, 12),
            (0, 2, 3, 7, 9),
            (1, 2, 4, 7, 14),
        ]);
        let f = encode_features(&k).unwrap();
        assert!(f.column_index("scale_width").is_none());
        assert!(f.warnings.iter().any(|w| w.contains("scale_width")));
        assert_eq!(
            f.feature_names,
            ["reversed", "page", "order", "polarity", "length"]
        );
    }

    #[test]
    fn all_constant_is_uninformative() {
        let k = ItemKey::new(
            (1..=3)
                .map(|i| ItemMeta {
                    item: format!("q{i}"),
                    scale: "A".into(),
                    reversed: 0,
                    page: 1,
                    order: i,
                    scale_width: 5,
                    polarity: 1,
                    length: 8,
                })
                .collect(),
        )
        .unwrap();
        let err = encode_selected(&k, &["reversed", "page", "scale_width"]).unwrap_err();
        assert!(matches!(err, FamfError::MetadataUninformative(_)));
    }

    #[test]
    fn columns_are_centered_and_numeric_scaled() {
        let k = key(&[
            (1, 1, 1, 5, 10),
            (0, 1, 2, 7, 12),
            (0, 2, 3, 7, 9),
            (1, 2, 4, 5, 14),
            (0, 3, 5, 7, 20),
        ]);
        let f = encode_features(&k).unwrap();
        for (c, step) in f.encoding_log.iter().enumerate() {
            let (mean, sd) = mean_sd(f.z.column(c).as_slice());
            assert!(mean.abs() < 1e-12);
            if step.kind == EncodingKind::Numeric {
                assert!((sd - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn polynomial_order_squared() {
        let k = key(&[(1, 1, 1, 5, 10), (0, 1, 2, 7, 12), (0, 2, 3, 7, 9)]);
        let base = encode_selected(&k, &["order"]).unwrap();
        let spec = ExpansionSpec {
            polynomial: [("order".to_string(), 2)].into_iter().collect(),
            ..Default::default()
        };
        let f = expand_features(&base, &spec).unwrap();
        assert_eq!(f.feature_names, ["order", "order^2"]);
        // [1,0,1] → centered [1/3,−2/3,1/3], sd = sqrt((1/9+4/9+1/9)/2) = 1/√3.
        let sd = (1.0f64 / 3.0).sqrt();
        let want = [1.0 / 3.0 / sd, -2.0 / 3.0 / sd, 1.0 / 3.0 / sd];
        for (got, want) in f.z.column(1).iter().zip(want) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn interaction_is_restandardized_product() {
        let k = key(&[
            (1, 1, 1, 5, 10),
            (0, 1, 2, 7, 12),
            (0, 2, 3, 7, 9),
            (1, 2, 4, 5, 14),
            (1, 3, 5, 7, 20),
        ]);
        let base = encode_features(&k).unwrap();
        let spec = ExpansionSpec {
            interactions: vec![("reversed".into(), "page".into())],
            ..Default::default()
        };
        let f = expand_features(&base, &spec).unwrap();
        let a = base.column_index("reversed").unwrap();
        let b = base.column_index("page").unwrap();
        let prod: Vec<f64> = (0..5).map(|r| base.z[(r, a)] * base.z[(r, b)]).collect();
        let (std_col, _, _) = standardize(&prod).unwrap();
        let c = f.column_index("reversed:page").unwrap();
        for (got, want) in f.z.column(c).iter().zip(std_col) {
            assert!((got - want).abs() < 1e-14);
        }
    }

    #[test]
    fn self_interaction_rejected() {
        let k = key(&[(1, 1, 1, 5, 10), (0, 1, 2, 7, 12), (0, 2, 3, 7, 9)]);
        let base = encode_features(&k).unwrap();
        let spec = ExpansionSpec {
            interactions: vec![("order".into(), "order".into())],
            ..Default::default()
        };
        let f = expand_features(&base, &spec).unwrap();
        assert_eq!(f.p(), base.p());
        assert!(f
            .warnings
            .iter()
            .any(|w| w.contains("polynomial duplicate")));
    }

    #[test]
    fn duplicate_expansion_dropped() {
        // reversed:polarity is constant for reversed∈{0,1}, polarity = ±1 mirrors it.
        let k = key(&[
            (1, 1, 1, 5, 10),
            (0, 1, 2, 7, 12),
            (0, 2, 3, 7, 9),
            (1, 2, 4, 5, 11),
        ]);
        let base = encode_features(&k).unwrap();
        let spec = ExpansionSpec {
            interactions: vec![("reversed".into(), "polarity".into())],
            polynomial: [("reversed".to_string(), 2)].into_iter().collect(),
        };
        let f = expand_features(&base, &spec).unwrap();
        assert_eq!(f.p(), base.p());
        assert_eq!(f.warnings.len(), base.warnings.len() + 2);
    }

    #[test]
    fn frozen_encoding_replays_transform() {
        let k = key(&[
            (1, 1, 1, 5, 10),
            (0, 1, 2, 7, 12),
            (0, 2, 3, 7, 9),
            (1, 2, 4, 5, 11),
        ]);
        let f = encode_features(&k).unwrap();
        let z = encode_frozen(&k, &f.encoding_log).unwrap();
        assert!((z - &f.z).amax() < 1e-15);
        let mut changed = k.clone();
        changed.items[3].length = 30;
        let z2 = encode_frozen(&changed, &f.encoding_log).unwrap();
        for r in 0..3 {
            assert_eq!(z2.row(r), f.z.row(r));
        }
    }

    #[test]
    fn encoding_is_deterministic() {
        let k = key(&[
            (1, 1, 1, 5, 10),
            (0, 1, 2, 7, 12),
            (0, 2, 3, 7, 9),
            (1, 2, 4, 5, 11),
        ]);
        assert_eq!(encode_features(&k).unwrap(), encode_features(&k).unwrap());
    }
}
