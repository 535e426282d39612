//! Loading and validation of responses, item metadata, and the model description.
//!
//! Item order in the item key is the canonical order used everywhere downstream;
//! response columns are re-aligned to it on load.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs;
use std::path::Path;

use indexmap::IndexMap;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{FamfError, Result};
use crate::linalg;

pub const ITEMKEY_HEADER: [&str; 8] = [
    "item",
    "scale",
    "reversed",
    "page",
    "order",
    "scale_width",
    "polarity",
    "length",
];

/// Respondents × items after listwise deletion.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseMatrix {
    pub values: DMatrix<f64>,
    pub item_names: Vec<String>,
    pub dropped_rows: usize,
}

impl ResponseMatrix {
    pub fn new(values: DMatrix<f64>, item_names: Vec<String>) -> Result<Self> {
        if values.ncols() != item_names.len() {
            return Err(FamfError::Input(format!(
                "{} columns but {} item names",
                values.ncols(),
                item_names.len()
            )));
        }
        Ok(Self {
            values,
            item_names,
            dropped_rows: 0,
        })
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn k(&self) -> usize {
        self.values.ncols()
    }

    /// Rows selected by index, in the given order (used by the respondent bootstrap).
    pub fn select_rows(&self, rows: &[usize]) -> ResponseMatrix {
        let k = self.k();
        let values = DMatrix::from_fn(rows.len(), k, |r, c| self.values[(rows[r], c)]);
        ResponseMatrix {
            values,
            item_names: self.item_names.clone(),
            dropped_rows: 0,
        }
    }
}

/// Design metadata for one item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemMeta {
    pub item: String,
    pub scale: String,
    pub reversed: u8,
    pub page: u32,
    pub order: u32,
    pub scale_width: u32,
    pub polarity: i8,
    pub length: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ItemKey {
    pub items: Vec<ItemMeta>,
}

impl ItemKey {
    pub fn new(items: Vec<ItemMeta>) -> Result<Self> {
        let key = Self { items };
        key.check()?;
        Ok(key)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.items.iter().map(|m| m.item.clone()).collect()
    }

    pub fn scales(&self) -> Vec<&str> {
        self.items.iter().map(|m| m.scale.as_str()).collect()
    }

    fn check(&self) -> Result<()> {
        let mut names = HashSet::new();
        let mut orders = HashSet::new();
        for m in &self.items {
            if !names.insert(m.item.as_str()) {
                return Err(FamfError::Input(format!(
                    "duplicate item {:?} in item key",
                    m.item
                )));
            }
            if m.reversed > 1 {
                return Err(FamfError::Input(format!(
                    "item {}: reversed must be 0 or 1",
                    m.item
                )));
            }
            if m.polarity != 1 && m.polarity != -1 {
                return Err(FamfError::Input(format!(
                    "item {}: polarity must be +1 or -1",
                    m.item
                )));
            }
            if m.page == 0 || m.order == 0 || m.scale_width == 0 || m.length == 0 {
                return Err(FamfError::Input(format!(
                    "item {}: page, order, scale_width and length must be positive",
                    m.item
                )));
            }
            if !orders.insert(m.order) {
                return Err(FamfError::Input(format!(
                    "order value {} is not unique",
                    m.order
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Identification {
    #[default]
    UnitVariance,
    Marker,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Regression {
    pub outcome: String,
    pub predictors: Vec<String>,
}

/// Trait → item pattern, structural paths, and freed residual covariances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub traits: IndexMap<String, Vec<String>>,
    #[serde(default)]
    pub regressions: Vec<Regression>,
    #[serde(default)]
    pub residual_covariances: Vec<(String, String)>,
    #[serde(default)]
    pub identification: Identification,
}

impl ModelSpec {
    pub fn trait_names(&self) -> Vec<String> {
        self.traits.keys().cloned().collect()
    }

    /// Trait index for every item, in the given item order.
    pub fn item_traits(&self, item_names: &[String]) -> Result<Vec<usize>> {
        let mut lookup = HashMap::new();
        for (t, items) in self.traits.values().enumerate() {
            for item in items {
                if lookup.insert(item.as_str(), t).is_some() {
                    return Err(FamfError::Input(format!(
                        "item {item:?} assigned to more than one trait"
                    )));
                }
            }
        }
        item_names
            .iter()
            .map(|name| {
                lookup.get(name.as_str()).copied().ok_or_else(|| {
                    FamfError::Input(format!("item {name:?} is not assigned to any trait"))
                })
            })
            .collect()
    }

    /// Checks internal consistency against an item list.
    pub fn check(&self, item_names: &[String]) -> Result<()> {
        if self.traits.is_empty() {
            return Err(FamfError::Input("model has no traits".into()));
        }
        let known: HashSet<&str> = item_names.iter().map(String::as_str).collect();
        for items in self.traits.values() {
            if items.is_empty() {
                return Err(FamfError::Input("trait with no items".into()));
            }
            for item in items {
                if !known.contains(item.as_str()) {
                    return Err(FamfError::UnknownItem(item.clone()));
                }
            }
        }
        self.item_traits(item_names)?;
        let traits: HashSet<&str> = self.traits.keys().map(String::as_str).collect();
        for r in &self.regressions {
            for name in std::iter::once(&r.outcome).chain(r.predictors.iter()) {
                if !traits.contains(name.as_str()) {
                    return Err(FamfError::Input(format!(
                        "regression references unknown trait {name:?}"
                    )));
                }
            }
            if r.predictors.contains(&r.outcome) {
                return Err(FamfError::Input(format!(
                    "trait {:?} regressed on itself",
                    r.outcome
                )));
            }
        }
        self.regression_order()?;
        let mut seen = BTreeSet::new();
        for (a, b) in &self.residual_covariances {
            if a == b {
                return Err(FamfError::Input(format!(
                    "residual covariance ({a},{b}) is diagonal"
                )));
            }
            for name in [a, b] {
                if !known.contains(name.as_str()) {
                    return Err(FamfError::UnknownItem(name.clone()));
                }
            }
            let key = if a < b { (a, b) } else { (b, a) };
            if !seen.insert(key) {
                return Err(FamfError::Input(format!(
                    "residual covariance ({a},{b}) listed twice"
                )));
            }
        }
        Ok(())
    }

    /// Topological order of traits under the regressions; errors on cycles.
    pub fn regression_order(&self) -> Result<Vec<usize>> {
        let names = self.trait_names();
        let index: HashMap<&str, usize> = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i))
            .collect();
        let q = names.len();
        let mut parents = vec![Vec::new(); q];
        for r in &self.regressions {
            let o = index[r.outcome.as_str()];
            for p in &r.predictors {
                parents[o].push(index[p.as_str()]);
            }
        }
        let mut order = Vec::with_capacity(q);
        let mut state = vec![0u8; q];
        fn visit(
            v: usize,
            parents: &[Vec<usize>],
            state: &mut [u8],
            order: &mut Vec<usize>,
        ) -> bool {
            match state[v] {
                2 => return true,
                1 => return false,
                _ => {}
            }
            state[v] = 1;
            for &p in &parents[v] {
                if !visit(p, parents, state, order) {
                    return false;
                }
            }
            state[v] = 2;
            order.push(v);
            true
        }
        for v in 0..q {
            if !visit(v, &parents, &mut state, &mut order) {
                return Err(FamfError::Input("regressions contain a cycle".into()));
            }
        }
        Ok(order)
    }
}

/// Sample covariance (divisor n−1) and means.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSummary {
    pub cov: DMatrix<f64>,
    pub means: DVector<f64>,
    pub n: usize,
}

impl MomentSummary {
    /// Builds a summary directly from a covariance matrix (population fixtures, simulation).
    pub fn from_covariance(cov: DMatrix<f64>, n: usize) -> Result<Self> {
        let k = cov.nrows();
        let mut cov = cov;
        linalg::symmetrize(&mut cov);
        if linalg::cholesky(&cov).is_none() {
            return Err(FamfError::NotPositiveDefinite("sample covariance".into()));
        }
        Ok(Self {
            cov,
            means: DVector::zeros(k),
            n,
        })
    }

    pub fn k(&self) -> usize {
        self.cov.nrows()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationIssue {
    pub severity: Severity,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
    pub dropped_rows: usize,
}

impl ValidationReport {
    pub fn warnings(&self) -> impl Iterator<Item = &str> {
        self.issues
            .iter()
            .filter(|i| i.severity == Severity::Warning)
            .map(|i| i.message.as_str())
    }

    pub fn has_errors(&self) -> bool {
        self.issues.iter().any(|i| i.severity == Severity::Error)
    }

    fn warn(&mut self, message: impl Into<String>) {
        self.issues.push(ValidationIssue {
            severity: Severity::Warning,
            message: message.into(),
        });
    }

    fn error(&mut self, message: impl Into<String>) {
        self.issues.push(ValidationIssue {
            severity: Severity::Error,
            message: message.into(),
        });
    }
}

/// Parses a responses CSV: header row of item names, empty cell = missing.
pub fn read_responses(path: &Path) -> Result<ResponseMatrix> {
    let text = fs::read_to_string(path).map_err(|source| FamfError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_responses(&text).map_err(|e| match e {
        FamfError::Csv { source, .. } => FamfError::Csv {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    })
}

pub fn parse_responses(text: &str) -> Result<ResponseMatrix> {
    let csv_err = |source| FamfError::Csv {
        path: "<responses>".into(),
        source,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = rdr
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(str::to_string)
        .collect();
    if header.is_empty() || header.iter().any(String::is_empty) {
        return Err(FamfError::Input(
            "responses header missing or has blank names".into(),
        ));
    }
    let mut seen = HashSet::new();
    for h in &header {
        if !seen.insert(h) {
            return Err(FamfError::Input(format!(
                "duplicate column {h:?} in responses"
            )));
        }
    }
    let k = header.len();
    let mut data = Vec::new();
    let mut rows = 0;
    let mut dropped = 0;
    for (r, record) in rdr.records().enumerate() {
        let record = record.map_err(csv_err)?;
        if record.len() != k {
            return Err(FamfError::Input(format!(
                "row {} has {} cells, expected {k}",
                r + 2,
                record.len()
            )));
        }
        let mut row = Vec::with_capacity(k);
        let mut missing = false;
        for (c, cell) in record.iter().enumerate() {
            if cell.is_empty() || cell.eq_ignore_ascii_case("na") {
                missing = true;
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| FamfError::NonNumeric {
                row: r + 2,
                column: header[c].clone(),
                value: cell.to_string(),
            })?;
            if !v.is_finite() {
                return Err(FamfError::NonNumeric {
                    row: r + 2,
                    column: header[c].clone(),
                    value: cell.to_string(),
                });
            }
            row.push(v);
        }
        if missing {
            dropped += 1;
        } else {
            data.extend(row);
            rows += 1;
        }
    }
    Ok(ResponseMatrix {
        values: DMatrix::from_row_slice(rows, k, &data),
        item_names: header,
        dropped_rows: dropped,
    })
}

pub fn read_itemkey(path: &Path) -> Result<ItemKey> {
    let text = fs::read_to_string(path).map_err(|source| FamfError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_itemkey(&text).map_err(|e| match e {
        FamfError::Csv { source, .. } => FamfError::Csv {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    })
}

pub fn parse_itemkey(text: &str) -> Result<ItemKey> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = rdr
        .headers()
        .map_err(|source| FamfError::Csv {
            path: "<itemkey>".into(),
            source,
        })?
        .iter()
        .map(str::to_string)
        .collect();
    if header != ITEMKEY_HEADER {
        return Err(FamfError::Input(format!(
            "item key header must be `{}`, found `{}`",
            ITEMKEY_HEADER.join(","),
            header.join(",")
        )));
    }
    let mut items = Vec::new();
    for row in rdr.deserialize::<ItemMeta>() {
        items.push(row.map_err(|source| FamfError::Csv {
            path: "<itemkey>".into(),
            source,
        })?);
    }
    ItemKey::new(items)
}

pub fn read_model(path: &Path) -> Result<ModelSpec> {
    let text = fs::read_to_string(path).map_err(|source| FamfError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| FamfError::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads all three inputs and aligns them on the item key order.
pub fn load_inputs(
    responses_path: &Path,
    itemkey_path: &Path,
    model_path: &Path,
) -> Result<(ResponseMatrix, ItemKey, ModelSpec)> {
    let responses = read_responses(responses_path)?;
    let key = read_itemkey(itemkey_path)?;
    let model = read_model(model_path)?;
    align_inputs(responses, key, model)
}

/// Re-orders response columns to item-key order and cross-checks all three inputs.
pub fn align_inputs(
    responses: ResponseMatrix,
    key: ItemKey,
    model: ModelSpec,
) -> Result<(ResponseMatrix, ItemKey, ModelSpec)> {
    let columns: HashMap<&str, usize> = responses
        .item_names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i))
        .collect();
    for m in &key.items {
        if !columns.contains_key(m.item.as_str()) {
            return Err(FamfError::UnknownItem(m.item.clone()));
        }
    }
    if key.len() != responses.k() {
        let keyed: HashSet<&str> = key.items.iter().map(|m| m.item.as_str()).collect();
        let extra: Vec<&str> = responses
            .item_names
            .iter()
            .map(String::as_str)
            .filter(|n| !keyed.contains(n))
            .collect();
        return Err(FamfError::Input(format!(
            "response columns missing from item key: {}",
            extra.join(", ")
        )));
    }
    let names = key.names();
    model.check(&names)?;
    let perm: Vec<usize> = names.iter().map(|n| columns[n.as_str()]).collect();
    let n = responses.n();
    let values = DMatrix::from_fn(n, perm.len(), |r, c| responses.values[(r, perm[c])]);
    let aligned = ResponseMatrix {
        values,
        item_names: names,
        dropped_rows: responses.dropped_rows,
    };
    if aligned.n() < aligned.k() + 1 {
        return Err(FamfError::Input(format!(
            "{} complete rows for {} items; need at least k+1",
            aligned.n(),
            aligned.k()
        )));
    }
    sample_moments(&aligned)?;
    Ok((aligned, key, model))
}

/// Non-fatal guidance checks plus structural errors.
pub fn validate_inputs(
    responses: &ResponseMatrix,
    key: &ItemKey,
    model: &ModelSpec,
) -> ValidationReport {
    let mut report = ValidationReport {
        dropped_rows: responses.dropped_rows,
        ..Default::default()
    };
    if responses.item_names != key.names() {
        report.error("response columns are not aligned with the item key");
    }
    if let Err(e) = model.check(&key.names()) {
        report.error(e.to_string());
    }
    if responses.n() < 300 {
        report.warn(format!("sample below 300 (n = {})", responses.n()));
    }
    let k = key.len();
    if !(20..=40).contains(&k) {
        report.warn(format!("item count {k} outside the 20–40 range"));
    }
    let features: [(&str, fn(&ItemMeta) -> f64); 6] = [
        ("reversed", |m| m.reversed as f64),
        ("page", |m| m.page as f64),
        ("order", |m| m.order as f64),
        ("scale_width", |m| m.scale_width as f64),
        ("polarity", |m| m.polarity as f64),
        ("length", |m| m.length as f64),
    ];
    for (name, get) in features {
        let first = key.items.first().map(get);
        if key.items.iter().all(|m| Some(get(m)) == first) {
            report.warn(format!("zero-variance feature: {name}"));
        }
    }
    if responses.dropped_rows > 0 {
        report.warn(format!(
            "listwise deletion removed {} rows",
            responses.dropped_rows
        ));
    }
    report
}

/// Sample covariance with divisor n−1; errors on zero variance or a non-PD result.
pub fn sample_moments(responses: &ResponseMatrix) -> Result<MomentSummary> {
    let n = responses.n();
    let k = responses.k();
    if n < 2 {
        return Err(FamfError::Input(format!("need at least 2 rows, found {n}")));
    }
    let means = DVector::from_fn(k, |c, _| responses.values.column(c).mean());
    let mut centered = responses.values.clone();
    for c in 0..k {
        let m = means[c];
        centered.column_mut(c).iter_mut().for_each(|v| *v -= m);
    }
    let mut cov = centered.transpose() * &centered / (n as f64 - 1.0);
    linalg::symmetrize(&mut cov);
    for (c, name) in responses.item_names.iter().enumerate() {
        if cov[(c, c)] <= 0.0 {
            return Err(FamfError::ZeroVariance(format!(
                "column {name:?} is constant"
            )));
        }
    }
    if linalg::cholesky(&cov).is_none() {
        return Err(FamfError::NotPositiveDefinite(
            "sample covariance after listwise deletion".into(),
        ));
    }
    Ok(MomentSummary { cov, means, n })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key3() -> ItemKey {
        let rows = [
            ("a", "T", 0, 1, 1, 5, 1, 10),
            ("b", "T", 1, 1, 2, 5, -1, 12),
            ("c", "T", 0, 2, 3, 7, 1, 8),
        ];
        ItemKey::new(
            rows.iter()
                .map(|r| ItemMeta {
                    item: r.0.into(),
                    scale: r.1.into(),
                    reversed: r.2,
                    page: r.3,
                    order: r.4,
                    scale_width: r.5,
                    polarity: r.6,
                    length: r.7,
                })
                .collect(),
        )
        .unwrap()
    }

    fn model3() -> ModelSpec {
        serde_json::from_str(r#"{"traits": {"T": ["a", "b", "c"]}}"#).unwrap()
    }

    const CLEAN: &str = "a,b,c\n1,2,3\n2,2,4\n3,4,4\n4,3,5\n5,5,7\n2,1,2\n";

    #[test]
    fn clean_input_aligns() {
        let r = parse_responses(CLEAN).unwrap();
        let (r, key, _) = align_inputs(r, key3(), model3()).unwrap();
        assert_eq!(r.dropped_rows, 0);
        assert_eq!(r.item_names, key.names());
        assert_eq!(r.n(), 6);
    }

    #[test]
    fn empty_cell_drops_row() {
        let text = "a,b,c\n1,2,3\n2,,4\n3,4,4\n4,3,5\n5,5,7\n2,1,2\n";
        let r = parse_responses(text).unwrap();
        assert_eq!(r.dropped_rows, 1);
        assert_eq!(r.n() + r.dropped_rows, 6);
    }

    #[test]
    fn columns_are_reordered_to_key_order() {
        let text = "c,a,b\n3,1,2\n4,2,2\n4,3,4\n5,4,3\n7,5,5\n2,2,1\n";
        let shuffled = parse_responses(text).unwrap();
        let (shuffled, _, _) = align_inputs(shuffled, key3(), model3()).unwrap();
        let (clean, _, _) =
            align_inputs(parse_responses(CLEAN).unwrap(), key3(), model3()).unwrap();
        assert_eq!(shuffled.values, clean.values);
    }

    #[test]
    fn key_item_missing_from_data() {
        let mut key = key3();
        key.items[2].item = "q9".into();
        let r = parse_responses(CLEAN).unwrap();
        let err = align_inputs(r, key, model3()).unwrap_err();
        assert!(err.to_string().contains("unknown item"), "{err}");
    }

    #[test]
    fn non_numeric_cell_is_an_error() {
        let err = parse_responses("a,b\n1,x\n").unwrap_err();
        assert!(matches!(err, FamfError::NonNumeric { .. }));
    }

    #[test]
    fn itemkey_header_must_be_exact() {
        let err =
            parse_itemkey("item,scale,rev,page,order,scale_width,polarity,length\n").unwrap_err();
        assert!(err.to_string().contains("header"));
        let ok = parse_itemkey(
            "item,scale,reversed,page,order,scale_width,polarity,length\na,T,1,1,1,5,-1,9\n",
        )
        .unwrap();
        assert_eq!(ok.items[0].polarity, -1);
    }

    #[test]
    fn itemkey_rejects_bad_polarity_and_duplicate_order() {
        let mut key = key3();
        key.items[0].polarity = 0;
        assert!(ItemKey::new(key.items).is_err());
        let mut key = key3();
        key.items[1].order = 1;
        assert!(ItemKey::new(key.items).is_err());
    }

    #[test]
    fn collinear_rows_are_singular() {
        let r = ResponseMatrix::new(
            DMatrix::from_row_slice(4, 2, &[1.0, 2.0, 2.0, 3.0, 3.0, 4.0, 4.0, 5.0]),
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        let err = sample_moments(&r).unwrap_err();
        assert!(matches!(err, FamfError::NotPositiveDefinite(_)));
        // S = [[5/3, 5/3], [5/3, 5/3]] before the PD check.
        let x = &r.values;
        let c0 = x.column(0) - DVector::repeat(4, 2.5);
        let c1 = x.column(1) - DVector::repeat(4, 3.5);
        assert!((c0.dot(&c1) / 3.0 - 5.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn anticorrelated_columns_fail_pd() {
        let r = ResponseMatrix::new(
            DMatrix::from_row_slice(3, 2, &[1.0, -1.0, 2.0, -2.0, 3.0, -3.0]),
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        assert!(matches!(
            sample_moments(&r).unwrap_err(),
            FamfError::NotPositiveDefinite(_)
        ));
    }

    #[test]
    fn duplicated_rows_have_zero_variance() {
        let r = ResponseMatrix::new(
            DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0]),
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        assert!(matches!(
            sample_moments(&r).unwrap_err(),
            FamfError::ZeroVariance(_)
        ));
    }

    #[test]
    fn validation_warnings() {
        let r = parse_responses(CLEAN).unwrap();
        let (r, mut key, model) = align_inputs(r, key3(), model3()).unwrap();
        let report = validate_inputs(&r, &key, &model);
        assert!(report.warnings().any(|w| w.starts_with("sample below 300")));
        assert!(report.warnings().any(|w| w.contains("outside the 20–40")));
        for m in &mut key.items {
            m.reversed = 0;
        }
        let report = validate_inputs(&r, &key, &model);
        assert!(report
            .warnings()
            .any(|w| w == "zero-variance feature: reversed"));
        assert!(!report.has_errors());
    }

    #[test]
    fn model_json_defaults_and_cycles() {
        let m: ModelSpec = serde_json::from_str(
            r#"{"traits": {"A": ["a"], "B": ["b"]},
                "regressions": [{"outcome": "B", "predictors": ["A"]}, {"outcome": "A", "predictors": ["B"]}]}"#,
        )
        .unwrap();
        assert_eq!(m.identification, Identification::UnitVariance);
        assert!(m.regression_order().is_err());
    }
}
