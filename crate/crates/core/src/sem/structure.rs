use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{FamfError, Result};
use crate::ingest::{Identification, ModelSpec};

/// Name of the method latent when present.
pub const METHOD_LATENT: &str = "M";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Block {
    Lambda,
    Beta,
    Psi,
    Theta,
}

/// One matrix entry filled by a free parameter, scaled by `coef`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cell {
    pub block: Block,
    pub row: usize,
    pub col: usize,
    pub coef: f64,
}

impl Cell {
    fn new(block: Block, row: usize, col: usize) -> Self {
        Self {
            block,
            row,
            col,
            coef: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    Loading,
    Regression,
    LatentCovariance,
    LatentVariance,
    Uniqueness,
    ResidualCovariance,
    /// Shared scale on a fixed method-loading pattern (CLF loading, or a free FAMF scale).
    MethodScale,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FreeParam {
    pub label: String,
    pub kind: ParamKind,
    pub cells: Vec<Cell>,
}

/// How the method factor enters the structure.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodPart {
    None,
    /// Loadings fixed to `weights`; Var(M) = 1; zero free parameters.
    Fixed {
        weights: Vec<f64>,
    },
    /// Loadings `c · pattern` with one free scale `c`; Var(M) = 1.
    Scaled {
        pattern: Vec<f64>,
    },
}

/// Free/fixed patterns of the LISREL-style matrices Λ, B, Ψ, Θ.
///
/// `lambda`, `beta`, `psi` and `theta` hold the fixed values; free cells are
/// overwritten from the parameter vector by [`SemStructure::matrices`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SemStructure {
    pub item_names: Vec<String>,
    pub latent_names: Vec<String>,
    pub n_traits: usize,
    pub identification: Identification,
    #[serde(skip)]
    pub lambda: DMatrix<f64>,
    #[serde(skip)]
    pub beta: DMatrix<f64>,
    #[serde(skip)]
    pub psi: DMatrix<f64>,
    #[serde(skip)]
    pub theta: DMatrix<f64>,
    pub params: Vec<FreeParam>,
    pub method: MethodPart,
}

impl SemStructure {
    /// Trait-only structure from a model description, items in `item_names` order.
    pub fn from_model(spec: &ModelSpec, item_names: &[String]) -> Result<Self> {
        spec.check(item_names)?;
        let k = item_names.len();
        let traits = spec.trait_names();
        let q = traits.len();
        let item_index: HashMap<&str, usize> = item_names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i))
            .collect();
        let trait_index: HashMap<&str, usize> = traits
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i))
            .collect();

        let mut s = Self {
            item_names: item_names.to_vec(),
            latent_names: traits.clone(),
            n_traits: q,
            identification: spec.identification,
            lambda: DMatrix::zeros(k, q),
            beta: DMatrix::zeros(q, q),
            psi: DMatrix::zeros(q, q),
            theta: DMatrix::zeros(k, k),
            params: Vec::new(),
            method: MethodPart::None,
        };

        for (t, (name, items)) in spec.traits.iter().enumerate() {
            for (pos, item) in items.iter().enumerate() {
                let i = item_index[item.as_str()];
                if spec.identification == Identification::Marker && pos == 0 {
                    s.lambda[(i, t)] = 1.0;
                } else {
                    s.params.push(FreeParam {
                        label: format!("{name}=~{item}"),
                        kind: ParamKind::Loading,
                        cells: vec![Cell::new(Block::Lambda, i, t)],
                    });
                }
            }
        }

        let mut endogenous = vec![false; q];
        for r in &spec.regressions {
            let o = trait_index[r.outcome.as_str()];
            endogenous[o] = true;
            for p in &r.predictors {
                let pi = trait_index[p.as_str()];
                s.params.push(FreeParam {
                    label: format!("{}~{}", r.outcome, p),
                    kind: ParamKind::Regression,
                    cells: vec![Cell::new(Block::Beta, o, pi)],
                });
            }
        }

        for t in 0..q {
            match spec.identification {
                Identification::UnitVariance => s.psi[(t, t)] = 1.0,
                Identification::Marker => s.params.push(FreeParam {
                    label: format!("{0}~~{0}", traits[t]),
                    kind: ParamKind::LatentVariance,
                    cells: vec![Cell::new(Block::Psi, t, t)],
                }),
            }
        }
        // Exogenous traits covary freely; disturbances of endogenous traits are uncorrelated.
        for a in 0..q {
            for b in (a + 1)..q {
                if !endogenous[a] && !endogenous[b] {
                    s.params.push(FreeParam {
                        label: format!("{}~~{}", traits[a], traits[b]),
                        kind: ParamKind::LatentCovariance,
                        cells: vec![Cell::new(Block::Psi, a, b), Cell::new(Block::Psi, b, a)],
                    });
                }
            }
        }

        for (i, item) in item_names.iter().enumerate() {
            s.params.push(FreeParam {
                label: format!("{item}~~{item}"),
                kind: ParamKind::Uniqueness,
                cells: vec![Cell::new(Block::Theta, i, i)],
            });
        }
        for (a, b) in &spec.residual_covariances {
            s = s.free_residual_covariance(item_index[a.as_str()], item_index[b.as_str()])?;
        }
        Ok(s)
    }

    /// Independence model: Λ = 0, Θ diagonal free.
    pub fn independence(item_names: &[String]) -> Self {
        let k = item_names.len();
        Self {
            item_names: item_names.to_vec(),
            latent_names: Vec::new(),
            n_traits: 0,
            identification: Identification::UnitVariance,
            lambda: DMatrix::zeros(k, 0),
            beta: DMatrix::zeros(0, 0),
            psi: DMatrix::zeros(0, 0),
            theta: DMatrix::zeros(k, k),
            params: item_names
                .iter()
                .enumerate()
                .map(|(i, item)| FreeParam {
                    label: format!("{item}~~{item}"),
                    kind: ParamKind::Uniqueness,
                    cells: vec![Cell::new(Block::Theta, i, i)],
                })
                .collect(),
            method: MethodPart::None,
        }
    }

    pub fn k(&self) -> usize {
        self.item_names.len()
    }

    /// Number of latents including the method factor.
    pub fn m(&self) -> usize {
        self.latent_names.len()
    }

    pub fn n_free(&self) -> usize {
        self.params.len()
    }

    pub fn method_enabled(&self) -> bool {
        !matches!(self.method, MethodPart::None)
    }

    /// Distinct moments minus free parameters.
    pub fn df(&self) -> i64 {
        let k = self.k() as i64;
        k * (k + 1) / 2 - self.n_free() as i64
    }

    fn add_method_latent(&self) -> Result<Self> {
        if self.method_enabled() {
            return Err(FamfError::Input(
                "structure already has a method factor".into(),
            ));
        }
        let k = self.k();
        let m = self.m();
        let mut s = self.clone();
        s.latent_names.push(METHOD_LATENT.to_string());
        s.lambda = s.lambda.clone().insert_column(m, 0.0);
        s.beta = s.beta.clone().insert_column(m, 0.0).insert_row(m, 0.0);
        s.psi = s.psi.clone().insert_column(m, 0.0).insert_row(m, 0.0);
        s.psi[(m, m)] = 1.0;
        debug_assert_eq!(s.lambda.nrows(), k);
        Ok(s)
    }

    /// Adds an orthogonal unit-variance method factor with loadings fixed to `weights`.
    pub fn with_fixed_method(&self, weights: &[f64]) -> Result<Self> {
        self.check_weights(weights)?;
        let mut s = self.add_method_latent()?;
        let col = s.m() - 1;
        for (i, &w) in weights.iter().enumerate() {
            s.lambda[(i, col)] = w;
        }
        s.method = MethodPart::Fixed {
            weights: weights.to_vec(),
        };
        Ok(s)
    }

    /// Adds an orthogonal unit-variance method factor with loadings `c · pattern`, `c` free.
    ///
    /// With an all-ones pattern this is the common latent factor (equal loadings).
    pub fn with_scaled_method(&self, pattern: &[f64], label: &str) -> Result<Self> {
        self.check_weights(pattern)?;
        let mut s = self.add_method_latent()?;
        let col = s.m() - 1;
        s.params.push(FreeParam {
            label: label.to_string(),
            kind: ParamKind::MethodScale,
            cells: pattern
                .iter()
                .enumerate()
                .filter(|(_, &w)| w != 0.0)
                .map(|(i, &w)| Cell {
                    block: Block::Lambda,
                    row: i,
                    col,
                    coef: w,
                })
                .collect(),
        });
        s.method = MethodPart::Scaled {
            pattern: pattern.to_vec(),
        };
        Ok(s)
    }

    fn check_weights(&self, weights: &[f64]) -> Result<()> {
        if weights.len() != self.k() {
            return Err(FamfError::Input(format!(
                "{} method weights for {} items",
                weights.len(),
                self.k()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(FamfError::Input("method weights must be finite".into()));
        }
        Ok(())
    }

    /// Frees the residual covariance between items `i` and `j` (0-based).
    pub fn free_residual_covariance(&self, i: usize, j: usize) -> Result<Self> {
        let k = self.k();
        if i >= k || j >= k {
            return Err(FamfError::Input(format!(
                "item index out of range ({i},{j})"
            )));
        }
        if i == j {
            return Err(FamfError::Input(format!(
                "diagonal already free: ({},{})",
                self.item_names[i], self.item_names[j]
            )));
        }
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        let exists = self.params.iter().any(|p| {
            p.kind == ParamKind::ResidualCovariance
                && p.cells.iter().any(|c| c.row == a && c.col == b)
        });
        if exists {
            return Err(FamfError::Input(format!(
                "residual covariance ({},{}) is already free",
                self.item_names[a], self.item_names[b]
            )));
        }
        let mut s = self.clone();
        s.params.push(FreeParam {
            label: format!("{}~~{}", self.item_names[a], self.item_names[b]),
            kind: ParamKind::ResidualCovariance,
            cells: vec![Cell::new(Block::Theta, a, b), Cell::new(Block::Theta, b, a)],
        });
        Ok(s)
    }

    /// Model matrices at a parameter vector.
    pub fn matrices(&self, theta: &DVector<f64>) -> ModelMatrices {
        let mut mm = ModelMatrices {
            lambda: self.lambda.clone(),
            beta: self.beta.clone(),
            psi: self.psi.clone(),
            theta: self.theta.clone(),
        };
        for (p, value) in self.params.iter().zip(theta.iter()) {
            for c in &p.cells {
                let target = match c.block {
                    Block::Lambda => &mut mm.lambda,
                    Block::Beta => &mut mm.beta,
                    Block::Psi => &mut mm.psi,
                    Block::Theta => &mut mm.theta,
                };
                target[(c.row, c.col)] = c.coef * value;
            }
        }
        mm
    }

    /// Start values from the sample covariance diagonal.
    pub fn start_values(&self, cov: &DMatrix<f64>) -> DVector<f64> {
        let mean_sd = (0..self.k()).map(|i| cov[(i, i)].sqrt()).sum::<f64>() / self.k() as f64;
        DVector::from_iterator(
            self.params.len(),
            self.params.iter().map(|p| {
                let c = p.cells[0];
                match p.kind {
                    ParamKind::Loading => 0.7 * cov[(c.row, c.row)].sqrt(),
                    ParamKind::Uniqueness => 0.5 * cov[(c.row, c.row)],
                    ParamKind::LatentCovariance => 0.2,
                    ParamKind::LatentVariance => {
                        // Variance of the marker item's share.
                        let marker = (0..self.k()).find(|&i| self.lambda[(i, c.row)] == 1.0);
                        marker.map_or(0.5, |i| 0.5 * cov[(i, i)])
                    }
                    ParamKind::Regression | ParamKind::ResidualCovariance => 0.0,
                    ParamKind::MethodScale => 0.2 * mean_sd,
                }
            }),
        )
    }

    /// Indices of parameters of one kind.
    pub fn params_of(&self, kind: ParamKind) -> impl Iterator<Item = usize> + '_ {
        self.params
            .iter()
            .enumerate()
            .filter(move |(_, p)| p.kind == kind)
            .map(|(i, _)| i)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelMatrices {
    pub lambda: DMatrix<f64>,
    pub beta: DMatrix<f64>,
    pub psi: DMatrix<f64>,
    pub theta: DMatrix<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> (ModelSpec, Vec<String>) {
        let spec: ModelSpec = serde_json::from_str(
            r#"{"traits": {"A": ["a1","a2","a3"], "B": ["b1","b2","b3"]},
                "regressions": [{"outcome": "B", "predictors": ["A"]}]}"#,
        )
        .unwrap();
        let items = ["a1", "a2", "a3", "b1", "b2", "b3"]
            .map(String::from)
            .to_vec();
        (spec, items)
    }

    #[test]
    fn counts_for_regression_model() {
        let (spec, items) = spec();
        let s = SemStructure::from_model(&spec, &items).unwrap();
        // 6 loadings + 1 regression + 6 uniquenesses.
        assert_eq!(s.n_free(), 13);
        assert_eq!(s.df(), 21 - 13);
    }

    #[test]
    fn fixed_method_adds_no_parameters() {
        let (spec, items) = spec();
        let s = SemStructure::from_model(&spec, &items).unwrap();
        let f = s
            .with_fixed_method(&[1.0, -1.0, 0.5, -0.5, 1.0, -1.0])
            .unwrap();
        assert_eq!(f.n_free(), s.n_free());
        assert_eq!(f.df(), s.df());
        assert_eq!(f.psi[(2, 2)], 1.0);
        assert_eq!(f.psi[(0, 2)], 0.0);
        assert!(f.with_fixed_method(&[0.0; 6]).is_err());
    }

    #[test]
    fn scaled_method_adds_one_parameter() {
        let (spec, items) = spec();
        let s = SemStructure::from_model(&spec, &items).unwrap();
        let clf = s.with_scaled_method(&[1.0; 6], "M=~c").unwrap();
        assert_eq!(clf.n_free(), s.n_free() + 1);
    }

    #[test]
    fn freeing_residual_covariance() {
        let (spec, items) = spec();
        let s = SemStructure::from_model(&spec, &items).unwrap();
        let cu = s.free_residual_covariance(0, 1).unwrap();
        assert_eq!(cu.df(), s.df() - 1);
        assert!(cu.free_residual_covariance(1, 0).is_err());
        let err = s.free_residual_covariance(0, 0).unwrap_err();
        assert!(err.to_string().contains("diagonal already free"));
    }

    #[test]
    fn marker_identification() {
        let (mut spec, items) = spec();
        spec.identification = Identification::Marker;
        let s = SemStructure::from_model(&spec, &items).unwrap();
        assert_eq!(s.lambda[(0, 0)], 1.0);
        assert_eq!(s.lambda[(3, 1)], 1.0);
        assert_eq!(s.params_of(ParamKind::LatentVariance).count(), 2);
        assert_eq!(s.params_of(ParamKind::Loading).count(), 4);
    }
}
