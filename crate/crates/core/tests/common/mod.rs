#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use famf::ingest::{ModelSpec, MomentSummary, ResponseMatrix};
use famf::sem::SemStructure;

pub fn names(prefix: &str, k: usize) -> Vec<String> {
    (1..=k).map(|i| format!("{prefix}{i}")).collect()
}

/// Two correlated factors, three items each, unit-variance identification.
pub fn two_factor_model() -> (ModelSpec, Vec<String>) {
    let model: ModelSpec =
        serde_json::from_str(r#"{"traits": {"F1": ["y1","y2","y3"], "F2": ["y4","y5","y6"]}}"#)
            .unwrap();
    (model, names("y", 6))
}

/// Same items with F2 regressed on F1.
pub fn regression_model() -> (ModelSpec, Vec<String>) {
    let model: ModelSpec = serde_json::from_str(
        r#"{"traits": {"F1": ["y1","y2","y3"], "F2": ["y4","y5","y6"]},
            "regressions": [{"outcome": "F2", "predictors": ["F1"]}]}"#,
    )
    .unwrap();
    (model, names("y", 6))
}

/// ΛΦΛᵀ + I − diag(ΛΦΛᵀ) for simple structure.
pub fn population_cov(loadings: &[f64], assign: &[usize], phi: &DMatrix<f64>) -> DMatrix<f64> {
    let k = loadings.len();
    let lam = DMatrix::from_fn(k, phi.nrows(), |i, f| {
        if assign[i] == f {
            loadings[i]
        } else {
            0.0
        }
    });
    let mut s = &lam * phi * lam.transpose();
    for i in 0..k {
        s[(i, i)] = 1.0;
    }
    s
}

pub fn two_factor_cov(loadings: &[f64; 6], r: f64) -> DMatrix<f64> {
    let phi = DMatrix::from_row_slice(2, 2, &[1.0, r, r, 1.0]);
    population_cov(loadings, &[0, 0, 0, 1, 1, 1], &phi)
}

/// n multivariate-normal rows with covariance `sigma`.
pub fn draw(sigma: &DMatrix<f64>, n: usize, seed: u64, item_names: Vec<String>) -> ResponseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = sigma.clone().cholesky().expect("population Σ is PD").l();
    let noise = DMatrix::from_fn(n, sigma.nrows(), |_, _| {
        rng.sample::<f64, _>(StandardNormal)
    });
    ResponseMatrix::new(noise * l.transpose(), item_names).unwrap()
}

pub fn moments(cov: DMatrix<f64>, n: usize) -> MomentSummary {
    MomentSummary::from_covariance(cov, n).unwrap()
}

pub fn structure(model: &ModelSpec, items: &[String]) -> SemStructure {
    SemStructure::from_model(model, items).unwrap()
}

/// Central-difference gradient of `f` at `x`.
pub fn numeric_gradient(
    f: impl Fn(&DVector<f64>) -> f64,
    x: &DVector<f64>,
    h: f64,
) -> DVector<f64> {
    DVector::from_fn(x.len(), |i, _| {
        let mut up = x.clone();
        let mut dn = x.clone();
        up[i] += h;
        dn[i] -= h;
        (f(&up) - f(&dn)) / (2.0 * h)
    })
}

/// Minimizes ‖m − Zγ‖² + λ‖γ‖² by plain gradient descent with a fixed step from the
/// spectral bound; stops when successive iterates differ by less than `tol`.
pub fn ridge_by_descent(z: &DMatrix<f64>, m: &DVector<f64>, lambda: f64, tol: f64) -> DVector<f64> {
    let p = z.ncols();
    let ztz = z.transpose() * z;
    let ztm = z.transpose() * m;
    // Lipschitz constant of ∇ is 2(‖ZᵀZ‖₂ + λ); bound ‖ZᵀZ‖₂ by its Frobenius norm.
    let lip = 2.0 * (ztz.norm() + lambda);
    let step = 1.0 / lip;
    let mut g = DVector::zeros(p);
    for _ in 0..5_000_000 {
        let grad = 2.0 * (&ztz * &g - &ztm) + 2.0 * lambda * &g;
        let next = &g - step * grad;
        let moved = (&next - &g).amax();
        g = next;
        if moved < tol {
            break;
        }
    }
    g
}
