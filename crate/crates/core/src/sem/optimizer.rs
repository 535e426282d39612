//! BFGS quasi-Newton minimizer with step-halving line search.
//!
//! Infeasible trial points (objective returns `None`, e.g. a non-PD implied
//! covariance) are treated like a failed sufficient-decrease test and halve the step.

use nalgebra::{DMatrix, DVector};

pub trait Objective {
    /// Objective value, `None` outside the feasible region.
    fn value(&self, x: &DVector<f64>) -> Option<f64>;

    /// Value and gradient together.
    fn value_gradient(&self, x: &DVector<f64>) -> Option<(f64, DVector<f64>)>;

    /// Starting inverse-Hessian approximation; identity when `None`.
    fn initial_inverse_hessian(&self, _x: &DVector<f64>) -> Option<DMatrix<f64>> {
        None
    }

    /// Projection applied to every trial point (box constraints).
    fn project(&self, _x: &mut DVector<f64>) {}
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BfgsOptions {
    pub max_iter: usize,
    /// Convergence when max |gradient| falls below this.
    pub grad_tol: f64,
    pub max_halvings: usize,
    /// Armijo sufficient-decrease constant.
    pub armijo: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self {
            max_iter: 2000,
            grad_tol: 1e-6,
            max_halvings: 30,
            armijo: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxIterations,
    /// Step halving exhausted; `infeasible` when every trial point was outside the domain.
    LineSearchFailed {
        infeasible: bool,
    },
}

#[derive(Debug, Clone)]
pub struct BfgsResult {
    pub x: DVector<f64>,
    pub value: f64,
    pub gradient: DVector<f64>,
    pub iterations: usize,
    pub termination: Termination,
}

impl BfgsResult {
    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }
}

fn initial_h<O: Objective>(obj: &O, x: &DVector<f64>) -> DMatrix<f64> {
    obj.initial_inverse_hessian(x)
        .unwrap_or_else(|| DMatrix::identity(x.len(), x.len()))
}

/// Minimizes `obj` from `x0`. Returns `None` if `x0` itself is infeasible.
pub fn minimize<O: Objective>(obj: &O, x0: DVector<f64>, opts: &BfgsOptions) -> Option<BfgsResult> {
    let mut x = x0;
    obj.project(&mut x);
    let (mut f, mut g) = obj.value_gradient(&x)?;
    let mut h = initial_h(obj, &x);
    let mut iterations = 0;
    let mut reset = false;

    loop {
        if g.amax() < opts.grad_tol {
            return Some(BfgsResult {
                x,
                value: f,
                gradient: g,
                iterations,
                termination: Termination::Converged,
            });
        }
        if iterations >= opts.max_iter {
            return Some(BfgsResult {
                x,
                value: f,
                gradient: g,
                iterations,
                termination: Termination::MaxIterations,
            });
        }

        let mut dir = -(&h * &g);
        let mut slope = g.dot(&dir);
        if slope >= 0.0 || !slope.is_finite() {
            h = initial_h(obj, &x);
            dir = -(&h * &g);
            slope = g.dot(&dir);
            if slope >= 0.0 {
                dir = -g.clone();
                slope = -g.norm_squared();
            }
        }

        let mut step = 1.0;
        let mut accepted = None;
        let mut all_infeasible = true;
        for _ in 0..=opts.max_halvings {
            let mut trial = &x + step * &dir;
            obj.project(&mut trial);
            if let Some(ft) = obj.value(&trial) {
                all_infeasible = false;
                if ft <= f + opts.armijo * step * slope {
                    accepted = Some((trial, ft));
                    break;
                }
            }
            step *= 0.5;
        }

        let Some((x_new, _)) = accepted else {
            if !reset {
                // Retry once from a fresh curvature model before giving up.
                reset = true;
                h = initial_h(obj, &x);
                continue;
            }
            return Some(BfgsResult {
                x,
                value: f,
                gradient: g,
                iterations,
                termination: Termination::LineSearchFailed {
                    infeasible: all_infeasible,
                },
            });
        };
        reset = false;
        let Some((f_new, g_new)) = obj.value_gradient(&x_new) else {
            return Some(BfgsResult {
                x,
                value: f,
                gradient: g,
                iterations,
                termination: Termination::LineSearchFailed { infeasible: true },
            });
        };

        let s = &x_new - &x;
        let y = &g_new - &g;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            let rho = 1.0 / sy;
            let hy = &h * &y;
            let yhy = y.dot(&hy);
            // H ← (I − ρsyᵀ)H(I − ρysᵀ) + ρssᵀ, expanded.
            h += (rho * rho * yhy + rho) * (&s * s.transpose())
                - rho * (&hy * s.transpose() + &s * hy.transpose());
        }
        x = x_new;
        f = f_new;
        g = g_new;
        iterations += 1;
    }
}
