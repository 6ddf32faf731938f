//! Dense BFGS minimizer with a backtracking line search.
//!
//! Both inference layers minimize smooth negative-log objectives of modest
//! dimension (a handful of structural parameters plus initial conditions, or
//! the free entries of a covariance factor), supplied with analytical
//! gradients. The implementation is a standard inverse-BFGS update with an
//! Armijo sufficient-decrease line search and the self-scaling first step of
//! Nocedal & Wright (Eq. 6.20).
//!
//! Convergence is declared when the gradient infinity norm drops below
//! `gradient_tolerance * (1 + |f|)` or the accepted step norm drops below
//! `step_tolerance`.

use nalgebra::{DMatrix, DVector};

/// Outcome of a single objective evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Eval {
    /// Finite objective value at a feasible point.
    Feasible(f64),
    /// Outside the feasible region; treated as an infinite barrier.
    Infeasible,
    /// The objective hit its representable floor (e.g. an interpolating fit
    /// whose residual power underflows). The optimizer stops and keeps this
    /// point; `Terminal` carries the floored value.
    Terminal(f64),
}

/// A smooth objective with an analytical gradient.
pub trait Objective {
    fn value(&self, x: &DVector<f64>) -> Eval;

    /// Gradient at a feasible point. Only called where `value` returned
    /// `Feasible`; `None` signals an unexpected evaluation failure.
    fn gradient(&self, x: &DVector<f64>) -> Option<DVector<f64>>;
}

#[derive(Debug, Clone)]
pub struct BfgsOptions {
    pub gradient_tolerance: f64,
    pub step_tolerance: f64,
    pub max_iterations: usize,
    /// Per-variable scales `s_i`; the initial inverse Hessian is
    /// `diag(s_i^2)`. Defaults to the identity.
    pub initial_scales: Option<DVector<f64>>,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self {
            gradient_tolerance: 1e-8,
            step_tolerance: 1e-10,
            max_iterations: 500,
            initial_scales: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    GradientTolerance,
    StepTolerance,
    /// Objective floor reported by the evaluation (see [`Eval::Terminal`]).
    ObjectiveFloor,
    /// Line search could not find a lower point along the descent direction.
    LineSearchStalled,
    MaxIterations,
}

impl StopReason {
    pub fn is_converged(self) -> bool {
        !matches!(self, StopReason::MaxIterations)
    }
}

#[derive(Debug, Clone)]
pub struct BfgsOutcome {
    pub x: DVector<f64>,
    pub value: f64,
    pub gradient_norm_inf: f64,
    pub iterations: usize,
    pub stop: StopReason,
    /// Objective value after every accepted step (non-increasing).
    pub trace: Vec<f64>,
}

#[derive(Debug, thiserror::Error)]
pub enum OptimError {
    #[error("objective is not evaluable at the starting point")]
    BadStart,
    #[error("gradient evaluation failed at iteration {0}")]
    GradientFailure(usize),
}

const ARMIJO_C1: f64 = 1e-4;
const BACKTRACK: f64 = 0.5;
const MAX_BACKTRACKS: usize = 60;
const CURVATURE_GUARD: f64 = 1e-12;

/// Minimizes `obj` starting from `x0`.
pub fn minimize(
    obj: &dyn Objective,
    x0: &DVector<f64>,
    options: &BfgsOptions,
) -> Result<BfgsOutcome, OptimError> {
    let n = x0.len();
    let mut x = x0.clone();
    let mut f = match obj.value(&x) {
        Eval::Feasible(v) if v.is_finite() => v,
        Eval::Terminal(v) => {
            return Ok(BfgsOutcome {
                x,
                value: v,
                gradient_norm_inf: 0.0,
                iterations: 0,
                stop: StopReason::ObjectiveFloor,
                trace: vec![v],
            })
        }
        _ => return Err(OptimError::BadStart),
    };
    let mut g = obj.gradient(&x).ok_or(OptimError::GradientFailure(0))?;

    let mut h_inv = match &options.initial_scales {
        Some(s) => DMatrix::from_diagonal(&s.map(|v| v * v)),
        None => DMatrix::identity(n, n),
    };
    let mut rescale_pending = options.initial_scales.is_none();
    let mut trace = vec![f];

    for iter in 0..options.max_iterations {
        let g_inf = g.amax();
        if g_inf < options.gradient_tolerance * (1.0 + f.abs()) {
            return Ok(BfgsOutcome {
                x,
                value: f,
                gradient_norm_inf: g_inf,
                iterations: iter,
                stop: StopReason::GradientTolerance,
                trace,
            });
        }

        let mut dir = -(&h_inv * &g);
        let mut slope = dir.dot(&g);
        if !slope.is_finite() || slope >= 0.0 {
            // Curvature estimate went bad; restart from steepest descent.
            h_inv = DMatrix::identity(n, n);
            rescale_pending = true;
            dir = -g.clone();
            slope = dir.dot(&g);
        }

        // Backtracking Armijo search.
        let mut step = 1.0;
        let mut accepted: Option<(DVector<f64>, f64)> = None;
        for _ in 0..MAX_BACKTRACKS {
            let trial = &x + &dir * step;
            match obj.value(&trial) {
                Eval::Feasible(ft) if ft.is_finite() => {
                    if ft <= f + ARMIJO_C1 * step * slope {
                        accepted = Some((trial, ft));
                        break;
                    }
                }
                Eval::Terminal(ft) => {
                    trace.push(ft);
                    return Ok(BfgsOutcome {
                        x: trial,
                        value: ft,
                        gradient_norm_inf: g.amax(),
                        iterations: iter + 1,
                        stop: StopReason::ObjectiveFloor,
                        trace,
                    });
                }
                _ => {}
            }
            step *= BACKTRACK;
            if step * dir.norm() < options.step_tolerance {
                break;
            }
        }

        let Some((x_new, f_new)) = accepted else {
            return Ok(BfgsOutcome {
                x,
                value: f,
                gradient_norm_inf: g.amax(),
                iterations: iter,
                stop: StopReason::LineSearchStalled,
                trace,
            });
        };

        let g_new = obj
            .gradient(&x_new)
            .ok_or(OptimError::GradientFailure(iter + 1))?;
        let s = &x_new - &x;
        let y = &g_new - &g;

        x = x_new;
        f = f_new;
        g = g_new;
        trace.push(f);

        let step_norm = s.norm();
        if step_norm < options.step_tolerance {
            return Ok(BfgsOutcome {
                x,
                value: f,
                gradient_norm_inf: g.amax(),
                iterations: iter + 1,
                stop: StopReason::StepTolerance,
                trace,
            });
        }

        let sy = s.dot(&y);
        if sy > CURVATURE_GUARD * step_norm * y.norm() {
            if rescale_pending {
                // Self-scaling initial metric before the first update.
                let yy = y.dot(&y);
                if yy > 0.0 {
                    h_inv = DMatrix::identity(n, n) * (sy / yy);
                }
                rescale_pending = false;
            }
            // Inverse BFGS update: H <- (I - r s y^T) H (I - r y s^T) + r s s^T.
            let rho = 1.0 / sy;
            let hy = &h_inv * &y;
            let yhy = y.dot(&hy);
            // H <- H - r (hy s^T + s hy^T) + r^2 yhy s s^T + r s s^T
            let ss = &s * s.transpose();
            h_inv = h_inv - (&hy * s.transpose() + &s * hy.transpose()) * rho
                + &ss * (rho * rho * yhy + rho);
        }
    }

    Ok(BfgsOutcome {
        gradient_norm_inf: g.amax(),
        value: f,
        iterations: options.max_iterations,
        stop: StopReason::MaxIterations,
        trace,
        x,
    })
}
