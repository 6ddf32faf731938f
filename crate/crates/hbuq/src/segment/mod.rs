//! Per-segment MAP inference under the marginalized prediction-error model.
//!
//! The segment likelihood treats prediction errors as zero-mean i.i.d.
//! Gaussians per channel with unknown variances. Integrating the variances
//! against the scale-invariant (Jeffreys) prior leaves the marginalized
//! negative log-likelihood
//!
//! ```text
//! L(params, ics) = (n/2) * sum_j ln S_j,   S_j = sum_k e_j(k)^2,
//! ```
//!
//! with the additive constant fixed to zero. The MAP point is found by
//! quasi-Newton descent with analytical gradients; the curvature at the MAP
//! forms a Gaussian (Laplace) summary, and the initial conditions are
//! marginalized out analytically through the Schur complement of their
//! Hessian block.

mod hessian;
mod map;
mod objective;

pub use hessian::{hessian_segment, marginal_theta_covariance, HessianBlocks, HessianMethod};
pub use map::{initial_conditions_least_squares, map_segment, MapEstimate, MapOptions};
pub use objective::{
    build_context, prediction_errors, segment_gradient, segment_neg_log_likelihood,
    SegmentObjectiveContext,
};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::DataError;
use crate::model::{InitialConditions, ModelError, ParameterVector};

#[derive(Debug, thiserror::Error)]
pub enum SegmentError {
    #[error(
        "degenerate fit: channel {channel} residual power fell below the floor (interpolating fit)"
    )]
    DegenerateFit { channel: usize },
    #[error("MAP search did not converge within {iterations} iterations (best objective {best_objective}, gradient norm {gradient_norm:.3e})")]
    NonConvergence {
        iterations: usize,
        best_objective: f64,
        gradient_norm: f64,
    },
    #[error("starting point is outside the feasible parameter region")]
    InfeasibleStart,
    #[error("Hessian at the MAP point is not positive definite")]
    IndefiniteHessian,
    #[error("singular block in the Hessian marginalization: {0}")]
    SingularBlock(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("optimizer failure: {0}")]
    Optimizer(#[from] crate::optim::OptimError),
}

/// Gaussian (Laplace) summary of one segment: the MAP point, the Hessian
/// blocks at the MAP, and the marginal parameter covariance with the initial
/// conditions integrated out.
#[derive(Debug, Clone)]
pub struct SegmentPosterior {
    pub map_params: ParameterVector,
    pub map_ics: InitialConditions,
    pub hessian: HessianBlocks,
    pub marginal_covariance: DMatrix<f64>,
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Serialization schema for [`SegmentPosterior`] artifacts: the MAP point,
/// the marginal covariance (row-major), the objective value, and convergence
/// metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SegmentPosteriorRecord {
    pub params: Vec<f64>,
    pub initial_displacements: Vec<f64>,
    pub initial_velocities: Vec<f64>,
    pub marginal_covariance: Vec<Vec<f64>>,
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl From<&SegmentPosterior> for SegmentPosteriorRecord {
    fn from(p: &SegmentPosterior) -> Self {
        let cov = &p.marginal_covariance;
        Self {
            params: p.map_params.0.clone(),
            initial_displacements: p.map_ics.displacements.clone(),
            initial_velocities: p.map_ics.velocities.clone(),
            marginal_covariance: (0..cov.nrows())
                .map(|i| (0..cov.ncols()).map(|j| cov[(i, j)]).collect())
                .collect(),
            objective: p.objective,
            converged: p.converged,
            iterations: p.iterations,
        }
    }
}
