//! Curvature of the segment objective at the MAP point and the analytic
//! marginalization of the initial conditions.

use nalgebra::{DMatrix, DVector};

use super::objective::build_context;
use super::SegmentError;
use crate::data::TimeHistoryRecord;
use crate::linalg;
use crate::model::{response_sensitivities, InitialConditions, ModelSpec, ParameterVector};

/// Hessian of the objective over `[params, ics]`, stored whole with the
/// parameter block size recorded.
#[derive(Debug, Clone)]
pub struct HessianBlocks {
    pub full: DMatrix<f64>,
    pub n_theta: usize,
}

impl HessianBlocks {
    pub fn theta_theta(&self) -> DMatrix<f64> {
        self.full.view((0, 0), (self.n_theta, self.n_theta)).into_owned()
    }

    pub fn theta_psi(&self) -> DMatrix<f64> {
        let n_psi = self.full.nrows() - self.n_theta;
        self.full
            .view((0, self.n_theta), (self.n_theta, n_psi))
            .into_owned()
    }

    pub fn psi_psi(&self) -> DMatrix<f64> {
        let n_psi = self.full.nrows() - self.n_theta;
        self.full
            .view((self.n_theta, self.n_theta), (n_psi, n_psi))
            .into_owned()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HessianMethod {
    /// Drops second-order response derivatives:
    /// `H = sum_j n [ (1/S_j) J_j^T J_j - (2/S_j^2)(J_j^T e_j)(J_j^T e_j)^T ]`.
    GaussNewton,
    /// Central finite differences of the analytic gradient; retained as a
    /// verification path.
    FiniteDifference,
}

/// Gauss-Newton curvature from raw parts. Exact for models whose observed
/// output is linear in the parameters.
pub(crate) fn gauss_newton_kernel(
    sens_outputs: &[DMatrix<f64>],
    errors: &DMatrix<f64>,
    sum_squared_errors: &[f64],
    n_samples: usize,
) -> DMatrix<f64> {
    let n = n_samples as f64;
    let n_params = sens_outputs.len();
    let n_channels = errors.nrows();
    let mut h = DMatrix::zeros(n_params, n_params);
    for j in 0..n_channels {
        let s_j = sum_squared_errors[j];
        let mut gram = DMatrix::<f64>::zeros(n_params, n_params);
        let mut b = DVector::<f64>::zeros(n_params);
        for p in 0..n_params {
            let jp = sens_outputs[p].row(j);
            b[p] = jp.iter().zip(errors.row(j).iter()).map(|(s, e)| s * e).sum();
            for q in p..n_params {
                let jq = sens_outputs[q].row(j);
                let dot: f64 = jp.iter().zip(jq.iter()).map(|(x, y)| x * y).sum();
                gram[(p, q)] = dot;
                gram[(q, p)] = dot;
            }
        }
        h += gram * (n / s_j) - (&b * b.transpose()) * (2.0 * n / (s_j * s_j));
    }
    linalg::symmetrize(&h)
}

/// Hessian blocks of the segment objective at `(params, ics)`.
pub fn hessian_segment(
    segment: &TimeHistoryRecord,
    spec: &ModelSpec,
    params: &ParameterVector,
    ics: &InitialConditions,
    method: HessianMethod,
) -> Result<HessianBlocks, SegmentError> {
    let n_theta = spec.n_params();
    let full = match method {
        HessianMethod::GaussNewton => {
            let sens = response_sensitivities(
                spec,
                params,
                ics,
                &segment.input,
                segment.dt,
                &segment.sensor_map,
            )?;
            let ctx = build_context(segment, spec, params, ics)?;
            if let Some(channel) = ctx.degenerate_channel() {
                return Err(SegmentError::DegenerateFit { channel });
            }
            gauss_newton_kernel(
                &sens.outputs,
                &ctx.errors,
                &ctx.sum_squared_errors,
                ctx.n_samples,
            )
        }
        HessianMethod::FiniteDifference => {
            let n_dof = spec.n_dof();
            let dim = n_theta + 2 * n_dof;
            let mut x0 = DVector::zeros(dim);
            for (i, v) in params.0.iter().enumerate() {
                x0[i] = *v;
            }
            for (i, v) in ics.displacements.iter().enumerate() {
                x0[n_theta + i] = *v;
            }
            for (i, v) in ics.velocities.iter().enumerate() {
                x0[n_theta + n_dof + i] = *v;
            }
            let grad_at = |x: &DVector<f64>| -> Result<DVector<f64>, SegmentError> {
                let p = ParameterVector(x.rows(0, n_theta).iter().cloned().collect());
                let i = InitialConditions {
                    displacements: x.rows(n_theta, n_dof).iter().cloned().collect(),
                    velocities: x.rows(n_theta + n_dof, n_dof).iter().cloned().collect(),
                };
                super::objective::segment_gradient(segment, spec, &p, &i)
            };
            let mut h = DMatrix::zeros(dim, dim);
            for c in 0..dim {
                let step = 1e-5 * (1.0 + x0[c].abs());
                let mut xp = x0.clone();
                xp[c] += step;
                let mut xm = x0.clone();
                xm[c] -= step;
                let col = (grad_at(&xp)? - grad_at(&xm)?) / (2.0 * step);
                h.set_column(c, &col);
            }
            linalg::symmetrize(&h)
        }
    };
    if linalg::cholesky_spd(&full).is_none() {
        return Err(SegmentError::IndefiniteHessian);
    }
    Ok(HessianBlocks { full, n_theta })
}

/// Marginal covariance of the structural parameters: the inverse Schur
/// complement of the initial-condition block,
/// `(H_tt - H_tp H_pp^{-1} H_tp^T)^{-1}`.
pub fn marginal_theta_covariance(blocks: &HessianBlocks) -> Result<DMatrix<f64>, SegmentError> {
    let h_pp = blocks.psi_psi();
    let schur = if h_pp.nrows() == 0 {
        // Nothing to marginalize (initial conditions known).
        blocks.theta_theta()
    } else {
        if linalg::spd_condition(&h_pp) > linalg::SINGULAR_CONDITION {
            return Err(SegmentError::SingularBlock(
                "initial-condition Hessian block".into(),
            ));
        }
        let h_tp = blocks.theta_psi();
        let chol = linalg::cholesky_spd(&h_pp)
            .ok_or_else(|| SegmentError::SingularBlock("initial-condition Hessian block".into()))?;
        let solved = chol.solve(&h_tp.transpose());
        linalg::symmetrize(&(blocks.theta_theta() - &h_tp * solved))
    };
    if linalg::spd_condition(&schur) > linalg::SINGULAR_CONDITION {
        return Err(SegmentError::SingularBlock("Schur complement".into()));
    }
    let schur_chol = linalg::cholesky_spd(&schur)
        .ok_or_else(|| SegmentError::SingularBlock("Schur complement".into()))?;
    Ok(linalg::symmetrize(&linalg::invert_spd(&schur_chol)))
}
