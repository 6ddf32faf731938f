//! Prediction errors, the marginalized segment objective, and its gradient.

use nalgebra::{DMatrix, DVector};

use super::SegmentError;
use crate::data::TimeHistoryRecord;
use crate::model::{
    response_sensitivities, simulate, InitialConditions, ModelSpec, ParameterVector,
};

/// Residual floor multiplier; see [`SegmentObjectiveContext::floors`].
const FLOOR_EPS: f64 = f64::EPSILON;

/// Prediction errors plus the per-channel residual powers entering the
/// objective.
#[derive(Debug, Clone)]
pub struct SegmentObjectiveContext {
    /// `N_o x n` prediction errors.
    pub errors: DMatrix<f64>,
    /// Per-channel sum of squared errors `S_j`.
    pub sum_squared_errors: Vec<f64>,
    /// Per-channel floor `eps * n * var(Y_j)`: residual powers at or below
    /// this value indicate an interpolating fit and raise `DegenerateFit`.
    pub floors: Vec<f64>,
    pub n_samples: usize,
}

impl SegmentObjectiveContext {
    /// Index of the first channel at or below its floor, if any.
    pub fn degenerate_channel(&self) -> Option<usize> {
        self.sum_squared_errors
            .iter()
            .zip(&self.floors)
            .position(|(s, f)| s <= f)
    }

    /// The objective value with floored residual powers; finite even for an
    /// interpolating fit.
    pub fn floored_objective(&self) -> f64 {
        let n = self.n_samples as f64;
        0.5 * n
            * self
                .sum_squared_errors
                .iter()
                .zip(&self.floors)
                .map(|(s, f)| s.max(f.max(f64::MIN_POSITIVE)).ln())
                .sum::<f64>()
    }
}

fn check_dimensions(
    segment: &TimeHistoryRecord,
    spec: &ModelSpec,
    params: &ParameterVector,
    ics: &InitialConditions,
) -> Result<(), SegmentError> {
    segment.validate()?;
    if params.len() != spec.n_params() {
        return Err(SegmentError::Dimension(format!(
            "{} parameters supplied, model requires {}",
            params.len(),
            spec.n_params()
        )));
    }
    ics.validate(spec.n_dof()).map_err(SegmentError::Model)?;
    if segment.n_output_channels() > spec.n_dof() {
        return Err(SegmentError::Dimension(format!(
            "{} output channels exceed {} model DOF",
            segment.n_output_channels(),
            spec.n_dof()
        )));
    }
    if segment.n_input_channels() != spec.n_input_channels() {
        return Err(SegmentError::Dimension(format!(
            "{} input channels, model expects {}",
            segment.n_input_channels(),
            spec.n_input_channels()
        )));
    }
    Ok(())
}

/// Prediction errors `e(k) = Y(k) - S_o X(k; params, ics)`.
pub fn prediction_errors(
    segment: &TimeHistoryRecord,
    spec: &ModelSpec,
    params: &ParameterVector,
    ics: &InitialConditions,
) -> Result<DMatrix<f64>, SegmentError> {
    Ok(build_context(segment, spec, params, ics)?.errors)
}

/// Simulates the model and assembles the objective context.
pub fn build_context(
    segment: &TimeHistoryRecord,
    spec: &ModelSpec,
    params: &ParameterVector,
    ics: &InitialConditions,
) -> Result<SegmentObjectiveContext, SegmentError> {
    check_dimensions(segment, spec, params, ics)?;
    let resp = simulate(spec, params, ics, &segment.input, segment.dt)?;
    let predicted = resp.observed(&segment.sensor_map)?;
    let errors = &segment.output - predicted;
    Ok(context_from_errors(segment, errors))
}

fn context_from_errors(
    segment: &TimeHistoryRecord,
    errors: DMatrix<f64>,
) -> SegmentObjectiveContext {
    let n = segment.n_samples();
    let sum_squared_errors: Vec<f64> = (0..errors.nrows())
        .map(|j| errors.row(j).iter().map(|e| e * e).sum())
        .collect();
    let floors: Vec<f64> = (0..segment.n_output_channels())
        .map(|j| {
            let row = segment.output.row(j);
            let mean = row.iter().sum::<f64>() / n as f64;
            let var = row.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n as f64;
            FLOOR_EPS * n as f64 * var
        })
        .collect();
    SegmentObjectiveContext {
        errors,
        sum_squared_errors,
        floors,
        n_samples: n,
    }
}

/// The marginalized negative log-likelihood `(n/2) sum_j ln S_j`.
pub fn segment_neg_log_likelihood(
    segment: &TimeHistoryRecord,
    spec: &ModelSpec,
    params: &ParameterVector,
    ics: &InitialConditions,
) -> Result<f64, SegmentError> {
    let ctx = build_context(segment, spec, params, ics)?;
    objective_from_context(&ctx)
}

pub(crate) fn objective_from_context(ctx: &SegmentObjectiveContext) -> Result<f64, SegmentError> {
    if let Some(channel) = ctx.degenerate_channel() {
        return Err(SegmentError::DegenerateFit { channel });
    }
    let n = ctx.n_samples as f64;
    Ok(0.5 * n * ctx.sum_squared_errors.iter().map(|s| s.ln()).sum::<f64>())
}

/// Gradient of the objective over `[params, initial displacements, initial
/// velocities]`:
///
/// ```text
/// dL/dp = - sum_j (n / S_j) sum_k e_j(k) * d x_obs_j(k) / dp.
/// ```
pub fn segment_gradient(
    segment: &TimeHistoryRecord,
    spec: &ModelSpec,
    params: &ParameterVector,
    ics: &InitialConditions,
) -> Result<DVector<f64>, SegmentError> {
    check_dimensions(segment, spec, params, ics)?;
    let sens = response_sensitivities(
        spec,
        params,
        ics,
        &segment.input,
        segment.dt,
        &segment.sensor_map,
    )?;
    let resp = simulate(spec, params, ics, &segment.input, segment.dt)?;
    let predicted = resp.observed(&segment.sensor_map)?;
    let errors = &segment.output - predicted;
    let ctx = context_from_errors(segment, errors);
    if let Some(channel) = ctx.degenerate_channel() {
        return Err(SegmentError::DegenerateFit { channel });
    }
    Ok(gradient_kernel(
        &sens.outputs,
        &ctx.errors,
        &ctx.sum_squared_errors,
        ctx.n_samples,
    ))
}

/// Gradient assembly from raw parts; shared with the Hessian module.
pub(crate) fn gradient_kernel(
    sens_outputs: &[DMatrix<f64>],
    errors: &DMatrix<f64>,
    sum_squared_errors: &[f64],
    n_samples: usize,
) -> DVector<f64> {
    let n = n_samples as f64;
    let n_params = sens_outputs.len();
    let mut grad = DVector::zeros(n_params);
    for (p, jp) in sens_outputs.iter().enumerate() {
        let mut acc = 0.0;
        for (j, s_j) in sum_squared_errors.iter().enumerate() {
            let dot: f64 = errors
                .row(j)
                .iter()
                .zip(jp.row(j).iter())
                .map(|(e, s)| e * s)
                .sum();
            acc += dot * n / s_j;
        }
        grad[p] = -acc;
    }
    grad
}
