//! Per-segment MAP search: multistart quasi-Newton descent over the joint
//! `(params, initial conditions)` vector.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use super::objective::{build_context, gradient_kernel, objective_from_context};
use super::SegmentError;
use crate::data::TimeHistoryRecord;
use crate::model::{
    response_sensitivities, InitialConditions, ModelSpec, ParameterVector,
};
use crate::optim::{self, BfgsOptions, Eval};

#[derive(Debug, Clone)]
pub struct MapOptions {
    pub gradient_tolerance: f64,
    pub step_tolerance: f64,
    pub max_iterations: usize,
    /// Number of starts; the first uses the supplied point, the rest jitter
    /// the structural parameters multiplicatively by up to `jitter_rel`.
    pub multistart: usize,
    pub jitter_rel: f64,
    /// Seed of the jitter substream (already segment-specific).
    pub seed: u64,
    /// Optional per-variable scales for the initial inverse-Hessian metric.
    pub scales: Option<DVector<f64>>,
}

impl Default for MapOptions {
    fn default() -> Self {
        Self {
            gradient_tolerance: 1e-8,
            step_tolerance: 1e-10,
            max_iterations: 500,
            multistart: 3,
            jitter_rel: 0.1,
            seed: 0,
            scales: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MapEstimate {
    pub params: ParameterVector,
    pub ics: InitialConditions,
    pub objective: f64,
    pub gradient_norm_inf: f64,
    pub iterations: usize,
    pub starts_attempted: usize,
}

struct SegmentObjective<'a> {
    segment: &'a TimeHistoryRecord,
    spec: &'a ModelSpec,
    n_theta: usize,
    n_dof: usize,
}

impl SegmentObjective<'_> {
    fn unpack(&self, x: &DVector<f64>) -> (ParameterVector, InitialConditions) {
        let params = ParameterVector(x.rows(0, self.n_theta).iter().cloned().collect());
        let ics = InitialConditions {
            displacements: x
                .rows(self.n_theta, self.n_dof)
                .iter()
                .cloned()
                .collect(),
            velocities: x
                .rows(self.n_theta + self.n_dof, self.n_dof)
                .iter()
                .cloned()
                .collect(),
        };
        (params, ics)
    }

    fn pack(&self, params: &ParameterVector, ics: &InitialConditions) -> DVector<f64> {
        let mut x = DVector::zeros(self.n_theta + 2 * self.n_dof);
        for (i, v) in params.0.iter().enumerate() {
            x[i] = *v;
        }
        for (i, v) in ics.displacements.iter().enumerate() {
            x[self.n_theta + i] = *v;
        }
        for (i, v) in ics.velocities.iter().enumerate() {
            x[self.n_theta + self.n_dof + i] = *v;
        }
        x
    }
}

impl optim::Objective for SegmentObjective<'_> {
    fn value(&self, x: &DVector<f64>) -> Eval {
        let (params, ics) = self.unpack(x);
        if !self.spec.params_feasible(&params) {
            return Eval::Infeasible;
        }
        match build_context(self.segment, self.spec, &params, &ics) {
            Ok(ctx) => {
                if ctx.degenerate_channel().is_some() {
                    // Residual power at the representable floor: the fit
                    // interpolates the data; stop here and keep the point.
                    Eval::Terminal(ctx.floored_objective())
                } else {
                    match objective_from_context(&ctx) {
                        Ok(v) if v.is_finite() => Eval::Feasible(v),
                        _ => Eval::Infeasible,
                    }
                }
            }
            Err(_) => Eval::Infeasible,
        }
    }

    fn gradient(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        let (params, ics) = self.unpack(x);
        let sens = response_sensitivities(
            self.spec,
            &params,
            &ics,
            &self.segment.input,
            self.segment.dt,
            &self.segment.sensor_map,
        )
        .ok()?;
        let ctx = build_context(self.segment, self.spec, &params, &ics).ok()?;
        Some(gradient_kernel(
            &sens.outputs,
            &ctx.errors,
            &ctx.sum_squared_errors,
            ctx.n_samples,
        ))
    }
}

/// Minimizes the marginalized segment objective from `(params0, ics0)`.
///
/// Runs `multistart` descents (the supplied start plus jittered copies) and
/// returns the lowest minimum. An interpolating fit encountered during the
/// search terminates that descent successfully at the interpolating point.
pub fn map_segment(
    segment: &TimeHistoryRecord,
    spec: &ModelSpec,
    params0: &ParameterVector,
    ics0: &InitialConditions,
    options: &MapOptions,
) -> Result<MapEstimate, SegmentError> {
    segment.validate()?;
    if !spec.params_feasible(params0) {
        return Err(SegmentError::InfeasibleStart);
    }
    ics0.validate(spec.n_dof()).map_err(SegmentError::Model)?;
    let n_free = spec.n_params() + 2 * spec.n_dof();
    if segment.n_samples() <= n_free {
        return Err(SegmentError::Dimension(format!(
            "{} samples cannot identify {} free parameters",
            segment.n_samples(),
            n_free
        )));
    }

    let objective = SegmentObjective {
        segment,
        spec,
        n_theta: spec.n_params(),
        n_dof: spec.n_dof(),
    };
    let bfgs = BfgsOptions {
        gradient_tolerance: options.gradient_tolerance,
        step_tolerance: options.step_tolerance,
        max_iterations: options.max_iterations,
        initial_scales: options.scales.clone(),
    };

    let mut rng = ChaCha12Rng::seed_from_u64(options.seed);
    let starts = options.multistart.max(1);
    let mut best: Option<optim::BfgsOutcome> = None;
    let mut attempted = 0;
    for start in 0..starts {
        let mut params = params0.clone();
        if start > 0 {
            for v in params.0.iter_mut() {
                let u: f64 = rng.random_range(-1.0..1.0);
                *v *= 1.0 + options.jitter_rel * u;
            }
            if !spec.params_feasible(&params) {
                continue;
            }
        }
        let x0 = objective.pack(&params, ics0);
        attempted += 1;
        let Ok(outcome) = optim::minimize(&objective, &x0, &bfgs) else {
            continue;
        };
        let better = match &best {
            Some(b) => outcome.value < b.value,
            None => true,
        };
        if better {
            best = Some(outcome);
        }
    }

    let best = best.ok_or(SegmentError::NonConvergence {
        iterations: options.max_iterations,
        best_objective: f64::INFINITY,
        gradient_norm: f64::INFINITY,
    })?;
    if !best.stop.is_converged() {
        return Err(SegmentError::NonConvergence {
            iterations: best.iterations,
            best_objective: best.value,
            gradient_norm: best.gradient_norm_inf,
        });
    }
    let (params, ics) = objective.unpack(&best.x);
    Ok(MapEstimate {
        params,
        ics,
        objective: best.value,
        gradient_norm_inf: best.gradient_norm_inf,
        iterations: best.iterations,
        starts_attempted: attempted,
    })
}

/// Least-squares estimate of the initial conditions at fixed structural
/// parameters.
///
/// The response is linear in the initial state, so the unweighted
/// least-squares fit has a closed form built from the forced response and
/// the initial-condition sensitivities. Used to seed the MAP search.
pub fn initial_conditions_least_squares(
    segment: &TimeHistoryRecord,
    spec: &ModelSpec,
    params: &ParameterVector,
) -> Result<InitialConditions, SegmentError> {
    let n_dof = spec.n_dof();
    let zero = InitialConditions::zero(n_dof);
    let sens = response_sensitivities(
        spec,
        params,
        &zero,
        &segment.input,
        segment.dt,
        &segment.sensor_map,
    )?;
    let forced = build_context(segment, spec, params, &zero)?.errors; // Y - forced response
    let n_state = 2 * n_dof;
    let n_theta = spec.n_params();
    let mut normal = DMatrix::<f64>::zeros(n_state, n_state);
    let mut rhs = DVector::<f64>::zeros(n_state);
    for a in 0..n_state {
        let ja = &sens.outputs[n_theta + a];
        for b in a..n_state {
            let jb = &sens.outputs[n_theta + b];
            let dot: f64 = ja.iter().zip(jb.iter()).map(|(x, y)| x * y).sum();
            normal[(a, b)] = dot;
            normal[(b, a)] = dot;
        }
        rhs[a] = ja.iter().zip(forced.iter()).map(|(x, y)| x * y).sum();
    }
    // Tiny ridge so a weakly excited state direction cannot break the solve.
    let ridge = 1e-12 * normal.trace().max(f64::MIN_POSITIVE);
    for i in 0..n_state {
        normal[(i, i)] += ridge;
    }
    let chol = nalgebra::Cholesky::new(normal)
        .ok_or_else(|| SegmentError::SingularBlock("initial-condition normal matrix".into()))?;
    let state = chol.solve(&rhs);
    Ok(InitialConditions::from_state_vector(&state))
}
