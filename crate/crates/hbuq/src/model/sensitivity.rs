//! Analytic sensitivities of observed responses.
//!
//! The discrete recursion `x_{k+1} = Ad x_k + Bd u_k` is differentiated
//! directly. For a structural parameter p the sensitivity state
//! `z_k = dx_k/dp` obeys
//!
//! ```text
//! z_{k+1} = Ad z_k + (dAd/dp) x_k + (dBd/dp) u_k,   z_0 = 0,
//! ```
//!
//! where `dAd/dp` and `dBd/dp` are the exact derivatives of the zero-order
//! hold matrices, read from the Frechet derivative of the matrix exponential
//! via the block-triangular identity
//! `exp([[X, E], [0, X]]) = [[exp X, L(X, E)], [0, exp X]]`.
//!
//! Initial-condition sensitivities do not need their own recursions: the
//! state sensitivity with respect to the initial state is `Ad^k`, so the
//! observed rows are propagated as `V_{k+1} = V_k Ad` starting from the
//! output map itself, independent of the input series.

use nalgebra::{DMatrix, DVector};

use super::state_space::{discretize, simulate_discrete, ResponseHistory, StateSpaceModel};
use super::{
    assemble_derivatives, InitialConditions, ModelError, ModelSpec, OutputQuantity,
    ParameterVector, SensorMap,
};

/// Per-parameter sensitivities of the observed channels.
///
/// `outputs[p]` is an `N_o x n` matrix: the derivative of each observed
/// channel at each sample with respect to parameter `p`. Parameters are
/// ordered structural parameters first, then initial displacements, then
/// initial velocities.
#[derive(Debug, Clone)]
pub struct SensitivityHistory {
    pub outputs: Vec<DMatrix<f64>>,
    pub n_theta: usize,
}

impl SensitivityHistory {
    pub fn n_params(&self) -> usize {
        self.outputs.len()
    }
}

/// Frechet derivative of `exp(x)` in direction `e`.
fn expm_frechet(x: &DMatrix<f64>, e: &DMatrix<f64>) -> DMatrix<f64> {
    let m = x.nrows();
    let mut aug = DMatrix::zeros(2 * m, 2 * m);
    aug.view_mut((0, 0), (m, m)).copy_from(x);
    aug.view_mut((0, m), (m, m)).copy_from(e);
    aug.view_mut((m, m), (m, m)).copy_from(x);
    let big = aug.exp();
    big.view((0, m), (m, m)).into_owned()
}

/// Simulates the response and assembles observed-output sensitivities in a
/// single pass.
pub fn simulate_with_sensitivities(
    spec: &ModelSpec,
    params: &ParameterVector,
    ics: &InitialConditions,
    input: &DMatrix<f64>,
    dt: f64,
    sensor: &SensorMap,
) -> Result<(ResponseHistory, SensitivityHistory), ModelError> {
    let model = StateSpaceModel::build(spec, params)?;
    let n = model.n_dof;
    ics.validate(n)?;
    sensor.validate(n)?;
    if input.nrows() != model.n_inputs() {
        return Err(ModelError::DimensionMismatch(format!(
            "{} input channels supplied, model expects {}",
            input.nrows(),
            model.n_inputs()
        )));
    }
    let disc = discretize(&model, dt)?;
    let n_samples = input.ncols();
    let n_state = 2 * n;
    let n_obs = sensor.n_observed();
    let n_theta = spec.n_params();

    // Observed-output map rows (and their derivatives for acceleration).
    let mut c_obs = DMatrix::zeros(n_obs, n_state);
    let mut d_obs = DMatrix::zeros(n_obs, model.n_inputs());
    for (row, dof) in sensor.observed_dofs.iter().enumerate() {
        match sensor.quantity {
            OutputQuantity::Displacement => c_obs[(row, *dof)] = 1.0,
            OutputQuantity::Velocity => c_obs[(row, n + *dof)] = 1.0,
            OutputQuantity::Acceleration => {
                c_obs.row_mut(row).copy_from(&model.output_acc.row(*dof));
                d_obs
                    .row_mut(row)
                    .copy_from(&model.feedthrough_acc.row(*dof));
            }
        }
    }

    // Exact derivatives of the discrete matrices per structural parameter.
    let derivs = assemble_derivatives(spec, params)?;
    let inv_mass_diag: DVector<f64> = match spec {
        ModelSpec::SdofLinear { .. } => DVector::from_element(1, 1.0),
        ModelSpec::ShearBuilding { masses_kg, .. } => {
            DVector::from_vec(masses_kg.iter().map(|m| 1.0 / m).collect())
        }
    };
    let ns_aug = n_state + model.n_inputs();
    let mut g = DMatrix::zeros(ns_aug, ns_aug);
    g.view_mut((0, 0), (n_state, n_state)).copy_from(&model.a);
    g.view_mut((0, n_state), (n_state, model.n_inputs()))
        .copy_from(&model.input);

    let mut d_trans = Vec::with_capacity(n_theta);
    let mut d_input = Vec::with_capacity(n_theta);
    let mut d_c_obs = Vec::with_capacity(n_theta);
    for d in &derivs {
        // dA = [0 0; -M^{-1} dK  -M^{-1} dC]; the input map is parameter-free.
        let mut da = DMatrix::zeros(n_state, n_state);
        for i in 0..n {
            for j in 0..n {
                da[(n + i, j)] = -inv_mass_diag[i] * d.d_stiffness[(i, j)];
                da[(n + i, n + j)] = -inv_mass_diag[i] * d.d_damping[(i, j)];
            }
        }
        let mut dg = DMatrix::zeros(ns_aug, ns_aug);
        dg.view_mut((0, 0), (n_state, n_state)).copy_from(&da);
        let frechet = expm_frechet(&(&g * dt), &(&dg * dt));
        d_trans.push(frechet.view((0, 0), (n_state, n_state)).into_owned());
        d_input.push(
            frechet
                .view((0, n_state), (n_state, model.n_inputs()))
                .into_owned(),
        );
        let mut dc = DMatrix::zeros(n_obs, n_state);
        if sensor.quantity == OutputQuantity::Acceleration {
            for (row, dof) in sensor.observed_dofs.iter().enumerate() {
                for j in 0..n {
                    dc[(row, j)] = -inv_mass_diag[*dof] * d.d_stiffness[(*dof, j)];
                    dc[(row, n + j)] = -inv_mass_diag[*dof] * d.d_damping[(*dof, j)];
                }
            }
        }
        d_c_obs.push(dc);
    }

    let mut outputs: Vec<DMatrix<f64>> = (0..n_theta + n_state)
        .map(|_| DMatrix::zeros(n_obs, n_samples))
        .collect();

    let mut state = ics.state_vector();
    let mut sens_states: Vec<DVector<f64>> = vec![DVector::zeros(n_state); n_theta];
    // Observed rows of Ad^k for the initial-condition sensitivities.
    let mut v = c_obs.clone();

    for k in 0..n_samples {
        let u = input.column(k);
        for p in 0..n_theta {
            let col = &c_obs * &sens_states[p] + &d_c_obs[p] * &state;
            outputs[p].set_column(k, &col);
        }
        for l in 0..n_state {
            for row in 0..n_obs {
                outputs[n_theta + l][(row, k)] = v[(row, l)];
            }
        }
        if k + 1 < n_samples {
            for p in 0..n_theta {
                sens_states[p] =
                    &disc.transition * &sens_states[p] + &d_trans[p] * &state + &d_input[p] * u;
            }
            state = &disc.transition * &state + &disc.input * u;
            v = &v * &disc.transition;
        }
    }

    // The response itself, re-run from the initial state so the recorded
    // history matches `simulate` exactly.
    let resp = simulate_discrete(&model, &disc, &ics.state_vector(), input)?;
    Ok((resp, SensitivityHistory { outputs, n_theta }))
}

/// Sensitivities of the observed responses with respect to every structural
/// parameter and initial-condition entry.
pub fn response_sensitivities(
    spec: &ModelSpec,
    params: &ParameterVector,
    ics: &InitialConditions,
    input: &DMatrix<f64>,
    dt: f64,
    sensor: &SensorMap,
) -> Result<SensitivityHistory, ModelError> {
    simulate_with_sensitivities(spec, params, ics, input, dt, sensor).map(|(_, s)| s)
}

#[cfg(test)]
mod tests {
    use super::super::state_space::simulate;
    use super::super::ExcitationKind;
    use super::*;

    fn sdof_spec() -> ModelSpec {
        ModelSpec::SdofLinear {
            nominal_frequency_hz: 0.9,
            damping_ratio: 0.04,
            excitation: ExcitationKind::BaseAcceleration,
        }
    }

    fn test_input(n: usize) -> DMatrix<f64> {
        DMatrix::from_fn(1, n, |_, k| (0.37 * k as f64).sin() + 0.2 * (0.11 * k as f64).cos())
    }

    /// Central finite differences of the observed outputs in every
    /// parameter, relative step 1e-6.
    fn finite_difference_outputs(
        spec: &ModelSpec,
        params: &ParameterVector,
        ics: &InitialConditions,
        input: &DMatrix<f64>,
        dt: f64,
        sensor: &SensorMap,
    ) -> Vec<DMatrix<f64>> {
        let n_theta = spec.n_params();
        let n = spec.n_dof();
        let observed = |p: &ParameterVector, i: &InitialConditions| {
            simulate(spec, p, i, input, dt)
                .unwrap()
                .observed(sensor)
                .unwrap()
        };
        // Perturb the flat vector [params, displacements, velocities].
        let apply = |idx: usize, delta: f64| -> (ParameterVector, InitialConditions) {
            let mut p = params.clone();
            let mut i = ics.clone();
            if idx < n_theta {
                p.0[idx] += delta;
            } else if idx < n_theta + n {
                i.displacements[idx - n_theta] += delta;
            } else {
                i.velocities[idx - n_theta - n] += delta;
            }
            (p, i)
        };
        let base = |idx: usize| -> f64 {
            if idx < n_theta {
                params.0[idx]
            } else if idx < n_theta + n {
                ics.displacements[idx - n_theta]
            } else {
                ics.velocities[idx - n_theta - n]
            }
        };
        (0..n_theta + 2 * n)
            .map(|idx| {
                let h = 1e-6 * (1.0 + base(idx).abs());
                let (pp, ip) = apply(idx, h);
                let (pm, im) = apply(idx, -h);
                (observed(&pp, &ip) - observed(&pm, &im)) / (2.0 * h)
            })
            .collect()
    }

    fn assert_matches_fd(
        spec: &ModelSpec,
        params: &ParameterVector,
        ics: &InitialConditions,
        sensor: &SensorMap,
        dt: f64,
        n: usize,
    ) {
        let input = test_input(n);
        let (_, sens) =
            simulate_with_sensitivities(spec, params, ics, &input, dt, sensor).unwrap();
        let fd = finite_difference_outputs(spec, params, ics, &input, dt, sensor);
        for (p, (a, f)) in sens.outputs.iter().zip(fd.iter()).enumerate() {
            let mut worst = 0.0_f64;
            for (av, fv) in a.iter().zip(f.iter()) {
                worst = worst.max((av - fv).abs() / (1.0 + av.abs()));
            }
            assert!(worst < 1e-5, "parameter {p}: max scaled error {worst:e}");
        }
    }

    #[test]
    fn initial_displacement_sensitivity_is_identity_at_t0() {
        let spec = super::super::tests::three_story_spec();
        let params = spec.nominal_params();
        let sensor = SensorMap::all_displacements(3);
        let input = test_input(10);
        let (_, sens) = simulate_with_sensitivities(
            &spec,
            &params,
            &InitialConditions::zero(3),
            &input,
            0.005,
            &sensor,
        )
        .unwrap();
        // d(displacement_i at t=0) / d(initial displacement_l) = delta_il.
        for l in 0..3 {
            for row in 0..3 {
                let expected = if row == l { 1.0 } else { 0.0 };
                assert_eq!(sens.outputs[sens.n_theta + l][(row, 0)], expected);
            }
        }
        // Velocity entries do not move the initial displacement.
        for l in 3..6 {
            for row in 0..3 {
                assert_eq!(sens.outputs[sens.n_theta + l][(row, 0)], 0.0);
            }
        }
    }

    #[test]
    fn sdof_sensitivities_match_finite_differences() {
        let spec = sdof_spec();
        let params = ParameterVector(vec![0.85]);
        let ics = InitialConditions {
            displacements: vec![0.03],
            velocities: vec![-0.02],
        };
        let sensor = SensorMap {
            observed_dofs: vec![0],
            quantity: OutputQuantity::Displacement,
        };
        assert_matches_fd(&spec, &params, &ics, &sensor, 0.02, 400);
    }

    #[test]
    fn shear_acceleration_sensitivities_match_finite_differences() {
        let spec = super::super::tests::three_story_spec();
        let mut params = spec.nominal_params();
        params.0[1] = 1.1;
        params.0[4] = 0.8;
        let ics = InitialConditions {
            displacements: vec![1e-3, -2e-3, 0.5e-3],
            velocities: vec![0.01, 0.0, -0.02],
        };
        let sensor = SensorMap {
            observed_dofs: vec![2],
            quantity: OutputQuantity::Acceleration,
        };
        assert_matches_fd(&spec, &params, &ics, &sensor, 0.005, 300);
    }

    #[test]
    fn velocity_sensitivities_match_finite_differences() {
        let spec = super::super::tests::three_story_spec();
        let params = spec.nominal_params();
        let ics = InitialConditions::zero(3);
        let sensor = SensorMap {
            observed_dofs: vec![0, 2],
            quantity: OutputQuantity::Velocity,
        };
        assert_matches_fd(&spec, &params, &ics, &sensor, 0.005, 250);
    }

    #[test]
    fn ic_sensitivities_do_not_depend_on_input() {
        let spec = sdof_spec();
        let params = ParameterVector(vec![0.9]);
        let ics = InitialConditions {
            displacements: vec![0.01],
            velocities: vec![0.0],
        };
        let sensor = SensorMap {
            observed_dofs: vec![0],
            quantity: OutputQuantity::Displacement,
        };
        let n = 200;
        let (_, s1) =
            simulate_with_sensitivities(&spec, &params, &ics, &test_input(n), 0.01, &sensor)
                .unwrap();
        let (_, s2) =
            simulate_with_sensitivities(&spec, &params, &ics, &DMatrix::zeros(1, n), 0.01, &sensor)
                .unwrap();
        for l in 0..2 {
            let diff = (&s1.outputs[s1.n_theta + l] - &s2.outputs[s2.n_theta + l]).amax();
            assert_eq!(diff, 0.0, "IC sensitivity {l} depends on the input");
        }
    }

    #[test]
    fn response_part_matches_plain_simulation() {
        let spec = sdof_spec();
        let params = ParameterVector(vec![0.9]);
        let ics = InitialConditions {
            displacements: vec![0.02],
            velocities: vec![0.01],
        };
        let sensor = SensorMap {
            observed_dofs: vec![0],
            quantity: OutputQuantity::Displacement,
        };
        let input = test_input(150);
        let (resp, _) =
            simulate_with_sensitivities(&spec, &params, &ics, &input, 0.01, &sensor).unwrap();
        let plain = simulate(&spec, &params, &ics, &input, 0.01).unwrap();
        assert_eq!(
            (&resp.displacement - &plain.displacement).amax(),
            0.0,
            "joint simulation deviates from simulate()"
        );
    }
}
