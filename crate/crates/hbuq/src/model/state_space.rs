//! First-order state-space realization and exact zero-order-hold simulation.
//!
//! The second-order equations of motion `M q'' + C q' + K q = load(u)` are
//! rewritten with the state `x = [q; q']`:
//!
//! ```text
//! x' = A x + B u,   A = [0 I; -M^{-1}K -M^{-1}C]
//! ```
//!
//! Discretization is the exact zero-order hold: the transition matrix is the
//! matrix exponential `exp(A dt)` and the input matrix is its integral acting
//! on `B`, both read off one augmented matrix exponential. For a linear
//! time-invariant model the sampled recursion then reproduces the continuous
//! solution exactly (the input is piecewise constant by construction), so no
//! integration error enters the inference stack.

use nalgebra::{DMatrix, DVector};

use super::{
    assemble_matrices, ExcitationKind, InitialConditions, ModelError, ModelSpec, OutputQuantity,
    ParameterVector, SensorMap,
};

/// Continuous-time realization plus the recorded-acceleration output map.
///
/// Under base excitation the recorded acceleration is the total (relative
/// plus ground) acceleration, for which the feedthrough cancels:
/// `a_total = -M^{-1}(K q + C q')`. Under nodal forcing the recorded
/// acceleration is the plain acceleration with feedthrough `M^{-1}`.
#[derive(Debug, Clone)]
pub struct StateSpaceModel {
    pub n_dof: usize,
    /// Continuous system matrix, `2 n_dof` square.
    pub a: DMatrix<f64>,
    /// Continuous input matrix, `2 n_dof x n_inputs`.
    pub input: DMatrix<f64>,
    /// Acceleration output map, `n_dof x 2 n_dof`.
    pub output_acc: DMatrix<f64>,
    /// Acceleration feedthrough, `n_dof x n_inputs`.
    pub feedthrough_acc: DMatrix<f64>,
}

impl StateSpaceModel {
    pub fn build(spec: &ModelSpec, params: &ParameterVector) -> Result<Self, ModelError> {
        let mats = assemble_matrices(spec, params)?;
        Self::from_matrices(spec.excitation(), &mats.mass, &mats.stiffness, &mats.damping)
    }

    pub(crate) fn from_matrices(
        excitation: ExcitationKind,
        mass: &DMatrix<f64>,
        stiffness: &DMatrix<f64>,
        damping: &DMatrix<f64>,
    ) -> Result<Self, ModelError> {
        let n = mass.nrows();
        let inv_mass = DMatrix::from_diagonal(&mass.diagonal().map(|m| 1.0 / m));
        let neg_mk = -(&inv_mass * stiffness);
        let neg_mc = -(&inv_mass * damping);

        let mut a = DMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            a[(i, n + i)] = 1.0;
        }
        a.view_mut((n, 0), (n, n)).copy_from(&neg_mk);
        a.view_mut((n, n), (n, n)).copy_from(&neg_mc);

        let mut output_acc = DMatrix::zeros(n, 2 * n);
        output_acc.view_mut((0, 0), (n, n)).copy_from(&neg_mk);
        output_acc.view_mut((0, n), (n, n)).copy_from(&neg_mc);

        let (input, feedthrough_acc) = match excitation {
            ExcitationKind::BaseAcceleration => {
                // load = -M * 1 * u  =>  state input = [0; -1].
                let mut b = DMatrix::zeros(2 * n, 1);
                for i in 0..n {
                    b[(n + i, 0)] = -1.0;
                }
                // Total acceleration: relative (-M^{-1}K q - M^{-1}C q' - 1 u)
                // plus ground (1 u); the input term cancels.
                (b, DMatrix::zeros(n, 1))
            }
            ExcitationKind::NodalForce => {
                let mut b = DMatrix::zeros(2 * n, n);
                b.view_mut((n, 0), (n, n)).copy_from(&inv_mass);
                (b, inv_mass.clone())
            }
        };

        Ok(Self {
            n_dof: n,
            a,
            input,
            output_acc,
            feedthrough_acc,
        })
    }

    pub fn n_inputs(&self) -> usize {
        self.input.ncols()
    }
}

/// Exact zero-order-hold discretization at a fixed sampling interval.
#[derive(Debug, Clone)]
pub struct DiscreteStateSpace {
    pub dt: f64,
    pub transition: DMatrix<f64>,
    pub input: DMatrix<f64>,
}

/// Computes the exact ZOH transition and input matrices at `dt`.
///
/// Both are read from the augmented matrix exponential
/// `exp([[A, B], [0, 0]] dt) = [[Ad, Bd], [0, I]]`.
pub fn discretize(model: &StateSpaceModel, dt: f64) -> Result<DiscreteStateSpace, ModelError> {
    if !(dt > 0.0) {
        return Err(ModelError::InvalidSpec(
            "sampling interval must be positive".into(),
        ));
    }
    let ns = model.a.nrows();
    let ni = model.input.ncols();
    let m = ns + ni;
    let mut aug = DMatrix::zeros(m, m);
    aug.view_mut((0, 0), (ns, ns)).copy_from(&model.a);
    aug.view_mut((0, ns), (ns, ni)).copy_from(&model.input);
    let e = (aug * dt).exp();
    if !crate::linalg::all_finite(&e) {
        return Err(ModelError::Numerical(
            "matrix exponential overflowed during discretization".into(),
        ));
    }
    Ok(DiscreteStateSpace {
        dt,
        transition: e.view((0, 0), (ns, ns)).into_owned(),
        input: e.view((0, ns), (ns, ni)).into_owned(),
    })
}

/// Sampled response of all DOF: one row per DOF, one column per sample.
///
/// Sample `k` corresponds to `t = k dt`; the first column reproduces the
/// initial conditions. The acceleration rows follow the recorded-acceleration
/// convention of [`StateSpaceModel`].
#[derive(Debug, Clone)]
pub struct ResponseHistory {
    pub dt: f64,
    pub displacement: DMatrix<f64>,
    pub velocity: DMatrix<f64>,
    pub acceleration: DMatrix<f64>,
}

impl ResponseHistory {
    pub fn n_samples(&self) -> usize {
        self.displacement.ncols()
    }

    pub fn n_dof(&self) -> usize {
        self.displacement.nrows()
    }

    pub fn quantity(&self, q: OutputQuantity) -> &DMatrix<f64> {
        match q {
            OutputQuantity::Displacement => &self.displacement,
            OutputQuantity::Velocity => &self.velocity,
            OutputQuantity::Acceleration => &self.acceleration,
        }
    }

    /// Extracts the observed channels selected by `sensor` (`N_o x n`).
    pub fn observed(&self, sensor: &SensorMap) -> Result<DMatrix<f64>, ModelError> {
        sensor.validate(self.n_dof())?;
        let src = self.quantity(sensor.quantity);
        let mut out = DMatrix::zeros(sensor.observed_dofs.len(), src.ncols());
        for (row, dof) in sensor.observed_dofs.iter().enumerate() {
            out.row_mut(row).copy_from(&src.row(*dof));
        }
        Ok(out)
    }
}

/// Simulates the deterministic response under a known input series.
///
/// `input` has one row per input channel and one column per sample; the
/// returned history has the same number of samples, with the input sample at
/// step `k` held over `[k dt, (k+1) dt)`.
pub fn simulate(
    spec: &ModelSpec,
    params: &ParameterVector,
    ics: &InitialConditions,
    input: &DMatrix<f64>,
    dt: f64,
) -> Result<ResponseHistory, ModelError> {
    let model = StateSpaceModel::build(spec, params)?;
    ics.validate(model.n_dof)?;
    if input.nrows() != model.n_inputs() {
        return Err(ModelError::DimensionMismatch(format!(
            "{} input channels supplied, model expects {}",
            input.nrows(),
            model.n_inputs()
        )));
    }
    let disc = discretize(&model, dt)?;
    simulate_discrete(&model, &disc, &ics.state_vector(), input)
}

pub(crate) fn simulate_discrete(
    model: &StateSpaceModel,
    disc: &DiscreteStateSpace,
    initial_state: &DVector<f64>,
    input: &DMatrix<f64>,
) -> Result<ResponseHistory, ModelError> {
    let n = model.n_dof;
    let n_samples = input.ncols();
    let mut displacement = DMatrix::zeros(n, n_samples);
    let mut velocity = DMatrix::zeros(n, n_samples);
    let mut acceleration = DMatrix::zeros(n, n_samples);

    let mut state = initial_state.clone();
    for k in 0..n_samples {
        let u = input.column(k);
        for i in 0..n {
            displacement[(i, k)] = state[i];
            velocity[(i, k)] = state[n + i];
        }
        let acc = &model.output_acc * &state + &model.feedthrough_acc * u;
        acceleration.set_column(k, &acc);
        if k + 1 < n_samples {
            state = &disc.transition * &state + &disc.input * u;
        }
    }
    if !crate::linalg::all_finite(&displacement) || !crate::linalg::all_finite(&acceleration) {
        return Err(ModelError::Numerical(
            "simulated response is not finite".into(),
        ));
    }
    Ok(ResponseHistory {
        dt: disc.dt,
        displacement,
        velocity,
        acceleration,
    })
}
