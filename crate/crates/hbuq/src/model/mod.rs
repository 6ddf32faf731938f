//! Linear structural models: assembly, modal analysis, exact discrete-time
//! simulation, and response sensitivities.
//!
//! Two model families are supported:
//!
//! * a single-degree-of-freedom oscillator with unit mass, parameterized by
//!   its natural frequency (Hz), and
//! * an N-story shear building with known diagonal mass matrix, story
//!   stiffnesses scaled by multipliers, and a modal damping matrix built from
//!   fixed nominal mode shapes, one multiplier per mode.
//!
//! Units are SI throughout (kg, N/m, m, s); frequencies cross the API
//! boundary in Hz.

mod sensitivity;
mod state_space;

pub use sensitivity::{simulate_with_sensitivities, response_sensitivities, SensitivityHistory};
pub use state_space::{discretize, simulate, DiscreteStateSpace, ResponseHistory, StateSpaceModel};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix not positive definite: {0}")]
    NonPositiveDefinite(String),
    #[error("invalid model specification: {0}")]
    InvalidSpec(String),
    #[error("eigensolver failed to converge")]
    NonConvergence,
    #[error("numerical failure: {0}")]
    Numerical(String),
}

/// How the known input series drives the structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExcitationKind {
    /// One input channel: ground acceleration. The load vector is
    /// `-M * 1 * u(t)` and recorded accelerations are total (relative plus
    /// ground), matching what a shake-table accelerometer measures.
    BaseAcceleration,
    /// One input channel per DOF: direct nodal forces.
    NodalForce,
}

/// Nominal modal data of a shear building: the fixed quantities entering the
/// damping-matrix dyads. Mode shapes are stored row-per-DOF, column-per-mode.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModalData {
    pub frequencies_hz: Vec<f64>,
    pub damping_ratios: Vec<f64>,
    pub mode_shapes: Vec<Vec<f64>>,
}

impl ModalData {
    pub fn shape_matrix(&self) -> DMatrix<f64> {
        let rows = self.mode_shapes.len();
        let cols = self.mode_shapes.first().map_or(0, Vec::len);
        DMatrix::from_fn(rows, cols, |i, j| self.mode_shapes[i][j])
    }
}

/// Declarative description of a structural model.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    SdofLinear {
        nominal_frequency_hz: f64,
        damping_ratio: f64,
        excitation: ExcitationKind,
    },
    ShearBuilding {
        masses_kg: Vec<f64>,
        nominal_stiffness_n_per_m: Vec<f64>,
        nominal_modal: ModalData,
        excitation: ExcitationKind,
    },
}

impl ModelSpec {
    pub fn n_dof(&self) -> usize {
        match self {
            ModelSpec::SdofLinear { .. } => 1,
            ModelSpec::ShearBuilding { masses_kg, .. } => masses_kg.len(),
        }
    }

    /// Number of structural parameters: 1 for the SDOF frequency, `2 N`
    /// (stiffness then damping multipliers) for the shear building.
    pub fn n_params(&self) -> usize {
        match self {
            ModelSpec::SdofLinear { .. } => 1,
            ModelSpec::ShearBuilding { masses_kg, .. } => 2 * masses_kg.len(),
        }
    }

    pub fn n_input_channels(&self) -> usize {
        match self.excitation() {
            ExcitationKind::BaseAcceleration => 1,
            ExcitationKind::NodalForce => self.n_dof(),
        }
    }

    pub fn excitation(&self) -> ExcitationKind {
        match self {
            ModelSpec::SdofLinear { excitation, .. } => *excitation,
            ModelSpec::ShearBuilding { excitation, .. } => *excitation,
        }
    }

    /// The all-nominal parameter vector: the nominal frequency for the SDOF
    /// model, all-ones multipliers for the shear building.
    pub fn nominal_params(&self) -> ParameterVector {
        match self {
            ModelSpec::SdofLinear {
                nominal_frequency_hz,
                ..
            } => ParameterVector(vec![*nominal_frequency_hz]),
            ModelSpec::ShearBuilding { masses_kg, .. } => {
                ParameterVector(vec![1.0; 2 * masses_kg.len()])
            }
        }
    }

    /// Checks the structural invariants of the specification.
    pub fn validate(&self) -> Result<(), ModelError> {
        match self {
            ModelSpec::SdofLinear {
                nominal_frequency_hz,
                damping_ratio,
                ..
            } => {
                if !(*nominal_frequency_hz > 0.0) {
                    return Err(ModelError::InvalidSpec(
                        "nominal frequency must be positive".into(),
                    ));
                }
                if !(*damping_ratio > 0.0 && *damping_ratio < 1.0) {
                    return Err(ModelError::InvalidSpec(
                        "damping ratio must lie in (0, 1)".into(),
                    ));
                }
                Ok(())
            }
            ModelSpec::ShearBuilding {
                masses_kg,
                nominal_stiffness_n_per_m,
                nominal_modal,
                ..
            } => {
                let n = masses_kg.len();
                if n == 0 {
                    return Err(ModelError::InvalidSpec("at least one story".into()));
                }
                if nominal_stiffness_n_per_m.len() != n {
                    return Err(ModelError::DimensionMismatch(format!(
                        "{} stiffness values for {} stories",
                        nominal_stiffness_n_per_m.len(),
                        n
                    )));
                }
                if masses_kg.iter().any(|m| !(*m > 0.0)) {
                    return Err(ModelError::InvalidSpec("all masses must be positive".into()));
                }
                if nominal_stiffness_n_per_m.iter().any(|k| !(*k > 0.0)) {
                    return Err(ModelError::InvalidSpec(
                        "all nominal stiffnesses must be positive".into(),
                    ));
                }
                if nominal_modal.frequencies_hz.len() != n
                    || nominal_modal.damping_ratios.len() != n
                    || nominal_modal.mode_shapes.len() != n
                    || nominal_modal.mode_shapes.iter().any(|r| r.len() != n)
                {
                    return Err(ModelError::DimensionMismatch(
                        "nominal modal data must be square in the story count".into(),
                    ));
                }
                if nominal_modal
                    .damping_ratios
                    .iter()
                    .any(|z| !(*z > 0.0 && *z < 1.0))
                {
                    return Err(ModelError::InvalidSpec(
                        "modal damping ratios must lie in (0, 1)".into(),
                    ));
                }
                // Mass-orthogonality of the nominal mode shapes.
                let phi = nominal_modal.shape_matrix();
                let m = DMatrix::from_diagonal(&DVector::from_vec(masses_kg.clone()));
                let gram = phi.transpose() * &m * &phi;
                for p in 0..n {
                    for q in 0..n {
                        if p != q {
                            let scale = (gram[(p, p)] * gram[(q, q)]).sqrt();
                            if gram[(p, q)].abs() > 1e-8 * scale {
                                return Err(ModelError::InvalidSpec(format!(
                                    "mode shapes {p} and {q} are not mass-orthogonal"
                                )));
                            }
                        }
                    }
                }
                Ok(())
            }
        }
    }

    /// True when `params` is inside the physically feasible region.
    pub fn params_feasible(&self, params: &ParameterVector) -> bool {
        if params.0.len() != self.n_params() {
            return false;
        }
        match self {
            ModelSpec::SdofLinear { .. } => params.0[0] > 0.0 && params.0[0].is_finite(),
            ModelSpec::ShearBuilding { masses_kg, .. } => {
                let n = masses_kg.len();
                params.0[..n].iter().all(|k| *k > 0.0 && k.is_finite())
                    && params.0[n..].iter().all(|c| *c >= 0.0 && c.is_finite())
            }
        }
    }
}

/// Structural parameters: `[f]` (Hz) for the SDOF model; stiffness
/// multipliers followed by damping multipliers for the shear building.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParameterVector(pub Vec<f64>);

impl ParameterVector {
    pub fn as_dvector(&self) -> DVector<f64> {
        DVector::from_vec(self.0.clone())
    }

    pub fn from_dvector(v: &DVector<f64>) -> Self {
        ParameterVector(v.iter().cloned().collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// State of the structure at the start of a record: one displacement and one
/// velocity per DOF.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialConditions {
    pub displacements: Vec<f64>,
    pub velocities: Vec<f64>,
}

impl InitialConditions {
    pub fn zero(n_dof: usize) -> Self {
        Self {
            displacements: vec![0.0; n_dof],
            velocities: vec![0.0; n_dof],
        }
    }

    pub fn validate(&self, n_dof: usize) -> Result<(), ModelError> {
        if self.displacements.len() != n_dof || self.velocities.len() != n_dof {
            return Err(ModelError::DimensionMismatch(format!(
                "initial conditions sized {}+{} for {} DOF",
                self.displacements.len(),
                self.velocities.len(),
                n_dof
            )));
        }
        if self
            .displacements
            .iter()
            .chain(self.velocities.iter())
            .any(|v| !v.is_finite())
        {
            return Err(ModelError::InvalidSpec(
                "initial conditions must be finite".into(),
            ));
        }
        Ok(())
    }

    /// Packs into the state-vector layout `[displacements; velocities]`.
    pub fn state_vector(&self) -> DVector<f64> {
        let mut v = DVector::zeros(2 * self.displacements.len());
        for (i, d) in self.displacements.iter().enumerate() {
            v[i] = *d;
        }
        let n = self.displacements.len();
        for (i, s) in self.velocities.iter().enumerate() {
            v[n + i] = *s;
        }
        v
    }

    pub fn from_state_vector(v: &DVector<f64>) -> Self {
        let n = v.len() / 2;
        Self {
            displacements: v.rows(0, n).iter().cloned().collect(),
            velocities: v.rows(n, n).iter().cloned().collect(),
        }
    }
}

/// Which kinematic quantity a sensor records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputQuantity {
    Displacement,
    Velocity,
    Acceleration,
}

/// Selection of observed DOFs of one kinematic quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorMap {
    pub observed_dofs: Vec<usize>,
    pub quantity: OutputQuantity,
}

impl SensorMap {
    pub fn all_displacements(n_dof: usize) -> Self {
        Self {
            observed_dofs: (0..n_dof).collect(),
            quantity: OutputQuantity::Displacement,
        }
    }

    pub fn n_observed(&self) -> usize {
        self.observed_dofs.len()
    }

    pub fn validate(&self, n_dof: usize) -> Result<(), ModelError> {
        if self.observed_dofs.is_empty() {
            return Err(ModelError::InvalidSpec("no observed DOF".into()));
        }
        if let Some(bad) = self.observed_dofs.iter().find(|d| **d >= n_dof) {
            return Err(ModelError::DimensionMismatch(format!(
                "observed DOF {bad} out of range for {n_dof} DOF"
            )));
        }
        Ok(())
    }
}

/// Assembled mass, stiffness, and damping matrices.
#[derive(Debug, Clone)]
pub struct StructuralMatrices {
    pub mass: DMatrix<f64>,
    pub stiffness: DMatrix<f64>,
    pub damping: DMatrix<f64>,
}

/// Assembles (M, K, C) for the given parameters.
///
/// The SDOF model has unit mass with `K = m (2 pi f)^2` and
/// `C = 2 zeta m (2 pi f)`. The shear building stiffness couples adjacent
/// stories through the scaled story stiffnesses; its damping matrix is the
/// multiplier-weighted sum of the nominal modal dyads
/// `4 pi f_p xi_p (M phi_p phi_p^T M) / (phi_p^T M phi_p)`.
pub fn assemble_matrices(
    spec: &ModelSpec,
    params: &ParameterVector,
) -> Result<StructuralMatrices, ModelError> {
    if params.len() != spec.n_params() {
        return Err(ModelError::DimensionMismatch(format!(
            "{} parameters supplied, model requires {}",
            params.len(),
            spec.n_params()
        )));
    }
    if !spec.params_feasible(params) {
        return Err(ModelError::NonPositiveDefinite(
            "stiffness parameters must be positive and damping multipliers non-negative".into(),
        ));
    }
    match spec {
        ModelSpec::SdofLinear { damping_ratio, .. } => {
            let f = params.0[0];
            let omega = 2.0 * std::f64::consts::PI * f;
            let m = 1.0;
            Ok(StructuralMatrices {
                mass: DMatrix::from_element(1, 1, m),
                stiffness: DMatrix::from_element(1, 1, m * omega * omega),
                damping: DMatrix::from_element(1, 1, 2.0 * damping_ratio * m * omega),
            })
        }
        ModelSpec::ShearBuilding {
            masses_kg,
            nominal_stiffness_n_per_m,
            nominal_modal,
            ..
        } => {
            let n = masses_kg.len();
            let mass = DMatrix::from_diagonal(&DVector::from_vec(masses_kg.clone()));
            let mut stiffness = DMatrix::zeros(n, n);
            for story in 0..n {
                let k = nominal_stiffness_n_per_m[story] * params.0[story];
                // Story `story` connects DOF `story` to DOF `story - 1`
                // (the ground for the first story).
                stiffness[(story, story)] += k;
                if story > 0 {
                    stiffness[(story - 1, story - 1)] += k;
                    stiffness[(story - 1, story)] -= k;
                    stiffness[(story, story - 1)] -= k;
                }
            }
            let mut damping = DMatrix::zeros(n, n);
            let phi = nominal_modal.shape_matrix();
            for p in 0..n {
                let shape = phi.column(p).into_owned();
                let m_shape = &mass * &shape;
                let modal_mass = shape.dot(&m_shape);
                let coeff = 4.0
                    * std::f64::consts::PI
                    * nominal_modal.frequencies_hz[p]
                    * nominal_modal.damping_ratios[p]
                    * params.0[n + p]
                    / modal_mass;
                damping += (&m_shape * m_shape.transpose()) * coeff;
            }
            // Defensive PD check; the shear assembly with positive story
            // stiffnesses is PD, so a failure here means corrupt input.
            if nalgebra::Cholesky::new(stiffness.clone()).is_none() {
                return Err(ModelError::NonPositiveDefinite(
                    "assembled stiffness matrix is not positive definite".into(),
                ));
            }
            Ok(StructuralMatrices {
                mass,
                stiffness,
                damping,
            })
        }
    }
}

/// Derivatives of (K, C) with respect to one structural parameter.
#[derive(Debug, Clone)]
pub(crate) struct MatrixDerivative {
    pub d_stiffness: DMatrix<f64>,
    pub d_damping: DMatrix<f64>,
}

/// Derivatives of the assembled matrices with respect to every parameter.
pub(crate) fn assemble_derivatives(
    spec: &ModelSpec,
    params: &ParameterVector,
) -> Result<Vec<MatrixDerivative>, ModelError> {
    match spec {
        ModelSpec::SdofLinear { damping_ratio, .. } => {
            let f = params.0[0];
            let m = 1.0;
            let two_pi = 2.0 * std::f64::consts::PI;
            Ok(vec![MatrixDerivative {
                d_stiffness: DMatrix::from_element(1, 1, 2.0 * m * two_pi * two_pi * f),
                d_damping: DMatrix::from_element(1, 1, 2.0 * damping_ratio * m * two_pi),
            }])
        }
        ModelSpec::ShearBuilding {
            masses_kg,
            nominal_stiffness_n_per_m,
            nominal_modal,
            ..
        } => {
            let n = masses_kg.len();
            let mass = DMatrix::from_diagonal(&DVector::from_vec(masses_kg.clone()));
            let phi = nominal_modal.shape_matrix();
            let mut out = Vec::with_capacity(2 * n);
            for story in 0..n {
                let k = nominal_stiffness_n_per_m[story];
                let mut dk = DMatrix::zeros(n, n);
                dk[(story, story)] += k;
                if story > 0 {
                    dk[(story - 1, story - 1)] += k;
                    dk[(story - 1, story)] -= k;
                    dk[(story, story - 1)] -= k;
                }
                out.push(MatrixDerivative {
                    d_stiffness: dk,
                    d_damping: DMatrix::zeros(n, n),
                });
            }
            for p in 0..n {
                let shape = phi.column(p).into_owned();
                let m_shape = &mass * &shape;
                let modal_mass = shape.dot(&m_shape);
                let coeff = 4.0
                    * std::f64::consts::PI
                    * nominal_modal.frequencies_hz[p]
                    * nominal_modal.damping_ratios[p]
                    / modal_mass;
                out.push(MatrixDerivative {
                    d_stiffness: DMatrix::zeros(n, n),
                    d_damping: (&m_shape * m_shape.transpose()) * coeff,
                });
            }
            Ok(out)
        }
    }
}

/// Undamped modal solution of `K phi = omega^2 M phi`.
#[derive(Debug, Clone)]
pub struct ModalSolution {
    /// Natural frequencies in Hz, ascending.
    pub frequencies_hz: DVector<f64>,
    /// Mass-normalized mode shapes, one column per mode (`phi^T M phi = I`).
    pub mode_shapes: DMatrix<f64>,
}

/// Solves the generalized eigenproblem for a diagonal positive mass matrix
/// and symmetric PD stiffness matrix.
pub fn modal_analysis(
    mass: &DMatrix<f64>,
    stiffness: &DMatrix<f64>,
) -> Result<ModalSolution, ModelError> {
    let n = mass.nrows();
    if mass.ncols() != n || stiffness.nrows() != n || stiffness.ncols() != n {
        return Err(ModelError::DimensionMismatch(
            "mass and stiffness must be square of equal size".into(),
        ));
    }
    let diag = mass.diagonal();
    if diag.iter().any(|m| !(*m > 0.0)) {
        return Err(ModelError::NonPositiveDefinite(
            "mass matrix must have positive diagonal".into(),
        ));
    }
    // Symmetric reduction: B = M^{-1/2} K M^{-1/2}.
    let inv_sqrt = diag.map(|m| 1.0 / m.sqrt());
    let b = DMatrix::from_fn(n, n, |i, j| stiffness[(i, j)] * inv_sqrt[i] * inv_sqrt[j]);
    let eig = nalgebra::SymmetricEigen::try_new(crate::linalg::symmetrize(&b), 1e-14, 0)
        .ok_or(ModelError::NonConvergence)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .expect("finite eigenvalues")
    });
    if eig.eigenvalues[order[0]] <= 0.0 {
        return Err(ModelError::NonPositiveDefinite(
            "stiffness matrix is not positive definite".into(),
        ));
    }

    let mut frequencies = DVector::zeros(n);
    let mut shapes = DMatrix::zeros(n, n);
    for (mode, &idx) in order.iter().enumerate() {
        frequencies[mode] = eig.eigenvalues[idx].sqrt() / (2.0 * std::f64::consts::PI);
        let mut col = DVector::zeros(n);
        for i in 0..n {
            col[i] = eig.eigenvectors[(i, idx)] * inv_sqrt[i];
        }
        // Deterministic sign: largest-magnitude entry positive.
        let pivot = col.iter().cloned().fold(0.0_f64, |acc, v| {
            if v.abs() > acc.abs() {
                v
            } else {
                acc
            }
        });
        if pivot < 0.0 {
            col = -col;
        }
        shapes.set_column(mode, &col);
    }
    Ok(ModalSolution {
        frequencies_hz: frequencies,
        mode_shapes: shapes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// The three-story configuration used throughout the shear-building
    /// tests: measured masses with nominal story stiffnesses.
    pub(crate) fn three_story_spec() -> ModelSpec {
        let masses = vec![5.63, 6.03, 4.66];
        let stiffness = vec![20.88e3, 22.37e3, 24.21e3];
        let mass = DMatrix::from_diagonal(&DVector::from_vec(masses.clone()));
        let mut k = DMatrix::zeros(3, 3);
        for story in 0..3 {
            k[(story, story)] += stiffness[story];
            if story > 0 {
                k[(story - 1, story - 1)] += stiffness[story];
                k[(story - 1, story)] -= stiffness[story];
                k[(story, story - 1)] -= stiffness[story];
            }
        }
        let modal = modal_analysis(&mass, &k).unwrap();
        ModelSpec::ShearBuilding {
            masses_kg: masses,
            nominal_stiffness_n_per_m: stiffness,
            nominal_modal: ModalData {
                frequencies_hz: modal.frequencies_hz.iter().cloned().collect(),
                damping_ratios: vec![0.0239, 0.0087, 0.0065],
                mode_shapes: (0..3)
                    .map(|i| (0..3).map(|p| modal.mode_shapes[(i, p)]).collect())
                    .collect(),
            },
            excitation: ExcitationKind::BaseAcceleration,
        }
    }

    #[test]
    fn shear_stiffness_matches_hand_assembly() {
        let spec = three_story_spec();
        let params = spec.nominal_params();
        let mats = assemble_matrices(&spec, &params).unwrap();
        // First diagonal entry is k1 + k2; first off-diagonal is -k2.
        assert_relative_eq!(mats.stiffness[(0, 0)], 43.25e3, max_relative = 1e-12);
        assert_relative_eq!(mats.stiffness[(0, 1)], -22.37e3, max_relative = 1e-12);
        assert_relative_eq!(mats.stiffness[(1, 1)], 46.58e3, max_relative = 1e-12);
        assert_relative_eq!(mats.stiffness[(2, 2)], 24.21e3, max_relative = 1e-12);
        assert_eq!(mats.stiffness[(0, 2)], 0.0);
        assert!(mats.mass.is_identity(0.0) == false);
    }

    #[test]
    fn zero_stiffness_multiplier_is_rejected() {
        let spec = three_story_spec();
        let mut params = spec.nominal_params();
        params.0[1] = 0.0;
        let err = assemble_matrices(&spec, &params).unwrap_err();
        assert!(matches!(err, ModelError::NonPositiveDefinite(_)));
    }

    #[test]
    fn wrong_parameter_count_is_rejected() {
        let spec = three_story_spec();
        let err = assemble_matrices(&spec, &ParameterVector(vec![1.0; 5])).unwrap_err();
        assert!(matches!(err, ModelError::DimensionMismatch(_)));
    }

    #[test]
    fn damping_matrix_reproduces_nominal_modal_ratios() {
        // Projecting the assembled C onto the nominal modes must return the
        // nominal damping ratios exactly when all damping multipliers are 1.
        let spec = three_story_spec();
        let mats = assemble_matrices(&spec, &spec.nominal_params()).unwrap();
        let ModelSpec::ShearBuilding { nominal_modal, .. } = &spec else {
            unreachable!()
        };
        let phi = nominal_modal.shape_matrix();
        for p in 0..3 {
            let shape = phi.column(p).into_owned();
            let num = (shape.transpose() * &mats.damping * &shape)[(0, 0)];
            let den = (shape.transpose() * &mats.mass * &shape)[(0, 0)];
            let omega = 2.0 * std::f64::consts::PI * nominal_modal.frequencies_hz[p];
            let ratio = num / (2.0 * omega * den);
            assert_relative_eq!(ratio, nominal_modal.damping_ratios[p], epsilon = 1e-10);
        }
    }

    #[test]
    fn sdof_assembly_is_scalar_oscillator() {
        let spec = ModelSpec::SdofLinear {
            nominal_frequency_hz: 2.0,
            damping_ratio: 0.05,
            excitation: ExcitationKind::BaseAcceleration,
        };
        let mats = assemble_matrices(&spec, &ParameterVector(vec![2.0])).unwrap();
        let omega = 4.0 * std::f64::consts::PI;
        assert_relative_eq!(mats.stiffness[(0, 0)], omega * omega, max_relative = 1e-14);
        assert_relative_eq!(mats.damping[(0, 0)], 0.1 * omega, max_relative = 1e-14);
    }

    #[test]
    fn modal_analysis_sdof_frequency() {
        let m = DMatrix::from_element(1, 1, 2.5);
        let k = DMatrix::from_element(1, 1, 640.0);
        let modal = modal_analysis(&m, &k).unwrap();
        let expected = (640.0_f64 / 2.5).sqrt() / (2.0 * std::f64::consts::PI);
        assert_relative_eq!(modal.frequencies_hz[0], expected, max_relative = 1e-14);
    }

    #[test]
    fn modal_analysis_against_characteristic_polynomial() {
        // Independent oracle: eigenvalues of M^{-1} K from the cubic
        // characteristic polynomial, solved with the trigonometric formula.
        let spec = three_story_spec();
        let mats = assemble_matrices(&spec, &spec.nominal_params()).unwrap();
        let modal = modal_analysis(&mats.mass, &mats.stiffness).unwrap();

        let a = &mats.mass.clone().try_inverse().unwrap() * &mats.stiffness;
        // det(A - x I) = -x^3 + c2 x^2 + c1 x + c0
        let c2 = a.trace();
        let c1 = -0.5 * (a.trace().powi(2) - (&a * &a).trace());
        let c0 = a.determinant();
        // Roots of x^3 - c2 x^2 - c1 x - c0 = 0 via the trigonometric method.
        let p = (-3.0 * c1 - c2 * c2) / 3.0; // depressed cubic t^3 + p t + q
        let q = -(2.0 * c2.powi(3) + 9.0 * c2 * c1 + 27.0 * c0) / 27.0;
        let m = 2.0 * (-p / 3.0).sqrt();
        let acos_arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
        let theta = acos_arg.acos() / 3.0;
        let mut roots: Vec<f64> = (0..3)
            .map(|k| m * (theta - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos() + c2 / 3.0)
            .collect();
        roots.sort_by(|x, y| x.partial_cmp(y).unwrap());

        for (mode, root) in roots.iter().enumerate() {
            let f = root.sqrt() / (2.0 * std::f64::consts::PI);
            assert_relative_eq!(modal.frequencies_hz[mode], f, max_relative = 1e-10);
        }
        assert!(modal.frequencies_hz[0] < modal.frequencies_hz[1]);
        assert!(modal.frequencies_hz[1] < modal.frequencies_hz[2]);
    }

    #[test]
    fn modal_analysis_residual_and_normalization() {
        let spec = three_story_spec();
        let mats = assemble_matrices(&spec, &spec.nominal_params()).unwrap();
        let modal = modal_analysis(&mats.mass, &mats.stiffness).unwrap();
        let gram = modal.mode_shapes.transpose() * &mats.mass * &modal.mode_shapes;
        assert_relative_eq!(gram, DMatrix::identity(3, 3), epsilon = 1e-10);
        for mode in 0..3 {
            let omega2 = (2.0 * std::f64::consts::PI * modal.frequencies_hz[mode]).powi(2);
            let shape = modal.mode_shapes.column(mode).into_owned();
            let residual = &mats.stiffness * &shape - &mats.mass * &shape * omega2;
            let scale = (&mats.stiffness * &shape).norm();
            assert!(residual.norm() <= 1e-10 * scale);
        }
    }

    #[test]
    fn proportional_stiffness_gives_repeated_frequency() {
        // K = c M: every mode sits at sqrt(c) / 2 pi.
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0, 4.0]));
        let k = &m * 25.0;
        let modal = modal_analysis(&m, &k).unwrap();
        for mode in 0..3 {
            assert_relative_eq!(
                modal.frequencies_hz[mode],
                5.0 / (2.0 * std::f64::consts::PI),
                max_relative = 1e-12
            );
        }
        let gram = modal.mode_shapes.transpose() * &m * &modal.mode_shapes;
        assert_relative_eq!(gram, DMatrix::identity(3, 3), epsilon = 1e-10);
    }

    #[test]
    fn validate_catches_non_orthogonal_modes() {
        let spec = ModelSpec::ShearBuilding {
            masses_kg: vec![1.0, 1.0],
            nominal_stiffness_n_per_m: vec![100.0, 100.0],
            nominal_modal: ModalData {
                frequencies_hz: vec![1.0, 2.0],
                damping_ratios: vec![0.01, 0.01],
                mode_shapes: vec![vec![1.0, 1.0], vec![0.5, 1.0]],
            },
            excitation: ExcitationKind::BaseAcceleration,
        };
        assert!(matches!(spec.validate(), Err(ModelError::InvalidSpec(_))));
    }

    #[test]
    fn three_story_spec_is_valid() {
        three_story_spec().validate().unwrap();
    }

    #[test]
    fn feasibility_checks_sign_constraints() {
        let spec = three_story_spec();
        assert!(spec.params_feasible(&spec.nominal_params()));
        let mut p = spec.nominal_params();
        p.0[0] = -0.1;
        assert!(!spec.params_feasible(&p));
        let mut p = spec.nominal_params();
        p.0[3] = -0.1;
        assert!(!spec.params_feasible(&p));
    }
}
