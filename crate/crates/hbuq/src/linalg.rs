//! Small dense symmetric/SPD helpers shared by the inference modules.
//!
//! Everything here operates on `nalgebra` dynamic matrices. The inference
//! layers deal exclusively with small matrices (parameter-space dimension),
//! so numerical robustness is preferred over scalability.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

/// Condition-number threshold above which a symmetric matrix is treated as
/// numerically singular.
pub const SINGULAR_CONDITION: f64 = 1e12;

/// Returns `(m + m^T)/2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Cholesky factorization of a symmetric positive definite matrix.
pub fn cholesky_spd(m: &DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    Cholesky::new(m.clone())
}

/// `ln det(m)` for SPD `m`, via the Cholesky factor.
pub fn log_det_spd(chol: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

/// Explicit inverse of an SPD matrix from its Cholesky factor.
pub fn invert_spd(chol: &Cholesky<f64, Dyn>) -> DMatrix<f64> {
    chol.inverse()
}

/// Condition number of a symmetric matrix from its eigenvalue range.
///
/// Returns `f64::INFINITY` when the smallest eigenvalue is not strictly
/// positive, which also covers indefinite input.
pub fn spd_condition(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 1.0;
    }
    let eig = m.clone().symmetric_eigenvalues();
    let max = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    if min <= 0.0 || !min.is_finite() || !max.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Projects a symmetric matrix onto the SPD cone by flooring its eigenvalues.
///
/// Eigenvalues below `floor` are raised to `floor`; the matrix is rebuilt
/// from the modified spectrum, so the result is SPD whenever `floor > 0`.
pub fn eigen_floor(m: &DMatrix<f64>, floor: f64) -> DMatrix<f64> {
    let eig = nalgebra::SymmetricEigen::new(symmetrize(m));
    let q = &eig.eigenvectors;
    let mut lam = eig.eigenvalues;
    for v in lam.iter_mut() {
        if *v < floor {
            *v = floor;
        }
    }
    symmetrize(&(q * DMatrix::from_diagonal(&lam) * q.transpose()))
}

/// Quadratic form `x^T m x`.
pub fn quadratic_form(m: &DMatrix<f64>, x: &DVector<f64>) -> f64 {
    (x.transpose() * m * x)[(0, 0)]
}

/// True when every entry of the matrix is finite.
pub fn all_finite(m: &DMatrix<f64>) -> bool {
    m.iter().all(|v| v.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn random_spd(n: usize, seed: u64) -> DMatrix<f64> {
        // Simple deterministic fill; A A^T + n I is comfortably SPD.
        let mut state = seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(1);
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let a = DMatrix::from_fn(n, n, |_, _| next());
        &a * a.transpose() + DMatrix::identity(n, n) * n as f64
    }

    #[test]
    fn log_det_matches_direct_determinant() {
        let m = random_spd(4, 3);
        let chol = cholesky_spd(&m).unwrap();
        assert_relative_eq!(log_det_spd(&chol), m.determinant().ln(), max_relative = 1e-10);
    }

    #[test]
    fn inverse_roundtrip() {
        let m = random_spd(5, 11);
        let inv = invert_spd(&cholesky_spd(&m).unwrap());
        let eye = &m * inv;
        assert_relative_eq!(eye, DMatrix::identity(5, 5), epsilon = 1e-10);
    }

    #[test]
    fn eigen_floor_makes_spd() {
        // Indefinite input: diag(1, -2).
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -2.0]));
        let fixed = eigen_floor(&m, 1e-8);
        assert!(cholesky_spd(&fixed).is_some());
        assert_relative_eq!(fixed[(0, 0)], 1.0, epsilon = 1e-12);
        assert_relative_eq!(fixed[(1, 1)], 1e-8, epsilon = 1e-12);
    }

    #[test]
    fn condition_of_identity_is_one() {
        let m = DMatrix::<f64>::identity(3, 3);
        assert_relative_eq!(spd_condition(&m), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn condition_of_indefinite_is_infinite() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0]));
        assert!(spd_condition(&m).is_infinite());
    }
}
