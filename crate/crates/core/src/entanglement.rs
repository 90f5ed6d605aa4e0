//! Symplectic analysis of two-mode Gaussian states.
//!
//! A quadratic master equation with coupling `g x1 x2` and decoherence
//! matrix `Y` never entangles Gaussian states iff the Hermitian matrix
//! `Y - 2 i g sigma` is positive semidefinite, `sigma` being the 2x2
//! symplectic form. For `Y = y I` its eigenvalues are `y - 2g` and `y + 2g`,
//! so the minimal model `y = 2g` sits exactly on the boundary.
//!
//! Entanglement itself is measured by the logarithmic negativity of the
//! partially transposed covariance.

use nalgebra::{Matrix2, Matrix4};

use crate::error::{Error, Result};
use crate::gaussian::GaussianState;

/// Smallest criterion eigenvalue still counted as non-negative.
pub const CRITERION_TOLERANCE: f64 = 1e-12;

pub struct SymplecticForm;

impl SymplecticForm {
    /// `[[0, 1], [-1, 0]]`.
    pub fn single_mode() -> Matrix2<f64> {
        Matrix2::new(0.0, 1.0, -1.0, 0.0)
    }

    /// Block-diagonal form for the ordering `(x1, p1, x2, p2)`.
    pub fn two_mode() -> Matrix4<f64> {
        let mut s = Matrix4::zeros();
        s.fixed_view_mut::<2, 2>(0, 0)
            .copy_from(&Self::single_mode());
        s.fixed_view_mut::<2, 2>(2, 2)
            .copy_from(&Self::single_mode());
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelCriterionResult {
    /// Ascending.
    pub eigenvalues: [f64; 2],
    pub non_entangling: bool,
}

/// Eigenvalues of `Y - 2 i g sigma`, in closed form.
///
/// The matrix is `[[a, b - 2ig], [b + 2ig, c]]` for symmetric `Y = [[a, b], [b, c]]`,
/// with eigenvalues `(a + c)/2 -+ sqrt(((a - c)/2)^2 + b^2 + 4 g^2)`.
pub fn channel_criterion(y: &Matrix2<f64>, g: f64) -> Result<ChannelCriterionResult> {
    let asymmetry = (y[(0, 1)] - y[(1, 0)]).abs();
    if asymmetry > 0.0 {
        return Err(Error::NonSymmetric { asymmetry });
    }
    let (a, b, c) = (y[(0, 0)], y[(0, 1)], y[(1, 1)]);
    let mean = 0.5 * (a + c);
    let radius = (0.25 * (a - c).powi(2) + b * b + 4.0 * g * g).sqrt();
    let eigenvalues = [mean - radius, mean + radius];
    Ok(ChannelCriterionResult {
        eigenvalues,
        non_entangling: eigenvalues[0] >= -CRITERION_TOLERANCE,
    })
}

/// Symplectic invariants `(det A, det B, det C, det sigma)` of the
/// block form `[[A, C], [C^T, B]]`.
fn invariants(cov: &Matrix4<f64>) -> (f64, f64, f64, f64) {
    let a = cov.fixed_view::<2, 2>(0, 0).determinant();
    let b = cov.fixed_view::<2, 2>(2, 2).determinant();
    let c = cov.fixed_view::<2, 2>(0, 2).determinant();
    (a, b, c, cov.determinant())
}

/// Symplectic eigenvalues `(nu_-, nu_+)` of a two-mode covariance.
pub fn symplectic_eigenvalues(cov: &Matrix4<f64>) -> (f64, f64) {
    let (a, b, c, det) = invariants(cov);
    symplectic_from_delta(a + b + 2.0 * c, det)
}

fn symplectic_from_delta(delta: f64, det: f64) -> (f64, f64) {
    let disc = (delta * delta - 4.0 * det).max(0.0).sqrt();
    (
        (0.5 * (delta - disc)).max(0.0).sqrt(),
        (0.5 * (delta + disc)).sqrt(),
    )
}

/// Smallest symplectic eigenvalue of the partial transpose (`p2 -> -p2`).
pub fn partial_transpose_min_eigenvalue(cov: &Matrix4<f64>) -> f64 {
    // partial transposition flips the sign of det C only
    let (a, b, c, det) = invariants(cov);
    symplectic_from_delta(a + b - 2.0 * c, det).0
}

/// `max(0, -log2(2 nu~_-))`.
pub fn log_negativity(state: &GaussianState) -> Result<f64> {
    state.validate()?;
    Ok(log_negativity_unchecked(&state.cov))
}

fn log_negativity_unchecked(cov: &Matrix4<f64>) -> f64 {
    let nu = partial_transpose_min_eigenvalue(cov);
    (-(2.0 * nu).log2()).max(0.0)
}

/// Per-step logarithmic negativity. States are assumed to come from a
/// checked propagation.
pub fn entanglement_along_trajectory(states: &[GaussianState]) -> Vec<f64> {
    states
        .iter()
        .map(|s| log_negativity_unchecked(&s.cov))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::Vector4;

    #[test]
    fn symplectic_form_identities() {
        let s2 = SymplecticForm::single_mode();
        assert_eq!(s2.transpose(), -s2);
        let s4 = SymplecticForm::two_mode();
        assert_eq!(s4 * s4, -Matrix4::identity());
    }

    #[test]
    fn minimal_channel_is_marginal() {
        let g = 0.05;
        let r = channel_criterion(&(Matrix2::identity() * (2.0 * g)), g).unwrap();
        assert_eq!(r.eigenvalues, [0.0, 4.0 * g]);
        assert!(r.non_entangling);
    }

    #[test]
    fn less_noise_entangles() {
        let (g, eps) = (0.05, 1e-3);
        let r = channel_criterion(&(Matrix2::identity() * (2.0 * g - eps)), g).unwrap();
        assert_relative_eq!(r.eigenvalues[0], -eps, max_relative = 1e-12);
        assert!(!r.non_entangling);
    }

    #[test]
    fn no_interaction_no_noise() {
        let r = channel_criterion(&Matrix2::zeros(), 0.0).unwrap();
        assert_eq!(r.eigenvalues, [0.0, 0.0]);
        assert!(r.non_entangling);
    }

    #[test]
    fn criterion_rejects_asymmetric() {
        assert!(channel_criterion(&Matrix2::new(1.0, 0.1, 0.0, 1.0), 0.1).is_err());
    }

    #[test]
    fn vacuum_and_products_separable() {
        assert_eq!(log_negativity(&GaussianState::vacuum()).unwrap(), 0.0);
        let thermal = GaussianState::thermal([0.3, 2.0]);
        assert_eq!(log_negativity(&thermal).unwrap(), 0.0);
        let mut squeezed = GaussianState::vacuum();
        squeezed.cov[(0, 0)] = 0.5 * (-1.0f64).exp();
        squeezed.cov[(1, 1)] = 0.5 * 1.0f64.exp();
        squeezed.mean = Vector4::new(1.0, -2.0, 0.5, 0.0);
        assert_eq!(log_negativity(&squeezed).unwrap(), 0.0);
    }

    #[test]
    fn two_mode_squeezed_vacuum() {
        for s in [0.1, 0.5, 1.3] {
            let st = GaussianState::two_mode_squeezed(s);
            assert_relative_eq!(
                partial_transpose_min_eigenvalue(&st.cov),
                (-2.0 * s).exp() / 2.0,
                max_relative = 1e-9
            );
            assert_relative_eq!(
                log_negativity(&st).unwrap(),
                2.0 * s / std::f64::consts::LN_2,
                max_relative = 1e-9
            );
        }
    }

    #[test]
    fn symplectic_eigenvalues_of_thermal() {
        let (lo, hi) = symplectic_eigenvalues(&GaussianState::thermal([0.25, 1.0]).cov);
        assert_relative_eq!(lo, 0.75, max_relative = 1e-12);
        assert_relative_eq!(hi, 1.5, max_relative = 1e-12);
    }
}
