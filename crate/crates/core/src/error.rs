use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("mass m{oscillator} = {mass} kg does not match (4/3)pi rho r^3 = {expected} kg")]
    MassDensityMismatch {
        oscillator: usize,
        mass: f64,
        expected: f64,
    },

    #[error("spheres overlap: separation {d} m is below 2r = {} m", 2.0 * .r)]
    OverlappingSpheres { d: f64, r: f64 },

    #[error("oscillator {oscillator} is unstable: omega^2 <= K/m")]
    UnstablePotential { oscillator: usize },

    #[error("overcoupled: lower normal mode has omega_-^2 = {omega_minus_sq}")]
    Overcoupled { omega_minus_sq: f64 },

    #[error("either a damping rate or a quality factor is required")]
    MissingDamping,

    #[error("Q = {q} and gamma = {gamma} violate Q = omega/(2 gamma) at omega = {omega}")]
    InconsistentDamping { q: f64, gamma: f64, omega: f64 },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NonSymmetric { asymmetry: f64 },

    #[error("step dt = {dt} too large for generator norm {norm}")]
    StepTooLarge { dt: f64, norm: f64 },

    #[error("uncertainty relation violated at step {step}: min eigenvalue {min_eigenvalue:e}")]
    UncertaintyViolation { step: usize, min_eigenvalue: f64 },

    #[error("non-finite value at step {step}")]
    NonFinite { step: usize },

    #[error("drift matrix is not stable (max real part {max_real_part})")]
    NotStable { max_real_part: f64 },

    #[error("ensemble is empty")]
    EmptyEnsemble,

    #[error("trajectory records have mismatched time grids")]
    MismatchedGrids,

    #[error("feedback audit failed at step {step}: applied {applied}, expected {expected}")]
    FeedbackMismatch {
        step: usize,
        applied: f64,
        expected: f64,
    },

    #[error("truncation leakage {population:e} exceeds {tolerance:e} at step {step}; raise N")]
    Leakage {
        step: usize,
        population: f64,
        tolerance: f64,
    },

    #[error("density matrix invariant '{invariant}' broken at step {step} ({value:e})")]
    DensityInvariant {
        step: usize,
        invariant: &'static str,
        value: f64,
    },

    #[error("unsupported: {0}")]
    Unsupported(&'static str),
}

/// Fails unless `value` is finite and strictly positive.
pub(crate) fn require_positive(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must be finite and strictly positive",
        })
    }
}

pub(crate) fn require_non_negative(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value >= 0.0 {
        Ok(value)
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must be finite and non-negative",
        })
    }
}
