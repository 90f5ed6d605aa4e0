//! Gravity as a classical measurement channel between two oscillators.
//!
//! Two masses on springs interact through gravity. If that interaction is
//! not a quantum channel but continuous position measurement of each mass
//! followed by feedback of the record onto the other, the mean-field force
//! is reproduced at the price of extra noise. This crate models that
//! picture:
//!
//! * [`params`]: laboratory-scale parameters, rates and temperatures in SI
//!   units;
//! * [`model`]: the dimensionless master equations (general feedback,
//!   minimal-noise, and a scaled-noise family);
//! * [`gaussian`]: exact first/second-moment evolution and steady states;
//! * [`entanglement`]: the non-entangling criterion and logarithmic
//!   negativity;
//! * [`conditional`]: the measured, fed-back trajectories as a Gaussian
//!   filter, with ensemble reconstruction;
//! * [`fock`]: a truncated density-matrix solver used as an oracle for all
//!   of the above.
//!
//! ```
//! use gravchan::{gaussian, GaussianState, ModelSpec};
//!
//! let gen = gaussian::build_generator(&ModelSpec::minimal(0.05)).unwrap();
//! let traj = gaussian::propagate(&GaussianState::vacuum(), &gen, 0.01, 1000).unwrap();
//! let en = gravchan::entanglement::entanglement_along_trajectory(&traj);
//! assert!(en.iter().all(|&e| e <= 1e-10));
//! ```

pub mod conditional;
pub mod entanglement;
pub mod error;
pub mod fock;
pub mod gaussian;
pub mod model;
pub mod noise;
pub mod params;

pub use conditional::{EnsembleMoments, TrajectoryRecord};
pub use error::{Error, Result};
pub use fock::{FockConfig, FockState};
pub use gaussian::{GaussianState, Generator};
pub use model::{ModelSpec, Variant};
pub use noise::NoiseConfig;
pub use params::{Constants, PhysicalSetup};

/// Crate version, recorded in run provenance.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/scales.md")]
    mod scales {}
    #[doc = include_str!("../../../book/src/moments.md")]
    mod moments {}
    #[doc = include_str!("../../../book/src/entanglement.md")]
    mod entanglement {}
    #[doc = include_str!("../../../book/src/trajectories.md")]
    mod trajectories {}
    #[doc = include_str!("../../../book/src/fock.md")]
    mod fock {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
