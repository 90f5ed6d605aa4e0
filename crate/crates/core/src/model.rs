//! Which master equation to evolve, in dimensionless units.
//!
//! Units are `hbar = m = omega = 1`: quadratures are `x~ = x (m omega/hbar)^(1/2)`,
//! time is measured in `1/omega`, and the coupling `g` is `K/(m omega^2)`.
//! Every variant has the form
//!
//! ```text
//! drho/dt = -i[H0, rho]  + coherent coupling  - sum_k c_k [x_k, [x_k, rho]]  (+ QBM)
//! ```
//!
//! and differs only in how the coupling is written and what sets `c_k`.
//!
//! * [`Variant::Feedback`]: each position is measured at rate `Gamma_k`; the
//!   record of oscillator `j` drives oscillator `k` through
//!   `H_fb = chi_1 (dJ_2/dt) x_1 + chi_2 (dJ_1/dt) x_2`. On average this is
//!   `-(i/2) chi_k [x_k, {x_j, rho}]` with
//!   `c_k = Gamma_k/2 + chi_k^2 / (8 Gamma_j)`.
//! * [`Variant::Minimal`]: the gains and rates that minimise the added noise
//!   (`chi = g`, `Gamma = g/2`), i.e. `-i g [x_1 x_2, rho]` with `c_k = g/2`.
//! * [`Variant::Scaled`]: the same coupling with an arbitrary decoherence
//!   matrix `Y = y I`, `c_k = y/4`. `y = 2g` is the minimal model; anything
//!   smaller is noisier than nothing and entangles.
//!
//! Note the feedback labeling: `chi_k` is the gain of the force *on*
//! oscillator `k`. Written the other way round (gain of record `k`) the
//! noise term would carry `chi_j^2` instead; the two coincide for
//! `chi_1 = chi_2`.

use crate::error::{require_non_negative, require_positive, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Variant {
    Feedback { chi: [f64; 2], gamma: [f64; 2] },
    Minimal { g: f64 },
    Scaled { g: f64, y: f64 },
}

/// Quantum Brownian motion bath: momentum damping rate and temperature in
/// units of `hbar omega / kB`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Qbm {
    pub damping: f64,
    pub temperature: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpec {
    pub variant: Variant,
    /// Local oscillator frequencies of `H0` in units of `omega`.
    pub frequencies: [f64; 2],
    /// When false `H0` and the coupling drift are dropped, leaving the noise
    /// terms alone.
    pub coherent: bool,
    pub qbm: Option<Qbm>,
}

impl ModelSpec {
    fn with_variant(variant: Variant) -> Self {
        Self {
            variant,
            frequencies: [1.0, 1.0],
            coherent: true,
            qbm: None,
        }
    }

    pub fn minimal(g: f64) -> Self {
        Self::with_variant(Variant::Minimal { g })
    }

    pub fn feedback(chi1: f64, chi2: f64, gamma: f64) -> Self {
        Self::with_variant(Variant::Feedback {
            chi: [chi1, chi2],
            gamma: [gamma, gamma],
        })
    }

    pub fn feedback_with_rates(chi: [f64; 2], gamma: [f64; 2]) -> Self {
        Self::with_variant(Variant::Feedback { chi, gamma })
    }

    pub fn scaled(g: f64, y: f64) -> Self {
        Self::with_variant(Variant::Scaled { g, y })
    }

    pub fn decoherence_only(mut self) -> Self {
        self.coherent = false;
        self
    }

    pub fn with_qbm(mut self, damping: f64, temperature: f64) -> Self {
        self.qbm = Some(Qbm {
            damping,
            temperature,
        });
        self
    }

    pub fn with_frequencies(mut self, frequencies: [f64; 2]) -> Self {
        self.frequencies = frequencies;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.variant {
            Variant::Feedback { chi, gamma } => {
                if let Some(&c) = chi.iter().find(|c| !c.is_finite()) {
                    return Err(crate::Error::InvalidParameter {
                        name: "chi",
                        value: c,
                        reason: "must be finite",
                    });
                }
                require_positive("Gamma_1", gamma[0])?;
                require_positive("Gamma_2", gamma[1])?;
            }
            Variant::Minimal { g } => {
                require_non_negative("g", g)?;
            }
            Variant::Scaled { g, y } => {
                require_non_negative("g", g)?;
                require_non_negative("y", y)?;
            }
        }
        require_positive("frequency_1", self.frequencies[0])?;
        require_positive("frequency_2", self.frequencies[1])?;
        if let Some(q) = self.qbm {
            require_non_negative("qbm damping", q.damping)?;
            require_non_negative("qbm temperature", q.temperature)?;
        }
        Ok(())
    }

    /// Coefficient of `x_j` in the force on oscillator `k`, i.e. the
    /// mean-field coupling seen by each oscillator.
    pub fn coupling(&self) -> [f64; 2] {
        match self.variant {
            Variant::Feedback { chi, .. } => chi,
            Variant::Minimal { g } | Variant::Scaled { g, .. } => [g, g],
        }
    }

    /// `c_k` in `-c_k [x_k, [x_k, rho]]`, excluding any QBM contribution.
    pub fn double_commutator_coefficients(&self) -> [f64; 2] {
        match self.variant {
            Variant::Feedback { chi, gamma } => [
                0.5 * gamma[0] + chi[0] * chi[0] / (8.0 * gamma[1]),
                0.5 * gamma[1] + chi[1] * chi[1] / (8.0 * gamma[0]),
            ],
            Variant::Minimal { g } => [0.5 * g, 0.5 * g],
            Variant::Scaled { y, .. } => [0.25 * y, 0.25 * y],
        }
    }

    /// Diagonal of the decoherence matrix `Y = 4 c`.
    pub fn decoherence_matrix(&self) -> nalgebra::Matrix2<f64> {
        let c = self.double_commutator_coefficients();
        nalgebra::Matrix2::new(4.0 * c[0], 0.0, 0.0, 4.0 * c[1])
    }

    /// The coupling that enters the channel criterion. Only defined when
    /// the mean-field coupling is symmetric.
    pub fn symmetric_coupling(&self) -> Option<f64> {
        let [a, b] = self.coupling();
        (a == b).then_some(a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_point_coefficients_agree() {
        let g = 0.05;
        let fb = ModelSpec::feedback(g, g, g / 2.0);
        let min = ModelSpec::minimal(g);
        assert_eq!(fb.coupling(), min.coupling());
        let (a, b) = (
            fb.double_commutator_coefficients(),
            min.double_commutator_coefficients(),
        );
        for k in 0..2 {
            assert!((a[k] - b[k]).abs() < 1e-16);
        }
        assert_eq!(
            ModelSpec::scaled(g, 2.0 * g).double_commutator_coefficients(),
            b
        );
    }

    #[test]
    fn asymmetric_gain_lands_on_receiving_oscillator() {
        let m = ModelSpec::feedback_with_rates([0.2, 0.0], [0.1, 0.3]);
        let c = m.double_commutator_coefficients();
        assert!((c[0] - (0.05 + 0.04 / (8.0 * 0.3))).abs() < 1e-16);
        assert_eq!(c[1], 0.15);
        assert_eq!(m.symmetric_coupling(), None);
    }

    #[test]
    fn validation() {
        assert!(ModelSpec::feedback(0.1, 0.1, 0.0).validate().is_err());
        assert!(ModelSpec::minimal(-0.1).validate().is_err());
        assert!(ModelSpec::minimal(0.1)
            .with_qbm(-1.0, 1.0)
            .validate()
            .is_err());
        ModelSpec::minimal(0.0).validate().unwrap();
    }
}
