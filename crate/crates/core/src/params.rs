//! Physical setup in SI units and every closed-form quantity derived from it.
//!
//! Two masses on springs, separated by `d`, interact through the quadratic
//! expansion of the Newtonian potential. That leaves a bilinear coupling
//! `K x1 x2` with `K = 2 G m1 m2 / d^3`, softened local frequencies
//! `Omega_k^2 = omega_k^2 - K/m_k`, and two normal modes whose splitting
//! `Delta ~ K/(m omega)` sets the scale of every gravitational rate:
//!
//! | quantity              | expression             | in terms of `Delta` |
//! |-----------------------|------------------------|---------------------|
//! | momentum diffusion    | `hbar K`               |                     |
//! | heating rate          | `K / (2 m omega)`      | `Delta / 2`         |
//! | position decoherence  | `K / (4 m omega)`      | `Delta / 4`         |
//!
//! ## Damping convention
//!
//! The effective temperature is reported two ways, from a damping rate
//! (`hbar K / (2 m gamma kB)`) or from a quality factor (`hbar Q Delta / kB`).
//! They coincide only with `Q = omega / (2 gamma)`, which is the convention
//! used throughout this crate.
//!
//! ## Sphere formulas
//!
//! For spheres of density `rho` the splitting is bounded by the contact
//! configuration `d = 2r`. The historically quoted bound `pi G rho / (6 omega)`
//! is half of what `K/(m omega)` gives at contact (`pi G rho / (3 omega)`);
//! both are exposed through [`SplittingBound`].

use std::f64::consts::PI;

use nalgebra::Matrix2;

use crate::error::{require_positive, Error, Result};

/// Fundamental constants (CODATA 2018, exact where SI defines them).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constants {
    g: f64,
    hbar: f64,
    k_b: f64,
}

impl Constants {
    pub const CODATA_2018: Constants = Constants {
        g: 6.674_30e-11,
        hbar: 1.054_571_817e-34,
        k_b: 1.380_649e-23,
    };

    /// Newton's constant, m^3 kg^-1 s^-2.
    pub fn g(&self) -> f64 {
        self.g
    }

    /// Reduced Planck constant, J s.
    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    /// Boltzmann constant, J/K.
    pub fn k_b(&self) -> f64 {
        self.k_b
    }
}

impl Default for Constants {
    fn default() -> Self {
        Self::CODATA_2018
    }
}

/// Relative tolerance for `m = (4/3) pi rho r^3`.
pub const MASS_DENSITY_TOLERANCE: f64 = 1e-9;

/// Two suspended masses, all quantities SI.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalSetup {
    pub m1: f64,
    pub m2: f64,
    /// Bare angular frequencies, rad/s.
    pub omega1: f64,
    pub omega2: f64,
    /// Centre separation, m.
    pub d: f64,
    /// Material density, kg/m^3.
    pub rho: Option<f64>,
    /// Sphere radius, m.
    pub r: Option<f64>,
    /// Mechanical quality factor.
    pub q: Option<f64>,
    /// Dissipation rate, 1/s.
    pub gamma: Option<f64>,
    /// Bath temperature, K.
    pub t_bath: Option<f64>,
    /// Skip the `m = (4/3) pi rho r^3` consistency check.
    pub waive_mass_check: bool,
}

impl PhysicalSetup {
    pub fn new(m1: f64, m2: f64, omega1: f64, omega2: f64, d: f64) -> Self {
        Self {
            m1,
            m2,
            omega1,
            omega2,
            d,
            rho: None,
            r: None,
            q: None,
            gamma: None,
            t_bath: None,
            waive_mass_check: false,
        }
    }

    /// Two identical homogeneous spheres of density `rho` and radius `r`.
    pub fn spheres(rho: f64, r: f64, omega: f64, d: f64) -> Self {
        let m = sphere_mass(rho, r);
        Self {
            rho: Some(rho),
            r: Some(r),
            ..Self::new(m, m, omega, omega, d)
        }
    }

    pub fn with_quality_factor(mut self, q: f64) -> Self {
        self.q = Some(q);
        self
    }

    pub fn with_damping(mut self, gamma: f64) -> Self {
        self.gamma = Some(gamma);
        self
    }

    pub fn with_bath_temperature(mut self, t: f64) -> Self {
        self.t_bath = Some(t);
        self
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("m1", self.m1)?;
        require_positive("m2", self.m2)?;
        require_positive("omega1", self.omega1)?;
        require_positive("omega2", self.omega2)?;
        require_positive("d", self.d)?;
        if let Some(rho) = self.rho {
            require_positive("rho", rho)?;
        }
        if let Some(q) = self.q {
            require_positive("Q", q)?;
        }
        if let Some(gamma) = self.gamma {
            require_positive("gamma", gamma)?;
        }
        if let Some(t) = self.t_bath {
            crate::error::require_non_negative("T_bath", t)?;
        }
        if let Some(r) = self.r {
            require_positive("r", r)?;
            if self.d < 2.0 * r {
                return Err(Error::OverlappingSpheres { d: self.d, r });
            }
            if let (Some(rho), false) = (self.rho, self.waive_mass_check) {
                let expected = sphere_mass(rho, r);
                for (k, m) in [(1, self.m1), (2, self.m2)] {
                    if ((m - expected) / expected).abs() > MASS_DENSITY_TOLERANCE {
                        return Err(Error::MassDensityMismatch {
                            oscillator: k,
                            mass: m,
                            expected,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn is_symmetric(&self) -> bool {
        self.m1 == self.m2 && self.omega1 == self.omega2
    }
}

pub fn sphere_mass(rho: f64, r: f64) -> f64 {
    4.0 / 3.0 * PI * rho * r.powi(3)
}

/// `K = 2 G m1 m2 / d^3`, in kg/s^2.
pub fn coupling_constant(setup: &PhysicalSetup, c: &Constants) -> Result<f64> {
    let m1 = require_positive("m1", setup.m1)?;
    let m2 = require_positive("m2", setup.m2)?;
    let d = require_positive("d", setup.d)?;
    Ok(2.0 * c.g() * m1 * m2 / d.powi(3))
}

/// Local frequencies after absorbing the `x_k^2` part of the gravitational
/// potential.
pub fn shifted_frequencies(setup: &PhysicalSetup, k: f64) -> Result<(f64, f64)> {
    let shift = |oscillator, omega: f64, m: f64| {
        let sq = omega * omega - k / m;
        if sq > 0.0 {
            Ok(sq.sqrt())
        } else {
            Err(Error::UnstablePotential { oscillator })
        }
    };
    Ok((
        shift(1, setup.omega1, setup.m1)?,
        shift(2, setup.omega2, setup.m2)?,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalModes {
    pub plus: f64,
    pub minus: f64,
}

impl NormalModes {
    pub fn splitting(&self) -> f64 {
        self.plus - self.minus
    }
}

/// Normal-mode frequencies of `H0 + K x1 x2` from the shifted frequencies.
///
/// The symmetric case takes the closed form `omega_+ = omega`,
/// `omega_- = omega sqrt(1 - 2K/(m omega^2))` with `omega^2 = Omega^2 + K/m`
/// so that `omega_+` is exact rather than the square root of a rounded sum.
pub fn normal_modes(
    omega1_shifted: f64,
    omega2_shifted: f64,
    m1: f64,
    m2: f64,
    k: f64,
) -> Result<NormalModes> {
    require_positive("m1", m1)?;
    require_positive("m2", m2)?;
    let (a, b) = (
        omega1_shifted * omega1_shifted,
        omega2_shifted * omega2_shifted,
    );
    if m1 == m2 && a == b {
        let omega_sq = a + k / m1;
        let minus_sq = omega_sq - 2.0 * k / m1;
        if minus_sq <= 0.0 {
            return Err(Error::Overcoupled {
                omega_minus_sq: minus_sq,
            });
        }
        return Ok(NormalModes {
            plus: omega_sq.sqrt(),
            minus: minus_sq.sqrt(),
        });
    }
    let mean = 0.5 * (a + b);
    let half_gap = 0.5 * ((a - b).powi(2) + 4.0 * k * k / (m1 * m2)).sqrt();
    let minus_sq = mean - half_gap;
    if minus_sq <= 0.0 {
        return Err(Error::Overcoupled {
            omega_minus_sq: minus_sq,
        });
    }
    Ok(NormalModes {
        plus: (mean + half_gap).sqrt(),
        minus: minus_sq.sqrt(),
    })
}

/// Weak-coupling threshold on `2K/(m omega^2)` above which the
/// `K/(m omega)` approximation should not be trusted.
pub const WEAK_COUPLING_LIMIT: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Splitting {
    /// `K / (m omega)`.
    pub approx: f64,
    /// `omega_+ - omega_-` from the symmetric closed form.
    pub exact: f64,
    /// `2K / (m omega^2)`.
    pub coupling_ratio: f64,
}

impl Splitting {
    pub fn is_weak(&self) -> bool {
        self.coupling_ratio <= WEAK_COUPLING_LIMIT
    }
}

/// Symmetric-case normal mode splitting; `omega` is the bare frequency.
pub fn mode_splitting(k: f64, m: f64, omega: f64) -> Result<Splitting> {
    crate::error::require_non_negative("K", k)?;
    require_positive("m", m)?;
    require_positive("omega", omega)?;
    let ratio = 2.0 * k / (m * omega * omega);
    if ratio >= 1.0 {
        return Err(Error::Overcoupled {
            omega_minus_sq: omega * omega * (1.0 - ratio),
        });
    }
    Ok(Splitting {
        approx: k / (m * omega),
        exact: omega - omega * (1.0 - ratio).sqrt(),
        coupling_ratio: ratio,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplittingBound {
    /// `pi G rho / (6 omega)`, the quoted reference value.
    pub printed: f64,
    /// `pi G rho / (3 omega)`, i.e. `K/(m omega)` for touching spheres.
    pub consistent: f64,
}

/// Upper bound on the splitting of two touching spheres.
pub fn splitting_bound(rho: f64, omega: f64, c: &Constants) -> Result<SplittingBound> {
    require_positive("rho", rho)?;
    require_positive("omega", omega)?;
    let printed = PI * c.g() * rho / (6.0 * omega);
    Ok(SplittingBound {
        printed,
        consistent: 2.0 * printed,
    })
}

/// `G m / (omega d^3)`, the point-mass splitting as it is usually quoted
/// (half of `K/(m omega)`).
pub fn quoted_point_mass_splitting(m: f64, omega: f64, d: f64, c: &Constants) -> f64 {
    c.g() * m / (omega * d.powi(3))
}

/// `4 pi G rho (r/d)^3 / omega`, the sphere splitting as it is usually quoted.
pub fn quoted_sphere_splitting(rho: f64, r: f64, d: f64, omega: f64, c: &Constants) -> f64 {
    4.0 * PI * c.g() * rho * (r / d).powi(3) / omega
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GravitationalRates {
    /// Momentum diffusion `hbar K`.
    pub diffusion: f64,
    /// Phonon heating rate `K / (2 m omega)`, 1/s.
    pub heating: f64,
    /// Zero-point position decoherence rate `K / (4 m omega)`, 1/s.
    pub decoherence: f64,
}

pub fn gravitational_rates(k: f64, m: f64, omega: f64, hbar: f64) -> Result<GravitationalRates> {
    crate::error::require_non_negative("K", k)?;
    require_positive("m", m)?;
    require_positive("omega", omega)?;
    require_positive("hbar", hbar)?;
    let heating = k / (2.0 * m * omega);
    Ok(GravitationalRates {
        diffusion: hbar * k,
        heating,
        decoherence: 0.5 * heating,
    })
}

/// Damping specification for [`effective_temperature`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Damping {
    pub gamma: Option<f64>,
    pub q: Option<f64>,
}

/// Relative tolerance on `Q = omega / (2 gamma)` when both are given.
pub const QUALITY_FACTOR_TOLERANCE: f64 = 1e-6;

pub fn quality_factor(omega: f64, gamma: f64) -> f64 {
    omega / (2.0 * gamma)
}

/// Temperature at which thermal momentum diffusion equals the gravitational
/// one. `delta` is only used on the quality-factor route.
pub fn effective_temperature(
    k: f64,
    m: f64,
    damping: Damping,
    omega: f64,
    delta: f64,
    c: &Constants,
) -> Result<f64> {
    crate::error::require_non_negative("K", k)?;
    crate::error::require_non_negative("Delta", delta)?;
    require_positive("m", m)?;
    require_positive("omega", omega)?;
    match (damping.q, damping.gamma) {
        (None, None) => Err(Error::MissingDamping),
        (Some(q), gamma) => {
            require_positive("Q", q)?;
            if let Some(gamma) = gamma {
                require_positive("gamma", gamma)?;
                let implied = quality_factor(omega, gamma);
                if ((q - implied) / implied).abs() > QUALITY_FACTOR_TOLERANCE {
                    return Err(Error::InconsistentDamping { q, gamma, omega });
                }
            }
            Ok(c.hbar() * q * delta / c.k_b())
        }
        (None, Some(gamma)) => {
            require_positive("gamma", gamma)?;
            Ok(c.hbar() * k / (2.0 * m * gamma * c.k_b()))
        }
    }
}

/// Per-oscillator double-commutator coefficient `Gamma/2 + chi^2/(8 Gamma)`
/// (units `hbar = 1`).
pub fn feedback_noise_coefficient(gamma: f64, chi: f64) -> f64 {
    0.5 * gamma + chi * chi / (8.0 * gamma)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseOptimum {
    pub gamma: f64,
    pub coefficient: f64,
}

/// Measurement rate minimising [`feedback_noise_coefficient`] at fixed gain.
pub fn noise_minimizer(chi: f64) -> Result<NoiseOptimum> {
    require_positive("chi", chi)?;
    Ok(NoiseOptimum {
        gamma: 0.5 * chi,
        coefficient: 0.5 * chi,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimensionlessModel {
    /// `K / (m omega)`, 1/s.
    pub g: f64,
    /// Decoherence matrix `2 g I`.
    pub y: Matrix2<f64>,
}

pub fn dimensionless_model(k: f64, m: f64, omega: f64) -> Result<DimensionlessModel> {
    crate::error::require_non_negative("K", k)?;
    require_positive("m", m)?;
    require_positive("omega", omega)?;
    let g = k / (m * omega);
    Ok(DimensionlessModel {
        g,
        y: Matrix2::identity() * (2.0 * g),
    })
}

/// Everything derivable from a setup. Symmetric-case quantities (splitting,
/// rates, `g`) use oscillator 1.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedRates {
    pub k: f64,
    pub omega1_shifted: f64,
    pub omega2_shifted: f64,
    pub modes: NormalModes,
    pub splitting: Splitting,
    pub g: f64,
    pub rates: GravitationalRates,
    pub t_grav: Option<f64>,
}

impl DerivedRates {
    pub fn from_setup(setup: &PhysicalSetup, c: &Constants) -> Result<Self> {
        setup.validate()?;
        let k = coupling_constant(setup, c)?;
        let (o1, o2) = shifted_frequencies(setup, k)?;
        let modes = normal_modes(o1, o2, setup.m1, setup.m2, k)?;
        let splitting = mode_splitting(k, setup.m1, setup.omega1)?;
        let rates = gravitational_rates(k, setup.m1, setup.omega1, c.hbar())?;
        let damping = Damping {
            gamma: setup.gamma,
            q: setup.q,
        };
        let t_grav =
            match effective_temperature(k, setup.m1, damping, setup.omega1, splitting.approx, c) {
                Ok(t) => Some(t),
                Err(Error::MissingDamping) => None,
                Err(e) => return Err(e),
            };
        Ok(Self {
            k,
            omega1_shifted: o1,
            omega2_shifted: o2,
            modes,
            splitting,
            g: splitting.approx,
            rates,
            t_grav,
        })
    }

    /// Dimensionless coupling in units of the oscillator frequency,
    /// `K / (m omega^2)`, for building a [`crate::ModelSpec`].
    pub fn g_in_frequency_units(&self, omega: f64) -> f64 {
        self.g / omega
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const C: Constants = Constants::CODATA_2018;

    fn unit_setup() -> PhysicalSetup {
        PhysicalSetup::new(1.0, 1.0, 1.0, 1.0, 0.1)
    }

    #[test]
    fn coupling_unit_masses() {
        let k = coupling_constant(&unit_setup(), &C).unwrap();
        // 2 * 6.6743e-11 / 1e-3
        assert_relative_eq!(k, 1.334_86e-7, max_relative = 1e-12);
    }

    #[test]
    fn coupling_rejects_zero_mass_and_separation() {
        let mut s = unit_setup();
        s.m1 = 0.0;
        assert!(coupling_constant(&s, &C).is_err());
        let mut s = unit_setup();
        s.d = -1.0;
        assert!(coupling_constant(&s, &C).is_err());
    }

    #[test]
    fn coupling_cubic_in_separation() {
        let mut s = unit_setup();
        let k1 = coupling_constant(&s, &C).unwrap();
        s.d *= 2.0;
        let k2 = coupling_constant(&s, &C).unwrap();
        assert_relative_eq!(k1 / k2, 8.0, max_relative = 1e-14);
    }

    #[test]
    fn shifted_frequency_cases() {
        let s = unit_setup();
        assert_eq!(shifted_frequencies(&s, 0.0).unwrap(), (1.0, 1.0));
        let (o, _) = shifted_frequencies(&s, 0.02).unwrap();
        assert_relative_eq!(o, 0.98f64.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(o, 0.98995, max_relative = 1e-5);
        assert_eq!(
            shifted_frequencies(&s, 1.0),
            Err(Error::UnstablePotential { oscillator: 1 })
        );
    }

    #[test]
    fn symmetric_normal_modes() {
        let o = 0.98f64.sqrt();
        let modes = normal_modes(o, o, 1.0, 1.0, 0.02).unwrap();
        assert_relative_eq!(modes.plus, 1.0, max_relative = 1e-15);
        assert_relative_eq!(modes.minus, 0.96f64.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(modes.minus, 0.97980, max_relative = 1e-5);

        let free = normal_modes(1.0, 1.0, 1.0, 1.0, 0.0).unwrap();
        assert_eq!(free.plus, free.minus);
    }

    #[test]
    fn overcoupled_is_distinct_error() {
        let r = normal_modes(0.1, 0.1, 1.0, 1.0, 0.5);
        assert!(matches!(r, Err(Error::Overcoupled { .. })));
        let r = normal_modes(0.1, 0.2, 1.0, 1.0, 0.5);
        assert!(matches!(r, Err(Error::Overcoupled { .. })));
    }

    #[test]
    fn splitting_exact_and_approx() {
        let s = mode_splitting(0.02, 1.0, 1.0).unwrap();
        assert_relative_eq!(s.approx, 0.02, max_relative = 1e-15);
        assert_relative_eq!(s.exact, 1.0 - 0.96f64.sqrt(), max_relative = 1e-12);
        assert_relative_eq!(s.exact, 0.02020, max_relative = 1e-3);
        assert!(s.is_weak());
        assert_eq!(mode_splitting(0.0, 1.0, 1.0).unwrap().approx, 0.0);
        assert!(!mode_splitting(0.2, 1.0, 1.0).unwrap().is_weak());
    }

    #[test]
    fn bound_scaling() {
        let b = splitting_bound(19050.0, 2.0 * PI, &C).unwrap();
        assert!(b.printed > 1.0e-7 && b.printed < 1.1e-7, "{}", b.printed);
        let b2 = splitting_bound(2.0 * 19050.0, 2.0 * PI, &C).unwrap();
        let b3 = splitting_bound(19050.0, 4.0 * PI, &C).unwrap();
        assert_relative_eq!(b2.printed, 2.0 * b.printed, max_relative = 1e-15);
        assert_relative_eq!(b3.printed, 0.5 * b.printed, max_relative = 1e-15);
        assert_eq!(b.consistent, 2.0 * b.printed);
    }

    #[test]
    fn printed_sphere_forms_meet_bound_at_contact() {
        // (4/3) pi G rho (r/d)^3 / omega at d = 2r reproduces the quoted bound,
        // which is the point-mass form G m/(omega d^3)
        let (rho, r, omega) = (19050.0, 0.05, 2.0 * PI);
        let m = sphere_mass(rho, r);
        let b = splitting_bound(rho, omega, &C).unwrap();
        let point = quoted_point_mass_splitting(m, omega, 2.0 * r, &C);
        assert_relative_eq!(point, b.printed, max_relative = 1e-12);
        let sphere = quoted_sphere_splitting(rho, r, 2.0 * r, omega, &C);
        assert_relative_eq!(sphere, 3.0 * b.printed, max_relative = 1e-12);
    }

    #[test]
    fn rates_by_hand() {
        let r = gravitational_rates(0.02, 1.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(r.heating, 0.01, max_relative = 1e-15);
        assert_relative_eq!(r.decoherence, 0.005, max_relative = 1e-15);
        assert_relative_eq!(r.diffusion, 0.02, max_relative = 1e-15);
        assert_eq!(r.decoherence / r.heating, 0.5);
        let zero = gravitational_rates(0.0, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(
            (zero.diffusion, zero.heating, zero.decoherence),
            (0.0, 0.0, 0.0)
        );
    }

    #[test]
    fn temperature_from_quality_factor() {
        let t = effective_temperature(
            0.0,
            1.0,
            Damping {
                gamma: None,
                q: Some(1e9),
            },
            2.0 * PI,
            1.06e-7,
            &C,
        )
        .unwrap();
        assert_relative_eq!(
            t,
            1.054_571_817e-34 * 1e9 * 1.06e-7 / 1.380_649e-23,
            max_relative = 1e-14
        );
        assert!((5e-10..1.5e-9).contains(&t));
    }

    #[test]
    fn temperature_routes_agree_under_convention() {
        let (k, m, omega, gamma) = (3e-7, 2.0, 5.0, 1e-4);
        let delta = k / (m * omega);
        let by_gamma = effective_temperature(
            k,
            m,
            Damping {
                gamma: Some(gamma),
                q: None,
            },
            omega,
            delta,
            &C,
        )
        .unwrap();
        let q = quality_factor(omega, gamma);
        let both = effective_temperature(
            k,
            m,
            Damping {
                gamma: Some(gamma),
                q: Some(q),
            },
            omega,
            delta,
            &C,
        )
        .unwrap();
        assert_relative_eq!(by_gamma, both, max_relative = 1e-12);
        let bad = effective_temperature(
            k,
            m,
            Damping {
                gamma: Some(gamma),
                q: Some(q * 1.01),
            },
            omega,
            delta,
            &C,
        );
        assert!(matches!(bad, Err(Error::InconsistentDamping { .. })));
        assert_eq!(
            effective_temperature(k, m, Damping::default(), omega, delta, &C),
            Err(Error::MissingDamping)
        );
    }

    #[test]
    fn temperature_linear_in_q_and_zero_at_zero_splitting() {
        let at = |q, delta| {
            effective_temperature(
                0.0,
                1.0,
                Damping {
                    gamma: None,
                    q: Some(q),
                },
                1.0,
                delta,
                &C,
            )
            .unwrap()
        };
        assert_eq!(at(1e9, 0.0), 0.0);
        assert_relative_eq!(at(2e9, 1e-7), 2.0 * at(1e9, 1e-7), max_relative = 1e-15);
    }

    #[test]
    fn minimizer_matches_minimal_prefactor() {
        let k = 0.37;
        let opt = noise_minimizer(k).unwrap();
        assert_eq!(opt.gamma, k / 2.0);
        assert_relative_eq!(
            feedback_noise_coefficient(opt.gamma, k),
            k / 2.0,
            max_relative = 1e-15
        );
        assert!(feedback_noise_coefficient(k / 4.0, k) > opt.coefficient);
        assert!(feedback_noise_coefficient(k, k) > opt.coefficient);
        assert!(noise_minimizer(0.0).is_err());
    }

    #[test]
    fn dimensionless_matrix() {
        let dm = dimensionless_model(0.02, 1.0, 1.0).unwrap();
        assert_relative_eq!(dm.g, 0.02, max_relative = 1e-15);
        assert_eq!(dm.y, Matrix2::new(0.04, 0.0, 0.0, 0.04));
        let s = mode_splitting(0.02, 1.0, 1.0).unwrap();
        assert_eq!(dm.g, s.approx);
    }

    #[test]
    fn setup_validation() {
        let s = PhysicalSetup::spheres(19050.0, 0.1, 2.0 * PI, 0.2);
        s.validate().unwrap();
        let overlapping = PhysicalSetup::spheres(19050.0, 0.1, 2.0 * PI, 0.19);
        assert!(matches!(
            overlapping.validate(),
            Err(Error::OverlappingSpheres { .. })
        ));
        let mut wrong_mass = s.clone();
        wrong_mass.m2 *= 1.0 + 1e-6;
        assert!(matches!(
            wrong_mass.validate(),
            Err(Error::MassDensityMismatch { oscillator: 2, .. })
        ));
        wrong_mass.waive_mass_check = true;
        wrong_mass.validate().unwrap();
        let mut negative = s;
        negative.m1 = -1.0;
        assert!(negative.validate().is_err());
    }

    #[test]
    fn derived_rates_uranium() {
        let s = PhysicalSetup::spheres(19050.0, 0.1, 2.0 * PI, 0.2).with_quality_factor(1e9);
        let d = DerivedRates::from_setup(&s, &C).unwrap();
        assert!(d.modes.plus >= d.modes.minus);
        assert_relative_eq!(
            d.rates.heating,
            d.splitting.approx / 2.0,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            d.rates.decoherence,
            d.splitting.approx / 4.0,
            max_relative = 1e-15
        );
        let bound = splitting_bound(19050.0, 2.0 * PI, &C).unwrap();
        assert_relative_eq!(d.splitting.approx, bound.consistent, max_relative = 1e-12);
        assert!(d.t_grav.is_some());
    }
}
