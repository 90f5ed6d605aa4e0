//! First and second moments of the two-mode Gaussian state.
//!
//! Quadratures are ordered `(x1, p1, x2, p2)` and the covariance is
//! `sigma_ij = <{r_i, r_j}>/2 - <r_i><r_j>`, so the vacuum has `sigma = I/2`.
//! Every supported master equation is quadratic, so the moments close:
//!
//! ```text
//! d<r>/dt   = A <r>
//! dsigma/dt = A sigma + sigma A^T + D
//! ```
//!
//! with the drift `A` and diffusion `D` read off the adjoint equations:
//!
//! * `H0` contributes `dx_k/dt = p_k`, `dp_k/dt = -w_k^2 x_k`;
//! * the coupling (Hamiltonian or averaged feedback) adds `dp_k/dt = -chi_k x_j`;
//! * `-c_k [x_k, [x_k, rho]]` adds `2 c_k` to `D[p_k, p_k]` and nothing to `A`;
//! * the QBM term `-(i gamma/2)[x, {p, rho}] - gamma T [x, [x, rho]]` adds
//!   `-gamma` to `A[p_k, p_k]` and `2 gamma T` to `D[p_k, p_k]`.

use nalgebra::{Complex, Matrix4, SMatrix, SVector, Vector4};

use crate::entanglement::SymplecticForm;
use crate::error::{Error, Result};
use crate::model::ModelSpec;

pub const X1: usize = 0;
pub const P1: usize = 1;
pub const X2: usize = 2;
pub const P2: usize = 3;

/// Index of `x_k` / `p_k` for oscillator `k` in {0, 1}.
pub const fn x_index(k: usize) -> usize {
    2 * k
}

pub const fn p_index(k: usize) -> usize {
    2 * k + 1
}

/// Tolerance on `sigma + (i/2) Sigma >= 0`.
pub const UNCERTAINTY_TOLERANCE: f64 = 1e-9;
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianState {
    pub mean: Vector4<f64>,
    pub cov: Matrix4<f64>,
}

impl GaussianState {
    pub fn new(mean: Vector4<f64>, cov: Matrix4<f64>) -> Result<Self> {
        let s = Self { mean, cov };
        s.validate()?;
        Ok(s)
    }

    pub fn vacuum() -> Self {
        Self {
            mean: Vector4::zeros(),
            cov: Matrix4::identity() * 0.5,
        }
    }

    /// Vacuum covariance displaced to `mean`.
    pub fn coherent(mean: Vector4<f64>) -> Self {
        Self {
            mean,
            ..Self::vacuum()
        }
    }

    /// Product of thermal states with mean phonon numbers `n`.
    pub fn thermal(n: [f64; 2]) -> Self {
        Self {
            mean: Vector4::zeros(),
            cov: Matrix4::from_diagonal(&Vector4::new(
                n[0] + 0.5,
                n[0] + 0.5,
                n[1] + 0.5,
                n[1] + 0.5,
            )),
        }
    }

    /// Two-mode squeezed vacuum with squeezing parameter `s`.
    pub fn two_mode_squeezed(s: f64) -> Self {
        let (c, sh) = ((2.0 * s).cosh() * 0.5, (2.0 * s).sinh() * 0.5);
        #[rustfmt::skip]
        let cov = Matrix4::new(
            c,   0.0, sh,  0.0,
            0.0, c,   0.0, -sh,
            sh,  0.0, c,   0.0,
            0.0, -sh, 0.0, c,
        );
        Self {
            mean: Vector4::zeros(),
            cov,
        }
    }

    /// Smallest eigenvalue of the Hermitian matrix `sigma + (i/2) Sigma`.
    pub fn uncertainty_margin(&self) -> f64 {
        let sigma = SymplecticForm::two_mode();
        let m: Matrix4<Complex<f64>> =
            self.cov.map(|v| Complex::new(v, 0.0)) + sigma.map(|v| Complex::new(0.0, 0.5 * v));
        m.symmetric_eigenvalues().min()
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_at(0)
    }

    pub(crate) fn validate_at(&self, step: usize) -> Result<()> {
        if self
            .mean
            .iter()
            .chain(self.cov.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::NonFinite { step });
        }
        let asymmetry = (self.cov - self.cov.transpose()).amax();
        if asymmetry > SYMMETRY_TOLERANCE {
            return Err(Error::NonSymmetric { asymmetry });
        }
        let margin = self.uncertainty_margin();
        if margin < -UNCERTAINTY_TOLERANCE {
            return Err(Error::UncertaintyViolation {
                step,
                min_eigenvalue: margin,
            });
        }
        Ok(())
    }

    /// `det(2 sigma)`; 1 for pure states, larger for mixed ones.
    pub fn mixedness(&self) -> f64 {
        (self.cov * 2.0).determinant()
    }

    /// Single-mode covariance block of oscillator `k`.
    pub fn local_cov(&self, k: usize) -> nalgebra::Matrix2<f64> {
        self.cov.fixed_view::<2, 2>(2 * k, 2 * k).into_owned()
    }

    /// Second moments `<{r_i, r_j}>/2` including the means.
    pub fn second_moments(&self) -> Matrix4<f64> {
        self.cov + self.mean * self.mean.transpose()
    }
}

/// Mean phonon numbers `(<x^2> + <p^2> - 1)/2` of each oscillator.
pub fn phonon_numbers(state: &GaussianState) -> (f64, f64) {
    let m = state.second_moments();
    let n = |k: usize| 0.5 * (m[(x_index(k), x_index(k))] + m[(p_index(k), p_index(k))] - 1.0);
    (n(0), n(1))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Generator {
    pub drift: Matrix4<f64>,
    pub diffusion: Matrix4<f64>,
}

impl Generator {
    /// Right-hand side of the moment equations.
    pub fn rates(&self, mean: &Vector4<f64>, cov: &Matrix4<f64>) -> (Vector4<f64>, Matrix4<f64>) {
        let a_sigma = self.drift * cov;
        (
            self.drift * mean,
            a_sigma + a_sigma.transpose() + self.diffusion,
        )
    }
}

/// Drift of the local oscillators and coupling only.
pub(crate) fn coherent_drift(spec: &ModelSpec) -> Matrix4<f64> {
    let mut a = Matrix4::zeros();
    if !spec.coherent {
        return a;
    }
    let chi = spec.coupling();
    for k in 0..2 {
        let j = 1 - k;
        a[(x_index(k), p_index(k))] = 1.0;
        a[(p_index(k), x_index(k))] = -spec.frequencies[k].powi(2);
        a[(p_index(k), x_index(j))] = -chi[k];
    }
    a
}

pub(crate) fn check_not_overcoupled(spec: &ModelSpec) -> Result<()> {
    if !spec.coherent {
        return Ok(());
    }
    let (a, b) = (spec.frequencies[0].powi(2), spec.frequencies[1].powi(2));
    let [c1, c2] = spec.coupling();
    // eigenvalues of [[a, c1], [c2, b]]
    let disc = 0.25 * (a - b).powi(2) + c1 * c2;
    if disc < 0.0 {
        // opposite-sign gains: complex normal-mode frequencies
        return Err(Error::Overcoupled {
            omega_minus_sq: disc,
        });
    }
    let minus_sq = 0.5 * (a + b) - disc.sqrt();
    if minus_sq <= 0.0 {
        return Err(Error::Overcoupled {
            omega_minus_sq: minus_sq,
        });
    }
    Ok(())
}

pub fn build_generator(spec: &ModelSpec) -> Result<Generator> {
    spec.validate()?;
    check_not_overcoupled(spec)?;
    let mut drift = coherent_drift(spec);
    let mut diffusion = Matrix4::zeros();
    let c = spec.double_commutator_coefficients();
    for k in 0..2 {
        diffusion[(p_index(k), p_index(k))] = 2.0 * c[k];
    }
    if let Some(qbm) = spec.qbm {
        for k in 0..2 {
            drift[(p_index(k), p_index(k))] -= qbm.damping;
            diffusion[(p_index(k), p_index(k))] += 2.0 * qbm.damping * qbm.temperature;
        }
    }
    Ok(Generator { drift, diffusion })
}

/// `dt * ||A||_inf` must stay below this.
pub const STABILITY_LIMIT: f64 = 0.1;

pub(crate) fn infinity_norm<const R: usize, const C: usize>(a: &SMatrix<f64, R, C>) -> f64 {
    a.row_iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub(crate) fn check_step(dt: f64, drift: &Matrix4<f64>) -> Result<()> {
    crate::error::require_positive("dt", dt)?;
    let norm = infinity_norm(drift);
    if dt * norm >= STABILITY_LIMIT {
        return Err(Error::StepTooLarge { dt, norm });
    }
    Ok(())
}

/// One classical RK4 step of the moment equations.
pub fn rk4_step(gen: &Generator, state: &GaussianState, dt: f64) -> GaussianState {
    let (m, s) = (&state.mean, &state.cov);
    let (k1m, k1s) = gen.rates(m, s);
    let (k2m, k2s) = gen.rates(&(m + k1m * (0.5 * dt)), &(s + k1s * (0.5 * dt)));
    let (k3m, k3s) = gen.rates(&(m + k2m * (0.5 * dt)), &(s + k2s * (0.5 * dt)));
    let (k4m, k4s) = gen.rates(&(m + k3m * dt), &(s + k3s * dt));
    GaussianState {
        mean: m + (k1m + k2m * 2.0 + k3m * 2.0 + k4m) * (dt / 6.0),
        cov: s + (k1s + k2s * 2.0 + k3s * 2.0 + k4s) * (dt / 6.0),
    }
}

/// Fixed-step RK4 trajectory including the initial state (`n_steps + 1`
/// entries). Each step is checked against the uncertainty relation.
pub fn propagate(
    state: &GaussianState,
    gen: &Generator,
    dt: f64,
    n_steps: usize,
) -> Result<Vec<GaussianState>> {
    check_step(dt, &gen.drift)?;
    state.validate_at(0)?;
    let mut out = Vec::with_capacity(n_steps + 1);
    out.push(*state);
    let mut current = *state;
    for step in 1..=n_steps {
        current = rk4_step(gen, &current, dt);
        current.validate_at(step)?;
        out.push(current);
    }
    Ok(out)
}

/// Residual bound for [`steady_state_lyapunov`].
pub const LYAPUNOV_RESIDUAL: f64 = 1e-10;

pub fn max_real_eigenvalue(a: &Matrix4<f64>) -> f64 {
    a.complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Solves `A X + X A^T + D = 0` by vectorisation. `A` must be strictly
/// stable.
pub fn solve_lyapunov(a: &Matrix4<f64>, d: &Matrix4<f64>) -> Result<Matrix4<f64>> {
    let max_re = max_real_eigenvalue(a);
    if !(max_re < 0.0) {
        return Err(Error::NotStable {
            max_real_part: max_re,
        });
    }
    // column-major vec: vec(A X) = (I (x) A) vec X, vec(X A^T) = (A (x) I) vec X
    let id = Matrix4::<f64>::identity();
    let op: SMatrix<f64, 16, 16> = id.kronecker(a) + a.kronecker(&id);
    let rhs = SVector::<f64, 16>::from_column_slice((-d).as_slice());
    let x = op.lu().solve(&rhs).ok_or(Error::NotStable {
        max_real_part: max_re,
    })?;
    let x = Matrix4::from_column_slice(x.as_slice());
    Ok((x + x.transpose()) * 0.5)
}

pub fn lyapunov_residual(a: &Matrix4<f64>, d: &Matrix4<f64>, x: &Matrix4<f64>) -> f64 {
    (a * x + x * a.transpose() + d).norm()
}

/// Stationary state of a damped model (zero mean).
pub fn steady_state_lyapunov(gen: &Generator) -> Result<GaussianState> {
    let cov = solve_lyapunov(&gen.drift, &gen.diffusion)?;
    let residual = lyapunov_residual(&gen.drift, &gen.diffusion, &cov);
    if residual > LYAPUNOV_RESIDUAL {
        return Err(Error::DensityInvariant {
            step: 0,
            invariant: "lyapunov residual",
            value: residual,
        });
    }
    GaussianState::new(Vector4::zeros(), cov)
}
