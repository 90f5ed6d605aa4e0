//! Brute-force density-matrix evolution in a truncated number basis.
//!
//! This is the reference the Gaussian engines are checked against: it makes
//! no Gaussian assumption and handles the non-Gaussian cat states used to
//! probe position-coherence decay. Everything is explicit: operators are
//! built from truncated ladder matrices (see [`ops`]), the master equation is
//! assembled term by term, and the physical invariants (Hermiticity, unit
//! trace, positivity, and population in the top level) are checked as the
//! state evolves.

pub mod conditional;
pub mod ops;
pub mod probe;
pub mod unconditional;

use nalgebra::{DMatrix, DVector, Matrix4, Vector4};

use crate::error::{Error, Result};
use crate::gaussian::GaussianState;
use ops::{Operators, C64};

pub use conditional::{evolve_conditional, FockConditionalRecord};
pub use ops::build_operators;
pub use probe::{coherence_decay_probe, CoherenceFit};
pub use unconditional::{evolve_unconditional, FockTrajectory, Liouvillian};

pub const HERMITICITY_TOLERANCE: f64 = 1e-10;
pub const TRACE_TOLERANCE: f64 = 1e-8;
pub const POSITIVITY_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FockConfig {
    /// Levels per mode; the state space has `n^2` dimensions.
    pub n: usize,
    /// Largest population allowed in the top level of either mode.
    pub leakage_tol: f64,
    /// Positivity (a Cholesky factorisation) is checked every this many
    /// steps and on the final state.
    pub positivity_stride: usize,
    /// Keep every this many states of an unconditional run.
    pub record_every: usize,
}

impl FockConfig {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            leakage_tol: 1e-8,
            positivity_stride: 20,
            record_every: 1,
        }
    }

    pub fn with_leakage_tol(mut self, tol: f64) -> Self {
        self.leakage_tol = tol;
        self
    }

    pub fn with_positivity_stride(mut self, stride: usize) -> Self {
        self.positivity_stride = stride.max(1);
        self
    }

    pub fn recording_every(mut self, stride: usize) -> Self {
        self.record_every = stride.max(1);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidParameter {
                name: "N",
                value: self.n as f64,
                reason: "need at least two levels per mode",
            });
        }
        crate::error::require_positive("leakage_tol", self.leakage_tol)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FockState {
    levels: usize,
    rho: DMatrix<C64>,
}

fn coherent_amplitudes(levels: usize, alpha: C64) -> DVector<C64> {
    let mut v = DVector::zeros(levels);
    let mut term = C64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    for m in 0..levels {
        v[m] = term;
        term *= alpha / ((m + 1) as f64).sqrt();
    }
    v
}

impl FockState {
    /// Wraps a density matrix over `|n1, n2>` (index `n1 * levels + n2`).
    pub fn from_density(levels: usize, rho: DMatrix<C64>) -> Result<Self> {
        if rho.nrows() != levels * levels || rho.ncols() != levels * levels {
            return Err(Error::InvalidParameter {
                name: "rho",
                value: rho.nrows() as f64,
                reason: "dimension must be N^2",
            });
        }
        let s = Self { levels, rho };
        s.check_invariants(0, true)?;
        Ok(s)
    }

    /// `|psi><psi|`, normalised.
    pub fn from_pure(levels: usize, psi: &DVector<C64>) -> Self {
        let psi = psi.unscale(psi.norm());
        Self {
            levels,
            rho: &psi * psi.adjoint(),
        }
    }

    /// Product of single-mode pure states (each truncated and normalised).
    pub fn product(levels: usize, mode1: &DVector<C64>, mode2: &DVector<C64>) -> Self {
        Self::from_pure(levels, &mode1.kronecker(mode2))
    }

    pub fn vacuum(levels: usize) -> Self {
        let mut v = DVector::zeros(levels);
        v[0] = C64::new(1.0, 0.0);
        Self::product(levels, &v, &v)
    }

    /// Coherent states `|alpha_1> (x) |alpha_2>`, truncated.
    pub fn coherent(levels: usize, alpha: [C64; 2]) -> Self {
        Self::product(
            levels,
            &coherent_amplitudes(levels, alpha[0]),
            &coherent_amplitudes(levels, alpha[1]),
        )
    }

    /// Coherent state with the given quadrature means `(x1, p1, x2, p2)`.
    pub fn from_means(levels: usize, mean: &Vector4<f64>) -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Self::coherent(
            levels,
            [
                C64::new(mean[0], mean[1]) * s,
                C64::new(mean[2], mean[3]) * s,
            ],
        )
    }

    /// Even cat `|alpha> + |-alpha>` on mode 1 (real `alpha`, branches at
    /// `x = +-sqrt(2) alpha`), vacuum on mode 2.
    pub fn cat(levels: usize, alpha: f64) -> Self {
        let a = C64::new(alpha, 0.0);
        let branch = coherent_amplitudes(levels, a) + coherent_amplitudes(levels, -a);
        let mut vac = DVector::zeros(levels);
        vac[0] = C64::new(1.0, 0.0);
        Self::product(levels, &branch, &vac)
    }

    /// Product of thermal states, truncated and renormalised.
    pub fn thermal(levels: usize, nbar: [f64; 2]) -> Self {
        let weights = |n: f64| -> Vec<f64> {
            let w: Vec<f64> = (0..levels)
                .map(|m| (n / (1.0 + n)).powi(m as i32) / (1.0 + n))
                .collect();
            let total: f64 = w.iter().sum();
            w.into_iter().map(|v| v / total).collect()
        };
        let (w1, w2) = (weights(nbar[0]), weights(nbar[1]));
        let dim = levels * levels;
        let rho = DMatrix::from_fn(dim, dim, |r, c| {
            if r == c {
                C64::new(w1[r / levels] * w2[r % levels], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        Self { levels, rho }
    }

    /// `w a + (1 - w) b`.
    pub fn mix(a: &Self, b: &Self, w: f64) -> Self {
        assert_eq!(a.levels, b.levels);
        Self {
            levels: a.levels,
            rho: &a.rho * C64::new(w, 0.0) + &b.rho * C64::new(1.0 - w, 0.0),
        }
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn rho(&self) -> &DMatrix<C64> {
        &self.rho
    }

    pub(crate) fn from_raw(levels: usize, rho: DMatrix<C64>) -> Self {
        Self { levels, rho }
    }

    pub fn trace(&self) -> C64 {
        self.rho.trace()
    }

    /// `tr(rho^2)`.
    pub fn purity(&self) -> f64 {
        self.rho.iter().map(|v| v.norm_sqr()).sum()
    }

    /// Population with either mode in its top level.
    pub fn leakage(&self) -> f64 {
        let n = self.levels;
        (0..n * n)
            .filter(|i| i / n == n - 1 || i % n == n - 1)
            .map(|i| self.rho[(i, i)].re)
            .sum()
    }

    pub fn expectation(&self, op: &ops::SparseOp) -> C64 {
        op.expectation(&self.rho)
    }

    /// Quadrature means and symmetrised covariance. Not validated: a
    /// truncated state need not satisfy the uncertainty relation exactly.
    pub fn moments(&self, ops: &Operators) -> GaussianState {
        let q = ops.quadratures();
        let mean = Vector4::from_fn(|i, _| self.expectation(q[i]).re);
        let cov = Matrix4::from_fn(|i, j| {
            self.expectation(ops.symmetric_product(i, j)).re - mean[i] * mean[j]
        });
        GaussianState { mean, cov }
    }

    /// `<n_1>, <n_2>`.
    pub fn phonon_numbers(&self, ops: &Operators) -> (f64, f64) {
        (
            self.expectation(&ops.modes[0].n).re,
            self.expectation(&ops.modes[1].n).re,
        )
    }

    /// `tr(rho sigma)`; the fidelity when either state is pure.
    pub fn overlap(&self, other: &Self) -> f64 {
        self.rho
            .iter()
            .zip(other.rho.transpose().iter())
            .map(|(a, b)| a * b)
            .sum::<C64>()
            .re
    }

    /// `||rho - sigma||_1 / 2`.
    pub fn trace_distance(&self, other: &Self) -> f64 {
        let diff = &self.rho - &other.rho;
        let diff = (&diff + diff.adjoint()) * C64::new(0.5, 0.0);
        0.5 * diff
            .symmetric_eigenvalues()
            .iter()
            .map(|v| v.abs())
            .sum::<f64>()
    }

    /// Largest `|rho - rho^dag|` entry.
    pub fn hermiticity_error(&self) -> f64 {
        let n = self.rho.nrows();
        let mut worst = 0.0f64;
        for c in 0..n {
            for r in 0..=c {
                worst = worst.max((self.rho[(r, c)] - self.rho[(c, r)].conj()).norm());
            }
        }
        worst
    }

    /// True when `rho + tol I` admits a Cholesky factorisation, i.e. the
    /// smallest eigenvalue exceeds `-tol`.
    pub fn is_positive(&self, tol: f64) -> bool {
        cholesky_succeeds(&self.rho, tol)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.rho + self.rho.adjoint()) * C64::new(0.5, 0.0);
        h.symmetric_eigenvalues().min()
    }

    pub(crate) fn check_invariants(&self, step: usize, positivity: bool) -> Result<()> {
        if self
            .rho
            .iter()
            .any(|v| !v.re.is_finite() || !v.im.is_finite())
        {
            return Err(Error::NonFinite { step });
        }
        let herm = self.hermiticity_error();
        if herm > HERMITICITY_TOLERANCE {
            return Err(Error::DensityInvariant {
                step,
                invariant: "hermiticity",
                value: herm,
            });
        }
        let trace = self.trace();
        if (trace - C64::new(1.0, 0.0)).norm() > TRACE_TOLERANCE {
            return Err(Error::DensityInvariant {
                step,
                invariant: "trace",
                value: trace.re,
            });
        }
        if positivity && !self.is_positive(POSITIVITY_TOLERANCE) {
            return Err(Error::DensityInvariant {
                step,
                invariant: "positivity",
                value: self.min_eigenvalue(),
            });
        }
        Ok(())
    }

    pub(crate) fn check_leakage(&self, step: usize, cfg: &FockConfig) -> Result<()> {
        let population = self.leakage();
        if population > cfg.leakage_tol {
            return Err(Error::Leakage {
                step,
                population,
                tolerance: cfg.leakage_tol,
            });
        }
        Ok(())
    }

    pub fn validate(&self, cfg: &FockConfig) -> Result<()> {
        self.check_invariants(0, true)?;
        self.check_leakage(0, cfg)
    }
}

/// Hermitian Cholesky of `m + shift I` that fails on a non-positive pivot.
/// (A complex square root never fails, so the generic factorisation cannot
/// be used as a test.)
fn cholesky_succeeds(m: &DMatrix<C64>, shift: f64) -> bool {
    let n = m.nrows();
    // rows of L, stored contiguously
    let mut l = vec![C64::new(0.0, 0.0); n * n];
    for j in 0..n {
        let (done, rest) = l.split_at_mut(j * n);
        let row_j = &mut rest[..n];
        for i in 0..j {
            let row_i = &done[i * n..i * n + i];
            let dot: C64 = row_i
                .iter()
                .zip(&row_j[..i])
                .map(|(a, b)| a.conj() * b)
                .sum();
            row_j[i] = (m[(j, i)] - dot) / done[i * n + i].re;
        }
        let pivot = m[(j, j)].re + shift - row_j[..j].iter().map(|v| v.norm_sqr()).sum::<f64>();
        if !(pivot > 0.0) {
            return false;
        }
        row_j[j] = C64::new(pivot.sqrt(), 0.0);
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn coherent_moments() {
        let ops = build_operators(20).unwrap();
        let mean = Vector4::new(1.0, -0.5, 0.0, 0.8);
        let s = FockState::from_means(20, &mean);
        let m = s.moments(&ops);
        assert!((m.mean - mean).amax() < 1e-12);
        assert!((m.cov - Matrix4::identity() * 0.5).amax() < 1e-12);
        assert_relative_eq!(s.purity(), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn thermal_state() {
        let ops = build_operators(25).unwrap();
        let s = FockState::thermal(25, [0.3, 0.1]);
        let (n1, n2) = s.phonon_numbers(&ops);
        assert_relative_eq!(n1, 0.3, max_relative = 1e-10);
        assert_relative_eq!(n2, 0.1, max_relative = 1e-10);
        s.validate(&FockConfig::new(25).with_leakage_tol(1e-6))
            .unwrap();
    }

    #[test]
    fn cat_branches() {
        let ops = build_operators(20).unwrap();
        let alpha = 1.0 / 2f64.sqrt();
        let m = FockState::cat(20, alpha).moments(&ops);
        assert!(m.mean.amax() < 1e-12);
        // even cat: <a^2> = alpha^2, <n> = alpha^2 tanh(alpha^2)
        let a2 = alpha * alpha;
        let expected = 0.5 + a2 * (1.0 + a2.tanh());
        assert_relative_eq!(m.cov[(0, 0)], expected, max_relative = 1e-10);
    }

    #[test]
    fn invariant_checks() {
        let cfg = FockConfig::new(4);
        FockState::vacuum(4).validate(&cfg).unwrap();
        let mut bad = FockState::vacuum(4);
        bad.rho[(0, 0)] = C64::new(1.1, 0.0);
        bad.rho[(1, 1)] = C64::new(-0.1, 0.0);
        assert!(matches!(
            bad.check_invariants(0, true),
            Err(Error::DensityInvariant {
                invariant: "positivity",
                ..
            })
        ));
        let top = FockState::coherent(4, [C64::new(1.5, 0.0), C64::new(0.0, 0.0)]);
        assert!(matches!(top.validate(&cfg), Err(Error::Leakage { .. })));
    }

    #[test]
    fn cholesky_test_matches_spectrum() {
        let s = FockState::thermal(5, [0.5, 0.1]);
        assert!(s.is_positive(0.0));
        let mut rho = s.rho().clone();
        rho[(0, 1)] = C64::new(0.0, 0.4);
        rho[(1, 0)] = C64::new(0.0, -0.4);
        let t = FockState::from_raw(5, rho);
        assert_eq!(t.is_positive(1e-8), t.min_eigenvalue() > -1e-8);
        assert!(!t.is_positive(1e-8));
    }

    #[test]
    fn distances() {
        let a = FockState::vacuum(5);
        let b = FockState::thermal(5, [0.2, 0.0]);
        assert_eq!(a.trace_distance(&a), 0.0);
        let d = a.trace_distance(&b);
        assert!(d > 0.0 && d <= 1.0);
        assert_relative_eq!(a.overlap(&a), 1.0, max_relative = 1e-14);
    }
}
