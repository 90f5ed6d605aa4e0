//! Decay of position-space coherence under the double-commutator noise.
//!
//! The observable is `C(t) = |tr(rho exp(i dx p_1))|`, the weight of
//! `<x - dx| rho |x>` integrated along the diagonal. Under
//! `-c [x, [x, rho]]` it obeys `dC/dt = -c dx^2 C` exactly, so for any
//! initial state it decays at `c dx^2` (`(g/2) dx^2` for the minimal
//! model). The probe starts from the cat `|alpha> + |-alpha>` whose
//! branches sit `dx = 2 sqrt(2) alpha` apart, where `C(0)` is dominated by
//! the interference between the branches.

use nalgebra::DMatrix;

use super::ops::{displacement, C64};
use super::{evolve_unconditional, FockConfig, FockState};
use crate::error::Result;
use crate::model::ModelSpec;

/// RMS residual of `ln C` above which the fit is flagged inconclusive.
pub const FIT_RESIDUAL_LIMIT: f64 = 1e-3;
/// Coherences below this are left out of the fit.
const COHERENCE_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceFit {
    pub separation: f64,
    /// Fitted decay rate of `C(t)`.
    pub rate: f64,
    /// `c_1 dx^2` from the model's noise coefficient.
    pub expected: f64,
    /// RMS residual of the log-linear fit.
    pub residual: f64,
    pub inconclusive: bool,
    pub times: Vec<f64>,
    pub coherence: Vec<f64>,
}

/// `|tr(rho (D(beta) (x) I))|` for a displacement acting on mode 1.
fn mode1_coherence(state: &FockState, d: &DMatrix<C64>) -> f64 {
    let n = state.levels();
    let rho = state.rho();
    let mut acc = C64::new(0.0, 0.0);
    for m in 0..n {
        for k in 0..n {
            let w = d[(m, k)];
            for j in 0..n {
                acc += w * rho[(k * n + j, m * n + j)];
            }
        }
    }
    acc.norm()
}

/// Evolves the cat under the noise terms of `spec` alone (no `H0`, no
/// coupling, no bath) and fits `ln C(t) = ln C(0) - rate t`.
pub fn coherence_decay_probe(
    separation: f64,
    spec: &ModelSpec,
    dt: f64,
    n_steps: usize,
    cfg: &FockConfig,
) -> Result<CoherenceFit> {
    let alpha = separation / (2.0 * 2f64.sqrt());
    let rho0 = FockState::cat(cfg.n, alpha);
    let mut noise_only = spec.decoherence_only();
    noise_only.qbm = None;
    let traj = evolve_unconditional(&rho0, &noise_only, dt, n_steps, cfg)?;
    let d = displacement(cfg.n, C64::new(-separation / 2f64.sqrt(), 0.0));
    let coherence: Vec<f64> = traj.states.iter().map(|s| mode1_coherence(s, &d)).collect();

    let points: Vec<(f64, f64)> = traj
        .times
        .iter()
        .zip(&coherence)
        .filter(|(_, &c)| c > COHERENCE_FLOOR)
        .map(|(&t, &c)| (t, c.ln()))
        .collect();
    let (slope, residual) = least_squares(&points);
    let expected = noise_only.double_commutator_coefficients()[0] * separation * separation;
    Ok(CoherenceFit {
        separation,
        rate: -slope,
        expected,
        residual,
        inconclusive: points.len() < 3 || !(residual <= FIT_RESIDUAL_LIMIT),
        times: traj.times,
        coherence,
    })
}

/// Slope and RMS residual of the straight-line fit.
fn least_squares(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    if points.len() < 2 {
        return (f64::NAN, f64::NAN);
    }
    let (mt, my) = points
        .iter()
        .fold((0.0, 0.0), |(a, b), (t, y)| (a + t / n, b + y / n));
    let (sty, stt) = points.iter().fold((0.0, 0.0), |(a, b), (t, y)| {
        (a + (t - mt) * (y - my), b + (t - mt) * (t - mt))
    });
    let slope = sty / stt;
    let ss = points
        .iter()
        .map(|(t, y)| (y - my - slope * (t - mt)).powi(2))
        .sum::<f64>();
    (slope, (ss / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_separation_does_not_decay() {
        let fit = coherence_decay_probe(
            0.0,
            &ModelSpec::minimal(0.05),
            0.05,
            40,
            &FockConfig::new(12).with_leakage_tol(1e-6),
        )
        .unwrap();
        assert!(fit.rate.abs() < 1e-12);
        assert!(!fit.inconclusive);
    }

    #[test]
    fn line_fit() {
        let pts: Vec<_> = (0..10).map(|i| (i as f64, 2.0 - 0.3 * i as f64)).collect();
        let (s, r) = least_squares(&pts);
        assert!((s + 0.3).abs() < 1e-14);
        assert!(r < 1e-14);
    }
}
