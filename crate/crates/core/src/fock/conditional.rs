//! Conditional evolution under continuous position measurement and
//! cross feedback, in Kraus form.
//!
//! With `L_k = sqrt(Gamma_k) x_k` and innovation-carrying records
//! `dY_k = 2 sqrt(Gamma_k) <x_k> dt + dW_k` (so `dJ_k = dY_k / (2 sqrt(Gamma_k))`),
//! each step applies
//!
//! ```text
//! U   = exp(-i H0 dt)
//! M   = I - 1/2 sum L_k^2 dt + sum L_k dY_k + 1/2 sum_kl L_k L_l (dY_k dY_l - delta_kl dt)
//! V   = I - i theta.x - (theta.x)^2 / 2,   theta_1 = chi_1 dJ_2, theta_2 = chi_2 dJ_1
//! rho -> V M U rho U^dag M^dag V^dag / tr(...)
//! ```
//!
//! with `<x_k>` taken after the free step.
//!
//! To first order this is the stochastic master equation with the
//! conditioning terms `H[x_k]` followed by the feedback kick. Unlike a plain
//! Euler-Maruyama step the map is completely positive, so positivity holds to
//! rounding at any step size.

use nalgebra::{DMatrix, DVector, Vector4};

use super::ops::{position_squared, Operators, SharedPattern, SparseOp, C64};
use super::{FockConfig, FockState};
use crate::conditional::feedback_params;
use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::noise::NoiseConfig;

const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
pub struct FockConditionalRecord {
    /// Recorded times, `noise.record_every * dt` apart.
    pub times: Vec<f64>,
    /// Record and Wiener increments, summed over each stride.
    pub d_j1: Vec<f64>,
    pub d_j2: Vec<f64>,
    pub wiener: Vec<[f64; 2]>,
    /// Conditional quadrature means and covariances at `times`.
    pub moments: Vec<crate::gaussian::GaussianState>,
    pub purity: Vec<f64>,
    pub states: Vec<FockState>,
    /// Sum over steps of `|tr rho - 1|` left after renormalisation.
    pub trace_drift: f64,
}

struct StepOperators {
    /// `exp(-i H0 dt)`.
    free: SparseOp,
    /// `I`, `x1`, `x2`, `x1^2`, `x2^2`, `x1 x2`.
    basis: SharedPattern,
}

fn step_operators(spec: &ModelSpec, ops: &Operators, dt: f64) -> StepOperators {
    let levels = ops.levels;
    let propagator = |w: f64| {
        let h = DMatrix::<C64>::from_diagonal(&DVector::from_fn(levels, |m, _| {
            C64::new(m as f64 + 0.5, 0.0)
        })) + position_squared(levels) * C64::new(0.5 * (w * w - 1.0), 0.0);
        (h * C64::new(0.0, -dt)).exp()
    };
    let free = SparseOp::from_dense(
        &propagator(spec.frequencies[0]).kronecker(&propagator(spec.frequencies[1])),
    );
    let (x1, x2) = (&ops.modes[0].x, &ops.modes[1].x);
    let id = SparseOp::identity(ops.dim());
    let basis = SharedPattern::new(&[&id, x1, x2, &x1.mul(x1), &x2.mul(x2), &x1.mul(x2)]);
    StepOperators { free, basis }
}

/// Conditional Fock-space evolution sharing the random-number contract of
/// [`crate::conditional::simulate_trajectory`]: the same `noise` yields the
/// same Wiener increments. States are kept every `noise.record_every` steps.
pub fn evolve_conditional(
    rho0: &FockState,
    spec: &ModelSpec,
    noise: &NoiseConfig,
    cfg: &FockConfig,
) -> Result<FockConditionalRecord> {
    let mut w = noise.wiener();
    evolve_with_increments(
        rho0,
        spec,
        noise,
        cfg,
        std::iter::repeat_with(move || w.next_increment()),
    )
}

fn evolve_with_increments(
    rho0: &FockState,
    spec: &ModelSpec,
    noise: &NoiseConfig,
    cfg: &FockConfig,
    increments: impl Iterator<Item = [f64; 2]>,
) -> Result<FockConditionalRecord> {
    let fb = feedback_params(spec)?;
    if spec.qbm.is_some() {
        return Err(Error::Unsupported(
            "the conditional Fock solver has no bath term",
        ));
    }
    cfg.validate()?;
    noise.validate()?;
    if rho0.levels() != cfg.n {
        return Err(Error::InvalidParameter {
            name: "N",
            value: rho0.levels() as f64,
            reason: "initial state truncation differs from the configuration",
        });
    }
    rho0.validate(cfg)?;
    let ops = super::build_operators(cfg.n)?;
    let dt = noise.dt;
    let step_ops = step_operators(spec, &ops, dt);
    let sqrt_gamma = [fb.gamma[0].sqrt(), fb.gamma[1].sqrt()];
    let stride = noise.record_every;

    let mut rec = FockConditionalRecord {
        times: vec![0.0],
        d_j1: Vec::new(),
        d_j2: Vec::new(),
        wiener: Vec::new(),
        moments: vec![rho0.moments(&ops)],
        purity: vec![rho0.purity()],
        states: vec![rho0.clone()],
        trace_drift: 0.0,
    };
    let mut rho = rho0.rho().clone();
    let (mut acc_j, mut acc_w) = ([0.0; 2], [0.0; 2]);
    for (step, dw) in (1..=noise.n_steps).zip(increments) {
        rho = step_ops.free.conjugate(&rho);
        let mean_x = [
            ops.modes[0].x.expectation(&rho).re,
            ops.modes[1].x.expectation(&rho).re,
        ];
        let dy = [
            2.0 * sqrt_gamma[0] * mean_x[0] * dt + dw[0],
            2.0 * sqrt_gamma[1] * mean_x[1] * dt + dw[1],
        ];
        let dj = [dy[0] / (2.0 * sqrt_gamma[0]), dy[1] / (2.0 * sqrt_gamma[1])];
        let g = fb.gamma;
        let c = |v: f64| C64::new(v, 0.0);
        let m = step_ops.basis.combine(&[
            ONE,
            c(sqrt_gamma[0] * dy[0]),
            c(sqrt_gamma[1] * dy[1]),
            c(-0.5 * g[0] * dt + 0.5 * g[0] * (dy[0] * dy[0] - dt)),
            c(-0.5 * g[1] * dt + 0.5 * g[1] * (dy[1] * dy[1] - dt)),
            c(sqrt_gamma[0] * sqrt_gamma[1] * dy[0] * dy[1]),
        ]);
        let theta = [fb.chi[0] * dj[1], fb.chi[1] * dj[0]];
        let i = C64::new(0.0, 1.0);
        let v = step_ops.basis.combine(&[
            ONE,
            -i * theta[0],
            -i * theta[1],
            c(-0.5 * theta[0] * theta[0]),
            c(-0.5 * theta[1] * theta[1]),
            c(-theta[0] * theta[1]),
        ]);
        let next = v.conjugate(&m.conjugate(&rho));
        let tr = next.trace().re;
        if !(tr.is_finite() && tr > 0.0) {
            return Err(Error::NonFinite { step });
        }
        rho = next / C64::new(tr, 0.0);
        rho = (&rho + rho.adjoint()) * C64::new(0.5, 0.0);
        rec.trace_drift += (rho.trace() - ONE).norm();

        let state = FockState::from_raw(cfg.n, rho);
        let last = step == noise.n_steps;
        state.check_invariants(step, last || step % cfg.positivity_stride == 0)?;
        state.check_leakage(step, cfg)?;
        for k in 0..2 {
            acc_j[k] += dj[k];
            acc_w[k] += dw[k];
        }
        if step % stride == 0 {
            rec.times.push(step as f64 * dt);
            rec.d_j1.push(acc_j[0]);
            rec.d_j2.push(acc_j[1]);
            rec.wiener.push(acc_w);
            rec.moments.push(state.moments(&ops));
            rec.purity.push(state.purity());
            rec.states.push(state.clone());
            (acc_j, acc_w) = ([0.0; 2], [0.0; 2]);
        }
        rho = state.rho().clone();
    }
    Ok(rec)
}

/// Quadrature means along a conditional record.
pub fn conditional_means(rec: &FockConditionalRecord) -> Vec<Vector4<f64>> {
    rec.moments.iter().map(|m| m.mean).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::evolve_unconditional;

    #[test]
    fn weak_measurement_is_unitary() {
        let n = 12;
        let cfg = FockConfig::new(n).with_leakage_tol(1e-6);
        let rho0 = FockState::from_means(n, &Vector4::new(0.5, 0.0, 0.0, 0.3));
        let spec = ModelSpec::feedback(0.0, 0.0, 1e-8);
        let noise = NoiseConfig::new(2, 0.001, 1000).recording_every(100);
        let rec = evolve_conditional(&rho0, &spec, &noise, &cfg).unwrap();
        let closed = evolve_unconditional(
            &rho0,
            &ModelSpec::minimal(0.0),
            0.01,
            100,
            &cfg.recording_every(10),
        )
        .unwrap();
        for (a, b) in rec.states.iter().zip(&closed.states) {
            assert!(a.overlap(b) > 1.0 - 1e-4, "{}", a.overlap(b));
        }
    }

    #[test]
    fn pure_measurement_purifies() {
        let n = 10;
        let cfg = FockConfig::new(n).with_leakage_tol(1e-4);
        let rho0 = FockState::thermal(n, [0.2, 0.2]);
        let spec = ModelSpec::feedback(0.0, 0.0, 0.2);
        let noise = NoiseConfig::new(8, 0.002, 500).recording_every(50);
        let rec = evolve_conditional(&rho0, &spec, &noise, &cfg).unwrap();
        assert!(rec.purity.last().unwrap() > &rec.purity[0]);
        assert!(rec.trace_drift < 1e-10);
    }

    #[test]
    fn rejects_bath_and_minimal() {
        let cfg = FockConfig::new(4);
        let noise = NoiseConfig::new(0, 0.01, 1);
        let rho0 = FockState::vacuum(4);
        let fb = ModelSpec::feedback(0.1, 0.1, 0.05);
        assert!(evolve_conditional(&rho0, &fb.with_qbm(0.1, 1.0), &noise, &cfg).is_err());
        assert!(evolve_conditional(&rho0, &ModelSpec::minimal(0.1), &noise, &cfg).is_err());
    }
}
