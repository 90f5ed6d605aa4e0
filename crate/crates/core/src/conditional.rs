//! Conditional dynamics of the measured and fed-back oscillators.
//!
//! Each position is measured continuously; the dimensionless records are
//!
//! ```text
//! dJ_k = <x_k>_c dt + dW_k / (2 sqrt(Gamma_k))
//! ```
//!
//! and the record of one oscillator pushes the other through
//! `H_fb = chi_1 (dJ_2/dt) x_1 + chi_2 (dJ_1/dt) x_2`, applied right after
//! the measurement update (zero delay). Restricted to Gaussian states the
//! conditional master equation becomes a Kalman-Bucy filter:
//!
//! ```text
//! dm     = A0 m dt + sum_k 2 sqrt(Gamma_k) sigma e_{x_k} dW_k - chi_k e_{p_k} dJ_j
//! dsigma = A0 sigma + sigma A0^T + D0 - sum_k 4 Gamma_k sigma e_{x_k} e_{x_k}^T sigma
//! ```
//!
//! where `A0`, `D0` hold the local oscillators, the measurement back-action
//! (`Gamma_k` on `p_k`) and any QBM bath. The covariance obeys a noise-free
//! Riccati equation, so it is the same for every trajectory and is
//! integrated once with RK4. The means take Euler-Maruyama steps whose
//! deterministic part is the RK4 map `I + A0 dt + ... + (A0 dt)^4/24`.
//!
//! Averaging over records gives back the unconditional generator of
//! [`crate::gaussian::build_generator`]: mean drift `-chi_k x_j` on `p_k` and
//! extra diffusion `chi_k^2 / (4 Gamma_j)`.

use nalgebra::{Matrix4, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gaussian::{self, p_index, x_index, GaussianState};
use crate::model::{ModelSpec, Variant};
use crate::noise::NoiseConfig;

/// Conditional moments; same invariants as [`GaussianState`].
pub type FilterState = GaussianState;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct FeedbackParams {
    pub chi: [f64; 2],
    pub gamma: [f64; 2],
}

pub(crate) fn feedback_params(spec: &ModelSpec) -> Result<FeedbackParams> {
    spec.validate()?;
    match spec.variant {
        Variant::Feedback { chi, gamma } => {
            if !spec.coherent {
                return Err(Error::Unsupported(
                    "conditional dynamics need the coherent part of the model",
                ));
            }
            Ok(FeedbackParams { chi, gamma })
        }
        _ => Err(Error::Unsupported(
            "conditional dynamics require an explicit feedback model",
        )),
    }
}

/// Drift and diffusion of the filter without the feedback.
fn local_generator(spec: &ModelSpec, fb: &FeedbackParams) -> (Matrix4<f64>, Matrix4<f64>) {
    let mut a = Matrix4::zeros();
    let mut d = Matrix4::zeros();
    for k in 0..2 {
        a[(x_index(k), p_index(k))] = 1.0;
        a[(p_index(k), x_index(k))] = -spec.frequencies[k].powi(2);
        d[(p_index(k), p_index(k))] = fb.gamma[k];
        if let Some(q) = spec.qbm {
            a[(p_index(k), p_index(k))] -= q.damping;
            d[(p_index(k), p_index(k))] += 2.0 * q.damping * q.temperature;
        }
    }
    (a, d)
}

fn riccati_rate(
    a: &Matrix4<f64>,
    d: &Matrix4<f64>,
    gamma: &[f64; 2],
    s: &Matrix4<f64>,
) -> Matrix4<f64> {
    let a_s = a * s;
    let mut rate = a_s + a_s.transpose() + d;
    for k in 0..2 {
        let col = s.column(x_index(k));
        rate -= col * col.transpose() * (4.0 * gamma[k]);
    }
    rate
}

/// Deterministic conditional covariance on the full step grid.
fn riccati_path(
    a: &Matrix4<f64>,
    d: &Matrix4<f64>,
    gamma: &[f64; 2],
    initial: &Matrix4<f64>,
    dt: f64,
    n_steps: usize,
) -> Result<Vec<Matrix4<f64>>> {
    let mut out = Vec::with_capacity(n_steps + 1);
    let mut s = *initial;
    out.push(s);
    for step in 1..=n_steps {
        let k1 = riccati_rate(a, d, gamma, &s);
        let k2 = riccati_rate(a, d, gamma, &(s + k1 * (0.5 * dt)));
        let k3 = riccati_rate(a, d, gamma, &(s + k2 * (0.5 * dt)));
        let k4 = riccati_rate(a, d, gamma, &(s + k3 * dt));
        s += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        s = (s + s.transpose()) * 0.5;
        GaussianState {
            mean: Vector4::zeros(),
            cov: s,
        }
        .validate_at(step)?;
        out.push(s);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    /// Recorded times, `record_every * dt` apart, starting at 0.
    pub times: Vec<f64>,
    /// Record increments of oscillator 1 and 2, summed over each stride.
    pub d_j1: Vec<f64>,
    pub d_j2: Vec<f64>,
    /// Wiener increments, summed over each stride.
    pub wiener: Vec<[f64; 2]>,
    /// Momentum kicks the integrator applied to each oscillator, summed over
    /// each stride.
    pub kicks: Vec<[f64; 2]>,
    /// Conditional moments at `times`.
    pub states: Vec<FilterState>,
    pub dt: f64,
    pub record_every: usize,
}

impl TrajectoryRecord {
    /// Duration of one recorded interval.
    pub fn interval(&self) -> f64 {
        self.dt * self.record_every as f64
    }
}

struct Prepared {
    fb: FeedbackParams,
    /// RK4 propagator of the linear drift over one step.
    phi: Matrix4<f64>,
    covs: Vec<Matrix4<f64>>,
}

fn prepare(spec: &ModelSpec, noise: &NoiseConfig, initial: &GaussianState) -> Result<Prepared> {
    let fb = feedback_params(spec)?;
    noise.validate()?;
    if !noise.n_steps.is_multiple_of(noise.record_every) {
        return Err(Error::InvalidParameter {
            name: "record_every",
            value: noise.record_every as f64,
            reason: "must divide n_steps",
        });
    }
    initial.validate()?;
    let (a, d) = local_generator(spec, &fb);
    gaussian::check_step(noise.dt, &a)?;
    let covs = riccati_path(&a, &d, &fb.gamma, &initial.cov, noise.dt, noise.n_steps)?;
    let h = a * noise.dt;
    let phi = Matrix4::identity()
        + h * (Matrix4::identity()
            + h * 0.5 * (Matrix4::identity() + h / 3.0 * (Matrix4::identity() + h * 0.25)));
    Ok(Prepared { fb, phi, covs })
}

fn run_means(
    prep: &Prepared,
    initial_mean: &Vector4<f64>,
    dt: f64,
    record_every: usize,
    increments: impl Iterator<Item = [f64; 2]>,
) -> Result<TrajectoryRecord> {
    let FeedbackParams { chi, gamma } = prep.fb;
    let n_steps = prep.covs.len() - 1;
    let n_rec = n_steps / record_every;
    let mut rec = TrajectoryRecord {
        times: Vec::with_capacity(n_rec + 1),
        d_j1: Vec::with_capacity(n_rec),
        d_j2: Vec::with_capacity(n_rec),
        wiener: Vec::with_capacity(n_rec),
        kicks: Vec::with_capacity(n_rec),
        states: Vec::with_capacity(n_rec + 1),
        dt,
        record_every,
    };
    let mut m = *initial_mean;
    rec.times.push(0.0);
    rec.states.push(GaussianState {
        mean: m,
        cov: prep.covs[0],
    });
    let noise_scale = [0.5 / gamma[0].sqrt(), 0.5 / gamma[1].sqrt()];
    let gain = [2.0 * gamma[0].sqrt(), 2.0 * gamma[1].sqrt()];
    let (mut acc_j, mut acc_w, mut acc_kick) = ([0.0; 2], [0.0; 2], [0.0; 2]);
    let mut taken = 0;
    for (step, dw) in (1..=n_steps).zip(increments) {
        taken = step;
        let s = &prep.covs[step - 1];
        let dj = [
            m[x_index(0)] * dt + noise_scale[0] * dw[0],
            m[x_index(1)] * dt + noise_scale[1] * dw[1],
        ];
        let mut next = prep.phi * m;
        for k in 0..2 {
            next += s.column(x_index(k)) * (gain[k] * dw[k]);
        }
        let kick = [-chi[0] * dj[1], -chi[1] * dj[0]];
        next[p_index(0)] += kick[0];
        next[p_index(1)] += kick[1];
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step });
        }
        m = next;
        for k in 0..2 {
            acc_j[k] += dj[k];
            acc_w[k] += dw[k];
            acc_kick[k] += kick[k];
        }
        if step % record_every == 0 {
            rec.times.push(step as f64 * dt);
            rec.d_j1.push(acc_j[0]);
            rec.d_j2.push(acc_j[1]);
            rec.wiener.push(acc_w);
            rec.kicks.push(acc_kick);
            rec.states.push(GaussianState {
                mean: m,
                cov: prep.covs[step],
            });
            (acc_j, acc_w, acc_kick) = ([0.0; 2], [0.0; 2], [0.0; 2]);
        }
    }
    if taken != n_steps {
        return Err(Error::InvalidParameter {
            name: "increments",
            value: taken as f64,
            reason: "fewer Wiener increments than steps",
        });
    }
    Ok(rec)
}

/// One conditional trajectory driven by the Wiener streams of `noise`.
pub fn simulate_trajectory(
    spec: &ModelSpec,
    noise: &NoiseConfig,
    initial: &GaussianState,
) -> Result<TrajectoryRecord> {
    let prep = prepare(spec, noise, initial)?;
    let mut w = noise.wiener();
    run_means(
        &prep,
        &initial.mean,
        noise.dt,
        noise.record_every,
        std::iter::repeat_with(move || w.next_increment()),
    )
}

/// Same as [`simulate_trajectory`] with externally supplied increments
/// (one pair per step), e.g. to share a path with the Fock-space solver.
pub fn simulate_with_increments(
    spec: &ModelSpec,
    dt: f64,
    increments: &[[f64; 2]],
    initial: &GaussianState,
) -> Result<TrajectoryRecord> {
    let noise = NoiseConfig::new(0, dt, increments.len());
    let prep = prepare(spec, &noise, initial)?;
    run_means(&prep, &initial.mean, dt, 1, increments.iter().copied())
}

/// `n_traj` trajectories, member `i` on streams `[2i, 2i + 1]` of
/// `noise.seed`. Runs in parallel; the result does not depend on scheduling.
pub fn simulate_ensemble(
    spec: &ModelSpec,
    noise: &NoiseConfig,
    initial: &GaussianState,
    n_traj: usize,
) -> Result<Vec<TrajectoryRecord>> {
    let prep = prepare(spec, noise, initial)?;
    (0..n_traj as u64)
        .into_par_iter()
        .map(|i| {
            let mut w = noise.for_trajectory(i).wiener();
            run_means(
                &prep,
                &initial.mean,
                noise.dt,
                noise.record_every,
                std::iter::repeat_with(move || w.next_increment()),
            )
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleMoments {
    pub times: Vec<f64>,
    pub states: Vec<GaussianState>,
}

fn check_grids(records: &[TrajectoryRecord]) -> Result<()> {
    let first = records.first().ok_or(Error::EmptyEnsemble)?;
    if records
        .iter()
        .any(|r| r.times != first.times || r.states.len() != first.states.len())
    {
        return Err(Error::MismatchedGrids);
    }
    Ok(())
}

/// Unconditional moments at time index `t` over the records selected by
/// `members`: average mean, and average conditional covariance plus the
/// (population) covariance of the conditional means.
fn reconstruct_at(
    records: &[TrajectoryRecord],
    members: impl Iterator<Item = usize> + Clone,
    t: usize,
) -> GaussianState {
    let n = members.clone().count() as f64;
    let mut mean = Vector4::zeros();
    let mut cov = Matrix4::zeros();
    for i in members.clone() {
        mean += records[i].states[t].mean;
        cov += records[i].states[t].cov;
    }
    mean /= n;
    cov /= n;
    let mut spread = Matrix4::zeros();
    for i in members {
        let dm = records[i].states[t].mean - mean;
        spread += dm * dm.transpose();
    }
    GaussianState {
        mean,
        cov: cov + spread / n,
    }
}

/// Law-of-total-covariance reconstruction of the unconditional state.
pub fn ensemble_moments(records: &[TrajectoryRecord]) -> Result<EnsembleMoments> {
    check_grids(records)?;
    let states = (0..records[0].states.len())
        .map(|t| reconstruct_at(records, 0..records.len(), t))
        .collect();
    Ok(EnsembleMoments {
        times: records[0].times.clone(),
        states,
    })
}

/// Bootstrap standard errors of the reconstructed covariance (and mean) at
/// every recorded time, from `n_resamples` resamples with replacement.
pub fn bootstrap_standard_errors(
    records: &[TrajectoryRecord],
    n_resamples: usize,
    seed: u64,
) -> Result<Vec<GaussianState>> {
    check_grids(records)?;
    let n = records.len();
    let n_times = records[0].states.len();
    let resamples: Vec<Vec<GaussianState>> = (0..n_resamples as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(b);
            let picks: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            (0..n_times)
                .map(|t| reconstruct_at(records, picks.iter().copied(), t))
                .collect()
        })
        .collect();
    let b = n_resamples as f64;
    Ok((0..n_times)
        .map(|t| {
            let mut mean = GaussianState {
                mean: Vector4::zeros(),
                cov: Matrix4::zeros(),
            };
            for r in &resamples {
                mean.mean += r[t].mean;
                mean.cov += r[t].cov;
            }
            mean.mean /= b;
            mean.cov /= b;
            let mut var = GaussianState {
                mean: Vector4::zeros(),
                cov: Matrix4::zeros(),
            };
            for r in &resamples {
                var.mean += (r[t].mean - mean.mean).map(|v| v * v);
                var.cov += (r[t].cov - mean.cov).map(|v| v * v);
            }
            GaussianState {
                mean: (var.mean / (b - 1.0)).map(f64::sqrt),
                cov: (var.cov / (b - 1.0)).map(f64::sqrt),
            }
        })
        .collect())
}

/// Recomputes the feedback drive `chi_k dJ_j / dt` each oscillator received
/// and checks it against the kicks the integrator applied.
pub fn feedback_force_audit(record: &TrajectoryRecord, spec: &ModelSpec) -> Result<Vec<[f64; 2]>> {
    let FeedbackParams { chi, .. } = feedback_params(spec)?;
    let interval = record.interval();
    record
        .d_j1
        .iter()
        .zip(&record.d_j2)
        .zip(&record.kicks)
        .enumerate()
        .map(|(step, ((&j1, &j2), kick))| {
            let drive = [chi[0] * j2 / interval, chi[1] * j1 / interval];
            for k in 0..2 {
                let expected = -drive[k] * interval;
                let tol = 1e-12 * expected.abs().max(kick[k].abs()).max(f64::MIN_POSITIVE);
                if (kick[k] - expected).abs() > tol {
                    return Err(Error::FeedbackMismatch {
                        step,
                        applied: kick[k],
                        expected,
                    });
                }
            }
            Ok(drive)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> ModelSpec {
        ModelSpec::feedback(0.05, 0.05, 0.025)
    }

    #[test]
    fn rejects_non_feedback_models() {
        let noise = NoiseConfig::new(1, 0.01, 10);
        let v = GaussianState::vacuum();
        assert!(simulate_trajectory(&ModelSpec::minimal(0.05), &noise, &v).is_err());
        assert!(simulate_trajectory(&spec().decoherence_only(), &noise, &v).is_err());
    }

    #[test]
    fn same_seed_same_record() {
        let noise = NoiseConfig::new(42, 0.01, 300);
        let a = simulate_trajectory(&spec(), &noise, &GaussianState::vacuum()).unwrap();
        let b = simulate_trajectory(&spec(), &noise, &GaussianState::vacuum()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn weak_measurement_limit() {
        let gamma = 1e-8;
        let m = ModelSpec::feedback(0.0, 0.0, gamma);
        let (dt, n) = (0.01, 20_000);
        let rec =
            simulate_trajectory(&m, &NoiseConfig::new(3, dt, n), &GaussianState::vacuum()).unwrap();
        let last = rec.states.last().unwrap();
        assert!((last.cov - Matrix4::identity() * 0.5).amax() < 1e-5);
        let expected = dt / (4.0 * gamma);
        let var = rec.d_j1.iter().map(|j| j * j).sum::<f64>() / n as f64;
        assert!((var / expected - 1.0).abs() < 0.05, "{}", var / expected);
    }

    #[test]
    fn disabled_channel_gives_no_force() {
        let m = ModelSpec::feedback(0.0, 0.05, 0.025);
        let rec = simulate_trajectory(
            &m,
            &NoiseConfig::new(5, 0.01, 200),
            &GaussianState::vacuum(),
        )
        .unwrap();
        let forces = feedback_force_audit(&rec, &m).unwrap();
        assert!(forces.iter().all(|f| f[0] == 0.0));
        assert!(forces.iter().any(|f| f[1] != 0.0));
    }

    #[test]
    fn audit_catches_tampering() {
        let noise = NoiseConfig::new(9, 0.01, 50);
        let mut rec = simulate_trajectory(&spec(), &noise, &GaussianState::vacuum()).unwrap();
        feedback_force_audit(&rec, &spec()).unwrap();
        rec.kicks[10][1] *= 1.001;
        assert!(matches!(
            feedback_force_audit(&rec, &spec()),
            Err(Error::FeedbackMismatch { step: 10, .. })
        ));
    }

    #[test]
    fn strided_recording_sums_increments() {
        let noise = NoiseConfig::new(4, 0.01, 100);
        let fine = simulate_trajectory(&spec(), &noise, &GaussianState::vacuum()).unwrap();
        let coarse = simulate_trajectory(
            &spec(),
            &noise.recording_every(10),
            &GaussianState::vacuum(),
        )
        .unwrap();
        assert_eq!(coarse.states.len(), 11);
        assert_eq!(coarse.states[10], fine.states[100]);
        let sum: f64 = fine.d_j1[..10].iter().sum();
        assert!((coarse.d_j1[0] - sum).abs() < 1e-15);
        feedback_force_audit(&coarse, &spec()).unwrap();
        assert!(
            simulate_trajectory(&spec(), &noise.recording_every(7), &GaussianState::vacuum())
                .is_err()
        );
    }

    #[test]
    fn ensemble_of_one() {
        let m = ModelSpec::feedback(0.0, 0.0, 0.1);
        let rec = simulate_trajectory(&m, &NoiseConfig::new(1, 0.01, 50), &GaussianState::vacuum())
            .unwrap();
        let ens = ensemble_moments(std::slice::from_ref(&rec)).unwrap();
        assert_eq!(ens.states, rec.states);
    }

    #[test]
    fn ensemble_errors() {
        assert_eq!(ensemble_moments(&[]), Err(Error::EmptyEnsemble));
        let a = simulate_trajectory(
            &spec(),
            &NoiseConfig::new(1, 0.01, 50),
            &GaussianState::vacuum(),
        )
        .unwrap();
        let b = simulate_trajectory(
            &spec(),
            &NoiseConfig::new(1, 0.01, 60),
            &GaussianState::vacuum(),
        )
        .unwrap();
        assert_eq!(ensemble_moments(&[a, b]), Err(Error::MismatchedGrids));
    }
}
