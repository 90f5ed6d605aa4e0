//! Deterministic master equations, integrated with RK4.

use nalgebra::DMatrix;

use super::ops::{Operators, SparseOp, C64};
use super::{FockConfig, FockState};
use crate::error::{Error, Result};
use crate::model::{ModelSpec, Variant};

const I: C64 = C64::new(0.0, 1.0);

fn re(v: f64) -> C64 {
    C64::new(v, 0.0)
}

/// `L(rho) = G_l rho + rho G_r + sum_i w_i A_i rho B_i`.
#[derive(Debug, Clone)]
pub struct Liouvillian {
    left: SparseOp,
    right: SparseOp,
    sandwiches: Vec<(C64, SparseOp, SparseOp)>,
}

/// Accumulates terms in dense form; sparsified once at the end.
struct Builder {
    left: DMatrix<C64>,
    right: DMatrix<C64>,
    sandwiches: Vec<(C64, SparseOp, SparseOp)>,
}

impl Builder {
    fn new(dim: usize) -> Self {
        Self {
            left: DMatrix::zeros(dim, dim),
            right: DMatrix::zeros(dim, dim),
            sandwiches: Vec::new(),
        }
    }

    /// `w A rho`.
    fn left(&mut self, w: C64, a: &SparseOp) {
        self.left += a.to_dense() * w;
    }

    /// `w rho B`.
    fn right(&mut self, w: C64, b: &SparseOp) {
        self.right += b.to_dense() * w;
    }

    /// `-i[H, rho]`.
    fn hamiltonian(&mut self, h: &SparseOp) {
        self.left(-I, h);
        self.right(I, h);
    }

    /// `-c [x, [x, rho]]`.
    fn double_commutator(&mut self, c: f64, x: &SparseOp) {
        if c == 0.0 {
            return;
        }
        let xx = x.mul(x);
        self.left(re(-c), &xx);
        self.right(re(-c), &xx);
        self.sandwiches.push((re(2.0 * c), x.clone(), x.clone()));
    }

    fn build(self) -> Liouvillian {
        Liouvillian {
            left: SparseOp::from_dense(&self.left),
            right: SparseOp::from_dense(&self.right),
            sandwiches: self.sandwiches,
        }
    }
}

/// `(n + 1/2) + (w^2 - 1) x^2 / 2`: an oscillator of frequency `w` in units
/// where the number basis belongs to frequency 1.
fn local_hamiltonian(ops: &Operators, k: usize, w: f64) -> SparseOp {
    let m = &ops.modes[k];
    let dim = ops.dim();
    let h = m.n.to_dense()
        + DMatrix::<C64>::identity(dim, dim) * re(0.5)
        + m.x_sq.to_dense() * re(0.5 * (w * w - 1.0));
    SparseOp::from_dense(&h)
}

fn add_qbm(b: &mut Builder, spec: &ModelSpec, ops: &Operators) {
    let Some(q) = spec.qbm else { return };
    for m in &ops.modes {
        // -(i gamma/2)[x, {p, rho}]
        let w = -0.5 * I * q.damping;
        b.left(w, &m.x.mul(&m.p));
        b.sandwiches.push((w, m.x.clone(), m.p.clone()));
        b.sandwiches.push((-w, m.p.clone(), m.x.clone()));
        b.right(-w, &m.p.mul(&m.x));
        b.double_commutator(q.damping * q.temperature, &m.x);
    }
}

impl Liouvillian {
    /// Builds the generator of `spec`. The feedback variant is written with
    /// the averaged feedback term `-(i/2) chi_k [x_k, {x_j, rho}]`; the
    /// minimal and scaled variants with the coupling Hamiltonian
    /// `g x1 x2`, so the two meet only through the physics.
    pub fn from_spec(spec: &ModelSpec, ops: &Operators) -> Result<Self> {
        spec.validate()?;
        let mut b = Builder::new(ops.dim());
        if spec.coherent {
            for k in 0..2 {
                b.hamiltonian(&local_hamiltonian(ops, k, spec.frequencies[k]));
            }
        }
        let [x1, x2] = [&ops.modes[0].x, &ops.modes[1].x];
        match spec.variant {
            Variant::Feedback { chi, .. } => {
                if spec.coherent {
                    let x12 = x1.mul(x2);
                    for (k, (xk, xj)) in [(x1, x2), (x2, x1)].into_iter().enumerate() {
                        let w = -0.5 * I * chi[k];
                        // [x_k, {x_j, rho}] = x_k x_j rho + x_k rho x_j - x_j rho x_k - rho x_j x_k
                        b.left(w, &x12);
                        b.sandwiches.push((w, xk.clone(), xj.clone()));
                        b.sandwiches.push((-w, xj.clone(), xk.clone()));
                        b.right(-w, &x12);
                    }
                }
            }
            Variant::Minimal { g } | Variant::Scaled { g, .. } => {
                if spec.coherent {
                    b.hamiltonian(&x1.mul(x2).scale(re(g)));
                }
            }
        }
        let c = spec.double_commutator_coefficients();
        b.double_commutator(c[0], x1);
        b.double_commutator(c[1], x2);
        add_qbm(&mut b, spec, ops);
        Ok(b.build())
    }

    pub fn apply(&self, rho: &DMatrix<C64>) -> DMatrix<C64> {
        let mut out = DMatrix::zeros(rho.nrows(), rho.ncols());
        self.left.add_left(re(1.0), rho, &mut out);
        self.right.add_right(re(1.0), rho, &mut out);
        for (w, a, b) in &self.sandwiches {
            a.add_left(*w, &b.right(rho), &mut out);
        }
        out
    }

    /// Upper bound on the induced infinity norm of the superoperator.
    pub fn norm_bound(&self) -> f64 {
        self.left.infinity_norm()
            + self.right.infinity_norm()
            + self
                .sandwiches
                .iter()
                .map(|(w, a, b)| w.norm() * a.infinity_norm() * b.infinity_norm())
                .sum::<f64>()
    }

    pub fn rk4_step(&self, rho: &DMatrix<C64>, dt: f64) -> DMatrix<C64> {
        let h = re(0.5 * dt);
        let k1 = self.apply(rho);
        let k2 = self.apply(&(rho + &k1 * h));
        let k3 = self.apply(&(rho + &k2 * h));
        let k4 = self.apply(&(rho + &k3 * re(dt)));
        rho + (k1 + (k2 + k3) * re(2.0) + k4) * re(dt / 6.0)
    }
}

/// `dt` times the norm bound must stay inside the RK4 stability region.
pub const RK4_STABILITY_LIMIT: f64 = 2.5;

#[derive(Debug, Clone, PartialEq)]
pub struct FockTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<FockState>,
}

/// RK4 evolution from `rho0`, keeping every `cfg.record_every`-th state (the
/// initial and final states are always kept). Invariants are checked every
/// step; a leakage breach aborts with [`Error::Leakage`], meaning `N` should
/// be raised.
pub fn evolve_unconditional(
    rho0: &FockState,
    spec: &ModelSpec,
    dt: f64,
    n_steps: usize,
    cfg: &FockConfig,
) -> Result<FockTrajectory> {
    cfg.validate()?;
    crate::error::require_positive("dt", dt)?;
    if rho0.levels() != cfg.n {
        return Err(Error::InvalidParameter {
            name: "N",
            value: rho0.levels() as f64,
            reason: "initial state truncation differs from the configuration",
        });
    }
    rho0.validate(cfg)?;
    let ops = super::build_operators(cfg.n)?;
    let liouv = Liouvillian::from_spec(spec, &ops)?;
    let norm = liouv.norm_bound();
    if dt * norm >= RK4_STABILITY_LIMIT {
        return Err(Error::StepTooLarge { dt, norm });
    }
    let mut traj = FockTrajectory {
        times: vec![0.0],
        states: vec![rho0.clone()],
    };
    let mut state = rho0.clone();
    for step in 1..=n_steps {
        state = FockState::from_raw(cfg.n, liouv.rk4_step(state.rho(), dt));
        let last = step == n_steps;
        state.check_invariants(step, last || step % cfg.positivity_stride == 0)?;
        state.check_leakage(step, cfg)?;
        if last || step % cfg.record_every == 0 {
            traj.times.push(step as f64 * dt);
            traj.states.push(state.clone());
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector4;

    #[test]
    fn closed_oscillation() {
        let n = 16;
        let cfg = FockConfig::new(n).with_leakage_tol(1e-6);
        let ops = crate::fock::build_operators(n).unwrap();
        let rho0 = FockState::from_means(n, &Vector4::new(1.0, 0.0, 0.0, 0.5));
        let (dt, steps) = (0.005, 600);
        let traj = evolve_unconditional(&rho0, &ModelSpec::minimal(0.0), dt, steps, &cfg).unwrap();
        for (t, s) in traj.times.iter().zip(&traj.states) {
            let m = s.moments(&ops).mean;
            assert!((m[0] - t.cos()).abs() < 1e-8, "{t}");
            assert!((m[1] + t.sin()).abs() < 1e-8);
            assert!((m[2] - 0.5 * t.sin()).abs() < 1e-8);
        }
    }

    #[test]
    fn shifted_frequency() {
        let n = 16;
        let cfg = FockConfig::new(n).with_leakage_tol(1e-6);
        let ops = crate::fock::build_operators(n).unwrap();
        let w = 0.9;
        let spec = ModelSpec::minimal(0.0).with_frequencies([w, 1.0]);
        let rho0 = FockState::from_means(n, &Vector4::new(1.0, 0.0, 0.0, 0.0));
        let traj = evolve_unconditional(&rho0, &spec, 0.01, 200, &cfg).unwrap();
        let (t, s) = (traj.times[200], &traj.states[200]);
        assert!((s.moments(&ops).mean[0] - (w * t).cos()).abs() < 1e-8);
    }

    #[test]
    fn minimal_heating_slope_at_start() {
        let n = 12;
        let g = 0.05;
        let ops = crate::fock::build_operators(n).unwrap();
        let dt = 1e-4;
        let traj = evolve_unconditional(
            &FockState::vacuum(n),
            &ModelSpec::minimal(g),
            dt,
            1,
            &FockConfig::new(n),
        )
        .unwrap();
        let (n1, n2) = traj.states[1].phonon_numbers(&ops);
        assert!(((n1 / dt) - g / 2.0).abs() < 1e-6);
        assert!(((n2 / dt) - g / 2.0).abs() < 1e-6);
    }

    #[test]
    fn step_guard() {
        let r = evolve_unconditional(
            &FockState::vacuum(10),
            &ModelSpec::minimal(0.05),
            1.0,
            1,
            &FockConfig::new(10),
        );
        assert!(matches!(r, Err(Error::StepTooLarge { .. })));
    }
}
