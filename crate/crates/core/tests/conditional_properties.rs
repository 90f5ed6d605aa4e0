use gravchan::conditional::{
    bootstrap_standard_errors, ensemble_moments, feedback_force_audit, simulate_ensemble,
    simulate_trajectory, simulate_with_increments,
};
use gravchan::gaussian::{build_generator, propagate, GaussianState};
use gravchan::{ModelSpec, NoiseConfig};
use nalgebra::{Matrix4, Vector4};

fn generic() -> ModelSpec {
    ModelSpec::feedback_with_rates([0.06, 0.04], [0.05, 0.02])
}

#[test]
fn conditional_covariance_ignores_the_seed() {
    let start = GaussianState::thermal([0.4, 0.1]);
    let a = simulate_trajectory(&generic(), &NoiseConfig::new(1, 0.01, 500), &start).unwrap();
    let b = simulate_trajectory(&generic(), &NoiseConfig::new(2, 0.01, 500), &start).unwrap();
    assert_ne!(a.d_j1, b.d_j1);
    for (x, y) in a.states.iter().zip(&b.states) {
        assert_eq!(x.cov, y.cov);
    }
}

#[test]
fn conditioning_purifies() {
    for start in [
        GaussianState::vacuum(),
        GaussianState::thermal([0.5, 2.0]),
        GaussianState::two_mode_squeezed(0.3),
    ] {
        let rec =
            simulate_trajectory(&generic(), &NoiseConfig::new(3, 0.01, 1000), &start).unwrap();
        let dets: Vec<f64> = rec
            .states
            .iter()
            .map(|s| (s.cov * 2.0).determinant())
            .collect();
        for w in dets.windows(2) {
            // pure states stay pure up to the Riccati step error
            assert!(w[1] <= w[0] + 1e-9, "{} -> {}", w[0], w[1]);
        }
    }
}

#[test]
fn innovations_are_white() {
    let g = 0.05;
    let spec = ModelSpec::feedback(g, g, g / 2.0);
    let (dt, n) = (0.01, 20_000);
    let rec = simulate_trajectory(
        &spec,
        &NoiseConfig::new(17, dt, n),
        &GaussianState::vacuum(),
    )
    .unwrap();
    let gain = 2.0 * (g / 2.0).sqrt();
    for k in 0..2 {
        let dj = if k == 0 { &rec.d_j1 } else { &rec.d_j2 };
        let innov: Vec<f64> = dj
            .iter()
            .zip(&rec.states)
            .map(|(j, s)| gain * (j - s.mean[2 * k] * dt))
            .collect();
        let mean = innov.iter().sum::<f64>() / n as f64;
        let var = innov.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() <= 3.0 * (dt / n as f64).sqrt(), "mean {mean}");
        assert!((var / dt - 1.0).abs() < 0.05, "variance {var}");
        for (a, w) in innov.iter().zip(&rec.wiener) {
            assert!((a - w[k]).abs() < 1e-12);
        }
    }
}

#[test]
fn relabeling_swaps_the_forces() {
    let spec = ModelSpec::feedback(0.05, 0.05, 0.03);
    let start = GaussianState::vacuum();
    let noise = NoiseConfig::new(5, 0.01, 400);
    let a = simulate_trajectory(&spec, &noise.with_streams([0, 1]), &start).unwrap();
    let b = simulate_trajectory(&spec, &noise.with_streams([1, 0]), &start).unwrap();
    let fa = feedback_force_audit(&a, &spec).unwrap();
    let fb = feedback_force_audit(&b, &spec).unwrap();
    for (x, y) in fa.iter().zip(&fb) {
        assert!((x[0] - y[1]).abs() < 1e-12 && (x[1] - y[0]).abs() < 1e-12);
    }
}

#[test]
fn force_series_is_gain_times_record_rate() {
    let spec = generic();
    let rec = simulate_trajectory(
        &spec,
        &NoiseConfig::new(9, 0.01, 300).recording_every(3),
        &GaussianState::vacuum(),
    )
    .unwrap();
    let forces = feedback_force_audit(&rec, &spec).unwrap();
    let h = rec.interval();
    for (i, f) in forces.iter().enumerate() {
        assert_eq!(f[0], 0.06 * rec.d_j2[i] / h);
        assert_eq!(f[1], 0.04 * rec.d_j1[i] / h);
    }
}

#[test]
fn ensemble_reproduces_the_unconditional_covariance_off_the_minimal_point() {
    let spec = generic();
    let start = GaussianState::coherent(Vector4::new(0.3, 0.0, -0.2, 0.1));
    let (dt, n_steps, stride) = (0.01, 300, 50);
    let noise = NoiseConfig::new(2024, dt, n_steps).recording_every(stride);
    let records = simulate_ensemble(&spec, &noise, &start, 1000).unwrap();
    let ens = ensemble_moments(&records).unwrap();
    let se = bootstrap_standard_errors(&records, 200, 7).unwrap();
    let exact = propagate(&start, &build_generator(&spec).unwrap(), dt, n_steps).unwrap();
    for (t, (e, s)) in ens.states.iter().zip(&se).enumerate() {
        let reference = &exact[t * stride];
        let z = (e.cov - reference.cov).zip_map(&s.cov, |d, s| d.abs() / (s + 1e-12));
        assert!(z.max() < 4.0, "t index {t}: {z}");
    }
}

fn coarse(path: &[[f64; 2]], factor: usize) -> Vec<[f64; 2]> {
    path.chunks(factor)
        .map(|c| c.iter().fold([0.0; 2], |a, w| [a[0] + w[0], a[1] + w[1]]))
        .collect()
}

#[test]
fn halving_the_step_converges() {
    let spec = generic();
    let start = GaussianState::coherent(Vector4::new(0.5, 0.0, 0.0, 0.0));
    let fine_dt = 0.005;
    let t_final = 4.0;
    let n_fine = (t_final / fine_dt) as usize;
    let levels = [4, 2, 1];
    let mut finals = vec![Matrix4::zeros(); levels.len()];
    let n_traj = 200;
    for i in 0..n_traj {
        let path = NoiseConfig::new(31, fine_dt, n_fine)
            .for_trajectory(i)
            .wiener_path();
        for (l, &f) in levels.iter().enumerate() {
            let rec =
                simulate_with_increments(&spec, fine_dt * f as f64, &coarse(&path, f), &start)
                    .unwrap();
            let m = rec.states.last().unwrap();
            finals[l] += (m.mean * m.mean.transpose() + m.cov) / n_traj as f64;
        }
    }
    let d1 = (finals[0] - finals[1]).amax();
    let d2 = (finals[1] - finals[2]).amax();
    assert!(d1 < 0.05, "{d1}");
    assert!(d2 < 0.75 * d1, "{d1} then {d2}");
}
