//! One function per experiment. Each fills a [`ResultBundle`] and records
//! its embedded checks; whether failed checks matter is up to the caller.
//!
//! Dimensionless experiments report times in units of `1/omega` and rates
//! in units of `omega`.

use gravchan::conditional::{
    bootstrap_standard_errors, ensemble_moments, feedback_force_audit, simulate_ensemble,
    simulate_trajectory,
};
use gravchan::entanglement::{channel_criterion, entanglement_along_trajectory};
use gravchan::fock::{
    build_operators, coherence_decay_probe, evolve_conditional, evolve_unconditional,
};
use gravchan::gaussian::{build_generator, phonon_numbers, propagate};
use gravchan::params::{
    effective_temperature, gravitational_rates, quoted_sphere_splitting, splitting_bound, Damping,
    DerivedRates,
};
use gravchan::{Constants, FockState, GaussianState, ModelSpec, NoiseConfig};

use crate::bundle::{ResultBundle, Series};
use crate::config::{Experiment, ExperimentConfig};
use crate::CliError;

const C: Constants = Constants::CODATA_2018;
const TIME: &str = "1/omega";
const RATE: &str = "omega";
const EBIT: &str = "ebit";

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultBundle, CliError> {
    let mut b = ResultBundle::default();
    match cfg.experiment {
        Experiment::Rates => rates(cfg, &mut b)?,
        Experiment::SplittingBound => bound(cfg, &mut b)?,
        Experiment::Heat => heat(cfg, &mut b)?,
        Experiment::Decohere => decohere(cfg, &mut b)?,
        Experiment::EntangleWitness => {
            let spec = cfg.model_spec()?;
            entangle(cfg, &spec, &mut b)?;
        }
        Experiment::EpsilonScan => epsilon_scan(cfg, &mut b)?,
        Experiment::Trajectories => trajectories(cfg, &mut b)?,
        Experiment::OracleCompare => oracle_compare(cfg, &mut b)?,
    }
    if let Some(integ) = cfg.integration {
        b.number("t_final", integ.t_final, TIME);
        b.number("dt", integ.dt, TIME);
    }
    Ok(b)
}

fn rates(cfg: &ExperimentConfig, b: &mut ResultBundle) -> Result<(), CliError> {
    let setup = cfg.physical()?.setup()?;
    let d = DerivedRates::from_setup(&setup, &C)?;
    b.number("K", d.k, "kg/s^2");
    b.number("Omega1", d.omega1_shifted, "rad/s");
    b.number("Omega2", d.omega2_shifted, "rad/s");
    b.number("omega_plus", d.modes.plus, "rad/s");
    b.number("omega_minus", d.modes.minus, "rad/s");
    b.number("Delta", d.splitting.approx, "1/s");
    b.number("Delta_exact", d.splitting.exact, "1/s");
    b.number("D_grav", d.rates.diffusion, "kg^2 m^2/s^3");
    b.number("R_grav", d.rates.heating, "1/s");
    b.number("Lambda_grav", d.rates.decoherence, "1/s");
    b.number("g", d.g, "1/s");
    b.number("g_dimensionless", d.g_in_frequency_units(setup.omega1), "1");
    if let Some(t) = d.t_grav {
        b.number("T_grav", t, "K");
    }
    b.check(
        "rate relations",
        d.rates.heating == d.splitting.approx / 2.0
            && d.rates.decoherence == d.splitting.approx / 4.0,
        format!(
            "R = {:e}, Lambda = {:e}, Delta = {:e}",
            d.rates.heating, d.rates.decoherence, d.splitting.approx
        ),
    );
    if let Some(rho) = setup.rho {
        let bound = splitting_bound(rho, setup.omega1, &C)?;
        b.number("Delta_bound", bound.printed, "1/s");
        b.number("Delta_bound_consistent", bound.consistent, "1/s");
        if let Some(q) = setup.q {
            let damping = Damping {
                gamma: None,
                q: Some(q),
            };
            let t = effective_temperature(d.k, setup.m1, damping, setup.omega1, bound.printed, &C)?;
            b.number("T_grav_bound", t, "K");
        }
        b.check(
            "splitting below the contact bound",
            d.splitting.approx <= bound.consistent * (1.0 + 1e-12),
            format!(
                "Delta = {:e}, bound {:e}",
                d.splitting.approx, bound.consistent
            ),
        );
    }
    Ok(())
}

fn bound(cfg: &ExperimentConfig, b: &mut ResultBundle) -> Result<(), CliError> {
    let p = cfg.physical()?;
    let rho = p
        .density()?
        .ok_or_else(|| CliError::Config("physical.rho is required".into()))?;
    let (omega, _) = p.frequencies()?;
    let bound = splitting_bound(rho, omega, &C)?;
    b.number("Delta_bound", bound.printed, "1/s");
    b.number("Delta_bound_consistent", bound.consistent, "1/s");
    b.check(
        "consistent bound is twice the quoted one",
        bound.consistent == 2.0 * bound.printed,
        format!("{:e} vs {:e}", bound.consistent, bound.printed),
    );
    if let (Some(r), Some(d)) = (p.radius()?, p.separation()?) {
        if d < 2.0 * r {
            return Err(CliError::Config(format!("physical.d = {d} m is below 2r")));
        }
        let quoted = quoted_sphere_splitting(rho, r, d, omega, &C);
        let m = gravchan::params::sphere_mass(rho, r);
        let k = 2.0 * C.g() * m * m / d.powi(3);
        let delta = k / (m * omega);
        b.number("Delta_quoted", quoted, "1/s");
        b.number("Delta", delta, "1/s");
        b.number(
            "R_grav",
            gravitational_rates(k, m, omega, C.hbar())?.heating,
            "1/s",
        );
        b.check(
            "splitting below the contact bound",
            delta <= bound.consistent * (1.0 + 1e-12),
            format!("Delta = {delta:e}, bound {:e}", bound.consistent),
        );
    }
    Ok(())
}

fn slope(t: &[f64], y: &[f64]) -> f64 {
    let n = t.len() as f64;
    let (mt, my) = (t.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let (sty, stt) = t.iter().zip(y).fold((0.0, 0.0), |(a, b), (t, y)| {
        (a + (t - mt) * (y - my), b + (t - mt) * (t - mt))
    });
    sty / stt
}

fn initial_state(cfg: &ExperimentConfig) -> GaussianState {
    GaussianState::coherent(cfg.initial_mean())
}

fn heat(cfg: &ExperimentConfig, b: &mut ResultBundle) -> Result<(), CliError> {
    let spec = cfg.model_spec()?;
    let integ = cfg.integration()?;
    let (n, stride) = (integ.n_steps()?, integ.stride()?);
    let traj = propagate(&initial_state(cfg), &build_generator(&spec)?, integ.dt, n)?;
    let times: Vec<f64> = (0..=n).map(|i| i as f64 * integ.dt).collect();
    let phonons: Vec<(f64, f64)> = traj.iter().map(phonon_numbers).collect();
    let n1: Vec<f64> = phonons.iter().map(|p| p.0).collect();
    let n2: Vec<f64> = phonons.iter().map(|p| p.1).collect();
    let rates = [slope(&times, &n1), slope(&times, &n2)];
    let expected = spec.double_commutator_coefficients();
    b.number("heating_rate_1", rates[0], RATE);
    b.number("heating_rate_2", rates[1], RATE);
    b.number("expected_heating_rate_1", expected[0], RATE);
    b.number("expected_heating_rate_2", expected[1], RATE);

    let mut columns = vec!["n1", "n2"];
    let fock_phonons = match cfg.fock {
        Some(f) => {
            let fcfg = f.config().recording_every(stride);
            let rho0 = FockState::from_means(f.n, &cfg.initial_mean());
            let ft = evolve_unconditional(&rho0, &spec, integ.dt, n, &fcfg)?;
            let ops = build_operators(f.n)?;
            columns.extend(["n1_fock", "n2_fock"]);
            Some(
                ft.states
                    .iter()
                    .map(|s| s.phonon_numbers(&ops))
                    .collect::<Vec<_>>(),
            )
        }
        None => None,
    };
    let mut series = Series::new(columns);
    let mut deviation: f64 = 0.0;
    for (row, i) in (0..=n).step_by(stride).enumerate() {
        let mut values = vec![n1[i], n2[i]];
        if let Some(fp) = &fock_phonons {
            values.extend([fp[row].0, fp[row].1]);
            deviation = deviation
                .max((fp[row].0 - n1[i]).abs())
                .max((fp[row].1 - n2[i]).abs());
        }
        series.push(times[i], values);
    }
    b.series.insert("phonons".into(), series);
    if fock_phonons.is_some() {
        b.number("max_phonon_deviation_fock", deviation, "quanta");
        b.check(
            "Fock and Gaussian phonon numbers agree",
            deviation <= 1e-4,
            format!("max deviation {deviation:e}"),
        );
    }
    if !spec.coherent && spec.qbm.is_none() {
        let worst = (0..2)
            .map(|k| ((rates[k] - expected[k]) / expected[k]).abs())
            .fold(0.0, f64::max);
        b.check(
            "heating rate equals the noise coefficient",
            worst <= 1e-6,
            format!("relative deviation {worst:e}"),
        );
    }
    Ok(())
}

fn decohere(cfg: &ExperimentConfig, b: &mut ResultBundle) -> Result<(), CliError> {
    let spec = cfg.model_spec()?;
    let integ = cfg.integration()?;
    let n = integ.n_steps()?;
    let fock = cfg
        .fock
        .ok_or_else(|| CliError::Config("fock section is required".into()))?;
    let separations = &cfg.probe.as_ref().expect("validated").separations;
    let fits = separations
        .iter()
        .map(|&s| coherence_decay_probe(s, &spec, integ.dt, n, &fock.config()))
        .collect::<Result<Vec<_>, _>>()?;
    let names: Vec<String> = separations.iter().map(|s| format!("C_sep_{s}")).collect();
    let mut series = Series::new(names);
    for (i, &t) in fits[0].times.iter().enumerate() {
        series.push(t, fits.iter().map(|f| f.coherence[i]));
    }
    b.series.insert("coherence".into(), series);
    for f in &fits {
        let key = format!("sep_{}", f.separation);
        b.number(&format!("rate_{key}"), f.rate, RATE);
        b.number(&format!("expected_rate_{key}"), f.expected, RATE);
        b.number(&format!("fit_residual_{key}"), f.residual, "1");
        b.flag(&format!("inconclusive_{key}"), f.inconclusive);
        let ok = !f.inconclusive
            && if f.expected == 0.0 {
                f.rate.abs() <= 1e-9
            } else {
                (f.rate / f.expected - 1.0).abs() <= 0.05
            };
        b.check(
            &format!("decay rate at separation {}", f.separation),
            ok,
            format!("fitted {:e}, expected {:e}", f.rate, f.expected),
        );
    }
    for pair in fits.windows(2) {
        if pair[0].separation > 0.0 && pair[1].separation > 0.0 {
            let ratio = pair[1].rate / pair[0].rate;
            let expected = (pair[1].separation / pair[0].separation).powi(2);
            b.check(
                &format!(
                    "quadratic scaling {} -> {}",
                    pair[0].separation, pair[1].separation
                ),
                (ratio / expected - 1.0).abs() <= 0.05,
                format!("rate ratio {ratio}, expected {expected}"),
            );
        }
    }
    Ok(())
}

/// Propagates from the configured initial state and reports the
/// entanglement along the way. Returns the maximum of `E_N`.
fn entangle(
    cfg: &ExperimentConfig,
    spec: &ModelSpec,
    b: &mut ResultBundle,
) -> Result<f64, CliError> {
    let integ = cfg.integration()?;
    let (n, stride) = (integ.n_steps()?, integ.stride()?);
    let traj = propagate(&initial_state(cfg), &build_generator(spec)?, integ.dt, n)?;
    let e_n = entanglement_along_trajectory(&traj);
    let max = e_n.iter().copied().fold(0.0, f64::max);
    let mut series = Series::new(["E_N", "n1", "n2"]);
    for i in (0..=n).step_by(stride) {
        let (n1, n2) = phonon_numbers(&traj[i]);
        series.push(i as f64 * integ.dt, [e_n[i], n1, n2]);
    }
    b.series.insert("entanglement".into(), series);
    b.number("max_E_N", max, EBIT);
    b.number("final_E_N", *e_n.last().unwrap(), EBIT);
    if let Some(g) = spec.symmetric_coupling() {
        let crit = channel_criterion(&spec.decoherence_matrix(), g)?;
        b.number("criterion_min_eigenvalue", crit.eigenvalues[0], RATE);
        b.number("criterion_max_eigenvalue", crit.eigenvalues[1], RATE);
        b.flag("non_entangling", crit.non_entangling);
        if crit.non_entangling && spec.qbm.is_none() {
            b.check(
                "non-entangling channel keeps the state separable",
                max <= 1e-10,
                format!("max E_N = {max:e}"),
            );
        }
    }
    Ok(max)
}

fn epsilon_scan(cfg: &ExperimentConfig, b: &mut ResultBundle) -> Result<(), CliError> {
    let (g, eps, spec) = cfg.epsilon_spec()?;
    b.number("epsilon", eps, RATE);
    b.number("y", 2.0 * g - eps, RATE);
    let max = entangle(cfg, &spec, b)?;
    b.checks.clear();
    if eps > 0.0 {
        b.check(
            "reduced noise entangles",
            max > 0.0,
            format!("epsilon = {eps}, max E_N = {max:e}"),
        );
    } else {
        b.check(
            "minimal noise keeps the state separable",
            max <= 1e-10,
            format!("epsilon = {eps}, max E_N = {max:e}"),
        );
    }
    Ok(())
}

const PAIRS: [(usize, usize); 10] = [
    (0, 0),
    (0, 1),
    (0, 2),
    (0, 3),
    (1, 1),
    (1, 2),
    (1, 3),
    (2, 2),
    (2, 3),
    (3, 3),
];
const QUADRATURES: [&str; 4] = ["x1", "p1", "x2", "p2"];

fn trajectories(cfg: &ExperimentConfig, b: &mut ResultBundle) -> Result<(), CliError> {
    let spec = cfg.model_spec()?;
    let integ = cfg.integration()?;
    let (n, stride) = (integ.n_steps()?, integ.stride()?);
    let ens_cfg = cfg.ensemble;
    let noise = NoiseConfig::new(ens_cfg.seed, integ.dt, n).recording_every(stride);
    let start = initial_state(cfg);
    let records = simulate_ensemble(&spec, &noise, &start, ens_cfg.n_traj)?;
    let ens = ensemble_moments(&records)?;
    let se = bootstrap_standard_errors(&records, ens_cfg.bootstrap, ens_cfg.seed)?;
    let exact = propagate(&start, &build_generator(&spec)?, integ.dt, n)?;

    let mut columns = Vec::new();
    for (i, j) in PAIRS {
        let name = format!("cov_{}_{}", QUADRATURES[i], QUADRATURES[j]);
        columns.extend([
            format!("{name}_ensemble"),
            format!("{name}_exact"),
            format!("{name}_se"),
        ]);
    }
    columns.push("E_N_ensemble".into());
    let mut series = Series::new(columns);
    let e_n = entanglement_along_trajectory(&ens.states);
    let mut worst_z: f64 = 0.0;
    for (t, ((state, err), en)) in ens.states.iter().zip(&se).zip(&e_n).enumerate() {
        let reference = &exact[t * stride];
        let mut row = Vec::new();
        for (i, j) in PAIRS {
            let (e, x, s) = (state.cov[(i, j)], reference.cov[(i, j)], err.cov[(i, j)]);
            row.extend([e, x, s]);
            if (e - x).abs() > 1e-12 {
                worst_z = worst_z.max((e - x).abs() / s);
            }
        }
        row.push(*en);
        series.push(ens.times[t], row);
    }
    b.series.insert("ensemble".into(), series);

    let first = &records[0];
    let forces = feedback_force_audit(first, &spec)?;
    let mut record = Series::new(["dJ1", "dJ2", "force_1", "force_2"]);
    for (i, f) in forces.iter().enumerate() {
        record.push(
            first.times[i + 1],
            [first.d_j1[i], first.d_j2[i], f[0], f[1]],
        );
    }
    b.series.insert("record_0".into(), record);
    let mut conditional = Series::new(
        QUADRATURES.iter().map(|q| format!("mean_{q}")).chain(
            PAIRS
                .iter()
                .map(|(i, j)| format!("cov_{}_{}", QUADRATURES[*i], QUADRATURES[*j])),
        ),
    );
    for (t, s) in first.times.iter().zip(&first.states) {
        conditional.push(
            *t,
            s.mean
                .iter()
                .copied()
                .chain(PAIRS.iter().map(|&(i, j)| s.cov[(i, j)])),
        );
    }
    b.series.insert("conditional_0".into(), conditional);

    let max_e_n = e_n.iter().copied().fold(0.0, f64::max);
    b.integer("n_traj", ens_cfg.n_traj as u64, "1");
    b.number("max_cov_error_in_se", worst_z, "1");
    b.number("max_E_N_ensemble", max_e_n, EBIT);
    b.check(
        "ensemble reproduces the unconditional covariance",
        worst_z <= 3.0,
        format!("largest deviation {worst_z:.3} bootstrap standard errors"),
    );
    Ok(())
}

fn oracle_compare(cfg: &ExperimentConfig, b: &mut ResultBundle) -> Result<(), CliError> {
    let spec = cfg.model_spec()?;
    let integ = cfg.integration()?;
    let (n, stride) = (integ.n_steps()?, integ.stride()?);
    let fock = cfg
        .fock
        .ok_or_else(|| CliError::Config("fock section is required".into()))?;
    let fcfg = fock.config().recording_every(stride);
    let ops = build_operators(fock.n)?;
    let rho0 = FockState::from_means(fock.n, &cfg.initial_mean());
    let ft = evolve_unconditional(&rho0, &spec, integ.dt, n, &fcfg)?;
    let gt = propagate(&initial_state(cfg), &build_generator(&spec)?, integ.dt, n)?;
    let mut series = Series::new(["mean_diff", "cov_diff", "leakage", "purity_fock"]);
    let (mut worst_mean, mut worst_cov): (f64, f64) = (0.0, 0.0);
    for (row, i) in (0..=n).step_by(stride).enumerate() {
        let s = &ft.states[row];
        let m = s.moments(&ops);
        let dm = (m.mean - gt[i].mean).amax();
        let dc = (m.cov - gt[i].cov).amax();
        worst_mean = worst_mean.max(dm);
        worst_cov = worst_cov.max(dc);
        series.push(ft.times[row], [dm, dc, s.leakage(), s.purity()]);
    }
    b.series.insert("unconditional".into(), series);
    b.number("max_mean_diff", worst_mean, "1");
    b.number("max_cov_diff", worst_cov, "1");
    b.number("final_leakage", ft.states.last().unwrap().leakage(), "1");
    b.check(
        "Fock and Gaussian moments agree",
        worst_mean.max(worst_cov) <= 1e-4,
        format!("mean {worst_mean:e}, covariance {worst_cov:e}"),
    );

    if let gravchan::Variant::Feedback { .. } = spec.variant {
        if spec.qbm.is_none() {
            let noise = NoiseConfig::new(cfg.ensemble.seed, integ.dt, n).recording_every(stride);
            let fc = evolve_conditional(&rho0, &spec, &noise, &fock.config())?;
            let gc = simulate_trajectory(&spec, &noise, &initial_state(cfg))?;
            let mut series = Series::new(["mean_diff", "purity_fock", "trace_drift"]);
            let mut worst: f64 = 0.0;
            for (i, (fm, gs)) in fc.moments.iter().zip(&gc.states).enumerate() {
                let d = (fm.mean - gs.mean).amax();
                worst = worst.max(d);
                series.push(fc.times[i], [d, fc.purity[i], fc.trace_drift]);
            }
            b.series.insert("conditional".into(), series);
            b.number("max_conditional_mean_diff", worst, "1");
            b.number("trace_drift", fc.trace_drift, "1");
            b.check(
                "filter and Fock conditional means agree",
                worst <= 1e-3,
                format!("max mean difference {worst:e}"),
            );
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_a_line() {
        let t: Vec<f64> = (0..10).map(f64::from).collect();
        let y: Vec<f64> = t.iter().map(|t| 3.0 - 0.5 * t).collect();
        assert!((slope(&t, &y) + 0.5).abs() < 1e-14);
    }
}
