use std::f64::consts::PI;

use optoqpg::analytic::reduced_optical_state_analytic;
use optoqpg::lindblad::{
    convergence_report, evolve_blocks, gate_fidelity_dissipative, monte_carlo_gate_fidelity,
    monte_carlo_gate_fidelity_superposed, BasisEvolution, BlockState,
};
use optoqpg::model::t_pi;
use optoqpg::operators::thermal_state;
use optoqpg::{EvolutionConfig, QubitAmplitudes, SystemParams};

fn lossy(nbar: f64) -> SystemParams {
    SystemParams::ideal()
        .with_nbar(nbar)
        .with_losses(1e-2, 1e-2, 1e6)
}

fn fidelity_at(p: &SystemParams, t: f64) -> f64 {
    let cfg = EvolutionConfig::for_params(vec![0.0, t], p);
    gate_fidelity_dissipative(p, &cfg).unwrap().fidelity[1]
}

#[test]
fn adjoint_relation_matches_direct_integration() {
    let p = SystemParams::new(0.35, 0.2)
        .with_nbar(0.5)
        .with_losses(0.03, 0.01, 200.0);
    let cfg = EvolutionConfig::for_params(vec![0.0, 1.0, 2.5], &p);
    let short = BasisEvolution::run(&p, &cfg, true).unwrap();
    let full = BasisEvolution::run(&p, &cfg, false).unwrap();
    let mut worst = 0.0f64;
    for i in 0..3 {
        for k in 0..4 {
            for l in 0..4 {
                let (a, b) = (short.image(i, k, l), full.image(i, k, l));
                for m in 0..4 {
                    for n in 0..4 {
                        worst = worst.max((a[m][n] - b[m][n]).norm());
                    }
                }
            }
        }
    }
    assert!(worst <= 1e-9, "{worst:e}");
}

#[test]
fn more_loss_never_helps() {
    let f: Vec<f64> = [0.0, 1e-3, 1e-2, 3e-2]
        .iter()
        .map(|&k| fidelity_at(&SystemParams::ideal().with_losses(k, k, 1e6), 2.0 * PI))
        .collect();
    assert!(f.windows(2).all(|w| w[0] >= w[1]), "{f:?}");

    // mechanical damping at finite temperature
    let f: Vec<f64> = [1e6, 1e3, 1e2]
        .iter()
        .map(|&q| {
            fidelity_at(
                &SystemParams::ideal()
                    .with_nbar(1.0)
                    .with_losses(0.0, 0.0, q),
                2.0 * PI,
            )
        })
        .collect();
    assert!(f.windows(2).all(|w| w[0] >= w[1]), "{f:?}");
}

#[test]
fn direct_and_superposed_monte_carlo_agree_per_seed() {
    let p = SystemParams::new(0.3, 0.25)
        .with_nbar(0.5)
        .with_losses(0.05, 0.02, 100.0);
    let cfg = EvolutionConfig::for_params(vec![0.0, 1.2], &p);
    let direct = monte_carlo_gate_fidelity(1.2, &p, &cfg, 200, 9).unwrap();
    let superposed = monte_carlo_gate_fidelity_superposed(1.2, &p, &cfg, 200, 9).unwrap();
    assert!((direct.mean - superposed.mean).abs() <= 1e-9);
    assert!((direct.stderr - superposed.stderr).abs() <= 1e-9);
}

#[test]
fn monte_carlo_error_shrinks_as_inverse_root() {
    let p = lossy(0.0);
    let cfg = EvolutionConfig::for_params(vec![0.0, PI], &p);
    let small = monte_carlo_gate_fidelity_superposed(PI, &p, &cfg, 400, 3).unwrap();
    let large = monte_carlo_gate_fidelity_superposed(PI, &p, &cfg, 6400, 3).unwrap();
    let ratio = small.stderr / large.stderr;
    assert!((3.2..4.8).contains(&ratio), "{ratio}");
}

#[test]
fn convergence_report_at_zero_temperature() {
    let p = lossy(0.0);
    let cfg = EvolutionConfig::for_params(vec![0.0, 1.0], &p);
    let r = convergence_report(&p, &cfg).unwrap();
    assert!(r.passed, "{r:?}");
    assert!(r.delta_dim < 1e-9 && r.delta_tol < 1e-9, "{r:?}");
    assert_eq!(r.t_pi, t_pi(&p).unwrap());
}

// About fourteen minutes on one core: three lossy runs, one at 372 levels.
#[test]
#[ignore]
fn convergence_report_at_high_temperature() {
    let p = lossy(10.0);
    let cfg = EvolutionConfig::for_params(vec![0.0, 1.0], &p);
    let r = convergence_report(&p, &cfg).unwrap();
    assert!(r.passed, "{r:?}");
}

#[test]
fn starved_truncation_fails_convergence() {
    let p = lossy(10.0);
    let cfg = EvolutionConfig::for_params(vec![0.0, 1.0], &p).with_mech_dim(8);
    let r = convergence_report(&p, &cfg).unwrap();
    assert!(!r.passed);
    assert!(r.baseline.is_none() && !r.errors.is_empty(), "{r:?}");
}

#[test]
fn evolved_reduced_state_matches_closed_form() {
    let p = SystemParams::ideal().with_nbar(0.5);
    let times = vec![0.0, PI / 3.0, PI, 2.0 * PI];
    let cfg = EvolutionConfig::for_params(times.clone(), &p);
    let basis = BasisEvolution::run(&p, &cfg, true).unwrap();
    let alpha = QubitAmplitudes::from_real([0.5, -0.5, 0.5, 0.5]).unwrap();
    for (i, &t) in times.iter().enumerate() {
        let numeric = basis.reduced_state(&alpha, i);
        let exact = reduced_optical_state_analytic(&alpha, t, &p).unwrap();
        let dev = (numeric - exact).camax();
        assert!(dev <= 1e-7, "t = {t}: {dev:e}");
    }
}

#[test]
fn vacuum_on_thermal_mechanics_is_stationary() {
    let p = SystemParams::ideal()
        .with_nbar(2.0)
        .with_losses(0.02, 0.01, 50.0);
    let cfg = EvolutionConfig::for_params(vec![0.0, 3.0], &p);
    let mech = thermal_state(p.nbar, cfg.mech_dim).unwrap().into_matrix();
    let start = BlockState::logical_block(0, 0, &mech).unwrap();
    let (end, _) = evolve_blocks(start.clone(), &p, &cfg, |_, _, _| Ok(())).unwrap();
    let dev = start
        .data()
        .iter()
        .zip(end.data())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    assert!(dev <= 1e-12, "{dev:e}");
}

#[test]
fn tighter_tolerance_moves_fidelity_little() {
    let p = lossy(0.0);
    let tp = t_pi(&p).unwrap();
    let base = EvolutionConfig::for_params(vec![0.0, tp], &p);
    let tol = base.rel_tol;
    let f = gate_fidelity_dissipative(&p, &base).unwrap().fidelity[1];
    let tight = base.clone().with_tolerances(tol / 2.0, base.abs_tol / 2.0);
    let g = gate_fidelity_dissipative(&p, &tight).unwrap().fidelity[1];
    assert!((f - g).abs() < 10.0 * tol, "{:e}", (f - g).abs());
}
