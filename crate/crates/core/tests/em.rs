use driftgp::estimator::m_step_currents;
use driftgp::{
    e_step, m_step, process_mission, random_gyre, run_em_cycle, run_mission, AnalyticField, Cycle, EmConfig, GpModel,
    HyperParams, KernelKind, Vec2, VehicleConfig,
};

#[test]
fn noise_free_single_step_recovers_drift_rate() {
    let hp = HyperParams::new(35_000.0, 0.5, 1e-6).unwrap();
    let model = GpModel::empty(hp, KernelKind::Incompressible, 1e-2).unwrap();
    let dr = vec![Vec2::ZERO, Vec2::new(21.0, 0.0)];
    let cycle = Cycle::new(dr, 60.0, Vec2::new(33.0, -6.0)).unwrap();
    let state = run_em_cycle(&model, &cycle, &EmConfig::for_hyper(&hp)).unwrap();
    let expect = cycle.drift() * (1.0 / 60.0);
    assert!((state.currents[0] - expect).norm() < 1e-6);
}

#[test]
fn converged_cycles_close_the_drift() {
    let hp = HyperParams::default();
    let log = run_mission(&VehicleConfig::default(), &random_gyre(6), 6).unwrap();
    let est = process_mission(&log, &hp, KernelKind::Incompressible, &EmConfig::for_hyper(&hp)).unwrap();
    for (d, c) in est.diagnostics.iter().zip(&log.cycles) {
        let s = d.state.as_ref().unwrap();
        let sum = s.currents.iter().fold(Vec2::ZERO, |a, &w| a + w) * c.dt();
        assert!((sum - c.drift()).norm() <= 3.0 * hp.gps_noise_std_m + 1.0);
        let x = e_step(c.dead_reckoned(), &s.currents, c.dt()).unwrap();
        assert_eq!(x, s.trajectory);
    }
}

#[test]
fn dense_and_row_sum_conditioning_agree_on_a_real_track() {
    let hp = HyperParams::default();
    let log = run_mission(&VehicleConfig::default(), &random_gyre(8), 8).unwrap();
    let cycle = &log.cycles[0];
    let prior = GpModel::with_data(
        hp,
        KernelKind::Incompressible,
        1e-2,
        vec![Vec2::new(500.0, 800.0), Vec2::new(-4000.0, 2000.0)],
        vec![Vec2::new(0.1, -0.05), Vec2::new(0.0, 0.2)],
    )
    .unwrap();
    let dense = m_step(&prior, cycle.dead_reckoned(), cycle.drift(), cycle.dt()).unwrap();
    let fast = m_step_currents(&prior, cycle.dead_reckoned(), cycle.drift(), cycle.dt()).unwrap();
    for (a, b) in dense.currents.iter().zip(&fast) {
        assert!((*a - *b).norm() < 1e-10);
    }
}

#[test]
fn uniform_current_is_recovered_everywhere_near_the_track() {
    let hp = HyperParams::default();
    let c = Vec2::new(0.12, -0.07);
    let field = AnalyticField::uniform_from_current(c).unwrap();
    let log = run_mission(&VehicleConfig::default(), &field, 1).unwrap();
    let est = process_mission(&log, &hp, KernelKind::Incompressible, &EmConfig::for_hyper(&hp)).unwrap();
    let probes = [Vec2::new(0.0, 0.0), Vec2::new(8e3, 3e3), Vec2::new(-5e3, -9e3)];
    for w in est.model.predict_mean(&probes) {
        assert!((w - c).norm() < 0.02, "{w:?}");
    }
}

#[test]
fn em_residual_does_not_grow_across_iterations() {
    let hp = HyperParams::default();
    let cfg = EmConfig::for_hyper(&hp);
    for seed in 0..4 {
        let log = run_mission(&VehicleConfig::default(), &random_gyre(seed), seed).unwrap();
        let est = process_mission(&log, &hp, KernelKind::Incompressible, &cfg).unwrap();
        for d in &est.diagnostics {
            let r = &d.state.as_ref().unwrap().residuals;
            for pair in r.windows(2) {
                assert!(pair[1] <= pair[0] + cfg.convergence_tol_m, "seed {seed} cycle {}: {r:?}", d.cycle);
            }
        }
    }
}

#[test]
fn cycle_estimate_ignores_storage_order_of_prior_targets() {
    let hp = HyperParams::default();
    let cfg = EmConfig::for_hyper(&hp);
    let log = run_mission(&VehicleConfig::default(), &random_gyre(3), 3).unwrap();
    let first = process_mission(
        &driftgp::MissionLog::from_cycles(log.cycles[..2].to_vec()),
        &hp,
        KernelKind::Incompressible,
        &cfg,
    )
    .unwrap();
    let mut p = first.model.positions().to_vec();
    let mut w = first.model.currents().to_vec();
    p.reverse();
    w.reverse();
    let reversed = GpModel::with_data(hp, KernelKind::Incompressible, cfg.target_noise_var, p, w).unwrap();
    let a = run_em_cycle(&first.model, &log.cycles[2], &cfg).unwrap();
    let b = run_em_cycle(&reversed, &log.cycles[2], &cfg).unwrap();
    assert_eq!(a.iteration, b.iteration);
    for (x, y) in a.currents.iter().zip(&b.currents) {
        assert!((*x - *y).norm() < 1e-9);
    }
}
