use std::sync::Arc;

use nnflow_core::constitutive::{HeatFluxModel, StressModel, Viscosity};
use nnflow_core::diagnostics::{bounds_report, energy_report, energy_window_residual, thermal_report};
use nnflow_core::nfunction::ConjugateParams;
use nnflow_core::solver::{refine_study, Forcing, InitialData, LadderParam, SimConfig, Solver};

fn forced(stress: StressModel) -> SimConfig {
    let init = InitialData {
        rho0: Arc::new(|x| 1.0 + 0.2 * x[0].sin() * x[1].sin()),
        rho_low: 0.8,
        rho_high: 1.2,
        u0: Arc::new(|x| [x[1].sin(), x[0].sin(), 0.0]),
        theta0: Arc::new(|x| 1.25 - 0.25 * x[0].cos()),
        theta_low: 1.0,
        forcing: Forcing::Steady(Arc::new(|x| [x[1].sin(), 0.0, 0.0])),
    };
    let mut cfg = SimConfig::new(stress, HeatFluxModel::fourier(1.0), init);
    cfg.n_grid = 16;
    cfg.n_velocity = 8;
    cfg.n_temperature = 8;
    cfg.t_final = 0.05;
    cfg
}

fn power() -> StressModel {
    StressModel::power_law(2, 2.2, Viscosity::constant(1.0)).unwrap()
}

#[test]
fn energy_residual_is_second_order_in_dt() {
    let res = |dt: f64| {
        let mut cfg = forced(power());
        cfg.dt = dt;
        let traj = Solver::new(cfg).unwrap().run().unwrap().trajectory;
        energy_report(&traj).unwrap().residual
    };
    let (coarse, fine) = (res(2e-3), res(1e-3));
    assert!(coarse / fine > 3.5, "{coarse} / {fine}");
}

#[test]
fn mass_thermal_sign_and_dashboard_monotonicity() {
    for stress in [power(), StressModel::carreau(2, 2.5, Viscosity::constant(0.5)).unwrap()] {
        let traj = Solver::new(forced(stress)).unwrap().run().unwrap().trajectory;
        let b = bounds_report(&traj);
        assert!(b.mass_drift < 1e-10 && b.mass_pass);
        let th = thermal_report(&traj, 0.5).unwrap();
        assert!(th.thermal_mass_increment >= -1e-10);
        assert!(th.balance_residual < 1e-6);
        assert!(energy_report(&traj).unwrap().dissipation_pass);
        for w in traj.records.windows(2) {
            assert!(w[1].dashboard >= w[0].dashboard);
            assert!(w[1].cumulative_dissipation >= w[0].cumulative_dissipation);
        }
        let last = traj.records.len() - 1;
        let window = energy_window_residual(&traj, last / 2, last).unwrap();
        assert!(window <= energy_report(&traj).unwrap().residual + 1e-15);
    }
}

#[test]
fn fenchel_young_holds_on_trajectory_samples() {
    let cfg = forced(StressModel::carreau(2, 2.5, Viscosity::constant(1.0)).unwrap());
    let stress = cfg.stress.clone();
    let solver = Solver::new(cfg).unwrap();
    let state = solver.initial_state().unwrap();
    let basis = solver.basis();
    let q = basis.velocity_on_quad(&state.alpha).unwrap();
    let nf = stress.nfunction();
    let c_c = stress.coercivity_const();
    let params = ConjugateParams::default();
    let grid = basis.quad_grid();
    for p in (0..grid.len()).step_by(37) {
        let full: Vec<f64> = (0..4).map(|ij| q.grad[ij][p]).collect();
        let k = nnflow_core::tensor::SymMat::sym_part(2, &full);
        let x = grid.point(p);
        let s = stress.stress(&x, 1.0, 1.0, &k).unwrap();
        let sk = s.ddot(&k);
        let m = nf.value(&x, &k) + nf.conjugate(&x, &s, &params).unwrap();
        // S:K >= c_c (M + M*) and the Fenchel-Young lower bound M + M* >= S:K
        assert!(sk >= c_c * m - 1e-10 * (1.0 + m));
        assert!(m >= sk - 1e-10 * (1.0 + sk));
    }
}

#[test]
fn identical_runs_write_identical_csv() {
    let write = || {
        let traj = Solver::new(forced(power())).unwrap().run().unwrap().trajectory;
        traj.write_csv(Vec::new()).unwrap()
    };
    assert_eq!(write(), write());
}

#[test]
fn dt_ladder_observes_second_order() {
    let mut cfg = forced(power());
    cfg.t_final = 0.1;
    let report = refine_study(&cfg, LadderParam::Dt, &[1e-2, 5e-3, 2.5e-3]).unwrap();
    assert!(report.all_succeeded());
    let orders = report.observed_orders();
    assert_eq!(orders.len(), 1);
    assert!((orders[0] - 2.0).abs() < 0.3, "{orders:?}");
    let csv = String::from_utf8(report.write_csv(Vec::new()).unwrap()).unwrap();
    assert!(csv.lines().nth(1).unwrap().ends_with("observed_order"));
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn refinement_failure_is_marked_not_fatal() {
    let mut cfg = forced(power());
    cfg.cfl_limit = 0.05;
    let report = refine_study(&cfg, LadderParam::Dt, &[5e-2, 1e-3]).unwrap();
    assert!(report.levels[0].failure.is_some());
    assert!(report.levels[1].failure.is_none());
}
