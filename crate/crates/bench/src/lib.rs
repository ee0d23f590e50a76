//! Benchmark fixtures shared by the criterion targets.

use std::sync::Arc;

use nnflow_core::constitutive::{HeatFluxModel, StressModel, Viscosity};
use nnflow_core::solver::{Forcing, InitialData, SimConfig};

/// Forced 2-D power-law flow with variable density and temperature.
pub fn smoke_config(n_grid: usize, stress: StressModel) -> SimConfig {
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
    cfg.n_grid = n_grid;
    cfg
}

pub fn power_law(p: f64) -> StressModel {
    StressModel::power_law(2, p, Viscosity::constant(1.0)).expect("valid exponent")
}
