//! Galerkin time stepping of the regularized density, momentum and
//! temperature system on the torus.

mod refine;
mod step;

use std::fmt;
use std::sync::Arc;

pub use refine::{refine_study, LadderParam, RefineLevel, RefineReport};
pub use step::{RunOutput, Solver};

use crate::constitutive::{DataBounds, HeatFluxModel, HypothesisVerdict, StressModel};
use crate::discretization::TorusGrid;
use crate::error::{invalid, Result};

pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(&[f64]) -> [f64; 3] + Send + Sync>;
pub type TimeVectorFn = Arc<dyn Fn(f64, &[f64]) -> [f64; 3] + Send + Sync>;

/// Body force `f(t, x)`.
#[derive(Clone, Default)]
pub enum Forcing {
    #[default]
    None,
    /// Time-independent; tabulated once per run.
    Steady(VectorFn),
    Unsteady(TimeVectorFn),
}

impl fmt::Debug for Forcing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Forcing::None => "None",
            Forcing::Steady(_) => "Steady",
            Forcing::Unsteady(_) => "Unsteady",
        })
    }
}

impl Forcing {
    pub fn is_none(&self) -> bool {
        matches!(self, Forcing::None)
    }
}

/// Initial density, velocity and temperature as functions of `x`, with the
/// declared bounds they must respect.
#[derive(Clone)]
pub struct InitialData {
    pub rho0: ScalarFn,
    pub rho_low: f64,
    pub rho_high: f64,
    pub u0: VectorFn,
    pub theta0: ScalarFn,
    pub theta_low: f64,
    pub forcing: Forcing,
}

impl fmt::Debug for InitialData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("InitialData")
            .field("rho_low", &self.rho_low)
            .field("rho_high", &self.rho_high)
            .field("theta_low", &self.theta_low)
            .field("forcing", &self.forcing)
            .finish()
    }
}

impl InitialData {
    /// Constant density and temperature at rest, no forcing.
    pub fn rest(rho: f64, theta: f64) -> Self {
        Self {
            rho0: Arc::new(move |_| rho),
            rho_low: rho,
            rho_high: rho,
            u0: Arc::new(|_| [0.0; 3]),
            theta0: Arc::new(move |_| theta),
            theta_low: theta,
            forcing: Forcing::None,
        }
    }

    /// Extremes of the sampled data against the declared bounds.
    pub fn bounds(&self, grid: &TorusGrid) -> DataBounds {
        let rho = grid.sample(|x| (self.rho0)(x));
        let theta = grid.sample(|x| (self.theta0)(x));
        DataBounds {
            rho_low: self.rho_low,
            rho_high: self.rho_high,
            rho0_min: rho.iter().copied().fold(f64::INFINITY, f64::min),
            rho0_max: rho.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            theta_low: self.theta_low,
            theta0_min: theta.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }
}

/// Time integrator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    /// Density, momentum and temperature advanced together by one
    /// integrating-factor Heun step (second order).
    #[default]
    CoupledHeun,
    /// Sequential density, momentum, temperature sub-steps, each Heun with
    /// the other fields frozen (first order overall).
    LieSplit,
}

impl Scheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::CoupledHeun => "coupled-heun",
            Scheme::LieSplit => "lie-split",
        }
    }
}

/// Tolerances for run-time pass/fail verdicts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub mass: f64,
    /// Allowed density overshoot as a fraction of `rho_high - rho_low`.
    pub density_rel: f64,
    /// Allowed temperature undershoot as a fraction of `theta_low`.
    pub theta_rel: f64,
    pub luxemburg: f64,
    pub dissipation: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { mass: 1e-10, density_rel: 0.01, theta_rel: 0.01, luxemburg: 1e-6, dissipation: 1e-10 }
    }
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub dim: usize,
    pub n_grid: usize,
    pub oversample: usize,
    pub n_velocity: usize,
    pub n_temperature: usize,
    pub t_final: f64,
    pub dt: f64,
    pub epsilon: f64,
    pub scheme: Scheme,
    pub cfl_limit: f64,
    pub stress: StressModel,
    pub heat: HeatFluxModel,
    pub initial: InitialData,
    /// Steps between diagnostics records.
    pub cadence: usize,
    /// Records in the trailing Luxemburg-norm window.
    pub window: usize,
    /// Exponent of the weighted temperature-gradient diagnostic.
    pub lambda: f64,
    pub tolerances: Tolerances,
    pub seed: u64,
    pub verdict: Option<HypothesisVerdict>,
}

/// `1e-3 (2 pi / N)^2`.
pub fn default_epsilon(n_grid: usize) -> f64 {
    1e-3 * (std::f64::consts::TAU / n_grid as f64).powi(2)
}

impl SimConfig {
    /// 2-D, `N = 32`, 16 + 16 modes, `T = 1`, `dt = 1e-3`, default epsilon.
    pub fn new(stress: StressModel, heat: HeatFluxModel, initial: InitialData) -> Self {
        Self {
            dim: stress.dim(),
            n_grid: 32,
            oversample: 2,
            n_velocity: 16,
            n_temperature: 16,
            t_final: 1.0,
            dt: 1e-3,
            epsilon: default_epsilon(32),
            scheme: Scheme::CoupledHeun,
            cfl_limit: 0.5,
            stress,
            heat,
            initial,
            cadence: 1,
            window: 3,
            lambda: 0.5,
            tolerances: Tolerances::default(),
            seed: 0,
            verdict: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid(format!("time.dt must be positive, got {}", self.dt)));
        }
        if !(self.t_final >= self.dt * (1.0 - 1e-12)) {
            return Err(invalid(format!("time.T = {} must be at least dt = {}", self.t_final, self.dt)));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(invalid("epsilon must be nonnegative"));
        }
        if self.stress.dim() != self.dim {
            return Err(invalid("stress model dimension does not match the domain"));
        }
        if self.cadence == 0 || self.window == 0 {
            return Err(invalid("cadence and window must be positive"));
        }
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(invalid("lambda must lie in (0, 1)"));
        }
        if !(self.cfl_limit > 0.0) {
            return Err(invalid("CFL limit must be positive"));
        }
        let d = &self.initial;
        if !(d.rho_low > 0.0 && d.rho_high >= d.rho_low && d.theta_low > 0.0) {
            return Err(invalid("declared bounds need 0 < rho_low <= rho_high and theta_low > 0"));
        }
        Ok(())
    }

    /// Number of steps and the size of the (possibly shorter) last one.
    pub fn step_plan(&self) -> (usize, f64) {
        let ratio = self.t_final / self.dt;
        let n = (ratio - 1e-9).ceil().max(1.0) as usize;
        let last = self.t_final - (n - 1) as f64 * self.dt;
        (n, last)
    }
}

/// Time, density samples on the base grid and Galerkin coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub rho: Vec<f64>,
    pub alpha: Vec<f64>,
    pub nu: Vec<f64>,
}

impl SimState {
    pub fn is_finite(&self) -> bool {
        self.t.is_finite()
            && self.rho.iter().all(|v| v.is_finite())
            && self.alpha.iter().all(|v| v.is_finite())
            && self.nu.iter().all(|v| v.is_finite())
    }
}
