use std::borrow::Cow;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use super::{Forcing, InitialData, Scheme, SimConfig, SimState};
use crate::diagnostics::{DiagnosticsRecord, Recorder, Trajectory};
use crate::discretization::{GalerkinBasis, QuadScalar, QuadVelocity, TorusGrid};
use crate::error::{invalid, Error, Result};
use crate::tensor::SymMat;

/// Everything a right-hand side needs, evaluated on the quadrature grid.
pub(crate) struct Fields {
    pub rho: Vec<f64>,
    pub grad_rho: Vec<Vec<f64>>,
    pub vel: QuadVelocity,
    pub temp: QuadScalar,
    pub theta_clip: Vec<f64>,
    pub strain: Vec<SymMat>,
    pub stress: Vec<SymMat>,
}

/// A validated configuration with its grid, basis and cached tables.
#[derive(Debug)]
pub struct Solver {
    cfg: SimConfig,
    basis: Arc<GalerkinBasis>,
    quad_points: Vec<[f64; 3]>,
    steady_force: Option<Vec<Vec<f64>>>,
    ksq: Vec<f64>,
}

/// Final state and full diagnostics of a run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub final_state: SimState,
    pub trajectory: Trajectory,
    pub steps: usize,
}

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

impl Solver {
    pub fn new(cfg: SimConfig) -> Result<Self> {
        cfg.validate()?;
        let grid = TorusGrid::new(cfg.dim, cfg.n_grid)?;
        let basis = GalerkinBasis::new(&grid, cfg.n_velocity, cfg.n_temperature, cfg.oversample)?;
        let quad_points = basis.quad_grid().points();
        let d = cfg.dim;
        let steady_force = match &cfg.initial.forcing {
            Forcing::Steady(f) => {
                let mut out = vec![vec![0.0; quad_points.len()]; d];
                for (p, x) in quad_points.iter().enumerate() {
                    let v = f(&x[..d]);
                    for (c, o) in out.iter_mut().enumerate() {
                        o[p] = v[c];
                    }
                }
                Some(out)
            }
            _ => None,
        };
        let ksq = grid.wavenumber_sq();
        if cfg.epsilon == 0.0 {
            log::warn!("epsilon = 0: density bounds rely on spectral accuracy alone");
        }
        Ok(Self { cfg, basis: Arc::new(basis), quad_points, steady_force, ksq })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn basis(&self) -> &Arc<GalerkinBasis> {
        &self.basis
    }

    pub fn grid(&self) -> &TorusGrid {
        self.basis.grid()
    }

    pub(crate) fn quad_points(&self) -> &[[f64; 3]] {
        &self.quad_points
    }

    /// Density spectrum with the Nyquist modes removed.
    pub(crate) fn spectrum(&self, rho: &[f64]) -> Vec<Complex64> {
        let g = self.grid();
        let mut s = g.forward(rho);
        for (idx, v) in s.iter_mut().enumerate() {
            if g.wavevector(idx).1 {
                *v = zero();
            }
        }
        s
    }

    /// `rho_0` (Nyquist-filtered), `alpha = P u_0`, `nu = P theta_0`.
    pub fn initial_state(&self) -> Result<SimState> {
        let g = self.grid();
        let d = self.cfg.dim;
        let data: &InitialData = &self.cfg.initial;
        let rho = g.inverse(&self.spectrum(&g.sample(|x| (data.rho0)(x))));
        let u0: Vec<Vec<f64>> = (0..d)
            .map(|c| g.sample(|x| (data.u0)(x)[c]))
            .collect();
        let div = g.divergence(&u0)?;
        let umax = u0.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        let dmax = div.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if dmax > 1e-8 * (1.0 + umax) {
            return Err(invalid(format!("initial velocity is not divergence-free (max |div u0| = {dmax:.3e})")));
        }
        let theta0 = g.sample(|x| (data.theta0)(x));
        if rho.iter().chain(&theta0).chain(u0.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(invalid("initial data has non-finite samples"));
        }
        Ok(SimState {
            t: 0.0,
            rho,
            alpha: self.basis.project_velocity(&u0)?,
            nu: self.basis.project_temperature(&theta0)?,
        })
    }

    pub(crate) fn forcing_at(&self, t: f64) -> Option<Cow<'_, Vec<Vec<f64>>>> {
        match &self.cfg.initial.forcing {
            Forcing::None => None,
            Forcing::Steady(_) => self.steady_force.as_ref().map(Cow::Borrowed),
            Forcing::Unsteady(f) => {
                let d = self.cfg.dim;
                let vals: Vec<[f64; 3]> = self.quad_points.par_iter().map(|x| f(t, &x[..d])).collect();
                Some(Cow::Owned((0..d).map(|c| vals.iter().map(|v| v[c]).collect()).collect()))
            }
        }
    }

    /// Density and its gradient on the quadrature grid.
    fn rho_on_quad(&self, rho_hat: &[Complex64]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let (g, q) = (self.grid(), self.basis.quad_grid());
        let rho = q.inverse(&g.pad_spectrum(rho_hat, q));
        let grad = (0..self.cfg.dim)
            .map(|a| q.inverse(&g.pad_spectrum(&g.derivative_spectrum(rho_hat, a), q)))
            .collect();
        (rho, grad)
    }

    pub(crate) fn fields(&self, rho_hat: &[Complex64], alpha: &[f64], nu: &[f64]) -> Result<Fields> {
        let (rho, grad_rho) = self.rho_on_quad(rho_hat);
        let vel = self.basis.velocity_on_quad(alpha)?;
        let temp = self.basis.temperature_on_quad(nu)?;
        let theta_low = self.cfg.initial.theta_low;
        let theta_clip: Vec<f64> = temp.value.iter().map(|v| v.max(theta_low)).collect();
        let d = self.cfg.dim;
        let strain: Vec<SymMat> = (0..rho.len())
            .map(|p| {
                let mut full = [0.0; 9];
                for (k, g) in vel.grad.iter().enumerate() {
                    full[k] = g[p];
                }
                SymMat::sym_part(d, &full[..d * d])
            })
            .collect();
        let model = &self.cfg.stress;
        let stress: Vec<SymMat> = (0..rho.len())
            .into_par_iter()
            .map(|p| {
                let r = rho[p].max(f64::MIN_POSITIVE);
                model.stress_unchecked(&self.quad_points[p][..d], r, theta_clip[p], &strain[p])
            })
            .collect();
        Ok(Fields { rho, grad_rho, vel, temp, theta_clip, strain, stress })
    }

    /// `-div(rho u)` computed on the quadrature grid and truncated to the
    /// resolved base-grid modes.
    fn density_rate(&self, rho_q: &[f64], vel: &QuadVelocity) -> Vec<Complex64> {
        let (g, q) = (self.grid(), self.basis.quad_grid());
        let mut div = vec![zero(); q.len()];
        for (a, ua) in vel.u.iter().enumerate() {
            let flux: Vec<f64> = rho_q.iter().zip(ua).map(|(r, u)| r * u).collect();
            let d = q.derivative_spectrum(&q.forward(&flux), a);
            div.iter_mut().zip(d).for_each(|(x, y)| *x -= y);
        }
        g.truncate_spectrum(&div, q)
    }

    fn solve(&self, g: DMatrix<f64>, r: Vec<f64>, t: f64, which: &'static str) -> Result<Vec<f64>> {
        let chol = g.cholesky().ok_or(Error::NotPositiveDefinite { t, which })?;
        Ok(chol.solve(&DVector::from_vec(r)).data.into())
    }

    /// `G(rho) alpha' = R` with `R_i = (-rho (u.grad)u + eps (grad rho . grad)u
    /// + rho f, omega_i) - (S, D omega_i)`.
    fn momentum_rate(&self, t: f64, f: &Fields) -> Result<Vec<f64>> {
        let d = self.cfg.dim;
        let eps = self.cfg.epsilon;
        let force = self.forcing_at(t);
        let pc = f.rho.len();
        let mut vector = vec![vec![0.0; pc]; d];
        for (k, vk) in vector.iter_mut().enumerate() {
            for p in 0..pc {
                let mut adv = 0.0;
                let mut diff = 0.0;
                for j in 0..d {
                    let g = f.vel.grad[k * d + j][p];
                    adv += f.vel.u[j][p] * g;
                    diff += f.grad_rho[j][p] * g;
                }
                let mut v = -f.rho[p] * adv + eps * diff;
                if let Some(force) = &force {
                    v += f.rho[p] * force[k][p];
                }
                vk[p] = v;
            }
        }
        let tensor: Vec<Vec<f64>> =
            (0..d * d).map(|ij| f.stress.iter().map(|s| -s.get(ij / d, ij % d)).collect()).collect();
        let r = self.basis.velocity_load(&vector, &tensor);
        let g = self.basis.velocity_mass(&f.rho);
        self.solve(g, r, t, "velocity")
    }

    /// `(rho w_i, w_j) nu' = R_T` with `R_T,i = (-rho u.grad theta
    /// + eps grad rho . grad theta + S:Du, w_i) - (kappa0 grad theta, grad w_i)`.
    fn temperature_rate(&self, t: f64, f: &Fields) -> Result<Vec<f64>> {
        let d = self.cfg.dim;
        let eps = self.cfg.epsilon;
        let heat = &self.cfg.heat;
        let pc = f.rho.len();
        let scalar: Vec<f64> = (0..pc)
            .map(|p| {
                let mut adv = 0.0;
                let mut diff = 0.0;
                for j in 0..d {
                    adv += f.vel.u[j][p] * f.temp.grad[j][p];
                    diff += f.grad_rho[j][p] * f.temp.grad[j][p];
                }
                -f.rho[p] * adv + eps * diff + f.stress[p].ddot(&f.strain[p])
            })
            .collect();
        let kappa: Vec<f64> =
            (0..pc).map(|p| heat.kappa0(f.rho[p].max(f64::MIN_POSITIVE), f.theta_clip[p])).collect();
        let vector: Vec<Vec<f64>> =
            f.temp.grad.iter().map(|g| g.iter().zip(&kappa).map(|(g, k)| -k * g).collect()).collect();
        let r = self.basis.temperature_load(&scalar, &vector);
        let h = self.basis.temperature_mass(&f.rho);
        self.solve(h, r, t, "temperature")
    }

    fn check_cfl(&self, t: f64, vel: &QuadVelocity, dt: f64) -> Result<()> {
        let pc = vel.u[0].len();
        let umax = (0..pc)
            .map(|p| vel.u.iter().map(|c| c[p] * c[p]).sum::<f64>())
            .fold(0.0f64, f64::max)
            .sqrt();
        let cfl = umax * dt / self.grid().spacing();
        if cfl > self.cfg.cfl_limit {
            return Err(Error::StepRejected { t, cfl, limit: self.cfg.cfl_limit });
        }
        Ok(())
    }

    fn decay(&self, dt: f64, eps: f64) -> Vec<f64> {
        self.ksq.iter().map(|k2| (-eps * k2 * dt).exp()).collect()
    }

    /// One step of the configured scheme.
    pub fn step(&self, state: &SimState, dt: f64) -> Result<SimState> {
        match self.cfg.scheme {
            Scheme::CoupledHeun => self.step_coupled(state, dt),
            Scheme::LieSplit => {
                let rho = self.step_density(state, dt, self.cfg.epsilon)?;
                let s1 = SimState { rho, ..state.clone() };
                let alpha = self.step_momentum(&s1, dt)?;
                let s2 = SimState { alpha, ..s1 };
                let nu = self.step_temperature(&s2, dt)?;
                Ok(SimState { t: state.t + dt, nu, ..s2 })
            }
        }
    }

    /// Integrating-factor Heun step of the full system: diffusion of the
    /// density exactly, everything else by the explicit trapezoid predictor
    /// and corrector.
    pub fn step_coupled(&self, state: &SimState, dt: f64) -> Result<SimState> {
        let t = state.t;
        let rho_hat = self.spectrum(&state.rho);
        let f1 = self.fields(&rho_hat, &state.alpha, &state.nu)?;
        self.check_cfl(t, &f1.vel, dt)?;
        let n1 = self.density_rate(&f1.rho, &f1.vel);
        let a1 = self.momentum_rate(t, &f1)?;
        let b1 = self.temperature_rate(t, &f1)?;
        drop(f1);

        let e = self.decay(dt, self.cfg.epsilon);
        let rho_star: Vec<Complex64> =
            rho_hat.iter().zip(&n1).zip(&e).map(|((r, n), e)| (r + n * dt) * e).collect();
        let alpha_star: Vec<f64> = state.alpha.iter().zip(&a1).map(|(a, r)| a + dt * r).collect();
        let nu_star: Vec<f64> = state.nu.iter().zip(&b1).map(|(a, r)| a + dt * r).collect();

        let f2 = self.fields(&rho_star, &alpha_star, &nu_star)?;
        let n2 = self.density_rate(&f2.rho, &f2.vel);
        let a2 = self.momentum_rate(t + dt, &f2)?;
        let b2 = self.temperature_rate(t + dt, &f2)?;

        let rho_new: Vec<Complex64> = (0..rho_hat.len())
            .map(|i| rho_hat[i] * e[i] + (n1[i] * e[i] + n2[i]) * (0.5 * dt))
            .collect();
        let alpha = (0..a1.len()).map(|i| state.alpha[i] + 0.5 * dt * (a1[i] + a2[i])).collect();
        let nu = (0..b1.len()).map(|i| state.nu[i] + 0.5 * dt * (b1[i] + b2[i])).collect();
        Ok(SimState { t: t + dt, rho: self.grid().inverse(&rho_new), alpha, nu })
    }

    /// Advances `rho_t + div(rho u) = eps lap rho` with `u` frozen at the
    /// state's velocity; returns the new density samples.
    pub fn step_density(&self, state: &SimState, dt: f64, eps: f64) -> Result<Vec<f64>> {
        if !(eps >= 0.0) {
            return Err(invalid("epsilon must be nonnegative"));
        }
        let vel = self.basis.velocity_on_quad(&state.alpha)?;
        self.check_cfl(state.t, &vel, dt)?;
        let rho_hat = self.spectrum(&state.rho);
        let e = self.decay(dt, eps);
        let (rq, _) = self.rho_on_quad(&rho_hat);
        let n1 = self.density_rate(&rq, &vel);
        let star: Vec<Complex64> = rho_hat.iter().zip(&n1).zip(&e).map(|((r, n), e)| (r + n * dt) * e).collect();
        let (rq2, _) = self.rho_on_quad(&star);
        let n2 = self.density_rate(&rq2, &vel);
        let new: Vec<Complex64> =
            (0..rho_hat.len()).map(|i| rho_hat[i] * e[i] + (n1[i] * e[i] + n2[i]) * (0.5 * dt)).collect();
        Ok(self.grid().inverse(&new))
    }

    /// Heun step of the velocity coefficients with density and temperature frozen.
    pub fn step_momentum(&self, state: &SimState, dt: f64) -> Result<Vec<f64>> {
        let rho_hat = self.spectrum(&state.rho);
        let f1 = self.fields(&rho_hat, &state.alpha, &state.nu)?;
        self.check_cfl(state.t, &f1.vel, dt)?;
        let a1 = self.momentum_rate(state.t, &f1)?;
        let star: Vec<f64> = state.alpha.iter().zip(&a1).map(|(a, r)| a + dt * r).collect();
        let f2 = self.fields(&rho_hat, &star, &state.nu)?;
        let a2 = self.momentum_rate(state.t + dt, &f2)?;
        Ok((0..a1.len()).map(|i| state.alpha[i] + 0.5 * dt * (a1[i] + a2[i])).collect())
    }

    /// Heun step of the temperature coefficients with density and velocity frozen.
    pub fn step_temperature(&self, state: &SimState, dt: f64) -> Result<Vec<f64>> {
        let rho_hat = self.spectrum(&state.rho);
        let f1 = self.fields(&rho_hat, &state.alpha, &state.nu)?;
        let b1 = self.temperature_rate(state.t, &f1)?;
        let star: Vec<f64> = state.nu.iter().zip(&b1).map(|(a, r)| a + dt * r).collect();
        let f2 = self.fields(&rho_hat, &state.alpha, &star)?;
        let b2 = self.temperature_rate(state.t + dt, &f2)?;
        Ok((0..b1.len()).map(|i| state.nu[i] + 0.5 * dt * (b1[i] + b2[i])).collect())
    }

    pub fn run(&self) -> Result<RunOutput> {
        self.run_with(|_| {})
    }

    /// Runs to `T`, calling `observer` on every diagnostics record as it is
    /// produced.
    pub fn run_with(&self, mut observer: impl FnMut(&DiagnosticsRecord)) -> Result<RunOutput> {
        let mut state = self.initial_state()?;
        let mut recorder = Recorder::new(self);
        observer(recorder.record(self, &state)?);
        let (n, last) = self.cfg.step_plan();
        for k in 0..n {
            let h = if k + 1 == n { last } else { self.cfg.dt };
            let mut next = self.step(&state, h)?;
            next.t = if k + 1 == n { self.cfg.t_final } else { (k + 1) as f64 * self.cfg.dt };
            if !next.is_finite() {
                return Err(Error::AbortedRun {
                    t: next.t,
                    reason: "non-finite state".to_string(),
                    last_good: Box::new(state),
                });
            }
            state = next;
            if (k + 1) % self.cfg.cadence == 0 || k + 1 == n {
                observer(recorder.record(self, &state)?);
            }
        }
        Ok(RunOutput { trajectory: recorder.finish(self), final_state: state, steps: n })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitutive::{HeatFluxModel, StressModel, Viscosity};
    use crate::solver::{InitialData, SimConfig};

    fn stokes_config() -> SimConfig {
        let stress = StressModel::power_law(2, 2.0, Viscosity::constant(1.0)).unwrap();
        let mut cfg = SimConfig::new(stress, HeatFluxModel::fourier(1.0), InitialData::rest(1.0, 1.0));
        cfg.n_grid = 16;
        cfg.n_velocity = 4;
        cfg.n_temperature = 5;
        cfg
    }

    #[test]
    fn rest_state_is_stationary() {
        let s = Solver::new(stokes_config()).unwrap();
        let st = s.initial_state().unwrap();
        let next = s.step(&st, 1e-3).unwrap();
        assert!(next.alpha.iter().all(|a| *a == 0.0));
        assert!(next.rho.iter().all(|r| (r - 1.0).abs() < 1e-12));
        assert!((next.nu[0] - st.nu[0]).abs() < 1e-12);
        assert!(next.nu[1..].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn pure_diffusion_is_exact() {
        let mut cfg = stokes_config();
        cfg.epsilon = 0.05;
        cfg.initial.rho0 = Arc::new(|x| 1.0 + 0.3 * (2.0 * x[0] + x[1]).cos());
        cfg.initial.rho_low = 0.5;
        cfg.initial.rho_high = 1.5;
        let s = Solver::new(cfg).unwrap();
        let st = s.initial_state().unwrap();
        let rho = s.step_density(&st, 0.1, 0.05).unwrap();
        let factor = (-0.05f64 * 5.0 * 0.1).exp();
        for (p, r) in rho.iter().enumerate() {
            let x = s.grid().point(p);
            let exact = 1.0 + 0.3 * factor * (2.0 * x[0] + x[1]).cos();
            assert!((r - exact).abs() < 1e-13);
        }
    }

    #[test]
    fn single_mode_stokes_decay_rate() {
        // S = Du, rho = 1: (Du, D omega) = |k|^2 / 2 for a unit mode
        let mut cfg = stokes_config();
        cfg.n_velocity = 1;
        let c = (2.0f64 / std::f64::consts::TAU.powi(2)).sqrt();
        cfg.initial.u0 = Arc::new(move |x| [-c * x[1].cos(), 0.0, 0.0]);
        let s = Solver::new(cfg).unwrap();
        let mut st = s.initial_state().unwrap();
        assert!((st.alpha[0] - 1.0).abs() < 1e-12);
        let dt = 1e-3;
        for _ in 0..100 {
            st = s.step(&st, dt).unwrap();
        }
        let rate = -(st.alpha[0].ln()) / (100.0 * dt);
        assert!((rate - 0.5).abs() < 5e-4 * 0.5, "rate {rate}");
    }

    #[test]
    fn cfl_guard_rejects() {
        let mut cfg = stokes_config();
        cfg.initial.u0 = Arc::new(|x| [50.0 * x[1].sin(), 0.0, 0.0]);
        let s = Solver::new(cfg).unwrap();
        let st = s.initial_state().unwrap();
        assert!(matches!(s.step(&st, 0.1), Err(Error::StepRejected { .. })));
    }

    #[test]
    fn rejects_divergent_initial_velocity() {
        let mut cfg = stokes_config();
        cfg.initial.u0 = Arc::new(|x| [x[0].sin(), 0.0, 0.0]);
        let s = Solver::new(cfg).unwrap();
        assert!(s.initial_state().is_err());
    }

    #[test]
    fn constant_density_is_transported_invariantly() {
        let mut cfg = stokes_config();
        cfg.initial.u0 = Arc::new(|x| [x[1].sin(), 0.0, 0.0]);
        let s = Solver::new(cfg).unwrap();
        let mut st = s.initial_state().unwrap();
        for _ in 0..10 {
            st = s.step(&st, 1e-2).unwrap();
        }
        assert!(st.rho.iter().all(|r| (r - 1.0).abs() < 1e-12));
    }

    #[test]
    fn heun_is_second_order() {
        let mut cfg = stokes_config();
        cfg.stress = StressModel::power_law(2, 2.5, Viscosity::constant(1.0)).unwrap();
        cfg.initial.u0 = Arc::new(|x| [x[1].sin() + 0.3 * (x[1] + x[0]).cos(), -0.3 * (x[1] + x[0]).cos(), 0.0]);
        cfg.initial.rho0 = Arc::new(|x| 1.0 + 0.2 * x[0].cos());
        cfg.initial.rho_low = 0.7;
        cfg.initial.rho_high = 1.3;
        cfg.epsilon = 1e-2;
        let s = Solver::new(cfg).unwrap();
        let st = s.initial_state().unwrap();
        let reference = |dt: f64| {
            let mut r = st.clone();
            for _ in 0..10 {
                r = s.step(&r, dt / 10.0).unwrap();
            }
            r
        };
        let defect = |dt: f64| {
            let one = s.step(&st, dt).unwrap();
            let r = reference(dt);
            one.alpha.iter().zip(&r.alpha).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
        };
        let (e1, e2) = (defect(0.02), defect(0.01));
        assert!(e1 / e2 >= 3.5, "defect ratio {}", e1 / e2);
    }
}
