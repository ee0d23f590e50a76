//! Run-time energy, thermal, bound and regularity diagnostics.

mod reports;

use std::collections::VecDeque;
use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;

pub use reports::{
    bounds_report, energy_report, energy_window_residual, nikolskii_seminorm, thermal_report, BoundsReport,
    BoundsRow, EnergyReport, ThermalReport,
};

use crate::discretization::GalerkinBasis;
use crate::error::Result;
use crate::io::CsvWriter;
use crate::nfunction::{ConjugateParams, NFunction};
use crate::orlicz::{luxemburg_norm, trapezoid_weights, SampledField};
use crate::solver::{SimState, Solver, Tolerances};
use crate::tensor::SymMat;

/// Instantaneous and cumulative quantities at one output time.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    /// `1/2 int rho |u|^2`.
    pub kinetic_energy: f64,
    /// `int S : Du`.
    pub dissipation: f64,
    /// `int rho f . u`.
    pub work: f64,
    /// `int M(x, Du)`.
    pub modular_strain: f64,
    /// `int M*(x, S)`.
    pub modular_stress: f64,
    pub mass: f64,
    pub rho_min: f64,
    pub rho_max: f64,
    pub theta_min: f64,
    /// `int rho theta`.
    pub thermal_mass: f64,
    /// `int theta`.
    pub theta_integral: f64,
    /// `||u||_L2`.
    pub velocity_l2: f64,
    /// `||Du||_p^p`.
    pub strain_lp: f64,
    /// `||grad u||_p^p`.
    pub grad_lp: f64,
    /// `||grad(theta^((beta - lambda + 1)/2))||_2^2` with clipped theta.
    pub theta_weighted_grad: f64,
    /// `||theta||_s^s` for `s` just below `5/3 + beta`.
    pub theta_s_norm: f64,
    /// Luxemburg norms over the trailing window of records.
    pub luxemburg_strain: f64,
    pub luxemburg_stress: f64,
    /// `int_0^t` of the dissipation and work (trapezoid over records).
    pub cumulative_dissipation: f64,
    pub cumulative_work: f64,
    /// `|E(t) - E(0) + int D - int W|`.
    pub energy_residual: f64,
    /// `|int rho theta (t) - int rho theta (0) - int D|`.
    pub thermal_residual: f64,
    /// `sup_s E(s) + int_0^t (c_c/2 M + c_c M*)`.
    pub dashboard: f64,
}

/// Galerkin coefficients at a record time.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub alpha: Vec<f64>,
    pub nu: Vec<f64>,
}

/// Records and coefficient snapshots of one run, with the constants the
/// reports need.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub records: Vec<DiagnosticsRecord>,
    pub snapshots: Vec<Snapshot>,
    pub basis: Arc<GalerkinBasis>,
    pub coercivity_const: f64,
    pub growth_exponent: f64,
    pub rho_low: f64,
    pub rho_high: f64,
    pub theta_low: f64,
    pub beta: f64,
    pub lambda: f64,
    /// Exponent used for `theta_s_norm`.
    pub theta_exponent: f64,
    pub tolerances: Tolerances,
}

pub const RECORD_COLUMNS: [&str; 24] = [
    "t",
    "kinetic_energy",
    "dissipation",
    "work",
    "modular_strain",
    "modular_stress",
    "mass",
    "rho_min",
    "rho_max",
    "theta_min",
    "thermal_mass",
    "theta_integral",
    "velocity_l2",
    "strain_lp",
    "grad_lp",
    "theta_weighted_grad",
    "theta_s_norm",
    "luxemburg_strain",
    "luxemburg_stress",
    "cumulative_dissipation",
    "cumulative_work",
    "energy_residual",
    "thermal_residual",
    "dashboard",
];

impl DiagnosticsRecord {
    pub fn values(&self) -> [f64; 24] {
        [
            self.t,
            self.kinetic_energy,
            self.dissipation,
            self.work,
            self.modular_strain,
            self.modular_stress,
            self.mass,
            self.rho_min,
            self.rho_max,
            self.theta_min,
            self.thermal_mass,
            self.theta_integral,
            self.velocity_l2,
            self.strain_lp,
            self.grad_lp,
            self.theta_weighted_grad,
            self.theta_s_norm,
            self.luxemburg_strain,
            self.luxemburg_stress,
            self.cumulative_dissipation,
            self.cumulative_work,
            self.energy_residual,
            self.thermal_residual,
            self.dashboard,
        ]
    }
}

impl Trajectory {
    /// CSV with one row per record and a footer row of column maxima
    /// (labelled `max`).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<W> {
        let mut cols = vec!["row"];
        cols.extend(RECORD_COLUMNS);
        let mut w = CsvWriter::new(out, "diagnostics records; footer row holds column maxima", &cols)?;
        for (i, r) in self.records.iter().enumerate() {
            w.row_with_labels(&[i.to_string()], &r.values())?;
        }
        let mut maxima = [f64::NEG_INFINITY; 24];
        for r in &self.records {
            for (m, v) in maxima.iter_mut().zip(r.values()) {
                *m = m.max(v);
            }
        }
        w.row_with_labels(&["max".to_string()], &maxima)?;
        Ok(w.finish()?)
    }

    pub fn final_record(&self) -> Option<&DiagnosticsRecord> {
        self.records.last()
    }
}

/// Exponent for the `||theta||_s^s` column: `5/3 + beta - 0.01`, at least 1.
pub fn theta_exponent(beta: f64) -> f64 {
    (5.0 / 3.0 + beta - 0.01).max(1.0)
}

struct WindowEntry {
    t: f64,
    strain: Vec<SymMat>,
    stress: Vec<SymMat>,
}

/// Builds records while a run progresses.
pub(crate) struct Recorder {
    conjugate: NFunction,
    window: VecDeque<WindowEntry>,
    records: Vec<DiagnosticsRecord>,
    snapshots: Vec<Snapshot>,
    energy0: f64,
    thermal0: f64,
    energy_sup: f64,
    prev: Option<(f64, f64, f64, f64)>,
    cum_d: f64,
    cum_w: f64,
    cum_g: f64,
}

impl Recorder {
    pub(crate) fn new(solver: &Solver) -> Self {
        let nf = solver.config().stress.nfunction();
        Self {
            conjugate: nf.conjugate_function(ConjugateParams::default()),
            window: VecDeque::new(),
            records: Vec::new(),
            snapshots: Vec::new(),
            energy0: 0.0,
            thermal0: 0.0,
            energy_sup: 0.0,
            prev: None,
            cum_d: 0.0,
            cum_w: 0.0,
            cum_g: 0.0,
        }
    }

    pub(crate) fn record(&mut self, solver: &Solver, state: &SimState) -> Result<&DiagnosticsRecord> {
        let cfg = solver.config();
        let basis = solver.basis();
        let d = cfg.dim;
        let rho_hat = solver.spectrum(&state.rho);
        let f = solver.fields(&rho_hat, &state.alpha, &state.nu)?;
        let wq = basis.quad_grid().weight();
        let pc = f.rho.len();
        let force = solver.forcing_at(state.t);
        let p = cfg.stress.growth_exponent().unwrap_or(2.0);
        let beta = cfg.heat.beta;
        let gamma = 0.5 * (beta - cfg.lambda + 1.0);
        let s_exp = theta_exponent(beta);

        let mut ke = 0.0;
        let mut diss = 0.0;
        let mut work = 0.0;
        let mut thermal = 0.0;
        let mut theta_int = 0.0;
        let mut strain_lp = 0.0;
        let mut grad_lp = 0.0;
        let mut wgrad = 0.0;
        let mut theta_s = 0.0;
        for q in 0..pc {
            let u2: f64 = f.vel.u.iter().map(|c| c[q] * c[q]).sum();
            ke += 0.5 * f.rho[q] * u2;
            diss += f.stress[q].ddot(&f.strain[q]);
            if let Some(force) = &force {
                work += f.rho[q] * (0..d).map(|c| force[c][q] * f.vel.u[c][q]).sum::<f64>();
            }
            let th = f.temp.value[q];
            thermal += f.rho[q] * th;
            theta_int += th;
            strain_lp += f.strain[q].norm().powf(p);
            grad_lp += f.vel.grad.iter().map(|g| g[q] * g[q]).sum::<f64>().sqrt().powf(p);
            let tc = f.theta_clip[q];
            let g2: f64 = f.temp.grad.iter().map(|g| g[q] * g[q]).sum();
            wgrad += (gamma * tc.powf(gamma - 1.0)).powi(2) * g2;
            theta_s += th.abs().powf(s_exp);
        }

        let base = basis.base_indices();
        let wb = basis.grid().weight();
        let nf = cfg.stress.nfunction();
        let points = solver.quad_points();
        let (m_strain, m_stress): (Vec<f64>, Vec<f64>) = base
            .par_iter()
            .map(|q| {
                let x = &points[*q][..d];
                (nf.value(x, &f.strain[*q]), self.conjugate.value(x, &f.stress[*q]))
            })
            .unzip();
        let modular_strain = wb * m_strain.iter().sum::<f64>();
        let modular_stress = wb * m_stress.iter().sum::<f64>();

        let theta_base: Vec<f64> = base.iter().map(|q| f.temp.value[*q]).collect();
        let record_t = state.t;
        let cc = cfg.stress.coercivity_const();
        let g_now = 0.5 * cc * modular_strain + cc * modular_stress;
        let (ke, diss, work, thermal) = (ke * wq, diss * wq, work * wq, thermal * wq);
        if let Some((t0, d0, w0, g0)) = self.prev {
            let h = record_t - t0;
            self.cum_d += 0.5 * h * (d0 + diss);
            self.cum_w += 0.5 * h * (w0 + work);
            self.cum_g += 0.5 * h * (g0 + g_now);
        } else {
            self.energy0 = ke;
            self.thermal0 = thermal;
        }
        self.prev = Some((record_t, diss, work, g_now));
        self.energy_sup = self.energy_sup.max(ke);

        self.window.push_back(WindowEntry {
            t: record_t,
            strain: base.iter().map(|q| f.strain[*q]).collect(),
            stress: base.iter().map(|q| f.stress[*q]).collect(),
        });
        while self.window.len() > cfg.window {
            self.window.pop_front();
        }
        let (lux_strain, lux_stress) = self.window_norms(solver)?;

        let record = DiagnosticsRecord {
            t: record_t,
            kinetic_energy: ke,
            dissipation: diss,
            work,
            modular_strain,
            modular_stress,
            mass: basis.grid().integrate(&state.rho),
            rho_min: state.rho.iter().copied().fold(f64::INFINITY, f64::min),
            rho_max: state.rho.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            theta_min: theta_base.iter().copied().fold(f64::INFINITY, f64::min),
            thermal_mass: thermal,
            theta_integral: theta_int * wq,
            velocity_l2: state.alpha.iter().map(|a| a * a).sum::<f64>().sqrt(),
            strain_lp: strain_lp * wq,
            grad_lp: grad_lp * wq,
            theta_weighted_grad: wgrad * wq,
            theta_s_norm: theta_s * wq,
            luxemburg_strain: lux_strain,
            luxemburg_stress: lux_stress,
            cumulative_dissipation: self.cum_d,
            cumulative_work: self.cum_w,
            energy_residual: (ke - self.energy0 + self.cum_d - self.cum_w).abs(),
            thermal_residual: (thermal - self.thermal0 - self.cum_d).abs(),
            dashboard: self.energy_sup + self.cum_g,
        };
        self.records.push(record);
        self.snapshots.push(Snapshot { t: record_t, alpha: state.alpha.clone(), nu: state.nu.clone() });
        Ok(self.records.last().expect("just pushed"))
    }

    fn window_norms(&self, solver: &Solver) -> Result<(f64, f64)> {
        let cfg = solver.config();
        let grid = solver.grid();
        let times: Vec<f64> = self.window.iter().map(|e| e.t).collect();
        let tw = if times.len() >= 2 && times[times.len() - 1] > times[0] {
            trapezoid_weights(&times)
        } else {
            vec![cfg.dt; 1]
        };
        let take = tw.len();
        let start = self.window.len() - take;
        let strain: Vec<SymMat> = self.window.iter().skip(start).flat_map(|e| e.strain.iter().copied()).collect();
        let stress: Vec<SymMat> = self.window.iter().skip(start).flat_map(|e| e.stress.iter().copied()).collect();
        let fs = SampledField::on_grid(grid, &tw, strain)?;
        let fst = fs.with_values(stress)?;
        let tol = cfg.tolerances.luxemburg;
        let nf = cfg.stress.nfunction();
        Ok((luxemburg_norm(nf, &fs, tol)?, luxemburg_norm(&self.conjugate, &fst, tol)?))
    }

    pub(crate) fn finish(self, solver: &Solver) -> Trajectory {
        let cfg = solver.config();
        Trajectory {
            records: self.records,
            snapshots: self.snapshots,
            basis: solver.basis().clone(),
            coercivity_const: cfg.stress.coercivity_const(),
            growth_exponent: cfg.stress.growth_exponent().unwrap_or(2.0),
            rho_low: cfg.initial.rho_low,
            rho_high: cfg.initial.rho_high,
            theta_low: cfg.initial.theta_low,
            beta: cfg.heat.beta,
            lambda: cfg.lambda,
            theta_exponent: theta_exponent(cfg.heat.beta),
            tolerances: cfg.tolerances,
        }
    }
}

/// `key=value` summary lines of the reports' verdicts and headline numbers.
pub fn summary_lines(traj: &Trajectory) -> Result<Vec<String>> {
    use crate::io::fmt_num;
    let e = energy_report(traj)?;
    let th = thermal_report(traj, traj.lambda)?;
    let b = bounds_report(traj);
    let mut lines = vec![
        format!("records={}", traj.records.len()),
        format!("energy_residual={}", fmt_num(e.residual)),
        format!("dashboard={}", fmt_num(e.dashboard)),
        format!("strain_lp_integral={}", fmt_num(e.strain_lp_integral)),
        format!("grad_lp_integral={}", fmt_num(e.grad_lp_integral)),
        format!("velocity_l2_sup={}", fmt_num(e.velocity_l2_sup)),
        format!("dissipation_min={}", fmt_num(e.dissipation_min)),
        format!("dissipation_pass={}", e.dissipation_pass),
        format!("thermal_residual={}", fmt_num(th.balance_residual)),
        format!("thermal_mass_increment={}", fmt_num(th.thermal_mass_increment)),
        format!("thermal_mass_sup={}", fmt_num(th.thermal_mass_sup)),
        format!("theta_integral_sup={}", fmt_num(th.theta_integral_sup)),
        format!("theta_weighted_grad_integral={}", fmt_num(th.weighted_gradient_integral)),
        format!("theta_s_integral={}", fmt_num(th.theta_s_integral)),
        format!("mass_drift={}", fmt_num(b.mass_drift)),
        format!("mass_pass={}", b.mass_pass),
        format!("rho_overshoot={}", fmt_num(b.worst_rho_overshoot)),
        format!("density_pass={}", b.density_pass),
        format!("theta_min={}", fmt_num(b.theta_min)),
        format!("theta_pass={}", b.theta_pass),
    ];
    let all = e.dissipation_pass && b.mass_pass && b.density_pass && b.theta_pass;
    lines.push(format!("all_pass={all}"));
    Ok(lines)
}
