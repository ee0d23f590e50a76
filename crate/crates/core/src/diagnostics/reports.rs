use super::{DiagnosticsRecord, Trajectory};
use crate::error::{invalid, Result};

/// Trapezoid integral of `f(record)` over records `i0..=i1`.
fn time_integral(records: &[DiagnosticsRecord], i0: usize, i1: usize, f: impl Fn(&DiagnosticsRecord) -> f64) -> f64 {
    (i0..i1).map(|i| 0.5 * (records[i + 1].t - records[i].t) * (f(&records[i]) + f(&records[i + 1]))).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    /// `|Delta E + int int S:Du - int int rho f.u|` over the whole run.
    pub residual: f64,
    /// `sup_t E + int int (c_c/2 M + c_c M*)`.
    pub dashboard: f64,
    /// `int ||Du||_p^p dt`.
    pub strain_lp_integral: f64,
    /// `int ||grad u||_p^p dt`.
    pub grad_lp_integral: f64,
    pub velocity_l2_sup: f64,
    pub dissipation_min: f64,
    /// `int S:Du >= -tol (1 + int M)` at every record.
    pub dissipation_pass: bool,
}

/// Energy-balance residual over the record window `[i0, i1]`.
pub fn energy_window_residual(traj: &Trajectory, i0: usize, i1: usize) -> Result<f64> {
    let r = &traj.records;
    if i0 >= i1 || i1 >= r.len() {
        return Err(invalid(format!("window [{i0}, {i1}] outside {} records", r.len())));
    }
    let de = r[i1].kinetic_energy - r[i0].kinetic_energy;
    let d = time_integral(r, i0, i1, |x| x.dissipation);
    let w = time_integral(r, i0, i1, |x| x.work);
    Ok((de + d - w).abs())
}

pub fn energy_report(traj: &Trajectory) -> Result<EnergyReport> {
    let r = &traj.records;
    if r.len() < 2 {
        return Err(invalid("energy report needs at least two records"));
    }
    let last = r.len() - 1;
    let tol = traj.tolerances.dissipation;
    Ok(EnergyReport {
        residual: energy_window_residual(traj, 0, last)?,
        dashboard: r.iter().map(|x| x.dashboard).fold(0.0, f64::max),
        strain_lp_integral: time_integral(r, 0, last, |x| x.strain_lp),
        grad_lp_integral: time_integral(r, 0, last, |x| x.grad_lp),
        velocity_l2_sup: r.iter().map(|x| x.velocity_l2).fold(0.0, f64::max),
        dissipation_min: r.iter().map(|x| x.dissipation).fold(f64::INFINITY, f64::min),
        dissipation_pass: r.iter().all(|x| x.dissipation >= -tol * (1.0 + x.modular_strain)),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThermalReport {
    /// `|Delta int rho theta - int int S:Du|`.
    pub balance_residual: f64,
    /// `Delta int rho theta` over the run.
    pub thermal_mass_increment: f64,
    pub thermal_mass_sup: f64,
    pub theta_integral_sup: f64,
    /// `int ||grad(theta^((beta - lambda + 1)/2))||_2^2 dt`.
    pub weighted_gradient_integral: f64,
    /// `int ||theta||_s^s dt`.
    pub theta_s_integral: f64,
    pub theta_exponent: f64,
    pub lambda: f64,
}

/// Weighted gradient quantity of one snapshot for a given `lambda`.
fn weighted_gradient(traj: &Trajectory, nu: &[f64], lambda: f64) -> Result<f64> {
    let basis = &traj.basis;
    let q = basis.temperature_on_quad(nu)?;
    let gamma = 0.5 * (traj.beta - lambda + 1.0);
    let mut s = 0.0;
    for p in 0..q.value.len() {
        let tc = q.value[p].max(traj.theta_low);
        let g2: f64 = q.grad.iter().map(|g| g[p] * g[p]).sum();
        s += (gamma * tc.powf(gamma - 1.0)).powi(2) * g2;
    }
    Ok(s * basis.quad_grid().weight())
}

pub fn thermal_report(traj: &Trajectory, lambda: f64) -> Result<ThermalReport> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(invalid(format!("lambda = {lambda} must lie in (0, 1)")));
    }
    let r = &traj.records;
    if r.len() < 2 {
        return Err(invalid("thermal report needs at least two records"));
    }
    let last = r.len() - 1;
    let increment = r[last].thermal_mass - r[0].thermal_mass;
    let d = time_integral(r, 0, last, |x| x.dissipation);
    let weighted_gradient_integral = if lambda == traj.lambda {
        time_integral(r, 0, last, |x| x.theta_weighted_grad)
    } else {
        let vals = traj
            .snapshots
            .iter()
            .map(|s| weighted_gradient(traj, &s.nu, lambda))
            .collect::<Result<Vec<f64>>>()?;
        (0..last).map(|i| 0.5 * (r[i + 1].t - r[i].t) * (vals[i] + vals[i + 1])).sum()
    };
    Ok(ThermalReport {
        balance_residual: (increment - d).abs(),
        thermal_mass_increment: increment,
        thermal_mass_sup: r.iter().map(|x| x.thermal_mass).fold(f64::NEG_INFINITY, f64::max),
        theta_integral_sup: r.iter().map(|x| x.theta_integral).fold(f64::NEG_INFINITY, f64::max),
        weighted_gradient_integral,
        theta_s_integral: time_integral(r, 0, last, |x| x.theta_s_norm),
        theta_exponent: traj.theta_exponent,
        lambda,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundsRow {
    pub t: f64,
    pub rho_min: f64,
    pub rho_max: f64,
    /// `max(0, rho_low - min rho, max rho - rho_high)`.
    pub rho_overshoot: f64,
    pub theta_min: f64,
    /// `max(0, theta_low - min theta)`.
    pub theta_undershoot: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundsReport {
    pub rows: Vec<BoundsRow>,
    pub worst_rho_overshoot: f64,
    /// Overshoot relative to `rho_high - rho_low` (absolute when the gap is 0).
    pub worst_rho_overshoot_rel: f64,
    pub theta_min: f64,
    pub worst_theta_undershoot: f64,
    pub mass_drift: f64,
    pub density_pass: bool,
    pub theta_pass: bool,
    pub mass_pass: bool,
}

pub fn bounds_report(traj: &Trajectory) -> BoundsReport {
    let rows: Vec<BoundsRow> = traj
        .records
        .iter()
        .map(|r| BoundsRow {
            t: r.t,
            rho_min: r.rho_min,
            rho_max: r.rho_max,
            rho_overshoot: (traj.rho_low - r.rho_min).max(r.rho_max - traj.rho_high).max(0.0),
            theta_min: r.theta_min,
            theta_undershoot: (traj.theta_low - r.theta_min).max(0.0),
        })
        .collect();
    let worst = rows.iter().map(|r| r.rho_overshoot).fold(0.0, f64::max);
    let gap = traj.rho_high - traj.rho_low;
    let rel = if gap > 0.0 { worst / gap } else { worst };
    let theta_min = rows.iter().map(|r| r.theta_min).fold(f64::INFINITY, f64::min);
    let mass0 = traj.records.first().map_or(0.0, |r| r.mass);
    let mass_drift = traj.records.iter().map(|r| (r.mass - mass0).abs()).fold(0.0, f64::max);
    let tol = traj.tolerances;
    BoundsReport {
        worst_rho_overshoot: worst,
        worst_rho_overshoot_rel: rel,
        theta_min,
        worst_theta_undershoot: rows.iter().map(|r| r.theta_undershoot).fold(0.0, f64::max),
        mass_drift,
        density_pass: rel <= tol.density_rel,
        theta_pass: theta_min >= traj.theta_low * (1.0 - tol.theta_rel),
        mass_pass: mass_drift < tol.mass,
        rows,
    }
}

/// `sup_delta delta^(-1/2) (int_0^(T - delta) ||u(s + delta) - u(s)||^2 ds)^(1/2)`
/// from the stored coefficient snapshots, which must be equally spaced.
pub fn nikolskii_seminorm(traj: &Trajectory, deltas: &[f64]) -> Result<f64> {
    let s = &traj.snapshots;
    if s.len() < 2 {
        return Err(invalid("seminorm needs at least two snapshots"));
    }
    let h = s[1].t - s[0].t;
    let total = s[s.len() - 1].t - s[0].t;
    for w in s.windows(2) {
        if ((w[1].t - w[0].t) - h).abs() > 1e-9 * h.max(1.0) {
            return Err(invalid("snapshots are not equally spaced"));
        }
    }
    let mut sup = 0.0f64;
    for &delta in deltas {
        if !(delta > 0.0) || delta > total * (1.0 + 1e-12) {
            return Err(invalid(format!("delta = {delta} must lie in (0, T]")));
        }
        let m_f = delta / h;
        let m = m_f.round() as usize;
        if (m_f - m as f64).abs() > 1e-6 || m == 0 {
            return Err(invalid(format!("delta = {delta} is not a multiple of the snapshot spacing {h}")));
        }
        if m >= s.len() {
            continue;
        }
        let diffs: Vec<f64> = (0..s.len() - m)
            .map(|i| s[i + m].alpha.iter().zip(&s[i].alpha).map(|(a, b)| (a - b).powi(2)).sum())
            .collect();
        let integral: f64 = diffs.windows(2).map(|w| 0.5 * h * (w[0] + w[1])).sum();
        sup = sup.max((integral / delta).sqrt());
    }
    Ok(sup)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitutive::{HeatFluxModel, StressModel, Viscosity};
    use crate::diagnostics::Snapshot;
    use crate::solver::{InitialData, SimConfig, Solver};

    fn rest_trajectory() -> Trajectory {
        let stress = StressModel::power_law(2, 2.2, Viscosity::constant(1.0)).unwrap();
        let mut cfg = SimConfig::new(stress, HeatFluxModel::fourier(1.0), InitialData::rest(1.0, 2.0));
        cfg.n_grid = 16;
        cfg.n_velocity = 4;
        cfg.n_temperature = 4;
        cfg.t_final = 0.01;
        Solver::new(cfg).unwrap().run().unwrap().trajectory
    }

    #[test]
    fn rest_state_reports_vanish() {
        let traj = rest_trajectory();
        let e = energy_report(&traj).unwrap();
        assert_eq!(e.residual, 0.0);
        assert_eq!(e.dashboard, 0.0);
        assert_eq!(e.velocity_l2_sup, 0.0);
        assert!(e.dissipation_pass);
        let th = thermal_report(&traj, 0.5).unwrap();
        assert!(th.balance_residual < 1e-10);
        assert!(th.weighted_gradient_integral.abs() < 1e-20);
        let b = bounds_report(&traj);
        assert_eq!(b.worst_rho_overshoot, 0.0);
        assert!(b.density_pass && b.theta_pass && b.mass_pass);
        assert_eq!(nikolskii_seminorm(&traj, &[1e-3, 5e-3]).unwrap(), 0.0);
    }

    #[test]
    fn invalid_arguments_are_rejected() {
        let mut traj = rest_trajectory();
        assert!(thermal_report(&traj, 0.0).is_err());
        assert!(thermal_report(&traj, 1.0).is_err());
        assert!(nikolskii_seminorm(&traj, &[0.02]).is_err());
        assert!(nikolskii_seminorm(&traj, &[1.5e-3]).is_err());
        assert!(energy_window_residual(&traj, 3, 3).is_err());
        traj.records.truncate(1);
        assert!(energy_report(&traj).is_err());
    }

    #[test]
    fn weighted_gradient_recomputation_matches_records() {
        let stress = StressModel::power_law(2, 2.2, Viscosity::constant(1.0)).unwrap();
        let mut init = InitialData::rest(1.0, 0.5);
        init.theta0 = std::sync::Arc::new(|x| 1.0 + 0.4 * x[0].cos());
        let mut cfg = SimConfig::new(stress, HeatFluxModel::fourier(1.0), init);
        cfg.n_grid = 16;
        cfg.n_velocity = 4;
        cfg.n_temperature = 5;
        cfg.t_final = 0.02;
        let mut traj = Solver::new(cfg).unwrap().run().unwrap().trajectory;
        let stored = thermal_report(&traj, 0.5).unwrap().weighted_gradient_integral;
        traj.lambda = 0.25;
        let recomputed = thermal_report(&traj, 0.5).unwrap().weighted_gradient_integral;
        assert!(stored > 0.0);
        assert!((stored - recomputed).abs() < 1e-12 * stored);
    }

    #[test]
    fn nikolskii_matches_exponential_decay_oracle() {
        // u(t) = exp(-t) w_1: ||u(s + d) - u(s)||^2 = exp(-2s) (1 - exp(-d))^2
        let mut traj = rest_trajectory();
        let (h, t_final) = (1e-3, 1.0);
        let n = (t_final / h) as usize;
        traj.snapshots = (0..=n)
            .map(|i| {
                let t = i as f64 * h;
                let mut alpha = vec![0.0; 4];
                alpha[0] = (-t).exp();
                Snapshot { t, alpha, nu: vec![0.0; 4] }
            })
            .collect();
        let deltas = [0.01, 0.05, 0.1, 0.5];
        let oracle = deltas
            .iter()
            .map(|&d: &f64| {
                let integral = (1.0 - (-d).exp()).powi(2) * (1.0 - (-2.0 * (t_final - d)).exp()) / 2.0;
                (integral / d).sqrt()
            })
            .fold(0.0, f64::max);
        let v = nikolskii_seminorm(&traj, &deltas).unwrap();
        assert!((v - oracle).abs() < 0.01 * oracle, "{v} vs {oracle}");
    }
}
