use std::io::Write;

use rayon::prelude::*;

use super::{SimConfig, SimState, Solver};
use crate::diagnostics::energy_report;
use crate::discretization::TorusGrid;
use crate::error::{invalid, Result};
use crate::io::{fmt_num, CsvWriter};

/// Configuration parameter varied along a refinement ladder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LadderParam {
    Dt,
    /// Grid points per axis.
    N,
    NVelocity,
    NTemperature,
    Epsilon,
}

impl LadderParam {
    pub fn as_str(&self) -> &'static str {
        match self {
            LadderParam::Dt => "dt",
            LadderParam::N => "N",
            LadderParam::NVelocity => "n_velocity",
            LadderParam::NTemperature => "n_temperature",
            LadderParam::Epsilon => "epsilon",
        }
    }

    fn is_integer(&self) -> bool {
        matches!(self, LadderParam::N | LadderParam::NVelocity | LadderParam::NTemperature)
    }

    fn apply(&self, cfg: &mut SimConfig, v: f64) {
        match self {
            LadderParam::Dt => cfg.dt = v,
            LadderParam::N => cfg.n_grid = v as usize,
            LadderParam::NVelocity => cfg.n_velocity = v as usize,
            LadderParam::NTemperature => cfg.n_temperature = v as usize,
            LadderParam::Epsilon => cfg.epsilon = v,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RefineLevel {
    pub value: f64,
    /// `None` when the run failed; the message is in `failure`.
    pub final_state: Option<SimState>,
    pub failure: Option<String>,
    pub dashboard: f64,
    pub energy_residual: f64,
    /// `L2` distance of the final velocity to the previous level.
    pub velocity_diff: f64,
    pub density_diff: f64,
    pub temperature_diff: f64,
    /// `log(e_(l-1) / e_l) / log(ratio)` of the velocity differences.
    pub observed_order: f64,
}

#[derive(Debug, Clone)]
pub struct RefineReport {
    pub param: LadderParam,
    pub levels: Vec<RefineLevel>,
}

pub const REFINE_COLUMNS: [&str; 8] = [
    "value",
    "status",
    "dashboard",
    "energy_residual",
    "velocity_diff",
    "density_diff",
    "temperature_diff",
    "observed_order",
];

impl RefineReport {
    /// Observed orders of the levels where one is defined.
    pub fn observed_orders(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.observed_order).filter(|o| o.is_finite()).collect()
    }

    pub fn all_succeeded(&self) -> bool {
        self.levels.iter().all(|l| l.failure.is_none())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<W> {
        let desc = format!("refinement study over {}; differences are to the previous level", self.param.as_str());
        let mut w = CsvWriter::new(out, &desc, &REFINE_COLUMNS)?;
        for l in &self.levels {
            let status = if l.failure.is_some() { "failed" } else { "ok" };
            let labels = [fmt_num(l.value), status.to_string()];
            let vals = [l.dashboard, l.energy_residual, l.velocity_diff, l.density_diff, l.temperature_diff, l.observed_order];
            w.row_with_labels(&labels, &vals)?;
        }
        Ok(w.finish()?)
    }
}

struct LevelFields {
    grid: TorusGrid,
    velocity: Vec<Vec<f64>>,
    rho: Vec<f64>,
    theta: Vec<f64>,
}

fn run_level(cfg: SimConfig) -> Result<(SimState, f64, f64, LevelFields)> {
    let solver = Solver::new(cfg)?;
    let out = solver.run()?;
    let e = energy_report(&out.trajectory)?;
    let basis = solver.basis();
    let fields = LevelFields {
        grid: solver.grid().clone(),
        velocity: basis.synthesize_velocity(&out.final_state.alpha)?,
        rho: out.final_state.rho.clone(),
        theta: basis.synthesize_temperature(&out.final_state.nu)?,
    };
    Ok((out.final_state, e.dashboard, e.residual, fields))
}

fn l2_distance(grid: &TorusGrid, a: &[f64], b: &[f64]) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() * grid.weight()).sqrt()
}

/// Runs `base` once per ladder value (concurrently) and compares each final
/// state with the previous level on the finest grid of the ladder.
pub fn refine_study(base: &SimConfig, param: LadderParam, values: &[f64]) -> Result<RefineReport> {
    if values.len() < 2 {
        return Err(invalid("refinement ladder needs at least two values"));
    }
    for &v in values {
        if !(v.is_finite() && v >= 0.0) || (param.is_integer() && (v.fract() != 0.0 || v < 1.0)) {
            return Err(invalid(format!("invalid {} ladder value {v}", param.as_str())));
        }
    }
    let configs: Vec<SimConfig> = values
        .iter()
        .map(|&v| {
            let mut c = base.clone();
            param.apply(&mut c, v);
            c.validate().map(|_| c)
        })
        .collect::<Result<_>>()?;
    let results: Vec<Result<(SimState, f64, f64, LevelFields)>> = configs.into_par_iter().map(run_level).collect();

    let n_fine = results
        .iter()
        .filter_map(|r| r.as_ref().ok())
        .map(|r| r.3.grid.n())
        .max()
        .unwrap_or(base.n_grid);
    let fine = TorusGrid::new(base.dim, n_fine)?;
    let on_fine = |f: &LevelFields| -> Result<LevelFields> {
        let up = |v: &[f64]| f.grid.interpolate(v, &fine);
        Ok(LevelFields {
            grid: fine.clone(),
            velocity: f.velocity.iter().map(|c| up(c)).collect::<Result<_>>()?,
            rho: up(&f.rho)?,
            theta: up(&f.theta)?,
        })
    };

    let mut levels = Vec::with_capacity(values.len());
    let mut prev: Option<LevelFields> = None;
    for (i, r) in results.into_iter().enumerate() {
        let mut level = RefineLevel {
            value: values[i],
            final_state: None,
            failure: None,
            dashboard: f64::NAN,
            energy_residual: f64::NAN,
            velocity_diff: f64::NAN,
            density_diff: f64::NAN,
            temperature_diff: f64::NAN,
            observed_order: f64::NAN,
        };
        match r {
            Ok((state, dashboard, residual, fields)) => {
                let fields = on_fine(&fields)?;
                level.dashboard = dashboard;
                level.energy_residual = residual;
                level.final_state = Some(state);
                if let Some(p) = &prev {
                    level.velocity_diff = p
                        .velocity
                        .iter()
                        .zip(&fields.velocity)
                        .map(|(a, b)| l2_distance(&fine, a, b).powi(2))
                        .sum::<f64>()
                        .sqrt();
                    level.density_diff = l2_distance(&fine, &p.rho, &fields.rho);
                    level.temperature_diff = l2_distance(&fine, &p.theta, &fields.theta);
                }
                prev = Some(fields);
            }
            Err(e) => {
                log::warn!("refinement level {} = {} failed: {e}", param.as_str(), values[i]);
                level.failure = Some(e.to_string());
                prev = None;
            }
        }
        levels.push(level);
    }
    for i in 2..levels.len() {
        let (e0, e1) = (levels[i - 1].velocity_diff, levels[i].velocity_diff);
        let ratio = {
            let q = levels[i].value / levels[i - 1].value;
            q.max(1.0 / q)
        };
        if e0 > 0.0 && e1 > 0.0 && ratio > 1.0 {
            levels[i].observed_order = (e0 / e1).ln() / ratio.ln();
        }
    }
    Ok(RefineReport { param, levels })
}
