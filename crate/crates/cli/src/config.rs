use std::path::Path;
use std::sync::Arc;

use nnflow_core::constitutive::{
    validate_hypotheses, AdmissibilitySpec, Conductivity, HeatFluxModel, StressKind, StressModel, Viscosity,
};
use nnflow_core::discretization::TorusGrid;
use nnflow_core::nfunction::ExponentField;
use nnflow_core::solver::{default_epsilon, Forcing, InitialData, Scheme, SimConfig, Tolerances};
use nnflow_core::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::expr::Expression;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DomainSection {
    pub dim: usize,
    /// Grid points per axis.
    pub n: usize,
}

impl Default for DomainSection {
    fn default() -> Self {
        Self { dim: 2, n: 32 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BasisSection {
    pub n_velocity: usize,
    pub n_temperature: usize,
    pub oversample: usize,
}

impl Default for BasisSection {
    fn default() -> Self {
        Self { n_velocity: 16, n_temperature: 16, oversample: 2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeName {
    #[default]
    CoupledHeun,
    LieSplit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeSection {
    #[serde(rename = "T")]
    pub t_final: f64,
    pub dt: f64,
    /// Artificial density diffusion; `1e-3 (2 pi / N)^2` when absent.
    pub epsilon: Option<f64>,
    pub scheme: SchemeName,
    pub cfl_limit: f64,
}

impl Default for TimeSection {
    fn default() -> Self {
        Self { t_final: 1.0, dt: 1e-3, epsilon: None, scheme: SchemeName::CoupledHeun, cfl_limit: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum StressKindName {
    #[default]
    PowerLaw,
    Carreau,
    VariableExponent,
    AnisotropicSeparable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ViscositySection {
    pub mu0: f64,
    pub a: f64,
    pub b: f64,
    /// Clip bounds; both default to `mu0` when `a = b = 0`.
    pub low: Option<f64>,
    pub high: Option<f64>,
}

impl Default for ViscositySection {
    fn default() -> Self {
        Self { mu0: 1.0, a: 0.0, b: 0.0, low: None, high: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StressSection {
    pub kind: StressKindName,
    pub p: f64,
    /// Variable exponent `p(x) = p + p_amplitude sin^2(x1)`.
    pub p_amplitude: f64,
    /// Entrywise exponents of the anisotropic separable law.
    pub exponents: Option<[[f64; 3]; 3]>,
    pub viscosity: ViscositySection,
    /// Fixed coercivity constant; `calibrate` estimates it instead.
    pub coercivity_const: Option<f64>,
    pub calibrate: bool,
}

impl Default for StressSection {
    fn default() -> Self {
        Self {
            kind: StressKindName::PowerLaw,
            p: 2.2,
            p_amplitude: 0.0,
            exponents: None,
            viscosity: ViscositySection::default(),
            coercivity_const: None,
            calibrate: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeatSection {
    pub kappa: f64,
    pub kappa_a: f64,
    pub kappa_low: Option<f64>,
    pub kappa_high: Option<f64>,
    pub beta: f64,
}

impl Default for HeatSection {
    fn default() -> Self {
        Self { kappa: 1.0, kappa_a: 0.0, kappa_low: None, kappa_high: None, beta: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialSection {
    pub rho0: String,
    /// Declared density bounds; default to the sampled extremes of `rho0`.
    pub rho_low: Option<f64>,
    pub rho_high: Option<f64>,
    /// One expression per component; an empty list means rest.
    pub u0: Vec<String>,
    pub theta0: String,
    /// Declared temperature floor; defaults to the sampled minimum.
    pub theta_low: Option<f64>,
    /// Body force components; time-dependent when any mentions `t`.
    pub forcing: Option<Vec<String>>,
}

impl Default for InitialSection {
    fn default() -> Self {
        Self {
            rho0: "1".into(),
            rho_low: None,
            rho_high: None,
            u0: Vec::new(),
            theta0: "1".into(),
            theta_low: None,
            forcing: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsSection {
    pub cadence: usize,
    pub window: usize,
    pub lambda: f64,
    /// Time shifts of the seminorm; multiples of the record interval up
    /// to `T / 2` when empty.
    pub nikolskii_deltas: Vec<f64>,
    pub mass_tol: f64,
    pub density_rel_tol: f64,
    pub theta_rel_tol: f64,
    pub luxemburg_tol: f64,
    pub dissipation_tol: f64,
    /// Radii and directions of the `conjugate` table.
    pub conjugate_radii: Vec<f64>,
    pub conjugate_directions: usize,
}

impl Default for DiagnosticsSection {
    fn default() -> Self {
        let t = Tolerances::default();
        Self {
            cadence: 1,
            window: 3,
            lambda: 0.5,
            nikolskii_deltas: Vec::new(),
            mass_tol: t.mass,
            density_rel_tol: t.density_rel,
            theta_rel_tol: t.theta_rel,
            luxemburg_tol: t.luxemburg,
            dissipation_tol: t.dissipation,
            conjugate_radii: vec![0.01, 0.1, 0.5, 1.0, 2.0, 10.0, 100.0],
            conjugate_directions: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub directory: String,
    /// Write the final density, velocity and temperature on the grid.
    pub fields: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { directory: "nnflow-out".into(), fields: true }
    }
}

/// The JSON configuration document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub domain: DomainSection,
    pub basis: BasisSection,
    pub time: TimeSection,
    pub stress: StressSection,
    pub heat: HeatSection,
    pub initial_data: InitialSection,
    pub diagnostics: DiagnosticsSection,
    pub output: OutputSection,
    pub seed: u64,
}

/// A parsed configuration: the resolved document (every default filled in)
/// and the solver configuration built from it.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub file: ConfigFile,
    pub sim: SimConfig,
}

fn schema(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(schema(format!("{name} must be positive, got {v}")))
    }
}

fn parse_expr(field: &str, src: &str) -> Result<Expression> {
    Expression::parse(field, src).map_err(schema)
}

fn vector_exprs(field: &str, srcs: &[String], dim: usize) -> Result<Vec<Expression>> {
    if srcs.len() != dim {
        return Err(schema(format!("{field} needs {dim} components, got {}", srcs.len())));
    }
    srcs.iter().enumerate().map(|(i, s)| parse_expr(&format!("{field}[{i}]"), s)).collect()
}

fn eval_vector(exprs: &[Expression], x: &[f64], t: f64) -> [f64; 3] {
    let mut v = [0.0; 3];
    for (c, e) in exprs.iter().enumerate() {
        v[c] = e.eval(x, t);
    }
    v
}

impl ConfigFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| schema(format!("config: {e}")))
    }

    fn stress_model(&self) -> Result<StressModel> {
        let s = &self.stress;
        let v = &s.viscosity;
        let constant = v.a == 0.0 && v.b == 0.0;
        let (low, high) = match (v.low, v.high) {
            (Some(l), Some(h)) => (l, h),
            (None, None) if constant => (v.mu0, v.mu0),
            _ => return Err(schema("stress.viscosity.low and .high are required when a or b is nonzero")),
        };
        positive("stress.viscosity.low", low)?;
        let viscosity = Viscosity { mu0: v.mu0, a: v.a, b: v.b, low, high };
        let dim = self.domain.dim;
        let kind = match s.kind {
            StressKindName::PowerLaw => StressKind::PowerLaw { p: s.p },
            StressKindName::Carreau => StressKind::Carreau { p: s.p },
            StressKindName::VariableExponent => {
                StressKind::VariableExponent { exponent: ExponentField { base: s.p, amplitude: s.p_amplitude } }
            }
            StressKindName::AnisotropicSeparable => StressKind::AnisotropicSeparable {
                exponents: s.exponents.unwrap_or([[s.p; 3]; 3]),
            },
        };
        let mut model = StressModel::new(dim, kind, viscosity).map_err(|e| schema(format!("stress: {e}")))?;
        if let Some(c) = s.coercivity_const {
            model = model.with_coercivity_const(c).map_err(|e| schema(format!("stress.coercivity_const: {e}")))?;
        } else if s.calibrate {
            let mut spec = AdmissibilitySpec::torus(dim, 3);
            spec.seed = self.seed;
            model = model.calibrated(&spec)?;
        }
        Ok(model)
    }

    fn heat_model(&self) -> Result<HeatFluxModel> {
        let h = &self.heat;
        let constant = h.kappa_a == 0.0;
        let (low, high) = match (h.kappa_low, h.kappa_high) {
            (Some(l), Some(hi)) => (l, hi),
            (None, None) if constant => (h.kappa, h.kappa),
            _ => return Err(schema("heat.kappa_low and .kappa_high are required when kappa_a is nonzero")),
        };
        HeatFluxModel::new(Conductivity { k0: h.kappa, a: h.kappa_a, low, high }, h.beta)
            .map_err(|e| schema(format!("heat: {e}")))
    }

    /// Checks field values, fills data-dependent defaults and builds the
    /// solver configuration. Hypothesis failures are attached, not raised.
    pub fn resolve(mut self) -> Result<LoadedConfig> {
        let dim = self.domain.dim;
        if !(dim == 2 || dim == 3) {
            return Err(schema(format!("domain.dim must be 2 or 3, got {dim}")));
        }
        let grid = TorusGrid::new(dim, self.domain.n).map_err(|e| schema(format!("domain.n: {e}")))?;
        positive("time.dt", self.time.dt)?;
        positive("time.T", self.time.t_final)?;
        positive("time.cfl_limit", self.time.cfl_limit)?;
        if let Some(eps) = self.time.epsilon {
            if !(eps >= 0.0 && eps.is_finite()) {
                return Err(schema(format!("time.epsilon must be nonnegative, got {eps}")));
            }
        }
        if self.diagnostics.cadence == 0 {
            return Err(schema("diagnostics.cadence must be positive"));
        }
        if self.diagnostics.window == 0 {
            return Err(schema("diagnostics.window must be positive"));
        }
        if !(self.diagnostics.lambda > 0.0 && self.diagnostics.lambda < 1.0) {
            return Err(schema("diagnostics.lambda must lie in (0, 1)"));
        }

        let init = &self.initial_data;
        let rho0 = parse_expr("initial_data.rho0", &init.rho0)?;
        let theta0 = parse_expr("initial_data.theta0", &init.theta0)?;
        let u0 = if init.u0.is_empty() {
            Vec::new()
        } else {
            vector_exprs("initial_data.u0", &init.u0, dim)?
        };
        let forcing_exprs = match &init.forcing {
            Some(f) => Some(vector_exprs("initial_data.forcing", f, dim)?),
            None => None,
        };
        for (name, e) in [("rho0", &rho0), ("theta0", &theta0)].into_iter().chain(u0.iter().map(|e| ("u0", e))) {
            if e.uses_t() {
                return Err(schema(format!("initial_data.{name} must not depend on t")));
            }
        }

        let rho_samples = grid.sample(|x| rho0.eval(x, 0.0));
        let theta_samples = grid.sample(|x| theta0.eval(x, 0.0));
        if rho_samples.iter().chain(&theta_samples).any(|v| !v.is_finite()) {
            return Err(schema("initial_data: rho0 or theta0 is not finite on the grid"));
        }
        let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
        let max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let rho_low = *self.initial_data.rho_low.get_or_insert(min(&rho_samples));
        let rho_high = *self.initial_data.rho_high.get_or_insert(max(&rho_samples));
        let theta_low = *self.initial_data.theta_low.get_or_insert(min(&theta_samples));
        positive("initial_data.rho_low", rho_low)?;
        positive("initial_data.theta_low", theta_low)?;
        if rho_high < rho_low {
            return Err(schema("initial_data.rho_high must be at least rho_low"));
        }
        if self.time.epsilon.is_none() {
            self.time.epsilon = Some(default_epsilon(self.domain.n));
        }

        let stress = self.stress_model()?;
        let heat = self.heat_model()?;
        let forcing = match forcing_exprs {
            None => Forcing::None,
            Some(f) if f.iter().any(|e| e.uses_t()) => {
                Forcing::Unsteady(Arc::new(move |t: f64, x: &[f64]| eval_vector(&f, x, t)))
            }
            Some(f) => Forcing::Steady(Arc::new(move |x: &[f64]| eval_vector(&f, x, 0.0))),
        };
        let initial = InitialData {
            rho0: Arc::new(move |x: &[f64]| rho0.eval(x, 0.0)),
            rho_low,
            rho_high,
            u0: Arc::new(move |x: &[f64]| eval_vector(&u0, x, 0.0)),
            theta0: Arc::new(move |x: &[f64]| theta0.eval(x, 0.0)),
            theta_low,
            forcing,
        };
        let bounds = initial.bounds(&grid);

        let d = &self.diagnostics;
        let mut sim = SimConfig::new(stress, heat, initial);
        sim.dim = dim;
        sim.n_grid = self.domain.n;
        sim.oversample = self.basis.oversample;
        sim.n_velocity = self.basis.n_velocity;
        sim.n_temperature = self.basis.n_temperature;
        sim.t_final = self.time.t_final;
        sim.dt = self.time.dt;
        sim.epsilon = self.time.epsilon.unwrap_or_default();
        sim.scheme = match self.time.scheme {
            SchemeName::CoupledHeun => Scheme::CoupledHeun,
            SchemeName::LieSplit => Scheme::LieSplit,
        };
        sim.cfl_limit = self.time.cfl_limit;
        sim.cadence = d.cadence;
        sim.window = d.window;
        sim.lambda = d.lambda;
        sim.tolerances = Tolerances {
            mass: d.mass_tol,
            density_rel: d.density_rel_tol,
            theta_rel: d.theta_rel_tol,
            luxemburg: d.luxemburg_tol,
            dissipation: d.dissipation_tol,
        };
        sim.seed = self.seed;
        sim.validate()?;

        let verdict = validate_hypotheses(&sim.stress, &sim.heat, dim, &bounds);
        for c in verdict.failures() {
            log::warn!("hypothesis {} not satisfied: {}", c.name, c.detail);
        }
        sim.verdict = Some(verdict);
        Ok(LoadedConfig { file: self, sim })
    }

    /// Seminorm shifts: the configured ones, or powers of two times the
    /// record interval up to `T / 2`.
    pub fn nikolskii_deltas(&self) -> Vec<f64> {
        if !self.diagnostics.nikolskii_deltas.is_empty() {
            return self.diagnostics.nikolskii_deltas.clone();
        }
        let h = self.time.dt * self.diagnostics.cadence as f64;
        let mut out = Vec::new();
        let mut m = 1.0;
        while m * h <= 0.5 * self.time.t_final * (1.0 + 1e-12) {
            out.push(m * h);
            m *= 2.0;
        }
        out
    }
}

/// Reads, parses and resolves a configuration file.
pub fn load_config(path: &Path) -> Result<LoadedConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| schema(format!("cannot read config {}: {e}", path.display())))?;
    let file = serde_json::from_str::<ConfigFile>(&text)
        .map_err(|e| schema(format!("{}: {e}", path.display())))?;
    file.resolve()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_documented_defaults() {
        let cfg = ConfigFile::from_json("{}").unwrap().resolve().unwrap();
        assert_eq!(cfg.sim.dim, 2);
        assert_eq!(cfg.sim.n_grid, 32);
        assert_eq!(cfg.sim.stress.growth_exponent(), Some(2.2));
        assert_eq!(cfg.sim.stress.viscosity().at(1.0, 1.0), 1.0);
        assert_eq!(cfg.file.initial_data.rho_low, Some(1.0));
        assert!(cfg.sim.verdict.as_ref().unwrap().all_passed());
    }

    #[test]
    fn low_exponent_in_three_dimensions_warns_not_errors() {
        let json = r#"{"domain": {"dim": 3, "n": 16}, "stress": {"p": 2.0}, "basis": {"n_velocity": 8, "n_temperature": 8}}"#;
        let cfg = ConfigFile::from_json(json).unwrap().resolve().unwrap();
        let verdict = cfg.sim.verdict.unwrap();
        assert!(!verdict.all_passed());
        assert!(verdict.check("growth-exponent").unwrap().detail.contains("p >= 11/5"));
    }

    #[test]
    fn nonpositive_dt_names_the_field() {
        let err = ConfigFile::from_json(r#"{"time": {"dt": 0}}"#).unwrap().resolve().unwrap_err();
        assert!(err.to_string().contains("time.dt"), "{err}");
    }

    #[test]
    fn parse_errors_carry_position_and_unknown_fields_are_named() {
        let err = ConfigFile::from_json("{\n  \"domain\": {\"dim\": 2,}\n}").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        let err = ConfigFile::from_json(r#"{"time": {"dtt": 1}}"#).unwrap_err();
        assert!(err.to_string().contains("dtt"), "{err}");
    }

    #[test]
    fn forcing_with_t_is_unsteady() {
        let json = r#"{"initial_data": {"forcing": ["sin(x2) * exp(-t)", "0"]}}"#;
        let cfg = ConfigFile::from_json(json).unwrap().resolve().unwrap();
        assert!(matches!(cfg.sim.initial.forcing, Forcing::Unsteady(_)));
        let json = r#"{"initial_data": {"forcing": ["sin(x2)", "0"]}}"#;
        let cfg = ConfigFile::from_json(json).unwrap().resolve().unwrap();
        assert!(matches!(cfg.sim.initial.forcing, Forcing::Steady(_)));
    }

    #[test]
    fn wrong_component_count_is_rejected() {
        let json = r#"{"initial_data": {"u0": ["sin(x2)"]}}"#;
        let err = ConfigFile::from_json(json).unwrap().resolve().unwrap_err();
        assert!(err.to_string().contains("initial_data.u0"), "{err}");
    }

    #[test]
    fn default_deltas_are_record_multiples() {
        let mut f = ConfigFile::default();
        f.time.t_final = 0.01;
        f.diagnostics.cadence = 2;
        assert_eq!(f.nikolskii_deltas(), vec![0.002, 0.004]);
    }
}
