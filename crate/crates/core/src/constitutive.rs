//! Stress and heat-flux models with sampled admissibility checks and the
//! hypothesis validator of the existence theory.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::nfunction::{
    AxiomCheck, AxiomSampleSpec, ConjugateParams, Delta2Verdict, ExponentField, NFunction,
};
use crate::tensor::SymMat;

/// `mu(rho, theta) = mu0 (1 + a rho)(1 + b / theta)` clipped to `[low, high]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Viscosity {
    pub mu0: f64,
    pub a: f64,
    pub b: f64,
    pub low: f64,
    pub high: f64,
}

impl Viscosity {
    pub fn constant(mu: f64) -> Self {
        Self { mu0: mu, a: 0.0, b: 0.0, low: mu, high: mu }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.low > 0.0 && self.high >= self.low && self.mu0.is_finite()) {
            return Err(invalid("viscosity bounds must satisfy 0 < low <= high"));
        }
        Ok(())
    }

    pub fn is_constant(&self) -> bool {
        self.low == self.high
    }

    #[inline]
    pub fn at(&self, rho: f64, theta: f64) -> f64 {
        (self.mu0 * (1.0 + self.a * rho) * (1.0 + self.b / theta)).clamp(self.low, self.high)
    }
}

type CustomStress = Arc<dyn Fn(&[f64], f64, f64, &SymMat) -> SymMat + Send + Sync>;

#[derive(Clone)]
pub enum StressKind {
    /// `S = mu |K|^(p-2) K`.
    PowerLaw { p: f64 },
    /// `S = mu (1 + |K|^2)^((p-2)/2) K`.
    Carreau { p: f64 },
    /// `S = mu |K|^(p(x)-2) K`.
    VariableExponent { exponent: ExponentField },
    /// `S_ij = mu |K_ij|^(p_ij-2) K_ij`.
    AnisotropicSeparable { exponents: [[f64; 3]; 3] },
    /// User map `(x, rho, theta, K) -> S`; the viscosity is not applied.
    Custom(CustomStress),
}

impl fmt::Debug for StressKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StressKind::PowerLaw { p } => write!(f, "PowerLaw {{ p: {p} }}"),
            StressKind::Carreau { p } => write!(f, "Carreau {{ p: {p} }}"),
            StressKind::VariableExponent { exponent } => write!(f, "VariableExponent {{ {exponent:?} }}"),
            StressKind::AnisotropicSeparable { exponents } => {
                write!(f, "AnisotropicSeparable {{ {exponents:?} }}")
            }
            StressKind::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl StressKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            StressKind::PowerLaw { .. } => "power-law",
            StressKind::Carreau { .. } => "carreau",
            StressKind::VariableExponent { .. } => "variable-exponent",
            StressKind::AnisotropicSeparable { .. } => "anisotropic-separable",
            StressKind::Custom(_) => "custom",
        }
    }
}

/// Stress law `S(x, rho, theta, K)` paired with an N-function `M` and a
/// coercivity constant `c_c` in `(0, 1]`.
#[derive(Debug, Clone)]
pub struct StressModel {
    dim: usize,
    kind: StressKind,
    viscosity: Viscosity,
    nfunction: NFunction,
    coercivity_const: f64,
}

impl StressModel {
    /// Built-in model; `M` is `mu_low` times the potential whose gradient is
    /// the unweighted stress, so `c_c = 1` whenever `mu` is constant.
    pub fn new(dim: usize, kind: StressKind, viscosity: Viscosity) -> Result<Self> {
        viscosity.validate()?;
        let base = match &kind {
            StressKind::PowerLaw { p } => NFunction::power(dim, *p)?,
            StressKind::Carreau { p } => NFunction::carreau(dim, *p)?,
            StressKind::VariableExponent { exponent } => NFunction::variable_exponent(dim, *exponent)?,
            StressKind::AnisotropicSeparable { exponents } => NFunction::anisotropic_separable(dim, *exponents)?,
            StressKind::Custom(_) => {
                return Err(invalid("custom stress needs an explicit N-function; use StressModel::custom"))
            }
        };
        let nfunction = base.scaled(viscosity.low)?;
        Ok(Self { dim, kind, viscosity, nfunction, coercivity_const: 1.0 })
    }

    pub fn power_law(dim: usize, p: f64, viscosity: Viscosity) -> Result<Self> {
        Self::new(dim, StressKind::PowerLaw { p }, viscosity)
    }

    pub fn carreau(dim: usize, p: f64, viscosity: Viscosity) -> Result<Self> {
        Self::new(dim, StressKind::Carreau { p }, viscosity)
    }

    pub fn custom(
        nfunction: NFunction,
        coercivity_const: f64,
        s: impl Fn(&[f64], f64, f64, &SymMat) -> SymMat + Send + Sync + 'static,
    ) -> Result<Self> {
        check_cc(coercivity_const)?;
        Ok(Self {
            dim: nfunction.dim(),
            kind: StressKind::Custom(Arc::new(s)),
            viscosity: Viscosity::constant(1.0),
            nfunction,
            coercivity_const,
        })
    }

    /// Replaces the paired N-function (the coercivity constant is kept).
    pub fn with_nfunction(mut self, nfunction: NFunction) -> Result<Self> {
        if nfunction.dim() != self.dim {
            return Err(invalid("N-function dimension does not match the stress model"));
        }
        self.nfunction = nfunction;
        Ok(self)
    }

    pub fn with_coercivity_const(mut self, c: f64) -> Result<Self> {
        check_cc(c)?;
        self.coercivity_const = c;
        Ok(self)
    }

    /// Estimates `c_c` by sampling and stores it on the model.
    pub fn calibrated(self, spec: &AdmissibilitySpec) -> Result<Self> {
        let c = self.estimate_coercivity_const(spec)?;
        self.with_coercivity_const(c)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &StressKind {
        &self.kind
    }

    pub fn viscosity(&self) -> &Viscosity {
        &self.viscosity
    }

    pub fn nfunction(&self) -> &NFunction {
        &self.nfunction
    }

    pub fn coercivity_const(&self) -> f64 {
        self.coercivity_const
    }

    /// Growth exponent `p` used by the hypothesis checks (the lower one for
    /// variable or anisotropic exponents).
    pub fn growth_exponent(&self) -> Option<f64> {
        match &self.kind {
            StressKind::PowerLaw { p } | StressKind::Carreau { p } => Some(*p),
            StressKind::VariableExponent { exponent } => Some(exponent.min()),
            StressKind::AnisotropicSeparable { exponents } => {
                let mut pmin = f64::INFINITY;
                for i in 0..self.dim {
                    for j in 0..self.dim {
                        pmin = pmin.min(0.5 * (exponents[i][j] + exponents[j][i]));
                    }
                }
                Some(pmin)
            }
            StressKind::Custom(_) => self.nfunction.lower_bound().map(|lb| lb.power),
        }
    }

    /// `S(x, rho, theta, K)`; zero at `K = 0`.
    pub fn stress(&self, x: &[f64], rho: f64, theta: f64, k: &SymMat) -> Result<SymMat> {
        if !(rho > 0.0) || !(theta > 0.0) {
            return Err(invalid(format!("stress needs rho > 0 and theta > 0, got rho={rho}, theta={theta}")));
        }
        if k.dim() != self.dim || !k.is_finite() {
            return Err(invalid("strain rate has wrong dimension or non-finite entries"));
        }
        Ok(self.stress_unchecked(x, rho, theta, k))
    }

    /// [`StressModel::stress`] without argument validation.
    #[inline]
    pub fn stress_unchecked(&self, x: &[f64], rho: f64, theta: f64, k: &SymMat) -> SymMat {
        if k.is_zero() {
            return SymMat::zeros(self.dim);
        }
        let mu = || self.viscosity.at(rho, theta);
        match &self.kind {
            StressKind::PowerLaw { p } => *k * (mu() * k.norm().powf(p - 2.0)),
            StressKind::Carreau { p } => *k * (mu() * (1.0 + k.norm_sq()).powf(0.5 * (p - 2.0))),
            StressKind::VariableExponent { exponent } => *k * (mu() * k.norm().powf(exponent.at(x) - 2.0)),
            StressKind::AnisotropicSeparable { exponents } => {
                let m = mu();
                let mut s = SymMat::zeros(self.dim);
                for i in 0..self.dim {
                    for j in i..self.dim {
                        let v = k.get(i, j);
                        if v != 0.0 {
                            let p = 0.5 * (exponents[i][j] + exponents[j][i]);
                            s.set(i, j, m * v.abs().powf(p - 2.0) * v);
                        }
                    }
                }
                s
            }
            StressKind::Custom(f) => f(x, rho, theta, k),
        }
    }

    /// Empirical `inf S:K / (M + M*)` over the spec's samples, clipped to
    /// `(0, 1]`. Samples with `M + M* = 0` are skipped.
    pub fn estimate_coercivity_const(&self, spec: &AdmissibilitySpec) -> Result<f64> {
        let samples = spec.draw_samples(self.dim)?;
        let ratios: Vec<Result<Option<f64>>> = samples
            .par_iter()
            .map(|s| {
                let st = self.stress_unchecked(&s.x, s.rho, s.theta, &s.k);
                let m = self.nfunction.value(&s.x, &s.k);
                let mstar = self.nfunction.conjugate(&s.x, &st, &spec.conjugate)?;
                let denom = m + mstar;
                Ok((denom > 0.0).then(|| st.ddot(&s.k) / denom))
            })
            .collect();
        let mut inf = f64::INFINITY;
        for r in ratios {
            if let Some(v) = r? {
                inf = inf.min(v);
            }
        }
        if !inf.is_finite() {
            return Ok(1.0);
        }
        Ok(inf.clamp(f64::MIN_POSITIVE, 1.0))
    }
}

fn check_cc(c: f64) -> Result<()> {
    if !(c > 0.0 && c <= 1.0) {
        return Err(invalid(format!("coercivity constant {c} must lie in (0, 1]")));
    }
    Ok(())
}

/// `kappa(rho) = k0 (1 + a rho)` clipped to `[low, high]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conductivity {
    pub k0: f64,
    pub a: f64,
    pub low: f64,
    pub high: f64,
}

impl Conductivity {
    pub fn constant(kappa: f64) -> Self {
        Self { k0: kappa, a: 0.0, low: kappa, high: kappa }
    }

    #[inline]
    pub fn at(&self, rho: f64) -> f64 {
        (self.k0 * (1.0 + self.a * rho)).clamp(self.low, self.high)
    }
}

/// Fourier-type heat flux with conductivity `kappa(rho) theta^beta`.
///
/// The flux is reported as `q = kappa0 grad theta`, the sign convention
/// under which the bounds read `q . g >= kappa_low theta^beta |g|^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatFluxModel {
    pub kappa: Conductivity,
    pub beta: f64,
}

impl HeatFluxModel {
    pub fn new(kappa: Conductivity, beta: f64) -> Result<Self> {
        if !(kappa.low > 0.0 && kappa.high >= kappa.low) || !beta.is_finite() {
            return Err(invalid("conductivity bounds must satisfy 0 < low <= high and beta finite"));
        }
        Ok(Self { kappa, beta })
    }

    pub fn fourier(kappa: f64) -> Self {
        Self { kappa: Conductivity::constant(kappa), beta: 0.0 }
    }

    /// `kappa0(rho, theta) = kappa(rho) theta^beta`.
    #[inline]
    pub fn kappa0(&self, rho: f64, theta: f64) -> f64 {
        if self.beta == 0.0 {
            self.kappa.at(rho)
        } else {
            self.kappa.at(rho) * theta.powf(self.beta)
        }
    }

    pub fn heat_flux(&self, rho: f64, theta: f64, g: &[f64]) -> Result<Vec<f64>> {
        if !(rho > 0.0) {
            return Err(invalid("heat flux needs rho > 0"));
        }
        if !(theta > 0.0) && self.beta != 0.0 {
            return Err(invalid(format!("theta^beta is singular at theta={theta}, beta={}", self.beta)));
        }
        let k = self.kappa0(rho, theta);
        Ok(g.iter().map(|v| k * v).collect())
    }
}

/// Sampling plan for the admissibility checks.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibilitySpec {
    pub x_points: Vec<Vec<f64>>,
    pub rho_range: (f64, f64),
    pub theta_range: (f64, f64),
    pub radius_min: f64,
    pub radius_max: f64,
    pub samples: usize,
    pub pairs: usize,
    pub seed: u64,
    /// Coercivity residual tolerance, scaled by `1 + |K|^p`.
    pub tol: f64,
    pub monotonicity_tol: f64,
    pub conjugate: ConjugateParams,
}

impl AdmissibilitySpec {
    /// `10^4` samples and pairs over a `per_dim^dim` torus lattice.
    pub fn torus(dim: usize, per_dim: usize) -> Self {
        Self {
            x_points: AxiomSampleSpec::torus(dim, per_dim).x_points,
            rho_range: (0.5, 2.0),
            theta_range: (0.5, 2.0),
            radius_min: 1e-3,
            radius_max: 1e3,
            samples: 10_000,
            pairs: 10_000,
            seed: 0,
            tol: 1e-10,
            monotonicity_tol: 1e-12,
            conjugate: ConjugateParams::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.x_points.is_empty() {
            return Err(invalid("admissibility spec needs x points"));
        }
        if !(self.rho_range.0 > 0.0 && self.rho_range.1 >= self.rho_range.0) {
            return Err(invalid("rho range must be positive and ordered"));
        }
        if !(self.theta_range.0 > 0.0 && self.theta_range.1 >= self.theta_range.0) {
            return Err(invalid("theta range must be positive and ordered"));
        }
        if !(self.radius_min > 0.0 && self.radius_max >= self.radius_min) {
            return Err(invalid("radius range must be positive and ordered"));
        }
        Ok(())
    }

    fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
        if hi > lo {
            rng.gen_range(lo..hi)
        } else {
            lo
        }
    }

    fn radius(&self, rng: &mut ChaCha8Rng) -> f64 {
        Self::uniform(rng, (self.radius_min.ln(), self.radius_max.ln())).exp()
    }

    fn point(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.x_points[rng.gen_range(0..self.x_points.len())].clone()
    }

    fn draw_samples(&self, dim: usize) -> Result<Vec<Sample>> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        Ok((0..self.samples)
            .map(|_| {
                let x = self.point(&mut rng);
                let rho = Self::uniform(&mut rng, self.rho_range);
                let theta = Self::uniform(&mut rng, self.theta_range);
                let k = SymMat::random_unit(dim, &mut rng) * self.radius(&mut rng);
                Sample { x, rho, theta, k }
            })
            .collect())
    }
}

struct Sample {
    x: Vec<f64>,
    rho: f64,
    theta: f64,
    k: SymMat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibilityReport {
    pub seed: u64,
    pub coercivity_const: f64,
    /// Worst `(S:K - c_c (M + M*)) / (1 + |K|^p)`.
    pub coercivity: AxiomCheck,
    /// Worst `(S(K1) - S(K2)) : (K1 - K2)`.
    pub monotonicity: AxiomCheck,
    /// Worst `(kappa_low theta^beta |g|^2 - q.g) / (1 + theta^beta |g|^2)`.
    pub heat_lower: AxiomCheck,
    /// Worst `(|q| - kappa_high theta^beta |g|) / (1 + theta^beta |g|)`.
    pub heat_upper: AxiomCheck,
}

impl AdmissibilityReport {
    pub fn checks(&self) -> [&AxiomCheck; 4] {
        [&self.coercivity, &self.monotonicity, &self.heat_lower, &self.heat_upper]
    }

    pub fn all_passed(&self) -> bool {
        self.checks().iter().all(|c| c.passed)
    }
}

fn worst_of(values: Vec<(f64, String)>, name: &'static str, pass: impl Fn(f64) -> bool, minimize: bool) -> AxiomCheck {
    let mut worst = if minimize { f64::INFINITY } else { f64::NEG_INFINITY };
    let mut witness = String::new();
    for (v, w) in values {
        let better = if minimize { v < worst } else { v > worst };
        if better || v.is_nan() {
            worst = v;
            witness = w;
            if v.is_nan() {
                break;
            }
        }
    }
    let passed = !worst.is_nan() && pass(worst);
    AxiomCheck { name, passed, worst, witness }
}

fn fmt_vec(x: &[f64]) -> String {
    let p: Vec<String> = x.iter().map(|v| format!("{v:.4}")).collect();
    format!("({})", p.join(", "))
}

/// Samples coercivity, monotonicity and both heat-flux bounds.
pub fn check_admissibility(
    model: &StressModel,
    heat: &HeatFluxModel,
    spec: &AdmissibilitySpec,
) -> Result<AdmissibilityReport> {
    let d = model.dim;
    let p = model.growth_exponent().unwrap_or(2.0);
    let cc = model.coercivity_const;
    let samples = spec.draw_samples(d)?;

    let coercive: Vec<Result<(f64, String)>> = samples
        .par_iter()
        .map(|s| {
            let st = model.stress_unchecked(&s.x, s.rho, s.theta, &s.k);
            let m = model.nfunction.value(&s.x, &s.k);
            let mstar = model.nfunction.conjugate(&s.x, &st, &spec.conjugate)?;
            let r = (st.ddot(&s.k) - cc * (m + mstar)) / (1.0 + s.k.norm().powf(p));
            Ok((r, format!("x={} rho={:.4} theta={:.4} |K|={:.4e}", fmt_vec(&s.x), s.rho, s.theta, s.k.norm())))
        })
        .collect();
    let coercive = coercive.into_iter().collect::<Result<Vec<_>>>()?;
    let tol = spec.tol;
    let coercivity = worst_of(coercive, "coercivity", |w| w >= -tol, true);

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x9e37_79b9_7f4a_7c15);
    let pairs: Vec<(Vec<f64>, f64, f64, SymMat, SymMat)> = (0..spec.pairs)
        .map(|_| {
            let x = spec.point(&mut rng);
            let rho = AdmissibilitySpec::uniform(&mut rng, spec.rho_range);
            let theta = AdmissibilitySpec::uniform(&mut rng, spec.theta_range);
            let k1 = SymMat::random_unit(d, &mut rng) * spec.radius(&mut rng);
            let k2 = SymMat::random_unit(d, &mut rng) * spec.radius(&mut rng);
            (x, rho, theta, k1, k2)
        })
        .collect();
    let mono: Vec<(f64, String)> = pairs
        .par_iter()
        .map(|(x, rho, theta, k1, k2)| {
            let s1 = model.stress_unchecked(x, *rho, *theta, k1);
            let s2 = model.stress_unchecked(x, *rho, *theta, k2);
            let v = (s1 - s2).ddot(&(*k1 - *k2));
            (v, format!("x={} |K1|={:.4e} |K2|={:.4e}", fmt_vec(x), k1.norm(), k2.norm()))
        })
        .collect();
    let mtol = spec.monotonicity_tol;
    let monotonicity = worst_of(mono, "monotonicity", |w| w >= -mtol, true);

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x5851_f42d_4c95_7f2d);
    let mut lower = Vec::with_capacity(spec.samples);
    let mut upper = Vec::with_capacity(spec.samples);
    for _ in 0..spec.samples {
        let rho = AdmissibilitySpec::uniform(&mut rng, spec.rho_range);
        let theta = AdmissibilitySpec::uniform(&mut rng, spec.theta_range);
        let r = spec.radius(&mut rng);
        let g: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0) * r).collect();
        let q = heat.heat_flux(rho, theta, &g)?;
        let tb = if heat.beta == 0.0 { 1.0 } else { theta.powf(heat.beta) };
        let g2: f64 = g.iter().map(|v| v * v).sum();
        let qg: f64 = q.iter().zip(&g).map(|(a, b)| a * b).sum();
        let qn = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        let w = format!("rho={rho:.4} theta={theta:.4} |g|={:.4e}", g2.sqrt());
        lower.push(((heat.kappa.low * tb * g2 - qg) / (1.0 + tb * g2), w.clone()));
        upper.push(((qn - heat.kappa.high * tb * g2.sqrt()) / (1.0 + tb * g2.sqrt()), w));
    }
    let heat_lower = worst_of(lower, "heat-flux-lower", |w| w <= tol, false);
    let heat_upper = worst_of(upper, "heat-flux-upper", |w| w <= tol, false);

    Ok(AdmissibilityReport { seed: spec.seed, coercivity_const: cc, coercivity, monotonicity, heat_lower, heat_upper })
}

/// Bounds of the initial data and the declared bounds they must respect.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DataBounds {
    pub rho_low: f64,
    pub rho_high: f64,
    pub rho0_min: f64,
    pub rho0_max: f64,
    pub theta_low: f64,
    pub theta0_min: f64,
}

/// One hypothesis line; informational lines never gate the verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisCheck {
    pub name: &'static str,
    pub passed: bool,
    pub informational: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisVerdict {
    pub checks: Vec<HypothesisCheck>,
}

impl HypothesisVerdict {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().filter(|c| !c.informational).all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&HypothesisCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> Vec<&HypothesisCheck> {
        self.checks.iter().filter(|c| !c.informational && !c.passed).collect()
    }
}

/// Smallest admissible growth exponent `(3d + 2) / (d + 2)`.
pub fn exponent_threshold(d: usize) -> f64 {
    (3.0 * d as f64 + 2.0) / (d as f64 + 2.0)
}

/// `min{2/3, (3p - 5) / (3p - 3)}`; `beta` must exceed its negative.
pub fn beta_threshold(p: f64) -> f64 {
    (2.0 / 3.0f64).min((3.0 * p - 5.0) / (3.0 * p - 3.0))
}

fn threshold_label(d: usize) -> String {
    match d {
        2 => "p >= 2".to_string(),
        3 => "p >= 11/5".to_string(),
        _ => format!("p >= {}", exponent_threshold(d)),
    }
}

/// Checks the growth, conjugate-doubling, temperature-exponent and data
/// hypotheses of the existence theory. Always returns a verdict.
pub fn validate_hypotheses(
    model: &StressModel,
    heat: &HeatFluxModel,
    d: usize,
    data: &DataBounds,
) -> HypothesisVerdict {
    let mut checks = Vec::new();
    let p = model.growth_exponent();
    let pth = exponent_threshold(d);
    checks.push(match p {
        Some(p) => HypothesisCheck {
            name: "growth-exponent",
            passed: p >= pth - 1e-12,
            informational: false,
            detail: format!("{} (d = {d}); p = {p}", threshold_label(d)),
        },
        None => HypothesisCheck {
            name: "growth-exponent",
            passed: false,
            informational: false,
            detail: format!("{}: growth exponent unknown for this model", threshold_label(d)),
        },
    });

    let params = ConjugateParams::default();
    let conj = model.nfunction.conjugate_function(params);
    let mut axiom_spec = AxiomSampleSpec::torus(model.dim, 2);
    axiom_spec.directions = 4;
    axiom_spec.triples = 50;
    match conj.check_axioms(&axiom_spec) {
        Ok(rep) => {
            checks.push(HypothesisCheck {
                name: "conjugate-delta2",
                passed: rep.delta2 == Delta2Verdict::Plausible,
                informational: false,
                detail: format!(
                    "M* {}; top doubling ratio {:.6e}",
                    rep.delta2.as_str(),
                    rep.delta2_ratios.last().copied().unwrap_or(f64::NAN)
                ),
            });
            let sup = rep.check("superlinearity");
            checks.push(HypothesisCheck {
                name: "conjugate-superlinear",
                passed: sup.map_or(false, |c| c.passed),
                informational: true,
                detail: format!("M*(x, s)/s grows from {:.6e} to {:.6e}", rep.slope_bottom, rep.slope_top),
            });
        }
        Err(e) => checks.push(HypothesisCheck {
            name: "conjugate-delta2",
            passed: false,
            informational: false,
            detail: format!("conjugate probe failed: {e}"),
        }),
    }

    match p {
        Some(p) => {
            let bt = beta_threshold(p);
            checks.push(HypothesisCheck {
                name: "temperature-exponent",
                passed: heat.beta > -bt,
                informational: false,
                detail: format!("beta > -min{{2/3, (3p-5)/(3p-3)}} = {:.6}; beta = {}", -bt, heat.beta),
            });
        }
        None => checks.push(HypothesisCheck {
            name: "temperature-exponent",
            passed: false,
            informational: false,
            detail: "growth exponent unknown".to_string(),
        }),
    }

    checks.push(HypothesisCheck {
        name: "density-bounds",
        passed: data.rho_low > 0.0 && data.rho_low <= data.rho0_min && data.rho0_max <= data.rho_high,
        informational: false,
        detail: format!(
            "0 < rho_low = {} <= rho0 in [{}, {}] <= rho_high = {}",
            data.rho_low, data.rho0_min, data.rho0_max, data.rho_high
        ),
    });
    checks.push(HypothesisCheck {
        name: "temperature-floor",
        passed: data.theta_low > 0.0 && data.theta0_min >= data.theta_low,
        informational: false,
        detail: format!("theta0 >= {} >= theta_low = {} > 0", data.theta0_min, data.theta_low),
    });
    HypothesisVerdict { checks }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec(dim: usize) -> AdmissibilitySpec {
        let mut s = AdmissibilitySpec::torus(dim, 3);
        s.samples = 2000;
        s.pairs = 2000;
        s
    }

    fn good_data() -> DataBounds {
        DataBounds { rho_low: 0.5, rho_high: 2.0, rho0_min: 0.8, rho0_max: 1.5, theta_low: 0.5, theta0_min: 1.0 }
    }

    #[test]
    fn power_law_stress_at_unit_strain() {
        let m = StressModel::power_law(2, 3.0, Viscosity::constant(1.0)).unwrap();
        let s = m.stress(&[0.0, 0.0], 1.0, 1.0, &SymMat::diag(&[1.0, 0.0])).unwrap();
        assert_eq!(s, SymMat::diag(&[1.0, 0.0]));
    }

    #[test]
    fn every_model_vanishes_at_zero_strain() {
        let v = Viscosity { mu0: 1.0, a: 0.3, b: 0.2, low: 0.5, high: 3.0 };
        let kinds = [
            StressKind::PowerLaw { p: 2.5 },
            StressKind::Carreau { p: 2.2 },
            StressKind::VariableExponent { exponent: ExponentField { base: 2.2, amplitude: 0.5 } },
            StressKind::AnisotropicSeparable { exponents: [[2.2, 2.5, 3.0], [2.5, 2.4, 2.6], [3.0, 2.6, 2.8]] },
        ];
        for kind in kinds {
            let m = StressModel::new(3, kind, v).unwrap();
            assert!(m.stress(&[0.1, 0.2, 0.3], 1.0, 1.0, &SymMat::zeros(3)).unwrap().is_zero());
        }
    }

    #[test]
    fn quadratic_carreau_is_newtonian() {
        let m = StressModel::carreau(2, 2.0, Viscosity::constant(1.0)).unwrap();
        let mut k = SymMat::diag(&[0.3, -0.7]);
        k.set(0, 1, 1.1);
        assert_eq!(m.stress(&[0.0, 0.0], 1.0, 1.0, &k).unwrap(), k);
    }

    #[test]
    fn stress_rejects_bad_state() {
        let m = StressModel::power_law(2, 3.0, Viscosity::constant(1.0)).unwrap();
        let k = SymMat::identity(2);
        assert!(m.stress(&[0.0, 0.0], 0.0, 1.0, &k).is_err());
        assert!(m.stress(&[0.0, 0.0], 1.0, -1.0, &k).is_err());
    }

    #[test]
    fn heat_flux_cases() {
        let h = HeatFluxModel::fourier(1.0);
        assert_eq!(h.heat_flux(1.0, 2.0, &[0.5, -1.0]).unwrap(), vec![0.5, -1.0]);
        assert_eq!(h.heat_flux(1.0, 2.0, &[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        let hb = HeatFluxModel::new(Conductivity::constant(0.7), -0.3).unwrap();
        let g = [0.4, 0.9];
        let q = hb.heat_flux(1.0, 1.5, &g).unwrap();
        let qg: f64 = q.iter().zip(&g).map(|(a, b)| a * b).sum();
        let bound = 0.7 * 1.5f64.powf(-0.3) * (0.16 + 0.81);
        assert!((qg - bound).abs() < 1e-15);
        assert!(hb.heat_flux(1.0, 0.0, &g).is_err());
    }

    #[test]
    fn power_law_coercivity_is_an_identity() {
        let m = StressModel::power_law(3, 2.2, Viscosity::constant(1.0)).unwrap();
        let rep = check_admissibility(&m, &HeatFluxModel::fourier(1.0), &small_spec(3)).unwrap();
        assert!(rep.all_passed(), "{rep:?}");
        assert!(rep.coercivity.worst.abs() < 1e-10);
        let c = m.estimate_coercivity_const(&small_spec(3)).unwrap();
        assert!((c - 1.0).abs() < 1e-10);
    }

    #[test]
    fn builtin_models_are_admissible() {
        let v = Viscosity { mu0: 1.0, a: 0.5, b: 0.5, low: 0.8, high: 2.5 };
        let heat = HeatFluxModel::new(Conductivity { k0: 1.0, a: 0.5, low: 0.5, high: 2.0 }, 0.5).unwrap();
        let kinds = [
            StressKind::PowerLaw { p: 2.5 },
            StressKind::Carreau { p: 2.2 },
            StressKind::VariableExponent { exponent: ExponentField { base: 2.2, amplitude: 0.6 } },
            StressKind::AnisotropicSeparable { exponents: [[2.2, 2.5, 0.0], [2.5, 3.0, 0.0], [0.0; 3]] },
        ];
        for kind in kinds {
            let spec = small_spec(2);
            let m = StressModel::new(2, kind, v).unwrap().calibrated(&spec).unwrap();
            assert!(m.coercivity_const() > 0.0 && m.coercivity_const() <= 1.0);
            let rep = check_admissibility(&m, &heat, &spec).unwrap();
            assert!(rep.all_passed(), "{:?}: {rep:?}", m.kind());
        }
    }

    #[test]
    fn weighted_power_law_constant_in_unit_interval() {
        // mu = 2 on both sides: S = 2|K|^(p-2)K and M = 2|K|^p/p give c_c = 1
        let m = StressModel::power_law(2, 2.5, Viscosity::constant(2.0)).unwrap();
        let c = m.estimate_coercivity_const(&small_spec(2)).unwrap();
        assert!((c - 1.0).abs() < 1e-10);
        // a mismatched weight gives a sampled infimum strictly below 1
        let m2 = StressModel::power_law(2, 2.5, Viscosity { mu0: 1.0, a: 1.0, b: 0.0, low: 1.0, high: 4.0 }).unwrap();
        let c2 = m2.estimate_coercivity_const(&small_spec(2)).unwrap();
        assert!(c2 > 0.0 && c2 < 1.0);
    }

    #[test]
    fn carreau_against_power_potential() {
        let m = StressModel::carreau(2, 2.5, Viscosity::constant(1.0))
            .unwrap()
            .with_nfunction(NFunction::power(2, 2.5).unwrap())
            .unwrap();
        let c = m.estimate_coercivity_const(&small_spec(2)).unwrap();
        assert!(c > 0.0 && c <= 1.0);
    }

    #[test]
    fn scalar_monotonicity() {
        let m = StressModel::power_law(1, 1.5, Viscosity::constant(1.0)).unwrap();
        let mut spec = small_spec(1);
        spec.x_points = vec![vec![0.0]];
        let rep = check_admissibility(&m, &HeatFluxModel::fourier(1.0), &spec).unwrap();
        assert!(rep.monotonicity.worst >= -1e-12);
    }

    #[test]
    fn exponent_thresholds() {
        assert!((exponent_threshold(3) - 2.2).abs() < 1e-15);
        assert_eq!(exponent_threshold(2), 2.0);
        // (3 * 2.2 - 5) / (3 * 2.2 - 3) = 1.6 / 3.6
        assert!((beta_threshold(2.2) - 4.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn validator_cases() {
        let heat = |beta| HeatFluxModel::new(Conductivity::constant(1.0), beta).unwrap();
        let m = StressModel::power_law(3, 11.0 / 5.0, Viscosity::constant(1.0)).unwrap();
        let v = validate_hypotheses(&m, &heat(0.0), 3, &good_data());
        assert!(v.check("growth-exponent").unwrap().passed);
        assert!(v.all_passed(), "{v:?}");
        assert!(!validate_hypotheses(&m, &heat(-0.5), 3, &good_data()).check("temperature-exponent").unwrap().passed);
        assert!(validate_hypotheses(&m, &heat(-0.4), 3, &good_data()).check("temperature-exponent").unwrap().passed);
        let m2 = StressModel::power_law(3, 2.0, Viscosity::constant(1.0)).unwrap();
        let v2 = validate_hypotheses(&m2, &heat(0.0), 3, &good_data());
        let g = v2.check("growth-exponent").unwrap();
        assert!(!g.passed && g.detail.contains("p >= 11/5"));
        let mut bad = good_data();
        bad.theta0_min = 0.1;
        assert!(!validate_hypotheses(&m, &heat(0.0), 3, &bad).all_passed());
    }

    #[test]
    fn carreau_conjugate_is_doubling() {
        let m = StressModel::carreau(2, 2.2, Viscosity::constant(1.0)).unwrap();
        let v = validate_hypotheses(&m, &HeatFluxModel::fourier(1.0), 2, &good_data());
        assert!(v.check("conjugate-delta2").unwrap().passed, "{v:?}");
    }
}
