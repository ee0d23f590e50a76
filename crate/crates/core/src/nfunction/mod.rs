//! Anisotropic, x-dependent N-functions `M(x, K)` over symmetric matrices.
//!
//! An [`NFunction`] is immutable once built and cheap to clone (closures
//! are reference counted), so it can be shared freely between threads.
//! Built-in families use the `/p` normalization, e.g. `M = |K|^p / p`, so
//! that the complementary function has the mirrored form `|L|^p' / p'`.

mod axioms;
mod conjugate;

use std::fmt;
use std::sync::Arc;

pub use axioms::{AxiomCheck, AxiomReport, AxiomSampleSpec, Delta2Verdict};
pub use conjugate::{conjugate_table, ConjugateParams, ConjugateRow};

use crate::error::{invalid, Result};
use crate::tensor::SymMat;

type RadialFn = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;
type MatrixFn = Arc<dyn Fn(&[f64], &SymMat) -> f64 + Send + Sync>;

/// Family tag of an N-function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NFunctionKind {
    IsotropicPower,
    VariableExponent,
    AnisotropicSeparable,
    Carreau,
    Custom,
}

impl NFunctionKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            NFunctionKind::IsotropicPower => "isotropic-power",
            NFunctionKind::VariableExponent => "variable-exponent",
            NFunctionKind::AnisotropicSeparable => "anisotropic-separable",
            NFunctionKind::Carreau => "carreau",
            NFunctionKind::Custom => "custom",
        }
    }
}

/// Smooth exponent field `p(x) = base + amplitude * sin^2(x_1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentField {
    pub base: f64,
    pub amplitude: f64,
}

impl ExponentField {
    pub fn constant(p: f64) -> Self {
        Self { base: p, amplitude: 0.0 }
    }

    #[inline]
    pub fn at(&self, x: &[f64]) -> f64 {
        let s = x.first().map_or(0.0, |x1| x1.sin());
        self.base + self.amplitude * s * s
    }

    /// Lower exponent `p_-`.
    pub fn min(&self) -> f64 {
        self.base + self.amplitude.min(0.0)
    }

    /// Upper exponent `p_+`.
    pub fn max(&self) -> f64 {
        self.base + self.amplitude.max(0.0)
    }
}

/// Coercive lower bound `M(x, K) >= c |K|^p - C`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowerBound {
    pub power: f64,
    pub constant: f64,
    pub offset: f64,
}

/// Radial profile `phi(x, t)` with `M(x, K) = phi(x, |K|)`, optionally with
/// its first two derivatives in `t`.
#[derive(Clone)]
pub(crate) struct RadialProfile {
    pub value: RadialFn,
    pub slope: Option<RadialFn>,
    pub curvature: Option<RadialFn>,
}

#[derive(Clone)]
pub(crate) enum Form {
    Radial(RadialProfile),
    Matrix(MatrixFn),
}

impl Form {
    #[inline]
    fn eval(&self, x: &[f64], k: &SymMat) -> f64 {
        match self {
            Form::Radial(p) => (p.value)(x, k.norm()),
            Form::Matrix(f) => f(x, k),
        }
    }
}

/// An x-dependent N-function with optional analytic conjugate.
#[derive(Clone)]
pub struct NFunction {
    dim: usize,
    kind: NFunctionKind,
    label: String,
    pub(crate) form: Form,
    closed_conjugate: Option<Form>,
    lower: Option<LowerBound>,
}

impl fmt::Debug for NFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NFunction")
            .field("dim", &self.dim)
            .field("kind", &self.kind)
            .field("label", &self.label)
            .field("radial", &self.is_radial())
            .field("closed_conjugate", &self.closed_conjugate.is_some())
            .field("lower", &self.lower)
            .finish()
    }
}

fn radial(value: impl Fn(&[f64], f64) -> f64 + Send + Sync + 'static) -> RadialProfile {
    RadialProfile { value: Arc::new(value), slope: None, curvature: None }
}

fn check_dim(dim: usize) -> Result<()> {
    if !(1..=3).contains(&dim) {
        return Err(invalid(format!("dimension {dim} not in 1..=3")));
    }
    Ok(())
}

fn check_exponent(p: f64) -> Result<()> {
    if !(p.is_finite() && p > 1.0) {
        return Err(invalid(format!("exponent {p} must be finite and > 1")));
    }
    Ok(())
}

/// Conjugate exponent `p' = p / (p - 1)`.
#[inline]
pub fn conjugate_exponent(p: f64) -> f64 {
    p / (p - 1.0)
}

impl NFunction {
    /// `M(K) = |K|^p / p`.
    pub fn power(dim: usize, p: f64) -> Result<Self> {
        check_dim(dim)?;
        check_exponent(p)?;
        let q = conjugate_exponent(p);
        let mut profile = radial(move |_, t| t.powf(p) / p);
        profile.slope = Some(Arc::new(move |_, t| t.powf(p - 1.0)));
        profile.curvature = Some(Arc::new(move |_, t| (p - 1.0) * t.powf(p - 2.0)));
        Ok(Self {
            dim,
            kind: NFunctionKind::IsotropicPower,
            label: format!("|K|^{p}/{p}"),
            form: Form::Radial(profile),
            closed_conjugate: Some(Form::Radial(radial(move |_, s| s.powf(q) / q))),
            lower: Some(LowerBound { power: p, constant: 1.0 / p, offset: 0.0 }),
        })
    }

    /// `M(x, K) = |K|^p(x) / p(x)`.
    pub fn variable_exponent(dim: usize, exponent: ExponentField) -> Result<Self> {
        check_dim(dim)?;
        check_exponent(exponent.min())?;
        check_exponent(exponent.max())?;
        let e = exponent;
        let mut profile = radial(move |x, t| {
            let p = e.at(x);
            t.powf(p) / p
        });
        profile.slope = Some(Arc::new(move |x, t| t.powf(e.at(x) - 1.0)));
        profile.curvature = Some(Arc::new(move |x, t| {
            let p = e.at(x);
            (p - 1.0) * t.powf(p - 2.0)
        }));
        let (pm, pp) = (exponent.min(), exponent.max());
        Ok(Self {
            dim,
            kind: NFunctionKind::VariableExponent,
            label: format!("|K|^p(x)/p(x), p in [{pm}, {pp}]"),
            form: Form::Radial(profile),
            closed_conjugate: Some(Form::Radial(radial(move |x, s| {
                let q = conjugate_exponent(e.at(x));
                s.powf(q) / q
            }))),
            // |K| >= 1 gives |K|^p(x) >= |K|^p_-, and below 1 the term is at most 1/p_+.
            lower: Some(LowerBound { power: pm, constant: 1.0 / pp, offset: 1.0 / pp }),
        })
    }

    /// `M(K) = sum_ij |K_ij|^p_ij / p_ij` over all `d^2` entries, with a
    /// symmetric exponent table.
    pub fn anisotropic_separable(dim: usize, exponents: [[f64; 3]; 3]) -> Result<Self> {
        check_dim(dim)?;
        let mut table = [[0.0; 3]; 3];
        let (mut pmin, mut pmax) = (f64::INFINITY, 0.0f64);
        for i in 0..dim {
            for j in 0..dim {
                let p = 0.5 * (exponents[i][j] + exponents[j][i]);
                check_exponent(p)?;
                table[i][j] = p;
                pmin = pmin.min(p);
                pmax = pmax.max(p);
            }
        }
        let value = move |_: &[f64], k: &SymMat| {
            let mut s = 0.0;
            for i in 0..dim {
                for j in 0..dim {
                    let p = table[i][j];
                    s += k.get(i, j).abs().powf(p) / p;
                }
            }
            s
        };
        let conj = move |_: &[f64], l: &SymMat| {
            let mut s = 0.0;
            for i in 0..dim {
                for j in 0..dim {
                    let q = conjugate_exponent(table[i][j]);
                    s += l.get(i, j).abs().powf(q) / q;
                }
            }
            s
        };
        // |a|^p >= |a|^p_min - 1 per entry, then the l^p_min vs l^2 comparison
        // over the m = d^2 entries.
        let m = (dim * dim) as f64;
        let lower = if pmin >= 2.0 {
            LowerBound {
                power: pmin,
                constant: m.powf(1.0 - pmin / 2.0) / pmax,
                offset: m / pmax,
            }
        } else {
            LowerBound { power: pmin, constant: 1.0 / pmax, offset: m / pmax }
        };
        Ok(Self {
            dim,
            kind: NFunctionKind::AnisotropicSeparable,
            label: format!("sum |K_ij|^p_ij/p_ij, p in [{pmin}, {pmax}]"),
            form: Form::Matrix(Arc::new(value)),
            closed_conjugate: Some(Form::Matrix(Arc::new(conj))),
            lower: Some(lower),
        })
    }

    /// Carreau potential `M(K) = ((1 + |K|^2)^(p/2) - 1) / p`, whose
    /// gradient is the Carreau stress `(1 + |K|^2)^((p-2)/2) K`.
    pub fn carreau(dim: usize, p: f64) -> Result<Self> {
        check_dim(dim)?;
        check_exponent(p)?;
        if p < 2.0 {
            return Err(invalid(format!("Carreau potential needs p >= 2, got {p}")));
        }
        let mut profile = radial(move |_, t| ((1.0 + t * t).powf(0.5 * p) - 1.0) / p);
        profile.slope = Some(Arc::new(move |_, t| (1.0 + t * t).powf(0.5 * p - 1.0) * t));
        profile.curvature = Some(Arc::new(move |_, t| {
            let a = 1.0 + t * t;
            a.powf(0.5 * p - 2.0) * (1.0 + (p - 1.0) * t * t)
        }));
        Ok(Self {
            dim,
            kind: NFunctionKind::Carreau,
            label: format!("((1+|K|^2)^({p}/2)-1)/{p}"),
            form: Form::Radial(profile),
            closed_conjugate: None,
            lower: Some(LowerBound { power: p, constant: 1.0 / p, offset: 1.0 / p }),
        })
    }

    /// `M(K) = exp(|K|) - |K| - 1`, the classic function without the
    /// doubling property.
    pub fn exponential(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        let mut profile = radial(|_, t| t.exp_m1() - t);
        profile.slope = Some(Arc::new(|_, t| t.exp_m1()));
        profile.curvature = Some(Arc::new(|_, t| t.exp()));
        Ok(Self {
            dim,
            kind: NFunctionKind::Custom,
            label: "exp(|K|)-|K|-1".to_string(),
            form: Form::Radial(profile),
            closed_conjugate: Some(Form::Radial(radial(|_, s| (1.0 + s) * s.ln_1p() - s))),
            // e^t - t - 1 >= t^3 / 6
            lower: Some(LowerBound { power: 3.0, constant: 1.0 / 6.0, offset: 0.0 }),
        })
    }

    /// Isotropic custom function `M(x, K) = phi(x, |K|)`.
    pub fn custom_radial(
        dim: usize,
        label: impl Into<String>,
        lower: Option<LowerBound>,
        phi: impl Fn(&[f64], f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self {
            dim,
            kind: NFunctionKind::Custom,
            label: label.into(),
            form: Form::Radial(radial(phi)),
            closed_conjugate: None,
            lower,
        })
    }

    /// Fully general custom function of `(x, K)`.
    pub fn custom(
        dim: usize,
        label: impl Into<String>,
        lower: Option<LowerBound>,
        m: impl Fn(&[f64], &SymMat) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self {
            dim,
            kind: NFunctionKind::Custom,
            label: label.into(),
            form: Form::Matrix(Arc::new(m)),
            closed_conjugate: None,
            lower,
        })
    }

    /// `c * M`, with conjugate `c * M*(L / c)`.
    pub fn scaled(self, c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(invalid(format!("scale {c} must be positive")));
        }
        if c == 1.0 {
            return Ok(self);
        }
        let form = match self.form {
            Form::Radial(p) => {
                let v = p.value.clone();
                let mut out = radial(move |x, t| c * v(x, t));
                if let Some(s) = p.slope {
                    out.slope = Some(Arc::new(move |x, t| c * s(x, t)));
                }
                if let Some(h) = p.curvature {
                    out.curvature = Some(Arc::new(move |x, t| c * h(x, t)));
                }
                Form::Radial(out)
            }
            Form::Matrix(f) => Form::Matrix(Arc::new(move |x, k| c * f(x, k))),
        };
        let closed_conjugate = self.closed_conjugate.map(|cf| match cf {
            Form::Radial(p) => {
                let v = p.value;
                Form::Radial(radial(move |x, s| c * v(x, s / c)))
            }
            Form::Matrix(f) => Form::Matrix(Arc::new(move |x, l| c * f(x, &(*l * (1.0 / c))))),
        });
        Ok(Self {
            dim: self.dim,
            kind: self.kind,
            label: format!("{c} * ({})", self.label),
            form,
            closed_conjugate,
            lower: self.lower.map(|lb| LowerBound {
                power: lb.power,
                constant: c * lb.constant,
                offset: c * lb.offset,
            }),
        })
    }

    /// The complementary function `M*` as an N-function: the analytic form
    /// when one exists, a Newton solve for radial profiles with derivatives,
    /// otherwise [`NFunction::numerical_conjugate`].
    pub fn conjugate_function(&self, params: ConjugateParams) -> Self {
        let label = format!("({})*", self.label);
        if let Some(form) = &self.closed_conjugate {
            return Self {
                dim: self.dim,
                kind: NFunctionKind::Custom,
                label,
                form: form.clone(),
                closed_conjugate: Some(self.form.clone()),
                lower: None,
            };
        }
        if let Form::Radial(p) = &self.form {
            if p.slope.is_some() && p.curvature.is_some() {
                let nf = self.clone();
                return Self {
                    dim: self.dim,
                    kind: NFunctionKind::Custom,
                    label,
                    form: Form::Radial(radial(move |x, s| {
                        nf.radial_conjugate_newton(x, s, &params).unwrap_or(f64::INFINITY)
                    })),
                    closed_conjugate: Some(self.form.clone()),
                    lower: None,
                };
            }
        }
        self.numerical_conjugate(params)
    }

    /// The complementary function as an N-function in its own right,
    /// evaluated by numerical conjugation. Failed maximizations evaluate to
    /// `+inf` (the supremum is unbounded).
    pub fn numerical_conjugate(&self, params: ConjugateParams) -> Self {
        let inner = self.clone();
        let label = format!("({})*", self.label);
        let form = match &self.form {
            Form::Radial(_) => {
                let nf = inner.clone();
                Form::Radial(radial(move |x, s| {
                    nf.radial_conjugate(x, s, &params, None).unwrap_or(f64::INFINITY)
                }))
            }
            Form::Matrix(_) => Form::Matrix(Arc::new(move |x, l| {
                inner.conjugate_value(x, l, &params).unwrap_or(f64::INFINITY)
            })),
        };
        Self {
            dim: self.dim,
            kind: NFunctionKind::Custom,
            label,
            form,
            closed_conjugate: None,
            lower: None,
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn kind(&self) -> NFunctionKind {
        self.kind
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn lower_bound(&self) -> Option<LowerBound> {
        self.lower
    }

    pub fn is_radial(&self) -> bool {
        matches!(self.form, Form::Radial(_))
    }

    pub fn has_closed_conjugate(&self) -> bool {
        self.closed_conjugate.is_some()
    }

    /// `M(x, K)` with input validation; exactly zero at `K = 0`.
    pub fn evaluate(&self, x: &[f64], k: &SymMat) -> Result<f64> {
        if !k.is_finite() {
            return Err(invalid("non-finite matrix entry"));
        }
        if k.dim() != self.dim {
            return Err(invalid(format!(
                "matrix dimension {} does not match N-function dimension {}",
                k.dim(),
                self.dim
            )));
        }
        Ok(self.value(x, k))
    }

    /// Unchecked evaluation for inner loops.
    #[inline]
    pub fn value(&self, x: &[f64], k: &SymMat) -> f64 {
        if k.is_zero() {
            return 0.0;
        }
        self.form.eval(x, k)
    }

    /// Analytic `M*(x, L)` when the family has one.
    pub fn closed_form_conjugate(&self, x: &[f64], l: &SymMat) -> Option<f64> {
        self.closed_conjugate.as_ref().map(|f| if l.is_zero() { 0.0 } else { f.eval(x, l) })
    }

    /// `M*(x, L)` by the cheapest accurate route: closed form, then a
    /// Newton solve of `phi'(t) = |L|` for radial profiles with derivatives,
    /// then the general numerical maximization.
    pub fn conjugate(&self, x: &[f64], l: &SymMat, params: &ConjugateParams) -> Result<f64> {
        if let Some(v) = self.closed_form_conjugate(x, l) {
            return Ok(v);
        }
        if let Form::Radial(p) = &self.form {
            if p.slope.is_some() && p.curvature.is_some() {
                return self.radial_conjugate_newton(x, l.norm(), params);
            }
        }
        self.conjugate_value(x, l, params)
    }

    /// Pointwise Fenchel-Young gap `M(x, K) + M*(x, L) - K : L`.
    ///
    /// The maximization is warm-started at `K`, so the numerical supremum is
    /// never below the value the pair `(K, L)` itself certifies.
    pub fn fenchel_young_gap(
        &self,
        x: &[f64],
        k: &SymMat,
        l: &SymMat,
        params: &ConjugateParams,
    ) -> Result<f64> {
        let m = self.evaluate(x, k)?;
        let mstar = self.conjugate_value_from(x, l, params, Some(k))?;
        Ok(m + mstar - k.ddot(l))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_square_of_identity() {
        let m = NFunction::power(2, 2.0).unwrap();
        let v = m.evaluate(&[0.0, 0.0], &SymMat::identity(2)).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_matrix_is_exact_zero() {
        for m in [
            NFunction::power(3, 2.5).unwrap(),
            NFunction::carreau(3, 2.2).unwrap(),
            NFunction::exponential(3).unwrap(),
            NFunction::anisotropic_separable(3, [[2.5; 3]; 3]).unwrap(),
        ] {
            assert_eq!(m.evaluate(&[0.1, 0.2, 0.3], &SymMat::zeros(3)).unwrap(), 0.0);
        }
    }

    #[test]
    fn variable_exponent_unit_radius() {
        let m = NFunction::variable_exponent(2, ExponentField { base: 2.0, amplitude: 1.0 }).unwrap();
        let k = SymMat::diag(&[1.0, 0.0]);
        assert_eq!(m.evaluate(&[0.0, 0.7], &k).unwrap(), 0.5);
    }

    #[test]
    fn non_finite_input_rejected() {
        let m = NFunction::power(2, 2.0).unwrap();
        let k = SymMat::diag(&[f64::NAN, 0.0]);
        assert!(matches!(m.evaluate(&[0.0, 0.0], &k), Err(crate::Error::InvalidInput(_))));
    }

    #[test]
    fn bad_exponent_rejected() {
        assert!(NFunction::power(2, 1.0).is_err());
        assert!(NFunction::carreau(2, 1.5).is_err());
        assert!(NFunction::power(4, 2.0).is_err());
    }

    #[test]
    fn scaled_closed_form_matches_formula() {
        // (c |K|^p / p)* (L) = c^(1 - p') |L|^p' / p'
        let (c, p) = (2.0, 3.0);
        let q = conjugate_exponent(p);
        let m = NFunction::power(2, p).unwrap().scaled(c).unwrap();
        let l = SymMat::diag(&[0.6, -0.8]);
        let v = m.closed_form_conjugate(&[0.0, 0.0], &l).unwrap();
        assert!((v - c.powf(1.0 - q) / q).abs() < 1e-14);
    }
}
