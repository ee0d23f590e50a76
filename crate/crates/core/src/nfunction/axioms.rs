//! Sampled structural checks of the N-function axioms and the doubling
//! (Delta_2) behaviour. Every verdict is empirical.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::NFunction;
use crate::error::{invalid, Result};
use crate::tensor::SymMat;

/// Where and how densely to probe an N-function.
#[derive(Debug, Clone, PartialEq)]
pub struct AxiomSampleSpec {
    pub x_points: Vec<Vec<f64>>,
    pub directions: usize,
    pub radius_min: f64,
    pub radius_max: f64,
    pub rungs: usize,
    /// Random `(K1, K2)` pairs for the midpoint-convexity test.
    pub triples: usize,
    pub seed: u64,
    /// Growth of the doubling ratio across the top three rungs that counts
    /// as a violation.
    pub delta2_factor: f64,
    pub tol: f64,
}

impl AxiomSampleSpec {
    /// Uniform `per_dim^dim` lattice on the `2 pi` torus with default ladder.
    pub fn torus(dim: usize, per_dim: usize) -> Self {
        let h = std::f64::consts::TAU / per_dim as f64;
        let total = per_dim.pow(dim as u32);
        let x_points = (0..total)
            .map(|mut idx| {
                let mut x = vec![0.0; dim];
                for c in (0..dim).rev() {
                    x[c] = (idx % per_dim) as f64 * h;
                    idx /= per_dim;
                }
                x
            })
            .collect();
        Self {
            x_points,
            directions: 16,
            radius_min: 1e-3,
            radius_max: 1e3,
            rungs: 12,
            triples: 200,
            seed: 0,
            delta2_factor: 2.0,
            tol: 1e-10,
        }
    }

    pub fn with_ladder(mut self, radius_min: f64, radius_max: f64, rungs: usize) -> Self {
        self.radius_min = radius_min;
        self.radius_max = radius_max;
        self.rungs = rungs;
        self
    }

    /// Log-spaced radius ladder.
    pub fn radii(&self) -> Vec<f64> {
        if self.rungs == 1 {
            return vec![self.radius_min];
        }
        let (a, b) = (self.radius_min.ln(), self.radius_max.ln());
        (0..self.rungs)
            .map(|i| (a + (b - a) * i as f64 / (self.rungs - 1) as f64).exp())
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if self.x_points.is_empty() || self.directions == 0 || self.rungs < 3 {
            return Err(invalid("sample spec needs x points, directions and at least 3 rungs"));
        }
        if !(self.radius_min > 0.0 && self.radius_max > self.radius_min) {
            return Err(invalid("radius ladder must satisfy 0 < min < max"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Delta2Verdict {
    Plausible,
    Violated,
}

impl Delta2Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Delta2Verdict::Plausible => "Delta2-plausible",
            Delta2Verdict::Violated => "Delta2-violated",
        }
    }
}

/// Outcome of one axiom test with its worst sampled value.
#[derive(Debug, Clone, PartialEq)]
pub struct AxiomCheck {
    pub name: &'static str,
    pub passed: bool,
    pub worst: f64,
    pub witness: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AxiomReport {
    pub checks: Vec<AxiomCheck>,
    pub radii: Vec<f64>,
    /// `sup_{x, E} M(x, 2 r E) / (M(x, r E) + 1)` per rung.
    pub delta2_ratios: Vec<f64>,
    pub delta2: Delta2Verdict,
    /// Largest `M(x, r E) / r` on the bottom rung.
    pub slope_bottom: f64,
    /// Smallest `M(x, r E) / r` on the top rung.
    pub slope_top: f64,
    pub seed: u64,
}

impl AxiomReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&AxiomCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn fmt_x(x: &[f64]) -> String {
    let parts: Vec<String> = x.iter().map(|v| format!("{v:.4}")).collect();
    format!("({})", parts.join(", "))
}

fn doubling_ratio(m1: f64, m2: f64) -> f64 {
    if !m2.is_finite() || !m1.is_finite() {
        f64::INFINITY
    } else {
        m2 / (m1 + 1.0)
    }
}

/// The ratio sequence is classified as violating the doubling bound when it
/// increases strictly over the top three rungs and grows there by more
/// than `factor`.
pub(crate) fn classify_delta2(ratios: &[f64], factor: f64) -> Delta2Verdict {
    let n = ratios.len();
    if n < 3 {
        return Delta2Verdict::Plausible;
    }
    let (a, b, c) = (ratios[n - 3], ratios[n - 2], ratios[n - 1]);
    if c.is_infinite() {
        return Delta2Verdict::Violated;
    }
    if a < b && b < c && c > factor * a {
        Delta2Verdict::Violated
    } else {
        Delta2Verdict::Plausible
    }
}

impl NFunction {
    /// Probes evenness, the zero axiom, midpoint convexity, superlinearity at
    /// both ends of the radius ladder, the coercive lower bound and the
    /// doubling ratio.
    pub fn check_axioms(&self, spec: &AxiomSampleSpec) -> Result<AxiomReport> {
        spec.validate()?;
        let dim = self.dim;
        let radii = spec.radii();
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let dirs: Vec<SymMat> = (0..spec.directions).map(|_| SymMat::random_unit(dim, &mut rng)).collect();

        let mut zero = AxiomCheck { name: "zero", passed: true, worst: f64::INFINITY, witness: String::new() };
        let mut even = AxiomCheck { name: "evenness", passed: true, worst: 0.0, witness: String::new() };
        let mut lower = AxiomCheck { name: "lower-bound", passed: true, worst: f64::INFINITY, witness: String::new() };
        let mut ratios = vec![0.0f64; radii.len()];
        let mut slope_bottom = 0.0f64;
        let mut slope_top = f64::INFINITY;
        let mut monotone_slopes = true;
        let mut slope_witness = String::new();

        for x in &spec.x_points {
            let at_zero = self.value(x, &SymMat::zeros(dim));
            if at_zero != 0.0 {
                zero.passed = false;
                zero.witness = format!("M({}, 0) = {at_zero}", fmt_x(x));
            }
            for e in &dirs {
                let mut prev_slope = 0.0f64;
                for (ri, &r) in radii.iter().enumerate() {
                    let k = *e * r;
                    let m = self.value(x, &k);
                    let m_neg = self.value(x, &(-k));
                    let m2 = self.value(x, &(k * 2.0));

                    if m < zero.worst {
                        zero.worst = m;
                        if !(m > 0.0) {
                            zero.passed = false;
                            zero.witness = format!("M = {m} at x = {}, |K| = {r}", fmt_x(x));
                        }
                    }
                    let asym = (m - m_neg).abs() / (1.0 + m.abs());
                    if asym > even.worst {
                        even.worst = asym;
                        even.witness = format!("x = {}, |K| = {r}", fmt_x(x));
                        if asym > spec.tol {
                            even.passed = false;
                        }
                    }
                    if let Some(lb) = self.lower {
                        let bound = lb.constant * r.powf(lb.power) - lb.offset;
                        let margin = (m - bound) / (1.0 + (lb.constant * r.powf(lb.power)).abs());
                        if margin < lower.worst {
                            lower.worst = margin;
                            lower.witness = format!("x = {}, |K| = {r}", fmt_x(x));
                            if margin < -spec.tol {
                                lower.passed = false;
                            }
                        }
                    }
                    ratios[ri] = ratios[ri].max(doubling_ratio(m, m2));

                    let slope = m / r;
                    if slope < prev_slope * (1.0 - 1e-6) - spec.tol {
                        monotone_slopes = false;
                        slope_witness = format!("slope drops at x = {}, |K| = {r}", fmt_x(x));
                    }
                    prev_slope = slope;
                    if ri == 0 {
                        slope_bottom = slope_bottom.max(slope);
                    }
                    if ri + 1 == radii.len() {
                        slope_top = slope_top.min(slope);
                    }
                }
            }
        }

        let mut convex = AxiomCheck { name: "midpoint-convexity", passed: true, worst: f64::NEG_INFINITY, witness: String::new() };
        let (la, lb) = (spec.radius_min.ln(), spec.radius_max.ln());
        for _ in 0..spec.triples {
            let x = &spec.x_points[rng.gen_range(0..spec.x_points.len())];
            let k1 = SymMat::random_unit(dim, &mut rng) * rng.gen_range(la..lb).exp();
            let k2 = SymMat::random_unit(dim, &mut rng) * rng.gen_range(la..lb).exp();
            let mid = (k1 + k2) * 0.5;
            let avg = 0.5 * (self.value(x, &k1) + self.value(x, &k2));
            let excess = (self.value(x, &mid) - avg) / (1.0 + avg.abs());
            if excess > convex.worst {
                convex.worst = excess;
                convex.witness = format!("x = {}, |K1| = {:.3e}, |K2| = {:.3e}", fmt_x(x), k1.norm(), k2.norm());
                if excess > spec.tol {
                    convex.passed = false;
                }
            }
        }

        let superlinear_ok = monotone_slopes && slope_bottom <= 0.1 * slope_top;
        let superlinear = AxiomCheck {
            name: "superlinearity",
            passed: superlinear_ok,
            worst: if slope_top > 0.0 { slope_bottom / slope_top } else { f64::INFINITY },
            witness: if slope_witness.is_empty() {
                format!("slope {slope_bottom:.3e} at |K| = {:.1e}, {slope_top:.3e} at |K| = {:.1e}", radii[0], radii[radii.len() - 1])
            } else {
                slope_witness
            },
        };

        let mut checks = vec![zero, even, convex, superlinear];
        if self.lower.is_some() {
            checks.push(lower);
        }
        let delta2 = classify_delta2(&ratios, spec.delta2_factor);
        Ok(AxiomReport {
            checks,
            radii,
            delta2_ratios: ratios,
            delta2,
            slope_bottom,
            slope_top,
            seed: spec.seed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nfunction::ExponentField;

    #[test]
    fn power_is_delta2_plausible_with_ratio_near_two_to_p() {
        let p = 2.5;
        let m = NFunction::power(2, p).unwrap();
        let r = m.check_axioms(&AxiomSampleSpec::torus(2, 3)).unwrap();
        assert!(r.all_passed(), "{:?}", r.checks);
        assert_eq!(r.delta2, Delta2Verdict::Plausible);
        let top = *r.delta2_ratios.last().unwrap();
        assert!((top - 2f64.powf(p)).abs() < 1e-3 * 2f64.powf(p));
    }

    #[test]
    fn exponential_violates_delta2() {
        let m = NFunction::exponential(2).unwrap();
        let spec = AxiomSampleSpec::torus(2, 2).with_ladder(1.0, 20.0, 12);
        let r = m.check_axioms(&spec).unwrap();
        assert_eq!(r.delta2, Delta2Verdict::Violated);
        // ratios grow monotonically along the whole ladder
        assert!(r.delta2_ratios.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn unnormalized_variable_exponent_ratio_bounded_by_eight() {
        let e = ExponentField { base: 2.0, amplitude: 1.0 };
        let m = NFunction::custom_radial(2, "|K|^p(x)", None, move |x, t| t.powf(e.at(x))).unwrap();
        let r = m.check_axioms(&AxiomSampleSpec::torus(2, 8)).unwrap();
        assert_eq!(r.delta2, Delta2Verdict::Plausible);
        assert!(r.delta2_ratios.iter().all(|v| *v <= 8.0));
    }

    #[test]
    fn empty_spec_rejected() {
        let m = NFunction::power(2, 2.0).unwrap();
        let mut spec = AxiomSampleSpec::torus(2, 2);
        spec.x_points.clear();
        assert!(m.check_axioms(&spec).is_err());
    }

    #[test]
    fn linear_function_fails_superlinearity() {
        let m = NFunction::custom_radial(2, "|K|", None, |_, t| t).unwrap();
        let r = m.check_axioms(&AxiomSampleSpec::torus(2, 2)).unwrap();
        assert!(!r.check("superlinearity").unwrap().passed);
    }

    #[test]
    fn nonconvex_function_fails_midpoint_test() {
        let m = NFunction::custom_radial(2, "sqrt", None, |_, t| t.sqrt()).unwrap();
        let r = m.check_axioms(&AxiomSampleSpec::torus(2, 2)).unwrap();
        assert!(!r.check("midpoint-convexity").unwrap().passed);
    }
}
