//! Modulars, Luxemburg norms and modular-convergence diagnostics for
//! symmetric-matrix fields sampled on a space-time quadrature grid.

use std::io::Write;
use std::sync::Arc;

use crate::discretization::TorusGrid;
use crate::error::{invalid, Result};
use crate::io::CsvWriter;
use crate::nfunction::NFunction;
use crate::tensor::SymMat;

/// Matrix samples indexed by `(time, space)` with positive quadrature weights.
///
/// Sample `t * space_points + s` sits at spatial point `coords[s]`.
#[derive(Debug, Clone)]
pub struct SampledField {
    dim: usize,
    coords: Arc<Vec<[f64; 3]>>,
    values: Vec<SymMat>,
    weights: Arc<Vec<f64>>,
}

/// Composite trapezoid weights for the sample times `times`.
pub fn trapezoid_weights(times: &[f64]) -> Vec<f64> {
    let n = times.len();
    let mut w = vec![0.0; n];
    for i in 1..n {
        let h = 0.5 * (times[i] - times[i - 1]);
        w[i - 1] += h;
        w[i] += h;
    }
    w
}

impl SampledField {
    /// General constructor; `weights` has one entry per sample.
    pub fn new(dim: usize, coords: Vec<[f64; 3]>, values: Vec<SymMat>, weights: Vec<f64>) -> Result<Self> {
        if coords.is_empty() || values.len() % coords.len() != 0 {
            return Err(invalid("sample count is not a multiple of the spatial point count"));
        }
        if weights.len() != values.len() {
            return Err(invalid("one weight per sample is required"));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(invalid("quadrature weights must be positive"));
        }
        if values.iter().any(|v| v.dim() != dim) {
            return Err(invalid("sample dimension mismatch"));
        }
        Ok(Self { dim, coords: Arc::new(coords), values, weights: Arc::new(weights) })
    }

    /// Field on a torus grid at the given time-quadrature weights
    /// (`values` time-major); sample weights are `time_weight * dx^d`.
    pub fn on_grid(grid: &TorusGrid, time_weights: &[f64], values: Vec<SymMat>) -> Result<Self> {
        let space = grid.len();
        if values.len() != space * time_weights.len() {
            return Err(invalid(format!(
                "expected {} samples, got {}",
                space * time_weights.len(),
                values.len()
            )));
        }
        if time_weights.iter().any(|w| !(*w > 0.0)) {
            return Err(invalid("time weights must be positive"));
        }
        let wx = grid.weight();
        let weights = time_weights.iter().flat_map(|wt| std::iter::repeat(wt * wx).take(space)).collect();
        Self::new(grid.dim(), grid.points(), values, weights)
    }

    /// Field sharing this field's points and weights with new values.
    pub fn with_values(&self, values: Vec<SymMat>) -> Result<Self> {
        if values.len() != self.values.len() {
            return Err(invalid("sample count mismatch"));
        }
        Ok(Self { dim: self.dim, coords: self.coords.clone(), values, weights: self.weights.clone() })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time_samples(&self) -> usize {
        self.values.len() / self.coords.len()
    }

    pub fn values(&self) -> &[SymMat] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Spatial point of sample `i`.
    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i % self.coords.len()][..self.dim]
    }

    /// Total measure `sum of weights`.
    pub fn measure(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            dim: self.dim,
            coords: self.coords.clone(),
            values: self.values.iter().map(|v| *v * c).collect(),
            weights: self.weights.clone(),
        }
    }

    fn compatible(&self, other: &Self) -> Result<()> {
        let same_points = Arc::ptr_eq(&self.coords, &other.coords) || self.coords == other.coords;
        let same_weights = Arc::ptr_eq(&self.weights, &other.weights) || self.weights == other.weights;
        if self.dim != other.dim || self.values.len() != other.values.len() || !same_points || !same_weights {
            return Err(invalid("fields live on different grids"));
        }
        Ok(())
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        self.compatible(other)?;
        let values = self.values.iter().zip(&other.values).map(|(x, y)| *x * a + *y * b).collect();
        self.with_values(values)
    }

    fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Quadrature modular `sum_i w_i M(x_i, K_i)`.
pub fn modular(nf: &NFunction, field: &SampledField) -> Result<f64> {
    if nf.dim() != field.dim {
        return Err(invalid(format!(
            "field dimension {} does not match N-function dimension {}",
            field.dim,
            nf.dim()
        )));
    }
    Ok(field
        .values
        .iter()
        .zip(field.weights.iter())
        .enumerate()
        .map(|(i, (k, w))| w * nf.value(field.point(i), k))
        .sum())
}

fn scaled_modular(nf: &NFunction, field: &SampledField, inv_lambda: f64) -> f64 {
    field
        .values
        .iter()
        .zip(field.weights.iter())
        .enumerate()
        .map(|(i, (k, w))| w * nf.value(field.point(i), &(*k * inv_lambda)))
        .sum()
}

/// Luxemburg norm `inf { lambda > 0 : modular(field / lambda) <= 1 }`.
///
/// Bisection on `lambda` from a doubling/halving bracket around 1; the
/// returned `lambda` always satisfies `modular(field / lambda) <= 1`, and the
/// bracket is refined until its relative width is below `tol * 1e-4`.
pub fn luxemburg_norm(nf: &NFunction, field: &SampledField, tol: f64) -> Result<f64> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(invalid("tolerance must be positive"));
    }
    if !field.is_finite() {
        return Err(invalid("field has non-finite samples"));
    }
    if nf.dim() != field.dim {
        return Err(invalid("field dimension does not match N-function dimension"));
    }
    if field.values.iter().all(|v| v.is_zero()) {
        return Ok(0.0);
    }
    let f = |lambda: f64| scaled_modular(nf, field, 1.0 / lambda);
    let (mut lo, mut hi) = (1.0, 1.0);
    if f(1.0) > 1.0 {
        while f(hi) > 1.0 {
            lo = hi;
            hi *= 2.0;
            if !hi.is_finite() {
                return Err(invalid("Luxemburg bracket diverged"));
            }
        }
    } else {
        while f(lo) <= 1.0 {
            hi = lo;
            lo *= 0.5;
            if lo == 0.0 {
                return Ok(0.0);
            }
        }
    }
    for _ in 0..200 {
        if hi - lo <= tol * 1e-4 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// Rungs for the convergence-in-measure and integrability tails.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceLadders {
    pub delta: Vec<f64>,
    pub r: Vec<f64>,
}

fn log_ladder(lo: f64, hi: f64, rungs: usize) -> Vec<f64> {
    if rungs == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..rungs).map(|i| (a + (b - a) * i as f64 / (rungs - 1) as f64).exp()).collect()
}

impl Default for ConvergenceLadders {
    /// 12 log-spaced rungs each: `delta` in `[1e-6, 1]`, `R` in `[1e-2, 1e4]`.
    fn default() -> Self {
        Self { delta: log_ladder(1e-6, 1.0, 12), r: log_ladder(1e-2, 1e4, 12) }
    }
}

impl ConvergenceLadders {
    pub fn log_spaced(delta: (f64, f64), r: (f64, f64), rungs: usize) -> Result<Self> {
        if rungs == 0 || !(delta.0 > 0.0 && delta.1 >= delta.0 && r.0 > 0.0 && r.1 >= r.0) {
            return Err(invalid("ladders need positive increasing bounds and at least one rung"));
        }
        Ok(Self { delta: log_ladder(delta.0, delta.1, rungs), r: log_ladder(r.0, r.1, rungs) })
    }
}

/// One sequence member's entry in a [`ConvergenceReport`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    /// 1-based sequence index.
    pub j: usize,
    /// `modular((z_j - z) / lambda_scale)`.
    pub modular_difference: f64,
    /// `modular(lambda_scale * z_j)`.
    pub modular_member: f64,
    /// Measure of `{|z_j - z| > delta}` per delta rung.
    pub measure_tail: Vec<f64>,
    /// `sum over {M(lambda z_j) >= R}` of `w M(lambda z_j)` per R rung.
    pub integrability_tail: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub lambda_scale: f64,
    pub ladders: ConvergenceLadders,
    pub rows: Vec<ConvergenceRow>,
    /// `sup_j` of the integrability tail per R rung.
    pub integrability_sup: Vec<f64>,
    /// `sup_j modular(lambda_scale * z_j)`.
    pub member_modular_sup: f64,
    /// Present when the member modulars are uniformly bounded.
    pub note: Option<String>,
}

/// Modular-convergence diagnostics of `sequence` towards `limit`.
pub fn modular_convergence_check(
    nf: &NFunction,
    sequence: &[SampledField],
    limit: &SampledField,
    lambda_scale: f64,
    ladders: &ConvergenceLadders,
) -> Result<ConvergenceReport> {
    if sequence.is_empty() {
        return Err(invalid("sequence is empty"));
    }
    if !(lambda_scale > 0.0 && lambda_scale.is_finite()) {
        return Err(invalid("lambda_scale must be positive"));
    }
    let mut rows = Vec::with_capacity(sequence.len());
    for (idx, zj) in sequence.iter().enumerate() {
        let diff = zj.combine(1.0, limit, -1.0)?;
        let modular_difference = modular(nf, &diff.scale(1.0 / lambda_scale))?;
        let measure_tail = ladders
            .delta
            .iter()
            .map(|delta| {
                diff.values.iter().zip(diff.weights.iter()).filter(|(v, _)| v.norm() > *delta).map(|(_, w)| w).sum()
            })
            .collect();
        let local: Vec<(f64, f64)> = zj
            .values
            .iter()
            .zip(zj.weights.iter())
            .enumerate()
            .map(|(i, (k, w))| (nf.value(zj.point(i), &(*k * lambda_scale)), *w))
            .collect();
        let modular_member = local.iter().map(|(m, w)| m * w).sum();
        let integrability_tail =
            ladders.r.iter().map(|r| local.iter().filter(|(m, _)| m >= r).map(|(m, w)| m * w).sum()).collect();
        rows.push(ConvergenceRow { j: idx + 1, modular_difference, modular_member, measure_tail, integrability_tail });
    }
    let integrability_sup = (0..ladders.r.len())
        .map(|k| rows.iter().map(|r| r.integrability_tail[k]).fold(0.0, f64::max))
        .collect();
    let member_modular_sup = rows.iter().map(|r| r.modular_member).fold(0.0, f64::max);
    let note = member_modular_sup.is_finite().then(|| {
        format!(
            "sup_j modular(lambda z_j) = {member_modular_sup:.6e} is finite: the scaled sequence is \
             uniformly integrable and the modular bound transfers to weak limits"
        )
    });
    Ok(ConvergenceReport {
        lambda_scale,
        ladders: ladders.clone(),
        rows,
        integrability_sup,
        member_modular_sup,
        note,
    })
}

impl ConvergenceReport {
    /// CSV: one row per sequence index, then a `sup` footer row.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<W> {
        let mut cols = vec!["j".to_string(), "modular_difference".to_string(), "modular_member".to_string()];
        cols.extend((0..self.ladders.delta.len()).map(|k| format!("measure_tail_{k}")));
        cols.extend((0..self.ladders.r.len()).map(|k| format!("integrability_tail_{k}")));
        let col_refs: Vec<&str> = cols.iter().map(String::as_str).collect();
        let desc = format!(
            "modular convergence, lambda_scale={}, delta ladder [{}], R ladder [{}]",
            crate::io::fmt_num(self.lambda_scale),
            self.ladders.delta.iter().map(|v| crate::io::fmt_num(*v)).collect::<Vec<_>>().join(" "),
            self.ladders.r.iter().map(|v| crate::io::fmt_num(*v)).collect::<Vec<_>>().join(" ")
        );
        let mut w = CsvWriter::new(out, &desc, &col_refs)?;
        for row in &self.rows {
            let mut vals = vec![row.modular_difference, row.modular_member];
            vals.extend(&row.measure_tail);
            vals.extend(&row.integrability_tail);
            w.row_with_labels(&[row.j.to_string()], &vals)?;
        }
        let mut footer = vec![f64::NAN, self.member_modular_sup];
        footer.extend(std::iter::repeat(f64::NAN).take(self.ladders.delta.len()));
        footer.extend(&self.integrability_sup);
        w.row_with_labels(&["sup".to_string()], &footer)?;
        Ok(w.finish()?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit_measure_field(values: Vec<SymMat>) -> SampledField {
        let n = values.len();
        let coords = (0..n).map(|i| [i as f64 * 0.3, 0.1, 0.0]).collect();
        SampledField::new(2, coords, values, vec![1.0 / n as f64; n]).unwrap()
    }

    fn half_square() -> NFunction {
        NFunction::power(2, 2.0).unwrap()
    }

    #[test]
    fn modular_of_sine_entry_matches_closed_form() {
        // integral of sin^2(x1)/2 over [0, 2 pi]^2 x [0, 1] is pi^2
        let grid = TorusGrid::new(2, 8).unwrap();
        let vals =
            (0..grid.len()).map(|i| SymMat::diag(&[grid.point(i)[0].sin(), 0.0])).collect();
        let f = SampledField::on_grid(&grid, &[1.0], vals).unwrap();
        let m = modular(&half_square(), &f).unwrap();
        assert!((m - std::f64::consts::PI.powi(2)).abs() < 1e-12);
    }

    #[test]
    fn modular_of_constant_integrand() {
        let grid = TorusGrid::new(2, 8).unwrap();
        let k = SymMat::identity(2); // M = |I|^2 / 2 = 1
        let f = SampledField::on_grid(&grid, &[0.25, 0.25], vec![k; 2 * grid.len()]).unwrap();
        let expected = 0.5 * grid.volume();
        assert!((modular(&half_square(), &f).unwrap() - expected).abs() < 1e-12);
        assert_eq!(modular(&half_square(), &f.scale(0.0)).unwrap(), 0.0);
    }

    #[test]
    fn luxemburg_constant_field_closed_form() {
        for p in [2.0, 2.2, 3.0] {
            let nf = NFunction::power(2, p).unwrap();
            let a = 1.7;
            let k = SymMat::diag(&[a, 0.0]);
            let f = unit_measure_field(vec![k; 5]);
            let lambda = luxemburg_norm(&nf, &f, 1e-10).unwrap();
            let exact = a / p.powf(1.0 / p);
            assert!((lambda - exact).abs() < 1e-8, "p={p}: {lambda} vs {exact}");
        }
    }

    #[test]
    fn luxemburg_of_zero_and_bad_input() {
        let nf = half_square();
        let f = unit_measure_field(vec![SymMat::zeros(2); 3]);
        assert_eq!(luxemburg_norm(&nf, &f, 1e-8).unwrap(), 0.0);
        let bad = unit_measure_field(vec![SymMat::diag(&[f64::NAN, 0.0])]);
        assert!(luxemburg_norm(&nf, &bad, 1e-8).is_err());
        assert!(luxemburg_norm(&nf, &f, 0.0).is_err());
    }

    #[test]
    fn identical_sequence_has_zero_diagnostics() {
        let nf = half_square();
        let z = unit_measure_field(vec![SymMat::diag(&[1.0, -0.5]); 4]);
        let rep =
            modular_convergence_check(&nf, &[z.clone(), z.clone()], &z, 1.0, &ConvergenceLadders::default())
                .unwrap();
        for row in &rep.rows {
            assert_eq!(row.modular_difference, 0.0);
            assert!(row.measure_tail.iter().all(|v| *v == 0.0));
        }
        assert!(rep.note.is_some());
    }

    #[test]
    fn shrinking_perturbation_converges_modularly() {
        let nf = NFunction::power(2, 3.0).unwrap();
        let z = unit_measure_field((0..6).map(|i| SymMat::diag(&[i as f64, 1.0])).collect());
        let e = unit_measure_field(vec![SymMat::diag(&[1.0, 2.0]); 6]);
        let seq: Vec<_> = (1..=8).map(|j| z.combine(1.0, &e, 1.0 / j as f64).unwrap()).collect();
        let rep = modular_convergence_check(&nf, &seq, &z, 0.5, &ConvergenceLadders::default()).unwrap();
        // |E / 0.5| = 2 sqrt(5) everywhere, so modular_j = (2 sqrt 5 / j)^3 / 3
        for w in rep.rows.windows(2) {
            assert!(w[1].modular_difference < w[0].modular_difference);
        }
        for row in &rep.rows {
            let exact = (2.0 * 5f64.sqrt() / row.j as f64).powi(3) / 3.0;
            assert!((row.modular_difference - exact).abs() < 1e-12 * exact.max(1.0));
        }
    }

    #[test]
    fn concentrating_spikes_have_bounded_modular() {
        // M = |K|^2, z_j = j on a cell of measure 1 / j^2
        let nf = NFunction::power(2, 2.0).unwrap().scaled(2.0).unwrap();
        let cells = 64;
        let coords: Vec<[f64; 3]> = (0..cells).map(|i| [i as f64, 0.0, 0.0]).collect();
        let seq: Vec<SampledField> = (1..=8)
            .map(|j| {
                let mut weights = vec![(1.0 - 1.0 / (j * j) as f64) / (cells - 1) as f64; cells];
                weights[0] = 1.0 / (j * j) as f64;
                if j == 1 {
                    weights.iter_mut().skip(1).for_each(|w| *w = 1e-300);
                }
                let mut values = vec![SymMat::zeros(2); cells];
                values[0] = SymMat::diag(&[j as f64, 0.0]);
                SampledField::new(2, coords.clone(), values, weights).unwrap()
            })
            .collect();
        let ladders = ConvergenceLadders::log_spaced((1e-3, 1.0), (1.0, 32.0), 4).unwrap();
        let mut sup_tail = vec![0.0f64; 4];
        let mut member_sup = 0.0f64;
        for zj in &seq {
            let rep = modular_convergence_check(&nf, &[zj.clone()], &zj.scale(0.0), 1.0, &ladders).unwrap();
            member_sup = member_sup.max(rep.member_modular_sup);
            for (s, v) in sup_tail.iter_mut().zip(&rep.integrability_sup) {
                *s = s.max(*v);
            }
        }
        assert!((member_sup - 1.0).abs() < 1e-12);
        for v in sup_tail {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn csv_has_footer() {
        let nf = half_square();
        let z = unit_measure_field(vec![SymMat::diag(&[1.0, 0.0]); 2]);
        let rep = modular_convergence_check(&nf, &[z.clone()], &z, 1.0, &ConvergenceLadders::default()).unwrap();
        let text = String::from_utf8(rep.write_csv(Vec::new()).unwrap()).unwrap();
        assert!(text.starts_with('#'));
        assert!(text.lines().last().unwrap().starts_with("sup,"));
        assert!(modular_convergence_check(&nf, &[], &z, 1.0, &ConvergenceLadders::default()).is_err());
    }

    fn arb_field(n: usize) -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
        prop::collection::vec((-3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64), n)
    }

    fn build(v: &[(f64, f64, f64)]) -> SampledField {
        unit_measure_field(
            v.iter()
                .map(|(a, b, c)| {
                    let mut m = SymMat::diag(&[*a, *b]);
                    m.set(0, 1, *c);
                    m
                })
                .collect(),
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn modular_is_midpoint_convex(f in arb_field(6), g in arb_field(6), p in 1.5..4.0f64) {
            let nf = NFunction::power(2, p).unwrap();
            let (f, g) = (build(&f), build(&g));
            let mid = f.combine(0.5, &g, 0.5).unwrap();
            let lhs = modular(&nf, &mid).unwrap();
            let rhs = 0.5 * (modular(&nf, &f).unwrap() + modular(&nf, &g).unwrap());
            prop_assert!(lhs <= rhs + 1e-12 * (1.0 + rhs));
        }

        #[test]
        fn luxemburg_is_a_norm(f in arb_field(5), g in arb_field(5), c in -5.0..5.0f64, p in 1.5..4.0f64) {
            let nf = NFunction::power(2, p).unwrap();
            let (f, g) = (build(&f), build(&g));
            let nf_ = luxemburg_norm(&nf, &f, 1e-10).unwrap();
            let ng = luxemburg_norm(&nf, &g, 1e-10).unwrap();
            let nsum = luxemburg_norm(&nf, &f.combine(1.0, &g, 1.0).unwrap(), 1e-10).unwrap();
            prop_assert!(nsum <= (nf_ + ng) * (1.0 + 1e-8) + 1e-12);
            let nc = luxemburg_norm(&nf, &f.scale(c), 1e-10).unwrap();
            prop_assert!((nc - c.abs() * nf_).abs() <= 1e-8 * (c.abs() * nf_).max(1e-300));
        }

        #[test]
        fn unit_ball_correspondence(f in arb_field(5), s in 0.05..3.0f64) {
            let nf = NFunction::power(2, 2.5).unwrap();
            let f = build(&f).scale(s);
            let tol = 1e-8;
            let norm = luxemburg_norm(&nf, &f, tol).unwrap();
            let m = modular(&nf, &f).unwrap();
            if norm <= 1.0 {
                prop_assert!(m <= 1.0 + 1e-12);
            }
            if m <= 1.0 {
                prop_assert!(norm <= 1.0 + tol);
            }
        }
    }
}
