//! Numerical Legendre-Fenchel conjugation `M*(x, L) = sup_K (K:L - M(x, K))`.
//!
//! Radial functions reduce to a one-dimensional concave maximization over
//! the radius along `L / |L|` (golden section on a doubling bracket). General
//! functions use multistart BFGS ascent on the packed independent entries
//! of `K` with central finite-difference gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{Form, NFunction};
use crate::error::{invalid, Error, Result};
use crate::tensor::SymMat;

/// Numerical parameters for the conjugate maximization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConjugateParams {
    pub radius_cap: f64,
    pub ascent_tol: f64,
    pub max_iters: usize,
    pub multistart_count: usize,
}

impl Default for ConjugateParams {
    fn default() -> Self {
        Self { radius_cap: 1e6, ascent_tol: 1e-8, max_iters: 500, multistart_count: 8 }
    }
}

impl ConjugateParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius_cap.is_finite() && self.radius_cap > 0.0) {
            return Err(invalid("radius_cap must be positive"));
        }
        if !(self.ascent_tol.is_finite() && self.ascent_tol > 0.0) {
            return Err(invalid("ascent_tol must be positive"));
        }
        if self.max_iters == 0 || self.multistart_count == 0 {
            return Err(invalid("max_iters and multistart_count must be positive"));
        }
        Ok(())
    }
}

/// Cap doublings tried before giving up on an unbounded-looking supremum.
const CAP_RETRIES: u32 = 8;
const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section maximization of a concave `g` on `[a, b]`.
fn golden_max(g: impl Fn(f64) -> f64, mut a: f64, mut b: f64, max_iters: usize) -> (f64, f64) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut gc, mut gd) = (g(c), g(d));
    for _ in 0..max_iters {
        if (b - a) <= 4.0 * f64::EPSILON * (a.abs() + b.abs()) || b - a < f64::MIN_POSITIVE {
            break;
        }
        if gc >= gd {
            b = d;
            d = c;
            gd = gc;
            c = b - INV_PHI * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + INV_PHI * (b - a);
            gd = g(d);
        }
    }
    if gc >= gd {
        (c, gc)
    } else {
        (d, gd)
    }
}

impl NFunction {
    /// Numerical `M*(x, L)`.
    pub fn conjugate_value(&self, x: &[f64], l: &SymMat, params: &ConjugateParams) -> Result<f64> {
        self.conjugate_value_from(x, l, params, None)
    }

    /// Numerical `M*(x, L)` with an optional warm-start candidate `K`.
    pub fn conjugate_value_from(
        &self,
        x: &[f64],
        l: &SymMat,
        params: &ConjugateParams,
        warm: Option<&SymMat>,
    ) -> Result<f64> {
        params.validate()?;
        if !l.is_finite() {
            return Err(invalid("non-finite matrix entry"));
        }
        if l.dim() != self.dim {
            return Err(invalid("matrix dimension mismatch"));
        }
        if l.is_zero() {
            return Ok(0.0);
        }
        let floor = warm.map_or(0.0, |k| k.ddot(l) - self.value(x, k)).max(0.0);
        let v = match &self.form {
            Form::Radial(_) => self.radial_conjugate(x, l.norm(), params, None)?,
            Form::Matrix(_) => self.matrix_conjugate(x, l, params, warm)?,
        };
        Ok(v.max(floor))
    }

    fn profile_value(&self, x: &[f64], t: f64) -> f64 {
        match &self.form {
            Form::Radial(p) => (p.value)(x, t),
            Form::Matrix(_) => unreachable!("radial routine on matrix form"),
        }
    }

    /// `sup_{t >= 0} (t s - phi(x, t))` by golden section.
    pub(crate) fn radial_conjugate(
        &self,
        x: &[f64],
        s: f64,
        params: &ConjugateParams,
        _warm: Option<f64>,
    ) -> Result<f64> {
        if s == 0.0 {
            return Ok(0.0);
        }
        let g = |t: f64| t * s - self.profile_value(x, t);
        let mut cap = params.radius_cap;
        for _ in 0..=CAP_RETRIES {
            // Double t until g stops increasing; concavity then brackets the
            // maximizer in [0, 2t].
            let mut t = 1.0f64.min(cap);
            let mut gt = g(t);
            let mut pinned = false;
            loop {
                let t2 = 2.0 * t;
                if t2 > cap {
                    pinned = g(cap) > gt;
                    t = cap;
                    break;
                }
                let g2 = g(t2);
                if g2 <= gt || !g2.is_finite() {
                    t = t2;
                    break;
                }
                t = t2;
                gt = g2;
            }
            if pinned {
                cap *= 2.0;
                continue;
            }
            let (tm, gm) = golden_max(g, 0.0, t, params.max_iters.max(300));
            if tm >= cap * (1.0 - 1e-9) {
                cap *= 2.0;
                continue;
            }
            return Ok(gm.max(0.0));
        }
        Err(Error::CapExceeded { radius: cap })
    }

    /// Solves `phi'(t) = s` by safeguarded Newton; needs profile derivatives.
    pub(crate) fn radial_conjugate_newton(
        &self,
        x: &[f64],
        s: f64,
        params: &ConjugateParams,
    ) -> Result<f64> {
        let Form::Radial(p) = &self.form else {
            unreachable!("radial routine on matrix form")
        };
        let (Some(slope), Some(curv)) = (&p.slope, &p.curvature) else {
            return self.radial_conjugate(x, s, params, None);
        };
        if s == 0.0 {
            return Ok(0.0);
        }
        let f = |t: f64| slope(x, t) - s;
        let mut cap = params.radius_cap;
        let mut hi = 1.0f64;
        let mut retries = 0;
        while f(hi) < 0.0 {
            hi *= 2.0;
            if hi > cap {
                retries += 1;
                if retries > CAP_RETRIES {
                    return Err(Error::CapExceeded { radius: cap });
                }
                cap *= 2.0;
            }
        }
        let mut lo = 0.0f64;
        let mut t = 0.5 * hi;
        for _ in 0..200 {
            let ft = f(t);
            if ft == 0.0 {
                break;
            }
            if ft > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            let h = curv(x, t);
            let mut next = if h > 0.0 && h.is_finite() { t - ft / h } else { f64::NAN };
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            let done = (next - t).abs() <= 2.0 * f64::EPSILON * t || hi - lo <= 2.0 * f64::EPSILON * hi;
            t = next;
            if done {
                break;
            }
        }
        Ok((t * s - (p.value)(x, t)).max(0.0))
    }

    fn matrix_conjugate(
        &self,
        x: &[f64],
        l: &SymMat,
        params: &ConjugateParams,
        warm: Option<&SymMat>,
    ) -> Result<f64> {
        let dim = self.dim;
        let weights = SymMat::packed_weights(dim);
        let lp = l.pack();
        let lw: Vec<f64> = lp.iter().zip(&weights).map(|(l, w)| l * w).collect();
        let lmax = lp.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        // minimize f(v) = M(K(v)) - K(v):L
        let objective = |v: &[f64]| -> f64 {
            let k = SymMat::unpack(dim, v);
            self.value(x, &k) - v.iter().zip(&lw).map(|(a, b)| a * b).sum::<f64>()
        };

        let mut starts: Vec<Vec<f64>> = Vec::with_capacity(params.multistart_count + 1);
        if let Some(k) = warm {
            starts.push(k.pack());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0x6e66_636f_6e6a);
        for (i, scale) in [0.0, 1.0, 0.1, 10.0].into_iter().enumerate() {
            if i >= params.multistart_count {
                break;
            }
            starts.push(lp.iter().map(|v| v * scale).collect());
        }
        while starts.len() < params.multistart_count + usize::from(warm.is_some()) {
            let scale = rng.gen_range(-3.0f64..3.0).exp();
            let dir = SymMat::random_unit(dim, &mut rng).pack();
            let norm = l.norm();
            starts.push(
                lp.iter().zip(&dir).map(|(a, b)| scale * (a + 0.5 * norm * b)).collect(),
            );
        }

        let mut cap = params.radius_cap;
        for _ in 0..=CAP_RETRIES {
            let mut best: Option<(Vec<f64>, f64)> = None;
            for s0 in &starts {
                let (v, fv) = bfgs_min(&objective, s0, dim, cap, params, lmax);
                if best.as_ref().map_or(true, |(_, b)| fv < *b) {
                    best = Some((v, fv));
                }
            }
            let (v, fv) = best.expect("at least one start");
            if SymMat::unpack(dim, &v).norm() >= cap * (1.0 - 1e-9) {
                cap *= 2.0;
                continue;
            }
            return Ok((-fv).max(0.0));
        }
        Err(Error::CapExceeded { radius: cap })
    }
}

fn project_to_cap(v: &mut [f64], dim: usize, cap: f64) {
    let n = SymMat::unpack(dim, v).norm();
    if n > cap {
        let s = cap / n;
        v.iter_mut().for_each(|x| *x *= s);
    }
}

fn fd_gradient(f: &impl Fn(&[f64]) -> f64, v: &[f64], floor: f64) -> Vec<f64> {
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(floor);
    let h = 1e-5 * scale;
    let mut w = v.to_vec();
    (0..v.len())
        .map(|i| {
            let orig = w[i];
            w[i] = orig + h;
            let fp = f(&w);
            w[i] = orig - h;
            let fm = f(&w);
            w[i] = orig;
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// BFGS with Armijo backtracking, iterates kept inside the radius cap.
fn bfgs_min(
    f: &impl Fn(&[f64]) -> f64,
    v0: &[f64],
    dim: usize,
    cap: f64,
    params: &ConjugateParams,
    lmax: f64,
) -> (Vec<f64>, f64) {
    let n = v0.len();
    let mut v = v0.to_vec();
    project_to_cap(&mut v, dim, cap);
    let mut fv = f(&v);
    let floor = 1e-6 * lmax.max(1e-12);
    let mut g = fd_gradient(f, &v, floor);
    let mut hinv = vec![0.0; n * n];
    for i in 0..n {
        hinv[i * n + i] = 1.0;
    }
    let mut first = true;
    let gtol = params.ascent_tol * 1e-2 * lmax.max(f64::MIN_POSITIVE);
    for _ in 0..params.max_iters {
        if g.iter().fold(0.0f64, |m, x| m.max(x.abs())) <= gtol {
            break;
        }
        let mut p: Vec<f64> = (0..n).map(|i| -dot(&hinv[i * n..(i + 1) * n], &g)).collect();
        let mut slope = dot(&g, &p);
        if slope >= 0.0 || !slope.is_finite() {
            hinv.iter_mut().enumerate().for_each(|(k, h)| *h = if k % (n + 1) == 0 { 1.0 } else { 0.0 });
            p = g.iter().map(|x| -x).collect();
            slope = dot(&g, &p);
        }
        let mut step = 1.0;
        let mut accepted = None;
        while step > 1e-20 {
            let mut vn: Vec<f64> = v.iter().zip(&p).map(|(a, b)| a + step * b).collect();
            project_to_cap(&mut vn, dim, cap);
            let fnew = f(&vn);
            if fnew.is_finite() && fnew <= fv + 1e-4 * step * slope {
                accepted = Some((vn, fnew));
                break;
            }
            step *= 0.5;
        }
        let Some((vn, fnew)) = accepted else { break };
        let gn = fd_gradient(f, &vn, floor);
        let s: Vec<f64> = vn.iter().zip(&v).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        let small_change = (fv - fnew).abs() <= f64::EPSILON * fv.abs().max(1e-300)
            && s.iter().all(|x| x.abs() <= f64::EPSILON * 4.0 * (1.0 + cap.min(1.0)));
        v = vn;
        fv = fnew;
        g = gn;
        if small_change {
            break;
        }
        if sy > 1e-300 {
            if first {
                let yy = dot(&y, &y);
                let gamma = sy / yy;
                hinv.iter_mut().for_each(|h| *h *= gamma);
                first = false;
            }
            let hy: Vec<f64> = (0..n).map(|i| dot(&hinv[i * n..(i + 1) * n], &y)).collect();
            let yhy = dot(&y, &hy);
            let rho = 1.0 / sy;
            for i in 0..n {
                for j in 0..n {
                    hinv[i * n + j] += (1.0 + rho * yhy) * rho * s[i] * s[j]
                        - rho * (hy[i] * s[j] + s[i] * hy[j]);
                }
            }
        }
    }
    (v, fv)
}

/// One row of a conjugate table.
#[derive(Debug, Clone, PartialEq)]
pub struct ConjugateRow {
    pub x: Vec<f64>,
    pub l: SymMat,
    pub value: f64,
}

/// Evaluates `M*` at every `(x, L)` pair; rows come back in input order.
pub fn conjugate_table(
    nf: &NFunction,
    samples: &[(Vec<f64>, SymMat)],
    params: &ConjugateParams,
) -> Result<Vec<ConjugateRow>> {
    samples
        .par_iter()
        .map(|(x, l)| {
            nf.conjugate_value(x, l, params)
                .map(|value| ConjugateRow { x: x.clone(), l: *l, value })
        })
        .collect()
}
