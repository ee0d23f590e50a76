use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{invalid, Result};
use crate::tensor::SymMat;

/// Uniform periodic grid on `[0, 2 pi)^d` with FFT plans for its size.
#[derive(Clone)]
pub struct TorusGrid {
    dim: usize,
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for TorusGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TorusGrid").field("dim", &self.dim).field("n", &self.n).finish()
    }
}

impl PartialEq for TorusGrid {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.n == other.n
    }
}

/// Gradient, divergence, symmetric gradient and Laplacian of a vector field.
#[derive(Debug, Clone)]
pub struct SpectralDerivatives {
    /// `grad[i * d + j][p] = d_j u_i`.
    pub gradient: Vec<Vec<f64>>,
    pub divergence: Vec<f64>,
    pub sym_gradient: Vec<SymMat>,
    pub laplacian: Vec<Vec<f64>>,
}

impl TorusGrid {
    /// Grid with `n` points per dimension; `n` must be even and at least 8.
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(invalid(format!("grid dimension {dim} must be 2 or 3")));
        }
        Self::with_any_size(dim, n, 8)
    }

    /// Like [`TorusGrid::new`] but allows `d = 1` and a custom minimum size.
    pub(crate) fn with_any_size(dim: usize, n: usize, min_n: usize) -> Result<Self> {
        if n % 2 != 0 || n < min_n {
            return Err(invalid(format!("points per dimension {n} must be even and >= {min_n}")));
        }
        let mut planner = FftPlanner::new();
        Ok(Self { dim, n, forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n) })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        TAU / self.n as f64
    }

    /// Quadrature weight of every point, `(2 pi / n)^d`.
    #[inline]
    pub fn weight(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Measure of the torus, `(2 pi)^d`.
    pub fn volume(&self) -> f64 {
        TAU.powi(self.dim as i32)
    }

    /// Multi-index of a flat index; the last axis varies fastest.
    #[inline]
    pub fn multi_index(&self, mut idx: usize) -> [usize; 3] {
        let mut m = [0; 3];
        for c in (0..self.dim).rev() {
            m[c] = idx % self.n;
            idx /= self.n;
        }
        m
    }

    #[inline]
    pub fn flat_index(&self, m: &[usize]) -> usize {
        m.iter().take(self.dim).fold(0, |acc, &i| acc * self.n + i)
    }

    /// Coordinates of grid point `idx`; unused trailing entries are zero.
    #[inline]
    pub fn point(&self, idx: usize) -> [f64; 3] {
        let m = self.multi_index(idx);
        let h = self.spacing();
        let mut x = [0.0; 3];
        for c in 0..self.dim {
            x[c] = m[c] as f64 * h;
        }
        x
    }

    pub fn points(&self) -> Vec<[f64; 3]> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    /// Samples `f` at every grid point.
    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        (0..self.len()).map(|i| f(&self.point(i)[..self.dim])).collect()
    }

    /// Signed wavenumber of DFT index `j`; the Nyquist index maps to `-n/2`.
    #[inline]
    pub fn wavenumber(&self, j: usize) -> i64 {
        if j < self.n / 2 {
            j as i64
        } else {
            j as i64 - self.n as i64
        }
    }

    #[inline]
    fn is_nyquist(&self, j: usize) -> bool {
        j == self.n / 2
    }

    /// Wavevector of flat spectral index `idx` and whether any component
    /// sits on the Nyquist index.
    #[inline]
    pub fn wavevector(&self, idx: usize) -> ([i64; 3], bool) {
        let m = self.multi_index(idx);
        let mut k = [0i64; 3];
        let mut nyq = false;
        for c in 0..self.dim {
            k[c] = self.wavenumber(m[c]);
            nyq |= self.is_nyquist(m[c]);
        }
        (k, nyq)
    }

    /// Flat index of wavevector `k` (components in `(-n/2, n/2]` or wrapped).
    #[inline]
    pub fn index_of_wavevector(&self, k: &[i64]) -> usize {
        let n = self.n as i64;
        k.iter().take(self.dim).fold(0usize, |acc, &kc| acc * self.n + kc.rem_euclid(n) as usize)
    }

    fn transform(&self, buf: &mut [Complex64], inverse: bool) {
        let plan = if inverse { &self.inverse } else { &self.forward };
        let n = self.n;
        let total = buf.len();
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        for axis in 0..self.dim {
            let stride = n.pow((self.dim - 1 - axis) as u32);
            let block = stride * n;
            for start in (0..total).step_by(block) {
                for offset in 0..stride {
                    let base = start + offset;
                    for (j, v) in line.iter_mut().enumerate() {
                        *v = buf[base + j * stride];
                    }
                    plan.process_with_scratch(&mut line, &mut scratch);
                    for (j, v) in line.iter().enumerate() {
                        buf[base + j * stride] = *v;
                    }
                }
            }
        }
    }

    /// Unnormalized forward DFT of a real field.
    pub fn forward(&self, field: &[f64]) -> Vec<Complex64> {
        debug_assert_eq!(field.len(), self.len());
        let mut buf: Vec<Complex64> = field.iter().map(|v| Complex64::new(*v, 0.0)).collect();
        self.transform(&mut buf, false);
        buf
    }

    /// Inverse DFT (normalized), keeping the real part.
    pub fn inverse(&self, spectrum: &[Complex64]) -> Vec<f64> {
        let mut buf = spectrum.to_vec();
        self.transform(&mut buf, true);
        let scale = 1.0 / self.len() as f64;
        buf.iter().map(|c| c.re * scale).collect()
    }

    /// Spectrum of `d_axis f` given the spectrum of `f`; Nyquist modes
    /// differentiate to zero.
    pub fn derivative_spectrum(&self, spectrum: &[Complex64], axis: usize) -> Vec<Complex64> {
        spectrum
            .iter()
            .enumerate()
            .map(|(idx, c)| {
                let m = self.multi_index(idx);
                if self.is_nyquist(m[axis]) {
                    Complex64::new(0.0, 0.0)
                } else {
                    let k = self.wavenumber(m[axis]) as f64;
                    Complex64::new(-k * c.im, k * c.re)
                }
            })
            .collect()
    }

    /// Squared wavenumber magnitude of every spectral index.
    pub fn wavenumber_sq(&self) -> Vec<f64> {
        (0..self.len())
            .map(|idx| {
                let (k, _) = self.wavevector(idx);
                k.iter().map(|v| (v * v) as f64).sum()
            })
            .collect()
    }

    fn check_len(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.len() {
            return Err(invalid(format!("field has {} samples, grid has {}", f.len(), self.len())));
        }
        Ok(())
    }

    pub fn gradient(&self, f: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check_len(f)?;
        let s = self.forward(f);
        Ok((0..self.dim).map(|a| self.inverse(&self.derivative_spectrum(&s, a))).collect())
    }

    pub fn laplacian(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.check_len(f)?;
        let s = self.forward(f);
        let ksq = self.wavenumber_sq();
        let lap: Vec<Complex64> = s.iter().zip(&ksq).map(|(c, k2)| -c * k2).collect();
        Ok(self.inverse(&lap))
    }

    pub fn divergence(&self, v: &[Vec<f64>]) -> Result<Vec<f64>> {
        if v.len() != self.dim {
            return Err(invalid("vector field component count does not match dimension"));
        }
        let mut out = vec![0.0; self.len()];
        for (a, comp) in v.iter().enumerate() {
            self.check_len(comp)?;
            let d = self.inverse(&self.derivative_spectrum(&self.forward(comp), a));
            out.iter_mut().zip(d).for_each(|(o, x)| *o += x);
        }
        Ok(out)
    }

    /// All first- and second-order operators on a vector field at once.
    pub fn spectral_derivatives(&self, v: &[Vec<f64>]) -> Result<SpectralDerivatives> {
        if v.len() != self.dim {
            return Err(invalid("vector field component count does not match dimension"));
        }
        let d = self.dim;
        let mut gradient = Vec::with_capacity(d * d);
        let mut laplacian = Vec::with_capacity(d);
        for comp in v {
            self.check_len(comp)?;
            let s = self.forward(comp);
            for j in 0..d {
                gradient.push(self.inverse(&self.derivative_spectrum(&s, j)));
            }
            laplacian.push(self.laplacian(comp)?);
        }
        let divergence = (0..self.len()).map(|p| (0..d).map(|i| gradient[i * d + i][p]).sum()).collect();
        let sym_gradient = (0..self.len())
            .map(|p| {
                let full: Vec<f64> = (0..d * d).map(|k| gradient[k][p]).collect();
                SymMat::sym_part(d, &full)
            })
            .collect();
        Ok(SpectralDerivatives { gradient, divergence, sym_gradient, laplacian })
    }

    /// Quadrature `sum_p w f(p)`; exact for trigonometric polynomials with
    /// all wavenumbers below `n`.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.weight() * f.iter().sum::<f64>()
    }

    /// Spectrum of this grid's field re-expressed on `target` (zero padding;
    /// Nyquist coefficients split evenly between `+n/2` and `-n/2`).
    pub fn pad_spectrum(&self, spectrum: &[Complex64], target: &TorusGrid) -> Vec<Complex64> {
        debug_assert!(target.n >= self.n && target.dim == self.dim);
        let scale = (target.n as f64 / self.n as f64).powi(self.dim as i32);
        let mut out = vec![Complex64::new(0.0, 0.0); target.len()];
        let half = self.n as i64 / 2;
        for (idx, c) in spectrum.iter().enumerate() {
            let m = self.multi_index(idx);
            let mut k = [0i64; 3];
            let mut nyq_axes = Vec::new();
            for a in 0..self.dim {
                k[a] = self.wavenumber(m[a]);
                if self.is_nyquist(m[a]) {
                    nyq_axes.push(a);
                }
            }
            if nyq_axes.is_empty() || target.n == self.n {
                out[target.index_of_wavevector(&k)] += c * scale;
                continue;
            }
            let copies = 1usize << nyq_axes.len();
            let share = c * (scale / copies as f64);
            for mask in 0..copies {
                let mut kk = k;
                for (bit, &a) in nyq_axes.iter().enumerate() {
                    kk[a] = if mask & (1 << bit) != 0 { half } else { -half };
                }
                out[target.index_of_wavevector(&kk)] += share;
            }
        }
        out
    }

    /// Spectrum from a finer `source` grid truncated to this grid's
    /// resolved modes (`|k_a| < n/2`); Nyquist entries are zero.
    pub fn truncate_spectrum(&self, spectrum: &[Complex64], source: &TorusGrid) -> Vec<Complex64> {
        debug_assert!(source.n >= self.n && source.dim == self.dim);
        let scale = (self.n as f64 / source.n as f64).powi(self.dim as i32);
        (0..self.len())
            .map(|idx| {
                let (k, nyq) = self.wavevector(idx);
                if nyq {
                    Complex64::new(0.0, 0.0)
                } else {
                    spectrum[source.index_of_wavevector(&k)] * scale
                }
            })
            .collect()
    }

    /// Spectral interpolation of a real field onto a finer grid.
    pub fn interpolate(&self, f: &[f64], target: &TorusGrid) -> Result<Vec<f64>> {
        self.check_len(f)?;
        if target.dim != self.dim || target.n < self.n {
            return Err(invalid("interpolation target must be at least as fine"));
        }
        Ok(target.inverse(&self.pad_spectrum(&self.forward(f), target)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> TorusGrid {
        TorusGrid::new(2, 16).unwrap()
    }

    #[test]
    fn weights_sum_to_volume() {
        let g = grid();
        assert!((g.weight() * g.len() as f64 - g.volume()).abs() < 1e-12);
        assert!((g.integrate(&vec![1.0; g.len()]) - TAU * TAU).abs() < 1e-12);
    }

    #[test]
    fn integrals_of_trig_fields() {
        let g = grid();
        let s = g.sample(|x| x[0].sin());
        assert!(g.integrate(&s).abs() < 1e-14);
        let s2 = g.sample(|x| x[0].sin().powi(2));
        assert!((g.integrate(&s2) - TAU * TAU / 2.0).abs() < 1e-12);
    }

    #[test]
    fn laplacian_of_sine() {
        let g = grid();
        let f = g.sample(|x| x[0].sin());
        let lap = g.laplacian(&f).unwrap();
        for (a, b) in lap.iter().zip(&f) {
            assert!((a + b).abs() < 1e-12);
        }
    }

    #[test]
    fn shear_flow_derivatives() {
        let g = grid();
        let u = vec![g.sample(|x| x[1].sin()), vec![0.0; g.len()]];
        let d = g.spectral_derivatives(&u).unwrap();
        for p in 0..g.len() {
            let x = g.point(p);
            assert!((d.gradient[1][p] - x[1].cos()).abs() < 1e-12);
            assert!(d.gradient[0][p].abs() < 1e-12);
            assert!(d.gradient[2][p].abs() < 1e-12 && d.gradient[3][p].abs() < 1e-12);
            assert!((d.sym_gradient[p].get(0, 1) - 0.5 * x[1].cos()).abs() < 1e-12);
            assert!(d.divergence[p].abs() < 1e-12);
        }
    }

    #[test]
    fn constants_have_zero_derivatives() {
        let g = TorusGrid::new(3, 8).unwrap();
        let u = vec![vec![2.0; g.len()], vec![-1.0; g.len()], vec![0.5; g.len()]];
        let d = g.spectral_derivatives(&u).unwrap();
        assert!(d.gradient.iter().flatten().all(|v| v.abs() < 1e-13));
        assert!(d.laplacian.iter().flatten().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn interpolation_is_exact_for_resolved_modes() {
        let g = grid();
        let fine = TorusGrid::new(2, 32).unwrap();
        let f = g.sample(|x| 1.0 + (3.0 * x[0] - x[1]).cos() + 0.2 * (8.0 * x[1]).cos());
        let fi = g.interpolate(&f, &fine).unwrap();
        let exact = fine.sample(|x| 1.0 + (3.0 * x[0] - x[1]).cos() + 0.2 * (8.0 * x[1]).cos());
        for (a, b) in fi.iter().zip(&exact) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_odd_or_small_grids() {
        assert!(TorusGrid::new(2, 7).is_err());
        assert!(TorusGrid::new(2, 6).is_err());
        assert!(TorusGrid::new(4, 8).is_err());
    }
}
