use std::f64::consts::TAU;

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::grid::TorusGrid;
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Trig {
    Const,
    Cos,
    Sin,
}

/// Real divergence-free mode `c e cos(k.x)` or `c e sin(k.x)`, `e . k = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityMode {
    pub wavevector: [i64; 3],
    pub polarization: [f64; 3],
    pub trig: Trig,
}

/// Real scalar mode: the constant, `c cos(k.x)` or `c sin(k.x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarMode {
    pub wavevector: [i64; 3],
    pub trig: Trig,
}

/// Velocity field and its gradient on the quadrature grid.
#[derive(Debug, Clone)]
pub struct QuadVelocity {
    /// `u[c][p]`.
    pub u: Vec<Vec<f64>>,
    /// `grad[i * d + j][p] = d_j u_i`.
    pub grad: Vec<Vec<f64>>,
}

/// Scalar field and its gradient on the quadrature grid.
#[derive(Debug, Clone)]
pub struct QuadScalar {
    pub value: Vec<f64>,
    pub grad: Vec<Vec<f64>>,
}

/// Orthonormal Fourier Galerkin bases for velocity and temperature.
///
/// Mode values are tabulated on an oversampled quadrature grid, so every
/// Galerkin pairing is a plain weighted sum over that grid.
#[derive(Debug, Clone)]
pub struct GalerkinBasis {
    grid: TorusGrid,
    quad: TorusGrid,
    oversample: usize,
    velocity: Vec<VelocityMode>,
    temperature: Vec<ScalarMode>,
    // [(mode * d + c) * P + p]
    vel_values: Vec<f64>,
    // [(mode * d * d + i * d + j) * P + p]
    vel_grads: Vec<f64>,
    // [mode * P + p]
    temp_values: Vec<f64>,
    // [(mode * d + c) * P + p]
    temp_grads: Vec<f64>,
    base_to_quad: Vec<usize>,
}

fn half_space_wavevectors(dim: usize, kmax: i64) -> Vec<[i64; 3]> {
    let mut out = Vec::new();
    let range = -kmax..=kmax;
    let mut push = |k: [i64; 3]| {
        let first = k.iter().take(dim).copied().find(|v| *v != 0);
        if matches!(first, Some(v) if v > 0) {
            out.push(k);
        }
    };
    for a in range.clone() {
        for b in range.clone() {
            if dim == 2 {
                push([a, b, 0]);
            } else {
                for c in range.clone() {
                    push([a, b, c]);
                }
            }
        }
    }
    out.sort_by_key(|k| (k.iter().map(|v| v * v).sum::<i64>(), *k));
    out
}

fn normalize(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// Orthonormal polarizations perpendicular to `k` (`d - 1` of them).
fn polarizations(dim: usize, k: [i64; 3]) -> Vec<[f64; 3]> {
    let kf = [k[0] as f64, k[1] as f64, k[2] as f64];
    if dim == 2 {
        return vec![normalize([-kf[1], kf[0], 0.0])];
    }
    let axis = (0..3).min_by_key(|a| k[*a].abs()).unwrap_or(0);
    let mut ea = [0.0; 3];
    ea[axis] = 1.0;
    let e1 = normalize(cross(kf, ea));
    let e2 = normalize(cross(kf, e1));
    vec![e1, e2]
}

impl GalerkinBasis {
    /// First `n_velocity` divergence-free and `n_temperature` scalar modes,
    /// tabulated on a grid `oversample` times finer than `grid`.
    pub fn new(grid: &TorusGrid, n_velocity: usize, n_temperature: usize, oversample: usize) -> Result<Self> {
        if oversample == 0 {
            return Err(invalid("oversample factor must be at least 1"));
        }
        if n_velocity == 0 || n_temperature == 0 {
            return Err(invalid("mode counts must be positive"));
        }
        let d = grid.dim();
        let quad = TorusGrid::new(d, grid.n() * oversample)?;
        let kmax = grid.n() as i64 / 2 - 1;
        let wavevectors = half_space_wavevectors(d, kmax);

        let mut velocity = Vec::with_capacity(n_velocity);
        'outer: for k in &wavevectors {
            for trig in [Trig::Cos, Trig::Sin] {
                for e in polarizations(d, *k) {
                    if velocity.len() == n_velocity {
                        break 'outer;
                    }
                    velocity.push(VelocityMode { wavevector: *k, polarization: e, trig });
                }
            }
        }
        if velocity.len() < n_velocity {
            return Err(invalid(format!(
                "{n_velocity} velocity modes requested but the grid resolves only {}",
                velocity.len()
            )));
        }
        let mut temperature = vec![ScalarMode { wavevector: [0; 3], trig: Trig::Const }];
        'outer_t: for k in &wavevectors {
            for trig in [Trig::Cos, Trig::Sin] {
                if temperature.len() >= n_temperature {
                    break 'outer_t;
                }
                temperature.push(ScalarMode { wavevector: *k, trig });
            }
        }
        temperature.truncate(n_temperature);
        if temperature.len() < n_temperature {
            return Err(invalid(format!(
                "{n_temperature} temperature modes requested but the grid resolves only {}",
                temperature.len()
            )));
        }

        let p_count = quad.len();
        let points = quad.points();
        let volume = TAU.powi(d as i32);
        let c = (2.0 / volume).sqrt();
        let c0 = (1.0 / volume).sqrt();

        let phase = |k: &[i64; 3], x: &[f64; 3]| -> f64 { (0..d).map(|a| k[a] as f64 * x[a]).sum() };
        // value and derivative factor of the trig function at phase s
        let trig_pair = |t: Trig, s: f64| -> (f64, f64) {
            match t {
                Trig::Const => (1.0, 0.0),
                Trig::Cos => (s.cos(), -s.sin()),
                Trig::Sin => (s.sin(), s.cos()),
            }
        };

        let mut vel_values = vec![0.0; n_velocity * d * p_count];
        let mut vel_grads = vec![0.0; n_velocity * d * d * p_count];
        for (m, mode) in velocity.iter().enumerate() {
            for (p, x) in points.iter().enumerate() {
                let (v, dv) = trig_pair(mode.trig, phase(&mode.wavevector, x));
                for i in 0..d {
                    vel_values[(m * d + i) * p_count + p] = c * mode.polarization[i] * v;
                    for j in 0..d {
                        vel_grads[(m * d * d + i * d + j) * p_count + p] =
                            c * mode.polarization[i] * mode.wavevector[j] as f64 * dv;
                    }
                }
            }
        }
        let mut temp_values = vec![0.0; n_temperature * p_count];
        let mut temp_grads = vec![0.0; n_temperature * d * p_count];
        for (m, mode) in temperature.iter().enumerate() {
            let norm = if mode.trig == Trig::Const { c0 } else { c };
            for (p, x) in points.iter().enumerate() {
                let (v, dv) = trig_pair(mode.trig, phase(&mode.wavevector, x));
                temp_values[m * p_count + p] = norm * v;
                for j in 0..d {
                    temp_grads[(m * d + j) * p_count + p] = norm * mode.wavevector[j] as f64 * dv;
                }
            }
        }
        let base_to_quad = (0..grid.len())
            .map(|idx| {
                let mut mi = grid.multi_index(idx);
                mi.iter_mut().for_each(|v| *v *= oversample);
                quad.flat_index(&mi)
            })
            .collect();

        Ok(Self {
            grid: grid.clone(),
            quad,
            oversample,
            velocity,
            temperature,
            vel_values,
            vel_grads,
            temp_values,
            temp_grads,
            base_to_quad,
        })
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn quad_grid(&self) -> &TorusGrid {
        &self.quad
    }

    pub fn oversample(&self) -> usize {
        self.oversample
    }

    pub fn velocity_modes(&self) -> &[VelocityMode] {
        &self.velocity
    }

    pub fn temperature_modes(&self) -> &[ScalarMode] {
        &self.temperature
    }

    pub fn n_velocity(&self) -> usize {
        self.velocity.len()
    }

    pub fn n_temperature(&self) -> usize {
        self.temperature.len()
    }

    /// `omega_m` component `c` on the quadrature grid.
    #[inline]
    pub fn velocity_mode_values(&self, m: usize, c: usize) -> &[f64] {
        let (d, pc) = (self.grid.dim(), self.quad.len());
        &self.vel_values[(m * d + c) * pc..(m * d + c + 1) * pc]
    }

    /// `d_j (omega_m)_i` on the quadrature grid.
    #[inline]
    pub fn velocity_mode_grad(&self, m: usize, i: usize, j: usize) -> &[f64] {
        let (d, pc) = (self.grid.dim(), self.quad.len());
        let k = m * d * d + i * d + j;
        &self.vel_grads[k * pc..(k + 1) * pc]
    }

    #[inline]
    pub fn temperature_mode_values(&self, m: usize) -> &[f64] {
        let pc = self.quad.len();
        &self.temp_values[m * pc..(m + 1) * pc]
    }

    #[inline]
    pub fn temperature_mode_grad(&self, m: usize, j: usize) -> &[f64] {
        let (d, pc) = (self.grid.dim(), self.quad.len());
        &self.temp_grads[(m * d + j) * pc..(m * d + j + 1) * pc]
    }

    fn check_alpha(&self, alpha: &[f64]) -> Result<()> {
        if alpha.len() != self.velocity.len() {
            return Err(invalid(format!(
                "expected {} velocity coefficients, got {}",
                self.velocity.len(),
                alpha.len()
            )));
        }
        Ok(())
    }

    fn check_nu(&self, nu: &[f64]) -> Result<()> {
        if nu.len() != self.temperature.len() {
            return Err(invalid(format!(
                "expected {} temperature coefficients, got {}",
                self.temperature.len(),
                nu.len()
            )));
        }
        Ok(())
    }

    /// `u = sum alpha_i omega_i` and `grad u` on the quadrature grid.
    pub fn velocity_on_quad(&self, alpha: &[f64]) -> Result<QuadVelocity> {
        self.check_alpha(alpha)?;
        let (d, pc) = (self.grid.dim(), self.quad.len());
        let mut u = vec![vec![0.0; pc]; d];
        let mut grad = vec![vec![0.0; pc]; d * d];
        for (m, a) in alpha.iter().enumerate() {
            if *a == 0.0 {
                continue;
            }
            for (c, uc) in u.iter_mut().enumerate() {
                axpy(uc, *a, self.velocity_mode_values(m, c));
            }
            for i in 0..d {
                for j in 0..d {
                    axpy(&mut grad[i * d + j], *a, self.velocity_mode_grad(m, i, j));
                }
            }
        }
        Ok(QuadVelocity { u, grad })
    }

    /// `theta = sum nu_j w_j` and `grad theta` on the quadrature grid.
    pub fn temperature_on_quad(&self, nu: &[f64]) -> Result<QuadScalar> {
        self.check_nu(nu)?;
        let (d, pc) = (self.grid.dim(), self.quad.len());
        let mut value = vec![0.0; pc];
        let mut grad = vec![vec![0.0; pc]; d];
        for (m, a) in nu.iter().enumerate() {
            if *a == 0.0 {
                continue;
            }
            axpy(&mut value, *a, self.temperature_mode_values(m));
            for (j, g) in grad.iter_mut().enumerate() {
                axpy(g, *a, self.temperature_mode_grad(m, j));
            }
        }
        Ok(QuadScalar { value, grad })
    }

    /// Quadrature-grid index of every base-grid point.
    pub fn base_indices(&self) -> &[usize] {
        &self.base_to_quad
    }

    /// Restriction of a quadrature-grid field to the base grid points.
    pub fn restrict_to_base(&self, quad_field: &[f64]) -> Vec<f64> {
        self.base_to_quad.iter().map(|q| quad_field[*q]).collect()
    }

    pub fn synthesize_velocity(&self, alpha: &[f64]) -> Result<Vec<Vec<f64>>> {
        let q = self.velocity_on_quad(alpha)?;
        Ok(q.u.iter().map(|c| self.restrict_to_base(c)).collect())
    }

    pub fn synthesize_temperature(&self, nu: &[f64]) -> Result<Vec<f64>> {
        let q = self.temperature_on_quad(nu)?;
        Ok(self.restrict_to_base(&q.value))
    }

    /// `alpha_i = (field, omega_i)` by base-grid quadrature.
    pub fn project_velocity(&self, field: &[Vec<f64>]) -> Result<Vec<f64>> {
        let d = self.grid.dim();
        if field.len() != d || field.iter().any(|c| c.len() != self.grid.len()) {
            return Err(invalid("velocity field does not live on the basis grid"));
        }
        let w = self.grid.weight();
        Ok((0..self.velocity.len())
            .map(|m| {
                let mut s = 0.0;
                for (c, fc) in field.iter().enumerate() {
                    let vals = self.velocity_mode_values(m, c);
                    s += fc.iter().zip(&self.base_to_quad).map(|(f, q)| f * vals[*q]).sum::<f64>();
                }
                w * s
            })
            .collect())
    }

    /// `nu_j = (field, w_j)` by base-grid quadrature.
    pub fn project_temperature(&self, field: &[f64]) -> Result<Vec<f64>> {
        if field.len() != self.grid.len() {
            return Err(invalid("temperature field does not live on the basis grid"));
        }
        let w = self.grid.weight();
        Ok((0..self.temperature.len())
            .map(|m| {
                let vals = self.temperature_mode_values(m);
                w * field.iter().zip(&self.base_to_quad).map(|(f, q)| f * vals[*q]).sum::<f64>()
            })
            .collect())
    }

    /// Weak-form load `R_i = (f, omega_i) + (T, grad omega_i)` on the
    /// quadrature grid; `tensor[i * d + j]` pairs with `d_j (omega)_i`.
    pub fn velocity_load(&self, vector: &[Vec<f64>], tensor: &[Vec<f64>]) -> Vec<f64> {
        let d = self.grid.dim();
        let w = self.quad.weight();
        (0..self.velocity.len())
            .into_par_iter()
            .map(|m| {
                let mut s = 0.0;
                for (c, fc) in vector.iter().enumerate() {
                    s += dot(fc, self.velocity_mode_values(m, c));
                }
                for i in 0..d {
                    for j in 0..d {
                        if let Some(t) = tensor.get(i * d + j) {
                            s += dot(t, self.velocity_mode_grad(m, i, j));
                        }
                    }
                }
                w * s
            })
            .collect()
    }

    /// Weak-form load `R_i = (f, w_i) + (g, grad w_i)` on the quadrature grid.
    pub fn temperature_load(&self, scalar: &[f64], vector: &[Vec<f64>]) -> Vec<f64> {
        let w = self.quad.weight();
        (0..self.temperature.len())
            .into_par_iter()
            .map(|m| {
                let mut s = dot(scalar, self.temperature_mode_values(m));
                for (j, g) in vector.iter().enumerate() {
                    s += dot(g, self.temperature_mode_grad(m, j));
                }
                w * s
            })
            .collect()
    }

    /// Weighted velocity mass matrix `G_ij = (rho omega_i, omega_j)`.
    pub fn velocity_mass(&self, rho_quad: &[f64]) -> DMatrix<f64> {
        let (d, n, w) = (self.grid.dim(), self.velocity.len(), self.quad.weight());
        let weighted: Vec<Vec<Vec<f64>>> = (0..n)
            .into_par_iter()
            .map(|i| (0..d).map(|c| mul(rho_quad, self.velocity_mode_values(i, c))).collect())
            .collect();
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                (0..=i)
                    .map(|j| (0..d).map(|c| dot(&weighted[i][c], self.velocity_mode_values(j, c))).sum::<f64>() * w)
                    .collect()
            })
            .collect();
        symmetric_from_lower(n, &rows)
    }

    /// Weighted temperature mass matrix `(rho w_i, w_j)`.
    pub fn temperature_mass(&self, rho_quad: &[f64]) -> DMatrix<f64> {
        let (k, w) = (self.temperature.len(), self.quad.weight());
        let rows: Vec<Vec<f64>> = (0..k)
            .into_par_iter()
            .map(|i| {
                let wi = mul(rho_quad, self.temperature_mode_values(i));
                (0..=i).map(|j| dot(&wi, self.temperature_mode_values(j)) * w).collect()
            })
            .collect();
        symmetric_from_lower(k, &rows)
    }
}

fn symmetric_from_lower(n: usize, rows: &[Vec<f64>]) -> DMatrix<f64> {
    let mut g = DMatrix::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            g[(i, j)] = *v;
            g[(j, i)] = *v;
        }
    }
    g
}

#[inline]
pub(crate) fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    y.iter_mut().zip(x).for_each(|(y, x)| *y += a * x);
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn basis(d: usize, n: usize) -> GalerkinBasis {
        let grid = TorusGrid::new(d, n).unwrap();
        GalerkinBasis::new(&grid, 16, 12, 2).unwrap()
    }

    #[test]
    fn discrete_orthonormality() {
        for (d, n) in [(2, 16), (3, 8)] {
            let b = basis(d, n);
            let g = b.velocity_mass(&vec![1.0; b.quad_grid().len()]);
            let t = b.temperature_mass(&vec![1.0; b.quad_grid().len()]);
            assert!((g - DMatrix::identity(16, 16)).amax() < 1e-12);
            assert!((t - DMatrix::identity(12, 12)).amax() < 1e-12);
        }
    }

    #[test]
    fn base_grid_projection_matches_mass() {
        let b = basis(2, 16);
        for m in 0..16 {
            let mut e = vec![0.0; 16];
            e[m] = 1.0;
            let f = b.synthesize_velocity(&e).unwrap();
            let back = b.project_velocity(&f).unwrap();
            for (i, v) in back.iter().enumerate() {
                assert!((v - e[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn modes_are_divergence_free() {
        for (d, n) in [(2, 16), (3, 8)] {
            let b = basis(d, n);
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let alpha: Vec<f64> = (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let q = b.velocity_on_quad(&alpha).unwrap();
            let qp = b.quad_grid().len();
            for p in 0..qp {
                let div: f64 = (0..d).map(|i| q.grad[i * d + i][p]).sum();
                assert!(div.abs() < 1e-12);
            }
            let u = b.synthesize_velocity(&alpha).unwrap();
            let div = b.grid().divergence(&u).unwrap();
            assert!(div.iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn random_round_trips() {
        let b = basis(2, 16);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let alpha: Vec<f64> = (0..16).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let nu: Vec<f64> = (0..12).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let a2 = b.project_velocity(&b.synthesize_velocity(&alpha).unwrap()).unwrap();
        let n2 = b.project_temperature(&b.synthesize_temperature(&nu).unwrap()).unwrap();
        assert!(alpha.iter().zip(&a2).all(|(x, y)| (x - y).abs() < 1e-12));
        assert!(nu.iter().zip(&n2).all(|(x, y)| (x - y).abs() < 1e-12));
    }

    #[test]
    fn constant_temperature_projects_to_first_mode() {
        let b = basis(2, 16);
        let nu = b.project_temperature(&vec![3.0; b.grid().len()]).unwrap();
        assert!((nu[0] - 3.0 * TAU).abs() < 1e-12);
        assert!(nu[1..].iter().all(|v| v.abs() < 1e-12));
        let mut e2 = vec![0.0; 12];
        e2[1] = 1.0;
        let back = b.project_temperature(&b.synthesize_temperature(&e2).unwrap()).unwrap();
        assert!((back[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn first_modes_have_unit_wavevectors() {
        let b = basis(2, 16);
        let m = &b.velocity_modes()[0];
        assert_eq!(m.wavevector, [0, 1, 0]);
        assert_eq!(m.trig, Trig::Cos);
        assert_eq!(b.velocity_modes()[1].wavevector, [0, 1, 0]);
        assert_eq!(b.velocity_modes()[1].trig, Trig::Sin);
        assert_eq!(b.velocity_modes()[2].wavevector, [1, 0, 0]);
        assert_eq!(b.temperature_modes()[0].trig, Trig::Const);
    }

    #[test]
    fn construction_is_deterministic() {
        let a = basis(3, 8);
        let b = basis(3, 8);
        assert_eq!(a.velocity_modes(), b.velocity_modes());
        assert_eq!(a.temperature_modes(), b.temperature_modes());
    }

    #[test]
    fn errors_on_mismatch() {
        let b = basis(2, 16);
        assert!(b.synthesize_velocity(&[1.0; 3]).is_err());
        assert!(b.project_velocity(&[vec![0.0; 10], vec![0.0; 10]]).is_err());
        assert!(b.project_temperature(&[0.0; 7]).is_err());
        let g = TorusGrid::new(2, 8).unwrap();
        assert!(GalerkinBasis::new(&g, 10_000, 4, 2).is_err());
    }
}
