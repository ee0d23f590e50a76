//! Small symmetric matrices in dimension 2 or 3.

use std::ops::{Add, Mul, Neg, Sub};

use rand::Rng;

/// A symmetric `d x d` matrix, `d` in `{1, 2, 3}`, stored densely.
///
/// Entries outside the leading `d x d` block are kept at zero so that
/// the Frobenius product and norm never need the dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymMat {
    dim: usize,
    a: [[f64; 3]; 3],
}

impl SymMat {
    pub fn zeros(dim: usize) -> Self {
        assert!((1..=3).contains(&dim), "dimension must be 1, 2 or 3");
        Self { dim, a: [[0.0; 3]; 3] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.a[i][i] = 1.0;
        }
        m
    }

    pub fn diag(entries: &[f64]) -> Self {
        let mut m = Self::zeros(entries.len());
        for (i, v) in entries.iter().enumerate() {
            m.a[i][i] = *v;
        }
        m
    }

    /// Builds from a square array, symmetrizing it.
    pub fn from_rows(dim: usize, rows: &[[f64; 3]; 3]) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m.a[i][j] = 0.5 * (rows[i][j] + rows[j][i]);
            }
        }
        m
    }

    /// Symmetric part of a general `d x d` matrix given row-major.
    pub fn sym_part(dim: usize, full: &[f64]) -> Self {
        debug_assert_eq!(full.len(), dim * dim);
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m.a[i][j] = 0.5 * (full[i * dim + j] + full[j * dim + i]);
            }
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i][j]
    }

    /// Sets entry `(i, j)` and its mirror `(j, i)`.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[i][j] = v;
        self.a[j][i] = v;
    }

    /// Frobenius product `A : B`.
    #[inline]
    pub fn ddot(&self, other: &Self) -> f64 {
        let mut s = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                s += self.a[i][j] * other.a[i][j];
            }
        }
        s
    }

    #[inline]
    pub fn norm_sq(&self) -> f64 {
        self.ddot(self)
    }

    /// Frobenius norm `|A|`.
    #[inline]
    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.a.iter().flatten().all(|v| *v == 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.a.iter().flatten().all(|v| v.is_finite())
    }

    /// Applies `f` to every entry (both triangles).
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let mut m = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                m.a[i][j] = f(self.a[i][j]);
            }
        }
        m
    }

    /// Number of independent entries, `d (d + 1) / 2`.
    pub fn packed_len(dim: usize) -> usize {
        dim * (dim + 1) / 2
    }

    /// Independent entries: diagonal first, then the strict upper triangle
    /// row by row.
    pub fn pack(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(Self::packed_len(self.dim));
        for i in 0..self.dim {
            v.push(self.a[i][i]);
        }
        for i in 0..self.dim {
            for j in (i + 1)..self.dim {
                v.push(self.a[i][j]);
            }
        }
        v
    }

    pub fn unpack(dim: usize, v: &[f64]) -> Self {
        debug_assert_eq!(v.len(), Self::packed_len(dim));
        let mut m = Self::zeros(dim);
        let mut k = 0;
        for i in 0..dim {
            m.a[i][i] = v[k];
            k += 1;
        }
        for i in 0..dim {
            for j in (i + 1)..dim {
                m.set(i, j, v[k]);
                k += 1;
            }
        }
        m
    }

    /// Multiplicity of each packed entry in the Frobenius product
    /// (1 on the diagonal, 2 off it).
    pub fn packed_weights(dim: usize) -> Vec<f64> {
        let mut w = vec![1.0; dim];
        w.resize(Self::packed_len(dim), 2.0);
        w
    }

    /// Uniformly distributed direction on the unit Frobenius sphere.
    pub fn random_unit<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        loop {
            let m = Self::random_entries(dim, -1.0, 1.0, rng);
            let n = m.norm();
            if n > 1e-3 && n <= 3.0 {
                return m * (1.0 / n);
            }
        }
    }

    /// Symmetric matrix with independent entries uniform in `[lo, hi)`.
    pub fn random_entries<R: Rng + ?Sized>(dim: usize, lo: f64, hi: f64, rng: &mut R) -> Self {
        let v: Vec<f64> = (0..Self::packed_len(dim)).map(|_| rng.gen_range(lo..hi)).collect();
        Self::unpack(dim, &v)
    }

    /// Row-major entries of the full `d x d` matrix.
    pub fn to_full(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim * self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                out.push(self.a[i][j]);
            }
        }
        out
    }
}

impl Add for SymMat {
    type Output = SymMat;
    fn add(mut self, rhs: SymMat) -> SymMat {
        for i in 0..3 {
            for j in 0..3 {
                self.a[i][j] += rhs.a[i][j];
            }
        }
        self
    }
}

impl Sub for SymMat {
    type Output = SymMat;
    fn sub(mut self, rhs: SymMat) -> SymMat {
        for i in 0..3 {
            for j in 0..3 {
                self.a[i][j] -= rhs.a[i][j];
            }
        }
        self
    }
}

impl Mul<f64> for SymMat {
    type Output = SymMat;
    fn mul(mut self, s: f64) -> SymMat {
        for row in self.a.iter_mut() {
            for v in row.iter_mut() {
                *v *= s;
            }
        }
        self
    }
}

impl Neg for SymMat {
    type Output = SymMat;
    fn neg(self) -> SymMat {
        self * -1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_norm() {
        assert_eq!(SymMat::identity(2).norm_sq(), 2.0);
        assert_eq!(SymMat::identity(3).norm_sq(), 3.0);
    }

    #[test]
    fn pack_roundtrip_and_weights() {
        let mut m = SymMat::zeros(3);
        m.set(0, 0, 1.0);
        m.set(1, 2, -2.5);
        m.set(0, 1, 0.5);
        let p = m.pack();
        assert_eq!(SymMat::unpack(3, &p), m);
        let w = SymMat::packed_weights(3);
        let weighted: f64 = p.iter().zip(&w).map(|(v, w)| w * v * v).sum();
        assert!((weighted - m.norm_sq()).abs() < 1e-15);
    }

    #[test]
    fn sym_part_symmetrizes() {
        let m = SymMat::sym_part(2, &[0.0, 1.0, 0.0, 0.0]);
        assert_eq!(m.get(0, 1), 0.5);
        assert_eq!(m.get(1, 0), 0.5);
    }
}
