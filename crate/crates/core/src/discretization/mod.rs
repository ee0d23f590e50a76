//! Periodic torus grid, Fourier Galerkin bases and spectral operators.

mod basis;
mod grid;

use std::io::Write;

pub use basis::{GalerkinBasis, QuadScalar, QuadVelocity, ScalarMode, Trig, VelocityMode};
pub use grid::{SpectralDerivatives, TorusGrid};

use crate::error::{invalid, Result};
use crate::io::CsvWriter;


/// Writes one row per grid point: coordinates, then each named component.
pub fn write_field_csv<W: Write>(grid: &TorusGrid, components: &[(&str, &[f64])], out: W) -> Result<W> {
    if components.iter().any(|(_, c)| c.len() != grid.len()) {
        return Err(invalid("snapshot component does not live on the grid"));
    }
    let d = grid.dim();
    let mut cols: Vec<&str> = ["x1", "x2", "x3"][..d].to_vec();
    cols.extend(components.iter().map(|(n, _)| *n));
    let mut w = CsvWriter::new(out, "field snapshot, one row per grid point", &cols)?;
    let mut row = Vec::with_capacity(cols.len());
    for p in 0..grid.len() {
        row.clear();
        row.extend_from_slice(&grid.point(p)[..d]);
        row.extend(components.iter().map(|(_, c)| c[p]));
        w.row(&row)?;
    }
    Ok(w.finish()?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integration_by_parts_on_torus() {
        let g = TorusGrid::new(2, 16).unwrap();
        let f = g.sample(|x| (x[0] + 2.0 * x[1]).sin() + 0.3 * (3.0 * x[1]).cos());
        let v = vec![g.sample(|x| (2.0 * x[0]).cos() * x[1].sin()), g.sample(|x| (x[0] - x[1]).sin())];
        let grad = g.gradient(&f).unwrap();
        let lhs: f64 = (0..2).map(|c| g.integrate(&grad[c].iter().zip(&v[c]).map(|(a, b)| a * b).collect::<Vec<_>>())).sum();
        let div = g.divergence(&v).unwrap();
        let rhs = -g.integrate(&f.iter().zip(&div).map(|(a, b)| a * b).collect::<Vec<_>>());
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn quadratic_products_do_not_alias_into_retained_modes() {
        // cos(7 x)^2 = (1 + cos(14 x)) / 2: on N = 16 the cos(14 x) part
        // aliases to cos(2 x); on the padded grid it is truncated away.
        let g = TorusGrid::new(2, 16).unwrap();
        let q = TorusGrid::new(2, 32).unwrap();
        let f = g.sample(|x| (7.0 * x[0]).cos());
        let fq = g.interpolate(&f, &q).unwrap();
        let sq: Vec<f64> = fq.iter().map(|v| v * v).collect();
        let back = g.truncate_spectrum(&q.forward(&sq), &q);
        let phys = g.inverse(&back);
        assert!(phys.iter().all(|v| (v - 0.5).abs() < 1e-12));
        let naive: Vec<f64> = f.iter().map(|v| v * v).collect();
        assert!(naive.iter().any(|v| (v - 0.5).abs() > 0.1));
    }

    #[test]
    fn snapshot_csv_shape() {
        let g = TorusGrid::new(2, 8).unwrap();
        let rho = vec![1.0; g.len()];
        let out = write_field_csv(&g, &[("rho", &rho)], Vec::new()).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 2 + g.len());
        assert!(text.lines().nth(1).unwrap() == "x1,x2,rho");
    }
}
