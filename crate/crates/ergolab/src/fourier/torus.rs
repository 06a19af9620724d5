use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::dft;
use crate::error::{invalid, Result};
use crate::signals::e;

/// `q` equispaced points `j/q` on the torus; integrals become `(1/q) sum_j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TorusGrid {
    q: usize,
}

impl TorusGrid {
    pub fn new(q: usize) -> Result<Self> {
        if q == 0 || !q.is_power_of_two() {
            return Err(invalid(format!("torus size {q} is not a power of two")));
        }
        Ok(Self { q })
    }

    /// Smallest grid with `q >= 8 * d * h`.
    pub fn for_window(d_div: u64, h: usize) -> Self {
        Self { q: (8 * d_div as usize * h.max(1)).next_power_of_two() }
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn point(&self, j: usize) -> f64 {
        j as f64 / self.q as f64
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.q).map(|j| self.point(j))
    }

    /// Index of the grid point nearest to `beta` (mod 1).
    pub fn nearest(&self, beta: f64) -> usize {
        let b = beta - beta.floor();
        ((b * self.q as f64).round() as usize) % self.q
    }
}

/// Distance on the torus.
pub fn torus_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}

/// Signed representative of `beta` in `[-1/2, 1/2)`.
pub fn centered(beta: f64) -> f64 {
    let b = beta.rem_euclid(1.0);
    if b >= 0.5 {
        b - 1.0
    } else {
        b
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MultiplierKind {
    Omega,
    OmegaDelta,
    Xi0,
    Xi,
    Chi,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplierMeta {
    /// Left endpoint and length of the underlying interval.
    pub interval: Option<(i64, usize)>,
    pub delta: Option<f64>,
    pub kind: MultiplierKind,
}

impl MultiplierMeta {
    pub fn custom() -> Self {
        Self { interval: None, delta: None, kind: MultiplierKind::Custom }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplierSample {
    pub grid: TorusGrid,
    pub values: Vec<Complex64>,
    pub meta: MultiplierMeta,
}

impl MultiplierSample {
    pub fn new(grid: TorusGrid, values: Vec<Complex64>, meta: MultiplierMeta) -> Result<Self> {
        if values.len() != grid.q() {
            return Err(invalid(format!("{} values for a grid of {}", values.len(), grid.q())));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(invalid("multiplier values must be finite"));
        }
        Ok(Self { grid, values, meta })
    }

    pub fn from_fn(grid: TorusGrid, meta: MultiplierMeta, f: impl FnMut(f64) -> Complex64) -> Self {
        let values = grid.points().map(f).collect();
        Self { grid, values, meta }
    }

    pub fn constant(grid: TorusGrid, c: Complex64) -> Self {
        Self::from_fn(grid, MultiplierMeta::custom(), |_| c)
    }

    pub fn q(&self) -> usize {
        self.grid.q()
    }

    /// `||m||_{L^2(T)}` by grid quadrature.
    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() / self.q() as f64).sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Fourier coefficients `m^(n) = (1/q) sum_j m(j/q) e(n j/q)`, index `n mod q`.
    pub fn inverse_coeffs(&self) -> Vec<Complex64> {
        let mut buf = self.values.clone();
        dft::inverse(&mut buf);
        let s = 1.0 / self.q() as f64;
        buf.iter_mut().for_each(|v| *v *= s);
        buf
    }

    /// Wiener algebra norm: l1 of the grid Fourier coefficients.
    pub fn a_norm(&self) -> f64 {
        self.inverse_coeffs().iter().map(|v| v.norm()).sum()
    }

    /// Central finite difference of `e(k beta) m(beta)`.
    pub fn derivative(&self, k: i64) -> Vec<Complex64> {
        let q = self.q();
        let tw: Vec<Complex64> = (0..q).map(|j| e(k as f64 * self.grid.point(j)) * self.values[j]).collect();
        let h = q as f64 / 2.0;
        (0..q).map(|j| (tw[(j + 1) % q] - tw[(j + q - 1) % q]) * h).collect()
    }

    /// `||d(e(k .) m)||_{L^2}` with grid differences.
    pub fn derivative_l2(&self, k: i64) -> f64 {
        let d = self.derivative(k);
        (d.iter().map(|v| v.norm_sqr()).sum::<f64>() / self.q() as f64).sqrt()
    }

    /// Linear interpolation at an arbitrary torus point.
    pub fn interp(&self, beta: f64) -> Complex64 {
        let q = self.q();
        let x = beta.rem_euclid(1.0) * q as f64;
        let i = x.floor() as usize % q;
        let t = x - x.floor();
        self.values[i] * (1.0 - t) + self.values[(i + 1) % q] * t
    }

    /// `beta -> m(alpha beta)` by linear resampling.
    pub fn dilate(&self, alpha: f64) -> MultiplierSample {
        let values = self.grid.points().map(|b| self.interp(alpha * b)).collect();
        MultiplierSample {
            grid: self.grid,
            values,
            meta: MultiplierMeta { kind: MultiplierKind::Custom, ..self.meta.clone() },
        }
    }

    pub fn mul(&self, other: &MultiplierSample) -> MultiplierSample {
        assert_eq!(self.grid, other.grid, "grid mismatch");
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect();
        MultiplierSample { grid: self.grid, values, meta: MultiplierMeta::custom() }
    }

    pub fn sub(&self, other: &MultiplierSample) -> MultiplierSample {
        assert_eq!(self.grid, other.grid, "grid mismatch");
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        MultiplierSample { grid: self.grid, values, meta: MultiplierMeta::custom() }
    }

    pub fn map(&self, f: impl Fn(f64, Complex64) -> Complex64) -> MultiplierSample {
        let values = self.grid.points().zip(&self.values).map(|(b, v)| f(b, *v)).collect();
        MultiplierSample { grid: self.grid, values, meta: self.meta.clone() }
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["beta", "re", "im"])?;
        for (b, v) in self.grid.points().zip(&self.values) {
            w.write_record([b.to_string(), v.re.to_string(), v.im.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::prng;
    use rand::Rng;

    #[test]
    fn grid_checks() {
        assert!(TorusGrid::new(12).is_err());
        let g = TorusGrid::for_window(15, 512);
        assert!(g.q() >= 8 * 15 * 512 && g.q().is_power_of_two());
        assert_eq!(g.nearest(0.9999999), 0);
        assert!((torus_dist(0.95, 0.05) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn parseval_on_grid() {
        let grid = TorusGrid::new(256).unwrap();
        let mut rng = prng(3);
        let m = MultiplierSample::from_fn(grid, MultiplierMeta::custom(), |_| {
            Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        });
        let lhs = m.l2_norm().powi(2);
        let rhs: f64 = m.inverse_coeffs().iter().map(|v| v.norm_sqr()).sum();
        assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn constant_a_norm() {
        let grid = TorusGrid::new(64).unwrap();
        let m = MultiplierSample::constant(grid, Complex64::new(0.5, 0.0));
        assert!((m.a_norm() - 0.5).abs() < 1e-14);
        assert!(m.derivative_l2(0) < 1e-12);
    }

    #[test]
    fn csv_export() {
        let grid = TorusGrid::new(8).unwrap();
        let m = MultiplierSample::constant(grid, Complex64::new(1.0, 0.0));
        let p = std::env::temp_dir().join(format!("ergolab-mult-{}.csv", std::process::id()));
        m.save_csv(&p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("beta,re,im\n0,1,0\n0.125,1,0"));
    }
}
