//! Splitting a signal into band-limited pieces `F_d * f`, `|d| <= 10 D`.
//!
//! `F` is the Fejer kernel on the line, with transform `(1 - |beta|)_+`, and
//! `F_d` has transform `psi(D beta - d) (1 - |beta|)_+` for the unit
//! partition `psi`.  On the integers `F` is the point mass at zero, so the
//! pieces always add back up to `f`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cutoffs::SmoothCutoff;
use super::dft;
use super::torus::TorusGrid;
use crate::error::{invalid, Result};
use crate::signals::Signal;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BandPiece {
    pub d: i64,
    /// Frequency band on the line carrying the transform of `F_d`.
    pub band: (f64, f64),
    /// `F_d * f` on the window of `f`.
    pub values: Vec<Complex64>,
    /// Largest folded multiplier value on the grid outside `band`.
    pub leakage: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FejerDecomposition {
    pub d_div: u64,
    pub q: usize,
    pub pieces: Vec<BandPiece>,
    pub residual: f64,
}

/// Transform of `F_d` on the line.
pub fn piece_transform(beta: f64, d: i64, d_div: u64, psi: &SmoothCutoff) -> f64 {
    let tri = (1.0 - beta.abs()).max(0.0);
    if tri == 0.0 {
        return 0.0;
    }
    psi.eval(d_div as f64 * beta - d as f64) * tri
}

fn band(d: i64, d_div: u64) -> (f64, f64) {
    let df = d_div as f64;
    ((d as f64 - 0.75) / df, (d as f64 + 0.75) / df)
}

pub fn fejer_decompose(f: &Signal, d_div: u64) -> Result<FejerDecomposition> {
    if d_div == 0 {
        return Err(invalid("divisor must be positive"));
    }
    let h = f.len();
    let grid = TorusGrid::for_window(d_div, h);
    let q = grid.q();
    let psi = SmoothCutoff::unit_partition();

    let mut spectrum = vec![Complex64::new(0.0, 0.0); q];
    spectrum[..h].copy_from_slice(f.values());
    dft::forward(&mut spectrum);

    let reach = 10 * d_div as i64;
    let pieces: Vec<BandPiece> = (-reach..=reach)
        .into_par_iter()
        .map(|d| {
            let (lo, hi) = band(d, d_div);
            if hi <= -1.0 || lo >= 1.0 {
                return BandPiece { d, band: (lo, hi), values: vec![Complex64::new(0.0, 0.0); h], leakage: 0.0 };
            }
            // fold the line transform onto the torus: beta and beta - 1
            let mult: Vec<f64> = (0..q)
                .map(|j| {
                    let b = grid.point(j);
                    piece_transform(b, d, d_div, &psi) + piece_transform(b - 1.0, d, d_div, &psi)
                })
                .collect();
            let leakage = (0..q)
                .filter(|&j| {
                    let b = grid.point(j);
                    !(lo < b && b < hi) && !(lo < b - 1.0 && b - 1.0 < hi)
                })
                .map(|j| mult[j].abs())
                .fold(0.0, f64::max);
            let mut buf: Vec<Complex64> = spectrum.iter().zip(&mult).map(|(s, m)| s * m).collect();
            dft::inverse(&mut buf);
            let scale = 1.0 / q as f64;
            let values = buf[..h].iter().map(|v| v * scale).collect();
            BandPiece { d, band: (lo, hi), values, leakage }
        })
        .collect();

    let residual = (0..h)
        .map(|n| {
            let s: Complex64 = pieces.iter().map(|p| p.values[n]).sum();
            (s - f.values()[n]).norm()
        })
        .fold(0.0, f64::max);
    Ok(FejerDecomposition { d_div, q, pieces, residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::gen_random_phase;

    #[test]
    fn point_mass_reconstructs() {
        let r = fejer_decompose(&Signal::point_mass(64, 0), 15).unwrap();
        assert!(r.residual <= 1e-9, "{}", r.residual);
        assert_eq!(r.pieces.len(), 301);
    }

    #[test]
    fn ones_reconstruct() {
        let r = fejer_decompose(&Signal::ones(512), 15).unwrap();
        assert!(r.residual <= 1e-9, "{}", r.residual);
    }

    #[test]
    fn bands_are_narrow_and_clean() {
        let r = fejer_decompose(&gen_random_phase(1, 128).unwrap(), 4).unwrap();
        for p in &r.pieces {
            assert!(p.band.1 - p.band.0 <= 2.0 / 4.0);
            assert!(p.leakage <= 1e-9);
        }
    }

    #[test]
    fn kernel_sum_is_point_mass() {
        // sum_d F_d(n) by direct quadrature on the line
        let psi = SmoothCutoff::unit_partition();
        let k = 4096;
        for n in [0i64, 1, 5, 17] {
            let mut s = 0.0;
            for d in -30..=30 {
                for i in -k..k {
                    let b = i as f64 / k as f64;
                    s += piece_transform(b, d, 3, &psi) * (2.0 * std::f64::consts::PI * n as f64 * b).cos() / k as f64;
                }
            }
            let want = if n == 0 { 1.0 } else { 0.0 };
            assert!((s - want).abs() < 1e-9, "n={n} s={s}");
        }
    }
}
