//! Half-derivative control of multipliers and the grid-shift approximation.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::cutoffs::SmoothCutoff;
use super::dft;
use super::spectrum::{omega, psi_delta};
use super::torus::{centered, MultiplierKind, MultiplierMeta, MultiplierSample, TorusGrid};
use crate::error::{invalid, Result};
use crate::signals::{e, Signal};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct H12Check {
    pub max_inv: f64,
    pub bound: f64,
    pub ratio: f64,
}

/// `||m||_2 + ||m||_2^{1/2} ||d(e(k .) m)||_2^{1/2}`.
pub fn h12_bound(m: &MultiplierSample, k: i64) -> f64 {
    let l2 = m.l2_norm();
    l2 + l2.sqrt() * m.derivative_l2(k).sqrt()
}

/// `max_n |(f^ m)^v(n)|` against the half-derivative bound.
pub fn sobolev_h12_check(m: &MultiplierSample, k: i64, f: &Signal) -> Result<H12Check> {
    let q = m.q();
    if f.len() > q {
        return Err(invalid(format!("signal length {} exceeds grid {q}", f.len())));
    }
    let mut buf = vec![Complex64::new(0.0, 0.0); q];
    for (i, v) in f.values().iter().enumerate() {
        buf[(f.window_start() + i as i64).rem_euclid(q as i64) as usize] += v;
    }
    dft::forward(&mut buf);
    for (b, mv) in buf.iter_mut().zip(&m.values) {
        *b *= mv;
    }
    dft::inverse(&mut buf);
    let max_inv = buf.iter().map(|v| v.norm() / q as f64).fold(0.0, f64::max);
    let bound = h12_bound(m, k);
    Ok(H12Check { max_inv, bound, ratio: if bound > 0.0 { max_inv / bound } else { 0.0 } })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailCheck {
    pub tail: f64,
    pub bound: f64,
    /// `tail / bound`, the measured constant.
    pub constant: f64,
}

/// `sum_{n not in 3J} |m^v(n)|` against `|J|^{-1/2} ||d(e(x_J .) m)||_2`.
pub fn sobolev_tail_check(m: &MultiplierSample, interval: (i64, usize)) -> TailCheck {
    let (c, len) = interval;
    let q = m.q() as i64;
    let coeffs = m.inverse_coeffs();
    let (lo, hi) = (c - len as i64, c + 2 * len as i64);
    let tail: f64 = (0..q)
        .map(|r| {
            // representative of r nearest the interval centre
            let mid = c + len as i64 / 2;
            let n = r + q * ((mid - r) as f64 / q as f64).round() as i64;
            (n, coeffs[r as usize].norm())
        })
        .filter(|(n, _)| *n < lo || *n >= hi)
        .map(|(_, a)| a)
        .sum();
    let centre = c + len as i64 / 2;
    let bound = m.derivative_l2(-centre) / (len as f64).sqrt();
    TailCheck { tail, bound, constant: if bound > 0.0 { tail / bound } else { 0.0 } }
}

/// `beta -> m(alpha beta) psi_D(beta)` with `beta` read in `[-1/2, 1/2)`.
/// A local multiplier of `[c, c + len)` is demodulated by `e(c .)` before
/// interpolating, so only its slow envelope is resampled.
pub fn omega_prime(m: &MultiplierSample, alpha: f64, d_div: u64) -> MultiplierSample {
    let psi = SmoothCutoff::psi_d(d_div);
    let c = m.meta.interval.map_or(0, |(c, _)| c) as f64;
    let envelope = m.map(|b, v| v * e(c * b));
    let values = m
        .grid
        .points()
        .map(|b| {
            let beta = centered(b);
            let w = psi.eval(beta);
            if w == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            let gamma = alpha * beta;
            envelope.interp(gamma) * e(-c * gamma) * w
        })
        .collect();
    MultiplierSample { grid: m.grid, values, meta: MultiplierMeta { kind: MultiplierKind::Custom, ..m.meta.clone() } }
}

/// `0 <= eta <= 1`, a smooth bump of half-width `width` around `centre` with `|eta'| <~ 2/width`.
pub fn frequency_window(grid: TorusGrid, centre: f64, width: f64) -> MultiplierSample {
    let bump = SmoothCutoff::trapezoid(-width, -width / 2.0, width / 2.0, width);
    MultiplierSample::from_fn(grid, MultiplierMeta::custom(), |b| Complex64::new(bump.eval(centered(b - centre)), 0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftCheck {
    pub a_norm: f64,
    pub scale: f64,
    pub constant: f64,
}

/// `||(Omega_{J(a),delta} - Omega_{J,delta}) eta||_A` against `(U / sqrt(Delta))^{1/2}`,
/// where `J(a) = (a, a + |J|]` and `a` lies in the boundary core of `J`.
pub fn shift_approx_check(
    g: &Signal,
    j: (i64, usize),
    a: i64,
    delta: f64,
    eta: &MultiplierSample,
    u: f64,
    delta_grid: u64,
) -> Result<ShiftCheck> {
    let (c, len) = j;
    let core = (len as f64 / delta_grid as f64).ceil() as i64;
    if a < c || a >= c + core.max(1) {
        return Err(crate::error::precondition(format!("a = {a} outside the boundary core [{c}, {})", c + core)));
    }
    let ind = SmoothCutoff::indicator(0.0, 1.0);
    let shifted = psi_delta(&omega(g, (a + 1, len), &ind, eta.grid)?, delta)?;
    let base = psi_delta(&omega(g, j, &ind, eta.grid)?, delta)?;
    let a_norm = shifted.sub(&base).mul(eta).a_norm();
    let scale = (u / (delta_grid as f64).sqrt()).sqrt();
    Ok(ShiftCheck { a_norm, scale, constant: a_norm / scale })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::gen_random_phase;

    #[test]
    fn constant_multiplier_h12() {
        let grid = TorusGrid::new(256).unwrap();
        let m = MultiplierSample::constant(grid, Complex64::new(1.0, 0.0));
        let r = sobolev_h12_check(&m, 0, &Signal::ones(64)).unwrap();
        assert!((r.max_inv - 1.0).abs() < 1e-12);
        assert!((r.bound - 1.0).abs() < 1e-12);
        assert!((r.ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn narrow_bump_h12() {
        let n = 64;
        let grid = TorusGrid::new(4096).unwrap();
        let m = frequency_window(grid, 0.0, 1.0 / n as f64);
        let r = sobolev_h12_check(&m, 0, &Signal::ones(1)).unwrap();
        assert!(r.ratio <= 4.0, "{r:?}");
    }

    #[test]
    fn tail_of_local_multipliers() {
        let grid = TorusGrid::new(4096).unwrap();
        let mut worst = 0.0f64;
        for s in 0..20 {
            let g = gen_random_phase(s, 512).unwrap();
            let m = omega(&g, (128, 256), &SmoothCutoff::indicator(0.0, 1.0), grid).unwrap();
            let md = psi_delta(&m, 0.125).unwrap();
            let t = sobolev_tail_check(&md, (128, 256));
            worst = worst.max(t.constant);
            // the undamped multiplier has no tail at all
            assert!(sobolev_tail_check(&m, (128, 256)).tail < 1e-9);
        }
        assert!(worst <= 8.0, "{worst}");
    }

    #[test]
    fn omega_prime_damps() {
        let grid = TorusGrid::new(1024).unwrap();
        let m = MultiplierSample::constant(grid, Complex64::new(1.0, 0.0));
        let p = omega_prime(&m, 2f64.sqrt(), 15);
        assert_eq!(p.values[0], Complex64::new(1.0, 0.0));
        assert_eq!(p.values[512], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn omega_prime_matches_direct_dilation() {
        let grid = TorusGrid::new(1 << 14).unwrap();
        let g = gen_random_phase(8, 4096).unwrap();
        let (c, len) = (3000i64, 64usize);
        let ind = SmoothCutoff::indicator(0.0, 1.0);
        let m = omega(&g, (c, len), &ind, grid).unwrap();
        let alpha = 2f64.sqrt();
        let p = omega_prime(&m, alpha, 15);
        let psi = SmoothCutoff::psi_d(15);
        for j in [5usize, 300, grid.q() - 7, grid.q() - 400] {
            let beta = centered(grid.point(j));
            let direct: Complex64 =
                (0..len as i64).map(|k| g.at(c + k) * e(-((c + k) as f64) * alpha * beta)).sum::<Complex64>()
                    / len as f64;
            let want = direct * psi.eval(beta);
            assert!((p.values[j] - want).norm() < 2e-3, "j={j} {} {want}", p.values[j]);
        }
    }

    #[test]
    fn shift_core_precondition() {
        let grid = TorusGrid::new(4096).unwrap();
        let g = gen_random_phase(3, 1024).unwrap();
        let eta = frequency_window(grid, 0.1, 0.05);
        assert!(shift_approx_check(&g, (256, 256), 256 + 100, 0.125, &eta, 4.0, 9).is_err());
        let r = shift_approx_check(&g, (256, 256), 256 + 10, 0.125, &eta, 4.0, 9).unwrap();
        assert!(r.constant.is_finite());
    }
}
