//! Poisson summation for the weighted bilinear sum
//! `(1/N) sum_{n<=N} sum_m w(alpha n - m) f(x - m) g(x + n)`.
//!
//! Writing `f(x - m)` through its transform and summing over `m` gives
//!
//! `sum_xi  int f^(beta) w^(xi - beta) e(beta x) (1/N) sum_n g(x+n) e(alpha n xi) e(-alpha n beta) dbeta`
//!
//! with `w^` the transform on the line.  No extra `e(-alpha x xi)` phase
//! appears with this indexing of `g`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cutoffs::SmoothCutoff;
use super::dft;
use super::torus::TorusGrid;
use crate::error::{invalid, Result};
use crate::signals::{e, Signal};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoissonCheck {
    pub lhs: Complex64,
    pub rhs: Complex64,
    pub diff: f64,
    pub q: usize,
}

pub fn poisson_lhs(w: &SmoothCutoff, f: &Signal, g: &Signal, n: usize, alpha: f64, x: i64) -> Complex64 {
    let (lo, hi) = w.support();
    let mut acc = Complex64::new(0.0, 0.0);
    for k in 1..=n as i64 {
        let y = alpha * k as f64;
        let gv = g.at(x + k);
        if gv == Complex64::new(0.0, 0.0) {
            continue;
        }
        let (m0, m1) = ((y - hi).ceil() as i64, (y - lo).floor() as i64);
        for m in m0..=m1 {
            acc += f.at(x - m) * gv * w.eval(y - m as f64);
        }
    }
    acc / n as f64
}

/// `w^(l/q)` for `|l| <= reach` by a zero-padded transform of `w` samples.
fn weight_transform(w: &SmoothCutoff, q: usize, reach: usize) -> (Vec<Complex64>, usize) {
    let (lo, hi) = w.support();
    assert!(hi - lo <= 1.0 + 1e-12, "weight support must have length at most 1");
    let p = (8 * (reach / q + 2)).next_power_of_two().max(64);
    let len = q * p;
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    for i in 0..=p {
        let v = lo + i as f64 / p as f64;
        if v <= hi {
            buf[i % len] += Complex64::new(w.eval(v) / p as f64, 0.0);
        }
    }
    dft::forward(&mut buf);
    // shift back from the sampling origin `lo`
    for (l, v) in buf.iter_mut().enumerate() {
        let signed = if l > len / 2 { l as f64 - len as f64 } else { l as f64 };
        *v *= e(-signed / q as f64 * lo);
    }
    (buf, len)
}

pub fn poisson_bilinear(
    w: &SmoothCutoff,
    f: &Signal,
    g: &Signal,
    n: usize,
    alpha: f64,
    xi_max: usize,
    x: i64,
) -> Result<PoissonCheck> {
    if n == 0 {
        return Err(invalid("n must be positive"));
    }
    let lhs = poisson_lhs(w, f, g, n, alpha, x);

    let span = (f.window_start() - x).unsigned_abs().max((f.window_end() - x).unsigned_abs()) as usize
        + (alpha.abs().ceil() as usize + 1) * n
        + 2;
    let grid = TorusGrid::for_window(1, span);
    let q = grid.q();

    // f^(beta_j) e(beta_j x)
    let mut fh = vec![Complex64::new(0.0, 0.0); q];
    for (i, v) in f.values().iter().enumerate() {
        let k = (f.window_start() + i as i64).rem_euclid(q as i64) as usize;
        fh[k] += v;
    }
    dft::forward(&mut fh);
    for (j, v) in fh.iter_mut().enumerate() {
        *v *= e(grid.point(j) * x as f64);
    }

    let reach = (xi_max + 1) * q;
    let (what, wlen) = weight_transform(w, q, reach);
    let w_at = |l: i64| what[l.rem_euclid(wlen as i64) as usize];

    // e(-alpha n beta_j) rows
    let gn: Vec<Complex64> = (1..=n as i64).map(|k| g.at(x + k) / n as f64).collect();
    let rows: Vec<Vec<Complex64>> =
        (1..=n).map(|k| (0..q).map(|j| e(-alpha * k as f64 * grid.point(j))).collect()).collect();

    let xi_max = xi_max as i64;
    let rhs: Complex64 = (-xi_max..=xi_max)
        .into_par_iter()
        .map(|xi| {
            let coef: Vec<Complex64> =
                gn.iter().enumerate().map(|(i, c)| c * e(alpha * (i + 1) as f64 * xi as f64)).collect();
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..q {
                let mut s = Complex64::new(0.0, 0.0);
                for (c, row) in coef.iter().zip(&rows) {
                    s += c * row[j];
                }
                acc += fh[j] * w_at(xi * q as i64 - j as i64) * s;
            }
            acc / q as f64
        })
        .sum();
    Ok(PoissonCheck { lhs, rhs, diff: (lhs - rhs).norm(), q })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::gen_random_phase;

    fn bump(l: f64) -> SmoothCutoff {
        // support [0, 2/l] with unit peak
        SmoothCutoff::trapezoid(0.0, 1.0 / l, 1.0 / l, 2.0 / l)
    }

    #[test]
    fn transform_of_weight() {
        let w = bump(2.0);
        let (what, len) = weight_transform(&w, 64, 8 * 64);
        for l in [0i64, 5, -9, 200] {
            let eta = l as f64 / 64.0;
            let direct: Complex64 =
                (0..20000).map(|i| (i as f64 + 0.5) / 20000.0).map(|v| w.eval(v) * e(-eta * v) / 20000.0).sum();
            let got = what[l.rem_euclid(len as i64) as usize];
            assert!((direct - got).norm() < 1e-7, "l={l} {direct} {got}");
        }
    }

    #[test]
    fn zero_f_gives_zero() {
        let w = bump(2.0);
        let r = poisson_bilinear(&w, &Signal::zeros(32), &Signal::ones(64), 16, 2f64.sqrt(), 8, 20).unwrap();
        assert_eq!(r.lhs, Complex64::new(0.0, 0.0));
        assert!(r.rhs.norm() < 1e-15);
    }

    #[test]
    fn ones_agree() {
        let w = bump(2.0);
        let f = Signal::ones(96);
        let g = Signal::ones(96);
        let xi = (8.0 * w.derivative_scale()).ceil() as usize;
        let r = poisson_bilinear(&w, &f, &g, 24, 2f64.sqrt(), xi, 40).unwrap();
        assert!(r.diff < 1e-6, "{r:?}");
    }

    #[test]
    fn random_agree_and_tail_decays() {
        let w = bump(2.0);
        let f = gen_random_phase(1, 80).unwrap();
        let g = gen_random_phase(2, 80).unwrap();
        let l = w.derivative_scale().ceil() as usize;
        let mut prev = f64::INFINITY;
        for xi in [l, 2 * l, 4 * l, 8 * l] {
            let r = poisson_bilinear(&w, &f, &g, 20, 2f64.sqrt(), xi, 40).unwrap();
            assert!(r.diff <= prev / 2.0 + 1e-9, "xi={xi} {} {prev}", r.diff);
            prev = r.diff;
        }
        assert!(prev < 1e-6, "{prev}");
    }
}
