use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::cutoffs::SmoothCutoff;
use super::dft;
use super::torus::{torus_dist, MultiplierKind, MultiplierMeta, MultiplierSample, TorusGrid};
use crate::error::{invalid, precondition, Error, Result};
use crate::signals::{e, Signal};

/// Local multiplier `(1/len) sum_{n in [c, c+len)} phi((n-c)/len) g(n) e(-n beta)`.
pub fn omega(g: &Signal, interval: (i64, usize), phi: &SmoothCutoff, grid: TorusGrid) -> Result<MultiplierSample> {
    let (c, len) = interval;
    if len == 0 {
        return Err(invalid("interval length must be at least 1"));
    }
    let q = grid.q();
    if q < 8 * len {
        return Err(Error::Resolution(format!("q = {q} < 8 * len = {}", 8 * len)));
    }
    let mut buf = vec![Complex64::new(0.0, 0.0); q];
    let lf = len as f64;
    for (k, b) in buf.iter_mut().take(len).enumerate() {
        *b = g.at(c + k as i64) * (phi.eval(k as f64 / lf) / lf);
    }
    dft::forward(&mut buf);
    for (j, v) in buf.iter_mut().enumerate() {
        *v *= e(-(c as f64) * grid.point(j));
    }
    MultiplierSample::new(
        grid,
        buf,
        MultiplierMeta { interval: Some(interval), delta: None, kind: MultiplierKind::Omega },
    )
}

/// The composition `t -> t psi(|t|/delta)` on complex values.
pub fn psi_delta_value(v: Complex64, delta: f64, psi: &SmoothCutoff) -> Complex64 {
    let r = v.norm();
    if r == 0.0 {
        return v;
    }
    v * psi.eval(r / delta)
}

/// Smooth restriction of a multiplier to its delta level set.
pub fn psi_delta(m: &MultiplierSample, delta: f64) -> Result<MultiplierSample> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(invalid(format!("delta = {delta} outside (0,1]")));
    }
    let psi = SmoothCutoff::level_band();
    let values = m.values.iter().map(|v| psi_delta_value(*v, delta, &psi)).collect();
    let meta = MultiplierMeta { delta: Some(delta), kind: MultiplierKind::OmegaDelta, ..m.meta.clone() };
    MultiplierSample::new(m.grid, values, meta)
}

/// Grid frequencies where the unweighted local coefficient has modulus at least `delta`.
pub fn large_spectrum(g: &Signal, interval: (i64, usize), delta: f64, grid: TorusGrid) -> Result<Vec<f64>> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(invalid(format!("delta = {delta} outside (0,1]")));
    }
    let m = omega(g, interval, &SmoothCutoff::indicator(0.0, 1.0), grid)?;
    // absorb rounding so that exact peaks of height delta are kept
    let thr = delta * (1.0 - 1e-12);
    Ok(m.values.iter().enumerate().filter(|(_, v)| v.norm() >= thr).map(|(j, _)| grid.point(j)).collect())
}

/// Greedy maximal `spacing`-separated subset, scanning in increasing frequency.
pub fn extract_net(spec: &[f64], spacing: f64) -> Result<Vec<f64>> {
    if !(spacing > 0.0) {
        return Err(invalid("spacing must be positive"));
    }
    let mut pts: Vec<f64> = spec.iter().map(|b| b.rem_euclid(1.0)).collect();
    pts.sort_by(f64::total_cmp);
    let mut kept: Vec<f64> = Vec::new();
    for p in pts {
        // the tolerance keeps grid points exactly `spacing` apart
        if kept.iter().all(|k| torus_dist(*k, p) >= spacing * (1.0 - 1e-9)) {
            kept.push(p);
        }
    }
    Ok(kept)
}

pub fn min_gap(lambda: &[f64]) -> f64 {
    let mut pts: Vec<f64> = lambda.iter().map(|b| b.rem_euclid(1.0)).collect();
    pts.sort_by(f64::total_cmp);
    if pts.len() < 2 {
        return f64::INFINITY;
    }
    let mut gap = 1.0 - pts[pts.len() - 1] + pts[0];
    for w in pts.windows(2) {
        gap = gap.min(w[1] - w[0]);
    }
    gap
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleBound {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

/// Sampling bound for `P(theta) = sum_{k<n} c_k e(k theta)` on a `1/n`-separated set.
pub fn sample_bound_check(coeffs: &[Complex64], lambda: &[f64]) -> Result<SampleBound> {
    let n = coeffs.len().max(1);
    let gap = min_gap(lambda);
    if gap < (1.0 / n as f64) * (1.0 - 1e-9) {
        return Err(precondition(format!("frequency gap {gap} below 1/n = {}", 1.0 / n as f64)));
    }
    let lhs: f64 = lambda
        .iter()
        .map(|&t| {
            let step = e(t);
            let mut z = Complex64::new(1.0, 0.0);
            let mut p = Complex64::new(0.0, 0.0);
            for c in coeffs {
                p += c * z;
                z *= step;
            }
            p.norm_sqr()
        })
        .sum();
    let rhs = n as f64 * coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>();
    let ratio = if rhs > 0.0 { lhs / rhs } else { 0.0 };
    Ok(SampleBound { lhs, rhs, ratio })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::prng;
    use crate::signals::{gen_character, gen_rademacher, gen_random_phase};
    use rand::Rng;

    #[test]
    fn omega_ones_at_zero() {
        let grid = TorusGrid::new(1024).unwrap();
        let m = omega(&Signal::ones(64), (0, 64), &SmoothCutoff::indicator(0.0, 1.0), grid).unwrap();
        assert!((m.values[0] - 1.0).norm() < 1e-12);
        assert!(m.sup_norm() <= 1.0 + 1e-12);
    }

    #[test]
    fn omega_character_peak() {
        let grid = TorusGrid::new(2048).unwrap();
        let theta = 37.0 / 2048.0;
        let g = gen_character(theta, 256).unwrap();
        let m = omega(&g, (0, 256), &SmoothCutoff::indicator(0.0, 1.0), grid).unwrap();
        assert!((m.values[37].norm() - 1.0).abs() < 1e-12);
        assert!(m.sup_norm() <= 1.0 + 1e-12);
    }

    #[test]
    fn omega_matches_direct_sum() {
        let grid = TorusGrid::new(2048).unwrap();
        let g = gen_random_phase(4, 400).unwrap();
        let phi = SmoothCutoff::trapezoid(0.0, 0.2, 0.8, 1.0);
        let (c, len) = (37i64, 256usize);
        let m = omega(&g, (c, len), &phi, grid).unwrap();
        for j in (0..2048).step_by(7) {
            let b = grid.point(j);
            let direct: Complex64 = (c..c + len as i64)
                .map(|n| g.at(n) * phi.eval((n - c) as f64 / len as f64) * e(-(n as f64) * b))
                .sum::<Complex64>()
                / len as f64;
            assert!((direct - m.values[j]).norm() < 1e-10);
        }
    }

    #[test]
    fn omega_resolution_error() {
        let grid = TorusGrid::new(512).unwrap();
        let r = omega(&Signal::ones(128), (0, 128), &SmoothCutoff::indicator(0.0, 1.0), grid);
        assert!(matches!(r, Err(Error::Resolution(_))));
    }

    #[test]
    fn psi_delta_examples() {
        let grid = TorusGrid::new(16).unwrap();
        let d = 0.25;
        let zero = MultiplierSample::constant(grid, Complex64::new(0.0, 0.0));
        assert!(psi_delta(&zero, d).unwrap().sup_norm() == 0.0);
        let c = Complex64::from_polar(0.75 * d, 0.3);
        let m = MultiplierSample::constant(grid, c);
        assert_eq!(psi_delta(&m, d).unwrap().values[3], c);
        let m = MultiplierSample::constant(grid, Complex64::new(d / 8.0, 0.0));
        assert_eq!(psi_delta(&m, d).unwrap().sup_norm(), 0.0);
    }

    #[test]
    fn psi_delta_lipschitz() {
        let psi = SmoothCutoff::level_band();
        let d = 0.125;
        let mut lip = 0.0f64;
        for i in 1..4000 {
            let r0 = i as f64 * 3.0 * d / 4000.0;
            let r1 = r0 + 1e-7;
            let (a, b) =
                (psi_delta_value(Complex64::new(r0, 0.0), d, &psi), psi_delta_value(Complex64::new(r1, 0.0), d, &psi));
            lip = lip.max((a - b).norm() / 1e-7);
        }
        assert!(lip <= 4.0, "{lip}");
    }

    #[test]
    fn spectrum_examples() {
        let grid = TorusGrid::new(8192).unwrap();
        let theta = 0.3;
        let g = gen_character(theta, 1024).unwrap();
        let s = large_spectrum(&g, (0, 1024), 0.5, grid).unwrap();
        let near = grid.point(grid.nearest(theta));
        assert!(s.iter().any(|b| (b - near).abs() < 1e-15));

        let s = large_spectrum(&Signal::ones(1024), (0, 1024), 0.5, grid).unwrap();
        assert!(!s.is_empty());
        assert!(s.iter().all(|b| torus_dist(*b, 0.0) <= 1.0 / 1024.0));

        let grid = TorusGrid::new(32768).unwrap();
        let g = gen_rademacher(7, 4096).unwrap();
        assert!(large_spectrum(&g, (0, 4096), 0.3, grid).unwrap().is_empty());
    }

    #[test]
    fn rademacher_sup_bound() {
        let grid = TorusGrid::new(32768).unwrap();
        let g = gen_rademacher(7, 4096).unwrap();
        let m = omega(&g, (0, 4096), &SmoothCutoff::indicator(0.0, 1.0), grid).unwrap();
        let h = 4096f64;
        assert!(m.sup_norm() <= 5.0 * (h.ln() / h).sqrt());
    }

    #[test]
    fn net_examples() {
        assert_eq!(extract_net(&[0.1, 0.100001, 0.5], 0.01).unwrap(), vec![0.1, 0.5]);
        let sp = 0.01;
        let ap: Vec<f64> = (0..10).map(|k| 0.2 + k as f64 * sp / 2.0).collect();
        let net = extract_net(&ap, sp).unwrap();
        assert_eq!(net.len(), 5);
        assert!(min_gap(&net) >= sp * (1.0 - 1e-9));
    }

    #[test]
    fn sampling_examples() {
        let r = sample_bound_check(&[Complex64::new(0.7, 0.1)], &[0.0]).unwrap();
        assert!((r.ratio - 1.0).abs() < 1e-14);
        let coeffs = vec![Complex64::new(1.0, 0.0); 64];
        let lam: Vec<f64> = (0..64).map(|k| k as f64 / 64.0).collect();
        let r = sample_bound_check(&coeffs, &lam).unwrap();
        assert!(r.ratio <= 2.0);
        assert!(sample_bound_check(&coeffs, &[0.0, 0.001]).is_err());
    }

    #[test]
    fn sampling_large_sieve_oracle() {
        let mut rng = prng(12);
        for _ in 0..20 {
            let n = 32;
            let coeffs: Vec<Complex64> =
                (0..n).map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect();
            let mut lam = vec![rng.gen::<f64>()];
            while lam.len() < 20 {
                let t = lam[lam.len() - 1] + 1.0 / n as f64 + rng.gen::<f64>() * 0.02;
                if t - lam[0] > 1.0 - 1.0 / n as f64 {
                    break;
                }
                lam.push(t);
            }
            let r = sample_bound_check(&coeffs, &lam).unwrap();
            let gap = min_gap(&lam);
            let sieve = (n as f64 - 1.0 + 1.0 / gap) / n as f64;
            assert!(r.ratio <= sieve + 1e-12);
        }
    }
}
