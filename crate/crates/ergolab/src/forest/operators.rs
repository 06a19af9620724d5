//! The operators `F^1, F^2, F^3` and the inequalities measured on them.
//!
//! `F^l(J; x, a) = int Omega'_J(alpha beta) cut_l(alpha beta) f^(beta) e(beta (x + alpha a)) dbeta`
//! where `Omega'_J(alpha beta) = Psi_delta(Omega_J(alpha beta)) psi_D(beta)` and
//! `cut_1 = 1`, `cut_2 = Xi^0_J`, `cut_3 = Xi_J`.  Since `alpha` need not be
//! an integer the integrand lives on `[-1/2, 1/2)`, which `psi_D` confines to
//! a neighbourhood of the origin, and `Omega_J` is summed directly there.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::branches::{Branch, Bubbles};
use super::span;
use crate::entropy::{ent, jump_count, NormTag, VectorFamily};
use crate::error::{invalid, precondition, Result};
use crate::fourier::dft;
use crate::fourier::spectrum::{min_gap, psi_delta_value};
use crate::fourier::torus::{centered, MultiplierSample};
use crate::fourier::{SmoothCutoff, TorusGrid};
use crate::grids::DyadicInterval;
use crate::params::Params;
use crate::signals::{e, Signal};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorSetup {
    pub alpha: f64,
    pub d_div: u64,
    pub delta: f64,
    /// Time cutoff inside `Omega_J`.
    pub phi: SmoothCutoff,
}

impl OperatorSetup {
    pub fn from_params(p: &Params) -> Self {
        Self { alpha: p.alpha, d_div: p.d_div, delta: p.delta, phi: SmoothCutoff::phi_tau(p.tau, p.a0) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FLevel {
    One,
    Two,
    Three,
}

impl FLevel {
    pub fn from_index(i: u8) -> Result<Self> {
        match i {
            1 => Ok(Self::One),
            2 => Ok(Self::Two),
            3 => Ok(Self::Three),
            _ => Err(invalid(format!("operator level {i} not in 1..=3"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AMode {
    /// `a = x`.
    Diagonal,
    Fixed(i64),
}

impl AMode {
    fn at(self, x: i64) -> i64 {
        match self {
            AMode::Diagonal => x,
            AMode::Fixed(a) => a,
        }
    }
}

/// The frequency side `Omega'_J(alpha beta) cut(alpha beta)` sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FKernel {
    pub grid: TorusGrid,
    pub values: Vec<Complex64>,
}

impl FKernel {
    /// `cut` and `eta` both act on `alpha beta`.
    pub fn new(
        interval: (i64, usize),
        g: &Signal,
        setup: &OperatorSetup,
        cut: Option<&Bubbles>,
        eta: Option<&MultiplierSample>,
        grid: TorusGrid,
    ) -> Result<Self> {
        let (c, len) = interval;
        if len == 0 {
            return Err(invalid("interval length must be positive"));
        }
        let psi_d = SmoothCutoff::psi_d(setup.d_div);
        let band = SmoothCutoff::level_band();
        let weights: Vec<Complex64> =
            (0..len).map(|k| g.at(c + k as i64) * (setup.phi.eval(k as f64 / len as f64) / len as f64)).collect();
        let values = grid
            .points()
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|b| {
                let beta = centered(b);
                let w = psi_d.eval(beta);
                if w == 0.0 {
                    return Complex64::new(0.0, 0.0);
                }
                let gamma = setup.alpha * beta;
                let step = e(-gamma);
                let mut ph = e(-(c as f64) * gamma);
                let mut om = Complex64::new(0.0, 0.0);
                for wk in &weights {
                    om += wk * ph;
                    ph *= step;
                }
                let mut v = psi_delta_value(om, setup.delta, &band) * w;
                if let Some(cut) = cut {
                    v *= cut.eval(gamma);
                }
                if let Some(eta) = eta {
                    v *= eta.interp(gamma);
                }
                v
            })
            .collect();
        Ok(Self { grid, values })
    }

    /// `(1/q) sum_j K(beta_j) f^(beta_j) e(beta_j y)` with `beta_j` centred.
    pub fn apply(&self, fhat: &[Complex64], y: f64) -> Complex64 {
        let q = self.grid.q();
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, (k, fh)) in self.values.iter().zip(fhat).enumerate() {
            if k.re != 0.0 || k.im != 0.0 {
                acc += k * fh * e(centered(j as f64 / q as f64) * y);
            }
        }
        acc / q as f64
    }

    pub fn minus(&self, other: &FKernel) -> FKernel {
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        FKernel { grid: self.grid, values }
    }
}

/// `f^(beta_j) = sum_n f(n) e(-n beta_j)`; the grid must cover the window.
pub fn transform(f: &Signal, grid: TorusGrid) -> Result<Vec<Complex64>> {
    let q = grid.q();
    if f.len() > q {
        return Err(invalid(format!("signal length {} exceeds grid {q}", f.len())));
    }
    let mut buf = vec![Complex64::new(0.0, 0.0); q];
    for (i, v) in f.values().iter().enumerate() {
        buf[(f.window_start() + i as i64).rem_euclid(q as i64) as usize] += v;
    }
    dft::forward(&mut buf);
    Ok(buf)
}

fn level_cut(level: FLevel, len: usize, branch: Option<&Branch>) -> Result<Option<Bubbles>> {
    match (level, branch) {
        (FLevel::One, _) => Ok(None),
        (_, None) => Err(invalid("levels 2 and 3 need a branch")),
        (FLevel::Two, Some(b)) => Ok(Some(Bubbles::xi0(&b.freqs, len as f64))),
        (FLevel::Three, Some(b)) => Ok(Some(Bubbles::xi(&b.freqs, len as f64, b.r_clamped as f64))),
    }
}

fn kernel_for(
    level: FLevel,
    j: &DyadicInterval,
    g: &Signal,
    setup: &OperatorSetup,
    branch: Option<&Branch>,
    grid: TorusGrid,
) -> Result<FKernel> {
    let (c, len) = span(j)?;
    let cut = level_cut(level, len, branch)?;
    FKernel::new((c, len), g, setup, cut.as_ref(), None, grid)
}

/// `F^level(J; x, a)`, or `F(J) - F(parent)` when `hat` names the parent.
#[allow(clippy::too_many_arguments)]
pub fn f_operator(
    level: FLevel,
    j: &DyadicInterval,
    f: &Signal,
    g: &Signal,
    setup: &OperatorSetup,
    x: i64,
    a: i64,
    branch: Option<&Branch>,
    hat: Option<&DyadicInterval>,
    grid: TorusGrid,
) -> Result<Complex64> {
    let fhat = transform(f, grid)?;
    let y = x as f64 + setup.alpha * a as f64;
    let mut k = kernel_for(level, j, g, setup, branch, grid)?;
    if let Some(parent) = hat {
        if !parent.contains(j) {
            return Err(invalid("hat interval must contain J"));
        }
        k = k.minus(&kernel_for(level, parent, g, setup, branch, grid)?);
    }
    Ok(k.apply(&fhat, y))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub sum: f64,
    /// `R^3 delta^2 |I_j|`.
    pub unit: f64,
    pub constant: f64,
    pub points: usize,
}

/// `sum_{J in B_s} sum_{x in J} |F^2(J; x, x) - F^3(J; x, x)|^2` against `R^3 delta^2 |I_j|`.
pub fn f2_f3_gap(branch: &Branch, f: &Signal, g: &Signal, setup: &OperatorSetup, grid: TorusGrid) -> Result<GapReport> {
    let fhat = transform(f, grid)?;
    let parts: Vec<(f64, usize)> = branch
        .intervals
        .par_iter()
        .map(|j| -> Result<(f64, usize)> {
            let k2 = kernel_for(FLevel::Two, j, g, setup, Some(branch), grid)?;
            let k3 = kernel_for(FLevel::Three, j, g, setup, Some(branch), grid)?;
            let d = k2.minus(&k3);
            let pts = j.integer_points();
            let n = pts.clone().count();
            let s = pts.map(|x| d.apply(&fhat, x as f64 * (1.0 + setup.alpha)).norm_sqr()).sum();
            Ok((s, n))
        })
        .collect::<Result<_>>()?;
    let sum: f64 = parts.iter().map(|p| p.0).sum();
    let points = parts.iter().map(|p| p.1).sum();
    let r = branch.r_clamped as f64;
    let unit = r.powi(3) * setup.delta * setup.delta * branch.parent_top.len();
    Ok(GapReport { sum, unit, constant: sum / unit, points })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContainmentReport {
    pub points: usize,
    /// Points with `|F^1| > 2t`.
    pub f1_hits: usize,
    /// Points with `|F^2| > t`.
    pub f2_hits: usize,
    /// Points in the first set but not the second.
    pub violations: usize,
}

/// Pointwise check that `{|F^1| > 2t}` lies inside `{|F^2| > t}` along a branch, with `a = x`.
pub fn superlevel_containment(
    branch: &Branch,
    f: &Signal,
    g: &Signal,
    setup: &OperatorSetup,
    t: f64,
    grid: TorusGrid,
) -> Result<ContainmentReport> {
    let fhat = transform(f, grid)?;
    let parts: Vec<ContainmentReport> = branch
        .intervals
        .par_iter()
        .map(|j| -> Result<ContainmentReport> {
            let k1 = kernel_for(FLevel::One, j, g, setup, Some(branch), grid)?;
            let k2 = kernel_for(FLevel::Two, j, g, setup, Some(branch), grid)?;
            let mut r = ContainmentReport { points: 0, f1_hits: 0, f2_hits: 0, violations: 0 };
            for x in j.integer_points() {
                let y = x as f64 * (1.0 + setup.alpha);
                let big1 = k1.apply(&fhat, y).norm() > 2.0 * t;
                let big2 = k2.apply(&fhat, y).norm() > t;
                r.points += 1;
                r.f1_hits += big1 as usize;
                r.f2_hits += big2 as usize;
                r.violations += (big1 && !big2) as usize;
            }
            Ok(r)
        })
        .collect::<Result<_>>()?;
    Ok(parts.into_iter().fold(ContainmentReport { points: 0, f1_hits: 0, f2_hits: 0, violations: 0 }, |a, b| {
        ContainmentReport {
            points: a.points + b.points,
            f1_hits: a.f1_hits + b.f1_hits,
            f2_hits: a.f2_hits + b.f2_hits,
            violations: a.violations + b.violations,
        }
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingleScaleReport {
    pub points: usize,
    pub hits: usize,
    pub fraction: f64,
    /// `t^-10 U^4 delta^2`.
    pub bound1: f64,
    /// `t^-10 U^4 ||eta(alpha .) f^_{I'}||^2 / |I|`.
    pub bound2: f64,
    pub vacuous1: bool,
    pub vacuous2: bool,
}

/// Superlevel set of the single-scale operator with `J_N(x) = [x + 1, x + N]`
/// over the integer points of the boundary core of `I`.
#[allow(clippy::too_many_arguments)]
pub fn single_scale_check(
    j_len: usize,
    f: &Signal,
    g: &Signal,
    setup: &OperatorSetup,
    eta: &MultiplierSample,
    i: &DyadicInterval,
    t: f64,
    u: f64,
    a_mode: AMode,
    grid: TorusGrid,
) -> Result<SingleScaleReport> {
    if !j_len.is_power_of_two() {
        return Err(invalid(format!("scale {j_len} is not a power of two")));
    }
    if !(t > 0.0 && u >= 1.0) {
        return Err(invalid("need t > 0 and U >= 1"));
    }
    let fhat = transform(f, grid)?;
    let core = i.boundary_core();
    let xs: Vec<i64> = (core.lo.ceil() as i64..core.hi.ceil() as i64).collect();
    let hits: usize = xs
        .par_iter()
        .map(|&x| -> Result<usize> {
            let k = FKernel::new((x + 1, j_len), g, setup, None, Some(eta), grid)?;
            let y = x as f64 + setup.alpha * a_mode.at(x) as f64;
            Ok((k.apply(&fhat, y).norm() > t) as usize)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum();
    let pref = t.powi(-10) * u.powi(4);
    let bound1 = pref * setup.delta * setup.delta;

    let d = setup.d_div as f64;
    let grow = d * d * t.powi(-4) * u * u;
    let half = ((grow * i.len()).min(1e15) / 2.0).ceil() as i64;
    let centre = ((i.left() + i.right()) / 2.0).round() as i64;
    let local = f.restrict((centre - half).max(f.window_start()), (centre + half).min(f.window_end()));
    let lhat = transform(&local, grid)?;
    let energy: f64 = lhat
        .iter()
        .zip(grid.points())
        .map(|(v, b)| (eta.interp(setup.alpha * centered(b)).norm() * v.norm()).powi(2))
        .sum::<f64>()
        / grid.q() as f64;
    let bound2 = pref * energy / i.len();
    let points = xs.len();
    let fraction = if points == 0 { 0.0 } else { hits as f64 / points as f64 };
    Ok(SingleScaleReport { points, hits, fraction, bound1, bound2, vacuous1: bound1 >= 1.0, vacuous2: bound2 >= 1.0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnapCheck {
    pub lhs: f64,
    /// `R^-3 / |J|`.
    pub rhs: f64,
    pub ratio: f64,
}

const SNAP_NODES: usize = 64;

/// `sum_theta int_{|beta - theta| <= 1/(R|J|)} |G_J(beta) - G_J(theta)|^2` by the midpoint rule,
/// with `G_J(t) = (1/|J|) sum_{m in J} g(m) e(-(m - x) t)` and `x` the centre of `J` by default.
pub fn freq_snap_check(j: &DyadicInterval, g: &Signal, freqs: &[f64], r: f64, x: Option<f64>) -> Result<SnapCheck> {
    let (c, len) = span(j)?;
    if r < 1.0 {
        return Err(invalid("R must be at least 1"));
    }
    let lenf = len as f64;
    let radius = 1.0 / (r * lenf);
    if min_gap(freqs) < 2.0 * radius {
        return Err(precondition(format!("frequency gap {} below bubble width {}", min_gap(freqs), 2.0 * radius)));
    }
    let x = x.unwrap_or(c as f64 + lenf / 2.0);
    let big_g = |t: f64| -> Complex64 {
        (0..len as i64).map(|k| g.at(c + k) * e(-((c + k) as f64 - x) * t)).sum::<Complex64>() / lenf
    };
    let w = 2.0 * radius / SNAP_NODES as f64;
    let lhs: f64 = freqs
        .par_iter()
        .map(|&theta| {
            let g0 = big_g(theta);
            (0..SNAP_NODES).map(|i| (big_g(theta - radius + (i as f64 + 0.5) * w) - g0).norm_sqr() * w).sum::<f64>()
        })
        .sum();
    let rhs = r.powi(-3) / lenf;
    Ok(SnapCheck { lhs, rhs, ratio: lhs / rhs })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyReport {
    pub p_len: usize,
    /// Scales of the chain `P = I_0 < I_1 < ...`.
    pub scales: Vec<u32>,
    pub lhs: f64,
    /// `eps^2 |P|`.
    pub rhs_eps: f64,
    /// `delta^2 N^1 N^2 |P|`.
    pub rhs_jump: f64,
    pub ratio: f64,
    pub n1: usize,
    pub n2: usize,
    /// `l^1` entropy of the product trajectory at `eps/2`.
    pub d_eps: usize,
    pub d_exact: bool,
    /// Jump counts at `eps / (4 (A + B))`, `A`, `B` the largest `l^2` norms.
    pub n1_fine: usize,
    pub n2_fine: usize,
    pub factor_bound: usize,
    pub factorization_ok: bool,
}

fn local_coefficients(s: &Signal, i: &DyadicInterval, lambda: &[f64]) -> Vec<Complex64> {
    let pts = i.integer_points();
    let n = pts.clone().count() as f64;
    lambda.iter().map(|&theta| pts.clone().map(|m| s.at(m) * e(-theta * m as f64)).sum::<Complex64>() / n).collect()
}

/// `sum_{x in P} max_{P <= I} |sum_theta e(2 theta x) E_I(Mod_-theta g) E_I(Mod_-theta f)|^2`
/// over the dyadic chain from `P` up to scale `top_k`, against
/// `eps^2 |P| + delta^2 N^1_eps N^2_eps |P|`.
#[allow(clippy::too_many_arguments)]
pub fn key_inequality_check(
    p: &DyadicInterval,
    top_k: u32,
    lambda: &[f64],
    f: &Signal,
    g: &Signal,
    delta: f64,
    eps: f64,
) -> Result<KeyReport> {
    let (p0, p_len) = span(p)?;
    if top_k < p.k || lambda.is_empty() {
        return Err(invalid("need top_k >= scale of P and a nonempty frequency set"));
    }
    if min_gap(lambda) < (1.0 / p_len as f64) * (1.0 - 1e-9) {
        return Err(precondition(format!("frequency gap {} below 1/|P|", min_gap(lambda))));
    }
    let scales: Vec<u32> = (p.k..=top_k).collect();
    let chain: Vec<DyadicInterval> =
        scales.iter().map(|&k| DyadicInterval::plain(k, p0.div_euclid(1i64 << k))).collect();
    let (a, b): (Vec<Vec<Complex64>>, Vec<Vec<Complex64>>) =
        chain.par_iter().map(|i| (local_coefficients(f, i, lambda), local_coefficients(g, i, lambda))).unzip();
    let lhs: f64 = (p0..p0 + p_len as i64)
        .map(|x| {
            let phases: Vec<Complex64> = lambda.iter().map(|t| e(2.0 * t * x as f64)).collect();
            a.iter()
                .zip(&b)
                .map(|(ai, bi)| {
                    phases.iter().zip(ai.iter().zip(bi)).map(|(ph, (u, v))| ph * u * v).sum::<Complex64>().norm_sqr()
                })
                .fold(0.0, f64::max)
        })
        .sum();

    let fa = VectorFamily::new(a.clone(), NormTag::L2)?;
    let fb = VectorFamily::new(b.clone(), NormTag::L2)?;
    let n1 = jump_count(&fa, eps)?;
    let n2 = jump_count(&fb, eps)?;
    let pl = p_len as f64;
    let rhs_eps = eps * eps * pl;
    let rhs_jump = delta * delta * (n1 * n2) as f64 * pl;

    // within a run of the a-trajectory and of the b-trajectory the products
    // differ by at most 2 eps' (A + B) in l^1
    let prod = VectorFamily::new(fa.product(&fb)?.vectors().to_vec(), NormTag::L1)?;
    let half = eps / 2.0;
    let d = ent(&prod, half)?;
    let l2 = |v: &Vec<Complex64>| v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let ab = a.iter().map(l2).fold(0.0, f64::max) + b.iter().map(l2).fold(0.0, f64::max);
    let fine = if ab > 0.0 { half / (2.0 * ab) } else { half };
    let n1_fine = jump_count(&fa, fine)?;
    let n2_fine = jump_count(&fb, fine)?;
    let factor_bound = (n1_fine + 1) * (n2_fine + 1);
    Ok(KeyReport {
        p_len,
        scales,
        lhs,
        rhs_eps,
        rhs_jump,
        ratio: lhs / (rhs_eps + rhs_jump),
        n1,
        n2,
        d_eps: d.value,
        d_exact: d.exact,
        n1_fine,
        n2_fine,
        factor_bound,
        factorization_ok: d.value <= factor_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::{gen_character, gen_random_phase};

    fn setup(delta: f64) -> OperatorSetup {
        OperatorSetup { alpha: 2f64.sqrt(), d_div: 15, delta, phi: SmoothCutoff::phi_tau(0.2, 10.0) }
    }

    #[test]
    fn ones_give_damped_average() {
        let h = 4096;
        let ones = Signal::ones(h);
        let grid = TorusGrid::new(1 << 15).unwrap();
        let j = DyadicInterval::plain(6, 32);
        let v = f_operator(FLevel::One, &j, &ones, &ones, &setup(1.0), 2048, 2048, None, None, grid).unwrap();
        assert!((0.9..=1.0 + 1e-6).contains(&v.re) && v.im.abs() < 1e-3, "{v}");
        let zero = f_operator(FLevel::One, &j, &Signal::zeros(h), &ones, &setup(1.0), 2048, 2048, None, None, grid);
        assert_eq!(zero.unwrap(), Complex64::new(0.0, 0.0));
        assert!(f_operator(FLevel::Two, &j, &ones, &ones, &setup(1.0), 2048, 2048, None, None, grid).is_err());
        let hat = DyadicInterval::plain(7, 16);
        let d = f_operator(FLevel::One, &j, &ones, &ones, &setup(1.0), 2048, 2048, None, Some(&hat), grid).unwrap();
        assert!(d.norm() < 0.05, "{d}");
    }

    #[test]
    fn kernel_matches_direct_integral() {
        // F^1 against the Poisson-side sum over n of f(n) psi_D^v(...) evaluated by brute force
        let f = gen_random_phase(1, 256).unwrap();
        let g = gen_random_phase(2, 256).unwrap();
        let s = setup(0.125);
        let grid = TorusGrid::new(1 << 12).unwrap();
        let k = FKernel::new((100, 16), &g, &s, None, None, grid).unwrap();
        let fhat = transform(&f, grid).unwrap();
        let y = 120.0 + s.alpha * 100.0;
        let fine = TorusGrid::new(1 << 16).unwrap();
        let kf = FKernel::new((100, 16), &g, &s, None, None, fine).unwrap();
        let a = k.apply(&fhat, y);
        let b = kf.apply(&transform(&f, fine).unwrap(), y);
        assert!((a - b).norm() < 1e-3 * (1.0 + b.norm()), "{a} {b}");
    }

    #[test]
    fn snap_vanishes_and_decays() {
        let j = DyadicInterval::plain(6, 1);
        let z = freq_snap_check(&j, &Signal::zeros(256), &[0.1, 0.6], 8.0, None).unwrap();
        assert_eq!(z.lhs, 0.0);
        let g = gen_random_phase(5, 256).unwrap();
        let lam = [0.1, 0.35, 0.6, 0.85];
        let l: Vec<f64> =
            [8.0, 16.0, 32.0].iter().map(|&r| freq_snap_check(&j, &g, &lam, r, None).unwrap().lhs).collect();
        let slope = (l[2] / l[0]).log2() / 2.0;
        assert!(slope <= -2.5, "{slope}");
        let ch = gen_character(0.35, 256).unwrap();
        let c = freq_snap_check(&j, &ch, &[0.35], 32.0, None).unwrap();
        // G_J is flat to second order at its own frequency
        assert!(c.ratio < 1.0, "{c:?}");
    }

    #[test]
    fn key_inequality_trivial_and_single_scale() {
        let p = DyadicInterval::plain(4, 3);
        let f = gen_random_phase(7, 1024).unwrap();
        let lam = [0.0, 0.25, 0.5, 0.75];
        let z = key_inequality_check(&p, 8, &lam, &f, &Signal::zeros(1024), 0.25, 0.5).unwrap();
        assert_eq!(z.lhs, 0.0);
        // g at level delta on each frequency: one scale gives lhs <= delta^2 |Lambda| sum|a|^2 |P|
        let delta = 0.125;
        let gv: Vec<Complex64> =
            (0..1024).map(|n| lam.iter().map(|t| e(t * n as f64)).sum::<Complex64>() * delta).collect();
        let g = Signal::new(gv, 0, "level").unwrap();
        let r = key_inequality_check(&p, 4, &lam, &f, &g, delta, 0.1).unwrap();
        assert!(r.lhs <= delta * delta * lam.len() as f64 * 16.0 * 1.0001, "{r:?}");
        assert!(r.factorization_ok && r.d_exact);
        let gap = key_inequality_check(&p, 8, &[0.1, 0.12], &f, &g, delta, 0.1);
        assert!(gap.is_err());
    }

    #[test]
    fn single_scale_trivial_cases() {
        let grid = TorusGrid::new(1 << 12).unwrap();
        let eta = MultiplierSample::constant(grid, Complex64::new(1.0, 0.0));
        let i = DyadicInterval::plain(6, 4);
        let g = gen_random_phase(1, 1024).unwrap();
        let s = setup(0.0625);
        let r =
            single_scale_check(16, &Signal::zeros(1024), &g, &s, &eta, &i, 0.1, 4.0, AMode::Diagonal, grid).unwrap();
        assert_eq!(r.hits, 0);
        assert_eq!(r.points, 22);
        let r =
            single_scale_check(16, &g, &Signal::zeros(1024), &s, &eta, &i, 0.1, 4.0, AMode::Fixed(300), grid).unwrap();
        assert_eq!(r.fraction, 0.0);
        assert!(r.vacuous1);
    }
}
