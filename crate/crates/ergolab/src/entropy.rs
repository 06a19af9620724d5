//! Entropy numbers of finite vector families, jump counts along ordered
//! trajectories, and r-variation.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, precondition, Result};
use crate::fourier::{dft, spectrum::min_gap, SmoothCutoff};
use crate::signals::{modulate, Signal};

/// Families up to this size get exact set-cover and packing numbers.
pub const EXACT_LIMIT: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormTag {
    L1,
    L2,
    Sup,
}

pub fn norm(tag: NormTag, v: &[Complex64]) -> f64 {
    match tag {
        NormTag::L1 => v.iter().map(|z| z.norm()).sum(),
        NormTag::L2 => v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt(),
        NormTag::Sup => v.iter().map(|z| z.norm()).fold(0.0, f64::max),
    }
}

fn dist(tag: NormTag, a: &[Complex64], b: &[Complex64]) -> f64 {
    match tag {
        NormTag::L1 => a.iter().zip(b).map(|(x, y)| (x - y).norm()).sum(),
        NormTag::L2 => a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt(),
        NormTag::Sup => a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorFamily {
    vectors: Vec<Vec<Complex64>>,
    dim: usize,
    norm: NormTag,
}

impl VectorFamily {
    pub fn new(vectors: Vec<Vec<Complex64>>, norm: NormTag) -> Result<Self> {
        let dim = vectors.first().map_or(0, Vec::len);
        if let Some(i) = vectors.iter().position(|v| v.len() != dim) {
            return Err(invalid(format!("vector {i} has dimension {}, expected {dim}", vectors[i].len())));
        }
        if vectors.iter().flatten().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(invalid("vector entries must be finite"));
        }
        Ok(Self { vectors, dim, norm })
    }

    pub fn from_real(rows: &[Vec<f64>], norm: NormTag) -> Result<Self> {
        Self::new(rows.iter().map(|r| r.iter().map(|&x| Complex64::new(x, 0.0)).collect()).collect(), norm)
    }

    /// A scalar sequence.
    pub fn scalars(xs: &[f64]) -> Self {
        Self::from_real(&xs.iter().map(|&x| vec![x]).collect::<Vec<_>>(), NormTag::L2).expect("finite scalars")
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn norm_tag(&self) -> NormTag {
        self.norm
    }

    pub fn vectors(&self) -> &[Vec<Complex64>] {
        &self.vectors
    }

    pub fn is_real(&self) -> bool {
        self.vectors.iter().flatten().all(|z| z.im == 0.0)
    }

    pub fn dist(&self, i: usize, j: usize) -> f64 {
        dist(self.norm, &self.vectors[i], &self.vectors[j])
    }

    pub fn sup_norm(&self) -> f64 {
        self.vectors.iter().map(|v| norm(self.norm, v)).fold(0.0, f64::max)
    }

    /// Componentwise product.
    pub fn product(&self, other: &VectorFamily) -> Result<VectorFamily> {
        if self.len() != other.len() || self.dim != other.dim {
            return Err(invalid(format!(
                "shape mismatch: {}x{} against {}x{}",
                self.len(),
                self.dim,
                other.len(),
                other.dim
            )));
        }
        let vectors = self
            .vectors
            .iter()
            .zip(&other.vectors)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x * y).collect())
            .collect();
        Ok(VectorFamily { vectors, dim: self.dim, norm: self.norm })
    }
}

/// A count with a flag saying whether it is exact or only a bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Count {
    pub value: usize,
    pub exact: bool,
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("eps must be positive, got {eps}")))
    }
}

fn max_independent(adj: &[u32], cand: u32, size: u32, best: &mut u32) {
    if cand == 0 {
        *best = (*best).max(size);
        return;
    }
    if size + cand.count_ones() <= *best {
        return;
    }
    let v = cand.trailing_zeros() as usize;
    let bit = 1u32 << v;
    max_independent(adj, cand & !adj[v] & !bit, size + 1, best);
    // leaving out a vertex with no conflicts left never helps
    if adj[v] & cand != 0 {
        max_independent(adj, cand & !bit, size, best);
    }
}

/// Largest subset with pairwise distances `> eps`.
pub fn ent(v: &VectorFamily, eps: f64) -> Result<Count> {
    check_eps(eps)?;
    let n = v.len();
    if n <= EXACT_LIMIT {
        let adj: Vec<u32> =
            (0..n).map(|i| (0..n).filter(|&j| j != i && v.dist(i, j) <= eps).fold(0u32, |m, j| m | 1 << j)).collect();
        let mut best = 0;
        max_independent(&adj, full_mask(n), 0, &mut best);
        return Ok(Count { value: best as usize, exact: true });
    }
    let mut chosen: Vec<usize> = Vec::new();
    for i in 0..n {
        if chosen.iter().all(|&j| v.dist(i, j) > eps) {
            chosen.push(i);
        }
    }
    Ok(Count { value: chosen.len(), exact: false })
}

fn full_mask(n: usize) -> u32 {
    if n == 32 {
        u32::MAX
    } else {
        (1u32 << n) - 1
    }
}

fn cover_search(uncovered: u32, sets: &[u32], widest: u32, depth: usize, best: &mut usize) {
    if uncovered == 0 {
        *best = (*best).min(depth);
        return;
    }
    let need = uncovered.count_ones().div_ceil(widest) as usize;
    if depth + need >= *best {
        return;
    }
    let u = 1u32 << uncovered.trailing_zeros();
    let mut options: Vec<u32> = sets.iter().copied().filter(|s| s & u != 0).collect();
    options.sort_by_key(|s| std::cmp::Reverse((s & uncovered).count_ones()));
    for s in options {
        cover_search(uncovered & !s, sets, widest, depth + 1, best);
    }
}

/// Fewest of `sets` covering `0..n`.
fn min_cover(n: usize, sets: &[u32]) -> usize {
    let widest = sets.iter().map(|s| s.count_ones()).max().unwrap_or(1).max(1);
    let mut best = n;
    cover_search(full_mask(n), sets, widest, 0, &mut best);
    best
}

fn greedy_cover(n: usize, sets: &[Vec<usize>]) -> usize {
    let mut covered = vec![false; n];
    let mut left = n;
    let mut used = 0;
    while left > 0 {
        let pick = sets
            .iter()
            .max_by_key(|s| s.iter().filter(|&&j| !covered[j]).count())
            .expect("every point has its own ball");
        for &j in pick {
            if !covered[j] {
                covered[j] = true;
                left -= 1;
            }
        }
        used += 1;
    }
    used
}

/// Fewest closed `eps`-balls centred at members of `v` covering `v`.
pub fn int_cover(v: &VectorFamily, eps: f64) -> Result<Count> {
    check_eps(eps)?;
    let n = v.len();
    let balls: Vec<Vec<usize>> = (0..n).map(|i| (0..n).filter(|&j| v.dist(i, j) <= eps).collect()).collect();
    Ok(cover_count(n, &balls))
}

fn cover_count(n: usize, balls: &[Vec<usize>]) -> Count {
    if n == 0 {
        return Count { value: 0, exact: true };
    }
    if n <= EXACT_LIMIT {
        let sets: Vec<u32> = balls.iter().map(|b| b.iter().fold(0u32, |m, &j| m | 1 << j)).collect();
        Count { value: min_cover(n, &sets), exact: true }
    } else {
        Count { value: greedy_cover(n, balls), exact: false }
    }
}

/// Fewest closed `eps`-balls with free centres covering `v`.  Exact for real
/// scalars; otherwise centres range over `v` and pairwise midpoints, which
/// gives an upper bound.
pub fn ext_cover(v: &VectorFamily, eps: f64) -> Result<Count> {
    check_eps(eps)?;
    let n = v.len();
    if v.dim() == 1 && v.is_real() {
        let mut xs: Vec<f64> = v.vectors().iter().map(|x| x[0].re).collect();
        xs.sort_by(f64::total_cmp);
        let mut count = 0;
        let mut reach = f64::NEG_INFINITY;
        for x in xs {
            if x > reach {
                count += 1;
                reach = x + 2.0 * eps;
            }
        }
        return Ok(Count { value: count, exact: true });
    }
    let mut centres: Vec<Vec<Complex64>> = v.vectors().to_vec();
    for i in 0..n {
        for j in i + 1..n {
            centres.push(v.vectors[i].iter().zip(&v.vectors[j]).map(|(a, b)| (a + b) / 2.0).collect());
        }
    }
    let balls: Vec<Vec<usize>> =
        centres.iter().map(|c| (0..n).filter(|&j| dist(v.norm, c, &v.vectors[j]) <= eps).collect()).collect();
    let mut count = cover_count(n, &balls);
    count.exact = false;
    Ok(count)
}

/// Longest chain `k_0 < k_1 < ...` in `0..n` with consecutive distances `> eps`,
/// minus one.  Dynamic programming over chain ends; a greedy scan from the
/// first element can undercount (start at `0.3` in `[0.3, 0, 0.6, 1.2]`).
fn chain_jumps(n: usize, eps: f64, d: impl Fn(usize, usize) -> f64) -> usize {
    let mut best = vec![0usize; n];
    for j in 0..n {
        for i in 0..j {
            if best[i] + 1 > best[j] && d(i, j) > eps {
                best[j] = best[i] + 1;
            }
        }
    }
    best.into_iter().max().unwrap_or(0)
}

pub fn jump_count(seq: &VectorFamily, eps: f64) -> Result<usize> {
    check_eps(eps)?;
    Ok(chain_jumps(seq.len(), eps, |i, j| seq.dist(i, j)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpProfile {
    pub epsilons: Vec<f64>,
    pub counts: Vec<usize>,
}

pub fn jump_profile(seq: &VectorFamily, epsilons: &[f64]) -> Result<JumpProfile> {
    let mut epsilons = epsilons.to_vec();
    epsilons.sort_by(|a, b| b.total_cmp(a));
    let counts = epsilons.iter().map(|&e| jump_count(seq, e)).collect::<Result<_>>()?;
    Ok(JumpProfile { epsilons, counts })
}

/// Average over the scale-`k` dyadic interval `[m 2^k, (m+1) 2^k)` containing
/// each `x` of the window, with `f` zero outside it.
pub fn martingale_avgs(f: &Signal, scales: &[u32]) -> Result<Vec<Vec<Complex64>>> {
    let top = scales.iter().copied().max().unwrap_or(0);
    if top >= 62 || f.len() < 1usize << top {
        return Err(precondition(format!("window of {} is shorter than 2^{top}", f.len())));
    }
    let side = 1i64 << top;
    let lo = f.window_start().div_euclid(side) * side;
    let hi = (f.window_end() + side - 1).div_euclid(side) * side;
    let mut prefix = Vec::with_capacity((hi - lo + 1) as usize);
    prefix.push(Complex64::new(0.0, 0.0));
    for n in lo..hi {
        let last = *prefix.last().unwrap();
        prefix.push(last + f.at(n));
    }
    Ok(scales
        .iter()
        .map(|&k| {
            let s = 1i64 << k;
            (f.window_start()..f.window_end())
                .map(|x| {
                    let a = x.div_euclid(s) * s - lo;
                    (prefix[(a + s) as usize] - prefix[a as usize]) / s as f64
                })
                .collect()
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpCheck {
    pub epsilons: Vec<f64>,
    /// `||eps N_eps^{1/2}||_{l^2}` per altitude.
    pub lhs: Vec<f64>,
    pub rhs: f64,
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    pub scales: Vec<u32>,
}

/// `avgs[component][scale][x]`; jumps measured in the l2 norm across components.
fn jump_aggregate(avgs: &[Vec<Vec<Complex64>>], eps_list: &[f64], rhs: f64, scales: Vec<u32>) -> JumpCheck {
    let n_x = avgs.first().and_then(|c| c.first()).map_or(0, Vec::len);
    let n_k = scales.len();
    let totals: Vec<usize> = (0..n_x)
        .into_par_iter()
        .map(|x| {
            let d = |i: usize, j: usize| avgs.iter().map(|c| (c[i][x] - c[j][x]).norm_sqr()).sum::<f64>().sqrt();
            eps_list.iter().map(|&e| chain_jumps(n_k, e, d)).collect::<Vec<_>>()
        })
        .reduce(|| vec![0; eps_list.len()], |a, b| a.iter().zip(&b).map(|(x, y)| x + y).collect());
    let lhs: Vec<f64> = eps_list.iter().zip(&totals).map(|(e, &t)| e * (t as f64).sqrt()).collect();
    let ratios: Vec<f64> = lhs.iter().map(|l| if rhs > 0.0 { l / rhs } else { 0.0 }).collect();
    let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
    JumpCheck { epsilons: eps_list.to_vec(), lhs, rhs, ratios, max_ratio, scales }
}

fn check_components(fvec: &[Signal]) -> Result<()> {
    let first = fvec.first().ok_or_else(|| invalid("need at least one component"))?;
    if fvec.iter().any(|c| c.window_start() != first.window_start() || c.len() != first.len()) {
        return Err(invalid("components must share one window"));
    }
    Ok(())
}

fn vec_norm(fvec: &[Signal]) -> f64 {
    fvec.iter().map(Signal::l2_norm_sq).sum::<f64>().sqrt()
}

fn full_scales(h: usize) -> Vec<u32> {
    (0..=h.ilog2()).collect()
}

pub fn martingale_jump_check(fvec: &[Signal], eps_list: &[f64]) -> Result<JumpCheck> {
    check_components(fvec)?;
    eps_list.iter().try_for_each(|&e| check_eps(e))?;
    let scales = full_scales(fvec[0].len());
    let avgs = fvec.iter().map(|c| martingale_avgs(c, &scales)).collect::<Result<Vec<_>>>()?;
    Ok(jump_aggregate(&avgs, eps_list, vec_norm(fvec), scales))
}

/// `(phi_k * f)(x) = sum_n 2^-k phi(2^-k (x - n)) f(n)` on the window of `f`.
pub fn smooth_avgs(f: &Signal, phi: &SmoothCutoff, scales: &[u32]) -> Vec<Vec<Complex64>> {
    let h = f.len();
    scales
        .iter()
        .map(|&k| {
            let s = (1u64 << k) as f64;
            let (lo, hi) = phi.support();
            let (t0, t1) = ((lo * s).floor() as i64, (hi * s).ceil() as i64);
            let kernel: Vec<f64> = (t0..=t1).map(|t| phi.eval(t as f64 / s) / s).collect();
            let l = kernel.len();
            let size = (h + l + t0.unsigned_abs() as usize + 1).next_power_of_two();
            let mut a = vec![Complex64::new(0.0, 0.0); size];
            a[..h].copy_from_slice(f.values());
            let mut b = vec![Complex64::new(0.0, 0.0); size];
            for (m, &v) in kernel.iter().enumerate() {
                b[m] = Complex64::new(v, 0.0);
            }
            dft::forward(&mut a);
            dft::forward(&mut b);
            a.iter_mut().zip(&b).for_each(|(x, y)| *x *= y);
            dft::inverse(&mut a);
            (0..h as i64).map(|i| a[(i - t0).rem_euclid(size as i64) as usize] / size as f64).collect()
        })
        .collect()
}

pub fn conv_jump_check(fvec: &[Signal], phi: &SmoothCutoff, a0: f64, eps_list: &[f64]) -> Result<JumpCheck> {
    check_components(fvec)?;
    eps_list.iter().try_for_each(|&e| check_eps(e))?;
    let class = phi.bump_class_constant(20_000);
    if class > a0 {
        return Err(precondition(format!("bump class constant {class:.4e} exceeds A0 = {a0}")));
    }
    let mass = phi.discrete_mass(4096);
    if (mass - 1.0).abs() > 1e-6 {
        return Err(precondition(format!("cutoff has mass {mass}, not 1")));
    }
    let scales = full_scales(fvec[0].len());
    let avgs: Vec<_> = fvec.iter().map(|c| smooth_avgs(c, phi, &scales)).collect();
    Ok(jump_aggregate(&avgs, eps_list, vec_norm(fvec), scales))
}

/// Jumps of `(E_I Mod_{-theta} f)_{theta in lambda}` over dyadic `I` with
/// `|I| >= a_factor / kappa`, against `(1 + |lambda|^{1/2} / a_factor) ||f||`.
pub fn sep_freq_jump_check(
    f: &Signal,
    lambda: &[f64],
    kappa: f64,
    a_factor: f64,
    eps_list: &[f64],
) -> Result<JumpCheck> {
    eps_list.iter().try_for_each(|&e| check_eps(e))?;
    if lambda.is_empty() || !(kappa > 0.0) || !(a_factor > 0.0) {
        return Err(invalid("need a nonempty frequency set and positive kappa, A"));
    }
    let gap = min_gap(lambda);
    if gap < kappa {
        return Err(precondition(format!("frequencies are {gap}-separated, below kappa = {kappa}")));
    }
    let floor = (a_factor / kappa).log2().ceil().max(0.0) as u32;
    let top = f.len().ilog2();
    if floor > top {
        return Err(precondition(format!("scale floor 2^{floor} exceeds the window of {}", f.len())));
    }
    let scales: Vec<u32> = (floor..=top).collect();
    let comps: Vec<Signal> = lambda.iter().map(|&t| modulate(f, -t)).collect();
    let avgs = comps.iter().map(|c| martingale_avgs(c, &scales)).collect::<Result<Vec<_>>>()?;
    let rhs = (1.0 + (lambda.len() as f64).sqrt() / a_factor) * f.l2_norm_sq().sqrt();
    Ok(jump_aggregate(&avgs, eps_list, rhs, scales))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Variation {
    pub value: f64,
    /// The supremum over subsequences of the r-th power sum, before the root.
    pub power_sum: f64,
    pub sup: f64,
}

/// `sup (sum_i ||a_{n_i} - a_{n_{i+1}}||^r)^{1/r} + sup ||a_n||`, exact by
/// dynamic programming over the last index of the subsequence.
pub fn r_variation(seq: &VectorFamily, r: f64) -> Result<Variation> {
    if !(r > 2.0) {
        return Err(invalid(format!("r must exceed 2, got {r}")));
    }
    let n = seq.len();
    let mut best = vec![0.0f64; n];
    for j in 0..n {
        for i in 0..j {
            best[j] = best[j].max(best[i] + seq.dist(i, j).powf(r));
        }
    }
    let power_sum = best.iter().copied().fold(0.0, f64::max);
    let sup = seq.sup_norm();
    Ok(Variation { value: power_sum.powf(1.0 / r) + sup, power_sum, sup })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProductCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

pub fn variation_product_check(a: &VectorFamily, b: &VectorFamily, r: f64) -> Result<ProductCheck> {
    let lhs = r_variation(&a.product(b)?, r)?.value;
    let rhs = r_variation(a, r)?.value * r_variation(b, r)?.value;
    Ok(ProductCheck { lhs, rhs, ratio: if rhs > 0.0 { lhs / rhs } else { 0.0 } })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeakTypeCheck {
    /// `sup_lambda lambda |{V^r >= lambda}|^{1/2}` for the uniform probability.
    pub lhs: f64,
    /// Upper bound for `sup_eps ||eps N_eps^{1/2}||_2 + ||sup||_2`.
    pub a_bound: f64,
    pub rhs: f64,
    pub ratio: f64,
}

const EPS_STEPS_PER_OCTAVE: i32 = 16;

/// Weak-L2 size of the r-variation over a family of trajectories, each an
/// equally weighted point of the space.
pub fn weak_type_variation_check(trajs: &[VectorFamily], r: f64) -> Result<WeakTypeCheck> {
    if trajs.is_empty() {
        return Err(invalid("need at least one trajectory"));
    }
    let m = trajs.len() as f64;
    let mut v: Vec<f64> = trajs.iter().map(|t| r_variation(t, r).map(|x| x.value)).collect::<Result<_>>()?;
    v.sort_by(|a, b| b.total_cmp(a));
    let lhs = v.iter().enumerate().map(|(i, x)| x * ((i + 1) as f64 / m).sqrt()).fold(0.0, f64::max);

    // N_eps only changes at pairwise distances; on (e_{j+1}, e_j] the product
    // eps N_eps^{1/2} is at most e_j N_{e_{j+1}}^{1/2}
    let (dmin, dmax) = trajs
        .par_iter()
        .map(|t| {
            let mut lo = f64::INFINITY;
            let mut hi = 0.0f64;
            for i in 0..t.len() {
                for j in 0..i {
                    let d = t.dist(i, j);
                    if d > 0.0 {
                        lo = lo.min(d);
                    }
                    hi = hi.max(d);
                }
            }
            (lo, hi)
        })
        .reduce(|| (f64::INFINITY, 0.0), |a, b| (a.0.min(b.0), a.1.max(b.1)));
    let mut jump_part = 0.0f64;
    if dmax > 0.0 {
        let ratio = 2f64.powf(-1.0 / EPS_STEPS_PER_OCTAVE as f64);
        let mut upper = dmax;
        while upper >= dmin * ratio {
            let lower = upper * ratio;
            let mean_n =
                trajs.par_iter().map(|t| chain_jumps(t.len(), lower, |i, j| t.dist(i, j))).sum::<usize>() as f64 / m;
            jump_part = jump_part.max(upper * mean_n.sqrt());
            upper = lower;
        }
    }
    let sup_part = (trajs.iter().map(|t| t.sup_norm().powi(2)).sum::<f64>() / m).sqrt();
    let a_bound = jump_part + sup_part;
    let rhs = r / (r - 2.0) * a_bound;
    Ok(WeakTypeCheck { lhs, a_bound, rhs, ratio: if rhs > 0.0 { lhs / rhs } else { 0.0 } })
}
