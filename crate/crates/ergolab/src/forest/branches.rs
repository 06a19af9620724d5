//! Splitting one tree into branches of well separated frequencies, and the
//! frequency cutoffs attached to a branch.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{grid_for, span, Forest};
use crate::error::{invalid, precondition, Error, Result};
use crate::fourier::spectrum::{extract_net, min_gap, omega, psi_delta};
use crate::fourier::torus::{centered, torus_dist, MultiplierKind, MultiplierMeta, MultiplierSample};
use crate::fourier::{SmoothCutoff, TorusGrid};
use crate::grids::DyadicInterval;
use crate::signals::Signal;
use crate::Complex64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub parent_top: DyadicInterval,
    /// `None` for the boundary family.
    pub index: Option<usize>,
    pub intervals: Vec<DyadicInterval>,
    pub freqs: Vec<f64>,
    /// `(m_{s-1}, m_s)`; the intervals have `-log2 |J|` in `[m_{s-1} + r, m_s - r]`.
    pub scale_band: (i32, i32),
    pub r_clamped: u64,
    /// `2^r / min |J|` with `r = ceil(log2 R)`.
    pub required_gap: f64,
    pub achieved_gap: f64,
    /// `max_J ||Omega_{J,delta} chi_{Lambda_s,J}||_A`.
    pub localization_max: f64,
    /// `t / 10`.
    pub localization_bound: f64,
}

impl Branch {
    pub fn separated(&self) -> bool {
        self.achieved_gap >= self.required_gap * (1.0 - 1e-9)
    }

    pub fn localized(&self) -> bool {
        self.localization_max <= self.localization_bound
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pruning {
    /// `(m, Ent(Lambda_0, 2^m))`.
    pub profile: Vec<(i32, usize)>,
    pub m_seq: Vec<i32>,
    /// Nonempty branches in order of `s`.
    pub branches: Vec<Branch>,
    pub boundary: Branch,
    pub boundary_scales: usize,
    /// More than `4 R U` distinct scales ended up in the boundary family.
    pub boundary_violation: bool,
    pub u: u64,
}

impl Pruning {
    pub fn branch_count_ok(&self) -> bool {
        self.branches.len() as u64 <= self.u
    }
}

/// Largest subset of the circle with pairwise distances `>= s`.
fn circle_entropy(sorted: &[f64], s: f64) -> usize {
    let n = sorted.len();
    if n <= 1 {
        return n;
    }
    let s = s * (1.0 - 1e-9);
    (0..n)
        .map(|i| {
            // with `sorted[i]` kept, the rest must lie in `[p + s, p + 1 - s]`
            let p = sorted[i];
            let mut last = p;
            let mut count = 1;
            for step in 1..n {
                let v = sorted[(i + step) % n] + if i + step >= n { 1.0 } else { 0.0 };
                if v - last >= s && p + 1.0 - v >= s {
                    count += 1;
                    last = v;
                }
            }
            count
        })
        .max()
        .unwrap_or(0)
}

fn level_local_multiplier(j: &DyadicInterval, g: &Signal, delta: f64, oversample: usize) -> Result<MultiplierSample> {
    let (c, len) = span(j)?;
    psi_delta(&omega(g, (c, len), &SmoothCutoff::indicator(0.0, 1.0), grid_for(len, oversample))?, delta)
}

/// Prune top `top` of level `level` into `U`-branches.
pub fn prune_branches(
    forest: &Forest,
    level: usize,
    top: usize,
    g: &Signal,
    u: u64,
    r_clamped: u64,
) -> Result<Pruning> {
    let t = forest
        .trees
        .get(level)
        .and_then(|tr| tr.tops.get(top))
        .ok_or_else(|| invalid(format!("no top {top} at level {level}")))?;
    if u == 0 || r_clamped < 2 {
        return Err(invalid("u must be positive and r_clamped at least 2"));
    }
    let cfg = &forest.config;
    let r = (r_clamped as f64).log2().ceil() as i32;
    let mut lam0: Vec<f64> = t.freqs.iter().map(|b| b.rem_euclid(1.0)).collect();
    lam0.sort_by(f64::total_cmp);
    let kmax = t.members.iter().map(|m| m.k).max().unwrap_or(0) as i32;

    let m_lo = if lam0.len() >= 2 { min_gap(&lam0).log2().floor() as i32 - 1 } else { -kmax - r - 1 };
    let m_lo = m_lo.min(-1);
    let profile: Vec<(i32, usize)> = (m_lo..=-1).map(|m| (m, circle_entropy(&lam0, 2f64.powi(m)))).collect();
    let ent_at = |m: i32| profile[(m - m_lo) as usize].1 as f64;

    let drop = 1.0 / (cfg.delta * cfg.delta * u as f64);
    let mut m_seq = vec![m_lo];
    while let Some(&prev) = m_seq.last().filter(|&&m| m < -1) {
        let floor = ent_at(prev) - drop;
        let next = (prev..=-1).rev().find(|&m| ent_at(m) >= floor).unwrap_or(prev);
        m_seq.push(if next > prev { next } else { prev + 1 });
    }
    let mut nets = vec![lam0.clone()];
    for &m in &m_seq[1..] {
        let next = extract_net(nets.last().expect("nonempty"), 2f64.powi(m))?;
        nets.push(next);
    }

    // s = 0 takes mu <= m_0 - r, s >= 1 takes [m_{s-1} + r, m_s - r]
    let slot = |k: u32| -> Option<usize> {
        let mu = -(k as i32);
        if mu <= m_seq[0] - r {
            return Some(0);
        }
        (1..m_seq.len()).find(|&s| m_seq[s - 1] + r <= mu && mu <= m_seq[s] - r)
    };
    let mut buckets: Vec<Vec<DyadicInterval>> = vec![vec![]; m_seq.len()];
    let mut boundary = vec![];
    for m in &t.members {
        match slot(m.k) {
            Some(s) => buckets[s].push(*m),
            None => boundary.push(*m),
        }
    }

    let bound = cfg.t_small / 10.0;
    let make =
        |index: Option<usize>, intervals: Vec<DyadicInterval>, freqs: Vec<f64>, band: (i32, i32)| -> Result<Branch> {
            let min_len = intervals.iter().map(|j| j.len()).fold(f64::INFINITY, f64::min);
            let localization_max = intervals
                .par_iter()
                .map(|j| -> Result<f64> {
                    let (lo, hi) = (j.left() as i64, j.right() as i64);
                    if g.values().iter().enumerate().all(|(i, v)| {
                        let n = g.window_start() + i as i64;
                        n < lo || n >= hi || *v == Complex64::new(0.0, 0.0)
                    }) {
                        return Ok(0.0);
                    }
                    let m = level_local_multiplier(j, g, cfg.delta, cfg.oversample)?;
                    let chi = Bubbles::chi(&freqs, j.len());
                    Ok(m.map(|b, v| v * chi.eval(b)).a_norm())
                })
                .collect::<Result<Vec<f64>>>()?
                .into_iter()
                .fold(0.0, f64::max);
            Ok(Branch {
                parent_top: t.top,
                index,
                required_gap: 2f64.powi(r) / min_len,
                achieved_gap: min_gap(&freqs),
                intervals,
                freqs,
                scale_band: band,
                r_clamped,
                localization_max,
                localization_bound: bound,
            })
        };

    let mut branches = vec![];
    for (s, ivs) in buckets.into_iter().enumerate() {
        if ivs.is_empty() {
            continue;
        }
        let band = (if s == 0 { i32::MIN } else { m_seq[s - 1] }, m_seq[s]);
        branches.push(make(Some(s), ivs, nets[s].clone(), band)?);
    }
    let boundary_scales = boundary.iter().map(|j| j.k).collect::<BTreeSet<_>>().len();
    let boundary = make(None, boundary, lam0, (m_lo, -1))?;
    Ok(Pruning {
        profile,
        m_seq,
        branches,
        boundary_violation: boundary_scales as u64 > 4 * r_clamped * u,
        boundary,
        boundary_scales,
        u,
    })
}

/// Sum of trapezoid bumps at `centres`, `1` within `plateau` and `0` beyond `radius` of each centre.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bubbles {
    pub centres: Vec<f64>,
    pub plateau: f64,
    pub radius: f64,
    /// Evaluate `1 - sum` instead of the sum.
    pub complement: bool,
}

impl Bubbles {
    /// `Xi^0_J`: bumps of width `20/|J|`.
    pub fn xi0(freqs: &[f64], len: f64) -> Self {
        Self { centres: freqs.to_vec(), plateau: 5.0 / len, radius: 10.0 / len, complement: false }
    }

    /// `Xi_J`: the same bumps shrunk by `R`.
    pub fn xi(freqs: &[f64], len: f64, r: f64) -> Self {
        Self { centres: freqs.to_vec(), plateau: 5.0 / (r * len), radius: 10.0 / (r * len), complement: false }
    }

    /// `chi_{Lambda,J}`: zero within `20/|J|` of a frequency, one beyond `25/|J|`.
    pub fn chi(freqs: &[f64], len: f64) -> Self {
        Self { centres: freqs.to_vec(), plateau: 20.0 / len, radius: 25.0 / len, complement: true }
    }

    /// `rho_J^`: one bump at the origin at scale `1/(alpha R |J|)`.
    pub fn mollifier(alpha: f64, r: f64, len: f64) -> Self {
        let w = 1.0 / (alpha.abs() * r * len);
        Self { centres: vec![0.0], plateau: w / 2.0, radius: w, complement: false }
    }

    pub fn eval(&self, gamma: f64) -> f64 {
        let cut = SmoothCutoff::trapezoid(-self.radius, -self.plateau, self.plateau, self.radius);
        let s: f64 = self.centres.iter().map(|c| cut.eval(centered(gamma - c))).sum();
        if self.complement {
            1.0 - s
        } else {
            s
        }
    }

    pub fn sample(&self, grid: TorusGrid, kind: MultiplierKind) -> MultiplierSample {
        let meta = MultiplierMeta { kind, ..MultiplierMeta::custom() };
        MultiplierSample::from_fn(grid, meta, |b| Complex64::new(self.eval(b), 0.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleCutoffs {
    pub k: u32,
    pub xi0: MultiplierSample,
    pub xi: MultiplierSample,
    pub chi: MultiplierSample,
    pub rho: MultiplierSample,
    pub max_xi0: f64,
    pub max_xi0_dilated: f64,
    /// `max |chi'| / |J|` by grid differences.
    pub chi_slope: f64,
}

/// Sampled `Xi^0`, `Xi`, `chi` and `rho` for every scale of the branch.
pub fn branch_cutoffs(branch: &Branch, grid: TorusGrid, alpha: f64) -> Result<Vec<ScaleCutoffs>> {
    let r = branch.r_clamped as f64;
    let q = grid.q() as f64;
    let scales: BTreeSet<u32> = branch.intervals.iter().map(|j| j.k).collect();
    let gap = min_gap(&branch.freqs);
    scales
        .into_iter()
        .map(|k| {
            let len = (1u64 << k) as f64;
            if gap < 50.0 / len * (1.0 - 1e-9) {
                return Err(precondition(format!("bubbles overlap at |J| = {len}: gap {gap} < 50/|J|")));
            }
            if q * 5.0 / (r * len) < 4.0 {
                return Err(Error::Resolution(format!("q = {q} cannot resolve Xi at |J| = {len}, R = {r}")));
            }
            let xi0b = Bubbles::xi0(&branch.freqs, len);
            let xi0 = xi0b.sample(grid, MultiplierKind::Xi0);
            let xi = Bubbles::xi(&branch.freqs, len, r).sample(grid, MultiplierKind::Xi);
            let chi = Bubbles::chi(&branch.freqs, len).sample(grid, MultiplierKind::Chi);
            let rho = Bubbles::mollifier(alpha, r, len).sample(grid, MultiplierKind::Custom);
            let max_xi0 = xi0.sup_norm();
            let max_xi0_dilated = grid.points().map(|b| xi0b.eval(alpha * centered(b)).abs()).fold(0.0, f64::max);
            if max_xi0 > 1.0 + 1e-12 || max_xi0_dilated > 1.0 + 1e-12 {
                return Err(Error::Invariant(format!("|Xi0| reaches {max_xi0} / {max_xi0_dilated} at |J| = {len}")));
            }
            for (b, v) in grid.points().zip(&chi.values) {
                let d = branch.freqs.iter().map(|c| torus_dist(b, *c)).fold(f64::INFINITY, f64::min);
                let ok = if d >= 25.0 / len {
                    v.re == 1.0
                } else if d <= 20.0 / len {
                    v.re.abs() < 1e-15
                } else {
                    true
                };
                if !ok {
                    return Err(Error::Invariant(format!("chi = {} at distance {d} from the frequencies", v.re)));
                }
            }
            let n = chi.values.len();
            let chi_slope =
                (0..n).map(|i| (chi.values[(i + 1) % n].re - chi.values[i].re).abs() * q).fold(0.0, f64::max) / len;
            if chi_slope > 1.0 {
                return Err(Error::Invariant(format!("|chi'| = {chi_slope} |J| exceeds |J|")));
            }
            Ok(ScaleCutoffs { k, xi0, xi, chi, rho, max_xi0, max_xi0_dilated, chi_slope })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::ForestConfig;
    use crate::forest::{Tree, TreeTop};
    use crate::rng::prng;
    use rand::Rng;

    fn fake_forest(freqs: Vec<f64>, kmin: u32, kmax: u32) -> Forest {
        let top = DyadicInterval::plain(kmax, 0);
        let members: Vec<DyadicInterval> = (kmin..=kmax).rev().map(|k| DyadicInterval::plain(k, 0)).collect();
        let cfg = ForestConfig::new(0.25, 0.1, 0.5, 2, vec![kmin, kmax]);
        Forest {
            i0: top,
            config: cfg,
            selector_scales: vec![],
            trees: vec![Tree {
                index: 0,
                tops: vec![TreeTop { top, parent: None, freqs, sigma: vec![], members, top_defect: 0.0 }],
            }],
            level_measures: vec![0.0; 2],
            exceptional: vec![],
        }
    }

    #[test]
    fn circle_entropy_small_cases() {
        assert_eq!(circle_entropy(&[], 0.1), 0);
        assert_eq!(circle_entropy(&[0.3], 0.9), 1);
        assert_eq!(circle_entropy(&[0.0, 0.5], 0.5), 2);
        assert_eq!(circle_entropy(&[0.0, 0.5], 0.6), 1);
        // wrap-around: 0.95 and 0.05 are 0.1 apart
        assert_eq!(circle_entropy(&[0.05, 0.3, 0.55, 0.95], 0.2), 3);
    }

    #[test]
    fn single_frequency_is_one_branch() {
        let f = fake_forest(vec![0.3], 2, 12);
        let g = Signal::zeros(4096);
        let p = prune_branches(&f, 0, 0, &g, 4, 8).unwrap();
        assert_eq!(p.branches.len(), 1);
        assert!(p.branches[0].freqs == vec![0.3]);
        // r = 3: scales 2^1..2^3 sit in the collar below m = -1
        assert!(p.boundary.intervals.iter().all(|j| j.k <= 3));
        assert!(!p.boundary_violation && p.branch_count_ok());
        // g = 0: nothing to localize
        assert_eq!(p.branches[0].localization_max, 0.0);
    }

    #[test]
    fn two_close_frequencies_split_by_scale() {
        let gap = 2f64.powi(-10);
        let f = fake_forest(vec![0.2, 0.2 + gap], 4, 20);
        let g = Signal::zeros(8);
        let p = prune_branches(&f, 0, 0, &g, 16, 8).unwrap();
        assert_eq!(p.m_seq, vec![-11, -1]);
        let fine = &p.branches[0];
        assert_eq!(fine.index, Some(0));
        assert_eq!(fine.freqs.len(), 2);
        assert!(fine.intervals.iter().all(|j| j.k >= 14));
        let coarse = &p.branches[1];
        assert_eq!(coarse.freqs.len(), 1);
        assert!(coarse.intervals.iter().all(|j| (4..=8).contains(&j.k)));
        assert!(p.boundary.intervals.iter().all(|j| (9..=13).contains(&j.k)));
        assert!(p.branches.iter().all(Branch::separated));
    }

    #[test]
    fn random_frequencies_give_few_branches() {
        let mut rng = prng(4);
        let freqs: Vec<f64> = (0..64).map(|_| rng.gen::<f64>()).collect();
        let f = fake_forest(freqs.clone(), 2, 30);
        let g = Signal::zeros(8);
        for u in [4u64, 16] {
            let p = prune_branches(&f, 0, 0, &g, u, 8).unwrap();
            assert!(p.branch_count_ok(), "u = {u}: {} branches", p.branches.len());
            // nested nets inside the original set
            for b in &p.branches {
                assert!(b.freqs.iter().all(|x| freqs.iter().any(|y| (x - y.rem_euclid(1.0)).abs() < 1e-15)));
            }
            let drops: usize = p
                .m_seq
                .windows(2)
                .map(|w| p.profile[(w[0] - p.m_seq[0]) as usize].1 - p.profile[(w[1] - p.m_seq[0]) as usize].1)
                .sum();
            assert!(drops <= 64);
        }
    }

    #[test]
    fn cutoff_identities() {
        let len = 64.0;
        let freqs = vec![0.25];
        let b = Branch {
            parent_top: DyadicInterval::plain(6, 0),
            index: Some(1),
            intervals: vec![DyadicInterval::plain(6, 0)],
            freqs: freqs.clone(),
            scale_band: (-20, -1),
            r_clamped: 8,
            required_gap: 0.0,
            achieved_gap: f64::INFINITY,
            localization_max: 0.0,
            localization_bound: 0.1,
        };
        let grid = TorusGrid::new(1 << 14).unwrap();
        let cs = branch_cutoffs(&b, grid, 2f64.sqrt()).unwrap();
        assert_eq!(cs.len(), 1);
        let c = &cs[0];
        for (j, beta) in grid.points().enumerate() {
            let d = torus_dist(beta, 0.25);
            let x0 = c.xi0.values[j].re;
            if d > 10.0 / len {
                assert_eq!(x0, 0.0);
            }
            if d <= 5.0 / len {
                assert_eq!(x0, 1.0);
            }
            let x = c.xi.values[j].re;
            assert!((x * x0 - x).abs() < 1e-15);
            assert!((c.chi.values[j].re * x0).abs() < 1e-15);
        }
        // overlapping bubbles are refused
        let mut close = b.clone();
        close.freqs = vec![0.25, 0.25 + 40.0 / len];
        assert!(branch_cutoffs(&close, grid, 2f64.sqrt()).is_err());
    }
}
