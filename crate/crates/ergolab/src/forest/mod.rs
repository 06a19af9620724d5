//! Stopping-time selection of intervals into trees with frequency sets.
//!
//! Starting from a top interval `I0` with frequencies `Sigma_{I0}`, every
//! dyadic subinterval at a selector scale is tested against the frequency set
//! of its top.  Intervals whose level-`delta` energy sits near the frequency
//! set are localized and join the tree; the largest diffuse ones become the
//! tops of the next level, which inherit the frequencies and add their own.
//! After `v_max` levels the remaining tops form the exceptional set.

mod audit;
pub mod branches;
pub mod operators;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fourier::spectrum::{omega, psi_delta};
use crate::fourier::{SmoothCutoff, TorusGrid};
use crate::grids::{DyadicInterval, GridShift};
use crate::params::Params;
use crate::rng::prng;
use crate::signals::{frac, Signal};

pub use audit::{check_forest, ForestAudit};
pub use branches::{branch_cutoffs, prune_branches, Branch, Bubbles, Pruning, ScaleCutoffs};
pub use operators::{
    f2_f3_gap, f_operator, freq_snap_check, key_inequality_check, single_scale_check, superlevel_containment, AMode,
    ContainmentReport, FKernel, FLevel, GapReport, KeyReport, OperatorSetup, SingleScaleReport, SnapCheck,
};

/// Left end and length of an integer-aligned interval.
pub fn span(i: &DyadicInterval) -> Result<(i64, usize)> {
    let (l, r) = (i.left(), i.right());
    if l.fract() != 0.0 || r.fract() != 0.0 {
        return Err(invalid(format!("interval [{l}, {r}) does not have integer endpoints")));
    }
    Ok((l as i64, (r - l) as usize))
}

/// Torus grid with `oversample` points per dual cell of an interval of length `len`.
pub fn grid_for(len: usize, oversample: usize) -> TorusGrid {
    TorusGrid::new((oversample.max(8) * len.max(1)).next_power_of_two()).expect("power of two grid")
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta <= 1.0) || delta.log2().fract() != 0.0 {
        return Err(invalid(format!("delta = {delta} must be a power of two in (0, 1]")));
    }
    Ok(())
}

fn cells(len: usize, grid: TorusGrid) -> Result<usize> {
    let q = grid.q();
    if !q.is_multiple_of(len) || q / len < 4 {
        return Err(Error::Resolution(format!("q = {q} gives fewer than 4 points per dual cell of width 1/{len}")));
    }
    Ok(q / len)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaFreq {
    /// Left end of the dual cell.
    pub c: f64,
    /// Grid point realizing the cell maximum.
    pub xi: f64,
    /// `max |P_I| / |I|` on the cell.
    pub peak: f64,
}

/// Dual cells `[m/|I|, (m+1)/|I|)` whose peak of `|P_I| = |I| |Omega_I|` lies in `[delta|I|/2, 2 delta|I|)`.
pub fn sigma_frequencies(i: &DyadicInterval, g: &Signal, delta: f64, grid: TorusGrid) -> Result<Vec<SigmaFreq>> {
    check_delta(delta)?;
    let (c, len) = span(i)?;
    let per = cells(len, grid)?;
    let m = omega(g, (c, len), &SmoothCutoff::indicator(0.0, 1.0), grid)?;
    let band = delta / 2.0..2.0 * delta;
    Ok(m.values
        .chunks(per)
        .enumerate()
        .filter_map(|(cell, vals)| {
            let (arg, peak) = vals.iter().enumerate().map(|(k, v)| (k, v.norm())).fold((0, -1.0), |best, cur| {
                if cur.1 > best.1 {
                    cur
                } else {
                    best
                }
            });
            band.contains(&peak).then(|| SigmaFreq {
                c: cell as f64 / len as f64,
                xi: grid.point(cell * per + arg),
                peak,
            })
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Localization {
    pub localized: bool,
    /// Energy of `P_{J,delta}` on dual cells free of frequencies.
    pub defect: f64,
    /// `rho^2 |J|`.
    pub threshold: f64,
}

/// Off-frequency energy of the level-`delta` part of `P_J` against `rho^2 |J|`.
pub fn localization_test(
    j: &DyadicInterval,
    lambda: &[f64],
    g: &Signal,
    delta: f64,
    rho: f64,
    grid: TorusGrid,
) -> Result<Localization> {
    let (c, len) = span(j)?;
    let per = cells(len, grid)?;
    let m = psi_delta(&omega(g, (c, len), &SmoothCutoff::indicator(0.0, 1.0), grid)?, delta)?;
    let mut covered = vec![false; len];
    for &b in lambda {
        covered[((frac(b) * len as f64) as usize).min(len - 1)] = true;
    }
    let scale = (len * len) as f64 / grid.q() as f64;
    let defect: f64 = m
        .values
        .chunks(per)
        .zip(&covered)
        .filter(|(_, cov)| !**cov)
        .map(|(vals, _)| vals.iter().map(Complex64::norm_sqr).sum::<f64>() * scale)
        .sum();
    let threshold = rho * rho * len as f64;
    Ok(Localization { localized: defect <= threshold, defect, threshold })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub delta: f64,
    pub rho: f64,
    pub t_small: f64,
    pub v_max: usize,
    /// Exponents `k_0 < ... < k_L` of the lacunary scales `M_l = 2^{k_l}`.
    pub scale_seq: Vec<u32>,
    /// Smallest allowed `k_{l+1} - k_l`.
    pub min_ratio_log2: u32,
    /// `None` picks the top scale of each band, otherwise a seeded scale.
    pub selector_seed: Option<u64>,
    /// Grid points per dual cell in every test.
    pub oversample: usize,
    /// `C` in `|Lambda| <= C V delta^-2`.
    pub size_constant: f64,
}

impl ForestConfig {
    pub fn new(delta: f64, rho: f64, t_small: f64, v_max: usize, scale_seq: Vec<u32>) -> Self {
        Self {
            delta,
            rho,
            t_small,
            v_max,
            scale_seq,
            min_ratio_log2: 2,
            selector_seed: None,
            oversample: 8,
            size_constant: 8.0,
        }
    }

    pub fn from_params(p: &Params, v_max: usize, scale_seq: Vec<u32>) -> Self {
        Self::new(p.delta, p.rho, p.t_small, v_max, scale_seq)
    }

    pub fn validate(&self) -> Result<()> {
        check_delta(self.delta)?;
        if !(self.rho > 0.0 && self.t_small > 0.0) {
            return Err(invalid("rho and t_small must be positive"));
        }
        if self.v_max == 0 {
            return Err(invalid("v_max must be at least 1"));
        }
        if self.scale_seq.len() < 2 {
            return Err(invalid("scale_seq needs at least two scales"));
        }
        if let Some(w) = self.scale_seq.windows(2).find(|w| w[1] < w[0] + self.min_ratio_log2.max(1)) {
            return Err(invalid(format!(
                "scales 2^{} and 2^{} are closer than ratio 2^{}",
                w[0],
                w[1],
                self.min_ratio_log2.max(1)
            )));
        }
        Ok(())
    }

    /// One scale per band `[k_l, k_{l+1})`, coarsest first.
    pub fn selector_scales(&self) -> Vec<u32> {
        let mut rng = self.selector_seed.map(prng);
        let mut out: Vec<u32> = self
            .scale_seq
            .windows(2)
            .map(|w| match rng.as_mut() {
                Some(r) => r.gen_range(w[0]..w[1]),
                None => w[1] - 1,
            })
            .collect();
        out.sort_unstable_by(|a, b| b.cmp(a));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeTop {
    pub top: DyadicInterval,
    /// Index of the containing top one level up.
    pub parent: Option<usize>,
    /// `Lambda_j(I_j)`, sorted.
    pub freqs: Vec<f64>,
    pub sigma: Vec<SigmaFreq>,
    /// `D_j(I_j)`: the top and every localized selector interval below it
    /// that is not inside a next-level top.
    pub members: Vec<DyadicInterval>,
    /// Defect of the top against its parent's frequencies (zero at level 0).
    pub top_defect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub index: usize,
    pub tops: Vec<TreeTop>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub i0: DyadicInterval,
    pub config: ForestConfig,
    pub selector_scales: Vec<u32>,
    pub trees: Vec<Tree>,
    /// `|X_j|` for `j = 1..=v_max`.
    pub level_measures: Vec<f64>,
    /// Tops of level `v_max`, whose union is `X_{v_max}`.
    pub exceptional: Vec<DyadicInterval>,
}

impl Forest {
    pub fn exceptional_measure(&self, v: usize) -> f64 {
        if v == 0 {
            self.i0.len()
        } else {
            self.level_measures.get(v - 1).copied().unwrap_or(0.0)
        }
    }

    /// `|X_V| / |I0| * V * t^4`, the measured constant in the exceptional-set bound.
    pub fn exceptional_ratio(&self, v: usize) -> f64 {
        self.exceptional_measure(v) / self.i0.len() * v as f64 * self.config.t_small.powi(4)
    }
}

fn children_at(i: &DyadicInterval, k: u32) -> impl ParallelIterator<Item = DyadicInterval> {
    let shift = i.k - k;
    let (n0, n1) = (i.n << shift, (i.n + 1) << shift);
    (n0..n1).into_par_iter().map(move |n| DyadicInterval::plain(k, n))
}

struct Explored {
    members: Vec<DyadicInterval>,
    /// Diffuse intervals with their defects.
    tops: Vec<(DyadicInterval, f64)>,
}

fn explore_below(
    j: &DyadicInterval,
    scales: &[u32],
    lambda: &[f64],
    g: &Signal,
    cfg: &ForestConfig,
) -> Result<Explored> {
    let Some((&k, rest)) = scales.split_first() else {
        return Ok(Explored { members: vec![], tops: vec![] });
    };
    let parts: Vec<Explored> = children_at(j, k)
        .map(|child| {
            let (_, len) = span(&child)?;
            let loc = localization_test(&child, lambda, g, cfg.delta, cfg.rho, grid_for(len, cfg.oversample))?;
            if !loc.localized {
                return Ok(Explored { members: vec![], tops: vec![(child, loc.defect)] });
            }
            let mut below = explore_below(&child, rest, lambda, g, cfg)?;
            below.members.insert(0, child);
            Ok(below)
        })
        .collect::<Result<_>>()?;
    Ok(parts.into_iter().fold(Explored { members: vec![], tops: vec![] }, |mut acc, p| {
        acc.members.extend(p.members);
        acc.tops.extend(p.tops);
        acc
    }))
}

fn merge_freqs(parent: &[f64], sigma: &[SigmaFreq]) -> Vec<f64> {
    let mut out: Vec<f64> = parent.iter().copied().chain(sigma.iter().map(|s| s.xi)).collect();
    out.sort_by(f64::total_cmp);
    out.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    out
}

fn new_top(
    top: DyadicInterval,
    parent: Option<(usize, &[f64])>,
    top_defect: f64,
    g: &Signal,
    cfg: &ForestConfig,
) -> Result<TreeTop> {
    let (_, len) = span(&top)?;
    let sigma = sigma_frequencies(&top, g, cfg.delta, grid_for(len, cfg.oversample))?;
    let freqs = merge_freqs(parent.map_or(&[][..], |p| p.1), &sigma);
    Ok(TreeTop { top, parent: parent.map(|p| p.0), freqs, sigma, members: vec![], top_defect })
}

/// Organize the selector intervals of `i0` into trees, checking the result
/// with the independent auditor before returning.
pub fn build_forest(i0: &DyadicInterval, g: &Signal, cfg: &ForestConfig) -> Result<Forest> {
    cfg.validate()?;
    if i0.shift != GridShift::plain() {
        return Err(invalid("forest selection runs on the plain dyadic grid"));
    }
    span(i0)?;
    let selector_scales = cfg.selector_scales();
    let below: Vec<u32> = selector_scales.iter().copied().filter(|&k| k < i0.k).collect();

    let mut trees = vec![Tree { index: 0, tops: vec![new_top(*i0, None, 0.0, g, cfg)?] }];
    let mut level_measures = Vec::with_capacity(cfg.v_max);
    loop {
        let level = trees.len() - 1;
        let explored: Vec<Explored> = trees[level]
            .tops
            .par_iter()
            .map(|t| {
                let scales: Vec<u32> = below.iter().copied().filter(|&k| k < t.top.k).collect();
                explore_below(&t.top, &scales, &t.freqs, g, cfg)
            })
            .collect::<Result<_>>()?;
        let mut next_raw = Vec::new();
        for (idx, (t, ex)) in trees[level].tops.iter_mut().zip(explored).enumerate() {
            t.members = std::iter::once(t.top).chain(ex.members).collect();
            next_raw.extend(ex.tops.into_iter().map(|(top, d)| (idx, top, d)));
        }
        if level == cfg.v_max {
            break;
        }
        let prev = &trees[level].tops;
        let next: Vec<TreeTop> = next_raw
            .par_iter()
            .map(|&(p, top, d)| new_top(top, Some((p, &prev[p].freqs)), d, g, cfg))
            .collect::<Result<_>>()?;
        // an empty f64 sum is -0.0
        level_measures.push(next.iter().map(|t| t.top.len()).sum::<f64>() + 0.0);
        if next.is_empty() {
            break;
        }
        trees.push(Tree { index: level + 1, tops: next });
    }
    level_measures.resize(cfg.v_max, 0.0);
    let exceptional =
        if trees.len() == cfg.v_max + 1 { trees[cfg.v_max].tops.iter().map(|t| t.top).collect() } else { vec![] };
    let forest = Forest { i0: *i0, config: cfg.clone(), selector_scales, trees, level_measures, exceptional };
    check_forest(&forest, g)?;
    Ok(forest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::{e, gen_character, gen_random_phase};

    fn dirichlet(theta: f64, beta: f64, len: usize) -> f64 {
        let s: Complex64 = (0..len).map(|n| e(n as f64 * (theta - beta))).sum();
        s.norm() / len as f64
    }

    #[test]
    fn sigma_of_character_matches_direct_kernel() {
        let theta = 0.3137;
        let len = 64usize;
        let g = gen_character(theta, 256).unwrap();
        let grid = TorusGrid::new(8 * len).unwrap();
        let i = DyadicInterval::plain(6, 1);
        let sig = sigma_frequencies(&i, &g, 0.5, grid).unwrap();
        assert!(!sig.is_empty());
        let per = grid.q() / len;
        let mut want = Vec::new();
        for cell in 0..len {
            let peak = (0..per).map(|k| dirichlet(theta, grid.point(cell * per + k), len)).fold(0.0, f64::max);
            if (0.25..1.0).contains(&peak) {
                want.push(cell as f64 / len as f64);
            }
        }
        let got: Vec<f64> = sig.iter().map(|s| s.c).collect();
        assert_eq!(got, want);
        for s in &sig {
            assert!(crate::fourier::torus::torus_dist(s.xi, theta) < 3.0 / len as f64, "{s:?}");
        }
    }

    #[test]
    fn sigma_trivial_and_resolution() {
        let i = DyadicInterval::plain(5, 0);
        let grid = TorusGrid::new(256).unwrap();
        assert!(sigma_frequencies(&i, &Signal::zeros(32), 0.25, grid).unwrap().is_empty());
        let coarse = TorusGrid::new(64).unwrap();
        assert!(matches!(sigma_frequencies(&i, &Signal::zeros(32), 0.25, coarse), Err(Error::Resolution(_))));
        assert!(sigma_frequencies(&i, &Signal::zeros(32), 0.3, grid).is_err());
    }

    #[test]
    fn sigma_size_bound_over_random_signals() {
        let i = DyadicInterval::plain(8, 0);
        let grid = TorusGrid::new(2048).unwrap();
        for seed in 0..100 {
            let g = gen_random_phase(seed, 256).unwrap();
            for delta in [0.5, 0.25, 0.125] {
                let n = sigma_frequencies(&i, &g, delta, grid).unwrap().len();
                assert!(n as f64 <= 8.0 / (delta * delta), "seed {seed} delta {delta}: {n}");
            }
        }
    }

    #[test]
    fn localization_of_character() {
        let theta = 0.2;
        let g = gen_character(theta, 512).unwrap();
        let j = DyadicInterval::plain(5, 3);
        let grid = TorusGrid::new(256).unwrap();
        // the three cells around theta carry all but the far side lobes
        let lam = [theta - 1.0 / 32.0, theta, theta + 1.0 / 32.0];
        let loc = localization_test(&j, &lam, &g, 0.5, 0.5, grid).unwrap();
        assert!(loc.localized, "{loc:?}");
        // empty frequency set: the defect is the whole level-set energy
        let m = psi_delta(&omega(&g, (96, 32), &SmoothCutoff::indicator(0.0, 1.0), grid).unwrap(), 0.5).unwrap();
        let full = m.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * 1024.0 / 256.0;
        let empty = localization_test(&j, &[], &g, 0.5, 0.5, grid).unwrap();
        assert!((empty.defect - full).abs() < 1e-12 * full);
        assert!(empty.defect > loc.defect);
        let tight = localization_test(&j, &[], &g, 0.5, 0.1, grid).unwrap();
        assert!(!tight.localized);
        let zero = localization_test(&j, &[], &Signal::zeros(512), 0.5, 0.1, grid).unwrap();
        assert!(zero.localized && zero.defect == 0.0);
    }

    fn two_characters(t1: f64, t2: f64, h: usize) -> Signal {
        let v: Vec<Complex64> = (0..h).map(|n| if n < h / 2 { e(t1 * n as f64) } else { e(t2 * n as f64) }).collect();
        Signal::new(v, 0, "two_characters").unwrap()
    }

    #[test]
    fn character_forest_is_one_tree() {
        let g = gen_character(0.3, 1024).unwrap();
        let cfg = ForestConfig::new(0.5, 0.5, 0.5, 4, vec![2, 4, 6, 8, 10]);
        let f = build_forest(&DyadicInterval::plain(10, 0), &g, &cfg).unwrap();
        assert_eq!(f.trees.len(), 1);
        assert!(f.exceptional.is_empty());
        assert_eq!(f.level_measures, vec![0.0; 4]);
        assert!(!f.trees[0].tops[0].freqs.is_empty());
    }

    #[test]
    fn zero_forest_is_trivial() {
        let cfg = ForestConfig::new(0.25, 0.1, 0.5, 3, vec![2, 4, 6, 8]);
        let f = build_forest(&DyadicInterval::plain(8, 0), &Signal::zeros(256), &cfg).unwrap();
        assert_eq!(f.trees.len(), 1);
        assert!(f.trees[0].tops[0].freqs.is_empty());
        // every selector interval below the top is a member
        assert_eq!(f.trees[0].tops[0].members.len(), 1 + 2 + 8 + 32);
    }

    #[test]
    fn two_character_forest_nests() {
        let g = two_characters(0.1, 0.37, 1024);
        let cfg = ForestConfig::new(0.125, 0.3, 0.5, 4, vec![2, 4, 6, 8, 10]);
        let f = build_forest(&DyadicInterval::plain(10, 0), &g, &cfg).unwrap();
        for w in f.level_measures.windows(2) {
            assert!(w[1] <= w[0]);
        }
        for (lvl, tree) in f.trees.iter().enumerate().skip(1) {
            for t in &tree.tops {
                let parent = &f.trees[lvl - 1].tops[t.parent.unwrap()];
                assert!(parent.freqs.iter().all(|p| t.freqs.contains(p)));
            }
        }
        for v in 1..=4 {
            assert!(f.exceptional_ratio(v) <= 1.0);
        }
    }

    #[test]
    fn random_forest_levels_shrink() {
        let g = gen_random_phase(3, 4096).unwrap();
        let cfg = ForestConfig::new(0.125, 0.25, 0.5, 8, vec![2, 4, 6, 8, 10, 12]);
        let f = build_forest(&DyadicInterval::plain(12, 0), &g, &cfg).unwrap();
        assert!(f.level_measures.windows(2).all(|w| w[1] <= w[0]));
        // each level sits strictly inside the previous one
        assert_eq!(f.level_measures[f.selector_scales.len()..].iter().sum::<f64>(), 0.0);
    }

    #[test]
    fn config_validation_and_selectors() {
        let mut cfg = ForestConfig::new(0.25, 0.1, 0.5, 2, vec![2, 3, 8]);
        assert!(cfg.validate().is_err());
        cfg.scale_seq = vec![2, 4, 8];
        cfg.validate().unwrap();
        assert_eq!(cfg.selector_scales(), vec![7, 3]);
        cfg.selector_seed = Some(5);
        let s = cfg.selector_scales();
        assert!((4..8).contains(&s[0]) && (2..4).contains(&s[1]));
        assert_eq!(s, cfg.selector_scales());
    }
}
