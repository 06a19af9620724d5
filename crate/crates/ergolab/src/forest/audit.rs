//! Post-construction audit of a forest.
//!
//! Deliberately shares no helpers with the builder: endpoints come from the
//! raw `(k, n)` labels, and member defects are recomputed by direct sums with
//! a separately written level-band cutoff.

use std::collections::HashSet;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Forest;
use crate::error::{Error, Result};
use crate::grids::{DyadicInterval, GridShift};
use crate::signals::Signal;

/// Members longer than this are not re-evaluated by direct sums.
const DIRECT_MAX_LEN: i64 = 256;
const SAMPLES_PER_TOP: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestAudit {
    pub levels: usize,
    pub tops: usize,
    pub members: usize,
    pub max_freqs: usize,
    pub size_bound: f64,
    pub tiles: usize,
    pub defects_rechecked: usize,
    /// Largest `defect / threshold` among re-evaluated members.
    pub max_member_ratio: f64,
}

fn fail(clause: &str, detail: String) -> Error {
    Error::Invariant(format!("{clause}: {detail}"))
}

fn ends(i: &DyadicInterval) -> (i64, i64) {
    (i.n << i.k, (i.n + 1) << i.k)
}

fn inside(inner: (i64, i64), outer: (i64, i64)) -> bool {
    outer.0 <= inner.0 && inner.1 <= outer.1
}

fn smooth5(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * x * (10.0 - 15.0 * x + 6.0 * x * x)
}

/// `1` on `[1/2, 1]`, zero off `[1/4, 2]`.
fn band(r: f64) -> f64 {
    if r <= 0.25 || r >= 2.0 {
        0.0
    } else if r < 0.5 {
        smooth5((r - 0.25) / 0.25)
    } else if r <= 1.0 {
        1.0
    } else {
        smooth5((2.0 - r) / 1.0)
    }
}

fn direct_defect(lo: i64, len: i64, lambda: &[f64], g: &Signal, delta: f64, q: usize) -> f64 {
    let lenf = len as f64;
    let mut hit = vec![false; len as usize];
    for &b in lambda {
        let w = b - b.floor();
        hit[((w * lenf) as usize).min(len as usize - 1)] = true;
    }
    let per = q / len as usize;
    let mut acc = 0.0;
    for (cell, _) in hit.iter().enumerate().filter(|(_, h)| !**h) {
        for s in 0..per {
            let beta = (cell * per + s) as f64 / q as f64;
            let rot = Complex64::from_polar(1.0, -std::f64::consts::TAU * beta);
            let mut ph = Complex64::from_polar(1.0, -std::f64::consts::TAU * (beta * lo as f64).fract());
            let mut sum = Complex64::new(0.0, 0.0);
            for n in lo..lo + len {
                sum += g.at(n) * ph;
                ph *= rot;
            }
            let w = sum / lenf;
            let v = w * band(w.norm() / delta);
            acc += (v * lenf).norm_sqr();
        }
    }
    acc / q as f64
}

/// Re-validate disjointness, unique parents, frequency nesting and size,
/// member placement, member localization (on a sample) and tile distinctness.
pub fn check_forest(forest: &Forest, g: &Signal) -> Result<ForestAudit> {
    let cfg = &forest.config;
    let size_bound = cfg.size_constant * cfg.v_max as f64 / (cfg.delta * cfg.delta);
    let root = ends(&forest.i0);
    let mut tiles: HashSet<(u32, i64, i64)> = HashSet::new();
    let mut audit = ForestAudit {
        levels: forest.trees.len(),
        tops: 0,
        members: 0,
        max_freqs: 0,
        size_bound,
        tiles: 0,
        defects_rechecked: 0,
        max_member_ratio: 0.0,
    };
    match forest.trees.first() {
        Some(t) if t.tops.len() == 1 && t.tops[0].top == forest.i0 => {}
        _ => return Err(fail("root", "level 0 must consist of I0 alone".into())),
    }

    for (lvl, tree) in forest.trees.iter().enumerate() {
        let mut spans: Vec<(i64, i64)> = tree.tops.iter().map(|t| ends(&t.top)).collect();
        spans.sort_unstable();
        if let Some(w) = spans.windows(2).find(|w| w[0].1 > w[1].0) {
            return Err(fail("disjointness", format!("level {lvl} tops {:?} and {:?} overlap", w[0], w[1])));
        }
        for t in &tree.tops {
            if t.top.shift != GridShift::plain() {
                return Err(fail("grid", format!("top {:?} is not on the plain grid", t.top)));
            }
            let here = ends(&t.top);
            if !inside(here, root) {
                return Err(fail("containment", format!("top {here:?} leaves I0")));
            }
            if lvl > 0 {
                let prev = &forest.trees[lvl - 1].tops;
                let holders: Vec<usize> = (0..prev.len()).filter(|&p| inside(here, ends(&prev[p].top))).collect();
                if holders.len() != 1 || Some(holders[0]) != t.parent {
                    return Err(fail("unique parent", format!("level {lvl} top {here:?} has holders {holders:?}")));
                }
                let pf = &prev[holders[0]].freqs;
                if let Some(x) = pf.iter().find(|x| !t.freqs.iter().any(|y| (*x - y).abs() < 1e-12)) {
                    return Err(fail("nesting", format!("frequency {x} of the parent missing at {here:?}")));
                }
                if ends(&prev[holders[0]].top) == here {
                    return Err(fail("progress", format!("top {here:?} repeats its parent")));
                }
            }
            if t.freqs.len() as f64 > size_bound {
                return Err(fail("size", format!("{} frequencies at {here:?} exceed {size_bound}", t.freqs.len())));
            }
            audit.max_freqs = audit.max_freqs.max(t.freqs.len());

            let children: Vec<(i64, i64)> = forest
                .trees
                .get(lvl + 1)
                .map(|next| next.tops.iter().filter(|c| inside(ends(&c.top), here)).map(|c| ends(&c.top)).collect())
                .unwrap_or_default();
            for m in &t.members {
                let me = ends(m);
                if !inside(me, here) {
                    return Err(fail("membership", format!("member {me:?} outside its top {here:?}")));
                }
                if me != here && children.iter().any(|c| inside(me, *c)) {
                    return Err(fail("membership", format!("member {me:?} lies inside a next-level top")));
                }
            }
            audit.members += t.members.len();

            let len = here.1 - here.0;
            for s in &t.sigma {
                let cell = (s.c * len as f64).round() as i64;
                if !tiles.insert((t.top.k, t.top.n, cell)) {
                    return Err(fail("tile distinctness", format!("tile {here:?} x cell {cell} repeats")));
                }
            }
        }
        audit.tops += tree.tops.len();
    }
    audit.tiles = tiles.len();

    let samples: Vec<(DyadicInterval, &[f64])> = forest
        .trees
        .iter()
        .flat_map(|tree| tree.tops.iter())
        .flat_map(|t| {
            let small: Vec<&DyadicInterval> =
                t.members[1..].iter().filter(|m| (1i64 << m.k) <= DIRECT_MAX_LEN).collect();
            let stride = (small.len() / SAMPLES_PER_TOP).max(1);
            small.into_iter().step_by(stride).take(SAMPLES_PER_TOP).map(|m| (*m, &t.freqs[..])).collect::<Vec<_>>()
        })
        .collect();
    let ratios: Vec<f64> = samples
        .par_iter()
        .map(|(m, lam)| {
            let (lo, hi) = ends(m);
            let len = hi - lo;
            let q = (cfg.oversample.max(8) * len as usize).next_power_of_two();
            direct_defect(lo, len, lam, g, cfg.delta, q) / (cfg.rho * cfg.rho * len as f64)
        })
        .collect();
    if let Some((i, r)) = ratios.iter().enumerate().find(|(_, r)| **r > 1.0 + 1e-6) {
        return Err(fail("member localization", format!("member {:?} has defect ratio {r}", samples[i].0)));
    }
    audit.defects_rechecked = ratios.len();
    audit.max_member_ratio = ratios.into_iter().fold(0.0, f64::max);
    Ok(audit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::{build_forest, localization_test, ForestConfig, Tree};
    use crate::fourier::TorusGrid;
    use crate::signals::gen_random_phase;

    #[test]
    fn direct_defect_agrees_with_builder() {
        let g = gen_random_phase(11, 512).unwrap();
        let j = DyadicInterval::plain(5, 7);
        let lam = [0.1, 0.55, 0.8];
        let want = localization_test(&j, &lam, &g, 0.25, 0.3, TorusGrid::new(256).unwrap()).unwrap().defect;
        let got = direct_defect(224, 32, &lam, &g, 0.25, 256);
        assert!((want - got).abs() < 1e-9 * want.max(1.0), "{want} {got}");
    }

    #[test]
    fn audit_catches_tampering() {
        let g = gen_random_phase(2, 1024).unwrap();
        let cfg = ForestConfig::new(0.125, 0.25, 0.5, 3, vec![2, 4, 6, 8, 10]);
        let f = build_forest(&DyadicInterval::plain(10, 0), &g, &cfg).unwrap();
        let audit = check_forest(&f, &g).unwrap();
        assert!(audit.defects_rechecked > 0 && audit.max_member_ratio <= 1.0);
        assert!(f.trees.len() > 1, "random data should produce a second level");

        let mut bad = f.clone();
        bad.trees[1].tops[0].freqs.clear();
        assert!(check_forest(&bad, &g).unwrap_err().to_string().contains("nesting"));

        let mut bad = f.clone();
        let dup = bad.trees[1].tops[0].clone();
        bad.trees[1].tops.push(dup);
        assert!(check_forest(&bad, &g).unwrap_err().to_string().contains("disjointness"));

        let mut bad = f.clone();
        bad.trees.push(Tree { index: 9, tops: vec![bad.trees[0].tops[0].clone()] });
        assert!(check_forest(&bad, &g).is_err());

        let mut bad = f;
        bad.config.size_constant = 1e-3;
        assert!(check_forest(&bad, &g).unwrap_err().to_string().contains("size"));
    }
}
