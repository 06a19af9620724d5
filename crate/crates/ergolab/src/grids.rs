//! Shifted dyadic grids, boundary cores, tiles and wave packets.
//!
//! Interval endpoints are kept as integers in units of `2^{b/B} / Delta`, so
//! nesting and intersection inside one family of grids are decided exactly.

use std::collections::{BTreeSet, HashMap};

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, precondition, Error, Result};
use crate::fourier::{dft, SmoothCutoff};
use crate::rng::prng;
use crate::signals::{e, Signal};

/// `(Delta, L, b, B)`: intervals `2^{b/B} 2^k (n + L/Delta + [0, 1))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridShift {
    pub delta_grid: u64,
    pub l_shift: u64,
    pub b: u64,
    pub b_t: u64,
}

impl GridShift {
    /// The standard dyadic grid.
    pub fn plain() -> Self {
        Self { delta_grid: 3, l_shift: 0, b: 0, b_t: 1 }
    }

    pub fn shifted(delta_grid: u64, l_shift: u64) -> Self {
        Self { delta_grid, l_shift, b: 0, b_t: 1 }
    }

    /// Length of one endpoint unit.
    pub fn unit(&self) -> f64 {
        2f64.powf(self.b as f64 / self.b_t as f64) / self.delta_grid as f64
    }

    fn same_units(&self, other: &GridShift) -> bool {
        self.delta_grid == other.delta_grid && self.b * other.b_t == other.b * self.b_t
    }

    fn validate(&self) -> Result<()> {
        let d = self.delta_grid;
        if d < 3 || d.is_multiple_of(2) {
            return Err(invalid(format!("Delta = {d} must be odd and at least 3")));
        }
        if self.l_shift >= d {
            return Err(invalid(format!("shift L = {} must lie in [0, {d})", self.l_shift)));
        }
        if self.b_t == 0 || self.b >= self.b_t {
            return Err(invalid(format!("fractional scale b = {} must lie in [0, {})", self.b, self.b_t)));
        }
        if pow_mod(2, d - 1, d) != 1 {
            return Err(invalid(format!("2^(Delta-1) mod Delta != 1 for Delta = {d}")));
        }
        Ok(())
    }
}

pub fn pow_mod(base: u64, mut exp: u64, m: u64) -> u64 {
    let (mut acc, mut b) = (1u128 % m as u128, base as u128 % m as u128);
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * b % m as u128;
        }
        b = b * b % m as u128;
        exp >>= 1;
    }
    acc as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DyadicInterval {
    pub k: u32,
    pub n: i64,
    pub shift: GridShift,
}

impl DyadicInterval {
    pub fn new(k: u32, n: i64, shift: GridShift) -> Self {
        Self { k, n, shift }
    }

    /// `[n 2^k, (n + 1) 2^k)` on the plain grid.
    pub fn plain(k: u32, n: i64) -> Self {
        Self::new(k, n, GridShift::plain())
    }

    fn units(&self) -> (i128, i128) {
        let d = self.shift.delta_grid as i128;
        let lo = (self.n as i128 * d + self.shift.l_shift as i128) << self.k;
        (lo, lo + (d << self.k))
    }

    pub fn left(&self) -> f64 {
        self.units().0 as f64 * self.shift.unit()
    }

    pub fn right(&self) -> f64 {
        self.units().1 as f64 * self.shift.unit()
    }

    pub fn len(&self) -> f64 {
        ((self.shift.delta_grid as i128) << self.k) as f64 * self.shift.unit()
    }

    /// Integer points `n` with `left <= n < right`.
    pub fn integer_points(&self) -> std::ops::Range<i64> {
        self.left().ceil() as i64..self.right().ceil() as i64
    }

    fn endpoints_with(&self, other: &DyadicInterval) -> Option<((i128, i128), (i128, i128))> {
        self.shift.same_units(&other.shift).then(|| (self.units(), other.units()))
    }

    /// `other` is contained in `self`.
    pub fn contains(&self, other: &DyadicInterval) -> bool {
        match self.endpoints_with(other) {
            Some(((a, b), (c, d))) => a <= c && d <= b,
            None => {
                let tol = 1e-9 * self.len().max(other.len());
                self.left() <= other.left() + tol && other.right() <= self.right() + tol
            }
        }
    }

    pub fn intersects(&self, other: &DyadicInterval) -> bool {
        match self.endpoints_with(other) {
            Some(((a, b), (c, d))) => a < d && c < b,
            None => self.left() < other.right() && other.left() < self.right(),
        }
    }

    /// Left `1/Delta` part of the interval.
    pub fn boundary_core(&self) -> BoundaryCore {
        let lo = self.left();
        BoundaryCore { parent: *self, lo, hi: lo + self.len() / self.shift.delta_grid as f64 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCore {
    pub parent: DyadicInterval,
    pub lo: f64,
    pub hi: f64,
}

impl BoundaryCore {
    /// Closed on the right so the extreme shift `|I|/Delta` is admitted.
    pub fn contains(&self, x: f64) -> bool {
        let tol = 1e-12 * self.parent.len();
        self.lo - tol <= x && x <= self.hi + tol
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }
}

/// `|I sym-diff (x + [0, |I|))| / |I|`, which is at most `2/Delta` on the core.
pub fn boundary_smoothness_check(i: &DyadicInterval, x: f64) -> Result<f64> {
    let core = i.boundary_core();
    if !core.contains(x) {
        return Err(precondition(format!("x = {x} outside the boundary core [{}, {}]", core.lo, core.hi)));
    }
    let len = i.len();
    let ratio = 2.0 * (x - i.left()).abs().min(len) / len;
    let bound = 2.0 / i.shift.delta_grid as f64;
    if ratio > bound * (1.0 + 1e-12) {
        return Err(Error::Invariant(format!("boundary ratio {ratio} exceeds {bound}")));
    }
    Ok(ratio)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftedGrid {
    pub shift: GridShift,
    pub u: u32,
    pub stride: u32,
    pub range: (f64, f64),
    pub intervals: Vec<DyadicInterval>,
}

/// All grid intervals meeting `range` at scales `k = u mod stride`, from the
/// first such `k >= 0` up to the first scale covering the whole range.
pub fn build_grid(shift: GridShift, u: u32, range: (f64, f64), stride: u32) -> Result<ShiftedGrid> {
    shift.validate()?;
    let (lo, hi) = range;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(invalid(format!("empty or infinite range [{lo}, {hi})")));
    }
    if stride == 0 || stride > 60 {
        return Err(invalid(format!("scale stride {stride} out of range")));
    }
    // scales `stride` apart nest only if L (2^stride - 1) = 0 mod Delta
    if !(shift.l_shift as u128 * ((1u128 << stride) - 1)).is_multiple_of(shift.delta_grid as u128) {
        return Err(invalid(format!(
            "scales {stride} apart do not nest for L = {}, Delta = {}",
            shift.l_shift, shift.delta_grid
        )));
    }
    let frac = shift.l_shift as f64 / shift.delta_grid as f64;
    let mut intervals = Vec::new();
    let mut k = u % stride;
    loop {
        let probe = DyadicInterval::new(k, 0, shift);
        let len = probe.len();
        let n0 = (lo / len - frac).floor() as i64 - 1;
        let n1 = (hi / len - frac).ceil() as i64 + 1;
        intervals
            .extend((n0..=n1).map(|n| DyadicInterval::new(k, n, shift)).filter(|i| i.left() < hi && i.right() > lo));
        if len >= hi - lo || k + stride > 62 {
            break;
        }
        k += stride;
    }
    Ok(ShiftedGrid { shift, u, stride, range, intervals })
}

impl ShiftedGrid {
    pub fn scales(&self) -> Vec<u32> {
        let set: BTreeSet<u32> = self.intervals.iter().map(|i| i.k).collect();
        set.into_iter().collect()
    }

    pub fn at_scale(&self, k: u32) -> impl Iterator<Item = &DyadicInterval> {
        self.intervals.iter().filter(move |i| i.k == k)
    }

    /// Grid intervals one stride below `i`.
    pub fn children(&self, i: &DyadicInterval) -> Vec<DyadicInterval> {
        if i.k < self.stride {
            return Vec::new();
        }
        self.at_scale(i.k - self.stride).filter(|c| i.contains(c)).copied().collect()
    }

    /// The grid interval of scale `k` containing `x`.
    pub fn containing(&self, x: f64, k: u32) -> DyadicInterval {
        let probe = DyadicInterval::new(k, 0, self.shift);
        let n = (x / probe.len() - self.shift.l_shift as f64 / self.shift.delta_grid as f64).floor() as i64;
        DyadicInterval::new(k, n, self.shift)
    }

    /// First pair whose intersection is neither empty nor one of the two.
    pub fn grid_property_violation(&self) -> Option<(DyadicInterval, DyadicInterval)> {
        let iv = &self.intervals;
        (0..iv.len()).into_par_iter().find_map_first(|a| {
            iv[a + 1..]
                .iter()
                .find(|b| iv[a].intersects(b) && !iv[a].contains(b) && !b.contains(&iv[a]))
                .map(|b| (iv[a], *b))
        })
    }
}

/// Dyadic frequency interval `[m 2^-j, (m + 1) 2^-j)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FreqInterval {
    pub j: u32,
    pub m: i64,
}

impl FreqInterval {
    pub fn lo(&self) -> f64 {
        self.m as f64 / (1u64 << self.j) as f64
    }

    pub fn hi(&self) -> f64 {
        (self.m + 1) as f64 / (1u64 << self.j) as f64
    }

    pub fn width(&self) -> f64 {
        1.0 / (1u64 << self.j) as f64
    }

    pub fn contains(&self, other: &FreqInterval) -> bool {
        other.j >= self.j && other.m >> (other.j - self.j) == self.m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tile {
    pub time: DyadicInterval,
    pub freq: FreqInterval,
    pub xi: f64,
}

impl Tile {
    /// `xi` defaults to the left end of the frequency interval.
    pub fn new(time: DyadicInterval, freq: FreqInterval, xi: Option<f64>) -> Result<Self> {
        let area = time.len() * freq.width();
        if !(1.0 - 1e-12..2.0).contains(&area) {
            return Err(invalid(format!("tile area |I||w| = {area} outside [1, 2)")));
        }
        let xi = xi.unwrap_or_else(|| freq.lo());
        if !(freq.lo() <= xi && xi < freq.hi()) {
            return Err(invalid(format!("xi = {xi} outside [{}, {})", freq.lo(), freq.hi())));
        }
        Ok(Self { time, freq, xi })
    }

    /// Plain-grid tile `[n 2^k, (n+1) 2^k) x [m 2^-k, (m+1) 2^-k)`.
    pub fn plain(k: u32, n: i64, m: i64) -> Self {
        let freq = FreqInterval { j: k, m };
        Self { time: DyadicInterval::plain(k, n), freq, xi: freq.lo() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TileOrder {
    Less,
    Greater,
    Equal,
    Incomparable,
}

/// `s < s2` iff `I_s` lies in `I_s2` and `w_s2` lies in `w_s`.
pub fn tile_comparable(s: &Tile, s2: &Tile) -> TileOrder {
    let below = s2.time.contains(&s.time) && s.freq.contains(&s2.freq);
    let above = s.time.contains(&s2.time) && s2.freq.contains(&s.freq);
    match (below, above) {
        (true, true) => TileOrder::Equal,
        (true, false) => TileOrder::Less,
        (false, true) => TileOrder::Greater,
        (false, false) => TileOrder::Incomparable,
    }
}

/// `|I|^{-1/2} phi((n - c_I)/|I|) e(n xi)` on the integer points of `I`.
pub fn wave_packet(s: &Tile, phi: &SmoothCutoff) -> Result<Signal> {
    let (c, len) = (s.time.left(), s.time.len());
    let pts = s.time.integer_points();
    let start = pts.start;
    let amp = len.sqrt().recip();
    let values = pts.map(|n| e(n as f64 * s.xi) * (amp * phi.eval((n as f64 - c) / len))).collect();
    Signal::new(values, start, "wave_packet")
}

/// `<psi_s, g> = sum_n psi_s(n) conj(g(n))`.
pub fn tile_coefficient(s: &Tile, g: &Signal, phi: &SmoothCutoff) -> Result<Complex64> {
    let psi = wave_packet(s, phi)?;
    Ok(inner(&psi, g))
}

pub fn inner(f: &Signal, g: &Signal) -> Complex64 {
    let start = f.window_start();
    f.values().iter().enumerate().map(|(i, v)| v * g.at(start + i as i64).conj()).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BesselConfig {
    pub delta: f64,
    pub eps: f64,
    /// Largest admitted frequency width.
    pub omega_max: f64,
    /// `I_0`; defaults to the hull of the tile intervals.
    pub i0: Option<(f64, f64)>,
}

impl BesselConfig {
    pub fn new(delta: f64, eps: f64) -> Self {
        Self { delta, eps, omega_max: 1.0 / 16.0, i0: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BesselReport {
    pub tiles: usize,
    pub too_wide: usize,
    pub sum_sq: f64,
    /// `||g 1_{I_S}||^2`.
    pub l2_mass: f64,
    pub l2_ratio: f64,
    pub admitted: usize,
    pub off_level: usize,
    pub packing_sum: f64,
    pub i0_len: f64,
    pub packing_bound: f64,
    pub packing_ratio: f64,
    pub omega_max: f64,
}

pub fn check_antichain(tiles: &[Tile]) -> Result<()> {
    let clash = (0..tiles.len()).into_par_iter().find_map_first(|a| {
        (a + 1..tiles.len()).find_map(|b| match tile_comparable(&tiles[a], &tiles[b]) {
            TileOrder::Incomparable => None,
            o => Some((a, b, o)),
        })
    });
    match clash {
        Some((a, b, o)) => Err(precondition(format!("tiles {a} and {b} are comparable ({o:?})"))),
        None => Ok(()),
    }
}

pub fn bessel_check(tiles: &[Tile], g: &Signal, phi: &SmoothCutoff, cfg: &BesselConfig) -> Result<BesselReport> {
    if !(cfg.delta > 0.0 && cfg.delta <= 1.0) || cfg.eps < 0.0 {
        return Err(invalid(format!("need 0 < delta <= 1 and eps >= 0, got {} and {}", cfg.delta, cfg.eps)));
    }
    check_antichain(tiles)?;
    let kept: Vec<&Tile> = tiles.iter().filter(|s| s.freq.width() <= cfg.omega_max).collect();
    let coeffs: Vec<f64> =
        kept.par_iter().map(|s| tile_coefficient(s, g, phi).map(|c| c.norm())).collect::<Result<_>>()?;
    let sum_sq: f64 = coeffs.iter().map(|c| c * c).sum();

    let mut points = BTreeSet::new();
    for s in &kept {
        points.extend(s.time.integer_points());
    }
    let l2_mass: f64 = points.iter().map(|&n| g.at(n).norm_sqr()).sum();

    let (i0_lo, i0_hi) = cfg.i0.unwrap_or_else(|| {
        kept.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), s| (a.min(s.time.left()), b.max(s.time.right())))
    });
    let i0_len = (i0_hi - i0_lo).max(0.0);
    let mut admitted = 0;
    let mut packing_sum = 0.0;
    for (s, c) in kept.iter().zip(&coeffs) {
        if s.time.left() < i0_lo || s.time.right() > i0_hi {
            continue;
        }
        let level = cfg.delta * s.time.len().sqrt();
        if level / 2.0 <= *c && *c <= 2.0 * level {
            admitted += 1;
            packing_sum += s.time.len();
        }
    }
    let in_i0 = kept.iter().filter(|s| s.time.left() >= i0_lo && s.time.right() <= i0_hi).count();
    let l2_scale = cfg.delta.powf(-cfg.eps) * l2_mass;
    let packing_bound = cfg.delta.powf(-2.0 - cfg.eps) * i0_len;
    Ok(BesselReport {
        tiles: kept.len(),
        too_wide: tiles.len() - kept.len(),
        sum_sq,
        l2_mass,
        l2_ratio: if l2_scale > 0.0 { sum_sq / l2_scale } else { 0.0 },
        admitted,
        off_level: in_i0 - admitted,
        packing_sum,
        i0_len,
        packing_bound,
        packing_ratio: if packing_bound > 0.0 { packing_sum / packing_bound } else { 0.0 },
        omega_max: cfg.omega_max,
    })
}

/// Plain-grid tiles over `[0, 2^top)` at scales `k_min..=top` with all
/// frequencies `m 2^-k` in `[0, 1)`, paired with `|<psi_s, g>|`.
pub fn tile_pool(g: &Signal, top: u32, k_min: u32, phi: &SmoothCutoff) -> Vec<(Tile, f64)> {
    (k_min..=top)
        .into_par_iter()
        .flat_map_iter(|k| {
            let len = 1usize << k;
            let amp = (len as f64).sqrt().recip();
            let window: Vec<f64> = (0..len).map(|j| phi.eval(j as f64 / len as f64)).collect();
            (0..1i64 << (top - k)).flat_map(move |n| {
                let a = n * len as i64;
                let mut buf: Vec<Complex64> = (0..len).map(|j| g.at(a + j as i64).conj() * window[j]).collect();
                // sum_j buf_j e(j m / len); the phase e(a m / len) is one
                dft::inverse(&mut buf);
                buf.into_iter().enumerate().map(move |(m, c)| (Tile::plain(k, n, m as i64), c.norm() * amp))
            })
        })
        .collect()
}

/// Greedy maximal antichain: scan `pool` in a seeded random order and keep
/// each tile incomparable with everything kept so far.
pub fn greedy_antichain(pool: &[Tile], seed: u64) -> Vec<Tile> {
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.shuffle(&mut prng(seed));
    let plain = pool.iter().all(|s| s.time.shift == GridShift::plain() && s.freq.j == s.time.k);
    if plain {
        return plain_antichain(pool, &order);
    }
    let mut kept: Vec<Tile> = Vec::new();
    for i in order {
        let s = &pool[i];
        if !kept.par_iter().any(|t| tile_comparable(s, t) != TileOrder::Incomparable) {
            kept.push(*s);
        }
    }
    kept
}

/// Plain tiles of area one are comparable exactly when they overlap as
/// rectangles, so kept tiles are indexed by time and by frequency cell.
fn plain_antichain(pool: &[Tile], order: &[usize]) -> Vec<Tile> {
    let mut by_time: HashMap<(u32, i64), BTreeSet<i64>> = HashMap::new();
    let mut by_freq: HashMap<(u32, i64), BTreeSet<i64>> = HashMap::new();
    let mut scales: BTreeSet<u32> = BTreeSet::new();
    let mut kept = Vec::new();
    for &i in order {
        let s = &pool[i];
        let (k, n, m) = (s.time.k, s.time.n, s.freq.m);
        let clash = scales.iter().any(|&k2| {
            if k2 >= k {
                // coarser in time: its frequency cell lies inside ours
                let d = k2 - k;
                by_time.get(&(k2, n >> d)).is_some_and(|ms| ms.range(m << d..(m + 1) << d).next().is_some())
            } else {
                let d = k - k2;
                by_freq.get(&(k2, m >> d)).is_some_and(|ns| ns.range(n << d..(n + 1) << d).next().is_some())
            }
        });
        if !clash {
            by_time.entry((k, n)).or_default().insert(m);
            by_freq.entry((k, m)).or_default().insert(n);
            scales.insert(k);
            kept.push(*s);
        }
    }
    kept
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::{gen_rademacher, modulate};

    fn ind() -> SmoothCutoff {
        SmoothCutoff::indicator(0.0, 1.0)
    }

    #[test]
    fn fermat_condition() {
        for d in [3u64, 5, 7, 11, 13] {
            assert_eq!(pow_mod(2, d - 1, d), 1);
        }
        assert_eq!(pow_mod(2, 8, 9), 4);
        assert!(build_grid(GridShift::shifted(9, 1), 0, (0.0, 8.0), 8).is_err());
        assert!(build_grid(GridShift::shifted(4, 1), 0, (0.0, 8.0), 3).is_err());
    }

    #[test]
    fn plain_grid_is_standard() {
        let g = build_grid(GridShift::plain(), 0, (0.0, 8.0), 1).unwrap();
        assert_eq!(g.scales(), vec![0, 1, 2, 3]);
        assert_eq!(g.at_scale(0).count(), 8);
        let firsts: Vec<(f64, f64)> = g.at_scale(1).map(|i| (i.left(), i.right())).collect();
        assert_eq!(firsts, vec![(0.0, 2.0), (2.0, 4.0), (4.0, 6.0), (6.0, 8.0)]);
        assert!(g.grid_property_violation().is_none());
    }

    #[test]
    fn shifted_grid_property() {
        // consecutive scales of a shifted grid do not nest
        assert!(build_grid(GridShift::shifted(3, 1), 0, (0.0, 64.0), 1).is_err());
        for (d, l) in [(3u64, 1u64), (3, 2), (5, 3), (7, 4)] {
            let g = build_grid(GridShift::shifted(d, l), 0, (0.0, 256.0), d as u32 - 1).unwrap();
            assert!(g.grid_property_violation().is_none(), "Delta={d} L={l}");
            let i = g.at_scale(0).next().unwrap();
            assert!((i.left() - (i.n as f64 + l as f64 / d as f64)).abs() < 1e-15);
        }
    }

    #[test]
    fn nesting_counts() {
        let g = build_grid(GridShift::shifted(3, 1), 0, (0.0, 256.0), 2).unwrap();
        for i in g.at_scale(4) {
            if i.left() >= 0.0 && i.right() <= 256.0 {
                assert_eq!(g.children(i).len(), 4);
            }
        }
        let i = g.containing(10.5, 2);
        assert!(i.left() <= 10.5 && 10.5 < i.right());
    }

    #[test]
    fn boundary_core_ratio() {
        let i = DyadicInterval::new(6, 2, GridShift::shifted(5, 2));
        assert_eq!(boundary_smoothness_check(&i, i.left()).unwrap(), 0.0);
        let edge = i.left() + i.len() / 5.0;
        let r = boundary_smoothness_check(&i, edge).unwrap();
        assert!((r - 2.0 / 5.0).abs() < 1e-12);
        assert!(boundary_smoothness_check(&i, edge + 1.0).is_err());
        let core = i.boundary_core();
        assert!((core.len() * 5.0 - i.len()).abs() < 1e-9);
    }

    #[test]
    fn tile_order_cases() {
        let s = Tile::new(DyadicInterval::plain(1, 0), FreqInterval { j: 1, m: 0 }, None).unwrap();
        let s2 = Tile::new(DyadicInterval::plain(2, 0), FreqInterval { j: 2, m: 0 }, None).unwrap();
        assert_eq!(tile_comparable(&s, &s2), TileOrder::Less);
        assert_eq!(tile_comparable(&s2, &s), TileOrder::Greater);
        assert_eq!(tile_comparable(&s, &s), TileOrder::Equal);
        let far = Tile::plain(1, 5, 0);
        assert_eq!(tile_comparable(&s, &far), TileOrder::Incomparable);
        assert!(Tile::new(DyadicInterval::plain(2, 0), FreqInterval { j: 1, m: 0 }, None).is_err());
    }

    #[test]
    fn wave_packet_basics() {
        let s = Tile::plain(4, 1, 0);
        let p = wave_packet(&s, &ind()).unwrap();
        assert_eq!(p.window_start(), 16);
        assert!(p.values().iter().all(|v| (v.re - 0.25).abs() < 1e-15 && v.im == 0.0));
        assert!((p.l2_norm_sq() - 1.0).abs() < 1e-12);

        let phi = SmoothCutoff::trapezoid(0.0, 0.25, 0.75, 1.0);
        let s = Tile::plain(6, 0, 5);
        let p = wave_packet(&s, &phi).unwrap();
        let mean: f64 = (0..64).map(|j| phi.eval(j as f64 / 64.0)).sum::<f64>() / 64.0;
        let want: f64 = (0..64).map(|j| phi.eval(j as f64 / 64.0).powi(2)).sum::<f64>() / 64.0;
        assert!((p.l2_norm_sq() - want).abs() < 1e-12);
        let carrier = modulate(&Signal::ones(64), s.xi);
        assert!((inner(&p, &carrier) - Complex64::new(8.0 * mean, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn pool_matches_direct_coefficients() {
        let g = gen_rademacher(4, 256).unwrap();
        let phi = SmoothCutoff::trapezoid(0.0, 0.2, 0.8, 1.0);
        let pool = tile_pool(&g, 8, 4, &phi);
        assert_eq!(pool.len(), 5 * 256);
        for (s, c) in pool.iter().step_by(37) {
            let direct = tile_coefficient(s, &g, &phi).unwrap().norm();
            assert!((direct - c).abs() < 1e-10, "{s:?}");
        }
    }

    #[test]
    fn bessel_simple_cases() {
        let g = gen_rademacher(2, 1024).unwrap();
        let cfg = BesselConfig::new(0.25, 0.1);
        let one = [Tile::plain(5, 3, 2)];
        let r = bessel_check(&one, &g, &ind(), &cfg).unwrap();
        assert!(r.l2_ratio <= 1.0 && r.sum_sq <= r.l2_mass + 1e-12);

        let disjoint: Vec<Tile> = (0..16).map(|n| Tile::plain(6, n, (n * 7) % 64)).collect();
        let r = bessel_check(&disjoint, &g, &ind(), &cfg).unwrap();
        assert!(r.sum_sq <= r.l2_mass + 1e-9);

        let bad = [Tile::plain(4, 0, 0), Tile::plain(5, 0, 0)];
        let err = bessel_check(&bad, &g, &ind(), &cfg).unwrap_err().to_string();
        assert!(err.contains("tiles 0 and 1"), "{err}");
    }

    #[test]
    fn antichain_is_incomparable_and_maximal() {
        let g = gen_rademacher(9, 512).unwrap();
        let pool: Vec<Tile> = tile_pool(&g, 9, 4, &ind()).into_iter().map(|(s, _)| s).collect();
        let chain = greedy_antichain(&pool, 1);
        assert!(check_antichain(&chain).is_ok());
        // the indexed scan agrees with the pairwise one
        let mut order: Vec<usize> = (0..pool.len()).collect();
        order.shuffle(&mut prng(1));
        let mut brute: Vec<Tile> = Vec::new();
        for i in order {
            if brute.iter().all(|t| tile_comparable(&pool[i], t) == TileOrder::Incomparable) {
                brute.push(pool[i]);
            }
        }
        assert_eq!(brute, chain);
        for s in pool.iter().step_by(11) {
            assert!(chain.iter().any(|t| tile_comparable(s, t) != TileOrder::Incomparable));
        }
        // subsets never increase the sum
        let cfg = BesselConfig::new(0.25, 0.1);
        let full = bessel_check(&chain, &g, &ind(), &cfg).unwrap();
        let half = bessel_check(&chain[..chain.len() / 2], &g, &ind(), &cfg).unwrap();
        assert!(half.sum_sq <= full.sum_sq);
    }
}
