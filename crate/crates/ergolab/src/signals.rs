//! 1-bounded complex sequences on finite windows of the integers.

use std::f64::consts::TAU;
use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::prng;

pub const BOUND_SLACK: f64 = 1e-12;

/// Fractional part in `[0, 1)`.
pub fn frac(t: f64) -> f64 {
    let f = t - t.floor();
    if f >= 1.0 {
        0.0
    } else {
        f
    }
}

/// `e(t) = exp(2 pi i t)`, reduced mod 1 first so integer phases are exact.
pub fn e(t: f64) -> Complex64 {
    let r = frac(t);
    if r == 0.0 {
        return Complex64::new(1.0, 0.0);
    }
    if r == 0.5 {
        return Complex64::new(-1.0, 0.0);
    }
    let (s, c) = (TAU * r).sin_cos();
    Complex64::new(c, s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Signal {
    values: Vec<Complex64>,
    window_start: i64,
    label: String,
}

impl Signal {
    pub fn new(values: Vec<Complex64>, window_start: i64, label: impl Into<String>) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("signal must have length at least 1"));
        }
        if let Some((i, v)) =
            values.iter().enumerate().find(|(_, v)| !v.norm().is_finite() || v.norm() > 1.0 + BOUND_SLACK)
        {
            return Err(Error::Ingest(format!(
                "not 1-bounded at index {} (|v| = {})",
                window_start + i as i64,
                v.norm()
            )));
        }
        Ok(Self { values, window_start, label: label.into() })
    }

    pub fn from_real(values: &[f64], label: impl Into<String>) -> Result<Self> {
        Self::new(values.iter().map(|&x| Complex64::new(x, 0.0)).collect(), 0, label)
    }

    pub fn ones(h: usize) -> Self {
        Self::constant(Complex64::new(1.0, 0.0), h, "ones")
    }

    pub fn zeros(h: usize) -> Self {
        Self::constant(Complex64::new(0.0, 0.0), h, "zeros")
    }

    fn constant(c: Complex64, h: usize, label: &str) -> Self {
        Self { values: vec![c; h.max(1)], window_start: 0, label: label.into() }
    }

    pub fn point_mass(h: usize, at: usize) -> Self {
        let mut s = Self::zeros(h);
        s.values[at] = Complex64::new(1.0, 0.0);
        s.label = format!("delta@{at}");
        s
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn window_start(&self) -> i64 {
        self.window_start
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn window_end(&self) -> i64 {
        self.window_start + self.values.len() as i64
    }

    /// Value at absolute index `n`, zero outside the window.
    #[inline]
    pub fn at(&self, n: i64) -> Complex64 {
        let i = n - self.window_start;
        if i < 0 || i >= self.values.len() as i64 {
            Complex64::new(0.0, 0.0)
        } else {
            self.values[i as usize]
        }
    }

    pub fn with_start(mut self, start: i64) -> Self {
        self.window_start = start;
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Restriction to `[lo, hi)` (zero-extended where the window ends).
    pub fn restrict(&self, lo: i64, hi: i64) -> Signal {
        let values = (lo..hi.max(lo + 1)).map(|n| if n < hi { self.at(n) } else { Complex64::new(0.0, 0.0) }).collect();
        Signal { values, window_start: lo, label: format!("{}[{lo},{hi})", self.label) }
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum()
    }
}

pub fn gen_character(theta: f64, h: usize) -> Result<Signal> {
    if h == 0 {
        return Err(invalid("h must be at least 1"));
    }
    let values = (0..h).map(|n| e(theta * n as f64)).collect();
    Signal::new(values, 0, format!("char({theta})"))
}

pub fn gen_rotation_indicator(theta0: f64, arc: (f64, f64), h: usize) -> Result<Signal> {
    let (lo, hi) = arc;
    if !(0.0 <= lo && lo < hi && hi <= 1.0) {
        return Err(invalid(format!("arc [{lo}, {hi}) is empty or outside [0,1]")));
    }
    if h == 0 {
        return Err(invalid("h must be at least 1"));
    }
    let values = (0..h)
        .map(|n| {
            let x = frac(n as f64 * theta0);
            Complex64::new(if lo <= x && x < hi { 1.0 } else { 0.0 }, 0.0)
        })
        .collect();
    Signal::new(values, 0, format!("rot({theta0};{lo},{hi})"))
}

/// Random signs from SplitMix64: bit 63 of each output picks the sign.
pub fn gen_rademacher(seed: u64, h: usize) -> Result<Signal> {
    if h == 0 {
        return Err(invalid("h must be at least 1"));
    }
    let mut rng = prng(seed);
    let values = (0..h).map(|_| Complex64::new(if rng.gen::<u64>() >> 63 == 0 { 1.0 } else { -1.0 }, 0.0)).collect();
    Signal::new(values, 0, format!("rademacher({seed})"))
}

/// Random unimodular phases, the complex analogue of [`gen_rademacher`].
pub fn gen_random_phase(seed: u64, h: usize) -> Result<Signal> {
    if h == 0 {
        return Err(invalid("h must be at least 1"));
    }
    let mut rng = prng(seed);
    let values = (0..h).map(|_| e(rng.gen::<f64>())).collect();
    Signal::new(values, 0, format!("phase({seed})"))
}

/// Characters with random frequencies on the leaves of a random dyadic
/// partition of `[0, h)`: each block longer than `min_block` splits in half
/// with probability `split`.
pub fn gen_block_characters(seed: u64, h: usize, split: f64, min_block: usize) -> Result<Signal> {
    if !h.is_power_of_two() || min_block == 0 {
        return Err(invalid("h must be a power of two and min_block positive"));
    }
    if !(0.0..=1.0).contains(&split) {
        return Err(invalid(format!("split probability {split} outside [0, 1]")));
    }
    let mut rng = prng(seed);
    let mut values = vec![Complex64::new(0.0, 0.0); h];
    let mut stack = vec![(0usize, h)];
    while let Some((lo, len)) = stack.pop() {
        if len > min_block && rng.gen::<f64>() < split {
            stack.push((lo + len / 2, len / 2));
            stack.push((lo, len / 2));
        } else {
            let theta: f64 = rng.gen();
            for (n, v) in values[lo..lo + len].iter_mut().enumerate() {
                *v = e(theta * (lo + n) as f64);
            }
        }
    }
    Signal::new(values, 0, format!("blocks({seed};{split})"))
}

pub fn modulate(g: &Signal, theta: f64) -> Signal {
    let values = g
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let p = e(theta * (g.window_start + i as i64) as f64);
            // keep the modulus exactly
            let w = v * p;
            let (r, r0) = (w.norm(), v.norm());
            if r > 0.0 {
                w * (r0 / r)
            } else {
                w
            }
        })
        .collect();
    Signal { values, window_start: g.window_start, label: format!("mod({},{theta})", g.label) }
}

/// `sup_N (2N+1)^-1 sum_{|n|<=N} |f(x-n)|` at every window point, zero-extended.
pub fn maximal_hl(f: &Signal) -> Vec<f64> {
    let h = f.len();
    let mut prefix = vec![0.0; h + 1];
    for (i, v) in f.values.iter().enumerate() {
        prefix[i + 1] = prefix[i] + v.norm();
    }
    (0..h)
        .map(|x| {
            // beyond max(x, h-1-x) the sum is frozen and the average only shrinks
            let reach = x.max(h - 1 - x);
            (0..=reach)
                .map(|n| {
                    let lo = x.saturating_sub(n);
                    let hi = (x + n + 1).min(h);
                    (prefix[hi] - prefix[lo]) / (2 * n + 1) as f64
                })
                .fold(0.0, f64::max)
        })
        .collect()
}

pub fn save_signal(s: &Signal, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["index", "re", "im"])?;
    for (i, v) in s.values.iter().enumerate() {
        let n = s.window_start + i as i64;
        w.write_record([n.to_string(), v.re.to_string(), v.im.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_signal(path: impl AsRef<Path>) -> Result<Signal> {
    let path = path.as_ref();
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers = r.headers()?.clone();
    if headers.iter().map(str::trim).collect::<Vec<_>>() != ["index", "re", "im"] {
        return Err(Error::Ingest(format!("expected header index,re,im, got {:?}", headers)));
    }
    let mut values = Vec::new();
    let mut start = None;
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        let field = |k: usize| -> Result<&str> {
            rec.get(k).map(str::trim).ok_or_else(|| Error::Ingest(format!("row {}: missing column {k}", row + 1)))
        };
        let index: i64 =
            field(0)?.parse().map_err(|_| Error::Ingest(format!("row {}: bad index {:?}", row + 1, rec.get(0))))?;
        let re: f64 =
            field(1)?.parse().map_err(|_| Error::Ingest(format!("row {}: bad re {:?}", row + 1, rec.get(1))))?;
        let im: f64 =
            field(2)?.parse().map_err(|_| Error::Ingest(format!("row {}: bad im {:?}", row + 1, rec.get(2))))?;
        let s = *start.get_or_insert(index);
        if index != s + values.len() as i64 {
            return Err(Error::Ingest(format!("row {}: index {index} is not consecutive", row + 1)));
        }
        let v = Complex64::new(re, im);
        if !v.norm().is_finite() || v.norm() > 1.0 + BOUND_SLACK {
            return Err(Error::Ingest(format!("not 1-bounded at index {index}")));
        }
        values.push(v);
    }
    let label = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Signal::new(values, start.unwrap_or(0), label)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Complex64, b: Complex64) -> bool {
        (a - b).norm() < 1e-12
    }

    #[test]
    fn block_characters_are_piecewise_characters() {
        let g = gen_block_characters(3, 1024, 0.7, 16).unwrap();
        assert_eq!(g.len(), 1024);
        assert!(g.values().iter().all(|v| (v.norm() - 1.0).abs() < 1e-12));
        // consecutive ratios are constant inside each leaf, so they take few distinct values
        let mut steps: Vec<f64> = g.values().windows(2).map(|w| (w[1] / w[0]).arg()).collect();
        steps.sort_by(f64::total_cmp);
        steps.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        assert!(steps.len() <= 1024 / 16 * 2, "{}", steps.len());
        assert_eq!(gen_block_characters(3, 1024, 0.7, 16).unwrap(), g);
        let whole = gen_block_characters(1, 64, 0.0, 1).unwrap();
        let theta = (whole.values()[1] / whole.values()[0]).arg() / std::f64::consts::TAU;
        assert!(close(whole.values()[63], e(63.0 * theta)));
        assert!(gen_block_characters(1, 100, 0.5, 4).is_err());
    }

    #[test]
    fn character_examples() {
        let s = gen_character(0.0, 4).unwrap();
        assert!(s.values().iter().all(|v| *v == Complex64::new(1.0, 0.0)));
        let s = gen_character(0.5, 4).unwrap();
        let want = [1.0, -1.0, 1.0, -1.0];
        for (v, w) in s.values().iter().zip(want) {
            assert!(close(*v, Complex64::new(w, 0.0)));
        }
        let s = gen_character(1.0 / 3.0, 3).unwrap();
        let sum: Complex64 = s.values().iter().sum();
        assert!(sum.norm() < 1e-12);
    }

    #[test]
    fn rotation_examples() {
        let g = (5f64.sqrt() - 1.0) / 2.0;
        let s = gen_rotation_indicator(g, (0.0, 1.0), 8).unwrap();
        assert!(s.values().iter().all(|v| v.re == 1.0));
        let h = 20000;
        let s = gen_rotation_indicator(g, (0.0, 0.5), h).unwrap();
        let mean = s.values().iter().map(|v| v.re).sum::<f64>() / h as f64;
        let hf = h as f64;
        assert!((mean - 0.5).abs() <= 2.0 / hf.sqrt() * hf.ln());
        let s = gen_rotation_indicator(g, (0.9, 0.95), 10).unwrap();
        for n in 0..10 {
            let x = (n as f64 * g).fract();
            assert_eq!(s.values()[n].re == 1.0, (0.9..0.95).contains(&x));
        }
        assert!(gen_rotation_indicator(g, (0.5, 0.5), 10).is_err());
    }

    #[test]
    fn rademacher_deterministic() {
        let a = gen_rademacher(1, 4).unwrap();
        assert_eq!(a, gen_rademacher(1, 4).unwrap());
        let a = gen_rademacher(1, 64).unwrap();
        assert_ne!(a, gen_rademacher(2, 64).unwrap());
        assert!(a.values().iter().all(|v| v.re.abs() == 1.0 && v.im == 0.0));
    }

    #[test]
    fn modulate_examples() {
        let s = modulate(&Signal::ones(6), 0.5);
        for (n, v) in s.values().iter().enumerate() {
            assert!(close(*v, Complex64::new(if n % 2 == 0 { 1.0 } else { -1.0 }, 0.0)));
        }
        let g = gen_random_phase(3, 32).unwrap();
        let back = modulate(&modulate(&g, 0.3), -0.3);
        for (a, b) in back.values().iter().zip(g.values()) {
            assert!(close(*a, *b));
        }
        let c = modulate(&gen_character(0.25, 8).unwrap(), 0.25);
        let d = gen_character(0.5, 8).unwrap();
        for (a, b) in c.values().iter().zip(d.values()) {
            assert!(close(*a, *b));
        }
    }

    #[test]
    fn maximal_point_mass() {
        let m = maximal_hl(&Signal::point_mass(5, 0));
        for (x, v) in m.iter().enumerate() {
            assert!((v - 1.0 / (2 * x + 1) as f64).abs() < 1e-15);
        }
        let m = maximal_hl(&Signal::ones(9));
        assert!(m.iter().all(|&v| v > 0.0 && v <= 1.0));
        assert!(m.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn maximal_brute_force() {
        let f = gen_random_phase(11, 64).unwrap();
        let mut rng = prng(5);
        let f = Signal::new(f.values().iter().map(|v| v * rng.gen::<f64>()).collect(), 0, "r").unwrap();
        let fast = maximal_hl(&f);
        for x in 0..64i64 {
            let mut best = 0.0f64;
            for n in 0..200i64 {
                let s: f64 = (-n..=n).map(|k| f.at(x - k).norm()).sum();
                best = best.max(s / (2 * n + 1) as f64);
            }
            assert!((best - fast[x as usize]).abs() < 1e-12);
        }
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let dir = std::env::temp_dir().join(format!("ergolab-sig-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("s.csv");
        let s = gen_random_phase(9, 50).unwrap().with_start(-3);
        save_signal(&s, &p).unwrap();
        let t = load_signal(&p).unwrap();
        assert_eq!(s.values(), t.values());
        assert_eq!(t.window_start(), -3);

        std::fs::write(&p, "index,re,im\n0,0,0\n1,0,0\n2,0,0\n3,0.5,0.5\n").unwrap();
        assert_eq!(load_signal(&p).unwrap().values()[3], Complex64::new(0.5, 0.5));

        std::fs::write(&p, "index,re,im\n0,0,0\n1,2.0,0\n").unwrap();
        let err = load_signal(&p).unwrap_err().to_string();
        assert!(err.contains("not 1-bounded at index 1"), "{err}");

        std::fs::write(&p, "index,re,im\n0,abc,0\n").unwrap();
        assert!(load_signal(&p).unwrap_err().to_string().contains("row 1"));
        std::fs::write(&p, "i,re,im\n0,0,0\n").unwrap();
        assert!(load_signal(&p).is_err());
    }
}
