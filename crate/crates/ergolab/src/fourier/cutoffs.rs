//! Smooth cutoffs built from the quintic smoothstep `6x^5 - 15x^4 + 10x^3`.
//!
//! The smoothstep is C^2 with vanishing first and second derivatives at both
//! ends, and `s(x) + s(1 - x) = 1`, which gives exact partitions of unity.

use serde::{Deserialize, Serialize};

pub fn smoothstep(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        x * x * x * (x * (6.0 * x - 15.0) + 10.0)
    }
}

/// `j`-th derivative of the smoothstep on the open unit interval, zero outside.
pub fn smoothstep_deriv(x: f64, j: usize) -> f64 {
    if j == 0 {
        return smoothstep(x);
    }
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    match j {
        1 => 30.0 * x * x * (x - 1.0) * (x - 1.0),
        2 => 60.0 * x * (2.0 * x * x - 3.0 * x + 1.0),
        3 => 60.0 * (6.0 * x * x - 6.0 * x + 1.0),
        4 => 720.0 * x - 360.0,
        5 => 720.0,
        _ => 0.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Shape {
    /// `1_[lo, hi)`.
    Indicator { lo: f64, hi: f64 },
    /// Rises on `[a, b]`, equals one on `[b, c]`, falls on `[c, d]`.
    Trapezoid { a: f64, b: f64, c: f64, d: f64 },
    /// Unit-mass Gaussian of width `sigma`.
    Gaussian { sigma: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothCutoff {
    pub name: String,
    pub shape: Shape,
    #[serde(default = "one")]
    pub scale: f64,
}

fn one() -> f64 {
    1.0
}

impl SmoothCutoff {
    pub fn new(name: impl Into<String>, shape: Shape) -> Self {
        Self { name: name.into(), shape, scale: 1.0 }
    }

    pub fn indicator(lo: f64, hi: f64) -> Self {
        Self::new("indicator", Shape::Indicator { lo, hi })
    }

    pub fn trapezoid(a: f64, b: f64, c: f64, d: f64) -> Self {
        assert!(a <= b && b <= c && c <= d, "trapezoid corners out of order");
        Self::new("trapezoid", Shape::Trapezoid { a, b, c, d })
    }

    pub fn gaussian(sigma: f64) -> Self {
        Self::new("gaussian", Shape::Gaussian { sigma })
    }

    pub fn scaled(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Time cutoff with `1_[eta, 1-eta] <= phi <= 1_[0,1]`, `eta = tau^a0`.
    pub fn phi_tau(tau: f64, a0: f64) -> Self {
        let eta = tau.powf(a0).min(0.25);
        Self::trapezoid(0.0, eta, 1.0 - eta, 1.0).named("phi_tau")
    }

    /// Level-set bump inside `Psi_delta`: `1_[1/2,1] <= psi <= 1_[1/4,2]`.
    pub fn level_band() -> Self {
        Self::trapezoid(0.25, 0.5, 1.0, 2.0).named("level_band")
    }

    /// Bump with `1_[-1/4,1/4] <= psi <= 1_[-1,1]` and `sum_l psi(x - l) = 1`.
    pub fn unit_partition() -> Self {
        Self::trapezoid(-0.75, -0.25, 0.25, 0.75).named("unit_partition")
    }

    /// Frequency damping `1_[0,1/D] <= psi_D <= 1_[-2/D,2/D]`.
    pub fn psi_d(d: u64) -> Self {
        let w = 1.0 / d as f64;
        Self::trapezoid(-w, 0.0, w, 2.0 * w).named("psi_d")
    }

    /// Closed support `[lo, hi]` (Gaussian: eight widths).
    pub fn support(&self) -> (f64, f64) {
        match self.shape {
            Shape::Indicator { lo, hi } => (lo, hi),
            Shape::Trapezoid { a, d, .. } => (a, d),
            Shape::Gaussian { sigma } => (-8.0 * sigma, 8.0 * sigma),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.deriv(t, 0)
    }

    /// `j`-th derivative (one-sided at ramp ends; the indicator has none).
    pub fn deriv(&self, t: f64, j: usize) -> f64 {
        let base = match self.shape {
            Shape::Indicator { lo, hi } => {
                if j == 0 && lo <= t && t < hi {
                    1.0
                } else {
                    0.0
                }
            }
            Shape::Trapezoid { a, b, c, d } => {
                if t <= a || t >= d {
                    0.0
                } else if t < b {
                    let w = b - a;
                    smoothstep_deriv((t - a) / w, j) / w.powi(j as i32)
                } else if t <= c {
                    if j == 0 {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    let w = d - c;
                    let sign = if j.is_multiple_of(2) { 1.0 } else { -1.0 };
                    sign * smoothstep_deriv((d - t) / w, j) / w.powi(j as i32)
                }
            }
            Shape::Gaussian { sigma } => {
                let x = t / sigma;
                let g = (-0.5 * x * x).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt());
                let sign = if j.is_multiple_of(2) { 1.0 } else { -1.0 };
                sign * hermite(x, j) * g / sigma.powi(j as i32)
            }
        };
        self.scale * base
    }

    /// `max |d^j phi|` for `j = 0..=10`, sampled on `n` points across the support.
    pub fn derivative_bounds(&self, n: usize) -> [f64; 11] {
        let (lo, hi) = self.support();
        let mut out = [0.0f64; 11];
        for i in 0..=n {
            let t = lo + (hi - lo) * i as f64 / n as f64;
            for (j, o) in out.iter_mut().enumerate() {
                *o = (*o).max(self.deriv(t, j).abs());
            }
        }
        out
    }

    /// `sup_t (1+|t|)^10 sum_{j<=10} |d^j phi(t)|` on a sampled support.
    pub fn bump_class_constant(&self, n: usize) -> f64 {
        let (lo, hi) = self.support();
        (0..=n)
            .map(|i| {
                let t = lo + (hi - lo) * i as f64 / n as f64;
                let s: f64 = (0..=10).map(|j| self.deriv(t, j).abs()).sum();
                (1.0 + t.abs()).powi(10) * s
            })
            .fold(0.0, f64::max)
    }

    /// `max_{1<=j<=3} ||d^j phi||_inf^{1/j}`, the frequency scale beyond which the transform decays.
    pub fn derivative_scale(&self) -> f64 {
        let b = self.derivative_bounds(20_000);
        (1..=3).map(|j| b[j].powf(1.0 / j as f64)).fold(0.0, f64::max)
    }

    /// Riemann mass `(1/m) sum_k phi(k/m)` over integers `k` in the support.
    pub fn discrete_mass(&self, m: usize) -> f64 {
        let mf = m as f64;
        let (lo, hi) = self.support();
        let (k0, k1) = ((lo * mf).floor() as i64, (hi * mf).ceil() as i64);
        (k0..=k1).map(|k| self.eval(k as f64 / mf)).sum::<f64>() / mf
    }
}

/// Probabilists' Hermite polynomial `He_n`.
fn hermite(x: f64, n: usize) -> f64 {
    let (mut a, mut b) = (1.0, x);
    if n == 0 {
        return a;
    }
    for k in 1..n {
        let c = x * b - k as f64 * a;
        a = b;
        b = c;
    }
    b
}
