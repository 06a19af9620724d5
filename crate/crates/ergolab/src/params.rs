//! The scalar parameter ladder derived from `(alpha, tau, delta, a0)`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub alpha: f64,
    pub tau: f64,
    pub delta: f64,
    pub a0: f64,
    pub alpha0: f64,
    pub big_r: u64,
    pub big_w: u64,
    pub t_small: f64,
    pub rho: f64,
    pub delta_grid: u64,
    pub b_tau: u64,
    pub d_div: u64,
    pub torus_q: u64,
    /// `1 / ln(1/delta) >= tau^4`, selecting the tau-driven branch.
    pub tau_regime: bool,
    /// Unclamped `log2` of the separation scale; `log2 W` is ten times this.
    pub big_r_log2: f64,
    pub cap: u64,
}

impl Params {
    /// Smallest power of two that resolves windows of length `h`.
    pub fn torus_q_for(d_div: u64, h: u64) -> u64 {
        (8 * d_div * h.max(1)).next_power_of_two()
    }

    /// Raise `torus_q` so that windows of length `h` are resolved.
    pub fn with_window(mut self, h: u64) -> Self {
        self.torus_q = self.torus_q.max(Self::torus_q_for(self.d_div, h));
        self
    }

    pub fn resolves(&self, h: u64) -> bool {
        self.torus_q >= 8 * self.d_div * h
    }

    pub fn big_w_log2(&self) -> f64 {
        10.0 * self.big_r_log2
    }
}

/// Smallest `D >= 1` with `1/20 <= |alpha/D| <= 1/10`, or 1 for small `alpha`.
pub fn divisor_for(alpha: f64) -> u64 {
    let a = alpha.abs();
    if a < 0.1 {
        return 1;
    }
    let mut d = (10.0 * a).ceil().max(1.0) as u64;
    // guard against rounding at the interval ends
    while a / (d as f64) > 0.1 {
        d += 1;
    }
    while d > 1 && a / ((d - 1) as f64) <= 0.1 {
        d -= 1;
    }
    d
}

fn smallest_odd_at_least(x: f64) -> u64 {
    let mut n = x.ceil().max(1.0) as u64;
    if n.is_multiple_of(2) {
        n += 1;
    }
    n
}

fn clamp_pow2(log2: f64, cap: u64) -> u64 {
    if log2 >= 63.0 {
        return cap;
    }
    (log2.exp2().round() as u64).clamp(1, cap)
}

pub fn derive_params(alpha: f64, tau: f64, delta: f64, a0: f64, cap: u64) -> Result<Params> {
    if !alpha.is_finite() {
        return Err(invalid("alpha must be finite"));
    }
    if !(tau > 0.0 && tau < 1.0) {
        return Err(invalid(format!("tau = {tau} outside (0,1)")));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(invalid(format!("delta = {delta} outside (0,1]")));
    }
    if !(a0 >= 10.0) {
        return Err(invalid(format!("a0 = {a0} must be at least 10")));
    }
    if cap < 16 {
        return Err(invalid(format!("cap = {cap} must be at least 16")));
    }
    let alpha0 = 1.0 / a0;
    let log_inv = (1.0 / delta).ln();
    let tau_regime = log_inv <= 0.0 || 1.0 / log_inv >= tau.powi(4);

    let (big_r_log2, t_small) =
        if tau_regime { (tau.powf(-a0), tau.powf(a0)) } else { (alpha0 * (1.0 / delta).log2(), log_inv.powi(-10)) };
    let big_r = clamp_pow2(big_r_log2, cap);
    let big_w = clamp_pow2(10.0 * big_r_log2, cap * cap).min(big_r.saturating_pow(10));
    let rho = (alpha0 * t_small).powi(2);
    let delta_grid = smallest_odd_at_least(t_small.powi(-10).min(cap as f64));
    let b_tau = ((a0 / tau).round() as u64).max(1);
    let d_div = divisor_for(alpha);

    Ok(Params {
        alpha,
        tau,
        delta,
        a0,
        alpha0,
        big_r,
        big_w,
        t_small,
        rho,
        delta_grid,
        b_tau,
        d_div,
        torus_q: Params::torus_q_for(d_div, cap),
        tau_regime,
        big_r_log2,
        cap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqrt2_example() {
        let p = derive_params(2f64.sqrt(), 0.25, 2f64.powi(-8), 10.0, 64).unwrap();
        let lhs = 1.0 / (2f64.powi(8)).ln();
        assert!(lhs >= 0.25f64.powi(4));
        assert!(p.tau_regime);
        assert_eq!(p.big_r, 64);
        assert_eq!(p.d_div, 15);
        assert_eq!(p.big_w, 64 * 64);
        assert_eq!(p.delta_grid % 2, 1);
        assert_eq!(p.b_tau, 40);
        assert_eq!(p.rho, (p.alpha0 * p.t_small).powi(2));
    }

    #[test]
    fn small_alpha_divisor() {
        let p = derive_params(0.05, 0.25, 0.5, 10.0, 64).unwrap();
        assert_eq!(p.d_div, 1);
    }

    #[test]
    fn log_regime() {
        // ln(1/delta) = 300 so 1/300 < tau^4 = 0.0625
        let p = derive_params(2f64.sqrt(), 0.5, (-300f64).exp(), 10.0, 1 << 12).unwrap();
        assert!(!p.tau_regime);
        assert!((p.t_small - 300f64.powi(-10)).abs() < 1e-30);
        assert!((p.big_r_log2 - 0.1 * 300.0 / 2f64.ln()).abs() < 1e-9);
        assert_eq!(p.big_r, (p.big_r_log2.exp2().round() as u64).min(1 << 12));
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(derive_params(1.0, 0.0, 0.5, 10.0, 64).is_err());
        assert!(derive_params(1.0, 1.5, 0.5, 10.0, 64).is_err());
        assert!(derive_params(1.0, 0.5, 0.0, 10.0, 64).is_err());
        assert!(derive_params(1.0, 0.5, 1.5, 10.0, 64).is_err());
        assert!(derive_params(1.0, 0.5, 0.5, 9.0, 64).is_err());
        assert!(derive_params(1.0, 0.5, 0.5, 10.0, 8).is_err());
    }

    #[test]
    fn window_resolution() {
        let p = derive_params(2f64.sqrt(), 0.25, 0.125, 10.0, 64).unwrap().with_window(512);
        assert!(p.resolves(512));
        assert!(p.torus_q.is_power_of_two());
    }

    #[test]
    fn json_field_names() {
        let p = derive_params(2f64.sqrt(), 0.25, 0.125, 10.0, 64).unwrap();
        let v = serde_json::to_value(&p).unwrap();
        for k in [
            "alpha",
            "tau",
            "delta",
            "a0",
            "alpha0",
            "big_r",
            "big_w",
            "t_small",
            "rho",
            "delta_grid",
            "b_tau",
            "d_div",
            "torus_q",
        ] {
            assert!(v.get(k).is_some(), "{k}");
        }
        let back: Params = serde_json::from_value(v).unwrap();
        assert_eq!(back, p);
    }
}
