//! One function per experiment, each returning raw cases and summary ratios.

use rand::Rng;
use rayon::prelude::*;

use super::stats::{loglog_slope, spearman};
use super::{Ctx, Experiment, Limit, Outcome, RawCase};
use crate::averages::{dyadic_block_signal, middle_interval, oscillation_counter, transference_check, OscMode};
use crate::entropy::{
    conv_jump_check, ent, ext_cover, int_cover, martingale_jump_check, sep_freq_jump_check, variation_product_check,
    NormTag, VectorFamily,
};
use crate::error::Result;
use crate::forest::branches::{branch_cutoffs, prune_branches};
use crate::forest::operators::{
    f2_f3_gap, freq_snap_check, key_inequality_check, single_scale_check, superlevel_containment, AMode, OperatorSetup,
};
use crate::forest::{build_forest, ForestConfig};
use crate::fourier::{
    extract_net, fejer_decompose, large_spectrum, poisson_bilinear, sample_bound_check, MultiplierSample, SmoothCutoff,
    TorusGrid,
};
use crate::grids::{bessel_check, greedy_antichain, tile_pool, BesselConfig, DyadicInterval};
use crate::params::Params;
use crate::rng::substream;
use crate::signals::{
    e, gen_block_characters, gen_character, gen_rademacher, gen_random_phase, gen_rotation_indicator, Signal,
};
use crate::Complex64;

pub(super) fn dispatch(ctx: &Ctx) -> Result<Outcome> {
    match ctx.cfg.experiment {
        Experiment::Osc => osc(ctx),
        Experiment::Transference => transference(ctx),
        Experiment::Spectrum => spectrum(ctx),
        Experiment::Sampling => sampling(ctx),
        Experiment::Fejer => fejer(ctx),
        Experiment::Poisson => poisson(ctx),
        Experiment::EntropyChain => entropy_chain(ctx),
        Experiment::Jumps => jumps(ctx),
        Experiment::Variation => variation(ctx),
        Experiment::Bessel => bessel(ctx),
        Experiment::Forest => forest(ctx),
        Experiment::Branches => branches(ctx),
        Experiment::SingleScale => single_scale(ctx),
        Experiment::KeyInequality => key_inequality(ctx),
        Experiment::FreqSnap => freq_snap(ctx),
    }
}

/// Seed for item `i` of a run seeded with `seed`.
fn child(seed: u64, i: u64) -> u64 {
    substream(seed, i).gen()
}

/// Runs `f` over `0..n` in parallel, keeping the order.
fn par_cases<F>(n: usize, f: F) -> Result<Vec<RawCase>>
where
    F: Fn(usize) -> Result<RawCase> + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Configured signals, or `n` default signals from `make`.
fn signals_or(ctx: &Ctx, n: usize, make: impl Fn(u64, usize) -> Result<Signal>) -> Result<Vec<(String, Signal)>> {
    if ctx.cfg.signals.is_empty() {
        let seed = ctx.seed()?;
        (0..n).map(|i| make(child(seed, i as u64), i).map(|s| (s.label().to_string(), s))).collect()
    } else {
        ctx.cfg
            .signals
            .iter()
            .enumerate()
            .map(|(i, spec)| {
                let fallback = ctx.cfg.seed.map(|s| child(s, i as u64));
                spec.build(fallback).map(|s| (s.label().to_string(), s))
            })
            .collect()
    }
}

fn fejer(ctx: &Ctx) -> Result<Outcome> {
    let d = ctx.params.d_div;
    let mut cases = vec![];
    for h in ctx.hs(&[512]) {
        let sigs = signals_or(ctx, ctx.cases(50), |s, _| gen_random_phase(s, h))?;
        for (label, f) in sigs {
            let c = RawCase::new(format!("fejer {label}")).input("h", f.len()).input("d_div", d);
            let dec = fejer_decompose(&f, d).map_err(|e| c.fail(e))?;
            let live = dec.pieces.iter().filter(|p| p.values.iter().any(|v| v.norm() > 0.0)).count();
            cases.push(c.measure("q", dec.q).measure("live_pieces", live).ratio(
                "fejer_residual",
                dec.residual,
                Limit::AtMost(1e-9),
            ));
        }
    }
    Ok(Outcome { cases, ..Outcome::default() })
}

fn transference(ctx: &Ctx) -> Result<Outcome> {
    let seed = ctx.seed()?;
    let alpha = ctx.params.alpha;
    let mut cases = vec![];
    for h in ctx.hs(&[4096]) {
        let f = gen_random_phase(child(seed, 0), h)?;
        let g = gen_random_phase(child(seed, 1), h)?;
        let (lo, hi) = middle_interval(h);
        let m_max = (h / 100).clamp(1, 40);
        cases.extend(par_cases(ctx.cases(1000), |i| {
            let mut rng = substream(seed, 100 + i as u64);
            let m = rng.gen_range(1..=m_max);
            let x0 = rng.gen_range(0..h as i64);
            let (k1, km) = (alpha.floor() as i64, (alpha * m as f64).floor() as i64);
            let r_lo = lo.max(k1.max(km));
            let r_hi = hi.min(h as i64 - 1 - m as i64).min(h as i64 - 1 + k1.min(km));
            let r = rng.gen_range(r_lo..=r_hi);
            let c = RawCase::new("transference").input("n", h).input("r", r).input("m", m).input("x0", x0);
            let t = transference_check(&f, &g, h, m, r, x0, alpha).map_err(|e| c.fail(e))?;
            Ok(c.ratio("transference_diff", t.diff, Limit::AtMost(1e-12)))
        })?);
    }
    Ok(Outcome { cases, ..Outcome::default() })
}

fn sampling(ctx: &Ctx) -> Result<Outcome> {
    let seed = ctx.seed()?;
    let mut cases = vec![];
    for n in ctx.hs(&[256]) {
        cases.extend(par_cases(ctx.cases(500), |i| {
            let mut rng = substream(seed, i as u64);
            let shift: f64 = rng.gen();
            let mut lambda: Vec<f64> =
                (0..n).filter(|_| rng.gen_bool(0.5)).map(|j| (shift + j as f64 / n as f64).fract()).collect();
            if lambda.is_empty() {
                lambda.push(shift);
            }
            // every fourth case uses the matched filter, which is the worst case for the bound
            let matched = i % 4 == 0;
            let coeffs: Vec<Complex64> = if matched {
                (0..n).map(|k| lambda.iter().map(|t| e(-(k as f64) * t)).sum()).collect()
            } else {
                (0..n).map(|_| e(rng.gen()) * rng.gen::<f64>()).collect()
            };
            let c = RawCase::new("sampling").input("n", n).input("frequencies", lambda.len()).input("matched", matched);
            let s = sample_bound_check(&coeffs, &lambda).map_err(|e| c.fail(e))?;
            let gap = crate::fourier::spectrum::min_gap(&lambda).min(1.0);
            let sieve = (n as f64 - 1.0 + 1.0 / gap) / n as f64;
            Ok(c.measure("lhs", s.lhs)
                .measure("rhs", s.rhs)
                .ratio("sampling_ratio", s.ratio, Limit::AtMost(2.0))
                .ratio("large_sieve_ratio", s.ratio, Limit::AtMost(sieve * (1.0 + 1e-9))))
        })?);
    }
    Ok(Outcome { cases, ..Outcome::default() })
}

fn structured(seed: u64, kind: usize, h: usize) -> Result<Signal> {
    let mut rng = substream(seed, 0);
    match kind % 4 {
        0 => gen_character(rng.gen(), h),
        1 => {
            let k = rng.gen_range(2..=8);
            let thetas: Vec<f64> = (0..k).map(|_| rng.gen()).collect();
            let v = (0..h).map(|n| thetas.iter().map(|t| e(t * n as f64)).sum::<Complex64>() / k as f64).collect();
            Signal::new(v, 0, format!("sum{k}({seed})"))
        }
        2 => {
            let a: f64 = rng.gen();
            gen_rotation_indicator(5f64.sqrt().fract() + rng.gen::<f64>() * 0.1, (a * 0.5, a * 0.5 + 0.3), h)
        }
        _ => gen_block_characters(seed, h, 0.7, 16),
    }
}

fn spectrum(ctx: &Ctx) -> Result<Outcome> {
    let deltas = ctx.deltas(&[0.25, 0.125, 0.0625]);
    let mut cases = vec![];
    for len in ctx.hs(&[1024]) {
        let sigs = signals_or(ctx, ctx.cases(100), |s, i| match i % 4 {
            0 => gen_rademacher(s, len),
            2 => gen_random_phase(s, len),
            _ => structured(s, i / 2, len),
        })?;
        let grid = TorusGrid::new(Params::torus_q_for(1, len as u64) as usize)?;
        cases.extend(
            sigs.par_iter()
                .flat_map_iter(|(label, g)| deltas.iter().map(move |&d| (label, g, d)))
                .map(|(label, g, delta)| {
                    let n = g.len();
                    let c = RawCase::new(format!("spectrum {label}")).input("len", n).input("delta", delta);
                    let spec = large_spectrum(g, (0, n), delta, grid).map_err(|e| c.fail(e))?;
                    let net = extract_net(&spec, 1.0 / n as f64).map_err(|e| c.fail(e))?;
                    Ok(c.measure("spectrum_points", spec.len()).measure("net_size", net.len()).ratio(
                        "net_size_times_delta_sq",
                        net.len() as f64 * delta * delta,
                        Limit::AtMost(4.0),
                    ))
                })
                .collect::<Result<Vec<_>>>()?,
        );
    }
    Ok(Outcome { cases, ..Outcome::default() })
}

fn poisson(ctx: &Ctx) -> Result<Outcome> {
    let seed = ctx.seed()?;
    let alpha = ctx.params.alpha;
    let w = SmoothCutoff::trapezoid(0.0, 0.5, 0.5, 1.0);
    let l = w.derivative_scale().ceil() as usize;
    let cases = par_cases(ctx.cases(8), |i| {
        let f = gen_random_phase(child(seed, 2 * i as u64), 80)?;
        let g = gen_random_phase(child(seed, 2 * i as u64 + 1), 80)?;
        let c = RawCase::new("poisson").input("n", 20).input("x", 40).input("l", l);
        let diffs: Vec<f64> = [1, 2, 4, 8]
            .iter()
            .map(|k| poisson_bilinear(&w, &f, &g, 20, alpha, k * l, 40).map(|r| r.diff))
            .collect::<Result<_>>()
            .map_err(|e| c.fail(e))?;
        // the error at one point is not monotone in the cutoff, so the halving
        // per doubling is checked as an envelope from the first cutoff
        let worst =
            diffs.iter().enumerate().map(|(k, d)| d - (diffs[0] / 2f64.powi(k as i32) + 1e-9)).fold(f64::MIN, f64::max);
        Ok(c.measure("diffs", &diffs).ratio("poisson_diff", diffs[3], Limit::AtMost(1e-6)).ratio(
            "tail_halving_excess",
            worst,
            Limit::AtMost(0.0),
        ))
    })?;
    Ok(Outcome { cases, ..Outcome::default() })
}

fn random_family(rng: &mut impl Rng, n: usize, d: usize, norm: NormTag, complex: bool) -> Result<VectorFamily> {
    let v = (0..n)
        .map(|_| {
            (0..d)
                .map(|_| {
                    let re = rng.gen_range(-1.0..1.0);
                    Complex64::new(re, if complex { rng.gen_range(-1.0..1.0) } else { 0.0 })
                })
                .collect()
        })
        .collect();
    VectorFamily::new(v, norm)
}

const NORMS: [NormTag; 3] = [NormTag::L1, NormTag::L2, NormTag::Sup];

fn entropy_chain(ctx: &Ctx) -> Result<Outcome> {
    let seed = ctx.seed()?;
    let cases = par_cases(ctx.cases(500), |i| {
        let mut rng = substream(seed, i as u64);
        let (n, d) = (rng.gen_range(1..=10), rng.gen_range(1..=3));
        let norm = NORMS[rng.gen_range(0..3)];
        let complex = rng.gen_bool(0.5);
        let eps = rng.gen_range(0.05..1.0);
        let c = RawCase::new("entropy_chain")
            .input("size", n)
            .input("dim", d)
            .input("norm", norm)
            .input("complex", complex)
            .input("eps", eps);
        let v = random_family(&mut rng, n, d, norm, complex).map_err(|e| c.fail(e))?;
        let counts = (|| -> Result<_> {
            Ok((
                int_cover(&v, 2.0 * eps)?,
                ext_cover(&v, eps)?,
                ent(&v, eps)?,
                int_cover(&v, eps / 2.0)?,
                int_cover(&v, eps)?,
            ))
        })()
        .map_err(|e| c.fail(e))?;
        let (int2, ext1, ent1, int_half, int1) = counts;
        let violations = [int2.value > ext1.value, ent1.value > int_half.value, int1.value > ent1.value]
            .iter()
            .filter(|b| **b)
            .count();
        Ok(c.measure("int_2eps", int2.value)
            .measure("ext_eps", ext1.value)
            .measure("ext_exact", ext1.exact)
            .measure("ent_eps", ent1.value)
            .measure("int_half_eps", int_half.value)
            .measure("int_eps", int1.value)
            .ratio("chain_violations", violations as f64, Limit::AtMost(0.0)))
    })?;
    Ok(Outcome { cases, ..Outcome::default() })
}

fn jumps(ctx: &Ctx) -> Result<Outcome> {
    let seed = ctx.seed()?;
    let eps: Vec<f64> = (0..8).map(|j| 2f64.powi(-j)).collect();
    let dims = ctx.tuning().dims.clone().unwrap_or_else(|| vec![1, 4]);
    let phi = SmoothCutoff::gaussian(1.0);
    let a0 = phi.bump_class_constant(20_000) * (1.0 + 1e-9);
    let mut cases = vec![];
    for h in ctx.hs(&[4096]) {
        for &d in &dims {
            cases.extend(par_cases(ctx.cases(100), |i| {
                let s = child(seed, (d * 1_000_000 + i) as u64);
                let c = RawCase::new("jumps").input("h", h).input("dim", d).input("seed", s);
                let run = || -> Result<RawCase> {
                    let fvec: Vec<Signal> =
                        (0..d).map(|k| gen_random_phase(child(s, k as u64), h)).collect::<Result<_>>()?;
                    let mart = martingale_jump_check(&fvec, &eps)?;
                    let conv = conv_jump_check(&fvec, &phi, a0, &eps)?;
                    let mut rng = substream(s, 99);
                    let shift: f64 = rng.gen();
                    let lambda: Vec<f64> =
                        (0..16).map(|j| (shift + (j as f64 + rng.gen::<f64>() * 0.5) / 16.0).fract()).collect();
                    let sep = sep_freq_jump_check(&fvec[0], &lambda, 1.0 / 64.0, 8.0, &eps)?;
                    Ok(c.clone()
                        .measure("bump_class_a0", a0)
                        .ratio("C_martjump", mart.max_ratio, Limit::Calibrated("C_martjump".into()))
                        .ratio("C_conv", conv.max_ratio, Limit::Calibrated("C_conv".into()))
                        .ratio("C_sep", sep.max_ratio, Limit::Calibrated("C_sep".into())))
                };
                run().map_err(|e| c.fail(e))
            })?);
        }
    }
    Ok(Outcome { cases, ..Outcome::default() })
}

fn variation(ctx: &Ctx) -> Result<Outcome> {
    let seed = ctx.seed()?;
    let cases = par_cases(ctx.cases(500), |i| {
        let mut rng = substream(seed, i as u64);
        let (n, d) = (rng.gen_range(1..=16), rng.gen_range(1..=3));
        let complex = rng.gen_bool(0.5);
        let r = rng.gen_range(2.05..6.0);
        let c = RawCase::new("variation").input("len", n).input("dim", d).input("complex", complex).input("r", r);
        let a = random_family(&mut rng, n, d, NormTag::L2, complex).map_err(|e| c.fail(e))?;
        let b = random_family(&mut rng, n, d, NormTag::L2, complex).map_err(|e| c.fail(e))?;
        let p = variation_product_check(&a, &b, r).map_err(|e| c.fail(e))?;
        Ok(c.measure("lhs", p.lhs).measure("rhs", p.rhs).ratio("variation_product", p.ratio, Limit::AtMost(2.0)))
    })?;
    Ok(Outcome { cases, ..Outcome::default() })
}

fn bessel(ctx: &Ctx) -> Result<Outcome> {
    let h = ctx.hs(&[1 << 14])[0];
    if !h.is_power_of_two() {
        return Err(crate::Error::Config(format!("bessel needs a power-of-two window, got {h}")));
    }
    let top = h.ilog2();
    let (label, g) = signals_or(ctx, 1, |s, _| gen_rademacher(s, h))?.remove(0);
    let antichain_seed = ctx.cfg.seed.map_or(7, |s| child(s, 1));
    let eps = ctx.tuning().eps.unwrap_or(0.1);
    let phi = SmoothCutoff::indicator(0.0, 1.0);
    let pool = tile_pool(&g, top, 4, &phi);
    let deltas = ctx.deltas(&[0.25, 0.125, 0.0625, 0.03125, 0.015625]);
    let mut cases = vec![];
    let mut sums = vec![];
    for &delta in &deltas {
        let c = RawCase::new(format!("bessel {label}")).input("delta", delta).input("eps", eps).input("i0_len", h);
        let band: Vec<_> = pool
            .iter()
            .filter(|(s, v)| {
                let level = delta * s.time.len().sqrt();
                (level / 2.0..=2.0 * level).contains(v)
            })
            .map(|(s, _)| *s)
            .collect();
        let tiles = greedy_antichain(&band, antichain_seed);
        let cfg = BesselConfig { i0: Some((0.0, h as f64)), ..BesselConfig::new(delta, eps) };
        let r = bessel_check(&tiles, &g, &phi, &cfg).map_err(|e| c.fail(e))?;
        sums.push(r.packing_sum.max(f64::MIN_POSITIVE));
        cases.push(
            c.measure("tiles", r.tiles)
                .measure("admitted", r.admitted)
                .measure("packing_sum", r.packing_sum)
                .measure("bessel_l2_ratio", r.l2_ratio)
                .ratio("C_pack", r.packing_ratio, Limit::Calibrated("C_pack".into())),
        );
    }
    let mut summary = vec![];
    if deltas.len() >= 2 {
        let inv: Vec<f64> = deltas.iter().map(|d| 1.0 / d).collect();
        summary.push(("packing_slope".into(), loglog_slope(&inv, &sums), Limit::AtMost(2.0 + eps)));
    }
    Ok(Outcome { cases, summary, ..Outcome::default() })
}

#[derive(Debug, Clone, Copy)]
enum Ensemble {
    TwoCharacter,
    RandomPhase,
    BlockCharacters,
}

impl Ensemble {
    const ALL: [Ensemble; 3] = [Self::TwoCharacter, Self::RandomPhase, Self::BlockCharacters];

    fn name(self) -> &'static str {
        match self {
            Self::TwoCharacter => "two_character",
            Self::RandomPhase => "random_phase",
            Self::BlockCharacters => "block_characters",
        }
    }

    fn draw(self, seed: u64, h: usize, split: f64) -> Result<Signal> {
        match self {
            Self::TwoCharacter => {
                let mut rng = substream(seed, 0);
                let (a, b): (f64, f64) = (rng.gen(), rng.gen());
                let v = (0..h).map(|n| (e(a * n as f64) + e(b * n as f64)) / 2.0).collect();
                Signal::new(v, 0, format!("two_character({seed})"))
            }
            Self::RandomPhase => gen_random_phase(seed, h),
            Self::BlockCharacters => gen_block_characters(seed, h, split, 4),
        }
    }
}

/// Desk forest settings shared by the forest and branch experiments.
fn forest_config(ctx: &Ctx, delta: f64, top: u32, v_max: usize) -> ForestConfig {
    let t = ctx.tuning();
    let step = t.scale_step.unwrap_or(1);
    let seq: Vec<u32> = (2..=top).step_by(step as usize).collect();
    ForestConfig {
        min_ratio_log2: step,
        selector_seed: t.selector_seed,
        ..ForestConfig::new(delta, t.rho.unwrap_or(0.25), t.t_small.unwrap_or(0.5), v_max, seq)
    }
}

fn log2_window(h: usize) -> Result<u32> {
    if h.is_power_of_two() && h >= 16 {
        Ok(h.ilog2())
    } else {
        Err(crate::Error::Config(format!("window {h} must be a power of two, at least 16")))
    }
}

fn forest(ctx: &Ctx) -> Result<Outcome> {
    let seed = ctx.seed()?;
    let h = ctx.hs(&[1 << 14])[0];
    let top = log2_window(h)?;
    let vs = ctx.tuning().v.clone().unwrap_or_else(|| vec![4, 8, 16]);
    let v_max = vs.iter().copied().max().unwrap_or(1);
    let split = ctx.tuning().split.unwrap_or(0.75);
    let n = ctx.cases(8);
    let i0 = DyadicInterval::plain(top, 0);
    let mut cases = vec![];
    let mut summary = vec![];
    for delta in ctx.deltas(&[0.25]) {
        let cfg = forest_config(ctx, delta, top, v_max);
        let jobs: Vec<(Ensemble, usize)> = Ensemble::ALL.iter().flat_map(|&en| (0..n).map(move |i| (en, i))).collect();
        let built: Vec<(RawCase, Vec<f64>)> = jobs
            .par_iter()
            .enumerate()
            .map(|(k, &(en, i))| {
                let s = child(seed, k as u64);
                let c = RawCase::new(format!("forest {}", en.name()))
                    .input("delta", delta)
                    .input("ensemble", en.name())
                    .input("sample", i)
                    .input("seed", s);
                let g = en.draw(s, h, split).map_err(|e| c.fail(e))?;
                let f = build_forest(&i0, &g, &cfg).map_err(|e| c.fail(e))?;
                let fractions: Vec<f64> = vs.iter().map(|&v| f.exceptional_measure(v) / h as f64).collect();
                let mut c = c
                    .measure("levels", f.trees.len())
                    .measure("tops", f.trees.iter().map(|t| t.tops.len()).sum::<usize>())
                    .measure("level_fractions", f.level_measures.iter().map(|m| m / h as f64).collect::<Vec<_>>());
                for &v in &vs {
                    c = c.ratio(
                        &format!("C_except V={v}"),
                        f.exceptional_ratio(v),
                        Limit::Calibrated("C_except".into()),
                    );
                }
                Ok((c, fractions))
            })
            .collect::<Result<_>>()?;
        let pooled: Vec<f64> = (0..vs.len()).map(|j| mean(&built.iter().map(|b| b.1[j]).collect::<Vec<_>>())).collect();
        let vf: Vec<f64> = vs.iter().map(|&v| v as f64).collect();
        let rho = spearman(&vf, &pooled);
        cases.extend(built.into_iter().map(|b| b.0));
        cases.push(
            RawCase::new("forest pooled")
                .input("delta", delta)
                .input("v", &vs)
                .measure("mean_exceptional_fraction", &pooled),
        );
        summary.push((format!("exceptional_spearman delta={delta}"), rho, Limit::AtMost(-0.8)));
    }
    let mut o = Outcome { cases, summary, ..Outcome::default() };
    o.seeds.insert("forest_samples".into(), seed);
    Ok(o)
}

fn branches(ctx: &Ctx) -> Result<Outcome> {
    let seed = ctx.seed()?;
    let h = ctx.hs(&[512])[0];
    let top = log2_window(h)?;
    let u = ctx.tuning().u.unwrap_or(8);
    let t = ctx.tuning().threshold.unwrap_or(0.01);
    let grid = TorusGrid::new(16 * h)?;
    let i0 = DyadicInterval::plain(top, 0);
    let mut cases = vec![];
    for delta in ctx.deltas(&[0.25]) {
        let setup = OperatorSetup { delta, ..OperatorSetup::from_params(&ctx.params) };
        for r in ctx.rs(&[4]) {
            for i in 0..ctx.cases(2) {
                let s = child(seed, i as u64);
                let base = RawCase::new("branches").input("delta", delta).input("r", r).input("u", u).input("seed", s);
                // few, well separated frequencies leave room for nonempty scale bands
                let en = if i % 2 == 0 { Ensemble::TwoCharacter } else { Ensemble::BlockCharacters };
                let base = base.input("ensemble", en.name());
                let g = en.draw(s, h, ctx.tuning().split.unwrap_or(0.3)).map_err(|e| base.fail(e))?;
                let f = gen_random_phase(child(s, 1), h).map_err(|e| base.fail(e))?;
                let forest = build_forest(&i0, &g, &forest_config(ctx, delta, top, 2)).map_err(|e| base.fail(e))?;
                let tops: Vec<(usize, usize)> = forest
                    .trees
                    .iter()
                    .enumerate()
                    .flat_map(|(l, tr)| (0..tr.tops.len()).map(move |k| (l, k)))
                    .take(4)
                    .collect();
                for (level, k) in tops {
                    let c = base.clone().input("level", level).input("top", k);
                    let p = prune_branches(&forest, level, k, &g, u, r).map_err(|e| c.fail(e))?;
                    let unseparated = p.branches.iter().filter(|b| !b.separated()).count();
                    let mut c = c
                        .measure("branches", p.branches.len())
                        .measure("m_seq", &p.m_seq)
                        .measure("localized", p.branches.iter().filter(|b| b.localized()).count())
                        .ratio("branch_count", p.branches.len() as f64, Limit::AtMost(u as f64))
                        .ratio("unseparated_branches", unseparated as f64, Limit::AtMost(0.0))
                        .ratio("boundary_violation", p.boundary_violation as u8 as f64, Limit::AtMost(0.0));
                    let Some(b) =
                        p.branches.iter().filter(|b| !b.intervals.is_empty()).max_by_key(|b| b.intervals.len())
                    else {
                        cases.push(c);
                        continue;
                    };
                    let cut = branch_cutoffs(b, grid, setup.alpha);
                    c = c.measure("cutoffs", cut.as_ref().map(|v| v.len()).map_err(|e| e.to_string()));
                    let gap = f2_f3_gap(b, &f, &g, &setup, grid).map_err(|e| c.fail(e))?;
                    let cont = superlevel_containment(b, &f, &g, &setup, t, grid).map_err(|e| c.fail(e))?;
                    cases.push(
                        c.measure("branch_intervals", b.intervals.len())
                            .measure("gap_sum", gap.sum)
                            .measure("f1_hits", cont.f1_hits)
                            .measure("f2_hits", cont.f2_hits)
                            .ratio("C_gap", gap.constant, Limit::Calibrated("C_gap".into()))
                            .ratio("containment_violations", cont.violations as f64, Limit::AtMost(0.0)),
                    );
                }
            }
        }
    }
    Ok(Outcome { cases, ..Outcome::default() })
}

fn single_scale(ctx: &Ctx) -> Result<Outcome> {
    let seed = ctx.seed()?;
    let h = ctx.hs(&[1024])[0];
    let t = ctx.tuning().threshold.unwrap_or(0.5);
    let u = ctx.tuning().u.unwrap_or(1) as f64;
    let grid = TorusGrid::new(Params::torus_q_for(1, h as u64) as usize)?;
    let eta = MultiplierSample::constant(grid, Complex64::new(1.0, 0.0));
    let i = DyadicInterval::plain(6, (h as i64 / 64) / 2);
    let deltas = ctx.deltas(&[0.015625, 0.00390625, 0.0009765625]);
    let jobs: Vec<(f64, usize)> = deltas.iter().flat_map(|&d| (0..ctx.cases(8)).map(move |k| (d, k))).collect();
    let cases = jobs
        .par_iter()
        .map(|&(delta, k)| {
            let s = child(seed, k as u64);
            let c = RawCase::new("single_scale").input("delta", delta).input("t", t).input("u", u).input("seed", s);
            let run = || -> Result<RawCase> {
                let f = gen_random_phase(child(s, 0), h)?;
                let g = gen_random_phase(child(s, 1), h)?;
                let setup = OperatorSetup { delta, ..OperatorSetup::from_params(&ctx.params) };
                let r = single_scale_check(16, &f, &g, &setup, &eta, &i, t, u, AMode::Diagonal, grid)?;
                Ok(c.clone()
                    .measure("points", r.points)
                    .measure("fraction", r.fraction)
                    .measure("bound1", r.bound1)
                    .measure("bound2", r.bound2)
                    .measure("vacuous1", r.vacuous1)
                    .measure("vacuous2", r.vacuous2)
                    .ratio("C_single", r.fraction / r.bound1, Limit::Calibrated("C_single".into())))
            };
            run().map_err(|e| c.fail(e))
        })
        .collect::<Result<_>>()?;
    Ok(Outcome { cases, ..Outcome::default() })
}

/// `g` at level `delta` on four separated frequencies plus a quarter of that in noise.
fn level_signal(seed: u64, h: usize, lambda: &[f64], delta: f64) -> Result<Signal> {
    let noise = gen_random_phase(child(seed, 7), h)?;
    let mut rng = substream(seed, 8);
    let phases: Vec<f64> = lambda.iter().map(|_| rng.gen()).collect();
    let v = (0..h)
        .map(|n| {
            let s: Complex64 = lambda.iter().zip(&phases).map(|(t, p)| e(t * n as f64 + p)).sum();
            delta * (s + noise.values()[n] / 4.0)
        })
        .collect();
    Signal::new(v, 0, format!("level({seed};{delta})"))
}

fn key_inequality(ctx: &Ctx) -> Result<Outcome> {
    let seed = ctx.seed()?;
    let h = ctx.hs(&[4096])[0];
    let top = log2_window(h)?;
    let p = DyadicInterval::plain(6, (h as i64 / 64) * 5 / 16);
    let deltas = ctx.deltas(&[0.125, 0.0625, 0.03125, 0.015625, 0.0078125]);
    let n = ctx.cases(8);
    let jobs: Vec<(f64, usize)> = deltas.iter().flat_map(|&d| (0..n).map(move |k| (d, k))).collect();
    let done: Vec<(RawCase, f64)> = jobs
        .par_iter()
        .map(|&(delta, k)| {
            let s = child(seed, k as u64);
            let eps = delta.cbrt();
            let c = RawCase::new("key_inequality").input("delta", delta).input("eps", eps).input("seed", s);
            let run = || -> Result<(RawCase, f64)> {
                let mut rng = substream(s, 3);
                let shift: f64 = rng.gen();
                let lambda: Vec<f64> =
                    (0..4).map(|j| (shift + (j as f64 + rng.gen::<f64>() * 0.5) / 4.0).fract()).collect();
                let f = gen_random_phase(child(s, 0), h)?;
                let g = level_signal(child(s, 1), h, &lambda, delta)?;
                let r = key_inequality_check(&p, top, &lambda, &f, &g, delta, eps)?;
                let per = r.lhs / r.p_len as f64;
                let c = c
                    .clone()
                    .measure("lhs_per_point", per)
                    .measure("n1", r.n1)
                    .measure("n2", r.n2)
                    .measure("d_eps", r.d_eps)
                    .measure("factor_bound", r.factor_bound)
                    .ratio("C_key", r.ratio, Limit::Calibrated("C_key".into()))
                    .ratio("factorization_failures", (!r.factorization_ok) as u8 as f64, Limit::AtMost(0.0));
                Ok((c, per))
            };
            run().map_err(|e| c.fail(e))
        })
        .collect::<Result<_>>()?;
    let means: Vec<f64> = deltas
        .iter()
        .enumerate()
        .map(|(j, _)| mean(&done[j * n..(j + 1) * n].iter().map(|d| d.1).collect::<Vec<_>>()))
        .collect();
    let mut summary = vec![];
    let mut cases: Vec<RawCase> = done.into_iter().map(|d| d.0).collect();
    cases.push(RawCase::new("key_inequality means").input("delta", &deltas).measure("mean_lhs_per_point", &means));
    if deltas.len() >= 2 {
        summary.push(("key_exponent".into(), loglog_slope(&deltas, &means), Limit::AtLeast(0.6)));
    }
    Ok(Outcome { cases, summary, ..Outcome::default() })
}

fn freq_snap(ctx: &Ctx) -> Result<Outcome> {
    let seed = ctx.seed()?;
    let j = DyadicInterval::plain(6, 1);
    let rs = ctx.rs(&[8, 16, 32]);
    let n = ctx.cases(16);
    let jobs: Vec<(u64, usize)> = rs.iter().flat_map(|&r| (0..n).map(move |k| (r, k))).collect();
    let done: Vec<(RawCase, f64)> = jobs
        .par_iter()
        .map(|&(r, k)| {
            let s = child(seed, k as u64);
            let c = RawCase::new("freq_snap").input("r", r).input("j_len", 64).input("seed", s);
            let run = || -> Result<(RawCase, f64)> {
                let g = gen_random_phase(s, 256)?;
                let shift: f64 = substream(s, 1).gen();
                let lambda: Vec<f64> = (0..4).map(|i| (shift + i as f64 / 4.0).fract()).collect();
                let snap = freq_snap_check(&j, &g, &lambda, r as f64, None)?;
                Ok((
                    c.clone().measure("lhs", snap.lhs).measure("rhs", snap.rhs).ratio(
                        "C_snap",
                        snap.ratio,
                        Limit::Calibrated("C_snap".into()),
                    ),
                    snap.lhs,
                ))
            };
            run().map_err(|e| c.fail(e))
        })
        .collect::<Result<_>>()?;
    let means: Vec<f64> =
        (0..rs.len()).map(|i| mean(&done[i * n..(i + 1) * n].iter().map(|d| d.1).collect::<Vec<_>>())).collect();
    let mut cases: Vec<RawCase> = done.into_iter().map(|d| d.0).collect();
    cases.push(RawCase::new("freq_snap means").input("r", &rs).measure("mean_lhs", &means));
    let mut summary = vec![];
    if rs.len() >= 2 {
        let rf: Vec<f64> = rs.iter().map(|&r| r as f64).collect();
        summary.push(("snap_slope".into(), loglog_slope(&rf, &means), Limit::AtMost(-2.5)));
    }
    Ok(Outcome { cases, summary, ..Outcome::default() })
}

fn osc(ctx: &Ctx) -> Result<Outcome> {
    let alpha = ctx.params.alpha;
    let b = ctx.tuning().b.unwrap_or(2);
    let theta = (5f64.sqrt() - 1.0) / 2.0;
    let mut cases = vec![];
    for tau in ctx.taus(&[ctx.params.tau]) {
        let b_tau = ((ctx.params.a0 / tau).round() as u64).max(1);
        for h in ctx.hs(&[1 << 12, 1 << 14, 1 << 16]) {
            let c = RawCase::new("osc character").input("h", h).input("tau", tau).input("b", b).input("theta", theta);
            let ch = gen_character(theta, h).map_err(|e| c.fail(e))?;
            let r = oscillation_counter(&ch, &ch, tau, b, h, alpha, OscMode::Diagonal, b_tau).map_err(|e| c.fail(e))?;
            cases.push(c.measure("segments", &r.segment_times).ratio(
                "character_k",
                r.k_count as f64,
                Limit::AtMost(3.0),
            ));
            let c = RawCase::new("osc blocks").input("h", h).input("tau", tau).input("b", b);
            let (f, g) = (Signal::ones(h), dyadic_block_signal(h));
            let r = oscillation_counter(&f, &g, tau, b, h, alpha, OscMode::Fixed(0), b_tau).map_err(|e| c.fail(e))?;
            cases.push(c.measure("segments", &r.segment_times).ratio(
                "blocks_k",
                r.k_count as f64,
                Limit::AtLeast((h as f64).log2() / 4.0),
            ));
        }
    }
    Ok(Outcome { cases, ..Outcome::default() })
}
