//! Time-dependent imbalanced Fourier weights.
//!
//! Raw weights `w` are products of thousands of factors below one, so every
//! evaluation is carried in log space. Above the threshold frequency
//! `δ^{-10}` the non-resonant weight is built backward in time from
//! `w(2η) = 1` through the critical intervals `I_l = [t_l, t_{l-1}]`, and is
//! interpolated linearly in the exponent below the last critical time.
//!
//! The anchor values `ln w(t_l)` are partial sums of logarithms of
//! quadratics in `l`; besides the direct recursion ([`Schedule`]) they have a
//! closed form through `ln|Γ|` at complex arguments, which the mollified
//! weights use so that a quadrature node costs O(1) at any frequency.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, OnceLock, RwLock};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gevrey::{bracket, bracket2, plateau_cutoff};
use crate::quadrature::{integrate, QuadOptions};

pub mod selftest;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightParams {
    pub delta0: f64,
    pub delta: f64,
    pub delta_prime: f64,
    pub sigma0: f64,
}

impl Default for WeightParams {
    fn default() -> Self {
        Self { delta0: 0.1, delta: 0.1, delta_prime: 0.01, sigma0: 0.01 }
    }
}

impl WeightParams {
    /// Parameters with the default mollification scale `δ' = δ/10`.
    pub fn new(delta0: f64, delta: f64) -> Result<Self> {
        let p = Self { delta0, delta, delta_prime: delta / 10.0, sigma0: 0.01 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.delta0 > 0.0
            && self.delta0 <= 0.125
            && self.delta > 0.0
            && self.delta < 1.0
            && self.delta_prime > 0.0
            && self.delta_prime <= self.delta
            && self.sigma0 > 0.0
            && self.sigma0 <= 0.1;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!("weight parameters out of range: {self:?}")))
        }
    }

    /// Frequencies at or below this carry trivial weights.
    pub fn threshold(&self) -> f64 {
        self.delta.powi(-10)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Star {
    NonResonant,
    Resonant,
    Mode(i64),
}

impl std::fmt::Display for Star {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Star::NonResonant => write!(f, "NR"),
            Star::Resonant => write!(f, "R"),
            Star::Mode(k) => write!(f, "k={k}"),
        }
    }
}

// ---------------------------------------------------------------- lambda

fn lambda_integrand(s: f64, sigma0: f64) -> f64 {
    bracket(s).powf(-1.0 - sigma0)
}

fn decades(t: f64) -> Vec<f64> {
    let mut b = Vec::new();
    let mut x = 1.0;
    while x < t {
        b.push(x);
        x *= 10.0;
    }
    b
}

/// `∫_0^t ⟨s⟩^{-1-σ0} ds`.
pub fn lambda_integral(t: f64, sigma0: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let opts = QuadOptions { rel_tol: 1e-13, ..Default::default() };
    integrate(|s| lambda_integrand(s, sigma0), 0.0, t, &decades(t), opts)
        .expect("smooth positive integrand")
        .value
}

/// `λ(t) = (3/2)δ0 − δ0σ0² ∫_0^t ⟨s⟩^{-1-σ0} ds`.
pub fn lambda_of(t: f64, p: &WeightParams) -> f64 {
    1.5 * p.delta0 - p.delta0 * p.sigma0 * p.sigma0 * lambda_integral(t, p.sigma0)
}

pub fn lambda_rate(t: f64, p: &WeightParams) -> f64 {
    -p.delta0 * p.sigma0 * p.sigma0 * lambda_integrand(t, p.sigma0)
}

/// `lim_{t→∞} λ(t)`; the tail beyond `T = 1e6` uses the expansion
/// `s^{-1-σ}(1 − (1+σ)/(2s²))`.
pub fn lambda_infinity(p: &WeightParams) -> f64 {
    let big: f64 = 1e6;
    let s = p.sigma0;
    let tail = big.powf(-s) / s - (1.0 + s) / (2.0 * (2.0 + s)) * big.powf(-2.0 - s);
    1.5 * p.delta0 - p.delta0 * s * s * (lambda_integral(big, s) + tail)
}

// ---------------------------------------------------------------- critical times

/// `⌊√(δ³η)⌋` for η above threshold.
pub fn k0_of(eta: f64, p: &WeightParams) -> usize {
    (p.delta.powi(3) * eta.abs()).sqrt().floor() as usize
}

/// `t_{l,η}`; `t_{0,η} = 2η`.
#[inline]
pub fn t_crit(l: usize, eta: f64) -> f64 {
    if l == 0 {
        2.0 * eta
    } else {
        0.5 * (eta / (l as f64 + 1.0) + eta / l as f64)
    }
}

/// Index `l ∈ [1, k0]` with `t ∈ [t_l, t_{l-1}]`, for `t_{k0} ≤ t < 2η`.
fn interval_of(t: f64, eta: f64, k0: usize) -> usize {
    let guess = (eta / t - 0.5).ceil().max(1.0) as usize;
    let mut l = guess.clamp(1, k0);
    while l < k0 && t_crit(l, eta) > t {
        l += 1;
    }
    while l > 1 && t_crit(l - 1, eta) < t {
        l -= 1;
    }
    l
}

#[derive(Clone, Debug)]
pub struct CriticalStructure {
    pub eta: f64,
    pub k0: usize,
    pub times: Vec<f64>,
}

impl CriticalStructure {
    pub fn new(eta: f64, p: &WeightParams) -> Self {
        let eta = eta.abs();
        let k0 = k0_of(eta, p);
        Self { eta, k0, times: (0..=k0).map(|l| t_crit(l, eta)).collect() }
    }

    /// `I_l` as `(t_l, t_{l-1})`.
    pub fn interval(&self, l: usize) -> (f64, f64) {
        (self.times[l], self.times[l - 1])
    }
}

// ---------------------------------------------------------------- anchors

#[inline]
fn ln1p_scaled(p: &WeightParams, d: f64) -> f64 {
    (p.delta * p.delta * d.abs()).ln_1p()
}

/// Log-weight at `η/l` from the anchor at `t_{l-1}`.
#[inline]
fn mid_from(s_prev: f64, l: usize, eta: f64, p: &WeightParams) -> f64 {
    let c = eta / l as f64;
    s_prev + p.delta0 * (ln1p_scaled(p, c - c) - ln1p_scaled(p, t_crit(l - 1, eta) - c))
}

/// Log-weight at `t_l` from the value at `η/l`.
#[inline]
fn low_from(mid: f64, l: usize, eta: f64, p: &WeightParams) -> f64 {
    mid - (1.0 + p.delta0) * ln1p_scaled(p, t_crit(l, eta) - eta / l as f64)
}

/// `Re ln Γ(x + iy)` for `x > 0`.
pub fn ln_gamma_abs(x: f64, y: f64) -> f64 {
    let mut z = Complex64::new(x, y);
    let mut shift = 0.0;
    while z.norm() < 20.0 {
        shift -= z.norm().ln();
        z += 1.0;
    }
    let zi = z.inv();
    let zi2 = zi * zi;
    let series = zi
        * (1.0 / 12.0
            + zi2 * (-1.0 / 360.0 + zi2 * (1.0 / 1260.0 + zi2 * (-1.0 / 1680.0 + zi2 * (1.0 / 1188.0)))));
    let main = (z - 0.5) * z.ln() - z + 0.5 * (2.0 * PI).ln() + series;
    main.re + shift
}

const DIRECT_SUM_LIMIT: usize = 64;

/// `ln w_NR(t_l, η)` in O(1): the recursion telescopes into
/// `−δ0 Σ ln(1 + a/(j(j−1))) − (1+δ0) Σ ln(1 + a/(j(j+1)))`, `a = δ²η/2`,
/// whose products are ratios of `|Γ(· + iβ)|²`, `β = √(a − 1/4)`.
fn anchor_closed(l: usize, eta: f64, p: &WeightParams) -> f64 {
    if l <= DIRECT_SUM_LIMIT {
        let mut s = 0.0;
        for j in 1..=l {
            s = low_from(mid_from(s, j, eta, p), j, eta, p);
        }
        return s;
    }
    let a = 0.5 * p.delta * p.delta * eta;
    let beta = (a - 0.25).sqrt();
    let lf = l as f64;
    let g = |x: f64| ln_gamma_abs(x, beta);
    let lg = |x: f64| ln_gamma_abs(x, 0.0);
    let base = g(1.5);
    let sum_low = 2.0 * (g(lf + 1.5) - base) - lg(lf + 1.0) - lg(lf + 2.0);
    let sum_high = (2.0 * a).ln_1p() + 2.0 * (g(lf + 0.5) - base) - lg(lf + 1.0) - lg(lf);
    -p.delta0 * sum_high - (1.0 + p.delta0) * sum_low
}

/// Direct backward recursion for one frequency: `ln w_NR` at every critical
/// time and at every `η/l`.
#[derive(Clone, Debug)]
pub struct Schedule {
    pub eta: f64,
    pub k0: usize,
    /// `ln w_NR(t_l)`, `l = 0..=k0`.
    pub at_crit: Vec<f64>,
    /// `ln w_NR(η/l)`, index `l` (entry 0 unused).
    pub at_center: Vec<f64>,
}

impl Schedule {
    pub fn new(eta: f64, p: &WeightParams) -> Self {
        let eta = eta.abs();
        let k0 = k0_of(eta, p);
        let mut at_crit = vec![0.0; k0 + 1];
        let mut at_center = vec![0.0; k0 + 1];
        for l in 1..=k0 {
            at_center[l] = mid_from(at_crit[l - 1], l, eta, p);
            at_crit[l] = low_from(at_center[l], l, eta, p);
        }
        Self { eta, k0, at_crit, at_center }
    }
}

/// Source of `ln w_NR(t_l)` values.
trait Anchors {
    fn crit(&self, l: usize) -> f64;
    fn center(&self, l: usize) -> f64;
}

impl Anchors for Schedule {
    fn crit(&self, l: usize) -> f64 {
        self.at_crit[l]
    }
    fn center(&self, l: usize) -> f64 {
        self.at_center[l]
    }
}

struct ClosedForm<'a> {
    eta: f64,
    p: &'a WeightParams,
}

impl Anchors for ClosedForm<'_> {
    fn crit(&self, l: usize) -> f64 {
        anchor_closed(l, self.eta, self.p)
    }
    fn center(&self, l: usize) -> f64 {
        mid_from(anchor_closed(l - 1, self.eta, self.p), l, self.eta, self.p)
    }
}

/// `ln w_NR` on interval `l` by its own branch formula (valid on the closed
/// interval, which is what the continuity checks evaluate).
fn log_w_nr_on(anchors: &impl Anchors, l: usize, t: f64, eta: f64, p: &WeightParams) -> f64 {
    let c = eta / l as f64;
    if t >= c {
        anchors.crit(l - 1) + p.delta0 * (ln1p_scaled(p, t - c) - ln1p_scaled(p, t_crit(l - 1, eta) - c))
    } else {
        anchors.center(l) - (1.0 + p.delta0) * ln1p_scaled(p, t - c)
    }
}

/// `ln(w_R / w_NR)` on interval `l`.
fn resonant_factor(l: usize, t: f64, eta: f64, p: &WeightParams) -> f64 {
    let lf = l as f64;
    let d = (t - eta / lf).abs();
    let half = eta / (8.0 * lf * lf);
    if d <= half {
        ln1p_scaled(p, d) - ln1p_scaled(p, half)
    } else {
        0.0
    }
}

/// Which branch applies at time `t` for a frequency above threshold.
enum Region {
    Settled,
    Early,
    Interval(usize),
}

fn region(t: f64, eta: f64, k0: usize) -> Region {
    if t >= 2.0 * eta {
        Region::Settled
    } else if k0 == 0 || t < t_crit(k0, eta) {
        Region::Early
    } else {
        Region::Interval(interval_of(t, eta, k0))
    }
}

fn log_w_with(anchors: &impl Anchors, star: Star, t: f64, eta: f64, k0: usize, p: &WeightParams) -> f64 {
    // eta > threshold here, already made non-negative by the caller for NR/R
    match region(t, eta, k0) {
        Region::Settled => 0.0,
        Region::Early => {
            let tk = if k0 == 0 { 2.0 * eta } else { t_crit(k0, eta) };
            let beta = 1.0 - t / tk;
            let edge = if k0 == 0 { 0.0 } else { anchors.crit(k0) };
            beta * (-p.delta * eta.sqrt()) + (1.0 - beta) * edge
        }
        Region::Interval(l) => {
            let base = log_w_nr_on(anchors, l, t, eta, p);
            let resonant = match star {
                Star::NonResonant => false,
                Star::Resonant => true,
                Star::Mode(k) => k >= 1 && k as usize == l,
            };
            if resonant {
                base + resonant_factor(l, t, eta, p)
            } else {
                base
            }
        }
    }
}

/// Folds negative frequencies onto positive ones: `w_k(η) = w_{−k}(−η)`,
/// `w_NR, w_R` even in η.
fn fold(star: Star, eta: f64) -> (Star, f64) {
    if eta >= 0.0 {
        return (star, eta);
    }
    match star {
        Star::Mode(k) => (Star::Mode(-k), -eta),
        s => (s, -eta),
    }
}

/// `ln w_*(t, η)`.
pub fn log_w_raw(star: Star, t: f64, eta: f64, p: &WeightParams) -> f64 {
    let (star, eta) = fold(star, eta);
    if eta <= p.threshold() {
        return 0.0;
    }
    let k0 = k0_of(eta, p);
    log_w_with(&ClosedForm { eta, p }, star, t, eta, k0, p)
}

pub fn w_raw(star: Star, t: f64, eta: f64, p: &WeightParams) -> f64 {
    log_w_raw(star, t, eta, p).exp()
}

/// `ln w_*(t, η)` through a precomputed direct-recursion schedule for `|η|`.
pub fn log_w_scheduled(schedule: &Schedule, star: Star, t: f64, eta: f64, p: &WeightParams) -> f64 {
    let (star, eta) = fold(star, eta);
    debug_assert_eq!(eta, schedule.eta);
    if eta <= p.threshold() {
        return 0.0;
    }
    log_w_with(schedule, star, t, eta, schedule.k0, p)
}

/// Both one-sided limits at the critical time `t_l` (`1 ≤ l ≤ k0`) from the
/// schedule: interval `l` (right side) and interval `l+1` or the early
/// branch (left side). Also returns the pair at `2η`.
pub fn breakpoint_limits(schedule: &Schedule, star: Star, p: &WeightParams) -> Vec<(f64, f64, f64)> {
    let eta = schedule.eta;
    let k0 = schedule.k0;
    let mut out = Vec::with_capacity(k0 + 1);
    let with_factor = |l: usize, t: f64| {
        let base = log_w_nr_on(schedule, l, t, eta, p);
        let res = match star {
            Star::NonResonant => false,
            Star::Resonant => true,
            Star::Mode(k) => k >= 1 && k as usize == l,
        };
        if res {
            base + resonant_factor(l, t, eta, p)
        } else {
            base
        }
    };
    if k0 >= 1 {
        out.push((2.0 * eta, with_factor(1, 2.0 * eta), 0.0));
    }
    for l in 1..=k0 {
        let t = t_crit(l, eta);
        let right = with_factor(l, t);
        let left = if l < k0 {
            with_factor(l + 1, t)
        } else {
            // early branch at beta = 0
            let beta = 0.0;
            beta * (-p.delta * eta.sqrt()) + (1.0 - beta) * schedule.at_crit[k0]
        };
        out.push((t, left, right));
    }
    out
}

/// Shared per-frequency schedules.
#[derive(Default)]
pub struct ScheduleCache {
    map: RwLock<HashMap<u64, Arc<Schedule>>>,
}

impl ScheduleCache {
    pub fn get(&self, eta: f64, p: &WeightParams) -> Arc<Schedule> {
        let key = eta.abs().to_bits();
        if let Some(s) = self.map.read().expect("cache lock").get(&key) {
            return s.clone();
        }
        let s = Arc::new(Schedule::new(eta, p));
        self.map.write().expect("cache lock").insert(key, s.clone());
        s
    }
}

// ---------------------------------------------------------------- mollification

/// Even mollifier, identically 1 on [−1.28, 1.28] ⊇ [−5/4, 5/4] and
/// supported in [−8/5, 8/5].
pub fn mollifier(x: f64) -> f64 {
    plateau_cutoff(1.0, 0.9, (x + 1.6) / 3.2)
}

pub fn mollifier_mass() -> f64 {
    static D0: OnceLock<f64> = OnceLock::new();
    *D0.get_or_init(|| {
        let opts = QuadOptions { rel_tol: 1e-14, ..Default::default() };
        integrate(mollifier, -1.6, 1.6, &[-1.28, 1.28], opts).expect("smooth mollifier").value
    })
}

/// `L_{δ'}(t, ξ) = 1 + δ'⟨ξ⟩/(⟨ξ⟩^{1/2} + δ' t)`.
pub fn mollifier_width(t: f64, xi: f64, delta_prime: f64) -> f64 {
    let b = bracket(xi);
    1.0 + delta_prime * b / (b.sqrt() + delta_prime * t)
}

/// Interior points of `[lo, hi]` where a raw weight or `μ^#` is not smooth.
fn kinks(t: f64, lo: f64, hi: f64, p: &WeightParams) -> Vec<f64> {
    let mut pts = vec![-p.threshold(), p.threshold(), 0.5 * t, -0.5 * t, 0.0];
    let (a, b) = if hi <= 0.0 {
        (-hi, -lo)
    } else if lo >= 0.0 {
        (lo, hi)
    } else {
        (0.0, (-lo).max(hi))
    };
    let mut pos = Vec::new();
    // jumps of k0(ρ) at ρ = j²/δ³
    let d3 = p.delta.powi(3);
    let (j_lo, j_hi) = ((a * d3).sqrt().floor() as usize, (b * d3).sqrt().ceil() as usize);
    if j_hi - j_lo <= 200 {
        for j in j_lo..=j_hi {
            pos.push((j * j) as f64 / d3);
        }
    }
    if t > 0.0 {
        let l_lo = ((a / t) - 2.0).floor().max(1.0) as usize;
        let l_hi = ((b / t) + 2.0).ceil().max(1.0) as usize;
        if l_hi - l_lo <= 200 {
            for l in l_lo..=l_hi {
                let lf = l as f64;
                pos.push(t * lf);
                pos.push(t * 2.0 * lf * (lf + 1.0) / (2.0 * lf + 1.0));
                pos.push(t * lf / (1.0 + 1.0 / (8.0 * lf)));
                if 8.0 * lf > 1.0 {
                    pos.push(t * lf / (1.0 - 1.0 / (8.0 * lf)));
                }
            }
        }
    }
    for x in pos {
        pts.push(x);
        pts.push(-x);
    }
    pts.retain(|&x| x > lo && x < hi);
    pts
}

#[derive(Clone, Copy, Debug)]
pub struct MollifyOptions {
    pub rel_tol: f64,
}

impl Default for MollifyOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-10 }
    }
}

/// Mollified `ln b_*(t, ξ)`.
pub fn log_b_mollified_with(star: Star, t: f64, xi: f64, p: &WeightParams, o: MollifyOptions) -> Result<f64> {
    let width = mollifier_width(t, xi, p.delta_prime);
    let (lo, hi) = (xi - 1.6 * width, xi + 1.6 * width);
    let reach = lo.abs().max(hi.abs());
    if reach <= p.threshold() || t >= 2.0 * reach {
        return Ok(0.0);
    }
    let reference = log_w_raw(star, t, xi, p);
    let f = |rho: f64| (log_w_raw(star, t, rho, p) - reference).exp() * mollifier((xi - rho) / width);
    let mut cuts = kinks(t, lo, hi, p);
    cuts.push(xi - 1.28 * width);
    cuts.push(xi + 1.28 * width);
    let opts = QuadOptions { rel_tol: o.rel_tol, abs_tol: 0.0, max_segments: 200_000 };
    let r = integrate(f, lo, hi, &cuts, opts)?;
    Ok(reference + (r.value / (mollifier_mass() * width)).ln())
}

pub fn log_b_mollified(star: Star, t: f64, xi: f64, p: &WeightParams) -> Result<f64> {
    log_b_mollified_with(star, t, xi, p, MollifyOptions::default())
}

pub fn b_mollified(star: Star, t: f64, xi: f64, p: &WeightParams) -> Result<f64> {
    Ok(log_b_mollified(star, t, xi, p)?.exp())
}

fn logaddexp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// `ln A_*(t, ξ)` given `ln b_*(t, ξ)` and `λ(t)`.
pub fn log_a_from(star: Star, xi: f64, lambda: f64, log_b: f64, p: &WeightParams) -> f64 {
    let sd = p.delta.sqrt();
    match star {
        Star::NonResonant | Star::Resonant => lambda * bracket(xi).sqrt() - log_b + sd * bracket(xi).sqrt(),
        Star::Mode(k) => {
            lambda * bracket2(k as f64, xi).sqrt()
                + logaddexp(sd * bracket(xi).sqrt() - log_b, sd * (k.unsigned_abs() as f64).sqrt())
        }
    }
}

pub fn log_weight_a(star: Star, t: f64, xi: f64, p: &WeightParams) -> Result<f64> {
    let lb = log_b_mollified(star, t, xi, p)?;
    Ok(log_a_from(star, xi, lambda_of(t, p), lb, p))
}

pub fn weight_a(star: Star, t: f64, xi: f64, p: &WeightParams) -> Result<f64> {
    Ok(log_weight_a(star, t, xi, p)?.exp())
}

/// `∂_t ln A_*` by centered differences with step `1e-4·max(1, t)`
/// (forward at `t = 0`).
pub fn log_a_rate(star: Star, t: f64, xi: f64, p: &WeightParams) -> Result<f64> {
    let h = 1e-4 * t.max(1.0);
    if t < h {
        let a0 = log_weight_a(star, t, xi, p)?;
        let a1 = log_weight_a(star, t + h, xi, p)?;
        return Ok((a1 - a0) / h);
    }
    let a0 = log_weight_a(star, t - h, xi, p)?;
    let a1 = log_weight_a(star, t + h, xi, p)?;
    Ok((a1 - a0) / (2.0 * h))
}

// ---------------------------------------------------------------- mu weights

/// Piecewise rate profile `μ^#(t, ξ)`.
pub fn mu_sharp(t: f64, xi: f64, p: &WeightParams) -> f64 {
    let x = xi.abs();
    if x <= p.threshold() || t > 2.0 * x {
        return 0.0;
    }
    let k0 = k0_of(x, p);
    let d2 = p.delta * p.delta;
    if k0 == 0 || t < t_crit(k0, x) {
        return d2;
    }
    let l = interval_of(t, x, k0);
    d2 / (1.0 + d2 * (t - x / l as f64).abs())
}

pub fn mu_star(t: f64, xi: f64, p: &WeightParams) -> Result<f64> {
    let width = mollifier_width(t, xi, p.delta_prime);
    let (lo, hi) = (xi - 1.6 * width, xi + 1.6 * width);
    let reach = lo.abs().max(hi.abs());
    if reach <= p.threshold() || t > 2.0 * reach {
        return Ok(0.0);
    }
    let f = |rho: f64| mu_sharp(t, rho, p) * mollifier((xi - rho) / width);
    let mut cuts = kinks(t, lo, hi, p);
    cuts.push(xi - 1.28 * width);
    cuts.push(xi + 1.28 * width);
    let opts = QuadOptions { rel_tol: 1e-10, abs_tol: 1e-300, max_segments: 200_000 };
    Ok(integrate(f, lo, hi, &cuts, opts)?.value / (mollifier_mass() * width))
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct MuWeights {
    pub mu_sharp: f64,
    pub mu_star: f64,
    pub mu_k: f64,
    pub mu_r: f64,
}

pub fn mu_weights(t: f64, xi: f64, k: i64, p: &WeightParams) -> Result<MuWeights> {
    let sharp = mu_sharp(t, xi, p);
    let star = mu_star(t, xi, p)?;
    let decay = bracket(t).powf(1.0 + p.sigma0);
    let b_k = b_mollified(Star::Mode(k), t, xi, p)?;
    let sd = p.delta.sqrt();
    let mix = 1.0 + (sd * ((k.unsigned_abs() as f64).sqrt() - bracket(xi).sqrt())).exp() * b_k;
    Ok(MuWeights {
        mu_sharp: sharp,
        mu_star: star,
        mu_k: bracket2(k as f64, xi).sqrt() / decay + star / mix,
        mu_r: bracket(xi).sqrt() / decay + star,
    })
}
