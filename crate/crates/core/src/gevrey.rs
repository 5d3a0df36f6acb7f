//! Gevrey cutoffs, the discrete Gevrey norm, and a Fourier-decay fit.
//!
//! Spectral convention: a field on (z, v) is held as angular coefficients
//! `F_k(v_n)` (with `F(z) = Σ_k F_k e^{ikz}`) sampled on `N` uniform v-nodes.
//! The v-transform is the unitary DFT
//! `F̃(k, ξ_j) = N^{-1/2} Σ_n F_k(v_n) e^{-2πi jn/N}` with signed frequencies
//! `ξ_j = 2πj / (N·dv)`, `j ∈ (−N/2, N/2]`. The field is treated as extended
//! by zero outside the sampled interval, so `N·dv` is the truncation length.
//! With this convention a single coefficient of modulus one has ℓ² mass one.

use std::f64::consts::PI;

use log::warn;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::quadrature::composite_gauss;

/// `ψ_a(x) = exp(−x^{−a} − (1−x)^{−a})` on (0, 1), zero elsewhere.
pub fn bump_psi_a(a: f64, x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    (-(x.powf(-a) + (1.0 - x).powf(-a))).exp()
}

/// `ln ψ_a(x)`, `−∞` outside (0, 1).
fn log_bump(a: f64, x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return f64::NEG_INFINITY;
    }
    -(x.powf(-a) + (1.0 - x).powf(-a))
}

/// `(ψ(x − ρ) + ψ(x + ρ)) / ψ(x)` from log values, so that none of the
/// three terms underflows first.
fn side_ratio(a: f64, rho: f64, x: f64) -> f64 {
    let centre = log_bump(a, x);
    (log_bump(a, x - rho) - centre).exp() + (log_bump(a, x + rho) - centre).exp()
}

/// Partition-of-unity cutoff: support [0, 1], identically 1 on [1−ρ, ρ].
pub fn plateau_cutoff(a: f64, rho: f64, x: f64) -> f64 {
    debug_assert!((0.9..1.0).contains(&rho));
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    1.0 / (1.0 + side_ratio(a, rho, x))
}

/// `1 − plateau_cutoff` evaluated without cancellation.
pub fn plateau_complement(a: f64, rho: f64, x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 1.0;
    }
    let side = side_ratio(a, rho, x);
    if side.is_infinite() {
        1.0
    } else {
        side / (1.0 + side)
    }
}

/// Plateau cutoff mapped onto `[lo, hi]`.
pub fn plateau_on(lo: f64, hi: f64, x: f64) -> f64 {
    plateau_cutoff(1.0, 0.9, (x - lo) / (hi - lo))
}

/// `∫_0^x ψ_a / ∫_0^1 ψ_a`, clamped to [0, 1]: a Gevrey step whose ramp
/// spans the whole unit interval.
pub fn smooth_step_a(a: f64, x: f64) -> f64 {
    static MASSES: std::sync::Mutex<Vec<(u64, f64)>> = std::sync::Mutex::new(Vec::new());
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let mass = {
        let mut cache = MASSES.lock().expect("mass cache");
        match cache.iter().find(|(bits, _)| *bits == a.to_bits()) {
            Some(&(_, m)) => m,
            None => {
                let m = composite_gauss(|y| bump_psi_a(a, y), 0.0, 1.0, 64, 20);
                cache.push((a.to_bits(), m));
                m
            }
        }
    };
    let tail = |lo: f64, hi: f64| composite_gauss(|y| bump_psi_a(a, y), lo, hi, 32, 20) / mass;
    // integrate over the shorter side so both ends are accurate
    if x <= 0.5 {
        tail(0.0, x)
    } else {
        1.0 - tail(x, 1.0)
    }
}

pub fn smooth_step(x: f64) -> f64 {
    smooth_step_a(1.0, x)
}

/// Gevrey-`a/(a+1)` window supported in `[edges[0], edges[3]]` and equal to
/// 1 on `[edges[1], edges[2]]`.
pub fn gevrey_window(a: f64, edges: [f64; 4], x: f64) -> f64 {
    let [a0, a1, b1, b0] = edges;
    debug_assert!(a0 < a1 && a1 <= b1 && b1 < b0);
    smooth_step_a(a, (x - a0) / (a1 - a0)) * smooth_step_a(a, (b0 - x) / (b0 - b1))
}

/// Supported in `[lo, hi]`, equal to 1 on `[lo + ramp, hi − ramp]`, with
/// ramps wide enough to be resolved on a desk-scale radial grid.
pub fn ramped_plateau(lo: f64, hi: f64, ramp: f64, x: f64) -> f64 {
    debug_assert!(2.0 * ramp <= hi - lo);
    smooth_step((x - lo) / ramp) * smooth_step((hi - x) / ramp)
}

#[inline]
pub fn bracket(x: f64) -> f64 {
    (1.0 + x * x).sqrt()
}

#[inline]
pub fn bracket2(k: f64, xi: f64) -> f64 {
    (1.0 + k * k + xi * xi).sqrt()
}

#[derive(Clone, Copy, Debug)]
pub struct GevreyNormSpec {
    pub lambda: f64,
    pub s: f64,
}

impl Default for GevreyNormSpec {
    fn default() -> Self {
        Self { lambda: 0.1, s: 0.5 }
    }
}

impl GevreyNormSpec {
    pub fn new(lambda: f64, s: f64) -> Result<Self> {
        if !(lambda > 0.0) || !(s > 0.0 && s <= 1.0) {
            return Err(Error::InvalidParams(format!("gevrey spec needs lambda > 0, s in (0, 1]; got {lambda}, {s}")));
        }
        Ok(Self { lambda, s })
    }
}

/// Two-dimensional discrete spectrum, non-negative angular modes only.
#[derive(Clone, Debug)]
pub struct Spectrum {
    /// Signed frequency of each DFT index.
    pub xi: Vec<f64>,
    /// `coeffs[k][j]` for `k = 0..=k_max`.
    pub coeffs: Vec<Vec<Complex64>>,
    pub dv: f64,
}

impl Spectrum {
    /// Sum over signed `k` of `weight(k, ξ) |F̃(k, ξ)|²`, using the conjugate
    /// pairing `|F̃(−k, −ξ)| = |F̃(k, ξ)|` of a real field; `weight` must share
    /// that symmetry.
    pub fn weighted_sum(&self, weight: impl Fn(i64, f64) -> f64 + Sync) -> f64 {
        self.coeffs
            .par_iter()
            .enumerate()
            .map(|(k, row)| {
                let mult = if k == 0 { 1.0 } else { 2.0 };
                mult * row.iter().zip(&self.xi).map(|(c, &xi)| weight(k as i64, xi) * c.norm_sqr()).sum::<f64>()
            })
            .sum()
    }
}

/// Signed DFT frequencies for `n` samples with spacing `dv`.
pub fn frequencies(n: usize, dv: f64) -> Vec<f64> {
    let base = 2.0 * PI / (n as f64 * dv);
    (0..n)
        .map(|j| {
            let s = if j > n / 2 { j as i64 - n as i64 } else { j as i64 };
            s as f64 * base
        })
        .collect()
}

/// Unitary DFT in v of every angular-mode profile.
pub fn spectrum_of_profiles(profiles: &[Vec<Complex64>], dv: f64) -> Spectrum {
    let n = profiles.first().map_or(0, Vec::len);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n.max(1));
    let scale = 1.0 / (n as f64).sqrt();
    let coeffs = profiles
        .par_iter()
        .map(|p| {
            let mut buf = p.clone();
            if n > 0 {
                fft.process(&mut buf);
            }
            buf.iter_mut().for_each(|c| *c *= scale);
            buf
        })
        .collect();
    Spectrum { xi: frequencies(n, dv), coeffs, dv }
}

#[derive(Clone, Copy, Debug)]
pub struct GevreyNorm {
    pub value: f64,
    /// Share of the weighted squared norm carried by the outer fifth of the
    /// retained frequencies (in either k or ξ).
    pub tail_fraction: f64,
}

pub fn gevrey_norm(spec: &Spectrum, g: GevreyNormSpec) -> GevreyNorm {
    let k_top = spec.coeffs.len().saturating_sub(1) as f64;
    let xi_top = spec.xi.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let w = |k: i64, xi: f64| (2.0 * g.lambda * bracket2(k as f64, xi).powf(g.s)).exp();
    let total = spec.weighted_sum(w);
    let tail = spec.weighted_sum(|k, xi| {
        if (k_top > 0.0 && k as f64 > 0.8 * k_top) || (xi_top > 0.0 && xi.abs() > 0.8 * xi_top) {
            w(k, xi)
        } else {
            0.0
        }
    });
    let tail_fraction = if total > 0.0 { tail / total } else { 0.0 };
    if tail_fraction > 1e-3 {
        warn!("gevrey norm tail fraction {tail_fraction:.3e}: resolution insufficient for lambda = {}", g.lambda);
    }
    GevreyNorm { value: total.sqrt(), tail_fraction }
}

/// Gevrey norm of a single real profile (k = 0 only).
pub fn gevrey_norm_profile(values: &[f64], dv: f64, g: GevreyNormSpec) -> GevreyNorm {
    let row: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    gevrey_norm(&spectrum_of_profiles(&[row], dv), g)
}

/// Continuous Fourier transform magnitude `|∫ f(x) e^{−iξx} dx|` of uniform
/// samples (zero-padded to `padded` points), at the non-negative DFT frequencies.
pub fn transform_magnitude(samples: &[f64], dx: f64, padded: usize) -> (Vec<f64>, Vec<f64>) {
    let m = padded.max(samples.len()).next_power_of_two();
    let mut buf: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    buf.resize(m, Complex64::default());
    FftPlanner::<f64>::new().plan_fft_forward(m).process(&mut buf);
    let xi: Vec<f64> = (0..m / 2).map(|j| 2.0 * PI * j as f64 / (m as f64 * dx)).collect();
    let mag = buf[..m / 2].iter().map(|c| c.norm() * dx).collect();
    (xi, mag)
}

#[derive(Clone, Copy, Debug)]
pub struct DecayFit {
    pub exponent: f64,
    pub rate: f64,
    pub points: usize,
}

/// Fits `ln|f̂(ξ)| ≈ c + b ln ξ − μ ξ^p` to the upper envelope of the
/// transform over the window where it sits between `1e-3·max` and `1e-12·max`
/// (above the roundoff floor), scanning `p` and solving for `(c, b, μ)` by
/// least squares. Errors when the window holds fewer than 8 envelope points or
/// when the best `p` is not sub-exponential (`p ≥ 1`).
pub fn verify_gevrey_decay(samples: &[f64], dx: f64) -> Result<DecayFit> {
    let (xi, mag) = transform_magnitude(samples, dx, samples.len() * 8);
    let peak = mag.iter().cloned().fold(0.0, f64::max);
    if peak == 0.0 {
        return Err(Error::Fit("transform vanishes identically".into()));
    }
    // upper envelope: local maxima
    let mut env: Vec<(f64, f64)> = Vec::new();
    for j in 1..mag.len() - 1 {
        if mag[j] >= mag[j - 1] && mag[j] >= mag[j + 1] {
            env.push((xi[j], mag[j]));
        }
    }
    let first_low = env.iter().position(|&(_, m)| m < 1e-3 * peak);
    let window: Vec<(f64, f64)> = match first_low {
        Some(s) => env[s..].iter().take_while(|&&(_, m)| m > 1e-12 * peak).cloned().collect(),
        None => Vec::new(),
    };
    if window.len() < 8 {
        return Err(Error::Fit(format!("decay window holds {} envelope points, need >= 8", window.len())));
    }
    // keep only the running-minimum envelope so interference dips do not bias the fit
    let mut upper: Vec<(f64, f64)> = Vec::new();
    for &(x, m) in window.iter().rev() {
        if upper.last().map_or(true, |&(_, last)| m > last) {
            upper.push((x, m));
        }
    }
    upper.reverse();
    if upper.len() < 8 {
        return Err(Error::Fit(format!("decay envelope holds {} points, need >= 8", upper.len())));
    }
    let mut best = (f64::INFINITY, 0.0, 0.0);
    let mut p = 0.1;
    while p <= 2.5 + 1e-12 {
        if let Some((res, mu)) = fit_three(&upper, p) {
            if res < best.0 {
                best = (res, p, mu);
            }
        }
        p += 0.0025;
    }
    let (_, exponent, rate) = best;
    if exponent >= 1.0 {
        return Err(Error::Fit(format!("fitted exponent {exponent:.3} is not sub-exponential")));
    }
    Ok(DecayFit { exponent, rate, points: upper.len() })
}

/// Least squares for `y = c + b ln x − μ x^p`; returns (residual, μ).
fn fit_three(pts: &[(f64, f64)], p: f64) -> Option<(f64, f64)> {
    let mut ata = [[0.0; 3]; 3];
    let mut aty = [0.0; 3];
    for &(x, m) in pts {
        let row = [1.0, x.ln(), -x.powf(p)];
        let y = m.ln();
        for i in 0..3 {
            for j in 0..3 {
                ata[i][j] += row[i] * row[j];
            }
            aty[i] += row[i] * y;
        }
    }
    let sol = solve3(ata, aty)?;
    let res = pts
        .iter()
        .map(|&(x, m)| {
            let pred = sol[0] + sol[1] * x.ln() - sol[2] * x.powf(p);
            (m.ln() - pred).powi(2)
        })
        .sum();
    Some((res, sol[2]))
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for c in 0..3 {
        let piv = (c..3).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[piv][c].abs() < 1e-300 {
            return None;
        }
        a.swap(c, piv);
        b.swap(c, piv);
        for r in c + 1..3 {
            let f = a[r][c] / a[c][c];
            for k in c..3 {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = [0.0; 3];
    for r in (0..3).rev() {
        let s: f64 = (r + 1..3).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}
