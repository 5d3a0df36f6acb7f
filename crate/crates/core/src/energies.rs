//! Weighted spectral energies of the unwound fields, their space-time
//! companions, and log-log decay fitting.
//!
//! Spectral sums use the unitary DFT in `v`, so with unit weights every
//! energy is `Σ_k ∫ |f_k(v)|² dv` (Parseval on the sampling grid).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gevrey::{bracket, bracket2, spectrum_of_profiles, Spectrum};
use crate::weights::{lambda_of, lambda_rate, log_a_from, log_a_rate, log_weight_a, mollifier_width, Star, WeightParams};

#[derive(Clone, Copy, Debug)]
pub struct EnergyParams {
    pub weights: WeightParams,
    /// The constant `𝒦` in front of the `W*` energy.
    pub k_const: f64,
}

impl Default for EnergyParams {
    fn default() -> Self {
        Self { weights: WeightParams::default(), k_const: 1.0 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct EnergyRecord {
    pub t: f64,
    pub e_f: f64,
    pub e_phi: f64,
    pub e_vstar: f64,
    pub e_rhostar: f64,
    pub e_wstar: f64,
    pub b_f: f64,
    pub b_phi: f64,
    pub b_vstar: f64,
    pub b_rhostar: f64,
    pub b_wstar: f64,
    pub k_const: f64,
}

/// `ln A_*(t, ξ)` and `∂_t ln A_*(t, ξ)` at one time, reusing `λ(t)`.
///
/// Where the mollification window stays below the weight threshold `b ≡ 1`
/// on a neighbourhood of `t`, so `A` is explicit and its rate is `λ'(t)`
/// times the bracket.
pub struct WeightsAt {
    pub t: f64,
    lambda: f64,
    lambda_rate: f64,
    p: WeightParams,
}

impl WeightsAt {
    pub fn new(t: f64, p: &WeightParams) -> Self {
        Self { t, lambda: lambda_of(t, p), lambda_rate: lambda_rate(t, p), p: *p }
    }

    fn trivial(&self, xi: f64) -> bool {
        // the width is largest at the smallest time used by the rate stencil
        let t_lo = (self.t - 1e-4 * self.t.max(1.0)).max(0.0);
        let w = mollifier_width(t_lo, xi, self.p.delta_prime);
        xi.abs() + 1.6 * w <= self.p.threshold()
    }

    pub fn log_a(&self, star: Star, xi: f64) -> Result<f64> {
        if self.trivial(xi) {
            Ok(log_a_from(star, xi, self.lambda, 0.0, &self.p))
        } else {
            log_weight_a(star, self.t, xi, &self.p)
        }
    }

    pub fn log_a_rate(&self, star: Star, xi: f64) -> Result<f64> {
        if self.trivial(xi) {
            let root = match star {
                Star::Mode(k) => bracket2(k as f64, xi).sqrt(),
                _ => bracket(xi).sqrt(),
            };
            Ok(self.lambda_rate * root)
        } else {
            log_a_rate(star, self.t, xi, &self.p)
        }
    }
}

/// Energy density and `|Ȧ|A` density at one `(star, ξ)`.
fn densities(w: &WeightsAt, star: Star, xi: f64) -> Result<(f64, f64)> {
    let la = w.log_a(star, xi)?;
    let rate = w.log_a_rate(star, xi)?;
    let a2 = (2.0 * la).exp();
    Ok((a2, rate.abs() * a2))
}

/// `(Σ weight·A²|f̃|² dξ, Σ weight·|Ȧ|A|f̃|² dξ)` over a spectrum, `A = A_{star(k)}`.
fn weighted_pair(
    spec: &Spectrum,
    w: &WeightsAt,
    star: impl Fn(i64) -> Star,
    multiplier: impl Fn(i64, f64) -> f64,
) -> Result<(f64, f64)> {
    let mut e = 0.0;
    let mut b = 0.0;
    for (k, row) in spec.coeffs.iter().enumerate() {
        let k = k as i64;
        let mult = if k == 0 { 1.0 } else { 2.0 };
        for (c, &xi) in row.iter().zip(&spec.xi) {
            let m = multiplier(k, xi);
            let p2 = c.norm_sqr();
            if m == 0.0 || p2 == 0.0 {
                continue;
            }
            let (a2, rate) = densities(w, star(k), xi)?;
            e += mult * m * a2 * p2;
            b += mult * m * rate * p2;
        }
    }
    Ok((e * spec.dv, b * spec.dv))
}

/// `E_F` and the integrand of `B_F` at the spectrum's time.
pub fn energy_f(spec: &Spectrum, w: &WeightsAt) -> Result<(f64, f64)> {
    weighted_pair(spec, w, Star::Mode, |_, _| 1.0)
}

pub fn phi_multiplier(t: f64, k: i64, xi: f64) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let kf = k as f64;
    let bt = bracket(t);
    let q = xi / kf;
    kf.abs().powi(4) * bt * bt * bracket(t - q).powi(4) / (q * q + bt * bt)
}

/// `E_φ` from the spectrum of the localized stream function; `k = 0` is excluded.
pub fn energy_phi(spec: &Spectrum, w: &WeightsAt) -> Result<(f64, f64)> {
    let t = w.t;
    weighted_pair(spec, w, Star::Mode, |k, xi| phi_multiplier(t, k, xi))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScalarKind {
    VStar,
    RhoStar,
    WStar,
}

/// Energy of a real v-profile; the caller applies any cutoff first.
pub fn energy_scalar(profile: &[f64], dv: f64, kind: ScalarKind, w: &WeightsAt, params: &EnergyParams) -> Result<(f64, f64)> {
    let row: Vec<num_complex::Complex64> = profile.iter().map(|&x| x.into()).collect();
    let spec = spectrum_of_profiles(&[row], dv);
    let t = w.t;
    match kind {
        ScalarKind::VStar | ScalarKind::RhoStar => weighted_pair(&spec, w, |_| Star::Resonant, |_, _| 1.0),
        ScalarKind::WStar => {
            let k2 = params.k_const * params.k_const;
            let bt = bracket(t).powf(1.5);
            weighted_pair(&spec, w, |_| Star::NonResonant, |_, xi| k2 * bt * bracket(xi).powf(-1.5))
        }
    }
}

/// Trapezoid accumulation of the `B` integrals from `t = 1`.
#[derive(Clone, Debug, Default)]
pub struct BAccumulator {
    last: Option<(f64, [f64; 5])>,
    pub totals: [f64; 5],
}

impl BAccumulator {
    pub fn push(&mut self, t: f64, integrands: [f64; 5]) -> [f64; 5] {
        if let Some((t0, f0)) = self.last {
            if t > 1.0 && t > t0 {
                let a = t0.max(1.0);
                for i in 0..5 {
                    // integrand at the lower limit, interpolated if the step straddles t = 1
                    let fa = if t0 >= 1.0 { f0[i] } else { f0[i] + (integrands[i] - f0[i]) * (a - t0) / (t - t0) };
                    self.totals[i] += 0.5 * (t - a) * (fa + integrands[i]);
                }
            }
        }
        self.last = Some((t, integrands));
        self.totals
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope.
    pub stderr: f64,
    pub points: usize,
}

/// Least-squares slope of `ln y` against `ln t` over `window`.
pub fn decay_fit(series: &[(f64, f64)], window: (f64, f64)) -> Result<SlopeFit> {
    let pts: Vec<(f64, f64)> = series.iter().copied().filter(|(t, _)| *t >= window.0 && *t <= window.1).collect();
    if pts.len() < 8 {
        return Err(Error::Fit(format!("{} points in window {:?}, need 8", pts.len(), window)));
    }
    if let Some((t, y)) = pts.iter().find(|(t, y)| !(*y > 0.0) || !(*t > 0.0)) {
        return Err(Error::Fit(format!("non-positive sample ({t}, {y}) in fit window")));
    }
    let n = pts.len() as f64;
    let xs: Vec<f64> = pts.iter().map(|(t, _)| t.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|(_, y)| y.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let stderr = if pts.len() > 2 { (rss / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    Ok(SlopeFit { slope, intercept, stderr, points: pts.len() })
}
