//! Exact linearized dynamics around the point vortex. The vorticity is
//! transported by the differential rotation, and each stream mode is an
//! oscillatory integral of the initial profile against the Green kernel,
//! evaluated by brute-force panel quadrature.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energies::{decay_fit, SlopeFit};
use crate::error::{Error, Result};
use crate::gevrey::{bump_psi_a, ramped_plateau};
use crate::poisson::{green_kernel, green_kernel_dr, rotation_rate};
use crate::quadrature::gauss_legendre;

/// Compactly supported radial profile of one initial mode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RadialProfile {
    /// `ψ_1` rescaled to `[lo, hi]`, peak value 1.
    Bump { lo: f64, hi: f64 },
    /// Gevrey plateau on `[lo, hi]` with ramps of width `ramp`.
    Plateau { lo: f64, hi: f64, ramp: f64 },
}

impl RadialProfile {
    pub fn eval(&self, r: f64) -> f64 {
        match *self {
            RadialProfile::Bump { lo, hi } => bump_psi_a(1.0, (r - lo) / (hi - lo)) / bump_psi_a(1.0, 0.5),
            RadialProfile::Plateau { lo, hi, ramp } => ramped_plateau(lo, hi, ramp, r),
        }
    }

    pub fn support(&self) -> (f64, f64) {
        match *self {
            RadialProfile::Bump { lo, hi } | RadialProfile::Plateau { lo, hi, .. } => (lo, hi),
        }
    }
}

/// Initial mode `ω_{0,k}(ρ) = coeff · profile(ρ)`; the field is
/// `Σ_k ω_{0,k} e^{ikθ}` with conjugate negative modes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeData {
    pub k: i64,
    pub coeff: [f64; 2],
    pub profile: RadialProfile,
}

impl ModeData {
    pub fn coeff(&self) -> Complex64 {
        Complex64::new(self.coeff[0], self.coeff[1])
    }

    pub fn value(&self, r: f64) -> Complex64 {
        self.coeff() * self.profile.eval(r)
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct OscillatoryQuadrature {
    /// Panel width as a fraction of the local oscillation wavelength.
    pub panel_fraction: f64,
    /// Gauss-Legendre nodes per panel.
    pub order: usize,
    pub max_panels: usize,
}

impl Default for OscillatoryQuadrature {
    fn default() -> Self {
        Self { panel_fraction: 0.25, order: 20, max_panels: 1_000_000 }
    }
}

/// `ω^{lin}(t, θ, r) = ω_0(θ − κt/(2πr²), r)`.
pub fn linear_vorticity(t: f64, theta: f64, r: f64, kappa: f64, modes: &[ModeData]) -> f64 {
    let shift = theta - rotation_rate(kappa, r) * t;
    modes
        .iter()
        .map(|m| {
            let c = m.value(r) * Complex64::from_polar(1.0, m.k as f64 * shift);
            if m.k == 0 {
                c.re
            } else {
                2.0 * c.re
            }
        })
        .sum()
}

/// Local wavelength `2π · πρ³/(|k|κt)` of `e^{−ikκt/(2πρ²)}`.
fn wavelength(k: i64, kappa: f64, t: f64, rho: f64) -> f64 {
    if t == 0.0 {
        f64::INFINITY
    } else {
        2.0 * PI * PI * rho.powi(3) / (k.unsigned_abs() as f64 * kappa * t)
    }
}

fn panel_edges(a: f64, b: f64, k: i64, kappa: f64, t: f64, q: &OscillatoryQuadrature) -> Vec<f64> {
    let mut edges = vec![a];
    let mut x = a;
    let cap = (b - a) / 4.0;
    while x < b {
        // the wavelength grows with ρ, so the left end sets the panel width
        let w = (q.panel_fraction * wavelength(k, kappa, t, x)).min(cap);
        x = (x + w).min(b);
        edges.push(x);
        if edges.len() > q.max_panels + 1 {
            break;
        }
    }
    edges
}

/// `(ψ_k^{lin}(t, r), ∂_rψ_k^{lin}(t, r))` for the initial profile `mode`.
pub fn linear_stream_mode(t: f64, r: f64, kappa: f64, mode: &ModeData, q: &OscillatoryQuadrature) -> Result<(Complex64, Complex64)> {
    let k = mode.k;
    if k == 0 {
        return Err(Error::ZeroMode);
    }
    let (a, b) = mode.profile.support();
    let mut pieces = vec![(a, b)];
    if r > a && r < b {
        pieces = vec![(a, r), (r, b)];
    }
    let (gx, gw) = gauss_legendre(q.order);
    let mut psi = Complex64::default();
    let mut dpsi = Complex64::default();
    let mut panels = 0usize;
    for (lo, hi) in pieces {
        let edges = panel_edges(lo, hi, k, kappa, t, q);
        panels += edges.len() - 1;
        if panels > q.max_panels {
            // panels scale linearly with t, so this is the largest resolvable time
            let t_max = t * q.max_panels as f64 / panels as f64;
            return Err(Error::UnresolvedOscillation { t, t_max });
        }
        for w in edges.windows(2) {
            let (c, h) = (0.5 * (w[0] + w[1]), 0.5 * (w[1] - w[0]));
            for (x, wt) in gx.iter().zip(&gw) {
                let rho = c + h * x;
                let lab = mode.value(rho) * Complex64::from_polar(1.0, -(k as f64) * rotation_rate(kappa, rho) * t);
                psi += lab * (wt * h * green_kernel(k, r, rho)?);
                dpsi += lab * (wt * h * green_kernel_dr(k, r, rho)?);
            }
        }
    }
    Ok((psi, dpsi))
}

/// `t0 · ratio^i` for every `i` with the value at most `t1`.
pub fn geometric_ladder(t0: f64, t1: f64, ratio: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut t = t0;
    while t <= t1 * (1.0 + 1e-12) {
        out.push(t);
        t *= ratio;
    }
    out
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OracleSpec {
    pub kappa: f64,
    pub modes: Vec<ModeData>,
    pub ladder: Vec<f64>,
    /// Radii over which suprema are taken.
    pub radii: Vec<f64>,
    pub quadrature: OscillatoryQuadrature,
    pub fit_window: (f64, f64),
}

impl OracleSpec {
    /// Unit Gaussian-like bump in mode 1 on `[0.8, 1.2]`, `κ = 1`.
    pub fn reference() -> Self {
        Self {
            kappa: 1.0,
            modes: vec![ModeData { k: 1, coeff: [1.0, 0.0], profile: RadialProfile::Bump { lo: 0.8, hi: 1.2 } }],
            ladder: geometric_ladder(1.0, 1000.0, 2f64.powf(0.25)),
            radii: (0..=150).map(|i| 0.5 + 1.5 * i as f64 / 150.0).collect(),
            quadrature: OscillatoryQuadrature::default(),
            fit_window: (20.0, 500.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0) || self.ladder.is_empty() || self.radii.is_empty() {
            return Err(Error::InvalidParams("oracle needs κ > 0, a time ladder and radii".into()));
        }
        if self.radii.iter().any(|r| !(*r > 0.0)) || self.ladder.iter().any(|t| !(*t >= 0.0)) {
            return Err(Error::InvalidParams("radii must be positive and times non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct OracleRow {
    pub t: f64,
    /// `sup_r |ψ_k|` of the lowest non-zero mode.
    pub sup_psi: f64,
    pub sup_dpsi: f64,
    /// `sup_{θ,r} |u_r|` of the reconstructed field.
    pub sup_u_r: f64,
    /// `sup_{θ,r} |u_θ − ⟨u_θ⟩|`.
    pub sup_u_theta: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleSlopes {
    pub psi: SlopeFit,
    pub dpsi: SlopeFit,
    pub u_r: SlopeFit,
    pub u_theta: SlopeFit,
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleReport {
    pub kappa: f64,
    pub mode: i64,
    pub fit_window: (f64, f64),
    pub series: Vec<OracleRow>,
    /// `None` when no mode other than k = 0 is present.
    pub slopes: Option<OracleSlopes>,
}

pub fn oracle_decay_report(spec: &OracleSpec) -> Result<OracleReport> {
    spec.validate()?;
    let active: Vec<&ModeData> = spec.modes.iter().filter(|m| m.k != 0).collect();
    let lead = active.iter().map(|m| m.k.abs()).min().unwrap_or(0);
    let series: Vec<OracleRow> = spec
        .ladder
        .par_iter()
        .map(|&t| {
            let mut row = OracleRow { t, ..Default::default() };
            for &r in &spec.radii {
                let mut psi_lead = 0.0_f64;
                let mut dpsi_lead = 0.0_f64;
                let mut ur = 0.0;
                let mut ut = 0.0;
                for m in &active {
                    let (psi, dpsi) = linear_stream_mode(t, r, spec.kappa, m, &spec.quadrature)?;
                    if m.k.abs() == lead {
                        psi_lead += psi.norm();
                        dpsi_lead += dpsi.norm();
                    }
                    // the bound is attained for a single mode
                    ur += 2.0 * m.k.abs() as f64 * psi.norm() / r;
                    ut += 2.0 * dpsi.norm();
                }
                row.sup_psi = row.sup_psi.max(psi_lead);
                row.sup_dpsi = row.sup_dpsi.max(dpsi_lead);
                row.sup_u_r = row.sup_u_r.max(ur);
                row.sup_u_theta = row.sup_u_theta.max(ut);
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let slopes = if active.is_empty() {
        None
    } else {
        let fit = |f: fn(&OracleRow) -> f64| decay_fit(&series.iter().map(|r| (r.t, f(r))).collect::<Vec<_>>(), spec.fit_window);
        Some(OracleSlopes { psi: fit(|r| r.sup_psi)?, dpsi: fit(|r| r.sup_dpsi)?, u_r: fit(|r| r.sup_u_r)?, u_theta: fit(|r| r.sup_u_theta)? })
    };
    Ok(OracleReport { kappa: spec.kappa, mode: lead, fit_window: spec.fit_window, series, slopes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::poisson::solve_stream_mode;

    fn bump_mode() -> ModeData {
        ModeData { k: 1, coeff: [1.0, 0.0], profile: RadialProfile::Bump { lo: 0.8, hi: 1.2 } }
    }

    #[test]
    fn vorticity_transport() {
        let m = [ModeData { k: 1, coeff: [0.5, 0.0], profile: RadialProfile::Plateau { lo: 0.5, hi: 2.0, ramp: 0.6 } }];
        // plateau value 1, so ω_0 = cos θ at r = 1.25
        let r = 1.25;
        assert!((linear_vorticity(0.0, 0.3, r, 1.0, &m) - 0.3f64.cos()).abs() < 1e-15);
        let kappa = 2.0 * PI;
        let r1 = [ModeData { k: 1, coeff: [0.5, 0.0], profile: RadialProfile::Plateau { lo: 0.1, hi: 3.0, ramp: 0.5 } }];
        for th in [0.0, 0.7, 2.0] {
            assert!((linear_vorticity(PI, th, 1.0, kappa, &r1) + th.cos()).abs() < 1e-14);
        }
        let radial = [ModeData { k: 0, coeff: [1.0, 0.0], profile: RadialProfile::Bump { lo: 0.5, hi: 2.0 } }];
        assert_eq!(linear_vorticity(0.0, 1.0, 1.1, 1.0, &radial), linear_vorticity(37.0, 1.0, 1.1, 1.0, &radial));
    }

    #[test]
    fn static_limit_matches_grid_solver() {
        let g = Grid::new(4, 1024, 0.05, 4.0, 1.0).unwrap();
        let m = bump_mode();
        let w: Vec<Complex64> = g.radii().iter().map(|&r| m.value(r)).collect();
        let psi = solve_stream_mode(&g, 1, &w).unwrap();
        let q = OscillatoryQuadrature::default();
        for j in (0..g.n_r).step_by(37) {
            let (p, _) = linear_stream_mode(0.0, g.r(j), 1.0, &m, &q).unwrap();
            assert!((p - psi[j]).norm() < 1e-6 * psi.iter().map(|c| c.norm()).fold(0.0, f64::max));
        }
    }

    #[test]
    fn refinement_agrees() {
        let m = bump_mode();
        let coarse = OscillatoryQuadrature::default();
        let fine = OscillatoryQuadrature { panel_fraction: 0.125, order: 24, ..coarse };
        for t in [10.0, 200.0, 1000.0] {
            let (a, da) = linear_stream_mode(t, 2.0, 1.0, &m, &coarse).unwrap();
            let (b, db) = linear_stream_mode(t, 2.0, 1.0, &m, &fine).unwrap();
            assert!((a - b).norm() <= 1e-8 * b.norm(), "t = {t}");
            assert!((da - db).norm() <= 1e-8 * db.norm());
        }
        let (early, _) = linear_stream_mode(10.0, 2.0, 1.0, &m, &coarse).unwrap();
        let (late, _) = linear_stream_mode(1000.0, 2.0, 1.0, &m, &coarse).unwrap();
        assert!(late.norm() < 0.01 * early.norm(), "{} {}", early.norm(), late.norm());
    }

    #[test]
    fn zero_data_and_budget() {
        let zero = ModeData { k: 2, coeff: [0.0, 0.0], profile: RadialProfile::Bump { lo: 0.8, hi: 1.2 } };
        let q = OscillatoryQuadrature::default();
        assert_eq!(linear_stream_mode(5.0, 1.0, 1.0, &zero, &q).unwrap().0, Complex64::default());
        let tight = OscillatoryQuadrature { max_panels: 10, ..q };
        match linear_stream_mode(1000.0, 1.0, 1.0, &bump_mode(), &tight) {
            Err(Error::UnresolvedOscillation { t, t_max }) => assert!(t_max < t),
            other => panic!("expected an unresolved-oscillation error, got {other:?}"),
        }
    }

    #[test]
    fn radial_data_reports_nothing() {
        let mut spec = OracleSpec::reference();
        spec.modes = vec![ModeData { k: 0, coeff: [1.0, 0.0], profile: RadialProfile::Bump { lo: 0.8, hi: 1.2 } }];
        spec.ladder = vec![1.0, 2.0];
        let rep = oracle_decay_report(&spec).unwrap();
        assert!(rep.slopes.is_none());
        assert!(rep.series.iter().all(|r| r.sup_psi == 0.0 && r.sup_u_r == 0.0));
    }
}
