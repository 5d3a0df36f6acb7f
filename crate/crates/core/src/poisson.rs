//! Stream function from vorticity, one angular mode at a time.
//!
//! For k ≠ 0 the mode equation `ψ'' + ψ'/r − k²ψ/r² = ω_k` is inverted with
//! the explicit Green kernel. The kernel is split into its interior and
//! exterior branches so every mode costs O(n_r): the two partial sums are
//! carried across nodes by the factors `(r_{i-1}/r_i)^{|k|}` and
//! `(r_i/r_{i+1})^{|k|}`, evaluated as `exp(|k| ln(·))` so that no power of a
//! radius ever leaves the unit interval and nothing overflows for large |k|.

use std::f64::consts::PI;

use log::warn;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{diff_profile, radial_derivative, Grid, PolarField};
use crate::radial::{self, interp_in_cell, stencil_start, unit_rule, MAX_RULE, STENCIL};

/// Green function of `∂_r² + ∂_r/r − k²/r²` on (0, ∞).
pub fn green_kernel(k: i64, r: f64, rho: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::ZeroMode);
    }
    let ka = k.unsigned_abs() as f64;
    let ratio = if r < rho { r / rho } else { rho / r };
    Ok(-(rho / (2.0 * ka)) * (ka * ratio.ln()).exp())
}

/// `∂_r G_k(r, ρ)` away from the diagonal.
pub fn green_kernel_dr(k: i64, r: f64, rho: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::ZeroMode);
    }
    let ka = k.unsigned_abs() as f64;
    Ok(if r < rho {
        -(rho / (2.0 * r)) * (ka * (r / rho).ln()).exp()
    } else {
        (rho / (2.0 * r)) * (ka * (rho / r).ln()).exp()
    })
}

fn check_support(omega_k: &[Complex64], k: i64) {
    let n = omega_k.len();
    let edge = omega_k[..2].iter().chain(&omega_k[n - 2..]).any(|c| c.norm() > 0.0);
    if edge {
        warn!("mode {k}: vorticity touches the radial grid boundary; Green solve truncates it");
    }
}

/// Trapezoid Green-kernel solve for one mode with the Euler-Maclaurin end
/// corrections at the kernel's diagonal kink (terms h²/12 and h⁴/720).
pub fn solve_stream_mode(grid: &Grid, k: i64, omega_k: &[Complex64]) -> Result<Vec<Complex64>> {
    if k == 0 {
        return Err(Error::ZeroMode);
    }
    if omega_k.len() != grid.n_r {
        return Err(Error::DimensionMismatch { expected: grid.n_r, got: omega_k.len() });
    }
    check_support(omega_k, k);
    let n = grid.n_r;
    let h = grid.h();
    let ka = k.unsigned_abs() as f64;
    let r = grid.radii();
    let wts = |j: usize| if j == 0 || j == n - 1 { 0.5 * h } else { h };

    let mut inner = vec![Complex64::default(); n];
    let mut acc = Complex64::default();
    for i in 0..n {
        if i > 0 {
            acc *= (ka * (r[i - 1] / r[i]).ln()).exp();
        }
        acc += omega_k[i] * (wts(i) * r[i]);
        inner[i] = acc;
    }
    let mut outer = vec![Complex64::default(); n];
    let mut acc = Complex64::default();
    for i in (0..n).rev() {
        if i < n - 1 {
            acc *= (ka * (r[i] / r[i + 1]).ln()).exp();
        }
        acc += omega_k[i] * (wts(i) * r[i]);
        outer[i] = acc;
    }

    let (d1, d2) = if n >= 9 {
        (diff_profile(omega_k, h, 1), diff_profile(omega_k, h, 2))
    } else {
        (vec![Complex64::default(); n], vec![Complex64::default(); n])
    };
    let psi = (0..n)
        .map(|i| {
            let mut v = -(inner[i] + outer[i] - omega_k[i] * (wts(i) * r[i])) / (2.0 * ka);
            if i > 0 && i < n - 1 {
                let j3 = d2[i] * 3.0 + d1[i] * (3.0 / r[i]) + omega_k[i] * ((ka * ka - 1.0) / (r[i] * r[i]));
                v += omega_k[i] * (h * h / 12.0) - j3 * (h.powi(4) / 720.0);
            }
            v
        })
        .collect();
    Ok(psi)
}

/// ⟨∂_rψ⟩(r) = (1/r) ∫_{r_min}^r ρ⟨ω⟩(ρ) dρ.
pub fn mean_flow(grid: &Grid, omega_0: &[f64]) -> Vec<f64> {
    let r = grid.radii();
    let integrand: Vec<f64> = omega_0.iter().zip(&r).map(|(w, r)| w * r).collect();
    radial::cumulative(&integrand, grid).iter().zip(&r).map(|(c, r)| c / r).collect()
}

#[derive(Clone, Debug)]
pub struct StreamSolution {
    pub psi: PolarField,
    pub u_theta: PolarField,
    pub u_r: PolarField,
}

/// `u_θ = ∂_rψ`, `u_r = −(1/r)∂_θψ`.
pub fn velocity(psi: &PolarField) -> Result<(PolarField, PolarField)> {
    let u_theta = radial_derivative(psi, 1)?;
    Ok((u_theta, radial_velocity(psi)))
}

pub fn radial_velocity(psi: &PolarField) -> PolarField {
    let grid = psi.grid;
    let n = grid.n_r;
    let mut u_r = PolarField::zeros(&grid);
    for k in 1..grid.n_modes() {
        let ik = Complex64::new(0.0, k as f64);
        for j in 0..n {
            u_r.modes[k * n + j] = -ik * psi.modes[k * n + j] / grid.r(j);
        }
    }
    u_r
}

/// ψ₀ with ψ₀(r_min) = 0 from the mean-flow profile.
fn mean_stream(grid: &Grid, mean_u: &[f64]) -> Vec<f64> {
    radial::cumulative(mean_u, grid)
}

/// Static solve of every mode with the trapezoid kernel sums.
pub fn solve_stream(omega: &PolarField) -> Result<StreamSolution> {
    let grid = omega.grid;
    let n = grid.n_r;
    let mut psi = PolarField::zeros(&grid);
    let solved: Vec<Result<Vec<Complex64>>> = (1..grid.n_modes())
        .into_par_iter()
        .map(|k| solve_stream_mode(&grid, k as i64, omega.mode(k)))
        .collect();
    for (k, m) in solved.into_iter().enumerate() {
        psi.mode_mut(k + 1).copy_from_slice(&m?);
    }
    let mu = mean_flow(&grid, &omega.mean());
    for (j, v) in mean_stream(&grid, &mu).into_iter().enumerate() {
        psi.modes[j] = Complex64::new(v, 0.0);
    }
    let mut u_theta = radial_derivative(&psi, 1)?;
    for (j, v) in mu.iter().enumerate() {
        u_theta.modes[j] = Complex64::new(*v, 0.0);
    }
    let u_r = radial_velocity(&psi);
    debug_assert_eq!(psi.modes.len(), grid.n_modes() * n);
    Ok(StreamSolution { psi, u_theta, u_r })
}

/// Stream solve for vorticity held in a co-rotating frame.
///
/// The lab-frame mode is `ω_k(ρ) = g_k(ρ) e^{−ikκτ/(2πρ²)}` with `g_k` smooth.
/// Each radial cell is integrated with a Gauss-Legendre rule on the
/// degree-5 interpolant of `g_k`, the rotation phase applied exactly at every
/// quadrature point, and the rule order raised with the phase change across
/// the cell. ∂_rψ is obtained by differentiating the kernel under the integral.
#[derive(Clone, Debug)]
pub struct RotatingStream {
    pub psi: PolarField,
    pub dpsi: PolarField,
    /// Largest number of sub-panels any cell needed.
    pub max_subpanels: usize,
}

/// Contributions from stencils below this fraction of the field maximum are
/// at roundoff level and are skipped.
pub const NEGLIGIBLE: f64 = 1e-15;

/// Sub-panel count and per-panel Gauss-Legendre order for a cell across
/// which the phase changes by `dphi` radians.
pub fn cell_rule(dphi: f64) -> (usize, usize) {
    let per = (MAX_RULE - 8) as f64 / 0.75;
    let nsub = (dphi / per).ceil().max(1.0) as usize;
    (nsub, 8 + (0.75 * dphi / nsub as f64).ceil() as usize)
}

/// Angular velocity of the point vortex at radius `r`.
#[inline]
pub fn rotation_rate(kappa: f64, r: f64) -> f64 {
    kappa / (2.0 * PI * r * r)
}

/// Visits the quadrature nodes of cell `c` for mode `k`, passing the radius,
/// the quadrature weight and the lab-frame value `g_k(ρ) e^{−ikκτ/(2πρ²)}`.
/// Returns the number of sub-panels used.
pub fn visit_cell(
    gk: &[Complex64],
    grid: &Grid,
    c: usize,
    k: usize,
    kappa: f64,
    tau: f64,
    mut f: impl FnMut(f64, f64, Complex64),
) -> usize {
    let h = grid.h();
    let (r0, r1) = (grid.r(c), grid.r(c + 1));
    let ka = k as f64;
    let dphi = ka * tau.abs() * (rotation_rate(kappa, r0) - rotation_rate(kappa, r1)).abs();
    let (nsub, q) = cell_rule(dphi);
    let (xq, wq) = unit_rule(q);
    let hs = h / nsub as f64;
    for sub in 0..nsub {
        let a = r0 + sub as f64 * hs;
        for (x, w) in xq.iter().zip(wq) {
            let rho = a + x * hs;
            let amp = interp_in_cell(gk, grid, c, rho);
            let phase = Complex64::from_polar(1.0, -ka * rotation_rate(kappa, rho) * tau);
            f(rho, w * hs, amp * phase);
        }
    }
    nsub
}

fn cell_active(gk: &[Complex64], n: usize, c: usize, floor: f64) -> bool {
    let s = stencil_start(c, n);
    gk[s..s + STENCIL].iter().any(|v| v.norm() > floor)
}

fn field_max(g: &PolarField) -> f64 {
    g.modes.iter().fold(0.0_f64, |m, c| m.max(c.norm()))
}

/// `∫ weight(ρ) ω_k(ρ) dρ` for a mode held in the co-rotating frame.
pub fn phased_integral(g: &PolarField, k: usize, kappa: f64, tau: f64, weight: impl Fn(f64) -> f64) -> Complex64 {
    let grid = g.grid;
    let n = grid.n_r;
    let gk = g.mode(k);
    let floor = NEGLIGIBLE * field_max(g);
    let mut total = Complex64::default();
    for c in 0..n - 1 {
        if !cell_active(gk, n, c, floor) {
            continue;
        }
        visit_cell(gk, &grid, c, k, kappa, tau, |rho, w, v| total += v * (w * weight(rho)));
    }
    total
}

pub fn solve_stream_rotating(g: &PolarField, kappa: f64, tau: f64) -> RotatingStream {
    let grid = g.grid;
    let n = grid.n_r;
    let r = grid.radii();
    let gmax = field_max(g);
    let floor = NEGLIGIBLE * gmax;

    let per_mode: Vec<Option<(Vec<Complex64>, Vec<Complex64>, usize)>> = (1..grid.n_modes())
        .into_par_iter()
        .map(|k| {
            let gk = g.mode(k);
            if gmax == 0.0 || gk.iter().all(|v| v.norm() <= floor) {
                return None;
            }
            let ka = k as f64;
            let mut lcell = vec![Complex64::default(); n];
            let mut rcell = vec![Complex64::default(); n];
            let mut most = 0;
            for c in 0..n - 1 {
                if !cell_active(gk, n, c, floor) {
                    continue;
                }
                let (mut lsum, mut rsum) = (Complex64::default(), Complex64::default());
                let (lo, hi) = (r[c], r[c + 1]);
                let used = visit_cell(gk, &grid, c, k, kappa, tau, |rho, w, v| {
                    let f = v * (w * rho);
                    lsum += f * (ka * (rho / hi).ln()).exp();
                    rsum += f * (ka * (lo / rho).ln()).exp();
                });
                most = most.max(used);
                lcell[c] = lsum;
                rcell[c] = rsum;
            }
            let mut left = vec![Complex64::default(); n];
            for i in 1..n {
                left[i] = left[i - 1] * (ka * (r[i - 1] / r[i]).ln()).exp() + lcell[i - 1];
            }
            let mut right = vec![Complex64::default(); n];
            for i in (0..n - 1).rev() {
                right[i] = right[i + 1] * (ka * (r[i] / r[i + 1]).ln()).exp() + rcell[i];
            }
            let psi: Vec<Complex64> = (0..n).map(|i| -(left[i] + right[i]) / (2.0 * ka)).collect();
            let dpsi: Vec<Complex64> = (0..n).map(|i| (left[i] - right[i]) / (2.0 * r[i])).collect();
            Some((psi, dpsi, most))
        })
        .collect();

    let mut psi = PolarField::zeros(&grid);
    let mut dpsi = PolarField::zeros(&grid);
    let mut max_subpanels = 0;
    for (k, m) in per_mode.into_iter().enumerate() {
        if let Some((p, d, u)) = m {
            psi.mode_mut(k + 1).copy_from_slice(&p);
            dpsi.mode_mut(k + 1).copy_from_slice(&d);
            max_subpanels = max_subpanels.max(u);
        }
    }
    let mu = mean_flow(&grid, &g.mean());
    for (j, v) in mean_stream(&grid, &mu).into_iter().enumerate() {
        psi.modes[j] = Complex64::new(v, 0.0);
        dpsi.modes[j] = Complex64::new(mu[j], 0.0);
    }
    RotatingStream { psi, dpsi, max_subpanels }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gevrey::bump_psi_a;

    #[test]
    fn kernel_hand_values() {
        assert!((green_kernel(1, 1.0, 2.0).unwrap() + 0.5).abs() < 1e-15);
        assert!((green_kernel(1, 2.0, 1.0).unwrap() + 0.25).abs() < 1e-15);
        assert!((green_kernel(2, 1.0, 1.0).unwrap() + 0.25).abs() < 1e-15);
        assert!(matches!(green_kernel(0, 1.0, 1.0), Err(Error::ZeroMode)));
        // branches agree on the diagonal
        let a = green_kernel(5, 1.3, 1.3 + 1e-13).unwrap();
        let b = green_kernel(5, 1.3 + 1e-13, 1.3).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn kernel_derivative_matches_difference_quotient() {
        for k in [1i64, 3, -4] {
            for (r, rho) in [(0.7, 1.2), (1.9, 1.1)] {
                let e = 1e-6;
                let fd = (green_kernel(k, r + e, rho).unwrap() - green_kernel(k, r - e, rho).unwrap()) / (2.0 * e);
                assert!((fd - green_kernel_dr(k, r, rho).unwrap()).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn zero_vorticity_zero_stream() {
        let g = Grid::new(16, 64, 0.1, 4.0, 2.0 / 3.0).unwrap();
        let psi = solve_stream_mode(&g, 3, &vec![Complex64::default(); 64]).unwrap();
        assert!(psi.iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn linearity_and_conjugation() {
        let g = Grid::new(16, 128, 0.1, 4.0, 2.0 / 3.0).unwrap();
        let w: Vec<Complex64> = g
            .radii()
            .iter()
            .map(|&r| Complex64::new(bump_psi_a(1.0, r - 1.0), 0.3 * bump_psi_a(1.0, (r - 0.8) / 1.5)))
            .collect();
        let two: Vec<Complex64> = w.iter().map(|c| c * 2.0).collect();
        let a = solve_stream_mode(&g, 2, &w).unwrap();
        let b = solve_stream_mode(&g, 2, &two).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(*x * 2.0, *y);
        }
        let conj: Vec<Complex64> = w.iter().map(|c| c.conj()).collect();
        let c = solve_stream_mode(&g, -2, &conj).unwrap();
        for (x, y) in a.iter().zip(&c) {
            assert!((x.conj() - y).norm() < 1e-15);
        }
    }

    #[test]
    fn mean_flow_hand_integral() {
        let g = Grid::new(8, 2001, 0.05, 4.05, 1.0).unwrap();
        // indicator of [1, 2] is not smooth; compare at r = 3 with a loose bound
        let w: Vec<f64> = g.radii().iter().map(|&r| if (1.0..=2.0).contains(&r) { 1.0 } else { 0.0 }).collect();
        let m = mean_flow(&g, &w);
        let j = ((3.0 - g.r_min) / g.h()).round() as usize;
        assert!((m[j] - 0.5).abs() < 5e-3, "{}", m[j]);
        assert!(mean_flow(&g, &vec![0.0; g.n_r]).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rotating_solver_reduces_to_static_at_tau_zero() {
        let g = Grid::new(16, 512, 0.05, 4.0, 2.0 / 3.0).unwrap();
        let field = PolarField::from_modes_fn(&g, |k, r| {
            if k == 2 {
                Complex64::new(bump_psi_a(1.0, (r - 0.5) / 1.5), 0.0)
            } else {
                Complex64::default()
            }
        });
        let rot = solve_stream_rotating(&field, 1.0, 0.0);
        let stat = solve_stream_mode(&g, 2, field.mode(2)).unwrap();
        let scale = stat.iter().fold(0.0_f64, |m, c| m.max(c.norm()));
        for (a, b) in rot.psi.mode(2).iter().zip(&stat) {
            assert!((a - b).norm() < 1e-6 * scale);
        }
    }
}
