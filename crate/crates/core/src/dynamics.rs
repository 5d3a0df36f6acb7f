//! Perturbation vorticity around a moving point vortex, in vortex-centred
//! polar coordinates.
//!
//! The state keeps the vorticity in the frame co-rotating with the vortex's
//! differential rotation: `g_k(r) = ω_k(r) e^{+ikκt/(2πr²)}`. Under the linear
//! dynamics `g` is constant, so the stiff rotation is exact and only the
//! perturbation's self-advection and the drift coupling are time-stepped.
//! A step is a Strang splitting: half rotation, an RK4 step of the remaining
//! terms with the rotation frozen at the midpoint, half rotation.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gevrey::ramped_plateau;
use crate::grid::{
    diff_profile, radial_derivative, to_modes, to_physical_unchecked, Grid, PhysicalField, PolarField,
};
use crate::poisson::{mean_flow, phased_integral, rotation_rate, solve_stream_rotating, RotatingStream, StreamSolution};
use crate::radial;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VortexState {
    pub position: [f64; 2],
    pub kappa: f64,
    pub c0: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct DynamicsOptions {
    /// Self-advection by the perturbation velocity.
    pub nonlinear: bool,
    /// Coupling to the vortex drift `P'`.
    pub drift: bool,
    /// Only angular modes that are multiples of this are evolved.
    pub symmetry: usize,
}

impl Default for DynamicsOptions {
    fn default() -> Self {
        Self { nonlinear: true, drift: true, symmetry: 1 }
    }
}

impl DynamicsOptions {
    pub fn linear() -> Self {
        Self { nonlinear: false, drift: false, symmetry: 1 }
    }
}

#[derive(Clone, Debug)]
pub struct SimState {
    pub t: f64,
    /// Co-rotating profiles `g_k`.
    pub frame: PolarField,
    pub vortex: VortexState,
    /// `Φ(t, r) = ∫_0^t ⟨∂_rψ⟩(s, r)/r ds`.
    pub mean_flow_integral: Vec<f64>,
    /// `⟨∂_rψ⟩(t, r)`.
    pub mean_flow_now: Vec<f64>,
    /// `∫_0^t ⟨ω⟩(s, r)/r ds`.
    pub mean_vorticity_integral: Vec<f64>,
}

/// `ω_k = g_k e^{∓ikκτ/(2πr²)}`; `sign = -1` maps frame to lab.
fn apply_rotation(field: &PolarField, kappa: f64, tau: f64, sign: f64) -> PolarField {
    let grid = field.grid;
    let n = grid.n_r;
    let n_modes = grid.n_modes();
    let mut out = field.clone();
    // e^{ikφ} by running products in k, one sincos per radius
    let mut phase = vec![Complex64::new(1.0, 0.0); n];
    let base: Vec<Complex64> =
        (0..n).map(|j| Complex64::from_polar(1.0, sign * rotation_rate(kappa, grid.r(j)) * tau)).collect();
    for k in 1..n_modes {
        let row = &mut out.modes[k * n..(k + 1) * n];
        for j in 0..n {
            phase[j] *= base[j];
            row[j] *= phase[j];
        }
    }
    out
}

pub fn frame_to_lab(g: &PolarField, kappa: f64, tau: f64) -> PolarField {
    apply_rotation(g, kappa, tau, -1.0)
}

pub fn lab_to_frame(omega: &PolarField, kappa: f64, tau: f64) -> PolarField {
    apply_rotation(omega, kappa, tau, 1.0)
}

/// Zeroes every mode that is not a multiple of `m`.
pub fn project_symmetry(field: &mut PolarField, m: usize) {
    if m <= 1 {
        return;
    }
    let n = field.grid.n_r;
    for k in 1..field.grid.n_modes() {
        if k % m != 0 {
            field.mode_mut(k).iter_mut().for_each(|c| *c = Complex64::default());
        }
    }
    debug_assert_eq!(field.modes.len() % n, 0);
}

/// Default ramp width of the initial radial bump.
pub const DEFAULT_RAMP: f64 = 0.6;

/// `ω'_0 = ε cos(mθ) χ(r)` with `χ` a Gevrey plateau supported in `support`.
pub fn initial_vorticity(grid: &Grid, epsilon: f64, m: usize, support: (f64, f64), ramp: f64) -> PolarField {
    PolarField::from_modes_fn(grid, |k, r| {
        let bump = ramped_plateau(support.0, support.1, ramp, r);
        let amp = if m == 0 && k == 0 {
            epsilon * bump
        } else if k == m && m > 0 {
            0.5 * epsilon * bump
        } else {
            0.0
        };
        Complex64::new(amp, 0.0)
    })
}

impl SimState {
    pub fn new(omega0: PolarField, kappa: f64, position: [f64; 2]) -> Self {
        let grid = omega0.grid;
        let c0 = mass(&omega0);
        let mean_flow_now = mean_flow(&grid, &omega0.mean());
        Self {
            t: 0.0,
            frame: omega0,
            vortex: VortexState { position, kappa, c0 },
            mean_flow_integral: vec![0.0; grid.n_r],
            mean_flow_now,
            mean_vorticity_integral: vec![0.0; grid.n_r],
        }
    }

    pub fn grid(&self) -> Grid {
        self.frame.grid
    }

    /// Lab-frame vorticity.
    pub fn omega(&self) -> PolarField {
        frame_to_lab(&self.frame, self.vortex.kappa, self.t)
    }

    pub fn stream(&self) -> RotatingStream {
        solve_stream_rotating(&self.frame, self.vortex.kappa, self.t)
    }
}

/// `2π ∫ ⟨ω⟩ r dr`.
pub fn mass(field: &PolarField) -> f64 {
    let grid = field.grid;
    let f: Vec<f64> = field.mean().iter().zip(grid.radii()).map(|(w, r)| w * r).collect();
    2.0 * PI * radial::integral(&f, &grid)
}

/// `P' = (1/2π) ∫∫ (sin θ, −cos θ) ω' dθ dr = (−∫ Im ω_1 dr, −∫ Re ω_1 dr)`.
pub fn vortex_drift(omega: &PolarField) -> [f64; 2] {
    let grid = omega.grid;
    if grid.k_max() < 1 {
        return [0.0, 0.0];
    }
    let re: Vec<f64> = omega.mode(1).iter().map(|c| c.re).collect();
    let im: Vec<f64> = omega.mode(1).iter().map(|c| c.im).collect();
    [-radial::integral(&im, &grid), -radial::integral(&re, &grid)]
}

/// Drift from co-rotating profiles, with the phase applied inside the quadrature.
pub fn vortex_drift_frame(g: &PolarField, kappa: f64, tau: f64) -> [f64; 2] {
    if g.grid.k_max() < 1 {
        return [0.0, 0.0];
    }
    let s = phased_integral(g, 1, kappa, tau, |_| 1.0);
    [-s.im, -s.re]
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Conserved {
    pub mass: f64,
    pub enstrophy: f64,
    pub moment_x: f64,
    pub moment_y: f64,
}

pub fn conserved_quantities(state: &SimState) -> Conserved {
    let grid = state.grid();
    let g = &state.frame;
    let m = mass(g);
    let r = grid.radii();
    let n = grid.n_r;
    let mut dens = vec![0.0; n];
    for k in 0..grid.n_modes() {
        let w = if k == 0 { 1.0 } else { 2.0 };
        for j in 0..n {
            dens[j] += w * g.modes[k * n + j].norm_sqr() * r[j];
        }
    }
    let enstrophy = 2.0 * PI * radial::integral(&dens, &grid);
    let first = if grid.k_max() >= 1 {
        phased_integral(g, 1, state.vortex.kappa, state.t, |rho| rho * rho)
    } else {
        Complex64::default()
    };
    let [p1, p2] = state.vortex.position;
    let kappa = state.vortex.kappa;
    Conserved {
        mass: m,
        enstrophy,
        moment_x: p1 * m + 2.0 * PI * first.re + kappa * p1,
        moment_y: p2 * m - 2.0 * PI * first.im + kappa * p2,
    }
}

fn physical(field: &PolarField) -> PhysicalField {
    to_physical_unchecked(field)
}

fn times_ik(field: &PolarField) -> PolarField {
    crate::grid::angular_derivative(field)
}

/// Combines the physical-space factors of the right-hand side, without the
/// rotation term: `(P',e_r)∂_rω + (1/r)(P',e_θ)∂_θω + (∂_θψ ∂_rω − ∂_rψ ∂_θω)/r`.
#[allow(clippy::too_many_arguments)]
fn combine(
    grid: &Grid,
    dr_omega: &PhysicalField,
    dth_omega: &PhysicalField,
    dth_psi: Option<&PhysicalField>,
    dr_psi: Option<&PhysicalField>,
    pdot: [f64; 2],
) -> PhysicalField {
    let n_r = grid.n_r;
    let mut out = PhysicalField::zeros(grid);
    out.data.par_chunks_mut(n_r).enumerate().for_each(|(i, row)| {
        let th = grid.theta(i);
        let (s, c) = th.sin_cos();
        let radial_drift = pdot[0] * c + pdot[1] * s;
        let angular_drift = -pdot[0] * s + pdot[1] * c;
        for (j, v) in row.iter_mut().enumerate() {
            let idx = i * n_r + j;
            let r = grid.r(j);
            let mut acc = radial_drift * dr_omega.data[idx] + angular_drift / r * dth_omega.data[idx];
            if let (Some(a), Some(b)) = (dth_psi, dr_psi) {
                acc += (a.data[idx] * dr_omega.data[idx] - b.data[idx] * dth_omega.data[idx]) / r;
            }
            *v = acc;
        }
    });
    out
}

/// Mean mode of the transport term written as `(1/r)∂_r(r⟨U_r ω⟩)`, with
/// `U_r = ∂_θψ/r + (P',e_r)`. The centered stencil telescopes under the
/// radial quadrature, so `∫ω dA` changes only by roundoff.
fn mean_flux_divergence(grid: &Grid, omega: &PhysicalField, dth_psi: Option<&PhysicalField>, pdot: [f64; 2]) -> Vec<f64> {
    let n_r = grid.n_r;
    let mut flux = vec![0.0; n_r];
    for i in 0..grid.n_theta {
        let (s, c) = grid.theta(i).sin_cos();
        let radial_drift = pdot[0] * c + pdot[1] * s;
        for (j, f) in flux.iter_mut().enumerate() {
            let idx = i * n_r + j;
            let r = grid.r(j);
            let u_r = radial_drift + dth_psi.map_or(0.0, |p| p.data[idx] / r);
            *f += r * u_r * omega.data[idx];
        }
    }
    flux.iter_mut().for_each(|f| *f /= grid.n_theta as f64);
    diff_profile(&flux, grid.h(), 1).iter().enumerate().map(|(j, d)| d / grid.r(j)).collect()
}

/// Full lab-frame `∂_tω'` on the grid: the right-hand side above minus the
/// rotation `(κ/2πr²)∂_θω'`, with products formed in physical space and
/// truncated to the retained modes.
pub fn rhs(omega: &PolarField, stream: &StreamSolution, pdot: [f64; 2], kappa: f64) -> Result<PolarField> {
    let grid = omega.grid;
    let dr = physical(&radial_derivative(omega, 1)?);
    let dth_field = times_ik(omega);
    let dth = physical(&dth_field);
    let dth_psi = physical(&times_ik(&stream.psi));
    let dr_psi = physical(&stream.u_theta);
    let n = combine(&grid, &dr, &dth, Some(&dth_psi), Some(&dr_psi), pdot);
    let mut out = to_modes(&grid, &n)?;
    let nr = grid.n_r;
    for k in 1..grid.n_modes() {
        for j in 0..nr {
            out.modes[k * nr + j] -= dth_field.modes[k * nr + j] * rotation_rate(kappa, grid.r(j));
        }
    }
    Ok(out)
}

/// Angular grid covering one period `2π/m`, when its retained band is
/// exactly the multiples of `m` retained by `grid`.
fn reduced_grid(grid: &Grid, m: usize) -> Option<Grid> {
    if m < 2 || grid.n_theta % m != 0 {
        return None;
    }
    let rg = Grid { n_theta: grid.n_theta / m, ..*grid };
    (rg.validate().is_ok() && rg.k_max() == grid.k_max() / m).then_some(rg)
}

/// Modes `k = m k'` of `field` as modes `k'` on the reduced grid.
fn compress(field: &PolarField, rg: &Grid, m: usize) -> PolarField {
    let n = rg.n_r;
    let mut out = PolarField::zeros(rg);
    for kp in 0..rg.n_modes() {
        out.modes[kp * n..(kp + 1) * n].copy_from_slice(field.mode(kp * m));
    }
    out
}

fn expand(field: &PolarField, grid: &Grid, m: usize) -> PolarField {
    let n = grid.n_r;
    let mut out = PolarField::zeros(grid);
    for kp in 0..field.grid.n_modes() {
        out.modes[kp * m * n..(kp * m + 1) * n].copy_from_slice(field.mode(kp));
    }
    out
}

/// Time derivative of the co-rotating profiles with the frame frozen at
/// `tau`, and the drift velocity used.
fn frame_rhs(g: &PolarField, kappa: f64, tau: f64, opts: &DynamicsOptions) -> Result<(PolarField, [f64; 2])> {
    let grid = g.grid;
    let n = grid.n_r;
    let h = grid.h();
    let pdot = if opts.drift { vortex_drift_frame(g, kappa, tau) } else { [0.0, 0.0] };
    if !opts.nonlinear && pdot == [0.0, 0.0] {
        return Ok((PolarField::zeros(&grid), pdot));
    }
    // lab-frame ω and ∂_rω, the latter differentiating the phase exactly
    let omega = frame_to_lab(g, kappa, tau);
    let mut dr_omega = PolarField::zeros(&grid);
    let rows: Vec<(usize, Vec<Complex64>)> = (0..grid.n_modes())
        .into_par_iter()
        .map(|k| {
            let gk = g.mode(k);
            if gk.iter().all(|c| c.norm() == 0.0) {
                return (k, vec![Complex64::default(); n]);
            }
            let dg = diff_profile(gk, h, 1);
            let row = (0..n)
                .map(|j| {
                    let r = grid.r(j);
                    let ka = k as f64;
                    let d_rate = -kappa / (PI * r * r * r);
                    let phase = Complex64::from_polar(1.0, -ka * rotation_rate(kappa, r) * tau);
                    (dg[j] - Complex64::new(0.0, ka * d_rate * tau) * gk[j]) * phase
                })
                .collect();
            (k, row)
        })
        .collect();
    for (k, row) in rows {
        dr_omega.mode_mut(k).copy_from_slice(&row);
    }
    let stream = if opts.nonlinear { Some(solve_stream_rotating(g, kappa, tau)) } else { None };
    let mut spectral = vec![dr_omega, times_ik(&omega), omega];
    if let Some(st) = &stream {
        spectral.push(times_ik(&st.psi));
        spectral.push(st.dpsi.clone());
    }
    // with m-fold symmetry and no drift the products live on a 2π/m period
    let reduced = reduced_grid(&grid, opts.symmetry).filter(|_| pdot == [0.0, 0.0]);
    let work_grid = reduced.unwrap_or(grid);
    let phys: Vec<PhysicalField> = spectral
        .iter()
        .map(|f| match reduced {
            Some(rg) => physical(&compress(f, &rg, opts.symmetry)),
            None => physical(f),
        })
        .collect();
    let n_phys = combine(&work_grid, &phys[0], &phys[1], phys.get(3), phys.get(4), pdot);
    let product = to_modes(&work_grid, &n_phys)?;
    let mut product = match reduced {
        Some(_) => expand(&product, &grid, opts.symmetry),
        None => product,
    };
    let mean = mean_flux_divergence(&work_grid, &phys[2], phys.get(3), pdot);
    product.mode_mut(0).iter_mut().zip(mean).for_each(|(c, d)| *c = Complex64::new(d, 0.0));
    let mut out = lab_to_frame(&product, kappa, tau);
    project_symmetry(&mut out, opts.symmetry);
    Ok((out, pdot))
}

/// `max_θ |f| ≤ |f_0| + 2 Σ_k |f_k|`, maximized over radii.
fn sup_bound(field: &PolarField) -> f64 {
    let n = field.grid.n_r;
    (0..n)
        .map(|j| (0..field.grid.n_modes()).map(|k| field.modes[k * n + j].norm() * if k == 0 { 1.0 } else { 2.0 }).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Largest stable step for the explicitly integrated terms, using upper
/// bounds on the velocity maxima.
pub fn stable_dt(state: &SimState, stream: &RotatingStream, pdot: [f64; 2]) -> f64 {
    let grid = state.grid();
    let speed = pdot[0].hypot(pdot[1]);
    let max_ur = sup_bound(&crate::poisson::radial_velocity(&stream.psi)) + speed;
    let max_ut = sup_bound(&stream.dpsi) + speed;
    let a = if max_ur > 0.0 { grid.h() / max_ur } else { f64::INFINITY };
    let b = if max_ut > 0.0 { grid.dtheta() * grid.r_min / max_ut } else { f64::INFINITY };
    0.5 * a.min(b)
}

/// One Strang step.
pub fn step(state: &SimState, dt: f64, opts: &DynamicsOptions) -> Result<SimState> {
    let kappa = state.vortex.kappa;
    let grid = state.grid();
    let g0 = &state.frame;
    let tau = state.t + 0.5 * dt;

    if opts.nonlinear || opts.drift {
        let stream = state.stream();
        let pdot = if opts.drift { vortex_drift_frame(g0, kappa, state.t) } else { [0.0, 0.0] };
        let limit = stable_dt(state, &stream, pdot);
        if dt > limit {
            return Err(Error::Cfl { dt, stable_dt: limit });
        }
    }

    let (k1, p1) = frame_rhs(g0, kappa, tau, opts)?;
    let g1 = g0.add_scaled(&k1, 0.5 * dt);
    let (k2, p2) = frame_rhs(&g1, kappa, tau, opts)?;
    let g2 = g0.add_scaled(&k2, 0.5 * dt);
    let (k3, p3) = frame_rhs(&g2, kappa, tau, opts)?;
    let g3 = g0.add_scaled(&k3, dt);
    let (k4, p4) = frame_rhs(&g3, kappa, tau, opts)?;
    let mut frame = g0.clone();
    for (i, c) in frame.modes.iter_mut().enumerate() {
        *c += (k1.modes[i] + (k2.modes[i] + k3.modes[i]) * 2.0 + k4.modes[i]) * (dt / 6.0);
    }
    project_symmetry(&mut frame, opts.symmetry);
    let mut vortex = state.vortex;
    for d in 0..2 {
        vortex.position[d] += dt / 6.0 * (p1[d] + 2.0 * p2[d] + 2.0 * p3[d] + p4[d]);
    }

    let mean_flow_now = mean_flow(&grid, &frame.mean());
    let mean_flow_integral = state
        .mean_flow_integral
        .iter()
        .zip(&state.mean_flow_now)
        .zip(&mean_flow_now)
        .enumerate()
        .map(|(j, ((acc, a), b))| acc + 0.5 * dt * (a + b) / grid.r(j))
        .collect();
    let (w0, w1) = (state.frame.mean(), frame.mean());
    let mean_vorticity_integral = state
        .mean_vorticity_integral
        .iter()
        .enumerate()
        .map(|(j, acc)| acc + 0.5 * dt * (w0[j] + w1[j]) / grid.r(j))
        .collect();
    let t = state.t + dt;
    if !frame.is_finite() {
        return Err(Error::BlowUp { t, what: "non-finite vorticity".into() });
    }
    Ok(SimState { t, frame, vortex, mean_flow_integral, mean_flow_now, mean_vorticity_integral })
}

/// Radii where the vorticity exceeds `rel · max|ω|`, as `(first, last)`.
pub fn support_extent(state: &SimState, rel: f64) -> Option<(f64, f64)> {
    let grid = state.grid();
    let n = grid.n_r;
    let amp: Vec<f64> = (0..n)
        .map(|j| (0..grid.n_modes()).map(|k| state.frame.modes[k * n + j].norm()).sum())
        .collect();
    let top = amp.iter().cloned().fold(0.0, f64::max);
    if top == 0.0 {
        return None;
    }
    let first = amp.iter().position(|&a| a > rel * top)?;
    let last = amp.iter().rposition(|&a| a > rel * top)?;
    Some((grid.r(first), grid.r(last)))
}

pub fn check_support(state: &SimState, lo: f64, hi: f64) -> Result<()> {
    if let Some((a, b)) = support_extent(state, 1e-12) {
        if a < lo || b > hi {
            return Err(Error::SupportViolation { t: state.t, lo, hi });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid() -> Grid {
        Grid::new(32, 256, 0.05, 4.0, 2.0 / 3.0).unwrap()
    }

    fn bump(r: f64) -> f64 {
        ramped_plateau(0.5, 2.0, DEFAULT_RAMP, r)
    }

    fn unit_mass_bump() -> (Vec<f64>, f64) {
        let g = grid();
        let vals: Vec<f64> = g.radii().iter().map(|&r| bump(r)).collect();
        let m = radial::integral(&vals, &g);
        (vals, m)
    }

    #[test]
    fn drift_of_radial_field_vanishes() {
        let g = grid();
        let w = PolarField::from_modes_fn(&g, |k, r| Complex64::new(if k == 0 { bump(r) } else { 0.0 }, 0.0));
        assert_eq!(vortex_drift(&w), [0.0, 0.0]);
    }

    #[test]
    fn drift_of_dipoles() {
        let g = grid();
        let (_, m) = unit_mass_bump();
        let eps = 1e-3;
        let cos = PolarField::from_modes_fn(&g, |k, r| Complex64::new(if k == 1 { 0.5 * eps * bump(r) / m } else { 0.0 }, 0.0));
        let p = vortex_drift(&cos);
        assert!(p[0].abs() < 1e-18);
        assert_relative_eq!(p[1], -eps / 2.0, max_relative = 1e-12);
        let sin = PolarField::from_modes_fn(&g, |k, r| Complex64::new(0.0, if k == 1 { -0.5 * eps * bump(r) / m } else { 0.0 }));
        let p = vortex_drift(&sin);
        assert_relative_eq!(p[0], eps / 2.0, max_relative = 1e-12);
        assert!(p[1].abs() < 1e-18);
    }

    #[test]
    fn annulus_mass() {
        let g = Grid::new(8, 2049, 0.0 + 0.5, 2.5, 1.0).unwrap();
        let w = PolarField::from_modes_fn(&g, |k, r| Complex64::new(if k == 0 && (1.0..=2.0).contains(&r) { 1.0 } else { 0.0 }, 0.0));
        // the indicator is discontinuous, so the quadrature is only first order here
        assert!((mass(&w) - 3.0 * PI).abs() < 1e-2);
    }

    #[test]
    fn zero_state_is_fixed_point() {
        let g = grid();
        let s = SimState::new(PolarField::zeros(&g), 1.0, [0.0, 0.0]);
        let s2 = step(&s, 0.1, &DynamicsOptions::default()).unwrap();
        assert!(s2.frame.modes.iter().all(|c| c.norm() == 0.0));
        assert_eq!(s2.vortex.position, [0.0, 0.0]);
        let c = conserved_quantities(&s2);
        assert_eq!((c.mass, c.enstrophy, c.moment_x, c.moment_y), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn radial_state_rhs_is_zero() {
        let g = grid();
        let w = PolarField::from_modes_fn(&g, |k, r| Complex64::new(if k == 0 { bump(r) } else { 0.0 }, 0.0));
        let stream = crate::poisson::solve_stream(&w).unwrap();
        let out = rhs(&w, &stream, [0.0, 0.0], 1.0).unwrap();
        assert!(out.modes.iter().all(|c| c.norm() < 1e-13));
    }

    #[test]
    fn rotation_term_of_single_harmonic() {
        let g = grid();
        let w = PolarField::from_modes_fn(&g, |k, r| Complex64::new(if k == 1 { 0.5 * bump(r) } else { 0.0 }, 0.0));
        let zero = StreamSolution { psi: PolarField::zeros(&g), u_theta: PolarField::zeros(&g), u_r: PolarField::zeros(&g) };
        let kappa = 2.0;
        let out = rhs(&w, &zero, [0.0, 0.0], kappa).unwrap();
        // (κ/2πr²) sin θ g(r): mode 1 of sin θ is −i/2
        for j in 0..g.n_r {
            let r = g.r(j);
            let expect = Complex64::new(0.0, -0.5) * kappa / (2.0 * PI * r * r) * bump(r);
            assert!((out.mode(1)[j] - expect).norm() < 1e-14);
        }
    }

    #[test]
    fn linear_step_is_exact_rotation() {
        let g = grid();
        let w0 = initial_vorticity(&g, 1e-3, 2, (0.5, 2.0), DEFAULT_RAMP);
        let mut s = SimState::new(w0.clone(), 1.0, [0.0, 0.0]);
        for _ in 0..10 {
            s = step(&s, 0.7, &DynamicsOptions::linear()).unwrap();
        }
        let lab = s.omega();
        for j in 0..g.n_r {
            let r = g.r(j);
            let expect = w0.mode(2)[j] * Complex64::from_polar(1.0, -2.0 * rotation_rate(1.0, r) * s.t);
            assert!((lab.mode(2)[j] - expect).norm() <= 1e-15 * w0.mode(2)[j].norm().max(1e-300));
        }
    }

    #[test]
    fn symmetric_reduction_matches_full_products() {
        let g = grid();
        let w = PolarField::from_modes_fn(&g, |k, r| {
            let b = bump(r);
            match k {
                2 => Complex64::new(1e-3 * b, 2e-4 * b * r),
                4 => Complex64::new(-3e-4 * b * r, 1e-4 * b),
                _ => Complex64::default(),
            }
        });
        let full = DynamicsOptions { nonlinear: true, drift: false, symmetry: 1 };
        let sym = DynamicsOptions { symmetry: 2, ..full };
        assert!(reduced_grid(&g, 2).is_some());
        let (a, _) = frame_rhs(&w, 1.0, 3.0, &full).unwrap();
        let (b, _) = frame_rhs(&w, 1.0, 3.0, &sym).unwrap();
        let mut a2 = a.clone();
        project_symmetry(&mut a2, 2);
        assert!(a2.sub(&b).norm() <= 1e-12 * a.norm());
        // odd modes of the full product vanish up to roundoff
        assert!(a.sub(&a2).norm() <= 1e-12 * a.norm());
    }
}
