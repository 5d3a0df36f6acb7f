//! The unwinding coordinates `z = θ − t v(t, r)`, `v = κ/(2πr²) + Φ(t, r)/t`,
//! the profile functions that go with them, and the pullback of the
//! vorticity to `F(t, z, v)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::dynamics::SimState;
use crate::error::{Error, Result};
use crate::grid::{to_physical, Grid, PolarField};
use crate::interp::MonotoneCubic;
use crate::radial::{self, interp_in_cell};
use crate::snapshot::{Snapshot, SnapshotHeader};

/// Width of the finite-difference stencils used for `V'` and `V''`.
const DIFF_WIDTH: usize = 11;

/// Default number of nodes on the v-grid.
pub const DEFAULT_V_NODES: usize = 1 << 16;

/// Time-averaged radial data the map is built from.
#[derive(Clone, Debug)]
pub struct MapInputs<'a> {
    pub t: f64,
    pub kappa: f64,
    /// `Φ(t, r) = ∫_0^t ⟨∂_rψ⟩/r ds`.
    pub mean_flow_integral: &'a [f64],
    /// `⟨∂_rψ⟩(t, r)`.
    pub mean_flow_now: &'a [f64],
    /// `∫_0^t ⟨ω⟩/r ds`.
    pub mean_vorticity_integral: &'a [f64],
    /// `⟨ω⟩(t, r)`.
    pub mean_vorticity_now: &'a [f64],
}

#[derive(Clone, Debug)]
pub struct CoordinateMap {
    pub t: f64,
    pub kappa: f64,
    grid: Grid,
    /// `q = r² v − κ/2π` and its first two radial derivatives.
    q: Vec<f64>,
    dq: Vec<f64>,
    d2q: Vec<f64>,
    pub v_of_r: Vec<f64>,
    pub vdot_r: Vec<f64>,
    /// `(1/t)∫_0^t ⟨ω⟩/r ds` on the radial grid.
    pub vstar_direct_r: Vec<f64>,
    pub mean_omega_r: Vec<f64>,
    /// `Φ(t, r)`.
    pub phi: Vec<f64>,
    guess: MonotoneCubic,
}

/// All profile functions sampled on a v-grid.
#[derive(Clone, Debug, Default)]
pub struct MapProfiles {
    pub v: Vec<f64>,
    pub r: Vec<f64>,
    pub vp: Vec<f64>,
    pub vpp: Vec<f64>,
    pub vdot: Vec<f64>,
    pub rho: Vec<f64>,
    pub vstar: Vec<f64>,
    /// `V*` from the time average of `⟨ω⟩/r`.
    pub vstar_direct: Vec<f64>,
    pub rhostar: Vec<f64>,
    pub wstar: Vec<f64>,
    pub mean_f: Vec<f64>,
}

/// `(υ̲, ῡ)`.
pub fn upsilon_bounds(kappa: f64, c0: f64, theta0: f64) -> (f64, f64) {
    ((kappa + c0) * theta0 * theta0 / (16.0 * PI), 4.0 * kappa / (PI * theta0 * theta0))
}

/// Uniform v-grid on `[υ̲/2, 2ῡ]`.
pub fn default_v_grid(kappa: f64, c0: f64, theta0: f64, nodes: usize) -> Vec<f64> {
    let (lo, hi) = upsilon_bounds(kappa, c0, theta0);
    let (a, b) = (0.5 * lo, 2.0 * hi);
    (0..nodes).map(|i| a + (b - a) * i as f64 / (nodes - 1) as f64).collect()
}

fn time_average(t: f64, integral: &[f64], now: &[f64], grid: &Grid) -> Vec<f64> {
    if t > 0.0 {
        integral.iter().map(|x| x / t).collect()
    } else {
        now.iter().enumerate().map(|(j, x)| x / grid.r(j)).collect()
    }
}

impl CoordinateMap {
    pub fn build(grid: &Grid, inputs: &MapInputs) -> Result<Self> {
        let n = grid.n_r;
        for len in [
            inputs.mean_flow_integral.len(),
            inputs.mean_flow_now.len(),
            inputs.mean_vorticity_integral.len(),
            inputs.mean_vorticity_now.len(),
        ] {
            if len != n {
                return Err(Error::DimensionMismatch { expected: n, got: len });
            }
        }
        let t = inputs.t;
        let kappa = inputs.kappa;
        let radii = grid.radii();
        let avg = time_average(t, inputs.mean_flow_integral, inputs.mean_flow_now, grid);
        let q: Vec<f64> = avg.iter().zip(&radii).map(|(a, r)| a * r * r).collect();
        let dq = radial::derivative(&q, grid.h(), 1, DIFF_WIDTH);
        let d2q = radial::derivative(&q, grid.h(), 2, DIFF_WIDTH);
        let v_of_r: Vec<f64> = q.iter().zip(&radii).map(|(q, r)| (kappa / (2.0 * PI) + q) / (r * r)).collect();
        for (j, &r) in radii.iter().enumerate() {
            let vp = -kappa / (PI * r * r * r) + dq[j] / (r * r) - 2.0 * q[j] / (r * r * r);
            if !(vp < 0.0) {
                return Err(Error::NonMonotoneMap { r });
            }
        }
        let vdot_r = if t > 0.0 {
            (0..n).map(|j| (-avg[j] + inputs.mean_flow_now[j] / radii[j]) / t).collect()
        } else {
            vec![0.0; n]
        };
        let vstar_direct_r = time_average(t, inputs.mean_vorticity_integral, inputs.mean_vorticity_now, grid);
        let mut rev_v = v_of_r.clone();
        let mut rev_r = radii.clone();
        rev_v.reverse();
        rev_r.reverse();
        let guess = MonotoneCubic::new(rev_v, rev_r)?;
        Ok(Self {
            t,
            kappa,
            grid: *grid,
            q,
            dq,
            d2q,
            v_of_r,
            vdot_r,
            vstar_direct_r,
            mean_omega_r: inputs.mean_vorticity_now.to_vec(),
            phi: inputs.mean_flow_integral.to_vec(),
            guess,
        })
    }

    pub fn from_state(state: &SimState) -> Result<Self> {
        let mean = state.frame.mean();
        Self::build(
            &state.grid(),
            &MapInputs {
                t: state.t,
                kappa: state.vortex.kappa,
                mean_flow_integral: &state.mean_flow_integral,
                mean_flow_now: &state.mean_flow_now,
                mean_vorticity_integral: &state.mean_vorticity_integral,
                mean_vorticity_now: &mean,
            },
        )
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    fn cell(&self, r: f64) -> usize {
        (((r - self.grid.r_min) / self.grid.h()).floor() as usize).min(self.grid.n_r - 2)
    }

    /// `(q, q', q'')` at any radius; constant outside the grid.
    fn q_at(&self, r: f64) -> (f64, f64, f64) {
        let n = self.grid.n_r;
        if r <= self.grid.r_min {
            return (self.q[0], 0.0, 0.0);
        }
        if r >= self.grid.r_max {
            return (self.q[n - 1], 0.0, 0.0);
        }
        let c = self.cell(r);
        (
            interp_in_cell(&self.q, &self.grid, c, r),
            interp_in_cell(&self.dq, &self.grid, c, r),
            interp_in_cell(&self.d2q, &self.grid, c, r),
        )
    }

    pub fn v_at(&self, r: f64) -> f64 {
        (self.kappa / (2.0 * PI) + self.q_at(r).0) / (r * r)
    }

    /// Inverse of `r ↦ v(t, r)` on `(0, ∞)`; outside the grid `r²v` is constant.
    pub fn r_of_v(&self, v: f64) -> Result<f64> {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::OutsideMap { v, lo: 0.0, hi: f64::INFINITY });
        }
        let n = self.grid.n_r;
        let c_in = self.kappa / (2.0 * PI) + self.q[0];
        let c_out = self.kappa / (2.0 * PI) + self.q[n - 1];
        if v >= self.v_of_r[0] {
            return Ok((c_in / v).sqrt());
        }
        if v <= self.v_of_r[n - 1] {
            return Ok((c_out / v).sqrt());
        }
        let mut r = self.guess.eval(v).expect("v inside the sampled range");
        for _ in 0..50 {
            let (q, dq, _) = self.q_at(r);
            let f = (self.kappa / (2.0 * PI) + q) / (r * r) - v;
            let df = dq / (r * r) - 2.0 * (self.kappa / (2.0 * PI) + q) / (r * r * r);
            let step = f / df;
            r = (r - step).clamp(self.grid.r_min, self.grid.r_max);
            if step.abs() <= 1e-15 * r {
                break;
            }
        }
        Ok(r)
    }

    /// Nodal profile interpolated at `r`, extended by `outside(r_edge, value_edge, r)`.
    fn profile_at(&self, values: &[f64], r: f64, outside: impl Fn(f64, f64, f64) -> f64) -> f64 {
        let g = &self.grid;
        let n = g.n_r;
        if r <= g.r_min {
            return outside(g.r_min, values[0], r);
        }
        if r >= g.r_max {
            return outside(g.r_max, values[n - 1], r);
        }
        interp_in_cell(values, g, self.cell(r), r)
    }

    /// `ϱ*(v) = 1/r(v) − √(2πv/κ)`, written through `q` so that it carries no
    /// cancellation: with `v r² = κ/2π + q`, `ϱ* = −(2πq/κ) / (r (1 + √(1 + 2πq/κ)))`.
    pub fn rho_star_at(&self, v: f64) -> Result<f64> {
        let r = self.r_of_v(v)?;
        Ok(rho_star_from(r, self.q_at(r).0, self.kappa))
    }

    pub fn phi_at(&self, r: f64) -> f64 {
        // r²Φ is constant outside the support
        self.profile_at(&self.phi, r, |re, ve, r| ve * re * re / (r * r))
    }

    pub fn resample(&self, v_grid: &[f64]) -> Result<MapProfiles> {
        let kappa = self.kappa;
        let rows: Vec<[f64; 11]> = v_grid
            .par_iter()
            .map(|&v| {
                let r = self.r_of_v(v)?;
                let (q, dq, d2q) = self.q_at(r);
                let (r2, r3) = (r * r, r * r * r);
                let vv = (kappa / (2.0 * PI) + q) / r2;
                let vp = -kappa / (PI * r3) + dq / r2 - 2.0 * q / r3;
                let vpp = 3.0 * kappa / (PI * r2 * r2) + d2q / r2 - 4.0 * dq / r3 + 6.0 * q / (r2 * r2);
                let vdot = self.profile_at(&self.vdot_r, r, |re, ve, r| ve * re * re / (r * r));
                let rho = 1.0 / r;
                // V' + 2ϱv with the κ/(πr³) parts cancelled analytically
                let vstar = dq / r2;
                let vstar_direct = self.profile_at(&self.vstar_direct_r, r, |_, _, _| 0.0);
                let mean_f = self.profile_at(&self.mean_omega_r, r, |_, _, _| 0.0);
                let rhostar = rho_star_from(r, q, kappa);
                let wstar = -vstar + mean_f * rho;
                Ok([vv, r, vp, vpp, vdot, rho, vstar, vstar_direct, rhostar, wstar, mean_f])
            })
            .collect::<Result<_>>()?;
        let col = |i: usize| rows.iter().map(|row| row[i]).collect::<Vec<f64>>();
        Ok(MapProfiles {
            v: col(0),
            r: col(1),
            vp: col(2),
            vpp: col(3),
            vdot: col(4),
            rho: col(5),
            vstar: col(6),
            vstar_direct: col(7),
            rhostar: col(8),
            wstar: col(9),
            mean_f: col(10),
        })
    }
}

fn rho_star_from(r: f64, q: f64, kappa: f64) -> f64 {
    let x = 2.0 * PI * q / kappa;
    -x / (r * (1.0 + (1.0 + x).sqrt()))
}

fn sup(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |m, x| m.max(x.abs()))
}

impl MapProfiles {
    /// `sup|V*_{V'+2ϱv} − V*_{avg ⟨ω⟩/r}| / sup|V*|`; zero when both vanish.
    pub fn vstar_agreement(&self) -> f64 {
        let diff: Vec<f64> = self.vstar.iter().zip(&self.vstar_direct).map(|(a, b)| a - b).collect();
        let scale = sup(&self.vstar_direct).max(sup(&self.vstar));
        if scale == 0.0 {
            0.0
        } else {
            sup(&diff) / scale
        }
    }

    /// `sup|V'' − V'∂_vV'| / sup|V''|`, with `∂_v` taken on the v-grid.
    pub fn pv_residual(&self) -> f64 {
        let dv = self.v[1] - self.v[0];
        let dvp = radial::derivative(&self.vp, dv, 1, DIFF_WIDTH);
        let res: Vec<f64> = (0..self.v.len()).map(|i| self.vpp[i] - self.vp[i] * dvp[i]).collect();
        sup(&res) / sup(&self.vpp)
    }

    /// `sup|V* − (V' + 2ϱv)| / sup|V'|`.
    pub fn vstar_identity_residual(&self) -> f64 {
        let res: Vec<f64> =
            (0..self.v.len()).map(|i| self.vstar[i] - (self.vp[i] + 2.0 * self.rho[i] * self.v[i])).collect();
        sup(&res) / sup(&self.vp)
    }
}

/// Smallest and largest grid abscissa where `|values| > rel · sup|values|`.
pub fn support_extent(x: &[f64], values: &[f64], rel: f64) -> Option<(f64, f64)> {
    let top = sup(values);
    if top == 0.0 {
        return None;
    }
    let first = values.iter().position(|y| y.abs() > rel * top)?;
    let last = values.iter().rposition(|y| y.abs() > rel * top)?;
    Some((x[first], x[last]))
}

/// `F(t, z, v)` held by its angular modes on a uniform v-grid; the grid's
/// radial coordinate is `v`.
#[derive(Clone, Debug)]
pub struct FField {
    pub t: f64,
    pub field: PolarField,
}

impl FField {
    pub fn v_grid(&self) -> Vec<f64> {
        self.field.grid.radii()
    }

    pub fn dv(&self) -> f64 {
        self.field.grid.h()
    }

    /// `‖F‖_{L²(dz dv)}`.
    pub fn l2(&self) -> f64 {
        let g = self.field.grid;
        let n = g.n_r;
        let mut s = 0.0;
        for k in 0..g.n_modes() {
            let w = if k == 0 { 1.0 } else { 2.0 };
            s += w * self.field.modes[k * n..(k + 1) * n].iter().map(|c| c.norm_sqr()).sum::<f64>();
        }
        (2.0 * PI * s * g.h()).sqrt()
    }

    pub fn distance(&self, other: &FField) -> f64 {
        FField { t: self.t, field: self.field.sub(&other.field) }.l2()
    }

    /// The nodes with `lo ≤ v ≤ hi`; used where only the support of `F`
    /// matters and the full grid would be too large to keep.
    pub fn crop(&self, lo: f64, hi: f64) -> Result<FField> {
        let g = self.field.grid;
        let h = g.h();
        let first = ((lo - g.r_min) / h).ceil().max(0.0) as usize;
        let last = (((hi - g.r_min) / h).floor() as usize).min(g.n_r - 1);
        if last < first + 15 {
            return Err(Error::InvalidParams(format!("crop [{lo}, {hi}] keeps fewer than 16 nodes")));
        }
        let n = last - first + 1;
        let sub = Grid { n_r: n, r_min: g.r_min + first as f64 * h, r_max: g.r_min + last as f64 * h, ..g };
        let mut field = PolarField::zeros(&sub);
        for k in 0..g.n_modes() {
            field.mode_mut(k).copy_from_slice(&self.field.mode(k)[first..=last]);
        }
        Ok(FField { t: self.t, field })
    }

    pub fn to_snapshot(&self) -> Result<Snapshot> {
        let g = self.field.grid;
        let phys = to_physical(&self.field)?;
        Ok(Snapshot {
            header: SnapshotHeader {
                n_theta: g.n_theta,
                n_r: g.n_r,
                r_min: g.r_min,
                r_max: g.r_max,
                time: self.t,
                quantity: "F_zv".into(),
            },
            data: phys.data,
        })
    }
}

/// Angular layout of `grid` over the uniform nodes `v_grid`.
fn v_field_grid(grid: &Grid, v_grid: &[f64]) -> Result<Grid> {
    let nv = v_grid.len();
    if nv < 16 {
        return Err(Error::InvalidParams("v-grid needs at least 16 nodes".into()));
    }
    let dv = v_grid[1] - v_grid[0];
    let vgrid = Grid { n_r: nv, r_min: v_grid[0], r_max: v_grid[nv - 1], ..*grid };
    if !(dv > 0.0) || ((vgrid.h() - dv) / dv).abs() > 1e-9 {
        return Err(Error::InvalidParams("v-grid must be uniform and increasing".into()));
    }
    Ok(vgrid)
}

/// `F_k(t, v) = ω_k(r(v)) e^{iktv} = g_k(r(v)) e^{ikΦ(t, r(v))}`, zero where
/// `r(v)` leaves the simulation grid.
pub fn pullback_f(state: &SimState, map: &CoordinateMap, v_grid: &[f64]) -> Result<FField> {
    let grid = state.grid();
    let vgrid = v_field_grid(&grid, v_grid)?;
    let samples: Vec<Option<(usize, f64, f64)>> = v_grid
        .par_iter()
        .map(|&v| {
            let r = map.r_of_v(v)?;
            if r < grid.r_min || r > grid.r_max {
                return Ok(None);
            }
            let c = (((r - grid.r_min) / grid.h()).floor() as usize).min(grid.n_r - 2);
            Ok(Some((c, r, map.phi_at(r))))
        })
        .collect::<Result<_>>()?;
    let mut field = PolarField::zeros(&vgrid);
    let rows: Vec<Vec<Complex64>> = (0..grid.n_modes())
        .into_par_iter()
        .map(|k| {
            let gk = state.frame.mode(k);
            samples
                .iter()
                .map(|s| match s {
                    None => Complex64::default(),
                    Some((c, r, phi)) => {
                        interp_in_cell(gk, &grid, *c, *r) * Complex64::from_polar(1.0, k as f64 * phi)
                    }
                })
                .collect()
        })
        .collect();
    for (k, row) in rows.into_iter().enumerate() {
        field.mode_mut(k).copy_from_slice(&row);
    }
    Ok(FField { t: state.t, field })
}

/// `f_k(r(v)) e^{iktv}` for a lab-frame field `f`, zero where `r(v)` leaves
/// the simulation grid.
pub fn pullback_lab(field: &PolarField, t: f64, map: &CoordinateMap, v_grid: &[f64]) -> Result<FField> {
    pullback_extended(field, t, map, v_grid, |_, _, _, _| Complex64::default())
}

/// As [`pullback_lab`] for a stream function, continued off the grid by the
/// harmonic modes `r^k` inside and `r^{-k}` outside, which is exact once the
/// vorticity lies inside the grid.
pub fn pullback_stream(psi: &PolarField, t: f64, map: &CoordinateMap, v_grid: &[f64]) -> Result<FField> {
    pullback_extended(psi, t, map, v_grid, |k, edge, value, r| {
        let ratio = if r < edge { r / edge } else { edge / r };
        value * ratio.powi(k as i32)
    })
}

fn pullback_extended(
    field: &PolarField,
    t: f64,
    map: &CoordinateMap,
    v_grid: &[f64],
    outside: impl Fn(usize, f64, Complex64, f64) -> Complex64 + Sync,
) -> Result<FField> {
    let grid = field.grid;
    let vgrid = v_field_grid(&grid, v_grid)?;
    let n = grid.n_r;
    let radii: Vec<f64> = v_grid.par_iter().map(|&v| map.r_of_v(v)).collect::<Result<_>>()?;
    let mut out = PolarField::zeros(&vgrid);
    let rows: Vec<Vec<Complex64>> = (0..grid.n_modes())
        .into_par_iter()
        .map(|k| {
            let fk = field.mode(k);
            radii
                .iter()
                .zip(v_grid)
                .map(|(&r, &v)| {
                    let value = if r < grid.r_min {
                        outside(k, grid.r_min, fk[0], r)
                    } else if r > grid.r_max {
                        outside(k, grid.r_max, fk[n - 1], r)
                    } else {
                        let c = (((r - grid.r_min) / grid.h()).floor() as usize).min(n - 2);
                        interp_in_cell(fk, &grid, c, r)
                    };
                    value * Complex64::from_polar(1.0, k as f64 * t * v)
                })
                .collect()
        })
        .collect();
    for (k, row) in rows.into_iter().enumerate() {
        out.mode_mut(k).copy_from_slice(&row);
    }
    Ok(FField { t, field: out })
}

#[derive(Clone, Debug)]
pub struct ProfileConvergence {
    pub times: Vec<f64>,
    /// `‖F(t_{i+1}) − F(t_i)‖`.
    pub pair_distances: Vec<f64>,
    /// `‖F(t_i) − F(t_last)‖`.
    pub distance_to_last: Vec<f64>,
    /// Exponent `p` of the fit `‖F(t) − F(t_last)‖ ≈ C |t^p − t_last^p|`.
    pub slope: Option<f64>,
}

/// Fits `d_i ≈ C |t_i^p − t_L^p|` in log space; the model is exact when
/// `F(t) = F_∞ + t^p G`.
fn fit_convergence(times: &[f64], d: &[f64], t_last: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = times.iter().zip(d).filter(|(t, d)| **t > 0.0 && **d > 0.0).map(|(t, d)| (*t, d.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let cost = |p: f64| -> f64 {
        // p → 0 is the logarithmic profile |ln(t/t_last)|
        let shape = |t: f64| if p.abs() < 1e-9 { (t / t_last).ln().abs() } else { (t.powf(p) - t_last.powf(p)).abs() };
        let basis: Vec<f64> = pts.iter().map(|(t, _)| shape(*t).ln()).collect();
        let c = pts.iter().zip(&basis).map(|((_, y), b)| y - b).sum::<f64>() / pts.len() as f64;
        pts.iter().zip(&basis).map(|((_, y), b)| (y - b - c).powi(2)).sum()
    };
    let (lo, hi) = (-4.0, 2.0);
    let mut best = (f64::INFINITY, lo);
    for i in 0..=600 {
        let p = lo + 0.01 * i as f64;
        let c = cost(p);
        if c < best.0 {
            best = (c, p);
        }
    }
    let (mut a, mut b) = ((best.1 - 0.01).max(lo), (best.1 + 0.01).min(hi));
    for _ in 0..80 {
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        if cost(m1) < cost(m2) {
            b = m2;
        } else {
            a = m1;
        }
    }
    Some(0.5 * (a + b))
}

/// Least-squares slope of `ln d` against `ln t`, skipping zero distances.
pub fn loglog_slope(times: &[f64], d: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = times.iter().zip(d).filter(|(t, d)| **t > 0.0 && **d > 0.0).map(|(t, d)| (t.ln(), d.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx)
}

pub fn profile_convergence(snapshots: &[FField]) -> Result<ProfileConvergence> {
    if snapshots.len() < 3 {
        return Err(Error::InvalidParams("profile convergence needs at least 3 snapshots".into()));
    }
    if snapshots.windows(2).any(|w| w[1].t <= w[0].t) {
        return Err(Error::InvalidParams("snapshot times must increase".into()));
    }
    let last = snapshots.last().unwrap();
    let times: Vec<f64> = snapshots.iter().map(|s| s.t).collect();
    let pair_distances = snapshots.windows(2).map(|w| w[1].distance(&w[0])).collect();
    let distance_to_last: Vec<f64> = snapshots.iter().map(|s| s.distance(last)).collect();
    let n = snapshots.len() - 1;
    let slope = fit_convergence(&times[..n], &distance_to_last[..n], last.t);
    Ok(ProfileConvergence { times, pair_distances, distance_to_last, slope })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{initial_vorticity, step, DynamicsOptions, DEFAULT_RAMP};
    use crate::gevrey::ramped_plateau;
    use crate::poisson::mean_flow;

    fn grid() -> Grid {
        Grid::new(16, 512, 0.05, 8.0, 2.0 / 3.0).unwrap()
    }

    fn unperturbed(kappa: f64) -> CoordinateMap {
        let g = grid();
        let z = vec![0.0; g.n_r];
        CoordinateMap::build(
            &g,
            &MapInputs {
                t: 3.0,
                kappa,
                mean_flow_integral: &z,
                mean_flow_now: &z,
                mean_vorticity_integral: &z,
                mean_vorticity_now: &z,
            },
        )
        .unwrap()
    }

    #[test]
    fn unperturbed_map() {
        let map = unperturbed(2.0 * PI);
        assert!((map.r_of_v(1.0).unwrap() - 1.0).abs() < 1e-14);
        let v: Vec<f64> = (1..200).map(|i| 0.01 * i as f64).collect();
        let p = map.resample(&v).unwrap();
        for i in 0..v.len() {
            let r = p.r[i];
            assert!((p.v[i] - 1.0 / (r * r)).abs() < 1e-12 * p.v[i]);
            assert_eq!(p.vstar[i], 0.0);
            assert_eq!(p.wstar[i], 0.0);
            assert!(p.rhostar[i].abs() < 1e-12);
            assert!((p.vp[i] + 2.0 * p.rho[i] * p.v[i]).abs() < 1e-12 * p.vp[i].abs());
        }
    }

    #[test]
    fn inverse_map_consistency() {
        let g = grid();
        let w: Vec<f64> = g.radii().iter().map(|&r| 1e-2 * ramped_plateau(0.5, 2.0, DEFAULT_RAMP, r)).collect();
        let mf = mean_flow(&g, &w);
        let integral: Vec<f64> = mf.iter().zip(g.radii()).map(|(m, r)| 2.0 * m / r).collect();
        let wint: Vec<f64> = w.iter().zip(g.radii()).map(|(w, r)| 2.0 * w / r).collect();
        let map = CoordinateMap::build(
            &g,
            &MapInputs {
                t: 2.0,
                kappa: 1.0,
                mean_flow_integral: &integral,
                mean_flow_now: &mf,
                mean_vorticity_integral: &wint,
                mean_vorticity_now: &w,
            },
        )
        .unwrap();
        for j in 0..g.n_r {
            let r = g.r(j);
            assert!((map.r_of_v(map.v_of_r[j]).unwrap() - r).abs() < 1e-8, "r = {r}");
        }
        // steady mean flow: V̇ = 0 and the two V* formulas agree
        let v: Vec<f64> = (0..4096).map(|i| 0.02 + 0.2 * i as f64 / 4095.0).collect();
        let p = map.resample(&v).unwrap();
        assert!(p.vdot.iter().all(|x| x.abs() < 1e-15));
        assert!(p.vstar_agreement() < 1e-6, "{}", p.vstar_agreement());
        assert!(p.vstar_identity_residual() < 1e-12);
    }

    #[test]
    fn outside_support_extension() {
        let map = unperturbed(1.0);
        let far = map.r_of_v(1e-4).unwrap();
        assert!((far - (1.0 / (2.0 * PI * 1e-4)).sqrt()).abs() < 1e-10 * far);
        assert!(map.r_of_v(-1.0).is_err());
    }

    #[test]
    fn pullback_at_time_zero_is_resampling() {
        let g = grid();
        let w = initial_vorticity(&g, 1e-3, 2, (0.5, 2.0), DEFAULT_RAMP);
        let s = SimState::new(w, 1.0, [0.0, 0.0]);
        let map = CoordinateMap::from_state(&s).unwrap();
        let v = default_v_grid(1.0, 0.0, 0.125, 2048);
        let f = pullback_f(&s, &map, &v).unwrap();
        for (i, &vi) in v.iter().enumerate() {
            let r = (1.0 / (2.0 * PI * vi)).sqrt();
            let expect = if r >= g.r_min && r <= g.r_max { 0.5e-3 * ramped_plateau(0.5, 2.0, DEFAULT_RAMP, r) } else { 0.0 };
            assert!((f.field.mode(2)[i].re - expect).abs() < 1e-9, "{vi}");
        }
    }

    #[test]
    fn lab_pullback_and_crop() {
        let g = grid();
        let w = initial_vorticity(&g, 1e-3, 2, (0.5, 2.0), DEFAULT_RAMP);
        let s = SimState::new(w, 1.0, [0.0, 0.0]);
        let map = CoordinateMap::from_state(&s).unwrap();
        let v = default_v_grid(1.0, 0.0, 0.125, 2048);
        let f = pullback_f(&s, &map, &v).unwrap();
        let lab = pullback_lab(&s.omega(), 0.0, &map, &v).unwrap();
        assert_eq!(f.distance(&lab), 0.0);
        let c = f.crop(0.02, 1.5).unwrap();
        assert!(c.v_grid()[0] >= 0.02 && *c.v_grid().last().unwrap() <= 1.5);
        assert!((c.dv() - f.dv()).abs() < 1e-12 * f.dv());
        // the support of F lies inside the window, so nothing is lost
        assert!((c.l2() - f.l2()).abs() < 1e-12 * f.l2());
        assert!(f.crop(0.02, 0.021).is_err());
    }

    #[test]
    fn linear_pullback_is_time_invariant() {
        let g = grid();
        let w = initial_vorticity(&g, 1e-3, 2, (0.5, 2.0), DEFAULT_RAMP);
        let mut s = SimState::new(w, 1.0, [0.0, 0.0]);
        let v = default_v_grid(1.0, 0.0, 0.125, 4096);
        let f0 = pullback_f(&s, &CoordinateMap::from_state(&s).unwrap(), &v).unwrap();
        for _ in 0..5 {
            s = step(&s, 3.0, &DynamicsOptions::linear()).unwrap();
        }
        let f1 = pullback_f(&s, &CoordinateMap::from_state(&s).unwrap(), &v).unwrap();
        assert!(f1.distance(&f0) < 1e-12 * f0.l2());
    }

    #[test]
    fn non_monotone_map_is_refused() {
        let g = grid();
        let big: Vec<f64> = g.radii().iter().map(|&r| 50.0 * ramped_plateau(0.5, 2.0, DEFAULT_RAMP, r)).collect();
        let mf = mean_flow(&g, &big);
        let z = vec![0.0; g.n_r];
        let res = CoordinateMap::build(
            &g,
            &MapInputs {
                t: 0.0,
                kappa: 1.0,
                mean_flow_integral: &z,
                mean_flow_now: &mf,
                mean_vorticity_integral: &z,
                mean_vorticity_now: &big,
            },
        );
        assert!(matches!(res, Err(Error::NonMonotoneMap { .. })));
    }

    fn synthetic(t: f64, base: &FField, dir: &FField, p: f64) -> FField {
        FField { t, field: base.field.add_scaled(&dir.field, t.powf(p)) }
    }

    #[test]
    fn convergence_fit() {
        let g = Grid::new(8, 64, 0.1, 1.0, 1.0).unwrap();
        let base = FField { t: 0.0, field: PolarField::from_modes_fn(&g, |k, v| Complex64::new((k as f64 + v).sin(), 0.0)) };
        let dir = FField { t: 0.0, field: PolarField::from_modes_fn(&g, |k, v| Complex64::new(0.0, (k as f64 * v).cos())) };
        let snaps: Vec<FField> = [2.0, 5.0, 10.0, 40.0, 100.0].iter().map(|&t| synthetic(t, &base, &dir, -1.0)).collect();
        let c = profile_convergence(&snaps).unwrap();
        assert!((c.slope.unwrap() + 1.0).abs() < 1e-6);
        let same: Vec<FField> = [1.0, 2.0, 3.0].iter().map(|&t| FField { t, field: base.field.clone() }).collect();
        let c = profile_convergence(&same).unwrap();
        assert!(c.pair_distances.iter().all(|d| *d == 0.0));
        assert!(c.slope.is_none());
        assert!(profile_convergence(&same[..2]).is_err());
    }

    #[test]
    fn f_snapshot_roundtrip() {
        let g = Grid::new(8, 32, 0.1, 1.0, 1.0).unwrap();
        let f = FField { t: 1.5, field: PolarField::from_modes_fn(&g, |k, v| Complex64::new(if k == 1 { v } else { 0.0 }, 0.0)) };
        let s = f.to_snapshot().unwrap();
        assert_eq!(s.header.quantity, "F_zv");
        let mut buf = Vec::new();
        s.write_to(&mut buf).unwrap();
        assert_eq!(Snapshot::read_from(&buf[..]).unwrap(), s);
    }
}
