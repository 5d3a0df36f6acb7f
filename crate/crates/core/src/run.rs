//! Run lifecycle for `simulate`: the stepping loop, per-row diagnostics,
//! snapshots and the final summary.

use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::coordinates::{default_v_grid, loglog_slope, profile_convergence, pullback_f, pullback_stream, upsilon_bounds, CoordinateMap, FField};
use crate::dynamics::{check_support, conserved_quantities, initial_vorticity, mass, step, support_extent, vortex_drift_frame, Conserved, SimState};
use crate::energies::{decay_fit, energy_f, energy_phi, energy_scalar, BAccumulator, EnergyParams, EnergyRecord, ScalarKind, SlopeFit, WeightsAt};
use crate::error::{Error, Result};
use crate::gevrey::{gevrey_window, ramped_plateau, spectrum_of_profiles};
use crate::grid::{to_physical, Grid, PolarField};
use crate::linear_oracle::{linear_stream_mode, ModeData, OscillatoryQuadrature, RadialProfile};
use crate::poisson::{radial_velocity, rotation_rate};
use crate::radial;
use crate::snapshot::{Snapshot, SnapshotHeader};

pub const SERIES_FILE: &str = "series.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const SNAPSHOT_DIR: &str = "snapshots";

pub const SERIES_COLUMNS: [&str; 22] = [
    "t",
    "P1",
    "P2",
    "abs_Pdot",
    "mass",
    "enstrophy",
    "moment_x",
    "moment_y",
    "max_u_theta_residual",
    "max_u_r",
    "E_F",
    "E_phi",
    "E_Vstar",
    "E_rhostar",
    "E_Wstar",
    "B_F",
    "B_phi",
    "B_Vstar",
    "B_rhostar",
    "B_Wstar",
    "K_const",
    "profile_distance",
];

/// 17 significant digits, exact for 64-bit floats.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeriesRow {
    pub t: f64,
    pub position: [f64; 2],
    pub drift_speed: f64,
    pub conserved: Conserved,
    pub max_u_theta_residual: f64,
    pub max_u_r: f64,
    pub energy: Option<EnergyRecord>,
    /// `‖F(t) − F(t_prev)‖` against the previous row.
    pub profile_distance: Option<f64>,
}

impl SeriesRow {
    pub fn fields(&self) -> Vec<String> {
        let c = &self.conserved;
        let mut out: Vec<String> = [
            self.t,
            self.position[0],
            self.position[1],
            self.drift_speed,
            c.mass,
            c.enstrophy,
            c.moment_x,
            c.moment_y,
            self.max_u_theta_residual,
            self.max_u_r,
        ]
        .iter()
        .map(|&x| format_float(x))
        .collect();
        match &self.energy {
            Some(e) => out.extend(
                [e.e_f, e.e_phi, e.e_vstar, e.e_rhostar, e.e_wstar, e.b_f, e.b_phi, e.b_vstar, e.b_rhostar, e.b_wstar, e.k_const]
                    .iter()
                    .map(|&x| format_float(x)),
            ),
            None => out.extend(std::iter::repeat(String::new()).take(11)),
        }
        out.push(self.profile_distance.map(format_float).unwrap_or_default());
        out
    }
}

/// `P∞ = (κ + c0)^{-1} (∫(x, y) ω_0 dA + κ P(0))`, the value the conserved
/// moment forces once the perturbation has become radial about the vortex.
pub fn estimate_p_infinity(initial: &Conserved, kappa: f64) -> [f64; 2] {
    let total = kappa + initial.mass;
    [initial.moment_x / total, initial.moment_y / total]
}

#[derive(Clone, Debug, Serialize)]
pub struct PInfinity {
    pub estimate: [f64; 2],
    /// Mean of `P(t)` over the last tenth of the run.
    pub late_average: [f64; 2],
    pub final_position: [f64; 2],
    pub final_deviation: f64,
}

pub fn p_infinity_report(initial: &Conserved, kappa: f64, rows: &[SeriesRow]) -> PInfinity {
    let estimate = estimate_p_infinity(initial, kappa);
    let last = rows.last().map_or([0.0, 0.0], |r| r.position);
    let t_end = rows.last().map_or(0.0, |r| r.t);
    let late: Vec<&SeriesRow> = rows.iter().filter(|r| r.t >= 0.9 * t_end).collect();
    let n = late.len().max(1) as f64;
    let late_average = [late.iter().map(|r| r.position[0]).sum::<f64>() / n, late.iter().map(|r| r.position[1]).sum::<f64>() / n];
    PInfinity { estimate, late_average, final_position: last, final_deviation: (last[0] - estimate[0]).hypot(last[1] - estimate[1]) }
}

/// `∫ r^power |ω| dA` from the physical samples.
fn absolute_moment(omega: &PolarField, power: i32) -> Result<f64> {
    let grid = omega.grid;
    let phys = to_physical(omega)?;
    let n = grid.n_r;
    let mut prof = vec![0.0; n];
    for i in 0..grid.n_theta {
        for (j, p) in prof.iter_mut().enumerate() {
            *p += phys.data[i * n + j].abs();
        }
    }
    let weighted: Vec<f64> = prof.iter().enumerate().map(|(j, p)| p * grid.dtheta() * grid.r(j).powi(1 + power)).collect();
    Ok(radial::integral(&weighted, &grid))
}

#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct Drifts {
    /// Largest `|Q(t) − Q(0)| / scale` over the rows.
    pub mass: f64,
    pub enstrophy: f64,
    pub moment: f64,
    /// `∫|ω_0| dA`, `∫ω_0² dA` and `∫ r|ω_0| dA`; a zero scale leaves the drift absolute.
    pub mass_scale: f64,
    pub enstrophy_scale: f64,
    pub moment_scale: f64,
}

fn drifts(rows: &[SeriesRow], mass_scale: f64, moment_scale: f64) -> Drifts {
    let Some(first) = rows.first() else { return Drifts::default() };
    let c0 = first.conserved;
    let rel = |d: f64, s: f64| if s > 0.0 { d / s } else { d };
    let mut d = Drifts { mass_scale, enstrophy_scale: c0.enstrophy, moment_scale, ..Default::default() };
    for r in rows {
        let c = r.conserved;
        d.mass = d.mass.max(rel((c.mass - c0.mass).abs(), mass_scale));
        d.enstrophy = d.enstrophy.max(rel((c.enstrophy - c0.enstrophy).abs(), c0.enstrophy));
        let dm = (c.moment_x - c0.moment_x).hypot(c.moment_y - c0.moment_y);
        d.moment = d.moment.max(rel(dm, moment_scale));
    }
    d
}

#[derive(Clone, Debug, Serialize)]
pub struct FitOutcome {
    pub fit: Option<SlopeFit>,
    pub error: Option<String>,
}

impl FitOutcome {
    fn of(series: &[(f64, f64)], window: (f64, f64)) -> Self {
        match decay_fit(series, window) {
            Ok(f) => Self { fit: Some(f), error: None },
            Err(e) => Self { fit: None, error: Some(e.to_string()) },
        }
    }

    pub fn slope(&self) -> Option<f64> {
        self.fit.map(|f| f.slope)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CoordinateChecks {
    pub t: f64,
    pub vstar_agreement: f64,
    pub pv_residual: f64,
    pub vstar_identity_residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceSummary {
    pub times: Vec<f64>,
    pub distance_to_last: Vec<f64>,
    /// Exponent `p` of `‖F(t) − F(t_last)‖ ≈ C|t^p − t_last^p|`.
    pub slope: Option<f64>,
    /// Plain log-log slope of the same distances; biased low by the
    /// vanishing distance at `t_last`.
    pub loglog_slope: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct LinearCheck {
    pub t: f64,
    /// Largest `|ω_k − ω_{0,k} e^{−ikκt/(2πr²)}|` over the retained modes,
    /// relative to `max|ω_{0,k}|`.
    pub mode_error: f64,
    /// Largest stream-mode difference from the oscillatory-integral oracle,
    /// relative to the oracle's maximum.
    pub stream_error: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub status: String,
    pub error: Option<String>,
    pub config: RunConfig,
    pub steps: usize,
    pub t_final: f64,
    pub wall_seconds: f64,
    pub c0: f64,
    pub rows: usize,
    pub drifts: Drifts,
    pub support_limits: [f64; 2],
    /// Widest radial extent of `|ω| > 1e-12 max|ω|` seen at any row.
    pub support_extent: Option<[f64; 2]>,
    pub u_theta_residual_decay: FitOutcome,
    pub u_r_decay: FitOutcome,
    pub p_infinity: PInfinity,
    pub coordinates: Option<CoordinateChecks>,
    pub profile_convergence: Option<ConvergenceSummary>,
    pub linear_check: Option<LinearCheck>,
}

/// Fixed v-grids and cutoffs shared by all rows.
struct Diagnostics {
    f_grid: Vec<f64>,
    phi_grid: Vec<f64>,
    rho_grid: Vec<f64>,
    phi_cutoff: Vec<f64>,
    rho_cutoff: Vec<f64>,
    crop: (f64, f64),
    energy: EnergyParams,
    accumulator: BAccumulator,
}

fn uniform(lo: f64, hi: f64, dv: f64) -> Vec<f64> {
    let n = ((hi - lo) / dv).ceil() as usize + 1;
    (0..n).map(|i| lo + i as f64 * dv).collect()
}

impl Diagnostics {
    fn new(cfg: &RunConfig, c0: f64, map0: &CoordinateMap) -> Result<Self> {
        let (lo, hi) = upsilon_bounds(cfg.kappa, c0, cfg.vartheta0);
        let f_grid = default_v_grid(cfg.kappa, c0, cfg.vartheta0, cfg.v_nodes);
        let dv = f_grid[1] - f_grid[0];
        let phi_grid = uniform(lo / 3.0, 3.0 * hi, dv);
        let rho_grid = uniform(lo / 9.0, 9.0 * hi, dv);
        let phi_cutoff = phi_grid.iter().map(|&v| gevrey_window(3.0, [lo / 3.0, lo / 2.0, 2.0 * hi, 3.0 * hi], v)).collect();
        let rho_cutoff = rho_grid.iter().map(|&v| gevrey_window(3.0, [lo / 9.0, lo / 8.0, 8.0 * hi, 9.0 * hi], v)).collect();
        // the vorticity stays well inside [lo/1.25, 1.25 hi] over a run at these amplitudes
        let [s_lo, s_hi] = cfg.support;
        let crop = (map0.v_at(1.25 * s_hi).max(f_grid[0]), map0.v_at(s_lo / 1.25).min(*f_grid.last().unwrap()));
        Ok(Self {
            f_grid,
            phi_grid,
            rho_grid,
            phi_cutoff,
            rho_cutoff,
            crop,
            energy: EnergyParams { weights: cfg.weights.params()?, k_const: cfg.weights.k_const },
            accumulator: BAccumulator::default(),
        })
    }

    fn energies(&mut self, state: &SimState, map: &CoordinateMap, f: &FField, psi_lab: &PolarField) -> Result<EnergyRecord> {
        let t = state.t;
        let w = WeightsAt::new(t, &self.energy.weights);
        let rows = |x: &FField| (0..x.field.grid.n_modes()).map(|k| x.field.mode(k).to_vec()).collect::<Vec<_>>();
        let dv = f.dv();
        let (e_f, b_f) = energy_f(&spectrum_of_profiles(&rows(f), dv), &w)?;

        let phi = pullback_stream(psi_lab, t, map, &self.phi_grid)?;
        let mut phi_rows = rows(&phi);
        phi_rows[0].iter_mut().for_each(|c| *c = Complex64::default());
        for row in phi_rows.iter_mut().skip(1) {
            row.iter_mut().zip(&self.phi_cutoff).for_each(|(c, x)| *c *= x);
        }
        let (e_phi, b_phi) = energy_phi(&spectrum_of_profiles(&phi_rows, dv), &w)?;

        let prof = map.resample(&self.f_grid)?;
        let (e_vstar, b_vstar) = energy_scalar(&prof.vstar, dv, ScalarKind::VStar, &w, &self.energy)?;
        let (e_wstar, b_wstar) = energy_scalar(&prof.wstar, dv, ScalarKind::WStar, &w, &self.energy)?;
        let rho_star: Vec<f64> = self
            .rho_grid
            .par_iter()
            .zip(self.rho_cutoff.par_iter())
            .map(|(&v, &cut)| Ok(cut * map.rho_star_at(v)?))
            .collect::<Result<_>>()?;
        let (e_rhostar, b_rhostar) = energy_scalar(&rho_star, dv, ScalarKind::RhoStar, &w, &self.energy)?;

        let b = self.accumulator.push(t, [b_f, b_phi, b_vstar, b_rhostar, b_wstar]);
        Ok(EnergyRecord {
            t,
            e_f,
            e_phi,
            e_vstar,
            e_rhostar,
            e_wstar,
            b_f: b[0],
            b_phi: b[1],
            b_vstar: b[2],
            b_rhostar: b[3],
            b_wstar: b[4],
            k_const: self.energy.k_const,
        })
    }
}

fn snapshot_of(field: &PolarField, t: f64, quantity: &str) -> Result<Snapshot> {
    let g = field.grid;
    let phys = to_physical(field)?;
    Ok(Snapshot {
        header: SnapshotHeader { n_theta: g.n_theta, n_r: g.n_r, r_min: g.r_min, r_max: g.r_max, time: t, quantity: quantity.into() },
        data: phys.data,
    })
}

fn max_physical(field: &PolarField) -> Result<f64> {
    Ok(to_physical(field)?.max_abs())
}

/// One row of diagnostics plus the cropped `F` it was computed from.
fn observe(cfg: &RunConfig, state: &SimState, diag: &mut Diagnostics, previous: Option<&FField>) -> Result<(SeriesRow, FField, CoordinateMap)> {
    let kappa = state.vortex.kappa;
    let stream = state.stream();
    let pdot = if cfg.drift { vortex_drift_frame(&state.frame, kappa, state.t) } else { [0.0, 0.0] };
    let mut residual = stream.dpsi.clone();
    residual.mode_mut(0).iter_mut().for_each(|c| *c = Complex64::default());
    let map = CoordinateMap::from_state(state)?;
    let f = pullback_f(state, &map, &diag.f_grid)?;
    let cropped = f.crop(diag.crop.0, diag.crop.1)?;
    let energy = if cfg.energies { Some(diag.energies(state, &map, &f, &stream.psi)?) } else { None };
    let row = SeriesRow {
        t: state.t,
        position: state.vortex.position,
        drift_speed: pdot[0].hypot(pdot[1]),
        conserved: conserved_quantities(state),
        max_u_theta_residual: max_physical(&residual)?,
        max_u_r: max_physical(&radial_velocity(&stream.psi))?,
        energy,
        profile_distance: previous.map(|p| cropped.distance(p)),
    };
    let finite = row.fields().iter().filter(|s| !s.is_empty()).all(|s| s.parse::<f64>().is_ok_and(f64::is_finite));
    if !finite {
        return Err(Error::BlowUp { t: state.t, what: "non-finite diagnostic".into() });
    }
    Ok((row, cropped, map))
}

pub fn linear_check(cfg: &RunConfig, initial: &PolarField, state: &SimState) -> Result<LinearCheck> {
    let grid = state.grid();
    let n = grid.n_r;
    let omega = state.omega();
    let kappa = cfg.kappa;
    let t = state.t;
    let scale = initial.modes.iter().map(|c| c.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut mode_error: f64 = 0.0;
    for k in 0..grid.n_modes() {
        for j in 0..n {
            let exact = initial.modes[k * n + j] * Complex64::from_polar(1.0, -(k as f64) * rotation_rate(kappa, grid.r(j)) * t);
            mode_error = mode_error.max((omega.modes[k * n + j] - exact).norm() / scale);
        }
    }
    let mut stream_error: f64 = 0.0;
    if cfg.mode > 0 && cfg.epsilon > 0.0 {
        let [lo, hi] = cfg.support;
        let mode = ModeData { k: cfg.mode as i64, coeff: [0.5 * cfg.epsilon, 0.0], profile: RadialProfile::Plateau { lo, hi, ramp: cfg.ramp } };
        let psi = state.stream().psi;
        let q = OscillatoryQuadrature::default();
        let samples: Vec<usize> = (0..24).map(|i| ((lo - 0.25).max(grid.r_min) - grid.r_min + i as f64 * (hi - lo + 0.5) / 23.0) / grid.h()).map(|x| (x.round() as usize).min(n - 1)).collect();
        let mut top: f64 = 0.0;
        let mut diff: f64 = 0.0;
        for j in samples {
            let (oracle, _) = linear_stream_mode(t, grid.r(j), kappa, &mode, &q)?;
            top = top.max(oracle.norm());
            diff = diff.max((psi.mode(cfg.mode)[j] - oracle).norm());
        }
        stream_error = if top > 0.0 { diff / top } else { diff };
    }
    Ok(LinearCheck { t, mode_error, stream_error })
}

fn fmt_time(t: f64) -> String {
    format!("{t:010.3}")
}

/// Everything a finished or aborted run produced, kept in memory for callers
/// such as the acceptance tests.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub summary: Summary,
    pub rows: Vec<SeriesRow>,
    pub final_state: SimState,
    /// Cropped `F` at the snapshot times used for the convergence fit.
    pub profiles: Vec<FField>,
    pub dir: PathBuf,
}

pub fn initial_state(cfg: &RunConfig) -> Result<SimState> {
    let grid: Grid = cfg.grid.build()?;
    let mut w = initial_vorticity(&grid, cfg.epsilon, cfg.mode, (cfg.support[0], cfg.support[1]), cfg.ramp);
    crate::dynamics::project_symmetry(&mut w, cfg.dynamics().symmetry);
    Ok(SimState::new(w, cfg.kappa, [0.0, 0.0]))
}

/// Runs `cfg` and writes `series.csv`, snapshots and `summary.json` into
/// `cfg.output_dir`. A failure mid-run still writes the summary (with the
/// error) and leaves every row written so far; the error is returned with
/// the partial outcome.
pub fn simulate(cfg: &RunConfig) -> std::result::Result<RunOutcome, (Error, Option<Box<RunOutcome>>)> {
    cfg.validate().map_err(|e| (e, None))?;
    let dir = cfg.output_dir.clone();
    let setup = || -> Result<(File, SimState)> {
        fs::create_dir_all(dir.join(SNAPSHOT_DIR))?;
        fs::write(dir.join("config.toml"), cfg.to_toml())?;
        Ok((File::create(dir.join(SERIES_FILE))?, initial_state(cfg)?))
    };
    let (file, mut state) = setup().map_err(|e| (e, None))?;
    let started = Instant::now();
    let initial = state.frame.clone();
    let mut writer = csv::Writer::from_writer(file);
    let mut rows = Vec::new();
    let mut profiles = Vec::new();
    let mut last_map = None;
    let mut widest: Option<[f64; 2]> = None;
    let opts = cfg.dynamics();
    let (lim_lo, lim_hi) = cfg.support_limits();
    let c0 = mass(&state.frame);
    let mut steps_done = 0;

    let mut body = || -> Result<()> {
        writer.write_record(SERIES_COLUMNS).map_err(csv_error)?;
        let map0 = CoordinateMap::from_state(&state)?;
        let mut diag = Diagnostics::new(cfg, c0, &map0)?;
        let mut previous: Option<FField> = None;
        let total = cfg.total_steps();
        let (out_stride, snap_stride) = (cfg.output_stride(), cfg.snapshot_stride());
        for n in 0..=total {
            if n > 0 {
                state = step(&state, cfg.dt, &opts)?;
                steps_done = n;
                // exact at the end points, with no accumulated roundoff
                state.t = n as f64 * cfg.t_end / total as f64;
            }
            let is_out = n % out_stride == 0 || n == total;
            let is_snap = n % snap_stride == 0 || n == total;
            if !(is_out || is_snap) {
                continue;
            }
            check_support(&state, lim_lo, lim_hi)?;
            if let Some((a, b)) = support_extent(&state, 1e-12) {
                widest = Some(widest.map_or([a, b], |[x, y]| [x.min(a), y.max(b)]));
            }
            let (row, cropped, map) = observe(cfg, &state, &mut diag, previous.as_ref())?;
            if is_out {
                writer.write_record(row.fields()).map_err(csv_error)?;
                writer.flush()?;
                rows.push(row);
            }
            if is_snap {
                let stamp = fmt_time(state.t);
                snapshot_of(&state.omega(), state.t, "omega")?.save(dir.join(SNAPSHOT_DIR).join(format!("omega_t{stamp}.snap")))?;
                cropped.to_snapshot()?.save(dir.join(SNAPSHOT_DIR).join(format!("F_t{stamp}.snap")))?;
                if state.t >= cfg.fit_window[0] {
                    profiles.push(cropped.clone());
                }
            }
            previous = Some(cropped);
            last_map = Some(map);
        }
        Ok(())
    };
    let result = body();
    drop(body);
    let _ = writer.flush();

    let summary = summarize(cfg, &initial, &state, &rows, &profiles, last_map.as_ref(), widest, steps_done, c0, started, result.as_ref().err());
    let outcome = summary.and_then(|summary| {
        fs::write(dir.join(SUMMARY_FILE), serde_json::to_string_pretty(&summary)?)?;
        Ok(RunOutcome { summary, rows, final_state: state, profiles, dir: dir.clone() })
    });
    match (result, outcome) {
        (Ok(()), Ok(o)) => Ok(o),
        (Ok(()), Err(e)) => Err((e, None)),
        (Err(e), o) => Err((e, o.ok().map(Box::new))),
    }
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidParams(format!("csv: {other:?}")),
    }
}

#[allow(clippy::too_many_arguments)]
fn summarize(
    cfg: &RunConfig,
    initial: &PolarField,
    state: &SimState,
    rows: &[SeriesRow],
    profiles: &[FField],
    map: Option<&CoordinateMap>,
    widest: Option<[f64; 2]>,
    steps: usize,
    c0: f64,
    started: Instant,
    error: Option<&Error>,
) -> Result<Summary> {
    let window = (cfg.fit_window[0], cfg.fit_window[1]);
    let series = |f: fn(&SeriesRow) -> f64| rows.iter().map(|r| (r.t, f(r))).collect::<Vec<_>>();
    let initial_conserved = rows.first().map(|r| r.conserved).unwrap_or(Conserved { mass: c0, enstrophy: 0.0, moment_x: 0.0, moment_y: 0.0 });
    let coordinates = match map {
        Some(m) => {
            let v = default_v_grid(cfg.kappa, c0, cfg.vartheta0, cfg.v_nodes);
            let p = m.resample(&v)?;
            Some(CoordinateChecks { t: m.t, vstar_agreement: p.vstar_agreement(), pv_residual: p.pv_residual(), vstar_identity_residual: p.vstar_identity_residual() })
        }
        None => None,
    };
    let profile_convergence = if profiles.len() >= 3 {
        let c = profile_convergence(profiles)?;
        let n = c.times.len() - 1;
        let loglog_slope = loglog_slope(&c.times[..n], &c.distance_to_last[..n]);
        Some(ConvergenceSummary { times: c.times, distance_to_last: c.distance_to_last, slope: c.slope, loglog_slope })
    } else {
        None
    };
    let linear = if !cfg.nonlinear && !cfg.drift && error.is_none() { Some(linear_check(cfg, initial, state)?) } else { None };
    Ok(Summary {
        status: if error.is_none() { "ok".into() } else { "failed".into() },
        error: error.map(|e| e.to_string()),
        config: cfg.clone(),
        steps,
        t_final: state.t,
        wall_seconds: started.elapsed().as_secs_f64(),
        c0,
        rows: rows.len(),
        drifts: drifts(rows, absolute_moment(initial, 0)?, absolute_moment(initial, 1)?),
        support_limits: [cfg.support_limits().0, cfg.support_limits().1],
        support_extent: widest,
        u_theta_residual_decay: FitOutcome::of(&series(|r| r.max_u_theta_residual), window),
        u_r_decay: FitOutcome::of(&series(|r| r.max_u_r), window),
        p_infinity: p_infinity_report(&initial_conserved, cfg.kappa, rows),
        coordinates,
        profile_convergence,
        linear_check: linear,
    })
}

/// Plateau profile of the configured initial data, for callers comparing
/// against closed forms.
pub fn initial_profile(cfg: &RunConfig, r: f64) -> f64 {
    cfg.epsilon * ramped_plateau(cfg.support[0], cfg.support[1], cfg.ramp, r)
}

/// Writes `value` as pretty JSON to `path`.
pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut f = File::create(path)?;
    f.write_all(serde_json::to_string_pretty(value)?.as_bytes())?;
    f.write_all(b"\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::GridConfig;

    fn small(dir: &Path) -> RunConfig {
        RunConfig {
            grid: GridConfig { n_theta: 16, n_r: 256, r_max: 8.0, ..GridConfig::default() },
            dt: 0.05,
            t_end: 1.0,
            output_every: 0.25,
            snapshot_every: 0.5,
            v_nodes: 8192,
            output_dir: dir.to_path_buf(),
            ..RunConfig::default()
        }
    }

    #[test]
    fn p_infinity_balances_moment() {
        let c = Conserved { mass: 0.5, enstrophy: 1.0, moment_x: 0.3, moment_y: -0.15 };
        let p = estimate_p_infinity(&c, 1.0);
        assert!((p[0] - 0.2).abs() < 1e-15 && (p[1] + 0.1).abs() < 1e-15);
    }

    #[test]
    fn short_run_writes_outputs() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = small(tmp.path());
        let out = simulate(&cfg).map_err(|(e, _)| e).unwrap();
        assert_eq!(out.rows.len(), 5);
        let text = fs::read_to_string(tmp.path().join(SERIES_FILE)).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), SERIES_COLUMNS.join(","));
        assert_eq!(lines.count(), 5);
        let snaps = fs::read_dir(tmp.path().join(SNAPSHOT_DIR)).unwrap().count();
        assert_eq!(snaps, 6);
        let s = &out.summary;
        assert_eq!(s.status, "ok");
        assert!(s.drifts.mass < 1e-10, "{:?}", s.drifts);
        assert!(out.rows.iter().all(|r| r.energy.is_some()));
        assert!(out.rows[1..].iter().all(|r| r.profile_distance.is_some()));
    }

    #[test]
    fn linear_run_matches_transport() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = RunConfig { nonlinear: false, drift: false, energies: false, ..small(tmp.path()) };
        let out = simulate(&cfg).map_err(|(e, _)| e).unwrap();
        let lc = out.summary.linear_check.unwrap();
        assert!(lc.mode_error < 1e-12, "{lc:?}");
        assert!(out.rows.iter().all(|r| r.energy.is_none() && r.position == [0.0, 0.0]));
    }

    #[test]
    fn failed_run_keeps_summary() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = RunConfig { dt: 5.0, t_end: 400.0, epsilon: 0.5, output_every: 5.0, snapshot_every: 400.0, ..small(tmp.path()) };
        if let Err((_, partial)) = simulate(&cfg) {
            let p = partial.expect("summary written");
            assert_eq!(p.summary.status, "failed");
            assert!(tmp.path().join(SUMMARY_FILE).exists());
        }
    }
}
