//! TOML run configurations. Every file carries `schema_version`; omitted
//! fields take the defaults below, and the resolved configuration is echoed
//! into the run outputs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::coordinates::DEFAULT_V_NODES;
use crate::dynamics::{DynamicsOptions, DEFAULT_RAMP};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::linear_oracle::{geometric_ladder, ModeData, OracleSpec, OscillatoryQuadrature, RadialProfile};
use crate::weights::selftest::{SelftestSpec, SweepSpec};
use crate::weights::WeightParams;

pub const SCHEMA_VERSION: u32 = 1;

fn check_schema(v: u32) -> Result<()> {
    if v == SCHEMA_VERSION {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!("unsupported schema_version {v}, expected {SCHEMA_VERSION}")))
    }
}

fn read_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| Error::InvalidParams(format!("{}: {e}", path.display())))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n_theta: usize,
    pub n_r: usize,
    pub r_min: f64,
    pub r_max: f64,
    pub dealias_fraction: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { n_theta: 256, n_r: 1024, r_min: 0.05, r_max: 16.0, dealias_fraction: 2.0 / 3.0 }
    }
}

impl GridConfig {
    pub fn build(&self) -> Result<Grid> {
        Grid::new(self.n_theta, self.n_r, self.r_min, self.r_max, self.dealias_fraction)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightConfig {
    pub delta0: f64,
    pub delta: f64,
    pub delta_prime: f64,
    pub sigma0: f64,
    pub k_const: f64,
}

impl Default for WeightConfig {
    fn default() -> Self {
        let p = WeightParams::default();
        Self { delta0: p.delta0, delta: p.delta, delta_prime: p.delta_prime, sigma0: p.sigma0, k_const: 1.0 }
    }
}

impl WeightConfig {
    pub fn params(&self) -> Result<WeightParams> {
        let p = WeightParams { delta0: self.delta0, delta: self.delta, delta_prime: self.delta_prime, sigma0: self.sigma0 };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub kappa: f64,
    pub vartheta0: f64,
    pub epsilon: f64,
    /// Angular mode of the initial perturbation.
    pub mode: usize,
    /// Radial support `[lo, hi]` of the initial plateau and its ramp width.
    pub support: [f64; 2],
    pub ramp: f64,
    /// Evolve only multiples of `mode` (exact for the symmetric initial data).
    pub symmetric: bool,
    pub nonlinear: bool,
    pub drift: bool,
    pub grid: GridConfig,
    pub dt: f64,
    pub t_end: f64,
    /// Interval between rows of `series.csv`.
    pub output_every: f64,
    /// Interval between `.snap` files and profile-convergence samples.
    pub snapshot_every: f64,
    /// Record the weighted energies at every output row.
    pub energies: bool,
    pub v_nodes: usize,
    pub weights: WeightConfig,
    /// Window for the decay fits in `summary.json`.
    pub fit_window: [f64; 2],
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            kappa: 1.0,
            vartheta0: 0.125,
            epsilon: 1e-3,
            mode: 2,
            support: [0.5, 2.0],
            ramp: DEFAULT_RAMP,
            symmetric: true,
            nonlinear: true,
            drift: true,
            grid: GridConfig::default(),
            dt: 0.05,
            t_end: 200.0,
            output_every: 1.0,
            snapshot_every: 20.0,
            energies: true,
            v_nodes: DEFAULT_V_NODES,
            weights: WeightConfig::default(),
            fit_window: [20.0, 200.0],
            seed: 0,
            output_dir: PathBuf::from("runs/default"),
        }
    }
}

/// Number of `dt` steps in `span`, refusing spans that are not multiples.
fn steps_in(span: f64, dt: f64, what: &str) -> Result<usize> {
    let n = (span / dt).round();
    if n < 1.0 || ((n * dt - span) / span).abs() > 1e-9 {
        return Err(Error::InvalidParams(format!("{what} = {span} is not a positive multiple of dt = {dt}")));
    }
    Ok(n as usize)
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let c: Self = read_toml(path)?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<()> {
        check_schema(self.schema_version)?;
        let bad = |m: String| Err(Error::InvalidParams(m));
        if !(self.kappa > 0.0) {
            return bad(format!("kappa must be positive, got {}", self.kappa));
        }
        if !(self.vartheta0 > 0.0 && self.vartheta0 <= 0.125) {
            return bad(format!("vartheta0 must lie in (0, 1/8], got {}", self.vartheta0));
        }
        if !(self.epsilon >= 0.0) {
            return bad(format!("epsilon must be non-negative, got {}", self.epsilon));
        }
        let [lo, hi] = self.support;
        if !(lo < hi && lo >= self.vartheta0 && hi <= 1.0 / self.vartheta0) {
            return bad(format!("initial support {:?} must lie in [vartheta0, 1/vartheta0]", self.support));
        }
        if !(self.ramp > 0.0 && 2.0 * self.ramp <= hi - lo) {
            return bad(format!("ramp {} does not fit in the support", self.ramp));
        }
        let grid = self.grid.build()?;
        if grid.r_min >= lo || grid.r_max <= hi {
            return bad("the grid must contain the initial support".into());
        }
        if self.mode > grid.k_max() {
            return bad(format!("mode {} exceeds the retained range {}", self.mode, grid.k_max()));
        }
        if !(self.dt > 0.0 && self.t_end > 0.0) {
            return bad("dt and t_end must be positive".into());
        }
        steps_in(self.t_end, self.dt, "t_end")?;
        steps_in(self.output_every, self.dt, "output_every")?;
        steps_in(self.snapshot_every, self.dt, "snapshot_every")?;
        if self.v_nodes < 64 {
            return bad("v_nodes must be at least 64".into());
        }
        if !(self.fit_window[0] > 0.0 && self.fit_window[1] > self.fit_window[0]) {
            return bad(format!("bad fit window {:?}", self.fit_window));
        }
        self.weights.params()?;
        if !(self.weights.k_const >= 1.0) {
            return bad("k_const must be at least 1".into());
        }
        Ok(())
    }

    pub fn dynamics(&self) -> DynamicsOptions {
        DynamicsOptions { nonlinear: self.nonlinear, drift: self.drift, symmetry: if self.symmetric { self.mode.max(1) } else { 1 } }
    }

    pub fn total_steps(&self) -> usize {
        steps_in(self.t_end, self.dt, "t_end").expect("validated")
    }

    pub fn output_stride(&self) -> usize {
        steps_in(self.output_every, self.dt, "output_every").expect("validated")
    }

    pub fn snapshot_stride(&self) -> usize {
        steps_in(self.snapshot_every, self.dt, "snapshot_every").expect("validated")
    }

    /// Support bounds enforced during the run.
    pub fn support_limits(&self) -> (f64, f64) {
        (0.5 * self.vartheta0, 2.0 / self.vartheta0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderConfig {
    pub t_min: f64,
    pub t_max: f64,
    pub ratio: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadiiConfig {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    pub schema_version: u32,
    pub kappa: f64,
    pub vartheta0: f64,
    pub modes: Vec<ModeData>,
    pub ladder: LadderConfig,
    pub radii: RadiiConfig,
    pub panel_fraction: f64,
    pub order: usize,
    pub max_panels: usize,
    pub fit_window: [f64; 2],
    pub output_dir: PathBuf,
}

impl Default for OracleConfig {
    fn default() -> Self {
        let q = OscillatoryQuadrature::default();
        Self {
            schema_version: SCHEMA_VERSION,
            kappa: 1.0,
            vartheta0: 0.125,
            modes: vec![ModeData { k: 1, coeff: [1.0, 0.0], profile: RadialProfile::Bump { lo: 0.8, hi: 1.2 } }],
            ladder: LadderConfig { t_min: 1.0, t_max: 1000.0, ratio: 2f64.powf(0.25) },
            radii: RadiiConfig { lo: 0.5, hi: 2.0, count: 151 },
            panel_fraction: q.panel_fraction,
            order: q.order,
            max_panels: q.max_panels,
            fit_window: [20.0, 500.0],
            output_dir: PathBuf::from("runs/oracle"),
        }
    }
}

impl OracleConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let c: Self = read_toml(path)?;
        c.spec()?;
        Ok(c)
    }

    pub fn spec(&self) -> Result<OracleSpec> {
        check_schema(self.schema_version)?;
        for m in &self.modes {
            let (lo, hi) = m.profile.support();
            if !(lo < hi && lo >= 0.5 * self.vartheta0 && hi <= 2.0 / self.vartheta0) {
                return Err(Error::InvalidParams(format!("mode {} profile support [{lo}, {hi}] outside [vartheta0/2, 2/vartheta0]", m.k)));
            }
        }
        let l = self.ladder;
        if !(l.t_min > 0.0 && l.t_max >= l.t_min && l.ratio > 1.0) {
            return Err(Error::InvalidParams(format!("bad time ladder {l:?}")));
        }
        let r = self.radii;
        if !(r.lo > 0.0 && r.hi > r.lo && r.count >= 2) {
            return Err(Error::InvalidParams(format!("bad radii {r:?}")));
        }
        let spec = OracleSpec {
            kappa: self.kappa,
            modes: self.modes.clone(),
            ladder: geometric_ladder(l.t_min, l.t_max, l.ratio),
            radii: (0..r.count).map(|i| r.lo + (r.hi - r.lo) * i as f64 / (r.count - 1) as f64).collect(),
            quadrature: OscillatoryQuadrature { panel_fraction: self.panel_fraction, order: self.order, max_panels: self.max_panels },
            fit_window: (self.fit_window[0], self.fit_window[1]),
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelftestConfig {
    pub schema_version: u32,
    pub sweeps: Vec<SweepSpec>,
    pub quadrature_slack: f64,
    pub exact_slack: f64,
    /// JSON map of constant name to value; the bundled baseline when absent.
    pub baseline: Option<PathBuf>,
    pub output_dir: PathBuf,
}

impl Default for SelftestConfig {
    fn default() -> Self {
        let s = SelftestSpec::default();
        Self {
            schema_version: SCHEMA_VERSION,
            sweeps: s.sweeps,
            quadrature_slack: s.quadrature_slack,
            exact_slack: s.exact_slack,
            baseline: None,
            output_dir: PathBuf::from("runs/weights"),
        }
    }
}

impl SelftestConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let c: Self = read_toml(path)?;
        check_schema(c.schema_version)?;
        for s in &c.sweeps {
            s.params()?;
        }
        Ok(c)
    }

    pub fn spec(&self) -> SelftestSpec {
        SelftestSpec { sweeps: self.sweeps.clone(), quadrature_slack: self.quadrature_slack, exact_slack: self.exact_slack }
    }
}
