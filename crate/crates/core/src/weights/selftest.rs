//! Sweep-based verification of the weight construction: exact properties are
//! counted as violations, constant-bearing comparisons are reported as
//! empirical constants and checked against a stored baseline.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::*;
use crate::gevrey::{bracket, bracket2};

/// Empirical constants recorded by a reference run.
pub const DEFAULT_BASELINE: &str = include_str!("../../data/weights_baseline.json");

const MAX_LISTED: usize = 200;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub delta: f64,
    pub delta0: f64,
    /// Frequencies as multiples of `δ^{-10}`.
    pub eta_multiples: Vec<f64>,
    /// Number of times in `[0, t_span·η]`, spaced so that `ln(1 + t)` is uniform.
    pub n_t: usize,
    pub t_span: f64,
    pub k_max: i64,
}

impl SweepSpec {
    pub fn standard(delta: f64) -> Self {
        Self { delta, delta0: 0.1, eta_multiples: vec![2.0, 10.0], n_t: 64, t_span: 4.0, k_max: 3 }
    }

    pub fn params(&self) -> Result<WeightParams> {
        WeightParams::new(self.delta0, self.delta)
    }

    pub fn times(&self, eta: f64) -> Vec<f64> {
        let top = (self.t_span * eta).ln_1p();
        let n = self.n_t.max(2);
        (0..n).map(|i| (top * i as f64 / (n - 1) as f64).exp_m1()).collect()
    }

    fn stars(&self) -> Vec<Star> {
        let mut s = vec![Star::NonResonant, Star::Resonant];
        s.extend((-self.k_max..=self.k_max).map(Star::Mode));
        s
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SelftestSpec {
    pub sweeps: Vec<SweepSpec>,
    /// Relative slack for comparisons between quadrature results.
    pub quadrature_slack: f64,
    /// Relative slack for continuity and for comparisons of raw weights.
    pub exact_slack: f64,
}

impl Default for SelftestSpec {
    fn default() -> Self {
        Self { sweeps: vec![SweepSpec::standard(0.5), SweepSpec::standard(0.1)], quadrature_slack: 1e-9, exact_slack: 1e-12 }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct PropertyOutcome {
    pub property: String,
    pub checked: usize,
    pub violations: usize,
    /// Largest defect seen, in the units of the property (0 when all hold).
    pub worst: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Violation {
    pub property: String,
    pub delta: f64,
    pub star: String,
    pub t: f64,
    pub xi: f64,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct BaselineCheck {
    pub name: String,
    pub value: f64,
    pub baseline: Option<f64>,
    pub ratio: Option<f64>,
    pub within: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SelftestReport {
    pub sweep: Vec<SweepSpec>,
    pub property: Vec<PropertyOutcome>,
    /// At most a few hundred entries; counts are in `property`.
    pub violations: Vec<Violation>,
    pub empirical_constants: BTreeMap<String, f64>,
    pub baseline: Vec<BaselineCheck>,
    pub passed: bool,
}

impl SelftestReport {
    pub fn total_violations(&self) -> usize {
        self.property.iter().map(|p| p.violations).sum()
    }
}

struct Tally {
    delta: f64,
    outcomes: BTreeMap<&'static str, PropertyOutcome>,
    violations: Vec<Violation>,
}

impl Tally {
    /// Records one check; `defect > 0` is a violation.
    fn check(&mut self, property: &'static str, defect: f64, star: Star, t: f64, xi: f64, detail: impl FnOnce() -> String) {
        let o = self.outcomes.entry(property).or_insert_with(|| PropertyOutcome { property: property.into(), ..Default::default() });
        o.checked += 1;
        // NaN counts as a violation
        if !(defect <= 0.0) {
            o.violations += 1;
            o.worst = if defect.is_nan() { f64::NAN } else { o.worst.max(defect) };
            if self.violations.len() < MAX_LISTED {
                self.violations.push(Violation { property: property.into(), delta: self.delta, star: star.to_string(), t, xi, detail: detail() });
            }
        }
    }
}

/// Everything evaluated at one `(t, ξ)`; star-indexed arrays follow
/// [`SweepSpec::stars`].
struct Point {
    t: f64,
    xi: f64,
    log_w: Vec<f64>,
    log_b: Vec<f64>,
    log_a: Vec<f64>,
    rate_a: Vec<f64>,
    mu: Vec<MuWeights>,
    mu_sharp: f64,
    lambda: f64,
}

fn evaluate(t: f64, xi: f64, stars: &[Star], p: &WeightParams) -> Result<Point> {
    let lambda = lambda_of(t, p);
    let log_w = stars.iter().map(|&s| log_w_raw(s, t, xi, p)).collect();
    let log_b = stars.iter().map(|&s| log_b_mollified(s, t, xi, p)).collect::<Result<Vec<_>>>()?;
    let log_a = stars.iter().zip(&log_b).map(|(&s, &lb)| log_a_from(s, xi, lambda, lb, p)).collect();
    let rate_a = stars.iter().map(|&s| log_a_rate(s, t, xi, p)).collect::<Result<Vec<_>>>()?;
    let mu = stars
        .iter()
        .filter_map(|s| match s {
            Star::Mode(k) => Some(mu_weights(t, xi, *k, p)),
            _ => None,
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Point { t, xi, log_w, log_b, log_a, rate_a, mu, mu_sharp: mu_sharp(t, xi, p), lambda })
}

/// `μ^#` by a linear scan over the critical times.
fn mu_sharp_reference(t: f64, xi: f64, p: &WeightParams) -> f64 {
    let x = xi.abs();
    let d2 = p.delta * p.delta;
    if x <= p.threshold() || t > 2.0 * x {
        return 0.0;
    }
    let k0 = (p.delta.powi(3) * x).sqrt().floor() as usize;
    for l in 1..=k0 {
        if t >= t_crit(l, x) && t <= t_crit(l - 1, x) {
            return d2 / (1.0 + d2 * (t - x / l as f64).abs());
        }
    }
    d2
}

fn rel(a: f64, slack: f64) -> f64 {
    slack * a.abs().max(1.0)
}

/// Largest `ln` of the comparison sum minus `√δ|η−ξ|^{1/2}` over the pairs
/// `(ξ, η)` supplied.
fn comparison_log_constant(pairs: &[(f64, f64)], t: f64, ks: &[i64], p: &WeightParams) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for &(xi, eta) in pairs {
        let ratio = |s: Star| log_w_raw(s, t, xi, p) - log_w_raw(s, t, eta, p);
        let base = ratio(Star::NonResonant).max(ratio(Star::Resonant));
        let penalty = p.delta.sqrt() * (eta - xi).abs().sqrt();
        for &k in ks {
            let terms = [ratio(Star::NonResonant), ratio(Star::Resonant), ratio(Star::Mode(k))];
            let m = base.max(terms[2]);
            let lse = m + terms.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
            worst = worst.max(lse - penalty);
        }
    }
    worst
}

fn run_sweep(spec: &SelftestSpec, sweep: &SweepSpec, constants: &mut BTreeMap<String, f64>) -> Result<Tally> {
    let p = sweep.params()?;
    let stars = sweep.stars();
    let ks: Vec<i64> = (-sweep.k_max..=sweep.k_max).collect();
    let mode_index = |k: i64| (k + sweep.k_max) as usize + 2;
    let (qs, es) = (spec.quadrature_slack, spec.exact_slack);
    let d2 = p.delta * p.delta;
    let mut tally = Tally { delta: p.delta, outcomes: BTreeMap::new(), violations: Vec::new() };
    let (mut cmp_far, mut cmp_near) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    let (mut mu_k_lo, mut mu_k_hi, mut mu_r_lo, mut mu_r_hi) = (f64::INFINITY, 0.0_f64, f64::INFINITY, 0.0_f64);

    for &mult in &sweep.eta_multiples {
        let eta = mult * p.threshold();
        let times = sweep.times(eta);
        let sides: Vec<Vec<Point>> = [eta, -eta]
            .iter()
            .map(|&xi| times.par_iter().map(|&t| evaluate(t, xi, &stars, &p)).collect::<Result<Vec<_>>>())
            .collect::<Result<_>>()?;

        for pts in &sides {
            for pt in pts {
                let (t, xi) = (pt.t, pt.xi);
                let floor = -p.delta * xi.abs().sqrt();
                let (nr, r) = (pt.log_b[0], pt.log_b[1]);
                tally.check("b_ordering", floor - r - rel(floor, qs), Star::Resonant, t, xi, || format!("ln b_R = {r} below {floor}"));
                tally.check("b_ordering", nr - rel(nr, qs), Star::NonResonant, t, xi, || format!("ln b_NR = {nr} > 0"));
                let a_gap = pt.log_a[0] - pt.log_a[1];
                tally.check("a_resonant_dominates", a_gap - rel(pt.log_a[1], qs), Star::Resonant, t, xi, || format!("ln A_NR − ln A_R = {a_gap}"));
                for &k in &ks {
                    let i = mode_index(k);
                    let s = Star::Mode(k);
                    let bk = pt.log_b[i];
                    tally.check("b_ordering", r - bk - rel(bk, qs), s, t, xi, || format!("ln b_R = {r} > ln b_k = {bk}"));
                    tally.check("b_ordering", bk - nr - rel(bk, qs), s, t, xi, || format!("ln b_k = {bk} > ln b_NR = {nr}"));
                    let wk = pt.log_w[i];
                    let raw = (pt.log_w[1] - wk).max(wk - pt.log_w[0]);
                    tally.check("w_ordering", raw, s, t, xi, || format!("ln w_R, ln w_k, ln w_NR = {}, {wk}, {}", pt.log_w[1], pt.log_w[0]));
                    if (k as f64) * xi <= 0.0 {
                        let d = (wk - pt.log_w[0]).abs();
                        tally.check("w_mode_off_resonance", d, s, t, xi, || format!("w_k differs from w_NR by {d}"));
                    }
                    let fl = 1.1 * p.delta0 * bracket2(k as f64, xi).sqrt();
                    let ak = pt.log_a[i];
                    tally.check("a_mode_floor", fl - ak, s, t, xi, || format!("ln A_k = {ak} below floor {fl}"));
                    let mu = &pt.mu[(k + sweep.k_max) as usize];
                    let rate = pt.rate_a[i].abs();
                    if rate > 0.0 {
                        mu_k_lo = mu_k_lo.min(mu.mu_k / rate);
                        mu_k_hi = mu_k_hi.max(mu.mu_k / rate);
                    }
                    let mu_r_floor = bracket(xi).sqrt() / bracket(t).powf(1.0 + p.sigma0);
                    tally.check("mu_r_floor", mu_r_floor - mu.mu_r, s, t, xi, || format!("μ_R = {} below {mu_r_floor}", mu.mu_r));
                }
                for w in &pt.log_w {
                    tally.check("w_range", *w, Star::NonResonant, t, xi, || format!("ln w = {w} > 0"));
                }
                let reference = mu_sharp_reference(t, xi, &p);
                let d = (pt.mu_sharp - reference).abs();
                tally.check("mu_sharp_cases", if d == 0.0 { 0.0 } else { d.max(f64::MIN_POSITIVE) }, Star::NonResonant, t, xi, || {
                    format!("μ^# = {} but case formula gives {reference}", pt.mu_sharp)
                });
                let out = (-pt.mu_sharp).max(pt.mu_sharp - d2);
                tally.check("mu_sharp_range", out, Star::NonResonant, t, xi, || format!("μ^# = {} outside [0, δ²]", pt.mu_sharp));
                let rate_r = pt.rate_a[1].abs();
                let mu_r = pt.mu[0].mu_r;
                if rate_r > 0.0 {
                    mu_r_lo = mu_r_lo.min(mu_r / rate_r);
                    mu_r_hi = mu_r_hi.max(mu_r / rate_r);
                }
            }

            for w in pts.windows(2) {
                let (a, b) = (&w[0], &w[1]);
                let lam = (b.lambda - a.lambda).max(p.delta0 - b.lambda).max(b.lambda - 1.5 * p.delta0);
                let lam = if lam == 0.0 { f64::MIN_POSITIVE } else { lam };
                tally.check("lambda_decreasing", lam, Star::NonResonant, b.t, b.xi, || format!("λ = {} after {}", b.lambda, a.lambda));
                for (i, &s) in stars.iter().enumerate() {
                    let dw = a.log_w[i] - b.log_w[i] - rel(a.log_w[i], es);
                    tally.check("w_monotone", dw, s, b.t, b.xi, || format!("ln w drops from {} to {}", a.log_w[i], b.log_w[i]));
                    let da = b.log_a[i] - a.log_a[i] - rel(a.log_a[i], qs);
                    tally.check("a_monotone", da, s, b.t, b.xi, || format!("ln A grows from {} to {}", a.log_a[i], b.log_a[i]));
                }
            }
        }

        for (pos, neg) in sides[0].iter().zip(&sides[1]) {
            for &k in &ks {
                let (i, j) = (mode_index(k), mode_index(-k));
                let d = (pos.log_w[i] - neg.log_w[j]).abs();
                tally.check("w_symmetry", if d == 0.0 { 0.0 } else { d }, Star::Mode(k), pos.t, pos.xi, || format!("w_k(η) − w_(−k)(−η) = {d} in log"));
                let da = (pos.log_a[i] - neg.log_a[j]).abs() - rel(pos.log_a[i], qs);
                tally.check("a_symmetry", da, Star::Mode(k), pos.t, pos.xi, || format!("A_k(ξ) vs A_(−k)(−ξ) differ by {da} in log"));
            }
            for i in 0..2 {
                let d = (pos.log_w[i] - neg.log_w[i]).abs();
                tally.check("w_symmetry", d, stars[i], pos.t, pos.xi, || format!("w(η) − w(−η) = {d} in log"));
            }
        }

        let schedule = Schedule::new(eta, &p);
        for &s in &stars {
            for (t, left, right) in breakpoint_limits(&schedule, s, &p) {
                let jump = (left - right).abs() - rel(left, es);
                tally.check("continuity", jump, s, t, eta, || format!("one-sided limits {left} and {right}"));
            }
        }
        let ln_x = -p.delta.powf(1.5) * (1.0 / p.delta).ln() * eta.sqrt();
        let v = schedule.at_crit[schedule.k0];
        let window = (4.0 * ln_x - v).max(v - ln_x / 4.0);
        tally.check("window_bound", window, Star::NonResonant, t_crit(schedule.k0, eta), eta, || format!("ln w = {v}, ln X = {ln_x}"));

        let below = 0.5 * p.threshold();
        for &t in &times {
            for &s in &stars {
                let w = log_w_raw(s, t, below, &p).abs();
                tally.check("w_trivial_below_threshold", w, s, t, below, || format!("ln w = {w}"));
            }
            let m = mu_sharp(t, below, &p);
            tally.check("mu_sharp_cases", m, Star::NonResonant, t, below, || format!("μ^# = {m} below threshold"));
        }

        for &t in &times {
            let far: Vec<(f64, f64)> = [-1.5, -0.5, -0.1, -0.01, 0.01, 0.1, 0.5, 1.0].iter().map(|s| (eta * (1.0 + s), eta)).collect();
            cmp_far = cmp_far.max(comparison_log_constant(&far, t, &ks, &p));
            let l1 = mollifier_width(t, eta, 1.0);
            let near: Vec<(f64, f64)> = [-10.0, -3.0, -1.0, 1.0, 3.0, 10.0].iter().map(|c| (eta + c * l1, eta)).collect();
            cmp_near = cmp_near.max(comparison_log_constant(&near, t, &ks, &p));
        }
    }

    let tag = format!("delta={}", sweep.delta);
    // the comparison constants can under- or overflow, so they are kept as logarithms
    constants.insert(format!("{tag}/ln_comparison"), cmp_far);
    constants.insert(format!("{tag}/ln_comparison_near"), cmp_near);
    constants.insert(format!("{tag}/mu_k_over_rate_min"), mu_k_lo);
    constants.insert(format!("{tag}/mu_k_over_rate_max"), mu_k_hi);
    constants.insert(format!("{tag}/mu_r_over_rate_min"), mu_r_lo);
    constants.insert(format!("{tag}/mu_r_over_rate_max"), mu_r_hi);
    Ok(tally)
}

fn is_log(name: &str) -> bool {
    name.rsplit('/').next().is_some_and(|n| n.starts_with("ln_"))
}

/// Runs every sweep and compares the empirical constants with `baseline`
/// (name to value); each must lie within a factor 2, where names starting
/// with `ln_` hold logarithms.
pub fn weight_selftest(spec: &SelftestSpec, baseline: &BTreeMap<String, f64>) -> Result<SelftestReport> {
    let mut constants = BTreeMap::new();
    let mut outcomes: BTreeMap<&'static str, PropertyOutcome> = BTreeMap::new();
    let mut violations = Vec::new();
    for sweep in &spec.sweeps {
        let tally = run_sweep(spec, sweep, &mut constants)?;
        for (name, o) in tally.outcomes {
            let e = outcomes.entry(name).or_insert_with(|| PropertyOutcome { property: name.into(), ..Default::default() });
            e.checked += o.checked;
            e.violations += o.violations;
            e.worst = e.worst.max(o.worst);
        }
        violations.extend(tally.violations);
    }
    violations.truncate(MAX_LISTED);
    let checks: Vec<BaselineCheck> = constants
        .iter()
        .map(|(name, &value)| {
            let base = baseline.get(name).copied();
            let ratio = base.map(|b| if is_log(name) { (value - b).exp() } else { value / b });
            let within = ratio.is_some_and(|r| (0.5..=2.0).contains(&r));
            BaselineCheck { name: name.clone(), value, baseline: base, ratio, within }
        })
        .collect();
    let property: Vec<PropertyOutcome> = outcomes.into_values().collect();
    let passed = property.iter().all(|p| p.violations == 0) && checks.iter().all(|c| c.within);
    Ok(SelftestReport { sweep: spec.sweeps.clone(), property, violations, empirical_constants: constants, baseline: checks, passed })
}

pub fn default_baseline() -> BTreeMap<String, f64> {
    serde_json::from_str(DEFAULT_BASELINE).expect("bundled baseline is valid JSON")
}
