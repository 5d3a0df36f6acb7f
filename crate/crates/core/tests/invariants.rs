//! Property tests for the structural invariants of each module.

use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;

use vortex_damping::config::{GridConfig, RunConfig};
use vortex_damping::coordinates::{upsilon_bounds, CoordinateMap};
use vortex_damping::dynamics::{step, DynamicsOptions, SimState};
use vortex_damping::energies::{energy_f, energy_phi, energy_scalar, BAccumulator, EnergyParams, ScalarKind, WeightsAt};
use vortex_damping::gevrey::{gevrey_norm, plateau_cutoff, smooth_step_a, spectrum_of_profiles, GevreyNormSpec};
use vortex_damping::grid::{dealiased_product, diff_profile, to_modes, to_physical, Grid, PhysicalField, PolarField};
use vortex_damping::poisson::{mean_flow, solve_stream_mode};
use vortex_damping::run::initial_state;
use vortex_damping::weights::{lambda_infinity, lambda_of, mu_sharp, w_raw, Star, WeightParams};

fn grid(n_theta: usize, n_r: usize) -> Grid {
    Grid::new(n_theta, n_r, 0.05, 8.0, 2.0 / 3.0).unwrap()
}

fn random_field(g: &Grid, seed: &[f64]) -> PolarField {
    PolarField::from_modes_fn(g, |k, r| {
        let a = seed[k % seed.len()];
        let b = seed[(k + 3) % seed.len()];
        let env = (-(r - 2.0).powi(2)).exp();
        Complex64::new(a * env * (r * (k + 1) as f64).cos(), b * env * (r + k as f64).sin())
    })
}

fn small_run() -> RunConfig {
    RunConfig { grid: GridConfig { n_theta: 16, n_r: 256, r_max: 8.0, ..GridConfig::default() }, v_nodes: 8192, ..RunConfig::default() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn transform_round_trip(seed in proptest::collection::vec(-1.0f64..1.0, 8), n_theta in prop::sample::select(vec![16usize, 32, 64])) {
        let g = grid(n_theta, 64);
        let f = random_field(&g, &seed);
        let back = to_modes(&g, &to_physical(&f).unwrap()).unwrap();
        prop_assert!(back.sub(&f).norm() <= 1e-12 * f.norm());
    }

    #[test]
    fn stencils_exact_on_quartics(c in proptest::collection::vec(-2.0f64..2.0, 5), x0 in -3.0f64..3.0, h in 0.01f64..0.2) {
        let n = 40;
        let xs: Vec<f64> = (0..n).map(|i| x0 + h * i as f64).collect();
        let p = |x: f64| c[0] + x * (c[1] + x * (c[2] + x * (c[3] + x * c[4])));
        let dp = |x: f64| c[1] + x * (2.0 * c[2] + x * (3.0 * c[3] + x * 4.0 * c[4]));
        let ddp = |x: f64| 2.0 * c[2] + x * (6.0 * c[3] + x * 12.0 * c[4]);
        let vals: Vec<f64> = xs.iter().map(|&x| p(x)).collect();
        let scale = vals.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let d1 = diff_profile(&vals, h, 1);
        let d2 = diff_profile(&vals, h, 2);
        for (i, &x) in xs.iter().enumerate() {
            prop_assert!((d1[i] - dp(x)).abs() <= 1e-11 * scale / h);
            prop_assert!((d2[i] - ddp(x)).abs() <= 1e-10 * scale / (h * h));
        }
    }

    #[test]
    fn dealiased_product_drops_sum_frequency(k1 in 1usize..=21, k2 in 1usize..=21) {
        let g = grid(64, 9);
        prop_assume!(k1 + k2 > g.k_max() && k1 <= g.k_max() && k2 <= g.k_max());
        let wave = |k: usize| to_modes(&g, &PhysicalField::from_fn(&g, |th, _| (k as f64 * th).cos())).unwrap();
        let p = dealiased_product(&wave(k1), &wave(k2)).unwrap();
        let d = k1.abs_diff(k2);
        let expected = to_modes(&g, &PhysicalField::from_fn(&g, |th, _| 0.5 * (d as f64 * th).cos())).unwrap();
        prop_assert!(p.sub(&expected).norm() < 1e-13);
    }

    #[test]
    fn stream_solve_is_linear_and_conjugate_symmetric(
        seed in proptest::collection::vec(-1.0f64..1.0, 6), k in 1i64..40, a in -3.0f64..3.0,
    ) {
        let g = grid(16, 256);
        let f = random_field(&g, &seed);
        let h = random_field(&g, &seed.iter().rev().copied().collect::<Vec<_>>());
        let w1 = f.mode(1).to_vec();
        let w2 = h.mode(1).to_vec();
        let s1 = solve_stream_mode(&g, k, &w1).unwrap();
        let s2 = solve_stream_mode(&g, k, &w2).unwrap();
        let combo: Vec<Complex64> = w1.iter().zip(&w2).map(|(x, y)| x * a + y).collect();
        let sc = solve_stream_mode(&g, k, &combo).unwrap();
        let conj: Vec<Complex64> = w1.iter().map(|x| x.conj()).collect();
        let s_conj = solve_stream_mode(&g, -k, &conj).unwrap();
        let scale = s1.iter().chain(&s2).fold(1e-300f64, |m, z| m.max(z.norm()));
        for j in 0..g.n_r {
            prop_assert!((sc[j] - (s1[j] * a + s2[j])).norm() <= 1e-12 * scale * (1.0 + a.abs()));
            prop_assert!((s_conj[j] - s1[j].conj()).norm() <= 1e-13 * scale);
        }
    }

    #[test]
    fn mean_flow_plateau_outside_support(c in 0.1f64..5.0, lo in 0.5f64..1.5, width in 0.5f64..2.0) {
        let g = grid(16, 512);
        let hi = lo + width;
        let omega: Vec<f64> = g.radii().iter().map(|&r| if r > lo && r < hi { c * ((r - lo) * (hi - r)).powi(2) } else { 0.0 }).collect();
        let u = mean_flow(&g, &omega);
        // cells whose quadrature stencil reaches a support node are excluded
        let margin = 8;
        let last = g.radii().iter().rposition(|&r| r < hi).unwrap() + margin;
        let first = g.radii().iter().position(|&r| r > lo).unwrap() - margin;
        for j in 0..first {
            prop_assert_eq!(u[j], 0.0);
        }
        // outside the support r·u_θ is the constant ∫ρ⟨ω⟩ dρ
        let circ = u[last] * g.r(last);
        for j in last..g.n_r {
            prop_assert!((u[j] * g.r(j) - circ).abs() <= 1e-14 * circ.abs());
        }
    }

    #[test]
    fn weight_ranges(eta in 0.0f64..5000.0, t in 0.0f64..12000.0, k in -30i64..30, sign in prop::bool::ANY) {
        let p = WeightParams::new(0.1, 0.5).unwrap();
        let eta = if sign { eta } else { -eta };
        let nr = w_raw(Star::NonResonant, t, eta, &p);
        let r = w_raw(Star::Resonant, t, eta, &p);
        let wk = w_raw(Star::Mode(k), t, eta, &p);
        for w in [nr, r, wk] {
            prop_assert!(w > 0.0 && w <= 1.0);
            if eta.abs() <= p.threshold() || t >= 2.0 * eta.abs() {
                prop_assert_eq!(w, 1.0);
            }
        }
        prop_assert!(r <= wk * (1.0 + 1e-12) && wk <= nr * (1.0 + 1e-12));
        if (k as f64) * eta <= 0.0 {
            prop_assert!((wk - nr).abs() <= 1e-12 * nr);
        }
    }

    #[test]
    fn lambda_decreases_within_range(t1 in 0.0f64..1e5, dt in 1e-3f64..1e5, delta0 in 0.01f64..0.125) {
        let p = WeightParams { delta0, ..WeightParams::default() };
        let (a, b) = (lambda_of(t1, &p), lambda_of(t1 + dt, &p));
        prop_assert!(b < a);
        prop_assert!(a <= 1.5 * delta0 && b > delta0);
        prop_assert!(lambda_infinity(&p) > delta0);
    }

    #[test]
    fn mu_sharp_range(t in 0.0f64..10000.0, xi in -5000.0f64..5000.0) {
        let p = WeightParams::new(0.1, 0.5).unwrap();
        let m = mu_sharp(t, xi, &p);
        prop_assert!((0.0..=0.25).contains(&m));
        if xi.abs() <= p.threshold() || t > 2.0 * xi.abs() {
            prop_assert_eq!(m, 0.0);
        }
    }

    #[test]
    fn cutoffs_in_unit_interval(x in -0.5f64..1.5, a in 0.5f64..3.0, rho in 0.9f64..0.99) {
        let c = plateau_cutoff(a, rho, x);
        prop_assert!((0.0..=1.0).contains(&c));
        let s = smooth_step_a(a, x);
        prop_assert!((0.0..=1.0).contains(&s));
        if x <= 0.0 { prop_assert_eq!(s, 0.0); }
        if x >= 1.0 { prop_assert_eq!(s, 1.0); }
    }

    #[test]
    fn gevrey_norm_monotone_in_lambda(
        vals in proptest::collection::vec(-1.0f64..1.0, 64), l1 in 0.0f64..2.0, dl in 0.0f64..2.0, s in 0.1f64..1.0,
    ) {
        let rows = vec![vals.iter().map(|&x| Complex64::new(x, 0.0)).collect::<Vec<_>>(), vals.iter().map(|&x| Complex64::new(0.0, x * x)).collect()];
        let spec = spectrum_of_profiles(&rows, 0.05);
        let n1 = gevrey_norm(&spec, GevreyNormSpec::new(l1.max(1e-6), s).unwrap()).value;
        let n2 = gevrey_norm(&spec, GevreyNormSpec::new(l1.max(1e-6) + dl, s).unwrap()).value;
        prop_assert!(n1 <= n2 * (1.0 + 1e-14));
    }

    #[test]
    fn energies_are_quadratic(vals in proptest::collection::vec(-1.0f64..1.0, 32), c in -10.0f64..10.0, t in 0.0f64..50.0) {
        let p = EnergyParams::default();
        let w = WeightsAt::new(t, &p.weights);
        let rows = |scale: f64| vec![vals.iter().map(|&x| Complex64::new(scale * x, 0.0)).collect::<Vec<_>>(); 3];
        let dv = 0.02;
        let (e1, b1) = energy_f(&spectrum_of_profiles(&rows(1.0), dv), &w).unwrap();
        let (ec, bc) = energy_f(&spectrum_of_profiles(&rows(c), dv), &w).unwrap();
        prop_assert!((ec - c * c * e1).abs() <= 1e-12 * c * c * e1.abs() + 1e-300);
        prop_assert!((bc - c * c * b1).abs() <= 1e-12 * c * c * b1.abs() + 1e-300);
        let (p1, _) = energy_phi(&spectrum_of_profiles(&rows(1.0), dv), &w).unwrap();
        let (pc, _) = energy_phi(&spectrum_of_profiles(&rows(c), dv), &w).unwrap();
        prop_assert!((pc - c * c * p1).abs() <= 1e-12 * c * c * p1.abs() + 1e-300);
        for kind in [ScalarKind::VStar, ScalarKind::RhoStar, ScalarKind::WStar] {
            let scaled: Vec<f64> = vals.iter().map(|x| c * x).collect();
            let (s1, _) = energy_scalar(&vals, dv, kind, &w, &p).unwrap();
            let (sc, _) = energy_scalar(&scaled, dv, kind, &w, &p).unwrap();
            prop_assert!((sc - c * c * s1).abs() <= 1e-12 * c * c * s1.abs() + 1e-300);
        }
    }

    #[test]
    fn b_totals_never_decrease(steps in proptest::collection::vec((0.01f64..2.0, proptest::array::uniform5(0.0f64..10.0)), 1..40)) {
        let mut acc = BAccumulator::default();
        let mut t = 0.0;
        let mut prev = [0.0; 5];
        for (dt, integrands) in steps {
            t += dt;
            let now = acc.push(t, integrands);
            for i in 0..5 {
                prop_assert!(now[i] >= prev[i]);
            }
            prev = now;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn zero_vorticity_is_a_fixed_point(kappa in 0.5f64..5.0, dt in 0.01f64..0.2, nonlinear in prop::bool::ANY) {
        let g = grid(16, 128);
        let state = SimState::new(PolarField::zeros(&g), kappa, [0.0, 0.0]);
        let opts = DynamicsOptions { nonlinear, drift: nonlinear, symmetry: 1 };
        let next = step(&state, dt, &opts).unwrap();
        prop_assert!(next.frame.modes.iter().all(|z| *z == Complex64::new(0.0, 0.0)));
        prop_assert_eq!(next.vortex.position, [0.0, 0.0]);
    }

    #[test]
    fn linear_rotation_keeps_mode_amplitudes(seed in proptest::collection::vec(-1.0f64..1.0, 6), steps in 1usize..20) {
        let g = Grid::new(16, 256, 0.05, 8.0, 2.0 / 3.0).unwrap();
        let omega = random_field(&g, &seed);
        let mut state = SimState::new(omega.clone(), 2.0 * PI, [0.0, 0.0]);
        for _ in 0..steps {
            state = step(&state, 0.05, &DynamicsOptions::linear()).unwrap();
        }
        let lab = state.omega();
        let scale = omega.modes.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        for (a, b) in lab.modes.iter().zip(&omega.modes) {
            prop_assert!((a.norm() - b.norm()).abs() <= 1e-13 * scale);
        }
    }

    #[test]
    fn inverse_map_and_support(epsilon in 0.0f64..2e-3, mode in 1usize..4) {
        let cfg = RunConfig { epsilon, mode, ..small_run() };
        let state = initial_state(&cfg).unwrap();
        let map = CoordinateMap::from_state(&state).unwrap();
        let (lo, hi) = (0.5, 2.0);
        for i in 0..=200 {
            let r = lo + (hi - lo) * i as f64 / 200.0;
            prop_assert!((map.r_of_v(map.v_at(r)).unwrap() - r).abs() < 1e-8);
        }
        let (ul, uh) = upsilon_bounds(state.vortex.kappa, state.vortex.c0, 0.125);
        let v_grid: Vec<f64> = (0..4096).map(|i| 0.5 * ul + (2.0 * uh - 0.5 * ul) * i as f64 / 4095.0).collect();
        let prof = map.resample(&v_grid).unwrap();
        for (i, &v) in prof.v.iter().enumerate() {
            if v < ul || v > uh {
                prop_assert_eq!(prof.vstar[i], 0.0);
                prop_assert_eq!(prof.wstar[i], 0.0);
            }
        }
    }
}

#[test]
fn unperturbed_vortex_has_zero_energies() {
    let p = EnergyParams::default();
    let zeros = vec![vec![Complex64::new(0.0, 0.0); 64]; 4];
    let spec = spectrum_of_profiles(&zeros, 0.01);
    for t in [0.0, 0.5, 1.0, 10.0, 200.0] {
        let w = WeightsAt::new(t, &p.weights);
        assert_eq!(energy_f(&spec, &w).unwrap(), (0.0, 0.0));
        assert_eq!(energy_phi(&spec, &w).unwrap(), (0.0, 0.0));
        for kind in [ScalarKind::VStar, ScalarKind::RhoStar, ScalarKind::WStar] {
            assert_eq!(energy_scalar(&[0.0; 64], 0.01, kind, &w, &p).unwrap(), (0.0, 0.0));
        }
    }
}
