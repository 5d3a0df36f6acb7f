use std::fs;
use std::path::Path;
use std::process::Command;

use vortex_damping::config::{GridConfig, RunConfig};
use vortex_damping::dynamics::conserved_quantities;
use vortex_damping::gevrey::ramped_plateau;
use vortex_damping::report::{write_report, REPORT_FILE};
use vortex_damping::run::{estimate_p_infinity, initial_state, simulate, SERIES_COLUMNS, SERIES_FILE, SUMMARY_FILE};

fn small(dir: &Path) -> RunConfig {
    RunConfig {
        grid: GridConfig { n_theta: 16, n_r: 256, r_max: 8.0, ..GridConfig::default() },
        t_end: 1.0,
        output_every: 0.25,
        snapshot_every: 0.5,
        v_nodes: 8192,
        output_dir: dir.to_path_buf(),
        ..RunConfig::default()
    }
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vortex-damping"))
}

fn series_rows(dir: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(dir.join(SERIES_FILE)).unwrap();
    assert_eq!(r.headers().unwrap().iter().collect::<Vec<_>>(), SERIES_COLUMNS);
    r.records().map(|x| x.unwrap().iter().map(str::to_owned).collect()).collect()
}

#[test]
fn zero_perturbation_keeps_diagnostics_constant() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = RunConfig { epsilon: 0.0, ..small(tmp.path()) };
    let out = simulate(&cfg).map_err(|(e, _)| e).unwrap();
    assert_eq!(out.summary.status, "ok");
    let rows = series_rows(tmp.path());
    for col in 1..21 {
        let first = &rows[0][col];
        assert!(rows.iter().all(|r| &r[col] == first), "column {} varies", SERIES_COLUMNS[col]);
    }
    assert!(out.rows.iter().all(|r| r.drift_speed == 0.0));
}

#[test]
fn row_count_follows_cadence() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = RunConfig { t_end: 1.2, output_every: 0.25, energies: false, ..small(tmp.path()) };
    simulate(&cfg).map_err(|(e, _)| e).unwrap();
    let rows = series_rows(tmp.path());
    // floor(1.2 / 0.25) + 1 regular rows plus the final time
    assert_eq!(rows.len(), 6);
    let t: Vec<f64> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    assert!(t.windows(2).all(|w| w[1] > w[0]));
    assert_eq!(*t.last().unwrap(), 1.2);
}

#[test]
fn identical_configs_give_identical_series() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    simulate(&small(a.path())).map_err(|(e, _)| e).unwrap();
    simulate(&small(b.path())).map_err(|(e, _)| e).unwrap();
    assert_eq!(fs::read(a.path().join(SERIES_FILE)).unwrap(), fs::read(b.path().join(SERIES_FILE)).unwrap());
}

#[test]
fn p_infinity_of_a_cosine_perturbation() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = RunConfig { mode: 1, symmetric: false, output_dir: tmp.path().to_path_buf(), ..RunConfig::default() };
    let state = initial_state(&cfg).unwrap();
    let c = conserved_quantities(&state);
    let p = estimate_p_infinity(&c, cfg.kappa);
    // ∫x ω₀ dA = επ ∫ r² g dr for ω₀ = ε cos θ g(r), by a fine midpoint rule
    let [lo, hi] = cfg.support;
    let n = 200_000;
    let h = (hi - lo) / n as f64;
    let moment: f64 = (0..n).map(|i| lo + (i as f64 + 0.5) * h).map(|r| r * r * ramped_plateau(lo, hi, cfg.ramp, r)).sum::<f64>() * h;
    let expected = cfg.epsilon * std::f64::consts::PI * moment / cfg.kappa;
    assert!((p[0] - expected).abs() < 1e-9 * expected, "{} vs {expected}", p[0]);
    assert!(p[1].abs() < 1e-15);
}

#[test]
fn radial_data_has_no_limit_displacement() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = RunConfig { mode: 0, symmetric: false, ..small(tmp.path()) };
    let c = conserved_quantities(&initial_state(&cfg).unwrap());
    assert_eq!(estimate_p_infinity(&c, cfg.kappa), [0.0, 0.0]);
}

#[test]
fn cli_simulate_then_report() {
    let tmp = tempfile::tempdir().unwrap();
    let run_dir = tmp.path().join("run");
    let cfg_path = tmp.path().join("run.toml");
    fs::write(&cfg_path, RunConfig { energies: false, ..small(&run_dir) }.to_toml()).unwrap();
    let status = bin().args(["simulate", "--config"]).arg(&cfg_path).env("VORTEX_THREADS", "1").status().unwrap();
    assert!(status.success());
    assert!(run_dir.join(SUMMARY_FILE).exists());
    let status = bin().arg("report").arg(&run_dir).status().unwrap();
    assert!(status.success());
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(run_dir.join(REPORT_FILE)).unwrap()).unwrap();
    assert_eq!(report["summary"]["status"], "ok");
    assert_eq!(report["series"]["t"].as_array().unwrap().len(), 5);
}

#[test]
fn cli_rejects_bad_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = tmp.path().join("bad.toml");
    fs::write(&cfg_path, "schema_version = 1\nvartheta0 = 0.5\n").unwrap();
    let status = bin().args(["simulate", "--config"]).arg(&cfg_path).status().unwrap();
    assert!(!status.success());
    fs::write(&cfg_path, "schema_version = 1\nunknown_key = 3\n").unwrap();
    assert!(!bin().args(["simulate", "--config"]).arg(&cfg_path).status().unwrap().success());
}

#[test]
fn aborted_run_leaves_parsable_series() {
    let tmp = tempfile::tempdir().unwrap();
    // a time step far above the advective limit trips the stability check
    let cfg = RunConfig { epsilon: 0.05, dt: 2.0, t_end: 40.0, output_every: 2.0, snapshot_every: 40.0, ..small(tmp.path()) };
    match simulate(&cfg) {
        Ok(_) => panic!("expected an aborted run"),
        Err((_, partial)) => {
            let p = partial.expect("partial outcome");
            assert_eq!(p.summary.status, "failed");
            assert!(p.summary.error.is_some());
        }
    }
    let rows = series_rows(tmp.path());
    assert!(!rows.is_empty());
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join(SUMMARY_FILE)).unwrap()).unwrap();
    assert_eq!(summary["status"], "failed");
}

#[test]
fn report_of_empty_directory_lists_everything_missing() {
    let tmp = tempfile::tempdir().unwrap();
    let m = write_report(tmp.path()).unwrap();
    assert!(m.present.is_empty());
    assert_eq!(m.missing.len(), 4);
}
