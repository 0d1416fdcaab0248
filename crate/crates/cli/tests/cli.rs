//! End-to-end tests driving the installed binary.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use stickslip::dynamics::{
    simulate_from_surface_trace, FrictionPair, SurfaceMotion, SystemState, TransportConfig,
    VelocityTrace,
};
use stickslip::waveforms::sawtooth_waveform;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_stickslip"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("stickslip-cli-{tag}-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn simulate_reports_expected_normalized_velocity() {
    let out = run(&[
        "simulate", "--waveform", "optimal", "--fn", "5", "--alpha", "10", "--mus", "0.7",
        "--muk", "0.6",
    ]);
    assert!(out.status.success(), "{}", stderr_of(&out));
    let text = stdout_of(&out);
    let line = text
        .lines()
        .find(|l| l.contains("v_ave/(gT)"))
        .expect("summary line");
    let value: f64 = line
        .rsplit_once("v_ave/(gT) = ")
        .unwrap()
        .1
        .trim()
        .parse()
        .unwrap();
    assert!(
        (value - 0.3107).abs() < 0.002,
        "normalized velocity {value} far from expected"
    );
    assert!(text.contains("slipping_down 0.0000"));
}

#[test]
fn simulate_rejects_infeasible_squeeze_naming_the_bound() {
    let out = run(&["simulate", "--fn", "16", "--alpha", "10", "--muk", "0.6"]);
    assert_eq!(out.status.code(), Some(2), "validation errors exit with 2");
    let err = stderr_of(&out);
    assert!(err.contains("f_n_max"), "{err}");
    assert!(err.contains("15"), "{err}");
}

#[test]
fn simulate_zero_amplitude_sampled_waveform_is_all_sticking() {
    let dir = temp_dir("zero-wave");
    let wave = dir.join("zero.csv");
    let mut text = String::from("t,a\n");
    for k in 0..100 {
        text.push_str(&format!("{},0.0\n", k as f64 * 0.001));
    }
    fs::write(&wave, text).unwrap();

    let out = run(&[
        "simulate", "--waveform", wave.to_str().unwrap(), "--fn", "5", "--alpha", "10",
        "--periods", "15",
    ]);
    assert!(out.status.success(), "{}", stderr_of(&out));
    let text = stdout_of(&out);
    assert!(text.contains("sticking 1.0000"), "{text}");
    let line = text.lines().find(|l| l.contains("v_ave =")).unwrap();
    let v: f64 = line
        .split("v_ave = ")
        .nth(1)
        .unwrap()
        .split(' ')
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert!(v.abs() < 1e-12, "zero drive must not transport, got {v}");
}

#[test]
fn simulate_trajectory_export_has_mandatory_header() {
    let dir = temp_dir("traj");
    let path = dir.join("traj.csv");
    let out = run(&[
        "simulate", "--fn", "5", "--alpha", "10", "--periods", "12", "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr_of(&out));
    let csv = fs::read_to_string(&path).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "t,z_s,v_s,a_s,z_p,v_p,mode");
    assert_eq!(csv.lines().count(), 12 * 2000 + 2);
}

#[test]
fn sweep_endpoints_sit_on_the_band_boundaries() {
    let out = run(&[
        "sweep", "--alphas", "10", "--fn-min", "1", "--fn-max", "20", "--fn-points", "100",
    ]);
    assert!(out.status.success(), "{}", stderr_of(&out));
    let text = stdout_of(&out);
    // Zero outside (1/0.7, 15), positive inside.
    for line in text.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 || fields[0] != "10" {
            continue;
        }
        let f_n: f64 = fields[1].parse().unwrap();
        let v: f64 = fields[2].parse().unwrap();
        if f_n <= 1.0 / 0.7 || f_n >= 15.0 {
            assert_eq!(v, 0.0, "nonzero at f_n = {f_n}");
        } else {
            assert!(v > 0.0, "zero inside the band at f_n = {f_n}");
        }
    }
    assert!(text.contains("per-alpha optima"));
}

#[test]
fn sweep_single_point_grid_is_single_row() {
    let out = run(&[
        "sweep", "--alphas", "10", "--fn-min", "5", "--fn-max", "6", "--fn-points", "1",
    ]);
    assert!(out.status.success());
    let text = stdout_of(&out);
    let rows: Vec<&str> = text
        .lines()
        .skip(1)
        .take_while(|l| !l.starts_with("per-alpha"))
        .collect();
    assert_eq!(rows.len(), 1, "{text}");
}

#[test]
fn sweep_verify_sim_cross_checks_within_tolerance() {
    let out = run(&[
        "sweep", "--alphas", "10,20", "--fn-min", "2", "--fn-max", "12", "--fn-points", "40",
        "--verify-sim", "5", "--seed", "3",
    ]);
    assert!(out.status.success(), "{}", stderr_of(&out));
    assert!(stdout_of(&out).contains("cross-check passed"));
}

#[test]
fn feasibility_reports_all_bounds() {
    let out = run(&["feasibility", "--fn", "16", "--alpha", "10"]);
    assert!(out.status.success());
    let text = stdout_of(&out);
    assert!(text.contains("VIOLATED"));
    assert!(text.contains("max_squeeze"));
    assert!(text.contains("static_hold"));
}

#[test]
fn config_file_is_merged_and_flags_win() {
    let dir = temp_dir("config");
    let cfg = dir.join("run.json");
    fs::write(&cfg, r#"{ "f_n": 16.0, "alpha": 10.0 }"#).unwrap();
    // The file alone would be infeasible; the flag overrides it.
    let out = run(&[
        "feasibility", "--config", cfg.to_str().unwrap(), "--fn", "5",
    ]);
    assert!(out.status.success(), "{}", stderr_of(&out));
    assert!(stdout_of(&out).contains("f_n = 5.0000"));

    let bad = dir.join("bad.json");
    fs::write(&bad, r#"{ "f_n": 5.0, "unknown_key": 1 }"#).unwrap();
    let out = run(&["feasibility", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("unknown_key"), "{}", stderr_of(&out));
}

/// Write a small synthetic capture for the fit tests: a sawtooth drive on a
/// feasible rig, sampled at 960 Hz.
fn write_fit_fixture(dir: &std::path::Path, name: &str) -> PathBuf {
    let fric = FrictionPair::new(0.72, 0.6).unwrap();
    let mass = 0.009;
    let f_n_force = 0.9;
    let g = 9.81;
    let f_n = f_n_force / (mass * g);
    let cfg = TransportConfig::new(mass, f_n_force, g, 3.0 * 0.72 * f_n * g, 1.0 / 12.5).unwrap();
    let w = sawtooth_waveform(&cfg, 0.85, 0.6 * (0.72 * f_n - 1.0) * g).unwrap();
    let rate = 960.0;
    let n = 384;
    let v: Vec<f64> = (0..n + 1).map(|k| w.velocity(k as f64 / rate)).collect();
    let drive = VelocityTrace::new(v, rate).unwrap();
    let traj = simulate_from_surface_trace(
        &drive,
        &fric,
        &cfg,
        &SystemState::stuck_to(&drive),
    )
    .unwrap();

    let mut text = String::from("# units: mm\nt,z_surface,z_part\n");
    for k in 0..n {
        let t = k as f64 / rate;
        text.push_str(&format!(
            "{t},{},{}\n",
            traj.surface_position_at(t) * 1000.0,
            traj.part_position_at(t) * 1000.0
        ));
    }
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn fit_is_byte_deterministic_per_seed() {
    let dir = temp_dir("fit");
    let trace = write_fit_fixture(&dir, "trial.csv");
    let args = [
        "fit", "--traces", trace.to_str().unwrap(), "--seed", "5", "--particles", "12",
        "--iterations", "15", "--muk-min", "0.4", "--muk-max", "0.8", "--fn-min", "0.4",
        "--fn-max", "1.8",
    ];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success(), "{}", stderr_of(&a));
    assert_eq!(a.stdout, b.stdout, "same seed must reproduce the report");

    let c = run(&[
        "fit", "--traces", trace.to_str().unwrap(), "--seed", "6", "--particles", "12",
        "--iterations", "15", "--muk-min", "0.4", "--muk-max", "0.8", "--fn-min", "0.4",
        "--fn-max", "1.8",
    ]);
    assert_ne!(a.stdout, c.stdout, "different seed should explore differently");
}

#[test]
fn fit_requires_traces() {
    let out = run(&["fit"]);
    assert_eq!(out.status.code(), Some(2), "usage errors exit with 2");
}

#[test]
fn fit_propagates_trace_errors_with_file_names() {
    let dir = temp_dir("badtrace");
    let path = dir.join("broken.csv");
    fs::write(&path, "t,z_surface,z_part\n0.0,1.0\n").unwrap();
    let out = run(&["fit", "--traces", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_of(&out);
    assert!(err.contains("broken.csv"), "{err}");
    assert!(err.contains("z_part"), "{err}");
}

#[test]
fn waveform_json_roundtrip_through_files() {
    // Export a waveform JSON by hand, then drive a simulation with it.
    let dir = temp_dir("wavejson");
    let path = dir.join("wave.json");
    let json = r#"{
        "period": 0.1,
        "segments": [
            { "duration": 0.05, "accel": 3.0 },
            { "duration": 0.05, "accel": -3.0 }
        ]
    }"#;
    fs::write(&path, json).unwrap();
    let out = run(&[
        "simulate", "--waveform", path.to_str().unwrap(), "--fn", "5", "--alpha", "10",
        "--periods", "15",
    ]);
    assert!(out.status.success(), "{}", stderr_of(&out));
    // Gentle square drive inside the cone: the part just rides along.
    assert!(stdout_of(&out).contains("sticking 1.0000"));
}
