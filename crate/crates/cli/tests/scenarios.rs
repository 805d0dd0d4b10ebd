use std::process::Command;

use srmetro_cli::config::SyntheticLine;
use srmetro_cli::output::sha256_hex;
use srmetro_cli::{run, Scenario, ScenarioConfig, Sweep, Table};

fn config(scenario: Scenario, dir: &std::path::Path) -> ScenarioConfig {
    ScenarioConfig {
        scenario: Some(scenario),
        out_dir: dir.to_path_buf(),
        ..Default::default()
    }
}

#[test]
fn csv_round_trip_is_bit_exact() {
    let tmp = tempfile::tempdir().unwrap();
    let mut t = Table::new(&["a", "b"]);
    let mut x = 0.123_456_789_f64;
    for i in 0..500 {
        x = (x * 3.999_999 * (1.0 - x)).abs();
        t.push(vec![x * 10f64.powi(i % 40 - 20), -x / 7.0]);
    }
    t.push(vec![f64::MIN_POSITIVE, f64::MAX]);
    let path = tmp.path().join("t.csv");
    t.write(&path).unwrap();
    let back = Table::read(&path).unwrap();
    assert_eq!(back.headers, t.headers);
    for (r, s) in back.rows.iter().zip(&t.rows) {
        for (a, b) in r.iter().zip(s) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}

#[test]
fn pulses_sharpen_with_atom_number() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = ScenarioConfig {
        sweep: Some(Sweep::parse("n_atoms=1e4,2e4,3e4,4e4,5e4").unwrap()),
        stride: 25,
        ..config(Scenario::PulseScan, tmp.path())
    };
    let out = run(&cfg).unwrap();
    let summary = Table::read(&tmp.path().join("pulse_summary.csv")).unwrap();
    let peak_time = summary.column("peak_time").unwrap();
    let peak = summary.column("peak_photons").unwrap();
    for w in peak_time.windows(2) {
        assert!(w[1] < w[0], "{peak_time:?}");
    }
    for w in peak.windows(2) {
        assert!(w[1] > w[0], "{peak:?}");
    }
    for (name, digest) in &out.manifest.files {
        let bytes = std::fs::read(tmp.path().join(name)).unwrap();
        assert_eq!(&sha256_hex(&bytes), digest, "{name}");
    }
}

#[test]
fn single_unconditioned_trajectory_equals_the_pulse() {
    let tmp = tempfile::tempdir().unwrap();
    let mut params = srmetro_cli::config::ParamOverrides {
        detection_efficiency: Some(0.0),
        ..Default::default()
    };
    params.n_atoms = Some(30_000);
    let het = ScenarioConfig {
        trajectories: 1,
        params: params.clone(),
        ..config(Scenario::Heterodyne, &tmp.path().join("het"))
    };
    let pulse = ScenarioConfig {
        params,
        ..config(Scenario::PulseScan, &tmp.path().join("pulse"))
    };
    let pulse = ScenarioConfig {
        t_end: Some(het.t_end()),
        ..pulse
    };
    run(&het).unwrap();
    run(&pulse).unwrap();
    let a = Table::read(&tmp.path().join("het/ensemble.csv")).unwrap();
    let b = Table::read(&tmp.path().join("pulse/pulse_00.csv")).unwrap();
    assert_eq!(a.column("photons_mean"), b.column("photons"));
    assert_eq!(a.column("photons_ref"), b.column("photons"));
    assert_eq!(a.column("a_z_mean"), b.column("a_z"));
}

#[test]
fn synthetic_line_is_recovered() {
    let tmp = tempfile::tempdir().unwrap();
    let line = SyntheticLine {
        center_hz: 1.0e6 + 137.0,
        hwhm_hz: 14e3,
        amplitude: 40.0,
        offset: 0.5,
        bin_hz: 1e3,
        bins: 2001,
    };
    let cfg = ScenarioConfig {
        synthetic: Some(line),
        ..config(Scenario::Metrology, tmp.path())
    };
    let out = run(&cfg).unwrap();
    let fit = &out.summary["fit"]["line"];
    let rel = |key: &str, truth: f64| (fit[key].as_f64().unwrap() / truth - 1.0).abs();
    assert!(rel("center", line.center_hz) < 1e-6);
    assert!(rel("hwhm", line.hwhm_hz) < 1e-6);
    assert!(rel("amplitude", line.amplitude) < 1e-6);
    assert!(rel("offset", line.offset) < 1e-6);
}

#[test]
fn binary_reports_bad_configs_as_json() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.toml");
    std::fs::write(&path, "[params]\nn_atoms = 1000\nwarp = 1\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_srmetro"))
        .args(["pulse-scan", "--config"])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "config");
}

#[test]
fn example_configs_parse() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let cfg = ScenarioConfig::load(&path).unwrap();
        cfg.sweep_params()
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        seen += 1;
    }
    assert!(seen >= 5);
}
