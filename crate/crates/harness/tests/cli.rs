use std::path::Path;
use std::process::{Command, Output};

use npns_core::{SpectralScalar, SpectralVector, State};
use npns_harness::checkpoint;
use npns_harness::RunConfig;
use num_complex::Complex64;
use serde_json::Value;

const SMALL: &str = "resolution = 16\nshell = 2\ndt = 1e-2\nt_end = 0.5\nrecord_stride = 5\n";

fn npns(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_npns"))
        .args(args)
        .current_dir(dir)
        .env_remove("NPNS_THREADS")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn rows(path: &Path) -> Vec<Value> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

const RECORD_FIELDS: [&str; 14] = [
    "t",
    "velocity_energy",
    "c1_deviation",
    "c2_deviation",
    "total_energy",
    "charge_l3_cubed",
    "charge_l2",
    "c1_gradient",
    "c2_gradient",
    "velocity_gradient",
    "c1_min",
    "c2_min",
    "c1_mean",
    "c2_mean",
];

#[test]
fn equilibrium_simulation_has_zero_deviations() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "eq.cfg", &format!("{SMALL}epsilon = 0\n"));
    let out = npns(&["simulate", "--config", &cfg, "--output", "eq.ndjson"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = rows(&dir.path().join("eq.ndjson"));
    assert_eq!(rows.len(), 11);
    for row in &rows {
        for f in ["c1_deviation", "c2_deviation", "total_energy", "velocity_energy"] {
            assert_eq!(row[f].as_f64().unwrap(), 0.0);
        }
    }
    assert!(dir.path().join("eq.ndjson.ckpt").exists());
}

#[test]
fn output_rows_follow_schema_and_repeat_bytewise() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "run.cfg",
        &format!("{SMALL}kappa = 1\nvelocity = taylor-green\nvelocity_amplitude = 0.1\n"),
    );
    for name in ["a.ndjson", "b.ndjson"] {
        let out = npns(&["simulate", "--config", &cfg, "--seed", "17", "--output", name], dir.path());
        assert!(out.status.success());
    }
    let a = std::fs::read(dir.path().join("a.ndjson")).unwrap();
    let b = std::fs::read(dir.path().join("b.ndjson")).unwrap();
    assert_eq!(a, b);
    for row in rows(&dir.path().join("a.ndjson")) {
        let obj = row.as_object().unwrap();
        assert_eq!(obj.len(), RECORD_FIELDS.len());
        for f in RECORD_FIELDS {
            assert!(obj[f].as_f64().unwrap().is_finite(), "{f}");
        }
    }
    let out = npns(&["simulate", "--config", &cfg, "--seed", "18", "--output", "c.ndjson"], dir.path());
    assert!(out.status.success());
    assert_ne!(a, std::fs::read(dir.path().join("c.ndjson")).unwrap());
}

#[test]
fn cosine_run_passes_decay_check() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.cfg", &format!("{SMALL}epsilon = 0.1\n"));
    assert!(npns(&["simulate", "--config", &cfg, "--output", "c.ndjson"], dir.path()).status.success());
    let records: Vec<npns_core::EnergyRecord> = std::fs::read_to_string(dir.path().join("c.ndjson"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert!(npns_core::diagnostics::pathwise_decay_check(&records, 0.5, 1e-2));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "dt.cfg", "resolution = 16\nshell = 2\ndt = 0.5\n");
    let out = npns(&["simulate", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("stability budget"));

    let cfg = write_config(dir.path(), "bad.cfg", "resolution = 16\nwibble = 3\n");
    let out = npns(&["simulate", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("wibble"));

    assert_eq!(npns(&["simulate", "--seed", "x"], dir.path()).status.code(), Some(2));
}

#[test]
fn io_errors_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let out = npns(&["simulate", "--config", "missing.cfg"], dir.path());
    assert_eq!(out.status.code(), Some(4));
    let cfg = write_config(dir.path(), "ok.cfg", SMALL);
    let out = npns(&["simulate", "--config", &cfg, "--output", "no/such/dir/out.ndjson"], dir.path());
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn blow_up_exits_3_with_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::parse(SMALL).unwrap();
    let mut c1 = SpectralScalar::constant(16, 1.0);
    c1.set_mode(1, 0, Complex64::new(f64::NAN, 0.0));
    let state = State::new(SpectralVector::zeros(16), c1, SpectralScalar::constant(16, 1.0)).unwrap();
    let ck = dir.path().join("bad.ckpt");
    checkpoint::save(&ck, &cfg.params().unwrap(), 0.0, &state).unwrap();
    let cfg = write_config(
        dir.path(),
        "resume.cfg",
        &format!("{SMALL}ic = checkpoint\ncheckpoint = {}\n", ck.display()),
    );
    let out = npns(&["simulate", "--config", &cfg, "--output", "partial.ndjson"], dir.path());
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_to_string(dir.path().join("partial.ndjson")).unwrap().lines().count(), 1);
}

#[test]
fn checkpoint_resume_continues_in_time() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "a.cfg", SMALL);
    assert!(npns(&["simulate", "--config", &cfg, "--output", "first.ndjson"], dir.path()).status.success());
    let resume = write_config(dir.path(), "b.cfg", &format!("{SMALL}ic = checkpoint\ncheckpoint = first.ndjson.ckpt\n"));
    assert!(npns(&["simulate", "--config", &resume, "--output", "second.ndjson"], dir.path()).status.success());
    let first = rows(&dir.path().join("first.ndjson"));
    let second = rows(&dir.path().join("second.ndjson"));
    assert_eq!(second[0]["t"].as_f64().unwrap(), 0.5);
    assert_eq!(second[0]["total_energy"], first.last().unwrap()["total_energy"]);
}

#[test]
fn single_member_ensemble_matches_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "e.cfg", &format!("{SMALL}kappa = 1\nensemble = 1\nseed = 4\n"));
    assert!(npns(&["simulate", "--config", &cfg, "--output", "s.ndjson"], dir.path()).status.success());
    assert!(npns(&["ensemble", "--config", &cfg, "--output", "e.ndjson"], dir.path()).status.success());
    let sim = rows(&dir.path().join("s.ndjson"));
    let ens = rows(&dir.path().join("e.ndjson"));
    assert_eq!(sim.len(), ens.len());
    for (s, e) in sim.iter().zip(&ens) {
        assert_eq!(s["total_energy"], e["mean_energy"]);
        assert_eq!(s["t"], e["t"]);
    }
    assert!(dir.path().join("e.ndjson.prefactors.csv").exists());
    assert!(dir.path().join("e.ndjson.ratios.csv").exists());
}

#[test]
fn deterministic_ensemble_has_no_spread_and_ignores_threads() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "d.cfg", &format!("{SMALL}ensemble = 4\n"));
    let out = Command::new(env!("CARGO_BIN_EXE_npns"))
        .args(["ensemble", "--config", &cfg, "--output", "d1.ndjson"])
        .current_dir(dir.path())
        .env("NPNS_THREADS", "2")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(npns(&["ensemble", "--threads", "1", "--config", &cfg, "--output", "d2.ndjson"], dir.path())
        .status
        .success());
    let a = std::fs::read(dir.path().join("d1.ndjson")).unwrap();
    assert_eq!(a, std::fs::read(dir.path().join("d2.ndjson")).unwrap());
    for row in rows(&dir.path().join("d1.ndjson")) {
        assert_eq!(row["standard_error"].as_f64().unwrap(), 0.0);
        assert_eq!(row["trajectories"].as_u64().unwrap(), 4);
    }
}

#[test]
fn corrector_check_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "k.cfg",
        "resolution = 32\nshell = 2\nkappa = 1\nshell_list = 1,2,4\nvelocity = random-band\nvelocity_kmax = 4\n",
    );
    let out = npns(&["corrector-check", "--config", &cfg, "--output", "k.csv"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("k.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "shell,error_norm,reference,ratio");
    assert_eq!(lines.len(), 4);
    let errors: Vec<f64> = lines[1..].iter().map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(errors[2] < errors[0]);
}

#[test]
fn rate_sweep_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "r.cfg",
        &format!("{SMALL}ensemble = 2\nkappa_list = 0,1\nshell_list = 1,2\n"),
    );
    let out = npns(&["rate-sweep", "--config", &cfg, "--output", "r.csv"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("r.csv")).unwrap();
    let lines: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(lines.len(), 4);
    let gammas: Vec<&str> = lines.iter().map(|r| r[5]).collect();
    assert!(gammas.iter().all(|g| *g == gammas[0]));
    assert_eq!(lines[0][6], "NaN");
    for r in &lines {
        assert!(r[2].parse::<f64>().unwrap() > 0.0);
    }
}

#[test]
fn offline_fit() {
    let dir = tempfile::tempdir().unwrap();
    let series: String = (0..=40)
        .map(|i| {
            let t = i as f64 * 0.25;
            format!("{{\"t\":{t},\"total_energy\":{}}}\n", 3.0 * (-0.7 * t).exp())
        })
        .collect();
    std::fs::write(dir.path().join("s.ndjson"), series).unwrap();
    let out = npns(&["fit", "s.ndjson"], dir.path());
    assert!(out.status.success());
    let fit: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((fit["rate"].as_f64().unwrap() - 0.7).abs() < 1e-12);
    assert_eq!(fit["window"][0].as_f64().unwrap(), 5.0);

    let out = npns(&["fit", "s.ndjson", "--from", "0", "--to", "2", "--output", "fit.json"], dir.path());
    assert!(out.status.success());
    let fit: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("fit.json")).unwrap()).unwrap();
    assert_eq!(fit["points"].as_u64().unwrap(), 9);

    let out = npns(&["fit", "s.ndjson", "--column", "velocity_energy"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}
