//! End-to-end command tests: every subcommand runs against the built binary
//! and its output is compared with module-level results.

use std::path::PathBuf;
use std::process::{Command, Output};

use sphere_vortex::energy::thresholds;
use sphere_vortex::Params;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sphere-vortex"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn csv_value(text: &str, key: &str) -> f64 {
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix(&format!("{key},")) {
            return rest.parse().unwrap();
        }
    }
    panic!("key {key} not found in:\n{text}");
}

fn csv_string(text: &str, key: &str) -> String {
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix(&format!("{key},")) {
            return rest.to_string();
        }
    }
    panic!("key {key} not found in:\n{text}");
}

fn temp_path(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join("sphere-vortex-cli-tests");
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn thresholds_match_library() {
    let out = run(&["thresholds"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let (h1, h2) = thresholds(&Params::default());
    assert_eq!(csv_value(&text, "h1"), h1, "17-digit output round-trips exactly");
    assert_eq!(csv_value(&text, "h2"), h2);
}

#[test]
fn classify_regimes() {
    let out = run(&["classify", "--radius", "1", "--gamma", "1", "--energy", "0.1"]);
    assert!(out.status.success());
    assert_eq!(csv_string(&stdout(&out), "regime"), "AllowedEverywhere");

    let out = run(&["classify", "--energy", "0.04"]);
    let text = stdout(&out);
    assert_eq!(csv_string(&text, "regime"), "ForbiddenDisk");
    let cy = csv_value(&text, "disk_center_y");
    let r = csv_value(&text, "disk_radius");
    assert!(cy + r < 0.0, "forbidden disk must sit in y < 0");

    let out = run(&["classify", "--energy", "-1"]);
    let text = stdout(&out);
    assert_eq!(csv_string(&text, "regime"), "AllowedDisk");
    let cy = csv_value(&text, "disk_center_y");
    let r = csv_value(&text, "disk_radius");
    assert!((cy - 2.0).abs() < r, "allowed disk must contain the vortex image");

    let out = run(&["classify"]);
    assert_eq!(out.status.code(), Some(2), "missing energy is an input error");
}

#[test]
fn simulate_plane_deterministic_and_monitored() {
    let path = temp_path("plane.csv");
    let args = [
        "simulate", "--chart", "plane", "--ic", "1.5,0.5,0.2,-0.1", "--t-end", "5",
        "--rel-tol", "1e-11", "--abs-tol", "1e-13",
        "--output", path.to_str().unwrap(),
    ];
    let out = run(&args);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let first = std::fs::read_to_string(&path).unwrap();
    let out2 = run(&args);
    assert!(out2.status.success());
    let second = std::fs::read_to_string(&path).unwrap();
    assert_eq!(first, second, "identical config must give byte-identical CSV");

    let mut lines = first.lines();
    assert_eq!(lines.next().unwrap(), "time,x,y,p_x,p_y,energy,p_phi,r,E_hat");
    // energy column stays constant to integration accuracy
    let energies: Vec<f64> = first
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(5).unwrap().parse().unwrap())
        .collect();
    let drift = energies
        .iter()
        .map(|e| (e - energies[0]).abs())
        .fold(0.0, f64::max);
    assert!(drift < 1e-9, "energy drift {drift}");

    // events stream exists (empty log for this orbit, header only)
    let events = std::fs::read_to_string(path.with_extension("events.csv")).unwrap();
    assert!(events.starts_with("time,kind,x,y,p_x,p_y"));
}

#[test]
fn simulate_rejects_vortex_initial_condition() {
    let out = run(&[
        "simulate", "--chart", "sphere", "--vortex", "equator", "--ic",
        "1.5707963267948966,1.5707963267948966,0,0", "--t-end", "1",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("vortex"), "message: {err}");
}

#[test]
fn simulate_angular_sigma_requires_energy() {
    let out = run(&["simulate", "--chart", "angular-sigma", "--ic", "0.5,1.0,2.0", "--t-end", "1"]);
    assert_eq!(out.status.code(), Some(2));

    let out = run(&[
        "simulate", "--chart", "angular-sigma", "--energy", "0.3", "--ic", "0.5,1.0,2.0",
        "--t-end", "1",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.starts_with("time,r,alpha,psi,"));
}

#[test]
fn zvm_at_h2_is_the_single_restpoint() {
    // Feed the printed h₂ back in: the f64 round-trips exactly through the
    // 17-digit format, so the boundary detection sees h = h₂.
    let th = stdout(&run(&["thresholds"]));
    let h2_text = csv_string(&th, "h2");
    let out = run(&["zvm", "--energy", &h2_text]);
    assert!(out.status.success());
    let text = stdout(&out);
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 1);
    let cells: Vec<f64> = rows[0].split(',').map(|c| c.parse().unwrap()).collect();
    assert!((cells[0] - 4.71238898038469).abs() < 1e-9, "α* = {}", cells[0]);
    assert!((cells[1] - 4.229925647947318).abs() < 1e-9, "r* = {}", cells[1]);
}

#[test]
fn zvm_below_h1_has_small_residuals() {
    let out = run(&["zvm", "--energy", "-0.2", "--samples", "32"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 32);
    for row in rows {
        let residual: f64 = row.split(',').nth(4).unwrap().parse().unwrap();
        assert!(residual.abs() < 1e-9, "row {row}");
    }
}

#[test]
fn restpoints_eigenvalue_triples() {
    let out = run(&["restpoints", "--samples", "8"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 16);
    let quarter = 1.0 / (4.0 * std::f64::consts::PI);
    for row in rows {
        let cells: Vec<&str> = row.split(',').collect();
        let family = cells[0];
        let eigs: Vec<f64> = cells[4..10].iter().map(|c| c.parse().unwrap()).collect();
        let res: Vec<f64> = vec![eigs[0], eigs[2], eigs[4]];
        let ims: Vec<f64> = vec![eigs[1], eigs[3], eigs[5]];
        assert!(ims.iter().all(|v| v.abs() < 1e-7));
        let nonzero: Vec<&f64> = res.iter().filter(|v| v.abs() > 0.0).collect();
        assert_eq!(nonzero.len(), 1, "row {row}");
        let expected = if family == "P1" { -quarter } else { quarter };
        assert!((nonzero[0] - expected).abs() < 1e-5);
        // transverse radial rate sign matches the family
        let transverse: f64 = cells[10].parse().unwrap();
        assert_eq!(transverse > 0.0, family == "P1");
    }
}

#[test]
fn heteroclinic_tracks_closed_form() {
    let out = run(&["heteroclinic", "--psi", "1.0", "--span", "80", "--samples", "100"]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    for row in text.lines().skip(1) {
        let cells: Vec<f64> = row.split(',').map(|c| c.parse().unwrap()).collect();
        assert!((cells[1] - cells[3]).abs() < 1e-8, "α vs closed form in {row}");
    }
}

#[test]
fn parallel_matches_root_found_momentum() {
    let theta_bar = 2.0 * std::f64::consts::PI / 3.0;
    let out = run(&["parallel", "--theta-bar", &theta_bar.to_string()]);
    assert!(out.status.success());
    let text = stdout(&out);
    let p_phi = csv_value(&text, "p_phi");
    assert!((p_phi - (9.0 / (32.0 * std::f64::consts::PI)).sqrt()).abs() < 1e-9);
    let period = csv_value(&text, "period");
    assert!((period - 2.0 * std::f64::consts::PI * 0.75 / p_phi).abs() < 1e-9);
    assert!(csv_value(&text, "p_theta_residual") < 1e-10);
    assert!(csv_value(&text, "closing_error") < 1e-6);

    let out = run(&["parallel", "--theta-bar", "1.047"]);
    assert_eq!(out.status.code(), Some(2), "no orbit below the equator");
}

#[test]
fn transmit_produces_valid_extension() {
    let out = bin()
        .args(["--format", "json", "transmit"])
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(doc["command"], "transmit");
    let residual = doc["diagnostics"]["eom_residual"].as_f64().unwrap();
    assert!(residual < 1e-6, "EOM residual {residual}");
    assert_eq!(doc["diagnostics"]["reflection_residual"].as_f64().unwrap(), 0.0);
    assert!(doc["diagnostics"]["theta_gap_at_collision"].as_f64().unwrap() < 2e-4);
    let t_s = doc["results"]["t_collision"].as_f64().unwrap();
    assert!(t_s > 0.0);
}

#[test]
fn field_check_passes() {
    let out = run(&["field-check"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("all checks passed"));
    assert!(text.contains("0.636619772"), "resolved Ê limit constant printed");
}

#[test]
fn config_file_with_flag_override() {
    let path = temp_path("run.cfg");
    std::fs::write(&path, "radius = 1.0\ngamma = 1.0\nenergy = 0.1\n").unwrap();
    let out = run(&["classify", "--config", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(csv_string(&stdout(&out), "regime"), "AllowedEverywhere");

    // flag overrides the file value
    let out = run(&["classify", "--config", path.to_str().unwrap(), "--energy", "0.04"]);
    assert_eq!(csv_string(&stdout(&out), "regime"), "ForbiddenDisk");
}

#[test]
fn meridian_demo_event_sequence_via_simulate() {
    // A meridian drop in the sphere chart triggers the collision event;
    // compare against the library's demonstration run.
    let (_, h2) = thresholds(&Params::default());
    let h = h2 + 0.01;
    let v0 = 1.0 / (8.0 * std::f64::consts::PI) * (2.0 * (1.0 + (std::f64::consts::PI - 0.05).cos())).ln();
    let p_theta0 = -(2.0 * (h - v0)).sqrt();
    let ic = format!("0,{},0,{}", std::f64::consts::PI - 0.05, p_theta0);
    let path = temp_path("meridian.csv");
    let out = run(&[
        "simulate", "--chart", "sphere", "--ic", &ic, "--t-end", "200",
        "--rel-tol", "1e-12", "--abs-tol", "1e-14",
        "--output", path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    // With p_φ = 0 the field extends smoothly through θ = 0, so the drop above
    // h₂ crosses the antipodal point and ends in the collision event.
    let events = std::fs::read_to_string(path.with_extension("events.csv")).unwrap();
    assert!(events.contains("antipodal-passage"), "events:\n{events}");
    assert!(events.contains("collision-approach"), "events:\n{events}");
    let body = std::fs::read_to_string(&path).unwrap();
    let min_abs_theta = body
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap().parse::<f64>().unwrap().abs())
        .fold(f64::INFINITY, f64::min)
        ;
    assert!(min_abs_theta < 0.05, "never crossed the antipodal region: {min_abs_theta}");
}
