use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn spherelab(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spherelab"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "status {:?}\nstdout {}\nstderr {}",
        out.status,
        stdout(out),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn build(dir: &Path, args: &[&str], file: &str) -> String {
    let mut full = vec!["build"];
    full.extend_from_slice(args);
    full.extend_from_slice(&["--out", file]);
    let out = spherelab(&full, dir);
    assert_ok(&out);
    stdout(&out)
}

fn xi_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/configs/xi21.json")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn clifford_torus_has_zero_euler_characteristic() {
    let dir = tempfile::tempdir().unwrap();
    let text = build(dir.path(), &["clifford", "--nu", "64", "--nv", "64"], "c.json");
    assert!(text.contains("chi 0 "), "{text}");
    assert!(dir.path().join("c.json").exists());
}

#[test]
fn veronese_is_a_non_orientable_projective_plane() {
    let dir = tempfile::tempdir().unwrap();
    let text = build(dir.path(), &["veronese", "--level", "2"], "v.json");
    assert!(text.contains("chi 1 "), "{text}");
    assert!(text.contains("orientable false"), "{text}");
}

#[test]
fn xi_config_builds_a_genus_two_surface() {
    let dir = tempfile::tempdir().unwrap();
    let config = xi_config();
    let text = build(dir.path(), &["xi", "--config", config.to_str().unwrap()], "x.json");
    assert!(text.contains("chi -2 "), "{text}");
}

#[test]
fn unknown_builder_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = spherelab(&["build", "dodecahedron"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_parameters_are_validation_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = spherelab(&["build", "clifford", "--nu", "3", "--nv", "3"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = spherelab(&["build", "geodesic-sphere", "--radius", "4.0"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_mesh_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = spherelab(&["measure", "absent.json"], dir.path());
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn measure_output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    build(dir.path(), &["clifford", "--nu", "16", "--nv", "16"], "c.json");
    for format in ["csv", "json"] {
        let a = spherelab(&["measure", "c.json", "--format", format], dir.path());
        let b = spherelab(&["measure", "c.json", "--format", format], dir.path());
        assert_ok(&a);
        assert_eq!(a.stdout, b.stdout);
    }
    let rec: serde_json::Value = serde_json::from_slice(
        &spherelab(&["measure", "c.json", "--format", "json"], dir.path()).stdout,
    )
    .unwrap();
    assert_eq!(rec["functionals"]["euler"], 0);
    assert_eq!(rec["sigma"]["bounds_ok"], true);
}

#[test]
fn flow_on_a_sphere_converges_and_preserves_area() {
    let dir = tempfile::tempdir().unwrap();
    build(dir.path(), &["great-sphere", "--level", "2"], "s.json");
    let out = spherelab(&["flow", "s.json", "--out-dir", "f"], dir.path());
    assert_ok(&out);
    let f = dir.path().join("f");
    assert!(f.join("trace.csv").exists());
    assert!(f.join("schedule.json").exists());
    let summary = json(&f.join("summary.json"));
    assert_eq!(summary["converged"], true);
    assert!(summary["max_area_drift"].as_f64().unwrap() < 1e-9);
    assert_eq!(summary["lyapunov_nonincreasing"], true);
}

#[test]
fn flow_that_runs_out_of_steps_exits_numerical() {
    let dir = tempfile::tempdir().unwrap();
    build(dir.path(), &["veronese", "--level", "2"], "v.json");
    let out = spherelab(&["flow", "v.json", "--tol", "1e-12", "--max-steps", "1", "--out-dir", "f"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(dir.path().join("f/trace.csv").exists());
}

#[test]
fn ambient_with_zero_field_leaves_everything_fixed() {
    let dir = tempfile::tempdir().unwrap();
    build(dir.path(), &["great-sphere", "--level", "2"], "s.json");
    let out = spherelab(&["ambient", "s.json", "--zero", "--particles", "10,10,10", "--out-dir", "a"], dir.path());
    assert_ok(&out);
    let report = json(&dir.path().join("a/report.json"));
    assert_eq!(report["outside_max_displacement"].as_f64(), Some(0.0));
    assert_eq!(report["integral_identity_residual"].as_f64(), Some(0.0));
    assert!(report["max_conformality_residual"].as_f64().unwrap() < 1e-12);
    assert!(report["dt"].as_f64().unwrap() > 0.0);
    assert!(dir.path().join("a/trajectories.csv").exists());
}

#[test]
fn ambient_follows_a_flow_schedule() {
    let dir = tempfile::tempdir().unwrap();
    build(dir.path(), &["great-sphere", "--level", "2"], "s.json");
    assert_ok(&spherelab(&["flow", "s.json", "--out-dir", "f"], dir.path()));
    let out = spherelab(
        &["ambient", "s.json", "--schedule", "f/schedule.json", "--particles", "10,10,10", "--out-dir", "a"],
        dir.path(),
    );
    assert_ok(&out);
    let report = json(&dir.path().join("a/report.json"));
    assert_eq!(report["outside_max_displacement"].as_f64(), Some(0.0));
    assert!(report["surface_max_distance"].as_f64().unwrap() < 1e-6);
}

#[test]
fn ambient_requires_a_field_and_three_counts() {
    let dir = tempfile::tempdir().unwrap();
    build(dir.path(), &["great-sphere", "--level", "1"], "s.json");
    let out = spherelab(&["ambient", "s.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = spherelab(&["ambient", "s.json", "--zero", "--particles", "1,2"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn table_lists_every_mesh() {
    let dir = tempfile::tempdir().unwrap();
    build(dir.path(), &["great-sphere", "--level", "2"], "s.json");
    build(dir.path(), &["clifford", "--nu", "16", "--nv", "16"], "c.json");
    let out = spherelab(&["table", "s.json", "c.json"], dir.path());
    assert_ok(&out);
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 3, "{text}");
    assert!(text.contains("great_sphere_l2"));
    assert!(text.contains("clifford_16x16"));
    let out = spherelab(&["table", "s.json", "c.json", "--format", "json"], dir.path());
    assert_ok(&out);
    serde_json::from_slice::<serde_json::Value>(&out.stdout).unwrap();
}
