use std::path::Path;
use std::process::{Command, Output};

use lensflow_core::{GridProfile, NetworkSnapshot};

fn lensflow(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lensflow"))
        .args(args)
        .current_dir(dir)
        .env_remove("LENSFLOW_THREADS")
        .output()
        .expect("spawn lensflow")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn value(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("no {key}= in {text}"))
        .parse()
        .unwrap()
}

#[test]
fn evolve_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let o = lensflow(
        &["evolve", "--init", "circular-arc", "--width", "2", "--n", "64", "--t-end", "0.1", "--out", "run"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let run = dir.path().join("run");
    let csv = std::fs::read_to_string(run.join("diagnostics.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "time,area,length,kappa_min,kappa_max,ratio_min,a,b");
    assert!(csv.lines().count() > 2);
    let text = std::fs::read_to_string(run.join("snapshots.json")).unwrap();
    let snaps: Vec<GridProfile> = serde_json::from_str(&text).unwrap();
    assert!((snaps.last().unwrap().time - 0.1).abs() < 1e-12);
    // full-precision round trip through the emitted JSON
    assert_eq!(serde_json::to_string_pretty(&snaps).unwrap() + "\n", text);
    let svg = std::fs::read_to_string(run.join("lens.svg")).unwrap();
    assert_eq!(svg.matches("<path").count(), 4);
    assert!(run.join("summary.json").exists());
}

#[test]
fn selfsim_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let o = lensflow(&["selfsim", "--tol", "1e-10", "--out", "s"], dir.path());
    assert!(o.status.success());
    let text = stdout(&o);
    let lens = lensflow_core::shooting::find_symmetric_lens(1e-10).unwrap();
    assert_eq!(value(&text, "H"), lens.height);
    assert_eq!(value(&text, "b"), lens.contact_x);
    let eta = value(&text, "eta");
    assert!((eta - 1.6878680344).abs() < 1e-4);
    assert!(value(&text, "E") > 0.0);
    assert!(dir.path().join("s/profile.json").exists());
    assert!(dir.path().join("s/selfsim.svg").exists());
}

#[test]
fn certify_passes_and_writes_json() {
    let dir = tempfile::tempdir().unwrap();
    let o = lensflow(&["certify", "--json", "cert.json"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("cert.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], true);
    assert_eq!(report["lens_uniqueness"]["checks"].as_array().unwrap().len(), 6);
    assert!(stdout(&o).lines().filter(|l| l.starts_with("PASS")).count() == 7);
}

#[test]
fn energy_reports_values() {
    let dir = tempfile::tempdir().unwrap();
    let o = lensflow(&["energy", "--eta", "1.5", "--rho", "1.0001", "--json", "e.json"], dir.path());
    assert!(o.status.success());
    let text = stdout(&o);
    let psi = lensflow_core::energy::psi(1.5, lensflow_core::energy::DEFAULT_TOL).unwrap();
    assert_eq!(value(&text, "Psi"), psi);
    assert!((value(&text, "Theta") - std::f64::consts::PI / 2f64.sqrt()).abs() < 1e-3);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("e.json")).unwrap()).unwrap();
    for key in ["eta0_bracket", "psi_eta0", "eta_star", "sigma_max", "theta_limits"] {
        assert!(report.get(key).is_some(), "{key}");
    }
    let o = lensflow(&["energy", "--certify"], dir.path());
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn fish_emits_solution() {
    let dir = tempfile::tempdir().unwrap();
    let o = lensflow(&["fish", "--out", "f"], dir.path());
    assert!(o.status.success());
    let k = value(&stdout(&o), "K");
    assert!((k - 4.0 * std::f64::consts::PI / 3.0).abs() < 1e-9);
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("f/fish.json")).unwrap()).unwrap();
    let geometry: NetworkSnapshot = serde_json::from_value(v["geometry"].clone()).unwrap();
    assert!(geometry.max_junction_angle_error() < 1e-6);
    let svg = std::fs::read_to_string(dir.path().join("f/fish.svg")).unwrap();
    assert_eq!(svg.matches("<path").count(), 4);
}

#[test]
fn blowup_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = lensflow(
        &["blowup", "--n", "64", "--lambdas", "2,4,8", "--tau", "-0.5", "--out", "b"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("b/blowup.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "i,lambda,hausdorff,density_gap_rms");
    assert_eq!(lines.count(), 3);
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(lensflow(&["evolve"], dir.path()).status.code(), Some(2));
    assert_eq!(lensflow(&["nonsense"], dir.path()).status.code(), Some(2));
    std::fs::write(dir.path().join("bad.toml"), "[flow]\nsteps = 3\n").unwrap();
    assert_eq!(lensflow(&["--config", "bad.toml", "selfsim"], dir.path()).status.code(), Some(2));
    std::fs::write(dir.path().join("cfl.toml"), "[flow]\ncfl = 0.9\n").unwrap();
    let o = lensflow(&["--config", "cfl.toml", "evolve", "--out", "x"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_lensflow"))
        .args(["selfsim"])
        .current_dir(dir.path())
        .env("LENSFLOW_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_file_drives_flow() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.toml"),
        "[init]\nkind = \"perturbed\"\namplitude = 0.05\n[flow]\nn = 64\nt_end = 0.05\nscheme = \"semi_implicit\"\ncfl = 2.0\n",
    )
    .unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_lensflow"))
        .args(["--config", "run.toml", "evolve", "--out", "r"])
        .current_dir(dir.path())
        .env("LENSFLOW_THREADS", "2")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!((value(&stdout(&o), "final_time") - 0.05).abs() < 1e-12);
}
