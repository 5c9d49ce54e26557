//! End-to-end runs of the `scri` binary.

use std::path::Path;
use std::process::{Command, Output};

fn scri(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scri")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path).unwrap().lines().map(|l| l.split(',').map(String::from).collect()).collect()
}

#[test]
fn verify_on_defaults_passes_every_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v");
    let o = scri(&["verify", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = rows(&out.join("identity_report.csv"));
    assert_eq!(r[0], ["check_name", "max_residual", "tolerance", "pass"]);
    assert!(r.len() > 15);
    assert!(r[1..].iter().all(|row| row[3] == "true"), "{r:?}");
    assert!(out.join("config.toml").is_file());
}

#[test]
fn verify_is_deterministic_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "[coefficients]\nn = 2\npreset = \"random\"\n");
    let run = |name: &str| {
        let out = dir.path().join(name);
        assert_eq!(code(&scri(&["verify", "--config", &cfg, "--seed", "17", "--out", out.to_str().unwrap()])), 0);
        std::fs::read_to_string(out.join("identity_report.csv")).unwrap()
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn flow_without_null_form_is_bounded_at_the_radius() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "[flow]\nradius = 0.25\nsamples = 6\n");
    let out = dir.path().join("f");
    let o = scri(&["flow", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("flow_verdict.json")).unwrap()).unwrap();
    assert_eq!(v["verdict"], "bounded");
    assert_eq!(v["C"].as_f64().unwrap(), 0.25);
    assert_eq!(v["seed"].as_u64().unwrap(), 0);
    assert_eq!(rows(&out.join("flow_trajectories.csv"))[0], ["traj", "t", "xi_0", "xi_norm", "jac_norm"]);
}

#[test]
fn flow_detects_blowup_of_a_large_scalar_datum() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "[coefficients]\nentries = \"0 0 0 0 0 1\"\n[flow]\nradius = 50.0\nsamples = 2\n");
    let out = dir.path().join("f");
    let o = scri(&["flow", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("flow_verdict.json")).unwrap()).unwrap();
    assert_eq!(v["verdict"], "blowup");
    assert!(v["t_star"].as_f64().unwrap() > 0.0);
}

#[test]
fn evolve_zero_data_gives_zero_norms_and_report_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "[grid]\nn_rho = 64\n[solver]\nenergy_every = 4\n");
    let out = dir.path().join("z");
    let o = scri(&["evolve", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let e = rows(&out.join("energy.csv"));
    assert_eq!(e[0], ["t", "h_energy", "Pi_energy", "PV_norm", "DV_norm"]);
    assert!(e.len() > 10);
    for row in &e[1..] {
        assert!(row[1..].iter().all(|v| v.parse::<f64>().unwrap() == 0.0), "{row:?}");
    }
    let s = rows(&out.join("state_t=0.46854362152313256.csv"));
    assert_eq!(s[0], ["rho", "theta", "phi", "K", "V0", "V1", "Vth", "Vph", "V4"]);
    assert_eq!(s.len(), 65);

    let o = scri(&["report", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let summary = std::fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.lines().all(|l| l.starts_with("PASS")), "{summary}");
    assert!(out.join("theorem_bounds.csv").is_file());
    assert_eq!(rows(&out.join("residuals.csv"))[0], ["t", "difs", "mwave_n", "mwave_m"]);
}

#[test]
fn evolve_pulse_then_report_fits_decay() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        "[constants]\ntranscription = \"chain_consistent\"\n[coefficients]\npreset = \"minkowski_null\"\n\
         [data]\nvbar = [\"1e-3*gauss(rho,0.997,0.0004)\"]\nwbar = [\"0\"]\n[solver]\nsnapshot_times = [0.1]\n",
    );
    let out = dir.path().join("p");
    let o = scri(&["evolve", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("state_t=0.10000000000000002.csv").is_file() || out.join("state_t=0.1.csv").is_file());
    let run: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("run.json")).unwrap()).unwrap();
    assert_eq!(run["status"], "completed");
    let o = scri(&["report", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let b = rows(&out.join("theorem_bounds.csv"));
    let col = b[0].iter().position(|h| h == "fit_PV_Hk").unwrap();
    assert!(b[1][col].parse::<f64>().unwrap() >= 0.01 - 0.2);
}

#[test]
fn evolve_blowup_exits_3_after_writing_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        "[coefficients]\nentries = \"0 0 0 0 0 400\"\n[grid]\nn_rho = 64\n\
         [data]\nvbar = [\"gauss(rho,0.997,0.0004)\"]\nwbar = [\"0\"]\n[solver]\nblowup_threshold = 1e3\n",
    );
    let out = dir.path().join("b");
    let o = scri(&["evolve", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    let run: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("run.json")).unwrap()).unwrap();
    assert_eq!(run["status"], "blowup");
    assert!(out.join("energy.csv").is_file());
}

#[test]
fn full_mode_evolves_zero_data() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "[domain]\nt_min = 0.3\n[grid]\nn_rho = 16\nn_theta = 5\nn_phi = 6\n");
    let out = dir.path().join("full");
    let o = scri(&["evolve", "--config", &cfg, "--mode", "full", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let s = rows(&out.join("state_t=0.46854362152313256.csv"));
    assert_eq!(s.len(), 1 + 16 * 5 * 6);
}

#[test]
fn mms_reports_orders() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "[mms]\nlevels = [64, 128]\n");
    let out = dir.path().join("m");
    let o = scri(&["mms", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = rows(&out.join("mms.csv"));
    assert_eq!(r[0], ["n_rho", "error", "order"]);
    assert!(r[2][2].parse::<f64>().unwrap() >= 1.8);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    let o = out.to_str().unwrap();
    for text in ["[domain]\nbogus = 1\n", "[constants]\nkappa = 0.4\n", "[coefficients]\nentries = \"0 0 0 9 0 1\"\n"] {
        let cfg = write(dir.path(), "c.toml", text);
        assert_eq!(code(&scri(&["verify", "--config", &cfg, "--out", o])), 2, "{text}");
    }
    assert_eq!(code(&scri(&["verify", "--config", "/nonexistent.toml", "--out", o])), 2);
    assert_eq!(code(&scri(&["report", "--out", dir.path().to_str().unwrap()])), 2);
    assert_eq!(code(&scri(&["mms", "--mode", "full", "--out", o])), 2);
}

#[test]
fn shipped_configs_load_and_verify() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let dir = tempfile::tempdir().unwrap();
    for entry in std::fs::read_dir(&root).unwrap() {
        let cfg = entry.unwrap().path();
        let out = dir.path().join(cfg.file_stem().unwrap());
        let o = scri(&["verify", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}: {}", cfg.display(), String::from_utf8_lossy(&o.stderr));
    }
}
