use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ffcontrol::io::{read_sidecar, Table};
use serde_json::Value;

fn ffc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ffc")).args(args).output().expect("run ffc")
}

fn ok(args: &[&str]) -> String {
    let out = ffc(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn json(args: &[&str]) -> Value {
    serde_json::from_str(&ok(args)).unwrap()
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

#[test]
fn all_to_all_decay_rate() {
    let t = Table::from_csv_str(&ok(&["walk", "--mode", "tau", "--delta", "0", "--L", "101", "--d", "1"])).unwrap();
    let tau = t.column("tau").unwrap();
    assert!((tau[0] - 0.02).abs() < 1e-10, "{tau:?}");
}

#[test]
fn short_range_exponent() {
    let t = Table::from_csv_str(&ok(&["walk", "--mode", "mu", "--delta", "6", "--L", "256"])).unwrap();
    let mu = t.column("mu").unwrap()[0];
    assert!((mu - 2.0).abs() < 0.1, "{mu}");
}

#[test]
fn sweep_rows_follow_the_flag_product() {
    let t = Table::from_csv_str(&ok(&["walk", "--mode", "tau", "--delta", "0,nn", "--L", "11,21", "--kappa", "0,1"]))
        .unwrap();
    assert_eq!(t.rows.len(), 8);
    let l = t.column("L").unwrap();
    let k = t.column("kappa").unwrap();
    assert_eq!(l, vec![11.0, 11.0, 21.0, 21.0, 11.0, 11.0, 21.0, 21.0]);
    assert_eq!(k, vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
    let tau = t.column("tau").unwrap();
    assert!((tau[0] - 0.2).abs() < 1e-10);
    // scrambling speeds up the nearest-neighbour walk
    assert!(tau[5] > tau[4]);
}

#[test]
fn noisy_fixed_point_rises_from_the_boundary() {
    let t = Table::from_csv_str(&ok(&["walk", "--mode", "stationary", "--eta", "1e-4", "--L", "64"])).unwrap();
    let p = t.column("P").unwrap();
    assert_eq!(p.len(), 32);
    assert!(p[0] < p[1]);
    for w in p.windows(2) {
        assert!(w[0] <= w[1] + 1e-15, "{p:?}");
    }
}

#[test]
fn trajectory_output_is_deterministic_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (path(dir.path(), "a.csv"), path(dir.path(), "b.csv"), path(dir.path(), "c.csv"));
    let args = ["trajectory", "--family", "swap2", "--L", "8", "--tmax", "200", "--traj", "300", "--seed", "7"];
    for (out, threads) in [(&a, "1"), (&b, "1"), (&c, "3")] {
        let mut v = args.to_vec();
        v.extend(["--out", out.as_str(), "--threads", threads]);
        ok(&v);
    }
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    assert_eq!(text, fs::read_to_string(&c).unwrap());

    let t = Table::from_csv_str(&text).unwrap();
    assert_eq!(t.to_csv_string().unwrap(), text);
    assert_eq!(t.column("n_traj").unwrap()[0], 300.0);
    let times = t.column("time").unwrap();
    assert!(times.windows(2).all(|w| w[0] < w[1]));
    assert!((times[times.len() - 1] - 200.0).abs() < 1e-12);
    assert_eq!(t.columns, ["time", "mean_P", "var_P", "stderr_P", "mean_entropy", "mean_Sz", "mean_J2", "n_traj"]);
    let prov = read_sidecar(Path::new(&a)).unwrap();
    assert_eq!(prov.command, "trajectory");
    assert_eq!(prov.master_seed, Some(7));
    assert_eq!(prov.config["trajectory"]["protocol"]["L"], 8);

    // identical files compare to zero
    let r = json(&["compare", "--quantum", &a, "--walk", &b]);
    assert_eq!(r["max_rel"], 0.0);
    assert_eq!(r["mean_rel"], 0.0);
}

#[test]
fn env_var_sets_the_worker_count() {
    let out = Command::new(env!("CARGO_BIN_EXE_ffc"))
        .args(["walk", "--mode", "tau", "--delta", "0", "--L", "11"])
        .env("FFC_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = Command::new(env!("CARGO_BIN_EXE_ffc"))
        .args(["walk", "--mode", "tau", "--delta", "0", "--L", "11"])
        .env("FFC_THREADS", "2")
        .output()
        .unwrap();
    assert!(out.status.success());
}

#[test]
fn config_errors_exit_with_two_and_name_the_key() {
    let out = ffc(&["trajectory", "--family", "swap2", "--L", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`L`"));

    let out = ffc(&["trajectory", "--family", "swap5", "--L", "8"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("swap5"));

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "tmax = 10\nsteps = 4\n").unwrap();
    let out = ffc(&["trajectory", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("steps"));

    let out = ffc(&["walk", "--mode", "evolve", "--L", "9"]);
    assert_eq!(out.status.code(), Some(2), "odd chain has no Néel profile");
    let out = ffc(&["walk", "--mode", "stationary", "--L", "16"]);
    assert_eq!(out.status.code(), Some(2), "noiseless fixed point");
    let out = ffc(&["walk", "--mode", "tau", "--L", "8", "--d", "3"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    let out = path(dir.path(), "o.csv");
    fs::write(&cfg, format!("tmax = 5.0\ntraj = 20\nseed = 3\nout = \"{out}\"\n\n[protocol]\nfamily = \"swap2\"\nL = 4\n"))
        .unwrap();
    ok(&["trajectory", "--config", cfg.to_str().unwrap(), "--L", "6"]);
    let t = Table::read(Path::new(&out)).unwrap();
    assert_eq!(t.meta("L"), Some("6"));
    assert_eq!(t.column("n_traj").unwrap()[0], 20.0);
    assert_eq!(t.meta("seed"), Some("3"));
}

#[test]
fn oracle_matches_the_ensemble_at_four_sites() {
    let dir = tempfile::tempdir().unwrap();
    let (q, o) = (path(dir.path(), "q.csv"), path(dir.path(), "o.csv"));
    let common = ["--family", "swap2", "--L", "4", "--tmax", "10", "--tmin", "0.1", "--per-decade", "10"];
    let mut v = vec!["trajectory", "--traj", "4000", "--seed", "1", "--out", &q];
    v.extend(common);
    ok(&v);
    let mut v = vec!["oracle", "--out", &o];
    v.extend(common);
    ok(&v);
    let (tq, to) = (Table::read(Path::new(&q)).unwrap(), Table::read(Path::new(&o)).unwrap());
    assert_eq!(tq.column("time").unwrap(), to.column("time").unwrap());
    let (m, e, x) = (tq.column("mean_P").unwrap(), tq.column("stderr_P").unwrap(), to.column("mean_P").unwrap());
    for i in 0..m.len() {
        assert!((m[i] - x[i]).abs() <= 5.0 * e[i] + 1e-12, "t index {i}: {} vs {} ± {}", m[i], x[i], e[i]);
    }
    assert_eq!(read_sidecar(Path::new(&o)).unwrap().command, "oracle");
}

#[test]
fn compare_reports_grid_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let (q, w) = (path(dir.path(), "q.csv"), path(dir.path(), "w.csv"));
    ok(&["oracle", "--family", "swap2", "--L", "4", "--tmax", "20", "--out", &q]);
    ok(&["walk", "--mode", "evolve", "--L", "4", "--tmax", "10", "--out", &w]);
    let out = ffc(&["compare", "--quantum", &q, "--walk", &w]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("grid mismatch"));
    let r = json(&["compare", "--quantum", &q, "--walk", &w, "--tmax", "10"]);
    assert!(r["points"].as_u64().unwrap() > 10);
}

#[test]
fn fredkin_tail_is_slower_than_diffusive() {
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for l in ["6", "8", "10"] {
        let f = path(dir.path(), &format!("f{l}.csv"));
        ok(&[
            "trajectory", "--family", "fredkin", "--L", l, "--tmax", "400", "--traj", "600", "--seed", "5",
            "--entropy", "false", "--j2", "false", "--out", &f,
        ]);
        files.push(f);
    }
    let mut v = vec!["fit", "--method", "collapse", "--input"];
    v.extend(files.iter().map(String::as_str));
    let r = json(&v);
    assert_eq!(r["sizes"], serde_json::json!([6, 8, 10]));
    let z = r["z"].as_f64().unwrap();
    assert!(z > 2.0, "{r}");
}

#[test]
fn fit_of_the_classical_walk() {
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for l in [16, 24, 32] {
        let f = path(dir.path(), &format!("w{l}.csv"));
        let tmax = (l * l * 4).to_string();
        ok(&["walk", "--mode", "evolve", "--L", &l.to_string(), "--tmax", &tmax, "--out", &f]);
        files.push(f);
    }
    let mut v = vec!["fit", "--input"];
    v.extend(files.iter().map(String::as_str));
    let r = json(&v);
    assert_eq!(r["method"], "cutoff_collapse");
    assert!((r["z"].as_f64().unwrap() - 2.0).abs() < 0.1, "{r}");
}

#[test]
fn target_report_and_amplitudes() {
    let dir = tempfile::tempdir().unwrap();
    let amps = path(dir.path(), "dicke.txt");
    let r = json(&["target", "--kind", "dicke:4", "--L", "8", "--amplitudes", &amps]);
    let s = r["half_chain_entropy"].as_f64().unwrap();
    assert!((s - r["dicke_formula"].as_f64().unwrap()).abs() < 1e-10);
    assert!(r["max_projector"].as_f64().unwrap() < 1e-12);
    assert!(fs::read_to_string(&amps).unwrap().starts_with("# sites=8 local_dim=2"));
    let r = json(&["target", "--kind", "anomalous_fredkin", "--L", "8"]);
    assert!(r["fredkin_residual"].as_f64().unwrap() < 1e-12);
    let out = ffc(&["target", "--kind", "ghz", "--L", "8"]);
    assert_eq!(out.status.code(), Some(2));
}
