use std::path::Path;
use std::process::{Command, Output};

use sepm::cli::io::{load_dataset, save_dataset};
use sepm::model::{michaelis_menten, ParameterPoint};
use sepm::simlab::generate_dataset;
use sepm::solver::Dataset;
use serde_json::Value;

fn sepm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sepm")).args(args).env_remove("SEPM_SEED").output().unwrap()
}

fn mm_csv(dir: &Path) -> String {
    let m = michaelis_menten();
    let d = generate_dataset(
        &m,
        &ParameterPoint::new(vec![2.0], vec![1.0]),
        40,
        &"uniform:0.1,10".parse().unwrap(),
        &"gaussian:0,0.05".parse().unwrap(),
        3,
    )
    .unwrap();
    let path = dir.join("mm.csv");
    save_dataset(&path, &d).unwrap();
    path.to_str().unwrap().to_string()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn fit_prints_versioned_json() {
    let dir = tempfile::tempdir().unwrap();
    let data = mm_csv(dir.path());
    let out = sepm(&["fit", "--model", "michaelis-menten", "--loss", "huber:1.345", "--data", &data]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["converged"], true);
    let alpha = v["alpha"][0].as_f64().unwrap();
    assert!((alpha - 2.0).abs() < 0.5);
    assert!(v["beta"][0].as_f64().unwrap() > 0.0);
    assert!(v["objective"].as_f64().unwrap() >= 0.0);
    let again = sepm(&["fit", "--model", "michaelis-menten", "--loss", "huber:1.345", "--data", &data]);
    assert_eq!(out.stdout, again.stdout);
}

#[test]
fn numbers_carry_seventeen_significant_digits() {
    let dir = tempfile::tempdir().unwrap();
    let data = mm_csv(dir.path());
    let out = sepm(&["fit", "--model", "michaelis-menten", "--loss", "square", "--data", &data]);
    let text = String::from_utf8(out.stdout).unwrap();
    let alpha_line = text.lines().skip_while(|l| !l.contains("\"alpha\"")).nth(1).unwrap().trim().trim_end_matches(',');
    let mantissa = alpha_line.split('e').next().unwrap().replace(['.', '-'], "");
    assert_eq!(mantissa.len(), 17, "{alpha_line}");
}

#[test]
fn unknown_loss_lists_valid_specs() {
    let dir = tempfile::tempdir().unwrap();
    let data = mm_csv(dir.path());
    let out = sepm(&["fit", "--model", "michaelis-menten", "--loss", "hubr:1", "--data", &data]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("huber") && err.contains("bisquare") && err.contains("square"), "{err}");
}

#[test]
fn malformed_data_exits_with_parse_status() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "x1,y\n1,0.5\n2,inf\n").unwrap();
    let out = sepm(&["fit", "--model", "michaelis-menten", "--loss", "square", "--data", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn dataset_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let d = Dataset::new(2, vec![0.1, 1.0 / 3.0, 2e-300, 7.0], vec![std::f64::consts::PI, -1e17]).unwrap();
    let path = dir.path().join("d.csv");
    save_dataset(&path, &d).unwrap();
    assert_eq!(load_dataset(&path).unwrap(), d);
}

#[test]
fn profile_output() {
    let dir = tempfile::tempdir().unwrap();
    let data = mm_csv(dir.path());
    let prof = dir.path().join("profile.csv");
    let out = sepm(&[
        "fit", "--model", "michaelis-menten", "--loss", "square", "--data", &data,
        "--profile-out", prof.to_str().unwrap(), "--profile-points", "21",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&prof).unwrap();
    assert_eq!(text.lines().next(), Some("alpha,objective,beta1"));
    assert_eq!(text.lines().count(), 22);
    let fit = json(&out)["objective"].as_f64().unwrap();
    let min_profile = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap())
        .fold(f64::INFINITY, f64::min);
    assert!(fit <= min_profile + 1e-12);

    let out = sepm(&[
        "fit", "--model", "logistic-growth", "--loss", "square", "--data", &data,
        "--profile-out", prof.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn check_reports_each_assumption() {
    let out = sepm(&["check", "--model", "michaelis-menten", "--loss", "bisquare:4.685", "--assumptions", "C,E,G"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["schema_version"], 1);
    let reports = v["reports"].as_array().unwrap();
    let names: Vec<&str> = reports.iter().map(|r| r["assumption"].as_str().unwrap()).collect();
    assert_eq!(names, ["C", "E", "G"]);
    assert!(reports.iter().all(|r| r["passed"] == true && r["margin"].as_f64().unwrap() > 0.0));
    assert_eq!(reports[1]["estimates"]["delta_hat"].as_f64(), Some(0.0));

    let out = sepm(&["check", "--model", "exp-growth:1", "--loss", "square", "--assumptions", "G"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["reports"][0]["passed"], false);

    let out = sepm(&["check", "--model", "michaelis-menten", "--loss", "square", "--assumptions", "Q"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn check_writes_report_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let out = sepm(&[
        "check", "--model", "exp-decay:2", "--loss", "huber:1.345", "--assumptions", "A,D,F",
        "--out", path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["reports"].as_array().unwrap().len(), 3);
}

const SIM: &str = "\
# small consistency run
model = michaelis-menten
theta0.alpha = 2
theta0.beta = 1
x_dist = uniform:0.1,10
errdist = gaussian:0,0.1
n_list = 30,90
reps = 4
losses = square,bisquare:4.685
seed = 5
fit.alpha_starts = 8
";

#[test]
fn simulate_is_reproducible_and_seed_sensitive() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sim.cfg");
    std::fs::write(&cfg, SIM).unwrap();
    let run = |name: &str, seed: Option<&str>, extra: &[&str]| {
        let out_path = dir.path().join(name);
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_sepm"));
        cmd.args(["simulate", "--config", cfg.to_str().unwrap(), "--out", out_path.to_str().unwrap()]).args(extra);
        match seed {
            Some(s) => cmd.env("SEPM_SEED", s),
            None => cmd.env_remove("SEPM_SEED"),
        };
        let out = cmd.output().unwrap();
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read_to_string(out_path).unwrap()
    };
    let a = run("a.csv", None, &[]);
    let b = run("b.csv", None, &[]);
    assert_eq!(a, b);
    assert_eq!(a.lines().count(), 5);
    assert!(a.lines().nth(1).unwrap().ends_with(','));
    let c = run("c.csv", Some("6"), &[]);
    assert_ne!(a, c);
    let filtered = run("d.csv", None, &["--cells", "90x*"]);
    assert_eq!(filtered.lines().count(), 3);
    let timed = run("e.csv", None, &["--timing"]);
    assert!(!timed.lines().nth(1).unwrap().ends_with(','));
}

#[test]
fn simulate_rejects_bad_configs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sim.cfg");
    std::fs::write(&cfg, SIM.replace("reps = 4", "reps = four")).unwrap();
    let out = sepm(&["simulate", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("x.csv").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    std::fs::write(&cfg, SIM.replace("losses = square,bisquare:4.685", "losses = hubr:1")).unwrap();
    let out = sepm(&["simulate", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("x.csv").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!dir.path().join("x.csv").exists());
}
