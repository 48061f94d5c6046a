use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn persistlab(args: &[&str], dir: &Path, config: &str) -> Output {
    let cfg = dir.join("run.toml");
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_persistlab"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .arg("-o")
        .arg(dir.join("out"))
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let header = rdr.headers().unwrap().iter().map(str::to_string).collect();
    let rows = rdr
        .records()
        .map(|r| r.unwrap().iter().map(str::to_string).collect())
        .collect();
    (header, rows)
}

const DIN: &str = r#"
[model]
name = "din-predprey"
focal = ["y"]
"#;

const QUICK: &str = r#"
[horizons]
burn_in = 600
window = 300
omega_burn_in = 600
omega_window = 200

[grids]
ic_points_per_axis = 2
omega_seeds = 4
"#;

#[test]
fn list_models_shows_three_models_and_conditions() {
    let o = Command::new(env!("CARGO_BIN_EXE_persistlab")).arg("list-models").output().unwrap();
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    for name in ["ackleh-composite", "din-predprey", "food-chain-2pred"] {
        assert!(text.contains(name), "{text}");
    }
    let ackleh = text.lines().skip_while(|l| !l.starts_with("ackleh-composite")).take(4).collect::<Vec<_>>().join("\n");
    assert!(ackleh.contains("r0>1") && ackleh.contains("ri>1"));
}

#[test]
fn unknown_model_names_the_valid_ones() {
    let dir = TempDir::new().unwrap();
    let o = persistlab(&["certify"], dir.path(), "[model]\nname = \"lotka\"\nfocal = [\"y\"]\n");
    assert_eq!(code(&o), 2);
    let msg = stderr(&o);
    assert!(msg.contains("lotka") && msg.contains("din-predprey") && msg.contains("food-chain-2pred"), "{msg}");
}

#[test]
fn simulate_writes_one_row_per_step() {
    let dir = TempDir::new().unwrap();
    let o = persistlab(&["simulate"], dir.path(), &format!("{DIN}initial = [2.0, 1.0]\n"));
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (header, rows) = read_csv(&dir.path().join("out/simulate.csv"));
    assert_eq!(header, ["time", "x", "y", "rho"]);
    assert_eq!(rows.len(), 10_001);
    assert_eq!(rows[0][0], "0");
    assert_eq!(rows[10_000][0], "10000");
    assert!(!dir.path().join("out/simulate.svg").exists());
}

#[test]
fn prey_free_start_keeps_prey_at_zero() {
    let dir = TempDir::new().unwrap();
    let cfg = "[model]\nname = \"din-predprey\"\nfocal = [\"x\"]\ninitial = [0.0, 0.7]\n[horizons]\nsimulate = 500\n";
    let o = persistlab(&["simulate"], dir.path(), cfg);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (_, rows) = read_csv(&dir.path().join("out/simulate.csv"));
    assert!(rows.iter().all(|r| r[1].parse::<f64>().unwrap() == 0.0));
}

#[test]
fn svg_is_written_only_on_request() {
    let dir = TempDir::new().unwrap();
    let cfg = format!("{DIN}[horizons]\nsimulate = 50\n[output]\nformats = [\"csv\", \"svg\"]\n");
    let o = persistlab(&["simulate"], dir.path(), &cfg);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let svg = fs::read_to_string(dir.path().join("out/simulate.svg")).unwrap();
    assert!(svg.contains("<svg") && svg.trim_end().ends_with("</svg>"));
}

#[test]
fn certify_exit_codes_follow_the_verdict() {
    let dir = TempDir::new().unwrap();
    let ackleh = format!("[model]\nname = \"ackleh-composite\"\nfocal = [\"n\", \"p\"]\n{QUICK}");
    let o = persistlab(&["certify"], dir.path(), &ackleh);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let cert = fs::read_to_string(dir.path().join("out/certificate.txt")).unwrap();
    assert!(cert.starts_with("# persistlab-certificate v1\n"));
    assert_eq!(String::from_utf8(o.stdout).unwrap(), cert);

    let dir = TempDir::new().unwrap();
    let o = persistlab(&["certify", "--set", "model.params.d=1.2"], dir.path(), &format!("{DIN}{QUICK}"));
    assert_eq!(code(&o), 5, "{}", stderr(&o));
    let cert = fs::read_to_string(dir.path().join("out/certificate.txt")).unwrap();
    assert!(cert.contains("verdict = ExtinctionDetected"));
}

#[test]
fn missing_focal_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let o = persistlab(&["certify"], dir.path(), "[model]\nname = \"din-predprey\"\n");
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("focal"), "{}", stderr(&o));
}

#[test]
fn lyapunov_at_origin_is_the_prey_growth_rate() {
    let dir = TempDir::new().unwrap();
    let cfg = "[model]\nname = \"din-predprey\"\nfocal = [\"x\"]\ninitial = [0.0, 0.0]\n[horizons]\nlyapunov_horizon = 1000\n";
    let o = persistlab(&["lyapunov"], dir.path(), cfg);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (header, rows) = read_csv(&dir.path().join("out/lyapunov.csv"));
    assert_eq!(header.last().unwrap(), "running_average");
    let last: f64 = rows.last().unwrap().last().unwrap().parse().unwrap();
    assert!((last - 1.5).abs() <= 1e-12);
}

#[test]
fn short_lyapunov_horizon_is_rejected() {
    let dir = TempDir::new().unwrap();
    let o = persistlab(&["lyapunov", "--set", "horizons.lyapunov_horizon=100"], dir.path(), DIN);
    assert_eq!(code(&o), 2);
}

#[test]
fn bad_thread_count_is_rejected() {
    let o = Command::new(env!("CARGO_BIN_EXE_persistlab"))
        .arg("list-models")
        .env("PERSISTLAB_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn boundary_lists_prey_equilibria() {
    let dir = TempDir::new().unwrap();
    let o = persistlab(&["boundary"], dir.path(), &format!("{DIN}{QUICK}"));
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (header, rows) = read_csv(&dir.path().join("out/boundary.csv"));
    assert_eq!(header, ["focal", "item", "kind", "role", "period", "x", "y"]);
    let xs: Vec<f64> = rows.iter().map(|r| r[5].parse().unwrap()).collect();
    assert!(xs.iter().any(|x| *x == 0.0));
    assert!(xs.iter().any(|x| (x - 10.0).abs() < 1e-10));
    assert!(rows.iter().all(|r| r[2] == "equilibrium" && r[6].parse::<f64>().unwrap() == 0.0));
}

fn sweep_config(steps: usize) -> String {
    format!(
        "{DIN}{QUICK}\n[sweep]\nvary = [{{ name = \"r\", min = 0.5, max = 1.8, steps = {steps} }}, {{ name = \"d\", min = 0.5, max = 1.5, steps = {steps} }}]\n"
    )
}

#[test]
fn two_parameter_sweep_covers_the_grid() {
    let dir = TempDir::new().unwrap();
    let o = persistlab(&["sweep"], dir.path(), &sweep_config(20));
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (header, rows) = read_csv(&dir.path().join("out/sweep.csv"));
    assert_eq!(rows.len(), 400);
    let d_col = header.iter().position(|h| h == "d").unwrap();
    let v_col = header.iter().position(|h| h == "verdict").unwrap();
    for r in &rows {
        let d: f64 = r[d_col].parse().unwrap();
        if d < 0.9 {
            assert_eq!(r[v_col], "CertifiedPersistent", "{r:?}");
        } else if d > 1.1 {
            assert_eq!(r[v_col], "ExtinctionDetected", "{r:?}");
        }
    }
}

#[test]
fn sweep_resumes_from_its_journal() {
    let dir = TempDir::new().unwrap();
    let cfg = sweep_config(4);
    assert_eq!(code(&persistlab(&["sweep"], dir.path(), &cfg)), 0);
    let out = dir.path().join("out");
    let full = fs::read(out.join("sweep.csv")).unwrap();
    // keep the header and the first five journal records
    let journal = fs::read_to_string(out.join("sweep.journal")).unwrap();
    let kept: Vec<&str> = journal.lines().take(7).collect();
    fs::write(out.join("sweep.journal"), kept.join("\n") + "\n").unwrap();
    fs::remove_file(out.join("sweep.csv")).unwrap();
    let o = persistlab(&["sweep"], dir.path(), &cfg);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("(5 resumed"));
    assert_eq!(fs::read(out.join("sweep.csv")).unwrap(), full);
}

#[test]
fn runs_are_byte_identical() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let cfg = format!("[model]\nname = \"ackleh-composite\"\nfocal = [\"n\", \"p\"]\n{QUICK}");
    persistlab(&["certify"], a.path(), &cfg);
    persistlab(&["certify", "--set", "output.sequential=true"], b.path(), &cfg);
    assert_eq!(
        fs::read(a.path().join("out/certificate.txt")).unwrap(),
        fs::read(b.path().join("out/certificate.txt")).unwrap()
    );
    let cfg = sweep_config(3);
    persistlab(&["sweep"], a.path(), &cfg);
    persistlab(&["sweep"], b.path(), &cfg);
    assert_eq!(
        fs::read(a.path().join("out/sweep.csv")).unwrap(),
        fs::read(b.path().join("out/sweep.csv")).unwrap()
    );
}
