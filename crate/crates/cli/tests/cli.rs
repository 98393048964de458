use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::tempdir;

fn tfqkd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tfqkd"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn read(p: &Path) -> String {
    fs::read_to_string(p).unwrap()
}

const HEADER: &str = "L_km,mu,epsilon,lambda,p_x,key_rate,e1ph_upper,EZ,n1_lower";

#[test]
fn sweep_reaches_three_hundred_km() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("rates.csv");
    let o = tfqkd(&[
        "sweep",
        "--paper-channel",
        "--ea",
        "0.1",
        "--lmin",
        "0",
        "--lmax",
        "400",
        "--lstep",
        "10",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = read(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(HEADER));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 41);
    assert!(rows.iter().all(|r| r.len() == 9));
    let last_positive = rows
        .iter()
        .filter(|r| r[5].parse::<f64>().unwrap() > 0.0)
        .map(|r| r[0].parse::<f64>().unwrap())
        .fold(f64::NEG_INFINITY, f64::max);
    assert!(last_positive >= 300.0, "{last_positive}");
    // fixed scientific notation with 12 decimals
    assert!(rows[30][5].contains('e') && rows[30][5].split('e').next().unwrap().len() == 14);
}

#[test]
fn empty_sweep_writes_header_only() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("empty.csv");
    let o = tfqkd(&[
        "sweep",
        "--lmin",
        "10",
        "--lmax",
        "0",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(read(&out), format!("{HEADER}\n"));

    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "distances =\n").unwrap();
    let o = tfqkd(&["sweep", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o), format!("{HEADER}\n"));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let args = |p: &Path| {
        vec![
            "sweep".to_string(),
            "--lmin=0".into(),
            "--lmax=200".into(),
            "--lstep=50".into(),
            format!("--out={}", p.display()),
        ]
    };
    let run = |p: &Path, extra: &[&str]| {
        let mut v = args(p);
        v.extend(extra.iter().map(|s| s.to_string()));
        let v: Vec<&str> = v.iter().map(String::as_str).collect();
        assert!(tfqkd(&v).status.success());
    };
    run(&a, &[]);
    run(&b, &["--threads", "1"]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn optimize_and_simulate() {
    let o = tfqkd(&["optimize", "--L", "100", "--paper-channel"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[0], "100");
    assert!(row[5].parse::<f64>().unwrap() > 0.0);

    let o = tfqkd(&[
        "optimize",
        "--L",
        "100",
        "--paper-channel",
        "--per-second",
        "1e9",
    ]);
    let scaled: f64 = stdout(&o)
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .nth(5)
        .unwrap()
        .parse()
        .unwrap();
    let base: f64 = row[5].parse().unwrap();
    assert!((scaled / base - 1e9).abs() < 1e-3);

    let dir = tempdir().unwrap();
    let cfg = dir.path().join("sim.cfg");
    fs::write(&cfg, "mc_windows = 1000000\nL = 20\n").unwrap();
    let o = tfqkd(&["simulate", "--config", cfg.to_str().unwrap(), "--seed", "5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text
        .starts_with("quantity,simulated,analytic\nwindows,1.000000000000e6,1.000000000000e6\n"));
    assert!(text.contains("\nn_X0,"));
    assert!(text.contains("\nkey_rate,"));
}

#[test]
fn verify_passes_by_default_and_catches_fault() {
    let o = tfqkd(&["verify"]);
    assert!(o.status.success(), "{}{}", stdout(&o), stderr(&o));
    let report = stdout(&o);
    assert_eq!(report.lines().count(), 3);
    assert!(report.lines().all(|l| l.starts_with("PASS ")), "{report}");

    let o = tfqkd(&["verify", "--inject-fault"]);
    assert!(!o.status.success());
    assert!(
        stdout(&o).contains("FAIL bound soundness"),
        "{}",
        stdout(&o)
    );
}

#[test]
fn verify_pass_fail_is_seed_independent() {
    for seed in ["7", "123456"] {
        let o = tfqkd(&["verify", "--seed", seed, "--trials", "5"]);
        assert!(o.status.success(), "seed {seed}: {}", stdout(&o));
    }
}

#[test]
fn dumped_config_reproduces_results() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("effective.cfg");
    let o = tfqkd(&[
        "sweep",
        "--dump-config",
        "--ea",
        "0.2",
        "--lmin",
        "20",
        "--lmax",
        "60",
        "--lstep",
        "20",
        "--mu-max",
        "0.5",
        "--out",
        cfg.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = read(&cfg);
    assert!(text.contains("ea = 0.2\n") && text.contains("mu_max = 0.5\n"));

    // drop the out line so results go to stdout
    let stripped: String = text
        .lines()
        .filter(|l| !l.starts_with("out ="))
        .map(|l| format!("{l}\n"))
        .collect();
    fs::write(&cfg, stripped).unwrap();
    let from_file = tfqkd(&["sweep", "--config", cfg.to_str().unwrap()]);
    let from_flags = tfqkd(&[
        "sweep", "--ea", "0.2", "--lmin", "20", "--lmax", "60", "--lstep", "20", "--mu-max", "0.5",
    ]);
    assert!(from_file.status.success(), "{}", stderr(&from_file));
    assert_eq!(from_file.stdout, from_flags.stdout);
    assert_eq!(stdout(&from_file).lines().count(), 4);
}

#[test]
fn config_errors_carry_line_numbers() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "# comment\nea = 0.1\nlambda = banana\n").unwrap();
    let o = tfqkd(&["sweep", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("config line 3"), "{}", stderr(&o));

    fs::write(&cfg, "ea = 0.1\n\np_x = 1.5\n").unwrap();
    let o = tfqkd(&["verify", "--config", cfg.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("config line 3"), "{}", stderr(&o));
}

#[test]
fn unwritable_output_fails() {
    let o = tfqkd(&[
        "sweep",
        "--lmin",
        "0",
        "--lmax",
        "0",
        "--out",
        "/nonexistent-dir/x.csv",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("cannot write"));
}
