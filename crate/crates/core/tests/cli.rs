use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn nashcost(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nashcost"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn ok(o: Output) -> Output {
    assert!(
        o.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    o
}

const LABELS: [&str; 9] = ["1A", "1B", "1C", "2A", "2B", "2C", "3A", "3B", "3C"];

#[test]
fn synthesize_then_scenarios_writes_the_file_contract() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let s = stdout(&ok(nashcost(&["--out", out, "synthesize"])));
    assert!(s.contains("V1(x0)") && s.contains("V2(x0)") && s.contains("spectral radius"));
    let solution = dir.path().join("solution.json");
    ok(nashcost(&[
        "--out",
        out,
        "scenarios",
        "--solution",
        solution.to_str().unwrap(),
    ]));
    for l in LABELS {
        let text = fs::read_to_string(dir.path().join(format!("{l}.csv"))).unwrap();
        assert!(text.starts_with("# nashcost config="), "{l}");
    }
    assert!(dir.path().join("compare.csv").exists());
    assert!(dir.path().join("d_tight.svg").exists());
}

fn read_all(dir: &Path) -> Vec<Vec<u8>> {
    LABELS
        .iter()
        .map(|l| format!("{l}.csv"))
        .chain(["compare.csv".to_string()])
        .map(|f| fs::read(dir.join(f)).unwrap())
        .collect()
}

#[test]
fn same_seed_gives_identical_csvs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        ok(nashcost(&[
            "--out",
            d.path().to_str().unwrap(),
            "--realization",
            "random",
            "--seed",
            "42",
            "scenarios",
        ]));
    }
    assert_eq!(read_all(a.path()), read_all(b.path()));

    let c = tempfile::tempdir().unwrap();
    ok(nashcost(&[
        "--out",
        c.path().to_str().unwrap(),
        "--realization",
        "random",
        "--seed",
        "43",
        "scenarios",
    ]));
    assert_ne!(read_all(a.path()), read_all(c.path()));
}

#[test]
fn zero_initial_state_leaves_only_reference_paths() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"x0": [0.0, 0.0], "charts": false}"#).unwrap();
    ok(nashcost(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "scenarios",
    ]));
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(dir.path().join("2B.csv"))
        .unwrap();
    let headers = rdr.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    for rec in rdr.records() {
        let rec = rec.unwrap();
        for name in ["z", "pi_tilde", "g", "i_tilde"] {
            assert_eq!(rec[col(name)].parse::<f64>().unwrap(), 0.0);
        }
        assert_eq!(rec[col("g_bar")], rec[col("g_star")]);
    }
    assert!(!dir.path().join("d_tight.svg").exists());
}

#[test]
fn stale_solution_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    ok(nashcost(&["--out", out, "synthesize"]));
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"params": {"alpha2": 0.21}}"#).unwrap();
    let solution = dir.path().join("solution.json");
    let o = nashcost(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out,
        "scenarios",
        "--solution",
        solution.to_str().unwrap(),
    ]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("does not match the model"), "{err}");
    assert!(!dir.path().join("1A.csv").exists());
}

#[test]
fn check_only_and_check_subcommand() {
    for args in [&["synthesize", "--check-only"][..], &["check"][..]] {
        let s = stdout(&ok(nashcost(args)));
        assert!(s.contains("uncertainty constraints: ok"), "{s}");
        assert!(!s.contains("V1"));
    }
}

#[test]
fn failing_assumption_is_named_with_nonzero_exit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"params": {"alpha1": 0.0, "alpha2": 0.0, "beta2": 0.0}}"#,
    )
    .unwrap();
    let o = nashcost(&["--config", cfg.to_str().unwrap(), "check"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("FAILED"));
    assert!(String::from_utf8_lossy(&o.stderr).contains("stabilizab"));
}

#[test]
fn estimate_reports_and_echoes_exclusions() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("series.csv");
    let table = nashcost::estimate::synthetic_table(
        (0.16, 0.19),
        (0.699, 0.433),
        0.03,
        2000,
        24,
        |t| {
            (
                0.02 + 0.004 * ((t * 7) % 11) as f64,
                -0.01 - 0.003 * ((t * 5) % 9) as f64,
            )
        },
        || 0.0,
    );
    let mut text = String::from("year,z,i,pi,g\n");
    for (k, y) in table.years().iter().enumerate() {
        let v = |c: &str| table.column(c).unwrap()[k].unwrap();
        text += &format!("{y},{},{},{},{}\n", v("z"), v("i"), v("pi"), v("g"));
    }
    fs::write(&csv_path, text).unwrap();
    let s = stdout(&ok(nashcost(&[
        "--out",
        dir.path().to_str().unwrap(),
        "estimate",
        csv_path.to_str().unwrap(),
    ])));
    assert!(s.contains("alpha1 = 0.160000"), "{s}");
    assert!(s.contains("beta2 = 0.433000"), "{s}");
    assert!(s.contains("excluded years: 2008-2009,2020-2021"), "{s}");
    assert!(dir.path().join("fit.json").exists());

    let o = nashcost(&["estimate", "/definitely/not/here.csv"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("here.csv"));
}

#[test]
fn default_config_is_printed_and_loadable() {
    let o = ok(nashcost(&["--print-default-config"]));
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("default.json");
    fs::write(&cfg, &o.stdout).unwrap();
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("\"alpha1\": 0.16"));
    ok(nashcost(&["--config", cfg.to_str().unwrap(), "check"]));
}
