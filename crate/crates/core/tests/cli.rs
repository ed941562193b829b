use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use torsion_core::cli::output::read_columns;

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn torsion(args: &[&str], scenario: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_torsion"))
        .args(args)
        .arg("--scenario")
        .arg(scenario)
        .output()
        .unwrap()
}

#[test]
fn shipped_scenarios_have_expected_exit_codes() {
    for (name, code) in [
        ("euclidean-identity.toml", 0),
        ("convexity-violation.toml", 2),
        ("missing-warping.toml", 1),
    ] {
        let out = torsion(&["run"], &scenario(name));
        assert_eq!(out.status.code(), Some(code), "{name}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn full_hyperbolic_run_writes_every_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_torsion"))
        .args(["run", "--paths", "2000", "--scenario"])
        .arg(scenario("hyperbolic-full.toml"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    for table in [
        "build.csv",
        "balance.csv",
        "exit_time.csv",
        "rigidity.csv",
        "isoperimetric.csv",
        "symmetrize.csv",
        "intrinsic_compare.csv",
        "average_limit.csv",
        "mc_validate.csv",
        "summary.txt",
    ] {
        assert!(dir.path().join(table).exists(), "missing {table}");
    }
}

#[test]
fn exit_time_profile_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("e.csv");
    let out = Command::new(env!("CARGO_BIN_EXE_torsion"))
        .args(["profile", "--quantity", "E", "--grid", "33", "--scenario"])
        .arg(scenario("hyperbolic-full.toml"))
        .arg("--out")
        .arg(&file)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let rows = read_columns(&file).unwrap();
    assert_eq!(rows.len(), 33);
    // On the hyperbolic plane E(r) = 2 ln(cosh(R/2) / cosh(r/2)).
    for (s, e) in rows {
        let exact = 2.0 * (0.5f64.cosh() / (0.5 * s).cosh()).ln();
        assert!((e - exact).abs() <= 1e-8, "E({s}) = {e}, expected {exact}");
    }
}

#[test]
fn check_balance_reports_violation() {
    let out = torsion(&["check-balance"], &scenario("convexity-violation.toml"));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stdout).contains("warning"));
}

#[test]
fn seed_from_environment_is_reproducible() {
    let run = || {
        Command::new(env!("CARGO_BIN_EXE_torsion"))
            .args(["mc", "--paths", "500", "--scenario"])
            .arg(scenario("euclidean-identity.toml"))
            .env("TORSION_SEED", "11")
            .output()
            .unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a.stdout, b.stdout);
    assert!(a.status.code() != Some(1), "{}", String::from_utf8_lossy(&a.stderr));
}
