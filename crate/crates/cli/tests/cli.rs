use std::path::Path;
use std::process::{Command, Output};

fn mhd(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mhd")).args(args).current_dir(dir).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.display().to_string()
}

const SMALL_HARTMANN: &str = r#"
[case]
name = "hartmann-small"
problem = "hartmann"

[mesh]
n = [4, 8]

[spaces]
primal = [2, 1, 1]

[output]
csv = "out/rows.csv"
"#;

#[test]
fn missing_config_exits_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = mhd(&["run", "no-such.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no-such.toml"));
}

#[test]
fn invalid_config_exits_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.toml", &SMALL_HARTMANN.replace("[mesh]", "[mesh]\nsize = 3"));
    let out = mhd(&["verify", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("size"));
}

#[test]
fn run_writes_the_configured_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.toml", SMALL_HARTMANN);
    let out = mhd(&["run", &cfg, "--jobs", "2"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("out/rows.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("case,n,n_elements,space,qoi_h,qoi_ref,true_error,eta,eff,E_mom,E_con,E_M"));
    assert!(lines[1].starts_with("hartmann-small,4,16,P2P1P1,"));
    assert!(lines[2].starts_with("hartmann-small,8,64,P2P1P1,"));
    assert!(lines.iter().skip(1).all(|l| l.ends_with(",ok")));
}

#[test]
fn output_is_deterministic_apart_from_timings() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.toml", &SMALL_HARTMANN.replace("n = [4, 8]", "n = [4]"));
    let strip = |o: Output| -> Vec<String> {
        String::from_utf8(o.stdout)
            .unwrap()
            .lines()
            .map(|l| l.split(',').take(13).collect::<Vec<_>>().join(","))
            .collect()
    };
    let a = strip(mhd(&["run", &cfg, "-o", "-"], dir.path()));
    let b = strip(mhd(&["run", &cfg, "-o", "-"], dir.path()));
    assert_eq!(a.len(), 2);
    assert_eq!(a, b);
}

#[test]
fn failed_rows_give_a_nonzero_exit() {
    let dir = tempfile::tempdir().unwrap();
    // A 5x5 grid cannot resolve the quantity of interest region.
    let cfg = write_config(dir.path(), "misaligned.toml", &SMALL_HARTMANN.replace("n = [4, 8]", "n = [5]"));
    let out = mhd(&["run", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let csv = std::fs::read_to_string(dir.path().join("out/rows.csv")).unwrap();
    assert!(csv.contains("failed: "));
}

#[test]
fn verify_reports_every_property() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.toml", SMALL_HARTMANN);
    let out = mhd(&["verify", &cfg, "--seed", "3"], dir.path());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{stdout}");
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 4, "{stdout}");
}

#[test]
fn hartmann_has_no_stored_reference() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.toml", SMALL_HARTMANN);
    let out = mhd(&["reference", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("analytic"));
}
