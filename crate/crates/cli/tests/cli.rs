//! End-to-end runs of the `helios` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use helios::experiment::read_csv;

const SMALL: &str = "R0 = pi\nT = 1\nM = 32\nN = 20\nN1 = 6\nP = 20\nH = 0.7\nseed = 3\n";

fn helios(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_helios"));
    cmd.args(args).env_remove("HELIOS_THREADS");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn write_config(dir: &Path, extra: &str) -> PathBuf {
    let path = dir.join("run.cfg");
    fs::write(&path, format!("{SMALL}{extra}")).unwrap();
    path
}

fn run_ok(args: &[&str], envs: &[(&str, &str)]) {
    let out = helios(args, envs);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn zero_sources_give_a_zero_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "f = const(0)\ng = const(0)\n");
    run_ok(&["forward", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()], &[]);
    let table = read_csv(&dir.path().join("field.csv")).unwrap();
    assert_eq!(table.header, ["t", "r", "u"]);
    assert_eq!(table.rows.len(), 33 * 21);
    assert!(table.column("u").unwrap().iter().all(|u| *u == 0.0));
}

#[test]
fn repeated_runs_are_byte_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_ok(&["reconstruct", cfg.to_str().unwrap(), "--out", a.to_str().unwrap(), "--threads", "1"], &[]);
    run_ok(&["reconstruct", cfg.to_str().unwrap(), "--out", b.to_str().unwrap()], &[("HELIOS_THREADS", "3")]);
    for name in ["f_recon.csv", "g2_recon.csv", "summary.csv"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn ensemble_csvs_round_trip_at_full_precision() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    run_ok(&["ensemble", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()], &[]);
    let text = fs::read_to_string(dir.path().join("stats.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("n,mean,var"));
    for line in lines {
        for field in line.split(',').skip(1) {
            let x: f64 = field.parse().unwrap();
            assert_eq!(format!("{x:.16e}"), field, "17 significant digits survive parsing");
        }
    }
    let cov = read_csv(&dir.path().join("cov.csv")).unwrap();
    assert_eq!(cov.header, ["m", "n", "value"]);
    assert_eq!(cov.rows.len(), 36);
}

#[test]
fn odd_radial_points_exit_with_the_invariant() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.cfg");
    fs::write(&path, SMALL.replace("N = 20", "N = 21")).unwrap();
    let out = helios(&["forward", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("N even"), "{err}");
}

#[test]
fn unknown_keys_and_bad_hurst_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.cfg");
    fs::write(&path, format!("{SMALL}colour = red\n")).unwrap();
    assert_eq!(helios(&["forward", path.to_str().unwrap()], &[]).status.code(), Some(2));
    fs::write(&path, SMALL.replace("H = 0.7", "H = 1.0")).unwrap();
    let out = helios(&["ensemble", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("H"));
}

#[test]
fn zero_threads_from_the_environment_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let out = helios(&["forward", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()], &[("HELIOS_THREADS", "0")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("threads"));
}

#[test]
fn presets_are_accepted_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let out = helios(&["probe-decay", "example2", "--out", dir.path().to_str().unwrap()], &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = read_csv(&dir.path().join("decay.csv")).unwrap();
    assert_eq!(table.header, ["n", "lambda", "I", "E"]);
    let missing = helios(&["forward", "example9"], &[]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn seed_flag_changes_the_ensemble() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_ok(&["ensemble", cfg.to_str().unwrap(), "--out", a.to_str().unwrap()], &[]);
    run_ok(&["ensemble", cfg.to_str().unwrap(), "--out", b.to_str().unwrap(), "--seed", "4"], &[]);
    assert_ne!(fs::read(a.join("stats.csv")).unwrap(), fs::read(b.join("stats.csv")).unwrap());
}

#[test]
fn sweep_writes_one_row_per_hurst_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "H_list = 0.5, 0.8\nsweep_seeds = 2\n");
    run_ok(&["sweep-h", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()], &[]);
    let written = fs::read_dir(dir.path()).unwrap().filter_map(|e| e.ok()).map(|e| e.path());
    let csvs: Vec<PathBuf> = written.filter(|p| p.extension().is_some_and(|x| x == "csv")).collect();
    assert_eq!(csvs.len(), 1, "{csvs:?}");
    let table = read_csv(&csvs[0]).unwrap();
    assert_eq!(table.header, ["H", "seed", "f_error", "g2_error"]);
    assert_eq!(table.rows.len(), 4);
    assert!(table.column("g2_error").unwrap().iter().all(|e| e.is_finite()));
}
