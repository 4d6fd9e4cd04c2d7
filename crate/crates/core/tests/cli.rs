mod common;

use std::process::{Command, Output};

use merton_lattice::convergence::fit_rate;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_merton-lattice"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn config(name: &str) -> String {
    common::config_path(name).to_string_lossy().into_owned()
}

#[test]
fn selftest_passes_with_enough_checks() {
    let out = run(&["selftest"]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let checks = stdout(&out).lines().filter(|l| l.starts_with("PASS ")).count();
    assert!(checks >= 10, "{checks} checks");
}

#[test]
fn selftest_names_a_corrupted_xi_table() {
    let out = run(&["selftest", "--corrupt-xi"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).lines().any(|l| l.starts_with("FAIL xi_identities_d")), "{}", stdout(&out));
}

#[test]
fn hand_example_prints_one_half() {
    let out = run(&["price", "--config", &config("hand_example")]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).lines().any(|l| l == "value = 0.5"), "{}", stdout(&out));
}

#[test]
fn constant_payoff_prints_the_strike() {
    let out = run(&["price", "--config", &config("constant")]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).lines().any(|l| l == "value = 1.3"), "{}", stdout(&out));
}

#[test]
fn n_override_changes_state_counts() {
    let out = run(&["price", "--config", &config("bs_put_1d"), "--n", "10"]);
    let text = stdout(&out);
    assert!(text.contains("n = 10\n") && text.contains("final_states = 11\n"), "{text}");
}

#[test]
fn missing_vol_is_a_config_error_with_path() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(common::config_path("hand_example")).unwrap();
    let broken = text.replace("\"vol\": [[1.0]],", "");
    assert_ne!(text, broken);
    let path = dir.path().join("broken.json");
    std::fs::write(&path, broken).unwrap();
    let out = run(&["price", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("model") && err.contains("vol"), "{err}");
}

#[test]
fn unreadable_config_is_exit_two() {
    let out = run(&["price", "--config", "/nonexistent/config.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn engine_errors_name_the_type() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(common::config_path("basket_put_2d")).unwrap();
    let tight = text.replace("\"n\": 64,", "\"n\": 64, \"state_budget\": 1000,");
    let path = dir.path().join("tight.json");
    std::fs::write(&path, tight).unwrap();
    let out = run(&["price", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("StateBudgetExceeded"), "{}", stderr(&out));

    // One asset with sigma = 1 at n = 1 gives a zero factor; a larger vol makes it negative.
    let text = std::fs::read_to_string(common::config_path("hand_example")).unwrap();
    let negative = text.replace("\"vol\": [[1.0]]", "\"vol\": [[1.5]]");
    let path = dir.path().join("negative.json");
    std::fs::write(&path, negative).unwrap();
    let out = run(&["price", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("NegativeDiffusionFactor"), "{}", stderr(&out));
}

fn data_rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn converge_writes_rows_and_footer() {
    let out = run(&["converge", "--config", &config("european_call_1d")]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let csv = stdout(&out);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("n,value,error,ref,ref_kind,seconds"));
    let rows = data_rows(&csv);
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r.len() == 6));
    let labels: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(labels, ["8", "16", "32", "fitted_C", "fitted_beta", "residual"]);
    assert!(rows[..3].iter().all(|r| r[4] == "closed_form"));
    assert!(stderr(&out).contains("seed = "));
}

#[test]
fn beta_footer_matches_a_refit_of_the_rows() {
    let out = run(&["converge", "--config", &config("bs_put_1d")]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let rows = data_rows(&stdout(&out));
    let pairs: Vec<(usize, f64)> =
        rows.iter().filter_map(|r| Some((r[0].parse().ok()?, r[2].parse().unwrap()))).collect();
    assert_eq!(pairs.len(), 6);
    let footer = |label: &str| -> f64 { rows.iter().find(|r| r[0] == label).unwrap()[1].parse().unwrap() };
    let fit = fit_rate(&pairs).unwrap();
    // The rows carry 12 significant digits.
    assert!((fit.beta - footer("fitted_beta")).abs() < 1e-9, "{} vs {}", fit.beta, footer("fitted_beta"));
    assert!((fit.c - footer("fitted_C")).abs() / fit.c < 1e-9);
    assert!((fit.residual - footer("residual")).abs() < 1e-9);
}

#[test]
fn constant_study_is_not_a_fit() {
    let out = run(&["converge", "--config", &config("constant")]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let rows = data_rows(&stdout(&out));
    assert!(rows[..3].iter().all(|r| r[2] == "0"), "{rows:?}");
    assert!(rows[3..].iter().all(|r| r[1] == "not_a_fit"));
}

#[test]
fn rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for (path, threads) in [(&a, "1"), (&b, "3")] {
        let out = run(&[
            "converge",
            "--config",
            &config("merton_put_1d"),
            "--out",
            path.to_str().unwrap(),
            "--seed",
            "99",
            "--threads",
            threads,
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        assert!(stderr(&out).contains("seed = 99"));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn jump_mode_flag_overrides_config() {
    let out = run(&["price", "--config", &config("uniform_jumps_1d"), "--jump-mode", "native"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("NativeRequiresDiscrete"), "{}", stderr(&out));
}
