use std::path::PathBuf;
use std::process::{Command, Output};

fn magnonic(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_magnonic")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn meta(text: &str, key: &str) -> f64 {
    let prefix = format!("# {key}: ");
    text.lines().find_map(|l| l.strip_prefix(&prefix)).unwrap_or_else(|| panic!("no {key}")).parse().unwrap()
}

/// Data rows split on commas, header excluded.
fn rows(text: &str) -> Vec<Vec<String>> {
    text.lines().filter(|l| !l.starts_with('#')).skip(1).map(|l| l.split(',').map(String::from).collect()).collect()
}

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn bell_spectrum_minimum_below_resonance() {
    let text = stdout(&magnonic(&["spectrum", "--workflow", "bell", "--points", "101"]));
    assert!(meta(&text, "delta_numeric") < 0.0);
    let (w, _) = rows(&text)
        .iter()
        .map(|r| (r[0].parse::<f64>().unwrap(), r[3].parse::<f64>().unwrap()))
        .fold((0.0, f64::INFINITY), |b, x| if x.1 < b.1 { x } else { b });
    assert!(w < 2.7);
}

#[test]
fn ghz_spectrum_minimum_above_resonance() {
    let text = stdout(&magnonic(&["spectrum", "--workflow", "ghz", "--points", "11"]));
    assert!(meta(&text, "delta_numeric") > 0.0);
    assert!(meta(&text, "omega_q_star") > 1.4);
}

#[test]
fn uncoupled_spectrum_reports_zero_gap() {
    let text = stdout(&magnonic(&["spectrum", "--g", "0", "--G", "0", "--points", "11"]));
    assert!(meta(&text, "gap_min") < 1e-10);
}

#[test]
fn header_names_dataset_truncation_and_timing() {
    let text = stdout(&magnonic(&["spectrum", "--points", "3", "--trunc", "6,5"]));
    assert!(text.starts_with("# dataset: "));
    assert!(text.contains("# truncation: 6x5"));
    assert!(text.contains("# timing: "));
}

#[test]
fn effective_rabi_trace_reaches_one() {
    let text = stdout(&magnonic(&["rabi", "--g", "0.1", "--G", "0.1", "--points", "2001"]));
    let peak = rows(&text).iter().map(|r| r[5].parse::<f64>().unwrap()).fold(0.0, f64::max);
    assert!(peak > 0.99999, "{peak}");
    assert!((meta(&text, "preset_a_p_max") - 0.88).abs() < 0.03);
}

#[test]
fn protocol_run_writes_schedule() {
    let text = stdout(&magnonic(&["protocol", "--samples", "3"]));
    assert!(text.contains("# step2_pair: bell"));
    assert!((meta(&text, "final_fidelity") - 0.93).abs() < 0.03);
    assert_eq!(rows(&text).len(), 3);
}

#[test]
fn config_file_then_flags() {
    let path = scratch("ghz.cfg");
    std::fs::write(&path, "# ghz preset with a weaker photon-magnon coupling\nworkflow = ghz\ng = 0.08\n").unwrap();
    let text = stdout(&magnonic(&["spectrum", "--config", path.to_str().unwrap(), "--G", "0.09", "--points", "3"]));
    assert!(text.contains("# workflow: ghz"));
    assert_eq!(meta(&text, "g"), 0.08);
    assert_eq!(meta(&text, "G"), 0.09);
}

#[test]
fn output_file_matches_stdout() {
    let path = scratch("spectrum.csv");
    let out = magnonic(&["spectrum", "--points", "7", "--out", path.to_str().unwrap()]);
    assert!(out.status.success() && out.stdout.is_empty());
    let text = stdout(&magnonic(&["spectrum", "--points", "7"]));
    assert_eq!(std::fs::read_to_string(&path).unwrap(), text);
}

#[test]
fn sweep_identical_across_worker_counts() {
    let args = ["sweep", "--g-range", "0.1:0.1:1", "--G-range", "0.08:0.1:2", "--kappa", "1e-4"];
    let one = stdout(&magnonic(&[&args[..], &["--jobs", "1"]].concat()));
    let two = stdout(&magnonic(&[&args[..], &["--jobs", "2"]].concat()));
    assert_eq!(one, two);
    let r = rows(&one);
    assert_eq!(r.len(), 2);
    assert!(r.iter().all(|row| row[4] == "ok"));
    for row in &r {
        let (ideal, open): (f64, f64) = (row[2].parse().unwrap(), row[3].parse().unwrap());
        assert!(open <= ideal + 1e-4);
    }
}

#[test]
fn fidelity_dynamics_single_rate() {
    let text = stdout(&magnonic(&["fidelity-dynamics", "--kappas", "0", "--samples", "5"]));
    assert_eq!(rows(&text).len(), 5);
    assert!((meta(&text, "final_fidelity_kappa_0.00000000000e0") - 0.93).abs() < 0.03);
}

#[test]
fn validity_reports_both_pairs() {
    let text = stdout(&magnonic(&["validity", "--values", "0.05:0.1:2"]));
    let r = rows(&text);
    assert_eq!(r.len(), 8);
    assert!(r.iter().any(|x| x[0] == "bell") && r.iter().any(|x| x[0] == "ghz"));
    assert!(r.iter().all(|x| x[9] == "ok"));
}

#[test]
fn config_errors_exit_two() {
    assert_eq!(magnonic(&["protocol", "--phi", "7"]).status.code(), Some(2));
    assert_eq!(magnonic(&["protocol", "--trunc", "1,1"]).status.code(), Some(2));
    assert_eq!(magnonic(&["protocol", "--timing", "guess"]).status.code(), Some(2));
    let path = scratch("bad.cfg");
    std::fs::write(&path, "speed = 3\n").unwrap();
    assert_eq!(magnonic(&["protocol", "--config", path.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_three() {
    let out = magnonic(&["spectrum", "--range", "2.2:2.5"]);
    assert_eq!(out.status.code(), Some(3));
    let out = magnonic(&["protocol", "--workflow", "qubit-magnon", "--g", "0"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("step 3"));
}

#[test]
fn unwritable_output_exits_one() {
    let out = magnonic(&["spectrum", "--points", "3", "--out", "/nonexistent-dir/x.csv"]);
    assert_eq!(out.status.code(), Some(1));
}
