//! End-to-end tests of the `zakline` binary: exit codes, report contents,
//! CSV schema and determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn zakline(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zakline"))
        .args(args)
        .output()
        .expect("failed to launch zakline")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn tmp_path(name: &str) -> PathBuf {
    let mut p = std::env::temp_dir();
    p.push(format!("zakline-test-{}-{name}", std::process::id()));
    p
}

#[test]
fn single_reports_quantized_pi() {
    let out = zakline(&[
        "single", "--t", "1", "--delta", "0.5", "--gamma", "1", "--theta", "0", "--M", "1001",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("quantized at pi"), "report:\n{text}");
    assert!(text.contains("PT status: unbroken"), "report:\n{text}");
    assert!(text.contains("analytic"), "report:\n{text}");
}

#[test]
fn single_hermitian_note() {
    let out = zakline(&["single", "--gamma", "0", "--theta", "0", "--M", "301"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("Hermitian"), "report:\n{text}");
}

#[test]
fn too_coarse_grid_is_a_config_error() {
    let out = zakline(&["single", "--M", "2", "--theta", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("grid too coarse"), "stderr: {}", stderr(&out));
}

#[test]
fn unknown_flag_is_usage_error() {
    let out = zakline(&["single", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_csv_schema_and_determinism() {
    let out_a = tmp_path("sweep-a.csv");
    let out_b = tmp_path("sweep-b.csv");
    let common = [
        "sweep", "--t", "1", "--delta", "0.5", "--gamma", "1", "--theta-min", "0",
        "--theta-max", "0.25pi", "--theta-steps", "4", "--M", "301",
    ];
    for (path, workers) in [(&out_a, "1"), (&out_b, "2")] {
        let mut args: Vec<&str> = common.to_vec();
        let path_s = path.to_str().unwrap();
        args.extend_from_slice(&["--output", path_s, "--workers", workers]);
        let out = zakline(&args);
        assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    }
    let a = std::fs::read_to_string(&out_a).unwrap();
    let b = std::fs::read_to_string(&out_b).unwrap();
    assert_eq!(a, b, "CSV output must not depend on the worker count");

    let mut lines = a.lines();
    let header = lines.next().unwrap();
    assert_eq!(
        header,
        "theta,re_g1,im_g1,re_g2,im_g2,re_g1_analytic,im_g1_analytic,\
         re_g2_analytic,im_g2_analytic,pt_broken,quant_res_1,quant_res_2,\
         oracle_gap_1,oracle_gap_2"
            .replace(' ', "")
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 4);
    for row in &rows {
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields.len(), 14);
        // round-trip: 17 significant digits reparse to the same bits
        let theta: f64 = fields[0].parse().unwrap();
        assert_eq!(format!("{theta:.16e}"), fields[0]);
    }
    std::fs::remove_file(out_a).ok();
    std::fs::remove_file(out_b).ok();
}

#[test]
fn sweep_single_step_matches_single_output_row() {
    let sweep_csv = tmp_path("sweep-one.csv");
    let single_csv = tmp_path("single-one.csv");
    let out = zakline(&[
        "sweep", "--theta-min", "0.1pi", "--theta-max", "0.2pi", "--theta-steps", "1",
        "--gamma", "1", "--M", "301", "--output", sweep_csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let out = zakline(&[
        "single", "--theta", "0.1pi", "--gamma", "1", "--M", "301",
        "--output", single_csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let a = std::fs::read_to_string(&sweep_csv).unwrap();
    let b = std::fs::read_to_string(&single_csv).unwrap();
    assert_eq!(a, b, "steps=1 sweep row must equal the single-command row");
    std::fs::remove_file(sweep_csv).ok();
    std::fs::remove_file(single_csv).ok();
}

#[test]
fn flags_and_config_file_are_equivalent() {
    let cfg_path = tmp_path("model.cfg");
    std::fs::write(
        &cfg_path,
        "# Fig. 2 point\nmodel=ssh\nt=1\ndelta=0.5\ngamma=1\ntheta=0.3pi\n",
    )
    .unwrap();
    let csv_flags = tmp_path("flags.csv");
    let csv_file = tmp_path("file.csv");
    let out = zakline(&[
        "single", "--t", "1", "--delta", "0.5", "--gamma", "1", "--theta", "0.3pi",
        "--M", "301", "--output", csv_flags.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let out = zakline(&[
        "single", "--model", cfg_path.to_str().unwrap(), "--M", "301",
        "--output", csv_file.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    assert_eq!(
        std::fs::read_to_string(&csv_flags).unwrap(),
        std::fs::read_to_string(&csv_file).unwrap()
    );
    for p in [cfg_path, csv_flags, csv_file] {
        std::fs::remove_file(p).ok();
    }
}

#[test]
fn malformed_model_file_is_config_error() {
    let cfg_path = tmp_path("bad.cfg");
    std::fs::write(&cfg_path, "model=ssh\nt=1\ndelta=two\ngamma=0\ntheta=0\n").unwrap();
    let out = zakline(&["single", "--model", cfg_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 3"), "stderr: {}", stderr(&out));
    std::fs::remove_file(cfg_path).ok();
}

#[test]
fn unwritable_output_is_config_error() {
    let out = zakline(&[
        "sweep", "--theta-steps", "1", "--M", "301",
        "--output", "/nonexistent-dir/out.csv",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn defective_point_on_grid_is_numerical_failure() {
    // H(k) = [[0, 1], [1 - cos k, 0]] is a Jordan block at k = 0, which the
    // odd grid hits exactly.
    let cfg_path = tmp_path("jordan.cfg");
    std::fs::write(
        &cfg_path,
        "model=fourier\ndim=2\nentry=0,1,0,1,0\n\
         entry=1,0,0,1,0\nentry=1,0,1,-0.5,0\nentry=1,0,-1,-0.5,0\n",
    )
    .unwrap();
    let out = zakline(&["single", "--model", cfg_path.to_str().unwrap(), "--M", "101"]);
    assert_eq!(out.status.code(), Some(3), "stderr: {}", stderr(&out));
    assert!(stderr(&out).contains("defective"), "stderr: {}", stderr(&out));
    std::fs::remove_file(cfg_path).ok();
}

#[test]
fn broken_sweep_rows_fail_soft_with_exit_4() {
    // theta = pi/2 with gamma = 0 closes the gap with a 2-fold degenerate
    // zero matrix at the zone edge; that row fails, the theta = pi row does
    // not. The CSV still contains both rows, with nan sentinels in the first.
    let csv = tmp_path("partial.csv");
    let out = zakline(&[
        "sweep", "--gamma", "0", "--theta-min", "0.5pi", "--theta-max", "1.5pi",
        "--theta-steps", "2", "--M", "51", "--output", csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(4), "stderr: {}", stderr(&out));
    let text = std::fs::read_to_string(&csv).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].contains("nan"), "failed row carries nan: {}", rows[0]);
    assert!(!rows[1].contains("nan"), "healthy row has values: {}", rows[1]);
    std::fs::remove_file(csv).ok();
}

#[test]
fn check_reports_chiral_symmetry_and_convergence() {
    let out = zakline(&[
        "check", "--gamma", "0", "--theta", "0", "--M", "301", "--M-list", "101,201,401",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("chiral symmetry present (sigma3)"), "got:\n{text}");
    assert!(text.contains("PT-unbroken"), "got:\n{text}");
    assert!(text.contains("M ="), "got:\n{text}");

    let out = zakline(&["check", "--gamma", "1", "--theta", "0.5pi", "--M", "301"]);
    // the convergence study may legitimately fail near the exceptional
    // points; the PT verdict must still be printed first
    assert!(stdout(&out).contains("PT-broken"), "got:\n{}", stdout(&out));
}

#[test]
fn check_gain_loss_breaks_chiral_symmetry() {
    let out = zakline(&["check", "--gamma", "1", "--theta", "0", "--M", "301"]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("no chiral symmetry"), "got:\n{}", stdout(&out));
}

#[test]
fn even_grid_size_is_bumped_with_warning() {
    let out = zakline(&["single", "--gamma", "1", "--theta", "0", "--M", "300"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stderr(&out).contains("even"), "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("M = 301"), "stdout: {}", stdout(&out));
}

#[test]
fn workers_env_variable_is_honored() {
    let csv = tmp_path("env-workers.csv");
    let out = Command::new(env!("CARGO_BIN_EXE_zakline"))
        .args([
            "sweep", "--gamma", "1", "--theta-min", "0", "--theta-max", "0.2pi",
            "--theta-steps", "3", "--M", "301", "--output", csv.to_str().unwrap(),
        ])
        .env("ZAKLINE_WORKERS", "2")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    assert!(Path::new(&csv).exists());
    std::fs::remove_file(csv).ok();
}
