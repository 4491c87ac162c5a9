//! End-to-end checks of the command-line contract: config resolution,
//! validation exit codes, output files and their headers.

use std::fs;
use std::path::PathBuf;
use std::process::Command;
use std::sync::atomic::{AtomicU64, Ordering};

use divlayer_cli::{resolve_config, ConfigArgs};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_divlayer"))
}

fn scratch_dir(tag: &str) -> PathBuf {
    static COUNTER: AtomicU64 = AtomicU64::new(0);
    let dir = std::env::temp_dir().join(format!(
        "divlayer-test-{}-{}-{}",
        std::process::id(),
        tag,
        COUNTER.fetch_add(1, Ordering::Relaxed)
    ));
    fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn defaults_match_documentation() {
    let cfg = resolve_config(None, &ConfigArgs::default()).unwrap();
    assert_eq!(cfg.m_t, 1);
    assert_eq!(cfg.m_r, 1);
    assert_eq!(cfg.nu, 1);
    assert_eq!(cfg.t_s, 8);
    assert_eq!(cfg.t_b, 1);
    assert_eq!(
        cfg.snr_grid_db,
        vec![12.0, 14.0, 16.0, 18.0, 20.0, 22.0, 24.0, 26.0, 28.0, 30.0]
    );
    assert_eq!(cfg.r_h, 0.25);
    assert_eq!(cfg.r_l, 0.25);
    assert_eq!(cfg.delta, 0.05);
    assert_eq!(cfg.seed, 1);
    assert!(!cfg.noiseless);
}

#[test]
fn flag_overrides_file_value() {
    let dir = scratch_dir("precedence");
    let file = dir.join("run.conf");
    fs::write(&file, "# comment line\nseed=7\nnu=2\n").unwrap();
    let args = ConfigArgs {
        seed: Some(9),
        ..ConfigArgs::default()
    };
    let cfg = resolve_config(Some(&file), &args).unwrap();
    assert_eq!(cfg.seed, 9);
    assert_eq!(cfg.nu, 2);
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = scratch_dir("unknown-key");
    let file = dir.join("run.conf");
    fs::write(&file, "bogus=1\n").unwrap();
    let err = resolve_config(Some(&file), &ConfigArgs::default()).unwrap_err();
    assert!(format!("{err}").contains("bogus"));
}

#[test]
fn tb_is_derived_for_multiantenna_runs() {
    let args = ConfigArgs {
        mt: Some(2),
        ts: Some(3),
        nu: Some(1),
        ..ConfigArgs::default()
    };
    let cfg = resolve_config(None, &args).unwrap();
    assert_eq!(cfg.t_b, 4);
}

#[test]
fn invalid_block_length_exits_2_naming_field() {
    let dir = scratch_dir("badts");
    let out = bin()
        .args(["simulate", "--nu", "3", "--ts", "3"])
        .arg("--out-dir")
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("t_s"), "stderr: {stderr}");
}

#[test]
fn simulate_writes_expected_files() {
    let dir = scratch_dir("simulate");
    let out = bin()
        .args([
            "simulate",
            "--ts",
            "4",
            "--nu",
            "1",
            "--r-h",
            "0",
            "--r-l",
            "0",
            "--snr-grid-db",
            "8,10,12",
            "--max-trials",
            "2000",
            "--min-error-events",
            "10",
        ])
        .arg("--out-dir")
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    for name in ["sweep.csv", "diversity.csv", "manifest.txt"] {
        let text = fs::read_to_string(dir.join(name)).unwrap();
        let first = text.lines().next().unwrap();
        assert!(
            first.starts_with("# divlayer ") && first.contains("config="),
            "{name} header: {first}"
        );
    }
    let sweep = fs::read_to_string(dir.join("sweep.csv")).unwrap();
    assert!(sweep
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("snr_db,layer,trials,errors,pe,ci_halfwidth"));
    assert_eq!(sweep.lines().count(), 2 + 3); // header comment + column row + 3 points
}

#[test]
fn lemma_check_reports_zero_violations() {
    let dir = scratch_dir("lemma");
    let out = bin()
        .args([
            "lemma-check",
            "--draws",
            "2000",
            "--ts",
            "8",
            "--nu",
            "2",
            "--r-h",
            "0",
            "--r-l",
            "0",
        ])
        .arg("--out-dir")
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("violations,0"), "stdout: {stdout}");
    assert!(dir.join("lemma_check.csv").exists());
}

#[test]
fn region_endpoints_match_library() {
    let dir = scratch_dir("region");
    let out = bin()
        .args([
            "region", "--snr-db", "30", "--ph", "0.01", "--pl", "0.1", "--mt", "2", "--grid", "5",
        ])
        .arg("--out-dir")
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = fs::read_to_string(dir.join("region.csv")).unwrap();
    let rows: Vec<&str> = text.lines().skip(2).collect();
    assert_eq!(rows.len(), 5);
    let first: Vec<f64> = rows[0].split(',').map(|v| v.parse().unwrap()).collect();
    let last: Vec<f64> = rows[4].split(',').map(|v| v.parse().unwrap()).collect();
    // a = 0: weak rate zero; a = 1: strong rate zero.
    assert!(first[1].abs() < 1e-12);
    assert!(last[2].abs() < 1e-12);
    // CSV carries nine significant digits.
    let curve = divlayer_core::experiments::bc_rate_region(30.0, 0.01, 0.1, 2, 5).unwrap();
    assert!((first[2] - curve.points[0].1).abs() < 1e-7 * curve.points[0].1.max(1.0));
    assert!((last[1] - curve.points[4].0).abs() < 1e-7 * curve.points[4].0.max(1.0));
}

#[test]
fn desk_scale_cap_exits_3() {
    // Grid dimension (t_s - nu) * m_t = 10 exceeds the diagonal cap.
    let dir = scratch_dir("cap");
    let out = bin()
        .args([
            "codebook-check",
            "--mt",
            "2",
            "--ts",
            "6",
            "--nu",
            "1",
            "--r-h",
            "0.1",
            "--r-l",
            "0.1",
        ])
        .arg("--out-dir")
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(3),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn numeric_failure_exits_4() {
    let dir = scratch_dir("numeric");
    let out = bin()
        .args(["region", "--ph", "1e-320", "--pl", "0.1"])
        .arg("--out-dir")
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(4),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn codebook_check_passes_on_desk_scale_build() {
    let dir = scratch_dir("codebook");
    let out = bin()
        .args([
            "codebook-check",
            "--export",
            "--mt",
            "2",
            "--ts",
            "3",
            "--nu",
            "1",
            "--r-h",
            "0.2",
            "--r-l",
            "0.2",
            "--snr-grid-db",
            "20",
        ])
        .arg("--out-dir")
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report = fs::read_to_string(dir.join("codebook_check.csv")).unwrap();
    let rows: Vec<&str> = report.lines().skip(2).collect();
    assert_eq!(rows.len(), 2);
    for row in rows {
        assert!(row.ends_with(",true"), "row: {row}");
    }
    assert!(dir.join("codebook_h.csv").exists());
    assert!(dir.join("codebook_l.csv").exists());
    let h_book = fs::read_to_string(dir.join("codebook_h.csv")).unwrap();
    assert_eq!(h_book.lines().count(), 1 + 256); // header + one line per word
}

#[test]
fn outage_table_is_written() {
    let dir = scratch_dir("outage");
    let out = bin()
        .args([
            "outage",
            "--draws",
            "50000",
            "--alphas",
            "1.0",
            "--snr-grid-db",
            "10",
            "--nu",
            "1",
            "--r-h",
            "0",
            "--r-l",
            "0",
        ])
        .arg("--out-dir")
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = fs::read_to_string(dir.join("outage.csv")).unwrap();
    let row = text.lines().nth(2).unwrap();
    let cols: Vec<&str> = row.split(',').collect();
    assert_eq!(cols.len(), 6);
    let analytic: f64 = cols[3].parse().unwrap();
    let empirical: f64 = cols[4].parse().unwrap();
    assert!(
        (analytic - empirical).abs() < 0.01,
        "{analytic} vs {empirical}"
    );
}

#[test]
fn identical_runs_are_byte_identical_across_worker_counts() {
    let args = [
        "simulate",
        "--ts",
        "4",
        "--nu",
        "1",
        "--r-h",
        "0.2",
        "--r-l",
        "0.2",
        "--snr-grid-db",
        "10,14",
        "--max-trials",
        "1500",
        "--min-error-events",
        "25",
    ];
    let dir_a = scratch_dir("det-a");
    let dir_b = scratch_dir("det-b");
    let out_a = bin()
        .args(args)
        .arg("--out-dir")
        .arg(&dir_a)
        .env("DIVLAYER_WORKERS", "1")
        .output()
        .unwrap();
    let out_b = bin()
        .args(args)
        .arg("--out-dir")
        .arg(&dir_b)
        .env("DIVLAYER_WORKERS", "2")
        .output()
        .unwrap();
    assert_eq!(out_a.status.code(), Some(0));
    assert_eq!(out_b.status.code(), Some(0));
    for name in ["sweep.csv", "diversity.csv"] {
        let a = fs::read(dir_a.join(name)).unwrap();
        let b = fs::read(dir_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs across worker counts");
    }
}
