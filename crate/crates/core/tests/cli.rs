use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_otfs-link"))
}

const SMALL: &str = r#"{
  "frame": {"n_subcarriers": 16, "n_doppler_bins": 4, "max_delay_taps": 4, "cp_len": 4, "sample_rate": 2e6},
  "profile": {"delays_us": [0.0, 0.5, 1.0], "powers_db": [0.0, -3.0, -6.0]},
  "snr_db_list": [5.0, 15.0],
  "doppler_hz_list": [0.0, 3000.0],
  "n_trials": 3,
  "base_seed": 1,
  "equalizers": ["otfs_fde", "ofdm_single_tap"]
}"#;

#[test]
fn run_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    let out = dir.path().join("ber.csv");
    std::fs::write(&cfg, SMALL).unwrap();
    let status = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let records = otfs_link::harness::read_csv(&out).unwrap();
    assert_eq!(records.len(), 2 * 2 * 2);
}

#[test]
fn run_to_stdout_honours_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, SMALL).unwrap();
    let output = bin()
        .args([
            "run",
            "--trials",
            "1",
            "--seed",
            "77",
            "--equalizers",
            "otfs_fde_dde",
            "--threads",
            "1",
            "--config",
        ])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    let records = otfs_link::harness::parse_csv(output.stdout.as_slice()).unwrap();
    assert_eq!(records.len(), 4);
    assert!(records.iter().all(|r| r.frames == 1 && r.seed == 77));
}

#[test]
fn inspect_channel_writes_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    let out = dir.path().join("heq.csv");
    std::fs::write(&cfg, SMALL).unwrap();
    let status = bin()
        .args(["inspect-channel", "--doppler", "3000", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let text = std::fs::read_to_string(&out).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 64);
    assert!(rows.iter().all(|r| r.split(',').count() == 64));
}

#[test]
fn configuration_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, SMALL.replace("\"n_trials\": 3", "\"n_trials\": 0")).unwrap();
    let code = |args: &[&str]| bin().args(args).output().unwrap().status.code();

    assert_eq!(code(&["run", "--config", cfg.to_str().unwrap()]), Some(1));
    assert_eq!(code(&["run", "--config", "/nonexistent/cfg.json"]), Some(1));
    assert_eq!(
        code(&["run", "--equalizers", "nope", "--trials", "1"]),
        Some(1)
    );
    assert_eq!(code(&["run", "--preset", "huge"]), Some(1));
    assert_eq!(code(&["frobnicate"]), Some(1));

    std::fs::write(&cfg, "{ not json").unwrap();
    assert_eq!(code(&["run", "--config", cfg.to_str().unwrap()]), Some(1));
}

#[test]
fn help_exits_zero() {
    assert_eq!(bin().arg("--help").output().unwrap().status.code(), Some(0));
    assert_eq!(
        bin().arg("--version").output().unwrap().status.code(),
        Some(0)
    );
}
