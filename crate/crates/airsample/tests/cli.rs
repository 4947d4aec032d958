//! End-to-end tests of the `airsample` binary: subcommand plumbing, exit
//! codes, override mechanics and run-to-run determinism.

use std::path::Path;
use std::process::{Command, Output};

const BASE_CONFIG: &str = r#"
[plans]
t_sen_s = [600, 3600]
n_s = [1, 5]
t_r_s = [120]
modes = ["consecutive"]

[features]
targets = ["O3"]

[evaluation]
seeds = [0, 1]

[synth]
start_time = "2021-03-01T00:00:00Z"
duration_days = 4
latent_step_s = 3600
seed = 5
target = "O3"
beta = [4.0, 0.5, -0.5, 0.8]

[[synth.channels]]
name = "o3_we"
offset = 300.0
noise_sigma = 5.0
components = [
  { amplitude = 40.0, period_s = 86400.0, phase = 0.4 },
  { amplitude = 12.0, period_s = 43200.0, phase = 1.7 },
]

[[synth.channels]]
name = "o3_ae"
offset = 120.0
noise_sigma = 5.0
components = [{ amplitude = 16.0, period_s = 86400.0, phase = 2.5 }]

[[synth.channels]]
name = "temp"
offset = 15.0
components = [{ amplitude = 6.0, period_s = 86400.0, phase = 5.1 }]
"#;

fn airsample(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_airsample"))
        .args(args)
        .current_dir(dir)
        .env_remove("AIRSAMPLE_SEED")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(&path, BASE_CONFIG).unwrap();
    path
}

#[test]
fn synth_then_sweep_from_csv_files() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());

    let out = airsample(
        dir.path(),
        &["synth", "--config", config.to_str().unwrap(), "--out", "data"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("data/raw.csv").exists());
    assert!(dir.path().join("data/reference_o3.csv").exists());
    assert!(dir.path().join("data/manifest.json").exists());

    // Sweep over the emitted CSVs: synthetic and file-backed data are
    // interchangeable.
    let out = airsample(
        dir.path(),
        &[
            "sweep",
            "--config",
            config.to_str().unwrap(),
            "--set",
            "data.raw=\"data/raw.csv\"",
            "--set",
            "data.reference.O3=\"data/reference_o3.csv\"",
            "--out",
            "run1",
            "--jobs",
            "2",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("run1/sweep_o3.csv")).unwrap();
    assert!(csv.starts_with(
        "t_sen_s,n_s,t_r_s,mode,dc,cv_r2_mean,cv_r2_lo,cv_r2_hi,test_r2,test_rmse,retention,avg_power_mw\n"
    ));
    // 2 t_sen x 2 n_s rows.
    assert_eq!(csv.lines().count(), 5);
    // The override round-trips into the echoed config.
    let echo = std::fs::read_to_string(dir.path().join("run1/config_echo.toml")).unwrap();
    assert!(echo.contains("raw = \"data/raw.csv\""), "{echo}");
}

#[test]
fn sweep_is_deterministic_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    for out_dir in ["a", "b"] {
        let out = airsample(
            dir.path(),
            &["sweep", "--config", config.to_str().unwrap(), "--out", out_dir],
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for name in ["sweep.json", "sweep_o3.csv", "manifest.json", "config_echo.toml"] {
        let a = std::fs::read(dir.path().join("a").join(name)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical invocations");
    }
}

#[test]
fn report_subcommand_reemits_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let out = airsample(
        dir.path(),
        &["sweep", "--config", config.to_str().unwrap(), "--out", "run"],
    );
    assert!(out.status.success());
    let out = airsample(
        dir.path(),
        &["report", "--input", "run/sweep.json", "--out", "converted"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let original = std::fs::read(dir.path().join("run/sweep_o3.csv")).unwrap();
    let converted = std::fs::read(dir.path().join("converted/sweep_o3.csv")).unwrap();
    assert_eq!(original, converted);
}

#[test]
fn calibrate_with_overrides_writes_model_report() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let out = airsample(
        dir.path(),
        &[
            "calibrate",
            "--config",
            config.to_str().unwrap(),
            "--set",
            "evaluation.cv_k=5",
            "--out",
            "cal",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("cal/calibration.json")).unwrap();
    assert!(text.contains("\"cv_k\": 5"), "{text}");
    assert!(text.contains("\"target\": \"O3\""));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("O3: cv R2"), "{stdout}");
}

#[test]
fn select_features_reports_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let out = airsample(
        dir.path(),
        &[
            "select-features",
            "--config",
            config.to_str().unwrap(),
            "--set",
            "evaluation.cv_k=5",
            "--out",
            "sel",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("sel/selection.json")).unwrap();
    // Both derived channels appear in the trajectory, signal first.
    let s_pos = text.find("\"s_o3\"").unwrap();
    let t_pos = text.find("\"temp\"").unwrap();
    assert!(s_pos < t_pos, "{text}");
}

#[test]
fn missing_reference_file_exits_2_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    // Valid raw CSV, missing reference file.
    airsample(
        dir.path(),
        &["synth", "--config", config.to_str().unwrap(), "--out", "data"],
    );
    let out = airsample(
        dir.path(),
        &[
            "sweep",
            "--config",
            config.to_str().unwrap(),
            "--set",
            "data.raw=\"data/raw.csv\"",
            "--set",
            "data.reference.O3=\"data/nonexistent.csv\"",
            "--out",
            "run",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("data/nonexistent.csv"), "{stderr}");
}

#[test]
fn usage_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = airsample(dir.path(), &["sweep", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(1));
    let out = airsample(dir.path(), &["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
    let out = airsample(dir.path(), &["--help"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn rank_deficient_calibration_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    // Make the auxiliary electrode an exact copy of the working one:
    // under electrode_policy = separate the two columns are collinear.
    let out = airsample(
        dir.path(),
        &[
            "calibrate",
            "--config",
            config.to_str().unwrap(),
            "--set",
            "features.electrode_policy=\"separate\"",
            "--set",
            "synth.channels=[{ name = \"o3_we\", offset = 1.0, noise_sigma = 0.0, components = [{ amplitude = 5.0, period_s = 86400.0, phase = 0.0 }] }, { name = \"o3_ae\", offset = 1.0, noise_sigma = 0.0, components = [{ amplitude = 5.0, period_s = 86400.0, phase = 0.0 }] }]",
            "--set",
            "synth.beta=[0.0, 1.0, 1.0]",
            "--out",
            "cal",
        ],
    );
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("fit"), "{stderr}");
}

#[test]
fn airsample_seed_env_fallback() {
    let dir = tempfile::tempdir().unwrap();
    // Config without explicit seeds.
    let text = BASE_CONFIG.replace("seeds = [0, 1]", "seeds = []");
    let config = dir.path().join("run.toml");
    std::fs::write(&config, text).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_airsample"))
        .args(["sweep", "--config", config.to_str().unwrap(), "--out", "run"])
        .current_dir(dir.path())
        .env("AIRSAMPLE_SEED", "42")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = std::fs::read_to_string(dir.path().join("run/manifest.json")).unwrap();
    assert!(manifest.contains("42"), "{manifest}");
    let json = std::fs::read_to_string(dir.path().join("run/sweep.json")).unwrap();
    assert!(json.contains("\"seeds\": [\n    42\n  ]"), "{json}");
}
