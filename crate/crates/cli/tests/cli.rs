use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hybridbeam"))
        .args(args)
        .output()
        .expect("binary runs")
}

const SMALL: &str = r#"
[system]
n_bs = 32
n_rf = 4

[amm]
max_iters = 10

[sweep]
axis = "snr_db"
values = [0.0, 10.0]

[run]
schemes = ["pwmmse", "amm", "fully_digital", "tsh"]
trials = 50
output_path = "small.csv"
"#;

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.toml");
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn beampattern_preset_writes_patterns_and_depths() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["beampattern", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in [
        "pattern_user1_amm.csv",
        "pattern_user1_quiescent.csv",
        "nulling_depths.csv",
    ] {
        assert!(dir.path().join(name).is_file(), "{name} missing");
    }
}

#[test]
fn sumrate_honours_overrides_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let out_dir = dir.path().join("out");
    let args = [
        "sumrate-snr",
        "--config",
        &config,
        "--out",
        out_dir.to_str().unwrap(),
        "--trials",
        "2",
        "--seed",
        "9",
    ];
    let first = run(&args);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let csv = std::fs::read(out_dir.join("small.csv")).unwrap();
    assert_eq!(String::from_utf8_lossy(&csv).lines().count(), 1 + 4 * 2 * 2);
    assert!(run(&args).status.success());
    assert_eq!(std::fs::read(out_dir.join("small.csv")).unwrap(), csv);
    let other = run(&[
        "sumrate-snr",
        "--config",
        &config,
        "--out",
        out_dir.to_str().unwrap(),
        "--trials",
        "2",
        "--seed",
        "10",
    ]);
    assert!(other.status.success());
    assert_ne!(std::fs::read(out_dir.join("small.csv")).unwrap(), csv);
}

#[test]
fn sumrate_nbs_runs_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        &SMALL.replace(
            "axis = \"snr_db\"\nvalues = [0.0, 10.0]",
            "axis = \"n_bs\"\nvalues = [16, 32]",
        ),
    );
    let out = run(&[
        "sumrate-nbs",
        "--config",
        &config,
        "--out",
        dir.path().to_str().unwrap(),
        "--trials",
        "1",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("small.csv")).unwrap();
    assert!(text.lines().skip(1).any(|l| l.split(',').nth(1) == Some("16")));
}

#[test]
fn convergence_writes_a_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["convergence", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
    assert!(text.starts_with("scheme,user,iteration,objective,sum_rate"));
    assert!(text.lines().count() > 1);
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &SMALL.replace("n_rf = 4", "n_rf = 4\nn_rff = 4"));
    let out = run(&[
        "sumrate-snr",
        "--config",
        &config,
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("n_rff"));
}

#[test]
fn invalid_override_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let out = run(&[
        "sumrate-snr",
        "--config",
        &config,
        "--out",
        dir.path().to_str().unwrap(),
        "--trials",
        "0",
    ]);
    assert!(!out.status.success());
}
