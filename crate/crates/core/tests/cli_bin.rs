//! Exercises the compiled `fedsim` binary: subcommands, overrides, artifact
//! files, and the exit-code contract (0 ok, 2 config, 3 I/O).

use std::path::Path;
use std::process::Command;

fn fedsim() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fedsim"))
}

const DESK_TOML: &str = r#"
n_clients = 6
rounds = 3
local_epochs = 1
batch_size = 16
malicious_fraction = 0.5
validation_size = 40

[dataset]
kind = "synthetic"
n_classes = 4
train_per_class = 30
test_per_class = 25
n_features = 6
"#;

#[test]
fn run_writes_artifacts_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.toml");
    std::fs::write(&config, DESK_TOML).unwrap();
    let out = dir.path().join("out");

    let output = fedsim()
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(output.status.success(), "{output:?}");
    for artifact in [
        "metrics.csv",
        "ledger.csv",
        "summary.json",
        "manifest.json",
        "config_resolved.toml",
    ] {
        assert!(out.join(artifact).is_file(), "missing {artifact}");
    }
    let metrics = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 1 + 3);
}

#[test]
fn rounds_and_seed_overrides_change_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.toml");
    std::fs::write(&config, DESK_TOML).unwrap();

    let out = dir.path().join("short");
    let status = fedsim()
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .args(["--rounds", "1", "--seed", "7"])
        .status()
        .unwrap();
    assert!(status.success());
    let metrics = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 1 + 1);
    let resolved = std::fs::read_to_string(out.join("config_resolved.toml")).unwrap();
    assert!(resolved.contains("seed = 7"), "{resolved}");
}

#[test]
fn config_error_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.toml");
    std::fs::write(&config, "malicious_fraction = 2.0").unwrap();
    let output = fedsim()
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("malicious_fraction"), "{stderr}");
}

#[test]
fn missing_config_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let output = fedsim()
        .args(["run", "--config"])
        .arg(dir.path().join("nope.toml"))
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3));
}

#[test]
fn compare_emits_the_grid() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.toml");
    std::fs::write(&config, DESK_TOML).unwrap();
    let out = dir.path().join("cmp");
    let output = fedsim()
        .args(["compare", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .args([
            "--strategies",
            "fedavg,mechanism",
            "--fractions",
            "0.0,0.5",
            "--rounds",
            "2",
        ])
        .output()
        .unwrap();
    assert!(output.status.success(), "{output:?}");
    let csv = std::fs::read_to_string(out.join("comparison.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4);
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("degradation"), "{stdout}");
}

#[test]
fn idx_paths_resolve_against_env_dir() {
    // Build a tiny 2-class IDX dataset on disk and point FEDSIM_DATA_DIR at it.
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    std::fs::create_dir_all(&data).unwrap();
    write_tiny_idx(&data);

    let config = dir.path().join("config.toml");
    std::fs::write(
        &config,
        r#"
n_clients = 3
rounds = 1
local_epochs = 1
batch_size = 8
validation_size = 10
flip_offset = 1
hidden_layers = [4]

[dataset]
kind = "idx"
train_images = "train-images"
train_labels = "train-labels"
test_images = "test-images"
test_labels = "test-labels"
n_classes = 2
"#,
    )
    .unwrap();

    let out = dir.path().join("out");
    let output = fedsim()
        .env("FEDSIM_DATA_DIR", &data)
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    assert!(out.join("metrics.csv").is_file());
}

/// 60 train / 40 test samples of 4x4 "images": class 0 dark, class 1 bright.
fn write_tiny_idx(dir: &Path) {
    let make_images = |n: u32, offset: u8| {
        let mut bytes = vec![0u8, 0, 8, 3];
        bytes.extend_from_slice(&n.to_be_bytes());
        bytes.extend_from_slice(&4u32.to_be_bytes());
        bytes.extend_from_slice(&4u32.to_be_bytes());
        for i in 0..n {
            let bright = i % 2 == 1;
            for px in 0..16u8 {
                bytes.push(if bright { 200 + (px % 40) } else { offset + px });
            }
        }
        bytes
    };
    let make_labels = |n: u32| {
        let mut bytes = vec![0u8, 0, 8, 1];
        bytes.extend_from_slice(&n.to_be_bytes());
        bytes.extend((0..n).map(|i| (i % 2) as u8));
        bytes
    };
    std::fs::write(dir.join("train-images"), make_images(60, 0)).unwrap();
    std::fs::write(dir.join("train-labels"), make_labels(60)).unwrap();
    std::fs::write(dir.join("test-images"), make_images(40, 10)).unwrap();
    std::fs::write(dir.join("test-labels"), make_labels(40)).unwrap();
}
