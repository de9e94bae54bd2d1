//! Every checked-in config parses, serializes to a normalized form, and
//! round-trips to an identical structure; plus CLI exit-code contracts.

use cpsim_cli::config::ExperimentConfig;
use std::path::Path;
use std::process::Command;

fn configs() -> Vec<(String, String)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().map(|e| e == "cfg").unwrap_or(false) {
            out.push((
                path.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read_to_string(&path).unwrap(),
            ));
        }
    }
    assert!(out.len() >= 10, "expected the checked-in config set");
    out.sort();
    out
}

#[test]
fn checked_in_configs_roundtrip() {
    for (name, text) in configs() {
        let cfg = ExperimentConfig::parse(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        let normalized = cfg.serialize();
        let again = ExperimentConfig::parse(&normalized)
            .unwrap_or_else(|e| panic!("{name} (normalized): {e}"));
        assert_eq!(cfg, again, "{name}: round-trip not identity");
        assert_eq!(again.serialize(), normalized, "{name}: serialize not stable");
    }
}

fn run_with_config(sub: &str, text: &str) -> i32 {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("cli_errors");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(format!("cfg_{}.cfg", cpsim_core::rng::mix64(text.len() as u64 ^ text.as_bytes()[40] as u64)));
    std::fs::write(&path, text).unwrap();
    Command::new(env!("CARGO_BIN_EXE_cpsim"))
        .arg(sub)
        .arg("-c")
        .arg(&path)
        .arg("-o")
        .arg(dir.join("out"))
        .status()
        .unwrap()
        .code()
        .unwrap_or(-1)
}

const TINY_SURVIVAL: &str = r#"
[experiment]
name = survival
seed = 1

[sim]
dimension = 1
lambda = 1.0
window_radius = 20
beta = 2.0

[survival]
initial = origin
times = 1,2,3
replicas = REPLICAS

[output]
dir = unused
keep_raw = false
stamp = false
"#;

#[test]
fn zero_replicas_exits_with_insufficient_data() {
    let code = run_with_config("estimate", &TINY_SURVIVAL.replace("REPLICAS", "0"));
    assert_eq!(code, 3);
}

#[test]
fn unknown_key_exits_with_usage_error() {
    let bad = TINY_SURVIVAL
        .replace("REPLICAS", "10")
        .replace("beta = 2.0", "beta = 2.0\nmystery_knob = 1");
    let code = run_with_config("estimate", &bad);
    assert_eq!(code, 2);
}

#[test]
fn wrong_subcommand_for_experiment_is_usage_error() {
    let code = run_with_config("test", &TINY_SURVIVAL.replace("REPLICAS", "10"));
    assert_eq!(code, 2);
}
