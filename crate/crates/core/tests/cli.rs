//! End-to-end checks of the `hpqc` binary and its exit-code contract.

use std::fs;
use std::process::{Command, Output};

use serde_json::Value;

fn hpqc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hpqc")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn handshake_agrees_and_corruption_mismatches() {
    let ok = hpqc(&["handshake", "--seed", "11"]);
    assert_eq!(code(&ok), 0, "{}", stdout(&ok));
    assert!(stdout(&ok).contains("match"));
    let bad = hpqc(&["handshake", "--seed", "11", "--corrupt"]);
    assert_eq!(code(&bad), 1);
    assert!(stdout(&bad).contains("MISMATCH"));
    assert!(stdout(&bad).contains("mac_failure"));
}

#[test]
fn handshake_files_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        let o = hpqc(&["handshake", "--seed", "4", "--out", d.to_str().unwrap()]);
        assert_eq!(code(&o), 0);
    }
    for f in ["transcript.txt", "audit.log", "transcript.json"] {
        let x = fs::read(a.join(f)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, fs::read(b.join(f)).unwrap(), "{f}");
    }
    let c = dir.path().join("c");
    hpqc(&["handshake", "--seed", "5", "--out", c.to_str().unwrap()]);
    assert_ne!(fs::read(a.join("transcript.txt")).unwrap(), fs::read(c.join("transcript.txt")).unwrap());
}

#[test]
fn handshake_json() {
    let o = hpqc(&["handshake", "--seed", "2", "--format", "json"]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["match"], Value::Bool(true));
    assert_eq!(v["k_seaf_digest"]["ue"], v["k_seaf_digest"]["hn"]);
    assert_eq!(v["transcript"].as_array().unwrap().len(), 7);
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("hpqc.conf");
    fs::write(&cfg, "seed = 4\nsupi = imsi-208930000000001\n").unwrap();
    let cfg = cfg.to_str().unwrap();
    let from_file = stdout(&hpqc(&["handshake", "--config", cfg]));
    let same = stdout(&hpqc(&["handshake", "--config", cfg, "--seed", "4"]));
    let flag = stdout(&hpqc(&["handshake", "--config", cfg, "--seed", "5"]));
    assert_eq!(from_file, same);
    assert_ne!(from_file, flag);

    fs::write(dir.path().join("bad.conf"), "nonsense\n").unwrap();
    let o = hpqc(&["handshake", "--config", dir.path().join("bad.conf").to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

#[test]
fn vectors_emit_verify_and_tamper() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("v.txt");
    let p = path.to_str().unwrap();
    assert_eq!(code(&hpqc(&["vectors", "emit", "--count", "2", "--seed", "9", "--out", p])), 0);
    assert_eq!(code(&hpqc(&["vectors", "verify", p])), 0);

    let text = fs::read_to_string(&path).unwrap();
    let line = text.lines().find(|l| l.starts_with("auts")).unwrap();
    let last = line.chars().last().unwrap();
    let edited = format!("{}{}", &line[..line.len() - 1], if last == '0' { '1' } else { '0' });
    fs::write(&path, text.replacen(line, &edited, 1)).unwrap();
    let o = hpqc(&["vectors", "verify", p]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("`auts`"));
}

#[test]
fn vectors_verify_golden_files() {
    let data = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/");
    for f in ["hierarchy_golden.txt", "identity_golden.txt", "xwing_draft_vectors.txt", "xwing_crosscheck.txt"] {
        let o = hpqc(&["vectors", "verify", &format!("{data}{f}")]);
        assert_eq!(code(&o), 0, "{f}");
    }
}

#[test]
fn attack_exit_codes() {
    for s in ["s0", "fs", "s4-replay", "break-both"] {
        let o = hpqc(&["attack", s, "--seed", "3"]);
        assert_eq!(code(&o), 0, "{s}: {}", stdout(&o));
    }
    let o = hpqc(&["attack", "s4-replay", "--format", "json"]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v[0]["passed"], Value::Bool(false));
    assert_eq!(v[0]["expected_pass"], Value::Bool(false));
    assert!(v[0]["witness"].is_string());
    assert_eq!(code(&hpqc(&["attack", "s9"])), 2);
}

#[test]
fn bench_and_usage() {
    let o = hpqc(&["bench", "--iterations", "1"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert!(out.contains("2352 = 1120 + (16+1184) + 32 ok"));
    assert!(out.contains("1136 = 1120 + 16 ok"));
    assert!(out.contains("1152 = 1120 + 16 + 16 ok"));
    assert_eq!(code(&hpqc(&["bench", "--iterations", "0"])), 2);
    assert_eq!(code(&hpqc(&["--nope"])), 2);
    assert_eq!(code(&hpqc(&[])), 2);
    assert_eq!(code(&hpqc(&["--help"])), 0);
    assert_eq!(code(&hpqc(&["handshake", "--backend", "other"])), 2);
}
