//! End-to-end runs of the `uplink1030` binary.

use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uplink1030"))
        .args(args)
        .output()
        .expect("spawn uplink1030")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn generate(dir: &Path, kind: &str, ext: &str, offset: &str) -> String {
    let path = dir.join(format!("{kind}.{ext}"));
    let path = path.to_str().unwrap().to_string();
    let o = run(&["generate", "--type", kind, "--offset", offset, "--out", &path]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    path
}

#[test]
fn generate_then_decode_every_type() {
    let dir = tempfile::tempdir().unwrap();
    for kind in [
        "mode-a",
        "mode-a-all-call-compat",
        "mode-a-all-call",
        "mode-c",
        "mode-c-all-call-compat",
        "mode-c-all-call",
        "mode-s",
    ] {
        for ext in ["cu8", "cs8"] {
            let path = generate(dir.path(), kind, ext, "0.7");
            let o = run(&["decode", "--ifile", &path, "--json"]);
            assert!(o.status.success());
            let events: Vec<serde_json::Value> = stdout(&o)
                .lines()
                .map(|l| serde_json::from_str(l).unwrap())
                .filter(|v: &serde_json::Value| v["record"] == "event")
                .collect();
            assert_eq!(events.len(), 1, "{kind}.{ext}");
            assert_eq!(events[0]["type"], kind);
            assert_eq!(events[0]["start_sample"], 100);
        }
    }
}

#[test]
fn text_summary_counts() {
    let dir = tempfile::tempdir().unwrap();
    let path = generate(dir.path(), "mode-s", "cu8", "0.0");
    let o = run(&["decode", "--ifile", &path, "--recommend"]);
    let text = stdout(&o);
    assert!(text.starts_with("[summary] stream time"), "{text}");
    let line = text.lines().find(|l| l.trim_start().starts_with("Mode S:")).unwrap();
    assert!(line.trim_end().ends_with(" 1"));
    // cu8 has no zero code: silence is 128/128, which reads back as magnitude 1.
    assert!(text.contains("recommended: --fixed-min-pulse 200 --fixed-max-far 1 --fixed-max-near 1"));
}

#[test]
fn recommend_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let path = generate(dir.path(), "mode-a", "cs8", "0.2");
    let o = run(&["recommend", "--ifile", &path]);
    assert!(o.status.success());
    // Amplitude 200 lands on I = Q = -100 in cs8, which reads back as 199.
    assert_eq!(
        stdout(&o).trim(),
        "recommended: --fixed-min-pulse 199 --fixed-max-far 0 --fixed-max-near 0"
    );
}

#[test]
fn other_sample_rates_are_refused() {
    let dir = tempfile::tempdir().unwrap();
    let path = generate(dir.path(), "mode-a", "cu8", "0.0");
    let o = run(&["decode", "--ifile", &path, "--sample-rate", "2400000"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("2400000"));
}

#[test]
fn missing_input_fails() {
    let o = run(&["decode", "--ifile", "/definitely/not/here.cu8"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error: opening"));
}

#[test]
fn reference_set_matches_pinned_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ref");
    let o = run(&["generate", "--reference-set", out.to_str().unwrap()]);
    assert!(o.status.success());
    let manifest = std::fs::read_to_string(out.join("manifest.tsv")).unwrap();
    assert_eq!(manifest, stdout(&o));
    let pinned = include_str!("golden/reference_sha256.tsv");
    for (m, p) in manifest.lines().zip(pinned.lines()) {
        let cols: Vec<&str> = m.split('\t').collect();
        assert_eq!(cols.len(), 7);
        assert_eq!(format!("{}\t{}", cols[0], cols[6]), p);
    }
}

#[test]
fn confusion_noiseless_is_clean() {
    let o = run(&["confusion", "--count", "8", "--amp", "120"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("error rate: 0.0000%"), "{text}");
    assert_eq!(text.matches(": none").count(), 7);
}

#[test]
fn bad_arguments_fail() {
    assert!(!run(&["confusion", "--snr", "loud"]).status.success());
    assert!(!run(&["generate", "--type", "mode-x", "--out", "/tmp/x.cu8"]).status.success());
    assert!(!run(&["decode", "--rel-far", "2.0", "--ifile", "/dev/null"]).status.success());
}
