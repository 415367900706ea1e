//! End-to-end tests of the command-line interface: exit codes, JSON line
//! output, parallel-scan determinism, and the auxiliary subcommands.

mod common;

use std::path::{Path, PathBuf};
use std::process::Command;

use common::*;
use sigforge::model::{load_iccg, save_iccg, ComponentType, Iccg, SYSTEM_ID};
use sigforge::weights::{compute_weights, save_weights};

struct CmdResult {
    code: i32,
    stdout: String,
    stderr: String,
}

fn run(args: &[&str]) -> CmdResult {
    let out = Command::new(env!("CARGO_BIN_EXE_sigforge"))
        .args(args)
        .output()
        .expect("binary spawns");
    CmdResult {
        code: out.status.code().expect("no signal"),
        stdout: String::from_utf8(out.stdout).expect("utf8 stdout"),
        stderr: String::from_utf8(out.stderr).expect("utf8 stderr"),
    }
}

fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf8 path")
}

/// Writes the fixture weight table into `dir` and returns its path.
fn weights_file(dir: &Path) -> PathBuf {
    let path = dir.join("weights.json");
    save_weights(&compute_weights(&benign_fixtures()), &path).expect("weights written");
    path
}

/// Synthesizes the two fixture family signatures into `dir` via the CLI.
fn build_db(dir: &Path, weights: &Path) -> PathBuf {
    let db = dir.join("db");
    std::fs::create_dir_all(&db).expect("db dir");
    for (family, a, b) in [
        ("smsbot", "smsbot1.json", "smsbot2.json"),
        ("spy", "spy1.json", "spy2.json"),
    ] {
        let out = db.join(format!("{family}.sig.json"));
        let r = run(&[
            "synth",
            path_str(&fixture_path(a)),
            path_str(&fixture_path(b)),
            "--weights",
            path_str(weights),
            "--family",
            family,
            "--out",
            path_str(&out),
        ]);
        assert_eq!(r.code, 0, "synth {family} failed: {}", r.stderr);
    }
    db
}

#[test]
fn input_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let weights = weights_file(dir.path());

    let missing = run(&[
        "synth",
        "/nonexistent/sample.json",
        "--weights",
        path_str(&weights),
        "--family",
        "x",
        "--out",
        path_str(&dir.path().join("out.json")),
    ]);
    assert_eq!(missing.code, 2);
    assert!(missing.stderr.contains("error:"));

    let garbled = dir.path().join("garbled.json");
    std::fs::write(&garbled, "{ not json").unwrap();
    let parse = run(&[
        "synth",
        path_str(&garbled),
        "--weights",
        path_str(&weights),
        "--family",
        "x",
        "--out",
        path_str(&dir.path().join("out.json")),
    ]);
    assert_eq!(parse.code, 2);

    // Structurally invalid: a control-flow edge into the system vertex.
    let invalid = dir.path().join("invalid.json");
    std::fs::write(
        &invalid,
        r#"{
  "name": "bad",
  "vertices": [
    { "id": "SYSTEM", "type": "system" },
    { "id": "a", "type": "activity" }
  ],
  "cf_edges": [["a", "SYSTEM"]],
  "meta_edges": []
}
"#,
    )
    .unwrap();
    let structural = run(&[
        "synth",
        path_str(&invalid),
        "--weights",
        path_str(&weights),
        "--family",
        "x",
        "--out",
        path_str(&dir.path().join("out.json")),
    ]);
    assert_eq!(structural.code, 2);
    assert!(structural.stderr.contains("SYSTEM"));
}

#[test]
fn disjoint_samples_give_empty_signature_and_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let weights = weights_file(dir.path());

    let g1 = Iccg::new(
        "only-receiver",
        vec![
            (SYSTEM_ID.into(), ComponentType::System),
            ("r".into(), ComponentType::Receiver),
        ],
        vec![(SYSTEM_ID.into(), "r".into())],
        vec![],
    )
    .unwrap();
    let g2 = Iccg::new(
        "only-activity",
        vec![
            (SYSTEM_ID.into(), ComponentType::System),
            ("a".into(), ComponentType::Activity),
        ],
        vec![(SYSTEM_ID.into(), "a".into())],
        vec![],
    )
    .unwrap();
    let p1 = dir.path().join("g1.json");
    let p2 = dir.path().join("g2.json");
    save_iccg(&g1, &p1).unwrap();
    save_iccg(&g2, &p2).unwrap();

    let out = dir.path().join("sig.json");
    let r = run(&[
        "synth",
        path_str(&p1),
        path_str(&p2),
        "--weights",
        path_str(&weights),
        "--family",
        "nothing",
        "--out",
        path_str(&out),
    ]);
    assert_eq!(r.code, 3, "stderr: {}", r.stderr);
    assert!(r.stderr.contains("empty"));
    assert!(out.exists(), "signature file is still written for inspection");
}

#[test]
fn match_exit_codes_and_json_lines() {
    let dir = tempfile::tempdir().unwrap();
    let weights = weights_file(dir.path());
    let db = build_db(dir.path(), &weights);
    let sig = db.join("smsbot.sig.json");

    // The sample itself embeds the signature: exact, exit 0.
    let exact = run(&[
        "match",
        path_str(&fixture_path("smsbot1.json")),
        "--signature",
        path_str(&sig),
        "--weights",
        path_str(&weights),
    ]);
    assert_eq!(exact.code, 0);
    let line: serde_json::Value = serde_json::from_str(exact.stdout.trim()).expect("JSON line");
    assert_eq!(line["family"], "smsbot");
    assert_eq!(line["kind"], "exact");
    assert_eq!(line["delta"], 1.0);

    // A benign app with unrelated structure: no match, exit 1.
    let clean = run(&[
        "match",
        path_str(&fixture_path("benign/b3.json")),
        "--signature",
        path_str(&sig),
        "--weights",
        path_str(&weights),
    ]);
    assert_eq!(clean.code, 1);
    let line: serde_json::Value = serde_json::from_str(clean.stdout.trim()).expect("JSON line");
    assert_eq!(line["kind"], "no_match");

    // b0 shares the receiver-service-taint skeleton (delta 14/34); lowering
    // the zero-day cutoff below it flips the verdict.
    let flagged = run(&[
        "match",
        path_str(&fixture_path("benign/b0.json")),
        "--signature",
        path_str(&sig),
        "--weights",
        path_str(&weights),
        "--zero-day-cutoff",
        "0.4",
    ]);
    assert_eq!(flagged.code, 0);
    let line: serde_json::Value = serde_json::from_str(flagged.stdout.trim()).expect("JSON line");
    assert_eq!(line["kind"], "zero_day_candidate");

    let default_cutoff = run(&[
        "match",
        path_str(&fixture_path("benign/b0.json")),
        "--signature",
        path_str(&sig),
        "--weights",
        path_str(&weights),
    ]);
    assert_eq!(default_cutoff.code, 1, "default cutoff 0.5 keeps b0 clean");
}

#[test]
fn scan_is_thread_count_independent() {
    let dir = tempfile::tempdir().unwrap();
    let weights = weights_file(dir.path());
    let db = build_db(dir.path(), &weights);

    let scan = |jobs: &str| {
        run(&[
            "scan",
            path_str(&fixture_path("smsbot1.json")),
            "--db",
            path_str(&db),
            "--weights",
            path_str(&weights),
            "--jobs",
            jobs,
        ])
    };
    let one = scan("1");
    let three = scan("3");
    assert_eq!(one.code, 0);
    assert_eq!(one.stdout, three.stdout, "scan output depends on thread count");

    let lines: Vec<serde_json::Value> = one
        .stdout
        .lines()
        .map(|l| serde_json::from_str(l).expect("JSON line"))
        .collect();
    assert_eq!(lines.len(), 2, "one verdict per family");
    assert_eq!(lines[0]["family"], "smsbot", "family order");
    assert_eq!(lines[0]["kind"], "exact");
    assert_eq!(lines[1]["family"], "spy");
    assert!(one.stderr.contains("best match: smsbot"));

    let clean = run(&[
        "scan",
        path_str(&fixture_path("benign/b3.json")),
        "--db",
        path_str(&db),
        "--weights",
        path_str(&weights),
    ]);
    assert_eq!(clean.code, 1);
    assert!(clean.stderr.contains("no family matched"));
}

#[test]
fn detections_write_partial_graphs() {
    let dir = tempfile::tempdir().unwrap();
    let weights = weights_file(dir.path());
    let db = build_db(dir.path(), &weights);

    let partial = dir.path().join("partial.json");
    let r = run(&[
        "match",
        path_str(&fixture_path("smsbot1.json")),
        "--signature",
        path_str(&db.join("smsbot.sig.json")),
        "--weights",
        path_str(&weights),
        "--partial-out",
        path_str(&partial),
    ]);
    assert_eq!(r.code, 0);
    let line: serde_json::Value = serde_json::from_str(r.stdout.trim()).unwrap();
    assert_eq!(line["partial_path"], path_str(&partial));
    let graph = load_iccg(&partial).expect("partial graph loads");
    assert!(!graph.is_trivial());

    let partials = dir.path().join("partials");
    let r = run(&[
        "scan",
        path_str(&fixture_path("smsbot1.json")),
        "--db",
        path_str(&db),
        "--weights",
        path_str(&weights),
        "--partials-dir",
        path_str(&partials),
    ]);
    assert_eq!(r.code, 0);
    assert!(partials.join("smsbot.partial.json").exists());
    // The spy verdict is not a detection, so no partial is written for it.
    assert!(!partials.join("spy.partial.json").exists());
}

#[test]
fn obfuscate_cli_is_seed_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let recipe = dir.path().join("recipe.json");
    std::fs::write(
        &recipe,
        r#"[
  { "op": "rename_components" },
  { "op": "insert_dummy_on_edge", "count": 2 },
  { "op": "remove_metadata", "fraction": 0.5, "tier": "taint" },
  { "op": "add_noise_edges", "count": 1 }
]
"#,
    )
    .unwrap();

    let out = |n: &str| dir.path().join(n);
    let args = |o: &Path, seed: &str| -> Vec<String> {
        [
            "obfuscate",
            path_str(&fixture_path("smsbot1.json")),
            "--recipe",
            path_str(&recipe),
            "--seed",
            seed,
            "--out",
            path_str(o),
        ]
        .iter()
        .map(|s| s.to_string())
        .collect()
    };
    for (name, seed) in [("a.json", "7"), ("b.json", "7"), ("c.json", "8")] {
        let argv = args(&out(name), seed);
        let argv: Vec<&str> = argv.iter().map(String::as_str).collect();
        assert_eq!(run(&argv).code, 0);
    }
    let a = std::fs::read(out("a.json")).unwrap();
    let b = std::fs::read(out("b.json")).unwrap();
    let c = std::fs::read(out("c.json")).unwrap();
    assert_eq!(a, b, "same seed must reproduce the same graph");
    assert_ne!(a, c, "different seeds should diverge");
    let mutated = load_iccg(&out("a.json")).expect("obfuscated graph is valid");
    assert!(mutated.vertex_count() > 0);
}

#[test]
fn oracle_cli_agrees_with_synthesis() {
    use sigforge::synth::{infer_signature, quantized_objective};

    let dir = tempfile::tempdir().unwrap();
    let weights = weights_file(dir.path());

    let r = run(&[
        "oracle",
        path_str(&fixture_path("spy1.json")),
        path_str(&fixture_path("spy2.json")),
        "--weights",
        path_str(&weights),
    ]);
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    let report: serde_json::Value = serde_json::from_str(r.stdout.trim()).unwrap();
    let objective: Vec<u64> = report["objective"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_u64().unwrap())
        .collect();

    let samples = vec![load_fixture("spy1.json"), load_fixture("spy2.json")];
    let table = compute_weights(&benign_fixtures());
    let sig = infer_signature(&samples, &table, "spy").unwrap();
    let expected = quantized_objective(&sig.graph, &table).unwrap();
    assert_eq!(objective, expected.to_vec());

    // Samples beyond the exhaustive limit are rejected as input errors.
    let too_big = run(&[
        "oracle",
        path_str(&fixture_path("smsbot1.json")),
        path_str(&fixture_path("smsbot2.json")),
        "--weights",
        path_str(&weights),
    ]);
    assert_eq!(too_big.code, 2);
}

#[test]
fn tune_cli_reports_roc_and_fallback() {
    let dir = tempfile::tempdir().unwrap();
    let families = dir.path().join("families");
    for (family, a, b) in [
        ("smsbot", "smsbot1.json", "smsbot2.json"),
        ("spy", "spy1.json", "spy2.json"),
    ] {
        let fam_dir = families.join(family);
        std::fs::create_dir_all(&fam_dir).unwrap();
        for name in [a, b] {
            std::fs::copy(fixture_path(name), fam_dir.join(name)).unwrap();
        }
    }

    let tune = |target: &str| {
        run(&[
            "tune",
            "--families-dir",
            path_str(&families),
            "--benign-dir",
            path_str(&fixture_path("benign")),
            "--candidates",
            "0.3,0.5,0.7",
            "--target-tpr",
            target,
        ])
    };

    // The two families share nothing, so cross-family TPR is 0 and the tuner
    // falls back to the smallest candidate.
    let strict = tune("0.9");
    assert_eq!(strict.code, 0, "stderr: {}", strict.stderr);
    let lines: Vec<serde_json::Value> = strict
        .stdout
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 4, "3 ROC points + 1 chosen line");
    for p in &lines[..3] {
        assert_eq!(p["tpr"], 0.0);
    }
    // b0 exceeds the lowest cutoff against the smsbot signature.
    assert!(lines[0]["fpr"].as_f64().unwrap() > 0.0);
    assert_eq!(lines[3]["chosen"], 0.3);

    // A vacuous target picks the largest candidate instead.
    let lax = tune("0");
    let last: serde_json::Value =
        serde_json::from_str(lax.stdout.lines().last().unwrap()).unwrap();
    assert_eq!(last["chosen"], 0.7);
}
