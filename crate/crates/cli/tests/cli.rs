use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};

use assert_cmd::Command;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn fixture(rel: &str) -> PathBuf {
    fixtures().join(rel)
}

fn bin() -> Command {
    let mut cmd = Command::cargo_bin("oas-enrich").unwrap();
    cmd.env_remove("RESTGPT_API_KEY");
    cmd
}

fn read(p: &Path) -> String {
    fs::read_to_string(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

/// Copy a fixture into `dir` so default output paths land there.
fn copy(rel: &str, dir: &Path) -> PathBuf {
    let to = dir.join(Path::new(rel).file_name().unwrap());
    fs::copy(fixture(rel), &to).unwrap();
    to
}

fn record_scripted(spec: &Path, cache: &Path, out: &Path) -> assert_cmd::assert::Assert {
    bin()
        .arg("record")
        .arg(spec)
        .args(["--backend", "scripted", "--script"])
        .arg(fixture("fdic.script.json"))
        .arg("--cache")
        .arg(cache)
        .arg("-o")
        .arg(out)
        .assert()
}

#[test]
fn recording_reproduces_the_shipped_cache() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("c.jsonl");
    record_scripted(&fixture("fdic.yaml"), &cache, &dir.path().join("out.yaml")).success();
    assert_eq!(read(&cache), read(&fixture("fdic.cache.jsonl")));

    // A second recording hits the cache and leaves it unchanged.
    record_scripted(&fixture("fdic.yaml"), &cache, &dir.path().join("out2.yaml")).success();
    assert_eq!(read(&cache), read(&fixture("fdic.cache.jsonl")));
    assert_eq!(
        read(&dir.path().join("out.yaml")),
        read(&dir.path().join("out2.yaml"))
    );
}

#[test]
fn replay_matches_the_golden_output_and_recording() {
    let dir = tempfile::tempdir().unwrap();
    let spec = copy("fdic.yaml", dir.path());
    let recorded = dir.path().join("recorded.yaml");
    record_scripted(&spec, &dir.path().join("c.jsonl"), &recorded).success();
    bin()
        .arg("enhance")
        .arg(&spec)
        .arg("--cache")
        .arg(fixture("fdic.cache.jsonl"))
        .assert()
        .success();
    let replayed = dir.path().join("fdic.enhanced.yaml");
    assert_eq!(read(&replayed), read(&fixture("golden/fdic.enhanced.yaml")));
    assert_eq!(read(&replayed), read(&recorded));
    assert!(dir.path().join("fdic.extraction.jsonl").exists());
    assert!(dir.path().join("fdic.conflicts.json").exists());
}

#[test]
fn replay_without_a_cache_entry_fails() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.jsonl");
    fs::write(&empty, "").unwrap();
    let out = dir.path().join("o.yaml");
    let assert = bin()
        .arg("enhance")
        .arg(fixture("fdic.yaml"))
        .arg("--cache")
        .arg(&empty)
        .arg("-o")
        .arg(&out)
        .assert();
    let stderr = String::from_utf8(assert.code(1).get_output().stderr.clone()).unwrap();
    assert!(stderr.contains("no entry"), "{stderr}");
    assert!(!out.exists());
}

#[test]
fn corrupted_cache_line_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = read(&fixture("fdic.cache.jsonl"));
    text = text.replacen("\"digest\":\"", "\"digest\":\"0", 1);
    let lines: Vec<&str> = text.lines().collect();
    let corrupted = format!("{}\n{}\n{{not json\n", lines[0], lines[1]);
    let cache = dir.path().join("bad.jsonl");
    fs::write(&cache, corrupted).unwrap();
    let assert = bin()
        .arg("enhance")
        .arg(fixture("fdic.yaml"))
        .arg("--cache")
        .arg(&cache)
        .arg("-o")
        .arg(dir.path().join("o.yaml"))
        .assert();
    let stderr = String::from_utf8(assert.code(1).get_output().stderr.clone()).unwrap();
    assert!(stderr.contains("line 1"), "{stderr}");
}

#[test]
fn missing_input_exits_with_one() {
    bin()
        .args(["enhance", "does/not/exist.yaml", "--backend", "scripted"])
        .assert()
        .code(1);
    bin()
        .args(["validate", "does/not/exist.yaml"])
        .assert()
        .code(1);
}

#[test]
fn nothing_extracted_keeps_the_input_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let spec = copy("corpus/bare.yaml", dir.path());
    bin()
        .arg("enhance")
        .arg(&spec)
        .args(["--backend", "scripted"])
        .assert()
        .success();
    assert_eq!(read(&dir.path().join("bare.enhanced.yaml")), read(&spec));
}

#[test]
fn conflicts_set_the_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let spec = copy("corpus/omdb.json", dir.path());
    let script = fixture("corpus/omdb.script.json");
    let run = |extra: &[&str]| {
        bin()
            .arg("enhance")
            .arg(&spec)
            .args(["--backend", "scripted", "--script"])
            .arg(&script)
            .args(extra)
            .assert()
    };
    run(&[]).code(2);
    run(&["--conflicts-exit-code", "0"]).success();
    let report: serde_json::Value =
        serde_json::from_str(&read(&dir.path().join("omdb.conflicts.json"))).unwrap();
    assert!(!report["conflicts"].as_array().unwrap().is_empty());
    // JSON input stays JSON.
    let out: serde_json::Value =
        serde_json::from_str(&read(&dir.path().join("omdb.enhanced.json"))).unwrap();
    assert!(out.get("openapi").is_some());
}

#[test]
fn format_flag_converts_the_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fdic.json");
    bin()
        .arg("enhance")
        .arg(fixture("fdic.yaml"))
        .arg("--cache")
        .arg(fixture("fdic.cache.jsonl"))
        .args(["--format", "json", "-o"])
        .arg(&out)
        .assert()
        .success();
    let doc: serde_json::Value = serde_json::from_str(&read(&out)).unwrap();
    assert_eq!(doc["swagger"], "2.0");
}

#[test]
fn config_file_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    fs::write(
        &config,
        format!(
            "cache = {:?}\nconcurrency = 1\n",
            fixture("fdic.cache.jsonl")
        ),
    )
    .unwrap();
    let out = dir.path().join("o.yaml");
    bin()
        .arg("--config")
        .arg(&config)
        .arg("enhance")
        .arg(fixture("fdic.yaml"))
        .arg("-o")
        .arg(&out)
        .assert()
        .success();
    assert_eq!(read(&out), read(&fixture("golden/fdic.enhanced.yaml")));

    fs::write(&config, "api_key = \"x\"\n").unwrap();
    bin()
        .arg("--config")
        .arg(&config)
        .arg("enhance")
        .arg(fixture("fdic.yaml"))
        .assert()
        .code(1);
}

#[test]
fn evaluate_scores_a_log() {
    let dir = tempfile::tempdir().unwrap();
    let spec = copy("fdic.yaml", dir.path());
    bin()
        .arg("enhance")
        .arg(&spec)
        .arg("--cache")
        .arg(fixture("fdic.cache.jsonl"))
        .assert()
        .success();
    let log = dir.path().join("fdic.extraction.jsonl");
    let json = dir.path().join("eval.json");
    let assert = bin()
        .arg("evaluate")
        .arg(&log)
        .arg(fixture("fdic.truth.jsonl"))
        .arg("--json")
        .arg(&json)
        .assert();
    let stdout = String::from_utf8(assert.success().get_output().stdout.clone()).unwrap();
    assert!(
        stdout.contains("| FDIC Bank Data | 3 | 3 | 0 | 0 | 100% | 100% | 100% |"),
        "{stdout}"
    );
    let report: serde_json::Value = serde_json::from_str(&read(&json)).unwrap();
    assert!(report.get("rules").is_some());

    let empty = dir.path().join("empty.jsonl");
    fs::write(&empty, "").unwrap();
    bin().arg("evaluate").arg(&log).arg(&empty).assert().code(1);
}

#[test]
fn evaluate_reports_value_accuracy_and_samples() {
    let dir = tempfile::tempdir().unwrap();
    let spec = copy("fdic.yaml", dir.path());
    bin()
        .arg("enhance")
        .arg(&spec)
        .arg("--cache")
        .arg(fixture("fdic.cache.jsonl"))
        .assert()
        .success();
    let log = dir.path().join("fdic.extraction.jsonl");
    let sheet = dir.path().join("sheet.csv");
    bin()
        .arg("evaluate")
        .arg(&log)
        .arg(fixture("fdic.truth.jsonl"))
        .arg("--sample-to")
        .arg(&sheet)
        .args(["--sample-size", "3", "--seed", "7"])
        .assert()
        .success();
    let text = read(&sheet);
    // filters has four values, sort_order two: 3 + 2 rows plus the header.
    assert_eq!(text.lines().count(), 6, "{text}");

    let judged = text.replace(",false,false,", ",true,true,");
    let judgments = dir.path().join("judged.csv");
    fs::write(&judgments, judged).unwrap();
    let assert = bin()
        .arg("evaluate")
        .arg(&log)
        .arg(fixture("fdic.truth.jsonl"))
        .arg("--judgments")
        .arg(&judgments)
        .args(["--reference-average", "90"])
        .assert();
    let stdout = String::from_utf8(assert.success().get_output().stdout.clone()).unwrap();
    assert!(stdout.contains("100.00%"), "{stdout}");
    assert!(stdout.contains("Reference average 90.00%"), "{stdout}");
}

#[test]
fn validate_exit_codes() {
    bin()
        .arg("validate")
        .arg(fixture("golden/fdic.enhanced.yaml"))
        .assert()
        .success();
    for f in [
        "validator/style_on_string.yaml",
        "validator/min_gt_max.yaml",
        "validator/default_not_in_enum.yaml",
    ] {
        bin().arg("validate").arg(fixture(f)).assert().code(2);
    }
}

#[test]
fn live_backend_requires_the_api_key() {
    let dir = tempfile::tempdir().unwrap();
    let assert = bin()
        .arg("record")
        .arg(fixture("fdic.yaml"))
        .arg("--cache")
        .arg(dir.path().join("c.jsonl"))
        .arg("-o")
        .arg(dir.path().join("o.yaml"))
        .assert();
    let stderr = String::from_utf8(assert.code(1).get_output().stderr.clone()).unwrap();
    assert!(stderr.contains("RESTGPT_API_KEY"), "{stderr}");
}

/// Answers every chat completion with "None" and counts requests.
fn mock_endpoint(expected: usize) -> (String, std::thread::JoinHandle<Vec<String>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let handle = std::thread::spawn(move || {
        let mut auths = Vec::new();
        for _ in 0..expected {
            let (mut stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            let mut len = 0;
            loop {
                let mut h = String::new();
                reader.read_line(&mut h).unwrap();
                let h = h.trim_end().to_string();
                if h.is_empty() {
                    break;
                }
                let (k, v) = h.split_once(':').unwrap();
                match k.to_ascii_lowercase().as_str() {
                    "content-length" => len = v.trim().parse().unwrap(),
                    "authorization" => auths.push(v.trim().to_string()),
                    _ => {}
                }
            }
            let mut body = vec![0; len];
            reader.read_exact(&mut body).unwrap();
            let reply = r#"{"choices":[{"message":{"role":"assistant","content":"None"},"finish_reason":"stop"}]}"#;
            let response = format!(
                "HTTP/1.1 200 OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{reply}",
                reply.len()
            );
            stream.write_all(response.as_bytes()).unwrap();
        }
        auths
    });
    (url, handle)
}

#[test]
fn live_record_then_offline_replay() {
    let dir = tempfile::tempdir().unwrap();
    let spec = copy("fdic.yaml", dir.path());
    let cache = dir.path().join("c.jsonl");
    // Two parameters, four completions each.
    let (url, server) = mock_endpoint(8);
    bin()
        .env("RESTGPT_API_KEY", "secret-test-key")
        .arg("record")
        .arg(&spec)
        .args(["--base-url", &url, "--concurrency", "2", "--cache"])
        .arg(&cache)
        .assert()
        .success();
    let auths = server.join().unwrap();
    assert_eq!(auths.len(), 8);
    assert!(auths.iter().all(|a| a == "Bearer secret-test-key"));
    let cached = read(&cache);
    assert_eq!(cached.lines().count(), 8);
    assert!(!cached.contains("secret-test-key"));

    let out = dir.path().join("replayed.yaml");
    bin()
        .arg("enhance")
        .arg(&spec)
        .arg("--cache")
        .arg(&cache)
        .arg("-o")
        .arg(&out)
        .assert()
        .success();
    assert_eq!(read(&out), read(&spec));
}

#[test]
fn evaluate_prints_rounded_percentages() {
    let dir = tempfile::tempdir().unwrap();
    let descriptor = |i: usize| serde_json::json!({"service": "S", "path": "/p", "method": "get", "location": "query", "name": format!("p{i}")});
    let rule = |min: usize| serde_json::json!({"kind": "parameter_constraint", "min": min});
    // 333 truth rules; 306 extracted correctly, 9 extracted wrongly.
    let mut truth = String::new();
    for i in 0..333 {
        let mut entry = descriptor(i);
        entry["rule"] = rule(i);
        truth.push_str(&format!("{entry}\n"));
    }
    let mut log = String::new();
    for i in 0..315 {
        let min = if i < 306 { i } else { 10_000 + i };
        let entry = serde_json::json!({
            "descriptor": descriptor(i),
            "rule_kind": "parameter_constraint",
            "rules": [rule(min)],
            "diagnostics": {"skipped_lines": [], "none_responses": 0, "malformed_responses": 0},
        });
        log.push_str(&format!("{entry}\n"));
    }
    let (log_path, truth_path) = (dir.path().join("log.jsonl"), dir.path().join("truth.jsonl"));
    fs::write(&log_path, log).unwrap();
    fs::write(&truth_path, truth).unwrap();
    let assert = bin()
        .arg("evaluate")
        .arg(&log_path)
        .arg(&truth_path)
        .assert();
    let stdout = String::from_utf8(assert.success().get_output().stdout.clone()).unwrap();
    assert!(
        stdout.contains("| S | 333 | 306 | 9 | 27 | 97% | 92% | 94% |"),
        "{stdout}"
    );
}
