use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};
use std::time::Duration;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_attentive"));
    c.env_remove("OPENAI_API_KEY");
    c
}

fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(rel)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn repl(args: &[&str], input: &str) -> Output {
    let mut child = bin()
        .arg("repl")
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

/// Rows of `variant,condition_or_step,verdict,count,percent` without the percent.
fn counts(csv: &str) -> Vec<(String, String, String, u32)> {
    csv.lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].into(), f[1].into(), f[2].into(), f[3].parse().unwrap())
        })
        .collect()
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();

    let o = run(&["eval-isolated", "--backend", "oracle", "--repeats", "0", "--out", out]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));

    let o = run(&["eval-isolated", "--variant", "sloppy", "--out", out]);
    assert_eq!(o.status.code(), Some(2));

    let o = run(&["eval-isolated", "--backend", "remote", "--api-key-env", "ATTENTIVE_TEST_NO_KEY", "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("ATTENTIVE_TEST_NO_KEY"), "{}", stderr(&o));

    let o = run(&["eval-isolated", "--backend", "scripted", "--out", out]);
    assert_eq!(o.status.code(), Some(2));

    let o = run(&["eval-situated", "--script", "/nonexistent/script.json", "--out", out]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));

    // Nothing was written by any of the refused runs.
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn oracle_isolated_run_and_clobber_rule() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let args = ["eval-isolated", "--backend", "oracle", "--variant", "full", "--repeats", "2", "--out", out];

    let o = run(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = stdout(&o);
    assert_eq!(csv, std::fs::read_to_string(dir.path().join("report.csv")).unwrap());
    let rows = counts(&csv);
    assert_eq!(rows.len(), 16);
    for (_, _, verdict, n) in &rows {
        assert_eq!(*n, if verdict == "successful_support" { 150 } else { 0 });
    }
    let traces = walk(&dir.path().join("transcripts"));
    assert_eq!(traces.len(), 600);

    let o = run(&args);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--force"));

    // A forced rerun with fewer repeats leaves no stale transcripts behind.
    let mut forced: Vec<&str> = args.to_vec();
    forced[6] = "1";
    forced.push("--force");
    let o = run(&forced);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(walk(&dir.path().join("transcripts")).len(), 300);
}

#[test]
fn json_report_format() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&["eval-situated", "--backend", "oracle", "--repeats", "1", "--format", "json", "--out", out]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert!(report.is_object() || report.is_array());
    assert!(!dir.path().join("report.csv").exists());
}

fn walk(dir: &Path) -> Vec<PathBuf> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            files.extend(walk(&path));
        } else {
            files.push(path);
        }
    }
    files
}

#[test]
fn situated_defaults_and_scripted_step_five() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let script = fixture("scripts/situated.json");
    let o = run(&["eval-situated", "--script", script.to_str().unwrap(), "--out", out]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = counts(&stdout(&o));
    let total: u32 = rows.iter().map(|r| r.3).sum();
    assert_eq!(total, 100);
    let step5 = rows.iter().find(|r| r.1 == "step5" && r.2 == "successful_support").unwrap();
    assert_eq!(step5.3, 20);
}

#[test]
fn config_file_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("agent.toml");
    std::fs::write(&config, "variant = \"no_rules\"\nbackend = { kind = \"oracle\" }\nmax_tool_rounds = 4\n").unwrap();
    let out = dir.path().join("a");
    let o = run(&["eval-situated", "--config", config.to_str().unwrap(), "--repeats", "1", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(counts(&stdout(&o)).iter().all(|r| r.0 == "no_rules"));

    // Flags win over the file.
    let out = dir.path().join("b");
    let o = run(&[
        "eval-situated",
        "--config",
        config.to_str().unwrap(),
        "--variant",
        "relaxed",
        "--repeats",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(counts(&stdout(&o)).iter().all(|r| r.0 == "relaxed_rules"));

    std::fs::write(&config, "colour = \"red\"\n").unwrap();
    let o = run(&["eval-situated", "--config", config.to_str().unwrap(), "--out", dir.path().join("c").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn repl_is_deterministic_and_forgiving() {
    let input = "Felix>Daniel: Could you pass me the red glass?\nnot a line\n:scene\n:quit\nFelix>Daniel: ignored\n";
    let a = repl(&["--backend", "oracle"], input);
    let b = repl(&["--backend", "oracle"], input);
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);

    let text = stdout(&a);
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("  check_hindering_reasons("), "{text}");
    let speak = lines.iter().position(|l| l.starts_with("  the_robot to ")).unwrap();
    let hand = lines.iter().position(|l| l.starts_with("  hand_object_over_to_person(")).unwrap();
    assert!(speak < hand);
    assert!(lines[hand + 1..].iter().any(|l| l.starts_with("  + object the_red_glass") && l.contains("held by Felix")));
    let usage = lines.iter().position(|l| l.starts_with("usage:")).unwrap();
    assert_eq!(lines[usage - 1], "  stop");
    assert!(lines[usage + 1..].contains(&"person Felix idle holding the_red_glass"));
    assert!(!text.contains("ignored"));
}

#[test]
fn repl_scene_selection() {
    let o = repl(&["--backend", "oracle", "--scene", "coffee"], ":scene\n");
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("revision 0\n"));

    let path = fixture("scenes/dinner.scene.json");
    let o = repl(&["--backend", "oracle", "--scene", path.to_str().unwrap()], ":scene\n");
    assert!(o.status.success(), "{}", stderr(&o));

    let o = repl(&["--backend", "oracle", "--scene", "moon"], "");
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("moon"));
}

#[test]
fn replay_matches_recorded_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = run(&["eval-isolated", "--backend", "oracle", "--repeats", "1", "--variant", "none", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));

    let trace = out.join("transcripts/no_rules/softdrink-d1-t1-visibility/1.trace");
    let header: serde_json::Value = {
        let text = std::fs::read_to_string(&trace).unwrap();
        let second = text.lines().nth(1).unwrap();
        serde_json::from_str(second).unwrap()
    };
    let expect = dir.path().join("expect.json");
    std::fs::write(&expect, header["expected"].to_string()).unwrap();

    let o = run(&["replay", trace.to_str().unwrap(), "--expect", expect.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.starts_with("interaction 1: "), "{text}");
    assert!(text.contains("  verdict: successful_support"), "{text}");
    assert!(!text.contains("recorded verdict was"));

    // The same expectation as a one-element array.
    std::fs::write(&expect, format!("[{}]", header["expected"])).unwrap();
    let o = run(&["replay", trace.to_str().unwrap(), "--expect", expect.to_str().unwrap()]);
    assert_eq!(stdout(&o), text);

    // Claiming nobody should be helped turns the same trace into undesired behaviour.
    std::fs::write(&expect, r#"{"should_help": false, "beneficiary": "Felix"}"#).unwrap();
    let o = run(&["replay", trace.to_str().unwrap(), "--expect", expect.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("  verdict: undesired_behavior"));
    assert!(stdout(&o).contains("  recorded verdict was successful_support"));

    let o = run(&["replay", trace.to_str().unwrap(), "--expect", "/nonexistent/expect.json"]);
    assert_eq!(o.status.code(), Some(2));
    std::fs::write(&expect, "[]").unwrap();
    let o = run(&["replay", trace.to_str().unwrap(), "--expect", expect.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

struct Server(Child);

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

#[test]
fn serve_accepts_sessions_over_http() {
    let mut child = bin()
        .args(["serve", "--port", "0"])
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut first = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut first).unwrap();
    let _guard = Server(child);
    let addr = first.trim().strip_prefix("listening on http://").unwrap().to_string();

    let body = r#"{"fixture":"softdrink"}"#;
    let reply = http(&addr, &format!(
        "POST /sessions HTTP/1.1\r\nHost: {addr}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    ));
    assert!(reply.starts_with("HTTP/1.1 201"), "{reply}");
    assert!(reply.contains(r#""id":"s1""#));

    let reply = http(&addr, &format!("GET /sessions/s1/events HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n\r\n"));
    assert!(reply.starts_with("HTTP/1.1 200"));
    assert!(reply.contains(r#""type":"scene_snapshot""#));
}

fn http(addr: &str, request: &str) -> String {
    use std::io::Read;
    let mut stream = std::net::TcpStream::connect(addr).unwrap();
    stream.set_read_timeout(Some(Duration::from_secs(10))).unwrap();
    stream.write_all(request.as_bytes()).unwrap();
    let mut reply = String::new();
    stream.read_to_string(&mut reply).unwrap();
    reply
}

#[test]
fn serve_reports_bind_failure() {
    let taken = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let port = taken.local_addr().unwrap().port().to_string();
    let o = run(&["serve", "--port", &port]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("cannot listen"));
}

#[test]
fn full_oracle_isolated_suite() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&["eval-isolated", "--variant", "full", "--backend", "oracle", "--repeats", "5", "--out", out]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = counts(&stdout(&o));
    assert_eq!(rows.iter().map(|r| r.3).sum::<u32>(), 1500);
    assert!(rows.iter().all(|r| r.3 == 0 || r.2 == "successful_support"));
    assert_eq!(walk(&dir.path().join("transcripts")).len(), 1500);

    let o = run(&["eval-situated", "--variant", "sloppy", "--backend", "oracle", "--out", out]);
    assert_eq!(o.status.code(), Some(2));
}
