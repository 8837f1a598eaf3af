use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const NOW: &str = "1563381000000";

struct Env {
    tmp: TempDir,
}

impl Env {
    fn new() -> Env {
        Env { tmp: tempfile::tempdir().unwrap() }
    }

    fn path(&self, name: &str) -> std::path::PathBuf {
        self.tmp.path().join(name)
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_epilog"))
            .args(args)
            .current_dir(self.tmp.path())
            .env("EPILOG_DATA_DIR", self.path("data"))
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) -> Value {
        let out = self.run(args);
        assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        serde_json::from_slice(&out.stdout).unwrap()
    }

    fn write(&self, name: &str, text: &str) -> String {
        fs::write(self.path(name), text).unwrap();
        self.path(name).to_string_lossy().into_owned()
    }
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn query_before_ingest_is_empty() {
    let env = Env::new();
    let v = env.ok(&["query", "WHERE-IS apple", "--now", NOW]);
    assert_eq!(v["payload"]["kind"], "location");
    assert_eq!(v["payload"]["found"], Value::Null);
    assert_eq!(v["supporting_ids"], serde_json::json!([]));
}

#[test]
fn syntax_error_is_a_domain_error() {
    let env = Env::new();
    let out = env.run(&["query", "WHEN KIND="]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("SyntaxError"), "{}", stderr(&out));
}

#[test]
fn usage_errors_exit_two_with_grammar() {
    let env = Env::new();
    for args in [&["frobnicate"][..], &["consolidate", "--now", "soon"], &[]] {
        let out = env.run(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(stderr(&out).contains("WHERE-IS entity"), "{args:?}");
    }
    assert_eq!(env.run(&["--help"]).status.code(), Some(0));
}

#[test]
fn evaluate_seed_zero_passes() {
    let env = Env::new();
    let scenario = env.write("scenario-seed0.json", r#"{"seed": 0}"#);
    env.ok(&["evaluate", &scenario, "out"]);
    let score: Value = serde_json::from_str(&fs::read_to_string(env.path("out/score.json")).unwrap()).unwrap();
    assert_eq!(score["pass"], true);
    assert_eq!(score["session"]["total"], 4);
    assert_eq!(score["extended"]["correct"], 12);
}

fn simulate(env: &Env) -> String {
    let scenario = env.write("scenario.json", r#"{"seed": 3, "people": 2}"#);
    let v = env.ok(&["simulate", &scenario, "sim"]);
    assert_eq!(v["queries"], 12);
    env.path("sim/events.jsonl").to_string_lossy().into_owned()
}

#[test]
fn simulated_log_round_trip() {
    let env = Env::new();
    let events = simulate(&env);
    let v = env.ok(&["ingest", &events]);
    assert_eq!(v["open"], 0);
    let stats = env.ok(&["consolidate", "--now", NOW]);
    assert!(stats["moved"].as_u64().unwrap() >= 5);
    assert_eq!(env.ok(&["validate"]), serde_json::json!([]));

    let a = env.ok(&["query", "FIND EPISODES WHERE KIND=context", "--now", NOW]);
    let ids = a["payload"]["ids"].as_array().unwrap();
    assert!(ids.len() >= 5);
    let first = ids[0].to_string();

    let files = env.ok(&["report", &first, "report", "--now", NOW]);
    assert!(!files.as_array().unwrap().is_empty());
    let bundle: Value = serde_json::from_str(&fs::read_to_string(env.path("report/bundle.json")).unwrap()).unwrap();
    assert_eq!(bundle["supporting_ids"][0].to_string(), first);
    assert!(bundle["datetime"].as_str().unwrap().contains("2019"));

    env.ok(&["query", &format!("DESCRIBE {first}"), "--evidence", "ev", "--now", NOW]);
    assert!(env.path("ev/bundle.json").exists());

    let pruned = env.ok(&["forget", "--now", "1563900000000"]);
    assert!(!pruned["pruned"].as_array().unwrap().is_empty());
    assert_eq!(env.ok(&["validate"]), serde_json::json!([]));
}

#[test]
fn fixed_clock_runs_are_reproducible() {
    let mut snapshots = Vec::new();
    for _ in 0..2 {
        let env = Env::new();
        let events = simulate(&env);
        let config = env.write("engine.json", &format!(r#"{{"clock": {{"fixed": {NOW}}}}}"#));
        env.ok(&["--config", &config, "ingest", &events]);
        env.ok(&["--config", &config, "consolidate"]);
        let answer = env.ok(&["--config", &config, "query", "FEELING"]);
        let store = fs::read(env.path("data/store.json")).unwrap();
        snapshots.push((store, answer, fs::read(env.path("data/events.jsonl")).unwrap()));
    }
    assert!(snapshots[0] == snapshots[1]);
}

#[test]
fn split_ingestion_keeps_open_episodes() {
    let env = Env::new();
    let events = fs::read_to_string(simulate(&env)).unwrap();
    let lines: Vec<&str> = events.lines().collect();
    let (a, b) = lines.split_at(lines.len() / 2);
    let first = env.write("a.jsonl", &a.join("\n"));
    let second = env.write("b.jsonl", &b.join("\n"));
    let v = env.ok(&["ingest", &first]);
    assert!(v["open"].as_u64().unwrap() > 0);
    env.ok(&["consolidate", "--now", NOW]);
    env.ok(&["ingest", &second]);
    env.ok(&["consolidate", "--now", NOW]);
    assert_eq!(env.ok(&["validate"]), serde_json::json!([]));

    let whole = Env::new();
    whole.ok(&["ingest", &simulate(&whole)]);
    whole.ok(&["consolidate", "--now", NOW]);
    let read = |e: &Env| fs::read_to_string(e.path("data/store.json")).unwrap();
    assert_eq!(read(&env), read(&whole));
}

#[test]
fn bad_event_leaves_data_untouched() {
    let env = Env::new();
    let ok = env.write("ok.jsonl", r#"{"t": 1, "type": "begin", "kind": "context", "label": "Setup"}"#);
    env.ok(&["ingest", &ok]);
    let before = fs::read(env.path("data/working_memory.json")).unwrap();
    let bad = env.write(
        "bad.jsonl",
        "{\"t\": 2, \"type\": \"say\", \"speaker\": \"anna\", \"text\": \"hi\"}\n{\"t\": 1, \"type\": \"end\"}\n",
    );
    let out = env.run(&["ingest", &bad]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("OutOfOrderTimestamp"), "{}", stderr(&out));
    assert_eq!(fs::read(env.path("data/working_memory.json")).unwrap(), before);
}

#[test]
fn held_lock_refuses_commands() {
    let env = Env::new();
    fs::create_dir_all(env.path("data")).unwrap();
    fs::write(env.path("data/lock"), "1").unwrap();
    let out = env.run(&["validate"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("DataDirLocked"));
    fs::remove_file(env.path("data/lock")).unwrap();
    env.ok(&["validate"]);
    assert!(!Path::new(&env.path("data/lock")).exists());
}

#[test]
fn invalid_scenario_config() {
    let env = Env::new();
    let scenario = env.write("s.json", r#"{"people": 0}"#);
    let out = env.run(&["simulate", &scenario, "out"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("InvalidConfig"));
    let scenario = env.write("t.json", r#"{"peeple": 2}"#);
    assert_eq!(env.run(&["evaluate", &scenario, "out"]).status.code(), Some(1));
}
