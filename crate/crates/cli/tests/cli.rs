use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn formatkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_formatkit"))
        .args(args)
        .env_remove("FORMATKIT_API_KEY")
        .output()
        .expect("spawn formatkit")
}

fn out_dir(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

fn json(path: impl AsRef<Path>) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn checker_flags() -> Vec<String> {
    vec![
        "--agent-env".into(),
        fixture("agent_env.txt"),
        "--xdl-config".into(),
        fixture("xdl.conf"),
    ]
}

fn run_with_checkers(base: &[&str]) -> Output {
    let flags = checker_flags();
    let mut args: Vec<&str> = base.to_vec();
    args.extend(flags.iter().map(String::as_str));
    formatkit(&args)
}

#[test]
fn check_writes_summary_and_verdicts() {
    let tmp = tempfile::tempdir().unwrap();
    let out = out_dir(tmp.path(), "check");
    let o = run_with_checkers(&["check", "--dataset", &fixture("golden.jsonl"), "--responses", &fixture("responses.jsonl"), "--out", &out]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("overall FFR"));
    let summary = json(Path::new(&out).join("summary.json"));
    assert_eq!(summary["format_version"], 1);
    assert_eq!(summary["tasks"].as_object().unwrap().len(), 10);
    let verdicts = fs::read_to_string(Path::new(&out).join("verdicts.jsonl")).unwrap();
    assert_eq!(verdicts.lines().count(), 13);
}

#[test]
fn unmatched_response_id_is_an_input_error() {
    let tmp = tempfile::tempdir().unwrap();
    let responses = tmp.path().join("r.jsonl");
    let mut text = fs::read_to_string(fixture("responses.jsonl")).unwrap();
    text.push_str("{\"id\":\"ghost-9\",\"response\":\"x\"}\n");
    fs::write(&responses, text).unwrap();
    let o = formatkit(&["check", "--dataset", &fixture("golden.jsonl"), "--responses", responses.to_str().unwrap(), "--out", &out_dir(tmp.path(), "o")]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("ghost-9"), "{}", stderr(&o));
}

#[test]
fn bad_arguments_exit_with_usage_code() {
    assert_eq!(formatkit(&["check", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(formatkit(&["reff-demo", "--out", "x", "--query-source", "dev"]).status.code(), Some(2));
}

#[test]
fn endpoint_without_key_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    let o = formatkit(&["eval", "--dataset", &fixture("golden.jsonl"), "--out", &out_dir(tmp.path(), "o"), "--endpoint", "http://127.0.0.1:9/v1", "--model", "m"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("FORMATKIT_API_KEY"), "{}", stderr(&o));
}

#[test]
fn backend_failure_still_writes_a_partial_report() {
    let tmp = tempfile::tempdir().unwrap();
    let scripts = tmp.path().join("s.jsonl");
    let partial: String = fs::read_to_string(fixture("refine_scripts.jsonl")).unwrap().lines().take(3).map(|l| format!("{l}\n")).collect();
    fs::write(&scripts, partial).unwrap();
    let out = out_dir(tmp.path(), "o");
    let mock = format!("script:{}", scripts.display());
    let o = run_with_checkers(&["refine", "--dataset", &fixture("golden.jsonl"), "--out", &out, "--mock", &mock]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let summary = json(Path::new(&out).join("summary.json"));
    let counted: u64 = summary["tasks"].as_object().unwrap().values().map(|t| t["n"].as_u64().unwrap()).sum();
    assert_eq!(counted, 3);
    let traces = fs::read_to_string(Path::new(&out).join("traces.jsonl")).unwrap();
    assert_eq!(traces.lines().count(), 13);
    assert_eq!(traces.lines().filter(|l| l.contains("\"error\"")).count(), 10);
}

#[test]
fn refine_repairs_scripted_answers() {
    let tmp = tempfile::tempdir().unwrap();
    let out = out_dir(tmp.path(), "o");
    let mock = format!("script:{}", fixture("refine_scripts.jsonl"));
    let o = run_with_checkers(&["refine", "--dataset", &fixture("golden.jsonl"), "--out", &out, "--mock", &mock, "--thoughts"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = json(Path::new(&out).join("summary.json"));
    assert_eq!(summary["overall_ffr"], 1.0);
    for task in summary["tasks"].as_object().unwrap().values() {
        assert_eq!(task["first_attempt_ffr"], 0.0);
    }
    let traces = fs::read_to_string(Path::new(&out).join("traces.jsonl")).unwrap();
    for line in traces.lines() {
        let t: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(t["stop_reason"], "CLEAN");
        assert!(t["attempts"][1]["prompt"].as_str().unwrap().contains("Thoughts:"));
    }
}

#[test]
fn refine_with_one_step_equals_eval() {
    let tmp = tempfile::tempdir().unwrap();
    let mock = format!("script:{}", fixture("refine_scripts.jsonl"));
    let (a, b) = (out_dir(tmp.path(), "eval"), out_dir(tmp.path(), "refine"));
    let data = fixture("golden.jsonl");
    assert!(run_with_checkers(&["eval", "--dataset", &data, "--out", &a, "--mock", &mock]).status.success());
    assert!(run_with_checkers(&["refine", "--dataset", &data, "--out", &b, "--mock", &mock, "--max-steps", "1"]).status.success());
    for file in ["summary.json", "verdicts.jsonl", "traces.jsonl"] {
        assert_eq!(fs::read(Path::new(&a).join(file)).unwrap(), fs::read(Path::new(&b).join(file)).unwrap(), "{file}");
    }
}

#[test]
fn reff_demo_with_no_epochs_reports_the_baseline() {
    let tmp = tempfile::tempdir().unwrap();
    let out = out_dir(tmp.path(), "r");
    let o = formatkit(&["reff-demo", "--epochs", "0", "--out", &out]);
    assert!(o.status.success(), "{}", stderr(&o));
    let doc = json(Path::new(&out).join("reff_summary.json"));
    assert_eq!(doc["summary"]["final_ffr"], doc["summary"]["baseline_ffr"]);
    assert_eq!(doc["summary"]["batches"], 0);
    assert_eq!(fs::read_to_string(Path::new(&out).join("train_log.jsonl")).unwrap(), "");
}

#[test]
fn sample_cap_is_seeded() {
    let tmp = tempfile::tempdir().unwrap();
    let data = fixture("golden.jsonl");
    let run = |name: &str, seed: &str| {
        let out = out_dir(tmp.path(), name);
        let o = run_with_checkers(&["eval", "--dataset", &data, "--out", &out, "--mock", "echo-refs", "--sample-cap", "5", "--seed", seed]);
        assert!(o.status.success(), "{}", stderr(&o));
        fs::read_to_string(Path::new(&out).join("verdicts.jsonl")).unwrap()
    };
    let (a, b) = (run("a", "3"), run("b", "3"));
    assert_eq!(a, b);
    assert_eq!(a.lines().count(), 5);
}
