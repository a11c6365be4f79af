use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::{Command, Output};

fn asset(rel: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../atm/assets")
        .join(rel)
        .to_string_lossy()
        .into_owned()
}

fn comet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_comet"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn temp(name: &str) -> PathBuf {
    std::env::temp_dir().join(format!("comet-cli-{}-{name}", std::process::id()))
}

#[test]
fn validate_shipped_architecture() {
    let o = comet(&["validate", &asset("atm.arch")]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains(" 0 errors"), "{}", stdout(&o));
}

#[test]
fn validate_reports_structural_errors() {
    let path = temp("zero_capacity.arch");
    let broken = std::fs::read_to_string(asset("atm.arch"))
        .unwrap()
        .replace("capacity 32", "capacity 0");
    std::fs::write(&path, broken).unwrap();
    let o = comet(&["validate", path.to_str().unwrap()]);
    std::fs::remove_file(&path).unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(
        stdout(&o).contains("error: log_queue: capacity must be at least 1"),
        "{}",
        stdout(&o)
    );
}

#[test]
fn validate_reports_syntax_errors_with_position() {
    let path = temp("syntax.arch");
    std::fs::write(&path, "connector x {\n  kind message_buffer\n").unwrap();
    let o = comet(&["validate", path.to_str().unwrap()]);
    std::fs::remove_file(&path).unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error: "), "{}", stderr(&o));
}

#[test]
fn callback_demo_prints_correlated_pairs_per_client() {
    let o = comet(&["demo", "--pattern", "callback", "--n", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    // Independent check against the printed trace lines: the request was
    // sent by the client and the reply accepted by the same client.
    let mut sent_by = BTreeMap::new();
    let mut accepted_by = BTreeMap::new();
    for line in text.lines().filter(|l| l.contains('\t')) {
        let f: Vec<&str> = line.split('\t').collect();
        let env = f[3].split(' ').next().unwrap().to_owned();
        let client = f[3].rsplit(' ').next().unwrap().to_owned();
        match (f[1], f[2]) {
            ("callback.send", "send_begin") => {
                sent_by.insert(env, client);
            }
            ("callback.callback", "receive_end") => {
                accepted_by.insert(env, client);
            }
            _ => {}
        }
    }
    let mut per_client: BTreeMap<String, usize> = BTreeMap::new();
    for line in text.lines().filter(|l| l.starts_with("pair ")) {
        // pair clientN: request #a -> reply #b
        let w: Vec<&str> = line.split(' ').collect();
        let client = w[1].trim_end_matches(':');
        assert_eq!(sent_by[w[3]], client, "{line}");
        assert_eq!(accepted_by[w[6]], client, "{line}");
        *per_client.entry(client.to_owned()).or_default() += 1;
    }
    assert_eq!(per_client.len(), 2, "{text}");
    assert!(per_client.values().all(|n| *n == 3), "{per_client:?}");
}

#[test]
fn demos_print_only_connector_events() {
    for pattern in ["buffer", "queue", "reply", "periodic"] {
        let o = comet(&["demo", "--pattern", pattern, "--n", "2"]);
        assert_eq!(o.status.code(), Some(0), "{pattern}: {}", stderr(&o));
        let text = stdout(&o);
        let trace: Vec<&str> = text.lines().filter(|l| l.contains('\t')).collect();
        assert!(!trace.is_empty());
        for line in trace {
            let kind = line.split('\t').nth(2).unwrap();
            assert!(
                [
                    "send_begin",
                    "send_end",
                    "receive_begin",
                    "receive_end",
                    "reply"
                ]
                .contains(&kind),
                "{pattern}: {line}"
            );
        }
    }
}

#[test]
fn run_happy_path_writes_trace_and_log() {
    let trace = temp("withdraw.trace");
    let log = temp("withdraw.log");
    let o = comet(&[
        "run",
        "--arch",
        &asset("atm.arch"),
        "--accounts",
        &asset("accounts.txt"),
        "--scenario",
        &asset("scenarios/withdraw.scn"),
        "--trace",
        trace.to_str().unwrap(),
        "--log",
        log.to_str().unwrap(),
        "--seed",
        "7",
    ]);
    let trace_text = std::fs::read_to_string(&trace).unwrap();
    let log_text = std::fs::read_to_string(&log).unwrap();
    std::fs::remove_file(&trace).unwrap();
    std::fs::remove_file(&log).unwrap();
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("dispensed: 3000"));
    for (i, line) in trace_text.lines().enumerate() {
        let fields: Vec<&str> = line.split('\t').collect();
        assert_eq!(fields.len(), 4, "{line}");
        assert_eq!(fields[0], (i + 1).to_string());
    }
    assert!(
        log_text.starts_with("1  atm  pin_ok  card 42\n"),
        "{log_text}"
    );
}

#[test]
fn run_on_several_atms() {
    let o = comet(&[
        "run",
        "--arch",
        &asset("atm.arch"),
        "--accounts",
        &asset("accounts.txt"),
        "--scenario",
        &asset("scenarios/balance.scn"),
        "--atms",
        "3",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("sessions: 3 of 3 finished on 3 ATM(s)"));
}

#[test]
fn stalled_architecture_times_out_with_exit_1() {
    let o = comet(&[
        "run",
        "--arch",
        &asset("stalled_log.arch"),
        "--accounts",
        &asset("accounts.txt"),
        "--scenario",
        &asset("scenarios/withdraw.scn"),
        "--timeout-ms",
        "1000",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("problem: timed out"), "{}", stdout(&o));
}

#[test]
fn bad_input_files_exit_1() {
    let o = comet(&[
        "run",
        "--arch",
        &asset("atm.arch"),
        "--accounts",
        &asset("scenarios/withdraw.scn"),
        "--scenario",
        &asset("scenarios/withdraw.scn"),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 1"), "{}", stderr(&o));
    let o = comet(&["validate", "/no/such/file.arch"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn usage_errors_exit_2() {
    let o = comet(&["run", "--accounts", "a", "--scenario", "s"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--arch"));
    assert!(stderr(&o).contains("Usage:"));
    assert_eq!(
        comet(&["validate", "x", "--frobnicate"]).status.code(),
        Some(2)
    );
    assert_eq!(comet(&[]).status.code(), Some(2));
    assert_eq!(
        comet(&["demo", "--pattern", "rendezvous"]).status.code(),
        Some(2)
    );
    assert_eq!(
        comet(&["demo", "--pattern", "buffer", "--n", "0"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        comet(&[
            "run",
            "--arch",
            "a",
            "--accounts",
            "b",
            "--scenario",
            "c",
            "--atms",
            "0"
        ])
        .status
        .code(),
        Some(2)
    );
}

#[test]
fn help_exits_0() {
    let o = comet(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("validate"));
}
