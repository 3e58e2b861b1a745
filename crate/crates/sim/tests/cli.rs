use std::path::Path;
use std::process::{Command, Output};

const TWO_ARMS: &str = r#"{"arms": [{"type": "bernoulli", "p": 0.7}, {"type": "beta", "a": 1.3, "b": 3}]}"#;

fn onebit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_onebit")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn instance_file(dir: &Path, json: &str) -> String {
    let p = dir.join("inst.json");
    std::fs::write(&p, json).unwrap();
    p.to_str().unwrap().to_string()
}

fn run_args<'a>(inst: &'a str, out: &'a str) -> Vec<&'a str> {
    vec![
        "run", "--instance", inst, "--policies", "lf-klucb,mab-klucb", "--n", "200", "--trials", "3",
        "--seed", "7", "--out", out,
    ]
}

#[test]
fn run_writes_csv_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let inst = instance_file(dir.path(), TWO_ARMS);
    let out = dir.path().join("out");
    let mut args = run_args(&inst, out.to_str().unwrap());
    args.push("--bounds");
    let o = onebit(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let csv = std::fs::read_to_string(out.join("regret.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "t,policy,mean_regret,std_regret");
    assert_eq!(lines.len(), 1 + 2 * 200);
    assert!(lines[1].starts_with("1,lf-klucb,"));
    assert!(lines[400].starts_with("200,mab-klucb,"));

    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("regret.json")).unwrap()).unwrap();
    assert_eq!(meta["config"]["n"], 200);
    assert_eq!(meta["config"]["policies"], serde_json::json!(["lf-klucb", "mab-klucb"]));
    assert_eq!(meta["seeds"]["base"], 7);
    assert_eq!(meta["instance_means"][0], 0.7);
    assert_eq!(meta["tool_version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(meta["input_hash"].as_str().unwrap().len(), 64);
    assert_eq!(meta["final_regret"][0]["values"].as_array().unwrap().len(), 3);

    let overlay = std::fs::read_to_string(out.join("regret_bounds.csv")).unwrap();
    let rows: Vec<&str> = overlay.lines().collect();
    assert_eq!(rows[0], "t,policy,mean_regret,std_regret,bound_formula,bound_value");
    // decades 10 and 100, three formulas, two policies
    assert_eq!(rows.len(), 1 + 2 * 2 * 3);
    assert!(rows.iter().any(|r| r.starts_with("100,lf-klucb,") && r.contains(",cor2,")));
}

#[test]
fn run_usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let inst = instance_file(dir.path(), TWO_ARMS);
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();

    let mut args = run_args(&inst, out);
    args.drain(5..7); // --n 200
    assert_eq!(code(&onebit(&args)), 2);

    let mut args = run_args(&inst, out);
    args.drain(9..11); // --seed 7
    let o = onebit(&args);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("--seed"));

    let mut args = run_args(&inst, out);
    args[4] = "lf-ucb2";
    assert_eq!(code(&onebit(&args)), 2);

    let mut args = run_args(&inst, out);
    args[8] = "0";
    assert_eq!(code(&onebit(&args)), 2);

    let mut args = run_args(&inst, out);
    args[2] = "9";
    assert_eq!(code(&onebit(&args)), 2);
}

#[test]
fn unsorted_instance_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let inst = instance_file(
        dir.path(),
        r#"{"arms": [{"type": "bernoulli", "p": 0.3}, {"type": "bernoulli", "p": 0.7}]}"#,
    );
    let out = dir.path().join("out");
    let o = onebit(&run_args(&inst, out.to_str().unwrap()));
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("0 < mu_K <= ... <= mu_2 < mu_1 < 1"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn io_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let inst = instance_file(dir.path(), TWO_ARMS);
    // output "directory" is an existing file
    let blocker = dir.path().join("blocker");
    std::fs::write(&blocker, "").unwrap();
    let o = onebit(&run_args(&inst, blocker.to_str().unwrap()));
    assert_eq!(code(&o), 1, "{}", stderr(&o));

    let missing = dir.path().join("missing.json");
    let o = onebit(&["bounds", "--instance", missing.to_str().unwrap(), "--policy", "ucb1", "--n", "100", "--formula", "cor1"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn bounds_json() {
    let o = onebit(&["bounds", "--instance", "1", "--policy", "ucb1", "--n", "10000", "--formula", "cor1"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let total = v["total_regret_bound"].as_f64().unwrap();
    assert!(total.is_finite());
    assert!((total - 2_408.801_387_758_938_7).abs() < 1e-9 * total);
    assert_eq!(v["formula_id"], "cor1a");
    assert_eq!(v["per_arm_pull_bound"].as_array().unwrap().len(), 4);

    let dir = tempfile::tempdir().unwrap();
    let inst = instance_file(dir.path(), TWO_ARMS);
    for (formula, policy, id) in [
        ("lemma1", "lf-klucb", "lemma1"),
        ("numplays", "ucb1", "numplays"),
        ("cor2", "klucb", "cor2"),
    ] {
        let o = onebit(&["bounds", "--instance", &inst, "--policy", policy, "--n", "200", "--formula", formula]);
        assert_eq!(code(&o), 0, "{formula}: {}", stderr(&o));
        let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
        assert_eq!(v["formula_id"], id);
    }
    let o = onebit(&["bounds", "--instance", &inst, "--policy", "klucb", "--n", "200", "--formula", "lemma2", "--delta", "0.02"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["formula_id"], "lemma2");
    assert_eq!(v["minimizing_delta"][0], 0.02);
}

#[test]
fn bounds_usage_errors() {
    let base = ["bounds", "--instance", "1", "--n", "10000"];
    let with = |extra: &[&str]| {
        let mut a = base.to_vec();
        a.extend_from_slice(extra);
        code(&onebit(&a))
    };
    assert_eq!(with(&["--policy", "klucb", "--formula", "lemma2"]), 2);
    assert_eq!(with(&["--policy", "klucb", "--formula", "lemma2", "--delta", "0.5"]), 2);
    assert_eq!(with(&["--policy", "klucb", "--formula", "cor1"]), 2);
    assert_eq!(with(&["--policy", "ucb1", "--formula", "cor2"]), 2);
    assert_eq!(with(&["--policy", "thompson", "--formula", "cor1"]), 2);
    assert_eq!(with(&["--policy", "ucb1", "--formula", "cor3"]), 2);
}

#[test]
fn verify_suites() {
    let o = onebit(&["verify", "--suite", "schedule", "--intensity", "quick"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).lines().all(|l| l.starts_with("ok ")));
    assert!(stdout(&o).contains("schedule/tau_rewrite"));

    let o = onebit(&["verify", "--suite", "codec", "--intensity", "quick"]);
    assert_eq!(code(&o), 0);

    let o = onebit(&["verify", "--suite", "codec", "--intensity", "quick", "--inject-bit-flip"]);
    assert_eq!(code(&o), 1);
    let out = stdout(&o);
    let report: serde_json::Value = serde_json::from_str(out.lines().last().unwrap()).unwrap();
    assert_eq!(report["check"], "round_trip");
    assert!(report["counterexample"].as_str().unwrap().contains("seed 0"));

    assert_eq!(code(&onebit(&["verify", "--suite", "nonsense"])), 2);
}

#[test]
fn trace_output() {
    let o = onebit(&["trace", "--rewards", "0.3,0.9,0.6"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    let rows: Vec<Vec<&str>> = out.lines().skip(1).map(|l| l.split_whitespace().collect()).collect();
    assert_eq!(rows.iter().map(|r| r[3]).collect::<Vec<_>>(), ["0", "1", "0"]);
    assert_eq!(rows[2][5], "0.75");
    assert_eq!(rows[2][6], "2");

    let o = onebit(&["trace", "--rewards", "0.1,0.8", "--pulls", "17"]);
    let ends: Vec<String> = stdout(&o)
        .lines()
        .skip(1)
        .filter(|l| l.ends_with('|'))
        .map(|l| l.split_whitespace().next().unwrap().to_string())
        .collect();
    assert_eq!(ends, ["1", "3", "5", "8", "11", "14", "17"]);

    let o = onebit(&["trace", "--seed", "4", "--pulls", "30"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).lines().count(), 31);
}

#[test]
fn trace_errors() {
    assert_eq!(code(&onebit(&["trace", "--rewards", ""])), 2);
    assert_eq!(code(&onebit(&["trace", "--rewards", "0.2,1.4"])), 2);
    assert_eq!(code(&onebit(&["trace", "--seed", "4"])), 2);
    assert_eq!(code(&onebit(&["trace"])), 2);
    assert_eq!(code(&onebit(&["trace", "--rewards", "0.5", "--pulls", "0"])), 2);
}
