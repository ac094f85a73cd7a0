//! End-to-end checks of the `loopfix` binary: byte-exact golden files for
//! the deterministic text reports, structural assertions for the JSON forms
//! (whose timing fields vary run to run), and the exit-code contract that
//! scripts are allowed to branch on.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

/// Everything runs from the workspace root so `corpus/...` and
/// `crates/...` paths in arguments resolve the same way they do for a
/// developer invoking the binary by hand.
fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").canonicalize().expect("workspace root")
}

fn run_with(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_loopfix"));
    cmd.current_dir(workspace_root()).args(args);
    // The ambient environment must not flip the solver backend under us.
    cmd.env_remove("LOOPFIX_SOLVER_CMD");
    for (key, value) in env {
        cmd.env(key, value);
    }
    cmd.output().expect("binary runs")
}

fn run(args: &[&str]) -> Output {
    run_with(args, &[])
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("stdout is utf-8")
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("stderr is utf-8")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn golden(name: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()))
}

fn json(out: &Output) -> Value {
    serde_json::from_str(&stdout(out)).expect("stdout is JSON")
}

/// Scratch file under the cargo-managed temp dir; names are unique per test
/// because the tests run in parallel.
fn scratch(name: &str) -> PathBuf {
    Path::new(env!("CARGO_TARGET_TMPDIR")).join(name)
}

const FIXTURES: &str = "crates/loopfix-cli/tests/fixtures";
const COUNTDOWN_PAIRS: &str = "crates/loopfix-cli/tests/golden/countdown_pairs.txt";

// --- golden text reports ------------------------------------------------------

#[test]
fn detect_text_matches_golden() {
    let out = run(&["detect", "corpus/countdown.lp", "--max-iterations", "10000"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out), golden("countdown_detect.txt"));
}

#[test]
fn repair_text_matches_golden() {
    let out = run(&["repair", "corpus/countdown.lp", "--max-iterations", "10000"]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    assert_eq!(stdout(&out), golden("countdown_repair.txt"));
}

#[test]
fn collect_text_matches_golden() {
    let out = run(&["collect", "corpus/countdown.lp", "--max-iterations", "10000"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out), golden("countdown_pairs.txt"));
}

#[test]
fn corpus_text_matches_golden() {
    let out = run(&["corpus", "corpus"]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    assert_eq!(stdout(&out), golden("corpus_run.txt"));
}

#[test]
fn smtlib_emission_matches_golden() {
    let out = run(&["synth", COUNTDOWN_PAIRS, "--emit-smtlib", "--max-stage", "1"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out), golden("smtlib_stage1.txt"));
}

#[test]
fn mine_text_reports_the_minimal_clamp() {
    let out = run(&["mine", "corpus/countdown.lp", "--max-iterations", "10000"]);
    assert_eq!(code(&out), 0);
    assert_eq!(
        stdout(&out),
        "target countdown_by_two#0\n\
         test odd_start (invocation 1): minimal clamp 4, passes at cap: no\n"
    );
}

#[test]
fn synth_text_recovers_the_countdown_guard() {
    let out = run(&["synth", COUNTDOWN_PAIRS]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out), "guard: b > 0\nformulations 2, components 1, component types 1\n");
}

// --- JSON shapes ----------------------------------------------------------------

#[test]
fn detect_json_uses_loop_id_strings() {
    let out = run(&["detect", "corpus/countdown.lp", "--max-iterations", "10000", "--format", "json"]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_eq!(v["cap"], 10000);
    assert_eq!(v["entries"][0]["test"], "odd_start");
    assert_eq!(v["entries"][0]["loop_id"], "countdown_by_two#0");
    assert_eq!(v["entries"][0]["rank"], 1);
}

#[test]
fn mine_json_reports_chi_and_idempotence() {
    let out = run(&["mine", "corpus/countdown.lp", "--max-iterations", "10000", "--format", "json"]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_eq!(v["target"], "countdown_by_two#0");
    assert_eq!(v["records"], serde_json::json!([{"test": "odd_start", "rank": 1, "chi": 4}]));
    assert_eq!(
        v["idempotence"],
        serde_json::json!([{"test": "odd_start", "passes_at_cap": false}])
    );
}

#[test]
fn collect_json_summarizes_the_table() {
    let out =
        run(&["collect", "corpus/countdown.lp", "--max-iterations", "10000", "--format", "json"]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_eq!(v["target"], "countdown_by_two#0");
    assert_eq!(v["rows"], 9);
    assert_eq!(v["columns"], 6);
    assert_eq!(v["raw_rows"], 9);
    assert_eq!(v["pruned_columns"], serde_json::json!(["sub$1"]));
    assert_eq!(v["contributing_tests"], serde_json::json!(["even_start", "odd_start"]));
    assert_eq!(v["pair_file"].as_str().unwrap(), golden("countdown_pairs.txt"));
}

#[test]
fn repair_json_structure() {
    let out =
        run(&["repair", "corpus/countdown.lp", "--max-iterations", "10000", "--format", "json"]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_eq!(v["loop_id"], "countdown_by_two#0");
    assert_eq!(v["cap"], 10000);
    assert_eq!(v["original_guard"], "b != 0");
    assert_eq!(v["patched_guard"], "b > 0");
    assert_eq!(v["hanging"][0]["test"], "odd_start");
    assert_eq!(v["angelic"][0]["chi"], 4);
    assert_eq!(v["context_items"], 9);
    assert_eq!(v["context_size"], 7);
    assert_eq!(v["contributing_tests"], serde_json::json!(["even_start", "odd_start"]));
    assert_eq!(v["stats"]["formulations"], 2);
    assert_eq!(v["stats"]["components"], 1);
    assert_eq!(v["stats"]["component_types"], 1);
    assert_eq!(v["validation"], serde_json::json!({"status": "passed", "tests": 2}));
    assert!(v["patched_source"].as_str().unwrap().contains("while (b > 0)"));
    assert!(v.get("times").is_none(), "times only appear under --timings");
}

// --- optional outputs -------------------------------------------------------------

#[test]
fn repair_timings_appends_one_times_line() {
    let out = run(&["repair", "corpus/countdown.lp", "--max-iterations", "10000", "--timings"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let (rest, last) = text.trim_end_matches('\n').rsplit_once('\n').expect("several lines");
    assert!(last.starts_with("times (ms): instrumentation "), "got: {last}");
    assert_eq!(format!("{rest}\n"), golden("countdown_repair.txt"));

    let with = json(&run(&[
        "repair",
        "corpus/countdown.lp",
        "--max-iterations",
        "10000",
        "--timings",
        "--format",
        "json",
    ]));
    let times = with["times"].as_object().expect("times object");
    for phase in [
        "instrumentation",
        "compilation",
        "test_suite",
        "hanging_tests",
        "angelic_mining",
        "value_collection",
        "smt_solving",
        "total",
    ] {
        assert!(times.contains_key(phase), "missing phase {phase}");
    }
}

#[test]
fn synth_timings_toggle_search_millis() {
    let without = json(&run(&["synth", COUNTDOWN_PAIRS, "--format", "json"]));
    assert_eq!(without["guard"], "b > 0");
    assert!(without.get("search_millis").is_none());

    let with = json(&run(&["synth", COUNTDOWN_PAIRS, "--format", "json", "--timings"]));
    assert!(with["search_millis"].is_u64() || with["search_millis"].is_number());
}

#[test]
fn repair_out_writes_a_healthy_program() {
    let patched = scratch("countdown_patched.lp");
    let out = run(&[
        "repair",
        "corpus/countdown.lp",
        "--max-iterations",
        "10000",
        "--out",
        patched.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let source = std::fs::read_to_string(&patched).expect("patched file written");
    assert!(source.contains("while (b > 0)"));

    // The emitted program must parse and pass its suite without hitting the cap.
    let check = run(&["detect", patched.to_str().unwrap(), "--max-iterations", "10000"]);
    assert_eq!(code(&check), 0);
    assert_eq!(stdout(&check), "no loop reaches 10000 iterations under the test suite\n");
}

#[test]
fn collect_out_writes_the_pair_file_and_stays_quiet() {
    let pairs = scratch("countdown_pairs_out.txt");
    let out = run(&[
        "collect",
        "corpus/countdown.lp",
        "--max-iterations",
        "10000",
        "--out",
        pairs.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out), "", "text mode with --out prints nothing");
    assert_eq!(std::fs::read_to_string(&pairs).unwrap(), golden("countdown_pairs.txt"));
}

// --- exit-code contract -------------------------------------------------------------

#[test]
fn healthy_program_exits_three() {
    let path = format!("{FIXTURES}/healthy.lp");
    let out = run(&["repair", &path, "--max-iterations", "10000"]);
    assert_eq!(code(&out), 3);
    assert!(
        stderr(&out).contains("every test finished within 10000 iterations"),
        "got: {}",
        stderr(&out)
    );

    // `detect` reports the same situation as a finding, not an error.
    let detect = run(&["detect", &path, "--max-iterations", "10000"]);
    assert_eq!(code(&detect), 0);
    assert_eq!(stdout(&detect), "no loop reaches 10000 iterations under the test suite\n");
}

#[test]
fn bad_loop_targets_exit_eight() {
    let unknown =
        run(&["repair", "corpus/countdown.lp", "--max-iterations", "10000", "--loop", "nosuch#0"]);
    assert_eq!(code(&unknown), 8);
    assert!(stderr(&unknown).contains("no loop nosuch#0 in the program"));

    // A loop that exists but terminates is an error too, not a silent no-op.
    let two_loops = scratch("two_loops.lp");
    std::fs::write(
        &two_loops,
        "fn two(n: int) -> int {\n\
         \x20   var i: int = 0;\n\
         \x20   while (i < n) {\n\
         \x20       i = i + 1;\n\
         \x20   }\n\
         \x20   var j: int = 1;\n\
         \x20   while (j != 0) {\n\
         \x20       j = j + 1;\n\
         \x20   }\n\
         \x20   return j;\n\
         }\n\n\
         test t {\n\
         \x20   assert(two(3) == 0);\n\
         }\n",
    )
    .unwrap();
    let healthy_target = run(&[
        "repair",
        two_loops.to_str().unwrap(),
        "--max-iterations",
        "10000",
        "--loop",
        "two#0",
    ]);
    assert_eq!(code(&healthy_target), 8);
    assert!(stderr(&healthy_target).contains("loop two#0 exists but no test hangs in it"));
}

#[test]
fn fix_all_refuses_multiple_hanging_loops() {
    let two_hangs = scratch("two_hangs.lp");
    std::fs::write(
        &two_hangs,
        "fn spin_a(n: int) -> int {\n\
         \x20   var i: int = n;\n\
         \x20   while (i != 0) {\n\
         \x20       i = i - 2;\n\
         \x20   }\n\
         \x20   return i;\n\
         }\n\n\
         fn spin_b(n: int) -> int {\n\
         \x20   var j: int = n;\n\
         \x20   while (j != 0) {\n\
         \x20       j = j - 2;\n\
         \x20   }\n\
         \x20   return j;\n\
         }\n\n\
         test a {\n\
         \x20   assert(spin_a(5) == -1);\n\
         }\n\n\
         test b {\n\
         \x20   assert(spin_b(5) == -1);\n\
         }\n",
    )
    .unwrap();
    let out =
        run(&["repair", two_hangs.to_str().unwrap(), "--max-iterations", "10000", "--fix-all"]);
    assert_eq!(code(&out), 8);
    assert!(
        stderr(&out).contains("2 loops hang (spin_a#0, spin_b#0); repair them one at a time"),
        "got: {}",
        stderr(&out)
    );
}

#[test]
fn unreadable_inputs_exit_two() {
    // A pair file is not a program.
    let not_a_program = run(&["detect", COUNTDOWN_PAIRS, "--max-iterations", "10000"]);
    assert_eq!(code(&not_a_program), 2);

    // A program is not a pair file.
    let not_pairs = run(&["synth", "corpus/countdown.lp"]);
    assert_eq!(code(&not_pairs), 2);
    assert!(
        stderr(&not_pairs).contains("pair line before !schema"),
        "got: {}",
        stderr(&not_pairs)
    );

    // Neither is an empty file.
    let empty = scratch("empty_pairs.txt");
    std::fs::write(&empty, "").unwrap();
    let no_pairs = run(&["synth", empty.to_str().unwrap()]);
    assert_eq!(code(&no_pairs), 2);
    assert!(stderr(&no_pairs).contains("missing !loop line"), "got: {}", stderr(&no_pairs));

    // clap reports unknown flags with the same code.
    let bad_flag = run(&["detect", "--no-such-flag"]);
    assert_eq!(code(&bad_flag), 2);

    let missing = run(&["repair", "does_not_exist.lp"]);
    assert_eq!(code(&missing), 2);
    assert!(stderr(&missing).contains("cannot read"));
}

#[test]
fn failed_validation_exits_seven() {
    let path = format!("{FIXTURES}/tainted.lp");
    let quiet = run(&["repair", &path, "--max-iterations", "10000"]);
    assert_eq!(code(&quiet), 7);
    assert_eq!(stdout(&quiet), "", "no report unless --emit-unvalidated is given");
    assert!(stderr(&quiet).contains("patched guard `b > 0` does not make the whole suite pass"));

    let verbose = run(&[
        "repair",
        &path,
        "--max-iterations",
        "10000",
        "--emit-unvalidated",
        "--format",
        "json",
    ]);
    assert_eq!(code(&verbose), 7, "exit code stays 7 even with the report printed");
    let v = json(&verbose);
    assert_eq!(v["patched_guard"], "b > 0");
    assert_eq!(v["validation"]["status"], "failed");
    assert_eq!(v["validation"]["tests"], 3);
    assert_eq!(v["validation"]["failures"][0]["test"], "unrelated_bug");
    assert_eq!(v["validation"]["failures"][0]["outcome"], "assertion failure: assert(1 == 2)");
}

// --- external solver protocol ---------------------------------------------------------

fn write_fake_solver(name: &str, body: &str) -> String {
    let path = scratch(name);
    std::fs::write(&path, body).unwrap();
    format!("python3 {}", path.display())
}

#[test]
fn garbage_solver_output_exits_nine() {
    let cmd = write_fake_solver("garbage_solver.py", "print(\"hello i am not a solver\")\n");
    let out = run(&["synth", COUNTDOWN_PAIRS, "--solver-cmd", &cmd]);
    assert_eq!(code(&out), 9);
    assert!(
        stderr(&out).contains("unparseable solver output: hello i am not a solver"),
        "got: {}",
        stderr(&out)
    );
}

#[test]
fn unsat_everywhere_exits_six() {
    let cmd = write_fake_solver("unsat_solver.py", "print(\"unsat\")\n");
    let flag = run(&["synth", COUNTDOWN_PAIRS, "--solver-cmd", &cmd]);
    assert_eq!(code(&flag), 6);
    assert!(stderr(&flag).contains("6 formulations tried"), "got: {}", stderr(&flag));

    // The environment variable is the fallback spelling of the same flag.
    let env = run_with(&["synth", COUNTDOWN_PAIRS], &[("LOOPFIX_SOLVER_CMD", cmd.as_str())]);
    assert_eq!(code(&env), 6);
}
