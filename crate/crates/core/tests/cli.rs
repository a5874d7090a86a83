use std::io::Write;
use std::process::{Command, Output};

fn stagelab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stagelab"))
        .args(args)
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn status(args: &[&str]) -> i32 {
    stagelab(args).status.code().unwrap()
}

#[test]
fn compile_outputs_and_statuses() {
    let staged = stagelab(&["compile", "a", "x + ~(1+1)"]);
    let plain = stagelab(&["compile", "a", "x + 2"]);
    assert_eq!(stdout(&staged), "LOADV x\nPUSHI 2\nIADD\n");
    assert_eq!(stdout(&staged), stdout(&plain));

    let unsafe_ = stagelab(&["compile", "a-safe", "if x then 1 else 2"]);
    assert_eq!(stdout(&unsafe_), "UNSAFE\n");
    assert_eq!(unsafe_.status.code(), Some(2));

    assert_eq!(stdout(&stagelab(&["compile", "u", r#"(emit (quoteM "PUSHI 2"))"#])), "PUSHI 2\n");
    assert_eq!(status(&["compile", "u", stagelab::host::library::DIVERGENT_PROGRAM]), 3);
    assert_eq!(status(&["--fuel", "1000", "compile", "a", "~(1 + true)"]), 4);
    assert!(stdout(&stagelab(&["compile", "a", "~(1 + true)"])).starts_with("ERROR("));
    assert_eq!(status(&["compile", "a", "x +"]), 5);
    assert_eq!(status(&["compile", "u", "(emit"]), 5);
}

#[test]
fn parse_errors_report_position() {
    let o = stagelab(&["compile", "a", "x + )"]);
    assert_eq!(o.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&o.stderr).contains("1:5"));
}

#[test]
fn usage_errors_and_help() {
    assert_eq!(status(&["frobnicate"]), 5);
    assert_eq!(status(&["--fuel", "0", "compile", "a", "x"]), 5);
    assert_eq!(status(&["--format", "yaml", "compile", "a", "x"]), 5);
    assert_eq!(status(&["check", "stage"]), 5);
    assert_eq!(status(&["--help"]), 0);
    assert_eq!(status(&["--version"]), 0);
}

#[test]
fn embed_commands() {
    assert_eq!(stdout(&stagelab(&["embed", "stage", "x + 2"])), "(emit (compile_a (quoteA \"x + 2\")))\n");
    let o = stagelab(&["embed", "stage", "x + ~(1+1)", "--compile"]);
    let compiled = stdout(&stagelab(&["compile", "a", "x + 2"]));
    assert!(stdout(&o).ends_with(&compiled));
    let o = stagelab(&["embed", "safe", "1 + true", "--compile"]);
    assert!(stdout(&o).ends_with("UNSAFE\n"));
    assert_eq!(o.status.code(), Some(2));
    // open escapes are not source programs
    assert_eq!(status(&["embed", "stage", "~(x)"]), 5);
}

#[test]
fn run_command() {
    assert_eq!(stdout(&stagelab(&["run", "LOADV x\\nPUSHI 2\\nIADD", "--var", "x=40"])), "42\n");
    let trap = stagelab(&["run", "TRAP"]);
    assert_eq!(stdout(&trap), "TRAP\n");
    assert_eq!(trap.status.code(), Some(4));
    let unbound = stagelab(&["run", "LOADV y"]);
    assert_eq!(stdout(&unbound), "TRAP (unbound variable y)\n");
    assert_eq!(status(&["--fuel", "5", "run", "JMP 0\\nJMP 0\\nJMP 0\\nJMP 0\\nJMP 0\\nPUSHI 1"]), 3);
    assert_eq!(status(&["run", "PUSH 1"]), 5);
    assert_eq!(status(&["run", "PUSHI 1", "--var", "x"]), 5);
}

#[test]
fn compiled_file_runs() {
    let dir = tempfile::tempdir().unwrap();
    let code_path = dir.path().join("prog.m");
    let compiled = stdout(&stagelab(&["compile", "a", "x + ~(1+1)"]));
    std::fs::write(&code_path, compiled).unwrap();
    let o = stagelab(&["run", code_path.to_str().unwrap(), "--var", "x=40"]);
    assert_eq!(stdout(&o), "42\n");

    let suite_path = dir.path().join("inputs.suite");
    std::fs::write(&suite_path, "# two inputs\nx=1\nx=-2\n").unwrap();
    let o = stagelab(&["--suite", suite_path.to_str().unwrap(), "run", code_path.to_str().unwrap()]);
    assert_eq!(stdout(&o), "x=1 -> 3\nx=-2 -> 0\n");
}

#[test]
fn kernel_command() {
    let o = stagelab(&["kernel", "examples/two_classes.corpus", "a"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.starts_with("compiler a: 5 programs, 2 classes, 0 unmapped\n"), "{text}");
    assert!(text.contains("class 1 -> [LOADV x; PUSHI 2; IADD]\n  x + 2\n  x + ~(1+1)\n  x + ~(1+(2-1))\n"));
    assert!(text.contains("class 2 -> [LOADV y; PUSHI 2; IADD]\n  y + 2\n  y + ~(4-2)\n"));

    let o = stagelab(&["kernel", "examples/two_classes.corpus", "a", "--against", "unstaged"]);
    assert!(stdout(&o).contains("consistent with unstaged refining a"));

    let mut bad = tempfile::NamedTempFile::new().unwrap();
    writeln!(bad, "x + 1\n\n# fine so far\n1 +").unwrap();
    let o = stagelab(&["kernel", bad.path().to_str().unwrap(), "a"]);
    assert_eq!(o.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 4"));
}

#[test]
fn check_commands() {
    let o = stagelab(&["check", "stage", "--generate", "1000", "--seed", "7"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("failed 0"));
    let o = stagelab(&["check", "safety", "--generate", "1000", "--seed", "7", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let report = &v["reports"][0];
    assert_eq!(report["failed"], 0);
    assert_eq!(report["pairs_checked"], 1000);
    let table = &report["safety_table"];
    let total: u64 = ["safe", "not_safe"]
        .iter()
        .flat_map(|r| table[r].as_object().unwrap().values())
        .map(|n| n.as_u64().unwrap())
        .sum();
    assert_eq!(total, 1000);

    assert_eq!(status(&["check", "all", "examples/two_classes.corpus"]), 0);
}

#[test]
fn semantics_check_with_suite_file() {
    let dir = tempfile::tempdir().unwrap();
    let suite = dir.path().join("inputs");
    // the empty environment traps on both sides, which still counts as agreement
    std::fs::write(&suite, "x=40 y=1\n-\n").unwrap();
    let o = stagelab(&["--suite", suite.to_str().unwrap(), "check", "semantics", "examples/two_classes.corpus"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    std::fs::write(&suite, "x=forty\n").unwrap();
    assert_eq!(status(&["--suite", suite.to_str().unwrap(), "check", "semantics", "examples/two_classes.corpus"]), 5);
}

#[test]
fn reproducible_output() {
    let args = ["check", "all", "--generate", "200", "--seed", "3", "--format", "json"];
    assert_eq!(stagelab(&args).stdout, stagelab(&args).stdout);
    let other = ["check", "all", "--generate", "200", "--seed", "4", "--format", "json"];
    assert_eq!(stagelab(&other).status.code(), Some(0));
}
