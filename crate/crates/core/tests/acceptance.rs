//! Acceptance criteria, one line each. Run with `cargo test --test acceptance`.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use stagelab::embedding::{
    check_safety_preserving, check_semantics_preserving, check_stage_preserving, realizability_suite, Embedding,
};
use stagelab::generators::{generate_corpus, generate_machine_codes, CorpusConfig};
use stagelab::host::{interp_program, library, MetaExpr};
use stagelab::kernel_tools::{compare_staging, CompilerKind, Corpus, StagingRelation};
use stagelab::machine::{default_suite, obs_equiv, run_machine, CompiledProgram, RunResult};
use stagelab::reference::eval_source;
use stagelab::{compile_a, compile_u, typecheck, MachineCode, DEFAULT_FUEL};

const SEED: u64 = 7;
const N: usize = 1000;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn cli(args: &[&str]) -> (i32, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut argv = vec!["stagelab"];
    argv.extend_from_slice(args);
    let code = stagelab::cli::run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap())
}

fn example_corpus_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/two_classes.corpus")
}

fn example_kernel() -> Outcome {
    let path = example_corpus_path();
    let (code, json) = cli(&["kernel", path.to_str().unwrap(), "a", "--format", "json"]);
    ensure(code == 0, || format!("exit status {code}"))?;
    let v: serde_json::Value = serde_json::from_str(&json).map_err(|e| e.to_string())?;
    let classes: Vec<Vec<String>> = v["classes"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| {
            let mut m: Vec<String> = c["members"].as_array().unwrap().iter().map(|s| s.as_str().unwrap().replace(' ', "")).collect();
            m.sort();
            m
        })
        .collect();
    let want = vec![
        vec!["x+2".to_string(), "x+~(1+(2-1))".into(), "x+~(1+1)".into()],
        vec!["y+2".to_string(), "y+~(4-2)".into()],
    ];
    ensure(classes == want, || format!("classes {classes:?}"))?;
    ensure(v["unmapped"].as_array().unwrap().is_empty(), || "unmapped programs".into())?;
    Ok("2 classes as expected".into())
}

fn stage_preservation() -> Outcome {
    let corpus = generate_corpus(SEED, &CorpusConfig::staging(N));
    let r = check_stage_preserving(Embedding::Stage, &corpus, DEFAULT_FUEL);
    ensure(r.ok(), || format!("{r}"))?;
    let classes = r.nontrivial_classes.unwrap_or(0);
    ensure(classes >= 100, || format!("only {classes} non-trivial classes"))?;
    let cmp = compare_staging(&Corpus::from_terms(&corpus), CompilerKind::A, CompilerKind::U, DEFAULT_FUEL);
    ensure(
        matches!(cmp.relation, StagingRelation::Equal | StagingRelation::Refines),
        || cmp.to_text(),
    )?;
    Ok(format!("{} pairs in {classes} classes, 0 violations", r.pairs_checked))
}

fn semantics() -> Outcome {
    let corpus = generate_corpus(SEED, &CorpusConfig::staging(N));
    let r = check_semantics_preserving(Embedding::Stage, &corpus, None, DEFAULT_FUEL);
    ensure(r.ok() && r.passed == N, || format!("{r}"))?;
    Ok(format!("{}/{} programs", r.passed, N))
}

fn interpreter_equation() -> Outcome {
    let codes = generate_machine_codes(SEED, 200, 16);
    for m in &codes {
        let got = compile_u(&interp_program(MetaExpr::quote_m(m.clone())), DEFAULT_FUEL);
        ensure(got == CompiledProgram::Code(m.clone()), || format!("{m:?} -> {got}"))?;
    }
    Ok(format!("{} machine programs", codes.len()))
}

fn safety_biconditional() -> Outcome {
    let corpus = generate_corpus(SEED, &CorpusConfig::safety(N));
    let ill = corpus.iter().filter(|p| !typecheck(p).is_safe()).count();
    ensure((400..=600).contains(&ill), || format!("{ill} ill-typed programs"))?;
    let r = check_safety_preserving(&corpus, DEFAULT_FUEL);
    ensure(r.ok(), || format!("{r}"))?;
    Ok(format!("{N} programs, {ill} ill-typed, 0 violations"))
}

fn realizability() -> Outcome {
    let samples = generate_corpus(SEED, &CorpusConfig::staging(150));
    let machines = generate_machine_codes(SEED, 150, 12);
    let reports = realizability_suite(&samples, &machines, DEFAULT_FUEL);
    let mut summary = Vec::new();
    for r in &reports {
        ensure(r.ok(), || format!("{r}"))?;
        if matches!(r.subject.as_str(), "const_fold" | "compile_a" | "phi_a") {
            ensure(r.passed >= 100, || format!("{}: only {} samples compared", r.subject, r.passed))?;
        }
        summary.push(format!("{} {}", r.subject, r.passed));
    }
    Ok(summary.join(", "))
}

fn bottom_and_singletons() -> Outcome {
    let divergent = library::divergent_program();
    for fuel in [1_000, 10_000, 100_000] {
        let got = compile_u(&divergent, fuel);
        ensure(got == CompiledProgram::Bottom, || format!("fuel {fuel}: {got}"))?;
    }
    let specials = [
        CompiledProgram::Unsafe,
        CompiledProgram::Bottom,
        CompiledProgram::Error("e".into()),
    ];
    let code = CompiledProgram::Code(MachineCode::new(vec![stagelab::Instruction::PushI(1)]).unwrap());
    for (i, a) in specials.iter().enumerate() {
        for (j, b) in specials.iter().enumerate() {
            let eq = obs_equiv(a, b, &[], DEFAULT_FUEL);
            ensure(eq == (i == j), || format!("{a} ~ {b} = {eq}"))?;
        }
        ensure(!obs_equiv(a, &code, &[], DEFAULT_FUEL), || format!("{a} ~ code"))?;
    }
    Ok("BOTTOM at 1e3/1e4/1e5, 9-case table diagonal".into())
}

fn direct_evaluation() -> Outcome {
    let corpus = generate_corpus(SEED, &CorpusConfig::well_typed(N));
    let mut runs = 0;
    for p in &corpus {
        let code = match compile_a(p, DEFAULT_FUEL) {
            CompiledProgram::Code(c) => c,
            other => return Err(format!("{p:?} -> {other}")),
        };
        for env in default_suite(p.free_vars().iter()) {
            let want = eval_source(p, &env).map(|v| v.as_machine_int());
            let got = run_machine(&code, &env, DEFAULT_FUEL);
            ensure(want.map(RunResult::Value) == Some(got), || {
                format!("{} under {env}: direct {want:?}, machine {got}", stagelab::staged_source::pretty(p))
            })?;
            runs += 1;
        }
    }
    Ok(format!("{N} programs, {runs} runs"))
}

fn determinism() -> Outcome {
    let args = ["check", "all", "--generate", "1000", "--seed", "7", "--format", "json"];
    let (c1, a) = cli(&args);
    let (c2, b) = cli(&args);
    ensure(c1 == 0 && c2 == 0, || format!("exit statuses {c1} {c2}"))?;
    ensure(a == b, || "JSON reports differ".into())?;
    let text = ["check", "all", "--generate", "300", "--seed", "7"];
    ensure(cli(&text).1 == cli(&text).1, || "text reports differ".into())?;
    Ok(format!("{} identical bytes", a.len()))
}

fn main() -> ExitCode {
    let criteria: [(&str, u64, fn() -> Outcome); 9] = [
        ("example corpus kernel partition", 1, example_kernel),
        ("stage preservation on generated corpus", 30, stage_preservation),
        ("semantics preservation", 60, semantics),
        ("interpreter equation", 5, interpreter_equation),
        ("safety biconditional", 30, safety_biconditional),
        ("realizability contract", 10, realizability),
        ("bottom and singleton outcomes", 5, bottom_and_singletons),
        ("direct evaluation agrees with machine", 60, direct_evaluation),
        ("deterministic reports", 60, determinism),
    ];
    let mut failed = 0;
    for (n, (name, limit, run)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let result = run();
        let took = start.elapsed();
        let result = match result {
            Ok(msg) if took > Duration::from_secs(limit) => Err(format!("{msg}, but took {took:.2?} (limit {limit}s)")),
            r => r,
        };
        match result {
            Ok(msg) => println!("criterion {}: PASS  {name} — {msg} ({took:.2?})", n + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {}: FAIL  {name} — {msg} ({took:.2?})", n + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
