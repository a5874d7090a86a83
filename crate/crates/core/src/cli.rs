//! The `stagelab` command line.
//!
//! Exit status: 0 for code (and successful commands), 1 for failed checks,
//! 2 for `UNSAFE`, 3 for `BOTTOM`, 4 for `ERROR`, 5 for unparsable input or
//! bad arguments. `run` exits 0 with a value, 4 on a trap and 3 when fuel
//! runs out.

use std::ffi::OsString;
use std::io::Write;
use std::path::Path;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::embedding::{
    check_safety_preserving, check_semantics_preserving, check_stage_preserving, realizability_suite, Embedding,
    EmbeddingReport,
};
use crate::generators::{generate_corpus, generate_machine_codes, CorpusConfig};
use crate::host::{compile_u, parse_host_program};
use crate::kernel_tools::{compare_staging, kernel_classes, CompilerKind, Corpus};
use crate::machine::{
    execute, format_machine, parse_binding, parse_machine, parse_suite, CompiledProgram, Env, RunResult, DEFAULT_FUEL,
};
use crate::staged_source::{check_membership, compile_a, compile_a_safe, parse_source, SourceTerm};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_UNSAFE: i32 = 2;
pub const EXIT_BOTTOM: i32 = 3;
pub const EXIT_ERROR: i32 = 4;
pub const EXIT_PARSE: i32 = 5;

/// Exit status for a compilation outcome.
pub fn exit_code(outcome: &CompiledProgram) -> i32 {
    match outcome {
        CompiledProgram::Code(_) => EXIT_OK,
        CompiledProgram::Unsafe => EXIT_UNSAFE,
        CompiledProgram::Bottom => EXIT_BOTTOM,
        CompiledProgram::Error(_) => EXIT_ERROR,
    }
}

#[derive(Debug, Parser)]
#[command(name = "stagelab", version, about = "Staged compilers, their kernels, and embeddings between them")]
struct Cli {
    #[command(flatten)]
    config: RunConfig,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct RunConfig {
    /// Evaluation budget for compile-time evaluation and machine runs.
    #[arg(long, global = true, default_value_t = DEFAULT_FUEL, value_parser = clap::value_parser!(u64).range(1..))]
    pub fuel: u64,
    /// Seed for generated corpora.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Input-suite file (one environment per line, `x=1 y=2`); defaults to
    /// the built-in suite over each program's variables.
    #[arg(long, global = true)]
    pub suite: Option<String>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Lang {
    A,
    ASafe,
    U,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum EmbedVariant {
    Stage,
    Safe,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CompilerArg {
    A,
    ASafe,
    U,
    USafe,
    Unstaged,
}

impl From<CompilerArg> for CompilerKind {
    fn from(c: CompilerArg) -> Self {
        match c {
            CompilerArg::A => CompilerKind::A,
            CompilerArg::ASafe => CompilerKind::ASafe,
            CompilerArg::U => CompilerKind::U,
            CompilerArg::USafe => CompilerKind::USafe,
            CompilerArg::Unstaged => CompilerKind::Unstaged,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CheckSuite {
    Semantics,
    Stage,
    Safety,
    Realizable,
    All,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compile a source program (`a`, `a-safe`) or a host program (`u`).
    Compile {
        #[arg(value_enum)]
        lang: Lang,
        /// File path, or the program text itself.
        input: String,
    },
    /// Print the host program a source program embeds to.
    Embed {
        #[arg(value_enum)]
        variant: EmbedVariant,
        input: String,
        /// Also compile the embedded program.
        #[arg(long)]
        compile: bool,
    },
    /// Run machine code. Inline code may use `\n` for line breaks.
    Run {
        input: String,
        /// Variable binding `name=value`; repeatable.
        #[arg(long = "var", value_name = "NAME=VALUE")]
        vars: Vec<String>,
    },
    /// Partition a corpus by compiled output.
    Kernel {
        corpus: String,
        #[arg(value_enum)]
        compiler: CompilerArg,
        /// Compare against the partition of a second compiler.
        #[arg(long, value_enum)]
        against: Option<CompilerArg>,
    },
    /// Run property checks over a corpus file or a generated corpus.
    Check {
        #[arg(value_enum, value_name = "SUITE")]
        which: CheckSuite,
        #[arg(required_unless_present = "generate", conflicts_with = "generate")]
        corpus: Option<String>,
        /// Generate N programs from `--seed` instead of reading a corpus.
        #[arg(long, value_name = "N")]
        generate: Option<usize>,
    },
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn parse(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_PARSE,
            message: message.into(),
        }
    }
}

type CmdResult = Result<i32, Failure>;

/// Reads `input` from a file when such a path exists, else uses it verbatim.
fn read_input(input: &str) -> Result<String, Failure> {
    let path = Path::new(input);
    if path.is_file() {
        std::fs::read_to_string(path).map_err(|e| Failure::parse(format!("cannot read {input}: {e}")))
    } else {
        Ok(input.to_string())
    }
}

fn emit_json(out: &mut dyn Write, value: &impl Serialize) {
    let _ = writeln!(out, "{}", serde_json::to_string_pretty(value).expect("serializable"));
}

fn outcome_text(outcome: &CompiledProgram) -> String {
    match outcome {
        CompiledProgram::Code(c) => format_machine(c),
        other => other.to_string(),
    }
}

fn parse_member_text(text: &str) -> Result<SourceTerm, Failure> {
    let term = parse_source(text.trim()).map_err(|e| Failure::parse(e.to_string()))?;
    check_membership(&term).map_err(|e| Failure::parse(format!("not a source program: {e}")))?;
    Ok(term)
}

fn cmd_compile(config: &RunConfig, lang: Lang, input: &str, out: &mut dyn Write) -> CmdResult {
    let text = read_input(input)?;
    let outcome = match lang {
        Lang::A | Lang::ASafe => {
            let term = parse_source(text.trim()).map_err(|e| Failure::parse(e.to_string()))?;
            if matches!(lang, Lang::A) {
                compile_a(&term, config.fuel)
            } else {
                compile_a_safe(&term, config.fuel)
            }
        }
        Lang::U => {
            let program = parse_host_program(&text).map_err(|e| Failure::parse(e.to_string()))?;
            compile_u(&program, config.fuel)
        }
    };
    match config.format {
        Format::Text => {
            let _ = writeln!(out, "{}", outcome_text(&outcome));
        }
        Format::Json => emit_json(out, &outcome),
    }
    Ok(exit_code(&outcome))
}

fn cmd_embed(config: &RunConfig, variant: EmbedVariant, input: &str, compile: bool, out: &mut dyn Write) -> CmdResult {
    let term = parse_member_text(&read_input(input)?)?;
    let e = match variant {
        EmbedVariant::Stage => Embedding::Stage,
        EmbedVariant::Safe => Embedding::Safe,
    };
    let program = e.embed(&term);
    let outcome = compile.then(|| compile_u(&program, config.fuel));
    match config.format {
        Format::Text => {
            let _ = writeln!(out, "{program}");
            if let Some(o) = &outcome {
                let _ = writeln!(out, "{}", outcome_text(o));
            }
        }
        Format::Json => {
            #[derive(Serialize)]
            struct Embedded<'a> {
                program: String,
                #[serde(skip_serializing_if = "Option::is_none")]
                compiled: Option<&'a CompiledProgram>,
            }
            emit_json(
                out,
                &Embedded {
                    program: program.to_string(),
                    compiled: outcome.as_ref(),
                },
            );
        }
    }
    Ok(outcome.as_ref().map_or(EXIT_OK, exit_code))
}

fn load_suite(config: &RunConfig) -> Result<Option<Vec<Env>>, Failure> {
    match &config.suite {
        None => Ok(None),
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Failure::parse(format!("cannot read suite {path}: {e}")))?;
            let suite = parse_suite(&text).map_err(|e| Failure::parse(format!("suite {path}: {e}")))?;
            Ok(Some(suite))
        }
    }
}

fn cmd_run(config: &RunConfig, input: &str, vars: &[String], out: &mut dyn Write) -> CmdResult {
    let path = Path::new(input);
    let text = if path.is_file() {
        read_input(input)?
    } else {
        input.replace("\\n", "\n")
    };
    let code = parse_machine(&text).map_err(|e| Failure::parse(e.to_string()))?;
    let mut base = Env::new();
    for v in vars {
        let (name, value) = parse_binding(v).map_err(Failure::parse)?;
        base.bind(name, value);
    }
    let envs: Vec<Env> = match load_suite(config)? {
        None => vec![base],
        Some(suite) => suite
            .into_iter()
            .map(|env| {
                let mut merged = base.clone();
                for (k, v) in env.iter() {
                    merged.bind(k.clone(), v);
                }
                merged
            })
            .collect(),
    };
    let mut status = EXIT_OK;
    let mut rows = Vec::new();
    for env in &envs {
        let run = execute(&code, env, config.fuel);
        if status == EXIT_OK {
            status = match run.result {
                RunResult::Value(_) => EXIT_OK,
                RunResult::Trapped => EXIT_ERROR,
                RunResult::FuelExhausted => EXIT_BOTTOM,
            };
        }
        let shown = match &run.trap {
            Some(crate::machine::TrapCause::TrapInstruction) | None => run.result.to_string(),
            Some(cause) => format!("{} ({cause})", run.result),
        };
        rows.push((env, run, shown));
    }
    match config.format {
        Format::Text => {
            let single = config.suite.is_none();
            for (env, _, shown) in &rows {
                if single {
                    let _ = writeln!(out, "{shown}");
                } else {
                    let _ = writeln!(out, "{env} -> {shown}");
                }
            }
        }
        Format::Json => {
            #[derive(Serialize)]
            struct Row<'a> {
                env: &'a Env,
                result: RunResult,
                #[serde(skip_serializing_if = "Option::is_none")]
                trap: Option<String>,
                steps: u64,
            }
            let v: Vec<Row> = rows
                .iter()
                .map(|(env, run, _)| Row {
                    env,
                    result: run.result,
                    trap: run.trap.as_ref().map(|c| c.to_string()),
                    steps: run.steps,
                })
                .collect();
            emit_json(out, &v);
        }
    }
    Ok(status)
}

fn load_corpus(input: &str) -> Result<Corpus, Failure> {
    Corpus::parse(&read_input(input)?).map_err(|e| Failure::parse(e.to_string()))
}

fn cmd_kernel(
    config: &RunConfig,
    corpus: &str,
    compiler: CompilerArg,
    against: Option<CompilerArg>,
    out: &mut dyn Write,
) -> CmdResult {
    let corpus = load_corpus(corpus)?;
    let partition = kernel_classes(&corpus, compiler.into(), config.fuel);
    let comparison = against.map(|b| compare_staging(&corpus, compiler.into(), b.into(), config.fuel));
    match config.format {
        Format::Text => {
            let _ = write!(out, "{}", partition.to_text());
            if let Some(c) = &comparison {
                let _ = write!(out, "{}", c.to_text());
            }
        }
        Format::Json => match &comparison {
            None => emit_json(out, &partition),
            Some(c) => {
                #[derive(Serialize)]
                struct Both<'a> {
                    partition: &'a crate::kernel_tools::KernelPartition,
                    comparison: &'a crate::kernel_tools::StagingComparison,
                }
                emit_json(out, &Both { partition: &partition, comparison: c })
            }
        },
    }
    Ok(EXIT_OK)
}

/// Runs the selected checks. Generated corpora use the seed directly for the
/// staging corpus and fixed offsets from it for the others.
pub fn run_checks(
    suite_name: &str,
    corpus: Option<&[SourceTerm]>,
    generate: usize,
    seed: u64,
    envs: Option<&[Env]>,
    fuel: u64,
) -> Vec<EmbeddingReport> {
    let want = |s: &str| suite_name == "all" || suite_name == s;
    let staging: Vec<SourceTerm>;
    let safety: Vec<SourceTerm>;
    let samples: Vec<SourceTerm>;
    let (staging, safety, samples) = match corpus {
        Some(c) => (c, c, c),
        None => {
            staging = generate_corpus(seed, &CorpusConfig::staging(generate));
            safety = generate_corpus(seed.wrapping_add(1), &CorpusConfig::safety(generate));
            samples = generate_corpus(seed.wrapping_add(2), &CorpusConfig::staging(generate.min(200)));
            (&staging[..], &safety[..], &samples[..])
        }
    };
    let mut reports = Vec::new();
    if want("semantics") {
        reports.push(check_semantics_preserving(Embedding::Stage, staging, envs, fuel));
        reports.push(check_semantics_preserving(Embedding::Safe, staging, envs, fuel));
    }
    if want("stage") {
        reports.push(check_stage_preserving(Embedding::Stage, staging, fuel));
        reports.push(check_stage_preserving(Embedding::Safe, staging, fuel));
    }
    if want("safety") {
        reports.push(check_safety_preserving(safety, fuel));
    }
    if want("realizable") {
        let machines = generate_machine_codes(seed.wrapping_add(3), samples.len().clamp(1, 200), 12);
        reports.extend(realizability_suite(samples, &machines, fuel));
    }
    reports
}

fn cmd_check(
    config: &RunConfig,
    suite: CheckSuite,
    corpus: Option<&str>,
    generate: Option<usize>,
    out: &mut dyn Write,
) -> CmdResult {
    let terms = match corpus {
        Some(path) => {
            let corpus = load_corpus(path)?;
            for e in &corpus.entries {
                check_membership(&e.term)
                    .map_err(|err| Failure::parse(format!("line {}: not a source program: {err}", e.line)))?;
            }
            Some(corpus.terms())
        }
        None => None,
    };
    let envs = load_suite(config)?;
    let name = suite.to_possible_value().expect("named").get_name().to_string();
    let reports = run_checks(
        &name,
        terms.as_deref(),
        generate.unwrap_or(0),
        config.seed,
        envs.as_deref(),
        config.fuel,
    );
    let ok = reports.iter().all(EmbeddingReport::ok);
    match config.format {
        Format::Text => {
            for r in &reports {
                let _ = write!(out, "{r}");
            }
            let _ = writeln!(out, "{}", if ok { "all checks passed" } else { "checks FAILED" });
        }
        Format::Json => {
            #[derive(Serialize)]
            struct Checks<'a> {
                ok: bool,
                reports: &'a [EmbeddingReport],
            }
            emit_json(out, &Checks { ok, reports: &reports })
        }
    }
    Ok(if ok { EXIT_OK } else { EXIT_CHECK_FAILED })
}

/// Parses `args` (including the program name) and runs the command,
/// returning the exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    EXIT_PARSE
                }
            };
        }
    };
    let config = &cli.config;
    let result = match &cli.command {
        Command::Compile { lang, input } => cmd_compile(config, *lang, input, out),
        Command::Embed { variant, input, compile } => cmd_embed(config, *variant, input, *compile, out),
        Command::Run { input, vars } => cmd_run(config, input, vars, out),
        Command::Kernel { corpus, compiler, against } => cmd_kernel(config, corpus, *compiler, *against, out),
        Command::Check { which, corpus, generate } => cmd_check(config, *which, corpus.as_deref(), *generate, out),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}
