//! Embeddings of source programs into the host language, and empirical
//! checkers for the properties they are meant to have.
//!
//! `embed_stage(p)` is `(emit (compile_a (quoteA "p")))`: the host program
//! that runs the staged compiler at compile time. `embed_safe` does the same
//! with the safety-layered compiler. Every checker returns an
//! [`EmbeddingReport`] whose counts add up (`passed + failed + skipped ==
//! pairs_checked`) and whose failures are ordered by corpus index.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::Serialize;

use crate::host::{apply_program, compile_u, library, Code, HostProgram, HostTemplate, MetaExpr, Prim};
use crate::machine::{default_suite_for, obs_equiv, CompiledProgram, Env, MachineCode, OutcomeKind};
use crate::reference;
use crate::staged_source::{compile_a, compile_a_safe, pretty, typecheck, SourceTerm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Embedding {
    Stage,
    Safe,
}

impl Embedding {
    pub fn name(self) -> &'static str {
        match self {
            Embedding::Stage => "stage",
            Embedding::Safe => "safe",
        }
    }

    pub fn from_name(s: &str) -> Option<Embedding> {
        match s {
            "stage" => Some(Embedding::Stage),
            "safe" => Some(Embedding::Safe),
            _ => None,
        }
    }

    pub fn embed(self, p: &SourceTerm) -> HostProgram {
        match self {
            Embedding::Stage => embed_stage(p),
            Embedding::Safe => embed_safe(p),
        }
    }

    /// The source compiler this embedding is meant to agree with: the plain
    /// staged compiler for `Stage`, the safety-layered one for `Safe`.
    pub fn source_compiler(self) -> fn(&SourceTerm, u64) -> CompiledProgram {
        match self {
            Embedding::Stage => compile_a,
            Embedding::Safe => compile_a_safe,
        }
    }
}

fn embed_with(prim: Prim, p: &SourceTerm) -> HostProgram {
    HostProgram::emit(MetaExpr::apply(MetaExpr::Prim(prim), MetaExpr::quote_a(p.clone())))
}

/// `(emit (compile_a (quoteA "p")))`.
pub fn embed_stage(p: &SourceTerm) -> HostProgram {
    embed_with(Prim::CompileA, p)
}

/// `(emit (compile_a_safe (quoteA "p")))`.
pub fn embed_safe(p: &SourceTerm) -> HostProgram {
    embed_with(Prim::CompileASafe, p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckKind {
    Semantics,
    Stage,
    Safety,
    Realizable,
}

impl CheckKind {
    pub fn name(self) -> &'static str {
        match self {
            CheckKind::Semantics => "semantics",
            CheckKind::Stage => "stage",
            CheckKind::Safety => "safety",
            CheckKind::Realizable => "realizable",
        }
    }
}

/// A failing program (or pair of programs) with the outcomes that disagreed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Witness {
    pub index: usize,
    pub program: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub other_index: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub other_program: Option<String>,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Tally {
    pub passed: usize,
    pub failed: usize,
}

/// Source judgment (rows) against the host compiler's outcome (columns).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SafetyTable(pub BTreeMap<String, BTreeMap<String, usize>>);

impl SafetyTable {
    fn new() -> Self {
        let mut rows = BTreeMap::new();
        for judgment in ["safe", "not_safe"] {
            let cols = OutcomeKind::ALL.iter().map(|k| (k.name().to_string(), 0)).collect();
            rows.insert(judgment.to_string(), cols);
        }
        SafetyTable(rows)
    }

    fn record(&mut self, safe: bool, outcome: OutcomeKind) {
        let row = if safe { "safe" } else { "not_safe" };
        *self.0.get_mut(row).unwrap().get_mut(outcome.name()).unwrap() += 1;
    }

    pub fn get(&self, safe: bool, outcome: OutcomeKind) -> usize {
        self.0[if safe { "safe" } else { "not_safe" }][outcome.name()]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EmbeddingReport {
    pub check: CheckKind,
    /// Embedding name, or the name of the realizability case.
    pub subject: String,
    pub corpus_size: usize,
    pub pairs_checked: usize,
    pub passed: usize,
    pub failed: usize,
    pub skipped: usize,
    pub fuel: u64,
    /// Kernel classes with at least two members (stage checks only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nontrivial_classes: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub safety_table: Option<SafetyTable>,
    /// Unsafe outcomes of the plain embedding against the plain compiler
    /// (safety checks only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corollary: Option<Tally>,
    pub failures: Vec<Witness>,
}

impl EmbeddingReport {
    fn new(check: CheckKind, subject: &str, corpus_size: usize, fuel: u64) -> Self {
        EmbeddingReport {
            check,
            subject: subject.to_string(),
            corpus_size,
            pairs_checked: 0,
            passed: 0,
            failed: 0,
            skipped: 0,
            fuel,
            nontrivial_classes: None,
            safety_table: None,
            corollary: None,
            failures: Vec::new(),
        }
    }

    pub fn ok(&self) -> bool {
        self.failed == 0 && self.corollary.map_or(true, |c| c.failed == 0)
    }
}

/// Witnesses shown in text output; JSON carries all of them.
const TEXT_WITNESSES: usize = 10;

impl fmt::Display for EmbeddingReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{} [{}]: {}",
            self.check.name(),
            self.subject,
            if self.ok() { "PASS" } else { "FAIL" }
        )?;
        writeln!(
            f,
            "  corpus {}  pairs {}  passed {}  failed {}  skipped {}  fuel {}",
            self.corpus_size, self.pairs_checked, self.passed, self.failed, self.skipped, self.fuel
        )?;
        if let Some(n) = self.nontrivial_classes {
            writeln!(f, "  kernel classes with 2+ members: {n}")?;
        }
        if let Some(t) = &self.safety_table {
            write!(f, "  {:<10}", "")?;
            for k in OutcomeKind::ALL {
                write!(f, "{:>8}", k.name())?;
            }
            writeln!(f)?;
            for (label, safe) in [("safe", true), ("not_safe", false)] {
                write!(f, "  {label:<10}")?;
                for k in OutcomeKind::ALL {
                    write!(f, "{:>8}", t.get(safe, k))?;
                }
                writeln!(f)?;
            }
        }
        if let Some(c) = self.corollary {
            writeln!(f, "  plain embedding unsafe-agreement: passed {}  failed {}", c.passed, c.failed)?;
        }
        for w in self.failures.iter().take(TEXT_WITNESSES) {
            match (&w.other_index, &w.other_program) {
                (Some(j), Some(q)) => writeln!(f, "  #{} `{}` vs #{} `{}`: {}", w.index, w.program, j, q, w.detail)?,
                _ => writeln!(f, "  #{} `{}`: {}", w.index, w.program, w.detail)?,
            }
        }
        if self.failures.len() > TEXT_WITNESSES {
            writeln!(f, "  ... {} more", self.failures.len() - TEXT_WITNESSES)?;
        }
        Ok(())
    }
}

/// Single-line rendering of an outcome for witness details.
pub fn one_line(outcome: &CompiledProgram) -> String {
    match outcome {
        CompiledProgram::Code(c) => {
            let parts: Vec<String> = c.instrs().iter().map(|i| i.to_string()).collect();
            format!("[{}]", parts.join("; "))
        }
        other => other.to_string(),
    }
}

/// `φ_src(p) ~ φ_u(e(p))` for every program in the corpus, where `φ_src` is
/// the embedding's source compiler and `~` is observational equivalence on
/// `suite` (or the default suite over each pair's free variables).
pub fn check_semantics_preserving(
    e: Embedding,
    corpus: &[SourceTerm],
    suite: Option<&[Env]>,
    fuel: u64,
) -> EmbeddingReport {
    let mut report = EmbeddingReport::new(CheckKind::Semantics, e.name(), corpus.len(), fuel);
    let source = e.source_compiler();
    for (i, p) in corpus.iter().enumerate() {
        let expected = source(p, fuel);
        let actual = compile_u(&e.embed(p), fuel);
        let envs;
        let suite = match suite {
            Some(s) => s,
            None => {
                envs = default_suite_for(&expected, &actual);
                &envs
            }
        };
        report.pairs_checked += 1;
        if obs_equiv(&expected, &actual, suite, fuel) {
            report.passed += 1;
        } else {
            report.failed += 1;
            report.failures.push(Witness {
                index: i,
                program: pretty(p),
                other_index: None,
                other_program: None,
                detail: format!("source compiler {} but host compiler {}", one_line(&expected), one_line(&actual)),
            });
        }
    }
    report
}

/// `ker φ_src ⊆ ker (φ_u ∘ e)` on the corpus, with the embedding's own
/// source compiler.
pub fn check_stage_preserving(e: Embedding, corpus: &[SourceTerm], fuel: u64) -> EmbeddingReport {
    check_stage_preserving_with(e, e.source_compiler(), corpus, fuel)
}

/// Stage preservation against an explicit source compiler. Programs are
/// grouped by their source-compiled output; every pair inside a group must
/// also compile identically through the embedding.
pub fn check_stage_preserving_with(
    e: Embedding,
    source: fn(&SourceTerm, u64) -> CompiledProgram,
    corpus: &[SourceTerm],
    fuel: u64,
) -> EmbeddingReport {
    let mut report = EmbeddingReport::new(CheckKind::Stage, e.name(), corpus.len(), fuel);
    let mut class_of: HashMap<CompiledProgram, usize> = HashMap::new();
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for (i, p) in corpus.iter().enumerate() {
        let out = source(p, fuel);
        let next = classes.len();
        let c = *class_of.entry(out).or_insert(next);
        if c == next {
            classes.push(Vec::new());
        }
        classes[c].push(i);
    }
    let mut failures = Vec::new();
    let mut nontrivial = 0;
    for members in classes.iter().filter(|m| m.len() > 1) {
        nontrivial += 1;
        let n = members.len();
        report.pairs_checked += n * (n - 1) / 2;
        let outs: Vec<CompiledProgram> = members.iter().map(|&i| compile_u(&e.embed(&corpus[i]), fuel)).collect();
        let mut groups: HashMap<&CompiledProgram, usize> = HashMap::new();
        for o in &outs {
            *groups.entry(o).or_default() += 1;
        }
        let agreeing: usize = groups.values().map(|&m| m * (m - 1) / 2).sum();
        report.failed += n * (n - 1) / 2 - agreeing;
        report.passed += agreeing;
        let (first, rep) = (members[0], &outs[0]);
        for (k, o) in outs.iter().enumerate().skip(1) {
            if o != rep {
                failures.push(Witness {
                    index: first,
                    program: pretty(&corpus[first]),
                    other_index: Some(members[k]),
                    other_program: Some(pretty(&corpus[members[k]])),
                    detail: format!("same source output, host outputs {} and {}", one_line(rep), one_line(o)),
                });
            }
        }
    }
    failures.sort_by_key(|w| (w.index, w.other_index));
    report.failures = failures;
    report.nontrivial_classes = Some(nontrivial);
    report
}

/// For each program: the safety embedding compiles to `unsafe` iff the
/// safety-layered compiler does iff the typing judgment rejects it. Also
/// checks that the plain embedding's `unsafe` outcomes match the plain
/// compiler's, which is reported separately as the corollary tally.
pub fn check_safety_preserving(corpus: &[SourceTerm], fuel: u64) -> EmbeddingReport {
    let mut report = EmbeddingReport::new(CheckKind::Safety, Embedding::Safe.name(), corpus.len(), fuel);
    let mut table = SafetyTable::new();
    let mut corollary = Tally::default();
    for (i, p) in corpus.iter().enumerate() {
        let judged_safe = typecheck(p).is_safe();
        let host = compile_u(&embed_safe(p), fuel);
        let source = compile_a_safe(p, fuel);
        table.record(judged_safe, host.kind());
        report.pairs_checked += 1;
        let (a, b, c) = (host.is_unsafe(), source.is_unsafe(), !judged_safe);
        let mut problems = Vec::new();
        if a == b && b == c {
            report.passed += 1;
        } else {
            report.failed += 1;
            problems.push(format!(
                "host unsafe={a}, compiler unsafe={b}, judged unsafe={c} ({} / {})",
                one_line(&host),
                one_line(&source)
            ));
        }
        let plain_host = compile_u(&embed_stage(p), fuel);
        let plain = compile_a(p, fuel);
        if plain_host.is_unsafe() == plain.is_unsafe() {
            corollary.passed += 1;
        } else {
            corollary.failed += 1;
            problems.push(format!(
                "plain embedding {} but plain compiler {}",
                one_line(&plain_host),
                one_line(&plain)
            ));
        }
        if !problems.is_empty() {
            report.failures.push(Witness {
                index: i,
                program: pretty(p),
                other_index: None,
                other_program: None,
                detail: problems.join("; "),
            });
        }
    }
    report.safety_table = Some(table);
    report.corollary = Some(corollary);
    report
}

/// Realizability of a function over codes by a host term:
/// `φ_u(P[F(x)]) = φ_u(P[oracle(x)])` for every sample `x` the oracle is
/// defined on. Samples the oracle rejects are counted as skipped.
pub fn check_realizable(
    name: &str,
    template: &HostTemplate,
    f: &MetaExpr,
    oracle: &dyn Fn(&Code) -> Option<Code>,
    samples: &[Code],
    fuel: u64,
) -> Result<EmbeddingReport, crate::host::TemplateError> {
    let composed = apply_program(template, f.clone())?;
    let mut report = EmbeddingReport::new(CheckKind::Realizable, name, samples.len(), fuel);
    for (i, x) in samples.iter().enumerate() {
        report.pairs_checked += 1;
        let Some(y) = oracle(x) else {
            report.skipped += 1;
            continue;
        };
        let left = compile_u(&composed.instantiate_code(x), fuel);
        let right = compile_u(&template.instantiate_code(&y), fuel);
        if left == right {
            report.passed += 1;
        } else {
            report.failed += 1;
            report.failures.push(Witness {
                index: i,
                program: x.to_string(),
                other_index: None,
                other_program: None,
                detail: format!("host term gives {} but oracle gives {}", one_line(&left), one_line(&right)),
            });
        }
    }
    Ok(report)
}

/// The standard realizability cases, each paired with an independent oracle:
///
/// * `const_fold` — the host-level constant folder under `(emit (compile_a ?))`;
/// * `compile_a` — the compiler primitive under the interpreter `(emit ?)`;
/// * `phi_a` — the compiler written in the host language, same template;
/// * `compile_a_safe` — the safety-layered primitive under the interpreter;
/// * `identity` — the identity function on machine codes under the interpreter.
pub fn realizability_suite(sources: &[SourceTerm], machines: &[MachineCode], fuel: u64) -> Vec<EmbeddingReport> {
    let interpreter = HostTemplate::interpreter();
    let via_compile_a = HostTemplate::applying(MetaExpr::Prim(Prim::CompileA)).expect("closed primitive");
    let source_codes: Vec<Code> = sources.iter().cloned().map(Code::Source).collect();
    let machine_codes: Vec<Code> = machines.iter().cloned().map(Code::Machine).collect();

    let fold = |x: &Code| match x {
        Code::Source(t) => Some(Code::Source(reference::fold_constants(t))),
        _ => None,
    };
    let compile = |x: &Code| match x {
        Code::Source(t) => reference::compile_reference(t).map(Code::Machine),
        _ => None,
    };
    let compile_safe = |x: &Code| match x {
        Code::Source(t) => reference::compile_safe_reference(t),
        _ => None,
    };
    let identity = |x: &Code| Some(x.clone());

    let cases: [(&str, &HostTemplate, MetaExpr, &dyn Fn(&Code) -> Option<Code>, &[Code]); 5] = [
        ("const_fold", &via_compile_a, library::const_fold(), &fold, &source_codes),
        ("compile_a", &interpreter, MetaExpr::Prim(Prim::CompileA), &compile, &source_codes),
        ("phi_a", &interpreter, library::phi_a(), &compile, &source_codes),
        ("compile_a_safe", &interpreter, MetaExpr::Prim(Prim::CompileASafe), &compile_safe, &source_codes),
        ("identity", &interpreter, MetaExpr::identity(), &identity, &machine_codes),
    ];
    cases
        .into_iter()
        .map(|(name, template, f, oracle, samples)| {
            check_realizable(name, template, &f, oracle, samples, fuel).expect("library functions are closed")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::DEFAULT_FUEL;
    use crate::staged_source::parse_source;

    fn corpus(src: &[&str]) -> Vec<SourceTerm> {
        src.iter().map(|s| parse_source(s).unwrap()).collect()
    }

    #[test]
    fn embedding_shape() {
        let p = parse_source("x + ~(1+1)").unwrap();
        assert_eq!(embed_stage(&p).to_string(), "(emit (compile_a (quoteA \"x + ~(1 + 1)\")))");
        assert_eq!(embed_safe(&p).to_string(), "(emit (compile_a_safe (quoteA \"x + ~(1 + 1)\")))");
    }

    #[test]
    fn stage_counts_pairs() {
        let c = corpus(&["x + ~(1+1)", "x + 2", "x + ~(3 - 1)", "y", "~(y)"]);
        let r = check_stage_preserving(Embedding::Stage, &c, DEFAULT_FUEL);
        assert_eq!(r.pairs_checked, 3);
        assert_eq!((r.passed, r.failed), (3, 0));
        assert_eq!(r.nontrivial_classes, Some(1));
    }

    #[test]
    fn safety_table_fills() {
        let c = corpus(&["if x then 1 else 2", "if x < 3 then 1 else 2", "1 + true"]);
        let r = check_safety_preserving(&c, DEFAULT_FUEL);
        assert!(r.ok(), "{r}");
        let t = r.safety_table.unwrap();
        assert_eq!(t.get(true, OutcomeKind::Code), 1);
        assert_eq!(t.get(false, OutcomeKind::Unsafe), 2);
    }

    #[test]
    fn safe_embedding_does_not_preserve_plain_kernel() {
        // `1 + 1` and `1 + true` compile identically without types.
        let c = corpus(&["1 + 1", "1 + true"]);
        let r = check_stage_preserving_with(Embedding::Safe, compile_a, &c, DEFAULT_FUEL);
        assert_eq!((r.pairs_checked, r.failed), (1, 1));
        assert!(check_stage_preserving(Embedding::Safe, &c, DEFAULT_FUEL).ok());
    }

    #[test]
    fn realizability_cases_pass() {
        let c = corpus(&["x + ~(1+1)", "if 1 < 2 then y * (3 - 1) else 0", "1 + true", "~(if x then 1 else 2)"]);
        let m = vec![crate::machine::parse_machine("LOADV x\nPUSHI 2\nIADD").unwrap()];
        let reports = realizability_suite(&c, &m, DEFAULT_FUEL);
        assert_eq!(reports.len(), 5);
        for r in &reports {
            assert!(r.ok(), "{r}");
            assert_eq!(r.passed + r.failed + r.skipped, r.pairs_checked);
        }
        // the open escape has no reference compilation
        assert_eq!(reports[1].skipped, 1);
    }
}
