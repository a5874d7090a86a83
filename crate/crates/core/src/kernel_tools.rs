//! Kernel partitions of a corpus under a compiler, and comparison of the
//! partitions two compilers induce.
//!
//! Two programs are in the kernel of a compiler when they compile to the same
//! code. Programs whose compilation ends in `Bottom` or `Error` are listed as
//! unmapped rather than grouped; `Unsafe` is an ordinary output, so all
//! rejected programs fall into one class.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::embedding::{embed_safe, embed_stage, one_line};
use crate::host::compile_u;
use crate::machine::CompiledProgram;
use crate::staged_source::{compile_a, compile_a_safe, emit_code, parse_source, pretty, SourceParseError, SourceTerm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum CompilerKind {
    #[serde(rename = "a")]
    A,
    #[serde(rename = "a-safe")]
    ASafe,
    /// Host compiler after the plain embedding.
    #[serde(rename = "u")]
    U,
    /// Host compiler after the safety embedding.
    #[serde(rename = "u-safe")]
    USafe,
    /// Escapes compiled as ordinary runtime code.
    #[serde(rename = "unstaged")]
    Unstaged,
}

impl CompilerKind {
    pub const ALL: [CompilerKind; 5] = [
        CompilerKind::A,
        CompilerKind::ASafe,
        CompilerKind::U,
        CompilerKind::USafe,
        CompilerKind::Unstaged,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CompilerKind::A => "a",
            CompilerKind::ASafe => "a-safe",
            CompilerKind::U => "u",
            CompilerKind::USafe => "u-safe",
            CompilerKind::Unstaged => "unstaged",
        }
    }

    pub fn from_name(s: &str) -> Option<CompilerKind> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    pub fn compile(self, p: &SourceTerm, fuel: u64) -> CompiledProgram {
        match self {
            CompilerKind::A => compile_a(p, fuel),
            CompilerKind::ASafe => compile_a_safe(p, fuel),
            CompilerKind::U => compile_u(&embed_stage(p), fuel),
            CompilerKind::USafe => compile_u(&embed_safe(p), fuel),
            CompilerKind::Unstaged => CompiledProgram::Code(emit_code(p)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusEntry {
    /// 1-based line in the corpus file.
    pub line: usize,
    pub text: String,
    pub term: SourceTerm,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    pub entries: Vec<CorpusEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {error}")]
pub struct CorpusError {
    pub line: usize,
    pub error: SourceParseError,
}

impl Corpus {
    /// One program per line; blank lines and lines starting with `#` are
    /// ignored.
    pub fn parse(text: &str) -> Result<Corpus, CorpusError> {
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let term = parse_source(line).map_err(|error| CorpusError { line: i + 1, error })?;
            entries.push(CorpusEntry {
                line: i + 1,
                text: line.to_string(),
                term,
            });
        }
        Ok(Corpus { entries })
    }

    pub fn from_terms(terms: &[SourceTerm]) -> Corpus {
        Corpus {
            entries: terms
                .iter()
                .enumerate()
                .map(|(i, t)| CorpusEntry {
                    line: i + 1,
                    text: pretty(t),
                    term: t.clone(),
                })
                .collect(),
        }
    }

    pub fn terms(&self) -> Vec<SourceTerm> {
        self.entries.iter().map(|e| e.term.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct KernelClass {
    pub output: CompiledProgram,
    /// Corpus indices, ascending.
    pub indices: Vec<usize>,
    /// Program texts as written in the corpus.
    pub members: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UnmappedEntry {
    pub index: usize,
    pub program: String,
    pub outcome: CompiledProgram,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct KernelPartition {
    pub compiler: CompilerKind,
    pub corpus_size: usize,
    /// In order of first occurrence in the corpus.
    pub classes: Vec<KernelClass>,
    pub unmapped: Vec<UnmappedEntry>,
}

impl KernelPartition {
    /// Class number of each corpus entry; `None` when unmapped.
    pub fn class_ids(&self) -> Vec<Option<usize>> {
        let mut ids = vec![None; self.corpus_size];
        for (c, class) in self.classes.iter().enumerate() {
            for &i in &class.indices {
                ids[i] = Some(c);
            }
        }
        ids
    }

    /// Sets of member texts, for order-insensitive comparison.
    pub fn member_sets(&self) -> Vec<Vec<String>> {
        let mut sets: Vec<Vec<String>> = self
            .classes
            .iter()
            .map(|c| {
                let mut m = c.members.clone();
                m.sort();
                m
            })
            .collect();
        sets.sort();
        sets
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "compiler {}: {} programs, {} classes, {} unmapped",
            self.compiler.name(),
            self.corpus_size,
            self.classes.len(),
            self.unmapped.len()
        );
        for (n, class) in self.classes.iter().enumerate() {
            let _ = writeln!(s, "class {} -> {}", n + 1, one_line(&class.output));
            for m in &class.members {
                let _ = writeln!(s, "  {m}");
            }
        }
        if !self.unmapped.is_empty() {
            let _ = writeln!(s, "unmapped");
            for u in &self.unmapped {
                let _ = writeln!(s, "  {} -> {}", u.program, one_line(&u.outcome));
            }
        }
        s
    }
}

pub fn kernel_classes(corpus: &Corpus, compiler: CompilerKind, fuel: u64) -> KernelPartition {
    let mut index: HashMap<CompiledProgram, usize> = HashMap::new();
    let mut classes: Vec<KernelClass> = Vec::new();
    let mut unmapped = Vec::new();
    for (i, entry) in corpus.entries.iter().enumerate() {
        let out = compiler.compile(&entry.term, fuel);
        if matches!(out, CompiledProgram::Bottom | CompiledProgram::Error(_)) {
            unmapped.push(UnmappedEntry {
                index: i,
                program: entry.text.clone(),
                outcome: out,
            });
            continue;
        }
        let c = *index.entry(out.clone()).or_insert_with(|| {
            classes.push(KernelClass {
                output: out,
                indices: Vec::new(),
                members: Vec::new(),
            });
            classes.len() - 1
        });
        classes[c].indices.push(i);
        classes[c].members.push(entry.text.clone());
    }
    KernelPartition {
        compiler,
        corpus_size: corpus.len(),
        classes,
        unmapped,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StagingRelation {
    /// Same kernel on the corpus.
    Equal,
    /// The first compiler's kernel is strictly contained in the second's.
    Refines,
    /// The first compiler's kernel strictly contains the second's.
    Coarsens,
    Incomparable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WitnessPair {
    pub first: String,
    pub second: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StagingComparison {
    pub first: CompilerKind,
    pub second: CompilerKind,
    pub corpus_size: usize,
    pub relation: StagingRelation,
    /// Pairs identified by the first compiler but not the second.
    pub only_first_count: usize,
    /// Pairs identified by the second compiler but not the first.
    pub only_second_count: usize,
    pub only_first: Vec<WitnessPair>,
    pub only_second: Vec<WitnessPair>,
}

const MAX_WITNESS_PAIRS: usize = 10;

impl StagingComparison {
    pub fn to_text(&self) -> String {
        let (a, b) = (self.first.name(), self.second.name());
        let verdict = match self.relation {
            StagingRelation::Equal => format!("consistent with ker {a} = ker {b}"),
            StagingRelation::Refines => format!("consistent with {a} refining {b} (ker {a} strictly inside ker {b})"),
            StagingRelation::Coarsens => format!("consistent with {b} refining {a} (ker {b} strictly inside ker {a})"),
            StagingRelation::Incomparable => format!("kernels of {a} and {b} are incomparable"),
        };
        let mut s = format!("{verdict} on {} programs\n", self.corpus_size);
        for (label, count, pairs) in [
            (a, self.only_first_count, &self.only_first),
            (b, self.only_second_count, &self.only_second),
        ] {
            if count > 0 {
                let _ = writeln!(s, "identified only by {label}: {count} pairs");
                for p in pairs {
                    let _ = writeln!(s, "  {}  ~  {}", p.first, p.second);
                }
            }
        }
        s
    }
}

/// Pairs inside `part`'s classes that `other` does not identify.
fn unmatched(part: &KernelPartition, other_ids: &[Option<usize>], texts: &[&str]) -> (usize, Vec<WitnessPair>) {
    let mut count = 0;
    let mut witnesses = Vec::new();
    for class in &part.classes {
        let n = class.indices.len();
        let mut groups: HashMap<usize, usize> = HashMap::new();
        for &i in &class.indices {
            if let Some(c) = other_ids[i] {
                *groups.entry(c).or_default() += 1;
            }
        }
        let together: usize = groups.values().map(|&m| m * (m - 1) / 2).sum();
        count += n * (n - 1) / 2 - together;
        let head = class.indices[0];
        for &i in &class.indices[1..] {
            if witnesses.len() < MAX_WITNESS_PAIRS && (other_ids[i].is_none() || other_ids[i] != other_ids[head]) {
                witnesses.push(WitnessPair {
                    first: texts[head].to_string(),
                    second: texts[i].to_string(),
                });
            }
        }
    }
    (count, witnesses)
}

/// Compare the kernels two compilers induce on a corpus.
pub fn compare_staging(corpus: &Corpus, first: CompilerKind, second: CompilerKind, fuel: u64) -> StagingComparison {
    let pa = kernel_classes(corpus, first, fuel);
    let pb = kernel_classes(corpus, second, fuel);
    let texts: Vec<&str> = corpus.entries.iter().map(|e| e.text.as_str()).collect();
    let (only_first_count, only_first) = unmatched(&pa, &pb.class_ids(), &texts);
    let (only_second_count, only_second) = unmatched(&pb, &pa.class_ids(), &texts);
    let relation = match (only_first_count == 0, only_second_count == 0) {
        (true, true) => StagingRelation::Equal,
        (true, false) => StagingRelation::Refines,
        (false, true) => StagingRelation::Coarsens,
        (false, false) => StagingRelation::Incomparable,
    };
    StagingComparison {
        first,
        second,
        corpus_size: corpus.len(),
        relation,
        only_first_count,
        only_second_count,
        only_first,
        only_second,
    }
}
