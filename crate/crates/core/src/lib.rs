//! A laboratory for stage-preserving and safety-preserving language
//! embeddings.
//!
//! Three concrete languages live here:
//!
//! * [`machine`]: a stack machine language, the common compilation target;
//! * [`staged_source`]: an expression language with a compile-time escape
//!   operator `~( )`, its compiler, and a decidable safety judgment;
//! * [`host`]: a metaprogramming language whose compiler evaluates an
//!   arbitrary (fuel-bounded) computation over program codes at compile time.
//!
//! [`embedding`] builds the interpreter-based embeddings of the source
//! language into the host and checks them over corpora; [`kernel_tools`]
//! computes compiler kernels (which programs compile to the same target) and
//! compares the staging power of compiler pipelines.

pub mod cli;
pub mod embedding;
pub mod generators;
pub mod host;
pub mod ident;
pub mod kernel_tools;
pub mod machine;
pub mod reference;
pub mod staged_source;

pub use embedding::{embed_safe, embed_stage, Embedding, EmbeddingReport};
pub use host::{compile_u, HostProgram, HostTemplate, MetaExpr, MetaValue};
pub use ident::Ident;
pub use kernel_tools::{compare_staging, kernel_classes, CompilerKind, Corpus, KernelPartition};
pub use machine::{CompiledProgram, Env, Instruction, MachineCode, RunResult, DEFAULT_FUEL};
pub use staged_source::{compile_a, compile_a_safe, typecheck, SafetyJudgment, SourceTerm};
