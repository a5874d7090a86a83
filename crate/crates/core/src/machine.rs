//! The machine language: a small stack machine with relative forward jumps.
//!
//! Every compiler in the crate targets [`MachineCode`] and reports its outcome
//! as a [`CompiledProgram`]. Program equivalence is approximated by running
//! both programs over a finite suite of environments ([`obs_equiv`]).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::ident::Ident;

/// Default step budget for every fuel-bounded evaluation in the crate.
pub const DEFAULT_FUEL: u64 = 100_000;

/// Values each free variable ranges over in [`default_suite`].
pub const DEFAULT_SUITE_VALUES: [i64; 7] = [-3, -1, 0, 1, 2, 7, 100];

/// Upper bound on the number of environments in [`default_suite`].
pub const DEFAULT_SUITE_CAP: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Instruction {
    PushI(i64),
    LoadV(Ident),
    IAdd,
    ISub,
    IMul,
    ILt,
    IEq,
    /// Skip the next `d` instructions.
    Jmp(u32),
    /// Pop; skip the next `d` instructions when the popped value is zero.
    Jmpz(u32),
    Trap,
}

impl Instruction {
    pub fn mnemonic(&self) -> &'static str {
        match self {
            Instruction::PushI(_) => "PUSHI",
            Instruction::LoadV(_) => "LOADV",
            Instruction::IAdd => "IADD",
            Instruction::ISub => "ISUB",
            Instruction::IMul => "IMUL",
            Instruction::ILt => "ILT",
            Instruction::IEq => "IEQ",
            Instruction::Jmp(_) => "JMP",
            Instruction::Jmpz(_) => "JMPZ",
            Instruction::Trap => "TRAP",
        }
    }

    fn jump_offset(&self) -> Option<u32> {
        match self {
            Instruction::Jmp(d) | Instruction::Jmpz(d) => Some(*d),
            _ => None,
        }
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Instruction::PushI(n) => write!(f, "PUSHI {n}"),
            Instruction::LoadV(x) => write!(f, "LOADV {x}"),
            Instruction::Jmp(d) => write!(f, "JMP {d}"),
            Instruction::Jmpz(d) => write!(f, "JMPZ {d}"),
            other => f.write_str(other.mnemonic()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MachineError {
    #[error("jump at instruction {index} skips past the end of a {len}-instruction program")]
    JumpOutOfRange { index: usize, len: usize },
}

/// A machine program. Equality is structural and bit-exact.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct MachineCode {
    instrs: Vec<Instruction>,
}

impl MachineCode {
    /// Builds a program, rejecting jumps that land beyond one past the end.
    pub fn new(instrs: Vec<Instruction>) -> Result<Self, MachineError> {
        let len = instrs.len();
        for (index, ins) in instrs.iter().enumerate() {
            if let Some(d) = ins.jump_offset() {
                if index as u64 + 1 + d as u64 > len as u64 {
                    return Err(MachineError::JumpOutOfRange { index, len });
                }
            }
        }
        Ok(MachineCode { instrs })
    }

    /// For code generators that produce in-range jumps by construction.
    pub(crate) fn from_trusted(instrs: Vec<Instruction>) -> Self {
        debug_assert!(MachineCode::new(instrs.clone()).is_ok());
        MachineCode { instrs }
    }

    /// Unvalidated instruction sequence built at compile time by meta
    /// programs; must be revalidated before it is emitted.
    pub(crate) fn from_fragment(instrs: Vec<Instruction>) -> Self {
        MachineCode { instrs }
    }

    pub fn empty() -> Self {
        MachineCode::default()
    }

    pub fn instrs(&self) -> &[Instruction] {
        &self.instrs
    }

    pub fn len(&self) -> usize {
        self.instrs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instrs.is_empty()
    }

    /// Names loaded by `LOADV` anywhere in the program.
    pub fn free_vars(&self) -> BTreeSet<Ident> {
        self.instrs
            .iter()
            .filter_map(|i| match i {
                Instruction::LoadV(x) => Some(x.clone()),
                _ => None,
            })
            .collect()
    }

    /// Concatenation. Jumps stay in range because they are relative and forward.
    pub fn concat(&self, other: &MachineCode) -> MachineCode {
        let mut instrs = self.instrs.clone();
        instrs.extend(other.instrs.iter().cloned());
        MachineCode { instrs }
    }
}

impl fmt::Display for MachineCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_machine(self))
    }
}

impl Serialize for MachineCode {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.instrs.iter().map(|i| i.to_string()))
    }
}

/// Outcome of any compiler in the crate.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum CompiledProgram {
    Code(MachineCode),
    /// The designated output of a failed safety check.
    Unsafe,
    /// Compilation ran out of fuel; stands in for nontermination.
    Bottom,
    /// Plumbing failure: non-membership, escape type confusion, meta errors.
    Error(String),
}

impl CompiledProgram {
    pub fn code(&self) -> Option<&MachineCode> {
        match self {
            CompiledProgram::Code(m) => Some(m),
            _ => None,
        }
    }

    pub fn is_unsafe(&self) -> bool {
        matches!(self, CompiledProgram::Unsafe)
    }

    pub fn kind(&self) -> OutcomeKind {
        match self {
            CompiledProgram::Code(_) => OutcomeKind::Code,
            CompiledProgram::Unsafe => OutcomeKind::Unsafe,
            CompiledProgram::Bottom => OutcomeKind::Bottom,
            CompiledProgram::Error(_) => OutcomeKind::Error,
        }
    }
}

impl fmt::Display for CompiledProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CompiledProgram::Code(m) => write!(f, "{m}"),
            CompiledProgram::Unsafe => f.write_str("UNSAFE"),
            CompiledProgram::Bottom => f.write_str("BOTTOM"),
            CompiledProgram::Error(msg) => write!(f, "ERROR({msg})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutcomeKind {
    Code,
    Unsafe,
    Bottom,
    Error,
}

impl OutcomeKind {
    pub const ALL: [OutcomeKind; 4] = [
        OutcomeKind::Code,
        OutcomeKind::Unsafe,
        OutcomeKind::Bottom,
        OutcomeKind::Error,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OutcomeKind::Code => "code",
            OutcomeKind::Unsafe => "unsafe",
            OutcomeKind::Bottom => "bottom",
            OutcomeKind::Error => "error",
        }
    }
}

/// Variable bindings supplied to a machine run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize)]
pub struct Env(BTreeMap<Ident, i64>);

impl Env {
    pub fn new() -> Self {
        Env::default()
    }

    pub fn bind(&mut self, name: Ident, value: i64) -> &mut Self {
        self.0.insert(name, value);
        self
    }

    pub fn with(mut self, name: &str, value: i64) -> Self {
        let name = Ident::new(name).expect("valid identifier");
        self.0.insert(name, value);
        self
    }

    pub fn get(&self, name: &str) -> Option<i64> {
        self.0.get(name).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Ident, i64)> {
        self.0.iter().map(|(k, v)| (k, *v))
    }
}

impl FromIterator<(Ident, i64)> for Env {
    fn from_iter<I: IntoIterator<Item = (Ident, i64)>>(iter: I) -> Self {
        Env(iter.into_iter().collect())
    }
}

impl fmt::Display for Env {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (k, v) in &self.0 {
            if !first {
                f.write_str(" ")?;
            }
            first = false;
            write!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum RunResult {
    Value(i64),
    Trapped,
    FuelExhausted,
}

impl fmt::Display for RunResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunResult::Value(v) => write!(f, "{v}"),
            RunResult::Trapped => f.write_str("TRAP"),
            RunResult::FuelExhausted => f.write_str("FUEL"),
        }
    }
}

/// Why a run ended in [`RunResult::Trapped`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TrapCause {
    TrapInstruction,
    UnboundVariable(Ident),
    StackUnderflow,
    EmptyStackAtEnd,
}

impl fmt::Display for TrapCause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrapCause::TrapInstruction => f.write_str("TRAP instruction"),
            TrapCause::UnboundVariable(x) => write!(f, "unbound variable {x}"),
            TrapCause::StackUnderflow => f.write_str("stack underflow"),
            TrapCause::EmptyStackAtEnd => f.write_str("empty stack at end of program"),
        }
    }
}

/// A run together with its diagnostics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Execution {
    pub result: RunResult,
    pub trap: Option<TrapCause>,
    pub steps: u64,
}

pub fn run_machine(code: &MachineCode, env: &Env, fuel: u64) -> RunResult {
    execute(code, env, fuel).result
}

/// Runs `code` for at most `fuel` instruction steps.
///
/// Arithmetic wraps on overflow. `ILT`/`IEQ` push 1 for true and 0 for false.
pub fn execute(code: &MachineCode, env: &Env, fuel: u64) -> Execution {
    let instrs = code.instrs();
    let mut stack: Vec<i64> = Vec::new();
    let mut pc = 0usize;
    let mut steps = 0u64;

    let trap = |cause: TrapCause, steps: u64| Execution {
        result: RunResult::Trapped,
        trap: Some(cause),
        steps,
    };

    while pc < instrs.len() {
        if steps >= fuel {
            return Execution {
                result: RunResult::FuelExhausted,
                trap: None,
                steps,
            };
        }
        steps += 1;
        let mut next = pc + 1;
        match &instrs[pc] {
            Instruction::PushI(n) => stack.push(*n),
            Instruction::LoadV(x) => match env.get(x.as_str()) {
                Some(v) => stack.push(v),
                None => return trap(TrapCause::UnboundVariable(x.clone()), steps),
            },
            Instruction::IAdd
            | Instruction::ISub
            | Instruction::IMul
            | Instruction::ILt
            | Instruction::IEq => {
                let (Some(r), Some(l)) = (stack.pop(), stack.pop()) else {
                    return trap(TrapCause::StackUnderflow, steps);
                };
                stack.push(match &instrs[pc] {
                    Instruction::IAdd => l.wrapping_add(r),
                    Instruction::ISub => l.wrapping_sub(r),
                    Instruction::IMul => l.wrapping_mul(r),
                    Instruction::ILt => i64::from(l < r),
                    _ => i64::from(l == r),
                });
            }
            Instruction::Jmp(d) => next = pc + 1 + *d as usize,
            Instruction::Jmpz(d) => match stack.pop() {
                Some(0) => next = pc + 1 + *d as usize,
                Some(_) => {}
                None => return trap(TrapCause::StackUnderflow, steps),
            },
            Instruction::Trap => return trap(TrapCause::TrapInstruction, steps),
        }
        pc = next;
    }

    match stack.last() {
        Some(v) => Execution {
            result: RunResult::Value(*v),
            trap: None,
            steps,
        },
        None => trap(TrapCause::EmptyStackAtEnd, steps),
    }
}

/// Suite-restricted program equivalence.
///
/// `Unsafe`, `Bottom` and `Error` are each equivalent only to themselves
/// (error messages are not compared). Two code outcomes are equivalent when
/// they produce the same [`RunResult`] on every environment of `suite`.
pub fn obs_equiv(a: &CompiledProgram, b: &CompiledProgram, suite: &[Env], fuel: u64) -> bool {
    match (a, b) {
        (CompiledProgram::Code(x), CompiledProgram::Code(y)) => {
            x == y
                || suite
                    .iter()
                    .all(|env| run_machine(x, env, fuel) == run_machine(y, env, fuel))
        }
        _ => a.kind() == b.kind(),
    }
}

/// Deterministic input suite over `vars`.
///
/// Every variable ranges over [`DEFAULT_SUITE_VALUES`]. When the cross
/// product exceeds [`DEFAULT_SUITE_CAP`] environments, evenly strided rows of
/// it (in lexicographic order, first variable most significant) are kept.
pub fn default_suite<'a, I>(vars: I) -> Vec<Env>
where
    I: IntoIterator<Item = &'a Ident>,
{
    let vars: Vec<Ident> = vars
        .into_iter()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let radix = DEFAULT_SUITE_VALUES.len() as u128;
    let total = (0..vars.len()).fold(1u128, |acc, _| acc.saturating_mul(radix));
    let rows: Vec<u128> = if total <= DEFAULT_SUITE_CAP as u128 {
        (0..total).collect()
    } else {
        let cap = DEFAULT_SUITE_CAP as u128;
        (0..cap).map(|i| i * total / cap).collect()
    };
    rows.into_iter()
        .map(|mut row| {
            let mut digits = vec![0usize; vars.len()];
            for slot in digits.iter_mut().rev() {
                *slot = (row % radix) as usize;
                row /= radix;
            }
            vars.iter()
                .zip(digits)
                .map(|(v, d)| (v.clone(), DEFAULT_SUITE_VALUES[d]))
                .collect()
        })
        .collect()
}

/// The default suite for comparing two outcomes: all variables either loads.
pub fn default_suite_for(a: &CompiledProgram, b: &CompiledProgram) -> Vec<Env> {
    let mut vars = BTreeSet::new();
    for p in [a, b] {
        if let Some(m) = p.code() {
            vars.extend(m.free_vars());
        }
    }
    default_suite(&vars)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct MachineParseError {
    pub line: usize,
    pub message: String,
}

/// Parses the textual machine format: one instruction per line.
///
/// Blank lines and lines whose first non-space character is `#` are skipped.
pub fn parse_machine(text: &str) -> Result<MachineCode, MachineParseError> {
    let mut instrs = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let err = |message: String| MachineParseError { line, message };
        let mut words = trimmed.split_whitespace();
        let mnemonic = words.next().unwrap_or_default();
        let operands: Vec<&str> = words.collect();
        let arity = match mnemonic {
            "PUSHI" | "LOADV" | "JMP" | "JMPZ" => 1,
            "IADD" | "ISUB" | "IMUL" | "ILT" | "IEQ" | "TRAP" => 0,
            other => return Err(err(format!("unknown mnemonic {other:?}"))),
        };
        if operands.len() != arity {
            return Err(err(format!(
                "{mnemonic} takes {arity} operand(s), found {}",
                operands.len()
            )));
        }
        let offset = |s: &str| {
            s.parse::<u32>()
                .map_err(|_| err(format!("malformed jump offset {s:?}")))
        };
        instrs.push(match mnemonic {
            "PUSHI" => Instruction::PushI(
                operands[0]
                    .parse()
                    .map_err(|_| err(format!("malformed integer {:?}", operands[0])))?,
            ),
            "LOADV" => Instruction::LoadV(Ident::new(operands[0]).map_err(|e| err(e.to_string()))?),
            "JMP" => Instruction::Jmp(offset(operands[0])?),
            "JMPZ" => Instruction::Jmpz(offset(operands[0])?),
            "IADD" => Instruction::IAdd,
            "ISUB" => Instruction::ISub,
            "IMUL" => Instruction::IMul,
            "ILT" => Instruction::ILt,
            "IEQ" => Instruction::IEq,
            _ => Instruction::Trap,
        });
    }
    let lines: Vec<usize> = text
        .lines()
        .enumerate()
        .filter(|(_, l)| {
            let t = l.trim();
            !t.is_empty() && !t.starts_with('#')
        })
        .map(|(i, _)| i + 1)
        .collect();
    MachineCode::new(instrs).map_err(|e| {
        let MachineError::JumpOutOfRange { index, .. } = e;
        MachineParseError {
            line: lines[index],
            message: e.to_string(),
        }
    })
}

/// One instruction per line, no trailing newline.
pub fn format_machine(code: &MachineCode) -> String {
    code.instrs()
        .iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join("\n")
}

/// Parses an input suite: one environment per line as `name=value` pairs
/// separated by whitespace. `#` comment lines and blank lines are skipped; a
/// line consisting of `-` denotes the empty environment.
pub fn parse_suite(text: &str) -> Result<Vec<Env>, MachineParseError> {
    let mut suite = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if trimmed == "-" {
            suite.push(Env::new());
            continue;
        }
        let mut env = Env::new();
        for binding in trimmed.split_whitespace() {
            let (name, value) = parse_binding(binding).map_err(|message| MachineParseError { line, message })?;
            env.bind(name, value);
        }
        suite.push(env);
    }
    Ok(suite)
}

/// Parses a single `name=value` binding.
pub fn parse_binding(s: &str) -> Result<(Ident, i64), String> {
    let (name, value) = s
        .split_once('=')
        .ok_or_else(|| format!("expected name=value, found {s:?}"))?;
    let name = Ident::new(name.trim()).map_err(|e| e.to_string())?;
    let value = value
        .trim()
        .parse::<i64>()
        .map_err(|_| format!("malformed integer {value:?} for {name}"))?;
    Ok((name, value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use Instruction::*;

    fn id(s: &str) -> Ident {
        Ident::new(s).unwrap()
    }

    fn code(instrs: Vec<Instruction>) -> MachineCode {
        MachineCode::new(instrs).unwrap()
    }

    #[test]
    fn arithmetic() {
        let c = code(vec![PushI(2), PushI(3), IAdd]);
        assert_eq!(run_machine(&c, &Env::new(), 100), RunResult::Value(5));
        let c = code(vec![LoadV(id("x")), PushI(2), IAdd]);
        assert_eq!(run_machine(&c, &Env::new().with("x", 40), 100), RunResult::Value(42));
    }

    #[test]
    fn jmpz_skips_on_zero() {
        // pc0 push 0; pc1 pop 0 -> skip pc2; pc3 push 9.
        let c = code(vec![PushI(0), Jmpz(1), PushI(7), PushI(9)]);
        assert_eq!(run_machine(&c, &Env::new(), 100), RunResult::Value(9));
        // Nonzero falls through; top of stack is 9 with 7 beneath.
        let c = code(vec![PushI(1), Jmpz(1), PushI(7), PushI(9)]);
        assert_eq!(run_machine(&c, &Env::new(), 100), RunResult::Value(9));
        let c = code(vec![PushI(1), Jmpz(2), PushI(7), Jmp(1), PushI(9)]);
        assert_eq!(run_machine(&c, &Env::new(), 100), RunResult::Value(7));
    }

    #[test]
    fn comparisons_push_bits() {
        let c = code(vec![PushI(1), PushI(2), ILt]);
        assert_eq!(run_machine(&c, &Env::new(), 10), RunResult::Value(1));
        let c = code(vec![PushI(1), PushI(2), IEq]);
        assert_eq!(run_machine(&c, &Env::new(), 10), RunResult::Value(0));
    }

    #[test]
    fn traps() {
        let env = Env::new();
        assert_eq!(run_machine(&code(vec![Trap]), &env, 10), RunResult::Trapped);
        assert_eq!(run_machine(&code(vec![IAdd]), &env, 10), RunResult::Trapped);
        assert_eq!(run_machine(&code(vec![]), &env, 10), RunResult::Trapped);
        let ex = execute(&code(vec![LoadV(id("q"))]), &env, 10);
        assert_eq!(ex.trap, Some(TrapCause::UnboundVariable(id("q"))));
    }

    #[test]
    fn fuel_counts_steps() {
        let c = code(vec![PushI(2), PushI(3), IAdd]);
        assert_eq!(run_machine(&c, &Env::new(), 2), RunResult::FuelExhausted);
        assert_eq!(run_machine(&c, &Env::new(), 3), RunResult::Value(5));
    }

    #[test]
    fn wrapping_arithmetic() {
        let c = code(vec![PushI(i64::MAX), PushI(1), IAdd]);
        assert_eq!(run_machine(&c, &Env::new(), 10), RunResult::Value(i64::MIN));
    }

    #[test]
    fn rejects_out_of_range_jumps() {
        assert!(MachineCode::new(vec![Jmp(0)]).is_ok());
        assert!(MachineCode::new(vec![Jmp(1)]).is_err());
        assert!(MachineCode::new(vec![PushI(0), Jmpz(1), PushI(3)]).is_ok());
        assert!(MachineCode::new(vec![PushI(0), Jmpz(2), PushI(3)]).is_err());
    }

    #[test]
    fn singleton_outcome_classes() {
        let outcomes = [
            CompiledProgram::Unsafe,
            CompiledProgram::Bottom,
            CompiledProgram::Error("a".into()),
        ];
        for (i, a) in outcomes.iter().enumerate() {
            for (j, b) in outcomes.iter().enumerate() {
                assert_eq!(obs_equiv(a, b, &[Env::new()], 10), i == j);
            }
        }
        assert!(!obs_equiv(
            &CompiledProgram::Unsafe,
            &CompiledProgram::Code(code(vec![Trap])),
            &[Env::new()],
            10
        ));
    }

    #[test]
    fn commuted_addition_is_equivalent() {
        let a = CompiledProgram::Code(code(vec![PushI(2), LoadV(id("x")), IAdd]));
        let b = CompiledProgram::Code(code(vec![LoadV(id("x")), PushI(2), IAdd]));
        let suite: Vec<Env> = [-3, 0, 5].iter().map(|v| Env::new().with("x", *v)).collect();
        assert!(obs_equiv(&a, &b, &suite, 100));
        let c = CompiledProgram::Code(code(vec![LoadV(id("x")), PushI(3), IAdd]));
        assert!(!obs_equiv(&a, &c, &suite, 100));
    }

    #[test]
    fn parse_and_format() {
        assert_eq!(parse_machine("PUSHI 2\nIADD").unwrap(), code(vec![PushI(2), IAdd]));
        let e = parse_machine("FOO 3").unwrap_err();
        assert_eq!(e.line, 1);
        let e = parse_machine("# header\nPUSHI 1\nPUSHI x").unwrap_err();
        assert_eq!(e.line, 3);
        assert!(parse_machine("IADD 1").is_err());
        assert!(parse_machine("JMP -1").is_err());
        let e = parse_machine("PUSHI 1\n\nJMP 4").unwrap_err();
        assert_eq!(e.line, 3);
        let c = code(vec![PushI(-7), LoadV(id("x")), Jmpz(1), Trap, IEq]);
        assert_eq!(parse_machine(&format_machine(&c)).unwrap(), c);
        assert_eq!(parse_machine("").unwrap(), MachineCode::empty());
    }

    #[test]
    fn default_suite_shape() {
        assert_eq!(default_suite(&[]), vec![Env::new()]);
        let one = default_suite(&[id("x")]);
        assert_eq!(one.len(), 7);
        assert_eq!(one[0].get("x"), Some(-3));
        assert_eq!(default_suite(&[id("x"), id("y")]).len(), 49);
        let three = default_suite(&[id("x"), id("y"), id("z")]);
        assert_eq!(three.len(), DEFAULT_SUITE_CAP);
        assert!(three.iter().any(|e| e.get("x") == Some(100)));
        assert_eq!(three, default_suite(&[id("z"), id("y"), id("x")]));
    }

    #[test]
    fn suite_file() {
        let s = parse_suite("# envs\nx=1 y=-2\n-\n").unwrap();
        assert_eq!(s, vec![Env::new().with("x", 1).with("y", -2), Env::new()]);
        assert!(parse_suite("x=").is_err());
    }
}
