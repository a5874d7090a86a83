//! Reference implementations used as test oracles.
//!
//! Everything here is written directly against the source syntax tree and
//! deliberately shares no code with the compilers it checks: evaluation,
//! typing and code generation are re-derived from the language definition.

use crate::host::Code;
use crate::machine::{Env, Instruction, MachineCode};
use crate::staged_source::{ArithOp, CmpOp, SourceTerm};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefValue {
    Int(i64),
    Bool(bool),
}

impl RefValue {
    /// Machine representation: booleans are 0/1.
    pub fn as_machine_int(self) -> i64 {
        match self {
            RefValue::Int(n) => n,
            RefValue::Bool(b) => b as i64,
        }
    }
}

fn arith(op: ArithOp, l: i64, r: i64) -> i64 {
    match op {
        ArithOp::Add => l.wrapping_add(r),
        ArithOp::Sub => l.wrapping_sub(r),
        ArithOp::Mul => l.wrapping_mul(r),
    }
}

fn compare(op: CmpOp, l: i64, r: i64) -> bool {
    match op {
        CmpOp::Lt => l < r,
        CmpOp::Eq => l == r,
    }
}

/// Direct big-step evaluation of a whole program under `env`, escapes
/// included. `None` on a type error or an unbound variable.
pub fn eval_source(term: &SourceTerm, env: &Env) -> Option<RefValue> {
    let int = |t: &SourceTerm| match eval_source(t, env)? {
        RefValue::Int(n) => Some(n),
        RefValue::Bool(_) => None,
    };
    match term {
        SourceTerm::Lit(n) => Some(RefValue::Int(*n)),
        SourceTerm::BoolLit(b) => Some(RefValue::Bool(*b)),
        SourceTerm::Var(x) => env.get(x.as_str()).map(RefValue::Int),
        SourceTerm::BinOp(op, l, r) => Some(RefValue::Int(arith(*op, int(l)?, int(r)?))),
        SourceTerm::Cmp(op, l, r) => Some(RefValue::Bool(compare(*op, int(l)?, int(r)?))),
        SourceTerm::If(c, t, e) => match eval_source(c, env)? {
            RefValue::Bool(true) => eval_source(t, env),
            RefValue::Bool(false) => eval_source(e, env),
            RefValue::Int(_) => None,
        },
        SourceTerm::Escape(b) => eval_source(b, &Env::new()),
    }
}

/// Constant folding on source terms; the specification of
/// [`crate::host::library::CONST_FOLD`].
pub fn fold_constants(term: &SourceTerm) -> SourceTerm {
    match term {
        SourceTerm::Lit(_) | SourceTerm::BoolLit(_) | SourceTerm::Var(_) => term.clone(),
        SourceTerm::BinOp(op, l, r) => match (fold_constants(l), fold_constants(r)) {
            (SourceTerm::Lit(a), SourceTerm::Lit(b)) => SourceTerm::Lit(arith(*op, a, b)),
            (l, r) => SourceTerm::BinOp(*op, Box::new(l), Box::new(r)),
        },
        SourceTerm::Cmp(op, l, r) => match (fold_constants(l), fold_constants(r)) {
            (SourceTerm::Lit(a), SourceTerm::Lit(b)) => SourceTerm::BoolLit(compare(*op, a, b)),
            (l, r) => SourceTerm::Cmp(*op, Box::new(l), Box::new(r)),
        },
        SourceTerm::If(c, t, e) => match fold_constants(c) {
            SourceTerm::BoolLit(true) => fold_constants(t),
            SourceTerm::BoolLit(false) => fold_constants(e),
            c => SourceTerm::If(Box::new(c), Box::new(fold_constants(t)), Box::new(fold_constants(e))),
        },
        SourceTerm::Escape(b) => SourceTerm::Escape(Box::new(fold_constants(b))),
    }
}

enum Task<'a> {
    Visit(&'a SourceTerm),
    Emit(Instruction),
    /// Reserve a jump slot; its offset is counted from the next instruction.
    Open(usize),
    /// Fill a reserved slot with a jump over everything emitted since.
    Close(usize, fn(u32) -> Instruction),
}

/// Reference compiler for source programs.
///
/// Escapes are evaluated with [`eval_source`]; code is produced by an explicit
/// worklist with back-patched jumps rather than by structural recursion.
/// `None` for non-members and for escapes that fail to evaluate.
pub fn compile_reference(term: &SourceTerm) -> Option<MachineCode> {
    if !escapes_closed(term) {
        return None;
    }
    let mut out: Vec<Instruction> = Vec::new();
    // jump id -> index of its placeholder
    let mut slots: Vec<usize> = Vec::new();
    let mut tasks = vec![Task::Visit(term)];
    while let Some(task) = tasks.pop() {
        match task {
            Task::Emit(i) => out.push(i),
            Task::Open(id) => {
                debug_assert_eq!(id, slots.len());
                slots.push(out.len());
                out.push(Instruction::Trap);
            }
            Task::Close(id, make) => {
                let slot = slots[id];
                out[slot] = make((out.len() - slot - 1) as u32);
            }
            Task::Visit(t) => match t {
                SourceTerm::Lit(n) => out.push(Instruction::PushI(*n)),
                SourceTerm::BoolLit(b) => out.push(Instruction::PushI(if *b { 1 } else { 0 })),
                SourceTerm::Var(x) => out.push(Instruction::LoadV(x.clone())),
                SourceTerm::Escape(b) => {
                    let v = eval_source(b, &Env::new())?;
                    out.push(Instruction::PushI(v.as_machine_int()));
                }
                SourceTerm::BinOp(op, l, r) => {
                    let ins = match op {
                        ArithOp::Add => Instruction::IAdd,
                        ArithOp::Sub => Instruction::ISub,
                        ArithOp::Mul => Instruction::IMul,
                    };
                    tasks.extend([Task::Emit(ins), Task::Visit(r), Task::Visit(l)]);
                }
                SourceTerm::Cmp(op, l, r) => {
                    let ins = match op {
                        CmpOp::Lt => Instruction::ILt,
                        CmpOp::Eq => Instruction::IEq,
                    };
                    tasks.extend([Task::Emit(ins), Task::Visit(r), Task::Visit(l)]);
                }
                SourceTerm::If(c, th, el) => {
                    // ids are handed out in the order the Open tasks will run
                    let skip_then = slots.len() + count_ifs(c);
                    let skip_else = skip_then + 1 + count_ifs(th);
                    // cond; JMPZ over then and its JMP; then; JMP over else; else
                    tasks.extend([
                        Task::Close(skip_else, Instruction::Jmp),
                        Task::Visit(el),
                        Task::Close(skip_then, Instruction::Jmpz),
                        Task::Open(skip_else),
                        Task::Visit(th),
                        Task::Open(skip_then),
                        Task::Visit(c),
                    ]);
                }
            },
        }
    }
    MachineCode::new(out).ok()
}

/// Number of jump pairs a subterm will reserve (escapes reserve none).
fn count_ifs(t: &SourceTerm) -> usize {
    match t {
        SourceTerm::Lit(_) | SourceTerm::BoolLit(_) | SourceTerm::Var(_) | SourceTerm::Escape(_) => 0,
        SourceTerm::BinOp(_, l, r) | SourceTerm::Cmp(_, l, r) => count_ifs(l) + count_ifs(r),
        SourceTerm::If(c, a, b) => 2 + count_ifs(c) + count_ifs(a) + count_ifs(b),
    }
}

fn escapes_closed(term: &SourceTerm) -> bool {
    fn closed(t: &SourceTerm) -> bool {
        match t {
            SourceTerm::Var(_) => false,
            SourceTerm::Lit(_) | SourceTerm::BoolLit(_) => true,
            SourceTerm::BinOp(_, l, r) | SourceTerm::Cmp(_, l, r) => closed(l) && closed(r),
            SourceTerm::If(c, a, b) => closed(c) && closed(a) && closed(b),
            SourceTerm::Escape(b) => closed(b),
        }
    }
    match term {
        SourceTerm::Escape(b) => closed(b),
        SourceTerm::Lit(_) | SourceTerm::BoolLit(_) | SourceTerm::Var(_) => true,
        SourceTerm::BinOp(_, l, r) | SourceTerm::Cmp(_, l, r) => escapes_closed(l) && escapes_closed(r),
        SourceTerm::If(c, a, b) => escapes_closed(c) && escapes_closed(a) && escapes_closed(b),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RefTy {
    Int,
    Bool,
}

/// Reference typing: `Some(is_bool)` when the program is judged safe.
/// Free variables are integers; escape bodies must be closed.
pub fn type_reference(term: &SourceTerm) -> Option<bool> {
    fn ty(t: &SourceTerm, in_escape: bool) -> Option<RefTy> {
        let ints = |l: &SourceTerm, r: &SourceTerm| {
            Some(ty(l, in_escape)? == RefTy::Int && ty(r, in_escape)? == RefTy::Int)
        };
        match t {
            SourceTerm::Lit(_) => Some(RefTy::Int),
            SourceTerm::BoolLit(_) => Some(RefTy::Bool),
            SourceTerm::Var(_) => (!in_escape).then_some(RefTy::Int),
            SourceTerm::BinOp(_, l, r) => ints(l, r)?.then_some(RefTy::Int),
            SourceTerm::Cmp(_, l, r) => ints(l, r)?.then_some(RefTy::Bool),
            SourceTerm::If(c, a, b) => {
                if ty(c, in_escape)? != RefTy::Bool {
                    return None;
                }
                let (ta, tb) = (ty(a, in_escape)?, ty(b, in_escape)?);
                (ta == tb).then_some(ta)
            }
            SourceTerm::Escape(b) => ty(b, true),
        }
    }
    ty(term, false).map(|t| t == RefTy::Bool)
}

/// Reference for the safety-layered compiler.
pub fn compile_safe_reference(term: &SourceTerm) -> Option<Code> {
    if !escapes_closed(term) {
        return None;
    }
    match type_reference(term) {
        None => Some(Code::Unsafe),
        Some(_) => compile_reference(term).map(Code::Machine),
    }
}
