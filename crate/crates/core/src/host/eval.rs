use std::fmt;
use std::rc::Rc;

use thiserror::Error;

use super::{MetaExpr, MetaOp, Prim};
use crate::ident::Ident;
use crate::machine::{CompiledProgram, Instruction, MachineCode};
use crate::staged_source::{compile_a, compile_a_safe, typecheck, ArithOp, CmpOp, SourceTerm};

/// Deepest source code the constructor primitives will build. Keeps every
/// recursive pass over source terms well inside the native stack.
const MAX_CODE_DEPTH: usize = 2048;

#[derive(Clone)]
pub struct Closure {
    pub param: Ident,
    pub body: Rc<MetaExpr>,
    env: Scope,
}

impl fmt::Debug for Closure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(lambda ({}) {})", self.param, self.body)
    }
}

/// Values of the compile-time language.
#[derive(Debug, Clone)]
pub enum MetaValue {
    Int(i64),
    Bool(bool),
    Closure(Rc<Closure>),
    /// Fixed point of a function value.
    Rec(Rc<MetaValue>),
    /// A primitive with the arguments received so far.
    Prim(Prim, Vec<MetaValue>),
    Nil,
    Cons(Rc<MetaValue>, Rc<MetaValue>),
    CodeA(Rc<SourceTerm>),
    CodeM(Rc<MachineCode>),
    /// Code of the `unsafe` outcome.
    Unsafe,
    /// Code of a compilation that did not terminate within its fuel.
    BottomMark,
}

impl MetaValue {
    pub fn kind_name(&self) -> &'static str {
        match self {
            MetaValue::Int(_) => "integer",
            MetaValue::Bool(_) => "boolean",
            MetaValue::Closure(_) | MetaValue::Rec(_) | MetaValue::Prim(..) => "function",
            MetaValue::Nil | MetaValue::Cons(..) => "list",
            MetaValue::CodeA(_) => "source code",
            MetaValue::CodeM(_) => "machine code",
            MetaValue::Unsafe => "unsafe code",
            MetaValue::BottomMark => "bottom code",
        }
    }

    fn is_function(&self) -> bool {
        matches!(self, MetaValue::Closure(_) | MetaValue::Rec(_) | MetaValue::Prim(..))
    }

    /// Structural equality; `None` when either side contains a function.
    pub fn structural_eq(&self, other: &MetaValue) -> Option<bool> {
        use MetaValue::*;
        Some(match (self, other) {
            (a, b) if a.is_function() || b.is_function() => return None,
            (Int(a), Int(b)) => a == b,
            (Bool(a), Bool(b)) => a == b,
            (Nil, Nil) | (Unsafe, Unsafe) | (BottomMark, BottomMark) => true,
            (Cons(h1, t1), Cons(h2, t2)) => h1.structural_eq(h2)? && t1.structural_eq(t2)?,
            (CodeA(a), CodeA(b)) => a == b,
            (CodeM(a), CodeM(b)) => a == b,
            _ => false,
        })
    }
}

impl PartialEq for MetaValue {
    fn eq(&self, other: &MetaValue) -> bool {
        match (self, other) {
            (MetaValue::Closure(a), MetaValue::Closure(b)) => Rc::ptr_eq(a, b),
            (MetaValue::Rec(a), MetaValue::Rec(b)) => Rc::ptr_eq(a, b),
            (MetaValue::Prim(p, xs), MetaValue::Prim(q, ys)) => p == q && xs == ys,
            (a, b) => a.structural_eq(b).unwrap_or(false),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetaFailure {
    #[error("meta evaluation ran out of fuel")]
    FuelExhausted,
    #[error("{0}")]
    Error(String),
}

fn fail<T>(msg: impl Into<String>) -> Result<T, MetaFailure> {
    Err(MetaFailure::Error(msg.into()))
}

#[derive(Debug)]
struct Binding {
    name: Ident,
    value: MetaValue,
    next: Scope,
}

#[derive(Debug, Clone, Default)]
struct Scope(Option<Rc<Binding>>);

impl Scope {
    fn bind(&self, name: Ident, value: MetaValue) -> Scope {
        Scope(Some(Rc::new(Binding {
            name,
            value,
            next: self.clone(),
        })))
    }

    fn lookup(&self, name: &Ident) -> Option<&MetaValue> {
        let mut cur = self.0.as_deref();
        while let Some(b) = cur {
            if &b.name == name {
                return Some(&b.value);
            }
            cur = b.next.0.as_deref();
        }
        None
    }
}

#[derive(Debug, Clone, Copy)]
enum ListOp {
    Head,
    Tail,
    IsNil,
}

enum Frame {
    /// Function evaluated next comes the argument.
    EvalArg(Rc<MetaExpr>, Scope),
    /// Argument evaluated; apply this function to it.
    Call(MetaValue),
    /// Apply the incoming function value to this argument.
    CallWith(MetaValue),
    Fix,
    Branch(Rc<MetaExpr>, Rc<MetaExpr>, Scope),
    BinRight(MetaOp, Rc<MetaExpr>, Scope),
    BinApply(MetaOp, MetaValue),
    ConsTail(Rc<MetaExpr>, Scope),
    ConsBuild(MetaValue),
    List(ListOp),
}

enum State {
    Eval(Rc<MetaExpr>, Scope),
    Return(MetaValue),
}

/// Call-by-value evaluation of a closed meta expression within `fuel` steps.
///
/// The evaluator keeps its continuation on the heap, so deep or divergent
/// recursion exhausts fuel instead of the native stack.
pub fn meta_eval(expr: &MetaExpr, fuel: u64) -> Result<MetaValue, MetaFailure> {
    let mut machine = Machine {
        fuel,
        used: 0,
        stack: Vec::new(),
    };
    machine.run(Rc::new(expr.clone()))
}

struct Machine {
    fuel: u64,
    used: u64,
    stack: Vec<Frame>,
}

impl Machine {
    fn run(&mut self, expr: Rc<MetaExpr>) -> Result<MetaValue, MetaFailure> {
        let mut state = State::Eval(expr, Scope::default());
        loop {
            if self.used >= self.fuel {
                return Err(MetaFailure::FuelExhausted);
            }
            self.used += 1;
            state = match state {
                State::Eval(expr, scope) => self.eval(expr, scope)?,
                State::Return(value) => match self.stack.pop() {
                    None => return Ok(value),
                    Some(frame) => self.resume(frame, value)?,
                },
            };
        }
    }

    fn eval(&mut self, expr: Rc<MetaExpr>, scope: Scope) -> Result<State, MetaFailure> {
        let value = match &*expr {
            MetaExpr::Int(n) => MetaValue::Int(*n),
            MetaExpr::Bool(b) => MetaValue::Bool(*b),
            MetaExpr::Var(x) => match scope.lookup(x) {
                Some(v) => v.clone(),
                None => return fail(format!("unbound variable {x}")),
            },
            MetaExpr::Lambda(param, body) => MetaValue::Closure(Rc::new(Closure {
                param: param.clone(),
                body: body.clone(),
                env: scope,
            })),
            MetaExpr::Prim(p) => MetaValue::Prim(*p, Vec::new()),
            MetaExpr::QuoteA(t) => MetaValue::CodeA(t.clone()),
            MetaExpr::QuoteM(m) => MetaValue::CodeM(m.clone()),
            MetaExpr::UnsafeCode => MetaValue::Unsafe,
            MetaExpr::Nil => MetaValue::Nil,
            MetaExpr::Hole => return fail("unfilled template hole"),
            MetaExpr::Apply(f, a) => {
                self.stack.push(Frame::EvalArg(a.clone(), scope.clone()));
                return Ok(State::Eval(f.clone(), scope));
            }
            MetaExpr::Fix(f) => {
                self.stack.push(Frame::Fix);
                return Ok(State::Eval(f.clone(), scope));
            }
            MetaExpr::If(c, t, e) => {
                self.stack.push(Frame::Branch(t.clone(), e.clone(), scope.clone()));
                return Ok(State::Eval(c.clone(), scope));
            }
            MetaExpr::BinPrim(op, l, r) => {
                self.stack.push(Frame::BinRight(*op, r.clone(), scope.clone()));
                return Ok(State::Eval(l.clone(), scope));
            }
            MetaExpr::Cons(h, t) => {
                self.stack.push(Frame::ConsTail(t.clone(), scope.clone()));
                return Ok(State::Eval(h.clone(), scope));
            }
            MetaExpr::Head(e) | MetaExpr::Tail(e) | MetaExpr::IsNil(e) => {
                let op = match &*expr {
                    MetaExpr::Head(_) => ListOp::Head,
                    MetaExpr::Tail(_) => ListOp::Tail,
                    _ => ListOp::IsNil,
                };
                self.stack.push(Frame::List(op));
                return Ok(State::Eval(e.clone(), scope));
            }
        };
        Ok(State::Return(value))
    }

    fn resume(&mut self, frame: Frame, value: MetaValue) -> Result<State, MetaFailure> {
        Ok(match frame {
            Frame::EvalArg(arg, scope) => {
                self.stack.push(Frame::Call(value));
                State::Eval(arg, scope)
            }
            Frame::Call(f) => self.apply(f, value)?,
            Frame::CallWith(arg) => self.apply(value, arg)?,
            Frame::Fix => {
                if !value.is_function() {
                    return fail(format!("fix expects a function, got {}", value.kind_name()));
                }
                State::Return(MetaValue::Rec(Rc::new(value)))
            }
            Frame::Branch(t, e, scope) => match value {
                MetaValue::Bool(true) => State::Eval(t, scope),
                MetaValue::Bool(false) => State::Eval(e, scope),
                other => return fail(format!("if expects a boolean, got {}", other.kind_name())),
            },
            Frame::BinRight(op, r, scope) => {
                self.stack.push(Frame::BinApply(op, value));
                State::Eval(r, scope)
            }
            Frame::BinApply(op, l) => State::Return(binary(op, &l, &value)?),
            Frame::ConsTail(t, scope) => {
                self.stack.push(Frame::ConsBuild(value));
                State::Eval(t, scope)
            }
            Frame::ConsBuild(head) => match value {
                MetaValue::Nil | MetaValue::Cons(..) => {
                    State::Return(MetaValue::Cons(Rc::new(head), Rc::new(value)))
                }
                other => return fail(format!("cons expects a list tail, got {}", other.kind_name())),
            },
            Frame::List(op) => State::Return(match (op, value) {
                (ListOp::IsNil, MetaValue::Nil) => MetaValue::Bool(true),
                (ListOp::IsNil, MetaValue::Cons(..)) => MetaValue::Bool(false),
                (ListOp::Head, MetaValue::Cons(h, _)) => (*h).clone(),
                (ListOp::Tail, MetaValue::Cons(_, t)) => (*t).clone(),
                (op, other) => {
                    return fail(format!("{op:?} applied to {}", other.kind_name()).to_lowercase())
                }
            }),
        })
    }

    fn apply(&mut self, f: MetaValue, arg: MetaValue) -> Result<State, MetaFailure> {
        match f {
            MetaValue::Closure(c) => Ok(State::Eval(c.body.clone(), c.env.bind(c.param.clone(), arg))),
            MetaValue::Rec(g) => {
                // fix g = g (fix g): unroll once, then apply to the argument.
                self.stack.push(Frame::CallWith(arg));
                let inner = (*g).clone();
                self.apply(inner, MetaValue::Rec(g))
            }
            MetaValue::Prim(p, mut args) => {
                args.push(arg);
                if args.len() < p.arity() {
                    Ok(State::Return(MetaValue::Prim(p, args)))
                } else {
                    let remaining = self.fuel.saturating_sub(self.used);
                    Ok(State::Return(call_prim(p, &args, remaining)?))
                }
            }
            other => fail(format!("cannot apply {}", other.kind_name())),
        }
    }
}

fn binary(op: MetaOp, l: &MetaValue, r: &MetaValue) -> Result<MetaValue, MetaFailure> {
    if op == MetaOp::Eq {
        return match l.structural_eq(r) {
            Some(b) => Ok(MetaValue::Bool(b)),
            None => fail("cannot compare functions"),
        };
    }
    let (MetaValue::Int(a), MetaValue::Int(b)) = (l, r) else {
        return fail(format!(
            "`{}` expects integers, got {} and {}",
            op.symbol(),
            l.kind_name(),
            r.kind_name()
        ));
    };
    Ok(match op {
        MetaOp::Add => MetaValue::Int(a.wrapping_add(*b)),
        MetaOp::Sub => MetaValue::Int(a.wrapping_sub(*b)),
        MetaOp::Mul => MetaValue::Int(a.wrapping_mul(*b)),
        MetaOp::Lt => MetaValue::Bool(a < b),
        MetaOp::Eq => unreachable!(),
    })
}

fn source_arg<'a>(p: Prim, v: &'a MetaValue) -> Result<&'a SourceTerm, MetaFailure> {
    match v {
        MetaValue::CodeA(t) => Ok(t),
        other => fail(format!("{} expects source code, got {}", p.name(), other.kind_name())),
    }
}

fn machine_arg<'a>(p: Prim, v: &'a MetaValue) -> Result<&'a MachineCode, MetaFailure> {
    match v {
        MetaValue::CodeM(m) => Ok(m),
        other => fail(format!("{} expects machine code, got {}", p.name(), other.kind_name())),
    }
}

fn int_arg(p: Prim, v: &MetaValue) -> Result<i64, MetaFailure> {
    match v {
        MetaValue::Int(n) => Ok(*n),
        other => fail(format!("{} expects an integer, got {}", p.name(), other.kind_name())),
    }
}

fn offset_arg(p: Prim, v: &MetaValue) -> Result<u32, MetaFailure> {
    let n = int_arg(p, v)?;
    u32::try_from(n).or_else(|_| fail(format!("{} offset {n} out of range", p.name())))
}

fn source_value(term: SourceTerm) -> Result<MetaValue, MetaFailure> {
    if term.depth() > MAX_CODE_DEPTH {
        return fail(format!("source code nested deeper than {MAX_CODE_DEPTH}"));
    }
    Ok(MetaValue::CodeA(Rc::new(term)))
}

fn fragment(instrs: Vec<Instruction>) -> MetaValue {
    MetaValue::CodeM(Rc::new(MachineCode::from_fragment(instrs)))
}

fn outcome_value(outcome: CompiledProgram) -> Result<MetaValue, MetaFailure> {
    match outcome {
        CompiledProgram::Code(m) => Ok(MetaValue::CodeM(Rc::new(m))),
        CompiledProgram::Unsafe => Ok(MetaValue::Unsafe),
        CompiledProgram::Bottom => Ok(MetaValue::BottomMark),
        CompiledProgram::Error(msg) => fail(msg),
    }
}

fn call_prim(p: Prim, args: &[MetaValue], fuel: u64) -> Result<MetaValue, MetaFailure> {
    let arith = |k: i64| match k {
        0 => Some(ArithOp::Add),
        1 => Some(ArithOp::Sub),
        2 => Some(ArithOp::Mul),
        _ => None,
    };
    let cmp = |k: i64| match k {
        0 => Some(CmpOp::Lt),
        1 => Some(CmpOp::Eq),
        _ => None,
    };
    match p {
        Prim::CompileA => outcome_value(compile_a(source_arg(p, &args[0])?, fuel)),
        Prim::CompileASafe => outcome_value(compile_a_safe(source_arg(p, &args[0])?, fuel)),
        Prim::TypecheckA => Ok(MetaValue::Bool(typecheck(source_arg(p, &args[0])?).is_safe())),
        Prim::AKind => Ok(MetaValue::Int(match source_arg(p, &args[0])? {
            SourceTerm::Lit(_) => 0,
            SourceTerm::BoolLit(_) => 1,
            SourceTerm::Var(_) => 2,
            SourceTerm::BinOp(..) => 3,
            SourceTerm::Cmp(..) => 4,
            SourceTerm::If(..) => 5,
            SourceTerm::Escape(_) => 6,
        })),
        Prim::AOp => match source_arg(p, &args[0])? {
            SourceTerm::BinOp(op, ..) => Ok(MetaValue::Int(match op {
                ArithOp::Add => 0,
                ArithOp::Sub => 1,
                ArithOp::Mul => 2,
            })),
            SourceTerm::Cmp(op, ..) => Ok(MetaValue::Int(match op {
                CmpOp::Lt => 0,
                CmpOp::Eq => 1,
            })),
            _ => fail("a_op expects an operator node"),
        },
        Prim::AChild => {
            let term = source_arg(p, &args[0])?;
            let i = int_arg(p, &args[1])?;
            let children = term.children();
            usize::try_from(i)
                .ok()
                .and_then(|i| children.get(i))
                .map(|c| MetaValue::CodeA(Rc::new((*c).clone())))
                .ok_or_else(|| MetaFailure::Error(format!("a_child index {i} out of range")))
        }
        Prim::AInt => match source_arg(p, &args[0])? {
            SourceTerm::Lit(n) => Ok(MetaValue::Int(*n)),
            other => fail(format!("a_int expects an integer literal, got `{other}`")),
        },
        Prim::ABool => match source_arg(p, &args[0])? {
            SourceTerm::BoolLit(b) => Ok(MetaValue::Bool(*b)),
            other => fail(format!("a_bool expects a boolean literal, got `{other}`")),
        },
        Prim::AMkLit => Ok(MetaValue::CodeA(Rc::new(SourceTerm::Lit(int_arg(p, &args[0])?)))),
        Prim::AMkBool => match &args[0] {
            MetaValue::Bool(b) => Ok(MetaValue::CodeA(Rc::new(SourceTerm::BoolLit(*b)))),
            other => fail(format!("a_mk_bool expects a boolean, got {}", other.kind_name())),
        },
        Prim::AMkBinop => {
            let k = int_arg(p, &args[0])?;
            let op = arith(k).ok_or_else(|| MetaFailure::Error(format!("unknown arithmetic operator {k}")))?;
            let (l, r) = (source_arg(p, &args[1])?, source_arg(p, &args[2])?);
            source_value(SourceTerm::binop(op, l.clone(), r.clone()))
        }
        Prim::AMkCmp => {
            let k = int_arg(p, &args[0])?;
            let op = cmp(k).ok_or_else(|| MetaFailure::Error(format!("unknown comparison operator {k}")))?;
            let (l, r) = (source_arg(p, &args[1])?, source_arg(p, &args[2])?);
            source_value(SourceTerm::cmp(op, l.clone(), r.clone()))
        }
        Prim::AMkIf => {
            let c = source_arg(p, &args[0])?;
            let t = source_arg(p, &args[1])?;
            let e = source_arg(p, &args[2])?;
            source_value(SourceTerm::if_(c.clone(), t.clone(), e.clone()))
        }
        Prim::AMkEscape => source_value(SourceTerm::escape(source_arg(p, &args[0])?.clone())),
        Prim::MLen => Ok(MetaValue::Int(machine_arg(p, &args[0])?.len() as i64)),
        Prim::MConcat => {
            let (a, b) = (machine_arg(p, &args[0])?, machine_arg(p, &args[1])?);
            Ok(MetaValue::CodeM(Rc::new(a.concat(b))))
        }
        Prim::MPushi => Ok(fragment(vec![Instruction::PushI(int_arg(p, &args[0])?)])),
        Prim::MOp => {
            let ins = match int_arg(p, &args[0])? {
                0 => Instruction::IAdd,
                1 => Instruction::ISub,
                2 => Instruction::IMul,
                3 => Instruction::ILt,
                4 => Instruction::IEq,
                5 => Instruction::Trap,
                k => return fail(format!("m_op index {k} out of range")),
            };
            Ok(fragment(vec![ins]))
        }
        Prim::MJmp => Ok(fragment(vec![Instruction::Jmp(offset_arg(p, &args[0])?)])),
        Prim::MJmpz => Ok(fragment(vec![Instruction::Jmpz(offset_arg(p, &args[0])?)])),
        Prim::MLoadv => match source_arg(p, &args[0])? {
            SourceTerm::Var(x) => Ok(fragment(vec![Instruction::LoadV(x.clone())])),
            other => fail(format!("m_loadv expects a variable, got `{other}`")),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::host::parse_meta_expr;

    fn eval(s: &str) -> Result<MetaValue, MetaFailure> {
        meta_eval(&parse_meta_expr(s).unwrap(), 100_000)
    }

    #[test]
    fn recursion_through_fix() {
        let fact = "((fix (lambda (f) (lambda (n) (if (< n 1) 1 (* n (f (- n 1))))))) 10)";
        assert_eq!(eval(fact), Ok(MetaValue::Int(3_628_800)));
    }

    #[test]
    fn deep_recursion_does_not_overflow() {
        let count = "((fix (lambda (f) (lambda (n) (if (= n 0) 0 (+ 1 (f (- n 1))))))) 20000)";
        assert_eq!(meta_eval(&parse_meta_expr(count).unwrap(), 10_000_000), Ok(MetaValue::Int(20000)));
    }

    #[test]
    fn lists() {
        assert_eq!(eval("(head (tail (cons 1 (cons 2 nil))))"), Ok(MetaValue::Int(2)));
        assert_eq!(eval("(nil? nil)"), Ok(MetaValue::Bool(true)));
        assert!(eval("(cons 1 2)").is_err());
        assert!(eval("(tail nil)").is_err());
    }

    #[test]
    fn destructing_wrong_constructor_fails() {
        assert!(eval(r#"(a_int (quoteA "x"))"#).is_err());
        assert!(eval(r#"(m_len (quoteA "x"))"#).is_err());
        assert!(eval("(3 4)").is_err());
        assert!(eval("(fix 3)").is_err());
        assert!(eval("(if 1 2 3)").is_err());
    }

    #[test]
    fn code_primitives() {
        assert_eq!(eval(r#"(a_kind (quoteA "x + 1"))"#), Ok(MetaValue::Int(3)));
        assert_eq!(
            eval(r#"(= (a_child (quoteA "x + 1") 1) (quoteA "1"))"#),
            Ok(MetaValue::Bool(true))
        );
        assert_eq!(eval(r#"(m_len (m_concat (m_pushi 1) (m_op 0)))"#), Ok(MetaValue::Int(2)));
        assert_eq!(eval(r#"(typecheck_a (quoteA "1 + true"))"#), Ok(MetaValue::Bool(false)));
        assert!(eval(r#"(= (lambda (x) x) 1)"#).is_err());
    }

    #[test]
    fn partial_application() {
        assert_eq!(eval("(m_len ((m_concat (m_pushi 1)) (m_pushi 2)))"), Ok(MetaValue::Int(2)));
    }

    #[test]
    fn fuel_is_monotone_on_success() {
        let e = parse_meta_expr("((lambda (x) (+ x 1)) 41)").unwrap();
        let first = (1..100).find(|f| meta_eval(&e, *f).is_ok()).unwrap();
        for f in first..first + 50 {
            assert_eq!(meta_eval(&e, f), Ok(MetaValue::Int(42)));
        }
    }
}
