//! The metaprogramming host language.
//!
//! A host program has the form `(emit e)`: the meta expression `e` is
//! evaluated entirely at compile time by a fuel-bounded call-by-value
//! evaluator with general recursion (`fix`), and the machine code it produces
//! is the residual program. Source and machine programs are first-class
//! values (codes), and the staged compilers are registered primitives, so any
//! function over codes that terminates within the fuel bound is computed
//! during compilation.

mod eval;
pub mod library;
mod syntax;

use std::collections::BTreeSet;
use std::fmt;
use std::rc::Rc;

use thiserror::Error;

use crate::ident::Ident;
use crate::machine::{CompiledProgram, MachineCode};
use crate::staged_source::SourceTerm;

pub use eval::{meta_eval, Closure, MetaFailure, MetaValue};
pub use syntax::{parse_host_program, parse_host_template, parse_meta_expr, HostParseError};

/// Registered primitives. All are curried; see [`Prim::arity`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Prim {
    /// Plain staged compiler on a source code.
    CompileA,
    /// Safety-layered staged compiler on a source code.
    CompileASafe,
    /// `true` when the source code is judged safe.
    TypecheckA,
    /// Constructor tag of a source code: 0 literal, 1 boolean, 2 variable,
    /// 3 arithmetic, 4 comparison, 5 conditional, 6 escape.
    AKind,
    /// Operator index: `+ - *` are 0 1 2, `< =` are 0 1.
    AOp,
    /// `(a_child c i)`: the i-th immediate subterm.
    AChild,
    AInt,
    ABool,
    AMkLit,
    AMkBool,
    AMkBinop,
    AMkCmp,
    AMkIf,
    AMkEscape,
    MLen,
    MConcat,
    MPushi,
    /// Zero-operand instruction by index: IADD ISUB IMUL ILT IEQ TRAP.
    MOp,
    MJmp,
    MJmpz,
    /// `LOADV x` from a source code that is the variable `x`.
    MLoadv,
}

impl Prim {
    pub const ALL: [Prim; 21] = [
        Prim::CompileA,
        Prim::CompileASafe,
        Prim::TypecheckA,
        Prim::AKind,
        Prim::AOp,
        Prim::AChild,
        Prim::AInt,
        Prim::ABool,
        Prim::AMkLit,
        Prim::AMkBool,
        Prim::AMkBinop,
        Prim::AMkCmp,
        Prim::AMkIf,
        Prim::AMkEscape,
        Prim::MLen,
        Prim::MConcat,
        Prim::MPushi,
        Prim::MOp,
        Prim::MJmp,
        Prim::MJmpz,
        Prim::MLoadv,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Prim::CompileA => "compile_a",
            Prim::CompileASafe => "compile_a_safe",
            Prim::TypecheckA => "typecheck_a",
            Prim::AKind => "a_kind",
            Prim::AOp => "a_op",
            Prim::AChild => "a_child",
            Prim::AInt => "a_int",
            Prim::ABool => "a_bool",
            Prim::AMkLit => "a_mk_lit",
            Prim::AMkBool => "a_mk_bool",
            Prim::AMkBinop => "a_mk_binop",
            Prim::AMkCmp => "a_mk_cmp",
            Prim::AMkIf => "a_mk_if",
            Prim::AMkEscape => "a_mk_escape",
            Prim::MLen => "m_len",
            Prim::MConcat => "m_concat",
            Prim::MPushi => "m_pushi",
            Prim::MOp => "m_op",
            Prim::MJmp => "m_jmp",
            Prim::MJmpz => "m_jmpz",
            Prim::MLoadv => "m_loadv",
        }
    }

    pub fn from_name(name: &str) -> Option<Prim> {
        Prim::ALL.into_iter().find(|p| p.name() == name)
    }

    pub fn arity(self) -> usize {
        match self {
            Prim::AChild | Prim::MConcat => 2,
            Prim::AMkBinop | Prim::AMkCmp | Prim::AMkIf => 3,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MetaOp {
    Add,
    Sub,
    Mul,
    Lt,
    /// Structural equality on first-order values, codes included.
    Eq,
}

impl MetaOp {
    pub fn symbol(self) -> &'static str {
        match self {
            MetaOp::Add => "+",
            MetaOp::Sub => "-",
            MetaOp::Mul => "*",
            MetaOp::Lt => "<",
            MetaOp::Eq => "=",
        }
    }

    pub fn from_symbol(s: &str) -> Option<MetaOp> {
        Some(match s {
            "+" => MetaOp::Add,
            "-" => MetaOp::Sub,
            "*" => MetaOp::Mul,
            "<" => MetaOp::Lt,
            "=" => MetaOp::Eq,
            _ => return None,
        })
    }
}

/// Compile-time expressions of the host language.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum MetaExpr {
    Int(i64),
    Bool(bool),
    Var(Ident),
    Lambda(Ident, Rc<MetaExpr>),
    Apply(Rc<MetaExpr>, Rc<MetaExpr>),
    /// Fixed point of a function-valued expression `λf. λx. ...`.
    Fix(Rc<MetaExpr>),
    Prim(Prim),
    If(Rc<MetaExpr>, Rc<MetaExpr>, Rc<MetaExpr>),
    BinPrim(MetaOp, Rc<MetaExpr>, Rc<MetaExpr>),
    /// Code of a source program.
    QuoteA(Rc<SourceTerm>),
    /// Code of a machine program.
    QuoteM(Rc<MachineCode>),
    /// Code of the `unsafe` outcome.
    UnsafeCode,
    Nil,
    Cons(Rc<MetaExpr>, Rc<MetaExpr>),
    Head(Rc<MetaExpr>),
    Tail(Rc<MetaExpr>),
    IsNil(Rc<MetaExpr>),
    /// Argument position of a program template.
    Hole,
}

impl MetaExpr {
    pub fn var(name: &str) -> MetaExpr {
        MetaExpr::Var(Ident::new(name).expect("valid identifier"))
    }

    pub fn lambda(param: &str, body: MetaExpr) -> MetaExpr {
        MetaExpr::Lambda(Ident::new(param).expect("valid identifier"), Rc::new(body))
    }

    pub fn apply(f: MetaExpr, arg: MetaExpr) -> MetaExpr {
        MetaExpr::Apply(Rc::new(f), Rc::new(arg))
    }

    pub fn fix(f: MetaExpr) -> MetaExpr {
        MetaExpr::Fix(Rc::new(f))
    }

    pub fn if_(c: MetaExpr, t: MetaExpr, e: MetaExpr) -> MetaExpr {
        MetaExpr::If(Rc::new(c), Rc::new(t), Rc::new(e))
    }

    pub fn bin(op: MetaOp, l: MetaExpr, r: MetaExpr) -> MetaExpr {
        MetaExpr::BinPrim(op, Rc::new(l), Rc::new(r))
    }

    pub fn quote_a(term: SourceTerm) -> MetaExpr {
        MetaExpr::QuoteA(Rc::new(term))
    }

    pub fn quote_m(code: MachineCode) -> MetaExpr {
        MetaExpr::QuoteM(Rc::new(code))
    }

    /// `λc. f (g c)`. Both arguments must be closed, so the bound name cannot
    /// capture anything.
    pub fn compose(f: MetaExpr, g: MetaExpr) -> MetaExpr {
        MetaExpr::lambda("c", MetaExpr::apply(f, MetaExpr::apply(g, MetaExpr::var("c"))))
    }

    /// `λc. c`.
    pub fn identity() -> MetaExpr {
        MetaExpr::lambda("c", MetaExpr::var("c"))
    }

    fn children(&self) -> Vec<&Rc<MetaExpr>> {
        match self {
            MetaExpr::Lambda(_, b) | MetaExpr::Fix(b) => vec![b],
            MetaExpr::Head(b) | MetaExpr::Tail(b) | MetaExpr::IsNil(b) => vec![b],
            MetaExpr::Apply(a, b) | MetaExpr::BinPrim(_, a, b) | MetaExpr::Cons(a, b) => vec![a, b],
            MetaExpr::If(a, b, c) => vec![a, b, c],
            _ => vec![],
        }
    }

    pub fn free_vars(&self) -> BTreeSet<Ident> {
        fn go(e: &MetaExpr, bound: &mut Vec<Ident>, out: &mut BTreeSet<Ident>) {
            match e {
                MetaExpr::Var(x) => {
                    if !bound.contains(x) {
                        out.insert(x.clone());
                    }
                }
                MetaExpr::Lambda(x, body) => {
                    bound.push(x.clone());
                    go(body, bound, out);
                    bound.pop();
                }
                other => {
                    for c in other.children() {
                        go(c, bound, out);
                    }
                }
            }
        }
        let mut out = BTreeSet::new();
        go(self, &mut Vec::new(), &mut out);
        out
    }

    pub fn is_closed(&self) -> bool {
        self.free_vars().is_empty()
    }

    pub fn hole_count(&self) -> usize {
        match self {
            MetaExpr::Hole => 1,
            other => other.children().into_iter().map(|c| c.hole_count()).sum(),
        }
    }

    /// Replaces every hole by `arg`. `arg` must be closed.
    pub fn fill_hole(&self, arg: &Rc<MetaExpr>) -> Rc<MetaExpr> {
        let f = |c: &Rc<MetaExpr>| c.fill_hole(arg);
        Rc::new(match self {
            MetaExpr::Hole => return arg.clone(),
            MetaExpr::Lambda(x, b) => MetaExpr::Lambda(x.clone(), f(b)),
            MetaExpr::Fix(b) => MetaExpr::Fix(f(b)),
            MetaExpr::Head(b) => MetaExpr::Head(f(b)),
            MetaExpr::Tail(b) => MetaExpr::Tail(f(b)),
            MetaExpr::IsNil(b) => MetaExpr::IsNil(f(b)),
            MetaExpr::Apply(a, b) => MetaExpr::Apply(f(a), f(b)),
            MetaExpr::BinPrim(op, a, b) => MetaExpr::BinPrim(*op, f(a), f(b)),
            MetaExpr::Cons(a, b) => MetaExpr::Cons(f(a), f(b)),
            MetaExpr::If(a, b, c) => MetaExpr::If(f(a), f(b), f(c)),
            leaf => leaf.clone(),
        })
    }

    /// Forms that can never evaluate to a function.
    fn is_data_literal(&self) -> bool {
        matches!(
            self,
            MetaExpr::Int(_)
                | MetaExpr::Bool(_)
                | MetaExpr::QuoteA(_)
                | MetaExpr::QuoteM(_)
                | MetaExpr::UnsafeCode
                | MetaExpr::Nil
                | MetaExpr::Cons(..)
                | MetaExpr::BinPrim(..)
                | MetaExpr::IsNil(_)
        )
    }
}

impl fmt::Display for MetaExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&syntax::print_expr(self))
    }
}

/// A coded object: what the host language can quote and manipulate.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Code {
    Source(SourceTerm),
    Machine(MachineCode),
    Unsafe,
}

impl Code {
    pub fn quote(&self) -> MetaExpr {
        match self {
            Code::Source(t) => MetaExpr::quote_a(t.clone()),
            Code::Machine(m) => MetaExpr::quote_m(m.clone()),
            Code::Unsafe => MetaExpr::UnsafeCode,
        }
    }

    pub fn encode(&self) -> MetaValue {
        match self {
            Code::Source(t) => encode_source(t),
            Code::Machine(m) => encode_machine(m),
            Code::Unsafe => MetaValue::Unsafe,
        }
    }
}

impl fmt::Display for Code {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Code::Source(t) => write!(f, "<{t}>"),
            Code::Machine(m) => write!(f, "<{}>", crate::machine::format_machine(m).replace('\n', "; ")),
            Code::Unsafe => f.write_str("<unsafe>"),
        }
    }
}

pub fn encode_source(term: &SourceTerm) -> MetaValue {
    MetaValue::CodeA(Rc::new(term.clone()))
}

pub fn encode_machine(code: &MachineCode) -> MetaValue {
    MetaValue::CodeM(Rc::new(code.clone()))
}

pub fn decode_source(value: &MetaValue) -> Option<SourceTerm> {
    match value {
        MetaValue::CodeA(t) => Some((**t).clone()),
        _ => None,
    }
}

pub fn decode_machine(value: &MetaValue) -> Option<MachineCode> {
    match value {
        MetaValue::CodeM(m) => Some((**m).clone()),
        _ => None,
    }
}

/// Canonical serialized form of a code value, injective on codes.
pub fn canonical_form(value: &MetaValue) -> Option<String> {
    match value {
        MetaValue::CodeA(t) => Some(format!("A:{}", crate::staged_source::pretty(t))),
        MetaValue::CodeM(m) => Some(format!(
            "M:{}",
            m.instrs().iter().map(|i| i.to_string()).collect::<Vec<_>>().join(";")
        )),
        MetaValue::Unsafe => Some("U".to_string()),
        _ => None,
    }
}

/// A host program `(emit e)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct HostProgram {
    pub emit_arg: Rc<MetaExpr>,
}

impl HostProgram {
    pub fn emit(arg: MetaExpr) -> HostProgram {
        HostProgram {
            emit_arg: Rc::new(arg),
        }
    }
}

impl fmt::Display for HostProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(emit {})", self.emit_arg)
    }
}

/// The host compiler: evaluates the emitted expression at compile time.
///
/// Machine code becomes [`CompiledProgram::Code`], the unsafe code becomes
/// `Unsafe`, fuel exhaustion (or a nested compilation that ran out of fuel)
/// becomes `Bottom`, and everything else becomes `Error`.
pub fn compile_u(program: &HostProgram, fuel: u64) -> CompiledProgram {
    if program.emit_arg.hole_count() > 0 {
        return CompiledProgram::Error("program template has an unfilled hole".into());
    }
    if let Some(x) = program.emit_arg.free_vars().into_iter().next() {
        return CompiledProgram::Error(format!("free variable {x} in host program"));
    }
    match meta_eval(&program.emit_arg, fuel) {
        Ok(MetaValue::CodeM(m)) => match MachineCode::new(m.instrs().to_vec()) {
            Ok(code) => CompiledProgram::Code(code),
            Err(e) => CompiledProgram::Error(format!("emitted malformed machine code: {e}")),
        },
        Ok(MetaValue::Unsafe) => CompiledProgram::Unsafe,
        Ok(MetaValue::BottomMark) => CompiledProgram::Bottom,
        Ok(other) => CompiledProgram::Error(format!("emit expects machine code, got {}", other.kind_name())),
        Err(MetaFailure::FuelExhausted) => CompiledProgram::Bottom,
        Err(MetaFailure::Error(msg)) => CompiledProgram::Error(msg),
    }
}

/// The machine-language interpreter as a host program: `I_M[code] = (emit code)`.
pub fn interp_program(code_expr: MetaExpr) -> HostProgram {
    HostProgram::emit(code_expr)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("a program template needs exactly one hole, found {0}")]
    HoleCount(usize),
    #[error("composed function has free variable {0}")]
    OpenFunction(Ident),
    #[error("composed function contains a hole")]
    HoleInFunction,
    #[error("`{0}` is not function-valued")]
    NotAFunction(String),
}

/// A host program `P[·]` taking one code argument at its hole.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct HostTemplate {
    body: Rc<MetaExpr>,
}

impl HostTemplate {
    pub fn new(program: HostProgram) -> Result<HostTemplate, TemplateError> {
        match program.emit_arg.hole_count() {
            1 => Ok(HostTemplate {
                body: program.emit_arg,
            }),
            n => Err(TemplateError::HoleCount(n)),
        }
    }

    /// `I_M[·]`: emit the argument unchanged.
    pub fn interpreter() -> HostTemplate {
        HostTemplate {
            body: Rc::new(MetaExpr::Hole),
        }
    }

    /// `(emit (f ·))` for a closed function `f`.
    pub fn applying(f: MetaExpr) -> Result<HostTemplate, TemplateError> {
        apply_program(&HostTemplate::interpreter(), f)
    }

    pub fn body(&self) -> &MetaExpr {
        &self.body
    }

    /// `P[x]`.
    pub fn instantiate(&self, arg: MetaExpr) -> HostProgram {
        HostProgram {
            emit_arg: self.body.fill_hole(&Rc::new(arg)),
        }
    }

    pub fn instantiate_code(&self, code: &Code) -> HostProgram {
        self.instantiate(code.quote())
    }
}

impl fmt::Display for HostTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(emit {})", self.body)
    }
}

/// The composition `P[F(·)]`: a template whose argument is first passed
/// through the closed function `f`.
pub fn apply_program(program: &HostTemplate, f: MetaExpr) -> Result<HostTemplate, TemplateError> {
    if f.hole_count() > 0 {
        return Err(TemplateError::HoleInFunction);
    }
    if let Some(x) = f.free_vars().into_iter().next() {
        return Err(TemplateError::OpenFunction(x));
    }
    if f.is_data_literal() {
        return Err(TemplateError::NotAFunction(f.to_string()));
    }
    let composed = Rc::new(MetaExpr::Apply(Rc::new(f), Rc::new(MetaExpr::Hole)));
    Ok(HostTemplate {
        body: program.body.fill_hole(&composed),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::{parse_machine, DEFAULT_FUEL};
    use crate::staged_source::{compile_a, parse_source};

    fn src(s: &str) -> SourceTerm {
        parse_source(s).unwrap()
    }

    fn host(s: &str) -> HostProgram {
        parse_host_program(s).unwrap()
    }

    #[test]
    fn beta_reduction() {
        let e = MetaExpr::apply(
            MetaExpr::lambda("x", MetaExpr::bin(MetaOp::Add, MetaExpr::var("x"), MetaExpr::Int(1))),
            MetaExpr::Int(41),
        );
        assert!(matches!(meta_eval(&e, 100), Ok(MetaValue::Int(42))));
    }

    #[test]
    fn compile_primitive_respects_kernel() {
        let run = |s: &str| {
            let e = MetaExpr::apply(MetaExpr::Prim(Prim::CompileA), MetaExpr::quote_a(src(s)));
            decode_machine(&meta_eval(&e, DEFAULT_FUEL).unwrap()).unwrap()
        };
        assert_eq!(run("x + ~(1+1)"), run("x + 2"));
    }

    #[test]
    fn divergence_is_bottom() {
        let p = host(library::DIVERGENT_PROGRAM);
        for fuel in [1, 10, 1000, 100_000] {
            assert_eq!(compile_u(&p, fuel), CompiledProgram::Bottom);
        }
    }

    #[test]
    fn emit_outcomes() {
        assert_eq!(
            compile_u(&host(r#"(emit (quoteM "PUSHI 2"))"#), 100),
            CompiledProgram::Code(parse_machine("PUSHI 2").unwrap())
        );
        assert_eq!(compile_u(&host("(emit unsafe)"), 100), CompiledProgram::Unsafe);
        assert!(matches!(compile_u(&host("(emit 3)"), 100), CompiledProgram::Error(_)));
        assert!(matches!(compile_u(&host("(emit (head nil))"), 100), CompiledProgram::Error(_)));
        assert!(matches!(compile_u(&host("(emit (1 2))"), 100), CompiledProgram::Error(_)));
        assert!(matches!(
            compile_u(&HostProgram::emit(MetaExpr::var("x")), 100),
            CompiledProgram::Error(_)
        ));
        // A fragment whose jump leaves the program is rejected at emit time.
        assert!(matches!(compile_u(&host("(emit (m_jmp 2))"), 100), CompiledProgram::Error(_)));
    }

    #[test]
    fn emit_compiled_source() {
        let p = host(r#"(emit (compile_a (quoteA "x + 2")))"#);
        assert_eq!(compile_u(&p, DEFAULT_FUEL), compile_a(&src("x + 2"), DEFAULT_FUEL));
        let p = host(r#"(emit (compile_a_safe (quoteA "1 + true")))"#);
        assert_eq!(compile_u(&p, DEFAULT_FUEL), CompiledProgram::Unsafe);
        // An escape that exhausts the nested budget surfaces as Bottom.
        let p = host(r#"(emit (compile_a (quoteA "x + ~(1+1)")))"#);
        assert_eq!(compile_u(&p, 4), CompiledProgram::Bottom);
    }

    #[test]
    fn interpreter_equation() {
        let m = parse_machine("LOADV x\nPUSHI 2\nIADD").unwrap();
        assert_eq!(
            compile_u(&interp_program(MetaExpr::quote_m(m.clone())), DEFAULT_FUEL),
            CompiledProgram::Code(m)
        );
        assert_eq!(
            compile_u(&interp_program(MetaExpr::quote_m(MachineCode::empty())), DEFAULT_FUEL),
            CompiledProgram::Code(MachineCode::empty())
        );
    }

    #[test]
    fn composition() {
        let x = Code::Source(src("x + ~(1+1)"));
        let im = HostTemplate::interpreter();
        let pf = apply_program(&im, MetaExpr::Prim(Prim::CompileA)).unwrap();
        assert_eq!(pf.to_string(), "(emit (compile_a ?))");
        assert_eq!(
            compile_u(&pf.instantiate_code(&x), DEFAULT_FUEL),
            compile_a(&src("x + 2"), DEFAULT_FUEL)
        );
        let id = apply_program(&im, MetaExpr::identity()).unwrap();
        let m = Code::Machine(parse_machine("PUSHI 1").unwrap());
        assert_eq!(
            compile_u(&id.instantiate_code(&m), 100),
            compile_u(&im.instantiate_code(&m), 100)
        );
    }

    #[test]
    fn template_errors() {
        let im = HostTemplate::interpreter();
        assert_eq!(
            apply_program(&im, MetaExpr::Int(3)),
            Err(TemplateError::NotAFunction("3".into()))
        );
        assert!(matches!(apply_program(&im, MetaExpr::var("f")), Err(TemplateError::OpenFunction(_))));
        assert!(matches!(apply_program(&im, MetaExpr::Hole), Err(TemplateError::HoleInFunction)));
        assert!(matches!(
            HostTemplate::new(host("(emit (m_concat ? ?))")),
            Err(TemplateError::HoleCount(2))
        ));
        assert!(matches!(HostTemplate::new(host("(emit unsafe)")), Err(TemplateError::HoleCount(0))));
    }

    #[test]
    fn code_encoding_round_trips() {
        let t = SourceTerm::Lit(2);
        assert_eq!(decode_source(&encode_source(&t)), Some(t));
        let m = parse_machine("IADD").unwrap();
        assert_eq!(decode_machine(&encode_machine(&m)), Some(m));
        assert_eq!(decode_source(&MetaValue::Int(2)), None);
    }
}
