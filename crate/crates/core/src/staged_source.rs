//! The staged source language: integer and boolean expressions with an
//! escape operator `~( e )` whose body is evaluated at compile time.
//!
//! [`compile_a`] first collapses every escape to the literal of its value and
//! then emits stack code compositionally. [`compile_a_safe`] layers the
//! decidable safety judgment [`typecheck`] on top and answers
//! [`CompiledProgram::Unsafe`] for programs it cannot type.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::ident::{is_ident_continue, is_ident_start, Ident};
use crate::machine::{CompiledProgram, Instruction, MachineCode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
}

impl ArithOp {
    pub fn symbol(self) -> &'static str {
        match self {
            ArithOp::Add => "+",
            ArithOp::Sub => "-",
            ArithOp::Mul => "*",
        }
    }

    pub fn apply(self, l: i64, r: i64) -> i64 {
        match self {
            ArithOp::Add => l.wrapping_add(r),
            ArithOp::Sub => l.wrapping_sub(r),
            ArithOp::Mul => l.wrapping_mul(r),
        }
    }

    fn instruction(self) -> Instruction {
        match self {
            ArithOp::Add => Instruction::IAdd,
            ArithOp::Sub => Instruction::ISub,
            ArithOp::Mul => Instruction::IMul,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Lt,
    Eq,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Eq => "=",
        }
    }

    pub fn apply(self, l: i64, r: i64) -> bool {
        match self {
            CmpOp::Lt => l < r,
            CmpOp::Eq => l == r,
        }
    }

    fn instruction(self) -> Instruction {
        match self {
            CmpOp::Lt => Instruction::ILt,
            CmpOp::Eq => Instruction::IEq,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SourceTerm {
    Lit(i64),
    BoolLit(bool),
    Var(Ident),
    BinOp(ArithOp, Box<SourceTerm>, Box<SourceTerm>),
    Cmp(CmpOp, Box<SourceTerm>, Box<SourceTerm>),
    If(Box<SourceTerm>, Box<SourceTerm>, Box<SourceTerm>),
    /// Evaluated at compile time.
    Escape(Box<SourceTerm>),
}

impl SourceTerm {
    pub fn var(name: &str) -> SourceTerm {
        SourceTerm::Var(Ident::new(name).expect("valid identifier"))
    }

    pub fn binop(op: ArithOp, l: SourceTerm, r: SourceTerm) -> SourceTerm {
        SourceTerm::BinOp(op, Box::new(l), Box::new(r))
    }

    pub fn cmp(op: CmpOp, l: SourceTerm, r: SourceTerm) -> SourceTerm {
        SourceTerm::Cmp(op, Box::new(l), Box::new(r))
    }

    pub fn if_(c: SourceTerm, t: SourceTerm, e: SourceTerm) -> SourceTerm {
        SourceTerm::If(Box::new(c), Box::new(t), Box::new(e))
    }

    pub fn escape(body: SourceTerm) -> SourceTerm {
        SourceTerm::Escape(Box::new(body))
    }

    pub fn from_const(v: ConstValue) -> SourceTerm {
        match v {
            ConstValue::Int(n) => SourceTerm::Lit(n),
            ConstValue::Bool(b) => SourceTerm::BoolLit(b),
        }
    }

    pub fn children(&self) -> Vec<&SourceTerm> {
        match self {
            SourceTerm::Lit(_) | SourceTerm::BoolLit(_) | SourceTerm::Var(_) => vec![],
            SourceTerm::BinOp(_, l, r) | SourceTerm::Cmp(_, l, r) => vec![l, r],
            SourceTerm::If(c, t, e) => vec![c, t, e],
            SourceTerm::Escape(b) => vec![b],
        }
    }

    pub fn free_vars(&self) -> BTreeSet<Ident> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<Ident>) {
        if let SourceTerm::Var(x) = self {
            out.insert(x.clone());
        }
        for c in self.children() {
            c.collect_vars(out);
        }
    }

    pub fn is_closed(&self) -> bool {
        match self {
            SourceTerm::Var(_) => false,
            other => other.children().into_iter().all(SourceTerm::is_closed),
        }
    }

    pub fn size(&self) -> usize {
        1 + self.children().into_iter().map(SourceTerm::size).sum::<usize>()
    }

    pub fn depth(&self) -> usize {
        1 + self
            .children()
            .into_iter()
            .map(SourceTerm::depth)
            .max()
            .unwrap_or(0)
    }

    pub fn contains_escape(&self) -> bool {
        matches!(self, SourceTerm::Escape(_)) || self.children().into_iter().any(SourceTerm::contains_escape)
    }
}

impl fmt::Display for SourceTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&pretty(self))
    }
}

// Binding strength used by the printer; larger binds tighter.
const PREC_IF: u8 = 0;
const PREC_CMP: u8 = 1;
const PREC_ADD: u8 = 2;
const PREC_MUL: u8 = 3;

/// Canonical concrete syntax; `parse_source(&pretty(t)) == Ok(t)`.
pub fn pretty(term: &SourceTerm) -> String {
    let mut out = String::new();
    write_term(term, PREC_IF, &mut out);
    out
}

fn write_term(term: &SourceTerm, ctx: u8, out: &mut String) {
    match term {
        SourceTerm::Lit(n) => out.push_str(&n.to_string()),
        SourceTerm::BoolLit(b) => out.push_str(if *b { "true" } else { "false" }),
        SourceTerm::Var(x) => out.push_str(x.as_str()),
        SourceTerm::Escape(b) => {
            out.push_str("~(");
            write_term(b, PREC_IF, out);
            out.push(')');
        }
        SourceTerm::BinOp(op, l, r) => {
            let prec = if *op == ArithOp::Mul { PREC_MUL } else { PREC_ADD };
            write_infix(op.symbol(), prec, l, r, ctx, out);
        }
        SourceTerm::Cmp(op, l, r) => write_infix(op.symbol(), PREC_CMP, l, r, ctx, out),
        SourceTerm::If(c, t, e) => {
            let paren = ctx > PREC_IF;
            if paren {
                out.push('(');
            }
            out.push_str("if ");
            write_term(c, PREC_IF, out);
            out.push_str(" then ");
            write_term(t, PREC_IF, out);
            out.push_str(" else ");
            write_term(e, PREC_IF, out);
            if paren {
                out.push(')');
            }
        }
    }
}

fn write_infix(sym: &str, prec: u8, l: &SourceTerm, r: &SourceTerm, ctx: u8, out: &mut String) {
    let paren = ctx > prec;
    if paren {
        out.push('(');
    }
    write_term(l, prec, out);
    out.push(' ');
    out.push_str(sym);
    out.push(' ');
    write_term(r, prec + 1, out);
    if paren {
        out.push(')');
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at {line}:{column}: {message}")]
pub struct SourceParseError {
    /// Byte offset into the input.
    pub offset: usize,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Int(u64),
    Ident(String),
    True,
    False,
    If,
    Then,
    Else,
    Plus,
    Minus,
    Star,
    Lt,
    Eq,
    EscOpen,
    LParen,
    RParen,
    End,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Int(n) => write!(f, "{n}"),
            Tok::Ident(s) => write!(f, "{s}"),
            Tok::True => f.write_str("true"),
            Tok::False => f.write_str("false"),
            Tok::If => f.write_str("if"),
            Tok::Then => f.write_str("then"),
            Tok::Else => f.write_str("else"),
            Tok::Plus => f.write_str("+"),
            Tok::Minus => f.write_str("-"),
            Tok::Star => f.write_str("*"),
            Tok::Lt => f.write_str("<"),
            Tok::Eq => f.write_str("="),
            Tok::EscOpen => f.write_str("~("),
            Tok::LParen => f.write_str("("),
            Tok::RParen => f.write_str(")"),
            Tok::End => f.write_str("end of input"),
        }
    }
}

struct Parser<'a> {
    text: &'a str,
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn error_at(&self, offset: usize, message: String) -> SourceParseError {
        let before = &self.text[..offset.min(self.text.len())];
        let line = before.matches('\n').count() + 1;
        let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
        SourceParseError {
            offset,
            line,
            column,
            message,
        }
    }

    fn lex(text: &'a str) -> Result<Self, SourceParseError> {
        let mut p = Parser {
            text,
            toks: Vec::new(),
            pos: 0,
        };
        let bytes = text.as_bytes();
        let mut i = 0;
        while i < bytes.len() {
            let c = bytes[i] as char;
            if c.is_ascii_whitespace() {
                i += 1;
                continue;
            }
            let start = i;
            let tok = match c {
                '+' => Tok::Plus,
                '-' => Tok::Minus,
                '*' => Tok::Star,
                '<' => Tok::Lt,
                '=' => Tok::Eq,
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                '~' => {
                    if bytes.get(i + 1) == Some(&b'(') {
                        i += 1;
                        Tok::EscOpen
                    } else {
                        return Err(p.error_at(i, "expected `(` immediately after `~`".into()));
                    }
                }
                d if d.is_ascii_digit() => {
                    while i + 1 < bytes.len() && bytes[i + 1].is_ascii_digit() {
                        i += 1;
                    }
                    let digits = &text[start..=i];
                    let n = digits
                        .parse::<u64>()
                        .map_err(|_| p.error_at(start, format!("integer literal {digits} out of range")))?;
                    Tok::Int(n)
                }
                a if is_ident_start(a) => {
                    while i + 1 < bytes.len() && is_ident_continue(bytes[i + 1] as char) {
                        i += 1;
                    }
                    match &text[start..=i] {
                        "true" => Tok::True,
                        "false" => Tok::False,
                        "if" => Tok::If,
                        "then" => Tok::Then,
                        "else" => Tok::Else,
                        word => Tok::Ident(word.to_string()),
                    }
                }
                _ => {
                    let ch = text[i..].chars().next().unwrap_or(c);
                    return Err(p.error_at(i, format!("unexpected character {ch:?}")));
                }
            };
            p.toks.push((tok, start));
            i += 1;
        }
        p.toks.push((Tok::End, text.len()));
        Ok(p)
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok) -> Result<(), SourceParseError> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(self.error_at(self.offset(), format!("expected `{want}`, found `{}`", self.peek())))
        }
    }

    fn expr(&mut self) -> Result<SourceTerm, SourceParseError> {
        if *self.peek() == Tok::If {
            return self.if_expr();
        }
        self.cmp()
    }

    fn if_expr(&mut self) -> Result<SourceTerm, SourceParseError> {
        self.expect(Tok::If)?;
        let c = self.expr()?;
        self.expect(Tok::Then)?;
        let t = self.expr()?;
        self.expect(Tok::Else)?;
        let e = self.expr()?;
        Ok(SourceTerm::if_(c, t, e))
    }

    fn cmp(&mut self) -> Result<SourceTerm, SourceParseError> {
        let mut lhs = self.add()?;
        loop {
            let op = match self.peek() {
                Tok::Lt => CmpOp::Lt,
                Tok::Eq => CmpOp::Eq,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.add()?;
            lhs = SourceTerm::cmp(op, lhs, rhs);
        }
    }

    fn add(&mut self) -> Result<SourceTerm, SourceParseError> {
        let mut lhs = self.mul()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => ArithOp::Add,
                Tok::Minus => ArithOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.mul()?;
            lhs = SourceTerm::binop(op, lhs, rhs);
        }
    }

    fn mul(&mut self) -> Result<SourceTerm, SourceParseError> {
        let mut lhs = self.primary()?;
        while *self.peek() == Tok::Star {
            self.bump();
            let rhs = self.primary()?;
            lhs = SourceTerm::binop(ArithOp::Mul, lhs, rhs);
        }
        Ok(lhs)
    }

    fn primary(&mut self) -> Result<SourceTerm, SourceParseError> {
        let at = self.offset();
        match self.bump() {
            Tok::Int(n) => i64::try_from(n)
                .map(SourceTerm::Lit)
                .map_err(|_| self.error_at(at, format!("integer literal {n} out of range"))),
            Tok::Minus => match self.peek().clone() {
                Tok::Int(n) if n <= i64::MAX as u64 + 1 => {
                    self.bump();
                    Ok(SourceTerm::Lit((n as i64).wrapping_neg()))
                }
                Tok::Int(n) => Err(self.error_at(at, format!("integer literal -{n} out of range"))),
                other => Err(self.error_at(self.offset(), format!("expected integer after `-`, found `{other}`"))),
            },
            Tok::True => Ok(SourceTerm::BoolLit(true)),
            Tok::False => Ok(SourceTerm::BoolLit(false)),
            Tok::Ident(name) => Ok(SourceTerm::Var(Ident::new(name).expect("lexer yields valid identifiers"))),
            Tok::EscOpen => {
                let body = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(SourceTerm::escape(body))
            }
            Tok::LParen => {
                let inner = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(inner)
            }
            Tok::If => {
                self.pos -= 1;
                self.if_expr()
            }
            other => Err(self.error_at(at, format!("unexpected `{other}`"))),
        }
    }
}

pub fn parse_source(text: &str) -> Result<SourceTerm, SourceParseError> {
    let mut p = Parser::lex(text)?;
    let term = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(p.error_at(p.offset(), format!("unexpected `{}` after expression", p.peek())));
    }
    Ok(term)
}

/// Why a term is outside the source language.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MembershipError {
    #[error(transparent)]
    Syntax(#[from] SourceParseError),
    #[error("escape body `{body}` has free variable {var}")]
    OpenEscape { body: String, var: Ident },
}

/// Membership of an already-parsed term: every escape body must be closed.
pub fn check_membership(term: &SourceTerm) -> Result<(), MembershipError> {
    if let SourceTerm::Escape(body) = term {
        if let Some(var) = body.free_vars().into_iter().next() {
            return Err(MembershipError::OpenEscape {
                body: pretty(body),
                var,
            });
        }
    }
    term.children().into_iter().try_for_each(check_membership)
}

/// Total decision procedure for membership of a program text.
pub fn member_la(text: &str) -> bool {
    parse_member(text).is_ok()
}

pub fn parse_member(text: &str) -> Result<SourceTerm, MembershipError> {
    let term = parse_source(text)?;
    check_membership(&term)?;
    Ok(term)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConstValue {
    Int(i64),
    Bool(bool),
}

impl fmt::Display for ConstValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstValue::Int(n) => write!(f, "{n}"),
            ConstValue::Bool(b) => write!(f, "{b}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EscapeError {
    #[error("escape evaluation ran out of fuel")]
    FuelExhausted,
    #[error("type confusion in escape: {0}")]
    TypeConfusion(String),
    #[error("free variable {0} in escape")]
    FreeVariable(Ident),
}

/// Compile-time evaluator for escape bodies. Each visited node costs one
/// unit of fuel; the budget is shared by every escape of one compilation.
struct EscapeEvaluator {
    remaining: u64,
}

impl EscapeEvaluator {
    fn eval(&mut self, term: &SourceTerm) -> Result<ConstValue, EscapeError> {
        if self.remaining == 0 {
            return Err(EscapeError::FuelExhausted);
        }
        self.remaining -= 1;
        match term {
            SourceTerm::Lit(n) => Ok(ConstValue::Int(*n)),
            SourceTerm::BoolLit(b) => Ok(ConstValue::Bool(*b)),
            SourceTerm::Var(x) => Err(EscapeError::FreeVariable(x.clone())),
            SourceTerm::Escape(body) => self.eval(body),
            SourceTerm::BinOp(op, l, r) => {
                let (l, r) = (self.int(l, op.symbol())?, self.int(r, op.symbol())?);
                Ok(ConstValue::Int(op.apply(l, r)))
            }
            SourceTerm::Cmp(op, l, r) => {
                let (l, r) = (self.int(l, op.symbol())?, self.int(r, op.symbol())?);
                Ok(ConstValue::Bool(op.apply(l, r)))
            }
            SourceTerm::If(c, t, e) => match self.eval(c)? {
                ConstValue::Bool(true) => self.eval(t),
                ConstValue::Bool(false) => self.eval(e),
                ConstValue::Int(n) => Err(EscapeError::TypeConfusion(format!(
                    "if-condition evaluated to integer {n}"
                ))),
            },
        }
    }

    fn int(&mut self, term: &SourceTerm, op: &str) -> Result<i64, EscapeError> {
        match self.eval(term)? {
            ConstValue::Int(n) => Ok(n),
            ConstValue::Bool(b) => Err(EscapeError::TypeConfusion(format!(
                "operand of `{op}` evaluated to boolean {b}"
            ))),
        }
    }

    /// Replaces every outermost escape by the literal of its value.
    fn collapse(&mut self, term: &SourceTerm) -> Result<SourceTerm, EscapeError> {
        Ok(match term {
            SourceTerm::Escape(body) => SourceTerm::from_const(self.eval(body)?),
            SourceTerm::Lit(_) | SourceTerm::BoolLit(_) | SourceTerm::Var(_) => term.clone(),
            SourceTerm::BinOp(op, l, r) => SourceTerm::binop(*op, self.collapse(l)?, self.collapse(r)?),
            SourceTerm::Cmp(op, l, r) => SourceTerm::cmp(*op, self.collapse(l)?, self.collapse(r)?),
            SourceTerm::If(c, t, e) => SourceTerm::if_(self.collapse(c)?, self.collapse(t)?, self.collapse(e)?),
        })
    }
}

/// Evaluates a closed escape body. Nested escapes are evaluated innermost first.
pub fn eval_escape(body: &SourceTerm, fuel: u64) -> Result<ConstValue, EscapeError> {
    EscapeEvaluator { remaining: fuel }.eval(body)
}

/// The escape-free residual of `term`: each outermost escape replaced by the
/// literal of its compile-time value.
pub fn collapse_escapes(term: &SourceTerm, fuel: u64) -> Result<SourceTerm, EscapeError> {
    EscapeEvaluator { remaining: fuel }.collapse(term)
}

fn escape_outcome(err: EscapeError) -> CompiledProgram {
    match err {
        EscapeError::FuelExhausted => CompiledProgram::Bottom,
        other => CompiledProgram::Error(other.to_string()),
    }
}

/// The plain compiler. Total: every term maps to some outcome.
pub fn compile_a(term: &SourceTerm, fuel: u64) -> CompiledProgram {
    if let Err(e) = check_membership(term) {
        return CompiledProgram::Error(format!("not a source program: {e}"));
    }
    match collapse_escapes(term, fuel) {
        Ok(residual) => CompiledProgram::Code(emit_code(&residual)),
        Err(e) => escape_outcome(e),
    }
}

/// Parses then compiles; syntax errors become [`CompiledProgram::Error`].
pub fn compile_a_text(text: &str, fuel: u64) -> CompiledProgram {
    match parse_source(text) {
        Ok(t) => compile_a(&t, fuel),
        Err(e) => CompiledProgram::Error(format!("not a source program: {e}")),
    }
}

/// Stack code for an escape-free term. Escapes are compiled as runtime code;
/// [`compile_a`] never passes them here.
pub(crate) fn emit_code(term: &SourceTerm) -> MachineCode {
    let mut out = Vec::new();
    emit_into(term, &mut out);
    MachineCode::from_trusted(out)
}

fn emit_into(term: &SourceTerm, out: &mut Vec<Instruction>) {
    match term {
        SourceTerm::Lit(n) => out.push(Instruction::PushI(*n)),
        SourceTerm::BoolLit(b) => out.push(Instruction::PushI(i64::from(*b))),
        SourceTerm::Var(x) => out.push(Instruction::LoadV(x.clone())),
        SourceTerm::BinOp(op, l, r) => {
            emit_into(l, out);
            emit_into(r, out);
            out.push(op.instruction());
        }
        SourceTerm::Cmp(op, l, r) => {
            emit_into(l, out);
            emit_into(r, out);
            out.push(op.instruction());
        }
        SourceTerm::If(c, t, e) => {
            let mut then_code = Vec::new();
            emit_into(t, &mut then_code);
            let mut else_code = Vec::new();
            emit_into(e, &mut else_code);
            emit_into(c, out);
            out.push(Instruction::Jmpz(then_code.len() as u32 + 1));
            out.extend(then_code);
            out.push(Instruction::Jmp(else_code.len() as u32));
            out.extend(else_code);
        }
        SourceTerm::Escape(b) => emit_into(b, out),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Ty {
    Int,
    Bool,
}

impl fmt::Display for Ty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Ty::Int => "int",
            Ty::Bool => "bool",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SafetyJudgment {
    Safe(Ty),
    NotSafe(String),
}

impl SafetyJudgment {
    pub fn is_safe(&self) -> bool {
        matches!(self, SafetyJudgment::Safe(_))
    }
}

impl fmt::Display for SafetyJudgment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SafetyJudgment::Safe(t) => write!(f, "safe : {t}"),
            SafetyJudgment::NotSafe(why) => write!(f, "not safe: {why}"),
        }
    }
}

/// Decides the safety judgment: a program is safe when it has a type.
/// Free variables are typed `int`.
pub fn typecheck(term: &SourceTerm) -> SafetyJudgment {
    match type_of(term) {
        Ok(t) => SafetyJudgment::Safe(t),
        Err(why) => SafetyJudgment::NotSafe(why),
    }
}

fn type_of(term: &SourceTerm) -> Result<Ty, String> {
    let expect = |t: &SourceTerm, want: Ty, what: &str| -> Result<(), String> {
        let got = type_of(t)?;
        if got == want {
            Ok(())
        } else {
            Err(format!("{what} `{}` has type {got}, expected {want}", pretty(t)))
        }
    };
    match term {
        SourceTerm::Lit(_) | SourceTerm::Var(_) => Ok(Ty::Int),
        SourceTerm::BoolLit(_) => Ok(Ty::Bool),
        SourceTerm::BinOp(op, l, r) => {
            expect(l, Ty::Int, &format!("left operand of `{}`", op.symbol()))?;
            expect(r, Ty::Int, &format!("right operand of `{}`", op.symbol()))?;
            Ok(Ty::Int)
        }
        SourceTerm::Cmp(op, l, r) => {
            expect(l, Ty::Int, &format!("left operand of `{}`", op.symbol()))?;
            expect(r, Ty::Int, &format!("right operand of `{}`", op.symbol()))?;
            Ok(Ty::Bool)
        }
        SourceTerm::If(c, t, e) => {
            expect(c, Ty::Bool, "condition")?;
            let tt = type_of(t)?;
            let et = type_of(e)?;
            if tt == et {
                Ok(tt)
            } else {
                Err(format!("branches have types {tt} and {et}"))
            }
        }
        SourceTerm::Escape(body) => {
            if let Some(x) = body.free_vars().into_iter().next() {
                return Err(format!("escape body mentions free variable {x}"));
            }
            type_of(body)
        }
    }
}

/// The safety-layered compiler: `Unsafe` for programs without a type,
/// otherwise exactly [`compile_a`].
pub fn compile_a_safe(term: &SourceTerm, fuel: u64) -> CompiledProgram {
    if let Err(e) = check_membership(term) {
        return CompiledProgram::Error(format!("not a source program: {e}"));
    }
    match typecheck(term) {
        SafetyJudgment::NotSafe(_) => CompiledProgram::Unsafe,
        SafetyJudgment::Safe(_) => compile_a(term, fuel),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::{parse_machine, DEFAULT_FUEL};

    fn p(s: &str) -> SourceTerm {
        parse_source(s).unwrap()
    }

    fn lit(n: i64) -> SourceTerm {
        SourceTerm::Lit(n)
    }

    #[test]
    fn parses_example_program() {
        assert_eq!(
            p("x + ~(1+1)"),
            SourceTerm::binop(
                ArithOp::Add,
                SourceTerm::var("x"),
                SourceTerm::escape(SourceTerm::binop(ArithOp::Add, lit(1), lit(1)))
            )
        );
    }

    #[test]
    fn parses_conditional() {
        assert_eq!(
            p("if x < 3 then 1 else 2"),
            SourceTerm::if_(SourceTerm::cmp(CmpOp::Lt, SourceTerm::var("x"), lit(3)), lit(1), lit(2))
        );
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(
            p("1 - 2 - 3"),
            SourceTerm::binop(ArithOp::Sub, SourceTerm::binop(ArithOp::Sub, lit(1), lit(2)), lit(3))
        );
        assert_eq!(
            p("1 + 2 * 3 < 4"),
            SourceTerm::cmp(
                CmpOp::Lt,
                SourceTerm::binop(ArithOp::Add, lit(1), SourceTerm::binop(ArithOp::Mul, lit(2), lit(3))),
                lit(4)
            )
        );
        assert_eq!(p("x - -4"), SourceTerm::binop(ArithOp::Sub, SourceTerm::var("x"), lit(-4)));
        assert_eq!(p("-9223372036854775808"), lit(i64::MIN));
        assert!(parse_source("9223372036854775808").is_err());
    }

    #[test]
    fn syntax_errors_have_positions() {
        let e = parse_source("1 + ").unwrap_err();
        assert_eq!((e.line, e.column), (1, 5));
        let e = parse_source("x ~ 1").unwrap_err();
        assert_eq!(e.offset, 2);
        assert!(parse_source("+++").is_err());
        assert!(parse_source("(1").is_err());
        assert!(parse_source("1 2").is_err());
        assert!(parse_source("if 1 then 2").is_err());
    }

    #[test]
    fn pretty_round_trips_tricky_shapes() {
        for s in [
            "x + ~(1 + 1)",
            "(if x < 3 then 1 else 2) + 4",
            "if a then b else if c then d else e",
            "1 - (2 - 3)",
            "(1 < 2) = true",
            "~(~(2 * 3))",
            "x * -4",
        ] {
            let t = p(s);
            assert_eq!(p(&pretty(&t)), t, "{s}");
        }
        assert_eq!(pretty(&p("x+~(1+1)")), "x + ~(1 + 1)");
    }

    #[test]
    fn membership() {
        assert!(member_la("x + ~(1+1)"));
        assert!(!member_la("x + ~(x+1)"));
        assert!(!member_la("+++"));
        assert!(parse_source("~(y)").is_ok());
        assert!(!member_la("~(y)"));
        assert!(member_la("~(~(2*3))"));
    }

    #[test]
    fn escape_evaluation() {
        assert_eq!(eval_escape(&p("1+1"), 100), Ok(ConstValue::Int(2)));
        assert_eq!(eval_escape(&p("1+(2-1)"), 100), Ok(ConstValue::Int(2)));
        assert_eq!(eval_escape(&p("~(2*3)"), 100), Ok(ConstValue::Int(6)));
        assert_eq!(eval_escape(&p("if 1 < 2 then 5 else 6"), 100), Ok(ConstValue::Int(5)));
        assert!(matches!(eval_escape(&p("1 + true"), 100), Err(EscapeError::TypeConfusion(_))));
        assert_eq!(eval_escape(&p("1+1"), 2), Err(EscapeError::FuelExhausted));
        assert_eq!(eval_escape(&p("1+1"), 3), Ok(ConstValue::Int(2)));
    }

    #[test]
    fn example_classes_compile_identically() {
        let c = |s: &str| compile_a(&p(s), DEFAULT_FUEL);
        assert_eq!(c("x + ~(1+1)"), c("x + 2"));
        assert_eq!(c("x + ~(1+(2-1))"), c("x + 2"));
        assert_eq!(c("y + ~(4-2)"), c("y + 2"));
        assert_ne!(c("x + 2"), c("y + 2"));
        assert_eq!(
            c("x + 2"),
            CompiledProgram::Code(parse_machine("LOADV x\nPUSHI 2\nIADD").unwrap())
        );
    }

    #[test]
    fn conditional_code_layout() {
        let code = compile_a(&p("if x < 3 then 1 else 2"), DEFAULT_FUEL);
        let want = parse_machine("LOADV x\nPUSHI 3\nILT\nJMPZ 2\nPUSHI 1\nJMP 1\nPUSHI 2").unwrap();
        assert_eq!(code, CompiledProgram::Code(want));
    }

    #[test]
    fn compile_outcomes() {
        assert!(matches!(compile_a(&p("x + ~(x+1)"), DEFAULT_FUEL), CompiledProgram::Error(_)));
        assert!(matches!(compile_a(&p("~(1 + true)"), DEFAULT_FUEL), CompiledProgram::Error(_)));
        assert_eq!(compile_a(&p("x + ~(1 + 1)"), 2), CompiledProgram::Bottom);
        // Ill-typed but escape-free programs still compile.
        assert!(matches!(compile_a(&p("if x then 1 else 2"), DEFAULT_FUEL), CompiledProgram::Code(_)));
        assert!(matches!(compile_a_text("+++", DEFAULT_FUEL), CompiledProgram::Error(_)));
    }

    #[test]
    fn typing() {
        assert_eq!(typecheck(&p("if x < 3 then 1 else 2")), SafetyJudgment::Safe(Ty::Int));
        assert_eq!(typecheck(&p("x < 3")), SafetyJudgment::Safe(Ty::Bool));
        assert!(!typecheck(&p("if x then 1 else 2")).is_safe());
        assert!(!typecheck(&p("1 + true")).is_safe());
        assert!(!typecheck(&p("if true then 1 else false")).is_safe());
        assert!(!typecheck(&p("true < 1")).is_safe());
        assert_eq!(typecheck(&p("~(1 < 2)")), SafetyJudgment::Safe(Ty::Bool));
        assert!(!typecheck(&p("~(y)")).is_safe());
    }

    #[test]
    fn safety_layered_compiler() {
        let f = DEFAULT_FUEL;
        assert_eq!(compile_a_safe(&p("if x then 1 else 2"), f), CompiledProgram::Unsafe);
        assert_eq!(compile_a_safe(&p("1 + true"), f), CompiledProgram::Unsafe);
        assert_eq!(compile_a_safe(&p("x + ~(1+1)"), f), compile_a(&p("x + 2"), f));
        assert!(matches!(compile_a_safe(&p("~(x)"), f), CompiledProgram::Error(_)));
    }
}
