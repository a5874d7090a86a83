//! S-expression surface syntax of the host language.
//!
//! ```text
//! program := (emit expr)
//! expr    := integer | true | false | nil | unsafe | ? | ident
//!          | (lambda (ident ...) expr) | (fix expr) | (if expr expr expr)
//!          | (let (ident expr) expr)
//!          | (+ expr expr) | (- ..) | (* ..) | (< ..) | (= ..)
//!          | (quoteA "source") | (quoteM "machine code")
//!          | (cons expr expr) | (head expr) | (tail expr) | (nil? expr)
//!          | (expr expr ...)
//! ```
//!
//! Unbound identifiers naming a registered primitive denote that primitive.
//! `?` is the argument hole of a program template. `;` starts a comment.

use std::rc::Rc;

use thiserror::Error;

use super::{HostProgram, HostTemplate, MetaExpr, MetaOp, Prim, TemplateError};
use crate::ident::Ident;
use crate::machine::parse_machine;
use crate::staged_source::{parse_source, pretty};

const KEYWORDS: [&str; 16] = [
    "emit", "lambda", "fix", "if", "let", "quoteA", "quoteM", "cons", "head", "tail", "nil?", "true",
    "false", "nil", "unsafe", "?",
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("host syntax error at offset {offset}: {message}")]
pub struct HostParseError {
    pub offset: usize,
    pub message: String,
}

fn err<T>(offset: usize, message: impl Into<String>) -> Result<T, HostParseError> {
    Err(HostParseError {
        offset,
        message: message.into(),
    })
}

#[derive(Debug)]
enum Sexp {
    Atom(String, usize),
    Str(String, usize),
    List(Vec<Sexp>, usize),
}

impl Sexp {
    fn offset(&self) -> usize {
        match self {
            Sexp::Atom(_, o) | Sexp::Str(_, o) | Sexp::List(_, o) => *o,
        }
    }
}

struct Reader<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Reader<'a> {
    fn skip_trivia(&mut self) {
        let bytes = self.text.as_bytes();
        while self.pos < bytes.len() {
            match bytes[self.pos] {
                b';' => {
                    while self.pos < bytes.len() && bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn read(&mut self) -> Result<Sexp, HostParseError> {
        self.skip_trivia();
        let start = self.pos;
        let Some(c) = self.text[self.pos..].chars().next() else {
            return err(start, "unexpected end of input");
        };
        match c {
            '(' => {
                self.pos += 1;
                let mut items = Vec::new();
                loop {
                    self.skip_trivia();
                    match self.text.as_bytes().get(self.pos) {
                        None => return err(start, "unclosed `(`"),
                        Some(b')') => {
                            self.pos += 1;
                            return Ok(Sexp::List(items, start));
                        }
                        Some(_) => items.push(self.read()?),
                    }
                }
            }
            ')' => err(start, "unexpected `)`"),
            '"' => {
                self.pos += 1;
                let mut out = String::new();
                let mut chars = self.text[self.pos..].char_indices();
                while let Some((i, ch)) = chars.next() {
                    match ch {
                        '"' => {
                            self.pos += i + 1;
                            return Ok(Sexp::Str(out, start));
                        }
                        '\\' => match chars.next() {
                            Some((_, 'n')) => out.push('\n'),
                            Some((_, 't')) => out.push('\t'),
                            Some((_, '"')) => out.push('"'),
                            Some((_, '\\')) => out.push('\\'),
                            Some((j, other)) => {
                                return err(self.pos + j, format!("unknown escape `\\{other}`"))
                            }
                            None => break,
                        },
                        other => out.push(other),
                    }
                }
                err(start, "unterminated string")
            }
            _ => {
                let rest = &self.text[self.pos..];
                let len = rest
                    .find(|ch: char| ch.is_whitespace() || matches!(ch, '(' | ')' | '"' | ';'))
                    .unwrap_or(rest.len());
                self.pos += len;
                Ok(Sexp::Atom(rest[..len].to_string(), start))
            }
        }
    }
}

fn read_one(text: &str) -> Result<Sexp, HostParseError> {
    let mut r = Reader { text, pos: 0 };
    let s = r.read()?;
    r.skip_trivia();
    if r.pos < text.len() {
        return err(r.pos, "trailing input after expression");
    }
    Ok(s)
}

struct Lowering {
    scope: Vec<Ident>,
}

impl Lowering {
    fn binder(&self, s: &Sexp) -> Result<Ident, HostParseError> {
        match s {
            Sexp::Atom(a, o) if !KEYWORDS.contains(&a.as_str()) => {
                Ident::new(a.as_str()).or_else(|_| err(*o, format!("invalid parameter name `{a}`")))
            }
            other => err(other.offset(), "expected a parameter name"),
        }
    }

    fn with_binder<T>(
        &mut self,
        name: Ident,
        f: impl FnOnce(&mut Self) -> Result<T, HostParseError>,
    ) -> Result<T, HostParseError> {
        self.scope.push(name);
        let out = f(self);
        self.scope.pop();
        out
    }

    fn lower(&mut self, s: &Sexp) -> Result<MetaExpr, HostParseError> {
        match s {
            Sexp::Str(_, o) => err(*o, "string literals may only appear in quoteA/quoteM"),
            Sexp::Atom(a, o) => self.atom(a, *o),
            Sexp::List(items, o) => self.list(items, *o),
        }
    }

    fn atom(&self, a: &str, o: usize) -> Result<MetaExpr, HostParseError> {
        Ok(match a {
            "true" => MetaExpr::Bool(true),
            "false" => MetaExpr::Bool(false),
            "nil" => MetaExpr::Nil,
            "unsafe" => MetaExpr::UnsafeCode,
            "?" => MetaExpr::Hole,
            _ => {
                if let Ok(n) = a.parse::<i64>() {
                    return Ok(MetaExpr::Int(n));
                }
                if KEYWORDS.contains(&a) {
                    return err(o, format!("`{a}` is a keyword"));
                }
                let Ok(name) = Ident::new(a) else {
                    return err(o, format!("invalid atom `{a}`"));
                };
                if self.scope.contains(&name) {
                    MetaExpr::Var(name)
                } else if let Some(p) = Prim::from_name(a) {
                    MetaExpr::Prim(p)
                } else {
                    return err(o, format!("unbound identifier `{a}`"));
                }
            }
        })
    }

    fn list(&mut self, items: &[Sexp], o: usize) -> Result<MetaExpr, HostParseError> {
        let Some(head) = items.first() else {
            return err(o, "empty application");
        };
        let args = &items[1..];
        let arity = |n: usize, form: &str| {
            if args.len() == n {
                Ok(())
            } else {
                err(o, format!("`{form}` takes {n} argument(s), found {}", args.len()))
            }
        };
        let keyword = match head {
            Sexp::Atom(a, _) if !self.scope.iter().any(|x| x.as_str() == a) => Some(a.as_str()),
            _ => None,
        };
        let r = Rc::new;
        match keyword {
            Some("emit") => err(o, "`emit` may only appear at the top of a program"),
            Some("lambda") => {
                arity(2, "lambda")?;
                let Sexp::List(params, po) = &args[0] else {
                    return err(args[0].offset(), "expected a parameter list");
                };
                if params.is_empty() {
                    return err(*po, "lambda needs at least one parameter");
                }
                let names = params.iter().map(|p| self.binder(p)).collect::<Result<Vec<_>, _>>()?;
                self.lambda(&names, &args[1])
            }
            Some("let") => {
                arity(2, "let")?;
                let Sexp::List(binding, bo) = &args[0] else {
                    return err(args[0].offset(), "expected `(name expr)`");
                };
                if binding.len() != 2 {
                    return err(*bo, "expected `(name expr)`");
                }
                let name = self.binder(&binding[0])?;
                let value = self.lower(&binding[1])?;
                let body = self.with_binder(name.clone(), |l| l.lower(&args[1]))?;
                Ok(MetaExpr::Apply(r(MetaExpr::Lambda(name, r(body))), r(value)))
            }
            Some("fix") => {
                arity(1, "fix")?;
                Ok(MetaExpr::Fix(r(self.lower(&args[0])?)))
            }
            Some("if") => {
                arity(3, "if")?;
                Ok(MetaExpr::If(
                    r(self.lower(&args[0])?),
                    r(self.lower(&args[1])?),
                    r(self.lower(&args[2])?),
                ))
            }
            Some("quoteA") | Some("quoteM") => {
                let form = keyword.unwrap_or_default();
                arity(1, form)?;
                let Sexp::Str(text, so) = &args[0] else {
                    return err(args[0].offset(), format!("`{form}` expects a string"));
                };
                if form == "quoteA" {
                    parse_source(text)
                        .map(|t| MetaExpr::QuoteA(Rc::new(t)))
                        .or_else(|e| err(*so, format!("in quoteA: {e}")))
                } else {
                    parse_machine(text)
                        .map(|m| MetaExpr::QuoteM(Rc::new(m)))
                        .or_else(|e| err(*so, format!("in quoteM: {e}")))
                }
            }
            Some("cons") => {
                arity(2, "cons")?;
                Ok(MetaExpr::Cons(r(self.lower(&args[0])?), r(self.lower(&args[1])?)))
            }
            Some(form @ ("head" | "tail" | "nil?")) => {
                arity(1, form)?;
                let e = r(self.lower(&args[0])?);
                Ok(match form {
                    "head" => MetaExpr::Head(e),
                    "tail" => MetaExpr::Tail(e),
                    _ => MetaExpr::IsNil(e),
                })
            }
            Some(sym) if MetaOp::from_symbol(sym).is_some() => {
                arity(2, sym)?;
                let op = MetaOp::from_symbol(sym).unwrap_or(MetaOp::Add);
                Ok(MetaExpr::BinPrim(op, r(self.lower(&args[0])?), r(self.lower(&args[1])?)))
            }
            _ => {
                if args.is_empty() {
                    return err(o, "application needs at least one argument");
                }
                let mut f = self.lower(head)?;
                for a in args {
                    f = MetaExpr::Apply(r(f), r(self.lower(a)?));
                }
                Ok(f)
            }
        }
    }

    fn lambda(&mut self, names: &[Ident], body: &Sexp) -> Result<MetaExpr, HostParseError> {
        match names.split_first() {
            None => self.lower(body),
            Some((first, rest)) => {
                let inner = self.with_binder(first.clone(), |l| l.lambda(rest, body))?;
                Ok(MetaExpr::Lambda(first.clone(), Rc::new(inner)))
            }
        }
    }
}

pub fn parse_meta_expr(text: &str) -> Result<MetaExpr, HostParseError> {
    Lowering { scope: Vec::new() }.lower(&read_one(text)?)
}

pub fn parse_host_program(text: &str) -> Result<HostProgram, HostParseError> {
    match read_one(text)? {
        Sexp::List(items, o) => match items.as_slice() {
            [Sexp::Atom(a, _), arg] if a == "emit" => Ok(HostProgram::emit(
                Lowering { scope: Vec::new() }.lower(arg)?,
            )),
            _ => err(o, "a host program has the form `(emit expr)`"),
        },
        other => err(other.offset(), "a host program has the form `(emit expr)`"),
    }
}

/// Parses a program with exactly one `?` hole.
pub fn parse_host_template(text: &str) -> Result<HostTemplate, HostParseError> {
    let program = parse_host_program(text)?;
    HostTemplate::new(program).map_err(|e: TemplateError| HostParseError {
        offset: 0,
        message: e.to_string(),
    })
}

fn quote_string(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            other => out.push(other),
        }
    }
    out.push('"');
    out
}

pub(super) fn print_expr(e: &MetaExpr) -> String {
    let mut out = String::new();
    print_into(e, &mut out);
    out
}

fn print_into(e: &MetaExpr, out: &mut String) {
    let form = |name: &str, parts: &[&MetaExpr], out: &mut String| {
        out.push('(');
        out.push_str(name);
        for p in parts {
            out.push(' ');
            print_into(p, out);
        }
        out.push(')');
    };
    match e {
        MetaExpr::Int(n) => out.push_str(&n.to_string()),
        MetaExpr::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        MetaExpr::Var(x) => out.push_str(x.as_str()),
        MetaExpr::Prim(p) => out.push_str(p.name()),
        MetaExpr::UnsafeCode => out.push_str("unsafe"),
        MetaExpr::Nil => out.push_str("nil"),
        MetaExpr::Hole => out.push('?'),
        MetaExpr::QuoteA(t) => {
            out.push_str("(quoteA ");
            out.push_str(&quote_string(&pretty(t)));
            out.push(')');
        }
        MetaExpr::QuoteM(m) => {
            out.push_str("(quoteM ");
            out.push_str(&quote_string(&m.to_string()));
            out.push(')');
        }
        MetaExpr::Lambda(x, body) => {
            out.push_str("(lambda (");
            out.push_str(x.as_str());
            out.push_str(") ");
            print_into(body, out);
            out.push(')');
        }
        MetaExpr::Apply(..) => {
            let mut args = Vec::new();
            let mut f = e;
            while let MetaExpr::Apply(g, a) = f {
                args.push(&**a);
                f = g;
            }
            args.reverse();
            out.push('(');
            print_into(f, out);
            for a in args {
                out.push(' ');
                print_into(a, out);
            }
            out.push(')');
        }
        MetaExpr::Fix(b) => form("fix", &[b], out),
        MetaExpr::If(c, t, f) => form("if", &[c, t, f], out),
        MetaExpr::BinPrim(op, l, r) => form(op.symbol(), &[l, r], out),
        MetaExpr::Cons(h, t) => form("cons", &[h, t], out),
        MetaExpr::Head(x) => form("head", &[x], out),
        MetaExpr::Tail(x) => form("tail", &[x], out),
        MetaExpr::IsNil(x) => form("nil?", &[x], out),
    }
}
