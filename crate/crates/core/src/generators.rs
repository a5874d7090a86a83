//! Seeded random generation of source programs and machine code.
//!
//! Source corpora mix three kinds of program: well-typed terms, terms made
//! ill-typed by a single mutation at a position whose type is forced, and
//! *escape rewrites* of earlier entries, where literals are replaced by
//! escapes computing the same constant. Rewrites compile to the same code as
//! the term they were derived from, so they populate non-trivial kernel
//! classes.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ident::Ident;
use crate::machine::{Instruction, MachineCode};
use crate::staged_source::{ArithOp, CmpOp, SourceTerm};

#[derive(Debug, Clone)]
pub struct CorpusConfig {
    pub size: usize,
    /// Maximum depth of the base terms (rewrites may add up to two levels).
    pub max_depth: usize,
    pub ill_typed_fraction: f64,
    /// Chance that a base term is followed by escape rewrites of itself.
    pub duplicate_fraction: f64,
    pub vars: Vec<String>,
}

impl CorpusConfig {
    /// Mixed corpus for semantics and staging checks.
    pub fn staging(size: usize) -> Self {
        CorpusConfig {
            size,
            max_depth: 6,
            ill_typed_fraction: 0.25,
            duplicate_fraction: 0.5,
            vars: vec!["x".into(), "y".into(), "z".into()],
        }
    }

    /// Half the programs ill-typed by construction.
    pub fn safety(size: usize) -> Self {
        CorpusConfig {
            ill_typed_fraction: 0.5,
            duplicate_fraction: 0.25,
            ..Self::staging(size)
        }
    }

    /// Well-typed programs only.
    pub fn well_typed(size: usize) -> Self {
        CorpusConfig {
            ill_typed_fraction: 0.0,
            duplicate_fraction: 0.0,
            ..Self::staging(size)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum GenTy {
    Int,
    Bool,
}

pub struct TermGenerator {
    rng: ChaCha8Rng,
    vars: Vec<Ident>,
}

impl TermGenerator {
    pub fn new(seed: u64, vars: &[String]) -> Self {
        TermGenerator {
            rng: ChaCha8Rng::seed_from_u64(seed),
            vars: vars.iter().map(|v| Ident::new(v).expect("generator variable")).collect(),
        }
    }

    fn small_int(&mut self) -> i64 {
        self.rng.gen_range(-9..=20)
    }

    /// A well-typed term of depth at most `depth`. Escape bodies are closed.
    pub fn well_typed(&mut self, depth: usize) -> SourceTerm {
        let ty = if self.rng.gen_bool(0.8) { GenTy::Int } else { GenTy::Bool };
        self.typed(ty, depth.max(1), false)
    }

    fn typed(&mut self, ty: GenTy, depth: usize, closed: bool) -> SourceTerm {
        let leaf = depth <= 1 || self.rng.gen_bool(0.25);
        if leaf {
            return match ty {
                GenTy::Int if !closed && !self.vars.is_empty() && self.rng.gen_bool(0.5) => {
                    SourceTerm::Var(self.vars.choose(&mut self.rng).unwrap().clone())
                }
                GenTy::Int => SourceTerm::Lit(self.small_int()),
                GenTy::Bool => SourceTerm::BoolLit(self.rng.gen()),
            };
        }
        let d = depth - 1;
        if !closed && self.rng.gen_bool(0.12) {
            return SourceTerm::escape(self.typed(ty, d, true));
        }
        match (ty, self.rng.gen_range(0..4)) {
            (GenTy::Int, 0) => {
                let c = self.typed(GenTy::Bool, d, closed);
                let t = self.typed(GenTy::Int, d, closed);
                let e = self.typed(GenTy::Int, d, closed);
                SourceTerm::if_(c, t, e)
            }
            (GenTy::Int, _) => {
                let op = *[ArithOp::Add, ArithOp::Sub, ArithOp::Mul].choose(&mut self.rng).unwrap();
                let l = self.typed(GenTy::Int, d, closed);
                let r = self.typed(GenTy::Int, d, closed);
                SourceTerm::binop(op, l, r)
            }
            (GenTy::Bool, 0) => {
                let c = self.typed(GenTy::Bool, d, closed);
                let t = self.typed(GenTy::Bool, d, closed);
                let e = self.typed(GenTy::Bool, d, closed);
                SourceTerm::if_(c, t, e)
            }
            (GenTy::Bool, _) => {
                let op = if self.rng.gen() { CmpOp::Lt } else { CmpOp::Eq };
                let l = self.typed(GenTy::Int, d, closed);
                let r = self.typed(GenTy::Int, d, closed);
                SourceTerm::cmp(op, l, r)
            }
        }
    }

    /// Break typing at one rigid position: an arithmetic or comparison operand
    /// (must be int) becomes a boolean literal, or a condition (must be bool)
    /// becomes an integer literal. Terms without such a position are wrapped
    /// as `t + true`.
    pub fn ill_typed(&mut self, term: &SourceTerm) -> SourceTerm {
        let n = rigid_positions(term);
        if n == 0 {
            return SourceTerm::binop(ArithOp::Add, term.clone(), SourceTerm::BoolLit(true));
        }
        let target = self.rng.gen_range(0..n);
        let b: bool = self.rng.gen();
        let k = self.small_int();
        let mut counter = 0;
        mutate_at(term, target, &mut counter, b, k)
    }

    /// Replace some literals by escapes that compute them. `None` when the
    /// term has no literal to rewrite.
    pub fn escape_rewrite(&mut self, term: &SourceTerm) -> Option<SourceTerm> {
        let n = count_literals(term);
        if n == 0 {
            return None;
        }
        let forced = self.rng.gen_range(0..n);
        let mut counter = 0;
        Some(self.rewrite(term, forced, &mut counter))
    }

    fn rewrite(&mut self, term: &SourceTerm, forced: usize, counter: &mut usize) -> SourceTerm {
        match term {
            SourceTerm::Lit(_) | SourceTerm::BoolLit(_) => {
                let idx = *counter;
                *counter += 1;
                if idx == forced || self.rng.gen_bool(0.3) {
                    SourceTerm::escape(self.computing(term))
                } else {
                    term.clone()
                }
            }
            SourceTerm::Var(_) => term.clone(),
            SourceTerm::BinOp(op, l, r) => {
                let l = self.rewrite(l, forced, counter);
                SourceTerm::binop(*op, l, self.rewrite(r, forced, counter))
            }
            SourceTerm::Cmp(op, l, r) => {
                let l = self.rewrite(l, forced, counter);
                SourceTerm::cmp(*op, l, self.rewrite(r, forced, counter))
            }
            SourceTerm::If(c, t, e) => {
                let c = self.rewrite(c, forced, counter);
                let t = self.rewrite(t, forced, counter);
                SourceTerm::if_(c, t, self.rewrite(e, forced, counter))
            }
            SourceTerm::Escape(b) => SourceTerm::escape(self.rewrite(b, forced, counter)),
        }
    }

    /// A closed expression of depth two whose value is the given literal.
    fn computing(&mut self, lit: &SourceTerm) -> SourceTerm {
        match lit {
            SourceTerm::Lit(n) => {
                let a = self.small_int();
                match self.rng.gen_range(0..3) {
                    0 => SourceTerm::binop(ArithOp::Add, SourceTerm::Lit(a), SourceTerm::Lit(n.wrapping_sub(a))),
                    1 => SourceTerm::binop(ArithOp::Sub, SourceTerm::Lit(n.wrapping_add(a)), SourceTerm::Lit(a)),
                    _ => SourceTerm::binop(ArithOp::Mul, SourceTerm::Lit(*n), SourceTerm::Lit(1)),
                }
            }
            SourceTerm::BoolLit(b) => {
                let a = self.small_int();
                if *b {
                    SourceTerm::cmp(CmpOp::Lt, SourceTerm::Lit(a), SourceTerm::Lit(a + 1))
                } else {
                    SourceTerm::cmp(CmpOp::Eq, SourceTerm::Lit(a), SourceTerm::Lit(a + 1))
                }
            }
            _ => unreachable!("only literals are rewritten"),
        }
    }

    pub fn corpus(&mut self, config: &CorpusConfig) -> Vec<SourceTerm> {
        let mut out = Vec::with_capacity(config.size);
        while out.len() < config.size {
            let base = self.well_typed(config.max_depth);
            let base = if self.rng.gen_bool(config.ill_typed_fraction) {
                self.ill_typed(&base)
            } else {
                base
            };
            let dups = if self.rng.gen_bool(config.duplicate_fraction) {
                self.rng.gen_range(1..=2)
            } else {
                0
            };
            let mut family = vec![base.clone()];
            for _ in 0..dups {
                if let Some(t) = self.escape_rewrite(&base) {
                    family.push(t);
                }
            }
            out.extend(family);
        }
        out.truncate(config.size);
        out
    }

    /// Random valid machine code: jump offsets always land inside the program
    /// or exactly at its end.
    pub fn machine_code(&mut self, max_len: usize) -> MachineCode {
        let len = self.rng.gen_range(1..=max_len.max(1));
        let mut instrs = Vec::with_capacity(len);
        for i in 0..len {
            let room = (len - i - 1) as u32;
            let ins = match self.rng.gen_range(0..12) {
                0..=2 => Instruction::PushI(self.small_int()),
                3 | 4 => Instruction::LoadV(self.vars.choose(&mut self.rng).cloned().unwrap_or_else(|| Ident::new("x").unwrap())),
                5 => Instruction::IAdd,
                6 => Instruction::ISub,
                7 => Instruction::IMul,
                8 => Instruction::ILt,
                9 => Instruction::IEq,
                10 => Instruction::Jmpz(self.rng.gen_range(0..=room)),
                _ if self.rng.gen_bool(0.8) => Instruction::Jmp(self.rng.gen_range(0..=room)),
                _ => Instruction::Trap,
            };
            instrs.push(ins);
        }
        MachineCode::new(instrs).expect("generated jumps are in range")
    }
}

pub fn generate_corpus(seed: u64, config: &CorpusConfig) -> Vec<SourceTerm> {
    TermGenerator::new(seed, &config.vars).corpus(config)
}

pub fn generate_machine_codes(seed: u64, n: usize, max_len: usize) -> Vec<MachineCode> {
    let mut g = TermGenerator::new(seed, &["x".into(), "y".into()]);
    (0..n).map(|_| g.machine_code(max_len)).collect()
}

fn count_literals(t: &SourceTerm) -> usize {
    match t {
        SourceTerm::Lit(_) | SourceTerm::BoolLit(_) => 1,
        _ => t.children().into_iter().map(count_literals).sum(),
    }
}

fn rigid_positions(t: &SourceTerm) -> usize {
    let own = match t {
        SourceTerm::BinOp(..) | SourceTerm::Cmp(..) => 2,
        SourceTerm::If(..) => 1,
        _ => 0,
    };
    own + t.children().into_iter().map(rigid_positions).sum::<usize>()
}

/// Rebuild `t`, replacing rigid position number `target` (numbered in the
/// same pre-order as [`rigid_positions`]) by a literal of the wrong type.
fn mutate_at(t: &SourceTerm, target: usize, counter: &mut usize, b: bool, k: i64) -> SourceTerm {
    let sub = |child: &SourceTerm, wrong: SourceTerm, counter: &mut usize| {
        let here = *counter == target;
        *counter += 1;
        (here, wrong, child.clone())
    };
    match t {
        SourceTerm::BinOp(_, l, r) | SourceTerm::Cmp(_, l, r) => {
            let (hl, wl, l) = sub(l, SourceTerm::BoolLit(b), counter);
            let (hr, wr, r) = sub(r, SourceTerm::BoolLit(b), counter);
            let l = if hl { wl } else { mutate_at(&l, target, counter, b, k) };
            let r = if hr { wr } else { mutate_at(&r, target, counter, b, k) };
            match t {
                SourceTerm::BinOp(op, ..) => SourceTerm::binop(*op, l, r),
                SourceTerm::Cmp(op, ..) => SourceTerm::cmp(*op, l, r),
                _ => unreachable!(),
            }
        }
        SourceTerm::If(c, th, el) => {
            let (hc, wc, c) = sub(c, SourceTerm::Lit(k), counter);
            let c = if hc { wc } else { mutate_at(&c, target, counter, b, k) };
            let th = mutate_at(th, target, counter, b, k);
            SourceTerm::if_(c, th, mutate_at(el, target, counter, b, k))
        }
        SourceTerm::Escape(body) => SourceTerm::escape(mutate_at(body, target, counter, b, k)),
        SourceTerm::Lit(_) | SourceTerm::BoolLit(_) | SourceTerm::Var(_) => t.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::DEFAULT_FUEL;
    use crate::staged_source::{check_membership, compile_a, typecheck};

    #[test]
    fn deterministic() {
        let c = CorpusConfig::staging(200);
        assert_eq!(generate_corpus(7, &c), generate_corpus(7, &c));
        assert_ne!(generate_corpus(7, &c), generate_corpus(8, &c));
    }

    #[test]
    fn corpus_is_in_language() {
        for t in generate_corpus(1, &CorpusConfig::safety(500)) {
            assert!(check_membership(&t).is_ok(), "{t:?}");
        }
    }

    #[test]
    fn well_typed_terms_typecheck() {
        let mut g = TermGenerator::new(3, &["x".into(), "y".into(), "z".into()]);
        for _ in 0..500 {
            let t = g.well_typed(6);
            assert!(t.depth() <= 6);
            assert!(typecheck(&t).is_safe(), "{t:?}");
            assert!(!typecheck(&g.ill_typed(&t)).is_safe());
        }
    }

    #[test]
    fn rewrites_compile_identically() {
        let mut g = TermGenerator::new(5, &["x".into(), "y".into()]);
        let mut rewritten = 0;
        for _ in 0..300 {
            let t = g.well_typed(5);
            if let Some(r) = g.escape_rewrite(&t) {
                assert_ne!(r, t);
                assert_eq!(compile_a(&r, DEFAULT_FUEL), compile_a(&t, DEFAULT_FUEL));
                rewritten += 1;
            }
        }
        assert!(rewritten > 200);
    }

    #[test]
    fn safety_corpus_is_about_half_ill_typed() {
        let corpus = generate_corpus(11, &CorpusConfig::safety(1000));
        let bad = corpus.iter().filter(|t| !typecheck(t).is_safe()).count();
        assert!((400..=600).contains(&bad), "{bad}");
    }

    #[test]
    fn machine_codes_are_valid() {
        for c in generate_machine_codes(2, 200, 12) {
            assert!(MachineCode::new(c.instrs().to_vec()).is_ok());
        }
    }
}
