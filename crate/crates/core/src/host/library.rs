//! Meta programs written in the host language itself.

use super::{parse_host_program, parse_meta_expr, HostProgram, MetaExpr};

/// Loops forever at compile time.
pub const DIVERGENT_PROGRAM: &str = "(emit ((fix (lambda (f) (lambda (x) (f x)))) 0))";

/// Source-level constant folder over source codes.
///
/// Arithmetic and comparisons whose operands fold to literals are replaced
/// by their value, conditionals with a literal condition are replaced by the
/// selected branch, and escape bodies are folded in place.
pub const CONST_FOLD: &str = r#"
(let (arith (lambda (op a b) (if (= op 0) (+ a b) (if (= op 1) (- a b) (* a b)))))
(let (cmpop (lambda (op a b) (if (= op 0) (< a b) (= a b))))
(let (lits (lambda (l r) (if (= (a_kind l) 0) (= (a_kind r) 0) false)))
(fix (lambda (fold) (lambda (c)
  (let (k (a_kind c))
  (if (< k 3) c
  (if (= k 3)
    (let (l (fold (a_child c 0)))
    (let (r (fold (a_child c 1)))
      (if (lits l r)
        (a_mk_lit (arith (a_op c) (a_int l) (a_int r)))
        (a_mk_binop (a_op c) l r))))
  (if (= k 4)
    (let (l (fold (a_child c 0)))
    (let (r (fold (a_child c 1)))
      (if (lits l r)
        (a_mk_bool (cmpop (a_op c) (a_int l) (a_int r)))
        (a_mk_cmp (a_op c) l r))))
  (if (= k 5)
    (let (g (fold (a_child c 0)))
      (if (= (a_kind g) 1)
        (if (a_bool g) (fold (a_child c 1)) (fold (a_child c 2)))
        (a_mk_if g (fold (a_child c 1)) (fold (a_child c 2)))))
  (a_mk_escape (fold (a_child c 0))))))))))))))
"#;

/// The staged source compiler written as a host function, without calling
/// the `compile_a` primitive: escapes are evaluated to literal codes, then
/// stack code is assembled from machine-code fragments.
pub const PHI_A: &str = r#"
(let (arith (lambda (op a b) (if (= op 0) (+ a b) (if (= op 1) (- a b) (* a b)))))
(let (cmpop (lambda (op a b) (if (= op 0) (< a b) (= a b))))
(let (ev (fix (lambda (ev) (lambda (c)
  (let (k (a_kind c))
  (if (< k 2) c
  (if (= k 3) (a_mk_lit (arith (a_op c) (a_int (ev (a_child c 0))) (a_int (ev (a_child c 1)))))
  (if (= k 4) (a_mk_bool (cmpop (a_op c) (a_int (ev (a_child c 0))) (a_int (ev (a_child c 1)))))
  (if (= k 5) (if (a_bool (ev (a_child c 0))) (ev (a_child c 1)) (ev (a_child c 2)))
  (if (= k 6) (ev (a_child c 0))
    (a_int c)))))))))))
(fix (lambda (comp) (lambda (c)
  (let (k (a_kind c))
  (if (= k 0) (m_pushi (a_int c))
  (if (= k 1) (m_pushi (if (a_bool c) 1 0))
  (if (= k 2) (m_loadv c)
  (if (= k 3) (m_concat (comp (a_child c 0)) (m_concat (comp (a_child c 1)) (m_op (a_op c))))
  (if (= k 4) (m_concat (comp (a_child c 0)) (m_concat (comp (a_child c 1)) (m_op (+ 3 (a_op c)))))
  (if (= k 5)
    (let (tc (comp (a_child c 1)))
    (let (ec (comp (a_child c 2)))
      (m_concat (comp (a_child c 0))
        (m_concat (m_jmpz (+ (m_len tc) 1))
          (m_concat tc (m_concat (m_jmp (m_len ec)) ec))))))
  (comp (ev (a_child c 0))))))))))))))))
"#;

pub fn divergent_program() -> HostProgram {
    parse_host_program(DIVERGENT_PROGRAM).expect("library program parses")
}

pub fn const_fold() -> MetaExpr {
    parse_meta_expr(CONST_FOLD).expect("library function parses")
}

pub fn phi_a() -> MetaExpr {
    parse_meta_expr(PHI_A).expect("library function parses")
}
