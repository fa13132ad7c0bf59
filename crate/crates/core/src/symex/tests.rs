use super::*;
use crate::frontend::parse_source;
use crate::frontend::typecheck::typecheck;
use crate::goto::{lower, GotoProgram, LowerOptions};
use crate::layout::build_object_models;
use crate::solver::{encode_claim, extract_trace, solve, SolveResult, SolverOptions};
use crate::templates::{monomorphize, DEFAULT_MAX_DEPTH};
use proptest::prelude::*;
use std::collections::HashSet;

fn program(src: &str, leak: bool) -> GotoProgram {
    let tu = parse_source(src, "t.cpp").unwrap();
    let m = monomorphize(&tu, DEFAULT_MAX_DEPTH).unwrap();
    let tp = typecheck(&m.unit, 32, &m.instances).unwrap();
    let lay = build_object_models(&tp);
    lower(&tp, &lay, LowerOptions { memory_leak_check: leak }).unwrap()
}

fn run(src: &str, unwind: u32) -> VcBundle {
    symex(&program(src, false), &SymexOptions { unwind, ..Default::default() }).unwrap()
}

fn classes(b: &VcBundle) -> Vec<&str> {
    b.claims.iter().map(|c| c.class.as_str()).collect()
}

/// Index of the first claim the solver can violate.
fn first_violation(b: &mut VcBundle) -> Option<usize> {
    for i in 0..b.claims.len() {
        let f = encode_claim(b, i);
        if let (SolveResult::Sat(m), _) = solve(&b.store, &f, SolverOptions::default(), None).unwrap() {
            extract_trace(b, &m, i).expect("model replays");
            return Some(i);
        }
    }
    None
}

fn corpus(name: &str) -> String {
    std::fs::read_to_string(format!("{}/../../corpus/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

#[test]
fn polymorphism_straight_line_has_one_assertion_claim() {
    let b = run(&corpus("example_polymorphism.cpp"), 1);
    assert_eq!(classes(&b), vec![class::ASSERTION]);
}

#[test]
fn infinite_loop_is_cut_without_claims() {
    let b = run("int main(){ while(1){} }", 3);
    assert!(b.claims.is_empty());
    let cut = b.steps.iter().any(|s| matches!(s, Step::Assume { cond, .. } if b.store.as_bool(*cond) == Some(false)));
    assert!(cut, "loop exit must be assumed away after the bound");
}

#[test]
fn bounded_for_loop_yields_one_claim_per_iteration() {
    let mut b = run("int main(){ for (int i = 0; i < 2; i++) assert(i < 2); }", 2);
    assert_eq!(classes(&b), vec![class::ASSERTION, class::ASSERTION]);
    assert_eq!(first_violation(&mut b), None);
}

#[test]
fn throw_without_handler_is_uncaught() {
    let b = run("int main(){ throw 1; }", 10);
    assert_eq!(classes(&b), vec![class::UNCAUGHT]);
    assert_eq!(b.store.as_bool(b.claims[0].cond), Some(false));
}

#[test]
fn callee_throw_is_caught_like_the_inlined_program() {
    let called = "void f(int v) { if (v > 0) throw v; } int main(){ int x = nondet_int(); try { f(x); } catch (int e) { assert(e > 0); } }";
    let inlined = "int main(){ int x = nondet_int(); try { if (x > 0) throw x; } catch (int e) { assert(e > 0); } }";
    let mut a = run(called, 10);
    let mut b = run(inlined, 10);
    assert_eq!(classes(&a), classes(&b));
    assert_eq!(first_violation(&mut a), first_violation(&mut b));
    assert_eq!(first_violation(&mut a), None);
}

#[test]
fn dynamic_spec_violation_is_claimed() {
    let b = run("void f() throw(int, double) { throw 'c'; } int main(){ try { f(); } catch (...) {} }", 10);
    assert_eq!(classes(&b), vec![class::THROW_SPEC]);
}

#[test]
fn noexcept_without_throw_has_no_claims() {
    let b = run("void f() noexcept {} int main(){ f(); }", 10);
    assert!(b.claims.is_empty());
}

#[test]
fn conforming_throw_is_caught_normally() {
    let mut b = run("void f() throw(int) { throw 1; } int main(){ try { f(); } catch (int e) { assert(e == 1); } }", 10);
    assert_eq!(classes(&b), vec![class::ASSERTION]);
    assert_eq!(first_violation(&mut b), None);
}

#[test]
fn rethrow_without_active_exception_is_uncaught() {
    let b = run("int main(){ throw; }", 10);
    assert_eq!(classes(&b), vec![class::UNCAUGHT]);
}

#[test]
fn rethrow_reaches_outer_handler() {
    let src = "int main(){ try { try { throw 5; } catch (int) { throw; } } catch (int e) { assert(e == 5); } }";
    let mut b = run(src, 10);
    assert_eq!(classes(&b), vec![class::ASSERTION]);
    assert_eq!(first_violation(&mut b), None);
}

#[test]
fn double_delete_violates_validity() {
    let mut b = run("int main(){ int *p = new int; delete p; delete p; }", 10);
    let i = first_violation(&mut b).expect("double free is reachable");
    assert_eq!(b.claims[i].class, class::BAD_DELETE);
}

#[test]
fn array_delete_mismatch() {
    let mut b = run("int main(){ int *p = new int[3]; delete p; }", 10);
    let i = first_violation(&mut b).unwrap();
    assert_eq!(b.claims[i].class, class::MISMATCH);
}

#[test]
fn zero_length_array_rejects_any_access() {
    let mut b = run("int main(){ int *p = new int[0]; int v = p[0]; delete[] p; }", 10);
    let i = first_violation(&mut b).unwrap();
    assert_eq!(b.claims[i].class, class::BOUNDS);
}

#[test]
fn symbolic_array_length_bounds() {
    let ok = "int main(){ int n = nondet_int(); __ESBMC_assume(n == 3); int *p = new int[n]; p[2] = 1; delete[] p; }";
    let bad = "int main(){ int n = nondet_int(); __ESBMC_assume(n == 3); int *p = new int[n]; p[3] = 1; delete[] p; }";
    assert_eq!(first_violation(&mut run(ok, 10)), None);
    let mut b = run(bad, 10);
    let i = first_violation(&mut b).unwrap();
    assert_eq!(b.claims[i].class, class::BOUNDS);
}

#[test]
fn negative_array_length_is_a_bad_allocation() {
    let mut b = run("int main(){ int n = nondet_int(); int *p = new int[n]; delete[] p; }", 10);
    let i = first_violation(&mut b).unwrap();
    assert_eq!(b.claims[i].class, class::BAD_ALLOC);
    assert_eq!(b.claims[i].comment, "array size is negative");
}

#[test]
fn pointer_past_local_array_is_out_of_bounds() {
    let mut b = run("int main(){ int a[2]; int *p = &a[0]; int v = *(p + 2); }", 10);
    let i = first_violation(&mut b).unwrap();
    assert_eq!(b.claims[i].class, class::BOUNDS);
}

#[test]
fn fresh_allocation_is_safe_to_use() {
    let b = run("int main(){ int *p = new int; *p = 4; assert(*p == 4); delete p; }", 10);
    assert_eq!(classes(&b), vec![class::ASSERTION]);
}

#[test]
fn null_dereference_is_claimed() {
    let mut b = run("int main(){ int *p = nullptr; if (nondet_bool()) p = new int; *p = 1; }", 10);
    let i = first_violation(&mut b).unwrap();
    assert_eq!(b.claims[i].class, class::NULL_DEREF);
}

#[test]
fn use_after_scope_is_a_dead_object() {
    let mut b = run("int main(){ int *q; { int y = 3; q = &y; } return *q; }", 10);
    let i = first_violation(&mut b).unwrap();
    assert_eq!(b.claims[i].class, class::DEAD_OBJECT);
}

#[test]
fn recursion_is_bounded_by_the_unwind_limit() {
    let src = "int f(int n){ if (n <= 0) return 0; return 1 + f(n - 1); } int main(){ int r = f(5); assert(r == 5); }";
    assert_eq!(first_violation(&mut run(src, 10)), None);
    let p = program(src, false);
    let b = symex(&p, &SymexOptions { unwind: 3, unwinding_assertions: true, cancel: None }).unwrap();
    assert!(classes(&b).contains(&class::UNWIND));
}

#[test]
fn leak_check_claims_only_with_allocations() {
    let p = program("int main(){ int *p = new int; }", true);
    let mut b = symex(&p, &SymexOptions::default()).unwrap();
    let i = first_violation(&mut b).unwrap();
    assert_eq!(b.claims[i].class, class::LEAK);
    let p = program("int main(){ int *p = new int; delete p; }", true);
    let mut b = symex(&p, &SymexOptions::default()).unwrap();
    assert_eq!(first_violation(&mut b), None);
}

#[test]
fn bad_bound_and_cancellation() {
    let p = program("int main(){}", false);
    assert_eq!(symex(&p, &SymexOptions { unwind: 0, ..Default::default() }).unwrap_err(), SymexError::BadBound);
    let flag = Arc::new(AtomicBool::new(true));
    let err = symex(&p, &SymexOptions { cancel: Some(flag), ..Default::default() }).unwrap_err();
    assert_eq!(err, SymexError::Cancelled);
}

#[test]
fn ssa_listing_is_stable() {
    let src = "int main(){ int x = nondet_int(); if (x > 0) x = 1; assert(x != 2); }";
    assert_eq!(run(src, 10).render_ssa(), run(src, 10).render_ssa());
}

// ---- randomized programs -------------------------------------------------

#[derive(Clone, Debug)]
enum Stmt {
    Assign(usize, Term),
    If(Cond, Vec<Stmt>, Vec<Stmt>),
    Loop(u8, Vec<Stmt>),
    Assert(Cond),
    Alloc(bool),
}

#[derive(Clone, Debug)]
enum Term {
    Var(usize),
    Lit(i8),
    Add(Box<Term>, Box<Term>),
    Mul(Box<Term>, i8),
}

#[derive(Clone, Debug)]
struct Cond(Term, Term);

const VARS: usize = 3;

fn term() -> impl Strategy<Value = Term> {
    let leaf = prop_oneof![(0..VARS).prop_map(Term::Var), any::<i8>().prop_map(Term::Lit)];
    leaf.prop_recursive(2, 6, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Term::Add(Box::new(a), Box::new(b))),
            (inner, -3i8..4).prop_map(|(a, k)| Term::Mul(Box::new(a), k)),
        ]
    })
}

fn cond() -> impl Strategy<Value = Cond> {
    (term(), term()).prop_map(|(a, b)| Cond(a, b))
}

fn stmts(alloc: bool) -> impl Strategy<Value = Vec<Stmt>> {
    let leaf = prop_oneof![
        4 => ((0..VARS), term()).prop_map(|(v, t)| Stmt::Assign(v, t)),
        1 => cond().prop_map(Stmt::Assert),
        if alloc { 1 } else { 0 } => any::<bool>().prop_map(Stmt::Alloc),
    ];
    let s = leaf.prop_recursive(2, 12, 3, |inner| {
        prop_oneof![
            (cond(), prop::collection::vec(inner.clone(), 0..3), prop::collection::vec(inner.clone(), 0..3)).prop_map(|(c, a, b)| Stmt::If(c, a, b)),
            (1u8..3, prop::collection::vec(inner, 1..3)).prop_map(|(n, b)| Stmt::Loop(n, b)),
        ]
    });
    prop::collection::vec(s, 1..6)
}

fn flat_ifs() -> impl Strategy<Value = Vec<Stmt>> {
    let assign = || ((0..VARS), term()).prop_map(|(v, t)| Stmt::Assign(v, t));
    let branch = || prop::collection::vec(assign(), 0..3);
    let s = prop_oneof![assign(), (cond(), branch(), branch()).prop_map(|(c, a, b)| Stmt::If(c, a, b))];
    prop::collection::vec(s, 1..6)
}

fn term_src(t: &Term) -> String {
    match t {
        Term::Var(v) => format!("v{v}"),
        Term::Lit(k) => format!("({k})"),
        Term::Add(a, b) => format!("({} + {})", term_src(a), term_src(b)),
        Term::Mul(a, k) => format!("({} * ({k}))", term_src(a)),
    }
}

fn stmts_src(ss: &[Stmt], out: &mut String, loop_id: &mut usize) {
    for s in ss {
        match s {
            Stmt::Assign(v, t) => out.push_str(&format!("v{v} = {};\n", term_src(t))),
            Stmt::Assert(Cond(a, b)) => out.push_str(&format!("assert({} < {});\n", term_src(a), term_src(b))),
            Stmt::If(Cond(a, b), t, e) => {
                out.push_str(&format!("if ({} < {}) {{\n", term_src(a), term_src(b)));
                stmts_src(t, out, loop_id);
                out.push_str("} else {\n");
                stmts_src(e, out, loop_id);
                out.push_str("}\n");
            }
            Stmt::Loop(n, body) => {
                *loop_id += 1;
                let i = *loop_id;
                out.push_str(&format!("for (int i{i} = 0; i{i} < {n}; i{i}++) {{\n"));
                stmts_src(body, out, loop_id);
                out.push_str("}\n");
            }
            Stmt::Alloc(free) => {
                out.push_str("{ int *q = new int; *q = v0;");
                if *free {
                    out.push_str(" delete q;");
                }
                out.push_str(" }\n");
            }
        }
    }
}

fn source(ss: &[Stmt]) -> String {
    let mut s = String::from("int main() {\n");
    for v in 0..VARS {
        s.push_str(&format!("int v{v} = nondet_int();\n"));
    }
    stmts_src(ss, &mut s, &mut 0);
    s.push_str("return 0;\n}\n");
    s
}

fn ssa_names_unique(b: &VcBundle) -> bool {
    let mut seen = HashSet::new();
    b.equations().all(|e| seen.insert(e.lhs.clone()))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, .. ProptestConfig::default() })]

    #[test]
    fn every_ssa_name_is_assigned_once(ss in stmts(true)) {
        let b = run(&source(&ss), 2);
        prop_assert!(ssa_names_unique(&b));
    }

    #[test]
    fn programs_without_new_have_no_memory_claims(ss in stmts(false)) {
        let p = program(&source(&ss), true);
        let b = symex(&p, &SymexOptions { unwind: 2, ..Default::default() }).unwrap();
        for c in &b.claims {
            prop_assert!(![class::BAD_DELETE, class::MISMATCH, class::LEAK].contains(&c.class.as_str()));
        }
    }

    #[test]
    fn merged_guards_cover_the_branch_point(ss in flat_ifs()) {
        // every branch starts under guard true, so each merge must restore it
        let b = run(&source(&ss), 3);
        for e in b.equations().filter(|e| e.phi) {
            let f = crate::solver::Formula { constraints: vec![], goal: vec![e.guard] };
            let mut store = b.store.clone();
            let ng = store.not(e.guard);
            let f = crate::solver::Formula { goal: vec![ng], ..f };
            prop_assert_eq!(solve(&store, &f, SolverOptions::default(), None).unwrap().0, SolveResult::Unsat);
        }
    }

    #[test]
    fn counterexamples_are_no_longer_than_the_unrolled_program(ss in stmts(true)) {
        let mut b = run(&source(&ss), 2);
        if let Some(i) = first_violation(&mut b) {
            let f = encode_claim(&mut b, i);
            let SolveResult::Sat(m) = solve(&b.store, &f, SolverOptions::default(), None).unwrap().0 else { unreachable!() };
            let trace = extract_trace(&b, &m, i).unwrap();
            prop_assert!(trace.len() <= b.claims[i].steps_before);
        }
    }
}
