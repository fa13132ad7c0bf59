//! Random straight-line and branching programs checked against a concrete interpreter.

use minibmc_core::{verify_source, RunOptions, Status};
use proptest::prelude::*;

const VARS: usize = 3;

#[derive(Clone, Debug)]
enum Term {
    Var(usize),
    Lit(i8),
    Add(Box<Term>, Box<Term>),
    Mul(Box<Term>, i8),
}

#[derive(Clone, Debug)]
enum Stmt {
    Assign(usize, Term),
    If(Term, Term, Vec<Stmt>, Vec<Stmt>),
    Loop(u8, Vec<Stmt>),
    Assert(Term, Term),
}

fn term() -> impl Strategy<Value = Term> {
    let leaf = prop_oneof![(0..VARS).prop_map(Term::Var), any::<i8>().prop_map(Term::Lit)];
    leaf.prop_recursive(2, 6, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Term::Add(Box::new(a), Box::new(b))),
            (inner, -3i8..4).prop_map(|(a, k)| Term::Mul(Box::new(a), k)),
        ]
    })
}

fn program() -> impl Strategy<Value = Vec<Stmt>> {
    let leaf = prop_oneof![
        3 => ((0..VARS), term()).prop_map(|(v, t)| Stmt::Assign(v, t)),
        1 => (term(), term()).prop_map(|(a, b)| Stmt::Assert(a, b)),
    ];
    let s = leaf.prop_recursive(2, 10, 3, |inner| {
        prop_oneof![
            (term(), term(), prop::collection::vec(inner.clone(), 0..3), prop::collection::vec(inner.clone(), 0..3))
                .prop_map(|(a, b, t, e)| Stmt::If(a, b, t, e)),
            (1u8..3, prop::collection::vec(inner, 1..3)).prop_map(|(n, b)| Stmt::Loop(n, b)),
        ]
    });
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

fn emit(ss: &[Stmt], out: &mut String, loops: &mut usize) {
    for s in ss {
        match s {
            Stmt::Assign(v, t) => out.push_str(&format!("  v{v} = {};\n", term_src(t))),
            Stmt::Assert(a, b) => out.push_str(&format!("  assert({} < {});\n", term_src(a), term_src(b))),
            Stmt::If(a, b, t, e) => {
                out.push_str(&format!("  if ({} < {}) {{\n", term_src(a), term_src(b)));
                emit(t, out, loops);
                out.push_str("  } else {\n");
                emit(e, out, loops);
                out.push_str("  }\n");
            }
            Stmt::Loop(n, body) => {
                *loops += 1;
                let i = *loops;
                out.push_str(&format!("  for (int i{i} = 0; i{i} < {n}; i{i}++) {{\n"));
                emit(body, out, loops);
                out.push_str("  }\n");
            }
        }
    }
}

fn source(ss: &[Stmt]) -> String {
    let mut s = String::from("int main() {\n");
    for v in 0..VARS {
        s.push_str(&format!("  int v{v} = nondet_int();\n"));
    }
    emit(ss, &mut s, &mut 0);
    s.push_str("  return 0;\n}\n");
    s
}

fn eval(t: &Term, env: &[i32]) -> i32 {
    match t {
        Term::Var(v) => env[*v],
        Term::Lit(k) => *k as i32,
        Term::Add(a, b) => eval(a, env).wrapping_add(eval(b, env)),
        Term::Mul(a, k) => eval(a, env).wrapping_mul(*k as i32),
    }
}

/// Runs the program; `false` when an assertion fails.
fn exec(ss: &[Stmt], env: &mut [i32]) -> bool {
    for s in ss {
        let ok = match s {
            Stmt::Assign(v, t) => {
                env[*v] = eval(t, env);
                true
            }
            Stmt::Assert(a, b) => eval(a, env) < eval(b, env),
            Stmt::If(a, b, t, e) => {
                if eval(a, env) < eval(b, env) {
                    exec(t, env)
                } else {
                    exec(e, env)
                }
            }
            Stmt::Loop(n, body) => (0..*n).all(|_| exec(body, env)),
        };
        if !ok {
            return false;
        }
    }
    true
}

fn opts() -> RunOptions {
    RunOptions { unwind: 3, ..Default::default() }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 96, .. ProptestConfig::default() })]

    #[test]
    fn verdicts_agree_with_concrete_runs(ss in program(), samples in prop::collection::vec(prop::array::uniform3(-40i32..40), 24)) {
        let src = source(&ss);
        let v = verify_source(&src, "r.cpp", &opts());
        prop_assert_ne!(v.status, Status::Error, "{:?}\n{}", v.error, src);
        let concrete_failure = samples.iter().any(|s| !exec(&ss, &mut s.clone()));
        if concrete_failure {
            prop_assert_eq!(v.status, Status::Failed, "{}", src);
        }
        if v.status == Status::Failed {
            // the counterexample's input values must reproduce a failure
            let trace = &v.violation.as_ref().unwrap().trace;
            let mut env = [0i32; VARS];
            for (k, slot) in env.iter_mut().enumerate() {
                let name = format!("v{k}");
                let step = trace.iter().find(|s| s.lhs == name).expect("inputs appear in the trace");
                *slot = step.value.parse().unwrap();
            }
            prop_assert!(!exec(&ss, &mut env), "inputs {:?} do not fail\n{}", env, src);
        }
    }
}
