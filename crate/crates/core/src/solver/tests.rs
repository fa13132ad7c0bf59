use super::term::mask;
use super::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sat(store: &TermStore, f: &Formula) -> Option<Model> {
    match solve(store, f, SolverOptions::default(), None).unwrap().0 {
        SolveResult::Sat(m) => Some(m),
        SolveResult::Unsat => None,
    }
}

#[test]
fn trivially_valid_assertion_is_unsat() {
    let mut s = TermStore::new();
    let x = s.var("x", Sort::Bv(32));
    let one = s.bv(32, 1);
    let e = s.eq(one, one);
    let violation = s.not(e);
    assert!(sat(&s, &Formula { constraints: vec![], goal: vec![violation] }).is_none());
    // with a variable that cannot fold away
    let y = s.var("y", Sort::Bv(32));
    let c = s.eq(y, x);
    let d = s.eq(x, y);
    let nd = s.not(d);
    assert!(sat(&s, &Formula { constraints: vec![c], goal: vec![nd] }).is_none());
}

#[test]
fn empty_goal_is_unsat() {
    let s = TermStore::new();
    assert!(sat(&s, &Formula::default()).is_none());
}

#[test]
fn eight_bit_commutativity_is_unsat_and_exhaustively_true() {
    for op in ["add", "mul", "and", "xor"] {
        let mut s = TermStore::new();
        let x = s.var("x", Sort::Bv(8));
        let y = s.var("y", Sort::Bv(8));
        let z = s.var("z", Sort::Bv(8));
        let same = s.eq(z, y);
        let apply = |s: &mut TermStore, a, b| match op {
            "add" => s.add(a, b),
            "mul" => s.mul(a, b),
            "and" => s.bvand(a, b),
            _ => s.bvxor(a, b),
        };
        // z is a copy of y so the two products are distinct terms
        let l = apply(&mut s, x, z);
        let r = apply(&mut s, y, x);
        assert_ne!(l, r);
        let e = s.eq(l, r);
        let goal = s.not(e);
        let f = Formula { constraints: vec![same], goal: vec![goal] };
        assert!(sat(&s, &f).is_none(), "{op} is commutative");
        for a in 0..256u64 {
            for b in 0..256u64 {
                let env = |n: &str| match n {
                    "x" => Some(a),
                    _ => Some(b),
                };
                assert_eq!(s.eval(goal, &env), 0);
            }
        }
    }
}

type Build = fn(&mut TermStore, TermId, TermId) -> TermId;

fn binary_ops() -> Vec<(&'static str, Build)> {
    vec![
        ("add", |s, a, b| s.add(a, b)),
        ("sub", |s, a, b| s.sub(a, b)),
        ("mul", |s, a, b| s.mul(a, b)),
        ("and", |s, a, b| s.bvand(a, b)),
        ("or", |s, a, b| s.bvor(a, b)),
        ("xor", |s, a, b| s.bvxor(a, b)),
        ("shl", |s, a, b| s.shl(a, b)),
        ("lshr", |s, a, b| s.lshr(a, b)),
        ("ashr", |s, a, b| s.ashr(a, b)),
        ("ult", |s, a, b| s.ult(a, b)),
        ("ule", |s, a, b| s.ule(a, b)),
        ("slt", |s, a, b| s.slt(a, b)),
        ("sle", |s, a, b| s.sle(a, b)),
        ("eq", |s, a, b| s.eq(a, b)),
        ("concat", |s, a, b| s.concat(a, b)),
        ("neg", |s, a, _| s.neg(a)),
        ("not", |s, a, _| s.bvnot(a)),
        ("extract", |s, a, _| s.extract(a, 2, 1)),
        ("zext", |s, a, _| s.zext(a, 3)),
        ("sext", |s, a, _| s.sext(a, 3)),
    ]
}

/// Reference semantics for width-4 operands, written out arithmetically.
fn reference(op: &str, a: u64, b: u64) -> u64 {
    let w = 4;
    let m = mask(w);
    let sa = if a & 8 != 0 { a as i64 - 16 } else { a as i64 };
    let sb = if b & 8 != 0 { b as i64 - 16 } else { b as i64 };
    match op {
        "add" => (a + b) & m,
        "sub" => (a + 16 - b) & m,
        "mul" => (a * b) & m,
        "and" => a & b,
        "or" => a | b,
        "xor" => a ^ b,
        "shl" => {
            if b >= 4 {
                0
            } else {
                (a << b) & m
            }
        }
        "lshr" => {
            if b >= 4 {
                0
            } else {
                a >> b
            }
        }
        "ashr" => ((sa >> b.min(3)) as u64) & m,
        "ult" => (a < b) as u64,
        "ule" => (a <= b) as u64,
        "slt" => (sa < sb) as u64,
        "sle" => (sa <= sb) as u64,
        "eq" => (a == b) as u64,
        "concat" => (a << 4) | b,
        "neg" => (16 - a) & m,
        "not" => !a & m,
        "extract" => (a >> 1) & 3,
        "zext" => a,
        "sext" => (sa as u64) & mask(7),
        _ => unreachable!(),
    }
}

#[test]
fn width_four_bit_blasting_is_exhaustively_correct() {
    for (name, build) in binary_ops() {
        let mut s = TermStore::new();
        let x = s.var("x", Sort::Bv(4));
        let y = s.var("y", Sort::Bv(4));
        let r = build(&mut s, x, y);
        let rw = s.width(r);
        let out = s.var("out", s.sort(r));
        let link = s.eq(out, r);
        for a in 0..16u64 {
            for b in 0..16u64 {
                let mut st = s.clone();
                let ka = st.bv(4, a);
                let kb = st.bv(4, b);
                let fa = st.eq(x, ka);
                let fb = st.eq(y, kb);
                let f = Formula { constraints: vec![link, fa, fb], goal: vec![st.tru()] };
                let m = sat(&st, &f).expect("inputs are unconstrained otherwise");
                let want = reference(name, a, b);
                assert_eq!(m.get("out").unwrap() & mask(rw), want, "{name} {a} {b}");
                assert_eq!(s.eval(r, &|n| if n == "x" { Some(a) } else { Some(b) }), want, "eval {name} {a} {b}");
            }
        }
    }
}

fn random_term(s: &mut TermStore, rng: &mut ChaCha8Rng, vars: &[TermId], depth: u32) -> TermId {
    if depth == 0 || rng.gen_bool(0.25) {
        return if rng.gen_bool(0.7) { vars[rng.gen_range(0..vars.len())] } else { s.bv(8, rng.gen_range(0..256)) };
    }
    let a = random_term(s, rng, vars, depth - 1);
    let b = random_term(s, rng, vars, depth - 1);
    match rng.gen_range(0..12) {
        0 => s.add(a, b),
        1 => s.sub(a, b),
        2 => s.mul(a, b),
        3 => s.bvand(a, b),
        4 => s.bvor(a, b),
        5 => s.bvxor(a, b),
        6 => s.shl(a, b),
        7 => s.ashr(a, b),
        8 => {
            let c = s.slt(a, b);
            let d = random_term(s, rng, vars, depth - 1);
            s.ite(c, d, a)
        }
        9 => s.neg(a),
        10 => {
            let lo = s.extract(a, 3, 0);
            let hi = s.extract(b, 7, 4);
            s.concat(hi, lo)
        }
        _ => s.lshr(a, b),
    }
}

#[test]
fn random_width_eight_terms_match_evaluation() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for round in 0..10_000 {
        let mut s = TermStore::new();
        let vars: Vec<TermId> = (0..3).map(|i| s.var(&format!("v{i}"), Sort::Bv(8))).collect();
        let t = random_term(&mut s, &mut rng, &vars, 3);
        let vals: Vec<u64> = (0..3).map(|_| rng.gen_range(0..256)).collect();
        let mut st = s.clone();
        let mut cons = Vec::new();
        for (v, &k) in vars.iter().zip(&vals) {
            let c = st.bv(8, k);
            cons.push(st.eq(*v, c));
        }
        let out = st.var("out", Sort::Bv(8));
        cons.push(st.eq(out, t));
        let m = sat(&st, &Formula { constraints: cons, goal: vec![st.tru()] }).unwrap();
        let env = |n: &str| n.strip_prefix('v').and_then(|i| i.parse::<usize>().ok()).map(|i| vals[i]);
        assert_eq!(m.get("out").unwrap(), s.eval(t, &env), "round {round}: {}", s.render(t));
    }
}

fn random_bool(s: &mut TermStore, rng: &mut ChaCha8Rng, vars: &[TermId], depth: u32) -> TermId {
    if depth == 0 {
        let v = vars[rng.gen_range(0..vars.len())];
        return if rng.gen_bool(0.5) { s.not(v) } else { v };
    }
    let a = random_bool(s, rng, vars, depth - 1);
    let b = random_bool(s, rng, vars, depth - 1);
    match rng.gen_range(0..5) {
        0 | 1 => s.and(a, b),
        2 => s.or(a, b),
        3 => s.xor(a, b),
        _ => {
            let c = random_bool(s, rng, vars, depth - 1);
            s.ite(c, a, b)
        }
    }
}

#[test]
fn random_twelve_variable_formulas_agree_with_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (mut n_sat, mut n_unsat) = (0, 0);
    for _ in 0..200 {
        let mut s = TermStore::new();
        let vars: Vec<TermId> = (0..12).map(|i| s.var(&format!("b{i}"), Sort::Bool)).collect();
        let clauses: Vec<TermId> = (0..rng.gen_range(4..24)).map(|_| random_bool(&mut s, &mut rng, &vars, 2)).collect();
        let f = Formula { constraints: clauses.clone(), goal: vec![s.tru()] };
        let all = s.and_all(clauses.iter().copied());
        let brute = (0..1u64 << 12).any(|bits| s.eval(all, &|n| n[1..].parse::<u32>().ok().map(|i| (bits >> i) & 1)) == 1);
        for h in [Heuristic::Vsids, Heuristic::Static] {
            let r = solve(&s, &f, SolverOptions { heuristic: h }, None).unwrap().0;
            match r {
                SolveResult::Sat(m) => {
                    assert!(brute);
                    assert_eq!(m.eval(&s, all), 1, "model satisfies the formula");
                }
                SolveResult::Unsat => assert!(!brute),
            }
        }
        if brute {
            n_sat += 1;
        } else {
            n_unsat += 1;
        }
    }
    assert!(n_sat > 0 && n_unsat > 0, "generator covers both outcomes: {n_sat} sat, {n_unsat} unsat");
}

#[test]
fn solving_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut s = TermStore::new();
    let vars: Vec<TermId> = (0..3).map(|i| s.var(&format!("v{i}"), Sort::Bv(8))).collect();
    let t = random_term(&mut s, &mut rng, &vars, 4);
    let k = s.bv(8, 77);
    let g = s.eq(t, k);
    let f = Formula { constraints: vec![], goal: vec![g] };
    let a = solve(&s, &f, SolverOptions::default(), None).unwrap().0;
    let b = solve(&s, &f, SolverOptions::default(), None).unwrap().0;
    assert_eq!(a, b);
    assert_eq!(emit_smt2(&s, &f), emit_smt2(&s, &f));
}

#[test]
fn cancellation_stops_the_search() {
    let mut s = TermStore::new();
    let x = s.var("x", Sort::Bv(32));
    let y = s.var("y", Sort::Bv(32));
    let p = s.mul(x, y);
    let k = s.bv(32, 0x7fff_ffff);
    let g = s.eq(p, k);
    let flag = std::sync::atomic::AtomicBool::new(true);
    let r = solve(&s, &Formula { constraints: vec![], goal: vec![g] }, SolverOptions::default(), Some(&flag));
    // a cancelled search may still finish by propagation alone; it must not report a wrong answer
    if let Ok((SolveResult::Sat(m), _)) = r {
        assert_eq!(m.eval(&s, g), 1);
    }
}

#[test]
fn smt2_script_declares_and_asserts() {
    let mut s = TermStore::new();
    let x = s.var("x!0!1", Sort::Bv(8));
    let five = s.bv(8, 5);
    let c = s.eq(x, five);
    let four = s.bv(8, 4);
    let e = s.eq(x, four);
    let g = s.not(e);
    let text = emit_smt2(&s, &Formula { constraints: vec![c], goal: vec![g] });
    assert!(text.starts_with("(set-logic QF_BV)"));
    assert!(text.contains("(declare-fun x!0!1 () (_ BitVec 8))"));
    assert!(text.contains("(check-sat)"));
    assert_eq!(text.matches("(assert ").count(), 2);
}

#[test]
fn cancelling_sums_fold_to_constants() {
    let mut s = TermStore::new();
    let x = s.var("x", Sort::Bv(32));
    let y = s.var("y", Sort::Bv(32));
    let m1 = s.bv_signed(32, -1);
    let xm = s.mul(x, m1);
    let zero = s.add(x, xm);
    assert_eq!(s.as_bv(zero), Some(0));
    let k3 = s.bv(32, 3);
    let xy = s.add(x, y);
    let lhs = s.mul(xy, k3);
    let x3 = s.mul(x, k3);
    let y3 = s.mul(y, k3);
    let rhs = s.add(y3, x3);
    assert_eq!(lhs, rhs);
    let e = s.eq(lhs, rhs);
    assert_eq!(s.as_bool(e), Some(true));
}

/// Linear expression over three 8-bit variables, evaluated independently of the term store.
#[derive(Debug)]
enum Lin {
    Var(usize),
    Lit(u8),
    Add(Box<Lin>, Box<Lin>),
    Sub(Box<Lin>, Box<Lin>),
    Neg(Box<Lin>),
    Scale(Box<Lin>, u8),
}

fn random_lin(rng: &mut ChaCha8Rng, depth: u32) -> Lin {
    if depth == 0 || rng.gen_bool(0.2) {
        return if rng.gen_bool(0.7) { Lin::Var(rng.gen_range(0..3)) } else { Lin::Lit(rng.gen()) };
    }
    let a = Box::new(random_lin(rng, depth - 1));
    match rng.gen_range(0..4) {
        0 => Lin::Add(a, Box::new(random_lin(rng, depth - 1))),
        1 => Lin::Sub(a, Box::new(random_lin(rng, depth - 1))),
        2 => Lin::Neg(a),
        _ => Lin::Scale(a, rng.gen()),
    }
}

fn lin_ref(e: &Lin, vals: &[u8]) -> u8 {
    match e {
        Lin::Var(i) => vals[*i],
        Lin::Lit(k) => *k,
        Lin::Add(a, b) => lin_ref(a, vals).wrapping_add(lin_ref(b, vals)),
        Lin::Sub(a, b) => lin_ref(a, vals).wrapping_sub(lin_ref(b, vals)),
        Lin::Neg(a) => lin_ref(a, vals).wrapping_neg(),
        Lin::Scale(a, k) => lin_ref(a, vals).wrapping_mul(*k),
    }
}

fn lin_term(s: &mut TermStore, e: &Lin, vars: &[TermId]) -> TermId {
    match e {
        Lin::Var(i) => vars[*i],
        Lin::Lit(k) => s.bv(8, *k as u64),
        Lin::Add(a, b) => {
            let (a, b) = (lin_term(s, a, vars), lin_term(s, b, vars));
            s.add(a, b)
        }
        Lin::Sub(a, b) => {
            let (a, b) = (lin_term(s, a, vars), lin_term(s, b, vars));
            s.sub(a, b)
        }
        Lin::Neg(a) => {
            let a = lin_term(s, a, vars);
            s.neg(a)
        }
        Lin::Scale(a, k) => {
            let a = lin_term(s, a, vars);
            let k = s.bv(8, *k as u64);
            s.mul(k, a)
        }
    }
}

#[test]
fn normalized_sums_match_reference_arithmetic() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for round in 0..3000 {
        let e = random_lin(&mut rng, 5);
        let mut s = TermStore::new();
        let vars: Vec<TermId> = (0..3).map(|i| s.var(&format!("v{i}"), Sort::Bv(8))).collect();
        let t = lin_term(&mut s, &e, &vars);
        for _ in 0..8 {
            let vals: [u8; 3] = rng.gen();
            let env = |n: &str| n.strip_prefix('v').and_then(|i| i.parse::<usize>().ok()).map(|i| vals[i] as u64);
            assert_eq!(s.eval(t, &env), lin_ref(&e, &vals) as u64, "round {round}: {e:?}");
        }
        let mut st = s.clone();
        let out = st.var("out", Sort::Bv(8));
        let ne = {
            let q = st.eq(out, t);
            st.not(q)
        };
        let vals: [u8; 3] = rng.gen();
        let mut cons: Vec<TermId> = Vec::new();
        for (v, &k) in vars.iter().zip(&vals) {
            let c = st.bv(8, k as u64);
            cons.push(st.eq(*v, c));
        }
        let kc = st.bv(8, lin_ref(&e, &vals) as u64);
        cons.push(st.eq(out, kc));
        assert!(sat(&st, &Formula { constraints: cons, goal: vec![ne] }).is_none(), "round {round}: bit-blasted value differs");
    }
}
