use std::fmt::Write as _;

use super::term::{op_symbol, quote_symbol, Op, Sort, TermStore};
use super::Formula;

fn sort_text(s: Sort) -> String {
    match s {
        Sort::Bool => "Bool".to_string(),
        Sort::Bv(w) => format!("(_ BitVec {w})"),
    }
}

/// QF_BV script: declarations, one assertion for the constraints and one for the goal.
pub fn emit_smt2(store: &TermStore, f: &Formula) -> String {
    let mut out = String::new();
    out.push_str("(set-logic QF_BV)\n(set-option :produce-models true)\n");
    let mut roots = f.constraints.clone();
    roots.extend(f.goal.iter().copied());
    let cone = store.cone(&roots);
    for &t in &cone {
        if let Op::Var(name) = &store.node(t).op {
            let _ = writeln!(out, "(declare-fun {} () {})", quote_symbol(name), sort_text(store.sort(t)));
        }
    }
    // shared subterms are named once
    let mut shared = vec![0u32; store.len()];
    for &t in &cone {
        for a in store.node(t).args.iter() {
            shared[a.index()] += 1;
        }
    }
    let mut names: std::collections::HashMap<usize, String> = std::collections::HashMap::new();
    for &t in &cone {
        let n = store.node(t);
        if n.args.is_empty() || shared[t.index()] < 2 {
            continue;
        }
        let body = render_with(store, t, &names);
        let name = format!("t!{}", t.index());
        let _ = writeln!(out, "(define-fun {} () {} {})", name, sort_text(n.sort), body);
        names.insert(t.index(), name);
    }
    let conj = if f.constraints.is_empty() {
        "true".to_string()
    } else {
        let parts: Vec<String> = f.constraints.iter().map(|&c| render_ref(store, c, &names)).collect();
        if parts.len() == 1 {
            parts[0].clone()
        } else {
            format!("(and {})", parts.join(" "))
        }
    };
    let _ = writeln!(out, "(assert {conj})");
    let goal = if f.goal.is_empty() {
        "false".to_string()
    } else {
        let parts: Vec<String> = f.goal.iter().map(|&c| render_ref(store, c, &names)).collect();
        if parts.len() == 1 {
            parts[0].clone()
        } else {
            format!("(or {})", parts.join(" "))
        }
    };
    let _ = writeln!(out, "(assert {goal})");
    out.push_str("(check-sat)\n(get-model)\n");
    out
}

fn render_ref(store: &TermStore, t: super::TermId, names: &std::collections::HashMap<usize, String>) -> String {
    match names.get(&t.index()) {
        Some(n) => n.clone(),
        None => render_with(store, t, names),
    }
}

fn render_with(store: &TermStore, t: super::TermId, names: &std::collections::HashMap<usize, String>) -> String {
    let n = store.node(t);
    if n.args.is_empty() {
        return store.render(t);
    }
    let op = op_symbol(&n.op);
    let args: Vec<String> = n.args.iter().map(|&a| render_ref(store, a, names)).collect();
    format!("({} {})", op, args.join(" "))
}
