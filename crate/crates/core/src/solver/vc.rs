//! Verification conditions from symbolic execution, and counterexample replay.

use std::collections::HashMap;

use super::term::{to_signed, Op, TermId, TermStore};
use super::{Formula, Model};
use crate::frontend::SourceLocation;
use crate::layout::Scalar;
use crate::symex::{ObjectKind, Step, VcBundle, INVALID_OBJECT, NULL_OBJECT, OFF_BITS};

/// One assignment of a counterexample.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceStep {
    pub loc: SourceLocation,
    pub lhs: String,
    pub value: String,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum TraceError {
    #[error("no claim with index {0}")]
    NoClaim(usize),
    #[error("model disagrees with equation for {0}")]
    Inconsistent(String),
    #[error("model violates an assumption at {0}")]
    AssumptionViolated(String),
    #[error("model does not violate the claim")]
    NotAViolation,
}

fn step_terms(s: &Step) -> (TermId, TermId, Option<TermId>) {
    match s {
        Step::Assign(e) => (e.guard, e.rhs, Some(e.var)),
        Step::Assume { guard, cond, .. } => (*guard, *cond, None),
    }
}

fn step_constraint(store: &mut TermStore, s: &Step) -> TermId {
    match s {
        Step::Assign(e) => {
            let eq = store.eq(e.var, e.rhs);
            store.implies(e.guard, eq)
        }
        Step::Assume { guard, cond, .. } => store.implies(*guard, *cond),
    }
}

/// Assignments as constraints; each claim's violation is a goal conjoined with the
/// assumptions executed before it, so a later assumption cannot mask an earlier claim.
pub fn encode(b: &mut VcBundle) -> Formula {
    let mut f = Formula::default();
    let mut assumed = Vec::with_capacity(b.steps.len() + 1);
    assumed.push(b.store.tru());
    for s in &b.steps {
        let c = step_constraint(&mut b.store, s);
        let prev = *assumed.last().unwrap();
        match s {
            Step::Assign(_) => {
                f.constraints.push(c);
                assumed.push(prev);
            }
            Step::Assume { .. } => assumed.push(b.store.and(prev, c)),
        }
    }
    for c in &b.claims {
        let nc = b.store.not(c.cond);
        let g = b.store.and(c.guard, nc);
        let before = assumed[c.steps_before.min(b.steps.len())];
        let g = b.store.and(before, g);
        f.goal.push(g);
    }
    f
}

/// Marks variables reachable from a term, never walking a term twice.
struct VarCollector {
    seen: Vec<bool>,
    vars: Vec<bool>,
}

impl VarCollector {
    fn new(n: usize) -> Self {
        VarCollector { seen: vec![false; n], vars: vec![false; n] }
    }

    fn add(&mut self, store: &TermStore, t: TermId) {
        let mut stack = vec![t];
        while let Some(t) = stack.pop() {
            if self.seen[t.index()] {
                continue;
            }
            self.seen[t.index()] = true;
            let n = store.node(t);
            if matches!(n.op, Op::Var(_)) {
                self.vars[t.index()] = true;
            }
            stack.extend(n.args.iter().copied());
        }
    }
}

/// Formula for one claim: the steps before it, restricted to its cone of influence.
pub fn encode_claim(b: &mut VcBundle, i: usize) -> Formula {
    let claim = &b.claims[i];
    let prefix = claim.steps_before.min(b.steps.len());
    let nc = b.store.not(claim.cond);
    let goal = b.store.and(claim.guard, nc);
    let mut col = VarCollector::new(b.store.len());
    col.add(&b.store, goal);
    for s in &b.steps[..prefix] {
        if let Step::Assume { guard, cond, .. } = s {
            col.add(&b.store, *guard);
            col.add(&b.store, *cond);
        }
    }
    let mut keep = vec![false; prefix];
    for (k, s) in b.steps[..prefix].iter().enumerate().rev() {
        let (g, rhs, var) = step_terms(s);
        match var {
            Some(v) if col.vars[v.index()] => {
                keep[k] = true;
                col.add(&b.store, g);
                col.add(&b.store, rhs);
            }
            Some(_) => {}
            None => keep[k] = true,
        }
    }
    let mut f = Formula { constraints: Vec::new(), goal: vec![goal] };
    for (k, s) in b.steps[..prefix].iter().enumerate() {
        if keep[k] {
            let c = step_constraint(&mut b.store, s);
            if b.store.as_bool(c) != Some(true) {
                f.constraints.push(c);
            }
        }
    }
    f
}

/// Text for a cell value.
pub fn render_value(b: &VcBundle, kind: Scalar, raw: u64) -> String {
    match kind {
        Scalar::Bool => if raw != 0 { "true" } else { "false" }.to_string(),
        Scalar::Bits(w) => to_signed(raw, w).to_string(),
        Scalar::Opaque(_) | Scalar::Vptr | Scalar::Pad => raw.to_string(),
        Scalar::Ptr => {
            let obj = (raw >> OFF_BITS) as u32;
            let off = to_signed(raw & super::term::mask(OFF_BITS), OFF_BITS);
            if obj == NULL_OBJECT && off == 0 {
                return "NULL".to_string();
            }
            if obj == INVALID_OBJECT || obj == NULL_OBJECT {
                return "INVALID".to_string();
            }
            match b.objects.get(obj as usize) {
                None => "INVALID".to_string(),
                Some(o) => {
                    let name = match &o.kind {
                        ObjectKind::Function(f) => f.clone(),
                        _ => o.name.clone(),
                    };
                    if off == 0 {
                        format!("&{name}")
                    } else {
                        format!("&{name}+{off}")
                    }
                }
            }
        }
    }
}

/// Replay the steps before claim `i` under `model`, checking that the model is a real violation.
pub fn extract_trace(b: &VcBundle, model: &Model, i: usize) -> Result<Vec<TraceStep>, TraceError> {
    let claim = b.claims.get(i).ok_or(TraceError::NoClaim(i))?;
    let prefix = claim.steps_before.min(b.steps.len());
    let store = &b.store;
    let mut assigned: HashMap<String, u64> = HashMap::new();
    let mut cache: HashMap<TermId, u64> = HashMap::new();
    let mut trace = Vec::new();
    for s in &b.steps[..prefix] {
        match s {
            Step::Assign(e) => {
                let env = |n: &str| assigned.get(n).copied().or_else(|| model.get(n));
                store.eval_cached(&[e.guard, e.rhs], &env, &mut cache);
                let name = e.lhs.to_string();
                let value = if cache[&e.guard] == 1 {
                    let v = cache[&e.rhs];
                    if let Some(m) = model.get(&name) {
                        if m != v {
                            return Err(TraceError::Inconsistent(name));
                        }
                    }
                    if !e.phi && e.kind != Scalar::Pad {
                        trace.push(TraceStep { loc: e.loc.clone(), lhs: e.display.clone(), value: render_value(b, e.kind, v) });
                    }
                    v
                } else {
                    model.get(&name).unwrap_or(0)
                };
                assigned.insert(name, value);
            }
            Step::Assume { guard, cond, loc } => {
                let env = |n: &str| assigned.get(n).copied().or_else(|| model.get(n));
                store.eval_cached(&[*guard, *cond], &env, &mut cache);
                if cache[guard] == 1 && cache[cond] == 0 {
                    return Err(TraceError::AssumptionViolated(loc.to_string()));
                }
            }
        }
    }
    let env = |n: &str| assigned.get(n).copied().or_else(|| model.get(n));
    store.eval_cached(&[claim.guard, claim.cond], &env, &mut cache);
    if cache[&claim.guard] != 1 || cache[&claim.cond] != 0 {
        return Err(TraceError::NotAViolation);
    }
    Ok(trace)
}
