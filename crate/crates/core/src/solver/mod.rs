//! Bit-vector decision procedure: terms, bit-blasting, CDCL search and SMT-LIB output.

mod bitblast;
pub mod sat;
mod smt2;
pub mod term;
mod vc;

use std::collections::BTreeMap;
use std::sync::atomic::AtomicBool;

pub use bitblast::BitBlaster;
pub use sat::{Cancelled, Heuristic, SatResult, SatSolver};
pub use smt2::emit_smt2;
pub use term::{Op, Sort, TermId, TermStore};
pub use vc::{encode, encode_claim, extract_trace, render_value, TraceError, TraceStep};

/// Constraints that must all hold, plus a goal disjunction of violations.
#[derive(Clone, Debug, Default)]
pub struct Formula {
    pub constraints: Vec<TermId>,
    pub goal: Vec<TermId>,
}

/// Variable assignment returned for satisfiable formulas.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Model {
    pub values: BTreeMap<String, u64>,
}

impl Model {
    pub fn get(&self, name: &str) -> Option<u64> {
        self.values.get(name).copied()
    }

    pub fn eval(&self, store: &TermStore, t: TermId) -> u64 {
        store.eval(t, &|n| self.get(n))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SolveResult {
    Sat(Model),
    Unsat,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct SolverOptions {
    pub heuristic: Heuristic,
}

/// Statistics of the last search, for reporting.
#[derive(Clone, Copy, Debug, Default)]
pub struct SolveStats {
    pub vars: u32,
    pub conflicts: u64,
    pub decisions: u64,
}

/// Decide `constraints && (goal_1 || ... || goal_n)`.
pub fn solve(store: &TermStore, f: &Formula, opts: SolverOptions, cancel: Option<&AtomicBool>) -> Result<(SolveResult, SolveStats), Cancelled> {
    let mut bb = BitBlaster::new(store, SatSolver::new(opts.heuristic));
    for &c in &f.constraints {
        bb.assert_true(c);
    }
    let goal: Vec<_> = f.goal.iter().map(|&t| bb.blast(t)[0]).collect();
    bb.sat.add_clause(&goal);
    let r = bb.sat.solve(cancel)?;
    let stats = SolveStats { vars: bb.sat.num_vars(), conflicts: bb.sat.conflicts, decisions: bb.sat.decisions };
    Ok(match r {
        SatResult::Unsat => (SolveResult::Unsat, stats),
        SatResult::Sat => {
            let mut m = Model::default();
            for (name, _, bits) in &bb.vars {
                m.values.insert(name.to_string(), bb.value_of(bits));
            }
            (SolveResult::Sat(m), stats)
        }
    })
}

#[cfg(test)]
mod tests;
