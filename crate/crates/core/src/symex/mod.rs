//! Bounded symbolic execution of GOTO programs into SSA equations and claims.

mod engine;
pub mod exceptions;

use std::fmt;
use std::sync::atomic::AtomicBool;
use std::sync::Arc;

use crate::frontend::{SourceLocation, TypeRepr};
use crate::solver::{TermId, TermStore};

pub use engine::symex;
pub use exceptions::{handler_accepts, match_exception, spec_allows, Adjust};

/// Bits of the object-id half of a pointer.
pub const OBJ_BITS: u32 = 16;
/// Bits of the cell-offset half of a pointer.
pub const OFF_BITS: u32 = 32;
/// Total pointer width.
pub const PTR_BITS: u32 = OBJ_BITS + OFF_BITS;
/// Object 0 is null, object 1 stands for every invalid address.
pub const NULL_OBJECT: u32 = 0;
pub const INVALID_OBJECT: u32 = 1;
/// Cells allocated for a dynamic array whose length is not a constant.
pub const SYMBOLIC_ARRAY_CAP: usize = 16;
/// Largest constant-length dynamic array modelled cell by cell.
pub const CONSTANT_ARRAY_CAP: usize = 4096;

pub mod class {
    pub const ASSERTION: &str = "assertion";
    pub const NULL_DEREF: &str = "dereference failure: NULL pointer";
    pub const INVALID_POINTER: &str = "dereference failure: invalid pointer";
    pub const INVALIDATED: &str = "dereference failure: invalidated dynamic object";
    pub const DEAD_OBJECT: &str = "dereference failure: dead object";
    pub const BOUNDS: &str = "dereference failure: array bounds violated";
    pub const BAD_DELETE: &str = "invalid object in delete";
    pub const MISMATCH: &str = "operator mismatch";
    pub const LEAK: &str = "memory leak";
    pub const BAD_ALLOC: &str = "bad allocation";
    pub const UNCAUGHT: &str = "uncaught exception";
    pub const THROW_SPEC: &str = "throw specification violation";
    pub const UNWIND: &str = "unwinding assertion";
}

/// SSA symbol: one version of a storage cell in one activation.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SsaName {
    pub base: String,
    pub frame: u32,
    pub version: u32,
}

impl fmt::Display for SsaName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}!{}!{}", self.base, self.frame, self.version)
    }
}

/// `guard => lhs == rhs`.
#[derive(Clone, Debug)]
pub struct Equation {
    pub lhs: SsaName,
    pub var: TermId,
    pub rhs: TermId,
    pub guard: TermId,
    pub loc: SourceLocation,
    /// What the trace shows for the assigned cell (`b.value`, `return_value`).
    pub display: String,
    /// Kind of the assigned cell, for rendering its value.
    pub kind: crate::layout::Scalar,
    /// Phi equations are merges, not program steps.
    pub phi: bool,
}

#[derive(Clone, Debug)]
pub enum Step {
    Assign(Equation),
    /// `guard => cond`.
    Assume {
        guard: TermId,
        cond: TermId,
        loc: SourceLocation,
    },
}

#[derive(Clone, Debug)]
pub struct Claim {
    pub guard: TermId,
    pub cond: TermId,
    pub class: String,
    pub comment: String,
    pub loc: SourceLocation,
    /// Rendered condition of an `ASSERT`.
    pub cond_text: Option<String>,
    /// Number of steps emitted before the claim; later assumptions do not apply.
    pub steps_before: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ObjectKind {
    Null,
    Invalid,
    Function(String),
    Global,
    Local,
    Dynamic { is_array: bool },
    Return,
}

/// Trace metadata for one object.
#[derive(Clone, Debug)]
pub struct ObjectInfo {
    pub name: String,
    pub frame: u32,
    pub kind: ObjectKind,
}

/// A dynamic allocation: one per executed `new`.
#[derive(Clone, Debug)]
pub struct DynObjRecord {
    pub id: u32,
    /// Element count.
    pub count: TermId,
    pub is_array: bool,
    pub elem: TypeRepr,
}

/// Equations, claims and the term store they live in.
#[derive(Debug)]
pub struct VcBundle {
    pub store: TermStore,
    pub steps: Vec<Step>,
    pub claims: Vec<Claim>,
    pub objects: Vec<ObjectInfo>,
    pub dynamic: Vec<DynObjRecord>,
    pub int_width: u32,
}

impl VcBundle {
    pub fn equations(&self) -> impl Iterator<Item = &Equation> {
        self.steps.iter().filter_map(|s| match s {
            Step::Assign(e) => Some(e),
            _ => None,
        })
    }

    /// Textual SSA listing.
    pub fn render_ssa(&self) -> String {
        use fmt::Write;
        let mut out = String::new();
        for s in &self.steps {
            match s {
                Step::Assign(e) => {
                    let g = if self.store.as_bool(e.guard) == Some(true) { String::new() } else { format!("{} => ", self.store.render(e.guard)) };
                    let tag = if e.phi { " // phi" } else { "" };
                    let _ = writeln!(out, "{}{} == {}{}", g, e.lhs, self.store.render(e.rhs), tag);
                }
                Step::Assume { guard, cond, .. } => {
                    let g = if self.store.as_bool(*guard) == Some(true) { String::new() } else { format!("{} => ", self.store.render(*guard)) };
                    let _ = writeln!(out, "ASSUME {}{}", g, self.store.render(*cond));
                }
            }
        }
        for c in &self.claims {
            let g = if self.store.as_bool(c.guard) == Some(true) { String::new() } else { format!("{} => ", self.store.render(c.guard)) };
            let _ = writeln!(out, "CLAIM {} [{}]: {}{}", c.loc, c.class, g, self.store.render(c.cond));
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct SymexOptions {
    pub unwind: u32,
    pub unwinding_assertions: bool,
    pub cancel: Option<Arc<AtomicBool>>,
}

impl Default for SymexOptions {
    fn default() -> Self {
        SymexOptions { unwind: 10, unwinding_assertions: false, cancel: None }
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum SymexError {
    #[error("symbolic execution cancelled")]
    Cancelled,
    #[error("no entry function '{0}'")]
    NoEntry(String),
    #[error("unwind bound must be at least 1")]
    BadBound,
}

#[cfg(test)]
mod tests;
