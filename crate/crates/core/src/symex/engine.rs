use std::collections::{BTreeMap, HashMap};
use std::rc::Rc;
use std::sync::atomic::Ordering;

use super::exceptions::{handler_accepts, spec_allows, Adjust};
use super::*;
use crate::frontend::ast::BinOp;
use crate::frontend::{SourceLocation, ThrowSpec, TypeRepr};
use crate::goto::{render_expr, CastKind, Expr, GotoFunction, GotoProgram, InstrKind, UnaryOp, VarRef, VPTR_BITS};
use crate::layout::{ModelMember, Scalar};
use crate::solver::{Op, Sort, TermId, TermStore};

type Cells = Vec<TermId>;

#[derive(Clone, Debug)]
struct ObjState {
    cells: Vec<TermId>,
    valid: TermId,
}

#[derive(Debug)]
struct Exc {
    ty: TypeRepr,
    obj: u32,
    loc: SourceLocation,
}

#[derive(Clone)]
struct State {
    guard: TermId,
    mem: Vec<Option<Rc<ObjState>>>,
    /// Indices of the enclosing `CATCH_BEGIN` instructions of the current function.
    catch_stack: Vec<usize>,
    /// Exceptions being handled, for rethrow.
    current_exc: Vec<(TermId, Rc<Exc>)>,
    /// Value bound by the next handler landing.
    catch_value: Option<Cells>,
}

struct ObjMeta {
    info: ObjectInfo,
    kinds: Vec<Scalar>,
    names: Vec<String>,
    /// Size in cells.
    size: TermId,
    /// Element count.
    count: TermId,
}

#[derive(Clone, Copy)]
enum Loc {
    Obj(u32, TermId),
    Bad,
}

enum Target {
    Obj(u32, TermId),
    Unknown,
}

enum Flow {
    Next(Option<State>),
    Jump(usize, State),
}

struct Act<'p> {
    f: &'p GotoFunction,
    locals: Vec<u32>,
    ret_obj: Option<u32>,
    spec: ThrowSpec,
    pending: BTreeMap<usize, Vec<State>>,
    counts: BTreeMap<usize, u32>,
    escaped: Vec<(State, Rc<Exc>)>,
}

struct CallResult {
    normal: Option<State>,
    escaped: Vec<(State, Rc<Exc>)>,
    ret_obj: Option<u32>,
}

struct Engine<'p> {
    p: &'p GotoProgram,
    opts: SymexOptions,
    store: TermStore,
    steps: Vec<Step>,
    claims: Vec<Claim>,
    objs: Vec<ObjMeta>,
    dynamic: Vec<DynObjRecord>,
    versions: HashMap<(String, u32), u32>,
    globals: Vec<u32>,
    fn_objs: HashMap<String, u32>,
    frames: Vec<Vec<u32>>,
    call_stack: Vec<usize>,
    next_frame: u32,
    nondets: u32,
    loc: SourceLocation,
}

/// Execute the program's entry function with loops and recursion unrolled.
pub fn symex(p: &GotoProgram, opts: &SymexOptions) -> Result<VcBundle, SymexError> {
    if opts.unwind == 0 {
        return Err(SymexError::BadBound);
    }
    let entry = p.function_index(&p.entry).ok_or_else(|| SymexError::NoEntry(p.entry.clone()))?;
    let mut e = Engine {
        p,
        opts: opts.clone(),
        store: TermStore::new(),
        steps: Vec::new(),
        claims: Vec::new(),
        objs: Vec::new(),
        dynamic: Vec::new(),
        versions: HashMap::new(),
        globals: Vec::new(),
        fn_objs: HashMap::new(),
        frames: Vec::new(),
        call_stack: Vec::new(),
        next_frame: 1,
        nondets: 0,
        loc: SourceLocation::builtin(),
    };
    let mut st = State { guard: e.store.tru(), mem: Vec::new(), catch_stack: Vec::new(), current_exc: Vec::new(), catch_value: None };
    e.alloc_meta("NULL", 0, ObjectKind::Null, vec![], vec![], 0);
    e.alloc_meta("INVALID", 0, ObjectKind::Invalid, vec![], vec![], 0);
    for f in &p.address_taken {
        e.fn_obj(f);
    }
    for g in &p.globals {
        let id = e.alloc_typed(&g.name, 0, ObjectKind::Global, &g.ty);
        let cells = e.zeros(&e.objs[id as usize].kinds.clone());
        e.put_obj(&mut st, id, ObjState { cells, valid: e.store.tru() });
        e.globals.push(id);
    }
    let r = e.call(entry, st, vec![])?;
    for (s, exc) in r.escaped {
        e.loc = exc.loc.clone();
        let f = e.store.fals();
        e.claim(&s, e.store.tru(), f, class::UNCAUGHT, &format!("exception of type {} not caught", exc.ty.source_name()), None);
    }
    Ok(VcBundle {
        store: e.store,
        steps: e.steps,
        claims: e.claims,
        objects: e.objs.into_iter().map(|m| m.info).collect(),
        dynamic: e.dynamic,
        int_width: p.int_width,
    })
}

fn sort_of(k: Scalar) -> Sort {
    match k {
        Scalar::Bool => Sort::Bool,
        Scalar::Bits(w) | Scalar::Opaque(w) => Sort::Bv(w),
        Scalar::Ptr => Sort::Bv(PTR_BITS),
        Scalar::Vptr => Sort::Bv(VPTR_BITS),
        Scalar::Pad => Sort::Bv(1),
    }
}

impl<'p> Engine<'p> {
    // ---- objects -------------------------------------------------------

    fn alloc_meta(&mut self, name: &str, frame: u32, kind: ObjectKind, kinds: Vec<Scalar>, names: Vec<String>, count: u64) -> u32 {
        let id = self.objs.len() as u32;
        let size = self.store.bv(OFF_BITS, kinds.len() as u64);
        let count = self.store.bv(OFF_BITS, count);
        self.objs.push(ObjMeta { info: ObjectInfo { name: name.to_string(), frame, kind }, kinds, names, size, count });
        id
    }

    fn alloc_typed(&mut self, name: &str, frame: u32, kind: ObjectKind, ty: &TypeRepr) -> u32 {
        let kinds = self.p.layouts.cells(ty);
        let mut names = Vec::new();
        self.cell_paths(ty, name.to_string(), &mut names);
        debug_assert_eq!(kinds.len(), names.len());
        let count = match ty.strip_cv() {
            TypeRepr::Array(_, n) => n.unwrap_or(0),
            _ => 1,
        };
        self.alloc_meta(name, frame, kind, kinds, names, count)
    }

    fn cell_paths(&self, ty: &TypeRepr, prefix: String, out: &mut Vec<String>) {
        match ty.strip_cv() {
            TypeRepr::Array(e, n) => {
                for i in 0..n.unwrap_or(0) {
                    self.cell_paths(e, format!("{prefix}[{i}]"), out);
                }
            }
            TypeRepr::Class(c) => {
                let Some(m) = self.p.layouts.model(c) else { return };
                for mem in &m.members {
                    match mem {
                        ModelMember::Vptr { .. } => out.push(format!("{prefix}.@vptr")),
                        ModelMember::Pad { .. } => out.push(format!("{prefix}.@pad")),
                        ModelMember::Base { class, .. } => self.cell_paths(&TypeRepr::Class(class.clone()), format!("{prefix}.@{class}"), out),
                        ModelMember::Field { name, ty, .. } => self.cell_paths(ty, format!("{prefix}.{name}"), out),
                    }
                }
            }
            TypeRepr::Void | TypeRepr::Qualified(..) => {}
            _ => out.push(prefix),
        }
    }

    fn fn_obj(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.fn_objs.get(name) {
            return id;
        }
        let id = self.alloc_meta(name, 0, ObjectKind::Function(name.to_string()), vec![], vec![], 0);
        self.fn_objs.insert(name.to_string(), id);
        id
    }

    fn put_obj(&self, s: &mut State, id: u32, o: ObjState) {
        let i = id as usize;
        if s.mem.len() <= i {
            s.mem.resize(i + 1, None);
        }
        s.mem[i] = Some(Rc::new(o));
    }

    fn get_obj<'s>(&self, s: &'s State, id: u32) -> Option<&'s ObjState> {
        s.mem.get(id as usize).and_then(|o| o.as_deref())
    }

    fn obj_mut<'s>(&self, s: &'s mut State, id: u32) -> &'s mut ObjState {
        let i = id as usize;
        if s.mem.len() <= i {
            s.mem.resize(i + 1, None);
        }
        if s.mem[i].is_none() {
            let cells = self.objs[i].kinds.iter().map(|_| self.store.fals()).collect();
            s.mem[i] = Some(Rc::new(ObjState { cells, valid: self.store.fals() }));
        }
        Rc::make_mut(s.mem[i].as_mut().expect("present"))
    }

    fn valid_of(&self, s: &State, id: u32) -> TermId {
        self.get_obj(s, id).map(|o| o.valid).unwrap_or(self.store.fals())
    }

    fn var_obj(&self, v: VarRef) -> u32 {
        match v {
            VarRef::Local(i) => self.frames.last().expect("active frame")[i as usize],
            VarRef::Global(i) => self.globals[i as usize],
        }
    }

    // ---- terms ---------------------------------------------------------

    fn zeros(&mut self, kinds: &[Scalar]) -> Cells {
        kinds
            .iter()
            .map(|k| match sort_of(*k) {
                Sort::Bool => self.store.fals(),
                Sort::Bv(w) => self.store.bv(w, 0),
            })
            .collect()
    }

    fn nondet(&mut self, sort: Sort) -> TermId {
        self.nondets += 1;
        let name = format!("nondet!0!{}", self.nondets);
        self.store.var(&name, sort)
    }

    fn nondets(&mut self, kinds: &[Scalar]) -> Cells {
        kinds.iter().map(|k| self.nondet(sort_of(*k))).collect()
    }

    fn off(&mut self, v: i64) -> TermId {
        self.store.bv_signed(OFF_BITS, v)
    }

    fn ptr_const(&mut self, obj: u32, off: i64) -> TermId {
        let o = self.store.bv(OBJ_BITS, obj as u64);
        let k = self.off(off);
        self.store.concat(o, k)
    }

    fn mk_ptr(&mut self, obj: u32, off: TermId) -> TermId {
        let o = self.store.bv(OBJ_BITS, obj as u64);
        self.store.concat(o, off)
    }

    fn as_bool_term(&mut self, t: TermId) -> TermId {
        match self.store.sort(t) {
            Sort::Bool => t,
            Sort::Bv(w) if w == PTR_BITS => {
                let o = self.store.extract(t, PTR_BITS - 1, OFF_BITS);
                let z = self.store.bv(OBJ_BITS, 0);
                let e = self.store.eq(o, z);
                self.store.not(e)
            }
            Sort::Bv(w) => {
                let z = self.store.bv(w, 0);
                let e = self.store.eq(t, z);
                self.store.not(e)
            }
        }
    }

    fn as_bv_term(&mut self, t: TermId, w: u32) -> TermId {
        match self.store.sort(t) {
            Sort::Bool => {
                let one = self.store.bv(w, 1);
                let zero = self.store.bv(w, 0);
                self.store.ite(t, one, zero)
            }
            Sort::Bv(_) => self.store.resize_signed(t, w),
        }
    }

    fn coerce(&mut self, t: TermId, sort: Sort) -> TermId {
        if self.store.sort(t) == sort {
            return t;
        }
        match sort {
            Sort::Bool => self.as_bool_term(t),
            Sort::Bv(w) => self.as_bv_term(t, w),
        }
    }

    fn ite_cells(&mut self, c: TermId, a: Cells, b: Cells) -> Cells {
        a.into_iter().zip(b).map(|(x, y)| self.store.ite(c, x, y)).collect()
    }

    /// Split a pointer term into guarded leaves along its selections.
    fn leaves(&mut self, t: TermId, g: TermId, out: &mut Vec<(TermId, TermId)>) {
        if self.store.as_bool(g) == Some(false) {
            return;
        }
        let n = self.store.node(t).clone();
        if n.op == Op::Ite {
            let c = n.args[0];
            let g1 = self.store.and(g, c);
            let nc = self.store.not(c);
            let g2 = self.store.and(g, nc);
            self.leaves(n.args[1], g1, out);
            self.leaves(n.args[2], g2, out);
        } else {
            out.push((g, t));
        }
    }

    fn target_of(&mut self, leaf: TermId) -> Target {
        if let Some(v) = self.store.as_bv(leaf) {
            let off = self.store.bv(OFF_BITS, v);
            return Target::Obj((v >> OFF_BITS) as u32, off);
        }
        let n = self.store.node(leaf).clone();
        if n.op == Op::Concat {
            if let Some(o) = self.store.as_bv(n.args[0]) {
                if self.store.width(n.args[1]) == OFF_BITS {
                    return Target::Obj(o as u32, n.args[1]);
                }
            }
        }
        Target::Unknown
    }

    fn map_ptr(&mut self, t: TermId, f: &mut dyn FnMut(&mut Self, TermId) -> TermId) -> TermId {
        let n = self.store.node(t).clone();
        if n.op == Op::Ite {
            let a = self.map_ptr(n.args[1], f);
            let b = self.map_ptr(n.args[2], f);
            return self.store.ite(n.args[0], a, b);
        }
        f(self, t)
    }

    fn shift_leaf(&mut self, leaf: TermId, delta: TermId) -> TermId {
        match self.target_of(leaf) {
            Target::Obj(o, off) => {
                let no = self.store.add(off, delta);
                self.mk_ptr(o, no)
            }
            Target::Unknown => {
                let hi = self.store.extract(leaf, PTR_BITS - 1, OFF_BITS);
                let lo = self.store.extract(leaf, OFF_BITS - 1, 0);
                let no = self.store.add(lo, delta);
                self.store.concat(hi, no)
            }
        }
    }

    fn ptr_add(&mut self, p: TermId, delta: TermId) -> TermId {
        self.map_ptr(p, &mut |e, leaf| e.shift_leaf(leaf, delta))
    }

    /// Move a pointer by `k` cells unless it is null.
    fn offset_cast(&mut self, p: TermId, k: i64) -> TermId {
        if k == 0 {
            return p;
        }
        let delta = self.off(k);
        self.map_ptr(p, &mut |e, leaf| match e.target_of(leaf) {
            Target::Obj(NULL_OBJECT, _) => leaf,
            Target::Obj(..) => e.shift_leaf(leaf, delta),
            Target::Unknown => {
                let moved = e.shift_leaf(leaf, delta);
                let nn = e.as_bool_term(leaf);
                e.store.ite(nn, moved, leaf)
            }
        })
    }

    // ---- SSA -----------------------------------------------------------

    fn new_version(&mut self, obj: u32, cell: usize, rhs: TermId, guard: TermId, phi: bool) -> TermId {
        let meta = &self.objs[obj as usize];
        let base = meta.names[cell].clone();
        let kind = meta.kinds[cell];
        let frame = meta.info.frame;
        let v = self.versions.entry((base.clone(), frame)).or_insert(0);
        *v += 1;
        let lhs = SsaName { base: base.clone(), frame, version: *v };
        let var = self.store.var(&lhs.to_string(), sort_of(kind));
        let rhs = self.coerce(rhs, sort_of(kind));
        self.steps.push(Step::Assign(Equation { lhs, var, rhs, guard, loc: self.loc.clone(), display: base, kind, phi }));
        let propagate = self.store.is_const(rhs) || self.store.var_name(rhs).is_some() || matches!(kind, Scalar::Ptr | Scalar::Vptr);
        if propagate {
            rhs
        } else {
            var
        }
    }

    fn assign_cell(&mut self, s: &mut State, obj: u32, cell: usize, rhs: TermId) {
        let stored = self.new_version(obj, cell, rhs, s.guard, false);
        self.obj_mut(s, obj).cells[cell] = stored;
    }

    fn declare(&mut self, s: &mut State, obj: u32) {
        let meta = &self.objs[obj as usize];
        let frame = meta.info.frame;
        let items: Vec<(String, Scalar)> = meta.names.iter().cloned().zip(meta.kinds.iter().copied()).collect();
        let mut cells = Vec::with_capacity(items.len());
        for (base, kind) in items {
            let v = self.versions.entry((base.clone(), frame)).or_insert(0);
            *v += 1;
            let name = SsaName { base, frame, version: *v }.to_string();
            cells.push(self.store.var(&name, sort_of(kind)));
        }
        let valid = self.store.tru();
        self.put_obj(s, obj, ObjState { cells, valid });
    }

    // ---- claims --------------------------------------------------------

    fn claim(&mut self, s: &State, lg: TermId, cond: TermId, class: &str, comment: &str, text: Option<String>) {
        let g = self.store.and(s.guard, lg);
        // user assertions are kept even when trivially valid
        let trivial = self.store.as_bool(cond) == Some(true) && class != class::ASSERTION;
        if self.store.as_bool(g) == Some(false) || trivial {
            return;
        }
        self.claims.push(Claim {
            guard: g,
            cond,
            class: class.to_string(),
            comment: comment.to_string(),
            loc: self.loc.clone(),
            cond_text: text,
            steps_before: self.steps.len(),
        });
    }

    /// Claim that `bad` never holds under `lg`.
    fn never(&mut self, s: &State, lg: TermId, bad: TermId, class: &str, comment: &str) {
        let c = self.store.not(bad);
        self.claim(s, lg, c, class, comment, None);
    }

    fn cancelled(&self) -> bool {
        self.opts.cancel.as_ref().is_some_and(|c| c.load(Ordering::Relaxed))
    }

    // ---- memory access -------------------------------------------------

    fn is_data(&self, obj: u32) -> bool {
        matches!(
            self.objs.get(obj as usize).map(|m| &m.info.kind),
            Some(ObjectKind::Global | ObjectKind::Local | ObjectKind::Dynamic { .. } | ObjectKind::Return)
        )
    }

    fn resolve(&mut self, s: &State, e: &Expr, lg: TermId, access: bool) -> Vec<(TermId, Loc)> {
        let tru = self.store.tru();
        match e {
            Expr::Sym { var, .. } => {
                let o = self.var_obj(*var);
                let z = self.off(0);
                vec![(tru, Loc::Obj(o, z))]
            }
            Expr::Deref { ptr, ty } => {
                let p = self.scalar(s, ptr, lg);
                let n = self.p.layouts.size_of(ty) as i64;
                let mut ls = Vec::new();
                self.leaves(p, tru, &mut ls);
                let mut out = Vec::new();
                for (g, leaf) in ls {
                    match self.target_of(leaf) {
                        Target::Obj(NULL_OBJECT, _) => {
                            if access {
                                self.never(s, lg, g, class::NULL_DEREF, "");
                            }
                            out.push((g, Loc::Bad));
                        }
                        Target::Obj(o, off) if self.is_data(o) => {
                            if access {
                                let valid = self.valid_of(s, o);
                                if self.store.as_bool(valid) != Some(true) {
                                    let cls = match self.objs[o as usize].info.kind {
                                        ObjectKind::Dynamic { .. } => class::INVALIDATED,
                                        _ => class::DEAD_OBJECT,
                                    };
                                    let c = self.store.implies(g, valid);
                                    self.claim(s, lg, c, cls, "", None);
                                }
                                let size = self.objs[o as usize].size;
                                let z = self.off(0);
                                let lo = self.store.sle(z, off);
                                let nn = self.off(n);
                                let end = self.store.add(off, nn);
                                let hi = self.store.sle(end, size);
                                let inb = self.store.and(lo, hi);
                                let c = self.store.implies(g, inb);
                                self.claim(s, lg, c, class::BOUNDS, "", None);
                            }
                            out.push((g, Loc::Obj(o, off)));
                        }
                        _ => {
                            if access {
                                self.never(s, lg, g, class::INVALID_POINTER, "");
                            }
                            out.push((g, Loc::Bad));
                        }
                    }
                }
                out
            }
            Expr::Member { obj, offset, .. } if obj.is_lvalue() => {
                let inner = self.resolve(s, obj, lg, access);
                let k = self.off(*offset);
                inner
                    .into_iter()
                    .map(|(g, l)| match l {
                        Loc::Obj(o, off) => (g, Loc::Obj(o, self.store.add(off, k))),
                        Loc::Bad => (g, Loc::Bad),
                    })
                    .collect()
            }
            _ => vec![(tru, Loc::Bad)],
        }
    }

    fn read_cells(&mut self, s: &State, obj: u32, off: TermId, kinds: &[Scalar]) -> Cells {
        let Some(st) = self.get_obj(s, obj) else {
            return self.nondets(kinds);
        };
        let cells = st.cells.clone();
        let len = cells.len() as i64;
        let n = kinds.len() as i64;
        if let Some(k) = self.store.as_bv(off) {
            let k = crate::solver::term::to_signed(k, OFF_BITS);
            return kinds
                .iter()
                .enumerate()
                .map(|(j, kind)| {
                    let idx = k + j as i64;
                    if idx >= 0 && idx < len {
                        self.coerce(cells[idx as usize], sort_of(*kind))
                    } else {
                        self.nondet(sort_of(*kind))
                    }
                })
                .collect();
        }
        let mut out = Vec::with_capacity(kinds.len());
        for (j, kind) in kinds.iter().enumerate() {
            let mut acc = self.nondet(sort_of(*kind));
            for base in (0..=(len - n).max(-1)).rev() {
                if base < 0 {
                    break;
                }
                let v = self.coerce(cells[(base + j as i64) as usize], sort_of(*kind));
                let b = self.off(base);
                let c = self.store.eq(off, b);
                acc = self.store.ite(c, v, acc);
            }
            out.push(acc);
        }
        out
    }

    fn write_cells(&mut self, s: &mut State, obj: u32, off: TermId, vals: &[TermId], cond: Option<TermId>) {
        if self.get_obj(s, obj).is_none() {
            return;
        }
        let kinds = self.objs[obj as usize].kinds.clone();
        let len = kinds.len() as i64;
        if let Some(k) = self.store.as_bv(off) {
            let k = crate::solver::term::to_signed(k, OFF_BITS);
            for (j, &v) in vals.iter().enumerate() {
                let idx = k + j as i64;
                if idx < 0 || idx >= len {
                    continue;
                }
                let idx = idx as usize;
                let mut nv = self.coerce(v, sort_of(kinds[idx]));
                if let Some(c) = cond {
                    let old = self.get_obj(s, obj).expect("present").cells[idx];
                    nv = self.store.ite(c, nv, old);
                }
                self.assign_cell(s, obj, idx, nv);
            }
            return;
        }
        let cond = cond.unwrap_or(self.store.tru());
        let n = vals.len() as i64;
        for pos in 0..len {
            let old = self.get_obj(s, obj).expect("present").cells[pos as usize];
            let mut nv = old;
            for j in 0..n {
                let base = pos - j;
                if base < 0 || base + n > len {
                    continue;
                }
                let b = self.off(base);
                let at = self.store.eq(off, b);
                let c = self.store.and(cond, at);
                let v = self.coerce(vals[j as usize], sort_of(kinds[pos as usize]));
                nv = self.store.ite(c, v, nv);
            }
            if nv != old {
                self.assign_cell(s, obj, pos as usize, nv);
            }
        }
    }

    fn read(&mut self, s: &State, e: &Expr, lg: TermId) -> Cells {
        let ty = e.ty();
        let kinds = self.p.layouts.cells(&ty);
        if let Expr::Member { obj, offset, .. } = e {
            if !obj.is_lvalue() {
                let whole = self.eval(s, obj, lg);
                let start = (*offset).max(0) as usize;
                return (0..kinds.len())
                    .map(|j| match whole.get(start + j) {
                        Some(&t) => self.coerce(t, sort_of(kinds[j])),
                        None => self.nondet(sort_of(kinds[j])),
                    })
                    .collect();
            }
        }
        let targets = self.resolve(s, e, lg, true);
        let mut result: Option<Cells> = None;
        for (g, l) in targets.into_iter().rev() {
            let vals = match l {
                Loc::Obj(o, off) => self.read_cells(s, o, off, &kinds),
                Loc::Bad => self.nondets(&kinds),
            };
            result = Some(match result {
                None => vals,
                Some(acc) => self.ite_cells(g, vals, acc),
            });
        }
        result.unwrap_or_else(|| self.nondets(&kinds))
    }

    fn write(&mut self, s: &mut State, lhs: &Expr, vals: &[TermId], lg: TermId) {
        let targets = self.resolve(s, lhs, lg, true);
        let single = targets.len() == 1 && self.store.as_bool(lg) == Some(true);
        for (g, l) in targets {
            if let Loc::Obj(o, off) = l {
                let cond = if single && self.store.as_bool(g) == Some(true) { None } else { Some(self.store.and(lg, g)) };
                self.write_cells(s, o, off, vals, cond);
            }
        }
    }

    fn address(&mut self, s: &State, obj: &Expr, lg: TermId) -> TermId {
        if let Expr::Deref { ptr, .. } = obj {
            return self.scalar(s, ptr, lg);
        }
        let targets = self.resolve(s, obj, lg, false);
        let mut acc: Option<TermId> = None;
        for (g, l) in targets.into_iter().rev() {
            let t = match l {
                Loc::Obj(o, off) => self.mk_ptr(o, off),
                Loc::Bad => self.ptr_const(INVALID_OBJECT, 0),
            };
            acc = Some(match acc {
                None => t,
                Some(a) => self.store.ite(g, t, a),
            });
        }
        acc.unwrap_or_else(|| self.ptr_const(INVALID_OBJECT, 0))
    }

    // ---- expressions ---------------------------------------------------

    fn scalar(&mut self, s: &State, e: &Expr, lg: TermId) -> TermId {
        let v = self.eval(s, e, lg);
        match v.first() {
            Some(&t) => t,
            None => self.store.bv(1, 0),
        }
    }

    fn bool_of(&mut self, s: &State, e: &Expr, lg: TermId) -> TermId {
        let t = self.scalar(s, e, lg);
        self.as_bool_term(t)
    }

    fn width_of(&self, ty: &TypeRepr) -> Option<u32> {
        match self.p.layouts.cells(ty).as_slice() {
            [k] => match sort_of(*k) {
                Sort::Bool => None,
                Sort::Bv(w) => Some(w),
            },
            _ => None,
        }
    }

    fn konst(&mut self, ty: &TypeRepr, v: i64) -> TermId {
        match self.width_of(ty) {
            None => self.store.bool(v != 0),
            Some(w) => self.store.bv_signed(w, v),
        }
    }

    fn eval(&mut self, s: &State, e: &Expr, lg: TermId) -> Cells {
        match e {
            Expr::Const { value, ty } => vec![self.konst(ty, *value)],
            Expr::Null(_) => vec![self.store.bv(PTR_BITS, 0)],
            Expr::Sym { .. } | Expr::Deref { .. } | Expr::Member { .. } => self.read(s, e, lg),
            Expr::AddrOf { obj, .. } => vec![self.address(s, obj, lg)],
            Expr::PtrAdd { ptr, index, elem_cells, .. } => {
                let p = self.scalar(s, ptr, lg);
                let i = self.scalar(s, index, lg);
                let i = self.as_bv_term(i, OFF_BITS);
                let k = self.off(*elem_cells as i64);
                let delta = self.store.mul(i, k);
                vec![self.ptr_add(p, delta)]
            }
            Expr::Unary { op, arg, .. } => {
                let a = self.scalar(s, arg, lg);
                vec![match op {
                    UnaryOp::Neg => {
                        let a = self.as_bv_term(a, self.store.width(a).max(1));
                        self.store.neg(a)
                    }
                    UnaryOp::BitNot => {
                        if self.store.sort(a) == Sort::Bool {
                            self.store.not(a)
                        } else {
                            self.store.bvnot(a)
                        }
                    }
                    UnaryOp::Not => {
                        let b = self.as_bool_term(a);
                        self.store.not(b)
                    }
                }]
            }
            Expr::Binary { op: BinOp::And, lhs, rhs, .. } => {
                let l = self.bool_of(s, lhs, lg);
                let g = self.store.and(lg, l);
                let r = self.bool_of(s, rhs, g);
                vec![self.store.and(l, r)]
            }
            Expr::Binary { op: BinOp::Or, lhs, rhs, .. } => {
                let l = self.bool_of(s, lhs, lg);
                let nl = self.store.not(l);
                let g = self.store.and(lg, nl);
                let r = self.bool_of(s, rhs, g);
                vec![self.store.or(l, r)]
            }
            Expr::Binary { op, lhs, rhs, ty } => {
                let l = self.scalar(s, lhs, lg);
                let r = self.scalar(s, rhs, lg);
                let v = self.binop(*op, l, r);
                let w = self.width_of(ty);
                vec![match w {
                    Some(w) => self.as_bv_term(v, w),
                    None => self.as_bool_term(v),
                }]
            }
            Expr::Ite { cond, then, els, .. } => {
                let c = self.bool_of(s, cond, lg);
                let g1 = self.store.and(lg, c);
                let a = self.eval(s, then, g1);
                let nc = self.store.not(c);
                let g2 = self.store.and(lg, nc);
                let b = self.eval(s, els, g2);
                self.ite_cells(c, a, b)
            }
            Expr::Cast { kind, arg, ty } => match kind {
                CastKind::Integral => {
                    let a = self.scalar(s, arg, lg);
                    vec![match self.width_of(ty) {
                        None => self.as_bool_term(a),
                        Some(w) => self.as_bv_term(a, w),
                    }]
                }
                CastKind::Bitcast => {
                    let v = self.eval(s, arg, lg);
                    let kinds = self.p.layouts.cells(ty);
                    if kinds.len() == v.len() {
                        v.into_iter().zip(kinds).map(|(t, k)| self.coerce(t, sort_of(k))).collect()
                    } else {
                        v
                    }
                }
                CastKind::Offset(k) => {
                    let p = self.scalar(s, arg, lg);
                    vec![self.offset_cast(p, *k)]
                }
            },
            Expr::Struct { fields, ty } => self.struct_cells(s, ty, fields, lg),
            Expr::Array { elems, ty } => {
                let mut out = Vec::new();
                for el in elems {
                    out.extend(self.eval(s, el, lg));
                }
                let kinds = self.p.layouts.cells(ty);
                if out.len() < kinds.len() {
                    let rest = self.zeros(&kinds[out.len()..]);
                    out.extend(rest);
                }
                out.truncate(kinds.len());
                out
            }
            Expr::Zero(ty) => {
                let kinds = self.p.layouts.cells(ty);
                self.zeros(&kinds)
            }
            Expr::Nondet(ty) => {
                let kinds = self.p.layouts.cells(ty);
                self.nondets(&kinds)
            }
            Expr::FuncAddr { func, .. } => {
                let o = self.fn_obj(func);
                vec![self.ptr_const(o, 0)]
            }
            Expr::ObjectSize { ptr, ty } => {
                let p = self.scalar(s, ptr, lg);
                let mut ls = Vec::new();
                let tru = self.store.tru();
                self.leaves(p, tru, &mut ls);
                let mut acc = self.off(0);
                for (g, leaf) in ls.into_iter().rev() {
                    if let Target::Obj(o, _) = self.target_of(leaf) {
                        if self.is_data(o) {
                            let c = self.objs[o as usize].count;
                            acc = self.store.ite(g, c, acc);
                        }
                    }
                }
                let w = self.width_of(ty).unwrap_or(OFF_BITS);
                vec![self.store.resize_signed(acc, w)]
            }
            Expr::AllFreed => {
                let mut acc = self.store.tru();
                for d in self.dynamic.clone() {
                    let v = self.valid_of(s, d.id);
                    let nv = self.store.not(v);
                    acc = self.store.and(acc, nv);
                }
                vec![acc]
            }
        }
    }

    fn struct_cells(&mut self, s: &State, ty: &TypeRepr, fields: &[(String, Expr)], lg: TermId) -> Cells {
        let Some(class) = ty.class_name() else {
            let mut out = Vec::new();
            for (_, e) in fields {
                out.extend(self.eval(s, e, lg));
            }
            return out;
        };
        let members = self.p.layouts.model(class).map(|m| m.members.clone()).unwrap_or_default();
        let mut out = Vec::new();
        for m in members {
            match m {
                ModelMember::Vptr { .. } => out.push(self.store.bv(VPTR_BITS, 0)),
                ModelMember::Pad { .. } => out.push(self.store.bv(1, 0)),
                ModelMember::Base { class, .. } => {
                    let kinds = self.p.layouts.cells(&TypeRepr::Class(class));
                    out.extend(self.zeros(&kinds));
                }
                ModelMember::Field { name, ty, .. } => match fields.iter().find(|(n, _)| *n == name) {
                    Some((_, e)) => {
                        let v = self.eval(s, e, lg);
                        let kinds = self.p.layouts.cells(&ty);
                        for (t, k) in v.into_iter().zip(kinds) {
                            out.push(self.coerce(t, sort_of(k)));
                        }
                    }
                    None => {
                        let kinds = self.p.layouts.cells(&ty);
                        out.extend(self.zeros(&kinds));
                    }
                },
            }
        }
        out
    }

    fn binop(&mut self, op: BinOp, l: TermId, r: TermId) -> TermId {
        let st = &mut self.store;
        let (ls, rs) = (st.sort(l), st.sort(r));
        if ls == Sort::Bool && rs == Sort::Bool {
            match op {
                BinOp::Eq => return st.eq(l, r),
                BinOp::Ne => {
                    let e = st.eq(l, r);
                    return st.not(e);
                }
                BinOp::BitAnd => return st.and(l, r),
                BinOp::BitOr => return st.or(l, r),
                BinOp::BitXor => return st.xor(l, r),
                _ => {}
            }
        }
        let w = ls.width().max(rs.width()).max(if ls == Sort::Bool || rs == Sort::Bool { 32 } else { 1 });
        let (mut l, mut r) = (self.as_bv_term(l, w), self.as_bv_term(r, w));
        let st = &mut self.store;
        if w == PTR_BITS && matches!(op, BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge | BinOp::Sub) {
            l = st.extract(l, OFF_BITS - 1, 0);
            r = st.extract(r, OFF_BITS - 1, 0);
        }
        match op {
            BinOp::Add => st.add(l, r),
            BinOp::Sub => st.sub(l, r),
            BinOp::Mul => st.mul(l, r),
            BinOp::Shl => st.shl(l, r),
            BinOp::Shr => st.ashr(l, r),
            BinOp::Lt => st.slt(l, r),
            BinOp::Le => st.sle(l, r),
            BinOp::Gt => st.slt(r, l),
            BinOp::Ge => st.sle(r, l),
            BinOp::Eq => st.eq(l, r),
            BinOp::Ne => {
                let e = st.eq(l, r);
                st.not(e)
            }
            BinOp::BitAnd => st.bvand(l, r),
            BinOp::BitOr => st.bvor(l, r),
            BinOp::BitXor => st.bvxor(l, r),
            BinOp::And | BinOp::Or => unreachable!("short-circuit operators are handled by eval"),
        }
    }

    // ---- merging -------------------------------------------------------

    fn merge(&mut self, a: State, b: State) -> State {
        if self.store.as_bool(a.guard) == Some(false) {
            return b;
        }
        if self.store.as_bool(b.guard) == Some(false) {
            return a;
        }
        let ga = a.guard;
        let g = self.store.or(a.guard, b.guard);
        let n = a.mem.len().max(b.mem.len());
        let mut mem = Vec::with_capacity(n);
        for i in 0..n {
            let x = a.mem.get(i).cloned().flatten();
            let y = b.mem.get(i).cloned().flatten();
            let merged = match (x, y) {
                (None, None) => None,
                (Some(x), Some(y)) if Rc::ptr_eq(&x, &y) => Some(x),
                (Some(x), Some(y)) => {
                    let mut cells = x.cells.clone();
                    for (c, cell) in cells.iter_mut().enumerate() {
                        let yv = y.cells[c];
                        if *cell != yv {
                            let t = self.store.ite(ga, *cell, yv);
                            *cell = if self.store.is_const(t) { t } else { self.new_version(i as u32, c, t, g, true) };
                        }
                    }
                    let valid = self.store.ite(ga, x.valid, y.valid);
                    Some(Rc::new(ObjState { cells, valid }))
                }
                (Some(x), None) => {
                    let valid = self.store.and(ga, x.valid);
                    Some(Rc::new(ObjState { cells: x.cells.clone(), valid }))
                }
                (None, Some(y)) => {
                    let na = self.store.not(ga);
                    let valid = self.store.and(na, y.valid);
                    Some(Rc::new(ObjState { cells: y.cells.clone(), valid }))
                }
            };
            mem.push(merged);
        }
        let mut current_exc = a.current_exc.clone();
        current_exc.extend(b.current_exc.iter().cloned());
        let catch_value = match (a.catch_value, b.catch_value) {
            (Some(x), Some(y)) => Some(self.ite_cells(ga, x, y)),
            (x, y) => x.or(y),
        };
        State { guard: g, mem, catch_stack: a.catch_stack, current_exc, catch_value }
    }

    // ---- calls and execution -------------------------------------------

    fn call(&mut self, fidx: usize, mut s: State, args: Vec<Cells>) -> Result<CallResult, SymexError> {
        let p = self.p;
        let f = &p.functions[fidx];
        let frame = self.next_frame;
        self.next_frame += 1;
        let mut locals = Vec::with_capacity(f.vars.len());
        for v in &f.vars {
            let id = self.alloc_typed(&v.name, frame, ObjectKind::Local, &v.ty);
            let kinds = self.objs[id as usize].kinds.clone();
            let cells = self.zeros(&kinds);
            let valid = self.store.tru();
            self.put_obj(&mut s, id, ObjState { cells, valid });
            locals.push(id);
        }
        let ret_obj = if f.ret.is_void() {
            None
        } else {
            let name = format!("{}#return_value", f.display);
            let id = self.alloc_typed(&name, frame, ObjectKind::Return, &f.ret);
            let kinds = self.objs[id as usize].kinds.clone();
            let cells = self.zeros(&kinds);
            let valid = self.store.tru();
            self.put_obj(&mut s, id, ObjState { cells, valid });
            Some(id)
        };
        self.loc = f.body.first().map(|i| i.loc.clone()).unwrap_or_else(SourceLocation::builtin);
        for (k, pv) in f.params.iter().enumerate() {
            if let Some(vals) = args.get(k) {
                let o = locals[match pv {
                    VarRef::Local(i) => *i as usize,
                    VarRef::Global(_) => continue,
                }];
                let off = self.off(0);
                self.write_cells(&mut s, o, off, vals, None);
            }
        }
        self.frames.push(locals.clone());
        self.call_stack.push(fidx);
        let mut act = Act { f, locals, ret_obj, spec: ThrowSpec::Unspecified, pending: BTreeMap::new(), counts: BTreeMap::new(), escaped: Vec::new() };
        let mut cur = Some(s);
        let mut pc = 0usize;
        let mut normal = None;
        loop {
            if self.cancelled() {
                return Err(SymexError::Cancelled);
            }
            act.counts = act.counts.split_off(&pc);
            if let Some(ps) = act.pending.remove(&pc) {
                for st in ps {
                    cur = Some(match cur.take() {
                        None => st,
                        Some(c) => self.merge(c, st),
                    });
                }
            }
            let Some(st) = cur.take() else {
                match act.pending.keys().next() {
                    Some(&k) => {
                        pc = k;
                        continue;
                    }
                    None => break,
                }
            };
            if pc >= f.body.len() || matches!(f.body[pc].kind, InstrKind::EndFunction) {
                normal = Some(st);
                break;
            }
            self.loc = f.body[pc].loc.clone();
            match self.exec(&mut act, st, pc)? {
                Flow::Next(next) => {
                    cur = next;
                    pc += 1;
                }
                Flow::Jump(t, st) => {
                    cur = Some(st);
                    pc = t;
                }
            }
        }
        self.frames.pop();
        self.call_stack.pop();
        let mut escaped = Vec::new();
        for (st, exc) in std::mem::take(&mut act.escaped) {
            if spec_allows(&act.spec, &exc.ty, &p.layouts) {
                escaped.push((st, exc));
            } else {
                self.loc = exc.loc.clone();
                let fals = self.store.fals();
                let tru = self.store.tru();
                let comment = format!("exception of type {} violates the exception specification of {}", exc.ty.source_name(), f.display);
                self.claim(&st, tru, fals, class::THROW_SPEC, &comment, None);
            }
        }
        let _ = act.locals;
        Ok(CallResult { normal, escaped, ret_obj: act.ret_obj })
    }

    fn exec(&mut self, act: &mut Act<'p>, mut s: State, pc: usize) -> Result<Flow, SymexError> {
        let tru = self.store.tru();
        let ins = &act.f.body[pc];
        match &ins.kind {
            InstrKind::Decl(v) => {
                let o = self.var_obj(*v);
                self.declare(&mut s, o);
            }
            InstrKind::Dead(v) => {
                let o = self.var_obj(*v);
                let f = self.store.fals();
                self.obj_mut(&mut s, o).valid = f;
            }
            InstrKind::Assign { lhs, rhs } => {
                let vals = self.eval(&s, rhs, tru);
                self.write(&mut s, lhs, &vals, tru);
            }
            InstrKind::Assert { cond, class, comment } => {
                let c = self.bool_of(&s, cond, tru);
                let text = render_expr(self.p, cond, true);
                self.claim(&s, tru, c, class, comment, Some(text));
            }
            InstrKind::Assume(cond) => {
                let c = self.bool_of(&s, cond, tru);
                self.steps.push(Step::Assume { guard: s.guard, cond: c, loc: self.loc.clone() });
                if self.store.as_bool(c) == Some(false) {
                    return Ok(Flow::Next(None));
                }
            }
            InstrKind::Goto { cond, target } => {
                let c = match cond {
                    None => tru,
                    Some(e) => self.bool_of(&s, e, tru),
                };
                return Ok(self.goto(act, s, pc, c, *target));
            }
            InstrKind::Call { lhs, func, args } => return self.exec_call(act, s, lhs.as_ref(), func, args),
            InstrKind::Return(v) => {
                if let (Some(e), Some(r)) = (v, act.ret_obj) {
                    let vals = self.eval(&s, e, tru);
                    let off = self.off(0);
                    self.write_cells(&mut s, r, off, &vals, None);
                }
                act.pending.entry(act.f.exit).or_default().push(s);
                return Ok(Flow::Next(None));
            }
            InstrKind::CatchBegin(_) => s.catch_stack.push(pc),
            InstrKind::CatchEnd => {
                s.catch_stack.pop();
            }
            InstrKind::Landing { var, .. } => {
                let value = s.catch_value.take();
                if let (Some(v), Some(vals)) = (var, value) {
                    let o = self.var_obj(*v);
                    self.declare(&mut s, o);
                    let off = self.off(0);
                    self.write_cells(&mut s, o, off, &vals, None);
                }
            }
            InstrKind::Throw { tags, ty, value } => {
                if tags.is_empty() {
                    self.rethrow(act, s);
                } else {
                    let obj = match value {
                        Some(Expr::Sym { var, .. }) => self.var_obj(*var),
                        _ => INVALID_OBJECT,
                    };
                    let exc = Rc::new(Exc { ty: ty.clone().unwrap_or_default(), obj, loc: self.loc.clone() });
                    self.raise(act, s, exc);
                }
                return Ok(Flow::Next(None));
            }
            InstrKind::ThrowDecl(spec) => act.spec = spec.clone(),
            InstrKind::New { lhs, elem, count } => self.exec_new(&mut s, lhs, elem, count.as_ref()),
            InstrKind::Delete { ptr, is_array, whole_object } => self.exec_delete(&mut s, ptr, *is_array, *whole_object),
            InstrKind::Skip | InstrKind::EndFunction => {}
        }
        Ok(Flow::Next(Some(s)))
    }

    fn goto(&mut self, act: &mut Act<'p>, mut s: State, pc: usize, c: TermId, target: usize) -> Flow {
        let taken_g = self.store.and(s.guard, c);
        let nc = self.store.not(c);
        let fall_g = self.store.and(s.guard, nc);
        let is_false = |st: &TermStore, t: TermId| st.as_bool(t) == Some(false);
        if target > pc {
            if !is_false(&self.store, taken_g) {
                let mut t = s.clone();
                t.guard = taken_g;
                act.pending.entry(target).or_default().push(t);
            }
            if is_false(&self.store, fall_g) {
                return Flow::Next(None);
            }
            s.guard = fall_g;
            return Flow::Next(Some(s));
        }
        let count = act.counts.entry(pc).or_insert(0);
        if *count < self.opts.unwind {
            *count += 1;
            if !is_false(&self.store, fall_g) {
                let mut t = s.clone();
                t.guard = fall_g;
                act.pending.entry(pc + 1).or_default().push(t);
            }
            if is_false(&self.store, taken_g) {
                return Flow::Next(None);
            }
            s.guard = taken_g;
            return Flow::Jump(target, s);
        }
        if !is_false(&self.store, taken_g) {
            if self.opts.unwinding_assertions {
                self.claim(&s, self.store.tru(), nc, class::UNWIND, "unwinding assertion loop", None);
            }
            self.steps.push(Step::Assume { guard: s.guard, cond: nc, loc: self.loc.clone() });
        }
        if is_false(&self.store, fall_g) {
            return Flow::Next(None);
        }
        s.guard = fall_g;
        Flow::Next(Some(s))
    }

    fn exec_call(&mut self, act: &mut Act<'p>, mut s: State, lhs: Option<&Expr>, func: &str, args: &[Expr]) -> Result<Flow, SymexError> {
        let tru = self.store.tru();
        let Some(fidx) = self.p.function_index(func) else {
            if let Some(l) = lhs {
                let kinds = self.p.layouts.cells(&l.ty());
                let v = self.nondets(&kinds);
                self.write(&mut s, l, &v, tru);
            }
            return Ok(Flow::Next(Some(s)));
        };
        let vals: Vec<Cells> = args.iter().map(|a| self.eval(&s, a, tru)).collect();
        let callee = &self.p.functions[fidx];
        if !callee.defined {
            if let Some(l) = lhs {
                let kinds = self.p.layouts.cells(&l.ty());
                let v = self.nondets(&kinds);
                self.write(&mut s, l, &v, tru);
            }
            return Ok(Flow::Next(Some(s)));
        }
        let depth = self.call_stack.iter().filter(|&&f| f == fidx).count() as u32;
        if depth >= self.opts.unwind {
            let f = self.store.fals();
            if self.opts.unwinding_assertions {
                self.claim(&s, tru, f, class::UNWIND, "recursion unwinding assertion", None);
            }
            self.steps.push(Step::Assume { guard: s.guard, cond: f, loc: self.loc.clone() });
            return Ok(Flow::Next(None));
        }
        let call_loc = self.loc.clone();
        let saved = std::mem::take(&mut s.catch_stack);
        let r = self.call(fidx, s, vals)?;
        self.loc = call_loc;
        for (mut es, exc) in r.escaped {
            es.catch_stack = saved.clone();
            self.raise(act, es, exc);
        }
        let Some(mut st) = r.normal else {
            return Ok(Flow::Next(None));
        };
        st.catch_stack = saved;
        if let (Some(l), Some(ro)) = (lhs, r.ret_obj) {
            let kinds = self.objs[ro as usize].kinds.clone();
            let off = self.off(0);
            let v = self.read_cells(&st, ro, off, &kinds);
            self.write(&mut st, l, &v, tru);
        }
        Ok(Flow::Next(Some(st)))
    }

    fn raise(&mut self, act: &mut Act<'p>, s: State, exc: Rc<Exc>) {
        if self.store.as_bool(s.guard) == Some(false) {
            return;
        }
        for depth in (0..s.catch_stack.len()).rev() {
            let InstrKind::CatchBegin(entries) = &act.f.body[s.catch_stack[depth]].kind else {
                continue;
            };
            for entry in entries {
                if let Some(adj) = handler_accepts(&exc.ty, entry.ty.as_ref(), &self.p.layouts) {
                    let mut t = s;
                    t.catch_stack.truncate(depth);
                    t.catch_value = self.catch_value(&t, &exc, entry.ty.as_ref(), adj);
                    t.current_exc = vec![(t.guard, exc)];
                    act.pending.entry(entry.target).or_default().push(t);
                    return;
                }
            }
        }
        act.escaped.push((s, exc));
    }

    fn rethrow(&mut self, act: &mut Act<'p>, s: State) {
        let excs = s.current_exc.clone();
        let mut covered = self.store.fals();
        for (g, exc) in excs {
            covered = self.store.or(covered, g);
            let mut t = s.clone();
            t.guard = self.store.and(s.guard, g);
            self.raise(act, t, exc);
        }
        let nc = self.store.not(covered);
        let f = self.store.fals();
        self.claim(&s, nc, f, class::UNCAUGHT, "rethrow without an active exception", None);
    }

    fn catch_value(&mut self, s: &State, exc: &Exc, hty: Option<&TypeRepr>, adj: Adjust) -> Option<Cells> {
        let h = hty?;
        let is_ref = h.is_reference();
        match adj {
            Adjust::None => None,
            Adjust::Object(off) => {
                if is_ref {
                    Some(vec![self.ptr_const(exc.obj, off as i64)])
                } else {
                    let kinds = self.p.layouts.cells(h.value_type());
                    let o = self.off(off as i64);
                    Some(self.read_cells(s, exc.obj, o, &kinds))
                }
            }
            Adjust::Pointer(k) => {
                if is_ref {
                    return Some(vec![self.ptr_const(exc.obj, 0)]);
                }
                let z = self.off(0);
                let p = self.read_cells(s, exc.obj, z, &[Scalar::Ptr])[0];
                Some(vec![self.offset_cast(p, k)])
            }
            Adjust::Decay => Some(vec![self.ptr_const(exc.obj, 0)]),
        }
    }

    fn exec_new(&mut self, s: &mut State, lhs: &Expr, elem: &TypeRepr, count: Option<&Expr>) {
        let tru = self.store.tru();
        let ekinds = self.p.layouts.cells(elem);
        let (count_t, n, is_array) = match count {
            None => (self.off(1), 1usize, false),
            Some(c) => {
                let t = self.scalar(s, c, tru);
                let t = self.as_bv_term(t, OFF_BITS);
                let z = self.off(0);
                let ok = self.store.sle(z, t);
                self.claim(s, tru, ok, class::BAD_ALLOC, "array size is negative", None);
                let n = match self.store.as_bv(t) {
                    Some(k) => crate::solver::term::to_signed(k, OFF_BITS).clamp(0, CONSTANT_ARRAY_CAP as i64) as usize,
                    None => SYMBOLIC_ARRAY_CAP,
                };
                (t, n, true)
            }
        };
        let id = self.objs.len() as u32;
        let name = format!("$dyn{id}");
        let mut kinds = Vec::with_capacity(ekinds.len() * n);
        let mut names = Vec::new();
        for i in 0..n {
            kinds.extend(ekinds.iter().copied());
            let prefix = if is_array { format!("{name}[{i}]") } else { name.clone() };
            self.cell_paths(elem, prefix, &mut names);
        }
        self.alloc_meta(&name, 0, ObjectKind::Dynamic { is_array }, kinds.clone(), names, 0);
        let ec = self.off(ekinds.len() as i64);
        let size = self.store.mul(count_t, ec);
        self.objs[id as usize].size = size;
        self.objs[id as usize].count = count_t;
        let cells = self.nondets(&kinds);
        self.put_obj(s, id, ObjState { cells, valid: tru });
        self.dynamic.push(DynObjRecord { id, count: count_t, is_array, elem: elem.clone() });
        let p = self.ptr_const(id, 0);
        self.write(s, lhs, &[p], tru);
    }

    fn exec_delete(&mut self, s: &mut State, ptr: &Expr, is_array: bool, whole_object: bool) {
        let tru = self.store.tru();
        let p = self.scalar(s, ptr, tru);
        let mut ls = Vec::new();
        self.leaves(p, tru, &mut ls);
        for (g, leaf) in ls {
            match self.target_of(leaf) {
                Target::Obj(NULL_OBJECT, _) => {}
                Target::Obj(o, off) if matches!(self.objs[o as usize].info.kind, ObjectKind::Dynamic { .. }) => {
                    let valid = self.valid_of(s, o);
                    let z = self.off(0);
                    let at_start = if whole_object { tru } else { self.store.eq(off, z) };
                    let ok = self.store.and(valid, at_start);
                    let c = self.store.implies(g, ok);
                    self.claim(s, tru, c, class::BAD_DELETE, "double free or invalid pointer passed to delete", None);
                    let ObjectKind::Dynamic { is_array: allocated_array } = self.objs[o as usize].info.kind else { unreachable!() };
                    if allocated_array != is_array {
                        let comment =
                            if is_array { "delete[] applied to an object allocated with new" } else { "delete applied to an array allocated with new[]" };
                        self.never(s, tru, g, class::MISMATCH, comment);
                    }
                    let ng = self.store.not(g);
                    let nv = self.store.and(ng, valid);
                    self.obj_mut(s, o).valid = nv;
                }
                Target::Obj(o, _) if self.is_data(o) => {
                    self.never(s, tru, g, class::BAD_DELETE, "delete of an object not allocated with new");
                }
                _ => self.never(s, tru, g, class::BAD_DELETE, "delete of an invalid pointer"),
            }
        }
    }
}
