//! Lowering of typed programs to GOTO functions.
//!
//! References become pointers, constructors and destructors become plain
//! calls taking the object's address, virtual calls become a comparison
//! chain on the receiver's vptr, and structured control flow becomes
//! conditional jumps. Loops are rotated so their back edge carries the
//! continuation condition.

use std::collections::{BTreeSet, HashMap, HashSet};

use super::program::*;
use crate::frontend::ast::{BinOp, FunctionKind, UnOp};
use crate::frontend::typecheck::wrap_int;
use crate::frontend::typed::{self as t, Conversion, ExprKind, FuncId, Init, StmtKind, TypedProgram, VarId};
use crate::frontend::{SourceLocation, ThrowSpec, TypeRepr, TypeTag};
use crate::layout::{LayoutError, Layouts, SlotTarget};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LowerOptions {
    /// Append a check that every dynamic object was released when `main` returns.
    pub memory_leak_check: bool,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum LowerError {
    #[error(transparent)]
    Layout(#[from] LayoutError),
}

/// Drops references (to pointers) and cv-qualifiers.
pub fn lower_ty(ty: &TypeRepr) -> TypeRepr {
    match ty {
        TypeRepr::LRef(t) | TypeRepr::RRef(t) | TypeRepr::Pointer(t) => TypeRepr::pointer(lower_ty(t)),
        TypeRepr::Array(e, n) => TypeRepr::Array(Box::new(lower_ty(e)), *n),
        TypeRepr::Qualified(_, t) => lower_ty(t),
        other => other.clone(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Label(usize);

struct Cleanup {
    var: VarRef,
    ty: TypeRepr,
    destroy: bool,
    dead: bool,
}

enum Frame {
    Block(Vec<Cleanup>),
    Try,
}

struct LoopCtx {
    brk: Label,
    cont: Label,
    depth: usize,
}

#[derive(Default)]
struct FnState {
    body: Vec<Instruction>,
    vars: Vec<VarInfo>,
    names: HashSet<String>,
    locals: Vec<VarRef>,
    local_tys: Vec<TypeRepr>,
    labels: Vec<Option<usize>>,
    frames: Vec<Frame>,
    loops: Vec<LoopCtx>,
    addr_taken: HashSet<VarId>,
    implicit: bool,
    this: Option<VarRef>,
    /// Destructors return into their epilogue instead of leaving.
    epilogue: Option<Label>,
    ret: TypeRepr,
}

struct Lowerer<'a> {
    tp: &'a TypedProgram,
    lay: &'a Layouts,
    opts: LowerOptions,
    globals: Vec<VarInfo>,
    global_idx: HashMap<String, u32>,
    address_taken: BTreeSet<FuncId>,
    uses_move: bool,
    cur: FnState,
}

/// Lowers every function, thunk and global initializer of `tp`.
pub fn lower(tp: &TypedProgram, lay: &Layouts, opts: LowerOptions) -> Result<GotoProgram, LowerError> {
    let globals: Vec<VarInfo> = tp.globals.iter().map(|g| VarInfo { name: g.name.clone(), ty: lower_ty(&g.ty), is_param: false }).collect();
    let global_idx = tp.globals.iter().enumerate().map(|(i, g)| (g.name.clone(), i as u32)).collect();
    let mut lw = Lowerer { tp, lay, opts, globals, global_idx, address_taken: BTreeSet::new(), uses_move: false, cur: FnState::default() };
    lw.collect_address_taken();
    let mut functions = Vec::new();
    for i in 0..tp.functions.len() {
        functions.push(lw.lower_method(FuncId(i))?);
    }
    for k in 0..lay.thunks.len() {
        functions.push(lw.lower_thunk(k));
    }
    if lw.uses_move {
        functions.push(move_function());
    }
    functions.push(lw.lower_start()?);
    let address_taken = lw.address_taken.iter().map(|f| tp.func(*f).id.clone()).collect();
    Ok(GotoProgram::new(functions, lw.globals, address_taken, lay.clone(), tp.int_width))
}

fn move_function() -> GotoFunction {
    let vp = TypeRepr::pointer(TypeRepr::Void);
    let loc = SourceLocation::builtin().with_function(MOVE);
    let p = Expr::Sym { var: VarRef::Local(0), name: "p".into(), ty: vp.clone() };
    GotoFunction {
        name: MOVE.into(),
        display: MOVE.into(),
        call_name: MOVE.into(),
        params: vec![VarRef::Local(0)],
        vars: vec![VarInfo { name: "p".into(), ty: vp.clone(), is_param: true }],
        ret: vp,
        throw_spec: ThrowSpec::Noexcept,
        defined: true,
        body: vec![Instruction { kind: InstrKind::Return(Some(p)), loc: loc.clone() }, Instruction { kind: InstrKind::EndFunction, loc }],
        exit: 1,
    }
}

// ------------------------------------------------------------- traversal

enum Node<'e> {
    Expr(&'e t::Expr),
    Init(&'e Init),
}

fn visit_init<'e>(i: &'e Init, f: &mut dyn FnMut(Node<'e>)) {
    f(Node::Init(i));
    match i {
        Init::Expr(e) | Init::BindRef(e) => visit_expr(e, f),
        Init::Ctor { args, .. } | Init::Aggregate(args) => args.iter().for_each(|a| visit_init(a, f)),
        Init::Zero => {}
    }
}

fn visit_expr<'e>(e: &'e t::Expr, f: &mut dyn FnMut(Node<'e>)) {
    f(Node::Expr(e));
    match &e.kind {
        ExprKind::Field { obj: x, .. }
        | ExprKind::BaseSub { obj: x, .. }
        | ExprKind::DerivedSub { obj: x, .. }
        | ExprKind::Deref(x)
        | ExprKind::AddrOf(x)
        | ExprKind::Unary(_, x)
        | ExprKind::IncDec(_, x)
        | ExprKind::Convert(_, x)
        | ExprKind::Move(x)
        | ExprKind::Materialize(x) => visit_expr(x, f),
        ExprKind::Binary(_, a, b) | ExprKind::Assign(a, b) | ExprKind::CompoundAssign(_, a, b) => {
            visit_expr(a, f);
            visit_expr(b, f);
        }
        ExprKind::PtrAdd { ptr, offset, .. } => {
            visit_expr(ptr, f);
            visit_expr(offset, f);
        }
        ExprKind::Cond(c, a, b) => {
            visit_expr(c, f);
            visit_expr(a, f);
            visit_expr(b, f);
        }
        ExprKind::Call { args, .. } => args.iter().for_each(|a| visit_init(a, f)),
        ExprKind::MethodCall { recv, args, .. } => {
            visit_expr(recv, f);
            args.iter().for_each(|a| visit_init(a, f));
        }
        ExprKind::PtrCall { callee, args } => {
            visit_expr(callee, f);
            args.iter().for_each(|a| visit_init(a, f));
        }
        ExprKind::New { count, init, .. } => {
            if let Some(c) = count {
                visit_expr(c, f);
            }
            if let Some(i) = init {
                visit_init(i, f);
            }
        }
        ExprKind::Temp(i) => visit_init(i, f),
        ExprKind::Int(_)
        | ExprKind::Bool(_)
        | ExprKind::Null
        | ExprKind::Local(_)
        | ExprKind::Global(_)
        | ExprKind::This
        | ExprKind::FuncRef(_)
        | ExprKind::Nondet(_) => {}
    }
}

fn visit_block<'e>(b: &'e t::Block, f: &mut dyn FnMut(Node<'e>)) {
    b.stmts.iter().for_each(|s| visit_stmt(s, f));
}

fn visit_stmt<'e>(s: &'e t::Stmt, f: &mut dyn FnMut(Node<'e>)) {
    match &s.kind {
        StmtKind::Decl { init, .. } => {
            if let Some(i) = init {
                visit_init(i, f);
            }
        }
        StmtKind::Expr(e) | StmtKind::Assume(e) | StmtKind::Assert { cond: e, .. } => visit_expr(e, f),
        StmtKind::If { cond, then, els } => {
            visit_expr(cond, f);
            visit_block(then, f);
            if let Some(b) = els {
                visit_block(b, f);
            }
        }
        StmtKind::While { cond, body } | StmtKind::DoWhile { body, cond } => {
            visit_expr(cond, f);
            visit_block(body, f);
        }
        StmtKind::For { init, cond, step, body } => {
            init.iter().for_each(|s| visit_stmt(s, f));
            if let Some(c) = cond {
                visit_expr(c, f);
            }
            if let Some(c) = step {
                visit_expr(c, f);
            }
            visit_block(body, f);
        }
        StmtKind::Return(i) => {
            if let Some(i) = i {
                visit_init(i, f);
            }
        }
        StmtKind::Block(b) => visit_block(b, f),
        StmtKind::Try { body, handlers } => {
            visit_block(body, f);
            handlers.iter().for_each(|h| visit_block(&h.body, f));
        }
        StmtKind::Throw(e) => {
            if let Some(e) = e {
                visit_expr(e, f);
            }
        }
        StmtKind::Delete { expr, .. } => visit_expr(expr, f),
        StmtKind::Break | StmtKind::Continue => {}
    }
}

fn visit_method<'e>(m: &'e t::MethodInfo, f: &mut dyn FnMut(Node<'e>)) {
    for i in &m.inits {
        match i {
            t::CtorInit::Base { init, .. } | t::CtorInit::Field { init, .. } => visit_init(init, f),
        }
    }
    if let Some(b) = &m.body {
        visit_block(b, f);
    }
}

/// Local variable a glvalue designates (part of), if any.
fn root_var(e: &t::Expr) -> Option<VarId> {
    match &e.kind {
        ExprKind::Local(v) => Some(*v),
        ExprKind::Field { obj, .. } | ExprKind::BaseSub { obj, .. } | ExprKind::DerivedSub { obj, .. } => root_var(obj),
        _ => None,
    }
}

fn addr_taken_vars(m: &t::MethodInfo) -> HashSet<VarId> {
    let mut out = HashSet::new();
    visit_method(m, &mut |n| {
        let x = match n {
            Node::Init(Init::BindRef(x)) => x,
            Node::Expr(e) => match &e.kind {
                ExprKind::AddrOf(x) | ExprKind::Convert(Conversion::ArrayDecay, x) | ExprKind::Move(x) => x,
                ExprKind::MethodCall { recv, .. } => recv,
                _ => return,
            },
            _ => return,
        };
        if let Some(v) = root_var(x) {
            out.insert(v);
        }
    });
    out
}

impl<'a> Lowerer<'a> {
    fn collect_address_taken(&mut self) {
        let mut out = BTreeSet::new();
        let mut note = |n: Node| {
            if let Node::Expr(t::Expr { kind: ExprKind::FuncRef(f), .. }) = n {
                out.insert(*f);
            }
        };
        for m in &self.tp.functions {
            visit_method(m, &mut note);
        }
        for g in &self.tp.globals {
            if let Some(i) = &g.init {
                visit_init(i, &mut note);
            }
        }
        self.address_taken = out;
    }

    // ------------------------------------------------------ function state

    fn begin(&mut self, names: impl IntoIterator<Item = String>) {
        self.cur = FnState { names: names.into_iter().collect(), ..FnState::default() };
    }

    fn fresh(&mut self, base: &str, ty: TypeRepr) -> VarRef {
        let mut name = base.to_string();
        let mut n = 1;
        while self.cur.names.contains(&name) {
            name = format!("{base}${n}");
            n += 1;
        }
        self.cur.names.insert(name.clone());
        self.cur.vars.push(VarInfo { name, ty, is_param: false });
        VarRef::Local(self.cur.vars.len() as u32 - 1)
    }

    fn add_var(&mut self, name: &str, ty: TypeRepr, is_param: bool) -> VarRef {
        self.cur.names.insert(name.to_string());
        self.cur.vars.push(VarInfo { name: name.to_string(), ty, is_param });
        VarRef::Local(self.cur.vars.len() as u32 - 1)
    }

    fn sym(&self, v: VarRef) -> Expr {
        let info = match v {
            VarRef::Local(i) => &self.cur.vars[i as usize],
            VarRef::Global(i) => &self.globals[i as usize],
        };
        Expr::Sym { var: v, name: info.name.clone(), ty: info.ty.clone() }
    }

    fn emit(&mut self, kind: InstrKind, loc: &SourceLocation) {
        self.cur.body.push(Instruction { kind, loc: loc.clone() });
    }

    fn label(&mut self) -> Label {
        self.cur.labels.push(None);
        Label(self.cur.labels.len() - 1)
    }

    fn place(&mut self, l: Label) {
        self.cur.labels[l.0] = Some(self.cur.body.len());
    }

    fn goto(&mut self, cond: Option<Expr>, l: Label, loc: &SourceLocation) {
        // label ids are patched into instruction indices by `finish`
        self.emit(InstrKind::Goto { cond, target: l.0 }, loc);
    }

    fn assign(&mut self, lhs: Expr, rhs: Expr, loc: &SourceLocation) {
        self.emit(InstrKind::Assign { lhs, rhs }, loc);
    }

    fn finish(&mut self, name: String, display: String, params: Vec<VarRef>, ret: TypeRepr, spec: ThrowSpec, exit: Label) -> GotoFunction {
        let st = std::mem::take(&mut self.cur);
        let resolve = |l: usize| st.labels[l].expect("label placed");
        let mut body = st.body;
        for ins in &mut body {
            match &mut ins.kind {
                InstrKind::Goto { target, .. } => *target = resolve(*target),
                InstrKind::CatchBegin(es) => es.iter_mut().for_each(|e| e.target = resolve(e.target)),
                _ => {}
            }
            ins.loc = ins.loc.with_function(&display);
        }
        let exit = resolve(exit.0);
        GotoFunction { name, call_name: display.clone(), display, params, vars: st.vars, ret, throw_spec: spec, defined: true, body, exit }
    }

    // -------------------------------------------------------------- types

    fn class_ptr(c: &str) -> TypeRepr {
        TypeRepr::pointer(TypeRepr::Class(c.to_string()))
    }

    fn needs_dtor(&self, ty: &TypeRepr) -> Option<FuncId> {
        let elem = match ty.array_elem() {
            Some((e, _)) => e,
            None => ty,
        };
        let d = self.tp.class(elem.class_name()?)?.dtor?;
        (!self.tp.func(d).trivial).then_some(d)
    }

    fn zero_value(&self, ty: &TypeRepr) -> Expr {
        let ty = lower_ty(ty);
        match &ty {
            TypeRepr::Int(_) | TypeRepr::Char | TypeRepr::Bool => Expr::Const { value: 0, ty },
            TypeRepr::Pointer(_) | TypeRepr::NullPtr => Expr::Null(ty),
            _ => Expr::Zero(ty),
        }
    }

    fn int_const(&self, v: i64) -> Expr {
        Expr::Const { value: v, ty: TypeRepr::Int(self.tp.int_width) }
    }

    // ---------------------------------------------------- expression forms

    fn deref_as(p: Expr, ty: TypeRepr) -> Expr {
        match p {
            Expr::AddrOf { obj, .. } if obj.ty() == ty => *obj,
            p => Expr::Deref { ptr: Box::new(p), ty },
        }
    }

    fn deref(p: Expr) -> Expr {
        let ty = p.ty().pointee().cloned().unwrap_or(TypeRepr::Void);
        Self::deref_as(p, ty)
    }

    fn addr_of(lv: Expr) -> Expr {
        match lv {
            Expr::Deref { ptr, .. } => *ptr,
            lv => {
                let ty = TypeRepr::pointer(lv.ty());
                Expr::AddrOf { obj: Box::new(lv), ty }
            }
        }
    }

    fn not(e: Expr) -> Expr {
        match e {
            Expr::Const { value, ty } => Expr::Const { value: (value == 0) as i64, ty },
            Expr::Unary { op: UnaryOp::Not, arg, .. } => *arg,
            e => Expr::Unary { op: UnaryOp::Not, arg: Box::new(e), ty: TypeRepr::Bool },
        }
    }

    fn binary(op: BinOp, lhs: Expr, rhs: Expr, ty: TypeRepr) -> Expr {
        Expr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs), ty }
    }

    fn member(obj: Expr, kind: MemberKind, name: &str, offset: i64, ty: TypeRepr) -> Expr {
        Expr::Member { obj: Box::new(obj), kind, name: name.to_string(), offset, ty }
    }

    fn base_member(&self, obj: Expr, class: &str, base: &str) -> Expr {
        let off = self.lay.base_offset(class, base) as i64;
        Self::member(obj, MemberKind::Base, base, off, TypeRepr::Class(base.to_string()))
    }

    fn element(&self, arr: Expr, i: u64) -> Expr {
        let elem = arr.ty().array_elem().map(|(e, _)| e.clone()).expect("array type");
        let off = (self.lay.size_of(&elem) as u64 * i) as i64;
        Self::member(arr, MemberKind::Element(i), "", off, elem)
    }

    /// Converts a pointer to `from` into a pointer to its base `to`.
    fn upcast(&self, p: Expr, from: &str, to: &str) -> Expr {
        if from == to {
            return p;
        }
        let path = self.tp.base_path(from, to).expect("base path");
        let off = self.lay.path_offset(self.tp, &path) as i64;
        let kind = if off == 0 { CastKind::Bitcast } else { CastKind::Offset(off) };
        Expr::Cast { kind, arg: Box::new(p), ty: Self::class_ptr(to) }
    }

    fn has_effects(&self, e: &t::Expr) -> bool {
        let implicit = self.cur.implicit;
        let mut found = false;
        visit_expr(e, &mut |n| {
            if let Node::Expr(x) = n {
                found |= match &x.kind {
                    ExprKind::Assign(..)
                    | ExprKind::CompoundAssign(..)
                    | ExprKind::IncDec(..)
                    | ExprKind::Call { .. }
                    | ExprKind::MethodCall { .. }
                    | ExprKind::PtrCall { .. }
                    | ExprKind::New { .. }
                    | ExprKind::Temp(_)
                    | ExprKind::Materialize(_) => true,
                    ExprKind::Move(_) => !implicit,
                    ExprKind::Cond(..) => x.cat.is_glvalue(),
                    _ => false,
                };
            }
        });
        found
    }

    // ------------------------------------------------------- expressions

    /// The value of `e`. Class-typed values are returned as lvalues whose
    /// cells are copied by the consumer.
    fn value(&mut self, e: &t::Expr) -> Expr {
        if e.cat.is_glvalue() && !matches!(e.kind, ExprKind::FuncRef(_)) {
            self.lvalue(e)
        } else {
            self.rvalue(e)
        }
    }

    /// `e` as a condition.
    fn cond(&mut self, e: &t::Expr) -> Expr {
        let v = self.value(e);
        self.to_bool(v)
    }

    fn to_bool(&self, v: Expr) -> Expr {
        match v.ty() {
            TypeRepr::Bool => v,
            TypeRepr::Pointer(_) | TypeRepr::NullPtr => {
                let n = Expr::Null(v.ty());
                Self::binary(BinOp::Ne, v, n, TypeRepr::Bool)
            }
            ty => match v {
                Expr::Const { value, .. } => Expr::bool_const(value != 0),
                v => Self::binary(BinOp::Ne, v, Expr::Const { value: 0, ty }, TypeRepr::Bool),
            },
        }
    }

    /// Address of the object `e` designates.
    fn addr(&mut self, e: &t::Expr) -> Expr {
        if let ExprKind::FuncRef(f) = &e.kind {
            return self.func_addr(*f, &e.ty);
        }
        let lv = self.glvalue(e);
        Self::addr_of(lv)
    }

    fn func_addr(&self, f: FuncId, ty: &TypeRepr) -> Expr {
        let ty = match ty {
            TypeRepr::Function(_) => TypeRepr::pointer(ty.clone()),
            other => other.clone(),
        };
        Expr::FuncAddr { func: self.tp.func(f).id.clone(), ty: lower_ty(&ty) }
    }

    /// An lvalue for `e`, materializing prvalues into temporaries.
    fn glvalue(&mut self, e: &t::Expr) -> Expr {
        if e.cat.is_glvalue() {
            self.lvalue(e)
        } else {
            self.materialize(e)
        }
    }

    fn materialize(&mut self, e: &t::Expr) -> Expr {
        let v = self.rvalue(e);
        if matches!(v, Expr::Sym { .. }) {
            return v;
        }
        let tmp = self.fresh("tmp", lower_ty(&e.ty));
        self.emit(InstrKind::Decl(tmp), &e.loc);
        let s = self.sym(tmp);
        self.assign(s.clone(), v, &e.loc);
        s
    }

    fn local_lvalue(&self, v: VarId) -> Expr {
        let s = self.sym(self.cur.locals[v.0]);
        if self.cur.local_tys[v.0].is_reference() {
            Self::deref(s)
        } else {
            s
        }
    }

    fn global_lvalue(&self, name: &str) -> Expr {
        let i = self.global_idx[name];
        let s = self.sym(VarRef::Global(i));
        if self.tp.globals[i as usize].ty.is_reference() {
            Self::deref(s)
        } else {
            s
        }
    }

    fn lvalue(&mut self, e: &t::Expr) -> Expr {
        let ty = lower_ty(&e.ty);
        match &e.kind {
            ExprKind::Local(v) => self.local_lvalue(*v),
            ExprKind::Global(n) => self.global_lvalue(n),
            ExprKind::Field { obj, class, field } => {
                let o = self.glvalue(obj);
                let off = self.lay.field_offset(class, field) as i64;
                Self::member(o, MemberKind::Field, field, off, ty)
            }
            ExprKind::BaseSub { obj, base } => {
                let o = self.glvalue(obj);
                let c = obj.ty.class_name().expect("class object").to_string();
                self.base_member(o, &c, base)
            }
            ExprKind::DerivedSub { obj, derived } => {
                let o = self.glvalue(obj);
                let c = obj.ty.class_name().expect("class object");
                let off = self.lay.base_offset(derived, c) as i64;
                Self::member(o, MemberKind::Derived, derived, -off, ty)
            }
            ExprKind::Deref(p) => {
                let p = self.value(p);
                Self::deref_as(p, ty)
            }
            ExprKind::Assign(l, r) => self.assign_expr(l, r, &e.loc),
            ExprKind::CompoundAssign(op, l, r) => self.compound(*op, l, r, &e.loc),
            ExprKind::IncDec(op, x) if matches!(op, UnOp::PreInc | UnOp::PreDec) => {
                let lv = self.glvalue(x);
                self.step(lv.clone(), *op == UnOp::PreInc, &e.loc);
                lv
            }
            ExprKind::Cond(c, x, y) => {
                let pty = TypeRepr::pointer(ty.clone());
                if !self.has_effects(x) && !self.has_effects(y) {
                    let c = self.cond(c);
                    let (a, b) = (self.addr(x), self.addr(y));
                    let p = Expr::Ite { cond: Box::new(c), then: Box::new(a), els: Box::new(b), ty: pty };
                    return Self::deref_as(p, ty);
                }
                let tmp = self.fresh("tmp", pty);
                self.emit(InstrKind::Decl(tmp), &e.loc);
                let c = self.cond(c);
                self.branch(
                    c,
                    &e.loc,
                    |s| {
                        let a = s.addr(x);
                        let d = s.sym(tmp);
                        s.assign(d, a, &x.loc);
                    },
                    |s| {
                        let b = s.addr(y);
                        let d = s.sym(tmp);
                        s.assign(d, b, &y.loc);
                    },
                );
                Self::deref_as(self.sym(tmp), ty)
            }
            ExprKind::Call { .. } | ExprKind::MethodCall { .. } | ExprKind::PtrCall { .. } => self.call(e),
            ExprKind::Move(x) => {
                if self.cur.implicit {
                    return self.glvalue(x);
                }
                let p = self.addr(x);
                self.uses_move = true;
                let rv = self.fresh("return_value", TypeRepr::pointer(ty.clone()));
                self.emit(InstrKind::Decl(rv), &e.loc);
                let s = self.sym(rv);
                self.emit(InstrKind::Call { lhs: Some(s.clone()), func: MOVE.into(), args: vec![p] }, &e.loc);
                Self::deref_as(s, ty)
            }
            ExprKind::Materialize(x) => self.materialize(x),
            ExprKind::FuncRef(f) => {
                let p = self.func_addr(*f, &e.ty);
                Self::deref_as(p, ty)
            }
            _ => self.materialize(e),
        }
    }

    fn rvalue(&mut self, e: &t::Expr) -> Expr {
        let ty = lower_ty(&e.ty);
        match &e.kind {
            ExprKind::Int(v) => Expr::Const { value: *v, ty },
            ExprKind::Bool(b) => Expr::bool_const(*b),
            ExprKind::Null => Expr::Null(ty),
            ExprKind::This => self.sym(self.cur.this.expect("this in a method")),
            ExprKind::AddrOf(x) => self.addr(x),
            ExprKind::FuncRef(f) => self.func_addr(*f, &e.ty),
            ExprKind::Unary(op, x) => {
                let v = self.value(x);
                let op = match op {
                    UnOp::Plus => return v,
                    UnOp::Neg => UnaryOp::Neg,
                    UnOp::Not => return Self::not(self.to_bool(v)),
                    UnOp::BitNot => UnaryOp::BitNot,
                    other => unreachable!("unary {other:?} in typed tree"),
                };
                Expr::Unary { op, arg: Box::new(v), ty }
            }
            ExprKind::Binary(op @ (BinOp::And | BinOp::Or), l, r) => {
                if !self.has_effects(r) {
                    let a = self.cond(l);
                    let b = self.cond(r);
                    return Self::binary(*op, a, b, TypeRepr::Bool);
                }
                let tmp = self.fresh("tmp", TypeRepr::Bool);
                self.emit(InstrKind::Decl(tmp), &e.loc);
                let a = self.cond(l);
                self.assign(self.sym(tmp), a, &e.loc);
                let end = self.label();
                let skip = if *op == BinOp::And { Self::not(self.sym(tmp)) } else { self.sym(tmp) };
                self.goto(Some(skip), end, &e.loc);
                let b = self.cond(r);
                self.assign(self.sym(tmp), b, &e.loc);
                self.place(end);
                self.sym(tmp)
            }
            ExprKind::Binary(op, l, r) => {
                let a = self.value(l);
                let b = self.value(r);
                Self::binary(*op, a, b, ty)
            }
            ExprKind::PtrAdd { ptr, offset, negate } => {
                let p = self.value(ptr);
                let mut i = self.value(offset);
                if *negate {
                    let ity = i.ty();
                    i = Expr::Unary { op: UnaryOp::Neg, arg: Box::new(i), ty: ity };
                }
                let elem = ptr.ty.pointee().cloned().unwrap_or(TypeRepr::Void);
                let elem_cells = self.lay.size_of(&elem);
                Expr::PtrAdd { ptr: Box::new(p), index: Box::new(i), elem_cells, ty }
            }
            ExprKind::IncDec(op, x) => {
                let lv = self.glvalue(x);
                if matches!(op, UnOp::PreInc | UnOp::PreDec) {
                    self.step(lv.clone(), *op == UnOp::PreInc, &e.loc);
                    return lv;
                }
                let tmp = self.fresh("tmp", lv.ty());
                self.emit(InstrKind::Decl(tmp), &e.loc);
                self.assign(self.sym(tmp), lv.clone(), &e.loc);
                self.step(lv, *op == UnOp::PostInc, &e.loc);
                self.sym(tmp)
            }
            ExprKind::Assign(..) | ExprKind::CompoundAssign(..) => self.lvalue(e),
            ExprKind::Cond(c, x, y) => {
                if !self.has_effects(x) && !self.has_effects(y) {
                    let c = self.cond(c);
                    let a = self.value(x);
                    let b = self.value(y);
                    return Expr::Ite { cond: Box::new(c), then: Box::new(a), els: Box::new(b), ty };
                }
                let tmp = self.fresh("tmp", ty);
                self.emit(InstrKind::Decl(tmp), &e.loc);
                let c = self.cond(c);
                let target = e.ty.clone();
                self.branch(
                    c,
                    &e.loc,
                    |s| s.init_into(s.sym(tmp), &target, &Init::Expr((**x).clone()), &x.loc),
                    |s| s.init_into(s.sym(tmp), &target, &Init::Expr((**y).clone()), &y.loc),
                );
                self.sym(tmp)
            }
            ExprKind::Convert(conv, x) => self.convert(conv, x, ty),
            ExprKind::Call { .. } | ExprKind::MethodCall { .. } | ExprKind::PtrCall { .. } => self.call(e),
            ExprKind::New { elem, count, init } => self.new_expr(elem, count.as_deref(), init.as_deref(), ty, &e.loc),
            ExprKind::Temp(init) => {
                let tmp = self.fresh("tmp", ty);
                self.emit(InstrKind::Decl(tmp), &e.loc);
                self.init_into(self.sym(tmp), &e.ty, init, &e.loc);
                self.sym(tmp)
            }
            ExprKind::Nondet(_) => Expr::Nondet(ty),
            ExprKind::Local(_)
            | ExprKind::Global(_)
            | ExprKind::Field { .. }
            | ExprKind::BaseSub { .. }
            | ExprKind::DerivedSub { .. }
            | ExprKind::Deref(_)
            | ExprKind::Move(_)
            | ExprKind::Materialize(_) => self.lvalue(e),
        }
    }

    fn convert(&mut self, conv: &Conversion, x: &t::Expr, ty: TypeRepr) -> Expr {
        match conv {
            Conversion::Integral => {
                let v = self.value(x);
                if v.ty() == ty {
                    return v;
                }
                match (v, ty.int_width()) {
                    (Expr::Const { value, .. }, Some(w)) => {
                        let value = if w == 1 { (value != 0) as i64 } else { wrap_int(value, w) };
                        Expr::Const { value, ty }
                    }
                    (v, _) => Expr::Cast { kind: CastKind::Integral, arg: Box::new(v), ty },
                }
            }
            Conversion::ToBool => self.cond(x),
            Conversion::NullToPtr => {
                let _ = self.value(x);
                Expr::Null(ty)
            }
            Conversion::PtrUpcast(path) | Conversion::PtrDowncast(path) => {
                let v = self.value(x);
                let off = self.lay.path_offset(self.tp, path) as i64;
                let off = if matches!(conv, Conversion::PtrDowncast(_)) { -off } else { off };
                match v {
                    Expr::Null(_) => Expr::Null(ty),
                    v if off == 0 => Expr::Cast { kind: CastKind::Bitcast, arg: Box::new(v), ty },
                    v => Expr::Cast { kind: CastKind::Offset(off), arg: Box::new(v), ty },
                }
            }
            Conversion::PtrBitcast => {
                let v = self.value(x);
                match v {
                    Expr::Null(_) => Expr::Null(ty),
                    v if v.ty() == ty => v,
                    v => Expr::Cast { kind: CastKind::Bitcast, arg: Box::new(v), ty },
                }
            }
            Conversion::ArrayDecay => {
                let lv = self.glvalue(x);
                match Self::addr_of(lv) {
                    Expr::AddrOf { obj, .. } => Expr::AddrOf { obj, ty },
                    p => Expr::Cast { kind: CastKind::Bitcast, arg: Box::new(p), ty },
                }
            }
            Conversion::FuncToPtr => match &x.kind {
                ExprKind::FuncRef(f) => self.func_addr(*f, &x.ty),
                _ => self.value(x),
            },
        }
    }

    fn step(&mut self, lv: Expr, up: bool, loc: &SourceLocation) {
        let ty = lv.ty();
        let new = if ty.is_pointer() {
            let elem = ty.pointee().cloned().unwrap_or(TypeRepr::Void);
            let elem_cells = self.lay.size_of(&elem);
            let one = self.int_const(if up { 1 } else { -1 });
            Expr::PtrAdd { ptr: Box::new(lv.clone()), index: Box::new(one), elem_cells, ty }
        } else {
            let op = if up { BinOp::Add } else { BinOp::Sub };
            Self::binary(op, lv.clone(), Expr::Const { value: 1, ty: ty.clone() }, ty)
        };
        self.assign(lv, new, loc);
    }

    fn assign_expr(&mut self, l: &t::Expr, r: &t::Expr, loc: &SourceLocation) -> Expr {
        let lv = self.glvalue(l);
        let rv = self.value(r);
        self.assign(lv.clone(), rv, loc);
        lv
    }

    fn compound(&mut self, op: BinOp, l: &t::Expr, r: &t::Expr, loc: &SourceLocation) -> Expr {
        let lv = self.glvalue(l);
        let rv = self.value(r);
        let lty = lv.ty();
        let new = if lty.is_pointer() {
            let elem = lty.pointee().cloned().unwrap_or(TypeRepr::Void);
            let elem_cells = self.lay.size_of(&elem);
            let index = if op == BinOp::Sub {
                let ity = rv.ty();
                Expr::Unary { op: UnaryOp::Neg, arg: Box::new(rv), ty: ity }
            } else {
                rv
            };
            Expr::PtrAdd { ptr: Box::new(lv.clone()), index: Box::new(index), elem_cells, ty: lty }
        } else {
            let rty = rv.ty();
            let a = if rty == lty { lv.clone() } else { Expr::Cast { kind: CastKind::Integral, arg: Box::new(lv.clone()), ty: rty.clone() } };
            let v = Self::binary(op, a, rv, rty.clone());
            if rty == lty {
                v
            } else {
                Expr::Cast { kind: CastKind::Integral, arg: Box::new(v), ty: lty }
            }
        };
        self.assign(lv.clone(), new, loc);
        lv
    }

    /// `if (cond) then else els` with explicit jumps.
    fn branch(&mut self, cond: Expr, loc: &SourceLocation, then: impl FnOnce(&mut Self), els: impl FnOnce(&mut Self)) {
        let l_else = self.label();
        let l_end = self.label();
        self.goto(Some(Self::not(cond)), l_else, loc);
        then(self);
        self.goto(None, l_end, loc);
        self.place(l_else);
        els(self);
        self.place(l_end);
    }

    // ------------------------------------------------------------- calls

    fn emit_call(&mut self, func: String, ret: &TypeRepr, args: Vec<Expr>, loc: &SourceLocation) -> Expr {
        if ret.is_void() {
            self.emit(InstrKind::Call { lhs: None, func, args }, loc);
            return Expr::Zero(TypeRepr::Void);
        }
        let rv = self.fresh("return_value", lower_ty(ret));
        self.emit(InstrKind::Decl(rv), loc);
        let s = self.sym(rv);
        self.emit(InstrKind::Call { lhs: Some(s.clone()), func, args }, loc);
        match ret.referent() {
            Some(r) => Self::deref_as(s, lower_ty(r)),
            None => s,
        }
    }

    fn arg(&mut self, init: &Init, param: &TypeRepr, loc: &SourceLocation) -> Expr {
        match init {
            Init::BindRef(e) => self.addr(e),
            Init::Expr(e) if !param.is_reference() => self.value(e),
            _ => {
                let ty = lower_ty(param.value_type());
                let tmp = self.fresh("tmp", ty);
                self.emit(InstrKind::Decl(tmp), loc);
                self.init_into(self.sym(tmp), param.value_type(), init, loc);
                let s = self.sym(tmp);
                if param.is_reference() {
                    Self::addr_of(s)
                } else {
                    s
                }
            }
        }
    }

    fn args(&mut self, params: &[TypeRepr], args: &[Init], loc: &SourceLocation) -> Vec<Expr> {
        params.iter().zip(args).map(|(p, a)| self.arg(a, p, loc)).collect()
    }

    fn call(&mut self, e: &t::Expr) -> Expr {
        match &e.kind {
            ExprKind::Call { func, args } => {
                let f = self.tp.func(*func);
                let args = self.args(&f.sig.params, args, &e.loc);
                self.emit_call(f.id.clone(), &f.sig.ret, args, &e.loc)
            }
            ExprKind::MethodCall { func, recv, args, is_virtual } => {
                let f = self.tp.func(*func);
                let this = self.addr(recv);
                let mut a = vec![this];
                a.extend(self.args(&f.sig.params, args, &e.loc));
                if *is_virtual {
                    self.dispatch(*func, a, &e.loc)
                } else {
                    self.emit_call(f.id.clone(), &f.sig.ret, a, &e.loc)
                }
            }
            ExprKind::PtrCall { callee, args } => {
                let ft = callee.ty.pointee().and_then(|t| t.function()).or_else(|| callee.ty.function()).cloned().expect("callee has function type");
                let fp = self.value(callee);
                let a = self.args(&ft.params, args, &e.loc);
                self.pointer_dispatch(fp, &ft, a, &e.loc)
            }
            _ => unreachable!("not a call"),
        }
    }

    fn result_var(&mut self, ret: &TypeRepr, loc: &SourceLocation) -> Option<VarRef> {
        if ret.is_void() {
            return None;
        }
        let rv = self.fresh("return_value", lower_ty(ret));
        self.emit(InstrKind::Decl(rv), loc);
        Some(rv)
    }

    fn result_expr(&self, rv: Option<VarRef>, ret: &TypeRepr) -> Expr {
        match rv {
            None => Expr::Zero(TypeRepr::Void),
            Some(v) => match ret.referent() {
                Some(r) => Self::deref_as(self.sym(v), lower_ty(r)),
                None => self.sym(v),
            },
        }
    }

    /// Virtual call: read the receiver's vptr once, then call the target
    /// registered for each possible vtable.
    fn dispatch(&mut self, func: FuncId, mut args: Vec<Expr>, loc: &SourceLocation) -> Expr {
        let f = self.tp.func(func);
        let class = f.class.clone().expect("virtual method has a class");
        let plan = match self.lay.resolve_virtual_call(self.tp, &class, func) {
            Ok(p) => p,
            Err(_) => {
                // no vtable can reach this call
                self.emit(InstrKind::Assume(Expr::bool_const(false)), loc);
                return self.result_expr(None, &f.sig.ret);
            }
        };
        let this = args[0].clone();
        let this = if matches!(this, Expr::Sym { .. }) {
            this
        } else {
            let p = self.fresh("tmp", Self::class_ptr(&class));
            self.emit(InstrKind::Decl(p), loc);
            self.assign(self.sym(p), this, loc);
            self.sym(p)
        };
        args[0] = this.clone();
        let vptr = self.fresh("vptr", TypeRepr::Int(VPTR_BITS));
        self.emit(InstrKind::Decl(vptr), loc);
        let obj = Self::deref_as(this.clone(), TypeRepr::Class(class.clone()));
        let read = Self::member(obj, MemberKind::Vptr, "@vptr", plan.vptr_offset as i64, TypeRepr::Int(VPTR_BITS));
        self.assign(self.sym(vptr), read, loc);
        let ret = f.sig.ret.clone();
        let rv = self.result_var(&ret, loc);
        let done = self.label();
        let n = plan.targets.len();
        for (i, (id, target)) in plan.targets.iter().enumerate() {
            let last = i + 1 == n;
            let next = self.label();
            if !last {
                let c = Self::binary(BinOp::Ne, self.sym(vptr), Expr::Const { value: *id as i64, ty: TypeRepr::Int(VPTR_BITS) }, TypeRepr::Bool);
                self.goto(Some(c), next, loc);
            }
            let (name, intro) = match target {
                SlotTarget::Direct(g) => {
                    let g = self.tp.func(*g);
                    (g.id.clone(), g.class.clone().expect("method class"))
                }
                SlotTarget::Thunk(k) => {
                    let th = &self.lay.thunks[*k];
                    (th.name.clone(), th.receiver.clone())
                }
                SlotTarget::Pure(g) => {
                    let comment = format!("pure virtual function '{}' called", self.tp.func(*g).id);
                    self.emit(InstrKind::Assert { cond: Expr::bool_const(false), class: "pure virtual function called".into(), comment }, loc);
                    self.emit(InstrKind::Assume(Expr::bool_const(false)), loc);
                    if !last {
                        self.goto(None, done, loc);
                        self.place(next);
                    }
                    continue;
                }
            };
            let mut a = args.clone();
            a[0] = self.upcast(this.clone(), &class, &intro);
            let lhs = rv.map(|v| self.sym(v));
            self.emit(InstrKind::Call { lhs, func: name, args: a }, loc);
            if !last {
                self.goto(None, done, loc);
                self.place(next);
            }
        }
        if n == 0 {
            self.emit(InstrKind::Assume(Expr::bool_const(false)), loc);
        }
        self.place(done);
        self.result_expr(rv, &ret)
    }

    /// Call through a function pointer: compare against every function whose
    /// address is taken and has a matching type.
    fn pointer_dispatch(&mut self, fp: Expr, ft: &crate::frontend::FunctionType, args: Vec<Expr>, loc: &SourceLocation) -> Expr {
        let fp = if matches!(fp, Expr::Sym { .. } | Expr::FuncAddr { .. }) {
            fp
        } else {
            let p = self.fresh("tmp", fp.ty());
            self.emit(InstrKind::Decl(p), loc);
            self.assign(self.sym(p), fp, loc);
            self.sym(p)
        };
        let cands: Vec<FuncId> = self
            .address_taken
            .iter()
            .copied()
            .filter(|f| {
                let s = &self.tp.func(*f).sig;
                s.params == ft.params && s.ret == ft.ret && self.tp.func(*f).class.is_none()
            })
            .collect();
        let rv = self.result_var(&ft.ret, loc);
        let done = self.label();
        for f in cands {
            let next = self.label();
            let fa = self.func_addr(f, &TypeRepr::Function(ft.clone()));
            let c = Self::binary(BinOp::Ne, fp.clone(), fa, TypeRepr::Bool);
            self.goto(Some(c), next, loc);
            let lhs = rv.map(|v| self.sym(v));
            let name = self.tp.func(f).id.clone();
            self.emit(InstrKind::Call { lhs, func: name, args: args.clone() }, loc);
            self.goto(None, done, loc);
            self.place(next);
        }
        self.emit(
            InstrKind::Assert {
                cond: Expr::bool_const(false),
                class: "invalid function pointer".into(),
                comment: "call through a pointer to no known function".into(),
            },
            loc,
        );
        self.emit(InstrKind::Assume(Expr::bool_const(false)), loc);
        self.place(done);
        self.result_expr(rv, &ft.ret)
    }

    // ------------------------------------------------------ initialization

    fn call_ctor(&mut self, lv: Expr, func: FuncId, args: &[Init], loc: &SourceLocation) {
        let f = self.tp.func(func);
        if f.trivial {
            return;
        }
        let mut a = vec![Self::addr_of(lv)];
        a.extend(self.args(&f.sig.params, args, loc));
        self.emit(InstrKind::Call { lhs: None, func: f.id.clone(), args: a }, loc);
    }

    fn destroy(&mut self, lv: Expr, ty: &TypeRepr, loc: &SourceLocation) {
        let Some(d) = self.needs_dtor(ty) else { return };
        if let Some((_, n)) = ty.array_elem() {
            let elem = ty.array_elem().map(|(e, _)| e.clone()).expect("array");
            for i in (0..n.unwrap_or(0)).rev() {
                let el = self.element(lv.clone(), i);
                self.destroy(el, &elem, loc);
            }
            return;
        }
        let id = self.tp.func(d).id.clone();
        self.emit(InstrKind::Call { lhs: None, func: id, args: vec![Self::addr_of(lv)] }, loc);
    }

    fn default_construct(&mut self, lv: Expr, ty: &TypeRepr, ctor: FuncId, loc: &SourceLocation) {
        match ty.array_elem() {
            Some((elem, n)) => {
                let elem = elem.clone();
                for i in 0..n.unwrap_or(0) {
                    let el = self.element(lv.clone(), i);
                    self.default_construct(el, &elem, ctor, loc);
                }
            }
            None => self.call_ctor(lv, ctor, &[], loc),
        }
    }

    /// Whether `items` form a constant-shape literal of `ty`.
    fn literal_ok(&self, ty: &TypeRepr, items: &[Init]) -> bool {
        let item_ok = |i: &Init, ty: &TypeRepr| match i {
            Init::Expr(e) => ty.is_scalar() && !self.has_effects(e),
            Init::Zero => true,
            Init::Aggregate(xs) => self.literal_ok(ty, xs),
            _ => false,
        };
        match ty.strip_cv() {
            TypeRepr::Class(c) => {
                let ci = self.tp.class(c).expect("class");
                ci.bases.is_empty()
                    && !ci.polymorphic
                    && ci.fields.iter().enumerate().all(|(k, f)| match items.get(k) {
                        Some(i) => item_ok(i, &f.ty),
                        None => self.needs_dtor(&f.ty).is_none() && f.ty.class_name().is_none(),
                    })
            }
            TypeRepr::Array(e, _) => items.iter().all(|i| item_ok(i, e)) && e.class_name().is_none(),
            _ => false,
        }
    }

    fn literal(&mut self, ty: &TypeRepr, items: &[Init]) -> Expr {
        let item = |s: &mut Self, i: Option<&Init>, ty: &TypeRepr| match i {
            Some(Init::Expr(e)) => s.value(e),
            Some(Init::Aggregate(xs)) => s.literal(ty, xs),
            _ => s.zero_value(ty),
        };
        match ty.strip_cv() {
            TypeRepr::Class(c) => {
                let ci = self.tp.class(c).expect("class");
                let fields = ci.fields.iter().enumerate().map(|(k, f)| (f.name.clone(), item(self, items.get(k), &f.ty))).collect();
                Expr::Struct { fields, ty: lower_ty(ty) }
            }
            TypeRepr::Array(e, n) => {
                let elems = (0..n.unwrap_or(items.len() as u64) as usize).map(|k| item(self, items.get(k), e)).collect();
                Expr::Array { elems, ty: lower_ty(ty) }
            }
            _ => unreachable!("literal of scalar type"),
        }
    }

    /// Initializes the object `lv` of declared type `ty` (a pointer cell
    /// when `ty` is a reference).
    fn init_into(&mut self, lv: Expr, ty: &TypeRepr, init: &Init, loc: &SourceLocation) {
        match init {
            Init::BindRef(e) => {
                let a = self.addr(e);
                self.assign(lv, a, loc);
            }
            Init::Expr(e) => {
                if let (ExprKind::Temp(inner), Some(_)) = (&e.kind, ty.class_name()) {
                    return self.init_into(lv, ty, inner, loc);
                }
                if ty.is_reference() {
                    let a = self.addr(e);
                    return self.assign(lv, a, loc);
                }
                let v = self.value(e);
                self.assign(lv, v, loc);
            }
            Init::Ctor { func, args } => self.call_ctor(lv, *func, args, loc),
            Init::Aggregate(items) => {
                if self.literal_ok(ty, items) {
                    let v = self.literal(ty, items);
                    return self.assign(lv, v, loc);
                }
                match ty.strip_cv() {
                    TypeRepr::Class(c) => {
                        let c = c.clone();
                        let fields = self.tp.class(&c).expect("class").fields.clone();
                        for (k, f) in fields.iter().enumerate() {
                            let off = self.lay.field_offset(&c, &f.name) as i64;
                            let m = Self::member(lv.clone(), MemberKind::Field, &f.name, off, lower_ty(&f.ty));
                            let i = items.get(k).cloned().unwrap_or(Init::Zero);
                            self.init_into(m, &f.ty, &i, loc);
                        }
                    }
                    TypeRepr::Array(e, n) => {
                        let e = (**e).clone();
                        for k in 0..n.unwrap_or(items.len() as u64) {
                            let el = self.element(lv.clone(), k);
                            let i = items.get(k as usize).cloned().unwrap_or(Init::Zero);
                            self.init_into(el, &e, &i, loc);
                        }
                    }
                    _ => {
                        if let Some(i) = items.first() {
                            self.init_into(lv, ty, i, loc);
                        }
                    }
                }
            }
            Init::Zero => {
                let z = self.zero_value(ty);
                self.assign(lv.clone(), z, loc);
                let elem = ty.array_elem().map(|(e, _)| e).unwrap_or(ty);
                if let Some(c) = elem.class_name() {
                    let ctor = self.tp.class(c).and_then(|ci| {
                        ci.methods.iter().copied().find(|m| {
                            let m = self.tp.func(*m);
                            m.kind == FunctionKind::Constructor && m.sig.params.is_empty()
                        })
                    });
                    if let Some(f) = ctor {
                        self.default_construct(lv, ty, f, loc);
                    }
                }
            }
        }
    }

    fn new_expr(&mut self, elem: &TypeRepr, count: Option<&t::Expr>, init: Option<&Init>, ty: TypeRepr, loc: &SourceLocation) -> Expr {
        let count = count.map(|c| {
            let v = self.value(c);
            if matches!(v, Expr::Const { .. } | Expr::Sym { .. }) {
                v
            } else {
                let n = self.fresh("tmp", v.ty());
                self.emit(InstrKind::Decl(n), loc);
                self.assign(self.sym(n), v, loc);
                self.sym(n)
            }
        });
        let p = self.fresh("tmp", ty);
        self.emit(InstrKind::Decl(p), loc);
        let ps = self.sym(p);
        self.emit(InstrKind::New { lhs: ps.clone(), elem: lower_ty(elem), count: count.clone() }, loc);
        match (init, count) {
            (None, _) => {}
            (Some(i), None) => {
                let obj = Self::deref_as(ps.clone(), lower_ty(elem));
                self.init_into(obj, elem, i, loc);
            }
            (Some(Init::Ctor { func, args }), Some(n)) => {
                if !self.tp.func(*func).trivial {
                    let (func, args) = (*func, args.clone());
                    self.counted_loop(n, loc, |s, i| {
                        let el = s.element_at(s.sym(p), i, elem);
                        s.call_ctor(el, func, &args, loc);
                    });
                }
            }
            (Some(_), Some(_)) => {}
        }
        ps
    }

    fn element_at(&self, p: Expr, i: Expr, elem: &TypeRepr) -> Expr {
        let pty = p.ty();
        let elem_cells = self.lay.size_of(elem);
        let q = Expr::PtrAdd { ptr: Box::new(p), index: Box::new(i), elem_cells, ty: pty };
        Self::deref_as(q, lower_ty(elem))
    }

    /// `for (i = 0; i < n; i++) body(i)`, rotated like source loops.
    fn counted_loop(&mut self, n: Expr, loc: &SourceLocation, body: impl FnOnce(&mut Self, Expr)) {
        let ity = n.ty();
        let i = self.fresh("index", ity.clone());
        self.emit(InstrKind::Decl(i), loc);
        self.assign(self.sym(i), Expr::Const { value: 0, ty: ity.clone() }, loc);
        let l_body = self.label();
        let l_test = self.label();
        self.goto(None, l_test, loc);
        self.place(l_body);
        body(self, self.sym(i));
        let inc = Self::binary(BinOp::Add, self.sym(i), Expr::Const { value: 1, ty: ity.clone() }, ity);
        self.assign(self.sym(i), inc, loc);
        self.place(l_test);
        let c = Self::binary(BinOp::Lt, self.sym(i), n, TypeRepr::Bool);
        self.goto(Some(c), l_body, loc);
    }

    // -------------------------------------------------------- statements

    fn discard(&mut self, e: &t::Expr) {
        match &e.kind {
            ExprKind::IncDec(op, x) => {
                let lv = self.glvalue(x);
                self.step(lv, matches!(op, UnOp::PreInc | UnOp::PostInc), &e.loc);
            }
            ExprKind::Convert(_, x) => self.discard(x),
            ExprKind::Cond(c, x, y) if self.has_effects(x) || self.has_effects(y) => {
                let c = self.cond(c);
                self.branch(c, &e.loc, |s| s.discard(x), |s| s.discard(y));
            }
            ExprKind::Binary(op @ (BinOp::And | BinOp::Or), l, r) if self.has_effects(r) => {
                let c = self.cond(l);
                let c = if *op == BinOp::And { c } else { Self::not(c) };
                let end = self.label();
                self.goto(Some(Self::not(c)), end, &e.loc);
                self.discard(r);
                self.place(end);
            }
            _ => {
                if self.has_effects(e) {
                    let _ = self.value(e);
                }
            }
        }
    }

    fn block(&mut self, b: &t::Block) {
        self.cur.frames.push(Frame::Block(Vec::new()));
        for s in &b.stmts {
            self.stmt(s);
        }
        let ends_in_jump = matches!(b.stmts.last().map(|s| &s.kind), Some(StmtKind::Return(_) | StmtKind::Break | StmtKind::Continue | StmtKind::Throw(_)));
        match self.cur.frames.pop() {
            Some(Frame::Block(cs)) if !ends_in_jump => self.cleanup(&cs, &b.end),
            _ => {}
        }
    }

    fn cleanup(&mut self, cs: &[Cleanup], loc: &SourceLocation) {
        for c in cs.iter().rev() {
            if c.destroy {
                let s = self.sym(c.var);
                self.destroy(s, &c.ty.clone(), loc);
            }
            if c.dead {
                self.emit(InstrKind::Dead(c.var), loc);
            }
        }
    }

    /// Runs cleanups of every frame from the innermost down to `depth`.
    fn unwind_to(&mut self, depth: usize, loc: &SourceLocation) {
        let frames = std::mem::take(&mut self.cur.frames);
        for f in frames[depth..].iter().rev() {
            match f {
                Frame::Block(cs) => self.cleanup(cs, loc),
                Frame::Try => self.emit(InstrKind::CatchEnd, loc),
            }
        }
        self.cur.frames = frames;
    }

    fn has_cleanups(&self) -> bool {
        self.cur.frames.iter().any(|f| match f {
            Frame::Block(cs) => !cs.is_empty(),
            Frame::Try => true,
        })
    }

    fn register(&mut self, var: VarRef, ty: &TypeRepr, addr_taken: bool) {
        if ty.is_reference() {
            return;
        }
        let destroy = self.needs_dtor(ty).is_some();
        let dead = addr_taken || ty.class_name().is_some() || ty.array_elem().is_some();
        if !destroy && !dead {
            return;
        }
        if let Some(Frame::Block(cs)) = self.cur.frames.last_mut() {
            cs.push(Cleanup { var, ty: ty.clone(), destroy, dead });
        }
    }

    fn stmt(&mut self, s: &t::Stmt) {
        let loc = &s.loc;
        match &s.kind {
            StmtKind::Decl { var, init, default_ctor } => {
                let r = self.cur.locals[var.0];
                let ty = self.cur.local_tys[var.0].clone();
                self.emit(InstrKind::Decl(r), loc);
                match (init, default_ctor) {
                    (Some(i), _) => self.init_into(self.sym(r), &ty, i, loc),
                    (None, Some(f)) => self.default_construct(self.sym(r), &ty, *f, loc),
                    (None, None) => {}
                }
                let taken = self.cur.addr_taken.contains(var);
                self.register(r, &ty, taken);
            }
            StmtKind::Expr(e) => self.discard(e),
            StmtKind::Assert { cond, comment } => {
                let c = self.cond(cond);
                self.emit(InstrKind::Assert { cond: c, class: "assertion".into(), comment: comment.clone() }, loc);
            }
            StmtKind::Assume(c) => {
                let c = self.cond(c);
                self.emit(InstrKind::Assume(c), loc);
            }
            StmtKind::If { cond, then, els } => {
                let c = self.cond(cond);
                match els {
                    Some(e) => self.branch(c, loc, |s| s.block(then), |s| s.block(e)),
                    None => {
                        let end = self.label();
                        self.goto(Some(Self::not(c)), end, loc);
                        self.block(then);
                        self.place(end);
                    }
                }
            }
            StmtKind::While { cond, body } => self.loop_stmt(Some(cond), None, body, false, loc),
            StmtKind::DoWhile { body, cond } => self.loop_stmt(Some(cond), None, body, true, loc),
            StmtKind::For { init, cond, step, body } => {
                self.cur.frames.push(Frame::Block(Vec::new()));
                for s in init {
                    self.stmt(s);
                }
                self.loop_stmt(cond.as_ref(), step.as_ref(), body, false, loc);
                if let Some(Frame::Block(cs)) = self.cur.frames.pop() {
                    self.cleanup(&cs, loc);
                }
            }
            StmtKind::Return(init) => self.return_stmt(init.as_ref(), loc),
            StmtKind::Break | StmtKind::Continue => {
                let lp = self.cur.loops.last().expect("jump inside a loop");
                let (depth, target) = (lp.depth, if matches!(s.kind, StmtKind::Break) { lp.brk } else { lp.cont });
                self.unwind_to(depth, loc);
                self.goto(None, target, loc);
            }
            StmtKind::Block(b) => self.block(b),
            StmtKind::Try { body, handlers } => self.try_stmt(body, handlers, loc),
            StmtKind::Throw(e) => self.throw_stmt(e.as_ref(), loc),
            StmtKind::Delete { expr, array, dtor, is_virtual } => self.delete_stmt(expr, *array, *dtor, *is_virtual, loc),
        }
    }

    fn loop_stmt(&mut self, cond: Option<&t::Expr>, step: Option<&t::Expr>, body: &t::Block, do_while: bool, loc: &SourceLocation) {
        let l_body = self.label();
        let l_cont = self.label();
        let l_test = self.label();
        let l_end = self.label();
        if !do_while {
            self.goto(None, l_test, loc);
        }
        self.place(l_body);
        let depth = self.cur.frames.len();
        self.cur.loops.push(LoopCtx { brk: l_end, cont: l_cont, depth });
        self.block(body);
        self.cur.loops.pop();
        self.place(l_cont);
        if let Some(st) = step {
            self.discard(st);
        }
        self.place(l_test);
        let cloc = cond.map(|c| c.loc.clone()).unwrap_or_else(|| loc.clone());
        let c = match cond {
            Some(c) => self.cond(c),
            None => Expr::bool_const(true),
        };
        self.goto(Some(c), l_body, &cloc);
        self.place(l_end);
    }

    fn return_stmt(&mut self, init: Option<&Init>, loc: &SourceLocation) {
        let ret = self.cur.ret.clone();
        let mut v = init.map(|i| match i {
            Init::BindRef(e) => self.addr(e),
            Init::Expr(e) if !ret.is_reference() && !matches!(e.kind, ExprKind::Temp(_)) => self.value(e),
            i => {
                let tmp = self.fresh("tmp", lower_ty(ret.value_type()));
                self.emit(InstrKind::Decl(tmp), loc);
                self.init_into(self.sym(tmp), ret.value_type(), i, loc);
                let s = self.sym(tmp);
                if ret.is_reference() {
                    Self::addr_of(s)
                } else {
                    s
                }
            }
        });
        if self.has_cleanups() {
            if let Some(x) = v.take() {
                v = Some(match x {
                    x @ (Expr::Const { .. } | Expr::Null(_)) => x,
                    x => {
                        let tmp = self.fresh("tmp", x.ty());
                        self.emit(InstrKind::Decl(tmp), loc);
                        self.assign(self.sym(tmp), x, loc);
                        self.sym(tmp)
                    }
                });
            }
            self.unwind_to(0, loc);
        }
        match self.cur.epilogue {
            Some(l) => self.goto(None, l, loc),
            None => self.emit(InstrKind::Return(v), loc),
        }
    }

    fn try_stmt(&mut self, body: &t::Block, handlers: &[t::Handler], loc: &SourceLocation) {
        let labels: Vec<Label> = handlers.iter().map(|_| self.label()).collect();
        let end = self.label();
        let entries = handlers
            .iter()
            .zip(&labels)
            .map(|(h, l)| CatchEntry { tag: h.ty.as_ref().map(TypeTag::of).unwrap_or_else(TypeTag::ellipsis), ty: h.ty.clone(), target: l.0 })
            .collect();
        self.emit(InstrKind::CatchBegin(entries), loc);
        self.cur.frames.push(Frame::Try);
        self.block(body);
        self.cur.frames.pop();
        self.emit(InstrKind::CatchEnd, &body.end);
        self.goto(None, end, &body.end);
        for (k, (h, l)) in handlers.iter().zip(&labels).enumerate() {
            self.place(*l);
            let var = h.var.map(|v| self.cur.locals[v.0]);
            self.emit(InstrKind::Landing { ty: h.ty.clone(), var }, &h.loc);
            self.cur.frames.push(Frame::Block(Vec::new()));
            if let (Some(v), Some(r)) = (h.var, var) {
                let ty = self.cur.local_tys[v.0].clone();
                let taken = self.cur.addr_taken.contains(&v);
                self.register(r, &ty, taken);
            }
            self.block(&h.body);
            if let Some(Frame::Block(cs)) = self.cur.frames.pop() {
                self.cleanup(&cs, &h.body.end);
            }
            if k + 1 < handlers.len() {
                self.goto(None, end, &h.body.end);
            }
        }
        self.place(end);
    }

    fn throw_stmt(&mut self, e: Option<&t::Expr>, loc: &SourceLocation) {
        let Some(e) = e else {
            self.emit(InstrKind::Throw { tags: vec![], ty: None, value: None }, loc);
            return;
        };
        let vty = match &e.ty {
            TypeRepr::Function(_) => TypeRepr::pointer(e.ty.clone()),
            t => t.clone(),
        };
        let tmp = self.fresh("tmp", lower_ty(&vty));
        self.emit(InstrKind::Decl(tmp), loc);
        match &e.kind {
            ExprKind::Temp(inner) => self.init_into(self.sym(tmp), &e.ty, inner, loc),
            _ => {
                let v = self.value(e);
                self.assign(self.sym(tmp), v, loc);
            }
        }
        let mut tags = vec![TypeTag::of(&e.ty)];
        if let Some(c) = e.ty.class_name() {
            for b in self.tp.all_bases(c) {
                let tag = TypeTag::of(&TypeRepr::Class(b));
                if !tags.contains(&tag) {
                    tags.push(tag);
                }
            }
        }
        let value = Some(self.sym(tmp));
        self.emit(InstrKind::Throw { tags, ty: Some(e.ty.clone()), value }, loc);
    }

    fn delete_stmt(&mut self, expr: &t::Expr, array: bool, dtor: Option<FuncId>, is_virtual: bool, loc: &SourceLocation) {
        let v = self.value(expr);
        let p = if matches!(v, Expr::Sym { .. } | Expr::Null(_)) {
            v
        } else {
            let tmp = self.fresh("tmp", v.ty());
            self.emit(InstrKind::Decl(tmp), loc);
            self.assign(self.sym(tmp), v, loc);
            self.sym(tmp)
        };
        let dtor = dtor.filter(|d| !self.tp.func(*d).trivial);
        if let Some(d) = dtor {
            let skip = self.label();
            let null = Expr::Null(p.ty());
            self.goto(Some(Self::binary(BinOp::Eq, p.clone(), null, TypeRepr::Bool)), skip, loc);
            if array {
                let elem = expr.ty.pointee().cloned().expect("pointer operand");
                let n = Expr::ObjectSize { ptr: Box::new(p.clone()), ty: TypeRepr::Int(self.tp.int_width) };
                let id = self.tp.func(d).id.clone();
                self.counted_loop(n, loc, |s, i| {
                    let el = s.element_at(p.clone(), i, &elem);
                    s.emit(InstrKind::Call { lhs: None, func: id, args: vec![Self::addr_of(el)] }, loc);
                });
            } else if is_virtual {
                self.dispatch(d, vec![p.clone()], loc);
            } else {
                let id = self.tp.func(d).id.clone();
                self.emit(InstrKind::Call { lhs: None, func: id, args: vec![p.clone()] }, loc);
            }
            self.place(skip);
        }
        let whole_object = is_virtual && !array && dtor.is_some();
        self.emit(InstrKind::Delete { ptr: p, is_array: array, whole_object }, loc);
    }

    // --------------------------------------------------------- functions

    fn lower_method(&mut self, id: FuncId) -> Result<GotoFunction, LowerError> {
        let tp = self.tp;
        let m = tp.func(id);
        let defined = m.body.is_some() || m.implicit.is_some();
        self.begin(m.locals.iter().map(|l| l.name.clone()));
        self.cur.implicit = m.implicit.is_some();
        self.cur.ret = (*m.sig.ret).clone();
        self.cur.addr_taken = addr_taken_vars(m);
        let mut params = Vec::new();
        if let Some(c) = &m.class {
            let this = self.add_var("this", Self::class_ptr(c), true);
            self.cur.this = Some(this);
            params.push(this);
        }
        for l in &m.locals {
            let r = self.add_var(&l.name, lower_ty(&l.ty), l.is_param);
            self.cur.locals.push(r);
            self.cur.local_tys.push(l.ty.clone());
        }
        params.extend(m.params.iter().map(|v| self.cur.locals[v.0]));
        let exit = self.label();
        let ret = lower_ty(&m.sig.ret);
        if !defined {
            self.place(exit);
            self.emit(InstrKind::EndFunction, &m.loc);
            let mut f = self.finish(m.id.clone(), m.display().to_string(), params, ret, m.sig.throw_spec.clone(), exit);
            f.defined = false;
            return Ok(f);
        }
        if !m.sig.throw_spec.is_unspecified() {
            self.emit(InstrKind::ThrowDecl(m.sig.throw_spec.clone()), &m.loc);
        }
        let class = m.class.clone();
        let this_obj = |s: &Self| {
            let c = class.clone().expect("member function");
            Self::deref_as(s.sym(s.cur.this.expect("this")), TypeRepr::Class(c))
        };
        self.cur.frames.push(Frame::Block(Vec::new()));
        match m.kind {
            FunctionKind::Constructor => {
                let c = class.clone().expect("constructor class");
                let mut vptrs_set = false;
                for init in &m.inits {
                    match init {
                        t::CtorInit::Base { class: b, init } => {
                            let lv = self.base_member(this_obj(self), &c, b);
                            self.init_into(lv, &TypeRepr::Class(b.clone()), init, &m.loc);
                        }
                        t::CtorInit::Field { name, init } => {
                            if !vptrs_set {
                                self.set_vptrs(this_obj(self), &c, &m.loc);
                                vptrs_set = true;
                            }
                            let f = tp.class(&c).and_then(|ci| ci.fields.iter().find(|f| &f.name == name)).expect("field");
                            let off = self.lay.field_offset(&c, name) as i64;
                            let lv = Self::member(this_obj(self), MemberKind::Field, name, off, lower_ty(&f.ty));
                            self.init_into(lv, &f.ty, init, &m.loc);
                        }
                    }
                }
                if !vptrs_set {
                    self.set_vptrs(this_obj(self), &c, &m.loc);
                }
                if let Some(b) = &m.body {
                    self.block(b);
                }
            }
            FunctionKind::Destructor => {
                let c = class.clone().expect("destructor class");
                self.set_vptrs(this_obj(self), &c, &m.loc);
                let epilogue = self.label();
                self.cur.epilogue = Some(epilogue);
                if let Some(b) = &m.body {
                    self.block(b);
                }
                self.place(epilogue);
                let end = m.body.as_ref().map(|b| b.end.clone()).unwrap_or_else(|| m.loc.clone());
                let ci = tp.class(&c).expect("class");
                for f in ci.fields.iter().rev() {
                    if self.needs_dtor(&f.ty).is_some() {
                        let off = self.lay.field_offset(&c, &f.name) as i64;
                        let lv = Self::member(this_obj(self), MemberKind::Field, &f.name, off, lower_ty(&f.ty));
                        self.destroy(lv, &f.ty, &end);
                    }
                }
                for b in ci.bases.iter().rev() {
                    let bty = TypeRepr::Class(b.clone());
                    if self.needs_dtor(&bty).is_some() {
                        let lv = self.base_member(this_obj(self), &c, b);
                        self.destroy(lv, &bty, &end);
                    }
                }
            }
            FunctionKind::Normal => {
                let b = m.body.as_ref().expect("defined function");
                self.block(b);
                let returns = matches!(b.stmts.last().map(|s| &s.kind), Some(StmtKind::Return(_)));
                if id == tp.entry && !returns {
                    self.emit(InstrKind::Return(Some(self.int_const(0))), &b.end);
                }
            }
        }
        self.cur.frames.pop();
        self.place(exit);
        let end_loc = m.body.as_ref().map(|b| b.end.clone()).unwrap_or_else(|| m.loc.clone());
        if id == tp.entry && self.opts.memory_leak_check {
            self.emit(
                InstrKind::Assert { cond: Expr::AllFreed, class: "memory leak".into(), comment: "dynamically allocated memory never freed".into() },
                &end_loc,
            );
        }
        self.emit(InstrKind::EndFunction, &end_loc);
        let mut f = self.finish(m.id.clone(), m.display().to_string(), params, ret, m.sig.throw_spec.clone(), exit);
        if let (FunctionKind::Normal, Some(c)) = (m.kind, &m.class) {
            f.call_name = format!("{c}::{}", m.name);
        }
        Ok(f)
    }

    /// Points every vptr of a `class` object at the class's own tables.
    fn set_vptrs(&mut self, obj: Expr, class: &str, loc: &SourceLocation) {
        let sets: Vec<(usize, u32)> = self.lay.vtables_of(class).map(|t| (t.vptr_offset, t.id)).collect();
        for (off, id) in sets {
            let lv = Self::member(obj.clone(), MemberKind::Vptr, "@vptr", off as i64, TypeRepr::Int(VPTR_BITS));
            self.assign(lv, Expr::Const { value: id as i64, ty: TypeRepr::Int(VPTR_BITS) }, loc);
        }
    }

    /// `thunk::O::m(I*)`: adjusts the receiver from `I` to `O` and forwards.
    fn lower_thunk(&mut self, k: usize) -> GotoFunction {
        let th = self.lay.thunks[k].clone();
        let target = self.tp.func(th.target);
        let owner = target.class.clone().expect("thunk target is a method");
        self.begin(target.locals.iter().map(|l| l.name.clone()));
        let loc = target.loc.clone();
        let this = self.add_var("this", Self::class_ptr(&th.receiver), true);
        let mut params = vec![this];
        for v in &target.params {
            let l = target.var(*v);
            params.push(self.add_var(&l.name, lower_ty(&l.ty), true));
        }
        let path = self.tp.base_path(&owner, &th.receiver).expect("receiver is a base");
        let off = self.lay.path_offset(self.tp, &path) as i64;
        let kind = if off == 0 { CastKind::Bitcast } else { CastKind::Offset(-off) };
        let mut args = vec![Expr::Cast { kind, arg: Box::new(self.sym(this)), ty: Self::class_ptr(&owner) }];
        args.extend(params[1..].iter().map(|p| self.sym(*p)));
        let exit = self.label();
        let ret = (*target.sig.ret).clone();
        let rv = self.result_var(&ret, &loc);
        let lhs = rv.map(|v| self.sym(v));
        self.emit(InstrKind::Call { lhs, func: target.id.clone(), args }, &loc);
        self.emit(InstrKind::Return(rv.map(|v| self.sym(v))), &loc);
        self.place(exit);
        self.emit(InstrKind::EndFunction, &loc);
        self.finish(th.name.clone(), th.name.clone(), params, lower_ty(&ret), target.sig.throw_spec.clone(), exit)
    }

    /// Entry point: global initialization followed by a call to `main`.
    fn lower_start(&mut self) -> Result<GotoFunction, LowerError> {
        let tp = self.tp;
        self.begin(std::iter::empty());
        self.cur.ret = TypeRepr::Void;
        for (i, g) in tp.globals.iter().enumerate() {
            if let Some(init) = &g.init {
                let s = self.sym(VarRef::Global(i as u32));
                self.init_into(s, &g.ty, init, &g.loc);
            }
        }
        let main = tp.func(tp.entry);
        let loc = main.loc.clone();
        self.emit(InstrKind::Call { lhs: None, func: main.id.clone(), args: vec![] }, &loc);
        let exit = self.label();
        self.place(exit);
        self.emit(InstrKind::EndFunction, &loc);
        Ok(self.finish(START.into(), START.into(), vec![], TypeRepr::Void, ThrowSpec::Unspecified, exit))
    }
}
