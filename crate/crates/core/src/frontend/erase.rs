//! Turns a typed program back into an untyped tree.
//!
//! Implicit members, conversions and temporaries are dropped; the type
//! checker recreates them. The same machinery renders typed expressions as
//! source text for assertion comments.

use super::ast as a;
use super::ast::{FunctionKind, UnOp};
use super::printer::expr_compact;
use super::typed as t;
use super::typed::{Conversion, CtorInit, Init};
use super::types::{SourceLocation, ThrowSpec, TypeRepr};

/// Rebuilds a source-level translation unit from a typed program.
pub fn erase(tp: &t::TypedProgram) -> a::TranslationUnit {
    let mut items = Vec::new();
    for c in &tp.classes {
        let span = a::Span(c.loc.clone());
        let bases = c.bases.iter().map(|b| a::BaseSpec { ty: named(b), access: None, is_virtual: false, span: span.clone() }).collect();
        let mut members = Vec::new();
        for f in &c.fields {
            let init = f.default_init.as_ref().map(|i| Eraser::new(&tp.functions, &[], false).initializer(i));
            members.push(a::Member::Field(a::VarDecl { ty: type_expr(&f.ty), name: f.name.clone(), init, span: a::Span(f.loc.clone()) }));
        }
        for m in &c.methods {
            let m = tp.func(*m);
            if m.implicit.is_none() {
                members.push(a::Member::Method(function(tp, m)));
            }
        }
        items.push(a::Item::Class(a::ClassDecl { key: a::ClassKey::Struct, name: c.name.clone(), bases, members, is_definition: true, span }));
    }
    for f in &tp.functions {
        if f.class.is_none() {
            items.push(a::Item::Function(function(tp, f)));
        }
    }
    for g in &tp.globals {
        let init = g.init.as_ref().map(|i| Eraser::new(&tp.functions, &[], false).initializer(i));
        items.push(a::Item::Global(a::VarDecl { ty: type_expr(&g.ty), name: g.name.clone(), init, span: a::Span(g.loc.clone()) }));
    }
    a::TranslationUnit { items }
}

/// Source text of a typed expression in the compact assertion style, with
/// friend-template instances shown unqualified (`foo<5678>(bring)`).
pub fn display_expr(funcs: &[t::MethodInfo], locals: &[t::LocalVar], e: &t::Expr) -> String {
    expr_compact(&Eraser::new(funcs, locals, true).expr(e))
}

fn function(tp: &t::TypedProgram, m: &t::MethodInfo) -> a::FunctionDecl {
    let er = Eraser::new(&tp.functions, &m.locals, false);
    let span = a::Span(m.loc.clone());
    let params = m
        .params
        .iter()
        .zip(&m.sig.params)
        .map(|(v, ty)| {
            let l = m.var(*v);
            let name = if l.name.starts_with("$param") { None } else { Some(base_name(&l.name).to_string()) };
            a::Param { ty: type_expr(ty), name, span: a::Span(l.loc.clone()) }
        })
        .collect();
    let name = match m.kind {
        FunctionKind::Destructor | FunctionKind::Constructor => m.class.clone().unwrap_or_default(),
        FunctionKind::Normal => m.name.clone(),
    };
    let init_list = m
        .inits
        .iter()
        .map(|ci| {
            let (name, init) = match ci {
                CtorInit::Base { class, init } => (named(class), init),
                CtorInit::Field { name, init } => (a::TypeExpr::named(name.clone(), span.clone()), init),
            };
            let (args, brace) = match er.initializer(init) {
                a::Initializer::Assign(e) => (vec![e], false),
                a::Initializer::Paren(v) => (v, false),
                a::Initializer::Brace(v) => (v, true),
            };
            a::MemInit { name, args, brace, span: span.clone() }
        })
        .collect();
    a::FunctionDecl {
        name,
        qualifier: None,
        kind: m.kind,
        ret: type_expr(&m.sig.ret),
        params,
        throw_spec: match &m.sig.throw_spec {
            ThrowSpec::Unspecified => a::ThrowSpecExpr::None,
            ThrowSpec::Noexcept => a::ThrowSpecExpr::Noexcept,
            ThrowSpec::Dynamic(tys) => a::ThrowSpecExpr::Dynamic(tys.iter().map(type_expr).collect()),
        },
        is_virtual: m.is_virtual,
        is_override: false,
        is_const: m.is_const,
        is_pure: m.is_pure,
        init_list,
        body: m.body.as_ref().map(|b| er.block(b)),
        span,
    }
}

fn base_name(n: &str) -> &str {
    n.split('$').next().unwrap_or(n)
}

fn builtin_span() -> a::Span {
    a::Span(SourceLocation::builtin())
}

fn named(n: &str) -> a::TypeExpr {
    a::TypeExpr::named(n.to_string(), builtin_span())
}

/// Source type for a resolved type.
pub fn type_expr(ty: &TypeRepr) -> a::TypeExpr {
    use a::BuiltinType as B;
    match ty {
        TypeRepr::Void => a::TypeExpr::Builtin(B::Void),
        TypeRepr::Bool => a::TypeExpr::Builtin(B::Bool),
        TypeRepr::Char => a::TypeExpr::Builtin(B::Char),
        TypeRepr::Int(_) | TypeRepr::NullPtr => a::TypeExpr::Builtin(B::Int),
        TypeRepr::Float(n) if n == "float" => a::TypeExpr::Builtin(B::Float),
        TypeRepr::Float(_) => a::TypeExpr::Builtin(B::Double),
        TypeRepr::Class(n) => named(n),
        TypeRepr::Pointer(i) => a::TypeExpr::Pointer(Box::new(type_expr(i))),
        TypeRepr::LRef(i) => a::TypeExpr::LRef(Box::new(type_expr(i))),
        TypeRepr::RRef(i) => a::TypeExpr::RRef(Box::new(type_expr(i))),
        TypeRepr::Array(e, n) => a::TypeExpr::Array(Box::new(type_expr(e)), n.map(|n| Box::new(a::Expr::new(a::ExprKind::Int(n), SourceLocation::builtin())))),
        TypeRepr::Function(f) => a::TypeExpr::Function { ret: Box::new(type_expr(&f.ret)), params: f.params.iter().map(type_expr).collect() },
        TypeRepr::Qualified(cv, i) => a::TypeExpr::Qualified(*cv, Box::new(type_expr(i))),
    }
}

struct Eraser<'a> {
    funcs: &'a [t::MethodInfo],
    locals: &'a [t::LocalVar],
    /// Rendering for humans: bare field names inside methods and short
    /// friend names.
    display: bool,
}

impl<'a> Eraser<'a> {
    fn new(funcs: &'a [t::MethodInfo], locals: &'a [t::LocalVar], display: bool) -> Self {
        Eraser { funcs, locals, display }
    }

    fn mk(&self, kind: a::ExprKind, loc: &SourceLocation) -> a::Expr {
        a::Expr::new(kind, loc.clone())
    }

    fn name(&self, n: &str, loc: &SourceLocation) -> a::Expr {
        self.mk(a::ExprKind::Name { name: n.to_string(), template_args: None }, loc)
    }

    fn func_name(&self, f: t::FuncId) -> String {
        let name = &self.funcs[f.0].name;
        if self.display {
            if let Some(i) = friend_split(name) {
                return name[i + 2..].to_string();
            }
        }
        name.clone()
    }

    fn block(&self, b: &t::Block) -> a::Block {
        a::Block { stmts: b.stmts.iter().map(|s| self.stmt(s)).collect(), span: a::Span(b.loc.clone()), end: a::Span(b.end.clone()) }
    }

    fn block_stmt(&self, b: &t::Block) -> Box<a::Stmt> {
        Box::new(a::Stmt { kind: a::StmtKind::Block(self.block(b)), span: a::Span(b.loc.clone()) })
    }

    fn var_decl(&self, var: t::VarId, init: Option<&Init>, loc: &SourceLocation) -> a::VarDecl {
        let l = &self.locals[var.0];
        a::VarDecl { ty: type_expr(&l.ty), name: base_name(&l.name).to_string(), init: init.map(|i| self.initializer(i)), span: a::Span(loc.clone()) }
    }

    fn stmt(&self, s: &t::Stmt) -> a::Stmt {
        let kind = match &s.kind {
            t::StmtKind::Decl { var, init, .. } => a::StmtKind::Decl(vec![self.var_decl(*var, init.as_ref(), &s.loc)]),
            t::StmtKind::Expr(e) => a::StmtKind::Expr(self.expr(e)),
            t::StmtKind::Assert { cond, .. } | t::StmtKind::Assume(cond) => {
                let f = if matches!(s.kind, t::StmtKind::Assert { .. }) { "assert" } else { "__ESBMC_assume" };
                let call = a::ExprKind::Call { callee: Box::new(self.name(f, &s.loc)), args: vec![self.expr(cond)] };
                a::StmtKind::Expr(self.mk(call, &s.loc))
            }
            t::StmtKind::If { cond, then, els } => {
                a::StmtKind::If { cond: self.expr(cond), then: self.block_stmt(then), els: els.as_ref().map(|b| self.block_stmt(b)) }
            }
            t::StmtKind::While { cond, body } => a::StmtKind::While { cond: self.expr(cond), body: self.block_stmt(body) },
            t::StmtKind::DoWhile { body, cond } => a::StmtKind::DoWhile { body: self.block_stmt(body), cond: self.expr(cond) },
            t::StmtKind::For { init, cond, step, body } => {
                let init = match init.as_slice() {
                    [] => None,
                    [one] => Some(Box::new(self.stmt(one))),
                    many => {
                        let decls = many
                            .iter()
                            .filter_map(|d| match &d.kind {
                                t::StmtKind::Decl { var, init, .. } => Some(self.var_decl(*var, init.as_ref(), &d.loc)),
                                _ => None,
                            })
                            .collect();
                        Some(Box::new(a::Stmt { kind: a::StmtKind::Decl(decls), span: a::Span(many[0].loc.clone()) }))
                    }
                };
                a::StmtKind::For { init, cond: cond.as_ref().map(|c| self.expr(c)), step: step.as_ref().map(|c| self.expr(c)), body: self.block_stmt(body) }
            }
            t::StmtKind::Return(v) => a::StmtKind::Return(v.as_ref().map(|i| self.init_expr(i, &s.loc))),
            t::StmtKind::Break => a::StmtKind::Break,
            t::StmtKind::Continue => a::StmtKind::Continue,
            t::StmtKind::Block(b) => a::StmtKind::Block(self.block(b)),
            t::StmtKind::Try { body, handlers } => a::StmtKind::Try {
                body: self.block(body),
                handlers: handlers
                    .iter()
                    .map(|h| a::Handler {
                        param: h.ty.as_ref().map(|ty| a::Param {
                            ty: type_expr(ty),
                            name: h.var.map(|v| base_name(&self.locals[v.0].name).to_string()),
                            span: a::Span(h.var.map_or(h.loc.clone(), |v| self.locals[v.0].loc.clone())),
                        }),
                        body: self.block(&h.body),
                        span: a::Span(h.loc.clone()),
                    })
                    .collect(),
            },
            t::StmtKind::Throw(e) => a::StmtKind::Throw(e.as_ref().map(|e| self.expr(e))),
            t::StmtKind::Delete { expr, array, .. } => a::StmtKind::Delete { expr: self.expr(expr), array: *array },
        };
        a::Stmt { kind, span: a::Span(s.loc.clone()) }
    }

    fn initializer(&self, i: &Init) -> a::Initializer {
        match i {
            Init::Expr(e) | Init::BindRef(e) => a::Initializer::Assign(self.expr(e)),
            Init::Ctor { args, .. } => a::Initializer::Paren(self.args(args)),
            Init::Aggregate(items) => a::Initializer::Brace(self.args(items)),
            Init::Zero => a::Initializer::Brace(vec![]),
        }
    }

    fn args(&self, args: &[Init]) -> Vec<a::Expr> {
        args.iter().map(|i| self.init_expr(i, &SourceLocation::builtin())).collect()
    }

    /// An initializer written as a single expression (argument, return value).
    fn init_expr(&self, i: &Init, loc: &SourceLocation) -> a::Expr {
        match i {
            Init::Expr(e) | Init::BindRef(e) => self.expr(e),
            Init::Ctor { args, .. } if args.len() == 1 => self.init_expr(&args[0], loc),
            Init::Ctor { func, args } => {
                let class = self.funcs[func.0].class.clone().unwrap_or_default();
                self.mk(a::ExprKind::Construct { ty: named(&class), args: self.args(args), brace: false }, loc)
            }
            Init::Aggregate(items) => self.mk(a::ExprKind::InitList(self.args(items)), loc),
            Init::Zero => self.mk(a::ExprKind::InitList(vec![]), loc),
        }
    }

    /// Drops the implicit parts of an object expression.
    fn strip<'e>(&self, mut e: &'e t::Expr) -> &'e t::Expr {
        loop {
            match &e.kind {
                t::ExprKind::BaseSub { obj, .. } | t::ExprKind::Materialize(obj) => e = obj,
                _ => return e,
            }
        }
    }

    /// `obj.name` or `p->name`; inside methods in display mode `this->` is
    /// left out.
    fn member(&self, obj: &t::Expr, name: &str, loc: &SourceLocation) -> a::Expr {
        let obj = self.strip(obj);
        if let t::ExprKind::Deref(p) = &obj.kind {
            if self.display && matches!(p.kind, t::ExprKind::This) {
                return self.name(name, loc);
            }
            return self.mk(a::ExprKind::Member { base: Box::new(self.expr(p)), arrow: true, name: name.to_string() }, loc);
        }
        self.mk(a::ExprKind::Member { base: Box::new(self.expr(obj)), arrow: false, name: name.to_string() }, loc)
    }

    fn expr(&self, e: &t::Expr) -> a::Expr {
        let loc = &e.loc;
        let bx = |x: &t::Expr| Box::new(self.expr(x));
        let kind = match &e.kind {
            t::ExprKind::Int(v) => {
                if matches!(e.ty.strip_cv(), TypeRepr::Char) {
                    a::ExprKind::Char(*v as i8 as u8)
                } else if *v < 0 {
                    a::ExprKind::Unary(UnOp::Neg, Box::new(self.mk(a::ExprKind::Int(v.unsigned_abs()), loc)))
                } else {
                    a::ExprKind::Int(*v as u64)
                }
            }
            t::ExprKind::Bool(b) => a::ExprKind::Bool(*b),
            t::ExprKind::Null => a::ExprKind::Null,
            t::ExprKind::Local(v) => return self.name(base_name(&self.locals[v.0].name), loc),
            t::ExprKind::Global(g) => return self.name(g, loc),
            t::ExprKind::This => a::ExprKind::This,
            t::ExprKind::Field { obj, field, .. } => return self.member(obj, field, loc),
            t::ExprKind::BaseSub { obj, .. } | t::ExprKind::Materialize(obj) => return self.expr(obj),
            t::ExprKind::DerivedSub { obj, derived } => a::ExprKind::StaticCast(a::TypeExpr::LRef(Box::new(named(derived))), bx(obj)),
            t::ExprKind::Deref(p) => a::ExprKind::Unary(UnOp::Deref, bx(p)),
            t::ExprKind::AddrOf(x) => a::ExprKind::Unary(UnOp::AddrOf, bx(x)),
            t::ExprKind::Unary(op, x) | t::ExprKind::IncDec(op, x) => a::ExprKind::Unary(*op, bx(x)),
            t::ExprKind::Binary(op, x, y) => a::ExprKind::Binary(*op, bx(x), bx(y)),
            t::ExprKind::PtrAdd { ptr, offset, negate } => {
                let op = if *negate { a::BinOp::Sub } else { a::BinOp::Add };
                a::ExprKind::Binary(op, bx(ptr), bx(offset))
            }
            t::ExprKind::Assign(x, y) => a::ExprKind::Assign(None, bx(x), bx(y)),
            t::ExprKind::CompoundAssign(op, x, y) => a::ExprKind::Assign(Some(*op), bx(x), bx(y)),
            t::ExprKind::Cond(c, x, y) => a::ExprKind::Cond(bx(c), bx(x), bx(y)),
            t::ExprKind::Convert(conv, x) => match conv {
                Conversion::PtrDowncast(_) => a::ExprKind::StaticCast(type_expr(&e.ty), bx(x)),
                Conversion::PtrBitcast if x.ty.pointee().is_some_and(|p| p.is_void()) && !self.display => a::ExprKind::StaticCast(type_expr(&e.ty), bx(x)),
                _ => return self.expr(x),
            },
            t::ExprKind::Call { func, args } => a::ExprKind::Call { callee: Box::new(self.name(&self.func_name(*func), loc)), args: self.args(args) },
            t::ExprKind::MethodCall { func, recv, args, is_virtual } => {
                let m = &self.funcs[func.0];
                let callee = if m.is_virtual && !is_virtual {
                    self.name(&format!("{}::{}", m.class.as_deref().unwrap_or_default(), m.name), loc)
                } else {
                    self.member(recv, &m.name, loc)
                };
                a::ExprKind::Call { callee: Box::new(callee), args: self.args(args) }
            }
            t::ExprKind::PtrCall { callee, args } => a::ExprKind::Call { callee: bx(callee), args: self.args(args) },
            t::ExprKind::FuncRef(f) => return self.name(&self.func_name(*f), loc),
            t::ExprKind::New { elem, count, init } => {
                let (args, brace) = match init.as_deref() {
                    _ if count.is_some() => (None, false),
                    None => (None, false),
                    Some(Init::Zero) => (Some(vec![]), false),
                    Some(Init::Aggregate(items)) => (Some(self.args(items)), true),
                    Some(Init::Ctor { args, .. }) => (Some(self.args(args)), false),
                    Some(i) => (Some(vec![self.init_expr(i, loc)]), false),
                };
                a::ExprKind::New { ty: type_expr(elem), args, brace, array_len: count.as_ref().map(|c| bx(c)) }
            }
            t::ExprKind::Move(x) => a::ExprKind::Move(bx(x)),
            t::ExprKind::Temp(init) => match &**init {
                Init::Aggregate(items) => a::ExprKind::Construct { ty: type_expr(&e.ty), args: self.args(items), brace: true },
                Init::Ctor { args, .. } => a::ExprKind::Construct { ty: type_expr(&e.ty), args: self.args(args), brace: false },
                other => return self.init_expr(other, loc),
            },
            t::ExprKind::Nondet(n) => {
                let f = match n {
                    t::Nondet::Int => "nondet_int",
                    t::Nondet::Bool => "nondet_bool",
                    t::Nondet::Char => "nondet_char",
                };
                a::ExprKind::Call { callee: Box::new(self.name(f, loc)), args: vec![] }
            }
        };
        self.mk(kind, loc)
    }
}

/// Byte index of the `::` separating an enclosing template instance from a
/// friend name (`X<1234>::foo<5678>`), if any.
pub fn friend_split(name: &str) -> Option<usize> {
    let b = name.as_bytes();
    let mut depth = 0i32;
    for i in 0..b.len() {
        match b[i] {
            b'<' => depth += 1,
            b'>' => depth -= 1,
            b':' if depth == 0 && i > 0 && b[i - 1] == b'>' && b.get(i + 1) == Some(&b':') => return Some(i),
            _ => {}
        }
    }
    None
}
