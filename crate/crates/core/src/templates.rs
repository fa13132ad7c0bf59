//! Template collection and monomorphization.
//!
//! Instantiation is demand driven: every template-id found in non-template
//! code (or in an instance being resolved) is turned into a mangled name such
//! as `X<1234>`, and each new (template, arguments) pair is stamped exactly
//! once and queued. Queued instances are then scanned for further demands.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;

use crate::frontend::ast::*;
use crate::frontend::types::{Cv, SourceLocation};
use crate::frontend::{FrontendError, Phase};

/// Default cap on the instantiation depth.
pub const DEFAULT_MAX_DEPTH: usize = 128;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TemplateDecl {
    pub name: String,
    pub params: Vec<TemplateParam>,
    pub body: Item,
    /// Class template that declares this template as a friend.
    pub enclosing: Option<String>,
    pub span: Span,
}

impl TemplateDecl {
    pub fn is_class(&self) -> bool {
        matches!(self.body, Item::Class(_))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TemplateSet {
    pub decls: Vec<TemplateDecl>,
}

impl TemplateSet {
    pub fn get(&self, name: &str) -> Option<&TemplateDecl> {
        self.decls.iter().find(|d| d.name == name)
    }

    pub fn is_empty(&self) -> bool {
        self.decls.is_empty()
    }

    pub fn len(&self) -> usize {
        self.decls.len()
    }
}

/// A resolved template argument.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum InstArg {
    Type(TypeExpr),
    Int(i64),
}

impl fmt::Display for InstArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InstArg::Type(t) => f.write_str(&canonical_type(t)),
            InstArg::Int(v) => write!(f, "{v}"),
        }
    }
}

impl std::hash::Hash for TypeExpr {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        canonical_type(self).hash(state);
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instantiation {
    pub template: String,
    pub args: Vec<InstArg>,
    /// Mangled name of the enclosing class instance, for friend templates.
    pub enclosing: Option<String>,
    pub mangled: String,
    pub depth: usize,
}

/// Canonical spelling of a template argument type: `int`, `const int*`,
/// `X<3>*`.
pub fn canonical_type(t: &TypeExpr) -> String {
    match t {
        TypeExpr::Builtin(b) => b.keyword().to_string(),
        TypeExpr::Named { name, args: None, .. } => name.clone(),
        TypeExpr::Named { name, args: Some(args), .. } => {
            let parts: Vec<String> = args
                .iter()
                .map(|a| match a {
                    TemplateArg::Type(t) => canonical_type(t),
                    TemplateArg::Value(e) => match const_eval(e) {
                        Some(v) => v.to_string(),
                        None => crate::frontend::printer::expr_compact(e),
                    },
                })
                .collect();
            mangle(name, &parts)
        }
        TypeExpr::Pointer(inner) => format!("{}*", canonical_type(inner)),
        TypeExpr::LRef(inner) => format!("{}&", canonical_type(inner)),
        TypeExpr::RRef(inner) => format!("{}&&", canonical_type(inner)),
        TypeExpr::Qualified(cv, inner) => {
            let q = match (cv.is_const, cv.is_volatile) {
                (true, true) => "const volatile",
                (true, false) => "const",
                (false, true) => "volatile",
                (false, false) => "",
            };
            match &**inner {
                TypeExpr::Pointer(_) => format!("{} {q}", canonical_type(inner)),
                _ => format!("{q} {}", canonical_type(inner)),
            }
        }
        TypeExpr::Array(elem, n) => {
            let n = n.as_ref().and_then(|e| const_eval(e)).map(|v| v.to_string()).unwrap_or_default();
            format!("{}[{n}]", canonical_type(elem))
        }
        TypeExpr::Function { ret, params } => {
            let ps: Vec<String> = params.iter().map(canonical_type).collect();
            format!("{}({})", canonical_type(ret), ps.join(","))
        }
    }
}

fn mangle(name: &str, args: &[String]) -> String {
    format!("{name}<{}>", args.join(","))
}

/// Evaluates an integer constant expression built from literals.
pub fn const_eval(e: &Expr) -> Option<i64> {
    Some(match &e.kind {
        ExprKind::Int(v) => i64::try_from(*v).ok()?,
        ExprKind::Char(c) => *c as i8 as i64,
        ExprKind::Bool(b) => *b as i64,
        ExprKind::Unary(op, x) => {
            let v = const_eval(x)?;
            match op {
                UnOp::Neg => v.checked_neg()?,
                UnOp::Plus => v,
                UnOp::Not => (v == 0) as i64,
                UnOp::BitNot => !v,
                _ => return None,
            }
        }
        ExprKind::Binary(op, a, b) => {
            let (a, b) = (const_eval(a)?, const_eval(b)?);
            match op {
                BinOp::Add => a.checked_add(b)?,
                BinOp::Sub => a.checked_sub(b)?,
                BinOp::Mul => a.checked_mul(b)?,
                BinOp::Shl => a.checked_shl(u32::try_from(b).ok()?)?,
                BinOp::Shr => a.checked_shr(u32::try_from(b).ok()?)?,
                BinOp::Lt => (a < b) as i64,
                BinOp::Le => (a <= b) as i64,
                BinOp::Gt => (a > b) as i64,
                BinOp::Ge => (a >= b) as i64,
                BinOp::Eq => (a == b) as i64,
                BinOp::Ne => (a != b) as i64,
                BinOp::BitAnd => a & b,
                BinOp::BitXor => a ^ b,
                BinOp::BitOr => a | b,
                BinOp::And => (a != 0 && b != 0) as i64,
                BinOp::Or => (a != 0 || b != 0) as i64,
            }
        }
        ExprKind::Cond(c, a, b) => {
            if const_eval(c)? != 0 {
                const_eval(a)?
            } else {
                const_eval(b)?
            }
        }
        _ => return None,
    })
}

fn err(phase: Phase, msg: impl Into<String>, span: &Span) -> FrontendError {
    FrontendError::new(phase, msg, span.0.clone())
}

// ---------------------------------------------------------------- collection

/// Removes every template declaration from `tu`, returning them together with
/// the template-free residual. Friend function templates are recorded with
/// their enclosing class template. Non-template friend functions of ordinary
/// classes are hoisted to namespace scope.
pub fn collect_templates(tu: &TranslationUnit) -> Result<(TemplateSet, TranslationUnit), FrontendError> {
    let mut set = TemplateSet::default();
    let mut residual = Vec::new();
    for item in &tu.items {
        match item {
            Item::Template(t) => collect_one(t, &[], None, &mut set)?,
            Item::Class(c) => {
                let mut c = c.clone();
                let mut hoisted = Vec::new();
                strip_friends(&mut c, &[], None, &mut set, &mut hoisted)?;
                residual.push(Item::Class(c));
                residual.extend(hoisted);
            }
            other => residual.push(other.clone()),
        }
    }
    let mut seen = HashSet::new();
    for d in &set.decls {
        if !seen.insert(d.name.clone()) {
            return Err(err(Phase::Template, format!("template '{}' is declared more than once", d.name), &d.span));
        }
    }
    Ok((set, TranslationUnit { items: residual }))
}

fn check_shadowing(params: &[TemplateParam], outer: &[TemplateParam]) -> Result<(), FrontendError> {
    for p in params {
        if outer.iter().any(|o| o.name == p.name) {
            return Err(err(Phase::Template, format!("template parameter '{}' shadows an outer template parameter", p.name), &p.span));
        }
    }
    Ok(())
}

fn collect_one(t: &TemplateItem, outer: &[TemplateParam], enclosing: Option<&str>, set: &mut TemplateSet) -> Result<(), FrontendError> {
    check_shadowing(&t.params, outer)?;
    let mut scope = outer.to_vec();
    scope.extend(t.params.iter().cloned());
    match &*t.item {
        Item::Class(c) => {
            let mut c = c.clone();
            let mut hoisted = Vec::new();
            let cname = c.name.clone();
            strip_friends(&mut c, &scope, Some(&cname), set, &mut hoisted)?;
            // friends of a class template are instantiated with the class
            for h in hoisted {
                let Item::Function(f) = h else { unreachable!() };
                c.members.push(Member::Friend(Box::new(Item::Function(f))));
            }
            set.decls.push(TemplateDecl {
                name: c.name.clone(),
                params: t.params.clone(),
                body: Item::Class(c),
                enclosing: enclosing.map(str::to_string),
                span: t.span.clone(),
            });
        }
        Item::Function(f) => set.decls.push(TemplateDecl {
            name: f.name.clone(),
            params: t.params.clone(),
            body: Item::Function(f.clone()),
            enclosing: enclosing.map(str::to_string),
            span: t.span.clone(),
        }),
        Item::Template(inner) => {
            check_shadowing(&inner.params, &scope)?;
            return Err(err(Phase::Template, "nested template declarations are not supported", &inner.span));
        }
        Item::Global(_) => return Err(err(Phase::Template, "variable templates are not supported", &t.span)),
    }
    Ok(())
}

/// Moves friend templates of `c` into `set` and plain friend functions into
/// `hoisted`.
fn strip_friends(
    c: &mut ClassDecl,
    scope: &[TemplateParam],
    enclosing: Option<&str>,
    set: &mut TemplateSet,
    hoisted: &mut Vec<Item>,
) -> Result<(), FrontendError> {
    let mut kept = Vec::new();
    for m in std::mem::take(&mut c.members) {
        match m {
            Member::Friend(item) => match *item {
                Item::Template(t) => collect_one(&t, scope, enclosing, set)?,
                Item::Function(f) => hoisted.push(Item::Function(f)),
                other => hoisted.push(other),
            },
            other => kept.push(other),
        }
    }
    c.members = kept;
    Ok(())
}

// ------------------------------------------------------------ substitution

#[derive(Clone, Debug, Default)]
struct Bindings {
    map: HashMap<String, InstArg>,
    /// Injected class names: template name -> instance name.
    injected: Vec<(String, String)>,
}

fn int_expr(v: i64, span: &Span) -> Expr {
    if v < 0 {
        Expr::new(ExprKind::Unary(UnOp::Neg, Box::new(Expr::new(ExprKind::Int(v.unsigned_abs()), span.0.clone()))), span.0.clone())
    } else {
        Expr::new(ExprKind::Int(v as u64), span.0.clone())
    }
}

struct Subst<'a> {
    b: &'a Bindings,
}

impl Subst<'_> {
    fn ty(&self, t: &TypeExpr) -> TypeExpr {
        match t {
            TypeExpr::Builtin(_) => t.clone(),
            TypeExpr::Named { name, args, span } => {
                if args.is_none() {
                    if let Some(InstArg::Type(bound)) = self.b.map.get(name) {
                        return bound.clone();
                    }
                    if let Some((_, inst)) = self.b.injected.iter().find(|(t, _)| t == name) {
                        return TypeExpr::Named { name: inst.clone(), args: None, span: span.clone() };
                    }
                }
                TypeExpr::Named { name: name.clone(), args: args.as_ref().map(|a| a.iter().map(|a| self.targ(a)).collect()), span: span.clone() }
            }
            TypeExpr::Pointer(i) => TypeExpr::Pointer(Box::new(self.ty(i))),
            TypeExpr::LRef(i) => TypeExpr::LRef(Box::new(self.ty(i))),
            TypeExpr::RRef(i) => TypeExpr::RRef(Box::new(self.ty(i))),
            TypeExpr::Array(e, n) => TypeExpr::Array(Box::new(self.ty(e)), n.as_ref().map(|n| Box::new(self.expr(n)))),
            TypeExpr::Function { ret, params } => TypeExpr::Function { ret: Box::new(self.ty(ret)), params: params.iter().map(|p| self.ty(p)).collect() },
            TypeExpr::Qualified(cv, i) => match self.ty(i) {
                TypeExpr::Qualified(cv2, inner) => TypeExpr::Qualified(cv.union(cv2), inner),
                other => TypeExpr::Qualified(*cv, Box::new(other)),
            },
        }
    }

    fn targ(&self, a: &TemplateArg) -> TemplateArg {
        match a {
            TemplateArg::Type(t) => {
                // a bare name parsed as a type may be an int parameter
                if let TypeExpr::Named { name, args: None, span } = t {
                    if let Some(InstArg::Int(v)) = self.b.map.get(name) {
                        return TemplateArg::Value(int_expr(*v, span));
                    }
                }
                TemplateArg::Type(self.ty(t))
            }
            TemplateArg::Value(e) => TemplateArg::Value(self.expr(e)),
        }
    }

    fn exprs(&self, es: &[Expr]) -> Vec<Expr> {
        es.iter().map(|e| self.expr(e)).collect()
    }

    fn expr(&self, e: &Expr) -> Expr {
        let kind = match &e.kind {
            ExprKind::Name { name, template_args } => {
                if template_args.is_none() {
                    if let Some(InstArg::Int(v)) = self.b.map.get(name) {
                        return int_expr(*v, &e.span);
                    }
                }
                ExprKind::Name { name: name.clone(), template_args: template_args.as_ref().map(|a| a.iter().map(|a| self.targ(a)).collect()) }
            }
            ExprKind::Unary(op, x) => ExprKind::Unary(*op, Box::new(self.expr(x))),
            ExprKind::Binary(op, a, b) => ExprKind::Binary(*op, Box::new(self.expr(a)), Box::new(self.expr(b))),
            ExprKind::Assign(op, a, b) => ExprKind::Assign(*op, Box::new(self.expr(a)), Box::new(self.expr(b))),
            ExprKind::Cond(c, a, b) => ExprKind::Cond(Box::new(self.expr(c)), Box::new(self.expr(a)), Box::new(self.expr(b))),
            ExprKind::Call { callee, args } => ExprKind::Call { callee: Box::new(self.expr(callee)), args: self.exprs(args) },
            ExprKind::Member { base, arrow, name } => ExprKind::Member { base: Box::new(self.expr(base)), arrow: *arrow, name: name.clone() },
            ExprKind::Index(a, i) => ExprKind::Index(Box::new(self.expr(a)), Box::new(self.expr(i))),
            ExprKind::New { ty, args, brace, array_len } => ExprKind::New {
                ty: self.ty(ty),
                args: args.as_ref().map(|a| self.exprs(a)),
                brace: *brace,
                array_len: array_len.as_ref().map(|n| Box::new(self.expr(n))),
            },
            ExprKind::Move(x) => ExprKind::Move(Box::new(self.expr(x))),
            ExprKind::Construct { ty, args, brace } => ExprKind::Construct { ty: self.ty(ty), args: self.exprs(args), brace: *brace },
            ExprKind::StaticCast(t, x) => ExprKind::StaticCast(self.ty(t), Box::new(self.expr(x))),
            ExprKind::InitList(xs) => ExprKind::InitList(self.exprs(xs)),
            k => k.clone(),
        };
        Expr { kind, span: e.span.clone() }
    }

    fn init(&self, i: &Initializer) -> Initializer {
        match i {
            Initializer::Assign(e) => Initializer::Assign(self.expr(e)),
            Initializer::Paren(a) => Initializer::Paren(self.exprs(a)),
            Initializer::Brace(a) => Initializer::Brace(self.exprs(a)),
        }
    }

    fn var(&self, v: &VarDecl) -> VarDecl {
        VarDecl { ty: self.ty(&v.ty), name: v.name.clone(), init: v.init.as_ref().map(|i| self.init(i)), span: v.span.clone() }
    }

    fn block(&self, b: &Block) -> Block {
        Block { stmts: b.stmts.iter().map(|s| self.stmt(s)).collect(), span: b.span.clone(), end: b.end.clone() }
    }

    fn param(&self, p: &Param) -> Param {
        Param { ty: self.ty(&p.ty), name: p.name.clone(), span: p.span.clone() }
    }

    fn stmt(&self, s: &Stmt) -> Stmt {
        let kind = match &s.kind {
            StmtKind::Decl(ds) => StmtKind::Decl(ds.iter().map(|d| self.var(d)).collect()),
            StmtKind::Expr(e) => StmtKind::Expr(self.expr(e)),
            StmtKind::If { cond, then, els } => {
                StmtKind::If { cond: self.expr(cond), then: Box::new(self.stmt(then)), els: els.as_ref().map(|e| Box::new(self.stmt(e))) }
            }
            StmtKind::While { cond, body } => StmtKind::While { cond: self.expr(cond), body: Box::new(self.stmt(body)) },
            StmtKind::DoWhile { body, cond } => StmtKind::DoWhile { body: Box::new(self.stmt(body)), cond: self.expr(cond) },
            StmtKind::For { init, cond, step, body } => StmtKind::For {
                init: init.as_ref().map(|i| Box::new(self.stmt(i))),
                cond: cond.as_ref().map(|c| self.expr(c)),
                step: step.as_ref().map(|c| self.expr(c)),
                body: Box::new(self.stmt(body)),
            },
            StmtKind::Return(e) => StmtKind::Return(e.as_ref().map(|e| self.expr(e))),
            StmtKind::Block(b) => StmtKind::Block(self.block(b)),
            StmtKind::Try { body, handlers } => StmtKind::Try {
                body: self.block(body),
                handlers: handlers
                    .iter()
                    .map(|h| Handler { param: h.param.as_ref().map(|p| self.param(p)), body: self.block(&h.body), span: h.span.clone() })
                    .collect(),
            },
            StmtKind::Throw(e) => StmtKind::Throw(e.as_ref().map(|e| self.expr(e))),
            StmtKind::Delete { expr, array } => StmtKind::Delete { expr: self.expr(expr), array: *array },
            k => k.clone(),
        };
        Stmt { kind, span: s.span.clone() }
    }

    fn throw_spec(&self, t: &ThrowSpecExpr) -> ThrowSpecExpr {
        match t {
            ThrowSpecExpr::Dynamic(ts) => ThrowSpecExpr::Dynamic(ts.iter().map(|t| self.ty(t)).collect()),
            other => other.clone(),
        }
    }

    fn function(&self, f: &FunctionDecl) -> FunctionDecl {
        FunctionDecl {
            name: f.name.clone(),
            qualifier: f.qualifier.clone(),
            kind: f.kind,
            ret: self.ty(&f.ret),
            params: f.params.iter().map(|p| self.param(p)).collect(),
            throw_spec: self.throw_spec(&f.throw_spec),
            is_virtual: f.is_virtual,
            is_override: f.is_override,
            is_const: f.is_const,
            is_pure: f.is_pure,
            init_list: f
                .init_list
                .iter()
                .map(|m| MemInit { name: self.ty(&m.name), args: self.exprs(&m.args), brace: m.brace, span: m.span.clone() })
                .collect(),
            body: f.body.as_ref().map(|b| self.block(b)),
            span: f.span.clone(),
        }
    }

    fn class(&self, c: &ClassDecl, new_name: &str) -> ClassDecl {
        let members = c
            .members
            .iter()
            .map(|m| match m {
                Member::Access(a, s) => Member::Access(*a, s.clone()),
                Member::Field(v) => Member::Field(self.var(v)),
                Member::Method(f) => {
                    let mut f = self.function(f);
                    if f.kind != FunctionKind::Normal {
                        f.name = new_name.to_string();
                    }
                    Member::Method(f)
                }
                Member::Friend(item) => match &**item {
                    Item::Function(f) => Member::Friend(Box::new(Item::Function(self.function(f)))),
                    other => Member::Friend(Box::new(other.clone())),
                },
            })
            .collect();
        ClassDecl {
            key: c.key,
            name: new_name.to_string(),
            bases: c.bases.iter().map(|b| BaseSpec { ty: self.ty(&b.ty), access: b.access, is_virtual: b.is_virtual, span: b.span.clone() }).collect(),
            members,
            is_definition: c.is_definition,
            span: c.span.clone(),
        }
    }
}

// ---------------------------------------------------------- instantiation

#[derive(Clone, Debug, Default)]
struct ClassShape {
    bases: Vec<String>,
    fields: HashMap<String, TypeExpr>,
    methods: HashMap<String, TypeExpr>,
}

/// Where an instance came from, for matching parameter patterns.
#[derive(Clone, Debug)]
struct InstanceOrigin {
    template: String,
    args: Vec<InstArg>,
}

struct Instantiator<'a> {
    set: &'a TemplateSet,
    max_depth: usize,
    instances: Vec<Instantiation>,
    by_name: HashMap<String, usize>,
    /// Stamped (substituted, not yet resolved) items per instance.
    stamped: Vec<Option<Item>>,
    resolved: Vec<Option<Item>>,
    worklist: VecDeque<usize>,
    classes: HashMap<String, ClassShape>,
    origins: HashMap<String, InstanceOrigin>,
    functions: HashMap<String, TypeExpr>,
    globals: HashMap<String, TypeExpr>,
}

/// Local typing context while resolving a function body.
#[derive(Default)]
struct Scope {
    frames: Vec<HashMap<String, TypeExpr>>,
    class: Option<String>,
}

impl Scope {
    fn lookup(&self, name: &str) -> Option<&TypeExpr> {
        self.frames.iter().rev().find_map(|f| f.get(name))
    }

    fn declare(&mut self, name: &str, ty: TypeExpr) {
        if let Some(f) = self.frames.last_mut() {
            f.insert(name.to_string(), ty);
        }
    }
}

fn strip_ref_cv(t: &TypeExpr) -> TypeExpr {
    let t = match t {
        TypeExpr::LRef(i) | TypeExpr::RRef(i) => &**i,
        t => t,
    };
    let t = t.strip_cv().clone();
    match t {
        TypeExpr::Array(e, _) => TypeExpr::Pointer(e),
        other => other,
    }
}

fn mentions(t: &TypeExpr, name: &str) -> bool {
    match t {
        TypeExpr::Builtin(_) => false,
        TypeExpr::Named { name: n, args, .. } => {
            n == name
                || args.as_ref().is_some_and(|a| {
                    a.iter().any(|a| match a {
                        TemplateArg::Type(t) => mentions(t, name),
                        TemplateArg::Value(e) => expr_mentions(e, name),
                    })
                })
        }
        TypeExpr::Pointer(i) | TypeExpr::LRef(i) | TypeExpr::RRef(i) | TypeExpr::Qualified(_, i) => mentions(i, name),
        TypeExpr::Array(e, _) => mentions(e, name),
        TypeExpr::Function { ret, params } => mentions(ret, name) || params.iter().any(|p| mentions(p, name)),
    }
}

fn expr_mentions(e: &Expr, name: &str) -> bool {
    matches!(&e.kind, ExprKind::Name { name: n, .. } if n == name)
}

impl<'a> Instantiator<'a> {
    fn register_class(&mut self, c: &ClassDecl) {
        let mut shape = ClassShape::default();
        for b in &c.bases {
            if let TypeExpr::Named { name, .. } = b.ty.strip_cv() {
                shape.bases.push(name.clone());
            }
        }
        for m in &c.members {
            match m {
                Member::Field(v) => {
                    shape.fields.insert(v.name.clone(), v.ty.clone());
                }
                Member::Method(f) if f.kind == FunctionKind::Normal => {
                    shape.methods.entry(f.name.clone()).or_insert_with(|| f.ret.clone());
                }
                _ => {}
            }
        }
        self.classes.insert(c.name.clone(), shape);
    }

    fn register_item(&mut self, item: &Item) {
        match item {
            Item::Class(c) => self.register_class(c),
            Item::Function(f) if f.qualifier.is_none() => {
                self.functions.entry(f.name.clone()).or_insert_with(|| f.ret.clone());
            }
            Item::Global(v) => {
                self.globals.insert(v.name.clone(), v.ty.clone());
            }
            _ => {}
        }
    }

    fn member_type(&self, class: &str, name: &str, methods: bool) -> Option<TypeExpr> {
        let shape = self.classes.get(class)?;
        let own = if methods { shape.methods.get(name) } else { shape.fields.get(name) };
        if let Some(t) = own {
            return Some(t.clone());
        }
        shape.bases.iter().find_map(|b| self.member_type(b, name, methods))
    }

    /// Records a demand for `template<args>` and returns the mangled name.
    fn demand(
        &mut self,
        template: &str,
        args: Vec<InstArg>,
        enclosing: Option<(String, Vec<InstArg>)>,
        depth: usize,
        span: &Span,
    ) -> Result<String, FrontendError> {
        let decl = self.set.get(template).ok_or_else(|| err(Phase::Template, format!("unknown template '{template}'"), span))?;
        if args.len() != decl.params.len() {
            return Err(err(Phase::Template, format!("template '{template}' expects {} argument(s), got {}", decl.params.len(), args.len()), span));
        }
        for (p, a) in decl.params.iter().zip(&args) {
            let ok = matches!((p.kind, a), (TemplateParamKind::Type, InstArg::Type(_)) | (TemplateParamKind::Int, InstArg::Int(_)));
            if !ok {
                return Err(err(Phase::Template, format!("argument kind mismatch for template parameter '{}' of '{template}'", p.name), span));
            }
        }
        let rendered: Vec<String> = args.iter().map(|a| a.to_string()).collect();
        let mut mangled = mangle(template, &rendered);
        if let Some((enc, _)) = &enclosing {
            mangled = format!("{enc}::{mangled}");
        }
        if self.by_name.contains_key(&mangled) {
            return Ok(mangled);
        }
        if depth > self.max_depth {
            return Err(err(Phase::Template, format!("template recursion limit ({}) exceeded while instantiating '{mangled}'", self.max_depth), span));
        }
        let mut b = Bindings::default();
        for (p, a) in decl.params.iter().zip(&args) {
            b.map.insert(p.name.clone(), a.clone());
        }
        if let Some((enc_name, enc_args)) = &enclosing {
            let enc_decl = self.set.get(&decl.enclosing.clone().unwrap_or_default()).expect("enclosing template exists");
            for (p, a) in enc_decl.params.iter().zip(enc_args) {
                b.map.insert(p.name.clone(), a.clone());
            }
            b.injected.push((enc_decl.name.clone(), enc_name.clone()));
        }
        let stamped = match &decl.body {
            Item::Class(c) => {
                b.injected.push((c.name.clone(), mangled.clone()));
                let c = Subst { b: &b }.class(c, &mangled);
                self.register_class(&c);
                self.origins.insert(mangled.clone(), InstanceOrigin { template: template.to_string(), args: args.clone() });
                Item::Class(c)
            }
            Item::Function(f) => {
                let mut f = Subst { b: &b }.function(f);
                f.name = mangled.clone();
                self.functions.insert(mangled.clone(), f.ret.clone());
                Item::Function(f)
            }
            _ => unreachable!("templates are classes or functions"),
        };
        let idx = self.instances.len();
        self.instances.push(Instantiation { template: template.to_string(), args, enclosing: enclosing.map(|e| e.0), mangled: mangled.clone(), depth });
        self.by_name.insert(mangled.clone(), idx);
        self.stamped.push(Some(stamped));
        self.resolved.push(None);
        self.worklist.push_back(idx);
        Ok(mangled)
    }

    fn inst_args(&mut self, args: &[TemplateArg], depth: usize, scope: &mut Scope) -> Result<Vec<InstArg>, FrontendError> {
        let mut out = Vec::new();
        for a in args {
            out.push(match a {
                TemplateArg::Type(t) => {
                    let t = self.ty(t, depth, scope)?;
                    InstArg::Type(t)
                }
                TemplateArg::Value(e) => {
                    let v = const_eval(e).ok_or_else(|| err(Phase::Template, "template argument is not an integer constant", &e.span))?;
                    InstArg::Int(v)
                }
            });
        }
        Ok(out)
    }

    // ---- resolution (rewrites template-ids to mangled names)

    fn ty(&mut self, t: &TypeExpr, depth: usize, scope: &mut Scope) -> Result<TypeExpr, FrontendError> {
        Ok(match t {
            TypeExpr::Builtin(_) => t.clone(),
            TypeExpr::Named { name, args, span } => match args {
                Some(args) => {
                    if self.set.get(name).is_none_or(|d| !d.is_class()) {
                        return Err(err(Phase::Template, format!("'{name}' is not a class template"), span));
                    }
                    let args = self.inst_args(args, depth, scope)?;
                    let m = self.demand(name, args, None, depth, span)?;
                    TypeExpr::Named { name: m, args: None, span: span.clone() }
                }
                None => {
                    if self.set.get(name).is_some_and(|d| d.is_class()) {
                        return Err(err(Phase::Template, format!("missing template arguments for '{name}'"), span));
                    }
                    t.clone()
                }
            },
            TypeExpr::Pointer(i) => TypeExpr::Pointer(Box::new(self.ty(i, depth, scope)?)),
            TypeExpr::LRef(i) => TypeExpr::LRef(Box::new(self.ty(i, depth, scope)?)),
            TypeExpr::RRef(i) => TypeExpr::RRef(Box::new(self.ty(i, depth, scope)?)),
            TypeExpr::Qualified(cv, i) => TypeExpr::Qualified(*cv, Box::new(self.ty(i, depth, scope)?)),
            TypeExpr::Array(e, n) => {
                let n = match n {
                    Some(n) => Some(Box::new(self.expr(n, depth, scope)?)),
                    None => None,
                };
                TypeExpr::Array(Box::new(self.ty(e, depth, scope)?), n)
            }
            TypeExpr::Function { ret, params } => {
                let ret = Box::new(self.ty(ret, depth, scope)?);
                let mut ps = Vec::new();
                for p in params {
                    ps.push(self.ty(p, depth, scope)?);
                }
                TypeExpr::Function { ret, params: ps }
            }
        })
    }

    fn exprs(&mut self, es: &[Expr], depth: usize, scope: &mut Scope) -> Result<Vec<Expr>, FrontendError> {
        es.iter().map(|e| self.expr(e, depth, scope)).collect()
    }

    /// Best-effort static type of an already resolved expression, used for
    /// template argument deduction.
    fn infer(&self, e: &Expr, scope: &Scope) -> Option<TypeExpr> {
        Some(match &e.kind {
            ExprKind::Int(_) => TypeExpr::Builtin(BuiltinType::Int),
            ExprKind::Char(_) => TypeExpr::Builtin(BuiltinType::Char),
            ExprKind::Bool(_) => TypeExpr::Builtin(BuiltinType::Bool),
            ExprKind::Null => return None,
            ExprKind::Name { name, .. } => {
                if let Some(t) = scope.lookup(name) {
                    t.clone()
                } else if let Some(t) = scope.class.as_ref().and_then(|c| self.member_type(c, name, false)) {
                    t
                } else {
                    self.globals.get(name)?.clone()
                }
            }
            ExprKind::This => TypeExpr::Pointer(Box::new(TypeExpr::named(scope.class.clone()?, e.span.clone()))),
            ExprKind::Unary(op, x) => match op {
                UnOp::Deref => match strip_ref_cv(&self.infer(x, scope)?) {
                    TypeExpr::Pointer(i) => *i,
                    _ => return None,
                },
                UnOp::AddrOf => TypeExpr::Pointer(Box::new(strip_ref_cv_keep_array(&self.infer(x, scope)?))),
                UnOp::Not => TypeExpr::Builtin(BuiltinType::Bool),
                UnOp::PreInc | UnOp::PreDec | UnOp::PostInc | UnOp::PostDec => self.infer(x, scope)?,
                _ => TypeExpr::Builtin(BuiltinType::Int),
            },
            ExprKind::Binary(op, a, _) => {
                if op.is_comparison() || op.is_logical() {
                    TypeExpr::Builtin(BuiltinType::Bool)
                } else {
                    match strip_ref_cv(&self.infer(a, scope)?) {
                        p @ TypeExpr::Pointer(_) => p,
                        _ => TypeExpr::Builtin(BuiltinType::Int),
                    }
                }
            }
            ExprKind::Assign(_, a, _) => self.infer(a, scope)?,
            ExprKind::Cond(_, a, _) => self.infer(a, scope)?,
            ExprKind::Call { callee, .. } => match &callee.kind {
                ExprKind::Name { name, .. } => self.functions.get(name)?.clone(),
                ExprKind::Member { base, arrow, name } => {
                    let bt = strip_ref_cv(&self.infer(base, scope)?);
                    let bt = if *arrow {
                        match bt {
                            TypeExpr::Pointer(i) => i.strip_cv().clone(),
                            _ => return None,
                        }
                    } else {
                        bt
                    };
                    let TypeExpr::Named { name: cls, .. } = bt else { return None };
                    self.member_type(&cls, name, true)?
                }
                _ => return None,
            },
            ExprKind::Member { base, arrow, name } => {
                let bt = strip_ref_cv(&self.infer(base, scope)?);
                let bt = if *arrow {
                    match bt {
                        TypeExpr::Pointer(i) => i.strip_cv().clone(),
                        _ => return None,
                    }
                } else {
                    bt
                };
                let TypeExpr::Named { name: cls, .. } = bt else { return None };
                self.member_type(&cls, name, false)?
            }
            ExprKind::Index(a, _) => match strip_ref_cv(&self.infer(a, scope)?) {
                TypeExpr::Pointer(i) => *i,
                _ => return None,
            },
            ExprKind::New { ty, .. } => TypeExpr::Pointer(Box::new(ty.clone())),
            ExprKind::Move(x) => self.infer(x, scope)?,
            ExprKind::Construct { ty, .. } => ty.clone(),
            ExprKind::StaticCast(t, _) => t.clone(),
            ExprKind::InitList(_) => return None,
        })
    }

    /// Matches a parameter pattern against an argument type, extending
    /// `binds`. `enc` names the enclosing class template whose injected name
    /// may appear in the pattern.
    fn unify(&self, pat: &TypeExpr, arg: &TypeExpr, params: &[TemplateParam], enc: Option<&TemplateDecl>, binds: &mut HashMap<String, InstArg>) -> bool {
        match pat {
            TypeExpr::LRef(p) | TypeExpr::RRef(p) => {
                let a = match arg {
                    TypeExpr::LRef(a) | TypeExpr::RRef(a) => a,
                    a => a,
                };
                self.unify(p, a, params, enc, binds)
            }
            TypeExpr::Qualified(cv, p) => match arg {
                TypeExpr::Qualified(cv2, a) if cv.is_subset_of(*cv2) => {
                    let rest = Cv { is_const: cv2.is_const && !cv.is_const, is_volatile: cv2.is_volatile && !cv.is_volatile };
                    if rest.is_empty() {
                        self.unify(p, a, params, enc, binds)
                    } else {
                        self.unify(p, &TypeExpr::Qualified(rest, a.clone()), params, enc, binds)
                    }
                }
                a => self.unify(p, a, params, enc, binds),
            },
            TypeExpr::Named { name, args: None, .. } if params.iter().any(|p| &p.name == name && p.kind == TemplateParamKind::Type) => {
                let a = InstArg::Type(arg.clone());
                match binds.get(name) {
                    Some(prev) => *prev == a,
                    None => {
                        binds.insert(name.clone(), a);
                        true
                    }
                }
            }
            TypeExpr::Named { name, args, .. } => {
                let TypeExpr::Named { name: an, .. } = arg.strip_cv() else { return false };
                if an == name && args.is_none() {
                    return true;
                }
                let Some(origin) = self.origins.get(an) else { return false };
                if origin.template != *name {
                    return false;
                }
                match args {
                    // injected name of the enclosing template: bind its parameters
                    None => {
                        let Some(enc) = enc.filter(|e| e.name == *name) else { return false };
                        for (p, a) in enc.params.iter().zip(&origin.args) {
                            binds.insert(format!("\u{0}enc:{}", p.name), a.clone());
                        }
                        binds.insert("\u{0}enc".into(), InstArg::Type(TypeExpr::named(an.clone(), Span(SourceLocation::builtin()))));
                        true
                    }
                    Some(pargs) => {
                        if pargs.len() != origin.args.len() {
                            return false;
                        }
                        for (p, a) in pargs.iter().zip(&origin.args) {
                            let ok = match (p, a) {
                                (TemplateArg::Type(pt), InstArg::Type(at)) => self.unify(pt, at, params, enc, binds),
                                (TemplateArg::Type(TypeExpr::Named { name: pn, args: None, .. }), InstArg::Int(v))
                                | (TemplateArg::Value(Expr { kind: ExprKind::Name { name: pn, .. }, .. }), InstArg::Int(v)) => match binds.get(pn) {
                                    Some(prev) => *prev == InstArg::Int(*v),
                                    None => {
                                        binds.insert(pn.clone(), InstArg::Int(*v));
                                        true
                                    }
                                },
                                (TemplateArg::Value(e), InstArg::Int(v)) => const_eval(e) == Some(*v),
                                _ => false,
                            };
                            if !ok {
                                return false;
                            }
                        }
                        true
                    }
                }
            }
            TypeExpr::Pointer(p) => match arg.strip_cv() {
                TypeExpr::Pointer(a) => self.unify(p, a, params, enc, binds),
                _ => false,
            },
            _ => canonical_type(pat) == canonical_type(arg),
        }
    }

    /// Resolves a call or reference to function template `name`.
    fn function_template_use(
        &mut self,
        name: &str,
        explicit: Option<&[TemplateArg]>,
        call_args: Option<&[Expr]>,
        depth: usize,
        scope: &mut Scope,
        span: &Span,
    ) -> Result<String, FrontendError> {
        let set = self.set;
        let decl = set.get(name).expect("function template");
        let Item::Function(f) = &decl.body else { unreachable!() };
        let mut binds: HashMap<String, InstArg> = HashMap::new();
        let explicit = match explicit {
            Some(a) => self.inst_args(a, depth, scope)?,
            None => Vec::new(),
        };
        if explicit.len() > decl.params.len() {
            return Err(err(Phase::Template, format!("too many template arguments for '{name}'"), span));
        }
        for (p, a) in decl.params.iter().zip(&explicit) {
            binds.insert(p.name.clone(), a.clone());
        }
        let enc = decl.enclosing.as_ref().and_then(|e| set.get(e));
        let needs_deduction = explicit.len() < decl.params.len() || enc.is_some();
        if needs_deduction {
            let Some(call_args) = call_args else {
                return Err(err(Phase::Template, format!("cannot deduce template arguments for '{name}'"), span));
            };
            if explicit.len() < decl.params.len() {
                let deducible = f.params.iter().all(|p| decl.params.iter().all(|tp| mentions(&p.ty, &tp.name)));
                if !deducible {
                    return Err(err(Phase::Template, format!("cannot deduce template arguments for '{name}'; specify them explicitly"), span));
                }
            }
            if call_args.len() != f.params.len() {
                return Err(err(Phase::Template, format!("wrong number of arguments in call to '{name}'"), span));
            }
            for (p, a) in f.params.iter().zip(call_args) {
                let Some(at) = self.infer(a, scope) else { continue };
                let at = match &p.ty {
                    TypeExpr::LRef(_) | TypeExpr::RRef(_) => strip_ref_keep_cv(&at),
                    _ => strip_ref_cv(&at),
                };
                if !self.unify(&p.ty, &at, &decl.params, enc, &mut binds) {
                    return Err(err(Phase::Template, format!("argument of type '{}' does not match parameter of '{name}'", canonical_type(&at)), &a.span));
                }
            }
        }
        let mut args = Vec::new();
        for p in &decl.params {
            match binds.get(&p.name) {
                Some(a) => args.push(a.clone()),
                None => return Err(err(Phase::Template, format!("cannot deduce template parameter '{}' of '{name}'", p.name), span)),
            }
        }
        let enclosing = match enc {
            None => None,
            Some(enc) => {
                let Some(InstArg::Type(TypeExpr::Named { name: inst, .. })) = binds.get("\u{0}enc") else {
                    return Err(err(Phase::Template, format!("no argument of '{name}' determines its enclosing class '{}'", enc.name), span));
                };
                let enc_args = enc.params.iter().map(|p| binds[&format!("\u{0}enc:{}", p.name)].clone()).collect();
                Some((inst.clone(), enc_args))
            }
        };
        self.demand(name, args, enclosing, depth, span)
    }

    fn expr(&mut self, e: &Expr, depth: usize, scope: &mut Scope) -> Result<Expr, FrontendError> {
        let kind = match &e.kind {
            ExprKind::Name { name, template_args } => {
                if self.set.get(name).is_some_and(|d| !d.is_class()) {
                    let m = self.function_template_use(name, template_args.as_deref(), None, depth, scope, &e.span)?;
                    ExprKind::Name { name: m, template_args: None }
                } else if template_args.is_some() {
                    return Err(err(Phase::Template, format!("'{name}' is not a template"), &e.span));
                } else {
                    e.kind.clone()
                }
            }
            ExprKind::Call { callee, args } => {
                let args = self.exprs(args, depth, scope)?;
                if let ExprKind::Name { name, template_args } = &callee.kind {
                    if self.set.get(name).is_some_and(|d| !d.is_class()) {
                        let m = self.function_template_use(name, template_args.as_deref(), Some(&args), depth, scope, &callee.span)?;
                        let callee = Expr::new(ExprKind::Name { name: m, template_args: None }, callee.span.0.clone());
                        return Ok(Expr { kind: ExprKind::Call { callee: Box::new(callee), args }, span: e.span.clone() });
                    }
                }
                ExprKind::Call { callee: Box::new(self.expr(callee, depth, scope)?), args }
            }
            ExprKind::Unary(op, x) => ExprKind::Unary(*op, Box::new(self.expr(x, depth, scope)?)),
            ExprKind::Binary(op, a, b) => ExprKind::Binary(*op, Box::new(self.expr(a, depth, scope)?), Box::new(self.expr(b, depth, scope)?)),
            ExprKind::Assign(op, a, b) => ExprKind::Assign(*op, Box::new(self.expr(a, depth, scope)?), Box::new(self.expr(b, depth, scope)?)),
            ExprKind::Cond(c, a, b) => {
                ExprKind::Cond(Box::new(self.expr(c, depth, scope)?), Box::new(self.expr(a, depth, scope)?), Box::new(self.expr(b, depth, scope)?))
            }
            ExprKind::Member { base, arrow, name } => ExprKind::Member { base: Box::new(self.expr(base, depth, scope)?), arrow: *arrow, name: name.clone() },
            ExprKind::Index(a, i) => ExprKind::Index(Box::new(self.expr(a, depth, scope)?), Box::new(self.expr(i, depth, scope)?)),
            ExprKind::New { ty, args, brace, array_len } => ExprKind::New {
                ty: self.ty(ty, depth, scope)?,
                args: match args {
                    Some(a) => Some(self.exprs(a, depth, scope)?),
                    None => None,
                },
                brace: *brace,
                array_len: match array_len {
                    Some(n) => Some(Box::new(self.expr(n, depth, scope)?)),
                    None => None,
                },
            },
            ExprKind::Move(x) => ExprKind::Move(Box::new(self.expr(x, depth, scope)?)),
            ExprKind::Construct { ty, args, brace } => {
                ExprKind::Construct { ty: self.ty(ty, depth, scope)?, args: self.exprs(args, depth, scope)?, brace: *brace }
            }
            ExprKind::StaticCast(t, x) => ExprKind::StaticCast(self.ty(t, depth, scope)?, Box::new(self.expr(x, depth, scope)?)),
            ExprKind::InitList(xs) => ExprKind::InitList(self.exprs(xs, depth, scope)?),
            k => k.clone(),
        };
        Ok(Expr { kind, span: e.span.clone() })
    }

    fn init(&mut self, i: &Initializer, depth: usize, scope: &mut Scope) -> Result<Initializer, FrontendError> {
        Ok(match i {
            Initializer::Assign(e) => Initializer::Assign(self.expr(e, depth, scope)?),
            Initializer::Paren(a) => Initializer::Paren(self.exprs(a, depth, scope)?),
            Initializer::Brace(a) => Initializer::Brace(self.exprs(a, depth, scope)?),
        })
    }

    fn var(&mut self, v: &VarDecl, depth: usize, scope: &mut Scope) -> Result<VarDecl, FrontendError> {
        let ty = self.ty(&v.ty, depth, scope)?;
        let init = match &v.init {
            Some(i) => Some(self.init(i, depth, scope)?),
            None => None,
        };
        scope.declare(&v.name, ty.clone());
        Ok(VarDecl { ty, name: v.name.clone(), init, span: v.span.clone() })
    }

    fn block(&mut self, b: &Block, depth: usize, scope: &mut Scope) -> Result<Block, FrontendError> {
        scope.frames.push(HashMap::new());
        let mut stmts = Vec::new();
        for s in &b.stmts {
            match self.stmt(s, depth, scope) {
                Ok(s) => stmts.push(s),
                Err(e) => {
                    scope.frames.pop();
                    return Err(e);
                }
            }
        }
        scope.frames.pop();
        Ok(Block { stmts, span: b.span.clone(), end: b.end.clone() })
    }

    fn param(&mut self, p: &Param, depth: usize, scope: &mut Scope) -> Result<Param, FrontendError> {
        let ty = self.ty(&p.ty, depth, scope)?;
        if let Some(n) = &p.name {
            scope.declare(n, ty.clone());
        }
        Ok(Param { ty, name: p.name.clone(), span: p.span.clone() })
    }

    fn stmt(&mut self, s: &Stmt, depth: usize, scope: &mut Scope) -> Result<Stmt, FrontendError> {
        let kind = match &s.kind {
            StmtKind::Decl(ds) => {
                let mut out = Vec::new();
                for d in ds {
                    out.push(self.var(d, depth, scope)?);
                }
                StmtKind::Decl(out)
            }
            StmtKind::Expr(e) => StmtKind::Expr(self.expr(e, depth, scope)?),
            StmtKind::If { cond, then, els } => StmtKind::If {
                cond: self.expr(cond, depth, scope)?,
                then: Box::new(self.scoped_stmt(then, depth, scope)?),
                els: match els {
                    Some(e) => Some(Box::new(self.scoped_stmt(e, depth, scope)?)),
                    None => None,
                },
            },
            StmtKind::While { cond, body } => StmtKind::While { cond: self.expr(cond, depth, scope)?, body: Box::new(self.scoped_stmt(body, depth, scope)?) },
            StmtKind::DoWhile { body, cond } => {
                StmtKind::DoWhile { body: Box::new(self.scoped_stmt(body, depth, scope)?), cond: self.expr(cond, depth, scope)? }
            }
            StmtKind::For { init, cond, step, body } => {
                scope.frames.push(HashMap::new());
                let r = (|| {
                    Ok(StmtKind::For {
                        init: match init {
                            Some(i) => Some(Box::new(self.stmt(i, depth, scope)?)),
                            None => None,
                        },
                        cond: match cond {
                            Some(c) => Some(self.expr(c, depth, scope)?),
                            None => None,
                        },
                        step: match step {
                            Some(c) => Some(self.expr(c, depth, scope)?),
                            None => None,
                        },
                        body: Box::new(self.scoped_stmt(body, depth, scope)?),
                    })
                })();
                scope.frames.pop();
                r?
            }
            StmtKind::Return(e) => StmtKind::Return(match e {
                Some(e) => Some(self.expr(e, depth, scope)?),
                None => None,
            }),
            StmtKind::Block(b) => StmtKind::Block(self.block(b, depth, scope)?),
            StmtKind::Try { body, handlers } => {
                let body = self.block(body, depth, scope)?;
                let mut hs = Vec::new();
                for h in handlers {
                    scope.frames.push(HashMap::new());
                    let param = match &h.param {
                        Some(p) => match self.param(p, depth, scope) {
                            Ok(p) => Some(p),
                            Err(e) => {
                                scope.frames.pop();
                                return Err(e);
                            }
                        },
                        None => None,
                    };
                    let body = self.block(&h.body, depth, scope);
                    scope.frames.pop();
                    hs.push(Handler { param, body: body?, span: h.span.clone() });
                }
                StmtKind::Try { body, handlers: hs }
            }
            StmtKind::Throw(e) => StmtKind::Throw(match e {
                Some(e) => Some(self.expr(e, depth, scope)?),
                None => None,
            }),
            StmtKind::Delete { expr, array } => StmtKind::Delete { expr: self.expr(expr, depth, scope)?, array: *array },
            k => k.clone(),
        };
        Ok(Stmt { kind, span: s.span.clone() })
    }

    fn scoped_stmt(&mut self, s: &Stmt, depth: usize, scope: &mut Scope) -> Result<Stmt, FrontendError> {
        scope.frames.push(HashMap::new());
        let r = self.stmt(s, depth, scope);
        scope.frames.pop();
        r
    }

    fn function(&mut self, f: &FunctionDecl, class: Option<&str>, depth: usize) -> Result<FunctionDecl, FrontendError> {
        let mut scope = Scope { frames: vec![HashMap::new()], class: class.map(str::to_string).or_else(|| f.qualifier.clone()) };
        let ret = self.ty(&f.ret, depth, &mut scope)?;
        let mut params = Vec::new();
        for p in &f.params {
            params.push(self.param(p, depth, &mut scope)?);
        }
        let throw_spec = match &f.throw_spec {
            ThrowSpecExpr::Dynamic(ts) => {
                let mut out = Vec::new();
                for t in ts {
                    out.push(self.ty(t, depth, &mut scope)?);
                }
                ThrowSpecExpr::Dynamic(out)
            }
            other => other.clone(),
        };
        let mut init_list = Vec::new();
        for m in &f.init_list {
            init_list.push(MemInit {
                name: self.ty(&m.name, depth, &mut scope)?,
                args: self.exprs(&m.args, depth, &mut scope)?,
                brace: m.brace,
                span: m.span.clone(),
            });
        }
        let body = match &f.body {
            Some(b) => Some(self.block(b, depth, &mut scope)?),
            None => None,
        };
        Ok(FunctionDecl { ret, params, throw_spec, init_list, body, ..f.clone() })
    }

    /// Resolves an item; returns it plus any friend functions to hoist.
    fn item(&mut self, item: &Item, depth: usize) -> Result<Vec<Item>, FrontendError> {
        Ok(match item {
            Item::Class(c) => {
                let mut scope = Scope { frames: vec![HashMap::new()], class: Some(c.name.clone()) };
                let mut bases = Vec::new();
                for b in &c.bases {
                    bases.push(BaseSpec { ty: self.ty(&b.ty, depth, &mut scope)?, ..b.clone() });
                }
                let mut members = Vec::new();
                let mut hoisted = Vec::new();
                for m in &c.members {
                    match m {
                        Member::Field(v) => members.push(Member::Field(self.var(v, depth, &mut scope)?)),
                        Member::Method(f) => members.push(Member::Method(self.function(f, Some(&c.name), depth)?)),
                        Member::Friend(item) => match &**item {
                            Item::Function(f) => hoisted.push(Item::Function(self.function(f, None, depth)?)),
                            other => hoisted.extend(self.item(other, depth)?),
                        },
                        other => members.push(other.clone()),
                    }
                }
                let c = ClassDecl { bases, members, ..c.clone() };
                self.register_class(&c);
                let mut out = vec![Item::Class(c)];
                out.extend(hoisted);
                out
            }
            Item::Function(f) => vec![Item::Function(self.function(f, None, depth)?)],
            Item::Global(v) => {
                let mut scope = Scope { frames: vec![HashMap::new()], class: None };
                let v = self.var(v, depth, &mut scope)?;
                self.globals.insert(v.name.clone(), v.ty.clone());
                vec![Item::Global(v)]
            }
            Item::Template(t) => return Err(err(Phase::Template, "unexpected template declaration", &t.span)),
        })
    }
}

fn strip_ref_cv_keep_array(t: &TypeExpr) -> TypeExpr {
    match t {
        TypeExpr::LRef(i) | TypeExpr::RRef(i) => (**i).clone(),
        t => t.clone(),
    }
}

fn strip_ref_keep_cv(t: &TypeExpr) -> TypeExpr {
    match t {
        TypeExpr::LRef(i) | TypeExpr::RRef(i) => (**i).clone(),
        t => t.clone(),
    }
}

/// Result of monomorphization.
#[derive(Clone, Debug)]
pub struct Monomorphized {
    pub unit: TranslationUnit,
    /// Instances in instantiation order.
    pub instances: Vec<Instantiation>,
}

/// Expands every template use in `residual`. The output contains no
/// template declarations, template-ids or friend members.
pub fn instantiate(set: &TemplateSet, residual: &TranslationUnit, max_depth: usize) -> Result<Monomorphized, FrontendError> {
    let mut inst = Instantiator {
        set,
        max_depth,
        instances: Vec::new(),
        by_name: HashMap::new(),
        stamped: Vec::new(),
        resolved: Vec::new(),
        worklist: VecDeque::new(),
        classes: HashMap::new(),
        origins: HashMap::new(),
        functions: HashMap::new(),
        globals: HashMap::new(),
    };
    for item in &residual.items {
        inst.register_item(item);
    }
    let mut out_items = Vec::new();
    for item in &residual.items {
        out_items.extend(inst.item(item, 1)?);
        inst.drain()?;
    }
    let mut classes = Vec::new();
    let mut functions = Vec::new();
    for (i, item) in inst.resolved.iter().enumerate() {
        let Some(item) = item else { unreachable!("instance {} left unresolved", inst.instances[i].mangled) };
        match item {
            Item::Class(_) => classes.push(item.clone()),
            _ => functions.push(item.clone()),
        }
    }
    // class instances may be hoisting friend functions; those were emitted
    // after the instance in `functions`
    let mut items = classes;
    items.extend(out_items);
    items.extend(functions);
    Ok(Monomorphized { unit: TranslationUnit { items }, instances: inst.instances })
}

impl Instantiator<'_> {
    fn drain(&mut self) -> Result<(), FrontendError> {
        while let Some(idx) = self.worklist.pop_front() {
            let item = self.stamped[idx].take().expect("stamped once");
            let depth = self.instances[idx].depth + 1;
            let mut resolved = self.item(&item, depth)?;
            let first = resolved.remove(0);
            self.resolved[idx] = Some(first);
            // hoisted friends of class instances become free functions
            for extra in resolved {
                self.stamped.push(None);
                self.resolved.push(Some(extra));
            }
        }
        Ok(())
    }
}

/// Collects and instantiates in one step.
pub fn monomorphize(tu: &TranslationUnit, max_depth: usize) -> Result<Monomorphized, FrontendError> {
    let (set, residual) = collect_templates(tu)?;
    instantiate(&set, &residual, max_depth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_source;
    use crate::frontend::printer::print_unit;

    fn mono(src: &str) -> Result<Monomorphized, FrontendError> {
        monomorphize(&parse_source(src, "t.cpp").unwrap(), DEFAULT_MAX_DEPTH)
    }

    const FRIEND_TEMPLATE: &str = include_str!("../../../corpus/example_friend_template.cpp");

    #[test]
    fn friend_template_is_collected_with_enclosing_class() {
        let (set, residual) = collect_templates(&parse_source(FRIEND_TEMPLATE, "t.cpp").unwrap()).unwrap();
        assert_eq!(set.len(), 2);
        let x = set.get("X").unwrap();
        assert_eq!((x.params[0].kind, x.params[0].name.as_str()), (TemplateParamKind::Int, "N"));
        let foo = set.get("foo").unwrap();
        assert_eq!(foo.params[0].name, "M");
        assert_eq!(foo.enclosing.as_deref(), Some("X"));
        assert!(residual.items.iter().all(|i| !matches!(i, Item::Template(_))));
    }

    #[test]
    fn no_templates_means_identity() {
        let tu = parse_source("struct S { int v; }; int main(){ S s; return s.v; }", "t.cpp").unwrap();
        let (set, residual) = collect_templates(&tu).unwrap();
        assert!(set.is_empty());
        assert_eq!(residual, tu);
    }

    #[test]
    fn friend_template_body_is_specialized() {
        let m = mono(FRIEND_TEMPLATE).unwrap();
        let names: Vec<_> = m.instances.iter().map(|i| i.mangled.as_str()).collect();
        assert_eq!(names, vec!["X<1234>", "X<1234>::foo<5678>"]);
        let text = print_unit(&m.unit);
        assert!(text.contains("return 1234 * 10000 + 5678;"), "{text}");
        assert!(!text.contains("template"));
    }

    #[test]
    fn deduces_identity_instance() {
        let m = mono("template<typename T> T id(T x){return x;} int main(){ return id(5); }").unwrap();
        assert_eq!(m.instances[0].mangled, "id<int>");
        assert_eq!(m.instances[0].args, vec![InstArg::Type(TypeExpr::Builtin(BuiltinType::Int))]);
    }

    #[test]
    fn self_recursive_class_stamped_once() {
        let m = mono("template<int N> struct R { R<N> *p; }; R<3> r; int main(){ return 0; }").unwrap();
        assert_eq!(m.instances.len(), 1);
        assert_eq!(m.instances[0].mangled, "R<3>");
    }

    #[test]
    fn divergent_recursion_hits_the_cap() {
        let e = mono("template<int N> struct F { F<N + 1> *next; }; F<0> f; int main(){ return 0; }").unwrap_err();
        assert!(e.message.contains("template recursion limit"), "{}", e.message);
        assert_eq!(e.phase, Phase::Template);
    }

    #[test]
    fn nested_shadowing_rejected() {
        let tu = TranslationUnit {
            items: vec![Item::Template(TemplateItem {
                params: vec![TemplateParam { kind: TemplateParamKind::Type, name: "T".into(), span: Span(SourceLocation::builtin()) }],
                item: Box::new(Item::Template(TemplateItem {
                    params: vec![TemplateParam { kind: TemplateParamKind::Type, name: "T".into(), span: Span(SourceLocation::builtin()) }],
                    item: Box::new(Item::Global(VarDecl {
                        ty: TypeExpr::Builtin(BuiltinType::Int),
                        name: "x".into(),
                        init: None,
                        span: Span(SourceLocation::builtin()),
                    })),
                    span: Span(SourceLocation::builtin()),
                })),
                span: Span(SourceLocation::builtin()),
            })],
        };
        let e = collect_templates(&tu).unwrap_err();
        assert!(e.message.contains("shadows"));
    }

    #[test]
    fn type_arguments_render_canonically() {
        let m = mono("template<typename T> struct B { T v; }; B<const int*> a; B<B<char>> b; int main(){return 0;}").unwrap();
        let names: Vec<_> = m.instances.iter().map(|i| i.mangled.as_str()).collect();
        assert_eq!(names, vec!["B<const int*>", "B<char>", "B<B<char>>"]);
    }

    #[test]
    fn kind_mismatch_is_reported() {
        let e = mono("template<int N> struct A { int v; }; A<int> a; int main(){return 0;}").unwrap_err();
        assert!(e.message.contains("kind mismatch"), "{}", e.message);
    }
}
