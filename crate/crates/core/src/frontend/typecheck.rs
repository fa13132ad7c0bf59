//! Name resolution, type checking and implicit member synthesis.

use std::collections::{HashMap, HashSet};

use super::ast as a;
use super::ast::{BinOp, FunctionKind, UnOp};
use super::erase::display_expr;
use super::typed as t;
use super::typed::{Category, Conversion, CtorInit, FuncId, ImplicitKind, Init, VarId};
use super::types::{Cv, FunctionType, SourceLocation, ThrowSpec, TypeRepr};
use super::{FrontendError, Phase};
use crate::templates::{const_eval, Instantiation};

type R<T> = Result<T, FrontendError>;

fn terr<T>(msg: impl Into<String>, loc: &SourceLocation) -> R<T> {
    Err(FrontendError::new(Phase::Type, msg, loc.clone()))
}

/// Type checks a template-free translation unit.
pub fn typecheck(tu: &a::TranslationUnit, int_width: u32, instances: &[Instantiation]) -> R<t::TypedProgram> {
    let mut c = Checker { width: int_width, ..Checker::default() };
    for inst in instances {
        c.origins.insert(inst.mangled.clone(), t::TemplateOrigin { template: inst.template.clone(), args: inst.args.iter().map(|a| a.to_string()).collect() });
    }
    c.run(tu)
}

#[derive(Default)]
struct Checker {
    width: u32,
    origins: HashMap<String, t::TemplateOrigin>,
    classes: Vec<t::ClassInfo>,
    class_idx: HashMap<String, usize>,
    declared_classes: HashSet<String>,
    functions: Vec<t::MethodInfo>,
    ids: HashMap<String, FuncId>,
    free: HashMap<String, Vec<FuncId>>,
    globals: Vec<t::Global>,
    global_idx: HashMap<String, usize>,
    /// Bodies still to check: function, syntax, enclosing class.
    pending: Vec<(FuncId, a::FunctionDecl)>,
}

/// Per-function checking state.
struct FnCtx {
    class: Option<String>,
    scopes: Vec<HashMap<String, VarId>>,
    locals: Vec<t::LocalVar>,
    used_names: HashMap<String, usize>,
    ret: TypeRepr,
    kind: FunctionKind,
    loops: usize,
    name: String,
}

impl FnCtx {
    fn new(class: Option<String>, name: &str) -> FnCtx {
        FnCtx {
            class,
            scopes: vec![HashMap::new()],
            locals: Vec::new(),
            used_names: HashMap::new(),
            ret: TypeRepr::Void,
            kind: FunctionKind::Normal,
            loops: 0,
            name: name.to_string(),
        }
    }

    fn declare(&mut self, name: &str, ty: TypeRepr, is_param: bool, loc: &SourceLocation) -> R<VarId> {
        if self.scopes.last().is_some_and(|s| s.contains_key(name)) {
            return terr(format!("redeclaration of '{name}'"), loc);
        }
        let n = self.used_names.entry(name.to_string()).or_insert(0);
        let unique = if *n == 0 { name.to_string() } else { format!("{name}${n}") };
        *n += 1;
        let id = VarId(self.locals.len());
        self.locals.push(t::LocalVar { name: unique, ty, is_param, loc: loc.clone() });
        self.scopes.last_mut().expect("scope").insert(name.to_string(), id);
        Ok(id)
    }

    fn lookup(&self, name: &str) -> Option<VarId> {
        self.scopes.iter().rev().find_map(|s| s.get(name).copied())
    }
}

fn loc_of(s: &a::Span) -> SourceLocation {
    s.0.clone()
}

fn is_builtin_name(n: &str) -> bool {
    matches!(
        n,
        "assert"
            | "nondet_int"
            | "nondet_bool"
            | "nondet_char"
            | "__VERIFIER_nondet_int"
            | "__VERIFIER_nondet_bool"
            | "__VERIFIER_nondet_char"
            | "__ESBMC_assume"
            | "__VERIFIER_assume"
    )
}

fn same_type(x: &TypeRepr, y: &TypeRepr) -> bool {
    strip_all_cv(x) == strip_all_cv(y)
}

/// Drops cv-qualifiers at the top level only.
fn unqual(t: &TypeRepr) -> TypeRepr {
    t.strip_cv().clone()
}

fn strip_all_cv(t: &TypeRepr) -> TypeRepr {
    match t.strip_cv() {
        TypeRepr::Pointer(i) => TypeRepr::Pointer(Box::new(strip_all_cv(i))),
        TypeRepr::LRef(i) => TypeRepr::LRef(Box::new(strip_all_cv(i))),
        TypeRepr::RRef(i) => TypeRepr::RRef(Box::new(strip_all_cv(i))),
        TypeRepr::Array(e, n) => TypeRepr::Array(Box::new(strip_all_cv(e)), *n),
        other => other.clone(),
    }
}

fn params_key(ps: &[TypeRepr]) -> String {
    ps.iter().map(|p| p.source_name()).collect::<Vec<_>>().join(",")
}

fn bool_ty() -> TypeRepr {
    TypeRepr::Bool
}

impl Checker {
    fn int(&self) -> TypeRepr {
        TypeRepr::Int(self.width)
    }

    fn class(&self, name: &str) -> &t::ClassInfo {
        &self.classes[self.class_idx[name]]
    }

    fn class_mut(&mut self, name: &str) -> &mut t::ClassInfo {
        let i = self.class_idx[name];
        &mut self.classes[i]
    }

    fn is_base_of(&self, base: &str, derived: &str) -> bool {
        self.base_path(derived, base).is_some_and(|p| p.len() > 1)
    }

    fn base_path(&self, derived: &str, base: &str) -> Option<Vec<String>> {
        if derived == base {
            return Some(vec![derived.to_string()]);
        }
        let c = self.classes.get(*self.class_idx.get(derived)?)?;
        for b in &c.bases {
            if let Some(mut p) = self.base_path(b, base) {
                p.insert(0, derived.to_string());
                return Some(p);
            }
        }
        None
    }

    // ------------------------------------------------------------- types

    fn resolve_type(&self, te: &a::TypeExpr, loc: &SourceLocation) -> R<TypeRepr> {
        Ok(match te {
            a::TypeExpr::Builtin(b) => match b {
                a::BuiltinType::Void => TypeRepr::Void,
                a::BuiltinType::Bool => TypeRepr::Bool,
                a::BuiltinType::Char => TypeRepr::Char,
                a::BuiltinType::Int => self.int(),
                a::BuiltinType::Double => TypeRepr::Float("double".into()),
                a::BuiltinType::Float => TypeRepr::Float("float".into()),
            },
            a::TypeExpr::Named { name, args, span } => {
                if args.is_some() {
                    return terr(format!("unexpanded template-id '{name}'"), &loc_of(span));
                }
                if !self.declared_classes.contains(name) {
                    return terr(format!("unknown type '{name}'"), &loc_of(span));
                }
                TypeRepr::Class(name.clone())
            }
            a::TypeExpr::Pointer(i) => TypeRepr::pointer(self.resolve_type(i, loc)?),
            a::TypeExpr::LRef(i) => match TypeRepr::lvalue_ref(self.resolve_type(i, loc)?) {
                Ok(t) => t,
                Err(e) => return terr(e.to_string(), loc),
            },
            a::TypeExpr::RRef(i) => match TypeRepr::rvalue_ref(self.resolve_type(i, loc)?) {
                Ok(t) => t,
                Err(e) => return terr(e.to_string(), loc),
            },
            a::TypeExpr::Qualified(cv, i) => TypeRepr::qualified(*cv, self.resolve_type(i, loc)?),
            a::TypeExpr::Array(e, n) => {
                let elem = self.resolve_type(e, loc)?;
                if elem.is_void() || elem.is_reference() {
                    return terr("invalid array element type", loc);
                }
                let n = match n {
                    None => None,
                    Some(n) => match const_eval(n) {
                        Some(v) if v >= 0 => Some(v as u64),
                        Some(_) => return terr("array size is negative", &loc_of(&n.span)),
                        None => return terr("array size is not an integer constant", &loc_of(&n.span)),
                    },
                };
                TypeRepr::Array(Box::new(elem), n)
            }
            a::TypeExpr::Function { ret, params } => {
                let ret = self.resolve_type(ret, loc)?;
                let mut ps = Vec::new();
                for p in params {
                    ps.push(adjust_param(self.resolve_type(p, loc)?));
                }
                TypeRepr::Function(FunctionType { params: ps, ret: Box::new(ret), throw_spec: ThrowSpec::Unspecified })
            }
        })
    }

    fn resolve_throw_spec(&self, ts: &a::ThrowSpecExpr, loc: &SourceLocation) -> R<ThrowSpec> {
        Ok(match ts {
            a::ThrowSpecExpr::None => ThrowSpec::Unspecified,
            a::ThrowSpecExpr::Noexcept => ThrowSpec::Noexcept,
            a::ThrowSpecExpr::Dynamic(tys) => {
                let mut out = Vec::new();
                for ty in tys {
                    out.push(self.resolve_type(ty, loc)?);
                }
                ThrowSpec::dynamic(out)
            }
        })
    }

    // ------------------------------------------------------------ driver

    fn run(mut self, tu: &a::TranslationUnit) -> R<t::TypedProgram> {
        let mut defs: Vec<&a::ClassDecl> = Vec::new();
        for item in &tu.items {
            match item {
                a::Item::Class(c) => {
                    self.declared_classes.insert(c.name.clone());
                    if c.is_definition {
                        if defs.iter().any(|d| d.name == c.name) {
                            return terr(format!("redefinition of class '{}'", c.name), &loc_of(&c.span));
                        }
                        defs.push(c);
                    }
                }
                a::Item::Template(tpl) => return terr("template declaration survived instantiation", &loc_of(&tpl.span)),
                _ => {}
            }
        }
        for name in &self.declared_classes {
            if !defs.iter().any(|d| &d.name == name) {
                let decl = tu.items.iter().find_map(|i| match i {
                    a::Item::Class(c) if &c.name == name => Some(c),
                    _ => None,
                });
                return terr(format!("class '{name}' is declared but never defined"), &loc_of(&decl.expect("declared").span));
            }
        }
        for c in self.class_order(&defs)? {
            self.declare_class(c)?;
        }
        // free functions and out-of-class member definitions
        for item in &tu.items {
            if let a::Item::Function(f) = item {
                match &f.qualifier {
                    Some(cls) => self.attach_definition(cls, f)?,
                    None => self.declare_free(f)?,
                }
            }
        }
        for item in &tu.items {
            if let a::Item::Global(v) = item {
                self.declare_global(v)?;
            }
        }
        let pending = std::mem::take(&mut self.pending);
        for (id, decl) in pending {
            self.check_body(id, &decl)?;
        }
        let mains = self.free.get("main").cloned().unwrap_or_default();
        let entry = match mains.as_slice() {
            [m] => *m,
            [] => return terr("no 'main' function", &SourceLocation::builtin()),
            [_, m, ..] => return terr("more than one 'main' function", &self.functions[m.0].loc),
        };
        let m = &self.functions[entry.0];
        if m.body.is_none() {
            return terr("'main' is declared but not defined", &m.loc);
        }
        if !matches!(*m.sig.ret, TypeRepr::Int(_)) {
            return terr("'main' must return int", &m.loc);
        }
        if !m.params.is_empty() {
            return terr("'main' must not take parameters", &m.loc);
        }
        for f in &self.functions {
            if f.body.is_none() && f.implicit.is_none() && !f.is_pure {
                // declared only; calls to it are checked at lowering
            }
        }
        Ok(t::TypedProgram { classes: self.classes, functions: self.functions, globals: self.globals, entry, int_width: self.width })
    }

    /// Orders class definitions so bases and by-value members come first.
    fn class_order<'d>(&self, defs: &[&'d a::ClassDecl]) -> R<Vec<&'d a::ClassDecl>> {
        fn deps(c: &a::ClassDecl) -> Vec<String> {
            fn by_value(t: &a::TypeExpr, out: &mut Vec<String>) {
                match t {
                    a::TypeExpr::Named { name, .. } => out.push(name.clone()),
                    a::TypeExpr::Array(e, _) | a::TypeExpr::Qualified(_, e) => by_value(e, out),
                    _ => {}
                }
            }
            let mut out = Vec::new();
            for b in &c.bases {
                by_value(&b.ty, &mut out);
            }
            for m in &c.members {
                if let a::Member::Field(v) = m {
                    by_value(&v.ty, &mut out);
                }
            }
            out
        }
        let by_name: HashMap<&str, &'d a::ClassDecl> = defs.iter().map(|d| (d.name.as_str(), *d)).collect();
        let mut state: HashMap<String, u8> = HashMap::new();
        let mut out = Vec::new();
        fn visit<'d>(
            c: &'d a::ClassDecl,
            by_name: &HashMap<&str, &'d a::ClassDecl>,
            state: &mut HashMap<String, u8>,
            out: &mut Vec<&'d a::ClassDecl>,
        ) -> R<()> {
            match state.get(&c.name) {
                Some(2) => return Ok(()),
                Some(1) => return terr(format!("class '{}' contains or inherits from itself", c.name), &loc_of(&c.span)),
                _ => {}
            }
            state.insert(c.name.clone(), 1);
            for d in deps(c) {
                if let Some(dc) = by_name.get(d.as_str()) {
                    visit(dc, by_name, state, out)?;
                }
            }
            state.insert(c.name.clone(), 2);
            out.push(c);
            Ok(())
        }
        for d in defs {
            visit(d, &by_name, &mut state, &mut out)?;
        }
        Ok(out)
    }

    fn declare_class(&mut self, c: &a::ClassDecl) -> R<()> {
        let loc = loc_of(&c.span);
        let mut bases = Vec::new();
        for b in &c.bases {
            let bl = loc_of(&b.span);
            if b.is_virtual {
                return terr("virtual inheritance is not supported", &bl);
            }
            let TypeRepr::Class(bn) = self.resolve_type(&b.ty, &bl)? else {
                return terr("base specifier is not a class", &bl);
            };
            if bn == c.name {
                return terr(format!("class '{bn}' cannot inherit from itself"), &bl);
            }
            if bases.contains(&bn) {
                return terr(format!("duplicate base class '{bn}'"), &bl);
            }
            bases.push(bn);
        }
        // repeated (diamond) bases
        let mut seen = HashSet::new();
        let mut stack: Vec<String> = bases.clone();
        while let Some(b) = stack.pop() {
            if !seen.insert(b.clone()) {
                return terr(format!("class '{}' inherits '{b}' more than once (diamond inheritance is not supported)", c.name), &loc);
            }
            stack.extend(self.class(&b).bases.iter().cloned());
        }
        let mut fields = Vec::new();
        for m in &c.members {
            if let a::Member::Field(v) = m {
                let vl = loc_of(&v.span);
                let ty = self.resolve_type(&v.ty, &vl)?;
                if ty.is_reference() {
                    return terr("reference members are not supported", &vl);
                }
                if ty.is_void() || ty.function().is_some() {
                    return terr(format!("field '{}' has invalid type", v.name), &vl);
                }
                if matches!(ty.array_elem(), Some((_, None))) {
                    return terr("array field needs a size", &vl);
                }
                if fields.iter().any(|f: &t::FieldInfo| f.name == v.name) {
                    return terr(format!("duplicate field '{}'", v.name), &vl);
                }
                fields.push(t::FieldInfo { name: v.name.clone(), ty, default_init: None, loc: vl });
            }
        }
        let inherited_poly = bases.iter().any(|b| self.class(b).polymorphic);
        let idx = self.classes.len();
        self.class_idx.insert(c.name.clone(), idx);
        self.classes.push(t::ClassInfo {
            name: c.name.clone(),
            bases: bases.clone(),
            fields,
            methods: Vec::new(),
            template: self.origins.get(&c.name).cloned(),
            polymorphic: inherited_poly,
            aggregate: false,
            dtor: None,
            loc: loc.clone(),
        });
        // methods
        for m in &c.members {
            if let a::Member::Method(f) = m {
                self.declare_method(&c.name, f)?;
            }
        }
        let own_virtual = self.class(&c.name).methods.iter().any(|m| self.functions[m.0].is_virtual);
        let has_user_ctor = self.ctors(&c.name).next().is_some();
        {
            let ci = self.class_mut(&c.name);
            ci.polymorphic = inherited_poly || own_virtual;
            ci.aggregate = !has_user_ctor && bases.is_empty() && !ci.polymorphic;
        }
        // default member initializers, checked in a constructor-like scope
        let mut ctx = FnCtx::new(Some(c.name.clone()), &c.name);
        for m in &c.members {
            if let a::Member::Field(v) = m {
                if let Some(init) = &v.init {
                    let ty = self.class(&c.name).fields.iter().find(|f| f.name == v.name).expect("field").ty.clone();
                    let i = self.init(&mut ctx, &ty, Some(init), &loc_of(&v.span))?;
                    let Some(i) = i else { continue };
                    let ci = self.class_mut(&c.name);
                    ci.fields.iter_mut().find(|f| f.name == v.name).expect("field").default_init = Some(i);
                }
            }
        }
        self.synthesize_implicit(&c.name, &loc)?;
        Ok(())
    }

    fn ctors(&self, class: &str) -> impl Iterator<Item = FuncId> + '_ {
        self.class(class).methods.iter().copied().filter(|m| self.functions[m.0].kind == FunctionKind::Constructor)
    }

    fn method_id(class: &str, kind: FunctionKind, name: &str, params: &[TypeRepr], is_const: bool) -> String {
        let mut ps = vec![format!("{class}*")];
        ps.extend(params.iter().map(|p| p.source_name()));
        let display = match kind {
            FunctionKind::Destructor => format!("~{class}"),
            _ => name.to_string(),
        };
        format!("{class}::{display}({}){}", ps.join(","), if is_const { " const" } else { "" })
    }

    fn new_function(&mut self, m: t::MethodInfo) -> R<FuncId> {
        if let Some(prev) = self.ids.get(&m.id) {
            let p = &self.functions[prev.0];
            return terr(format!("redefinition of '{}' (previously declared at line {})", m.id, p.loc.line), &m.loc);
        }
        let id = FuncId(self.functions.len());
        self.ids.insert(m.id.clone(), id);
        self.functions.push(m);
        Ok(id)
    }

    fn signature(&self, f: &a::FunctionDecl, ctx: &mut FnCtx) -> R<(Vec<VarId>, FunctionType)> {
        let mut params = Vec::new();
        let mut tys = Vec::new();
        for (i, p) in f.params.iter().enumerate() {
            let pl = loc_of(&p.span);
            let ty = adjust_param(self.resolve_type(&p.ty, &pl)?);
            if ty.is_void() {
                return terr("parameter has type void", &pl);
            }
            let name = p.name.clone().unwrap_or_else(|| format!("$param{i}"));
            params.push(ctx.declare(&name, ty.clone(), true, &pl)?);
            tys.push(ty);
        }
        let loc = loc_of(&f.span);
        let ret = self.resolve_type(&f.ret, &loc)?;
        if ret.array_elem().is_some() || ret.function().is_some() {
            return terr("functions cannot return arrays or functions", &loc);
        }
        let throw_spec = self.resolve_throw_spec(&f.throw_spec, &loc)?;
        Ok((params, FunctionType { params: tys, ret: Box::new(ret), throw_spec }))
    }

    fn declare_method(&mut self, class: &str, f: &a::FunctionDecl) -> R<FuncId> {
        let loc = loc_of(&f.span);
        let mut ctx = FnCtx::new(Some(class.to_string()), &f.name);
        let (params, sig) = self.signature(f, &mut ctx)?;
        let name = match f.kind {
            FunctionKind::Destructor => format!("~{class}"),
            _ => f.name.clone(),
        };
        if f.kind == FunctionKind::Destructor && !sig.params.is_empty() {
            return terr("destructors take no parameters", &loc);
        }
        // virtual if declared so or if it overrides a base virtual
        let overridden = self.find_overridden(class, f.kind, &name, &sig.params, f.is_const);
        if f.is_override && overridden.is_none() {
            return terr(format!("'{name}' marked override but does not override any base class method"), &loc);
        }
        if let Some(o) = overridden {
            let base = &self.functions[o.0];
            if f.kind == FunctionKind::Normal && !same_type(&base.sig.ret, &sig.ret) {
                return terr(format!("return type of '{name}' differs from the overridden '{}'", base.id), &loc);
            }
        }
        let is_virtual = f.is_virtual || overridden.is_some();
        if f.is_pure && !is_virtual {
            return terr("only virtual methods can be pure", &loc);
        }
        let m = t::MethodInfo {
            id: Self::method_id(class, f.kind, &name, &sig.params, f.is_const),
            name,
            class: Some(class.to_string()),
            kind: f.kind,
            sig,
            params,
            locals: ctx.locals,
            is_virtual,
            is_override: overridden.is_some(),
            is_const: f.is_const,
            is_pure: f.is_pure,
            implicit: None,
            trivial: false,
            inits: Vec::new(),
            body: None,
            loc,
        };
        let id = self.new_function(m)?;
        self.class_mut(class).methods.push(id);
        if f.kind == FunctionKind::Destructor {
            self.class_mut(class).dtor = Some(id);
        }
        if f.body.is_some() || f.kind == FunctionKind::Constructor {
            self.pending.push((id, f.clone()));
        }
        Ok(id)
    }

    /// A virtual method in some base of `class` that a method with this
    /// signature overrides.
    fn find_overridden(&self, class: &str, kind: FunctionKind, name: &str, params: &[TypeRepr], is_const: bool) -> Option<FuncId> {
        let mut stack: Vec<String> = self.class(class).bases.clone();
        while let Some(b) = stack.pop() {
            let bc = self.class(&b);
            for m in &bc.methods {
                let mi = &self.functions[m.0];
                if !mi.is_virtual || mi.kind != kind {
                    continue;
                }
                let hit = match kind {
                    FunctionKind::Destructor => true,
                    _ => mi.name == name && params_key(&mi.sig.params) == params_key(params) && mi.is_const == is_const,
                };
                if hit {
                    return Some(*m);
                }
            }
            stack.extend(bc.bases.iter().cloned());
        }
        None
    }

    fn attach_definition(&mut self, class: &str, f: &a::FunctionDecl) -> R<()> {
        let loc = loc_of(&f.span);
        if !self.class_idx.contains_key(class) {
            return terr(format!("unknown class '{class}'"), &loc);
        }
        let mut ctx = FnCtx::new(Some(class.to_string()), &f.name);
        let (params, sig) = self.signature(f, &mut ctx)?;
        let name = match f.kind {
            FunctionKind::Destructor => format!("~{class}"),
            _ => f.name.clone(),
        };
        let id = Self::method_id(class, f.kind, &name, &sig.params, f.is_const);
        let Some(&fid) = self.ids.get(&id) else {
            return terr(format!("no member '{id}' declared in class '{class}'"), &loc);
        };
        let m = &mut self.functions[fid.0];
        if m.implicit.is_some() || self.pending.iter().any(|(p, d)| *p == fid && d.body.is_some()) {
            return terr(format!("redefinition of '{id}'"), &loc);
        }
        // parameter names come from the definition
        m.params = params;
        m.locals = ctx.locals;
        m.loc = loc;
        self.pending.retain(|(p, _)| *p != fid);
        self.pending.push((fid, f.clone()));
        Ok(())
    }

    fn declare_free(&mut self, f: &a::FunctionDecl) -> R<()> {
        let loc = loc_of(&f.span);
        if f.kind != FunctionKind::Normal || f.is_virtual || f.is_const {
            return terr("invalid declaration outside a class", &loc);
        }
        if is_builtin_name(&f.name) {
            return terr(format!("'{}' is a builtin and cannot be redeclared", f.name), &loc);
        }
        let mut ctx = FnCtx::new(None, &f.name);
        let (params, sig) = self.signature(f, &mut ctx)?;
        let id = if f.name == "main" { "main".to_string() } else { format!("{}({})", f.name, params_key(&sig.params)) };
        if let Some(&prev) = self.ids.get(&id) {
            let has_body = self.pending.iter().any(|(p, _)| *p == prev);
            let pm = &self.functions[prev.0];
            if pm.sig != sig {
                return terr(format!("conflicting declaration of '{}'", f.name), &loc);
            }
            if f.body.is_some() {
                if has_body {
                    return terr(format!("redefinition of '{}'", f.name), &loc);
                }
                let pm = &mut self.functions[prev.0];
                pm.params = params;
                pm.locals = ctx.locals;
                pm.loc = loc;
                self.pending.push((prev, f.clone()));
            }
            return Ok(());
        }
        let m = t::MethodInfo {
            id,
            name: f.name.clone(),
            class: None,
            kind: FunctionKind::Normal,
            sig,
            params,
            locals: ctx.locals,
            is_virtual: false,
            is_override: false,
            is_const: false,
            is_pure: false,
            implicit: None,
            trivial: false,
            inits: Vec::new(),
            body: None,
            loc,
        };
        let fid = self.new_function(m)?;
        self.free.entry(f.name.clone()).or_default().push(fid);
        if f.body.is_some() {
            self.pending.push((fid, f.clone()));
        }
        Ok(())
    }

    fn declare_global(&mut self, v: &a::VarDecl) -> R<()> {
        let loc = loc_of(&v.span);
        if self.global_idx.contains_key(&v.name) {
            return terr(format!("redefinition of '{}'", v.name), &loc);
        }
        let mut ty = self.resolve_type(&v.ty, &loc)?;
        ty = complete_array(ty, v.init.as_ref());
        if ty.is_void() {
            return terr(format!("variable '{}' has type void", v.name), &loc);
        }
        let mut ctx = FnCtx::new(None, "");
        self.global_idx.insert(v.name.clone(), self.globals.len());
        self.globals.push(t::Global { name: v.name.clone(), ty: ty.clone(), init: None, loc: loc.clone() });
        let init = match &v.init {
            Some(_) => self.init(&mut ctx, &ty, v.init.as_ref(), &loc)?,
            None => {
                if ty.is_reference() {
                    return terr(format!("reference '{}' must be initialized", v.name), &loc);
                }
                self.default_init(&ty, &loc)?.map(|f| Init::Ctor { func: f, args: vec![] })
            }
        };
        if !ctx.locals.is_empty() {
            return terr("global initializer needs a temporary", &loc);
        }
        let i = self.global_idx[&v.name];
        self.globals[i].init = init;
        Ok(())
    }

    // ------------------------------------------------- implicit members

    fn copy_ctor_of(&self, class: &str) -> Option<FuncId> {
        self.ctors(class).find(|m| {
            let p = &self.functions[m.0].sig.params;
            p.len() == 1 && matches!(&p[0], TypeRepr::LRef(i) if i.class_name() == Some(class))
        })
    }

    fn move_ctor_of(&self, class: &str) -> Option<FuncId> {
        self.ctors(class).find(|m| {
            let p = &self.functions[m.0].sig.params;
            p.len() == 1 && matches!(&p[0], TypeRepr::RRef(i) if i.class_name() == Some(class))
        })
    }

    fn default_ctor_of(&self, class: &str) -> Option<FuncId> {
        self.ctors(class).find(|m| self.functions[m.0].sig.params.is_empty())
    }

    /// The constructor to run when an object of `ty` is created without an
    /// initializer; errors when a class has no default constructor.
    fn default_init(&self, ty: &TypeRepr, loc: &SourceLocation) -> R<Option<FuncId>> {
        let elem = match ty.array_elem() {
            Some((e, _)) => e,
            None => ty,
        };
        match elem.class_name() {
            Some(c) => match self.default_ctor_of(c) {
                Some(f) => Ok(Some(f)),
                None => terr(format!("no default constructor for '{c}'"), loc),
            },
            None => Ok(None),
        }
    }

    fn needs_dtor(&self, ty: &TypeRepr) -> bool {
        let elem = match ty.array_elem() {
            Some((e, _)) => e,
            None => ty,
        };
        elem.class_name().is_some_and(|c| self.class(c).dtor.is_some())
    }

    fn synthesize_implicit(&mut self, class: &str, loc: &SourceLocation) -> R<()> {
        let ci = self.class(class).clone();
        let this_ty = TypeRepr::Class(class.to_string());
        let user_dtor = ci.dtor.is_some();
        let has_ctor = self.ctors(class).next().is_some();
        let user_copy = self.copy_ctor_of(class).is_some();
        let user_move = self.move_ctor_of(class).is_some();
        let mk = |name: &str, kind: FunctionKind, params: Vec<TypeRepr>, implicit: ImplicitKind| t::MethodInfo {
            id: Self::method_id(class, kind, name, &params, false),
            name: name.to_string(),
            class: Some(class.to_string()),
            kind,
            sig: FunctionType { params: params.clone(), ret: Box::new(TypeRepr::Void), throw_spec: ThrowSpec::Unspecified },
            params: Vec::new(),
            locals: Vec::new(),
            is_virtual: false,
            is_override: false,
            is_const: false,
            is_pure: false,
            implicit: Some(implicit),
            trivial: false,
            inits: Vec::new(),
            body: Some(t::Block { stmts: vec![], loc: loc.clone(), end: loc.clone() }),
            loc: loc.clone(),
        };
        if !has_ctor {
            let mut m = mk(class, FunctionKind::Constructor, vec![], ImplicitKind::DefaultCtor);
            let mut trivial = !ci.polymorphic;
            for b in &ci.bases {
                let Some(bc) = self.default_ctor_of(b) else {
                    return terr(format!("no default constructor for base '{b}' of '{class}'"), loc);
                };
                trivial &= self.functions[bc.0].trivial;
                m.inits.push(CtorInit::Base { class: b.clone(), init: Init::Ctor { func: bc, args: vec![] } });
            }
            for f in &ci.fields {
                if let Some(i) = &f.default_init {
                    trivial = false;
                    m.inits.push(CtorInit::Field { name: f.name.clone(), init: i.clone() });
                } else if let Some(fc) = self.default_init(&f.ty, &f.loc)? {
                    trivial &= self.functions[fc.0].trivial;
                    m.inits.push(CtorInit::Field { name: f.name.clone(), init: Init::Ctor { func: fc, args: vec![] } });
                }
            }
            m.trivial = trivial;
            let id = self.new_function(m)?;
            self.class_mut(class).methods.push(id);
        }
        let const_ref = TypeRepr::LRef(Box::new(TypeRepr::qualified(Cv::CONST, this_ty.clone())));
        let rref = TypeRepr::RRef(Box::new(this_ty.clone()));
        let copies = [(!user_copy, const_ref, ImplicitKind::CopyCtor), (!user_copy && !user_move && !user_dtor, rref, ImplicitKind::MoveCtor)];
        for (wanted, pty, kind) in copies {
            if !wanted {
                continue;
            }
            let mut m = mk(class, FunctionKind::Constructor, vec![pty.clone()], kind);
            let other = VarId(0);
            m.params = vec![other];
            m.locals = vec![t::LocalVar { name: "other".into(), ty: pty.clone(), is_param: true, loc: loc.clone() }];
            let other_expr = t::Expr::new(t::ExprKind::Local(other), this_ty.clone(), Category::LValue, loc.clone());
            let wrap = |e: t::Expr| -> t::Expr {
                if kind == ImplicitKind::MoveCtor {
                    let ty = e.ty.clone();
                    t::Expr::new(t::ExprKind::Move(Box::new(e)), ty, Category::XValue, loc.clone())
                } else {
                    e
                }
            };
            for b in &ci.bases {
                let sub = t::Expr::new(
                    t::ExprKind::BaseSub { obj: Box::new(other_expr.clone()), base: b.clone() },
                    TypeRepr::Class(b.clone()),
                    Category::LValue,
                    loc.clone(),
                );
                let init = self.class_init_from(b, wrap(sub), loc)?;
                m.inits.push(CtorInit::Base { class: b.clone(), init });
            }
            for f in &ci.fields {
                let fe = t::Expr::new(
                    t::ExprKind::Field { obj: Box::new(other_expr.clone()), class: class.to_string(), field: f.name.clone() },
                    unqual(&f.ty),
                    Category::LValue,
                    loc.clone(),
                );
                let init = match f.ty.class_name() {
                    Some(fc) => self.class_init_from(fc, wrap(fe), loc)?,
                    None => Init::Expr(fe),
                };
                m.inits.push(CtorInit::Field { name: f.name.clone(), init });
            }
            let id = self.new_function(m)?;
            self.class_mut(class).methods.push(id);
        }
        if !user_dtor {
            let base_virtual = ci.bases.iter().any(|b| self.class(b).dtor.is_some_and(|d| self.functions[d.0].is_virtual));
            let needs = base_virtual || ci.bases.iter().any(|b| self.class(b).dtor.is_some()) || ci.fields.iter().any(|f| self.needs_dtor(&f.ty));
            if needs {
                let mut m = mk(class, FunctionKind::Destructor, vec![], ImplicitKind::Dtor);
                m.name = format!("~{class}");
                m.id = Self::method_id(class, FunctionKind::Destructor, class, &[], false);
                m.is_virtual = base_virtual;
                m.is_override = base_virtual;
                m.trivial = !base_virtual && !ci.polymorphic;
                let id = self.new_function(m)?;
                let c = self.class_mut(class);
                c.methods.push(id);
                c.dtor = Some(id);
            }
        }
        Ok(())
    }

    /// Initializes an object of class `class` from one expression
    /// (copy-initialization).
    fn class_init_from(&self, class: &str, e: t::Expr, loc: &SourceLocation) -> R<Init> {
        if e.cat == Category::PRValue && e.ty.class_name() == Some(class) {
            return Ok(Init::Expr(e));
        }
        let cands: Vec<FuncId> = self.ctors(class).collect();
        let f = self.resolve_overload(&cands, std::slice::from_ref(&e), class, loc)?;
        let args = self.make_args(f, vec![e], loc)?;
        Ok(Init::Ctor { func: f, args })
    }

    // ------------------------------------------------------------ bodies

    fn check_body(&mut self, id: FuncId, decl: &a::FunctionDecl) -> R<()> {
        let m = self.functions[id.0].clone();
        let mut ctx = FnCtx::new(m.class.clone(), &m.name);
        ctx.locals = m.locals.clone();
        for (i, p) in m.params.iter().enumerate() {
            let name = decl.params[i].name.clone().unwrap_or_else(|| format!("$param{i}"));
            ctx.scopes[0].insert(name.clone(), *p);
            *ctx.used_names.entry(name).or_insert(0) += 1;
        }
        ctx.ret = (*m.sig.ret).clone();
        ctx.kind = m.kind;
        let mut inits = Vec::new();
        if m.kind == FunctionKind::Constructor {
            inits = self.ctor_inits(&mut ctx, &m, decl)?;
        } else if !decl.init_list.is_empty() {
            return terr("only constructors have initializer lists", &m.loc);
        }
        let body = match &decl.body {
            Some(b) => {
                ctx.scopes.push(HashMap::new());
                let b = self.block(&mut ctx, b)?;
                Some(b)
            }
            None => None,
        };
        let mf = &mut self.functions[id.0];
        mf.locals = ctx.locals;
        mf.inits = inits;
        mf.body = body;
        Ok(())
    }

    fn ctor_inits(&mut self, ctx: &mut FnCtx, m: &t::MethodInfo, decl: &a::FunctionDecl) -> R<Vec<CtorInit>> {
        let class = m.class.clone().expect("constructor has a class");
        let ci = self.class(&class).clone();
        let mut given: HashMap<String, &a::MemInit> = HashMap::new();
        for mi in &decl.init_list {
            let ml = loc_of(&mi.span);
            let a::TypeExpr::Named { name, .. } = &mi.name else {
                return terr("invalid member initializer", &ml);
            };
            if name == &class {
                return terr("delegating constructors are not supported", &ml);
            }
            if !ci.bases.contains(name) && !ci.fields.iter().any(|f| &f.name == name) {
                return terr(format!("'{name}' is not a base or member of '{class}'"), &ml);
            }
            if given.insert(name.clone(), mi).is_some() {
                return terr(format!("'{name}' initialized twice"), &ml);
            }
        }
        let mut out = Vec::new();
        for b in &ci.bases {
            let bt = TypeRepr::Class(b.clone());
            let init = match given.get(b) {
                Some(mi) => {
                    let init = if mi.brace { a::Initializer::Brace(mi.args.clone()) } else { a::Initializer::Paren(mi.args.clone()) };
                    self.init(ctx, &bt, Some(&init), &loc_of(&mi.span))?.expect("class init")
                }
                None => match self.default_ctor_of(b) {
                    Some(f) => Init::Ctor { func: f, args: vec![] },
                    None => return terr(format!("no default constructor for base '{b}'"), &m.loc),
                },
            };
            out.push(CtorInit::Base { class: b.clone(), init });
        }
        for f in &ci.fields {
            let init = match given.get(&f.name) {
                Some(mi) => {
                    let init = if mi.brace { a::Initializer::Brace(mi.args.clone()) } else { a::Initializer::Paren(mi.args.clone()) };
                    self.init(ctx, &f.ty, Some(&init), &loc_of(&mi.span))?
                }
                None => match &f.default_init {
                    Some(i) => Some(i.clone()),
                    None => self.default_init(&f.ty, &f.loc)?.map(|c| Init::Ctor { func: c, args: vec![] }),
                },
            };
            if let Some(init) = init {
                out.push(CtorInit::Field { name: f.name.clone(), init });
            }
        }
        Ok(out)
    }

    fn block(&mut self, ctx: &mut FnCtx, b: &a::Block) -> R<t::Block> {
        let mut stmts = Vec::new();
        for s in &b.stmts {
            match self.stmt(ctx, s) {
                Ok(mut s) => stmts.append(&mut s),
                Err(e) => {
                    ctx.scopes.pop();
                    return Err(e);
                }
            }
        }
        ctx.scopes.pop();
        Ok(t::Block { stmts, loc: loc_of(&b.span), end: loc_of(&b.end) })
    }

    fn scoped(&mut self, ctx: &mut FnCtx, s: &a::Stmt) -> R<t::Block> {
        ctx.scopes.push(HashMap::new());
        match &s.kind {
            a::StmtKind::Block(b) => self.block(ctx, b),
            _ => {
                let r = self.stmt(ctx, s);
                ctx.scopes.pop();
                Ok(t::Block { stmts: r?, loc: loc_of(&s.span), end: loc_of(&s.span) })
            }
        }
    }

    fn cond(&mut self, ctx: &mut FnCtx, e: &a::Expr) -> R<t::Expr> {
        let e = self.expr(ctx, e)?;
        self.to_bool(e)
    }

    fn stmt(&mut self, ctx: &mut FnCtx, s: &a::Stmt) -> R<Vec<t::Stmt>> {
        let loc = loc_of(&s.span);
        let kind = match &s.kind {
            a::StmtKind::Decl(ds) => {
                let mut out = Vec::new();
                for d in ds {
                    out.push(self.local_decl(ctx, d)?);
                }
                return Ok(out);
            }
            a::StmtKind::Expr(e) => {
                if let a::ExprKind::Call { callee, args } = &e.kind {
                    if let a::ExprKind::Name { name, template_args: None } = &callee.kind {
                        if ctx.lookup(name).is_none() && (name == "assert" || name == "__ESBMC_assume" || name == "__VERIFIER_assume") {
                            let [arg] = args.as_slice() else {
                                return terr(format!("'{name}' takes exactly one argument"), &loc);
                            };
                            let cond = self.cond(ctx, arg)?;
                            let kind = if name == "assert" {
                                {
                                    let comment = display_expr(&self.functions, &ctx.locals, &cond);
                                    t::StmtKind::Assert { cond, comment }
                                }
                            } else {
                                t::StmtKind::Assume(cond)
                            };
                            return Ok(vec![t::Stmt { kind, loc }]);
                        }
                    }
                }
                t::StmtKind::Expr(self.expr(ctx, e)?)
            }
            a::StmtKind::If { cond, then, els } => {
                let cond = self.cond(ctx, cond)?;
                let then = self.scoped(ctx, then)?;
                let els = match els {
                    Some(e) => Some(self.scoped(ctx, e)?),
                    None => None,
                };
                t::StmtKind::If { cond, then, els }
            }
            a::StmtKind::While { cond, body } => {
                let cond = self.cond(ctx, cond)?;
                ctx.loops += 1;
                let body = self.scoped(ctx, body);
                ctx.loops -= 1;
                t::StmtKind::While { cond, body: body? }
            }
            a::StmtKind::DoWhile { body, cond } => {
                ctx.loops += 1;
                let body = self.scoped(ctx, body);
                ctx.loops -= 1;
                t::StmtKind::DoWhile { body: body?, cond: self.cond(ctx, cond)? }
            }
            a::StmtKind::For { init, cond, step, body } => {
                ctx.scopes.push(HashMap::new());
                let r = (|| -> R<t::StmtKind> {
                    let init = match init {
                        Some(i) => self.stmt(ctx, i)?,
                        None => vec![],
                    };
                    let cond = match cond {
                        Some(c) => Some(self.cond(ctx, c)?),
                        None => None,
                    };
                    let step = match step {
                        Some(c) => Some(self.expr(ctx, c)?),
                        None => None,
                    };
                    ctx.loops += 1;
                    let body = self.scoped(ctx, body);
                    ctx.loops -= 1;
                    Ok(t::StmtKind::For { init, cond, step, body: body? })
                })();
                ctx.scopes.pop();
                r?
            }
            a::StmtKind::Return(e) => {
                let ret = ctx.ret.clone();
                match e {
                    None => {
                        if !ret.is_void() {
                            return terr("non-void function must return a value", &loc);
                        }
                        t::StmtKind::Return(None)
                    }
                    Some(e) => {
                        if ret.is_void() {
                            let te = self.expr(ctx, e)?;
                            if !te.ty.is_void() {
                                return terr("void function cannot return a value", &loc);
                            }
                            return Ok(vec![t::Stmt { kind: t::StmtKind::Expr(te), loc: loc.clone() }, t::Stmt { kind: t::StmtKind::Return(None), loc }]);
                        }
                        let init = self.init(ctx, &ret, Some(&a::Initializer::Assign(e.clone())), &loc)?;
                        t::StmtKind::Return(init)
                    }
                }
            }
            a::StmtKind::Break | a::StmtKind::Continue => {
                if ctx.loops == 0 {
                    return terr("break or continue outside a loop", &loc);
                }
                if matches!(s.kind, a::StmtKind::Break) {
                    t::StmtKind::Break
                } else {
                    t::StmtKind::Continue
                }
            }
            a::StmtKind::Block(b) => {
                ctx.scopes.push(HashMap::new());
                t::StmtKind::Block(self.block(ctx, b)?)
            }
            a::StmtKind::Try { body, handlers } => {
                ctx.scopes.push(HashMap::new());
                let body = self.block(ctx, body)?;
                let mut hs = Vec::new();
                for h in handlers {
                    let hl = loc_of(&h.span);
                    ctx.scopes.push(HashMap::new());
                    let (ty, var) = match &h.param {
                        None => (None, None),
                        Some(p) => {
                            let pl = loc_of(&p.span);
                            let ty = match self.resolve_type(&p.ty, &pl) {
                                Ok(t) => t,
                                Err(e) => {
                                    ctx.scopes.pop();
                                    return Err(e);
                                }
                            };
                            if ty.is_void() || ty.is_rvalue_ref() {
                                ctx.scopes.pop();
                                return terr("invalid handler type", &pl);
                            }
                            let var = match &p.name {
                                Some(n) => Some(ctx.declare(n, ty.clone(), false, &pl)?),
                                None => None,
                            };
                            (Some(ty), var)
                        }
                    };
                    let body = self.block(ctx, &h.body)?;
                    hs.push(t::Handler { ty, var, body, loc: hl });
                }
                t::StmtKind::Try { body, handlers: hs }
            }
            a::StmtKind::Throw(e) => match e {
                None => t::StmtKind::Throw(None),
                Some(e) => {
                    let te = self.expr(ctx, e)?;
                    if te.ty.is_void() {
                        return terr("cannot throw a void expression", &loc);
                    }
                    t::StmtKind::Throw(Some(te))
                }
            },
            a::StmtKind::Delete { expr, array } => {
                let e = self.rvalue(ctx, expr)?;
                let Some(pointee) = e.ty.pointee().cloned() else {
                    return terr(format!("cannot delete expression of type '{}'", e.ty), &loc);
                };
                let (dtor, is_virtual) = match pointee.class_name() {
                    Some(c) => match self.class(c).dtor {
                        Some(d) => (Some(d), self.functions[d.0].is_virtual),
                        None => (None, false),
                    },
                    None => (None, false),
                };
                t::StmtKind::Delete { expr: e, array: *array, dtor, is_virtual }
            }
            a::StmtKind::Empty => return Ok(vec![]),
        };
        Ok(vec![t::Stmt { kind, loc }])
    }

    fn local_decl(&mut self, ctx: &mut FnCtx, d: &a::VarDecl) -> R<t::Stmt> {
        let loc = loc_of(&d.span);
        let ty = complete_array(self.resolve_type(&d.ty, &loc)?, d.init.as_ref());
        if ty.is_void() || ty.function().is_some() {
            return terr(format!("variable '{}' has invalid type", d.name), &loc);
        }
        if matches!(ty.array_elem(), Some((_, None))) {
            return terr(format!("array '{}' needs a size", d.name), &loc);
        }
        let var = ctx.declare(&d.name, ty.clone(), false, &loc)?;
        let (init, default_ctor) = match &d.init {
            Some(_) => (self.init(ctx, &ty, d.init.as_ref(), &loc)?, None),
            None => {
                if ty.is_reference() {
                    return terr(format!("reference '{}' must be initialized", d.name), &loc);
                }
                (None, self.default_init(&ty, &loc)?)
            }
        };
        Ok(t::Stmt { kind: t::StmtKind::Decl { var, init, default_ctor }, loc })
    }

    /// Checks an initializer for an object of type `ty`. `None` input means
    /// default-initialization and yields `None`.
    fn init(&mut self, ctx: &mut FnCtx, ty: &TypeRepr, init: Option<&a::Initializer>, loc: &SourceLocation) -> R<Option<Init>> {
        let Some(init) = init else { return Ok(None) };
        if ty.is_reference() {
            let e = match init {
                a::Initializer::Assign(e) => e,
                a::Initializer::Paren(v) | a::Initializer::Brace(v) if v.len() == 1 => &v[0],
                _ => return terr("reference initializer needs exactly one expression", loc),
            };
            let te = self.expr(ctx, e)?;
            return Ok(Some(self.bind_ref(te, ty, loc)?));
        }
        if let Some((elem, n)) = ty.array_elem() {
            let items = match init {
                a::Initializer::Brace(v) => v,
                a::Initializer::Assign(a::Expr { kind: a::ExprKind::InitList(v), .. }) => v,
                _ => return terr("array must be initialized with a brace list", loc),
            };
            if n.is_some_and(|n| items.len() as u64 > n) {
                return terr("too many initializers for array", loc);
            }
            let mut out = Vec::new();
            for it in items {
                let i = self.init(ctx, elem, Some(&a::Initializer::Assign(it.clone())), &loc_of(&it.span))?;
                out.push(i.expect("element init"));
            }
            return Ok(Some(Init::Aggregate(out)));
        }
        if let Some(class) = ty.class_name().map(str::to_string) {
            let ci = self.class(&class).clone();
            let (args, brace) = match init {
                a::Initializer::Assign(a::Expr { kind: a::ExprKind::InitList(v), .. }) => (v.clone(), true),
                a::Initializer::Assign(e) => {
                    let te = self.expr(ctx, e)?;
                    return Ok(Some(self.class_init_from(&class, te, loc)?));
                }
                a::Initializer::Paren(v) => (v.clone(), false),
                a::Initializer::Brace(v) => (v.clone(), true),
            };
            if brace && ci.aggregate {
                if args.len() > ci.fields.len() {
                    return terr(format!("too many initializers for '{class}'"), loc);
                }
                let mut out = Vec::new();
                for (f, it) in ci.fields.iter().zip(&args) {
                    let i = self.init(ctx, &f.ty, Some(&a::Initializer::Assign(it.clone())), &loc_of(&it.span))?;
                    out.push(i.expect("field init"));
                }
                return Ok(Some(Init::Aggregate(out)));
            }
            let mut targs = Vec::new();
            for x in &args {
                targs.push(self.expr(ctx, x)?);
            }
            if targs.len() == 1 && targs[0].cat == Category::PRValue && targs[0].ty.class_name() == Some(&class) {
                return Ok(Some(Init::Expr(targs.pop().expect("one"))));
            }
            let cands: Vec<FuncId> = self.ctors(&class).collect();
            let f = self.resolve_overload(&cands, &targs, &class, loc)?;
            let args = self.make_args(f, targs, loc)?;
            return Ok(Some(Init::Ctor { func: f, args }));
        }
        // scalar
        let e = match init {
            a::Initializer::Assign(a::Expr { kind: a::ExprKind::InitList(v), .. }) | a::Initializer::Brace(v) => match v.as_slice() {
                [] => return Ok(Some(Init::Zero)),
                [e] => e,
                _ => return terr("too many initializers for scalar", loc),
            },
            a::Initializer::Assign(e) => e,
            a::Initializer::Paren(v) => match v.as_slice() {
                [e] => e,
                _ => return terr("scalar initializer needs exactly one expression", loc),
            },
        };
        let te = self.rvalue(ctx, e)?;
        Ok(Some(Init::Expr(self.convert(te, ty)?)))
    }

    // ------------------------------------------------------ expressions

    fn mk(&self, kind: t::ExprKind, ty: TypeRepr, cat: Category, loc: &SourceLocation) -> t::Expr {
        t::Expr::new(kind, ty, cat, loc.clone())
    }

    /// Checks `e` and applies array-to-pointer and function-to-pointer decay.
    fn rvalue(&mut self, ctx: &mut FnCtx, e: &a::Expr) -> R<t::Expr> {
        let te = self.expr(ctx, e)?;
        Ok(self.decay(te))
    }

    fn decay(&self, e: t::Expr) -> t::Expr {
        let loc = e.loc.clone();
        if let Some((elem, _)) = e.ty.array_elem() {
            let ty = TypeRepr::pointer(elem.clone());
            return self.mk(t::ExprKind::Convert(Conversion::ArrayDecay, Box::new(e)), ty, Category::PRValue, &loc);
        }
        if e.ty.function().is_some() {
            let ty = TypeRepr::pointer(e.ty.clone());
            return self.mk(t::ExprKind::Convert(Conversion::FuncToPtr, Box::new(e)), ty, Category::PRValue, &loc);
        }
        e
    }

    fn to_bool(&self, e: t::Expr) -> R<t::Expr> {
        let e = self.decay(e);
        if e.ty.is_float() {
            return terr("floating-point arithmetic is not supported", &e.loc);
        }
        if matches!(e.ty.strip_cv(), TypeRepr::Bool) {
            return Ok(e);
        }
        if !e.ty.is_scalar() {
            return terr(format!("value of type '{}' is not contextually convertible to bool", e.ty), &e.loc);
        }
        let loc = e.loc.clone();
        Ok(self.mk(t::ExprKind::Convert(Conversion::ToBool, Box::new(e)), bool_ty(), Category::PRValue, &loc))
    }

    /// Integer promotion to the configured int width.
    fn promote(&self, e: t::Expr) -> R<t::Expr> {
        if e.ty.is_float() {
            return terr("floating-point arithmetic is not supported", &e.loc);
        }
        if !e.ty.is_integral() {
            return terr(format!("arithmetic on value of type '{}'", e.ty), &e.loc);
        }
        self.convert(e, &self.int())
    }

    /// Implicit (or, with `explicit`, static_cast) scalar conversion.
    fn convert_ex(&self, e: t::Expr, target: &TypeRepr, explicit: bool) -> R<t::Expr> {
        let e = self.decay(e);
        let loc = e.loc.clone();
        let tgt = unqual(target);
        if e.ty.is_float() || tgt.is_float() {
            if same_type(&e.ty, &tgt) {
                return Ok(e);
            }
            return terr("floating-point arithmetic is not supported", &loc);
        }
        if same_type(&e.ty, &tgt) {
            return Ok(e);
        }
        let wrap = |c: Conversion, e: t::Expr| self.mk(t::ExprKind::Convert(c, Box::new(e)), tgt.clone(), Category::PRValue, &loc);
        match (&e.ty.strip_cv().clone(), &tgt) {
            (_, TypeRepr::Bool) if e.ty.is_scalar() => Ok(wrap(Conversion::ToBool, e)),
            (s, d) if s.is_integral() && d.is_integral() => {
                if let (t::ExprKind::Int(v), TypeRepr::Int(w)) = (&e.kind, d) {
                    // fold literal conversions
                    return Ok(self.mk(t::ExprKind::Int(wrap_int(*v, *w)), tgt.clone(), Category::PRValue, &loc));
                }
                Ok(wrap(Conversion::Integral, e))
            }
            (TypeRepr::NullPtr, TypeRepr::Pointer(_)) => Ok(wrap(Conversion::NullToPtr, e)),
            (TypeRepr::Int(_), TypeRepr::Pointer(_)) if matches!(e.kind, t::ExprKind::Int(0)) => Ok(wrap(Conversion::NullToPtr, e)),
            (TypeRepr::Pointer(s), TypeRepr::Pointer(d)) => {
                if let (Some(sc), Some(dc)) = (s.class_name(), d.class_name()) {
                    if sc != dc {
                        if let Some(path) = self.base_path(sc, dc) {
                            if !s.cv().is_subset_of(d.cv()) && !explicit {
                                return terr(format!("conversion from '{}' to '{}' drops qualifiers", e.ty, tgt), &loc);
                            }
                            return Ok(wrap(Conversion::PtrUpcast(path), e));
                        }
                        if explicit {
                            if let Some(path) = self.base_path(dc, sc) {
                                return Ok(wrap(Conversion::PtrDowncast(path), e));
                            }
                        }
                        return terr(format!("cannot convert '{}' to '{}'", e.ty, tgt), &loc);
                    }
                }
                if d.is_void() && (explicit || s.cv().is_subset_of(d.cv())) {
                    return Ok(wrap(Conversion::PtrBitcast, e));
                }
                if s.is_void() && explicit {
                    return Ok(wrap(Conversion::PtrBitcast, e));
                }
                if qualification_convertible(s, d) || (explicit && same_type(s, d)) {
                    return Ok(wrap(Conversion::PtrBitcast, e));
                }
                terr(format!("cannot convert '{}' to '{}'", e.ty, tgt), &loc)
            }
            _ => terr(format!("cannot convert '{}' to '{}'", e.ty, tgt), &loc),
        }
    }

    fn convert(&self, e: t::Expr, target: &TypeRepr) -> R<t::Expr> {
        self.convert_ex(e, target, false)
    }

    /// Cost of passing `e` for a parameter of type `p`, or `None` when not
    /// viable.
    fn conversion_cost(&self, e: &t::Expr, p: &TypeRepr) -> Option<u32> {
        let class_rel = |from: &TypeRepr, to: &TypeRepr| -> Option<u32> {
            match (from.class_name(), to.class_name()) {
                (Some(f), Some(t)) if f == t => Some(0),
                (Some(f), Some(t)) if self.is_base_of(t, f) => Some(1),
                _ => None,
            }
        };
        match p {
            TypeRepr::LRef(inner) => {
                let const_ref = inner.is_const();
                if e.cat == Category::LValue {
                    if let Some(c) = class_rel(&e.ty, inner) {
                        return Some(c);
                    }
                    if same_type(&e.ty, inner) {
                        return Some(0);
                    }
                }
                if !const_ref {
                    return None;
                }
                if let Some(c) = class_rel(&e.ty, inner) {
                    return Some(c + 1);
                }
                self.value_cost(e, inner).map(|c| c + 1)
            }
            TypeRepr::RRef(inner) => {
                if e.cat == Category::LValue {
                    return None;
                }
                if let Some(c) = class_rel(&e.ty, inner) {
                    return Some(c);
                }
                self.value_cost(e, inner)
            }
            _ => {
                if p.class_name().is_some() {
                    return class_rel(&e.ty, p);
                }
                self.value_cost(e, p)
            }
        }
    }

    fn value_cost(&self, e: &t::Expr, p: &TypeRepr) -> Option<u32> {
        if p.class_name().is_some() || e.ty.class_name().is_some() {
            return None;
        }
        let e = self.decay(e.clone());
        if same_type(&e.ty, p) {
            return Some(0);
        }
        if e.ty.is_integral() && matches!(p.strip_cv(), TypeRepr::Int(_)) && matches!(e.ty.strip_cv(), TypeRepr::Char | TypeRepr::Bool) {
            return Some(1);
        }
        self.convert(e, p).ok().map(|_| 2)
    }

    fn resolve_overload(&self, cands: &[FuncId], args: &[t::Expr], what: &str, loc: &SourceLocation) -> R<FuncId> {
        let mut best: Option<(u32, FuncId)> = None;
        let mut tie = false;
        for &c in cands {
            let ps = &self.functions[c.0].sig.params;
            if ps.len() != args.len() {
                continue;
            }
            let mut total = 0;
            let mut ok = true;
            for (a, p) in args.iter().zip(ps) {
                match self.conversion_cost(a, p) {
                    Some(k) => total += k,
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            if !ok {
                continue;
            }
            match best {
                None => best = Some((total, c)),
                Some((b, _)) if total < b => {
                    best = Some((total, c));
                    tie = false;
                }
                Some((b, _)) if total == b => tie = true,
                _ => {}
            }
        }
        match best {
            Some((_, f)) if !tie => Ok(f),
            Some(_) => terr(format!("call to '{what}' is ambiguous"), loc),
            None => {
                let tys: Vec<String> = args.iter().map(|a| a.ty.source_name()).collect();
                terr(format!("no matching function for call to '{what}' with arguments ({})", tys.join(", ")), loc)
            }
        }
    }

    fn make_args(&self, f: FuncId, args: Vec<t::Expr>, loc: &SourceLocation) -> R<Vec<Init>> {
        let ps = self.functions[f.0].sig.params.clone();
        self.args_for(&ps, args, loc)
    }

    fn args_for(&self, ps: &[TypeRepr], args: Vec<t::Expr>, loc: &SourceLocation) -> R<Vec<Init>> {
        if ps.len() != args.len() {
            return terr(format!("expected {} argument(s), got {}", ps.len(), args.len()), loc);
        }
        let mut out = Vec::new();
        for (p, a) in ps.iter().zip(args) {
            out.push(self.param_init(p, a, loc)?);
        }
        Ok(out)
    }

    fn param_init(&self, p: &TypeRepr, a: t::Expr, loc: &SourceLocation) -> R<Init> {
        if p.is_reference() {
            return self.bind_ref(a, p, loc);
        }
        if let Some(c) = p.class_name() {
            let a = self.upcast_object(a, c)?;
            return self.class_init_from(c, a, loc);
        }
        Ok(Init::Expr(self.convert(a, p)?))
    }

    /// Views a class glvalue as its base subobject of class `to`.
    fn upcast_object(&self, e: t::Expr, to: &str) -> R<t::Expr> {
        let Some(from) = e.ty.class_name().map(str::to_string) else { return Ok(e) };
        if from == to {
            return Ok(e);
        }
        let Some(path) = self.base_path(&from, to) else {
            return terr(format!("'{from}' is not derived from '{to}'"), &e.loc);
        };
        let mut cur = e;
        if cur.cat == Category::PRValue {
            let (ty, loc) = (cur.ty.clone(), cur.loc.clone());
            cur = self.mk(t::ExprKind::Materialize(Box::new(cur)), ty, Category::XValue, &loc);
        }
        for b in &path[1..] {
            let (cat, loc) = (cur.cat, cur.loc.clone());
            cur = self.mk(t::ExprKind::BaseSub { obj: Box::new(cur), base: b.clone() }, TypeRepr::Class(b.clone()), cat, &loc);
        }
        Ok(cur)
    }

    fn bind_ref(&self, e: t::Expr, ref_ty: &TypeRepr, loc: &SourceLocation) -> R<Init> {
        let inner = ref_ty.referent().expect("reference type").clone();
        let rvalue_ref = ref_ty.is_rvalue_ref();
        let const_ref = !rvalue_ref && inner.is_const();
        let compatible = match (e.ty.class_name(), inner.class_name()) {
            (Some(f), Some(t)) => f == t || self.is_base_of(t, f),
            _ => same_type(&e.ty, &inner),
        };
        match e.cat {
            Category::LValue if rvalue_ref => terr(format!("cannot bind rvalue reference of type '{}' to lvalue of type '{}'", ref_ty, e.ty), loc),
            Category::LValue | Category::XValue if compatible => {
                if e.cat == Category::XValue && !rvalue_ref && !const_ref {
                    return terr(format!("cannot bind non-const lvalue reference of type '{ref_ty}' to an rvalue"), loc);
                }
                let e = match inner.class_name() {
                    Some(c) => self.upcast_object(e, c)?,
                    None => e,
                };
                Ok(Init::BindRef(e))
            }
            _ => {
                if !rvalue_ref && !const_ref {
                    if e.cat == Category::LValue {
                        return terr(format!("cannot bind reference of type '{ref_ty}' to a value of type '{}'", e.ty), loc);
                    }
                    return terr(format!("cannot bind non-const lvalue reference of type '{ref_ty}' to a temporary"), loc);
                }
                // bind to a materialized temporary
                let value = match inner.class_name() {
                    Some(c) => {
                        if e.ty.class_name() == Some(c) {
                            e
                        } else {
                            let init = self.class_init_from(c, e, loc)?;
                            self.mk(t::ExprKind::Temp(Box::new(init)), TypeRepr::Class(c.to_string()), Category::PRValue, loc)
                        }
                    }
                    None => self.convert(e, &inner)?,
                };
                let ty = value.ty.clone();
                let m = self.mk(t::ExprKind::Materialize(Box::new(value)), ty, Category::XValue, loc);
                let m = match inner.class_name() {
                    Some(c) => self.upcast_object(m, c)?,
                    None => m,
                };
                Ok(Init::BindRef(m))
            }
        }
    }

    fn var_expr(&self, ty: &TypeRepr, kind: t::ExprKind, loc: &SourceLocation) -> t::Expr {
        let vty = match ty.referent() {
            Some(r) => unqual(r),
            None => unqual(ty),
        };
        self.mk(kind, vty, Category::LValue, loc)
    }

    fn this_expr(&self, ctx: &FnCtx, loc: &SourceLocation) -> R<t::Expr> {
        match &ctx.class {
            Some(c) if ctx.kind != FunctionKind::Normal || !ctx.name.is_empty() => {
                Ok(self.mk(t::ExprKind::This, TypeRepr::pointer(TypeRepr::Class(c.clone())), Category::PRValue, loc))
            }
            _ => terr("'this' used outside a member function", loc),
        }
    }

    fn deref(&self, p: t::Expr) -> R<t::Expr> {
        let p = self.decay(p);
        let loc = p.loc.clone();
        let Some(pointee) = p.ty.pointee().cloned() else {
            return terr(format!("indirection requires a pointer operand ('{}' invalid)", p.ty), &loc);
        };
        if pointee.is_void() {
            return terr("cannot dereference a 'void*'", &loc);
        }
        Ok(self.mk(t::ExprKind::Deref(Box::new(p)), unqual(&pointee), Category::LValue, &loc))
    }

    fn field_lookup(&self, class: &str, name: &str) -> Option<(Vec<String>, TypeRepr)> {
        let c = self.class(class);
        if let Some(f) = c.fields.iter().find(|f| f.name == name) {
            return Some((vec![class.to_string()], f.ty.clone()));
        }
        let mut found = None;
        for b in &c.bases {
            if let Some((mut p, ty)) = self.field_lookup(b, name) {
                if found.is_some() {
                    return None;
                }
                p.insert(0, class.to_string());
                found = Some((p, ty));
            }
        }
        found
    }

    /// Finds the class that declares methods named `name`, searching bases
    /// when `class` has none. Returns that class and its overloads.
    fn method_lookup(&self, class: &str, name: &str, loc: &SourceLocation) -> R<Option<(String, Vec<FuncId>)>> {
        let c = self.class(class);
        let own: Vec<FuncId> = c
            .methods
            .iter()
            .copied()
            .filter(|m| {
                let f = &self.functions[m.0];
                f.kind == FunctionKind::Normal && f.name == name
            })
            .collect();
        if !own.is_empty() {
            return Ok(Some((class.to_string(), own)));
        }
        let mut found: Option<(String, Vec<FuncId>)> = None;
        for b in &c.bases {
            if let Some(r) = self.method_lookup(b, name, loc)? {
                if found.as_ref().is_some_and(|f| f.0 != r.0) {
                    return terr(format!("member '{name}' found in multiple base classes of '{class}'"), loc);
                }
                found = Some(r);
            }
        }
        Ok(found)
    }

    fn field_expr(&self, obj: t::Expr, name: &str, loc: &SourceLocation) -> R<Option<t::Expr>> {
        let Some(class) = obj.ty.class_name().map(str::to_string) else {
            return terr(format!("member reference base type '{}' is not a class", obj.ty), loc);
        };
        let Some((path, fty)) = self.field_lookup(&class, name) else { return Ok(None) };
        let decl = path.last().expect("path").clone();
        let mut cur = obj;
        if cur.cat == Category::PRValue {
            let ty = cur.ty.clone();
            cur = self.mk(t::ExprKind::Materialize(Box::new(cur)), ty, Category::XValue, loc);
        }
        let cat = cur.cat;
        let cur = self.upcast_object(cur, &decl)?;
        Ok(Some(self.mk(t::ExprKind::Field { obj: Box::new(cur), class: decl, field: name.to_string() }, unqual(&fty), cat, loc)))
    }

    fn lit_int(&self, v: u64, loc: &SourceLocation) -> R<t::Expr> {
        let max = (1u64 << (self.width - 1)) - 1;
        if v > max {
            return terr(format!("integer literal {v} does not fit in a {}-bit int", self.width), loc);
        }
        Ok(self.mk(t::ExprKind::Int(v as i64), self.int(), Category::PRValue, loc))
    }

    fn expr(&mut self, ctx: &mut FnCtx, e: &a::Expr) -> R<t::Expr> {
        let loc = loc_of(&e.span);
        Ok(match &e.kind {
            a::ExprKind::Int(v) => self.lit_int(*v, &loc)?,
            a::ExprKind::Char(c) => self.mk(t::ExprKind::Int(*c as i8 as i64), TypeRepr::Char, Category::PRValue, &loc),
            a::ExprKind::Bool(b) => self.mk(t::ExprKind::Bool(*b), bool_ty(), Category::PRValue, &loc),
            a::ExprKind::Null => self.mk(t::ExprKind::Null, TypeRepr::NullPtr, Category::PRValue, &loc),
            a::ExprKind::This => self.this_expr(ctx, &loc)?,
            a::ExprKind::Name { name, template_args } => {
                if template_args.is_some() {
                    return terr(format!("unexpanded template-id '{name}'"), &loc);
                }
                self.name_expr(ctx, name, &loc)?
            }
            a::ExprKind::Unary(op, x) => self.unary(ctx, *op, x, &loc)?,
            a::ExprKind::Binary(op, l, r) => {
                let l = self.rvalue(ctx, l)?;
                let r = self.rvalue(ctx, r)?;
                self.binary(*op, l, r, &loc)?
            }
            a::ExprKind::Assign(op, l, r) => {
                let l = self.expr(ctx, l)?;
                if l.cat != Category::LValue {
                    return terr("expression is not assignable", &loc);
                }
                if l.ty.array_elem().is_some() {
                    return terr("arrays are not assignable", &loc);
                }
                match op {
                    None => {
                        let r = self.expr(ctx, r)?;
                        let r = if let Some(c) = l.ty.class_name() {
                            if r.ty.class_name().is_none() {
                                return terr(format!("cannot assign '{}' to '{}'", r.ty, l.ty), &loc);
                            }
                            self.upcast_object(r, c)?
                        } else {
                            self.convert(r, &l.ty)?
                        };
                        let ty = l.ty.clone();
                        self.mk(t::ExprKind::Assign(Box::new(l), Box::new(r)), ty, Category::LValue, &loc)
                    }
                    Some(op) => {
                        let r = self.rvalue(ctx, r)?;
                        let r = if l.ty.is_pointer() && matches!(op, BinOp::Add | BinOp::Sub) {
                            self.promote(r)?
                        } else {
                            if !l.ty.is_integral() {
                                return terr(format!("invalid compound assignment to '{}'", l.ty), &loc);
                            }
                            if matches!(op, BinOp::And | BinOp::Or) || op.is_comparison() {
                                return terr("invalid compound assignment operator", &loc);
                            }
                            self.promote(r)?
                        };
                        let ty = l.ty.clone();
                        self.mk(t::ExprKind::CompoundAssign(*op, Box::new(l), Box::new(r)), ty, Category::LValue, &loc)
                    }
                }
            }
            a::ExprKind::Cond(c, x, y) => {
                let c = self.cond(ctx, c)?;
                let x = self.expr(ctx, x)?;
                let y = self.expr(ctx, y)?;
                if x.ty.class_name().is_some() || y.ty.class_name().is_some() {
                    if !same_type(&x.ty, &y.ty) {
                        return terr("operands of '?:' have different class types", &loc);
                    }
                    let cat = if x.cat == Category::LValue && y.cat == Category::LValue { Category::LValue } else { Category::PRValue };
                    let ty = x.ty.clone();
                    return Ok(self.mk(t::ExprKind::Cond(Box::new(c), Box::new(x), Box::new(y)), ty, cat, &loc));
                }
                if x.cat == Category::LValue && y.cat == Category::LValue && same_type(&x.ty, &y.ty) {
                    let ty = x.ty.clone();
                    return Ok(self.mk(t::ExprKind::Cond(Box::new(c), Box::new(x), Box::new(y)), ty, Category::LValue, &loc));
                }
                let (x, y) = (self.decay(x), self.decay(y));
                let ty = if same_type(&x.ty, &y.ty) {
                    unqual(&x.ty)
                } else if x.ty.is_integral() && y.ty.is_integral() {
                    self.int()
                } else if x.ty.is_pointer() && matches!(y.ty, TypeRepr::NullPtr) {
                    x.ty.clone()
                } else if y.ty.is_pointer() {
                    y.ty.clone()
                } else {
                    return terr(format!("incompatible operand types '{}' and '{}'", x.ty, y.ty), &loc);
                };
                let x = self.convert(x, &ty)?;
                let y = self.convert(y, &ty)?;
                self.mk(t::ExprKind::Cond(Box::new(c), Box::new(x), Box::new(y)), ty, Category::PRValue, &loc)
            }
            a::ExprKind::Call { callee, args } => self.call(ctx, callee, args, &loc)?,
            a::ExprKind::Member { base, arrow, name } => {
                let obj = if *arrow {
                    let p = self.rvalue(ctx, base)?;
                    self.deref(p)?
                } else {
                    self.expr(ctx, base)?
                };
                match self.field_expr(obj.clone(), name, &loc)? {
                    Some(f) => f,
                    None => {
                        let class = obj.ty.class_name().unwrap_or_default().to_string();
                        if self.method_lookup(&class, name, &loc)?.is_some() {
                            return terr(format!("reference to member function '{name}' must be called"), &loc);
                        }
                        return terr(format!("no member named '{name}' in '{class}'"), &loc);
                    }
                }
            }
            a::ExprKind::Index(x, i) => {
                let x = self.rvalue(ctx, x)?;
                let i = self.rvalue(ctx, i)?;
                if !x.ty.is_pointer() {
                    return terr(format!("subscripted value of type '{}' is not an array or pointer", x.ty), &loc);
                }
                let i = self.promote(i)?;
                let ty = x.ty.clone();
                let p = self.mk(t::ExprKind::PtrAdd { ptr: Box::new(x), offset: Box::new(i), negate: false }, ty, Category::PRValue, &loc);
                self.deref(p)?
            }
            a::ExprKind::New { ty, args, brace, array_len } => {
                let elem = self.resolve_type(ty, &loc)?;
                if elem.is_void() || elem.is_reference() || elem.function().is_some() {
                    return terr(format!("cannot allocate an object of type '{elem}'"), &loc);
                }
                let elem = unqual(&elem);
                if let Some(c) = elem.class_name() {
                    if self.is_abstract(c) {
                        return terr(format!("cannot allocate an object of abstract class '{c}'"), &loc);
                    }
                }
                let count = match array_len {
                    Some(n) => {
                        let n = self.rvalue(ctx, n)?;
                        Some(Box::new(self.promote(n)?))
                    }
                    None => None,
                };
                let init = if count.is_some() {
                    if args.is_some() {
                        return terr("array new with an initializer is not supported", &loc);
                    }
                    self.default_init(&elem, &loc)?.map(|f| Init::Ctor { func: f, args: vec![] })
                } else {
                    match args {
                        None => self.default_init(&elem, &loc)?.map(|f| Init::Ctor { func: f, args: vec![] }),
                        Some(v) if v.is_empty() && elem.class_name().is_none() => Some(Init::Zero),
                        Some(v) => {
                            let i = if *brace { a::Initializer::Brace(v.clone()) } else { a::Initializer::Paren(v.clone()) };
                            match (elem.class_name(), v.is_empty()) {
                                (Some(_), true) => {
                                    let f = self.default_init(&elem, &loc)?.expect("class default ctor");
                                    Some(Init::Ctor { func: f, args: vec![] })
                                }
                                _ => self.init(ctx, &elem, Some(&i), &loc)?,
                            }
                        }
                    }
                };
                let pty = TypeRepr::pointer(elem.clone());
                self.mk(t::ExprKind::New { elem, count, init: init.map(Box::new) }, pty, Category::PRValue, &loc)
            }
            a::ExprKind::Move(x) => {
                let x = self.expr(ctx, x)?;
                if x.cat == Category::PRValue {
                    x
                } else {
                    let ty = x.ty.clone();
                    self.mk(t::ExprKind::Move(Box::new(x)), ty, Category::XValue, &loc)
                }
            }
            a::ExprKind::Construct { ty, args, brace } => {
                let target = unqual(&self.resolve_type(ty, &loc)?);
                if let Some(c) = target.class_name() {
                    if self.is_abstract(c) {
                        return terr(format!("cannot create an object of abstract class '{c}'"), &loc);
                    }
                    let init = if args.is_empty() {
                        if *brace && self.class(c).aggregate {
                            Init::Aggregate(vec![])
                        } else {
                            match self.default_ctor_of(c) {
                                Some(f) => Init::Ctor { func: f, args: vec![] },
                                None => return terr(format!("no default constructor for '{c}'"), &loc),
                            }
                        }
                    } else {
                        let i = if *brace { a::Initializer::Brace(args.clone()) } else { a::Initializer::Paren(args.clone()) };
                        self.init(ctx, &target, Some(&i), &loc)?.expect("class init")
                    };
                    if let Init::Expr(e) = init {
                        return Ok(e);
                    }
                    self.mk(t::ExprKind::Temp(Box::new(init)), target, Category::PRValue, &loc)
                } else {
                    match args.as_slice() {
                        [] => self.zero_value(&target, &loc)?,
                        [x] => {
                            let x = self.rvalue(ctx, x)?;
                            self.convert_ex(x, &target, true)?
                        }
                        _ => return terr("too many arguments in functional cast", &loc),
                    }
                }
            }
            a::ExprKind::StaticCast(ty, x) => {
                let target = self.resolve_type(ty, &loc)?;
                let x = self.expr(ctx, x)?;
                match &target {
                    TypeRepr::RRef(inner) => {
                        let x = match inner.class_name() {
                            Some(c) if x.ty.class_name() != Some(c) => self.obj_cast(x, c)?,
                            _ => x,
                        };
                        if !same_type(&x.ty, inner) {
                            return terr(format!("invalid static_cast from '{}' to '{target}'", x.ty), &loc);
                        }
                        let ty = x.ty.clone();
                        self.mk(t::ExprKind::Move(Box::new(x)), ty, Category::XValue, &loc)
                    }
                    TypeRepr::LRef(inner) => {
                        if x.cat != Category::LValue {
                            return terr("static_cast to an lvalue reference needs an lvalue", &loc);
                        }
                        match inner.class_name() {
                            Some(c) if x.ty.class_name() != Some(c) => self.obj_cast(x, c)?,
                            _ if same_type(&x.ty, inner) => x,
                            _ => return terr(format!("invalid static_cast from '{}' to '{target}'", x.ty), &loc),
                        }
                    }
                    t if t.is_void() => {
                        return terr("static_cast to void is not supported", &loc);
                    }
                    t if t.class_name().is_some() => {
                        let c = t.class_name().expect("class").to_string();
                        let init = self.class_init_from(&c, x, &loc)?;
                        if let Init::Expr(e) = init {
                            return Ok(e);
                        }
                        self.mk(t::ExprKind::Temp(Box::new(init)), target.clone(), Category::PRValue, &loc)
                    }
                    _ => self.convert_ex(x, &target, true)?,
                }
            }
            a::ExprKind::InitList(_) => return terr("initializer list is not allowed here", &loc),
        })
    }

    fn is_abstract(&self, class: &str) -> bool {
        // pure methods not overridden along the hierarchy
        let mut pures: Vec<(String, String)> = Vec::new();
        let mut order = self.linear_bases(class);
        order.reverse();
        for c in order {
            for m in &self.class(&c).methods {
                let f = &self.functions[m.0];
                if !f.is_virtual {
                    continue;
                }
                let key = (f.name.clone(), params_key(&f.sig.params));
                pures.retain(|k| *k != key);
                if f.is_pure {
                    pures.push(key);
                }
            }
        }
        !pures.is_empty()
    }

    /// `class` followed by all transitive bases, depth first.
    fn linear_bases(&self, class: &str) -> Vec<String> {
        let mut out = vec![class.to_string()];
        for b in &self.class(class).bases {
            out.extend(self.linear_bases(b));
        }
        out
    }

    /// Static up or down cast of a class glvalue.
    fn obj_cast(&self, x: t::Expr, to: &str) -> R<t::Expr> {
        let from = x.ty.class_name().unwrap_or_default().to_string();
        if self.base_path(&from, to).is_some() {
            return self.upcast_object(x, to);
        }
        let Some(path) = self.base_path(to, &from) else {
            return terr(format!("invalid static_cast from '{from}' to '{to}'"), &x.loc);
        };
        let mut cur = x;
        for d in path[..path.len() - 1].iter().rev() {
            let (cat, loc) = (cur.cat, cur.loc.clone());
            cur = self.mk(t::ExprKind::DerivedSub { obj: Box::new(cur), derived: d.clone() }, TypeRepr::Class(d.clone()), cat, &loc);
        }
        Ok(cur)
    }

    fn zero_value(&self, ty: &TypeRepr, loc: &SourceLocation) -> R<t::Expr> {
        Ok(match ty.strip_cv() {
            TypeRepr::Bool => self.mk(t::ExprKind::Bool(false), bool_ty(), Category::PRValue, loc),
            TypeRepr::Int(_) | TypeRepr::Char => self.mk(t::ExprKind::Int(0), ty.clone(), Category::PRValue, loc),
            TypeRepr::Pointer(_) => {
                let n = self.mk(t::ExprKind::Null, TypeRepr::NullPtr, Category::PRValue, loc);
                self.convert(n, ty)?
            }
            _ => return terr(format!("cannot value-initialize '{ty}'"), loc),
        })
    }

    fn name_expr(&mut self, ctx: &mut FnCtx, name: &str, loc: &SourceLocation) -> R<t::Expr> {
        if let Some(v) = ctx.lookup(name) {
            let ty = ctx.locals[v.0].ty.clone();
            return Ok(self.var_expr(&ty, t::ExprKind::Local(v), loc));
        }
        if let Some(c) = ctx.class.clone() {
            if self.field_lookup(&c, name).is_some() {
                let this = self.this_expr(ctx, loc)?;
                let obj = self.deref(this)?;
                return Ok(self.field_expr(obj, name, loc)?.expect("field"));
            }
        }
        if let Some(&g) = self.global_idx.get(name) {
            let ty = self.globals[g].ty.clone();
            return Ok(self.var_expr(&ty, t::ExprKind::Global(name.to_string()), loc));
        }
        if let Some(fs) = self.free.get(name) {
            return match fs.as_slice() {
                [f] => {
                    let ty = TypeRepr::Function(self.functions[f.0].sig.clone());
                    Ok(self.mk(t::ExprKind::FuncRef(*f), ty, Category::LValue, loc))
                }
                _ => terr(format!("reference to overloaded function '{name}' is ambiguous"), loc),
            };
        }
        if is_builtin_name(name) {
            return terr(format!("builtin '{name}' must be called"), loc);
        }
        terr(format!("use of undeclared identifier '{name}'"), loc)
    }

    fn unary(&mut self, ctx: &mut FnCtx, op: UnOp, x: &a::Expr, loc: &SourceLocation) -> R<t::Expr> {
        Ok(match op {
            UnOp::Neg | UnOp::BitNot | UnOp::Plus => {
                // negative literals stay literals
                if let (UnOp::Neg, a::ExprKind::Int(v)) = (op, &x.kind) {
                    let max = 1u64 << (self.width - 1);
                    if *v > max {
                        return terr(format!("integer literal -{v} does not fit in a {}-bit int", self.width), loc);
                    }
                    return Ok(self.mk(t::ExprKind::Int(-(*v as i64)), self.int(), Category::PRValue, loc));
                }
                let x = self.rvalue(ctx, x)?;
                let x = self.promote(x)?;
                if op == UnOp::Plus {
                    return Ok(x);
                }
                self.mk(t::ExprKind::Unary(op, Box::new(x)), self.int(), Category::PRValue, loc)
            }
            UnOp::Not => {
                let x = self.cond(ctx, x)?;
                self.mk(t::ExprKind::Unary(UnOp::Not, Box::new(x)), bool_ty(), Category::PRValue, loc)
            }
            UnOp::Deref => {
                let x = self.rvalue(ctx, x)?;
                if let Some(f) = x.ty.pointee().filter(|p| p.function().is_some()).cloned() {
                    // `*fp` designates the function
                    return Ok(self.mk(t::ExprKind::Deref(Box::new(x)), f, Category::LValue, loc));
                }
                self.deref(x)?
            }
            UnOp::AddrOf => {
                let x = self.expr(ctx, x)?;
                if let t::ExprKind::FuncRef(_) = x.kind {
                    return Ok(self.decay(x));
                }
                if x.cat != Category::LValue {
                    return terr("cannot take the address of an rvalue", loc);
                }
                let ty = TypeRepr::pointer(x.ty.clone());
                self.mk(t::ExprKind::AddrOf(Box::new(x)), ty, Category::PRValue, loc)
            }
            UnOp::PreInc | UnOp::PreDec | UnOp::PostInc | UnOp::PostDec => {
                let x = self.expr(ctx, x)?;
                if x.cat != Category::LValue {
                    return terr("expression is not assignable", loc);
                }
                if !(x.ty.is_integral() || x.ty.pointee().is_some()) {
                    return terr(format!("cannot increment value of type '{}'", x.ty), loc);
                }
                let ty = x.ty.clone();
                let cat = if matches!(op, UnOp::PreInc | UnOp::PreDec) { Category::LValue } else { Category::PRValue };
                self.mk(t::ExprKind::IncDec(op, Box::new(x)), ty, cat, loc)
            }
        })
    }

    fn binary(&self, op: BinOp, l: t::Expr, r: t::Expr, loc: &SourceLocation) -> R<t::Expr> {
        if l.ty.is_float() || r.ty.is_float() {
            return terr("floating-point arithmetic is not supported", loc);
        }
        if op.is_logical() {
            let l = self.to_bool(l)?;
            let r = self.to_bool(r)?;
            return Ok(self.mk(t::ExprKind::Binary(op, Box::new(l), Box::new(r)), bool_ty(), Category::PRValue, loc));
        }
        let lp = l.ty.is_pointer();
        let rp = r.ty.is_pointer();
        if lp || rp {
            if op.is_comparison() {
                let (l, r) = self.common_pointer(l, r, loc)?;
                return Ok(self.mk(t::ExprKind::Binary(op, Box::new(l), Box::new(r)), bool_ty(), Category::PRValue, loc));
            }
            return match (op, lp, rp) {
                (BinOp::Add, true, false) | (BinOp::Sub, true, false) => {
                    let ty = l.ty.clone();
                    if l.ty.pointee().is_none_or(|p| p.is_void()) {
                        return terr("arithmetic on a pointer to void or null", loc);
                    }
                    let r = self.promote(r)?;
                    Ok(self.mk(t::ExprKind::PtrAdd { ptr: Box::new(l), offset: Box::new(r), negate: op == BinOp::Sub }, ty, Category::PRValue, loc))
                }
                (BinOp::Add, false, true) => self.binary(op, r, l, loc),
                (BinOp::Sub, true, true) => terr("pointer subtraction is not supported", loc),
                _ => terr(format!("invalid operands to binary '{}'", op.symbol()), loc),
            };
        }
        if l.ty.class_name().is_some() || r.ty.class_name().is_some() {
            return terr(format!("invalid operands to binary '{}' ('{}' and '{}')", op.symbol(), l.ty, r.ty), loc);
        }
        let l = self.promote(l)?;
        let r = self.promote(r)?;
        let ty = if op.is_comparison() { bool_ty() } else { self.int() };
        Ok(self.mk(t::ExprKind::Binary(op, Box::new(l), Box::new(r)), ty, Category::PRValue, loc))
    }

    fn common_pointer(&self, l: t::Expr, r: t::Expr, loc: &SourceLocation) -> R<(t::Expr, t::Expr)> {
        let lt = l.ty.clone();
        let rt = r.ty.clone();
        if same_type(&lt, &rt) {
            return Ok((l, r));
        }
        if matches!(lt, TypeRepr::NullPtr) || matches!(l.kind, t::ExprKind::Int(0)) {
            let l = self.convert(l, &rt)?;
            return Ok((l, r));
        }
        if matches!(rt, TypeRepr::NullPtr) || matches!(r.kind, t::ExprKind::Int(0)) {
            let r = self.convert(r, &lt)?;
            return Ok((l, r));
        }
        if let Ok(r2) = self.convert(r.clone(), &lt) {
            return Ok((l, r2));
        }
        if let Ok(l2) = self.convert(l, &rt) {
            return Ok((l2, r));
        }
        terr(format!("comparison of distinct pointer types '{lt}' and '{rt}'"), loc)
    }

    fn call(&mut self, ctx: &mut FnCtx, callee: &a::Expr, args: &[a::Expr], loc: &SourceLocation) -> R<t::Expr> {
        let mut targs = Vec::new();
        for x in args {
            targs.push(self.expr(ctx, x)?);
        }
        match &callee.kind {
            a::ExprKind::Name { name, template_args: None } if ctx.lookup(name).is_none() && !self.global_idx.contains_key(name) => {
                if let Some(n) = nondet_kind(name) {
                    if !targs.is_empty() {
                        return terr(format!("'{name}' takes no arguments"), loc);
                    }
                    let ty = match n {
                        t::Nondet::Int => self.int(),
                        t::Nondet::Bool => bool_ty(),
                        t::Nondet::Char => TypeRepr::Char,
                    };
                    return Ok(self.mk(t::ExprKind::Nondet(n), ty, Category::PRValue, loc));
                }
                if matches!(name.as_str(), "assert" | "__ESBMC_assume" | "__VERIFIER_assume") {
                    return terr(format!("'{name}' is only supported as a statement"), loc);
                }
                if let Some((cls, m)) = name.split_once("::").filter(|_| !self.free.contains_key(name.as_str())) {
                    // qualified call of a base method: never virtual
                    let Some(cur) = ctx.class.clone() else {
                        return terr(format!("qualified call '{name}' outside a member function"), loc);
                    };
                    if !self.class_idx.contains_key(cls) || self.base_path(&cur, cls).is_none() {
                        return terr(format!("'{cls}' is not a base of '{cur}'"), loc);
                    }
                    let Some((owner, cands)) = self.method_lookup(cls, m, loc)? else {
                        return terr(format!("no member named '{m}' in '{cls}'"), loc);
                    };
                    let this = self.this_expr(ctx, loc)?;
                    let obj = self.deref(this)?;
                    return self.method_call(obj, &owner, &cands, targs, false, name, loc);
                }
                if let Some(cur) = ctx.class.clone() {
                    if let Some((owner, cands)) = self.method_lookup(&cur, name, loc)? {
                        let this = self.this_expr(ctx, loc)?;
                        let obj = self.deref(this)?;
                        return self.method_call(obj, &owner, &cands, targs, true, name, loc);
                    }
                }
                let Some(cands) = self.free.get(name).cloned() else {
                    return terr(format!("use of undeclared identifier '{name}'"), loc);
                };
                let f = self.resolve_overload(&cands, &targs, name, loc)?;
                let args = self.make_args(f, targs, loc)?;
                let ret = (*self.functions[f.0].sig.ret).clone();
                Ok(self.call_result(t::ExprKind::Call { func: f, args }, &ret, loc))
            }
            a::ExprKind::Member { base, arrow, name } => {
                let obj = if *arrow {
                    let p = self.rvalue(ctx, base)?;
                    self.deref(p)?
                } else {
                    self.expr(ctx, base)?
                };
                let Some(class) = obj.ty.class_name().map(str::to_string) else {
                    return terr(format!("member reference base type '{}' is not a class", obj.ty), loc);
                };
                let Some((owner, cands)) = self.method_lookup(&class, name, loc)? else {
                    if self.field_lookup(&class, name).is_some() {
                        let f = self.field_expr(obj, name, loc)?.expect("field");
                        return self.ptr_call(f, targs, loc);
                    }
                    return terr(format!("no member named '{name}' in '{class}'"), loc);
                };
                self.method_call(obj, &owner, &cands, targs, true, name, loc)
            }
            _ => {
                let f = self.expr(ctx, callee)?;
                self.ptr_call(f, targs, loc)
            }
        }
    }

    fn ptr_call(&self, f: t::Expr, targs: Vec<t::Expr>, loc: &SourceLocation) -> R<t::Expr> {
        let f = match f.kind {
            t::ExprKind::Deref(p) if f.ty.function().is_some() => *p,
            t::ExprKind::FuncRef(id) => {
                let args = self.make_args(id, targs, loc)?;
                let ret = (*self.functions[id.0].sig.ret).clone();
                return Ok(self.call_result(t::ExprKind::Call { func: id, args }, &ret, loc));
            }
            _ => self.decay(f),
        };
        let Some(ft) = f.ty.pointee().and_then(|p| p.function()).cloned() else {
            return terr(format!("called object type '{}' is not a function or function pointer", f.ty), loc);
        };
        let args = self.args_for(&ft.params, targs, loc)?;
        Ok(self.call_result(t::ExprKind::PtrCall { callee: Box::new(f), args }, &ft.ret, loc))
    }

    #[allow(clippy::too_many_arguments)]
    fn method_call(
        &self,
        obj: t::Expr,
        owner: &str,
        cands: &[FuncId],
        targs: Vec<t::Expr>,
        allow_virtual: bool,
        name: &str,
        loc: &SourceLocation,
    ) -> R<t::Expr> {
        let f = self.resolve_overload(cands, &targs, name, loc)?;
        let args = self.make_args(f, targs, loc)?;
        let recv = self.upcast_object(obj, owner)?;
        let m = &self.functions[f.0];
        let is_virtual = allow_virtual && m.is_virtual;
        let ret = (*m.sig.ret).clone();
        Ok(self.call_result(t::ExprKind::MethodCall { func: f, recv: Box::new(recv), args, is_virtual }, &ret, loc))
    }

    fn call_result(&self, kind: t::ExprKind, ret: &TypeRepr, loc: &SourceLocation) -> t::Expr {
        let (ty, cat) = match ret {
            TypeRepr::LRef(i) => (unqual(i), Category::LValue),
            TypeRepr::RRef(i) => (unqual(i), Category::XValue),
            other => (unqual(other), Category::PRValue),
        };
        self.mk(kind, ty, cat, loc)
    }
}

fn nondet_kind(name: &str) -> Option<t::Nondet> {
    Some(match name {
        "nondet_int" | "__VERIFIER_nondet_int" => t::Nondet::Int,
        "nondet_bool" | "__VERIFIER_nondet_bool" => t::Nondet::Bool,
        "nondet_char" | "__VERIFIER_nondet_char" => t::Nondet::Char,
        _ => return None,
    })
}

/// Reduces `v` modulo 2^w into the signed range.
pub fn wrap_int(v: i64, w: u32) -> i64 {
    if w >= 64 {
        return v;
    }
    let m = 1i128 << w;
    let mut x = (v as i128).rem_euclid(m);
    if x >= m / 2 {
        x -= m;
    }
    x as i64
}

/// Array and function parameters become pointers.
fn adjust_param(t: TypeRepr) -> TypeRepr {
    match t {
        TypeRepr::Array(e, _) => TypeRepr::Pointer(e),
        f @ TypeRepr::Function(_) => TypeRepr::Pointer(Box::new(f)),
        other => other,
    }
}

/// `int a[] = {1,2,3}` gets its length from the initializer.
fn complete_array(ty: TypeRepr, init: Option<&a::Initializer>) -> TypeRepr {
    match (&ty, init) {
        (TypeRepr::Array(e, None), Some(a::Initializer::Brace(v)))
        | (TypeRepr::Array(e, None), Some(a::Initializer::Assign(a::Expr { kind: a::ExprKind::InitList(v), .. }))) => {
            TypeRepr::Array(e.clone(), Some(v.len() as u64))
        }
        _ => ty,
    }
}

/// Pointer conversion that only adds cv-qualifiers (at any level, with
/// const on every intermediate level, as ISO C++ requires).
pub fn qualification_convertible(from: &TypeRepr, to: &TypeRepr) -> bool {
    fn go(f: &TypeRepr, t: &TypeRepr, all_const: bool) -> bool {
        if !f.cv().is_subset_of(t.cv()) {
            return false;
        }
        let added = t.cv() != f.cv();
        if added && !all_const {
            return false;
        }
        match (f.strip_cv(), t.strip_cv()) {
            (TypeRepr::Pointer(fi), TypeRepr::Pointer(ti)) => go(fi, ti, all_const && t.is_const()),
            (a, b) => a == b,
        }
    }
    go(from, to, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_source;
    use crate::templates::{monomorphize, DEFAULT_MAX_DEPTH};

    fn check(src: &str) -> R<t::TypedProgram> {
        let tu = parse_source(src, "t.cpp")?;
        let m = monomorphize(&tu, DEFAULT_MAX_DEPTH)?;
        typecheck(&m.unit, 32, &m.instances)
    }

    fn corpus(name: &str) -> String {
        std::fs::read_to_string(format!("{}/../../corpus/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
    }

    #[test]
    fn implicit_move_constructor_is_used() {
        let p = check(&corpus("example_move_constructor.cpp")).unwrap();
        let c = p.class("MyStruct").unwrap();
        let kinds: Vec<_> = c.methods.iter().filter_map(|m| p.func(*m).implicit).collect();
        assert!(kinds.contains(&ImplicitKind::MoveCtor));
        let main = p.func(p.entry);
        let body = &main.body.as_ref().unwrap().stmts;
        let t::StmtKind::Decl { init: Some(Init::Ctor { func, .. }), .. } = &body[1].kind else { panic!("{:?}", body[1]) };
        assert_eq!(p.func(*func).implicit, Some(ImplicitKind::MoveCtor));
        assert_eq!(body[1].loc.line, 9);
    }

    #[test]
    fn rvalue_reference_type() {
        let p = check(&corpus("example_rvalue_reference.cpp")).unwrap();
        let main = p.func(p.entry);
        let rref = main.locals.iter().find(|l| l.name == "rref").unwrap();
        assert_eq!(rref.ty, TypeRepr::RRef(Box::new(TypeRepr::Int(32))));
    }

    #[test]
    fn rvalue_reference_to_lvalue_rejected() {
        let e = check("int main(){ int a = 1; int &&r = a; return 0; }").unwrap_err();
        assert_eq!(e.phase, Phase::Type);
        assert!(e.message.contains("rvalue reference"), "{}", e.message);
    }

    #[test]
    fn override_mismatch_rejected() {
        let e = check("struct A { virtual int f(int x){return x;} }; struct B : A { int f(char c) override {return 1;} }; int main(){return 0;}").unwrap_err();
        assert!(e.message.contains("override"), "{}", e.message);
    }

    #[test]
    fn virtual_inheritance_rejected() {
        let e = check("struct A {}; struct B : virtual A {}; int main(){return 0;}").unwrap_err();
        assert!(e.message.contains("virtual inheritance"));
    }

    #[test]
    fn diamond_rejected() {
        let e = check("struct A {int v;}; struct B : A {}; struct C : A {}; struct D : B, C {}; int main(){return 0;}").unwrap_err();
        assert!(e.message.contains("diamond"), "{}", e.message);
    }

    #[test]
    fn one_implicit_default_ctor_for_polymorphic_class() {
        let p = check(&corpus("example_polymorphism.cpp")).unwrap();
        for c in ["Bird", "Penguin"] {
            let ci = p.class(c).unwrap();
            let n = ci.methods.iter().filter(|m| p.func(**m).implicit == Some(ImplicitKind::DefaultCtor)).count();
            assert_eq!(n, 1, "{c}");
        }
        let doit = p.functions.iter().find(|f| f.id == "Penguin::doit(Penguin*)").unwrap();
        assert!(doit.is_virtual && doit.is_override);
    }

    #[test]
    fn undeclared_name() {
        let e = check("int main(){ return y; }").unwrap_err();
        assert!(e.message.contains("undeclared identifier 'y'"));
    }

    #[test]
    fn double_arithmetic_rejected() {
        let e = check("int main(){ double d; d = d + 1; return 0; }").unwrap_err();
        assert!(e.message.contains("floating-point"), "{}", e.message);
        check("void f() throw(int, double) {} int main(){ return 0; }").unwrap();
    }

    #[test]
    fn literal_width_checked() {
        let tu = parse_source("int main(){ return 300; }", "t.cpp").unwrap();
        let e = typecheck(&tu, 8, &[]).unwrap_err();
        assert!(e.message.contains("does not fit"), "{}", e.message);
        typecheck(&tu, 16, &[]).unwrap();
    }

    #[test]
    fn all_examples_typecheck() {
        for f in [
            "example_polymorphism.cpp",
            "example_friend_template.cpp",
            "example_dangling_pointer.cpp",
            "example_rvalue_reference.cpp",
            "example_move_constructor.cpp",
            "example_exception_order.cpp",
            "example_throw_spec_dynamic.cpp",
        ] {
            check(&corpus(f)).unwrap_or_else(|e| panic!("{f}: {e}"));
        }
    }

    fn idempotent(src: &str) {
        let tu = parse_source(src, "t.cpp").unwrap();
        let m = monomorphize(&tu, DEFAULT_MAX_DEPTH).unwrap();
        let once = typecheck(&m.unit, 32, &m.instances).unwrap();
        let again = typecheck(&crate::frontend::erase::erase(&once), 32, &m.instances).unwrap();
        if once != again {
            let (x, y) = (format!("{once:#?}"), format!("{again:#?}"));
            let (xl, yl): (Vec<_>, Vec<_>) = (x.lines().collect(), y.lines().collect());
            let i = xl.iter().zip(&yl).position(|(a, b)| a != b).unwrap_or(xl.len().min(yl.len()));
            let lo = i.saturating_sub(12);
            panic!("first difference at line {i}:\n{}\n---\n{}", xl[lo..(i + 4).min(xl.len())].join("\n"), yl[lo..(i + 4).min(yl.len())].join("\n"));
        }
    }

    #[test]
    fn rechecking_own_output_is_identity() {
        for f in [
            "example_polymorphism.cpp",
            "example_friend_template.cpp",
            "example_dangling_pointer.cpp",
            "example_rvalue_reference.cpp",
            "example_move_constructor.cpp",
            "example_exception_order.cpp",
            "example_throw_spec_dynamic.cpp",
        ] {
            idempotent(&corpus(f));
        }
        idempotent(
            "struct A { int v; A(int x) : v(x) {} virtual int get() const { return v; } };
             struct B : A { int w = 3; B() : A(2) {} int get() const override { return A::get() + w; } };
             int g = 4;
             int twice(int x) { return x * 2; }
             int main() {
               A *p = new B();
               int arr[] = {1, 2, 3};
               for (int i = 0, j = 1; i < 3; i++) { arr[i] += j; }
               int k = 0;
               { int k = 5; k++; }
               char c = -1;
               assert(p->get() == 5 && twice(g) == 8 && c < 0);
               B *q = static_cast<B*>(p);
               delete q;
               try { throw 1; } catch (const int &e) { k = e; } catch (...) {}
               return k;
             }",
        );
    }

    #[test]
    fn assertion_comment_shows_friend_by_short_name() {
        let p = check(&corpus("example_friend_template.cpp")).unwrap();
        let main = p.func(p.entry);
        let t::StmtKind::Assert { comment, .. } = &main.body.as_ref().unwrap().stmts[0].kind else { panic!() };
        assert_eq!(comment, "foo<5678>(bring)!=12345678");
    }

    #[test]
    fn deterministic() {
        let src = corpus("example_polymorphism.cpp");
        assert_eq!(check(&src).unwrap(), check(&src).unwrap());
    }

    #[test]
    fn qualification_table() {
        let int = TypeRepr::Int(32);
        let cint = TypeRepr::qualified(Cv::CONST, int.clone());
        assert!(qualification_convertible(&int, &cint));
        assert!(!qualification_convertible(&cint, &int));
        let pp = TypeRepr::pointer(int.clone());
        let pcp = TypeRepr::pointer(cint.clone());
        // int** -> const int** is unsafe; int** -> const int* const* is fine
        assert!(!qualification_convertible(&pp, &pcp));
        assert!(qualification_convertible(&pp, &TypeRepr::qualified(Cv::CONST, pcp)));
    }

    #[test]
    fn wrap_int_matches_modular_arithmetic() {
        assert_eq!(wrap_int(128, 8), -128);
        assert_eq!(wrap_int(-129, 8), 127);
        assert_eq!(wrap_int(5, 8), 5);
    }
}
