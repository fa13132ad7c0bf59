//! GOTO programs: functions as flat instruction lists with explicit jumps.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write;

use crate::frontend::ast::BinOp;
use crate::frontend::{SourceLocation, ThrowSpec, TypeRepr, TypeTag};
use crate::layout::Layouts;

/// Width of the vtable identifiers stored in vptr cells.
pub const VPTR_BITS: u32 = 16;

/// Name of the synthesized entry point that initializes globals and calls `main`.
pub const START: &str = "__minibmc_start";

/// Name of the identity function that models `std::move`.
pub const MOVE: &str = "move";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarRef {
    Local(u32),
    Global(u32),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VarInfo {
    pub name: String,
    /// Lowered type: references have become pointers.
    pub ty: TypeRepr,
    pub is_param: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Not,
    BitNot,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CastKind {
    /// Truncate or sign-extend to the target width.
    Integral,
    /// Reinterpret a pointer without moving it.
    Bitcast,
    /// Move a non-null pointer by a number of cells (base/derived adjust).
    Offset(i64),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MemberKind {
    Field,
    /// Base-class subobject.
    Base,
    /// Enclosing derived object of a base subobject (negative offset).
    Derived,
    /// Array element at a constant index.
    Element(u64),
    Vptr,
}

/// Side-effect-free expressions over variables and memory.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Expr {
    /// Integer, character or boolean (0/1) constant.
    Const {
        value: i64,
        ty: TypeRepr,
    },
    Null(TypeRepr),
    Sym {
        var: VarRef,
        name: String,
        ty: TypeRepr,
    },
    Deref {
        ptr: Box<Expr>,
        ty: TypeRepr,
    },
    /// Part of an object at a fixed cell offset.
    Member {
        obj: Box<Expr>,
        kind: MemberKind,
        name: String,
        offset: i64,
        ty: TypeRepr,
    },
    AddrOf {
        obj: Box<Expr>,
        ty: TypeRepr,
    },
    /// Pointer moved by `index` elements of `elem_cells` cells each.
    PtrAdd {
        ptr: Box<Expr>,
        index: Box<Expr>,
        elem_cells: usize,
        ty: TypeRepr,
    },
    Unary {
        op: UnaryOp,
        arg: Box<Expr>,
        ty: TypeRepr,
    },
    /// Operands are already converted; `ty` is the result type.
    Binary {
        op: BinOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
        ty: TypeRepr,
    },
    Ite {
        cond: Box<Expr>,
        then: Box<Expr>,
        els: Box<Expr>,
        ty: TypeRepr,
    },
    Cast {
        kind: CastKind,
        arg: Box<Expr>,
        ty: TypeRepr,
    },
    /// Aggregate value listing every field in order.
    Struct {
        fields: Vec<(String, Expr)>,
        ty: TypeRepr,
    },
    Array {
        elems: Vec<Expr>,
        ty: TypeRepr,
    },
    /// All-zero value of any type.
    Zero(TypeRepr),
    Nondet(TypeRepr),
    FuncAddr {
        func: String,
        ty: TypeRepr,
    },
    /// Element count of the dynamic array `ptr` points into.
    ObjectSize {
        ptr: Box<Expr>,
        ty: TypeRepr,
    },
    /// True when every dynamic object has been released.
    AllFreed,
}

impl Expr {
    pub fn ty(&self) -> TypeRepr {
        match self {
            Expr::Const { ty, .. }
            | Expr::Null(ty)
            | Expr::Sym { ty, .. }
            | Expr::Deref { ty, .. }
            | Expr::Member { ty, .. }
            | Expr::AddrOf { ty, .. }
            | Expr::PtrAdd { ty, .. }
            | Expr::Unary { ty, .. }
            | Expr::Binary { ty, .. }
            | Expr::Ite { ty, .. }
            | Expr::Cast { ty, .. }
            | Expr::Struct { ty, .. }
            | Expr::Array { ty, .. }
            | Expr::Zero(ty)
            | Expr::Nondet(ty)
            | Expr::FuncAddr { ty, .. }
            | Expr::ObjectSize { ty, .. } => ty.clone(),
            Expr::AllFreed => TypeRepr::Bool,
        }
    }

    pub fn bool_const(b: bool) -> Expr {
        Expr::Const { value: b as i64, ty: TypeRepr::Bool }
    }

    pub fn as_const(&self) -> Option<i64> {
        match self {
            Expr::Const { value, .. } => Some(*value),
            _ => None,
        }
    }

    /// Memory locations this expression designates or reads through.
    pub fn is_lvalue(&self) -> bool {
        matches!(self, Expr::Sym { .. } | Expr::Deref { .. } | Expr::Member { .. })
    }

    /// Visits every sub-expression, outermost first.
    pub fn visit(&self, f: &mut impl FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Deref { ptr: a, .. }
            | Expr::Member { obj: a, .. }
            | Expr::AddrOf { obj: a, .. }
            | Expr::Unary { arg: a, .. }
            | Expr::Cast { arg: a, .. }
            | Expr::ObjectSize { ptr: a, .. } => a.visit(f),
            Expr::PtrAdd { ptr, index, .. } => {
                ptr.visit(f);
                index.visit(f);
            }
            Expr::Binary { lhs, rhs, .. } => {
                lhs.visit(f);
                rhs.visit(f);
            }
            Expr::Ite { cond, then, els, .. } => {
                cond.visit(f);
                then.visit(f);
                els.visit(f);
            }
            Expr::Struct { fields, .. } => fields.iter().for_each(|(_, e)| e.visit(f)),
            Expr::Array { elems, .. } => elems.iter().for_each(|e| e.visit(f)),
            _ => {}
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CatchEntry {
    pub tag: TypeTag,
    /// Handler type as written; `None` for `catch (...)`.
    pub ty: Option<TypeRepr>,
    /// Index of the handler's landing instruction.
    pub target: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum InstrKind {
    Decl(VarRef),
    Dead(VarRef),
    Assign {
        lhs: Expr,
        rhs: Expr,
    },
    Assert {
        cond: Expr,
        class: String,
        comment: String,
    },
    Assume(Expr),
    /// Jump to `target` when `cond` holds (always when `None`).
    Goto {
        cond: Option<Expr>,
        target: usize,
    },
    Call {
        lhs: Option<Expr>,
        func: String,
        args: Vec<Expr>,
    },
    Return(Option<Expr>),
    CatchBegin(Vec<CatchEntry>),
    CatchEnd,
    /// Entry of a handler; binds the caught exception to `var`.
    Landing {
        ty: Option<TypeRepr>,
        var: Option<VarRef>,
    },
    /// Tags list the thrown type first, then its bases. Empty for a rethrow.
    Throw {
        tags: Vec<TypeTag>,
        ty: Option<TypeRepr>,
        value: Option<Expr>,
    },
    ThrowDecl(ThrowSpec),
    New {
        lhs: Expr,
        elem: TypeRepr,
        count: Option<Expr>,
    },
    /// `whole_object` is set when a virtual destructor already located the
    /// complete object, so the pointer may address a base subobject.
    Delete {
        ptr: Expr,
        is_array: bool,
        whole_object: bool,
    },
    Skip,
    EndFunction,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instruction {
    pub kind: InstrKind,
    pub loc: SourceLocation,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GotoFunction {
    /// Unique id used by calls: `Penguin::doit(Penguin*)`, `main`.
    pub name: String,
    /// Short name shown in locations: `Inc`, `MyStruct`.
    pub display: String,
    /// Name shown at call sites in listings: `Penguin::doit`, `MyStruct`.
    pub call_name: String,
    pub params: Vec<VarRef>,
    pub vars: Vec<VarInfo>,
    pub ret: TypeRepr,
    pub throw_spec: ThrowSpec,
    /// False for functions declared without a body.
    pub defined: bool,
    pub body: Vec<Instruction>,
    /// Where `RETURN` continues: the function epilogue.
    pub exit: usize,
}

impl GotoFunction {
    pub fn var(&self, v: VarRef) -> &VarInfo {
        match v {
            VarRef::Local(i) => &self.vars[i as usize],
            VarRef::Global(_) => panic!("global variable looked up in a function"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct GotoProgram {
    pub functions: Vec<GotoFunction>,
    pub globals: Vec<VarInfo>,
    pub entry: String,
    /// Functions whose address is taken, in a fixed order.
    pub address_taken: Vec<String>,
    pub layouts: Layouts,
    pub int_width: u32,
    index: HashMap<String, usize>,
}

impl GotoProgram {
    pub fn new(functions: Vec<GotoFunction>, globals: Vec<VarInfo>, address_taken: Vec<String>, layouts: Layouts, int_width: u32) -> GotoProgram {
        let index = functions.iter().enumerate().map(|(i, f)| (f.name.clone(), i)).collect();
        GotoProgram { functions, globals, entry: START.to_string(), address_taken, layouts, int_width, index }
    }

    pub fn function(&self, name: &str) -> Option<&GotoFunction> {
        self.index.get(name).map(|i| &self.functions[*i])
    }

    pub fn function_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    /// Call-site name of a callee, falling back to its id.
    pub fn display_of<'a>(&'a self, name: &'a str) -> &'a str {
        self.function(name).map(|f| f.call_name.as_str()).unwrap_or(name)
    }
}

/// Renders an expression. `compact` drops the spaces around operators.
pub fn render_expr(p: &GotoProgram, e: &Expr, compact: bool) -> String {
    let mut s = String::new();
    render_into(p, e, compact, &mut s);
    s
}

fn is_atomic(e: &Expr) -> bool {
    match e {
        Expr::Const { value, .. } => *value >= 0,
        Expr::Null(_) | Expr::Sym { .. } | Expr::Member { .. } | Expr::FuncAddr { .. } | Expr::Nondet(_) => true,
        _ => false,
    }
}

fn render_operand(p: &GotoProgram, e: &Expr, compact: bool, s: &mut String) {
    if is_atomic(e) || matches!(e, Expr::Deref { .. } | Expr::AddrOf { .. } | Expr::Unary { .. }) {
        render_into(p, e, compact, s);
    } else {
        s.push('(');
        render_into(p, e, compact, s);
        s.push(')');
    }
}

fn render_into(p: &GotoProgram, e: &Expr, compact: bool, s: &mut String) {
    let sp = if compact { "" } else { " " };
    match e {
        Expr::Const { value, ty } => match ty.strip_cv() {
            TypeRepr::Bool => s.push_str(if *value != 0 { "true" } else { "false" }),
            _ => {
                let _ = write!(s, "{value}");
            }
        },
        Expr::Null(_) => s.push_str("NULL"),
        Expr::Sym { name, .. } => s.push_str(name),
        Expr::Deref { ptr, .. } => {
            s.push('*');
            render_operand(p, ptr, compact, s);
        }
        Expr::Member { obj, kind, name, ty, .. } => match kind {
            MemberKind::Derived => {
                let _ = write!(s, "(({} &)", ty.goto_name());
                render_operand(p, obj, compact, s);
                s.push(')');
            }
            MemberKind::Element(i) => {
                render_operand(p, obj, compact, s);
                let _ = write!(s, "[{i}]");
            }
            _ => {
                let field = match kind {
                    MemberKind::Base => format!("@{name}"),
                    MemberKind::Vptr => "@vptr".to_string(),
                    _ => name.clone(),
                };
                if let Expr::Deref { ptr, .. } = &**obj {
                    render_operand(p, ptr, compact, s);
                    let _ = write!(s, "->{field}");
                } else {
                    render_operand(p, obj, compact, s);
                    let _ = write!(s, ".{field}");
                }
            }
        },
        Expr::AddrOf { obj, .. } => {
            s.push('&');
            render_operand(p, obj, compact, s);
        }
        Expr::PtrAdd { ptr, index, .. } => {
            render_operand(p, ptr, compact, s);
            let _ = write!(s, "{sp}+{sp}");
            render_operand(p, index, compact, s);
        }
        Expr::Unary { op, arg, .. } => {
            s.push(match op {
                UnaryOp::Neg => '-',
                UnaryOp::Not => '!',
                UnaryOp::BitNot => '~',
            });
            render_operand(p, arg, compact, s);
        }
        Expr::Binary { op, lhs, rhs, .. } => {
            render_operand(p, lhs, compact, s);
            let _ = write!(s, "{sp}{}{sp}", op.symbol());
            render_operand(p, rhs, compact, s);
        }
        Expr::Ite { cond, then, els, .. } => {
            render_operand(p, cond, compact, s);
            let _ = write!(s, "{sp}?{sp}");
            render_operand(p, then, compact, s);
            let _ = write!(s, "{sp}:{sp}");
            render_operand(p, els, compact, s);
        }
        Expr::Cast { arg, ty, .. } => {
            let _ = write!(s, "({})", ty.goto_name());
            render_operand(p, arg, compact, s);
        }
        Expr::Struct { fields, .. } => {
            s.push_str("{ ");
            for (i, (n, v)) in fields.iter().enumerate() {
                if i > 0 {
                    s.push_str(", ");
                }
                let _ = write!(s, ".{n}=");
                render_into(p, v, compact, s);
            }
            s.push_str(" }");
        }
        Expr::Array { elems, .. } => {
            s.push_str("{ ");
            for (i, v) in elems.iter().enumerate() {
                if i > 0 {
                    s.push_str(", ");
                }
                render_into(p, v, compact, s);
            }
            s.push_str(" }");
        }
        Expr::Zero(_) => s.push_str("{ 0 }"),
        Expr::Nondet(ty) => {
            let _ = write!(s, "NONDET({})", ty.goto_name());
        }
        Expr::FuncAddr { func, .. } => {
            let _ = write!(s, "&{}", p.display_of(func));
        }
        Expr::ObjectSize { ptr, .. } => {
            s.push_str("OBJECT_SIZE(");
            render_into(p, ptr, compact, s);
            s.push(')');
        }
        Expr::AllFreed => s.push_str("ALL_DYNAMIC_OBJECTS_FREED"),
    }
}

fn var_name<'a>(p: &'a GotoProgram, f: &'a GotoFunction, v: VarRef) -> &'a str {
    match v {
        VarRef::Local(i) => &f.vars[i as usize].name,
        VarRef::Global(i) => &p.globals[i as usize].name,
    }
}

fn var_ty<'a>(p: &'a GotoProgram, f: &'a GotoFunction, v: VarRef) -> &'a TypeRepr {
    match v {
        VarRef::Local(i) => &f.vars[i as usize].ty,
        VarRef::Global(i) => &p.globals[i as usize].ty,
    }
}

/// One instruction without its label.
pub fn render_instruction(p: &GotoProgram, f: &GotoFunction, ins: &Instruction, labels: &HashMap<usize, usize>) -> String {
    let r = |e: &Expr| render_expr(p, e, false);
    let lbl = |t: &usize| labels.get(t).map(|n| n.to_string()).unwrap_or_else(|| format!("?{t}"));
    match &ins.kind {
        InstrKind::Decl(v) => format!("DECL {} {}", var_ty(p, f, *v).goto_name(), var_name(p, f, *v)),
        InstrKind::Dead(v) => format!("DEAD {}", var_name(p, f, *v)),
        InstrKind::Assign { lhs, rhs } => format!("ASSIGN {} = {}", r(lhs), r(rhs)),
        InstrKind::Assert { cond, class, comment } => {
            if comment.is_empty() {
                format!("ASSERT {} // {class}", r(cond))
            } else {
                format!("ASSERT {} // {class}: {comment}", r(cond))
            }
        }
        InstrKind::Assume(c) => format!("ASSUME {}", r(c)),
        InstrKind::Goto { cond: None, target } => format!("GOTO {}", lbl(target)),
        InstrKind::Goto { cond: Some(c), target } => format!("IF {} THEN GOTO {}", r(c), lbl(target)),
        InstrKind::Call { lhs, func, args } => {
            let args: Vec<String> = args.iter().map(r).collect();
            let call = format!("{}({})", p.display_of(func), args.join(", "));
            match lhs {
                Some(l) => format!("FUNCTION_CALL: {} = {call}", r(l)),
                None => format!("FUNCTION_CALL: {call}"),
            }
        }
        InstrKind::Return(Some(e)) => format!("RETURN: {}", r(e)),
        InstrKind::Return(None) => "RETURN".to_string(),
        InstrKind::CatchBegin(entries) => {
            let es: Vec<String> = entries.iter().map(|e| format!("{}->{}", e.tag, lbl(&e.target))).collect();
            format!("CATCH_BEGIN {}", es.join(", "))
        }
        InstrKind::CatchEnd => "CATCH_END".to_string(),
        InstrKind::Landing { ty, var } => {
            let t = ty.as_ref().map(|t| t.goto_name()).unwrap_or_else(|| "...".to_string());
            match var {
                Some(v) => format!("HANDLER {t} {}", var_name(p, f, *v)),
                None => format!("HANDLER {t}"),
            }
        }
        InstrKind::Throw { tags, value, .. } => {
            if tags.is_empty() {
                return "THROW".to_string();
            }
            let ts: Vec<String> = tags.iter().map(|t| t.to_string()).collect();
            match value {
                Some(v) => format!("THROW {}: {}", ts.join(", "), r(v)),
                None => format!("THROW {}", ts.join(", ")),
            }
        }
        InstrKind::ThrowDecl(spec) => format!("THROW_DECL {spec}"),
        InstrKind::New { lhs, elem, count } => match count {
            Some(n) => format!("NEW {} = new {}[{}]", r(lhs), elem.goto_name(), r(n)),
            None => format!("NEW {} = new {}", r(lhs), elem.goto_name()),
        },
        InstrKind::Delete { ptr, is_array, .. } => {
            format!("DELETE{} {}", if *is_array { "[]" } else { "" }, r(ptr))
        }
        InstrKind::Skip => "SKIP".to_string(),
        InstrKind::EndFunction => "END_FUNCTION".to_string(),
    }
}

/// Jump targets of a function numbered 1, 2, ... in body order.
pub fn label_map(f: &GotoFunction) -> HashMap<usize, usize> {
    let mut targets = BTreeSet::new();
    for ins in &f.body {
        match &ins.kind {
            InstrKind::Goto { target, .. } => {
                targets.insert(*target);
            }
            InstrKind::CatchBegin(es) => targets.extend(es.iter().map(|e| e.target)),
            _ => {}
        }
    }
    targets.into_iter().enumerate().map(|(i, t)| (t, i + 1)).collect()
}

/// Stable listing of every defined function, one instruction per line.
pub fn emit_goto_text(p: &GotoProgram) -> String {
    let mut s = String::new();
    for f in p.functions.iter().filter(|f| f.defined) {
        let _ = writeln!(s, "{}:", f.name);
        let labels = label_map(f);
        for (pc, ins) in f.body.iter().enumerate() {
            let prefix = match labels.get(&pc) {
                Some(n) => format!("{:>4} ", format!("{n}:")),
                None => "     ".to_string(),
            };
            let _ = writeln!(s, "{prefix}{}", render_instruction(p, f, ins, &labels));
        }
        s.push('\n');
    }
    s
}
