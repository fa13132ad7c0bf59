//! Typed, template-free program produced by the type checker.
//!
//! Expressions carry their value type (never a reference type) and value
//! category. Functions, methods, constructors and destructors all live in one
//! table indexed by [`FuncId`].

use std::fmt;

use super::ast::{BinOp, FunctionKind, UnOp};
use super::types::{FunctionType, SourceLocation, TypeRepr};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FuncId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

impl fmt::Display for FuncId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "f{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Category {
    LValue,
    XValue,
    PRValue,
}

impl Category {
    pub fn is_glvalue(self) -> bool {
        self != Category::PRValue
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocalVar {
    /// Unique within the function (`i`, `i$1` for a second `i`).
    pub name: String,
    /// Declared type; references keep their reference type here.
    pub ty: TypeRepr,
    pub is_param: bool,
    pub loc: SourceLocation,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FieldInfo {
    pub name: String,
    pub ty: TypeRepr,
    /// Default member initializer, checked in the class scope.
    pub default_init: Option<Init>,
    pub loc: SourceLocation,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TemplateOrigin {
    pub template: String,
    pub args: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassInfo {
    pub name: String,
    pub bases: Vec<String>,
    pub fields: Vec<FieldInfo>,
    pub methods: Vec<FuncId>,
    pub template: Option<TemplateOrigin>,
    /// True when the class declares or inherits a virtual method.
    pub polymorphic: bool,
    /// Brace-initializable field by field.
    pub aggregate: bool,
    pub dtor: Option<FuncId>,
    pub loc: SourceLocation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ImplicitKind {
    DefaultCtor,
    CopyCtor,
    MoveCtor,
    Dtor,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CtorInit {
    Base { class: String, init: Init },
    Field { name: String, init: Init },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MethodInfo {
    /// Unique id, e.g. `Penguin::doit(Penguin*)` or `main`.
    pub id: String,
    pub name: String,
    pub class: Option<String>,
    pub kind: FunctionKind,
    pub sig: FunctionType,
    pub params: Vec<VarId>,
    pub locals: Vec<LocalVar>,
    pub is_virtual: bool,
    pub is_override: bool,
    pub is_const: bool,
    pub is_pure: bool,
    pub implicit: Option<ImplicitKind>,
    /// Does nothing observable: no vptr, no members needing work, no body.
    pub trivial: bool,
    /// Complete constructor initialization, bases then fields, in order.
    pub inits: Vec<CtorInit>,
    pub body: Option<Block>,
    pub loc: SourceLocation,
}

impl MethodInfo {
    /// Name used in listings and locations: `Inc`, `MyStruct`, `~A`.
    pub fn display(&self) -> &str {
        &self.name
    }

    pub fn var(&self, v: VarId) -> &LocalVar {
        &self.locals[v.0]
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Global {
    pub name: String,
    pub ty: TypeRepr,
    pub init: Option<Init>,
    pub loc: SourceLocation,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypedProgram {
    pub classes: Vec<ClassInfo>,
    pub functions: Vec<MethodInfo>,
    pub globals: Vec<Global>,
    pub entry: FuncId,
    pub int_width: u32,
}

impl TypedProgram {
    pub fn class(&self, name: &str) -> Option<&ClassInfo> {
        self.classes.iter().find(|c| c.name == name)
    }

    pub fn func(&self, id: FuncId) -> &MethodInfo {
        &self.functions[id.0]
    }

    pub fn global(&self, name: &str) -> Option<&Global> {
        self.globals.iter().find(|g| g.name == name)
    }

    /// Base classes of `class`, transitively, nearest first.
    pub fn all_bases(&self, class: &str) -> Vec<String> {
        let mut out = Vec::new();
        if let Some(c) = self.class(class) {
            for b in &c.bases {
                out.push(b.clone());
                out.extend(self.all_bases(b));
            }
        }
        out
    }

    /// Path of classes from `derived` down to `base` (both included), if
    /// `base` is a base of `derived` or equal to it.
    pub fn base_path(&self, derived: &str, base: &str) -> Option<Vec<String>> {
        if derived == base {
            return Some(vec![derived.to_string()]);
        }
        let c = self.class(derived)?;
        for b in &c.bases {
            if let Some(mut p) = self.base_path(b, base) {
                p.insert(0, derived.to_string());
                return Some(p);
            }
        }
        None
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Expr {
    pub kind: ExprKind,
    /// Value type, never a reference.
    pub ty: TypeRepr,
    pub cat: Category,
    pub loc: SourceLocation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Nondet {
    Int,
    Bool,
    Char,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Conversion {
    /// Integral conversion to the expression's type (truncate or extend).
    Integral,
    /// Scalar to bool (`!= 0`).
    ToBool,
    NullToPtr,
    /// Derived-to-base pointer conversion along the path (derived first).
    PtrUpcast(Vec<String>),
    /// Base-to-derived pointer conversion along the path (derived first).
    PtrDowncast(Vec<String>),
    /// Pointer conversion that keeps the address: qualification or `void*`.
    PtrBitcast,
    ArrayDecay,
    FuncToPtr,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExprKind {
    Int(i64),
    Bool(bool),
    Null,
    Local(VarId),
    Global(String),
    This,
    /// `obj.field` where `obj` is a glvalue of class `class`.
    Field {
        obj: Box<Expr>,
        class: String,
        field: String,
    },
    /// Base-class subobject of a class glvalue.
    BaseSub {
        obj: Box<Expr>,
        base: String,
    },
    /// Derived object containing a base glvalue (static downcast of an lvalue).
    DerivedSub {
        obj: Box<Expr>,
        derived: String,
    },
    Deref(Box<Expr>),
    AddrOf(Box<Expr>),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    /// Pointer plus (or minus) an integer, in elements.
    PtrAdd {
        ptr: Box<Expr>,
        offset: Box<Expr>,
        negate: bool,
    },
    Assign(Box<Expr>, Box<Expr>),
    CompoundAssign(BinOp, Box<Expr>, Box<Expr>),
    /// PreInc/PreDec/PostInc/PostDec.
    IncDec(UnOp, Box<Expr>),
    Cond(Box<Expr>, Box<Expr>, Box<Expr>),
    Convert(Conversion, Box<Expr>),
    Call {
        func: FuncId,
        args: Vec<Init>,
    },
    /// Method call; `recv` is a glvalue of the method's class. Virtual calls
    /// dispatch through the receiver's vtable.
    MethodCall {
        func: FuncId,
        recv: Box<Expr>,
        args: Vec<Init>,
        is_virtual: bool,
    },
    PtrCall {
        callee: Box<Expr>,
        args: Vec<Init>,
    },
    FuncRef(FuncId),
    New {
        elem: TypeRepr,
        count: Option<Box<Expr>>,
        init: Option<Box<Init>>,
    },
    /// `std::move(e)`: an xvalue naming the same object.
    Move(Box<Expr>),
    /// A prvalue of class type built by `init` into a fresh temporary.
    Temp(Box<Init>),
    /// A glvalue temporary holding a prvalue, for reference binding.
    Materialize(Box<Expr>),
    Nondet(Nondet),
}

/// How an object (variable, parameter, field, element) is initialized.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Init {
    /// Copy a scalar value, or take over a class prvalue.
    Expr(Expr),
    Ctor {
        func: FuncId,
        args: Vec<Init>,
    },
    /// Field-by-field or element-by-element; missing trailing items are
    /// value-initialized.
    Aggregate(Vec<Init>),
    /// Bind a reference to a glvalue.
    BindRef(Expr),
    /// Value-initialization: zero scalars, default-construct classes.
    Zero,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    pub stmts: Vec<Stmt>,
    pub loc: SourceLocation,
    pub end: SourceLocation,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Handler {
    /// `None` for `catch (...)`. Reference handlers keep the reference type.
    pub ty: Option<TypeRepr>,
    pub var: Option<VarId>,
    pub body: Block,
    pub loc: SourceLocation,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub loc: SourceLocation,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StmtKind {
    /// `init` of `None` leaves scalars indeterminate and default-constructs
    /// class objects when `default_ctor` is set.
    Decl {
        var: VarId,
        init: Option<Init>,
        default_ctor: Option<FuncId>,
    },
    Expr(Expr),
    Assert {
        cond: Expr,
        comment: String,
    },
    Assume(Expr),
    If {
        cond: Expr,
        then: Block,
        els: Option<Block>,
    },
    While {
        cond: Expr,
        body: Block,
    },
    DoWhile {
        body: Block,
        cond: Expr,
    },
    For {
        init: Vec<Stmt>,
        cond: Option<Expr>,
        step: Option<Expr>,
        body: Block,
    },
    Return(Option<Init>),
    Break,
    Continue,
    Block(Block),
    Try {
        body: Block,
        handlers: Vec<Handler>,
    },
    Throw(Option<Expr>),
    /// `dtor` is the static type's destructor; `is_virtual` dispatches it.
    Delete {
        expr: Expr,
        array: bool,
        dtor: Option<FuncId>,
        is_virtual: bool,
    },
}

impl Expr {
    pub fn new(kind: ExprKind, ty: TypeRepr, cat: Category, loc: SourceLocation) -> Expr {
        Expr { kind, ty, cat, loc }
    }

    pub fn is_lvalue(&self) -> bool {
        self.cat == Category::LValue
    }
}
