//! Untyped syntax tree produced by the parser and rewritten by template
//! instantiation.
//!
//! Locations are carried in [`Span`]s, which compare equal regardless of
//! position so that `==` on trees is structural equality.

use std::fmt;
use std::ops::Deref;

use super::types::{Cv, SourceLocation};

#[derive(Clone)]
pub struct Span(pub SourceLocation);

impl PartialEq for Span {
    fn eq(&self, _other: &Self) -> bool {
        true
    }
}

impl Eq for Span {}

impl Deref for Span {
    type Target = SourceLocation;
    fn deref(&self) -> &SourceLocation {
        &self.0
    }
}

impl fmt::Debug for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.0.line, self.0.column)
    }
}

impl From<SourceLocation> for Span {
    fn from(l: SourceLocation) -> Self {
        Span(l)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct TranslationUnit {
    pub items: Vec<Item>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Item {
    Class(ClassDecl),
    Function(FunctionDecl),
    Global(VarDecl),
    Template(TemplateItem),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TemplateParamKind {
    Type,
    Int,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TemplateParam {
    pub kind: TemplateParamKind,
    pub name: String,
    pub span: Span,
}

/// `template<...>` followed by a class or function declaration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TemplateItem {
    pub params: Vec<TemplateParam>,
    pub item: Box<Item>,
    pub span: Span,
}

impl TemplateItem {
    pub fn name(&self) -> &str {
        match &*self.item {
            Item::Class(c) => &c.name,
            Item::Function(f) => &f.name,
            Item::Global(v) => &v.name,
            Item::Template(t) => t.name(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClassKey {
    Class,
    Struct,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Access {
    Public,
    Protected,
    Private,
}

impl Access {
    pub fn as_str(self) -> &'static str {
        match self {
            Access::Public => "public",
            Access::Protected => "protected",
            Access::Private => "private",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BaseSpec {
    pub ty: TypeExpr,
    pub access: Option<Access>,
    pub is_virtual: bool,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassDecl {
    pub key: ClassKey,
    pub name: String,
    pub bases: Vec<BaseSpec>,
    pub members: Vec<Member>,
    /// False for a forward declaration `class X;`.
    pub is_definition: bool,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Member {
    Access(Access, Span),
    Field(VarDecl),
    Method(FunctionDecl),
    /// A friend function or friend function template defined in the class.
    Friend(Box<Item>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FunctionKind {
    Normal,
    Constructor,
    Destructor,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ThrowSpecExpr {
    None,
    Noexcept,
    Dynamic(Vec<TypeExpr>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Param {
    pub ty: TypeExpr,
    pub name: Option<String>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MemInit {
    pub name: TypeExpr,
    pub args: Vec<Expr>,
    pub brace: bool,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FunctionDecl {
    pub name: String,
    /// Class qualifier of an out-of-class member definition (`A::f`).
    pub qualifier: Option<String>,
    pub kind: FunctionKind,
    pub ret: TypeExpr,
    pub params: Vec<Param>,
    pub throw_spec: ThrowSpecExpr,
    pub is_virtual: bool,
    pub is_override: bool,
    pub is_const: bool,
    pub is_pure: bool,
    pub init_list: Vec<MemInit>,
    pub body: Option<Block>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Initializer {
    /// `= e`
    Assign(Expr),
    /// `(a, b)`
    Paren(Vec<Expr>),
    /// `{a, b}` or `= {a, b}`
    Brace(Vec<Expr>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VarDecl {
    pub ty: TypeExpr,
    pub name: String,
    pub init: Option<Initializer>,
    pub span: Span,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BuiltinType {
    Void,
    Bool,
    Char,
    Int,
    Double,
    Float,
}

impl BuiltinType {
    pub fn keyword(self) -> &'static str {
        match self {
            BuiltinType::Void => "void",
            BuiltinType::Bool => "bool",
            BuiltinType::Char => "char",
            BuiltinType::Int => "int",
            BuiltinType::Double => "double",
            BuiltinType::Float => "float",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TypeExpr {
    Builtin(BuiltinType),
    Named { name: String, args: Option<Vec<TemplateArg>>, span: Span },
    Pointer(Box<TypeExpr>),
    LRef(Box<TypeExpr>),
    RRef(Box<TypeExpr>),
    Array(Box<TypeExpr>, Option<Box<Expr>>),
    Function { ret: Box<TypeExpr>, params: Vec<TypeExpr> },
    Qualified(Cv, Box<TypeExpr>),
}

impl TypeExpr {
    pub fn named(name: impl Into<String>, span: Span) -> TypeExpr {
        TypeExpr::Named { name: name.into(), args: None, span }
    }

    pub fn strip_cv(&self) -> &TypeExpr {
        match self {
            TypeExpr::Qualified(_, t) => t,
            t => t,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TemplateArg {
    Type(TypeExpr),
    Value(Expr),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    pub stmts: Vec<Stmt>,
    pub span: Span,
    /// Location of the closing brace; scope-exit code is attributed here.
    pub end: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Handler {
    /// `None` for `catch (...)`.
    pub param: Option<Param>,
    pub body: Block,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StmtKind {
    Decl(Vec<VarDecl>),
    Expr(Expr),
    If { cond: Expr, then: Box<Stmt>, els: Option<Box<Stmt>> },
    While { cond: Expr, body: Box<Stmt> },
    DoWhile { body: Box<Stmt>, cond: Expr },
    For { init: Option<Box<Stmt>>, cond: Option<Expr>, step: Option<Expr>, body: Box<Stmt> },
    Return(Option<Expr>),
    Break,
    Continue,
    Block(Block),
    Try { body: Block, handlers: Vec<Handler> },
    Throw(Option<Expr>),
    Delete { expr: Expr, array: bool },
    Empty,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UnOp {
    Neg,
    Plus,
    Not,
    BitNot,
    Deref,
    AddrOf,
    PreInc,
    PreDec,
    PostInc,
    PostDec,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Shl,
    Shr,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    BitAnd,
    BitXor,
    BitOr,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Shl => "<<",
            BinOp::Shr => ">>",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::BitAnd => "&",
            BinOp::BitXor => "^",
            BinOp::BitOr => "|",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    /// Binding strength; larger binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Mul => 13,
            BinOp::Add | BinOp::Sub => 12,
            BinOp::Shl | BinOp::Shr => 11,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 10,
            BinOp::Eq | BinOp::Ne => 9,
            BinOp::BitAnd => 8,
            BinOp::BitXor => 7,
            BinOp::BitOr => 6,
            BinOp::And => 5,
            BinOp::Or => 4,
        }
    }

    pub fn is_comparison(self) -> bool {
        matches!(self, BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge | BinOp::Eq | BinOp::Ne)
    }

    pub fn is_logical(self) -> bool {
        matches!(self, BinOp::And | BinOp::Or)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExprKind {
    Int(u64),
    Char(u8),
    Bool(bool),
    Null,
    /// Identifier or template-id (`foo<5678>`).
    Name {
        name: String,
        template_args: Option<Vec<TemplateArg>>,
    },
    This,
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    /// Plain (`None`) or compound assignment.
    Assign(Option<BinOp>, Box<Expr>, Box<Expr>),
    Cond(Box<Expr>, Box<Expr>, Box<Expr>),
    Call {
        callee: Box<Expr>,
        args: Vec<Expr>,
    },
    Member {
        base: Box<Expr>,
        arrow: bool,
        name: String,
    },
    Index(Box<Expr>, Box<Expr>),
    New {
        ty: TypeExpr,
        args: Option<Vec<Expr>>,
        brace: bool,
        array_len: Option<Box<Expr>>,
    },
    /// `std::move(e)`
    Move(Box<Expr>),
    /// Functional cast / temporary construction: `T(args)` or `T{args}`.
    Construct {
        ty: TypeExpr,
        args: Vec<Expr>,
        brace: bool,
    },
    StaticCast(TypeExpr, Box<Expr>),
    InitList(Vec<Expr>),
}

impl Expr {
    pub fn new(kind: ExprKind, span: impl Into<Span>) -> Expr {
        Expr { kind, span: span.into() }
    }
}
