//! Static types, source locations and exception specifications shared by
//! every stage of the pipeline.

use std::fmt;
use std::sync::Arc;

/// A position in a MiniCxx source file. Lines and columns are 1-based.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SourceLocation {
    pub file: Arc<str>,
    pub line: u32,
    pub column: u32,
    pub function: Option<Arc<str>>,
}

impl SourceLocation {
    pub fn new(file: Arc<str>, line: u32, column: u32) -> Self {
        debug_assert!(line >= 1 && column >= 1);
        SourceLocation { file, line, column, function: None }
    }

    /// A location for compiler-generated code that has no source position.
    pub fn builtin() -> Self {
        SourceLocation { file: Arc::from("<builtin>"), line: 1, column: 1, function: None }
    }

    pub fn with_function(&self, name: &str) -> Self {
        SourceLocation { function: Some(Arc::from(name)), ..self.clone() }
    }
}

impl fmt::Display for SourceLocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "file {} line {} column {}", self.file, self.line, self.column)?;
        if let Some(func) = &self.function {
            write!(f, " function {func}")?;
        }
        Ok(())
    }
}

/// cv-qualifiers. `restrict` is accepted by the lexer and folded away.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cv {
    pub is_const: bool,
    pub is_volatile: bool,
}

impl Cv {
    pub const NONE: Cv = Cv { is_const: false, is_volatile: false };
    pub const CONST: Cv = Cv { is_const: true, is_volatile: false };

    pub fn is_empty(self) -> bool {
        !self.is_const && !self.is_volatile
    }

    pub fn union(self, other: Cv) -> Cv {
        Cv { is_const: self.is_const || other.is_const, is_volatile: self.is_volatile || other.is_volatile }
    }

    /// True when every qualifier of `self` is also present in `other`.
    pub fn is_subset_of(self, other: Cv) -> bool {
        (!self.is_const || other.is_const) && (!self.is_volatile || other.is_volatile)
    }

    fn prefix(self) -> &'static str {
        match (self.is_const, self.is_volatile) {
            (true, true) => "const volatile ",
            (true, false) => "const ",
            (false, true) => "volatile ",
            (false, false) => "",
        }
    }
}

/// Declared exception behaviour of a function.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub enum ThrowSpec {
    #[default]
    Unspecified,
    Noexcept,
    /// `throw(T...)`; an empty list forbids every exception.
    Dynamic(Vec<TypeRepr>),
}

impl ThrowSpec {
    /// Builds a dynamic specification, dropping duplicates while keeping the
    /// first occurrence of each type.
    pub fn dynamic(types: impl IntoIterator<Item = TypeRepr>) -> ThrowSpec {
        let mut out: Vec<TypeRepr> = Vec::new();
        for t in types {
            if !out.contains(&t) {
                out.push(t);
            }
        }
        ThrowSpec::Dynamic(out)
    }

    pub fn is_unspecified(&self) -> bool {
        matches!(self, ThrowSpec::Unspecified)
    }
}

impl fmt::Display for ThrowSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ThrowSpec::Unspecified => Ok(()),
            ThrowSpec::Noexcept => f.write_str("noexcept"),
            ThrowSpec::Dynamic(types) => {
                f.write_str("throw(")?;
                for (i, t) in types.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{}", t.source_name())?;
                }
                f.write_str(")")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FunctionType {
    pub params: Vec<TypeRepr>,
    pub ret: Box<TypeRepr>,
    pub throw_spec: ThrowSpec,
}

/// The static type of a MiniCxx entity.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub enum TypeRepr {
    #[default]
    Void,
    Bool,
    /// 8-bit signed character.
    Char,
    /// Two's-complement signed integer of the given width.
    Int(u32),
    /// `double`/`float`: usable only as a type name, never in arithmetic.
    Float(String),
    /// The type of `nullptr`.
    NullPtr,
    Class(String),
    Pointer(Box<TypeRepr>),
    LRef(Box<TypeRepr>),
    RRef(Box<TypeRepr>),
    Array(Box<TypeRepr>, Option<u64>),
    Function(FunctionType),
    /// cv-qualified type. Never nested, never wraps a reference.
    Qualified(Cv, Box<TypeRepr>),
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum TypeError {
    #[error("reference to reference is not allowed")]
    ReferenceToReference,
    #[error("reference to void is not allowed")]
    ReferenceToVoid,
}

impl TypeRepr {
    pub fn pointer(to: TypeRepr) -> TypeRepr {
        TypeRepr::Pointer(Box::new(to))
    }

    pub fn lvalue_ref(to: TypeRepr) -> Result<TypeRepr, TypeError> {
        Self::check_referent(&to)?;
        Ok(TypeRepr::LRef(Box::new(to)))
    }

    pub fn rvalue_ref(to: TypeRepr) -> Result<TypeRepr, TypeError> {
        Self::check_referent(&to)?;
        Ok(TypeRepr::RRef(Box::new(to)))
    }

    fn check_referent(to: &TypeRepr) -> Result<(), TypeError> {
        match to.strip_cv() {
            TypeRepr::LRef(_) | TypeRepr::RRef(_) => Err(TypeError::ReferenceToReference),
            TypeRepr::Void => Err(TypeError::ReferenceToVoid),
            _ => Ok(()),
        }
    }

    /// Adds qualifiers, merging with existing ones. References and functions
    /// ignore cv-qualification.
    pub fn qualified(cv: Cv, ty: TypeRepr) -> TypeRepr {
        if cv.is_empty() {
            return ty;
        }
        match ty {
            TypeRepr::Qualified(inner_cv, inner) => TypeRepr::Qualified(inner_cv.union(cv), inner),
            TypeRepr::LRef(_) | TypeRepr::RRef(_) | TypeRepr::Function(_) => ty,
            other => TypeRepr::Qualified(cv, Box::new(other)),
        }
    }

    pub fn strip_cv(&self) -> &TypeRepr {
        match self {
            TypeRepr::Qualified(_, inner) => inner,
            other => other,
        }
    }

    pub fn cv(&self) -> Cv {
        match self {
            TypeRepr::Qualified(cv, _) => *cv,
            _ => Cv::NONE,
        }
    }

    pub fn is_const(&self) -> bool {
        self.cv().is_const
    }

    /// Strips references and top-level cv: the type an expression of this
    /// declared type has when used as a value.
    pub fn value_type(&self) -> &TypeRepr {
        match self {
            TypeRepr::LRef(t) | TypeRepr::RRef(t) => t.strip_cv(),
            other => other.strip_cv(),
        }
    }

    pub fn referent(&self) -> Option<&TypeRepr> {
        match self {
            TypeRepr::LRef(t) | TypeRepr::RRef(t) => Some(t),
            _ => None,
        }
    }

    pub fn is_reference(&self) -> bool {
        matches!(self, TypeRepr::LRef(_) | TypeRepr::RRef(_))
    }

    pub fn is_rvalue_ref(&self) -> bool {
        matches!(self, TypeRepr::RRef(_))
    }

    pub fn pointee(&self) -> Option<&TypeRepr> {
        match self.strip_cv() {
            TypeRepr::Pointer(t) => Some(t),
            _ => None,
        }
    }

    pub fn is_pointer(&self) -> bool {
        matches!(self.strip_cv(), TypeRepr::Pointer(_) | TypeRepr::NullPtr)
    }

    pub fn is_integral(&self) -> bool {
        matches!(self.strip_cv(), TypeRepr::Int(_) | TypeRepr::Char | TypeRepr::Bool)
    }

    pub fn is_arithmetic(&self) -> bool {
        self.is_integral()
    }

    pub fn is_scalar(&self) -> bool {
        self.is_integral() || self.is_pointer()
    }

    pub fn is_float(&self) -> bool {
        matches!(self.strip_cv(), TypeRepr::Float(_))
    }

    pub fn is_void(&self) -> bool {
        matches!(self.strip_cv(), TypeRepr::Void)
    }

    pub fn class_name(&self) -> Option<&str> {
        match self.strip_cv() {
            TypeRepr::Class(n) => Some(n),
            _ => None,
        }
    }

    pub fn array_elem(&self) -> Option<(&TypeRepr, Option<u64>)> {
        match self.strip_cv() {
            TypeRepr::Array(e, n) => Some((e, *n)),
            _ => None,
        }
    }

    pub fn function(&self) -> Option<&FunctionType> {
        match self.strip_cv() {
            TypeRepr::Function(f) => Some(f),
            _ => None,
        }
    }

    /// Bit width of a scalar value of this type (pointers excluded).
    pub fn int_width(&self) -> Option<u32> {
        match self.strip_cv() {
            TypeRepr::Int(w) => Some(*w),
            TypeRepr::Char => Some(8),
            TypeRepr::Bool => Some(1),
            _ => None,
        }
    }

    /// C++-style spelling, e.g. `const int*`, `Base&`, `int (*)(int)`.
    pub fn source_name(&self) -> String {
        let mut out = String::new();
        render_source(self, "", &mut out);
        out
    }

    /// Spelling used in GOTO listings: `signed int`, `signed int *`.
    pub fn goto_name(&self) -> String {
        match self {
            TypeRepr::Void => "void".into(),
            TypeRepr::Bool => "bool".into(),
            TypeRepr::Char => "char".into(),
            TypeRepr::Int(32) => "signed int".into(),
            TypeRepr::Int(w) => format!("signed int{w}"),
            TypeRepr::Float(n) => n.clone(),
            TypeRepr::NullPtr => "nullptr_t".into(),
            TypeRepr::Class(n) => n.clone(),
            TypeRepr::Pointer(t) => format!("{} *", t.goto_name()),
            TypeRepr::LRef(t) => format!("{} &", t.goto_name()),
            TypeRepr::RRef(t) => format!("{} &&", t.goto_name()),
            TypeRepr::Array(t, Some(n)) => format!("{}[{n}]", t.goto_name()),
            TypeRepr::Array(t, None) => format!("{}[]", t.goto_name()),
            TypeRepr::Function(_) => self.source_name(),
            TypeRepr::Qualified(cv, t) => format!("{}{}", cv.prefix(), t.goto_name()),
        }
    }
}

fn base_name(ty: &TypeRepr) -> String {
    match ty {
        TypeRepr::Void => "void".into(),
        TypeRepr::Bool => "bool".into(),
        TypeRepr::Char => "char".into(),
        TypeRepr::Int(32) => "int".into(),
        TypeRepr::Int(w) => format!("int{w}"),
        TypeRepr::Float(n) => n.clone(),
        TypeRepr::NullPtr => "nullptr_t".into(),
        TypeRepr::Class(n) => n.clone(),
        _ => unreachable!("base_name on derived type"),
    }
}

/// Renders `ty` around a declarator string, the way C++ spells abstract and
/// named declarators.
fn render_source(ty: &TypeRepr, declarator: &str, out: &mut String) {
    match ty {
        TypeRepr::Qualified(cv, inner) if !matches!(**inner, TypeRepr::Pointer(_)) => {
            out.push_str(cv.prefix());
            render_source(inner, declarator, out);
        }
        TypeRepr::Qualified(cv, inner) => {
            // const pointer: the qualifier binds to the declarator side
            let d = format!(" {}{}", cv.prefix().trim_end(), prefix_space(declarator));
            render_source(inner, &d, out);
        }
        TypeRepr::Pointer(inner) => render_indirection(inner, "*", declarator, out),
        TypeRepr::LRef(inner) => render_indirection(inner, "&", declarator, out),
        TypeRepr::RRef(inner) => render_indirection(inner, "&&", declarator, out),
        TypeRepr::Array(elem, n) => {
            let d = match n {
                Some(n) => format!("{declarator}[{n}]"),
                None => format!("{declarator}[]"),
            };
            render_source(elem, &d, out);
        }
        TypeRepr::Function(f) => {
            let mut params = String::new();
            for (i, p) in f.params.iter().enumerate() {
                if i > 0 {
                    params.push_str(", ");
                }
                params.push_str(&p.source_name());
            }
            let d = format!("{declarator}({params})");
            render_source(&f.ret, &d, out);
        }
        base => {
            out.push_str(&base_name(base));
            out.push_str(declarator);
        }
    }
}

fn prefix_space(d: &str) -> String {
    if d.is_empty() || d.starts_with(['[', '(', ')']) {
        d.to_string()
    } else {
        format!(" {}", d.trim_start())
    }
}

fn render_indirection(inner: &TypeRepr, op: &str, declarator: &str, out: &mut String) {
    let wraps = matches!(inner.strip_cv(), TypeRepr::Array(..) | TypeRepr::Function(_));
    let d = if wraps {
        if declarator.is_empty() {
            format!(" ({op})")
        } else {
            format!(" ({op}{})", declarator.trim_start())
        }
    } else {
        format!("{op}{declarator}")
    };
    render_source(inner, &d, out);
}

impl fmt::Display for TypeRepr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source_name())
    }
}

/// Canonical exception-matching tag of a type: `tag-` followed by the
/// spelling of the type without top-level cv-qualifiers.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TypeTag(pub String);

impl TypeTag {
    pub fn of(ty: &TypeRepr) -> TypeTag {
        let ty = match ty {
            TypeRepr::LRef(t) | TypeRepr::RRef(t) => t,
            t => t,
        };
        TypeTag(format!("tag-{}", ty.strip_cv().source_name()))
    }

    pub fn ellipsis() -> TypeTag {
        TypeTag("...".into())
    }

    pub fn is_ellipsis(&self) -> bool {
        self.0 == "..."
    }
}

impl fmt::Display for TypeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_to_reference_rejected() {
        let r = TypeRepr::lvalue_ref(TypeRepr::Int(32)).unwrap();
        assert_eq!(TypeRepr::rvalue_ref(r.clone()), Err(TypeError::ReferenceToReference));
        assert_eq!(TypeRepr::lvalue_ref(r), Err(TypeError::ReferenceToReference));
    }

    #[test]
    fn dynamic_spec_dedups_in_order() {
        let spec = ThrowSpec::dynamic([TypeRepr::Int(32), TypeRepr::Float("double".into()), TypeRepr::Int(32)]);
        assert_eq!(spec, ThrowSpec::Dynamic(vec![TypeRepr::Int(32), TypeRepr::Float("double".into())]));
        assert_eq!(spec.to_string(), "throw(int, double)");
    }

    #[test]
    fn source_spelling() {
        let ci = TypeRepr::qualified(Cv::CONST, TypeRepr::Int(32));
        assert_eq!(TypeRepr::pointer(ci.clone()).source_name(), "const int*");
        assert_eq!(TypeRepr::lvalue_ref(TypeRepr::Class("Base".into())).unwrap().source_name(), "Base&");
        let f = TypeRepr::Function(FunctionType { params: vec![TypeRepr::Int(32)], ret: Box::new(TypeRepr::Int(32)), throw_spec: ThrowSpec::Unspecified });
        assert_eq!(TypeRepr::pointer(f).source_name(), "int (*)(int)");
        assert_eq!(TypeRepr::Array(Box::new(TypeRepr::Int(32)), Some(3)).source_name(), "int[3]");
        assert_eq!(TypeRepr::pointer(TypeRepr::Int(32)).goto_name(), "signed int *");
    }

    #[test]
    fn tags_ignore_top_level_cv() {
        let ci = TypeRepr::qualified(Cv::CONST, TypeRepr::Int(32));
        assert_eq!(TypeTag::of(&ci), TypeTag::of(&TypeRepr::Int(32)));
        assert_eq!(TypeTag::of(&TypeRepr::Int(32)).0, "tag-int");
        let p = TypeRepr::pointer(TypeRepr::Class("Derived".into()));
        assert_eq!(TypeTag::of(&p).0, "tag-Derived*");
        assert_ne!(TypeTag::of(&TypeRepr::pointer(ci)), TypeTag::of(&TypeRepr::pointer(TypeRepr::Int(32))));
    }
}
