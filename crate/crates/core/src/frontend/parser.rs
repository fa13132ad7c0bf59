//! Recursive-descent parser for MiniCxx.
//!
//! The grammar is context sensitive in the usual C++ way: whether `X<` opens a
//! template argument list and whether `X(` starts a declaration depends on
//! which names denote types or templates. The parser tracks class names,
//! template names and template parameters as it goes; every name has to be
//! declared before use.

use std::collections::HashSet;
use std::sync::Arc;

use super::ast::*;
use super::lexer::{Token, TokenKind};
use super::types::{Cv, SourceLocation};
use super::{FrontendError, Phase};

/// Nesting limit for statements and expressions. Deeper input is rejected
/// instead of risking stack exhaustion.
pub const MAX_NESTING: usize = 200;

const KEYWORDS: &[&str] = &[
    "class",
    "struct",
    "public",
    "private",
    "protected",
    "virtual",
    "template",
    "typename",
    "int",
    "bool",
    "char",
    "void",
    "double",
    "float",
    "const",
    "volatile",
    "if",
    "else",
    "while",
    "for",
    "do",
    "return",
    "try",
    "catch",
    "throw",
    "delete",
    "new",
    "true",
    "false",
    "nullptr",
    "this",
    "friend",
    "noexcept",
    "operator",
    "static_cast",
    "sizeof",
    "unsigned",
    "signed",
    "long",
    "short",
    "namespace",
    "using",
    "typedef",
    "static",
    "extern",
    "inline",
    "enum",
    "union",
    "goto",
    "switch",
    "case",
    "default",
    "break",
    "continue",
    "auto",
    "explicit",
    "mutable",
    "restrict",
    "dynamic_cast",
    "reinterpret_cast",
    "const_cast",
    "typeid",
    "decltype",
    "constexpr",
];

const UNSUPPORTED: &[&str] = &[
    "unsigned",
    "signed",
    "long",
    "short",
    "namespace",
    "using",
    "typedef",
    "static",
    "extern",
    "inline",
    "enum",
    "union",
    "goto",
    "switch",
    "case",
    "default",
    "auto",
    "mutable",
    "operator",
    "sizeof",
    "dynamic_cast",
    "reinterpret_cast",
    "const_cast",
    "typeid",
    "decltype",
    "constexpr",
];

pub fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    end_loc: SourceLocation,
    classes: HashSet<String>,
    class_templates: HashSet<String>,
    func_templates: HashSet<String>,
    template_scopes: Vec<Vec<TemplateParam>>,
    depth: usize,
}

type PResult<T> = Result<T, FrontendError>;

/// Parses a token stream into a translation unit.
pub fn parse(tokens: Vec<Token>, file: &str) -> PResult<TranslationUnit> {
    let end_loc = match tokens.last() {
        Some(t) => t.loc.clone(),
        None => SourceLocation::new(Arc::from(file), 1, 1),
    };
    let toks = tokens.into_iter().filter(|t| !matches!(t.kind, TokenKind::Include(_))).collect();
    let mut p = Parser {
        toks,
        pos: 0,
        end_loc,
        classes: HashSet::new(),
        class_templates: HashSet::new(),
        func_templates: HashSet::new(),
        template_scopes: Vec::new(),
        depth: 0,
    };
    let mut items = Vec::new();
    while !p.at_end() {
        if p.eat(";") {
            continue;
        }
        items.push(p.item()?);
    }
    Ok(TranslationUnit { items })
}

impl Parser {
    // ---- token helpers

    fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn peek_tok(&self, off: usize) -> Option<&Token> {
        self.toks.get(self.pos + off)
    }

    fn loc(&self) -> SourceLocation {
        self.peek_tok(0).map(|t| t.loc.clone()).unwrap_or_else(|| self.end_loc.clone())
    }

    fn span(&self) -> Span {
        Span(self.loc())
    }

    fn is(&self, p: &str) -> bool {
        self.peek_tok(0).is_some_and(|t| t.is_punct(p))
    }

    fn is_at(&self, off: usize, p: &str) -> bool {
        self.peek_tok(off).is_some_and(|t| t.is_punct(p))
    }

    fn is_kw(&self, k: &str) -> bool {
        self.peek_tok(0).is_some_and(|t| t.is_ident(k))
    }

    fn is_kw_at(&self, off: usize, k: &str) -> bool {
        self.peek_tok(off).is_some_and(|t| t.is_ident(k))
    }

    fn eat(&mut self, p: &str) -> bool {
        if self.is(p) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, k: &str) -> bool {
        if self.is_kw(k) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn error<T>(&self, msg: impl Into<String>) -> PResult<T> {
        Err(FrontendError::new(Phase::Syntax, msg, self.loc()))
    }

    fn found(&self) -> String {
        match self.peek_tok(0) {
            Some(t) => t.kind.to_string(),
            None => "end of input".to_string(),
        }
    }

    fn unexpected<T>(&self, what: &str) -> PResult<T> {
        if self.at_end() {
            self.error(format!("expected {what}, found end of input"))
        } else {
            self.error(format!("expected {what}, found {}", self.found()))
        }
    }

    fn expect(&mut self, p: &str) -> PResult<()> {
        if self.eat(p) {
            Ok(())
        } else {
            self.unexpected(&format!("'{p}'"))
        }
    }

    fn expect_kw(&mut self, k: &str) -> PResult<()> {
        if self.eat_kw(k) {
            Ok(())
        } else {
            self.unexpected(&format!("'{k}'"))
        }
    }

    /// `>` closing a template argument list; splits a `>>` token.
    fn expect_close_angle(&mut self) -> PResult<()> {
        if self.eat(">") {
            return Ok(());
        }
        if self.is(">>") {
            let tok = &mut self.toks[self.pos];
            tok.kind = TokenKind::Punct(">");
            tok.loc.column += 1;
            return Ok(());
        }
        if self.is(">=") || self.is(">>=") {
            return self.error("'>=' directly after a template argument list is not supported");
        }
        self.unexpected("'>'")
    }

    fn ident_at(&self, off: usize) -> Option<&str> {
        match &self.peek_tok(off)?.kind {
            TokenKind::Ident(s) if !is_keyword(s) => Some(s),
            _ => None,
        }
    }

    fn ident(&mut self) -> PResult<String> {
        if let Some(TokenKind::Ident(s)) = self.peek_tok(0).map(|t| &t.kind) {
            if UNSUPPORTED.contains(&s.as_str()) {
                return self.error(format!("unsupported construct '{s}'"));
            }
        }
        match self.ident_at(0) {
            Some(s) => {
                let s = s.to_string();
                self.pos += 1;
                Ok(s)
            }
            None => self.unexpected("identifier"),
        }
    }

    fn enter(&mut self) -> PResult<()> {
        self.depth += 1;
        if self.depth > MAX_NESTING {
            return self.error("nesting too deep");
        }
        Ok(())
    }

    fn leave(&mut self) {
        self.depth -= 1;
    }

    fn reject_unsupported_keyword(&self) -> PResult<()> {
        if let Some(TokenKind::Ident(s)) = self.peek_tok(0).map(|t| &t.kind) {
            if UNSUPPORTED.contains(&s.as_str()) {
                return self.error(format!("unsupported construct '{s}'"));
            }
        }
        Ok(())
    }

    // ---- name classification

    fn template_param(&self, name: &str) -> Option<TemplateParamKind> {
        self.template_scopes.iter().rev().flat_map(|s| s.iter()).find(|p| p.name == name).map(|p| p.kind)
    }

    fn is_type_name(&self, name: &str) -> bool {
        self.classes.contains(name) || self.class_templates.contains(name) || self.template_param(name) == Some(TemplateParamKind::Type)
    }

    /// Whether the token at `off` can begin a type.
    fn starts_type_at(&self, off: usize) -> bool {
        let Some(tok) = self.peek_tok(off) else { return false };
        match &tok.kind {
            TokenKind::Ident(s) => match s.as_str() {
                "int" | "bool" | "char" | "void" | "double" | "float" | "const" | "volatile" | "typename" => true,
                "struct" | "class" => self.ident_at(off + 1).is_some(),
                s => !is_keyword(s) && self.is_type_name(s),
            },
            _ => false,
        }
    }

    // ---- types

    fn cv_quals(&mut self) -> Cv {
        let mut cv = Cv::NONE;
        loop {
            if self.eat_kw("const") {
                cv.is_const = true;
            } else if self.eat_kw("volatile") {
                cv.is_volatile = true;
            } else if self.eat_kw("restrict") {
            } else {
                return cv;
            }
        }
    }

    /// Declaration specifiers: cv-qualifiers around one simple type.
    fn type_specifier(&mut self) -> PResult<TypeExpr> {
        self.reject_unsupported_keyword()?;
        let mut cv = self.cv_quals();
        self.reject_unsupported_keyword()?;
        let base = if let Some(b) = self.builtin_type() {
            self.pos += 1;
            TypeExpr::Builtin(b)
        } else {
            if self.is_kw("struct") || self.is_kw("class") || self.is_kw("typename") {
                self.pos += 1;
            }
            let span = self.span();
            let name = self.ident()?;
            if !self.is_type_name(&name) {
                return Err(FrontendError::new(Phase::Syntax, format!("unknown type name '{name}'"), span.0));
            }
            let args = if self.class_templates.contains(&name) && self.is("<") { Some(self.template_args()?) } else { None };
            TypeExpr::Named { name, args, span }
        };
        cv = cv.union(self.cv_quals());
        Ok(if cv.is_empty() { base } else { TypeExpr::Qualified(cv, Box::new(base)) })
    }

    fn builtin_type(&self) -> Option<BuiltinType> {
        let TokenKind::Ident(s) = &self.peek_tok(0)?.kind else { return None };
        Some(match s.as_str() {
            "int" => BuiltinType::Int,
            "bool" => BuiltinType::Bool,
            "char" => BuiltinType::Char,
            "void" => BuiltinType::Void,
            "double" => BuiltinType::Double,
            "float" => BuiltinType::Float,
            _ => return None,
        })
    }

    fn ptr_operators(&mut self, mut ty: TypeExpr) -> TypeExpr {
        loop {
            if self.eat("*") {
                ty = TypeExpr::Pointer(Box::new(ty));
                let cv = self.cv_quals();
                if !cv.is_empty() {
                    ty = TypeExpr::Qualified(cv, Box::new(ty));
                }
            } else if self.eat("&") {
                ty = TypeExpr::LRef(Box::new(ty));
            } else if self.eat("&&") {
                ty = TypeExpr::RRef(Box::new(ty));
            } else {
                return ty;
            }
        }
    }

    /// Parses a declarator after the specifiers. Returns the full type and the
    /// declared name, if any.
    fn declarator(&mut self, base: TypeExpr, allow_abstract: bool) -> PResult<(TypeExpr, Option<(String, Span)>)> {
        let ty = self.ptr_operators(base);
        // function pointer: ret (*name)(params)
        if self.is("(") && (self.is_at(1, "*")) {
            self.pos += 2;
            let cv = self.cv_quals();
            let name = if self.ident_at(0).is_some() {
                let span = self.span();
                Some((self.ident()?, span))
            } else {
                None
            };
            self.expect(")")?;
            self.expect("(")?;
            let params = self.param_list()?.into_iter().map(|p| p.ty).collect();
            let mut fp = TypeExpr::Pointer(Box::new(TypeExpr::Function { ret: Box::new(ty), params }));
            if !cv.is_empty() {
                fp = TypeExpr::Qualified(cv, Box::new(fp));
            }
            if name.is_none() && !allow_abstract {
                return self.unexpected("declarator name");
            }
            return Ok((fp, name));
        }
        let name = if self.ident_at(0).is_some() {
            let span = self.span();
            Some((self.ident()?, span))
        } else if allow_abstract {
            None
        } else {
            self.reject_unsupported_keyword()?;
            return self.unexpected("declarator name");
        };
        let ty = self.array_suffixes(ty)?;
        Ok((ty, name))
    }

    fn array_suffixes(&mut self, ty: TypeExpr) -> PResult<TypeExpr> {
        let mut dims = Vec::new();
        while self.eat("[") {
            if self.eat("]") {
                dims.push(None);
            } else {
                let e = self.expr()?;
                self.expect("]")?;
                dims.push(Some(Box::new(e)));
            }
        }
        let mut ty = ty;
        for d in dims.into_iter().rev() {
            ty = TypeExpr::Array(Box::new(ty), d);
        }
        Ok(ty)
    }

    /// A complete abstract type such as `const int*` (template arguments,
    /// casts, throw specifications).
    fn type_id(&mut self) -> PResult<TypeExpr> {
        let base = self.type_specifier()?;
        let (ty, name) = self.declarator(base, true)?;
        if let Some((n, span)) = name {
            return Err(FrontendError::new(Phase::Syntax, format!("unexpected name '{n}' in type"), span.0));
        }
        Ok(ty)
    }

    fn template_args(&mut self) -> PResult<Vec<TemplateArg>> {
        self.expect("<")?;
        let mut args = Vec::new();
        if self.is(">") || self.is(">>") {
            self.expect_close_angle()?;
            return Ok(args);
        }
        loop {
            if self.starts_type_at(0) {
                args.push(TemplateArg::Type(self.type_id()?));
            } else {
                args.push(TemplateArg::Value(self.binary(BinOp::Shl.precedence(), true)?));
            }
            if !self.eat(",") {
                break;
            }
        }
        self.expect_close_angle()?;
        Ok(args)
    }

    fn param_list(&mut self) -> PResult<Vec<Param>> {
        // opening '(' already consumed
        let mut params = Vec::new();
        if self.eat(")") {
            return Ok(params);
        }
        if self.is_kw("void") && self.is_at(1, ")") {
            self.pos += 2;
            return Ok(params);
        }
        loop {
            if self.is("...") {
                return self.error("variadic functions are not supported");
            }
            let span = self.span();
            let base = self.type_specifier()?;
            let (ty, name) = self.declarator(base, true)?;
            if self.is("=") {
                return self.error("default arguments are not supported");
            }
            params.push(Param { ty, name: name.map(|n| n.0), span });
            if !self.eat(",") {
                break;
            }
        }
        self.expect(")")?;
        Ok(params)
    }

    // ---- items

    fn item(&mut self) -> PResult<Item> {
        self.reject_unsupported_keyword()?;
        if self.is_kw("template") {
            return self.template_item(false).map(Item::Template);
        }
        if (self.is_kw("class") || self.is_kw("struct"))
            && self.ident_at(1).is_some()
            && (self.is_at(2, "{") || self.is_at(2, ":") || self.is_at(2, ";") || self.is_kw_at(2, "final") || self.is_at(2, "<"))
        {
            return self.class_decl().map(Item::Class);
        }
        // out-of-class constructor / destructor
        if let Some(name) = self.ident_at(0) {
            if self.classes.contains(name) && self.is_at(1, "::") {
                let is_ctor = self.ident_at(2) == Some(name) && self.is_at(3, "(");
                let is_dtor = self.is_at(2, "~");
                if is_ctor || is_dtor {
                    let span = self.span();
                    let class = self.ident()?;
                    self.expect("::")?;
                    let kind = if self.eat("~") { FunctionKind::Destructor } else { FunctionKind::Constructor };
                    let fname = self.ident()?;
                    if fname != class {
                        return self.error(format!("destructor name '~{fname}' does not match class '{class}'"));
                    }
                    self.expect("(")?;
                    let mut f = self.function_rest(fname, kind, TypeExpr::Builtin(BuiltinType::Void), span, true)?;
                    f.qualifier = Some(class);
                    return Ok(Item::Function(f));
                }
            }
        }
        let span = self.span();
        let base = self.type_specifier()?;
        // qualified member definition `R A::f(...)`
        if let (Some(class), true) = (self.ident_at(0), self.is_at(1, "::")) {
            let class = class.to_string();
            if !self.classes.contains(&class) {
                return self.error(format!("unknown class '{class}'"));
            }
            self.pos += 2;
            let ty = base;
            let fname = self.ident()?;
            self.expect("(")?;
            let mut f = self.function_rest(fname, FunctionKind::Normal, ty, span, true)?;
            f.qualifier = Some(class);
            return Ok(Item::Function(f));
        }
        let (ty, name) = self.declarator_or_function(base)?;
        let (name, nspan) = name.expect("declarator requires a name");
        let is_function = self.is("(") && (self.is_at(1, ")") || self.is_at(1, "...") || self.starts_type_at(1));
        if is_function {
            self.pos += 1;
            let f = self.function_rest(name, FunctionKind::Normal, ty, span, true)?;
            return Ok(Item::Function(f));
        }
        let first = self.var_rest(ty, name, nspan)?;
        if self.is(",") {
            return self.error("multiple declarators in a global declaration are not supported");
        }
        self.expect(";")?;
        Ok(Item::Global(first))
    }

    /// Declarator that stops before a function parameter list.
    fn declarator_or_function(&mut self, base: TypeExpr) -> PResult<(TypeExpr, Option<(String, Span)>)> {
        let ty = self.ptr_operators(base);
        if self.is("(") && self.is_at(1, "*") {
            return self.declarator(ty, false);
        }
        let span = self.span();
        let name = self.ident()?;
        if self.is("(") {
            return Ok((ty, Some((name, span))));
        }
        let ty = self.array_suffixes(ty)?;
        Ok((ty, Some((name, span))))
    }

    fn template_params(&mut self) -> PResult<Vec<TemplateParam>> {
        self.expect("<")?;
        if self.is(">") {
            return self.error("explicit specialization is not supported");
        }
        let mut params: Vec<TemplateParam> = Vec::new();
        loop {
            let span = self.span();
            let kind = if self.eat_kw("typename") || self.eat_kw("class") {
                TemplateParamKind::Type
            } else if self.eat_kw("int") || self.eat_kw("bool") || self.eat_kw("char") {
                TemplateParamKind::Int
            } else {
                return self.unexpected("template parameter");
            };
            if self.is("...") {
                return self.error("variadic templates are not supported");
            }
            let name = self.ident()?;
            if self.is("=") {
                return self.error("default template arguments are not supported");
            }
            if params.iter().any(|p| p.name == name) {
                return Err(FrontendError::new(Phase::Template, format!("duplicate template parameter '{name}'"), span.0));
            }
            params.push(TemplateParam { kind, name, span });
            if !self.eat(",") {
                break;
            }
        }
        self.expect_close_angle()?;
        Ok(params)
    }

    /// `template<...>` followed by a class or function. With `in_class`, the
    /// function must be a friend.
    fn template_item(&mut self, in_class: bool) -> PResult<TemplateItem> {
        let span = self.span();
        self.expect_kw("template")?;
        let params = self.template_params()?;
        for p in &params {
            if self.template_param(&p.name).is_some() {
                return Err(FrontendError::new(
                    Phase::Template,
                    format!("template parameter '{}' shadows an outer template parameter", p.name),
                    p.span.0.clone(),
                ));
            }
        }
        self.template_scopes.push(params.clone());
        let result = self.template_body(in_class);
        self.template_scopes.pop();
        let item = result?;
        Ok(TemplateItem { params, item: Box::new(item), span })
    }

    fn template_body(&mut self, in_class: bool) -> PResult<Item> {
        if in_class {
            if !self.eat_kw("friend") {
                return self.error("member templates are not supported (only friend function templates)");
            }
            let span = self.span();
            let base = self.type_specifier()?;
            let (ty, name) = self.declarator_or_function(base)?;
            let (name, _) = name.expect("named");
            self.func_templates.insert(name.clone());
            self.expect("(")?;
            return self.function_rest(name, FunctionKind::Normal, ty, span, false).map(Item::Function);
        }
        if self.is_kw("template") {
            return self.template_item(false).map(Item::Template);
        }
        if self.is_kw("class") || self.is_kw("struct") {
            let name = self.ident_at(1).map(str::to_string);
            if let Some(n) = &name {
                self.class_templates.insert(n.clone());
            }
            return self.class_decl().map(Item::Class);
        }
        let span = self.span();
        let base = self.type_specifier()?;
        let (ty, name) = self.declarator_or_function(base)?;
        let (name, _) = name.expect("named");
        if !self.is("(") {
            return self.error("variable templates are not supported");
        }
        self.func_templates.insert(name.clone());
        self.expect("(")?;
        self.function_rest(name, FunctionKind::Normal, ty, span, true).map(Item::Function)
    }

    fn class_decl(&mut self) -> PResult<ClassDecl> {
        let span = self.span();
        let key = if self.eat_kw("class") {
            ClassKey::Class
        } else {
            self.expect_kw("struct")?;
            ClassKey::Struct
        };
        let name = self.ident()?;
        if self.is("<") {
            return self.error("partial specialization is not supported");
        }
        if !self.class_templates.contains(&name) {
            self.classes.insert(name.clone());
        }
        if self.eat(";") {
            return Ok(ClassDecl { key, name, bases: vec![], members: vec![], is_definition: false, span });
        }
        if self.eat_kw("final") {
            // accepted and ignored
        }
        let mut bases = Vec::new();
        if self.eat(":") {
            loop {
                let bspan = self.span();
                let mut access = None;
                let mut is_virtual = false;
                loop {
                    if self.eat_kw("virtual") {
                        is_virtual = true;
                    } else if self.eat_kw("public") {
                        access = Some(Access::Public);
                    } else if self.eat_kw("private") {
                        access = Some(Access::Private);
                    } else if self.eat_kw("protected") {
                        access = Some(Access::Protected);
                    } else {
                        break;
                    }
                }
                let ty = self.type_specifier()?;
                bases.push(BaseSpec { ty, access, is_virtual, span: bspan });
                if !self.eat(",") {
                    break;
                }
            }
        }
        self.expect("{")?;
        let mut members = Vec::new();
        while !self.eat("}") {
            if self.at_end() {
                return self.unexpected("'}'");
            }
            if self.eat(";") {
                continue;
            }
            self.member(&name, &mut members)?;
        }
        self.expect(";")?;
        Ok(ClassDecl { key, name, bases, members, is_definition: true, span })
    }

    fn member(&mut self, class: &str, out: &mut Vec<Member>) -> PResult<()> {
        self.reject_unsupported_keyword()?;
        let span = self.span();
        for (kw, access) in [("public", Access::Public), ("private", Access::Private), ("protected", Access::Protected)] {
            if self.is_kw(kw) && self.is_at(1, ":") {
                self.pos += 2;
                out.push(Member::Access(access, span));
                return Ok(());
            }
        }
        if self.is_kw("template") {
            let t = self.template_item(true)?;
            out.push(Member::Friend(Box::new(Item::Template(t))));
            return Ok(());
        }
        if self.eat_kw("friend") {
            if (self.is_kw("class") || self.is_kw("struct")) && self.ident_at(1).is_some() && self.is_at(2, ";") {
                // friend classes only affect access control
                self.pos += 3;
                return Ok(());
            }
            let fspan = self.span();
            let base = self.type_specifier()?;
            let (ty, name) = self.declarator_or_function(base)?;
            let (name, _) = name.expect("named");
            self.expect("(")?;
            let f = self.function_rest(name, FunctionKind::Normal, ty, fspan, false)?;
            out.push(Member::Friend(Box::new(Item::Function(f))));
            return Ok(());
        }
        let is_virtual = self.eat_kw("virtual");
        self.eat_kw("explicit");
        if self.is("~") {
            self.pos += 1;
            let name = self.ident()?;
            if name != class {
                return self.error(format!("destructor name '~{name}' does not match class '{class}'"));
            }
            self.expect("(")?;
            let mut f = self.function_rest(name, FunctionKind::Destructor, TypeExpr::Builtin(BuiltinType::Void), span, false)?;
            f.is_virtual = is_virtual;
            out.push(Member::Method(f));
            return Ok(());
        }
        if self.ident_at(0) == Some(class) && self.is_at(1, "(") {
            self.pos += 2;
            if is_virtual {
                return self.error("constructors cannot be virtual");
            }
            let f = self.function_rest(class.to_string(), FunctionKind::Constructor, TypeExpr::Builtin(BuiltinType::Void), span, false)?;
            out.push(Member::Method(f));
            return Ok(());
        }
        let base = self.type_specifier()?;
        let (ty, name) = self.declarator_or_function(base.clone())?;
        let (name, nspan) = name.expect("named");
        if self.eat("(") {
            let mut f = self.function_rest(name, FunctionKind::Normal, ty, span, false)?;
            f.is_virtual = is_virtual;
            out.push(Member::Method(f));
            return Ok(());
        }
        if is_virtual {
            return self.error("only member functions can be virtual");
        }
        let mut decl = self.var_rest(ty, name, nspan)?;
        loop {
            if matches!(decl.init, Some(Initializer::Paren(_))) {
                return Err(FrontendError::new(Phase::Syntax, "parenthesized default member initializer", decl.span.0.clone()));
            }
            out.push(Member::Field(decl));
            if !self.eat(",") {
                break;
            }
            let (ty, name) = self.declarator(base.clone(), false)?;
            let (name, nspan) = name.expect("named");
            decl = self.var_rest(ty, name, nspan)?;
        }
        self.expect(";")?;
        Ok(())
    }

    /// Everything after the opening parenthesis of a function declarator.
    fn function_rest(&mut self, name: String, kind: FunctionKind, ret: TypeExpr, span: Span, top_level: bool) -> PResult<FunctionDecl> {
        let params = self.param_list()?;
        let is_const = self.eat_kw("const");
        let mut throw_spec = ThrowSpecExpr::None;
        if self.eat_kw("noexcept") {
            throw_spec = ThrowSpecExpr::Noexcept;
            if self.eat("(") {
                if self.eat_kw("false") {
                    throw_spec = ThrowSpecExpr::None;
                } else {
                    self.expect_kw("true")?;
                }
                self.expect(")")?;
            }
        } else if self.eat_kw("throw") {
            self.expect("(")?;
            let mut types = Vec::new();
            if !self.eat(")") {
                loop {
                    types.push(self.type_id()?);
                    if !self.eat(",") {
                        break;
                    }
                }
                self.expect(")")?;
            }
            throw_spec = ThrowSpecExpr::Dynamic(types);
        }
        let mut is_override = false;
        loop {
            if self.eat_kw("override") {
                is_override = true;
            } else if self.eat_kw("final") {
            } else {
                break;
            }
        }
        let mut is_pure = false;
        if self.eat("=") {
            match self.peek_tok(0).map(|t| &t.kind) {
                Some(TokenKind::Int(0)) => {
                    self.pos += 1;
                    is_pure = true;
                }
                _ if self.is_kw("default") || self.is_kw("delete") => {
                    return self.error("defaulted and deleted functions are not supported");
                }
                _ => return self.unexpected("'0'"),
            }
        }
        let mut init_list = Vec::new();
        if kind == FunctionKind::Constructor && self.eat(":") {
            loop {
                let ispan = self.span();
                let name = if self.ident_at(0).is_some_and(|n| self.class_templates.contains(n)) && self.is_at(1, "<") {
                    self.type_specifier()?
                } else {
                    let s = self.span();
                    TypeExpr::named(self.ident()?, s)
                };
                let (args, brace) = if self.eat("(") {
                    (self.call_args(")")?, false)
                } else if self.eat("{") {
                    (self.call_args("}")?, true)
                } else {
                    return self.unexpected("'(' or '{'");
                };
                init_list.push(MemInit { name, args, brace, span: ispan });
                if !self.eat(",") {
                    break;
                }
            }
        }
        let body = if self.eat(";") {
            if !init_list.is_empty() {
                return self.unexpected("'{'");
            }
            None
        } else if self.is("{") {
            if is_pure {
                return self.error("pure virtual function with a body");
            }
            Some(self.block()?)
        } else {
            return self.unexpected("'{' or ';'");
        };
        let _ = top_level;
        Ok(FunctionDecl { name, qualifier: None, kind, ret, params, throw_spec, is_virtual: false, is_override, is_const, is_pure, init_list, body, span })
    }

    /// Initializer part of a variable declaration.
    fn var_rest(&mut self, ty: TypeExpr, name: String, span: Span) -> PResult<VarDecl> {
        let init = if self.eat("=") {
            if self.eat("{") {
                Some(Initializer::Brace(self.call_args("}")?))
            } else {
                Some(Initializer::Assign(self.assignment()?))
            }
        } else if self.eat("(") {
            Some(Initializer::Paren(self.call_args(")")?))
        } else if self.eat("{") {
            Some(Initializer::Brace(self.call_args("}")?))
        } else {
            None
        };
        Ok(VarDecl { ty, name, init, span })
    }

    // ---- statements

    fn block(&mut self) -> PResult<Block> {
        let span = self.span();
        self.expect("{")?;
        self.enter()?;
        let mut stmts = Vec::new();
        loop {
            if self.is("}") {
                break;
            }
            if self.at_end() {
                return self.unexpected("'}'");
            }
            stmts.push(self.stmt()?);
        }
        let end = self.span();
        self.expect("}")?;
        self.leave();
        Ok(Block { stmts, span, end })
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        self.enter()?;
        let s = self.stmt_inner();
        self.leave();
        s
    }

    fn stmt_inner(&mut self) -> PResult<Stmt> {
        let span = self.span();
        let kind = if self.is("{") {
            StmtKind::Block(self.block()?)
        } else if self.eat(";") {
            StmtKind::Empty
        } else if self.eat_kw("if") {
            self.expect("(")?;
            let cond = self.expr()?;
            self.expect(")")?;
            let then = Box::new(self.stmt()?);
            let els = if self.eat_kw("else") { Some(Box::new(self.stmt()?)) } else { None };
            StmtKind::If { cond, then, els }
        } else if self.eat_kw("while") {
            self.expect("(")?;
            let cond = self.expr()?;
            self.expect(")")?;
            StmtKind::While { cond, body: Box::new(self.stmt()?) }
        } else if self.eat_kw("do") {
            let body = Box::new(self.stmt()?);
            self.expect_kw("while")?;
            self.expect("(")?;
            let cond = self.expr()?;
            self.expect(")")?;
            self.expect(";")?;
            StmtKind::DoWhile { body, cond }
        } else if self.eat_kw("for") {
            self.expect("(")?;
            let init = if self.eat(";") {
                None
            } else {
                let ispan = self.span();
                let k = if let Some(decls) = self.try_declaration()? {
                    StmtKind::Decl(decls)
                } else {
                    let e = self.expr()?;
                    self.expect(";")?;
                    StmtKind::Expr(e)
                };
                Some(Box::new(Stmt { kind: k, span: ispan }))
            };
            let cond = if self.is(";") { None } else { Some(self.expr()?) };
            self.expect(";")?;
            let step = if self.is(")") { None } else { Some(self.expr()?) };
            self.expect(")")?;
            StmtKind::For { init, cond, step, body: Box::new(self.stmt()?) }
        } else if self.eat_kw("return") {
            let e = if self.is(";") { None } else { Some(self.expr()?) };
            self.expect(";")?;
            StmtKind::Return(e)
        } else if self.eat_kw("break") {
            self.expect(";")?;
            StmtKind::Break
        } else if self.eat_kw("continue") {
            self.expect(";")?;
            StmtKind::Continue
        } else if self.eat_kw("try") {
            let body = self.block()?;
            let mut handlers = Vec::new();
            while self.is_kw("catch") {
                let hspan = self.span();
                self.pos += 1;
                self.expect("(")?;
                let param = if self.eat("...") {
                    None
                } else {
                    let pspan = self.span();
                    let base = self.type_specifier()?;
                    let (ty, name) = self.declarator(base, true)?;
                    Some(Param { ty, name: name.map(|n| n.0), span: pspan })
                };
                self.expect(")")?;
                let body = self.block()?;
                handlers.push(Handler { param, body, span: hspan });
            }
            if handlers.is_empty() {
                return self.unexpected("'catch'");
            }
            StmtKind::Try { body, handlers }
        } else if self.eat_kw("throw") {
            let e = if self.is(";") { None } else { Some(self.assignment()?) };
            self.expect(";")?;
            StmtKind::Throw(e)
        } else if self.eat_kw("delete") {
            let array = if self.eat("[") {
                self.expect("]")?;
                true
            } else {
                false
            };
            let expr = self.unary()?;
            self.expect(";")?;
            StmtKind::Delete { expr, array }
        } else if let Some(decls) = self.try_declaration()? {
            StmtKind::Decl(decls)
        } else {
            self.reject_unsupported_keyword()?;
            let e = self.expr()?;
            self.expect(";")?;
            StmtKind::Expr(e)
        };
        Ok(Stmt { kind, span })
    }

    /// Parses a local declaration (including the `;`) if one starts here.
    fn try_declaration(&mut self) -> PResult<Option<Vec<VarDecl>>> {
        if !self.starts_type_at(0) {
            return Ok(None);
        }
        let start = self.pos;
        let base = self.type_specifier()?;
        // `T(...)` / `T{...}` / `T::` is an expression
        if self.is("(") && !self.is_at(1, "*") || self.is("{") || self.is("::") {
            self.pos = start;
            return Ok(None);
        }
        let mut decls = Vec::new();
        loop {
            let (ty, name) = self.declarator(base.clone(), false)?;
            let (name, span) = name.expect("named");
            decls.push(self.var_rest(ty, name, span)?);
            if !self.eat(",") {
                break;
            }
        }
        self.expect(";")?;
        Ok(Some(decls))
    }

    // ---- expressions

    pub(crate) fn expr(&mut self) -> PResult<Expr> {
        let e = self.assignment()?;
        if self.is(",") && self.depth > 0 {
            // comma operator is not part of MiniCxx; leave ',' to the caller
        }
        Ok(e)
    }

    fn assignment(&mut self) -> PResult<Expr> {
        self.enter()?;
        let r = self.assignment_inner();
        self.leave();
        r
    }

    fn assignment_inner(&mut self) -> PResult<Expr> {
        let lhs = self.conditional()?;
        let op = match self.peek_tok(0).map(|t| &t.kind) {
            Some(TokenKind::Punct(p)) => match *p {
                "=" => Some(None),
                "+=" => Some(Some(BinOp::Add)),
                "-=" => Some(Some(BinOp::Sub)),
                "*=" => Some(Some(BinOp::Mul)),
                "&=" => Some(Some(BinOp::BitAnd)),
                "|=" => Some(Some(BinOp::BitOr)),
                "^=" => Some(Some(BinOp::BitXor)),
                "<<=" => Some(Some(BinOp::Shl)),
                ">>=" => Some(Some(BinOp::Shr)),
                "/=" | "%=" => return self.error("division is not supported"),
                _ => None,
            },
            _ => None,
        };
        let Some(op) = op else { return Ok(lhs) };
        self.pos += 1;
        let rhs = if self.is("{") {
            let span = self.span();
            self.pos += 1;
            Expr::new(ExprKind::InitList(self.call_args("}")?), span)
        } else {
            self.assignment()?
        };
        let span = lhs.span.clone();
        Ok(Expr { kind: ExprKind::Assign(op, Box::new(lhs), Box::new(rhs)), span })
    }

    fn conditional(&mut self) -> PResult<Expr> {
        let cond = self.binary(0, false)?;
        if !self.eat("?") {
            return Ok(cond);
        }
        let a = self.expr()?;
        self.expect(":")?;
        let b = self.assignment()?;
        let span = cond.span.clone();
        Ok(Expr { kind: ExprKind::Cond(Box::new(cond), Box::new(a), Box::new(b)), span })
    }

    fn binop_here(&self, no_gt: bool) -> PResult<Option<BinOp>> {
        let Some(TokenKind::Punct(p)) = self.peek_tok(0).map(|t| &t.kind) else { return Ok(None) };
        Ok(Some(match *p {
            "*" => BinOp::Mul,
            "+" => BinOp::Add,
            "-" => BinOp::Sub,
            "<<" => BinOp::Shl,
            ">>" if no_gt => return Ok(None),
            ">>" => BinOp::Shr,
            "<" => BinOp::Lt,
            "<=" => BinOp::Le,
            ">" if no_gt => return Ok(None),
            ">" => BinOp::Gt,
            ">=" => BinOp::Ge,
            "==" => BinOp::Eq,
            "!=" => BinOp::Ne,
            "&" => BinOp::BitAnd,
            "^" => BinOp::BitXor,
            "|" => BinOp::BitOr,
            "&&" => BinOp::And,
            "||" => BinOp::Or,
            "/" | "%" => return self.error("division is not supported"),
            _ => return Ok(None),
        }))
    }

    /// Precedence climbing over binary operators binding at least `min_prec`.
    fn binary(&mut self, min_prec: u8, no_gt: bool) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.binop_here(no_gt)? {
            let prec = op.precedence();
            if prec < min_prec {
                break;
            }
            self.pos += 1;
            self.enter()?;
            let rhs = self.binary(prec + 1, no_gt);
            self.leave();
            let rhs = rhs?;
            let span = lhs.span.clone();
            lhs = Expr { kind: ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), span };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        self.enter()?;
        let r = self.unary_inner();
        self.leave();
        r
    }

    fn unary_inner(&mut self) -> PResult<Expr> {
        let span = self.span();
        let op = match self.peek_tok(0).map(|t| &t.kind) {
            Some(TokenKind::Punct(p)) => match *p {
                "-" => Some(UnOp::Neg),
                "+" => Some(UnOp::Plus),
                "!" => Some(UnOp::Not),
                "~" => Some(UnOp::BitNot),
                "*" => Some(UnOp::Deref),
                "&" => Some(UnOp::AddrOf),
                "++" => Some(UnOp::PreInc),
                "--" => Some(UnOp::PreDec),
                _ => None,
            },
            _ => None,
        };
        if let Some(op) = op {
            self.pos += 1;
            let operand = self.unary()?;
            return Ok(Expr { kind: ExprKind::Unary(op, Box::new(operand)), span });
        }
        if self.eat_kw("new") {
            return self.new_expr(span);
        }
        let e = self.primary()?;
        self.postfix(e)
    }

    fn new_expr(&mut self, span: Span) -> PResult<Expr> {
        if self.is("(") {
            return self.error("placement new is not supported");
        }
        let ty = self.type_specifier()?;
        let ty = self.ptr_operators(ty);
        if self.eat("[") {
            let n = self.expr()?;
            self.expect("]")?;
            if self.is("(") || self.is("{") {
                return self.error("initializers for array new are not supported");
            }
            return Ok(Expr { kind: ExprKind::New { ty, args: None, brace: false, array_len: Some(Box::new(n)) }, span });
        }
        let (args, brace) = if self.eat("(") {
            (Some(self.call_args(")")?), false)
        } else if self.eat("{") {
            (Some(self.call_args("}")?), true)
        } else {
            (None, false)
        };
        Ok(Expr { kind: ExprKind::New { ty, args, brace, array_len: None }, span })
    }

    /// Comma-separated arguments up to `close` (the opener is consumed).
    fn call_args(&mut self, close: &str) -> PResult<Vec<Expr>> {
        let mut args = Vec::new();
        if self.eat(close) {
            return Ok(args);
        }
        loop {
            if self.is("{") {
                let span = self.span();
                self.pos += 1;
                args.push(Expr::new(ExprKind::InitList(self.call_args("}")?), span));
            } else {
                args.push(self.assignment()?);
            }
            if !self.eat(",") {
                break;
            }
        }
        self.expect(close)?;
        Ok(args)
    }

    fn postfix(&mut self, mut e: Expr) -> PResult<Expr> {
        loop {
            let span = e.span.clone();
            if self.eat("(") {
                let args = self.call_args(")")?;
                e = Expr { kind: ExprKind::Call { callee: Box::new(e), args }, span };
            } else if self.eat("[") {
                let idx = self.expr()?;
                self.expect("]")?;
                e = Expr { kind: ExprKind::Index(Box::new(e), Box::new(idx)), span };
            } else if self.is(".") || self.is("->") {
                let arrow = self.is("->");
                self.pos += 1;
                if self.is("~") {
                    return self.error("explicit destructor calls are not supported");
                }
                let name = self.ident()?;
                e = Expr { kind: ExprKind::Member { base: Box::new(e), arrow, name }, span };
            } else if self.eat("++") {
                e = Expr { kind: ExprKind::Unary(UnOp::PostInc, Box::new(e)), span };
            } else if self.eat("--") {
                e = Expr { kind: ExprKind::Unary(UnOp::PostDec, Box::new(e)), span };
            } else {
                return Ok(e);
            }
        }
    }

    fn primary(&mut self) -> PResult<Expr> {
        let span = self.span();
        let Some(tok) = self.peek_tok(0).cloned() else { return self.unexpected("expression") };
        match tok.kind {
            TokenKind::Int(v) => {
                self.pos += 1;
                return Ok(Expr { kind: ExprKind::Int(v), span });
            }
            TokenKind::Char(c) => {
                self.pos += 1;
                return Ok(Expr { kind: ExprKind::Char(c), span });
            }
            TokenKind::Punct("(") => {
                self.pos += 1;
                if self.starts_type_at(0) {
                    return self.error("C-style casts are not supported; use static_cast");
                }
                let e = self.expr()?;
                self.expect(")")?;
                return Ok(e);
            }
            TokenKind::Punct("{") => {
                self.pos += 1;
                return Ok(Expr { kind: ExprKind::InitList(self.call_args("}")?), span });
            }
            TokenKind::Punct(_) | TokenKind::Include(_) => return self.unexpected("expression"),
            TokenKind::Ident(_) => {}
        }
        let TokenKind::Ident(word) = tok.kind else { unreachable!() };
        match word.as_str() {
            "true" | "false" => {
                self.pos += 1;
                return Ok(Expr { kind: ExprKind::Bool(word == "true"), span });
            }
            "nullptr" | "NULL" => {
                self.pos += 1;
                return Ok(Expr { kind: ExprKind::Null, span });
            }
            "this" => {
                self.pos += 1;
                return Ok(Expr { kind: ExprKind::This, span });
            }
            "static_cast" => {
                self.pos += 1;
                self.expect("<")?;
                let ty = self.type_id()?;
                self.expect_close_angle()?;
                self.expect("(")?;
                let e = self.expr()?;
                self.expect(")")?;
                return Ok(Expr { kind: ExprKind::StaticCast(ty, Box::new(e)), span });
            }
            "std" => {
                self.pos += 1;
                self.expect("::")?;
                let name = self.ident()?;
                if name != "move" {
                    return self.error(format!("unsupported library function 'std::{name}'"));
                }
                self.expect("(")?;
                let e = self.assignment()?;
                self.expect(")")?;
                return Ok(Expr { kind: ExprKind::Move(Box::new(e)), span });
            }
            "new" | "delete" | "throw" => return self.unexpected("expression"),
            _ => {}
        }
        self.reject_unsupported_keyword()?;
        if self.builtin_type().is_some() {
            return self.error("functional casts to built-in types are not supported; use static_cast");
        }
        if self.ident_at(0).is_none() {
            return self.unexpected("expression");
        }
        // type names start a temporary construction
        if self.is_type_name(&word) && !self.is_at(1, "::") {
            let ty = self.type_specifier()?;
            let brace = if self.eat("(") {
                false
            } else if self.eat("{") {
                true
            } else {
                return self.unexpected("'(' or '{' after type name");
            };
            let args = self.call_args(if brace { "}" } else { ")" })?;
            return Ok(Expr { kind: ExprKind::Construct { ty, args, brace }, span });
        }
        self.pos += 1;
        let mut name = word;
        if self.is("::") {
            if !self.is_type_name(&name) {
                return self.error(format!("'{name}' is not a class"));
            }
            self.pos += 1;
            let member = self.ident()?;
            name = format!("{name}::{member}");
        }
        let template_args = if self.func_templates.contains(&name) && self.is("<") { Some(self.template_args()?) } else { None };
        Ok(Expr { kind: ExprKind::Name { name, template_args }, span })
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse_source;
    use super::*;

    fn parse_ok(src: &str) -> TranslationUnit {
        parse_source(src, "t.cpp").unwrap_or_else(|e| panic!("{e}"))
    }

    #[test]
    fn empty_main() {
        let tu = parse_ok("int main(){}");
        assert_eq!(tu.items.len(), 1);
        let Item::Function(f) = &tu.items[0] else { panic!() };
        assert_eq!(f.name, "main");
        assert!(f.body.as_ref().unwrap().stmts.is_empty());
    }

    #[test]
    fn unterminated_class_fails_at_end_of_input() {
        let err = parse_source("class A{", "t.cpp").unwrap_err();
        assert_eq!(err.phase, Phase::Syntax);
        assert!(err.message.contains("end of input"), "{}", err.message);
    }

    #[test]
    fn friend_template_inside_class_template() {
        let tu = parse_ok(include_str!("../../../../corpus/example_friend_template.cpp"));
        let Item::Template(t) = &tu.items[0] else { panic!("{:?}", tu.items[0]) };
        assert_eq!(t.params[0].kind, TemplateParamKind::Int);
        let Item::Class(c) = &*t.item else { panic!() };
        assert_eq!(c.name, "X");
        let friends: Vec<_> = c.members.iter().filter(|m| matches!(m, Member::Friend(_))).collect();
        assert_eq!(friends.len(), 1);
        let Member::Friend(item) = friends[0] else { unreachable!() };
        let Item::Template(ft) = &**item else { panic!() };
        assert_eq!(ft.name(), "foo");
        assert_eq!(ft.params[0].name, "M");
    }

    #[test]
    fn template_id_call() {
        let tu = parse_ok("template<int M> int f(){return M;} int main(){ return f<3>() + 1; }");
        let Item::Function(main) = &tu.items[1] else { panic!() };
        let StmtKind::Return(Some(e)) = &main.body.as_ref().unwrap().stmts[0].kind else { panic!() };
        let ExprKind::Binary(BinOp::Add, lhs, _) = &e.kind else { panic!("{e:?}") };
        let ExprKind::Call { callee, .. } = &lhs.kind else { panic!() };
        assert!(matches!(&callee.kind, ExprKind::Name { template_args: Some(a), .. } if a.len() == 1));
    }

    #[test]
    fn declarations_versus_expressions() {
        let tu = parse_ok("struct S { int v; }; int main(){ S a{1}; S b(a); S(2); S *p = new S(); int (*fp)(int); return 0; }");
        let Item::Function(main) = &tu.items[1] else { panic!() };
        let kinds: Vec<_> = main.body.as_ref().unwrap().stmts.iter().map(|s| &s.kind).collect();
        assert!(matches!(kinds[0], StmtKind::Decl(_)));
        assert!(matches!(kinds[1], StmtKind::Decl(_)));
        assert!(matches!(kinds[2], StmtKind::Expr(Expr { kind: ExprKind::Construct { .. }, .. })));
        assert!(matches!(kinds[3], StmtKind::Decl(_)));
        let StmtKind::Decl(d) = kinds[4] else { panic!() };
        assert!(matches!(&d[0].ty, TypeExpr::Pointer(f) if matches!(**f, TypeExpr::Function { .. })));
    }

    #[test]
    fn nested_template_close() {
        let tu = parse_ok("template<typename T> struct B { T v; }; B<B<int>> x;");
        let Item::Global(g) = &tu.items[1] else { panic!() };
        let TypeExpr::Named { args: Some(a), .. } = &g.ty else { panic!() };
        assert!(matches!(&a[0], TemplateArg::Type(TypeExpr::Named { args: Some(_), .. })));
    }

    #[test]
    fn shadowed_template_parameter() {
        let err = parse_source("template<typename T> struct A { template<typename T> friend int f(A const &) { return 0; } };", "t.cpp").unwrap_err();
        assert_eq!(err.phase, Phase::Template);
        assert!(err.message.contains("shadows"));
    }

    #[test]
    fn division_rejected() {
        let err = parse_source("int main(){ int a = 4 / 2; }", "t.cpp").unwrap_err();
        assert!(err.message.contains("division"));
    }

    #[test]
    fn deep_nesting_is_an_error_not_a_crash() {
        // the pipeline runs on a large stack; mirror that here
        let handle = std::thread::Builder::new()
            .stack_size(256 << 20)
            .spawn(|| {
                let src = format!("int main(){{ return {}1{}; }}", "(".repeat(5000), ")".repeat(5000));
                parse_source(&src, "t.cpp").unwrap_err()
            })
            .unwrap();
        let err = handle.join().unwrap();
        assert!(err.message.contains("nesting"));
    }

    #[test]
    fn throw_specs() {
        let tu = parse_ok("void f() throw(int, double) {} void g() noexcept {} void h() {}");
        let specs: Vec<_> = tu
            .items
            .iter()
            .map(|i| match i {
                Item::Function(f) => f.throw_spec.clone(),
                _ => unreachable!(),
            })
            .collect();
        assert!(matches!(&specs[0], ThrowSpecExpr::Dynamic(v) if v.len() == 2));
        assert_eq!(specs[1], ThrowSpecExpr::Noexcept);
        assert_eq!(specs[2], ThrowSpecExpr::None);
    }
}
