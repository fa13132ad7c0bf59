//! Renders untyped syntax trees back to MiniCxx source.
//!
//! The output re-parses to a structurally equal tree. [`expr_compact`] gives
//! the operator-tight spelling used in assertion comments.

use std::fmt::Write;

use super::ast::*;
use super::types::Cv;

pub fn print_unit(tu: &TranslationUnit) -> String {
    let mut p = Printer { out: String::new(), indent: 0, compact: false };
    for item in &tu.items {
        p.item(item);
        p.out.push('\n');
    }
    p.out
}

pub fn expr_source(e: &Expr) -> String {
    let p = Printer { out: String::new(), indent: 0, compact: false };
    p.expr(e, 0)
}

/// Expression text without blanks around binary operators, e.g.
/// `foo<5678>(bring)!=12345678`.
pub fn expr_compact(e: &Expr) -> String {
    let p = Printer { out: String::new(), indent: 0, compact: true };
    p.expr(e, 0)
}

pub fn type_source(t: &TypeExpr) -> String {
    declare(t, "")
}

/// Full declaration text of `name` with type `t`, e.g. `int (*fp)(int)`.
pub fn declare(t: &TypeExpr, name: &str) -> String {
    let (base, d) = render(t, name.to_string());
    if d.is_empty() {
        base
    } else {
        format!("{base} {d}")
    }
}

fn cv_words(cv: Cv) -> &'static str {
    match (cv.is_const, cv.is_volatile) {
        (true, true) => "const volatile",
        (true, false) => "const",
        (false, true) => "volatile",
        (false, false) => "",
    }
}

fn needs_sep(d: &str) -> bool {
    !d.is_empty() && !d.starts_with(['[', '(', ')'])
}

/// Splits a type into its specifier and the declarator wrapped around `d`.
fn render(t: &TypeExpr, d: String) -> (String, String) {
    match t {
        TypeExpr::Builtin(b) => (b.keyword().to_string(), d),
        TypeExpr::Named { name, args, .. } => {
            let mut s = name.clone();
            if let Some(args) = args {
                s.push_str(&template_args(args, false));
            }
            (s, d)
        }
        TypeExpr::Qualified(cv, inner) => match &**inner {
            TypeExpr::Pointer(pointee) => {
                let sep = if needs_sep(&d) { " " } else { "" };
                render_indirection(pointee, &format!("* {}", cv_words(*cv)), &format!("{sep}{d}"))
            }
            other => {
                let (b, dd) = render(other, d);
                (format!("{} {b}", cv_words(*cv)), dd)
            }
        },
        TypeExpr::Pointer(inner) => render_indirection(inner, "*", &d),
        TypeExpr::LRef(inner) => render_indirection(inner, "&", &d),
        TypeExpr::RRef(inner) => render_indirection(inner, "&&", &d),
        TypeExpr::Array(elem, n) => {
            let dim = match n {
                Some(e) => expr_source(e),
                None => String::new(),
            };
            render(elem, format!("{d}[{dim}]"))
        }
        TypeExpr::Function { ret, params } => {
            let ps: Vec<String> = params.iter().map(type_source).collect();
            render(ret, format!("{d}({})", ps.join(", ")))
        }
    }
}

fn render_indirection(inner: &TypeExpr, op: &str, d: &str) -> (String, String) {
    if matches!(inner.strip_cv(), TypeExpr::Array(..) | TypeExpr::Function { .. }) {
        render(inner, format!("({op}{d})"))
    } else {
        render(inner, format!("{op}{d}"))
    }
}

fn template_args(args: &[TemplateArg], compact: bool) -> String {
    let p = Printer { out: String::new(), indent: 0, compact };
    let parts: Vec<String> = args
        .iter()
        .map(|a| match a {
            TemplateArg::Type(t) => type_source(t),
            TemplateArg::Value(e) => p.expr(e, BinOp::Shl.precedence()),
        })
        .collect();
    let mut s = format!("<{}>", parts.join(", "));
    if s.ends_with(">>") {
        s.insert(s.len() - 1, ' ');
    }
    s
}

struct Printer {
    out: String,
    indent: usize,
    compact: bool,
}

const PREC_ASSIGN: u8 = 1;
const PREC_COND: u8 = 2;
const PREC_UNARY: u8 = 14;
const PREC_POSTFIX: u8 = 15;
const PREC_PRIMARY: u8 = 16;

fn expr_prec(e: &Expr) -> u8 {
    match &e.kind {
        ExprKind::Assign(..) => PREC_ASSIGN,
        ExprKind::Cond(..) => PREC_COND,
        ExprKind::Binary(op, ..) => op.precedence(),
        ExprKind::Unary(UnOp::PostInc | UnOp::PostDec, _) => PREC_POSTFIX,
        ExprKind::Unary(..) | ExprKind::New { .. } => PREC_UNARY,
        ExprKind::Call { .. } | ExprKind::Member { .. } | ExprKind::Index(..) => PREC_POSTFIX,
        _ => PREC_PRIMARY,
    }
}

fn char_literal(c: u8) -> String {
    match c {
        b'\n' => "'\\n'".into(),
        b'\t' => "'\\t'".into(),
        b'\r' => "'\\r'".into(),
        0 => "'\\0'".into(),
        b'\\' => "'\\\\'".into(),
        b'\'' => "'\\''".into(),
        c => format!("'{}'", c as char),
    }
}

impl Printer {
    fn line(&mut self, s: &str) {
        for _ in 0..self.indent {
            self.out.push_str("  ");
        }
        self.out.push_str(s);
        self.out.push('\n');
    }

    fn args(&self, args: &[Expr]) -> String {
        args.iter().map(|a| self.expr(a, PREC_ASSIGN)).collect::<Vec<_>>().join(", ")
    }

    /// Renders `e`, parenthesized if it binds weaker than `min`.
    fn expr(&self, e: &Expr, min: u8) -> String {
        let s = self.expr_inner(e);
        if expr_prec(e) < min {
            format!("({s})")
        } else {
            s
        }
    }

    fn expr_inner(&self, e: &Expr) -> String {
        match &e.kind {
            ExprKind::Int(v) => v.to_string(),
            ExprKind::Char(c) => char_literal(*c),
            ExprKind::Bool(b) => b.to_string(),
            ExprKind::Null => "nullptr".into(),
            ExprKind::This => "this".into(),
            ExprKind::Name { name, template_args: args } => match args {
                Some(a) => format!("{name}{}", template_args(a, self.compact)),
                None => name.clone(),
            },
            ExprKind::Unary(op, x) => {
                let inner = self.expr(x, if matches!(op, UnOp::PostInc | UnOp::PostDec) { PREC_POSTFIX } else { PREC_UNARY });
                let sym = match op {
                    UnOp::Neg => "-",
                    UnOp::Plus => "+",
                    UnOp::Not => "!",
                    UnOp::BitNot => "~",
                    UnOp::Deref => "*",
                    UnOp::AddrOf => "&",
                    UnOp::PreInc => "++",
                    UnOp::PreDec => "--",
                    UnOp::PostInc => return format!("{inner}++"),
                    UnOp::PostDec => return format!("{inner}--"),
                };
                let clash = inner.starts_with(['-', '+', '&', '*']) && sym.ends_with(&inner[..1]);
                if clash {
                    format!("{sym} {inner}")
                } else {
                    format!("{sym}{inner}")
                }
            }
            ExprKind::Binary(op, a, b) => {
                let p = op.precedence();
                let l = self.expr(a, p);
                let r = self.expr(b, p + 1);
                if self.compact {
                    let sep = if r.starts_with(['-', '+', '&', '|', '<', '>', '=', '!']) { " " } else { "" };
                    format!("{l}{}{sep}{r}", op.symbol())
                } else {
                    format!("{l} {} {r}", op.symbol())
                }
            }
            ExprKind::Assign(op, a, b) => {
                let l = self.expr(a, PREC_COND + 1);
                let r = self.expr(b, PREC_ASSIGN);
                let sym = match op {
                    None => "=".to_string(),
                    Some(op) => format!("{}=", op.symbol()),
                };
                if self.compact {
                    format!("{l}{sym}{r}")
                } else {
                    format!("{l} {sym} {r}")
                }
            }
            ExprKind::Cond(c, a, b) => {
                let c = self.expr(c, PREC_COND + 1);
                let a = self.expr(a, PREC_ASSIGN);
                let b = self.expr(b, PREC_ASSIGN);
                if self.compact {
                    format!("{c}?{a}:{b}")
                } else {
                    format!("{c} ? {a} : {b}")
                }
            }
            ExprKind::Call { callee, args } => format!("{}({})", self.expr(callee, PREC_POSTFIX), self.args(args)),
            ExprKind::Member { base, arrow, name } => {
                format!("{}{}{name}", self.expr(base, PREC_POSTFIX), if *arrow { "->" } else { "." })
            }
            ExprKind::Index(a, i) => format!("{}[{}]", self.expr(a, PREC_POSTFIX), self.expr(i, 0)),
            ExprKind::New { ty, args, brace, array_len } => {
                let mut s = format!("new {}", type_source(ty));
                if let Some(n) = array_len {
                    let _ = write!(s, "[{}]", self.expr(n, 0));
                }
                if let Some(args) = args {
                    let (o, c) = if *brace { ('{', '}') } else { ('(', ')') };
                    let _ = write!(s, "{o}{}{c}", self.args(args));
                }
                s
            }
            ExprKind::Move(x) => format!("std::move({})", self.expr(x, PREC_ASSIGN)),
            ExprKind::Construct { ty, args, brace } => {
                let (o, c) = if *brace { ('{', '}') } else { ('(', ')') };
                format!("{}{o}{}{c}", type_source(ty), self.args(args))
            }
            ExprKind::StaticCast(t, x) => {
                let ts = type_source(t);
                let sep = if ts.ends_with('>') { " " } else { "" };
                format!("static_cast<{ts}{sep}>({})", self.expr(x, 0))
            }
            ExprKind::InitList(items) => format!("{{{}}}", self.args(items)),
        }
    }

    fn init(&self, init: &Option<Initializer>) -> String {
        match init {
            None => String::new(),
            Some(Initializer::Assign(e)) => format!(" = {}", self.expr(e, PREC_ASSIGN)),
            Some(Initializer::Paren(a)) => format!("({})", self.args(a)),
            Some(Initializer::Brace(a)) => format!("{{{}}}", self.args(a)),
        }
    }

    fn var_decls(&self, decls: &[VarDecl]) -> String {
        let mut base = String::new();
        let mut parts = Vec::new();
        for d in decls {
            let (b, dd) = render(&d.ty, d.name.clone());
            base = b;
            parts.push(format!("{dd}{}", self.init(&d.init)));
        }
        format!("{base} {}", parts.join(", "))
    }

    fn item(&mut self, item: &Item) {
        match item {
            Item::Class(c) => self.class(c),
            Item::Function(f) => self.function(f, ""),
            Item::Global(v) => {
                let s = format!("{};", self.var_decls(std::slice::from_ref(v)));
                self.line(&s);
            }
            Item::Template(t) => {
                let prefix = template_header(t);
                match &*t.item {
                    Item::Function(f) => self.function(f, &format!("{prefix} ")),
                    other => {
                        self.line(&prefix);
                        self.item(other);
                    }
                }
            }
        }
    }

    fn class(&mut self, c: &ClassDecl) {
        let key = match c.key {
            ClassKey::Class => "class",
            ClassKey::Struct => "struct",
        };
        if !c.is_definition {
            self.line(&format!("{key} {};", c.name));
            return;
        }
        let mut head = format!("{key} {}", c.name);
        if !c.bases.is_empty() {
            let bases: Vec<String> = c
                .bases
                .iter()
                .map(|b| {
                    let mut s = String::new();
                    if b.is_virtual {
                        s.push_str("virtual ");
                    }
                    if let Some(a) = b.access {
                        s.push_str(a.as_str());
                        s.push(' ');
                    }
                    s.push_str(&type_source(&b.ty));
                    s
                })
                .collect();
            head.push_str(" : ");
            head.push_str(&bases.join(", "));
        }
        head.push_str(" {");
        self.line(&head);
        self.indent += 1;
        for m in &c.members {
            match m {
                Member::Access(a, _) => {
                    self.indent -= 1;
                    self.line(&format!("{}:", a.as_str()));
                    self.indent += 1;
                }
                Member::Field(v) => {
                    let s = format!("{};", self.var_decls(std::slice::from_ref(v)));
                    self.line(&s);
                }
                Member::Method(f) => self.function(f, ""),
                Member::Friend(item) => match &**item {
                    Item::Function(f) => self.function(f, "friend "),
                    Item::Template(t) => {
                        let Item::Function(f) = &*t.item else { unreachable!("friend templates are functions") };
                        self.function(f, &format!("{} friend ", template_header(t)));
                    }
                    other => self.item(other),
                },
            }
        }
        self.indent -= 1;
        self.line("};");
    }

    fn function(&mut self, f: &FunctionDecl, prefix: &str) {
        let mut s = prefix.to_string();
        if f.is_virtual {
            s.push_str("virtual ");
        }
        let qual = f.qualifier.as_ref().map(|q| format!("{q}::")).unwrap_or_default();
        let params: Vec<String> = f
            .params
            .iter()
            .map(|p| match &p.name {
                Some(n) => declare(&p.ty, n),
                None => type_source(&p.ty),
            })
            .collect();
        let sig = format!("{qual}{}{}({})", if f.kind == FunctionKind::Destructor { "~" } else { "" }, f.name, params.join(", "));
        match f.kind {
            FunctionKind::Normal => s.push_str(&declare(&f.ret, &sig)),
            _ => s.push_str(&sig),
        }
        if f.is_const {
            s.push_str(" const");
        }
        match &f.throw_spec {
            ThrowSpecExpr::None => {}
            ThrowSpecExpr::Noexcept => s.push_str(" noexcept"),
            ThrowSpecExpr::Dynamic(ts) => {
                let ts: Vec<String> = ts.iter().map(type_source).collect();
                let _ = write!(s, " throw({})", ts.join(", "));
            }
        }
        if f.is_override {
            s.push_str(" override");
        }
        if f.is_pure {
            s.push_str(" = 0");
        }
        if !f.init_list.is_empty() {
            let inits: Vec<String> = f
                .init_list
                .iter()
                .map(|m| {
                    let (o, c) = if m.brace { ('{', '}') } else { ('(', ')') };
                    format!("{}{o}{}{c}", type_source(&m.name), self.args(&m.args))
                })
                .collect();
            let _ = write!(s, " : {}", inits.join(", "));
        }
        match &f.body {
            None => {
                s.push(';');
                self.line(&s);
            }
            Some(b) => {
                s.push_str(" {");
                self.line(&s);
                self.block_body(b);
                self.line("}");
            }
        }
    }

    fn block_body(&mut self, b: &Block) {
        self.indent += 1;
        for st in &b.stmts {
            self.stmt(st);
        }
        self.indent -= 1;
    }

    fn stmt(&mut self, st: &Stmt) {
        match &st.kind {
            StmtKind::Decl(d) => {
                let s = format!("{};", self.var_decls(d));
                self.line(&s);
            }
            StmtKind::Expr(e) => {
                let s = format!("{};", self.expr(e, 0));
                self.line(&s);
            }
            StmtKind::If { cond, then, els } => {
                let s = format!("if ({})", self.expr(cond, 0));
                self.line(&s);
                self.sub_stmt(then);
                if let Some(e) = els {
                    self.line("else");
                    self.sub_stmt(e);
                }
            }
            StmtKind::While { cond, body } => {
                let s = format!("while ({})", self.expr(cond, 0));
                self.line(&s);
                self.sub_stmt(body);
            }
            StmtKind::DoWhile { body, cond } => {
                self.line("do");
                self.sub_stmt(body);
                let s = format!("while ({});", self.expr(cond, 0));
                self.line(&s);
            }
            StmtKind::For { init, cond, step, body } => {
                let i = match init.as_deref() {
                    None => ";".to_string(),
                    Some(Stmt { kind: StmtKind::Decl(d), .. }) => format!("{};", self.var_decls(d)),
                    Some(Stmt { kind: StmtKind::Expr(e), .. }) => format!("{};", self.expr(e, 0)),
                    Some(_) => unreachable!("for-init is a declaration or expression"),
                };
                let c = cond.as_ref().map(|c| self.expr(c, 0)).unwrap_or_default();
                let s2 = step.as_ref().map(|c| self.expr(c, 0)).unwrap_or_default();
                let s = format!("for ({i} {c}; {s2})");
                self.line(&s);
                self.sub_stmt(body);
            }
            StmtKind::Return(e) => {
                let s = match e {
                    Some(e) => format!("return {};", self.expr(e, 0)),
                    None => "return;".into(),
                };
                self.line(&s);
            }
            StmtKind::Break => self.line("break;"),
            StmtKind::Continue => self.line("continue;"),
            StmtKind::Block(b) => {
                self.line("{");
                self.block_body(b);
                self.line("}");
            }
            StmtKind::Try { body, handlers } => {
                self.line("try {");
                self.block_body(body);
                for h in handlers {
                    let p = match &h.param {
                        None => "...".to_string(),
                        Some(p) => match &p.name {
                            Some(n) => declare(&p.ty, n),
                            None => type_source(&p.ty),
                        },
                    };
                    self.line(&format!("}} catch ({p}) {{"));
                    self.block_body(&h.body);
                }
                self.line("}");
            }
            StmtKind::Throw(e) => {
                let s = match e {
                    Some(e) => format!("throw {};", self.expr(e, PREC_ASSIGN)),
                    None => "throw;".into(),
                };
                self.line(&s);
            }
            StmtKind::Delete { expr, array } => {
                let s = format!("delete{} {};", if *array { "[]" } else { "" }, self.expr(expr, PREC_UNARY));
                self.line(&s);
            }
            StmtKind::Empty => self.line(";"),
        }
    }

    fn sub_stmt(&mut self, st: &Stmt) {
        if let StmtKind::Block(_) = st.kind {
            self.stmt(st);
        } else {
            self.indent += 1;
            self.stmt(st);
            self.indent -= 1;
        }
    }
}

fn template_header(t: &TemplateItem) -> String {
    let ps: Vec<String> = t
        .params
        .iter()
        .map(|p| match p.kind {
            TemplateParamKind::Type => format!("typename {}", p.name),
            TemplateParamKind::Int => format!("int {}", p.name),
        })
        .collect();
    format!("template <{}>", ps.join(", "))
}

#[cfg(test)]
mod tests {
    use super::super::parse_source;
    use super::*;

    fn roundtrip(src: &str) {
        let a = parse_source(src, "a.cpp").unwrap();
        let printed = print_unit(&a);
        let b = parse_source(&printed, "b.cpp").unwrap_or_else(|e| panic!("{e}\n{printed}"));
        assert_eq!(a, b, "\n{printed}");
    }

    #[test]
    fn compact_condition_text() {
        let tu = parse_source(include_str!("../../../../corpus/example_friend_template.cpp"), "t.cpp").unwrap();
        let Item::Function(main) = &tu.items[2] else { panic!() };
        let StmtKind::Expr(call) = &main.body.as_ref().unwrap().stmts[0].kind else { panic!() };
        let ExprKind::Call { args, .. } = &call.kind else { panic!() };
        assert_eq!(expr_compact(&args[0]), "foo<5678>(bring)!=12345678");
        assert_eq!(expr_source(&args[0]), "foo<5678>(bring) != 12345678");
    }

    #[test]
    fn declarators() {
        let int = TypeExpr::Builtin(BuiltinType::Int);
        let fp = TypeExpr::Pointer(Box::new(TypeExpr::Function { ret: Box::new(int.clone()), params: vec![int.clone()] }));
        assert_eq!(declare(&fp, "fp"), "int (*fp)(int)");
        let cp = TypeExpr::Qualified(Cv::CONST, Box::new(TypeExpr::Pointer(Box::new(int.clone()))));
        assert_eq!(declare(&cp, "p"), "int * const p");
    }

    #[test]
    fn parenthesization_preserves_structure() {
        roundtrip("int main(){ int a = 1; int b = (a + 2) * 3 - -a; b = a = (a < b) == (b < a); return -(-a); }");
    }

    #[test]
    fn roundtrip_statements() {
        roundtrip(
            "struct S { int v; S(int x) : v(x) {} virtual ~S() {} virtual int g() const = 0; };\n\
             int h(int (*f)(int), const int *p, int a[3]);\n\
             int main(){ int i, *q = nullptr; for (i = 0; i < 3; i++) { if (i) continue; else break; }\n\
             do { i--; } while (i > 0);\n\
             try { throw 1; } catch (int &e) { throw; } catch (...) {}\n\
             int *arr = new int[4]; delete[] arr; return i ? 1 : 2; }",
        );
    }
}
