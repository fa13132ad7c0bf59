use super::*;
use crate::frontend::parse_source;
use crate::frontend::typecheck::typecheck;
use crate::layout::build_object_models;
use crate::templates::{monomorphize, DEFAULT_MAX_DEPTH};

fn lower_src(src: &str, opts: LowerOptions) -> GotoProgram {
    let tu = parse_source(src, "t.cpp").unwrap();
    let m = monomorphize(&tu, DEFAULT_MAX_DEPTH).unwrap();
    let tp = typecheck(&m.unit, 32, &m.instances).unwrap();
    let lay = build_object_models(&tp);
    lower(&tp, &lay, opts).unwrap()
}

fn corpus(name: &str) -> String {
    std::fs::read_to_string(format!("{}/../../corpus/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

fn text(src: &str) -> String {
    emit_goto_text(&lower_src(src, LowerOptions::default()))
}

const EXAMPLES: [&str; 7] = [
    "example_polymorphism.cpp",
    "example_friend_template.cpp",
    "example_dangling_pointer.cpp",
    "example_rvalue_reference.cpp",
    "example_move_constructor.cpp",
    "example_exception_order.cpp",
    "example_throw_spec_dynamic.cpp",
];

const RICH: &str = r#"
struct A { int x; A() : x(1) {} virtual ~A() {} virtual int get() { return x; } };
struct B : A { int y; B() : y(2) {} int get() override { return y; } };
struct P { int a; int b; };
int twice(int v) { return v * 2; }
int g = 3;
int *gp = &g;
void may_throw(int v) throw(int) { if (v > 0) throw v; }
int main() {
  int arr[3] = {1, 2, 3};
  int s = 0;
  for (int i = 0; i < 3; i++) { if (i == 1) continue; s += arr[i]; }
  while (s > 100) { s--; if (s == 50) break; }
  do { s++; } while (s < 2);
  A *a = new B();
  int r = a->get();
  delete a;
  int *d = new int[4];
  d[1] = r;
  delete[] d;
  P p = {4};
  int (*fp)(int) = &twice;
  int q = fp(p.a);
  int &ref = s;
  ref = q > 0 ? q : -q;
  bool both = s > 0 && q > 0;
  try { may_throw(s); } catch (int &e) { e++; throw; } catch (...) {}
  assert(both || !both);
  return *gp;
}
"#;

fn lines_of<'a>(txt: &'a str, func: &str) -> Vec<&'a str> {
    let start = txt.lines().position(|l| l == format!("{func}:")).unwrap_or_else(|| panic!("no function {func}"));
    txt.lines().skip(start + 1).take_while(|l| !l.is_empty()).map(|l| l.trim_start()).collect()
}

#[test]
fn rvalue_reference_binds_the_moved_address() {
    let t = text(&corpus("example_rvalue_reference.cpp"));
    let main = lines_of(&t, "main");
    assert!(main.contains(&"FUNCTION_CALL: return_value = move(&a)"), "{t}");
    assert!(main.contains(&"ASSIGN rref = return_value"), "{t}");
    assert!(main.iter().any(|l| l.starts_with("ASSERT *rref == 10")), "{t}");
}

#[test]
fn move_constructor_receives_object_address() {
    let t = text(&corpus("example_move_constructor.cpp"));
    let main = lines_of(&t, "main");
    assert!(main.contains(&"ASSIGN a = { .value=10 }"), "{t}");
    assert!(main.contains(&"FUNCTION_CALL: MyStruct(&b, return_value)"), "{t}");
}

#[test]
fn empty_main_returns_zero() {
    let t = text("int main() {}");
    assert_eq!(lines_of(&t, "main"), vec!["RETURN: 0", "END_FUNCTION"]);
}

#[test]
fn exception_lowering_shape() {
    let t = text(&corpus("example_exception_order.cpp"));
    let main = lines_of(&t, "main");
    assert_eq!(
        main,
        vec![
            "CATCH_BEGIN tag-Base->1, tag-Derived->2",
            "DECL Derived tmp",
            "THROW tag-Derived, tag-Base: tmp",
            "CATCH_END",
            "GOTO 3",
            "1: HANDLER Base",
            "GOTO 3",
            "2: HANDLER Derived",
            "ASSERT false // assertion: 0",
            "3: RETURN: 0",
            "END_FUNCTION",
        ]
    );
}

#[test]
fn throw_lists_every_base_most_derived_first() {
    let p = lower_src("struct A {}; struct B : A {}; struct C : B {}; int main() { try { throw C(); } catch (A &) {} return 0; }", LowerOptions::default());
    let main = p.function("main").unwrap();
    let tags = main
        .body
        .iter()
        .find_map(|i| match &i.kind {
            InstrKind::Throw { tags, .. } => Some(tags.iter().map(|t| t.0.clone()).collect::<Vec<_>>()),
            _ => None,
        })
        .unwrap();
    assert_eq!(tags, vec!["tag-C", "tag-B", "tag-A"]);
}

#[test]
fn rethrow_has_no_tags() {
    let t = text("int main() { try { throw 1; } catch (int) { throw; } return 0; }");
    assert!(lines_of(&t, "main").contains(&"THROW"), "{t}");
}

#[test]
fn throw_declaration_comes_first() {
    let p = lower_src(&corpus("example_throw_spec_dynamic.cpp"), LowerOptions::default());
    let f = p.function("func()").unwrap();
    assert!(matches!(f.body[0].kind, InstrKind::ThrowDecl(_)));
    let p = lower_src("void f() noexcept {} int main() { f(); return 0; }", LowerOptions::default());
    assert!(matches!(p.function("f()").unwrap().body[0].kind, InstrKind::ThrowDecl(crate::frontend::ThrowSpec::Noexcept)));
}

#[test]
fn thunk_adjusts_and_calls_once() {
    let p = lower_src(&corpus("example_polymorphism.cpp"), LowerOptions::default());
    let t = emit_goto_text(&p);
    let th = lines_of(&t, "thunk::Penguin::doit(Bird*)");
    assert_eq!(
        th,
        vec!["DECL signed int return_value", "FUNCTION_CALL: return_value = Penguin::doit((Penguin *)this)", "RETURN: return_value", "END_FUNCTION"]
    );
    let f = p.function("thunk::Penguin::doit(Bird*)").unwrap();
    assert_eq!(f.body.iter().filter(|i| matches!(i.kind, InstrKind::Call { .. })).count(), 1);
}

#[test]
fn virtual_call_compares_vptr_with_each_table() {
    let t = text(&corpus("example_polymorphism.cpp"));
    let main = lines_of(&t, "main");
    assert!(main.contains(&"ASSIGN vptr = p->@vptr"), "{t}");
    assert!(main.contains(&"IF vptr != 1 THEN GOTO 1"), "{t}");
    assert!(main.contains(&"FUNCTION_CALL: return_value = Bird::doit(p)"), "{t}");
    assert!(main.contains(&"1: FUNCTION_CALL: return_value = thunk::Penguin::doit(Bird*)(p)"), "{t}");
}

#[test]
fn dangling_pointer_program_deletes_then_calls() {
    let t = text(&corpus("example_dangling_pointer.cpp"));
    let main = lines_of(&t, "main");
    let del = main.iter().position(|l| *l == "DELETE foo").expect("delete");
    assert_eq!(main[del + 1], "FUNCTION_CALL: Foo::Inc(foo)");
}

#[test]
fn constructors_set_vptrs_after_bases() {
    let t = text(&corpus("example_polymorphism.cpp"));
    assert_eq!(lines_of(&t, "Penguin::Penguin(Penguin*)"), vec!["FUNCTION_CALL: Bird(&this->@Bird)", "ASSIGN this->@vptr = 2", "END_FUNCTION"]);
}

#[test]
fn destructors_run_at_scope_exit_and_before_return() {
    let src = "struct R { int *p; R() : p(new int(0)) {} ~R() { delete p; } };
               int f(int c) { R a; if (c) { R b; return 1; } return 2; }
               int main() { return f(1); }";
    let t = text(src);
    let f = lines_of(&t, "f(int)");
    let calls: Vec<&&str> = f.iter().filter(|l| l.contains("~R")).collect();
    // inner return destroys b then a; outer return destroys a
    assert_eq!(calls.len(), 3, "{t}");
    let first_ret = f.iter().position(|l| l.contains("RETURN")).unwrap();
    assert!(f[..first_ret].iter().filter(|l| l.contains("~R")).count() == 2, "{t}");
}

#[test]
fn leak_check_is_appended_to_main() {
    let p = lower_src("int main() { int *p = new int(1); return 0; }", LowerOptions { memory_leak_check: true });
    let t = emit_goto_text(&p);
    let main = lines_of(&t, "main");
    assert_eq!(main[main.len() - 2], "ASSERT ALL_DYNAMIC_OBJECTS_FREED // memory leak: dynamically allocated memory never freed");
    let without = text("int main() { int *p = new int(1); return 0; }");
    assert!(!without.contains("memory leak"));
}

#[test]
fn while_loop_is_rotated() {
    let p = lower_src("int main() { int i = 0; while (i < 3) i++; return i; }", LowerOptions::default());
    let main = p.function("main").unwrap();
    let back: Vec<_> = main.body.iter().enumerate().filter(|(pc, i)| matches!(i.kind, InstrKind::Goto { target, .. } if target <= *pc)).collect();
    assert_eq!(back.len(), 1);
    assert!(matches!(&back[0].1.kind, InstrKind::Goto { cond: Some(_), .. }));
}

fn check_invariants(p: &GotoProgram) {
    for f in p.functions.iter().filter(|f| f.defined) {
        assert!(matches!(f.body.last().map(|i| &i.kind), Some(InstrKind::EndFunction)), "{}", f.name);
        assert!(f.exit < f.body.len());
        let mut depth: i64 = 0;
        for ins in &f.body {
            assert!(ins.loc.line >= 1 && ins.loc.column >= 1);
            assert_eq!(ins.loc.function.as_deref(), Some(f.display.as_str()));
            match &ins.kind {
                InstrKind::CatchBegin(es) => {
                    depth += 1;
                    for e in es {
                        assert!(matches!(f.body[e.target].kind, InstrKind::Landing { .. }));
                    }
                }
                InstrKind::CatchEnd => {
                    depth -= 1;
                    assert!(depth >= 0, "unbalanced CATCH_END in {}", f.name);
                }
                InstrKind::Assert { comment, class, .. } => {
                    assert!(!comment.is_empty() && !class.is_empty());
                }
                InstrKind::Goto { target, .. } => assert!(*target < f.body.len()),
                InstrKind::Call { func, .. } => assert!(p.function(func).is_some(), "unknown callee {func}"),
                _ => {}
            }
        }
        assert_eq!(depth, 0, "unbalanced catch in {}", f.name);
    }
}

#[test]
fn structural_invariants_hold() {
    for f in EXAMPLES {
        check_invariants(&lower_src(&corpus(f), LowerOptions { memory_leak_check: true }));
    }
    check_invariants(&lower_src(RICH, LowerOptions::default()));
}

#[test]
fn rich_program_lowers_every_construct() {
    let t = text(RICH);
    let main = lines_of(&t, "main");
    for needle in ["NEW", "DELETE[] d", "DELETE a", "THROW", "CATCH_BEGIN tag-int->", "&twice", "ASSIGN p = { .a=4, .b=0 }"] {
        assert!(main.iter().any(|l| l.contains(needle)), "missing {needle}:\n{t}");
    }
    assert!(lines_of(&t, "__minibmc_start").contains(&"ASSIGN gp = &g"), "{t}");
}

#[test]
fn listing_is_deterministic() {
    for f in EXAMPLES {
        assert_eq!(text(&corpus(f)), text(&corpus(f)));
    }
    assert_eq!(text(RICH), text(RICH));
}
