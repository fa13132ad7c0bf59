use super::*;

fn run(src: &str) -> Verdict {
    verify_source(src, "t.cpp", &RunOptions::default())
}

fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

#[test]
fn successful_verdict_is_one_line() {
    let v = run("int main(){ assert(1 == 1); }");
    assert_eq!(v.status, Status::Successful);
    assert_eq!(format_verdict(&v), "VERIFICATION SUCCESSFUL\n");
    assert_eq!(v.status.exit_code(), 0);
}

#[test]
fn failed_verdict_layout() {
    let v = run("int main() {\n  int x = 5;\n  assert(x == 4);\n}\n");
    assert_eq!(v.status, Status::Failed);
    let viol = v.violation.as_ref().unwrap();
    assert_eq!(viol.trace.len(), 1, "one assignment, then the claim");
    assert_eq!(viol.trace[0].lhs, "x");
    assert_eq!(viol.trace[0].value, "5");
    let text = format_verdict(&v);
    let tail = "Violated property:\n  file t.cpp line 3 column 3 function main\n  assertion x==4\n  x==4\n\nVERIFICATION FAILED\n";
    assert!(text.ends_with(tail), "{text}");
    assert!(text.starts_with("Counterexample:\n"));
    assert_eq!(v.status.exit_code(), 1);
}

#[test]
fn front_end_errors_are_error_verdicts() {
    let v = run("#include <vector>\nint main(){}");
    assert_eq!(v.status, Status::Error);
    assert_eq!(v.status.exit_code(), 2);
    assert!(v.error.as_deref().unwrap().contains("t.cpp:1:"));
}

#[test]
fn first_violation_in_program_order_is_reported() {
    let v = run("int main() {\n  int x = nondet_int();\n  assert(x != 1);\n  assert(x != 2);\n}\n");
    assert_eq!(v.violation.unwrap().loc.line, 3);
}

#[test]
fn long_property_lines_wrap_at_eighty_columns() {
    let cond = (0..30).map(|i| format!("x != {i}")).collect::<Vec<_>>().join(" && ");
    let src = format!("int main() {{ int x = nondet_int(); assert({cond}); }}");
    let text = format_verdict(&run(&src));
    assert!(text.lines().all(|l| l.chars().count() <= 80), "{text}");
    assert!(text.contains("x!=29"));
}

#[test]
fn solver_none_skips_solving() {
    let o = RunOptions { solver: SolverChoice::None, ..Default::default() };
    let v = verify_source("int main(){ assert(0); }", "t.cpp", &o);
    assert!(v.skipped);
    assert_eq!(v.claims, 1);
    assert!(format_verdict(&v).contains("1 claims generated"));
}

#[test]
fn show_options_fill_the_listing() {
    let o = RunOptions { show_goto: true, show_ssa: true, show_instances: true, show_layout: true, ..Default::default() };
    let src = "template <int N> int k() { return N; } struct A { virtual int f() { return 1; } }; int main(){ A a; assert(k<3>() == 3); }";
    let v = verify_source(src, "t.cpp", &o);
    assert!(v.listing.contains("k<3>"), "{}", v.listing);
    assert!(v.listing.contains("class A"));
    assert!(v.listing.contains("CLAIM"));
    assert!(v.listing.contains("ASSERT"));
}

#[test]
fn emit_smt2_writes_a_script() {
    let path = std::env::temp_dir().join(format!("minibmc-driver-{}.smt2", std::process::id()));
    let o = RunOptions { emit_smt2: Some(path.clone()), ..Default::default() };
    let v = verify_source("int main(){ int x = nondet_int(); assert(x != 3); }", "t.cpp", &o);
    assert_eq!(v.status, Status::Failed);
    let text = std::fs::read_to_string(&path).unwrap();
    let _ = std::fs::remove_file(&path);
    assert!(text.contains("(check-sat)"));
}

#[test]
fn timeouts_become_errors() {
    let o = RunOptions { timeout: Some(Duration::from_millis(1)), unwind: 200, ..Default::default() };
    let src = "int main(){ int x = nondet_int(); int y = nondet_int(); for (int i = 0; i < 200; i++) { x = x * y + i; } assert(x != 12345); }";
    let v = verify_source(src, "t.cpp", &o);
    assert_eq!(v.status, Status::Error);
    assert_eq!(v.error.as_deref(), Some("timeout"));
}

#[test]
fn flags_parse_and_validate() {
    let mut o = RunOptions::default();
    o.apply_flags(&["--unwind", "4", "--memory-leak-check", "--int-width=16", "--solver", "none"]).unwrap();
    assert_eq!((o.unwind, o.memory_leak_check, o.int_width, o.solver), (4, true, 16, SolverChoice::None));
    assert_eq!(RunOptions::default().apply_flags(&["--unwind", "0"]), Err(OptionError::Unwind));
    assert_eq!(RunOptions::default().apply_flags(&["--int-width", "12"]), Err(OptionError::Width(12)));
    assert!(matches!(RunOptions::default().apply_flags(&["--bogus"]), Err(OptionError::Unknown(_))));
    assert!(matches!(RunOptions::default().apply_flags(&["--unwind"]), Err(OptionError::MissingValue(_))));
}

#[test]
fn directives_are_read_from_any_comment_line() {
    let src = "// FLAGS: --unwind 3\nint main(){}\n  // PROPERTY: double free\n// VERDICT: FAILED\n";
    let c = parse_directives(Path::new("a.cpp"), src).unwrap();
    assert_eq!(c.expected, Status::Failed);
    assert_eq!(c.property.as_deref(), Some("double free"));
    assert_eq!(c.flags, vec!["--unwind", "3"]);
}

#[test]
fn malformed_directives_are_rejected() {
    let p = Path::new("a.cpp");
    assert_eq!(parse_directives(p, "int main(){}"), Err(DirectiveError::MissingVerdict));
    assert_eq!(parse_directives(p, "// VERDICT: MAYBE"), Err(DirectiveError::BadVerdict(1, "MAYBE".into())));
    assert_eq!(parse_directives(p, "// VERDICT:"), Err(DirectiveError::Empty(1, "VERDICT")));
    assert!(matches!(parse_directives(p, "// VERDICT: FAILED\n// VERDICT: FAILED"), Err(DirectiveError::Duplicate(2, _))));
}

#[test]
fn property_matches_class_or_comment() {
    let v = Violation {
        loc: SourceLocation::builtin(),
        class: "invalid object in delete".into(),
        comment: "double free or invalid pointer passed to delete".into(),
        cond_text: None,
        trace: vec![],
    };
    assert!(property_matches(&v, "invalid object in delete"));
    assert!(property_matches(&v, "double free"));
    assert!(!property_matches(&v, "memory leak"));
}

#[test]
fn empty_corpus_passes_with_a_warning() {
    let dir = std::env::temp_dir().join(format!("minibmc-empty-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let s = run_corpus(&dir, &RunOptions::default()).unwrap();
    let _ = std::fs::remove_dir(&dir);
    assert_eq!(s.cases.len(), 0);
    assert_eq!(s.pass_rate(), 100.0);
    assert!(s.render().starts_with("warning:"));
}

#[test]
fn corpus_runs_are_identical() {
    let a = run_corpus(&corpus_dir(), &RunOptions::default()).unwrap();
    let b = run_corpus(&corpus_dir(), &RunOptions::default()).unwrap();
    assert_eq!(a.render(), b.render());
    assert!(a.all_passed(), "{}", a.render());
}

#[test]
fn whole_program_encoding_ignores_later_assumptions() {
    let src = "int main() { int i = 0; while (i < 9) { i++; } return 0; }";
    let tu = parse_source(src, "t.cpp").unwrap();
    let m = monomorphize(&tu, DEFAULT_MAX_DEPTH).unwrap();
    let tp = typecheck(&m.unit, 32, &m.instances).unwrap();
    let lay = build_object_models(&tp);
    let prog = lower(&tp, &lay, LowerOptions::default()).unwrap();
    let mut b = symex(&prog, &SymexOptions { unwind: 2, unwinding_assertions: true, cancel: None }).unwrap();
    assert!(b.claims.iter().any(|c| c.class == "unwinding assertion"));
    let f = encode(&mut b);
    let (r, _) = solver::solve(&b.store, &f, SolverOptions::default(), None).unwrap();
    assert!(matches!(r, SolveResult::Sat(_)));
}
