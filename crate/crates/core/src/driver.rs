//! Pipeline orchestration, verdict formatting and the regression corpus runner.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{mpsc, Arc};
use std::time::Duration;

use crate::frontend::typecheck::typecheck;
use crate::frontend::{parse_source, FrontendError, SourceLocation};
use crate::goto::{emit_goto_text, lower, LowerError, LowerOptions};
use crate::layout::build_object_models;
use crate::solver::{self, emit_smt2, encode, encode_claim, extract_trace, Heuristic, SolveResult, SolverOptions, TraceError, TraceStep};
use crate::symex::{symex, SymexError, SymexOptions};
use crate::templates::{monomorphize, DEFAULT_MAX_DEPTH};

/// Stack size for the verification thread; the front-end and lowering recurse over syntax.
const STACK_BYTES: usize = 256 << 20;
const WRAP: usize = 80;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SolverChoice {
    #[default]
    Builtin,
    None,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOptions {
    pub unwind: u32,
    pub memory_leak_check: bool,
    pub unwinding_assertions: bool,
    pub int_width: u32,
    pub show_goto: bool,
    pub show_ssa: bool,
    pub show_layout: bool,
    pub show_instances: bool,
    pub emit_smt2: Option<PathBuf>,
    pub solver: SolverChoice,
    pub heuristic: Heuristic,
    pub timeout: Option<Duration>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            unwind: 10,
            memory_leak_check: false,
            unwinding_assertions: false,
            int_width: 32,
            show_goto: false,
            show_ssa: false,
            show_layout: false,
            show_instances: false,
            emit_smt2: None,
            solver: SolverChoice::Builtin,
            heuristic: Heuristic::default(),
            timeout: Some(Duration::from_secs(900)),
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum OptionError {
    #[error("unwind bound must be at least 1")]
    Unwind,
    #[error("integer width must be 8, 16 or 32, got {0}")]
    Width(u32),
    #[error("unknown flag '{0}'")]
    Unknown(String),
    #[error("flag '{0}' needs a value")]
    MissingValue(String),
    #[error("bad value '{1}' for '{0}'")]
    BadValue(String, String),
}

impl RunOptions {
    pub fn validate(&self) -> Result<(), OptionError> {
        if self.unwind == 0 {
            return Err(OptionError::Unwind);
        }
        if ![8, 16, 32].contains(&self.int_width) {
            return Err(OptionError::Width(self.int_width));
        }
        Ok(())
    }

    /// Apply command-line style flags, as written in corpus `FLAGS:` directives.
    pub fn apply_flags(&mut self, flags: &[&str]) -> Result<(), OptionError> {
        let mut it = flags.iter();
        while let Some(&flag) = it.next() {
            let (name, inline) = match flag.split_once('=') {
                Some((n, v)) => (n, Some(v)),
                None => (flag, None),
            };
            let mut value = || -> Result<&str, OptionError> {
                match inline {
                    Some(v) => Ok(v),
                    None => it.next().copied().ok_or_else(|| OptionError::MissingValue(name.to_string())),
                }
            };
            let num = |v: &str| v.parse::<u32>().map_err(|_| OptionError::BadValue(name.to_string(), v.to_string()));
            match name {
                "--unwind" => self.unwind = num(value()?)?,
                "--int-width" => self.int_width = num(value()?)?,
                "--timeout" => self.timeout = Some(Duration::from_secs(num(value()?)? as u64)),
                "--memory-leak-check" => self.memory_leak_check = true,
                "--unwinding-assertions" => self.unwinding_assertions = true,
                "--solver" => {
                    self.solver = match value()? {
                        "builtin" => SolverChoice::Builtin,
                        "none" => SolverChoice::None,
                        v => return Err(OptionError::BadValue(name.to_string(), v.to_string())),
                    }
                }
                _ => return Err(OptionError::Unknown(flag.to_string())),
            }
        }
        self.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Successful,
    Failed,
    Error,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Successful => 0,
            Status::Failed => 1,
            Status::Error => 2,
        }
    }

    pub fn keyword(self) -> &'static str {
        match self {
            Status::Successful => "SUCCESSFUL",
            Status::Failed => "FAILED",
            Status::Error => "ERROR",
        }
    }

    pub fn parse(s: &str) -> Option<Status> {
        match s {
            "SUCCESSFUL" => Some(Status::Successful),
            "FAILED" => Some(Status::Failed),
            "ERROR" => Some(Status::Error),
            _ => None,
        }
    }
}

/// The first violated claim and the path leading to it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub loc: SourceLocation,
    pub class: String,
    pub comment: String,
    pub cond_text: Option<String>,
    pub trace: Vec<TraceStep>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Verdict {
    pub status: Status,
    pub violation: Option<Violation>,
    pub error: Option<String>,
    /// Claims generated by symbolic execution.
    pub claims: usize,
    /// Text requested by the `show_*` options, printed before the verdict.
    pub listing: String,
    /// Set when solving was skipped on request.
    pub skipped: bool,
}

impl Verdict {
    fn error(msg: impl Into<String>, listing: String) -> Verdict {
        Verdict { status: Status::Error, violation: None, error: Some(msg.into()), claims: 0, listing, skipped: false }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DriverError {
    #[error(transparent)]
    Frontend(#[from] FrontendError),
    #[error("lowering error: {0}")]
    Lower(#[from] LowerError),
    #[error("{0}")]
    Symex(#[from] SymexError),
    #[error("timeout")]
    Timeout,
    #[error("counterexample replay failed: {0}")]
    Trace(#[from] TraceError),
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Options(#[from] OptionError),
}

fn run_pipeline(src: &str, file: &str, opts: &RunOptions, cancel: &Arc<AtomicBool>, listing: &mut String) -> Result<Verdict, DriverError> {
    opts.validate()?;
    let tu = parse_source(src, file)?;
    let m = monomorphize(&tu, DEFAULT_MAX_DEPTH)?;
    if opts.show_instances {
        for i in &m.instances {
            listing.push_str(&i.mangled);
            listing.push('\n');
        }
    }
    let tp = typecheck(&m.unit, opts.int_width, &m.instances)?;
    let lay = build_object_models(&tp);
    if opts.show_layout {
        listing.push_str(&lay.render(&tp));
    }
    let prog = lower(&tp, &lay, LowerOptions { memory_leak_check: opts.memory_leak_check })?;
    if opts.show_goto {
        listing.push_str(&emit_goto_text(&prog));
    }
    let sopts = SymexOptions { unwind: opts.unwind, unwinding_assertions: opts.unwinding_assertions, cancel: Some(cancel.clone()) };
    let mut bundle = symex(&prog, &sopts).map_err(|e| if e == SymexError::Cancelled { DriverError::Timeout } else { e.into() })?;
    if opts.show_ssa {
        listing.push_str(&bundle.render_ssa());
    }
    if let Some(path) = &opts.emit_smt2 {
        let f = encode(&mut bundle);
        let text = emit_smt2(&bundle.store, &f);
        std::fs::write(path, text).map_err(|source| DriverError::Io { path: path.display().to_string(), source })?;
    }
    let claims = bundle.claims.len();
    let mut verdict = Verdict { status: Status::Successful, violation: None, error: None, claims, listing: String::new(), skipped: false };
    if opts.solver == SolverChoice::None {
        verdict.skipped = true;
        return Ok(verdict);
    }
    let sol = SolverOptions { heuristic: opts.heuristic };
    for i in 0..claims {
        let f = encode_claim(&mut bundle, i);
        let (r, _) = solver::solve(&bundle.store, &f, sol, Some(cancel)).map_err(|_| DriverError::Timeout)?;
        if let SolveResult::Sat(model) = r {
            let trace = extract_trace(&bundle, &model, i)?;
            let c = &bundle.claims[i];
            verdict.status = Status::Failed;
            verdict.violation =
                Some(Violation { loc: c.loc.clone(), class: c.class.clone(), comment: c.comment.clone(), cond_text: c.cond_text.clone(), trace });
            break;
        }
    }
    Ok(verdict)
}

/// Verify one source text. Never panics on bad input; failures become `Status::Error`.
pub fn verify_source(src: &str, file: &str, opts: &RunOptions) -> Verdict {
    let cancel = Arc::new(AtomicBool::new(false));
    let (tx, rx) = mpsc::channel();
    let src = src.to_string();
    let file = file.to_string();
    let o = opts.clone();
    let c = cancel.clone();
    let worker = std::thread::Builder::new().stack_size(STACK_BYTES).spawn(move || {
        let mut listing = String::new();
        let r = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| run_pipeline(&src, &file, &o, &c, &mut listing)));
        let v = match r {
            Ok(Ok(mut v)) => {
                v.listing = listing;
                v
            }
            Ok(Err(e)) => Verdict::error(e.to_string(), listing),
            Err(p) => {
                let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default();
                Verdict::error(format!("internal error: {msg}"), listing)
            }
        };
        let _ = tx.send(v);
    });
    let Ok(handle) = worker else {
        return Verdict::error("cannot start verification thread", String::new());
    };
    let result = match opts.timeout {
        Some(t) => match rx.recv_timeout(t) {
            Ok(v) => Some(v),
            Err(_) => {
                cancel.store(true, Ordering::Relaxed);
                // the worker polls the flag; give it a moment to unwind
                rx.recv_timeout(Duration::from_secs(5)).ok().map(|_| Verdict::error("timeout", String::new()))
            }
        },
        None => rx.recv().ok(),
    };
    match result {
        Some(v) => {
            let _ = handle.join();
            v
        }
        None => Verdict::error("timeout", String::new()),
    }
}

pub fn verify_file(path: &Path, opts: &RunOptions) -> Verdict {
    match std::fs::read_to_string(path) {
        Ok(src) => verify_source(&src, &path.display().to_string(), opts),
        Err(e) => Verdict::error(format!("cannot read {}: {e}", path.display()), String::new()),
    }
}

/// Break a line at spaces so no output line exceeds the wrap width.
fn wrap(line: &str, indent: &str, out: &mut String) {
    let mut rest = line;
    let mut first = true;
    loop {
        let lead = if first { indent.to_string() } else { format!("{indent}  ") };
        let room = WRAP.saturating_sub(lead.len()).max(20);
        if rest.chars().count() <= room {
            let _ = writeln!(out, "{lead}{rest}");
            return;
        }
        let cut = rest.char_indices().nth(room).map(|(i, _)| i).unwrap_or(rest.len());
        let split = rest[..cut].rfind(' ').filter(|&i| i > 0).unwrap_or(cut);
        let _ = writeln!(out, "{lead}{}", &rest[..split]);
        rest = rest[split..].trim_start();
        first = false;
    }
}

/// Text printed to standard output for a verdict (without any listing).
pub fn format_verdict(v: &Verdict) -> String {
    let mut out = String::new();
    match v.status {
        Status::Successful if v.skipped => {
            let _ = writeln!(out, "{} claims generated; solving skipped", v.claims);
        }
        Status::Successful => out.push_str("VERIFICATION SUCCESSFUL\n"),
        Status::Error => out.push_str("VERIFICATION ERROR\n"),
        Status::Failed => {
            let viol = v.violation.as_ref().expect("failed verdicts carry a violation");
            if !viol.trace.is_empty() {
                out.push_str("Counterexample:\n");
                for (k, s) in viol.trace.iter().enumerate() {
                    out.push('\n');
                    wrap(&format!("State {} {}", k + 1, s.loc), "", &mut out);
                    out.push_str(&"-".repeat(52));
                    out.push('\n');
                    wrap(&format!("{} = {}", s.lhs, s.value), "  ", &mut out);
                }
                out.push('\n');
            }
            out.push_str("Violated property:\n");
            wrap(&viol.loc.to_string(), "  ", &mut out);
            match &viol.cond_text {
                Some(text) => {
                    let head = if viol.comment.is_empty() { viol.class.clone() } else { format!("{} {}", viol.class, viol.comment) };
                    wrap(&head, "  ", &mut out);
                    wrap(text, "  ", &mut out);
                }
                None => {
                    wrap(&viol.class, "  ", &mut out);
                    if !viol.comment.is_empty() {
                        wrap(&viol.comment, "  ", &mut out);
                    }
                }
            }
            out.push_str("\nVERIFICATION FAILED\n");
        }
    }
    out
}

// ---- corpus ---------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CorpusCase {
    pub path: PathBuf,
    pub expected: Status,
    pub property: Option<String>,
    pub flags: Vec<String>,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum DirectiveError {
    #[error("missing VERDICT directive")]
    MissingVerdict,
    #[error("line {0}: unknown verdict '{1}'")]
    BadVerdict(usize, String),
    #[error("line {0}: empty {1} directive")]
    Empty(usize, &'static str),
    #[error("line {0}: duplicate {1} directive")]
    Duplicate(usize, &'static str),
}

/// Read `VERDICT:`, `PROPERTY:` and `FLAGS:` directives from `//` comment lines.
pub fn parse_directives(path: &Path, src: &str) -> Result<CorpusCase, DirectiveError> {
    let mut expected = None;
    let mut property = None;
    let mut flags = None;
    for (n, line) in src.lines().enumerate() {
        let n = n + 1;
        let Some(comment) = line.trim_start().strip_prefix("//") else { continue };
        let comment = comment.trim();
        let (key, rest) = match comment.split_once(':') {
            Some((k, r)) if matches!(k.trim(), "VERDICT" | "PROPERTY" | "FLAGS") => (k.trim(), r.trim()),
            _ => continue,
        };
        let key: &'static str = match key {
            "VERDICT" => "VERDICT",
            "PROPERTY" => "PROPERTY",
            _ => "FLAGS",
        };
        if rest.is_empty() {
            return Err(DirectiveError::Empty(n, key));
        }
        let dup = match key {
            "VERDICT" => expected.replace(Status::parse(rest).ok_or_else(|| DirectiveError::BadVerdict(n, rest.to_string()))?).is_some(),
            "PROPERTY" => property.replace(rest.to_string()).is_some(),
            _ => flags.replace(rest.split_whitespace().map(str::to_string).collect::<Vec<_>>()).is_some(),
        };
        if dup {
            return Err(DirectiveError::Duplicate(n, key));
        }
    }
    Ok(CorpusCase { path: path.to_path_buf(), expected: expected.ok_or(DirectiveError::MissingVerdict)?, property, flags: flags.unwrap_or_default() })
}

/// Whether a violation satisfies an expected property: class equality or a comment substring.
pub fn property_matches(v: &Violation, expected: &str) -> bool {
    v.class == expected || v.comment.contains(expected)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CaseOutcome {
    Pass,
    Fail(String),
    HarnessError(String),
}

#[derive(Clone, Debug)]
pub struct CaseReport {
    pub name: String,
    pub outcome: CaseOutcome,
    pub verdict: Option<Verdict>,
}

#[derive(Clone, Debug)]
pub struct CorpusSummary {
    pub cases: Vec<CaseReport>,
}

impl CorpusSummary {
    pub fn passed(&self) -> usize {
        self.cases.iter().filter(|c| c.outcome == CaseOutcome::Pass).count()
    }

    pub fn all_passed(&self) -> bool {
        self.passed() == self.cases.len()
    }

    pub fn pass_rate(&self) -> f64 {
        if self.cases.is_empty() {
            100.0
        } else {
            100.0 * self.passed() as f64 / self.cases.len() as f64
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        if self.cases.is_empty() {
            out.push_str("warning: no corpus cases found\n");
        }
        for c in &self.cases {
            match &c.outcome {
                CaseOutcome::Pass => {
                    let got = c.verdict.as_ref().map(|v| v.status.keyword()).unwrap_or("?");
                    let _ = writeln!(out, "PASS {} ({got})", c.name);
                }
                CaseOutcome::Fail(why) => {
                    let _ = writeln!(out, "FAIL {}: {why}", c.name);
                }
                CaseOutcome::HarnessError(why) => {
                    let _ = writeln!(out, "FAIL {}: harness error: {why}", c.name);
                }
            }
        }
        let _ = writeln!(out, "pass rate: {}/{} ({:.1}%)", self.passed(), self.cases.len(), self.pass_rate());
        out
    }
}

fn run_case(path: &Path, base: &RunOptions) -> CaseReport {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let harness = |why: String| CaseReport { name: name.clone(), outcome: CaseOutcome::HarnessError(why), verdict: None };
    let src = match std::fs::read_to_string(path) {
        Ok(s) => s,
        Err(e) => return harness(e.to_string()),
    };
    let case = match parse_directives(path, &src) {
        Ok(c) => c,
        Err(e) => return harness(e.to_string()),
    };
    let mut opts = base.clone();
    let flags: Vec<&str> = case.flags.iter().map(String::as_str).collect();
    if let Err(e) = opts.apply_flags(&flags) {
        return harness(e.to_string());
    }
    let v = verify_source(&src, &name, &opts);
    let outcome = if v.status != case.expected {
        let detail = v.error.as_deref().map(|e| format!(" ({e})")).unwrap_or_default();
        CaseOutcome::Fail(format!("expected {}, got {}{detail}", case.expected.keyword(), v.status.keyword()))
    } else {
        match (&case.property, &v.violation) {
            (Some(p), Some(viol)) if !property_matches(viol, p) => CaseOutcome::Fail(format!("expected property '{p}', got '{}'", viol.class)),
            _ => CaseOutcome::Pass,
        }
    };
    CaseReport { name, outcome, verdict: Some(v) }
}

/// Run every `.cpp` file in `dir`, in name order, using `base` plus per-case flags.
pub fn run_corpus(dir: &Path, base: &RunOptions) -> std::io::Result<CorpusSummary> {
    let mut files: Vec<PathBuf> =
        std::fs::read_dir(dir)?.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.extension().is_some_and(|x| x == "cpp")).collect();
    files.sort();
    let workers = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1).min(files.len().max(1));
    let next = std::sync::atomic::AtomicUsize::new(0);
    let mut slots: Vec<Option<CaseReport>> = vec![None; files.len()];
    let results = std::sync::Mutex::new(&mut slots);
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= files.len() {
                    break;
                }
                let r = run_case(&files[i], base);
                results.lock().expect("corpus results lock")[i] = Some(r);
            });
        }
    });
    Ok(CorpusSummary { cases: slots.into_iter().map(|c| c.expect("every case ran")).collect() })
}

#[cfg(test)]
mod tests;
