use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, ValueEnum};
use minibmc_core::{format_verdict, run_corpus, verify_file, Heuristic, RunOptions, SolverChoice, Status};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SolverArg {
    Builtin,
    None,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum HeuristicArg {
    Vsids,
    Static,
}

fn parse_width(s: &str) -> std::result::Result<u32, String> {
    match s.parse::<u32>() {
        Ok(w @ (8 | 16 | 32)) => Ok(w),
        _ => Err(format!("expected 8, 16 or 32, got '{s}'")),
    }
}

/// Bounded model checker for a C++ subset.
#[derive(Debug, Parser)]
#[command(name = "minibmc", version)]
struct Args {
    /// Source file to verify.
    #[arg(required_unless_present = "corpus", conflicts_with = "corpus")]
    file: Option<PathBuf>,

    /// Run every `.cpp` case in a directory and compare with its directives.
    #[arg(long, value_name = "DIR")]
    corpus: Option<PathBuf>,

    /// Loop and recursion unwinding bound.
    #[arg(long, default_value_t = 10, value_name = "K")]
    unwind: u32,

    /// Check that all dynamic memory is released when main returns.
    #[arg(long)]
    memory_leak_check: bool,

    /// Claim that loops and recursion never exceed the bound.
    #[arg(long)]
    unwinding_assertions: bool,

    /// Width of `int` in bits.
    #[arg(long, default_value_t = 32, value_parser = parse_width)]
    int_width: u32,

    /// Write the verification condition as an SMT-LIB2 script.
    #[arg(long, value_name = "PATH")]
    emit_smt2: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = SolverArg::Builtin)]
    solver: SolverArg,

    /// Decision heuristic of the built-in SAT search.
    #[arg(long, value_enum, default_value_t = HeuristicArg::Vsids)]
    heuristic: HeuristicArg,

    /// Print the GOTO program.
    #[arg(long)]
    show_goto: bool,

    /// Print SSA equations and claims.
    #[arg(long)]
    show_ssa: bool,

    /// Print object layouts and vtables.
    #[arg(long)]
    show_layout: bool,

    /// Print template instances in instantiation order.
    #[arg(long)]
    show_instances: bool,

    /// Wall-clock limit per verification task, in seconds.
    #[arg(long, default_value_t = 900, value_name = "SEC")]
    timeout: u64,
}

impl Args {
    fn options(&self) -> RunOptions {
        RunOptions {
            unwind: self.unwind,
            memory_leak_check: self.memory_leak_check,
            unwinding_assertions: self.unwinding_assertions,
            int_width: self.int_width,
            show_goto: self.show_goto,
            show_ssa: self.show_ssa,
            show_layout: self.show_layout,
            show_instances: self.show_instances,
            emit_smt2: self.emit_smt2.clone(),
            solver: match self.solver {
                SolverArg::Builtin => SolverChoice::Builtin,
                SolverArg::None => SolverChoice::None,
            },
            heuristic: match self.heuristic {
                HeuristicArg::Vsids => Heuristic::Vsids,
                HeuristicArg::Static => Heuristic::Static,
            },
            timeout: Some(Duration::from_secs(self.timeout)),
        }
    }
}

fn run(args: &Args) -> Result<i32> {
    let opts = args.options();
    if opts.unwind == 0 {
        bail!("--unwind must be at least 1");
    }
    let mut out = std::io::stdout().lock();
    if let Some(dir) = &args.corpus {
        let summary = run_corpus(dir, &opts).with_context(|| format!("cannot read corpus directory {}", dir.display()))?;
        out.write_all(summary.render().as_bytes())?;
        return Ok(if summary.all_passed() { 0 } else { 1 });
    }
    let file = args.file.as_ref().expect("clap requires a file without --corpus");
    let verdict = verify_file(file, &opts);
    out.write_all(verdict.listing.as_bytes())?;
    if verdict.status == Status::Error {
        out.flush()?;
        eprintln!("{}", verdict.error.as_deref().unwrap_or("error"));
    }
    out.write_all(format_verdict(&verdict).as_bytes())?;
    Ok(verdict.status.exit_code())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
