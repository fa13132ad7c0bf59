pub mod driver;
pub mod frontend;
pub mod goto;
pub mod layout;
pub mod solver;
pub mod symex;
pub mod templates;

pub use driver::{format_verdict, run_corpus, verify_file, verify_source, RunOptions, SolverChoice, Status, Verdict, Violation};
pub use frontend::{FrontendError, SourceLocation, ThrowSpec, TypeRepr};
pub use solver::Heuristic;
