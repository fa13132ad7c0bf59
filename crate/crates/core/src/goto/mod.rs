//! GOTO intermediate representation and lowering from typed programs.

mod lower;
mod program;

pub use lower::{lower, lower_ty, LowerError, LowerOptions};
pub use program::*;

#[cfg(test)]
mod tests;
