//! Automatic design of algebraic-multigrid solve cycles.
//!
//! The library builds a fixed AMG hierarchy for a sparse SPD system, encodes
//! flexible (non-recursive, level-heterogeneous) multigrid cycles as programs
//! of a context-free grammar, and evolves those programs with grammar-guided
//! genetic programming under a two-objective fitness: cost per iteration and
//! convergence rate. Evolved cycles run standalone or as PCG preconditioners.

pub mod cycle;
pub mod dsl;
pub mod evolve;
pub mod grammar;
pub mod krylov;
pub mod mm;
pub mod nsga;
pub mod problems;
pub mod setup;
pub mod smoother;
pub mod sparse;

/// Library-wide error type.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Structural or dimensional inconsistency in an input.
    Invalid(String),
    /// LU factorization hit a pivot that is singular to tolerance.
    SingularMatrix { pivot_row: usize },
    /// A smoother encountered a zero (possibly l1-augmented) diagonal.
    ZeroDiagonal { row: usize },
    /// A cycle program violated a structural invariant.
    InvalidProgram { instr: usize, reason: String },
    /// Coarsening stalled above the dense coarse-solve cap.
    CoarseningStalled { rows: usize },
    /// A requested resource exceeds a configured cap.
    CapExceeded(String),
    /// Unknown reference-solver name.
    UnknownSolver(String),
    /// I/O or parse failure, carrying context.
    Io(String),
}

impl std::fmt::Display for Error {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Error::Invalid(msg) => write!(f, "invalid input: {msg}"),
            Error::SingularMatrix { pivot_row } => {
                write!(f, "matrix singular to tolerance at pivot row {pivot_row}")
            }
            Error::ZeroDiagonal { row } => {
                write!(f, "zero diagonal entry at row {row} during relaxation")
            }
            Error::InvalidProgram { instr, reason } => {
                write!(f, "invalid cycle program at instruction {instr}: {reason}")
            }
            Error::CoarseningStalled { rows } => write!(
                f,
                "coarsening stalled at {rows} rows above the dense cap; try a larger strength \
                 threshold or coarse-size cap"
            ),
            Error::CapExceeded(msg) => write!(f, "cap exceeded: {msg}"),
            Error::UnknownSolver(name) => write!(f, "unknown reference solver '{name}'"),
            Error::Io(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
