//! Benchmark suite: task generation, evaluation and a brute-force oracle.

use thiserror::Error;

pub mod eval;
pub mod gen;
pub mod oracle;

pub use eval::{evaluate, run_task, BenchReport, EvalConfig, Mode, TaskOutcome};
pub use gen::{free_area_ratio, gen_suite, gen_task, suite_seeds, BenchConfig, Tag, TaskInstance};
pub use oracle::{oracle_solve, oracle_solve_fixed, OracleConfig, OracleOutcome};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BenchError {
    #[error("config error: {0}")]
    Config(String),
    #[error("ungeneratable config: {0}")]
    Ungeneratable(String),
    #[error("task file: {0}")]
    Format(String),
    #[error("{0}")]
    Oracle(String),
}
