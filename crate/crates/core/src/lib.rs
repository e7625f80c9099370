//! Least-core values of weighted voting games through a layered-DAG LP
//! whose size is pseudo-polynomial in the total weight, with a brute-force
//! oracle and an embedded simplex solver (floating-point and exact
//! rational).

pub mod bench;
pub mod dag;
pub mod games;
pub mod lp;
pub mod oracle;
pub mod scalar;
pub mod simplex;

pub use bench::{prop_experiment, regress, run_bench, BenchConfig, BenchRow, Regression};
pub use dag::{DagError, DagOptions, LayeredDag};
pub use games::{
    parse_game, Coalition, Combine, GameError, ParseError, ParsedGame, SimpleGame,
    VectorVotingGame, WeightedVotingGame,
};
pub use lp::{
    build_flow_lp, build_p1, build_p2, build_p2_dual, export_lp_file, least_core_p2,
    LeastCoreResult, LpModel,
};
pub use oracle::{certify, enumerate_minimal_winning, least_core_bruteforce};
pub use scalar::Scalar;
pub use simplex::{solve, solve_exact, LpSolution, SolveStatus, SolverError, SolverOptions};

/// Exact scalar used throughout the `--exact` path.
pub type Rational = num_rational::BigRational;
