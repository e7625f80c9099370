//! Brute-force reference answers for small games, plus the certificate
//! check used to validate solver output on games of any size.

use thiserror::Error;

use crate::dag::LayeredDag;
use crate::games::{Coalition, SimpleGame};
use crate::lp;
use crate::scalar::Scalar;
use crate::simplex::{self, SolveStatus, SolverError, SolverOptions};

/// Player-count ceiling for anything that enumerates coalitions.
pub const DEFAULT_MAX_N: usize = 20;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("game has {n} players, exceeding the cap {max_n} for enumeration")]
    TooManyPlayers { n: usize, max_n: usize },
    #[error("LP solve ended with status {0:?}")]
    SolveFailed(SolveStatus),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// All minimal winning coalitions, sorted by cardinality then by members.
/// A coalition is minimal when dropping any single member loses; for the
/// monotone games here that is equivalent to subset-minimality.
pub fn enumerate_minimal_winning(
    game: &impl SimpleGame,
    max_n: usize,
) -> Result<Vec<Coalition>, OracleError> {
    let n = game.n();
    if n > max_n {
        return Err(OracleError::TooManyPlayers { n, max_n });
    }
    let mut out = Vec::new();
    for mask in 0u64..(1u64 << n) {
        let c = Coalition::from_mask(n, mask);
        if !game.wins(&c) {
            continue;
        }
        let minimal = (0..n).all(|i| {
            if mask & (1 << i) == 0 {
                return true;
            }
            !game.wins(&Coalition::from_mask(n, mask & !(1 << i)))
        });
        if minimal {
            out.push(c);
        }
    }
    out.sort_by(|a, b| {
        a.len()
            .cmp(&b.len())
            .then_with(|| a.members_1based().cmp(&b.members_1based()))
    });
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct BruteForceResult<S> {
    pub epsilon_star: S,
    pub payoff: Vec<S>,
    pub iterations: u64,
}

/// Solve the direct coalition LP by enumeration. The reference answer the
/// DAG pipeline is checked against.
pub fn least_core_bruteforce<S: Scalar>(
    game: &impl SimpleGame,
    max_n: usize,
) -> Result<BruteForceResult<S>, OracleError> {
    let model = match lp::build_p1::<S>(game, max_n) {
        Ok(m) => m,
        Err(lp::LpBuildError::TooManyPlayers { n, max_n }) => {
            return Err(OracleError::TooManyPlayers { n, max_n });
        }
        Err(lp::LpBuildError::DimensionMismatch { .. }) => unreachable!(),
    };
    let sol = simplex::solve(&model, &SolverOptions::default())?;
    if sol.status != SolveStatus::Optimal {
        return Err(OracleError::SolveFailed(sol.status));
    }
    let point = sol.point.expect("optimal solutions carry a point");
    let mut payoff = vec![S::zero(); game.n()];
    for (var, value) in model.vars().iter().zip(&point) {
        if let lp::VarRole::Payoff(i) = var.role {
            payoff[i] = value.clone();
        }
    }
    Ok(BruteForceResult {
        epsilon_star: sol.objective.expect("optimal solutions carry a value"),
        payoff,
        iterations: sol.iterations,
    })
}

#[derive(Debug, Clone)]
pub struct FeasibilityReport<S> {
    /// `|sum x - 1|`.
    pub sum_residual: S,
    /// `max(0, -min_i x_i)`.
    pub negativity: S,
    /// `max(0, (1 - eps) - min_{winning S} x(S))`, from the DAG shortest
    /// path, so it covers every winning coalition without enumeration.
    pub worst_coalition_gap: S,
    /// Coalition achieving the minimum payoff.
    pub witness: Coalition,
    pub verdict: bool,
}

/// Certify that `(epsilon, payoff)` is feasible for the least-core LP,
/// within `tol` on every residual.
pub fn certify<S: Scalar>(
    dag: &LayeredDag,
    payoff: &[S],
    epsilon: &S,
    tol: &S,
) -> FeasibilityReport<S> {
    let one = S::from_int(1);
    let sum = payoff.iter().fold(S::zero(), |acc, v| acc + v.clone());
    let sum_residual = (sum - one.clone()).abs();
    let mut negativity = S::zero();
    for v in payoff {
        let deficit = S::zero() - v.clone();
        if deficit > negativity {
            negativity = deficit;
        }
    }
    let (min_payoff, witness) = dag
        .min_winning_payoff(payoff)
        .expect("payoff length matches the dag");
    let gap = (one - epsilon.clone()) - min_payoff;
    let worst_coalition_gap = if gap > S::zero() { gap } else { S::zero() };
    let verdict = sum_residual <= *tol
        && negativity <= *tol
        && worst_coalition_gap <= *tol;
    FeasibilityReport { sum_residual, negativity, worst_coalition_gap, witness, verdict }
}

/// True when `payoff` matches the weight-proportional division within `tol`.
pub fn proportionality_check<S: Scalar>(
    weights: &[u64],
    payoff: &[S],
    tol: &S,
) -> bool {
    if weights.len() != payoff.len() {
        return false;
    }
    let total: u64 = weights.iter().sum();
    if total == 0 {
        return false;
    }
    let total = S::from_int(total as i64);
    weights.iter().zip(payoff).all(|(w, x)| {
        let expected = S::from_int(*w as i64) / total.clone();
        (x.clone() - expected).abs() <= *tol
    })
}
