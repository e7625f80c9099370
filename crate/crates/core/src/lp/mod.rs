//! Sparse LP models and the three builders: the shortest-path-dual
//! formulation over the layered DAG (the main pipeline), the exponential
//! coalition formulation (oracle), and the unit-flow cross-check.

pub mod writer;

use std::collections::HashSet;

use thiserror::Error;

use crate::dag::LayeredDag;
use crate::games::{Coalition, SimpleGame};
use crate::oracle;
use crate::scalar::Scalar;
use crate::simplex::{LpSolution, SolveStatus};

pub use writer::export_lp_file;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rel {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

/// Semantic role of a variable, kept through solving so results can be
/// read back out of solution vectors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VarRole {
    Epsilon,
    Vertex { layer: usize, coord: usize },
    Terminal,
    /// 0-based player index.
    Payoff(usize),
    Flow,
    Other,
}

#[derive(Debug, Clone)]
pub struct Variable<S> {
    pub name: String,
    /// `None` means unbounded on that side.
    pub lower: Option<S>,
    pub upper: Option<S>,
    pub role: VarRole,
    /// Starting value hint for free variables; solvers may ignore it.
    pub start: Option<S>,
}

#[derive(Debug, Clone)]
pub struct Row<S> {
    pub name: String,
    pub coeffs: Vec<(usize, S)>,
    pub rel: Rel,
    pub rhs: S,
}

#[derive(Debug, Clone)]
pub struct LpModel<S> {
    vars: Vec<Variable<S>>,
    rows: Vec<Row<S>>,
    objective: Vec<(usize, S)>,
    sense: Sense,
    names: HashSet<String>,
}

impl<S: Scalar> LpModel<S> {
    pub fn new(sense: Sense) -> Self {
        Self { vars: Vec::new(), rows: Vec::new(), objective: Vec::new(), sense, names: HashSet::new() }
    }

    pub fn add_var(
        &mut self,
        name: impl Into<String>,
        lower: Option<S>,
        upper: Option<S>,
        role: VarRole,
    ) -> usize {
        let name = name.into();
        assert!(self.names.insert(name.clone()), "duplicate variable name {name}");
        self.vars.push(Variable { name, lower, upper, role, start: None });
        self.vars.len() - 1
    }

    /// Record a starting-value hint for a free variable.
    pub fn set_start(&mut self, var: usize, value: S) {
        self.vars[var].start = Some(value);
    }

    pub fn add_row(&mut self, name: impl Into<String>, coeffs: Vec<(usize, S)>, rel: Rel, rhs: S) {
        debug_assert!(coeffs.iter().all(|&(v, _)| v < self.vars.len()));
        self.rows.push(Row { name: name.into(), coeffs, rel, rhs });
    }

    pub fn set_objective(&mut self, coeffs: Vec<(usize, S)>) {
        debug_assert!(coeffs.iter().all(|&(v, _)| v < self.vars.len()));
        self.objective = coeffs;
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    pub fn vars(&self) -> &[Variable<S>] {
        &self.vars
    }

    pub fn rows(&self) -> &[Row<S>] {
        &self.rows
    }

    pub fn objective(&self) -> &[(usize, S)] {
        &self.objective
    }

    pub fn n_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// Activity of each row at `point`, for residual checks.
    pub fn row_activity(&self, row: &Row<S>, point: &[S]) -> S {
        row.coeffs
            .iter()
            .fold(S::zero(), |acc, (v, c)| acc + c.clone() * point[*v].clone())
    }

    /// Worst constraint violation plus worst bound violation at `point`.
    pub fn infeasibility(&self, point: &[S]) -> S {
        let mut worst = S::zero();
        let mut bump = |v: S| {
            if v > worst {
                worst = v;
            }
        };
        for row in &self.rows {
            let act = self.row_activity(row, point);
            match row.rel {
                Rel::Le => bump(act - row.rhs.clone()),
                Rel::Ge => bump(row.rhs.clone() - act),
                Rel::Eq => bump((act - row.rhs.clone()).abs()),
            }
        }
        for (var, value) in self.vars.iter().zip(point) {
            if let Some(lo) = &var.lower {
                bump(lo.clone() - value.clone());
            }
            if let Some(up) = &var.upper {
                bump(value.clone() - up.clone());
            }
        }
        worst
    }
}

#[derive(Debug, Error)]
pub enum LpBuildError {
    #[error("game has {n} players, exceeding the cap {max_n} for coalition enumeration")]
    TooManyPlayers { n: usize, max_n: usize },
    #[error("payoff vector has length {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

fn coord_suffix(dag: &LayeredDag, coord: usize) -> String {
    dag.decode_coord(coord)
        .iter()
        .map(|a| a.to_string())
        .collect::<Vec<_>>()
        .join("_")
}

/// The main formulation: minimize epsilon subject to the shortest-path dual
/// certifying every winning coalition a payoff of at least `1 - eps`.
/// Variable and row counts are linear in the (live) DAG size.
pub fn build_p2<S: Scalar>(dag: &LayeredDag) -> LpModel<S> {
    let n = dag.n();
    let mut model = LpModel::new(Sense::Minimize);
    let eps = model.add_var("eps", None, None, VarRole::Epsilon);
    // starting at eps = 1 with everything else at zero satisfies every row
    // except the payoff-sum equality, so phase 1 is nearly trivial
    model.set_start(eps, S::from_int(1));
    let y_t = model.add_var("yT", None, None, VarRole::Terminal);
    let mut y = vec![usize::MAX; (n + 1) * dag.layer_len()];
    for layer in 0..=n {
        for coord in 0..dag.layer_len() {
            if dag.is_live(layer, coord) {
                let idx = model.add_var(
                    format!("y_{}_{}", layer, coord_suffix(dag, coord)),
                    None,
                    None,
                    VarRole::Vertex { layer, coord },
                );
                y[layer * dag.layer_len() + coord] = idx;
            }
        }
    }
    let x: Vec<usize> = (0..n)
        .map(|i| model.add_var(format!("x_{}", i + 1), Some(S::zero()), None, VarRole::Payoff(i)))
        .collect();
    let one = S::from_int(1);
    let neg = |s: &S| S::zero() - s.clone();
    let source = y[0];
    debug_assert_ne!(source, usize::MAX, "source must be live");
    model.add_row(
        "r_eps",
        vec![(y_t, one.clone()), (source, neg(&one)), (eps, one.clone())],
        Rel::Ge,
        one.clone(),
    );
    dag.for_each_a0_arc(|layer, coord| {
        let head = y[layer * dag.layer_len() + coord];
        let tail = y[(layer - 1) * dag.layer_len() + coord];
        model.add_row(
            format!("a0_{}_{}", layer, coord_suffix(dag, coord)),
            vec![(head, one.clone()), (tail, neg(&one))],
            Rel::Le,
            S::zero(),
        );
    });
    dag.for_each_ai_arc(|layer, tail_c, head_c| {
        let head = y[layer * dag.layer_len() + head_c];
        let tail = y[(layer - 1) * dag.layer_len() + tail_c];
        model.add_row(
            format!("a{}_{}", layer, coord_suffix(dag, tail_c)),
            vec![(head, one.clone()), (tail, neg(&one)), (x[layer - 1], neg(&one))],
            Rel::Le,
            S::zero(),
        );
    });
    for coord in dag.target_coords() {
        let v = y[n * dag.layer_len() + coord];
        model.add_row(
            format!("t_{}", coord_suffix(dag, coord)),
            vec![(v, one.clone()), (y_t, neg(&one))],
            Rel::Eq,
            S::zero(),
        );
    }
    model.add_row(
        "r_sum",
        x.iter().map(|&v| (v, one.clone())).collect(),
        Rel::Eq,
        one.clone(),
    );
    // pin the one-dimensional shift freedom in y
    model.add_row("r_src", vec![(source, one.clone())], Rel::Eq, S::zero());
    model.set_objective(vec![(eps, one)]);
    model
}

/// Flow form of P2's dual: route one unit of flow from the source to the
/// targets while keeping the per-player load (total flow on that player's
/// take arcs) below `z`, and minimize `z`. By LP duality `eps* = 1 - z*`,
/// and the multipliers on the load rows recover a least-core payoff vector.
///
/// The simplex walks this side far better than P2 itself: the long chains
/// of free `y` variables make P2 massively primal-degenerate at scale,
/// while here a pivot reroutes a tangible amount of flow.
pub fn build_p2_dual<S: Scalar>(dag: &LayeredDag) -> LpModel<S> {
    let n = dag.n();
    let mut model = LpModel::new(Sense::Minimize);
    let layer_len = dag.layer_len();
    let z = model.add_var("z_load", Some(S::zero()), None, VarRole::Other);
    let one = S::from_int(1);
    let neg_one = S::zero() - one.clone();
    // net[vertex] collects (var, +1 outgoing / -1 incoming)
    let mut net: Vec<Vec<(usize, S)>> = vec![Vec::new(); (n + 1) * layer_len];
    let mut loads: Vec<Vec<(usize, S)>> = vec![Vec::new(); n];
    dag.for_each_a0_arc(|layer, coord| {
        let var = model.add_var(
            format!("fs_{}_{}", layer, coord_suffix(dag, coord)),
            Some(S::zero()),
            None,
            VarRole::Flow,
        );
        net[(layer - 1) * layer_len + coord].push((var, one.clone()));
        net[layer * layer_len + coord].push((var, neg_one.clone()));
    });
    dag.for_each_ai_arc(|layer, tail, head| {
        let var = model.add_var(
            format!("ft{}_{}", layer, coord_suffix(dag, tail)),
            Some(S::zero()),
            None,
            VarRole::Flow,
        );
        net[(layer - 1) * layer_len + tail].push((var, one.clone()));
        net[layer * layer_len + head].push((var, neg_one.clone()));
        loads[layer - 1].push((var, one.clone()));
    });
    let mut terminal_in = Vec::new();
    for coord in dag.target_coords() {
        let var = model.add_var(
            format!("fe_{}", coord_suffix(dag, coord)),
            Some(S::zero()),
            None,
            VarRole::Flow,
        );
        net[n * layer_len + coord].push((var, one.clone()));
        terminal_in.push((var, neg_one.clone()));
    }
    for layer in 0..=n {
        for coord in 0..layer_len {
            if !dag.is_live(layer, coord) {
                continue;
            }
            let coeffs = std::mem::take(&mut net[layer * layer_len + coord]);
            let rhs = if layer == 0 && coord == 0 { one.clone() } else { S::zero() };
            model.add_row(
                format!("v_{}_{}", layer, coord_suffix(dag, coord)),
                coeffs,
                Rel::Eq,
                rhs,
            );
        }
    }
    model.add_row("v_sink", terminal_in, Rel::Eq, neg_one.clone());
    // the load rows come last, one per player in order, so the caller can
    // read the payoff vector straight off the tail of the row duals
    for (i, mut coeffs) in loads.into_iter().enumerate() {
        coeffs.push((z, neg_one.clone()));
        model.add_row(format!("load_{}", i + 1), coeffs, Rel::Le, S::zero());
    }
    model.set_objective(vec![(z, one)]);
    model
}

#[derive(Debug, Error)]
pub enum P2SolveError {
    #[error(transparent)]
    Solver(#[from] crate::simplex::SolverError),
    #[error("flow model did not solve to optimality: {0:?}")]
    NotOptimal(SolveStatus),
}

/// The main pipeline step: least-core value and payoff vector from the DAG,
/// computed by solving P2 through its flow dual and certified against the
/// DAG's own shortest-path evaluation.
pub fn least_core_p2<S: Scalar>(
    dag: &LayeredDag,
    opts: &crate::simplex::SolverOptions<S>,
) -> Result<LeastCoreResult<S>, P2SolveError> {
    let model = build_p2_dual::<S>(dag);
    if S::EXACT {
        let cells = model.n_rows() as u128 * model.n_vars() as u128;
        if cells > crate::simplex::EXACT_MODE_CELL_CAP {
            return Err(crate::simplex::SolverError::ExactModeCapExceeded {
                rows: model.n_rows(),
                cols: model.n_vars(),
                cap: crate::simplex::EXACT_MODE_CELL_CAP,
            }
            .into());
        }
    }
    let sol = crate::simplex::solve(&model, opts)?;
    if sol.status != SolveStatus::Optimal {
        return Err(P2SolveError::NotOptimal(sol.status));
    }
    let duals = sol.row_duals.as_ref().expect("optimal solutions carry duals");
    let n = dag.n();
    let m = model.n_rows();
    // load rows are Le in a minimization, so their multipliers are <= 0 and
    // x_i = -dual; tolerance-sized negatives are clamped
    let payoff: Vec<S> = (0..n)
        .map(|i| {
            debug_assert!(model.rows()[m - n + i].name == format!("load_{}", i + 1));
            let x = S::zero() - duals[m - n + i].clone();
            if x < S::zero() {
                S::zero()
            } else {
                x
            }
        })
        .collect();
    let epsilon_star = S::from_int(1) - sol.objective.clone().expect("optimal");
    Ok(certified_result(dag, epsilon_star, payoff, sol.iterations))
}

/// The direct coalition formulation, restricted to minimal winning
/// coalitions (superset rows are dominated because payoffs are
/// non-negative). Exponential; guarded by `max_n`.
pub fn build_p1<S: Scalar>(
    game: &impl SimpleGame,
    max_n: usize,
) -> Result<LpModel<S>, LpBuildError> {
    let n = game.n();
    if n > max_n {
        return Err(LpBuildError::TooManyPlayers { n, max_n });
    }
    let minimal = oracle::enumerate_minimal_winning(game, max_n)
        .expect("player cap already checked");
    let mut model = LpModel::new(Sense::Minimize);
    let eps = model.add_var("eps", None, None, VarRole::Epsilon);
    let x: Vec<usize> = (0..n)
        .map(|i| model.add_var(format!("x_{}", i + 1), Some(S::zero()), None, VarRole::Payoff(i)))
        .collect();
    let one = S::from_int(1);
    for (idx, coalition) in minimal.iter().enumerate() {
        let mut coeffs: Vec<(usize, S)> =
            coalition.iter().map(|i| (x[i], one.clone())).collect();
        coeffs.push((eps, one.clone()));
        model.add_row(format!("mw_{idx}"), coeffs, Rel::Ge, one.clone());
    }
    model.add_row(
        "r_sum",
        x.iter().map(|&v| (v, one.clone())).collect(),
        Rel::Eq,
        one.clone(),
    );
    model.set_objective(vec![(eps, one)]);
    Ok(model)
}

/// Unit-flow formulation of the shortest path for a fixed payoff vector:
/// its optimum equals `min_winning_payoff(dag, x)`.
pub fn build_flow_lp<S: Scalar>(dag: &LayeredDag, x: &[S]) -> Result<LpModel<S>, LpBuildError> {
    let n = dag.n();
    if x.len() != n {
        return Err(LpBuildError::DimensionMismatch { expected: n, got: x.len() });
    }
    let mut model = LpModel::new(Sense::Minimize);
    let layer_len = dag.layer_len();
    // net[vertex] collects (var, +1 outgoing / -1 incoming)
    let mut net: Vec<Vec<(usize, S)>> = vec![Vec::new(); (n + 1) * layer_len];
    let one = S::from_int(1);
    let neg_one = S::zero() - one.clone();
    let mut objective = Vec::new();
    dag.for_each_a0_arc(|layer, coord| {
        let var = model.add_var(
            format!("fs_{}_{}", layer, coord_suffix(dag, coord)),
            Some(S::zero()),
            None,
            VarRole::Flow,
        );
        net[(layer - 1) * layer_len + coord].push((var, one.clone()));
        net[layer * layer_len + coord].push((var, neg_one.clone()));
    });
    dag.for_each_ai_arc(|layer, tail, head| {
        let var = model.add_var(
            format!("ft{}_{}", layer, coord_suffix(dag, tail)),
            Some(S::zero()),
            None,
            VarRole::Flow,
        );
        net[(layer - 1) * layer_len + tail].push((var, one.clone()));
        net[layer * layer_len + head].push((var, neg_one.clone()));
        let cost = x[layer - 1].clone();
        if !cost.is_zero() {
            objective.push((var, cost));
        }
    });
    let mut terminal_in = Vec::new();
    for coord in dag.target_coords() {
        let var = model.add_var(
            format!("fe_{}", coord_suffix(dag, coord)),
            Some(S::zero()),
            None,
            VarRole::Flow,
        );
        net[n * layer_len + coord].push((var, one.clone()));
        terminal_in.push((var, neg_one.clone()));
    }
    for layer in 0..=n {
        for coord in 0..layer_len {
            if !dag.is_live(layer, coord) {
                continue;
            }
            let coeffs = std::mem::take(&mut net[layer * layer_len + coord]);
            let rhs = if layer == 0 && coord == 0 { one.clone() } else { S::zero() };
            model.add_row(
                format!("v_{}_{}", layer, coord_suffix(dag, coord)),
                coeffs,
                Rel::Eq,
                rhs,
            );
        }
    }
    model.add_row("v_sink", terminal_in, Rel::Eq, neg_one);
    model.set_objective(objective);
    Ok(model)
}

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("solution status is {0:?}, not optimal")]
    NotOptimal(SolveStatus),
    #[error("model carries no payoff role metadata")]
    RoleMetadataMissing,
}

/// Post-solve diagnostics; all residuals should sit at solver tolerance.
#[derive(Debug, Clone)]
pub struct Diagnostics<S> {
    /// `|sum x - 1|`.
    pub sum_residual: S,
    /// `max(0, -min_i x_i)`.
    pub negativity: S,
    /// `|min_winning_payoff(x) - (1 - eps*)|`.
    pub duality_gap: S,
    pub iterations: u64,
}

#[derive(Debug, Clone)]
pub struct LeastCoreResult<S> {
    pub epsilon_star: S,
    pub payoff: Vec<S>,
    pub tight_witness: Coalition,
    pub diagnostics: Diagnostics<S>,
}

/// Read `eps*` and the payoff subvector out of an optimal P1/P2 solution and
/// certify it against the DAG's shortest-path evaluation.
pub fn extract_least_core<S: Scalar>(
    model: &LpModel<S>,
    sol: &LpSolution<S>,
    dag: &LayeredDag,
) -> Result<LeastCoreResult<S>, ExtractError> {
    if sol.status != SolveStatus::Optimal {
        return Err(ExtractError::NotOptimal(sol.status));
    }
    let point = sol.point.as_ref().expect("optimal solutions carry a point");
    let mut payoff: Vec<Option<S>> = vec![None; dag.n()];
    for (var, value) in model.vars().iter().zip(point) {
        if let VarRole::Payoff(i) = var.role {
            payoff[i] = Some(value.clone());
        }
    }
    let payoff: Vec<S> = payoff
        .into_iter()
        .collect::<Option<Vec<_>>>()
        .ok_or(ExtractError::RoleMetadataMissing)?;
    let epsilon_star = sol.objective.clone().expect("optimal solutions carry a value");
    Ok(certified_result(dag, epsilon_star, payoff, sol.iterations))
}

/// Shared post-solve certification: residuals of `(eps*, x)` against the
/// DAG's shortest-path evaluation.
fn certified_result<S: Scalar>(
    dag: &LayeredDag,
    epsilon_star: S,
    payoff: Vec<S>,
    iterations: u64,
) -> LeastCoreResult<S> {
    let one = S::from_int(1);
    let sum = payoff.iter().fold(S::zero(), |acc, v| acc + v.clone());
    let mut negativity = S::zero();
    for v in &payoff {
        let deficit = S::zero() - v.clone();
        if deficit > negativity {
            negativity = deficit;
        }
    }
    let (min_payoff, tight_witness) = dag
        .min_winning_payoff(&payoff)
        .expect("payoff length matches the dag");
    let duality_gap = (min_payoff - (one.clone() - epsilon_star.clone())).abs();
    LeastCoreResult {
        epsilon_star,
        payoff,
        tight_witness,
        diagnostics: Diagnostics {
            sum_residual: (sum - one).abs(),
            negativity,
            duality_gap,
            iterations,
        },
    }
}
