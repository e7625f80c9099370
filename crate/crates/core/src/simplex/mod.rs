//! Self-contained two-phase revised simplex over sparse columns, generic in
//! the scalar: `f64` with tolerances, `BigRational` with exact comparisons
//! and Bland's rule. Bounded variables are handled natively, so free
//! variables need no shift/split and equality rows become fixed slacks.

mod lu;

use std::time::{Duration, Instant};

use thiserror::Error;

use crate::lp::{LpModel, Rel, Sense};
use crate::scalar::Scalar;

use lu::LuFactors;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct LpSolution<S> {
    pub status: SolveStatus,
    /// Objective in the model's own sense; present iff optimal.
    pub objective: Option<S>,
    /// Structural variable values; present iff optimal.
    pub point: Option<Vec<S>>,
    pub iterations: u64,
    /// Unbounded direction over structural variables, when detected.
    pub ray: Option<Vec<S>>,
    /// One multiplier per model row, in the model's own sense; present iff
    /// optimal. `objective = sum_r duals[r] * rhs[r] + (nonbasic bound terms)`,
    /// so duals of `Le` rows are non-positive for a minimization.
    pub row_duals: Option<Vec<S>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PivotRule {
    /// Most-violating reduced cost with a largest-pivot tie-break.
    Dantzig,
    /// Lowest eligible index; terminates on degenerate models.
    Bland,
}

#[derive(Debug, Clone)]
pub struct SolverOptions<S> {
    pub feas_tol: S,
    pub opt_tol: S,
    pub pivot_tol: S,
    /// Default when `None`: `50 * (rows + cols)`.
    pub iteration_cap: Option<u64>,
    pub pivot_rule: PivotRule,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub stall_limit: u64,
    /// Pivots between basis refactorizations.
    pub refactor_period: u64,
    pub time_limit: Option<Duration>,
    /// Print a progress line to stderr every this many iterations.
    pub trace_every: Option<u64>,
}

impl<S: Scalar> Default for SolverOptions<S> {
    fn default() -> Self {
        Self {
            feas_tol: S::feas_tol(),
            opt_tol: S::opt_tol(),
            pivot_tol: S::pivot_tol(),
            iteration_cap: None,
            pivot_rule: if S::EXACT { PivotRule::Bland } else { PivotRule::Dantzig },
            stall_limit: 200,
            refactor_period: 100,
            time_limit: None,
            trace_every: None,
        }
    }
}

/// `rows * cols` cap for `solve_exact`.
pub const EXACT_MODE_CELL_CAP: u128 = 2_000_000;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),
    #[error("exact mode cap exceeded: {rows} rows x {cols} cols > {cap}")]
    ExactModeCapExceeded { rows: usize, cols: usize, cap: u128 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarState {
    Basic(usize),
    Nonbasic,
}

enum PhaseOutcome {
    Optimal,
    Unbounded { entering: usize, increase: bool },
    IterationLimit,
}

struct Engine<S> {
    m: usize,
    n_structural: usize,
    cols: Vec<Vec<(usize, S)>>,
    lower: Vec<Option<S>>,
    upper: Vec<Option<S>>,
    costs: Vec<S>,
    b: Vec<S>,
    state: Vec<VarState>,
    /// Current value of every column; entries for basic columns live in `xb`.
    val: Vec<S>,
    basis: Vec<usize>,
    xb: Vec<S>,
    lu: LuFactors<S>,
    opts: SolverOptions<S>,
    rule: PivotRule,
    iterations: u64,
    pivots_since_refactor: u64,
    stall_count: u64,
    scan_from: usize,
    phase: u8,
    last_d: f64,
    last_t: f64,
    /// Cached objective coefficients of the basic columns.
    cb: Vec<S>,
    // scratch buffers
    scratch_a: Vec<S>,
    scratch_b: Vec<S>,
    w: Vec<S>,
    y: Vec<S>,
    entering_col: Vec<S>,
}

impl<S: Scalar> Engine<S> {
    fn is_fixed(&self, j: usize) -> bool {
        matches!((&self.lower[j], &self.upper[j]), (Some(lo), Some(up)) if lo == up)
    }

    fn refactor(&mut self) -> Result<(), SolverError> {
        let basis_cols: Vec<Vec<(usize, S)>> =
            self.basis.iter().map(|&j| self.cols[j].clone()).collect();
        self.lu = LuFactors::factorize(self.m, &basis_cols)
            .map_err(|e| SolverError::NumericalBreakdown(e.to_string()))?;
        self.pivots_since_refactor = 0;
        // recompute basic values from scratch to shed accumulated drift
        let mut rhs = self.b.clone();
        for j in 0..self.cols.len() {
            if matches!(self.state[j], VarState::Basic(_)) || self.val[j].is_zero() {
                continue;
            }
            for (r, v) in &self.cols[j] {
                rhs[*r] = rhs[*r].clone() - v.clone() * self.val[j].clone();
            }
        }
        let mut xb = std::mem::take(&mut self.xb);
        self.lu.ftran(&rhs, &mut xb, &mut self.scratch_a, &mut self.scratch_b);
        self.xb = xb;
        Ok(())
    }

    fn reduced_cost(&self, j: usize) -> S {
        let mut d = self.costs[j].clone();
        for (r, v) in &self.cols[j] {
            d = d - self.y[*r].clone() * v.clone();
        }
        d
    }

    /// Pick an entering column, or `None` at (phase) optimality.
    /// Returns `(col, increase)`.
    fn price(&mut self) -> Option<(usize, bool)> {
        let ncols = self.cols.len();
        let opt_tol = self.opts.opt_tol.clone();
        match self.rule {
            PivotRule::Bland => {
                for j in 0..ncols {
                    if matches!(self.state[j], VarState::Basic(_)) || self.is_fixed(j) {
                        continue;
                    }
                    let d = self.reduced_cost(j);
                    let at_lower = self.lower[j].as_ref() == Some(&self.val[j]);
                    let at_upper = self.upper[j].as_ref() == Some(&self.val[j]);
                    let free = !at_lower && !at_upper;
                    if (at_lower || free) && d < S::zero() - opt_tol.clone() {
                        return Some((j, true));
                    }
                    if (at_upper || free) && d > opt_tol {
                        return Some((j, false));
                    }
                }
                None
            }
            PivotRule::Dantzig => {
                // partial pricing: rotate through the columns, stop after a
                // window that produced a candidate
                let window = (ncols / 8).max(512);
                let mut best: Option<(S, usize, bool)> = None;
                let mut scanned = 0usize;
                let mut j = self.scan_from % ncols.max(1);
                while scanned < ncols {
                    if scanned >= window && best.is_some() {
                        break;
                    }
                    let col = j;
                    j = (j + 1) % ncols;
                    scanned += 1;
                    if matches!(self.state[col], VarState::Basic(_)) || self.is_fixed(col) {
                        continue;
                    }
                    let d = self.reduced_cost(col);
                    let at_lower = self.lower[col].as_ref() == Some(&self.val[col]);
                    let at_upper = self.upper[col].as_ref() == Some(&self.val[col]);
                    let free = !at_lower && !at_upper;
                    let candidate = if (at_lower || free) && d < S::zero() - opt_tol.clone() {
                        Some((d.abs(), col, true))
                    } else if (at_upper || free) && d > opt_tol.clone() {
                        Some((d.abs(), col, false))
                    } else {
                        None
                    };
                    if let Some((score, col, inc)) = candidate {
                        let better = match &best {
                            Some((s, _, _)) => score > *s,
                            None => true,
                        };
                        if better {
                            best = Some((score, col, inc));
                        }
                    }
                }
                self.scan_from = j;
                best.map(|(_, col, inc)| (col, inc))
            }
        }
    }

    /// One simplex iteration. `Ok(None)` means a pivot or bound flip
    /// happened; `Ok(Some(outcome))` ends the phase.
    fn iterate(&mut self) -> Result<Option<PhaseOutcome>, SolverError> {
        // deep stalls are usually phantom reduced costs from eta-file
        // noise; refactorize so pricing judges from a clean basis
        if self.stall_count > 0
            && self.stall_count % self.opts.stall_limit == 0
            && self.pivots_since_refactor > 0
        {
            self.refactor()?;
        }
        // y = B^-T c_B
        let mut y = std::mem::take(&mut self.y);
        self.lu.btran(&self.cb, &mut y, &mut self.scratch_a, &mut self.scratch_b);
        self.y = y;

        let Some((entering, increase)) = self.price() else {
            return Ok(Some(PhaseOutcome::Optimal));
        };
        self.last_d = self.reduced_cost(entering).to_f64();

        // w = B^-1 a_q
        let mut dense = std::mem::take(&mut self.entering_col);
        for v in dense.iter_mut() {
            *v = S::zero();
        }
        for (r, v) in &self.cols[entering] {
            dense[*r] = dense[*r].clone() + v.clone();
        }
        let mut w = std::mem::take(&mut self.w);
        self.lu.ftran(&dense, &mut w, &mut self.scratch_a, &mut self.scratch_b);
        self.w = w;
        self.entering_col = dense;

        let pivot_tol = self.opts.pivot_tol.clone();
        let feas_tol = self.opts.feas_tol.clone();

        // entering variable's own span limits the step when both bounds exist
        let span = match (&self.lower[entering], &self.upper[entering]) {
            (Some(lo), Some(up)) => Some(up.clone() - lo.clone()),
            _ => None,
        };

        // two-pass Harris ratio test: pass 1 finds the smallest ratio with a
        // feas_tol relaxation, pass 2 takes the largest pivot under that cap,
        // so tiny pivots are avoided at the price of tolerance-sized
        // excursions that the optimality check below still polices
        let true_ratio = |p: usize, w: &[S], xb: &[S]| -> Option<S> {
            let wp = w[p].clone();
            let delta = if increase { wp } else { S::zero() - w[p].clone() };
            let limit = if delta > S::zero() {
                (xb[p].clone() - self.lower[self.basis[p]].clone()?) / delta
            } else {
                (self.upper[self.basis[p]].clone()? - xb[p].clone()) / (S::zero() - delta)
            };
            Some(if limit < S::zero() { S::zero() } else { limit })
        };

        let mut t_max: Option<S> = span.clone();
        let mut have_candidate = false;
        for p in 0..self.m {
            if self.w[p].abs() <= pivot_tol {
                continue;
            }
            let Some(limit) = true_ratio(p, &self.w, &self.xb) else { continue };
            have_candidate = true;
            let relaxed = limit + feas_tol.clone() / self.w[p].abs();
            if t_max.as_ref().map_or(true, |t| relaxed < *t) {
                t_max = Some(relaxed);
            }
        }
        if !have_candidate && span.is_none() {
            return Ok(Some(PhaseOutcome::Unbounded { entering, increase }));
        }
        let t_cap = t_max.clone().expect("candidate or span exists");

        let mut best: Option<(S, usize, S)> = None; // (ratio, basis pos, |w|)
        for p in 0..self.m {
            let wabs = self.w[p].abs();
            if wabs <= pivot_tol {
                continue;
            }
            let Some(limit) = true_ratio(p, &self.w, &self.xb) else { continue };
            if limit > t_cap {
                continue;
            }
            let better = match &best {
                None => true,
                Some((_, cur_pos, cur_wabs)) => match self.rule {
                    PivotRule::Bland => self.basis[p] < self.basis[*cur_pos],
                    PivotRule::Dantzig => wabs > *cur_wabs,
                },
            };
            if better {
                best = Some((limit, p, wabs));
            }
        }

        let (mut t, leaving_pos) = match (&best, &span) {
            (None, None) => {
                return Ok(Some(PhaseOutcome::Unbounded { entering, increase }));
            }
            (None, Some(sp)) => (sp.clone(), None),
            (Some((ratio, _, _)), Some(sp)) if sp < ratio => (sp.clone(), None),
            (Some((ratio, pos, _)), _) => (ratio.clone(), Some(*pos)),
        };
        // EXPAND-style minimum step: a strictly positive step every pivot
        // keeps the walk from stalling in place on degenerate vertices; the
        // blocking variable overshoots its bound by at most `inc`, which the
        // post-optimality feasibility check accounts for
        if !S::EXACT {
            if let Some((_, pos, wabs)) = &best {
                if leaving_pos == Some(*pos) {
                    let t_min = S::from_f64(1e-11).expect("float mode") / wabs.clone();
                    if t < t_min {
                        t = t_min;
                    }
                }
            }
        }
        self.last_t = t.to_f64();
        if self.opts.trace_every == Some(1) {
            eprintln!(
                "  it {}: enter col {} ({}) d {:e} t {:e} leave {:?} stall {}",
                self.iterations,
                entering,
                if increase { "up" } else { "down" },
                self.last_d,
                self.last_t,
                leaving_pos.map(|p| self.basis[p]),
                self.stall_count
            );
        }

        if t <= feas_tol {
            self.stall_count += 1;
            if self.stall_count >= self.opts.stall_limit && self.rule != PivotRule::Bland {
                self.rule = PivotRule::Bland;
            }
        } else {
            // leave anti-cycling mode as soon as the objective moves again
            self.stall_count = 0;
            self.rule = self.opts.pivot_rule;
        }

        // move the basics, then the entering variable
        let signed_t = if increase { t.clone() } else { S::zero() - t.clone() };
        if !t.is_zero() {
            for p in 0..self.m {
                if !self.w[p].is_zero() {
                    self.xb[p] = self.xb[p].clone() - signed_t.clone() * self.w[p].clone();
                }
            }
        }
        let new_val = self.val[entering].clone() + signed_t;

        match leaving_pos {
            None => {
                // bound flip: entering lands exactly on its other bound
                self.val[entering] = if increase {
                    self.upper[entering].clone().expect("flip requires both bounds")
                } else {
                    self.lower[entering].clone().expect("flip requires both bounds")
                };
            }
            Some(pos) => {
                let leaving = self.basis[pos];
                // leaving variable settles on the bound it hit
                let delta_pos =
                    if increase { self.w[pos].clone() } else { S::zero() - self.w[pos].clone() };
                let bound = if delta_pos > S::zero() {
                    self.lower[leaving].clone().expect("ratio used this bound")
                } else {
                    self.upper[leaving].clone().expect("ratio used this bound")
                };
                self.val[leaving] = bound;
                self.state[leaving] = VarState::Nonbasic;
                self.basis[pos] = entering;
                self.cb[pos] = self.costs[entering].clone();
                self.xb[pos] = new_val.clone();
                self.val[entering] = new_val;
                self.state[entering] = VarState::Basic(pos);
                let w = std::mem::take(&mut self.w);
                self.lu.push_eta(pos, &w);
                self.w = w;
                self.pivots_since_refactor += 1;
                if self.pivots_since_refactor >= self.opts.refactor_period {
                    self.refactor()?;
                }
            }
        }
        Ok(None)
    }

    /// `artificials`: when non-empty, stop as soon as their total value is
    /// within feasibility tolerance — phase 1 needs feasibility, not a
    /// proven optimum of the artificial objective.
    fn run_phase(
        &mut self,
        cap: u64,
        deadline: Option<Instant>,
        artificials: &[usize],
    ) -> Result<PhaseOutcome, SolverError> {
        loop {
            if !artificials.is_empty() {
                let mut infeas = S::zero();
                for &aj in artificials {
                    let v = match self.state[aj] {
                        VarState::Basic(p) => self.xb[p].clone(),
                        VarState::Nonbasic => self.val[aj].clone(),
                    };
                    infeas = infeas + v.abs();
                }
                if infeas <= self.opts.feas_tol {
                    return Ok(PhaseOutcome::Optimal);
                }
            }
            if self.iterations >= cap {
                return Ok(PhaseOutcome::IterationLimit);
            }
            if self.iterations % 256 == 0 {
                if let Some(d) = deadline {
                    if Instant::now() > d {
                        return Ok(PhaseOutcome::IterationLimit);
                    }
                }
            }
            self.iterations += 1;
            if let Some(every) = self.opts.trace_every {
                if self.iterations % every == 0 {
                    let mut obj = S::zero();
                    for p in 0..self.m {
                        let c = &self.costs[self.basis[p]];
                        if !c.is_zero() {
                            obj = obj + c.clone() * self.xb[p].clone();
                        }
                    }
                    for (j, v) in self.val.iter().enumerate() {
                        if matches!(self.state[j], VarState::Nonbasic)
                            && !self.costs[j].is_zero()
                            && !v.is_zero()
                        {
                            obj = obj + self.costs[j].clone() * v.clone();
                        }
                    }
                    eprintln!(
                        "simplex: phase {} iter {} obj {} rule {:?} stall {} d {:e} t {:e}",
                        self.phase,
                        self.iterations,
                        obj.to_f64(),
                        self.rule,
                        self.stall_count,
                        self.last_d,
                        self.last_t
                    );
                }
            }
            if let Some(outcome) = self.iterate()? {
                return Ok(outcome);
            }
        }
    }
}

/// Solve an `LpModel` with the two-phase primal simplex. Deterministic for a
/// fixed `(model, opts)` pair.
pub fn solve<S: Scalar>(
    model: &LpModel<S>,
    opts: &SolverOptions<S>,
) -> Result<LpSolution<S>, SolverError> {
    let m = model.n_rows();
    let ns = model.n_vars();
    let minimize = model.sense() == Sense::Minimize;

    let mut cols: Vec<Vec<(usize, S)>> = vec![Vec::new(); ns];
    for (r, row) in model.rows().iter().enumerate() {
        for (j, v) in &row.coeffs {
            if !v.is_zero() {
                cols[*j].push((r, v.clone()));
            }
        }
    }
    let mut lower: Vec<Option<S>> = model.vars().iter().map(|v| v.lower.clone()).collect();
    let mut upper: Vec<Option<S>> = model.vars().iter().map(|v| v.upper.clone()).collect();
    let mut cost2 = vec![S::zero(); ns];
    for (j, c) in model.objective() {
        cost2[*j] = if minimize { c.clone() } else { S::zero() - c.clone() };
    }
    let b: Vec<S> = model.rows().iter().map(|r| r.rhs.clone()).collect();

    // one slack per row; equalities become fixed slacks
    for (r, row) in model.rows().iter().enumerate() {
        cols.push(vec![(r, S::from_int(1))]);
        let (lo, up) = match row.rel {
            Rel::Le => (Some(S::zero()), None),
            Rel::Ge => (None, Some(S::zero())),
            Rel::Eq => (Some(S::zero()), Some(S::zero())),
        };
        lower.push(lo);
        upper.push(up);
        cost2.push(S::zero());
    }

    // nonbasic start: every column at a finite bound; free columns take
    // their hint (if any) so a good crash point skips most of phase 1
    let mut val: Vec<S> = (0..cols.len())
        .map(|j| match (&lower[j], &upper[j]) {
            (Some(lo), _) => lo.clone(),
            (None, Some(up)) => up.clone(),
            (None, None) => model
                .vars()
                .get(j)
                .and_then(|v| v.start.clone())
                .unwrap_or_else(S::zero),
        })
        .collect();
    let mut state = vec![VarState::Nonbasic; cols.len()];

    let mut residual = b.clone();
    for (j, col) in cols.iter().enumerate().take(ns) {
        if !val[j].is_zero() {
            for (r, v) in col {
                residual[*r] = residual[*r].clone() - v.clone() * val[j].clone();
            }
        }
    }

    let mut basis = Vec::with_capacity(m);
    let mut xb = Vec::with_capacity(m);
    let mut cost1 = vec![S::zero(); cols.len()];
    let mut artificials = Vec::new();
    for r in 0..m {
        let slack = ns + r;
        let fits = {
            let lo_ok = lower[slack].as_ref().map_or(true, |lo| residual[r] >= *lo);
            let up_ok = upper[slack].as_ref().map_or(true, |up| residual[r] <= *up);
            lo_ok && up_ok
        };
        if fits {
            basis.push(slack);
            xb.push(residual[r].clone());
            state[slack] = VarState::Basic(r);
        } else {
            // park the slack on its nearest bound, cover the rest with an
            // artificial of positive value
            let parked = if lower[slack]
                .as_ref()
                .map_or(false, |lo| residual[r] < *lo)
            {
                lower[slack].clone().unwrap()
            } else {
                upper[slack].clone().unwrap()
            };
            val[slack] = parked.clone();
            let short = residual[r].clone() - parked;
            let sign = if short >= S::zero() { S::from_int(1) } else { S::from_int(-1) };
            let aj = cols.len();
            cols.push(vec![(r, sign.clone())]);
            lower.push(Some(S::zero()));
            upper.push(None);
            cost1.push(S::from_int(1));
            cost2.push(S::zero());
            val.push(short.clone().abs());
            state.push(VarState::Basic(r));
            basis.push(aj);
            xb.push(short.abs());
            artificials.push(aj);
        }
    }
    let cap = opts
        .iteration_cap
        .unwrap_or(50 * (m as u64 + cols.len() as u64));
    let deadline = opts.time_limit.map(|d| Instant::now() + d);

    let mut engine = Engine {
        m,
        n_structural: ns,
        cols,
        lower,
        upper,
        costs: cost1,
        b,
        state,
        val,
        basis,
        xb,
        lu: LuFactors::factorize(0, &[]).expect("empty factorization"),
        opts: opts.clone(),
        rule: opts.pivot_rule,
        iterations: 0,
        pivots_since_refactor: 0,
        stall_count: 0,
        scan_from: 0,
        phase: 1,
        last_d: 0.0,
        last_t: 0.0,
        cb: Vec::new(),
        scratch_a: vec![S::zero(); m],
        scratch_b: vec![S::zero(); m],
        w: vec![S::zero(); m],
        y: vec![S::zero(); m],
        entering_col: vec![S::zero(); m],
    };
    engine.cb = engine.basis.iter().map(|&j| engine.costs[j].clone()).collect();
    engine.refactor()?;

    let finish = |engine: &Engine<S>, status: SolveStatus| -> LpSolution<S> {
        let point: Vec<S> = (0..engine.n_structural)
            .map(|j| match engine.state[j] {
                VarState::Basic(p) => engine.xb[p].clone(),
                VarState::Nonbasic => engine.val[j].clone(),
            })
            .collect();
        let mut obj = S::zero();
        for (j, v) in point.iter().enumerate() {
            if !engine.costs[j].is_zero() {
                obj = obj + engine.costs[j].clone() * v.clone();
            }
        }
        let obj = if minimize { obj } else { S::zero() - obj };
        LpSolution {
            status,
            objective: Some(obj),
            point: Some(point),
            iterations: engine.iterations,
            ray: None,
            row_duals: None,
        }
    };

    // phase 1: drive artificial infeasibility to zero
    if !artificials.is_empty() {
        match engine.run_phase(cap, deadline, &artificials)? {
            PhaseOutcome::Optimal => {}
            PhaseOutcome::Unbounded { .. } => {
                return Err(SolverError::NumericalBreakdown(
                    "phase-1 objective unbounded below".into(),
                ));
            }
            PhaseOutcome::IterationLimit => {
                return Ok(LpSolution {
                    status: SolveStatus::IterationLimit,
                    objective: None,
                    point: None,
                    iterations: engine.iterations,
                    ray: None,
                    row_duals: None,
                });
            }
        }
        let mut infeas = S::zero();
        for &aj in &artificials {
            let v = match engine.state[aj] {
                VarState::Basic(p) => engine.xb[p].clone(),
                VarState::Nonbasic => engine.val[aj].clone(),
            };
            infeas = infeas + v.abs();
        }
        if infeas > engine.opts.feas_tol {
            return Ok(LpSolution {
                status: SolveStatus::Infeasible,
                objective: None,
                point: None,
                iterations: engine.iterations,
                ray: None,
                row_duals: None,
            });
        }
        // pin artificials so they can never re-enter with positive value
        for &aj in &artificials {
            engine.upper[aj] = Some(S::zero());
        }
        engine.rule = opts.pivot_rule;
        engine.stall_count = 0;
    }

    engine.costs = cost2;
    engine.phase = 2;
    engine.cb = engine.basis.iter().map(|&j| engine.costs[j].clone()).collect();
    match engine.run_phase(cap, deadline, &[])? {
        PhaseOutcome::Optimal => {
            engine.refactor()?;
            // the Harris ratio test tolerates tolerance-sized bound
            // excursions; make sure they did not accumulate into real ones
            let mut worst = S::zero();
            for p in 0..engine.m {
                let j = engine.basis[p];
                if let Some(lo) = &engine.lower[j] {
                    let v = lo.clone() - engine.xb[p].clone();
                    if v > worst {
                        worst = v;
                    }
                }
                if let Some(up) = &engine.upper[j] {
                    let v = engine.xb[p].clone() - up.clone();
                    if v > worst {
                        worst = v;
                    }
                }
            }
            let allowance = engine.opts.feas_tol.clone() * S::from_int(10);
            if worst > allowance {
                return Err(SolverError::NumericalBreakdown(format!(
                    "claimed optimum violates basic bounds by {}",
                    worst.to_f64()
                )));
            }
            let mut sol = finish(&engine, SolveStatus::Optimal);
            let mut duals = vec![S::zero(); engine.m];
            engine.lu.btran(
                &engine.cb,
                &mut duals,
                &mut engine.scratch_a,
                &mut engine.scratch_b,
            );
            if !minimize {
                for d in &mut duals {
                    *d = S::zero() - d.clone();
                }
            }
            sol.row_duals = Some(duals);
            Ok(sol)
        }
        PhaseOutcome::Unbounded { entering, increase } => {
            let mut ray = vec![S::zero(); engine.n_structural];
            if entering < engine.n_structural {
                ray[entering] = if increase { S::from_int(1) } else { S::from_int(-1) };
            }
            for p in 0..engine.m {
                let j = engine.basis[p];
                if j < engine.n_structural && !engine.w[p].is_zero() {
                    let delta = if increase {
                        S::zero() - engine.w[p].clone()
                    } else {
                        engine.w[p].clone()
                    };
                    ray[j] = delta;
                }
            }
            Ok(LpSolution {
                status: SolveStatus::Unbounded,
                objective: None,
                point: None,
                iterations: engine.iterations,
                ray: Some(ray),
                row_duals: None,
            })
        }
        PhaseOutcome::IterationLimit => Ok(LpSolution {
            status: SolveStatus::IterationLimit,
            objective: None,
            point: None,
            iterations: engine.iterations,
            ray: None,
            row_duals: None,
        }),
    }
}

/// Exact-rational solve with Bland's rule; all P1/P2 data are integral, so
/// the optimum is an exact rational number.
pub fn solve_exact(
    model: &LpModel<num_rational::BigRational>,
) -> Result<LpSolution<num_rational::BigRational>, SolverError> {
    let cells = model.n_rows() as u128 * model.n_vars() as u128;
    if cells > EXACT_MODE_CELL_CAP {
        return Err(SolverError::ExactModeCapExceeded {
            rows: model.n_rows(),
            cols: model.n_vars(),
            cap: EXACT_MODE_CELL_CAP,
        });
    }
    let opts = SolverOptions {
        pivot_rule: PivotRule::Bland,
        ..SolverOptions::default()
    };
    solve(model, &opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::{LpModel, Rel, Sense, VarRole};
    use num_rational::BigRational;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn min_with_lower_bound() {
        let mut model: LpModel<f64> = LpModel::new(Sense::Minimize);
        let x = model.add_var("x", Some(3.0), None, VarRole::Other);
        model.add_row("r", vec![(x, 1.0)], Rel::Ge, 3.0);
        model.set_objective(vec![(x, 1.0)]);
        let sol = solve(&model, &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.objective.unwrap() - 3.0).abs() < 1e-9);
    }

    #[test]
    fn unbounded_detected() {
        let mut model: LpModel<f64> = LpModel::new(Sense::Maximize);
        let x = model.add_var("x", Some(0.0), None, VarRole::Other);
        model.add_row("r", vec![(x, 1.0)], Rel::Ge, 0.0);
        model.set_objective(vec![(x, 1.0)]);
        let sol = solve(&model, &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Unbounded);
        let ray = sol.ray.unwrap();
        assert!(ray[0] > 0.0);
    }

    #[test]
    fn infeasible_detected() {
        let mut model: LpModel<f64> = LpModel::new(Sense::Minimize);
        let x = model.add_var("x", Some(0.0), Some(1.0), VarRole::Other);
        model.add_row("r", vec![(x, 1.0)], Rel::Ge, 2.0);
        model.set_objective(vec![(x, 1.0)]);
        let sol = solve(&model, &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Infeasible);
    }

    #[test]
    fn equality_and_free_variable() {
        // min y s.t. y - x = 1, x + y = 3, x free, y free -> x = 1, y = 2
        let mut model: LpModel<f64> = LpModel::new(Sense::Minimize);
        let x = model.add_var("x", None, None, VarRole::Other);
        let y = model.add_var("y", None, None, VarRole::Other);
        model.add_row("r1", vec![(y, 1.0), (x, -1.0)], Rel::Eq, 1.0);
        model.add_row("r2", vec![(x, 1.0), (y, 1.0)], Rel::Eq, 3.0);
        model.set_objective(vec![(y, 1.0)]);
        let sol = solve(&model, &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        let p = sol.point.unwrap();
        assert!((p[x] - 1.0).abs() < 1e-9);
        assert!((p[y] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn symmetric_two_player_game() {
        let g = crate::games::WeightedVotingGame::new(1, vec![1, 1]).unwrap();
        let model: LpModel<f64> = crate::lp::build_p1(&g, 20).unwrap();
        let sol = solve(&model, &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.objective.unwrap() - 0.5).abs() < 1e-9);
        let p = sol.point.unwrap();
        // eps is var 0; payoffs follow
        assert!((p[1] - 0.5).abs() < 1e-9);
        assert!((p[2] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn exact_fig1_least_core() {
        let g = crate::games::WeightedVotingGame::new(5, vec![2, 4, 2, 1]).unwrap();
        let model = crate::lp::build_p1::<BigRational>(&g, 20).unwrap();
        let sol = solve_exact(&model).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_eq!(sol.objective.unwrap(), rat(2, 5));
    }

    #[test]
    fn exact_symmetric_and_trivial() {
        let g = crate::games::WeightedVotingGame::new(1, vec![1, 1]).unwrap();
        let model = crate::lp::build_p1::<BigRational>(&g, 20).unwrap();
        assert_eq!(solve_exact(&model).unwrap().objective.unwrap(), rat(1, 2));

        let g = crate::games::WeightedVotingGame::new(2, vec![1, 1]).unwrap();
        let model = crate::lp::build_p1::<BigRational>(&g, 20).unwrap();
        assert_eq!(solve_exact(&model).unwrap().objective.unwrap(), rat(0, 1));
    }

    #[test]
    fn exact_cap_enforced() {
        let mut model: LpModel<BigRational> = LpModel::new(Sense::Minimize);
        let vars: Vec<usize> = (0..2000)
            .map(|i| {
                model.add_var(format!("v{i}"), Some(BigRational::from_int(0)), None, VarRole::Other)
            })
            .collect();
        for r in 0..1500 {
            model.add_row(
                format!("r{r}"),
                vec![(vars[r % vars.len()], BigRational::from_int(1))],
                Rel::Ge,
                BigRational::from_int(0),
            );
        }
        assert!(matches!(
            solve_exact(&model),
            Err(SolverError::ExactModeCapExceeded { .. })
        ));
    }

    #[test]
    fn deterministic_iterations() {
        let g = crate::games::WeightedVotingGame::new(7, vec![3, 2, 2, 1, 1]).unwrap();
        let dag = crate::dag::LayeredDag::build(&g, &crate::dag::DagOptions::default())
            .unwrap()
            .prune();
        let model: LpModel<f64> = crate::lp::build_p2(&dag);
        let a = solve(&model, &SolverOptions::default()).unwrap();
        let b = solve(&model, &SolverOptions::default()).unwrap();
        assert_eq!(a.iterations, b.iterations);
        assert_eq!(a.objective, b.objective);
        assert_eq!(a.point.as_ref().unwrap(), b.point.as_ref().unwrap());
    }

    #[test]
    fn iteration_limit_reported() {
        let g = crate::games::WeightedVotingGame::new(5, vec![2, 4, 2, 1]).unwrap();
        let model: LpModel<f64> = crate::lp::build_p1(&g, 20).unwrap();
        let opts = SolverOptions { iteration_cap: Some(1), ..SolverOptions::default() };
        let sol = solve(&model, &opts).unwrap();
        assert_eq!(sol.status, SolveStatus::IterationLimit);
        assert!(sol.point.is_none());
    }
}
