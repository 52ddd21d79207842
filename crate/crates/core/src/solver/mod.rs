//! LP relaxations and a best-bound branch-and-bound for [`MilpModel`].

mod dual;
mod lu;
mod simplex;

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::io::Write;
use std::rc::Rc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ColumnKind, MilpModel, ObjectiveSense};

/// Which LP engine solves the relaxations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LpEngine {
    /// Dense for small models, sparse otherwise.
    #[default]
    Auto,
    Dense,
    Sparse,
}

/// Row count up to which [`LpEngine::Auto`] picks the dense engine.
pub const DENSE_ROW_LIMIT: usize = 120;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveParams {
    /// Relative gap at which the search stops.
    pub gap: f64,
    /// Wall-clock limit in seconds.
    pub time_limit: f64,
    pub feasibility_tol: f64,
    pub integrality_tol: f64,
    /// Optional cap on processed nodes. Unlike the time limit it is
    /// deterministic.
    pub node_limit: Option<u64>,
    pub engine: LpEngine,
    /// Run the primal heuristic every this many nodes (0: root only).
    pub heuristic_period: u64,
}

impl Default for SolveParams {
    fn default() -> Self {
        SolveParams {
            gap: 0.01,
            time_limit: 3600.0,
            feasibility_tol: 1e-7,
            integrality_tol: 1e-6,
            node_limit: None,
            engine: LpEngine::Auto,
            heuristic_period: 50,
        }
    }
}

impl SolveParams {
    pub fn check(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(format!("solve parameters: {what}")));
        if !(self.gap >= 0.0) || !self.gap.is_finite() {
            return bad("gap target must be a nonnegative number");
        }
        if !(self.time_limit > 0.0) {
            return bad("time limit must be positive");
        }
        if !(self.feasibility_tol > 0.0) || !(self.integrality_tol > 0.0) {
            return bad("tolerances must be positive");
        }
        if self.integrality_tol >= 0.5 {
            return bad("integrality tolerance must be below 0.5");
        }
        if self.node_limit == Some(0) {
            return bad("node limit must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// The engine could not finish reliably; no answer is claimed.
    NumericalBreakdown,
    /// The engine hit the time limit.
    Interrupted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Objective in the model's own sense; meaningful when optimal.
    pub objective: f64,
    pub values: Vec<f64>,
    pub iterations: usize,
}

impl LpSolution {
    fn status_only(status: LpStatus) -> Self {
        LpSolution {
            status,
            objective: f64::NAN,
            values: Vec::new(),
            iterations: 0,
        }
    }

    fn breakdown(iterations: usize) -> Self {
        LpSolution {
            iterations,
            ..Self::status_only(LpStatus::NumericalBreakdown)
        }
    }
}

/// Solves the LP relaxation of `model` under its own column bounds.
pub fn solve_lp(model: &MilpModel, params: &SolveParams) -> LpSolution {
    let (lo, hi): (Vec<f64>, Vec<f64>) = model.columns.iter().map(|c| (c.lower, c.upper)).unzip();
    Relaxation::new(model, params).solve(model, &lo, &hi, params, None, None).0
}

/// The LP engine owned by one search.
enum Relaxation {
    Dense,
    Sparse(Box<dual::DualSimplex>),
}

impl Relaxation {
    fn new(model: &MilpModel, params: &SolveParams) -> Self {
        let sparse = match params.engine {
            LpEngine::Dense => false,
            LpEngine::Sparse => true,
            LpEngine::Auto => model.num_rows() > DENSE_ROW_LIMIT,
        };
        match sparse.then(|| dual::DualSimplex::new(model)).flatten() {
            Some(d) => Relaxation::Sparse(Box::new(d)),
            None => Relaxation::Dense,
        }
    }

    /// Solves under bounds `lo..=hi`; the sparse engine also returns its
    /// final basis for warm-starting descendants.
    fn solve(
        &mut self,
        model: &MilpModel,
        lo: &[f64],
        hi: &[f64],
        params: &SolveParams,
        warm: Option<&Rc<dual::Basis>>,
        deadline: Option<Instant>,
    ) -> (LpSolution, Option<Rc<dual::Basis>>) {
        let (sol, basis) = match self {
            Relaxation::Dense => (simplex::solve_dense(model, lo, hi, params.feasibility_tol), None),
            Relaxation::Sparse(d) => {
                let sol = d.solve(lo, hi, warm, deadline);
                let basis = (sol.status == LpStatus::Optimal).then(|| d.basis());
                (sol, basis)
            }
        };
        (checked(model, lo, hi, params, sol), basis)
    }
}

fn checked(model: &MilpModel, lo: &[f64], hi: &[f64], params: &SolveParams, sol: LpSolution) -> LpSolution {
    if sol.status != LpStatus::Optimal {
        return sol;
    }
    // Never hand back a point the engine got wrong.
    let scale = 1.0 + model.rows.iter().fold(0.0f64, |a, r| a.max(r.rhs.abs()));
    let bound_err = sol
        .values
        .iter()
        .zip(lo.iter().zip(hi))
        .map(|(&v, (&l, &h))| (l - v).max(v - h).max(0.0))
        .fold(0.0f64, f64::max);
    if model.max_violation(&sol.values) > 1e3 * params.feasibility_tol * scale
        || bound_err > 1e3 * params.feasibility_tol * scale
    {
        return LpSolution::breakdown(sol.iterations);
    }
    sol
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MilpStatus {
    /// The tree was exhausted.
    Optimal,
    GapReached,
    TimeLimit,
    NodeLimit,
    Infeasible,
}

impl fmt::Display for MilpStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MilpStatus::Optimal => "optimal",
            MilpStatus::GapReached => "gap-reached",
            MilpStatus::TimeLimit => "time-limit",
            MilpStatus::NodeLimit => "node-limit",
            MilpStatus::Infeasible => "infeasible",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MilpResult {
    pub status: MilpStatus,
    pub incumbent: Option<Vec<f64>>,
    /// Incumbent objective, `-inf` (maximization) without an incumbent.
    pub objective: f64,
    /// Best dual bound.
    pub bound: f64,
    pub gap: f64,
    pub elapsed: f64,
    pub nodes: u64,
    /// Nodes dropped after an LP breakdown; their bounds stay in `bound`.
    pub lp_failures: u64,
}

/// Relative gap for a maximization problem; `+inf` when the incumbent is
/// nonpositive and the bound is positive.
pub fn relative_gap(bound: f64, incumbent: f64) -> f64 {
    if incumbent <= 0.0 {
        if bound <= 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        ((bound - incumbent) / incumbent.abs().max(1e-9)).max(0.0)
    }
}

/// Proposes an integer-feasible point from an LP solution. The solver
/// checks every proposal before using it.
pub trait PrimalHeuristic {
    fn propose(&self, model: &MilpModel, lp_point: &[f64]) -> Option<Vec<f64>>;
}

/// Receives one line per processed node.
pub trait TraceSink {
    fn node(&mut self, depth: usize, bound: f64, incumbent: f64, gap: f64);
}

/// Writes `depth bound incumbent gap` lines.
pub struct TextTrace<W: Write>(pub W);

impl<W: Write> TraceSink for TextTrace<W> {
    fn node(&mut self, depth: usize, bound: f64, incumbent: f64, gap: f64) {
        let _ = writeln!(self.0, "{depth} {bound:.6} {incumbent:.6} {gap:.6e}");
    }
}

pub fn solve_milp(model: &MilpModel, params: &SolveParams) -> Result<MilpResult> {
    solve_milp_with(model, params, None)
}

pub fn solve_milp_with(
    model: &MilpModel,
    params: &SolveParams,
    heuristic: Option<&dyn PrimalHeuristic>,
) -> Result<MilpResult> {
    solve_milp_hooked(
        model,
        params,
        Hooks {
            heuristic,
            ..Hooks::default()
        },
    )
}

/// Optional extras for a branch-and-bound run.
#[derive(Default)]
pub struct Hooks<'a> {
    pub heuristic: Option<&'a dyn PrimalHeuristic>,
    /// Starting points, checked and kept like heuristic proposals.
    pub starts: Vec<Vec<f64>>,
    pub trace: Option<&'a mut dyn TraceSink>,
}

#[derive(Debug)]
struct Node {
    bound: f64,
    seq: u64,
    depth: usize,
    /// Bound changes from the root: `(column, lower, upper)`.
    changes: Vec<(usize, f64, f64)>,
    /// Optimal basis of the parent relaxation.
    warm: Option<Rc<dual::Basis>>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // Max-heap: higher bound first, then earlier sequence number.
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound
            .total_cmp(&other.bound)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

struct Search<'a> {
    model: &'a MilpModel,
    /// Works on a maximization copy of the objective.
    max_model: std::borrow::Cow<'a, MilpModel>,
    params: &'a SolveParams,
    root_lo: Vec<f64>,
    root_hi: Vec<f64>,
    incumbent: Option<Vec<f64>>,
    inc_value: f64,
    integral_objective: bool,
    has_continuous: bool,
    start: Instant,
    lp: Relaxation,
}

impl Search<'_> {
    fn deadline(&self) -> Option<Instant> {
        self.start
            .checked_add(std::time::Duration::from_secs_f64(self.params.time_limit.min(1e9)))
    }

    fn out_of_time(&self) -> bool {
        self.start.elapsed().as_secs_f64() >= self.params.time_limit
    }

    /// Whether a node with LP value `bound` may still improve the incumbent.
    fn promising(&self, bound: f64) -> bool {
        if self.incumbent.is_none() {
            return true;
        }
        let tol = 1e-9 * (1.0 + self.inc_value.abs());
        if self.integral_objective {
            (bound + 1e-6).floor() > self.inc_value + 0.5
        } else {
            bound > self.inc_value + tol
        }
    }

    /// Gap of the incumbent against a bound, both in maximization form,
    /// measured in the sense the model was stated in.
    fn gap(&self, bound: f64) -> f64 {
        if self.incumbent.is_none() {
            return f64::INFINITY;
        }
        match self.model.sense {
            ObjectiveSense::Maximize => relative_gap(bound, self.inc_value),
            ObjectiveSense::Minimize => {
                ((self.inc_value - bound).abs() / self.inc_value.abs().max(1e-9)).max(0.0)
            }
        }
    }

    fn is_integral(&self, x: &[f64]) -> bool {
        self.model
            .columns
            .iter()
            .zip(x)
            .all(|(c, &v)| !c.kind.is_integer() || (v - v.round()).abs() <= self.params.integrality_tol)
    }

    /// Checks a candidate against the original model and keeps it if it
    /// improves the incumbent.
    fn offer(&mut self, mut x: Vec<f64>) -> bool {
        if x.len() != self.model.num_cols() {
            return false;
        }
        for (c, v) in self.model.columns.iter().zip(x.iter_mut()) {
            if c.kind.is_integer() {
                *v = v.round();
            }
            *v = v.clamp(c.lower, c.upper);
        }
        if !self.is_integral(&x) || self.model.max_violation(&x) > self.params.feasibility_tol {
            if self.has_continuous {
                match self.polish(&x) {
                    Some(p) => x = p,
                    None => return false,
                }
            } else {
                return false;
            }
        }
        let value = self.max_model.objective_value(&x);
        if self.incumbent.is_none() || value > self.inc_value + 1e-9 * (1.0 + self.inc_value.abs()) {
            self.inc_value = value;
            self.incumbent = Some(x);
            true
        } else {
            false
        }
    }

    /// Re-solves the continuous part with integer columns fixed at `x`.
    fn polish(&mut self, x: &[f64]) -> Option<Vec<f64>> {
        let mut lo = self.root_lo.clone();
        let mut hi = self.root_hi.clone();
        for (j, c) in self.model.columns.iter().enumerate() {
            if c.kind.is_integer() {
                lo[j] = x[j];
                hi[j] = x[j];
            }
        }
        let deadline = self.deadline();
        let (sol, _) = self
            .lp
            .solve(&self.max_model, &lo, &hi, self.params, None, deadline);
        (sol.status == LpStatus::Optimal
            && self.model.max_violation(&sol.values) <= self.params.feasibility_tol)
            .then_some(sol.values)
    }

    /// Most fractional binary column, else most fractional general integer.
    fn branching_column(&self, x: &[f64]) -> Option<usize> {
        let mut best: [Option<(usize, f64)>; 2] = [None, None];
        for (j, c) in self.model.columns.iter().enumerate() {
            let class = match c.kind {
                ColumnKind::Binary => 0,
                ColumnKind::Integer => 1,
                ColumnKind::Continuous => continue,
            };
            let frac = (x[j] - x[j].floor()).min(x[j].ceil() - x[j]);
            if frac <= self.params.integrality_tol {
                continue;
            }
            if best[class].is_none_or(|(_, f)| frac > f) {
                best[class] = Some((j, frac));
            }
        }
        best[0].or(best[1]).map(|(j, _)| j)
    }
}

/// Branch and bound with optional heuristic, starting points and trace.
pub fn solve_milp_hooked(model: &MilpModel, params: &SolveParams, hooks: Hooks) -> Result<MilpResult> {
    let Hooks {
        heuristic,
        starts,
        mut trace,
    } = hooks;
    params.check()?;
    let problems = model.check();
    if !problems.is_empty() {
        return Err(Error::Solver(format!("malformed model: {}", problems.join("; "))));
    }
    let start = Instant::now();
    let max_model = match model.sense {
        ObjectiveSense::Maximize => std::borrow::Cow::Borrowed(model),
        ObjectiveSense::Minimize => {
            let mut m = model.clone();
            m.sense = ObjectiveSense::Maximize;
            for t in &mut m.objective {
                t.1 = -t.1;
            }
            std::borrow::Cow::Owned(m)
        }
    };
    let (root_lo, root_hi): (Vec<f64>, Vec<f64>) =
        model.columns.iter().map(|c| (c.lower, c.upper)).unzip();
    let mut s = Search {
        model,
        integral_objective: max_model.objective_is_integral(),
        max_model,
        params,
        root_lo,
        root_hi,
        incumbent: None,
        inc_value: f64::NEG_INFINITY,
        has_continuous: model.columns.iter().any(|c| c.kind == ColumnKind::Continuous),
        start,
        lp: Relaxation::new(model, params),
    };

    // The point with every column at its lower bound is often feasible.
    let floor_point: Vec<f64> = s.root_lo.clone();
    if floor_point.iter().all(|v| v.is_finite()) {
        s.offer(floor_point);
    }
    for p in starts {
        s.offer(p);
    }

    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    heap.push(Node {
        bound: f64::INFINITY,
        seq,
        depth: 0,
        changes: Vec::new(),
        warm: None,
    });
    let mut nodes = 0u64;
    let mut failures = 0u64;
    let mut lost_bound = f64::NEG_INFINITY;
    let mut bound = f64::INFINITY;
    let mut unbounded = false;
    let mut stop: Option<MilpStatus> = None;

    let global_bound = |heap: &BinaryHeap<Node>, lost: f64, inc: f64| -> f64 {
        let open = heap.peek().map_or(f64::NEG_INFINITY, |n| n.bound);
        open.max(lost).max(inc)
    };

    while let Some(node) = heap.pop() {
        if !s.promising(node.bound) {
            continue;
        }
        if s.out_of_time() {
            heap.push(node);
            stop = Some(MilpStatus::TimeLimit);
            break;
        }
        if params.node_limit.is_some_and(|l| nodes >= l) {
            heap.push(node);
            stop = Some(MilpStatus::NodeLimit);
            break;
        }
        nodes += 1;
        let mut lo = s.root_lo.clone();
        let mut hi = s.root_hi.clone();
        for &(j, l, h) in &node.changes {
            lo[j] = l;
            hi[j] = h;
        }
        let deadline = s.deadline();
        let (lp, basis) = s
            .lp
            .solve(&s.max_model, &lo, &hi, params, node.warm.as_ref(), deadline);
        match lp.status {
            LpStatus::Infeasible => {}
            LpStatus::Unbounded => {
                if node.depth == 0 {
                    unbounded = true;
                    break;
                }
                lost_bound = f64::INFINITY;
                failures += 1;
            }
            LpStatus::Interrupted => {
                heap.push(node);
                stop = Some(MilpStatus::TimeLimit);
                break;
            }
            LpStatus::NumericalBreakdown => {
                log::warn!("LP breakdown at depth {}; node dropped", node.depth);
                failures += 1;
                lost_bound = lost_bound.max(node.bound);
            }
            LpStatus::Optimal => {
                let z = lp.objective.min(node.bound);
                let first = node.depth == 0;
                if s.promising(z) {
                    match s.branching_column(&lp.values) {
                        None => {
                            s.offer(lp.values.clone());
                        }
                        Some(j) => {
                            let v = lp.values[j];
                            for (l, h) in [(lo[j], v.floor()), (v.ceil(), hi[j])] {
                                let mut changes = node.changes.clone();
                                changes.push((j, l, h));
                                seq += 1;
                                heap.push(Node {
                                    bound: z,
                                    seq,
                                    depth: node.depth + 1,
                                    changes,
                                    warm: basis.clone(),
                                });
                            }
                        }
                    }
                    let period = params.heuristic_period;
                    if let Some(h) = heuristic {
                        if first || (period > 0 && nodes.is_multiple_of(period)) {
                            if let Some(p) = h.propose(model, &lp.values) {
                                s.offer(p);
                            }
                        }
                    }
                }
            }
        }

        let gb = global_bound(&heap, lost_bound, s.inc_value);
        bound = bound.min(gb);
        let gap = s.gap(bound);
        if let Some(t) = trace.as_deref_mut() {
            t.node(node.depth, bound, s.inc_value, gap);
        }
        if s.incumbent.is_some() && !heap.is_empty() && gap <= params.gap {
            if failures == 0 && heap.iter().all(|n| !s.promising(n.bound)) {
                heap.clear();
            } else {
                stop = Some(MilpStatus::GapReached);
            }
            break;
        }
    }

    if unbounded {
        return Err(Error::Solver("LP relaxation is unbounded".into()));
    }
    let status = match stop {
        Some(st) => st,
        None if s.incumbent.is_none() => MilpStatus::Infeasible,
        None if failures > 0 => {
            // Exhausted, but some subtrees were never solved.
            if s.gap(bound) <= params.gap {
                MilpStatus::GapReached
            } else {
                MilpStatus::NodeLimit
            }
        }
        None => MilpStatus::Optimal,
    };
    // Drop bounds of nodes that cannot beat the incumbent anyway.
    let open = heap
        .iter()
        .filter(|n| s.promising(n.bound))
        .map(|n| n.bound)
        .fold(f64::NEG_INFINITY, f64::max);
    let final_bound = if status == MilpStatus::Optimal {
        s.inc_value
    } else {
        bound.min(open.max(lost_bound).max(s.inc_value))
    };
    let flip = match model.sense {
        ObjectiveSense::Maximize => 1.0,
        ObjectiveSense::Minimize => -1.0,
    };
    let gap = if s.incumbent.is_some() {
        s.gap(final_bound)
    } else {
        f64::INFINITY
    };
    Ok(MilpResult {
        status,
        objective: flip * s.inc_value,
        bound: flip * final_bound,
        gap,
        incumbent: s.incumbent,
        elapsed: start.elapsed().as_secs_f64(),
        nodes,
        lp_failures: failures,
    })
}

#[cfg(test)]
mod tests;
