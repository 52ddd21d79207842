//! Sparse bounded dual simplex with warm starts.
//!
//! Every structural column must have finite bounds. A nonbasic column then
//! can always sit at the bound matching the sign of its reduced cost, so the
//! slack basis is dual feasible and any parent basis stays dual feasible
//! after bounds are tightened. Rows become `a x + s = b` as in the dense
//! engine.

use std::rc::Rc;
use std::time::Instant;

use crate::model::{MilpModel, ObjectiveSense, Sense};

use super::lu::Factor;
use super::{LpSolution, LpStatus};

const PRIMAL_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_UPDATES: usize = 100;
const PERTURBATION: f64 = 1e-6;
const DEGENERATE_BUDGET: usize = 200;
const MIN_WEIGHT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Status {
    Basic,
    Lower,
    Upper,
}

/// Basis statuses and the column in each basis position.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Basis {
    status: Vec<Status>,
    head: Vec<usize>,
    weights: Vec<f64>,
}

pub(crate) struct DualSimplex {
    m: usize,
    n: usize,
    /// Columns of `[A | I]`.
    cols: Vec<Vec<(usize, f64)>>,
    /// Rows of `A` (structural part only).
    rows: Vec<Vec<(usize, f64)>>,
    rhs: Vec<f64>,
    /// Working costs, perturbed while iterating.
    cost: Vec<f64>,
    orig_cost: Vec<f64>,
    sign: f64,
    slack_lo: Vec<f64>,
    slack_hi: Vec<f64>,

    lo: Vec<f64>,
    hi: Vec<f64>,
    x: Vec<f64>,
    d: Vec<f64>,
    status: Vec<Status>,
    head: Vec<usize>,
    pos: Vec<usize>,
    /// Dual steepest-edge weights: squared norms of the rows of `B^-1`, by
    /// basis position.
    weights: Vec<f64>,
    factor: Factor,
    /// The basis this engine currently holds, as last handed out.
    current: Option<Rc<Basis>>,
    pub(crate) iterations: usize,
}

enum Run {
    Optimal,
    Infeasible,
    Breakdown,
    Interrupted,
}

impl DualSimplex {
    /// `None` when some column has an infinite bound.
    pub(crate) fn new(model: &MilpModel) -> Option<Self> {
        if model
            .columns
            .iter()
            .any(|c| !c.lower.is_finite() || !c.upper.is_finite())
        {
            return None;
        }
        let n = model.num_cols();
        let m = model.num_rows();
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n + m];
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
        let mut slack_lo = Vec::with_capacity(m);
        let mut slack_hi = Vec::with_capacity(m);
        for (i, row) in model.rows.iter().enumerate() {
            for &(j, a) in &row.coeffs {
                if a != 0.0 {
                    cols[j].push((i, a));
                    rows[i].push((j, a));
                }
            }
            cols[n + i].push((i, 1.0));
            let (l, h) = match row.sense {
                Sense::Le => (0.0, f64::INFINITY),
                Sense::Ge => (f64::NEG_INFINITY, 0.0),
                Sense::Eq => (0.0, 0.0),
            };
            slack_lo.push(l);
            slack_hi.push(h);
        }
        let sign = match model.sense {
            ObjectiveSense::Maximize => -1.0,
            ObjectiveSense::Minimize => 1.0,
        };
        let mut cost = vec![0.0; n + m];
        for &(j, c) in &model.objective {
            cost[j] += sign * c;
        }
        let mut s = DualSimplex {
            m,
            n,
            cols,
            rows,
            rhs: model.rows.iter().map(|r| r.rhs).collect(),
            orig_cost: cost.clone(),
            cost,
            sign,
            slack_lo,
            slack_hi,
            lo: vec![0.0; n + m],
            hi: vec![0.0; n + m],
            x: vec![0.0; n + m],
            d: vec![0.0; n + m],
            status: vec![Status::Lower; n + m],
            head: Vec::new(),
            pos: vec![usize::MAX; n + m],
            weights: Vec::new(),
            factor: Factor::default(),
            current: None,
            iterations: 0,
        };
        s.set_slack_basis();
        Some(s)
    }

    fn set_slack_basis(&mut self) {
        let (n, m) = (self.n, self.m);
        for j in 0..n {
            self.status[j] = Status::Lower;
            self.pos[j] = usize::MAX;
        }
        self.head = (n..n + m).collect();
        self.weights = vec![1.0; m];
        for i in 0..m {
            self.status[n + i] = Status::Basic;
            self.pos[n + i] = i;
        }
        self.current = None;
    }

    fn load(&mut self, basis: &Basis) {
        self.status.clone_from(&basis.status);
        self.head.clone_from(&basis.head);
        self.weights.clone_from(&basis.weights);
        self.pos.iter_mut().for_each(|p| *p = usize::MAX);
        for (k, &j) in self.head.iter().enumerate() {
            self.pos[j] = k;
        }
    }

    pub(crate) fn basis(&mut self) -> Rc<Basis> {
        if let Some(b) = &self.current {
            return b.clone();
        }
        let b = Rc::new(Basis {
            status: self.status.clone(),
            head: self.head.clone(),
            weights: self.weights.clone(),
        });
        self.current = Some(b.clone());
        b
    }

    fn refactor(&mut self) -> bool {
        let cols: Vec<Vec<(usize, f64)>> = self.head.iter().map(|&j| self.cols[j].clone()).collect();
        match Factor::new(self.m, &cols) {
            Ok(f) => {
                self.factor = f;
                true
            }
            Err(_) => false,
        }
    }

    /// Places nonbasic columns at their bounds, flips them where the reduced
    /// cost asks for the other bound, and recomputes basic values.
    fn recompute(&mut self) -> bool {
        let (n, m) = (self.n, self.m);
        // duals
        let mut y: Vec<f64> = self.head.iter().map(|&j| self.cost[j]).collect();
        self.factor.btran(&mut y);
        for j in 0..n + m {
            self.d[j] = if self.status[j] == Status::Basic {
                0.0
            } else {
                self.cost[j] - self.cols[j].iter().map(|&(i, a)| y[i] * a).sum::<f64>()
            };
        }
        for j in 0..n + m {
            match self.status[j] {
                Status::Basic => continue,
                Status::Lower if self.d[j] < -DUAL_TOL && self.lo[j] < self.hi[j] => {
                    if self.hi[j].is_finite() {
                        self.status[j] = Status::Upper;
                    } else {
                        return false;
                    }
                }
                Status::Upper if self.d[j] > DUAL_TOL && self.lo[j] < self.hi[j] => {
                    if self.lo[j].is_finite() {
                        self.status[j] = Status::Lower;
                    } else {
                        return false;
                    }
                }
                _ => {}
            }
            // A status pointing at an infinite bound moves to the finite one.
            match self.status[j] {
                Status::Lower if !self.lo[j].is_finite() => self.status[j] = Status::Upper,
                Status::Upper if !self.hi[j].is_finite() => self.status[j] = Status::Lower,
                _ => {}
            }
            self.x[j] = match self.status[j] {
                Status::Lower => self.lo[j],
                Status::Upper => self.hi[j],
                Status::Basic => unreachable!(),
            };
            if !self.x[j].is_finite() {
                return false;
            }
        }
        let mut r = self.rhs.clone();
        for j in 0..n + m {
            if self.status[j] != Status::Basic && self.x[j] != 0.0 {
                for &(i, a) in &self.cols[j] {
                    r[i] -= a * self.x[j];
                }
            }
        }
        self.factor.ftran(&mut r);
        for (k, &j) in self.head.iter().enumerate() {
            self.x[j] = r[k];
        }
        true
    }

    /// Solves with structural bounds `lo..=hi`, starting from `warm` when
    /// given (it must be a basis that was optimal under looser bounds).
    pub(crate) fn solve(
        &mut self,
        lo: &[f64],
        hi: &[f64],
        warm: Option<&Rc<Basis>>,
        deadline: Option<Instant>,
    ) -> LpSolution {
        let n = self.n;
        if lo.iter().zip(hi).any(|(l, h)| l > h) {
            return LpSolution::status_only(LpStatus::Infeasible);
        }
        self.lo[..n].copy_from_slice(lo);
        self.hi[..n].copy_from_slice(hi);
        self.lo[n..].copy_from_slice(&self.slack_lo);
        self.hi[n..].copy_from_slice(&self.slack_hi);

        let same = match (warm, &self.current) {
            (Some(w), Some(c)) => Rc::ptr_eq(w, c),
            _ => false,
        };
        let start_iter = self.iterations;
        let mut attempt = 0;
        loop {
            let ok = if attempt == 0 && same {
                true
            } else {
                if attempt == 0 {
                    match warm {
                        Some(w) => self.load(w),
                        None => self.set_slack_basis(),
                    }
                } else {
                    self.set_slack_basis();
                }
                self.refactor()
            };
            self.current = None;
            if ok && self.recompute() {
                match self.run(deadline) {
                    Run::Optimal => {
                        let values = self.x[..n].to_vec();
                        let objective = self.sign * values
                            .iter()
                            .zip(&self.orig_cost)
                            .map(|(v, c)| v * c)
                            .sum::<f64>();
                        return LpSolution {
                            status: LpStatus::Optimal,
                            objective,
                            values,
                            iterations: self.iterations - start_iter,
                        };
                    }
                    Run::Infeasible => {
                        return LpSolution {
                            iterations: self.iterations - start_iter,
                            ..LpSolution::status_only(LpStatus::Infeasible)
                        }
                    }
                    Run::Interrupted => {
                        return LpSolution {
                            iterations: self.iterations - start_iter,
                            ..LpSolution::status_only(LpStatus::Interrupted)
                        }
                    }
                    Run::Breakdown => {}
                }
            }
            attempt += 1;
            if attempt > 1 {
                self.set_slack_basis();
                return LpSolution::breakdown(self.iterations - start_iter);
            }
        }
    }

    /// Shifts every cost by a small deterministic amount in the direction
    /// that keeps nonbasic reduced costs feasible. Breaks the massive dual
    /// degeneracy of zero-cost routing columns.
    fn perturb(&mut self) {
        for j in 0..self.n + self.m {
            let h = (j as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) >> 40;
            let u = h as f64 / (1u64 << 24) as f64;
            let delta = PERTURBATION * (1.0 + self.orig_cost[j].abs()) * (1.0 + u);
            self.cost[j] = self.orig_cost[j]
                + match self.status[j] {
                    Status::Upper => -delta,
                    _ => delta,
                };
        }
    }

    fn run(&mut self, deadline: Option<Instant>) -> Run {
        let (n, m) = (self.n, self.m);
        let total = n + m;
        self.perturb();
        if !self.recompute() {
            return Run::Breakdown;
        }
        let mut perturbed = true;
        let max_iter = self.iterations + 20 * (n + m) + 10_000;
        let mut degenerate = 0usize;
        let mut bland = false;
        let mut alpha = vec![0.0; total];
        let mut touched: Vec<usize> = Vec::new();
        let mut verified = false;
        // Row to retest after a refactorization found it without candidates.
        let mut recheck: Option<usize> = None;
        loop {
            if self.iterations >= max_iter {
                return Run::Breakdown;
            }
            if self.iterations.is_multiple_of(64) {
                if let Some(dl) = deadline {
                    if Instant::now() >= dl {
                        return Run::Interrupted;
                    }
                }
            }
            if self.factor.num_updates() >= REFACTOR_UPDATES
                || self.factor.update_nnz() > 20 * m + 1000
            {
                if !self.refactor() || !self.recompute() {
                    return Run::Breakdown;
                }
            }

            // Leaving row: largest bound violation (Bland: lowest column).
            let mut leave: Option<(usize, f64)> = None;
            let mut worst = 0.0;
            for k in 0..m {
                let j = self.head[k];
                let v = self.x[j];
                let viol = if v < self.lo[j] - PRIMAL_TOL {
                    self.lo[j] - v
                } else if v > self.hi[j] + PRIMAL_TOL {
                    v - self.hi[j]
                } else {
                    continue;
                };
                let score = viol * viol / self.weights[k];
                let better = if bland {
                    leave.is_none_or(|(kk, _)| j < self.head[kk])
                } else {
                    score > worst
                };
                if better {
                    worst = score;
                    leave = Some((k, viol));
                }
            }
            if let Some(k) = recheck.take() {
                let j = self.head[k];
                if self.x[j] < self.lo[j] - PRIMAL_TOL || self.x[j] > self.hi[j] + PRIMAL_TOL {
                    leave = Some((k, 0.0));
                }
            }
            let Some((r, _)) = leave else {
                if perturbed {
                    self.cost.clone_from(&self.orig_cost);
                    perturbed = false;
                    verified = false;
                    if !self.refactor() || !self.recompute() {
                        return Run::Breakdown;
                    }
                    continue;
                }
                if verified {
                    return Run::Optimal;
                }
                // Confirm on a fresh factorization before declaring optimality.
                if !self.refactor() || !self.recompute() {
                    return Run::Breakdown;
                }
                verified = true;
                continue;
            };
            verified = false;
            let p = self.head[r];
            let to_lower = self.x[p] < self.lo[p];

            // Row r of B^-1 A.
            let mut rho = vec![0.0; m];
            rho[r] = 1.0;
            self.factor.btran(&mut rho);
            for &j in &touched {
                alpha[j] = 0.0;
            }
            touched.clear();
            for (i, &ri) in rho.iter().enumerate() {
                if ri.abs() <= 1e-14 {
                    continue;
                }
                for &(j, a) in &self.rows[i] {
                    if alpha[j] == 0.0 {
                        touched.push(j);
                    }
                    alpha[j] += ri * a;
                    if alpha[j] == 0.0 {
                        alpha[j] = f64::MIN_POSITIVE;
                    }
                }
                let s = n + i;
                touched.push(s);
                alpha[s] = ri;
            }

            // Ratio test (Harris two-pass, or exact with index ties in Bland
            // mode). Leaving at its lower bound means x_p must rise.
            let eligible = |j: usize, a: f64, st: Status| -> bool {
                if a.abs() <= PIVOT_TOL {
                    return false;
                }
                match (st, to_lower) {
                    (Status::Lower, true) => a < 0.0,
                    (Status::Upper, true) => a > 0.0,
                    (Status::Lower, false) => a > 0.0,
                    (Status::Upper, false) => a < 0.0,
                    (Status::Basic, _) => {
                        let _ = j;
                        false
                    }
                }
            };
            let mut cands: Vec<(usize, f64)> = Vec::new();
            for &j in &touched {
                let st = self.status[j];
                if st == Status::Basic || self.lo[j] == self.hi[j] {
                    continue;
                }
                let a = alpha[j];
                if eligible(j, a, st) {
                    cands.push((j, a));
                }
            }
            if cands.is_empty() {
                // Double-check on a fresh factorization; drift can fake this.
                if self.factor.num_updates() > 0 {
                    if !self.refactor() || !self.recompute() {
                        return Run::Breakdown;
                    }
                    recheck = Some(r);
                    continue;
                }
                return Run::Infeasible;
            }
            let mut flips: Vec<usize> = Vec::new();
            let q = if bland {
                let mut best: Option<(usize, f64)> = None;
                for &(j, a) in &cands {
                    let ratio = self.d[j].abs() / a.abs();
                    if best.is_none_or(|(bj, br)| ratio < br - 1e-12 || (ratio <= br + 1e-12 && j < bj)) {
                        best = Some((j, ratio));
                    }
                }
                best.unwrap().0
            } else {
                // Bound-flipping pass: boxed candidates whose breakpoint is
                // passed while the dual slope stays positive switch bounds.
                let mut keyed: Vec<(f64, usize, f64)> =
                    cands.iter().map(|&(j, a)| (self.d[j].abs() / a.abs(), j, a)).collect();
                keyed.sort_unstable_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
                cands.clear();
                cands.extend(keyed.iter().map(|&(_, j, a)| (j, a)));
                let mut slope = if to_lower {
                    self.lo[p] - self.x[p]
                } else {
                    self.x[p] - self.hi[p]
                };
                let mut start = 0;
                while start + 1 < cands.len() {
                    let (j, a) = cands[start];
                    let range = self.hi[j] - self.lo[j];
                    let next = slope - a.abs() * range;
                    if !range.is_finite() || next <= PRIMAL_TOL {
                        break;
                    }
                    slope = next;
                    start += 1;
                }
                let rest = &cands[start..];
                let bound = rest
                    .iter()
                    .map(|&(j, a)| (self.d[j].abs() + DUAL_TOL) / a.abs())
                    .fold(f64::INFINITY, f64::min);
                let mut best: Option<(usize, f64)> = None;
                for &(j, a) in rest {
                    if self.d[j].abs() / a.abs() <= bound
                        && best.is_none_or(|(bj, ba)| a.abs() > ba || (a.abs() == ba && j < bj))
                    {
                        best = Some((j, a.abs()));
                    }
                }
                let q = best.unwrap().0;
                let tq = self.d[q].abs() / alpha[q].abs();
                flips.extend(
                    cands[..start]
                        .iter()
                        .map(|&(j, _)| j)
                        .filter(|&j| self.d[j].abs() / alpha[j].abs() <= tq),
                );
                q
            };

            let mut w = vec![0.0; m];
            for &(i, a) in &self.cols[q] {
                w[i] = a;
            }
            self.factor.ftran(&mut w);
            let wr = w[r];
            if wr.abs() <= PIVOT_TOL || (wr - alpha[q]).abs() > 1e-6 * (1.0 + wr.abs()) {
                // Row and column disagree: refresh and retry.
                if self.factor.num_updates() == 0 {
                    return Run::Breakdown;
                }
                if !self.refactor() || !self.recompute() {
                    return Run::Breakdown;
                }
                continue;
            }

            // Dual step.
            let theta_d = self.d[q] / wr;
            if theta_d.abs() <= 1e-12 {
                degenerate += 1;
                if degenerate >= DEGENERATE_BUDGET {
                    bland = true;
                }
            } else {
                degenerate = 0;
            }
            for &j in &touched {
                if self.status[j] != Status::Basic {
                    self.d[j] -= theta_d * alpha[j];
                }
            }
            self.d[q] = 0.0;
            self.d[p] = -theta_d;

            if !flips.is_empty() {
                let mut shift = vec![0.0; m];
                for &j in &flips {
                    let (from, to, st) = match self.status[j] {
                        Status::Lower => (self.lo[j], self.hi[j], Status::Upper),
                        _ => (self.hi[j], self.lo[j], Status::Lower),
                    };
                    self.status[j] = st;
                    self.x[j] = to;
                    for &(i, a) in &self.cols[j] {
                        shift[i] += a * (to - from);
                    }
                }
                self.factor.ftran(&mut shift);
                for (k, &v) in shift.iter().enumerate() {
                    if v != 0.0 {
                        let j = self.head[k];
                        self.x[j] -= v;
                    }
                }
            }

            // Primal step: x_p goes to its violated bound.
            let target = if to_lower { self.lo[p] } else { self.hi[p] };
            let delta_q = (self.x[p] - target) / wr;
            for k in 0..m {
                if w[k] != 0.0 {
                    let j = self.head[k];
                    self.x[j] -= w[k] * delta_q;
                }
            }
            self.x[q] += delta_q;
            self.x[p] = target;
            self.status[p] = if to_lower { Status::Lower } else { Status::Upper };
            self.pos[p] = usize::MAX;
            self.status[q] = Status::Basic;
            self.pos[q] = r;
            self.head[r] = q;
            let mut tau = rho;
            self.factor.ftran(&mut tau);
            let beta_r = tau[r].max(PIVOT_TOL);
            for k in 0..m {
                if k != r && w[k] != 0.0 {
                    let ratio = w[k] / wr;
                    let b = self.weights[k] - 2.0 * ratio * tau[k] + ratio * ratio * beta_r;
                    self.weights[k] = b.max(ratio * ratio).max(MIN_WEIGHT);
                }
            }
            self.weights[r] = (beta_r / (wr * wr)).max(MIN_WEIGHT);
            self.factor.update(r, &w);
            self.iterations += 1;
        }
    }
}
