//! Dense bounded-variable primal simplex with an explicit basis inverse.
//!
//! Meant for small models: every iteration costs O(m^2) for the inverse
//! update on top of pricing. Rows become `a x + s = b` with a slack whose
//! bounds encode the sense, and phase one starts from an all-artificial
//! basis.

use crate::model::{MilpModel, ObjectiveSense, Sense};

use super::{LpSolution, LpStatus};

const PRICE_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 64;
const DEGENERATE_BUDGET: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
enum State {
    Basic(usize),
    Lower,
    Upper,
    /// Nonbasic free variable resting at zero.
    Free,
}

struct Tableau {
    m: usize,
    cols: Vec<Vec<(usize, f64)>>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    rhs: Vec<f64>,
    x: Vec<f64>,
    state: Vec<State>,
    basis: Vec<usize>,
    /// Row-major `m x m` basis inverse.
    binv: Vec<f64>,
    iterations: usize,
    max_iterations: usize,
}

enum Outcome {
    Optimal,
    Unbounded,
    Breakdown,
}

impl Tableau {
    fn column_dot(&self, y: &[f64], j: usize) -> f64 {
        self.cols[j].iter().map(|&(i, a)| y[i] * a).sum()
    }

    /// `binv * A_j`.
    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut w = vec![0.0; m];
        for &(i, a) in &self.cols[j] {
            for (k, wk) in w.iter_mut().enumerate() {
                *wk += self.binv[k * m + i] * a;
            }
        }
        w
    }

    fn refactor(&mut self) -> bool {
        let m = self.m;
        let mut b = vec![0.0; m * m];
        for (k, &j) in self.basis.iter().enumerate() {
            for &(i, a) in &self.cols[j] {
                b[i * m + k] = a;
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        // Gauss-Jordan with partial pivoting on B, mirrored onto inv.
        for c in 0..m {
            let p = (c..m)
                .max_by(|&a, &b2| b[a * m + c].abs().total_cmp(&b[b2 * m + c].abs()))
                .unwrap();
            if b[p * m + c].abs() < 1e-11 {
                return false;
            }
            if p != c {
                for k in 0..m {
                    b.swap(p * m + k, c * m + k);
                    inv.swap(p * m + k, c * m + k);
                }
            }
            let piv = b[c * m + c];
            for k in 0..m {
                b[c * m + k] /= piv;
                inv[c * m + k] /= piv;
            }
            for r in 0..m {
                if r != c {
                    let f = b[r * m + c];
                    if f != 0.0 {
                        for k in 0..m {
                            b[r * m + k] -= f * b[c * m + k];
                            inv[r * m + k] -= f * inv[c * m + k];
                        }
                    }
                }
            }
        }
        self.binv = inv;
        // Recompute basic values from the nonbasic ones.
        let mut resid = self.rhs.clone();
        for (j, col) in self.cols.iter().enumerate() {
            if !matches!(self.state[j], State::Basic(_)) && self.x[j] != 0.0 {
                for &(i, a) in col {
                    resid[i] -= a * self.x[j];
                }
            }
        }
        for k in 0..m {
            let v: f64 = (0..m).map(|i| self.binv[k * m + i] * resid[i]).sum();
            self.x[self.basis[k]] = v;
        }
        true
    }

    fn run(&mut self, cost: &[f64]) -> Outcome {
        let m = self.m;
        let ncols = self.cols.len();
        let mut degenerate = 0usize;
        let mut bland = false;
        let mut since_refactor = 0usize;
        loop {
            if self.iterations >= self.max_iterations {
                return Outcome::Breakdown;
            }
            if since_refactor >= REFACTOR_EVERY {
                if !self.refactor() {
                    return Outcome::Breakdown;
                }
                since_refactor = 0;
            }

            let mut y = vec![0.0; m];
            for (k, &j) in self.basis.iter().enumerate() {
                let c = cost[j];
                if c != 0.0 {
                    for (i, yi) in y.iter_mut().enumerate() {
                        *yi += c * self.binv[k * m + i];
                    }
                }
            }

            // Entering variable and its direction (+1 increase, -1 decrease).
            let mut entering: Option<(usize, f64)> = None;
            let mut best = 0.0;
            for j in 0..ncols {
                let st = self.state[j];
                if matches!(st, State::Basic(_)) || self.lo[j] == self.hi[j] {
                    continue;
                }
                let d = cost[j] - self.column_dot(&y, j);
                let dir = match st {
                    State::Lower if d < -PRICE_TOL => 1.0,
                    State::Upper if d > PRICE_TOL => -1.0,
                    State::Free if d.abs() > PRICE_TOL => -d.signum(),
                    _ => continue,
                };
                if bland {
                    entering = Some((j, dir));
                    break;
                }
                if d.abs() > best {
                    best = d.abs();
                    entering = Some((j, dir));
                }
            }
            let Some((q, dir)) = entering else {
                return Outcome::Optimal;
            };

            let w = self.ftran(q);
            // Basic values move by -dir * t * w.
            let mut step = self.hi[q] - self.lo[q];
            let mut leave: Option<(usize, f64)> = None;
            let mut leave_pivot = 0.0;
            for k in 0..m {
                let delta = -dir * w[k];
                if delta.abs() <= PIVOT_TOL {
                    continue;
                }
                let j = self.basis[k];
                let (limit, bound) = if delta < 0.0 {
                    if self.lo[j] == f64::NEG_INFINITY {
                        continue;
                    }
                    (((self.x[j] - self.lo[j]) / -delta).max(0.0), self.lo[j])
                } else {
                    if self.hi[j] == f64::INFINITY {
                        continue;
                    }
                    (((self.hi[j] - self.x[j]) / delta).max(0.0), self.hi[j])
                };
                let better = match leave {
                    None => limit < step || (limit == step && step.is_finite()),
                    Some((kk, _)) => {
                        if bland {
                            limit < step - 1e-12
                                || (limit <= step + 1e-12 && self.basis[k] < self.basis[kk])
                        } else {
                            limit < step - 1e-12
                                || (limit <= step + 1e-12 && delta.abs() > leave_pivot)
                        }
                    }
                };
                if better {
                    step = step.min(limit);
                    leave = Some((k, bound));
                    leave_pivot = delta.abs();
                }
            }
            if leave.is_none() && step == f64::INFINITY {
                return Outcome::Unbounded;
            }

            self.iterations += 1;
            since_refactor += 1;
            if step <= 1e-12 {
                degenerate += 1;
                if degenerate >= DEGENERATE_BUDGET {
                    bland = true;
                }
            } else {
                degenerate = 0;
            }

            self.x[q] += dir * step;
            for k in 0..m {
                let j = self.basis[k];
                self.x[j] -= dir * step * w[k];
            }
            match leave {
                None => {
                    // Bound flip.
                    self.state[q] = if dir > 0.0 { State::Upper } else { State::Lower };
                    self.x[q] = if dir > 0.0 { self.hi[q] } else { self.lo[q] };
                }
                Some((r, bound)) => {
                    let out = self.basis[r];
                    self.x[out] = bound;
                    self.state[out] = if bound == self.lo[out] { State::Lower } else { State::Upper };
                    self.basis[r] = q;
                    self.state[q] = State::Basic(r);
                    let piv = w[r];
                    for i in 0..m {
                        self.binv[r * m + i] /= piv;
                    }
                    for k in 0..m {
                        if k != r && w[k] != 0.0 {
                            let f = w[k];
                            for i in 0..m {
                                self.binv[k * m + i] -= f * self.binv[r * m + i];
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Solves the LP relaxation of `model` with column bounds `lo..=hi`.
pub(crate) fn solve_dense(model: &MilpModel, lo: &[f64], hi: &[f64], feas_tol: f64) -> LpSolution {
    let n = model.num_cols();
    let m = model.num_rows();
    if lo.iter().zip(hi).any(|(l, h)| l > h) {
        return LpSolution::status_only(LpStatus::Infeasible);
    }
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n + 2 * m];
    for (i, row) in model.rows.iter().enumerate() {
        for &(j, a) in &row.coeffs {
            if a != 0.0 {
                cols[j].push((i, a));
            }
        }
    }
    let mut lower = lo.to_vec();
    let mut upper = hi.to_vec();
    let mut state = Vec::with_capacity(n + 2 * m);
    let mut x = Vec::with_capacity(n + 2 * m);
    for j in 0..n {
        if lower[j].is_finite() {
            state.push(State::Lower);
            x.push(lower[j]);
        } else if upper[j].is_finite() {
            state.push(State::Upper);
            x.push(upper[j]);
        } else {
            state.push(State::Free);
            x.push(0.0);
        }
    }
    for (i, row) in model.rows.iter().enumerate() {
        cols[n + i].push((i, 1.0));
        let (l, h) = match row.sense {
            Sense::Le => (0.0, f64::INFINITY),
            Sense::Ge => (f64::NEG_INFINITY, 0.0),
            Sense::Eq => (0.0, 0.0),
        };
        lower.push(l);
        upper.push(h);
        state.push(State::Lower);
        x.push(0.0);
        if l != 0.0 {
            state[n + i] = State::Upper;
        }
    }
    let rhs: Vec<f64> = model.rows.iter().map(|r| r.rhs).collect();
    let mut binv = vec![0.0; m * m];
    let mut basis = Vec::with_capacity(m);
    for (i, row) in model.rows.iter().enumerate() {
        let act: f64 = row.coeffs.iter().map(|&(j, a)| a * x[j]).sum();
        let resid = row.rhs - act;
        let sign = if resid >= 0.0 { 1.0 } else { -1.0 };
        cols[n + m + i].push((i, sign));
        lower.push(0.0);
        upper.push(f64::INFINITY);
        state.push(State::Basic(i));
        x.push(resid.abs());
        basis.push(n + m + i);
        binv[i * m + i] = sign;
    }

    let mut t = Tableau {
        m,
        cols,
        lo: lower,
        hi: upper,
        rhs,
        x,
        state,
        basis,
        binv,
        iterations: 0,
        max_iterations: 10_000 + 50 * (n + 2 * m),
    };

    let mut phase1 = vec![0.0; n + 2 * m];
    for c in &mut phase1[n + m..] {
        *c = 1.0;
    }
    match t.run(&phase1) {
        Outcome::Optimal => {}
        Outcome::Unbounded | Outcome::Breakdown => {
            return LpSolution::breakdown(t.iterations);
        }
    }
    let scale = 1.0 + t.rhs.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let infeas: f64 = t.x[n + m..].iter().sum();
    if infeas > feas_tol * scale {
        return LpSolution {
            iterations: t.iterations,
            ..LpSolution::status_only(LpStatus::Infeasible)
        };
    }
    for j in n + m..n + 2 * m {
        t.hi[j] = 0.0;
        if !matches!(t.state[j], State::Basic(_)) {
            t.state[j] = State::Lower;
            t.x[j] = 0.0;
        }
    }

    let mut cost = vec![0.0; n + 2 * m];
    let flip = match model.sense {
        ObjectiveSense::Maximize => -1.0,
        ObjectiveSense::Minimize => 1.0,
    };
    for &(j, c) in &model.objective {
        cost[j] += flip * c;
    }
    match t.run(&cost) {
        Outcome::Optimal => {}
        Outcome::Unbounded => {
            return LpSolution {
                iterations: t.iterations,
                ..LpSolution::status_only(LpStatus::Unbounded)
            }
        }
        Outcome::Breakdown => return LpSolution::breakdown(t.iterations),
    }
    if !t.refactor() {
        return LpSolution::breakdown(t.iterations);
    }
    let values: Vec<f64> = t.x[..n].to_vec();
    let bound_err = (0..n + 2 * m)
        .map(|j| (t.lo[j] - t.x[j]).max(t.x[j] - t.hi[j]).max(0.0))
        .fold(0.0f64, f64::max);
    if bound_err > feas_tol * scale {
        return LpSolution::breakdown(t.iterations);
    }
    LpSolution {
        status: LpStatus::Optimal,
        objective: model.objective_value(&values),
        values,
        iterations: t.iterations,
    }
}
