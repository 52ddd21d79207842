//! Independent checks on embeddings: a constraint-by-constraint feasibility
//! checker that recomputes every sum from the instance, and an exhaustive
//! optimum for tiny instances. Nothing here reads solver or model state.

use std::fmt;

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use serde::{Deserialize, Serialize};

use crate::baseline::{linear_capacity_cost, min_bulk_covering};
use crate::error::{Error, Result};
use crate::instance::{Bulk, Instance};
use crate::model::{ModelConfig, RabMode, Routing};

/// Flow of one commodity, as fractions of its demand per arc.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommodityFlow {
    pub request: usize,
    pub source: usize,
    pub target: usize,
    pub demand: f64,
    pub arc_flow: Vec<f64>,
}

/// Decoded acceptance, mapping, routing and rental decisions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSolution {
    pub accepted: Vec<bool>,
    /// `[r][v]`: substrate node hosting virtual node `v`, `None` when the
    /// request is rejected.
    pub mapping: Vec<Vec<Option<usize>>>,
    /// One entry per commodity, requests in order and commodities in
    /// `(source, target)` order within a request.
    pub flows: Vec<CommodityFlow>,
    /// `[i][u]`: bulks of node catalog entry `u` rented on node `i`.
    pub node_rentals: Vec<Vec<f64>>,
    /// `[a][q]`: bulks of link catalog entry `q` rented on arc `a`.
    pub link_rentals: Vec<Vec<f64>>,
    pub node_usage: Vec<f64>,
    pub link_usage: Vec<f64>,
}

impl EmbeddingSolution {
    /// Nothing accepted, nothing rented.
    pub fn empty(inst: &Instance) -> Self {
        let sub = &inst.substrate;
        let flows = inst
            .requests
            .iter()
            .enumerate()
            .flat_map(|(r, req)| {
                req.commodities().into_iter().map(move |c| CommodityFlow {
                    request: r,
                    source: c.source,
                    target: c.target,
                    demand: c.demand,
                    arc_flow: vec![0.0; sub.num_arcs()],
                })
            })
            .collect();
        EmbeddingSolution {
            accepted: vec![false; inst.requests.len()],
            mapping: inst.requests.iter().map(|r| vec![None; r.num_nodes()]).collect(),
            flows,
            node_rentals: vec![vec![0.0; inst.catalog.node_bulks.len()]; sub.num_nodes()],
            link_rentals: vec![vec![0.0; inst.catalog.link_bulks.len()]; sub.num_arcs()],
            node_usage: vec![0.0; sub.num_nodes()],
            link_usage: vec![0.0; sub.num_arcs()],
        }
    }

    pub fn num_accepted(&self) -> usize {
        self.accepted.iter().filter(|&&a| a).count()
    }
}

/// Profit of an embedding computed from the instance data: accepted profit
/// minus rental cost.
pub fn solution_profit(inst: &Instance, sol: &EmbeddingSolution) -> f64 {
    let revenue: f64 = inst
        .requests
        .iter()
        .zip(&sol.accepted)
        .filter(|(_, &a)| a)
        .map(|(r, _)| r.profit)
        .sum();
    let rent = |rows: &[Vec<f64>], bulks: &[Bulk]| -> f64 {
        rows.iter()
            .flat_map(|counts| counts.iter().zip(bulks).map(|(&c, b)| c * b.cost))
            .sum()
    };
    revenue
        - rent(&sol.node_rentals, &inst.catalog.node_bulks)
        - rent(&sol.link_rentals, &inst.catalog.link_bulks)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConstraintFamily {
    /// Dimensions of the solution do not match the instance.
    Structure,
    /// Each virtual node of an accepted request on one allowed node.
    Mapping,
    NodeCapacity,
    LinkCapacity,
    NodeBulk,
    LinkBulk,
    FlowBalance,
    /// Variable domains: flow fractions, integrality, nonnegativity.
    Domain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionViolation {
    pub family: ConstraintFamily,
    /// Offending indices, e.g. `[r, v]` or `[i]` or `[r, v, w, i]`.
    pub indices: Vec<usize>,
    pub magnitude: f64,
    pub message: String,
}

impl fmt::Display for SolutionViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:?} {:?}: {} (by {:.3e})",
            self.family, self.indices, self.message, self.magnitude
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub violations: Vec<SolutionViolation>,
    pub max_violation: f64,
}

impl fmt::Display for ViolationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        f.write_str(&parts.join("; "))
    }
}

impl ViolationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, family: ConstraintFamily, indices: Vec<usize>, magnitude: f64, message: String) {
        self.max_violation = self.max_violation.max(magnitude);
        self.violations.push(SolutionViolation {
            family,
            indices,
            magnitude,
            message,
        });
    }
}

/// Checks every constraint family against `sol`, recomputing usage and flow
/// balance from the instance.
pub fn check_solution(
    inst: &Instance,
    sol: &EmbeddingSolution,
    cfg: ModelConfig,
    tol: f64,
) -> ViolationReport {
    use ConstraintFamily::*;
    let mut rep = ViolationReport::default();
    let sub = &inst.substrate;
    let (n, m) = (sub.num_nodes(), sub.num_arcs());
    let cat = &inst.catalog;

    let commodities: Vec<_> = inst
        .requests
        .iter()
        .enumerate()
        .flat_map(|(r, req)| req.commodities().into_iter().map(move |c| (r, c)))
        .collect();
    let shape_ok = sol.accepted.len() == inst.requests.len()
        && sol.mapping.len() == inst.requests.len()
        && sol
            .mapping
            .iter()
            .zip(&inst.requests)
            .all(|(mp, r)| mp.len() == r.num_nodes())
        && sol.flows.len() == commodities.len()
        && sol.flows.iter().zip(&commodities).all(|(fl, (r, c))| {
            fl.request == *r && fl.source == c.source && fl.target == c.target && fl.arc_flow.len() == m
        })
        && sol.node_rentals.len() == n
        && sol.node_rentals.iter().all(|g| g.len() == cat.node_bulks.len())
        && sol.link_rentals.len() == m
        && sol.link_rentals.iter().all(|h| h.len() == cat.link_bulks.len());
    if !shape_ok {
        rep.push(
            Structure,
            vec![],
            f64::INFINITY,
            "solution dimensions do not match the instance".into(),
        );
        return rep;
    }

    // Mapping: accepted requests place every virtual node inside its
    // locality set, rejected ones place none.
    for (r, req) in inst.requests.iter().enumerate() {
        for (v, node) in req.nodes.iter().enumerate() {
            match (sol.accepted[r], sol.mapping[r][v]) {
                (true, None) => rep.push(
                    Mapping,
                    vec![r, v],
                    1.0,
                    format!("virtual node {v} of accepted request {r} is unmapped"),
                ),
                (true, Some(i)) if !node.locality.contains(&i) => rep.push(
                    Mapping,
                    vec![r, v, i],
                    1.0,
                    format!("virtual node {v} of request {r} mapped to {i}, outside its locality set"),
                ),
                (false, Some(i)) => rep.push(
                    Mapping,
                    vec![r, v, i],
                    1.0,
                    format!("virtual node {v} of rejected request {r} is mapped to {i}"),
                ),
                _ => {}
            }
        }
    }

    // Domains.
    for fl in &sol.flows {
        for (a, &x) in fl.arc_flow.iter().enumerate() {
            let out = (-x).max(x - 1.0).max(0.0);
            if out > tol {
                rep.push(
                    Domain,
                    vec![fl.request, fl.source, fl.target, a],
                    out,
                    format!("flow fraction {x} outside [0, 1]"),
                );
            }
            let frac = (x - x.round()).abs();
            if cfg.routing == Routing::SinglePath && frac > tol {
                rep.push(
                    Domain,
                    vec![fl.request, fl.source, fl.target, a],
                    frac,
                    format!("single-path flow {x} is fractional"),
                );
            }
        }
    }
    let rental_domain = |rows: &[Vec<f64>], what: &str, rep: &mut ViolationReport| {
        for (k, counts) in rows.iter().enumerate() {
            for (b, &x) in counts.iter().enumerate() {
                if x < -tol {
                    rep.push(Domain, vec![k, b], -x, format!("{what} rental {x} is negative"));
                }
                let frac = (x - x.round()).abs();
                if cfg.rab == RabMode::Integral && frac > tol {
                    rep.push(Domain, vec![k, b], frac, format!("{what} rental {x} is fractional"));
                }
            }
        }
    };
    rental_domain(&sol.node_rentals, "node", &mut rep);
    rental_domain(&sol.link_rentals, "link", &mut rep);

    // Usage against rented capacity, rented against physical capacity.
    let mut node_use = vec![0.0; n];
    for (r, req) in inst.requests.iter().enumerate() {
        if !sol.accepted[r] {
            continue;
        }
        for (v, node) in req.nodes.iter().enumerate() {
            if let Some(i) = sol.mapping[r][v] {
                if i < n {
                    node_use[i] += node.requirement;
                }
            }
        }
    }
    let mut link_use = vec![0.0; m];
    for fl in &sol.flows {
        for (a, &x) in fl.arc_flow.iter().enumerate() {
            link_use[a] += fl.demand * x;
        }
    }
    let rented = |counts: &[f64], bulks: &[Bulk]| -> f64 {
        counts.iter().zip(bulks).map(|(&c, b)| c * b.size).sum()
    };
    for i in 0..n {
        let cap = rented(&sol.node_rentals[i], &cat.node_bulks);
        let over = node_use[i] - cap;
        if over > tol {
            rep.push(
                NodeCapacity,
                vec![i],
                over,
                format!("node {i} uses {} but rents {cap}", node_use[i]),
            );
        }
        let over = cap - sub.nodes()[i].capacity;
        if over > tol {
            rep.push(
                NodeBulk,
                vec![i],
                over,
                format!("node {i} rents {cap} of {} available", sub.nodes()[i].capacity),
            );
        }
    }
    for (a, arc) in sub.arcs().iter().enumerate() {
        let cap = rented(&sol.link_rentals[a], &cat.link_bulks);
        let over = link_use[a] - cap;
        if over > tol {
            rep.push(
                LinkCapacity,
                vec![arc.tail, arc.head],
                over,
                format!("arc ({}, {}) carries {} but rents {cap}", arc.tail, arc.head, link_use[a]),
            );
        }
        let over = cap - arc.capacity;
        if over > tol {
            rep.push(
                LinkBulk,
                vec![arc.tail, arc.head],
                over,
                format!("arc ({}, {}) rents {cap} of {} available", arc.tail, arc.head, arc.capacity),
            );
        }
    }

    // Flow balance: node i emits one unit when it hosts the source and not
    // the target, absorbs one unit in the opposite case, and is a transit
    // node otherwise (including co-location).
    for fl in &sol.flows {
        let r = fl.request;
        let host = |v: usize| if sol.accepted[r] { sol.mapping[r][v] } else { None };
        let (hs, ht) = (host(fl.source), host(fl.target));
        for i in 0..n {
            let out: f64 = sub.out_arcs(i).iter().map(|&a| fl.arc_flow[a]).sum();
            let inn: f64 = sub.in_arcs(i).iter().map(|&a| fl.arc_flow[a]).sum();
            let supply = (hs == Some(i)) as i32 as f64 - (ht == Some(i)) as i32 as f64;
            let gap = (out - inn - supply).abs();
            if gap > tol {
                rep.push(
                    FlowBalance,
                    vec![r, fl.source, fl.target, i],
                    gap,
                    format!("net outflow {} at node {i}, expected {supply}", out - inn),
                );
            }
        }
    }
    rep
}

/// Limit on the number of acceptance/mapping combinations, and separately
/// on path assignments per combination.
pub const ORACLE_LIMIT: f64 = 1e7;

struct Oracle<'a> {
    inst: &'a Instance,
    cfg: ModelConfig,
    /// `[i][j]` simple paths from `i` to `j` as arc lists (single-path only).
    paths: Vec<Vec<Vec<Vec<usize>>>>,
    best: f64,
}

/// Exact optimum of a tiny instance by enumerating acceptance decisions
/// and node mappings, then finding the cheapest routing for each.
///
/// Rentals are priced per resource by the cheapest covering of its usage,
/// which is exact since rentals decouple by resource once usage is fixed.
/// Single-path routing enumerates simple-path assignments. Splittable
/// routing with integer bulks solves the fixed-mapping flow problem with
/// integer link rentals as a small MILP; with relaxed bulks it is an LP.
pub fn brute_force_optimum(inst: &Instance, cfg: ModelConfig) -> Result<f64> {
    let violations = inst.validate();
    if !violations.is_empty() {
        return Err(Error::InvalidInstance(violations));
    }
    let size: f64 = inst
        .requests
        .iter()
        .map(|r| 1.0 + r.nodes.iter().map(|v| v.locality.len() as f64).product::<f64>())
        .product();
    if size > ORACLE_LIMIT {
        return Err(Error::OracleLimit {
            size,
            limit: ORACLE_LIMIT,
        });
    }
    let n = inst.substrate.num_nodes();
    let paths = if cfg.routing == Routing::SinglePath {
        (0..n)
            .map(|s| (0..n).map(|t| simple_paths(inst, s, t)).collect())
            .collect()
    } else {
        Vec::new()
    };
    let mut oracle = Oracle {
        inst,
        cfg,
        paths,
        best: 0.0,
    };
    let mut choice: Vec<Option<Vec<usize>>> = Vec::with_capacity(inst.requests.len());
    oracle.enumerate(0, &mut choice)?;
    Ok(oracle.best)
}

fn simple_paths(inst: &Instance, s: usize, t: usize) -> Vec<Vec<usize>> {
    fn dfs(
        inst: &Instance,
        u: usize,
        t: usize,
        seen: &mut Vec<bool>,
        path: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if u == t {
            out.push(path.clone());
            return;
        }
        for &a in inst.substrate.out_arcs(u) {
            let h = inst.substrate.arcs()[a].head;
            if !seen[h] {
                seen[h] = true;
                path.push(a);
                dfs(inst, h, t, seen, path, out);
                path.pop();
                seen[h] = false;
            }
        }
    }
    if s == t {
        return vec![vec![]];
    }
    let mut seen = vec![false; inst.substrate.num_nodes()];
    seen[s] = true;
    let mut out = Vec::new();
    dfs(inst, s, t, &mut seen, &mut Vec::new(), &mut out);
    out
}

impl Oracle<'_> {
    fn price(&self, usage: f64, bulks: &[Bulk], capacity: f64) -> Option<f64> {
        match self.cfg.rab {
            RabMode::Integral => {
                let c = min_bulk_covering(usage, bulks, capacity);
                c.feasible.then_some(c.cost)
            }
            RabMode::Relaxed => (usage <= capacity + 1e-9).then(|| linear_capacity_cost(usage, bulks)),
        }
    }

    fn enumerate(&mut self, r: usize, choice: &mut Vec<Option<Vec<usize>>>) -> Result<()> {
        let inst = self.inst;
        if r == inst.requests.len() {
            return self.evaluate(choice);
        }
        choice.push(None);
        self.enumerate(r + 1, choice)?;
        choice.pop();
        let req = &inst.requests[r];
        if req.nodes.iter().any(|v| v.locality.is_empty()) {
            return Ok(());
        }
        let mut idx = vec![0usize; req.num_nodes()];
        loop {
            let map: Vec<usize> = idx
                .iter()
                .zip(&req.nodes)
                .map(|(&k, v)| v.locality[k])
                .collect();
            choice.push(Some(map));
            self.enumerate(r + 1, choice)?;
            choice.pop();
            // odometer increment
            let mut k = 0;
            loop {
                if k == idx.len() {
                    return Ok(());
                }
                idx[k] += 1;
                if idx[k] < req.nodes[k].locality.len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    }

    fn evaluate(&mut self, choice: &[Option<Vec<usize>>]) -> Result<()> {
        let inst = self.inst;
        let sub = &inst.substrate;
        let mut revenue = 0.0;
        let mut node_use = vec![0.0; sub.num_nodes()];
        let mut demands: Vec<(usize, usize, f64)> = Vec::new();
        for (req, map) in inst.requests.iter().zip(choice) {
            let Some(map) = map else { continue };
            revenue += req.profit;
            for (v, node) in req.nodes.iter().enumerate() {
                node_use[map[v]] += node.requirement;
            }
            for c in req.commodities() {
                let (s, t) = (map[c.source], map[c.target]);
                if s != t {
                    demands.push((s, t, c.demand));
                }
            }
        }
        let mut node_cost = 0.0;
        for (node, &u) in sub.nodes().iter().zip(&node_use) {
            match self.price(u, &inst.catalog.node_bulks, node.capacity) {
                Some(c) => node_cost += c,
                None => return Ok(()),
            }
        }
        let budget = revenue - node_cost - self.best;
        if budget <= 1e-9 {
            return Ok(());
        }
        let link_cost = if demands.is_empty() {
            Some(0.0)
        } else {
            match self.cfg.routing {
                Routing::SinglePath => self.single_path_cost(&demands, budget)?,
                Routing::Splittable => self.splittable_cost(&demands)?,
            }
        };
        if let Some(lc) = link_cost {
            self.best = self.best.max(revenue - node_cost - lc);
        }
        Ok(())
    }

    fn link_cost_of(&self, usage: &[f64]) -> Option<f64> {
        let mut total = 0.0;
        for (arc, &u) in self.inst.substrate.arcs().iter().zip(usage) {
            total += self.price(u, &self.inst.catalog.link_bulks, arc.capacity)?;
        }
        Some(total)
    }

    /// Cheapest link cost over all simple-path assignments, or `None` when
    /// none fits or none beats `budget`.
    fn single_path_cost(&self, demands: &[(usize, usize, f64)], budget: f64) -> Result<Option<f64>> {
        let size: f64 = demands
            .iter()
            .map(|&(s, t, _)| self.paths[s][t].len() as f64)
            .product();
        if size > ORACLE_LIMIT {
            return Err(Error::OracleLimit {
                size,
                limit: ORACLE_LIMIT,
            });
        }
        let mut usage = vec![0.0; self.inst.substrate.num_arcs()];
        let mut best: Option<f64> = None;
        self.assign_paths(demands, 0, &mut usage, budget, &mut best);
        Ok(best)
    }

    fn assign_paths(
        &self,
        demands: &[(usize, usize, f64)],
        k: usize,
        usage: &mut Vec<f64>,
        budget: f64,
        best: &mut Option<f64>,
    ) {
        // Costs only grow as more demand is added, so the partial cost is a
        // lower bound for every completion.
        let Some(partial) = self.link_cost_of(usage) else {
            return;
        };
        let bound = best.map_or(budget, |b| b.min(budget));
        if partial >= bound - 1e-9 {
            return;
        }
        if k == demands.len() {
            *best = Some(partial);
            return;
        }
        let (s, t, d) = demands[k];
        for path in &self.paths[s][t] {
            for &a in path {
                usage[a] += d;
            }
            self.assign_paths(demands, k + 1, usage, budget, best);
            for &a in path {
                usage[a] -= d;
            }
        }
    }

    /// Cheapest link cost with fractional routing for a fixed mapping.
    fn splittable_cost(&self, demands: &[(usize, usize, f64)]) -> Result<Option<f64>> {
        let sub = &self.inst.substrate;
        let bulks = &self.inst.catalog.link_bulks;
        let mut p = Problem::new(OptimizationDirection::Minimize);
        let flow: Vec<Vec<microlp::Variable>> = demands
            .iter()
            .map(|_| (0..sub.num_arcs()).map(|_| p.add_var(0.0, (0.0, 1.0))).collect())
            .collect();
        for (k, &(s, t, _)) in demands.iter().enumerate() {
            for i in 0..sub.num_nodes() {
                let mut expr: Vec<(microlp::Variable, f64)> = Vec::new();
                expr.extend(sub.out_arcs(i).iter().map(|&a| (flow[k][a], 1.0)));
                expr.extend(sub.in_arcs(i).iter().map(|&a| (flow[k][a], -1.0)));
                let rhs = (i == s) as i32 as f64 - (i == t) as i32 as f64;
                p.add_constraint(expr, ComparisonOp::Eq, rhs);
            }
        }
        for (a, arc) in sub.arcs().iter().enumerate() {
            let mut expr: Vec<(microlp::Variable, f64)> =
                demands.iter().enumerate().map(|(k, &(_, _, d))| (flow[k][a], d)).collect();
            match self.cfg.rab {
                RabMode::Integral => {
                    let mut rent: Vec<(microlp::Variable, f64)> = Vec::new();
                    for b in bulks {
                        let ub = (arc.capacity / b.size).floor() as i32;
                        let h = p.add_integer_var(b.cost, (0, ub));
                        rent.push((h, b.size));
                    }
                    p.add_constraint(rent.clone(), ComparisonOp::Le, arc.capacity);
                    expr.extend(rent.into_iter().map(|(h, s)| (h, -s)));
                    p.add_constraint(expr, ComparisonOp::Le, 0.0);
                }
                RabMode::Relaxed => {
                    let unit = bulks.iter().map(|b| b.unit_cost()).fold(f64::INFINITY, f64::min);
                    let cap = p.add_var(unit, (0.0, arc.capacity));
                    expr.push((cap, -1.0));
                    p.add_constraint(expr, ComparisonOp::Le, 0.0);
                }
            }
        }
        match p.solve() {
            Ok(out) => match out.solution() {
                Some(sol) if out.is_optimal() => Ok(Some(sol.objective())),
                _ => Err(Error::Solver("oracle subproblem did not reach optimality".into())),
            },
            Err(microlp::Error::Infeasible) => Ok(None),
            Err(e) => Err(Error::Solver(format!("oracle subproblem: {e}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{
        Arc, BulkCatalog, SubstrateNetwork, SubstrateNode, TrafficMatrix, VirtualNode, VnRequest,
    };

    fn cfg(routing: Routing) -> ModelConfig {
        ModelConfig {
            routing,
            rab: RabMode::Integral,
        }
    }

    fn line(caps: &[f64], arc_cap: f64) -> SubstrateNetwork {
        let nodes = caps
            .iter()
            .enumerate()
            .map(|(id, &capacity)| SubstrateNode { id, capacity })
            .collect();
        let mut arcs = Vec::new();
        for i in 0..caps.len() - 1 {
            arcs.push(Arc { tail: i, head: i + 1, capacity: arc_cap });
            arcs.push(Arc { tail: i + 1, head: i, capacity: arc_cap });
        }
        SubstrateNetwork::new(nodes, arcs)
    }

    fn two_node_request(d: f64, loc_a: Vec<usize>, loc_b: Vec<usize>) -> VnRequest {
        let mut traffic = TrafficMatrix::zeros(2);
        traffic.set(0, 1, d);
        VnRequest {
            id: 0,
            nodes: vec![
                VirtualNode { id: 0, requirement: 3.0, locality: loc_a },
                VirtualNode { id: 1, requirement: 3.0, locality: loc_b },
            ],
            traffic,
            profit: 500.0,
        }
    }

    fn inst(substrate: SubstrateNetwork, requests: Vec<VnRequest>) -> Instance {
        Instance {
            substrate,
            catalog: BulkCatalog::standard(),
            requests,
        }
    }

    #[test]
    fn empty_solution_passes() {
        let i = inst(line(&[10.0, 10.0], 10.0), vec![two_node_request(4.0, vec![0], vec![1])]);
        let rep = check_solution(&i, &EmbeddingSolution::empty(&i), cfg(Routing::SinglePath), 1e-9);
        assert!(rep.is_empty(), "{rep:?}");
    }

    fn routed_solution(i: &Instance) -> EmbeddingSolution {
        let mut sol = EmbeddingSolution::empty(i);
        sol.accepted[0] = true;
        sol.mapping[0] = vec![Some(0), Some(1)];
        let a = i.substrate.arc_index(0, 1).unwrap();
        sol.flows[0].arc_flow[a] = 1.0;
        sol.node_rentals[0] = vec![3.0, 0.0, 0.0];
        sol.node_rentals[1] = vec![3.0, 0.0, 0.0];
        sol.link_rentals[a] = vec![4.0, 0.0, 0.0];
        sol
    }

    #[test]
    fn routed_solution_passes_and_profit_is_recomputed() {
        let i = inst(line(&[10.0, 10.0], 10.0), vec![two_node_request(4.0, vec![0], vec![1])]);
        let sol = routed_solution(&i);
        assert!(check_solution(&i, &sol, cfg(Routing::SinglePath), 1e-9).is_empty());
        assert_eq!(solution_profit(&i, &sol), 500.0 - 6.0 - 4.0);
    }

    #[test]
    fn mapping_outside_locality_is_one_mapping_violation() {
        let i = inst(line(&[10.0, 10.0], 10.0), vec![two_node_request(4.0, vec![0, 1], vec![1])]);
        let mut sol = routed_solution(&i);
        // target moved to node 0 which is not allowed; make it co-located so
        // only the mapping family fires.
        sol.mapping[0] = vec![Some(0), Some(0)];
        sol.flows[0].arc_flow = vec![0.0; 2];
        sol.node_rentals[0] = vec![6.0, 0.0, 0.0];
        let rep = check_solution(&i, &sol, cfg(Routing::SinglePath), 1e-9);
        assert_eq!(rep.violations.len(), 1, "{rep:?}");
        assert_eq!(rep.violations[0].family, ConstraintFamily::Mapping);
    }

    #[test]
    fn each_family_is_detected() {
        let i = inst(line(&[10.0, 10.0], 10.0), vec![two_node_request(4.0, vec![0], vec![1])]);
        let base = routed_solution(&i);
        let a = i.substrate.arc_index(0, 1).unwrap();
        let family = |sol: &EmbeddingSolution, routing| {
            let rep = check_solution(&i, sol, cfg(routing), 1e-9);
            rep.violations.iter().map(|v| v.family).collect::<Vec<_>>()
        };

        let mut s = base.clone();
        s.node_rentals[0] = vec![2.0, 0.0, 0.0];
        assert_eq!(family(&s, Routing::SinglePath), vec![ConstraintFamily::NodeCapacity]);

        let mut s = base.clone();
        s.link_rentals[a] = vec![3.0, 0.0, 0.0];
        assert_eq!(family(&s, Routing::SinglePath), vec![ConstraintFamily::LinkCapacity]);

        let mut s = base.clone();
        s.node_rentals[0] = vec![1.0, 0.0, 1.0];
        assert_eq!(family(&s, Routing::SinglePath), vec![ConstraintFamily::NodeBulk]);

        let mut s = base.clone();
        s.link_rentals[a] = vec![0.0, 0.0, 1.0];
        assert_eq!(family(&s, Routing::SinglePath), vec![ConstraintFamily::LinkBulk]);

        let mut s = base.clone();
        s.flows[0].arc_flow[a] = 0.0;
        assert_eq!(
            family(&s, Routing::SinglePath),
            vec![ConstraintFamily::FlowBalance, ConstraintFamily::FlowBalance]
        );

        let mut s = base.clone();
        s.flows[0].arc_flow[a] = 0.5;
        let fams = family(&s, Routing::SinglePath);
        assert!(fams.contains(&ConstraintFamily::Domain));
        assert!(!family(&s, Routing::Splittable).contains(&ConstraintFamily::Domain));

        let mut s = base.clone();
        s.accepted[0] = false;
        let fams = family(&s, Routing::SinglePath);
        assert!(fams.contains(&ConstraintFamily::Mapping));

        let mut s = base.clone();
        s.flows.clear();
        assert_eq!(family(&s, Routing::SinglePath), vec![ConstraintFamily::Structure]);
    }

    #[test]
    fn co_location_needs_no_flow() {
        let i = inst(line(&[10.0, 10.0], 10.0), vec![two_node_request(4.0, vec![0, 1], vec![0, 1])]);
        let mut sol = EmbeddingSolution::empty(&i);
        sol.accepted[0] = true;
        sol.mapping[0] = vec![Some(1), Some(1)];
        sol.node_rentals[1] = vec![6.0, 0.0, 0.0];
        assert!(check_solution(&i, &sol, cfg(Routing::SinglePath), 1e-9).is_empty());
    }

    #[test]
    fn oracle_zero_requests() {
        let i = inst(line(&[10.0, 10.0], 10.0), vec![]);
        assert_eq!(brute_force_optimum(&i, cfg(Routing::SinglePath)).unwrap(), 0.0);
    }

    #[test]
    fn oracle_single_virtual_node() {
        let nodes = vec![SubstrateNode { id: 0, capacity: 50.0 }];
        let req = VnRequest {
            id: 0,
            nodes: vec![VirtualNode { id: 0, requirement: 10.0, locality: vec![0] }],
            traffic: TrafficMatrix::zeros(1),
            profit: 500.0,
        };
        let i = inst(SubstrateNetwork::new(nodes, vec![]), vec![req]);
        for r in [Routing::SinglePath, Routing::Splittable] {
            assert_eq!(brute_force_optimum(&i, cfg(r)).unwrap(), 495.0);
        }
    }

    #[test]
    fn oracle_two_nodes_on_adjacent_hosts() {
        // Node capacity 5 per host rules out co-location of 3 + 3; demand
        // 10 over the single arc costs one 10-bulk.
        let i = inst(line(&[5.0, 5.0], 50.0), vec![two_node_request(10.0, vec![0, 1], vec![0, 1])]);
        // node coverings: 3 units each -> 3 + 3, link 10 -> 5
        let expected = 500.0 - 3.0 - 3.0 - 5.0;
        for r in [Routing::SinglePath, Routing::Splittable] {
            assert_eq!(brute_force_optimum(&i, cfg(r)).unwrap(), expected);
        }
        // With room to co-locate, no link cost: 6 units on one node.
        let i = inst(line(&[10.0, 10.0], 50.0), vec![two_node_request(10.0, vec![0, 1], vec![0, 1])]);
        for r in [Routing::SinglePath, Routing::Splittable] {
            assert_eq!(brute_force_optimum(&i, cfg(r)).unwrap(), 500.0 - 5.0);
        }
    }

    #[test]
    fn oracle_unfit_request_is_rejected() {
        let i = inst(line(&[2.0, 2.0], 50.0), vec![two_node_request(10.0, vec![0], vec![1])]);
        assert_eq!(brute_force_optimum(&i, cfg(Routing::SinglePath)).unwrap(), 0.0);
    }

    #[test]
    fn splitting_beats_single_path_on_a_square() {
        // 0 -> 3 has two disjoint 2-hop paths with capacity 5 each; a demand
        // of 8 only fits when split.
        let nodes = (0..4).map(|id| SubstrateNode { id, capacity: 50.0 }).collect();
        let mut arcs = Vec::new();
        for (u, v) in [(0, 1), (1, 3), (0, 2), (2, 3)] {
            arcs.push(Arc { tail: u, head: v, capacity: 5.0 });
            arcs.push(Arc { tail: v, head: u, capacity: 5.0 });
        }
        let i = inst(
            SubstrateNetwork::new(nodes, arcs),
            vec![two_node_request(8.0, vec![0], vec![3])],
        );
        let sp = brute_force_optimum(&i, cfg(Routing::SinglePath)).unwrap();
        let spl = brute_force_optimum(&i, cfg(Routing::Splittable)).unwrap();
        assert_eq!(sp, 0.0);
        // 4 units on each of 4 arcs at 4 unit bulks each, nodes 3 + 3.
        assert_eq!(spl, 500.0 - 6.0 - 16.0);
    }

    #[test]
    fn oracle_refuses_large_enumerations() {
        let n = 20;
        let nodes = (0..n).map(|id| SubstrateNode { id, capacity: 50.0 }).collect();
        let all: Vec<usize> = (0..n).collect();
        let req = VnRequest {
            id: 0,
            nodes: (0..6)
                .map(|id| VirtualNode { id, requirement: 1.0, locality: all.clone() })
                .collect(),
            traffic: TrafficMatrix::zeros(6),
            profit: 1.0,
        };
        let i = inst(SubstrateNetwork::new(nodes, vec![]), vec![req]);
        assert!(matches!(
            brute_force_optimum(&i, cfg(Routing::SinglePath)),
            Err(Error::OracleLimit { .. })
        ));
    }
}
