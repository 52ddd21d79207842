//! Rounding heuristic for the embedding model.
//!
//! Requests are considered in decreasing order of their LP acceptance value.
//! Each virtual node goes to the allowed host with the largest LP mapping
//! value that still has room, every commodity is routed along a cheapest
//! path with enough residual capacity, and rentals are the cheapest covering
//! of the resulting usage. A request that does not fit or does not pay for
//! its marginal rental cost is rejected.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::baseline::{linear_capacity_cost, min_bulk_covering};
use crate::instance::{Bulk, Instance};
use crate::model::{encode, MilpModel, RabMode, VarMap};
use crate::solver::PrimalHeuristic;
use crate::verify::EmbeddingSolution;

pub struct RoundingHeuristic<'a> {
    inst: &'a Instance,
    vm: &'a VarMap,
}

impl<'a> RoundingHeuristic<'a> {
    pub fn new(inst: &'a Instance, vm: &'a VarMap) -> Self {
        RoundingHeuristic { inst, vm }
    }

    fn price(&self, usage: f64, bulks: &[Bulk], capacity: f64) -> Option<f64> {
        match self.vm.config().rab {
            RabMode::Integral => {
                let c = min_bulk_covering(usage, bulks, capacity);
                c.feasible.then_some(c.cost)
            }
            RabMode::Relaxed => (usage <= capacity + 1e-9).then(|| linear_capacity_cost(usage, bulks)),
        }
    }

    /// Rental counts for a usage level, matching [`Self::price`].
    fn rentals(&self, usage: f64, bulks: &[Bulk], capacity: f64) -> Vec<f64> {
        match self.vm.config().rab {
            RabMode::Integral => min_bulk_covering(usage, bulks, capacity)
                .counts
                .iter()
                .map(|&c| c as f64)
                .collect(),
            RabMode::Relaxed => {
                let mut out = vec![0.0; bulks.len()];
                if let Some((k, b)) = bulks
                    .iter()
                    .enumerate()
                    .min_by(|a, b| a.1.unit_cost().total_cmp(&b.1.unit_cost()))
                {
                    out[k] = usage / b.size;
                }
                out
            }
        }
    }

    fn link_step(&self, a: usize, usage: f64, extra: f64) -> Option<f64> {
        let arc = &self.inst.substrate.arcs()[a];
        let bulks = &self.inst.catalog.link_bulks;
        let after = self.price(usage + extra, bulks, arc.capacity)?;
        let before = self.price(usage, bulks, arc.capacity)?;
        Some(after - before)
    }

    /// Cheapest path from `s` to `t` for `demand` given current link usage.
    fn route(&self, s: usize, t: usize, demand: f64, link_use: &[f64]) -> Option<Vec<usize>> {
        #[derive(PartialEq)]
        struct Entry(f64, usize);
        impl Eq for Entry {}
        impl PartialOrd for Entry {
            fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
                Some(self.cmp(o))
            }
        }
        impl Ord for Entry {
            fn cmp(&self, o: &Self) -> Ordering {
                o.0.total_cmp(&self.0).then_with(|| o.1.cmp(&self.1))
            }
        }
        let sub = &self.inst.substrate;
        let mut dist = vec![f64::INFINITY; sub.num_nodes()];
        let mut pred: Vec<Option<usize>> = vec![None; sub.num_nodes()];
        let mut heap = BinaryHeap::new();
        dist[s] = 0.0;
        heap.push(Entry(0.0, s));
        while let Some(Entry(d, u)) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            if u == t {
                break;
            }
            for &a in sub.out_arcs(u) {
                let Some(step) = self.link_step(a, link_use[a], demand) else {
                    continue;
                };
                let v = sub.arcs()[a].head;
                // A small per-hop charge keeps paths short when rentals are free.
                let nd = d + step + 1e-3;
                if nd < dist[v] {
                    dist[v] = nd;
                    pred[v] = Some(a);
                    heap.push(Entry(nd, v));
                }
            }
        }
        if !dist[t].is_finite() {
            return None;
        }
        let mut path = Vec::new();
        let mut v = t;
        while v != s {
            let a = pred[v]?;
            path.push(a);
            v = sub.arcs()[a].tail;
        }
        path.reverse();
        Some(path)
    }

    fn total_cost(&self, node_use: &[f64], link_use: &[f64]) -> Option<f64> {
        let sub = &self.inst.substrate;
        let cat = &self.inst.catalog;
        let mut total = 0.0;
        for (n, &u) in sub.nodes().iter().zip(node_use) {
            total += self.price(u, &cat.node_bulks, n.capacity)?;
        }
        for (a, &u) in sub.arcs().iter().zip(link_use) {
            total += self.price(u, &cat.link_bulks, a.capacity)?;
        }
        Some(total)
    }

    /// Builds an embedding guided by `lp` (a column-value vector).
    pub fn embed(&self, lp: &[f64]) -> EmbeddingSolution {
        let inst = self.inst;
        let vm = self.vm;
        let sub = &inst.substrate;
        let mut sol = EmbeddingSolution::empty(inst);
        let mut node_use = vec![0.0; sub.num_nodes()];
        let mut link_use = vec![0.0; sub.num_arcs()];
        let mut cost = 0.0;

        let mut order: Vec<usize> = (0..inst.requests.len()).collect();
        order.sort_by(|&a, &b| lp[vm.y(b)].total_cmp(&lp[vm.y(a)]).then(a.cmp(&b)));
        let mut flow_base = Vec::with_capacity(inst.requests.len());
        let mut k = 0;
        for r in 0..inst.requests.len() {
            flow_base.push(k);
            k += vm.commodities(r).len();
        }

        for r in order {
            let req = &inst.requests[r];
            let mut trial_nodes = node_use.clone();
            let mut map = Vec::with_capacity(req.num_nodes());
            let mut fits = true;
            for (v, node) in req.nodes.iter().enumerate() {
                let mut hosts: Vec<(usize, usize)> = vm.x(r, v).to_vec();
                hosts.sort_by(|a, b| lp[b.1].total_cmp(&lp[a.1]).then(a.0.cmp(&b.0)));
                let host = hosts.iter().map(|&(i, _)| i).find(|&i| {
                    trial_nodes[i] + node.requirement <= sub.nodes()[i].capacity + 1e-9
                });
                match host {
                    Some(i) => {
                        trial_nodes[i] += node.requirement;
                        map.push(i);
                    }
                    None => {
                        fits = false;
                        break;
                    }
                }
            }
            if !fits {
                continue;
            }
            let mut trial_links = link_use.clone();
            let mut paths = Vec::new();
            for (c, com) in vm.commodities(r).iter().enumerate() {
                let (s, t) = (map[com.source], map[com.target]);
                if s == t {
                    paths.push((c, Vec::new()));
                    continue;
                }
                match self.route(s, t, com.demand, &trial_links) {
                    Some(p) => {
                        for &a in &p {
                            trial_links[a] += com.demand;
                        }
                        paths.push((c, p));
                    }
                    None => {
                        fits = false;
                        break;
                    }
                }
            }
            if !fits {
                continue;
            }
            let Some(new_cost) = self.total_cost(&trial_nodes, &trial_links) else {
                continue;
            };
            if req.profit - (new_cost - cost) <= 1e-9 {
                continue;
            }
            cost = new_cost;
            node_use = trial_nodes;
            link_use = trial_links;
            sol.accepted[r] = true;
            sol.mapping[r] = map.into_iter().map(Some).collect();
            for (c, p) in paths {
                for a in p {
                    sol.flows[flow_base[r] + c].arc_flow[a] = 1.0;
                }
            }
        }

        let cat = &inst.catalog;
        for (i, n) in sub.nodes().iter().enumerate() {
            sol.node_rentals[i] = self.rentals(node_use[i], &cat.node_bulks, n.capacity);
        }
        for (a, arc) in sub.arcs().iter().enumerate() {
            sol.link_rentals[a] = self.rentals(link_use[a], &cat.link_bulks, arc.capacity);
        }
        sol.node_usage = node_use;
        sol.link_usage = link_use;
        sol
    }
}

impl PrimalHeuristic for RoundingHeuristic<'_> {
    fn propose(&self, _model: &MilpModel, lp_point: &[f64]) -> Option<Vec<f64>> {
        if lp_point.len() != self.vm.num_cols() {
            return None;
        }
        let sol = self.embed(lp_point);
        (sol.num_accepted() > 0).then(|| encode(self.vm, &sol))
    }
}
