//! The capacity-oblivious comparison method: solve with linearly priced
//! capacity, then rent bulks for the resulting usage after the fact.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::instance::{Bulk, Instance};
use crate::model::{build_model, decode, ModelConfig, RabMode, Routing};
use crate::solver::{solve_milp_with, MilpResult, SolveParams};
use crate::verify::EmbeddingSolution;

const USAGE_TOL: f64 = 1e-9;

/// Cheapest multiset of bulks covering a usage level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveringResult {
    /// Number of bulks of each catalog entry.
    pub counts: Vec<u64>,
    pub cost: f64,
    /// Total rented capacity.
    pub covered: f64,
    /// False when no multiset both covers the usage and fits in the
    /// physical capacity. `counts` then hold the unconstrained optimum.
    pub feasible: bool,
}

impl CoveringResult {
    fn from_counts(bulks: &[Bulk], counts: Vec<u64>, feasible: bool) -> Self {
        let cost = counts.iter().zip(bulks).map(|(&c, b)| c as f64 * b.cost).sum();
        let covered = counts.iter().zip(bulks).map(|(&c, b)| c as f64 * b.size).sum();
        CoveringResult {
            counts,
            cost,
            covered,
            feasible,
        }
    }
}

/// Minimum-cost bulk multiset with total size at least `usage` and at most
/// `capacity`.
///
/// Integer bulk sizes are handled by a knapsack DP over integer totals; other
/// catalogs fall back to enumerating every multiset up to the search limit.
/// Ties prefer the smaller total size.
pub fn min_bulk_covering(usage: f64, bulks: &[Bulk], capacity: f64) -> CoveringResult {
    assert!(!bulks.is_empty(), "bulk catalog must be nonempty");
    if usage <= USAGE_TOL {
        return CoveringResult::from_counts(bulks, vec![0; bulks.len()], true);
    }
    if bulks.iter().all(|b| b.size == b.size.round() && b.size >= 1.0) {
        covering_dp(usage, bulks, capacity)
    } else {
        covering_enumerate(usage, bulks, capacity)
    }
}

fn covering_dp(usage: f64, bulks: &[Bulk], capacity: f64) -> CoveringResult {
    let need = (usage - USAGE_TOL).ceil().max(0.0) as usize;
    let max_size = bulks.iter().map(|b| b.size as usize).max().unwrap();
    // No optimal covering exceeds need + max_size - 1: dropping any bulk
    // from a larger one still covers.
    let top = need + max_size - 1;
    let cap = if capacity.is_finite() {
        ((capacity + USAGE_TOL).floor().max(0.0) as usize).min(top)
    } else {
        top
    };
    // best[s] = (cost, last bulk) for total exactly s.
    let mut best: Vec<Option<(f64, usize)>> = vec![None; top + 1];
    best[0] = Some((0.0, usize::MAX));
    for s in 1..=top {
        for (k, b) in bulks.iter().enumerate() {
            let sz = b.size as usize;
            if sz > s {
                continue;
            }
            if let Some((c, _)) = best[s - sz] {
                let cand = c + b.cost;
                if best[s].is_none_or(|(bc, _)| cand < bc - 1e-12) {
                    best[s] = Some((cand, k));
                }
            }
        }
    }
    let pick = |lo: usize, hi: usize| -> Option<usize> {
        let mut choice: Option<(f64, usize)> = None;
        for (s, entry) in best.iter().enumerate().take(hi + 1).skip(lo) {
            if let Some((c, _)) = *entry {
                if choice.is_none_or(|(bc, _)| c < bc - 1e-12) {
                    choice = Some((c, s));
                }
            }
        }
        choice.map(|(_, s)| s)
    };
    let rebuild = |mut s: usize| {
        let mut counts = vec![0u64; bulks.len()];
        while s > 0 {
            let (_, k) = best[s].unwrap();
            counts[k] += 1;
            s -= bulks[k].size as usize;
        }
        counts
    };
    if need <= cap {
        if let Some(s) = pick(need, cap) {
            return CoveringResult::from_counts(bulks, rebuild(s), true);
        }
    }
    let s = pick(need, top).expect("some multiset always covers");
    CoveringResult::from_counts(bulks, rebuild(s), false)
}

fn covering_enumerate(usage: f64, bulks: &[Bulk], capacity: f64) -> CoveringResult {
    let max_size = bulks.iter().map(|b| b.size).fold(0.0, f64::max);
    let limit = usage + max_size;
    let mut counts = vec![0u64; bulks.len()];
    let mut best_in: Option<(f64, f64, Vec<u64>)> = None;
    let mut best_any: Option<(f64, f64, Vec<u64>)> = None;
    enumerate_rec(
        bulks, 0, 0.0, 0.0, limit, usage, capacity, &mut counts, &mut best_in, &mut best_any,
    );
    match best_in {
        Some((_, _, c)) => CoveringResult::from_counts(bulks, c, true),
        None => CoveringResult::from_counts(bulks, best_any.expect("covering exists").2, false),
    }
}

#[allow(clippy::too_many_arguments)]
fn enumerate_rec(
    bulks: &[Bulk],
    k: usize,
    size: f64,
    cost: f64,
    limit: f64,
    usage: f64,
    capacity: f64,
    counts: &mut Vec<u64>,
    best_in: &mut Option<(f64, f64, Vec<u64>)>,
    best_any: &mut Option<(f64, f64, Vec<u64>)>,
) {
    if k == bulks.len() {
        if size + USAGE_TOL >= usage {
            let better = |b: &Option<(f64, f64, Vec<u64>)>| {
                b.as_ref()
                    .is_none_or(|(bc, bs, _)| cost < bc - 1e-12 || (cost <= bc + 1e-12 && size < *bs))
            };
            if better(best_any) {
                *best_any = Some((cost, size, counts.clone()));
            }
            if size <= capacity + USAGE_TOL && better(best_in) {
                *best_in = Some((cost, size, counts.clone()));
            }
        }
        return;
    }
    let b = bulks[k];
    let mut c = 0u64;
    loop {
        let s = size + c as f64 * b.size;
        if s > limit + USAGE_TOL {
            break;
        }
        counts[k] = c;
        enumerate_rec(
            bulks, k + 1, s, cost + c as f64 * b.cost, limit, usage, capacity, counts, best_in,
            best_any,
        );
        c += 1;
    }
    counts[k] = 0;
}

/// Cost of `usage` when capacity is bought fractionally at the cheapest unit
/// price, which is what the model charges with relaxed bulk counts.
pub fn linear_capacity_cost(usage: f64, bulks: &[Bulk]) -> f64 {
    let unit = bulks.iter().map(|b| b.unit_cost()).fold(f64::INFINITY, f64::min);
    usage.max(0.0) * unit
}

/// Outcome of the a-posteriori method.
#[derive(Debug, Clone)]
pub struct BaselineResult {
    pub solve: MilpResult,
    pub embedding: Option<EmbeddingSolution>,
    /// Accepted profit minus the bulk cost of every covering.
    pub profit: f64,
    pub node_coverings: Vec<CoveringResult>,
    pub link_coverings: Vec<CoveringResult>,
}

impl BaselineResult {
    /// True when every resource could be covered within its physical
    /// capacity.
    pub fn all_feasible(&self) -> bool {
        self.node_coverings
            .iter()
            .chain(&self.link_coverings)
            .all(|c| c.feasible)
    }

    /// The embedding with its rentals replaced by the coverings, i.e. the
    /// solution the baseline actually proposes.
    pub fn priced_embedding(&self) -> Option<EmbeddingSolution> {
        self.embedding.as_ref().map(|e| {
            let mut e = e.clone();
            e.node_rentals = self
                .node_coverings
                .iter()
                .map(|c| c.counts.iter().map(|&x| x as f64).collect())
                .collect();
            e.link_rentals = self
                .link_coverings
                .iter()
                .map(|c| c.counts.iter().map(|&x| x as f64).collect())
                .collect();
            e
        })
    }
}

/// Prices a solved embedding: each used node and arc gets the cheapest
/// covering of its usage under its physical capacity.
pub fn price_embedding(inst: &Instance, emb: Option<&EmbeddingSolution>) -> (f64, Vec<CoveringResult>, Vec<CoveringResult>) {
    let sub = &inst.substrate;
    let cat = &inst.catalog;
    let zero_node = vec![0.0; sub.num_nodes()];
    let zero_link = vec![0.0; sub.num_arcs()];
    let (node_usage, link_usage) = match emb {
        Some(e) => (&e.node_usage, &e.link_usage),
        None => (&zero_node, &zero_link),
    };
    let node_cov: Vec<CoveringResult> = sub
        .nodes()
        .iter()
        .zip(node_usage)
        .map(|(n, &u)| min_bulk_covering(u, &cat.node_bulks, n.capacity))
        .collect();
    let link_cov: Vec<CoveringResult> = sub
        .arcs()
        .iter()
        .zip(link_usage)
        .map(|(a, &u)| min_bulk_covering(u, &cat.link_bulks, a.capacity))
        .collect();
    let revenue: f64 = match emb {
        Some(e) => inst
            .requests
            .iter()
            .zip(&e.accepted)
            .filter(|(_, &acc)| acc)
            .map(|(r, _)| r.profit)
            .sum(),
        None => 0.0,
    };
    let cost: f64 = node_cov.iter().chain(&link_cov).map(|c| c.cost).sum();
    (revenue - cost, node_cov, link_cov)
}

/// Solves with relaxed bulk counts, then prices the embedding with integer
/// bulk coverings.
pub fn run_baseline(inst: &Instance, routing: Routing, params: &SolveParams) -> Result<BaselineResult> {
    let cfg = ModelConfig {
        routing,
        rab: RabMode::Relaxed,
    };
    let (model, vm) = build_model(inst, cfg)?;
    let solve = solve_milp_with(&model, params, Some(&crate::heuristic::RoundingHeuristic::new(inst, &vm)))?;
    baseline_from_solve(inst, &vm, solve)
}

/// Prices an already solved relaxed-rental run.
pub fn baseline_from_solve(
    inst: &Instance,
    vm: &crate::model::VarMap,
    solve: MilpResult,
) -> Result<BaselineResult> {
    let embedding = match &solve.incumbent {
        Some(p) => Some(decode(inst, vm, p)?),
        None => None,
    };
    let (profit, node_coverings, link_coverings) = price_embedding(inst, embedding.as_ref());
    Ok(BaselineResult {
        solve,
        embedding,
        profit,
        node_coverings,
        link_coverings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn standard() -> Vec<Bulk> {
        vec![Bulk::new(1.0, 1.0), Bulk::new(10.0, 5.0), Bulk::new(100.0, 25.0)]
    }

    /// Exhaustive search over all count vectors with total size below a
    /// limit, kept separate from the DP on purpose.
    fn brute(usage: f64, bulks: &[Bulk], capacity: f64) -> (f64, bool) {
        let limit = usage.ceil() as usize + 100;
        let mut best_in = f64::INFINITY;
        let mut best_any = f64::INFINITY;
        for a in 0..=limit / 100 {
            for b in 0..=limit / 10 {
                for c in 0..=limit {
                    let size = (100 * a + 10 * b + c) as f64;
                    if size > limit as f64 {
                        break;
                    }
                    if size + 1e-9 < usage {
                        continue;
                    }
                    let cost = a as f64 * bulks[2].cost + b as f64 * bulks[1].cost + c as f64 * bulks[0].cost;
                    best_any = best_any.min(cost);
                    if size <= capacity {
                        best_in = best_in.min(cost);
                    }
                }
            }
        }
        if best_in.is_finite() {
            (best_in, true)
        } else {
            (best_any, false)
        }
    }

    #[test]
    fn zero_usage_rents_nothing() {
        let r = min_bulk_covering(0.0, &standard(), 500.0);
        assert_eq!(r.counts, vec![0, 0, 0]);
        assert_eq!(r.cost, 0.0);
        assert!(r.feasible);
        assert!(min_bulk_covering(0.0, &standard(), 0.0).feasible);
    }

    #[test]
    fn usage_ten_is_one_ten_bulk() {
        let r = min_bulk_covering(10.0, &standard(), 500.0);
        assert_eq!(r.counts, vec![0, 1, 0]);
        assert_eq!(r.cost, 5.0);
    }

    #[test]
    fn usage_eleven_is_ten_plus_one() {
        let r = min_bulk_covering(11.0, &standard(), 500.0);
        assert_eq!(r.counts, vec![1, 1, 0]);
        assert_eq!(r.cost, 6.0);
        assert_eq!(r.covered, 11.0);
    }

    #[test]
    fn capacity_excludes_the_hundred_bulk() {
        let r = min_bulk_covering(95.0, &standard(), 95.0);
        assert_eq!(r.counts, vec![5, 9, 0]);
        assert_eq!(r.cost, 50.0);
        assert!(r.feasible);
        let free = min_bulk_covering(95.0, &standard(), 500.0);
        assert_eq!(free.counts, vec![0, 0, 1]);
        assert_eq!(free.cost, 25.0);
    }

    #[test]
    fn usage_above_capacity_is_flagged() {
        let r = min_bulk_covering(12.0, &standard(), 10.0);
        assert!(!r.feasible);
        assert_eq!(r.cost, 7.0);
        assert!(r.covered >= 12.0);
    }

    #[test]
    fn fractional_capacity_can_make_coverage_impossible() {
        // 4.5 units need 5 unit bulks, but only 4.7 may be rented.
        let r = min_bulk_covering(4.5, &standard(), 4.7);
        assert!(!r.feasible);
        assert_eq!(r.cost, 5.0);
    }

    #[test]
    fn dp_matches_brute_force_on_a_grid() {
        let bulks = standard();
        for k in 0..=240 {
            let usage = k as f64 * 0.5;
            for cap in [95.0, 500.0, 37.0] {
                let r = min_bulk_covering(usage, &bulks, cap);
                let (cost, feasible) = brute(usage, &bulks, cap);
                assert_eq!((r.cost, r.feasible), (cost, feasible), "usage {usage} cap {cap}");
                assert!(r.covered + 1e-9 >= usage);
                if r.feasible {
                    assert!(r.covered <= cap);
                }
            }
        }
    }

    #[test]
    fn real_sizes_use_enumeration() {
        let bulks = vec![Bulk::new(0.5, 1.0), Bulk::new(2.5, 3.0)];
        let r = min_bulk_covering(3.0, &bulks, 10.0);
        // 2.5 + 0.5 costs 4; six halves cost 6; two 2.5 cost 6.
        assert_eq!(r.counts, vec![1, 1]);
        assert_eq!(r.cost, 4.0);
        let r = min_bulk_covering(3.0, &bulks, 2.9);
        assert!(!r.feasible);
        assert_eq!(r.cost, 4.0);
    }

    #[test]
    fn linear_cost_uses_cheapest_unit() {
        assert_eq!(linear_capacity_cost(40.0, &standard()), 10.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn cost_is_monotone_in_usage(a in 0.0f64..400.0, b in 0.0f64..400.0, cap in 0.0f64..600.0) {
                let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
                let bulks = standard();
                let rl = min_bulk_covering(lo, &bulks, cap);
                let rh = min_bulk_covering(hi, &bulks, cap);
                // Monotone within each branch; an infeasible high usage
                // prices the unconstrained optimum, which never exceeds the
                // constrained one.
                if rl.feasible == rh.feasible {
                    prop_assert!(rl.cost <= rh.cost + 1e-9);
                }
            }

            #[test]
            fn integer_usage_within_capacity_is_feasible(u in 0u32..500, extra in 0u32..100) {
                let r = min_bulk_covering(u as f64, &standard(), (u + extra) as f64);
                prop_assert!(r.feasible);
                prop_assert!(r.covered >= u as f64);
            }
        }
    }
}
