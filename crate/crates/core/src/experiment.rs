//! Experiment plans: generate instances cell by cell, solve every
//! configuration, price the baseline, check every incumbent and emit one
//! record per (instance, configuration).

use std::collections::HashMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::baseline::{baseline_from_solve, run_baseline, BaselineResult};
use crate::error::{Error, Result};
use crate::generator::{gen_instance, GeneratorConfig, TopologySpec};
use crate::heuristic::RoundingHeuristic;
use crate::instance::Instance;
use crate::io::{ExperimentRecord, SubstrateKind};
use crate::model::{build_model, decode, encode, ModelConfig, RabMode, Routing};
use crate::solver::{solve_milp_hooked, Hooks, MilpResult, SolveParams};
use crate::verify::{check_solution, solution_profit, EmbeddingSolution};

/// Tolerance used when checking emitted incumbents.
pub const CHECK_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cell {
    pub topology: TopologySpec,
    pub seed: u64,
    /// Number of requests (`Req`).
    pub requests: usize,
    /// Requirement scaling (`Scal`).
    pub scaling: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentPlan {
    pub cells: Vec<Cell>,
    /// Replication `k` of a cell uses seed `seed + k`.
    pub replications: usize,
    pub configurations: Vec<ModelConfig>,
    /// Price the relaxed-rental solution with bulk coverings as well.
    pub baseline: bool,
    pub baseline_routing: Routing,
    /// Seed each solve with the solutions of configurations it relaxes and
    /// with the same configuration on the instance with fewer requests.
    pub mip_starts: bool,
    pub solve: SolveParams,
    /// Base generator settings; seed, request count and scaling come from
    /// the cell.
    pub generator: GeneratorConfig,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        ExperimentPlan {
            cells: Vec::new(),
            replications: 1,
            configurations: all_configurations(),
            baseline: true,
            baseline_routing: Routing::SinglePath,
            mip_starts: true,
            solve: SolveParams::default(),
            generator: GeneratorConfig::default(),
        }
    }
}

/// Single-path and splittable routing, each with integral and relaxed
/// rentals.
pub fn all_configurations() -> Vec<ModelConfig> {
    let mut out = Vec::new();
    for routing in [Routing::SinglePath, Routing::Splittable] {
        for rab in [RabMode::Integral, RabMode::Relaxed] {
            out.push(ModelConfig { routing, rab });
        }
    }
    out
}

impl ExperimentPlan {
    /// Every combination of request count and scaling on one topology.
    pub fn grid(topology: &TopologySpec, seed: u64, requests: &[usize], scalings: &[f64]) -> Self {
        let mut cells = Vec::new();
        for &scaling in scalings {
            for &r in requests {
                cells.push(Cell { topology: topology.clone(), seed, requests: r, scaling });
            }
        }
        ExperimentPlan { cells, ..ExperimentPlan::default() }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| Error::Parse {
            path: "plan".into(),
            message: e.to_string(),
        })?;
        let plan: ExperimentPlan = serde_path_to_error::deserialize(de).map_err(|e| Error::Parse {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        plan.check()?;
        Ok(plan)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("plans always serialize")
    }

    pub fn check(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("experiment plan: {m}")));
        if self.replications == 0 {
            return bad("replications must be at least 1");
        }
        if self.configurations.is_empty() {
            return bad("at least one configuration is required");
        }
        for (k, c) in self.configurations.iter().enumerate() {
            if self.configurations[..k].contains(c) {
                return bad(&format!("configuration {}/{} listed twice", c.routing, c.rab));
            }
        }
        for c in &self.cells {
            if !(c.scaling > 0.0 && c.scaling.is_finite()) {
                return bad(&format!("scaling {} must be positive", c.scaling));
            }
        }
        self.solve.check()?;
        self.generator.check()
    }
}

/// Name of a generated instance, unique within a plan.
pub fn instance_id(topology: &TopologySpec, nodes: usize, seed: u64, requests: usize, scaling: f64) -> String {
    let kind = match SubstrateKind::of(topology) {
        SubstrateKind::DataCenter => "dc",
        SubstrateKind::LongHaul => "lh",
    };
    format!("{kind}{nodes}-s{seed}-r{requests}-x{scaling}")
}

struct Job<'a> {
    topology: &'a TopologySpec,
    topo_key: String,
    seed: u64,
    requests: usize,
    scaling: f64,
}

/// Carries `sol` from `small` over to `big` when `big` only adds requests.
pub fn extend_solution(small: &Instance, sol: &EmbeddingSolution, big: &Instance) -> Option<EmbeddingSolution> {
    let n = small.requests.len();
    if big.substrate != small.substrate
        || big.catalog != small.catalog
        || big.requests.len() < n
        || big.requests[..n] != small.requests[..]
    {
        return None;
    }
    let mut out = EmbeddingSolution::empty(big);
    out.accepted[..n].copy_from_slice(&sol.accepted);
    out.mapping[..n].clone_from_slice(&sol.mapping);
    out.flows[..sol.flows.len()].clone_from_slice(&sol.flows);
    out.node_rentals.clone_from(&sol.node_rentals);
    out.link_rentals.clone_from(&sol.link_rentals);
    out.node_usage.clone_from(&sol.node_usage);
    out.link_usage.clone_from(&sol.link_usage);
    Some(out)
}

/// `a` is a restriction of `b`: same or stricter routing and rentals.
fn restricts(a: ModelConfig, b: ModelConfig) -> bool {
    let r = |c: ModelConfig| c.routing == Routing::Splittable;
    let q = |c: ModelConfig| c.rab == RabMode::Relaxed;
    a != b && (!r(a) || r(b)) && (!q(a) || q(b))
}

/// Outcome of one configuration on one instance.
pub struct ConfigRun {
    pub config: ModelConfig,
    pub result: MilpResult,
    pub solution: EmbeddingSolution,
    pub elapsed: f64,
}

/// Solves one configuration and checks the incumbent.
pub fn solve_config(
    inst: &Instance,
    id: &str,
    config: ModelConfig,
    params: &SolveParams,
    starts: &[&EmbeddingSolution],
) -> Result<(ConfigRun, crate::model::VarMap)> {
    let (model, vm) = build_model(inst, config)?;
    let heuristic = RoundingHeuristic::new(inst, &vm);
    let hooks = Hooks {
        heuristic: Some(&heuristic),
        starts: starts.iter().map(|s| encode(&vm, s)).collect(),
        trace: None,
    };
    let t = Instant::now();
    let result = solve_milp_hooked(&model, params, hooks)?;
    let elapsed = t.elapsed().as_secs_f64();
    let fail = |m: String| Error::Verification(format!("{id} {}/{}: {m}", config.routing, config.rab));
    let point = result.incumbent.as_ref().ok_or_else(|| fail("no incumbent".into()))?;
    let solution = decode(inst, &vm, point)?;
    let report = check_solution(inst, &solution, config, CHECK_TOL);
    if !report.is_empty() {
        return Err(fail(format!("incumbent fails the checker: {report}")));
    }
    let recomputed = solution_profit(inst, &solution);
    if (recomputed - result.objective).abs() > CHECK_TOL * (1.0 + recomputed.abs()) {
        return Err(fail(format!(
            "reported objective {} but the embedding is worth {recomputed}",
            result.objective
        )));
    }
    Ok((ConfigRun { config, result, solution, elapsed }, vm))
}

/// Checks the priced baseline embedding when all of its coverings fit.
fn check_baseline(inst: &Instance, id: &str, b: &BaselineResult) -> Result<()> {
    if !b.all_feasible() {
        return Ok(());
    }
    if let Some(emb) = b.priced_embedding() {
        let cfg = ModelConfig { routing: b_routing(&emb), rab: RabMode::Integral };
        let report = check_solution(inst, &emb, cfg, CHECK_TOL);
        if !report.is_empty() {
            return Err(Error::Verification(format!("{id} baseline: {report}")));
        }
    }
    Ok(())
}

/// The loosest routing under which `emb` is valid.
fn b_routing(emb: &EmbeddingSolution) -> Routing {
    let single = emb
        .flows
        .iter()
        .all(|f| f.arc_flow.iter().all(|&x| x.abs() <= CHECK_TOL || (x - 1.0).abs() <= CHECK_TOL));
    if single {
        Routing::SinglePath
    } else {
        Routing::Splittable
    }
}

/// Runs every cell and replication of `plan`. Records come out sorted by
/// topology, scaling, seed and request count, with configurations in plan
/// order.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<Vec<ExperimentRecord>> {
    plan.check()?;
    let mut jobs: Vec<Job> = Vec::new();
    for cell in &plan.cells {
        let topo_key = serde_json::to_string(&cell.topology).expect("topologies serialize");
        for k in 0..plan.replications {
            jobs.push(Job {
                topology: &cell.topology,
                topo_key: topo_key.clone(),
                seed: cell.seed + k as u64,
                requests: cell.requests,
                scaling: cell.scaling,
            });
        }
    }
    jobs.sort_by(|a, b| {
        a.topo_key
            .cmp(&b.topo_key)
            .then(a.scaling.total_cmp(&b.scaling))
            .then(a.seed.cmp(&b.seed))
            .then(a.requests.cmp(&b.requests))
    });
    jobs.dedup_by(|a, b| {
        a.topo_key == b.topo_key && a.scaling == b.scaling && a.seed == b.seed && a.requests == b.requests
    });

    let mut order = plan.configurations.clone();
    order.sort_by_key(|c| (c.routing == Routing::Splittable, c.rab == RabMode::Relaxed));

    // Last solved instance per (topology, scaling, seed) with its solutions.
    let mut previous: HashMap<(String, u64, u64), (Instance, Vec<(ModelConfig, EmbeddingSolution)>)> =
        HashMap::new();
    let mut records = Vec::new();
    for job in &jobs {
        let gcfg = GeneratorConfig {
            seed: job.seed,
            num_requests: job.requests,
            scaling: job.scaling,
            ..plan.generator.clone()
        };
        let inst = gen_instance(job.topology, &gcfg)?;
        let id = instance_id(job.topology, inst.substrate.num_nodes(), job.seed, job.requests, job.scaling);
        let key = (job.topo_key.clone(), job.scaling.to_bits(), job.seed);

        let mut runs: Vec<ConfigRun> = Vec::new();
        let mut baseline: Option<BaselineResult> = None;
        for &config in &order {
            let mut starts: Vec<EmbeddingSolution> = Vec::new();
            if plan.mip_starts {
                if let Some((small, sols)) = previous.get(&key) {
                    for (c, s) in sols {
                        if *c == config || restricts(*c, config) {
                            starts.extend(extend_solution(small, s, &inst));
                        }
                    }
                }
                for run in &runs {
                    if restricts(run.config, config) {
                        starts.push(run.solution.clone());
                    }
                }
            }
            let refs: Vec<&EmbeddingSolution> = starts.iter().collect();
            let (run, vm) = solve_config(&inst, &id, config, &plan.solve, &refs)?;
            if plan.baseline && config == (ModelConfig { routing: plan.baseline_routing, rab: RabMode::Relaxed }) {
                baseline = Some(baseline_from_solve(&inst, &vm, run.result.clone())?);
            }
            runs.push(run);
        }
        if plan.baseline && baseline.is_none() {
            baseline = Some(run_baseline(&inst, plan.baseline_routing, &plan.solve)?);
        }
        if let Some(b) = &baseline {
            check_baseline(&inst, &id, b)?;
        }

        for &config in &plan.configurations {
            let run = runs.iter().find(|r| r.config == config).expect("every configuration ran");
            let profit = run.result.objective;
            let base = baseline.as_ref().map(|b| b.profit);
            records.push(ExperimentRecord {
                instance: id.clone(),
                substrate: SubstrateKind::of(job.topology),
                requests: job.requests,
                scaling: job.scaling,
                routing: config.routing,
                rab: config.rab,
                profit,
                status: run.result.status,
                elapsed: run.elapsed,
                gap: run.result.gap,
                baseline_profit: base,
                baseline_feasible: baseline.as_ref().map(|b| b.all_feasible()),
                impr: base.and_then(|b| ExperimentRecord::improvement(profit, b)),
            });
        }
        previous.insert(key, (inst, runs.into_iter().map(|r| (r.config, r.solution)).collect()));
    }
    Ok(records)
}
