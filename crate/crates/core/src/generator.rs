//! Seeded random instances: transit-stub style substrates, imported edge
//! lists, and request sets.
//!
//! All randomness comes from ChaCha8 streams derived from one `u64` seed.
//! Stream 0 drives the substrate and stream `k + 1` drives request `k`, so
//! an instance with `Req = 6` contains the `Req = 4` instance of the same
//! seed as a prefix, and changing the scaling factor rescales the same draws.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{
    Arc, BulkCatalog, Instance, SubstrateNetwork, SubstrateNode, TrafficMatrix, VirtualNode,
    VnRequest,
};

pub type GenRng = ChaCha8Rng;

/// RNG for one independent stream of a seed.
pub fn stream_rng(seed: u64, stream: u64) -> GenRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub seed: u64,
    /// Values for node/arc capacities and (scaled) request requirements.
    pub capacity_values: Vec<f64>,
    pub capacity_probs: Vec<f64>,
    pub catalog: BulkCatalog,
    /// Number of requests (`Req`).
    pub num_requests: usize,
    /// Factor applied to requirement and demand draws (`Scal`).
    pub scaling: f64,
    pub profit: f64,
    pub min_request_nodes: usize,
    pub max_request_nodes: usize,
    /// Probability that an ordered pair of virtual nodes exchanges traffic.
    pub traffic_density: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            seed: 0,
            capacity_values: vec![5.0, 10.0, 50.0, 500.0],
            capacity_probs: vec![0.1, 0.4, 0.4, 0.1],
            catalog: BulkCatalog::standard(),
            num_requests: 10,
            scaling: 0.4,
            profit: 500.0,
            min_request_nodes: 2,
            max_request_nodes: 10,
            traffic_density: 0.5,
        }
    }
}

impl GeneratorConfig {
    pub fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.capacity_values.is_empty() || self.capacity_values.len() != self.capacity_probs.len()
        {
            return bad("capacity values and probabilities must be nonempty and of equal length".into());
        }
        if self.capacity_values.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return bad("capacity values must be finite and nonnegative".into());
        }
        if self.capacity_probs.iter().any(|p| !(*p >= 0.0)) {
            return bad("capacity probabilities must be nonnegative".into());
        }
        let total: f64 = self.capacity_probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return bad(format!("capacity probabilities sum to {total}, not 1"));
        }
        if !(self.scaling > 0.0 && self.scaling.is_finite()) {
            return bad(format!("scaling factor {} must be positive", self.scaling));
        }
        if self.min_request_nodes == 0 || self.min_request_nodes > self.max_request_nodes {
            return bad(format!(
                "request node range {}..={} is empty",
                self.min_request_nodes, self.max_request_nodes
            ));
        }
        if !(0.0..=1.0).contains(&self.traffic_density) {
            return bad(format!("traffic density {} not in [0, 1]", self.traffic_density));
        }
        if !(self.profit >= 0.0 && self.profit.is_finite()) {
            return bad(format!("profit {} must be nonnegative", self.profit));
        }
        Ok(())
    }

    fn capacity_sampler(&self) -> CapacitySampler<'_> {
        CapacitySampler {
            values: &self.capacity_values,
            index: WeightedIndex::new(&self.capacity_probs)
                .expect("probabilities checked by GeneratorConfig::check"),
        }
    }
}

struct CapacitySampler<'a> {
    values: &'a [f64],
    index: WeightedIndex<f64>,
}

impl CapacitySampler<'_> {
    fn sample(&self, rng: &mut GenRng) -> f64 {
        self.values[self.index.sample(rng)]
    }
}

/// One draw from the configured capacity distribution.
pub fn sample_capacity(cfg: &GeneratorConfig, rng: &mut GenRng) -> f64 {
    cfg.capacity_sampler().sample(rng)
}

/// Shape of the physical topology, before capacities are drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TopologySpec {
    /// A ring of transit nodes with tree-shaped stub domains hanging off
    /// distinct transit nodes, densified with random extra edges until the
    /// requested undirected edge count is reached.
    TransitStub {
        transit_nodes: usize,
        stub_domains: usize,
        nodes: usize,
        edges: usize,
    },
    /// Explicit undirected edges over nodes `0..=max id`.
    EdgeList { edges: Vec<(usize, usize)> },
}

impl TopologySpec {
    /// The five data-center sizes: (13, 30), (14, 48), (23, 60), (31, 96)
    /// and (45, 148) nodes and arcs.
    pub fn data_center(k: usize) -> Option<Self> {
        let (transit_nodes, stub_domains, nodes, edges) = match k {
            0 => (4, 3, 13, 15),
            1 => (4, 3, 14, 24),
            2 => (5, 4, 23, 30),
            3 => (6, 5, 31, 48),
            4 => (8, 6, 45, 74),
            _ => return None,
        };
        Some(TopologySpec::TransitStub {
            transit_nodes,
            stub_domains,
            nodes,
            edges,
        })
    }

    /// 10 nodes, 26 arcs.
    pub fn desk_scale() -> Self {
        TopologySpec::TransitStub {
            transit_nodes: 3,
            stub_domains: 3,
            nodes: 10,
            edges: 13,
        }
    }

    /// Undirected simple graph as `(node count, edges)`.
    pub fn undirected(&self, rng: &mut GenRng) -> Result<(usize, Vec<(usize, usize)>)> {
        let (n, edges) = match self {
            TopologySpec::EdgeList { edges } => {
                let n = edges.iter().map(|&(u, v)| u.max(v) + 1).max().unwrap_or(0);
                let mut seen = std::collections::BTreeSet::new();
                for &(u, v) in edges {
                    if u == v {
                        return Err(Error::DegenerateTopology(format!("self-loop at node {u}")));
                    }
                    if !seen.insert((u.min(v), u.max(v))) {
                        return Err(Error::DegenerateTopology(format!(
                            "duplicate edge {{{u}, {v}}}"
                        )));
                    }
                }
                (n, edges.clone())
            }
            &TopologySpec::TransitStub {
                transit_nodes,
                stub_domains,
                nodes,
                edges,
            } => (nodes, transit_stub(transit_nodes, stub_domains, nodes, edges, rng)?),
        };
        if n == 0 {
            return Err(Error::DegenerateTopology("no nodes".into()));
        }
        if !connected(n, &edges) {
            return Err(Error::DegenerateTopology("graph is disconnected".into()));
        }
        Ok((n, edges))
    }
}

fn ring_edges(t: usize) -> usize {
    match t {
        0 | 1 => 0,
        2 => 1,
        t => t,
    }
}

fn transit_stub(
    transit: usize,
    stubs: usize,
    nodes: usize,
    edges: usize,
    rng: &mut GenRng,
) -> Result<Vec<(usize, usize)>> {
    let degenerate = |m: String| Err(Error::DegenerateTopology(m));
    if transit == 0 {
        return degenerate("at least one transit node is required".into());
    }
    if stubs > transit {
        return degenerate(format!(
            "{stubs} stub domains need {stubs} distinct transit nodes, only {transit} available"
        ));
    }
    if nodes < transit + stubs || (stubs == 0 && nodes != transit) {
        return degenerate(format!(
            "{nodes} nodes cannot hold {transit} transit nodes and {stubs} nonempty stub domains"
        ));
    }
    let min_edges = ring_edges(transit) + (nodes - transit);
    let max_edges = nodes * (nodes - 1) / 2;
    if edges < min_edges || edges > max_edges {
        return degenerate(format!(
            "{edges} edges outside the feasible range {min_edges}..={max_edges} for {nodes} nodes"
        ));
    }

    let mut adj = vec![vec![false; nodes]; nodes];
    let mut out = Vec::with_capacity(edges);
    fn add(adj: &mut [Vec<bool>], u: usize, v: usize, out: &mut Vec<(usize, usize)>) {
        adj[u][v] = true;
        adj[v][u] = true;
        out.push((u.min(v), u.max(v)));
    }

    match transit {
        1 => {}
        2 => add(&mut adj, 0, 1, &mut out),
        t => (0..t).for_each(|k| add(&mut adj, k, (k + 1) % t, &mut out)),
    }

    // Stub sizes: one node each, the rest spread uniformly.
    let mut sizes = vec![1usize; stubs];
    for _ in 0..nodes - transit - stubs {
        sizes[rng.random_range(0..stubs)] += 1;
    }
    let mut anchors: Vec<usize> = (0..transit).collect();
    for k in 0..stubs {
        let j = rng.random_range(k..transit);
        anchors.swap(k, j);
    }
    let mut domain = vec![usize::MAX; nodes];
    let mut first = transit;
    for (s, &size) in sizes.iter().enumerate() {
        for k in 0..size {
            let u = first + k;
            domain[u] = s;
            if k == 0 {
                add(&mut adj, anchors[s], u, &mut out);
            } else {
                let parent = first + rng.random_range(0..k);
                add(&mut adj, parent, u, &mut out);
            }
        }
        first += size;
    }

    let is_free = |adj: &Vec<Vec<bool>>, u: usize, v: usize| !adj[u][v];
    while out.len() < edges {
        // Prefer edges inside a stub domain or between transit nodes.
        let mut pool = Vec::new();
        for u in 0..nodes {
            for v in u + 1..nodes {
                let same_domain = (u < transit && v < transit)
                    || (u >= transit && domain[u] == domain[v]);
                if same_domain && is_free(&adj, u, v) {
                    pool.push((u, v));
                }
            }
        }
        if pool.is_empty() {
            for u in 0..nodes {
                for v in u + 1..nodes {
                    if is_free(&adj, u, v) {
                        pool.push((u, v));
                    }
                }
            }
        }
        let (u, v) = pool[rng.random_range(0..pool.len())];
        add(&mut adj, u, v, &mut out);
    }
    Ok(out)
}

fn connected(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut adj = vec![Vec::new(); n];
    for &(u, v) in edges {
        adj[u].push(v);
        adj[v].push(u);
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(u) = stack.pop() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// Builds the directed substrate: node capacities are drawn first, then
/// each undirected edge `{u, v}` becomes arcs `u -> v` and `v -> u` with
/// independent capacities.
pub fn gen_substrate(
    spec: &TopologySpec,
    cfg: &GeneratorConfig,
    rng: &mut GenRng,
) -> Result<SubstrateNetwork> {
    cfg.check()?;
    let (n, edges) = spec.undirected(rng)?;
    let sampler = cfg.capacity_sampler();
    let nodes = (0..n)
        .map(|id| SubstrateNode {
            id,
            capacity: sampler.sample(rng),
        })
        .collect();
    let mut arcs = Vec::with_capacity(2 * edges.len());
    for &(u, v) in &edges {
        arcs.push(Arc {
            tail: u,
            head: v,
            capacity: sampler.sample(rng),
        });
        arcs.push(Arc {
            tail: v,
            head: u,
            capacity: sampler.sample(rng),
        });
    }
    Ok(SubstrateNetwork::new(nodes, arcs))
}

/// Locality set for a fixed cardinality factor: every substrate node is
/// included independently with probability `gamma`.
pub fn sample_locality_set(gamma: f64, num_substrate: usize, rng: &mut GenRng) -> Vec<usize> {
    (0..num_substrate)
        .filter(|_| rng.random_bool(gamma.clamp(0.0, 1.0)))
        .collect()
}

/// Locality sets for `num_vnodes` virtual nodes, each with its own factor
/// drawn uniformly from `[0.5, 1]`.
pub fn gen_locality(num_vnodes: usize, num_substrate: usize, rng: &mut GenRng) -> Vec<Vec<usize>> {
    (0..num_vnodes)
        .map(|_| {
            let gamma = rng.random_range(0.5..=1.0);
            sample_locality_set(gamma, num_substrate, rng)
        })
        .collect()
}

/// One request drawn from `rng`.
pub fn gen_request(
    id: usize,
    cfg: &GeneratorConfig,
    num_substrate: usize,
    rng: &mut GenRng,
) -> VnRequest {
    let sampler = cfg.capacity_sampler();
    let n = rng.random_range(cfg.min_request_nodes..=cfg.max_request_nodes);
    let requirements: Vec<f64> = (0..n).map(|_| cfg.scaling * sampler.sample(rng)).collect();
    let mut traffic = TrafficMatrix::zeros(n);
    for v in 0..n {
        for w in 0..n {
            if v != w && rng.random_bool(cfg.traffic_density) {
                traffic.set(v, w, cfg.scaling * sampler.sample(rng));
            }
        }
    }
    let locality = gen_locality(n, num_substrate, rng);
    VnRequest {
        id,
        nodes: requirements
            .into_iter()
            .zip(locality)
            .enumerate()
            .map(|(id, (requirement, locality))| VirtualNode {
                id,
                requirement,
                locality,
            })
            .collect(),
        traffic,
        profit: cfg.profit,
    }
}

/// `cfg.num_requests` requests, request `k` drawn from stream `k + 1` of
/// `cfg.seed`.
pub fn gen_requests(cfg: &GeneratorConfig, substrate: &SubstrateNetwork) -> Result<Vec<VnRequest>> {
    cfg.check()?;
    Ok((0..cfg.num_requests)
        .map(|k| {
            let mut rng = stream_rng(cfg.seed, k as u64 + 1);
            gen_request(k, cfg, substrate.num_nodes(), &mut rng)
        })
        .collect())
}

pub fn gen_instance(spec: &TopologySpec, cfg: &GeneratorConfig) -> Result<Instance> {
    let mut rng = stream_rng(cfg.seed, 0);
    let substrate = gen_substrate(spec, cfg, &mut rng)?;
    let requests = gen_requests(cfg, &substrate)?;
    let inst = Instance {
        substrate,
        catalog: cfg.catalog.clone(),
        requests,
    };
    let violations = inst.validate();
    if !violations.is_empty() {
        return Err(Error::InvalidInstance(violations));
    }
    Ok(inst)
}
