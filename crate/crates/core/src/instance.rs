//! Problem data: the physical substrate, the bulk rental catalog and the set
//! of virtual network requests.
//!
//! All indices are positional. Substrate node `i` is `substrate.nodes[i]`,
//! virtual node `v` of a request is `request.nodes[v]`, and request `r` is
//! `instance.requests[r]`. The `id` fields are kept so that documents stay
//! self-describing, and [`Instance::validate`] checks that they agree with
//! the positions.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Physical node with its total capacity.
#[derive(Debug, Clone, PartialEq)]
pub struct SubstrateNode {
    pub id: usize,
    pub capacity: f64,
}

/// Directed physical arc `tail -> head` with its total capacity.
#[derive(Debug, Clone, PartialEq)]
pub struct Arc {
    pub tail: usize,
    pub head: usize,
    pub capacity: f64,
}

/// Directed physical network.
///
/// Arcs are kept sorted by `(tail, head)`; the position of an arc in that
/// order is its index everywhere else in the crate.
#[derive(Debug, Clone, PartialEq)]
pub struct SubstrateNetwork {
    nodes: Vec<SubstrateNode>,
    arcs: Vec<Arc>,
    out_arcs: Vec<Vec<usize>>,
    in_arcs: Vec<Vec<usize>>,
}

impl SubstrateNetwork {
    pub fn new(nodes: Vec<SubstrateNode>, mut arcs: Vec<Arc>) -> Self {
        arcs.sort_by_key(|a| (a.tail, a.head));
        let n = nodes.len();
        let mut out_arcs = vec![Vec::new(); n];
        let mut in_arcs = vec![Vec::new(); n];
        for (k, arc) in arcs.iter().enumerate() {
            if arc.tail < n && arc.head < n {
                out_arcs[arc.tail].push(k);
                in_arcs[arc.head].push(k);
            }
        }
        SubstrateNetwork {
            nodes,
            arcs,
            out_arcs,
            in_arcs,
        }
    }

    pub fn nodes(&self) -> &[SubstrateNode] {
        &self.nodes
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_arcs(&self) -> usize {
        self.arcs.len()
    }

    /// Indices of the arcs leaving node `i`.
    pub fn out_arcs(&self, i: usize) -> &[usize] {
        &self.out_arcs[i]
    }

    /// Indices of the arcs entering node `i`.
    pub fn in_arcs(&self, i: usize) -> &[usize] {
        &self.in_arcs[i]
    }

    pub fn arc_index(&self, tail: usize, head: usize) -> Option<usize> {
        self.arcs
            .binary_search_by_key(&(tail, head), |a| (a.tail, a.head))
            .ok()
    }

    fn validate_into(&self, out: &mut Vec<Violation>) {
        let n = self.nodes.len();
        for (k, node) in self.nodes.iter().enumerate() {
            if node.id != k {
                out.push(Violation::new(
                    format!("substrate.nodes[{k}]"),
                    format!("node id {} does not match its position {k}", node.id),
                ));
            }
            if !(node.capacity >= 0.0 && node.capacity.is_finite()) {
                out.push(Violation::new(
                    format!("substrate.nodes[{k}]"),
                    format!("capacity {} is not a finite nonnegative number", node.capacity),
                ));
            }
        }
        for (k, arc) in self.arcs.iter().enumerate() {
            let path = format!("substrate.arcs[{k}]");
            if arc.tail >= n || arc.head >= n {
                out.push(Violation::new(
                    path.clone(),
                    format!("arc ({}, {}) references a missing node", arc.tail, arc.head),
                ));
            }
            if arc.tail == arc.head {
                out.push(Violation::new(
                    path.clone(),
                    format!("self-loop at node {}", arc.tail),
                ));
            }
            if k > 0 && {
                let prev = &self.arcs[k - 1];
                (prev.tail, prev.head) == (arc.tail, arc.head)
            } {
                out.push(Violation::new(
                    path.clone(),
                    format!("parallel arc ({}, {})", arc.tail, arc.head),
                ));
            }
            if !(arc.capacity >= 0.0 && arc.capacity.is_finite()) {
                out.push(Violation::new(
                    path,
                    format!("capacity {} is not a finite nonnegative number", arc.capacity),
                ));
            }
        }
        // The index is rebuilt on construction, so a mismatch means the
        // network was assembled by hand.
        let rebuilt = SubstrateNetwork::new(self.nodes.clone(), self.arcs.clone());
        if rebuilt.out_arcs != self.out_arcs || rebuilt.in_arcs != self.in_arcs {
            out.push(Violation::new(
                "substrate",
                "adjacency index disagrees with the arc list",
            ));
        }
    }
}

/// One rentable bulk of capacity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bulk {
    pub size: f64,
    pub cost: f64,
}

impl Bulk {
    pub fn new(size: f64, cost: f64) -> Self {
        Bulk { size, cost }
    }

    pub fn unit_cost(&self) -> f64 {
        self.cost / self.size
    }
}

/// Bulk sizes and prices for node and link capacity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BulkCatalog {
    pub node_bulks: Vec<Bulk>,
    pub link_bulks: Vec<Bulk>,
}

impl BulkCatalog {
    /// Sizes 1, 10, 100 at costs 1, 5, 25 for both nodes and links.
    pub fn standard() -> Self {
        let bulks = vec![
            Bulk::new(1.0, 1.0),
            Bulk::new(10.0, 5.0),
            Bulk::new(100.0, 25.0),
        ];
        BulkCatalog {
            node_bulks: bulks.clone(),
            link_bulks: bulks,
        }
    }

    fn validate_into(&self, out: &mut Vec<Violation>) {
        validate_bulks("catalog.node_bulks", "node", &self.node_bulks, out);
        validate_bulks("catalog.link_bulks", "link", &self.link_bulks, out);
    }
}

fn validate_bulks(path: &str, what: &str, bulks: &[Bulk], out: &mut Vec<Violation>) {
    if bulks.is_empty() {
        out.push(Violation::new(path, format!("{what} bulk list is empty")));
        return;
    }
    for (k, b) in bulks.iter().enumerate() {
        if !(b.size > 0.0 && b.size.is_finite()) {
            out.push(Violation::new(
                format!("{path}[{k}]"),
                format!("bulk size {} is not a finite positive number", b.size),
            ));
        }
        if !(b.cost >= 0.0 && b.cost.is_finite()) {
            out.push(Violation::new(
                format!("{path}[{k}]"),
                format!("bulk cost {} is not a finite nonnegative number", b.cost),
            ));
        }
    }
    for (k, pair) in bulks.windows(2).enumerate() {
        let (a, b) = (pair[0], pair[1]);
        if b.size <= a.size {
            out.push(Violation::new(
                format!("{path}[{}]", k + 1),
                format!("bulk sizes not strictly increasing ({} after {})", b.size, a.size),
            ));
        } else if a.unit_cost() < b.unit_cost() {
            out.push(Violation::new(
                format!("{path}[{}]", k + 1),
                format!(
                    "{what} bulk unit cost increases with size ({} per unit at size {}, {} per unit at size {})",
                    a.unit_cost(),
                    a.size,
                    b.unit_cost(),
                    b.size
                ),
            ));
        }
    }
}

/// Virtual node with its capacity requirement and the physical nodes it may
/// be placed on.
#[derive(Debug, Clone, PartialEq)]
pub struct VirtualNode {
    pub id: usize,
    pub requirement: f64,
    pub locality: Vec<usize>,
}

/// Dense square matrix of traffic demands between virtual nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficMatrix {
    n: usize,
    data: Vec<f64>,
}

impl TrafficMatrix {
    pub fn zeros(n: usize) -> Self {
        TrafficMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, v: usize, w: usize) -> f64 {
        self.data[v * self.n + w]
    }

    pub fn set(&mut self, v: usize, w: usize, d: f64) {
        self.data[v * self.n + w] = d;
    }

    /// Nonzero entries in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &d)| d != 0.0)
            .map(move |(k, &d)| (k / self.n, k % self.n, d))
    }
}

/// A traffic demand between an ordered pair of virtual nodes that has to be
/// routed unless both endpoints share a physical node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Commodity {
    pub source: usize,
    pub target: usize,
    pub demand: f64,
}

/// Virtual network request.
#[derive(Debug, Clone, PartialEq)]
pub struct VnRequest {
    pub id: usize,
    pub nodes: Vec<VirtualNode>,
    pub traffic: TrafficMatrix,
    pub profit: f64,
}

impl VnRequest {
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Ordered pairs with strictly positive demand, lexicographic in
    /// `(source, target)`.
    pub fn commodities(&self) -> Vec<Commodity> {
        let n = self.traffic.dim();
        let mut out = Vec::new();
        for v in 0..n {
            for w in 0..n {
                let d = self.traffic.get(v, w);
                if v != w && d > 0.0 {
                    out.push(Commodity {
                        source: v,
                        target: w,
                        demand: d,
                    });
                }
            }
        }
        out
    }

    fn validate_into(&self, pos: usize, num_substrate: usize, out: &mut Vec<Violation>) {
        let path = format!("requests[{pos}]");
        if self.id != pos {
            out.push(Violation::new(
                path.clone(),
                format!("request id {} does not match its position {pos}", self.id),
            ));
        }
        if self.nodes.is_empty() {
            out.push(Violation::new(path.clone(), "request has no virtual nodes"));
        }
        if !(self.profit >= 0.0 && self.profit.is_finite()) {
            out.push(Violation::new(
                path.clone(),
                format!("profit {} is not a finite nonnegative number", self.profit),
            ));
        }
        for (v, node) in self.nodes.iter().enumerate() {
            let npath = format!("{path}.nodes[{v}]");
            if node.id != v {
                out.push(Violation::new(
                    npath.clone(),
                    format!("virtual node id {} does not match its position {v}", node.id),
                ));
            }
            if !(node.requirement >= 0.0 && node.requirement.is_finite()) {
                out.push(Violation::new(
                    npath.clone(),
                    format!(
                        "requirement {} is not a finite nonnegative number",
                        node.requirement
                    ),
                ));
            }
            let mut seen = vec![false; num_substrate];
            for &i in &node.locality {
                if i >= num_substrate {
                    out.push(Violation::new(
                        npath.clone(),
                        format!("locality set of request {pos} node {v} names missing substrate node {i}"),
                    ));
                } else if std::mem::replace(&mut seen[i], true) {
                    out.push(Violation::new(
                        npath.clone(),
                        format!("locality set lists substrate node {i} twice"),
                    ));
                }
            }
        }
        let n = self.traffic.dim();
        if n != self.nodes.len() {
            out.push(Violation::new(
                format!("{path}.demands"),
                format!(
                    "traffic matrix is {n}x{n} but the request has {} nodes",
                    self.nodes.len()
                ),
            ));
        }
        for v in 0..n {
            for w in 0..n {
                let d = self.traffic.get(v, w);
                if v == w && d != 0.0 {
                    out.push(Violation::new(
                        format!("{path}.demands"),
                        format!("nonzero diagonal demand {d} at virtual node {v}"),
                    ));
                } else if !(d >= 0.0 && d.is_finite()) {
                    out.push(Violation::new(
                        format!("{path}.demands"),
                        format!("demand {d} from {v} to {w} is not a finite nonnegative number"),
                    ));
                }
            }
        }
    }
}

/// Complete problem input.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub substrate: SubstrateNetwork,
    pub catalog: BulkCatalog,
    pub requests: Vec<VnRequest>,
}

impl Instance {
    /// Every violated invariant, each naming the offending element. Empty
    /// means the instance is well formed.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        self.substrate.validate_into(&mut out);
        self.catalog.validate_into(&mut out);
        for (pos, req) in self.requests.iter().enumerate() {
            req.validate_into(pos, self.substrate.num_nodes(), &mut out);
        }
        out
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_empty()
    }

    /// Total number of commodities over all requests.
    pub fn num_commodities(&self) -> usize {
        self.requests.iter().map(|r| r.commodities().len()).sum()
    }
}

/// One violated invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// Location of the offending element, e.g. `requests[2].nodes[0]`.
    pub path: String,
    pub message: String,
}

impl Violation {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Violation {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}
