//! The embedding MILP: acceptance `y`, node mapping `x`, per-commodity arc
//! flows `f`, and rented bulk counts `g` (nodes) and `h` (arcs).
//!
//! ```text
//! max  sum_r p_r y_r - sum_{i,u} alpha_u g_iu - sum_{ij,q} beta_q h_ijq
//! s.t. sum_{i in L(r,v)} x_rvi = y_r                           (mapping)
//!      sum_{r,v} t_rv x_rvi <= sum_u u g_iu                     (node capacity)
//!      sum_{r,v,w} d_rvw f_rvwij <= sum_q q h_ijq                (link capacity)
//!      sum_u u g_iu <= B_i                                      (node bulk)
//!      sum_q q h_ijq <= K_ij                                    (link bulk)
//!      sum_out f_rvw - sum_in f_rvw = x_rvi - x_rwi             (flow balance)
//! ```
//!
//! Columns are laid out in blocks `y, x, f, g, h`, each in lexicographic
//! order of its tag. Rows follow the order of the families above.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{Commodity, Instance};
use crate::verify::{CommodityFlow, EmbeddingSolution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ColumnKind {
    Binary,
    Integer,
    Continuous,
}

impl ColumnKind {
    pub fn is_integer(self) -> bool {
        !matches!(self, ColumnKind::Continuous)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Column {
    pub kind: ColumnKind,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Row {
    pub fn activity(&self, point: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * point[j]).sum()
    }

    /// Amount by which `point` violates the row (0 when satisfied).
    pub fn violation(&self, point: &[f64]) -> f64 {
        let lhs = self.activity(point);
        match self.sense {
            Sense::Le => (lhs - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - lhs).max(0.0),
            Sense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveSense {
    Maximize,
    Minimize,
}

/// Mixed-integer linear program in row form.
#[derive(Debug, Clone, PartialEq)]
pub struct MilpModel {
    pub columns: Vec<Column>,
    pub rows: Vec<Row>,
    /// Sparse objective coefficients.
    pub objective: Vec<(usize, f64)>,
    pub sense: ObjectiveSense,
}

impl MilpModel {
    pub fn new(sense: ObjectiveSense) -> Self {
        MilpModel {
            columns: Vec::new(),
            rows: Vec::new(),
            objective: Vec::new(),
            sense,
        }
    }

    pub fn add_column(&mut self, kind: ColumnKind, lower: f64, upper: f64, obj: f64) -> usize {
        let j = self.columns.len();
        self.columns.push(Column { kind, lower, upper });
        if obj != 0.0 {
            self.objective.push((j, obj));
        }
        j
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> usize {
        self.rows.push(Row { coeffs, sense, rhs });
        self.rows.len() - 1
    }

    pub fn num_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn objective_value(&self, point: &[f64]) -> f64 {
        self.objective.iter().map(|&(j, c)| c * point[j]).sum()
    }

    /// Dense objective vector.
    pub fn objective_dense(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.num_cols()];
        for &(j, v) in &self.objective {
            c[j] += v;
        }
        c
    }

    /// True when every objective term has an integer coefficient on an
    /// integer column, so every integer-feasible point has an integral
    /// objective value.
    pub fn objective_is_integral(&self) -> bool {
        self.objective
            .iter()
            .all(|&(j, c)| self.columns[j].kind.is_integer() && c == c.round())
    }

    /// Structural problems: dangling column references, binary columns
    /// with bounds other than `[0, 1]`, integer columns with infinite
    /// bounds, inverted bounds.
    pub fn check(&self) -> Vec<String> {
        let n = self.num_cols();
        let mut out = Vec::new();
        for (j, c) in self.columns.iter().enumerate() {
            if c.kind == ColumnKind::Binary && (c.lower != 0.0 || c.upper != 1.0) {
                out.push(format!("binary column {j} has bounds [{}, {}]", c.lower, c.upper));
            }
            if c.kind.is_integer() && !(c.lower.is_finite() && c.upper.is_finite()) {
                out.push(format!("integer column {j} has an infinite bound"));
            }
            if !c.lower.is_finite() {
                out.push(format!("column {j} has no finite lower bound"));
            }
            if c.lower > c.upper {
                out.push(format!("column {j} has lower bound above upper bound"));
            }
        }
        for (k, r) in self.rows.iter().enumerate() {
            if let Some(&(j, _)) = r.coeffs.iter().find(|&&(j, _)| j >= n) {
                out.push(format!("row {k} references missing column {j}"));
            }
        }
        if let Some(&(j, _)) = self.objective.iter().find(|&&(j, _)| j >= n) {
            out.push(format!("objective references missing column {j}"));
        }
        out
    }

    /// Largest bound or row violation of `point`.
    pub fn max_violation(&self, point: &[f64]) -> f64 {
        let bounds = self
            .columns
            .iter()
            .zip(point)
            .map(|(c, &x)| (c.lower - x).max(x - c.upper).max(0.0))
            .fold(0.0, f64::max);
        let rows = self
            .rows
            .iter()
            .map(|r| r.violation(point))
            .fold(0.0, f64::max);
        bounds.max(rows)
    }

    /// Largest distance of an integer column from the nearest integer.
    pub fn max_fractionality(&self, point: &[f64]) -> f64 {
        self.columns
            .iter()
            .zip(point)
            .filter(|(c, _)| c.kind.is_integer())
            .map(|(_, &x)| (x - x.round()).abs())
            .fold(0.0, f64::max)
    }

    /// The same model with every column continuous.
    pub fn relaxed(&self) -> MilpModel {
        let mut m = self.clone();
        for c in &mut m.columns {
            c.kind = ColumnKind::Continuous;
        }
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Routing {
    Splittable,
    SinglePath,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RabMode {
    /// Bulk counts are integers.
    Integral,
    /// Bulk counts are continuous, i.e. capacity is priced linearly.
    Relaxed,
}

impl fmt::Display for Routing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Routing::Splittable => "splittable",
            Routing::SinglePath => "single-path",
        })
    }
}

impl fmt::Display for RabMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RabMode::Integral => "integral",
            RabMode::Relaxed => "relaxed",
        })
    }
}

impl std::str::FromStr for Routing {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "splittable" => Ok(Routing::Splittable),
            "single-path" => Ok(Routing::SinglePath),
            _ => Err(format!("unknown routing '{s}' (expected splittable or single-path)")),
        }
    }
}

impl std::str::FromStr for RabMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "integral" => Ok(RabMode::Integral),
            "relaxed" => Ok(RabMode::Relaxed),
            _ => Err(format!("unknown rab mode '{s}' (expected integral or relaxed)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelConfig {
    pub routing: Routing,
    pub rab: RabMode,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            routing: Routing::SinglePath,
            rab: RabMode::Integral,
        }
    }
}

/// Symbol attached to a column. Arcs are named by their endpoints, bulks by
/// their position in the catalog list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarTag {
    Y { r: usize },
    X { r: usize, v: usize, i: usize },
    F { r: usize, v: usize, w: usize, i: usize, j: usize },
    G { i: usize, u: usize },
    H { i: usize, j: usize, q: usize },
}

impl fmt::Display for VarTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            VarTag::Y { r } => write!(f, "y_{r}"),
            VarTag::X { r, v, i } => write!(f, "x_{r}_{v}_{i}"),
            VarTag::F { r, v, w, i, j } => write!(f, "f_{r}_{v}_{w}_{i}_{j}"),
            VarTag::G { i, u } => write!(f, "g_{i}_{u}"),
            VarTag::H { i, j, q } => write!(f, "h_{i}_{j}_{q}"),
        }
    }
}

/// Constraint family and indices of a row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RowTag {
    Mapping { r: usize, v: usize },
    NodeCapacity { i: usize },
    LinkCapacity { i: usize, j: usize },
    NodeBulk { i: usize },
    LinkBulk { i: usize, j: usize },
    FlowBalance { r: usize, v: usize, w: usize, i: usize },
}

impl fmt::Display for RowTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            RowTag::Mapping { r, v } => write!(f, "map_{r}_{v}"),
            RowTag::NodeCapacity { i } => write!(f, "ncap_{i}"),
            RowTag::LinkCapacity { i, j } => write!(f, "lcap_{i}_{j}"),
            RowTag::NodeBulk { i } => write!(f, "nbulk_{i}"),
            RowTag::LinkBulk { i, j } => write!(f, "lbulk_{i}_{j}"),
            RowTag::FlowBalance { r, v, w, i } => write!(f, "flow_{r}_{v}_{w}_{i}"),
        }
    }
}

/// Bidirectional map between columns and symbols, plus block offsets for
/// fast structured access.
#[derive(Debug, Clone)]
pub struct VarMap {
    config: ModelConfig,
    tags: Vec<VarTag>,
    index: HashMap<VarTag, usize>,
    row_tags: Vec<RowTag>,
    y: Vec<usize>,
    /// `[r][v]` -> `(substrate node, column)`, sorted by node.
    x: Vec<Vec<Vec<(usize, usize)>>>,
    commodities: Vec<Vec<Commodity>>,
    /// `[r][c]` -> first f column of the commodity; arc `a` is at `+ a`.
    f_base: Vec<Vec<usize>>,
    g_base: usize,
    h_base: usize,
    num_nodes: usize,
    num_arcs: usize,
    num_node_bulks: usize,
    num_link_bulks: usize,
}

impl VarMap {
    pub fn config(&self) -> ModelConfig {
        self.config
    }

    pub fn num_cols(&self) -> usize {
        self.tags.len()
    }

    pub fn tag(&self, col: usize) -> VarTag {
        self.tags[col]
    }

    pub fn tags(&self) -> &[VarTag] {
        &self.tags
    }

    pub fn col(&self, tag: &VarTag) -> Option<usize> {
        self.index.get(tag).copied()
    }

    pub fn row_tag(&self, row: usize) -> RowTag {
        self.row_tags[row]
    }

    pub fn row_tags(&self) -> &[RowTag] {
        &self.row_tags
    }

    pub fn y(&self, r: usize) -> usize {
        self.y[r]
    }

    /// `(substrate node, column)` pairs of the x block of `(r, v)`.
    pub fn x(&self, r: usize, v: usize) -> &[(usize, usize)] {
        &self.x[r][v]
    }

    pub fn commodities(&self, r: usize) -> &[Commodity] {
        &self.commodities[r]
    }

    /// Flow column of commodity `c` of request `r` on arc `a`.
    pub fn f(&self, r: usize, c: usize, a: usize) -> usize {
        self.f_base[r][c] + a
    }

    pub fn g(&self, i: usize, u: usize) -> usize {
        self.g_base + i * self.num_node_bulks + u
    }

    pub fn h(&self, a: usize, q: usize) -> usize {
        self.h_base + a * self.num_link_bulks + q
    }

    pub fn num_requests(&self) -> usize {
        self.y.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_arcs(&self) -> usize {
        self.num_arcs
    }

    pub fn is_binary_block(&self, col: usize) -> bool {
        col < self.g_base
    }
}

/// Builds the MILP of `inst` under the given routing and rental modes.
pub fn build_model(inst: &Instance, cfg: ModelConfig) -> Result<(MilpModel, VarMap)> {
    let violations = inst.validate();
    if !violations.is_empty() {
        return Err(Error::InvalidInstance(violations));
    }
    let sub = &inst.substrate;
    let cat = &inst.catalog;
    let n = sub.num_nodes();
    let m = sub.num_arcs();
    let mut model = MilpModel::new(ObjectiveSense::Maximize);
    let mut tags = Vec::new();
    let mut push = |model: &mut MilpModel, tag: VarTag, kind, lo, hi, obj| {
        tags.push(tag);
        model.add_column(kind, lo, hi, obj)
    };

    let y: Vec<usize> = inst
        .requests
        .iter()
        .enumerate()
        .map(|(r, req)| {
            push(&mut model, VarTag::Y { r }, ColumnKind::Binary, 0.0, 1.0, req.profit)
        })
        .collect();

    let mut x = Vec::with_capacity(inst.requests.len());
    for (r, req) in inst.requests.iter().enumerate() {
        let mut xr = Vec::with_capacity(req.num_nodes());
        for (v, node) in req.nodes.iter().enumerate() {
            let mut locality = node.locality.clone();
            locality.sort_unstable();
            let cols = locality
                .into_iter()
                .map(|i| {
                    let col =
                        push(&mut model, VarTag::X { r, v, i }, ColumnKind::Binary, 0.0, 1.0, 0.0);
                    (i, col)
                })
                .collect();
            xr.push(cols);
        }
        x.push(xr);
    }

    let flow_kind = match cfg.routing {
        Routing::SinglePath => ColumnKind::Binary,
        Routing::Splittable => ColumnKind::Continuous,
    };
    let commodities: Vec<Vec<Commodity>> = inst.requests.iter().map(|r| r.commodities()).collect();
    let mut f_base = Vec::with_capacity(commodities.len());
    for (r, cs) in commodities.iter().enumerate() {
        let mut bases = Vec::with_capacity(cs.len());
        for c in cs {
            bases.push(model.num_cols());
            for arc in sub.arcs() {
                let tag = VarTag::F {
                    r,
                    v: c.source,
                    w: c.target,
                    i: arc.tail,
                    j: arc.head,
                };
                push(&mut model, tag, flow_kind, 0.0, 1.0, 0.0);
            }
        }
        f_base.push(bases);
    }

    let rental_kind = match cfg.rab {
        RabMode::Integral => ColumnKind::Integer,
        RabMode::Relaxed => ColumnKind::Continuous,
    };
    let g_base = model.num_cols();
    for (i, node) in sub.nodes().iter().enumerate() {
        for (u, b) in cat.node_bulks.iter().enumerate() {
            let ub = (node.capacity / b.size).ceil();
            push(&mut model, VarTag::G { i, u }, rental_kind, 0.0, ub, -b.cost);
        }
    }
    let h_base = model.num_cols();
    for arc in sub.arcs() {
        for (q, b) in cat.link_bulks.iter().enumerate() {
            let ub = (arc.capacity / b.size).ceil();
            let tag = VarTag::H {
                i: arc.tail,
                j: arc.head,
                q,
            };
            push(&mut model, tag, rental_kind, 0.0, ub, -b.cost);
        }
    }

    let vm_partial = VarMap {
        config: cfg,
        index: HashMap::new(),
        tags: Vec::new(),
        row_tags: Vec::new(),
        y,
        x,
        commodities,
        f_base,
        g_base,
        h_base,
        num_nodes: n,
        num_arcs: m,
        num_node_bulks: cat.node_bulks.len(),
        num_link_bulks: cat.link_bulks.len(),
    };
    let mut vm = vm_partial;
    vm.tags = tags;
    let mut row_tags = Vec::new();

    // Mapping.
    for (r, req) in inst.requests.iter().enumerate() {
        for v in 0..req.num_nodes() {
            let mut coeffs: Vec<(usize, f64)> = vm.x(r, v).iter().map(|&(_, c)| (c, 1.0)).collect();
            coeffs.push((vm.y(r), -1.0));
            model.add_row(coeffs, Sense::Eq, 0.0);
            row_tags.push(RowTag::Mapping { r, v });
        }
    }

    // Node capacity: usage minus rented capacity.
    let mut node_terms: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (r, req) in inst.requests.iter().enumerate() {
        for (v, node) in req.nodes.iter().enumerate() {
            if node.requirement == 0.0 {
                continue;
            }
            for &(i, col) in vm.x(r, v) {
                node_terms[i].push((col, node.requirement));
            }
        }
    }
    for (i, mut coeffs) in node_terms.into_iter().enumerate() {
        coeffs.sort_unstable_by_key(|&(c, _)| c);
        for (u, b) in cat.node_bulks.iter().enumerate() {
            coeffs.push((vm.g(i, u), -b.size));
        }
        model.add_row(coeffs, Sense::Le, 0.0);
        row_tags.push(RowTag::NodeCapacity { i });
    }

    // Link capacity.
    for (a, arc) in sub.arcs().iter().enumerate() {
        let mut coeffs = Vec::new();
        for (r, cs) in vm.commodities.iter().enumerate() {
            for (c, com) in cs.iter().enumerate() {
                coeffs.push((vm.f(r, c, a), com.demand));
            }
        }
        for (q, b) in cat.link_bulks.iter().enumerate() {
            coeffs.push((vm.h(a, q), -b.size));
        }
        model.add_row(coeffs, Sense::Le, 0.0);
        row_tags.push(RowTag::LinkCapacity {
            i: arc.tail,
            j: arc.head,
        });
    }

    for (i, node) in sub.nodes().iter().enumerate() {
        let coeffs = cat
            .node_bulks
            .iter()
            .enumerate()
            .map(|(u, b)| (vm.g(i, u), b.size))
            .collect();
        model.add_row(coeffs, Sense::Le, node.capacity);
        row_tags.push(RowTag::NodeBulk { i });
    }
    for (a, arc) in sub.arcs().iter().enumerate() {
        let coeffs = cat
            .link_bulks
            .iter()
            .enumerate()
            .map(|(q, b)| (vm.h(a, q), b.size))
            .collect();
        model.add_row(coeffs, Sense::Le, arc.capacity);
        row_tags.push(RowTag::LinkBulk {
            i: arc.tail,
            j: arc.head,
        });
    }

    // Flow balance with mapping-dependent right-hand side, moved to the
    // left: out - in - x_vi + x_wi = 0.
    for (r, cs) in vm.commodities.iter().enumerate() {
        for (c, com) in cs.iter().enumerate() {
            let xv = vm.x(r, com.source);
            let xw = vm.x(r, com.target);
            for i in 0..n {
                let mut coeffs: Vec<(usize, f64)> = Vec::new();
                coeffs.extend(sub.out_arcs(i).iter().map(|&a| (vm.f(r, c, a), 1.0)));
                coeffs.extend(sub.in_arcs(i).iter().map(|&a| (vm.f(r, c, a), -1.0)));
                if let Ok(k) = xv.binary_search_by_key(&i, |&(node, _)| node) {
                    coeffs.push((xv[k].1, -1.0));
                }
                if let Ok(k) = xw.binary_search_by_key(&i, |&(node, _)| node) {
                    coeffs.push((xw[k].1, 1.0));
                }
                coeffs.sort_unstable_by_key(|&(col, _)| col);
                model.add_row(coeffs, Sense::Eq, 0.0);
                row_tags.push(RowTag::FlowBalance {
                    r,
                    v: com.source,
                    w: com.target,
                    i,
                });
            }
        }
    }

    vm.index = vm.tags.iter().enumerate().map(|(k, &t)| (t, k)).collect();
    vm.row_tags = row_tags;
    Ok((model, vm))
}

fn snap(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 {
        r
    } else {
        x
    }
}

/// Reads an embedding back from a column-value vector.
///
/// A request counts as accepted when `y > 0.5` and a virtual node is mapped
/// to the substrate node with the largest `x` above 0.5. Usage is summed
/// from the raw `x` and `f` values.
pub fn decode(inst: &Instance, vm: &VarMap, point: &[f64]) -> Result<EmbeddingSolution> {
    if point.len() != vm.num_cols() {
        return Err(Error::DimensionMismatch {
            expected: vm.num_cols(),
            got: point.len(),
        });
    }
    let val = |c: usize| snap(point[c]);
    let sub = &inst.substrate;
    let mut accepted = Vec::with_capacity(inst.requests.len());
    let mut mapping = Vec::with_capacity(inst.requests.len());
    let mut node_usage = vec![0.0; sub.num_nodes()];
    let mut link_usage = vec![0.0; sub.num_arcs()];
    let mut flows = Vec::new();

    for (r, req) in inst.requests.iter().enumerate() {
        let acc = val(vm.y(r)) > 0.5;
        accepted.push(acc);
        let mut map_r = Vec::with_capacity(req.num_nodes());
        for (v, node) in req.nodes.iter().enumerate() {
            let mut best: Option<(usize, f64)> = None;
            for &(i, col) in vm.x(r, v) {
                let xv = val(col);
                node_usage[i] += node.requirement * xv;
                if xv > 0.5 && best.is_none_or(|(_, b)| xv > b) {
                    best = Some((i, xv));
                }
            }
            map_r.push(if acc { best.map(|(i, _)| i) } else { None });
        }
        mapping.push(map_r);
        for (c, com) in vm.commodities(r).iter().enumerate() {
            let arc_flow: Vec<f64> = (0..sub.num_arcs()).map(|a| val(vm.f(r, c, a))).collect();
            for (a, &fv) in arc_flow.iter().enumerate() {
                link_usage[a] += com.demand * fv;
            }
            flows.push(CommodityFlow {
                request: r,
                source: com.source,
                target: com.target,
                demand: com.demand,
                arc_flow,
            });
        }
    }

    let node_rentals = (0..sub.num_nodes())
        .map(|i| {
            (0..inst.catalog.node_bulks.len())
                .map(|u| val(vm.g(i, u)))
                .collect()
        })
        .collect();
    let link_rentals = (0..sub.num_arcs())
        .map(|a| {
            (0..inst.catalog.link_bulks.len())
                .map(|q| val(vm.h(a, q)))
                .collect()
        })
        .collect();

    Ok(EmbeddingSolution {
        accepted,
        mapping,
        flows,
        node_rentals,
        link_rentals,
        node_usage,
        link_usage,
    })
}

/// Inverse of [`decode`]: the column vector of an embedding.
pub fn encode(vm: &VarMap, sol: &EmbeddingSolution) -> Vec<f64> {
    let mut point = vec![0.0; vm.num_cols()];
    for (r, &acc) in sol.accepted.iter().enumerate() {
        if acc {
            point[vm.y(r)] = 1.0;
        }
        for (v, target) in sol.mapping[r].iter().enumerate() {
            if let Some(i) = *target {
                if let Some(&(_, col)) = vm.x(r, v).iter().find(|&&(node, _)| node == i) {
                    point[col] = 1.0;
                }
            }
        }
    }
    let mut flow_iter = sol.flows.iter();
    for r in 0..vm.num_requests() {
        for c in 0..vm.commodities(r).len() {
            if let Some(fl) = flow_iter.next() {
                for (a, &v) in fl.arc_flow.iter().enumerate() {
                    point[vm.f(r, c, a)] = v;
                }
            }
        }
    }
    for (i, counts) in sol.node_rentals.iter().enumerate() {
        for (u, &g) in counts.iter().enumerate() {
            point[vm.g(i, u)] = g;
        }
    }
    for (a, counts) in sol.link_rentals.iter().enumerate() {
        for (q, &h) in counts.iter().enumerate() {
            point[vm.h(a, q)] = h;
        }
    }
    point
}
