//! Text formats: instance documents, edge-list topologies, LP files, result
//! and plot CSVs, and solution documents. Every writer is deterministic.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::TopologySpec;
use crate::instance::{
    Arc, BulkCatalog, Instance, SubstrateNetwork, SubstrateNode, TrafficMatrix, VirtualNode, VnRequest,
};
use crate::model::{ColumnKind, MilpModel, ObjectiveSense, RabMode, Routing, Sense, VarMap};
use crate::solver::MilpStatus;
use crate::verify::EmbeddingSolution;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceDoc {
    substrate: SubstrateDoc,
    catalog: BulkCatalog,
    requests: Vec<RequestDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SubstrateDoc {
    nodes: Vec<NodeDoc>,
    arcs: Vec<ArcDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeDoc {
    id: usize,
    #[serde(rename = "B")]
    capacity: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArcDoc {
    i: usize,
    j: usize,
    #[serde(rename = "K")]
    capacity: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RequestDoc {
    id: usize,
    nodes: Vec<VirtualNodeDoc>,
    demands: Vec<DemandDoc>,
    profit: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VirtualNodeDoc {
    id: usize,
    t: f64,
    locality: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DemandDoc {
    v: usize,
    w: usize,
    d: f64,
}

/// Parses and validates an instance document.
pub fn read_instance(text: &str) -> Result<Instance> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let doc: InstanceDoc = serde_path_to_error::deserialize(de).map_err(|e| Error::Parse {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    let substrate = SubstrateNetwork::new(
        doc.substrate
            .nodes
            .into_iter()
            .map(|n| SubstrateNode { id: n.id, capacity: n.capacity })
            .collect(),
        doc.substrate
            .arcs
            .into_iter()
            .map(|a| Arc { tail: a.i, head: a.j, capacity: a.capacity })
            .collect(),
    );
    let mut requests = Vec::with_capacity(doc.requests.len());
    for (r, req) in doc.requests.into_iter().enumerate() {
        let n = req.nodes.len();
        let mut traffic = TrafficMatrix::zeros(n);
        for (k, dem) in req.demands.iter().enumerate() {
            let path = format!("requests[{r}].demands[{k}]");
            if dem.v >= n || dem.w >= n {
                return Err(Error::Parse {
                    path,
                    message: format!("virtual node pair ({}, {}) out of range for {n} nodes", dem.v, dem.w),
                });
            }
            if traffic.get(dem.v, dem.w) != 0.0 {
                return Err(Error::Parse {
                    path,
                    message: format!("duplicate demand for pair ({}, {})", dem.v, dem.w),
                });
            }
            traffic.set(dem.v, dem.w, dem.d);
        }
        requests.push(VnRequest {
            id: req.id,
            nodes: req
                .nodes
                .into_iter()
                .map(|v| VirtualNode { id: v.id, requirement: v.t, locality: v.locality })
                .collect(),
            traffic,
            profit: req.profit,
        });
    }
    let inst = Instance { substrate, catalog: doc.catalog, requests };
    let problems = inst.validate();
    if !problems.is_empty() {
        return Err(Error::InvalidInstance(problems));
    }
    Ok(inst)
}

pub fn write_instance(inst: &Instance) -> String {
    let doc = InstanceDoc {
        substrate: SubstrateDoc {
            nodes: inst
                .substrate
                .nodes()
                .iter()
                .map(|n| NodeDoc { id: n.id, capacity: n.capacity })
                .collect(),
            arcs: inst
                .substrate
                .arcs()
                .iter()
                .map(|a| ArcDoc { i: a.tail, j: a.head, capacity: a.capacity })
                .collect(),
        },
        catalog: inst.catalog.clone(),
        requests: inst
            .requests
            .iter()
            .map(|r| RequestDoc {
                id: r.id,
                nodes: r
                    .nodes
                    .iter()
                    .map(|v| VirtualNodeDoc { id: v.id, t: v.requirement, locality: v.locality.clone() })
                    .collect(),
                demands: r.traffic.entries().map(|(v, w, d)| DemandDoc { v, w, d }).collect(),
                profit: r.profit,
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("instance documents always serialize");
    s.push('\n');
    s
}

/// Reads an undirected topology: one `u v` pair of 0-based node ids per
/// line. Blank lines and `#` comments are skipped.
pub fn read_edge_list(text: &str) -> Result<TopologySpec> {
    let mut edges = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse { path: format!("line {}", ln + 1), message };
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 2 {
            return Err(err(format!("expected two node ids, found {} tokens", toks.len())));
        }
        let parse = |t: &str| t.parse::<usize>().map_err(|_| err(format!("'{t}' is not a node id")));
        let (u, v) = (parse(toks[0])?, parse(toks[1])?);
        if u == v {
            return Err(err(format!("self-loop on node {u}")));
        }
        edges.push((u, v));
    }
    if edges.is_empty() {
        return Err(Error::Parse { path: "edge list".into(), message: "no edges".into() });
    }
    Ok(TopologySpec::EdgeList { edges })
}

const LP_LINE_WIDTH: usize = 255;

/// Appends `terms` after `head`, breaking lines before they exceed the
/// width. Continuation lines start with a space.
fn push_wrapped(out: &mut String, head: &str, terms: &[String], tail: &str) {
    let mut line = if head.is_empty() { String::new() } else { format!(" {head}") };
    for t in terms.iter().map(String::as_str).chain((!tail.is_empty()).then_some(tail)) {
        if line.len() + 1 + t.len() > LP_LINE_WIDTH && line.trim() != "" {
            out.push_str(&line);
            out.push('\n');
            line = String::new();
        }
        line.push(' ');
        line.push_str(t);
    }
    out.push_str(&line);
    out.push('\n');
}

fn lp_terms(coeffs: &[(usize, f64)], names: &[String]) -> Vec<String> {
    let mut terms = Vec::with_capacity(coeffs.len());
    for (k, &(j, a)) in coeffs.iter().enumerate() {
        let t = if a < 0.0 {
            format!("- {} {}", -a, names[j])
        } else if k == 0 {
            format!("{a} {}", names[j])
        } else {
            format!("+ {a} {}", names[j])
        };
        terms.push(t);
    }
    if terms.is_empty() && !names.is_empty() {
        terms.push(format!("0 {}", names[0]));
    }
    terms
}

fn lp_number(v: f64) -> String {
    if v == f64::INFINITY {
        "+inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

/// LP-file text for `m`, naming columns and rows from `vm`.
pub fn write_lp(m: &MilpModel, vm: &VarMap) -> String {
    let names: Vec<String> = vm.tags().iter().map(|t| t.to_string()).collect();
    let mut out = String::new();
    out.push_str(match m.sense {
        ObjectiveSense::Maximize => "Maximize\n",
        ObjectiveSense::Minimize => "Minimize\n",
    });
    let mut obj = m.objective.clone();
    obj.sort_by_key(|t| t.0);
    push_wrapped(&mut out, "obj:", &lp_terms(&obj, &names), "");
    out.push_str("Subject To\n");
    for (k, row) in m.rows.iter().enumerate() {
        let sense = match row.sense {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        };
        let head = format!("{}:", vm.row_tag(k));
        push_wrapped(&mut out, &head, &lp_terms(&row.coeffs, &names), &format!("{sense} {}", row.rhs));
    }
    out.push_str("Bounds\n");
    for (j, c) in m.columns.iter().enumerate() {
        if c.kind == ColumnKind::Binary && c.lower == 0.0 && c.upper == 1.0 {
            continue;
        }
        if c.lower == c.upper {
            let _ = writeln!(out, " {} = {}", names[j], lp_number(c.lower));
        } else {
            let _ = writeln!(out, " {} <= {} <= {}", lp_number(c.lower), names[j], lp_number(c.upper));
        }
    }
    for (title, kind) in [("Generals", ColumnKind::Integer), ("Binaries", ColumnKind::Binary)] {
        let list: Vec<String> = m
            .columns
            .iter()
            .enumerate()
            .filter(|(_, c)| c.kind == kind)
            .map(|(j, _)| names[j].clone())
            .collect();
        if !list.is_empty() {
            out.push_str(title);
            out.push('\n');
            push_wrapped(&mut out, "", &list, "");
        }
    }
    out.push_str("End\n");
    out
}

/// Physical network family of an experiment cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubstrateKind {
    LongHaul,
    DataCenter,
}

impl SubstrateKind {
    pub fn of(spec: &TopologySpec) -> Self {
        match spec {
            TopologySpec::TransitStub { .. } => SubstrateKind::DataCenter,
            TopologySpec::EdgeList { .. } => SubstrateKind::LongHaul,
        }
    }
}

/// One row of the results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub instance: String,
    pub substrate: SubstrateKind,
    pub requests: usize,
    pub scaling: f64,
    pub routing: Routing,
    pub rab: RabMode,
    pub profit: f64,
    pub status: MilpStatus,
    /// Wall-clock seconds spent in the solve call.
    pub elapsed: f64,
    pub gap: f64,
    pub baseline_profit: Option<f64>,
    /// Whether every baseline covering fits within capacity.
    pub baseline_feasible: Option<bool>,
    /// Percentage improvement over the baseline.
    pub impr: Option<f64>,
}

impl ExperimentRecord {
    /// `100 (profit - baseline) / |baseline|`, undefined for a zero baseline.
    pub fn improvement(profit: f64, baseline: f64) -> Option<f64> {
        (baseline != 0.0).then(|| 100.0 * (profit - baseline) / baseline.abs())
    }
}

pub fn write_results(records: &[ExperimentRecord]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record([
        "instance",
        "substrate",
        "requests",
        "scaling",
        "routing",
        "rab",
        "profit",
        "status",
        "elapsed",
        "gap",
        "baseline_profit",
        "baseline_feasible",
        "impr",
    ])?;
    for r in records {
        w.serialize(r)?;
    }
    finish(w)
}

pub fn read_results(text: &str) -> Result<Vec<ExperimentRecord>> {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    rd.deserialize().map(|r| r.map_err(Error::from)).collect()
}

/// Mean profit of one (Req, Scal, routing, rab) group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub routing: Routing,
    pub rab: RabMode,
    pub scaling: f64,
    pub requests: usize,
    pub mean_profit: f64,
    pub count: usize,
}

/// Groups ordered by routing, rab, scaling and then request count.
pub fn plot_rows(records: &[ExperimentRecord]) -> Vec<PlotRow> {
    let key = |r: &ExperimentRecord| {
        (
            r.routing == Routing::Splittable,
            r.rab == RabMode::Relaxed,
            r.scaling.to_bits(),
            r.requests,
        )
    };
    let mut groups: BTreeMap<(bool, bool, u64, usize), (&ExperimentRecord, f64, usize)> = BTreeMap::new();
    for r in records {
        let e = groups.entry(key(r)).or_insert((r, 0.0, 0));
        e.1 += r.profit;
        e.2 += 1;
    }
    let mut rows: Vec<PlotRow> = groups
        .into_values()
        .map(|(r, sum, count)| PlotRow {
            routing: r.routing,
            rab: r.rab,
            scaling: r.scaling,
            requests: r.requests,
            mean_profit: sum / count as f64,
            count,
        })
        .collect();
    rows.sort_by(|a, b| {
        (a.routing == Routing::Splittable, a.rab == RabMode::Relaxed)
            .cmp(&(b.routing == Routing::Splittable, b.rab == RabMode::Relaxed))
            .then(a.scaling.total_cmp(&b.scaling))
            .then(a.requests.cmp(&b.requests))
    });
    rows
}

pub fn write_plot_data(records: &[ExperimentRecord]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(["routing", "rab", "scaling", "requests", "mean_profit", "count"])?;
    for row in plot_rows(records) {
        w.serialize(row)?;
    }
    finish(w)
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn write_solution(sol: &EmbeddingSolution) -> String {
    let mut s = serde_json::to_string_pretty(sol).expect("solutions always serialize");
    s.push('\n');
    s
}

pub fn read_solution(text: &str) -> Result<EmbeddingSolution> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| Error::Parse {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })
}
