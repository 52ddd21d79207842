use proptest::prelude::*;

use super::*;
use crate::generator::{gen_instance, GeneratorConfig, TopologySpec};
use crate::instance::{BulkCatalog, Instance, SubstrateNetwork, SubstrateNode, TrafficMatrix, VirtualNode, VnRequest};
use crate::model::tests::toy;
use crate::model::{build_model, decode, ModelConfig, RabMode, Routing, Sense};
use crate::verify::{brute_force_optimum, check_solution};

fn params(engine: LpEngine) -> SolveParams {
    SolveParams {
        engine,
        ..SolveParams::default()
    }
}

fn reference_lp(model: &MilpModel) -> Option<f64> {
    let dir = match model.sense {
        ObjectiveSense::Maximize => microlp::OptimizationDirection::Maximize,
        ObjectiveSense::Minimize => microlp::OptimizationDirection::Minimize,
    };
    let mut p = microlp::Problem::new(dir);
    let obj = model.objective_dense();
    let vars: Vec<_> = model
        .columns
        .iter()
        .zip(&obj)
        .map(|(c, &o)| p.add_var(o, (c.lower, c.upper)))
        .collect();
    for r in &model.rows {
        let expr: Vec<_> = r.coeffs.iter().map(|&(j, a)| (vars[j], a)).collect();
        let op = match r.sense {
            Sense::Le => microlp::ComparisonOp::Le,
            Sense::Ge => microlp::ComparisonOp::Ge,
            Sense::Eq => microlp::ComparisonOp::Eq,
        };
        p.add_constraint(expr.as_slice(), op, r.rhs);
    }
    p.solve().ok().and_then(|out| out.solution().map(|s| s.objective()))
}

/// Best objective over every basic point: each choice of `n` tight
/// constraints (rows or bounds) solved by Gaussian elimination.
fn vertex_oracle(model: &MilpModel) -> Option<f64> {
    let n = model.num_cols();
    let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
    for r in &model.rows {
        let mut a = vec![0.0; n];
        for &(j, v) in &r.coeffs {
            a[j] += v;
        }
        planes.push((a, r.rhs));
    }
    for (j, c) in model.columns.iter().enumerate() {
        for b in [c.lower, c.upper] {
            let mut a = vec![0.0; n];
            a[j] = 1.0;
            planes.push((a, b));
        }
    }
    let obj = model.objective_dense();
    let mut best: Option<f64> = None;
    let mut pick = vec![0usize; n];
    fn rec(
        k: usize,
        from: usize,
        pick: &mut Vec<usize>,
        planes: &[(Vec<f64>, f64)],
        model: &MilpModel,
        obj: &[f64],
        best: &mut Option<f64>,
    ) {
        let n = pick.len();
        if k == n {
            let mut a: Vec<Vec<f64>> = pick
                .iter()
                .map(|&p| {
                    let mut row = planes[p].0.clone();
                    row.push(planes[p].1);
                    row
                })
                .collect();
            for c in 0..n {
                let Some(piv) = (c..n).max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs())) else {
                    return;
                };
                if a[piv][c].abs() < 1e-9 {
                    return;
                }
                a.swap(c, piv);
                for r in 0..n {
                    if r != c {
                        let f = a[r][c] / a[c][c];
                        for k in c..=n {
                            a[r][k] -= f * a[c][k];
                        }
                    }
                }
            }
            let x: Vec<f64> = (0..n).map(|i| a[i][n] / a[i][i]).collect();
            let inside = model
                .columns
                .iter()
                .zip(&x)
                .all(|(c, &v)| v >= c.lower - 1e-7 && v <= c.upper + 1e-7);
            if inside && model.max_violation(&x) <= 1e-7 {
                let z: f64 = obj.iter().zip(&x).map(|(c, v)| c * v).sum();
                let better = match (model.sense, *best) {
                    (_, None) => true,
                    (ObjectiveSense::Maximize, Some(b)) => z > b,
                    (ObjectiveSense::Minimize, Some(b)) => z < b,
                };
                if better {
                    *best = Some(z);
                }
            }
            return;
        }
        for p in from..planes.len() {
            pick[k] = p;
            rec(k + 1, p + 1, pick, planes, model, obj, best);
        }
    }
    rec(0, 0, &mut pick, &planes, model, &obj, &mut best);
    best
}

/// Exhaustive search over all integer assignments of a small bounded model.
fn integer_oracle(model: &MilpModel) -> Option<f64> {
    let n = model.num_cols();
    let mut x: Vec<f64> = model.columns.iter().map(|c| c.lower).collect();
    let mut best: Option<f64> = None;
    loop {
        if model.max_violation(&x) <= 1e-9 {
            let z = model.objective_value(&x);
            if best.is_none_or(|b| z > b) {
                best = Some(z);
            }
        }
        let mut k = 0;
        loop {
            if k == n {
                return best;
            }
            if x[k] < model.columns[k].upper {
                x[k] += 1.0;
                break;
            }
            x[k] = model.columns[k].lower;
            k += 1;
        }
    }
}

#[test]
fn single_bounded_column() {
    for engine in [LpEngine::Dense, LpEngine::Sparse] {
        let mut m = MilpModel::new(ObjectiveSense::Maximize);
        let x = m.add_column(ColumnKind::Continuous, 0.0, 10.0, 1.0);
        m.add_row(vec![(x, 1.0)], Sense::Le, 3.0);
        let lp = solve_lp(&m, &params(engine));
        assert_eq!(lp.status, LpStatus::Optimal);
        assert!((lp.objective - 3.0).abs() < 1e-9);
        assert!((lp.values[0] - 3.0).abs() < 1e-9);
    }
}

#[test]
fn contradictory_rows_are_infeasible() {
    for engine in [LpEngine::Dense, LpEngine::Sparse] {
        let mut m = MilpModel::new(ObjectiveSense::Maximize);
        let x = m.add_column(ColumnKind::Continuous, 0.0, 10.0, 1.0);
        m.add_row(vec![(x, 1.0)], Sense::Le, 1.0);
        m.add_row(vec![(x, 1.0)], Sense::Ge, 2.0);
        assert_eq!(solve_lp(&m, &params(engine)).status, LpStatus::Infeasible);
        let r = solve_milp(&m, &params(engine)).unwrap();
        assert_eq!(r.status, MilpStatus::Infeasible);
        assert!(r.incumbent.is_none());
    }
}

#[test]
fn unbounded_lp_is_reported() {
    let mut m = MilpModel::new(ObjectiveSense::Maximize);
    let x = m.add_column(ColumnKind::Continuous, 0.0, f64::INFINITY, 1.0);
    m.add_row(vec![(x, -1.0)], Sense::Le, 0.0);
    assert_eq!(solve_lp(&m, &SolveParams::default()).status, LpStatus::Unbounded);
}

#[test]
fn toy_relaxation_matches_reference() {
    let reference = {
        let (m, _) = build_model(&toy(), ModelConfig::default()).unwrap();
        reference_lp(&m.relaxed()).unwrap()
    };
    for routing in [Routing::SinglePath, Routing::Splittable] {
        for rab in [RabMode::Integral, RabMode::Relaxed] {
            let (m, _) = build_model(&toy(), ModelConfig { routing, rab }).unwrap();
            assert_eq!(m.num_cols(), 32);
            let want = reference_lp(&m.relaxed()).unwrap();
            assert!((want - reference).abs() < 1e-6);
            for engine in [LpEngine::Dense, LpEngine::Sparse] {
                let lp = solve_lp(&m, &params(engine));
                assert_eq!(lp.status, LpStatus::Optimal);
                assert!((lp.objective - want).abs() < 1e-6, "{engine:?}: {} vs {want}", lp.objective);
                assert!(m.max_violation(&lp.values) < 1e-6);
            }
        }
    }
}

fn tiny(seed: u64) -> Instance {
    let cfg = GeneratorConfig {
        seed,
        num_requests: 2,
        max_request_nodes: 3,
        ..GeneratorConfig::default()
    };
    let spec = TopologySpec::EdgeList {
        edges: vec![(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (0, 2)],
    };
    gen_instance(&spec, &cfg).unwrap()
}

#[test]
fn engines_agree_on_generated_relaxations() {
    for seed in 0..5 {
        let inst = tiny(seed);
        for routing in [Routing::SinglePath, Routing::Splittable] {
            let (m, _) = build_model(&inst, ModelConfig { routing, rab: RabMode::Integral }).unwrap();
            let reference = reference_lp(&m.relaxed()).unwrap();
            for engine in [LpEngine::Dense, LpEngine::Sparse] {
                let lp = solve_lp(&m, &params(engine));
                assert_eq!(lp.status, LpStatus::Optimal, "{engine:?}");
                assert!((lp.objective - reference).abs() < 1e-6 * (1.0 + reference.abs()));
            }
        }
    }
    let cfg = GeneratorConfig {
        seed: 5,
        num_requests: 2,
        ..GeneratorConfig::default()
    };
    let inst = gen_instance(&TopologySpec::desk_scale(), &cfg).unwrap();
    let (m, _) = build_model(&inst, ModelConfig::default()).unwrap();
    let sparse = solve_lp(&m, &params(LpEngine::Sparse));
    let reference = reference_lp(&m.relaxed()).unwrap();
    assert_eq!(sparse.status, LpStatus::Optimal);
    assert!((sparse.objective - reference).abs() < 1e-6 * (1.0 + reference.abs()));
}

#[test]
fn zero_requests_give_zero() {
    let mut inst = toy();
    inst.requests.clear();
    let (m, vm) = build_model(&inst, ModelConfig::default()).unwrap();
    let r = solve_milp(&m, &SolveParams::default()).unwrap();
    assert_eq!(r.status, MilpStatus::Optimal);
    assert_eq!(r.objective, 0.0);
    let x = r.incumbent.unwrap();
    assert!(x.iter().all(|&v| v == 0.0));
    assert_eq!(vm.num_requests(), 0);
}

#[test]
fn empty_locality_forces_rejection() {
    let mut inst = toy();
    for v in &mut inst.requests[0].nodes {
        v.locality.clear();
    }
    let (m, vm) = build_model(&inst, ModelConfig::default()).unwrap();
    let r = solve_milp(&m, &SolveParams::default()).unwrap();
    assert_eq!(r.status, MilpStatus::Optimal);
    assert_eq!(r.objective, 0.0);
    assert_eq!(r.incumbent.unwrap()[vm.y(0)], 0.0);
}

#[test]
fn toy_optimum_matches_oracle_in_every_mode() {
    let inst = toy();
    for routing in [Routing::SinglePath, Routing::Splittable] {
        for rab in [RabMode::Integral, RabMode::Relaxed] {
            let cfg = ModelConfig { routing, rab };
            let (m, vm) = build_model(&inst, cfg).unwrap();
            let p = SolveParams {
                gap: 0.0,
                ..SolveParams::default()
            };
            let r = solve_milp(&m, &p).unwrap();
            assert_eq!(r.status, MilpStatus::Optimal);
            let want = brute_force_optimum(&inst, cfg).unwrap();
            assert!((r.objective - want).abs() < 1e-6, "{cfg:?}: {} vs {want}", r.objective);
            let sol = decode(&inst, &vm, r.incumbent.as_ref().unwrap()).unwrap();
            assert!(check_solution(&inst, &sol, cfg, 1e-6).is_empty());
        }
    }
}

#[test]
fn single_node_instance_solves_to_zero() {
    let inst = Instance {
        substrate: SubstrateNetwork::new(vec![SubstrateNode { id: 0, capacity: 10.0 }], vec![]),
        catalog: BulkCatalog {
            node_bulks: vec![crate::instance::Bulk::new(1.0, 1.0)],
            link_bulks: vec![crate::instance::Bulk::new(1.0, 1.0)],
        },
        requests: vec![VnRequest {
            id: 0,
            nodes: vec![VirtualNode { id: 0, requirement: 4.0, locality: vec![0] }],
            traffic: TrafficMatrix::zeros(1),
            profit: 3.0,
        }],
    };
    // Renting 4 units costs more than the request pays.
    let (m, _) = build_model(&inst, ModelConfig::default()).unwrap();
    let r = solve_milp(&m, &SolveParams::default()).unwrap();
    assert_eq!(r.status, MilpStatus::Optimal);
    assert_eq!(r.objective, 0.0);
}

#[test]
fn relative_gap_conventions() {
    assert_eq!(relative_gap(5.0, 0.0), f64::INFINITY);
    assert_eq!(relative_gap(0.0, 0.0), 0.0);
    assert_eq!(relative_gap(-1.0, -2.0), 0.0);
    assert!((relative_gap(110.0, 100.0) - 0.1).abs() < 1e-12);
    assert_eq!(relative_gap(90.0, 100.0), 0.0);
}

#[test]
fn bad_parameters_are_rejected() {
    let m = MilpModel::new(ObjectiveSense::Maximize);
    for p in [
        SolveParams { gap: -0.1, ..SolveParams::default() },
        SolveParams { time_limit: 0.0, ..SolveParams::default() },
        SolveParams { feasibility_tol: 0.0, ..SolveParams::default() },
    ] {
        assert!(solve_milp(&m, &p).is_err());
    }
}

#[derive(Default)]
struct Recorder(Vec<(usize, f64, f64, f64)>);

impl TraceSink for Recorder {
    fn node(&mut self, depth: usize, bound: f64, incumbent: f64, gap: f64) {
        self.0.push((depth, bound, incumbent, gap));
    }
}

#[test]
fn trace_bound_never_increases_and_stays_above_incumbent() {
    let cfg = GeneratorConfig {
        seed: 3,
        num_requests: 2,
        ..GeneratorConfig::default()
    };
    let inst = gen_instance(&TopologySpec::desk_scale(), &cfg).unwrap();
    let (m, _) = build_model(&inst, ModelConfig::default()).unwrap();
    let mut rec = Recorder::default();
    let p = SolveParams {
        node_limit: Some(40),
        ..SolveParams::default()
    };
    let r = solve_milp_hooked(
        &m,
        &p,
        Hooks {
            trace: Some(&mut rec),
            ..Hooks::default()
        },
    )
    .unwrap();
    assert!(!rec.0.is_empty());
    assert_eq!(rec.0[0].0, 0);
    for w in rec.0.windows(2) {
        assert!(w[1].1 <= w[0].1 + 1e-9);
        assert!(w[1].2 >= w[0].2 - 1e-9);
    }
    for &(_, b, i, _) in &rec.0 {
        assert!(b >= i - 1e-9);
    }
    assert!(r.bound >= r.objective - 1e-9);
    assert!(r.nodes <= 40);
}

#[test]
fn starting_point_is_kept() {
    let mut m = MilpModel::new(ObjectiveSense::Maximize);
    let a = m.add_column(ColumnKind::Binary, 0.0, 1.0, 3.0);
    let b = m.add_column(ColumnKind::Binary, 0.0, 1.0, 2.0);
    m.add_row(vec![(a, 2.0), (b, 2.0)], Sense::Le, 3.0);
    let p = SolveParams {
        node_limit: Some(1),
        ..SolveParams::default()
    };
    let r = solve_milp_hooked(
        &m,
        &p,
        Hooks {
            starts: vec![vec![0.0, 1.0], vec![1.0, 1.0]],
            ..Hooks::default()
        },
    )
    .unwrap();
    assert_eq!(r.status, MilpStatus::NodeLimit);
    assert_eq!(r.objective, 2.0);
}

#[test]
fn minimization_reports_original_sense() {
    let mut m = MilpModel::new(ObjectiveSense::Minimize);
    let a = m.add_column(ColumnKind::Integer, 0.0, 10.0, 3.0);
    let b = m.add_column(ColumnKind::Integer, 0.0, 10.0, 5.0);
    m.add_row(vec![(a, 2.0), (b, 3.0)], Sense::Ge, 7.0);
    let r = solve_milp(&m, &SolveParams { gap: 0.0, ..SolveParams::default() }).unwrap();
    assert_eq!(r.status, MilpStatus::Optimal);
    // a = 2, b = 1 costs 11.
    assert!((r.objective - 11.0).abs() < 1e-9);
    assert!((r.bound - 11.0).abs() < 1e-9);
}

#[test]
fn time_limit_returns_promptly() {
    let cfg = GeneratorConfig {
        seed: 1,
        num_requests: 3,
        ..GeneratorConfig::default()
    };
    let inst = gen_instance(&TopologySpec::desk_scale(), &cfg).unwrap();
    let (m, _) = build_model(&inst, ModelConfig::default()).unwrap();
    let p = SolveParams {
        gap: 0.0,
        time_limit: 0.3,
        ..SolveParams::default()
    };
    let t = Instant::now();
    let r = solve_milp(&m, &p).unwrap();
    assert!(t.elapsed().as_secs_f64() < 1.5);
    assert_eq!(r.status, MilpStatus::TimeLimit);
    assert!(r.bound >= r.objective - 1e-9);
    let x = r.incumbent.unwrap();
    assert!(m.max_violation(&x) <= 1e-7);
}

#[test]
fn sparse_warm_starts_match_cold_dense_solves() {
    // Same tree, different engines: the optimum must agree.
    let inst = tiny(8);
    let (m, _) = build_model(&inst, ModelConfig::default()).unwrap();
    let exact = SolveParams {
        gap: 0.0,
        ..SolveParams::default()
    };
    let a = solve_milp(&m, &SolveParams { engine: LpEngine::Dense, ..exact.clone() }).unwrap();
    let b = solve_milp(&m, &SolveParams { engine: LpEngine::Sparse, ..exact }).unwrap();
    assert_eq!(a.status, MilpStatus::Optimal);
    assert_eq!(b.status, MilpStatus::Optimal);
    assert!((a.objective - b.objective).abs() < 1e-6);
}

fn small_lp() -> impl Strategy<Value = MilpModel> {
    (1usize..=3, 1usize..=3).prop_flat_map(|(n, m)| {
        (
            prop::collection::vec((-5i32..=5, 0i32..=2, 1i32..=6), n),
            prop::collection::vec((prop::collection::vec(-4i32..=4, n), 0usize..3, -6i32..=12), m),
            any::<bool>(),
        )
            .prop_map(|(cols, rows, maximize)| {
                let mut model = MilpModel::new(if maximize {
                    ObjectiveSense::Maximize
                } else {
                    ObjectiveSense::Minimize
                });
                for (c, lo, width) in cols {
                    model.add_column(ColumnKind::Integer, lo as f64, (lo + width) as f64, c as f64);
                }
                for (coeffs, s, rhs) in rows {
                    let sense = [Sense::Le, Sense::Ge, Sense::Eq][s];
                    let coeffs: Vec<(usize, f64)> = coeffs
                        .into_iter()
                        .enumerate()
                        .filter(|&(_, a)| a != 0)
                        .map(|(j, a)| (j, a as f64))
                        .collect();
                    model.add_row(coeffs, sense, rhs as f64);
                }
                model
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn lp_engines_match_the_vertex_oracle(model in small_lp()) {
        let want = vertex_oracle(&model);
        for engine in [LpEngine::Dense, LpEngine::Sparse] {
            let lp = solve_lp(&model, &params(engine));
            match want {
                None => prop_assert_eq!(lp.status, LpStatus::Infeasible),
                Some(z) => {
                    prop_assert_eq!(lp.status, LpStatus::Optimal);
                    prop_assert!((lp.objective - z).abs() < 1e-6, "{:?}: {} vs {}", engine, lp.objective, z);
                    prop_assert!(model.max_violation(&lp.values) < 1e-6);
                }
            }
        }
    }

    #[test]
    fn milp_matches_enumeration(model in small_lp()) {
        let mut max_model = model.clone();
        if model.sense == ObjectiveSense::Minimize {
            max_model.sense = ObjectiveSense::Maximize;
            for t in &mut max_model.objective {
                t.1 = -t.1;
            }
        }
        let want = integer_oracle(&max_model);
        let p = SolveParams { gap: 0.0, ..SolveParams::default() };
        let r = solve_milp(&model, &p).unwrap();
        match want {
            None => prop_assert_eq!(r.status, MilpStatus::Infeasible),
            Some(z) => {
                let got = max_model.objective_value(r.incumbent.as_ref().unwrap());
                if r.status == MilpStatus::GapReached {
                    // A nonpositive bound and incumbent count as a zero gap.
                    prop_assert_eq!(model.sense, ObjectiveSense::Maximize);
                    prop_assert!(r.bound <= 0.0 && got <= 0.0 && r.bound >= z - 1e-6);
                } else {
                    prop_assert_eq!(r.status, MilpStatus::Optimal);
                    prop_assert!((got - z).abs() < 1e-6, "{} vs {}", got, z);
                }
                prop_assert!(model.max_violation(r.incumbent.as_ref().unwrap()) <= 1e-7);
                prop_assert!(model.max_fractionality(r.incumbent.as_ref().unwrap()) <= 1e-6);
            }
        }
    }
}
