//! Point-by-point comparison of the circuit against independent formulas and
//! against the vector field of [`crate::dynamics`].

use std::io::Write;

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::circuit::blocks::{self, BlockConstants};
use crate::circuit::graph::Graph;
use crate::circuit::modules::{circuit_derivatives, clause_module};
use crate::dynamics::{
    clause_value, derivatives, gradient_term, rigidity_term, softmax_weights, DmmParams, DmmState,
};
use crate::error::{Error, Result};
use crate::rng::StreamRng;
use crate::sat::{generate_planted, Clause, CnfFormula};

/// Relative tolerance of the single-block suites.
pub const BLOCK_REL_TOL: f64 = 1e-12;
/// Relative tolerance of the composed suites.
pub const MODULE_REL_TOL: f64 = 1e-3;
/// Absolute floor of the composed suites.
pub const MODULE_ABS_TOL: f64 = 1e-6;

pub const GRID_POINTS: usize = 1000;
pub const RANDOM_POINTS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRow {
    pub suite: String,
    pub case: String,
    pub index: usize,
    pub expected: f64,
    pub actual: f64,
    pub abs_err: f64,
    pub rel_err: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteSummary {
    pub suite: String,
    pub points: usize,
    pub failed: usize,
    pub max_rel_err: f64,
}

#[derive(Default)]
struct Rows(Vec<CheckRow>);

impl Rows {
    fn push(
        &mut self,
        suite: &str,
        case: &str,
        index: usize,
        expected: f64,
        actual: f64,
        rel_tol: f64,
        abs_tol: f64,
    ) {
        let abs_err = (actual - expected).abs();
        let rel_err = if expected != 0.0 {
            abs_err / expected.abs()
        } else {
            abs_err
        };
        let pass = abs_err == 0.0 || abs_err <= abs_tol || abs_err <= rel_tol * expected.abs();
        self.0.push(CheckRow {
            suite: suite.to_string(),
            case: case.to_string(),
            index,
            expected,
            actual,
            abs_err,
            rel_err,
            pass,
        });
    }

    fn block(&mut self, suite: &str, case: &str, index: usize, expected: f64, actual: f64) {
        self.push(suite, case, index, expected, actual, BLOCK_REL_TOL, 0.0);
    }

    fn module(&mut self, suite: &str, case: &str, index: usize, expected: f64, actual: f64) {
        self.push(
            suite,
            case,
            index,
            expected,
            actual,
            MODULE_REL_TOL,
            MODULE_ABS_TOL,
        );
    }
}

fn lin(i: usize, n: usize, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * i as f64 / (n - 1) as f64
}

fn clip(k: &BlockConstants<f64>, x: f64) -> f64 {
    x.clamp(-k.rail, k.rail)
}

fn block_suites(k: &BlockConstants<f64>, rows: &mut Rows) -> Result<()> {
    // 40 x 25 grids over [-3, 3], wide enough to exercise the rails
    for i in 0..GRID_POINTS {
        let a = lin(i % 40, 40, -3.0, 3.0);
        let b = lin(i / 40, 25, -3.0, 3.0);
        rows.block("adder", "a+b", i, clip(k, a + b), blocks::adder(k, a, b));
        rows.block(
            "subtractor",
            "a-b",
            i,
            clip(k, a - b),
            blocks::subtractor(k, a, b),
        );
        rows.block(
            "multiplier",
            "a*b",
            i,
            clip(k, a * b),
            blocks::multiplier(k, a, b),
        );
    }
    for i in 0..GRID_POINTS {
        let current = 10f64.powf(lin(i, GRID_POINTS, -9.0, -3.0));
        let expected = clip(
            k,
            k.log_gain * (current / k.log_ref_current).ln() / std::f64::consts::LN_10,
        );
        rows.block("log_amp", "log", i, expected, blocks::log_amp(k, current)?);
    }
    for i in 0..GRID_POINTS {
        let v = lin(i, GRID_POINTS, -0.15, 0.6);
        let expected = clip(
            k,
            k.antilog_scale * 10f64.powf(-v / (k.antilog_scale * std::f64::consts::LN_10)),
        );
        rows.block(
            "antilog_amp",
            "antilog",
            i,
            expected,
            blocks::antilog_amp(k, v),
        );
    }
    for i in 0..GRID_POINTS {
        let x = [
            lin(i % 10, 10, -0.1, 0.1),
            lin((i / 10) % 10, 10, -0.1, 0.1),
            lin(i / 100, 10, -0.1, 0.1),
        ];
        let reference = softmax_weights(&x.map(|xi| xi / k.v_thermal))?;
        let y = blocks::softmax_block(k, &x)?;
        for j in 0..3 {
            rows.block(
                "softmax",
                &format!("y{}", j + 1),
                i,
                reference[j] * k.multiplier_unit,
                y[j],
            );
        }
    }
    for i in 0..GRID_POINTS {
        let v = [
            lin(i % 10, 10, 0.0, 1.0),
            lin((i / 10) % 10, 10, 0.0, 1.0),
            lin(i / 100, 10, 0.0, 1.0),
        ];
        let top = if v[0] >= v[1] && v[0] >= v[2] {
            v[0]
        } else if v[1] >= v[2] {
            v[1]
        } else {
            v[2]
        };
        let c = blocks::comparator3(k, v);
        rows.block("comparator", "max", i, top, c.v_max);
        for j in 0..3 {
            let expected = if v[j] == top {
                top + k.v_diode
            } else {
                -k.rail
            };
            rows.block("comparator", &format!("b{}", j + 1), i, expected, c.b[j]);
        }
    }
    for i in 0..GRID_POINTS {
        let x = lin(i % 250, 250, -1.0, 1.0);
        let cp = if (i / 250) % 2 == 0 { k.rail } else { -k.rail };
        let cm = if i / 500 == 0 { k.rail } else { -k.rail };
        let expected = if (x >= 0.0 && cp > 0.0) || (x < 0.0 && cm > 0.0) {
            x
        } else {
            0.0
        };
        rows.block(
            "switch",
            "gate",
            i,
            expected,
            blocks::bidirectional_switch(x, cp, cm),
        );
    }
    Ok(())
}

/// Closed forms of one clause from the dynamics module, literals all positive
/// on variables 1..3.
struct ClauseReference {
    v_max: f64,
    rigid: [bool; 3],
    dxs: f64,
    dxl: f64,
    dv1: [f64; 3],
    dv2: [f64; 3],
    dv: [f64; 3],
}

fn clause_reference(l: [f64; 3], xs: f64, xl: f64, p: &DmmParams<f64>) -> Result<ClauseReference> {
    let clause = Clause::from_dimacs([1, 2, 3])?;
    let f = CnfFormula::new(3, vec![clause])?;
    let s = DmmState {
        v: l.to_vec(),
        xs: vec![xs],
        xl: vec![xl],
    };
    let d = derivatives(&f, &s, p)?;
    let mut out = ClauseReference {
        v_max: 1.0 - clause_value(&clause, &l),
        rigid: [false; 3],
        dxs: d.dxs[0],
        dxl: d.dxl[0],
        dv1: [0.0; 3],
        dv2: [0.0; 3],
        dv: [d.dv[0], d.dv[1], d.dv[2]],
    };
    for i in 0..3 {
        let var = i as u32 + 1;
        let g = gradient_term(&clause, var, &l)?;
        let r = rigidity_term(&clause, var, &l, p.tie_tol)?;
        out.rigid[i] = l[i] >= out.v_max - p.tie_tol;
        out.dv1[i] = xs * g + p.zeta * (1.0 - xs) * r;
        out.dv2[i] = (1.0 - xs) * r;
    }
    Ok(out)
}

fn clause_suites(
    p: &DmmParams<f64>,
    k: &BlockConstants<f64>,
    seed: u64,
    rows: &mut Rows,
) -> Result<()> {
    let mut rng = StreamRng::seed_from_u64(seed);
    for i in 0..RANDOM_POINTS {
        let l: [f64; 3] = [rng.random(), rng.random(), rng.random()];
        let xs: f64 = rng.random();
        let xl = rng.random_range(0.0..30.0);
        let o = clause_module(l, xs, xl, p, k)?;
        let r = clause_reference(l, xs, xl, p)?;
        rows.module("clause_module", "dxs", i, r.dxs, o.dxs);
        rows.module("clause_module", "dxl", i, r.dxl, o.dxl);
        for j in 0..3 {
            rows.module(
                "clause_module",
                &format!("dv1_{}", j + 1),
                i,
                r.dv1[j],
                o.dv1[j],
            );
            rows.module(
                "clause_module",
                &format!("dv2_{}", j + 1),
                i,
                r.dv2[j],
                o.dv2[j],
            );
            let dv = p.eta_gain * o.dv1[j] + o.dv2[j];
            rows.module("clause_module", &format!("dv_{}", j + 1), i, r.dv[j], dv);
        }
        rows.module("comparator_agreement", "v_max", i, r.v_max, o.v_max);
        for j in 0..3 {
            let flag = |b: bool| if b { 1.0 } else { 0.0 };
            rows.module(
                "comparator_agreement",
                &format!("b{}", j + 1),
                i,
                flag(r.rigid[j]),
                flag(o.b[j] > 0.0),
            );
        }
    }

    let mut index = 0;
    for c in [0.0, 0.05, 0.5, 1.0] {
        for j in 0..25 {
            let xl = j as f64;
            let direct = p.alpha * (-xl).exp() * (c - p.delta);
            let o = clause_module([1.0 - c, 0.0, 0.0], 0.5, xl, p, k)?;
            rows.module("log_sum_exp", &format!("C={c}"), index, direct, o.dxl);
            index += 1;
        }
    }
    Ok(())
}

fn graph_suite(
    graph: &Graph,
    p: &DmmParams<f64>,
    k: &BlockConstants<f64>,
    seed: u64,
    rows: &mut Rows,
) -> Result<()> {
    if graph.inputs() != ["l1", "l2", "l3", "xs", "xl"] {
        return Err(Error::InvalidArgument(format!(
            "clause graph must declare inputs l1 l2 l3 xs xl, found {:?}",
            graph.inputs()
        )));
    }
    let names = graph.output_names();
    let known = [
        "dxs", "dxl", "dv1_1", "dv1_2", "dv1_3", "dv2_1", "dv2_2", "dv2_3",
    ];
    if !names.iter().any(|n| known.contains(n)) {
        return Err(Error::InvalidArgument(format!(
            "clause graph has none of the outputs {known:?}"
        )));
    }
    let mut rng = StreamRng::seed_from_u64(seed);
    for i in 0..GRID_POINTS {
        let l: [f64; 3] = [rng.random(), rng.random(), rng.random()];
        let xs: f64 = rng.random();
        let xl = rng.random_range(0.0..30.0);
        let out = graph.eval(&[l[0], l[1], l[2], xs, xl], k)?;
        let r = clause_reference(l, xs, xl, p)?;
        for (name, &actual) in names.iter().zip(&out) {
            let expected = match *name {
                "dxs" => r.dxs,
                "dxl" => r.dxl,
                "dv1_1" => r.dv1[0],
                "dv1_2" => r.dv1[1],
                "dv1_3" => r.dv1[2],
                "dv2_1" => r.dv2[0],
                "dv2_2" => r.dv2[1],
                "dv2_3" => r.dv2[2],
                _ => continue,
            };
            rows.module("graph", name, i, expected, actual);
        }
    }
    Ok(())
}

fn circuit_suite(
    p: &DmmParams<f64>,
    k: &BlockConstants<f64>,
    seed: u64,
    rows: &mut Rows,
) -> Result<()> {
    let mut rng = StreamRng::seed_from_u64(seed);
    let mut index = 0;
    for (case, n) in [10usize, 20, 50].into_iter().enumerate() {
        let (f, _) = generate_planted(
            n,
            4.3,
            crate::sat::DEFAULT_P0,
            seed.wrapping_add(case as u64),
        )?;
        for _ in 0..10 {
            let s = DmmState {
                v: (0..f.n_vars()).map(|_| rng.random()).collect(),
                xs: (0..f.n_clauses()).map(|_| rng.random()).collect(),
                xl: (0..f.n_clauses())
                    .map(|_| rng.random_range(0.0..10.0))
                    .collect(),
            };
            let exact = derivatives(&f, &s, p)?;
            let circ = circuit_derivatives(&f, &s, p, k)?;
            for (name, e, a) in [
                ("dv", &exact.dv, &circ.dv),
                ("dxs", &exact.dxs, &circ.dxs),
                ("dxl", &exact.dxl, &circ.dxl),
            ] {
                for (&e, &a) in e.iter().zip(a.iter()) {
                    rows.module("circuit", &format!("N={n} {name}"), index, e, a);
                    index += 1;
                }
            }
        }
    }
    Ok(())
}

/// Runs every suite. The clause graph defaults to the built-in one.
pub fn blocks_check(graph: Option<&Graph>, seed: u64) -> Result<Vec<CheckRow>> {
    let k = BlockConstants::<f64>::default();
    let p = DmmParams::<f64>::default();
    let mut rows = Rows::default();
    block_suites(&k, &mut rows)?;
    clause_suites(&p, &k, seed, &mut rows)?;
    let builtin;
    let graph = match graph {
        Some(g) => g,
        None => {
            builtin = Graph::parse(crate::circuit::graph::CLAUSE_GRAPH)?;
            &builtin
        }
    };
    graph_suite(graph, &p, &k, seed ^ 1, &mut rows)?;
    circuit_suite(&p, &k, seed ^ 2, &mut rows)?;
    Ok(rows.0)
}

/// Per-suite counts in order of first appearance.
pub fn summarize(rows: &[CheckRow]) -> Vec<SuiteSummary> {
    let mut out: Vec<SuiteSummary> = Vec::new();
    for r in rows {
        let entry = match out.iter_mut().position(|s| s.suite == r.suite) {
            Some(i) => &mut out[i],
            None => {
                out.push(SuiteSummary {
                    suite: r.suite.clone(),
                    points: 0,
                    failed: 0,
                    max_rel_err: 0.0,
                });
                out.last_mut().unwrap()
            }
        };
        entry.points += 1;
        entry.failed += usize::from(!r.pass);
        if r.abs_err > 0.0 {
            entry.max_rel_err = entry.max_rel_err.max(r.rel_err);
        }
    }
    out
}

pub fn write_rows<W: Write>(rows: &[CheckRow], w: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    for r in rows {
        csv.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
    }
    csv.flush().map_err(|e| Error::Io(e.to_string()))
}
