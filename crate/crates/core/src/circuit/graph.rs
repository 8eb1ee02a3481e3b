//! Line-oriented block graphs.
//!
//! ```text
//! # comment
//! in   <name>
//! const <name> <value>
//! block <id> <kind> [key=value ...]
//! wire <source>[.<port>] <block>.<port>
//! out  <name> <source>[.<port>] [scale=<factor>]
//! ```
//!
//! | kind | inputs | outputs | parameters |
//! |------|--------|---------|------------|
//! | `adder` | `a`, `b` | `out` | |
//! | `subtractor` | `p`, `m` | `out` | |
//! | `multiplier` | `x`, `y` | `out` | |
//! | `gain` | `x` | `out` | `k` |
//! | `log_amp` | `x` (volts) | `out` | `g` (A/V, default `log_ref_current`) |
//! | `antilog_amp` | `x` | `out` | |
//! | `comparator3` | `v1`..`v3` | `max`, `b1`..`b3` | |
//! | `switch` | `x`, `cp`, `cm` | `out` | |
//! | `softmax` | `x1`..`xk` | `y1`..`yk` | `k` |
//!
//! `out` values are multiplied by `scale` (default 1) outside the rails.

use std::collections::HashMap;

use crate::circuit::blocks::{self, BlockConstants};
use crate::error::{Error, Result};

/// Clause module as a block graph; outputs match [`super::clause_module`].
pub const CLAUSE_GRAPH: &str = include_str!("../../graphs/clause.graph");

#[derive(Debug, Clone, PartialEq)]
pub enum BlockKind {
    Adder,
    Subtractor,
    Multiplier,
    Gain { k: f64 },
    LogAmp { g: Option<f64> },
    AntilogAmp,
    Comparator3,
    Switch,
    Softmax { k: usize },
}

impl BlockKind {
    fn inputs(&self) -> Vec<String> {
        let fixed: &[&str] = match self {
            BlockKind::Adder => &["a", "b"],
            BlockKind::Subtractor => &["p", "m"],
            BlockKind::Multiplier => &["x", "y"],
            BlockKind::Gain { .. } | BlockKind::LogAmp { .. } | BlockKind::AntilogAmp => &["x"],
            BlockKind::Comparator3 => &["v1", "v2", "v3"],
            BlockKind::Switch => &["x", "cp", "cm"],
            BlockKind::Softmax { k } => return (1..=*k).map(|i| format!("x{i}")).collect(),
        };
        fixed.iter().map(|s| s.to_string()).collect()
    }

    fn outputs(&self) -> Vec<String> {
        match self {
            BlockKind::Comparator3 => ["max", "b1", "b2", "b3"].map(String::from).to_vec(),
            BlockKind::Softmax { k } => (1..=*k).map(|i| format!("y{i}")).collect(),
            _ => vec!["out".to_string()],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Source {
    Input(usize),
    Const(f64),
    Block { block: usize, port: usize },
}

#[derive(Debug, Clone)]
struct Block {
    id: String,
    kind: BlockKind,
    line: usize,
    wires: Vec<Option<Source>>,
}

#[derive(Debug, Clone)]
struct Output {
    name: String,
    source: Source,
    scale: f64,
}

#[derive(Debug, Clone)]
pub struct Graph {
    inputs: Vec<String>,
    blocks: Vec<Block>,
    outputs: Vec<Output>,
    order: Vec<usize>,
}

fn graph_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Graph {
        line,
        msg: msg.into(),
    }
}

fn parse_f64(line: usize, s: &str) -> Result<f64> {
    s.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| graph_err(line, format!("bad number '{s}'")))
}

fn parse_params(line: usize, words: &[&str]) -> Result<HashMap<String, String>> {
    let mut out = HashMap::new();
    for w in words {
        let (k, v) = w
            .split_once('=')
            .ok_or_else(|| graph_err(line, format!("expected key=value, got '{w}'")))?;
        if out.insert(k.to_string(), v.to_string()).is_some() {
            return Err(graph_err(line, format!("parameter '{k}' given twice")));
        }
    }
    Ok(out)
}

fn parse_kind(line: usize, kind: &str, params: &HashMap<String, String>) -> Result<BlockKind> {
    let allowed: &[&str] = match kind {
        "gain" | "softmax" => &["k"],
        "log_amp" => &["g"],
        _ => &[],
    };
    if let Some(k) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(graph_err(
            line,
            format!("unknown parameter '{k}' for {kind}"),
        ));
    }
    let need = |key: &str| {
        params
            .get(key)
            .ok_or_else(|| graph_err(line, format!("{kind} needs {key}=")))
    };
    Ok(match kind {
        "adder" => BlockKind::Adder,
        "subtractor" => BlockKind::Subtractor,
        "multiplier" => BlockKind::Multiplier,
        "gain" => BlockKind::Gain {
            k: parse_f64(line, need("k")?)?,
        },
        "log_amp" => BlockKind::LogAmp {
            g: params.get("g").map(|g| parse_f64(line, g)).transpose()?,
        },
        "antilog_amp" => BlockKind::AntilogAmp,
        "comparator3" => BlockKind::Comparator3,
        "switch" => BlockKind::Switch,
        "softmax" => {
            let k = need("k")?;
            let k = k
                .parse::<usize>()
                .ok()
                .filter(|&k| k >= 1)
                .ok_or_else(|| graph_err(line, format!("bad softmax size '{k}'")))?;
            BlockKind::Softmax { k }
        }
        other => return Err(graph_err(line, format!("unknown block kind '{other}'"))),
    })
}

impl Graph {
    pub fn parse(text: &str) -> Result<Self> {
        let mut inputs: Vec<String> = Vec::new();
        let mut consts: HashMap<String, f64> = HashMap::new();
        let mut blocks: Vec<Block> = Vec::new();
        let mut block_ids: HashMap<String, usize> = HashMap::new();
        let mut outputs = Vec::new();
        let mut names: HashMap<String, usize> = HashMap::new();

        let mut claim = |name: &str, line: usize| -> Result<()> {
            if let Some(prev) = names.insert(name.to_string(), line) {
                return Err(graph_err(
                    line,
                    format!("name '{name}' already defined on line {prev}"),
                ));
            }
            Ok(())
        };

        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let words: Vec<&str> = content.split_whitespace().collect();
            match words[0] {
                "in" => {
                    let [_, name] = words[..] else {
                        return Err(graph_err(line, "expected: in <name>"));
                    };
                    claim(name, line)?;
                    inputs.push(name.to_string());
                }
                "const" => {
                    let [_, name, value] = words[..] else {
                        return Err(graph_err(line, "expected: const <name> <value>"));
                    };
                    claim(name, line)?;
                    consts.insert(name.to_string(), parse_f64(line, value)?);
                }
                "block" => {
                    if words.len() < 3 {
                        return Err(graph_err(
                            line,
                            "expected: block <id> <kind> [key=value ...]",
                        ));
                    }
                    claim(words[1], line)?;
                    let kind = parse_kind(line, words[2], &parse_params(line, &words[3..])?)?;
                    block_ids.insert(words[1].to_string(), blocks.len());
                    blocks.push(Block {
                        id: words[1].to_string(),
                        wires: vec![None; kind.inputs().len()],
                        kind,
                        line,
                    });
                }
                "wire" | "out" => {}
                other => return Err(graph_err(line, format!("unknown directive '{other}'"))),
            }
        }

        let resolve = |line: usize, spec: &str, blocks: &[Block]| -> Result<Source> {
            if let Some(pos) = inputs.iter().position(|n| n == spec) {
                return Ok(Source::Input(pos));
            }
            if let Some(&v) = consts.get(spec) {
                return Ok(Source::Const(v));
            }
            let (id, port) = spec.split_once('.').unwrap_or((spec, "out"));
            let &block = block_ids
                .get(id)
                .ok_or_else(|| graph_err(line, format!("unknown source '{spec}'")))?;
            let port = blocks[block]
                .kind
                .outputs()
                .iter()
                .position(|p| p == port)
                .ok_or_else(|| graph_err(line, format!("block '{id}' has no output '{port}'")))?;
            Ok(Source::Block { block, port })
        };

        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            let words: Vec<&str> = content.split_whitespace().collect();
            match words.first() {
                Some(&"wire") => {
                    let [_, from, to] = words[..] else {
                        return Err(graph_err(line, "expected: wire <source> <block>.<port>"));
                    };
                    let src = resolve(line, from, &blocks)?;
                    let (id, port) = to.split_once('.').ok_or_else(|| {
                        graph_err(line, format!("wire target '{to}' needs a port"))
                    })?;
                    let &b = block_ids
                        .get(id)
                        .ok_or_else(|| graph_err(line, format!("unknown block '{id}'")))?;
                    let slot = blocks[b]
                        .kind
                        .inputs()
                        .iter()
                        .position(|p| p == port)
                        .ok_or_else(|| {
                            graph_err(line, format!("block '{id}' has no input '{port}'"))
                        })?;
                    if blocks[b].wires[slot].is_some() {
                        return Err(graph_err(line, format!("input {to} wired twice")));
                    }
                    blocks[b].wires[slot] = Some(src);
                }
                Some(&"out") => {
                    if words.len() < 3 || words.len() > 4 {
                        return Err(graph_err(
                            line,
                            "expected: out <name> <source> [scale=<factor>]",
                        ));
                    }
                    let params = parse_params(line, &words[3..])?;
                    if let Some(k) = params.keys().find(|k| k.as_str() != "scale") {
                        return Err(graph_err(line, format!("unknown output parameter '{k}'")));
                    }
                    let scale = params
                        .get("scale")
                        .map(|s| parse_f64(line, s))
                        .transpose()?
                        .unwrap_or(1.0);
                    outputs.push(Output {
                        name: words[1].to_string(),
                        source: resolve(line, words[2], &blocks)?,
                        scale,
                    });
                }
                _ => {}
            }
        }

        for b in &blocks {
            if let Some(i) = b.wires.iter().position(Option::is_none) {
                return Err(graph_err(
                    b.line,
                    format!("input {}.{} is not wired", b.id, b.kind.inputs()[i]),
                ));
            }
        }
        if outputs.is_empty() {
            return Err(graph_err(0, "graph declares no outputs"));
        }
        let order = topological_order(&blocks)?;
        Ok(Self {
            inputs,
            blocks,
            outputs,
            order,
        })
    }

    pub fn inputs(&self) -> &[String] {
        &self.inputs
    }

    pub fn output_names(&self) -> Vec<&str> {
        self.outputs.iter().map(|o| o.name.as_str()).collect()
    }

    /// Evaluates the graph for the given input values, in declaration order.
    pub fn eval(&self, values: &[f64], k: &BlockConstants<f64>) -> Result<Vec<f64>> {
        if values.len() != self.inputs.len() {
            return Err(Error::LengthMismatch {
                expected: self.inputs.len(),
                found: values.len(),
            });
        }
        let mut results: Vec<Vec<f64>> = vec![Vec::new(); self.blocks.len()];
        let read = |src: &Source, results: &[Vec<f64>]| match *src {
            Source::Input(i) => values[i],
            Source::Const(v) => v,
            Source::Block { block, port } => results[block][port],
        };
        for &b in &self.order {
            let block = &self.blocks[b];
            let x: Vec<f64> = block
                .wires
                .iter()
                .map(|w| read(w.as_ref().expect("wired"), &results))
                .collect();
            results[b] = match block.kind {
                BlockKind::Adder => vec![blocks::adder(k, x[0], x[1])],
                BlockKind::Subtractor => vec![blocks::subtractor(k, x[0], x[1])],
                BlockKind::Multiplier => vec![blocks::multiplier(k, x[0], x[1])],
                BlockKind::Gain { k: g } => vec![blocks::gain(k, x[0], g)],
                BlockKind::LogAmp { g } => {
                    vec![blocks::log_amp(k, x[0] * g.unwrap_or(k.log_ref_current))?]
                }
                BlockKind::AntilogAmp => vec![blocks::antilog_amp(k, x[0])],
                BlockKind::Comparator3 => {
                    let c = blocks::comparator3(k, [x[0], x[1], x[2]]);
                    vec![c.v_max, c.b[0], c.b[1], c.b[2]]
                }
                BlockKind::Switch => vec![k.clip(blocks::bidirectional_switch(x[0], x[1], x[2]))],
                BlockKind::Softmax { .. } => blocks::softmax_block(k, &x)?,
            };
        }
        Ok(self
            .outputs
            .iter()
            .map(|o| read(&o.source, &results) * o.scale)
            .collect())
    }
}

fn topological_order(blocks: &[Block]) -> Result<Vec<usize>> {
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut mark = vec![0u8; blocks.len()];
    let mut order = Vec::with_capacity(blocks.len());
    for root in 0..blocks.len() {
        if mark[root] != 0 {
            continue;
        }
        let mut stack = vec![(root, 0usize)];
        mark[root] = 1;
        while let Some(&mut (b, ref mut next)) = stack.last_mut() {
            let deps = &blocks[b].wires;
            if *next < deps.len() {
                let w = *next;
                *next += 1;
                if let Some(Source::Block { block: d, .. }) = deps[w] {
                    match mark[d] {
                        0 => {
                            mark[d] = 1;
                            stack.push((d, 0));
                        }
                        1 => {
                            return Err(graph_err(
                                blocks[d].line,
                                format!("cycle through block '{}'", blocks[d].id),
                            ))
                        }
                        _ => {}
                    }
                }
            } else {
                mark[b] = 2;
                order.push(b);
                stack.pop();
            }
        }
    }
    Ok(order)
}
