//! 3-SAT instances: representation, DIMACS interchange, planted generation and
//! exact evaluation.

use std::fmt::{self, Write as _};

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;

/// A possibly negated occurrence of a variable. `var` is 1-based as in DIMACS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Literal {
    pub var: u32,
    pub negated: bool,
}

impl Literal {
    pub fn new(var: u32, negated: bool) -> Self {
        Self { var, negated }
    }

    pub fn from_dimacs(lit: i64) -> Self {
        Self {
            var: lit.unsigned_abs() as u32,
            negated: lit < 0,
        }
    }

    pub fn to_dimacs(self) -> i64 {
        if self.negated {
            -(self.var as i64)
        } else {
            self.var as i64
        }
    }

    /// Zero-based position of the variable in state vectors.
    #[inline]
    pub fn index(self) -> usize {
        self.var as usize - 1
    }

    /// `+1` for a plain literal, `-1` for a negated one.
    #[inline]
    pub fn polarity(self) -> i8 {
        if self.negated {
            -1
        } else {
            1
        }
    }

    #[inline]
    pub fn is_true(self, value: bool) -> bool {
        value != self.negated
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_dimacs())
    }
}

/// Disjunction of exactly three literals over distinct variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Clause([Literal; 3]);

impl Clause {
    pub fn new(literals: [Literal; 3]) -> Result<Self> {
        let [a, b, c] = literals;
        for l in literals {
            if l.var == 0 {
                return Err(Error::InvalidArgument("variable index 0".into()));
            }
        }
        if a.var == b.var || a.var == c.var {
            return Err(Error::DuplicateVariable {
                line: 0,
                var: a.var,
            });
        }
        if b.var == c.var {
            return Err(Error::DuplicateVariable {
                line: 0,
                var: b.var,
            });
        }
        Ok(Self(literals))
    }

    pub fn from_dimacs(lits: [i64; 3]) -> Result<Self> {
        Self::new(lits.map(Literal::from_dimacs))
    }

    #[inline]
    pub fn literals(&self) -> &[Literal; 3] {
        &self.0
    }

    /// Slot (0..3) of `var` inside the clause.
    pub fn slot_of(&self, var: u32) -> Option<usize> {
        self.0.iter().position(|l| l.var == var)
    }

    #[inline]
    pub fn is_satisfied_by(&self, values: &[bool]) -> bool {
        self.0.iter().any(|l| l.is_true(values[l.index()]))
    }
}

/// Occurrence of a variable: clause index and the literal slot within it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Incidence {
    pub clause: u32,
    pub slot: u8,
}

/// A 3-SAT formula with a per-variable incidence index.
///
/// The index lists, for every variable, the clauses containing it in increasing
/// clause order. It is stored flat (offsets into one buffer).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CnfFormula {
    n_vars: usize,
    clauses: Vec<Clause>,
    offsets: Vec<usize>,
    incidences: Vec<Incidence>,
}

impl CnfFormula {
    pub fn new(n_vars: usize, clauses: Vec<Clause>) -> Result<Self> {
        for c in &clauses {
            for l in c.literals() {
                if l.var as usize > n_vars {
                    return Err(Error::LiteralOutOfRange {
                        line: 0,
                        literal: l.to_dimacs(),
                        n_vars,
                    });
                }
            }
        }
        let (offsets, incidences) = build_incidence(n_vars, &clauses);
        Ok(Self {
            n_vars,
            clauses,
            offsets,
            incidences,
        })
    }

    #[inline]
    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    #[inline]
    pub fn n_clauses(&self) -> usize {
        self.clauses.len()
    }

    #[inline]
    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    /// Clauses containing the zero-based variable `index`.
    #[inline]
    pub fn incidence(&self, index: usize) -> &[Incidence] {
        &self.incidences[self.offsets[index]..self.offsets[index + 1]]
    }

    pub fn degree(&self, index: usize) -> usize {
        self.offsets[index + 1] - self.offsets[index]
    }

    /// Rebuilds the incidence index from the clause list and compares.
    pub fn incidence_consistent(&self) -> bool {
        let (offsets, incidences) = build_incidence(self.n_vars, &self.clauses);
        offsets == self.offsets && incidences == self.incidences
    }

    /// Number of clauses falsified by `values`, without length checks.
    pub(crate) fn count_unsatisfied(&self, values: &[bool]) -> usize {
        self.clauses
            .iter()
            .filter(|c| !c.is_satisfied_by(values))
            .count()
    }

    pub(crate) fn all_satisfied(&self, values: &[bool]) -> bool {
        self.clauses.iter().all(|c| c.is_satisfied_by(values))
    }
}

fn build_incidence(n_vars: usize, clauses: &[Clause]) -> (Vec<usize>, Vec<Incidence>) {
    let mut counts = vec![0usize; n_vars + 1];
    for c in clauses {
        for l in c.literals() {
            counts[l.index() + 1] += 1;
        }
    }
    for i in 0..n_vars {
        counts[i + 1] += counts[i];
    }
    let offsets = counts;
    let mut fill = offsets.clone();
    let mut incidences = vec![Incidence { clause: 0, slot: 0 }; clauses.len() * 3];
    for (m, c) in clauses.iter().enumerate() {
        for (slot, l) in c.literals().iter().enumerate() {
            let at = &mut fill[l.index()];
            incidences[*at] = Incidence {
                clause: m as u32,
                slot: slot as u8,
            };
            *at += 1;
        }
    }
    (offsets, incidences)
}

/// Truth values for every variable, index 0 holding variable 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Assignment(pub Vec<bool>);

impl Assignment {
    pub fn values(&self) -> &[bool] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Evaluation {
    pub satisfied: bool,
    pub unsatisfied_count: usize,
}

pub fn evaluate(f: &CnfFormula, a: &Assignment) -> Result<Evaluation> {
    if a.len() != f.n_vars() {
        return Err(Error::LengthMismatch {
            expected: f.n_vars(),
            found: a.len(),
        });
    }
    let unsatisfied_count = f.count_unsatisfied(a.values());
    Ok(Evaluation {
        satisfied: unsatisfied_count == 0,
        unsatisfied_count,
    })
}

pub const BRUTE_FORCE_MAX_VARS: usize = 26;

/// Exhaustive search over all `2^N` assignments, lowest bit pattern first.
pub fn brute_force_sat(f: &CnfFormula) -> Result<Option<Assignment>> {
    let n = f.n_vars();
    if n > BRUTE_FORCE_MAX_VARS {
        return Err(Error::TooManyVariables {
            n_vars: n,
            max: BRUTE_FORCE_MAX_VARS,
        });
    }
    // Each clause is falsified by exactly one pattern on its three variables.
    let masks: Vec<(u32, u32)> = f
        .clauses()
        .iter()
        .map(|c| {
            let mut care = 0u32;
            let mut falsify = 0u32;
            for l in c.literals() {
                let bit = 1u32 << l.index();
                care |= bit;
                if l.negated {
                    falsify |= bit;
                }
            }
            (care, falsify)
        })
        .collect();
    for bits in 0..(1u64 << n) {
        let bits = bits as u32;
        if masks.iter().all(|&(care, falsify)| bits & care != falsify) {
            let values = (0..n).map(|i| bits >> i & 1 == 1).collect();
            return Ok(Some(Assignment(values)));
        }
    }
    Ok(None)
}

// ---------------------------------------------------------------------------
// DIMACS

pub fn parse_dimacs(text: &str) -> Result<CnfFormula> {
    let mut header: Option<(usize, usize)> = None;
    let mut clauses = Vec::new();
    let mut pending: Vec<(i64, usize)> = Vec::with_capacity(3);

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        if line.starts_with('%') {
            break;
        }
        if line.starts_with('p') {
            if header.is_some() {
                return Err(Error::MalformedHeader {
                    line: line_no,
                    msg: "duplicate header".into(),
                });
            }
            header = Some(parse_header(line, line_no)?);
            continue;
        }
        let (n_vars, _) = header.ok_or(Error::MissingHeader)?;
        for tok in line.split_whitespace() {
            let lit: i64 = tok.parse().map_err(|_| Error::InvalidToken {
                line: line_no,
                token: tok.to_string(),
            })?;
            if lit == 0 {
                clauses.push(finish_clause(&pending, line_no)?);
                pending.clear();
                continue;
            }
            if lit.unsigned_abs() as usize > n_vars {
                return Err(Error::LiteralOutOfRange {
                    line: line_no,
                    literal: lit,
                    n_vars,
                });
            }
            pending.push((lit, line_no));
        }
    }
    let (n_vars, n_clauses) = header.ok_or(Error::MissingHeader)?;
    if let Some(&(_, line)) = pending.last() {
        // last clause without its terminating 0
        clauses.push(finish_clause(&pending, line)?);
    }
    if clauses.len() != n_clauses {
        return Err(Error::ClauseCountMismatch {
            declared: n_clauses,
            found: clauses.len(),
        });
    }
    CnfFormula::new(n_vars, clauses)
}

fn parse_header(line: &str, line_no: usize) -> Result<(usize, usize)> {
    let bad = |msg: &str| Error::MalformedHeader {
        line: line_no,
        msg: msg.to_string(),
    };
    let fields: Vec<&str> = line.split_whitespace().collect();
    match fields.as_slice() {
        ["p", "cnf", n, m] => {
            let n = n
                .parse()
                .map_err(|_| bad("variable count is not an integer"))?;
            let m = m
                .parse()
                .map_err(|_| bad("clause count is not an integer"))?;
            Ok((n, m))
        }
        _ => Err(bad("expected `p cnf <vars> <clauses>`")),
    }
}

fn finish_clause(pending: &[(i64, usize)], line: usize) -> Result<Clause> {
    if pending.len() != 3 {
        return Err(Error::ClauseLength {
            line,
            len: pending.len(),
        });
    }
    let lits = [pending[0].0, pending[1].0, pending[2].0];
    Clause::from_dimacs(lits).map_err(|e| match e {
        Error::DuplicateVariable { var, .. } => Error::DuplicateVariable { line, var },
        other => other,
    })
}

pub fn serialize_dimacs(f: &CnfFormula) -> String {
    serialize_dimacs_with_comments(f, &[])
}

/// Writes `c` lines for each comment, then the header and one clause per line.
pub fn serialize_dimacs_with_comments(f: &CnfFormula, comments: &[String]) -> String {
    let mut out = String::with_capacity(16 * (f.n_clauses() + 1));
    for c in comments {
        for line in c.lines() {
            let _ = writeln!(out, "c {line}");
        }
    }
    let _ = writeln!(out, "p cnf {} {}", f.n_vars(), f.n_clauses());
    for c in f.clauses() {
        let [a, b, d] = c.literals();
        let _ = writeln!(out, "{a} {b} {d} 0");
    }
    out
}

// ---------------------------------------------------------------------------
// Planted generator

pub const DEFAULT_P0: f64 = 0.08;

/// Probabilities of a clause having 0, 1 or 2 literals false under the plant.
///
/// Fixed by normalisation and by requiring each literal to agree with the plant
/// with probability 1/2, leaving `p0` as the only free parameter.
pub fn clause_type_probabilities(p0: f64) -> [f64; 3] {
    [p0, 0.5 - 2.0 * p0, 0.5 + p0]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantedSpec {
    pub n_vars: usize,
    pub ratio: f64,
    pub p0: f64,
    pub seed: u64,
}

impl PlantedSpec {
    pub fn new(n_vars: usize, ratio: f64, seed: u64) -> Self {
        Self {
            n_vars,
            ratio,
            p0: DEFAULT_P0,
            seed,
        }
    }

    pub fn n_clauses(&self) -> usize {
        (self.ratio * self.n_vars as f64).round() as usize
    }

    /// Comment lines recording the generator provenance.
    pub fn provenance(&self) -> Vec<String> {
        vec![
            "planted 3-SAT instance".to_string(),
            format!(
                "n={} ratio={} p0={} seed={}",
                self.n_vars, self.ratio, self.p0, self.seed
            ),
        ]
    }
}

/// Random 3-SAT instance hiding a satisfying assignment.
///
/// Each clause draws three distinct variables, a type `t` (number of literals
/// false under the plant) from [`clause_type_probabilities`], and which `t` slots
/// are falsified; literal signs then follow from the plant.
pub fn generate_planted(
    n_vars: usize,
    ratio: f64,
    p0: f64,
    seed: u64,
) -> Result<(CnfFormula, Assignment)> {
    if n_vars < 3 {
        return Err(Error::InvalidGenerator(format!(
            "need at least 3 variables, got {n_vars}"
        )));
    }
    if !(ratio > 0.0) || ratio * (n_vars as f64) < 1.0 {
        return Err(Error::InvalidGenerator(format!(
            "ratio {ratio} gives fewer than one clause for {n_vars} variables"
        )));
    }
    if !(0.0..=0.25).contains(&p0) {
        return Err(Error::InvalidGenerator(format!(
            "p0 = {p0} outside [0, 0.25]"
        )));
    }
    let spec = PlantedSpec {
        n_vars,
        ratio,
        p0,
        seed,
    };
    let n_clauses = spec.n_clauses();
    let [q0, q1, _] = clause_type_probabilities(p0);

    let mut rng = rng::stream(seed);
    let plant: Vec<bool> = (0..n_vars).map(|_| rng.random::<bool>()).collect();
    let mut clauses = Vec::with_capacity(n_clauses);
    for _ in 0..n_clauses {
        let vars = index::sample(&mut rng, n_vars, 3);
        let u: f64 = rng.random();
        let n_false = if u < q0 {
            0
        } else if u < q0 + q1 {
            1
        } else {
            2
        };
        let mut falsified = [false; 3];
        for slot in index::sample(&mut rng, 3, n_false) {
            falsified[slot] = true;
        }
        let mut lits = [Literal::new(1, false); 3];
        for (slot, var) in vars.iter().enumerate() {
            let want_true = !falsified[slot];
            // literal is true iff plant value differs from `negated`
            let negated = plant[var] != want_true;
            lits[slot] = Literal::new(var as u32 + 1, negated);
        }
        clauses.push(Clause::new(lits)?);
    }
    Ok((CnfFormula::new(n_vars, clauses)?, Assignment(plant)))
}
