//! The memcomputing vector field for 3-SAT.
//!
//! Voltages `v` in [0,1] relax the Boolean variables; each clause carries a
//! short-term memory `xs` in [0,1] that switches the voltage drive between the
//! gradient-like and rigidity terms, and a long-term memory `xl` in [0,M] that
//! weights the clause through a per-variable softmax:
//!
//! ```text
//! dv_n  = sum_{m ∋ n} [ eta*w_nm*xs_m*G_nm + (1 + zeta*eta*w_nm)*(1 - xs_m)*R_nm ]
//! dxs_m = beta*(xs_m + eps)*(C_m - gamma)
//! dxl_m = alpha*exp(-xl_m)*(C_m - delta)
//! C_m   = 1 - max(lit values)        G_nm = q_nm*C_m
//! R_nm  = q_nm*C_m if literal n attains the clause maximum, else 0
//! w_n   = softmax({xl_m : m ∋ n})
//! ```

use crate::error::{Error, Result};
use crate::real::Real;
use crate::sat::{Clause, CnfFormula, Literal};

/// Constants of the vector field. `eta_gain` is the gradient gain; the
/// tolerance level of the imperfection model is a separate quantity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DmmParams<T> {
    pub alpha: T,
    pub beta: T,
    pub gamma: T,
    pub delta: T,
    pub epsilon: T,
    pub eta_gain: T,
    pub zeta: T,
    pub lambda_shift: T,
    pub dt: T,
    /// Literals within this distance of the clause maximum all receive the rigidity term.
    pub tie_tol: T,
}

pub const DEFAULT_TIE_TOL: f64 = 1e-9;

impl<T: Real> Default for DmmParams<T> {
    /// Fixed constants plus the values tuned at N = 1000 for `zeta` and `dt`.
    fn default() -> Self {
        Self {
            alpha: T::lit(5.0),
            beta: T::lit(20.0),
            gamma: T::lit(0.25),
            delta: T::lit(0.05),
            epsilon: T::lit(1e-3),
            eta_gain: T::lit(3000.0),
            zeta: T::lit(3e-3),
            lambda_shift: T::lit(0.1),
            dt: T::lit(0.14),
            tie_tol: T::lit(DEFAULT_TIE_TOL),
        }
    }
}

impl<T: Real> DmmParams<T> {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("delta", self.delta),
            ("epsilon", self.epsilon),
            ("eta_gain", self.eta_gain),
            ("zeta", self.zeta),
            ("lambda_shift", self.lambda_shift),
            ("dt", self.dt),
        ];
        for (name, x) in positive {
            if !(x > T::zero()) || !x.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be positive, got {x}"
                )));
            }
        }
        if self.gamma >= T::one() || self.delta >= T::one() {
            return Err(Error::InvalidArgument(
                "gamma and delta must lie in (0,1)".into(),
            ));
        }
        if self.tie_tol < T::zero() {
            return Err(Error::InvalidArgument(
                "tie_tol must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Dynamical state: voltages per variable, memories per clause.
#[derive(Debug, Clone, PartialEq)]
pub struct DmmState<T> {
    pub v: Vec<T>,
    pub xs: Vec<T>,
    pub xl: Vec<T>,
}

impl<T: Real> DmmState<T> {
    pub fn zeros(n_vars: usize, n_clauses: usize) -> Self {
        Self {
            v: vec![T::zero(); n_vars],
            xs: vec![T::zero(); n_clauses],
            xl: vec![T::zero(); n_clauses],
        }
    }

    pub fn check_shape(&self, f: &CnfFormula) -> Result<()> {
        if self.v.len() != f.n_vars() {
            return Err(Error::SizeMismatch(format!(
                "{} voltages for {} variables",
                self.v.len(),
                f.n_vars()
            )));
        }
        if self.xs.len() != f.n_clauses() || self.xl.len() != f.n_clauses() {
            return Err(Error::SizeMismatch(format!(
                "{}/{} memories for {} clauses",
                self.xs.len(),
                self.xl.len(),
                f.n_clauses()
            )));
        }
        Ok(())
    }

    /// Upper bound of the long-term memories (the clause count).
    pub fn xl_max(&self) -> T {
        T::from_usize(self.xl.len()).unwrap_or_else(T::max_value)
    }

    pub fn in_bounds(&self) -> bool {
        let unit = |x: &T| *x >= T::zero() && *x <= T::one();
        let hi = self.xl_max();
        self.v.iter().all(unit)
            && self.xs.iter().all(unit)
            && self.xl.iter().all(|x| *x >= T::zero() && *x <= hi)
    }

    /// Digital read-out: variable true iff its voltage exceeds 1/2.
    pub fn threshold(&self) -> Vec<bool> {
        let half = T::lit(0.5);
        self.v.iter().map(|&x| x > half).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Derivatives<T> {
    pub dv: Vec<T>,
    pub dxs: Vec<T>,
    pub dxl: Vec<T>,
}

impl<T: Real> Derivatives<T> {
    pub fn zeros(n_vars: usize, n_clauses: usize) -> Self {
        Self {
            dv: vec![T::zero(); n_vars],
            dxs: vec![T::zero(); n_clauses],
            dxl: vec![T::zero(); n_clauses],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.dv
            .iter()
            .chain(&self.dxs)
            .chain(&self.dxl)
            .all(|x| x.is_finite())
    }
}

// ---------------------------------------------------------------------------
// Per-clause building blocks

/// Value of a literal: `v` for a plain literal, `1 - v` for a negated one.
#[inline]
pub fn literal_value<T: Real>(v: T, negated: bool) -> T {
    if negated {
        T::one() - v
    } else {
        v
    }
}

#[inline]
fn literal_values<T: Real>(clause: &Clause, v: &[T]) -> [T; 3] {
    clause
        .literals()
        .map(|l| literal_value(v[l.index()], l.negated))
}

#[inline]
fn max3<T: Real>(x: [T; 3]) -> T {
    x[0].max(x[1]).max(x[2])
}

#[inline]
fn sign<T: Real>(lit: Literal) -> T {
    if lit.negated {
        -T::one()
    } else {
        T::one()
    }
}

/// `C = 1 - max` of the clause's literal values; 0 means satisfied.
pub fn clause_value<T: Real>(clause: &Clause, v: &[T]) -> T {
    T::one() - max3(literal_values(clause, v))
}

/// Gradient-like term `q * C` for the variable `var` (1-based) of the clause.
pub fn gradient_term<T: Real>(clause: &Clause, var: u32, v: &[T]) -> Result<T> {
    let slot = clause
        .slot_of(var)
        .ok_or(Error::VariableNotInClause { var })?;
    Ok(sign::<T>(clause.literals()[slot]) * clause_value(clause, v))
}

/// Rigidity term: `q * C` if the literal of `var` attains the clause maximum
/// (within `tie_tol`), otherwise 0.
pub fn rigidity_term<T: Real>(clause: &Clause, var: u32, v: &[T], tie_tol: T) -> Result<T> {
    let slot = clause
        .slot_of(var)
        .ok_or(Error::VariableNotInClause { var })?;
    let lits = literal_values(clause, v);
    let top = max3(lits);
    if lits[slot] >= top - tie_tol {
        Ok(sign::<T>(clause.literals()[slot]) * (T::one() - top))
    } else {
        Ok(T::zero())
    }
}

/// Softmax with the maximum subtracted before exponentiation.
pub fn softmax_weights<T: Real>(z: &[T]) -> Result<Vec<T>> {
    let top = z.iter().copied().reduce(T::max).ok_or(Error::EmptyInput)?;
    let e: Vec<T> = z.iter().map(|&x| (x - top).exp()).collect();
    let sum = e.iter().fold(T::zero(), |acc, &x| acc + x);
    Ok(e.into_iter().map(|x| x / sum).collect())
}

// ---------------------------------------------------------------------------
// Full vector field

/// Hook applied to the result of every addition and multiplication.
///
/// The exact field uses [`Exact`]; the tolerance model supplies a factor per
/// site (see [`site`]). Both go through the same evaluation code, so a factor
/// of exactly 1 reproduces the exact field bit for bit.
pub(crate) trait Sites<T> {
    fn apply(&self, site: usize, x: T) -> T;
}

pub(crate) struct Exact;

impl<T> Sites<T> for Exact {
    #[inline(always)]
    fn apply(&self, _site: usize, x: T) -> T {
        x
    }
}

impl<T: Real> Sites<T> for [T] {
    #[inline(always)]
    fn apply(&self, site: usize, x: T) -> T {
        x * self[site]
    }
}

/// Arithmetic site map of the vector field.
///
/// Per clause `m` there are [`site::PER_CLAUSE`] sites at `m * PER_CLAUSE + k`;
/// per literal occurrence (clause `m`, slot `j`) there are
/// [`site::PER_OCCURRENCE`] sites at `M * PER_CLAUSE + (3m + j) * PER_OCCURRENCE + k`.
///
/// | site | operation |
/// |------|-----------|
/// | `CLAUSE` | `1 - max(...)` |
/// | `XS_PLUS_EPS` | `xs + eps` |
/// | `C_MINUS_GAMMA` | `C - gamma` |
/// | `BETA_MUL` | `beta * (xs + eps)` |
/// | `DXS_MUL` | `... * (C - gamma)` |
/// | `C_MINUS_DELTA` | `C - delta` |
/// | `ALPHA_MUL` | `alpha * exp(-xl)` |
/// | `DXL_MUL` | `... * (C - delta)` |
/// | `ETA_W` | `eta * w` (softmax weight application) |
/// | `ETA_W_XS` | `eta * w * xs` |
/// | `GRAD_MUL` | `... * G` |
/// | `ZETA_MUL` | `zeta * eta * w` |
/// | `ONE_PLUS` | `1 + zeta * eta * w` |
/// | `ONE_MINUS_XS` | `1 - xs` |
/// | `RIGID_GAIN` | `(1 + ...) * (1 - xs)` |
/// | `RIGID_MUL` | `... * R` |
/// | `TERM_SUM` | gradient part + rigidity part |
/// | `ACCUMULATE` | running sum over the clauses of the variable |
pub mod site {
    pub const CLAUSE: usize = 0;
    pub const XS_PLUS_EPS: usize = 1;
    pub const C_MINUS_GAMMA: usize = 2;
    pub const BETA_MUL: usize = 3;
    pub const DXS_MUL: usize = 4;
    pub const C_MINUS_DELTA: usize = 5;
    pub const ALPHA_MUL: usize = 6;
    pub const DXL_MUL: usize = 7;
    pub const PER_CLAUSE: usize = 8;

    pub const ETA_W: usize = 0;
    pub const ETA_W_XS: usize = 1;
    pub const GRAD_MUL: usize = 2;
    pub const ZETA_MUL: usize = 3;
    pub const ONE_PLUS: usize = 4;
    pub const ONE_MINUS_XS: usize = 5;
    pub const RIGID_GAIN: usize = 6;
    pub const RIGID_MUL: usize = 7;
    pub const TERM_SUM: usize = 8;
    pub const ACCUMULATE: usize = 9;
    pub const PER_OCCURRENCE: usize = 10;

    pub fn count(n_clauses: usize) -> usize {
        n_clauses * (PER_CLAUSE + 3 * PER_OCCURRENCE)
    }
}

/// Scratch buffers reused across evaluations.
#[derive(Debug, Clone, Default)]
pub struct Workspace<T> {
    clause: Vec<T>,
    rigid: Vec<[bool; 3]>,
    exps: Vec<T>,
    sums: Vec<T>,
    local_shift: Vec<Option<T>>,
}

impl<T: Real> Workspace<T> {
    pub fn new() -> Self {
        Self {
            clause: Vec::new(),
            rigid: Vec::new(),
            exps: Vec::new(),
            sums: Vec::new(),
            local_shift: Vec::new(),
        }
    }
}

/// Evaluates the vector field at `s`.
pub fn derivatives<T: Real>(
    f: &CnfFormula,
    s: &DmmState<T>,
    p: &DmmParams<T>,
) -> Result<Derivatives<T>> {
    s.check_shape(f)?;
    let mut out = Derivatives::zeros(f.n_vars(), f.n_clauses());
    eval_field(f, s, p, &Exact, &mut Workspace::new(), &mut out);
    Ok(out)
}

/// In-place variant used by the integrator. Shapes must already match.
pub fn derivatives_into<T: Real>(
    f: &CnfFormula,
    s: &DmmState<T>,
    p: &DmmParams<T>,
    ws: &mut Workspace<T>,
    out: &mut Derivatives<T>,
) {
    eval_field(f, s, p, &Exact, ws, out);
}

pub(crate) fn eval_field<T: Real, S: Sites<T> + ?Sized>(
    f: &CnfFormula,
    s: &DmmState<T>,
    p: &DmmParams<T>,
    sites: &S,
    ws: &mut Workspace<T>,
    out: &mut Derivatives<T>,
) {
    let m_total = f.n_clauses();
    let one = T::one();
    ws.clause.resize(m_total, T::zero());
    ws.rigid.resize(m_total, [false; 3]);
    ws.exps.resize(m_total, T::zero());

    // Softmax weights share one global shift; a variable whose own clauses all
    // underflow against it falls back to its local maximum below.
    let shift = s.xl.iter().copied().fold(T::neg_infinity(), T::max);
    let exp_neg_shift = (-shift).exp();
    let tiny = T::min_positive_value().sqrt();

    let per_clause = f
        .clauses()
        .iter()
        .zip(s.xs.iter().zip(&s.xl))
        .zip(
            ws.clause
                .iter_mut()
                .zip(ws.rigid.iter_mut().zip(ws.exps.iter_mut())),
        )
        .zip(out.dxs.iter_mut().zip(out.dxl.iter_mut()));
    for (m, (((clause, (&xs, &xl)), (c_out, (rigid, e_out))), (dxs, dxl))) in per_clause.enumerate()
    {
        let b = m * site::PER_CLAUSE;
        let lits = literal_values(clause, &s.v);
        let top = max3(lits);
        let c = sites.apply(b + site::CLAUSE, one - top);
        let floor = top - p.tie_tol;
        *c_out = c;
        *rigid = lits.map(|x| x >= floor);
        let e = (xl - shift).exp();
        *e_out = e;
        // exp(-xl) from the softmax exponential unless that one underflowed
        let decay_exp = if e >= tiny {
            exp_neg_shift / e
        } else {
            (-xl).exp()
        };

        let xs_eps = sites.apply(b + site::XS_PLUS_EPS, xs + p.epsilon);
        let c_gamma = sites.apply(b + site::C_MINUS_GAMMA, c - p.gamma);
        let beta_xs = sites.apply(b + site::BETA_MUL, p.beta * xs_eps);
        *dxs = sites.apply(b + site::DXS_MUL, beta_xs * c_gamma);

        let c_delta = sites.apply(b + site::C_MINUS_DELTA, c - p.delta);
        let decay = sites.apply(b + site::ALPHA_MUL, p.alpha * decay_exp);
        *dxl = sites.apply(b + site::DXL_MUL, decay * c_delta);
    }

    // Softmax denominators, then the voltage drive clause by clause. Each
    // variable still accumulates its occurrences in clause order.
    let n_vars = f.n_vars();
    let clauses = f.clauses();
    ws.sums.clear();
    ws.sums.resize(n_vars, T::zero());
    for (clause, &e) in clauses.iter().zip(&ws.exps) {
        for lit in clause.literals() {
            ws.sums[lit.index()] = ws.sums[lit.index()] + e;
        }
    }
    ws.local_shift.clear();
    ws.local_shift.resize(n_vars, None);
    for n in 0..n_vars {
        let inc = f.incidence(n);
        if inc.is_empty() || ws.sums[n] >= tiny {
            continue;
        }
        let top = inc
            .iter()
            .map(|o| s.xl[o.clause as usize])
            .fold(T::neg_infinity(), T::max);
        ws.sums[n] = inc.iter().fold(T::zero(), |acc, o| {
            acc + (s.xl[o.clause as usize] - top).exp()
        });
        ws.local_shift[n] = Some(top);
    }

    let occ_base = m_total * site::PER_CLAUSE;
    out.dv.iter_mut().for_each(|d| *d = T::zero());
    for (m, clause) in clauses.iter().enumerate() {
        let c = ws.clause[m];
        let xs = s.xs[m];
        let one_minus_xs_raw = one - xs;
        for (slot, &lit) in clause.literals().iter().enumerate() {
            let n = lit.index();
            let e = match ws.local_shift[n] {
                None => ws.exps[m],
                Some(top) => (s.xl[m] - top).exp(),
            };
            let b = occ_base + (3 * m + slot) * site::PER_OCCURRENCE;
            let g = sign::<T>(lit) * c;
            let r = if ws.rigid[m][slot] { g } else { T::zero() };
            let w = e / ws.sums[n];

            let eta_w = sites.apply(b + site::ETA_W, p.eta_gain * w);
            let grad_gain = sites.apply(b + site::ETA_W_XS, eta_w * xs);
            let grad = sites.apply(b + site::GRAD_MUL, grad_gain * g);
            let zeta_eta_w = sites.apply(b + site::ZETA_MUL, p.zeta * eta_w);
            let one_plus = sites.apply(b + site::ONE_PLUS, one + zeta_eta_w);
            let one_minus_xs = sites.apply(b + site::ONE_MINUS_XS, one_minus_xs_raw);
            let rigid_gain = sites.apply(b + site::RIGID_GAIN, one_plus * one_minus_xs);
            let rigid = sites.apply(b + site::RIGID_MUL, rigid_gain * r);
            let term = sites.apply(b + site::TERM_SUM, grad + rigid);
            out.dv[n] = sites.apply(b + site::ACCUMULATE, out.dv[n] + term);
        }
    }
}

/// A-priori bound on `|dv_n|`: every occurrence contributes at most
/// `eta + (1 + zeta*eta)` in magnitude.
pub fn dv_bound<T: Real>(f: &CnfFormula, n: usize, p: &DmmParams<T>) -> T {
    let per = p.eta_gain + (T::one() + p.zeta * p.eta_gain);
    T::from_usize(f.degree(n)).unwrap() * per
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sat::Clause;
    use approx::assert_relative_eq;

    fn clause(l: [i64; 3]) -> Clause {
        Clause::from_dimacs(l).unwrap()
    }

    #[test]
    fn literal_values() {
        assert_eq!(literal_value(0.3, false), 0.3);
        assert_eq!(literal_value(0.3, true), 0.7);
        assert_eq!(literal_value(1.0, true), 0.0);
    }

    #[test]
    fn clause_values() {
        let pos = clause([1, 2, 3]);
        assert_eq!(clause_value(&pos, &[1.0, 0.0, 0.0]), 0.0);
        assert_eq!(clause_value(&clause([-1, -2, -3]), &[1.0, 1.0, 1.0]), 1.0);
        assert_relative_eq!(clause_value(&pos, &[0.3, 0.6, 0.2]), 0.4, epsilon = 1e-15);
    }

    #[test]
    fn gradient_terms() {
        let v = [0.9, 0.2, 0.1];
        for var in 1..=3 {
            assert_relative_eq!(
                gradient_term(&clause([1, 2, 3]), var, &v).unwrap(),
                0.1,
                epsilon = 1e-15
            );
        }
        // negate variable 2 but keep C at 0.1 (its literal value 0.8 < 0.9)
        let g = gradient_term(&clause([1, -2, 3]), 2, &v).unwrap();
        assert_relative_eq!(g, -0.1, epsilon = 1e-15);
        let sat = [1.0, 0.2, 0.1];
        for var in 1..=3 {
            assert_eq!(gradient_term(&clause([1, 2, 3]), var, &sat).unwrap(), 0.0);
        }
        assert!(matches!(
            gradient_term(&clause([1, 2, 3]), 4, &[0.0; 4]),
            Err(Error::VariableNotInClause { var: 4 })
        ));
    }

    #[test]
    fn rigidity_terms() {
        let c = clause([1, 2, 3]);
        let v = [0.9, 0.2, 0.1];
        assert_relative_eq!(
            rigidity_term(&c, 1, &v, 1e-9).unwrap(),
            0.1,
            epsilon = 1e-15
        );
        assert_eq!(rigidity_term(&c, 2, &v, 1e-9).unwrap(), 0.0);
        assert_eq!(rigidity_term(&c, 3, &v, 1e-9).unwrap(), 0.0);

        let tie = [0.6, 0.6, 0.1];
        assert_relative_eq!(
            rigidity_term(&c, 1, &tie, 1e-9).unwrap(),
            0.4,
            epsilon = 1e-15
        );
        assert_relative_eq!(
            rigidity_term(&c, 2, &tie, 1e-9).unwrap(),
            0.4,
            epsilon = 1e-15
        );
        assert_eq!(rigidity_term(&c, 3, &tie, 1e-9).unwrap(), 0.0);

        let sat = [1.0, 0.0, 0.0];
        for var in 1..=3 {
            assert_eq!(rigidity_term(&c, var, &sat, 1e-9).unwrap(), 0.0);
        }
        // negated literal attaining the maximum carries sign -1
        let neg = clause([-1, 2, 3]);
        assert_relative_eq!(
            rigidity_term(&neg, 1, &[0.1, 0.2, 0.3], 1e-9).unwrap(),
            -0.1,
            epsilon = 1e-15
        );
    }

    #[test]
    fn softmax_examples() {
        for c in [-3.0, 0.0, 7.5, 700.0] {
            for w in softmax_weights(&[c, c, c]).unwrap() {
                assert_relative_eq!(w, 1.0 / 3.0, epsilon = 1e-15);
            }
        }
        let w = softmax_weights(&[0.0, 3f64.ln()]).unwrap();
        assert_relative_eq!(w[0], 0.25, epsilon = 1e-15);
        assert_relative_eq!(w[1], 0.75, epsilon = 1e-15);
        assert_eq!(softmax_weights(&[42.0]).unwrap(), vec![1.0]);
        assert_eq!(softmax_weights::<f64>(&[]), Err(Error::EmptyInput));
    }

    fn single(v: [f64; 3], xs: f64, xl: f64) -> (CnfFormula, DmmState<f64>) {
        let f = CnfFormula::new(3, vec![clause([1, 2, 3])]).unwrap();
        let s = DmmState {
            v: v.to_vec(),
            xs: vec![xs],
            xl: vec![xl],
        };
        (f, s)
    }

    #[test]
    fn memory_derivatives() {
        let p = DmmParams::<f64>::default();
        // C = 0.25 = gamma
        let (f, s) = single([0.75, 0.1, 0.2], 0.5, 0.0);
        assert_eq!(derivatives(&f, &s, &p).unwrap().dxs[0], 0.0);
        // C = 1
        let (f, s) = single([0.0, 0.0, 0.0], 0.0, 0.0);
        let d = derivatives(&f, &s, &p).unwrap();
        assert_relative_eq!(d.dxs[0], 0.015, max_relative = 1e-12);
        assert_relative_eq!(d.dxl[0], 4.75, max_relative = 1e-12);
    }

    #[test]
    fn voltage_derivative_single_clause() {
        let p = DmmParams::<f64>::default();
        let (f, s) = single([0.2, 0.3, 0.4], 0.5, 0.0);
        let d = derivatives(&f, &s, &p).unwrap();
        assert_relative_eq!(d.dv[0], 900.0, max_relative = 1e-12);
        // variable 3 holds the max: gradient plus rigidity
        let rigid = (1.0 + 3e-3 * 3000.0) * 0.5 * 0.6;
        assert_relative_eq!(d.dv[2], 900.0 + rigid, max_relative = 1e-12);
    }

    #[test]
    fn isolated_variable_has_zero_derivative() {
        let f = CnfFormula::new(4, vec![clause([1, 2, 3])]).unwrap();
        let s = DmmState {
            v: vec![0.1, 0.2, 0.3, 0.9],
            xs: vec![0.4],
            xl: vec![1.0],
        };
        let d = derivatives(&f, &s, &DmmParams::default()).unwrap();
        assert_eq!(d.dv[3], 0.0);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let (f, mut s) = single([0.1, 0.2, 0.3], 0.0, 0.0);
        s.xl.push(0.0);
        assert!(matches!(
            derivatives(&f, &s, &DmmParams::default()),
            Err(Error::SizeMismatch(_))
        ));
    }

    #[test]
    fn works_in_single_precision() {
        let f = CnfFormula::new(3, vec![clause([1, 2, 3])]).unwrap();
        let s = DmmState::<f32> {
            v: vec![0.2, 0.3, 0.4],
            xs: vec![0.5],
            xl: vec![0.0],
        };
        let d = derivatives(&f, &s, &DmmParams::default()).unwrap();
        assert!((d.dv[0] - 900.0).abs() < 1e-2);
    }

    #[test]
    fn params_validation() {
        assert!(DmmParams::<f64>::default().validate().is_ok());
        let bad = DmmParams::<f64> {
            gamma: 1.5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = DmmParams::<f64> {
            dt: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
