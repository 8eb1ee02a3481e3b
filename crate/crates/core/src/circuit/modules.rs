//! Clause and variable modules composed from the behavioral blocks.
//!
//! Signals are voltages that stay inside the rails for in-range inputs; the
//! large gains of the dynamics (`beta`, `alpha`, `eta_gain`) are carried by the
//! output transconductances and applied after the last block. The fixed
//! rescalings are:
//!
//! | signal | scaling |
//! |--------|---------|
//! | log amplifier input | `u * log_ref_current / 1V` |
//! | log output into antilog | `antilog_scale * ln 10 / |log_gain|` |
//! | `xl` into antilog | `antilog_scale` |
//! | `dxl` output | `alpha / antilog_scale` |
//! | `dxs` output | `beta` |
//! | `xl` into softmax | `v_thermal`, then the local maximum is subtracted |
//! | rigidity sum | attenuated by [`RIGID_ATTENUATION`], restored at the output |
//!
//! The `xl` paths saturate above `xl = rail / antilog_scale` (about 166) in the
//! clause module, where the exact values are below `exp(-150)`, and above
//! `rail / v_thermal` (about 195) in the variable module. The memories grow
//! logarithmically in time and stay far below either level in practice.

use crate::circuit::blocks::{
    adder, antilog_amp, bidirectional_switch, comparator3, gain, log_amp, multiplier,
    softmax_block, subtractor, BlockConstants,
};
use crate::dynamics::{Derivatives, DmmParams, DmmState};
use crate::error::{Error, Result};
use crate::real::Real;
use crate::sat::CnfFormula;

/// Attenuation of the rigidity sum in the variable module.
pub const RIGID_ATTENUATION: f64 = 8.0;

/// Outputs of one clause module. `dv1` and `dv2` are unsigned: the variable
/// module applies the literal polarity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClauseOutput<T> {
    pub v_max: T,
    pub c: T,
    /// Comparator flags, positive for literals attaining the maximum.
    pub b: [T; 3],
    pub dxs: T,
    pub dxl: T,
    /// `xs*C + zeta*(1-xs)*C*[argmax]` per slot.
    pub dv1: [T; 3],
    /// `(1-xs)*C*[argmax]` per slot.
    pub dv2: [T; 3],
    /// Largest magnitude seen at any block output, before output gains.
    pub peak: T,
}

struct Peak<T>(T);

impl<T: Real> Peak<T> {
    fn see(&mut self, x: T) -> T {
        self.0 = self.0.max(x.abs());
        x
    }
}

fn in_unit<T: Real>(name: &str, x: T) -> Result<()> {
    if x >= T::zero() && x <= T::one() {
        Ok(())
    } else {
        Err(Error::OutOfRange(format!("{name} = {x} outside [0, 1]")))
    }
}

/// Clause module: literal voltages `l` (already negated where needed), the
/// clause memories `xs` and `xl`.
pub fn clause_module<T: Real>(
    l: [T; 3],
    xs: T,
    xl: T,
    p: &DmmParams<T>,
    k: &BlockConstants<T>,
) -> Result<ClauseOutput<T>> {
    for (i, &li) in l.iter().enumerate() {
        in_unit(&format!("literal {}", i + 1), li)?;
    }
    in_unit("xs", xs)?;
    if !(xl >= T::zero()) {
        return Err(Error::OutOfRange(format!("xl = {xl} is negative")));
    }
    let unit = k.multiplier_unit;
    let mut pk = Peak(T::zero());

    let cmp = comparator3(k, l);
    pk.see(cmp.v_max);
    let c = pk.see(subtractor(k, unit, cmp.v_max));

    let xs_eps = pk.see(adder(k, xs, p.epsilon));
    let c_gamma = pk.see(subtractor(k, c, p.gamma));
    let dxs_v = pk.see(multiplier(k, xs_eps, c_gamma));

    // log-sum-exp route: alpha * [exp(ln(C+lambda) - xl) - exp(ln(delta+lambda) - xl)]
    let to_current = k.log_ref_current / unit;
    let log_to_antilog = k.antilog_scale * T::lit(std::f64::consts::LN_10) / k.log_gain.abs();
    let xl_v = pk.see(gain(k, xl, k.antilog_scale));
    let mut branch = |u: T| -> Result<T> {
        let u = pk.see(adder(k, u, p.lambda_shift));
        let log_v = pk.see(log_amp(k, u * to_current)?);
        let scaled = pk.see(gain(k, log_v, log_to_antilog));
        let arg = pk.see(adder(k, scaled, xl_v));
        Ok(pk.see(antilog_amp(k, arg)))
    };
    let a_c = branch(c)?;
    let a_delta = branch(p.delta)?;
    let dxl_v = pk.see(subtractor(k, a_c, a_delta));

    let grad = pk.see(multiplier(k, xs, c));
    let one_minus_xs = pk.see(subtractor(k, unit, xs));
    let rigid = pk.see(multiplier(k, one_minus_xs, c));
    let mut dv1 = [T::zero(); 3];
    let mut dv2 = [T::zero(); 3];
    for i in 0..3 {
        let r = pk.see(bidirectional_switch(rigid, cmp.b[i], cmp.b[i]));
        let zr = pk.see(gain(k, r, p.zeta));
        dv1[i] = pk.see(adder(k, grad, zr));
        dv2[i] = r;
    }

    Ok(ClauseOutput {
        v_max: cmp.v_max,
        c,
        b: cmp.b,
        dxs: p.beta * dxs_v,
        dxl: p.alpha / k.antilog_scale * dxl_v,
        dv1,
        dv2,
        peak: pk.0,
    })
}

/// One clause input of a variable module.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariableInput<T> {
    pub xl: T,
    pub dv1: T,
    pub dv2: T,
    pub negated: bool,
}

/// Variable module: softmax over the incident `xl`, polarity, summation and
/// the output gains `eta_gain` and [`RIGID_ATTENUATION`].
pub fn variable_module<T: Real>(
    inputs: &[VariableInput<T>],
    p: &DmmParams<T>,
    k: &BlockConstants<T>,
) -> Result<T> {
    if inputs.is_empty() {
        return Ok(T::zero());
    }
    let scaled: Vec<T> = inputs.iter().map(|i| gain(k, i.xl, k.v_thermal)).collect();
    let top = scaled.iter().copied().fold(T::neg_infinity(), T::max);
    let shifted: Vec<T> = scaled.iter().map(|&x| subtractor(k, x, top)).collect();
    let w = softmax_block(k, &shifted)?;
    let atten = T::one() / T::lit(RIGID_ATTENUATION);
    let (mut part1, mut part2) = (T::zero(), T::zero());
    for (inp, &wi) in inputs.iter().zip(&w) {
        let q = if inp.negated { -T::one() } else { T::one() };
        let weighted = multiplier(k, wi / k.multiplier_unit, inp.dv1);
        part1 = adder(k, part1, gain(k, weighted, q));
        part2 = adder(k, part2, gain(k, inp.dv2, q * atten));
    }
    Ok(p.eta_gain * part1 + T::lit(RIGID_ATTENUATION) * part2)
}

/// Full vector field assembled from clause and variable modules.
pub fn circuit_derivatives<T: Real>(
    f: &CnfFormula,
    s: &DmmState<T>,
    p: &DmmParams<T>,
    k: &BlockConstants<T>,
) -> Result<Derivatives<T>> {
    s.check_shape(f)?;
    let mut out = Derivatives::zeros(f.n_vars(), f.n_clauses());
    let mut modules = Vec::with_capacity(f.n_clauses());
    for (m, clause) in f.clauses().iter().enumerate() {
        let l = clause.literals().map(|lit| {
            let v = s.v[lit.index()];
            if lit.negated {
                subtractor(k, k.multiplier_unit, v)
            } else {
                v
            }
        });
        let o = clause_module(l, s.xs[m], s.xl[m], p, k)?;
        out.dxs[m] = o.dxs;
        out.dxl[m] = o.dxl;
        modules.push(o);
    }
    let mut inputs = Vec::new();
    for n in 0..f.n_vars() {
        inputs.clear();
        for o in f.incidence(n) {
            let m = o.clause as usize;
            let slot = o.slot as usize;
            inputs.push(VariableInput {
                xl: s.xl[m],
                dv1: modules[m].dv1[slot],
                dv2: modules[m].dv2[slot],
                negated: f.clauses()[m].literals()[slot].negated,
            });
        }
        out.dv[n] = variable_module(&inputs, p, k)?;
    }
    Ok(out)
}
