//! Transfer functions of the analog building blocks.
//!
//! Every block is an ideal transfer function followed by saturation at the
//! op-amp rails. Voltages are in volts, currents in amperes.

use crate::error::{Error, Result};
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockConstants<T> {
    /// Op-amp saturation, outputs are clipped to `[-rail, rail]`.
    pub rail: T,
    /// `k_B T / q` at 25 °C.
    pub v_thermal: T,
    /// Diode drop added to the comparator flag of a maximal input.
    pub v_diode: T,
    pub c_integrate: T,
    /// Log amplifier slope in volts per decade (negative).
    pub log_gain: T,
    pub log_ref_current: T,
    pub antilog_scale: T,
    pub multiplier_unit: T,
    /// Integration time units per second of circuit time.
    pub time_units_per_second: T,
    /// Inputs within this distance of the maximum raise their comparator flag.
    pub tie_tol: T,
}

impl<T: Real> Default for BlockConstants<T> {
    fn default() -> Self {
        Self {
            rail: T::lit(5.0),
            v_thermal: T::lit(25.68e-3),
            v_diode: T::lit(0.6),
            c_integrate: T::lit(10e-9),
            log_gain: T::lit(-0.375),
            log_ref_current: T::lit(1e-6),
            antilog_scale: T::lit(30e-3),
            multiplier_unit: T::one(),
            time_units_per_second: T::lit(100.0),
            tie_tol: T::lit(crate::dynamics::DEFAULT_TIE_TOL),
        }
    }
}

impl<T: Real> BlockConstants<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.rail > T::zero()) || !(self.v_thermal > T::zero()) {
            return Err(Error::InvalidArgument(
                "rail and thermal voltage must be positive".into(),
            ));
        }
        if !(self.antilog_scale > T::zero()) || !(self.log_ref_current > T::zero()) {
            return Err(Error::InvalidArgument(
                "log/antilog scales must be positive".into(),
            ));
        }
        if self.log_gain == T::zero() || self.multiplier_unit == T::zero() {
            return Err(Error::InvalidArgument(
                "log gain and multiplier unit must be nonzero".into(),
            ));
        }
        Ok(())
    }

    #[inline]
    pub fn clip(&self, x: T) -> T {
        x.max(-self.rail).min(self.rail)
    }
}

pub fn adder<T: Real>(k: &BlockConstants<T>, v1: T, v2: T) -> T {
    k.clip(v1 + v2)
}

pub fn subtractor<T: Real>(k: &BlockConstants<T>, v_plus: T, v_minus: T) -> T {
    k.clip(v_plus - v_minus)
}

/// `X * Y / 1V`.
pub fn multiplier<T: Real>(k: &BlockConstants<T>, x: T, y: T) -> T {
    k.clip(x * y / k.multiplier_unit)
}

/// Resistive gain stage; used for the fixed rescalings between stages.
pub fn gain<T: Real>(k: &BlockConstants<T>, x: T, factor: T) -> T {
    k.clip(factor * x)
}

/// `log_gain * log10(i_in / log_ref_current)`.
pub fn log_amp<T: Real>(k: &BlockConstants<T>, i_in: T) -> Result<T> {
    if !(i_in > T::zero()) {
        return Err(Error::OutOfRange(format!(
            "log amplifier needs a positive current, got {i_in}"
        )));
    }
    Ok(k.clip(k.log_gain * (i_in / k.log_ref_current).log10()))
}

/// `antilog_scale * exp(-v_in / antilog_scale)`.
pub fn antilog_amp<T: Real>(k: &BlockConstants<T>, v_in: T) -> T {
    k.clip(k.antilog_scale * (-v_in / k.antilog_scale).exp())
}

/// Common-emitter BJT array: `y_i = 1V * exp(x_i/V_T) / sum_j exp(x_j/V_T)`.
pub fn softmax_block<T: Real>(k: &BlockConstants<T>, x: &[T]) -> Result<Vec<T>> {
    let top = x.iter().copied().reduce(T::max).ok_or(Error::EmptyInput)?;
    let e: Vec<T> = x
        .iter()
        .map(|&xi| ((xi - top) / k.v_thermal).exp())
        .collect();
    let sum = e.iter().fold(T::zero(), |a, &b| a + b);
    Ok(e.into_iter()
        .map(|ei| k.clip(ei / sum * k.multiplier_unit))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparatorOut<T> {
    pub v_max: T,
    /// `v_max + v_diode` for every input attaining the maximum, `-rail` otherwise.
    pub b: [T; 3],
}

impl<T: Real> ComparatorOut<T> {
    pub fn is_max(&self, i: usize) -> bool {
        self.b[i] > T::zero()
    }
}

pub fn comparator3<T: Real>(k: &BlockConstants<T>, v: [T; 3]) -> ComparatorOut<T> {
    let v_max = k.clip(v[0].max(v[1]).max(v[2]));
    let high = k.clip(v_max + k.v_diode);
    let floor = v_max - k.tie_tol;
    ComparatorOut {
        v_max,
        b: v.map(|vi| if vi >= floor { high } else { -k.rail }),
    }
}

/// Passes a non-negative signal iff `ctrl_plus > 0` and a negative one iff `ctrl_minus > 0`.
pub fn bidirectional_switch<T: Real>(v_in: T, ctrl_plus: T, ctrl_minus: T) -> T {
    let open = if v_in >= T::zero() {
        ctrl_plus > T::zero()
    } else {
        ctrl_minus > T::zero()
    };
    if open {
        v_in
    } else {
        T::zero()
    }
}

/// Capacitor integrator with switch-gated bounds.
///
/// The window comparators hold `ctrl_+` high while `x < hi` and `ctrl_-` high
/// while `x > lo`; the gated signal charges the capacitor so that one second of
/// circuit time advances `time_units_per_second` units of integration time.
pub fn integrator_cell<T: Real>(
    k: &BlockConstants<T>,
    x: T,
    dx: T,
    dt_seconds: T,
    window: (T, T),
) -> T {
    let (lo, hi) = window;
    let ctrl_plus = if x < hi { k.rail } else { -k.rail };
    let ctrl_minus = if x > lo { k.rail } else { -k.rail };
    let gated = bidirectional_switch(dx, ctrl_plus, ctrl_minus);
    (x + gated * dt_seconds * k.time_units_per_second)
        .max(lo)
        .min(hi)
}
