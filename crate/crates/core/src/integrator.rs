//! Clamped forward-Euler integration, parameter schedules and the solve loop.

use rand::Rng;

use crate::dynamics::{derivatives_into, Derivatives, DmmParams, DmmState, Workspace};
use crate::error::{Error, Result};
use crate::imperfections::{ImperfectionModel, Perturbation};
use crate::real::Real;
use crate::rng;
use crate::sat::{Assignment, CnfFormula};

pub const DEFAULT_MAX_STEPS: u64 = 2_000_000;
/// Projected hardware time scale: integration time units per second of circuit time.
pub const TIME_UNITS_PER_SECOND: f64 = 100.0;
/// Smallest size at which [`DmmParams::for_size`] follows the `zeta` schedule.
pub const ZETA_SCHEDULE_MIN_N: usize = 100;

/// Step size schedule `0.230 * N^-0.069`.
pub fn default_dt<T: Real>(n_vars: usize) -> T {
    T::lit(0.230 * (n_vars.max(1) as f64).powf(-0.069))
}

/// Rigidity mixing schedule `exp(6.83 * (ln N)^-1.10 - 6.53)`, defined for `N >= 2`.
pub fn default_zeta<T: Real>(n_vars: usize) -> Result<T> {
    if n_vars < 2 {
        return Err(Error::InvalidArgument(format!(
            "zeta schedule needs at least 2 variables, got {n_vars}"
        )));
    }
    let ln_n = (n_vars as f64).ln();
    Ok(T::lit((6.83 * ln_n.powf(-1.10) - 6.53).exp()))
}

impl<T: Real> DmmParams<T> {
    /// Default constants with `dt` and `zeta` from the size schedules.
    ///
    /// The `zeta` schedule is held at its `N = 100` value below 100 variables:
    /// extrapolated downwards it grows quickly (0.022 at `N = 10`) and small
    /// instances then get trapped in period-2 orbits.
    pub fn for_size(n_vars: usize) -> Self {
        Self {
            dt: default_dt(n_vars),
            zeta: default_zeta(n_vars.max(ZETA_SCHEDULE_MIN_N)).expect("n >= 2"),
            ..Self::default()
        }
    }
}

pub fn time_scale_seconds<T: Real>(units: T) -> T {
    units / T::lit(TIME_UNITS_PER_SECOND)
}

/// Voltages i.i.d. uniform on [0,1) from `seed`, memories at zero.
pub fn init_state<T: Real>(f: &CnfFormula, seed: u64) -> DmmState<T> {
    let mut r = rng::stream(seed);
    let v = (0..f.n_vars()).map(|_| T::lit(r.random::<f64>())).collect();
    DmmState {
        v,
        xs: vec![T::zero(); f.n_clauses()],
        xl: vec![T::zero(); f.n_clauses()],
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig<T> {
    pub max_steps: u64,
    pub dt_override: Option<T>,
    pub zeta_override: Option<T>,
    /// Steps between satisfiability checks of the thresholded voltages.
    pub check_interval: u64,
    /// Seeds the initial voltages.
    pub seed: u64,
    pub imperfections: Option<ImperfectionModel<T>>,
    /// Record `(t, v)` every this many steps (and at start and end).
    pub trace_every: Option<u64>,
}

impl<T: Real> Default for SolverConfig<T> {
    fn default() -> Self {
        Self {
            max_steps: DEFAULT_MAX_STEPS,
            dt_override: None,
            zeta_override: None,
            check_interval: 1,
            seed: 0,
            imperfections: None,
            trace_every: None,
        }
    }
}

impl<T: Real> SolverConfig<T> {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn params_for(&self, f: &CnfFormula) -> DmmParams<T> {
        let mut p = DmmParams::for_size(f.n_vars());
        if let Some(dt) = self.dt_override {
            p.dt = dt;
        }
        if let Some(zeta) = self.zeta_override {
            p.zeta = zeta;
        }
        p
    }

    fn validate(&self) -> Result<()> {
        if self.max_steps < 1 {
            return Err(Error::InvalidArgument("max_steps must be >= 1".into()));
        }
        if self.check_interval < 1 {
            return Err(Error::InvalidArgument("check_interval must be >= 1".into()));
        }
        if self.trace_every == Some(0) {
            return Err(Error::InvalidArgument("trace interval must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult<T> {
    pub solved: bool,
    pub steps: u64,
    /// Sum of `dt` over the steps taken.
    pub integrated_time: T,
    pub assignment: Option<Assignment>,
    pub seed: u64,
    pub trajectory: Option<Vec<(T, Vec<T>)>>,
}

/// Clamped Euler stepper owning the state and scratch buffers of one run.
pub struct Integrator<'f, T> {
    formula: &'f CnfFormula,
    params: DmmParams<T>,
    state: DmmState<T>,
    derivs: Derivatives<T>,
    ws: Workspace<T>,
    perturbation: Option<Perturbation<T>>,
    steps: u64,
    time: T,
}

impl<'f, T: Real> Integrator<'f, T> {
    pub fn new(
        formula: &'f CnfFormula,
        state: DmmState<T>,
        params: DmmParams<T>,
        model: Option<ImperfectionModel<T>>,
    ) -> Result<Self> {
        state.check_shape(formula)?;
        params.validate()?;
        let perturbation = model.map(|m| Perturbation::new(m, formula)).transpose()?;
        Ok(Self {
            formula,
            params,
            derivs: Derivatives::zeros(formula.n_vars(), formula.n_clauses()),
            state,
            ws: Workspace::new(),
            perturbation,
            steps: 0,
            time: T::zero(),
        })
    }

    pub fn state(&self) -> &DmmState<T> {
        &self.state
    }

    pub fn into_state(self) -> DmmState<T> {
        self.state
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn time(&self) -> T {
        self.time
    }

    /// One step: `s' = clamp(s + dt * D)`, bounds [0,1] for `v` and `xs`, [0,M] for `xl`.
    pub fn step(&mut self) -> Result<()> {
        let f = self.formula;
        let p = match &mut self.perturbation {
            Some(pert) => {
                let p = pert.params_for_step(&self.params);
                pert.derivatives_into(f, &self.state, &p, &mut self.ws, &mut self.derivs);
                pert.advance();
                p
            }
            None => {
                derivatives_into(f, &self.state, &self.params, &mut self.ws, &mut self.derivs);
                self.params
            }
        };
        let dt = p.dt;
        let (zero, one) = (T::zero(), T::one());
        let xl_max = self.state.xl_max();
        let finite = euler_clamped(&mut self.state.v, &self.derivs.dv, dt, zero, one)
            & euler_clamped(&mut self.state.xs, &self.derivs.dxs, dt, zero, one)
            & euler_clamped(&mut self.state.xl, &self.derivs.dxl, dt, zero, xl_max);
        if !finite {
            return Err(Error::NonFinite { step: self.steps });
        }
        self.steps += 1;
        self.time = self.time + dt;
        Ok(())
    }
}

/// Returns whether every derivative was finite; the state is garbage otherwise.
#[inline]
fn euler_clamped<T: Real>(x: &mut [T], dx: &[T], dt: T, lo: T, hi: T) -> bool {
    let mut finite = true;
    for (x, &d) in x.iter_mut().zip(dx) {
        finite &= d.is_finite();
        *x = (*x + dt * d).max(lo).min(hi);
    }
    finite
}

/// Single clamped Euler step. Per-step tolerance resampling starts from step 0.
pub fn step<T: Real>(
    f: &CnfFormula,
    s: &DmmState<T>,
    p: &DmmParams<T>,
    model: Option<&ImperfectionModel<T>>,
) -> Result<DmmState<T>> {
    let mut it = Integrator::new(f, s.clone(), *p, model.copied())?;
    it.step()?;
    Ok(it.into_state())
}

/// A solve in progress: an [`Integrator`] plus the satisfiability read-out.
///
/// [`Solver::advance`] may be called repeatedly with increasing limits; the
/// trajectory of the run does not depend on how the steps are split.
pub struct Solver<'f, T> {
    it: Integrator<'f, T>,
    bits: Vec<bool>,
    solved: bool,
    check_interval: u64,
    trace_every: Option<u64>,
    trajectory: Option<Vec<(T, Vec<T>)>>,
    seed: u64,
}

impl<'f, T: Real> Solver<'f, T> {
    /// Starts from [`init_state`]; the initial state is checked too.
    pub fn new(f: &'f CnfFormula, config: &SolverConfig<T>) -> Result<Self> {
        config.validate()?;
        let params = config.params_for(f);
        let it = Integrator::new(f, init_state(f, config.seed), params, config.imperfections)?;
        let trajectory = config
            .trace_every
            .map(|_| vec![(T::zero(), it.state().v.clone())]);
        let mut solver = Self {
            bits: vec![false; f.n_vars()],
            solved: false,
            check_interval: config.check_interval,
            trace_every: config.trace_every,
            trajectory,
            seed: config.seed,
            it,
        };
        solver.solved = solver.read_out();
        Ok(solver)
    }

    fn read_out(&mut self) -> bool {
        let half = T::lit(0.5);
        for (b, &v) in self.bits.iter_mut().zip(&self.it.state().v) {
            *b = v > half;
        }
        self.it.formula.all_satisfied(&self.bits)
    }

    pub fn solved(&self) -> bool {
        self.solved
    }

    pub fn steps(&self) -> u64 {
        self.it.steps()
    }

    pub fn state(&self) -> &DmmState<T> {
        self.it.state()
    }

    /// Steps until solved or until `limit` total steps have been taken.
    pub fn advance(&mut self, limit: u64) -> Result<bool> {
        while !self.solved && self.it.steps() < limit {
            self.it.step()?;
            let n = self.it.steps();
            if let (Some(every), Some(tr)) = (self.trace_every, self.trajectory.as_mut()) {
                if n % every == 0 {
                    tr.push((self.it.time(), self.it.state().v.clone()));
                }
            }
            if n % self.check_interval == 0 {
                self.solved = self.read_out();
            }
        }
        Ok(self.solved)
    }

    pub fn finish(mut self) -> RunResult<T> {
        if let (Some(every), Some(tr)) = (self.trace_every, self.trajectory.as_mut()) {
            if self.it.steps() % every != 0 {
                tr.push((self.it.time(), self.it.state().v.clone()));
            }
        }
        RunResult {
            solved: self.solved,
            steps: self.it.steps(),
            integrated_time: self.it.time(),
            assignment: self.solved.then_some(Assignment(self.bits)),
            seed: self.seed,
            trajectory: self.trajectory,
        }
    }
}

/// Integrates from [`init_state`] until the thresholded voltages satisfy the
/// formula or the step cap is reached.
pub fn solve<T: Real>(f: &CnfFormula, config: &SolverConfig<T>) -> Result<RunResult<T>> {
    let mut solver = Solver::new(f, config)?;
    solver.advance(config.max_steps)?;
    Ok(solver.finish())
}
