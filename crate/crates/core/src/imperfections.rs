//! Physical non-idealities layered on the vector field.
//!
//! Three channels:
//! - component tolerance: the result of every addition and multiplication of the
//!   field is scaled by a factor in `[1 - eta_tol, 1 + eta_tol]`, one factor per
//!   arithmetic site (site map in [`crate::dynamics::site`]);
//! - capacitor leakage: every derivative loses `kappa` times its own state;
//! - white noise on the bias sources: `gamma`, `delta` and `epsilon` are scaled
//!   by `1 + level * g`, `g` standard normal, redrawn every step.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::dynamics::{eval_field, site, Derivatives, DmmParams, DmmState, Workspace};
use crate::error::{Error, Result};
use crate::real::Real;
use crate::rng::{self, tag, StreamRng};
use crate::sat::CnfFormula;

pub const DEFAULT_KAPPA: f64 = 1e-3;
const PARAM_FLOOR: f64 = 1e-6;
/// Stream index used for static tolerance factors.
const STATIC_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TolMode {
    /// Factors drawn once per run, as for fixed resistor values.
    #[default]
    StaticPerSite,
    /// Factors redrawn every step, as for temperature drift.
    ResamplePerStep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TolDistribution {
    #[default]
    Uniform,
    /// Normal with standard deviation `eta_tol / 2`, truncated to the tolerance band.
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImperfectionModel<T> {
    pub eta_tol: T,
    pub tol_mode: TolMode,
    pub distribution: TolDistribution,
    pub kappa: T,
    pub white_noise_level: T,
    pub seed: u64,
}

impl<T: Real> ImperfectionModel<T> {
    /// All channels off.
    pub fn clean(seed: u64) -> Self {
        Self {
            eta_tol: T::zero(),
            tol_mode: TolMode::default(),
            distribution: TolDistribution::default(),
            kappa: T::zero(),
            white_noise_level: T::zero(),
            seed,
        }
    }

    /// Leakage at the default rate, no tolerance, no white noise.
    pub fn leakage_only(seed: u64) -> Self {
        Self {
            kappa: T::lit(DEFAULT_KAPPA),
            ..Self::clean(seed)
        }
    }

    /// Tolerance `eta_tol` together with default leakage.
    pub fn tolerance(eta_tol: T, seed: u64) -> Self {
        Self {
            eta_tol,
            ..Self::leakage_only(seed)
        }
    }

    pub fn white_noise(level: T, seed: u64) -> Self {
        Self {
            white_noise_level: level,
            ..Self::clean(seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta_tol >= T::zero() && self.eta_tol < T::one()) {
            return Err(Error::InvalidArgument(format!(
                "eta_tol must lie in [0, 1), got {}",
                self.eta_tol
            )));
        }
        if !(self.kappa >= T::zero()) || !self.kappa.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "kappa must be >= 0, got {}",
                self.kappa
            )));
        }
        if !(self.white_noise_level >= T::zero()) || !self.white_noise_level.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "white noise level must be >= 0, got {}",
                self.white_noise_level
            )));
        }
        Ok(())
    }
}

/// One multiplicative factor per arithmetic site of the field.
#[derive(Debug, Clone, PartialEq)]
pub struct ToleranceSites<T> {
    factors: Vec<T>,
}

impl<T: Real> ToleranceSites<T> {
    /// Draws factors for a formula with `n_clauses` clauses from the stream
    /// `(model.seed, stream)`; site `k` always takes the `k`-th draw.
    pub fn draw(model: &ImperfectionModel<T>, n_clauses: usize, stream: u64) -> Self {
        let mut sites = Self {
            factors: vec![T::one(); site::count(n_clauses)],
        };
        sites.redraw(model, stream);
        sites
    }

    fn redraw(&mut self, model: &ImperfectionModel<T>, stream: u64) {
        let mut rng = rng::stream(rng::derive_seed(&[model.seed, tag::TOLERANCE, stream]));
        let eta = model.eta_tol.as_f64();
        match model.distribution {
            TolDistribution::Uniform => {
                for f in &mut self.factors {
                    let u: f64 = rng.random();
                    *f = T::lit(1.0 + eta * (2.0 * u - 1.0));
                }
            }
            TolDistribution::Gaussian => {
                for f in &mut self.factors {
                    let g: f64 = rng.sample(StandardNormal);
                    *f = T::lit(1.0 + (0.5 * eta * g).clamp(-eta, eta));
                }
            }
        }
    }

    pub fn factors(&self) -> &[T] {
        &self.factors
    }
}

/// Per-run imperfection state: the model, its current site factors and the
/// white-noise stream.
#[derive(Debug, Clone)]
pub struct Perturbation<T> {
    model: ImperfectionModel<T>,
    sites: ToleranceSites<T>,
    noise: StreamRng,
    step: u64,
}

impl<T: Real> Perturbation<T> {
    pub fn new(model: ImperfectionModel<T>, f: &CnfFormula) -> Result<Self> {
        model.validate()?;
        let stream = match model.tol_mode {
            TolMode::StaticPerSite => STATIC_STREAM,
            TolMode::ResamplePerStep => 0,
        };
        Ok(Self {
            sites: ToleranceSites::draw(&model, f.n_clauses(), stream),
            noise: rng::stream(rng::derive_seed(&[model.seed, tag::WHITE_NOISE])),
            step: 0,
            model,
        })
    }

    pub fn model(&self) -> &ImperfectionModel<T> {
        &self.model
    }

    pub fn sites(&self) -> &ToleranceSites<T> {
        &self.sites
    }

    /// Parameters for the current step with white noise applied.
    pub fn params_for_step(&mut self, base: &DmmParams<T>) -> DmmParams<T> {
        perturb_params(base, self.model.white_noise_level, &mut self.noise)
    }

    /// Field with tolerance factors, followed by leakage.
    pub fn derivatives_into(
        &self,
        f: &CnfFormula,
        s: &DmmState<T>,
        p: &DmmParams<T>,
        ws: &mut Workspace<T>,
        out: &mut Derivatives<T>,
    ) {
        eval_field(f, s, p, self.sites.factors(), ws, out);
        apply_leakage(self.model.kappa, s, out);
    }

    /// Moves to the next step, redrawing factors in per-step mode.
    pub fn advance(&mut self) {
        self.step += 1;
        if self.model.tol_mode == TolMode::ResamplePerStep {
            let (model, step) = (self.model, self.step);
            self.sites.redraw(&model, step);
        }
    }
}

/// Leakage `d <- d - kappa * x` on all three state families.
pub fn apply_leakage<T: Real>(kappa: T, s: &DmmState<T>, d: &mut Derivatives<T>) {
    let pairs = [(&mut d.dv, &s.v), (&mut d.dxs, &s.xs), (&mut d.dxl, &s.xl)];
    for (deriv, state) in pairs {
        for (dx, &x) in deriv.iter_mut().zip(state) {
            *dx = *dx - kappa * x;
        }
    }
}

/// Field under `model` at its first step (static factors, or the step-0 draw).
pub fn perturbed_derivatives<T: Real>(
    f: &CnfFormula,
    s: &DmmState<T>,
    p: &DmmParams<T>,
    model: &ImperfectionModel<T>,
) -> Result<Derivatives<T>> {
    s.check_shape(f)?;
    let pert = Perturbation::new(*model, f)?;
    let mut out = Derivatives::zeros(f.n_vars(), f.n_clauses());
    pert.derivatives_into(f, s, p, &mut Workspace::new(), &mut out);
    Ok(out)
}

/// Copy of `p` with `gamma`, `delta`, `epsilon` each scaled by `1 + level * g`,
/// floored at 1e-6.
pub fn perturb_params<T: Real, R: Rng + ?Sized>(
    p: &DmmParams<T>,
    level: T,
    rng: &mut R,
) -> DmmParams<T> {
    let floor = T::lit(PARAM_FLOOR);
    let mut jitter = |x: T| {
        let g: f64 = rng.sample(StandardNormal);
        (x * (T::one() + level * T::lit(g))).max(floor)
    };
    DmmParams {
        gamma: jitter(p.gamma),
        delta: jitter(p.delta),
        epsilon: jitter(p.epsilon),
        ..*p
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::derivatives;
    use crate::sat::{generate_planted, Clause};
    use rand::SeedableRng;

    fn random_state(f: &CnfFormula, seed: u64) -> DmmState<f64> {
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        DmmState {
            v: (0..f.n_vars()).map(|_| r.random()).collect(),
            xs: (0..f.n_clauses()).map(|_| r.random()).collect(),
            xl: (0..f.n_clauses())
                .map(|_| r.random::<f64>() * 5.0)
                .collect(),
        }
    }

    #[test]
    fn clean_model_is_bit_identical() {
        let (f, _) = generate_planted(20, 4.3, 0.08, 3).unwrap();
        let p = DmmParams::default();
        for seed in 0..5 {
            let s = random_state(&f, seed);
            let clean = derivatives(&f, &s, &p).unwrap();
            let model = ImperfectionModel::clean(seed);
            assert_eq!(perturbed_derivatives(&f, &s, &p, &model).unwrap(), clean);
        }
    }

    #[test]
    fn leakage_on_saturated_variable() {
        // v1 = 1 satisfies the only clause, so the clean dv1 is zero
        let f = CnfFormula::new(3, vec![Clause::from_dimacs([1, 2, 3]).unwrap()]).unwrap();
        let s = DmmState {
            v: vec![1.0, 0.0, 0.0],
            xs: vec![0.0],
            xl: vec![0.0],
        };
        let p = DmmParams::default();
        assert_eq!(derivatives(&f, &s, &p).unwrap().dv[0], 0.0);
        let d = perturbed_derivatives(&f, &s, &p, &ImperfectionModel::leakage_only(0)).unwrap();
        assert_eq!(d.dv[0], -1e-3);
    }

    #[test]
    fn leakage_only_constructor() {
        let m = ImperfectionModel::<f64>::leakage_only(9);
        assert_eq!(m.eta_tol, 0.0);
        assert_eq!(m.kappa, 1e-3);
        assert_eq!(m.white_noise_level, 0.0);
    }

    #[test]
    fn leakage_is_linear_and_opposes_state() {
        let s = DmmState {
            v: vec![0.3, 0.0],
            xs: vec![0.5],
            xl: vec![2.0],
        };
        let mut once = Derivatives::zeros(2, 1);
        apply_leakage(1e-3, &s, &mut once);
        assert_eq!(once.dv, vec![-3e-4, 0.0]);
        let doubled = DmmState {
            v: s.v.iter().map(|x| 2.0 * x).collect(),
            xs: s.xs.iter().map(|x| 2.0 * x).collect(),
            xl: s.xl.iter().map(|x| 2.0 * x).collect(),
        };
        let mut twice = Derivatives::zeros(2, 1);
        apply_leakage(1e-3, &doubled, &mut twice);
        for (a, b) in once
            .dv
            .iter()
            .chain(&once.dxs)
            .chain(&once.dxl)
            .zip(twice.dv.iter().chain(&twice.dxs).chain(&twice.dxl))
        {
            assert_eq!(2.0 * a, *b);
            assert!(*a <= 0.0);
        }
        let mut zero = Derivatives::zeros(2, 1);
        apply_leakage(1e-3, &DmmState::zeros(2, 1), &mut zero);
        assert_eq!(zero, Derivatives::zeros(2, 1));
    }

    #[test]
    fn static_factors_are_stable_and_banded() {
        let (f, _) = generate_planted(30, 4.3, 0.08, 1).unwrap();
        let model = ImperfectionModel::tolerance(0.05, 4);
        let a = Perturbation::new(model, &f).unwrap();
        let mut b = Perturbation::new(model, &f).unwrap();
        assert_eq!(a.sites(), b.sites());
        b.advance();
        assert_eq!(a.sites(), b.sites());
        assert!(a
            .sites()
            .factors()
            .iter()
            .all(|&x| (0.95..=1.05).contains(&x)));
        assert_eq!(a.sites().factors().len(), site::count(f.n_clauses()));

        let s = random_state(&f, 2);
        let p = DmmParams::default();
        assert_eq!(
            perturbed_derivatives(&f, &s, &p, &model).unwrap(),
            perturbed_derivatives(&f, &s, &p, &model).unwrap()
        );
    }

    #[test]
    fn resampled_factors_change_between_steps() {
        let (f, _) = generate_planted(10, 4.3, 0.08, 1).unwrap();
        let model = ImperfectionModel {
            tol_mode: TolMode::ResamplePerStep,
            distribution: TolDistribution::Gaussian,
            ..ImperfectionModel::tolerance(0.1, 4)
        };
        let mut pert = Perturbation::new(model, &f).unwrap();
        let before = pert.sites().clone();
        pert.advance();
        assert_ne!(&before, pert.sites());
        assert!(pert
            .sites()
            .factors()
            .iter()
            .all(|&x| (0.9..=1.1).contains(&x)));
    }

    #[test]
    fn zero_level_keeps_params() {
        let p = DmmParams::<f64>::default();
        let mut r = rng::stream(1);
        assert_eq!(perturb_params(&p, 0.0, &mut r), p);
    }

    #[test]
    fn noisy_params_stay_positive() {
        let p = DmmParams::<f64>::default();
        let mut r = rng::stream(1);
        for _ in 0..1000 {
            let q = perturb_params(&p, 5.0, &mut r);
            assert!(q.gamma >= 1e-6 && q.delta >= 1e-6 && q.epsilon >= 1e-6);
            assert_eq!(q.alpha, p.alpha);
            assert_eq!(q.dt, p.dt);
        }
    }

    #[test]
    fn model_validation() {
        assert!(ImperfectionModel::<f64>::tolerance(1.0, 0)
            .validate()
            .is_err());
        assert!(ImperfectionModel::<f64>::tolerance(-0.1, 0)
            .validate()
            .is_err());
        assert!(ImperfectionModel::<f64>::white_noise(-0.1, 0)
            .validate()
            .is_err());
        assert!(ImperfectionModel::<f64>::tolerance(0.2, 0)
            .validate()
            .is_ok());
    }
}
