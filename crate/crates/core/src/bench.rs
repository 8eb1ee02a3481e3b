//! Batch experiments: planted-instance suites, censored medians, power-law
//! fits and parameter sweeps.
//!
//! The default worker count is read from the `DMM_WORKERS` environment
//! variable and falls back to the available parallelism.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imperfections::ImperfectionModel;
use crate::integrator::{
    default_dt, default_zeta, Solver, SolverConfig, DEFAULT_MAX_STEPS, ZETA_SCHEDULE_MIN_N,
};
use crate::rng::{derive_seed, tag};
use crate::sat::{evaluate, generate_planted, CnfFormula, DEFAULT_P0};

pub const WORKERS_ENV: &str = "DMM_WORKERS";
pub const DEFAULT_RATIO: f64 = 4.3;
pub const DEFAULT_INSTANCES: usize = 100;

/// How a size's runs are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MedianPolicy {
    /// Every instance runs until solved or capped.
    #[default]
    RunAll,
    /// All instances advance in lockstep and stop once the median-defining
    /// count is solved. The median equals the `RunAll` median; instances still
    /// running at that point are reported unsolved.
    EarlyStop,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchSpec {
    pub sizes: Vec<usize>,
    pub ratio: f64,
    pub instances: usize,
    pub step_cap: u64,
    /// Template model; each run uses it with its own run seed.
    pub imperfections: Option<ImperfectionModel<f64>>,
    pub base_seed: u64,
    /// 0 selects the default worker count.
    pub workers: usize,
    pub policy: MedianPolicy,
    pub p0: f64,
    pub dt_override: Option<f64>,
    pub zeta_override: Option<f64>,
}

impl Default for BatchSpec {
    fn default() -> Self {
        Self {
            sizes: Vec::new(),
            ratio: DEFAULT_RATIO,
            instances: DEFAULT_INSTANCES,
            step_cap: DEFAULT_MAX_STEPS,
            imperfections: None,
            base_seed: 0,
            workers: 0,
            policy: MedianPolicy::RunAll,
            p0: DEFAULT_P0,
            dt_override: None,
            zeta_override: None,
        }
    }
}

impl BatchSpec {
    pub fn new(sizes: Vec<usize>) -> Self {
        Self {
            sizes,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() {
            return Err(Error::InvalidArgument("no sizes given".into()));
        }
        if let Some(&n) = self.sizes.iter().find(|&&n| n < 3) {
            return Err(Error::InvalidArgument(format!(
                "size {n} below 3 variables"
            )));
        }
        if self.instances < 1 {
            return Err(Error::InvalidArgument("instances must be >= 1".into()));
        }
        if self.step_cap < 1 {
            return Err(Error::InvalidArgument("step cap must be >= 1".into()));
        }
        if !(self.ratio > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "ratio must be positive, got {}",
                self.ratio
            )));
        }
        if let Some(m) = &self.imperfections {
            m.validate()?;
        }
        Ok(())
    }

    pub fn instance_seed(&self, n: usize, index: usize) -> u64 {
        derive_seed(&[self.base_seed, tag::INSTANCE, n as u64, index as u64])
    }

    pub fn run_seed(&self, n: usize, index: usize) -> u64 {
        derive_seed(&[self.base_seed, tag::RUN, n as u64, index as u64])
    }

    /// `(dt, zeta)` used at size `n`.
    pub fn schedule(&self, n: usize) -> (f64, f64) {
        let dt = self.dt_override.unwrap_or_else(|| default_dt(n));
        let zeta = self
            .zeta_override
            .unwrap_or_else(|| default_zeta(n.max(ZETA_SCHEDULE_MIN_N)).expect("n >= 2"));
        (dt, zeta)
    }

    fn config(&self, n: usize, index: usize) -> SolverConfig<f64> {
        let seed = self.run_seed(n, index);
        let (dt, zeta) = self.schedule(n);
        SolverConfig {
            max_steps: self.step_cap,
            dt_override: Some(dt),
            zeta_override: Some(zeta),
            seed,
            imperfections: self.imperfections.map(|m| ImperfectionModel { seed, ..m }),
            ..SolverConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub n: usize,
    pub index: usize,
    pub instance_seed: u64,
    pub run_seed: u64,
    pub solved: bool,
    pub steps: u64,
    pub integrated_time: f64,
    /// Assignment checked by the independent evaluator (solved runs only).
    pub verified: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SizeStats {
    pub n: usize,
    pub instances: usize,
    pub solved: usize,
    /// `None` when nothing was solved.
    pub median_time: Option<f64>,
    pub censored: bool,
    pub dt: f64,
    pub zeta: f64,
    pub records: Vec<RunRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchStats {
    pub sizes: Vec<SizeStats>,
}

impl BatchStats {
    /// `(N, median)` for every size with a defined median.
    pub fn fit_points(&self) -> Vec<(f64, f64)> {
        self.sizes
            .iter()
            .filter_map(|s| s.median_time.map(|m| (s.n as f64, m)))
            .collect()
    }

    pub fn records(&self) -> impl Iterator<Item = &RunRecord> {
        self.sizes.iter().flat_map(|s| &s.records)
    }
}

/// Number of solved runs that fixes the median of `total` runs.
pub fn median_rank(total: usize) -> usize {
    (total + 2) / 2
}

/// Median of solved times among `total` runs capped at `cap`.
///
/// With at least [`median_rank`] solved runs the order statistic is exact.
/// Otherwise, assuming solve times uniform on `[0, T]` with `k/total` of the
/// mass below the cap, the median estimate is `total / (2k) * cap`.
pub fn censored_median(times: &[f64], total: usize, cap: f64) -> (Option<f64>, bool) {
    let k = times.len();
    if k >= median_rank(total) {
        let mut sorted = times.to_vec();
        sorted.sort_by(f64::total_cmp);
        (Some(sorted[median_rank(total) - 1]), false)
    } else if k == 0 {
        (None, true)
    } else {
        (Some(total as f64 / (2.0 * k as f64) * cap), true)
    }
}

pub fn default_workers() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&w| w > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    let workers = if workers == 0 {
        default_workers()
    } else {
        workers
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))
}

struct Slot<'f> {
    index: usize,
    formula: &'f CnfFormula,
    solver: Option<Solver<'f, f64>>,
    record: RunRecord,
}

fn make_slot<'f>(spec: &BatchSpec, n: usize, index: usize, formula: &'f CnfFormula) -> Slot<'f> {
    let mut record = RunRecord {
        n,
        index,
        instance_seed: spec.instance_seed(n, index),
        run_seed: spec.run_seed(n, index),
        solved: false,
        steps: 0,
        integrated_time: 0.0,
        verified: false,
        error: None,
    };
    let solver = match Solver::new(formula, &spec.config(n, index)) {
        Ok(s) => Some(s),
        Err(e) => {
            record.error = Some(e.to_string());
            None
        }
    };
    Slot {
        index,
        formula,
        solver,
        record,
    }
}

impl Slot<'_> {
    fn running(&self) -> bool {
        self.solver.as_ref().is_some_and(|s| !s.solved())
    }

    fn advance(&mut self, limit: u64) {
        if let Some(s) = self.solver.as_mut() {
            if let Err(e) = s.advance(limit) {
                self.record.error = Some(e.to_string());
                self.finish();
            }
        }
    }

    fn finish(&mut self) {
        let Some(s) = self.solver.take() else { return };
        let run = s.finish();
        let r = &mut self.record;
        r.steps = run.steps;
        r.integrated_time = run.integrated_time;
        r.solved = run.solved && r.error.is_none();
        if let Some(a) = run.assignment.filter(|_| r.solved) {
            match evaluate(self.formula, &a) {
                Ok(e) => r.verified = e.satisfied,
                Err(e) => r.error = Some(e.to_string()),
            }
            if !r.verified {
                r.solved = false;
                r.error
                    .get_or_insert_with(|| "assignment failed verification".into());
            }
        }
    }
}

fn run_size(spec: &BatchSpec, n: usize) -> Result<SizeStats> {
    let formulas: Vec<CnfFormula> = (0..spec.instances)
        .into_par_iter()
        .map(|i| generate_planted(n, spec.ratio, spec.p0, spec.instance_seed(n, i)).map(|(f, _)| f))
        .collect::<Result<_>>()?;
    let mut slots: Vec<Slot> = formulas
        .par_iter()
        .enumerate()
        .map(|(i, f)| make_slot(spec, n, i, f))
        .collect();

    match spec.policy {
        MedianPolicy::RunAll => slots.par_iter_mut().for_each(|s| s.advance(spec.step_cap)),
        MedianPolicy::EarlyStop => {
            let need = median_rank(spec.instances);
            let mut limit = 0u64;
            while limit < spec.step_cap {
                let solved = slots
                    .iter()
                    .filter(|s| s.solver.as_ref().is_some_and(|x| x.solved()))
                    .count();
                if solved >= need || !slots.iter().any(Slot::running) {
                    break;
                }
                limit = (limit + (limit / 8).max(1024)).min(spec.step_cap);
                slots
                    .par_iter_mut()
                    .filter(|s| s.running())
                    .for_each(|s| s.advance(limit));
            }
        }
    }
    slots.par_iter_mut().for_each(Slot::finish);
    slots.sort_by_key(|s| s.index);
    let records: Vec<RunRecord> = slots.into_iter().map(|s| s.record).collect();

    let (dt, zeta) = spec.schedule(n);
    let times: Vec<f64> = records
        .iter()
        .filter(|r| r.solved)
        .map(|r| r.integrated_time)
        .collect();
    let (median_time, censored) =
        censored_median(&times, spec.instances, spec.step_cap as f64 * dt);
    Ok(SizeStats {
        n,
        instances: spec.instances,
        solved: times.len(),
        median_time,
        censored,
        dt,
        zeta,
        records,
    })
}

/// Generates and solves every instance of the spec. Results are ordered by
/// size and instance index and do not depend on the worker count.
pub fn run_batch(spec: &BatchSpec) -> Result<BatchStats> {
    spec.validate()?;
    let pool = pool(spec.workers)?;
    let sizes = pool.install(|| {
        spec.sizes
            .iter()
            .map(|&n| run_size(spec, n))
            .collect::<Result<_>>()
    })?;
    Ok(BatchStats { sizes })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub exponent: f64,
    pub prefactor: f64,
    pub exponent_stderr: f64,
    /// `ln y - fit` per point.
    pub residuals: Vec<f64>,
}

/// Least-squares line through `(ln x, ln y)`: `y = prefactor * x^exponent`.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<FitResult> {
    if points.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "power-law fit needs >= 3 points, got {}",
            points.len()
        )));
    }
    if let Some(&(x, y)) = points
        .iter()
        .find(|(x, y)| !(*x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite()))
    {
        return Err(Error::InvalidArgument(format!(
            "power-law fit needs positive data, got ({x}, {y})"
        )));
    }
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let n = points.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument(
            "power-law fit needs distinct sizes".into(),
        ));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| y - (intercept + slope * x))
        .collect();
    let ssr: f64 = residuals.iter().map(|r| r * r).sum();
    Ok(FitResult {
        exponent: slope,
        prefactor: intercept.exp(),
        exponent_stderr: (ssr / (n - 2.0) / sxx).sqrt(),
        residuals,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    Dt,
    Zeta,
}

impl std::str::FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dt" => Ok(SweepParam::Dt),
            "zeta" => Ok(SweepParam::Zeta),
            _ => Err(Error::InvalidArgument(format!(
                "unknown sweep parameter '{s}' (dt or zeta)"
            ))),
        }
    }
}

impl std::fmt::Display for SweepParam {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SweepParam::Dt => "dt",
            SweepParam::Zeta => "zeta",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianFit {
    /// Peak location in parameter units.
    pub peak: f64,
    pub amplitude: f64,
    /// Width in log-parameter units.
    pub width: f64,
    /// No usable Gaussian; `peak` is the best grid point.
    pub flat: bool,
}

/// Least-squares fit of `a * exp(-(ln x - mu)^2 / (2 s^2))` to the counts.
///
/// Falls back to the argmax grid point with `flat = true` when the counts are
/// all equal or no peaked fit inside the grid range exists.
pub fn fit_gaussian_log(grid: &[f64], counts: &[f64]) -> Result<GaussianFit> {
    if grid.len() != counts.len() {
        return Err(Error::LengthMismatch {
            expected: grid.len(),
            found: counts.len(),
        });
    }
    if grid.is_empty() || grid.iter().any(|&g| !(g > 0.0)) {
        return Err(Error::InvalidArgument(
            "sweep grid must be nonempty and positive".into(),
        ));
    }
    let best = (0..grid.len())
        .max_by(|&a, &b| counts[a].total_cmp(&counts[b]).then(b.cmp(&a)))
        .expect("nonempty");
    let flat = GaussianFit {
        peak: grid[best],
        amplitude: counts[best],
        width: f64::INFINITY,
        flat: true,
    };
    if grid.len() < 3 || counts.iter().all(|&c| c == counts[0]) {
        return Ok(flat);
    }
    let x: Vec<f64> = grid.iter().map(|g| g.ln()).collect();
    let (lo, hi) = (
        x.iter().copied().fold(f64::INFINITY, f64::min),
        x.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    );
    let span = (hi - lo).max(f64::EPSILON);

    let sse = |p: &[f64; 3]| -> f64 {
        x.iter()
            .zip(counts)
            .map(|(&xi, &c)| {
                let m = p[0] * (-(xi - p[1]).powi(2) / (2.0 * p[2] * p[2])).exp();
                (c - m).powi(2)
            })
            .sum()
    };
    // Levenberg-Marquardt from the best grid point
    let mut p = [counts[best].max(1e-12), x[best], span / 4.0];
    let mut cost = sse(&p);
    let mut damping = 1e-3;
    for _ in 0..500 {
        let mut jtj = [[0.0f64; 3]; 3];
        let mut jtr = [0.0f64; 3];
        for (&xi, &c) in x.iter().zip(counts) {
            let d = xi - p[1];
            let e = (-(d * d) / (2.0 * p[2] * p[2])).exp();
            let m = p[0] * e;
            let j = [e, m * d / (p[2] * p[2]), m * d * d / p[2].powi(3)];
            for a in 0..3 {
                jtr[a] += j[a] * (c - m);
                for b in 0..3 {
                    jtj[a][b] += j[a] * j[b];
                }
            }
        }
        let mut improved = false;
        for _ in 0..20 {
            let mut a = jtj;
            for (i, row) in a.iter_mut().enumerate() {
                row[i] += damping * (jtj[i][i] + 1e-12);
            }
            let Some(step) = solve3(a, jtr) else { break };
            let trial = [p[0] + step[0], p[1] + step[1], p[2] + step[2]];
            let tc = sse(&trial);
            if tc.is_finite() && tc < cost {
                let rel = (cost - tc) / cost.max(f64::MIN_POSITIVE);
                p = trial;
                cost = tc;
                damping = (damping / 3.0).max(1e-12);
                improved = rel > 1e-12;
                break;
            }
            damping *= 4.0;
        }
        if !improved {
            break;
        }
    }
    let width = p[2].abs();
    let inside = p[1] >= lo - 0.5 * span / (grid.len() - 1) as f64
        && p[1] <= hi + 0.5 * span / (grid.len() - 1) as f64;
    if !(p[0] > 0.0) || !p.iter().all(|v| v.is_finite()) || !inside || width == 0.0 {
        return Ok(flat);
    }
    Ok(GaussianFit {
        peak: p[1].exp(),
        amplitude: p[0],
        width,
        flat: false,
    })
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let s: f64 = (row + 1..3).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub param: SweepParam,
    pub value: f64,
    pub n: usize,
    pub instances: usize,
    pub solved: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    pub fit: GaussianFit,
}

/// Solved counts within the step cap at each grid value, everything else at
/// the defaults of `base`, and the Gaussian peak over the grid.
pub fn sweep_parameter(param: SweepParam, grid: &[f64], base: &BatchSpec) -> Result<SweepResult> {
    if grid.is_empty() || grid.iter().any(|&g| !(g > 0.0 && g.is_finite())) {
        return Err(Error::InvalidArgument(
            "sweep grid must be nonempty and positive".into(),
        ));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(
            "sweep grid must be strictly increasing".into(),
        ));
    }
    let &[n] = &base.sizes[..] else {
        return Err(Error::InvalidArgument("sweep runs at a single size".into()));
    };
    let mut points = Vec::with_capacity(grid.len());
    for &value in grid {
        let mut spec = base.clone();
        spec.policy = MedianPolicy::RunAll;
        match param {
            SweepParam::Dt => spec.dt_override = Some(value),
            SweepParam::Zeta => spec.zeta_override = Some(value),
        }
        let stats = run_batch(&spec)?;
        points.push(SweepPoint {
            param,
            value,
            n,
            instances: spec.instances,
            solved: stats.sizes[0].solved,
        });
    }
    let counts: Vec<f64> = points.iter().map(|p| p.solved as f64).collect();
    let fit = fit_gaussian_log(grid, &counts)?;
    Ok(SweepResult { points, fit })
}

// ---------------------------------------------------------------------------
// CSV artifacts

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeRow {
    pub n: usize,
    pub instances: usize,
    pub solved: usize,
    pub median_time: Option<f64>,
    pub censored: bool,
    pub dt: f64,
    pub zeta: f64,
}

impl From<&SizeStats> for SizeRow {
    fn from(s: &SizeStats) -> Self {
        Self {
            n: s.n,
            instances: s.instances,
            solved: s.solved,
            median_time: s.median_time,
            censored: s.censored,
            dt: s.dt,
            zeta: s.zeta,
        }
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

fn write_csv<W: Write, R: Serialize>(rows: impl IntoIterator<Item = R>, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r).map_err(csv_err)?;
    }
    out.flush().map_err(|e| Error::Io(e.to_string()))
}

fn read_csv<Rd: Read, R: for<'de> Deserialize<'de>>(r: Rd) -> Result<Vec<R>> {
    csv::Reader::from_reader(r)
        .deserialize()
        .map(|x| x.map_err(csv_err))
        .collect()
}

/// Per-size summary, header `n,instances,solved,median_time,censored,dt,zeta`.
pub fn write_stats_csv<W: Write>(stats: &BatchStats, w: W) -> Result<()> {
    write_csv(stats.sizes.iter().map(SizeRow::from), w)
}

pub fn read_stats_csv<R: Read>(r: R) -> Result<Vec<SizeRow>> {
    read_csv(r)
}

pub fn write_runs_csv<W: Write>(stats: &BatchStats, w: W) -> Result<()> {
    write_csv(stats.records(), w)
}

pub fn read_runs_csv<R: Read>(r: R) -> Result<Vec<RunRecord>> {
    read_csv(r)
}

pub fn write_sweep_csv<W: Write>(points: &[SweepPoint], w: W) -> Result<()> {
    write_csv(points, w)
}

pub fn read_sweep_csv<R: Read>(r: R) -> Result<Vec<SweepPoint>> {
    read_csv(r)
}
