use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use dmm_core::bench::{self, BatchSpec, MedianPolicy, SweepParam};
use dmm_core::circuit::{self, Graph};
use dmm_core::imperfections::{ImperfectionModel, TolMode, DEFAULT_KAPPA};
use dmm_core::integrator::{solve, DEFAULT_MAX_STEPS};
use dmm_core::sat::{
    generate_planted, parse_dimacs, serialize_dimacs_with_comments, PlantedSpec, DEFAULT_P0,
};
use dmm_core::Config;

const EXIT_USAGE: u8 = 1;
const EXIT_UNSOLVED: u8 = 2;
const EXIT_INTERNAL: u8 = 3;

#[derive(Parser)]
#[command(
    name = "dmm",
    version,
    about = "Memcomputing 3-SAT solver and benchmark driver"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a planted random 3-SAT instance in DIMACS format.
    Gen(GenArgs),
    /// Solve one DIMACS instance and print a JSON result line.
    Solve(SolveArgs),
    /// Run planted suites, report censored medians and a power-law fit.
    Bench(BenchArgs),
    /// Count solved instances over a grid of dt or zeta values.
    Sweep(SweepArgs),
    /// Compare the circuit blocks and modules against their reference formulas.
    BlocksCheck(BlocksCheckArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = bench::DEFAULT_RATIO)]
    ratio: f64,
    #[arg(long, default_value_t = DEFAULT_P0)]
    p0: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; standard output if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum TolModeArg {
    Static,
    Resample,
}

#[derive(Args)]
struct ImperfectionArgs {
    /// Component tolerance; leakage defaults to the standard rate when set.
    #[arg(long)]
    eta_tol: Option<f64>,
    /// Leakage rate.
    #[arg(long)]
    kappa: Option<f64>,
    /// Relative white-noise level on gamma, delta and epsilon.
    #[arg(long)]
    white_noise: Option<f64>,
    #[arg(long, value_enum, default_value = "static")]
    tol_mode: TolModeArg,
}

impl ImperfectionArgs {
    fn model(&self, seed: u64) -> Option<ImperfectionModel<f64>> {
        if self.eta_tol.is_none() && self.kappa.is_none() && self.white_noise.is_none() {
            return None;
        }
        let default_kappa = if self.eta_tol.is_some() {
            DEFAULT_KAPPA
        } else {
            0.0
        };
        Some(ImperfectionModel {
            eta_tol: self.eta_tol.unwrap_or(0.0),
            kappa: self.kappa.unwrap_or(default_kappa),
            white_noise_level: self.white_noise.unwrap_or(0.0),
            tol_mode: match self.tol_mode {
                TolModeArg::Static => TolMode::StaticPerSite,
                TolModeArg::Resample => TolMode::ResamplePerStep,
            },
            ..ImperfectionModel::clean(seed)
        })
    }
}

#[derive(Args)]
struct SolveArgs {
    file: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_MAX_STEPS)]
    max_steps: u64,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    zeta: Option<f64>,
    #[command(flatten)]
    imperfections: ImperfectionArgs,
    /// Write the voltage trajectory as CSV (`t,v1,...,vN`).
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Steps between trace rows.
    #[arg(long, default_value_t = 1)]
    trace_every: u64,
    /// Exit with status 2 when the instance is not solved.
    #[arg(long)]
    require_solved: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    RunAll,
    EarlyStop,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = bench::DEFAULT_RATIO)]
    ratio: f64,
    #[arg(long, default_value_t = bench::DEFAULT_INSTANCES)]
    instances: usize,
    #[arg(long, default_value_t = DEFAULT_MAX_STEPS)]
    step_cap: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads; defaults to DMM_WORKERS or the available cores.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[arg(long, value_enum, default_value = "run-all")]
    policy: PolicyArg,
    #[command(flatten)]
    imperfections: ImperfectionArgs,
    /// Per-size CSV; standard output if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-run CSV.
    #[arg(long)]
    runs_out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    param: String,
    #[arg(long, value_delimiter = ',', required = true)]
    grid: Vec<f64>,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = bench::DEFAULT_INSTANCES)]
    instances: usize,
    #[arg(long, default_value_t = DEFAULT_MAX_STEPS)]
    step_cap: u64,
    #[arg(long, default_value_t = bench::DEFAULT_RATIO)]
    ratio: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Per-grid-point CSV; standard output if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BlocksCheckArgs {
    /// Clause-module graph to check instead of the built-in one.
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Point-by-point CSV; standard output if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Outcome {
    Done,
    Unsolved,
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn gen(a: GenArgs) -> Result<Outcome> {
    let spec = PlantedSpec {
        p0: a.p0,
        ..PlantedSpec::new(a.n, a.ratio, a.seed)
    };
    let (f, _) = generate_planted(spec.n_vars, spec.ratio, spec.p0, spec.seed)?;
    let mut out = output(a.out.as_deref())?;
    out.write_all(serialize_dimacs_with_comments(&f, &spec.provenance()).as_bytes())?;
    out.flush()?;
    Ok(Outcome::Done)
}

fn solve_cmd(a: SolveArgs) -> Result<Outcome> {
    let text = std::fs::read_to_string(&a.file)
        .with_context(|| format!("cannot read {}", a.file.display()))?;
    let f = parse_dimacs(&text).with_context(|| format!("cannot parse {}", a.file.display()))?;
    let config = Config {
        max_steps: a.max_steps,
        dt_override: a.dt,
        zeta_override: a.zeta,
        seed: a.seed,
        imperfections: a.imperfections.model(a.seed),
        trace_every: a.trace.as_ref().map(|_| a.trace_every),
        ..Config::default()
    };
    let run = solve(&f, &config)?;
    if let (Some(path), Some(traj)) = (&a.trace, &run.trajectory) {
        let mut w = output(Some(path))?;
        write!(w, "t")?;
        for i in 1..=f.n_vars() {
            write!(w, ",v{i}")?;
        }
        writeln!(w)?;
        for (t, v) in traj {
            write!(w, "{t}")?;
            for x in v {
                write!(w, ",{x}")?;
            }
            writeln!(w)?;
        }
        w.flush()?;
    }
    let line = json!({
        "solved": run.solved,
        "steps": run.steps,
        "integrated_time": run.integrated_time,
        "seed": run.seed,
        "n_vars": f.n_vars(),
        "n_clauses": f.n_clauses(),
    });
    println!("{line}");
    Ok(if a.require_solved && !run.solved {
        Outcome::Unsolved
    } else {
        Outcome::Done
    })
}

fn bench_cmd(a: BenchArgs) -> Result<Outcome> {
    let spec = BatchSpec {
        sizes: a.sizes,
        ratio: a.ratio,
        instances: a.instances,
        step_cap: a.step_cap,
        imperfections: a.imperfections.model(a.seed),
        base_seed: a.seed,
        workers: a.workers,
        policy: match a.policy {
            PolicyArg::RunAll => MedianPolicy::RunAll,
            PolicyArg::EarlyStop => MedianPolicy::EarlyStop,
        },
        ..BatchSpec::default()
    };
    let stats = bench::run_batch(&spec)?;
    for r in stats.records().filter(|r| r.error.is_some()) {
        eprintln!(
            "run n={} index={} seed={} failed: {}",
            r.n,
            r.index,
            r.run_seed,
            r.error.as_deref().unwrap_or("")
        );
    }
    bench::write_stats_csv(&stats, output(a.out.as_deref())?)?;
    if let Some(p) = &a.runs_out {
        bench::write_runs_csv(&stats, output(Some(p))?)?;
    }
    let points = stats.fit_points();
    let fit = if points.len() >= 3 {
        let f = bench::fit_power_law(&points)?;
        json!({"exponent": f.exponent, "exponent_stderr": f.exponent_stderr, "prefactor": f.prefactor})
    } else {
        json!(null)
    };
    let summary = json!({"sizes": stats.sizes.len(), "fit": fit});
    if a.out.is_some() {
        println!("{summary}");
    } else {
        eprintln!("{summary}");
    }
    Ok(Outcome::Done)
}

fn sweep_cmd(a: SweepArgs) -> Result<Outcome> {
    let param: SweepParam = a.param.parse()?;
    let spec = BatchSpec {
        sizes: vec![a.n],
        ratio: a.ratio,
        instances: a.instances,
        step_cap: a.step_cap,
        base_seed: a.seed,
        workers: a.workers,
        ..BatchSpec::default()
    };
    let result = bench::sweep_parameter(param, &a.grid, &spec)?;
    bench::write_sweep_csv(&result.points, output(a.out.as_deref())?)?;
    let summary = json!({
        "param": param.to_string(),
        "peak": result.fit.peak,
        "flat": result.fit.flat,
        "amplitude": result.fit.amplitude,
        "width": result.fit.width,
    });
    if a.out.is_some() {
        println!("{summary}");
    } else {
        eprintln!("{summary}");
    }
    Ok(Outcome::Done)
}

fn blocks_check_cmd(a: BlocksCheckArgs) -> Result<Outcome> {
    let graph = match &a.graph {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("cannot read {}", p.display()))?;
            Some(Graph::parse(&text).with_context(|| format!("cannot parse {}", p.display()))?)
        }
        None => None,
    };
    let rows = circuit::blocks_check(graph.as_ref(), a.seed)?;
    circuit::check::write_rows(&rows, output(a.out.as_deref())?)?;
    let summary = circuit::check::summarize(&rows);
    for s in &summary {
        eprintln!(
            "{:<22} {:>6} points {:>4} failed  max rel err {:.3e}",
            s.suite, s.points, s.failed, s.max_rel_err
        );
    }
    let failed: usize = summary.iter().map(|s| s.failed).sum();
    if failed > 0 {
        bail!("{failed} points outside tolerance");
    }
    Ok(Outcome::Done)
}

/// Bad arguments, unreadable or malformed inputs, unwritable output paths.
fn is_usage(e: &anyhow::Error) -> bool {
    use dmm_core::Error as E;
    e.chain().any(|cause| {
        cause.is::<io::Error>()
            || cause.downcast_ref::<E>().is_some_and(|e| {
                !matches!(
                    e,
                    E::NonFinite { .. }
                        | E::SizeMismatch(_)
                        | E::LengthMismatch { .. }
                        | E::Io(_)
                        | E::EmptyInput
                )
            })
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Gen(a) => gen(a),
        Command::Solve(a) => solve_cmd(a),
        Command::Bench(a) => bench_cmd(a),
        Command::Sweep(a) => sweep_cmd(a),
        Command::BlocksCheck(a) => blocks_check_cmd(a),
    };
    match result {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Unsolved) => ExitCode::from(EXIT_UNSOLVED),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if is_usage(&e) {
                EXIT_USAGE
            } else {
                EXIT_INTERNAL
            })
        }
    }
}
