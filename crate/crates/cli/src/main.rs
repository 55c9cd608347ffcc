//! `bono`: generate instances, approximate their fronts, derive targets, run
//! solvers and draw runtime profiles.
//!
//! Exit codes: 0 success, 2 usage or input error, 3 finished with warnings (an
//! approximation stopped early, a target set is coarse, a run failed).

mod external;
mod pipeline;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use bono::frontapprox::{
    approximate_front, ApproxOptions, FrontApproximation, DEFAULT_MAX_ITERATIONS,
};
use bono::generator::{generate, generate_with, ClassId, GeneratorConfig, ProblemInstance};
use bono::harness::{
    self, read_run_csv, write_run_csv, RunRecord, Solver, TargetSet, DEFAULT_BUDGET_PER_DIM,
};
use bono::indicators::IndicatorKind;
use bono::profiles::{aggregate, render_svg, virtual_best, write_csv, Grouping, SvgStyle};
use bono::solvers::{SolverConfig, SolverKind};
use clap::{Args, Parser, Subcommand};

use external::ExternalSolver;

/// Environment variable that replaces every seed list (for CI).
pub const SEED_OVERRIDE_VAR: &str = "BONO_SEED_OVERRIDE";

#[derive(Parser)]
#[command(
    name = "bono",
    version,
    about = "Bi-objective peak benchmark: instances, certified fronts, runs and profiles"
)]
struct Cli {
    /// Leave timestamps out of the outputs so reruns are byte-identical.
    #[arg(long, global = true)]
    deterministic: bool,

    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write instance files.
    Generate(GenerateArgs),
    /// Approximate the Pareto front of an instance to a certified tolerance.
    Approximate(ApproximateArgs),
    /// Derive the regret targets from a front approximation.
    Targets(TargetsArgs),
    /// Run a solver on an instance and record when each target is hit.
    Run(RunArgs),
    /// Aggregate run records into runtime profiles (CSV and SVG).
    Profile(ProfileArgs),
    /// Everything above for a grid of classes, dimensions and seeds.
    Pipeline(pipeline::PipelineArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Classes, comma-separated (BONO1..BONO20).
    #[arg(long, required_unless_present = "config")]
    class: Option<String>,
    /// Generator configuration (JSON) for a custom class.
    #[arg(long, conflicts_with = "class")]
    config: Option<PathBuf>,
    /// Dimensions: a list like 2,3,5 or a range like 2..10.
    #[arg(long, default_value = "2")]
    dim: String,
    /// Seeds: a list or an inclusive range like 0..14.
    #[arg(long, default_value = "0")]
    seed: String,
    /// Output file (single instance, ending in .json) or directory.
    #[arg(long)]
    out: PathBuf,
    /// Indent the JSON.
    #[arg(long)]
    pretty: bool,
}

#[derive(Args)]
struct ApproximateArgs {
    #[arg(long)]
    instance: PathBuf,
    /// hv or r2.
    #[arg(long, default_value = "hv")]
    indicator: String,
    /// Target certificate; 1e-5 for hv and 1e-6 for r2 by default.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_MAX_ITERATIONS)]
    max_iter: u64,
    /// Record ε_total and the indicator value every this many iterations.
    #[arg(long)]
    trace_every: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TargetsArgs {
    #[arg(long)]
    front: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Target files (one per indicator).
    #[arg(long, required = true, num_args = 1..)]
    targets: Vec<PathBuf>,
    /// random_search, nsga2_lite or external.
    #[arg(long, default_value = "random_search")]
    algorithm: String,
    /// Shell command of an external solver (with --algorithm external).
    #[arg(long)]
    solver_cmd: Option<String>,
    /// Name recorded for an external solver.
    #[arg(long, default_value = "external")]
    solver_id: String,
    /// Evaluations per decision variable.
    #[arg(long, default_value_t = DEFAULT_BUDGET_PER_DIM)]
    budget_mult: u64,
    /// Total evaluations; overrides --budget-mult.
    #[arg(long)]
    budget: Option<u64>,
    /// Solver seed; the instance seed by default.
    #[arg(long)]
    solver_seed: Option<u64>,
    #[arg(long, default_value_t = 100)]
    population_size: usize,
    /// Run CSV to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ProfileArgs {
    /// Run CSV files or glob patterns.
    #[arg(long, required = true, num_args = 1..)]
    runs: Vec<String>,
    /// Split groups by class and/or dim (comma-separated); indicators are always split.
    #[arg(long, default_value = "none")]
    group_by: String,
    /// Plot raw evaluation counts instead of evaluations per variable.
    #[arg(long)]
    raw_evals: bool,
    /// Do not add the virtual best solver.
    #[arg(long)]
    no_vbs: bool,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
    /// key = value file styling the SVG.
    #[arg(long)]
    style: Option<PathBuf>,
}

/// A failure reported to the user; always exit code 2.
#[derive(Debug)]
pub struct Failure(pub String);

impl From<bono::Error> for Failure {
    fn from(e: bono::Error) -> Self {
        Failure(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure(e.to_string())
    }
}

pub type CliResult<T> = Result<T, Failure>;

/// How a command finished when it did not fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Outcome {
    Clean,
    Warnings,
}

pub fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| Failure(format!("cannot read {}: {e}", path.display())))
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text).map_err(|e| Failure(format!("cannot write {}: {e}", path.display())))
}

pub fn read_instance(path: &Path) -> CliResult<ProblemInstance> {
    ProblemInstance::from_json(&read_text(path)?)
        .map_err(|e| Failure(format!("{}: {e}", path.display())))
}

/// `2,3,5`, `0..14` (inclusive) or a mix like `0..4,9`.
pub fn parse_list<T>(text: &str) -> CliResult<Vec<T>>
where
    T: FromStr + TryFrom<u64>,
{
    let bad = || {
        Failure(format!(
            "cannot read the list {text:?}; use e.g. 2,3,5 or 0..14"
        ))
    };
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((a, b)) = part.split_once("..") {
            let a: u64 = a.trim().parse().map_err(|_| bad())?;
            let b: u64 = b
                .trim()
                .trim_start_matches('=')
                .parse()
                .map_err(|_| bad())?;
            if a > b {
                return Err(bad());
            }
            for v in a..=b {
                out.push(T::try_from(v).map_err(|_| bad())?);
            }
        } else {
            out.push(part.parse().map_err(|_| bad())?);
        }
    }
    if out.is_empty() {
        return Err(bad());
    }
    Ok(out)
}

/// Seeds from the command line unless the override variable is set.
pub fn seeds(arg: &str) -> CliResult<Vec<u64>> {
    match std::env::var(SEED_OVERRIDE_VAR) {
        Ok(v) if !v.trim().is_empty() => {
            log::info!("{SEED_OVERRIDE_VAR}={v} replaces --seed {arg}");
            parse_list(&v)
        }
        _ => parse_list(arg),
    }
}

pub fn parse_classes(text: &str) -> CliResult<Vec<ClassId>> {
    text.split(',')
        .map(str::trim)
        .filter(|c| !c.is_empty())
        .map(|c| c.parse::<ClassId>().map_err(Failure::from))
        .collect()
}

pub fn parse_indicator(name: &str) -> CliResult<IndicatorKind> {
    IndicatorKind::from_name(name)
        .ok_or_else(|| Failure(format!("unknown indicator {name:?}; expected hv or r2")))
}

pub fn instance_file_name(class: &ClassId, d: usize, seed: u64) -> String {
    format!("{class}_d{d}_s{seed}")
}

fn cmd_generate(a: &GenerateArgs) -> CliResult<Outcome> {
    let dims: Vec<usize> = parse_list(&a.dim)?;
    let seeds = seeds(&a.seed)?;
    let config = match &a.config {
        Some(p) => Some(
            serde_json::from_str::<GeneratorConfig>(&read_text(p)?)
                .map_err(|e| Failure(format!("{}: {e}", p.display())))?,
        ),
        None => None,
    };
    let classes = match &config {
        Some(c) => vec![c.class_id.clone()],
        None => parse_classes(a.class.as_deref().unwrap_or_default())?,
    };
    let count = classes.len() * dims.len() * seeds.len();
    let single_file = count == 1 && a.out.extension().is_some_and(|e| e == "json");
    for class in &classes {
        for &d in &dims {
            for &seed in &seeds {
                let inst = match &config {
                    Some(c) => generate_with(c, d, seed)?,
                    None => generate(class, d, seed)?,
                };
                let text = if a.pretty {
                    inst.to_json_pretty()
                } else {
                    inst.to_json()
                };
                let path = if single_file {
                    a.out.clone()
                } else {
                    a.out
                        .join(format!("{}.json", instance_file_name(class, d, seed)))
                };
                write_text(&path, &text)?;
                log::info!("wrote {}", path.display());
            }
        }
    }
    eprintln!("generated {count} instance(s)");
    Ok(Outcome::Clean)
}

/// Approximates and reports; shared with the pipeline.
pub fn approximate(
    inst: &ProblemInstance,
    kind: IndicatorKind,
    delta: Option<f64>,
    max_iter: u64,
    trace_every: Option<u64>,
) -> CliResult<FrontApproximation> {
    let options = ApproxOptions {
        delta: delta.unwrap_or(ApproxOptions::for_kind(&kind).delta),
        max_iterations: max_iter,
        trace_every,
        ..ApproxOptions::for_kind(&kind)
    };
    let front = approximate_front(inst, kind, &options)?;
    if front.early_stopped {
        log::warn!(
            "{} d={} seed={} {}: stopped at ε_total = {:e} > δ = {:e} after {} iterations",
            inst.class_id(),
            inst.dimension(),
            inst.seed(),
            kind.name(),
            front.epsilon_total_final,
            front.delta,
            front.iterations
        );
    }
    Ok(front)
}

fn cmd_approximate(a: &ApproximateArgs) -> CliResult<Outcome> {
    let inst = read_instance(&a.instance)?;
    let kind = parse_indicator(&a.indicator)?;
    let front = approximate(&inst, kind, a.delta, a.max_iter, a.trace_every)?;
    write_text(&a.out, &front.to_json())?;
    eprintln!(
        "{} = {} (ε_total {:e}, {} points, {} iterations, {} contributing pairs)",
        kind.name(),
        front.indicator_value,
        front.epsilon_total_final,
        front.points.len(),
        front.iterations,
        front.contributing_pairs
    );
    Ok(if front.early_stopped {
        Outcome::Warnings
    } else {
        Outcome::Clean
    })
}

fn cmd_targets(a: &TargetsArgs) -> CliResult<Outcome> {
    let front = FrontApproximation::from_json(&read_text(&a.front)?)
        .map_err(|e| Failure(format!("{}: {e}", a.front.display())))?;
    let set = TargetSet::from_front(&front);
    write_text(&a.out, &set.to_json())?;
    let warned = set.precision_warning().is_some() || front.early_stopped;
    Ok(if warned {
        Outcome::Warnings
    } else {
        Outcome::Clean
    })
}

pub fn read_targets(path: &Path) -> CliResult<TargetSet> {
    TargetSet::from_json(&read_text(path)?).map_err(|e| Failure(format!("{}: {e}", path.display())))
}

/// Checks that target sets belong to `inst` (when they say which instance they are for).
pub fn check_targets(inst: &ProblemInstance, sets: &[TargetSet]) -> CliResult<()> {
    for s in sets {
        if let Some(r) = &s.instance {
            if r.class != *inst.class_id()
                || r.dimension != inst.dimension()
                || r.seed != inst.seed()
            {
                return Err(Failure(format!(
                    "targets are for {} d={} seed={}, not {} d={} seed={}",
                    r.class,
                    r.dimension,
                    r.seed,
                    inst.class_id(),
                    inst.dimension(),
                    inst.seed()
                )));
            }
        }
    }
    Ok(())
}

pub fn builtin_solver(name: &str, population_size: usize) -> CliResult<SolverConfig> {
    let kind = SolverKind::from_name(name).ok_or_else(|| {
        Failure(format!(
            "unknown algorithm {name:?}; expected random_search, nsga2_lite or external"
        ))
    })?;
    let config = SolverConfig {
        population_size,
        ..SolverConfig::new(kind)
    };
    config.validate()?;
    Ok(config)
}

fn cmd_run(a: &RunArgs) -> CliResult<Outcome> {
    let inst = read_instance(&a.instance)?;
    let sets = a
        .targets
        .iter()
        .map(|p| read_targets(p))
        .collect::<CliResult<Vec<_>>>()?;
    check_targets(&inst, &sets)?;
    let solver: Box<dyn Solver> = if a.algorithm == "external" {
        let command = a
            .solver_cmd
            .clone()
            .ok_or_else(|| Failure("--algorithm external needs --solver-cmd".into()))?;
        Box::new(ExternalSolver {
            command,
            id: a.solver_id.clone(),
        })
    } else {
        if a.solver_cmd.is_some() {
            return Err(Failure(
                "--solver-cmd only applies to --algorithm external".into(),
            ));
        }
        Box::new(builtin_solver(&a.algorithm, a.population_size)?)
    };
    let budget = a
        .budget
        .unwrap_or(a.budget_mult.saturating_mul(inst.dimension() as u64));
    let seed = a.solver_seed.unwrap_or(inst.seed());
    let records = harness::run(solver.as_ref(), &inst, &sets, budget, seed)?;
    let mut buf = Vec::new();
    write_run_csv(&records, &mut buf)?;
    write_text(&a.out, &String::from_utf8(buf).expect("CSV is UTF-8"))?;
    for r in &records {
        eprintln!(
            "{} {}: {}/{} targets, final regret {:e}",
            r.algorithm,
            r.indicator,
            r.solved(),
            r.targets.len(),
            r.final_regret
        );
    }
    Ok(if records.iter().any(|r| r.failure.is_some()) {
        Outcome::Warnings
    } else {
        Outcome::Clean
    })
}

fn expand(patterns: &[String]) -> CliResult<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in patterns {
        let matches: Vec<PathBuf> = glob::glob(p)
            .map_err(|e| Failure(format!("bad pattern {p:?}: {e}")))?
            .filter_map(Result::ok)
            .collect();
        if matches.is_empty() {
            return Err(Failure(format!("no files match {p:?}")));
        }
        files.extend(matches);
    }
    files.sort();
    files.dedup();
    Ok(files)
}

/// Writes profile CSV/SVG for `records`; shared with the pipeline.
pub fn write_profiles(
    records: &[RunRecord],
    grouping: &Grouping,
    add_vbs: bool,
    csv: Option<&Path>,
    svg: Option<&Path>,
    style: &SvgStyle,
) -> CliResult<Outcome> {
    let mut outcome = Outcome::Clean;
    let mut all = records.to_vec();
    let algorithms: std::collections::BTreeSet<&str> =
        records.iter().map(|r| r.algorithm.as_str()).collect();
    if add_vbs && algorithms.len() >= 2 {
        match virtual_best(records) {
            Ok(v) => all.extend(v),
            Err(e) => {
                log::warn!("{e}; no virtual best curve");
                outcome = Outcome::Warnings;
            }
        }
    }
    let curves = aggregate(&all, grouping);
    if curves.is_empty() {
        return Err(Failure("no run records".into()));
    }
    if let Some(path) = csv {
        let mut buf = Vec::new();
        write_csv(&curves, &mut buf)?;
        write_text(path, &String::from_utf8(buf).expect("CSV is UTF-8"))?;
    }
    if let Some(path) = svg {
        write_text(path, &render_svg(&curves, style)?)?;
    }
    Ok(outcome)
}

fn cmd_profile(a: &ProfileArgs) -> CliResult<Outcome> {
    let mut records = Vec::new();
    for path in expand(&a.runs)? {
        let text = read_text(&path)?;
        records.extend(
            read_run_csv(text.as_bytes())
                .map_err(|e| Failure(format!("{}: {e}", path.display())))?,
        );
    }
    let mut grouping: Grouping = a.group_by.parse()?;
    grouping.per_dimension = !a.raw_evals;
    let style = match &a.style {
        Some(p) => SvgStyle::parse(&read_text(p)?)?,
        None => SvgStyle::default(),
    };
    if a.csv.is_none() && a.svg.is_none() {
        return Err(Failure("nothing to write; give --csv and/or --svg".into()));
    }
    write_profiles(
        &records,
        &grouping,
        !a.no_vbs,
        a.csv.as_deref(),
        a.svg.as_deref(),
        &style,
    )
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    let result = match &cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Approximate(a) => cmd_approximate(a),
        Command::Targets(a) => cmd_targets(a),
        Command::Run(a) => cmd_run(a),
        Command::Profile(a) => cmd_profile(a),
        Command::Pipeline(a) => pipeline::run(a, cli.deterministic),
    };
    match result {
        Ok(Outcome::Clean) => ExitCode::SUCCESS,
        Ok(Outcome::Warnings) => ExitCode::from(3),
        Err(Failure(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}
