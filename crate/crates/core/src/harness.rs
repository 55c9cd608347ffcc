//! Benchmark runs: regret targets, a budgeted evaluator that records when each
//! target is first reached, and per-run records.
//!
//! A target `r` counts as solved once `|I* − I(archive)| ≤ r`, where the archive
//! holds every nondominated point evaluated so far (it is never truncated) and
//! `I*` comes from a front approximation. Targets are checked after every
//! evaluation.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::archive::{NondominatedArchive2D, ObjectiveVector};
use crate::error::{Error, Result};
use crate::frontapprox::{FrontApproximation, InstanceRef};
use crate::generator::{ClassId, ProblemInstance};
use crate::indicators::{normalize, IndicatorKind, IndicatorTracker};
use crate::peaks::BiObjectiveProblem;

pub const SCHEMA_VERSION: u32 = 1;
pub const TARGET_COUNT: usize = 101;
/// Regret range of the hypervolume targets.
pub const HV_REGRET_BOUNDS: (f64, f64) = (1e-4, 1.0);
/// Regret range of the R2 targets.
pub const R2_REGRET_BOUNDS: (f64, f64) = (1e-5, 1.0);
/// Evaluations per decision variable in a full run.
pub const DEFAULT_BUDGET_PER_DIM: u64 = 100_000;
/// Inserts between full recomputations of the tracked indicators.
pub const RECOMPUTE_INTERVAL: u64 = 10_000;

/// Header of the run CSV format.
pub const RUN_CSV_HEADER: [&str; 12] = [
    "algorithm",
    "class",
    "dim",
    "seed",
    "indicator",
    "target_index",
    "target_value",
    "evals_to_hit",
    "budget",
    "budget_used",
    "final_regret",
    "status",
];

/// 101 regret thresholds, increasing, log-uniform between the bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSet {
    pub schema_version: u32,
    pub instance: Option<InstanceRef>,
    pub indicator_kind: IndicatorKind,
    pub optimum_value: f64,
    pub regret_bounds: (f64, f64),
    /// Certificate of the approximation `optimum_value` came from, if known.
    pub optimum_epsilon: Option<f64>,
    pub targets: Vec<f64>,
}

pub fn regret_bounds(kind: &IndicatorKind) -> (f64, f64) {
    if kind.higher_is_better() {
        HV_REGRET_BOUNDS
    } else {
        R2_REGRET_BOUNDS
    }
}

/// `n ≥ 2` log-uniform values from `lo` to `hi`; the endpoints are exact.
pub fn log_uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.log10(), hi.log10());
    let last = n - 1;
    (0..n)
        .map(|i| match i {
            0 => lo,
            i if i == last => hi,
            i => 10f64.powf(a + (b - a) * i as f64 / last as f64),
        })
        .collect()
}

pub fn make_targets(optimum_value: f64, kind: IndicatorKind) -> TargetSet {
    let bounds = regret_bounds(&kind);
    TargetSet {
        schema_version: SCHEMA_VERSION,
        instance: None,
        indicator_kind: kind,
        optimum_value,
        regret_bounds: bounds,
        optimum_epsilon: None,
        targets: log_uniform_grid(bounds.0, bounds.1, TARGET_COUNT),
    }
}

impl TargetSet {
    /// Targets for the optimum of a front approximation. Logs a warning when the
    /// approximation is not ten times finer than the smallest target.
    pub fn from_front(front: &FrontApproximation) -> Self {
        let mut set = make_targets(front.indicator_value, front.indicator_kind);
        set.instance = front.instance.clone();
        set.optimum_epsilon = Some(front.epsilon_total_final);
        if let Some(w) = set.precision_warning() {
            log::warn!("{w}");
        }
        set
    }

    /// Set when the optimum's certificate exceeds a tenth of the smallest target.
    pub fn precision_warning(&self) -> Option<String> {
        let eps = self.optimum_epsilon?;
        let limit = self.targets[0] / 10.0;
        (eps > limit).then(|| {
            format!(
                "{} optimum is certified to {eps:e}, coarser than {limit:e} (a tenth of the smallest target)",
                self.indicator_kind.name()
            )
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("target sets contain only finite numbers")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let set: Self =
            serde_json::from_str(text).map_err(|e| Error::parse("targets", e.to_string()))?;
        if set.schema_version != SCHEMA_VERSION {
            return Err(Error::parse(
                "schema_version",
                format!("unsupported version {}", set.schema_version),
            ));
        }
        if set.targets.len() != TARGET_COUNT {
            return Err(Error::parse(
                "targets",
                format!(
                    "expected {TARGET_COUNT} values, found {}",
                    set.targets.len()
                ),
            ));
        }
        if set.targets.windows(2).any(|w| !(w[0] < w[1])) || !(set.targets[0] > 0.0) {
            return Err(Error::parse("targets", "must be positive and increasing"));
        }
        if !set.optimum_value.is_finite() {
            return Err(Error::parse("optimum_value", "must be finite"));
        }
        Ok(set)
    }
}

/// Why an evaluation was refused.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    /// The budget is used up. Solvers stop when they see this.
    #[error("evaluation budget exhausted")]
    BudgetExhausted,
    #[error("invalid argument: {0}")]
    Argument(String),
    /// The solver itself failed; the run is recorded as failed.
    #[error("solver failed: {0}")]
    Failed(String),
}

#[derive(Debug, Clone)]
struct Tracked {
    set: TargetSet,
    tracker: IndicatorTracker,
    hits: Vec<Option<u64>>,
    /// Targets from this index up are solved.
    solved_from: usize,
}

impl Tracked {
    fn record(&mut self, evaluation: u64) {
        let regret = self
            .set
            .indicator_kind
            .regret(self.set.optimum_value, self.tracker.value());
        while self.solved_from > 0 && self.set.targets[self.solved_from - 1] >= regret {
            self.solved_from -= 1;
            self.hits[self.solved_from] = Some(evaluation);
        }
    }
}

/// Wraps a problem with an evaluation counter, a budget and an unbounded
/// nondominated archive of normalized objective vectors.
#[derive(Debug, Clone)]
pub struct CountingEvaluator<'a> {
    problem: &'a BiObjectiveProblem,
    budget: u64,
    used: u64,
    inserts: u64,
    archive: NondominatedArchive2D,
    tracked: Vec<Tracked>,
}

impl<'a> CountingEvaluator<'a> {
    pub fn new(
        problem: &'a BiObjectiveProblem,
        targets: &[TargetSet],
        budget: u64,
    ) -> Result<Self> {
        if budget == 0 {
            return Err(Error::Argument("budget must be at least 1".into()));
        }
        let tracked = targets
            .iter()
            .map(|set| {
                if set.targets.len() != TARGET_COUNT {
                    return Err(Error::Argument(format!(
                        "target set has {} values, expected {TARGET_COUNT}",
                        set.targets.len()
                    )));
                }
                Ok(Tracked {
                    set: set.clone(),
                    tracker: IndicatorTracker::new(set.indicator_kind),
                    hits: vec![None; TARGET_COUNT],
                    solved_from: TARGET_COUNT,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            problem,
            budget,
            used: 0,
            inserts: 0,
            archive: NondominatedArchive2D::new(),
            tracked,
        })
    }

    pub fn dimension(&self) -> usize {
        self.problem.dimension()
    }

    pub fn lower(&self) -> &[f64] {
        self.problem.lower()
    }

    pub fn upper(&self) -> &[f64] {
        self.problem.upper()
    }

    pub fn budget(&self) -> u64 {
        self.budget
    }

    pub fn used(&self) -> u64 {
        self.used
    }

    pub fn remaining(&self) -> u64 {
        self.budget - self.used
    }

    /// Every nondominated normalized vector seen so far.
    pub fn archive(&self) -> &NondominatedArchive2D {
        &self.archive
    }

    /// Current value of the `i`-th tracked indicator.
    pub fn indicator_value(&self, i: usize) -> f64 {
        self.tracked[i].tracker.value()
    }

    pub fn regret(&self, i: usize) -> f64 {
        let t = &self.tracked[i];
        t.set
            .indicator_kind
            .regret(t.set.optimum_value, t.tracker.value())
    }

    /// Evaluates `x` and returns the raw objective vector. Points outside the box
    /// are evaluated and counted like any other.
    pub fn evaluate(&mut self, x: &[f64]) -> Result<ObjectiveVector, EvalError> {
        if x.len() != self.dimension() {
            return Err(EvalError::Argument(format!(
                "expected {} variables, got {}",
                self.dimension(),
                x.len()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(EvalError::Argument("non-finite decision vector".into()));
        }
        if self.used >= self.budget {
            return Err(EvalError::BudgetExhausted);
        }
        self.used += 1;
        let raw = self.problem.eval(x);
        let y = normalize(&raw, &self.problem.ideal(), &self.problem.nadir())
            .map_err(|e| EvalError::Failed(e.to_string()))?;
        if let Some(change) = self.archive.insert_tracked(y, ()) {
            self.inserts += 1;
            let anchor = self.inserts % RECOMPUTE_INTERVAL == 0;
            for t in &mut self.tracked {
                let applied = if anchor {
                    t.tracker.recompute(&self.archive)
                } else {
                    t.tracker.apply(&y, &change)
                };
                applied.map_err(|e| EvalError::Failed(e.to_string()))?;
                t.record(self.used);
            }
        }
        Ok(raw)
    }

    /// One record per tracked target set.
    pub fn into_records(
        self,
        algorithm: &str,
        instance: &InstanceRef,
        failure: Option<String>,
    ) -> Vec<RunRecord> {
        let (budget, used) = (self.budget, self.used);
        self.tracked
            .into_iter()
            .map(|t| RunRecord {
                algorithm: algorithm.to_string(),
                instance: instance.clone(),
                indicator: t.set.indicator_kind.name().to_string(),
                final_regret: t
                    .set
                    .indicator_kind
                    .regret(t.set.optimum_value, t.tracker.value()),
                targets: t.set.targets,
                hits: t.hits,
                budget,
                budget_used: used,
                failure: failure.clone(),
            })
            .collect()
    }
}

/// Something that optimizes through a [`CountingEvaluator`] until the budget runs
/// out or it decides to stop.
pub trait Solver: Sync {
    /// Identifier used in run records.
    fn id(&self) -> String;

    /// Runs against `evaluator`. Returning [`EvalError::BudgetExhausted`] is a
    /// normal end of the run; any other error marks the run failed.
    fn solve(&self, evaluator: &mut CountingEvaluator<'_>, seed: u64) -> Result<(), EvalError>;
}

/// Outcome of one solver on one instance for one indicator.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub algorithm: String,
    pub instance: InstanceRef,
    /// Indicator short name (`hv` or `r2`).
    pub indicator: String,
    pub targets: Vec<f64>,
    /// Evaluation count at which each target was first reached.
    pub hits: Vec<Option<u64>>,
    pub budget: u64,
    pub budget_used: u64,
    pub final_regret: f64,
    /// Diagnostic when the run failed.
    pub failure: Option<String>,
}

impl RunRecord {
    pub fn solved(&self) -> usize {
        self.hits.iter().filter(|h| h.is_some()).count()
    }

    /// A target hit at evaluation `e` has every easier (larger) target hit at or before `e`.
    pub fn hits_consistent(&self) -> bool {
        self.hits.windows(2).all(|w| match (w[0], w[1]) {
            (Some(hard), Some(easy)) => easy <= hard,
            (Some(_), None) => false,
            _ => true,
        }) && self.hits.iter().flatten().all(|&h| h <= self.budget)
    }
}

/// Runs `solver` on `instance` with one record per target set.
pub fn run(
    solver: &dyn Solver,
    instance: &ProblemInstance,
    targets: &[TargetSet],
    budget: u64,
    seed: u64,
) -> Result<Vec<RunRecord>> {
    let mut evaluator = CountingEvaluator::new(instance.problem(), targets, budget)?;
    let failure = match solver.solve(&mut evaluator, seed) {
        Ok(()) | Err(EvalError::BudgetExhausted) => None,
        Err(e) => {
            log::warn!("{} failed on {}: {e}", solver.id(), instance.class_id());
            Some(e.to_string())
        }
    };
    let id = InstanceRef {
        class: instance.class_id().clone(),
        dimension: instance.dimension(),
        seed: instance.seed(),
    };
    Ok(evaluator.into_records(&solver.id(), &id, failure))
}

fn status(record: &RunRecord) -> String {
    match &record.failure {
        None => "ok".into(),
        Some(m) => format!("failed: {m}"),
    }
}

/// Writes records as CSV, one row per target.
pub fn write_run_csv<W: Write>(records: &[RunRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(RUN_CSV_HEADER).map_err(io)?;
    for r in records {
        let st = status(r);
        for (i, (target, hit)) in r.targets.iter().zip(&r.hits).enumerate() {
            w.write_record([
                r.algorithm.as_str(),
                &r.instance.class.to_string(),
                &r.instance.dimension.to_string(),
                &r.instance.seed.to_string(),
                &r.indicator,
                &i.to_string(),
                &target.to_string(),
                &hit.map_or_else(|| "NA".to_string(), |h| h.to_string()),
                &r.budget.to_string(),
                &r.budget_used.to_string(),
                &r.final_regret.to_string(),
                &st,
            ])
            .map_err(io)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads records written by [`write_run_csv`]. Consecutive rows with the same
/// algorithm, instance and indicator form one record.
pub fn read_run_csv<R: Read>(input: R) -> Result<Vec<RunRecord>> {
    let mut rd = csv::Reader::from_reader(input);
    let header = rd
        .headers()
        .map_err(|e| Error::parse("header", e.to_string()))?
        .clone();
    if header.iter().ne(RUN_CSV_HEADER) {
        return Err(Error::parse(
            "header",
            format!("expected {}", RUN_CSV_HEADER.join(",")),
        ));
    }
    let mut records: Vec<RunRecord> = Vec::new();
    for (n, row) in rd.records().enumerate() {
        let line = n + 2;
        let row = row.map_err(|e| Error::parse(format!("line {line}"), e.to_string()))?;
        let field = |i: usize| -> &str { &row[i] };
        let num = |i: usize| -> Result<u64> {
            field(i).parse().map_err(|_| {
                Error::parse(
                    format!("line {line}, {}", RUN_CSV_HEADER[i]),
                    format!("not an integer: {:?}", field(i)),
                )
            })
        };
        let real = |i: usize| -> Result<f64> {
            field(i).parse().map_err(|_| {
                Error::parse(
                    format!("line {line}, {}", RUN_CSV_HEADER[i]),
                    format!("not a number: {:?}", field(i)),
                )
            })
        };
        let class: ClassId = field(1)
            .parse()
            .map_err(|e: Error| Error::parse(format!("line {line}, class"), e.to_string()))?;
        let instance = InstanceRef {
            class,
            dimension: num(2)? as usize,
            seed: num(3)?,
        };
        let hit = match field(7) {
            "NA" => None,
            _ => Some(num(7)?),
        };
        let failure = match field(11) {
            "ok" => None,
            s => Some(s.strip_prefix("failed: ").unwrap_or(s).to_string()),
        };
        let index = num(5)? as usize;
        let same = records.last().is_some_and(|r| {
            r.algorithm == field(0)
                && r.instance == instance
                && r.indicator == field(4)
                && r.targets.len() < TARGET_COUNT
        });
        if !same {
            records.push(RunRecord {
                algorithm: field(0).to_string(),
                instance,
                indicator: field(4).to_string(),
                targets: Vec::with_capacity(TARGET_COUNT),
                hits: Vec::with_capacity(TARGET_COUNT),
                budget: num(8)?,
                budget_used: num(9)?,
                final_regret: real(10)?,
                failure,
            });
        }
        let r = records.last_mut().expect("just pushed");
        if index != r.targets.len() {
            return Err(Error::parse(
                format!("line {line}, target_index"),
                format!("expected {}, found {index}", r.targets.len()),
            ));
        }
        r.targets.push(real(6)?);
        r.hits.push(hit);
    }
    if let Some(r) = records.iter().find(|r| r.targets.len() != TARGET_COUNT) {
        return Err(Error::parse(
            "rows",
            format!(
                "{} on {} {} has {} targets, expected {TARGET_COUNT}",
                r.algorithm,
                r.instance.class,
                r.indicator,
                r.targets.len()
            ),
        ));
    }
    Ok(records)
}
