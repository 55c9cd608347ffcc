//! Certified Pareto-front approximation of peak problems.
//!
//! The true front is contained in the union of the local fronts of all component
//! pairs `(a, b)`, each traced by `x(t) = argmin (1 − t) q₁ₐ + t q₂ᵦ`. Every pair
//! starts as one segment `t ∈ [0, 1]` whose indicator uncertainty `ε` bounds what
//! points between its endpoints could still add. The segment with the largest `ε`
//! is bisected until the sum of all open `ε` drops below the tolerance, at which
//! point the archive's indicator value is within that sum of the true optimum.
//!
//! Segments whose local ideal the archive already covers cannot contribute and are
//! dropped, which is what keeps many-peak problems tractable.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};

use serde::{Deserialize, Serialize};

use crate::archive::{ideal_of, NondominatedArchive2D, ObjectiveVector};
use crate::error::{Error, Result};
use crate::generator::{ClassId, ProblemInstance};
use crate::indicators::{normalize, IndicatorKind, IndicatorTracker};
use crate::peaks::BiObjectiveProblem;
use crate::quadratic::{interpolate_optimum, QuadraticForm};

pub const DEFAULT_MAX_ITERATIONS: u64 = 10_000_000;
/// Refuse problems with more component pairs than this unless raised explicitly.
pub const DEFAULT_MAX_PAIRS: usize = 1_000_000;
/// Segments with less uncertainty than this are dropped as numerical noise.
pub const EPSILON_FLOOR: f64 = 1e-16;
/// Default tolerances in normalized objective space.
pub const DEFAULT_DELTA_HV: f64 = 1e-5;
pub const DEFAULT_DELTA_R2: f64 = 1e-6;
pub const SCHEMA_VERSION: u32 = 1;

/// The running uncertainty is re-summed from the queue after this many
/// iterations, or after as many iterations as there are queued segments if that
/// is more, to stop floating-point drift.
const RESUM_INTERVAL: u64 = 1 << 16;
/// Relative drop in a popped segment's uncertainty that sends it back to the queue.
const RESCORE_TOLERANCE: f64 = 1e-6;
/// Covered points looked at when scoring a segment. Past this the score is taken
/// against that prefix of the archive only, which can only overstate it.
const PROBE_LIMIT: usize = 256;

pub fn default_delta(kind: &IndicatorKind) -> f64 {
    match kind {
        IndicatorKind::Hypervolume { .. } => DEFAULT_DELTA_HV,
        IndicatorKind::ExactR2 { .. } => DEFAULT_DELTA_R2,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproxOptions {
    pub delta: f64,
    pub max_iterations: u64,
    pub max_pairs: usize,
    /// Record `(iteration, ε_total, indicator)` every this many iterations.
    pub trace_every: Option<u64>,
}

impl ApproxOptions {
    pub fn new(delta: f64) -> Self {
        Self {
            delta,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            max_pairs: DEFAULT_MAX_PAIRS,
            trace_every: None,
        }
    }

    pub fn for_kind(kind: &IndicatorKind) -> Self {
        Self::new(default_delta(kind))
    }
}

/// A parametrized piece of one pair's local front.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub peak1_index: u32,
    pub peak2_index: u32,
    pub t_l: f64,
    pub t_r: f64,
    pub y_l: ObjectiveVector,
    pub y_r: ObjectiveVector,
    pub epsilon: f64,
}

impl Eq for Segment {}

impl Ord for Segment {
    /// Largest `ε` first; ties go to the smallest `(peak1, peak2, t_l)`.
    fn cmp(&self, other: &Self) -> Ordering {
        self.epsilon
            .total_cmp(&other.epsilon)
            .then_with(|| other.peak1_index.cmp(&self.peak1_index))
            .then_with(|| other.peak2_index.cmp(&self.peak2_index))
            .then_with(|| other.t_l.total_cmp(&self.t_l))
    }
}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontPoint {
    pub t: f64,
    pub peak1: u32,
    pub peak2: u32,
    pub x: Vec<f64>,
    /// Normalized to the instance's ideal–nadir box.
    pub y: ObjectiveVector,
    pub y_raw: ObjectiveVector,
    pub in_bounds: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: u64,
    pub epsilon_total: f64,
    pub indicator_value: f64,
}

/// Which instance an approximation belongs to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceRef {
    pub class: ClassId,
    pub dimension: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontApproximation {
    pub schema_version: u32,
    pub instance: Option<InstanceRef>,
    pub indicator_kind: IndicatorKind,
    pub delta: f64,
    /// Mutually nondominated, by increasing normalized `y1`.
    pub points: Vec<FrontPoint>,
    pub epsilon_total_final: f64,
    pub indicator_value: f64,
    pub contributing_pairs: usize,
    pub iterations: u64,
    /// True when the loop ended with `ε_total > δ` (iteration cap or segments that
    /// could not be bisected further).
    pub early_stopped: bool,
    pub pair_count: usize,
    pub pairs_enqueued: usize,
    /// Bisections after which `ε_total` went up (possible when a midpoint is
    /// improved by another component and leaves its parent's box).
    pub certificate_increases: u64,
    /// Evaluated Pareto-set points that lie outside the search box.
    pub out_of_bounds_evaluations: u64,
    pub trace: Vec<TracePoint>,
}

impl FrontApproximation {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("approximations contain only finite numbers")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::parse("document", e.to_string()))?;
        match value.get("schema_version").and_then(|v| v.as_u64()) {
            Some(v) if v == SCHEMA_VERSION as u64 => {}
            v => {
                return Err(Error::parse(
                    "schema_version",
                    format!("unsupported version {v:?}; this build reads version {SCHEMA_VERSION}"),
                ))
            }
        }
        let approx: Self = serde_path_to_error::deserialize(value).map_err(|e| {
            let path = e.path().to_string();
            Error::parse(path, e.into_inner().to_string())
        })?;
        if approx
            .points
            .windows(2)
            .any(|w| !(w[0].y.y1 < w[1].y.y1 && w[0].y.y2 > w[1].y.y2))
        {
            return Err(Error::parse(
                "points",
                "not a nondominated front sorted by y1",
            ));
        }
        Ok(approx)
    }

    /// The archived points as an archive of normalized vectors.
    pub fn archive(&self) -> NondominatedArchive2D {
        NondominatedArchive2D::from_points(self.points.iter().map(|p| p.y))
    }
}

/// Number of distinct component pairs owning at least one point.
pub fn contributing_pairs(approx: &FrontApproximation) -> usize {
    approx
        .points
        .iter()
        .map(|p| (p.peak1, p.peak2))
        .collect::<BTreeSet<_>>()
        .len()
}

/// A point of the Pareto set of the pair `(p1, p2)`.
pub fn pareto_set_point(p1: &QuadraticForm, p2: &QuadraticForm, t: f64) -> Result<Vec<f64>> {
    Ok(interpolate_optimum(p1, p2, t)?.as_slice().to_vec())
}

/// Approximates the front of a generated instance.
pub fn approximate_front(
    instance: &ProblemInstance,
    kind: IndicatorKind,
    options: &ApproxOptions,
) -> Result<FrontApproximation> {
    let mut approx = approximate_problem(instance.problem(), kind, options)?;
    approx.instance = Some(InstanceRef {
        class: instance.class_id().clone(),
        dimension: instance.dimension(),
        seed: instance.seed(),
    });
    Ok(approx)
}

#[derive(Debug, Clone, Copy)]
struct Payload {
    t: f64,
    peak1: u32,
    peak2: u32,
    y_raw: ObjectiveVector,
}

struct Run<'a> {
    problem: &'a BiObjectiveProblem,
    kind: IndicatorKind,
    ideal: ObjectiveVector,
    nadir: ObjectiveVector,
    archive: NondominatedArchive2D<Payload>,
    tracker: IndicatorTracker,
    queue: BinaryHeap<Segment>,
    epsilon_total: f64,
    /// Uncertainty of segments too short to bisect; never resolved.
    stuck: f64,
    out_of_bounds: u64,
}

impl Run<'_> {
    fn evaluate(&mut self, x: &[f64]) -> Result<(ObjectiveVector, ObjectiveVector)> {
        if !self.problem.in_bounds(x) {
            self.out_of_bounds += 1;
        }
        let raw = self.problem.eval(x);
        Ok((raw, normalize(&raw, &self.ideal, &self.nadir)?))
    }

    fn add(&mut self, y: ObjectiveVector, payload: Payload) -> Result<()> {
        if let Some(change) = self.archive.insert_tracked(y, payload) {
            self.tracker.apply(&y, &change)?;
        }
        Ok(())
    }

    /// Uncertainty of the segment from `y_l` (smaller t) to `y_r`: what the
    /// corner `(y_l.y1, y_r.y2)` would still add to the current archive. Endpoints
    /// out of order mean one of them already covers the local front in between.
    fn epsilon(&self, y_l: &ObjectiveVector, y_r: &ObjectiveVector) -> Result<f64> {
        if !(y_l.y1 <= y_r.y1 && y_l.y2 >= y_r.y2) {
            return Ok(0.0);
        }
        let corner = ObjectiveVector::new(y_l.y1, y_r.y2);
        let Some(change) = self.archive.probe_within(&corner, PROBE_LIMIT) else {
            return Ok(0.0);
        };
        let gain = self.kind.improvement(&corner, &change)?.max(0.0);
        Ok(gain.min(self.kind.segment_epsilon(y_l, y_r)?))
    }

    /// Queues the segment unless it cannot contribute. Returns whether it was queued.
    /// A segment whose corner is covered scores zero and is dropped.
    fn offer(&mut self, seg: Segment) -> Result<bool> {
        let epsilon = self.epsilon(&seg.y_l, &seg.y_r)?;
        if epsilon < EPSILON_FLOOR {
            return Ok(false);
        }
        self.epsilon_total += epsilon;
        self.queue.push(Segment { epsilon, ..seg });
        Ok(true)
    }

    /// Re-sums the queued uncertainty exactly. Queued scores only ever overstate
    /// the current uncertainty, so this is sound without rescoring.
    fn resum(&mut self) {
        self.epsilon_total = self.queue.iter().map(|s| s.epsilon).sum::<f64>() + self.stuck;
    }

    /// Rescores every queued segment against the current archive and re-sums.
    fn rescore_all(&mut self) -> Result<()> {
        let mut segments = std::mem::take(&mut self.queue).into_vec();
        let mut kept = Vec::with_capacity(segments.len());
        for seg in segments.drain(..) {
            let epsilon = self.epsilon(&seg.y_l, &seg.y_r)?.min(seg.epsilon);
            if epsilon >= EPSILON_FLOOR {
                kept.push(Segment { epsilon, ..seg });
            }
        }
        self.queue = BinaryHeap::from(kept);
        self.epsilon_total = self.queue.iter().map(|s| s.epsilon).sum::<f64>() + self.stuck;
        Ok(())
    }
}

/// Approximates the front of `problem` in the space normalized by its ideal and nadir.
pub fn approximate_problem(
    problem: &BiObjectiveProblem,
    kind: IndicatorKind,
    options: &ApproxOptions,
) -> Result<FrontApproximation> {
    if !(options.delta > 0.0) {
        return Err(Error::Argument(format!(
            "delta must be positive, got {}",
            options.delta
        )));
    }
    let c1 = problem.f1().components();
    let c2 = problem.f2().components();
    let pair_count = c1.len() * c2.len();
    if pair_count > options.max_pairs {
        return Err(Error::Resource(format!(
            "{} x {} = {pair_count} component pairs exceed the cap of {}; raise max_pairs if the run time is acceptable",
            c1.len(),
            c2.len(),
            options.max_pairs
        )));
    }
    let mut run = Run {
        problem,
        kind,
        ideal: problem.ideal(),
        nadir: problem.nadir(),
        archive: NondominatedArchive2D::new(),
        tracker: IndicatorTracker::new(kind),
        queue: BinaryHeap::new(),
        epsilon_total: 0.0,
        stuck: 0.0,
        out_of_bounds: 0,
    };

    // Phase 1: one segment per pair. The endpoint images only depend on one
    // component each, so evaluate them once.
    let mut left = Vec::with_capacity(c1.len());
    for q in c1 {
        left.push(run.evaluate(q.optimum().as_slice())?);
    }
    let mut right = Vec::with_capacity(c2.len());
    for q in c2 {
        right.push(run.evaluate(q.optimum().as_slice())?);
    }
    let mut pairs_enqueued = 0;
    for (a, &(raw_l, y_l)) in left.iter().enumerate() {
        for (b, &(raw_r, y_r)) in right.iter().enumerate() {
            if run.archive.weakly_dominated(&ideal_of(&y_l, &y_r)) {
                continue;
            }
            let (peak1, peak2) = (a as u32, b as u32);
            run.add(
                y_l,
                Payload {
                    t: 0.0,
                    peak1,
                    peak2,
                    y_raw: raw_l,
                },
            )?;
            run.add(
                y_r,
                Payload {
                    t: 1.0,
                    peak1,
                    peak2,
                    y_raw: raw_r,
                },
            )?;
            let epsilon = run.epsilon(&y_l, &y_r)?;
            if epsilon >= EPSILON_FLOOR {
                run.epsilon_total += epsilon;
                run.queue.push(Segment {
                    peak1_index: peak1,
                    peak2_index: peak2,
                    t_l: 0.0,
                    t_r: 1.0,
                    y_l,
                    y_r,
                    epsilon,
                });
                pairs_enqueued += 1;
            }
        }
    }

    run.rescore_all()?;

    // Phase 2: bisect the most uncertain segment.
    let mut iterations = 0u64;
    let mut certificate_increases = 0u64;
    let mut rescored = 0u64;
    let mut last_resum = 0u64;
    let mut trace = Vec::new();
    loop {
        if run.epsilon_total <= options.delta || run.queue.is_empty() {
            // confirm with an exact sum before stopping
            run.resum();
            if run.epsilon_total <= options.delta || run.queue.is_empty() {
                break;
            }
        }
        if iterations >= options.max_iterations {
            break;
        }
        let seg = run.queue.pop().expect("queue checked non-empty");
        // the archive has grown since this segment was scored
        let current = run.epsilon(&seg.y_l, &seg.y_r)?;
        if current < seg.epsilon * (1.0 - RESCORE_TOLERANCE) {
            run.epsilon_total -= seg.epsilon;
            rescored += 1;
            if current >= EPSILON_FLOOR {
                run.epsilon_total += current;
                run.queue.push(Segment {
                    epsilon: current,
                    ..seg
                });
            }
            continue;
        }
        let before = run.epsilon_total;
        run.epsilon_total -= seg.epsilon;
        iterations += 1;
        let t_m = 0.5 * (seg.t_l + seg.t_r);
        if !(seg.t_l < t_m && t_m < seg.t_r) {
            run.stuck += seg.epsilon;
            run.epsilon_total += seg.epsilon;
            continue;
        }
        let p1 = &c1[seg.peak1_index as usize];
        let p2 = &c2[seg.peak2_index as usize];
        let x_m = interpolate_optimum(p1, p2, t_m)?;
        let (raw_m, y_m) = run.evaluate(x_m.as_slice())?;
        let payload = Payload {
            t: t_m,
            peak1: seg.peak1_index,
            peak2: seg.peak2_index,
            y_raw: raw_m,
        };
        run.add(y_m, payload)?;
        run.offer(Segment {
            t_r: t_m,
            y_r: y_m,
            ..seg
        })?;
        run.offer(Segment {
            t_l: t_m,
            y_l: y_m,
            ..seg
        })?;
        if run.epsilon_total > before {
            certificate_increases += 1;
        }
        if iterations - last_resum >= RESUM_INTERVAL.max(run.queue.len() as u64) {
            run.resum();
            last_resum = iterations;
        }
        if let Some(every) = options.trace_every {
            if every > 0 && iterations % every == 0 {
                trace.push(TracePoint {
                    iteration: iterations,
                    epsilon_total: run.epsilon_total,
                    indicator_value: run.tracker.value(),
                });
            }
        }
    }
    if run.epsilon_total > options.delta {
        // stopped at the cap: report the tightest bound available
        run.rescore_all()?;
    }
    if certificate_increases > 0 {
        log::debug!("certificate increased in {certificate_increases} of {iterations} bisections");
    }
    log::debug!("{rescored} segments rescored on pop");

    let indicator_value = kind.evaluate(&run.archive)?;
    let epsilon_total_final = run.epsilon_total;
    let early_stopped = epsilon_total_final > options.delta;
    let out_of_bounds = run.out_of_bounds;
    let mut points = Vec::with_capacity(run.archive.len());
    for (y, p) in run.archive.into_entries() {
        let x = interpolate_optimum(&c1[p.peak1 as usize], &c2[p.peak2 as usize], p.t)?;
        points.push(FrontPoint {
            t: p.t,
            peak1: p.peak1,
            peak2: p.peak2,
            in_bounds: problem.in_bounds(x.as_slice()),
            x: x.as_slice().to_vec(),
            y,
            y_raw: p.y_raw,
        });
    }
    let mut approx = FrontApproximation {
        schema_version: SCHEMA_VERSION,
        instance: None,
        indicator_kind: kind,
        delta: options.delta,
        points,
        epsilon_total_final,
        indicator_value,
        contributing_pairs: 0,
        iterations,
        early_stopped,
        pair_count,
        pairs_enqueued,
        certificate_increases,
        out_of_bounds_evaluations: out_of_bounds,
        trace,
    };
    approx.contributing_pairs = contributing_pairs(&approx);
    Ok(approx)
}
