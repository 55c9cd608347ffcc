//! Bi-objective quality indicators: dominated hypervolume and the exact R2
//! indicator, plus the per-segment uncertainty used by the front approximation.
//!
//! # Exact R2
//!
//! With reference (ideal) point `z` and weights `(w, 1 − w)`, `w ∈ [0, 1]` uniform,
//!
//! ```text
//! R2(A) = ∫₀¹ min_{a ∈ A} max( w (a₁ − z₁), (1 − w)(a₂ − z₂) ) dw
//! ```
//!
//! For a nondominated set sorted by `a₁`, neighbours `a` (left) and `b` (right)
//! tie at `w = a₂ / (a₂ + b₁)`. These crossover weights decrease along the front,
//! so every point owns one weight interval, and inside it the integrand is the
//! maximum of two linear functions that switch at `w₀ = a₂ / (a₁ + a₂)`. Each
//! piece integrates in closed form. Lower is better.
//!
//! # Hypervolume
//!
//! Area dominated by the set and bounded by the reference point, by a single
//! sweep over the sorted front. Higher is better.

use serde::{Deserialize, Serialize};

use crate::archive::{InsertChange, NondominatedArchive2D, ObjectiveVector};
use crate::error::{Error, Result};

/// Points this far below the R2 reference are clamped onto it rather than rejected.
pub const R2_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IndicatorKind {
    Hypervolume { reference: ObjectiveVector },
    ExactR2 { ideal: ObjectiveVector },
}

impl IndicatorKind {
    /// Hypervolume against the normalized nadir `(1, 1)`.
    pub const fn hypervolume() -> Self {
        IndicatorKind::Hypervolume {
            reference: ObjectiveVector::new(1.0, 1.0),
        }
    }

    /// Exact R2 against the normalized ideal `(0, 0)`.
    pub const fn exact_r2() -> Self {
        IndicatorKind::ExactR2 {
            ideal: ObjectiveVector::new(0.0, 0.0),
        }
    }

    /// Short name used in file names and CSV columns.
    pub fn name(&self) -> &'static str {
        match self {
            IndicatorKind::Hypervolume { .. } => "hv",
            IndicatorKind::ExactR2 { .. } => "r2",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "hv" | "hypervolume" => Some(Self::hypervolume()),
            "r2" | "exact_r2" => Some(Self::exact_r2()),
            _ => None,
        }
    }

    pub fn higher_is_better(&self) -> bool {
        matches!(self, IndicatorKind::Hypervolume { .. })
    }

    /// Indicator value of a nondominated archive. The R2 of an empty set is `+∞`.
    pub fn evaluate<T>(&self, front: &NondominatedArchive2D<T>) -> Result<f64> {
        match *self {
            IndicatorKind::Hypervolume { reference } => Ok(hypervolume2d(front, reference)),
            IndicatorKind::ExactR2 { ideal } => {
                if front.is_empty() {
                    Ok(f64::INFINITY)
                } else {
                    exact_r2(front, ideal)
                }
            }
        }
    }

    /// `|optimum − value|`, the distance still to go.
    pub fn regret(&self, optimum: f64, value: f64) -> f64 {
        if self.higher_is_better() {
            (optimum - value).abs()
        } else if value.is_infinite() {
            f64::INFINITY
        } else {
            (value - optimum).abs()
        }
    }

    pub fn segment_epsilon(&self, y_l: &ObjectiveVector, y_r: &ObjectiveVector) -> Result<f64> {
        segment_epsilon(self, y_l, y_r)
    }
}

/// Maps the box `[ideal, nadir]` affinely onto the unit square.
pub fn normalize(
    y: &ObjectiveVector,
    ideal: &ObjectiveVector,
    nadir: &ObjectiveVector,
) -> Result<ObjectiveVector> {
    let w1 = nadir.y1 - ideal.y1;
    let w2 = nadir.y2 - ideal.y2;
    if !(w1 > 0.0 && w2 > 0.0) {
        return Err(Error::Argument(format!(
            "normalization box [{ideal:?}, {nadir:?}] has zero extent"
        )));
    }
    Ok(ObjectiveVector::new(
        (y.y1 - ideal.y1) / w1,
        (y.y2 - ideal.y2) / w2,
    ))
}

/// Area dominated by `front` and bounded by `reference`.
pub fn hypervolume2d<T>(front: &NondominatedArchive2D<T>, reference: ObjectiveVector) -> f64 {
    let mut points = front.iter().map(|(y, _)| y).peekable();
    let mut area = 0.0;
    while let Some(a) = points.next() {
        let next = points.peek().map_or(f64::INFINITY, |b| b.y1);
        area += hv_strip(&a, next, &reference);
    }
    area
}

/// Hypervolume of an arbitrary point set (dominated points are ignored).
pub fn hypervolume_of(points: &[ObjectiveVector], reference: ObjectiveVector) -> f64 {
    hypervolume2d(
        &NondominatedArchive2D::from_points(points.iter().copied()),
        reference,
    )
}

/// Area between `a.y1` and `next_y1` under the level `a.y2`, clipped to the reference.
#[inline]
fn hv_strip(a: &ObjectiveVector, next_y1: f64, r: &ObjectiveVector) -> f64 {
    let width = next_y1.min(r.y1) - a.y1.min(r.y1);
    let height = r.y2 - a.y2;
    if width > 0.0 && height > 0.0 {
        width * height
    } else {
        0.0
    }
}

/// Exact R2 of a nonempty front whose points all lie at or above `ideal`.
pub fn exact_r2<T>(front: &NondominatedArchive2D<T>, ideal: ObjectiveVector) -> Result<f64> {
    if front.is_empty() {
        return Err(Error::Argument("exact R2 needs at least one point".into()));
    }
    let shifted = front
        .iter()
        .map(|(y, _)| shift(&y, &ideal))
        .collect::<Result<Vec<_>>>()?;
    Ok(r2_sorted(&shifted))
}

/// Exact R2 of an arbitrary nonempty point set.
pub fn exact_r2_of(points: &[ObjectiveVector], ideal: ObjectiveVector) -> Result<f64> {
    for p in points {
        shift(p, &ideal)?;
    }
    exact_r2(
        &NondominatedArchive2D::from_points(points.iter().copied()),
        ideal,
    )
}

/// Offsets `y` by the ideal point, clamping rounding-level undershoot.
fn shift(y: &ObjectiveVector, ideal: &ObjectiveVector) -> Result<(f64, f64)> {
    let a = y.y1 - ideal.y1;
    let b = y.y2 - ideal.y2;
    if a < -R2_CLAMP || b < -R2_CLAMP || !a.is_finite() || !b.is_finite() {
        return Err(Error::Argument(format!(
            "point {y:?} is better than the R2 reference {ideal:?}"
        )));
    }
    Ok((a.max(0.0), b.max(0.0)))
}

/// Weight at which `left` and `right` (sorted by first coordinate) tie.
#[inline]
fn crossover(left: (f64, f64), right: (f64, f64)) -> f64 {
    let den = left.1 + right.0;
    if den > 0.0 {
        left.1 / den
    } else {
        0.5
    }
}

/// `∫_lo^hi max(w a₁, (1 − w) a₂) dw`.
#[inline]
fn chebyshev_integral(a: (f64, f64), lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let (a1, a2) = a;
    let sum = a1 + a2;
    if sum <= 0.0 {
        return 0.0;
    }
    let w0 = a2 / sum;
    let mut total = 0.0;
    // (1 − w) a₂ below the switch
    let (l, h) = (lo, hi.min(w0));
    if h > l {
        total += a2 * ((h - l) - 0.5 * (h * h - l * l));
    }
    // w a₁ above it
    let (l, h) = (lo.max(w0), hi);
    if h > l {
        total += 0.5 * a1 * (h * h - l * l);
    }
    total
}

/// Contribution of `a` given its sorted neighbours.
#[inline]
fn r2_term(prev: Option<(f64, f64)>, a: (f64, f64), next: Option<(f64, f64)>) -> f64 {
    let hi = prev.map_or(1.0, |p| crossover(p, a));
    let lo = next.map_or(0.0, |n| crossover(a, n));
    chebyshev_integral(a, lo, hi)
}

/// R2 of shifted, sorted, mutually nondominated points.
fn r2_sorted(points: &[(f64, f64)]) -> f64 {
    let n = points.len();
    (0..n)
        .map(|i| {
            let prev = i.checked_sub(1).map(|j| points[j]);
            let next = points.get(i + 1).copied();
            r2_term(prev, points[i], next)
        })
        .sum()
}

/// Upper bound on how much any points inside the box spanned by `y_l` and `y_r`
/// can still improve the indicator.
///
/// Requires `y_l.y1 ≤ y_r.y1` and `y_l.y2 ≥ y_r.y2`. For hypervolume this is the box area
/// inside the reference region; for R2 it is `R2({y_l, y_r}) − R2({c})` where
/// `c = (y_l.y1, y_r.y2)` is the box corner that dominates everything inside it.
pub fn segment_epsilon(
    kind: &IndicatorKind,
    y_l: &ObjectiveVector,
    y_r: &ObjectiveVector,
) -> Result<f64> {
    if !(y_l.y1 <= y_r.y1 && y_l.y2 >= y_r.y2) {
        return Err(Error::Argument(format!(
            "segment endpoints {y_l:?}, {y_r:?} are not ordered left to right"
        )));
    }
    Ok(match *kind {
        IndicatorKind::Hypervolume { reference } => {
            let width = y_r.y1.min(reference.y1) - y_l.y1.min(reference.y1);
            let height = y_l.y2.min(reference.y2) - y_r.y2.min(reference.y2);
            (width * height).max(0.0)
        }
        IndicatorKind::ExactR2 { ideal } => {
            let l = shift(y_l, &ideal)?;
            let r = shift(y_r, &ideal)?;
            let corner = (l.0, r.1);
            let pair = if l.0 == r.0 {
                // r covers l
                r2_term(None, r, None)
            } else if l.1 == r.1 {
                r2_term(None, l, None)
            } else {
                r2_term(None, l, Some(r)) + r2_term(Some(l), r, None)
            };
            (pair - r2_term(None, corner, None)).max(0.0)
        }
    })
}

/// Keeps an indicator value in step with an archive that only grows by insertion.
///
/// Each update touches only the inserted point's neighbourhood; call
/// [`recompute`](Self::recompute) from time to time to cancel accumulated rounding.
#[derive(Debug, Clone)]
pub struct IndicatorTracker {
    kind: IndicatorKind,
    value: f64,
    empty: bool,
}

impl IndicatorTracker {
    pub fn new(kind: IndicatorKind) -> Self {
        let value = if kind.higher_is_better() {
            0.0
        } else {
            f64::INFINITY
        };
        Self {
            kind,
            value,
            empty: true,
        }
    }

    pub fn kind(&self) -> &IndicatorKind {
        &self.kind
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn recompute<T>(&mut self, archive: &NondominatedArchive2D<T>) -> Result<f64> {
        self.value = self.kind.evaluate(archive)?;
        self.empty = archive.is_empty();
        Ok(self.value)
    }

    /// Applies a successful insertion of `y` described by `change`.
    pub fn apply(&mut self, y: &ObjectiveVector, change: &InsertChange) -> Result<f64> {
        let (new, old) = local_terms(&self.kind, y, change)?;
        if self.empty && !self.kind.higher_is_better() {
            self.value = new;
        } else {
            self.value += new - old;
        }
        self.empty = false;
        Ok(self.value)
    }
}

impl IndicatorKind {
    /// How much inserting `y` improves the indicator (≥ 0 up to rounding), given
    /// the archive's [`probe`](NondominatedArchive2D::probe) of `y`. For R2 on an
    /// empty archive this is infinite.
    pub fn improvement(&self, y: &ObjectiveVector, change: &InsertChange) -> Result<f64> {
        let (new, old) = local_terms(self, y, change)?;
        Ok(match self {
            IndicatorKind::Hypervolume { .. } => new - old,
            IndicatorKind::ExactR2 { .. }
                if change.left.is_empty()
                    && change.removed.is_empty()
                    && change.right.is_empty() =>
            {
                f64::INFINITY
            }
            IndicatorKind::ExactR2 { .. } => old - new,
        })
    }
}

/// Indicator terms of the neighbourhood touched by inserting `y`: `(after, before)`.
fn local_terms(
    kind: &IndicatorKind,
    y: &ObjectiveVector,
    change: &InsertChange,
) -> Result<(f64, f64)> {
    let left = change.left.last();
    let right = change.right.first();
    match *kind {
        IndicatorKind::Hypervolume { reference } => {
            let chain: Vec<&ObjectiveVector> = change.removed.iter().chain(right).collect();
            let mut old = 0.0;
            if let Some(l) = left {
                old += hv_strip(l, chain.first().map_or(f64::INFINITY, |p| p.y1), &reference);
            }
            for (k, d) in change.removed.iter().enumerate() {
                old += hv_strip(
                    d,
                    chain.get(k + 1).map_or(f64::INFINITY, |p| p.y1),
                    &reference,
                );
            }
            let mut new = hv_strip(y, right.map_or(f64::INFINITY, |p| p.y1), &reference);
            if let Some(l) = left {
                new += hv_strip(l, y.y1, &reference);
            }
            Ok((new, old))
        }
        IndicatorKind::ExactR2 { ideal } => {
            let s = |p: &ObjectiveVector| shift(p, &ideal);
            let ll = if change.left.len() == 2 {
                Some(s(&change.left[0])?)
            } else {
                None
            };
            let l = left.map(s).transpose()?;
            let r = right.map(s).transpose()?;
            let rr = change.right.get(1).map(s).transpose()?;
            let ys = s(y)?;

            let mut old_chain: Vec<(f64, f64)> = Vec::with_capacity(change.removed.len() + 2);
            old_chain.extend(l);
            for d in &change.removed {
                old_chain.push(s(d)?);
            }
            old_chain.extend(r);
            let last = old_chain.len().saturating_sub(1);
            let mut old = 0.0;
            for i in 0..old_chain.len() {
                let prev = if i == 0 { ll } else { Some(old_chain[i - 1]) };
                let next = if i == last {
                    rr
                } else {
                    Some(old_chain[i + 1])
                };
                old += r2_term(prev, old_chain[i], next);
            }
            let mut new = r2_term(l, ys, r);
            if let Some(lv) = l {
                new += r2_term(ll, lv, Some(ys));
            }
            if let Some(rv) = r {
                new += r2_term(Some(ys), rv, rr);
            }
            Ok((new, old))
        }
    }
}
