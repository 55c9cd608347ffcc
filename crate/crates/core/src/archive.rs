//! Dominance relations and a sorted bi-objective nondominated archive.
//!
//! In two objectives a set is mutually nondominated exactly when, sorted by the
//! first objective, the second objective is strictly decreasing. The archive keeps
//! that order in a `BTreeMap`, so both the dominance check and an insertion are a
//! logarithmic locate plus the removal of whatever the new point dominates.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// A point in objective space (both objectives minimized).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveVector {
    pub y1: f64,
    pub y2: f64,
}

impl ObjectiveVector {
    pub const fn new(y1: f64, y2: f64) -> Self {
        Self { y1, y2 }
    }

    pub fn is_finite(&self) -> bool {
        self.y1.is_finite() && self.y2.is_finite()
    }

    /// `self ⪯ other`: no worse in both objectives. Equal vectors cover each other.
    #[inline]
    pub fn covers(&self, other: &ObjectiveVector) -> bool {
        self.y1 <= other.y1 && self.y2 <= other.y2
    }
}

impl From<(f64, f64)> for ObjectiveVector {
    fn from((y1, y2): (f64, f64)) -> Self {
        Self { y1, y2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dominance {
    /// Better in both objectives.
    Strict,
    /// No worse in both, better in exactly one.
    Weak,
    None,
}

/// How `a` relates to `b`. Equal vectors do not dominate each other.
pub fn dominates(a: &ObjectiveVector, b: &ObjectiveVector) -> Dominance {
    if a.y1 < b.y1 && a.y2 < b.y2 {
        Dominance::Strict
    } else if a.covers(b) && (a.y1 < b.y1 || a.y2 < b.y2) {
        Dominance::Weak
    } else {
        Dominance::None
    }
}

/// Component-wise minimum.
pub fn ideal_of(a: &ObjectiveVector, b: &ObjectiveVector) -> ObjectiveVector {
    ObjectiveVector::new(a.y1.min(b.y1), a.y2.min(b.y2))
}

/// Component-wise maximum.
pub fn nadir_of(a: &ObjectiveVector, b: &ObjectiveVector) -> ObjectiveVector {
    ObjectiveVector::new(a.y1.max(b.y1), a.y2.max(b.y2))
}

/// Folds `-0.0` into `0.0` so both share a key.
#[inline]
fn canonical(y: ObjectiveVector) -> ObjectiveVector {
    ObjectiveVector::new(y.y1 + 0.0, y.y2 + 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Key(f64);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

#[derive(Debug, Clone)]
struct Slot<T> {
    y2: f64,
    payload: T,
}

/// Neighbourhood of a successful insertion, as needed to update an indicator
/// incrementally.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InsertChange {
    /// Up to two archive points to the left of the new one, nearest last.
    pub left: Vec<ObjectiveVector>,
    /// Points the new one dominated, in archive order.
    pub removed: Vec<ObjectiveVector>,
    /// Up to two points to the right, nearest first.
    pub right: Vec<ObjectiveVector>,
}

/// Mutually nondominated points sorted by increasing `y1` (hence decreasing `y2`),
/// each carrying a payload.
#[derive(Debug, Clone)]
pub struct NondominatedArchive2D<T = ()> {
    entries: BTreeMap<Key, Slot<T>>,
}

impl<T> Default for NondominatedArchive2D<T> {
    fn default() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }
}

impl NondominatedArchive2D<()> {
    /// Builds an archive from arbitrary points, keeping the nondominated ones.
    pub fn from_points<I: IntoIterator<Item = ObjectiveVector>>(points: I) -> Self {
        let mut a = Self::new();
        for p in points {
            a.insert(p);
        }
        a
    }

    pub fn insert(&mut self, y: ObjectiveVector) -> bool {
        self.insert_with(y, ())
    }
}

impl<T> NondominatedArchive2D<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// True iff some archived point covers `y` (is no worse in both objectives).
    pub fn weakly_dominated(&self, y: &ObjectiveVector) -> bool {
        self.entries
            .range(..=Key(y.y1 + 0.0))
            .next_back()
            .is_some_and(|(_, s)| s.y2 <= y.y2)
    }

    /// Inserts `y` unless it is covered by an archived point. Points that `y`
    /// dominates are dropped. Returns whether `y` was added.
    pub fn insert_with(&mut self, y: ObjectiveVector, payload: T) -> bool {
        self.insert_tracked(y, payload).is_some()
    }

    /// Like [`insert_with`](Self::insert_with) but reports the neighbourhood of the change.
    pub fn insert_tracked(&mut self, y: ObjectiveVector, payload: T) -> Option<InsertChange> {
        let y = canonical(y);
        let change = self.probe(&y)?;
        let key = Key(y.y1);
        for d in &change.removed {
            self.entries.remove(&Key(d.y1));
        }
        self.entries.insert(key, Slot { y2: y.y2, payload });
        Some(change)
    }

    /// The change inserting `y` would make, without making it. `None` if `y` is
    /// covered (or not finite).
    pub fn probe(&self, y: &ObjectiveVector) -> Option<InsertChange> {
        self.probe_within(y, usize::MAX)
    }

    /// [`probe`](Self::probe) that stops after `limit` covered points. A truncated
    /// result lists no right neighbours, so it describes inserting `y` into the
    /// subset of the archive up to the last listed point.
    pub fn probe_within(&self, y: &ObjectiveVector, limit: usize) -> Option<InsertChange> {
        let y = canonical(*y);
        if !y.is_finite() {
            return None;
        }
        let key = Key(y.y1);
        let mut before = self
            .entries
            .range(..=key)
            .rev()
            .map(|(k, s)| ObjectiveVector::new(k.0, s.y2))
            .peekable();
        if let Some(p) = before.peek() {
            if p.y2 <= y.y2 {
                return None;
            }
            if p.y1 == y.y1 {
                // same first objective, worse second: it is removed, not a neighbour
                before.next();
            }
        }
        let mut left: Vec<ObjectiveVector> = before.take(2).collect();
        left.reverse();
        let mut after = self
            .entries
            .range(key..)
            .map(|(k, s)| ObjectiveVector::new(k.0, s.y2))
            .peekable();
        let mut removed = Vec::new();
        let mut truncated = false;
        while let Some(p) = after.next_if(|p| p.y2 >= y.y2) {
            if removed.len() == limit {
                truncated = true;
                break;
            }
            removed.push(p);
        }
        let right = if truncated {
            Vec::new()
        } else {
            after.take(2).collect()
        };
        Some(InsertChange {
            left,
            removed,
            right,
        })
    }

    pub fn iter(&self) -> impl DoubleEndedIterator<Item = (ObjectiveVector, &T)> + '_ {
        self.entries
            .iter()
            .map(|(k, s)| (ObjectiveVector::new(k.0, s.y2), &s.payload))
    }

    /// The archived points in increasing `y1`.
    pub fn points(&self) -> Vec<ObjectiveVector> {
        self.iter().map(|(y, _)| y).collect()
    }

    pub fn into_entries(self) -> Vec<(ObjectiveVector, T)> {
        self.entries
            .into_iter()
            .map(|(k, s)| (ObjectiveVector::new(k.0, s.y2), s.payload))
            .collect()
    }

    pub fn contains(&self, y: &ObjectiveVector) -> bool {
        self.entries.get(&Key(y.y1)).is_some_and(|s| s.y2 == y.y2)
    }
}
