//! Peak functions: a minimum over convex-quadratic components, passed through
//! `s · v^(p/2)`, optionally rounded down to a multiple of a step `h`, and shifted
//! by an offset.
//!
//! ```text
//! f(x) = ⌊ s · ( min_j ½(x − x_j)ᵀ H_j (x − x_j) + y_j )^(p/2) ⌋_h + offset
//! ```
//!
//! The power and scale are strictly monotone, so they never move a Pareto set;
//! the rounding is only weakly monotone and may add plateaus.

use nalgebra::DVector;

use crate::archive::ObjectiveVector;
use crate::error::{Error, Result};
use crate::quadratic::QuadraticForm;

/// Inner values down to this far below zero are treated as rounding noise and clamped.
const INNER_NEGATIVE_SLACK: f64 = 1e-12;

/// Rounds `y` down to a multiple of `h`; `h = 0` leaves `y` untouched.
pub fn discretize(y: f64, h: f64) -> f64 {
    if h > 0.0 {
        h * (y / h).floor()
    } else {
        y
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakTransform {
    pub scale: f64,
    pub exponent: f64,
    pub offset: f64,
    /// Rounding step; zero disables discretization.
    pub step: f64,
}

impl PeakTransform {
    pub fn new(scale: f64, exponent: f64, offset: f64, step: f64) -> Result<Self> {
        let t = Self {
            scale,
            exponent,
            offset,
            step,
        };
        t.validate()?;
        Ok(t)
    }

    /// `s = 1, p = 2`, no offset, no rounding: the raw quadratic.
    pub fn identity() -> Self {
        Self {
            scale: 1.0,
            exponent: 2.0,
            offset: 0.0,
            step: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(Error::Argument(format!(
                "scale must be > 0, got {}",
                self.scale
            )));
        }
        if !(self.exponent.is_finite() && self.exponent > 0.0) {
            return Err(Error::Argument(format!(
                "exponent must be > 0, got {}",
                self.exponent
            )));
        }
        if !self.offset.is_finite() {
            return Err(Error::Argument("offset must be finite".into()));
        }
        if !(self.step.is_finite() && self.step >= 0.0) {
            return Err(Error::Argument(format!(
                "step must be >= 0, got {}",
                self.step
            )));
        }
        Ok(())
    }

    /// `s · v^(p/2)` without rounding or offset.
    #[inline]
    pub fn smooth(&self, inner: f64) -> f64 {
        let half = 0.5 * self.exponent;
        let powered = if half == 1.0 { inner } else { inner.powf(half) };
        self.scale * powered
    }

    /// The full transform of an inner value.
    #[inline]
    pub fn apply(&self, inner: f64) -> f64 {
        discretize(self.smooth(inner), self.step) + self.offset
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeakObjective {
    components: Vec<QuadraticForm>,
    transform: PeakTransform,
}

impl PeakObjective {
    /// All components must share a dimension and have a non-negative minimum value,
    /// so that the inner minimum is never negative.
    pub fn new(components: Vec<QuadraticForm>, transform: PeakTransform) -> Result<Self> {
        transform.validate()?;
        let first = components.first().ok_or_else(|| {
            Error::Argument("a peak objective needs at least one component".into())
        })?;
        let d = first.dimension();
        for (j, c) in components.iter().enumerate() {
            if c.dimension() != d {
                return Err(Error::Argument(format!(
                    "component {j} has dimension {}, expected {d}",
                    c.dimension()
                )));
            }
            if c.optimum_value() < 0.0 {
                return Err(Error::Argument(format!(
                    "component {j} has negative minimum value {}",
                    c.optimum_value()
                )));
            }
        }
        Ok(Self {
            components,
            transform,
        })
    }

    pub fn components(&self) -> &[QuadraticForm] {
        &self.components
    }

    pub fn transform(&self) -> &PeakTransform {
        &self.transform
    }

    pub fn dimension(&self) -> usize {
        self.components[0].dimension()
    }

    /// The same components under a different transform.
    pub fn with_transform(&self, transform: PeakTransform) -> Result<Self> {
        Self::new(self.components.clone(), transform)
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x.len())?;
        let v = self.checked_inner(x)?;
        Ok(self.transform.apply(v))
    }

    /// Value before rounding and offset, `s · v^(p/2)`.
    pub fn evaluate_smooth(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x.len())?;
        let v = self.checked_inner(x)?;
        Ok(self.transform.smooth(v) + self.transform.offset)
    }

    /// `min_j` of the components, before any transform.
    pub fn inner(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x.len())?;
        self.checked_inner(x)
    }

    /// Index of the first component attaining the inner minimum.
    pub fn active_component(&self, x: &[f64]) -> Result<usize> {
        self.check_dim(x.len())?;
        Ok(self.argmin(x).0)
    }

    #[inline]
    pub(crate) fn eval(&self, x: &[f64]) -> f64 {
        let v = self.argmin(x).1;
        debug_assert!(v >= -INNER_NEGATIVE_SLACK, "negative inner value {v}");
        self.transform.apply(v.max(0.0))
    }

    #[inline]
    fn argmin(&self, x: &[f64]) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (j, c) in self.components.iter().enumerate() {
            let v = c.eval(x);
            if v < best.1 {
                best = (j, v);
            }
        }
        best
    }

    fn checked_inner(&self, x: &[f64]) -> Result<f64> {
        let v = self.argmin(x).1;
        if v < -INNER_NEGATIVE_SLACK {
            return Err(Error::Invariant(format!("inner minimum {v} is negative")));
        }
        Ok(v.max(0.0))
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.dimension() {
            return Err(Error::Argument(format!(
                "expected a vector of length {}, got {len}",
                self.dimension()
            )));
        }
        Ok(())
    }
}

/// Two peak objectives on the box `[lower, upper]`, together with the positions
/// of their global minima and the derived ideal and nadir points.
#[derive(Debug, Clone, PartialEq)]
pub struct BiObjectiveProblem {
    f1: PeakObjective,
    f2: PeakObjective,
    lower: Vec<f64>,
    upper: Vec<f64>,
    global_optima: [DVector<f64>; 2],
    ideal: ObjectiveVector,
    nadir: ObjectiveVector,
}

impl BiObjectiveProblem {
    /// Assembles a problem and computes its ideal and nadir points; fails with
    /// [`Error::DegenerateInstance`] when they coincide in either objective.
    pub fn new(
        f1: PeakObjective,
        f2: PeakObjective,
        global_optima: [DVector<f64>; 2],
        lower: Vec<f64>,
        upper: Vec<f64>,
    ) -> Result<Self> {
        let d = f1.dimension();
        if f2.dimension() != d
            || global_optima.iter().any(|x| x.len() != d)
            || lower.len() != d
            || upper.len() != d
        {
            return Err(Error::Argument(
                "objectives, optima and bounds disagree on dimension".into(),
            ));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l < u)) {
            return Err(Error::Argument(
                "every lower bound must be below its upper bound".into(),
            ));
        }
        let (ideal, nadir) = ideal_nadir(&f1, &f2, &global_optima)?;
        Ok(Self {
            f1,
            f2,
            lower,
            upper,
            global_optima,
            ideal,
            nadir,
        })
    }

    /// The default search box `[−5, 5]^d`.
    pub fn default_bounds(d: usize) -> (Vec<f64>, Vec<f64>) {
        (vec![-5.0; d], vec![5.0; d])
    }

    pub fn dimension(&self) -> usize {
        self.f1.dimension()
    }

    pub fn f1(&self) -> &PeakObjective {
        &self.f1
    }

    pub fn f2(&self) -> &PeakObjective {
        &self.f2
    }

    pub fn objectives(&self) -> [&PeakObjective; 2] {
        [&self.f1, &self.f2]
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn global_optima(&self) -> &[DVector<f64>; 2] {
        &self.global_optima
    }

    pub fn ideal(&self) -> ObjectiveVector {
        self.ideal
    }

    pub fn nadir(&self) -> ObjectiveVector {
        self.nadir
    }

    pub fn in_bounds(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (l, u))| *l <= *v && *v <= *u)
    }

    /// `(f₁(x), f₂(x))`. Points outside the box are evaluated like any other.
    pub fn evaluate(&self, x: &[f64]) -> Result<ObjectiveVector> {
        Ok(ObjectiveVector::new(
            self.f1.evaluate(x)?,
            self.f2.evaluate(x)?,
        ))
    }

    #[inline]
    pub(crate) fn eval(&self, x: &[f64]) -> ObjectiveVector {
        ObjectiveVector::new(self.f1.eval(x), self.f2.eval(x))
    }
}

/// Ideal `(f₁(x₁*), f₂(x₂*))` and nadir `(f₁(x₂*), f₂(x₁*))` from the two global
/// optima, using the objectives without rounding.
pub fn ideal_nadir(
    f1: &PeakObjective,
    f2: &PeakObjective,
    global_optima: &[DVector<f64>; 2],
) -> Result<(ObjectiveVector, ObjectiveVector)> {
    let [x1, x2] = global_optima;
    let (x1, x2) = (x1.as_slice(), x2.as_slice());
    let ideal = ObjectiveVector::new(f1.evaluate_smooth(x1)?, f2.evaluate_smooth(x2)?);
    let nadir = ObjectiveVector::new(f1.evaluate_smooth(x2)?, f2.evaluate_smooth(x1)?);
    if !(nadir.y1 > ideal.y1) || !(nadir.y2 > ideal.y2) {
        return Err(Error::DegenerateInstance(format!(
            "ideal {ideal:?} and nadir {nadir:?} span an empty box"
        )));
    }
    Ok((ideal, nadir))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere(c: &[f64], y: f64) -> QuadraticForm {
        QuadraticForm::sphere(c, y).unwrap()
    }

    fn peak(comps: Vec<QuadraticForm>, s: f64, p: f64, off: f64, h: f64) -> PeakObjective {
        PeakObjective::new(comps, PeakTransform::new(s, p, off, h).unwrap()).unwrap()
    }

    fn bisphere(off1: f64, off2: f64) -> BiObjectiveProblem {
        let f1 = peak(vec![sphere(&[0.0, 0.0], 0.0)], 1.0, 2.0, off1, 0.0);
        let f2 = peak(vec![sphere(&[2.0, 0.0], 0.0)], 1.0, 2.0, off2, 0.0);
        let (lo, hi) = BiObjectiveProblem::default_bounds(2);
        BiObjectiveProblem::new(
            f1,
            f2,
            [
                DVector::from_vec(vec![0.0, 0.0]),
                DVector::from_vec(vec![2.0, 0.0]),
            ],
            lo,
            hi,
        )
        .unwrap()
    }

    #[test]
    fn discretize_examples() {
        assert_eq!(discretize(1.3, 0.5), 1.0);
        assert_eq!(discretize(-0.1, 0.5), -0.5);
        assert_eq!(discretize(2.0, 0.5), 2.0);
        assert_eq!(discretize(1.3, 0.0), 1.3);
    }

    #[test]
    fn evaluate_peak_examples() {
        let f = peak(vec![sphere(&[0.0, 0.0], 0.0)], 1.0, 2.0, 0.0, 0.0);
        assert_eq!(f.evaluate(&[2.0, 0.0]).unwrap(), 2.0);
        let f = peak(vec![sphere(&[0.0, 0.0], 0.0)], 1.0, 1.0, 0.0, 0.0);
        assert!((f.evaluate(&[2.0, 0.0]).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        let f = peak(
            vec![sphere(&[0.0, 0.0], 0.0), sphere(&[3.0, 0.0], 1.0)],
            1.0,
            2.0,
            0.0,
            0.0,
        );
        assert_eq!(f.evaluate(&[3.0, 0.0]).unwrap(), 1.0);
        assert_eq!(f.active_component(&[3.0, 0.0]).unwrap(), 1);
        assert!(f.evaluate(&[3.0]).is_err());
    }

    #[test]
    fn active_component_ties_pick_first() {
        let single = peak(vec![sphere(&[1.0, 1.0], 0.0)], 1.0, 2.0, 0.0, 0.0);
        assert_eq!(single.active_component(&[4.0, -2.0]).unwrap(), 0);
        let twins = peak(
            vec![sphere(&[-1.0, 0.0], 0.0), sphere(&[1.0, 0.0], 0.0)],
            1.0,
            2.0,
            0.0,
            0.0,
        );
        assert_eq!(twins.active_component(&[0.0, 3.0]).unwrap(), 0);
    }

    #[test]
    fn problem_evaluation() {
        let p = bisphere(0.0, 0.0);
        let y = p.evaluate(&[1.0, 0.0]).unwrap();
        assert_eq!((y.y1, y.y2), (0.5, 0.5));
        let y = p.evaluate(&[0.0, 0.0]).unwrap();
        assert_eq!(y.y1, p.ideal().y1);
        let y = p.evaluate(&[2.0, 0.0]).unwrap();
        assert_eq!(y.y2, p.ideal().y2);
        // outside the box is still evaluated
        assert!(p.evaluate(&[9.0, -9.0]).is_ok());
    }

    #[test]
    fn ideal_nadir_examples() {
        let p = bisphere(0.0, 0.0);
        assert_eq!(p.ideal(), ObjectiveVector::new(0.0, 0.0));
        assert_eq!(p.nadir(), ObjectiveVector::new(2.0, 2.0));
        let p = bisphere(3.0, -1.0);
        assert_eq!(p.ideal(), ObjectiveVector::new(3.0, -1.0));
        assert_eq!(p.nadir(), ObjectiveVector::new(5.0, 1.0));

        let f1 = peak(vec![sphere(&[0.0, 0.0], 0.0)], 1.0, 2.0, 0.0, 0.0);
        let f2 = peak(vec![sphere(&[0.0, 0.0], 0.0)], 1.0, 2.0, 0.0, 0.0);
        let same = [DVector::zeros(2), DVector::zeros(2)];
        assert!(matches!(
            ideal_nadir(&f1, &f2, &same),
            Err(Error::DegenerateInstance(_))
        ));
    }

    #[test]
    fn single_component_identity_transform_is_the_quadratic() {
        let h = nalgebra::DMatrix::from_row_slice(2, 2, &[3.0, 1.0, 1.0, 2.0]);
        let q0 = QuadraticForm::new(h.clone(), DVector::from_vec(vec![0.5, -1.0]), 0.0).unwrap();
        let q7 = QuadraticForm::new(h, DVector::from_vec(vec![0.5, -1.0]), 7.25).unwrap();
        let f = peak(vec![q0], 1.0, 2.0, 7.25, 0.0);
        for x in [[0.0, 0.0], [1.5, -3.0], [-4.0, 4.0]] {
            assert_eq!(f.evaluate(&x).unwrap(), q7.evaluate(&x).unwrap());
        }
    }

    #[test]
    fn constructor_rejects_bad_input() {
        assert!(PeakTransform::new(0.0, 2.0, 0.0, 0.0).is_err());
        assert!(PeakTransform::new(1.0, -1.0, 0.0, 0.0).is_err());
        assert!(PeakTransform::new(1.0, 1.0, 0.0, -0.1).is_err());
        assert!(PeakObjective::new(vec![], PeakTransform::identity()).is_err());
        assert!(PeakObjective::new(vec![sphere(&[0.0], -1.0)], PeakTransform::identity()).is_err());
        assert!(PeakObjective::new(
            vec![sphere(&[0.0], 0.0), sphere(&[0.0, 0.0], 0.0)],
            PeakTransform::identity()
        )
        .is_err());
    }
}
