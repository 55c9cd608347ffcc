//! Convex-quadratic functions `f(x) = ½ (x − x*)ᵀ H (x − x*) + y*`.
//!
//! Every objective in this crate is built from these. The operations here are
//! exact algebra: evaluation, gradients, the minimizer of a convex combination
//! of two quadratics (which traces the Pareto set of a bi-quadratic problem),
//! and closed-form addition.
//!
//! Linear systems are always solved through a Cholesky factorization of the
//! (positive-definite) combined Hessian; no explicit inverse is formed.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative asymmetry tolerated by [`QuadraticForm::new`] before it refuses the Hessian.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticForm {
    hessian: DMatrix<f64>,
    optimum: DVector<f64>,
    value: f64,
}

impl QuadraticForm {
    /// Builds a quadratic from its Hessian, minimizer and minimum value.
    ///
    /// The Hessian is symmetrized by averaging with its transpose. Asymmetry above
    /// `1e-12 · max|H|`, a failed Cholesky factorization, mismatched sizes or
    /// non-finite entries are rejected.
    pub fn new(hessian: DMatrix<f64>, optimum: DVector<f64>, value: f64) -> Result<Self> {
        let d = optimum.len();
        if d == 0 {
            return Err(Error::Argument("dimension must be at least 1".into()));
        }
        if hessian.nrows() != d || hessian.ncols() != d {
            return Err(Error::Argument(format!(
                "hessian is {}x{} but optimum has length {d}",
                hessian.nrows(),
                hessian.ncols()
            )));
        }
        if !value.is_finite()
            || hessian.iter().any(|v| !v.is_finite())
            || optimum.iter().any(|v| !v.is_finite())
        {
            return Err(Error::Argument(
                "quadratic form has non-finite entries".into(),
            ));
        }
        let hessian = symmetrize(hessian)?;
        if Cholesky::new(hessian.clone()).is_none() {
            return Err(Error::Domain("hessian is not positive definite".into()));
        }
        Ok(Self {
            hessian,
            optimum,
            value,
        })
    }

    /// `½‖x − center‖² + value`, i.e. `H = I`.
    pub fn sphere(center: &[f64], value: f64) -> Result<Self> {
        let d = center.len();
        Self::new(
            DMatrix::identity(d, d),
            DVector::from_column_slice(center),
            value,
        )
    }

    pub fn dimension(&self) -> usize {
        self.optimum.len()
    }

    pub fn hessian(&self) -> &DMatrix<f64> {
        &self.hessian
    }

    pub fn optimum(&self) -> &DVector<f64> {
        &self.optimum
    }

    pub fn optimum_value(&self) -> f64 {
        self.value
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x.len())?;
        Ok(self.eval(x))
    }

    /// Evaluation without the length check; callers guarantee `x.len() == d`.
    #[inline]
    pub(crate) fn eval(&self, x: &[f64]) -> f64 {
        0.5 * self.quad_part(x) + self.value
    }

    /// `(x − x*)ᵀ H (x − x*)`.
    #[inline]
    fn quad_part(&self, x: &[f64]) -> f64 {
        let d = self.optimum.len();
        let h = self.hessian.as_slice();
        let c = self.optimum.as_slice();
        let mut diff_buf = [0.0f64; 32];
        let mut diff_vec;
        let diff: &mut [f64] = if d <= diff_buf.len() {
            &mut diff_buf[..d]
        } else {
            diff_vec = vec![0.0; d];
            &mut diff_vec
        };
        for i in 0..d {
            diff[i] = x[i] - c[i];
        }
        // column-major storage; H is symmetric
        let mut acc = 0.0;
        for j in 0..d {
            let col = &h[j * d..(j + 1) * d];
            let mut s = 0.0;
            for i in 0..d {
                s += col[i] * diff[i];
            }
            acc += s * diff[j];
        }
        acc
    }

    /// `H (x − x*)`.
    pub fn gradient(&self, x: &[f64]) -> Result<DVector<f64>> {
        self.check_dim(x.len())?;
        let diff = DVector::from_column_slice(x) - &self.optimum;
        Ok(&self.hessian * diff)
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

fn symmetrize(h: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let scale = h.amax();
    let asym = (&h - h.transpose()).amax();
    if asym > SYMMETRY_TOLERANCE * scale {
        return Err(Error::Argument(format!(
            "hessian not symmetric (max asymmetry {asym:e})"
        )));
    }
    Ok((&h + h.transpose()) * 0.5)
}

fn check_pair(q1: &QuadraticForm, q2: &QuadraticForm) -> Result<()> {
    if q1.dimension() != q2.dimension() {
        return Err(Error::Argument(format!(
            "dimension mismatch: {} vs {}",
            q1.dimension(),
            q2.dimension()
        )));
    }
    Ok(())
}

fn check_weight(t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Argument(format!(
            "interpolation weight {t} outside [0, 1]"
        )));
    }
    Ok(())
}

/// Solves `(a H₁ + b H₂) x = a H₁ x₁* + b H₂ x₂*`.
fn weighted_minimizer(
    q1: &QuadraticForm,
    q2: &QuadraticForm,
    a: f64,
    b: f64,
) -> (DMatrix<f64>, DVector<f64>) {
    let h = &q1.hessian * a + &q2.hessian * b;
    let rhs = (&q1.hessian * &q1.optimum) * a + (&q2.hessian * &q2.optimum) * b;
    let chol = Cholesky::new(h.clone())
        .expect("positive combination of positive-definite matrices is positive definite");
    let x = chol.solve(&rhs);
    (h, x)
}

/// Minimizer of `(1 − t) f₁ + t f₂`.
///
/// As `t` runs over `[0, 1]` this traces the Pareto set of the bi-objective
/// problem `(f₁, f₂)`. The endpoints are returned exactly.
pub fn interpolate_optimum(q1: &QuadraticForm, q2: &QuadraticForm, t: f64) -> Result<DVector<f64>> {
    check_pair(q1, q2)?;
    check_weight(t)?;
    if t == 0.0 {
        return Ok(q1.optimum.clone());
    }
    if t == 1.0 {
        return Ok(q2.optimum.clone());
    }
    Ok(weighted_minimizer(q1, q2, 1.0 - t, t).1)
}

/// The quadratic `(1 − t) f₁ + t f₂` in canonical form.
pub fn interpolate(q1: &QuadraticForm, q2: &QuadraticForm, t: f64) -> Result<QuadraticForm> {
    check_pair(q1, q2)?;
    check_weight(t)?;
    if t == 0.0 {
        return Ok(q1.clone());
    }
    if t == 1.0 {
        return Ok(q2.clone());
    }
    let (h, x) = weighted_minimizer(q1, q2, 1.0 - t, t);
    let xs = x.as_slice();
    let y = (1.0 - t) * q1.eval(xs) + t * q2.eval(xs);
    Ok(QuadraticForm {
        hessian: (&h + h.transpose()) * 0.5,
        optimum: x,
        value: y,
    })
}

/// The quadratic `f₁ + f₂` in canonical form.
pub fn add(q1: &QuadraticForm, q2: &QuadraticForm) -> Result<QuadraticForm> {
    check_pair(q1, q2)?;
    if q1.optimum == q2.optimum {
        // shared minimizer: skip the solve so it is kept exactly
        let h = &q1.hessian + &q2.hessian;
        return Ok(QuadraticForm {
            hessian: (&h + h.transpose()) * 0.5,
            optimum: q1.optimum.clone(),
            value: q1.value + q2.value,
        });
    }
    let (h, x) = weighted_minimizer(q1, q2, 1.0, 1.0);
    let xs = x.as_slice();
    let y = q1.eval(xs) + q2.eval(xs);
    Ok(QuadraticForm {
        hessian: (&h + h.transpose()) * 0.5,
        optimum: x,
        value: y,
    })
}

/// `λ_max / λ_min` from a full symmetric eigendecomposition.
pub fn condition_number(h: &DMatrix<f64>) -> Result<f64> {
    if h.nrows() != h.ncols() || h.nrows() == 0 {
        return Err(Error::Argument(
            "condition number needs a non-empty square matrix".into(),
        ));
    }
    let eig = SymmetricEigen::new(h.clone());
    let min = eig.eigenvalues.min();
    let max = eig.eigenvalues.max();
    if !(min > 0.0) {
        return Err(Error::Domain(format!(
            "matrix is not positive definite (smallest eigenvalue {min:e})"
        )));
    }
    Ok(max / min)
}
