//! Random building blocks: streams, distributions, rotations, Hessians and optima.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The generator every instance is sampled with.
pub type InstanceRng = ChaCha12Rng;

/// Human-readable description of [`stream`], stored in instance files.
pub const PRNG_DESCRIPTION: &str =
    "ChaCha12; key = rand_core seed_from_u64(seed); stream = attempt << 8 | entity";

/// Box the single-objective optima are drawn from.
pub const OPTIMA_BOX: f64 = 4.0;
/// Minimum distance between the two global optima.
pub const MIN_OPTIMA_DISTANCE: f64 = 2.0;
/// Rejection-sampling cap for [`sample_optima_pair`].
pub const MAX_OPTIMA_ATTEMPTS: usize = 10_000;

/// Sampled entities; each gets its own stream so that changing how one of them is
/// drawn never shifts the others.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Entity {
    Optima = 1,
    Kappa = 2,
    Hessian1 = 3,
    Hessian2 = 4,
    Exponent = 5,
    Scale = 6,
    Steps = 7,
    Components1 = 8,
    Components2 = 9,
}

impl Entity {
    pub fn hessian(objective: usize) -> Self {
        if objective == 0 {
            Entity::Hessian1
        } else {
            Entity::Hessian2
        }
    }

    pub fn components(objective: usize) -> Self {
        if objective == 0 {
            Entity::Components1
        } else {
            Entity::Components2
        }
    }
}

/// The stream for one entity of one generation attempt.
pub fn stream(seed: u64, attempt: u32, entity: Entity) -> InstanceRng {
    let mut rng = InstanceRng::seed_from_u64(seed);
    rng.set_stream(((attempt as u64) << 8) | entity as u64);
    rng
}

/// A scalar parameter that is either fixed or drawn log-uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Distribution {
    Constant { value: f64 },
    LogUniform { lo: f64, hi: f64 },
}

impl Distribution {
    pub fn constant(value: f64) -> Self {
        Distribution::Constant { value }
    }

    pub fn log_uniform(lo: f64, hi: f64) -> Self {
        Distribution::LogUniform { lo, hi }
    }

    pub fn validate(&self, what: &str) -> Result<()> {
        match *self {
            Distribution::Constant { value } if value.is_finite() && value > 0.0 => Ok(()),
            Distribution::LogUniform { lo, hi } if lo > 0.0 && lo <= hi && hi.is_finite() => Ok(()),
            _ => Err(Error::Argument(format!(
                "{what}: invalid distribution {self:?}"
            ))),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Distribution::Constant { value } => value,
            Distribution::LogUniform { lo, hi } => log_uniform(rng, lo, hi),
        }
    }
}

/// Number of discretization steps, `⌊LogUnif(lo, hi)⌋`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepsDistribution {
    FloorLogUniform { lo: f64, hi: f64 },
}

impl StepsDistribution {
    pub fn validate(&self) -> Result<()> {
        let StepsDistribution::FloorLogUniform { lo, hi } = *self;
        if lo >= 1.0 && lo <= hi && hi.is_finite() {
            Ok(())
        } else {
            Err(Error::Argument(format!(
                "invalid steps distribution {self:?}"
            )))
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let StepsDistribution::FloorLogUniform { lo, hi } = *self;
        (log_uniform(rng, lo, hi).floor() as u32).max(1)
    }
}

pub fn log_uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if lo == hi {
        return lo;
    }
    let (a, b) = (lo.ln(), hi.ln());
    (a + rng.random::<f64>() * (b - a)).exp().clamp(lo, hi)
}

pub fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo + rng.random::<f64>() * (hi - lo)
}

/// How the Hessians of an objective (or of its components) are built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HessianMode {
    Identity,
    /// A diagonal with shuffled eigenvalues; the objective stays separable.
    PermutationDiagonal,
    /// `RᵀDR` with one Hessian shared by both objectives.
    Rotated,
    /// `RᵀDR` sampled separately for each objective.
    IndependentRotated,
}

/// A Haar-distributed orthogonal matrix from the QR factorization of a Gaussian
/// matrix, with the signs fixed so that `R` has a positive diagonal.
pub fn sample_rotation<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<DMatrix<f64>> {
    if d < 2 {
        return Err(Error::Argument(format!("rotations need d >= 2, got {d}")));
    }
    let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    Ok(q)
}

/// Eigenvalues `1, κ, λ₃, …, λ_d` with `λᵢ ~ LogUnif(1, κ)`.
pub fn sample_spectrum<R: Rng + ?Sized>(d: usize, kappa: f64, rng: &mut R) -> Vec<f64> {
    let mut eig = Vec::with_capacity(d);
    eig.push(1.0);
    if d > 1 {
        eig.push(kappa);
    }
    for _ in 2..d {
        eig.push(log_uniform(rng, 1.0, kappa));
    }
    eig
}

/// A symmetric positive-definite matrix with condition number `kappa`.
pub fn sample_hessian<R: Rng + ?Sized>(
    d: usize,
    kappa: f64,
    mode: HessianMode,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    if !(kappa >= 1.0) || !kappa.is_finite() {
        return Err(Error::Argument(format!(
            "condition number must be >= 1, got {kappa}"
        )));
    }
    if d < 2 {
        return Err(Error::Argument(format!("hessians need d >= 2, got {d}")));
    }
    match mode {
        HessianMode::Identity => Ok(DMatrix::identity(d, d)),
        HessianMode::PermutationDiagonal => {
            let mut eig = sample_spectrum(d, kappa, rng);
            eig.shuffle(rng);
            Ok(DMatrix::from_diagonal(&DVector::from_vec(eig)))
        }
        HessianMode::Rotated | HessianMode::IndependentRotated => {
            let eig = sample_spectrum(d, kappa, rng);
            let r = sample_rotation(d, rng)?;
            let h = r.transpose() * DMatrix::from_diagonal(&DVector::from_vec(eig)) * &r;
            Ok((&h + h.transpose()) * 0.5)
        }
    }
}

/// A uniform point of `[−4, 4]^d`.
pub fn sample_point<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(d, |_, _| uniform(rng, -OPTIMA_BOX, OPTIMA_BOX))
}

/// Two uniform points of `[−4, 4]^d` at distance at least 2, by rejection.
pub fn sample_optima_pair<R: Rng + ?Sized>(
    d: usize,
    rng: &mut R,
) -> Result<(DVector<f64>, DVector<f64>)> {
    if d < 2 {
        return Err(Error::Argument(format!(
            "optima pairs need d >= 2, got {d}"
        )));
    }
    for _ in 0..MAX_OPTIMA_ATTEMPTS {
        let a = sample_point(d, rng);
        let b = sample_point(d, rng);
        if (&a - &b).norm() >= MIN_OPTIMA_DISTANCE {
            return Ok((a, b));
        }
    }
    Err(Error::Generation(format!(
        "no optima pair at distance >= {MIN_OPTIMA_DISTANCE} after {MAX_OPTIMA_ATTEMPTS} draws"
    )))
}

/// Like [`sample_optima_pair`], but the second point copies the first and
/// redraws one randomly chosen coordinate.
pub fn sample_axis_aligned_pair<R: Rng + ?Sized>(
    d: usize,
    rng: &mut R,
) -> Result<(DVector<f64>, DVector<f64>)> {
    if d < 2 {
        return Err(Error::Argument(format!(
            "optima pairs need d >= 2, got {d}"
        )));
    }
    let a = sample_point(d, rng);
    let axis = rng.random_range(0..d);
    for _ in 0..MAX_OPTIMA_ATTEMPTS {
        let v = uniform(rng, -OPTIMA_BOX, OPTIMA_BOX);
        if (v - a[axis]).abs() >= MIN_OPTIMA_DISTANCE {
            let mut b = a.clone();
            b[axis] = v;
            return Ok((a, b));
        }
    }
    Err(Error::Generation(
        "no axis-aligned optima pair found".into(),
    ))
}
