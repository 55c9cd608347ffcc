//! Seeded sampling of the twenty benchmark classes and of user-defined classes.
//!
//! Every sampled entity (optima, condition numbers, Hessians, exponent, scales,
//! steps, multimodal components) is drawn from its own ChaCha stream derived from
//! `(seed, attempt)`. Classes that differ only in one knob therefore share all
//! other draws for equal seeds, and a multimodal class embeds the exact unimodal
//! instance it is built on.
//!
//! ```
//! use bono::generator::{generate, ClassId};
//!
//! let inst = generate(&ClassId::Bono(1), 2, 0).unwrap();
//! let [x1, x2] = inst.problem().global_optima();
//! assert_eq!((x1 - x2).iter().filter(|v| **v != 0.0).count(), 1);
//! ```

mod document;
pub mod sampling;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::peaks::{BiObjectiveProblem, PeakObjective, PeakTransform};
use crate::quadratic::{add, interpolate_optimum, QuadraticForm};

pub use document::SCHEMA_VERSION;
pub use sampling::{
    sample_hessian, sample_optima_pair, sample_rotation, Distribution, HessianMode,
    StepsDistribution,
};

use sampling::{log_uniform, sample_axis_aligned_pair, sample_point, stream, uniform, Entity};

/// Regeneration cap when an attempt is degenerate or leaves the search box.
pub const MAX_ATTEMPTS: u32 = 100;
/// Pareto-set samples per peak pair in the bounds check.
pub const BOUNDS_CHECK_SAMPLES: usize = 1000;
/// Scales are drawn from `LogUnif(1, SCALE_MAX)`.
pub const SCALE_MAX: f64 = 1e6;
/// Number of perturbation components per objective in the multimodal classes
/// with global structure.
pub const PERTURBATION_COUNT: usize = 500;

/// A named benchmark class (`BONO1` … `BONO20`) or a user-defined one.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ClassId {
    Bono(u8),
    /// Any name starting with `CUSTOM`, e.g. `CUSTOM` or `CUSTOM:ridge`.
    Custom(String),
}

impl ClassId {
    /// All twenty built-in classes in order.
    pub fn all() -> impl Iterator<Item = ClassId> {
        (1..=20).map(ClassId::Bono)
    }

    /// Descriptive name of a built-in class.
    pub fn title(&self) -> &str {
        const TITLES: [&str; 20] = [
            "AxisAlignedSphere",
            "AxisAlignedEllipsoid",
            "ConvexFrontEllipsoid",
            "LinearFrontEllipsoid",
            "ConcaveFrontEllipsoid",
            "FreeEllipsoid",
            "SteppedEllipsoid",
            "MultimodalAxisAlignedSphere",
            "MultimodalAxisAlignedEllipsoid",
            "MultimodalConvexFrontEllipsoid",
            "MultimodalLinearFrontEllipsoid",
            "MultimodalConcaveFrontEllipsoid",
            "MultimodalFreeEllipsoid",
            "MultimodalSteppedEllipsoid",
            "FewSpheres",
            "ManySpheres",
            "SteppedManySpheres",
            "FewEllipsoids",
            "ManyEllipsoids",
            "SteppedManyEllipsoids",
        ];
        match self {
            ClassId::Bono(k) => TITLES[*k as usize - 1],
            ClassId::Custom(name) => name,
        }
    }
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassId::Bono(k) => write!(f, "BONO{k}"),
            ClassId::Custom(name) => f.write_str(name),
        }
    }
}

impl FromStr for ClassId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let upper = s.trim().to_ascii_uppercase();
        if let Some(num) = upper.strip_prefix("BONO") {
            return match num.parse::<u8>() {
                Ok(k @ 1..=20) => Ok(ClassId::Bono(k)),
                _ => Err(Error::Argument(format!(
                    "unknown class `{s}` (expected BONO1..BONO20)"
                ))),
            };
        }
        if upper.starts_with("CUSTOM") {
            return Ok(ClassId::Custom(s.trim().to_string()));
        }
        Err(Error::Argument(format!("unknown class `{s}`")))
    }
}

impl TryFrom<String> for ClassId {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ClassId> for String {
    fn from(c: ClassId) -> String {
        c.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Structure {
    /// One quadratic per objective.
    Unimodal,
    /// The unimodal base plus perturbation quadratics: many local optima that
    /// follow the base trend.
    Perturbed,
    /// Randomly placed peaks without global structure.
    Random,
}

/// Every knob of a problem class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub class_id: ClassId,
    pub structure: Structure,
    pub kappa_dist: Distribution,
    pub p_dist: Distribution,
    pub steps_dist: Option<StepsDistribution>,
    pub peak_count: usize,
    pub hessian_mode: HessianMode,
    pub axis_aligned_optima: bool,
}

impl GeneratorConfig {
    /// The configuration of built-in class `BONO{k}`.
    pub fn bono(k: u8) -> Result<Self> {
        use Distribution as D;
        let unimodal = |k: u8| {
            let (kappa, p, mode, axis) = match k {
                1 => (
                    D::constant(1.0),
                    D::constant(2.0),
                    HessianMode::Identity,
                    true,
                ),
                2 => (
                    D::log_uniform(1e5, 1e6),
                    D::constant(2.0),
                    HessianMode::PermutationDiagonal,
                    true,
                ),
                3 => (
                    D::log_uniform(50.0, 200.0),
                    D::log_uniform(1.5, 3.0),
                    HessianMode::Rotated,
                    false,
                ),
                4 => (
                    D::log_uniform(50.0, 200.0),
                    D::constant(1.0),
                    HessianMode::Rotated,
                    false,
                ),
                5 => (
                    D::log_uniform(50.0, 200.0),
                    D::log_uniform(1.0 / 3.0, 2.0 / 3.0),
                    HessianMode::Rotated,
                    false,
                ),
                _ => (
                    D::log_uniform(50.0, 200.0),
                    D::log_uniform(1.0 / 3.0, 3.0),
                    HessianMode::IndependentRotated,
                    false,
                ),
            };
            GeneratorConfig {
                class_id: ClassId::Bono(k),
                structure: Structure::Unimodal,
                kappa_dist: kappa,
                p_dist: p,
                steps_dist: (k == 7).then_some(STEPS),
                peak_count: 1,
                hessian_mode: mode,
                axis_aligned_optima: axis,
            }
        };
        const STEPS: StepsDistribution = StepsDistribution::FloorLogUniform {
            lo: 50.0,
            hi: 201.0,
        };
        let random = |k: u8| {
            let spheres = k <= 17;
            GeneratorConfig {
                class_id: ClassId::Bono(k),
                structure: Structure::Random,
                kappa_dist: if spheres {
                    D::constant(1.0)
                } else {
                    D::log_uniform(50.0, 200.0)
                },
                p_dist: if k == 15 {
                    D::constant(2.0)
                } else {
                    D::log_uniform(1.0 / 3.0, 3.0)
                },
                steps_dist: matches!(k, 17 | 20).then_some(STEPS),
                peak_count: if matches!(k, 15 | 18) { 10 } else { 100 },
                hessian_mode: if spheres {
                    HessianMode::Identity
                } else {
                    HessianMode::Rotated
                },
                axis_aligned_optima: false,
            }
        };
        match k {
            1..=7 => Ok(unimodal(k)),
            8..=14 => Ok(GeneratorConfig {
                class_id: ClassId::Bono(k),
                structure: Structure::Perturbed,
                peak_count: PERTURBATION_COUNT,
                ..unimodal(k - 7)
            }),
            15..=20 => Ok(random(k)),
            _ => Err(Error::Argument(format!("no built-in class BONO{k}"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.kappa_dist.validate("kappa_dist")?;
        self.p_dist.validate("p_dist")?;
        if let Some(s) = &self.steps_dist {
            s.validate()?;
        }
        let (klo, khi) = match self.kappa_dist {
            Distribution::Constant { value } => (value, value),
            Distribution::LogUniform { lo, hi } => (lo, hi),
        };
        if klo < 1.0 || khi > 1e6 {
            return Err(Error::Argument(format!(
                "condition numbers must lie in [1, 1e6], got [{klo}, {khi}]"
            )));
        }
        if self.hessian_mode == HessianMode::Identity && khi != 1.0 {
            return Err(Error::Argument(
                "identity hessians need kappa_dist = constant 1".into(),
            ));
        }
        if self.peak_count == 0 {
            return Err(Error::Argument("peak_count must be at least 1".into()));
        }
        if self.structure == Structure::Unimodal && self.peak_count != 1 {
            return Err(Error::Argument(
                "unimodal classes have peak_count = 1".into(),
            ));
        }
        if let ClassId::Bono(k) = self.class_id {
            if *self != GeneratorConfig::bono(k)? {
                return Err(Error::Argument(format!(
                    "configuration differs from built-in class BONO{k}; use a CUSTOM class id"
                )));
            }
        }
        Ok(())
    }
}

/// A generated problem together with everything that was sampled for it.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    config: GeneratorConfig,
    seed: u64,
    attempt: u32,
    problem: BiObjectiveProblem,
    kappas: [Vec<f64>; 2],
    steps: Option<u32>,
}

impl ProblemInstance {
    pub fn config(&self) -> &GeneratorConfig {
        &self.config
    }

    pub fn class_id(&self) -> &ClassId {
        &self.config.class_id
    }

    pub fn dimension(&self) -> usize {
        self.problem.dimension()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Index of the attempt that produced this instance (0 unless earlier
    /// attempts were rejected).
    pub fn attempt(&self) -> u32 {
        self.attempt
    }

    pub fn problem(&self) -> &BiObjectiveProblem {
        &self.problem
    }

    /// Sampled condition numbers per objective: one for unimodal and perturbed
    /// structures (perturbation Hessians share it), one per component for
    /// random structures.
    pub fn kappas(&self) -> &[Vec<f64>; 2] {
        &self.kappas
    }

    /// The sampled number of discretization steps, if any.
    pub fn steps(&self) -> Option<u32> {
        self.steps
    }

    /// Instance file contents (compact JSON).
    pub fn to_json(&self) -> String {
        document::serialize(self, false)
    }

    pub fn to_json_pretty(&self) -> String {
        document::serialize(self, true)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        document::deserialize(text)
    }
}

/// Generates built-in class `class` (custom ids need [`generate_with`] or a
/// [`ClassRegistry`]).
pub fn generate(class: &ClassId, dimension: usize, seed: u64) -> Result<ProblemInstance> {
    match class {
        ClassId::Bono(k) => generate_with(&GeneratorConfig::bono(*k)?, dimension, seed),
        ClassId::Custom(name) => Err(Error::Argument(format!(
            "class `{name}` is not built in; register its configuration first"
        ))),
    }
}

/// User-defined classes by name, alongside the built-in ones.
#[derive(Debug, Clone, Default)]
pub struct ClassRegistry {
    custom: BTreeMap<ClassId, GeneratorConfig>,
}

impl ClassRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, config: GeneratorConfig) -> Result<()> {
        config.validate()?;
        if !matches!(config.class_id, ClassId::Custom(_)) {
            return Err(Error::Argument(
                "only CUSTOM class ids can be registered".into(),
            ));
        }
        self.custom.insert(config.class_id.clone(), config);
        Ok(())
    }

    pub fn config(&self, class: &ClassId) -> Result<GeneratorConfig> {
        match class {
            ClassId::Bono(k) => GeneratorConfig::bono(*k),
            ClassId::Custom(name) => self
                .custom
                .get(class)
                .cloned()
                .ok_or_else(|| Error::Argument(format!("class `{name}` is not registered"))),
        }
    }

    pub fn generate(
        &self,
        class: &ClassId,
        dimension: usize,
        seed: u64,
    ) -> Result<ProblemInstance> {
        generate_with(&self.config(class)?, dimension, seed)
    }
}

/// Generates an instance of an arbitrary configuration.
pub fn generate_with(
    config: &GeneratorConfig,
    dimension: usize,
    seed: u64,
) -> Result<ProblemInstance> {
    config.validate()?;
    if dimension < 2 {
        return Err(Error::Argument(format!(
            "dimension must be at least 2, got {dimension}"
        )));
    }
    let mut last = None;
    for attempt in 0..MAX_ATTEMPTS {
        match attempt_instance(config, dimension, seed, attempt) {
            Ok(inst) => return Ok(inst),
            Err(e @ (Error::DegenerateInstance(_) | Error::Generation(_))) => {
                log::debug!(
                    "{} d={dimension} seed={seed} attempt {attempt} rejected: {e}",
                    config.class_id
                );
                last = Some(e);
            }
            Err(e) => return Err(e),
        }
    }
    Err(Error::Generation(format!(
        "{} d={dimension} seed={seed}: no valid instance in {MAX_ATTEMPTS} attempts (last: {})",
        config.class_id,
        last.map(|e| e.to_string()).unwrap_or_default()
    )))
}

fn attempt_instance(
    config: &GeneratorConfig,
    d: usize,
    seed: u64,
    attempt: u32,
) -> Result<ProblemInstance> {
    let finish = |problem, kappas, steps| ProblemInstance {
        config: config.clone(),
        seed,
        attempt,
        problem,
        kappas,
        steps,
    };
    match config.structure {
        Structure::Unimodal => {
            let base = sample_base(config, d, seed, attempt)?;
            Ok(finish(
                base.problem,
                base.kappas.map(|k| vec![k]),
                base.steps,
            ))
        }
        Structure::Perturbed => {
            let base = sample_base(config, d, seed, attempt)?;
            let mode = match config.hessian_mode {
                HessianMode::IndependentRotated => HessianMode::Rotated,
                m => m,
            };
            let mut objectives = Vec::with_capacity(2);
            for (i, f) in base.problem.objectives().into_iter().enumerate() {
                let q = &f.components()[0];
                let mut rng = stream(seed, attempt, Entity::components(i));
                let mut comps = Vec::with_capacity(config.peak_count);
                comps.push(add(q, q)?);
                for _ in 1..config.peak_count {
                    let x = sample_point(d, &mut rng);
                    let h = sample_hessian(d, base.kappas[i], mode, &mut rng)?;
                    comps.push(add(q, &QuadraticForm::new(h, x, 0.0)?)?);
                }
                let transform = PeakTransform {
                    step: 0.0,
                    ..*f.transform()
                };
                objectives.push(PeakObjective::new(comps, transform)?);
            }
            let f2 = objectives.pop().expect("two objectives");
            let f1 = objectives.pop().expect("two objectives");
            let p = &base.problem;
            let mut problem = BiObjectiveProblem::new(
                f1,
                f2,
                p.global_optima().clone(),
                p.lower().to_vec(),
                p.upper().to_vec(),
            )?;
            if let Some(n) = base.steps {
                // same N_h as the base, spread over the perturbed ideal-nadir range
                problem = with_steps(&problem, n)?;
            }
            Ok(finish(problem, base.kappas.map(|k| vec![k]), base.steps))
        }
        Structure::Random => {
            let (x1, x2) = sample_optima_pair(d, &mut stream(seed, attempt, Entity::Optima))?;
            let mut kappas = [Vec::new(), Vec::new()];
            let mut comps = [Vec::new(), Vec::new()];
            for (i, centre) in [&x1, &x2].into_iter().enumerate() {
                let mut rng = stream(seed, attempt, Entity::components(i));
                for j in 0..config.peak_count {
                    let kappa = config.kappa_dist.sample(&mut rng);
                    let h = sample_hessian(d, kappa, config.hessian_mode, &mut rng)?;
                    let (x, y) = if j == 0 {
                        (centre.clone(), 0.0)
                    } else {
                        (sample_point(d, &mut rng), uniform(&mut rng, 1.0, 10.0))
                    };
                    kappas[i].push(kappa);
                    comps[i].push(QuadraticForm::new(h, x, y)?);
                }
            }
            let [c1, c2] = comps;
            let (problem, steps) = assemble(config, seed, attempt, [c1, c2], [x1, x2])?;
            Ok(finish(problem, kappas, steps))
        }
    }
}

struct Base {
    problem: BiObjectiveProblem,
    kappas: [f64; 2],
    steps: Option<u32>,
}

/// The unimodal instance for `(seed, attempt)`, shared by a unimodal class and its
/// perturbed counterpart.
fn sample_base(config: &GeneratorConfig, d: usize, seed: u64, attempt: u32) -> Result<Base> {
    let mut rng = stream(seed, attempt, Entity::Optima);
    let (x1, x2) = if config.axis_aligned_optima {
        sample_axis_aligned_pair(d, &mut rng)?
    } else {
        sample_optima_pair(d, &mut rng)?
    };
    let independent = config.hessian_mode == HessianMode::IndependentRotated;
    let mut rng = stream(seed, attempt, Entity::Kappa);
    let k1 = config.kappa_dist.sample(&mut rng);
    let k2 = if independent {
        config.kappa_dist.sample(&mut rng)
    } else {
        k1
    };
    let h1 = sample_hessian(
        d,
        k1,
        config.hessian_mode,
        &mut stream(seed, attempt, Entity::hessian(0)),
    )?;
    let h2 = if independent {
        sample_hessian(
            d,
            k2,
            config.hessian_mode,
            &mut stream(seed, attempt, Entity::hessian(1)),
        )?
    } else {
        h1.clone()
    };
    let comps = [
        vec![QuadraticForm::new(h1, x1.clone(), 0.0)?],
        vec![QuadraticForm::new(h2, x2.clone(), 0.0)?],
    ];
    let (problem, steps) = assemble(config, seed, attempt, comps, [x1, x2])?;
    if independent && !verify_pareto_in_bounds(&problem, BOUNDS_CHECK_SAMPLES) {
        return Err(Error::Generation("Pareto set leaves the search box".into()));
    }
    Ok(Base {
        problem,
        kappas: [k1, k2],
        steps,
    })
}

/// Draws the transform parameters and builds the problem; with a steps
/// distribution, each objective's step splits its ideal–nadir range into `N_h`
/// levels.
fn assemble(
    config: &GeneratorConfig,
    seed: u64,
    attempt: u32,
    [c1, c2]: [Vec<QuadraticForm>; 2],
    optima: [DVector<f64>; 2],
) -> Result<(BiObjectiveProblem, Option<u32>)> {
    let d = optima[0].len();
    let p = config
        .p_dist
        .sample(&mut stream(seed, attempt, Entity::Exponent));
    let mut rng = stream(seed, attempt, Entity::Scale);
    let mut transform = || {
        let s = log_uniform(&mut rng, 1.0, SCALE_MAX);
        let offset = uniform(&mut rng, -s, s);
        PeakTransform::new(s, p, offset, 0.0)
    };
    let (t1, t2) = (transform()?, transform()?);
    let (lo, hi) = BiObjectiveProblem::default_bounds(d);
    let f1 = PeakObjective::new(c1, t1)?;
    let f2 = PeakObjective::new(c2, t2)?;
    let problem = BiObjectiveProblem::new(f1, f2, optima, lo, hi)?;
    let Some(dist) = &config.steps_dist else {
        return Ok((problem, None));
    };
    let n = dist.sample(&mut stream(seed, attempt, Entity::Steps));
    Ok((with_steps(&problem, n)?, Some(n)))
}

/// `problem` with each objective rounded to steps of `(nadir − ideal) / n`.
fn with_steps(problem: &BiObjectiveProblem, n: u32) -> Result<BiObjectiveProblem> {
    let (ideal, nadir) = (problem.ideal(), problem.nadir());
    let t1 = PeakTransform {
        step: (nadir.y1 - ideal.y1) / n as f64,
        ..*problem.f1().transform()
    };
    let t2 = PeakTransform {
        step: (nadir.y2 - ideal.y2) / n as f64,
        ..*problem.f2().transform()
    };
    BiObjectiveProblem::new(
        problem.f1().with_transform(t1)?,
        problem.f2().with_transform(t2)?,
        problem.global_optima().clone(),
        problem.lower().to_vec(),
        problem.upper().to_vec(),
    )
}

/// Whether the Pareto set of every pair of components, sampled at
/// `samples_per_pair` evenly spaced weights, stays inside the problem's box.
pub fn verify_pareto_in_bounds(problem: &BiObjectiveProblem, samples_per_pair: usize) -> bool {
    let n = samples_per_pair.max(2);
    for a in problem.f1().components() {
        for b in problem.f2().components() {
            for k in 0..n {
                let t = k as f64 / (n - 1) as f64;
                match interpolate_optimum(a, b, t) {
                    Ok(x) if problem.in_bounds(x.as_slice()) => {}
                    _ => return false,
                }
            }
        }
    }
    true
}

/// A random Hessian as sampled for class `config` (used to audit condition numbers).
pub fn sample_class_hessian<R: Rng + ?Sized>(
    config: &GeneratorConfig,
    d: usize,
    rng: &mut R,
) -> Result<(f64, DMatrix<f64>)> {
    let kappa = config.kappa_dist.sample(rng);
    Ok((kappa, sample_hessian(d, kappa, config.hessian_mode, rng)?))
}
