//! Instance files: JSON with row-major matrices and shortest round-trip reals.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::sampling::PRNG_DESCRIPTION;
use super::{GeneratorConfig, ProblemInstance};
use crate::error::{Error, Result};
use crate::peaks::{BiObjectiveProblem, PeakObjective, PeakTransform};
use crate::quadratic::QuadraticForm;

pub const SCHEMA_VERSION: u32 = 1;

/// Relative slack when checking a stored ideal/nadir against the recomputed one.
const POINT_TOLERANCE: f64 = 1e-9;

fn parse(field: &str, message: impl Into<String>) -> Error {
    Error::parse(field, message)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceDocument {
    schema_version: u32,
    prng: String,
    config: GeneratorConfig,
    dimension: usize,
    seed: u64,
    attempt: u32,
    lower: Vec<f64>,
    upper: Vec<f64>,
    objectives: [ObjectiveDocument; 2],
    global_optima: [Vec<f64>; 2],
    ideal: [f64; 2],
    nadir: [f64; 2],
    kappas: [Vec<f64>; 2],
    steps: Option<u32>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObjectiveDocument {
    scale: f64,
    exponent: f64,
    offset: f64,
    step: f64,
    components: Vec<ComponentDocument>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ComponentDocument {
    hessian: Vec<Vec<f64>>,
    optimum: Vec<f64>,
    value: f64,
}

pub(super) fn serialize(inst: &ProblemInstance, pretty: bool) -> String {
    let p = inst.problem();
    let objective = |f: &PeakObjective| {
        let t = f.transform();
        ObjectiveDocument {
            scale: t.scale,
            exponent: t.exponent,
            offset: t.offset,
            step: t.step,
            components: f
                .components()
                .iter()
                .map(|c| ComponentDocument {
                    hessian: c
                        .hessian()
                        .row_iter()
                        .map(|r| r.iter().copied().collect())
                        .collect(),
                    optimum: c.optimum().as_slice().to_vec(),
                    value: c.optimum_value(),
                })
                .collect(),
        }
    };
    let [x1, x2] = p.global_optima();
    let doc = InstanceDocument {
        schema_version: SCHEMA_VERSION,
        prng: PRNG_DESCRIPTION.to_string(),
        config: inst.config.clone(),
        dimension: p.dimension(),
        seed: inst.seed,
        attempt: inst.attempt,
        lower: p.lower().to_vec(),
        upper: p.upper().to_vec(),
        objectives: [objective(p.f1()), objective(p.f2())],
        global_optima: [x1.as_slice().to_vec(), x2.as_slice().to_vec()],
        ideal: [p.ideal().y1, p.ideal().y2],
        nadir: [p.nadir().y1, p.nadir().y2],
        kappas: inst.kappas.clone(),
        steps: inst.steps,
    };
    let out = if pretty {
        serde_json::to_string_pretty(&doc)
    } else {
        serde_json::to_string(&doc)
    };
    out.expect("instance documents contain only finite numbers")
}

pub(super) fn deserialize(text: &str) -> Result<ProblemInstance> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| parse("document", e.to_string()))?;
    match value.get("schema_version").map(|v| v.as_u64()) {
        None => return Err(parse("schema_version", "missing")),
        Some(Some(v)) if v == SCHEMA_VERSION as u64 => {}
        Some(v) => {
            return Err(parse(
                "schema_version",
                format!("unsupported version {v:?}; this build reads version {SCHEMA_VERSION}"),
            ))
        }
    }
    let doc: InstanceDocument = serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        parse(&path, e.into_inner().to_string())
    })?;
    build(doc)
}

fn build(doc: InstanceDocument) -> Result<ProblemInstance> {
    doc.config
        .validate()
        .map_err(|e| parse("config", e.to_string()))?;
    let d = doc.dimension;
    if d < 2 {
        return Err(parse("dimension", "must be at least 2"));
    }
    let vector = |field: &str, v: &[f64]| -> Result<DVector<f64>> {
        if v.len() != d {
            return Err(parse(
                field,
                format!("expected {d} entries, found {}", v.len()),
            ));
        }
        Ok(DVector::from_column_slice(v))
    };
    let mut objectives = Vec::with_capacity(2);
    for (i, o) in doc.objectives.into_iter().enumerate() {
        let at = |rest: &str| format!("objectives[{i}]{rest}");
        if o.components.len() != doc.config.peak_count {
            return Err(parse(
                &at(".components"),
                format!(
                    "expected {} components, found {}",
                    doc.config.peak_count,
                    o.components.len()
                ),
            ));
        }
        let mut comps = Vec::with_capacity(o.components.len());
        for (j, c) in o.components.into_iter().enumerate() {
            let field = at(&format!(".components[{j}].hessian"));
            if c.hessian.len() != d || c.hessian.iter().any(|r| r.len() != d) {
                return Err(parse(&field, format!("expected a {d}x{d} matrix")));
            }
            let h = DMatrix::from_fn(d, d, |r, col| c.hessian[r][col]);
            let x = vector(&at(&format!(".components[{j}].optimum")), &c.optimum)?;
            let q = QuadraticForm::new(h, x, c.value).map_err(|e| match e {
                Error::Domain(m) | Error::Argument(m) => parse(&field, m),
                other => other,
            })?;
            comps.push(q);
        }
        let t = PeakTransform::new(o.scale, o.exponent, o.offset, o.step)
            .map_err(|e| parse(&at(""), e.to_string()))?;
        objectives.push(PeakObjective::new(comps, t).map_err(|e| parse(&at(""), e.to_string()))?);
    }
    let f2 = objectives.pop().expect("two objectives");
    let f1 = objectives.pop().expect("two objectives");
    let [g1, g2] = &doc.global_optima;
    let optima = [
        vector("global_optima[0]", g1)?,
        vector("global_optima[1]", g2)?,
    ];
    vector("lower", &doc.lower)?;
    vector("upper", &doc.upper)?;
    let problem = BiObjectiveProblem::new(f1, f2, optima, doc.lower, doc.upper)
        .map_err(|e| parse("objectives", e.to_string()))?;
    for (field, stored, actual) in [
        ("ideal", doc.ideal, problem.ideal()),
        ("nadir", doc.nadir, problem.nadir()),
    ] {
        for (s, a) in stored.iter().zip([actual.y1, actual.y2]) {
            if (s - a).abs() > POINT_TOLERANCE * s.abs().max(a.abs()).max(1.0) {
                return Err(parse(
                    field,
                    format!("stored {s} but the objectives give {a}"),
                ));
            }
        }
    }
    let expected_kappas = match doc.config.structure {
        super::Structure::Random => doc.config.peak_count,
        _ => 1,
    };
    if doc.kappas.iter().any(|k| k.len() != expected_kappas) {
        return Err(parse(
            "kappas",
            format!("expected {expected_kappas} entries per objective"),
        ));
    }
    if doc.steps.is_some() != doc.config.steps_dist.is_some() {
        return Err(parse("steps", "must be present exactly when steps_dist is"));
    }
    Ok(ProblemInstance {
        config: doc.config,
        seed: doc.seed,
        attempt: doc.attempt,
        problem,
        kappas: doc.kappas,
        steps: doc.steps,
    })
}
