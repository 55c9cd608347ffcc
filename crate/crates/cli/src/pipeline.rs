//! Generate, approximate, derive targets, run and profile a whole grid of
//! instances, tied together by a manifest.
//!
//! Layout under `--out`:
//!
//! ```text
//! manifest.json
//! instances/<class>_d<d>_s<seed>.json
//! fronts/<class>_d<d>_s<seed>.<hv|r2>.json
//! targets/<class>_d<d>_s<seed>.<hv|r2>.json
//! runs/<class>_d<d>_s<seed>.<algorithm>.csv
//! profile.csv, profile.svg
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use bono::generator::{generate, ClassId, ProblemInstance};
use bono::harness::{self, write_run_csv, RunRecord, TargetSet, DEFAULT_BUDGET_PER_DIM};
use bono::indicators::IndicatorKind;
use bono::profiles::{Grouping, SvgStyle};
use clap::Args;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{
    approximate, builtin_solver, instance_file_name, parse_classes, parse_indicator, parse_list,
    seeds, write_profiles, write_text, CliResult, Failure, Outcome,
};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Args)]
pub struct PipelineArgs {
    #[arg(long)]
    class: String,
    #[arg(long, default_value = "2")]
    dim: String,
    #[arg(long, default_value = "0")]
    seed: String,
    /// Built-in algorithms, comma-separated.
    #[arg(long, default_value = "random_search,nsga2_lite")]
    algorithms: String,
    /// Indicators to approximate and track.
    #[arg(long, default_value = "hv,r2")]
    indicators: String,
    #[arg(long, default_value_t = DEFAULT_BUDGET_PER_DIM)]
    budget_mult: u64,
    #[arg(long, default_value_t = bono::frontapprox::DEFAULT_MAX_ITERATIONS)]
    max_iter: u64,
    /// Worker threads; each (instance, algorithm) cell runs on one thread.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Split profile groups by class and/or dim.
    #[arg(long, default_value = "none")]
    group_by: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub class: ClassId,
    pub dimension: usize,
    pub seed: u64,
    pub instance: PathBuf,
    /// Indicator name to front file.
    pub fronts: BTreeMap<String, PathBuf>,
    pub targets: BTreeMap<String, PathBuf>,
    pub runs: Vec<PathBuf>,
    /// Indicators whose approximation stopped before reaching δ.
    pub early_stopped: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    /// Seconds since the Unix epoch; absent with --deterministic.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub created_unix: Option<u64>,
    pub algorithms: Vec<String>,
    pub budget_mult: u64,
    pub entries: Vec<ManifestEntry>,
    pub profile_csv: PathBuf,
    pub profile_svg: PathBuf,
}

struct Prepared {
    instance: ProblemInstance,
    entry: ManifestEntry,
    targets: Vec<TargetSet>,
    warned: bool,
}

fn prepare(
    out: &Path,
    class: &ClassId,
    d: usize,
    seed: u64,
    kinds: &[IndicatorKind],
    max_iter: u64,
) -> CliResult<Prepared> {
    let stem = instance_file_name(class, d, seed);
    let instance = generate(class, d, seed)?;
    let rel_instance = PathBuf::from("instances").join(format!("{stem}.json"));
    write_text(&out.join(&rel_instance), &instance.to_json())?;
    let mut entry = ManifestEntry {
        class: class.clone(),
        dimension: d,
        seed,
        instance: rel_instance,
        fronts: BTreeMap::new(),
        targets: BTreeMap::new(),
        runs: Vec::new(),
        early_stopped: Vec::new(),
    };
    let mut targets = Vec::new();
    let mut warned = false;
    for &kind in kinds {
        let front = approximate(&instance, kind, None, max_iter, None)?;
        let name = kind.name().to_string();
        let rel_front = PathBuf::from("fronts").join(format!("{stem}.{name}.json"));
        write_text(&out.join(&rel_front), &front.to_json())?;
        let set = TargetSet::from_front(&front);
        let rel_targets = PathBuf::from("targets").join(format!("{stem}.{name}.json"));
        write_text(&out.join(&rel_targets), &set.to_json())?;
        if front.early_stopped {
            entry.early_stopped.push(name.clone());
        }
        warned |= front.early_stopped || set.precision_warning().is_some();
        entry.fronts.insert(name.clone(), rel_front);
        entry.targets.insert(name, rel_targets);
        targets.push(set);
    }
    Ok(Prepared {
        instance,
        entry,
        targets,
        warned,
    })
}

pub fn run(a: &PipelineArgs, deterministic: bool) -> CliResult<Outcome> {
    let classes = parse_classes(&a.class)?;
    let dims: Vec<usize> = parse_list(&a.dim)?;
    let seeds = seeds(&a.seed)?;
    let kinds = a
        .indicators
        .split(',')
        .map(|n| parse_indicator(n.trim()))
        .collect::<CliResult<Vec<_>>>()?;
    let algorithms = a
        .algorithms
        .split(',')
        .map(|n| builtin_solver(n.trim(), 100))
        .collect::<CliResult<Vec<_>>>()?;
    let mut grouping: Grouping = a.group_by.parse()?;
    grouping.per_dimension = true;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.jobs.max(1))
        .build()
        .map_err(|e| Failure(format!("cannot start {} workers: {e}", a.jobs)))?;

    let mut cells: Vec<(ClassId, usize, u64)> = Vec::new();
    for c in &classes {
        for &d in &dims {
            for &s in &seeds {
                cells.push((c.clone(), d, s));
            }
        }
    }
    let out = a.out.as_path();
    let mut prepared = pool.install(|| {
        cells
            .par_iter()
            .map(|(c, d, s)| prepare(out, c, *d, *s, &kinds, a.max_iter))
            .collect::<CliResult<Vec<_>>>()
    })?;

    let jobs: Vec<(usize, usize)> = (0..prepared.len())
        .flat_map(|i| (0..algorithms.len()).map(move |k| (i, k)))
        .collect();
    let results = pool.install(|| {
        jobs.par_iter()
            .map(|&(i, k)| {
                let p = &prepared[i];
                let budget = a.budget_mult.saturating_mul(p.instance.dimension() as u64);
                harness::run(
                    &algorithms[k],
                    &p.instance,
                    &p.targets,
                    budget,
                    p.instance.seed(),
                )
                .map_err(Failure::from)
            })
            .collect::<CliResult<Vec<Vec<RunRecord>>>>()
    })?;

    let mut all_records = Vec::new();
    let mut failed = false;
    for (&(i, k), records) in jobs.iter().zip(results) {
        let p = &mut prepared[i];
        let stem = instance_file_name(&p.entry.class, p.entry.dimension, p.entry.seed);
        let rel = PathBuf::from("runs").join(format!("{stem}.{}.csv", algorithms[k].kind.name()));
        let mut buf = Vec::new();
        write_run_csv(&records, &mut buf)?;
        write_text(
            &out.join(&rel),
            &String::from_utf8(buf).expect("CSV is UTF-8"),
        )?;
        p.entry.runs.push(rel);
        failed |= records.iter().any(|r| r.failure.is_some());
        all_records.extend(records);
    }

    let csv = PathBuf::from("profile.csv");
    let svg = PathBuf::from("profile.svg");
    let profile_outcome = write_profiles(
        &all_records,
        &grouping,
        true,
        Some(&out.join(&csv)),
        Some(&out.join(&svg)),
        &SvgStyle::default(),
    )?;

    let warned = prepared.iter().any(|p| p.warned) || failed;
    let manifest = Manifest {
        schema_version: MANIFEST_VERSION,
        created_unix: (!deterministic).then(|| {
            SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs())
        }),
        algorithms: algorithms
            .iter()
            .map(|s| s.kind.name().to_string())
            .collect(),
        budget_mult: a.budget_mult,
        entries: prepared.into_iter().map(|p| p.entry).collect(),
        profile_csv: csv,
        profile_svg: svg,
    };
    write_text(
        &out.join("manifest.json"),
        &serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    )?;
    eprintln!(
        "pipeline: {} instance(s), {} run file(s)",
        cells.len(),
        jobs.len()
    );
    Ok(if warned {
        Outcome::Warnings
    } else {
        profile_outcome
    })
}
