//! Reference optimizers: uniform random search and a small NSGA-II.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::archive::ObjectiveVector;
use crate::error::{Error, Result};
use crate::harness::{CountingEvaluator, EvalError, Solver};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    RandomSearch,
    Nsga2Lite,
}

impl SolverKind {
    pub fn name(&self) -> &'static str {
        match self {
            SolverKind::RandomSearch => "random_search",
            SolverKind::Nsga2Lite => "nsga2_lite",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().replace('-', "_").as_str() {
            "random_search" | "random" | "rs" => Some(SolverKind::RandomSearch),
            "nsga2_lite" | "nsga2" => Some(SolverKind::Nsga2Lite),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub kind: SolverKind,
    pub population_size: usize,
    /// Distribution index of simulated binary crossover.
    pub crossover_eta: f64,
    pub crossover_probability: f64,
    /// Distribution index of polynomial mutation; the per-variable rate is `1/d`.
    pub mutation_eta: f64,
}

impl SolverConfig {
    pub fn new(kind: SolverKind) -> Self {
        Self {
            kind,
            population_size: 100,
            crossover_eta: 15.0,
            crossover_probability: 0.9,
            mutation_eta: 20.0,
        }
    }

    pub fn random_search() -> Self {
        Self::new(SolverKind::RandomSearch)
    }

    pub fn nsga2_lite() -> Self {
        Self::new(SolverKind::Nsga2Lite)
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == SolverKind::Nsga2Lite && self.population_size < 2 {
            return Err(Error::Argument("population_size must be at least 2".into()));
        }
        if !(self.crossover_eta >= 0.0 && self.mutation_eta >= 0.0) {
            return Err(Error::Argument(
                "distribution indices must be non-negative".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.crossover_probability) {
            return Err(Error::Argument(
                "crossover_probability outside [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

impl Solver for SolverConfig {
    fn id(&self) -> String {
        self.kind.name().to_string()
    }

    fn solve(&self, evaluator: &mut CountingEvaluator<'_>, seed: u64) -> Result<(), EvalError> {
        self.validate()
            .map_err(|e| EvalError::Failed(e.to_string()))?;
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        match self.kind {
            SolverKind::RandomSearch => random_search(evaluator, &mut rng),
            SolverKind::Nsga2Lite => nsga2_lite(evaluator, self, &mut rng),
        }
    }
}

fn uniform_point<R: Rng + ?Sized>(lower: &[f64], upper: &[f64], rng: &mut R) -> Vec<f64> {
    lower
        .iter()
        .zip(upper)
        .map(|(&l, &u)| rng.random_range(l..=u))
        .collect()
}

/// Samples the box uniformly until the evaluator refuses.
pub fn random_search<R: Rng + ?Sized>(
    ev: &mut CountingEvaluator<'_>,
    rng: &mut R,
) -> Result<(), EvalError> {
    let (lower, upper) = (ev.lower().to_vec(), ev.upper().to_vec());
    loop {
        let x = uniform_point(&lower, &upper, rng);
        ev.evaluate(&x)?;
    }
}

/// Nondominated fronts, best first, as indices into `points`.
pub fn fast_nondominated_sort(points: &[ObjectiveVector]) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut dominated_by: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut count = vec![0usize; n];
    let dominates = |a: &ObjectiveVector, b: &ObjectiveVector| a.covers(b) && a != b;
    for i in 0..n {
        for j in i + 1..n {
            if dominates(&points[i], &points[j]) {
                dominated_by[i].push(j);
                count[j] += 1;
            } else if dominates(&points[j], &points[i]) {
                dominated_by[j].push(i);
                count[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| count[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominated_by[i] {
                count[j] -= 1;
                if count[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    fronts
}

/// Crowding distance of each member of `front` (same order). Extremes get `+∞`.
pub fn crowding_distance(points: &[ObjectiveVector], front: &[usize]) -> Vec<f64> {
    let m = front.len();
    let mut dist = vec![0.0; m];
    if m <= 2 {
        return vec![f64::INFINITY; m];
    }
    for obj in [|p: &ObjectiveVector| p.y1, |p: &ObjectiveVector| p.y2] {
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| obj(&points[front[a]]).total_cmp(&obj(&points[front[b]])));
        let lo = obj(&points[front[order[0]]]);
        let hi = obj(&points[front[order[m - 1]]]);
        dist[order[0]] = f64::INFINITY;
        dist[order[m - 1]] = f64::INFINITY;
        let range = hi - lo;
        if range <= 0.0 {
            continue;
        }
        for k in 1..m - 1 {
            let gap = obj(&points[front[order[k + 1]]]) - obj(&points[front[order[k - 1]]]);
            dist[order[k]] += gap / range;
        }
    }
    dist
}

#[derive(Debug, Clone)]
struct Individual {
    x: Vec<f64>,
    y: ObjectiveVector,
    rank: usize,
    crowding: f64,
}

/// Assigns rank and crowding and keeps the best `size` members.
fn survive(mut pop: Vec<Individual>, size: usize) -> Vec<Individual> {
    let ys: Vec<ObjectiveVector> = pop.iter().map(|i| i.y).collect();
    let mut keep = Vec::with_capacity(size);
    for (rank, front) in fast_nondominated_sort(&ys).into_iter().enumerate() {
        let cd = crowding_distance(&ys, &front);
        let mut members: Vec<(usize, f64)> = front.into_iter().zip(cd).collect();
        if keep.len() + members.len() > size {
            members.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            members.truncate(size - keep.len());
        }
        for (i, c) in members {
            pop[i].rank = rank;
            pop[i].crowding = c;
            keep.push(i);
        }
        if keep.len() == size {
            break;
        }
    }
    keep.sort_unstable();
    keep.into_iter().map(|i| pop[i].clone()).collect()
}

fn tournament<'p, R: Rng + ?Sized>(pop: &'p [Individual], rng: &mut R) -> &'p Individual {
    let a = &pop[rng.random_range(0..pop.len())];
    let b = &pop[rng.random_range(0..pop.len())];
    if a.rank != b.rank {
        return if a.rank < b.rank { a } else { b };
    }
    if a.crowding != b.crowding {
        return if a.crowding > b.crowding { a } else { b };
    }
    if rng.random::<bool>() {
        a
    } else {
        b
    }
}

fn sbx_spread(u: f64, beta: f64, eta: f64) -> f64 {
    let alpha = 2.0 - beta.powf(-(eta + 1.0));
    if u <= 1.0 / alpha {
        (u * alpha).powf(1.0 / (eta + 1.0))
    } else {
        (1.0 / (2.0 - u * alpha)).powf(1.0 / (eta + 1.0))
    }
}

/// Bounded simulated binary crossover, each variable with probability ½.
fn sbx<R: Rng + ?Sized>(
    p1: &[f64],
    p2: &[f64],
    lower: &[f64],
    upper: &[f64],
    eta: f64,
    rng: &mut R,
) -> (Vec<f64>, Vec<f64>) {
    let mut c1 = p1.to_vec();
    let mut c2 = p2.to_vec();
    for i in 0..p1.len() {
        if !rng.random_bool(0.5) || (p1[i] - p2[i]).abs() <= 1e-14 {
            continue;
        }
        let (y1, y2) = (p1[i].min(p2[i]), p1[i].max(p2[i]));
        let (lb, ub) = (lower[i], upper[i]);
        let u: f64 = rng.random();
        let bq = sbx_spread(u, 1.0 + 2.0 * (y1 - lb) / (y2 - y1), eta);
        let a = (0.5 * ((y1 + y2) - bq * (y2 - y1))).clamp(lb, ub);
        let bq = sbx_spread(u, 1.0 + 2.0 * (ub - y2) / (y2 - y1), eta);
        let b = (0.5 * ((y1 + y2) + bq * (y2 - y1))).clamp(lb, ub);
        if rng.random_bool(0.5) {
            c1[i] = b;
            c2[i] = a;
        } else {
            c1[i] = a;
            c2[i] = b;
        }
    }
    (c1, c2)
}

/// Polynomial mutation with per-variable rate `1/d`.
fn polynomial_mutation<R: Rng + ?Sized>(
    x: &mut [f64],
    lower: &[f64],
    upper: &[f64],
    eta: f64,
    rng: &mut R,
) {
    let rate = 1.0 / x.len() as f64;
    let power = 1.0 / (eta + 1.0);
    for i in 0..x.len() {
        if !rng.random_bool(rate) {
            continue;
        }
        let (lb, ub) = (lower[i], upper[i]);
        let width = ub - lb;
        if width <= 0.0 {
            continue;
        }
        let d1 = (x[i] - lb) / width;
        let d2 = (ub - x[i]) / width;
        let u: f64 = rng.random();
        let dq = if u < 0.5 {
            let v = 2.0 * u + (1.0 - 2.0 * u) * (1.0 - d1).powf(eta + 1.0);
            v.powf(power) - 1.0
        } else {
            let v = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * (1.0 - d2).powf(eta + 1.0);
            1.0 - v.powf(power)
        };
        x[i] = (x[i] + dq * width).clamp(lb, ub);
    }
}

/// Generational NSGA-II: binary tournament on (rank, crowding), SBX, polynomial
/// mutation, clipping to the box, elitist truncation. Runs until the evaluator
/// refuses.
pub fn nsga2_lite<R: Rng + ?Sized>(
    ev: &mut CountingEvaluator<'_>,
    config: &SolverConfig,
    rng: &mut R,
) -> Result<(), EvalError> {
    let (lower, upper) = (ev.lower().to_vec(), ev.upper().to_vec());
    let n = config.population_size;
    let mut pop = Vec::with_capacity(n);
    for _ in 0..n {
        let x = uniform_point(&lower, &upper, rng);
        let y = ev.evaluate(&x)?;
        pop.push(Individual {
            x,
            y,
            rank: 0,
            crowding: 0.0,
        });
    }
    pop = survive(pop, n);
    loop {
        let mut offspring = Vec::with_capacity(n);
        while offspring.len() < n {
            let p1 = tournament(&pop, rng).x.clone();
            let p2 = tournament(&pop, rng).x.clone();
            let (mut c1, mut c2) = if rng.random_bool(config.crossover_probability) {
                sbx(&p1, &p2, &lower, &upper, config.crossover_eta, rng)
            } else {
                (p1, p2)
            };
            polynomial_mutation(&mut c1, &lower, &upper, config.mutation_eta, rng);
            polynomial_mutation(&mut c2, &lower, &upper, config.mutation_eta, rng);
            for x in [c1, c2] {
                if offspring.len() < n {
                    let y = ev.evaluate(&x)?;
                    offspring.push(Individual {
                        x,
                        y,
                        rank: 0,
                        crowding: 0.0,
                    });
                }
            }
        }
        pop.extend(offspring);
        pop = survive(pop, n);
        debug_assert_eq!(pop.len(), n);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::{generate, ClassId};
    use crate::harness::{make_targets, run, TargetSet};
    use crate::indicators::IndicatorKind;

    fn ov(a: f64, b: f64) -> ObjectiveVector {
        ObjectiveVector::new(a, b)
    }

    #[test]
    fn crowding_textbook_example() {
        let pts = [ov(0.0, 3.0), ov(1.0, 2.0), ov(2.0, 1.0), ov(3.0, 0.0)];
        let cd = crowding_distance(&pts, &[0, 1, 2, 3]);
        assert!(cd[0].is_infinite() && cd[3].is_infinite());
        assert!((cd[1] - 4.0 / 3.0).abs() < 1e-15);
        assert!((cd[2] - 4.0 / 3.0).abs() < 1e-15);
        assert!(crowding_distance(&pts, &[1, 2])
            .iter()
            .all(|d| d.is_infinite()));
    }

    #[test]
    fn sort_examples() {
        let pts = [
            ov(1.0, 1.0),
            ov(0.0, 2.0),
            ov(2.0, 2.0),
            ov(3.0, 3.0),
            ov(1.0, 1.0),
        ];
        assert_eq!(
            fast_nondominated_sort(&pts),
            vec![vec![0, 1, 4], vec![2], vec![3]]
        );
    }

    #[test]
    fn population_operators_stay_in_bounds() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let (lo, hi) = (vec![-5.0; 3], vec![5.0; 3]);
        for _ in 0..2000 {
            let a = uniform_point(&lo, &hi, &mut rng);
            let b = uniform_point(&lo, &hi, &mut rng);
            let (mut c1, c2) = sbx(&a, &b, &lo, &hi, 15.0, &mut rng);
            polynomial_mutation(&mut c1, &lo, &hi, 20.0, &mut rng);
            for v in c1.iter().chain(&c2) {
                assert!((-5.0..=5.0).contains(v));
            }
        }
    }

    fn targets() -> Vec<TargetSet> {
        vec![make_targets(0.09, IndicatorKind::exact_r2())]
    }

    #[test]
    fn random_search_uses_exact_budget() {
        let inst = generate(&ClassId::Bono(1), 2, 0).unwrap();
        let rs = SolverConfig::random_search();
        let a = run(&rs, &inst, &targets(), 100, 7).unwrap();
        assert_eq!(a[0].budget_used, 100);
        assert_eq!(a, run(&rs, &inst, &targets(), 100, 7).unwrap());
        let mut ev = CountingEvaluator::new(inst.problem(), &[], 500).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        assert_eq!(
            random_search(&mut ev, &mut rng),
            Err(EvalError::BudgetExhausted)
        );
        assert_eq!(ev.used(), 500);
    }

    #[test]
    fn nsga2_keeps_population_size_and_bounds() {
        let inst = generate(&ClassId::Bono(3), 2, 0).unwrap();
        let config = SolverConfig {
            population_size: 10,
            ..SolverConfig::nsga2_lite()
        };
        let mut ev = CountingEvaluator::new(inst.problem(), &[], 1234).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        assert_eq!(
            nsga2_lite(&mut ev, &config, &mut rng),
            Err(EvalError::BudgetExhausted)
        );
        assert_eq!(ev.used(), 1234);
        let pts: Vec<ObjectiveVector> = (0..30)
            .map(|i| ov(i as f64 % 7.0, (i * 3) as f64 % 5.0))
            .collect();
        let pop: Vec<Individual> = pts
            .iter()
            .map(|&y| Individual {
                x: vec![0.0],
                y,
                rank: 0,
                crowding: 0.0,
            })
            .collect();
        assert_eq!(survive(pop, 10).len(), 10);
        let bad = SolverConfig {
            population_size: 1,
            ..SolverConfig::nsga2_lite()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn nsga2_beats_random_search_on_bono1() {
        let mut wins = 0;
        for seed in 0..15 {
            let inst = generate(&ClassId::Bono(1), 2, seed).unwrap();
            let front = crate::frontapprox::approximate_front(
                &inst,
                IndicatorKind::exact_r2(),
                &crate::frontapprox::ApproxOptions::for_kind(&IndicatorKind::exact_r2()),
            )
            .unwrap();
            let sets = [TargetSet::from_front(&front)];
            let budget = 20_000;
            let rs = run(&SolverConfig::random_search(), &inst, &sets, budget, seed).unwrap();
            let ns = run(&SolverConfig::nsga2_lite(), &inst, &sets, budget, seed).unwrap();
            if ns[0].final_regret < rs[0].final_regret {
                wins += 1;
            }
        }
        assert!(wins >= 12, "nsga2 won {wins} of 15");
    }
}
