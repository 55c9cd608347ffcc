use bono::archive::{NondominatedArchive2D, ObjectiveVector};
use bono::generator::{generate, ClassId};
use bono::indicators::{exact_r2_of, hypervolume_of, segment_epsilon, IndicatorKind};
use bono::peaks::{discretize, PeakObjective, PeakTransform};
use bono::quadratic::{add, condition_number, interpolate, interpolate_optimum, QuadraticForm};
use bono::solvers::fast_nondominated_sort;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use proptest::test_runner::{TestCaseError, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const CASES: u32 = 1000;

pub type Outcome = Result<(), String>;

fn check<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Outcome {
    let config = ProptestConfig {
        cases,
        failure_persistence: None,
        ..ProptestConfig::default()
    };
    TestRunner::new(config)
        .run(&strategy, test)
        .map_err(|e| e.to_string())
}

// ---- oracles ----

pub fn weakly_dominates(a: &ObjectiveVector, b: &ObjectiveVector) -> bool {
    a.y1 <= b.y1 && a.y2 <= b.y2
}

fn strictly_better(a: &ObjectiveVector, b: &ObjectiveVector) -> bool {
    weakly_dominates(a, b) && a != b
}

/// Pairwise nondominated filter of a multiset, duplicates kept once.
fn filter_oracle(points: &[ObjectiveVector]) -> Vec<ObjectiveVector> {
    let mut out: Vec<ObjectiveVector> = Vec::new();
    for (i, p) in points.iter().enumerate() {
        let beaten = points.iter().any(|q| strictly_better(q, p));
        let seen = points[..i].iter().any(|q| q == p);
        if !beaten && !seen {
            out.push(*p);
        }
    }
    out.sort_by(|a, b| a.y1.total_cmp(&b.y1));
    out
}

fn nondominated_flags(points: &[ObjectiveVector]) -> Vec<bool> {
    points
        .iter()
        .map(|p| !points.iter().any(|q| strictly_better(q, p)))
        .collect()
}

/// Dominated area inside `[−∞, r]` by coordinate compression over all breakpoints.
pub fn hv_oracle(points: &[ObjectiveVector], r: ObjectiveVector) -> f64 {
    let pts: Vec<_> = points
        .iter()
        .filter(|p| p.y1 < r.y1 && p.y2 < r.y2)
        .collect();
    let mut xs: Vec<f64> = pts.iter().map(|p| p.y1).chain([r.y1]).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let mut area = 0.0;
    for w in xs.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let low = pts
            .iter()
            .filter(|p| p.y1 <= mid)
            .map(|p| p.y2)
            .fold(r.y2, f64::min);
        area += (w[1] - w[0]) * (r.y2 - low);
    }
    area
}

pub fn r2_integrand(points: &[ObjectiveVector], w: f64) -> f64 {
    points
        .iter()
        .map(|a| (w * a.y1).max((1.0 - w) * a.y2))
        .fold(f64::INFINITY, f64::min)
}

pub fn simpson(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
        return left + right + (left + right - whole) / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// R2 with ideal (0, 0) by adaptive Simpson quadrature of the definition.
pub fn r2_oracle(points: &[ObjectiveVector]) -> f64 {
    let f = |w: f64| r2_integrand(points, w);
    // split on a fixed grid first so no kink hides from the error estimate
    let n = 64;
    (0..n)
        .map(|k| {
            let (a, b) = (k as f64 / n as f64, (k + 1) as f64 / n as f64);
            let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
            let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
            simpson(&f, a, b, fa, fm, fb, whole, 1e-14, 40)
        })
        .sum()
}

// ---- strategies ----

fn vec2(lo: f64, hi: f64) -> impl Strategy<Value = ObjectiveVector> {
    (lo..hi, lo..hi).prop_map(|(a, b)| ObjectiveVector::new(a, b))
}

/// Points on a coarse integer grid so ties and duplicates are common.
fn grid_points(max_len: usize) -> impl Strategy<Value = Vec<ObjectiveVector>> {
    prop::collection::vec((0..20i32, 0..20i32), 0..=max_len).prop_map(|v| {
        v.into_iter()
            .map(|(a, b)| ObjectiveVector::new(a as f64, b as f64))
            .collect()
    })
}

/// `AᵀA + cI` with entries of `A` in [−1, 1].
fn spd(d: usize) -> impl Strategy<Value = DMatrix<f64>> {
    (prop::collection::vec(-1.0..1.0f64, d * d), 0.05..2.0f64).prop_map(move |(a, c)| {
        let a = DMatrix::from_vec(d, d, a);
        a.transpose() * &a + DMatrix::identity(d, d) * c
    })
}

fn point(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-4.0..4.0f64, d)
}

fn quadratic(d: usize) -> impl Strategy<Value = QuadraticForm> {
    (spd(d), point(d), 0.0..3.0f64)
        .prop_map(|(h, x, y)| QuadraticForm::new(h, DVector::from_vec(x), y).unwrap())
}

fn quadratic_pair() -> impl Strategy<Value = (QuadraticForm, QuadraticForm, Vec<f64>)> {
    prop_oneof![Just(2usize), Just(3), Just(5)]
        .prop_flat_map(|d| (quadratic(d), quadratic(d), point(d)))
}

fn transform(step: bool) -> impl Strategy<Value = PeakTransform> {
    let h = if step {
        (0.01..2.0f64).boxed()
    } else {
        Just(0.0).boxed()
    };
    (0.001..1000.0f64, 0.2..5.0f64, -50.0..50.0f64, h)
        .prop_map(|(s, p, o, h)| PeakTransform::new(s, p, o, h).unwrap())
}

/// Two peak objectives in d = 2 with one to three components each.
fn peak_pair() -> impl Strategy<Value = (PeakObjective, PeakObjective)> {
    let obj = || {
        prop::collection::vec(quadratic(2), 1..=3)
            .prop_map(|cs| PeakObjective::new(cs, PeakTransform::identity()).unwrap())
    };
    (obj(), obj())
}

fn evaluate_all(f1: &PeakObjective, f2: &PeakObjective, xs: &[[f64; 2]]) -> Vec<ObjectiveVector> {
    xs.iter()
        .map(|x| ObjectiveVector::new(f1.evaluate(x).unwrap(), f2.evaluate(x).unwrap()))
        .collect()
}

fn sample_xs(seed: u64, n: usize) -> Vec<[f64; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)])
        .collect()
}

// ---- archive ----

pub fn archive_matches_pairwise_filter(cases: u32) -> Outcome {
    check(cases, (grid_points(200),), |(points,)| {
        let mut archive = NondominatedArchive2D::new();
        for p in &points {
            archive.insert(*p);
            let now = archive.points();
            for w in now.windows(2) {
                prop_assert!(w[0].y1 < w[1].y1 && w[0].y2 > w[1].y2, "unsorted: {now:?}");
            }
        }
        prop_assert_eq!(archive.points(), filter_oracle(&points));
        let before = archive.points();
        for p in &before {
            prop_assert!(!archive.insert(*p));
        }
        prop_assert_eq!(archive.points(), before);
        Ok(())
    })
}

// ---- nondominated sorting ----

pub fn nondominated_ranks_match_definition(cases: u32) -> Outcome {
    check(cases, (grid_points(200),), |(points,)| {
        let fronts = fast_nondominated_sort(&points);
        let mut rank = vec![usize::MAX; points.len()];
        for (r, f) in fronts.iter().enumerate() {
            for &i in f {
                prop_assert_eq!(rank[i], usize::MAX);
                rank[i] = r;
            }
        }
        // rank(p) = 0 if nothing dominates p, else 1 + max rank of its dominators
        let mut order: Vec<usize> = (0..points.len()).collect();
        order.sort_by(|&a, &b| {
            (points[a].y1 + points[a].y2).total_cmp(&(points[b].y1 + points[b].y2))
        });
        let mut expect = vec![0usize; points.len()];
        for (k, &i) in order.iter().enumerate() {
            expect[i] = order[..k]
                .iter()
                .filter(|&&j| strictly_better(&points[j], &points[i]))
                .map(|&j| expect[j] + 1)
                .max()
                .unwrap_or(0);
        }
        prop_assert_eq!(rank, expect);
        Ok(())
    })
}

// ---- quadratics ----

pub fn gradient_vanishes_at_interpolation_optimum(cases: u32) -> Outcome {
    check(
        cases,
        (quadratic_pair(), 0.0..=1.0f64),
        |((q1, q2, _), t)| {
            let x = interpolate_optimum(&q1, &q2, t).unwrap();
            let xs = x.as_slice();
            let h = q1.hessian() * (1.0 - t) + q2.hessian() * t;
            let scale = 1.0 + x.norm() * h.norm();
            let g = q1.gradient(xs).unwrap() * (1.0 - t) + q2.gradient(xs).unwrap() * t;
            prop_assert!(g.norm() <= 1e-8 * scale, "analytic |g| = {}", g.norm());
            let ft = |y: &[f64]| (1.0 - t) * q1.evaluate(y).unwrap() + t * q2.evaluate(y).unwrap();
            let step = 1e-6;
            for i in 0..xs.len() {
                let (mut a, mut b) = (xs.to_vec(), xs.to_vec());
                a[i] += step;
                b[i] -= step;
                let fd = (ft(&a) - ft(&b)) / (2.0 * step);
                prop_assert!(
                    fd.abs() <= 1e-6 * scale,
                    "finite difference {fd} in coordinate {i}"
                );
            }
            Ok(())
        },
    )
}

pub fn interpolation_and_addition_identities(cases: u32) -> Outcome {
    check(
        cases,
        (quadratic_pair(), 0.0..=1.0f64),
        |((q1, q2, x), t)| {
            let (a, b) = (q1.evaluate(&x).unwrap(), q2.evaluate(&x).unwrap());
            let qt = interpolate(&q1, &q2, t).unwrap();
            let want = (1.0 - t) * a + t * b;
            let got = qt.evaluate(&x).unwrap();
            prop_assert!(
                (got - want).abs() <= 1e-12 * want.abs().max(1.0),
                "{got} vs {want}"
            );
            let sum = add(&q1, &q2).unwrap().evaluate(&x).unwrap();
            prop_assert!(
                (sum - (a + b)).abs() <= 1e-12 * (a + b).abs().max(1.0),
                "{sum} vs {}",
                a + b
            );
            Ok(())
        },
    )
}

pub fn shared_hessian_pareto_set_is_a_line(cases: u32) -> Outcome {
    check(cases, (spd(3), point(3), point(3)), |(h, x1, x2)| {
        let q1 = QuadraticForm::new(h.clone(), DVector::from_vec(x1.clone()), 0.0).unwrap();
        let q2 = QuadraticForm::new(h, DVector::from_vec(x2.clone()), 0.0).unwrap();
        let (a, b) = (DVector::from_vec(x1), DVector::from_vec(x2));
        let dir = &b - &a;
        for k in 0..=10 {
            let t = k as f64 / 10.0;
            let x = interpolate_optimum(&q1, &q2, t).unwrap();
            let residual = (&x - (&a + &dir * t)).norm();
            prop_assert!(
                residual <= 1e-10 * (1.0 + a.norm() + b.norm()),
                "t = {t}: {residual}"
            );
        }
        Ok(())
    })
}

// ---- peak transforms ----

pub fn strict_monotone_transform_keeps_nondominance(cases: u32) -> Outcome {
    check(
        cases,
        (
            peak_pair(),
            transform(false),
            transform(false),
            any::<u64>(),
        ),
        |((f1, f2), t1, t2, seed)| {
            let xs = sample_xs(seed, 200);
            let before = nondominated_flags(&evaluate_all(&f1, &f2, &xs));
            let g1 = f1.with_transform(t1).unwrap();
            let g2 = f2.with_transform(t2).unwrap();
            prop_assert_eq!(nondominated_flags(&evaluate_all(&g1, &g2, &xs)), before);
            Ok(())
        },
    )
}

pub fn discretization_preserves_weak_dominance(cases: u32) -> Outcome {
    check(
        cases,
        (peak_pair(), transform(true), transform(true), any::<u64>()),
        |((f1, f2), t1, t2, seed)| {
            let xs = sample_xs(seed, 60);
            let g1 = f1
                .with_transform(PeakTransform { step: 0.0, ..t1 })
                .unwrap();
            let g2 = f2
                .with_transform(PeakTransform { step: 0.0, ..t2 })
                .unwrap();
            let smooth = evaluate_all(&g1, &g2, &xs);
            let stepped = evaluate_all(
                &f1.with_transform(t1).unwrap(),
                &f2.with_transform(t2).unwrap(),
                &xs,
            );
            for i in 0..xs.len() {
                for j in 0..xs.len() {
                    if weakly_dominates(&smooth[i], &smooth[j]) {
                        prop_assert!(weakly_dominates(&stepped[i], &stepped[j]));
                    }
                }
            }
            Ok(())
        },
    )
}

pub fn discretization_sandwich(cases: u32) -> Outcome {
    check(cases, (0.0..1e6f64, 1e-6..1e3f64), |(y, h)| {
        let stepped = discretize(y, h);
        prop_assert!(
            stepped <= y && y - stepped < h,
            "y = {y}, h = {h}, stepped = {stepped}"
        );
        Ok(())
    })
}

pub fn peak_sandwich(cases: u32) -> Outcome {
    check(
        cases,
        (peak_pair(), transform(true), point(2)),
        |((f1, _), t, x)| {
            let f = f1.with_transform(t).unwrap();
            let gap = f.evaluate_smooth(&x).unwrap() - f.evaluate(&x).unwrap();
            // the offset is added after rounding, so allow its rounding error
            let slack =
                4.0 * f64::EPSILON * (t.offset.abs() + f.evaluate_smooth(&x).unwrap().abs());
            prop_assert!(
                gap >= -slack && gap < t.step + slack,
                "gap {gap}, step {}",
                t.step
            );
            Ok(())
        },
    )
}

// ---- generator ----

pub fn sampled_condition_numbers_are_reproduced(cases: u32) -> Outcome {
    check(
        cases,
        (prop_oneof![1..=7u8, 15..=20u8], 2..=5usize, 0..1_000_000u64),
        |(k, d, seed)| {
            let inst = generate(&ClassId::Bono(k), d, seed).unwrap();
            for (f, ks) in inst.problem().objectives().into_iter().zip(inst.kappas()) {
                for (c, kappa) in f.components().iter().zip(ks).take(3) {
                    let got = condition_number(c.hessian()).unwrap();
                    prop_assert!(
                        (got - kappa).abs() <= 1e-9 * kappa,
                        "BONO{k} d={d} seed={seed}: {got} vs {kappa}"
                    );
                }
            }
            Ok(())
        },
    )
}

// ---- indicators ----

fn front(points: Vec<ObjectiveVector>) -> Vec<ObjectiveVector> {
    NondominatedArchive2D::from_points(points).points()
}

fn ordered_pair() -> impl Strategy<Value = (ObjectiveVector, ObjectiveVector)> {
    (vec2(0.0, 1.2), vec2(0.0, 1.2)).prop_map(|(a, b)| {
        (
            ObjectiveVector::new(a.y1.min(b.y1), a.y2.max(b.y2)),
            ObjectiveVector::new(a.y1.max(b.y1), a.y2.min(b.y2)),
        )
    })
}

fn in_box(l: &ObjectiveVector, r: &ObjectiveVector, u: f64, v: f64) -> ObjectiveVector {
    ObjectiveVector::new(l.y1 + u * (r.y1 - l.y1), r.y2 + v * (l.y2 - r.y2))
}

fn kinds() -> [IndicatorKind; 2] {
    [IndicatorKind::hypervolume(), IndicatorKind::exact_r2()]
}

/// Improvement of `after` over `before` in the indicator's own direction.
fn gain(kind: &IndicatorKind, before: &[ObjectiveVector], after: &[ObjectiveVector]) -> f64 {
    let (b, a) = match kind {
        IndicatorKind::Hypervolume { reference } => {
            (hv_oracle(before, *reference), hv_oracle(after, *reference))
        }
        IndicatorKind::ExactR2 { .. } => (r2_oracle(before), r2_oracle(after)),
    };
    if kind.higher_is_better() {
        a - b
    } else {
        b - a
    }
}

pub fn hypervolume_matches_compression_oracle(cases: u32) -> Outcome {
    check(
        cases,
        (prop::collection::vec(vec2(0.0, 1.2), 0..50),),
        |(points,)| {
            let r = ObjectiveVector::new(1.0, 1.0);
            let got = hypervolume_of(&front(points.clone()), r);
            let want = hv_oracle(&points, r);
            prop_assert!((got - want).abs() <= 1e-12, "{got} vs {want}");
            Ok(())
        },
    )
}

pub fn exact_r2_matches_quadrature(cases: u32) -> Outcome {
    check(
        cases,
        (prop::collection::vec(vec2(0.0, 2.0), 1..=50),),
        |(points,)| {
            let got = exact_r2_of(&front(points.clone()), ObjectiveVector::new(0.0, 0.0)).unwrap();
            let want = r2_oracle(&points);
            prop_assert!((got - want).abs() <= 1e-9, "{got} vs {want}");
            Ok(())
        },
    )
}

pub fn nondominated_insert_strictly_improves(cases: u32) -> Outcome {
    check(
        cases,
        (
            prop::collection::vec(vec2(0.0, 0.999), 0..30),
            vec2(0.0, 0.999),
        ),
        |(points, y)| {
            let archive = NondominatedArchive2D::from_points(
                points.into_iter().filter(|p| !weakly_dominates(p, &y)),
            );
            prop_assert!(!archive.weakly_dominated(&y));
            let mut grown = archive.clone();
            grown.insert(y);
            for kind in kinds() {
                let (old, new) = (
                    kind.evaluate(&archive).unwrap(),
                    kind.evaluate(&grown).unwrap(),
                );
                if kind.higher_is_better() {
                    prop_assert!(new > old, "{}: {old} -> {new}", kind.name());
                } else {
                    prop_assert!(new < old, "{}: {old} -> {new}", kind.name());
                }
            }
            Ok(())
        },
    )
}

pub fn segment_epsilon_is_subadditive(cases: u32) -> Outcome {
    check(
        cases,
        (ordered_pair(), 0.0..=1.0f64, 0.0..=1.0f64),
        |((l, r), u, v)| {
            let m = in_box(&l, &r, u, v);
            for kind in kinds() {
                let whole = segment_epsilon(&kind, &l, &r).unwrap();
                let parts = segment_epsilon(&kind, &l, &m).unwrap()
                    + segment_epsilon(&kind, &m, &r).unwrap();
                prop_assert!(parts <= whole + 1e-12, "{}: {parts} > {whole}", kind.name());
            }
            Ok(())
        },
    )
}

pub fn segment_epsilon_bounds_any_improvement(cases: u32) -> Outcome {
    check(
        cases,
        (
            ordered_pair(),
            prop::collection::vec((0.0..=1.0f64, 0.0..=1.0f64), 1..8),
        ),
        |((l, r), s)| {
            let pair = vec![l, r];
            let mut more = pair.clone();
            more.extend(s.iter().map(|&(u, v)| in_box(&l, &r, u, v)));
            for kind in kinds() {
                let eps = segment_epsilon(&kind, &l, &r).unwrap();
                let g = gain(&kind, &pair, &more);
                prop_assert!(g <= eps + 1e-9, "{}: gain {g} > epsilon {eps}", kind.name());
            }
            Ok(())
        },
    )
}

pub fn hypervolume_agrees_with_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let r = ObjectiveVector::new(1.0, 1.0);
    for _ in 0..10 {
        let n = rng.random_range(1..40);
        let points = front(
            (0..n)
                .map(|_| ObjectiveVector::new(rng.random(), rng.random()))
                .collect(),
        );
        let hv = hypervolume_of(&points, r);
        let samples = 1_000_000;
        let inside = (0..samples)
            .filter(|_| {
                let z = ObjectiveVector::new(rng.random(), rng.random());
                points.iter().any(|p| weakly_dominates(p, &z))
            })
            .count();
        let p = inside as f64 / samples as f64;
        let sigma = (p * (1.0 - p) / samples as f64).sqrt();
        assert!((p - hv).abs() <= 3.0 * sigma.max(1e-9), "MC {p} vs {hv}");
    }
}
