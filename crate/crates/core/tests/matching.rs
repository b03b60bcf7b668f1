mod common;

use common::{brute_force, distances, rng, Kind, KINDS};
use proptest::prelude::*;
use rand::Rng;
use spectral_transport::convex::ConvexBody;
use spectral_transport::matching::{
    assignment_match, bottleneck_match, chordal, cyclic_bottleneck_match, nested_bottleneck_pairs, threshold_feasible,
};
use spectral_transport::measure::{delta_empirical, wasserstein1_empirical};
use spectral_transport::{DistanceMatrix, EmpiricalMeasure, Space};

fn matrix(d: &[Vec<f64>]) -> DistanceMatrix {
    DistanceMatrix::from_fn(d.len(), |i, j| d[i][j]).unwrap()
}

fn space(kind: Kind) -> Space {
    match kind {
        Kind::Interval => Space::unit_interval(),
        Kind::Circle => Space::unit_circle(),
        Kind::Square => Space::Convex(ConvexBody::unit_cube(2)),
    }
}

#[test]
fn solvers_match_brute_force() {
    let mut r = rng(11);
    for trial in 0..150 {
        let kind = KINDS[trial % 3];
        let n = r.random_range(1..=7);
        let d = distances(kind, &kind.points(n, &mut r), &kind.points(n, &mut r));
        let (bmax, bsum) = brute_force(&d);
        let m = matrix(&d);
        assert_eq!(bottleneck_match(&m).bottleneck_value, bmax, "{kind:?} n={n}");
        let a = assignment_match(&m);
        assert!((a.assignment_value - bsum).abs() <= 1e-12 * bsum.max(1.0), "{kind:?} n={n}");
    }
}

#[test]
fn ties_and_degenerate_matrices() {
    let zero = DistanceMatrix::from_fn(5, |_, _| 0.0).unwrap();
    assert_eq!(bottleneck_match(&zero).bottleneck_value, 0.0);
    let d: Vec<Vec<f64>> = (0..6).map(|i| (0..6).map(|j| ((i * 7 + j * 3) % 4) as f64).collect()).collect();
    let (bmax, bsum) = brute_force(&d);
    let m = matrix(&d);
    assert_eq!(bottleneck_match(&m).bottleneck_value, bmax);
    assert_eq!(assignment_match(&m).assignment_value, bsum);
}

#[test]
fn threshold_feasibility_is_monotone() {
    let mut r = rng(12);
    for _ in 0..40 {
        let n = r.random_range(2..=6);
        let d = distances(Kind::Square, &Kind::Square.points(n, &mut r), &Kind::Square.points(n, &mut r));
        let (bmax, _) = brute_force(&d);
        let m = matrix(&d);
        assert!(threshold_feasible(&m, bmax));
        assert!(!threshold_feasible(&m, bmax * (1.0 - 1e-9)));
    }
}

#[test]
fn cyclic_matching_equals_unrestricted() {
    let mut r = rng(13);
    for _ in 0..100 {
        let n = r.random_range(1..=7);
        let mut x: Vec<f64> = (0..n).map(|_| r.random_range(0.0..std::f64::consts::TAU)).collect();
        let mut y: Vec<f64> = (0..n).map(|_| r.random_range(0.0..std::f64::consts::TAU)).collect();
        x.sort_by(f64::total_cmp);
        y.sort_by(f64::total_cmp);
        let radius = r.random_range(0.5..2.0);
        // Same metric on both sides; the metric itself is checked below.
        let d: Vec<Vec<f64>> = x.iter().map(|&s| y.iter().map(|&t| chordal(s, t, radius)).collect()).collect();
        let c = cyclic_bottleneck_match(&x, &y, radius).unwrap();
        assert_eq!(c.matching.bottleneck_value, brute_force(&d).0);
        for (s, t) in x.iter().zip(&y) {
            assert!((chordal(*s, *t, radius) - common::chord(*s, *t, radius)).abs() <= 1e-15 * radius);
        }
    }
}

#[test]
fn large_cyclic_matching_agrees_with_shift_scan() {
    let mut r = rng(14);
    for _ in 0..5 {
        let n = 300;
        let mut x: Vec<f64> = (0..n).map(|_| r.random_range(0.0..std::f64::consts::TAU)).collect();
        let mut y: Vec<f64> = (0..n).map(|_| r.random_range(0.0..std::f64::consts::TAU)).collect();
        x.sort_by(f64::total_cmp);
        y.sort_by(f64::total_cmp);
        let scan = (0..n)
            .map(|k| (0..n).map(|i| chordal(x[i], y[(i + k) % n], 1.0)).fold(0.0, f64::max))
            .fold(f64::INFINITY, f64::min);
        let c = cyclic_bottleneck_match(&x, &y, 1.0).unwrap();
        assert_eq!(c.matching.bottleneck_value, scan);
    }
}

#[test]
fn nested_pairs_have_bottleneck_prefixes() {
    let mut r = rng(15);
    for _ in 0..30 {
        let n = r.random_range(2..=6);
        let d = distances(Kind::Square, &Kind::Square.points(n, &mut r), &Kind::Square.points(n, &mut r));
        let pairs = nested_bottleneck_pairs(&matrix(&d));
        assert_eq!(pairs.len(), n);
        let mut rows: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        let mut cols: Vec<usize> = pairs.iter().map(|p| p.1).collect();
        rows.sort();
        cols.sort();
        assert_eq!(rows, (0..n).collect::<Vec<_>>());
        assert_eq!(cols, (0..n).collect::<Vec<_>>());
        // Every prefix is a bottleneck matching of its own rows and columns.
        for k in 1..=n {
            let sub: Vec<Vec<f64>> = pairs[..k]
                .iter()
                .map(|&(i, _)| pairs[..k].iter().map(|&(_, j)| d[i][j]).collect())
                .collect();
            let prefix = pairs[..k].iter().map(|&(i, j)| d[i][j]).fold(0.0, f64::max);
            assert_eq!(prefix, brute_force(&sub).0, "prefix {k} of {n}");
        }
    }
}

#[test]
fn gibbs_su_bound() {
    let mut r = rng(16);
    for trial in 0..90 {
        let kind = KINDS[trial % 3];
        let n = r.random_range(1..=7);
        let (a, b) = (kind.points(n, &mut r), kind.points(n, &mut r));
        let (bmax, bsum) = brute_force(&distances(kind, &a, &b));
        let mu = EmpiricalMeasure::new(space(kind), a).unwrap();
        let nu = EmpiricalMeasure::new(space(kind), b).unwrap();
        let w1 = wasserstein1_empirical(&mu, &nu).unwrap();
        assert!((w1 - bsum / n as f64).abs() <= 1e-12);
        assert!(w1 <= (kind.diameter() + 1.0) * bmax + 1e-12);
    }
}

fn measure(kind: Kind, pts: Vec<Vec<f64>>) -> EmpiricalMeasure {
    EmpiricalMeasure::new(space(kind), pts).unwrap()
}

fn arb_points(n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(0.0f64..1.0, 2), n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn delta_is_a_metric(a in arb_points(5), b in arb_points(5), c in arb_points(5)) {
        let (a, b, c) = (measure(Kind::Square, a), measure(Kind::Square, b), measure(Kind::Square, c));
        let ab = delta_empirical(&a, &b).unwrap();
        prop_assert_eq!(ab, delta_empirical(&b, &a).unwrap());
        prop_assert_eq!(delta_empirical(&a, &a).unwrap(), 0.0);
        let ac = delta_empirical(&a, &c).unwrap();
        let cb = delta_empirical(&c, &b).unwrap();
        prop_assert!(ab <= ac + cb + 1e-12);
    }

    #[test]
    fn wasserstein_is_dominated(a in arb_points(6), b in arb_points(6)) {
        let (a, b) = (measure(Kind::Square, a), measure(Kind::Square, b));
        let w1 = wasserstein1_empirical(&a, &b).unwrap();
        let d = delta_empirical(&a, &b).unwrap();
        prop_assert!(w1 <= d + 1e-12);
        prop_assert!(w1 <= (2f64.sqrt() + 1.0) * d + 1e-12);
    }

    #[test]
    fn delta_is_permutation_invariant(a in arb_points(6), b in arb_points(6), k in 0usize..6) {
        let mut rotated = b.clone();
        rotated.rotate_left(k);
        let d1 = delta_empirical(&measure(Kind::Square, a.clone()), &measure(Kind::Square, b)).unwrap();
        let d2 = delta_empirical(&measure(Kind::Square, a), &measure(Kind::Square, rotated)).unwrap();
        prop_assert_eq!(d1, d2);
    }
}
