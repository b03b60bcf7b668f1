//! Acceptance run: one PASS/FAIL line per criterion, with the measured
//! quantities, the pinned tolerance and the time taken.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use common::{
    brute_force, distances, farthest_corner, monomial_integral, oracle_cdf, oracle_section_distance, oracle_weyl,
    random_breakpoints, random_complex_values, random_real_values, random_unit_values, rng, Kind, KINDS,
};
use rand::Rng;
use spectral_transport::circle::{discretize_circle, transport_row};
use spectral_transport::convex::{
    build_tube_homeomorphism, discretize_body, ConvexBody, Monomial, PolynomialDensity, TubeOptions, CENTER_PHASE,
};
use spectral_transport::interval::{increasing_rearrangement, verify_lipschitz_section};
use spectral_transport::matching::{assignment_match, bottleneck_match, chordal, cyclic_bottleneck_match};
use spectral_transport::measure::{delta_cdf_interval, delta_empirical, wasserstein1_empirical};
use spectral_transport::spectral::{
    lipschitz_probe, minimize_orbit_distance, random_lipschitz_family, random_with_spectrum, realizing_unitary, weyl_delta,
    C64,
};
use spectral_transport::{CdfMeasure, DistanceMatrix, EmpiricalMeasure, Error, MatrixClass, Space};

struct Outcome {
    pass: bool,
    detail: String,
}

fn run(number: usize, title: &str, limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = f();
    let elapsed = start.elapsed();
    let in_time = limit.is_none_or(|l| elapsed <= l);
    let pass = outcome.pass && in_time;
    let limit_text = limit.map(|l| format!(" (limit {} s)", l.as_secs())).unwrap_or_default();
    println!(
        "{} criterion {number:>2} {title}: {}; {:.2} s{limit_text}",
        if pass { "PASS" } else { "FAIL" },
        outcome.detail,
        elapsed.as_secs_f64(),
    );
    pass
}

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

fn sorted_angles(n: usize, r: &mut impl Rng) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| r.random_range(0.0..std::f64::consts::TAU)).collect();
    v.sort_by(f64::total_cmp);
    v
}

fn cdf(bp: &[(f64, f64)]) -> CdfMeasure {
    CdfMeasure::new(bp.to_vec()).unwrap()
}

/// Bottleneck and assignment solvers against factorial enumeration.
fn matching_exactness() -> Outcome {
    let mut r = rng(1001);
    let (mut bad_b, mut bad_a) = (0, 0);
    for trial in 0..500 {
        let kind = KINDS[trial % 3];
        let n = r.random_range(1..=8);
        let d = distances(kind, &kind.points(n, &mut r), &kind.points(n, &mut r));
        let (bmax, bsum) = brute_force(&d);
        let m = matrix(&d);
        bad_b += usize::from(bottleneck_match(&m).bottleneck_value != bmax);
        bad_a += usize::from(assignment_match(&m).assignment_value != bsum);
    }
    Outcome {
        pass: bad_b == 0 && bad_a == 0,
        detail: format!("500 instances, bottleneck mismatches {bad_b}, assignment mismatches {bad_a} (exact)"),
    }
}

/// Cyclic matching against unrestricted enumeration on the circle.
fn cyclic_equals_unrestricted() -> Outcome {
    let mut r = rng(1002);
    let mut bad = 0;
    for _ in 0..200 {
        let n = r.random_range(1..=8);
        let (x, y) = (sorted_angles(n, &mut r), sorted_angles(n, &mut r));
        let d: Vec<Vec<f64>> = x.iter().map(|&s| y.iter().map(|&t| chordal(s, t, 1.0)).collect()).collect();
        let c = cyclic_bottleneck_match(&x, &y, 1.0).unwrap();
        bad += usize::from(c.matching.bottleneck_value != brute_force(&d).0);
    }
    Outcome {
        pass: bad == 0,
        detail: format!("200 instances, mismatches {bad} (exact)"),
    }
}

fn section_property() -> Outcome {
    let mut r = rng(1003);
    let (mut worst_excess, mut worst_defect, mut worst_oracle_gap) = (f64::NEG_INFINITY, 0.0f64, 0.0f64);
    for _ in 0..200 {
        let nu = random_breakpoints(r.random_range(2..8), &mut r);
        let m1 = random_breakpoints(r.random_range(2..8), &mut r);
        let m2 = random_breakpoints(r.random_range(2..8), &mut r);
        let check = verify_lipschitz_section(&cdf(&nu), &cdf(&m1), &cdf(&m2));
        let lhs = oracle_section_distance(&nu, &m1, &m2);
        worst_oracle_gap = worst_oracle_gap.max((lhs - check.lhs).abs());
        worst_excess = worst_excess.max(lhs.max(check.lhs) - delta_cdf_interval(&cdf(&m1), &cdf(&m2)));
        let h = increasing_rearrangement(&cdf(&m1), &cdf(&nu));
        for &(s, t) in h.breakpoints() {
            worst_defect = worst_defect.max((oracle_cdf(&nu, s) - oracle_cdf(&m1, t)).abs());
        }
    }
    Outcome {
        pass: worst_excess <= 1e-9 && worst_defect <= 1e-12 && worst_oracle_gap <= 1e-12,
        detail: format!(
            "200 triples, max(sup|section gap| - delta) = {worst_excess:.3e} (tol 1e-9), \
             pushforward cdf defect {worst_defect:.3e} (tol 1e-12), oracle gap {worst_oracle_gap:.3e}"
        ),
    }
}

/// Runs `f` over `jobs` on all cores, keeping the input order.
fn parallel_map<T: Sync, R: Send>(jobs: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(jobs.len()).max(1);
    let f = &f;
    let mut tagged: Vec<(usize, R)> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..threads)
            .map(|t| s.spawn(move || jobs.iter().enumerate().skip(t).step_by(threads).map(|(i, j)| (i, f(j))).collect::<Vec<_>>()))
            .collect();
        handles.into_iter().flat_map(|h| h.join().unwrap()).collect()
    });
    tagged.sort_by_key(|(i, _)| *i);
    tagged.into_iter().map(|(_, r)| r).collect()
}

fn circle_approximate_transport() -> Outcome {
    let mut r = rng(1004);
    let pairs: Vec<(CdfMeasure, CdfMeasure)> = (0..50)
        .map(|_| {
            let mu = cdf(&random_breakpoints(r.random_range(2..7), &mut r));
            let nu = cdf(&random_breakpoints(r.random_range(2..7), &mut r));
            (mu, nu)
        })
        .collect();
    // (|anchor - δ_n|, lower estimate - bound, bound@12 - bound@8)
    let rows = parallel_map(&pairs, |(mu, nu)| {
        let (row, _) = transport_row(mu, nu, 10, 1.0).ok()?;
        let disc = discretize_circle(mu, nu, 10, 1.0).ok()?;
        let delta_n = cyclic_bottleneck_match(&disc.s_angles, &disc.t_angles, 1.0).ok()?.matching.bottleneck_value;
        let coarse = discretize_circle(mu, nu, 8, 1.0).ok()?;
        let fine = discretize_circle(mu, nu, 12, 1.0).ok()?;
        Some((
            (row.anchor_displacement - delta_n).abs(),
            // Lower end of the evaluated δ((h_n)_* ν, μ) against the bound.
            row.pushforward_estimate - row.pushforward_error - row.pushforward_bound(),
            (fine.s_bound + fine.t_bound) - (coarse.s_bound + coarse.t_bound),
        ))
    });
    let failures = rows.iter().filter(|r| r.is_none()).count();
    let ok: Vec<(f64, f64, f64)> = rows.into_iter().flatten().collect();
    let worst_anchor = ok.iter().map(|r| r.0).fold(0.0, f64::max);
    let worst_push = ok.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
    let worst_depth = ok.iter().map(|r| r.2).fold(f64::NEG_INFINITY, f64::max);
    Outcome {
        pass: failures == 0 && worst_anchor <= 1e-9 && worst_push <= 1e-9 && worst_depth <= 1e-9,
        detail: format!(
            "50 pairs at depth 10, |anchor displacement - delta_n| <= {worst_anchor:.3e} (tol 1e-9), \
             max(pushforward lower estimate - bound) = {worst_push:.3e}, \
             max(bound@12 - bound@8) = {worst_depth:.3e} (tol 1e-9), errors {failures}"
        ),
    }
}

fn tube_homeomorphisms() -> Outcome {
    let mut r = rng(1005);
    let eps = 0.05;
    let (mut failures, mut wrong, mut worst) = (0, 0, f64::NEG_INFINITY);
    let mut reasons = Vec::new();
    for trial in 0..100 {
        let d = if trial < 50 { 2 } else { 3 };
        let m = r.random_range(1..=5);
        let body = ConvexBody::unit_cube(d);
        let pts = |r: &mut _| -> Vec<Vec<f64>> { (0..m).map(|_| (0..d).map(|_| rand::Rng::random::<f64>(r)).collect()).collect() };
        let (f, g) = (pts(&mut r), pts(&mut r));
        let b = brute_force(&distances(Kind::Square, &f, &g)).0;
        match build_tube_homeomorphism(&body, &f, &g, eps, &TubeOptions::default()) {
            Ok(h) => {
                let hits = f.iter().all(|x| g.contains(&h.eval(x))) && h.endpoint_mismatches() == 0;
                let (grid, _) = h.grid_displacement(&body, eps / 10.0);
                if !hits || !h.ok() {
                    wrong += 1;
                }
                worst = worst.max(grid - (b + eps));
            }
            Err(Error::ConstructionFailure { reason, .. }) => {
                failures += 1;
                reasons.push(reason);
            }
            Err(e) => {
                wrong += 1;
                reasons.push(e.to_string());
            }
        }
    }
    for reason in &reasons {
        println!("    construction failure: {reason}");
    }
    Outcome {
        pass: wrong == 0 && failures < 2 && worst <= 0.0,
        detail: format!(
            "100 instances (50 square, 50 cube), eps 0.05, h(F) != G or failed certificates {wrong}, \
             max(grid displacement - (b + eps)) = {worst:.3e} (spacing eps/10), construction failures {failures} (< 2)"
        ),
    }
}

fn body_discretization() -> Outcome {
    let mut r = rng(1006);
    let body = ConvexBody::unit_cube(2);
    let (mut worst_ratio, mut worst_mass, mut worst_reach, mut errors) = (0.0f64, 0.0f64, f64::NEG_INFINITY, 0);
    for _ in 0..20 {
        let mut terms = vec![Monomial {
            coef: r.random_range(0.2..1.0),
            powers: vec![0, 0],
        }];
        for _ in 0..r.random_range(1..4) {
            terms.push(Monomial {
                coef: r.random_range(0.0..2.0),
                powers: vec![r.random_range(0..4), r.random_range(0..4)],
            });
        }
        let total: f64 = terms.iter().map(|t| monomial_integral(t.coef, &t.powers, &[0.0, 0.0], &[1.0, 1.0])).sum();
        let p = PolynomialDensity::new(2, terms.clone()).unwrap();
        for eps in [0.2, 0.1, 0.05] {
            let Ok(disc) = discretize_body(&p, &body, eps, CENTER_PHASE) else {
                errors += 1;
                continue;
            };
            worst_ratio = worst_ratio.max(disc.certificate / eps);
            for cell in &disc.cells {
                let mass: f64 = terms.iter().map(|t| monomial_integral(t.coef, &t.powers, &cell.lo, &cell.hi)).sum();
                worst_mass = worst_mass.max((mass / total - 1.0 / disc.m() as f64).abs());
                worst_reach = worst_reach.max(farthest_corner(&cell.atom, &cell.lo, &cell.hi) - disc.certificate);
            }
        }
    }
    Outcome {
        pass: errors == 0 && worst_ratio < 1.0 && worst_mass <= 1e-9 && worst_reach <= 1e-12,
        detail: format!(
            "20 densities x eps in {{0.2, 0.1, 0.05}}, max certificate/eps = {worst_ratio:.4} (< 1), \
             cell mass error {worst_mass:.3e} (tol 1e-9), atom reach beyond certificate {worst_reach:.3e}, errors {errors}"
        ),
    }
}

struct WeylStats {
    realizing: f64,
    oracle: f64,
    above: f64,
    below: f64,
}

fn weyl_pair(class: MatrixClass, seed: u64) -> WeylStats {
    let mut r = rng(seed);
    let gen = |r: &mut _| match class {
        MatrixClass::Hermitian => random_real_values(4, r),
        _ => random_unit_values(4, r),
    };
    let (va, vb) = (gen(&mut r), gen(&mut r));
    let c = |v: &[(f64, f64)]| v.iter().map(|&(x, y)| C64::new(x, y)).collect::<Vec<_>>();
    let a = random_with_spectrum(&c(&va), class, &mut r).unwrap();
    let b = random_with_spectrum(&c(&vb), class, &mut r).unwrap();
    let delta = weyl_delta(&a, &b).unwrap().value;
    let real = realizing_unitary(&a, &b).unwrap();
    let best = minimize_orbit_distance(&a, &b, 20_000, seed).unwrap().best;
    WeylStats {
        realizing: (real.achieved - delta).abs(),
        oracle: (delta - oracle_weyl(&va, &vb)).abs(),
        above: best - delta,
        below: delta - best,
    }
}

fn weyl_matrix_scale() -> Outcome {
    let jobs: Vec<(MatrixClass, u64)> = (0..100)
        .map(|k| (MatrixClass::Hermitian, 7000 + k))
        .chain((0..100).map(|k| (MatrixClass::Unitary, 8000 + k)))
        .collect();
    let stats = parallel_map(&jobs, |&(c, seed)| weyl_pair(c, seed));
    let max = |f: fn(&WeylStats) -> f64| stats.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
    let (realizing, oracle, above, below) = (max(|s| s.realizing), max(|s| s.oracle), max(|s| s.above), max(|s| s.below));
    let misses = stats.iter().filter(|s| s.above > 1e-3).count();
    Outcome {
        pass: realizing <= 1e-8 && oracle <= 1e-9 && above <= 1e-3 && below <= 1e-6,
        detail: format!(
            "100 hermitian + 100 unitary 4x4, |achieved - delta| <= {realizing:.3e} (tol 1e-8), \
             |delta - oracle| <= {oracle:.3e}, max(best - delta) = {above:.3e} (tol 1e-3, misses {misses}), \
             max(delta - best) = {below:.3e} (tol 1e-6)"
        ),
    }
}

fn gibbs_su() -> Outcome {
    let mut r = rng(1008);
    let (mut worst, mut oracle_gap) = (f64::NEG_INFINITY, 0.0f64);
    for trial in 0..300 {
        let kind = KINDS[trial % 3];
        let n = r.random_range(1..=7);
        let (a, b) = (kind.points(n, &mut r), kind.points(n, &mut r));
        let (bmax, bsum) = brute_force(&distances(kind, &a, &b));
        let mu = EmpiricalMeasure::new(space(kind), a).unwrap();
        let nu = EmpiricalMeasure::new(space(kind), b).unwrap();
        let w1 = wasserstein1_empirical(&mu, &nu).unwrap();
        let delta = delta_empirical(&mu, &nu).unwrap();
        oracle_gap = oracle_gap.max((w1 - bsum / n as f64).abs()).max((delta - bmax).abs());
        worst = worst.max(w1 - (kind.diameter() + 1.0) * delta);
    }
    Outcome {
        pass: worst <= 1e-12 && oracle_gap <= 1e-12,
        detail: format!(
            "300 pairs over interval/circle/square, max(W1 - (diam + 1) delta) = {worst:.3e} (tol 1e-12), \
             oracle gap {oracle_gap:.3e}"
        ),
    }
}

fn lipschitz_lower_direction() -> Outcome {
    let mut r = rng(1009);
    let (mut worst, mut oracle_gap, mut errors) = (f64::NEG_INFINITY, 0.0f64, 0);
    for _ in 0..50 {
        let (va, vb) = (random_complex_values(4, &mut r), random_complex_values(4, &mut r));
        let c = |v: &[(f64, f64)]| v.iter().map(|&(x, y)| C64::new(x, y)).collect::<Vec<_>>();
        let a = random_with_spectrum(&c(&va), MatrixClass::Normal, &mut r).unwrap();
        let b = random_with_spectrum(&c(&vb), MatrixClass::Normal, &mut r).unwrap();
        let family = random_lipschitz_family(50, C64::new(0.0, 0.0), 1.1, &mut r);
        let Ok(probe) = lipschitz_probe(&a, &b, &family) else {
            errors += 1;
            continue;
        };
        worst = worst.max(probe.sup - probe.delta);
        let oracle_sup = family
            .iter()
            .map(|f| {
                let img = |v: &[(f64, f64)]| {
                    v.iter().map(|&(x, y)| f.apply(C64::new(x, y))).map(|z| (z.re, z.im)).collect::<Vec<_>>()
                };
                oracle_weyl(&img(&va), &img(&vb))
            })
            .fold(0.0, f64::max);
        oracle_gap = oracle_gap.max((oracle_sup - probe.sup).abs());
        worst = worst.max(oracle_sup - oracle_weyl(&va, &vb));
    }
    Outcome {
        pass: errors == 0 && worst <= 1e-8 && oracle_gap <= 1e-8,
        detail: format!(
            "50 normal 4x4 pairs x 50 functions, max(sup_f delta(f(a), f(b)) - delta(a, b)) = {worst:.3e} (tol 1e-8), \
             oracle gap {oracle_gap:.3e}, errors {errors}"
        ),
    }
}

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name).display().to_string()
}

fn determinism() -> Outcome {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    std::fs::create_dir_all(&dir).unwrap();
    let invocations: Vec<Vec<String>> = vec![
        vec!["weyl", "--a", &fixture("hermitian_a.json"), "--b", &fixture("hermitian_b.json"), "--minimize", "--seed", "17"],
        vec!["weyl", "--a", &fixture("unitary_3a.json"), "--b", &fixture("unitary_3b.json"), "--minimize", "--seed", "3", "--probe", &fixture("probe.json")],
        vec!["delta", "--space", "circle", "--a", &fixture("circle_cdf_a.json"), "--b", &fixture("circle_cdf_b.json")],
        vec!["transport", "--space", "convex", "--a", &fixture("square_a.json"), "--b", &fixture("square_b.json")],
    ]
    .into_iter()
    .map(|v| v.into_iter().map(String::from).collect())
    .collect();
    let mut identical = 0;
    let mut problems = Vec::new();
    for (k, args) in invocations.iter().enumerate() {
        let mut outputs = Vec::new();
        for _ in 0..2 {
            // Same --out path both times: the arguments are part of the report.
            let path = dir.join(format!("report_{k}.json"));
            let out = Command::new(env!("CARGO_BIN_EXE_spectral-transport"))
                .args(args)
                .args(["--json", "--out", path.to_str().unwrap()])
                .env_remove("SPECTRAL_TRANSPORT_SEED")
                .output()
                .unwrap();
            if !out.status.success() {
                problems.push(format!("{} exited with {:?}", args[0], out.status.code()));
            }
            outputs.push((out.stdout, std::fs::read(&path).unwrap_or_default()));
        }
        if outputs[0] == outputs[1] && outputs[0].0 == outputs[0].1 && !outputs[0].0.is_empty() {
            identical += 1;
        } else {
            problems.push(format!("{} reports differ", args[0]));
        }
    }
    Outcome {
        pass: identical == invocations.len() && problems.is_empty(),
        detail: format!(
            "{identical}/{} invocations byte-identical across runs (stdout and --out){}",
            invocations.len(),
            if problems.is_empty() { String::new() } else { format!(", problems: {}", problems.join("; ")) }
        ),
    }
}

fn main() {
    // `cargo test -- --list` and filters are not meaningful here.
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let s = Duration::from_secs;
    let results = [
        run(1, "matching exactness", Some(s(30)), matching_exactness),
        run(2, "cyclic circle matching", Some(s(5)), cyclic_equals_unrestricted),
        run(3, "monotone section", Some(s(10)), section_property),
        run(4, "circle approximate transport", Some(s(60)), circle_approximate_transport),
        run(5, "tube homeomorphisms", Some(s(120)), tube_homeomorphisms),
        run(6, "body discretization", Some(s(60)), body_discretization),
        run(7, "matrix-scale Weyl distance", Some(s(120)), weyl_matrix_scale),
        run(8, "W1 versus delta", Some(s(10)), gibbs_su),
        run(9, "Lipschitz probe lower bound", Some(s(30)), lipschitz_lower_direction),
        run(10, "report determinism", None, determinism),
    ];
    let passed = results.iter().filter(|&&p| p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
