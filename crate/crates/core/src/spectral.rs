//! Distances between unitary orbits of normal matrices through optimal
//! eigenvalue matching.

use std::f64::consts::TAU;

use nalgebra::{Complex, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::{bottleneck_match, cyclic_bottleneck_match, DistanceMatrix};
use crate::report::Certificate;

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;

/// Relative tolerance for normality and class checks.
pub const NORMALITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixClass {
    Hermitian,
    Unitary,
    Normal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalMatrix {
    a: CMatrix,
    class: MatrixClass,
    normality_defect: f64,
}

fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest singular value.
pub fn operator_norm(m: &CMatrix) -> f64 {
    m.clone().singular_values().max()
}

impl NormalMatrix {
    pub fn new(a: CMatrix, class: MatrixClass) -> Result<Self> {
        if a.nrows() != a.ncols() || a.nrows() == 0 {
            return Err(Error::invalid("matrix", format!("{}x{} is not a nonempty square", a.nrows(), a.ncols())));
        }
        if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::invalid("matrix", "entries must be finite"));
        }
        let n = a.nrows();
        let scale = frobenius(&a);
        let adj = a.adjoint();
        let normality_defect = frobenius(&(&a * &adj - &adj * &a));
        let tolerance = NORMALITY_TOLERANCE * scale.max(f64::MIN_POSITIVE);
        if normality_defect > tolerance {
            return Err(Error::NotNormal {
                defect: normality_defect,
                tolerance,
            });
        }
        let tol = NORMALITY_TOLERANCE * scale.max(1.0);
        match class {
            MatrixClass::Hermitian if frobenius(&(&a - &adj)) > tol => {
                return Err(Error::invalid("class", "matrix is not hermitian"));
            }
            MatrixClass::Unitary if frobenius(&(&adj * &a - CMatrix::identity(n, n))) > tol => {
                return Err(Error::invalid("class", "matrix is not unitary"));
            }
            _ => {}
        }
        Ok(Self {
            a,
            class,
            normality_defect,
        })
    }

    /// From row-major real and imaginary parts.
    pub fn from_parts(class: MatrixClass, re: &[Vec<f64>], im: &[Vec<f64>]) -> Result<Self> {
        let n = re.len();
        if im.len() != n || re.iter().chain(im).any(|row| row.len() != n) {
            return Err(Error::invalid("matrix", "re and im must be n x n"));
        }
        Self::new(CMatrix::from_fn(n, n, |i, j| C64::new(re[i][j], im[i][j])), class)
    }

    pub fn diagonal(values: &[C64], class: MatrixClass) -> Result<Self> {
        Self::new(CMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(values)), class)
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.a
    }

    pub fn class(&self) -> MatrixClass {
        self.class
    }

    pub fn normality_defect(&self) -> f64 {
        self.normality_defect
    }

    /// Real and imaginary parts, row-major.
    pub fn parts(&self) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let n = self.n();
        let re = (0..n).map(|i| (0..n).map(|j| self.a[(i, j)].re).collect()).collect();
        let im = (0..n).map(|i| (0..n).map(|j| self.a[(i, j)].im).collect()).collect();
        (re, im)
    }

    /// Eigenvalues sorted by real then imaginary part, with a unitary matrix
    /// of eigenvectors in the same order.
    pub fn spectral_data(&self) -> SpectralData {
        let n = self.n();
        let (values, vectors): (Vec<C64>, CMatrix) = match self.class {
            MatrixClass::Hermitian => {
                let e = self.a.clone().symmetric_eigen();
                (e.eigenvalues.iter().map(|&v| C64::new(v, 0.0)).collect(), e.eigenvectors)
            }
            _ => {
                let (q, t) = self.a.clone().schur().unpack();
                ((0..n).map(|i| t[(i, i)]).collect(), q)
            }
        };
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| {
            values[i]
                .re
                .total_cmp(&values[j].re)
                .then(values[i].im.total_cmp(&values[j].im))
                .then(i.cmp(&j))
        });
        SpectralData {
            eigenvalues: order.iter().map(|&i| values[i]).collect(),
            eigenvectors: CMatrix::from_fn(n, n, |r, c| vectors[(r, order[c])]),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralData {
    pub eigenvalues: Vec<C64>,
    /// Column `i` is an eigenvector for `eigenvalues[i]`.
    pub eigenvectors: CMatrix,
}

impl SpectralData {
    /// `‖V* V - 1‖_F`.
    pub fn orthogonality_defect(&self) -> f64 {
        let n = self.eigenvalues.len();
        frobenius(&(self.eigenvectors.adjoint() * &self.eigenvectors - CMatrix::identity(n, n)))
    }

    pub fn reconstruct(&self) -> CMatrix {
        let d = CMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.eigenvalues));
        &self.eigenvectors * d * self.eigenvectors.adjoint()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeylMatch {
    pub value: f64,
    /// Eigenvalue `i` of `a` is matched with eigenvalue `permutation[i]` of
    /// `b`, both in the order of [`NormalMatrix::spectral_data`].
    pub permutation: Vec<usize>,
    /// Matching rule used: "ascending", "cyclic" or "bottleneck".
    pub method: String,
}

fn angle(z: C64) -> f64 {
    let t = z.im.atan2(z.re).rem_euclid(TAU);
    if t >= TAU {
        0.0
    } else {
        t
    }
}

fn check_dims(a: &NormalMatrix, b: &NormalMatrix) -> Result<()> {
    if a.n() != b.n() {
        return Err(Error::SizeMismatch {
            left: a.n(),
            right: b.n(),
        });
    }
    Ok(())
}

/// Optimal matching distance between the spectra of two normal matrices.
pub fn weyl_delta(a: &NormalMatrix, b: &NormalMatrix) -> Result<WeylMatch> {
    check_dims(a, b)?;
    let sa = a.spectral_data().eigenvalues;
    let sb = b.spectral_data().eigenvalues;
    Ok(match_spectra(&sa, &sb, common_class(a.class, b.class)))
}

fn common_class(x: MatrixClass, y: MatrixClass) -> MatrixClass {
    if x == y {
        x
    } else {
        MatrixClass::Normal
    }
}

/// Matches two eigenvalue lists (each sorted by real then imaginary part).
pub fn match_spectra(sa: &[C64], sb: &[C64], class: MatrixClass) -> WeylMatch {
    let n = sa.len();
    match class {
        MatrixClass::Hermitian => {
            let value = sa.iter().zip(sb).map(|(x, y)| (x.re - y.re).abs()).fold(0.0, f64::max);
            WeylMatch {
                value,
                permutation: (0..n).collect(),
                method: "ascending".into(),
            }
        }
        MatrixClass::Unitary => {
            let sort = |s: &[C64]| {
                let mut idx: Vec<usize> = (0..n).collect();
                idx.sort_by(|&i, &j| angle(s[i]).total_cmp(&angle(s[j])).then(i.cmp(&j)));
                idx
            };
            let (ia, ib) = (sort(sa), sort(sb));
            let xa: Vec<f64> = ia.iter().map(|&i| angle(sa[i])).collect();
            let xb: Vec<f64> = ib.iter().map(|&i| angle(sb[i])).collect();
            let cm = cyclic_bottleneck_match(&xa, &xb, 1.0).expect("angles are sorted in [0, 2π)");
            let mut permutation = vec![0; n];
            for k in 0..n {
                permutation[ia[k]] = ib[(k + cm.shift) % n];
            }
            WeylMatch {
                value: cm.matching.bottleneck_value,
                permutation,
                method: "cyclic".into(),
            }
        }
        MatrixClass::Normal => {
            let d = DistanceMatrix::from_fn(n, |i, j| (sa[i] - sb[j]).norm()).expect("finite distances");
            let m = bottleneck_match(&d);
            WeylMatch {
                value: m.bottleneck_value,
                permutation: m.permutation,
                method: "bottleneck".into(),
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RealizingUnitary {
    pub u: CMatrix,
    /// `‖u a u* - b‖`.
    pub achieved: f64,
    pub delta: WeylMatch,
}

/// `u = V_b P V_a*`, sending each eigenvector of `a` to the eigenvector of
/// its matched eigenvalue of `b`.
pub fn realizing_unitary(a: &NormalMatrix, b: &NormalMatrix) -> Result<RealizingUnitary> {
    check_dims(a, b)?;
    let da = a.spectral_data();
    let db = b.spectral_data();
    let delta = match_spectra(&da.eigenvalues, &db.eigenvalues, common_class(a.class, b.class));
    let n = a.n();
    let mut p = CMatrix::zeros(n, n);
    for (i, &j) in delta.permutation.iter().enumerate() {
        p[(j, i)] = C64::new(1.0, 0.0);
    }
    let u = &db.eigenvectors * p * da.eigenvectors.adjoint();
    let achieved = orbit_distance(&u, a.matrix(), b.matrix());
    Ok(RealizingUnitary { u, achieved, delta })
}

/// `‖u a u* - b‖`.
pub fn orbit_distance(u: &CMatrix, a: &CMatrix, b: &CMatrix) -> f64 {
    operator_norm(&(u * a * u.adjoint() - b))
}

/// Free exploration runs: the identity plus Haar-random starts.
pub const ORBIT_RESTARTS: usize = 2;
/// Share of the budget spent on free exploration.
pub const ORBIT_EXPLORE_FRACTION: f64 = 0.2;
/// Share of the budget kept for the final polish.
pub const ORBIT_FINAL_FRACTION: f64 = 0.2;
/// Evaluations of the Frobenius alignment at the start of each exchange
/// search, split evenly between the evolution strategy and the CMA-ES.
pub const ORBIT_ALIGN_EVALS: usize = 2000;
/// Exchange searches, each from its own Haar-random start.
pub const ORBIT_EXCHANGE_SEARCHES: usize = 4;
/// Evaluations of the operator-norm polish closing each exchange search.
pub const ORBIT_SEARCH_POLISH_EVALS: usize = 300;
/// Exploration first minimizes the Schatten norm of this order, a smooth
/// stand-in for the operator norm.
pub const ORBIT_SCHATTEN_ORDER: f64 = 8.0;
/// Initial step scale of exploration.
pub const ORBIT_INITIAL_STEP: f64 = 0.3;
/// Initial step scale of covariance-adapted polishing.
pub const ORBIT_POLISH_STEP: f64 = 0.05;
/// Step growth after an improvement in exploration; the step shrinks by its
/// fourth root after a failure, which targets a one-in-five success rate.
pub const ORBIT_STEP_GROWTH: f64 = 1.5;
/// Two singular value lists are compared entrywise up to this tolerance.
pub const ORBIT_COMPARE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct OrbitSearch {
    pub best: f64,
    pub u: CMatrix,
    pub evaluations: usize,
    /// Exchange searches run after exploration.
    pub exchange_searches: usize,
}

/// Local search for `min_u ‖u a u* - b‖` over the unitary group.
///
/// 1. Free exploration: from the identity and a Haar-random start, a (1+1)
///    evolution strategy on the Schatten norm (candidate `u · cayley(σ K)`,
///    `K` Gaussian skew-hermitian), then a (1+1)-CMA-ES on the operator norm.
/// 2. [`ORBIT_EXCHANGE_SEARCHES`] exchange searches from Haar-random starts.
///    Each first minimizes `‖u a u* - b‖_F`, whose minimizers make `u a u*`
///    commute with `b`. Then, with `x_i` the left singular vectors of
///    `u a u* - b`, each candidate composes `u` with the unitary permuting a
///    few of the `x_i` among themselves (every derangement of every subset of
///    at most [`ORBIT_MAX_CYCLE`] of them). The candidate with the
///    lexicographically smallest decreasing list of singular values replaces
///    `u` while it improves; an operator-norm polish ends the search.
/// 3. A final operator-norm polish of the best point.
///
/// The searches run concurrently; all seeds derive from `seed`, so the result
/// is deterministic. `budget` counts objective evaluations.
pub fn minimize_orbit_distance(a: &NormalMatrix, b: &NormalMatrix, budget: usize, seed: u64) -> Result<OrbitSearch> {
    check_dims(a, b)?;
    if budget == 0 {
        return Err(Error::invalid("budget", "must be positive"));
    }
    let n = a.n();
    let (am, bm) = (a.matrix(), b.matrix());
    let rng_for = |stream: u64| ChaCha8Rng::seed_from_u64(seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let residual = |u: &CMatrix| u * am * u.adjoint() - bm;
    let schatten = |u: &CMatrix| {
        let sv = residual(u).singular_values();
        sv.iter().map(|s| s.powf(ORBIT_SCHATTEN_ORDER)).sum::<f64>().powf(1.0 / ORBIT_SCHATTEN_ORDER)
    };
    let frob = |u: &CMatrix| frobenius(&residual(u));
    let operator = |u: &CMatrix| orbit_distance(u, am, bm);

    let restarts = ORBIT_RESTARTS.min(budget);
    let explore = (budget as f64 * ORBIT_EXPLORE_FRACTION) as usize;
    let mut candidates: Vec<(f64, CMatrix)> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng_for(r as u64);
            let start = if r == 0 { CMatrix::identity(n, n) } else { random_unitary(n, &mut rng) };
            let evals = split(explore, restarts, r);
            let u = evolve(&schatten, start, ORBIT_INITIAL_STEP, evals / 2, &mut rng);
            let u = evolve_cma(&operator, u, ORBIT_POLISH_STEP, evals - evals / 2, &mut rng);
            (operator(&u), u)
        })
        .collect();
    let mut used = explore.max(restarts) + restarts;

    let moves = exchange_moves(n);
    let reserve = (budget as f64 * ORBIT_FINAL_FRACTION) as usize;
    // Each search stops after this many exchange steps.
    let max_steps = 4 * n;
    let search_cost = ORBIT_ALIGN_EVALS + max_steps * (moves.len() + 1) + ORBIT_SEARCH_POLISH_EVALS + 1;
    let searches = (budget.saturating_sub(used + reserve) / search_cost).min(ORBIT_EXCHANGE_SEARCHES);
    let searched: Vec<(f64, CMatrix, usize)> = (0..searches)
        .into_par_iter()
        .map(|k| {
            let mut rng = rng_for(restarts as u64 + k as u64);
            let start = random_unitary(n, &mut rng);
            let u = evolve(&frob, start, ORBIT_INITIAL_STEP, ORBIT_ALIGN_EVALS / 2, &mut rng);
            let mut u = evolve_cma(&frob, u, ORBIT_POLISH_STEP, ORBIT_ALIGN_EVALS - ORBIT_ALIGN_EVALS / 2, &mut rng);
            let mut sv = sorted_singular_values(&residual(&u));
            let mut evals = ORBIT_ALIGN_EVALS + 1;
            for _ in 0..max_steps {
                let left = residual(&u).svd(true, false).u.expect("requested");
                let mut improved = None;
                for m in &moves {
                    let cand = m.apply(&left) * &u;
                    let csv = sorted_singular_values(&residual(&cand));
                    evals += 1;
                    let incumbent = improved.as_ref().map_or(&sv, |(s, _)| s);
                    if lexicographically_less(&csv, incumbent) {
                        improved = Some((csv, cand));
                    }
                }
                match improved {
                    Some((s, c)) => {
                        sv = s;
                        u = c;
                    }
                    None => break,
                }
            }
            let u = evolve_cma(&operator, u, ORBIT_POLISH_STEP, ORBIT_SEARCH_POLISH_EVALS, &mut rng);
            evals += ORBIT_SEARCH_POLISH_EVALS + 1;
            (operator(&u), u, evals)
        })
        .collect();
    used += searches * search_cost;
    candidates.extend(searched.into_iter().map(|(v, u, _)| (v, u)));
    let (mut best, mut u) = candidates
        .into_iter()
        .reduce(|x, y| if y.0 < x.0 { y } else { x })
        .expect("at least one run");

    let rest = budget.saturating_sub(used + 1);
    if rest > 0 {
        let mut rng = rng_for(u64::MAX - 1);
        let cand = evolve_cma(&operator, u.clone(), ORBIT_POLISH_STEP, rest, &mut rng);
        let value = operator(&cand);
        if value < best {
            best = value;
            u = cand;
        }
    }
    Ok(OrbitSearch {
        best,
        u,
        evaluations: budget.max(used),
        exchange_searches: searches,
    })
}

/// Largest number of directions permuted by one exchange move.
pub const ORBIT_MAX_CYCLE: usize = 4;

/// Permutation of some of the directions of a basis: `(from, to)` pairs.
struct ExchangeMove {
    map: Vec<(usize, usize)>,
}

impl ExchangeMove {
    /// The unitary sending `basis[from]` to `basis[to]` for every pair and
    /// fixing the complement of the moved directions.
    fn apply(&self, basis: &CMatrix) -> CMatrix {
        let n = basis.nrows();
        let mut r = CMatrix::identity(n, n);
        for &(from, to) in &self.map {
            let (x, y) = (basis.column(from), basis.column(to));
            r += y * x.adjoint() - x * x.adjoint();
        }
        r
    }
}

/// Derangements of every subset of at most [`ORBIT_MAX_CYCLE`] indices.
fn exchange_moves(n: usize) -> Vec<ExchangeMove> {
    fn subsets(n: usize, k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            subsets(n, k, i + 1, cur, out);
            cur.pop();
        }
    }
    fn derangements(k: usize, cur: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
        let i = cur.len();
        if i == k {
            out.push(cur.clone());
            return;
        }
        for j in 0..k {
            if j != i && !used[j] {
                used[j] = true;
                cur.push(j);
                derangements(k, cur, used, out);
                cur.pop();
                used[j] = false;
            }
        }
    }
    let mut moves = Vec::new();
    for k in 2..=ORBIT_MAX_CYCLE.min(n) {
        let mut sets = Vec::new();
        subsets(n, k, 0, &mut Vec::new(), &mut sets);
        let mut perms = Vec::new();
        derangements(k, &mut Vec::new(), &mut vec![false; k], &mut perms);
        for set in &sets {
            for p in &perms {
                moves.push(ExchangeMove {
                    map: (0..k).map(|i| (set[i], set[p[i]])).collect(),
                });
            }
        }
    }
    moves
}

fn sorted_singular_values(m: &CMatrix) -> Vec<f64> {
    let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    sv
}

fn lexicographically_less(x: &[f64], y: &[f64]) -> bool {
    for (a, b) in x.iter().zip(y) {
        if a < &(b - ORBIT_COMPARE_TOLERANCE) {
            return true;
        }
        if a > &(b + ORBIT_COMPARE_TOLERANCE) {
            return false;
        }
    }
    false
}

fn split(total: usize, parts: usize, k: usize) -> usize {
    total / parts + usize::from(k < total % parts)
}

fn evolve(objective: &dyn Fn(&CMatrix) -> f64, start: CMatrix, step: f64, evals: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let n = start.nrows();
    let mut u = start;
    let mut step = step;
    let mut current = objective(&u);
    let shrink = ORBIT_STEP_GROWTH.powf(-0.25);
    for e in 0..evals {
        let k = random_skew_hermitian(n, step, rng);
        let mut cand = &u * cayley(&k);
        if e % 64 == 63 {
            cand = reunitarize(&cand);
        }
        let value = objective(&cand);
        if value < current {
            u = cand;
            current = value;
            step *= ORBIT_STEP_GROWTH;
        } else {
            step = (step * shrink).max(1e-12);
        }
    }
    reunitarize(&u)
}

/// (1+1)-CMA-ES with a Cholesky-factored covariance, in the chart
/// `x ↦ u0 · cayley(K(x))` around `start`. Returns the best unitary found.
fn evolve_cma(objective: &dyn Fn(&CMatrix) -> f64, start: CMatrix, step: f64, evals: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let n = start.nrows();
    let dim = n * n;
    let chart = |x: &DVector<f64>| &start * cayley(&skew_from_coordinates(n, x));
    let df = dim as f64;
    let damping = 1.0 + df / 2.0;
    let target = 2.0 / 11.0;
    let c_p = target / (2.0 + target);
    let c_c = 2.0 / (df + 2.0);
    let c_cov = 2.0 / (df * df + 6.0);
    let threshold = 0.44;
    let mut x = DVector::zeros(dim);
    let mut fx = objective(&start);
    let mut sigma = step;
    let mut a = DMatrix::<f64>::identity(dim, dim);
    let mut a_inv = DMatrix::<f64>::identity(dim, dim);
    let mut p_succ = target;
    let mut p_c = DVector::<f64>::zeros(dim);
    for _ in 0..evals {
        let z = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let az = &a * &z;
        let y = &x + &az * sigma;
        let fy = objective(&chart(&y));
        let success = fy <= fx;
        p_succ = (1.0 - c_p) * p_succ + c_p * f64::from(u8::from(success));
        sigma *= ((p_succ - target) / (damping * (1.0 - target))).exp();
        if success {
            x = y;
            fx = fy;
            if p_succ < threshold {
                p_c = &p_c * (1.0 - c_c) + &az * (c_c * (2.0 - c_c)).sqrt();
                let w = &a_inv * &p_c;
                let w2 = w.norm_squared();
                if w2 > 0.0 {
                    let alpha = (1.0 - c_cov).sqrt();
                    let beta = alpha / w2 * ((1.0 + c_cov / (1.0 - c_cov) * w2).sqrt() - 1.0);
                    a = &a * alpha + &p_c * w.transpose() * beta;
                    let gamma = 1.0 / alpha / w2 * (1.0 - 1.0 / (1.0 + c_cov / (1.0 - c_cov) * w2).sqrt());
                    a_inv = &a_inv / alpha - &w * (w.transpose() * &a_inv) * gamma;
                }
            } else {
                p_c *= 1.0 - c_c;
            }
        }
        if sigma < 1e-14 {
            break;
        }
    }
    reunitarize(&chart(&x))
}

fn skew_from_coordinates(n: usize, x: &DVector<f64>) -> CMatrix {
    let mut k = CMatrix::zeros(n, n);
    let mut c = 0;
    for i in 0..n {
        k[(i, i)] = C64::new(0.0, x[c]);
        c += 1;
        for j in i + 1..n {
            let z = C64::new(x[c], x[c + 1]) * std::f64::consts::FRAC_1_SQRT_2;
            c += 2;
            k[(i, j)] = z;
            k[(j, i)] = -z.conj();
        }
    }
    k
}

fn random_skew_hermitian(n: usize, scale: f64, rng: &mut impl Rng) -> CMatrix {
    let mut k = CMatrix::zeros(n, n);
    for i in 0..n {
        let d: f64 = rng.sample(StandardNormal);
        k[(i, i)] = C64::new(0.0, scale * d);
        for j in i + 1..n {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            let z = C64::new(re, im) * (scale / std::f64::consts::SQRT_2);
            k[(i, j)] = z;
            k[(j, i)] = -z.conj();
        }
    }
    k
}

/// `(1 - K/2)^{-1} (1 + K/2)`, unitary for skew-hermitian `K`.
fn cayley(k: &CMatrix) -> CMatrix {
    let n = k.nrows();
    let half = k * C64::new(0.5, 0.0);
    let id = CMatrix::identity(n, n);
    let lhs = &id - &half;
    let rhs = &id + &half;
    lhs.lu().solve(&rhs).expect("1 - K/2 is invertible for skew-hermitian K")
}

/// Nearest unitary (polar factor).
fn reunitarize(u: &CMatrix) -> CMatrix {
    let svd = u.clone().svd(true, true);
    svd.u.expect("requested") * svd.v_t.expect("requested")
}

/// Haar-distributed unitary: QR of a complex Ginibre matrix with the phases
/// of `R`'s diagonal moved into `Q`.
pub fn random_unitary(n: usize, rng: &mut impl Rng) -> CMatrix {
    let g = CMatrix::from_fn(n, n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re, im)
    });
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let mut out = q;
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..n {
            out[(i, j)] *= phase;
        }
    }
    out
}

/// `w diag(values) w*` for a Haar-random `w`.
pub fn random_with_spectrum(values: &[C64], class: MatrixClass, rng: &mut impl Rng) -> Result<NormalMatrix> {
    let n = values.len();
    let w = random_unitary(n, rng);
    let d = CMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(values));
    let mut m = &w * d * w.adjoint();
    if class == MatrixClass::Hermitian {
        m = (&m + m.adjoint()) * C64::new(0.5, 0.0);
    }
    NormalMatrix::new(m, class)
}

pub fn random_hermitian(n: usize, rng: &mut impl Rng) -> NormalMatrix {
    let values: Vec<C64> = (0..n).map(|_| C64::new(rng.random_range(-1.0..1.0), 0.0)).collect();
    random_with_spectrum(&values, MatrixClass::Hermitian, rng).expect("hermitian by construction")
}

pub fn random_unitary_matrix(n: usize, rng: &mut impl Rng) -> NormalMatrix {
    let values: Vec<C64> = (0..n).map(|_| C64::from_polar(1.0, rng.random_range(0.0..TAU))).collect();
    random_with_spectrum(&values, MatrixClass::Unitary, rng).expect("unitary by construction")
}

pub fn random_normal(n: usize, rng: &mut impl Rng) -> NormalMatrix {
    let values: Vec<C64> = (0..n)
        .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    random_with_spectrum(&values, MatrixClass::Normal, rng).expect("normal by construction")
}

/// Scalar functions of a complex variable used to probe the spectral
/// distance; each must be 1-Lipschitz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LipschitzFn {
    Identity,
    /// `z ↦ a z + b`.
    Affine { a: [f64; 2], b: [f64; 2] },
    /// Distance to a union of closed discs `(center, radius)`.
    DistanceToDiscs { discs: Vec<([f64; 2], f64)> },
    /// `z ↦ g(Re(e^{-iθ} z))` with `g` piecewise linear through `knots`,
    /// constant outside them.
    Ridge { theta: f64, knots: Vec<(f64, f64)> },
    /// Reflection across the line `Re(e^{-iθ} z) = offset` of the half-plane
    /// beyond it.
    Fold { theta: f64, offset: f64 },
}

impl LipschitzFn {
    pub fn name(&self) -> String {
        match self {
            LipschitzFn::Identity => "identity".into(),
            LipschitzFn::Affine { a, b } => format!("affine(a={:?}, b={:?})", a, b),
            LipschitzFn::DistanceToDiscs { discs } => format!("distance_to_discs({})", discs.len()),
            LipschitzFn::Ridge { theta, knots } => format!("ridge(theta={theta:.4}, {} knots)", knots.len()),
            LipschitzFn::Fold { theta, offset } => format!("fold(theta={theta:.4}, offset={offset:.4})"),
        }
    }

    /// Structural checks: finite parameters, nonnegative radii, knots
    /// strictly increasing.
    pub fn validate(&self) -> Result<()> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        let ok = match self {
            LipschitzFn::Identity => true,
            LipschitzFn::Affine { a, b } => finite(a) && finite(b),
            LipschitzFn::DistanceToDiscs { discs } => {
                !discs.is_empty() && discs.iter().all(|(c, r)| finite(c) && r.is_finite() && *r >= 0.0)
            }
            LipschitzFn::Ridge { theta, knots } => {
                theta.is_finite()
                    && !knots.is_empty()
                    && knots.iter().all(|k| k.0.is_finite() && k.1.is_finite())
                    && knots.windows(2).all(|w| w[1].0 > w[0].0)
            }
            LipschitzFn::Fold { theta, offset } => theta.is_finite() && offset.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("function", format!("malformed parameters in {}", self.name())))
        }
    }

    pub fn apply(&self, z: C64) -> C64 {
        match self {
            LipschitzFn::Identity => z,
            LipschitzFn::Affine { a, b } => C64::new(a[0], a[1]) * z + C64::new(b[0], b[1]),
            LipschitzFn::DistanceToDiscs { discs } => {
                let d = discs
                    .iter()
                    .map(|(c, r)| ((z - C64::new(c[0], c[1])).norm() - r).max(0.0))
                    .fold(f64::INFINITY, f64::min);
                C64::new(d, 0.0)
            }
            LipschitzFn::Ridge { theta, knots } => {
                let t = (z * C64::from_polar(1.0, -theta)).re;
                C64::new(crate::measure::interpolate(knots, t, |k| k.0, |k| k.1), 0.0)
            }
            LipschitzFn::Fold { theta, offset } => {
                let rot = C64::from_polar(1.0, *theta);
                let w = z / rot;
                if w.re > *offset {
                    C64::new(2.0 * offset - w.re, w.im) * rot
                } else {
                    z
                }
            }
        }
    }

    /// Largest ratio `|f(z) - f(w)| / |z - w|` over neighbouring points of a
    /// `points × points` grid on the square `center ± half_width`.
    pub fn grid_lipschitz_ratio(&self, center: C64, half_width: f64, points: usize) -> f64 {
        let h = 2.0 * half_width / (points - 1) as f64;
        let at = |i: usize, j: usize| center + C64::new(-half_width + h * i as f64, -half_width + h * j as f64);
        let mut worst = 0.0f64;
        for i in 0..points {
            for j in 0..points {
                let z = at(i, j);
                let fz = self.apply(z);
                for (di, dj) in [(1usize, 0usize), (0, 1), (1, 1)] {
                    if i + di < points && j + dj < points {
                        let w = at(i + di, j + dj);
                        worst = worst.max((self.apply(w) - fz).norm() / (w - z).norm());
                    }
                }
                if j + 1 < points && i > 0 {
                    let w = at(i - 1, j + 1);
                    worst = worst.max((self.apply(w) - fz).norm() / (w - z).norm());
                }
            }
        }
        worst
    }
}

/// Grid resolution of the Lipschitz check.
pub const LIPSCHITZ_GRID_POINTS: usize = 81;
pub const LIPSCHITZ_GRID_TOLERANCE: f64 = 1e-9;
pub const PROBE_TOLERANCE: f64 = 1e-8;

/// Random 1-Lipschitz functions on the square `center ± half_width`.
pub fn random_lipschitz_family(count: usize, center: C64, half_width: f64, rng: &mut impl Rng) -> Vec<LipschitzFn> {
    let point = |rng: &mut dyn rand::RngCore| {
        [
            center.re + half_width * (2.0 * rng.random::<f64>() - 1.0),
            center.im + half_width * (2.0 * rng.random::<f64>() - 1.0),
        ]
    };
    (0..count)
        .map(|k| match k % 4 {
            0 => {
                let a = C64::from_polar(rng.random_range(0.0..1.0), rng.random_range(0.0..TAU));
                LipschitzFn::Affine {
                    a: [a.re, a.im],
                    b: point(rng),
                }
            }
            1 => LipschitzFn::DistanceToDiscs {
                discs: (0..rng.random_range(1..4))
                    .map(|_| (point(rng), rng.random_range(0.0..0.5) * half_width))
                    .collect(),
            },
            2 => {
                let knots_n = rng.random_range(2..7);
                let mut t = -2.0 * half_width - center.norm();
                let mut v = 0.0;
                let span = 2.0 * (2.0 * half_width + center.norm());
                let mut knots = vec![(t, v)];
                for _ in 1..knots_n {
                    let dt = span / (knots_n - 1) as f64;
                    t += dt;
                    v += rng.random_range(-1.0..1.0) * dt;
                    knots.push((t, v));
                }
                LipschitzFn::Ridge {
                    theta: rng.random_range(0.0..TAU),
                    knots,
                }
            }
            _ => LipschitzFn::Fold {
                theta: rng.random_range(0.0..TAU),
                offset: rng.random_range(-1.0..1.0) * half_width,
            },
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub delta: f64,
    pub rows: Vec<ProbeRow>,
    pub sup: f64,
    pub certificate: Certificate,
}

/// δ(f(a), f(b)) for each probe `f`, after checking that every `f` is
/// 1-Lipschitz on a square containing both spectra.
pub fn lipschitz_probe(a: &NormalMatrix, b: &NormalMatrix, family: &[LipschitzFn]) -> Result<ProbeReport> {
    check_dims(a, b)?;
    let sa = a.spectral_data().eigenvalues;
    let sb = b.spectral_data().eigenvalues;
    let all: Vec<C64> = sa.iter().chain(&sb).copied().collect();
    let (mut lo, mut hi) = (C64::new(f64::INFINITY, f64::INFINITY), C64::new(f64::NEG_INFINITY, f64::NEG_INFINITY));
    for z in &all {
        lo = C64::new(lo.re.min(z.re), lo.im.min(z.im));
        hi = C64::new(hi.re.max(z.re), hi.im.max(z.im));
    }
    let center = (lo + hi) * 0.5;
    let half_width = 0.5 * (hi.re - lo.re).max(hi.im - lo.im) + 0.1;
    let delta = match_spectra(&sa, &sb, common_class(a.class, b.class)).value;
    let mut rows = Vec::with_capacity(family.len());
    for f in family {
        f.validate()?;
        let ratio = f.grid_lipschitz_ratio(center, half_width, LIPSCHITZ_GRID_POINTS);
        if ratio > 1.0 + LIPSCHITZ_GRID_TOLERANCE {
            return Err(Error::NotLipschitz { name: f.name(), ratio });
        }
        let fa: Vec<C64> = sa.iter().map(|&z| f.apply(z)).collect();
        let fb: Vec<C64> = sb.iter().map(|&z| f.apply(z)).collect();
        let d = DistanceMatrix::from_fn(fa.len(), |i, j| (fa[i] - fb[j]).norm())?;
        rows.push(ProbeRow {
            name: f.name(),
            value: bottleneck_match(&d).bottleneck_value,
        });
    }
    let sup = rows.iter().map(|r| r.value).fold(0.0, f64::max);
    Ok(ProbeReport {
        delta,
        certificate: Certificate::le("sup_f delta(f(a), f(b)) <= delta(a, b)", sup, delta, PROBE_TOLERANCE),
        rows,
        sup,
    })
}
