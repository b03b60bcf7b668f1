//! Brute-force oracles and random instance generators shared by the
//! integration tests. Nothing here calls into the library's solvers.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Calls `f` on every permutation of `0..n` (Heap's algorithm).
pub fn for_each_permutation(n: usize, mut f: impl FnMut(&[usize])) {
    let mut p: Vec<usize> = (0..n).collect();
    let mut c = vec![0usize; n];
    f(&p);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                p.swap(0, i);
            } else {
                p.swap(c[i], i);
            }
            f(&p);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

/// `(min over σ of max_i d[i][σ(i)], min over σ of Σ_i d[i][σ(i)])`, each
/// sum correctly rounded.
pub fn brute_force(d: &[Vec<f64>]) -> (f64, f64) {
    let n = d.len();
    let mut best_max = f64::INFINITY;
    let mut best_sum = f64::INFINITY;
    for_each_permutation(n, |p| {
        let mx = p.iter().enumerate().map(|(i, &j)| d[i][j]).fold(0.0, f64::max);
        best_max = best_max.min(mx);
        best_sum = best_sum.min(rounded_sum(p.iter().enumerate().map(|(i, &j)| d[i][j])));
    });
    (best_max, best_sum)
}

/// Sum of non-negative finite values, exact until one final rounding (half
/// to even): mantissas are added as a big integer in units of `2^-1074`.
pub fn rounded_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    fn add_at(limbs: &mut Vec<u64>, value: u64, shift: usize) {
        let wide = (value as u128) << (shift % 64);
        let mut k = shift / 64;
        let mut carry = wide;
        while carry != 0 {
            if limbs.len() <= k {
                limbs.resize(k + 1, 0);
            }
            let sum = limbs[k] as u128 + (carry as u64) as u128;
            limbs[k] = sum as u64;
            carry = (carry >> 64) + (sum >> 64);
            k += 1;
        }
    }
    let mut limbs: Vec<u64> = Vec::new();
    for v in values {
        assert!(v >= 0.0 && v.is_finite(), "{v}");
        let bits = v.to_bits();
        let raw_exp = (bits >> 52) as usize;
        let frac = bits & ((1 << 52) - 1);
        let (mant, shift) = if raw_exp == 0 { (frac, 0) } else { (frac | (1 << 52), raw_exp - 1) };
        add_at(&mut limbs, mant, shift);
    }
    while limbs.last() == Some(&0) {
        limbs.pop();
    }
    let Some(last) = limbs.last() else {
        return 0.0;
    };
    let top = limbs.len() * 64 - last.leading_zeros() as usize;
    let bit = |i: usize| (limbs[i / 64] >> (i % 64)) & 1;
    let drop = top.saturating_sub(53);
    let mut m: u64 = 0;
    for i in (drop..top).rev() {
        m = (m << 1) | bit(i);
    }
    if drop > 0 {
        let half = bit(drop - 1) == 1;
        let sticky = (0..drop - 1).any(|i| bit(i) == 1);
        if half && (sticky || m & 1 == 1) {
            m += 1;
        }
    }
    // m · 2^(drop - 1074), scaled in two steps to stay in range.
    (m as f64) * 2f64.powi(drop as i32 - 537) * 2f64.powi(-537)
}

pub fn euclid(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

pub fn chord(s: f64, t: f64, radius: f64) -> f64 {
    let gap = (s - t).rem_euclid(TAU);
    2.0 * radius * (gap.min(TAU - gap) / 2.0).sin()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kind {
    Interval,
    Circle,
    Square,
}

pub const KINDS: [Kind; 3] = [Kind::Interval, Kind::Circle, Kind::Square];

impl Kind {
    pub fn diameter(self) -> f64 {
        match self {
            Kind::Interval => 1.0,
            Kind::Circle => 2.0,
            Kind::Square => 2f64.sqrt(),
        }
    }

    pub fn distance(self, p: &[f64], q: &[f64]) -> f64 {
        match self {
            Kind::Interval | Kind::Square => euclid(p, q),
            Kind::Circle => chord(p[0], q[0], 1.0),
        }
    }

    pub fn point(self, rng: &mut impl Rng) -> Vec<f64> {
        match self {
            Kind::Interval => vec![rng.random::<f64>()],
            Kind::Circle => vec![rng.random_range(0.0..TAU)],
            Kind::Square => vec![rng.random::<f64>(), rng.random::<f64>()],
        }
    }

    pub fn points(self, n: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
        (0..n).map(|_| self.point(rng)).collect()
    }
}

pub fn distances(kind: Kind, a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    a.iter().map(|p| b.iter().map(|q| kind.distance(p, q)).collect()).collect()
}

/// Random piecewise-linear CDF on `[0, 1]` with strictly positive slopes.
pub fn random_breakpoints(pieces: usize, rng: &mut impl Rng) -> Vec<(f64, f64)> {
    let mut xs: Vec<f64> = (0..pieces - 1).map(|_| rng.random_range(0.02..0.98)).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
    let weights: Vec<f64> = (0..=xs.len()).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let mut out = vec![(0.0, 0.0)];
    let mut acc = 0.0;
    for (k, x) in xs.iter().enumerate() {
        acc += weights[k] / total;
        out.push((*x, acc));
    }
    out.push((1.0, 1.0));
    out
}

/// Linear interpolation through increasing `(x, y)` knots.
fn interpolate(knots: &[(f64, f64)], x: f64) -> f64 {
    if x <= knots[0].0 {
        return knots[0].1;
    }
    for w in knots.windows(2) {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        if x <= x1 {
            if x1 == x0 {
                return y1;
            }
            return y0 + (y1 - y0) * (x - x0) / (x1 - x0);
        }
    }
    knots[knots.len() - 1].1
}

pub fn oracle_cdf(bp: &[(f64, f64)], t: f64) -> f64 {
    interpolate(bp, t)
}

pub fn oracle_quantile(bp: &[(f64, f64)], p: f64) -> f64 {
    let swapped: Vec<(f64, f64)> = bp.iter().map(|&(x, y)| (y, x)).collect();
    interpolate(&swapped, p)
}

/// `sup_p |Q₁(p) - Q₂(p)|`; both quantiles are linear between the union of
/// breakpoint levels, so the sup is attained there.
pub fn oracle_delta_interval(b1: &[(f64, f64)], b2: &[(f64, f64)]) -> f64 {
    b1.iter()
        .chain(b2)
        .map(|&(_, p)| (oracle_quantile(b1, p) - oracle_quantile(b2, p)).abs())
        .fold(0.0, f64::max)
}

/// `sup_t |Q₁(F_ν(t)) - Q₂(F_ν(t))|`, evaluated at every kink.
pub fn oracle_section_distance(nu: &[(f64, f64)], b1: &[(f64, f64)], b2: &[(f64, f64)]) -> f64 {
    let mut ts: Vec<f64> = nu.iter().map(|b| b.0).collect();
    for &(_, p) in b1.iter().chain(b2) {
        ts.push(oracle_quantile(nu, p));
    }
    ts.iter()
        .map(|&t| {
            let p = oracle_cdf(nu, t);
            (oracle_quantile(b1, p) - oracle_quantile(b2, p)).abs()
        })
        .fold(0.0, f64::max)
}

/// Exact integral of `coef · Π x_k^{p_k}` over a box.
pub fn monomial_integral(coef: f64, powers: &[u32], lo: &[f64], hi: &[f64]) -> f64 {
    powers
        .iter()
        .zip(lo.iter().zip(hi))
        .fold(coef, |acc, (&p, (&a, &b))| {
            let q = p as i32 + 1;
            acc * (b.powi(q) - a.powi(q)) / q as f64
        })
}

/// Largest distance from `atom` to a corner of the box `[lo, hi]`.
pub fn farthest_corner(atom: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    atom.iter()
        .zip(lo.iter().zip(hi))
        .map(|(a, (l, h))| {
            let s = (a - l).abs().max((h - a).abs());
            s * s
        })
        .sum::<f64>()
        .sqrt()
}

/// Complex numbers as `(re, im)` pairs.
pub fn oracle_weyl(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let d: Vec<Vec<f64>> = a
        .iter()
        .map(|&(x, y)| b.iter().map(|&(u, v)| ((x - u).powi(2) + (y - v).powi(2)).sqrt()).collect())
        .collect();
    brute_force(&d).0
}

/// Eigenvalues on the unit circle as `(re, im)`.
pub fn random_unit_values(n: usize, rng: &mut impl Rng) -> Vec<(f64, f64)> {
    (0..n)
        .map(|_| {
            let t: f64 = rng.random_range(0.0..TAU);
            (t.cos(), t.sin())
        })
        .collect()
}

pub fn random_real_values(n: usize, rng: &mut impl Rng) -> Vec<(f64, f64)> {
    (0..n).map(|_| (rng.random_range(-1.0..1.0), 0.0)).collect()
}

pub fn random_complex_values(n: usize, rng: &mut impl Rng) -> Vec<(f64, f64)> {
    (0..n).map(|_| (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
}
