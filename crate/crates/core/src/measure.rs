//! Metric spaces, measure representations and the optimal matching distance.
//!
//! For uniform measures on `n` points the optimal matching distance is the
//! bottleneck value `min_σ max_i d(x_i, y_σ(i))`. For diffuse measures on an
//! interval it is the uniform distance between quantile functions; on the
//! circle it is estimated from discretizations with an explicit error bound.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::circle::{self, CircleDistribution};
use crate::convex::ConvexBody;
use crate::error::{Error, Result};
use crate::matching::{self, bottleneck_match, DistanceMatrix, Matching};

/// Absolute tolerance used by geometric predicates.
pub const GEOMETRY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum Space {
    Interval { lo: f64, hi: f64 },
    /// Points are angles in `[0, 2π)`; the metric is chordal.
    Circle { radius: f64 },
    Convex(ConvexBody),
}

impl Space {
    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::invalid("interval", format!("need lo < hi, got [{lo}, {hi}]")));
        }
        Ok(Space::Interval { lo, hi })
    }

    pub fn circle(radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::invalid("radius", format!("{radius} is not positive")));
        }
        Ok(Space::Circle { radius })
    }

    pub fn unit_interval() -> Self {
        Space::Interval { lo: 0.0, hi: 1.0 }
    }

    pub fn unit_circle() -> Self {
        Space::Circle { radius: 1.0 }
    }

    /// Number of coordinates of a point.
    pub fn coordinates(&self) -> usize {
        match self {
            Space::Interval { .. } | Space::Circle { .. } => 1,
            Space::Convex(body) => body.dimension(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Space::Interval { .. } => "interval",
            Space::Circle { .. } => "circle",
            Space::Convex(_) => "convex",
        }
    }

    pub fn distance(&self, p: &[f64], q: &[f64]) -> f64 {
        match self {
            Space::Interval { .. } => (p[0] - q[0]).abs(),
            Space::Circle { radius } => matching::chordal(p[0], q[0], *radius),
            Space::Convex(_) => euclidean(p, q),
        }
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        if p.len() != self.coordinates() || p.iter().any(|c| !c.is_finite()) {
            return false;
        }
        match self {
            Space::Interval { lo, hi } => {
                p[0] >= lo - GEOMETRY_TOLERANCE && p[0] <= hi + GEOMETRY_TOLERANCE
            }
            Space::Circle { .. } => true,
            Space::Convex(body) => body.contains(p),
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            Space::Interval { lo, hi } => hi - lo,
            Space::Circle { radius } => 2.0 * radius,
            Space::Convex(body) => body.diameter(),
        }
    }
}

pub fn euclidean(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// Uniform measure on `n` points of a space, each with weight `1/n`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    space: Space,
    points: Vec<Vec<f64>>,
}

impl EmpiricalMeasure {
    /// Circle angles are reduced modulo `2π`.
    pub fn new(space: Space, points: Vec<Vec<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("points", "at least one point is required"));
        }
        let mut points = points;
        for (i, p) in points.iter_mut().enumerate() {
            if p.len() != space.coordinates() {
                return Err(Error::invalid(
                    "points",
                    format!("point {i} has {} coordinates, expected {}", p.len(), space.coordinates()),
                ));
            }
            if matches!(space, Space::Circle { .. }) && p[0].is_finite() {
                p[0] = p[0].rem_euclid(TAU);
                if p[0] >= TAU {
                    p[0] = 0.0;
                }
            }
            if !space.contains(p) {
                return Err(Error::invalid("points", format!("point {i} {p:?} lies outside the space")));
            }
        }
        Ok(Self { space, points })
    }

    /// Convenience constructor for one-coordinate spaces.
    pub fn from_scalars(space: Space, values: &[f64]) -> Result<Self> {
        Self::new(space, values.iter().map(|v| vec![*v]).collect())
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn scalars(&self) -> Vec<f64> {
        self.points.iter().map(|p| p[0]).collect()
    }
}

fn check_pair(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<()> {
    if mu.space != nu.space {
        return Err(Error::SpaceMismatch(format!(
            "{} vs {}",
            mu.space.kind_name(),
            nu.space.kind_name()
        )));
    }
    if mu.len() != nu.len() {
        return Err(Error::SizeMismatch {
            left: mu.len(),
            right: nu.len(),
        });
    }
    Ok(())
}

pub fn distance_matrix(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<DistanceMatrix> {
    check_pair(mu, nu)?;
    DistanceMatrix::from_fn(mu.len(), |i, j| mu.space.distance(&mu.points[i], &nu.points[j]))
}

fn argsort(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    idx
}

/// A bottleneck-optimal matching between the supports, `mu.points[i]` paired
/// with `nu.points[σ(i)]`.
///
/// On the line the ascending matching is optimal; on the circle the best
/// cyclic shift of the anticlockwise orderings is; convex bodies use the
/// general threshold search.
pub fn optimal_matching(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<Matching> {
    check_pair(mu, nu)?;
    let n = mu.len();
    let space = &mu.space;
    let permutation = match space {
        Space::Interval { .. } | Space::Circle { .. } => {
            let (xs, ys) = (mu.scalars(), nu.scalars());
            let (ix, iy) = (argsort(&xs), argsort(&ys));
            let shift = match space {
                Space::Circle { radius } => {
                    let sx: Vec<f64> = ix.iter().map(|&i| xs[i]).collect();
                    let sy: Vec<f64> = iy.iter().map(|&i| ys[i]).collect();
                    matching::cyclic_bottleneck_match(&sx, &sy, *radius)?.shift
                }
                _ => 0,
            };
            let mut perm = vec![0; n];
            for k in 0..n {
                perm[ix[k]] = iy[(k + shift) % n];
            }
            perm
        }
        Space::Convex(_) => return Ok(bottleneck_match(&distance_matrix(mu, nu)?)),
    };
    let mut bottleneck_value = 0.0f64;
    let mut assignment_value = 0.0;
    for (i, &j) in permutation.iter().enumerate() {
        let e = space.distance(&mu.points[i], &nu.points[j]);
        bottleneck_value = bottleneck_value.max(e);
        assignment_value += e;
    }
    Ok(Matching {
        permutation,
        bottleneck_value,
        assignment_value,
    })
}

/// Optimal matching distance between two uniform measures of equal size.
pub fn delta_empirical(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<f64> {
    Ok(optimal_matching(mu, nu)?.bottleneck_value)
}

/// `W₁` between two uniform measures of equal size: the optimal assignment
/// cost divided by `n`.
pub fn wasserstein1_empirical(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<f64> {
    let d = distance_matrix(mu, nu)?;
    Ok(matching::assignment_match(&d).assignment_value / mu.len() as f64)
}

/// Diffuse, fully supported measure on `[0, 1]` given by a strictly
/// increasing piecewise-linear CDF through `(0, 0)` and `(1, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CdfMeasure {
    breakpoints: Vec<(f64, f64)>,
}

impl CdfMeasure {
    pub fn new(breakpoints: Vec<(f64, f64)>) -> Result<Self> {
        if breakpoints.len() < 2 {
            return Err(Error::MalformedCdf("need at least two breakpoints".into()));
        }
        if breakpoints.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
            return Err(Error::MalformedCdf("breakpoints must be finite".into()));
        }
        if breakpoints[0] != (0.0, 0.0) {
            return Err(Error::MalformedCdf(format!(
                "first breakpoint must be (0, 0), got {:?}",
                breakpoints[0]
            )));
        }
        if breakpoints[breakpoints.len() - 1] != (1.0, 1.0) {
            return Err(Error::MalformedCdf(format!(
                "last breakpoint must be (1, 1), got {:?}",
                breakpoints[breakpoints.len() - 1]
            )));
        }
        if let Some(i) = breakpoints
            .windows(2)
            .position(|w| !(w[1].0 > w[0].0 && w[1].1 > w[0].1))
        {
            return Err(Error::MalformedCdf(format!(
                "not strictly increasing between breakpoints {i} and {}",
                i + 1
            )));
        }
        Ok(Self { breakpoints })
    }

    pub fn uniform() -> Self {
        Self {
            breakpoints: vec![(0.0, 0.0), (1.0, 1.0)],
        }
    }

    /// Measure with constant density `weights[i] / Σ weights` relative to
    /// Lebesgue on the `i`-th of `weights.len()` equal subintervals.
    pub fn from_cell_weights(weights: &[f64]) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::MalformedCdf("cell weights must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        let k = weights.len();
        let mut acc = 0.0;
        let mut bps = vec![(0.0, 0.0)];
        for (i, w) in weights.iter().enumerate().take(k - 1) {
            acc += w / total;
            bps.push(((i + 1) as f64 / k as f64, acc));
        }
        bps.push((1.0, 1.0));
        Self::new(bps)
    }

    pub fn breakpoints(&self) -> &[(f64, f64)] {
        &self.breakpoints
    }

    /// `μ[0, t)`.
    pub fn cdf(&self, t: f64) -> f64 {
        interpolate(&self.breakpoints, t, |b| b.0, |b| b.1)
    }

    /// The unique `t` with `cdf(t) = p`.
    pub fn quantile(&self, p: f64) -> f64 {
        interpolate(&self.breakpoints, p, |b| b.1, |b| b.0)
    }

    /// Image of the measure under the rotation `u ↦ u + shift (mod 1)` of
    /// the normalized circle parameter.
    pub fn rotated(&self, shift: f64) -> Self {
        let phi = shift.rem_euclid(1.0);
        if phi == 0.0 {
            return self.clone();
        }
        // New CDF: G(u) = μ[1 - φ, 1) + μ[0, u - φ) for u ≥ φ, μ[1 - φ, 1 - φ + u) below.
        let base = self.cdf(1.0 - phi);
        let tail = 1.0 - base;
        let mut bps = vec![(0.0, 0.0)];
        for &(t, v) in &self.breakpoints {
            if t > 1.0 - phi && t < 1.0 {
                bps.push((t - (1.0 - phi), v - base));
            }
        }
        bps.push((phi, tail));
        for &(t, v) in &self.breakpoints {
            if t > 0.0 && t + phi < 1.0 {
                bps.push((t + phi, tail + v));
            }
        }
        bps.push((1.0, 1.0));
        bps.dedup_by(|b, a| b.0 <= a.0 || b.1 <= a.1);
        Self::new(bps).expect("rotation preserves strict monotonicity")
    }
}

impl CircleDistribution for CdfMeasure {
    fn cdf(&self, u: f64) -> f64 {
        CdfMeasure::cdf(self, u)
    }

    fn quantile(&self, p: f64) -> f64 {
        CdfMeasure::quantile(self, p)
    }
}

/// Evaluates the piecewise-linear function through `points` (sorted by `x`)
/// at `at`, clamping outside the range. Exact at breakpoints.
pub(crate) fn interpolate<T>(points: &[T], at: f64, x: impl Fn(&T) -> f64, y: impl Fn(&T) -> f64) -> f64 {
    let first = &points[0];
    let last = &points[points.len() - 1];
    if at <= x(first) {
        return y(first);
    }
    if at >= x(last) {
        return y(last);
    }
    let k = points.partition_point(|p| x(p) <= at);
    let (a, b) = (&points[k - 1], &points[k]);
    if x(a) == at {
        return y(a);
    }
    let w = (at - x(a)) / (x(b) - x(a));
    y(a) + w * (y(b) - y(a))
}

/// Optimal matching distance between two diffuse measures on `[0, 1]`:
/// `sup_p |Q_μ(p) - Q_ν(p)|`, evaluated exactly on the union of the quantile
/// breakpoints.
pub fn delta_cdf_interval(mu: &CdfMeasure, nu: &CdfMeasure) -> f64 {
    mu.breakpoints
        .iter()
        .chain(&nu.breakpoints)
        .map(|&(_, p)| (mu.quantile(p) - nu.quantile(p)).abs())
        .fold(0.0, f64::max)
}

/// Estimate of the optimal matching distance together with a bound on the
/// estimation error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaEstimate {
    pub estimate: f64,
    pub error_bound: f64,
}

/// Estimates δ between two diffuse circle measures (CDFs in the normalized
/// angle `θ / 2π`) by matching their discretizations at `depth`.
pub fn delta_circle(mu: &CdfMeasure, nu: &CdfMeasure, depth: u32, radius: f64) -> Result<DeltaEstimate> {
    let disc = circle::discretize_circle(mu, nu, depth, radius)?;
    let m = matching::cyclic_bottleneck_match(&disc.t_angles, &disc.s_angles, radius)?;
    Ok(DeltaEstimate {
        estimate: m.matching.bottleneck_value,
        error_bound: disc.t_bound + disc.s_bound,
    })
}
