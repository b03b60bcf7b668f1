//! Approximate continuous transport on the full circle.
//!
//! Both measures are discretized on `2^depth` arcs with a common
//! denominator `M = 2^(depth + 8)`. The discrete supports are matched by the
//! best cyclic shift and joined by a homeomorphism that is linear in the
//! angle between consecutive anchors.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::{chordal, circular_gap, cyclic_bottleneck_match};
use crate::measure::CdfMeasure;
use crate::report::Certificate;

/// Extra bits of the common denominator beyond the number of arcs.
pub const DENOMINATOR_EXTRA_BITS: u32 = 8;
/// Largest supported depth; `M` is then `2^22`.
pub const MAX_DEPTH: u32 = 14;

/// A diffuse, fully supported measure on the circle seen through the
/// normalized angle `u = θ / 2π ∈ [0, 1)`.
pub trait CircleDistribution {
    /// Mass of the arc `[0, 2πu)`.
    fn cdf(&self, u: f64) -> f64;
    /// The `u` with `cdf(u) = p`.
    fn quantile(&self, p: f64) -> f64;
}

/// Discretization of one measure: `M` angles, `counts[i]` of them in arc `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct CircleSample {
    pub angles: Vec<f64>,
    pub counts: Vec<usize>,
    /// Arc endpoints (normalized) after moving them to multiples of `1/M`
    /// in mass; arc `i` is `[boundaries[i], boundaries[i + 1])`.
    pub boundaries: Vec<f64>,
    /// Largest chordal diameter of an arc; bounds δ against the measure.
    pub cell_bound: f64,
}

/// Discretizes `mu` at `depth`.
///
/// Arc `i` of the equal partition gets endpoints moved to
/// `Q(round(M F(i / 2^depth)) / M)`, so each moved arc has mass exactly
/// `k_i / M`. Its `k_i` points sit at the conditional mid-quantiles, which are
/// the global quantiles `(j + 1/2) / M`.
pub fn discretize_distribution<D: CircleDistribution + ?Sized>(
    mu: &D,
    depth: u32,
    radius: f64,
) -> Result<CircleSample> {
    check_depth(depth)?;
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::invalid("radius", format!("{radius} is not positive")));
    }
    let cells = 1usize << depth;
    let m = 1usize << (depth + DENOMINATOR_EXTRA_BITS);
    let mf = m as f64;
    let mut rounded = Vec::with_capacity(cells + 1);
    rounded.push(0usize);
    for i in 1..cells {
        let r = (mf * mu.cdf(i as f64 / cells as f64)).round() as usize;
        rounded.push(r.clamp(rounded[i - 1], m));
    }
    rounded.push(m);

    let mut boundaries = Vec::with_capacity(cells + 1);
    boundaries.push(0.0);
    for &r in &rounded[1..cells] {
        boundaries.push(if r == 0 { 0.0 } else if r == m { 1.0 } else { mu.quantile(r as f64 / mf) });
    }
    boundaries.push(1.0);
    let counts: Vec<usize> = rounded.windows(2).map(|w| w[1] - w[0]).collect();

    let mut angles = Vec::with_capacity(m);
    for j in 0..m {
        let a = TAU * mu.quantile((j as f64 + 0.5) / mf);
        if !(0.0..TAU).contains(&a) || angles.last().is_some_and(|&prev| a <= prev) {
            return Err(Error::Numerical(format!(
                "discretization points collide at depth {depth}; density too concentrated"
            )));
        }
        angles.push(a);
    }
    let cell_bound = boundaries
        .windows(2)
        .map(|w| {
            let len = TAU * (w[1] - w[0]);
            if len >= PI {
                2.0 * radius
            } else {
                2.0 * radius * (len / 2.0).sin()
            }
        })
        .fold(0.0, f64::max);
    Ok(CircleSample {
        angles,
        counts,
        boundaries,
        cell_bound,
    })
}

fn check_depth(depth: u32) -> Result<()> {
    if depth == 0 || depth > MAX_DEPTH {
        return Err(Error::invalid("depth", format!("{depth} outside 1..={MAX_DEPTH}")));
    }
    Ok(())
}

/// Simultaneous discretization of the target `mu` (points `t`) and the
/// source `nu` (points `s`).
#[derive(Debug, Clone, PartialEq)]
pub struct CircleDiscretization {
    pub depth: u32,
    pub m: usize,
    pub radius: f64,
    /// Points of `ν_n`, anticlockwise.
    pub s_angles: Vec<f64>,
    /// Points of `μ_n`, anticlockwise.
    pub t_angles: Vec<f64>,
    pub s_counts: Vec<usize>,
    pub t_counts: Vec<usize>,
    /// Bound on δ(ν, ν_n).
    pub s_bound: f64,
    /// Bound on δ(μ_n, μ).
    pub t_bound: f64,
}

impl CircleDiscretization {
    pub fn cell_bound(&self) -> f64 {
        self.s_bound.max(self.t_bound)
    }
}

pub fn discretize_circle(
    mu: &CdfMeasure,
    nu: &CdfMeasure,
    depth: u32,
    radius: f64,
) -> Result<CircleDiscretization> {
    let t = discretize_distribution(mu, depth, radius)?;
    let s = discretize_distribution(nu, depth, radius)?;
    Ok(CircleDiscretization {
        depth,
        m: t.angles.len(),
        radius,
        s_angles: s.angles,
        t_angles: t.angles,
        s_counts: s.counts,
        t_counts: t.counts,
        s_bound: s.cell_bound,
        t_bound: t.cell_bound,
    })
}

/// Orientation-preserving circle homeomorphism with `h(s_i) = t_i`, linear in
/// the angle on each arc between anchors.
///
/// `s` is strictly increasing in `[0, 2π)`. `t` is a lift: strictly
/// increasing with `t_last < t_0 + 2π`, so arc `[s_i, s_{i+1}]` goes onto
/// `[t_i, t_{i+1}]` anticlockwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCircleMap")]
pub struct CircleHomeomorphism {
    anchors: Vec<(f64, f64)>,
    /// Largest chordal distance between matched anchors.
    displacement: f64,
    radius: f64,
}

#[derive(Deserialize)]
struct RawCircleMap {
    anchors: Vec<(f64, f64)>,
    displacement: f64,
    radius: f64,
}

impl TryFrom<RawCircleMap> for CircleHomeomorphism {
    type Error = Error;

    fn try_from(raw: RawCircleMap) -> Result<Self> {
        let h = Self::from_anchors(raw.anchors, raw.radius)?;
        if h.displacement != raw.displacement {
            return Err(Error::invalid(
                "displacement",
                format!("{} does not match the anchors ({})", raw.displacement, h.displacement),
            ));
        }
        Ok(h)
    }
}

impl CircleHomeomorphism {
    pub fn from_anchors(anchors: Vec<(f64, f64)>, radius: f64) -> Result<Self> {
        if anchors.is_empty() {
            return Err(Error::invalid("anchors", "at least one anchor is required"));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::invalid("radius", format!("{radius} is not positive")));
        }
        if anchors.iter().any(|(s, t)| !(0.0..TAU).contains(s) || !t.is_finite()) {
            return Err(Error::invalid("anchors", "sources must lie in [0, 2π), targets must be finite"));
        }
        if anchors.windows(2).any(|w| !(w[1].0 > w[0].0 && w[1].1 > w[0].1)) {
            return Err(Error::invalid("anchors", "anchors must be strictly increasing"));
        }
        if anchors[anchors.len() - 1].1 >= anchors[0].1 + TAU {
            return Err(Error::invalid("anchors", "targets wind more than once"));
        }
        let displacement = anchors
            .iter()
            .map(|&(s, t)| chordal(s, t, radius))
            .fold(0.0, f64::max);
        Ok(Self {
            anchors,
            displacement,
            radius,
        })
    }

    pub fn anchors(&self) -> &[(f64, f64)] {
        &self.anchors
    }

    pub fn displacement(&self) -> f64 {
        self.displacement
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Anchor `k` and its successor, with the wrap-around shifted by `2π`.
    fn segment(&self, a: usize) -> ((f64, f64), (f64, f64)) {
        let m = self.anchors.len();
        let p = self.anchors[a];
        let q = if a + 1 < m {
            self.anchors[a + 1]
        } else {
            (self.anchors[0].0 + TAU, self.anchors[0].1 + TAU)
        };
        (p, q)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let x = reduce(x);
        let k = self.anchors.partition_point(|a| a.0 <= x);
        let (p, q) = if k == 0 {
            let (p, q) = self.segment(self.anchors.len() - 1);
            ((p.0 - TAU, p.1 - TAU), (q.0 - TAU, q.1 - TAU))
        } else {
            self.segment(k - 1)
        };
        if x == p.0 {
            return reduce(p.1);
        }
        reduce(p.1 + (x - p.0) / (q.0 - p.0) * (q.1 - p.1))
    }

    pub fn inverse_eval(&self, y: f64) -> f64 {
        let t0 = self.anchors[0].1;
        let y = t0 + (y - t0).rem_euclid(TAU);
        let k = self.anchors.partition_point(|a| a.1 <= y).max(1);
        let (p, q) = self.segment(k - 1);
        if y == p.1 {
            return reduce(p.0);
        }
        reduce(p.0 + (y - p.1) / (q.1 - p.1) * (q.0 - p.0))
    }

    /// Exact `sup_x d(h(x), x)`. Along an arc the lifted offset `h(x) - x`
    /// is linear, so the sup is at an anchor unless the offset passes an odd
    /// multiple of `π`.
    pub fn sup_displacement(&self) -> f64 {
        let mut worst = 0.0f64;
        for a in 0..self.anchors.len() {
            let (p, q) = self.segment(a);
            let (d0, d1) = (p.1 - p.0, q.1 - q.0);
            let (lo, hi) = (d0.min(d1), d0.max(d1));
            let j = ((lo - PI) / TAU).ceil();
            if PI + TAU * j <= hi {
                return 2.0 * self.radius;
            }
            worst = worst.max(circular_gap(d0, 0.0)).max(circular_gap(d1, 0.0));
        }
        2.0 * self.radius * (worst / 2.0).sin()
    }
}

fn reduce(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Joins `s_i` to the cyclically matched `t_{i+k}`. The displacement equals
/// δ(μ_n, ν_n) up to rounding of the lifted targets.
pub fn build_circle_homeomorphism(disc: &CircleDiscretization) -> Result<CircleHomeomorphism> {
    homeomorphism_between(&disc.s_angles, &disc.t_angles, disc.radius)
}

/// Homeomorphism sending the sorted angles `s` onto the sorted angles `t`
/// along an optimal cyclic matching.
pub fn homeomorphism_between(s: &[f64], t: &[f64], radius: f64) -> Result<CircleHomeomorphism> {
    let cm = cyclic_bottleneck_match(s, t, radius)?;
    let m = s.len();
    if s.windows(2).any(|w| w[1] <= w[0]) || t.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Numerical("coincident anchor angles".into()));
    }
    let k = cm.shift;
    let mut anchors = Vec::with_capacity(m);
    // Whole turns only, so unwrapped targets are kept bit for bit.
    let turns = ((s[0] - t[k]) / TAU).round();
    for (i, &a) in s.iter().enumerate() {
        let wraps = ((i + k) / m) as f64;
        anchors.push((a, t[(i + k) % m] + TAU * (turns + wraps)));
    }
    CircleHomeomorphism::from_anchors(anchors, radius)
}

/// `h_* ν` for a circle homeomorphism `h`.
pub struct CirclePushforward<'a> {
    h: &'a CircleHomeomorphism,
    nu: &'a CdfMeasure,
    /// `F_ν(h⁻¹(0))`.
    offset: f64,
}

impl<'a> CirclePushforward<'a> {
    pub fn new(h: &'a CircleHomeomorphism, nu: &'a CdfMeasure) -> Self {
        let offset = nu.cdf(h.inverse_eval(0.0) / TAU);
        Self { h, nu, offset }
    }
}

impl CircleDistribution for CirclePushforward<'_> {
    fn cdf(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        if u >= 1.0 {
            return 1.0;
        }
        let b = self.h.inverse_eval(TAU * u) / TAU;
        (self.nu.cdf(b) - self.offset).rem_euclid(1.0)
    }

    fn quantile(&self, p: f64) -> f64 {
        let x = TAU * self.nu.quantile((self.offset + p).rem_euclid(1.0));
        self.h.eval(x) / TAU
    }
}

/// One row of [`ApproximateTransportReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthRow {
    pub depth: u32,
    pub points: usize,
    /// Largest anchor displacement of `h_n`, equal to δ(μ_n, ν_n).
    pub anchor_displacement: f64,
    /// `sup_x d(h_n(x), x)` over the whole circle.
    pub sup_displacement: f64,
    /// Bound on δ(ν, ν_n).
    pub nu_bound: f64,
    /// Bound on δ(μ_n, μ).
    pub mu_bound: f64,
    /// Estimate of δ((h_n)_* ν, μ) from a discretization at the same depth.
    pub pushforward_estimate: f64,
    /// Error bound of `pushforward_estimate`.
    pub pushforward_error: f64,
}

impl DepthRow {
    /// `δ(ν, ν_n) + δ(μ_n, μ)`, the bound on the pushforward defect.
    pub fn pushforward_bound(&self) -> f64 {
        self.nu_bound + self.mu_bound
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproximateTransportReport {
    pub radius: f64,
    pub rows: Vec<DepthRow>,
    pub certificates: Vec<Certificate>,
}

impl ApproximateTransportReport {
    pub fn ok(&self) -> bool {
        self.certificates.iter().all(|c| c.ok)
    }
}

pub const CERTIFICATE_TOLERANCE: f64 = 1e-9;

pub fn transport_row(mu: &CdfMeasure, nu: &CdfMeasure, depth: u32, radius: f64) -> Result<(DepthRow, CircleHomeomorphism)> {
    let disc = discretize_circle(mu, nu, depth, radius)?;
    let h = build_circle_homeomorphism(&disc)?;
    let push = discretize_distribution(&CirclePushforward::new(&h, nu), depth, radius)?;
    let est = cyclic_bottleneck_match(&push.angles, &disc.t_angles, radius)?;
    let row = DepthRow {
        depth,
        points: disc.m,
        anchor_displacement: h.displacement(),
        sup_displacement: h.sup_displacement(),
        nu_bound: disc.s_bound,
        mu_bound: disc.t_bound,
        pushforward_estimate: est.matching.bottleneck_value,
        pushforward_error: push.cell_bound + disc.t_bound,
    };
    Ok((row, h))
}

/// Builds `h_n` at every depth and checks the approximate transport
/// inequalities with the estimators available at each depth.
pub fn verify_approximate_transport(
    mu: &CdfMeasure,
    nu: &CdfMeasure,
    depths: &[u32],
    radius: f64,
) -> Result<ApproximateTransportReport> {
    if depths.is_empty() {
        return Err(Error::invalid("depths", "at least one depth is required"));
    }
    if depths.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("depths", "depths must be strictly increasing"));
    }
    let rows = depths
        .iter()
        .map(|&d| transport_row(mu, nu, d, radius).map(|r| r.0))
        .collect::<Result<Vec<_>>>()?;
    let finest = rows.last().expect("nonempty");
    let delta_hi = finest.anchor_displacement + finest.pushforward_bound();
    let tol = CERTIFICATE_TOLERANCE;
    let mut certificates = Vec::new();
    for row in &rows {
        certificates.push(Certificate::le(
            format!("depth {}: pushforward defect lower estimate <= delta(nu,nu_n) + delta(mu_n,mu)", row.depth),
            row.pushforward_estimate - row.pushforward_error,
            row.pushforward_bound(),
            tol,
        ));
        certificates.push(Certificate::le(
            format!("depth {}: displacement <= delta estimate + cell bounds", row.depth),
            row.anchor_displacement,
            delta_hi + row.pushforward_bound(),
            tol,
        ));
    }
    for w in rows.windows(2) {
        certificates.push(Certificate::le(
            format!("depth {} bound <= depth {} bound", w[1].depth, w[0].depth),
            w[1].pushforward_bound(),
            w[0].pushforward_bound(),
            tol,
        ));
    }
    Ok(ApproximateTransportReport {
        radius,
        rows,
        certificates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half_heavy() -> CdfMeasure {
        CdfMeasure::new(vec![(0.0, 0.0), (0.5, 0.25), (1.0, 1.0)]).unwrap()
    }

    #[test]
    fn uniform_cells_are_equal() {
        let s = discretize_distribution(&CdfMeasure::uniform(), 3, 1.0).unwrap();
        assert!(s.counts.iter().all(|&k| k == s.angles.len() / 8));
        let step = s.angles[1] - s.angles[0];
        assert!(s.angles.windows(2).all(|w| (w[1] - w[0] - step).abs() < 1e-12));
        assert!((s.cell_bound - 2.0 * (PI / 8.0).sin()).abs() < 1e-12);
    }

    #[test]
    fn depth_one_counts_follow_masses() {
        let s = discretize_distribution(&half_heavy(), 1, 1.0).unwrap();
        let m = s.angles.len();
        assert_eq!(s.counts, vec![m / 4, 3 * m / 4]);
    }

    #[test]
    fn bad_depths_rejected() {
        assert!(discretize_distribution(&CdfMeasure::uniform(), 0, 1.0).is_err());
        assert!(discretize_distribution(&CdfMeasure::uniform(), MAX_DEPTH + 1, 1.0).is_err());
    }

    #[test]
    fn identity_when_equal() {
        let mu = half_heavy();
        let disc = discretize_circle(&mu, &mu, 4, 1.0).unwrap();
        let h = build_circle_homeomorphism(&disc).unwrap();
        assert_eq!(h.displacement(), 0.0);
        for k in 0..50 {
            let x = k as f64 * 0.1;
            assert!(circular_gap(h.eval(x), x) < 1e-12);
        }
    }

    #[test]
    fn rotation_is_recovered() {
        let theta = 1.0;
        let mu = CdfMeasure::uniform();
        let disc = discretize_circle(&mu, &mu, 4, 2.0).unwrap();
        let rotated: Vec<f64> = {
            let mut v: Vec<f64> = disc.s_angles.iter().map(|a| reduce(a + theta)).collect();
            v.sort_by(f64::total_cmp);
            v
        };
        let h = homeomorphism_between(&disc.s_angles, &rotated, 2.0).unwrap();
        // the rotated atoms coincide with the originals turned by the
        // smallest representative of theta modulo the atom spacing
        let step = TAU / disc.m as f64;
        let gap = (theta / step - (theta / step).round()).abs() * step;
        assert!((h.displacement() - 4.0 * (gap / 2.0).sin()).abs() < 1e-12);
        assert!((h.sup_displacement() - h.displacement()).abs() < 1e-12);
    }

    #[test]
    fn eval_and_inverse_agree() {
        let mu = half_heavy();
        let nu = CdfMeasure::uniform().rotated(0.3);
        let disc = discretize_circle(&mu, &nu, 3, 1.0).unwrap();
        let h = build_circle_homeomorphism(&disc).unwrap();
        for (s, t) in h.anchors() {
            assert_eq!(h.eval(*s), reduce(*t));
        }
        for k in 0..200 {
            let x = k as f64 * TAU / 200.0;
            assert!(circular_gap(h.inverse_eval(h.eval(x)), x) < 1e-9);
        }
        assert!(h.sup_displacement() >= h.displacement() - 1e-15);
    }

    #[test]
    fn pushforward_matches_target_closely() {
        let mu = half_heavy();
        let nu = CdfMeasure::uniform().rotated(0.4);
        let rep = verify_approximate_transport(&mu, &nu, &[4, 6, 8], 1.0).unwrap();
        assert!(rep.ok(), "{rep:#?}");
        let last = rep.rows.last().unwrap();
        assert!(last.pushforward_bound() < rep.rows[0].pushforward_bound());
    }

    #[test]
    fn serde_round_trip() {
        let h = CircleHomeomorphism::from_anchors(vec![(0.0, 0.5), (1.0, 2.0), (3.0, 6.0)], 1.0).unwrap();
        let json = serde_json::to_string(&h).unwrap();
        let back: CircleHomeomorphism = serde_json::from_str(&json).unwrap();
        assert_eq!(back, h);
        assert!(CircleHomeomorphism::from_anchors(vec![(0.0, 0.5), (1.0, 7.0)], 1.0).is_err());
    }
}
