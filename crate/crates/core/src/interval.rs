//! Continuous transport on `[0, 1]` and on circular arcs by the increasing
//! rearrangement `h = Q_μ ∘ F_ν`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{delta_cdf_interval, interpolate, CdfMeasure};

/// Increasing piecewise-linear homeomorphism of `[0, 1]` fixing both ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMap1D")]
pub struct TransportMap1D {
    breakpoints: Vec<(f64, f64)>,
    displacement: f64,
}

#[derive(Deserialize)]
struct RawMap1D {
    breakpoints: Vec<(f64, f64)>,
    displacement: f64,
}

impl TryFrom<RawMap1D> for TransportMap1D {
    type Error = Error;

    fn try_from(raw: RawMap1D) -> Result<Self> {
        let map = Self::new(raw.breakpoints)?;
        if map.displacement != raw.displacement {
            return Err(Error::invalid(
                "displacement",
                format!("{} does not match the breakpoints ({})", raw.displacement, map.displacement),
            ));
        }
        Ok(map)
    }
}

impl TransportMap1D {
    pub fn new(breakpoints: Vec<(f64, f64)>) -> Result<Self> {
        // Same shape constraints as a CDF.
        CdfMeasure::new(breakpoints.clone()).map_err(|e| match e {
            Error::MalformedCdf(r) => Error::invalid("breakpoints", r),
            other => other,
        })?;
        let displacement = breakpoints.iter().map(|(s, h)| (h - s).abs()).fold(0.0, f64::max);
        Ok(Self {
            breakpoints,
            displacement,
        })
    }

    pub fn identity() -> Self {
        Self {
            breakpoints: vec![(0.0, 0.0), (1.0, 1.0)],
            displacement: 0.0,
        }
    }

    pub fn breakpoints(&self) -> &[(f64, f64)] {
        &self.breakpoints
    }

    /// `sup_t |h(t) - t|`, attained at a breakpoint.
    pub fn displacement(&self) -> f64 {
        self.displacement
    }

    pub fn eval(&self, s: f64) -> f64 {
        interpolate(&self.breakpoints, s, |b| b.0, |b| b.1)
    }

    pub fn inverse_eval(&self, t: f64) -> f64 {
        interpolate(&self.breakpoints, t, |b| b.1, |b| b.0)
    }

    /// `sup_t |self(t) - other(t)|`, exact on the union of breakpoints.
    pub fn uniform_distance(&self, other: &TransportMap1D) -> f64 {
        self.breakpoints
            .iter()
            .chain(&other.breakpoints)
            .map(|&(s, _)| (self.eval(s) - other.eval(s)).abs())
            .fold(0.0, f64::max)
    }
}

/// `h = Q_μ ∘ F_ν`, which pushes `ν` onto `μ`.
///
/// The knots are the levels `p` of both CDFs; at level `p` the map sends
/// `Q_ν(p)` to `Q_μ(p)`, and each measure's own breakpoints are used verbatim.
pub fn increasing_rearrangement(mu: &CdfMeasure, nu: &CdfMeasure) -> TransportMap1D {
    let mut knots: Vec<(f64, f64, f64)> = Vec::new();
    for &(t, p) in nu.breakpoints() {
        knots.push((p, t, mu.quantile(p)));
    }
    for &(a, p) in mu.breakpoints() {
        knots.push((p, nu.quantile(p), a));
    }
    knots.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut breakpoints: Vec<(f64, f64)> = Vec::with_capacity(knots.len());
    for (_, s, h) in knots {
        match breakpoints.last() {
            Some(&(ps, ph)) if s <= ps || h <= ph => continue,
            _ => breakpoints.push((s, h)),
        }
    }
    if breakpoints.last() != Some(&(1.0, 1.0)) {
        breakpoints.pop();
        breakpoints.push((1.0, 1.0));
    }
    TransportMap1D::new(breakpoints).expect("composition of increasing maps is increasing")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectionCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub ok: bool,
}

pub const SECTION_TOLERANCE: f64 = 1e-9;

/// Checks `sup_t |σ(μ₁)(t) - σ(μ₂)(t)| <= δ(μ₁, μ₂)` where `σ(μ)` is the
/// increasing rearrangement from `ν`.
pub fn verify_lipschitz_section(nu: &CdfMeasure, mu1: &CdfMeasure, mu2: &CdfMeasure) -> SectionCheck {
    let h1 = increasing_rearrangement(mu1, nu);
    let h2 = increasing_rearrangement(mu2, nu);
    let lhs = h1.uniform_distance(&h2);
    let rhs = delta_cdf_interval(mu1, mu2);
    SectionCheck {
        lhs,
        rhs,
        ok: lhs <= rhs + SECTION_TOLERANCE,
    }
}

/// Transport along an arc of the unit circle subtending `angle`, with the
/// measures given in the normalized arc-length parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArcTransport {
    pub map: TransportMap1D,
    pub angle: f64,
    /// Largest arc-length displacement.
    pub arc_displacement: f64,
    /// `2 sin(arc_displacement / 2)`.
    pub chordal_displacement: f64,
    /// Chordal optimal matching distance on the arc.
    pub chordal_delta: f64,
}

/// Chordal length of an arc of the unit circle.
pub fn chord(arc: f64) -> f64 {
    2.0 * (arc / 2.0).sin()
}

pub fn arc_transport(mu: &CdfMeasure, nu: &CdfMeasure, angle: f64) -> Result<ArcTransport> {
    if !(angle > 0.0 && angle <= PI) {
        return Err(Error::invalid("angle", format!("{angle} outside (0, π]")));
    }
    let map = increasing_rearrangement(mu, nu);
    let arc_displacement = angle * map.displacement();
    // On an arc of at most π the chord is increasing in the arc length, so
    // the chordal δ is the chord of the arc-length δ.
    let chordal_delta = chord(angle * delta_cdf_interval(mu, nu));
    Ok(ArcTransport {
        chordal_displacement: chord(arc_displacement),
        map,
        angle,
        arc_displacement,
        chordal_delta,
    })
}
