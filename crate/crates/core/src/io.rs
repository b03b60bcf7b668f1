//! JSON documents for measures, matrices, transport maps and reports.
//!
//! Numbers are written in the shortest form that parses back to the same
//! `f64`, so every document round-trips field-exactly.

use serde::{Deserialize, Serialize};

use crate::circle::CircleHomeomorphism;
use crate::convex::{ConvexBody, Monomial, PolynomialDensity, TubeHomeomorphism};
use crate::error::{Error, Result};
use crate::interval::TransportMap1D;
use crate::measure::{CdfMeasure, EmpiricalMeasure, Space};
use crate::report::Certificate;
use crate::spectral::{MatrixClass, NormalMatrix};

/// Grid resolution used to check that a polynomial density is positive.
pub const POSITIVITY_GRID: usize = 33;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SpaceDoc {
    Interval { lo: f64, hi: f64 },
    Circle { radius: f64 },
    Convex { dimension: usize, vertices: Vec<Vec<f64>> },
}

impl SpaceDoc {
    pub fn to_space(&self) -> Result<Space> {
        match self {
            SpaceDoc::Interval { lo, hi } => Space::interval(*lo, *hi),
            SpaceDoc::Circle { radius } => Space::circle(*radius),
            SpaceDoc::Convex { dimension, vertices } => {
                Ok(Space::Convex(ConvexBody::new(*dimension, vertices.clone())?))
            }
        }
    }

    pub fn from_space(space: &Space) -> Self {
        match space {
            Space::Interval { lo, hi } => SpaceDoc::Interval { lo: *lo, hi: *hi },
            Space::Circle { radius } => SpaceDoc::Circle { radius: *radius },
            Space::Convex(body) => SpaceDoc::Convex {
                dimension: body.dimension(),
                vertices: body.vertices().to_vec(),
            },
        }
    }
}

/// A point is a bare number in one-dimensional spaces and a coordinate list
/// otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PointDoc {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl PointDoc {
    fn coords(&self) -> Vec<f64> {
        match self {
            PointDoc::Scalar(x) => vec![*x],
            PointDoc::Vector(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MeasureBody {
    Empirical { points: Vec<PointDoc> },
    /// CDF in the normalized coordinate: `(t - lo) / (hi - lo)` on an
    /// interval, `θ / 2π` on a circle.
    Cdf { breakpoints: Vec<(f64, f64)> },
    /// Density proportional to a polynomial on a box.
    Polynomial { terms: Vec<Monomial> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureDoc {
    pub space: SpaceDoc,
    #[serde(flatten)]
    pub body: MeasureBody,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Measure {
    Empirical(EmpiricalMeasure),
    Cdf { space: Space, cdf: CdfMeasure },
    Polynomial { body: ConvexBody, density: PolynomialDensity },
}

impl Measure {
    pub fn space(&self) -> Space {
        match self {
            Measure::Empirical(m) => m.space().clone(),
            Measure::Cdf { space, .. } => space.clone(),
            Measure::Polynomial { body, .. } => Space::Convex(body.clone()),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Measure::Empirical(_) => "empirical",
            Measure::Cdf { .. } => "cdf",
            Measure::Polynomial { .. } => "polynomial",
        }
    }
}

impl MeasureDoc {
    pub fn to_measure(&self) -> Result<Measure> {
        let space = self.space.to_space()?;
        match &self.body {
            MeasureBody::Empirical { points } => {
                let pts = points.iter().map(PointDoc::coords).collect();
                Ok(Measure::Empirical(EmpiricalMeasure::new(space, pts)?))
            }
            MeasureBody::Cdf { breakpoints } => match space {
                Space::Convex(_) => Err(Error::invalid("kind", "cdf measures live on an interval or a circle")),
                space => Ok(Measure::Cdf {
                    space,
                    cdf: CdfMeasure::new(breakpoints.clone())?,
                }),
            },
            MeasureBody::Polynomial { terms } => {
                let Space::Convex(body) = space else {
                    return Err(Error::invalid("kind", "polynomial measures live on a convex body"));
                };
                let density = PolynomialDensity::new(body.dimension(), terms.clone())?;
                let (lo, hi) = body.bounding_box();
                let min = density.grid_minimum(lo, hi, POSITIVITY_GRID);
                if !(min > 0.0) {
                    return Err(Error::invalid("terms", format!("density is not positive (minimum {min} on the check grid)")));
                }
                Ok(Measure::Polynomial { body, density })
            }
        }
    }

    pub fn from_measure(m: &Measure) -> Self {
        let space = SpaceDoc::from_space(&m.space());
        let body = match m {
            Measure::Empirical(e) => MeasureBody::Empirical {
                points: e
                    .points()
                    .iter()
                    .map(|p| if p.len() == 1 && !matches!(e.space(), Space::Convex(_)) { PointDoc::Scalar(p[0]) } else { PointDoc::Vector(p.clone()) })
                    .collect(),
            },
            Measure::Cdf { cdf, .. } => MeasureBody::Cdf {
                breakpoints: cdf.breakpoints().to_vec(),
            },
            Measure::Polynomial { density, .. } => MeasureBody::Polynomial {
                terms: density.terms().to_vec(),
            },
        };
        MeasureDoc { space, body }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixDoc {
    pub n: usize,
    pub class: MatrixClass,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl MatrixDoc {
    pub fn to_matrix(&self) -> Result<NormalMatrix> {
        if self.re.len() != self.n {
            return Err(Error::invalid("n", format!("{} rows given for n = {}", self.re.len(), self.n)));
        }
        NormalMatrix::from_parts(self.class, &self.re, &self.im)
    }

    pub fn from_matrix(m: &NormalMatrix) -> Self {
        let (re, im) = m.parts();
        MatrixDoc {
            n: m.n(),
            class: m.class(),
            re,
            im,
        }
    }
}

/// A transport map together with the space it acts on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "space", rename_all = "lowercase")]
pub enum MapDoc {
    /// `x ↦ lo + (hi - lo) h((x - lo) / (hi - lo))`.
    Interval { lo: f64, hi: f64, map: TransportMap1D },
    Circle { map: CircleHomeomorphism },
    Convex { map: TubeHomeomorphism },
}

impl MapDoc {
    pub fn dimension(&self) -> usize {
        match self {
            MapDoc::Interval { .. } | MapDoc::Circle { .. } => 1,
            MapDoc::Convex { map } => map.dimension,
        }
    }

    pub fn eval(&self, point: &[f64]) -> Result<Vec<f64>> {
        if point.len() != self.dimension() || point.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid(
                "point",
                format!("expected {} finite coordinates, got {:?}", self.dimension(), point),
            ));
        }
        Ok(match self {
            MapDoc::Interval { lo, hi, map } => {
                let s = (point[0] - lo) / (hi - lo);
                if !(0.0..=1.0).contains(&s) {
                    return Err(Error::invalid("point", format!("{} outside [{lo}, {hi}]", point[0])));
                }
                vec![lo + (hi - lo) * map.eval(s)]
            }
            MapDoc::Circle { map } => vec![map.eval(point[0].rem_euclid(std::f64::consts::TAU))],
            MapDoc::Convex { map } => map.eval(point),
        })
    }
}

/// Machine-readable record of one CLI invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    pub arguments: Vec<String>,
    pub version: String,
    pub seed: Option<u64>,
    /// SHA-256 of the input files, hex encoded.
    pub inputs_digest: String,
    pub outputs: serde_json::Value,
    pub certificates: Vec<Certificate>,
}

impl Report {
    pub fn ok(&self) -> bool {
        self.certificates.iter().all(|c| c.ok)
    }

    /// Certificates whose `ok` flag disagrees with their own numbers.
    pub fn inconsistent_certificates(&self) -> Vec<&Certificate> {
        self.certificates.iter().filter(|c| c.recompute() != c.ok).collect()
    }
}

pub fn parse_json<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("documents serialize")
}

pub fn parse_measure(text: &str) -> Result<Measure> {
    parse_json::<MeasureDoc>(text)?.to_measure()
}

pub fn parse_matrix(text: &str) -> Result<NormalMatrix> {
    parse_json::<MatrixDoc>(text)?.to_matrix()
}
