use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::measure::{euclidean, GEOMETRY_TOLERANCE};

/// Supporting halfspace `normal · x <= offset` with a unit normal.
#[derive(Debug, Clone, PartialEq)]
pub struct Facet {
    pub normal: Vec<f64>,
    pub offset: f64,
}

/// Convex hull of finitely many points with nonempty interior.
#[derive(Debug, Clone)]
pub struct ConvexBody {
    dimension: usize,
    vertices: Vec<Vec<f64>>,
    facets: Vec<Facet>,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl PartialEq for ConvexBody {
    fn eq(&self, other: &Self) -> bool {
        self.dimension == other.dimension && self.vertices == other.vertices
    }
}

/// Facet enumeration visits every `dimension`-subset of the vertices.
const MAX_FACET_CANDIDATES: u64 = 2_000_000;

impl ConvexBody {
    pub fn new(dimension: usize, vertices: Vec<Vec<f64>>) -> Result<Self> {
        if dimension < 2 {
            return Err(Error::invalid("dimension", format!("{dimension} < 2")));
        }
        if vertices.len() < dimension + 1 {
            return Err(Error::invalid(
                "vertices",
                format!("{} vertices cannot span dimension {dimension}", vertices.len()),
            ));
        }
        for (i, v) in vertices.iter().enumerate() {
            if v.len() != dimension || v.iter().any(|c| !c.is_finite()) {
                return Err(Error::invalid("vertices", format!("vertex {i} is not a finite {dimension}-vector")));
            }
        }
        if affine_rank(&vertices) < dimension {
            return Err(Error::invalid("vertices", "hull has empty interior"));
        }
        if binomial(vertices.len() as u64, dimension as u64) > MAX_FACET_CANDIDATES {
            return Err(Error::Unsupported(format!(
                "{} vertices in dimension {dimension} is too many for facet enumeration",
                vertices.len()
            )));
        }
        let facets = enumerate_facets(dimension, &vertices);
        let mut lo = vec![f64::INFINITY; dimension];
        let mut hi = vec![f64::NEG_INFINITY; dimension];
        for v in &vertices {
            for k in 0..dimension {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        Ok(Self {
            dimension,
            vertices,
            facets,
            lo,
            hi,
        })
    }

    /// Axis-aligned box `∏ [lo_k, hi_k]`.
    pub fn from_box(lo: &[f64], hi: &[f64]) -> Result<Self> {
        if lo.len() != hi.len() || lo.iter().zip(hi).any(|(a, b)| !(a < b)) {
            return Err(Error::invalid("box", "need lo < hi in every coordinate"));
        }
        let d = lo.len();
        let vertices = (0..1usize << d)
            .map(|mask| (0..d).map(|k| if mask >> k & 1 == 1 { hi[k] } else { lo[k] }).collect())
            .collect();
        Self::new(d, vertices)
    }

    pub fn unit_cube(dimension: usize) -> Self {
        Self::from_box(&vec![0.0; dimension], &vec![1.0; dimension]).expect("unit cube is valid")
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    pub fn bounding_box(&self) -> (&[f64], &[f64]) {
        (&self.lo, &self.hi)
    }

    /// Distance from `p` to the boundary, negative outside.
    pub fn margin(&self, p: &[f64]) -> f64 {
        self.facets
            .iter()
            .map(|f| f.offset - dot(&f.normal, p))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dimension && self.margin(p) >= -GEOMETRY_TOLERANCE
    }

    pub fn diameter(&self) -> f64 {
        let mut best = 0.0f64;
        for (i, a) in self.vertices.iter().enumerate() {
            for b in &self.vertices[i + 1..] {
                best = best.max(euclidean(a, b));
            }
        }
        best
    }

    /// Whether the body equals its bounding box.
    pub fn is_box(&self) -> bool {
        let d = self.dimension;
        (0..1usize << d).all(|mask| {
            let corner: Vec<f64> = (0..d)
                .map(|k| if mask >> k & 1 == 1 { self.hi[k] } else { self.lo[k] })
                .collect();
            self.contains(&corner)
        })
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn affine_rank(vertices: &[Vec<f64>]) -> usize {
    let d = vertices[0].len();
    let rows = vertices.len() - 1;
    let m = DMatrix::from_fn(rows, d, |i, k| vertices[i + 1][k] - vertices[0][k]);
    let sv = m.singular_values();
    let scale = sv.max().max(1.0);
    sv.iter().filter(|s| **s > 1e-9 * scale).count()
}

fn binomial(n: u64, k: u64) -> u64 {
    let mut r: u64 = 1;
    for i in 0..k.min(n.saturating_sub(k)) {
        r = r.saturating_mul(n - i) / (i + 1);
    }
    r
}

/// Supporting hyperplanes through `dimension` affinely independent vertices.
fn enumerate_facets(dimension: usize, vertices: &[Vec<f64>]) -> Vec<Facet> {
    let mut facets: Vec<Facet> = Vec::new();
    let mut idx: Vec<usize> = (0..dimension).collect();
    let n = vertices.len();
    loop {
        if let Some(f) = hyperplane(dimension, vertices, &idx) {
            if !facets
                .iter()
                .any(|g| (g.offset - f.offset).abs() < 1e-9 && euclidean(&g.normal, &f.normal) < 1e-9)
            {
                facets.push(f);
            }
        }
        // next combination
        let mut i = dimension;
        loop {
            if i == 0 {
                return facets;
            }
            i -= 1;
            if idx[i] < n - dimension + i {
                break;
            }
        }
        idx[i] += 1;
        for j in i + 1..dimension {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn hyperplane(dimension: usize, vertices: &[Vec<f64>], idx: &[usize]) -> Option<Facet> {
    let base = &vertices[idx[0]];
    let diffs = DMatrix::from_fn(dimension - 1, dimension, |r, c| vertices[idx[r + 1]][c] - base[c]);
    // Cofactor expansion gives a normal orthogonal to every difference row.
    let mut normal: Vec<f64> = (0..dimension)
        .map(|k| {
            let minor = diffs.clone().remove_column(k);
            let det = if dimension == 2 { minor[(0, 0)] } else { minor.determinant() };
            if k % 2 == 0 {
                det
            } else {
                -det
            }
        })
        .collect();
    let norm = normal.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm < 1e-12 {
        return None;
    }
    normal.iter_mut().for_each(|x| *x /= norm);
    let offset = dot(&normal, base);
    let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in vertices {
        let s = dot(&normal, v) - offset;
        min = min.min(s);
        max = max.max(s);
    }
    if max <= GEOMETRY_TOLERANCE {
        Some(Facet { normal, offset })
    } else if min >= -GEOMETRY_TOLERANCE {
        Some(Facet {
            normal: normal.iter().map(|x| -x).collect(),
            offset: -offset,
        })
    } else {
        None
    }
}
