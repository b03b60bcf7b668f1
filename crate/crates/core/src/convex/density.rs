use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Unnormalized positive density on a region of `R^d`.
pub trait Density: Sync {
    fn dimension(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    /// Integral over the box `∏ [lo_k, hi_k]`. The default uses tensor
    /// Gauss-Legendre quadrature with 8 nodes per axis.
    fn integrate_box(&self, lo: &[f64], hi: &[f64]) -> f64 {
        gauss_legendre_box(|x| self.value(x), lo, hi)
    }
}

const GL_NODES: [f64; 8] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_26,
    0.222_381_034_453_374_47,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_47,
    0.101_228_536_290_376_26,
];

pub fn gauss_legendre_box(f: impl Fn(&[f64]) -> f64, lo: &[f64], hi: &[f64]) -> f64 {
    let d = lo.len();
    let mut idx = vec![0usize; d];
    let mut x = vec![0.0; d];
    let mut total = 0.0;
    loop {
        let mut w = 1.0;
        for k in 0..d {
            let half = 0.5 * (hi[k] - lo[k]);
            x[k] = lo[k] + half * (1.0 + GL_NODES[idx[k]]);
            w *= half * GL_WEIGHTS[idx[k]];
        }
        total += w * f(&x);
        let mut k = 0;
        loop {
            if k == d {
                return total;
            }
            idx[k] += 1;
            if idx[k] < GL_NODES.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// `c · x_0^{p_0} ⋯ x_{d-1}^{p_{d-1}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coef: f64,
    pub powers: Vec<u32>,
}

/// Polynomial density with exact box integrals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolynomialDensity {
    dimension: usize,
    terms: Vec<Monomial>,
}

impl PolynomialDensity {
    pub fn new(dimension: usize, terms: Vec<Monomial>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::invalid("terms", "polynomial has no terms"));
        }
        for t in &terms {
            if t.powers.len() != dimension || !t.coef.is_finite() {
                return Err(Error::invalid("terms", format!("bad monomial {t:?} for dimension {dimension}")));
            }
        }
        Ok(Self { dimension, terms })
    }

    pub fn constant(dimension: usize) -> Self {
        Self {
            dimension,
            terms: vec![Monomial {
                coef: 1.0,
                powers: vec![0; dimension],
            }],
        }
    }

    pub fn terms(&self) -> &[Monomial] {
        &self.terms
    }

    /// Smallest value on a grid of `per_axis^d` points of the box.
    pub fn grid_minimum(&self, lo: &[f64], hi: &[f64], per_axis: usize) -> f64 {
        let d = self.dimension;
        let mut idx = vec![0usize; d];
        let mut x = vec![0.0; d];
        let mut best = f64::INFINITY;
        loop {
            for k in 0..d {
                x[k] = lo[k] + (hi[k] - lo[k]) * idx[k] as f64 / (per_axis - 1) as f64;
            }
            best = best.min(self.value(&x));
            let mut k = 0;
            loop {
                if k == d {
                    return best;
                }
                idx[k] += 1;
                if idx[k] < per_axis {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    }
}

impl Density for PolynomialDensity {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coef * t.powers.iter().zip(x).map(|(p, xi)| xi.powi(*p as i32)).product::<f64>())
            .sum()
    }

    fn integrate_box(&self, lo: &[f64], hi: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                t.coef
                    * t.powers
                        .iter()
                        .enumerate()
                        .map(|(k, &p)| {
                            let e = p as i32 + 1;
                            (hi[k].powi(e) - lo[k].powi(e)) / e as f64
                        })
                        .product::<f64>()
            })
            .sum()
    }
}

/// Constant background plus weighted boxes, with exact box integrals.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDensity {
    dimension: usize,
    background: f64,
    blocks: Vec<(Vec<f64>, Vec<f64>, f64)>,
}

impl BlockDensity {
    pub fn new(dimension: usize, background: f64, blocks: Vec<(Vec<f64>, Vec<f64>, f64)>) -> Result<Self> {
        if !(background > 0.0 && background.is_finite()) {
            return Err(Error::invalid("background", "must be positive"));
        }
        for (lo, hi, w) in &blocks {
            if lo.len() != dimension || hi.len() != dimension || !(w.is_finite() && *w >= 0.0) {
                return Err(Error::invalid("blocks", "bad block"));
            }
        }
        Ok(Self {
            dimension,
            background,
            blocks,
        })
    }
}

fn overlap(alo: &[f64], ahi: &[f64], blo: &[f64], bhi: &[f64]) -> f64 {
    alo.iter()
        .zip(ahi)
        .zip(blo.iter().zip(bhi))
        .map(|((a0, a1), (b0, b1))| (a1.min(*b1) - a0.max(*b0)).max(0.0))
        .product()
}

impl Density for BlockDensity {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.background
            + self
                .blocks
                .iter()
                .filter(|(lo, hi, _)| x.iter().zip(lo.iter().zip(hi)).all(|(v, (a, b))| v >= a && v < b))
                .map(|b| b.2)
                .sum::<f64>()
    }

    fn integrate_box(&self, lo: &[f64], hi: &[f64]) -> f64 {
        let vol: f64 = lo.iter().zip(hi).map(|(a, b)| b - a).product();
        self.background * vol
            + self
                .blocks
                .iter()
                .map(|(blo, bhi, w)| w * overlap(lo, hi, blo, bhi))
                .sum::<f64>()
    }
}
