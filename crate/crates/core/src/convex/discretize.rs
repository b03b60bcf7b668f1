use serde::{Deserialize, Serialize};

use super::body::ConvexBody;
use super::density::Density;
use crate::error::{Error, Result};
use crate::measure::euclidean;

/// Atom placement inside a cell, as a fraction of each side.
pub const CENTER_PHASE: f64 = 0.5;
/// Off-center placement used for the source measure so that its atoms
/// avoid those of a centered target.
pub const OFFSET_PHASE: f64 = 0.570_710_678_118_654_8;

/// Largest number of cells before giving up on an `epsilon`.
pub const MAX_CELLS: usize = 250_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    /// Nominal mass `1 / M`.
    pub mass: f64,
    pub atom: Vec<f64>,
}

impl Cell {
    pub fn diameter(&self) -> f64 {
        euclidean(&self.lo, &self.hi)
    }

    /// Distance from the atom to the farthest point of the cell.
    pub fn reach(&self) -> f64 {
        self.atom
            .iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(a, (l, h))| {
                let s = (a - l).max(h - a);
                s * s
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// Partition of a box into `M` cells of equal mass, one atom in each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodyDiscretization {
    pub epsilon: f64,
    pub slabs_per_axis: usize,
    pub cells: Vec<Cell>,
    pub max_diameter: f64,
    /// Bound on δ(μ, μ′): every atom is within this distance of its cell.
    pub certificate: f64,
}

impl BodyDiscretization {
    pub fn m(&self) -> usize {
        self.cells.len()
    }

    pub fn atoms(&self) -> Vec<Vec<f64>> {
        self.cells.iter().map(|c| c.atom.clone()).collect()
    }
}

/// Discretizes `density` on the box `body` at scale `epsilon`.
///
/// Cells come from successive equal-mass slabs, one axis at a time, so every
/// cell has mass exactly `1 / k^d`. `k` grows until each cell has diameter
/// below `epsilon` and the atom of each cell lies within `epsilon / 2` of
/// every point of it.
pub fn discretize_body<D: Density + ?Sized>(
    density: &D,
    body: &ConvexBody,
    epsilon: f64,
    phase: f64,
) -> Result<BodyDiscretization> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::invalid("epsilon", format!("{epsilon} is not positive")));
    }
    if !(phase > 0.0 && phase < 1.0) {
        return Err(Error::invalid("phase", format!("{phase} outside (0, 1)")));
    }
    if density.dimension() != body.dimension() {
        return Err(Error::SpaceMismatch(format!(
            "density dimension {} vs body dimension {}",
            density.dimension(),
            body.dimension()
        )));
    }
    if !body.is_box() {
        return Err(Error::Unsupported("discretization needs an axis-aligned box".into()));
    }
    let d = body.dimension();
    let (lo, hi) = body.bounding_box();
    let total = density.integrate_box(lo, hi);
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::invalid("density", "total mass is not positive"));
    }
    let widest = lo.iter().zip(hi).map(|(a, b)| b - a).fold(0.0, f64::max);
    let mut k = ((d as f64).sqrt() * widest / epsilon).ceil().max(1.0) as usize;
    loop {
        let disc = discretize_with_slabs(density, body, k, phase, epsilon)?;
        if disc.max_diameter < epsilon && disc.certificate < epsilon / 2.0 {
            return Ok(disc);
        }
        k = next_slab_count(k, &disc);
    }
}

/// Slab count for the next refinement step.
pub(crate) fn next_slab_count(k: usize, disc: &BodyDiscretization) -> usize {
    let ratio = (disc.max_diameter / disc.epsilon).max(2.0 * disc.certificate / disc.epsilon);
    ((k as f64 * ratio.min(2.0) * 1.02).ceil() as usize).max(k + 1)
}

/// Discretization with exactly `k` slabs per axis; `epsilon` is recorded
/// and only bounds the cell count.
pub fn discretize_with_slabs<D: Density + ?Sized>(
    density: &D,
    body: &ConvexBody,
    k: usize,
    phase: f64,
    epsilon: f64,
) -> Result<BodyDiscretization> {
    let d = body.dimension();
    let (lo, hi) = body.bounding_box();
    let m = k.checked_pow(d as u32).filter(|m| *m <= MAX_CELLS).ok_or_else(|| Error::EpsilonTooSmall {
        epsilon,
        reason: format!("more than {MAX_CELLS} cells needed ({k} slabs per axis)"),
    })?;
    let mut cells = Vec::with_capacity(m);
    split(density, lo.to_vec(), hi.to_vec(), 0, k, phase, 1.0 / m as f64, &mut cells)?;
    let max_diameter = cells.iter().map(Cell::diameter).fold(0.0, f64::max);
    let certificate = cells.iter().map(Cell::reach).fold(0.0, f64::max);
    Ok(BodyDiscretization {
        epsilon,
        slabs_per_axis: k,
        cells,
        max_diameter,
        certificate,
    })
}

#[allow(clippy::too_many_arguments)]
fn split<D: Density + ?Sized>(
    density: &D,
    lo: Vec<f64>,
    hi: Vec<f64>,
    axis: usize,
    k: usize,
    phase: f64,
    mass: f64,
    out: &mut Vec<Cell>,
) -> Result<()> {
    let d = lo.len();
    if axis == d {
        let atom = lo.iter().zip(&hi).map(|(a, b)| a + phase * (b - a)).collect();
        out.push(Cell { lo, hi, mass, atom });
        return Ok(());
    }
    let total = density.integrate_box(&lo, &hi);
    let mut cuts = Vec::with_capacity(k + 1);
    cuts.push(lo[axis]);
    for j in 1..k {
        let target = total * j as f64 / k as f64;
        let mut top = hi.clone();
        let f = |x: f64| {
            top[axis] = x;
            density.integrate_box(&lo, &top) - target
        };
        let x = solve_increasing(f, cuts[j - 1], hi[axis])?;
        cuts.push(x);
    }
    cuts.push(hi[axis]);
    for w in cuts.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::Numerical("degenerate slab; density too concentrated".into()));
        }
        let (mut l, mut h) = (lo.clone(), hi.clone());
        l[axis] = w[0];
        h[axis] = w[1];
        split(density, l, h, axis + 1, k, phase, mass, out)?;
    }
    Ok(())
}

/// Root of an increasing function on `[a, b]` by the Illinois method with a
/// bisection safeguard.
fn solve_increasing(mut f: impl FnMut(f64) -> f64, a: f64, b: f64) -> Result<f64> {
    let (mut a, mut b) = (a, b);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa > 0.0 || fb < 0.0 {
        return Err(Error::Numerical("mass function does not bracket its target".into()));
    }
    let mut side = 0i8;
    for _ in 0..200 {
        if b - a <= 4.0 * f64::EPSILON * b.abs().max(1.0) {
            break;
        }
        let mut x = (a * fb - b * fa) / (fb - fa);
        if !(x > a && x < b) {
            x = 0.5 * (a + b);
        }
        let fx = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if fx < 0.0 {
            a = x;
            fa = fx;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        } else {
            b = x;
            fb = fx;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
    }
    Ok(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex::density::{Monomial, PolynomialDensity};

    #[test]
    fn uniform_square_is_a_grid() {
        let sq = ConvexBody::unit_cube(2);
        let disc = discretize_body(&PolynomialDensity::constant(2), &sq, 0.4, CENTER_PHASE).unwrap();
        assert!(disc.slabs_per_axis >= 4);
        assert!(disc.max_diameter < 0.4 && disc.certificate < 0.2);
        let k = disc.slabs_per_axis as f64;
        for c in &disc.cells {
            assert!((c.hi[0] - c.lo[0] - 1.0 / k).abs() < 1e-12);
        }
    }

    #[test]
    fn product_density_masses() {
        let p = PolynomialDensity::new(2, vec![Monomial { coef: 4.0, powers: vec![1, 1] }]).unwrap();
        let disc = discretize_body(&p, &ConvexBody::unit_cube(2), 0.2, CENTER_PHASE).unwrap();
        for c in &disc.cells {
            let exact = (c.hi[0].powi(2) - c.lo[0].powi(2)) * (c.hi[1].powi(2) - c.lo[1].powi(2));
            assert!((exact - c.mass).abs() < 1e-9);
        }
    }

    #[test]
    fn non_box_is_unsupported() {
        let t = ConvexBody::new(2, vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let r = discretize_body(&PolynomialDensity::constant(2), &t, 0.2, CENTER_PHASE);
        assert!(matches!(r, Err(Error::Unsupported(_))));
    }

    #[test]
    fn tiny_epsilon_is_reported() {
        let r = discretize_body(&PolynomialDensity::constant(2), &ConvexBody::unit_cube(2), 1e-4, CENTER_PHASE);
        assert!(matches!(r, Err(Error::EpsilonTooSmall { .. })));
    }
}
