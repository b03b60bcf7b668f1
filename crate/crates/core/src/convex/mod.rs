//! Approximate continuous transport in compact convex bodies: equal-mass
//! discretization and relocation homeomorphisms built from disjoint tubes.

mod body;
mod density;
mod discretize;
mod geometry;
mod tube;

pub use body::{ConvexBody, Facet};
pub use density::{gauss_legendre_box, BlockDensity, Density, Monomial, PolynomialDensity};
pub use discretize::{
    discretize_body, discretize_with_slabs, BodyDiscretization, Cell, CENTER_PHASE, MAX_CELLS, OFFSET_PHASE,
};
pub use tube::{build_tube_homeomorphism, TubeHomeomorphism, TubeOptions, NESTED_ORDER_LIMIT};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::{bottleneck_match, DistanceMatrix};
use crate::measure::{euclidean, DeltaEstimate};
use crate::report::Certificate;

/// Default cap on the number of atoms per measure in
/// [`approximate_transport_body`].
pub const DEFAULT_MAX_POINTS: usize = 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodyTransport {
    pub map: TubeHomeomorphism,
    pub points: usize,
    /// Bound on δ(ν, ν′).
    pub nu_certificate: f64,
    /// Bound on δ(μ′, μ).
    pub mu_certificate: f64,
    pub certificates: Vec<Certificate>,
}

impl BodyTransport {
    pub fn ok(&self) -> bool {
        self.certificates.iter().all(|c| c.ok)
    }

    /// `δ(ν, ν′) + δ(μ′, μ)`.
    pub fn pushforward_bound(&self) -> f64 {
        self.nu_certificate + self.mu_certificate
    }
}

/// Discretizations of `mu` (centered atoms) and `nu` (offset atoms) at scale
/// `epsilon / 2` with a common number of slabs per axis.
pub fn common_discretization(
    mu: &dyn Density,
    nu: &dyn Density,
    body: &ConvexBody,
    epsilon: f64,
    max_points: usize,
) -> Result<(BodyDiscretization, BodyDiscretization)> {
    let half = epsilon / 2.0;
    let dm = discretize_body(mu, body, half, CENTER_PHASE)?;
    let dn = discretize_body(nu, body, half, OFFSET_PHASE)?;
    let mut k = dm.slabs_per_axis.max(dn.slabs_per_axis);
    loop {
        let too_many = || Error::EpsilonTooSmall {
            epsilon,
            reason: format!("{k} slabs per axis exceed the cap of {max_points} points"),
        };
        let m = k.checked_pow(body.dimension() as u32).ok_or_else(too_many)?;
        if m > max_points {
            return Err(too_many());
        }
        let a = discretize_with_slabs(mu, body, k, CENTER_PHASE, half)?;
        let b = discretize_with_slabs(nu, body, k, OFFSET_PHASE, half)?;
        let fine = |d: &BodyDiscretization| d.max_diameter < half && d.certificate < half / 2.0;
        if fine(&a) && fine(&b) {
            return Ok((a, b));
        }
        k += 1;
    }
}

/// Estimate of δ(μ, ν) on a box from the bottleneck distance of the common
/// discretization; the error bound is the sum of both discretization bounds.
pub fn delta_body(
    mu: &dyn Density,
    nu: &dyn Density,
    body: &ConvexBody,
    epsilon: f64,
    max_points: usize,
) -> Result<DeltaEstimate> {
    let (dm, dn) = common_discretization(mu, nu, body, epsilon, max_points)?;
    let (a, b) = (dm.atoms(), dn.atoms());
    let d = DistanceMatrix::from_fn(a.len(), |i, j| euclidean(&a[i], &b[j]))?;
    Ok(DeltaEstimate {
        estimate: bottleneck_match(&d).bottleneck_value,
        error_bound: dm.certificate + dn.certificate,
    })
}

/// Homeomorphism of the box `body` carrying the discretization of `nu`
/// onto that of `mu`, both at scale `epsilon / 2`.
pub fn approximate_transport_body(
    mu: &dyn Density,
    nu: &dyn Density,
    body: &ConvexBody,
    epsilon: f64,
    max_points: usize,
    options: &TubeOptions,
) -> Result<BodyTransport> {
    let (dm, dn) = common_discretization(mu, nu, body, epsilon, max_points)?;
    let map = build_tube_homeomorphism(body, &dn.atoms(), &dm.atoms(), epsilon, options)?;
    let mut certificates = map.certificates.clone();
    certificates.push(Certificate::lt(
        "pushforward defect bound delta(nu,nu') + delta(mu',mu) < eps",
        dn.certificate + dm.certificate,
        epsilon,
    ));
    certificates.push(Certificate::le(
        "displacement <= delta(mu',nu') + eps",
        map.global_displacement,
        map.bottleneck + epsilon,
        0.0,
    ));
    Ok(BodyTransport {
        points: dm.m(),
        nu_certificate: dn.certificate,
        mu_certificate: dm.certificate,
        map,
        certificates,
    })
}
