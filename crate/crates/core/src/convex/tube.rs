use std::collections::VecDeque;
use std::f64::consts::{SQRT_2, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::body::ConvexBody;
use super::geometry::{midpoint, norm, path_diameter, path_distance, segment_distance, segments, sub};
use crate::error::{Error, Result};
use crate::matching::{bottleneck_match, nested_bottleneck_pairs, DistanceMatrix};
use crate::measure::euclidean;
use crate::report::Certificate;

/// Above this many pairs the processing order comes from one bottleneck
/// matching sorted by pair length instead of the nested ordering.
pub const NESTED_ORDER_LIMIT: usize = 400;

#[derive(Debug, Clone, PartialEq)]
pub struct TubeOptions {
    /// Sagitta of arc detours; defaults to `epsilon / 8`.
    pub detour_radius: Option<f64>,
    /// Grid spacing of the displacement check; defaults to `epsilon / 10`.
    pub grid_spacing: Option<f64>,
    /// Skip the grid check (certificates then only cover the tube samples).
    pub skip_grid: bool,
}

impl Default for TubeOptions {
    fn default() -> Self {
        Self {
            detour_radius: None,
            grid_spacing: None,
            skip_grid: false,
        }
    }
}

/// Homeomorphism of a convex body moving each `x_i` to `y_i` inside a thin
/// tube around a polyline path, and fixing everything outside the tubes.
///
/// Each path segment `p → q` carries a finger move on the cylinder of radius
/// `ρ` around it: in coordinates `u` along and `v` across the segment, with
/// `w = 1 - |v| / ρ`, the point `u` goes to the piecewise-linear image
/// `-ρ ↦ -ρ, 0 ↦ w L, L + ρ ↦ L + ρ`. The moves of a path compose in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTube")]
pub struct TubeHomeomorphism {
    pub dimension: usize,
    pub epsilon: f64,
    /// Bottleneck distance between the two point sets.
    pub bottleneck: f64,
    /// `(x_i, y_i)` in processing order.
    pub pairs: Vec<(Vec<f64>, Vec<f64>)>,
    /// Polyline from `x_i` to `y_i`; stationary pairs have a single vertex.
    pub paths: Vec<Vec<Vec<f64>>>,
    pub radii: Vec<f64>,
    /// Target exchanges made to remove crossings.
    pub swaps: usize,
    /// Paths replaced by detours.
    pub reroutes: usize,
    pub grid_spacing: f64,
    pub grid_points: usize,
    /// Largest displacement over the validation grid and tube samples.
    pub global_displacement: f64,
    pub certificates: Vec<Certificate>,
    #[serde(skip)]
    boxes: Vec<(Vec<f64>, Vec<f64>)>,
}

#[derive(Deserialize)]
struct RawTube {
    dimension: usize,
    epsilon: f64,
    bottleneck: f64,
    pairs: Vec<(Vec<f64>, Vec<f64>)>,
    paths: Vec<Vec<Vec<f64>>>,
    radii: Vec<f64>,
    swaps: usize,
    reroutes: usize,
    grid_spacing: f64,
    grid_points: usize,
    global_displacement: f64,
    certificates: Vec<Certificate>,
}

impl TryFrom<RawTube> for TubeHomeomorphism {
    type Error = Error;

    fn try_from(r: RawTube) -> Result<Self> {
        if r.pairs.len() != r.paths.len() || r.paths.len() != r.radii.len() {
            return Err(Error::invalid("paths", "pairs, paths and radii must have equal length"));
        }
        for (i, path) in r.paths.iter().enumerate() {
            if path.is_empty() || path.iter().any(|p| p.len() != r.dimension) {
                return Err(Error::invalid("paths", format!("path {i} is malformed")));
            }
            if path[0] != r.pairs[i].0 || path[path.len() - 1] != r.pairs[i].1 {
                return Err(Error::invalid("paths", format!("path {i} does not join its pair")));
            }
            if !(r.radii[i] >= 0.0 && r.radii[i].is_finite()) {
                return Err(Error::invalid("radii", format!("radius {i} is not a nonnegative number")));
            }
        }
        let boxes = bounding_boxes(&r.paths, &r.radii);
        Ok(Self {
            dimension: r.dimension,
            epsilon: r.epsilon,
            bottleneck: r.bottleneck,
            pairs: r.pairs,
            paths: r.paths,
            radii: r.radii,
            swaps: r.swaps,
            reroutes: r.reroutes,
            grid_spacing: r.grid_spacing,
            grid_points: r.grid_points,
            global_displacement: r.global_displacement,
            certificates: r.certificates,
            boxes,
        })
    }
}

fn bounding_boxes(paths: &[Vec<Vec<f64>>], radii: &[f64]) -> Vec<(Vec<f64>, Vec<f64>)> {
    paths
        .iter()
        .zip(radii)
        .map(|(path, &rho)| {
            let d = path[0].len();
            let pad = 2.0 * rho;
            let mut lo = vec![f64::INFINITY; d];
            let mut hi = vec![f64::NEG_INFINITY; d];
            for p in path {
                for k in 0..d {
                    lo[k] = lo[k].min(p[k] - pad);
                    hi[k] = hi[k].max(p[k] + pad);
                }
            }
            (lo, hi)
        })
        .collect()
}

/// Finger move along `p → q` with tube radius `rho`; `None` outside the
/// cylinder. `p` itself goes exactly to `q`.
fn finger_move(p: &[f64], q: &[f64], rho: f64, z: &[f64]) -> Option<Vec<f64>> {
    let e = sub(q, p);
    let len = norm(&e);
    let rel = sub(z, p);
    let u = rel.iter().zip(&e).map(|(a, b)| a * b).sum::<f64>() / len;
    if u <= -rho || u >= len + rho {
        return None;
    }
    let v: Vec<f64> = rel.iter().zip(&e).map(|(a, b)| a - u * b / len).collect();
    let r = norm(&v);
    if r >= rho {
        return None;
    }
    if u == 0.0 && r == 0.0 {
        return Some(q.to_vec());
    }
    let w = 1.0 - r / rho;
    let top = w * len;
    let u2 = if u <= 0.0 {
        -rho + (u + rho) * (top + rho) / rho
    } else {
        top + u * (len + rho - top) / (len + rho)
    };
    Some(p.iter().zip(&e).zip(&v).map(|((pk, ek), vk)| pk + u2 * ek / len + vk).collect())
}

impl TubeHomeomorphism {
    pub fn eval(&self, z: &[f64]) -> Vec<f64> {
        for (i, path) in self.paths.iter().enumerate() {
            let rho = self.radii[i];
            if path.len() < 2 || rho <= 0.0 {
                continue;
            }
            let (lo, hi) = &self.boxes[i];
            if z.iter().zip(lo.iter().zip(hi)).any(|(c, (a, b))| c < a || c > b) {
                continue;
            }
            let mut cur = z.to_vec();
            let mut moved = false;
            for w in path.windows(2) {
                if let Some(next) = finger_move(&w[0], &w[1], rho, &cur) {
                    cur = next;
                    moved = true;
                }
            }
            if moved {
                return cur;
            }
        }
        z.to_vec()
    }

    pub fn ok(&self) -> bool {
        self.certificates.iter().all(|c| c.ok)
    }

    /// Number of pairs with `h(x_i) != y_i` (bitwise).
    pub fn endpoint_mismatches(&self) -> usize {
        self.pairs.iter().filter(|(x, y)| self.eval(x) != *y).count()
    }

    /// Largest displacement on the grid `lo + spacing · k` restricted to the
    /// body; only grid points near some tube can move.
    pub fn grid_displacement(&self, body: &ConvexBody, spacing: f64) -> (f64, usize) {
        let (blo, bhi) = body.bounding_box();
        let d = self.dimension;
        let mut worst = 0.0f64;
        let mut count = 0usize;
        for (lo, hi) in &self.boxes {
            let mut start = vec![0usize; d];
            let mut extent = vec![0usize; d];
            let mut empty = false;
            for k in 0..d {
                let a = ((lo[k] - blo[k]) / spacing).ceil().max(0.0);
                let b = ((hi[k].min(bhi[k]) - blo[k]) / spacing).floor();
                if b < a {
                    empty = true;
                }
                start[k] = a as usize;
                extent[k] = (b - a + 1.0).max(0.0) as usize;
            }
            if empty {
                continue;
            }
            let total: usize = extent.iter().product();
            let (w, c) = (0..total)
                .into_par_iter()
                .map(|mut idx| {
                    let mut z = vec![0.0; d];
                    for k in 0..d {
                        z[k] = blo[k] + spacing * (start[k] + idx % extent[k]) as f64;
                        idx /= extent[k];
                    }
                    if !body.contains(&z) {
                        return (0.0, 0usize);
                    }
                    (euclidean(&self.eval(&z), &z), 1)
                })
                .reduce(|| (0.0, 0), |a, b| (a.0.max(b.0), a.1 + b.1));
            worst = worst.max(w);
            count += c;
        }
        (worst, count)
    }

    /// Largest displacement over deterministic samples inside every tube.
    pub fn tube_sample_displacement(&self) -> f64 {
        let d = self.dimension;
        self.paths
            .par_iter()
            .zip(&self.radii)
            .map(|(path, &rho)| {
                let mut worst = 0.0f64;
                if path.len() < 2 || rho <= 0.0 {
                    return worst;
                }
                for w in path.windows(2) {
                    let e = sub(&w[1], &w[0]);
                    let len = norm(&e);
                    let normals = orthonormal_complement(&e);
                    for a in 0..=16 {
                        let u = -rho + (len + 2.0 * rho) * a as f64 / 16.0;
                        for (nk, n) in normals.iter().enumerate() {
                            for s in [-0.9, -0.5, 0.0, 0.5, 0.9] {
                                if s == 0.0 && nk > 0 {
                                    continue;
                                }
                                let z: Vec<f64> = (0..d).map(|k| w[0][k] + u * e[k] / len + s * rho * n[k]).collect();
                                worst = worst.max(euclidean(&self.eval(&z), &z));
                            }
                        }
                    }
                }
                worst
            })
            .reduce(|| 0.0, f64::max)
    }
}

/// Unit vectors spanning the orthogonal complement of `e`.
fn orthonormal_complement(e: &[f64]) -> Vec<Vec<f64>> {
    let d = e.len();
    let n = norm(e);
    let mut basis: Vec<Vec<f64>> = vec![e.iter().map(|x| x / n).collect()];
    for k in 0..d {
        let mut v = vec![0.0; d];
        v[k] = 1.0;
        for b in &basis {
            let c: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
        let m = norm(&v);
        if m > 1e-6 {
            basis.push(v.iter().map(|x| x / m).collect());
        }
        if basis.len() == d {
            break;
        }
    }
    basis.remove(0);
    basis
}

struct Router<'a> {
    body: &'a ConvexBody,
    epsilon: f64,
    bottleneck: f64,
    /// Clearance kept by rerouted paths.
    clearance: f64,
    detour: f64,
}

impl Router<'_> {
    fn ball(&self, x: &[f64], y: &[f64]) -> (Vec<f64>, f64) {
        (midpoint(x, y), 0.5 * self.bottleneck + self.epsilon / 8.0)
    }

    fn link_ok(&self, a: &[f64], b: &[f64], center: &[f64], radius: f64, obstacles: &[&[Vec<f64>]]) -> bool {
        let c = self.clearance;
        euclidean(a, center) <= radius
            && euclidean(b, center) <= radius
            && self.body.margin(a) >= c
            && self.body.margin(b) >= c
            && obstacles
                .iter()
                .all(|o| segments(o).all(|(p, q)| segment_distance(a, b, p, q) >= c))
    }

    fn path_ok(&self, path: &[Vec<f64>], center: &[f64], radius: f64, obstacles: &[&[Vec<f64>]]) -> bool {
        path.windows(2).all(|w| self.link_ok(&w[0], &w[1], center, radius, obstacles))
    }

    fn route(&self, x: &[f64], y: &[f64], obstacles: &[&[Vec<f64>]]) -> Option<Vec<Vec<f64>>> {
        let (center, radius) = self.ball(x, y);
        let straight = vec![x.to_vec(), y.to_vec()];
        if self.path_ok(&straight, &center, radius, obstacles) {
            return Some(straight);
        }
        if let Some(p) = self.arc_route(x, y, &center, radius, obstacles) {
            return Some(p);
        }
        if x.len() == 2 {
            return self.grid_route(x, y, &center, radius, obstacles);
        }
        None
    }

    /// Circular-arc detours in the planes through the segment, trying eight
    /// directions and shrinking sagittas; keeps the best cleared one.
    fn arc_route(&self, x: &[f64], y: &[f64], center: &[f64], radius: f64, obstacles: &[&[Vec<f64>]]) -> Option<Vec<Vec<f64>>> {
        let e = sub(y, x);
        let len = norm(&e);
        let normals = orthonormal_complement(&e);
        let dirs: Vec<Vec<f64>> = if normals.len() == 1 {
            vec![normals[0].clone(), normals[0].iter().map(|v| -v).collect()]
        } else {
            (0..8)
                .map(|k| {
                    let t = TAU * k as f64 / 8.0;
                    normals[0].iter().zip(&normals[1]).map(|(a, b)| t.cos() * a + t.sin() * b).collect()
                })
                .collect()
        };
        let mut best: Option<(f64, Vec<Vec<f64>>)> = None;
        let mut s = self.detour.min(radius);
        for _ in 0..5 {
            for n in &dirs {
                let path = arc(x, y, len, n, s);
                if !self.path_ok(&path, center, radius, obstacles) {
                    continue;
                }
                let gap = obstacles.iter().map(|o| path_distance(&path, o)).fold(f64::INFINITY, f64::min);
                if best.as_ref().is_none_or(|b| gap > b.0) {
                    best = Some((gap, path));
                }
            }
            if best.is_some() {
                break;
            }
            s *= 0.5;
        }
        best.map(|b| b.1)
    }

    /// Breadth-first search on a planar grid inside the midpoint ball,
    /// followed by greedy shortcutting.
    fn grid_route(&self, x: &[f64], y: &[f64], center: &[f64], radius: f64, obstacles: &[&[Vec<f64>]]) -> Option<Vec<Vec<f64>>> {
        let h = self.clearance;
        let (blo, bhi) = self.body.bounding_box();
        let lo = [(center[0] - radius).max(blo[0]), (center[1] - radius).max(blo[1])];
        let hi = [(center[0] + radius).min(bhi[0]), (center[1] + radius).min(bhi[1])];
        let nx = ((hi[0] - lo[0]) / h).floor() as usize + 1;
        let ny = ((hi[1] - lo[1]) / h).floor() as usize + 1;
        if nx * ny > 8_000_000 {
            return None;
        }
        let pos = |i: usize, j: usize| vec![lo[0] + h * i as f64, lo[1] + h * j as f64];
        let need = self.clearance + 0.75 * h;
        let free: Vec<bool> = (0..nx * ny)
            .into_par_iter()
            .map(|idx| {
                let p = pos(idx % nx, idx / nx);
                euclidean(&p, center) <= radius - 0.75 * h
                    && self.body.margin(&p) >= need
                    && obstacles
                        .iter()
                        .all(|o| segments(o).all(|(a, b)| segment_distance(&p, &p, a, b) >= need))
            })
            .collect();
        let near = |z: &[f64]| -> Vec<usize> {
            let ci = ((z[0] - lo[0]) / h).round() as i64;
            let cj = ((z[1] - lo[1]) / h).round() as i64;
            let mut out = Vec::new();
            for di in -2..=2 {
                for dj in -2..=2 {
                    let (i, j) = (ci + di, cj + dj);
                    if i >= 0 && j >= 0 && (i as usize) < nx && (j as usize) < ny {
                        let idx = j as usize * nx + i as usize;
                        if free[idx] && self.link_ok(z, &pos(i as usize, j as usize), center, radius, obstacles) {
                            out.push(idx);
                        }
                    }
                }
            }
            out
        };
        let starts = near(x);
        let goals = near(y);
        if starts.is_empty() || goals.is_empty() {
            return None;
        }
        let mut is_goal = vec![false; nx * ny];
        goals.iter().for_each(|&g| is_goal[g] = true);
        let mut prev = vec![usize::MAX; nx * ny];
        let mut queue = VecDeque::new();
        for &s in &starts {
            prev[s] = s;
            queue.push_back(s);
        }
        let mut found = None;
        while let Some(c) = queue.pop_front() {
            if is_goal[c] {
                found = Some(c);
                break;
            }
            let (ci, cj) = ((c % nx) as i64, (c / nx) as i64);
            for (di, dj) in [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)] {
                let (i, j) = (ci + di, cj + dj);
                if i < 0 || j < 0 || i as usize >= nx || j as usize >= ny {
                    continue;
                }
                let n = j as usize * nx + i as usize;
                if free[n] && prev[n] == usize::MAX {
                    prev[n] = c;
                    queue.push_back(n);
                }
            }
        }
        let mut c = found?;
        let mut cells = vec![c];
        while prev[c] != c {
            c = prev[c];
            cells.push(c);
        }
        cells.reverse();
        let mut raw = vec![x.to_vec()];
        raw.extend(cells.iter().map(|&c| pos(c % nx, c / nx)));
        raw.push(y.to_vec());
        if !self.path_ok(&raw, center, radius, obstacles) {
            return None;
        }
        // greedy shortcutting keeps every link valid
        let mut out = vec![raw[0].clone()];
        let mut anchor = 0;
        while anchor < raw.len() - 1 {
            let mut next = anchor + 1;
            while next + 1 < raw.len() && self.link_ok(&raw[anchor], &raw[next + 1], center, radius, obstacles) {
                next += 1;
            }
            out.push(raw[next].clone());
            anchor = next;
        }
        Some(out)
    }
}

/// Eight-segment chord approximation of the circular arc from `x` to `y`
/// bulging by `sagitta` towards `n`.
fn arc(x: &[f64], y: &[f64], len: f64, n: &[f64], sagitta: f64) -> Vec<Vec<f64>> {
    let e: Vec<f64> = sub(y, x).iter().map(|v| v / len).collect();
    let mid = midpoint(x, y);
    let rc = (0.25 * len * len + sagitta * sagitta) / (2.0 * sagitta);
    let alpha = (0.5 * len).atan2(rc - sagitta);
    let mut out = vec![x.to_vec()];
    for k in 1..8 {
        let th = -alpha + 2.0 * alpha * k as f64 / 8.0;
        let (a, b) = (rc * th.cos() - (rc - sagitta), rc * th.sin());
        out.push(mid.iter().zip(n).zip(&e).map(|((m, nk), ek)| m + a * nk + b * ek).collect());
    }
    out.push(y.to_vec());
    out
}

fn validate_points(body: &ConvexBody, name: &'static str, pts: &[Vec<f64>]) -> Result<()> {
    for (i, p) in pts.iter().enumerate() {
        if p.len() != body.dimension() || p.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid(name, format!("point {i} is not a finite {}-vector", body.dimension())));
        }
        if body.margin(p) <= 0.0 {
            return Err(Error::invalid(name, format!("point {i} is not interior")));
        }
        if pts[..i].contains(p) {
            return Err(Error::invalid(name, format!("point {i} repeats an earlier point")));
        }
    }
    Ok(())
}

/// Processing order of the pairs: the nested bottleneck ordering, or for
/// large inputs one bottleneck matching sorted by length.
fn ordered_pairs(f: &[Vec<f64>], g: &[Vec<f64>]) -> Result<Vec<(usize, usize)>> {
    let d = DistanceMatrix::from_fn(f.len(), |i, j| euclidean(&f[i], &g[j]))?;
    if f.len() <= NESTED_ORDER_LIMIT {
        return Ok(nested_bottleneck_pairs(&d));
    }
    let m = bottleneck_match(&d);
    let mut pairs: Vec<(usize, usize)> = m.permutation.iter().enumerate().map(|(i, &j)| (i, j)).collect();
    pairs.sort_by(|a, b| d.get(a.0, a.1).total_cmp(&d.get(b.0, b.1)).then(a.cmp(b)));
    Ok(pairs)
}

/// Builds a homeomorphism `h` of the body with `h(F) = G` and displacement
/// at most `𝔟(F, G) + ε`.
pub fn build_tube_homeomorphism(
    body: &ConvexBody,
    f: &[Vec<f64>],
    g: &[Vec<f64>],
    epsilon: f64,
    options: &TubeOptions,
) -> Result<TubeHomeomorphism> {
    if f.len() != g.len() {
        return Err(Error::SizeMismatch {
            left: f.len(),
            right: g.len(),
        });
    }
    if f.is_empty() {
        return Err(Error::invalid("points", "at least one pair is required"));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::invalid("epsilon", format!("{epsilon} is not positive")));
    }
    validate_points(body, "F", f)?;
    validate_points(body, "G", g)?;
    let dim = body.dimension();

    let order = ordered_pairs(f, g)?;
    let mut pairs: Vec<(Vec<f64>, Vec<f64>)> = order.iter().map(|&(i, j)| (f[i].clone(), g[j].clone())).collect();
    let bottleneck = pairs.iter().map(|(x, y)| euclidean(x, y)).fold(0.0, f64::max);
    let moving: Vec<usize> = (0..pairs.len()).filter(|&i| pairs[i].0 != pairs[i].1).collect();
    for &i in &moving {
        for (k, (x, y)) in pairs.iter().enumerate() {
            if k != i && (*x == pairs[i].0 || *y == pairs[i].0 || *x == pairs[i].1 || *y == pairs[i].1) {
                return Err(Error::invalid(
                    "points",
                    format!("pair {i} must move but shares a point with pair {k}"),
                ));
            }
        }
    }

    let scale = epsilon.min(bottleneck.max(f64::MIN_POSITIVE));
    let clearance = scale / 48.0;
    let conflict = clearance / 4.0;

    // Exchange targets of nearly touching pairs while that shortens the total
    // length and keeps every pair within the bottleneck.
    let mut swaps = 0usize;
    let swap_cap = moving.len().pow(3).max(8);
    'outer: loop {
        for (a, &i) in moving.iter().enumerate() {
            for &j in &moving[a + 1..] {
                let (xi, yi) = (&pairs[i].0, &pairs[i].1);
                let (xj, yj) = (&pairs[j].0, &pairs[j].1);
                if segment_distance(xi, yi, xj, yj) >= conflict {
                    continue;
                }
                let (di, dj) = (euclidean(xi, yj), euclidean(xj, yi));
                if di.max(dj) <= bottleneck && di + dj < euclidean(xi, yi) + euclidean(xj, yj) - 1e-12 {
                    let yi = pairs[i].1.clone();
                    pairs[i].1 = pairs[j].1.clone();
                    pairs[j].1 = yi;
                    swaps += 1;
                    if swaps >= swap_cap {
                        break 'outer;
                    }
                    continue 'outer;
                }
            }
        }
        break;
    }

    let mut paths: Vec<Vec<Vec<f64>>> = pairs
        .iter()
        .map(|(x, y)| if x == y { vec![x.clone()] } else { vec![x.clone(), y.clone()] })
        .collect();
    let router = Router {
        body,
        epsilon,
        bottleneck,
        clearance,
        detour: options.detour_radius.unwrap_or(epsilon / 8.0),
    };
    let budget = (moving.len() * moving.len()).max(4);
    let mut reroutes = 0usize;
    let mut attempts = 0usize;
    loop {
        let Some((i, j)) = first_conflict(&paths, &moving, conflict) else { break };
        attempts += 1;
        if attempts > budget {
            return Err(Error::ConstructionFailure {
                attempts: budget,
                reason: format!("paths {i} and {j} still pass within {conflict:.3e}"),
            });
        }
        // Later pairs in the order are rerouted first; stationary pairs never move.
        let candidates: Vec<usize> = [j, i].into_iter().filter(|k| paths[*k].len() > 1).collect();
        let mut done = false;
        for k in candidates {
            let obstacles: Vec<&[Vec<f64>]> = (0..paths.len()).filter(|&o| o != k).map(|o| paths[o].as_slice()).collect();
            if let Some(p) = router.route(&pairs[k].0, &pairs[k].1, &obstacles) {
                paths[k] = p;
                reroutes += 1;
                done = true;
                break;
            }
        }
        if !done {
            return Err(Error::ConstructionFailure {
                attempts,
                reason: format!("no detour separates paths {i} and {j}"),
            });
        }
    }

    let radii: Vec<f64> = (0..paths.len())
        .map(|i| {
            if paths[i].len() < 2 {
                return 0.0;
            }
            let gap = (0..paths.len())
                .filter(|&o| o != i)
                .map(|o| path_distance(&paths[i], &paths[o]))
                .fold(f64::INFINITY, f64::min);
            let margin = paths[i].iter().map(|p| body.margin(p)).fold(f64::INFINITY, f64::min);
            (epsilon / 16.0).min(gap / 3.0).min(margin / 2.0)
        })
        .collect();
    if radii.iter().zip(&paths).any(|(r, p)| p.len() > 1 && !(*r > 0.0)) {
        return Err(Error::ConstructionFailure {
            attempts,
            reason: "a tube would have zero radius".into(),
        });
    }
    let boxes = bounding_boxes(&paths, &radii);
    let spacing = options.grid_spacing.unwrap_or(epsilon / 10.0);
    let mut h = TubeHomeomorphism {
        dimension: dim,
        epsilon,
        bottleneck,
        pairs,
        paths,
        radii,
        swaps,
        reroutes,
        grid_spacing: spacing,
        grid_points: 0,
        global_displacement: 0.0,
        certificates: Vec::new(),
        boxes,
    };
    h.certify(body, options.skip_grid);
    Ok(h)
}

fn first_conflict(paths: &[Vec<Vec<f64>>], moving: &[usize], conflict: f64) -> Option<(usize, usize)> {
    // Pairs (i, j) with i < j; the later one of a moving/moving conflict is
    // reported second, a stationary point always first.
    for i in 0..paths.len() {
        for j in i + 1..paths.len() {
            if !moving.contains(&i) && !moving.contains(&j) {
                continue;
            }
            if path_distance(&paths[i], &paths[j]) < conflict {
                return Some(if moving.contains(&j) { (i, j) } else { (j, i) });
            }
        }
    }
    None
}

impl TubeHomeomorphism {
    fn certify(&mut self, body: &ConvexBody, skip_grid: bool) {
        let eps = self.epsilon;
        let b = self.bottleneck;
        let mut certs = Vec::new();
        certs.push(Certificate::eq("h(F) = G mismatches", self.endpoint_mismatches() as f64, 0.0, 0.0));
        let (grid, count) = if skip_grid { (0.0, 0) } else { self.grid_displacement(body, self.grid_spacing) };
        let samples = self.tube_sample_displacement();
        self.grid_points = count;
        self.global_displacement = grid.max(samples);
        certs.push(Certificate::le("grid and tube-sample displacement <= b(F,G) + eps", self.global_displacement, b + eps, 0.0));
        let support = self
            .paths
            .iter()
            .zip(&self.radii)
            .map(|(p, r)| path_diameter(p) + 2.0 * SQRT_2 * r)
            .fold(0.0, f64::max);
        certs.push(Certificate::le("tube diameter bound on displacement <= b(F,G) + eps", support, b + eps, 0.0));
        let mut overlap = f64::NEG_INFINITY;
        for i in 0..self.paths.len() {
            for j in i + 1..self.paths.len() {
                let reach = SQRT_2 * (self.radii[i] + self.radii[j]);
                overlap = overlap.max(reach - path_distance(&self.paths[i], &self.paths[j]));
            }
        }
        if self.paths.len() > 1 {
            certs.push(Certificate::lt("tube reach minus path gap (disjoint tubes)", overlap, 0.0));
        }
        let inside = self
            .paths
            .iter()
            .zip(&self.radii)
            .filter(|(p, _)| p.len() > 1)
            .map(|(p, r)| SQRT_2 * r - p.iter().map(|v| body.margin(v)).fold(f64::INFINITY, f64::min))
            .fold(f64::NEG_INFINITY, f64::max);
        if inside.is_finite() {
            certs.push(Certificate::lt("tube reach minus body margin (tubes inside)", inside, 0.0));
        }
        let ball = self
            .pairs
            .iter()
            .zip(&self.paths)
            .zip(&self.radii)
            .map(|(((x, y), p), r)| {
                let m = midpoint(x, y);
                p.iter().map(|v| euclidean(v, &m)).fold(0.0, f64::max) + SQRT_2 * r
            })
            .fold(0.0, f64::max);
        certs.push(Certificate::le("tube distance from pair midpoint <= b(F,G)/2 + eps/4", ball, 0.5 * b + 0.25 * eps, 0.0));
        self.certificates = certs;
    }
}
