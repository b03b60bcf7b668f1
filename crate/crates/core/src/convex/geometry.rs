//! Small vector helpers for points stored as slices.

pub(crate) fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn midpoint(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect()
}

/// Distance between segments `[p1, q1]` and `[p2, q2]` (either may be a point).
pub(crate) fn segment_distance(p1: &[f64], q1: &[f64], p2: &[f64], q2: &[f64]) -> f64 {
    let d1 = sub(q1, p1);
    let d2 = sub(q2, p2);
    let r = sub(p1, p2);
    let a = dot(&d1, &d1);
    let e = dot(&d2, &d2);
    let f = dot(&d2, &r);
    let tiny = 1e-300;
    let (s, t);
    if a <= tiny && e <= tiny {
        return norm(&r);
    }
    if a <= tiny {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = dot(&d1, &r);
        if e <= tiny {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = dot(&d1, &d2);
            let denom = a * e - b * b;
            let s0 = if denom > 0.0 { ((b * f - c * e) / denom).clamp(0.0, 1.0) } else { 0.0 };
            let t0 = (b * s0 + f) / e;
            if t0 < 0.0 {
                t = 0.0;
                s = (-c / a).clamp(0.0, 1.0);
            } else if t0 > 1.0 {
                t = 1.0;
                s = ((b - c) / a).clamp(0.0, 1.0);
            } else {
                t = t0;
                s = s0;
            }
        }
    }
    p1.iter()
        .zip(&d1)
        .zip(p2.iter().zip(&d2))
        .map(|((p, d), (q, g))| {
            let w = p + d * s - q - g * t;
            w * w
        })
        .sum::<f64>()
        .sqrt()
}

/// Segments of a polyline; a single vertex counts as a degenerate segment.
pub(crate) fn segments(path: &[Vec<f64>]) -> impl Iterator<Item = (&[f64], &[f64])> {
    let single = (path.len() == 1).then(|| (path[0].as_slice(), path[0].as_slice()));
    path.windows(2)
        .map(|w| (w[0].as_slice(), w[1].as_slice()))
        .chain(single)
}

pub(crate) fn path_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let mut best = f64::INFINITY;
    for (p1, q1) in segments(a) {
        for (p2, q2) in segments(b) {
            best = best.min(segment_distance(p1, q1, p2, q2));
        }
    }
    best
}

/// Largest distance between two vertices of a polyline.
pub(crate) fn path_diameter(path: &[Vec<f64>]) -> f64 {
    let mut best = 0.0f64;
    for (i, a) in path.iter().enumerate() {
        for b in &path[i + 1..] {
            best = best.max(norm(&sub(a, b)));
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crossing_and_parallel_segments() {
        assert_eq!(segment_distance(&[0.0, 0.0], &[1.0, 1.0], &[0.0, 1.0], &[1.0, 0.0]), 0.0);
        assert!((segment_distance(&[0.0, 0.0], &[1.0, 0.0], &[0.0, 0.5], &[1.0, 0.5]) - 0.5).abs() < 1e-15);
        assert!((segment_distance(&[0.0, 0.0], &[1.0, 0.0], &[2.0, 0.0], &[3.0, 0.0]) - 1.0).abs() < 1e-15);
        assert!((segment_distance(&[0.0, 0.0, 0.0], &[1.0, 0.0, 0.0], &[0.5, 1.0, -1.0], &[0.5, 1.0, 1.0]) - 1.0).abs() < 1e-15);
        assert!((segment_distance(&[0.5, 0.3], &[0.5, 0.3], &[0.0, 0.0], &[1.0, 0.0]) - 0.3).abs() < 1e-15);
    }
}
