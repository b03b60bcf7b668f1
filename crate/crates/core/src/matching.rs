//! Exact combinatorial engines: bottleneck matching, min-sum assignment,
//! nested bottleneck ordering and the cyclic matching of sorted angle sets.
//!
//! All routines are deterministic. Bipartite matching uses augmenting paths
//! explored in ascending column order, so equal inputs give equal outputs.

use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};

/// Square matrix of nonnegative finite distances, entry `(i, j) = d(x_i, y_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl DistanceMatrix {
    pub fn new(n: usize, entries: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("distance matrix", "n must be at least 1"));
        }
        if entries.len() != n * n {
            return Err(Error::SizeMismatch {
                left: entries.len(),
                right: n * n,
            });
        }
        if let Some(bad) = entries.iter().find(|e| !e.is_finite() || **e < 0.0) {
            return Err(Error::invalid(
                "distance matrix",
                format!("entry {bad} is not a finite nonnegative number"),
            ));
        }
        Ok(Self { n, entries })
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                entries.push(f(i, j));
            }
        }
        Self::new(n, entries)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Sorted distinct entries; the bottleneck optimum is always one of them.
    fn distinct_values(&self) -> Vec<f64> {
        let mut values = self.entries.clone();
        values.sort_by(f64::total_cmp);
        values.dedup();
        values
    }
}

/// A permutation together with its bottleneck (max) and assignment (sum) values.
#[derive(Debug, Clone, PartialEq)]
pub struct Matching {
    /// `permutation[i] = σ(i)`: row `i` is matched to column `σ(i)`.
    pub permutation: Vec<usize>,
    pub bottleneck_value: f64,
    pub assignment_value: f64,
}

impl Matching {
    /// The assignment value is the correctly rounded sum, so permutations
    /// that tie exactly report the same value.
    pub fn from_permutation(d: &DistanceMatrix, permutation: Vec<usize>) -> Self {
        let mut bottleneck_value = 0.0f64;
        for (i, &j) in permutation.iter().enumerate() {
            bottleneck_value = bottleneck_value.max(d.get(i, j));
        }
        let assignment_value = exact_sum(permutation.iter().enumerate().map(|(i, &j)| d.get(i, j)));
        Self {
            permutation,
            bottleneck_value,
            assignment_value,
        }
    }
}

/// Correctly rounded sum of finite values (Shewchuk's non-overlapping
/// partials, rounded half-even at the end).
pub fn exact_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut partials: Vec<f64> = Vec::new();
    for mut x in values {
        let mut kept = 0;
        for k in 0..partials.len() {
            let mut y = partials[k];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                partials[kept] = lo;
                kept += 1;
            }
            x = hi;
        }
        partials.truncate(kept);
        partials.push(x);
    }
    let Some(mut hi) = partials.pop() else {
        return 0.0;
    };
    let mut lo = 0.0;
    while let Some(y) = partials.pop() {
        let x = hi;
        hi = x + y;
        lo = y - (hi - x);
        if lo != 0.0 {
            break;
        }
    }
    // A half-way tail decided by the next partial.
    if let Some(&next) = partials.last() {
        if (lo < 0.0 && next < 0.0) || (lo > 0.0 && next > 0.0) {
            let y = lo * 2.0;
            let x = hi + y;
            if y == x - hi {
                hi = x;
            }
        }
    }
    hi
}

const UNMATCHED: usize = usize::MAX;

/// Kuhn-style augmenting path search restricted to edges with `d <= threshold`
/// and to the currently alive rows and columns.
#[derive(Clone)]
struct ThresholdMatcher<'a> {
    d: &'a DistanceMatrix,
    row_alive: Vec<bool>,
    col_alive: Vec<bool>,
    mate_row: Vec<usize>,
    mate_col: Vec<usize>,
    seen: Vec<u32>,
    stamp: u32,
}

impl<'a> ThresholdMatcher<'a> {
    fn new(d: &'a DistanceMatrix) -> Self {
        let n = d.n();
        Self {
            d,
            row_alive: vec![true; n],
            col_alive: vec![true; n],
            mate_row: vec![UNMATCHED; n],
            mate_col: vec![UNMATCHED; n],
            seen: vec![0; n],
            stamp: 0,
        }
    }

    fn with_permutation(d: &'a DistanceMatrix, permutation: &[usize]) -> Self {
        let mut m = Self::new(d);
        for (r, &c) in permutation.iter().enumerate() {
            m.mate_row[r] = c;
            m.mate_col[c] = r;
        }
        m
    }

    fn augment(&mut self, row: usize, threshold: f64) -> bool {
        self.stamp = self.stamp.wrapping_add(1);
        if self.stamp == 0 {
            self.seen.iter_mut().for_each(|s| *s = 0);
            self.stamp = 1;
        }
        self.dfs(row, threshold)
    }

    fn dfs(&mut self, row: usize, threshold: f64) -> bool {
        let n = self.d.n();
        for c in 0..n {
            if !self.col_alive[c] || self.seen[c] == self.stamp || self.d.get(row, c) > threshold {
                continue;
            }
            self.seen[c] = self.stamp;
            let holder = self.mate_col[c];
            if holder == UNMATCHED || self.dfs(holder, threshold) {
                self.mate_col[c] = row;
                self.mate_row[row] = c;
                return true;
            }
        }
        false
    }

    /// Augments every free alive row in ascending order. Returns whether the
    /// matching is perfect on the alive rows afterwards.
    fn fill(&mut self, threshold: f64) -> bool {
        let mut perfect = true;
        for r in 0..self.d.n() {
            if self.row_alive[r] && self.mate_row[r] == UNMATCHED && !self.augment(r, threshold) {
                perfect = false;
            }
        }
        perfect
    }

    fn unmatch_row(&mut self, r: usize) {
        let c = self.mate_row[r];
        if c != UNMATCHED {
            self.mate_col[c] = UNMATCHED;
            self.mate_row[r] = UNMATCHED;
        }
    }

    fn drop_above(&mut self, threshold: f64) {
        for r in 0..self.d.n() {
            let c = self.mate_row[r];
            if c != UNMATCHED && self.d.get(r, c) > threshold {
                self.unmatch_row(r);
            }
        }
    }

    /// Removes row `r` and column `c` from the graph, freeing their partners.
    fn kill(&mut self, r: usize, c: usize) {
        self.unmatch_row(r);
        let holder = self.mate_col[c];
        if holder != UNMATCHED {
            self.unmatch_row(holder);
        }
        self.row_alive[r] = false;
        self.col_alive[c] = false;
    }

    fn max_matched(&self) -> f64 {
        (0..self.d.n())
            .filter(|&r| self.row_alive[r])
            .map(|r| self.d.get(r, self.mate_row[r]))
            .fold(0.0, f64::max)
    }

    /// No perfect matching of the alive part can use a threshold below this.
    fn trivial_lower_bound(&self) -> f64 {
        let n = self.d.n();
        let mut lb = 0.0f64;
        for r in (0..n).filter(|&r| self.row_alive[r]) {
            let m = (0..n)
                .filter(|&c| self.col_alive[c])
                .map(|c| self.d.get(r, c))
                .fold(f64::INFINITY, f64::min);
            lb = lb.max(m);
        }
        for c in (0..n).filter(|&c| self.col_alive[c]) {
            let m = (0..n)
                .filter(|&r| self.row_alive[r])
                .map(|r| self.d.get(r, c))
                .fold(f64::INFINITY, f64::min);
            lb = lb.max(m);
        }
        lb
    }
}

/// Whether the threshold graph `{(i, j) : d(i, j) <= t}` has a perfect matching.
pub fn threshold_feasible(d: &DistanceMatrix, t: f64) -> bool {
    ThresholdMatcher::new(d).fill(t)
}

/// Minimizes `max_i d(i, σ(i))` over permutations.
///
/// Binary search over the sorted distinct entries; each probe warm-starts from
/// the largest matching found at an infeasible threshold. The returned
/// permutation is recomputed from scratch at the optimal threshold so that it
/// only depends on the matrix.
pub fn bottleneck_match(d: &DistanceMatrix) -> Matching {
    let values = d.distinct_values();
    let base = ThresholdMatcher::new(d);
    let lb = base.trivial_lower_bound();
    let mut lo = values.partition_point(|v| *v < lb);
    let mut hi = values.len() - 1;
    let mut base = base;
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        let mut probe = base.clone();
        if probe.fill(values[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
            base = probe;
        }
    }
    let mut fresh = ThresholdMatcher::new(d);
    let perfect = fresh.fill(values[hi]);
    debug_assert!(perfect);
    Matching::from_permutation(d, fresh.mate_row)
}

/// Minimizes `Σ_i d(i, σ(i))` with the O(n³) shortest augmenting path
/// Hungarian method (row potentials `u`, column potentials `v`).
pub fn assignment_match(d: &DistanceMatrix) -> Matching {
    let n = d.n();
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    // owner[j] = 1-based row assigned to column j; column 0 is a sentinel.
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = d.get(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut permutation = vec![0usize; n];
    for j in 1..=n {
        permutation[owner[j] - 1] = j - 1;
    }
    Matching::from_permutation(d, permutation)
}

/// Pairs `(row, col)` listed so that for every prefix `0..=i`,
/// `d(pair_i)` equals the bottleneck distance of the prefix rows and columns.
///
/// Built from the last index down: take the bottleneck value `b` of what is
/// left, remove the lexicographically smallest pair with `d = b` whose removal
/// keeps a perfect matching below `b`, then lower `b` for the remainder.
pub fn nested_bottleneck_pairs(d: &DistanceMatrix) -> Vec<(usize, usize)> {
    let n = d.n();
    let values = d.distinct_values();
    let initial = bottleneck_match(d);
    let mut state = ThresholdMatcher::with_permutation(d, &initial.permutation);
    let mut b = initial.bottleneck_value;
    let mut out = vec![(0, 0); n];
    for idx in (0..n).rev() {
        let (pair, next) = remove_bottleneck_pair(&state, b);
        out[idx] = pair;
        state = next;
        if idx > 0 {
            b = lower_bottleneck(&mut state, &values);
        }
    }
    out
}

fn remove_bottleneck_pair<'a>(
    state: &ThresholdMatcher<'a>,
    b: f64,
) -> ((usize, usize), ThresholdMatcher<'a>) {
    let n = state.d.n();
    for r in (0..n).filter(|&r| state.row_alive[r]) {
        for c in (0..n).filter(|&c| state.col_alive[c]) {
            if state.d.get(r, c) != b {
                continue;
            }
            let mut trial = state.clone();
            trial.kill(r, c);
            if trial.fill(b) {
                return ((r, c), trial);
            }
        }
    }
    // The max edge of the current optimal matching always qualifies.
    unreachable!("optimal matching has no edge at its bottleneck value")
}

/// Lowers the (perfect, alive-restricted) matching in `state` to an optimal one
/// and returns the new bottleneck value.
fn lower_bottleneck(state: &mut ThresholdMatcher<'_>, values: &[f64]) -> f64 {
    let current = state.max_matched();
    let lb = state.trivial_lower_bound();
    let mut lo = values.partition_point(|v| *v < lb);
    let mut hi = values.partition_point(|v| *v < current);
    let mut best: Option<ThresholdMatcher<'_>> = None;
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        let mut probe = state.clone();
        probe.drop_above(values[mid]);
        if probe.fill(values[mid]) {
            hi = mid;
            best = Some(probe);
        } else {
            lo = mid + 1;
        }
    }
    if let Some(best) = best {
        *state = best;
    }
    state.max_matched()
}

/// Reorders `f` and `g` so that every prefix pair realizes the prefix
/// bottleneck distance.
pub fn nested_bottleneck_order<P: Clone>(
    f: &[P],
    g: &[P],
    metric: impl Fn(&P, &P) -> f64,
) -> Result<(Vec<P>, Vec<P>)> {
    if f.len() != g.len() {
        return Err(Error::SizeMismatch {
            left: f.len(),
            right: g.len(),
        });
    }
    let d = DistanceMatrix::from_fn(f.len(), |i, j| metric(&f[i], &g[j]))?;
    let pairs = nested_bottleneck_pairs(&d);
    Ok((
        pairs.iter().map(|&(i, _)| f[i].clone()).collect(),
        pairs.iter().map(|&(_, j)| g[j].clone()).collect(),
    ))
}

/// Angular distance on the circle, in `[0, π]`.
#[inline]
pub fn circular_gap(s: f64, t: f64) -> f64 {
    let d = (s - t).abs() % TAU;
    d.min(TAU - d)
}

/// Chordal distance `2 r sin(gap / 2)` between two angles.
#[inline]
pub fn chordal(s: f64, t: f64, radius: f64) -> f64 {
    2.0 * radius * (circular_gap(s, t) / 2.0).sin()
}

/// Result of matching two anticlockwise-sorted angle lists by a cyclic shift.
#[derive(Debug, Clone, PartialEq)]
pub struct CyclicMatching {
    /// `x_i` is paired with `y_{(i + shift) mod n}`.
    pub shift: usize,
    pub matching: Matching,
}

/// Largest size for which every shift is evaluated directly.
const EXHAUSTIVE_SHIFTS: usize = 256;

/// Matches sorted angle lists `x` and `y` by the best cyclic shift under the
/// chordal metric. Returns the smallest optimal shift.
///
/// Small inputs evaluate all `n` shifts. Larger inputs binary search the
/// angular threshold over its `f64` bit pattern: for a fixed threshold each
/// `x_i` admits a cyclic interval of shifts, and coverage counting finds the
/// shifts admitted by every `i` in linear time.
pub fn cyclic_bottleneck_match(x: &[f64], y: &[f64], radius: f64) -> Result<CyclicMatching> {
    if x.len() != y.len() {
        return Err(Error::SizeMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.is_empty() {
        return Err(Error::invalid("angles", "at least one angle is required"));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::invalid("radius", format!("{radius} is not positive")));
    }
    check_sorted_angles("x angles", x)?;
    check_sorted_angles("y angles", y)?;
    let n = x.len();
    let shift = if n <= EXHAUSTIVE_SHIFTS {
        exhaustive_shift(x, y, radius)
    } else {
        threshold_shift(x, y)
    };
    let permutation: Vec<usize> = (0..n).map(|i| (i + shift) % n).collect();
    let mut bottleneck_value = 0.0f64;
    let mut assignment_value = 0.0;
    for (i, &j) in permutation.iter().enumerate() {
        let e = chordal(x[i], y[j], radius);
        bottleneck_value = bottleneck_value.max(e);
        assignment_value += e;
    }
    Ok(CyclicMatching {
        shift,
        matching: Matching {
            permutation,
            bottleneck_value,
            assignment_value,
        },
    })
}

fn check_sorted_angles(field: &'static str, a: &[f64]) -> Result<()> {
    if a.iter().any(|t| !(0.0..TAU).contains(t)) {
        return Err(Error::invalid(field, "angles must lie in [0, 2π)"));
    }
    if a.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid(field, "angles must be sorted anticlockwise"));
    }
    Ok(())
}

fn exhaustive_shift(x: &[f64], y: &[f64], radius: f64) -> usize {
    let n = x.len();
    let mut best = (f64::INFINITY, 0usize);
    for k in 0..n {
        let mut worst = 0.0f64;
        for i in 0..n {
            worst = worst.max(chordal(x[i], y[(i + k) % n], radius));
            if worst >= best.0 {
                break;
            }
        }
        if worst < best.0 {
            best = (worst, k);
        }
    }
    best.1
}

fn threshold_shift(x: &[f64], y: &[f64]) -> usize {
    if let Some(k) = feasible_shift(x, y, 0.0) {
        return k;
    }
    let mut lo = 0.0f64.to_bits();
    let mut hi = PI.to_bits();
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if feasible_shift(x, y, f64::from_bits(mid)).is_some() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    feasible_shift(x, y, f64::from_bits(hi)).expect("threshold π admits every shift")
}

/// Smallest shift `k` with `gap(x_i, y_{i+k}) <= theta` for all `i`, if any.
fn feasible_shift(x: &[f64], y: &[f64], theta: f64) -> Option<usize> {
    let n = x.len();
    let lifted = |l: usize| y[l % n] + TAU * ((l / n) as f64 - 1.0);
    let mut cover = vec![0i64; n + 1];
    let mut lo = 0usize;
    let mut hi = 0usize;
    for (i, &xi) in x.iter().enumerate() {
        while lo < 3 * n && lifted(lo) < xi - theta {
            lo += 1;
        }
        if hi < lo {
            hi = lo;
        }
        while hi < 3 * n && lifted(hi) <= xi + theta {
            hi += 1;
        }
        // admissible lifted indices: lo..hi
        let count = hi - lo;
        if count == 0 {
            return None;
        }
        if count >= n {
            cover[0] += 1;
            cover[n] -= 1;
            continue;
        }
        let start = (lo as i64 - n as i64 - i as i64).rem_euclid(n as i64) as usize;
        let end = start + count;
        if end <= n {
            cover[start] += 1;
            cover[end] -= 1;
        } else {
            cover[start] += 1;
            cover[n] -= 1;
            cover[0] += 1;
            cover[end - n] -= 1;
        }
    }
    let mut running = 0i64;
    for (k, delta) in cover.iter().take(n).enumerate() {
        running += delta;
        if running == n as i64 {
            return Some(k);
        }
    }
    None
}
