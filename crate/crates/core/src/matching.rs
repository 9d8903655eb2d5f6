//! Spatial matching distance between point sets, with oracle and ablations.
//!
//! The primary metric pairs the smaller set one-to-one with the larger set
//! at minimal total Euclidean cost, charges a constant penalty per
//! unmatched point of the larger set, and normalizes by the larger
//! cardinality:
//!
//! ```text
//! dist(P, Q) = (M(P, Q) + (N_Q - N_P) * C) / N_Q,   N_P <= N_Q
//! ```
//!
//! where `M` is the optimal injection cost and `C` is the penalty constant
//! (the patch diagonal in the intended use). The matching is solved exactly
//! with a shortest-augmenting-path assignment solver; patch cardinalities
//! are small enough that O(n^3) is cheap, and an approximate matching would
//! contaminate everything built on top of the surrogate.
//!
//! Three ablation distances accompany it: the absolute counting difference,
//! the discrete 1-Wasserstein distance between the uniform empirical
//! measures (with a constant-penalty rule when exactly one side is empty),
//! and a "Hungarian drop" variant that ignores unmatched points entirely.

use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::geometry::PointSet;

/// Errors from the distance computations.
#[derive(Debug, Clone, PartialEq)]
pub enum MatchingError {
    /// The two point sets live in differently sized frames.
    FrameMismatch,
    /// A coordinate was NaN or infinite.
    InvalidInput,
    /// The penalty constant must be finite and positive.
    InvalidPenalty,
    /// Input too large for the factorial brute-force oracle.
    TooLargeForOracle { max_len: usize, limit: usize },
}

impl fmt::Display for MatchingError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatchingError::FrameMismatch => write!(f, "point sets have mismatched frames"),
            MatchingError::InvalidInput => write!(f, "non-finite coordinate in input"),
            MatchingError::InvalidPenalty => write!(f, "penalty constant must be finite and > 0"),
            MatchingError::TooLargeForOracle { max_len, limit } => write!(
                f,
                "brute-force oracle limited to {limit} points per set, got {max_len}"
            ),
        }
    }
}

impl core::error::Error for MatchingError {}

/// Cardinality guard for [`brute_force_matching`].
pub const ORACLE_LIMIT: usize = 9;

/// Result of a spatial matching between two point sets `a` and `b`.
///
/// `pairs` holds `(index into a, index into b)` tuples forming an injective
/// map from the smaller set into the larger one; every index of the smaller
/// set appears exactly once. Only `matched_cost` and `distance` are unique;
/// among cost-equal optimal matchings any one may be reported.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    /// Matched index pairs, `(a_index, b_index)`.
    pub pairs: Vec<(usize, usize)>,
    /// Sum of Euclidean lengths over matched pairs, minimal over all
    /// injections of the smaller set into the larger.
    pub matched_cost: f64,
    /// `max(N_a, N_b) - min(N_a, N_b)`.
    pub unmatched_count: usize,
    /// `unmatched_count * penalty_c`.
    pub penalty: f64,
    /// `(matched_cost + penalty) / max(N_a, N_b)`; zero when both sets are
    /// empty.
    pub distance: f64,
}

fn validate_pair(a: &PointSet, b: &PointSet) -> Result<(), MatchingError> {
    if a.points().iter().chain(b.points()).any(|p| !p.is_finite()) {
        return Err(MatchingError::InvalidInput);
    }
    Ok(())
}

fn validate_penalty(penalty_c: f64) -> Result<(), MatchingError> {
    if !penalty_c.is_finite() || penalty_c <= 0.0 {
        return Err(MatchingError::InvalidPenalty);
    }
    Ok(())
}

/// Euclidean cost matrix between the smaller set (rows) and larger set
/// (columns).
fn cost_matrix(small: &PointSet, large: &PointSet) -> Vec<Vec<f64>> {
    small
        .points()
        .iter()
        .map(|p| large.points().iter().map(|q| p.distance(q)).collect())
        .collect()
}

/// Sums matched-pair costs in a canonical order so the result is
/// bit-identical regardless of argument orientation.
fn summed_cost(costs: &mut Vec<f64>) -> f64 {
    costs.sort_by(f64::total_cmp);
    costs.iter().sum()
}

fn assemble(
    a_is_small: bool,
    row_to_col: &[usize],
    cost: &[Vec<f64>],
    n_large: usize,
    penalty_c: f64,
) -> MatchResult {
    let mut pair_costs: Vec<f64> = row_to_col
        .iter()
        .enumerate()
        .map(|(i, &j)| cost[i][j])
        .collect();
    let matched_cost = summed_cost(&mut pair_costs);
    let pairs: Vec<(usize, usize)> = row_to_col
        .iter()
        .enumerate()
        .map(|(i, &j)| if a_is_small { (i, j) } else { (j, i) })
        .collect();
    let unmatched_count = n_large - row_to_col.len();
    let penalty = unmatched_count as f64 * penalty_c;
    let distance = if n_large == 0 {
        0.0
    } else {
        (matched_cost + penalty) / n_large as f64
    };
    MatchResult {
        pairs,
        matched_cost,
        unmatched_count,
        penalty,
        distance,
    }
}

/// Exact spatial matching distance between two point sets sharing a frame.
///
/// The smaller-cardinality set is matched injectively into the larger one
/// at minimal total Euclidean cost (ties between equal cardinalities treat
/// the first argument as the smaller side); each unmatched point of the
/// larger set contributes `penalty_c`; the total is normalized by the
/// larger cardinality. Two empty sets have distance zero.
pub fn spatial_matching_distance(
    a: &PointSet,
    b: &PointSet,
    penalty_c: f64,
) -> Result<MatchResult, MatchingError> {
    validate_penalty(penalty_c)?;
    if !a.same_frame(b) {
        return Err(MatchingError::FrameMismatch);
    }
    validate_pair(a, b)?;
    let a_is_small = a.len() <= b.len();
    let (small, large) = if a_is_small { (a, b) } else { (b, a) };
    if large.is_empty() {
        return Ok(assemble(a_is_small, &[], &[], 0, penalty_c));
    }
    let cost = cost_matrix(small, large);
    let row_to_col = solve_assignment(&cost, large.len());
    Ok(assemble(a_is_small, &row_to_col, &cost, large.len(), penalty_c))
}

/// Brute-force oracle for [`spatial_matching_distance`]: enumerates every
/// injection of the smaller set into the larger and returns the minimum.
/// Guarded to at most [`ORACLE_LIMIT`] points per set.
pub fn brute_force_matching(
    a: &PointSet,
    b: &PointSet,
    penalty_c: f64,
) -> Result<MatchResult, MatchingError> {
    validate_penalty(penalty_c)?;
    if !a.same_frame(b) {
        return Err(MatchingError::FrameMismatch);
    }
    validate_pair(a, b)?;
    let max_len = a.len().max(b.len());
    if max_len > ORACLE_LIMIT {
        return Err(MatchingError::TooLargeForOracle {
            max_len,
            limit: ORACLE_LIMIT,
        });
    }
    let a_is_small = a.len() <= b.len();
    let (small, large) = if a_is_small { (a, b) } else { (b, a) };
    if large.is_empty() {
        return Ok(assemble(a_is_small, &[], &[], 0, penalty_c));
    }
    let cost = cost_matrix(small, large);

    let mut best_cost = f64::INFINITY;
    let mut best: Vec<usize> = Vec::new();
    let mut current = vec![0usize; small.len()];
    let mut used = vec![false; large.len()];

    fn recurse(
        row: usize,
        acc: f64,
        cost: &[Vec<f64>],
        used: &mut [bool],
        current: &mut [usize],
        best_cost: &mut f64,
        best: &mut Vec<usize>,
    ) {
        if row == cost.len() {
            if acc < *best_cost {
                *best_cost = acc;
                best.clear();
                best.extend_from_slice(current);
            }
            return;
        }
        for col in 0..used.len() {
            if !used[col] {
                used[col] = true;
                current[row] = col;
                recurse(row + 1, acc + cost[row][col], cost, used, current, best_cost, best);
                used[col] = false;
            }
        }
    }

    if small.is_empty() {
        best.clear();
    } else {
        recurse(0, 0.0, &cost, &mut used, &mut current, &mut best_cost, &mut best);
    }
    Ok(assemble(a_is_small, &best, &cost, large.len(), penalty_c))
}

/// Absolute counting difference `|N_a - N_b|` (the ACD ablation surrogate).
pub fn counting_difference(a: &PointSet, b: &PointSet) -> f64 {
    a.len().abs_diff(b.len()) as f64
}

/// Matching-only distance that drops unmatched points: the optimal
/// injection cost divided by the smaller cardinality. Returns 0 when either
/// set is empty — nothing matched, nothing penalized, which is exactly the
/// deficiency this ablation exposes.
pub fn hungarian_drop_distance(a: &PointSet, b: &PointSet) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let cost = cost_matrix(small, large);
    let row_to_col = solve_assignment(&cost, large.len());
    let mut pair_costs: Vec<f64> = row_to_col
        .iter()
        .enumerate()
        .map(|(i, &j)| cost[i][j])
        .collect();
    summed_cost(&mut pair_costs) / small.len() as f64
}

/// Discrete 1-Wasserstein distance between the uniform empirical measures
/// of the two sets (mass `1/N_a` per point of `a`, `1/N_b` per point of
/// `b`), solved as an exact transportation problem on the Euclidean cost
/// matrix.
///
/// When exactly one side is empty the value is `penalty_c` (all mass pays
/// the constant super-pixel penalty); two empty sides give 0.
pub fn wasserstein_distance(
    a: &PointSet,
    b: &PointSet,
    penalty_c: f64,
) -> Result<f64, MatchingError> {
    validate_penalty(penalty_c)?;
    validate_pair(a, b)?;
    match (a.is_empty(), b.is_empty()) {
        (true, true) => return Ok(0.0),
        (true, false) | (false, true) => return Ok(penalty_c),
        (false, false) => {}
    }
    let na = a.len();
    let nb = b.len();
    // Scale masses to integers: each a-point supplies nb units, each
    // b-point demands na units; one unit is 1/(na*nb) of mass.
    let cost = cost_matrix(a, b);
    let total = min_cost_transport(&cost, nb as i64, na as i64);
    Ok(total / (na as f64 * nb as f64))
}

// ---------------------------------------------------------------------------
// Assignment solver
// ---------------------------------------------------------------------------

/// Shortest-augmenting-path assignment on a rectangular cost matrix with
/// `rows <= cols`. Returns, for each row, its assigned column. O(r^2 c).
fn solve_assignment(cost: &[Vec<f64>], cols: usize) -> Vec<usize> {
    let rows = cost.len();
    debug_assert!(rows <= cols);
    if rows == 0 {
        return Vec::new();
    }
    // 1-indexed potentials over rows (u) and columns (v); p[j] is the row
    // matched to column j (0 = free). Column 0 is a virtual root.
    let mut u = vec![0.0f64; rows + 1];
    let mut v = vec![0.0f64; cols + 1];
    let mut p = vec![0usize; cols + 1];
    let mut way = vec![0usize; cols + 1];

    for i in 1..=rows {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; cols + 1];
        let mut used = vec![false; cols + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=cols {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=cols {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut row_to_col = vec![usize::MAX; rows];
    for j in 1..=cols {
        if p[j] > 0 {
            row_to_col[p[j] - 1] = j - 1;
        }
    }
    debug_assert!(row_to_col.iter().all(|&c| c != usize::MAX));
    row_to_col
}

// ---------------------------------------------------------------------------
// Transportation solver (exact min-cost flow)
// ---------------------------------------------------------------------------

struct FlowEdge {
    to: usize,
    cap: i64,
    cost: f64,
}

struct FlowGraph {
    edges: Vec<FlowEdge>,
    adj: Vec<Vec<usize>>,
}

impl FlowGraph {
    fn new(nodes: usize) -> Self {
        FlowGraph {
            edges: Vec::new(),
            adj: vec![Vec::new(); nodes],
        }
    }

    fn add_edge(&mut self, from: usize, to: usize, cap: i64, cost: f64) {
        self.adj[from].push(self.edges.len());
        self.edges.push(FlowEdge { to, cap, cost });
        self.adj[to].push(self.edges.len());
        self.edges.push(FlowEdge {
            to: from,
            cap: 0,
            cost: -cost,
        });
    }
}

#[derive(PartialEq)]
struct HeapEntry {
    dist: f64,
    node: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> core::cmp::Ordering {
        // Min-heap on distance.
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<core::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Min-cost flow of the full supply through a bipartite transportation
/// graph: every row node supplies `supply_per_row` units, every column node
/// demands `demand_per_col`. Successive shortest paths with Dijkstra over
/// Johnson-reduced costs; all arc costs are non-negative.
fn min_cost_transport(cost: &[Vec<f64>], supply_per_row: i64, demand_per_col: i64) -> f64 {
    let rows = cost.len();
    let cols = cost[0].len();
    let n = rows + cols + 2;
    let source = 0;
    let sink = n - 1;
    let mut g = FlowGraph::new(n);
    for i in 0..rows {
        g.add_edge(source, 1 + i, supply_per_row, 0.0);
        for j in 0..cols {
            g.add_edge(1 + i, 1 + rows + j, i64::MAX / 4, cost[i][j]);
        }
    }
    for j in 0..cols {
        g.add_edge(1 + rows + j, sink, demand_per_col, 0.0);
    }

    let mut potential = vec![0.0f64; n];
    let mut total_cost = 0.0f64;
    let mut remaining = supply_per_row * rows as i64;
    debug_assert_eq!(remaining, demand_per_col * cols as i64);

    let mut dist = vec![f64::INFINITY; n];
    let mut prev_edge = vec![usize::MAX; n];

    while remaining > 0 {
        dist.iter_mut().for_each(|d| *d = f64::INFINITY);
        prev_edge.iter_mut().for_each(|e| *e = usize::MAX);
        dist[source] = 0.0;
        let mut heap = BinaryHeap::new();
        heap.push(HeapEntry {
            dist: 0.0,
            node: source,
        });
        while let Some(HeapEntry { dist: d, node }) = heap.pop() {
            if d > dist[node] {
                continue;
            }
            for &eid in &g.adj[node] {
                let e = &g.edges[eid];
                if e.cap <= 0 {
                    continue;
                }
                // Reduced cost; clamp tiny float negatives to zero.
                let rc = (e.cost + potential[node] - potential[e.to]).max(0.0);
                let nd = d + rc;
                if nd < dist[e.to] {
                    dist[e.to] = nd;
                    prev_edge[e.to] = eid;
                    heap.push(HeapEntry { dist: nd, node: e.to });
                }
            }
        }
        debug_assert!(dist[sink].is_finite(), "transport network disconnected");
        for v in 0..n {
            if dist[v].is_finite() {
                potential[v] += dist[v];
            }
        }
        // Bottleneck along the shortest path, then augment.
        let mut bottleneck = remaining;
        let mut node = sink;
        while node != source {
            let eid = prev_edge[node];
            bottleneck = bottleneck.min(g.edges[eid].cap);
            node = g.edges[eid ^ 1].to;
        }
        let mut node = sink;
        while node != source {
            let eid = prev_edge[node];
            g.edges[eid].cap -= bottleneck;
            g.edges[eid ^ 1].cap += bottleneck;
            total_cost += bottleneck as f64 * g.edges[eid].cost;
            node = g.edges[eid ^ 1].to;
        }
        remaining -= bottleneck;
    }
    total_cost
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;
    use alloc::vec;
    use approx::assert_relative_eq;

    const PENALTY_64: f64 = 90.50966799187809; // 64 * sqrt(2)

    fn set(pts: &[(f64, f64)], w: f64, h: f64) -> PointSet {
        PointSet::new(pts.iter().map(|&(x, y)| Point::new(x, y)).collect(), w, h).unwrap()
    }

    #[test]
    fn identical_sets_have_zero_distance() {
        let a = set(&[(1.0, 2.0), (30.0, 40.0), (30.0, 40.0)], 64.0, 64.0);
        let r = spatial_matching_distance(&a, &a, PENALTY_64).unwrap();
        assert_eq!(r.distance, 0.0);
        assert_eq!(r.matched_cost, 0.0);
        assert_eq!(r.unmatched_count, 0);
    }

    #[test]
    fn empty_vs_singleton_costs_full_penalty() {
        let a = PointSet::empty(64.0, 64.0).unwrap();
        let b = set(&[(5.0, 5.0)], 64.0, 64.0);
        let r = spatial_matching_distance(&a, &b, PENALTY_64).unwrap();
        assert_eq!(r.matched_cost, 0.0);
        assert_eq!(r.unmatched_count, 1);
        assert_relative_eq!(r.distance, PENALTY_64, max_relative = 1e-12);
    }

    #[test]
    fn two_vs_three_matches_spec_example() {
        // P = {(0,0),(10,0)}, Q = {(0,1),(9,0),(30,30)}: optimal pairs
        // (0,0)<->(0,1) and (10,0)<->(9,0), M = 2, one unmatched point.
        let p = set(&[(0.0, 0.0), (10.0, 0.0)], 64.0, 64.0);
        let q = set(&[(0.0, 1.0), (9.0, 0.0), (30.0, 30.0)], 64.0, 64.0);
        let r = spatial_matching_distance(&p, &q, PENALTY_64).unwrap();
        let oracle = brute_force_matching(&p, &q, PENALTY_64).unwrap();
        assert_relative_eq!(r.matched_cost, 2.0, max_relative = 1e-12);
        assert_relative_eq!(r.matched_cost, oracle.matched_cost, max_relative = 1e-12);
        assert_relative_eq!(r.distance, (2.0 + PENALTY_64) / 3.0, max_relative = 1e-12);
        // Frozen from the oracle: (2 + 64*sqrt(2)) / 3.
        assert_relative_eq!(r.distance, 30.836555997292696, max_relative = 1e-12);
        let mut pairs = r.pairs.clone();
        pairs.sort_unstable();
        assert_eq!(pairs, vec![(0, 0), (1, 1)]);
    }

    #[test]
    fn both_empty_is_zero() {
        let a = PointSet::empty(64.0, 64.0).unwrap();
        let r = spatial_matching_distance(&a, &a, PENALTY_64).unwrap();
        assert_eq!(r.distance, 0.0);
        let o = brute_force_matching(&a, &a, PENALTY_64).unwrap();
        assert_eq!(o.distance, 0.0);
    }

    #[test]
    fn frame_mismatch_is_rejected() {
        let a = PointSet::empty(64.0, 64.0).unwrap();
        let b = PointSet::empty(32.0, 64.0).unwrap();
        assert_eq!(
            spatial_matching_distance(&a, &b, PENALTY_64),
            Err(MatchingError::FrameMismatch)
        );
    }

    #[test]
    fn bad_penalty_is_rejected() {
        let a = PointSet::empty(64.0, 64.0).unwrap();
        assert_eq!(
            spatial_matching_distance(&a, &a, 0.0),
            Err(MatchingError::InvalidPenalty)
        );
        assert_eq!(
            spatial_matching_distance(&a, &a, f64::NAN),
            Err(MatchingError::InvalidPenalty)
        );
    }

    #[test]
    fn oracle_picks_nearer_of_two() {
        // P = {(0,0)}, Q = {(3,4),(10,10)}: injections cost 5 vs sqrt(200).
        let p = set(&[(0.0, 0.0)], 64.0, 64.0);
        let q = set(&[(3.0, 4.0), (10.0, 10.0)], 64.0, 64.0);
        let r = brute_force_matching(&p, &q, PENALTY_64).unwrap();
        assert_relative_eq!(r.matched_cost, 5.0, max_relative = 1e-12);
        assert_eq!(r.pairs, vec![(0, 0)]);
    }

    #[test]
    fn oracle_guard_rejects_large_inputs() {
        let pts: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 0.0)).collect();
        let a = set(&pts, 64.0, 64.0);
        assert!(matches!(
            brute_force_matching(&a, &a, PENALTY_64),
            Err(MatchingError::TooLargeForOracle { .. })
        ));
    }

    #[test]
    fn counting_difference_cases() {
        let a3 = set(&[(1.0, 1.0), (2.0, 2.0), (3.0, 3.0)], 64.0, 64.0);
        let b5 = set(
            &[(1.0, 1.0), (2.0, 2.0), (3.0, 3.0), (4.0, 4.0), (5.0, 5.0)],
            64.0,
            64.0,
        );
        assert_eq!(counting_difference(&a3, &b5), 2.0);
        assert_eq!(counting_difference(&a3, &a3), 0.0);
        let empty = PointSet::empty(64.0, 64.0).unwrap();
        let b7 = set(&[(1.0, 1.0); 7], 64.0, 64.0);
        assert_eq!(counting_difference(&empty, &b7), 7.0);
    }

    #[test]
    fn wasserstein_single_forced_transport() {
        let a = set(&[(0.0, 0.0)], 64.0, 64.0);
        let b = set(&[(3.0, 4.0)], 64.0, 64.0);
        assert_relative_eq!(
            wasserstein_distance(&a, &b, PENALTY_64).unwrap(),
            5.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn wasserstein_splits_mass_one_to_two() {
        // Half of a's unit mass stays at (0,0), half moves 10 pixels.
        let a = set(&[(0.0, 0.0)], 64.0, 64.0);
        let b = set(&[(0.0, 0.0), (10.0, 0.0)], 64.0, 64.0);
        assert_relative_eq!(
            wasserstein_distance(&a, &b, PENALTY_64).unwrap(),
            5.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn wasserstein_empty_rules() {
        let empty = PointSet::empty(64.0, 64.0).unwrap();
        let b = set(&[(1.0, 1.0), (2.0, 2.0)], 64.0, 64.0);
        assert_eq!(wasserstein_distance(&empty, &empty, PENALTY_64).unwrap(), 0.0);
        assert_eq!(wasserstein_distance(&empty, &b, PENALTY_64).unwrap(), PENALTY_64);
        assert_eq!(wasserstein_distance(&b, &empty, PENALTY_64).unwrap(), PENALTY_64);
    }

    #[test]
    fn hungarian_drop_cases() {
        let a = set(&[(1.0, 1.0), (5.0, 5.0)], 64.0, 64.0);
        assert_eq!(hungarian_drop_distance(&a, &a), 0.0);
        let p = set(&[(0.0, 0.0)], 64.0, 64.0);
        let q = set(&[(3.0, 4.0), (10.0, 10.0)], 64.0, 64.0);
        assert_relative_eq!(hungarian_drop_distance(&p, &q), 5.0, max_relative = 1e-12);
        let empty = PointSet::empty(64.0, 64.0).unwrap();
        assert_eq!(hungarian_drop_distance(&empty, &q), 0.0);
        assert_eq!(hungarian_drop_distance(&empty, &empty), 0.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_points(max_len: usize) -> impl Strategy<Value = PointSet> {
            proptest::collection::vec((0.0f64..=64.0, 0.0f64..=64.0), 0..=max_len)
                .prop_map(|pts| {
                    PointSet::new(
                        pts.into_iter().map(|(x, y)| Point::new(x, y)).collect(),
                        64.0,
                        64.0,
                    )
                    .unwrap()
                })
        }

        proptest! {
            #[test]
            fn solver_agrees_with_oracle(a in arb_points(7), b in arb_points(7)) {
                let fast = spatial_matching_distance(&a, &b, PENALTY_64).unwrap();
                let slow = brute_force_matching(&a, &b, PENALTY_64).unwrap();
                prop_assert!((fast.matched_cost - slow.matched_cost).abs() < 1e-9);
                prop_assert!((fast.distance - slow.distance).abs() < 1e-9);
            }

            #[test]
            fn distance_is_symmetric(a in arb_points(12), b in arb_points(12)) {
                let ab = spatial_matching_distance(&a, &b, PENALTY_64).unwrap();
                let ba = spatial_matching_distance(&b, &a, PENALTY_64).unwrap();
                prop_assert_eq!(ab.distance, ba.distance);
                prop_assert_eq!(ab.matched_cost, ba.matched_cost);
            }

            #[test]
            fn identity_of_indiscernibles(a in arb_points(10), b in arb_points(10)) {
                let r = spatial_matching_distance(&a, &b, PENALTY_64).unwrap();
                let mut sa: Vec<_> = a.points().iter().map(|p| (p.x, p.y)).collect();
                let mut sb: Vec<_> = b.points().iter().map(|p| (p.x, p.y)).collect();
                sa.sort_by(|l, r| l.partial_cmp(r).unwrap());
                sb.sort_by(|l, r| l.partial_cmp(r).unwrap());
                prop_assert_eq!(r.distance == 0.0, sa == sb);
            }

            #[test]
            fn distance_bounded_by_diagonal(a in arb_points(12), b in arb_points(12)) {
                // Points lie inside the 64x64 patch and the penalty is its
                // diagonal, so 0 <= dist <= C.
                let r = spatial_matching_distance(&a, &b, PENALTY_64).unwrap();
                prop_assert!(r.distance >= 0.0);
                prop_assert!(r.distance <= PENALTY_64 + 1e-9);
            }

            #[test]
            fn wasserstein_matches_assignment_on_equal_cards(
                pts in proptest::collection::vec(
                    ((0.0f64..=64.0, 0.0f64..=64.0), (0.0f64..=64.0, 0.0f64..=64.0)),
                    1..=8,
                )
            ) {
                let n = pts.len();
                let a = PointSet::new(
                    pts.iter().map(|&((x, y), _)| Point::new(x, y)).collect(),
                    64.0, 64.0,
                ).unwrap();
                let b = PointSet::new(
                    pts.iter().map(|&(_, (x, y))| Point::new(x, y)).collect(),
                    64.0, 64.0,
                ).unwrap();
                let w = wasserstein_distance(&a, &b, PENALTY_64).unwrap();
                let m = spatial_matching_distance(&a, &b, PENALTY_64).unwrap();
                prop_assert!((w - m.matched_cost / n as f64).abs() < 1e-7);
                // With equal cardinalities the drop variant agrees too.
                let h = hungarian_drop_distance(&a, &b);
                prop_assert!((h - m.distance).abs() < 1e-9);
            }
        }
    }
}
