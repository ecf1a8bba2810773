//! Separation oracles for the spreading and triangle-inequality families, and
//! the feasibility report built from them.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{spread_bound, Objective, VectorProgram, VectorSolution};
use crate::par;

/// Up to this many nodes the triangle family is scanned exhaustively.
pub const FULL_TRIANGLE_SCAN_LIMIT: usize = 60;

/// Pivots examined per sampled triangle search.
const SAMPLED_PIVOTS: usize = 64;

/// Row-major `n x n` matrix of squared distances.
pub fn pairwise_sq_distances(sol: &VectorSolution) -> Vec<f64> {
    let n = sol.n();
    par::map_range(0..n, |i| (0..n).map(|j| sol.sq_dist(i, j)).collect::<Vec<f64>>()).into_iter().flatten().collect()
}

/// Most violated spreading set for one node.
#[derive(Debug, Clone, PartialEq)]
pub struct SpreadingViolation {
    pub u: usize,
    /// `|S|`, counting `u` itself.
    pub size: usize,
    /// `|S| - n/k - sum_{v in S} |u - v|^2 / 2`, always positive.
    pub magnitude: f64,
    /// Members of `S` other than `u`, nearest first.
    pub members: Vec<usize>,
}

/// Finds the worst spreading set containing `u`.
///
/// For a fixed size the left side is smallest when `S` holds the nodes
/// nearest to `u`, so scanning the distance-sorted prefixes is exact.
pub fn spreading_violation(sol: &VectorSolution, u: usize, k: usize) -> Option<SpreadingViolation> {
    let n = sol.n();
    let row: Vec<f64> = (0..n).map(|v| sol.sq_dist(u, v)).collect();
    spreading_scan(&row, u, spread_bound(n, k))
}

pub(crate) fn spreading_scan(row: &[f64], u: usize, bound: f64) -> Option<SpreadingViolation> {
    let mut others: Vec<usize> = (0..row.len()).filter(|&v| v != u).collect();
    others.sort_by(|&a, &b| row[a].total_cmp(&row[b]).then(a.cmp(&b)));
    let mut sum = 0.0;
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in others.iter().enumerate() {
        sum += 0.5 * row[v];
        let size = i + 2;
        let gap = size as f64 - bound - sum;
        if gap > 0.0 && best.is_none_or(|(_, g)| gap > g) {
            best = Some((size, gap));
        }
    }
    best.map(|(size, magnitude)| SpreadingViolation { u, size, magnitude, members: others[..size - 1].to_vec() })
}

/// Squared scale factor that makes every spreading set feasible, computed
/// with the same prefix scan. `None` when some violated set has zero spread.
pub(crate) fn spreading_rescale(dist: &[f64], n: usize, bound: f64) -> Option<f64> {
    let per_node = par::map_range(0..n, |u| {
        let row = &dist[u * n..(u + 1) * n];
        let mut others: Vec<usize> = (0..n).filter(|&v| v != u).collect();
        others.sort_by(|&a, &b| row[a].total_cmp(&row[b]).then(a.cmp(&b)));
        let mut sum = 0.0;
        let mut need: f64 = 1.0;
        for (i, &v) in others.iter().enumerate() {
            sum += 0.5 * row[v];
            let rhs = (i + 2) as f64 - bound;
            if rhs > sum {
                if sum <= 0.0 {
                    return None;
                }
                need = need.max(rhs / sum);
            }
        }
        Some(need)
    });
    per_node.into_iter().try_fold(1.0f64, |acc, x| x.map(|x| acc.max(x)))
}

/// A violated triple: `|a - mid|^2 + |mid - c|^2 < |a - c|^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangleViolation {
    pub a: usize,
    pub mid: usize,
    pub c: usize,
    /// `|a - c|^2 - |a - mid|^2 - |mid - c|^2`.
    pub magnitude: f64,
}

/// How much of the cubic triangle family to examine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TriangleScan {
    /// Exhaustive up to [`FULL_TRIANGLE_SCAN_LIMIT`] nodes, sampled beyond.
    #[default]
    Auto,
    /// Every triple.
    Full,
    /// Random middle nodes, each checked against all pairs.
    Sampled { pivots: usize, seed: u64 },
}

/// Violated triangle inequalities, worst first, at most `budget` of them.
/// An empty result means none was found at this effort level.
pub fn triangle_inequality_violation(sol: &VectorSolution, budget: usize, tol: f64) -> Vec<TriangleViolation> {
    let dist = pairwise_sq_distances(sol);
    triangle_search(&dist, sol.n(), budget, tol, TriangleScan::Auto)
}

/// Triangle search over a precomputed distance matrix.
pub fn triangle_search(dist: &[f64], n: usize, budget: usize, tol: f64, scan: TriangleScan) -> Vec<TriangleViolation> {
    if n < 3 || budget == 0 {
        return Vec::new();
    }
    let pivots: Vec<usize> = match scan {
        TriangleScan::Full => (0..n).collect(),
        TriangleScan::Auto if n <= FULL_TRIANGLE_SCAN_LIMIT => (0..n).collect(),
        TriangleScan::Auto => sampled_pivots(n, SAMPLED_PIVOTS, 0),
        TriangleScan::Sampled { pivots, seed } => sampled_pivots(n, pivots, seed),
    };
    let per_pivot = par::map_slice(&pivots, |&mid| {
        let mut found = Vec::new();
        let row = &dist[mid * n..(mid + 1) * n];
        for a in 0..n {
            if a == mid {
                continue;
            }
            let da = row[a];
            let arow = &dist[a * n..(a + 1) * n];
            for c in a + 1..n {
                if c == mid {
                    continue;
                }
                let magnitude = arow[c] - da - row[c];
                if magnitude > tol {
                    found.push(TriangleViolation { a, mid, c, magnitude });
                }
            }
        }
        if found.len() > budget {
            sort_worst_first(&mut found);
            found.truncate(budget);
        }
        found
    });
    let mut all: Vec<TriangleViolation> = per_pivot.into_iter().flatten().collect();
    sort_worst_first(&mut all);
    all.truncate(budget);
    all
}

fn sort_worst_first(v: &mut [TriangleViolation]) {
    v.sort_by(|x, y| y.magnitude.total_cmp(&x.magnitude).then((x.mid, x.a, x.c).cmp(&(y.mid, y.a, y.c))));
}

fn sampled_pivots(n: usize, count: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7472_6961_6e67_6c65);
    let mut picks = sample(&mut rng, n, count.min(n)).into_vec();
    picks.sort_unstable();
    picks
}

/// Largest violation per constraint family, plus the objective.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FeasibilityReport {
    pub spreading: f64,
    pub triangle: f64,
    pub link: f64,
    pub objective: f64,
}

impl FeasibilityReport {
    pub fn max_violation(&self) -> f64 {
        self.spreading.max(self.triangle).max(self.link)
    }
}

pub fn feasibility_report(prog: &VectorProgram, sol: &VectorSolution) -> FeasibilityReport {
    feasibility_with(prog, sol, TriangleScan::Auto)
}

pub(crate) fn feasibility_with(prog: &VectorProgram, sol: &VectorSolution, scan: TriangleScan) -> FeasibilityReport {
    let n = sol.n();
    debug_assert_eq!(n, prog.n());
    if n == 0 {
        return FeasibilityReport { objective: prog.evaluate(sol), ..Default::default() };
    }
    let dist = pairwise_sq_distances(sol);
    let bound = prog.spread_bound();
    let spreading = par::map_range(0..n, |u| spreading_scan(&dist[u * n..(u + 1) * n], u, bound))
        .into_iter()
        .flatten()
        .map(|v| v.magnitude)
        .fold(0.0, f64::max);
    let triangle = triangle_search(&dist, n, 1, 0.0, scan).first().map_or(0.0, |t| t.magnitude);
    let link = match prog.objective() {
        Objective::Workload(_) => 0.0,
        Objective::Motif(links) => links
            .iter()
            .enumerate()
            .flat_map(|(h, es)| es.iter().map(move |&(a, b)| (h, a, b)))
            .map(|(h, a, b)| 0.5 * dist[a * n + b] - sol.aux_norms.get(h).copied().unwrap_or(0.0))
            .fold(0.0, f64::max),
    };
    FeasibilityReport { spreading, triangle, link, objective: prog.evaluate(sol) }
}
