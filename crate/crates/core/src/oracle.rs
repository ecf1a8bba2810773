//! Exhaustive optimum over strictly balanced partitions, and the two gadget
//! generators (bisection-to-triangle reduction, clique unions).

use thiserror::Error;

use crate::graph::{ceil_div, Graph, GraphError, PartitionSolution};
use crate::motif::MotifOccurrenceSet;
use crate::par;
use crate::workload::{aggregate_weights, Workload};
use crate::Cost;

/// Node cap for exhaustive search.
pub const MAX_EXACT_NODES: usize = 16;
/// Cap on canonical balanced assignments for exhaustive search.
pub const MAX_EXACT_ASSIGNMENTS: u128 = 100_000_000;
/// Largest graph the reduction generator will emit.
pub const MAX_REDUCTION_NODES: usize = 5000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("instance too large for exhaustive search: n = {n}, {assignments} balanced assignments")]
    InstanceTooLarge { n: usize, assignments: u128 },
    #[error("k must be at least 1")]
    BadK,
    #[error("bad clique size X = {x}: {reason}")]
    BadX { x: usize, reason: String },
    #[error("reduction would have {0} nodes, limit is {MAX_REDUCTION_NODES}")]
    ReductionTooLarge(usize),
    #[error("clique size list is empty")]
    EmptySizes,
    #[error("clique sizes must be positive")]
    ZeroSize,
    #[error("cost structure does not match the graph: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Which cost the exact search minimizes.
#[derive(Debug, Clone, Copy)]
pub enum CostKind<'a> {
    Cut,
    Workload(&'a Workload),
    Motif(&'a MotifOccurrenceSet),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactResult {
    pub best: PartitionSolution,
    pub cost: Cost,
    /// Canonical balanced assignments evaluated.
    pub explored: u64,
}

impl ExactResult {
    /// Partition file followed by a `cost <p/q>` trailer (integer when whole).
    pub fn to_file(&self) -> String {
        let mut out = crate::graph::write_partition(&self.best);
        out.push_str(&format!("cost {}\n", self.cost));
        out
    }
}

/// Weighted node groups; a group costs its weight when its nodes span more
/// than one block. Cut edges, aggregated workload edges and motif
/// occurrences all reduce to this form.
struct Groups {
    /// Groups whose largest node is `i`, as (weight, nodes).
    closing: Vec<Vec<(i64, Vec<usize>)>>,
    denominator: i64,
}

impl Groups {
    fn build(g: &Graph, kind: CostKind<'_>) -> Result<Self, OracleError> {
        let n = g.n();
        let mut closing = vec![Vec::new(); n];
        let mut push = |w: i64, nodes: Vec<usize>| -> Result<(), OracleError> {
            let last = *nodes.iter().max().expect("non-empty group");
            if last >= n {
                return Err(OracleError::Mismatch(format!("node {last} out of range (n = {n})")));
            }
            closing[last].push((w, nodes));
            Ok(())
        };
        let denominator = match kind {
            CostKind::Cut => {
                for &(u, v) in g.edges() {
                    push(1, vec![u, v])?;
                }
                1
            }
            CostKind::Workload(w) => {
                // Numerators over the shared denominator C.
                let c = w.total_freq() as i64;
                for ((u, v), weight) in aggregate_weights(w).iter() {
                    if !g.has_edge(u, v) {
                        return Err(OracleError::Mismatch(format!("workload edge ({u}, {v}) not in graph")));
                    }
                    push(*weight.numer() * (c / *weight.denom()), vec![u, v])?;
                }
                c
            }
            CostKind::Motif(occ) => {
                for t in occ.occurrences() {
                    push(1, t.clone())?;
                }
                1
            }
        };
        Ok(Groups { closing, denominator })
    }
}

/// Number of canonical strictly balanced assignments: every block holds at
/// most `ceil(n/k)` nodes, blocks are unlabeled, and all `k` blocks are
/// non-empty when `n >= k`.
pub fn count_balanced(n: usize, k: usize) -> u128 {
    if k == 0 {
        return 0;
    }
    if n < k {
        return 1;
    }
    let cap = ceil_div(n, k);
    // labeled[b][r]: ways to fill b labeled non-empty blocks with r labeled nodes.
    let mut binom = vec![vec![0u128; n + 1]; n + 1];
    for i in 0..=n {
        binom[i][0] = 1;
        for j in 1..=i {
            binom[i][j] = binom[i - 1][j - 1] + binom[i - 1][j];
        }
    }
    let mut ways = vec![0u128; n + 1];
    ways[0] = 1;
    for _ in 0..k {
        let mut next = vec![0u128; n + 1];
        for r in 0..=n {
            for s in 1..=cap.min(r) {
                next[r] = next[r].saturating_add(binom[r][s].saturating_mul(ways[r - s]));
            }
        }
        ways = next;
    }
    let k_fact: u128 = (1..=k as u128).try_fold(1u128, |a, b| a.checked_mul(b)).unwrap_or(u128::MAX);
    ways[n] / k_fact
}

struct Search<'a> {
    n: usize,
    k: usize,
    cap: usize,
    require_all: bool,
    groups: &'a Groups,
}

#[derive(Clone)]
struct Best {
    cost: i64,
    assignment: Vec<usize>,
    explored: u64,
}

impl Search<'_> {
    fn closing_cost(&self, i: usize, a: &[usize]) -> i64 {
        self.groups.closing[i].iter().filter(|(_, nodes)| nodes.iter().any(|&v| a[v] != a[nodes[0]])).map(|(w, _)| w).sum()
    }

    /// Can the nodes from `next` on still open the blocks that must be non-empty?
    fn completable(&self, next: usize, used: usize) -> bool {
        !self.require_all || self.k - used <= self.n - next
    }

    fn descend(&self, a: &mut Vec<usize>, sizes: &mut [usize], used: usize, partial: i64, best: &mut Option<Best>) {
        let i = a.len();
        if i == self.n {
            let better = best.as_ref().is_none_or(|b| partial < b.cost);
            let explored = best.as_ref().map_or(0, |b| b.explored) + 1;
            if better {
                *best = Some(Best { cost: partial, assignment: a.clone(), explored });
            } else if let Some(b) = best.as_mut() {
                b.explored = explored;
            }
            return;
        }
        for b in 0..=used.min(self.k - 1) {
            if sizes[b] >= self.cap {
                continue;
            }
            let used_after = used.max(b + 1);
            if !self.completable(i + 1, used_after) {
                continue;
            }
            a.push(b);
            sizes[b] += 1;
            let cost = partial + self.closing_cost(i, a);
            self.descend(a, sizes, used_after, cost, best);
            sizes[b] -= 1;
            a.pop();
        }
    }

    /// Valid assignment prefixes of length `depth`, in lexicographic order.
    fn prefixes(&self, depth: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut a = Vec::new();
        let mut sizes = vec![0; self.k];
        self.collect_prefixes(depth, &mut a, &mut sizes, 0, &mut out);
        out
    }

    fn collect_prefixes(&self, depth: usize, a: &mut Vec<usize>, sizes: &mut [usize], used: usize, out: &mut Vec<Vec<usize>>) {
        if a.len() == depth {
            out.push(a.clone());
            return;
        }
        for b in 0..=used.min(self.k - 1) {
            if sizes[b] >= self.cap || !self.completable(a.len() + 1, used.max(b + 1)) {
                continue;
            }
            a.push(b);
            sizes[b] += 1;
            self.collect_prefixes(depth, a, sizes, used.max(b + 1), out);
            sizes[b] -= 1;
            a.pop();
        }
    }
}

/// Global optimum over canonical strictly balanced `k`-partitions.
///
/// Node 0 sits in block 0 and each later node joins an existing block or
/// opens the next one, so every partition is visited once. Ties go to the
/// lexicographically smallest assignment.
pub fn exact_partition(g: &Graph, k: usize, kind: CostKind<'_>) -> Result<ExactResult, OracleError> {
    if k == 0 {
        return Err(OracleError::BadK);
    }
    let n = g.n();
    let assignments = count_balanced(n, k);
    if n > MAX_EXACT_NODES || assignments > MAX_EXACT_ASSIGNMENTS {
        return Err(OracleError::InstanceTooLarge { n, assignments });
    }
    let groups = Groups::build(g, kind)?;
    if n == 0 {
        let best = PartitionSolution::new(Vec::new(), k)?;
        return Ok(ExactResult { best, cost: Cost::from_integer(0), explored: 1 });
    }
    let search = Search { n, k, cap: ceil_div(n, k), require_all: n >= k, groups: &groups };
    let depth = n.min(6);
    let prefixes = search.prefixes(depth);
    let partials = par::map_slice(&prefixes, |prefix| {
        let mut a = Vec::with_capacity(n);
        let mut sizes = vec![0; k];
        let mut cost = 0;
        let mut used = 0;
        for (i, &b) in prefix.iter().enumerate() {
            a.push(b);
            sizes[b] += 1;
            used = used.max(b + 1);
            cost += search.closing_cost(i, &a);
        }
        let mut best = None;
        search.descend(&mut a, &mut sizes, used, cost, &mut best);
        best
    });
    let mut explored = 0;
    let mut winner: Option<Best> = None;
    for b in partials.into_iter().flatten() {
        explored += b.explored;
        if winner.as_ref().is_none_or(|w| b.cost < w.cost) {
            winner = Some(b);
        }
    }
    let winner = winner.ok_or(OracleError::InstanceTooLarge { n, assignments: 0 })?;
    Ok(ExactResult { best: PartitionSolution::new(winner.assignment, k)?, cost: Cost::new(winner.cost, groups.denominator), explored })
}

/// Output of the bisection-to-triangle reduction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reduction {
    pub graph: Graph,
    /// Clique size.
    pub x: usize,
    /// `clique_of[h]` is the original node whose clique contains `h`.
    pub clique_of: Vec<usize>,
    /// One straddling triangle per original edge, in edge order.
    pub gadgets: Vec<[usize; 3]>,
}

impl Reduction {
    /// Clique-respecting lift of a partition of the original graph.
    pub fn lift(&self, p: &PartitionSolution) -> PartitionSolution {
        let assignment = self.clique_of.iter().map(|&v| p.block_of(v)).collect();
        PartitionSolution::new(assignment, p.k()).expect("blocks already in range")
    }
}

/// Smallest even `X` with `X >= 2 * maxdeg` and `X >= n + 1`.
pub fn auto_clique_size(g: &Graph) -> usize {
    let x = (2 * g.max_degree()).max(g.n() + 1);
    x + x % 2
}

/// Replaces every node by an `X`-clique and every edge `(i, j)`, `i < j`, by
/// a triangle using two fresh nodes of clique `i` and one of clique `j`.
pub fn gen_bisection_reduction(g: &Graph, x: Option<usize>) -> Result<Reduction, OracleError> {
    let x = match x {
        None => auto_clique_size(g),
        Some(x) => {
            let bad = |reason: &str| Err(OracleError::BadX { x, reason: reason.into() });
            if x % 2 != 0 {
                return bad("must be even");
            }
            if x < 2 * g.max_degree() {
                return bad("must be at least twice the maximum degree");
            }
            if x < g.n() + 1 {
                return bad("must exceed the node count");
            }
            x
        }
    };
    let total = g.n() * x;
    if total > MAX_REDUCTION_NODES {
        return Err(OracleError::ReductionTooLarge(total));
    }
    let mut edges = Vec::with_capacity(g.n() * x * (x - 1) / 2 + 2 * g.m());
    for i in 0..g.n() {
        let base = i * x;
        for a in 0..x {
            for b in a + 1..x {
                edges.push((base + a, base + b));
            }
        }
    }
    let mut next_free = vec![0usize; g.n()];
    let mut gadgets = Vec::with_capacity(g.m());
    for &(i, j) in g.edges() {
        let ci1 = i * x + next_free[i];
        let ci2 = ci1 + 1;
        next_free[i] += 2;
        let cj = j * x + next_free[j];
        next_free[j] += 1;
        debug_assert!(next_free[i] <= x && next_free[j] <= x);
        edges.push((ci1, cj));
        edges.push((ci2, cj));
        gadgets.push([ci1, ci2, cj]);
    }
    let graph = Graph::new(total, edges)?;
    let clique_of = (0..total).map(|h| h / x).collect();
    Ok(Reduction { graph, x, clique_of, gadgets })
}

/// Disjoint union of cliques with consecutive node ids.
pub fn gen_clique_union(sizes: &[usize]) -> Result<Graph, OracleError> {
    if sizes.is_empty() {
        return Err(OracleError::EmptySizes);
    }
    if sizes.contains(&0) {
        return Err(OracleError::ZeroSize);
    }
    let mut edges = Vec::new();
    let mut base = 0;
    for &s in sizes {
        for a in 0..s {
            for b in a + 1..s {
                edges.push((base + a, base + b));
            }
        }
        base += s;
    }
    Ok(Graph::new(base, edges)?)
}
