//! Vector-program relaxations of balanced partitioning.
//!
//! Every node gets a vector in `R^m`; half the squared distance between two
//! vectors plays the role of "these nodes are separated". Two constraint
//! families are shared by both objectives:
//!
//! * the squared-distance triangle inequality over every node triple, and
//! * spreading: for every node `u` and set `S` containing it,
//!   `sum_{v in S} |u - v|^2 / 2 >= |S| - n/k`.
//!
//! The workload program minimizes `sum W_ij |v_i - v_j|^2 / 2`. The motif
//! program adds one scalar `t_H` per occurrence, linked to the occurrence's
//! embedding edges by `t_H >= |a - b|^2 / 2`, and minimizes `sum t_H`. Only the
//! squared norm of the per-occurrence vector enters any constraint, so it is
//! stored as a scalar.

mod separation;
mod solver;

use std::fmt::Write as _;

use thiserror::Error;

use crate::graph::{Edge, Graph};
use crate::motif::MotifOccurrenceSet;
use crate::workload::EdgeWeightMap;

pub use separation::{
    feasibility_report, pairwise_sq_distances, spreading_violation, triangle_inequality_violation, triangle_search, FeasibilityReport,
    SpreadingViolation, TriangleScan, TriangleViolation, FULL_TRIANGLE_SCAN_LIMIT,
};
pub use solver::{solve, SolveOutcome, SolverConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RelaxationError {
    #[error("k must be at least 1")]
    BadK,
    #[error("embedding dimension {m} is too small, need at least {needed}")]
    DimensionTooSmall { m: usize, needed: usize },
    #[error("weighted edge ({0}, {1}) is not in the graph")]
    WeightOffGraph(usize, usize),
    #[error("occurrence {0:?} does not support the motif in this graph")]
    BadOccurrence(Vec<usize>),
    #[error("invalid solver configuration: {0}")]
    BadConfig(String),
    #[error("malformed solution dump at line {line}: {reason}")]
    MalformedDump { line: usize, reason: String },
}

/// Objective of a vector program.
#[derive(Debug, Clone, PartialEq)]
pub enum Objective {
    /// `sum w * |v_i - v_j|^2 / 2` over the listed edges.
    Workload(Vec<(usize, usize, f64)>),
    /// `sum_H t_H`; entry `H` lists the edges linked to occurrence `H`.
    Motif(Vec<Vec<Edge>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorProgram {
    n: usize,
    k: usize,
    objective: Objective,
}

impl VectorProgram {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn objective(&self) -> &Objective {
        &self.objective
    }

    /// Number of auxiliary scalars (one per motif occurrence).
    pub fn aux(&self) -> usize {
        match &self.objective {
            Objective::Workload(_) => 0,
            Objective::Motif(links) => links.len(),
        }
    }

    /// Number of objective terms.
    pub fn term_count(&self) -> usize {
        match &self.objective {
            Objective::Workload(terms) => terms.len(),
            Objective::Motif(links) => links.len(),
        }
    }

    pub fn link_count(&self) -> usize {
        match &self.objective {
            Objective::Workload(_) => 0,
            Objective::Motif(links) => links.iter().map(Vec::len).sum(),
        }
    }

    /// The `n/k` on the right of every spreading constraint. When `k > n`
    /// the singleton sets would be infeasible, so `k` is capped at `n`.
    pub fn spread_bound(&self) -> f64 {
        spread_bound(self.n, self.k)
    }

    /// Objective value of `sol` under this program.
    pub fn evaluate(&self, sol: &VectorSolution) -> f64 {
        match &self.objective {
            Objective::Workload(terms) => terms.iter().map(|&(i, j, w)| w * 0.5 * sol.sq_dist(i, j)).sum(),
            Objective::Motif(_) => sol.aux_norms.iter().sum(),
        }
    }

    /// Embedding dimension used when the caller does not pick one.
    pub fn default_dimension(&self) -> usize {
        default_dimension(self.n, self.k)
    }
}

pub(crate) fn spread_bound(n: usize, k: usize) -> f64 {
    n as f64 / k.min(n).max(1) as f64
}

/// `min(n, k + ceil(log2(n + 1)) + 4)`, at least 1.
pub fn default_dimension(n: usize, k: usize) -> usize {
    let log = usize::BITS - n.leading_zeros(); // ceil(log2(n + 1))
    n.min(k + log as usize + 4).max(1)
}

/// Workload relaxation over the aggregated edge weights.
pub fn build_workload_program(g: &Graph, k: usize, w: &EdgeWeightMap) -> Result<VectorProgram, RelaxationError> {
    if k == 0 {
        return Err(RelaxationError::BadK);
    }
    let mut terms = Vec::with_capacity(w.len());
    for ((u, v), weight) in w.iter() {
        if !g.has_edge(u, v) {
            return Err(RelaxationError::WeightOffGraph(u, v));
        }
        terms.push((u, v, *weight.numer() as f64 / *weight.denom() as f64));
    }
    Ok(VectorProgram { n: g.n(), k, objective: Objective::Workload(terms) })
}

/// Motif relaxation: one auxiliary scalar per occurrence, linked to the edges
/// of its first embedding.
pub fn build_motif_program(g: &Graph, k: usize, occ: &MotifOccurrenceSet) -> Result<VectorProgram, RelaxationError> {
    if k == 0 {
        return Err(RelaxationError::BadK);
    }
    let links = occ
        .occurrences()
        .iter()
        .map(|t| occ.motif().embedding_edges(g, t).ok_or_else(|| RelaxationError::BadOccurrence(t.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(VectorProgram { n: g.n(), k, objective: Objective::Motif(links) })
}

/// `n` vectors in `R^m` plus auxiliary squared norms.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorSolution {
    m: usize,
    coords: Vec<f64>,
    pub aux_norms: Vec<f64>,
    pub objective: f64,
}

impl VectorSolution {
    /// Wraps row-major coordinates (`n * m` values).
    pub fn new(m: usize, coords: Vec<f64>, aux_norms: Vec<f64>) -> Self {
        assert!(m >= 1, "dimension must be positive");
        assert_eq!(coords.len() % m, 0, "coordinate count must be a multiple of m");
        VectorSolution { m, coords, aux_norms, objective: 0.0 }
    }

    pub fn from_vectors(m: usize, vectors: &[Vec<f64>], aux_norms: Vec<f64>) -> Self {
        let coords = vectors
            .iter()
            .flat_map(|v| {
                assert_eq!(v.len(), m);
                v.iter().copied()
            })
            .collect();
        Self::new(m, coords, aux_norms)
    }

    pub fn n(&self) -> usize {
        self.coords.len() / self.m
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        &self.coords[i * self.m..(i + 1) * self.m]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn sq_dist(&self, i: usize, j: usize) -> f64 {
        self.vector(i).iter().zip(self.vector(j)).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    pub fn with_objective(mut self, prog: &VectorProgram) -> Self {
        self.objective = prog.evaluate(&self);
        self
    }

    /// Debug dump: `%m <dim>`, one line of coordinates per node, then `%aux`
    /// and one squared norm per line. Floats use shortest round-trip form.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "%m {}", self.m);
        for i in 0..self.n() {
            let row: Vec<String> = self.vector(i).iter().map(|x| format!("{x:?}")).collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        let _ = writeln!(out, "%aux");
        for a in &self.aux_norms {
            let _ = writeln!(out, "{a:?}");
        }
        out
    }

    /// Reads a dump written by [`VectorSolution::dump`].
    pub fn parse_dump(text: &str) -> Result<Self, RelaxationError> {
        let bad = |line: usize, reason: &str| RelaxationError::MalformedDump { line: line + 1, reason: reason.into() };
        let mut lines = text.lines().enumerate();
        let m = match lines.next() {
            Some((i, l)) => l
                .strip_prefix("%m ")
                .and_then(|s| s.trim().parse::<usize>().ok())
                .filter(|&m| m > 0)
                .ok_or_else(|| bad(i, "expected `%m <dim>` header"))?,
            None => return Err(bad(0, "empty dump")),
        };
        let mut coords = Vec::new();
        let mut aux = Vec::new();
        let mut in_aux = false;
        for (i, l) in lines {
            let l = l.trim();
            if l.is_empty() {
                continue;
            }
            if l == "%aux" {
                in_aux = true;
                continue;
            }
            let values: Vec<f64> =
                l.split_whitespace().map(|t| t.parse::<f64>().map_err(|_| bad(i, "bad float"))).collect::<Result<_, _>>()?;
            if in_aux {
                if values.len() != 1 {
                    return Err(bad(i, "expected one value per aux line"));
                }
                aux.push(values[0]);
            } else {
                if values.len() != m {
                    return Err(bad(i, "row length differs from %m"));
                }
                coords.extend(values);
            }
        }
        Ok(VectorSolution::new(m, coords, aux))
    }
}

/// Feasible starting point built from groups of equal vectors.
///
/// When `k` divides `n`, group `j` holds `n/k` consecutive nodes and gets
/// `sqrt(n) * e_j`. Otherwise groups hold `floor(n/k)` nodes (so no group
/// exceeds `n/k` and same-group spreading sets stay satisfied) and sit on
/// distinct vertices of the cube `{0, ceil(sqrt(2n))}^m`; any two groups are
/// then at half squared distance at least `n`, and cube vertices satisfy the
/// squared-distance triangle inequality. The integer side keeps those
/// distances exact, so the triangle checks hold with no round-off.
pub fn trivial_solution(n: usize, k: usize, m: usize) -> Result<VectorSolution, RelaxationError> {
    if k == 0 {
        return Err(RelaxationError::BadK);
    }
    let k = k.min(n.max(1));
    if m < k {
        return Err(RelaxationError::DimensionTooSmall { m, needed: k });
    }
    let mut coords = vec![0.0; n * m];
    if n == 0 {
        return Ok(VectorSolution::new(m, coords, Vec::new()));
    }
    if n.is_multiple_of(k) {
        let group = n / k;
        let scale = (n as f64).sqrt();
        for v in 0..n {
            coords[v * m + v / group] = scale;
        }
    } else {
        let group = n / k;
        let groups = n.div_ceil(group);
        // k <= m and groups < 2k <= 2^m, so distinct cube vertices exist.
        debug_assert!(groups as u128 <= 1u128 << m.min(127));
        let scale = (2.0 * n as f64).sqrt().ceil();
        for v in 0..n {
            let label = v / group;
            for bit in 0..m.min(usize::BITS as usize) {
                if (label >> bit) & 1 == 1 {
                    coords[v * m + bit] = scale;
                }
            }
        }
    }
    Ok(VectorSolution::new(m, coords, Vec::new()))
}

/// Maps a partition to unit basis vectors (block `j` -> `e_j`) and sets each
/// auxiliary norm to the occurrence's split indicator. This is the integral
/// point of the relaxation; its objective equals the partition's cost.
pub fn integral_solution(prog: &VectorProgram, assignment: &[usize], m: usize) -> VectorSolution {
    let n = prog.n();
    assert_eq!(assignment.len(), n);
    let mut coords = vec![0.0; n * m];
    for (v, &b) in assignment.iter().enumerate() {
        coords[v * m + b] = 1.0;
    }
    let aux = match prog.objective() {
        Objective::Workload(_) => Vec::new(),
        Objective::Motif(links) => {
            links.iter().map(|es| if es.iter().any(|&(a, b)| assignment[a] != assignment[b]) { 1.0 } else { 0.0 }).collect()
        }
    };
    VectorSolution::new(m, coords, aux).with_objective(prog)
}
