//! Motif occurrence enumeration and the motif-split cost.
//!
//! An occurrence is a node subset (stored as a strictly increasing tuple) whose
//! induced subgraph contains the motif as a subgraph. Each subset is counted
//! once no matter how many embeddings it supports.

use std::fmt::Write as _;

use thiserror::Error;

use crate::graph::{edge_key, Edge, Graph, GraphError, PartitionSolution};
use crate::par;

/// Largest supported motif size; enumeration is `O(n^c)`.
pub const MAX_MOTIF_NODES: usize = 5;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MotifError {
    #[error("motif has {0} nodes, at most {MAX_MOTIF_NODES} are supported")]
    MotifTooLarge(usize),
    #[error("motif is disconnected")]
    MotifDisconnected,
    #[error("motif has no nodes")]
    MotifEmpty,
    #[error("occurrence node {node} out of range (n = {n})")]
    NodeOutOfRange { node: usize, n: usize },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// A small connected pattern graph on nodes `0..c`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Motif {
    c: usize,
    edges: Vec<Edge>,
}

impl Motif {
    pub fn new(c: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self, MotifError> {
        if c == 0 {
            return Err(MotifError::MotifEmpty);
        }
        if c > MAX_MOTIF_NODES {
            return Err(MotifError::MotifTooLarge(c));
        }
        let g = Graph::new(c, edges)?;
        Self::from_graph(&g)
    }

    /// Uses a parsed pattern graph as a motif.
    pub fn from_graph(g: &Graph) -> Result<Self, MotifError> {
        let c = g.n();
        if c == 0 {
            return Err(MotifError::MotifEmpty);
        }
        if c > MAX_MOTIF_NODES {
            return Err(MotifError::MotifTooLarge(c));
        }
        let mut seen = vec![false; c];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for &v in g.neighbors(u) {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(MotifError::MotifDisconnected);
        }
        Ok(Motif { c, edges: g.edges().to_vec() })
    }

    pub fn triangle() -> Self {
        Motif { c: 3, edges: vec![(0, 1), (0, 2), (1, 2)] }
    }

    pub fn c(&self) -> usize {
        self.c
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Edges of the first embedding of this motif into `nodes` (in
    /// lexicographic order of the node mapping), expressed as graph edges.
    pub fn embedding_edges(&self, g: &Graph, nodes: &[usize]) -> Option<Vec<Edge>> {
        debug_assert_eq!(nodes.len(), self.c);
        permutations(self.c).into_iter().find_map(|perm| {
            let mapped: Vec<Edge> = self.edges.iter().map(|&(a, b)| edge_key(nodes[perm[a]], nodes[perm[b]])).collect();
            mapped.iter().all(|&(u, v)| g.has_edge(u, v)).then_some(mapped)
        })
    }
}

fn permutations(c: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(c), &mut vec![false; c], &mut out);
    out
}

/// Sorted, deduplicated occurrences of one motif in one graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MotifOccurrenceSet {
    motif: Motif,
    occurrences: Vec<Vec<usize>>,
}

impl MotifOccurrenceSet {
    /// Wraps precomputed tuples; each is sorted and the list is deduplicated.
    pub fn from_tuples(motif: Motif, tuples: impl IntoIterator<Item = Vec<usize>>) -> Self {
        let mut occurrences: Vec<Vec<usize>> = tuples
            .into_iter()
            .map(|mut t| {
                t.sort_unstable();
                t
            })
            .collect();
        occurrences.sort_unstable();
        occurrences.dedup();
        MotifOccurrenceSet { motif, occurrences }
    }

    pub fn motif(&self) -> &Motif {
        &self.motif
    }

    pub fn occurrences(&self) -> &[Vec<usize>] {
        &self.occurrences
    }

    pub fn len(&self) -> usize {
        self.occurrences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occurrences.is_empty()
    }

    /// Debug dump: one comma-separated tuple per line.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for t in &self.occurrences {
            let row: Vec<String> = t.iter().map(ToString::to_string).collect();
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }
}

/// All triangles `a < b < c`, found by intersecting degree-ordered out-lists.
pub fn enumerate_triangles(g: &Graph) -> MotifOccurrenceSet {
    let n = g.n();
    let rank = |v: usize| (g.degree(v), v);
    let out: Vec<Vec<usize>> = (0..n)
        .map(|u| {
            let mut list: Vec<usize> = g.neighbors(u).iter().copied().filter(|&v| rank(v) > rank(u)).collect();
            list.sort_unstable();
            list
        })
        .collect();
    let per_node = par::map_range(0..n, |u| {
        let mut found = Vec::new();
        for &v in &out[u] {
            let (a, b) = (&out[u], &out[v]);
            let (mut i, mut j) = (0, 0);
            while i < a.len() && j < b.len() {
                match a[i].cmp(&b[j]) {
                    std::cmp::Ordering::Less => i += 1,
                    std::cmp::Ordering::Greater => j += 1,
                    std::cmp::Ordering::Equal => {
                        let mut t = vec![u, v, a[i]];
                        t.sort_unstable();
                        found.push(t);
                        i += 1;
                        j += 1;
                    }
                }
            }
        }
        found
    });
    MotifOccurrenceSet::from_tuples(Motif::triangle(), per_node.into_iter().flatten())
}

/// All node subsets supporting an embedding of `m`.
///
/// Connected `c`-subsets are generated once each by rooted extension (every
/// subset is grown from its smallest node through exclusive neighborhoods),
/// then tested against the motif's edge set.
pub fn enumerate_motif(g: &Graph, m: &Motif) -> MotifOccurrenceSet {
    let c = m.c();
    let perms = permutations(c);
    let supports = |nodes: &[usize]| perms.iter().any(|perm| m.edges().iter().all(|&(a, b)| g.has_edge(nodes[perm[a]], nodes[perm[b]])));
    let per_root = par::map_range(0..g.n(), |root| {
        let mut found = Vec::new();
        let ext: Vec<usize> = g.neighbors(root).iter().copied().filter(|&w| w > root).collect();
        extend(g, c, &mut vec![root], ext, root, &mut |sub| {
            let mut t = sub.to_vec();
            t.sort_unstable();
            if supports(&t) {
                found.push(t);
            }
        });
        found
    });
    MotifOccurrenceSet::from_tuples(m.clone(), per_root.into_iter().flatten())
}

fn extend(g: &Graph, c: usize, sub: &mut Vec<usize>, mut ext: Vec<usize>, root: usize, emit: &mut dyn FnMut(&[usize])) {
    if sub.len() == c {
        emit(sub);
        return;
    }
    while let Some(w) = ext.pop() {
        let mut next = ext.clone();
        for &u in g.neighbors(w) {
            if u > root && !sub.contains(&u) && !next.contains(&u) && !sub.iter().any(|&s| g.has_edge(s, u)) {
                next.push(u);
            }
        }
        sub.push(w);
        extend(g, c, sub, next, root, emit);
        sub.pop();
    }
}

/// Number of occurrences whose nodes do not all share one block.
pub fn motif_cost(occ: &MotifOccurrenceSet, p: &PartitionSolution) -> Result<u64, MotifError> {
    let n = p.n();
    let mut cost = 0;
    for t in occ.occurrences() {
        if let Some(&node) = t.iter().find(|&&v| v >= n) {
            return Err(MotifError::NodeOutOfRange { node, n });
        }
        let first = p.block_of(t[0]);
        if t.iter().any(|&v| p.block_of(v) != first) {
            cost += 1;
        }
    }
    Ok(cost)
}
