//! Graph representation, edge-list and partition file I/O, balance validation
//! and the plain cut cost.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use num_rational::Ratio;
use thiserror::Error;

/// An unordered edge stored with `u < v`.
pub type Edge = (usize, usize);

/// Normalizes an unordered pair so the smaller id comes first.
#[inline]
pub fn edge_key(u: usize, v: usize) -> Edge {
    if u < v {
        (u, v)
    } else {
        (v, u)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("line {line}: duplicate edge ({u}, {v})")]
    DuplicateEdge { line: usize, u: usize, v: usize },
    #[error("line {line}: self-loop on node {node}")]
    SelfLoop { line: usize, node: usize },
    #[error("line {line}: malformed line {text:?}")]
    MalformedLine { line: usize, text: String },
    #[error("line {line}: negative node id {value}")]
    NegativeId { line: usize, value: i64 },
    #[error("node {node} out of range (n = {n})")]
    NodeOutOfRange { node: usize, n: usize },
    #[error("line {line}: block {block} out of range (k = {k})")]
    BlockOutOfRange { line: usize, block: usize, k: usize },
    #[error("node {node} missing from partition")]
    MissingNode { node: usize },
    #[error("line {line}: node {node} assigned twice")]
    DuplicateNode { line: usize, node: usize },
    #[error("assignment has length {got}, graph has {expected} nodes")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid balance spec: {0}")]
    BadBalance(String),
}

/// Undirected simple graph on nodes `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: Vec<Edge>,
    adj: Vec<Vec<usize>>,
}

impl Graph {
    /// Builds a graph, rejecting self-loops, duplicates and out-of-range ids.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self, GraphError> {
        let mut seen = BTreeSet::new();
        for (i, (u, v)) in edges.into_iter().enumerate() {
            if u == v {
                return Err(GraphError::SelfLoop { line: i + 1, node: u });
            }
            let e = edge_key(u, v);
            if e.1 >= n {
                return Err(GraphError::NodeOutOfRange { node: e.1, n });
            }
            if !seen.insert(e) {
                return Err(GraphError::DuplicateEdge { line: i + 1, u, v });
            }
        }
        Ok(Self::from_sorted_set(n, seen))
    }

    fn from_sorted_set(n: usize, set: BTreeSet<Edge>) -> Self {
        let edges: Vec<Edge> = set.into_iter().collect();
        let mut adj = vec![Vec::new(); n];
        for &(u, v) in &edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        Graph { n, edges, adj }
    }

    /// Graph on `n` isolated nodes.
    pub fn empty(n: usize) -> Self {
        Self::from_sorted_set(n, BTreeSet::new())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    /// Edges in ascending `(u, v)` order with `u < v`.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Sorted neighbor list of `u`.
    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.adj[u]
    }

    pub fn degree(&self, u: usize) -> usize {
        self.adj[u].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.n && v < self.n && self.adj[u].binary_search(&v).is_ok()
    }
}

/// Parses the edge-list text format.
///
/// Lines starting with `#` are comments, `%n <count>` declares a node count,
/// every other non-blank line is `<u> <v>`. The node count is the larger of
/// the declared count and one past the largest id seen.
pub fn load_edge_list(text: &str) -> Result<Graph, GraphError> {
    let mut declared = 0usize;
    let mut max_id: Option<usize> = None;
    let mut seen = BTreeSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.trim();
        if body.is_empty() || body.starts_with('#') {
            continue;
        }
        let malformed = || GraphError::MalformedLine { line, text: raw.to_string() };
        if let Some(rest) = body.strip_prefix('%') {
            let mut parts = rest.split_whitespace();
            match (parts.next(), parts.next(), parts.next()) {
                (Some("n"), Some(count), None) => {
                    declared = declared.max(parse_id(count, line, raw)?);
                }
                _ => return Err(malformed()),
            }
            continue;
        }
        let mut parts = body.split_whitespace();
        let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(malformed());
        };
        let u = parse_id(a, line, raw)?;
        let v = parse_id(b, line, raw)?;
        if u == v {
            return Err(GraphError::SelfLoop { line, node: u });
        }
        if !seen.insert(edge_key(u, v)) {
            return Err(GraphError::DuplicateEdge { line, u, v });
        }
        max_id = Some(max_id.map_or(u.max(v), |m| m.max(u).max(v)));
    }
    let n = declared.max(max_id.map_or(0, |m| m + 1));
    Ok(Graph::from_sorted_set(n, seen))
}

fn parse_id(token: &str, line: usize, raw: &str) -> Result<usize, GraphError> {
    if let Ok(v) = token.parse::<usize>() {
        return Ok(v);
    }
    match token.parse::<i64>() {
        Ok(v) if v < 0 => Err(GraphError::NegativeId { line, value: v }),
        _ => Err(GraphError::MalformedLine { line, text: raw.to_string() }),
    }
}

/// Serializes a graph as an edge list with an explicit `%n` header.
pub fn write_edge_list(g: &Graph) -> String {
    let mut out = String::with_capacity(16 + 12 * g.m());
    let _ = writeln!(out, "%n {}", g.n());
    for &(u, v) in g.edges() {
        let _ = writeln!(out, "{u} {v}");
    }
    out
}

/// Block count plus balance factor; a block may hold at most `tau * ceil(n / k)` nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BalanceSpec {
    pub k: usize,
    pub tau: Ratio<i64>,
}

impl BalanceSpec {
    pub fn new(k: usize, tau: Ratio<i64>) -> Result<Self, GraphError> {
        if k == 0 {
            return Err(GraphError::BadBalance("k must be at least 1".into()));
        }
        if tau < Ratio::from_integer(1) {
            return Err(GraphError::BadBalance(format!("tau = {tau} is below 1")));
        }
        Ok(BalanceSpec { k, tau })
    }

    /// Strict balance, `tau = 1`.
    pub fn strict(k: usize) -> Result<Self, GraphError> {
        Self::new(k, Ratio::from_integer(1))
    }

    /// Largest integral block size allowed for `n` nodes.
    pub fn capacity(&self, n: usize) -> usize {
        let cap = self.tau * Ratio::from_integer(ceil_div(n, self.k) as i64);
        cap.floor().to_integer() as usize
    }
}

pub fn ceil_div(a: usize, b: usize) -> usize {
    a.div_ceil(b)
}

/// Node-to-block assignment with a declared block count. Empty blocks are allowed.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PartitionSolution {
    assignment: Vec<usize>,
    k: usize,
}

impl PartitionSolution {
    pub fn new(assignment: Vec<usize>, k: usize) -> Result<Self, GraphError> {
        if let Some(pos) = assignment.iter().position(|&b| b >= k) {
            return Err(GraphError::BlockOutOfRange { line: pos + 1, block: assignment[pos], k });
        }
        Ok(PartitionSolution { assignment, k })
    }

    /// Everything in block 0.
    pub fn single_block(n: usize) -> Self {
        PartitionSolution { assignment: vec![0; n], k: 1 }
    }

    /// Builds from explicit blocks; they must be disjoint and cover `0..n`.
    pub fn from_blocks(blocks: &[Vec<usize>], n: usize) -> Result<Self, GraphError> {
        let mut assignment = vec![usize::MAX; n];
        for (b, block) in blocks.iter().enumerate() {
            for &v in block {
                if v >= n {
                    return Err(GraphError::NodeOutOfRange { node: v, n });
                }
                if assignment[v] != usize::MAX {
                    return Err(GraphError::DuplicateNode { line: b + 1, node: v });
                }
                assignment[v] = b;
            }
        }
        if let Some(node) = assignment.iter().position(|&b| b == usize::MAX) {
            return Err(GraphError::MissingNode { node });
        }
        Ok(PartitionSolution { assignment, k: blocks.len() })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.assignment.len()
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    #[inline]
    pub fn block_of(&self, v: usize) -> usize {
        self.assignment[v]
    }

    /// Block-set form; block `i` lists its nodes in ascending order.
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut blocks = vec![Vec::new(); self.k];
        for (v, &b) in self.assignment.iter().enumerate() {
            blocks[b].push(v);
        }
        blocks
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &b in &self.assignment {
            sizes[b] += 1;
        }
        sizes
    }

    fn check_len(&self, n: usize) -> Result<(), GraphError> {
        if self.assignment.len() != n {
            return Err(GraphError::LengthMismatch { expected: n, got: self.assignment.len() });
        }
        Ok(())
    }
}

/// First reason a partition fails a balance check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    BlockCount { expected: usize, got: usize },
    Oversized { block: usize, size: usize, capacity: usize },
    EmptyBlock { block: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidityReport {
    pub ok: bool,
    pub block_sizes: Vec<usize>,
    pub capacity: usize,
    pub violation: Option<Violation>,
}

/// Checks block count and the `tau * ceil(n/k)` size bound. Empty blocks are
/// only reported when `forbid_empty` is set.
pub fn validate_partition(g: &Graph, p: &PartitionSolution, spec: &BalanceSpec, forbid_empty: bool) -> Result<ValidityReport, GraphError> {
    p.check_len(g.n())?;
    let block_sizes = p.block_sizes();
    let capacity = spec.capacity(g.n());
    let violation = if p.k() != spec.k {
        Some(Violation::BlockCount { expected: spec.k, got: p.k() })
    } else if let Some((block, &size)) = block_sizes.iter().enumerate().find(|(_, &s)| s > capacity) {
        Some(Violation::Oversized { block, size, capacity })
    } else if forbid_empty {
        block_sizes.iter().position(|&s| s == 0).map(|block| Violation::EmptyBlock { block })
    } else {
        None
    };
    Ok(ValidityReport { ok: violation.is_none(), block_sizes, capacity, violation })
}

/// Number of edges whose endpoints sit in different blocks.
pub fn cut_cost(g: &Graph, p: &PartitionSolution) -> Result<u64, GraphError> {
    p.check_len(g.n())?;
    Ok(g.edges().iter().filter(|&&(u, v)| p.block_of(u) != p.block_of(v)).count() as u64)
}

/// Partition file: `%k <k>` header, then one `<node> <block>` line per node.
pub fn write_partition(p: &PartitionSolution) -> String {
    let mut out = String::with_capacity(8 + 8 * p.n());
    let _ = writeln!(out, "%k {}", p.k());
    for (v, &b) in p.assignment().iter().enumerate() {
        let _ = writeln!(out, "{v} {b}");
    }
    out
}

/// Reads a partition file for a graph of `n` nodes. Without a `%k` header the
/// block count is one past the largest block index. A trailing `cost ...` line
/// (written by the exact solver) is ignored.
pub fn read_partition(text: &str, n: usize) -> Result<PartitionSolution, GraphError> {
    let mut declared_k: Option<usize> = None;
    let mut assignment: Vec<Option<usize>> = vec![None; n];
    let mut rows = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.trim();
        if body.is_empty() || body.starts_with('#') || body.starts_with("cost ") {
            continue;
        }
        let malformed = || GraphError::MalformedLine { line, text: raw.to_string() };
        let mut parts = body.split_whitespace();
        if let Some(rest) = body.strip_prefix('%') {
            let mut parts = rest.split_whitespace();
            match (parts.next(), parts.next(), parts.next()) {
                (Some("k"), Some(k), None) => declared_k = Some(parse_id(k, line, raw)?),
                _ => return Err(malformed()),
            }
            continue;
        }
        let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(malformed());
        };
        let node = parse_id(a, line, raw)?;
        let block = parse_id(b, line, raw)?;
        if node >= n {
            return Err(GraphError::NodeOutOfRange { node, n });
        }
        if assignment[node].is_some() {
            return Err(GraphError::DuplicateNode { line, node });
        }
        assignment[node] = Some(block);
        rows.push((line, block));
    }
    if let Some(node) = assignment.iter().position(Option::is_none) {
        return Err(GraphError::MissingNode { node });
    }
    let k = match declared_k {
        Some(k) => {
            if let Some(&(line, block)) = rows.iter().find(|(_, b)| *b >= k) {
                return Err(GraphError::BlockOutOfRange { line, block, k });
            }
            k
        }
        None => rows.iter().map(|&(_, b)| b + 1).max().unwrap_or(1),
    };
    PartitionSolution::new(assignment.into_iter().map(Option::unwrap).collect(), k)
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sample_shape() {
        let g = sample();
        assert_eq!((g.n(), g.m()), (10, 17));
        assert!(g.has_edge(8, 0));
        assert!(!g.has_edge(0, 7));
    }

    #[test]
    fn path_graph() {
        let g = load_edge_list("0 1\n1 2").unwrap();
        assert_eq!((g.n(), g.m()), (3, 2));
    }

    #[test]
    fn directive_and_comments() {
        let g = load_edge_list("# header\n%n 6\n0 1\n\n").unwrap();
        assert_eq!((g.n(), g.m()), (6, 1));
        assert_eq!(load_edge_list("%n 2\n0 4").unwrap().n(), 5);
    }

    #[test]
    fn edge_list_errors() {
        assert!(matches!(load_edge_list("0 1\n1 0"), Err(GraphError::DuplicateEdge { line: 2, .. })));
        assert!(matches!(load_edge_list("3 3"), Err(GraphError::SelfLoop { node: 3, .. })));
        assert!(matches!(load_edge_list("0 1 2"), Err(GraphError::MalformedLine { .. })));
        assert!(matches!(load_edge_list("0 x"), Err(GraphError::MalformedLine { .. })));
        assert!(matches!(load_edge_list("0 -4"), Err(GraphError::NegativeId { value: -4, .. })));
        assert!(matches!(load_edge_list("%q 3"), Err(GraphError::MalformedLine { .. })));
    }

    #[test]
    fn validate_examples() {
        let g = sample();
        let strict = BalanceSpec::strict(2).unwrap();
        assert!(validate_partition(&g, &par1(), &strict, false).unwrap().ok);

        let lopsided = two_way(&[0, 1, 2, 3, 4, 5], 10);
        let report = validate_partition(&g, &lopsided, &strict, false).unwrap();
        assert!(!report.ok);
        assert_eq!(report.violation, Some(Violation::Oversized { block: 0, size: 6, capacity: 5 }));

        let loose = BalanceSpec::new(2, Ratio::from_integer(2)).unwrap();
        assert!(validate_partition(&g, &lopsided, &loose, false).unwrap().ok);

        let three = BalanceSpec::strict(3).unwrap();
        assert!(matches!(
            validate_partition(&g, &par1(), &three, false).unwrap().violation,
            Some(Violation::BlockCount { expected: 3, got: 2 })
        ));
        let short = PartitionSolution::single_block(4);
        assert!(matches!(validate_partition(&g, &short, &strict, false), Err(GraphError::LengthMismatch { expected: 10, got: 4 })));
    }

    #[test]
    fn empty_blocks_only_flagged_on_request() {
        let g = Graph::empty(2);
        let p = PartitionSolution::new(vec![0, 0], 2).unwrap();
        let spec = BalanceSpec::new(2, Ratio::from_integer(2)).unwrap();
        assert!(validate_partition(&g, &p, &spec, false).unwrap().ok);
        let report = validate_partition(&g, &p, &spec, true).unwrap();
        assert_eq!(report.violation, Some(Violation::EmptyBlock { block: 1 }));
    }

    #[test]
    fn balance_spec_rejects_bad_values() {
        assert!(BalanceSpec::strict(0).is_err());
        assert!(BalanceSpec::new(2, Ratio::new(1, 2)).is_err());
        assert_eq!(BalanceSpec::new(3, Ratio::new(3, 2)).unwrap().capacity(10), 6);
    }

    #[test]
    fn sample_cut_costs() {
        let g = sample();
        assert_eq!(cut_cost(&g, &par1()).unwrap(), 4);
        assert_eq!(cut_cost(&g, &par2()).unwrap(), 5);
        assert_eq!(cut_cost(&g, &par3()).unwrap(), 4);
        assert_eq!(cut_cost(&g, &PartitionSolution::single_block(10)).unwrap(), 0);
    }

    #[test]
    fn partition_file_round_trip() {
        let text = write_partition(&par1());
        assert_eq!(text.lines().count(), 11);
        assert_eq!(read_partition(&text, 10).unwrap(), par1());
    }

    #[test]
    fn partition_file_errors() {
        let missing: String = (0..10).filter(|&v| v != 7).map(|v| format!("{v} 0\n")).collect();
        assert_eq!(read_partition(&missing, 10), Err(GraphError::MissingNode { node: 7 }));

        let mut bad = String::from("%k 2\n");
        bad.extend((0..10).map(|v| format!("{v} {}\n", if v == 3 { 2 } else { 0 })));
        assert!(matches!(read_partition(&bad, 10), Err(GraphError::BlockOutOfRange { block: 2, k: 2, .. })));

        assert!(matches!(read_partition("0 0\n5 0\n", 2), Err(GraphError::NodeOutOfRange { node: 5, .. })));
        assert!(matches!(read_partition("0\n", 1), Err(GraphError::MalformedLine { .. })));
    }

    #[test]
    fn blocks_round_trip() {
        let p = par3();
        let blocks = p.blocks();
        assert_eq!(blocks.len(), 2);
        assert_eq!(PartitionSolution::from_blocks(&blocks, 10).unwrap(), p);
        assert!(PartitionSolution::from_blocks(&[vec![0], vec![0, 1]], 2).is_err());
        assert!(PartitionSolution::from_blocks(&[vec![0]], 2).is_err());
    }

    fn arb_graph() -> impl Strategy<Value = Graph> {
        (1usize..14).prop_flat_map(|n| {
            proptest::collection::vec(any::<bool>(), n * (n - 1) / 2).prop_map(move |mask| {
                let pairs = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v)));
                Graph::new(n, pairs.zip(mask).filter(|(_, keep)| *keep).map(|(e, _)| e)).unwrap()
            })
        })
    }

    fn arb_graph_and_partition() -> impl Strategy<Value = (Graph, Vec<usize>, usize)> {
        arb_graph().prop_flat_map(|g| {
            let n = g.n();
            (1usize..5).prop_flat_map(move |k| {
                let g = g.clone();
                proptest::collection::vec(0..k, n).prop_map(move |a| (g.clone(), a, k))
            })
        })
    }

    proptest! {
        #[test]
        fn edge_list_round_trip(g in arb_graph()) {
            let again = load_edge_list(&write_edge_list(&g)).unwrap();
            prop_assert_eq!(again, g);
        }

        #[test]
        fn cut_cost_label_invariant((g, a, k) in arb_graph_and_partition(), shift in 0usize..5) {
            let p = PartitionSolution::new(a.clone(), k).unwrap();
            let relabeled = PartitionSolution::new(a.iter().map(|&b| (b + shift) % k).collect(), k).unwrap();
            let c = cut_cost(&g, &p).unwrap();
            prop_assert_eq!(c, cut_cost(&g, &relabeled).unwrap());
            prop_assert!(c <= g.m() as u64);
            let crossing = g.edges().iter().any(|&(u, v)| a[u] != a[v]);
            prop_assert_eq!(c == 0, !crossing);
        }

        #[test]
        fn strict_validation_matches_ceiling((g, a, k) in arb_graph_and_partition()) {
            let p = PartitionSolution::new(a, k).unwrap();
            let spec = BalanceSpec::strict(k).unwrap();
            let ok = validate_partition(&g, &p, &spec, false).unwrap().ok;
            let cap = g.n().div_ceil(k);
            prop_assert_eq!(ok, p.block_sizes().iter().all(|&s| s <= cap));
        }
    }
}
