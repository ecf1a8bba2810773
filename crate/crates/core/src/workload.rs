//! Workloads: jobs that visit edges with given frequencies, their expected
//! communication cost, and the per-edge weight aggregation used by the
//! relaxation.

use std::collections::BTreeMap;

use num_rational::Ratio;
use thiserror::Error;

use crate::graph::{edge_key, Edge, Graph, GraphError, PartitionSolution};
use crate::Cost;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WorkloadError {
    #[error("line {line}: edge ({u}, {v}) is not in the graph")]
    UnknownEdge { line: usize, u: usize, v: usize },
    #[error("line {line}: counts and frequencies must be positive")]
    NonPositiveCount { line: usize },
    #[error("workload has no jobs")]
    EmptyWorkload,
    #[error("line {line}: malformed line {text:?}")]
    MalformedLine { line: usize, text: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// One job: a frequency and the edges it visits, each with a visit count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Job {
    pub freq: u64,
    pub visits: Vec<(Edge, u64)>,
}

/// A set of jobs bound to a graph. Total frequency is always positive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Workload {
    jobs: Vec<Job>,
    total_freq: u64,
}

impl Workload {
    /// Binds jobs to `g`; every visited edge must exist.
    pub fn new(g: &Graph, jobs: Vec<Job>) -> Result<Self, WorkloadError> {
        if jobs.is_empty() {
            return Err(WorkloadError::EmptyWorkload);
        }
        let mut jobs = jobs;
        for (j, job) in jobs.iter_mut().enumerate() {
            if job.freq == 0 {
                return Err(WorkloadError::NonPositiveCount { line: j + 1 });
            }
            for (e, count) in &mut job.visits {
                if *count == 0 {
                    return Err(WorkloadError::NonPositiveCount { line: j + 1 });
                }
                if !g.has_edge(e.0, e.1) {
                    return Err(WorkloadError::UnknownEdge { line: j + 1, u: e.0, v: e.1 });
                }
                *e = edge_key(e.0, e.1);
            }
        }
        let total_freq = jobs.iter().map(|j| j.freq).sum();
        Ok(Workload { jobs, total_freq })
    }

    pub fn jobs(&self) -> &[Job] {
        &self.jobs
    }

    /// `C`, the sum of job frequencies.
    pub fn total_freq(&self) -> u64 {
        self.total_freq
    }
}

/// Parses the workload format: `job <freq>` opens a job, `edge <u> <v> <count>`
/// adds a visit to the open job, `#` starts a comment.
pub fn parse_workload(text: &str, g: &Graph) -> Result<Workload, WorkloadError> {
    let mut jobs: Vec<Job> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.trim();
        if body.is_empty() || body.starts_with('#') {
            continue;
        }
        let malformed = || WorkloadError::MalformedLine { line, text: raw.to_string() };
        let tokens: Vec<&str> = body.split_whitespace().collect();
        let number = |t: &str| -> Result<u64, WorkloadError> {
            match t.parse::<i64>() {
                Ok(v) if v <= 0 => Err(WorkloadError::NonPositiveCount { line }),
                Ok(v) => Ok(v as u64),
                Err(_) => Err(malformed()),
            }
        };
        let node = |t: &str| -> Result<usize, WorkloadError> {
            t.parse::<usize>().map_err(|_| match t.parse::<i64>() {
                Ok(v) => WorkloadError::Graph(GraphError::NegativeId { line, value: v }),
                Err(_) => malformed(),
            })
        };
        match tokens.as_slice() {
            ["job", freq] => jobs.push(Job { freq: number(freq)?, visits: Vec::new() }),
            ["edge", u, v, count] => {
                let (u, v) = (node(u)?, node(v)?);
                let count = number(count)?;
                if !g.has_edge(u, v) {
                    return Err(WorkloadError::UnknownEdge { line, u, v });
                }
                let job = jobs.last_mut().ok_or_else(malformed)?;
                job.visits.push((edge_key(u, v), count));
            }
            _ => return Err(malformed()),
        }
    }
    Workload::new(g, jobs)
}

/// Frequency-normalized expected number of cross-block edge visits.
pub fn workload_cost(g: &Graph, w: &Workload, p: &PartitionSolution) -> Result<Cost, WorkloadError> {
    if p.n() != g.n() {
        return Err(GraphError::LengthMismatch { expected: g.n(), got: p.n() }.into());
    }
    let mut numerator: i64 = 0;
    for job in w.jobs() {
        let crossing: u64 = job.visits.iter().filter(|((u, v), _)| p.block_of(*u) != p.block_of(*v)).map(|(_, c)| c).sum();
        numerator += (job.freq * crossing) as i64;
    }
    Ok(Ratio::new(numerator, w.total_freq() as i64))
}

/// Per-edge aggregated weights `W_ij`; only visited edges carry an entry.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EdgeWeightMap {
    weights: BTreeMap<Edge, Cost>,
}

impl EdgeWeightMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sets the weight of an unordered edge. Zero weights are dropped.
    pub fn insert(&mut self, u: usize, v: usize, w: Cost) {
        let key = edge_key(u, v);
        if w == Ratio::from_integer(0) {
            self.weights.remove(&key);
        } else {
            self.weights.insert(key, w);
        }
    }

    pub fn get(&self, u: usize, v: usize) -> Option<Cost> {
        self.weights.get(&edge_key(u, v)).copied()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Edge, Cost)> + '_ {
        self.weights.iter().map(|(&e, &w)| (e, w))
    }

    /// Sum of weights over edges whose endpoints are in different blocks.
    pub fn crossing_weight(&self, p: &PartitionSolution) -> Cost {
        self.iter().filter(|((u, v), _)| p.block_of(*u) != p.block_of(*v)).fold(Ratio::from_integer(0), |acc, (_, w)| acc + w)
    }
}

/// Collapses a workload onto edges: `W_ij = sum_x sum_y c_x * c_xy * [e_xy = (i, j)] / C`.
pub fn aggregate_weights(w: &Workload) -> EdgeWeightMap {
    let mut numerators: BTreeMap<Edge, i64> = BTreeMap::new();
    for job in w.jobs() {
        for &(e, count) in &job.visits {
            *numerators.entry(e).or_default() += (job.freq * count) as i64;
        }
    }
    let c = w.total_freq() as i64;
    let mut map = EdgeWeightMap::new();
    for (e, num) in numerators {
        map.insert(e.0, e.1, Ratio::new(num, c));
    }
    map
}

#[cfg(test)]
pub(crate) mod fixtures {
    pub const SHORTEST_PATH: &str = "job 1\nedge 1 4 1\nedge 4 6 1\nedge 1 6 1\nedge 1 2 1\nedge 1 5 1\nedge 5 6 1\n";
}

#[cfg(test)]
mod tests {
    use super::fixtures::SHORTEST_PATH;
    use super::*;
    use crate::graph::fixtures::*;
    use crate::graph::load_edge_list;
    use proptest::prelude::*;

    fn int(v: i64) -> Cost {
        Ratio::from_integer(v)
    }

    #[test]
    fn parse_shortest_path_workload() {
        let g = sample();
        let w = parse_workload(SHORTEST_PATH, &g).unwrap();
        assert_eq!(w.jobs().len(), 1);
        assert_eq!(w.jobs()[0].visits.len(), 6);
        assert_eq!(w.total_freq(), 1);
    }

    #[test]
    fn parse_errors() {
        let g = sample();
        assert!(matches!(parse_workload("job 1\nedge 0 7 1\n", &g), Err(WorkloadError::UnknownEdge { line: 2, u: 0, v: 7 })));
        assert_eq!(parse_workload("", &g), Err(WorkloadError::EmptyWorkload));
        assert_eq!(parse_workload("# nothing\n", &g), Err(WorkloadError::EmptyWorkload));
        assert!(matches!(parse_workload("job 0\n", &g), Err(WorkloadError::NonPositiveCount { line: 1 })));
        assert!(matches!(parse_workload("job 1\nedge 1 2 -1\n", &g), Err(WorkloadError::NonPositiveCount { line: 2 })));
        assert!(matches!(parse_workload("edge 1 2 1\n", &g), Err(WorkloadError::MalformedLine { .. })));
        assert!(matches!(parse_workload("job\n", &g), Err(WorkloadError::MalformedLine { .. })));
    }

    #[test]
    fn sample_workload_costs() {
        let g = sample();
        let w = parse_workload(SHORTEST_PATH, &g).unwrap();
        assert_eq!(workload_cost(&g, &w, &par2()).unwrap(), int(0));
        assert_eq!(workload_cost(&g, &w, &par1()).unwrap(), int(1));
        assert_eq!(workload_cost(&g, &w, &PartitionSolution::single_block(10)).unwrap(), int(0));
    }

    #[test]
    fn aggregation_examples() {
        let g = load_edge_list("0 1\n").unwrap();
        let w = parse_workload("job 2\nedge 0 1 3\n", &g).unwrap();
        assert_eq!(aggregate_weights(&w).get(0, 1), Some(int(3)));

        let w = parse_workload("job 1\nedge 0 1 1\njob 1\nedge 1 0 1\n", &g).unwrap();
        assert_eq!(aggregate_weights(&w).get(0, 1), Some(int(1)));

        let fig = sample();
        let w = parse_workload(SHORTEST_PATH, &fig).unwrap();
        let map = aggregate_weights(&w);
        assert_eq!(map.len(), 6);
        for (u, v) in [(1, 4), (4, 6), (1, 6), (1, 2), (1, 5), (5, 6)] {
            assert_eq!(map.get(u, v), Some(int(1)));
        }
        assert_eq!(map.get(0, 3), None);
    }

    #[test]
    fn repeated_visits_are_summed() {
        let g = load_edge_list("0 1\n1 2\n").unwrap();
        let w = parse_workload("job 1\nedge 0 1 1\nedge 1 0 2\n", &g).unwrap();
        assert_eq!(aggregate_weights(&w).get(0, 1), Some(int(3)));
        let p = PartitionSolution::new(vec![0, 1, 1], 2).unwrap();
        assert_eq!(workload_cost(&g, &w, &p).unwrap(), int(3));
    }

    #[test]
    fn length_mismatch() {
        let g = sample();
        let w = parse_workload(SHORTEST_PATH, &g).unwrap();
        assert!(workload_cost(&g, &w, &PartitionSolution::single_block(3)).is_err());
    }

    fn arb_instance() -> impl Strategy<Value = (Graph, Workload, PartitionSolution)> {
        (2usize..10, 1usize..4).prop_flat_map(|(n, k)| {
            let pairs: Vec<(usize, usize)> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
            let np = pairs.len();
            (
                proptest::collection::vec(any::<bool>(), np),
                proptest::collection::vec((1u64..5, proptest::collection::vec((0..np, 1u64..4), 0..6)), 1..4),
                proptest::collection::vec(0..k, n),
            )
                .prop_map(move |(mask, jobs, a)| {
                    // Always keep at least the edges the jobs reference.
                    let used: std::collections::BTreeSet<usize> = jobs.iter().flat_map(|(_, v)| v.iter().map(|(i, _)| *i)).collect();
                    let edges = pairs.iter().enumerate().filter(|(i, _)| mask[*i] || used.contains(i)).map(|(_, e)| *e);
                    let g = Graph::new(n, edges).unwrap();
                    let jobs = jobs
                        .into_iter()
                        .map(|(freq, visits)| Job { freq, visits: visits.into_iter().map(|(i, c)| (pairs[i], c)).collect() })
                        .collect();
                    let w = Workload::new(&g, jobs).unwrap();
                    (g, w, PartitionSolution::new(a, k).unwrap())
                })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn aggregation_preserves_cost((g, w, p) in arb_instance()) {
            let direct = workload_cost(&g, &w, &p).unwrap();
            prop_assert_eq!(direct, aggregate_weights(&w).crossing_weight(&p));
        }

        #[test]
        fn cost_bounds_and_invariances((g, w, p) in arb_instance(), scale in 1u64..6) {
            let cost = workload_cost(&g, &w, &p).unwrap();
            let worst = w.jobs().iter().map(|j| j.visits.iter().map(|v| v.1).sum::<u64>()).max().unwrap();
            prop_assert!(cost >= int(0) && cost <= int(worst as i64));

            let k = p.k();
            let flipped = PartitionSolution::new(p.assignment().iter().map(|&b| k - 1 - b).collect(), k).unwrap();
            prop_assert_eq!(cost, workload_cost(&g, &w, &flipped).unwrap());

            let scaled_jobs = w.jobs().iter().map(|j| Job { freq: j.freq * scale, visits: j.visits.clone() }).collect();
            let scaled = Workload::new(&g, scaled_jobs).unwrap();
            prop_assert_eq!(cost, workload_cost(&g, &scaled, &p).unwrap());
        }
    }
}
