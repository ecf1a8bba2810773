//! Randomized threshold rounding of a vector solution into a balanced
//! partition whose blocks hold at most `2 * ceil(n/k)` nodes.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::graph::{ceil_div, PartitionSolution};
use crate::relaxation::VectorSolution;

/// Norms below this are treated as zero by [`RadialEmbedding`].
pub const ZERO_NORM: f64 = 1e-12;
/// Blocks may hold up to this many times `ceil(n/k)` nodes.
pub const CAP_FACTOR: usize = 2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RoundingError {
    #[error("quantile argument must be at least 1, got {0}")]
    BadM(f64),
    #[error("invalid rounding configuration: {0}")]
    BadConfig(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundingConfig {
    /// Threshold constant: the cut-off is the `1 - 1/(C k)` normal quantile.
    pub c: f64,
    pub lambda: f64,
    /// Trial budget; `None` means `1000 * k`.
    pub max_trials: Option<usize>,
    pub seed: u64,
}

impl Default for RoundingConfig {
    fn default() -> Self {
        RoundingConfig { c: 1.0, lambda: 2.0 / 3.0, max_trials: None, seed: 0 }
    }
}

impl RoundingConfig {
    pub fn with_seed(seed: u64) -> Self {
        RoundingConfig { seed, ..Self::default() }
    }

    pub fn trials(&self, k: usize) -> usize {
        self.max_trials.unwrap_or(1000 * k)
    }

    fn validate(&self, k: usize) -> Result<(), RoundingError> {
        let bad = |msg: String| Err(RoundingError::BadConfig(msg));
        if !(self.c > 0.0 && self.c.is_finite()) {
            return bad(format!("C must be positive, got {}", self.c));
        }
        if !(self.lambda > 0.0 && self.lambda <= 2.0) {
            return bad(format!("lambda must lie in (0, 2], got {}", self.lambda));
        }
        if k == 0 {
            return bad("k must be at least 1".into());
        }
        if self.trials(k) < k {
            return bad(format!("trial budget {} is below k = {k}", self.trials(k)));
        }
        Ok(())
    }
}

/// Maps node vectors to unit vectors before thresholding.
pub trait Embedding {
    fn embed(&self, sol: &VectorSolution) -> Vec<Vec<f64>>;
}

/// `v / |v|`; vectors with norm below [`ZERO_NORM`] map to `e_1`.
#[derive(Debug, Clone, Copy, Default)]
pub struct RadialEmbedding;

impl Embedding for RadialEmbedding {
    fn embed(&self, sol: &VectorSolution) -> Vec<Vec<f64>> {
        (0..sol.n())
            .map(|i| {
                let v = sol.vector(i);
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm < ZERO_NORM {
                    let mut e = vec![0.0; v.len()];
                    if let Some(first) = e.first_mut() {
                        *first = 1.0;
                    }
                    e
                } else {
                    v.iter().map(|x| x / norm).collect()
                }
            })
            .collect()
    }
}

/// `alpha` with `P[N(0,1) >= alpha] = 1/m`. `m = 1` is nudged to `1 + 1e-12`
/// so the result stays finite.
pub fn alpha_quantile(m: f64) -> Result<f64, RoundingError> {
    if m.is_nan() || m < 1.0 {
        return Err(RoundingError::BadM(m));
    }
    let m = m.max(1.0 + 1e-12);
    let normal = Normal::standard();
    Ok(normal.inverse_cdf(1.0 - 1.0 / m))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Trial {
    pub size: usize,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub blocks: Vec<Vec<usize>>,
    pub trace: Vec<Trial>,
    pub fallback_used: bool,
}

impl Extraction {
    /// One `trial <i> size <s> accepted <0|1>` line per draw.
    pub fn dump_trace(&self) -> String {
        let mut out = String::new();
        for (i, t) in self.trace.iter().enumerate() {
            let _ = writeln!(out, "trial {i} size {} accepted {}", t.size, u8::from(t.accepted));
        }
        out
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Peels off random threshold sets until at most `2 * ceil(n/k)` nodes
/// remain; the remainder becomes the last block.
///
/// A draw `r` with i.i.d. standard-normal coordinates selects every remaining
/// node whose unit vector has `v . r >= alpha_{C k}`, and is kept only when
/// it selects between 1 and `2 * ceil(n/k)` nodes. If the budget runs out,
/// the remaining nodes are sorted by projection on the first accepted `r`
/// (or `e_1`) and cut into chunks of `ceil(n/k)`.
pub fn extract_partitions(unit: &[Vec<f64>], k: usize, cfg: &RoundingConfig) -> Result<Extraction, RoundingError> {
    cfg.validate(k)?;
    let n = unit.len();
    let dim = unit.first().map_or(1, Vec::len);
    let cap = CAP_FACTOR * ceil_div(n, k);
    let alpha = alpha_quantile((cfg.c * k as f64).max(1.0))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut blocks = Vec::new();
    let mut trace = Vec::new();
    let mut first_accepted: Option<Vec<f64>> = None;
    let budget = cfg.trials(k);
    while remaining.len() > cap && trace.len() < budget {
        let r: Vec<f64> = (0..dim)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z
            })
            .collect();
        let (picked, rest): (Vec<usize>, Vec<usize>) = remaining.iter().partition(|&&i| dot(&unit[i], &r) >= alpha);
        let accepted = !picked.is_empty() && picked.len() <= cap;
        trace.push(Trial { size: picked.len(), accepted });
        if accepted {
            first_accepted.get_or_insert(r);
            blocks.push(picked);
            remaining = rest;
        }
    }
    let fallback_used = remaining.len() > cap;
    if fallback_used {
        let axis = first_accepted.unwrap_or_else(|| {
            let mut e = vec![0.0; dim];
            e[0] = 1.0;
            e
        });
        let mut keyed: Vec<(f64, usize)> = remaining.iter().map(|&i| (dot(&unit[i], &axis), i)).collect();
        keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let chunk = ceil_div(n, k);
        for c in keyed.chunks(chunk) {
            blocks.push(c.iter().map(|&(_, i)| i).collect());
        }
    } else if !remaining.is_empty() {
        blocks.push(remaining);
    }
    Ok(Extraction { blocks, trace, fallback_used })
}

/// Merges the two smallest blocks while there are more than `k`, and splits
/// the largest block in half (by node id, earlier half one larger) while
/// there are fewer. Blocks come out ordered by smallest node.
pub fn normalize_partition_count(blocks: Vec<Vec<usize>>, k: usize, n: usize) -> PartitionSolution {
    normalize_with(blocks, k, n, |b| {
        let mut b = b.to_vec();
        b.sort_unstable();
        b
    })
}

/// Like [`normalize_partition_count`], with splits cutting `split_order(block)`
/// in half.
fn normalize_with(blocks: Vec<Vec<usize>>, k: usize, n: usize, split_order: impl Fn(&[usize]) -> Vec<usize>) -> PartitionSolution {
    let mut blocks: Vec<Vec<usize>> = blocks.into_iter().filter(|b| !b.is_empty()).collect();
    for b in &mut blocks {
        b.sort_unstable();
    }
    while blocks.len() > k {
        blocks.sort_by_key(|b| (b.len(), b[0]));
        let first = blocks.remove(0);
        let second = blocks.remove(0);
        let mut merged = [first, second].concat();
        merged.sort_unstable();
        blocks.push(merged);
    }
    while blocks.len() < k {
        let Some(idx) =
            (0..blocks.len()).filter(|&i| blocks[i].len() > 1).max_by_key(|&i| (blocks[i].len(), std::cmp::Reverse(blocks[i][0])))
        else {
            break; // only singletons left: n < k
        };
        let block = blocks.swap_remove(idx);
        let order = split_order(&block);
        let half = order.len().div_ceil(2);
        let mut a = order[..half].to_vec();
        let mut b = order[half..].to_vec();
        a.sort_unstable();
        b.sort_unstable();
        blocks.push(a);
        blocks.push(b);
    }
    blocks.sort_by_key(|b| b[0]);
    PartitionSolution::from_blocks(&blocks.iter().cloned().chain(std::iter::repeat_n(Vec::new(), k - blocks.len())).collect::<Vec<_>>(), n)
        .expect("blocks cover 0..n disjointly")
}

/// Orders a block for splitting along its principal axis, so that the two
/// halves follow the block's geometry. The axis comes from a fixed number of
/// power iterations on the block's centered vectors; ties and degenerate
/// blocks fall back to node id order.
fn geometric_order(unit: &[Vec<f64>], block: &[usize]) -> Vec<usize> {
    let dim = unit.first().map_or(0, Vec::len);
    let mut mean = vec![0.0; dim];
    for &i in block {
        for (m, x) in mean.iter_mut().zip(&unit[i]) {
            *m += x / block.len() as f64;
        }
    }
    let centered: Vec<Vec<f64>> = block.iter().map(|&i| unit[i].iter().zip(&mean).map(|(x, m)| x - m).collect()).collect();
    let norm = |v: &[f64]| dot(v, v).sqrt();
    // start from the longest centered vector (first on ties)
    let start = centered.iter().fold(None::<&Vec<f64>>, |best, c| match best {
        Some(b) if norm(b) >= norm(c) => Some(b),
        _ => Some(c),
    });
    let mut axis = match start {
        Some(v) if norm(v) > 1e-9 => v.clone(),
        _ => {
            let mut ids = block.to_vec();
            ids.sort_unstable();
            return ids;
        }
    };
    for _ in 0..100 {
        let mut next = vec![0.0; dim];
        for c in &centered {
            let proj = dot(c, &axis);
            next.iter_mut().zip(c).for_each(|(n, x)| *n += proj * x);
        }
        let len = norm(&next);
        if len <= 1e-12 {
            break;
        }
        axis = next.into_iter().map(|x| x / len).collect();
    }
    let mut keyed: Vec<(f64, usize)> = block.iter().zip(&centered).map(|(&i, c)| (dot(c, &axis), i)).collect();
    // quantize so round-off cannot reorder equal vectors
    keyed.sort_by(|x, y| (x.0 * 1e9).round().total_cmp(&(y.0 * 1e9).round()).then(x.1.cmp(&y.1)));
    keyed.into_iter().map(|(_, i)| i).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundingReport {
    pub trials: usize,
    pub accepted: usize,
    pub fallback_used: bool,
    pub block_sizes: Vec<usize>,
    pub extraction: Extraction,
}

/// Embeds, extracts and normalizes to exactly `k` blocks of at most
/// `2 * ceil(n/k)` nodes. Deterministic for a given `cfg.seed`.
///
/// When a block has to be split, its halves follow the embedded geometry
/// (see the crate README); [`normalize_partition_count`] on its own splits
/// by node id.
pub fn round(
    sol: &VectorSolution,
    k: usize,
    cfg: &RoundingConfig,
    embedding: &dyn Embedding,
) -> Result<(PartitionSolution, RoundingReport), RoundingError> {
    cfg.validate(k)?;
    let n = sol.n();
    let unit = embedding.embed(sol);
    let extraction = extract_partitions(&unit, k, cfg)?;
    let p = normalize_with(extraction.blocks.clone(), k, n, |b| geometric_order(&unit, b));
    let report = RoundingReport {
        trials: extraction.trace.len(),
        accepted: extraction.trace.iter().filter(|t| t.accepted).count(),
        fallback_used: extraction.fallback_used,
        block_sizes: p.block_sizes(),
        extraction,
    };
    Ok((p, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{validate_partition, BalanceSpec, Graph};
    use crate::relaxation::trivial_solution;
    use proptest::prelude::*;

    fn unit_of(vs: &[Vec<f64>]) -> VectorSolution {
        VectorSolution::from_vectors(vs[0].len(), vs, Vec::new())
    }

    #[test]
    fn radial_embedding_examples() {
        let sol = trivial_solution(4, 2, 2).unwrap();
        let e = RadialEmbedding.embed(&sol);
        assert_eq!(e, vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 1.0]]);

        let zero = unit_of(&[vec![0.0, 0.0, 0.0]]);
        assert_eq!(RadialEmbedding.embed(&zero), vec![vec![1.0, 0.0, 0.0]]);

        let basis = unit_of(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert_eq!(RadialEmbedding.embed(&basis), vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
    }

    #[test]
    fn alpha_examples() {
        assert!(alpha_quantile(2.0).unwrap().abs() < 1e-12);
        assert!((alpha_quantile(4.0).unwrap() - 0.674_489_750_196_081_7).abs() < 1e-9);
        assert!(alpha_quantile(10.0).unwrap() > alpha_quantile(4.0).unwrap());
        assert!(alpha_quantile(1.0).unwrap().is_finite());
        assert_eq!(alpha_quantile(0.5), Err(RoundingError::BadM(0.5)));
    }

    #[test]
    fn config_validation() {
        let unit = vec![vec![1.0]; 3];
        let bad = RoundingConfig { c: 0.0, ..Default::default() };
        assert!(extract_partitions(&unit, 2, &bad).is_err());
        let bad = RoundingConfig { lambda: 2.5, ..Default::default() };
        assert!(extract_partitions(&unit, 2, &bad).is_err());
        let bad = RoundingConfig { max_trials: Some(1), ..Default::default() };
        assert!(extract_partitions(&unit, 2, &bad).is_err());
    }

    #[test]
    fn extraction_boundaries() {
        let unit: Vec<Vec<f64>> = (0..10).map(|i| vec![(i as f64).cos(), (i as f64).sin()]).collect();
        let ex = extract_partitions(&unit, 1, &RoundingConfig::default()).unwrap();
        assert_eq!(ex.blocks, vec![(0..10).collect::<Vec<_>>()]);
        assert!(ex.trace.is_empty());
        let ex = extract_partitions(&unit, 2, &RoundingConfig::default()).unwrap();
        assert_eq!(ex.blocks.len(), 1);
        assert!(ex.trace.is_empty());
    }

    #[test]
    fn antipodal_clusters_stay_pure() {
        let mut unit = vec![vec![1.0, 0.0, 0.0]; 5];
        unit.extend(vec![vec![-1.0, 0.0, 0.0]; 5]);
        for seed in 0..20 {
            let ex = extract_partitions(&unit, 4, &RoundingConfig::with_seed(seed)).unwrap();
            assert!(!ex.fallback_used);
            for b in &ex.blocks[..ex.blocks.len() - 1] {
                assert!(b.iter().all(|&i| i < 5) || b.iter().all(|&i| i >= 5), "{b:?}");
            }
            for t in &ex.trace {
                if t.accepted {
                    assert!(t.size > 0 && t.size <= 6);
                }
            }
        }
    }

    #[test]
    fn trace_dump_format() {
        let mut unit = vec![vec![1.0, 0.0]; 6];
        unit.extend(vec![vec![0.0, 1.0]; 6]);
        let ex = extract_partitions(&unit, 4, &RoundingConfig::with_seed(3)).unwrap();
        let dump = ex.dump_trace();
        assert_eq!(dump.lines().count(), ex.trace.len());
        assert!(dump.lines().all(|l| l.starts_with("trial ") && (l.ends_with(" 0") || l.ends_with(" 1"))));
    }

    #[test]
    fn fallback_when_budget_exhausted() {
        // Every draw selects all or nothing, so nothing is ever accepted.
        let unit = vec![vec![1.0]; 12];
        let cfg = RoundingConfig { max_trials: Some(4), ..Default::default() };
        let ex = extract_partitions(&unit, 4, &cfg).unwrap();
        assert!(ex.fallback_used);
        assert_eq!(ex.trace.len(), 4);
        assert_eq!(ex.blocks, vec![vec![0, 1, 2], vec![3, 4, 5], vec![6, 7, 8], vec![9, 10, 11]]);
    }

    #[test]
    fn normalization_examples() {
        let p = normalize_partition_count(vec![vec![0], vec![1], vec![2]], 2, 3);
        assert_eq!(p.blocks(), vec![vec![0, 1], vec![2]]);
        let p = normalize_partition_count(vec![vec![0, 1, 2, 3]], 2, 4);
        assert_eq!(p.blocks(), vec![vec![0, 1], vec![2, 3]]);
        let p = normalize_partition_count(vec![vec![2, 0], vec![1, 3]], 2, 4);
        assert_eq!(p.blocks(), vec![vec![0, 2], vec![1, 3]]);
        let p = normalize_partition_count(vec![vec![0, 1, 2, 3, 4]], 2, 5);
        assert_eq!(p.blocks(), vec![vec![0, 1, 2], vec![3, 4]]);
        let p = normalize_partition_count(vec![vec![0, 1]], 3, 2);
        assert_eq!(p.block_sizes(), vec![1, 1, 0]);
    }

    #[test]
    fn round_small_examples() {
        let sol = trivial_solution(4, 2, 2).unwrap();
        let (p, _) = round(&sol, 2, &RoundingConfig::with_seed(5), &RadialEmbedding).unwrap();
        assert_eq!(p.blocks(), vec![vec![0, 1], vec![2, 3]]);

        let one = VectorSolution::new(1, vec![0.0], Vec::new());
        let (p, report) = round(&one, 1, &RoundingConfig::default(), &RadialEmbedding).unwrap();
        assert_eq!(p.blocks(), vec![vec![0]]);
        assert_eq!(report.trials, 0);
    }

    #[test]
    fn integral_cliques_are_recovered() {
        for k in 2..=3 {
            for s in 3..=5 {
                let n = k * s;
                let vs: Vec<Vec<f64>> = (0..n)
                    .map(|v| {
                        let mut e = vec![0.0; k];
                        e[v / s] = 1.0;
                        e
                    })
                    .collect();
                let sol = unit_of(&vs);
                let mut hits = 0;
                for seed in 0..100 {
                    let (p, _) = round(&sol, k, &RoundingConfig::with_seed(seed), &RadialEmbedding).unwrap();
                    hits += usize::from(p.assignment().iter().enumerate().all(|(v, &b)| p.block_of(v / s * s) == b));
                }
                assert!(hits >= 95, "k={k} s={s} hits={hits}");
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]

        #[test]
        fn output_is_balanced_and_deterministic(n in 1usize..40, kk in 0usize..5, dim in 1usize..6, seed in any::<u64>(), vseed in any::<u64>()) {
            let k = [1, 2, 3, 5, n][kk];
            let mut rng = ChaCha8Rng::seed_from_u64(vseed);
            let coords: Vec<f64> = (0..n * dim).map(|_| { let z: f64 = StandardNormal.sample(&mut rng); z }).collect();
            let sol = VectorSolution::new(dim, coords, Vec::new());
            let cfg = RoundingConfig::with_seed(seed);
            let (p, report) = round(&sol, k, &cfg, &RadialEmbedding).unwrap();
            prop_assert_eq!(p.k(), k);
            let spec = BalanceSpec::new(k, num_rational::Ratio::from_integer(2)).unwrap();
            let v = validate_partition(&Graph::empty(n), &p, &spec, n >= k).unwrap();
            prop_assert!(v.ok, "{:?}", v);
            let cap = 2 * ceil_div(n, k);
            for t in &report.extraction.trace {
                if t.accepted { prop_assert!(t.size > 0 && t.size <= cap); }
            }
            for e in RadialEmbedding.embed(&sol) {
                prop_assert!((e.iter().map(|x| x * x).sum::<f64>().sqrt() - 1.0).abs() <= 1e-12);
            }
            let again = round(&sol, k, &cfg, &RadialEmbedding).unwrap().0;
            prop_assert_eq!(p, again);
        }
    }
}
