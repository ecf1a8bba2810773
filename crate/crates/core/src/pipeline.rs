//! End-to-end partitioning: relaxation, solve, rounding, evaluation.

use std::time::{Duration, Instant};

use thiserror::Error;

use crate::graph::{Graph, GraphError, PartitionSolution};
use crate::motif::{motif_cost, MotifError, MotifOccurrenceSet};
use crate::relaxation::{build_motif_program, build_workload_program, solve, RelaxationError, SolveOutcome, SolverConfig, VectorProgram};
use crate::rounding::{round, RadialEmbedding, RoundingConfig, RoundingError, RoundingReport};
use crate::workload::{aggregate_weights, workload_cost, Workload, WorkloadError};
use crate::Cost;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Relaxation(#[from] RelaxationError),
    #[error(transparent)]
    Rounding(#[from] RoundingError),
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error(transparent)]
    Motif(#[from] MotifError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub solver: SolverConfig,
    pub rounding: RoundingConfig,
}

impl PipelineConfig {
    /// Default settings with one seed driving both the solver and the rounding.
    pub fn seeded(seed: u64) -> Self {
        PipelineConfig { solver: SolverConfig { seed, ..SolverConfig::default() }, rounding: RoundingConfig::with_seed(seed) }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub partition: PartitionSolution,
    pub cost: Cost,
    pub solve: SolveOutcome,
    pub rounding: RoundingReport,
    /// Wall time per stage, in pipeline order.
    pub timings: Vec<(&'static str, Duration)>,
}

impl PipelineOutcome {
    /// The relaxation did not converge or rounding fell back to chunking.
    pub fn degraded(&self) -> bool {
        !self.solve.converged || self.rounding.fallback_used
    }
}

fn solve_and_round(
    prog: &VectorProgram,
    k: usize,
    cfg: &PipelineConfig,
    timings: &mut Vec<(&'static str, Duration)>,
) -> Result<(SolveOutcome, PartitionSolution, RoundingReport), PipelineError> {
    let t = Instant::now();
    let outcome = solve(prog, &cfg.solver)?;
    timings.push(("solve", t.elapsed()));
    let t = Instant::now();
    let (p, report) = round(&outcome.solution, k, &cfg.rounding, &RadialEmbedding)?;
    timings.push(("round", t.elapsed()));
    Ok((outcome, p, report))
}

/// Aggregates the workload, solves its relaxation and rounds.
pub fn partition_workload(g: &Graph, w: &Workload, k: usize, cfg: &PipelineConfig) -> Result<PipelineOutcome, PipelineError> {
    let mut timings = Vec::new();
    let t = Instant::now();
    let weights = aggregate_weights(w);
    let prog = build_workload_program(g, k, &weights)?;
    timings.push(("build", t.elapsed()));
    let (solve, partition, rounding) = solve_and_round(&prog, k, cfg, &mut timings)?;
    let cost = workload_cost(g, w, &partition)?;
    Ok(PipelineOutcome { partition, cost, solve, rounding, timings })
}

/// Solves the motif relaxation over `occ` and rounds.
pub fn partition_motif(g: &Graph, occ: &MotifOccurrenceSet, k: usize, cfg: &PipelineConfig) -> Result<PipelineOutcome, PipelineError> {
    let mut timings = Vec::new();
    let t = Instant::now();
    let prog = build_motif_program(g, k, occ)?;
    timings.push(("build", t.elapsed()));
    let (solve, partition, rounding) = solve_and_round(&prog, k, cfg, &mut timings)?;
    let cost = Cost::from_integer(motif_cost(occ, &partition)? as i64);
    Ok(PipelineOutcome { partition, cost, solve, rounding, timings })
}
