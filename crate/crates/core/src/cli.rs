//! Command-line front end. Every failure is reported as `<stage>: <message>`
//! and mapped to exit code 1; a degraded but usable result exits with 2.

use std::fmt::{Display, Write as _};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::graph::{cut_cost, load_edge_list, read_partition, write_edge_list, write_partition, Graph};
use crate::motif::{enumerate_motif, enumerate_triangles, motif_cost, Motif, MotifOccurrenceSet};
use crate::oracle::{exact_partition, gen_bisection_reduction, gen_clique_union, CostKind};
use crate::pipeline::{partition_motif, partition_workload, PipelineConfig, PipelineError, PipelineOutcome};
use crate::workload::{parse_workload, workload_cost, Workload};
use crate::{par, Cost};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_DEGRADED: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "balance-forge", version, about = "Balanced k-partitioning for workload and motif costs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Partition to minimize expected workload communication cost.
    PartitionWorkload {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        workload: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Partition to preserve motif occurrences (triangles by default).
    PartitionMotif {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, conflicts_with = "triangle")]
        motif: Option<PathBuf>,
        #[arg(long)]
        triangle: bool,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Print the cost of an existing partition.
    Evaluate {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        partition: PathBuf,
        #[command(flatten)]
        objective: ObjectiveArgs,
    },
    /// Exhaustive optimum for small instances.
    Exact {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        k: usize,
        #[command(flatten)]
        objective: ObjectiveArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a generated instance as an edge list.
    Generate {
        #[command(subcommand)]
        kind: Generate,
    },
}

#[derive(Debug, Subcommand)]
pub enum Generate {
    /// Clique-plus-triangle gadget graph for a bisection instance.
    Reduction {
        #[arg(long)]
        graph: PathBuf,
        /// Clique size; smallest valid even size when omitted.
        #[arg(long)]
        x: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Disjoint union of cliques, e.g. `--sizes 3,3,4`.
    Cliques {
        #[arg(long, allow_hyphen_values = true)]
        sizes: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Embedding dimension of the relaxation.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Rounding threshold constant.
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub max_trials: Option<usize>,
    /// Feasibility tolerance of the solver.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Partition file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Run report; stderr when omitted.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct ObjectiveArgs {
    #[arg(long)]
    pub workload: Option<PathBuf>,
    #[arg(long)]
    pub motif: Option<PathBuf>,
    #[arg(long)]
    pub triangle: bool,
    #[arg(long)]
    pub cut: bool,
}

/// A failure tagged with the stage that produced it.
#[derive(Debug)]
pub struct CliError {
    pub stage: &'static str,
    pub message: String,
}

impl Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.stage, self.message)
    }
}

fn fail(stage: &'static str) -> impl Fn(&dyn Display) -> CliError {
    move |e| CliError { stage, message: e.to_string() }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        let stage = match e {
            PipelineError::Relaxation(_) => "relaxation",
            PipelineError::Rounding(_) => "rounding",
            PipelineError::Workload(_) => "workload-model",
            PipelineError::Motif(_) => "motif-engine",
            PipelineError::Graph(_) => "graph-core",
        };
        CliError { stage, message: e.to_string() }
    }
}

fn read(path: &Path, stage: &'static str) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError { stage, message: format!("{}: {e}", path.display()) })
}

fn write_or(path: Option<&Path>, text: &str, stdout: bool) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError { stage: "cli", message: format!("{}: {e}", p.display()) }),
        None if stdout => {
            print!("{text}");
            Ok(())
        }
        None => {
            eprint!("{text}");
            Ok(())
        }
    }
}

fn load_graph(path: &Path) -> Result<Graph, CliError> {
    load_edge_list(&read(path, "graph-core")?).map_err(|e| fail("graph-core")(&e))
}

fn load_workload(path: &Path, g: &Graph) -> Result<Workload, CliError> {
    parse_workload(&read(path, "workload-model")?, g).map_err(|e| fail("workload-model")(&e))
}

fn load_occurrences(motif: Option<&Path>, g: &Graph) -> Result<MotifOccurrenceSet, CliError> {
    match motif {
        None => Ok(enumerate_triangles(g)),
        Some(path) => {
            let pattern = load_edge_list(&read(path, "motif-engine")?).map_err(|e| fail("motif-engine")(&e))?;
            let m = Motif::from_graph(&pattern).map_err(|e| fail("motif-engine")(&e))?;
            Ok(enumerate_motif(g, &m))
        }
    }
}

fn pipeline_config(run: &RunArgs) -> PipelineConfig {
    let mut cfg = PipelineConfig::seeded(run.seed);
    cfg.solver.dim = run.dim;
    if let Some(tol) = run.tol {
        cfg.solver.feas_tol = tol;
    }
    if let Some(c) = run.c {
        cfg.rounding.c = c;
    }
    cfg.rounding.max_trials = run.max_trials;
    cfg
}

/// Flat `key value` run report.
pub fn run_report(g: &Graph, k: usize, kind: &str, occurrences: Option<usize>, out: &PipelineOutcome) -> String {
    let mut r = String::new();
    let mut kv = |key: &str, value: &dyn Display| {
        let _ = writeln!(r, "{key} {value}");
    };
    kv("n", &g.n());
    kv("m", &g.m());
    kv("k", &k);
    kv("objective", &kind);
    if let Some(count) = occurrences {
        kv("occurrences", &count);
    }
    let rep = &out.solve.report;
    kv("sdpObjective", &out.solve.solution.objective);
    kv("converged", &out.solve.converged);
    kv("outerIterations", &out.solve.outer_iterations);
    kv("maxSpreadingViolation", &rep.spreading);
    kv("maxTriangleViolation", &rep.triangle);
    kv("maxLinkViolation", &rep.link);
    kv("trials", &out.rounding.trials);
    kv("accepted", &out.rounding.accepted);
    kv("fallbackUsed", &out.rounding.fallback_used);
    let sizes: Vec<String> = out.rounding.block_sizes.iter().map(usize::to_string).collect();
    kv("blockSizes", &sizes.join(","));
    kv("finalCost", &out.cost);
    for (stage, t) in &out.timings {
        kv(&format!("time.{stage}"), &format!("{:.6}", t.as_secs_f64()));
    }
    r
}

fn finish_run(g: &Graph, run: &RunArgs, kind: &str, occurrences: Option<usize>, out: &PipelineOutcome) -> Result<i32, CliError> {
    write_or(run.out.as_deref(), &write_partition(&out.partition), true)?;
    write_or(run.report.as_deref(), &run_report(g, run.k, kind, occurrences, out), false)?;
    Ok(if out.degraded() { EXIT_DEGRADED } else { EXIT_OK })
}

fn evaluate(g: &Graph, text: &str, objective: &ObjectiveArgs) -> Result<Cost, CliError> {
    let p = read_partition(text, g.n()).map_err(|e| fail("graph-core")(&e))?;
    if let Some(path) = &objective.workload {
        let w = load_workload(path, g)?;
        return workload_cost(g, &w, &p).map_err(|e| fail("workload-model")(&e));
    }
    if objective.cut {
        let c = cut_cost(g, &p).map_err(|e| fail("graph-core")(&e))?;
        return Ok(Cost::from_integer(c as i64));
    }
    let occ = load_occurrences(objective.motif.as_deref(), g)?;
    let c = motif_cost(&occ, &p).map_err(|e| fail("motif-engine")(&e))?;
    Ok(Cost::from_integer(c as i64))
}

fn parse_sizes(text: &str) -> Result<Vec<usize>, CliError> {
    let text = text.trim();
    if text.is_empty() {
        return Ok(Vec::new());
    }
    text.split(',')
        .map(|s| s.trim().parse::<usize>().map_err(|e| CliError { stage: "oracle", message: format!("bad clique size {s:?}: {e}") }))
        .collect()
}

pub fn execute(cli: Cli) -> Result<i32, CliError> {
    par::init_from_env();
    match cli.command {
        Command::PartitionWorkload { graph, workload, run } => {
            let g = load_graph(&graph)?;
            let w = load_workload(&workload, &g)?;
            let out = partition_workload(&g, &w, run.k, &pipeline_config(&run))?;
            finish_run(&g, &run, "workload", None, &out)
        }
        Command::PartitionMotif { graph, motif, triangle: _, run } => {
            let g = load_graph(&graph)?;
            let occ = load_occurrences(motif.as_deref(), &g)?;
            let out = partition_motif(&g, &occ, run.k, &pipeline_config(&run))?;
            let kind = if motif.is_some() { "motif" } else { "triangle" };
            finish_run(&g, &run, kind, Some(occ.len()), &out)
        }
        Command::Evaluate { graph, partition, objective } => {
            let g = load_graph(&graph)?;
            let text = read(&partition, "graph-core")?;
            println!("{}", evaluate(&g, &text, &objective)?);
            Ok(EXIT_OK)
        }
        Command::Exact { graph, k, objective, out } => {
            let g = load_graph(&graph)?;
            let workload;
            let occ;
            let kind = if let Some(path) = &objective.workload {
                workload = load_workload(path, &g)?;
                CostKind::Workload(&workload)
            } else if objective.cut {
                CostKind::Cut
            } else {
                occ = load_occurrences(objective.motif.as_deref(), &g)?;
                CostKind::Motif(&occ)
            };
            let res = exact_partition(&g, k, kind).map_err(|e| fail("oracle")(&e))?;
            println!("{}", res.cost);
            if let Some(path) = out {
                write_or(Some(&path), &res.to_file(), true)?;
            }
            Ok(EXIT_OK)
        }
        Command::Generate { kind } => {
            let (g, out) = match kind {
                Generate::Reduction { graph, x, out } => {
                    let g = load_graph(&graph)?;
                    (gen_bisection_reduction(&g, x).map_err(|e| fail("oracle")(&e))?.graph, out)
                }
                Generate::Cliques { sizes, out } => (gen_clique_union(&parse_sizes(&sizes)?).map_err(|e| fail("oracle")(&e))?, out),
            };
            write_or(out.as_deref(), &write_edge_list(&g), true)?;
            Ok(EXIT_OK)
        }
    }
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{e}");
            EXIT_INPUT
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_parse() {
        assert_eq!(parse_sizes("3, 3,4").unwrap(), vec![3, 3, 4]);
        assert!(parse_sizes("").unwrap().is_empty());
        assert!(parse_sizes("3,x").is_err());
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run(["balance-forge", "exact", "--graph", "g.txt"]), EXIT_INPUT);
        assert_eq!(run(["balance-forge", "evaluate", "--graph", "g", "--partition", "p", "--cut", "--triangle"]), EXIT_INPUT);
    }
}
