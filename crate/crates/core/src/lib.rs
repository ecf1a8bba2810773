//! Balanced k-partitioning that optimizes workload communication cost or
//! motif preservation through vector-program relaxations, lazy constraint
//! separation and randomized threshold rounding, with an exact brute-force
//! oracle for small instances.

pub mod cli;
pub mod graph;
pub mod motif;
pub mod oracle;
pub mod par;
pub mod pipeline;
pub mod relaxation;
pub mod rounding;
pub mod workload;

/// Exact costs are rationals: workload costs divide by total job frequency.
pub type Cost = num_rational::Ratio<i64>;
