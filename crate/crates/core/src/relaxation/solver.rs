//! Low-rank augmented-Lagrangian solver for the vector programs.
//!
//! The node vectors themselves are the variables. The inner loop runs
//! limited-memory BFGS on the Powell-Hestenes-Rockafellar augmented
//! Lagrangian. The outer loop separates violated spreading sets and triangle
//! triples into a working set, updates multipliers, grows the penalty when
//! the working set stays violated, and retires cuts that stay slack. A final
//! rescaling restores the spreading and link families exactly; the triangle
//! family is scale invariant.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::separation::{feasibility_with, pairwise_sq_distances, spreading_rescale, spreading_scan, triangle_search};
use super::{FeasibilityReport, Objective, RelaxationError, TriangleScan, VectorProgram, VectorSolution};
use crate::par;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Embedding dimension; `None` picks [`default_dimension`](super::default_dimension).
    pub dim: Option<usize>,
    pub max_outer_iters: usize,
    pub max_inner_iters: usize,
    pub initial_penalty: f64,
    pub penalty_growth: f64,
    pub feas_tol: f64,
    pub obj_tol: f64,
    pub seed: u64,
    /// Independent random starts; the best feasible one wins.
    pub restarts: usize,
    pub triangle_scan: TriangleScan,
    /// Triangle triples added to the working set per outer iteration.
    pub triangle_budget: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            dim: None,
            max_outer_iters: 60,
            max_inner_iters: 4000,
            initial_penalty: 1.0,
            penalty_growth: 4.0,
            feas_tol: 1e-6,
            obj_tol: 1e-8,
            seed: 0,
            restarts: 2,
            triangle_scan: TriangleScan::Auto,
            triangle_budget: 2000,
        }
    }
}

impl SolverConfig {
    fn validate(&self, prog: &VectorProgram) -> Result<usize, RelaxationError> {
        let bad = |msg: &str| Err(RelaxationError::BadConfig(msg.to_string()));
        if !(self.feas_tol > 0.0 && self.obj_tol > 0.0) {
            return bad("tolerances must be positive");
        }
        if !(self.penalty_growth > 1.0 && self.initial_penalty > 0.0) {
            return bad("penalty must be positive and grow by a factor above 1");
        }
        if self.restarts == 0 || self.max_outer_iters == 0 {
            return bad("restarts and outer iterations must be at least 1");
        }
        let m = self.dim.unwrap_or_else(|| prog.default_dimension());
        let needed = prog.k().min(prog.n()).max(1);
        if m < needed {
            return Err(RelaxationError::DimensionTooSmall { m, needed });
        }
        Ok(m)
    }
}

/// Result of [`solve`]. `converged` is false when the budget ran out with a
/// violation above `feas_tol`; the best iterate is still returned.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub solution: VectorSolution,
    pub report: FeasibilityReport,
    pub converged: bool,
    pub outer_iterations: usize,
    /// Index of the winning restart.
    pub restart: usize,
}

/// Approximately solves `prog`. Deterministic for a given `cfg.seed`.
pub fn solve(prog: &VectorProgram, cfg: &SolverConfig) -> Result<SolveOutcome, RelaxationError> {
    let m = cfg.validate(prog)?;
    let n = prog.n();
    if n <= 1 {
        let sol = VectorSolution::new(m, vec![0.0; n * m], vec![0.0; prog.aux()]).with_objective(prog);
        let report = feasibility_with(prog, &sol, cfg.triangle_scan);
        return Ok(SolveOutcome { solution: sol, report, converged: true, outer_iterations: 0, restart: 0 });
    }
    let runs = par::map_range(0..cfg.restarts, |r| {
        let seed = cfg.seed.wrapping_add((r as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        Lagrangian::new(prog, m, cfg).run(seed, r)
    });
    let best = runs
        .into_iter()
        .min_by(|a, b| {
            (!a.converged).cmp(&!b.converged).then(a.solution.objective.total_cmp(&b.solution.objective)).then(a.restart.cmp(&b.restart))
        })
        .expect("at least one restart");
    Ok(best)
}

/// Outer iterations a cut may stay inactive before leaving the working set.
const IDLE_LIMIT: u32 = 3;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Key {
    Spread(usize, Vec<usize>),
    Tri(usize, usize, usize),
}

#[derive(Debug, Clone)]
enum Constraint {
    /// `sum_{v in members} |x_u - x_v|^2 / 2 - rhs >= 0`
    Spread { u: usize, members: Vec<usize>, rhs: f64 },
    /// `|a - b|^2 + |b - c|^2 - |a - c|^2 >= 0`
    Tri { a: usize, b: usize, c: usize },
    /// `t_h - |a - b|^2 / 2 >= 0`
    Link { h: usize, a: usize, b: usize },
}

struct Lagrangian<'a> {
    prog: &'a VectorProgram,
    cfg: &'a SolverConfig,
    n: usize,
    m: usize,
    bound: f64,
    cons: Vec<Constraint>,
    lambda: Vec<f64>,
    /// Consecutive outer iterations each row has been inactive.
    idle: Vec<u32>,
    keys: HashSet<Key>,
    rho: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(y, x)| *y += a * x);
}

fn sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl<'a> Lagrangian<'a> {
    fn new(prog: &'a VectorProgram, m: usize, cfg: &'a SolverConfig) -> Self {
        let mut cons = Vec::new();
        if let Objective::Motif(links) = prog.objective() {
            for (h, es) in links.iter().enumerate() {
                cons.extend(es.iter().map(|&(a, b)| Constraint::Link { h, a, b }));
            }
        }
        let lambda = vec![0.0; cons.len()];
        Lagrangian {
            prog,
            cfg,
            n: prog.n(),
            m,
            bound: prog.spread_bound(),
            cons,
            idle: vec![0; lambda.len()],
            lambda,
            keys: HashSet::new(),
            rho: cfg.initial_penalty,
        }
    }

    fn nv(&self) -> usize {
        self.n * self.m
    }

    fn vec_of<'x>(&self, x: &'x [f64], i: usize) -> &'x [f64] {
        &x[i * self.m..(i + 1) * self.m]
    }

    fn value(&self, c: &Constraint, x: &[f64]) -> f64 {
        match c {
            Constraint::Spread { u, members, rhs } => {
                let xu = self.vec_of(x, *u);
                members.iter().map(|&v| 0.5 * sq(xu, self.vec_of(x, v))).sum::<f64>() - rhs
            }
            Constraint::Tri { a, b, c } => {
                let (xa, xb, xc) = (self.vec_of(x, *a), self.vec_of(x, *b), self.vec_of(x, *c));
                sq(xa, xb) + sq(xb, xc) - sq(xa, xc)
            }
            Constraint::Link { h, a, b } => x[self.nv() + h] - 0.5 * sq(self.vec_of(x, *a), self.vec_of(x, *b)),
        }
    }

    fn objective(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let m = self.m;
        match self.prog.objective() {
            Objective::Workload(terms) => {
                let mut val = 0.0;
                for &(i, j, w) in terms {
                    let mut d2 = 0.0;
                    for d in 0..m {
                        let diff = x[i * m + d] - x[j * m + d];
                        d2 += diff * diff;
                        grad[i * m + d] += w * diff;
                        grad[j * m + d] -= w * diff;
                    }
                    val += 0.5 * w * d2;
                }
                val
            }
            Objective::Motif(_) => {
                let nv = self.nv();
                for g in &mut grad[nv..] {
                    *g += 1.0;
                }
                x[nv..].iter().sum()
            }
        }
    }

    /// Value of `c` given the full squared-distance matrix `d`.
    fn value_d(&self, c: &Constraint, d: &[f64], x: &[f64]) -> f64 {
        let n = self.n;
        match c {
            Constraint::Spread { u, members, rhs } => members.iter().map(|&v| 0.5 * d[u * n + v]).sum::<f64>() - rhs,
            Constraint::Tri { a, b, c } => d[a * n + b] + d[b * n + c] - d[a * n + c],
            Constraint::Link { h, a, b } => x[self.nv() + h] - 0.5 * d[a * n + b],
        }
    }

    /// Augmented Lagrangian value; writes its gradient into `grad`.
    ///
    /// Every term depends on the node vectors only through squared distances,
    /// so the terms first accumulate a coefficient per pair and the node
    /// gradient is assembled once: `d/dx_u = sum_v 2 P_uv (x_u - x_v)`.
    fn eval(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let (n, m, nv) = (self.n, self.m, self.nv());
        let mut d = vec![0.0; n * n];
        for u in 0..n {
            for v in u + 1..n {
                let dist = sq(self.vec_of(x, u), self.vec_of(x, v));
                d[u * n + v] = dist;
                d[v * n + u] = dist;
            }
        }
        let mut p = vec![0.0; n * n];
        grad.fill(0.0);
        let mut val = match self.prog.objective() {
            Objective::Workload(terms) => {
                let mut val = 0.0;
                for &(i, j, w) in terms {
                    val += 0.5 * w * d[i * n + j];
                    p[i * n + j] += 0.5 * w;
                }
                val
            }
            Objective::Motif(_) => {
                grad[nv..].iter_mut().for_each(|g| *g = 1.0);
                x[nv..].iter().sum()
            }
        };
        let rho = self.rho;
        for (c, &lam) in self.cons.iter().zip(&self.lambda) {
            let g = self.value_d(c, &d, x);
            let s = lam - rho * g;
            if s <= 0.0 {
                val -= lam * lam / (2.0 * rho);
                continue;
            }
            val += (s * s - lam * lam) / (2.0 * rho);
            match c {
                Constraint::Spread { u, members, .. } => {
                    for &v in members {
                        p[u * n + v] -= 0.5 * s;
                    }
                }
                Constraint::Tri { a, b, c } => {
                    p[a * n + b] -= s;
                    p[b * n + c] -= s;
                    p[a * n + c] += s;
                }
                Constraint::Link { h, a, b } => {
                    grad[nv + h] -= s;
                    p[a * n + b] += 0.5 * s;
                }
            }
        }
        for u in 0..n {
            for v in u + 1..n {
                let coef = 2.0 * (p[u * n + v] + p[v * n + u]);
                if coef == 0.0 {
                    continue;
                }
                for k in 0..m {
                    let diff = coef * (x[u * m + k] - x[v * m + k]);
                    grad[u * m + k] += diff;
                    grad[v * m + k] -= diff;
                }
            }
        }
        val
    }

    /// Limited-memory BFGS on the current augmented Lagrangian. Auxiliary
    /// norms need no projection: the link rows already keep them
    /// non-negative at any stationary point.
    fn inner(&self, x: &mut Vec<f64>, tol: f64) {
        const MEMORY: usize = 10;
        let len = x.len();
        let mut grad = vec![0.0; len];
        let mut val = self.eval(x, &mut grad);
        let mut pairs: std::collections::VecDeque<(Vec<f64>, Vec<f64>, f64)> = std::collections::VecDeque::new();
        let mut dir = vec![0.0; len];
        let mut trial = vec![0.0; len];
        let mut tgrad = vec![0.0; len];
        let mut alphas = [0.0; MEMORY];
        for _ in 0..self.cfg.max_inner_iters {
            if grad.iter().fold(0.0f64, |a, g| a.max(g.abs())) <= tol {
                return;
            }
            // two-loop recursion
            dir.iter_mut().zip(&grad).for_each(|(d, g)| *d = -g);
            for (i, (s, y, rho)) in pairs.iter().enumerate().rev() {
                let a = rho * dot(s, &dir);
                alphas[i] = a;
                axpy(-a, y, &mut dir);
            }
            let gamma = pairs
                .back()
                .map_or_else(|| 1.0 / grad.iter().fold(0.0f64, |a, g| a.max(g.abs())).max(1.0), |(s, y, _)| dot(s, y) / dot(y, y));
            dir.iter_mut().for_each(|d| *d *= gamma);
            for (i, (s, y, rho)) in pairs.iter().enumerate() {
                let b = rho * dot(y, &dir);
                axpy(alphas[i] - b, s, &mut dir);
            }
            let mut slope = dot(&grad, &dir);
            if slope >= 0.0 {
                // not a descent direction: reset to steepest descent
                pairs.clear();
                let scale = 1.0 / grad.iter().fold(0.0f64, |a, g| a.max(g.abs())).max(1.0);
                dir.iter_mut().zip(&grad).for_each(|(d, g)| *d = -scale * g);
                slope = dot(&grad, &dir);
            }
            let mut step = 1.0;
            let mut tval;
            loop {
                for i in 0..len {
                    trial[i] = x[i] + step * dir[i];
                }
                tval = self.eval(&trial, &mut tgrad);
                if tval <= val + 1e-4 * step * slope || step < 1e-9 {
                    break;
                }
                let denom = 2.0 * (tval - val - step * slope);
                let next = if denom > 0.0 { -slope * step * step / denom } else { 0.5 * step };
                step = next.clamp(0.1 * step, 0.5 * step);
            }
            if step < 1e-9 {
                // no usable progress at this precision: retry once from
                // steepest descent, then give up on this subproblem
                if pairs.is_empty() {
                    return;
                }
                pairs.clear();
                continue;
            }
            let s: Vec<f64> = trial.iter().zip(x.iter()).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = tgrad.iter().zip(&grad).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &y);
            if sy > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() && sy > 0.0 {
                if pairs.len() == MEMORY {
                    pairs.pop_front();
                }
                pairs.push_back((s, y, 1.0 / sy));
            }
            std::mem::swap(x, &mut trial);
            std::mem::swap(&mut grad, &mut tgrad);
            val = tval;
        }
    }

    /// Adds violated spreading sets and triangle triples; returns the largest
    /// violation over the full families.
    fn separate(&mut self, x: &[f64]) -> f64 {
        let n = self.n;
        let sol = VectorSolution::new(self.m, x[..self.nv()].to_vec(), Vec::new());
        let dist = pairwise_sq_distances(&sol);
        let bound = self.bound;
        let spread = par::map_range(0..n, |u| spreading_scan(&dist[u * n..(u + 1) * n], u, bound));
        let mut worst: f64 = 0.0;
        for v in spread.into_iter().flatten() {
            worst = worst.max(v.magnitude);
            let mut members = v.members;
            members.sort_unstable();
            let key = Key::Spread(v.u, members.clone());
            if self.keys.insert(key) {
                let rhs = v.size as f64 - bound;
                self.cons.push(Constraint::Spread { u: v.u, members, rhs });
                self.lambda.push(0.0);
                self.idle.push(0);
            }
        }
        let tris = triangle_search(&dist, n, self.cfg.triangle_budget, 0.0, self.cfg.triangle_scan);
        if let Some(t) = tris.first() {
            worst = worst.max(t.magnitude);
        }
        for t in tris {
            if self.keys.insert(Key::Tri(t.a, t.mid, t.c)) {
                self.cons.push(Constraint::Tri { a: t.a, b: t.mid, c: t.c });
                self.lambda.push(0.0);
                self.idle.push(0);
            }
        }
        for c in &self.cons {
            if let Constraint::Link { .. } = c {
                worst = worst.max(-self.value(c, x));
            }
        }
        worst
    }

    fn update_multipliers(&mut self, x: &[f64]) {
        let rho = self.rho;
        let values: Vec<f64> = self.cons.iter().map(|c| self.value(c, x)).collect();
        for (lam, g) in self.lambda.iter_mut().zip(&values) {
            *lam = (*lam - rho * g).max(0.0);
        }
        // drop cuts that have been inactive and comfortably satisfied for a while
        let mut keep = Vec::with_capacity(self.cons.len());
        for (i, c) in self.cons.iter().enumerate() {
            let inactive = !matches!(c, Constraint::Link { .. }) && self.lambda[i] == 0.0 && values[i] > 0.1;
            self.idle[i] = if inactive { self.idle[i] + 1 } else { 0 };
            keep.push(self.idle[i] < IDLE_LIMIT);
        }
        if keep.iter().all(|&k| k) {
            return;
        }
        let mut rows = keep.iter();
        let keys = &mut self.keys;
        self.cons.retain(|c| {
            let k = *rows.next().expect("one flag per row");
            if !k {
                match c {
                    Constraint::Spread { u, members, .. } => {
                        keys.remove(&Key::Spread(*u, members.clone()));
                    }
                    Constraint::Tri { a, b, c } => {
                        keys.remove(&Key::Tri(*a, *b, *c));
                    }
                    Constraint::Link { .. } => {}
                }
            }
            k
        });
        let mut rows = keep.iter();
        self.lambda.retain(|_| *rows.next().expect("one flag per row"));
        let mut rows = keep.iter();
        self.idle.retain(|_| *rows.next().expect("one flag per row"));
    }

    /// Largest `lambda * slack` over the working set.
    fn complementarity(&self, x: &[f64]) -> f64 {
        self.cons.iter().zip(&self.lambda).map(|(c, &lam)| lam * self.value(c, x).max(0.0)).fold(0.0, f64::max)
    }

    /// A random balanced assignment mapped to basis vectors, plus a little
    /// Gaussian noise: close to feasible, and different for every seed.
    fn initial_point(&self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (n, m) = (self.n, self.m);
        let k = self.prog.k().min(n).max(1);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let group = n.div_ceil(k);
        let sigma = 0.1 / (m as f64).sqrt();
        let mut x: Vec<f64> = (0..self.nv())
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                sigma * z
            })
            .collect();
        for (pos, &v) in order.iter().enumerate() {
            x[v * m + (pos / group) % m] += 1.0;
        }
        let aux = self.prog.aux();
        x.extend(std::iter::repeat_n(0.0, aux));
        for c in &self.cons {
            if let Constraint::Link { h, a, b } = *c {
                let need = 0.5 * sq(self.vec_of(&x, a), self.vec_of(&x, b));
                let slot = self.nv() + h;
                x[slot] = x[slot].max(need);
            }
        }
        x
    }

    fn run(mut self, seed: u64, restart: usize) -> SolveOutcome {
        let mut x = self.initial_point(seed);
        self.separate(&x);
        let mut prev_viol = f64::INFINITY;
        let mut prev_obj = f64::INFINITY;
        let mut outer = 0;
        let mut scratch = vec![0.0; x.len()];
        // Lowest-objective finished iterate that passed the full check.
        let mut best: Option<(VectorSolution, FeasibilityReport)> = None;
        while outer < self.cfg.max_outer_iters {
            outer += 1;
            let tol = (1e-2 * 0.3f64.powi(outer as i32 - 1)).max(1e-9);
            self.inner(&mut x, tol);
            let ws_viol = self.cons.iter().map(|c| -self.value(c, &x)).fold(0.0, f64::max);
            let viol = self.separate(&x);
            self.update_multipliers(&x);
            scratch.fill(0.0);
            let obj = self.objective(&x, &mut scratch);
            if viol <= 1e-3 {
                // Spreading and link slack is repaired exactly by `finish`, so
                // judge the finished point rather than the raw iterate.
                let sol = self.finish(x.clone());
                let report = feasibility_with(self.prog, &sol, self.cfg.triangle_scan);
                if report.max_violation() <= self.cfg.feas_tol {
                    let scale = obj.abs().max(1.0);
                    let stable = (obj - prev_obj).abs() <= self.cfg.obj_tol.max(0.1 * self.cfg.feas_tol) * scale;
                    let tight = self.complementarity(&x) <= self.cfg.feas_tol * scale;
                    if best.as_ref().is_none_or(|(b, _)| sol.objective < b.objective) {
                        best = Some((sol, report));
                    }
                    if stable && tight {
                        break;
                    }
                }
            }
            if ws_viol > 0.25 * prev_viol {
                self.rho = (self.rho * self.cfg.penalty_growth).min(1e9);
            }
            prev_viol = ws_viol;
            prev_obj = obj;
        }
        let (solution, report, converged) = match best {
            Some((sol, report)) => (sol, report, true),
            None => {
                let sol = self.finish(x);
                let report = feasibility_with(self.prog, &sol, self.cfg.triangle_scan);
                let ok = report.max_violation() <= self.cfg.feas_tol;
                (sol, report, ok)
            }
        };
        SolveOutcome { solution, report, converged, outer_iterations: outer, restart }
    }

    /// Centers the vectors, rescales to satisfy spreading exactly and lifts
    /// auxiliary norms onto their link bounds.
    fn finish(&self, x: Vec<f64>) -> VectorSolution {
        let (n, m) = (self.n, self.m);
        let mut coords = x[..self.nv()].to_vec();
        let mut aux: Vec<f64> = x[self.nv()..].iter().map(|t| t.max(0.0)).collect();
        for d in 0..m {
            let mean = (0..n).map(|i| coords[i * m + d]).sum::<f64>() / n as f64;
            for i in 0..n {
                coords[i * m + d] -= mean;
            }
        }
        let sol = VectorSolution::new(m, coords.clone(), Vec::new());
        let dist = pairwise_sq_distances(&sol);
        if let Some(s2) = spreading_rescale(&dist, n, self.bound) {
            if s2 > 1.0 {
                let s2 = s2 * (1.0 + 1e-12);
                let s = s2.sqrt();
                coords.iter_mut().for_each(|c| *c *= s);
                aux.iter_mut().for_each(|t| *t *= s2);
            }
        }
        let mut sol = VectorSolution::new(m, coords, aux);
        if let Objective::Motif(links) = self.prog.objective() {
            for (h, es) in links.iter().enumerate() {
                let need = es.iter().map(|&(a, b)| 0.5 * sol.sq_dist(a, b)).fold(0.0, f64::max);
                if sol.aux_norms[h] < need {
                    sol.aux_norms[h] = need;
                }
            }
        }
        sol.with_objective(self.prog)
    }
}
