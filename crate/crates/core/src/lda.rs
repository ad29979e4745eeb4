//! Lagrangean decomposition with subgradient multiplier updates.
//!
//! The covering model is linearized with binaries `z`, products `s = z L`,
//! and big-M constraints. The loss is measured relative to `L−` here
//! (`L̃ = L − L−`, `d̃ = d − L−`) so that `M = L+ − L−` bounds every loss
//! value and each big-M constraint is slack when deactivated. With this
//! shift `ν_it = w_i` and `κ_it = w_i / d̃_it`; the objective is unchanged.
//!
//! Relaxing the three coupling constraints splits the problem into an
//! inspection-solvable `(z, s)` part and a location part. The location part
//! is solved either on a grid by exact dynamic programming, or over the
//! continuous box with DCA on its line-of-sight relaxation.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dca::{self, DcaConfig};
use crate::error::{Error, Result};
use crate::geometry::Point3;
use crate::instance::Instance;
use crate::objective::{self, Trajectory};
use crate::oracle::{self, GridSpec};

/// `n × T` multiplier arrays, indexed `[i][t]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Multipliers {
    pub lambda: Vec<Vec<f64>>,
    pub theta: Vec<Vec<f64>>,
    pub delta: Vec<Vec<f64>>,
}

impl Multipliers {
    pub fn filled(n: usize, t_count: usize, value: f64) -> Self {
        let a = vec![vec![value; t_count]; n];
        Multipliers {
            lambda: a.clone(),
            theta: a.clone(),
            delta: a,
        }
    }

    pub fn is_nonnegative(&self) -> bool {
        [&self.lambda, &self.theta, &self.delta]
            .iter()
            .all(|m| m.iter().flatten().all(|&v| v >= 0.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmegaCoeffs {
    pub w1: Vec<Vec<f64>>,
    pub w2: Vec<Vec<f64>>,
    pub w3: Vec<Vec<f64>>,
    pub w4: Vec<Vec<f64>>,
    pub w5: Vec<Vec<f64>>,
}

impl OmegaCoeffs {
    pub fn zeros(n: usize, t_count: usize) -> Self {
        let a = vec![vec![0.0; t_count]; n];
        OmegaCoeffs {
            w1: a.clone(),
            w2: a.clone(),
            w3: a.clone(),
            w4: a.clone(),
            w5: a,
        }
    }
}

/// `L̃(x, y_it) = L(x, y_it) − L−`.
pub fn shifted_loss(instance: &Instance, x: Point3, i: usize, t: usize) -> f64 {
    instance.env.loss(x, instance.users[i][t]) - instance.env.l_lower
}

/// Coefficients of the relaxed objective for given multipliers.
pub fn omega(mult: &Multipliers, instance: &Instance) -> OmegaCoeffs {
    let n = instance.n;
    let t_count = instance.t_count;
    let m = instance.env.big_m();
    let eta = instance.env.params.eta;
    let mut c = OmegaCoeffs::zeros(n, t_count);
    for i in 0..n {
        let w = instance.weights[i];
        for t in 0..t_count {
            let d = instance.mslt[i][t] - instance.env.l_lower;
            let (lam, th, de) = (mult.lambda[i][t], mult.theta[i][t], mult.delta[i][t]);
            let nu = w;
            let kappa = w / d;
            c.w1[i][t] = nu - m * (th + de);
            c.w2[i][t] = -kappa - lam + th;
            c.w3[i][t] = lam - th - de;
            c.w4[i][t] = m * (th + de) + de * d;
            c.w5[i][t] = 10.0 * eta * c.w3[i][t];
        }
    }
    c
}

/// Binary and product variables of the inspection subproblem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct P1Solution {
    pub z: Vec<Vec<u8>>,
    pub s: Vec<Vec<f64>>,
}

/// One cell of the inspection table.
pub fn p1_cell(w1: f64, w2: f64, m: f64) -> (u8, f64) {
    match (w1 >= 0.0, w2 >= 0.0) {
        (true, true) => (1, m),
        (true, false) => (1, 0.0),
        (false, true) => {
            if w1 + m * w2 >= 0.0 {
                (1, m)
            } else {
                (0, 0.0)
            }
        }
        (false, false) => (0, 0.0),
    }
}

pub fn solve_p1(coeffs: &OmegaCoeffs, m: f64) -> P1Solution {
    let z_s: Vec<Vec<(u8, f64)>> = coeffs
        .w1
        .iter()
        .zip(&coeffs.w2)
        .map(|(r1, r2)| r1.iter().zip(r2).map(|(&a, &b)| p1_cell(a, b, m)).collect())
        .collect();
    P1Solution {
        z: z_s.iter().map(|r| r.iter().map(|c| c.0).collect()).collect(),
        s: z_s.iter().map(|r| r.iter().map(|c| c.1).collect()).collect(),
    }
}

/// `−p g(X) + ΣΣ (ω1 z + ω2 s + ω3 L̃(x_t, y_it) + ω4)`.
pub fn lr_objective(traj: &Trajectory, p1: &P1Solution, mult: &Multipliers, instance: &Instance) -> f64 {
    let c = omega(mult, instance);
    lr_value(traj, p1, &c, instance)
}

fn lr_value(traj: &Trajectory, p1: &P1Solution, c: &OmegaCoeffs, instance: &Instance) -> f64 {
    let mut total = -instance.penalty * objective::relocation(traj, instance.x_start, instance.x_end);
    for (t, &x) in traj.points.iter().enumerate() {
        for i in 0..instance.n {
            let l = shifted_loss(instance, x, i, t);
            total += c.w1[i][t] * p1.z[i][t] as f64 + c.w2[i][t] * p1.s[i][t] + c.w3[i][t] * l + c.w4[i][t];
        }
    }
    total
}

/// Constraint residuals `(s − L̃, L̃ − M(1−z) − s, L̃ − d̃ − M(1−z))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub lambda: Vec<Vec<f64>>,
    pub theta: Vec<Vec<f64>>,
    pub delta: Vec<Vec<f64>>,
}

impl Residuals {
    pub fn norm(&self) -> f64 {
        [&self.lambda, &self.theta, &self.delta]
            .iter()
            .flat_map(|m| m.iter().flatten())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }
}

pub fn residuals(traj: &Trajectory, p1: &P1Solution, instance: &Instance) -> Residuals {
    let n = instance.n;
    let t_count = instance.t_count;
    let m = instance.env.big_m();
    let mut r = Residuals {
        lambda: vec![vec![0.0; t_count]; n],
        theta: vec![vec![0.0; t_count]; n],
        delta: vec![vec![0.0; t_count]; n],
    };
    for (t, &x) in traj.points.iter().enumerate() {
        for i in 0..n {
            let l = shifted_loss(instance, x, i, t);
            let z = p1.z[i][t] as f64;
            let s = p1.s[i][t];
            let d = instance.mslt[i][t] - instance.env.l_lower;
            r.lambda[i][t] = s - l;
            r.theta[i][t] = l - m * (1.0 - z) - s;
            r.delta[i][t] = l - d - m * (1.0 - z);
        }
    }
    r
}

/// Moves each multiplier family along its residual by
/// `step / ‖residuals‖`, then clamps at zero. A zero residual is a no-op.
pub fn subgradient_step(mult: &Multipliers, res: &Residuals, step: f64) -> Multipliers {
    let norm = res.norm();
    if norm == 0.0 {
        return mult.clone();
    }
    let scale = step / norm;
    let upd = |m: &Vec<Vec<f64>>, r: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        m.iter()
            .zip(r)
            .map(|(mr, rr)| mr.iter().zip(rr).map(|(&a, &b)| (a + scale * b).max(0.0)).collect())
            .collect()
    };
    Multipliers {
        lambda: upd(&mult.lambda, &res.lambda),
        theta: upd(&mult.theta, &res.theta),
        delta: upd(&mult.delta, &res.delta),
    }
}

/// How the location subproblem is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LdaBackend {
    /// DCA on the line-of-sight relaxation over the continuous box. Each
    /// relaxed value is then a heuristic bound.
    Continuous,
    /// Exact maximization with the full loss over grid trajectories; the
    /// bound is valid for the grid-restricted problem.
    Grid(GridSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LdaConfig {
    pub max_iters: usize,
    /// Initial subgradient step multiplier in `(0, 2]`.
    pub step_init: f64,
    /// Halve the step after this many iterations without a better bound.
    pub halve_after: usize,
    pub dca: DcaConfig,
    /// Relative gap at which the bounds count as closed.
    pub tolerance: f64,
    pub initial_multiplier: f64,
    pub backend: LdaBackend,
    pub time_budget_s: Option<f64>,
}

impl Default for LdaConfig {
    fn default() -> Self {
        LdaConfig {
            max_iters: 1000,
            step_init: 2.0,
            halve_after: 5,
            dca: DcaConfig::default(),
            tolerance: 1e-6,
            initial_multiplier: 0.0,
            backend: LdaBackend::Continuous,
            time_budget_s: None,
        }
    }
}

impl LdaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_init > 0.0 && self.step_init <= 2.0) {
            return Err(Error::invalid("lda.step_init", "must lie in (0, 2]"));
        }
        if self.halve_after == 0 {
            return Err(Error::invalid("lda.halve_after", "must be at least 1"));
        }
        if !(self.tolerance >= 0.0) {
            return Err(Error::invalid("lda.tolerance", "must be non-negative"));
        }
        if !(self.initial_multiplier >= 0.0) {
            return Err(Error::invalid("lda.initial_multiplier", "must be non-negative"));
        }
        if let Some(b) = self.time_budget_s {
            if !(b > 0.0) {
                return Err(Error::invalid("lda.time_budget_s", "must be positive"));
            }
        }
        if let LdaBackend::Grid(g) = self.backend {
            g.validate()?;
        }
        self.dca.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    GapClosed,
    MaxIterations,
    TimeBudget,
    /// All residuals vanished at the current point.
    ZeroSubgradient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    /// Relaxed objective at each iteration's multipliers.
    pub ub_trace: Vec<f64>,
    /// `Ω_D(X_k)` per iteration.
    pub lb_trace: Vec<f64>,
    /// Relative gap of the running best bounds after each iteration.
    pub gap_trace: Vec<f64>,
    pub best_ub: f64,
    pub best_lb: f64,
    pub incumbent: Trajectory,
    pub gap: f64,
    pub iterations: usize,
    pub termination: Termination,
    pub backend: LdaBackend,
    /// Outer DCA objective traces (continuous backend only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dca_traces: Vec<Vec<f64>>,
    pub multipliers: Multipliers,
}

/// `(UB − LB) / |UB|`, guarded against a zero bound.
pub fn relative_gap(ub: f64, lb: f64) -> f64 {
    (ub - lb) / ub.abs().max(1e-12)
}

struct GridData {
    nodes: Vec<Point3>,
    dist: Vec<f64>,
    /// `loss[t][i][j] = L̃(node_j, y_it)`.
    loss: Vec<Vec<Vec<f64>>>,
}

impl GridData {
    fn new(instance: &Instance, grid: GridSpec) -> Result<Self> {
        let nodes = grid.nodes(&instance.q_region);
        let needed = nodes.len() * nodes.len() + nodes.len() * instance.n * instance.t_count;
        if needed > oracle::DEFAULT_MEMORY_BUDGET {
            return Err(Error::Budget(format!("grid backend needs {needed} table entries")));
        }
        let dist = oracle::distance_table(&nodes);
        let loss = (0..instance.t_count)
            .map(|t| {
                (0..instance.n)
                    .map(|i| nodes.iter().map(|&x| shifted_loss(instance, x, i, t)).collect())
                    .collect()
            })
            .collect();
        Ok(GridData { nodes, dist, loss })
    }

    /// Exact maximizer of `−p g + ΣΣ ω3 L̃` over grid trajectories.
    fn solve(&self, c: &OmegaCoeffs, instance: &Instance) -> Trajectory {
        let scores: Vec<Vec<f64>> = (0..instance.t_count)
            .map(|t| {
                (0..self.nodes.len())
                    .map(|j| (0..instance.n).map(|i| c.w3[i][t] * self.loss[t][i][j]).sum())
                    .collect()
            })
            .collect();
        let (_, path, _) = oracle::best_path(
            &scores,
            &self.nodes,
            &self.dist,
            instance.penalty,
            instance.x_start,
            instance.x_end,
            false,
        );
        Trajectory::new(path.into_iter().map(|j| self.nodes[j]).collect())
    }
}

pub fn run_lda(instance: &Instance, config: &LdaConfig) -> Result<SolveReport> {
    run_lda_warm(instance, config, None)
}

/// As [`run_lda`], with an optional extra starting trajectory considered in
/// the first iteration next to the default start.
pub fn run_lda_warm(instance: &Instance, config: &LdaConfig, x_init: Option<&Trajectory>) -> Result<SolveReport> {
    config.validate()?;
    if let Some(x) = x_init {
        x.validate(&instance.q_region, instance.t_count)?;
    }
    let clock = Instant::now();
    let m = instance.env.big_m();
    let grid = match config.backend {
        LdaBackend::Grid(g) => Some(GridData::new(instance, g)?),
        LdaBackend::Continuous => None,
    };
    let default_start = instance.stationary_trajectory();
    let mut mult = Multipliers::filled(instance.n, instance.t_count, config.initial_multiplier);
    let mut x_prev = default_start.clone();
    let mut pi = config.step_init;
    let mut stall = 0usize;

    let mut ub_trace = Vec::new();
    let mut lb_trace = Vec::new();
    let mut gap_trace = Vec::new();
    let mut dca_traces = Vec::new();
    let mut best_ub = f64::INFINITY;
    let mut best_lb = f64::NEG_INFINITY;
    let mut incumbent = default_start.clone();
    let mut termination = Termination::MaxIterations;
    let mut iterations = 0;

    for k in 0..config.max_iters {
        if let Some(budget) = config.time_budget_s {
            if k > 0 && clock.elapsed().as_secs_f64() > budget {
                termination = Termination::TimeBudget;
                break;
            }
        }
        iterations = k + 1;
        let c = omega(&mult, instance);
        let p1 = solve_p1(&c, m);

        // Candidates whose true objective feeds the lower bound.
        let mut candidates: Vec<Trajectory> = Vec::new();
        let x_k = match &grid {
            Some(g) => {
                if k == 0 {
                    candidates.push(default_start.clone());
                    candidates.extend(x_init.cloned());
                }
                g.solve(&c, instance)
            }
            None => {
                let mut starts = vec![x_prev.clone()];
                if k == 0 {
                    if let Some(w) = x_init {
                        starts.push(w.clone());
                    }
                }
                let mut best: Option<(f64, Trajectory)> = None;
                for start in &starts {
                    let out = dca::solve_p2_traced(&c, instance, &config.dca, start)?;
                    let relaxed = *out.trace.last().expect("trace has the start value");
                    dca_traces.push(out.trace);
                    if k == 0 {
                        candidates.push(start.clone());
                        candidates.push(out.trajectory.clone());
                    }
                    if best.as_ref().is_none_or(|b| relaxed > b.0) {
                        best = Some((relaxed, out.trajectory));
                    }
                }
                best.expect("at least one start").1
            }
        };
        candidates.insert(0, x_k.clone());

        let lr = lr_value(&x_k, &p1, &c, instance);
        ub_trace.push(lr);
        if lr < best_ub - 1e-12 * lr.abs().max(1.0) {
            stall = 0;
        } else {
            stall += 1;
        }
        best_ub = best_ub.min(lr);

        let mut lb_k = f64::NEG_INFINITY;
        for cand in &candidates {
            let v = objective::objective_value(cand, instance);
            if v > lb_k {
                lb_k = v;
            }
            if v > best_lb {
                best_lb = v;
                incumbent = cand.clone();
            }
        }
        lb_trace.push(lb_k);
        gap_trace.push(relative_gap(best_ub, best_lb));

        if best_ub - best_lb <= config.tolerance * best_ub.abs().max(1.0) {
            termination = Termination::GapClosed;
            break;
        }
        if stall >= config.halve_after {
            pi *= 0.5;
            stall = 0;
        }
        let res = residuals(&x_k, &p1, instance);
        let norm = res.norm();
        if norm == 0.0 {
            termination = Termination::ZeroSubgradient;
            break;
        }
        let target = if best_lb.is_finite() { best_lb } else { 0.0 };
        let step = pi * (lr - target).max(0.0) / norm;
        mult = subgradient_step(&mult, &res, step);
        x_prev = x_k;
    }

    Ok(SolveReport {
        gap: relative_gap(best_ub, best_lb),
        ub_trace,
        lb_trace,
        gap_trace,
        best_ub,
        best_lb,
        incumbent,
        iterations,
        termination,
        backend: config.backend,
        dca_traces,
        multipliers: mult,
    })
}
