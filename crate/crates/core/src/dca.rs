//! DC programming for the relaxed location subproblem
//! `max −p g(X) + Σ_t Σ_i ω5_it log10 ‖x_t − y_it‖` over the flight box.
//!
//! Terms with `ω5 < 0` form the convex part and are linearized at the
//! current iterate; the rest is maximized by projected gradient ascent.
//! A log of a Euclidean norm is not concave in three dimensions, so every
//! outer step is safeguarded against a decrease of the true objective.

use std::f64::consts::LN_10;

use serde::{Deserialize, Serialize};

use crate::channel::DISTANCE_FLOOR;
use crate::error::{Error, Result};
use crate::geometry::{Box3, Point3};
use crate::instance::Instance;
use crate::lda::OmegaCoeffs;
use crate::objective::{self, Trajectory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DcaConfig {
    pub max_iters: usize,
    /// Outer loop stops once the objective gains less than
    /// `tolerance · (1 + |objective|)`.
    pub tolerance: f64,
    pub inner_max_steps: usize,
    pub armijo: f64,
    /// First trial step (m per unit gradient) of the inner ascent.
    pub initial_step: f64,
    pub distance_floor: f64,
}

impl Default for DcaConfig {
    fn default() -> Self {
        DcaConfig {
            max_iters: 50,
            tolerance: 1e-7,
            inner_max_steps: 200,
            armijo: 1e-4,
            initial_step: 100.0,
            distance_floor: DISTANCE_FLOOR,
        }
    }
}

impl DcaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::invalid("dca.max_iters", "must be at least 1"));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::invalid("dca.tolerance", "must be positive"));
        }
        if !(self.initial_step > 0.0) {
            return Err(Error::invalid("dca.initial_step", "must be positive"));
        }
        Ok(())
    }
}

/// `I_t⁺ = {i : ω5_it ≥ 0}` and `I_t⁻ = {i : ω5_it < 0}` per interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DcSplit {
    pub plus_sets: Vec<Vec<usize>>,
    pub minus_sets: Vec<Vec<usize>>,
}

pub fn split(coeffs: &OmegaCoeffs) -> DcSplit {
    let n = coeffs.w5.len();
    let t_count = coeffs.w5.first().map_or(0, Vec::len);
    let mut plus_sets = vec![Vec::new(); t_count];
    let mut minus_sets = vec![Vec::new(); t_count];
    for t in 0..t_count {
        for i in 0..n {
            if coeffs.w5[i][t] >= 0.0 {
                plus_sets[t].push(i);
            } else {
                minus_sets[t].push(i);
            }
        }
    }
    DcSplit { plus_sets, minus_sets }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DcaOutcome {
    pub trajectory: Trajectory,
    /// Relaxed objective at the start and after every outer iteration.
    pub trace: Vec<f64>,
    pub iterations: usize,
}

fn check_floor(traj: &Trajectory, instance: &Instance, floor: f64) -> Result<()> {
    for (t, x) in traj.points.iter().enumerate() {
        for i in 0..instance.n {
            let distance = x.distance_to_user(instance.users[i][t]);
            if !(distance >= floor) {
                return Err(Error::CoincidentPoints { distance, floor });
            }
        }
    }
    Ok(())
}

/// Relaxed objective with the constant term dropped.
pub fn p2_objective(traj: &Trajectory, coeffs: &OmegaCoeffs, instance: &Instance) -> Result<f64> {
    check_floor(traj, instance, DISTANCE_FLOOR)?;
    Ok(p2_value(&traj.points, coeffs, instance, Part::All))
}

/// Gradient of [`p2_objective`] with respect to every `x_t`.
pub fn p2_gradient(traj: &Trajectory, coeffs: &OmegaCoeffs, instance: &Instance) -> Result<Vec<[f64; 3]>> {
    check_floor(traj, instance, DISTANCE_FLOOR)?;
    let mut g = vec![[0.0; 3]; traj.len()];
    add_log_gradient(&traj.points, coeffs, instance, Part::All, &mut g);
    add_relocation_gradient(&traj.points, instance, &mut g);
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Part {
    All,
    /// `−p g` plus the `ω5 ≥ 0` logs.
    Concave,
}

fn includes(part: Part, w: f64) -> bool {
    match part {
        Part::All => true,
        Part::Concave => w >= 0.0,
    }
}

fn p2_value(points: &[Point3], coeffs: &OmegaCoeffs, instance: &Instance, part: Part) -> f64 {
    let traj = Trajectory::new(points.to_vec());
    let mut total = -instance.penalty * objective::relocation(&traj, instance.x_start, instance.x_end);
    for (t, x) in points.iter().enumerate() {
        for i in 0..instance.n {
            let w = coeffs.w5[i][t];
            if w != 0.0 && includes(part, w) {
                total += w * x.distance_to_user(instance.users[i][t]).log10();
            }
        }
    }
    total
}

fn add_log_gradient(points: &[Point3], coeffs: &OmegaCoeffs, instance: &Instance, part: Part, g: &mut [[f64; 3]]) {
    for (t, x) in points.iter().enumerate() {
        for i in 0..instance.n {
            let w = coeffs.w5[i][t];
            if w == 0.0 || !includes(part, w) {
                continue;
            }
            let u = instance.users[i][t];
            let r = [x.x - u.x, x.y - u.y, x.z];
            let d2 = r[0] * r[0] + r[1] * r[1] + r[2] * r[2];
            let c = w / (LN_10 * d2);
            for k in 0..3 {
                g[t][k] += c * r[k];
            }
        }
    }
}

fn add_minus_gradient(points: &[Point3], coeffs: &OmegaCoeffs, instance: &Instance, g: &mut [[f64; 3]]) {
    let mut neg = coeffs.clone();
    for row in neg.w5.iter_mut() {
        for w in row.iter_mut() {
            if *w >= 0.0 {
                *w = 0.0;
            }
        }
    }
    add_log_gradient(points, &neg, instance, Part::All, g);
}

/// Subgradient of `−p g(X)`; a zero-length hop contributes nothing.
fn add_relocation_gradient(points: &[Point3], instance: &Instance, g: &mut [[f64; 3]]) {
    let p = instance.penalty;
    if p == 0.0 {
        return;
    }
    let t_count = points.len();
    for t in 0..t_count {
        let prev = if t == 0 { instance.x_start } else { points[t - 1] };
        let next = if t + 1 == t_count { instance.x_end } else { points[t + 1] };
        for other in [prev, next] {
            let v = points[t].sub(other);
            let len = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            if len > 1e-12 {
                for k in 0..3 {
                    g[t][k] -= p * v[k] / len;
                }
            }
        }
    }
}

fn project_all(q: &Box3, points: &mut [Point3]) {
    for p in points.iter_mut() {
        *p = q.project(*p);
    }
}

fn dot(g: &[[f64; 3]], a: &[Point3], b: &[Point3]) -> f64 {
    g.iter()
        .zip(a.iter().zip(b))
        .map(|(g, (a, b))| g[0] * (b.x - a.x) + g[1] * (b.y - a.y) + g[2] * (b.z - a.z))
        .sum()
}

/// Maximizes `concave(Y) + lin · Y` from `start` by projected gradient
/// ascent with Armijo backtracking.
fn inner_ascent(
    start: &[Point3],
    lin: &[[f64; 3]],
    coeffs: &OmegaCoeffs,
    instance: &Instance,
    config: &DcaConfig,
) -> Vec<Point3> {
    let q = &instance.q_region;
    let surrogate = |pts: &[Point3]| {
        let lin_term: f64 = pts
            .iter()
            .zip(lin)
            .map(|(p, l)| l[0] * p.x + l[1] * p.y + l[2] * p.z)
            .sum();
        p2_value(pts, coeffs, instance, Part::Concave) + lin_term
    };
    let mut y = start.to_vec();
    let mut value = surrogate(&y);
    let mut step = config.initial_step;
    for _ in 0..config.inner_max_steps {
        let mut g = lin.to_vec();
        add_log_gradient(&y, coeffs, instance, Part::Concave, &mut g);
        add_relocation_gradient(&y, instance, &mut g);
        let mut accepted = false;
        for _ in 0..60 {
            let mut cand: Vec<Point3> = y
                .iter()
                .zip(&g)
                .map(|(p, g)| Point3::new(p.x + step * g[0], p.y + step * g[1], p.z + step * g[2]))
                .collect();
            project_all(q, &mut cand);
            let ascent = dot(&g, &y, &cand);
            if ascent <= 0.0 {
                // Projected direction vanished: stationary on the box.
                return y;
            }
            let cv = surrogate(&cand);
            if cv >= value + config.armijo * ascent {
                y = cand;
                value = cv;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        step = (step * 2.0).min(config.initial_step * 1e3);
    }
    y
}

pub fn solve_p2(coeffs: &OmegaCoeffs, instance: &Instance, config: &DcaConfig, x_init: &Trajectory) -> Result<Trajectory> {
    Ok(solve_p2_traced(coeffs, instance, config, x_init)?.trajectory)
}

pub fn solve_p2_traced(
    coeffs: &OmegaCoeffs,
    instance: &Instance,
    config: &DcaConfig,
    x_init: &Trajectory,
) -> Result<DcaOutcome> {
    config.validate()?;
    if x_init.len() != instance.t_count {
        return Err(Error::invalid(
            "x_init",
            format!("expected {} points, found {}", instance.t_count, x_init.len()),
        ));
    }
    let q = &instance.q_region;
    let mut x = x_init.points.clone();
    project_all(q, &mut x);
    // A UAV on a user's position is only possible with a zero floor; lift it.
    for (t, p) in x.iter_mut().enumerate() {
        for i in 0..instance.n {
            if p.distance_to_user(instance.users[i][t]) < config.distance_floor {
                p.z = (p.z + config.distance_floor).min(q.h_max.max(config.distance_floor));
            }
        }
    }
    let mut obj = p2_value(&x, coeffs, instance, Part::All);
    let mut trace = vec![obj];
    let mut iterations = 0;
    for _ in 0..config.max_iters {
        iterations += 1;
        let mut lin = vec![[0.0; 3]; x.len()];
        add_minus_gradient(&x, coeffs, instance, &mut lin);
        let y = inner_ascent(&x, &lin, coeffs, instance, config);
        let mut next = y.clone();
        let mut next_obj = p2_value(&next, coeffs, instance, Part::All);
        if next_obj < obj {
            // Safeguard: shrink toward the current iterate.
            let mut s = 0.5;
            let mut found = false;
            for _ in 0..30 {
                let cand: Vec<Point3> = x
                    .iter()
                    .zip(&y)
                    .map(|(a, b)| q.project(Point3::new(a.x + s * (b.x - a.x), a.y + s * (b.y - a.y), a.z + s * (b.z - a.z))))
                    .collect();
                let v = p2_value(&cand, coeffs, instance, Part::All);
                if v >= obj {
                    next = cand;
                    next_obj = v;
                    found = true;
                    break;
                }
                s *= 0.5;
            }
            if !found {
                next = x.clone();
                next_obj = obj;
            }
        }
        let gain = next_obj - obj;
        x = next;
        obj = next_obj;
        trace.push(obj);
        if gain < config.tolerance * (1.0 + obj.abs()) {
            break;
        }
    }
    Ok(DcaOutcome {
        trajectory: Trajectory::new(x),
        trace,
        iterations,
    })
}
