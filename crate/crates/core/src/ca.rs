//! Continuum approximation: users become density fields, each interval is
//! served by a disc whose best size has a closed form, and a stochastic
//! regularization pass trades coverage against relocation.

use std::f64::consts::{LN_10, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{overhead_loss, Environment};
use crate::error::{Error, Result};
use crate::geometry::{linspace, Point2, Point3, Rect2};
use crate::instance::{DemandField, Instance};
use crate::objective::{self, Trajectory};

const GOLDEN: f64 = 1.618_033_988_749_895;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CaConfig {
    /// Stop after this many consecutive rejected moves.
    pub max_non_improving: usize,
    /// Step decays every `decay_period` iterations.
    pub decay_period: usize,
    pub explore_prob: f64,
    pub step: f64,
    pub decay: f64,
    /// Footprint scan points per axis.
    pub scan_resolution: usize,
    pub altitude_tol: f64,
    pub seed: u64,
    /// Hard cap on regularization iterations.
    pub max_total_iters: usize,
}

impl Default for CaConfig {
    fn default() -> Self {
        CaConfig {
            max_non_improving: 1000,
            decay_period: 100,
            explore_prob: 0.9,
            step: 20.0,
            decay: 0.5,
            scan_resolution: 50,
            altitude_tol: 0.5,
            seed: 0,
            max_total_iters: 200_000,
        }
    }
}

impl CaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.explore_prob) {
            return Err(Error::invalid("ca.explore_prob", "must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.decay) {
            return Err(Error::invalid("ca.decay", "must lie in [0, 1]"));
        }
        if !(self.step > 0.0) {
            return Err(Error::invalid("ca.step", "must be positive"));
        }
        if self.decay_period == 0 {
            return Err(Error::invalid("ca.decay_period", "must be at least 1"));
        }
        if self.scan_resolution == 0 {
            return Err(Error::invalid("ca.scan_resolution", "must be at least 1"));
        }
        if !(self.altitude_tol > 0.0) {
            return Err(Error::invalid("ca.altitude_tol", "must be positive"));
        }
        Ok(())
    }

    /// `ρ · ϱ^⌊i / l⌋`.
    pub fn step_at(&self, iter: usize) -> f64 {
        self.step * self.decay.powi((iter / self.decay_period) as i32)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaSolution {
    pub footprints: Vec<Point2>,
    pub altitudes: Vec<f64>,
    pub areas: Vec<f64>,
    /// `Ω*_t = γ φ*_t`.
    pub interval_values: Vec<f64>,
    /// `Σ_t Ω*_t`.
    pub total_ca: f64,
    pub trajectory: Trajectory,
    /// Discrete objective of `trajectory`.
    pub true_objective: f64,
    /// Incumbent objective after every regularization iteration.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub accepted: usize,
}

/// `Ω_C(h, A) = w A (d − L̄(h) (2/3) √(A/π)) / (d − L−)`.
pub fn ca_objective(w: f64, d: f64, h: f64, area: f64, env: &Environment) -> Result<f64> {
    let lbar = overhead_loss(h, env)?;
    Ok(ca_value(w, d, lbar, area, env.l_lower))
}

fn ca_value(w: f64, d: f64, lbar: f64, area: f64, l_lower: f64) -> f64 {
    w * area * (d - lbar * (2.0 / 3.0) * (area / PI).sqrt()) / (d - l_lower)
}

/// `A* = π (d / L̄)²` and `Ω* = π w d³ / (3 (d − L−) L̄²)`.
pub fn homogeneous_optimum(w: f64, d: f64, h: f64, env: &Environment) -> Result<(f64, f64)> {
    if !(d > env.l_lower) {
        return Err(Error::ThresholdBelowMinimumLoss {
            mslt: d,
            l_lower: env.l_lower,
        });
    }
    let lbar = overhead_loss(h, env)?;
    let area = PI * (d / lbar).powi(2);
    let value = PI * w * d.powi(3) / (3.0 * (d - env.l_lower) * lbar * lbar);
    Ok((area, value))
}

/// Closed-form Hessian in `(h, A)` used for the concavity argument. Its
/// `h–h` entry is taken with a negative sign.
pub fn concavity_hessian(w: f64, d: f64, h: f64, area: f64, env: &Environment) -> Result<[[f64; 2]; 2]> {
    let lbar = overhead_loss(h, env)?;
    let eta = env.params.eta;
    let k = d - env.l_lower;
    let sp = PI.sqrt();
    let h11 = -20.0 * eta * w * area.powf(1.5) / (3.0 * LN_10 * sp * k * h * h);
    let h12 = -10.0 * eta * w * area.sqrt() / (LN_10 * sp * k * h);
    let h22 = -w * lbar / (2.0 * sp * k * area.sqrt());
    Ok([[h11, h12], [h12, h22]])
}

/// Exact second derivatives of [`ca_objective`] in `(h, A)`.
pub fn exact_hessian(w: f64, d: f64, h: f64, area: f64, env: &Environment) -> Result<[[f64; 2]; 2]> {
    let mut m = concavity_hessian(w, d, h, area, env)?;
    m[0][0] = -m[0][0];
    Ok(m)
}

/// Largest eigenvalue of a symmetric 2×2 matrix.
pub fn max_eigenvalue(m: [[f64; 2]; 2]) -> f64 {
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = (0.25 * tr * tr - det).max(0.0).sqrt();
    0.5 * tr + disc
}

/// Golden-section maximization of a unimodal `f` on `[lo, hi]` until the
/// bracket is no wider than `tol`. Returns the bracket midpoint and the
/// number of evaluations.
pub fn golden_section_max<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: f64) -> (f64, usize) {
    let (mut a, mut b) = (lo, hi);
    if b - a <= tol {
        return (0.5 * (a + b), 0);
    }
    let inv = 1.0 / GOLDEN;
    let mut c = b - (b - a) * inv;
    let mut d = a + (b - a) * inv;
    let mut fc = f(c);
    let mut fd = f(d);
    let mut evals = 2;
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - (b - a) * inv;
            if b - a <= tol {
                break;
            }
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + (b - a) * inv;
            if b - a <= tol {
                break;
            }
            fd = f(d);
        }
        evals += 1;
    }
    (0.5 * (a + b), evals)
}

/// Where per-interval demand values come from.
#[derive(Debug, Clone, Copy)]
pub enum DemandSource<'a> {
    Field(DemandField<'a>),
    /// Instances without a stored field: the discrete users of each interval.
    Users(&'a Instance),
}

impl<'a> DemandSource<'a> {
    pub fn for_instance(instance: &'a Instance) -> Self {
        match &instance.gen_meta {
            Some(meta) => DemandSource::Field(DemandField::new(&meta.field, instance.s_region, instance.interval_len)),
            None => DemandSource::Users(instance),
        }
    }
}

/// `π w d³ / (3 (d − L−) L̄²)`; zero where `d ≤ L−`.
pub fn local_value(w: f64, d: f64, lbar: f64, l_lower: f64) -> f64 {
    if d > l_lower && w > 0.0 {
        PI * w * d.powi(3) / (3.0 * (d - l_lower) * lbar * lbar)
    } else {
        0.0
    }
}

/// Best scan point for interval `t` at altitude `h`. Earlier points in
/// lexicographic `(x, y)` order win ties.
pub fn footprint(source: &DemandSource<'_>, t: usize, h: f64, env: &Environment, resolution: usize) -> Result<(Point2, f64)> {
    let lbar = overhead_loss(h, env)?;
    let mut best = (Point2::new(f64::NAN, f64::NAN), f64::NEG_INFINITY);
    let mut consider = |y: Point2, w: f64, d: f64| {
        let v = local_value(w, d, lbar, env.l_lower);
        if v > best.1 {
            best = (y, v);
        }
    };
    match source {
        DemandSource::Field(field) => {
            let tau = field.interval_median(t);
            let r = field.region;
            let xs = linspace(r.x_min, r.x_max, resolution);
            let ys = linspace(r.y_min, r.y_max, resolution);
            for &x in &xs {
                for &y in &ys {
                    let p = Point2::new(x, y);
                    consider(p, field.density_w(p, tau), field.density_d(p, tau));
                }
            }
        }
        DemandSource::Users(inst) => {
            let mut order: Vec<usize> = (0..inst.n).collect();
            order.sort_by(|&a, &b| {
                let (pa, pb) = (inst.users[a][t], inst.users[b][t]);
                pa.x.total_cmp(&pb.x).then(pa.y.total_cmp(&pb.y))
            });
            for i in order {
                consider(inst.users[i][t], inst.weights[i], inst.mslt[i][t]);
            }
        }
    }
    Ok(best)
}

fn demand_at(source: &DemandSource<'_>, y: Point2, t: usize) -> (f64, f64) {
    match source {
        DemandSource::Field(f) => {
            let tau = f.interval_median(t);
            (f.density_w(y, tau), f.density_d(y, tau))
        }
        DemandSource::Users(inst) => (0..inst.n)
            .find(|&i| inst.users[i][t] == y)
            .map_or((0.0, 0.0), |i| (inst.weights[i], inst.mslt[i][t])),
    }
}

/// Golden-section search for the altitude maximizing the local value at a
/// fixed footprint. Returns `(h, evaluations)`.
pub fn altitude_search(
    source: &DemandSource<'_>,
    t: usize,
    footprint: Point2,
    q: &crate::geometry::Box3,
    env: &Environment,
    tol: f64,
) -> (f64, usize) {
    let (w, d) = demand_at(source, footprint, t);
    golden_section_max(
        |h| {
            let lbar = overhead_loss(h, env).unwrap_or(f64::INFINITY);
            local_value(w, d, lbar, env.l_lower)
        },
        q.h_min,
        q.h_max,
        tol,
    )
}

/// Per-interval footprints and altitudes with relocation ignored.
pub fn ca_initial(instance: &Instance, config: &CaConfig) -> Result<CaSolution> {
    config.validate()?;
    let env = &instance.env;
    let q = &instance.q_region;
    let source = DemandSource::for_instance(instance);
    let mut footprints = Vec::with_capacity(instance.t_count);
    let mut altitudes = Vec::with_capacity(instance.t_count);
    let mut areas = Vec::with_capacity(instance.t_count);
    let mut values = Vec::with_capacity(instance.t_count);
    for t in 0..instance.t_count {
        let (y, _) = footprint(&source, t, q.h_min, env, config.scan_resolution)?;
        let (h, _) = altitude_search(&source, t, y, q, env, config.altitude_tol);
        let (w, d) = demand_at(&source, y, t);
        let lbar = overhead_loss(h, env)?;
        footprints.push(y);
        altitudes.push(h);
        areas.push(PI * (d / lbar).powi(2));
        values.push(instance.interval_len * local_value(w, d, lbar, env.l_lower));
    }
    let points = footprints
        .iter()
        .zip(&altitudes)
        .map(|(y, &h)| q.project(y.at(h)))
        .collect();
    let trajectory = Trajectory::new(points);
    let true_objective = objective::objective_value(&trajectory, instance);
    Ok(CaSolution {
        footprints,
        altitudes,
        areas,
        total_ca: values.iter().sum(),
        interval_values: values,
        trajectory,
        true_objective,
        trace: Vec::new(),
        iterations: 0,
        accepted: 0,
    })
}

fn move_toward(a: Point3, b: Point3, amount: f64) -> Point3 {
    let dist = a.distance(b);
    if dist <= 2.0 * amount || dist == 0.0 {
        return Point3::new(0.5 * (a.x + b.x), 0.5 * (a.y + b.y), 0.5 * (a.z + b.z));
    }
    let s = amount / dist;
    Point3::new(a.x + s * (b.x - a.x), a.y + s * (b.y - a.y), a.z + s * (b.z - a.z))
}

/// Pushes `p` by `rho` away from the nearest ground edge its service disc
/// crosses.
fn boundary_push(p: Point3, radius: f64, s: &Rect2, rho: f64) -> Point3 {
    // (gap to edge, inward direction)
    let edges = [
        (p.x - s.x_min, (1.0, 0.0)),
        (s.x_max - p.x, (-1.0, 0.0)),
        (p.y - s.y_min, (0.0, 1.0)),
        (s.y_max - p.y, (0.0, -1.0)),
    ];
    let hit = edges
        .iter()
        .filter(|(gap, _)| *gap < radius)
        .min_by(|a, b| a.0.total_cmp(&b.0));
    match hit {
        Some(&(_, (dx, dy))) => Point3::new(p.x + rho * dx, p.y + rho * dy, p.z),
        None => p,
    }
}

/// Pairwise pull moves accepted only when the discrete objective improves.
pub fn regularize(solution: &CaSolution, instance: &Instance, config: &CaConfig) -> Result<CaSolution> {
    config.validate()?;
    let mut sol = solution.clone();
    let t_count = sol.trajectory.len();
    let q = &instance.q_region;
    let s = instance.s_region;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut best = objective::objective_value(&sol.trajectory, instance);
    let mut stall = 0usize;
    let mut iter = 0usize;
    sol.trace.clear();
    sol.accepted = 0;
    while stall < config.max_non_improving && iter < config.max_total_iters && t_count >= 2 {
        let rho = config.step_at(iter);
        iter += 1;
        let pts = &sol.trajectory.points;
        let (t1, t2) = if rng.random_bool(config.explore_prob) {
            let mut arg = 0;
            let mut longest = f64::NEG_INFINITY;
            for t in 0..t_count - 1 {
                let hop = pts[t].distance(pts[t + 1]);
                if hop > longest {
                    longest = hop;
                    arg = t;
                }
            }
            (arg, arg + 1)
        } else {
            let a = rng.random_range(0..t_count);
            let mut b = rng.random_range(0..t_count - 1);
            if b >= a {
                b += 1;
            }
            (a, b)
        };
        let mut cand = pts.clone();
        let mut areas = sol.areas.clone();
        let (a, b) = (pts[t1], pts[t2]);
        cand[t1] = move_toward(a, b, 0.5 * rho);
        cand[t2] = move_toward(b, a, 0.5 * rho);
        for &t in &[t1, t2] {
            let old_h = pts[t].z;
            cand[t] = q.project(cand[t]);
            areas[t] *= 1.0 + (cand[t].z - old_h) / old_h;
            let radius = (areas[t].max(0.0) / PI).sqrt();
            cand[t] = q.project(boundary_push(cand[t], radius, &s, rho));
        }
        let cand = Trajectory::new(cand);
        let value = objective::objective_value(&cand, instance);
        if value > best {
            best = value;
            sol.trajectory = cand;
            sol.areas = areas;
            sol.accepted += 1;
            stall = 0;
        } else {
            stall += 1;
        }
        sol.trace.push(best);
    }
    sol.iterations = iter;
    sol.true_objective = best;
    for (t, p) in sol.trajectory.points.iter().enumerate() {
        sol.footprints[t] = p.ground();
        sol.altitudes[t] = p.z;
    }
    Ok(sol)
}

/// [`ca_initial`] followed by [`regularize`].
pub fn solve_ca(instance: &Instance, config: &CaConfig) -> Result<CaSolution> {
    regularize(&ca_initial(instance, config)?, instance, config)
}
