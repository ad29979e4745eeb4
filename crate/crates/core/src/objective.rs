//! Exact evaluation of the discrete covering objective.

use serde::{Deserialize, Serialize};

use crate::channel::{coverage_from_loss, Environment};
use crate::error::{Error, Result};
use crate::geometry::{Box3, Point3};
use crate::instance::Instance;

/// One UAV location per interval; the endpoints live on the instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub points: Vec<Point3>,
}

impl Trajectory {
    pub fn new(points: Vec<Point3>) -> Self {
        Trajectory { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn validate(&self, q: &Box3, t_count: usize) -> Result<()> {
        if self.points.len() != t_count {
            return Err(Error::invalid(
                "trajectory",
                format!("expected {t_count} points, found {}", self.points.len()),
            ));
        }
        if let Some(t) = self.points.iter().position(|p| !q.contains(*p)) {
            return Err(Error::invalid(format!("trajectory[{t}]"), "outside q_region"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageBreakdown {
    /// Total travel `g(X)` in meters.
    pub distance: f64,
    /// `p · g(X)`.
    pub relocation: f64,
    /// `per_interval[t][i] = μ(x_t, y_it, d_it)`; zero outside `C_t`.
    pub per_interval: Vec<Vec<f64>>,
    pub covered_sets: Vec<Vec<usize>>,
    /// `Σ_{i ∈ C_t} w_i μ` per interval.
    pub interval_coverage: Vec<f64>,
    pub total: f64,
}

/// `g(X) = Σ_{t=1}^{T+1} ‖x_t − x_{t−1}‖`.
pub fn relocation(traj: &Trajectory, x_start: Point3, x_end: Point3) -> f64 {
    let mut prev = x_start;
    let mut total = 0.0;
    for &p in &traj.points {
        total += p.distance(prev);
        prev = p;
    }
    total + x_end.distance(prev)
}

/// `C_t(x) = {i : L(x, y_it) ≤ d_it}`.
pub fn covered_set(x: Point3, instance: &Instance, t: usize) -> Vec<usize> {
    (0..instance.n)
        .filter(|&i| instance.env.loss(x, instance.users[i][t]) <= instance.mslt[i][t])
        .collect()
}

/// `Σ_{i ∈ C_t(x)} w_i μ(x, y_it, d_it)`.
pub fn interval_coverage(x: Point3, instance: &Instance, t: usize) -> f64 {
    let env = &instance.env;
    let mut total = 0.0;
    for i in 0..instance.n {
        let d = instance.mslt[i][t];
        let loss = env.loss(x, instance.users[i][t]);
        if loss <= d {
            total += instance.weights[i] * coverage_from_loss(loss, d, env.l_lower);
        }
    }
    total
}

pub fn evaluate(traj: &Trajectory, instance: &Instance) -> CoverageBreakdown {
    let env = &instance.env;
    let distance = relocation(traj, instance.x_start, instance.x_end);
    let relocation = instance.penalty * distance;
    let mut per_interval = Vec::with_capacity(traj.len());
    let mut covered_sets = Vec::with_capacity(traj.len());
    let mut interval_cov = Vec::with_capacity(traj.len());
    for (t, &x) in traj.points.iter().enumerate() {
        let mut mus = vec![0.0; instance.n];
        let mut set = Vec::new();
        let mut cov = 0.0;
        for i in 0..instance.n {
            let d = instance.mslt[i][t];
            let loss = env.loss(x, instance.users[i][t]);
            if loss <= d {
                let mu = coverage_from_loss(loss, d, env.l_lower);
                mus[i] = mu;
                set.push(i);
                cov += instance.weights[i] * mu;
            }
        }
        per_interval.push(mus);
        covered_sets.push(set);
        interval_cov.push(cov);
    }
    let coverage: f64 = interval_cov.iter().fold(0.0, |a, &c| a + c);
    CoverageBreakdown {
        distance,
        relocation,
        per_interval,
        covered_sets,
        interval_coverage: interval_cov,
        total: coverage - relocation,
    }
}

/// Shorthand for `evaluate(..).total`.
pub fn objective_value(traj: &Trajectory, instance: &Instance) -> f64 {
    evaluate(traj, instance).total
}

/// `M = L+ − L−`.
pub fn big_m(env: &Environment) -> f64 {
    env.big_m()
}

/// `ν_it = w_i d_it / (d_it − L−)`.
pub fn nu(instance: &Instance, i: usize, t: usize) -> f64 {
    let d = instance.mslt[i][t];
    instance.weights[i] * d / (d - instance.env.l_lower)
}

/// `κ_it = w_i / (d_it − L−)`.
pub fn kappa(instance: &Instance, i: usize, t: usize) -> f64 {
    instance.weights[i] / (instance.mslt[i][t] - instance.env.l_lower)
}

/// The linearized form `−p g(X) + ΣΣ (ν z − κ s)` with `z = 1{i ∈ C_t}` and
/// `s = z L`.
pub fn constrained_form_value(traj: &Trajectory, instance: &Instance) -> f64 {
    let mut total = -instance.penalty * relocation(traj, instance.x_start, instance.x_end);
    for (t, &x) in traj.points.iter().enumerate() {
        for i in 0..instance.n {
            let loss = instance.env.loss(x, instance.users[i][t]);
            let z = if loss <= instance.mslt[i][t] { 1.0 } else { 0.0 };
            let s = z * loss;
            total += nu(instance, i, t) * z - kappa(instance, i, t) * s;
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelParams;
    use crate::geometry::{Point2, Rect2};
    use approx::assert_relative_eq;

    fn square() -> (Rect2, Box3) {
        let s = Rect2::new(0.0, 1500.0, 0.0, 1500.0);
        (s, Box3::new(s, 50.0, 500.0))
    }

    fn two_user(t_count: usize, penalty: f64) -> Instance {
        let (s, q) = square();
        Instance::new(
            ChannelParams::suburban(),
            s,
            q,
            1.0,
            penalty,
            Point3::new(750.0, 750.0, 50.0),
            Point3::new(750.0, 750.0, 50.0),
            vec![vec![Point2::new(750.0, 750.0); t_count], vec![Point2::new(900.0, 800.0); t_count]],
            vec![vec![105.0; t_count], vec![100.0; t_count]],
            vec![1.0, 0.5],
        )
        .unwrap()
    }

    #[test]
    fn relocation_examples() {
        let o = Point3::new(0.0, 0.0, 50.0);
        assert_eq!(relocation(&Trajectory::new(vec![o, o]), o, o), 0.0);
        let tr = Trajectory::new(vec![Point3::new(3.0, 4.0, 50.0)]);
        assert_relative_eq!(relocation(&tr, o, o), 10.0);
        let mut dup = tr.clone();
        dup.points.push(Point3::new(3.0, 4.0, 50.0));
        assert_relative_eq!(relocation(&dup, o, o), 10.0);
    }

    #[test]
    fn overhead_user_is_covered_with_full_mu() {
        let inst = two_user(1, 0.0);
        let x = Point3::new(750.0, 750.0, 50.0);
        assert!(covered_set(x, &inst, 0).contains(&0));
        let b = evaluate(&Trajectory::new(vec![x]), &inst);
        assert_relative_eq!(b.per_interval[0][0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn far_corner_user_with_tight_threshold_is_uncovered() {
        let (s, q) = square();
        let l_lower = Environment::new(ChannelParams::suburban(), &q, &s).unwrap().l_lower;
        let inst = Instance::new(
            ChannelParams::suburban(),
            s,
            q,
            1.0,
            0.0,
            q.floor_center(),
            q.floor_center(),
            vec![vec![Point2::new(1500.0, 1500.0)]],
            vec![vec![l_lower + 1e-6]],
            vec![1.0],
        )
        .unwrap();
        assert!(covered_set(Point3::new(0.0, 0.0, 50.0), &inst, 0).is_empty());
    }

    #[test]
    fn single_interval_hand_evaluation() {
        let inst = two_user(1, 0.01);
        let x = Point3::new(800.0, 750.0, 50.0);
        let b = evaluate(&Trajectory::new(vec![x]), &inst);
        let env = &inst.env;
        let mut expect = -0.01 * 2.0 * 50.0;
        for (i, (u, d, w)) in [(Point2::new(750.0, 750.0), 105.0, 1.0), (Point2::new(900.0, 800.0), 100.0, 0.5)]
            .into_iter()
            .enumerate()
        {
            let dist = ((x.x - u.x).powi(2) + (x.y - u.y).powi(2) + 2500.0f64).sqrt();
            let theta = (50.0 / (x.x - u.x).hypot(x.y - u.y)).atan().to_degrees();
            let loss = env.f_const + 20.0 * dist.log10() - 20.9 / (1.0 + 4.88 * (-0.43 * (theta - 4.88)).exp());
            let mu: f64 = ((d - loss) / (d - env.l_lower)).max(0.0);
            assert_relative_eq!(b.per_interval[0][i], mu, epsilon = 1e-9);
            expect += w * mu;
        }
        assert_relative_eq!(b.total, expect, epsilon = 1e-9);
    }

    #[test]
    fn full_coverage_every_interval_sums_to_t() {
        let (s, q) = square();
        let u = Point2::new(300.0, 300.0);
        let inst = Instance::new(
            ChannelParams::suburban(),
            s,
            q,
            1.0,
            0.0,
            u.at(50.0),
            u.at(50.0),
            vec![vec![u; 4]],
            vec![vec![105.0; 4]],
            vec![1.0],
        )
        .unwrap();
        let b = evaluate(&Trajectory::new(vec![u.at(50.0); 4]), &inst);
        assert_relative_eq!(b.total, 4.0, epsilon = 1e-12);
    }

    #[test]
    fn big_m_is_positive_bound_gap() {
        let inst = two_user(1, 0.0);
        assert_eq!(big_m(&inst.env), inst.env.l_upper - inst.env.l_lower);
        assert!(big_m(&inst.env) > 0.0);
    }

    #[test]
    fn zero_penalty_is_separable() {
        let inst = two_user(3, 0.0);
        let pts = vec![Point3::new(700.0, 700.0, 80.0), Point3::new(900.0, 800.0, 60.0), Point3::new(100.0, 100.0, 300.0)];
        let total = objective_value(&Trajectory::new(pts.clone()), &inst);
        let parts: f64 = pts.iter().enumerate().map(|(t, &x)| interval_coverage(x, &inst, t)).sum();
        assert_relative_eq!(total, parts, epsilon = 1e-12);
    }
}
