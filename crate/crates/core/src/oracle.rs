//! Exact solvers over a discretized flight box: stage-wise dynamic
//! programming and full enumeration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{linspace, Box3, Point3};
use crate::instance::Instance;
use crate::objective::{self, Trajectory};

/// Upper bound on resident `f64` table entries for [`dp_solve`].
pub const DEFAULT_MEMORY_BUDGET: usize = 64 * 1024 * 1024;

/// Upper bound on trajectories visited by [`enumerate_solve`].
pub const ENUMERATION_BUDGET: u64 = 1_000_000;

/// Uniform `nx × ny × nh` lattice over the flight box, corners included.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub nh: usize,
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, nh: usize) -> Self {
        GridSpec { nx, ny, nh }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.ny == 0 || self.nh == 0 {
            return Err(Error::invalid("grid", "all node counts must be at least 1"));
        }
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.nx * self.ny * self.nh
    }

    /// Nodes in layer-major order: index `(k · ny + j) · nx + i`.
    pub fn nodes(&self, q: &Box3) -> Vec<Point3> {
        let xs = linspace(q.x_min, q.x_max, self.nx);
        let ys = linspace(q.y_min, q.y_max, self.ny);
        let hs = linspace(q.h_min, q.h_max, self.nh);
        let mut out = Vec::with_capacity(self.node_count());
        for &h in &hs {
            for &y in &ys {
                for &x in &xs {
                    out.push(Point3::new(x, y, h));
                }
            }
        }
        out
    }

    pub fn altitudes(&self, q: &Box3) -> Vec<f64> {
        linspace(q.h_min, q.h_max, self.nh)
    }

    /// Node indices of altitude layer `k`.
    pub fn layer(&self, k: usize) -> std::ops::Range<usize> {
        let per = self.nx * self.ny;
        k * per..(k + 1) * per
    }
}

impl std::str::FromStr for GridSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(format!("expected nx,ny,nh but got '{s}'"));
        }
        let mut v = [0usize; 3];
        for (slot, part) in v.iter_mut().zip(&parts) {
            *slot = part.parse().map_err(|e| format!("bad grid count '{part}': {e}"))?;
        }
        let g = GridSpec::new(v[0], v[1], v[2]);
        g.validate().map_err(|e| e.to_string())?;
        Ok(g)
    }
}

impl std::fmt::Display for GridSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{},{},{}", self.nx, self.ny, self.nh)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AltitudeMode {
    Free,
    /// Every stage restricted to one altitude layer.
    Layer(usize),
    /// The best single layer.
    BestLayer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    /// `Ω_D` of `trajectory`.
    pub optimum: f64,
    pub trajectory: Trajectory,
    pub node_indices: Vec<usize>,
    pub grid: GridSpec,
    pub fixed_altitude: bool,
    /// Layer used when the altitude is fixed.
    pub layer: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage_values: Option<Vec<Vec<f64>>>,
}

/// `scores[t][j]` = covered weight of node `j` in interval `t`.
pub fn stage_scores(instance: &Instance, nodes: &[Point3]) -> Vec<Vec<f64>> {
    (0..instance.t_count)
        .map(|t| nodes.iter().map(|&x| objective::interval_coverage(x, instance, t)).collect())
        .collect()
}

/// Pairwise node distances, row-major.
pub fn distance_table(nodes: &[Point3]) -> Vec<f64> {
    let n = nodes.len();
    let mut out = vec![0.0; n * n];
    for a in 0..n {
        for b in 0..n {
            out[a * n + b] = nodes[a].distance(nodes[b]);
        }
    }
    out
}

/// Best path through per-stage node scores with transitions charged at
/// `penalty · distance`, including the hops from `x_start` and to `x_end`.
/// Returns the path value and node indices; ties keep the lowest index.
pub fn best_path(
    scores: &[Vec<f64>],
    nodes: &[Point3],
    dist: &[f64],
    penalty: f64,
    x_start: Point3,
    x_end: Point3,
    keep_values: bool,
) -> (f64, Vec<usize>, Option<Vec<Vec<f64>>>) {
    let n = nodes.len();
    let t_count = scores.len();
    assert!(n > 0 && t_count > 0, "need at least one node and one stage");
    let mut value: Vec<f64> = (0..n)
        .map(|j| scores[0][j] - penalty * x_start.distance(nodes[j]))
        .collect();
    let mut back = vec![vec![0usize; n]; t_count];
    let mut history = keep_values.then(|| vec![value.clone()]);
    let mut next = vec![0.0; n];
    for t in 1..t_count {
        for j in 0..n {
            let mut best = f64::NEG_INFINITY;
            let mut arg = 0;
            for k in 0..n {
                let v = value[k] - penalty * dist[k * n + j];
                if v > best {
                    best = v;
                    arg = k;
                }
            }
            next[j] = scores[t][j] + best;
            back[t][j] = arg;
        }
        std::mem::swap(&mut value, &mut next);
        if let Some(h) = history.as_mut() {
            h.push(value.clone());
        }
    }
    let mut best = f64::NEG_INFINITY;
    let mut arg = 0;
    for (j, &v) in value.iter().enumerate() {
        let v = v - penalty * nodes[j].distance(x_end);
        if v > best {
            best = v;
            arg = j;
        }
    }
    let mut path = vec![0usize; t_count];
    path[t_count - 1] = arg;
    for t in (1..t_count).rev() {
        path[t - 1] = back[t][path[t]];
    }
    (best, path, history)
}

fn check_budget(nodes: usize, t_count: usize, budget: usize) -> Result<()> {
    let needed = nodes
        .saturating_mul(nodes)
        .saturating_add(nodes.saturating_mul(t_count).saturating_mul(3));
    if needed > budget {
        return Err(Error::Budget(format!(
            "grid with {nodes} nodes over {t_count} intervals needs {needed} table entries (budget {budget})"
        )));
    }
    Ok(())
}

pub fn dp_solve(instance: &Instance, grid: GridSpec, mode: AltitudeMode) -> Result<OracleResult> {
    dp_solve_with_budget(instance, grid, mode, DEFAULT_MEMORY_BUDGET, false)
}

pub fn dp_solve_with_budget(
    instance: &Instance,
    grid: GridSpec,
    mode: AltitudeMode,
    budget: usize,
    keep_values: bool,
) -> Result<OracleResult> {
    grid.validate()?;
    let all = grid.nodes(&instance.q_region);
    let layers: Vec<Option<usize>> = match mode {
        AltitudeMode::Free => vec![None],
        AltitudeMode::Layer(k) => {
            if k >= grid.nh {
                return Err(Error::invalid("fixed_altitude", format!("layer {k} outside 0..{}", grid.nh)));
            }
            vec![Some(k)]
        }
        AltitudeMode::BestLayer => (0..grid.nh).map(Some).collect(),
    };
    let per_run = match mode {
        AltitudeMode::Free => all.len(),
        _ => grid.nx * grid.ny,
    };
    check_budget(per_run, instance.t_count, budget)?;

    let scores_all = stage_scores(instance, &all);
    let mut best: Option<(f64, Vec<usize>, Option<usize>, Option<Vec<Vec<f64>>>)> = None;
    for layer in layers {
        let range = layer.map_or(0..all.len(), |k| grid.layer(k));
        let nodes = &all[range.clone()];
        let scores: Vec<Vec<f64>> = scores_all.iter().map(|row| row[range.clone()].to_vec()).collect();
        let dist = distance_table(nodes);
        let (v, path, hist) = best_path(
            &scores,
            nodes,
            &dist,
            instance.penalty,
            instance.x_start,
            instance.x_end,
            keep_values,
        );
        let path: Vec<usize> = path.into_iter().map(|j| j + range.start).collect();
        if best.as_ref().is_none_or(|b| v > b.0) {
            best = Some((v, path, layer, hist));
        }
    }
    let (_, path, layer, hist) = best.expect("at least one layer");
    Ok(finish(instance, &all, path, grid, layer, hist))
}

fn finish(
    instance: &Instance,
    nodes: &[Point3],
    path: Vec<usize>,
    grid: GridSpec,
    layer: Option<usize>,
    stage_values: Option<Vec<Vec<f64>>>,
) -> OracleResult {
    let trajectory = Trajectory::new(path.iter().map(|&j| nodes[j]).collect());
    let optimum = objective::objective_value(&trajectory, instance);
    OracleResult {
        optimum,
        trajectory,
        node_indices: path,
        grid,
        fixed_altitude: layer.is_some(),
        layer,
        stage_values,
    }
}

/// Exhaustive search over every grid trajectory. Each candidate value is
/// formed exactly as [`objective::evaluate`] forms its total.
pub fn enumerate_solve(instance: &Instance, grid: GridSpec) -> Result<OracleResult> {
    grid.validate()?;
    let nodes = grid.nodes(&instance.q_region);
    let n = nodes.len();
    let t_count = instance.t_count;
    let count = (n as u64).checked_pow(t_count as u32).unwrap_or(u64::MAX);
    if count > ENUMERATION_BUDGET {
        return Err(Error::Budget(format!(
            "{n}^{t_count} trajectories exceed the enumeration budget {ENUMERATION_BUDGET}"
        )));
    }
    let scores = stage_scores(instance, &nodes);
    let p = instance.penalty;
    let mut idx = vec![0usize; t_count];
    let mut best_value = f64::NEG_INFINITY;
    let mut best_idx = idx.clone();
    loop {
        let traj = Trajectory::new(idx.iter().map(|&j| nodes[j]).collect());
        let g = objective::relocation(&traj, instance.x_start, instance.x_end);
        let coverage = idx.iter().enumerate().fold(0.0, |a, (t, &j)| a + scores[t][j]);
        let value = coverage - p * g;
        if value > best_value {
            best_value = value;
            best_idx.clone_from(&idx);
        }
        // Odometer increment, last interval fastest.
        let mut pos = t_count;
        loop {
            if pos == 0 {
                return Ok(finish(instance, &nodes, best_idx, grid, None, None));
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < n {
                break;
            }
            idx[pos] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelParams;
    use crate::geometry::{Point2, Rect2};
    use approx::assert_relative_eq;

    fn micro(penalty: f64) -> Instance {
        let s = Rect2::new(0.0, 1500.0, 0.0, 1500.0);
        let q = Box3::new(s, 50.0, 500.0);
        Instance::new(
            ChannelParams::suburban(),
            s,
            q,
            1.0,
            penalty,
            q.floor_center(),
            q.floor_center(),
            vec![
                vec![Point2::new(200.0, 300.0), Point2::new(1200.0, 1100.0)],
                vec![Point2::new(800.0, 700.0), Point2::new(100.0, 1400.0)],
            ],
            vec![vec![100.0, 110.0], vec![95.0, 120.0]],
            vec![0.8, 0.6],
        )
        .unwrap()
    }

    #[test]
    fn grid_nodes_include_corners() {
        let q = Box3::new(Rect2::new(0.0, 10.0, 0.0, 20.0), 50.0, 500.0);
        let g = GridSpec::new(3, 3, 2);
        let nodes = g.nodes(&q);
        assert_eq!(nodes.len(), 18);
        for c in q.corners() {
            assert!(nodes.contains(&c));
        }
        assert!(g.layer(1).all(|j| nodes[j].z == 500.0));
    }

    #[test]
    fn grid_spec_parses() {
        assert_eq!("5, 5,3".parse::<GridSpec>().unwrap(), GridSpec::new(5, 5, 3));
        assert!("5,5".parse::<GridSpec>().is_err());
        assert!("0,5,3".parse::<GridSpec>().is_err());
    }

    #[test]
    fn dp_matches_enumeration_on_3x3x2() {
        for p in [0.0, 1e-4, 1e-3, 5e-3] {
            let inst = micro(p);
            let g = GridSpec::new(3, 3, 2);
            let a = dp_solve(&inst, g, AltitudeMode::Free).unwrap();
            let b = enumerate_solve(&inst, g).unwrap();
            assert_eq!(a.optimum, b.optimum, "p={p}");
        }
    }

    #[test]
    fn zero_penalty_separates() {
        let inst = micro(0.0);
        let g = GridSpec::new(5, 5, 3);
        let nodes = g.nodes(&inst.q_region);
        let per_stage: f64 = stage_scores(&inst, &nodes)
            .iter()
            .fold(0.0, |a, row| a + row.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        let r = dp_solve(&inst, g, AltitudeMode::Free).unwrap();
        assert_eq!(r.optimum, per_stage);
    }

    #[test]
    fn huge_penalty_stays_home() {
        let inst = micro(1e6);
        let r = dp_solve(&inst, GridSpec::new(5, 5, 3), AltitudeMode::Free).unwrap();
        assert!(r.trajectory.points.iter().all(|&x| x == inst.x_start));
        let e = enumerate_solve(&inst, GridSpec::new(5, 5, 3)).unwrap();
        assert_eq!(e.trajectory, r.trajectory);
    }

    #[test]
    fn single_user_overhead_gets_full_coverage() {
        let s = Rect2::new(0.0, 1500.0, 0.0, 1500.0);
        let q = Box3::new(s, 50.0, 500.0);
        let u = Point2::new(375.0, 750.0);
        let inst = Instance::new(
            ChannelParams::suburban(),
            s,
            q,
            1.0,
            0.0,
            q.floor_center(),
            q.floor_center(),
            vec![vec![u; 3]],
            vec![vec![105.0; 3]],
            vec![0.7],
        )
        .unwrap();
        let r = dp_solve(&inst, GridSpec::new(5, 5, 3), AltitudeMode::Free).unwrap();
        assert_relative_eq!(r.optimum, 3.0 * 0.7, epsilon = 1e-12);
    }

    #[test]
    fn fixed_layer_never_beats_free_and_refinement_helps() {
        let inst = micro(1e-3);
        let free = dp_solve(&inst, GridSpec::new(3, 3, 3), AltitudeMode::Free).unwrap();
        let fixed = dp_solve(&inst, GridSpec::new(3, 3, 3), AltitudeMode::BestLayer).unwrap();
        assert!(fixed.optimum <= free.optimum);
        assert!(fixed.layer.is_some());
        let fine = dp_solve(&inst, GridSpec::new(5, 5, 5), AltitudeMode::Free).unwrap();
        assert!(fine.optimum >= free.optimum);
        for k in 0..3 {
            let one = dp_solve(&inst, GridSpec::new(3, 3, 3), AltitudeMode::Layer(k)).unwrap();
            assert!(one.optimum <= fixed.optimum);
        }
    }

    #[test]
    fn budgets_are_enforced() {
        let inst = micro(0.0);
        assert!(matches!(
            dp_solve_with_budget(&inst, GridSpec::new(10, 10, 10), AltitudeMode::Free, 1000, false),
            Err(Error::Budget(_))
        ));
        assert!(matches!(enumerate_solve(&inst, GridSpec::new(40, 40, 1)), Err(Error::Budget(_))));
    }
}
