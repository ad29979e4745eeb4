//! Problem instances, the synthetic demand generator, and file I/O.
//!
//! Demand is described by two slowly varying density fields over the ground
//! region: a weight density `w(y, t) = w̄ [1 + Δw cos(π‖ŷ‖)] υw(t)` and an
//! MSLT density `d(y, t) = d̄ [1 + Δd cos(π‖ŷ‖)] υd(t)`, where `ŷ` is the
//! position measured from the region's lower-left corner in units of its
//! longest side. The generator tiles the region into cells, draws one user
//! per cell and interval, and aggregates the fields over each cell at the
//! interval median.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelParams, Environment};
use crate::error::{Error, Result};
use crate::geometry::{Box3, Point2, Point3, Rect2};
use crate::objective::{self, Trajectory};
use crate::quadrature::GaussLegendre;

/// MSLT values are floored this far (dB) above `L−` so that every user
/// keeps a well-defined coverage slope.
pub const MSLT_FLOOR_MARGIN: f64 = 1.0;

/// Nodes per axis of the cell aggregation rule.
const CELL_RULE_NODES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Trend {
    Increase,
    Decrease,
    Random,
}

impl Trend {
    pub fn label(self) -> &'static str {
        match self {
            Trend::Increase => "inc",
            Trend::Decrease => "dec",
            Trend::Random => "rand",
        }
    }
}

impl std::str::FromStr for Trend {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "inc" | "increase" => Ok(Trend::Increase),
            "dec" | "decrease" => Ok(Trend::Decrease),
            "rand" | "random" => Ok(Trend::Random),
            other => Err(format!("unknown trend '{other}' (expected inc, dec or rand)")),
        }
    }
}

/// Parameters of the weight and MSLT density fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityField {
    pub w_bar: f64,
    pub d_bar: f64,
    pub delta_w: f64,
    pub delta_d: f64,
    pub delta_t: f64,
    pub delta_p: f64,
    pub trend_w: Trend,
    pub trend_d: Trend,
    /// Per-interval draws `ψ_k ∈ [−1, 1]` driving the random trend.
    pub random_steps: Vec<f64>,
    pub seed: u64,
}

impl DensityField {
    /// Field with `ψ_k` drawn from `seed` for `t_count` intervals.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        w_bar: f64,
        d_bar: f64,
        deltas: [f64; 4],
        trend_w: Trend,
        trend_d: Trend,
        t_count: usize,
        seed: u64,
    ) -> Self {
        let [delta_w, delta_d, delta_t, delta_p] = deltas;
        DensityField {
            w_bar,
            d_bar,
            delta_w,
            delta_d,
            delta_t,
            delta_p,
            trend_w,
            trend_d,
            random_steps: random_steps(seed, t_count),
            seed,
        }
    }

    /// `w̄ = 0.5`, `d̄ = 105` and every heterogeneity control at 0.2.
    pub fn reference(trend_w: Trend, trend_d: Trend, t_count: usize, seed: u64) -> Self {
        DensityField::new(0.5, 105.0, [0.2; 4], trend_w, trend_d, t_count, seed)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("delta_w", self.delta_w),
            ("delta_d", self.delta_d),
            ("delta_t", self.delta_t),
            ("delta_p", self.delta_p),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!("field.{name}"), "must lie in [0, 1]"));
            }
        }
        if !(self.w_bar >= 0.0 && self.w_bar.is_finite()) {
            return Err(Error::invalid("field.w_bar", "must be finite and non-negative"));
        }
        if !(self.d_bar.is_finite()) {
            return Err(Error::invalid("field.d_bar", "must be finite"));
        }
        if let Some(k) = self.random_steps.iter().position(|v| !(-1.0..=1.0).contains(v)) {
            return Err(Error::invalid(format!("field.random_steps[{k}]"), "must lie in [-1, 1]"));
        }
        Ok(())
    }
}

/// Uniform `ψ_k ∈ [−1, 1]`, one per interval; prefixes are stable as the
/// interval count grows.
pub fn random_steps(seed: u64, t_count: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    (0..t_count).map(|_| rng.random_range(-1.0..=1.0)).collect()
}

/// Temporal multiplier `υ(t)` for one trend. `interval_len` locates the
/// random-trend breakpoints.
pub fn temporal_factor(trend: Trend, t: f64, field: &DensityField, interval_len: f64) -> f64 {
    let dt = field.delta_t;
    match trend {
        Trend::Increase => 1.0 + (1.0 + dt * t).ln(),
        Trend::Decrease => (-dt * t).exp(),
        Trend::Random => {
            let psi = if field.random_steps.is_empty() {
                0.0
            } else {
                let k = if interval_len > 0.0 {
                    ((t / interval_len).floor().max(0.0) as usize).min(field.random_steps.len() - 1)
                } else {
                    0
                };
                field.random_steps[k]
            };
            1.0 + dt * psi * t
        }
    }
}

/// A density field bound to its ground region and interval length.
#[derive(Debug, Clone, Copy)]
pub struct DemandField<'a> {
    pub field: &'a DensityField,
    pub region: Rect2,
    pub interval_len: f64,
}

impl<'a> DemandField<'a> {
    pub fn new(field: &'a DensityField, region: Rect2, interval_len: f64) -> Self {
        DemandField {
            field,
            region,
            interval_len,
        }
    }

    /// `cos(π‖ŷ‖)` on normalized coordinates.
    pub fn spatial_wave(&self, y: Point2) -> f64 {
        let side = self.region.side();
        let yn = if side > 0.0 {
            Point2::new((y.x - self.region.x_min) / side, (y.y - self.region.y_min) / side)
        } else {
            Point2::new(0.0, 0.0)
        };
        (std::f64::consts::PI * yn.norm()).cos()
    }

    pub fn density_w(&self, y: Point2, t: f64) -> f64 {
        let f = self.field;
        f.w_bar
            * (1.0 + f.delta_w * self.spatial_wave(y))
            * temporal_factor(f.trend_w, t, f, self.interval_len)
    }

    pub fn density_d(&self, y: Point2, t: f64) -> f64 {
        let f = self.field;
        f.d_bar
            * (1.0 + f.delta_d * self.spatial_wave(y))
            * temporal_factor(f.trend_d, t, f, self.interval_len)
    }

    /// Median `τ_t` of zero-based interval `t`.
    pub fn interval_median(&self, t: usize) -> f64 {
        (t as f64 + 0.5) * self.interval_len
    }
}

/// `(1 + Δp) · (1 / (H |S|)) ∫₀ᴴ ∫_S w(y, t) dy dt` for horizon `H`.
pub fn penalty_from_field(field: &DensityField, s_region: &Rect2, horizon: f64, interval_len: f64) -> f64 {
    let area = s_region.area();
    if !(area > 0.0 && horizon > 0.0) {
        return 0.0;
    }
    let gl = GaussLegendre::new(16);
    let demand = DemandField::new(field, *s_region, interval_len);
    // w separates into w̄ · spatial(y) · υw(t).
    let spatial = gl.integrate_rect_composite(s_region, 8, |y| 1.0 + field.delta_w * demand.spatial_wave(y));
    let temporal = temporal_integral(&gl, field, horizon, interval_len);
    (1.0 + field.delta_p) * field.w_bar * spatial * temporal / (horizon * area)
}

fn temporal_integral(gl: &GaussLegendre, field: &DensityField, horizon: f64, interval_len: f64) -> f64 {
    let upsilon = |t: f64| temporal_factor(field.trend_w, t, field, interval_len);
    if field.trend_w == Trend::Random && interval_len > 0.0 {
        // Integrate piece by piece so each rule sees a linear integrand.
        let mut total = 0.0;
        let mut a = 0.0;
        let mut k = 0usize;
        while a < horizon {
            let b = ((k + 1) as f64 * interval_len).min(horizon);
            if k + 1 >= field.random_steps.len().max(1) {
                total += gl.integrate(a, horizon, upsilon);
                break;
            }
            total += gl.integrate(a, b, upsilon);
            a = b;
            k += 1;
        }
        total
    } else {
        let pieces = 32;
        let h = horizon / pieces as f64;
        (0..pieces)
            .map(|k| gl.integrate(k as f64 * h, (k + 1) as f64 * h, upsilon))
            .sum()
    }
}

/// Generator settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    /// Number of cells (and users). Tiled as the most nearly square
    /// `rows × cols` factorization; perfect squares give square cells.
    pub grid_cells: usize,
    pub t_count: usize,
    pub interval_len: f64,
    pub field: DensityField,
    pub env: ChannelParams,
    pub s_region: Rect2,
    pub q_region: Box3,
}

impl GenConfig {
    /// 1500 m square region, 50–500 m flight altitudes, suburban channel,
    /// ten intervals over a unit horizon.
    pub fn reference(grid_cells: usize, field: DensityField) -> Self {
        let t_count = field.random_steps.len().max(1);
        let s = Rect2::new(0.0, 1500.0, 0.0, 1500.0);
        GenConfig {
            grid_cells,
            t_count,
            interval_len: 1.0 / t_count as f64,
            field,
            env: ChannelParams::suburban(),
            s_region: s,
            q_region: Box3::new(s, 50.0, 500.0),
        }
    }

    pub fn horizon(&self) -> f64 {
        self.interval_len * self.t_count as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid_cells == 0 {
            return Err(Error::invalid("grid_cells", "must be at least 1"));
        }
        if self.t_count == 0 {
            return Err(Error::invalid("t_count", "must be at least 1"));
        }
        if !(self.interval_len > 0.0 && self.interval_len.is_finite()) {
            return Err(Error::invalid("interval_len", "must be positive"));
        }
        if !(self.s_region.area() > 0.0) {
            return Err(Error::invalid("s_region", "must have positive area"));
        }
        self.field.validate()?;
        if self.field.random_steps.len() < self.t_count
            && (self.field.trend_w == Trend::Random || self.field.trend_d == Trend::Random)
        {
            return Err(Error::invalid(
                "field.random_steps",
                format!("needs {} entries for a random trend", self.t_count),
            ));
        }
        Ok(())
    }
}

/// `(rows, cols)` with `rows ≤ cols`, `rows · cols = cells`, rows maximal.
pub fn cell_layout(cells: usize) -> (usize, usize) {
    let mut rows = (cells as f64).sqrt().floor() as usize;
    while rows > 1 && cells % rows != 0 {
        rows -= 1;
    }
    let rows = rows.max(1);
    (rows, cells / rows)
}

/// The ground cells in user order (row-major from the lower-left corner).
pub fn cells(region: &Rect2, count: usize) -> Vec<Rect2> {
    let (rows, cols) = cell_layout(count);
    let dx = region.width() / cols as f64;
    let dy = region.height() / rows as f64;
    let mut out = Vec::with_capacity(count);
    for r in 0..rows {
        for c in 0..cols {
            let x0 = region.x_min + dx * c as f64;
            let y0 = region.y_min + dy * r as f64;
            let x1 = if c + 1 == cols { region.x_max } else { x0 + dx };
            let y1 = if r + 1 == rows { region.y_max } else { y0 + dy };
            out.push(Rect2::new(x0, x1, y0, y1));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenMeta {
    pub seed: u64,
    pub field: DensityField,
}

/// A dynamic covering instance: `n` users over `t_count` intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub env: Environment,
    pub s_region: Rect2,
    pub q_region: Box3,
    pub n: usize,
    pub t_count: usize,
    pub interval_len: f64,
    pub penalty: f64,
    pub x_start: Point3,
    pub x_end: Point3,
    /// `users[i][t]`
    pub users: Vec<Vec<Point2>>,
    /// `mslt[i][t]` in dB.
    pub mslt: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub gen_meta: Option<GenMeta>,
}

/// On-disk layout; the environment is stored as raw channel parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct InstanceFile {
    env: ChannelParams,
    s_region: Rect2,
    q_region: Box3,
    n: usize,
    t_count: usize,
    interval_len: f64,
    penalty: f64,
    x_start: Point3,
    x_end: Point3,
    users: Vec<Vec<Point2>>,
    mslt: Vec<Vec<f64>>,
    weights: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gen_meta: Option<GenMeta>,
}

impl Serialize for Instance {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        InstanceFile {
            env: self.env.params,
            s_region: self.s_region,
            q_region: self.q_region,
            n: self.n,
            t_count: self.t_count,
            interval_len: self.interval_len,
            penalty: self.penalty,
            x_start: self.x_start,
            x_end: self.x_end,
            users: self.users.clone(),
            mslt: self.mslt.clone(),
            weights: self.weights.clone(),
            gen_meta: self.gen_meta.clone(),
        }
        .serialize(serializer)
    }
}

impl Instance {
    /// Builds and validates an instance from raw parts.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        params: ChannelParams,
        s_region: Rect2,
        q_region: Box3,
        interval_len: f64,
        penalty: f64,
        x_start: Point3,
        x_end: Point3,
        users: Vec<Vec<Point2>>,
        mslt: Vec<Vec<f64>>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        let env = Environment::new(params, &q_region, &s_region)?;
        let n = users.len();
        let t_count = users.first().map_or(0, Vec::len);
        let inst = Instance {
            env,
            s_region,
            q_region,
            n,
            t_count,
            interval_len,
            penalty,
            x_start,
            x_end,
            users,
            mslt,
            weights,
            gen_meta: None,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_count == 0 {
            return Err(Error::invalid("t_count", "must be at least 1"));
        }
        if self.users.len() != self.n {
            return Err(Error::invalid("users", format!("expected {} rows, found {}", self.n, self.users.len())));
        }
        if self.mslt.len() != self.n {
            return Err(Error::invalid("mslt", format!("expected {} rows, found {}", self.n, self.mslt.len())));
        }
        if self.weights.len() != self.n {
            return Err(Error::invalid("weights", format!("expected {} entries, found {}", self.n, self.weights.len())));
        }
        if !(self.penalty >= 0.0 && self.penalty.is_finite()) {
            return Err(Error::invalid("penalty", "must be finite and non-negative"));
        }
        if !(self.interval_len > 0.0 && self.interval_len.is_finite()) {
            return Err(Error::invalid("interval_len", "must be positive"));
        }
        if !self.q_region.contains(self.x_start) {
            return Err(Error::invalid("x_start", "must lie in q_region"));
        }
        if !self.q_region.contains(self.x_end) {
            return Err(Error::invalid("x_end", "must lie in q_region"));
        }
        for i in 0..self.n {
            if self.users[i].len() != self.t_count {
                return Err(Error::invalid(format!("users[{i}]"), format!("expected {} intervals", self.t_count)));
            }
            if self.mslt[i].len() != self.t_count {
                return Err(Error::invalid(format!("mslt[{i}]"), format!("expected {} intervals", self.t_count)));
            }
            let w = self.weights[i];
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::invalid(format!("weights[{i}]"), format!("{w} outside [0, 1]")));
            }
            for t in 0..self.t_count {
                if !self.s_region.contains(self.users[i][t]) {
                    return Err(Error::invalid(format!("users[{i}][{t}]"), "outside s_region"));
                }
                let d = self.mslt[i][t];
                if !(d > self.env.l_lower && d.is_finite()) {
                    return Err(Error::invalid(
                        format!("mslt[{i}][{t}]"),
                        format!("{d} dB must exceed L- = {} dB", self.env.l_lower),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn horizon(&self) -> f64 {
        self.interval_len * self.t_count as f64
    }

    /// The trajectory that hovers at `x_start` throughout.
    pub fn stationary_trajectory(&self) -> Trajectory {
        Trajectory::new(vec![self.x_start; self.t_count])
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serializes")
    }

    pub fn from_json(json: &str) -> Result<Self> {
        Self::from_json_at(json, "<string>")
    }

    fn from_json_at(json: &str, path: &str) -> Result<Self> {
        let raw: InstanceFile = serde_json::from_str(json).map_err(|source| Error::Json {
            path: path.to_string(),
            source,
        })?;
        let env = Environment::new(raw.env, &raw.q_region, &raw.s_region)?;
        let inst = Instance {
            env,
            s_region: raw.s_region,
            q_region: raw.q_region,
            n: raw.n,
            t_count: raw.t_count,
            interval_len: raw.interval_len,
            penalty: raw.penalty,
            x_start: raw.x_start,
            x_end: raw.x_end,
            users: raw.users,
            mslt: raw.mslt,
            weights: raw.weights,
            gen_meta: raw.gen_meta,
        };
        inst.validate()?;
        Ok(inst)
    }
}

/// Draws a synthetic instance. Deterministic in `config.field.seed`.
pub fn generate_instance(config: &GenConfig) -> Result<Instance> {
    config.validate()?;
    let env = Environment::new(config.env, &config.q_region, &config.s_region)?;
    let field = &config.field;
    let demand = DemandField::new(field, config.s_region, config.interval_len);
    let cells = cells(&config.s_region, config.grid_cells);
    let n = cells.len();
    let t_count = config.t_count;
    let gl = GaussLegendre::new(CELL_RULE_NODES);

    let mut users = vec![Vec::with_capacity(t_count); n];
    let mut mslt = vec![Vec::with_capacity(t_count); n];
    let mut mass = vec![vec![0.0; t_count]; n];
    let floor = env.l_lower + MSLT_FLOOR_MARGIN;

    for (i, cell) in cells.iter().enumerate() {
        for t in 0..t_count {
            let mut rng = ChaCha8Rng::seed_from_u64(field.seed);
            rng.set_stream(((i as u64) << 32) | t as u64);
            let x = rng.random_range(cell.x_min..=cell.x_max);
            let y = rng.random_range(cell.y_min..=cell.y_max);
            users[i].push(Point2::new(x, y));

            let tau = demand.interval_median(t);
            mass[i][t] = gl.integrate_rect(cell, |p| demand.density_w(p, tau)).max(0.0);
            let avg_d = gl.integrate_rect(cell, |p| demand.density_d(p, tau)) / cell.area();
            mslt[i].push(avg_d.max(floor));
        }
    }

    let peak = mass.iter().flatten().copied().fold(0.0_f64, f64::max);
    let weights = mass
        .iter()
        .map(|row| {
            let avg = row.iter().sum::<f64>() / t_count as f64;
            if peak > 0.0 {
                (avg / peak).clamp(0.0, 1.0)
            } else {
                0.0
            }
        })
        .collect();

    // The field lives on normalized coordinates, so the integral gives a
    // penalty per unit of normalized distance; convert to per meter.
    let penalty = penalty_from_field(field, &config.s_region, config.horizon(), config.interval_len)
        / config.s_region.side();

    let x0 = config.q_region.floor_center();
    let inst = Instance {
        env,
        s_region: config.s_region,
        q_region: config.q_region,
        n,
        t_count,
        interval_len: config.interval_len,
        penalty,
        x_start: x0,
        x_end: x0,
        users,
        mslt,
        weights,
        gen_meta: Some(GenMeta {
            seed: field.seed,
            field: field.clone(),
        }),
    };
    inst.validate()?;
    Ok(inst)
}

pub fn read_instance(path: impl AsRef<Path>) -> Result<Instance> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    Instance::from_json_at(&text, &path.display().to_string())
}

pub fn write_instance(instance: &Instance, path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &(instance.to_json() + "\n"))
}

/// Writes `t,x,y,h,objective_contribution` rows. Row `t` carries the
/// interval's covered weight minus the penalty of the hop into it; the last
/// row also carries the return hop, so the column sums to the objective.
pub fn write_trajectory(traj: &Trajectory, instance: &Instance, path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &trajectory_csv(traj, instance))
}

pub fn trajectory_csv(traj: &Trajectory, instance: &Instance) -> String {
    let breakdown = objective::evaluate(traj, instance);
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    wtr.write_record(["t", "x", "y", "h", "objective_contribution"])
        .expect("in-memory write");
    let t_count = traj.points.len();
    for (t, p) in traj.points.iter().enumerate() {
        let prev = if t == 0 { instance.x_start } else { traj.points[t - 1] };
        let mut contribution = breakdown.interval_coverage[t] - instance.penalty * p.distance(prev);
        if t + 1 == t_count {
            contribution -= instance.penalty * instance.x_end.distance(*p);
        }
        wtr.write_record([
            (t + 1).to_string(),
            fmt_sig(p.x, 9),
            fmt_sig(p.y, 9),
            fmt_sig(p.z, 9),
            fmt_sig(contribution, 9),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(wtr.into_inner().expect("flush")).expect("ascii output")
}

pub fn read_trajectory(path: impl AsRef<Path>) -> Result<Trajectory> {
    let path = path.as_ref();
    let shown = path.display().to_string();
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Csv {
        path: shown.clone(),
        reason: e.to_string(),
    })?;
    let mut points = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Csv {
            path: shown.clone(),
            reason: e.to_string(),
        })?;
        let field = |k: usize, name: &str| -> Result<f64> {
            rec.get(k)
                .ok_or_else(|| Error::Csv {
                    path: shown.clone(),
                    reason: format!("row {}: missing column {name}", row + 1),
                })?
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::Csv {
                    path: shown.clone(),
                    reason: format!("row {}: column {name}: {e}", row + 1),
                })
        };
        points.push(Point3::new(field(1, "x")?, field(2, "y")?, field(3, "h")?));
    }
    Ok(Trajectory::new(points))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Formats with `digits` significant digits, like C's `%.*g`.
pub fn fmt_sig(v: f64, digits: usize) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{:.*e}", digits - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -5 || exp >= digits as i32 {
        let m = trim_zeros(mantissa);
        format!("{m}e{exp}")
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, v)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn homogeneous(t_count: usize) -> DensityField {
        DensityField::new(0.5, 105.0, [0.0; 4], Trend::Increase, Trend::Decrease, t_count, 7)
    }

    #[test]
    fn temporal_examples() {
        for trend in [Trend::Increase, Trend::Decrease, Trend::Random] {
            let f = DensityField::new(0.5, 105.0, [0.0; 4], trend, trend, 10, 3);
            for t in [0.0, 0.3, 4.0, 9.9] {
                assert_eq!(temporal_factor(trend, t, &f, 1.0), 1.0);
            }
        }
        let f = DensityField::new(0.5, 105.0, [0.0, 0.0, 0.2, 0.0], Trend::Increase, Trend::Decrease, 10, 3);
        assert_relative_eq!(temporal_factor(Trend::Increase, 5.0, &f, 1.0), 1.0 + 2f64.ln(), epsilon = 1e-12);
        assert_relative_eq!(temporal_factor(Trend::Increase, 5.0, &f, 1.0), 1.6931, epsilon = 1e-4);
        assert_relative_eq!(temporal_factor(Trend::Decrease, 5.0, &f, 1.0), 0.3679, epsilon = 1e-4);
    }

    #[test]
    fn random_trend_is_piecewise_with_interval_breakpoints() {
        let f = DensityField::new(0.5, 105.0, [0.0, 0.0, 0.3, 0.0], Trend::Random, Trend::Random, 4, 11);
        let gamma = 0.25;
        for k in 0..4 {
            let a = k as f64 * gamma + 0.01;
            let b = (k + 1) as f64 * gamma - 0.01;
            let slope = (temporal_factor(Trend::Random, b, &f, gamma) - temporal_factor(Trend::Random, a, &f, gamma)) / (b - a);
            assert_relative_eq!(slope, 0.3 * f.random_steps[k], epsilon = 1e-9);
        }
        assert_eq!(random_steps(11, 4), f.random_steps);
        assert_eq!(&random_steps(11, 9)[..4], &f.random_steps[..]);
    }

    #[test]
    fn monotone_trends() {
        let f = DensityField::new(0.5, 105.0, [0.0, 0.0, 0.4, 0.0], Trend::Increase, Trend::Decrease, 5, 1);
        let ts: Vec<f64> = (0..100).map(|k| k as f64 * 0.05).collect();
        for w in ts.windows(2) {
            assert!(temporal_factor(Trend::Increase, w[0], &f, 1.0) <= temporal_factor(Trend::Increase, w[1], &f, 1.0));
            assert!(temporal_factor(Trend::Decrease, w[0], &f, 1.0) >= temporal_factor(Trend::Decrease, w[1], &f, 1.0));
        }
    }

    #[test]
    fn density_examples() {
        let s = Rect2::new(0.0, 1.0, 0.0, 1.0);
        let mut f = DensityField::new(0.5, 105.0, [0.2, 0.2, 0.0, 0.0], Trend::Increase, Trend::Increase, 3, 1);
        let field = DemandField::new(&f, s, 1.0);
        let y2 = Point2::new(2.0, 0.0);
        assert_relative_eq!(field.density_w(y2, 0.7), 0.6, epsilon = 1e-12);
        let y1 = Point2::new(0.6, 0.8);
        assert_relative_eq!(field.density_d(y1, 0.7), 84.0, epsilon = 1e-9);
        f.delta_w = 0.0;
        let field = DemandField::new(&f, s, 1.0);
        assert_eq!(field.density_w(Point2::new(0.3, 0.9), 0.2), 0.5);
    }

    #[test]
    fn normalized_coordinates_use_region_side() {
        let f = DensityField::new(0.5, 105.0, [0.2, 0.2, 0.0, 0.0], Trend::Increase, Trend::Increase, 3, 1);
        let field = DemandField::new(&f, Rect2::new(0.0, 1500.0, 0.0, 1500.0), 1.0);
        // (900, 1200) has normalized norm exactly 1.
        assert_relative_eq!(field.density_d(Point2::new(900.0, 1200.0), 0.0), 84.0, epsilon = 1e-9);
    }

    #[test]
    fn penalty_examples() {
        let s = Rect2::new(0.0, 1500.0, 0.0, 1500.0);
        let f = homogeneous(10);
        assert_relative_eq!(penalty_from_field(&f, &s, 10.0, 1.0), 0.5, epsilon = 1e-12);
        let mut g = f.clone();
        g.delta_p = 0.2;
        assert_relative_eq!(penalty_from_field(&g, &s, 10.0, 1.0), 0.6, epsilon = 1e-12);
    }

    #[test]
    fn penalty_increase_trend_matches_trapezoid_oracle() {
        let s = Rect2::new(0.0, 1500.0, 0.0, 1500.0);
        let f = DensityField::new(0.5, 105.0, [0.0, 0.0, 0.2, 0.0], Trend::Increase, Trend::Increase, 10, 1);
        let steps = 100_000;
        let h = 10.0 / steps as f64;
        let upsilon = |t: f64| 1.0 + (1.0 + 0.2 * t).ln();
        let trap: f64 = (0..steps)
            .map(|k| 0.5 * h * (upsilon(k as f64 * h) + upsilon((k + 1) as f64 * h)))
            .sum();
        let oracle = 0.5 * trap / 10.0;
        assert_relative_eq!(penalty_from_field(&f, &s, 10.0, 1.0), oracle, epsilon = 1e-8);
    }

    #[test]
    fn penalty_random_trend_matches_trapezoid_oracle() {
        let s = Rect2::new(0.0, 1500.0, 0.0, 1500.0);
        let f = DensityField::new(0.5, 105.0, [0.3, 0.0, 0.2, 0.1], Trend::Random, Trend::Increase, 10, 5);
        let demand = DemandField::new(&f, s, 0.1);
        let nt = 2000;
        let ns = 300;
        // Midpoint rule on a separable integrand, each factor independently.
        let spatial: f64 = (0..ns)
            .flat_map(|b| (0..ns).map(move |c| (b, c)))
            .map(|(b, c)| {
                let y = Point2::new((b as f64 + 0.5) * 1500.0 / ns as f64, (c as f64 + 0.5) * 1500.0 / ns as f64);
                1.0 + 0.3 * demand.spatial_wave(y)
            })
            .sum::<f64>()
            / (ns * ns) as f64;
        let temporal: f64 = (0..nt)
            .map(|a| temporal_factor(Trend::Random, (a as f64 + 0.5) / nt as f64, &f, 0.1))
            .sum::<f64>()
            / nt as f64;
        let oracle = 1.1 * 0.5 * spatial * temporal;
        assert_relative_eq!(penalty_from_field(&f, &s, 1.0, 0.1), oracle, epsilon = 1e-5);
    }

    #[test]
    fn cell_layout_is_most_square() {
        assert_eq!(cell_layout(4), (2, 2));
        assert_eq!(cell_layout(20), (4, 5));
        assert_eq!(cell_layout(100), (10, 10));
        assert_eq!(cell_layout(7), (1, 7));
        assert_eq!(cell_layout(1), (1, 1));
    }

    #[test]
    fn four_cells_contain_their_users() {
        let cfg = GenConfig::reference(4, DensityField::reference(Trend::Random, Trend::Increase, 10, 42));
        let inst = generate_instance(&cfg).unwrap();
        assert_eq!(inst.n, 4);
        let cells = cells(&inst.s_region, 4);
        for (i, cell) in cells.iter().enumerate() {
            assert_relative_eq!(cell.width(), 750.0);
            for t in 0..inst.t_count {
                assert!(cell.contains(inst.users[i][t]));
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = GenConfig::reference(9, DensityField::reference(Trend::Random, Trend::Random, 10, 99));
        let a = generate_instance(&cfg).unwrap().to_json();
        let b = generate_instance(&cfg).unwrap().to_json();
        assert_eq!(a, b);
        let mut other = cfg.clone();
        other.field = DensityField::reference(Trend::Random, Trend::Random, 10, 100);
        assert_ne!(a, generate_instance(&other).unwrap().to_json());
    }

    #[test]
    fn earlier_draws_survive_more_intervals() {
        let short = GenConfig::reference(4, DensityField::reference(Trend::Increase, Trend::Increase, 3, 5));
        let mut long = short.clone();
        long.t_count = 6;
        long.field.random_steps = random_steps(5, 6);
        let a = generate_instance(&short).unwrap();
        let b = generate_instance(&long).unwrap();
        for i in 0..4 {
            assert_eq!(&b.users[i][..3], &a.users[i][..]);
        }
    }

    #[test]
    fn homogeneous_instance_is_flat() {
        let cfg = GenConfig::reference(9, homogeneous(10));
        let inst = generate_instance(&cfg).unwrap();
        for i in 0..inst.n {
            assert_relative_eq!(inst.weights[i], 1.0, epsilon = 1e-12);
            for t in 0..inst.t_count {
                assert_relative_eq!(inst.mslt[i][t], 105.0, epsilon = 1e-10);
            }
        }
        assert_relative_eq!(inst.penalty, 0.5 / 1500.0, epsilon = 1e-15);
        assert_eq!(inst.x_start, Point3::new(750.0, 750.0, 50.0));
    }

    #[test]
    fn mslt_floor_applies_below_minimum_loss() {
        let mut f = DensityField::new(0.5, 105.0, [0.2, 0.8, 1.0, 0.0], Trend::Decrease, Trend::Decrease, 10, 3);
        f.delta_t = 1.0;
        let cfg = GenConfig::reference(16, f);
        let inst = generate_instance(&cfg).unwrap();
        let floor = inst.env.l_lower + MSLT_FLOOR_MARGIN;
        assert!(inst.mslt.iter().flatten().all(|&d| d >= floor));
        assert!(inst.mslt.iter().flatten().any(|&d| d == floor));
    }

    #[test]
    fn json_round_trip() {
        let cfg = GenConfig::reference(6, DensityField::reference(Trend::Decrease, Trend::Random, 10, 8));
        let inst = generate_instance(&cfg).unwrap();
        let back = Instance::from_json(&inst.to_json()).unwrap();
        assert_eq!(back, inst);
    }

    #[test]
    fn invalid_files_report_field_path() {
        let cfg = GenConfig::reference(4, homogeneous(3));
        let inst = generate_instance(&cfg).unwrap();
        let mut v: serde_json::Value = serde_json::from_str(&inst.to_json()).unwrap();
        v["mslt"][2][1] = serde_json::json!(10.0);
        let err = Instance::from_json(&v.to_string()).unwrap_err();
        assert!(err.to_string().contains("mslt[2][1]"), "{err}");
        v["mslt"][2][1] = serde_json::json!(100.0);
        v["weights"][3] = serde_json::json!(1.5);
        let err = Instance::from_json(&v.to_string()).unwrap_err();
        assert!(err.to_string().contains("weights[3]"), "{err}");
        assert!(matches!(Instance::from_json("{ not json"), Err(Error::Json { .. })));
    }

    #[test]
    fn sig_digit_formatting() {
        assert_eq!(fmt_sig(750.0, 9), "750");
        assert_eq!(fmt_sig(1.0 / 3.0, 9), "0.333333333");
        assert_eq!(fmt_sig(-123456.789012, 9), "-123456.789");
        assert_eq!(fmt_sig(1.5e-7, 9), "1.5e-7");
        assert_eq!(fmt_sig(2.0e12, 9), "2e12");
        assert_eq!(fmt_sig(0.0, 9), "0");
    }
}
