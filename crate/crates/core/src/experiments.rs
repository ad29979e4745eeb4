//! Comparison runs: warm-started LDA, free versus fixed altitude, and the
//! one-at-a-time heterogeneity sweep.

use serde::{Deserialize, Serialize};

use crate::ca::{self, CaConfig};
use crate::error::Result;
use crate::instance::{generate_instance, DensityField, GenConfig, Instance, Trend};
use crate::lda::{self, LdaConfig};
use crate::oracle::{self, AltitudeMode, GridSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarmStartComparison {
    pub default_lb0: f64,
    pub warm_lb0: f64,
    pub default_best_lb: f64,
    pub warm_best_lb: f64,
    pub default_gap: f64,
    pub warm_gap: f64,
    pub ca_true_objective: f64,
}

/// Runs the LDA from the default start and again with the CA trajectory
/// offered as an extra first-iteration start.
pub fn warm_start(instance: &Instance, lda_cfg: &LdaConfig, ca_cfg: &CaConfig) -> Result<WarmStartComparison> {
    let ca_sol = ca::solve_ca(instance, ca_cfg)?;
    let plain = lda::run_lda(instance, lda_cfg)?;
    let warm = lda::run_lda_warm(instance, lda_cfg, Some(&ca_sol.trajectory))?;
    Ok(WarmStartComparison {
        default_lb0: plain.lb_trace[0],
        warm_lb0: warm.lb_trace[0],
        default_best_lb: plain.best_lb,
        warm_best_lb: warm.best_lb,
        default_gap: plain.gap,
        warm_gap: warm.gap,
        ca_true_objective: ca_sol.true_objective,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AltitudeComparison {
    pub free: f64,
    pub fixed: f64,
    pub fixed_layer: usize,
    pub fixed_altitude_m: f64,
    /// `(free − fixed) / |fixed|` in percent.
    pub gain_pct: f64,
}

pub fn altitude(instance: &Instance, grid: GridSpec) -> Result<AltitudeComparison> {
    let free = oracle::dp_solve(instance, grid, AltitudeMode::Free)?;
    let fixed = oracle::dp_solve(instance, grid, AltitudeMode::BestLayer)?;
    let layer = fixed.layer.unwrap_or(0);
    Ok(AltitudeComparison {
        free: free.optimum,
        fixed: fixed.optimum,
        fixed_layer: layer,
        fixed_altitude_m: grid.altitudes(&instance.q_region)[layer],
        gain_pct: 100.0 * (free.optimum - fixed.optimum) / fixed.optimum.abs().max(1e-12),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeterogeneityParam {
    DeltaW,
    DeltaD,
    DeltaT,
    DeltaP,
}

impl HeterogeneityParam {
    pub const ALL: [HeterogeneityParam; 4] = [Self::DeltaW, Self::DeltaD, Self::DeltaT, Self::DeltaP];

    pub fn label(self) -> &'static str {
        match self {
            Self::DeltaW => "delta_w",
            Self::DeltaD => "delta_d",
            Self::DeltaT => "delta_t",
            Self::DeltaP => "delta_p",
        }
    }

    fn apply(self, field: &mut DensityField, level: f64) {
        match self {
            Self::DeltaW => field.delta_w = level,
            Self::DeltaD => field.delta_d = level,
            Self::DeltaT => field.delta_t = level,
            Self::DeltaP => field.delta_p = level,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub grid_cells: usize,
    pub t_count: usize,
    pub levels: Vec<f64>,
    pub seeds: Vec<u64>,
    pub w_bar: f64,
    pub d_bar: f64,
    pub trend_w: Trend,
    pub trend_d: Trend,
    pub ca: CaConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            grid_cells: 20,
            t_count: 10,
            levels: vec![0.0, 0.2, 0.4, 0.6, 0.8],
            seeds: (0..5).collect(),
            w_bar: 0.5,
            d_bar: 105.0,
            trend_w: Trend::Increase,
            trend_d: Trend::Increase,
            ca: CaConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub parameter: HeterogeneityParam,
    pub level: f64,
    /// Mean CA objective over seeds.
    pub mean_objective: f64,
    /// `1 + (mean − base) / |base|`, i.e. `mean / base` for a positive
    /// homogeneous mean `base`.
    pub normalized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub baseline: f64,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    /// Mean `|normalized − 1|` of one parameter over levels `≥ min_level`.
    pub fn mean_deviation(&self, param: HeterogeneityParam, min_level: f64) -> f64 {
        let devs: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.parameter == param && r.level >= min_level - 1e-12)
            .map(|r| (r.normalized - 1.0).abs())
            .collect();
        if devs.is_empty() {
            0.0
        } else {
            devs.iter().sum::<f64>() / devs.len() as f64
        }
    }
}

fn sweep_instance(cfg: &SweepConfig, param: Option<(HeterogeneityParam, f64)>, seed: u64) -> Result<Instance> {
    let mut field = DensityField::new(cfg.w_bar, cfg.d_bar, [0.0; 4], cfg.trend_w, cfg.trend_d, cfg.t_count, seed);
    if let Some((p, level)) = param {
        p.apply(&mut field, level);
    }
    generate_instance(&GenConfig::reference(cfg.grid_cells, field))
}

fn mean_ca(cfg: &SweepConfig, param: Option<(HeterogeneityParam, f64)>) -> Result<f64> {
    let mut total = 0.0;
    for &seed in &cfg.seeds {
        let inst = sweep_instance(cfg, param, seed)?;
        let ca_cfg = CaConfig { seed, ..cfg.ca.clone() };
        total += ca::solve_ca(&inst, &ca_cfg)?.true_objective;
    }
    Ok(total / cfg.seeds.len().max(1) as f64)
}

/// Changes one control at a time with the others at zero and reports the
/// CA objective relative to the homogeneous case.
pub fn heterogeneity_sweep(cfg: &SweepConfig) -> Result<SweepReport> {
    let baseline = mean_ca(cfg, None)?;
    let mut rows = Vec::new();
    for param in HeterogeneityParam::ALL {
        for &level in &cfg.levels {
            let mean = if level == 0.0 { baseline } else { mean_ca(cfg, Some((param, level)))? };
            rows.push(SweepRow {
                parameter: param,
                level,
                mean_objective: mean,
                normalized: 1.0 + (mean - baseline) / baseline.abs().max(1e-12),
            });
        }
    }
    Ok(SweepReport { baseline, rows })
}
