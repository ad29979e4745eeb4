//! Command-line front end. `run` parses arguments, executes one command and
//! returns the process exit code.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::ca::{self, CaConfig};
use crate::error::{Error, Result};
use crate::experiments::{self, SweepConfig, SweepReport};
use crate::instance::{self, generate_instance, DensityField, GenConfig, Instance, Trend};
use crate::lda::{self, LdaBackend, LdaConfig};
use crate::objective;
use crate::oracle::{self, AltitudeMode, GridSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_BUDGET: i32 = 4;

/// Exit code for a library error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Budget(_) => EXIT_BUDGET,
        Error::Invalid { .. }
        | Error::Io { .. }
        | Error::Json { .. }
        | Error::Csv { .. }
        | Error::ThresholdBelowMinimumLoss { .. }
        | Error::DegenerateLossBounds { .. } => EXIT_CONFIG,
        Error::CoincidentPoints { .. } | Error::NonPositiveAltitude(_) => EXIT_SOLVER,
    }
}

/// Generator settings as they appear in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenSettings {
    pub cells: usize,
    pub t_count: usize,
    pub w_bar: f64,
    pub d_bar: f64,
    pub delta_w: f64,
    pub delta_d: f64,
    pub delta_t: f64,
    pub delta_p: f64,
    pub trend_w: Trend,
    pub trend_d: Trend,
}

impl Default for GenSettings {
    fn default() -> Self {
        GenSettings {
            cells: 20,
            t_count: 10,
            w_bar: 0.5,
            d_bar: 105.0,
            delta_w: 0.2,
            delta_d: 0.2,
            delta_t: 0.2,
            delta_p: 0.2,
            trend_w: Trend::Increase,
            trend_d: Trend::Increase,
        }
    }
}

impl GenSettings {
    pub fn gen_config(&self, seed: u64) -> GenConfig {
        let field = DensityField::new(
            self.w_bar,
            self.d_bar,
            [self.delta_w, self.delta_d, self.delta_t, self.delta_p],
            self.trend_w,
            self.trend_d,
            self.t_count,
            seed,
        );
        GenConfig::reference(self.cells, field)
    }
}

/// Fully resolved settings for one run. Loaded from `--config` and then
/// overridden by flags; embedded in every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub gen: GenSettings,
    pub lda: LdaConfig,
    pub ca: CaConfig,
    pub grid: GridSpec,
    pub altitude: AltitudeMode,
    pub sweep: SweepConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            gen: GenSettings::default(),
            lda: LdaConfig::default(),
            ca: CaConfig::default(),
            grid: GridSpec::new(7, 7, 4),
            altitude: AltitudeMode::Free,
            sweep: SweepConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.gen.cells == 0 {
            return Err(Error::invalid("gen.cells", "must be at least 1"));
        }
        if self.gen.t_count == 0 {
            return Err(Error::invalid("gen.t_count", "must be at least 1"));
        }
        if self.lda.max_iters == 0 {
            return Err(Error::invalid("lda.max_iters", "must be at least 1"));
        }
        if self.ca.max_total_iters == 0 {
            return Err(Error::invalid("ca.max_total_iters", "must be at least 1"));
        }
        if self.sweep.seeds.is_empty() {
            return Err(Error::invalid("sweep.seeds", "must not be empty"));
        }
        self.grid.validate()?;
        self.lda.validate()?;
        self.ca.validate()
    }
}

#[derive(Debug, Parser)]
#[command(name = "uav-mclp", version, about = "Dynamic 3-D maximal covering location for one UAV base station")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a seeded instance file.
    Gen(GenArgs),
    /// Run a solver on an instance.
    Solve(SolveArgs),
    /// Evaluate a trajectory CSV on an instance.
    Eval(EvalArgs),
    /// Exact grid optimum by dynamic programming.
    Oracle(OracleArgs),
    /// Warm-start, altitude, or heterogeneity comparison.
    Compare(CompareArgs),
    /// Heterogeneity sweep (same as `compare --mode heterogeneity`).
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverKind {
    Lda,
    Ca,
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendKind {
    Continuous,
    Grid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CompareMode {
    WarmStart,
    Altitude,
    Heterogeneity,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON run config; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Report output path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct GenArgs {
    #[command(flatten)]
    pub common: Common,
    /// Number of grid cells (one user each).
    #[arg(long)]
    pub cells: Option<usize>,
    #[arg(long)]
    pub t_count: Option<usize>,
    #[arg(long)]
    pub w_bar: Option<f64>,
    #[arg(long)]
    pub d_bar: Option<f64>,
    #[arg(long)]
    pub delta_w: Option<f64>,
    #[arg(long)]
    pub delta_d: Option<f64>,
    #[arg(long)]
    pub delta_t: Option<f64>,
    #[arg(long)]
    pub delta_p: Option<f64>,
    /// Sets all four heterogeneity controls before the individual flags apply.
    #[arg(long)]
    pub delta_all: Option<f64>,
    #[arg(long)]
    pub trend_w: Option<Trend>,
    #[arg(long)]
    pub trend_d: Option<Trend>,
}

#[derive(Debug, Clone, Args)]
pub struct SolverFlags {
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub time_budget_s: Option<f64>,
    /// Oracle lattice as `nx,ny,nh`.
    #[arg(long)]
    pub grid: Option<GridSpec>,
    /// `best` or a zero-based altitude layer index.
    #[arg(long)]
    pub fixed_altitude: Option<String>,
    #[arg(long, value_enum)]
    pub backend: Option<BackendKind>,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long, value_enum, default_value = "lda")]
    pub solver: SolverKind,
    /// Trajectory CSV output path.
    #[arg(long)]
    pub trajectory: Option<PathBuf>,
    #[command(flatten)]
    pub flags: SolverFlags,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long)]
    pub trajectory: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long)]
    pub trajectory: Option<PathBuf>,
    /// Enumerate every grid trajectory instead of running the DP.
    #[arg(long)]
    pub enumerate: bool,
    #[command(flatten)]
    pub flags: SolverFlags,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum)]
    pub mode: CompareMode,
    #[arg(long)]
    pub instance: Option<PathBuf>,
    #[command(flatten)]
    pub flags: SolverFlags,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    /// Normalized-objective table as CSV.
    #[arg(long)]
    pub table: Option<PathBuf>,
    #[arg(long)]
    pub max_iters: Option<usize>,
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
                path: path.display().to_string(),
                source,
            })?;
            serde_json::from_str(&text).map_err(|source| Error::Json {
                path: path.display().to_string(),
                source,
            })?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
        cfg.ca.seed = seed;
        let n = cfg.sweep.seeds.len() as u64;
        cfg.sweep.seeds = (seed..seed + n.max(1)).collect();
    }
    Ok(cfg)
}

fn parse_altitude(s: &str) -> Result<AltitudeMode> {
    match s {
        "best" => Ok(AltitudeMode::BestLayer),
        "free" => Ok(AltitudeMode::Free),
        _ => s
            .parse()
            .map(AltitudeMode::Layer)
            .map_err(|_| Error::invalid("fixed_altitude", format!("expected 'best' or a layer index, got '{s}'"))),
    }
}

fn apply_solver_flags(cfg: &mut RunConfig, flags: &SolverFlags) -> Result<()> {
    if let Some(k) = flags.max_iters {
        cfg.lda.max_iters = k;
        cfg.ca.max_total_iters = k;
    }
    if let Some(b) = flags.time_budget_s {
        if !(b > 0.0) {
            return Err(Error::invalid("time_budget_s", "must be positive"));
        }
        cfg.lda.time_budget_s = Some(b);
    }
    if let Some(g) = flags.grid {
        cfg.grid = g;
        if let LdaBackend::Grid(_) = cfg.lda.backend {
            cfg.lda.backend = LdaBackend::Grid(g);
        }
    }
    if let Some(s) = &flags.fixed_altitude {
        cfg.altitude = parse_altitude(s)?;
    }
    match flags.backend {
        Some(BackendKind::Grid) => cfg.lda.backend = LdaBackend::Grid(cfg.grid),
        Some(BackendKind::Continuous) => cfg.lda.backend = LdaBackend::Continuous,
        None => {}
    }
    Ok(())
}

fn emit(out: Option<&Path>, report: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(report).expect("reports serialize") + "\n";
    match out {
        Some(path) => instance::write_text(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn config_value(cfg: &RunConfig) -> Value {
    serde_json::to_value(cfg).expect("config serializes")
}

fn cmd_gen(args: &GenArgs) -> Result<()> {
    let mut cfg = load_config(&args.common)?;
    let g = &mut cfg.gen;
    if let Some(v) = args.delta_all {
        g.delta_w = v;
        g.delta_d = v;
        g.delta_t = v;
        g.delta_p = v;
    }
    macro_rules! set {
        ($($field:ident),*) => { $(if let Some(v) = args.$field { g.$field = v; })* };
    }
    set!(cells, t_count, w_bar, d_bar, delta_w, delta_d, delta_t, delta_p, trend_w, trend_d);
    cfg.validate()?;
    let out = args
        .common
        .out
        .as_deref()
        .ok_or_else(|| Error::invalid("out", "gen needs an output path"))?;
    let inst = generate_instance(&cfg.gen.gen_config(cfg.seed))?;
    instance::write_instance(&inst, out)?;
    println!(
        "n={} T={} p={} trend_w={} trend_d={} seed={}",
        inst.n,
        inst.t_count,
        instance::fmt_sig(inst.penalty, 6),
        cfg.gen.trend_w.label(),
        cfg.gen.trend_d.label(),
        cfg.seed
    );
    Ok(())
}

fn oracle_run(inst: &Instance, cfg: &RunConfig, enumerate: bool) -> Result<oracle::OracleResult> {
    if enumerate {
        oracle::enumerate_solve(inst, cfg.grid)
    } else {
        oracle::dp_solve(inst, cfg.grid, cfg.altitude)
    }
}

fn cmd_solve(args: &SolveArgs) -> Result<()> {
    let mut cfg = load_config(&args.common)?;
    apply_solver_flags(&mut cfg, &args.flags)?;
    cfg.validate()?;
    let inst = instance::read_instance(&args.instance)?;
    let clock = Instant::now();
    let (result, trajectory, termination, objective) = match args.solver {
        SolverKind::Lda => {
            let r = lda::run_lda(&inst, &cfg.lda)?;
            let t = serde_json::to_value(r.termination).expect("serializes");
            let v = objective::objective_value(&r.incumbent, &inst);
            (serde_json::to_value(&r).expect("serializes"), r.incumbent, t, v)
        }
        SolverKind::Ca => {
            let s = ca::solve_ca(&inst, &cfg.ca)?;
            let t = if s.iterations >= cfg.ca.max_total_iters {
                "iteration_cap"
            } else {
                "non_improving_limit"
            };
            let v = s.true_objective;
            (serde_json::to_value(&s).expect("serializes"), s.trajectory, json!(t), v)
        }
        SolverKind::Oracle => {
            let r = oracle_run(&inst, &cfg, false)?;
            let v = r.optimum;
            (serde_json::to_value(&r).expect("serializes"), r.trajectory, json!("exact"), v)
        }
    };
    let wall = clock.elapsed().as_secs_f64();
    if let Some(path) = &args.trajectory {
        instance::write_trajectory(&trajectory, &inst, path)?;
    }
    let report = json!({
        "command": "solve",
        "solver": format!("{:?}", args.solver).to_lowercase(),
        "instance": args.instance.display().to_string(),
        "config": config_value(&cfg),
        "objective": objective,
        "termination": termination,
        "wall_time_s": wall,
        "result": result,
    });
    emit(args.common.out.as_deref(), &report)
}

fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let cfg = load_config(&args.common)?;
    let inst = instance::read_instance(&args.instance)?;
    let traj = instance::read_trajectory(&args.trajectory)?;
    traj.validate(&inst.q_region, inst.t_count)?;
    let b = objective::evaluate(&traj, &inst);
    let report = json!({
        "command": "eval",
        "instance": args.instance.display().to_string(),
        "trajectory": args.trajectory.display().to_string(),
        "config": config_value(&cfg),
        "breakdown": b,
    });
    emit(args.common.out.as_deref(), &report)
}

fn cmd_oracle(args: &OracleArgs) -> Result<()> {
    let mut cfg = load_config(&args.common)?;
    apply_solver_flags(&mut cfg, &args.flags)?;
    cfg.validate()?;
    let inst = instance::read_instance(&args.instance)?;
    let clock = Instant::now();
    let r = oracle_run(&inst, &cfg, args.enumerate)?;
    let wall = clock.elapsed().as_secs_f64();
    if let Some(path) = &args.trajectory {
        instance::write_trajectory(&r.trajectory, &inst, path)?;
    }
    let report = json!({
        "command": "oracle",
        "method": if args.enumerate { "enumerate" } else { "dp" },
        "instance": args.instance.display().to_string(),
        "config": config_value(&cfg),
        "wall_time_s": wall,
        "result": r,
    });
    emit(args.common.out.as_deref(), &report)
}

fn sweep_table(report: &SweepReport) -> String {
    let mut s = String::from("parameter,level,mean_objective,normalized\n");
    for r in &report.rows {
        s.push_str(&format!(
            "{},{},{},{}\n",
            r.parameter.label(),
            r.level,
            instance::fmt_sig(r.mean_objective, 10),
            instance::fmt_sig(r.normalized, 10)
        ));
    }
    s
}

fn run_sweep(cfg: &RunConfig, out: Option<&Path>, table: Option<&Path>, command: &str) -> Result<()> {
    let mut sweep = cfg.sweep.clone();
    sweep.ca = cfg.ca.clone();
    let clock = Instant::now();
    let r = experiments::heterogeneity_sweep(&sweep)?;
    let wall = clock.elapsed().as_secs_f64();
    let text = sweep_table(&r);
    match table {
        Some(path) => instance::write_text(path, &text)?,
        None => eprint!("{text}"),
    }
    let report = json!({
        "command": command,
        "mode": "heterogeneity",
        "config": config_value(cfg),
        "wall_time_s": wall,
        "result": r,
    });
    emit(out, &report)
}

fn cmd_compare(args: &CompareArgs) -> Result<()> {
    let mut cfg = load_config(&args.common)?;
    apply_solver_flags(&mut cfg, &args.flags)?;
    cfg.validate()?;
    let out = args.common.out.as_deref();
    if args.mode == CompareMode::Heterogeneity {
        return run_sweep(&cfg, out, None, "compare");
    }
    let path = args
        .instance
        .as_ref()
        .ok_or_else(|| Error::invalid("instance", "this comparison needs an instance"))?;
    let inst = instance::read_instance(path)?;
    let clock = Instant::now();
    let (mode, result) = match args.mode {
        CompareMode::WarmStart => {
            let c = experiments::warm_start(&inst, &cfg.lda, &cfg.ca)?;
            ("warm_start", serde_json::to_value(c).expect("serializes"))
        }
        CompareMode::Altitude => {
            let c = experiments::altitude(&inst, cfg.grid)?;
            ("altitude", serde_json::to_value(c).expect("serializes"))
        }
        CompareMode::Heterogeneity => unreachable!("handled above"),
    };
    let report = json!({
        "command": "compare",
        "mode": mode,
        "instance": path.display().to_string(),
        "config": config_value(&cfg),
        "wall_time_s": clock.elapsed().as_secs_f64(),
        "result": result,
    });
    emit(out, &report)
}

fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let mut cfg = load_config(&args.common)?;
    if let Some(k) = args.max_iters {
        cfg.ca.max_total_iters = k;
    }
    cfg.validate()?;
    run_sweep(&cfg, args.common.out.as_deref(), args.table.as_deref(), "sweep")
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Sweep(a) => cmd_sweep(a),
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_codes() {
        assert_eq!(exit_code(&Error::Budget("x".into())), EXIT_BUDGET);
        assert_eq!(exit_code(&Error::invalid("a", "b")), EXIT_CONFIG);
        assert_eq!(exit_code(&Error::NonPositiveAltitude(0.0)), EXIT_SOLVER);
    }

    #[test]
    fn altitude_flag() {
        assert_eq!(parse_altitude("best").unwrap(), AltitudeMode::BestLayer);
        assert_eq!(parse_altitude("2").unwrap(), AltitudeMode::Layer(2));
        assert!(parse_altitude("high").is_err());
    }

    #[test]
    fn default_config_round_trips() {
        let cfg = RunConfig::default();
        let back: RunConfig = serde_json::from_value(config_value(&cfg)).unwrap();
        assert_eq!(back, cfg);
        cfg.validate().unwrap();
    }

    #[test]
    fn defaults_match_reference_generator() {
        let g = GenSettings::default();
        let reference = GenConfig::reference(20, DensityField::reference(Trend::Increase, Trend::Increase, 10, 7));
        assert_eq!(g.gen_config(7), reference);
    }

    #[test]
    fn help_exits_zero_and_bad_flag_two() {
        assert_eq!(run(["uav-mclp", "--help"]), EXIT_OK);
        assert_eq!(run(["uav-mclp", "solve", "--bogus"]), EXIT_CONFIG);
    }
}
