//! `morsecr` command line.
//!
//! Exit codes: 0 success, 1 invalid input, 2 numerical failure (equilibrium
//! not converged, control goal not met). Reports are JSON, sweeps are CSV; all
//! floats are printed with 17 significant digits.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::control::{self, ControlOptions, MorphologyGoal};
use crate::io::{self, fmt_f64, to_json_string};
use crate::model::forward_kinematics;
use crate::morse::{
    classify, direction_distal_orthogonal, direction_initial, direction_max_search_seeded,
    morse_number, Direction, MorseResult, Thresholds, DEFAULT_EPS_DEG, DEFAULT_EPS_TAN,
};
use crate::oracle::{self, AnalyticCurve};
use crate::statics::{EquilibriumReport, EquilibriumSolver, SolverOptions};
use crate::{ActuationCommand, Configuration, Error, Result, RobotModel, Shape, Vec3};

pub const THREADS_ENV: &str = "MORSECR_THREADS";

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DirectionStrategy {
    Initial,
    DistalOrthogonal,
    Max,
    Fixed(Direction),
}

impl FromStr for DirectionStrategy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "initial" => Ok(DirectionStrategy::Initial),
            "distal-orthogonal" => Ok(DirectionStrategy::DistalOrthogonal),
            "max" => Ok(DirectionStrategy::Max),
            _ => {
                let rest = s
                    .strip_prefix("fixed:")
                    .ok_or_else(|| format!("unknown direction `{s}`"))?;
                let parts: Vec<f64> = rest
                    .split(',')
                    .map(|p| p.trim().parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| format!("direction `{s}`: {e}"))?;
                if parts.len() != 3 {
                    return Err(format!("direction `{s}` needs three components"));
                }
                Direction::new(Vec3::new(parts[0], parts[1], parts[2]))
                    .map(DirectionStrategy::Fixed)
                    .map_err(|e| e.to_string())
            }
        }
    }
}

impl DirectionStrategy {
    fn name(&self) -> String {
        match self {
            DirectionStrategy::Initial => "initial".into(),
            DirectionStrategy::DistalOrthogonal => "distal-orthogonal".into(),
            DirectionStrategy::Max => "max".into(),
            DirectionStrategy::Fixed(_) => "fixed".into(),
        }
    }
}

/// Descriptor of `shape` under a direction strategy. The `max` search is
/// seeded with the `initial` and `distal-orthogonal` directions.
pub fn describe_shape(
    model: &RobotModel,
    shape: &Shape,
    strategy: DirectionStrategy,
    samples: usize,
    thresholds: Thresholds,
) -> Result<MorseResult> {
    let base = model.ref_frames()[0].t;
    let dir = match strategy {
        DirectionStrategy::Initial => direction_initial(model),
        DirectionStrategy::DistalOrthogonal => direction_distal_orthogonal(shape, &base),
        DirectionStrategy::Fixed(d) => d,
        DirectionStrategy::Max => {
            let seeds = [
                direction_initial(model),
                direction_distal_orthogonal(shape, &base),
            ];
            return Ok(direction_max_search_seeded(shape, samples, &seeds, thresholds)?.1);
        }
    };
    Ok(morse_number(shape, &dir, thresholds))
}

#[derive(Debug, Parser)]
#[command(
    name = "morsecr",
    version,
    about = "Morse-number shape descriptor for continuum robots"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Morse number, critical joints and label of one configuration.
    Describe(DescribeArgs),
    /// Print only the J/C/S label.
    Classify(DescribeArgs),
    /// Descriptor over an actuation grid, as CSV.
    Sweep(SweepArgs),
    /// Solve for an actuation command that puts a critical point at a joint.
    Control(ControlArgs),
    /// Static equilibrium under a command.
    Equilibrium(EquilibriumArgs),
    /// Continuous critical-point count of an analytic curve.
    Oracle(OracleArgs),
}

#[derive(Debug, Args)]
struct DescriptorFlags {
    /// initial | distal-orthogonal | max | fixed:x,y,z
    #[arg(long, default_value = "initial")]
    direction: DirectionStrategy,
    #[arg(long, default_value_t = DEFAULT_EPS_TAN)]
    eps_tan: f64,
    #[arg(long, default_value_t = DEFAULT_EPS_DEG)]
    eps_deg: f64,
    /// Lattice size of the `max` search.
    #[arg(long, default_value_t = 256)]
    samples: usize,
}

impl DescriptorFlags {
    fn thresholds(&self) -> Result<Thresholds> {
        if !(self.eps_tan >= 0.0 && self.eps_deg >= 0.0) {
            return Err(Error::invalid("eps-tan/eps-deg", "must be non-negative"));
        }
        Ok(Thresholds {
            eps_tan: self.eps_tan,
            eps_deg: self.eps_deg,
        })
    }
}

#[derive(Debug, Args)]
struct SolverFlags {
    /// Equilibrium tolerance on the residual infinity norm (N·m).
    #[arg(long, default_value_t = 1e-9)]
    tolerance: f64,
    #[arg(long, default_value_t = 200)]
    max_newton: usize,
    #[arg(long, default_value_t = 1e-6)]
    fd_step: f64,
}

impl SolverFlags {
    fn options(&self) -> Result<SolverOptions> {
        if !(self.tolerance > 0.0 && self.fd_step > 0.0) {
            return Err(Error::invalid("tolerance/fd-step", "must be positive"));
        }
        Ok(SolverOptions {
            tolerance: self.tolerance,
            max_iterations: self.max_newton,
            fd_step: self.fd_step,
            ..SolverOptions::default()
        })
    }
}

#[derive(Debug, Args)]
struct DescribeArgs {
    #[arg(long)]
    model: PathBuf,
    /// Configuration file `{"theta": [...]}`.
    #[arg(long, conflicts_with = "command")]
    config: Option<PathBuf>,
    /// Command file; the configuration is then the equilibrium from `--init` (default θ̄).
    #[arg(long)]
    command: Option<PathBuf>,
    #[arg(long, requires = "command")]
    init: Option<PathBuf>,
    #[command(flatten)]
    descriptor: DescriptorFlags,
    #[command(flatten)]
    solver: SolverFlags,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SweepParam {
    /// Grid axes are the raw command parameters.
    Cartesian,
    /// Two axes (angle rad, magnitude T): field `|B| (cos a t̄_0 + sin a ū_0)`.
    Polar,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    model: PathBuf,
    /// `min:max:steps`, one per grid axis; the last axis is the continuation axis.
    #[arg(long = "grid", required = true)]
    grids: Vec<String>,
    #[arg(long, value_enum, default_value = "cartesian")]
    param: SweepParam,
    #[command(flatten)]
    descriptor: DescriptorFlags,
    #[command(flatten)]
    solver: SolverFlags,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ControlArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    target_joint: usize,
    /// initial | fixed:x,y,z
    #[arg(long, default_value = "initial")]
    direction: DirectionStrategy,
    #[arg(long, default_value_t = control::DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = control::DEFAULT_EPSILON)]
    eps: f64,
    #[arg(long, default_value_t = 5)]
    multistart: usize,
    #[arg(long, default_value_t = 500)]
    max_iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Initial command file (default: zero command of the model's actuator kind).
    #[arg(long)]
    u_init: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_EPS_TAN)]
    eps_tan: f64,
    #[arg(long, default_value_t = DEFAULT_EPS_DEG)]
    eps_deg: f64,
    #[command(flatten)]
    solver: SolverFlags,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write `u*` as a command file.
    #[arg(long)]
    command_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EquilibriumArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    command: PathBuf,
    #[arg(long)]
    init: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverFlags,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct OracleArgs {
    /// straight:L | arc:L,turning | biarc:L,first,second | helix:turns
    #[arg(long)]
    curve: String,
    /// initial | fixed:x,y,z
    #[arg(long, default_value = "initial")]
    direction: DirectionStrategy,
    #[arg(long, default_value_t = 100_000)]
    n_dense: usize,
    /// Also sample a PRB model with this many joints and report its discrete count.
    #[arg(long)]
    joints: Option<usize>,
    #[arg(long, requires = "joints")]
    emit_model: Option<PathBuf>,
    #[arg(long, requires = "joints")]
    emit_config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Outcome of a subcommand: text to emit plus the exit code.
struct Outcome {
    text: String,
    out: Option<PathBuf>,
    code: i32,
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)
        .map_err(|e| Error::invalid(path.display().to_string(), e.to_string()))
}

fn load_model(path: &Path) -> Result<RobotModel> {
    io::parse_model(&io::read_to_string(path)?).map_err(|e| match e {
        Error::Json(err) => Error::invalid(format!("model {}", path.display()), err.to_string()),
        other => other,
    })
}

fn load_command(path: &Path, model: &RobotModel) -> Result<ActuationCommand> {
    let u = io::parse_command(&io::read_to_string(path)?).map_err(|e| match e {
        Error::Json(err) => Error::invalid(format!("command {}", path.display()), err.to_string()),
        other => other,
    })?;
    u.check_compatible(model)?;
    Ok(u)
}

fn load_configuration(path: &Path, model: &RobotModel) -> Result<Configuration> {
    io::parse_configuration(&io::read_to_string(path)?, model).map_err(|e| match e {
        Error::Json(err) => {
            Error::invalid(format!("configuration {}", path.display()), err.to_string())
        }
        other => other,
    })
}

fn vec_json(v: &Vec3) -> Value {
    json!([v.x, v.y, v.z])
}

fn morse_json(m: &MorseResult) -> Value {
    json!({
        "direction": vec_json(m.direction.vector()),
        "count": m.count,
        "label": classify(m),
        "critical_joints": m.critical_joints,
        "degenerate_flags": m.degenerate_flags,
        "generic": m.generic,
    })
}

fn report_json(r: &EquilibriumReport) -> Value {
    json!({
        "converged": r.converged,
        "residual_norm": r.residual_norm,
        "iterations": r.iterations,
    })
}

fn cmd_describe(args: &DescribeArgs, label_only: bool) -> Result<Outcome> {
    let model = load_model(&args.model)?;
    let thresholds = args.descriptor.thresholds()?;
    let solver_options = args.solver.options()?;
    if args.descriptor.samples < 32 {
        return Err(Error::invalid("samples", "must be at least 32"));
    }
    let (theta, equilibrium) = match (&args.config, &args.command) {
        (Some(c), None) => (load_configuration(c, &model)?, None),
        (None, Some(c)) => {
            let u = load_command(c, &model)?;
            let init = match &args.init {
                Some(p) => load_configuration(p, &model)?,
                None => model.theta_bar().clone(),
            };
            let rep = EquilibriumSolver::new(&model, solver_options).solve(&u, &init)?;
            (rep.solution.clone(), Some(rep))
        }
        (None, None) => (model.theta_bar().clone(), None),
        (Some(_), Some(_)) => unreachable!("clap rejects --config with --command"),
    };
    let shape = forward_kinematics(&model, &theta)?;
    let m = describe_shape(
        &model,
        &shape,
        args.descriptor.direction,
        args.descriptor.samples,
        thresholds,
    )?;
    let code = match &equilibrium {
        Some(rep) if !rep.converged => 2,
        _ => 0,
    };
    let text = if label_only && args.out.is_none() {
        format!("{}\n", classify(&m))
    } else {
        let mut report = morse_json(&m);
        report["strategy"] = json!(args.descriptor.direction.name());
        if let Some(rep) = &equilibrium {
            report["equilibrium"] = report_json(rep);
        }
        to_json_string(&report)
    };
    Ok(Outcome {
        text,
        out: args.out.clone(),
        code,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridAxis {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl FromStr for GridAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |reason: &str| Error::invalid(format!("grid `{s}`"), reason.to_string());
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(bad("expected min:max:steps"));
        }
        let min: f64 = parts[0]
            .trim()
            .parse()
            .map_err(|_| bad("min is not a number"))?;
        let max: f64 = parts[1]
            .trim()
            .parse()
            .map_err(|_| bad("max is not a number"))?;
        let steps: usize = parts[2]
            .trim()
            .parse()
            .map_err(|_| bad("steps is not an integer"))?;
        if steps < 1 {
            return Err(bad("steps must be at least 1"));
        }
        if !(min.is_finite() && max.is_finite()) {
            return Err(bad("bounds must be finite"));
        }
        Ok(GridAxis { min, max, steps })
    }
}

impl GridAxis {
    pub fn value(&self, k: usize) -> f64 {
        if self.steps == 1 {
            self.min
        } else {
            self.min + (self.max - self.min) * k as f64 / (self.steps - 1) as f64
        }
    }
}

/// One grid point of a sweep.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub params: Vec<f64>,
    pub converged: bool,
    pub morse: MorseResult,
}

/// How grid coordinates map to an actuation command.
#[derive(Debug, Clone, Copy)]
pub enum SweepMapping {
    Cartesian,
    /// `(angle, magnitude)` to a field in the plane of `t̄_0` and `ū_0`.
    PolarField,
}

/// Grid sweep with continuation along the last axis.
///
/// Lines of the grid that share every coordinate but the last are solved in
/// order of increasing last coordinate, each point warm-started from the
/// previous converged one (the first from θ̄). Lines run in parallel; rows come
/// back in row-major grid order.
pub fn sweep(
    model: &RobotModel,
    axes: &[GridAxis],
    mapping: SweepMapping,
    strategy: DirectionStrategy,
    samples: usize,
    thresholds: Thresholds,
    solver: &SolverOptions,
) -> Result<Vec<SweepRow>> {
    let template = ActuationCommand::zero_for(model);
    let to_command = |p: &[f64]| -> ActuationCommand {
        match mapping {
            SweepMapping::Cartesian => template.with_params(p),
            SweepMapping::PolarField => {
                let f = &model.ref_frames()[0];
                ActuationCommand::Field((f.t * p[0].cos() + f.u * p[0].sin()) * p[1])
            }
        }
    };
    let expected = match mapping {
        SweepMapping::Cartesian => template.params().len(),
        SweepMapping::PolarField => {
            if !matches!(template, ActuationCommand::Field(_)) {
                return Err(Error::invalid("param", "polar sweeps need a magnet model"));
            }
            2
        }
    };
    if axes.len() != expected {
        return Err(Error::invalid(
            "grid",
            format!(
                "{} axes given, the command has {expected} parameters",
                axes.len()
            ),
        ));
    }
    let (outer, inner) = axes.split_at(axes.len() - 1);
    let inner = inner[0];
    let n_lines: usize = outer.iter().map(|a| a.steps).product();
    let lines: Vec<Result<Vec<SweepRow>>> = (0..n_lines)
        .into_par_iter()
        .map(|line| {
            let mut prefix = vec![0.0; outer.len()];
            let mut rem = line;
            for (d, axis) in outer.iter().enumerate().rev() {
                prefix[d] = axis.value(rem % axis.steps);
                rem /= axis.steps;
            }
            let eq = EquilibriumSolver::new(model, solver.clone());
            let mut warm = model.theta_bar().clone();
            let mut rows = Vec::with_capacity(inner.steps);
            for k in 0..inner.steps {
                let mut params = prefix.clone();
                params.push(inner.value(k));
                let u = to_command(&params);
                u.check_compatible(model)?;
                let rep = eq.solve(&u, &warm)?;
                let shape = forward_kinematics(model, &rep.solution)?;
                let morse = describe_shape(model, &shape, strategy, samples, thresholds)?;
                if rep.converged {
                    warm = rep.solution.clone();
                }
                rows.push(SweepRow {
                    params,
                    converged: rep.converged,
                    morse,
                });
            }
            Ok(rows)
        })
        .collect();
    let mut out = Vec::with_capacity(n_lines * inner.steps);
    for line in lines {
        out.extend(line?);
    }
    Ok(out)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let m = rows.first().map_or(0, |r| r.params.len());
    let mut s = String::new();
    for k in 1..=m {
        s.push_str(&format!("u_{k},"));
    }
    s.push_str("converged,count,label,v_x,v_y,v_z\n");
    for r in rows {
        for p in &r.params {
            s.push_str(&fmt_f64(*p));
            s.push(',');
        }
        let v = r.morse.direction.vector();
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.converged,
            r.morse.count,
            classify(&r.morse),
            fmt_f64(v.x),
            fmt_f64(v.y),
            fmt_f64(v.z)
        ));
    }
    s
}

fn cmd_sweep(args: &SweepArgs) -> Result<Outcome> {
    let model = load_model(&args.model)?;
    let thresholds = args.descriptor.thresholds()?;
    let solver = args.solver.options()?;
    let axes = args
        .grids
        .iter()
        .map(|g| g.parse::<GridAxis>())
        .collect::<Result<Vec<_>>>()?;
    if args.descriptor.samples < 32 {
        return Err(Error::invalid("samples", "must be at least 32"));
    }
    let mapping = match args.param {
        SweepParam::Cartesian => SweepMapping::Cartesian,
        SweepParam::Polar => SweepMapping::PolarField,
    };
    let rows = sweep(
        &model,
        &axes,
        mapping,
        args.descriptor.direction,
        args.descriptor.samples,
        thresholds,
        &solver,
    )?;
    Ok(Outcome {
        text: sweep_csv(&rows),
        out: args.out.clone(),
        code: 0,
    })
}

fn cmd_control(args: &ControlArgs) -> Result<Outcome> {
    let model = load_model(&args.model)?;
    let direction = match args.direction {
        DirectionStrategy::Initial => direction_initial(&model),
        DirectionStrategy::Fixed(d) => d,
        other => {
            return Err(Error::invalid(
                "direction",
                format!(
                    "`{}` depends on the unknown equilibrium; use initial or fixed:x,y,z",
                    other.name()
                ),
            ))
        }
    };
    let goal = MorphologyGoal {
        target_joint: args.target_joint,
        direction,
        alpha: args.alpha,
        epsilon: args.eps,
    };
    goal.validate(&model)?;
    let u_init = match &args.u_init {
        Some(p) => load_command(p, &model)?,
        None => ActuationCommand::zero_for(&model),
    };
    let options = ControlOptions {
        max_iterations: args.max_iters,
        multistart: args.multistart,
        seed: args.seed,
        solver: args.solver.options()?,
        thresholds: Thresholds {
            eps_tan: args.eps_tan,
            eps_deg: args.eps_deg,
        },
        ..ControlOptions::default()
    };
    let r = control::solve_morphology_control(&model, &goal, &u_init, &options)?;
    let report = json!({
        "success": r.success,
        "target_joint": goal.target_joint,
        "direction": vec_json(goal.direction.vector()),
        "alpha": goal.alpha,
        "epsilon": goal.epsilon,
        "u_star": io::command_to_json(&r.u_star),
        "theta_star": r.theta_star.to_flat(),
        "objective": {
            "J": r.objective.value,
            "critical_term": r.objective.critical_term,
            "barrier_term": r.objective.barrier_term,
        },
        "linearized_margin": r.linearized_margin,
        "curvature_margin": r.curvature_margin,
        "equilibrium": report_json(&r.equilibrium),
        "outer_iterations": r.outer_iterations,
        "start_index": r.start_index,
        "verification": {
            "critical_joints": r.morse.critical_joints,
            "target_is_critical": r.morse.non_degenerate_joints().any(|j| j == goal.target_joint),
            "count": r.morse.count,
            "label": classify(&r.morse),
        },
    });
    if let Some(p) = &args.command_out {
        write_file(p, &to_json_string(&io::command_to_json(&r.u_star)))?;
    }
    Ok(Outcome {
        text: to_json_string(&report),
        out: args.out.clone(),
        code: if r.success { 0 } else { 2 },
    })
}

fn cmd_equilibrium(args: &EquilibriumArgs) -> Result<Outcome> {
    let model = load_model(&args.model)?;
    let u = load_command(&args.command, &model)?;
    let init = match &args.init {
        Some(p) => load_configuration(p, &model)?,
        None => model.theta_bar().clone(),
    };
    let rep = EquilibriumSolver::new(&model, args.solver.options()?).solve(&u, &init)?;
    let mut report = report_json(&rep);
    report["theta"] = json!(rep.solution.to_flat());
    Ok(Outcome {
        text: to_json_string(&report),
        out: args.out.clone(),
        code: if rep.converged { 0 } else { 2 },
    })
}

pub fn parse_curve(s: &str) -> Result<AnalyticCurve> {
    let bad = |reason: &str| Error::invalid(format!("curve `{s}`"), reason.to_string());
    let (kind, rest) = s
        .split_once(':')
        .ok_or_else(|| bad("expected kind:params"))?;
    let p: Vec<f64> = rest
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| bad("parameters must be numbers"))?;
    let curve = match (kind, p.as_slice()) {
        ("straight", [l]) => AnalyticCurve::Straight { length: *l },
        ("arc", [l, phi]) => AnalyticCurve::arc(*l, *phi),
        ("biarc", [l, a, b]) => AnalyticCurve::biarc(*l, *a, *b),
        ("helix", [turns]) => AnalyticCurve::helix_turns(*turns),
        _ => return Err(bad("unknown kind or wrong parameter count")),
    };
    if curve.length().is_nan() || curve.length() <= 0.0 {
        return Err(bad("length must be positive"));
    }
    Ok(curve)
}

fn cmd_oracle(args: &OracleArgs) -> Result<Outcome> {
    let curve = parse_curve(&args.curve)?;
    let direction = match args.direction {
        DirectionStrategy::Initial => Direction::new(curve.tangent(0.0))?,
        DirectionStrategy::Fixed(d) => d,
        other => {
            return Err(Error::invalid(
                "direction",
                format!("`{}` is not available for analytic curves", other.name()),
            ))
        }
    };
    let c = oracle::continuous_morse_count(&curve, &direction, args.n_dense)?;
    let mut report = json!({
        "curve": args.curve,
        "direction": vec_json(direction.vector()),
        "continuous": {
            "count": c.count,
            "roots": c.roots,
            "degenerate": c.degenerate,
            "generic": c.generic,
        },
    });
    if let Some(n) = args.joints {
        let (model, theta) = oracle::sample_to_model(&curve, n)?;
        let shape = forward_kinematics(&model, &theta)?;
        let m = morse_number(&shape, &direction, Thresholds::default());
        report["discrete"] = morse_json(&m);
        if let Some(p) = &args.emit_model {
            write_file(p, &to_json_string(&io::model_to_json(&model)))?;
        }
        if let Some(p) = &args.emit_config {
            write_file(p, &to_json_string(&io::configuration_to_json(&theta)))?;
        }
    }
    Ok(Outcome {
        text: to_json_string(&report),
        out: args.out.clone(),
        code: 0,
    })
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.trim().parse().ok().filter(|n| *n > 0).ok_or_else(|| {
            Error::invalid(THREADS_ENV, format!("`{v}` is not a positive integer"))
        })?;
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| Error::invalid(THREADS_ENV, e.to_string()))
}

/// Runs the CLI with explicit arguments and output streams; returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let rendered = e.render().to_string();
            if code == 0 {
                let _ = write!(stdout, "{rendered}");
            } else {
                let _ = write!(stderr, "{rendered}");
            }
            return code;
        }
    };
    let outcome = thread_pool().and_then(|pool| {
        pool.install(|| match &cli.command {
            Command::Describe(a) => cmd_describe(a, false),
            Command::Classify(a) => cmd_describe(a, true),
            Command::Sweep(a) => cmd_sweep(a),
            Command::Control(a) => cmd_control(a),
            Command::Equilibrium(a) => cmd_equilibrium(a),
            Command::Oracle(a) => cmd_oracle(a),
        })
    });
    match outcome {
        Ok(o) => {
            let written = match &o.out {
                Some(p) => write_file(p, &o.text),
                None => stdout.write_all(o.text.as_bytes()).map_err(Error::from),
            };
            if let Err(e) = written {
                let _ = writeln!(stderr, "error: {e}");
                return 1;
            }
            if o.code == 2 {
                let _ = writeln!(stderr, "numerical failure: see report");
            }
            o.code
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            1
        }
    }
}
