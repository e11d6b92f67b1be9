//! Inverse morphology control.
//!
//! Minimise over the actuation parameters `u`
//!
//! ```text
//! J(u) = (v·R_0^i(θ) t̄_i)² + α / ((v·[θ_i]× t̄_i)² + ε)
//! ```
//!
//! where `θ = θ*(u)` is the equilibrium reached from the previous iterate.
//! The first term puts a critical point at joint `i`, the reciprocal barrier
//! keeps it away from degeneracy. The bracket is evaluated with the target
//! joint's own rotation vector `θ_i`.
//!
//! The equality constraint is handled by nesting: every objective evaluation
//! runs the equilibrium solver. The outer loop is BFGS with a central
//! finite-difference gradient and projected backtracking (tensions stay
//! non-negative).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::model::compose_chain;
use crate::morse::{morse_number, Direction, MorseResult, Thresholds};
use crate::statics::{EquilibriumReport, EquilibriumSolver, SolverOptions};
use crate::{model, ActuationCommand, Configuration, Error, Result, RobotModel};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MorphologyGoal {
    pub target_joint: usize,
    pub direction: Direction,
    pub alpha: f64,
    pub epsilon: f64,
}

pub const DEFAULT_ALPHA: f64 = 1e-4;
pub const DEFAULT_EPSILON: f64 = 1e-8;

impl MorphologyGoal {
    pub fn new(target_joint: usize, direction: Direction) -> Self {
        MorphologyGoal {
            target_joint,
            direction,
            alpha: DEFAULT_ALPHA,
            epsilon: DEFAULT_EPSILON,
        }
    }

    pub fn validate(&self, model: &RobotModel) -> Result<()> {
        let n = model.n_joints();
        if self.target_joint == 0 || self.target_joint >= n {
            return Err(Error::invalid(
                "target_joint",
                format!(
                    "{} is not an interior joint (0 < i < {n})",
                    self.target_joint
                ),
            ));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::invalid("alpha", "must be positive"));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::invalid("epsilon", "must be positive"));
        }
        Ok(())
    }
}

/// Value of `J` and its two terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective {
    pub value: f64,
    pub critical_term: f64,
    pub barrier_term: f64,
}

impl Objective {
    /// `self − other`, differenced term by term so the large constant part of
    /// the barrier does not swamp changes in the critical term.
    fn delta(&self, other: &Objective) -> f64 {
        (self.critical_term - other.critical_term) + (self.barrier_term - other.barrier_term)
    }
}

pub fn objective(
    model: &RobotModel,
    goal: &MorphologyGoal,
    theta: &Configuration,
) -> Result<Objective> {
    model.check_configuration(theta)?;
    goal.validate(model)?;
    let i = goal.target_joint;
    let v = goal.direction.vector();
    let t_bar = model.ref_frames()[i].t;
    let chain = compose_chain(theta)?;
    let projection = v.dot(&(chain[i] * t_bar));
    let bend = v.dot(&theta.joint(i).cross(&t_bar));
    let critical_term = projection * projection;
    let barrier_term = goal.alpha / (bend * bend + goal.epsilon);
    Ok(Objective {
        value: critical_term + barrier_term,
        critical_term,
        barrier_term,
    })
}

/// `|v·[θ_i]× t̄_i|`, the quantity inside the barrier.
pub fn linearized_margin(model: &RobotModel, goal: &MorphologyGoal, theta: &Configuration) -> f64 {
    let i = goal.target_joint;
    goal.direction
        .vector()
        .dot(&theta.joint(i).cross(&model.ref_frames()[i].t))
        .abs()
}

/// `|v·κ_i| l_i` from the exact discrete curvature.
pub fn curvature_margin(
    model: &RobotModel,
    goal: &MorphologyGoal,
    theta: &Configuration,
) -> Result<f64> {
    let shape = model::forward_kinematics(model, theta)?;
    let i = goal.target_joint;
    Ok(goal.direction.vector().dot(shape.curvature(i)).abs() * shape.link_lengths[i])
}

#[derive(Debug, Clone)]
pub struct ControlOptions {
    pub max_iterations: usize,
    /// Finite-difference step per actuation coordinate.
    pub fd_step: f64,
    /// Number of perturbed restarts tried when the first run fails.
    pub multistart: usize,
    pub seed: u64,
    /// Restart perturbation, relative to `max(|u_init|∞, perturbation_floor)`.
    pub perturbation: f64,
    pub perturbation_floor: f64,
    /// Success threshold on the critical term.
    pub critical_tolerance: f64,
    pub solver: SolverOptions,
    pub thresholds: Thresholds,
}

impl Default for ControlOptions {
    fn default() -> Self {
        ControlOptions {
            max_iterations: 500,
            fd_step: 1e-5,
            multistart: 5,
            seed: 0,
            perturbation: 0.25,
            perturbation_floor: 1e-2,
            critical_tolerance: 1e-6,
            solver: SolverOptions::default(),
            thresholds: Thresholds::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ControlResult {
    pub u_star: ActuationCommand,
    pub theta_star: Configuration,
    pub objective: Objective,
    pub equilibrium: EquilibriumReport,
    /// Critical term small and the critical point non-degenerate.
    pub success: bool,
    pub linearized_margin: f64,
    pub curvature_margin: f64,
    /// Descriptor of the achieved shape along the goal direction.
    pub morse: MorseResult,
    pub outer_iterations: usize,
    /// 0 for the run from `u_init`, `k` for the k-th perturbed restart.
    pub start_index: usize,
    /// `J` of every accepted outer iterate, starting with the initial point.
    pub history: Vec<f64>,
}

#[derive(Clone)]
struct Point {
    u: Vec<f64>,
    theta: Configuration,
    report: EquilibriumReport,
    obj: Objective,
}

struct Problem<'a> {
    model: &'a RobotModel,
    goal: &'a MorphologyGoal,
    template: ActuationCommand,
    lower: Vec<f64>,
    options: &'a ControlOptions,
    solver: EquilibriumSolver<'a>,
}

impl<'a> Problem<'a> {
    fn project(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(&self.lower)
            .map(|(x, lo)| x.max(*lo))
            .collect()
    }

    /// Equilibrium and objective at `u`, warm-started from `warm`. `None` when
    /// the equilibrium solve does not converge.
    fn evaluate(&self, u: &[f64], warm: &Configuration) -> Result<Option<Point>> {
        let cmd = self.template.with_params(u);
        let report = self.solver.solve(&cmd, warm)?;
        if !report.converged {
            return Ok(None);
        }
        let theta = report.solution.clone();
        let obj = objective(self.model, self.goal, &theta)?;
        Ok(Some(Point {
            u: u.to_vec(),
            theta,
            report,
            obj,
        }))
    }

    fn success(&self, p: &Point) -> Result<bool> {
        Ok(p.obj.critical_term <= self.options.critical_tolerance
            && curvature_margin(self.model, self.goal, &p.theta)?
                >= 10.0 * self.goal.epsilon.sqrt())
    }

    /// Central differences of each term, one-sided at bounds or where a probe fails.
    fn gradient(&self, at: &Point) -> Result<Vec<f64>> {
        let h = self.options.fd_step;
        let mut g = vec![0.0; at.u.len()];
        for k in 0..at.u.len() {
            let mut plus_u = at.u.clone();
            plus_u[k] += h;
            let mut minus_u = at.u.clone();
            minus_u[k] -= h;
            let plus = self.evaluate(&plus_u, &at.theta)?;
            let minus = if minus_u[k] >= self.lower[k] {
                self.evaluate(&minus_u, &at.theta)?
            } else {
                None
            };
            g[k] = match (plus, minus) {
                (Some(p), Some(m)) => p.obj.delta(&m.obj) / (2.0 * h),
                (Some(p), None) => p.obj.delta(&at.obj) / h,
                (None, Some(m)) => at.obj.delta(&m.obj) / h,
                (None, None) => 0.0,
            };
        }
        Ok(g)
    }

    fn run(&self, u0: &[f64]) -> Result<Option<(Point, usize, Vec<f64>)>> {
        let x0 = self.project(u0);
        let mut current = match self.evaluate(&x0, self.model.theta_bar())? {
            Some(p) => p,
            None => return Ok(None),
        };
        let mut history = vec![current.obj.value];
        if self.success(&current)? {
            return Ok(Some((current, 0, history)));
        }
        let dim = x0.len();
        let mut inv_hessian: Option<Vec<Vec<f64>>> = None;
        let mut g = self.gradient(&current)?;
        let mut iterations = 0;
        while iterations < self.options.max_iterations {
            let gnorm = norm(&g);
            if gnorm == 0.0 || !gnorm.is_finite() {
                break;
            }
            let mut step = None;
            for attempt in 0..2 {
                if attempt == 1 {
                    if inv_hessian.is_none() {
                        break;
                    }
                    inv_hessian = None;
                }
                let dir = match &inv_hessian {
                    Some(h) => mat_vec(h, &g).iter().map(|x| -x).collect(),
                    None => {
                        let scale =
                            0.1 * norm(&current.u).max(self.options.perturbation_floor) / gnorm;
                        g.iter().map(|x| -x * scale).collect::<Vec<_>>()
                    }
                };
                if dot(&dir, &g) >= 0.0 {
                    continue;
                }
                step = self.line_search(&current, &g, &dir)?;
                if step.is_some() {
                    break;
                }
            }
            let Some(next) = step else { break };
            let s: Vec<f64> = next.u.iter().zip(&current.u).map(|(a, b)| a - b).collect();
            let g_next = self.gradient(&next)?;
            let y: Vec<f64> = g_next.iter().zip(&g).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &y);
            if sy > 1e-300 {
                let h = inv_hessian.get_or_insert_with(|| {
                    let gamma = sy / dot(&y, &y);
                    (0..dim)
                        .map(|r| (0..dim).map(|c| if r == c { gamma } else { 0.0 }).collect())
                        .collect()
                });
                bfgs_update(h, &s, &y, sy);
            }
            let small_step = s.iter().map(|x| x.abs()).fold(0.0, f64::max)
                <= 1e-12 * current.u.iter().map(|x| x.abs()).fold(1.0, f64::max);
            current = next;
            g = g_next;
            history.push(current.obj.value);
            iterations += 1;
            if small_step {
                break;
            }
        }
        Ok(Some((current, iterations, history)))
    }

    /// Projected backtracking with an Armijo test on the termwise difference.
    ///
    /// Trial steps are capped at `max(‖u‖, perturbation_floor)` so an early,
    /// poorly scaled Hessian cannot jump past the nearest root of the critical term.
    fn line_search(&self, current: &Point, g: &[f64], dir: &[f64]) -> Result<Option<Point>> {
        let cap = norm(&current.u).max(self.options.perturbation_floor);
        let mut alpha = (cap / norm(dir)).min(1.0);
        while alpha > 1e-10 {
            let trial: Vec<f64> = current
                .u
                .iter()
                .zip(dir)
                .map(|(x, d)| x + alpha * d)
                .collect();
            let trial = self.project(&trial);
            let s: Vec<f64> = trial.iter().zip(&current.u).map(|(a, b)| a - b).collect();
            if norm(&s) == 0.0 {
                return Ok(None);
            }
            if let Some(p) = self.evaluate(&trial, &current.theta)? {
                let decrease = p.obj.delta(&current.obj);
                if decrease <= 1e-4 * dot(g, &s)
                    && decrease < 0.0
                    && p.obj.value <= current.obj.value
                {
                    return Ok(Some(p));
                }
            }
            alpha *= 0.5;
        }
        Ok(None)
    }

    /// Moves a crossing that sits half a link off the target onto it.
    ///
    /// Driving `v·t_i` to zero leaves the sign change either just before or just
    /// after link `i`. The descriptor attributes it to joint `i` only when `v·t_i`
    /// already carries the sign opposite to `v·t_{i−1}`; a few Newton steps on
    /// `v·t_i` along its actuation gradient mirror the residual across zero.
    fn settle_crossing(&self, p: Point) -> Result<Point> {
        let i = self.goal.target_joint;
        let v = *self.goal.direction.vector();
        let projections = |theta: &Configuration| -> Result<(f64, f64)> {
            let shape = model::forward_kinematics(self.model, theta)?;
            Ok((v.dot(&shape.tangents[i - 1]), v.dot(&shape.tangents[i])))
        };
        let is_critical = |q: &Point| -> Result<bool> {
            let shape = model::forward_kinematics(self.model, &q.theta)?;
            let m = morse_number(&shape, &self.goal.direction, self.options.thresholds);
            let hit = m.non_degenerate_joints().any(|j| j == i);
            Ok(hit)
        };
        if p.obj.critical_term > self.options.critical_tolerance || is_critical(&p)? {
            return Ok(p);
        }
        let (before, at) = projections(&p.theta)?;
        let target = -before.signum() * at.abs().max(1e-6);
        let mut q = p.clone();
        for _ in 0..10 {
            let (_, at) = projections(&q.theta)?;
            let h = self.options.fd_step;
            let mut grad = vec![0.0; q.u.len()];
            for k in 0..q.u.len() {
                let mut up = q.u.clone();
                up[k] += h;
                if let Some(r) = self.evaluate(&up, &q.theta)? {
                    grad[k] = (projections(&r.theta)?.1 - at) / h;
                }
            }
            let gg = dot(&grad, &grad);
            if gg == 0.0 {
                break;
            }
            let u: Vec<f64> =
                q.u.iter()
                    .zip(&grad)
                    .map(|(x, d)| x + (target - at) * d / gg)
                    .collect();
            let Some(next) = self.evaluate(&self.project(&u), &q.theta)? else {
                break;
            };
            q = next;
            if is_critical(&q)? && q.obj.critical_term <= self.options.critical_tolerance {
                return Ok(q);
            }
        }
        Ok(p)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn mat_vec(m: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    m.iter().map(|row| dot(row, x)).collect()
}

/// Inverse-Hessian BFGS update `H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ`.
fn bfgs_update(h: &mut [Vec<f64>], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy = mat_vec(h, y);
    let yhy = dot(y, &hy);
    for r in 0..n {
        for c in 0..n {
            h[r][c] += -rho * (hy[r] * s[c] + s[r] * hy[c]) + (rho * rho * yhy + rho) * s[r] * s[c];
        }
    }
}

/// Solves the morphology-control problem starting from `u_init`.
///
/// Non-convergence is reported through `success = false`; errors are only
/// returned for invalid or incompatible inputs.
pub fn solve_morphology_control(
    model: &RobotModel,
    goal: &MorphologyGoal,
    u_init: &ActuationCommand,
    options: &ControlOptions,
) -> Result<ControlResult> {
    goal.validate(model)?;
    u_init.check_compatible(model)?;
    let problem = Problem {
        model,
        goal,
        template: u_init.clone(),
        lower: u_init.lower_bounds(),
        options,
        solver: EquilibriumSolver::new(model, options.solver.clone()),
    };
    let base = u_init.params();
    let first = problem.run(&base)?;
    let mut runs = vec![(0usize, first)];
    let first_ok = match &runs[0].1 {
        Some((p, _, _)) => problem.success(p)?,
        None => false,
    };
    if !first_ok && options.multistart > 0 {
        let scale = base
            .iter()
            .map(|x| x.abs())
            .fold(options.perturbation_floor, f64::max);
        let starts: Vec<(usize, Vec<f64>)> = (1..=options.multistart)
            .map(|k| {
                let mut rng = ChaCha8Rng::seed_from_u64(options.seed.wrapping_add(k as u64));
                let u = base
                    .iter()
                    .map(|x| {
                        let n: f64 = StandardNormal.sample(&mut rng);
                        x + options.perturbation * scale * n
                    })
                    .collect();
                (k, u)
            })
            .collect();
        let extra: Vec<(usize, Result<_>)> = starts
            .par_iter()
            .map(|(k, u)| {
                let problem = Problem {
                    model,
                    goal,
                    template: u_init.clone(),
                    lower: u_init.lower_bounds(),
                    options,
                    solver: EquilibriumSolver::new(model, options.solver.clone()),
                };
                (*k, problem.run(u))
            })
            .collect();
        for (k, r) in extra {
            runs.push((k, r?));
        }
    }
    // first successful run in start order, otherwise lowest J (ties by start index)
    let mut chosen: Option<(usize, Point, usize, Vec<f64>, bool)> = None;
    for (k, run) in runs {
        let Some((p, iters, hist)) = run else {
            continue;
        };
        let ok = problem.success(&p)?;
        let replace = match &chosen {
            None => true,
            Some((_, best, _, _, best_ok)) => !best_ok && (ok || p.obj.value < best.obj.value),
        };
        if replace {
            chosen = Some((k, p, iters, hist, ok));
        }
    }
    let Some((start_index, point, outer_iterations, history, _)) = chosen else {
        // no start reached an equilibrium at all: report the raw solve from u_init
        let report = problem.solver.solve(u_init, model.theta_bar())?;
        let theta = report.solution.clone();
        let obj = objective(model, goal, &theta)?;
        let shape = model::forward_kinematics(model, &theta)?;
        return Ok(ControlResult {
            u_star: u_init.clone(),
            morse: morse_number(&shape, &goal.direction, options.thresholds),
            linearized_margin: linearized_margin(model, goal, &theta),
            curvature_margin: curvature_margin(model, goal, &theta)?,
            theta_star: theta,
            objective: obj,
            equilibrium: report,
            success: false,
            outer_iterations: 0,
            start_index: 0,
            history: vec![],
        });
    };
    let point = problem.settle_crossing(point)?;
    let shape = model::forward_kinematics(model, &point.theta)?;
    Ok(ControlResult {
        u_star: u_init.with_params(&point.u),
        success: problem.success(&point)?,
        morse: morse_number(&shape, &goal.direction, options.thresholds),
        linearized_margin: linearized_margin(model, goal, &point.theta),
        curvature_margin: curvature_margin(model, goal, &point.theta)?,
        theta_star: point.theta,
        objective: point.obj,
        equilibrium: point.report,
        outer_iterations,
        start_index,
        history,
    })
}
