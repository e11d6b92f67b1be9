//! Static equilibrium `Λ(θ − θ̄) + τ_int(θ) = τ_ext(θ, u)`.
//!
//! Torque laws (idealised PRB simplifications):
//!
//! - direct: the command is the generalised torque vector itself.
//! - tendon `j` with tension `T_j`, moment arm `d_j` and routing angle `β_j`
//!   loads every joint `i ≤ termination` with the moment `T_j d_j a_j`, where
//!   `a_j = −sin β_j ū_i + cos β_j v̄_i` rotates with the joint. Expressed in
//!   joint coordinates this moment does not depend on `θ`.
//! - magnet at joint `k` with moment `m̄_k` in a uniform field `B` produces the
//!   world torque `(R_0^k m̄_k) × B`, carried by every joint `i ≤ k`.
//!
//! World moments are mapped to joint coordinates with `(R_0^i)ᵀ`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::model::compose_chain;
use crate::{Configuration, Error, Mat3, Result, RobotModel, Vec3};

#[derive(Debug, Clone, PartialEq)]
pub enum ActuatorElement {
    Direct,
    Tendon {
        termination: usize,
        beta: f64,
        moment_arm: f64,
    },
    Magnet {
        joint: usize,
        moment: Vec3,
    },
}

impl ActuatorElement {
    pub(crate) fn validate(&self, n_joints: usize) -> std::result::Result<(), String> {
        match self {
            ActuatorElement::Direct => Ok(()),
            ActuatorElement::Tendon {
                termination,
                beta,
                moment_arm,
            } => {
                if *termination >= n_joints {
                    Err(format!(
                        "termination {termination} is not a joint index below {n_joints}"
                    ))
                } else if !(moment_arm.is_finite() && *moment_arm > 0.0) {
                    Err(format!("moment_arm {moment_arm} must be positive"))
                } else if !beta.is_finite() {
                    Err("beta must be finite".into())
                } else {
                    Ok(())
                }
            }
            ActuatorElement::Magnet { joint, moment } => {
                if *joint >= n_joints {
                    Err(format!(
                        "joint {joint} is not a joint index below {n_joints}"
                    ))
                } else if !(moment.iter().all(|x| x.is_finite()) && moment.norm() > 0.0) {
                    Err("moment must be a finite non-zero vector".into())
                } else {
                    Ok(())
                }
            }
        }
    }

    pub(crate) fn rotated(&self, r: &Mat3) -> ActuatorElement {
        match self {
            ActuatorElement::Magnet { joint, moment } => ActuatorElement::Magnet {
                joint: *joint,
                moment: r * moment,
            },
            other => other.clone(),
        }
    }
}

/// Actuation input `u`.
#[derive(Debug, Clone, PartialEq)]
pub enum ActuationCommand {
    /// Generalised torques, flat `3N`.
    Torques(Vec<f64>),
    /// One non-negative tension per tendon, in model order.
    Tensions(Vec<f64>),
    /// Uniform magnetic field in Tesla.
    Field(Vec3),
}

impl ActuationCommand {
    pub fn kind(&self) -> &'static str {
        match self {
            ActuationCommand::Torques(_) => "torques",
            ActuationCommand::Tensions(_) => "tensions",
            ActuationCommand::Field(_) => "field",
        }
    }

    /// Zero command of the kind the model's actuators accept. Magnets take
    /// precedence over tendons, tendons over direct torques.
    pub fn zero_for(model: &RobotModel) -> ActuationCommand {
        let acts = model.actuators();
        if acts
            .iter()
            .any(|a| matches!(a, ActuatorElement::Magnet { .. }))
        {
            ActuationCommand::Field(Vec3::zeros())
        } else if acts
            .iter()
            .any(|a| matches!(a, ActuatorElement::Tendon { .. }))
        {
            ActuationCommand::Tensions(vec![0.0; n_tendons(model)])
        } else {
            ActuationCommand::Torques(vec![0.0; 3 * model.n_joints()])
        }
    }

    /// Flat parameter vector used by optimisers and sweeps.
    pub fn params(&self) -> Vec<f64> {
        match self {
            ActuationCommand::Torques(t) => t.clone(),
            ActuationCommand::Tensions(t) => t.clone(),
            ActuationCommand::Field(b) => vec![b.x, b.y, b.z],
        }
    }

    /// Command of the same kind with new parameters.
    pub fn with_params(&self, p: &[f64]) -> ActuationCommand {
        match self {
            ActuationCommand::Torques(_) => ActuationCommand::Torques(p.to_vec()),
            ActuationCommand::Tensions(_) => ActuationCommand::Tensions(p.to_vec()),
            ActuationCommand::Field(_) => ActuationCommand::Field(Vec3::new(p[0], p[1], p[2])),
        }
    }

    /// Lower bounds on each parameter (tensions cannot push).
    pub fn lower_bounds(&self) -> Vec<f64> {
        match self {
            ActuationCommand::Tensions(t) => vec![0.0; t.len()],
            other => vec![f64::NEG_INFINITY; other.params().len()],
        }
    }

    pub fn check_compatible(&self, model: &RobotModel) -> Result<()> {
        let acts = model.actuators();
        let incompatible = |reason: String| Error::Incompatible {
            command: self.kind(),
            reason,
        };
        if !self.params().iter().all(|x| x.is_finite()) {
            return Err(incompatible("non-finite entry".into()));
        }
        match self {
            ActuationCommand::Torques(t) => {
                if !acts.iter().any(|a| matches!(a, ActuatorElement::Direct)) {
                    return Err(incompatible("model declares no direct actuator".into()));
                }
                if t.len() != 3 * model.n_joints() {
                    return Err(Error::Dimension {
                        what: "torques",
                        expected: 3 * model.n_joints(),
                        got: t.len(),
                    });
                }
            }
            ActuationCommand::Tensions(t) => {
                let n = n_tendons(model);
                if n == 0 {
                    return Err(incompatible("model declares no tendons".into()));
                }
                if t.len() != n {
                    return Err(Error::Dimension {
                        what: "tensions",
                        expected: n,
                        got: t.len(),
                    });
                }
                if let Some(i) = t.iter().position(|x| *x < 0.0) {
                    return Err(incompatible(format!("tension {i} is negative")));
                }
            }
            ActuationCommand::Field(_) => {
                if !acts
                    .iter()
                    .any(|a| matches!(a, ActuatorElement::Magnet { .. }))
                {
                    return Err(incompatible("model declares no magnets".into()));
                }
            }
        }
        Ok(())
    }
}

fn n_tendons(model: &RobotModel) -> usize {
    model
        .actuators()
        .iter()
        .filter(|a| matches!(a, ActuatorElement::Tendon { .. }))
        .count()
}

/// Nonlinear internal torque `τ_int(θ)`. The default is identically zero.
pub trait InternalTorque: Send + Sync {
    fn torque(&self, model: &RobotModel, theta: &Configuration) -> DVector<f64>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NoInternalTorque;

impl InternalTorque for NoInternalTorque {
    fn torque(&self, model: &RobotModel, _theta: &Configuration) -> DVector<f64> {
        DVector::zeros(3 * model.n_joints())
    }
}

pub fn external_torque(
    model: &RobotModel,
    theta: &Configuration,
    u: &ActuationCommand,
) -> Result<DVector<f64>> {
    model.check_configuration(theta)?;
    u.check_compatible(model)?;
    let n = model.n_joints();
    let mut tau = DVector::zeros(3 * n);
    match u {
        ActuationCommand::Torques(t) => tau.copy_from_slice(t),
        ActuationCommand::Tensions(tensions) => {
            let tendons = model.actuators().iter().filter_map(|a| match a {
                ActuatorElement::Tendon {
                    termination,
                    beta,
                    moment_arm,
                } => Some((*termination, *beta, *moment_arm)),
                _ => None,
            });
            for ((termination, beta, arm), tension) in tendons.zip(tensions) {
                let (s, c) = beta.sin_cos();
                for (i, f) in model.ref_frames()[..=termination].iter().enumerate() {
                    let m = (f.u * -s + f.v * c) * (tension * arm);
                    add3(&mut tau, i, &m);
                }
            }
        }
        ActuationCommand::Field(b) => {
            let chain = compose_chain(theta)?;
            // world torque of each magnet, accumulated distal to proximal
            let mut at_joint = vec![Vec3::zeros(); n];
            for a in model.actuators() {
                if let ActuatorElement::Magnet { joint, moment } = a {
                    at_joint[*joint] += (chain[*joint] * moment).cross(b);
                }
            }
            let mut carried = Vec3::zeros();
            for i in (0..n).rev() {
                carried += at_joint[i];
                add3(&mut tau, i, &(chain[i].transpose() * carried));
            }
        }
    }
    Ok(tau)
}

fn add3(v: &mut DVector<f64>, joint: usize, m: &Vec3) {
    v[3 * joint] += m.x;
    v[3 * joint + 1] += m.y;
    v[3 * joint + 2] += m.z;
}

/// `Λ(θ − θ̄) + τ_int(θ) − τ_ext(θ, u)` with `τ_int ≡ 0`.
pub fn residual(
    model: &RobotModel,
    theta: &Configuration,
    u: &ActuationCommand,
) -> Result<DVector<f64>> {
    residual_with(model, theta, u, &NoInternalTorque)
}

pub fn residual_with(
    model: &RobotModel,
    theta: &Configuration,
    u: &ActuationCommand,
    internal: &dyn InternalTorque,
) -> Result<DVector<f64>> {
    let tau_ext = external_torque(model, theta, u)?;
    let k = model.stiffness_diagonal();
    let delta = theta.to_vector() - model.theta_bar().to_vector();
    Ok(k.component_mul(&delta) + internal.torque(model, theta) - tau_ext)
}

/// Central finite-difference Jacobian of the residual (step `h` rad). Falls
/// back to a one-sided difference when a probe would leave the chart.
pub fn residual_jacobian(
    model: &RobotModel,
    theta: &Configuration,
    u: &ActuationCommand,
    h: f64,
) -> Result<DMatrix<f64>> {
    jacobian_with(model, theta, u, &NoInternalTorque, h)
}

fn jacobian_with(
    model: &RobotModel,
    theta: &Configuration,
    u: &ActuationCommand,
    internal: &dyn InternalTorque,
    h: f64,
) -> Result<DMatrix<f64>> {
    let x = theta.to_flat();
    let dim = x.len();
    let mut jac = DMatrix::zeros(dim, dim);
    let mut center: Option<DVector<f64>> = None;
    let mut probe = x.clone();
    for k in 0..dim {
        probe[k] = x[k] + h;
        let plus = Configuration::from_flat(&probe).ok();
        probe[k] = x[k] - h;
        let minus = Configuration::from_flat(&probe).ok();
        probe[k] = x[k];
        let col = match (plus, minus) {
            (Some(p), Some(m)) => {
                (residual_with(model, &p, u, internal)? - residual_with(model, &m, u, internal)?)
                    / (2.0 * h)
            }
            (p, m) => {
                let c = match &center {
                    Some(c) => c.clone(),
                    None => {
                        let c = residual_with(model, theta, u, internal)?;
                        center = Some(c.clone());
                        c
                    }
                };
                match (p, m) {
                    (Some(p), None) => (residual_with(model, &p, u, internal)? - c) / h,
                    (None, Some(m)) => (c - residual_with(model, &m, u, internal)?) / h,
                    _ => {
                        return Err(Error::ChartBound {
                            joint: Some(k / 3),
                            norm: theta.joint(k / 3).norm(),
                        })
                    }
                }
            }
        };
        jac.set_column(k, &col);
    }
    Ok(jac)
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Convergence threshold on `‖residual‖∞` (N·m).
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Finite-difference step for the Jacobian (rad).
    pub fd_step: f64,
    /// Average the Jacobian with its transpose. Only meaningful for
    /// actuation that derives from a potential energy.
    pub symmetric_jacobian: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tolerance: 1e-9,
            max_iterations: 200,
            fd_step: 1e-6,
            symmetric_jacobian: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EquilibriumReport {
    pub converged: bool,
    /// Final `‖residual‖∞`.
    pub residual_norm: f64,
    pub iterations: usize,
    pub solution: Configuration,
}

/// Damped Newton solver bound to one model.
pub struct EquilibriumSolver<'a> {
    model: &'a RobotModel,
    internal: &'a dyn InternalTorque,
    options: SolverOptions,
}

const ARMIJO: f64 = 1e-4;
const MIN_STEP: f64 = 1e-12;
/// Joints are kept this far inside the chart boundary while stepping.
const CHART_MARGIN: f64 = 1e-6;

impl<'a> EquilibriumSolver<'a> {
    pub fn new(model: &'a RobotModel, options: SolverOptions) -> Self {
        EquilibriumSolver {
            model,
            internal: &NoInternalTorque,
            options,
        }
    }

    pub fn with_internal_torque(mut self, internal: &'a dyn InternalTorque) -> Self {
        self.internal = internal;
        self
    }

    pub fn options(&self) -> &SolverOptions {
        &self.options
    }

    fn residual(&self, theta: &Configuration, u: &ActuationCommand) -> Result<DVector<f64>> {
        residual_with(self.model, theta, u, self.internal)
    }

    /// Never fails on non-convergence; the report carries the last iterate.
    pub fn solve(
        &self,
        u: &ActuationCommand,
        theta_init: &Configuration,
    ) -> Result<EquilibriumReport> {
        self.model.check_configuration(theta_init)?;
        u.check_compatible(self.model)?;
        let mut x = theta_init.clone();
        let mut r = self.residual(&x, u)?;
        let mut merit = r.norm_squared();
        let mut iterations = 0;
        let report = |x: Configuration, r: &DVector<f64>, iterations, tol| {
            let residual_norm = r.amax();
            EquilibriumReport {
                converged: residual_norm <= tol,
                residual_norm,
                iterations,
                solution: x,
            }
        };
        while iterations < self.options.max_iterations {
            if r.amax() <= self.options.tolerance {
                break;
            }
            let mut jac = jacobian_with(self.model, &x, u, self.internal, self.options.fd_step)?;
            if self.options.symmetric_jacobian {
                jac = (&jac + jac.transpose()) * 0.5;
            }
            let newton = jac
                .clone()
                .lu()
                .solve(&-&r)
                .filter(|d| d.iter().all(|v| v.is_finite()));
            let gradient = jac.transpose() * &r;
            let mut accepted = None;
            let directions = newton
                .into_iter()
                .chain(std::iter::once(-&gradient / gradient.norm().max(1e-300)));
            for dir in directions {
                let slope = gradient.dot(&dir) * 2.0;
                if slope.is_nan() || slope >= 0.0 {
                    continue;
                }
                if let Some(step) = self.line_search(&x, &dir, u, merit, slope)? {
                    accepted = Some(step);
                    break;
                }
            }
            match accepted {
                Some((nx, nr)) => {
                    x = nx;
                    merit = nr.norm_squared();
                    r = nr;
                    iterations += 1;
                }
                None => break,
            }
        }
        Ok(report(x, &r, iterations, self.options.tolerance))
    }

    /// Backtracking on `‖r‖²` with the step first shrunk to stay inside the chart.
    #[allow(clippy::type_complexity)]
    fn line_search(
        &self,
        x: &Configuration,
        dir: &DVector<f64>,
        u: &ActuationCommand,
        merit: f64,
        slope: f64,
    ) -> Result<Option<(Configuration, DVector<f64>)>> {
        let base = x.to_vector();
        let mut alpha = 1.0;
        while alpha >= MIN_STEP {
            let trial = &base + dir * alpha;
            let inside = trial
                .as_slice()
                .chunks_exact(3)
                .all(|c| Vec3::new(c[0], c[1], c[2]).norm() < PI - CHART_MARGIN);
            if inside {
                let cand = Configuration::from_flat(trial.as_slice())?;
                let r = self.residual(&cand, u)?;
                let m = r.norm_squared();
                if m.is_finite() && m <= merit + ARMIJO * alpha * slope {
                    return Ok(Some((cand, r)));
                }
            }
            alpha *= 0.5;
        }
        Ok(None)
    }
}

/// One-shot equilibrium solve with default options and `τ_int ≡ 0`.
pub fn solve_equilibrium(
    model: &RobotModel,
    u: &ActuationCommand,
    theta_init: &Configuration,
) -> Result<EquilibriumReport> {
    EquilibriumSolver::new(model, SolverOptions::default()).solve(u, theta_init)
}
