#![allow(dead_code)]

use std::f64::consts::PI;

use morsecr::model::Frame;
use morsecr::{ActuatorElement, RobotModel, Vec3};

pub const BENCH_JOINTS: usize = 20;
pub const BENCH_TARGET: usize = 10;
pub const BENCH_ARM: f64 = 0.01;
pub const BENCH_STIFFNESS: f64 = 0.01;

pub fn z_frame() -> Frame {
    Frame::new(Vec3::z(), Vec3::x()).unwrap()
}

/// Straight robot along +z, one tendon pulling every joint about +y.
pub fn tendon_bench() -> RobotModel {
    RobotModel::uniform(
        BENCH_JOINTS,
        0.2,
        z_frame(),
        Vec3::repeat(BENCH_STIFFNESS),
        vec![ActuatorElement::Tendon {
            termination: BENCH_JOINTS - 1,
            beta: 0.0,
            moment_arm: BENCH_ARM,
        }],
    )
    .unwrap()
}

/// Closed form of the benchmark: every joint turns by `T d / k` about +y,
/// so link `i` makes angle `(i + 1) T d / k` with +z.
pub fn bench_angle(tension: f64) -> f64 {
    tension * BENCH_ARM / BENCH_STIFFNESS
}

/// Tension minimising the critical term at the target joint, by a uniform
/// scan of `10^4` points over `[0, 2T*]` with `T*` the analytic root.
pub fn bench_brute_force() -> f64 {
    let root = PI / 2.0 / (BENCH_TARGET + 1) as f64 * BENCH_STIFFNESS / BENCH_ARM;
    let n = 10_000;
    let mut best = (f64::INFINITY, 0.0);
    for k in 0..n {
        let t = 2.0 * root * k as f64 / (n - 1) as f64;
        let term = ((BENCH_TARGET + 1) as f64 * bench_angle(t)).cos().powi(2);
        if term < best.0 {
            best = (term, t);
        }
    }
    best.1
}

use morsecr::model::forward_kinematics;
use morsecr::morse::{morse_number, Thresholds};
use morsecr::{Configuration, Direction, Mat3};

/// Random robot along +z with `n` joints and link length `l`, bent by `theta`.
pub fn random_robot(n: usize, l: f64) -> RobotModel {
    RobotModel::uniform(n, n as f64 * l, z_frame(), Vec3::repeat(1.0), vec![]).unwrap()
}

fn rotation(axis_angle: Vec3) -> Mat3 {
    *nalgebra::Rotation3::new(axis_angle).matrix()
}

/// `𝔐_{-v} = 𝔐_v`: same count, critical joints and flags.
pub fn sign_symmetric(model: &RobotModel, theta: &Configuration, v: &Direction) -> bool {
    let shape = forward_kinematics(model, theta).unwrap();
    let a = morse_number(&shape, v, Thresholds::default());
    let b = morse_number(&shape, &v.neg(), Thresholds::default());
    a.count == b.count
        && a.critical_joints == b.critical_joints
        && a.degenerate_flags == b.degenerate_flags
        && a.generic == b.generic
}

/// Rotating robot, configuration and direction together leaves the descriptor unchanged.
pub fn rotation_equivariant(
    model: &RobotModel,
    theta: &Configuration,
    v: &Direction,
    axis_angle: Vec3,
) -> bool {
    let r = rotation(axis_angle);
    let shape = forward_kinematics(model, theta).unwrap();
    let rotated = forward_kinematics(&model.rotated(&r).unwrap(), &theta.rotated(&r)).unwrap();
    let a = morse_number(&shape, v, Thresholds::default());
    let b = morse_number(
        &rotated,
        &Direction::new(r * v.vector()).unwrap(),
        Thresholds::default(),
    );
    a.count == b.count
        && a.critical_joints == b.critical_joints
        && a.degenerate_flags == b.degenerate_flags
}

/// Scaling every link leaves count and critical joints unchanged.
pub fn scale_invariant(
    model: &RobotModel,
    theta: &Configuration,
    v: &Direction,
    factor: f64,
) -> bool {
    let shape = forward_kinematics(model, theta).unwrap();
    let scaled = forward_kinematics(&model.scaled(factor).unwrap(), theta).unwrap();
    let a = morse_number(&shape, v, Thresholds::default());
    let b = morse_number(&scaled, v, Thresholds::default());
    a.count == b.count && a.critical_joints == b.critical_joints
}

use morsecr::morse::lattice::hemisphere;
use morsecr::oracle::{continuous_morse_count, sample_to_model, AnalyticCurve};

pub fn oracle_curves() -> Vec<AnalyticCurve> {
    vec![
        AnalyticCurve::Straight { length: 1.0 },
        AnalyticCurve::arc(1.0, 0.5),
        AnalyticCurve::arc(1.0, 2.0),
        AnalyticCurve::arc(1.0, 3.0),
        AnalyticCurve::biarc(1.0, 2.0, 2.0),
        AnalyticCurve::helix_turns(2.5),
    ]
}

#[derive(Debug, Default)]
pub struct OracleTally {
    pub compared: usize,
    pub excluded: usize,
    /// Directions with a continuous root within half a link of an end.
    pub boundary: usize,
    /// `(curve index, joints, direction index, discrete, continuous)`
    pub mismatches: Vec<(usize, usize, usize, usize, usize)>,
}

/// Discrete Morse number against the dense continuous count, skipping
/// directions that are non-generic for either. Link tangents sample the curve
/// at link midpoints, so a root closer than half a link to either end is
/// invisible to the discrete count; such directions are tallied separately.
pub fn oracle_equivalence(
    curves: &[AnalyticCurve],
    joints: &[usize],
    n_dirs: usize,
    n_dense: usize,
) -> OracleTally {
    let dirs: Vec<Direction> = hemisphere(n_dirs)
        .into_iter()
        .map(|v| Direction::new(v).unwrap())
        .collect();
    let mut tally = OracleTally::default();
    for (c, curve) in curves.iter().enumerate() {
        let continuous: Vec<_> = dirs
            .iter()
            .map(|v| continuous_morse_count(curve, v, n_dense).unwrap())
            .collect();
        for &n in joints {
            let (model, theta) = sample_to_model(curve, n).unwrap();
            let shape = forward_kinematics(&model, &theta).unwrap();
            for (d, v) in dirs.iter().enumerate() {
                let discrete = morse_number(&shape, v, Thresholds::default());
                let cont = &continuous[d];
                if !discrete.generic || !cont.generic || cont.degenerate {
                    tally.excluded += 1;
                    continue;
                }
                let half = 0.5 * curve.length() / n as f64;
                if cont
                    .roots
                    .iter()
                    .any(|s| *s < half || *s > curve.length() - half)
                {
                    tally.boundary += 1;
                    continue;
                }
                tally.compared += 1;
                if discrete.count != cont.count {
                    tally.mismatches.push((c, n, d, discrete.count, cont.count));
                }
            }
        }
    }
    tally
}

pub const MAGNET_ANGLE_MAX: f64 = 3.0;
pub const MAGNET_FIELD_MAX: f64 = 0.01;

/// Straight 30-joint robot with two axial magnets and a transverse tip magnet.
pub fn magnet_robot() -> RobotModel {
    let n = 30;
    RobotModel::uniform(
        n,
        0.3,
        z_frame(),
        Vec3::repeat(0.01),
        vec![
            ActuatorElement::Magnet {
                joint: 9,
                moment: Vec3::z(),
            },
            ActuatorElement::Magnet {
                joint: 19,
                moment: Vec3::z(),
            },
            ActuatorElement::Magnet {
                joint: 29,
                moment: Vec3::x(),
            },
        ],
    )
    .unwrap()
}

use morsecr::statics::{residual, residual_jacobian, solve_equilibrium};
use morsecr::ActuationCommand;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Largest `‖θ − θ̄‖∞` after solving `u = 0` from random starts with `‖θ_i‖ ≤ 1`.
pub fn zero_command_recovers_reference(trials: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 12;
    let theta_bar = Configuration::new(
        (0..n)
            .map(|i| Vec3::new(0.0, 0.05 * i as f64 / n as f64, 0.02))
            .collect(),
    )
    .unwrap();
    let model = RobotModel::new(
        vec![0.02; n],
        vec![z_frame(); n],
        Some(theta_bar.clone()),
        (0..n)
            .map(|i| Vec3::new(0.5, 0.5 + 0.1 * i as f64, 0.2))
            .collect(),
        vec![ActuatorElement::Magnet {
            joint: n - 1,
            moment: Vec3::z(),
        }],
    )
    .unwrap();
    let u = ActuationCommand::Field(Vec3::zeros());
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let init = Configuration::new(
            (0..n)
                .map(|_| loop {
                    let w = Vec3::new(
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                    );
                    if w.norm() <= 1.0 {
                        break w;
                    }
                })
                .collect(),
        )
        .unwrap();
        let rep = solve_equilibrium(&model, &u, &init).unwrap();
        assert!(rep.converged);
        let err = (rep.solution.to_vector() - theta_bar.to_vector()).amax();
        worst = worst.max(err);
    }
    worst
}

/// Largest deviation of the benchmark equilibrium from `θ_i = T d / k ŷ`.
pub fn tendon_closed_form_error(tensions: &[f64]) -> f64 {
    let model = tendon_bench();
    let mut worst: f64 = 0.0;
    for &t in tensions {
        let rep = solve_equilibrium(
            &model,
            &ActuationCommand::Tensions(vec![t]),
            model.theta_bar(),
        )
        .unwrap();
        assert!(rep.converged);
        for w in rep.solution.joints() {
            worst = worst.max((w - Vec3::new(0.0, bench_angle(t), 0.0)).amax());
        }
    }
    worst
}

/// Least-squares slope of `log ‖r(θ + hδ) − r(θ) − J hδ‖` against `log h` for
/// the magnet robot at a bent configuration.
pub fn jacobian_taylor_order(steps: &[f64], seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = magnet_robot();
    let n = model.n_joints();
    let u = ActuationCommand::Field(Vec3::new(0.006, 0.002, -0.004));
    let theta = Configuration::new(
        (0..n)
            .map(|_| {
                Vec3::new(
                    rng.random_range(-0.2..0.2),
                    rng.random_range(-0.2..0.2),
                    rng.random_range(-0.2..0.2),
                )
            })
            .collect(),
    )
    .unwrap();
    let delta = nalgebra::DVector::from_fn(3 * n, |_, _| rng.random_range(-1.0..1.0)).normalize();
    let r0 = residual(&model, &theta, &u).unwrap();
    let jac = residual_jacobian(&model, &theta, &u, 1e-6).unwrap();
    let points: Vec<(f64, f64)> = steps
        .iter()
        .map(|&h| {
            let moved =
                Configuration::from_flat((theta.to_vector() + &delta * h).as_slice()).unwrap();
            let r = residual(&model, &moved, &u).unwrap();
            let rem = (r - &r0 - &jac * &delta * h).norm();
            (h.ln(), rem.ln())
        })
        .collect();
    let mx = points.iter().map(|p| p.0).sum::<f64>() / points.len() as f64;
    let my = points.iter().map(|p| p.1).sum::<f64>() / points.len() as f64;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}
