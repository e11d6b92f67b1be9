//! Pseudo-rigid-body kinematics.
//!
//! The backbone is a chain of `N` rigid links. Joint `i` carries a rotation
//! vector `θ_i` and a reference triad `(t̄_i, ū_i, v̄_i)` expressed in the world
//! frame of the undeformed robot. The deformed tangent of link `i` is
//! `t_i = R_0^i t̄_i` with `R_0^i = exp([θ_0]×) ⋯ exp([θ_i]×)`, and points are
//! accumulated from the base `p_0 = 0`.

pub mod so3;

use std::f64::consts::PI;

use nalgebra::DVector;

pub use so3::{exp_so3, hat, rotation_between};

use crate::statics::ActuatorElement;
use crate::{Error, Mat3, Result, Vec3};

const FRAME_TOL: f64 = 1e-12;
const DISTAL_POSE_TOL: f64 = 1e-10;

/// Orthonormal reference triad of a joint. `v` is always `t × u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub t: Vec3,
    pub u: Vec3,
    pub v: Vec3,
}

impl Frame {
    pub fn new(t: Vec3, u: Vec3) -> Result<Self> {
        if (t.norm() - 1.0).abs() > FRAME_TOL {
            return Err(Error::invalid(
                "ref_frames.t",
                format!("norm {} is not 1", t.norm()),
            ));
        }
        if (u.norm() - 1.0).abs() > FRAME_TOL {
            return Err(Error::invalid(
                "ref_frames.u",
                format!("norm {} is not 1", u.norm()),
            ));
        }
        if t.dot(&u).abs() > FRAME_TOL {
            return Err(Error::invalid(
                "ref_frames",
                format!("t and u are not orthogonal (t·u = {:e})", t.dot(&u)),
            ));
        }
        Ok(Frame {
            t,
            u,
            v: t.cross(&u),
        })
    }

    /// Columns `(t, u, v)`.
    pub fn matrix(&self) -> Mat3 {
        Mat3::from_columns(&[self.t, self.u, self.v])
    }

    pub fn rotated(&self, r: &Mat3) -> Frame {
        Frame {
            t: r * self.t,
            u: r * self.u,
            v: r * self.v,
        }
    }
}

/// Rigid transform of the distal frame `{b}` in the world frame `{w}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vec3,
    pub rotation: Mat3,
}

/// Joint rotation vectors, one per joint, each inside the chart `‖θ_i‖ < π`.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    joints: Vec<Vec3>,
}

impl Configuration {
    pub fn new(joints: Vec<Vec3>) -> Result<Self> {
        for (i, w) in joints.iter().enumerate() {
            let norm = w.norm();
            if norm.is_nan() || norm >= PI {
                return Err(Error::ChartBound {
                    joint: Some(i),
                    norm,
                });
            }
        }
        Ok(Configuration { joints })
    }

    pub fn zeros(n_joints: usize) -> Self {
        Configuration {
            joints: vec![Vec3::zeros(); n_joints],
        }
    }

    /// Builds from the flat `3N` layout `[θ_0x, θ_0y, θ_0z, θ_1x, ...]`.
    pub fn from_flat(values: &[f64]) -> Result<Self> {
        if !values.len().is_multiple_of(3) {
            return Err(Error::invalid(
                "theta",
                format!("length {} is not a multiple of 3", values.len()),
            ));
        }
        Self::new(
            values
                .chunks_exact(3)
                .map(|c| Vec3::new(c[0], c[1], c[2]))
                .collect(),
        )
    }

    pub fn n_joints(&self) -> usize {
        self.joints.len()
    }

    pub fn joints(&self) -> &[Vec3] {
        &self.joints
    }

    pub fn joint(&self, i: usize) -> &Vec3 {
        &self.joints[i]
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.joints.iter().flat_map(|w| [w.x, w.y, w.z]).collect()
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_vec(self.to_flat())
    }

    pub fn rotated(&self, r: &Mat3) -> Configuration {
        Configuration {
            joints: self.joints.iter().map(|w| r * w).collect(),
        }
    }

    /// Largest per-joint rotation angle.
    pub fn max_angle(&self) -> f64 {
        self.joints.iter().map(|w| w.norm()).fold(0.0, f64::max)
    }
}

/// Immutable description of a pseudo-rigid-body robot.
#[derive(Debug, Clone)]
pub struct RobotModel {
    link_lengths: Vec<f64>,
    ref_frames: Vec<Frame>,
    theta_bar: Configuration,
    stiffness: Vec<Vec3>,
    actuators: Vec<ActuatorElement>,
    ref_distal_pose: Pose,
}

impl RobotModel {
    /// Validates every invariant and computes the reference distal pose.
    pub fn new(
        link_lengths: Vec<f64>,
        ref_frames: Vec<Frame>,
        theta_bar: Option<Configuration>,
        stiffness: Vec<Vec3>,
        actuators: Vec<ActuatorElement>,
    ) -> Result<Self> {
        let n = link_lengths.len();
        if n == 0 {
            return Err(Error::invalid("n_joints", "must be positive"));
        }
        if let Some((i, l)) = link_lengths
            .iter()
            .enumerate()
            .find(|(_, l)| !(l.is_finite() && **l > 0.0))
        {
            return Err(Error::invalid(
                format!("link_lengths[{i}]"),
                format!("{l} is not a positive length"),
            ));
        }
        if ref_frames.len() != n {
            return Err(Error::Dimension {
                what: "ref_frames",
                expected: n,
                got: ref_frames.len(),
            });
        }
        if stiffness.len() != n {
            return Err(Error::Dimension {
                what: "stiffness",
                expected: n,
                got: stiffness.len(),
            });
        }
        for (i, k) in stiffness.iter().enumerate() {
            if !k.iter().all(|x| x.is_finite() && *x > 0.0) {
                return Err(Error::invalid(
                    format!("stiffness[{i}]"),
                    "entries must be positive",
                ));
            }
        }
        let theta_bar = theta_bar.unwrap_or_else(|| Configuration::zeros(n));
        if theta_bar.n_joints() != n {
            return Err(Error::Dimension {
                what: "theta_bar",
                expected: 3 * n,
                got: 3 * theta_bar.n_joints(),
            });
        }
        for (j, a) in actuators.iter().enumerate() {
            a.validate(n)
                .map_err(|reason| Error::invalid(format!("actuators[{j}]"), reason))?;
        }
        let mut model = RobotModel {
            link_lengths,
            ref_frames,
            theta_bar,
            stiffness,
            actuators,
            ref_distal_pose: Pose {
                position: Vec3::zeros(),
                rotation: Mat3::identity(),
            },
        };
        model.ref_distal_pose = model.distal_pose(&model.theta_bar)?;
        Ok(model)
    }

    /// Straight robot with identical links and frames, the usual generator.
    pub fn uniform(
        n_joints: usize,
        total_length: f64,
        frame: Frame,
        stiffness: Vec3,
        actuators: Vec<ActuatorElement>,
    ) -> Result<Self> {
        RobotModel::new(
            vec![total_length / n_joints as f64; n_joints],
            vec![frame; n_joints],
            None,
            vec![stiffness; n_joints],
            actuators,
        )
    }

    /// Checks an externally supplied reference distal pose against forward kinematics.
    pub fn check_ref_distal_pose(&self, pose: &Pose) -> Result<()> {
        let dp = (pose.position - self.ref_distal_pose.position).norm();
        let dr = (pose.rotation - self.ref_distal_pose.rotation).norm();
        if dp > DISTAL_POSE_TOL || dr > DISTAL_POSE_TOL {
            return Err(Error::invalid(
                "ref_distal_pose",
                format!("differs from forward kinematics at theta_bar (position {dp:e}, rotation {dr:e})"),
            ));
        }
        Ok(())
    }

    pub fn n_joints(&self) -> usize {
        self.link_lengths.len()
    }

    pub fn link_lengths(&self) -> &[f64] {
        &self.link_lengths
    }

    pub fn total_length(&self) -> f64 {
        self.link_lengths.iter().sum()
    }

    pub fn ref_frames(&self) -> &[Frame] {
        &self.ref_frames
    }

    pub fn theta_bar(&self) -> &Configuration {
        &self.theta_bar
    }

    pub fn stiffness(&self) -> &[Vec3] {
        &self.stiffness
    }

    pub fn actuators(&self) -> &[ActuatorElement] {
        &self.actuators
    }

    pub fn ref_distal_pose(&self) -> &Pose {
        &self.ref_distal_pose
    }

    /// Diagonal of `Λ` in the flat `3N` layout.
    pub fn stiffness_diagonal(&self) -> DVector<f64> {
        DVector::from_iterator(
            3 * self.n_joints(),
            self.stiffness.iter().flat_map(|k| [k.x, k.y, k.z]),
        )
    }

    pub fn check_configuration(&self, theta: &Configuration) -> Result<()> {
        if theta.n_joints() != self.n_joints() {
            return Err(Error::Dimension {
                what: "configuration",
                expected: 3 * self.n_joints(),
                got: 3 * theta.n_joints(),
            });
        }
        Ok(())
    }

    /// Pose of the distal frame: tip position and `R_0^{N-1}` applied to the last triad.
    pub fn distal_pose(&self, theta: &Configuration) -> Result<Pose> {
        let shape = forward_kinematics(self, theta)?;
        let chain = compose_chain(theta)?;
        let last = self.n_joints() - 1;
        Ok(Pose {
            position: shape.points[last + 1],
            rotation: chain[last] * self.ref_frames[last].matrix(),
        })
    }

    /// The same robot rigidly rotated by `r`: frames, reference configuration
    /// and magnet moments all rotate.
    pub fn rotated(&self, r: &Mat3) -> Result<RobotModel> {
        RobotModel::new(
            self.link_lengths.clone(),
            self.ref_frames.iter().map(|f| f.rotated(r)).collect(),
            Some(self.theta_bar.rotated(r)),
            self.stiffness.clone(),
            self.actuators.iter().map(|a| a.rotated(r)).collect(),
        )
    }

    /// The same robot with every link length multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<RobotModel> {
        RobotModel::new(
            self.link_lengths.iter().map(|l| l * factor).collect(),
            self.ref_frames.clone(),
            Some(self.theta_bar.clone()),
            self.stiffness.clone(),
            self.actuators.clone(),
        )
    }
}

/// Discrete centerline derived from a configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Shape {
    /// `N + 1` points, `points[0]` at the origin.
    pub points: Vec<Vec3>,
    /// `N` unit link tangents.
    pub tangents: Vec<Vec3>,
    /// `N - 1` curvature vectors; `curvatures[k]` belongs to joint `k + 1`.
    pub curvatures: Vec<Vec3>,
    pub link_lengths: Vec<f64>,
}

impl Shape {
    /// Builds a shape from tangents and link lengths.
    pub fn from_tangents(tangents: Vec<Vec3>, link_lengths: Vec<f64>) -> Shape {
        debug_assert_eq!(tangents.len(), link_lengths.len());
        let mut points = Vec::with_capacity(tangents.len() + 1);
        let mut p = Vec3::zeros();
        points.push(p);
        for (t, l) in tangents.iter().zip(&link_lengths) {
            p += t * *l;
            points.push(p);
        }
        let curvatures = (1..tangents.len())
            .map(|i| (tangents[i] - tangents[i - 1]) / link_lengths[i])
            .collect();
        Shape {
            points,
            tangents,
            curvatures,
            link_lengths,
        }
    }

    pub fn n_joints(&self) -> usize {
        self.tangents.len()
    }

    pub fn total_length(&self) -> f64 {
        self.link_lengths.iter().sum()
    }

    /// Curvature at interior joint `i` (`1 ≤ i < N`).
    pub fn curvature(&self, joint: usize) -> &Vec3 {
        &self.curvatures[joint - 1]
    }

    pub fn rotated(&self, r: &Mat3) -> Shape {
        Shape {
            points: self.points.iter().map(|p| r * p).collect(),
            tangents: self.tangents.iter().map(|t| r * t).collect(),
            curvatures: self.curvatures.iter().map(|k| r * k).collect(),
            link_lengths: self.link_lengths.clone(),
        }
    }
}

/// Cumulative products `R_0^i = R_0 R_1 ⋯ R_i` for every joint.
pub fn compose_chain(theta: &Configuration) -> Result<Vec<Mat3>> {
    let mut out = Vec::with_capacity(theta.n_joints());
    let mut acc = Mat3::identity();
    for (i, w) in theta.joints().iter().enumerate() {
        let r = exp_so3(w).map_err(|e| match e {
            Error::ChartBound { norm, .. } => Error::ChartBound {
                joint: Some(i),
                norm,
            },
            other => other,
        })?;
        acc *= r;
        out.push(acc);
    }
    Ok(out)
}

pub fn forward_kinematics(model: &RobotModel, theta: &Configuration) -> Result<Shape> {
    model.check_configuration(theta)?;
    let chain = compose_chain(theta)?;
    let tangents = chain
        .iter()
        .zip(model.ref_frames())
        .map(|(r, f)| r * f.t)
        .collect();
    Ok(Shape::from_tangents(tangents, model.link_lengths.clone()))
}

/// First-order curvature `[θ_i]× t̄_i / l_i`.
pub fn linearized_curvature(theta_i: &Vec3, t_bar: &Vec3, link_length: f64) -> Vec3 {
    theta_i.cross(t_bar) / link_length
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn z_frame() -> Frame {
        Frame::new(Vec3::z(), Vec3::x()).unwrap()
    }

    fn straight(n: usize, len: f64) -> RobotModel {
        RobotModel::uniform(n, len, z_frame(), Vec3::repeat(1.0), vec![]).unwrap()
    }

    fn random_config(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Configuration {
        Configuration::new(
            (0..n)
                .map(|_| {
                    Vec3::new(
                        rng.random_range(-scale..scale),
                        rng.random_range(-scale..scale),
                        rng.random_range(-scale..scale),
                    )
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn frame_validation() {
        assert_eq!(z_frame().v, Vec3::new(0.0, 1.0, 0.0));
        assert!(Frame::new(Vec3::new(0.0, 0.0, 2.0), Vec3::x()).is_err());
        assert!(Frame::new(Vec3::z(), Vec3::new(0.0, 0.6, 0.8)).is_err());
    }

    #[test]
    fn model_rejects_bad_inputs() {
        let f = z_frame();
        let err = RobotModel::new(
            vec![0.1, 0.0],
            vec![f; 2],
            None,
            vec![Vec3::repeat(1.0); 2],
            vec![],
        )
        .unwrap_err();
        assert!(err.to_string().contains("link_lengths[1]"), "{err}");
        let err = RobotModel::new(
            vec![0.1, 0.1],
            vec![f; 2],
            None,
            vec![Vec3::repeat(1.0), Vec3::new(1.0, -1.0, 1.0)],
            vec![],
        )
        .unwrap_err();
        assert!(err.to_string().contains("stiffness[1]"), "{err}");
        assert!(RobotModel::new(vec![], vec![], None, vec![], vec![]).is_err());
    }

    #[test]
    fn chain_of_zeros_is_identity() {
        let chain = compose_chain(&Configuration::zeros(5)).unwrap();
        assert!(chain.iter().all(|r| *r == Mat3::identity()));
    }

    #[test]
    fn single_nonzero_base_joint_propagates() {
        let mut joints = vec![Vec3::zeros(); 4];
        joints[0] = Vec3::new(0.2, -0.4, 0.1);
        let chain = compose_chain(&Configuration::new(joints.clone()).unwrap()).unwrap();
        let r0 = exp_so3(&joints[0]).unwrap();
        assert!(chain.iter().all(|r| (r - r0).norm() < 1e-15));
    }

    #[test]
    fn chain_matches_explicit_triple_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let theta = random_config(&mut rng, 3, 1.0);
        let chain = compose_chain(&theta).unwrap();
        let r: Vec<Mat3> = theta.joints().iter().map(|w| exp_so3(w).unwrap()).collect();
        assert!((chain[0] - r[0]).norm() < 1e-12);
        assert!((chain[1] - r[0] * r[1]).norm() < 1e-12);
        assert!((chain[2] - r[0] * r[1] * r[2]).norm() < 1e-12);
        for m in &chain {
            assert!((m.determinant() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn chain_reports_offending_joint() {
        let joints = vec![Vec3::zeros(), Vec3::new(0.0, 0.0, 3.5), Vec3::zeros()];
        let err = compose_chain(&Configuration { joints }).unwrap_err();
        assert!(matches!(err, Error::ChartBound { joint: Some(1), .. }));
        assert!(Configuration::from_flat(&[0.0, 0.0, 3.5]).is_err());
    }

    #[test]
    fn reference_state_is_straight() {
        let model = straight(8, 0.4);
        let shape = forward_kinematics(&model, model.theta_bar()).unwrap();
        for (i, p) in shape.points.iter().enumerate() {
            assert!((p - Vec3::z() * (0.05 * i as f64)).norm() < 1e-15);
        }
        let pose = model.distal_pose(model.theta_bar()).unwrap();
        model.check_ref_distal_pose(&pose).unwrap();
        assert!((pose.position - Vec3::new(0.0, 0.0, 0.4)).norm() < 1e-12);
        let off = Pose {
            position: pose.position + Vec3::new(1e-9, 0.0, 0.0),
            ..pose
        };
        assert!(model.check_ref_distal_pose(&off).is_err());
    }

    #[test]
    fn constant_joint_angles_trace_a_circle() {
        let phi = 0.15;
        let model = straight(12, 1.2);
        let theta = Configuration::new(vec![Vec3::new(0.0, phi, 0.0); 12]).unwrap();
        let shape = forward_kinematics(&model, &theta).unwrap();
        for w in shape.points.windows(2) {
            assert!(((w[1] - w[0]).norm() - 0.1).abs() < 1e-12);
        }
        for w in shape.tangents.windows(2) {
            let turn = w[0].dot(&w[1]).clamp(-1.0, 1.0).acos();
            assert!((turn - phi).abs() < 1e-9);
        }
        // every vertex is equidistant from the center of the inscribed polygon
        let r = 0.1 / (2.0 * (phi / 2.0).sin());
        let t0 = shape.tangents[0];
        let n0 = Vec3::y().cross(&t0);
        let center = shape.points[0] + (t0 * 0.05) + n0 * (r * (phi / 2.0).cos());
        for p in &shape.points {
            assert!(((p - center).norm() - r).abs() < 1e-12);
        }
    }

    #[test]
    fn points_match_naive_accumulation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let model = straight(10, 1.0);
        let theta = random_config(&mut rng, 10, 0.2);
        let shape = forward_kinematics(&model, &theta).unwrap();
        let mut r = Mat3::identity();
        let mut p = Vec3::zeros();
        for i in 0..10 {
            let w = theta.joint(i);
            let angle = w.norm();
            let k = hat(&(w / angle));
            r *= Mat3::identity() + k * angle.sin() + k * k * (1.0 - angle.cos());
            p += r * Vec3::z() * 0.1;
            assert!((shape.points[i + 1] - p).norm() < 1e-12);
        }
    }

    #[test]
    fn linearized_curvature_cases() {
        assert_eq!(
            linearized_curvature(&Vec3::zeros(), &Vec3::x(), 1.0),
            Vec3::zeros()
        );
        let k = linearized_curvature(&Vec3::new(0.0, 0.0, 0.7), &Vec3::x(), 1.0);
        assert!((k - Vec3::new(0.0, 0.7, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn linearized_curvature_error_is_second_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let model = straight(10, 1.0);
        let mut ratio_max: f64 = 0.0;
        for trial in 0..1000 {
            let scale = 1e-3 * (1.0 + (trial % 50) as f64);
            let theta = random_config(&mut rng, 10, scale);
            let shape = forward_kinematics(&model, &theta).unwrap();
            let total = theta.to_vector().norm();
            for i in 1..10 {
                let lin = linearized_curvature(theta.joint(i), &Vec3::z(), 0.1);
                let err = (lin - shape.curvature(i)).norm() * 0.1;
                ratio_max = ratio_max.max(err / (total * total));
            }
        }
        // fitted constant stays O(1) over two decades of amplitude
        assert!(ratio_max < 1.0, "C = {ratio_max}");
    }

    #[test]
    fn rigid_rotation_rotates_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let model = straight(7, 0.7);
        let theta = random_config(&mut rng, 7, 0.5);
        let r = exp_so3(&Vec3::new(0.4, -1.1, 0.3)).unwrap();
        let a = forward_kinematics(&model, &theta).unwrap();
        let b = forward_kinematics(&model.rotated(&r).unwrap(), &theta.rotated(&r)).unwrap();
        for (p, q) in a.points.iter().zip(&b.points) {
            assert!((r * p - q).norm() < 1e-12);
        }
        for (t, s) in a.tangents.iter().zip(&b.tangents) {
            assert!((r * t - s).norm() < 1e-12);
        }
    }

    #[test]
    fn inextensible_and_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let model = RobotModel::new(
            vec![0.1, 0.3, 0.05, 0.2],
            vec![z_frame(); 4],
            None,
            vec![Vec3::repeat(2.0); 4],
            vec![],
        )
        .unwrap();
        for _ in 0..50 {
            let theta = random_config(&mut rng, 4, 1.5);
            let s = forward_kinematics(&model, &theta).unwrap();
            let len: f64 = s.points.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
            assert!((len - 0.65).abs() < 1e-12);
            assert!(s.tangents.iter().all(|t| (t.norm() - 1.0).abs() < 1e-12));
            assert_eq!(s, forward_kinematics(&model, &theta).unwrap());
        }
    }
}
