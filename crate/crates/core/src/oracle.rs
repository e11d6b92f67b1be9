//! Analytic centerlines and a continuous critical-point counter.
//!
//! Everything here works on the smooth curve `p(s)` directly and shares no code
//! path with [`crate::morse`], so it can serve as ground truth for the discrete
//! descriptor. Planar curves start at the origin with tangent `+z` and bend
//! toward `+x`.

use crate::model::{rotation_between, Frame};
use crate::morse::lattice::orthonormal_complement;
use crate::morse::Direction;
use crate::{Configuration, Error, Mat3, Result, RobotModel, Vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AnalyticCurve {
    Straight {
        length: f64,
    },
    /// Constant curvature, total turning `turning` rad.
    Arc {
        length: f64,
        turning: f64,
    },
    /// Turns `first` rad over the first half, then back by `second` rad.
    Biarc {
        length: f64,
        first: f64,
        second: f64,
    },
    /// Circular helix about the z-axis, starting at the origin.
    Helix {
        radius: f64,
        /// Rise per radian of winding.
        rise: f64,
        turns: f64,
    },
}

/// Planar displacement `(Δx, Δz)` along a constant-curvature piece starting at
/// heading `phi0` (angle from `+z` toward `+x`).
fn planar_piece(phi0: f64, kappa: f64, ds: f64) -> (f64, f64) {
    if kappa.abs() * ds < 1e-9 {
        let mid = phi0 + 0.5 * kappa * ds;
        return (ds * mid.sin(), ds * mid.cos());
    }
    let phi1 = phi0 + kappa * ds;
    (
        (phi0.cos() - phi1.cos()) / kappa,
        (phi1.sin() - phi0.sin()) / kappa,
    )
}

impl AnalyticCurve {
    pub fn arc(length: f64, turning: f64) -> Self {
        AnalyticCurve::Arc { length, turning }
    }

    pub fn biarc(length: f64, first: f64, second: f64) -> Self {
        AnalyticCurve::Biarc {
            length,
            first,
            second,
        }
    }

    pub fn helix_turns(turns: f64) -> Self {
        AnalyticCurve::Helix {
            radius: 0.1,
            rise: 0.04,
            turns,
        }
    }

    pub fn length(&self) -> f64 {
        match *self {
            AnalyticCurve::Straight { length }
            | AnalyticCurve::Arc { length, .. }
            | AnalyticCurve::Biarc { length, .. } => length,
            AnalyticCurve::Helix {
                radius,
                rise,
                turns,
            } => radius.hypot(rise) * 2.0 * std::f64::consts::PI * turns,
        }
    }

    /// Heading and curvature of the planar kinds at `s`.
    fn planar_state(&self, s: f64) -> (f64, f64) {
        match *self {
            AnalyticCurve::Straight { .. } => (0.0, 0.0),
            AnalyticCurve::Arc { length, turning } => {
                let k = turning / length;
                (k * s, k)
            }
            AnalyticCurve::Biarc {
                length,
                first,
                second,
            } => {
                let half = 0.5 * length;
                if s <= half {
                    let k = first / half;
                    (k * s, k)
                } else {
                    let k = -second / half;
                    (first + k * (s - half), k)
                }
            }
            AnalyticCurve::Helix { .. } => unreachable!("helix is not planar"),
        }
    }

    fn helix_angle(&self, s: f64) -> (f64, f64, f64) {
        match *self {
            AnalyticCurve::Helix { radius, rise, .. } => {
                let g = radius.hypot(rise);
                (s / g, radius, g)
            }
            _ => unreachable!(),
        }
    }

    pub fn position(&self, s: f64) -> Vec3 {
        match *self {
            AnalyticCurve::Straight { .. } => Vec3::new(0.0, 0.0, s),
            AnalyticCurve::Arc { length, turning } => {
                let (dx, dz) = planar_piece(0.0, turning / length, s);
                Vec3::new(dx, 0.0, dz)
            }
            AnalyticCurve::Biarc {
                length,
                first,
                second,
            } => {
                let half = 0.5 * length;
                let (x1, z1) = planar_piece(0.0, first / half, s.min(half));
                if s <= half {
                    return Vec3::new(x1, 0.0, z1);
                }
                let (x2, z2) = planar_piece(first, -second / half, s - half);
                Vec3::new(x1 + x2, 0.0, z1 + z2)
            }
            AnalyticCurve::Helix { rise, .. } => {
                let (sigma, a, _) = self.helix_angle(s);
                Vec3::new(a * sigma.cos() - a, a * sigma.sin(), rise * sigma)
            }
        }
    }

    /// Unit tangent `p′(s)`.
    pub fn tangent(&self, s: f64) -> Vec3 {
        match self {
            AnalyticCurve::Helix { rise, .. } => {
                let (sigma, a, g) = self.helix_angle(s);
                Vec3::new(-a * sigma.sin(), a * sigma.cos(), *rise) / g
            }
            _ => {
                let (phi, _) = self.planar_state(s);
                Vec3::new(phi.sin(), 0.0, phi.cos())
            }
        }
    }

    /// Curvature vector `p″(s)`.
    pub fn curvature(&self, s: f64) -> Vec3 {
        match self {
            AnalyticCurve::Helix { .. } => {
                let (sigma, a, g) = self.helix_angle(s);
                Vec3::new(-a * sigma.cos(), -a * sigma.sin(), 0.0) / (g * g)
            }
            _ => {
                let (phi, k) = self.planar_state(s);
                Vec3::new(phi.cos(), 0.0, -phi.sin()) * k
            }
        }
    }
}

/// Result of the dense-sampling counter.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousCount {
    /// Non-degenerate critical points.
    pub count: usize,
    /// Refined locations of every detected sign change.
    pub roots: Vec<f64>,
    /// Some refined crossing had `|v·p″| ≤ 1e-9`.
    pub degenerate: bool,
    /// False when some sample had `|v·p′| ≤ 1e-10`.
    pub generic: bool,
}

const ZERO_SAMPLE: f64 = 1e-10;
const ROOT_WIDTH: f64 = 1e-12;
const DEGENERATE_BEND: f64 = 1e-9;

/// Counts non-degenerate zeros of `s ↦ v·p′(s)` on `(0, L)`.
pub fn continuous_morse_count(
    curve: &AnalyticCurve,
    v: &Direction,
    n_dense: usize,
) -> Result<ContinuousCount> {
    if n_dense < 10_000 {
        return Err(Error::invalid("n_dense", format!("{n_dense} < 10000")));
    }
    let v = v.vector();
    let length = curve.length();
    let f = |s: f64| v.dot(&curve.tangent(s));
    let mut out = ContinuousCount {
        count: 0,
        roots: Vec::new(),
        degenerate: false,
        generic: true,
    };
    let mut last: Option<(f64, f64)> = None;
    for k in 0..n_dense {
        let s = (k as f64 + 0.5) * length / n_dense as f64;
        let value = f(s);
        if value.abs() <= ZERO_SAMPLE {
            out.generic = false;
            continue;
        }
        if let Some((s_prev, f_prev)) = last {
            if (f_prev > 0.0) != (value > 0.0) {
                let (mut lo, mut hi) = (s_prev, s);
                let lo_positive = f_prev > 0.0;
                while hi - lo > ROOT_WIDTH {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if (f(mid) > 0.0) == lo_positive {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let root = 0.5 * (lo + hi);
                out.roots.push(root);
                if v.dot(&curve.curvature(root)).abs() > DEGENERATE_BEND {
                    out.count += 1;
                } else {
                    out.degenerate = true;
                }
            }
        }
        last = Some((s, value));
    }
    Ok(out)
}

/// PRB model whose links are the chords between `n_joints + 1` uniform
/// arc-length nodes of the curve, with joint rotations recovered as minimal
/// rotations between consecutive chord directions.
pub fn sample_to_model(
    curve: &AnalyticCurve,
    n_joints: usize,
) -> Result<(RobotModel, Configuration)> {
    if n_joints < 2 {
        return Err(Error::invalid("n_joints", format!("{n_joints} < 2")));
    }
    let length = curve.length();
    let nodes: Vec<Vec3> = (0..=n_joints)
        .map(|k| curve.position(length * k as f64 / n_joints as f64))
        .collect();
    let chords: Vec<Vec3> = nodes.windows(2).map(|w| w[1] - w[0]).collect();
    let lengths: Vec<f64> = chords.iter().map(|c| c.norm()).collect();
    let t_bar = curve.tangent(0.0).normalize();
    let frame = Frame::new(t_bar, orthonormal_complement(&t_bar).0)?;
    let mut joints = Vec::with_capacity(n_joints);
    let mut acc = Mat3::identity();
    for (i, (c, l)) in chords.iter().zip(&lengths).enumerate() {
        let local = acc.transpose() * (c / *l);
        let w = rotation_between(&t_bar, &local).map_err(|_| Error::ChartBound {
            joint: Some(i),
            norm: std::f64::consts::PI,
        })?;
        acc *= crate::model::exp_so3(&w).map_err(|_| Error::ChartBound {
            joint: Some(i),
            norm: w.norm(),
        })?;
        joints.push(w);
    }
    let model = RobotModel::new(
        lengths,
        vec![frame; n_joints],
        None,
        vec![Vec3::repeat(1.0); n_joints],
        vec![],
    )?;
    Ok((model, Configuration::new(joints)?))
}
