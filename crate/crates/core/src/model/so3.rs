//! Exponential map on SO(3) restricted to the chart `‖w‖ < π`.

use std::f64::consts::PI;

use crate::{Error, Mat3, Result, Vec3};

/// Below this angle the Rodrigues coefficients switch to their Taylor series.
const SMALL_ANGLE: f64 = 1e-6;

/// Skew-symmetric matrix `[w]×` with `[w]× x = w × x`.
pub fn hat(w: &Vec3) -> Mat3 {
    Mat3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

/// Rotation matrix `exp([w]×)` via the Rodrigues formula.
///
/// Rejects `‖w‖ ≥ π` (or non-finite input): the axis-angle chart is only
/// injective inside the open ball.
pub fn exp_so3(w: &Vec3) -> Result<Mat3> {
    let theta = w.norm();
    if theta.is_nan() || theta >= PI {
        return Err(Error::ChartBound {
            joint: None,
            norm: theta,
        });
    }
    let k = hat(w);
    let theta2 = theta * theta;
    let (a, b) = if theta < SMALL_ANGLE {
        // sin(x)/x and (1 - cos(x))/x^2 to fourth order
        (
            1.0 - theta2 / 6.0 + theta2 * theta2 / 120.0,
            0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0,
        )
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / theta2)
    };
    Ok(Mat3::identity() + k * a + k * k * b)
}

/// Rotation vector of the minimal rotation taking unit vector `from` onto unit vector `to`.
///
/// Antiparallel inputs have no minimal rotation inside the chart and are rejected.
pub fn rotation_between(from: &Vec3, to: &Vec3) -> Result<Vec3> {
    let axis = from.cross(to);
    let s = axis.norm();
    let c = from.dot(to);
    let angle = s.atan2(c);
    if angle >= PI - 1e-12 || (s < 1e-300 && c < 0.0) {
        return Err(Error::ChartBound {
            joint: None,
            norm: angle,
        });
    }
    if s < 1e-300 {
        return Ok(Vec3::zeros());
    }
    Ok(axis * (angle / s))
}
