//! JSON file formats and fixed-precision output.
//!
//! Model file:
//!
//! ```json
//! {
//!   "n_joints": 3,
//!   "link_lengths": [0.1, 0.1, 0.1],
//!   "stiffness": [[1, 1, 1], [1, 1, 1], [1, 1, 1]],
//!   "ref_frames": [{"t": [0, 0, 1], "u": [1, 0, 0]}, ...],
//!   "theta_bar": [0, 0, 0, ...],
//!   "actuators": [{"kind": "tendon", "termination": 2, "beta": 0.0, "moment_arm": 0.01}]
//! }
//! ```
//!
//! `theta_bar` is optional (zeros). An optional `ref_distal_pose`
//! (`{"position": [..], "rotation": [[..], [..], [..]]}`, rows) is checked
//! against forward kinematics. Configuration files hold `{"theta": [..3N..]}`
//! and command files exactly one of `tensions`, `field` or `torques`.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::Value;

use crate::model::{Frame, Pose};
use crate::{
    ActuationCommand, ActuatorElement, Configuration, Error, Mat3, Result, RobotModel, Vec3,
};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFrame {
    t: [f64; 3],
    u: [f64; 3],
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum RawActuator {
    Direct,
    Tendon {
        termination: usize,
        beta: f64,
        moment_arm: f64,
    },
    Magnet {
        joint: usize,
        moment: [f64; 3],
    },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPose {
    position: [f64; 3],
    rotation: [[f64; 3]; 3],
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    n_joints: usize,
    link_lengths: Vec<f64>,
    stiffness: Vec<[f64; 3]>,
    ref_frames: Vec<RawFrame>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    theta_bar: Option<Vec<f64>>,
    #[serde(default)]
    actuators: Vec<RawActuator>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ref_distal_pose: Option<RawPose>,
}

fn v3(a: &[f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

fn arr(v: &Vec3) -> [f64; 3] {
    [v.x, v.y, v.z]
}

pub fn parse_model(text: &str) -> Result<RobotModel> {
    let raw: RawModel = serde_json::from_str(text)?;
    let n = raw.n_joints;
    if n == 0 {
        return Err(Error::invalid("n_joints", "must be positive"));
    }
    if raw.link_lengths.len() != n {
        return Err(Error::invalid(
            "link_lengths",
            format!("has {} entries, n_joints is {n}", raw.link_lengths.len()),
        ));
    }
    if raw.stiffness.len() != n {
        return Err(Error::invalid(
            "stiffness",
            format!("has {} entries, n_joints is {n}", raw.stiffness.len()),
        ));
    }
    if raw.ref_frames.len() != n {
        return Err(Error::invalid(
            "ref_frames",
            format!("has {} entries, n_joints is {n}", raw.ref_frames.len()),
        ));
    }
    let frames = raw
        .ref_frames
        .iter()
        .enumerate()
        .map(|(i, f)| {
            Frame::new(v3(&f.t), v3(&f.u)).map_err(|e| match e {
                Error::Invalid { field, reason } => Error::Invalid {
                    field: field.replacen("ref_frames", &format!("ref_frames[{i}]"), 1),
                    reason,
                },
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let theta_bar = match raw.theta_bar {
        Some(values) => {
            if values.len() != 3 * n {
                return Err(Error::invalid(
                    "theta_bar",
                    format!("has {} entries, expected {}", values.len(), 3 * n),
                ));
            }
            Some(
                Configuration::from_flat(&values)
                    .map_err(|e| Error::invalid("theta_bar", e.to_string()))?,
            )
        }
        None => None,
    };
    let actuators = raw
        .actuators
        .into_iter()
        .map(|a| match a {
            RawActuator::Direct => ActuatorElement::Direct,
            RawActuator::Tendon {
                termination,
                beta,
                moment_arm,
            } => ActuatorElement::Tendon {
                termination,
                beta,
                moment_arm,
            },
            RawActuator::Magnet { joint, moment } => ActuatorElement::Magnet {
                joint,
                moment: v3(&moment),
            },
        })
        .collect();
    let model = RobotModel::new(
        raw.link_lengths,
        frames,
        theta_bar,
        raw.stiffness.iter().map(v3).collect(),
        actuators,
    )?;
    if let Some(p) = raw.ref_distal_pose {
        let rotation = Mat3::from_row_slice(&p.rotation.concat());
        model.check_ref_distal_pose(&Pose {
            position: v3(&p.position),
            rotation,
        })?;
    }
    Ok(model)
}

pub fn model_to_json(model: &RobotModel) -> Value {
    let raw = RawModel {
        n_joints: model.n_joints(),
        link_lengths: model.link_lengths().to_vec(),
        stiffness: model.stiffness().iter().map(arr).collect(),
        ref_frames: model
            .ref_frames()
            .iter()
            .map(|f| RawFrame {
                t: arr(&f.t),
                u: arr(&f.u),
            })
            .collect(),
        theta_bar: Some(model.theta_bar().to_flat()),
        actuators: model
            .actuators()
            .iter()
            .map(|a| match a {
                ActuatorElement::Direct => RawActuator::Direct,
                ActuatorElement::Tendon {
                    termination,
                    beta,
                    moment_arm,
                } => RawActuator::Tendon {
                    termination: *termination,
                    beta: *beta,
                    moment_arm: *moment_arm,
                },
                ActuatorElement::Magnet { joint, moment } => RawActuator::Magnet {
                    joint: *joint,
                    moment: arr(moment),
                },
            })
            .collect(),
        ref_distal_pose: None,
    };
    serde_json::to_value(raw).expect("plain data serialises")
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfiguration {
    theta: Vec<f64>,
}

pub fn parse_configuration(text: &str, model: &RobotModel) -> Result<Configuration> {
    let raw: RawConfiguration = serde_json::from_str(text)?;
    if raw.theta.len() != 3 * model.n_joints() {
        return Err(Error::invalid(
            "theta",
            format!(
                "has {} entries, expected {}",
                raw.theta.len(),
                3 * model.n_joints()
            ),
        ));
    }
    Configuration::from_flat(&raw.theta).map_err(|e| Error::invalid("theta", e.to_string()))
}

pub fn configuration_to_json(theta: &Configuration) -> Value {
    serde_json::json!({ "theta": theta.to_flat() })
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCommand {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tensions: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    field: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    torques: Option<Vec<f64>>,
}

pub fn parse_command(text: &str) -> Result<ActuationCommand> {
    let raw: RawCommand = serde_json::from_str(text)?;
    match (raw.tensions, raw.field, raw.torques) {
        (Some(t), None, None) => Ok(ActuationCommand::Tensions(t)),
        (None, Some(b), None) => Ok(ActuationCommand::Field(v3(&b))),
        (None, None, Some(t)) => Ok(ActuationCommand::Torques(t)),
        _ => Err(Error::invalid(
            "command",
            "exactly one of `tensions`, `field`, `torques` is required",
        )),
    }
}

pub fn command_to_json(u: &ActuationCommand) -> Value {
    let mut raw = RawCommand::default();
    match u {
        ActuationCommand::Tensions(t) => raw.tensions = Some(t.clone()),
        ActuationCommand::Field(b) => raw.field = Some(arr(b)),
        ActuationCommand::Torques(t) => raw.torques = Some(t.clone()),
    }
    serde_json::to_value(raw).expect("plain data serialises")
}

pub fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::invalid(path.display().to_string(), e.to_string()))
}

/// 17 significant digits in scientific notation, the fixed float format of
/// every CSV cell and JSON number written by this crate.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

/// Pretty JSON with floats printed through [`fmt_f64`].
struct FixedFloats<'a>(PrettyFormatter<'a>);

impl Formatter for FixedFloats<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        if value.is_finite() {
            writer.write_all(fmt_f64(value).as_bytes())
        } else {
            writer.write_all(b"null")
        }
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> std::io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> std::io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json_string(value: &Value) -> String {
    let mut buf = Vec::new();
    let mut ser =
        serde_json::Serializer::with_formatter(&mut buf, FixedFloats(PrettyFormatter::new()));
    value
        .serialize(&mut ser)
        .expect("writing to a Vec cannot fail");
    buf.push(b'\n');
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}
