//! Morse-number shape descriptor for pseudo-rigid-body continuum robots.
//!
//! The crate is organised as a pipeline:
//!
//! - [`model`]: discrete rigid links joined by exponential-map joints, forward
//!   kinematics, tangents and discrete curvatures.
//! - [`statics`]: actuation torque laws and a damped-Newton equilibrium solver.
//! - [`morse`]: critical-point counting of directional projections, projection
//!   direction strategies and J/C/S labelling.
//! - [`control`]: inverse morphology control, i.e. find an actuation command whose
//!   equilibrium has a non-degenerate critical point at a chosen joint.
//! - [`oracle`]: analytic centerlines and a dense-sampling continuous counter used
//!   as ground truth for the discrete descriptor.
//! - [`io`] and [`cli`]: JSON/CSV formats and the `morsecr` command line.

pub mod cli;
pub mod control;
pub mod error;
pub mod io;
pub mod model;
pub mod morse;
pub mod oracle;
pub mod statics;

pub use error::{Error, Result};
pub use model::{Configuration, Frame, RobotModel, Shape};
pub use morse::{Direction, MorseResult};
pub use statics::{ActuationCommand, ActuatorElement, EquilibriumReport};

pub type Vec3 = nalgebra::Vector3<f64>;
pub type Mat3 = nalgebra::Matrix3<f64>;
