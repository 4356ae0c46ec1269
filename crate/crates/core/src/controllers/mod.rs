//! Closed-loop controllers sharing one interface.
//!
//! - [`AnnbController`]: backstepping with coupling feedforward and RBF
//!   networks estimating the remaining disturbance per channel
//! - [`CascadePid`]: position → velocity → attitude → rate cascade, optionally
//!   with coupling feedforward (PID_ff)

mod backstepping;
mod pid;

pub use backstepping::{
    annb_attitude, annb_position, AnnbController, AnnbSettings, AttitudeErrors, AttitudeReference, BackstepGains,
    GyroTermForm, NetworkSettings, PositionErrors,
};
pub use pid::{CascadePid, PidGains};

use crate::disturbance::{feedforward_wrench, AccelerationEstimator, Wrench};
use crate::dynamics::{ControlWrench, UavState};
use crate::kinematics::ManipulatorState;
use crate::{AerialManipulator, Vec3};

/// Smallest commanded force magnitude that still defines an attitude [N].
pub const MIN_THRUST: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlReference {
    pub position: Vec3,
    pub velocity: Vec3,
    pub acceleration: Vec3,
    pub yaw: f64,
    pub yaw_rate: f64,
    pub yaw_accel: f64,
}

impl ControlReference {
    pub fn hold(position: Vec3, yaw: f64) -> Self {
        Self { position, yaw, ..Default::default() }
    }
}

/// What a controller sees at one control instant.
#[derive(Debug, Clone, Copy)]
pub struct ControlInput<'a> {
    pub t: f64,
    pub state: &'a UavState,
    pub reference: &'a ControlReference,
    /// Measured arm joint state.
    pub manip: &'a ManipulatorState,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlOutput {
    pub wrench: ControlWrench,
    /// Commanded `(φ_d, θ_d, ψ_d)`.
    pub attitude_command: Vec3,
    /// Feedforward wrench the controller compensated (zero if none).
    pub feedforward: Wrench,
    /// Network outputs, position channels then attitude channels.
    pub nn_outputs: [f64; 6],
    pub events: ControlEvents,
}

/// Counters of degenerate situations hit so far.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ControlEvents {
    /// Commanded force too small to define an attitude; previous command held.
    pub thrust_degenerate: u32,
    /// `arcsin` argument clamped into [−1, 1].
    pub roll_saturated: u32,
}

pub trait Controller: Send {
    fn name(&self) -> &'static str;
    fn update(&mut self, input: &ControlInput<'_>) -> ControlOutput;
}

/// Thrust magnitude and roll/pitch commands realising a desired force.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThrustAttitude {
    pub thrust: f64,
    pub roll: f64,
    pub pitch: f64,
    /// The roll `arcsin` argument was clamped.
    pub saturated: bool,
}

/// Inverts [`force_from_thrust_attitude`] for the given yaw. Returns `None`
/// when the force is too small to define a direction.
pub fn thrust_attitude_extract(u: &Vec3, yaw: f64) -> Option<ThrustAttitude> {
    let thrust = u.norm();
    if !(thrust >= MIN_THRUST) {
        return None;
    }
    let (sp, cp) = yaw.sin_cos();
    let arg = (u.y * cp - u.x * sp) / thrust;
    let saturated = arg.abs() > 1.0;
    let roll = arg.clamp(-1.0, 1.0).asin();
    let pitch = ((u.x * cp + u.y * sp) / u.z).atan();
    Some(ThrustAttitude { thrust, roll, pitch, saturated })
}

/// Force produced by thrust `u_m` along `-z_B` at the given attitude.
pub fn force_from_thrust_attitude(thrust: f64, roll: f64, pitch: f64, yaw: f64) -> Vec3 {
    let (sf, cf) = roll.sin_cos();
    let (st, ct) = pitch.sin_cos();
    let (sp, cp) = yaw.sin_cos();
    -thrust * Vec3::new(cf * st * cp + sf * sp, cf * st * sp - sf * cp, cf * ct)
}

/// Holds the last valid attitude command across degenerate force commands.
#[derive(Debug, Clone, Default)]
pub(crate) struct AttitudeExtractor {
    last: Option<ThrustAttitude>,
    events: ControlEvents,
}

impl AttitudeExtractor {
    pub(crate) fn extract(&mut self, u: &Vec3, yaw: f64) -> ThrustAttitude {
        match thrust_attitude_extract(u, yaw) {
            Some(cmd) => {
                if cmd.saturated {
                    self.events.roll_saturated += 1;
                }
                self.last = Some(cmd);
                cmd
            }
            None => {
                self.events.thrust_degenerate += 1;
                let held = self.last.unwrap_or(ThrustAttitude { thrust: 0.0, roll: 0.0, pitch: 0.0, saturated: false });
                ThrustAttitude { thrust: u.norm(), ..held }
            }
        }
    }

    pub(crate) fn events(&self) -> ControlEvents {
        self.events
    }
}

/// Coupling feedforward as available on board: arm joint measurements plus
/// differentiated and filtered UAV velocity and body rates.
#[derive(Debug, Clone)]
pub struct Feedforward {
    model: AerialManipulator,
    estimator: AccelerationEstimator,
    enabled: bool,
}

impl Feedforward {
    pub fn new(model: AerialManipulator, cutoff: Option<f64>, dt: f64, enabled: bool) -> Self {
        Self { model, estimator: AccelerationEstimator::new(cutoff, dt), enabled }
    }

    pub fn update(&mut self, state: &UavState, manip: &ManipulatorState) -> Wrench {
        let acc = self.estimator.update(state);
        if !self.enabled {
            return Wrench::zero();
        }
        feedforward_wrench(&self.model, state, manip, &acc.angular, &acc.linear)
    }
}

/// Optional actuator limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Saturation {
    pub max_thrust: f64,
    pub max_torque: f64,
}

impl Saturation {
    pub fn apply(&self, w: ControlWrench) -> ControlWrench {
        ControlWrench {
            thrust: w.thrust.clamp(0.0, self.max_thrust),
            torque: w.torque.map(|t| t.clamp(-self.max_torque, self.max_torque)),
        }
    }
}
