//! Simulation and control benchmarking for an aerial manipulator: a multirotor
//! carrying a 4-DOF serial arm.
//!
//! The crate is organised bottom-up:
//!
//! - [`kinematics`]: modified DH forward kinematics, link CoM positions and Jacobians
//! - [`inertia`]: configuration-dependent CoM, arm inertia about the body origin and their rates
//! - [`dynamics`]: coupled multibody equations of motion and the RK4 integrator
//! - [`disturbance`]: the coupling force/torque model and its feedforward estimator
//! - [`rbfnn`]: Gaussian RBF networks trained by online gradient descent
//! - [`controllers`]: adaptive NN backstepping, cascade PID and PID with feedforward
//! - [`scenario`]: joint programs, references and the closed-loop harness
//! - [`metrics`]: error statistics and MAPE
//! - [`config`], [`verify`], [`cli`]: configuration file, oracle suites, command line
//!
//! Frames: the inertial frame is NED (gravity along `+z`), the body frame has
//! `z` pointing down, and thrust acts along `-z_B`.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod config;
pub mod controllers;
pub mod disturbance;
pub mod dynamics;
pub mod error;
pub mod filters;
pub mod inertia;
pub mod kinematics;
pub mod math;
pub mod metrics;
pub mod rbfnn;
pub mod scenario;
pub mod verify;

pub use error::{Error, Result};

use nalgebra::{Matrix3, Vector3, Vector4};

pub type Vec3 = Vector3<f64>;
pub type Vec4 = Vector4<f64>;
pub type Mat3 = Matrix3<f64>;

/// Number of arm joints.
pub const DOF: usize = 4;

/// Standard gravity used by the reference platform [m/s²].
pub const GRAVITY: f64 = 9.81;

/// Complete physical model: the multirotor body plus the arm.
#[derive(Debug, Clone, PartialEq)]
pub struct AerialManipulator {
    pub uav: dynamics::UavParams,
    pub arm: kinematics::ArmModel,
}

impl AerialManipulator {
    /// Hex-rotor body with the OpenMANIPULATOR-X style arm used throughout the
    /// simulations.
    pub fn reference() -> Self {
        Self {
            uav: dynamics::UavParams::reference(),
            arm: kinematics::ArmModel::reference(),
        }
    }

    pub fn masses(&self) -> inertia::MassBudget {
        inertia::MassBudget::new(self.uav.mass, &self.arm)
    }
}
