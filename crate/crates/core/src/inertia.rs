//! Configuration-dependent inertia of the arm as seen from the UAV body frame.
//!
//! All quantities are expressed in the body frame with the origin at the UAV
//! centre of mass. Rates are derivatives with the body frame held fixed.

use nalgebra::Matrix3x4;

use crate::kinematics::{ArmKinematics, ArmModel, LinkParams, ManipulatorState};
use crate::math::skew;
use crate::{Mat3, Vec3, Vec4, DOF};

/// Joint-space step for the directional difference of the CoM Jacobian.
pub const JACOBIAN_RATE_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassBudget {
    pub m_b: f64,
    pub m_man: f64,
    pub m_s: f64,
}

impl MassBudget {
    pub fn new(uav_mass: f64, arm: &ArmModel) -> Self {
        let m_man = arm.total_mass();
        Self { m_b: uav_mass, m_man, m_s: uav_mass + m_man }
    }

    /// `m_s / m_man`, or zero for a massless arm.
    fn arm_scale(&self) -> f64 {
        if self.m_man > 0.0 {
            self.m_s / self.m_man
        } else {
            0.0
        }
    }
}

/// Variable inertia parameters for one arm state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InertiaParams {
    /// System CoM.
    pub r_oc: Vec3,
    /// Arm CoM.
    pub r_omc: Vec3,
    pub r_oc_dot: Vec3,
    pub r_omc_dot: Vec3,
    pub r_omc_ddot: Vec3,
    /// Arm inertia about the body origin.
    pub i_man: Mat3,
    pub i_man_dot: Mat3,
}

impl InertiaParams {
    /// Parameters of an arm that contributes nothing.
    pub fn zero() -> Self {
        Self {
            r_oc: Vec3::zeros(),
            r_omc: Vec3::zeros(),
            r_oc_dot: Vec3::zeros(),
            r_omc_dot: Vec3::zeros(),
            r_omc_ddot: Vec3::zeros(),
            i_man: Mat3::zeros(),
            i_man_dot: Mat3::zeros(),
        }
    }
}

/// `Σ m_i p_ci / m_s`.
pub fn system_com(arm: &ArmModel, masses: &MassBudget, q: &Vec4) -> Vec3 {
    weighted_com(arm, &arm.link_com_positions(q)) / masses.m_s
}

fn weighted_com(arm: &ArmModel, positions: &[Vec3; DOF]) -> Vec3 {
    arm.links.iter().zip(positions).map(|(l, p)| l.mass * p).sum()
}

/// Mass-weighted sum of the linear CoM Jacobians, `Σ m_i J_lin,i`.
fn weighted_linear_jacobian(arm: &ArmModel, k: &ArmKinematics) -> Matrix3x4<f64> {
    arm.links
        .iter()
        .zip(k.jacobians.iter())
        .map(|(l, j)| l.mass * j.fixed_rows::<3>(0).into_owned())
        .fold(Matrix3x4::zeros(), |a, b| a + b)
}

/// `(ṙ_oc, ṙ_omc)`.
pub fn com_rates(arm: &ArmModel, masses: &MassBudget, q: &Vec4, qd: &Vec4) -> (Vec3, Vec3) {
    let k = arm.kinematics(q);
    let r_oc_dot = weighted_linear_jacobian(arm, &k) * qd / masses.m_s;
    (r_oc_dot, masses.arm_scale() * r_oc_dot)
}

/// Second derivative of the arm CoM: `J q̈ + J̇ q̇`, with `J̇ q̇` taken as a
/// central difference of `J` along the direction of `q̇`.
pub fn arm_com_accel(arm: &ArmModel, masses: &MassBudget, manip: &ManipulatorState) -> Vec3 {
    let k = arm.kinematics(&manip.q);
    arm_com_accel_with(arm, masses, manip, &weighted_linear_jacobian(arm, &k))
}

fn arm_com_accel_with(
    arm: &ArmModel,
    masses: &MassBudget,
    manip: &ManipulatorState,
    weighted_jac: &Matrix3x4<f64>,
) -> Vec3 {
    if masses.m_man <= 0.0 {
        return Vec3::zeros();
    }
    let mut acc = weighted_jac * manip.qdd;
    let speed = manip.qd.norm();
    if speed > 0.0 {
        let dir = manip.qd / speed;
        let h = JACOBIAN_RATE_STEP;
        let jp = weighted_linear_jacobian(arm, &arm.kinematics(&(manip.q + h * dir)));
        let jm = weighted_linear_jacobian(arm, &arm.kinematics(&(manip.q - h * dir)));
        acc += (jp - jm) * manip.qd * (speed / (2.0 * h));
    }
    acc / masses.m_man
}

/// Inertia about the body origin of links with the given body-frame
/// orientations and CoM positions.
pub fn arm_inertia_from_poses(links: &[LinkParams], rotations: &[Mat3], positions: &[Vec3]) -> Mat3 {
    links
        .iter()
        .zip(rotations)
        .zip(positions)
        .map(|((l, r), p)| {
            r * l.inertia_com * r.transpose()
                + l.mass * (p.norm_squared() * Mat3::identity() - p * p.transpose())
        })
        .fold(Mat3::zeros(), |a, b| a + b)
}

pub fn arm_inertia(arm: &ArmModel, q: &Vec4) -> Mat3 {
    let k = arm.kinematics(q);
    inertia_from_kinematics(arm, &k)
}

fn inertia_from_kinematics(arm: &ArmModel, k: &ArmKinematics) -> Mat3 {
    let rotations: [Mat3; DOF] = std::array::from_fn(|i| k.transforms[i].rotation);
    arm_inertia_from_poses(&arm.links, &rotations, &k.com_positions)
}

/// Time derivative of [`arm_inertia`] along `q̇`.
pub fn arm_inertia_rate(arm: &ArmModel, q: &Vec4, qd: &Vec4) -> Mat3 {
    inertia_rate_from_kinematics(arm, &arm.kinematics(q), qd)
}

fn inertia_rate_from_kinematics(arm: &ArmModel, k: &ArmKinematics, qd: &Vec4) -> Mat3 {
    let mut out = Mat3::zeros();
    for i in 0..DOF {
        let link = &arm.links[i];
        let twist = k.jacobians[i] * qd;
        let v = twist.fixed_rows::<3>(0).into_owned();
        let w = skew(&twist.fixed_rows::<3>(3).into_owned());
        let r = k.transforms[i].rotation;
        let rotated = r * link.inertia_com * r.transpose();
        let p = k.com_positions[i];
        out += w * rotated - rotated * w;
        out += link.mass * (2.0 * p.dot(&v) * Mat3::identity() - v * p.transpose() - p * v.transpose());
    }
    out
}

/// All variable inertia parameters for the given arm state.
pub fn inertia_params(arm: &ArmModel, masses: &MassBudget, manip: &ManipulatorState) -> InertiaParams {
    let k = arm.kinematics(&manip.q);
    let wj = weighted_linear_jacobian(arm, &k);
    let r_oc = weighted_com(arm, &k.com_positions) / masses.m_s;
    let r_oc_dot = wj * manip.qd / masses.m_s;
    let scale = masses.arm_scale();
    InertiaParams {
        r_oc,
        r_omc: scale * r_oc,
        r_oc_dot,
        r_omc_dot: scale * r_oc_dot,
        r_omc_ddot: arm_com_accel_with(arm, masses, manip, &wj),
        i_man: inertia_from_kinematics(arm, &k),
        i_man_dot: inertia_rate_from_kinematics(arm, &k, &manip.qd),
    }
}
