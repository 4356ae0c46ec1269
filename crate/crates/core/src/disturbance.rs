//! Coupling disturbance exerted by the moving arm on the UAV.
//!
//! The force is expressed in the inertial frame and the torque in the body
//! frame; [`Wrench`] carries explicit frame tags so the two are never mixed.
//! Grouping the non-rigid-body terms of the coupled equations of motion gives
//!
//! ```text
//! m_s v̇   = −T ᴵR_B e3 + m_s g e3 + F_dis
//! J ω̇     = τ − ω × (J ω) + ᴮτ_dis
//! ```

use crate::dynamics::{Accelerations, UavState};
use crate::filters::FilteredDerivative;
use crate::inertia::{inertia_params, InertiaParams};
use crate::kinematics::ManipulatorState;
use crate::{AerialManipulator, Mat3, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    Inertial,
    Body,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wrench {
    pub force: Vec3,
    pub torque: Vec3,
    pub force_frame: Frame,
    pub torque_frame: Frame,
}

impl Default for Wrench {
    fn default() -> Self {
        Self::zero()
    }
}

impl Wrench {
    /// Zero wrench with the coupling-model frame convention.
    pub fn zero() -> Self {
        Self::coupling(Vec3::zeros(), Vec3::zeros())
    }

    /// Inertial-frame force with a body-frame torque.
    pub fn coupling(force: Vec3, torque: Vec3) -> Self {
        Self { force, torque, force_frame: Frame::Inertial, torque_frame: Frame::Body }
    }

    pub fn inertial_force_only(force: Vec3) -> Self {
        Self::coupling(force, Vec3::zeros())
    }

    /// Force in the inertial frame given `ᴵR_B`.
    pub fn inertial_force(&self, r_ib: &Mat3) -> Vec3 {
        match self.force_frame {
            Frame::Inertial => self.force,
            Frame::Body => r_ib * self.force,
        }
    }

    /// Torque in the body frame given `ᴵR_B`.
    pub fn body_torque(&self, r_ib: &Mat3) -> Vec3 {
        match self.torque_frame {
            Frame::Body => self.torque,
            Frame::Inertial => r_ib.transpose() * self.torque,
        }
    }
}

/// `F_dis` (inertial frame).
pub fn coupling_force(model: &AerialManipulator, uav: &UavState, ip: &InertiaParams, omega_dot: &Vec3) -> Vec3 {
    let w = uav.body_rates;
    -model.masses().m_man
        * uav.rotation()
        * (w.cross(&w.cross(&ip.r_omc))
            + omega_dot.cross(&ip.r_omc)
            + 2.0 * w.cross(&ip.r_omc_dot)
            + ip.r_omc_ddot)
}

/// `ᴮτ_dis` (body frame). `vdot` is the inertial acceleration of the UAV.
pub fn coupling_torque(
    model: &AerialManipulator,
    uav: &UavState,
    ip: &InertiaParams,
    omega_dot: &Vec3,
    vdot: &Vec3,
) -> Vec3 {
    let masses = model.masses();
    let rt = uav.rotation().transpose();
    let w = uav.body_rates;
    let vb = rt * uav.velocity;
    let ab = rt * vdot;
    let gravity_body = rt * (model.uav.gravity * Vec3::z());
    masses.m_s * (ip.r_oc.cross(&gravity_body) - ip.r_oc.cross(&ab) - ip.r_oc_dot.cross(&vb))
        - masses.m_man
            * (vb.cross(&ip.r_omc_dot)
                + vb.cross(&w.cross(&ip.r_omc))
                + w.cross(&ip.r_omc.cross(&ip.r_omc_dot))
                + ip.r_omc.cross(&ip.r_omc_ddot))
        - ip.i_man_dot * w
        - w.cross(&(ip.i_man * w))
        - ip.i_man * omega_dot
}

/// Coupling wrench for known accelerations.
pub fn coupling_wrench(model: &AerialManipulator, uav: &UavState, ip: &InertiaParams, acc: &Accelerations) -> Wrench {
    Wrench::coupling(
        coupling_force(model, uav, ip, &acc.angular),
        coupling_torque(model, uav, ip, &acc.angular, &acc.linear),
    )
}

/// Coupling wrench from the arm state and estimated accelerations, as seen
/// by a controller.
pub fn feedforward_wrench(
    model: &AerialManipulator,
    uav: &UavState,
    manip: &ManipulatorState,
    omega_dot: &Vec3,
    vdot: &Vec3,
) -> Wrench {
    let ip = inertia_params(&model.arm, &model.masses(), manip);
    coupling_wrench(model, uav, &ip, &Accelerations { linear: *vdot, angular: *omega_dot })
}

/// Causal estimate of `v̇` and `ω̇`: backward difference over the control
/// period followed by a first-order low-pass.
#[derive(Debug, Clone)]
pub struct AccelerationEstimator {
    linear: FilteredDerivative<Vec3>,
    angular: FilteredDerivative<Vec3>,
}

impl AccelerationEstimator {
    pub fn new(cutoff: Option<f64>, dt: f64) -> Self {
        Self {
            linear: FilteredDerivative::new(cutoff, dt, Vec3::zeros()),
            angular: FilteredDerivative::new(cutoff, dt, Vec3::zeros()),
        }
    }

    pub fn update(&mut self, uav: &UavState) -> Accelerations {
        Accelerations { linear: self.linear.update(uav.velocity), angular: self.angular.update(uav.body_rates) }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{assemble_accelerations, ControlWrench};
    use crate::{Vec4, DOF};
    use std::f64::consts::FRAC_PI_2;

    fn sample_state() -> UavState {
        UavState {
            position: Vec3::new(0.0, 0.0, -1.0),
            velocity: Vec3::new(0.2, -0.1, 0.05),
            euler: Vec3::new(0.03, -0.05, 0.2),
            body_rates: Vec3::new(0.1, 0.3, -0.2),
        }
    }

    #[test]
    fn static_hover_gravity_lever_torque() {
        let model = AerialManipulator::reference();
        let manip = ManipulatorState::at_rest(Vec4::new(0.4, 0.6, -1.0, 0.2));
        let hover = UavState::default();
        let ip = inertia_params(&model.arm, &model.masses(), &manip);
        let tau = coupling_torque(&model, &hover, &ip, &Vec3::zeros(), &Vec3::zeros());
        // independent per-link gravity lever sum
        let p = model.arm.link_com_positions(&manip.q);
        let g = Vec3::new(0.0, 0.0, model.uav.gravity);
        let mut expected = Vec3::zeros();
        for i in 0..DOF {
            expected += model.arm.links[i].mass * p[i].cross(&g);
        }
        assert!((tau - expected).norm() < 1e-13, "{tau} vs {expected}");
        assert!(coupling_force(&model, &hover, &ip, &Vec3::zeros()).norm() == 0.0);
    }

    #[test]
    fn vanishing_terms() {
        let model = AerialManipulator::reference();
        let mut ip = InertiaParams::zero();
        let hover = UavState::default();
        assert_eq!(coupling_torque(&model, &hover, &ip, &Vec3::zeros(), &Vec3::zeros()), Vec3::zeros());
        // only the arm CoM acceleration survives at rest
        ip.r_omc = Vec3::new(0.05, 0.0, 0.2);
        ip.r_omc_ddot = Vec3::new(0.3, -0.1, 0.2);
        let tilted = UavState { euler: Vec3::new(0.1, 0.2, 0.3), ..Default::default() };
        let f = coupling_force(&model, &tilted, &ip, &Vec3::zeros());
        let expected = -model.masses().m_man * tilted.rotation() * ip.r_omc_ddot;
        assert!((f - expected).norm() < 1e-15);
    }

    #[test]
    fn massless_arm_produces_no_disturbance() {
        let mut model = AerialManipulator::reference();
        for l in model.arm.links.iter_mut() {
            l.mass = 0.0;
            l.inertia_com = Mat3::zeros();
        }
        let manip = ManipulatorState {
            q: Vec4::new(0.1, 0.2, -FRAC_PI_2, 0.0),
            qd: Vec4::new(0.3, 0.2, 0.1, 0.0),
            qdd: Vec4::new(0.1, -0.1, 0.2, 0.0),
        };
        let w = feedforward_wrench(&model, &sample_state(), &manip, &Vec3::new(0.1, 0.2, 0.3), &Vec3::new(1.0, 0.0, 0.0));
        assert_eq!(w.force, Vec3::zeros());
        assert_eq!(w.torque, Vec3::zeros());
    }

    #[test]
    fn coupling_identity_holds_for_solved_accelerations() {
        let model = AerialManipulator::reference();
        let masses = model.masses();
        let uav = sample_state();
        let manip = ManipulatorState {
            q: Vec4::new(0.5, -0.4, -1.3, 0.2),
            qd: Vec4::new(0.6, 0.4, -0.3, 0.5),
            qdd: Vec4::new(-0.2, 0.8, 0.4, -0.6),
        };
        let ip = inertia_params(&model.arm, &masses, &manip);
        let u = ControlWrench { thrust: 32.0, torque: Vec3::new(0.02, -0.05, 0.01) };
        let ext = Wrench::inertial_force_only(Vec3::new(0.0, 0.0, 3.75));
        let acc = assemble_accelerations(&model, &uav, &ip, &u, &ext).unwrap();
        let dis = coupling_wrench(&model, &uav, &ip, &acc);
        let r = uav.rotation();
        let lin = masses.m_s * acc.linear
            - (-u.thrust * r * Vec3::z() + masses.m_s * model.uav.gravity * Vec3::z() + dis.force + ext.force);
        let j = model.uav.inertia_matrix();
        let w = uav.body_rates;
        let ang = j * acc.angular - (u.torque - w.cross(&(j * w)) + dis.torque);
        assert!(lin.amax() < 1e-9 && ang.amax() < 1e-9, "{lin} {ang}");
    }

    #[test]
    fn feedforward_with_true_accelerations_equals_truth() {
        let model = AerialManipulator::reference();
        let uav = sample_state();
        let manip = ManipulatorState {
            q: Vec4::new(-0.3, 0.5, -1.1, 0.4),
            qd: Vec4::new(0.2, -0.5, 0.3, 0.1),
            qdd: Vec4::new(0.4, 0.1, -0.7, 0.3),
        };
        let ip = inertia_params(&model.arm, &model.masses(), &manip);
        let u = ControlWrench { thrust: 33.0, torque: Vec3::new(-0.01, 0.04, 0.0) };
        let acc = assemble_accelerations(&model, &uav, &ip, &u, &Wrench::zero()).unwrap();
        let truth = coupling_wrench(&model, &uav, &ip, &acc);
        let ff = feedforward_wrench(&model, &uav, &manip, &acc.angular, &acc.linear);
        assert_eq!(ff, truth);
    }

    #[test]
    fn frames_convert_explicitly() {
        let r = crate::dynamics::rotation_from_euler(&Vec3::new(0.0, 0.0, FRAC_PI_2));
        let w = Wrench { force: Vec3::x(), torque: Vec3::y(), force_frame: Frame::Body, torque_frame: Frame::Inertial };
        assert!((w.inertial_force(&r) - Vec3::y()).norm() < 1e-15);
        assert!((w.body_torque(&r) - Vec3::x()).norm() < 1e-15);
    }

    #[test]
    fn estimator_tracks_constant_acceleration() {
        let dt = 0.002;
        let mut est = AccelerationEstimator::new(Some(50.0), dt);
        let a = Vec3::new(0.5, -1.0, 2.0);
        let mut out = Accelerations::default();
        for k in 0..500 {
            let t = k as f64 * dt;
            let s = UavState { velocity: a * t, body_rates: -a * t, ..Default::default() };
            out = est.update(&s);
        }
        assert!((out.linear - a).norm() < 1e-9 && (out.angular + a).norm() < 1e-9);
    }
}
