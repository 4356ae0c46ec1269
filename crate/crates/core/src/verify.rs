//! Executable oracle suites: finite-difference, re-substitution and momentum
//! checks that can be run against any build from the command line.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::controllers::{CascadePid, ControlInput, ControlReference, Controller, PidGains};
use crate::disturbance::{coupling_wrench, Wrench};
use crate::dynamics::{
    assemble_accelerations, equation_residual, external_force, linear_momentum, step_rk4, ControlWrench, UavState,
};
use crate::inertia::{com_rates, inertia_params, system_com, InertiaParams};
use crate::kinematics::ManipulatorState;
use crate::math::{max_abs, unskew};
use crate::scenario::{arm_sweep, single_joint_sweep};
use crate::{AerialManipulator, Error, Mat3, Vec3, Vec4, DOF};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Kinematics,
    Inertia,
    Dynamics,
    Disturbance,
    All,
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "kinematics" => Ok(Suite::Kinematics),
            "inertia" => Ok(Suite::Inertia),
            "dynamics" => Ok(Suite::Dynamics),
            "disturbance" => Ok(Suite::Disturbance),
            "all" => Ok(Suite::All),
            other => Err(Error::InvalidParameter(format!(
                "unknown suite `{other}` (expected kinematics, inertia, dynamics, disturbance or all)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub suite: &'static str,
    pub name: &'static str,
    pub measured: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.measured.is_finite() && self.measured < self.tolerance
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed() { "PASS" } else { "FAIL" };
        write!(f, "[{tag}] {}/{}: {:.3e} (< {:.0e})", self.suite, self.name, self.measured, self.tolerance)
    }
}

/// Sample times along the two-joint sweep.
fn sweep_times() -> impl Iterator<Item = f64> {
    (0..80).map(|i| 10.05 + 0.37 * i as f64)
}

const FD_STEP: f64 = 1e-6;

/// CoM Jacobians against central differences of link CoM positions and
/// orientations, along the sweep and at random poses.
pub fn jacobian_fd_error(model: &AerialManipulator) -> f64 {
    let arm = &model.arm;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut poses: Vec<Vec4> = sweep_times().map(|t| arm_sweep(t).q).collect();
    poses.extend((0..40).map(|_| Vec4::from_fn(|_, _| rng.random_range(-3.0..3.0))));
    let mut worst: f64 = 0.0;
    for q in poses {
        let k = arm.kinematics(&q);
        for j in 0..DOF {
            let mut dq = Vec4::zeros();
            dq[j] = FD_STEP;
            let (kp, km) = (arm.kinematics(&(q + dq)), arm.kinematics(&(q - dq)));
            for i in 0..DOF {
                let lin = (kp.com_positions[i] - km.com_positions[i]) / (2.0 * FD_STEP);
                let rdot = (kp.transforms[i].rotation - km.transforms[i].rotation) / (2.0 * FD_STEP);
                let ang = unskew(&(rdot * k.transforms[i].rotation.transpose()));
                let col = k.jacobians[i].column(j);
                worst = worst.max((lin - col.fixed_rows::<3>(0)).amax());
                worst = worst.max((ang - col.fixed_rows::<3>(3)).amax());
            }
        }
    }
    worst
}

/// Largest deviations of `(İ_man, ṙ_oc, r̈_omc)` from time differences along the sweep.
pub fn inertia_rate_fd_errors(model: &AerialManipulator) -> (f64, f64, f64) {
    let masses = model.masses();
    let arm = &model.arm;
    let h = 1e-5;
    let params = |t: f64| inertia_params(arm, &masses, &arm_sweep(t));
    let (mut e_i, mut e_c, mut e_a) = (0.0f64, 0.0f64, 0.0f64);
    for t in sweep_times() {
        let (p, m, c) = (params(t + h), params(t - h), params(t));
        let fd_i: Mat3 = (p.i_man - m.i_man) / (2.0 * h);
        e_i = e_i.max(max_abs(&(fd_i - c.i_man_dot)));
        let rp = system_com(arm, &masses, &arm_sweep(t + h).q);
        let rm = system_com(arm, &masses, &arm_sweep(t - h).q);
        let s = arm_sweep(t);
        let (r_oc_dot, _) = com_rates(arm, &masses, &s.q, &s.qd);
        e_c = e_c.max(((rp - rm) / (2.0 * h) - r_oc_dot).amax());
        e_a = e_a.max(((p.r_omc_dot - m.r_omc_dot) / (2.0 * h) - c.r_omc_ddot).amax());
    }
    (e_i, e_c, e_a)
}

fn random_case(rng: &mut ChaCha8Rng) -> (UavState, ManipulatorState, ControlWrench, Wrench) {
    let mut v = |a: f64| Vec3::from_fn(|_, _| rng.random_range(-a..a));
    let uav = UavState { position: v(2.0), velocity: v(1.5), euler: v(0.6), body_rates: v(2.0) };
    let manip = ManipulatorState {
        q: Vec4::from_fn(|_, _| rng.random_range(-2.5..2.5)),
        qd: Vec4::from_fn(|_, _| rng.random_range(-2.0..2.0)),
        qdd: Vec4::from_fn(|_, _| rng.random_range(-4.0..4.0)),
    };
    let u = ControlWrench { thrust: rng.random_range(10.0..60.0), torque: Vec3::from_fn(|_, _| rng.random_range(-1.0..1.0)) };
    let ext = Wrench::coupling(
        Vec3::from_fn(|_, _| rng.random_range(-5.0..5.0)),
        Vec3::from_fn(|_, _| rng.random_range(-0.5..0.5)),
    );
    (uav, manip, u, ext)
}

/// Largest re-substitution residual of the equations of motion over random states.
pub fn equation_residual_error(model: &AerialManipulator, samples: usize) -> f64 {
    let masses = model.masses();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let (uav, manip, u, ext) = random_case(&mut rng);
        let ip = inertia_params(&model.arm, &masses, &manip);
        let acc = match assemble_accelerations(model, &uav, &ip, &u, &ext) {
            Ok(a) => a,
            Err(_) => return f64::INFINITY,
        };
        let (lin, ang) = equation_residual(model, &uav, &ip, &u, &ext, &acc);
        worst = worst.max(lin.amax()).max(ang.amax());
    }
    worst
}

/// Largest violation of the coupling identities over random states:
/// `m_s v̇ = −T R e3 + m_s g e3 + F_dis + F_ext` and `J ω̇ = τ − ω×Jω + τ_dis + τ_ext`.
pub fn coupling_identity_error(model: &AerialManipulator, samples: usize) -> f64 {
    let masses = model.masses();
    let j = model.uav.inertia_matrix();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let (uav, manip, u, ext) = random_case(&mut rng);
        let ip: InertiaParams = inertia_params(&model.arm, &masses, &manip);
        let acc = match assemble_accelerations(model, &uav, &ip, &u, &ext) {
            Ok(a) => a,
            Err(_) => return f64::INFINITY,
        };
        let dis = coupling_wrench(model, &uav, &ip, &acc);
        let r = uav.rotation();
        let w = uav.body_rates;
        let lin = masses.m_s * acc.linear
            - (-u.thrust * r * Vec3::z() + masses.m_s * model.uav.gravity * Vec3::z() + dis.force + ext.inertial_force(&r));
        let ang = j * acc.angular - (u.torque - w.cross(&(j * w)) + dis.torque + ext.body_torque(&r));
        worst = worst.max(lin.amax()).max(ang.amax());
    }
    worst
}

/// Closed-loop 5 s flight with a swinging arm. Returns the largest
/// `‖ΔP/Δt − F̄_ext‖` over physics steps relative to the largest `‖F_ext‖`,
/// with `F̄_ext` the trapezoidal mean over each step.
pub fn momentum_theorem_error(model: &AerialManipulator, duration: f64) -> f64 {
    let physics_dt = 0.001;
    let control_dt = 0.002;
    let masses = model.masses();
    let joints = |t: f64| single_joint_sweep(t, 5.0, &Vec4::new(0.3, 0.0, -1.2, 0.4));
    let mut ctrl = match CascadePid::new(model, PidGains::reference(), control_dt, true, Some(50.0), Some(50.0), None) {
        Ok(c) => c,
        Err(_) => return f64::INFINITY,
    };
    let reference = ControlReference::hold(Vec3::new(0.0, 0.0, -1.0), 0.0);
    let ext = Wrench::inertial_force_only(Vec3::new(0.5, -0.3, 1.0));
    let mut state = UavState { position: reference.position, ..Default::default() };
    let momentum = |s: &UavState, t: f64| linear_momentum(model, s, &inertia_params(&model.arm, &masses, &joints(t)));
    let steps = (duration / control_dt).round() as usize;
    let (mut worst, mut scale) = (0.0f64, 0.0f64);
    for k in 0..steps {
        let t = k as f64 * control_dt;
        let manip = joints(t);
        let u = ctrl.update(&ControlInput { t, state: &state, reference: &reference, manip: &manip }).wrench;
        for j in 0..2 {
            let tp = t + j as f64 * physics_dt;
            let next = match step_rk4(model, &state, tp, physics_dt, &joints, &u, &ext) {
                Ok(s) => s,
                Err(_) => return f64::INFINITY,
            };
            let dp = (momentum(&next, tp + physics_dt) - momentum(&state, tp)) / physics_dt;
            let f0 = external_force(model, &state, &u, &ext);
            let f1 = external_force(model, &next, &u, &ext);
            worst = worst.max((dp - 0.5 * (f0 + f1)).norm());
            scale = scale.max(f0.norm());
            state = next;
        }
    }
    worst / scale
}

pub fn run_suite(model: &AerialManipulator, suite: Suite) -> Vec<Check> {
    let mut out = Vec::new();
    let want = |s: Suite| suite == Suite::All || suite == s;
    if want(Suite::Kinematics) {
        out.push(Check { suite: "kinematics", name: "com_jacobians_vs_fd", measured: jacobian_fd_error(model), tolerance: 1e-5 });
    }
    if want(Suite::Inertia) {
        let (e_i, e_c, e_a) = inertia_rate_fd_errors(model);
        out.push(Check { suite: "inertia", name: "arm_inertia_rate_vs_fd", measured: e_i, tolerance: 1e-4 });
        out.push(Check { suite: "inertia", name: "system_com_rate_vs_fd", measured: e_c, tolerance: 1e-6 });
        out.push(Check { suite: "inertia", name: "arm_com_accel_vs_fd", measured: e_a, tolerance: 1e-4 });
    }
    if want(Suite::Dynamics) {
        out.push(Check {
            suite: "dynamics",
            name: "equation_resubstitution",
            measured: equation_residual_error(model, 100),
            tolerance: 1e-9,
        });
        out.push(Check {
            suite: "dynamics",
            name: "momentum_theorem_relative",
            measured: momentum_theorem_error(model, 5.0),
            tolerance: 1e-3,
        });
    }
    if want(Suite::Disturbance) {
        out.push(Check {
            suite: "disturbance",
            name: "coupling_identity",
            measured: coupling_identity_error(model, 100),
            tolerance: 1e-9,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names() {
        assert_eq!("all".parse::<Suite>().unwrap(), Suite::All);
        assert_eq!("inertia".parse::<Suite>().unwrap(), Suite::Inertia);
        assert!("nope".parse::<Suite>().is_err());
    }

    #[test]
    fn every_check_passes_on_reference_model() {
        let checks = run_suite(&AerialManipulator::reference(), Suite::All);
        assert_eq!(checks.len(), 7);
        for c in &checks {
            assert!(c.passed(), "{c}");
        }
    }

    #[test]
    fn failing_check_is_reported() {
        let c = Check { suite: "x", name: "y", measured: f64::NAN, tolerance: 1.0 };
        assert!(!c.passed());
        assert!(c.to_string().starts_with("[FAIL]"));
    }
}
