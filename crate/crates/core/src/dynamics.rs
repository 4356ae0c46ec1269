//! Coupled equations of motion of the UAV carrying a kinematically driven arm.
//!
//! The translational line couples to `ω̇` through `ω̇ × r_omc`, and the
//! rotational line couples to the UAV acceleration through `r_oc × ᴮr̈_o`, so
//! both are assembled into one 6×6 linear system and solved together.
//! Attitude kinematics take Euler-angle rates equal to body rates.

use nalgebra::{Matrix6, SVector, Vector6};

use crate::disturbance::Wrench;
use crate::inertia::{inertia_params, InertiaParams, MassBudget};
use crate::kinematics::ManipulatorState;
use crate::math::skew;
use crate::{AerialManipulator, Error, Mat3, Result, Vec3, GRAVITY};

/// State vector in the order `[x, ẋ, y, ẏ, z, ż, φ, p, θ, q, ψ, r]`.
pub type StateVector = SVector<f64, 12>;

/// Guard on |pitch| for the Z-Y-X Euler parameterisation.
pub const PITCH_LIMIT: f64 = std::f64::consts::FRAC_PI_2 - 1e-2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UavParams {
    pub mass: f64,
    /// Diagonal body inertia `(J_φ, J_θ, J_ψ)` [kg·m²].
    pub inertia: Vec3,
    pub gravity: f64,
}

impl UavParams {
    pub fn reference() -> Self {
        Self { mass: 2.65, inertia: Vec3::new(0.05, 0.05, 0.0948), gravity: GRAVITY }
    }

    pub fn inertia_matrix(&self) -> Mat3 {
        Mat3::from_diagonal(&self.inertia)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UavState {
    /// Inertial NED position [m].
    pub position: Vec3,
    /// Inertial velocity [m/s].
    pub velocity: Vec3,
    /// Roll, pitch, yaw [rad].
    pub euler: Vec3,
    /// Body rates `(p, q, r)` [rad/s].
    pub body_rates: Vec3,
}

impl UavState {
    pub fn to_vector(&self) -> StateVector {
        let (p, v, e, w) = (self.position, self.velocity, self.euler, self.body_rates);
        StateVector::from_column_slice(&[p.x, v.x, p.y, v.y, p.z, v.z, e.x, w.x, e.y, w.y, e.z, w.z])
    }

    pub fn from_vector(x: &StateVector) -> Self {
        Self {
            position: Vec3::new(x[0], x[2], x[4]),
            velocity: Vec3::new(x[1], x[3], x[5]),
            euler: Vec3::new(x[6], x[8], x[10]),
            body_rates: Vec3::new(x[7], x[9], x[11]),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_vector().iter().all(|v| v.is_finite())
    }

    /// `ᴵR_B`.
    pub fn rotation(&self) -> Mat3 {
        rotation_from_euler(&self.euler)
    }
}

/// Collective thrust along `-z_B` and body torque.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlWrench {
    pub thrust: f64,
    pub torque: Vec3,
}

/// Body → inertial rotation for Z-Y-X Euler angles `(φ, θ, ψ)`.
pub fn rotation_from_euler(euler: &Vec3) -> Mat3 {
    let (sf, cf) = euler.x.sin_cos();
    let (st, ct) = euler.y.sin_cos();
    let (sp, cp) = euler.z.sin_cos();
    Mat3::new(
        cp * ct,
        -sp * cf + cp * st * sf,
        sp * sf + cp * st * cf,
        sp * ct,
        cp * cf + sp * st * sf,
        -cp * sf + sp * st * cf,
        -st,
        ct * sf,
        ct * cf,
    )
}

/// UAV linear acceleration (inertial) and angular acceleration (body).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Accelerations {
    pub linear: Vec3,
    pub angular: Vec3,
}

/// Right-hand sides and coupling blocks shared by the solver and the residual.
struct Assembly {
    /// `m_s v̇ − m_man R [r_omc]× ω̇ = b_lin`
    b_lin: Vec3,
    /// `(J + I_man) ω̇ + m_s [r_oc]× Rᵀ v̇ = b_ang`
    b_ang: Vec3,
    lin_omega: Mat3,
    ang_vdot: Mat3,
    inertia: Mat3,
    m_s: f64,
}

fn assemble(
    model: &AerialManipulator,
    masses: &MassBudget,
    uav: &UavState,
    ip: &InertiaParams,
    u: &ControlWrench,
    ext: &Wrench,
) -> Assembly {
    let g = model.uav.gravity;
    let e3 = Vec3::z();
    let r = uav.rotation();
    let rt = r.transpose();
    let w = uav.body_rates;
    let vb = rt * uav.velocity;
    let (m_s, m_man) = (masses.m_s, masses.m_man);
    let inertia = model.uav.inertia_matrix() + ip.i_man;

    let b_lin = -u.thrust * (r * e3) + m_s * g * e3
        - m_man * r * (w.cross(&w.cross(&ip.r_omc)) + 2.0 * w.cross(&ip.r_omc_dot) + ip.r_omc_ddot)
        + ext.inertial_force(&r);

    let b_ang = u.torque - w.cross(&(inertia * w))
        + m_s * (ip.r_oc.cross(&(rt * (g * e3))) - ip.r_oc_dot.cross(&vb))
        - m_man
            * (vb.cross(&w.cross(&ip.r_omc))
                + vb.cross(&ip.r_omc_dot)
                + w.cross(&ip.r_omc.cross(&ip.r_omc_dot))
                + ip.r_omc.cross(&ip.r_omc_ddot))
        - ip.i_man_dot * w
        + ext.body_torque(&r);

    Assembly {
        b_lin,
        b_ang,
        lin_omega: -m_man * r * skew(&ip.r_omc),
        ang_vdot: m_s * skew(&ip.r_oc) * rt,
        inertia,
        m_s,
    }
}

/// Solves the coupled translational/rotational equations for `(v̇, ω̇)`.
pub fn assemble_accelerations(
    model: &AerialManipulator,
    uav: &UavState,
    ip: &InertiaParams,
    u: &ControlWrench,
    ext: &Wrench,
) -> Result<Accelerations> {
    let masses = model.masses();
    let a = assemble(model, &masses, uav, ip, u, ext);
    let mut m = Matrix6::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&(a.m_s * Mat3::identity()));
    m.fixed_view_mut::<3, 3>(0, 3).copy_from(&a.lin_omega);
    m.fixed_view_mut::<3, 3>(3, 0).copy_from(&a.ang_vdot);
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(&a.inertia);
    let mut b = Vector6::zeros();
    b.fixed_rows_mut::<3>(0).copy_from(&a.b_lin);
    b.fixed_rows_mut::<3>(3).copy_from(&a.b_ang);

    let solution = m.lu().solve(&b).filter(|x| x.iter().all(|v| v.is_finite()));
    match solution {
        Some(x) => Ok(Accelerations {
            linear: x.fixed_rows::<3>(0).into_owned(),
            angular: x.fixed_rows::<3>(3).into_owned(),
        }),
        None => {
            let sv = m.singular_values();
            let condition = if sv.min() > 0.0 { sv.max() / sv.min() } else { f64::INFINITY };
            Err(Error::SingularDynamics { condition })
        }
    }
}

/// Residual of both equations of motion written in their original form,
/// with the accelerations substituted back on both sides.
pub fn equation_residual(
    model: &AerialManipulator,
    uav: &UavState,
    ip: &InertiaParams,
    u: &ControlWrench,
    ext: &Wrench,
    acc: &Accelerations,
) -> (Vec3, Vec3) {
    let masses = model.masses();
    let (m_s, m_man) = (masses.m_s, masses.m_man);
    let g = model.uav.gravity;
    let e3 = Vec3::z();
    let r = uav.rotation();
    let rt = r.transpose();
    let w = uav.body_rates;
    let wd = acc.angular;
    let vb = rt * uav.velocity;
    let ab = rt * acc.linear;
    let inertia = model.uav.inertia_matrix() + ip.i_man;

    let lin = acc.linear
        - (-(u.thrust / m_s) * r * e3
            - (m_man / m_s)
                * r
                * (w.cross(&w.cross(&ip.r_omc))
                    + wd.cross(&ip.r_omc)
                    + 2.0 * w.cross(&ip.r_omc_dot)
                    + ip.r_omc_ddot)
            + g * e3
            + ext.inertial_force(&r) / m_s);

    let rhs = u.torque - w.cross(&(inertia * w))
        + m_s * (ip.r_oc.cross(&(rt * (g * e3))) - ip.r_oc.cross(&ab) - ip.r_oc_dot.cross(&vb))
        - m_man
            * (vb.cross(&w.cross(&ip.r_omc))
                + vb.cross(&ip.r_omc_dot)
                + w.cross(&ip.r_omc.cross(&ip.r_omc_dot))
                + ip.r_omc.cross(&ip.r_omc_ddot))
        - ip.i_man_dot * w
        + ext.body_torque(&r);
    (lin, inertia * wd - rhs)
}

/// Linear momentum of the whole system in the inertial frame.
pub fn linear_momentum(model: &AerialManipulator, uav: &UavState, ip: &InertiaParams) -> Vec3 {
    let masses = model.masses();
    masses.m_s * uav.velocity
        + masses.m_man * uav.rotation() * (uav.body_rates.cross(&ip.r_omc) + ip.r_omc_dot)
}

/// Net external force on the system (thrust, gravity, exogenous), inertial frame.
pub fn external_force(model: &AerialManipulator, uav: &UavState, u: &ControlWrench, ext: &Wrench) -> Vec3 {
    let r = uav.rotation();
    -u.thrust * (r * Vec3::z()) + model.masses().m_s * model.uav.gravity * Vec3::z() + ext.inertial_force(&r)
}

/// Derivative of the state vector (same ordering as [`StateVector`]).
pub fn state_derivative(
    model: &AerialManipulator,
    uav: &UavState,
    manip: &ManipulatorState,
    u: &ControlWrench,
    ext: &Wrench,
    t: f64,
) -> Result<StateVector> {
    if uav.euler.y.abs() >= PITCH_LIMIT {
        return Err(Error::PitchSingularity { t, pitch: uav.euler.y });
    }
    let ip = inertia_params(&model.arm, &model.masses(), manip);
    let acc = assemble_accelerations(model, uav, &ip, u, ext)?;
    Ok(derivative_from(uav, &acc))
}

fn derivative_from(uav: &UavState, acc: &Accelerations) -> StateVector {
    let (v, w) = (uav.velocity, uav.body_rates);
    let (a, wd) = (acc.linear, acc.angular);
    StateVector::from_column_slice(&[v.x, a.x, v.y, a.y, v.z, a.z, w.x, wd.x, w.y, wd.y, w.z, wd.z])
}

/// Prescribed arm motion.
pub trait JointTrajectory {
    fn state_at(&self, t: f64) -> ManipulatorState;
}

impl<F: Fn(f64) -> ManipulatorState> JointTrajectory for F {
    fn state_at(&self, t: f64) -> ManipulatorState {
        self(t)
    }
}

/// One classical RK4 step. Control and exogenous wrenches are held over the
/// step; the arm is sampled from `joints` at the stage times.
pub fn step_rk4(
    model: &AerialManipulator,
    uav: &UavState,
    t: f64,
    dt: f64,
    joints: &dyn JointTrajectory,
    u: &ControlWrench,
    ext: &Wrench,
) -> Result<UavState> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("step size {dt} must be positive")));
    }
    let x0 = uav.to_vector();
    let f = |x: &StateVector, tau: f64| {
        state_derivative(model, &UavState::from_vector(x), &joints.state_at(tau), u, ext, tau)
    };
    let k1 = f(&x0, t)?;
    let k2 = f(&(x0 + 0.5 * dt * k1), t + 0.5 * dt)?;
    let k3 = f(&(x0 + 0.5 * dt * k2), t + 0.5 * dt)?;
    let k4 = f(&(x0 + dt * k3), t + dt)?;
    let x1 = x0 + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    let next = UavState::from_vector(&x1);
    if !next.is_finite() {
        return Err(Error::Diverged { t: t + dt, reason: "non-finite state".into() });
    }
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Vec4;
    use std::f64::consts::FRAC_PI_2;

    fn massless() -> AerialManipulator {
        let mut m = AerialManipulator::reference();
        for l in m.arm.links.iter_mut() {
            l.mass = 0.0;
            l.inertia_com = Mat3::zeros();
        }
        m
    }

    fn rest(_: f64) -> ManipulatorState {
        ManipulatorState::at_rest(Vec4::new(0.0, 0.0, -FRAC_PI_2, 0.0))
    }

    /// Entries of the Z-Y-X body → inertial matrix, one expression per entry.
    fn euler_entries(f: f64, t: f64, p: f64) -> [[f64; 3]; 3] {
        let (s, c) = (f64::sin, f64::cos);
        [
            [c(p) * c(t), -s(p) * c(f) + c(p) * s(t) * s(f), s(p) * s(f) + c(p) * s(t) * c(f)],
            [s(p) * c(t), c(p) * c(f) + s(p) * s(t) * s(f), -c(p) * s(f) + s(p) * s(t) * c(f)],
            [-s(t), c(t) * s(f), c(t) * c(f)],
        ]
    }

    #[test]
    fn euler_rotation_cases() {
        assert_eq!(rotation_from_euler(&Vec3::zeros()), Mat3::identity());
        let yaw = rotation_from_euler(&Vec3::new(0.0, 0.0, FRAC_PI_2));
        assert!((yaw * Vec3::x() - Vec3::y()).norm() < 1e-15);
        for k in 0..50 {
            let e = Vec3::new((k as f64 * 0.37).sin(), (k as f64 * 0.21).cos() * 1.2, k as f64 * 0.5 - 6.0);
            let r = rotation_from_euler(&e);
            let entries = euler_entries(e.x, e.y, e.z);
            for i in 0..3 {
                for j in 0..3 {
                    assert!((r[(i, j)] - entries[i][j]).abs() < 1e-14);
                }
            }
            let (defect, det) = crate::math::orthonormality_defect(&r);
            assert!(defect < 1e-14 && (det - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn massless_hover_is_equilibrium() {
        let m = massless();
        let ip = InertiaParams::zero();
        let u = ControlWrench { thrust: m.uav.mass * m.uav.gravity, torque: Vec3::zeros() };
        let acc = assemble_accelerations(&m, &UavState::default(), &ip, &u, &Wrench::zero()).unwrap();
        assert!(acc.linear.norm() < 1e-15 && acc.angular.norm() < 1e-15);
    }

    #[test]
    fn zero_thrust_is_free_fall() {
        let m = AerialManipulator::reference();
        let s = UavState::default();
        let manip = rest(0.0);
        let d = state_derivative(&m, &s, &manip, &ControlWrench::default(), &Wrench::zero(), 0.0).unwrap();
        let acc = Vec3::new(d[1], d[3], d[5]);
        assert!((acc - Vec3::new(0.0, 0.0, m.uav.gravity)).norm() < 1e-12, "{acc}");
    }

    #[test]
    fn derivative_ordering_and_force_linearity() {
        let m = AerialManipulator::reference();
        let s = UavState {
            position: Vec3::new(0.1, 0.2, -1.0),
            velocity: Vec3::new(0.3, -0.2, 0.1),
            euler: Vec3::new(0.05, -0.04, 0.3),
            body_rates: Vec3::new(0.2, -0.1, 0.05),
        };
        let manip = ManipulatorState {
            q: Vec4::new(0.3, 0.4, -1.2, 0.1),
            qd: Vec4::new(0.2, -0.3, 0.1, 0.0),
            qdd: Vec4::new(0.1, 0.1, -0.2, 0.3),
        };
        let u = ControlWrench { thrust: 30.0, torque: Vec3::new(0.01, -0.02, 0.0) };
        let d0 = state_derivative(&m, &s, &manip, &u, &Wrench::zero(), 0.0).unwrap();
        assert_eq!([d0[0], d0[2], d0[4]], [s.velocity.x, s.velocity.y, s.velocity.z]);
        assert_eq!([d0[6], d0[8], d0[10]], [s.body_rates.x, s.body_rates.y, s.body_rates.z]);

        let f = Vec3::new(0.5, -1.0, 2.0);
        let d1 = state_derivative(&m, &s, &manip, &u, &Wrench::inertial_force_only(f), 0.0).unwrap();
        let d2 = state_derivative(&m, &s, &manip, &u, &Wrench::inertial_force_only(2.0 * f), 0.0).unwrap();
        assert!(((d2 - d0) - 2.0 * (d1 - d0)).amax() < 1e-12);
    }

    #[test]
    fn pitch_guard_rejects_singular_attitude() {
        let m = AerialManipulator::reference();
        let s = UavState { euler: Vec3::new(0.0, 1.57, 0.0), ..Default::default() };
        let r = state_derivative(&m, &s, &rest(0.0), &ControlWrench::default(), &Wrench::zero(), 3.0);
        assert!(matches!(r, Err(Error::PitchSingularity { .. })));
    }

    #[test]
    fn rk4_keeps_equilibrium_unchanged() {
        let m = massless();
        let u = ControlWrench { thrust: m.uav.mass * m.uav.gravity, torque: Vec3::zeros() };
        let s = UavState { position: Vec3::new(1.0, 2.0, -3.0), ..Default::default() };
        let next = step_rk4(&m, &s, 0.0, 0.01, &rest, &u, &Wrench::zero()).unwrap();
        assert_eq!(next, s);
        assert!(step_rk4(&m, &s, 0.0, 0.0, &rest, &u, &Wrench::zero()).is_err());
    }

    #[test]
    fn massless_arm_reduces_to_rigid_quadrotor() {
        let m = massless();
        let s = UavState {
            velocity: Vec3::new(0.4, -0.3, 0.2),
            euler: Vec3::new(0.1, -0.2, 0.7),
            body_rates: Vec3::new(0.5, -0.4, 0.3),
            ..Default::default()
        };
        let u = ControlWrench { thrust: 20.0, torque: Vec3::new(0.1, 0.2, -0.05) };
        let ip = crate::inertia::inertia_params(&m.arm, &m.masses(), &rest(0.0));
        let acc = assemble_accelerations(&m, &s, &ip, &u, &Wrench::zero()).unwrap();
        let j = m.uav.inertia_matrix();
        let w = s.body_rates;
        let expected_w = j.try_inverse().unwrap() * (u.torque - w.cross(&(j * w)));
        let expected_v = -(u.thrust / m.uav.mass) * s.rotation() * Vec3::z() + m.uav.gravity * Vec3::z();
        assert!((acc.angular - expected_w).norm() < 1e-13);
        assert!((acc.linear - expected_v).norm() < 1e-13);
    }

    #[test]
    fn state_vector_round_trip() {
        let s = UavState {
            position: Vec3::new(1.0, 2.0, 3.0),
            velocity: Vec3::new(4.0, 5.0, 6.0),
            euler: Vec3::new(7.0, 8.0, 9.0),
            body_rates: Vec3::new(10.0, 11.0, 12.0),
        };
        let x = s.to_vector();
        assert_eq!(x.as_slice(), &[1.0, 4.0, 2.0, 5.0, 3.0, 6.0, 7.0, 10.0, 8.0, 11.0, 9.0, 12.0]);
        assert_eq!(UavState::from_vector(&x), s);
    }
}
