use super::{AttitudeExtractor, ControlInput, ControlOutput, Controller, Feedforward, Saturation};
use crate::disturbance::Wrench;
use crate::dynamics::ControlWrench;
use crate::filters::FilteredDerivative;
use crate::{AerialManipulator, Error, Result, Vec3};

/// Cascade PID gains. Velocity-loop outputs are accelerations [m/s²] and
/// rate-loop outputs are torques [N·m].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PidGains {
    pub kp_xy: f64,
    pub kp_z: f64,
    pub kp_vxy: f64,
    pub kp_vz: f64,
    pub ki_vxy: f64,
    pub ki_vz: f64,
    pub kd_vxy: f64,
    pub kd_vz: f64,
    pub kp_roll_pitch: f64,
    pub kp_yaw: f64,
    pub kp_pq: f64,
    pub kp_r: f64,
    pub ki_pq: f64,
    pub ki_r: f64,
    pub kd_pq: f64,
    pub kd_r: f64,
    /// Bound on each integral contribution `ki ∫e`.
    pub integral_limit: f64,
}

impl PidGains {
    pub fn reference() -> Self {
        Self {
            kp_xy: 5.0,
            kp_z: 4.0,
            kp_vxy: 1.5,
            kp_vz: 5.0,
            ki_vxy: 0.02,
            ki_vz: 0.02,
            kd_vxy: 1.0,
            kd_vz: 1.0,
            kp_roll_pitch: 6.5,
            kp_yaw: 3.5,
            kp_pq: 0.8,
            kp_r: 2.0,
            ki_pq: 0.2,
            ki_r: 0.5,
            kd_pq: 0.03,
            kd_r: 0.02,
            integral_limit: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let p = [self.kp_xy, self.kp_z, self.kp_vxy, self.kp_vz, self.kp_roll_pitch, self.kp_yaw, self.kp_pq, self.kp_r];
        if p.iter().any(|&k| !(k > 0.0 && k.is_finite())) {
            return Err(Error::InvalidParameter("proportional gains must be positive".into()));
        }
        let id = [self.ki_vxy, self.ki_vz, self.kd_vxy, self.kd_vz, self.ki_pq, self.ki_r, self.kd_pq, self.kd_r];
        if id.iter().any(|&k| !(k >= 0.0 && k.is_finite())) {
            return Err(Error::InvalidParameter("integral and derivative gains must be non-negative".into()));
        }
        if !(self.integral_limit > 0.0 && self.integral_limit.is_finite()) {
            return Err(Error::InvalidParameter("integral limit must be positive and finite".into()));
        }
        Ok(())
    }
}

/// Scalar PID with a clamped integral term and backward-difference D.
#[derive(Debug, Clone)]
struct Pid {
    kp: f64,
    ki: f64,
    kd: f64,
    limit: f64,
    dt: f64,
    integral: f64,
    derivative: FilteredDerivative<f64>,
}

impl Pid {
    fn new(kp: f64, ki: f64, kd: f64, limit: f64, dt: f64, d_cutoff: Option<f64>) -> Self {
        Self { kp, ki, kd, limit, dt, integral: 0.0, derivative: FilteredDerivative::new(d_cutoff, dt, 0.0) }
    }

    fn update(&mut self, e: f64) -> f64 {
        self.integral = (self.integral + self.ki * e * self.dt).clamp(-self.limit, self.limit);
        self.kp * e + self.integral + self.kd * self.derivative.update(e)
    }
}

fn wrap_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    a - two_pi * ((a + std::f64::consts::PI) / two_pi).floor()
}

/// Position → velocity → attitude → body-rate cascade, optionally with
/// coupling feedforward subtracted from the force and torque commands.
#[derive(Debug, Clone)]
pub struct CascadePid {
    gains: PidGains,
    mass: f64,
    gravity: f64,
    velocity: [Pid; 3],
    rate: [Pid; 3],
    feedforward: Feedforward,
    with_feedforward: bool,
    extractor: AttitudeExtractor,
    saturation: Option<Saturation>,
}

impl CascadePid {
    /// `estimator_cutoff` filters the feedforward acceleration estimates and
    /// `d_cutoff` the derivative terms.
    pub fn new(
        model: &AerialManipulator,
        gains: PidGains,
        control_dt: f64,
        with_feedforward: bool,
        estimator_cutoff: Option<f64>,
        d_cutoff: Option<f64>,
        saturation: Option<Saturation>,
    ) -> Result<Self> {
        gains.validate()?;
        if !(control_dt > 0.0) {
            return Err(Error::InvalidParameter(format!("control period {control_dt} must be positive")));
        }
        let g = &gains;
        let lim = g.integral_limit;
        let vel = |kp, ki, kd| Pid::new(kp, ki, kd, lim, control_dt, d_cutoff);
        Ok(Self {
            velocity: [vel(g.kp_vxy, g.ki_vxy, g.kd_vxy), vel(g.kp_vxy, g.ki_vxy, g.kd_vxy), vel(g.kp_vz, g.ki_vz, g.kd_vz)],
            rate: [vel(g.kp_pq, g.ki_pq, g.kd_pq), vel(g.kp_pq, g.ki_pq, g.kd_pq), vel(g.kp_r, g.ki_r, g.kd_r)],
            mass: model.masses().m_s,
            gravity: model.uav.gravity,
            feedforward: Feedforward::new(model.clone(), estimator_cutoff, control_dt, with_feedforward),
            with_feedforward,
            extractor: AttitudeExtractor::default(),
            saturation,
            gains,
        })
    }
}

impl Controller for CascadePid {
    fn name(&self) -> &'static str {
        if self.with_feedforward {
            "pid_ff"
        } else {
            "pid"
        }
    }

    fn update(&mut self, input: &ControlInput<'_>) -> ControlOutput {
        let s = input.state;
        let rf = input.reference;
        let g = &self.gains;
        let ff: Wrench = self.feedforward.update(s, input.manip);
        let r = s.rotation();

        let kp_pos = Vec3::new(g.kp_xy, g.kp_xy, g.kp_z);
        let mut accel = Vec3::zeros();
        for axis in 0..3 {
            let v_cmd = kp_pos[axis] * (rf.position[axis] - s.position[axis]) + rf.velocity[axis];
            accel[axis] = self.velocity[axis].update(v_cmd - s.velocity[axis]) + rf.acceleration[axis];
        }
        let u = self.mass * (accel - self.gravity * Vec3::z()) - ff.inertial_force(&r);
        let cmd = self.extractor.extract(&u, s.euler.z);
        let attitude = Vec3::new(cmd.roll, cmd.pitch, rf.yaw);

        let rate_cmd = Vec3::new(
            g.kp_roll_pitch * (attitude.x - s.euler.x),
            g.kp_roll_pitch * (attitude.y - s.euler.y),
            g.kp_yaw * wrap_angle(attitude.z - s.euler.z) + rf.yaw_rate,
        );
        let mut torque = Vec3::zeros();
        for axis in 0..3 {
            torque[axis] = self.rate[axis].update(rate_cmd[axis] - s.body_rates[axis]);
        }
        torque -= ff.body_torque(&r);

        let mut wrench = ControlWrench { thrust: cmd.thrust, torque };
        if let Some(sat) = self.saturation {
            wrench = sat.apply(wrench);
        }
        ControlOutput {
            wrench,
            attitude_command: attitude,
            feedforward: ff,
            nn_outputs: [0.0; 6],
            events: self.extractor.events(),
        }
    }
}
