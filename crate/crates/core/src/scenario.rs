//! Joint programs, reference generation and the closed-loop harness.
//!
//! Physics runs at `physics_dt` with RK4; the controller runs every
//! `control_dt` and its wrench is held in between. The exogenous wrench is
//! evaluated at the start of every physics step and held over it.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, PI};
use std::io::Write;

use crate::controllers::{
    AnnbController, AnnbSettings, BackstepGains, CascadePid, ControlInput, ControlReference, Controller,
    GyroTermForm, NetworkSettings, PidGains, Saturation,
};
use crate::disturbance::{coupling_wrench, Frame, Wrench};
use crate::dynamics::{assemble_accelerations, step_rk4, ControlWrench, JointTrajectory, UavState};
use crate::inertia::inertia_params;
use crate::kinematics::ManipulatorState;
use crate::{AerialManipulator, Error, Result, Vec3, Vec4};

/// Start of the two-joint sweep [s].
pub const SWEEP_START: f64 = 10.0;

/// Prescribed arm motion.
#[derive(Debug, Clone, PartialEq)]
pub enum JointProgram {
    /// Joints held at `q`.
    Static { q: Vec4 },
    /// Joints 1 and 2 swing as `(π/3)sin((π/10)(t−10))` and
    /// `(π/3)sin((2π/15)(t−10))` from `t = 10 s`; joint 3 is held at `−π/2`
    /// and joint 4 at zero.
    ArmSweep,
    /// Joint 2 swings with amplitude `π/2` and the given period; the other
    /// joints stay at `pose`.
    SingleJoint { period: f64, pose: Vec4 },
    /// Piecewise-linear interpolation of `(t, q)` samples, held constant
    /// outside the table. Accelerations are zero between knots.
    Table { times: Vec<f64>, q: Vec<Vec4> },
}

fn sine_joint(amplitude: f64, omega: f64, tau: f64) -> (f64, f64, f64) {
    let (s, c) = (omega * tau).sin_cos();
    (amplitude * s, amplitude * omega * c, -amplitude * omega * omega * s)
}

/// `(q, q̇, q̈)` of [`JointProgram::ArmSweep`].
pub fn arm_sweep(t: f64) -> ManipulatorState {
    let mut m = ManipulatorState::at_rest(Vec4::new(0.0, 0.0, -FRAC_PI_2, 0.0));
    if t >= SWEEP_START {
        let tau = t - SWEEP_START;
        let (q1, qd1, qdd1) = sine_joint(FRAC_PI_3, PI / 10.0, tau);
        let (q2, qd2, qdd2) = sine_joint(FRAC_PI_3, 2.0 * PI / 15.0, tau);
        m.q.x = q1;
        m.q.y = q2;
        m.qd.x = qd1;
        m.qd.y = qd2;
        m.qdd.x = qdd1;
        m.qdd.y = qdd2;
    }
    m
}

/// `(q, q̇, q̈)` of [`JointProgram::SingleJoint`].
pub fn single_joint_sweep(t: f64, period: f64, pose: &Vec4) -> ManipulatorState {
    let (q, qd, qdd) = sine_joint(FRAC_PI_2, 2.0 * PI / period, t);
    let mut m = ManipulatorState::at_rest(*pose);
    m.q.y = q;
    m.qd.y = qd;
    m.qdd.y = qdd;
    m
}

impl JointProgram {
    pub fn validate(&self) -> Result<()> {
        match self {
            JointProgram::SingleJoint { period, .. } if !(*period > 0.0) => {
                Err(Error::InvalidParameter(format!("sweep period {period} must be positive")))
            }
            JointProgram::Table { times, q } => {
                if times.is_empty() || times.len() != q.len() {
                    return Err(Error::LengthMismatch(times.len(), q.len()));
                }
                if times.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::InvalidParameter("joint table times must increase strictly".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

impl JointTrajectory for JointProgram {
    fn state_at(&self, t: f64) -> ManipulatorState {
        match self {
            JointProgram::Static { q } => ManipulatorState::at_rest(*q),
            JointProgram::ArmSweep => arm_sweep(t),
            JointProgram::SingleJoint { period, pose } => single_joint_sweep(t, *period, pose),
            JointProgram::Table { times, q } => {
                let n = times.len();
                if t <= times[0] {
                    return ManipulatorState::at_rest(q[0]);
                }
                if t >= times[n - 1] {
                    return ManipulatorState::at_rest(q[n - 1]);
                }
                let i = times.partition_point(|&tk| tk <= t) - 1;
                let h = times[i + 1] - times[i];
                let slope = (q[i + 1] - q[i]) / h;
                ManipulatorState { q: q[i] + slope * (t - times[i]), qd: slope, qdd: Vec4::zeros() }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TakeoffProfile {
    /// Quintic blend with zero velocity and acceleration at both ends.
    Quintic,
    /// Altitude reference jumps at the takeoff time.
    Step,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceConfig {
    pub takeoff_time: f64,
    pub ramp: f64,
    /// Hover altitude above the start point [m]; the NED reference is `−height`.
    pub hover_height: f64,
    pub profile: TakeoffProfile,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        Self { takeoff_time: 1.0, ramp: 2.0, hover_height: 1.0, profile: TakeoffProfile::Quintic }
    }
}

/// Position/yaw reference at time `t`.
pub fn reference_generator(t: f64, cfg: &ReferenceConfig) -> ControlReference {
    let mut r = ControlReference::default();
    let h = cfg.hover_height;
    let tau = t - cfg.takeoff_time;
    match cfg.profile {
        TakeoffProfile::Step => {
            if tau >= 0.0 {
                r.position.z = -h;
            }
        }
        TakeoffProfile::Quintic => {
            if tau >= cfg.ramp {
                r.position.z = -h;
            } else if tau > 0.0 {
                let s = tau / cfg.ramp;
                let (s2, s3) = (s * s, s * s * s);
                r.position.z = -h * s3 * (10.0 - 15.0 * s + 6.0 * s2);
                r.velocity.z = -h * 30.0 * s2 * (1.0 - s) * (1.0 - s) / cfg.ramp;
                r.acceleration.z = -h * 60.0 * s * (1.0 - s) * (1.0 - 2.0 * s) / (cfg.ramp * cfg.ramp);
            }
        }
    }
    r
}

/// Constant exogenous wrench switched on at `time`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDisturbance {
    pub time: f64,
    pub force: Vec3,
    pub frame: Frame,
}

impl StepDisturbance {
    /// 3.75 N downward (NED +z) from 15 s.
    pub fn reference() -> Self {
        Self { time: 15.0, force: Vec3::new(0.0, 0.0, 3.75), frame: Frame::Inertial }
    }

    pub fn wrench_at(&self, t: f64) -> Wrench {
        let mut w = Wrench::zero();
        if t >= self.time {
            w.force = self.force;
            w.force_frame = self.frame;
        }
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControllerKind {
    Pid,
    PidFf,
    Annb,
}

impl ControllerKind {
    pub const ALL: [ControllerKind; 3] = [ControllerKind::Pid, ControllerKind::PidFf, ControllerKind::Annb];

    pub fn label(&self) -> &'static str {
        match self {
            ControllerKind::Pid => "pid",
            ControllerKind::PidFf => "pid_ff",
            ControllerKind::Annb => "annb",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub model: AerialManipulator,
    pub duration: f64,
    pub physics_dt: f64,
    pub control_dt: f64,
    pub reference: ReferenceConfig,
    pub joint_program: JointProgram,
    pub step_disturbance: Option<StepDisturbance>,
    pub controller: ControllerKind,
    pub seed: u64,
    pub initial_state: UavState,
    /// Master switch for the coupling feedforward in pid_ff and annb.
    pub feedforward: bool,
    /// Low-pass cutoff of the acceleration estimates feeding the feedforward [rad/s].
    pub estimator_cutoff: Option<f64>,
    pub backstep_gains: BackstepGains,
    pub gyro_form: GyroTermForm,
    pub network: NetworkSettings,
    pub command_rate_cutoff: Option<f64>,
    pub pid_gains: PidGains,
    pub pid_derivative_cutoff: Option<f64>,
    pub saturation: Option<Saturation>,
    /// Position magnitude treated as divergence [m].
    pub divergence_bound: f64,
}

impl ScenarioConfig {
    /// 40 s arm-sweep scenario with takeoff at 1 s and the 3.75 N step at 15 s.
    pub fn reference(controller: ControllerKind) -> Self {
        let control_dt = 0.002;
        let annb = AnnbSettings::reference(control_dt, 0);
        Self {
            model: AerialManipulator::reference(),
            duration: 40.0,
            physics_dt: 0.001,
            control_dt,
            reference: ReferenceConfig::default(),
            joint_program: JointProgram::ArmSweep,
            step_disturbance: Some(StepDisturbance::reference()),
            controller,
            seed: 0,
            initial_state: UavState::default(),
            feedforward: true,
            estimator_cutoff: annb.estimator_cutoff,
            backstep_gains: annb.gains,
            gyro_form: annb.gyro_form,
            network: annb.network,
            command_rate_cutoff: annb.command_rate_cutoff,
            pid_gains: PidGains::reference(),
            pid_derivative_cutoff: Some(50.0),
            saturation: None,
            divergence_bound: 1e3,
        }
    }

    /// Physics steps per control period.
    pub fn substeps(&self) -> Result<usize> {
        if !(self.physics_dt > 0.0 && self.control_dt > 0.0) {
            return Err(Error::InvalidParameter("time steps must be positive".into()));
        }
        let ratio = self.control_dt / self.physics_dt;
        let n = ratio.round();
        if n < 1.0 || (ratio - n).abs() > 1e-9 * ratio {
            return Err(Error::InvalidParameter(format!(
                "control_dt {} is not an integer multiple of physics_dt {}",
                self.control_dt, self.physics_dt
            )));
        }
        Ok(n as usize)
    }

    pub fn validate(&self) -> Result<()> {
        self.substeps()?;
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::InvalidParameter(format!("duration {} must be positive", self.duration)));
        }
        if !(self.reference.ramp > 0.0) && self.reference.profile == TakeoffProfile::Quintic {
            return Err(Error::InvalidParameter("takeoff ramp must be positive".into()));
        }
        if !(self.divergence_bound > 0.0) {
            return Err(Error::InvalidParameter("divergence bound must be positive".into()));
        }
        self.joint_program.validate()?;
        for l in &self.model.arm.links {
            if l.mass != 0.0 {
                l.validate()?;
            }
        }
        Ok(())
    }

    pub fn build_controller(&self) -> Result<Box<dyn Controller>> {
        Ok(match self.controller {
            ControllerKind::Pid | ControllerKind::PidFf => Box::new(CascadePid::new(
                &self.model,
                self.pid_gains,
                self.control_dt,
                self.controller == ControllerKind::PidFf && self.feedforward,
                self.estimator_cutoff,
                self.pid_derivative_cutoff,
                self.saturation,
            )?),
            ControllerKind::Annb => {
                let settings = AnnbSettings {
                    gains: self.backstep_gains,
                    gyro_form: self.gyro_form,
                    network: self.network.clone(),
                    control_dt: self.control_dt,
                    command_rate_cutoff: self.command_rate_cutoff,
                    estimator_cutoff: self.estimator_cutoff,
                    feedforward: self.feedforward,
                    saturation: self.saturation,
                    seed: self.seed,
                };
                Box::new(AnnbController::new(&self.model, settings)?)
            }
        })
    }
}

/// One logged control instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRecord {
    pub t: f64,
    pub state: UavState,
    pub manip: ManipulatorState,
    pub reference: ControlReference,
    /// Commanded `(φ_d, θ_d, ψ_d)`.
    pub attitude_command: Vec3,
    pub wrench: ControlWrench,
    /// Coupling wrench of the true dynamics at this instant.
    pub coupling: Wrench,
    pub feedforward: Wrench,
    /// Exogenous force in the inertial frame.
    pub exogenous_force: Vec3,
    pub nn_outputs: [f64; 6],
}

impl LogRecord {
    pub fn position_error(&self) -> Vec3 {
        self.state.position - self.reference.position
    }

    pub fn attitude_error(&self) -> Vec3 {
        self.state.euler - self.attitude_command
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    Completed,
    Diverged { t: f64, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLog {
    pub controller: &'static str,
    pub records: Vec<LogRecord>,
    pub termination: Termination,
}

pub const CSV_HEADER: [&str; 52] = [
    "t[s]",
    "x[m]",
    "y[m]",
    "z[m]",
    "vx[m/s]",
    "vy[m/s]",
    "vz[m/s]",
    "roll[rad]",
    "pitch[rad]",
    "yaw[rad]",
    "p[rad/s]",
    "q[rad/s]",
    "r[rad/s]",
    "x_ref[m]",
    "y_ref[m]",
    "z_ref[m]",
    "roll_cmd[rad]",
    "pitch_cmd[rad]",
    "yaw_cmd[rad]",
    "q1[rad]",
    "q2[rad]",
    "q3[rad]",
    "q4[rad]",
    "qd1[rad/s]",
    "qd2[rad/s]",
    "qd3[rad/s]",
    "qd4[rad/s]",
    "thrust[N]",
    "tau_roll[N*m]",
    "tau_pitch[N*m]",
    "tau_yaw[N*m]",
    "fdis_x[N]",
    "fdis_y[N]",
    "fdis_z[N]",
    "taudis_x[N*m]",
    "taudis_y[N*m]",
    "taudis_z[N*m]",
    "ff_fx[N]",
    "ff_fy[N]",
    "ff_fz[N]",
    "ff_tx[N*m]",
    "ff_ty[N*m]",
    "ff_tz[N*m]",
    "fext_x[N]",
    "fext_y[N]",
    "fext_z[N]",
    "nn1[m/s^2]",
    "nn2[m/s^2]",
    "nn3[m/s^2]",
    "nn4[rad/s^2]",
    "nn5[rad/s^2]",
    "nn6[rad/s^2]",
];

impl TrajectoryLog {
    pub fn completed(&self) -> bool {
        self.termination == Termination::Completed
    }

    /// Writes the log as CSV with the fixed [`CSV_HEADER`] column order.
    /// Forces and torques are written in the inertial and body frames respectively.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER)?;
        let mut row: Vec<String> = Vec::with_capacity(CSV_HEADER.len());
        for rec in &self.records {
            row.clear();
            let r = rec.state.rotation();
            let mut push = |v: f64| row.push(format!("{v:e}"));
            push(rec.t);
            for v in [rec.state.position, rec.state.velocity, rec.state.euler, rec.state.body_rates, rec.reference.position, rec.attitude_command] {
                v.iter().for_each(|&x| push(x));
            }
            rec.manip.q.iter().chain(rec.manip.qd.iter()).for_each(|&x| push(x));
            push(rec.wrench.thrust);
            rec.wrench.torque.iter().for_each(|&x| push(x));
            for wr in [&rec.coupling, &rec.feedforward] {
                wr.inertial_force(&r).iter().for_each(|&x| push(x));
                wr.body_torque(&r).iter().for_each(|&x| push(x));
            }
            rec.exogenous_force.iter().for_each(|&x| push(x));
            rec.nn_outputs.iter().for_each(|&x| push(x));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs the closed loop. Configuration problems are errors; divergence ends
/// the run early and is reported in [`TrajectoryLog::termination`].
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<TrajectoryLog> {
    cfg.validate()?;
    let substeps = cfg.substeps()?;
    let mut controller = cfg.build_controller()?;
    let steps = (cfg.duration / cfg.control_dt).round() as usize;
    let masses = cfg.model.masses();
    let joints = &cfg.joint_program;
    let exogenous = |t: f64| cfg.step_disturbance.map(|d| d.wrench_at(t)).unwrap_or_default();

    let mut state = cfg.initial_state;
    let mut records = Vec::with_capacity(steps + 1);
    let mut termination = Termination::Completed;

    for k in 0..=steps {
        let t = k as f64 * cfg.control_dt;
        let manip = joints.state_at(t);
        let reference = reference_generator(t, &cfg.reference);
        let out = controller.update(&ControlInput { t, state: &state, reference: &reference, manip: &manip });
        let ext = exogenous(t);
        let ip = inertia_params(&cfg.model.arm, &masses, &manip);
        let coupling = match assemble_accelerations(&cfg.model, &state, &ip, &out.wrench, &ext) {
            Ok(acc) => coupling_wrench(&cfg.model, &state, &ip, &acc),
            Err(e) => {
                termination = Termination::Diverged { t, reason: e.to_string() };
                break;
            }
        };
        records.push(LogRecord {
            t,
            state,
            manip,
            reference,
            attitude_command: out.attitude_command,
            wrench: out.wrench,
            coupling,
            feedforward: out.feedforward,
            exogenous_force: ext.inertial_force(&state.rotation()),
            nn_outputs: out.nn_outputs,
        });
        if k == steps {
            break;
        }
        let mut failed = None;
        for j in 0..substeps {
            let tp = t + j as f64 * cfg.physics_dt;
            match step_rk4(&cfg.model, &state, tp, cfg.physics_dt, joints, &out.wrench, &exogenous(tp)) {
                Ok(next) => state = next,
                Err(e) => {
                    failed = Some(Termination::Diverged { t: tp, reason: e.to_string() });
                    break;
                }
            }
        }
        if failed.is_none() && state.position.norm() > cfg.divergence_bound {
            failed = Some(Termination::Diverged {
                t: t + cfg.control_dt,
                reason: format!("position left the {} m bound", cfg.divergence_bound),
            });
        }
        if let Some(f) = failed {
            termination = f;
            break;
        }
    }
    Ok(TrajectoryLog { controller: cfg.controller.label(), records, termination })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_values() {
        let m = arm_sweep(10.0);
        assert_eq!(m.q, Vec4::new(0.0, 0.0, -FRAC_PI_2, 0.0));
        assert!((arm_sweep(15.0).q.x - FRAC_PI_3).abs() < 1e-15);
        assert!((arm_sweep(10.0).qd.x - PI * PI / 30.0).abs() < 1e-15);
        assert_eq!(arm_sweep(9.99).qd, Vec4::zeros());
    }

    #[test]
    fn sweep_derivatives_match_differences() {
        let h = 1e-5;
        for &t in &[11.0, 13.7, 22.2] {
            let (a, b, m) = (arm_sweep(t - h), arm_sweep(t + h), arm_sweep(t));
            assert!(((b.q - a.q) / (2.0 * h) - m.qd).amax() < 1e-8);
            assert!(((b.qd - a.qd) / (2.0 * h) - m.qdd).amax() < 1e-8);
        }
    }

    #[test]
    fn single_joint_values() {
        let pose = Vec4::new(0.0, 0.0, -FRAC_PI_2, 0.0);
        for period in [10.0, 20.0] {
            assert!((single_joint_sweep(period / 4.0, period, &pose).q.y - FRAC_PI_2).abs() < 1e-15);
            assert_eq!(single_joint_sweep(0.0, period, &pose).q.y, 0.0);
            let peak = single_joint_sweep(0.0, period, &pose).qd.y;
            assert!((peak - FRAC_PI_2 * 2.0 * PI / period).abs() < 1e-15);
        }
    }

    #[test]
    fn table_interpolates() {
        let p = JointProgram::Table { times: vec![0.0, 2.0], q: vec![Vec4::zeros(), Vec4::new(2.0, 0.0, 0.0, -4.0)] };
        p.validate().unwrap();
        let m = p.state_at(0.5);
        assert!((m.q - Vec4::new(0.5, 0.0, 0.0, -1.0)).amax() < 1e-15);
        assert_eq!(m.qd, Vec4::new(1.0, 0.0, 0.0, -2.0));
        assert_eq!(p.state_at(5.0).q, Vec4::new(2.0, 0.0, 0.0, -4.0));
        let bad = JointProgram::Table { times: vec![0.0, 0.0], q: vec![Vec4::zeros(); 2] };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn takeoff_reference() {
        let cfg = ReferenceConfig::default();
        assert_eq!(reference_generator(0.5, &cfg).position.z, 0.0);
        let late = reference_generator(10.0, &cfg);
        assert_eq!(late.position, Vec3::new(0.0, 0.0, -1.0));
        assert_eq!((late.velocity, late.acceleration), (Vec3::zeros(), Vec3::zeros()));
        // midpoint of a quintic blend: s = 1/2, ds/dτ = 15/8, d²s/dτ² = 0
        let mid = reference_generator(2.0, &cfg);
        assert!((mid.position.z + 0.5).abs() < 1e-15);
        assert!((mid.velocity.z + 15.0 / 8.0 / 2.0).abs() < 1e-15);
        assert!(mid.acceleration.z.abs() < 1e-15);
        let h = 1e-6;
        for &t in &[1.3, 2.4, 2.9] {
            let (a, b, m) = (reference_generator(t - h, &cfg), reference_generator(t + h, &cfg), reference_generator(t, &cfg));
            assert!(((b.position.z - a.position.z) / (2.0 * h) - m.velocity.z).abs() < 1e-7);
            assert!(((b.velocity.z - a.velocity.z) / (2.0 * h) - m.acceleration.z).abs() < 1e-6);
        }
        let step = ReferenceConfig { profile: TakeoffProfile::Step, ..cfg };
        assert_eq!(reference_generator(1.0, &step).position.z, -1.0);
    }

    #[test]
    fn config_checks() {
        let mut c = ScenarioConfig::reference(ControllerKind::Pid);
        assert_eq!(c.substeps().unwrap(), 2);
        c.control_dt = 0.0025;
        assert!(c.validate().is_err());
        let mut c = ScenarioConfig::reference(ControllerKind::Pid);
        c.duration = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn short_run_logs_uniformly() {
        let mut c = ScenarioConfig::reference(ControllerKind::PidFf);
        c.duration = 0.5;
        let log = run_scenario(&c).unwrap();
        assert!(log.completed());
        assert_eq!(log.records.len(), 251);
        assert!(log.records.windows(2).all(|w| w[1].t > w[0].t));
        let mut buf = Vec::new();
        log.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 252);
        assert_eq!(text.lines().nth(1).unwrap().split(',').count(), CSV_HEADER.len());
    }
}
