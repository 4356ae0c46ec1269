//! TOML configuration file. Every key is optional; missing keys take the
//! defaults printed by `amsim --print-default-config`. Unknown keys are
//! rejected with the key named in the error.

use serde::{Deserialize, Serialize};

use crate::controllers::{BackstepGains, GyroTermForm, NetworkSettings, PidGains, Saturation};
use crate::disturbance::Frame;
use crate::scenario::{ControllerKind, JointProgram, ReferenceConfig, ScenarioConfig, StepDisturbance, TakeoffProfile};
use crate::{Error, Result, Vec3, Vec4};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerName {
    Pid,
    PidFf,
    Annb,
}

impl From<ControllerName> for ControllerKind {
    fn from(c: ControllerName) -> Self {
        match c {
            ControllerName::Pid => ControllerKind::Pid,
            ControllerName::PidFf => ControllerKind::PidFf,
            ControllerName::Annb => ControllerKind::Annb,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: u64,
    pub controller: ControllerName,
    pub simulation: SimulationSection,
    pub model: ModelSection,
    pub reference: ReferenceSection,
    pub arm: ArmSection,
    pub disturbance: DisturbanceSection,
    pub feedforward: FeedforwardSection,
    pub annb: AnnbSection,
    pub pid: PidSection,
    pub saturation: SaturationSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSection {
    /// [s]
    pub duration: f64,
    pub physics_dt: f64,
    pub control_dt: f64,
    /// Position magnitude treated as divergence [m].
    pub divergence_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub uav_mass: f64,
    pub uav_inertia: [f64; 3],
    pub gravity: f64,
    /// Overrides the arm link masses; the link inertias scale with them.
    pub link_masses: [f64; 4],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileName {
    Quintic,
    Step,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceSection {
    pub takeoff_time: f64,
    pub ramp: f64,
    pub hover_height: f64,
    pub profile: ProfileName,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProgramName {
    Static,
    ArmSweep,
    SingleJoint,
    Table,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArmSection {
    pub program: ProgramName,
    /// Held pose for `static` and `single_joint` [rad].
    pub pose: [f64; 4],
    /// Joint-2 period for `single_joint` [s].
    pub period: f64,
    /// Knot times and joint angles for `table`.
    pub times: Vec<f64>,
    pub table: Vec<[f64; 4]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameName {
    Inertial,
    Body,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DisturbanceSection {
    pub step_enabled: bool,
    pub step_time: f64,
    /// [N]
    pub step_force: [f64; 3],
    pub frame: FrameName,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeedforwardSection {
    /// Master switch for the coupling feedforward of pid_ff and annb.
    pub enabled: bool,
    /// Acceleration estimator low-pass cutoff [rad/s]; 0 leaves the raw difference.
    pub estimator_cutoff: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GyroName {
    StateSpace,
    Literal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnbSection {
    pub k: [f64; 12],
    pub eta: [f64; 6],
    pub gyro_form: GyroName,
    /// Cutoff on the differentiated roll/pitch commands [rad/s]; 0 = raw.
    pub command_rate_cutoff: f64,
    pub nodes: usize,
    /// `[low, high]` per state `x, ẋ, y, ẏ, z, ż, φ, p, θ, q, ψ, r`.
    pub bounds: Vec<[f64; 2]>,
    pub width_factor: f64,
    pub time_scaled: bool,
    /// Low-pass on the training signal [rad/s]; 0 = none.
    pub error_filter_cutoff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PidSection {
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
    pub integral_limit: f64,
    /// Low-pass on the derivative terms [rad/s]; 0 = raw.
    pub derivative_cutoff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SaturationSection {
    pub enabled: bool,
    /// [N]
    pub max_thrust: f64,
    /// [N·m]
    pub max_torque: f64,
}

fn cutoff_to_file(c: Option<f64>) -> f64 {
    c.unwrap_or(0.0)
}

fn cutoff_from_file(c: f64) -> Option<f64> {
    (c > 0.0).then_some(c)
}

impl Default for FileConfig {
    fn default() -> Self {
        let s = ScenarioConfig::reference(ControllerKind::Annb);
        let model = &s.model;
        let pid = s.pid_gains;
        let d = StepDisturbance::reference();
        let ms = model.masses().m_s;
        Self {
            seed: s.seed,
            controller: ControllerName::Annb,
            simulation: SimulationSection {
                duration: s.duration,
                physics_dt: s.physics_dt,
                control_dt: s.control_dt,
                divergence_bound: s.divergence_bound,
            },
            model: ModelSection {
                uav_mass: model.uav.mass,
                uav_inertia: model.uav.inertia.into(),
                gravity: model.uav.gravity,
                link_masses: std::array::from_fn(|i| model.arm.links[i].mass),
            },
            reference: ReferenceSection {
                takeoff_time: s.reference.takeoff_time,
                ramp: s.reference.ramp,
                hover_height: s.reference.hover_height,
                profile: ProfileName::Quintic,
            },
            arm: ArmSection {
                program: ProgramName::ArmSweep,
                pose: [0.0, 0.0, -std::f64::consts::FRAC_PI_2, 0.0],
                period: 20.0,
                times: Vec::new(),
                table: Vec::new(),
            },
            disturbance: DisturbanceSection {
                step_enabled: true,
                step_time: d.time,
                step_force: d.force.into(),
                frame: FrameName::Inertial,
            },
            feedforward: FeedforwardSection { enabled: true, estimator_cutoff: cutoff_to_file(s.estimator_cutoff) },
            annb: AnnbSection {
                k: s.backstep_gains.k,
                eta: s.backstep_gains.eta,
                gyro_form: GyroName::StateSpace,
                command_rate_cutoff: cutoff_to_file(s.command_rate_cutoff),
                nodes: s.network.nodes,
                bounds: s.network.bounds.iter().map(|&(a, b)| [a, b]).collect(),
                width_factor: s.network.width_factor,
                time_scaled: s.network.time_scaled,
                error_filter_cutoff: cutoff_to_file(s.network.error_filter_cutoff),
            },
            pid: PidSection {
                kp_xy: pid.kp_xy,
                kp_z: pid.kp_z,
                kp_vxy: pid.kp_vxy,
                kp_vz: pid.kp_vz,
                ki_vxy: pid.ki_vxy,
                ki_vz: pid.ki_vz,
                kd_vxy: pid.kd_vxy,
                kd_vz: pid.kd_vz,
                kp_roll_pitch: pid.kp_roll_pitch,
                kp_yaw: pid.kp_yaw,
                kp_pq: pid.kp_pq,
                kp_r: pid.kp_r,
                ki_pq: pid.ki_pq,
                ki_r: pid.ki_r,
                kd_pq: pid.kd_pq,
                kd_r: pid.kd_r,
                integral_limit: pid.integral_limit,
                derivative_cutoff: cutoff_to_file(s.pid_derivative_cutoff),
            },
            saturation: SaturationSection { enabled: false, max_thrust: 2.0 * ms * model.uav.gravity, max_torque: 2.0 },
        }
    }
}

macro_rules! section_default {
    ($($t:ty => $field:ident),*) => {
        $(impl Default for $t {
            fn default() -> Self {
                FileConfig::default().$field
            }
        })*
    };
}

section_default!(
    SimulationSection => simulation,
    ModelSection => model,
    ReferenceSection => reference,
    ArmSection => arm,
    DisturbanceSection => disturbance,
    FeedforwardSection => feedforward,
    AnnbSection => annb,
    PidSection => pid,
    SaturationSection => saturation
);

impl FileConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("configuration serialises")
    }

    pub fn to_scenario(&self) -> Result<ScenarioConfig> {
        let mut s = ScenarioConfig::reference(self.controller.into());
        s.seed = self.seed;
        s.duration = self.simulation.duration;
        s.physics_dt = self.simulation.physics_dt;
        s.control_dt = self.simulation.control_dt;
        s.divergence_bound = self.simulation.divergence_bound;

        let m = &self.model;
        if !(m.uav_mass > 0.0) || m.uav_inertia.iter().any(|&j| !(j > 0.0)) {
            return Err(Error::Config("model: UAV mass and inertia must be positive".into()));
        }
        s.model.uav.mass = m.uav_mass;
        s.model.uav.inertia = Vec3::from(m.uav_inertia);
        s.model.uav.gravity = m.gravity;
        for (link, &mass) in s.model.arm.links.iter_mut().zip(&m.link_masses) {
            if !(mass >= 0.0) {
                return Err(Error::Config("model: link masses must be non-negative".into()));
            }
            if link.mass > 0.0 {
                link.inertia_com *= mass / link.mass;
            }
            link.mass = mass;
        }

        s.reference = ReferenceConfig {
            takeoff_time: self.reference.takeoff_time,
            ramp: self.reference.ramp,
            hover_height: self.reference.hover_height,
            profile: match self.reference.profile {
                ProfileName::Quintic => TakeoffProfile::Quintic,
                ProfileName::Step => TakeoffProfile::Step,
            },
        };

        let pose = Vec4::from(self.arm.pose);
        s.joint_program = match self.arm.program {
            ProgramName::Static => JointProgram::Static { q: pose },
            ProgramName::ArmSweep => JointProgram::ArmSweep,
            ProgramName::SingleJoint => JointProgram::SingleJoint { period: self.arm.period, pose },
            ProgramName::Table => JointProgram::Table {
                times: self.arm.times.clone(),
                q: self.arm.table.iter().map(|&q| Vec4::from(q)).collect(),
            },
        };

        let d = &self.disturbance;
        s.step_disturbance = d.step_enabled.then(|| StepDisturbance {
            time: d.step_time,
            force: Vec3::from(d.step_force),
            frame: match d.frame {
                FrameName::Inertial => Frame::Inertial,
                FrameName::Body => Frame::Body,
            },
        });

        s.feedforward = self.feedforward.enabled;
        s.estimator_cutoff = cutoff_from_file(self.feedforward.estimator_cutoff);

        let a = &self.annb;
        s.backstep_gains = BackstepGains { k: a.k, eta: a.eta };
        s.gyro_form = match a.gyro_form {
            GyroName::StateSpace => GyroTermForm::StateSpace,
            GyroName::Literal => GyroTermForm::Literal,
        };
        s.command_rate_cutoff = cutoff_from_file(a.command_rate_cutoff);
        if a.bounds.iter().any(|b| !(b[1] > b[0])) {
            return Err(Error::Config("annb.bounds: each entry must be [low, high] with low < high".into()));
        }
        s.network = NetworkSettings {
            nodes: a.nodes,
            bounds: a.bounds.iter().map(|b| (b[0], b[1])).collect(),
            width_factor: a.width_factor,
            time_scaled: a.time_scaled,
            error_filter_cutoff: cutoff_from_file(a.error_filter_cutoff),
        };

        let p = &self.pid;
        s.pid_gains = PidGains {
            kp_xy: p.kp_xy,
            kp_z: p.kp_z,
            kp_vxy: p.kp_vxy,
            kp_vz: p.kp_vz,
            ki_vxy: p.ki_vxy,
            ki_vz: p.ki_vz,
            kd_vxy: p.kd_vxy,
            kd_vz: p.kd_vz,
            kp_roll_pitch: p.kp_roll_pitch,
            kp_yaw: p.kp_yaw,
            kp_pq: p.kp_pq,
            kp_r: p.kp_r,
            ki_pq: p.ki_pq,
            ki_r: p.ki_r,
            kd_pq: p.kd_pq,
            kd_r: p.kd_r,
            integral_limit: p.integral_limit,
        };
        s.pid_derivative_cutoff = cutoff_from_file(p.derivative_cutoff);
        s.saturation = self
            .saturation
            .enabled
            .then_some(Saturation { max_thrust: self.saturation.max_thrust, max_torque: self.saturation.max_torque });

        s.validate().map_err(|e| Error::Config(e.to_string()))?;
        s.pid_gains.validate().map_err(|e| Error::Config(format!("pid: {e}")))?;
        s.backstep_gains.validate().map_err(|e| Error::Config(format!("annb: {e}")))?;
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_to_reference_scenario() {
        let text = FileConfig::default().to_toml();
        let parsed = FileConfig::from_toml(&text).unwrap();
        assert_eq!(parsed, FileConfig::default());
        let s = parsed.to_scenario().unwrap();
        assert_eq!(s, ScenarioConfig::reference(ControllerKind::Annb));
    }

    #[test]
    fn empty_file_is_default() {
        assert_eq!(FileConfig::from_toml("").unwrap(), FileConfig::default());
    }

    #[test]
    fn unknown_key_is_named() {
        let err = FileConfig::from_toml("[simulation]\nduraton = 3.0\n").unwrap_err();
        assert!(err.to_string().contains("duraton"), "{err}");
        let err = FileConfig::from_toml("bogus = 1\n").unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn partial_override() {
        let c = FileConfig::from_toml("controller = \"pid_ff\"\nseed = 9\n[arm]\nprogram = \"static\"\n").unwrap();
        let s = c.to_scenario().unwrap();
        assert_eq!(s.controller, ControllerKind::PidFf);
        assert_eq!(s.seed, 9);
        assert!(matches!(s.joint_program, JointProgram::Static { .. }));
        assert_eq!(s.duration, 40.0);
    }

    #[test]
    fn invalid_values_rejected() {
        let c = FileConfig::from_toml("[simulation]\ncontrol_dt = 0.0015\n").unwrap();
        assert!(matches!(c.to_scenario(), Err(Error::Config(_))));
        let c = FileConfig::from_toml("[pid]\nkp_xy = -1.0\n").unwrap();
        assert!(c.to_scenario().is_err());
    }

    #[test]
    fn massless_arm_from_file() {
        let c = FileConfig::from_toml("[model]\nlink_masses = [0.0, 0.0, 0.0, 0.0]\n").unwrap();
        let s = c.to_scenario().unwrap();
        assert_eq!(s.model.masses().m_man, 0.0);
        assert!(s.model.arm.links.iter().all(|l| l.inertia_com == crate::Mat3::zeros()));
    }
}
