use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{AttitudeExtractor, ControlInput, ControlOutput, Controller, Feedforward, Saturation};
use crate::dynamics::{ControlWrench, UavState};
use crate::filters::FilteredDerivative;
use crate::rbfnn::{latin_hypercube, mean_nearest_center_distance, ErrorSignal, RbfNetwork};
use crate::{AerialManipulator, Error, Result, Vec3};

use super::ControlReference;

/// Backstepping gains `k1…k12` and network learning rates `η1…η6`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackstepGains {
    pub k: [f64; 12],
    pub eta: [f64; 6],
}

impl BackstepGains {
    pub fn reference() -> Self {
        Self {
            k: [2.0, 0.3, 2.0, 0.3, 2.5, 0.9, 4.0, 2.5, 4.0, 2.5, 9.2, 3.56],
            eta: [0.006, 0.006, 0.04, 0.03, 0.03, 0.03],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k.iter().any(|&k| !(k > 0.0)) {
            return Err(Error::InvalidParameter("backstepping gains must be positive".into()));
        }
        if self.eta.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
            return Err(Error::InvalidParameter("learning rates must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Which state appears in the roll-channel `J_θ` gyroscopic term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GyroTermForm {
    /// `J_θ·q·r`, consistent with the state-space model.
    #[default]
    StateSpace,
    /// `J_θ·ψ·r`, as the attitude law is printed.
    Literal,
}

/// Error coordinates of the position loop: `z[0..6] = z1…z6`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PositionErrors {
    pub z: [f64; 6],
    /// Virtual controls `α1…α3`.
    pub alpha: Vec3,
    pub alpha_dot: Vec3,
}

/// Position-loop control force `(u_x, u_y, u_z)`.
///
/// `nn` are the network estimates of the additional disturbance per axis and
/// `f_dis` the feedforward coupling force (inertial frame).
pub fn annb_position(
    state: &UavState,
    reference: &ControlReference,
    nn: &Vec3,
    f_dis: &Vec3,
    gains: &BackstepGains,
    mass: f64,
    gravity: f64,
) -> (Vec3, PositionErrors) {
    let mut errors = PositionErrors::default();
    let mut u = Vec3::zeros();
    for axis in 0..3 {
        let (k_odd, k_even) = (gains.k[2 * axis], gains.k[2 * axis + 1]);
        let z_odd = state.position[axis] - reference.position[axis];
        let alpha = -k_odd * z_odd + reference.velocity[axis];
        let z_even = state.velocity[axis] - alpha;
        let alpha_dot = -k_odd * (state.velocity[axis] - reference.velocity[axis]) + reference.acceleration[axis];
        let g = if axis == 2 { gravity } else { 0.0 };
        u[axis] = mass * (-k_even * z_even + alpha_dot - g - nn[axis] - z_odd) - f_dis[axis];
        errors.z[2 * axis] = z_odd;
        errors.z[2 * axis + 1] = z_even;
        errors.alpha[axis] = alpha;
        errors.alpha_dot[axis] = alpha_dot;
    }
    (u, errors)
}

/// Desired attitude and its rate.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AttitudeReference {
    pub angles: Vec3,
    pub rates: Vec3,
}

/// Error coordinates of the attitude loop: `z[0..6] = z7…z12`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AttitudeErrors {
    pub z: [f64; 6],
    pub alpha: Vec3,
}

/// Attitude-loop torques `(τ_φ, τ_θ, τ_ψ)`. The networks here absorb the
/// unavailable virtual-control rates `α̇4…α̇6` along with the disturbance.
pub fn annb_attitude(
    state: &UavState,
    att_ref: &AttitudeReference,
    nn: &Vec3,
    tau_dis: &Vec3,
    gains: &BackstepGains,
    inertia: &Vec3,
    form: GyroTermForm,
) -> (Vec3, AttitudeErrors) {
    let mut errors = AttitudeErrors::default();
    let mut core = Vec3::zeros();
    for axis in 0..3 {
        let (k_odd, k_even) = (gains.k[6 + 2 * axis], gains.k[7 + 2 * axis]);
        let z_odd = state.euler[axis] - att_ref.angles[axis];
        let alpha = -k_odd * z_odd + att_ref.rates[axis];
        let z_even = state.body_rates[axis] - alpha;
        core[axis] = inertia[axis] * (-k_even * z_even - nn[axis] - z_odd) - tau_dis[axis];
        errors.z[2 * axis] = z_odd;
        errors.z[2 * axis + 1] = z_even;
        errors.alpha[axis] = alpha;
    }
    let (jf, jt, jp) = (inertia.x, inertia.y, inertia.z);
    let (p, q, r) = (state.body_rates.x, state.body_rates.y, state.body_rates.z);
    let roll_factor = match form {
        GyroTermForm::StateSpace => q,
        GyroTermForm::Literal => state.euler.z,
    };
    let torque = Vec3::new(
        core.x - jt * roll_factor * r + jp * r * p,
        core.y - jp * r * q + jf * p * r,
        core.z - jf * p * p + jt * q * q,
    );
    (torque, errors)
}

/// Center placement and training options for the six networks.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSettings {
    pub nodes: usize,
    /// Per-dimension `(low, high)` bounds of the 12-d state input.
    pub bounds: Vec<(f64, f64)>,
    /// Width as a multiple of the mean nearest-center distance.
    pub width_factor: f64,
    /// Scale each weight step by the control period.
    pub time_scaled: bool,
    pub error_filter_cutoff: Option<f64>,
}

impl Default for NetworkSettings {
    fn default() -> Self {
        // x, ẋ, y, ẏ, z, ż, φ, p, θ, q, ψ, r
        let bounds = vec![
            (-0.01, 0.01),
            (-0.05, 0.05),
            (-0.01, 0.01),
            (-0.05, 0.05),
            (-1.1, 0.1),
            (-0.8, 0.8),
            (-0.02, 0.02),
            (-0.1, 0.1),
            (-0.02, 0.02),
            (-0.1, 0.1),
            (-0.01, 0.01),
            (-0.05, 0.05),
        ];
        Self { nodes: 25, bounds, width_factor: 2.0, time_scaled: false, error_filter_cutoff: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnbSettings {
    pub gains: BackstepGains,
    pub gyro_form: GyroTermForm,
    pub network: NetworkSettings,
    pub control_dt: f64,
    /// Low-pass cutoff on the differentiated attitude commands [rad/s].
    pub command_rate_cutoff: Option<f64>,
    /// Low-pass cutoff of the feedforward acceleration estimator [rad/s].
    pub estimator_cutoff: Option<f64>,
    pub feedforward: bool,
    pub saturation: Option<Saturation>,
    pub seed: u64,
}

impl AnnbSettings {
    pub fn reference(control_dt: f64, seed: u64) -> Self {
        Self {
            gains: BackstepGains::reference(),
            gyro_form: GyroTermForm::StateSpace,
            network: NetworkSettings::default(),
            control_dt,
            command_rate_cutoff: Some(50.0),
            estimator_cutoff: Some(50.0),
            feedforward: true,
            saturation: None,
            seed,
        }
    }
}

/// One network with its training signal.
#[derive(Debug, Clone)]
struct Channel {
    net: RbfNetwork,
    error: ErrorSignal,
}

impl Channel {
    fn step(&mut self, z_even: f64, z_odd: f64, x: &[f64]) -> f64 {
        let e = self.error.update(z_even, z_odd);
        // input dimension is fixed at construction
        let _ = self.net.ogd_update(e, x);
        self.net.evaluate(x).unwrap_or(0.0)
    }
}

/// Adaptive neural-network backstepping controller.
#[derive(Debug, Clone)]
pub struct AnnbController {
    settings: AnnbSettings,
    mass: f64,
    gravity: f64,
    inertia: Vec3,
    channels: Vec<Channel>,
    feedforward: Feedforward,
    extractor: AttitudeExtractor,
    roll_rate: FilteredDerivative<f64>,
    pitch_rate: FilteredDerivative<f64>,
}

impl AnnbController {
    pub fn new(model: &AerialManipulator, settings: AnnbSettings) -> Result<Self> {
        settings.gains.validate()?;
        let ns = &settings.network;
        if ns.bounds.len() != 12 {
            return Err(Error::Dimension { expected: 12, got: ns.bounds.len() });
        }
        if ns.nodes == 0 {
            return Err(Error::InvalidParameter("networks need at least one node".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
        let mut channels = Vec::with_capacity(6);
        for i in 0..6 {
            let centers = latin_hypercube(&ns.bounds, ns.nodes, &mut rng);
            let spacing = mean_nearest_center_distance(&centers);
            let width = if spacing > 0.0 { ns.width_factor * spacing } else { 1.0 };
            let mut net = RbfNetwork::new(centers, DVector::from_element(ns.nodes, width), settings.gains.eta[i])?;
            if ns.time_scaled {
                net = net.with_time_scaling(settings.control_dt);
            }
            let gain = settings.gains.k[2 * i + 1];
            channels.push(Channel { net, error: ErrorSignal::new(gain, settings.control_dt, ns.error_filter_cutoff) });
        }
        let masses = model.masses();
        let dt = settings.control_dt;
        Ok(Self {
            mass: masses.m_s,
            gravity: model.uav.gravity,
            inertia: model.uav.inertia,
            channels,
            feedforward: Feedforward::new(model.clone(), settings.estimator_cutoff, dt, settings.feedforward),
            extractor: AttitudeExtractor::default(),
            roll_rate: FilteredDerivative::new(settings.command_rate_cutoff, dt, 0.0),
            pitch_rate: FilteredDerivative::new(settings.command_rate_cutoff, dt, 0.0),
            settings,
        })
    }

    pub fn network(&self, channel: usize) -> Option<&RbfNetwork> {
        self.channels.get(channel).map(|c| &c.net)
    }
}

impl Controller for AnnbController {
    fn name(&self) -> &'static str {
        "annb"
    }

    fn update(&mut self, input: &ControlInput<'_>) -> ControlOutput {
        let state = input.state;
        let x = state.to_vector();
        let xs = x.as_slice();
        let ff = self.feedforward.update(state, input.manip);
        let r = state.rotation();
        let f_dis = ff.inertial_force(&r);
        let tau_dis = ff.body_torque(&r);
        let gains = self.settings.gains;

        // position loop: train on the current error coordinates, then apply
        let (_, pre) = annb_position(state, input.reference, &Vec3::zeros(), &f_dis, &gains, self.mass, self.gravity);
        let mut nn = [0.0; 6];
        for axis in 0..3 {
            nn[axis] = self.channels[axis].step(pre.z[2 * axis + 1], pre.z[2 * axis], xs);
        }
        let nn_pos = Vec3::new(nn[0], nn[1], nn[2]);
        let (u, _) = annb_position(state, input.reference, &nn_pos, &f_dis, &gains, self.mass, self.gravity);

        let cmd = self.extractor.extract(&u, state.euler.z);
        let att_ref = AttitudeReference {
            angles: Vec3::new(cmd.roll, cmd.pitch, input.reference.yaw),
            rates: Vec3::new(self.roll_rate.update(cmd.roll), self.pitch_rate.update(cmd.pitch), input.reference.yaw_rate),
        };
        let form = self.settings.gyro_form;
        let (_, pre) = annb_attitude(state, &att_ref, &Vec3::zeros(), &tau_dis, &gains, &self.inertia, form);
        for axis in 0..3 {
            nn[3 + axis] = self.channels[3 + axis].step(pre.z[2 * axis + 1], pre.z[2 * axis], xs);
        }
        let nn_att = Vec3::new(nn[3], nn[4], nn[5]);
        let (torque, _) = annb_attitude(state, &att_ref, &nn_att, &tau_dis, &gains, &self.inertia, form);

        let mut wrench = ControlWrench { thrust: cmd.thrust, torque };
        if let Some(sat) = self.settings.saturation {
            wrench = sat.apply(wrench);
        }
        ControlOutput {
            wrench,
            attitude_command: att_ref.angles,
            feedforward: ff,
            nn_outputs: nn,
            events: self.extractor.events(),
        }
    }
}
