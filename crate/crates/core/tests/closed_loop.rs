//! Closed-loop properties of the harness and the three controllers.

use std::f64::consts::FRAC_PI_2;

use amsim::controllers::{CascadePid, ControlInput, ControlReference, Controller, PidGains};
use amsim::disturbance::{coupling_torque, feedforward_wrench, Wrench};
use amsim::dynamics::{assemble_accelerations, step_rk4, Accelerations, UavState};
use amsim::inertia::inertia_params;
use amsim::kinematics::ManipulatorState;
use amsim::metrics::{mape_default, run_stats};
use amsim::scenario::{run_scenario, single_joint_sweep, ControllerKind, JointProgram, ScenarioConfig, TrajectoryLog};
use amsim::{AerialManipulator, Mat3, Vec3, Vec4};

fn massless(model: &mut AerialManipulator) {
    for l in model.arm.links.iter_mut() {
        l.mass = 0.0;
        l.inertia_com = Mat3::zeros();
    }
}

fn max_position_error(log: &TrajectoryLog, from: f64) -> f64 {
    log.records.iter().filter(|r| r.t >= from).map(|r| r.position_error().amax()).fold(0.0, f64::max)
}

#[test]
fn all_controllers_hold_hover_with_massless_arm() {
    for kind in ControllerKind::ALL {
        let mut cfg = ScenarioConfig::reference(kind);
        massless(&mut cfg.model);
        cfg.joint_program = JointProgram::Static { q: Vec4::new(0.0, 0.0, -FRAC_PI_2, 0.0) };
        cfg.step_disturbance = None;
        cfg.duration = 20.0;
        let log = run_scenario(&cfg).unwrap();
        assert!(log.completed());
        let e = max_position_error(&log, 10.0);
        assert!(e < 1e-6, "{}: {e:e}", kind.label());
    }
}

#[test]
fn annb_static_arm_hover_stays_within_a_tenth_of_a_millimetre() {
    let mut cfg = ScenarioConfig::reference(ControllerKind::Annb);
    cfg.joint_program = JointProgram::Static { q: Vec4::new(0.0, 0.0, -FRAC_PI_2, 0.0) };
    cfg.step_disturbance = None;
    let log = run_scenario(&cfg).unwrap();
    let e = max_position_error(&log, 0.0);
    assert!(e < 1e-4, "{e:e}");
}

#[test]
fn pid_step_response_settles() {
    let mut model = AerialManipulator::reference();
    massless(&mut model);
    let mut pid = CascadePid::new(&model, PidGains::reference(), 0.002, false, Some(50.0), Some(50.0), None).unwrap();
    let reference = ControlReference::hold(Vec3::new(0.1, 0.0, -1.0), 0.0);
    let mut s = UavState { position: Vec3::new(0.0, 0.0, -1.0), ..Default::default() };
    let manip = ManipulatorState::at_rest(Vec4::zeros());
    let joints = move |_t: f64| manip;
    let mut peak: f64 = 0.0;
    let mut late: f64 = 0.0;
    let mut tail = Vec::new();
    // the velocity-loop integral leaves a slow mode (time constant ≈ 75 s)
    for k in 0..150_000 {
        let t = k as f64 * 0.002;
        let u = pid.update(&ControlInput { t, state: &s, reference: &reference, manip: &manip }).wrench;
        for j in 0..2 {
            s = step_rk4(&model, &s, t + j as f64 * 0.001, 0.001, &joints, &u, &Wrench::zero()).unwrap();
        }
        peak = peak.max(s.position.x);
        if t >= 3.0 {
            late = late.max((s.position.x - 0.1).abs());
        }
        if k % 5000 == 0 && t >= 10.0 {
            tail.push((s.position.x - 0.1).abs());
        }
    }
    assert!(peak < 0.105, "overshoot {peak}");
    assert!(late < 0.002, "not settled: {late}");
    assert!(tail.windows(2).all(|w| w[1] < w[0]), "offset does not decay: {tail:?}");
    assert!((s.position.x - 0.1).abs() < 5e-5, "residual offset {}", s.position.x - 0.1);
}

#[test]
fn pid_ff_without_feedforward_is_pid() {
    let mut a = ScenarioConfig::reference(ControllerKind::Pid);
    a.duration = 14.0;
    a.feedforward = false;
    let b = ScenarioConfig { controller: ControllerKind::PidFf, ..a.clone() };
    let (la, lb) = (run_scenario(&a).unwrap(), run_scenario(&b).unwrap());
    assert_eq!(la.records.len(), lb.records.len());
    for (x, y) in la.records.iter().zip(&lb.records) {
        assert_eq!(x.wrench, y.wrench);
        assert_eq!(x.state, y.state);
    }
}

#[test]
fn halving_physics_step_barely_moves_metrics() {
    for kind in ControllerKind::ALL {
        let base = ScenarioConfig::reference(kind);
        let fine = ScenarioConfig { physics_dt: base.physics_dt / 2.0, ..base.clone() };
        let (a, b) = (run_scenario(&base).unwrap(), run_scenario(&fine).unwrap());
        let (sa, sb) = (run_stats(&a, 10.0, 40.0).unwrap(), run_stats(&b, 10.0, 40.0).unwrap());
        for c in 0..6 {
            let (x, y) = (sa.channels[c], sb.channels[c]);
            for (p, q) in [(x.mean, y.mean), (x.max, y.max), (x.rmse, y.rmse)] {
                assert!((p - q).abs() <= 0.01 * p.abs().max(q.abs()), "{} channel {c}: {p} vs {q}", kind.label());
            }
        }
    }
}

#[test]
fn reference_magnitudes() {
    let run = |k| run_stats(&run_scenario(&ScenarioConfig::reference(k)).unwrap(), 10.0, 40.0).unwrap();
    let (pid, ff, annb) = (run(ControllerKind::Pid), run(ControllerKind::PidFf), run(ControllerKind::Annb));
    let x_max = pid.channels[0].max;
    assert!((0.05..0.5).contains(&x_max), "pid X max {x_max}");
    for c in [3, 4] {
        assert!(pid.channels[c].max > 10.0 * ff.channels[c].max, "attitude channel {c}");
        assert!(annb.channels[c].max < 0.01 && ff.channels[c].max < 0.01);
    }
    assert!(ff.channels[0].max < 1e-3 && ff.channels[1].max < 1e-3);
    assert!(annb.channels[0].max < 1e-3 && annb.channels[1].max < 1e-3);
}

/// Feedforward fed with the true accelerations of the previous control step.
/// The torque must stay within 2 % RMS of the truth. The coupling force is
/// small here (a few hundredths of a newton), so its deviation is instead
/// checked to consist of nothing but the delayed `ω̇ × r_omc` term.
#[test]
fn one_step_delayed_feedforward_tracks_truth() {
    let cfg = ScenarioConfig::reference(ControllerKind::PidFf);
    let model = &cfg.model;
    let masses = model.masses();
    let log = run_scenario(&cfg).unwrap();
    let mut prev: Option<Accelerations> = None;
    let (mut sq_truth, mut sq_err) = (0.0, 0.0);
    let mut force_gap: f64 = 0.0;
    for rec in &log.records {
        let ip = inertia_params(&model.arm, &masses, &rec.manip);
        let ext = Wrench::inertial_force_only(rec.exogenous_force);
        let acc = assemble_accelerations(model, &rec.state, &ip, &rec.wrench, &ext).unwrap();
        if let (Some(p), true) = (prev, rec.t >= 10.0) {
            let ff = feedforward_wrench(model, &rec.state, &rec.manip, &p.angular, &p.linear);
            sq_truth += rec.coupling.torque.norm_squared();
            sq_err += (ff.torque - rec.coupling.torque).norm_squared();
            let delay_term = -masses.m_man * rec.state.rotation() * (p.angular - acc.angular).cross(&ip.r_omc);
            force_gap = force_gap.max((ff.force - rec.coupling.force - delay_term).amax());
        }
        prev = Some(acc);
    }
    let rel = (sq_err / sq_truth).sqrt();
    assert!(rel < 0.02, "torque deviation {:.3}%", 100.0 * rel);
    assert!(force_gap < 1e-12, "{force_gap:e}");
}

#[test]
fn single_joint_sweep_torque_shape() {
    let model = AerialManipulator::reference();
    let masses = model.masses();
    let pose = Vec4::new(0.0, 0.0, -FRAC_PI_2, 0.0);
    let hover = UavState::default();
    for period in [10.0, 20.0] {
        let tau = |t: f64| {
            let ip = inertia_params(&model.arm, &masses, &single_joint_sweep(t, period, &pose));
            coupling_torque(&model, &hover, &ip, &Vec3::zeros(), &Vec3::zeros())
        };
        let mut peak = Vec3::zeros();
        for k in 0..400 {
            let t = period * k as f64 / 400.0;
            let (a, b) = (tau(t), tau(t + period));
            assert!((a - b).amax() < 1e-9);
            peak = peak.zip_map(&a, |p, v| p.max(v.abs()));
        }
        assert!(peak.y > 10.0 * peak.x && peak.y > 10.0 * peak.z, "{peak}");
    }
}

#[test]
fn feedforward_mape_on_single_joint_sweep() {
    for period in [10.0, 20.0] {
        let mut cfg = ScenarioConfig::reference(ControllerKind::PidFf);
        cfg.joint_program = JointProgram::SingleJoint { period, pose: Vec4::new(0.0, 0.0, -FRAC_PI_2, 0.0) };
        cfg.step_disturbance = None;
        cfg.duration = 5.0 + 2.0 * period;
        let log = run_scenario(&cfg).unwrap();
        let window: Vec<_> = log.records.iter().filter(|r| r.t >= 5.0).collect();
        let est: Vec<f64> = window.iter().map(|r| r.feedforward.torque.y).collect();
        let truth: Vec<f64> = window.iter().map(|r| r.coupling.torque.y).collect();
        let m = mape_default(&est, &truth).unwrap();
        assert!((m.excluded as f64) < 0.2 * m.total as f64, "{} of {} excluded", m.excluded, m.total);
        assert!(m.percent < 5.0, "period {period}: {}%", m.percent);
    }
}

#[test]
fn step_disturbance_is_logged() {
    let cfg = ScenarioConfig::reference(ControllerKind::Annb);
    let log = run_scenario(&cfg).unwrap();
    for r in &log.records {
        let expected = if r.t >= 15.0 { 3.75 } else { 0.0 };
        assert_eq!(r.exogenous_force, Vec3::new(0.0, 0.0, expected));
    }
}

#[test]
fn divergence_returns_partial_log() {
    let mut cfg = ScenarioConfig::reference(ControllerKind::Pid);
    cfg.saturation = Some(amsim::controllers::Saturation { max_thrust: 0.0, max_torque: 2.0 });
    cfg.divergence_bound = 50.0;
    let log = run_scenario(&cfg).unwrap();
    assert!(!log.completed());
    assert!(!log.records.is_empty());
    assert!(log.records.last().unwrap().t < cfg.duration);
}
