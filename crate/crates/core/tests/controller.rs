mod common;

use std::f64::consts::{FRAC_PI_4, PI};

use common::{disk, disk_at, rel, R_C};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vfm_core::*;

#[test]
fn duty_gate_open_fraction() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for fraction in [0.25, 0.5, 0.8] {
        let p = ControllerParams {
            duty_fraction: fraction,
            ..ControllerParams::default()
        };
        let n = 1_000_000;
        let open = (0..n)
            .filter(|_| duty_gate(rng.random_range(0.0..100.0), &p))
            .count();
        assert!(
            (open as f64 / n as f64 - fraction).abs() <= 1e-3,
            "{fraction}"
        );
    }
    let p = ControllerParams::<f64>::default();
    assert!(!duty_gate(0.75 * p.duty_period, &p));
    assert!(duty_gate(0.1 * p.duty_period, &p));
    let always = ControllerParams {
        duty_fraction: 1.0,
        ..p
    };
    assert!((0..1000).all(|i| duty_gate(i as f64 * 0.00731, &always)));
}

#[test]
fn circle_rule_examples() {
    assert_eq!(required_steering_for_circle(2.0, 0.0).unwrap(), 0.0);
    assert!((required_steering_for_circle(2.0, -4.0).unwrap() - FRAC_PI_4).abs() < 1e-15);
    assert_eq!(
        required_steering_for_circle(0.0, 1.0),
        Err(ControlError::ZeroAngularVelocity)
    );
}

#[test]
fn spin_rate_scaling_laws() {
    // without gravity the tilt force vanishes, so F_eff no longer depends on r or M
    let mut p = disk_at(168.0);
    p.contact.gravity = 0.0;
    let base = steady_spin_rate(0.005, &p).unwrap();
    assert!(rel(steady_spin_rate(0.02, &p).unwrap(), base / 2.0) < 1e-12);
    let mut heavy = p;
    heavy.object = ObjectGeometry::point_mass(0.1, p.object.inertia).unwrap();
    let mut light = p;
    light.object = ObjectGeometry::point_mass(0.05, p.object.inertia).unwrap();
    let ratio = steady_spin_rate(0.01, &heavy).unwrap() / steady_spin_rate(0.01, &light).unwrap();
    assert!(rel(ratio, 1.0 / 2f64.sqrt()) < 1e-12);
    assert!(matches!(
        steady_spin_rate(R_C, &disk_at(100.0)),
        Err(ControlError::Infeasible { .. })
    ));
}

#[test]
fn goal_validation() {
    assert!(GoalState::new(-0.01, 0.0, 0.0).is_err());
    assert!(GoalState::new(f64::NAN, 0.0, 0.0).is_err());
    let g = GoalState::new(0.02, 3.0 * PI, -3.0 * PI).unwrap();
    assert!((g.phi_g.abs() - PI).abs() < 1e-12);
}

fn episode(
    goal: GoalState<f64>,
    start: ObjectState<f64>,
    cfg: SimConfig<f64>,
    params: ControllerParams<f64>,
) -> Episode<f64> {
    let mut c = Controller::new(params).unwrap();
    run(&mut c, start, &goal, &disk(), &cfg)
}

#[test]
fn full_goal_runs_every_phase_in_order() {
    let goal = GoalState::new(0.04, FRAC_PI_4, 30f64.to_radians()).unwrap();
    let e = episode(
        goal,
        ObjectState::from_polar(0.02, 1.0, 0.0),
        SimConfig::default().noise_free(),
        ControllerParams::default(),
    );
    assert_eq!(e.summary.outcome, Outcome::Reached);
    let mut seq = vec![Phase::ToCom];
    seq.extend(e.summary.events.iter().map(|ev| ev.to));
    use Phase::*;
    assert_eq!(
        seq,
        vec![
            ToCom,
            SpinUpRadius,
            Kick,
            Rotate,
            ReturnToCom,
            DepartOrigin,
            ToGoal,
            Done
        ]
    );
    let f = e.summary.final_state;
    assert!(f.distance_to(goal.r_g, goal.phi_g) <= 1e-3);
    assert!(wrap_angle(f.psi - goal.psi_g).abs() <= 1f64.to_radians());
}

#[test]
fn motor_is_off_at_halting_boundaries_and_in_done() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut start = ObjectState::at_rest(0.0, 0.0, 0.0);
    for i in 0..6 {
        let goal = GoalState::new(
            rng.random_range(0.01..0.06),
            rng.random_range(-PI..PI),
            rng.random_range(-PI..PI),
        )
        .unwrap();
        let cfg = SimConfig {
            rng_seed: i,
            ..SimConfig::default()
        };
        let e = episode(goal, start, cfg, ControllerParams::default());
        assert_eq!(e.summary.outcome, Outcome::Reached);
        let samples = &e.trajectory.samples;
        for w in samples.windows(2) {
            let (prev, cur) = (&w[0], &w[1]);
            // kick → rotate and depart → goal switch steering without stopping the motor
            let seamless = matches!(
                (prev.phase, cur.phase),
                (Phase::Kick, Phase::Rotate) | (Phase::DepartOrigin, Phase::ToGoal)
            );
            if prev.phase != cur.phase && !seamless {
                assert_eq!(
                    prev.command.frequency, 0.0,
                    "{:?} → {:?} at {}",
                    prev.phase, cur.phase, cur.t
                );
            }
            if cur.phase == Phase::Done {
                assert_eq!(cur.command.frequency, 0.0);
            }
        }
        let f = e.summary.final_state;
        start = ObjectState::at_rest(f.x, f.y, f.psi);
    }
}

#[test]
fn return_to_grasp_point_keeps_orientation() {
    let goal = GoalState::new(0.05, -2.0, 0.4).unwrap();
    let e = episode(
        goal,
        ObjectState::from_polar(0.03, 1.1, 0.4),
        SimConfig::default().noise_free(),
        ControllerParams::default(),
    );
    assert_eq!(e.summary.outcome, Outcome::Reached);
    assert!(e
        .summary
        .events
        .iter()
        .all(|ev| !matches!(ev.to, Phase::Kick | Phase::Rotate)));
    for s in e
        .trajectory
        .samples
        .iter()
        .take_while(|s| s.phase != Phase::ToGoal)
    {
        assert!(
            (s.truth.psi - 0.4).abs() <= 1e-9,
            "{} at {}",
            s.truth.psi,
            s.t
        );
    }
    assert!((e.summary.final_state.psi - 0.4).abs() <= 1f64.to_radians());
}

#[test]
fn infeasible_operating_point_is_reported() {
    let params = ControllerParams {
        omega_rotate: common::hz(120.0),
        ..ControllerParams::default()
    };
    let goal = GoalState::new(0.03, 0.0, 1.0).unwrap();
    let e = episode(goal, ObjectState::default(), SimConfig::default(), params);
    assert!(matches!(
        e.summary.outcome,
        Outcome::Fault(SimError::Infeasible { .. })
    ));
}

#[test]
fn single_precision_closed_loop_reaches_goal() {
    let p = disk();
    let plant = PlantParams {
        object: ObjectGeometry::disk(0.1f32, 0.05, 0.002).unwrap(),
        erm: ErmParams::new(5e-4f32, 2.2865e-3, p.erm.drive_frequency as f32).unwrap(),
        contact: ContactParams::new(1.0f32, 0.9, 1.0, 0.05).unwrap(),
    };
    let goal = GoalState32::new(0.03, 0.5, -0.8).unwrap();
    let mut c = Controller32::new(ControllerParams32::default()).unwrap();
    let s = run_observed(
        &mut c,
        ObjectState32::from_polar(0.02, -1.0, 0.0),
        &goal,
        &plant,
        &SimConfig32::default().noise_free(),
        |_| {},
    );
    assert_eq!(s.outcome, Outcome::Reached);
    assert!(s.final_state.distance_to(goal.r_g, goal.phi_g) <= 1e-3);
    assert!(wrap_angle(s.final_state.psi - goal.psi_g).abs() <= 1f32.to_radians());
}

proptest! {
    #[test]
    fn steering_points_at_target(
        r in 0.001f64..0.1, phi in -3.1f64..3.1, r_g in 0.0f64..0.1, phi_g in -3.1f64..3.1,
    ) {
        let m = ObjectState::from_polar(r, phi, 0.0);
        let (gx, gy) = (r_g * phi_g.cos(), r_g * phi_g.sin());
        let (kx, ky) = (gx - m.x, gy - m.y);
        let k = kx.hypot(ky);
        prop_assume!(k > 1e-9);
        let st = position_steering(&m, r_g, phi_g, 2e-4).unwrap();
        prop_assert_eq!(st.frame, SteeringFrame::Radial);
        let world = phi + st.angle;
        prop_assert!((world.cos() - kx / k).abs() <= 1e-12);
        prop_assert!((world.sin() - ky / k).abs() <= 1e-12);
    }

    #[test]
    fn steering_at_origin_uses_world_frame(x in -1e-4f64..1e-4, y in -1e-4f64..1e-4, phi_g in -3.1f64..3.1) {
        let m = ObjectState::at_rest(x, y, 0.0);
        let st = position_steering(&m, 0.05, phi_g, 2e-4).unwrap();
        prop_assert_eq!(st.frame, SteeringFrame::World);
        let (kx, ky) = (0.05 * phi_g.cos() - x, 0.05 * phi_g.sin() - y);
        prop_assert!(wrap_angle(st.angle - ky.atan2(kx)).abs() <= 1e-12);
    }

    #[test]
    fn duty_gate_is_periodic(t in 0.0f64..10.0, k in 1u32..20) {
        let p = ControllerParams::<f64>::default();
        let shifted = t + k as f64 * p.duty_period;
        // skip samples that land on an edge after rounding
        let phase = (t / p.duty_period).fract();
        prop_assume!((phase - 0.5).abs() > 1e-9 && phase > 1e-9 && phase < 1.0 - 1e-9);
        prop_assert_eq!(duty_gate(t, &p), duty_gate(shifted, &p));
    }
}
