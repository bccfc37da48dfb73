mod common;

use std::f64::consts::{FRAC_PI_3, PI, TAU};

use common::{disk, disk_at, hz, rel, R_C};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vfm_core::*;

fn integrate(
    plant: &PlantParams<f64>,
    start: ObjectState<f64>,
    cmd: ActuatorCommand<f64>,
    dt: f64,
    steps: usize,
) -> ObjectState<f64> {
    let cfg = SimConfig {
        dt,
        ..SimConfig::default().noise_free()
    };
    let mut p = Plant::starting_at(*plant, &start, cfg.r_origin_epsilon);
    let mut s = start;
    for _ in 0..steps {
        s = p.step_with_torque(&s, &cmd, &cfg, 0.0).unwrap().state;
    }
    s
}

fn state_distance(a: &ObjectState<f64>, b: &ObjectState<f64>) -> f64 {
    [
        a.x - b.x,
        a.y - b.y,
        a.psi - b.psi,
        a.vx - b.vx,
        a.vy - b.vy,
        a.psi_dot - b.psi_dot,
    ]
    .iter()
    .map(|d| d * d)
    .sum::<f64>()
    .sqrt()
}

fn curved_start() -> ObjectState<f64> {
    ObjectState {
        vx: -0.05,
        vy: 0.12,
        psi_dot: 0.4,
        ..ObjectState::from_polar(0.02, 0.3, 0.1)
    }
}

#[test]
fn halving_the_step_shrinks_error_eightfold() {
    let plant = disk();
    let cmd = ActuatorCommand::radial(2.0 * PI / 3.0, hz(240.0), true);
    let horizon = 0.04;
    let reference = integrate(&plant, curved_start(), cmd, horizon / 6400.0, 6400);
    let mut errors = Vec::new();
    for n in [10usize, 20, 40] {
        errors.push(state_distance(
            &integrate(&plant, curved_start(), cmd, horizon / n as f64, n),
            &reference,
        ));
    }
    for w in errors.windows(2) {
        assert!(w[0] / w[1] >= 8.0, "error ratios {errors:?}");
    }
}

#[test]
fn one_step_matches_hundred_substeps() {
    let plant = disk();
    let cmd = ActuatorCommand::radial(2.0 * PI / 3.0, hz(240.0), true);
    let dt = 1e-3;
    let one = integrate(&plant, curved_start(), cmd, dt, 1);
    let fine = integrate(&plant, curved_start(), cmd, dt / 100.0, 100);
    for (a, b) in [
        (one.x, fine.x),
        (one.y, fine.y),
        (one.psi, fine.psi),
        (one.vx, fine.vx),
        (one.vy, fine.vy),
        (one.psi_dot, fine.psi_dot),
    ] {
        assert!(rel(a, b) < 1e-6, "{one:?} vs {fine:?}");
    }
}

#[test]
fn translation_through_the_grasp_line_keeps_orientation() {
    let plant = disk();
    let dir = 0.7f64;
    let cfg = SimConfig::default().noise_free();
    let cmd = ActuatorCommand::world(dir, hz(240.0), true);
    let start = ObjectState::from_polar(0.05, dir + PI, 0.3);
    let mut sim = Plant::starting_at(plant, &start, cfg.r_origin_epsilon);
    let mut s = start;
    let mut travelled = 0.0;
    while travelled < 0.105 {
        let next = sim.step_with_torque(&s, &cmd, &cfg, 0.0).unwrap().state;
        travelled += (next.x - s.x).hypot(next.y - s.y);
        s = next;
    }
    assert!(s.radius() > 0.05, "object passed through the grasp point");
    assert!((s.psi - 0.3).abs() <= 1e-9, "Δψ = {}", s.psi - 0.3);
}

#[test]
fn radial_push_stays_on_its_ray() {
    let plant = disk();
    let cfg = SimConfig::default().noise_free();
    let cmd = ActuatorCommand::radial(0.0, hz(240.0), true);
    let start = ObjectState::from_polar(0.005, -2.1, 1.0);
    let mut sim = Plant::starting_at(plant, &start, cfg.r_origin_epsilon);
    let mut s = start;
    while s.radius() < 0.09 {
        s = sim.step_with_torque(&s, &cmd, &cfg, 0.0).unwrap().state;
        let phi = s.y.atan2(s.x);
        assert!((phi + 2.1).abs() <= 1e-6);
        assert!((s.psi - 1.0).abs() <= 1e-9);
    }
}

#[test]
fn steady_orbit_matches_analytic_rate() {
    let plant = disk();
    let m = measure_orbit(&plant, R_C, hz(168.0), 1e-4, 10.0).unwrap();
    assert!(m.max_radius_deviation <= 0.01, "{m:?}");
    assert!(rel(m.simulated_rate, m.analytic_rate) <= 0.01, "{m:?}");
    assert!(m.max_phi_ddot_ratio <= 1e-3, "{m:?}");
}

#[test]
fn spin_rate_constant_while_orbiting() {
    let plant = disk_at(168.0);
    let rate = steady_spin_rate(R_C, &plant).unwrap();
    let start = ObjectState::on_circle(R_C, 0.4, rate, 0.2, -0.75);
    let cmd = ActuatorCommand::radial(PI, hz(168.0), true);
    let cfg = SimConfig {
        dt: 1e-4,
        ..SimConfig::default().noise_free()
    };
    let mut sim = Plant::starting_at(plant, &start, cfg.r_origin_epsilon);
    let mut s = start;
    let steps = (10.0 * TAU / rate / cfg.dt) as usize;
    for _ in 0..steps {
        s = sim.step_with_torque(&s, &cmd, &cfg, 0.0).unwrap().state;
        assert!((s.psi_dot + 0.75).abs() <= 1e-6);
    }
}

/// Runs a short constant-θ segment started on the circle where the radial
/// balance holds and recovers θ from differenced `φ`.
fn recovered_steering(theta: f64) -> f64 {
    let plant = disk_at(168.0);
    let force = effective_net_force(&plant.erm, &plant.contact, &plant.object, R_C);
    // the tan rule fixes θ only modulo π; fly the member with cos θ < 0
    let flown = if theta.cos() < 0.0 { theta } else { theta - PI };
    let rate = (-force * flown.cos() / (plant.object.mass * R_C)).sqrt();
    let h = 1e-5;
    let cfg = SimConfig {
        dt: h,
        ..SimConfig::default().noise_free()
    };
    let cmd = ActuatorCommand::radial(flown, hz(168.0), true);
    let mut s = ObjectState::on_circle(R_C, 0.0, rate, 0.0, 0.0);
    let mut sim = Plant::starting_at(plant, &s, cfg.r_origin_epsilon);
    let mut phi = vec![0.0];
    for _ in 0..2 {
        s = sim.step_with_torque(&s, &cmd, &cfg, 0.0).unwrap().state;
        phi.push(s.y.atan2(s.x));
    }
    let phi_dot = (phi[2] - phi[0]) / (2.0 * h);
    let phi_ddot = (phi[2] - 2.0 * phi[1] + phi[0]) / (h * h);
    required_steering_for_circle(phi_dot, phi_ddot).unwrap()
}

#[test]
fn steering_rule_recovers_commanded_angle() {
    for theta in [FRAC_PI_3, 2.0 * FRAC_PI_3, 5.0 * PI / 6.0] {
        let got = recovered_steering(theta);
        let folded = if (got - theta).abs() > PI / 2.0 {
            got + PI
        } else {
            got
        };
        assert!(rel(folded, theta) <= 0.02, "θ = {theta}: recovered {got}");
    }
}

#[test]
fn braking_uses_kinetic_friction() {
    let plant = disk();
    let cfg = SimConfig::default().noise_free();
    let s = ObjectState {
        vx: 0.5,
        psi_dot: 3.0,
        ..ObjectState::from_polar(0.02, 0.0, 0.0)
    };
    let out = Plant::new(plant)
        .step_with_torque(&s, &ActuatorCommand::off(), &cfg, 0.0)
        .unwrap()
        .state;
    let load = 0.9 * (1.0 + 0.05 * 9.81 + 9.81 * 0.05 * 0.02 / 0.05);
    assert!(rel(0.5 - out.vx, load / 0.05 * cfg.dt) < 1e-12);
    assert!(
        rel(
            3.0 - out.psi_dot,
            load * 0.05 / plant.object.inertia * cfg.dt
        ) < 1e-12
    );
}

#[test]
fn gated_drive_brakes_like_motor_off() {
    let plant = disk();
    let cfg = SimConfig::default().noise_free();
    let s = ObjectState {
        vy: 0.2,
        psi_dot: -1.0,
        ..ObjectState::from_polar(0.02, 1.0, 0.0)
    };
    let gated = Plant::new(plant)
        .step_with_torque(
            &s,
            &ActuatorCommand::radial(0.0, hz(240.0), false),
            &cfg,
            0.0,
        )
        .unwrap();
    let off = Plant::new(plant)
        .step_with_torque(&s, &ActuatorCommand::off(), &cfg, 0.0)
        .unwrap();
    assert_eq!(gated, off);
    assert!(!gated.slipping);
}

#[test]
fn infeasible_drive_does_not_slip() {
    let plant = disk();
    let cfg = SimConfig::default().noise_free();
    let s = ObjectState::from_polar(0.02, 1.0, 0.0);
    let out = Plant::new(plant)
        .step_with_torque(
            &s,
            &ActuatorCommand::radial(0.0, hz(100.0), true),
            &cfg,
            0.0,
        )
        .unwrap();
    assert!(!out.slipping);
    assert_eq!(out.state, s);
}

#[test]
fn leaving_the_footprint_is_a_fault() {
    let plant = disk();
    let cfg = SimConfig::default().noise_free();
    let s = ObjectState::from_polar(0.1001, 0.0, 0.0);
    let err = Plant::new(plant)
        .step_with_torque(&s, &ActuatorCommand::off(), &cfg, 0.0)
        .unwrap_err();
    assert!(matches!(err, SimError::GraspLost { .. }));
}

#[test]
fn perturbation_scales_with_squared_slip_ratio() {
    let plant = disk();
    let cfg = SimConfig::default();
    let sim = Plant::new(plant);
    let r = 0.03;
    let cmd = ActuatorCommand::radial(0.0, hz(240.0), true);
    let load = 0.9 * static_normal_load(&plant.contact, &plant.object, r);
    let ratio = effective_net_force(&plant.erm, &plant.contact, &plant.object, r) / load;
    let want = cfg.perturbation_torque_std * ratio * ratio;
    assert!(rel(sim.perturbation_std(r, &cmd, &cfg), want) < 1e-12);
    assert_eq!(
        sim.perturbation_std(r, &ActuatorCommand::radial(0.0, hz(100.0), true), &cfg),
        0.0
    );
}

#[test]
fn sensor_noise_has_configured_spread() {
    let cfg = SimConfig::<f64>::default();
    let truth = ObjectState::from_polar(0.02, 0.5, 0.1);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 100_000;
    let (mut sx, mut sy, mut sp) = (0.0, 0.0, 0.0);
    for _ in 0..n {
        let m = sense(&truth, &cfg, &mut rng);
        sx += (m.x - truth.x).powi(2);
        sy += (m.y - truth.y).powi(2);
        sp += (m.psi - truth.psi).powi(2);
    }
    let std = |s: f64| (s / n as f64).sqrt();
    assert!(rel(std(sx), 1.5e-3) < 0.02);
    assert!(rel(std(sy), 1.5e-3) < 0.02);
    assert!(rel(std(sp), 1f64.to_radians()) < 0.02);
}

#[test]
fn closed_loop_runs_are_reproducible() {
    let plant = disk();
    let goal = GoalState::new(0.03, -1.0, 1.2).unwrap();
    let cfg = SimConfig {
        rng_seed: 99,
        ..SimConfig::default()
    };
    let start = ObjectState::from_polar(0.015, 2.0, -0.3);
    let mut csv = Vec::new();
    for _ in 0..2 {
        let mut c = Controller::new(ControllerParams::default()).unwrap();
        let e = run(&mut c, start, &goal, &plant, &cfg);
        let mut buf = Vec::new();
        e.trajectory.write_csv(&mut buf).unwrap();
        csv.push(buf);
    }
    assert_eq!(csv[0], csv[1]);
    assert!(csv[0].len() > 1000);
}

#[test]
fn trajectory_csv_has_nine_significant_digits() {
    let plant = disk();
    let goal = GoalState::new(0.02, 0.5, 0.0).unwrap();
    let mut c = Controller::new(ControllerParams::default()).unwrap();
    let e = run(
        &mut c,
        ObjectState::from_polar(0.01, 0.5, 0.0),
        &goal,
        &plant,
        &SimConfig::default().noise_free(),
    );
    let mut buf = Vec::new();
    e.trajectory.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(TRAJECTORY_HEADER));
    let row: Vec<&str> = lines.nth(5).unwrap().split(',').collect();
    assert_eq!(row.len(), TRAJECTORY_HEADER.split(',').count());
    let mantissa = row[1].split('e').next().unwrap().trim_start_matches('-');
    assert_eq!(mantissa.chars().filter(|c| c.is_ascii_digit()).count(), 9);
}

proptest! {
    #[test]
    fn polar_round_trip(r in 1e-3f64..0.1, phi in -3.1f64..3.1, phi_dot in -20.0f64..20.0) {
        let s = ObjectState::on_circle(r, phi, phi_dot, 0.0, 0.0);
        let pv = polar_view(&s, 2e-4).unwrap();
        prop_assert!((pv.r - r).abs() <= 1e-12 * r.max(1.0));
        prop_assert!(wrap_angle(pv.phi - phi).abs() <= 1e-12);
        prop_assert!(pv.r_dot.abs() <= 1e-12 * phi_dot.abs().max(1.0));
        prop_assert!((pv.phi_dot - phi_dot).abs() <= 1e-12 * phi_dot.abs().max(1.0));
    }

    #[test]
    fn radial_drive_never_turns_the_object(
        r in 0.005f64..0.06,
        phi in -3.1f64..3.1,
        psi in -3.1f64..3.1,
        outward in any::<bool>(),
        steps in 1usize..200,
    ) {
        let theta = if outward { 0.0 } else { PI };
        let end = integrate(&disk(), ObjectState::from_polar(r, phi, psi), ActuatorCommand::radial(theta, hz(240.0), true), 1e-4, steps);
        prop_assert!((end.psi - psi).abs() <= 1e-9);
    }

    #[test]
    fn braking_never_reverses_motion(v in 0.0f64..2.0, w in -20.0f64..20.0, dir in -3.1f64..3.1) {
        let cfg = SimConfig::default().noise_free();
        let (s, c) = dir.sin_cos();
        let start = ObjectState { vx: v * c, vy: v * s, psi_dot: w, ..ObjectState::from_polar(0.02, 0.0, 0.0) };
        let out = Plant::new(disk()).step_with_torque(&start, &ActuatorCommand::off(), &cfg, 0.0).unwrap().state;
        prop_assert!(out.vx * start.vx >= 0.0 && out.vy * start.vy >= 0.0 && out.psi_dot * start.psi_dot >= 0.0);
        prop_assert!(out.speed() <= v && out.psi_dot.abs() <= w.abs());
    }
}
