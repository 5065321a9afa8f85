use amrace_core::mapping::steady_state_for;
use amrace_core::vehicle::{
    check_friction, rk4_step, traction_force, CheckHorizon, ControlInput, VehicleParams, VehicleState, DEFAULT_DT,
};

const KMH_100: f64 = 100.0 / 3.6;

/// Distance covered at full brake from `v0` until the car stops.
fn braking_distance(v0: f64, p: &VehicleParams) -> f64 {
    let mut s = VehicleState { vx: v0, ..Default::default() };
    let brake = ControlInput::clamped(-1.0, 0.0);
    for _ in 0..100_000 {
        if s.vx <= 0.0 {
            break;
        }
        s = rk4_step(&s, &brake, DEFAULT_DT, p).unwrap();
    }
    assert_eq!(s.vx, 0.0);
    s.x
}

/// Time from rest to `v` at full throttle, interpolated within the crossing step.
fn acceleration_time(v: f64, p: &VehicleParams) -> f64 {
    let mut s = VehicleState::default();
    let throttle = ControlInput::clamped(1.0, 0.0);
    for k in 0..100_000 {
        let next = rk4_step(&s, &throttle, DEFAULT_DT, p).unwrap();
        if next.vx >= v {
            return (k as f64 + (v - s.vx) / (next.vx - s.vx)) * DEFAULT_DT;
        }
        s = next;
    }
    panic!("never reached {v} m/s");
}

#[test]
fn braking_distance_from_100_kmh() {
    let d = braking_distance(KMH_100, &VehicleParams::default());
    assert!((d - 42.5).abs() <= 0.05 * 42.5, "{d}");
}

#[test]
fn acceleration_time_golden() {
    let t = acceleration_time(KMH_100, &VehicleParams::default());
    assert!((t - 11.235419).abs() < 1e-5, "{t}");
}

#[test]
fn acceleration_time_lower_bound() {
    // constant traction up to the base speed, constant power above it, no resistance
    let p = VehicleParams::default();
    let f = traction_force(0.0, 1.0, &p);
    let vb = p.v_base();
    let bound = vb * p.mass / f + p.mass * (KMH_100 * KMH_100 - vb * vb) / (2.0 * p.max_power);
    assert!(acceleration_time(KMH_100, &p) > bound);
}

#[test]
fn traction_crossover_is_continuous() {
    let p = VehicleParams::default();
    let vb = p.v_base();
    assert!((vb - 25.0).abs() < 1e-12);
    assert_eq!(traction_force(10.0, 1.0, &p), 5000.0);
    let below = traction_force(vb - 1e-9, 1.0, &p);
    let above = traction_force(vb + 1e-9, 1.0, &p);
    assert!((below - above).abs() < 1e-6);
    assert!((traction_force(30.0, 1.0, &p) - p.max_power / 30.0).abs() < 1e-9);
}

#[test]
fn rk4_is_fourth_order() {
    let p = VehicleParams::default();
    let input = ControlInput::clamped(0.3, 0.2);
    let start = steady_state_for(15.0, 0.05, &p);
    let end = |dt: f64| {
        let n = (1.0 / dt).round() as usize;
        let mut s = start;
        for _ in 0..n {
            s = rk4_step(&s, &input, dt, &p).unwrap();
        }
        s
    };
    let reference = end(0.000625);
    let err = |dt: f64| {
        let s = end(dt);
        (s.x - reference.x).hypot(s.y - reference.y)
    };
    let (e1, e2, e3) = (err(0.02), err(0.01), err(0.005));
    for ratio in [e1 / e2, e2 / e3] {
        assert!((12.0..=20.0).contains(&ratio), "{e1} {e2} {e3}");
    }
}

#[test]
fn cornering_classification_example() {
    let p = VehicleParams::default();
    let s = steady_state_for(15.4, 7.9f64.to_radians(), &p);
    let h = CheckHorizon::default();
    assert!(!check_friction(&s, &ControlInput::clamped(-0.75, 0.25), &h, &p));
    assert!(check_friction(&s, &ControlInput::clamped(0.75, -0.75), &h, &p));
}
