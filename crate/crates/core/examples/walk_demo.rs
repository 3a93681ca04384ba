//! Quick look at the closed loop: stand, step in place, take a push.
//!
//!     cargo run --release -p biped-wbc --example walk_demo [stand|walk|push]

use biped_wbc::config::FullConfig;
use biped_wbc::locomotion::TimingTag;
use biped_wbc::sim::{count_unassisted_steps, run_trial, DisturbanceSpec};

fn main() {
    let mode = std::env::args().nth(1).unwrap_or_else(|| "walk".into());
    let mut config = FullConfig::default();

    match mode.as_str() {
        "stand" => {
            config.gait.stepping = false;
            config.sim.warmup = 0.5;
            let spec = DisturbanceSpec::new(10.0, 0.0, TimingTag::T1);
            let mut min_z: f64 = f64::INFINITY;
            let mut max_z: f64 = 0.0;
            let outcome = biped_wbc::sim::run_trial_with(&config, &spec, 1, |tick| {
                min_z = min_z.min(tick.base_height);
                max_z = max_z.max(tick.base_height);
                if (tick.time * 1000.0) as i64 % 500 == 0 {
                    println!(
                        "t={:6.3}  z={:.4}  clearance={:.4}  fL={:5.1}  fR={:5.1}",
                        tick.time,
                        tick.base_height,
                        tick.capsule_distance,
                        tick.contact_force_left[2],
                        tick.contact_force_right[2]
                    );
                }
            });
            println!("stand outcome: {outcome:?}");
            println!("base z range: [{min_z:.4}, {max_z:.4}]");
        }
        "walk" => {
            let steps = count_unassisted_steps(&config, 7, 60);
            println!("unassisted steps before failure (cap 60): {steps}");
        }
        "walkdiag" => {
            use biped_wbc::controller::Controller;
            use biped_wbc::model::{build_model, Kinematics};
            use biped_wbc::sim::SimWorld;
            use nalgebra::Vector3;

            let model = build_model(&config.model).unwrap();
            let state = biped_wbc::biped::nominal_state(&model);
            let mut world = SimWorld::new(model.clone(), state, config.sim.clone()).unwrap();
            let mut ctrl = Controller::new(
                model,
                config.controller.clone(),
                config.gait.clone(),
                config.sim.dt,
            )
            .unwrap();
            for step in 0..20000 {
                let out = ctrl.step(&world.state);
                if world.step(&out.tau, &Vector3::zeros()).is_err() {
                    println!("sim NaN at t={:.3}", world.time);
                    break;
                }
                if step % 100 == 0 {
                    let kin = Kinematics::compute(&world.model, &world.state);
                    let com = world.model.com_position(&kin);
                    let com_v = world.model.com_velocity(&kin);
                    println!(
                        "t={:6.3} {:16} z={:.3} com=({:+.3},{:+.3}) v=({:+.3},{:+.3}) clear={:+.4} res={:?} fb={} step={:?}",
                        world.time,
                        out.debug.phase,
                        world.state.q[2],
                        com.x,
                        com.y,
                        com_v.x,
                        com_v.y,
                        out.debug.capsule_distance,
                        out.debug
                            .task_residuals
                            .iter()
                            .map(|r| (r * 1e3).round() / 1e3)
                            .collect::<Vec<_>>(),
                        out.debug.qp_fallback,
                        out.debug.planned_step.map(|s| [(s[0] * 1e3).round() / 1e3, (s[1] * 1e3).round() / 1e3]),
                    );
                }
                if world.state.q[2] < 0.25 || out.debug.capsule_distance < 0.0 {
                    println!("FAIL at t={:.3}: z={:.3} clear={:.4}", world.time, world.state.q[2], out.debug.capsule_distance);
                    break;
                }
            }
        }
        "push" => {
            for angle_deg in [90.0, 270.0] {
                for mag in [10.0, 30.0, 50.0] {
                    let spec =
                        DisturbanceSpec::new(mag, (angle_deg as f64).to_radians(), TimingTag::T2);
                    let out = run_trial(&config, &spec, 42);
                    println!(
                        "push {mag:5.1} N @ {angle_deg:5.1}°: success={} cause={:?} min_z={:.3} min_clear={:.4}",
                        out.success, out.failure_cause, out.min_base_height, out.min_capsule_clearance
                    );
                }
            }
        }
        other => eprintln!("unknown mode {other}"),
    }
}
