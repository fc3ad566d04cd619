//! Single-rigid-body model: 13-state continuous dynamics around a stance,
//! zero-order-hold discretization, and a ballistic sanity check.

use nalgebra::Vector3;
use quadmpc::config::RobotConfig;
use quadmpc::dynamics::{build_continuous_model, discretize, RobotState};

fn main() {
    let cfg = RobotConfig::default();
    let params = cfg.body_params();

    let state = RobotState::at_rest(Vector3::new(0.0, 0.0, 0.42));
    let feet = [
        Vector3::new(0.25, 0.16, 0.0),
        Vector3::new(0.25, -0.16, 0.0),
        Vector3::new(-0.25, 0.16, 0.0),
        Vector3::new(-0.25, -0.16, 0.0),
    ];

    let model = build_continuous_model(&state, &feet, &params).expect("well-posed state");
    let nz = model.a.iter().filter(|v| v.abs() > 0.0).count();
    println!(
        "A is {}x{} with {} structural non-zeros (Euler map, velocity integration, gravity)",
        model.a.nrows(),
        model.a.ncols(),
        nz
    );

    // Free fall: no contact forces, so the acceleration must be (0, 0, -g).
    let xdot = &model.a * state.to_vector();
    println!(
        "free-fall acceleration:     [{:.3}, {:.3}, {:.3}] m/s^2",
        xdot[9], xdot[10], xdot[11]
    );

    // Discretize and propagate one control period of pure falling.
    let dt = 0.05;
    let disc = discretize(&model, dt);
    let next = &disc.ad * state.to_vector();
    println!(
        "after {dt} s of free fall:  dz = {:+.5} m, vz = {:+.4} m/s",
        next[5] - state.p.z,
        next[11]
    );

    // A vertical force on each foot equal to a quarter of the weight must
    // cancel gravity exactly in the discrete model as well.
    let mut u = nalgebra::DVector::zeros(12);
    let fz = params.mass * cfg.world.gravity / 4.0;
    for leg in 0..4 {
        u[3 * leg + 2] = fz;
    }
    let held = &disc.ad * state.to_vector() + &disc.bd * u;
    println!(
        "with weight support:        dz = {:+.2e} m, vz = {:+.2e} m/s",
        held[5] - state.p.z,
        held[11]
    );
}
