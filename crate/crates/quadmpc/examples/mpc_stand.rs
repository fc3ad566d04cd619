//! One force-MPC step: condense the horizon QP for a disturbed standing pose
//! and inspect the ground-reaction-force plan it returns.

use nalgebra::Vector3;
use quadmpc::config::RobotConfig;
use quadmpc::dynamics::{build_continuous_model, discretize, RobotState};
use quadmpc::gait::ContactSchedule;
use quadmpc::mpc::{build_qp, ReferenceTrajectory};
use quadmpc::qp::{QpOptions, QpSolver};

fn main() {
    let cfg = RobotConfig::default();
    let params = cfg.body_params();

    // Standing pose pushed sideways and rolled; the plan must both support
    // the weight and produce a restoring roll moment.
    let mut state = RobotState::at_rest(Vector3::new(0.0, 0.06, 0.41));
    state.theta.x = -0.15;
    let feet = [
        Vector3::new(0.25, 0.16, 0.0),
        Vector3::new(0.25, -0.16, 0.0),
        Vector3::new(-0.25, 0.16, 0.0),
        Vector3::new(-0.25, -0.16, 0.0),
    ];

    let dt = 1.0 / cfg.mpc.update_rate;
    let horizon = cfg.mpc.horizon;
    let cont = build_continuous_model(&state, &feet, &params).expect("well-posed state");
    let models = vec![discretize(&cont, dt); horizon];

    let reference = ReferenceTrajectory {
        states: (0..horizon)
            .map(|_| RobotState::at_rest(Vector3::new(0.0, 0.0, 0.42)))
            .collect(),
    };
    let schedule = ContactSchedule::all_stance(horizon);

    let (prob, layout) =
        build_qp(&state, &models, &reference, &schedule, &cfg.mpc).expect("consistent sizes");
    println!("QP size: {} variables, {} constraint rows", prob.h.nrows(), prob.c.nrows());

    let mut solver = QpSolver::new();
    let sol = solver.solve(&prob, &QpOptions::default()).expect("solvable");
    println!("status {:?}, KKT residual {:.2e}", sol.status, sol.kkt_residual);

    let plan = layout.extract_plan(&sol.x);
    let first = plan.forces[0];
    let mut total = Vector3::zeros();
    let mut torque = Vector3::zeros();
    for (leg, f) in first.iter().enumerate() {
        println!(
            "leg {leg}: f = [{:7.2}, {:7.2}, {:7.2}] N",
            f.x, f.y, f.z
        );
        total += f;
        torque += (feet[leg] - state.p).cross(f);
    }
    println!(
        "total fz {:.1} N vs weight {:.1} N; roll moment {:+.1} N*m",
        total.z,
        params.mass * cfg.world.gravity,
        torque.x
    );
}
