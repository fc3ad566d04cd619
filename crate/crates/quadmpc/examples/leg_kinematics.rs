//! Closed-form leg kinematics: forward/inverse round trip, the analytic
//! Jacobian against finite differences, and the force-to-torque map.

use nalgebra::Vector3;
use quadmpc::kinematics::{
    forces_to_torques, forward_kinematics, inverse_kinematics, leg_jacobian, JointAngles,
    LegConfig, Side,
};

fn main() {
    let leg = LegConfig::new(0.11, 0.35, 0.36, Vector3::new(0.25, 0.11, 0.0), Side::Left);

    // Forward kinematics at a nominal crouch, then invert it.
    let q = JointAngles::new(0.05, 0.6, -1.2);
    let p = forward_kinematics(&q, &leg);
    println!("foot position (hip frame):  [{:.4}, {:.4}, {:.4}] m", p.x, p.y, p.z);

    let q_back = inverse_kinematics(&p, &leg).expect("target is reachable");
    let p_back = forward_kinematics(&q_back, &leg);
    println!("FK(IK(p)) round-trip error: {:.2e} m", (p - p_back).norm());

    // Analytic Jacobian vs a central finite difference.
    let j = leg_jacobian(&q, &leg);
    let h = 1e-6;
    let mut j_fd = nalgebra::Matrix3::zeros();
    for col in 0..3 {
        let mut qp = q;
        let mut qm = q;
        match col {
            0 => {
                qp.theta1 += h;
                qm.theta1 -= h;
            }
            1 => {
                qp.theta2 += h;
                qm.theta2 -= h;
            }
            _ => {
                qp.theta3 += h;
                qm.theta3 -= h;
            }
        }
        let d = (forward_kinematics(&qp, &leg) - forward_kinematics(&qm, &leg)) / (2.0 * h);
        j_fd.set_column(col, &d);
    }
    println!("Jacobian vs finite diff:    {:.2e}", (j - j_fd).norm());

    // Joint torques holding a pure vertical ground reaction force.
    let f = Vector3::new(0.0, 0.0, 80.0);
    let tau = forces_to_torques(&q, &f, &leg);
    println!(
        "torques for 80 N support:   [{:.2}, {:.2}, {:.2}] N*m",
        tau.x, tau.y, tau.z
    );
}
