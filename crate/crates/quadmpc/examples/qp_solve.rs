//! Dense ADMM QP solver on a small constrained problem:
//!   minimize 1/2 x'Hx + g'x  subject to lb <= Cx <= ub.

use nalgebra::{DMatrix, DVector};
use quadmpc::qp::{QpOptions, QpProblem, QpSolver};

fn main() {
    // Two-variable QP: pull toward (3, -4) but stay in a box and keep the
    // coordinates summing to at most 1.
    let h = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 2.0]);
    let g = DVector::from_row_slice(&[-6.0, 8.0]);
    let c = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
    let lb = DVector::from_row_slice(&[-2.0, -2.0, -10.0]);
    let ub = DVector::from_row_slice(&[2.0, 2.0, 1.0]);

    let prob = QpProblem { h, g, c, lb, ub };
    let mut solver = QpSolver::new();
    let sol = solver.solve(&prob, &QpOptions::default()).expect("solvable");

    println!("status:       {:?}", sol.status);
    println!("x:            [{:.6}, {:.6}]", sol.x[0], sol.x[1]);
    println!("objective:    {:.6}", sol.objective);
    println!("KKT residual: {:.2e}", sol.kkt_residual);
    println!("iterations:   {}", sol.iterations);

    // The unconstrained minimizer is (3, -4); the box clamps both coordinates.
    println!("expected x:   [2.000000, -2.000000]");
}
