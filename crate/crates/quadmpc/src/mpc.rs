//! Horizon force MPC: builds the condensed tracking QP over stance-foot
//! ground reaction forces, solves it with the ADMM solver, and maps the
//! first-step forces into joint torques.
//!
//! Swing feet are eliminated from the decision vector entirely, so their
//! forces are structurally zero rather than constrained to zero.

use crate::config::MpcSettings;
use crate::dynamics::{
    build_continuous_model, discretize, BodyParams, DiscreteModel, DynamicsError, RobotState,
    GRAVITY, STATE_DIM,
};
use crate::gait::{ContactSchedule, SwingGains, NUM_LEGS};
use crate::kinematics::{forces_to_torques, JointAngles, LegConfig};
use crate::qp::{QpOptions, QpProblem, QpSolution, QpSolver, QpStatus, QP_INF};
use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MpcError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Qp(#[from] crate::qp::QpError),
    #[error("QP reported an infeasible force problem")]
    Infeasible,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceMode {
    Constant,
    Sine,
    Ramp,
}

/// Parameters shaping the reference trajectory.
#[derive(Debug, Clone, Copy)]
pub struct ReferenceParams {
    /// Height oscillation amplitude for the sine model, meters.
    pub amplitude: f64,
    /// Oscillation period for the sine model, seconds.
    pub period: f64,
    /// Height gain per meter of forward travel for the ramp model.
    pub slope: f64,
    /// Desired standing CoM height.
    pub target_height: f64,
    /// Desired planar velocity, world frame.
    pub target_velocity: Vector3<f64>,
    /// Anchor pose the trajectory is generated from.
    pub origin: Vector3<f64>,
    pub yaw: f64,
}

impl ReferenceParams {
    pub fn stand(origin: Vector3<f64>) -> Self {
        Self {
            amplitude: 0.0,
            period: 1.0,
            slope: 0.0,
            target_height: origin.z,
            target_velocity: Vector3::zeros(),
            origin,
            yaw: 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReferenceTrajectory {
    pub states: Vec<RobotState>,
}

/// Desired-state sequence over the horizon: the desired planar pose is the
/// origin translated at the target velocity, with height from the selected
/// reference model (constant level, sine superposition or ramp).
pub fn generate_reference(
    mode: ReferenceMode,
    params: &ReferenceParams,
    t0: f64,
    n: usize,
    dt: f64,
) -> ReferenceTrajectory {
    assert!(n >= 1);
    let states = (0..n)
        .map(|k| {
            let t = t0 + (k + 1) as f64 * dt;
            let planar = params.origin + params.target_velocity * t;
            let travel = (planar - params.origin).dot(&Vector3::new(
                params.yaw.cos(),
                params.yaw.sin(),
                0.0,
            ));
            let (dz, vz) = match mode {
                ReferenceMode::Constant => (0.0, 0.0),
                ReferenceMode::Sine => {
                    let w = 2.0 * std::f64::consts::PI / params.period;
                    (
                        params.amplitude * (w * t).sin(),
                        params.amplitude * w * (w * t).cos(),
                    )
                }
                ReferenceMode::Ramp => (
                    params.slope * travel,
                    params.slope * params.target_velocity.norm(),
                ),
            };
            RobotState {
                theta: Vector3::new(0.0, 0.0, params.yaw),
                p: Vector3::new(planar.x, planar.y, params.target_height + dz),
                omega: Vector3::zeros(),
                v: Vector3::new(
                    params.target_velocity.x,
                    params.target_velocity.y,
                    vz,
                ),
                g_aug: GRAVITY,
            }
        })
        .collect();
    ReferenceTrajectory { states }
}

/// Optimized ground reaction forces per foot per horizon step.
#[derive(Debug, Clone)]
pub struct ForcePlan {
    pub forces: Vec<[Vector3<f64>; NUM_LEGS]>,
}

/// Maps QP decision columns back onto (step, leg) slots.
#[derive(Debug, Clone)]
pub struct QpLayout {
    /// Column offset of each stance (step, leg) block, 3 columns each.
    pub slots: Vec<(usize, usize, usize)>,
    pub n_vars: usize,
    pub horizon: usize,
}

impl QpLayout {
    pub fn extract_plan(&self, x: &DVector<f64>) -> ForcePlan {
        let mut forces = vec![[Vector3::zeros(); NUM_LEGS]; self.horizon];
        for &(step, leg, col) in &self.slots {
            forces[step][leg] = Vector3::new(x[col], x[col + 1], x[col + 2]);
        }
        ForcePlan { forces }
    }
}

/// Condense the tracking problem over the horizon into a dense QP on the
/// stacked stance forces.
pub fn build_qp(
    state: &RobotState,
    model_seq: &[DiscreteModel],
    reference: &ReferenceTrajectory,
    schedule: &ContactSchedule,
    cfg: &MpcSettings,
) -> Result<(QpProblem, QpLayout), MpcError> {
    let n_steps = schedule.len();
    if model_seq.len() != n_steps || reference.states.len() != n_steps {
        return Err(MpcError::DimensionMismatch(format!(
            "horizon {} vs models {} vs reference {}",
            n_steps,
            model_seq.len(),
            reference.states.len()
        )));
    }

    // Assign decision columns to stance slots.
    let mut slots = Vec::new();
    let mut n_vars = 0;
    for (step, flags) in schedule.flags.iter().enumerate() {
        for (leg, &stance) in flags.iter().enumerate() {
            if stance {
                slots.push((step, leg, n_vars));
                n_vars += 3;
            }
        }
    }
    let layout = QpLayout {
        slots,
        n_vars,
        horizon: n_steps,
    };

    let q_diag = {
        let mut d = DVector::zeros(STATE_DIM);
        d.fixed_rows_mut::<3>(0).copy_from(&cfg.w_theta);
        d.fixed_rows_mut::<3>(3).copy_from(&cfg.w_pos);
        d.fixed_rows_mut::<3>(6).copy_from(&cfg.w_omega);
        d.fixed_rows_mut::<3>(9).copy_from(&cfg.w_vel);
        d
    };

    let mut h = DMatrix::zeros(n_vars, n_vars);
    let mut g = DVector::zeros(n_vars);
    for i in 0..n_vars {
        h[(i, i)] = cfg.r_force;
    }

    // Rolling condensation: x_k = free_k + sens_k * u.
    let mut free = state.to_vector();
    let mut sens = DMatrix::<f64>::zeros(STATE_DIM, n_vars);
    for step in 0..n_steps {
        let model = &model_seq[step];
        free = &model.ad * free;
        sens = &model.ad * sens;
        for &(s, leg, col) in &layout.slots {
            if s == step {
                let b_block = model.bd.view((0, 3 * leg), (STATE_DIM, 3));
                let mut dst = sens.view_mut((0, col), (STATE_DIM, 3));
                dst += b_block;
            }
        }
        let r = reference.states[step].to_vector();
        let err = &free - &r;
        // H += S' Q S, g += S' Q (free - ref), with diagonal Q.
        let weighted = DMatrix::from_fn(STATE_DIM, n_vars, |i, j| q_diag[i] * sens[(i, j)]);
        h += sens.transpose() * &weighted;
        g += weighted.transpose() * &err;
    }
    // Symmetrize against accumulation noise.
    h = (&h + h.transpose()) * 0.5;

    // Friction pyramid and normal-force bounds per stance slot.
    let m_rows = 5 * layout.slots.len();
    let mut c = DMatrix::zeros(m_rows, n_vars);
    let mut lb = DVector::from_element(m_rows, -QP_INF);
    let mut ub = DVector::from_element(m_rows, QP_INF);
    for (i, &(_, _, col)) in layout.slots.iter().enumerate() {
        let r = 5 * i;
        // fz bounds
        c[(r, col + 2)] = 1.0;
        lb[r] = cfg.fz_min;
        ub[r] = cfg.fz_max;
        // |fx| <= mu fz
        c[(r + 1, col)] = 1.0;
        c[(r + 1, col + 2)] = -cfg.friction_mu;
        ub[r + 1] = 0.0;
        c[(r + 2, col)] = 1.0;
        c[(r + 2, col + 2)] = cfg.friction_mu;
        lb[r + 2] = 0.0;
        // |fy| <= mu fz
        c[(r + 3, col + 1)] = 1.0;
        c[(r + 3, col + 2)] = -cfg.friction_mu;
        ub[r + 3] = 0.0;
        c[(r + 4, col + 1)] = 1.0;
        c[(r + 4, col + 2)] = cfg.friction_mu;
        lb[r + 4] = 0.0;
    }

    Ok((QpProblem { h, g, c, lb, ub }, layout))
}

/// Per-leg command for one control tick.
#[derive(Debug, Clone, Copy)]
pub enum LegCommand {
    /// Leg carries load; torque comes from the force QP.
    Stance,
    /// Leg tracks a world-frame foot target with joint-space PD.
    Swing { target_world: Vector3<f64> },
}

#[derive(Debug, Clone)]
pub struct ControlOutput {
    pub forces: [Vector3<f64>; NUM_LEGS],
    pub torques: [Vector3<f64>; NUM_LEGS],
    pub plan: ForcePlan,
    pub status: QpStatus,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub solve_seconds: f64,
    /// A swing target had to be clamped to the workspace this tick.
    pub swing_clamped: bool,
}

/// One controller instance per robot; owns the warm-started QP solver.
pub struct MpcController {
    pub settings: MpcSettings,
    pub body: BodyParams,
    pub legs: [LegConfig; NUM_LEGS],
    pub swing_gains: SwingGains,
    solver: QpSolver,
}

impl MpcController {
    pub fn new(
        settings: MpcSettings,
        body: BodyParams,
        legs: [LegConfig; NUM_LEGS],
        swing_gains: SwingGains,
    ) -> Self {
        body.assert_valid();
        Self {
            settings,
            body,
            legs,
            swing_gains,
            solver: QpSolver::new(),
        }
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.settings.update_rate
    }

    /// Full rotation from body to world for the current Euler angles.
    pub fn body_rotation(state: &RobotState) -> Matrix3<f64> {
        let (sr, cr) = state.roll().sin_cos();
        let (sp, cp) = state.pitch().sin_cos();
        let (sy, cy) = state.yaw().sin_cos();
        let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, cr, -sr, 0.0, sr, cr);
        let ry = Matrix3::new(cp, 0.0, sp, 0.0, 1.0, 0.0, -sp, 0.0, cp);
        let rz = Matrix3::new(cy, -sy, 0.0, sy, cy, 0.0, 0.0, 0.0, 1.0);
        rz * ry * rx
    }

    /// Build per-step models, solve the horizon QP and map the first-step
    /// stance forces to joint torques. Swing legs get PD tracking torques.
    #[allow(clippy::too_many_arguments)]
    pub fn control_step(
        &mut self,
        state: &RobotState,
        foot_world: &[Vector3<f64>; NUM_LEGS],
        q_all: &[JointAngles; NUM_LEGS],
        qd_all: &[Vector3<f64>; NUM_LEGS],
        commands: &[LegCommand; NUM_LEGS],
        reference: &ReferenceTrajectory,
        schedule: &ContactSchedule,
    ) -> Result<ControlOutput, MpcError> {
        let start = std::time::Instant::now();
        let dt = self.dt();

        // One discrete model per horizon step. Lever arms are anchored at the
        // measured position and carried along the reference's relative motion
        // over the horizon: linearizing about the reference position itself
        // misstates the moment arms whenever the body is displaced from the
        // reference, which cripples attitude recovery exactly when it is
        // needed most.
        let p0_ref = reference
            .states
            .first()
            .map(|r| r.p)
            .unwrap_or(state.p);
        let mut models = Vec::with_capacity(schedule.len());
        for refstate in reference.states.iter() {
            let lin_state = RobotState {
                theta: Vector3::new(0.0, 0.0, refstate.yaw()),
                p: state.p + (refstate.p - p0_ref),
                omega: Vector3::zeros(),
                v: Vector3::zeros(),
                g_aug: GRAVITY,
            };
            let cont = build_continuous_model(&lin_state, foot_world, &self.body)?;
            models.push(discretize(&cont, dt));
        }

        let (prob, layout) = build_qp(state, &models, reference, schedule, &self.settings)?;
        let opts = QpOptions {
            max_iter: self.settings.max_iter,
            tol: self.settings.tol,
            ..QpOptions::default()
        };
        let sol: QpSolution = self.solver.solve(&prob, &opts)?;
        if sol.status == QpStatus::Infeasible {
            return Err(MpcError::Infeasible);
        }
        let plan = layout.extract_plan(&sol.x);

        let rot = Self::body_rotation(state);
        let first = if plan.forces.is_empty() {
            [Vector3::zeros(); NUM_LEGS]
        } else {
            plan.forces[0]
        };

        let mut torques = [Vector3::zeros(); NUM_LEGS];
        let mut forces = [Vector3::zeros(); NUM_LEGS];
        let mut swing_clamped = false;
        for leg in 0..NUM_LEGS {
            match commands[leg] {
                LegCommand::Stance => {
                    let f_world = first[leg];
                    forces[leg] = f_world;
                    // The foot must push the ground with -f to receive f.
                    let f_torso = rot.transpose() * (-f_world);
                    let f_hip = self.legs[leg].torso_vec_to_hip(f_torso);
                    let tau = forces_to_torques(&q_all[leg], &f_hip, &self.legs[leg]);
                    torques[leg] = tau.map(|v| {
                        v.clamp(-self.swing_gains.torque_limit, self.swing_gains.torque_limit)
                    });
                }
                LegCommand::Swing { target_world } => {
                    let target_torso = rot.transpose() * (target_world - state.p);
                    let target_hip = self.legs[leg].torso_to_hip(target_torso);
                    let (tau, clamped) = crate::gait::swing_torques(
                        &q_all[leg],
                        &qd_all[leg],
                        &target_hip,
                        &self.legs[leg],
                        &self.swing_gains,
                    );
                    swing_clamped |= clamped;
                    torques[leg] = tau;
                }
            }
        }

        Ok(ControlOutput {
            forces,
            torques,
            plan,
            status: sol.status,
            kkt_residual: sol.kkt_residual,
            iterations: sol.iterations,
            solve_seconds: start.elapsed().as_secs_f64(),
            swing_clamped,
        })
    }

    pub fn reset_warm_start(&mut self) {
        self.solver.reset_warm_start();
    }
}

/// Check a force plan against the hard constraints it was solved under.
pub fn plan_satisfies_constraints(
    plan: &ForcePlan,
    schedule: &ContactSchedule,
    cfg: &MpcSettings,
    tol: f64,
) -> bool {
    for (step, forces) in plan.forces.iter().enumerate() {
        for leg in 0..NUM_LEGS {
            let f = forces[leg];
            if !schedule.flags[step][leg] {
                if f != Vector3::zeros() {
                    return false;
                }
                continue;
            }
            if f.z < cfg.fz_min - tol || f.z > cfg.fz_max + tol {
                return false;
            }
            if f.x.abs() > cfg.friction_mu * f.z + tol
                || f.y.abs() > cfg.friction_mu * f.z + tol
            {
                return false;
            }
        }
    }
    true
}
