//! Closed-loop plant: rigid torso with massless torque-driven legs and a
//! spring-damper ground model.
//!
//! Stance feet anchor tangentially at touchdown; the friction spring force
//! is projected into the cone. Joint rates follow a first-order actuator
//! model: the commanded torque minus the torque the ground force induces,
//! over a viscous constant. At equilibrium the ground reaction equals the
//! commanded foot force, which is what lets the force MPC steer the body.

use crate::config::RobotConfig;
use crate::dynamics::{euler_rate_matrix, RobotState};
use crate::gait::NUM_LEGS;
use crate::kinematics::{forward_kinematics, leg_jacobian, JointAngles, LegConfig};
use crate::mpc::MpcController;
use crate::sim::world::{terrain_height, terrain_normal, WorldModel};
use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("numerical blowup at t = {t}: {what}")]
    NumericalBlowup { t: f64, what: String },
}

/// Full simulation state.
#[derive(Debug, Clone)]
pub struct SimState {
    pub body: RobotState,
    pub joint_angles: [JointAngles; NUM_LEGS],
    pub joint_velocities: [Vector3<f64>; NUM_LEGS],
    pub foot_contact: [bool; NUM_LEGS],
    /// Ground reaction force on each foot, world frame, from the last step.
    pub contact_forces: [Vector3<f64>; NUM_LEGS],
    /// Tangential anchor of each contact, world frame.
    pub anchors: [Option<Vector3<f64>>; NUM_LEGS],
    pub t: f64,
}

impl SimState {
    pub fn new(body: RobotState, joint_angles: [JointAngles; NUM_LEGS]) -> Self {
        Self {
            body,
            joint_angles,
            joint_velocities: [Vector3::zeros(); NUM_LEGS],
            foot_contact: [false; NUM_LEGS],
            contact_forces: [Vector3::zeros(); NUM_LEGS],
            anchors: [None; NUM_LEGS],
            t: 0.0,
        }
    }

    /// World position of one foot from the body pose and joint angles.
    pub fn foot_world(&self, leg: usize, legs: &[LegConfig; NUM_LEGS]) -> Vector3<f64> {
        let rot = MpcController::body_rotation(&self.body);
        let p_torso = legs[leg].hip_to_torso(forward_kinematics(&self.joint_angles[leg], &legs[leg]));
        self.body.p + rot * p_torso
    }
}

/// Plant parameters and stepping.
pub struct Plant {
    pub world: WorldModel,
    pub config: RobotConfig,
    pub legs: [LegConfig; NUM_LEGS],
    /// Per-foot normal force clamp, a crude actuator/structure bound that
    /// also keeps step-face impacts integrable.
    pub max_normal_force: f64,
    pub max_joint_rate: f64,
}

impl Plant {
    pub fn new(world: WorldModel, config: RobotConfig) -> Self {
        let legs = config.leg_configs();
        Self {
            world,
            config,
            legs,
            max_normal_force: 4000.0,
            max_joint_rate: 30.0,
        }
    }

    /// Advance the plant by one `dt` under zero-order-held joint torques.
    pub fn step(
        &self,
        sim: &mut SimState,
        torques: &[Vector3<f64>; NUM_LEGS],
        dt: f64,
    ) -> Result<(), SimError> {
        let body = &sim.body;
        let rot = MpcController::body_rotation(body);
        let params = self.config.body_params();
        let w = &self.config.world;

        let mut total_force = Vector3::new(0.0, 0.0, -self.world.gravity * params.mass);
        total_force += self.world.disturbance_at(sim.t);
        let mut total_torque = Vector3::zeros();

        let mut new_contacts = [false; NUM_LEGS];
        let mut new_forces = [Vector3::zeros(); NUM_LEGS];
        let mut joint_rates = [Vector3::zeros(); NUM_LEGS];
        let b_act = self.config.legs.actuator_damping;

        for leg in 0..NUM_LEGS {
            let q = &sim.joint_angles[leg];
            let cfg = &self.legs[leg];
            let p_hip = forward_kinematics(q, cfg);
            let p_torso = cfg.hip_to_torso(p_hip);
            let foot = body.p + rot * p_torso;
            let r_world = foot - body.p;
            let jac = leg_jacobian(q, cfg);
            // World-frame foot Jacobian: joint rates to foot velocity.
            let g_mat = Matrix3::from_columns(&[
                rot * cfg.hip_vec_to_torso(jac.column(0).into()),
                rot * cfg.hip_vec_to_torso(jac.column(1).into()),
                rot * cfg.hip_vec_to_torso(jac.column(2).into()),
            ]);
            // Foot velocity contribution of the body alone.
            let v0 = body.v + body.omega.cross(&r_world);

            // Spring part of the contact force and the damping matrix. The
            // damping couples to the joint rates, which themselves depend on
            // the contact force through the actuator; that loop is solved
            // implicitly below, which is what keeps the massless-leg model
            // stable at practical stiffness values.
            let (pen, normal, wall) = self.penetration(&foot);
            let mut f_spring = Vector3::zeros();
            let mut damping = Matrix3::zeros();
            if pen > 0.0 {
                new_contacts[leg] = true;
                f_spring = normal * (w.contact_stiffness * pen);
                damping += w.contact_damping * normal * normal.transpose();
                if !wall {
                    if sim.anchors[leg].is_none() {
                        sim.anchors[leg] = Some(foot);
                    }
                    let anchor = sim.anchors[leg].unwrap();
                    let mut d_t = foot - anchor;
                    d_t -= normal * d_t.dot(&normal);
                    f_spring -= w.tangential_stiffness * d_t;
                    damping += w.tangential_damping
                        * (Matrix3::identity() - normal * normal.transpose());
                }
            } else {
                sim.anchors[leg] = None;
            }

            // Implicit joint-rate solve:
            //   b qd = tau + G' f_c,   f_c = f_spring - D (v0 + G qd)
            let a_mat = Matrix3::from_diagonal_element(b_act)
                + g_mat.transpose() * damping * g_mat;
            let rhs = torques[leg] + g_mat.transpose() * (f_spring - damping * v0);
            let qd_raw = a_mat
                .try_inverse()
                .map(|inv| inv * rhs)
                .unwrap_or_else(|| rhs / b_act);
            let qd = qd_raw.map(|v| v.clamp(-self.max_joint_rate, self.max_joint_rate));
            joint_rates[leg] = qd;

            let mut f_c = if pen > 0.0 {
                f_spring - damping * (v0 + g_mat * qd)
            } else {
                Vector3::zeros()
            };

            if pen > 0.0 {
                // Clamp to the physical contact set: unilateral bounded
                // normal force, tangential force inside the friction cone.
                let fn_mag = f_c.dot(&normal).clamp(0.0, self.max_normal_force);
                if wall {
                    f_c = normal * fn_mag;
                } else {
                    let mut f_t = f_c - normal * f_c.dot(&normal);
                    let limit = self.world.friction_mu * fn_mag;
                    if f_t.norm() > limit && f_t.norm() > 1e-12 {
                        f_t *= limit / f_t.norm();
                        // Slipping: drag the anchor so the spring alone would
                        // hold the cone-boundary force at this position.
                        let mut a = foot + f_t / w.tangential_stiffness;
                        let d = a - foot;
                        a -= normal * d.dot(&normal);
                        sim.anchors[leg] = Some(a);
                    }
                    f_c = normal * fn_mag + f_t;
                }
            }

            new_forces[leg] = f_c;
            total_force += f_c;
            total_torque += r_world.cross(&f_c);
        }

        // Torso collision with a step riser: the feet alone cannot stop the
        // body once its nose reaches the face, so a unilateral spring-damper
        // on the leading edge keeps the torso from passing through the wall.
        if let crate::sim::world::Terrain::Step { height, position } = self.world.terrain {
            let nose = body.p.x + self.config.legs.mount_x;
            if body.p.z < height && nose > position {
                let pen = nose - position;
                let fx = -(w.contact_stiffness * pen + w.contact_damping * body.v.x);
                total_force.x += fx.min(0.0);
            }
        }

        // Torso dynamics with the exact Euler-rate map and gyroscopic term.
        let inertia_w: Matrix3<f64> = rot * params.inertia_body * rot.transpose();
        let inertia_inv = inertia_w
            .try_inverse()
            .ok_or_else(|| SimError::NumericalBlowup {
                t: sim.t,
                what: "singular world inertia".into(),
            })?;
        let accel = total_force / params.mass;
        let omega_dot = inertia_inv * (total_torque - body.omega.cross(&(inertia_w * body.omega)));

        let euler_map = euler_rate_matrix(&body.theta).map_err(|e| SimError::NumericalBlowup {
            t: sim.t,
            what: format!("attitude left the integrable range: {e}"),
        })?;

        let mut next = *body;
        // Trapezoidal position update keeps ballistic phases energy-exact.
        next.p += body.v * dt + accel * (0.5 * dt * dt);
        next.v += accel * dt;
        next.theta += euler_map * body.omega * dt;
        next.omega += omega_dot * dt;

        if next.p.norm() > 100.0 || next.v.norm() > 50.0 {
            return Err(SimError::NumericalBlowup {
                t: sim.t,
                what: format!("state out of bounds: |p| = {:.2}, |v| = {:.2}", next.p.norm(), next.v.norm()),
            });
        }

        for leg in 0..NUM_LEGS {
            let qd = joint_rates[leg];
            sim.joint_velocities[leg] = qd;
            sim.joint_angles[leg].theta1 += qd.x * dt;
            sim.joint_angles[leg].theta2 += qd.y * dt;
            sim.joint_angles[leg].theta3 += qd.z * dt;
        }

        sim.body = next;
        sim.foot_contact = new_contacts;
        sim.contact_forces = new_forces;
        sim.t += dt;
        Ok(())
    }

    /// Penetration depth (along the resolving normal), normal direction and
    /// whether the contact is against a step riser face.
    fn penetration(&self, foot: &Vector3<f64>) -> (f64, Vector3<f64>, bool) {
        use crate::sim::world::Terrain;
        if let Terrain::Step { height, position } = self.world.terrain {
            if foot.x >= position {
                if foot.z < height {
                    // Inside the block: resolve along the smaller penetration;
                    // near the base the top face wins so the low ground stays
                    // walkable right up to the riser.
                    let pen_top = height - foot.z;
                    let pen_face = foot.x - position;
                    if pen_face < pen_top {
                        return (pen_face, -Vector3::x(), true);
                    }
                }
                return (height - foot.z, Vector3::z(), false);
            }
            return (-foot.z, Vector3::z(), false);
        }
        let h = terrain_height(&self.world.terrain, foot.x, foot.y);
        let n = terrain_normal(&self.world.terrain, foot.x, foot.y);
        (h - foot.z, n, false)
    }
}
