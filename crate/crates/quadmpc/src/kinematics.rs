//! Closed-form kinematics for one 3-DOF leg: hip roll, hip pitch, knee pitch.
//!
//! All quantities live in the leg's canonical hip frame (hip abduction joint
//! at the origin). Left/right mirroring and the mapping between hip frame and
//! torso frame are handled by [`LegConfig::hip_to_torso`] /
//! [`LegConfig::torso_to_hip`]; the core FK/IK equations never see them.
//!
//! In the hip frame, `x` points away from the body along the extended leg at
//! zero joint angles, `theta1` rotates about `z`. The torso mapping sends
//! hip-frame `x` down (`-z` torso), `y` laterally and `z` forward, so
//! `theta1` acts as hip roll and `theta2`/`theta3` as pitch joints.

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum KinematicsError {
    /// Target outside the annulus reachable by the two leg links.
    #[error("unreachable foot target: hip-to-foot distance {0} outside [{1}, {2}]")]
    Unreachable(f64, f64, f64),
}

/// Which side of the body a leg is mounted on. Right legs mirror the
/// hip-frame y axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Left => 1.0,
            Side::Right => -1.0,
        }
    }
}

/// Geometry of one leg. All four legs share (a1, a2, a3); only the mount
/// point and mirror side differ.
#[derive(Debug, Clone, Copy)]
pub struct LegConfig {
    /// Hip offset along the first joint axis, meters.
    pub a1: f64,
    /// Upper leg length, meters.
    pub a2: f64,
    /// Lower leg length, meters.
    pub a3: f64,
    /// Hip origin in the torso frame, meters.
    pub mount_offset: Vector3<f64>,
    /// Mirror flag for the hip-frame y axis.
    pub side: Side,
    /// Joint limits, radians, same order as [`JointAngles`].
    pub joint_lower: [f64; 3],
    pub joint_upper: [f64; 3],
}

impl LegConfig {
    pub fn new(a1: f64, a2: f64, a3: f64, mount_offset: Vector3<f64>, side: Side) -> Self {
        assert!(a1 >= 0.0 && a2 > 0.0 && a3 > 0.0, "invalid link lengths");
        Self {
            a1,
            a2,
            a3,
            mount_offset,
            side,
            joint_lower: [-std::f64::consts::PI; 3],
            joint_upper: [std::f64::consts::PI; 3],
        }
    }

    /// Rotation taking hip-frame vectors into the torso frame, including the
    /// left/right mirror. Columns are the images of the hip axes:
    /// x_hip -> -z_torso (down), y_hip -> +/-y_torso, z_hip -> x_torso.
    fn frame_columns(&self) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>) {
        let s = self.side.sign();
        (
            Vector3::new(0.0, 0.0, -1.0),
            Vector3::new(0.0, s, 0.0),
            Vector3::new(1.0, 0.0, 0.0),
        )
    }

    /// Map a point from this leg's hip frame to the torso frame.
    pub fn hip_to_torso(&self, p_hip: Vector3<f64>) -> Vector3<f64> {
        let (cx, cy, cz) = self.frame_columns();
        self.mount_offset + cx * p_hip.x + cy * p_hip.y + cz * p_hip.z
    }

    /// Map a point from the torso frame into this leg's hip frame.
    pub fn torso_to_hip(&self, p_torso: Vector3<f64>) -> Vector3<f64> {
        let (cx, cy, cz) = self.frame_columns();
        let d = p_torso - self.mount_offset;
        Vector3::new(cx.dot(&d), cy.dot(&d), cz.dot(&d))
    }

    /// Map a free vector (force, velocity) from torso frame to hip frame.
    pub fn torso_vec_to_hip(&self, v: Vector3<f64>) -> Vector3<f64> {
        let (cx, cy, cz) = self.frame_columns();
        Vector3::new(cx.dot(&v), cy.dot(&v), cz.dot(&v))
    }

    /// Map a free vector from hip frame to torso frame.
    pub fn hip_vec_to_torso(&self, v: Vector3<f64>) -> Vector3<f64> {
        let (cx, cy, cz) = self.frame_columns();
        cx * v.x + cy * v.y + cz * v.z
    }

    pub fn within_limits(&self, q: &JointAngles) -> bool {
        let a = [q.theta1, q.theta2, q.theta3];
        (0..3).all(|i| a[i] >= self.joint_lower[i] && a[i] <= self.joint_upper[i])
    }
}

/// Hip roll, hip pitch and knee pitch angles, radians.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct JointAngles {
    pub theta1: f64,
    pub theta2: f64,
    pub theta3: f64,
}

impl JointAngles {
    pub fn new(theta1: f64, theta2: f64, theta3: f64) -> Self {
        Self {
            theta1,
            theta2,
            theta3,
        }
    }

    pub fn as_vector(&self) -> Vector3<f64> {
        Vector3::new(self.theta1, self.theta2, self.theta3)
    }
}

/// Foot position in the hip frame, meters.
pub type FootPosition = Vector3<f64>;

const REACH_TOL: f64 = 1e-9;

/// Foot position from joint angles.
///
/// x = C1 (a3 C23 + a2 C2), y = S1 (a3 C23 + a2 C2), z = a3 S23 + a2 S2 + a1.
pub fn forward_kinematics(q: &JointAngles, cfg: &LegConfig) -> FootPosition {
    let (s1, c1) = q.theta1.sin_cos();
    let (s2, c2) = q.theta2.sin_cos();
    let (s23, c23) = (q.theta2 + q.theta3).sin_cos();
    let radial = cfg.a3 * c23 + cfg.a2 * c2;
    Vector3::new(
        c1 * radial,
        s1 * radial,
        cfg.a3 * s23 + cfg.a2 * s2 + cfg.a1,
    )
}

/// Positions of hip, abduction output, knee and foot, in the hip frame.
pub fn joint_positions(q: &JointAngles, cfg: &LegConfig) -> [Vector3<f64>; 4] {
    let (s1, c1) = q.theta1.sin_cos();
    let (s2, c2) = q.theta2.sin_cos();
    let p0 = Vector3::zeros();
    let p1 = Vector3::new(0.0, 0.0, cfg.a1);
    let p2 = Vector3::new(
        cfg.a2 * c1 * c2,
        cfg.a2 * s1 * c2,
        cfg.a2 * s2 + cfg.a1,
    );
    let p3 = forward_kinematics(q, cfg);
    [p0, p1, p2, p3]
}

/// Joint angles reaching `p`, knee-forward branch (theta3 in [0, pi]).
///
/// Uses r^2 = x^2 + y^2 + (z - a1)^2 with theta1 from the two-argument
/// arctangent; acos arguments within `1e-9` of the [-1, 1] boundary are
/// clamped, anything further out is reported as unreachable.
pub fn inverse_kinematics(p: &FootPosition, cfg: &LegConfig) -> Result<JointAngles, KinematicsError> {
    let planar = (p.x * p.x + p.y * p.y).sqrt();
    let dz = p.z - cfg.a1;
    let r = (planar * planar + dz * dz).sqrt();

    let lo = (cfg.a2 - cfg.a3).abs();
    let hi = cfg.a2 + cfg.a3;
    if r < lo - REACH_TOL || r > hi + REACH_TOL {
        return Err(KinematicsError::Unreachable(r, lo, hi));
    }

    let theta1 = p.y.atan2(p.x);

    // Interior knee angle from the law of cosines, theta3 = pi - gamma.
    let cos_gamma = clamp_acos_arg((cfg.a2 * cfg.a2 + cfg.a3 * cfg.a3 - r * r)
        / (2.0 * cfg.a2 * cfg.a3))?;
    let theta3 = std::f64::consts::PI - cos_gamma.acos();

    // Elevation of the hip-to-foot line minus the angle it makes with the
    // upper link.
    let elevation = dz.atan2(planar);
    let cos_beta = if r > 0.0 {
        clamp_acos_arg((cfg.a2 * cfg.a2 + r * r - cfg.a3 * cfg.a3) / (2.0 * cfg.a2 * r))?
    } else {
        // r = 0 only when a2 = a3 and the leg is fully folded.
        0.0
    };
    let theta2 = elevation - cos_beta.acos();

    Ok(JointAngles::new(theta1, theta2, theta3))
}

fn clamp_acos_arg(v: f64) -> Result<f64, KinematicsError> {
    if v.abs() <= 1.0 {
        Ok(v)
    } else if v.abs() <= 1.0 + REACH_TOL {
        Ok(v.clamp(-1.0, 1.0))
    } else {
        Err(KinematicsError::Unreachable(v, -1.0, 1.0))
    }
}

/// Analytic Jacobian of [`forward_kinematics`]: J[i][j] = d p_i / d theta_j.
pub fn leg_jacobian(q: &JointAngles, cfg: &LegConfig) -> Matrix3<f64> {
    let (s1, c1) = q.theta1.sin_cos();
    let (s2, c2) = q.theta2.sin_cos();
    let (s23, c23) = (q.theta2 + q.theta3).sin_cos();
    let radial = cfg.a3 * c23 + cfg.a2 * c2;
    let d_radial_d2 = -(cfg.a3 * s23 + cfg.a2 * s2);
    let d_radial_d3 = -cfg.a3 * s23;
    let dz_d2 = cfg.a3 * c23 + cfg.a2 * c2;
    let dz_d3 = cfg.a3 * c23;
    Matrix3::new(
        -s1 * radial, c1 * d_radial_d2, c1 * d_radial_d3,
        c1 * radial, s1 * d_radial_d2, s1 * d_radial_d3,
        0.0, dz_d2, dz_d3,
    )
}

/// Joint torques producing the given foot force, hip frame: tau = J^T f.
pub fn forces_to_torques(q: &JointAngles, f: &Vector3<f64>, cfg: &LegConfig) -> Vector3<f64> {
    leg_jacobian(q, cfg).transpose() * f
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn cfg() -> LegConfig {
        LegConfig::new(0.11, 0.35, 0.36, Vector3::zeros(), Side::Left)
    }

    #[test]
    fn fk_zero_angles() {
        let c = cfg();
        let p = forward_kinematics(&JointAngles::default(), &c);
        assert_relative_eq!(p, Vector3::new(c.a2 + c.a3, 0.0, c.a1), epsilon = 1e-12);
    }

    #[test]
    fn fk_hip_roll_quarter_turn() {
        let c = cfg();
        let p = forward_kinematics(&JointAngles::new(FRAC_PI_2, 0.0, 0.0), &c);
        assert_relative_eq!(p, Vector3::new(0.0, c.a2 + c.a3, c.a1), epsilon = 1e-12);
    }

    #[test]
    fn joint_positions_zero_angles() {
        let c = cfg();
        let ps = joint_positions(&JointAngles::default(), &c);
        assert_relative_eq!(ps[0], Vector3::zeros(), epsilon = 1e-12);
        assert_relative_eq!(ps[1], Vector3::new(0.0, 0.0, c.a1), epsilon = 1e-12);
        assert_relative_eq!(ps[2], Vector3::new(c.a2, 0.0, c.a1), epsilon = 1e-12);
        assert_relative_eq!(ps[3], Vector3::new(c.a2 + c.a3, 0.0, c.a1), epsilon = 1e-12);
    }

    #[test]
    fn knee_position_vertical_hip_pitch() {
        let c = cfg();
        let ps = joint_positions(&JointAngles::new(0.0, FRAC_PI_2, 0.0), &c);
        assert_relative_eq!(ps[2], Vector3::new(0.0, 0.0, c.a2 + c.a1), epsilon = 1e-12);
    }

    #[test]
    fn ik_straight_leg() {
        let c = cfg();
        let q = inverse_kinematics(&Vector3::new(c.a2 + c.a3, 0.0, c.a1), &c).unwrap();
        assert_relative_eq!(q.as_vector(), Vector3::zeros(), epsilon = 1e-7);
    }

    #[test]
    fn ik_unreachable() {
        let c = cfg();
        let p = Vector3::new(c.a2 + c.a3 + 0.01, 0.0, c.a1);
        assert!(matches!(
            inverse_kinematics(&p, &c),
            Err(KinematicsError::Unreachable(..))
        ));
    }

    #[test]
    fn jacobian_knee_column_at_zero() {
        let c = cfg();
        let j = leg_jacobian(&JointAngles::default(), &c);
        assert_relative_eq!(j.column(2).into_owned(), Vector3::new(0.0, 0.0, c.a3), epsilon = 1e-12);
        // Straight knee is singular.
        assert_relative_eq!(j.determinant(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn torques_at_zero_config() {
        let c = cfg();
        let q = JointAngles::default();
        assert_relative_eq!(
            forces_to_torques(&q, &Vector3::zeros(), &c),
            Vector3::zeros(),
            epsilon = 1e-15
        );
        let tau = forces_to_torques(&q, &Vector3::new(0.0, 0.0, 10.0), &c);
        assert_relative_eq!(tau.z, c.a3 * 10.0, epsilon = 1e-12);
    }

    #[test]
    fn mirrored_frames_roundtrip() {
        let left = LegConfig::new(0.11, 0.35, 0.36, Vector3::new(0.25, 0.11, 0.0), Side::Left);
        let right = LegConfig::new(0.11, 0.35, 0.36, Vector3::new(0.25, -0.11, 0.0), Side::Right);
        for c in [&left, &right] {
            let p = Vector3::new(0.42, 0.07, -0.03);
            let back = c.hip_to_torso(c.torso_to_hip(p));
            assert_relative_eq!(back, p, epsilon = 1e-12);
        }
        // Mirrored legs with mirrored targets produce the same joint angles.
        let target_l = left.torso_to_hip(Vector3::new(0.27, 0.15, -0.40));
        let target_r = right.torso_to_hip(Vector3::new(0.27, -0.15, -0.40));
        let ql = inverse_kinematics(&target_l, &left).unwrap();
        let qr = inverse_kinematics(&target_r, &right).unwrap();
        assert_relative_eq!(ql.as_vector(), qr.as_vector(), epsilon = 1e-12);
    }

    fn finite_difference_jacobian(q: &JointAngles, c: &LegConfig) -> Matrix3<f64> {
        let h = 1e-6;
        let mut j = Matrix3::zeros();
        for col in 0..3 {
            let mut qp = *q;
            let mut qm = *q;
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
            let d = (forward_kinematics(&qp, c) - forward_kinematics(&qm, c)) / (2.0 * h);
            j.set_column(col, &d);
        }
        j
    }

    proptest! {
        #[test]
        fn fk_ik_roundtrip(
            t1 in -1.5f64..1.5,
            t2 in -1.4f64..1.4,
            t3 in 0.05f64..2.9,
        ) {
            let c = cfg();
            let q = JointAngles::new(t1, t2, t3);
            let p = forward_kinematics(&q, &c);
            let q2 = inverse_kinematics(&p, &c).unwrap();
            let p2 = forward_kinematics(&q2, &c);
            prop_assert!((p - p2).norm() < 1e-9, "fk(ik) error {}", (p - p2).norm());
        }

        #[test]
        fn ik_fk_identity_on_branch(
            t1 in -1.5f64..1.5,
            t2 in -1.2f64..0.3,
            t3 in 0.1f64..2.5,
        ) {
            let c = cfg();
            let q = JointAngles::new(t1, t2, t3);
            let p = forward_kinematics(&q, &c);
            let planar = (p.x * p.x + p.y * p.y).sqrt();
            prop_assume!(planar > 1e-3);
            let q2 = inverse_kinematics(&p, &c).unwrap();
            let elev_check = (p.z - c.a1).atan2(planar);
            prop_assume!(elev_check.abs() < 1.5);
            prop_assert!((q.as_vector() - q2.as_vector()).norm() < 1e-9);
        }

        #[test]
        fn link_lengths_conserved(
            t1 in -3.0f64..3.0,
            t2 in -3.0f64..3.0,
            t3 in -3.0f64..3.0,
        ) {
            let c = cfg();
            let ps = joint_positions(&JointAngles::new(t1, t2, t3), &c);
            prop_assert!(((ps[2] - ps[1]).norm() - c.a2).abs() < 1e-12);
            prop_assert!(((ps[3] - ps[2]).norm() - c.a3).abs() < 1e-12);
        }

        #[test]
        fn jacobian_matches_finite_differences(
            t1 in -3.0f64..3.0,
            t2 in -3.0f64..3.0,
            t3 in -3.0f64..3.0,
        ) {
            let c = cfg();
            let q = JointAngles::new(t1, t2, t3);
            let j = leg_jacobian(&q, &c);
            let jfd = finite_difference_jacobian(&q, &c);
            prop_assert!((j - jfd).norm() < 1e-6);
        }

        #[test]
        fn virtual_work_identity(
            t1 in -2.0f64..2.0,
            t2 in -2.0f64..2.0,
            t3 in -2.0f64..2.0,
            f in prop::array::uniform3(-100.0f64..100.0),
            qd in prop::array::uniform3(-5.0f64..5.0),
        ) {
            let c = cfg();
            let q = JointAngles::new(t1, t2, t3);
            let f = Vector3::from(f);
            let qd = Vector3::from(qd);
            let tau = forces_to_torques(&q, &f, &c);
            let j = leg_jacobian(&q, &c);
            let lhs = tau.dot(&qd);
            let rhs = f.dot(&(j * qd));
            prop_assert!((lhs - rhs).abs() < 1e-9 * (1.0 + lhs.abs()));
        }

        #[test]
        fn torques_linear_in_force(
            f1 in prop::array::uniform3(-50.0f64..50.0),
            f2 in prop::array::uniform3(-50.0f64..50.0),
        ) {
            let c = cfg();
            let q = JointAngles::new(0.3, -0.8, 1.2);
            let a = Vector3::from(f1);
            let b = Vector3::from(f2);
            let sum = forces_to_torques(&q, &(a + b), &c);
            let parts = forces_to_torques(&q, &a, &c) + forces_to_torques(&q, &b, &c);
            prop_assert!((sum - parts).norm() < 1e-9);
        }
    }
}
