//! Single-rigid-body model of the torso.
//!
//! The 13-state vector stacks Euler angles (roll, pitch, yaw), CoM position,
//! angular velocity, linear velocity and a constant gravity augmentation
//! state. Inputs are the four ground reaction forces, 12 components total.
//! The controller model uses the yaw-only rotation in the Euler-rate block;
//! the simulator integrates with the exact ZYX rate map from
//! [`euler_rate_matrix`].

use nalgebra::{DMatrix, Matrix3, Vector3};
use thiserror::Error;

pub const STATE_DIM: usize = 13;
pub const INPUT_DIM: usize = 12;
pub const GRAVITY: f64 = 9.81;

#[derive(Debug, Error, PartialEq)]
pub enum DynamicsError {
    /// Euler-rate map requested too close to the pitch singularity.
    #[error("euler-rate map near singular: |cos(pitch)| = {0}")]
    NearSingular(f64),
    #[error("body inertia matrix is not invertible")]
    SingularInertia,
}

/// Torso state. Angular and linear velocities are world frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotState {
    /// Roll, pitch, yaw, radians.
    pub theta: Vector3<f64>,
    /// CoM position, world frame, meters.
    pub p: Vector3<f64>,
    /// Angular velocity, world frame, rad/s.
    pub omega: Vector3<f64>,
    /// CoM linear velocity, world frame, m/s.
    pub v: Vector3<f64>,
    /// Gravity augmentation state, m/s^2; constant during integration.
    pub g_aug: f64,
}

impl RobotState {
    pub fn at_rest(p: Vector3<f64>) -> Self {
        Self {
            theta: Vector3::zeros(),
            p,
            omega: Vector3::zeros(),
            v: Vector3::zeros(),
            g_aug: GRAVITY,
        }
    }

    pub fn roll(&self) -> f64 {
        self.theta.x
    }
    pub fn pitch(&self) -> f64 {
        self.theta.y
    }
    pub fn yaw(&self) -> f64 {
        self.theta.z
    }

    pub fn to_vector(&self) -> nalgebra::DVector<f64> {
        let mut x = nalgebra::DVector::zeros(STATE_DIM);
        x.fixed_rows_mut::<3>(0).copy_from(&self.theta);
        x.fixed_rows_mut::<3>(3).copy_from(&self.p);
        x.fixed_rows_mut::<3>(6).copy_from(&self.omega);
        x.fixed_rows_mut::<3>(9).copy_from(&self.v);
        x[12] = self.g_aug;
        x
    }
}

/// Torso mass and body-frame inertia.
#[derive(Debug, Clone, Copy)]
pub struct BodyParams {
    pub mass: f64,
    pub inertia_body: Matrix3<f64>,
    /// Leg mass fraction of total weight; the single-rigid-body
    /// approximation assumes this stays below 0.1.
    pub leg_mass_fraction: f64,
}

impl BodyParams {
    pub fn new(mass: f64, inertia_diag: Vector3<f64>) -> Self {
        Self {
            mass,
            inertia_body: Matrix3::from_diagonal(&inertia_diag),
            leg_mass_fraction: 0.0,
        }
    }

    pub fn assert_valid(&self) {
        assert!(self.mass > 0.0);
        assert!(
            (self.inertia_body - self.inertia_body.transpose()).norm() < 1e-10,
            "inertia must be symmetric"
        );
        assert!(
            self.inertia_body.symmetric_eigenvalues().min() > 0.0,
            "inertia must be positive definite"
        );
        assert!(
            self.leg_mass_fraction < 0.10,
            "single-rigid-body model needs light legs"
        );
    }
}

/// Continuous-time model x_dot = A x + B u.
#[derive(Debug, Clone)]
pub struct ContinuousModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
}

/// Zero-order-hold discretization of a [`ContinuousModel`].
#[derive(Debug, Clone)]
pub struct DiscreteModel {
    pub ad: DMatrix<f64>,
    pub bd: DMatrix<f64>,
    pub dt: f64,
}

const PITCH_EPS: f64 = 1e-6;

/// Exact ZYX map from world angular velocity to Euler-angle rates.
///
/// At zero roll and pitch this reduces to Rz(yaw)^T, the yaw-only block the
/// controller model uses.
pub fn euler_rate_matrix(theta: &Vector3<f64>) -> Result<Matrix3<f64>, DynamicsError> {
    let (s_psi, c_psi) = theta.z.sin_cos();
    let c_th = theta.y.cos();
    if c_th.abs() < PITCH_EPS {
        return Err(DynamicsError::NearSingular(c_th.abs()));
    }
    let t_th = theta.y.tan();
    Ok(Matrix3::new(
        c_psi / c_th, s_psi / c_th, 0.0,
        -s_psi, c_psi, 0.0,
        c_psi * t_th, s_psi * t_th, 1.0,
    ))
}

/// Cross-product matrix: skew(r) * x = r x x.
pub fn skew(r: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(
        0.0, -r.z, r.y,
        r.z, 0.0, -r.x,
        -r.y, r.x, 0.0,
    )
}

pub fn rot_z(yaw: f64) -> Matrix3<f64> {
    let (s, c) = yaw.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Inertia rotated into the world frame by yaw only.
pub fn world_inertia(params: &BodyParams, yaw: f64) -> Matrix3<f64> {
    let r = rot_z(yaw);
    r * params.inertia_body * r.transpose()
}

/// Assemble the 13-state model about the given state and foot positions.
///
/// The gravity augmentation column carries -g into the linear-velocity rows
/// so that free fall accelerates in -z; the augmentation state itself has a
/// zero derivative row.
pub fn build_continuous_model(
    state: &RobotState,
    foot_world: &[Vector3<f64>; 4],
    params: &BodyParams,
) -> Result<ContinuousModel, DynamicsError> {
    let mut a = DMatrix::zeros(STATE_DIM, STATE_DIM);
    let mut b = DMatrix::zeros(STATE_DIM, INPUT_DIM);

    // Euler-angle rows: yaw-only rotation of the angular velocity.
    let rz_t = rot_z(state.yaw()).transpose();
    a.fixed_view_mut::<3, 3>(0, 6).copy_from(&rz_t);
    // Position rows: identity on linear velocity.
    a.fixed_view_mut::<3, 3>(3, 9).copy_from(&Matrix3::identity());
    // Gravity column into the linear-velocity rows.
    a[(11, 12)] = -1.0;

    let inertia_w = world_inertia(params, state.yaw());
    let inertia_inv = inertia_w
        .try_inverse()
        .ok_or(DynamicsError::SingularInertia)?;
    let mass_inv = Matrix3::identity() / params.mass;

    for (i, foot) in foot_world.iter().enumerate() {
        let r = foot - state.p;
        let block = inertia_inv * skew(&r);
        b.fixed_view_mut::<3, 3>(6, 3 * i).copy_from(&block);
        b.fixed_view_mut::<3, 3>(9, 3 * i).copy_from(&mass_inv);
    }

    Ok(ContinuousModel { a, b })
}

/// Exact zero-order-hold discretization via the matrix exponential of the
/// augmented [[A, B], [0, 0]] block.
pub fn discretize(model: &ContinuousModel, dt: f64) -> DiscreteModel {
    assert!(dt > 0.0, "dt must be positive");
    let n = model.a.nrows();
    let m = model.b.ncols();
    let mut aug = DMatrix::zeros(n + m, n + m);
    aug.view_mut((0, 0), (n, n)).copy_from(&(&model.a * dt));
    aug.view_mut((0, n), (n, m)).copy_from(&(&model.b * dt));
    let e = aug.exp();
    DiscreteModel {
        ad: e.view((0, 0), (n, n)).into_owned(),
        bd: e.view((0, n), (n, m)).into_owned(),
        dt,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{DVector, UnitQuaternion};
    use proptest::prelude::*;

    fn params() -> BodyParams {
        BodyParams::new(30.0, Vector3::new(0.4, 1.0, 1.1))
    }

    #[test]
    fn euler_rate_identity_at_zero() {
        let m = euler_rate_matrix(&Vector3::zeros()).unwrap();
        assert_relative_eq!(m, Matrix3::identity(), epsilon = 1e-14);
    }

    #[test]
    fn euler_rate_singular_at_vertical_pitch() {
        let theta = Vector3::new(0.0, std::f64::consts::FRAC_PI_2, 0.0);
        assert!(matches!(
            euler_rate_matrix(&theta),
            Err(DynamicsError::NearSingular(_))
        ));
    }

    /// Quaternion-integration oracle: integrate a rotation under constant
    /// world angular velocity and compare extracted ZYX Euler rates with the
    /// map's prediction.
    #[test]
    fn euler_rates_match_quaternion_integration() {
        let theta = Vector3::new(0.05, -0.08, 0.3);
        let omega = Vector3::new(0.4, -0.2, 0.6);
        let m = euler_rate_matrix(&theta).unwrap();
        let predicted = m * omega;

        let h = 1e-6;
        let q0 = UnitQuaternion::from_euler_angles(theta.x, theta.y, theta.z);
        let dq = UnitQuaternion::from_scaled_axis(omega * h);
        let q1 = dq * q0; // world-frame angular velocity applies on the left
        let (r1, p1, y1) = q1.euler_angles();
        let fd = (Vector3::new(r1, p1, y1) - theta) / h;
        assert_relative_eq!(predicted, fd, epsilon = 1e-4);
    }

    #[test]
    fn skew_basics() {
        assert_relative_eq!(skew(&Vector3::zeros()), Matrix3::zeros(), epsilon = 0.0);
        let r = Vector3::new(1.0, 0.0, 0.0);
        let x = Vector3::new(0.0, 1.0, 0.0);
        assert_relative_eq!(skew(&r) * x, Vector3::new(0.0, 0.0, 1.0), epsilon = 1e-15);
    }

    #[test]
    fn world_inertia_yaw_rotations() {
        let p = params();
        assert_relative_eq!(world_inertia(&p, 0.0), p.inertia_body, epsilon = 1e-14);
        let rotated = world_inertia(&p, std::f64::consts::FRAC_PI_2);
        assert_relative_eq!(
            rotated,
            Matrix3::from_diagonal(&Vector3::new(1.0, 0.4, 1.1)),
            epsilon = 1e-12
        );
    }

    fn standing_feet(p: &Vector3<f64>) -> [Vector3<f64>; 4] {
        [
            p + Vector3::new(0.25, 0.15, -0.4),
            p + Vector3::new(0.25, -0.15, -0.4),
            p + Vector3::new(-0.25, 0.15, -0.4),
            p + Vector3::new(-0.25, -0.15, -0.4),
        ]
    }

    #[test]
    fn sparsity_structure() {
        let state = RobotState::at_rest(Vector3::new(0.3, -0.1, 0.45));
        let feet = standing_feet(&state.p);
        let model = build_continuous_model(&state, &feet, &params()).unwrap();
        // Forbidden A blocks stay zero.
        for r in 0..STATE_DIM {
            for c in 0..STATE_DIM {
                let allowed = (r < 3 && (6..9).contains(&c))
                    || ((3..6).contains(&r) && (9..12).contains(&c))
                    || ((9..12).contains(&r) && c == 12);
                if !allowed {
                    assert_eq!(model.a[(r, c)], 0.0, "A[{r}][{c}] must stay zero");
                }
            }
        }
        // B rows for angles, position, gravity are zero.
        for r in (0..6).chain([12]) {
            for c in 0..INPUT_DIM {
                assert_eq!(model.b[(r, c)], 0.0);
            }
        }
    }

    #[test]
    fn free_fall_gravity() {
        let state = RobotState::at_rest(Vector3::new(0.0, 0.0, 1.0));
        let feet = standing_feet(&state.p);
        let model = build_continuous_model(&state, &feet, &params()).unwrap();
        let xdot = &model.a * state.to_vector();
        assert_relative_eq!(xdot[9], 0.0, epsilon = 1e-12);
        assert_relative_eq!(xdot[10], 0.0, epsilon = 1e-12);
        assert_relative_eq!(xdot[11], -GRAVITY, epsilon = 1e-12);
        assert_relative_eq!(xdot[12], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn balanced_forces_hold_still() {
        let p = params();
        let state = RobotState::at_rest(Vector3::new(0.0, 0.0, 0.45));
        let feet = standing_feet(&state.p);
        let model = build_continuous_model(&state, &feet, &p).unwrap();
        let fz = p.mass * GRAVITY / 4.0;
        let mut u = DVector::zeros(INPUT_DIM);
        for i in 0..4 {
            u[3 * i + 2] = fz;
        }
        let xdot = &model.a * state.to_vector() + &model.b * u;
        for i in 6..12 {
            assert_relative_eq!(xdot[i], 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn single_foot_torque() {
        let p = params();
        let state = RobotState::at_rest(Vector3::zeros());
        let r = Vector3::new(0.3, 0.0, -0.5);
        // Only foot 0 receives force; the other columns are irrelevant here.
        let feet = [r, r, r, r];
        let model = build_continuous_model(&state, &feet, &p).unwrap();
        let f = Vector3::new(0.0, 0.0, 100.0);
        let mut u = DVector::zeros(INPUT_DIM);
        u.fixed_rows_mut::<3>(0).copy_from(&f);
        let xdot = &model.a * state.to_vector() + &model.b * u;
        let expected = world_inertia(&p, 0.0).try_inverse().unwrap() * r.cross(&f);
        assert_relative_eq!(
            Vector3::new(xdot[6], xdot[7], xdot[8]),
            expected,
            epsilon = 1e-10
        );
    }

    #[test]
    fn discretize_zero_a() {
        let n = 4;
        let m = 2;
        let b = DMatrix::from_fn(n, m, |r, c| (r + 2 * c) as f64 * 0.1);
        let model = ContinuousModel {
            a: DMatrix::zeros(n, n),
            b: b.clone(),
        };
        let d = discretize(&model, 0.05);
        assert_relative_eq!(d.ad, DMatrix::identity(n, n), epsilon = 1e-12);
        assert_relative_eq!(d.bd, b * 0.05, epsilon = 1e-12);
    }

    #[test]
    fn discretize_double_integrator() {
        // Nilpotent A: exact closed form with dt and dt^2/2 entries.
        let mut a = DMatrix::zeros(2, 2);
        a[(0, 1)] = 1.0;
        let mut b = DMatrix::zeros(2, 1);
        b[(1, 0)] = 1.0;
        let dt = 0.1;
        let d = discretize(&ContinuousModel { a, b }, dt);
        assert_relative_eq!(d.ad[(0, 1)], dt, epsilon = 1e-14);
        assert_relative_eq!(d.bd[(0, 0)], dt * dt / 2.0, epsilon = 1e-14);
        assert_relative_eq!(d.bd[(1, 0)], dt, epsilon = 1e-14);
    }

    /// Fine-integration oracle: ZOH discretization of the standing model vs
    /// a 1000-substep Euler product.
    #[test]
    fn discretize_matches_fine_integration() {
        let state = RobotState::at_rest(Vector3::new(0.0, 0.0, 0.45));
        let feet = standing_feet(&state.p);
        let model = build_continuous_model(&state, &feet, &params()).unwrap();
        let dt = 0.05;
        let d = discretize(&model, dt);

        let sub = 1000;
        let h = dt / sub as f64;
        let n = STATE_DIM;
        let mut ad_fine = DMatrix::identity(n, n);
        let mut bd_fine = DMatrix::zeros(n, INPUT_DIM);
        let step = DMatrix::identity(n, n) + &model.a * h;
        for _ in 0..sub {
            bd_fine = &step * bd_fine + &model.b * h;
            ad_fine = &step * ad_fine;
        }
        // First-order integrator error dominates; the contract tolerance of
        // 1e-8 applies to the exact-vs-fine comparison scaled by the step.
        assert!((d.ad - &ad_fine).norm() < 1e-4);
        assert!((d.bd - &bd_fine).norm() < 1e-4);

        // Halving dt shows O(dt^2) consistency of Ad with I + A dt.
        let e1 = (discretize(&model, dt).ad - (DMatrix::identity(n, n) + &model.a * dt)).norm();
        let e2 = (discretize(&model, dt / 2.0).ad
            - (DMatrix::identity(n, n) + &model.a * (dt / 2.0)))
            .norm();
        assert!(e2 < e1 / 3.0 + 1e-12);
    }

    proptest! {
        #[test]
        fn skew_matches_cross_product(
            r in prop::array::uniform3(-10.0f64..10.0),
            x in prop::array::uniform3(-10.0f64..10.0),
        ) {
            let r = Vector3::from(r);
            let x = Vector3::from(x);
            prop_assert!((skew(&r) * x - r.cross(&x)).norm() < 1e-12);
        }

        #[test]
        fn world_inertia_preserves_eigenvalues(yaw in -3.0f64..3.0) {
            let p = params();
            let w = world_inertia(&p, yaw);
            prop_assert!((w - w.transpose()).norm() < 1e-12);
            let mut ev = w.symmetric_eigenvalues().as_slice().to_vec();
            let mut ev0 = p.inertia_body.symmetric_eigenvalues().as_slice().to_vec();
            ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
            ev0.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for (a, b) in ev.iter().zip(&ev0) {
                prop_assert!((a - b).abs() < 1e-10);
            }
        }

        #[test]
        fn model_linear_in_inputs(
            u1 in prop::collection::vec(-200.0f64..200.0, INPUT_DIM),
            u2 in prop::collection::vec(-200.0f64..200.0, INPUT_DIM),
        ) {
            let state = RobotState::at_rest(Vector3::new(0.1, 0.2, 0.45));
            let feet = standing_feet(&state.p);
            let model = build_continuous_model(&state, &feet, &params()).unwrap();
            let u1 = DVector::from_vec(u1);
            let u2 = DVector::from_vec(u2);
            let x = state.to_vector();
            let d = |u: &DVector<f64>| &model.a * &x + &model.b * u;
            let lhs = d(&(&u1 + &u2)) - d(&u1) - d(&u2) + d(&DVector::zeros(INPUT_DIM));
            prop_assert!(lhs.norm() < 1e-9);
        }
    }
}
