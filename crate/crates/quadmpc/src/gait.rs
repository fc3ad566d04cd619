//! Gait phase generation, swing trajectories, stall detection and the
//! one-way bound-to-trot transition machine.
//!
//! Leg order everywhere: LF, RF, LH, RH.

use nalgebra::{Vector2, Vector3};
use std::collections::VecDeque;
use std::f64::consts::PI;

pub const NUM_LEGS: usize = 4;
pub const LEG_NAMES: [&str; NUM_LEGS] = ["LF", "RF", "LH", "RH"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GaitKind {
    Stand,
    Trot,
    Bound,
}

/// Periodic gait: per-leg phase offsets and a shared duty factor.
#[derive(Debug, Clone, Copy)]
pub struct GaitDef {
    pub kind: GaitKind,
    pub cycle_period: f64,
    pub duty_factor: f64,
    /// Phase offsets in [0, 1) for LF, RF, LH, RH.
    pub phase_offsets: [f64; NUM_LEGS],
}

impl GaitDef {
    pub fn stand() -> Self {
        Self {
            kind: GaitKind::Stand,
            cycle_period: 1.0,
            duty_factor: 1.0,
            phase_offsets: [0.0; NUM_LEGS],
        }
    }

    /// Diagonal pairs move together: LF with RH, RF with LH.
    pub fn trot(cycle_period: f64, duty_factor: f64) -> Self {
        Self {
            kind: GaitKind::Trot,
            cycle_period,
            duty_factor,
            phase_offsets: [0.0, 0.5, 0.5, 0.0],
        }
    }

    /// Front pair and hind pair alternate with half-cycle offset.
    pub fn bound(cycle_period: f64, duty_factor: f64) -> Self {
        Self {
            kind: GaitKind::Bound,
            cycle_period,
            duty_factor,
            phase_offsets: [0.0, 0.0, 0.5, 0.5],
        }
    }

    /// Fractional phase of one leg at time t.
    pub fn leg_phase(&self, leg: usize, t: f64) -> f64 {
        let raw = t / self.cycle_period + self.phase_offsets[leg];
        raw.rem_euclid(1.0)
    }

    pub fn swing_duration(&self) -> f64 {
        (1.0 - self.duty_factor) * self.cycle_period
    }
}

/// Stance flag per leg: phase below the duty factor means stance.
pub fn contact_state(gait: &GaitDef, t: f64) -> [bool; NUM_LEGS] {
    std::array::from_fn(|leg| gait.leg_phase(leg, t) < gait.duty_factor)
}

/// Swing progress in [0, 1) for a leg currently in swing.
pub fn swing_phase(gait: &GaitDef, leg: usize, t: f64) -> Option<f64> {
    let phase = gait.leg_phase(leg, t);
    if phase < gait.duty_factor || gait.duty_factor >= 1.0 {
        None
    } else {
        Some((phase - gait.duty_factor) / (1.0 - gait.duty_factor))
    }
}

/// Stance/swing flags over an MPC horizon.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContactSchedule {
    pub flags: Vec<[bool; NUM_LEGS]>,
}

impl ContactSchedule {
    pub fn len(&self) -> usize {
        self.flags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flags.is_empty()
    }

    pub fn all_stance(n: usize) -> Self {
        Self {
            flags: vec![[true; NUM_LEGS]; n],
        }
    }
}

pub fn horizon_schedule(gait: &GaitDef, t: f64, n: usize, dt: f64) -> ContactSchedule {
    ContactSchedule {
        flags: (0..n)
            .map(|k| contact_state(gait, t + k as f64 * dt))
            .collect(),
    }
}

/// Swing trajectory parameters.
#[derive(Debug, Clone, Copy)]
pub struct SwingParams {
    pub step_height: f64,
    pub swing_duration: f64,
}

/// Semi-elliptical swing interpolation between liftoff and touchdown.
///
/// The horizontal component follows a half-cosine profile so touchdown
/// velocity is zero; the vertical lift above the chord is
/// step_height * sin(pi * phase).
pub fn swing_target(
    phase: f64,
    start: &Vector3<f64>,
    end: &Vector3<f64>,
    params: &SwingParams,
) -> Vector3<f64> {
    let phase = phase.clamp(0.0, 1.0);
    let s = 0.5 * (1.0 - (PI * phase).cos());
    let mut p = start + (end - start) * s;
    p.z += params.step_height * (PI * phase).sin();
    p
}

/// Joint-space PD gains for swing-leg tracking.
#[derive(Debug, Clone, Copy)]
pub struct SwingGains {
    pub kp: f64,
    pub kd: f64,
    pub torque_limit: f64,
}

/// PD torques driving a swing leg toward the inverse kinematics solution of
/// `target` (hip frame). Unreachable targets are clamped onto the workspace
/// boundary along the hip-to-target ray and flagged in the result.
pub fn swing_torques(
    q: &crate::kinematics::JointAngles,
    qd: &Vector3<f64>,
    target_hip: &Vector3<f64>,
    cfg: &crate::kinematics::LegConfig,
    gains: &SwingGains,
) -> (Vector3<f64>, bool) {
    use crate::kinematics::inverse_kinematics;
    let (q_des, clamped) = match inverse_kinematics(target_hip, cfg) {
        Ok(q_des) => (q_des, false),
        Err(_) => {
            let center = Vector3::new(0.0, 0.0, cfg.a1);
            let dir = target_hip - center;
            let r = dir.norm().max(1e-9);
            let reach = (cfg.a2 + cfg.a3 - 1e-6).min(r).max((cfg.a2 - cfg.a3).abs() + 1e-6);
            let clamped_target = center + dir * (reach / r);
            (
                inverse_kinematics(&clamped_target, cfg)
                    .expect("clamped target lies in the workspace"),
                true,
            )
        }
    };
    let err = q_des.as_vector() - q.as_vector();
    let tau = gains.kp * err - gains.kd * qd;
    let tau = tau.map(|v| v.clamp(-gains.torque_limit, gains.torque_limit));
    (tau, clamped)
}

/// True when the torso moved less than `threshold` over the trailing
/// `window` seconds.
pub fn stall_detect(
    history: &[(f64, Vector3<f64>)],
    window: f64,
    threshold: f64,
) -> bool {
    let Some(&(t_end, _)) = history.last() else {
        return false;
    };
    let t0 = t_end - window;
    if history.first().map(|(t, _)| *t > t0).unwrap_or(true) {
        return false; // history does not span the window yet
    }
    let recent: Vec<&Vector3<f64>> = history
        .iter()
        .filter(|(t, _)| *t >= t0)
        .map(|(_, p)| p)
        .collect();
    let mut max_disp = 0.0f64;
    for (i, a) in recent.iter().enumerate() {
        for b in &recent[i + 1..] {
            max_disp = max_disp.max((*a - *b).norm());
        }
    }
    max_disp < threshold
}

/// Rolling torso-position buffer sized for stall detection.
#[derive(Debug, Default)]
pub struct MotionHistory {
    buf: VecDeque<(f64, Vector3<f64>)>,
}

impl MotionHistory {
    pub fn push(&mut self, t: f64, p: Vector3<f64>, keep: f64) {
        self.buf.push_back((t, p));
        while let Some(&(t0, _)) = self.buf.front() {
            if t - t0 > keep {
                self.buf.pop_front();
            } else {
                break;
            }
        }
    }

    pub fn samples(&self) -> Vec<(f64, Vector3<f64>)> {
        self.buf.iter().copied().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GaitMode {
    Bound,
    Transitioning,
    Trot,
    Stand,
}

impl GaitMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            GaitMode::Bound => "bound",
            GaitMode::Transitioning => "transitioning",
            GaitMode::Trot => "trot",
            GaitMode::Stand => "stand",
        }
    }
}

/// One-way bound -> transitioning -> trot machine.
///
/// A stall while bounding arms the transition; the current bound stance
/// completes (the swinging pair touches down), then a four-foot dwell holds
/// before trot starts with its phase origin at the dwell end, so the first
/// trot pair lifts off from a fully grounded stance.
#[derive(Debug)]
pub struct TransitionState {
    pub mode: GaitMode,
    pub stall_window: f64,
    pub stall_threshold: f64,
    pub dwell_duration: f64,
    bound: GaitDef,
    trot: GaitDef,
    /// Stall seen, waiting for the swing pair to land.
    pending: bool,
    dwell_start: Option<f64>,
    trot_origin: Option<f64>,
    /// Time the stall detector first fired, for logging.
    pub stall_time: Option<f64>,
    pub transition_complete_time: Option<f64>,
}

impl TransitionState {
    pub fn new(bound: GaitDef, trot: GaitDef, stall_window: f64, stall_threshold: f64, dwell: f64) -> Self {
        Self {
            mode: GaitMode::Bound,
            stall_window,
            stall_threshold,
            dwell_duration: dwell,
            bound,
            trot,
            pending: false,
            dwell_start: None,
            trot_origin: None,
            stall_time: None,
            transition_complete_time: None,
        }
    }

    /// Advance the machine; returns the gait and time origin to schedule
    /// against for the current tick.
    pub fn update(&mut self, stall: bool, t: f64) -> (GaitDef, f64) {
        match self.mode {
            GaitMode::Bound => {
                if stall && !self.pending {
                    self.pending = true;
                    self.stall_time = Some(t);
                }
                if self.pending {
                    // Wait until every leg reports stance or its swing pair
                    // has reached touchdown phase; with duty 0.5 the swing
                    // pair lands exactly when its phase wraps to stance.
                    let contacts = contact_state(&self.bound, t);
                    if contacts.iter().all(|&c| c) || self.swing_pair_landing(t) {
                        self.mode = GaitMode::Transitioning;
                        self.dwell_start = Some(t);
                        // The dwell schedule applies from this very tick so
                        // every Transitioning instant has a four-foot stance.
                        return (GaitDef::stand(), 0.0);
                    }
                }
                (self.bound, 0.0)
            }
            GaitMode::Transitioning => {
                let start = self.dwell_start.expect("dwell start set on entry");
                if t - start >= self.dwell_duration {
                    self.mode = GaitMode::Trot;
                    self.trot_origin = Some(t);
                    self.transition_complete_time = Some(t);
                    (self.trot, t)
                } else {
                    (GaitDef::stand(), 0.0)
                }
            }
            GaitMode::Trot => (self.trot, self.trot_origin.unwrap_or(0.0)),
            GaitMode::Stand => (GaitDef::stand(), 0.0),
        }
    }

    fn swing_pair_landing(&self, t: f64) -> bool {
        // Touchdown is imminent when the swinging legs are at the very end
        // of their swing phase.
        (0..NUM_LEGS).all(|leg| {
            match swing_phase(&self.bound, leg, t) {
                None => true,
                Some(p) => p > 0.97,
            }
        })
    }
}

/// Signed distance from the CoM ground projection to the support region
/// boundary: positive inside the hull, negative outside. Degenerate stances
/// (two feet: segment, one foot: point) always yield non-positive margins.
pub fn support_margin(stance_feet: &[Vector3<f64>], com: &Vector3<f64>) -> f64 {
    let pts: Vec<Vector2<f64>> = stance_feet.iter().map(|p| Vector2::new(p.x, p.y)).collect();
    let c = Vector2::new(com.x, com.y);
    match pts.len() {
        0 => f64::NEG_INFINITY,
        1 => -(c - pts[0]).norm(),
        2 => -dist_point_segment(&c, &pts[0], &pts[1]),
        _ => {
            let hull = convex_hull(&pts);
            if hull.len() < 3 {
                // collinear feet
                let mut best = f64::NEG_INFINITY;
                for i in 0..pts.len() {
                    for j in i + 1..pts.len() {
                        best = best.max(-dist_point_segment(&c, &pts[i], &pts[j]));
                    }
                }
                return best;
            }
            let mut min_edge = f64::INFINITY;
            let mut inside = true;
            for i in 0..hull.len() {
                let a = hull[i];
                let b = hull[(i + 1) % hull.len()];
                let edge = b - a;
                // Hull is counter-clockwise; inside points lie left of edges.
                let cross = edge.x * (c.y - a.y) - edge.y * (c.x - a.x);
                if cross < 0.0 {
                    inside = false;
                }
                min_edge = min_edge.min(dist_point_segment(&c, &a, &b));
            }
            if inside {
                min_edge
            } else {
                -min_edge
            }
        }
    }
}

fn dist_point_segment(p: &Vector2<f64>, a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 < 1e-18 {
        return (p - a).norm();
    }
    let s = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * s)).norm()
}

/// Andrew's monotone chain; returns counter-clockwise hull vertices.
fn convex_hull(pts: &[Vector2<f64>]) -> Vec<Vector2<f64>> {
    let mut sorted = pts.to_vec();
    sorted.sort_by(|a, b| (a.x, a.y).partial_cmp(&(b.x, b.y)).unwrap());
    sorted.dedup_by(|a, b| (*a - *b).norm() < 1e-12);
    if sorted.len() < 3 {
        return sorted;
    }
    let cross = |o: &Vector2<f64>, a: &Vector2<f64>, b: &Vector2<f64>| {
        (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
    };
    let chain = |iter: &mut dyn Iterator<Item = &Vector2<f64>>| {
        let mut half: Vec<Vector2<f64>> = Vec::with_capacity(sorted.len());
        for p in iter {
            while half.len() >= 2 && cross(&half[half.len() - 2], &half[half.len() - 1], p) <= 0.0 {
                half.pop();
            }
            half.push(*p);
        }
        half.pop();
        half
    };
    let mut hull = chain(&mut sorted.iter());
    hull.extend(chain(&mut sorted.iter().rev()));
    hull
}
