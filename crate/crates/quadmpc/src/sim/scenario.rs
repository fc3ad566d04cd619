//! Closed-loop scenario runner: wires the MPC controller, gait scheduling
//! and the plant into a deterministic two-timescale loop and produces a CSV
//! record stream plus summary metrics.

use crate::config::{ConfigError, RobotConfig};
use crate::dynamics::RobotState;
use crate::gait::{
    contact_state, horizon_schedule, stall_detect, support_margin, swing_phase, swing_target,
    GaitDef, GaitMode, MotionHistory, SwingGains, SwingParams, TransitionState, NUM_LEGS,
};
use crate::kinematics::{inverse_kinematics, KinematicsError};
use crate::mpc::{
    generate_reference, LegCommand, MpcController, ReferenceMode, ReferenceParams,
};
use crate::sim::log::TickRecord;
use crate::sim::plant::{Plant, SimState};
use crate::sim::world::{terrain_height, DisturbanceEvent, Terrain, WorldModel};
use nalgebra::Vector3;
use std::f64::consts::PI;
use thiserror::Error;

/// Body tilt beyond which a run counts as toppled.
pub const TOPPLE_LIMIT: f64 = PI / 3.0;
/// Standing settle phase before the scenario gait starts, seconds.
const SETTLE_TIME: f64 = 0.5;
/// Recovery band: position radius, tilt bound and required sustain time.
const BAND_POS: f64 = 0.02;
const BAND_TILT: f64 = 2.0 * PI / 180.0;
const BAND_SUSTAIN: f64 = 0.5;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("unknown scenario {0:?}; known scenarios: {}", SCENARIO_NAMES.join(", "))]
    Unknown(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("initial pose unreachable for leg {leg}: {source}")]
    Init {
        leg: usize,
        source: KinematicsError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    /// Stand in place under MPC balance control.
    Stand,
    /// Trot at constant forward velocity on flat ground.
    TrotFlat,
    /// Bound at constant forward velocity on flat ground.
    BoundFlat,
    /// Trot up a constant incline with a ramp height reference.
    Incline,
    /// Trot across sinusoidal terrain.
    UnevenSine,
    /// Stand and reject a lateral force pulse.
    Disturbance,
    /// Fall from a height and catch the landing.
    Drop,
    /// Bound into a wall, stall, and transition to trot.
    Transition,
}

pub const SCENARIO_NAMES: [&str; 8] = [
    "stand",
    "trot_flat",
    "bound_flat",
    "incline",
    "uneven_sine",
    "disturbance",
    "drop",
    "transition",
];

impl ScenarioKind {
    pub fn from_name(name: &str) -> Result<Self, ScenarioError> {
        Ok(match name {
            "stand" => Self::Stand,
            "trot_flat" => Self::TrotFlat,
            "bound_flat" => Self::BoundFlat,
            "incline" => Self::Incline,
            "uneven_sine" => Self::UnevenSine,
            "disturbance" => Self::Disturbance,
            "drop" => Self::Drop,
            "transition" => Self::Transition,
            other => return Err(ScenarioError::Unknown(other.to_string())),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Stand => "stand",
            Self::TrotFlat => "trot_flat",
            Self::BoundFlat => "bound_flat",
            Self::Incline => "incline",
            Self::UnevenSine => "uneven_sine",
            Self::Disturbance => "disturbance",
            Self::Drop => "drop",
            Self::Transition => "transition",
        }
    }
}

/// Runtime knobs on top of the robot configuration.
#[derive(Debug, Clone)]
pub struct ScenarioOptions {
    pub duration: f64,
    /// Lateral pulse magnitude for the disturbance scenario, newtons.
    pub force: f64,
    /// Initial CoM height above nominal stand for the drop scenario, meters.
    pub drop_height: f64,
    /// Slope for the incline scenario, degrees.
    pub incline_deg: f64,
    /// Overrides the scenario's default height reference model.
    pub ref_mode: Option<ReferenceMode>,
    /// Seeds a small deterministic perturbation of the initial pose.
    pub seed: u64,
}

impl Default for ScenarioOptions {
    fn default() -> Self {
        Self {
            duration: 10.0,
            force: 100.0,
            drop_height: 0.8,
            incline_deg: 20.0,
            ref_mode: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Completed,
    Toppled,
    SolverFailed,
}

#[derive(Debug, Clone)]
pub struct Metrics {
    /// Seconds from the triggering event (pulse end or touchdown) until the
    /// body re-entered the recovery band and stayed there.
    pub recovery_time: Option<f64>,
    /// Largest max(|roll|, |pitch|) seen after the settle phase, radians.
    pub max_tilt: f64,
    /// Planar distance between the final and initial CoM positions.
    pub distance_traveled: f64,
    /// Seconds from stall detection to the completed trot handover.
    pub transition_time: Option<f64>,
    pub stall_time: Option<f64>,
    /// Mean |height error| against the reference after settle.
    pub mean_height_error: f64,
    /// Wall-clock QP statistics, milliseconds; always measured even when the
    /// CSV's solve_ms column is suppressed for determinism.
    pub mean_solve_ms: f64,
    pub max_solve_ms: f64,
    pub final_state: RobotState,
    pub ticks: usize,
}

#[derive(Debug)]
pub struct RunResult {
    pub outcome: Outcome,
    pub metrics: Metrics,
    pub records: Vec<TickRecord>,
}

enum Driver {
    Fixed { gait: GaitDef, mode: GaitMode },
    Machine(Box<TransitionState>),
}

/// Splitmix64: tiny deterministic generator for the seed perturbation.
fn splitmix64(state: &mut u64) -> f64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
}

/// Raibert-style touchdown target: under the hip, advanced by half a stance
/// of travel plus a velocity-error correction, projected onto the terrain.
fn touchdown_target(
    leg: usize,
    sim: &SimState,
    cfg: &RobotConfig,
    terrain: &Terrain,
    gait: &GaitDef,
    v_des: &Vector3<f64>,
) -> Vector3<f64> {
    // Yaw-only frame: footholds must not follow roll/pitch, otherwise they
    // chase the body toward the side it is falling to.
    let yaw = sim.body.theta.z;
    let rot = nalgebra::Rotation3::from_axis_angle(&Vector3::z_axis(), yaw);
    let nominal = cfg.nominal_foothold(leg);
    let under_hip = sim.body.p + rot * Vector3::new(nominal.x, nominal.y, 0.0);
    let t_stance = gait.duty_factor * gait.cycle_period;
    let mut corr = sim.body.v * (0.5 * t_stance) + (sim.body.v - v_des) * 0.05;
    corr.z = 0.0;
    let n = corr.norm();
    if n > 0.2 {
        corr *= 0.2 / n;
    }
    let mut target = under_hip + corr;
    target.z = terrain_height(terrain, target.x, target.y);
    // Foothold selection: terrain the leg cannot reach (e.g. the face of a
    // tall obstacle) is not a valid foothold. Walk the target back along the
    // travel direction until it lands on reachable ground.
    let max_rise = sim.body.p.z - 0.12;
    let toward_body = Vector3::new(
        sim.body.p.x - target.x,
        sim.body.p.y - target.y,
        0.0,
    );
    if target.z > max_rise && toward_body.norm() > 1e-9 {
        let back = toward_body / toward_body.norm();
        for k in 1..=20 {
            let cand = target + back * (0.03 * k as f64);
            let h = terrain_height(terrain, cand.x, cand.y);
            if h <= max_rise {
                target = Vector3::new(cand.x, cand.y, h);
                break;
            }
        }
    }
    target
}

pub fn run_scenario(
    kind: ScenarioKind,
    cfg: &RobotConfig,
    opts: &ScenarioOptions,
) -> Result<RunResult, ScenarioError> {
    cfg.validate()?;
    let legs = cfg.leg_configs();
    let incline = opts.incline_deg.to_radians();

    // Terrain, commanded velocity, and the default height reference model.
    let (terrain, v_des_cfg, default_mode): (Terrain, Vector3<f64>, ReferenceMode) = match kind {
        ScenarioKind::Stand | ScenarioKind::Disturbance | ScenarioKind::Drop => {
            (Terrain::Flat, Vector3::zeros(), ReferenceMode::Constant)
        }
        ScenarioKind::TrotFlat => (
            Terrain::Flat,
            Vector3::new(0.5, 0.0, 0.0),
            ReferenceMode::Constant,
        ),
        ScenarioKind::BoundFlat => (
            Terrain::Flat,
            Vector3::new(0.3, 0.0, 0.0),
            ReferenceMode::Constant,
        ),
        ScenarioKind::Incline => (
            Terrain::Incline { angle: incline },
            Vector3::new(0.3, 0.0, 0.0),
            ReferenceMode::Ramp,
        ),
        ScenarioKind::UnevenSine => (
            Terrain::SineUneven {
                amplitude: 0.06,
                wavelength: 6.0,
            },
            Vector3::new(0.3, 0.0, 0.0),
            ReferenceMode::Sine,
        ),
        ScenarioKind::Transition => (
            Terrain::Step {
                height: 1.0,
                position: 0.8,
            },
            Vector3::new(0.25, 0.0, 0.0),
            ReferenceMode::Constant,
        ),
    };
    let ref_mode = opts.ref_mode.unwrap_or(default_mode);
    let (sine_amplitude, sine_period) = match terrain {
        Terrain::SineUneven {
            amplitude,
            wavelength,
        } => {
            let speed = v_des_cfg.norm().max(1e-6);
            (amplitude, wavelength / speed)
        }
        _ => (0.0, 1.0),
    };
    let ramp_slope = incline.tan();

    let mut world = WorldModel {
        terrain,
        friction_mu: cfg.world.friction_mu,
        gravity: cfg.world.gravity,
        disturbances: Vec::new(),
    };
    let pulse_window = if kind == ScenarioKind::Disturbance {
        let ev = DisturbanceEvent {
            t_start: SETTLE_TIME + 2.0,
            duration: 0.2,
            force: Vector3::new(0.0, opts.force, 0.0),
        };
        world.disturbances.push(ev);
        Some((ev.t_start, ev.t_start + ev.duration))
    } else {
        None
    };

    // Initial pose: standing on the terrain, or airborne for the drop.
    let airborne_start = kind == ScenarioKind::Drop;
    let mut body_z = terrain_height(&terrain, 0.0, 0.0) + cfg.legs.stand_height;
    if airborne_start {
        body_z += opts.drop_height;
    }
    let mut body = RobotState::at_rest(Vector3::new(0.0, 0.0, body_z));
    let mut rng = opts.seed;
    if opts.seed != 0 {
        body.p.x += 1e-4 * splitmix64(&mut rng);
        body.p.y += 1e-4 * splitmix64(&mut rng);
        body.theta.x += 1e-4 * splitmix64(&mut rng);
        body.theta.y += 1e-4 * splitmix64(&mut rng);
    }

    let mut joint_angles = [Default::default(); NUM_LEGS];
    for leg in 0..NUM_LEGS {
        let nominal = cfg.nominal_foothold(leg);
        let foot_world = if airborne_start {
            body.p + nominal
        } else {
            let x = body.p.x + nominal.x;
            let y = body.p.y + nominal.y;
            Vector3::new(x, y, terrain_height(&terrain, x, y))
        };
        let target_torso = foot_world - body.p;
        joint_angles[leg] = inverse_kinematics(&legs[leg].torso_to_hip(target_torso), &legs[leg])
            .map_err(|source| ScenarioError::Init { leg, source })?;
    }
    let mut sim = SimState::new(body, joint_angles);

    let plant = Plant::new(world, cfg.clone());
    let swing_gains = SwingGains {
        kp: cfg.legs.swing_kp,
        kd: cfg.legs.swing_kd,
        torque_limit: cfg.legs.torque_limit,
    };
    let mut controller =
        MpcController::new(cfg.mpc.clone(), cfg.body_params(), legs, swing_gains);
    let dt_c = controller.dt();
    let dt_s = cfg.world.dt_sim;
    let substeps = ((dt_c / dt_s).round() as usize).max(1);
    let horizon = cfg.mpc.horizon;

    let trot_def = GaitDef::trot(cfg.trot.cycle_period, cfg.trot.duty_factor);
    let bound_def = GaitDef::bound(cfg.bound.cycle_period, cfg.bound.duty_factor);
    let mut driver = match kind {
        ScenarioKind::Stand | ScenarioKind::Disturbance | ScenarioKind::Drop => Driver::Fixed {
            gait: GaitDef::stand(),
            mode: GaitMode::Stand,
        },
        ScenarioKind::TrotFlat | ScenarioKind::Incline | ScenarioKind::UnevenSine => {
            Driver::Fixed {
                gait: trot_def,
                mode: GaitMode::Trot,
            }
        }
        ScenarioKind::BoundFlat => Driver::Fixed {
            gait: bound_def,
            mode: GaitMode::Bound,
        },
        ScenarioKind::Transition => Driver::Machine(Box::new(TransitionState::new(
            bound_def,
            trot_def,
            cfg.bound.stall_window,
            cfg.bound.stall_threshold,
            cfg.bound.transition_dwell,
        ))),
    };
    let step_height = match kind {
        ScenarioKind::BoundFlat | ScenarioKind::Transition => cfg.bound.step_height,
        _ => cfg.trot.step_height,
    };

    // Reference anchoring: stand-type phases hold a fixed pose, moving
    // phases re-anchor the planar origin to the current position each tick
    // so tracking error cannot wind up.
    let stand_pose = |p: &Vector3<f64>| {
        Vector3::new(
            p.x,
            p.y,
            terrain_height(&plant.world.terrain, p.x, p.y) + cfg.legs.stand_height,
        )
    };
    let initial_anchor = stand_pose(&sim.body.p);
    // Anchor held during stand phases; cleared while the gait is moving.
    let mut hold_anchor: Option<Vector3<f64>> = Some(initial_anchor);
    let mut v_des = v_des_cfg;
    // Set once the transition machine reaches its dwell.
    let mut transition_anchored = false;

    let mut history = MotionHistory::default();
    let stall_keep = cfg.bound.stall_window + 0.5;
    // The bound needs a few cycles to build up speed; displacement over the
    // stall window during that start-up transient is as small as when truly
    // stalled, so detection is armed only once steady bounding is reached.
    let stall_warmup = SETTLE_TIME + cfg.bound.stall_window + 3.0;

    let start_planar = Vector3::new(sim.body.p.x, sim.body.p.y, 0.0);
    let mut airborne = airborne_start;
    let mut was_stance = [true; NUM_LEGS];
    let mut liftoff: [Vector3<f64>; NUM_LEGS] =
        std::array::from_fn(|leg| sim.foot_world(leg, &plant.legs));

    let mut records: Vec<TickRecord> = Vec::new();
    let mut outcome = Outcome::Completed;
    let mut max_tilt = 0.0f64;
    let mut height_err_sum = 0.0;
    let mut height_err_n = 0usize;
    let mut solve_ms_sum = 0.0;
    let mut solve_ms_max = 0.0f64;
    let mut recovery_event: Option<f64> = pulse_window.map(|(_, end)| end);
    let mut recovery_armed = kind != ScenarioKind::Drop; // drop arms at touchdown
    let mut band_since: Option<f64> = None;
    let mut recovery_time: Option<f64> = None;
    let mut stall_seen = false;
    let mut stall_time: Option<f64> = None;
    let mut transition_time: Option<f64> = None;

    let n_ticks = (opts.duration / dt_c).ceil() as usize;
    let mut t = 0.0;
    'ticks: for _ in 0..n_ticks {
        let mut event = String::new();
        let tg = t - SETTLE_TIME;
        let settling = tg < 0.0;

        // Resolve the active gait and its scheduling clock.
        let (gait, origin, mode) = if settling || airborne {
            (GaitDef::stand(), tg, GaitMode::Stand)
        } else {
            match &mut driver {
                Driver::Fixed { gait, mode } => (*gait, 0.0, *mode),
                Driver::Machine(ts) => {
                    history.push(t, sim.body.p, stall_keep);
                    let stall = ts.mode == GaitMode::Bound
                        && t > stall_warmup
                        && stall_detect(
                            &history.samples(),
                            cfg.bound.stall_window,
                            cfg.bound.stall_threshold,
                        );
                    let prev = ts.mode;
                    let (g, o) = ts.update(stall, tg);
                    if !stall_seen {
                        if let Some(ts_stall) = ts.stall_time {
                            stall_seen = true;
                            stall_time = Some(ts_stall + SETTLE_TIME);
                            event = "stall_detected".into();
                        }
                    }
                    if prev != ts.mode {
                        match ts.mode {
                            GaitMode::Transitioning => event = "transition_start".into(),
                            GaitMode::Trot => {
                                event = "transition_complete".into();
                                transition_time = match (stall_time, ts.transition_complete_time)
                                {
                                    (Some(s), Some(c)) => Some(c + SETTLE_TIME - s),
                                    _ => None,
                                };
                            }
                            _ => {}
                        }
                    }
                    if ts.mode == GaitMode::Transitioning && !transition_anchored {
                        transition_anchored = true;
                        hold_anchor = Some(stand_pose(&sim.body.p));
                        v_des = Vector3::zeros();
                    }
                    if ts.mode == GaitMode::Trot && transition_anchored {
                        // Once the trot is established, back away from the
                        // obstacle. A trot holding position against the wall
                        // has no forward progress for foot placement to
                        // stabilize against, so retreating is both the
                        // sensible recovery behavior and the stable one.
                        transition_anchored = false;
                        hold_anchor = None;
                        v_des = Vector3::new(-0.2, 0.0, 0.0);
                    }
                    (g, o, ts.mode)
                }
            }
        };
        let t_sched = tg - origin;
        // Stand-type phases keep their anchor; moving gaits drop it once the
        // settle phase ends so planar tracking is velocity-based.
        let anchored = settling || airborne || mode == GaitMode::Stand || v_des.norm() == 0.0;
        if !anchored && hold_anchor.is_some() && !transition_anchored {
            hold_anchor = None;
        }

        let contacts_sched = if airborne {
            [false; NUM_LEGS]
        } else {
            contact_state(&gait, t_sched)
        };
        let mut schedule = if airborne {
            crate::gait::ContactSchedule {
                flags: vec![[false; NUM_LEGS]; horizon],
            }
        } else {
            horizon_schedule(&gait, t_sched, horizon, dt_c)
        };
        // A standing foot that has left the ground (tipped up by a shove or a
        // landing) cannot deliver force; planning on it anyway cripples the
        // recovery, so drop it from the plan until it recontacts.
        if mode == GaitMode::Stand && !airborne && !settling {
            for flags in schedule.flags.iter_mut() {
                for leg in 0..NUM_LEGS {
                    flags[leg] &= sim.foot_contact[leg];
                }
            }
        }

        // Swing bookkeeping and per-leg commands.
        let feet: [Vector3<f64>; NUM_LEGS] =
            std::array::from_fn(|leg| sim.foot_world(leg, &plant.legs));
        for leg in 0..NUM_LEGS {
            if was_stance[leg] && !contacts_sched[leg] {
                liftoff[leg] = feet[leg];
            }
        }
        was_stance = contacts_sched;
        let rot = MpcController::body_rotation(&sim.body);
        let swing_params = SwingParams {
            step_height,
            swing_duration: gait.swing_duration().max(1e-3),
        };
        let commands: [LegCommand; NUM_LEGS] = std::array::from_fn(|leg| {
            if airborne {
                let target = sim.body.p + rot * cfg.nominal_foothold(leg);
                LegCommand::Swing {
                    target_world: target,
                }
            } else if contacts_sched[leg] {
                LegCommand::Stance
            } else {
                let td = touchdown_target(leg, &sim, cfg, &plant.world.terrain, &gait, &v_des);
                let phase = swing_phase(&gait, leg, t_sched).unwrap_or(0.0);
                let mut target = swing_target(phase, &liftoff[leg], &td, &swing_params);
                // Overdrive the target below the surface late in swing so
                // tracking lag cannot delay touchdown past the schedule; once
                // touchdown is sensed, hold the foot instead of grinding it
                // into the ground.
                if phase > 0.7 {
                    if sim.foot_contact[leg] {
                        target = feet[leg];
                    } else {
                        target.z -= 0.02 * (phase - 0.7) / 0.3;
                    }
                }
                LegCommand::Swing {
                    target_world: target,
                }
            }
        });

        // Reference trajectory for this tick.
        let (params, t0) = if let Some(anchor) = hold_anchor {
            (
                ReferenceParams {
                    amplitude: 0.0,
                    period: 1.0,
                    slope: 0.0,
                    target_height: anchor.z,
                    target_velocity: Vector3::zeros(),
                    origin: anchor,
                    yaw: 0.0,
                },
                0.0,
            )
        } else {
            // Height references (sine/ramp) must follow the terrain under the
            // robot, so the reference clock is the progress-equivalent time:
            // actual distance traveled divided by the commanded speed. Using
            // wall time instead would let the height reference run away from
            // the terrain whenever the robot tracks the speed imperfectly.
            let speed = v_des.norm();
            let dir = v_des / speed;
            let t_prog = (sim.body.p - initial_anchor).dot(&dir) / speed;
            let origin_xy = Vector3::new(
                sim.body.p.x - v_des.x * t_prog,
                sim.body.p.y - v_des.y * t_prog,
                0.0,
            );
            (
                ReferenceParams {
                    amplitude: sine_amplitude,
                    period: sine_period,
                    slope: ramp_slope,
                    target_height: initial_anchor.z,
                    target_velocity: v_des,
                    origin: origin_xy,
                    yaw: 0.0,
                },
                t_prog,
            )
        };
        let active_mode = if hold_anchor.is_some() {
            ReferenceMode::Constant
        } else {
            ref_mode
        };
        let reference = generate_reference(active_mode, &params, t0, horizon, dt_c);

        let out = match controller.control_step(
            &sim.body,
            &feet,
            &sim.joint_angles,
            &sim.joint_velocities,
            &commands,
            &reference,
            &schedule,
        ) {
            Ok(out) => out,
            Err(err) => {
                outcome = Outcome::SolverFailed;
                records.push(TickRecord {
                    t,
                    position: sim.body.p,
                    attitude: sim.body.theta,
                    velocity: sim.body.v,
                    angular_velocity: sim.body.omega,
                    contact: sim.foot_contact,
                    forces: [Vector3::zeros(); NUM_LEGS],
                    gait_mode: mode.as_str().into(),
                    solver_status: "failed".into(),
                    kkt_residual: f64::NAN,
                    solve_ms: 0.0,
                    support_margin: f64::NAN,
                    event: format!("solver_failed: {err}"),
                });
                break 'ticks;
            }
        };

        let solve_ms = out.solve_seconds * 1e3;
        solve_ms_sum += solve_ms;
        solve_ms_max = solve_ms_max.max(solve_ms);

        let stance_feet: Vec<Vector3<f64>> = (0..NUM_LEGS)
            .filter(|&leg| contacts_sched[leg])
            .map(|leg| feet[leg])
            .collect();
        let margin = support_margin(&stance_feet, &sim.body.p);

        if let Some((ps, pe)) = pulse_window {
            if t <= ps && ps < t + dt_c {
                event = "disturbance_start".into();
            } else if t <= pe && pe < t + dt_c {
                event = "disturbance_end".into();
            }
        }

        if !settling && !airborne {
            height_err_sum += (sim.body.p.z - reference.states[0].p.z).abs();
            height_err_n += 1;
        }

        records.push(TickRecord {
            t,
            position: sim.body.p,
            attitude: sim.body.theta,
            velocity: sim.body.v,
            angular_velocity: sim.body.omega,
            contact: sim.foot_contact,
            forces: out.forces,
            gait_mode: mode.as_str().into(),
            solver_status: match out.status {
                crate::qp::QpStatus::Optimal => "optimal".into(),
                crate::qp::QpStatus::MaxIter => "max_iter".into(),
                crate::qp::QpStatus::Infeasible => "infeasible".into(),
            },
            kkt_residual: out.kkt_residual,
            solve_ms: if cfg.world.log_timing { solve_ms } else { 0.0 },
            support_margin: margin,
            event,
        });

        // Physics substeps under zero-order-held torques.
        for _ in 0..substeps {
            if let Err(err) = plant.step(&mut sim, &out.torques, dt_s) {
                outcome = Outcome::Toppled;
                if let Some(last) = records.last_mut() {
                    last.event = format!("numerical_blowup: {err}");
                }
                break 'ticks;
            }
        }
        t += dt_c;

        if airborne && sim.foot_contact.iter().any(|&c| c) {
            airborne = false;
            hold_anchor = Some(stand_pose(&sim.body.p));
            recovery_event = Some(t);
            recovery_armed = true;
            if let Some(last) = records.last_mut() {
                if last.event.is_empty() {
                    last.event = "touchdown".into();
                }
            }
        }

        let tilt = sim.body.roll().abs().max(sim.body.pitch().abs());
        if !airborne && t > SETTLE_TIME {
            max_tilt = max_tilt.max(tilt);
        }
        if tilt > TOPPLE_LIMIT {
            outcome = Outcome::Toppled;
            if let Some(last) = records.last_mut() {
                if last.event.is_empty() {
                    last.event = "toppled".into();
                }
            }
            break 'ticks;
        }

        // Recovery-band tracking against the held stand pose.
        if recovery_armed {
            if let (Some(t_event), Some(anchor)) = (recovery_event, hold_anchor) {
                if t > t_event && recovery_time.is_none() {
                    let in_band = (sim.body.p - anchor).norm() < BAND_POS && tilt < BAND_TILT;
                    if in_band {
                        let since = *band_since.get_or_insert(t);
                        if t - since >= BAND_SUSTAIN {
                            recovery_time = Some(since - t_event);
                        }
                    } else {
                        band_since = None;
                    }
                }
            }
        }
    }

    let end_planar = Vector3::new(sim.body.p.x, sim.body.p.y, 0.0);
    let ticks = records.len();
    let metrics = Metrics {
        recovery_time,
        max_tilt,
        distance_traveled: (end_planar - start_planar).norm(),
        transition_time,
        stall_time,
        mean_height_error: if height_err_n > 0 {
            height_err_sum / height_err_n as f64
        } else {
            0.0
        },
        mean_solve_ms: if ticks > 0 {
            solve_ms_sum / ticks as f64
        } else {
            0.0
        },
        max_solve_ms: solve_ms_max,
        final_state: sim.body,
        ticks,
    };
    Ok(RunResult {
        outcome,
        metrics,
        records,
    })
}
