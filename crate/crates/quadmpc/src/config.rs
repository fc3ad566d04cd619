//! Runtime configuration: robot geometry, gait timing, MPC weights and
//! world parameters, loadable from a sectioned key/value file.
//!
//! File format: `[section]` headers followed by `key = value` lines, `#`
//! comments. Unknown sections or keys are rejected so typos fail loudly.
//! Defaults approximate a mid-size quadruped; none of them are measured
//! values of a particular robot.

use nalgebra::Vector3;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unknown config key [{section}] {key}")]
    UnknownKey { section: String, key: String },
    #[error("unknown config section [{0}]")]
    UnknownSection(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone)]
pub struct BodyConfig {
    pub mass: f64,
    pub inertia: Vector3<f64>,
    pub leg_mass_fraction: f64,
}

#[derive(Debug, Clone)]
pub struct LegsConfig {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    /// Hip mount half-spacing, meters: hips sit at (+-mount_x, +-mount_y, 0).
    pub mount_x: f64,
    pub mount_y: f64,
    /// Nominal standing CoM height above the feet.
    pub stand_height: f64,
    /// Extra lateral stance spread beyond the hip, meters.
    pub stance_spread: f64,
    pub swing_kp: f64,
    pub swing_kd: f64,
    pub torque_limit: f64,
    /// Viscous joint constant of the first-order actuator model, N*m*s/rad.
    pub actuator_damping: f64,
}

#[derive(Debug, Clone)]
pub struct GaitConfig {
    pub cycle_period: f64,
    pub duty_factor: f64,
    pub step_height: f64,
    /// Stall detection (used by the bound gait only).
    pub stall_window: f64,
    pub stall_threshold: f64,
    pub transition_dwell: f64,
}

#[derive(Debug, Clone)]
pub struct MpcSettings {
    pub horizon: usize,
    pub update_rate: f64,
    pub friction_mu: f64,
    pub fz_min: f64,
    pub fz_max: f64,
    /// Diagonal state weights: angles, position, angular vel, linear vel.
    pub w_theta: Vector3<f64>,
    pub w_pos: Vector3<f64>,
    pub w_omega: Vector3<f64>,
    pub w_vel: Vector3<f64>,
    pub r_force: f64,
    pub max_iter: usize,
    pub tol: f64,
}

#[derive(Debug, Clone)]
pub struct WorldConfig {
    pub friction_mu: f64,
    pub gravity: f64,
    pub contact_stiffness: f64,
    pub contact_damping: f64,
    pub tangential_stiffness: f64,
    pub tangential_damping: f64,
    pub dt_sim: f64,
    /// When false (default) the CSV's solve_ms column logs 0 so identical
    /// runs stay byte-identical; wall time still lands in the metrics.
    pub log_timing: bool,
}

#[derive(Debug, Clone)]
pub struct RobotConfig {
    pub body: BodyConfig,
    pub legs: LegsConfig,
    pub trot: GaitConfig,
    pub bound: GaitConfig,
    pub mpc: MpcSettings,
    pub world: WorldConfig,
}

impl Default for RobotConfig {
    fn default() -> Self {
        Self {
            body: BodyConfig {
                mass: 30.0,
                inertia: Vector3::new(0.4, 1.0, 1.1),
                leg_mass_fraction: 0.08,
            },
            legs: LegsConfig {
                a1: 0.11,
                a2: 0.35,
                a3: 0.36,
                mount_x: 0.25,
                mount_y: 0.11,
                stand_height: 0.42,
                stance_spread: 0.05,
                swing_kp: 600.0,
                swing_kd: 3.0,
                torque_limit: 120.0,
                actuator_damping: 25.0,
            },
            trot: GaitConfig {
                cycle_period: 0.6,
                duty_factor: 0.5,
                step_height: 0.08,
                stall_window: 1.0,
                stall_threshold: 0.03,
                transition_dwell: 0.2,
            },
            bound: GaitConfig {
                cycle_period: 0.4,
                duty_factor: 0.7,
                step_height: 0.08,
                stall_window: 1.5,
                stall_threshold: 0.15,
                transition_dwell: 0.2,
            },
            mpc: MpcSettings {
                horizon: 10,
                update_rate: 20.0,
                friction_mu: 0.6,
                fz_min: 0.0,
                fz_max: 400.0,
                w_theta: Vector3::new(400.0, 400.0, 100.0),
                w_pos: Vector3::new(50.0, 50.0, 800.0),
                w_omega: Vector3::new(10.0, 10.0, 10.0),
                w_vel: Vector3::new(20.0, 20.0, 40.0),
                r_force: 1e-5,
                max_iter: 400,
                tol: 1e-6,
            },
            world: WorldConfig {
                friction_mu: 0.6,
                gravity: crate::dynamics::GRAVITY,
                contact_stiffness: 3.0e4,
                contact_damping: 1.0e3,
                tangential_stiffness: 1.0e4,
                tangential_damping: 300.0,
                dt_sim: 1.0e-3,
                log_timing: false,
            },
        }
    }
}

impl RobotConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        let mut section = String::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or(ConfigError::Parse {
                    line: idx + 1,
                    msg: "unterminated section header".into(),
                })?;
                section = name.trim().to_string();
                if !matches!(
                    section.as_str(),
                    "body" | "legs" | "gait.trot" | "gait.bound" | "mpc" | "world"
                ) {
                    return Err(ConfigError::UnknownSection(section));
                }
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::Parse {
                line: idx + 1,
                msg: format!("expected key = value, got {line:?}"),
            })?;
            let key = key.trim();
            let value = value.trim();
            cfg.apply(&section, key, value).map_err(|e| match e {
                ConfigError::Parse { msg, .. } => ConfigError::Parse { line: idx + 1, msg },
                other => other,
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, section: &str, key: &str, value: &str) -> Result<(), ConfigError> {
        let f = || -> Result<f64, ConfigError> {
            value.parse().map_err(|_| ConfigError::Parse {
                line: 0,
                msg: format!("{key}: expected a number, got {value:?}"),
            })
        };
        let u = || -> Result<usize, ConfigError> {
            value.parse().map_err(|_| ConfigError::Parse {
                line: 0,
                msg: format!("{key}: expected an integer, got {value:?}"),
            })
        };
        let b = || -> Result<bool, ConfigError> {
            value.parse().map_err(|_| ConfigError::Parse {
                line: 0,
                msg: format!("{key}: expected true/false, got {value:?}"),
            })
        };
        let unknown = || ConfigError::UnknownKey {
            section: section.to_string(),
            key: key.to_string(),
        };
        match section {
            "body" => match key {
                "mass" => self.body.mass = f()?,
                "inertia_xx" => self.body.inertia.x = f()?,
                "inertia_yy" => self.body.inertia.y = f()?,
                "inertia_zz" => self.body.inertia.z = f()?,
                "leg_mass_fraction" => self.body.leg_mass_fraction = f()?,
                _ => return Err(unknown()),
            },
            "legs" => match key {
                "a1" => self.legs.a1 = f()?,
                "a2" => self.legs.a2 = f()?,
                "a3" => self.legs.a3 = f()?,
                "mount_x" => self.legs.mount_x = f()?,
                "mount_y" => self.legs.mount_y = f()?,
                "stand_height" => self.legs.stand_height = f()?,
                "stance_spread" => self.legs.stance_spread = f()?,
                "swing_kp" => self.legs.swing_kp = f()?,
                "swing_kd" => self.legs.swing_kd = f()?,
                "torque_limit" => self.legs.torque_limit = f()?,
                "actuator_damping" => self.legs.actuator_damping = f()?,
                _ => return Err(unknown()),
            },
            "gait.trot" | "gait.bound" => {
                let g = if section == "gait.trot" {
                    &mut self.trot
                } else {
                    &mut self.bound
                };
                match key {
                    "cycle_period" => g.cycle_period = f()?,
                    "duty_factor" => g.duty_factor = f()?,
                    "step_height" => g.step_height = f()?,
                    "stall_window" => g.stall_window = f()?,
                    "stall_threshold" => g.stall_threshold = f()?,
                    "transition_dwell" => g.transition_dwell = f()?,
                    _ => return Err(unknown()),
                }
            }
            "mpc" => match key {
                "horizon" => self.mpc.horizon = u()?,
                "update_rate" => self.mpc.update_rate = f()?,
                "friction_mu" => self.mpc.friction_mu = f()?,
                "fz_min" => self.mpc.fz_min = f()?,
                "fz_max" => self.mpc.fz_max = f()?,
                "w_roll" => self.mpc.w_theta.x = f()?,
                "w_pitch" => self.mpc.w_theta.y = f()?,
                "w_yaw" => self.mpc.w_theta.z = f()?,
                "w_x" => self.mpc.w_pos.x = f()?,
                "w_y" => self.mpc.w_pos.y = f()?,
                "w_z" => self.mpc.w_pos.z = f()?,
                "w_wx" => self.mpc.w_omega.x = f()?,
                "w_wy" => self.mpc.w_omega.y = f()?,
                "w_wz" => self.mpc.w_omega.z = f()?,
                "w_vx" => self.mpc.w_vel.x = f()?,
                "w_vy" => self.mpc.w_vel.y = f()?,
                "w_vz" => self.mpc.w_vel.z = f()?,
                "r_force" => self.mpc.r_force = f()?,
                "max_iter" => self.mpc.max_iter = u()?,
                "tol" => self.mpc.tol = f()?,
                _ => return Err(unknown()),
            },
            "world" => match key {
                "friction_mu" => self.world.friction_mu = f()?,
                "gravity" => self.world.gravity = f()?,
                "contact_stiffness" => self.world.contact_stiffness = f()?,
                "contact_damping" => self.world.contact_damping = f()?,
                "tangential_stiffness" => self.world.tangential_stiffness = f()?,
                "tangential_damping" => self.world.tangential_damping = f()?,
                "dt_sim" => self.world.dt_sim = f()?,
                "log_timing" => self.world.log_timing = b()?,
                _ => return Err(unknown()),
            },
            "" => {
                return Err(ConfigError::Parse {
                    line: 0,
                    msg: format!("key {key:?} appears before any [section] header"),
                })
            }
            other => return Err(ConfigError::UnknownSection(other.to_string())),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |msg: String| Err(ConfigError::Invalid(msg));
        if self.body.mass <= 0.0 {
            return err("body mass must be positive".into());
        }
        if self.body.leg_mass_fraction >= 0.10 {
            return err(format!(
                "leg_mass_fraction {} breaks the light-leg assumption (< 0.10)",
                self.body.leg_mass_fraction
            ));
        }
        if self.legs.a1 < 0.0 || self.legs.a2 <= 0.0 || self.legs.a3 <= 0.0 {
            return err("link lengths require a1 >= 0, a2 > 0, a3 > 0".into());
        }
        if self.mpc.horizon < 1 {
            return err("mpc horizon must be at least 1".into());
        }
        if !(self.mpc.update_rate > 0.0 && self.mpc.update_rate <= 30.0) {
            return err(format!(
                "mpc update_rate {} outside (0, 30] Hz",
                self.mpc.update_rate
            ));
        }
        if self.mpc.friction_mu <= 0.0 {
            return err("mpc friction_mu must be positive".into());
        }
        if !(self.mpc.fz_min >= 0.0 && self.mpc.fz_min < self.mpc.fz_max) {
            return err("require 0 <= fz_min < fz_max".into());
        }
        for (name, g) in [("trot", &self.trot), ("bound", &self.bound)] {
            if !(g.duty_factor > 0.0 && g.duty_factor <= 1.0) {
                return err(format!("gait.{name} duty_factor outside (0, 1]"));
            }
            if g.cycle_period <= 0.0 || g.step_height <= 0.0 {
                return err(format!("gait.{name} timing values must be positive"));
            }
        }
        if self.world.dt_sim <= 0.0 {
            return err("world dt_sim must be positive".into());
        }
        Ok(())
    }

    /// Leg configurations in order LF, RF, LH, RH.
    pub fn leg_configs(&self) -> [crate::kinematics::LegConfig; 4] {
        use crate::kinematics::{LegConfig, Side};
        let l = &self.legs;
        let mount = |sx: f64, sy: f64| Vector3::new(sx * l.mount_x, sy * l.mount_y, 0.0);
        [
            LegConfig::new(l.a1, l.a2, l.a3, mount(1.0, 1.0), Side::Left),
            LegConfig::new(l.a1, l.a2, l.a3, mount(1.0, -1.0), Side::Right),
            LegConfig::new(l.a1, l.a2, l.a3, mount(-1.0, 1.0), Side::Left),
            LegConfig::new(l.a1, l.a2, l.a3, mount(-1.0, -1.0), Side::Right),
        ]
    }

    pub fn body_params(&self) -> crate::dynamics::BodyParams {
        crate::dynamics::BodyParams {
            mass: self.body.mass,
            inertia_body: nalgebra::Matrix3::from_diagonal(&self.body.inertia),
            leg_mass_fraction: self.body.leg_mass_fraction,
        }
    }

    /// Nominal foot position in the torso frame for one leg.
    pub fn nominal_foothold(&self, leg: usize) -> Vector3<f64> {
        let cfgs = self.leg_configs();
        let mount = cfgs[leg].mount_offset;
        let sy = if mount.y >= 0.0 { 1.0 } else { -1.0 };
        Vector3::new(
            mount.x,
            mount.y + sy * self.legs.stance_spread,
            -self.legs.stand_height,
        )
    }

    /// Serialize the effective configuration back out in file form.
    pub fn to_file_string(&self) -> String {
        let b = &self.body;
        let l = &self.legs;
        let m = &self.mpc;
        let w = &self.world;
        let gait = |name: &str, g: &GaitConfig| {
            format!(
                "[gait.{name}]\ncycle_period = {}\nduty_factor = {}\nstep_height = {}\n\
                 stall_window = {}\nstall_threshold = {}\ntransition_dwell = {}\n",
                g.cycle_period,
                g.duty_factor,
                g.step_height,
                g.stall_window,
                g.stall_threshold,
                g.transition_dwell
            )
        };
        format!(
            "[body]\nmass = {}\ninertia_xx = {}\ninertia_yy = {}\ninertia_zz = {}\nleg_mass_fraction = {}\n\n\
             [legs]\na1 = {}\na2 = {}\na3 = {}\nmount_x = {}\nmount_y = {}\nstand_height = {}\n\
             stance_spread = {}\nswing_kp = {}\nswing_kd = {}\ntorque_limit = {}\nactuator_damping = {}\n\n\
             {}\n{}\n\
             [mpc]\nhorizon = {}\nupdate_rate = {}\nfriction_mu = {}\nfz_min = {}\nfz_max = {}\n\
             w_roll = {}\nw_pitch = {}\nw_yaw = {}\nw_x = {}\nw_y = {}\nw_z = {}\n\
             w_wx = {}\nw_wy = {}\nw_wz = {}\nw_vx = {}\nw_vy = {}\nw_vz = {}\n\
             r_force = {}\nmax_iter = {}\ntol = {}\n\n\
             [world]\nfriction_mu = {}\ngravity = {}\ncontact_stiffness = {}\ncontact_damping = {}\n\
             tangential_stiffness = {}\ntangential_damping = {}\ndt_sim = {}\nlog_timing = {}\n",
            b.mass, b.inertia.x, b.inertia.y, b.inertia.z, b.leg_mass_fraction,
            l.a1, l.a2, l.a3, l.mount_x, l.mount_y, l.stand_height,
            l.stance_spread, l.swing_kp, l.swing_kd, l.torque_limit, l.actuator_damping,
            gait("trot", &self.trot), gait("bound", &self.bound),
            m.horizon, m.update_rate, m.friction_mu, m.fz_min, m.fz_max,
            m.w_theta.x, m.w_theta.y, m.w_theta.z, m.w_pos.x, m.w_pos.y, m.w_pos.z,
            m.w_omega.x, m.w_omega.y, m.w_omega.z, m.w_vel.x, m.w_vel.y, m.w_vel.z,
            m.r_force, m.max_iter, m.tol,
            w.friction_mu, w.gravity, w.contact_stiffness, w.contact_damping,
            w.tangential_stiffness, w.tangential_damping, w.dt_sim, w.log_timing
        )
    }
}
