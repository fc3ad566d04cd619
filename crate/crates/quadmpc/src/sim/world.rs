//! Terrain models and external disturbances.

use nalgebra::Vector3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Terrain {
    Flat,
    /// Plane rising along +x, angle in radians.
    Incline { angle: f64 },
    /// Height ripple along x: amplitude * sin(2 pi x / wavelength).
    SineUneven { amplitude: f64, wavelength: f64 },
    /// Flat at 0 before `position`, flat at `height` after. The riser face
    /// acts as a vertical wall for feet approaching from the low side.
    Step { height: f64, position: f64 },
}

/// Rectangular force pulse applied at the CoM.
#[derive(Debug, Clone, Copy)]
pub struct DisturbanceEvent {
    pub t_start: f64,
    pub duration: f64,
    pub force: Vector3<f64>,
}

impl DisturbanceEvent {
    pub fn active_at(&self, t: f64) -> bool {
        t >= self.t_start && t < self.t_start + self.duration
    }
}

#[derive(Debug, Clone)]
pub struct WorldModel {
    pub terrain: Terrain,
    pub friction_mu: f64,
    pub gravity: f64,
    pub disturbances: Vec<DisturbanceEvent>,
}

impl WorldModel {
    pub fn flat(friction_mu: f64, gravity: f64) -> Self {
        Self {
            terrain: Terrain::Flat,
            friction_mu,
            gravity,
            disturbances: Vec::new(),
        }
    }

    pub fn disturbance_at(&self, t: f64) -> Vector3<f64> {
        self.disturbances
            .iter()
            .filter(|d| d.active_at(t))
            .map(|d| d.force)
            .sum()
    }
}

pub fn terrain_height(terrain: &Terrain, x: f64, _y: f64) -> f64 {
    match *terrain {
        Terrain::Flat => 0.0,
        Terrain::Incline { angle } => x * angle.tan(),
        Terrain::SineUneven {
            amplitude,
            wavelength,
        } => amplitude * (2.0 * std::f64::consts::PI * x / wavelength).sin(),
        Terrain::Step { height, position } => {
            if x < position {
                0.0
            } else {
                height
            }
        }
    }
}

pub fn terrain_normal(terrain: &Terrain, x: f64, _y: f64) -> Vector3<f64> {
    match *terrain {
        Terrain::Flat | Terrain::Step { .. } => Vector3::z(),
        Terrain::Incline { angle } => Vector3::new(-angle.sin(), 0.0, angle.cos()),
        Terrain::SineUneven {
            amplitude,
            wavelength,
        } => {
            let k = 2.0 * std::f64::consts::PI / wavelength;
            let slope = amplitude * k * (k * x).cos();
            Vector3::new(-slope, 0.0, 1.0).normalize()
        }
    }
}
