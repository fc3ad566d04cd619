//! CSV logging of closed-loop runs with a fixed column order so downstream
//! tooling can rely on positions.

use crate::gait::{LEG_NAMES, NUM_LEGS};
use nalgebra::Vector3;
use std::io::Write;
use std::path::Path;

/// One row of the run log, written once per control tick.
#[derive(Debug, Clone)]
pub struct TickRecord {
    pub t: f64,
    pub position: Vector3<f64>,
    /// Roll, pitch, yaw in radians.
    pub attitude: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub angular_velocity: Vector3<f64>,
    pub contact: [bool; NUM_LEGS],
    pub forces: [Vector3<f64>; NUM_LEGS],
    pub gait_mode: String,
    pub solver_status: String,
    pub kkt_residual: f64,
    pub solve_ms: f64,
    pub support_margin: f64,
    /// Free-form event marker for this tick (empty when nothing happened).
    pub event: String,
}

pub fn csv_header() -> String {
    let mut cols: Vec<String> = [
        "t", "x", "y", "z", "roll", "pitch", "yaw", "vx", "vy", "vz", "wx", "wy", "wz",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for name in LEG_NAMES {
        let n = name.to_lowercase();
        cols.push(format!("contact_{n}"));
        cols.push(format!("fx_{n}"));
        cols.push(format!("fy_{n}"));
        cols.push(format!("fz_{n}"));
    }
    for extra in [
        "gait_mode",
        "solver_status",
        "kkt_residual",
        "solve_ms",
        "support_margin",
        "event",
    ] {
        cols.push(extra.to_string());
    }
    cols.join(",")
}

fn fmt(v: f64) -> String {
    format!("{v:.8e}")
}

pub fn csv_row(r: &TickRecord) -> String {
    let mut cols = vec![
        fmt(r.t),
        fmt(r.position.x),
        fmt(r.position.y),
        fmt(r.position.z),
        fmt(r.attitude.x),
        fmt(r.attitude.y),
        fmt(r.attitude.z),
        fmt(r.velocity.x),
        fmt(r.velocity.y),
        fmt(r.velocity.z),
        fmt(r.angular_velocity.x),
        fmt(r.angular_velocity.y),
        fmt(r.angular_velocity.z),
    ];
    for leg in 0..NUM_LEGS {
        cols.push(if r.contact[leg] { "1" } else { "0" }.to_string());
        cols.push(fmt(r.forces[leg].x));
        cols.push(fmt(r.forces[leg].y));
        cols.push(fmt(r.forces[leg].z));
    }
    cols.push(r.gait_mode.clone());
    cols.push(r.solver_status.clone());
    cols.push(fmt(r.kkt_residual));
    cols.push(fmt(r.solve_ms));
    cols.push(fmt(r.support_margin));
    cols.push(r.event.clone());
    cols.join(",")
}

/// Write a full run log; a run with no ticks still gets the header line.
pub fn write_log(path: &Path, records: &[TickRecord]) -> std::io::Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "{}", csv_header())?;
    for r in records {
        writeln!(w, "{}", csv_row(r))?;
    }
    w.flush()
}
