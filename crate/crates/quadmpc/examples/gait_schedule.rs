//! Gait scheduling: trot and bound contact timelines, a swing-foot
//! trajectory, and the support-polygon stability margin.

use nalgebra::Vector3;
use quadmpc::gait::{contact_state, support_margin, swing_target, GaitDef, SwingParams};

fn timeline(name: &str, gait: &GaitDef, period: f64) {
    println!("{name} (cycle {period} s, duty {:.1}):", gait.duty_factor);
    let labels = ["LF", "RF", "LH", "RH"];
    for leg in 0..4 {
        let mut row = String::new();
        for k in 0..40 {
            let t = period * k as f64 / 40.0;
            row.push(if contact_state(gait, t)[leg] { '#' } else { '.' });
        }
        println!("  {} |{row}|", labels[leg]);
    }
}

fn main() {
    let trot = GaitDef::trot(0.6, 0.5);
    let bound = GaitDef::bound(0.4, 0.7);
    timeline("trot", &trot, 0.6);
    timeline("bound", &bound, 0.4);

    // Semi-elliptical swing trajectory from liftoff to touchdown.
    let params = SwingParams {
        step_height: 0.08,
        swing_duration: trot.swing_duration(),
    };
    let liftoff = Vector3::new(0.25, 0.16, 0.0);
    let touchdown = Vector3::new(0.40, 0.16, 0.0);
    println!("swing trajectory (phase, x, z):");
    for k in 0..=8 {
        let phase = k as f64 / 8.0;
        let p = swing_target(phase, &liftoff, &touchdown, &params);
        println!("  {phase:.3}  x={:.3}  z={:.3}", p.x, p.z);
    }

    // Stability margin of the CoM projection against two stance sets.
    let com = Vector3::new(0.0, 0.0, 0.42);
    let four = [
        Vector3::new(0.25, 0.16, 0.0),
        Vector3::new(0.25, -0.16, 0.0),
        Vector3::new(-0.25, 0.16, 0.0),
        Vector3::new(-0.25, -0.16, 0.0),
    ];
    let diagonal = [four[0], four[3]];
    println!("margin, four-foot stance:    {:+.3} m", support_margin(&four, &com));
    println!("margin, diagonal pair only:  {:+.3} m", support_margin(&diagonal, &com));
}
