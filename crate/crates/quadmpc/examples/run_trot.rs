//! Closed-loop trot on flat ground through the scenario runner, with the
//! tick log written to CSV.

use quadmpc::config::RobotConfig;
use quadmpc::sim::{log::write_log, run_scenario, ScenarioKind, ScenarioOptions};

fn main() {
    let cfg = RobotConfig::default();
    let opts = ScenarioOptions {
        duration: 10.0,
        seed: 7,
        ..ScenarioOptions::default()
    };

    let result = run_scenario(ScenarioKind::TrotFlat, &cfg, &opts).expect("valid config");
    let m = &result.metrics;
    println!("outcome:        {:?}", result.outcome);
    println!("distance:       {:.2} m in {:.1} s", m.distance_traveled, opts.duration);
    println!("max tilt:       {:.2} deg", m.max_tilt.to_degrees());
    println!("mean |z error|: {:.3} m", m.mean_height_error);
    println!(
        "QP solve time:  mean {:.1} ms, max {:.1} ms",
        m.mean_solve_ms, m.max_solve_ms
    );

    let out = std::env::temp_dir().join("quadmpc_trot.csv");
    write_log(&out, &result.records).expect("writable temp dir");
    println!("log written to {}", out.display());
}
