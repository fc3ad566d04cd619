//! Bound into a wall until the stall detector fires, then hand over to trot
//! through the four-foot dwell and back away.

use quadmpc::config::RobotConfig;
use quadmpc::sim::{run_scenario, ScenarioKind, ScenarioOptions};

fn main() {
    let cfg = RobotConfig::default();
    let opts = ScenarioOptions {
        duration: 15.0,
        seed: 7,
        ..ScenarioOptions::default()
    };

    let result = run_scenario(ScenarioKind::Transition, &cfg, &opts).expect("valid config");
    println!("outcome: {:?}", result.outcome);
    for r in &result.records {
        if !r.event.is_empty() {
            println!(
                "t = {:5.2} s  {:<20}  mode {}",
                r.t, r.event, r.gait_mode
            );
        }
    }
    let m = &result.metrics;
    if let (Some(stall), Some(tt)) = (m.stall_time, m.transition_time) {
        println!("stall detected at {stall:.2} s, trot established {tt:.2} s later");
    }

    // The machine guarantees a grounded four-foot dwell: the support margin
    // must be non-negative at every transitioning tick.
    let worst = result
        .records
        .iter()
        .filter(|r| r.gait_mode == "transitioning")
        .map(|r| r.support_margin)
        .fold(f64::INFINITY, f64::min);
    println!("worst support margin while transitioning: {worst:+.3} m");
}
