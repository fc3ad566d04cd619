//! Lateral pulse rejection while standing: sweep the pulse magnitude and
//! report the recovery time of each run.

use quadmpc::config::RobotConfig;
use quadmpc::sim::{run_scenario, ScenarioKind, ScenarioOptions};

fn main() {
    let cfg = RobotConfig::default();
    println!("pulse    outcome      max tilt   recovery");
    for force in [25.0, 50.0, 100.0, 150.0] {
        let opts = ScenarioOptions {
            force,
            seed: 7,
            ..ScenarioOptions::default()
        };
        let result = run_scenario(ScenarioKind::Disturbance, &cfg, &opts).expect("valid config");
        let m = &result.metrics;
        let rec = m
            .recovery_time
            .map(|r| format!("{r:.2} s"))
            .unwrap_or_else(|| "none".into());
        println!(
            "{force:5.0} N  {:<11}  {:6.2} deg  {rec}",
            format!("{:?}", result.outcome),
            m.max_tilt.to_degrees()
        );
    }
}
