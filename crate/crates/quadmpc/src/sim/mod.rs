//! Deterministic closed-loop simulation harness: terrain and disturbance
//! models, a spring-damper contact plant, CSV logging and named scenarios.

pub mod log;
pub mod plant;
pub mod scenario;
pub mod world;

pub use plant::{Plant, SimError, SimState};
pub use scenario::{
    run_scenario, Metrics, Outcome, RunResult, ScenarioError, ScenarioKind, ScenarioOptions,
    SCENARIO_NAMES,
};
pub use world::{DisturbanceEvent, Terrain, WorldModel};
