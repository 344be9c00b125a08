//! Deterministic quadruped traversal simulator.
//!
//! The simulator is kinematic-phenomenological: it does not integrate rigid
//! body dynamics, it shapes slips, joint signals and IMU accelerations as
//! explicit functions of commanded velocity, terrain parameters and payload.

mod render;
pub(crate) mod runlog;
mod sim;
mod terrain;

pub use render::{render_observation, Observation, IMAGE_CHANNELS, IMAGE_SIZE, OBSERVATION_LEN};
pub use runlog::{read_runlog, rollout, write_runlog, RunLog, RunLogHeader, StepRecord};
pub use sim::{
    ImuId, ImuSample, ProprioState, SimParams, SimState, StepOutput, LEG_LENGTH, PROPRIO_DIM,
};
pub use terrain::{make_terrain, TerrainClass, TerrainSpec};
