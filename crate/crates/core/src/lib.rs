//! Ocean current field estimation from GPS drift and dead-reckoned
//! underwater trajectories.
//!
//! The pipeline has three layers:
//!
//! * [`kernels`] and [`gp`]: multi-output GP regression of planar currents,
//!   with a divergence-free kernel derived from a streamfunction prior and a
//!   diagonal baseline.
//! * [`estimator`]: an incremental EM loop that turns each dive cycle
//!   (dead-reckoned track plus surfacing GPS fix) into current estimates
//!   along the reconstructed track, which are fed back into the GP as
//!   pseudo-targets.
//! * [`simulator`], [`flowfield`] and [`harness`]: ground-truth fields, a
//!   waypoint-following vehicle simulator, and a Monte Carlo convergence
//!   study.

pub mod error;
pub mod estimator;
pub mod flowfield;
pub mod gp;
pub mod harness;
pub mod kernels;
pub mod simulator;
pub mod vec2;

pub use error::{Error, Result};
pub use estimator::{e_step, m_step, process_mission, run_em_cycle, EmConfig, EmState, MissionEstimate};
pub use flowfield::{divergence_fd, eval_field, eval_streamfunction, random_gyre, AnalyticField, FieldKind, Grid};
pub use gp::{downsample_targets, GpModel, ModelSnapshot, Prediction};
pub use kernels::{build_block_matrix, eval_kernel, eval_scalar_kernel, HyperParams, KernelKind, Mat2};
pub use simulator::{ingest_cycles, run_mission, step_dead_reckoned, step_truth, Cycle, MissionLog, VehicleConfig};
pub use vec2::Vec2;
