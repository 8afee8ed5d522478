//! Obstruction reasoning for cluttered-scene grasp planning.
//!
//! The crate builds target-centric obstruction graphs from layered scenes,
//! renders them into `<think>`/`<answer>` reasoning traces, parses model
//! outputs back, and scores them with outcome-, relation- and path-level
//! metrics plus the verifiable rewards used for reinforcement fine-tuning.
//!
//! Batch entry points (`metrics::evaluate_dataset`, `rewards::reward_batch`,
//! `gen::generate_scenes`) fan out across samples with rayon when the
//! `parallel` feature is enabled and fall back to a sequential loop otherwise.

pub mod agents;
pub mod error;
pub mod exec;
pub mod gen;
pub mod geometry;
pub mod graph;
pub mod io;
pub mod manifest;
pub mod mask;
pub mod metrics;
pub mod rewards;
pub mod scene;
pub mod trace;
pub mod vqa;

pub use error::{Error, ErrorKind, Result};
pub use exec::Execution;
pub use geometry::{Degree, GeometryConfig, OcclusionRelation, RelationRecord};
pub use graph::{Difficulty, GraphRecord, RelationGraph, TargetGraph};
pub use mask::Mask;
pub use scene::{ObjectId, ObjectInstance, SceneRecord};
pub use trace::{ParsedTrace, Setting};

/// Version stamped into every document this crate writes.
pub const SCHEMA_VERSION: u32 = 1;

pub(crate) fn default_schema_version() -> u32 {
    SCHEMA_VERSION
}
