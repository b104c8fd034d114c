//! Gradient boosting over structured categorical decision trees.
//!
//! Categorical predictors carry a *terrain*: the family of level subsets it
//! makes sense to pool. Terrains come from a level graph (connected proper
//! subsets) or from an explicit list. Tree nodes split on maximally coarse
//! partitions that conform to the node's terrain; for graph terrains these
//! are the bipartitions with both sides connected.

mod bits;
pub mod enumerate;
pub mod baselines;
pub mod bench;
pub mod boosting;
pub mod dataset;
pub mod encode;
pub mod error;
pub mod graph;
pub mod synth;
pub mod terrain;
pub mod tree;

pub use enumerate::{BinarySplitCandidate, PartitionCache};
pub use error::{Error, Result};
pub use graph::{Builtin, LevelGraph, LevelSet};
pub use terrain::{Partition, Terrain};
