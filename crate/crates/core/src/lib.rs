//! Language-guided tabletop rearrangement with pattern priors and MCTS.

pub mod bench;
pub mod executor;
pub mod geometry;
pub mod instruction;
pub mod patterns;
pub mod planner;
pub mod scene;
