//! Autonomous exploration planning on voxel maps.

pub mod geom;
pub mod voxel;
pub mod frontier;
pub mod global;
pub mod local;
pub mod sim;
pub mod explore;
