//! Serialization boundary: image files, configuration text, checkpoints, and
//! the on-disk dataset layout.

pub mod checkpoint;
pub mod config;
pub mod dataset;
pub mod pgm;
