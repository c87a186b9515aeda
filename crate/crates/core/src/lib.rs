pub mod classifier;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod independence;
pub mod kernels;
pub mod mmd;
pub mod rng;
pub mod samples;
pub mod sampling;
pub mod stats;
