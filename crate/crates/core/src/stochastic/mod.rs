//! Seeded random streams and Gaussian-process boundary data.

mod gp;
mod rng;

pub use gp::{sample_gp, GpFunction, GpSampler, GpSpec, KernelAxis};
pub use rng::{child_seed, standard_normal, stream_rng, uniform, SplitRng};
