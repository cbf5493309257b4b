pub mod convex;
pub mod distributed;
pub mod dynamics;
pub mod error;
pub mod lyapunov;
pub mod oracle;
pub mod problems;
pub mod runner;
pub mod verify;
pub mod stochastic;
pub mod vecops;

pub use convex::{ExtReal, GroupPartition, PhiSpec, TAU_DOM};
pub use error::{Error, Result};
