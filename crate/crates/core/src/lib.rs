//! Discrete and liquid recurrent cells, ODE solvers, BPTT training and a
//! benchmark harness for sequence prediction.

pub mod cells;
pub mod error;
pub mod graddiff;
pub mod harness;
pub mod model;
pub mod numerics;
pub mod solvers;
pub mod tasks;
pub mod training;

pub use error::{Error, Result};
