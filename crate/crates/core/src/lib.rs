//! Determinant-maximization (DMI) clustering and the crowd-aggregation
//! mechanisms built on it.

pub mod assignment;
pub mod cli;
pub mod clustering;
pub mod fixtures;
pub mod matrix;
pub mod mechanisms;
pub mod schema;
pub mod simulator;
pub mod single_task;

pub use assignment::AssignmentMatrix;
pub use clustering::{dmi_cluster, ClusterError, ClusteringResult, SolverConfig, SolverMode};
pub use matrix::DenseMatrix;
