//! Exact solvers, reductions, kernelization and hardness generators for
//! Connected Flow (min-cost circulation with connected support and
//! per-vertex demands) and Many-Visits TSP.

pub mod error;
pub mod instance;
pub mod oracle;
pub mod reduce;
pub mod tw;
pub mod diff;
pub mod relax;
pub mod vc;
pub mod kernel;
pub mod hardness;
pub mod cli;

pub use error::{Error, Result};
pub use instance::{
    mvtsp_to_cf, parse_cf, parse_mvtsp, parse_solution, verify_solution, write_cf, write_mvtsp,
    write_solution, Capacity, ConnectedFlowInstance, Edge, FlowAssignment, MVTSPInstance,
    VerificationReport, Vertex, Violation,
};
