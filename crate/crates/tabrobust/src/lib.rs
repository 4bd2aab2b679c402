//! File formats, parallel execution, pipelines and the command line for
//! the `tabrobust-core` engine.

pub mod cli;
pub mod exec;
pub mod io;
pub mod pipeline;

pub use tabrobust_core as core;
