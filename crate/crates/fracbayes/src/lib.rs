//! Command line, file formats, parallel execution and simulation studies for
//! [`fracbayes_core`].

pub mod cli;
pub mod config;
pub mod error;
pub mod exec;
pub mod experiments;
pub mod io;

pub use error::{Error, Result};
pub use exec::Parallel;
