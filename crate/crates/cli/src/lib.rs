//! File formats, the command-line front end and the acceptance suite for
//! `discomp-core`.

pub mod artifact;
pub mod commands;
pub mod config;
pub mod container;
pub mod ppm;
pub mod report;
pub mod suite;

pub use artifact::Artifact;
pub use commands::{run, CliError, Command, Context, Outcome};
pub use config::RunConfig;
pub use container::{Container, ContainerError};
