//! Everything around the `poscal` core that touches the filesystem: dataset
//! ingestion and featurization, synthetic data generation, model checkpoints,
//! report files, and the experiment runner behind the `poscal` binary.

pub mod checkpoint;
pub mod error;
pub mod experiment;
pub mod ingest;
pub mod report;
pub mod synth;

pub use error::CliError;
