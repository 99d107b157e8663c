//! Training, evaluation and serving on top of `big2-core`.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod evaluation;
pub mod gamelog;
pub mod play;
pub mod server;
pub mod trainer;
pub mod view;
