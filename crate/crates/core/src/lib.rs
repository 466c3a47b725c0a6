pub mod bundle;
pub mod config;
pub mod dataset;
pub mod encoding;
pub mod error;
pub mod fsio;
pub mod generator;
pub mod model;
pub mod nn;
pub mod oracle;
pub mod par;
pub mod renderer;
pub mod solver;
pub mod trainers;

pub use error::{Error, Result};
