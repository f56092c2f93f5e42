pub mod cocycle;
pub mod config;
pub mod density;
pub mod driver;
pub mod error;
pub mod export;
pub mod fields;
pub mod maps;
pub mod neumann;
pub mod pipeline;
pub mod quadrature;
pub mod split;
pub mod torus;

pub use error::{Result, S3Error};
