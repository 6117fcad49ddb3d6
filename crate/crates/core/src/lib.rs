pub mod cli;
pub mod cows;
pub mod densities;
pub mod diagnostics;
pub mod error;
pub mod io;
pub mod linalg;
pub mod mlfit;
pub mod pipeline;
pub mod sweights;
pub mod toygen;
pub mod wcov;

pub use error::{Error, Result};
