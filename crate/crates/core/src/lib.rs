pub mod berry;
pub mod cli;
pub mod error;
pub mod fields;
pub mod gauge;
pub mod liealg;
pub mod random;
pub mod states;
pub mod texture;

pub use error::{Error, Result};
