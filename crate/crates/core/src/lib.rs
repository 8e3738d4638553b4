pub mod assignment;
pub mod cli;
pub mod cnf;
pub mod derand;
pub mod encoding;
pub mod error;
pub mod gen;
pub mod solver;
pub mod witness;

pub use error::{Error, Result};
