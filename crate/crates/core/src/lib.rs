pub mod cli;
pub mod coordxform;
pub mod diffgeo;
pub mod error;
pub mod flatalgo;
pub mod reptest;
pub mod symcore;
pub mod sysdsl;

pub use error::{Error, Result};
