pub mod config;
pub mod contact;
pub mod coupling;
pub mod driver;
pub mod error;
pub mod halfspace;
pub mod io;
pub mod linalg;
pub mod minifem;
pub mod qsma;
pub mod rom;
pub mod sparse;
pub mod topography;
pub mod verify;

pub use error::{Error, Result};
