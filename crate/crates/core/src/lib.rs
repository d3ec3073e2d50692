pub mod drmot;
pub mod error;
pub mod experiment;
pub mod grid;
pub mod joint;
pub mod lp;
pub mod measures;
pub mod payoffs;

pub use error::{Error, Result};
