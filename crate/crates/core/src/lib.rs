//! Capacity planning for cluster tools with two load locks.

pub mod cuts;
pub mod error;
pub mod flow;
pub mod generate;
pub mod instance;
pub mod lp;
pub mod models;
pub mod recipe;
pub mod redundancy;

pub use error::{Error, Result};
