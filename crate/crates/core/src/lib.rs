//! Entropy of piecewise-smooth interval maps via folding entropy.

pub mod cli;
pub mod counterexample;
pub mod entropy;
pub mod error;
pub mod horseshoe;
pub mod interval;
pub mod maps;
pub mod measures;
pub mod partitions;
pub mod report;
pub mod roots;
pub mod svg;
pub mod verify;

pub use error::{Error, Result};
