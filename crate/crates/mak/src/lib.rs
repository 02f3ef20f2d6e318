//! File formats, reports and the command-line front end for
//! [`mak_core`].

pub mod cli;
pub mod emb;
pub mod error;
pub mod loss;
pub mod manifest;
pub mod report;

pub use error::{Error, Result};
