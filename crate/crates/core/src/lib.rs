#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod controller;
pub mod environment;
pub mod error;
pub mod expert;
pub mod geometry;
pub mod harness;
pub mod io;
pub mod policy;
pub mod scenario;
pub mod verifier;

pub use error::{Error, Result};
