#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod design;
pub mod error;
pub mod gains;
pub mod graph;
pub mod metrics;
pub mod noise;
pub mod numeric;
pub mod resolvent;
pub mod scenarios;
pub mod sdde;

pub use error::{Error, Result};
