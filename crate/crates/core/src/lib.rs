#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli_io;
pub mod config;
pub mod datagen;
pub mod encoder_net;
pub mod error;
pub mod evalmetrics;
pub mod gridmap;
pub mod learners;
pub mod smppi;
pub mod terrain_sim;

pub use error::{Error, Result};
