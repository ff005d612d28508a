//! File formats, parallel execution, the experiment pipeline and the `dgpic`
//! command line on top of [`dgpic_core`].

mod binio;
pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod parallel;
pub mod pipeline;
pub mod protostore;
pub mod results;
pub mod xyz;

pub use error::{DgpicError, Result};
