//! Library side of the `robinv` command-line tool: scenario construction and
//! the experiment driver, separated so integration tests can call them
//! directly.

pub mod deconv;
pub mod experiment;
pub mod out;
