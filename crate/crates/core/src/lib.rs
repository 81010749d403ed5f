pub mod data;
pub mod error;
pub mod identification;
pub mod support;
pub mod nuisance;
pub mod synth;
pub mod curves;
pub mod svg;
pub mod audit;
